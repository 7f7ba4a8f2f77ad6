//! c-projective input data `(S, J, [D]_c)` and the line bundle `(𝔏, ∇)` in
//! complexified chart form.
//!
//! A complex torsion-free connection preserving `J` is stored through its
//! holomorphic-index Christoffel symbols `Γ^k_ij(z, zb)` only. Mixed blocks
//! vanish identically and the antiholomorphic block is the formal conjugate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::polynomial_algebra::{
    max_exponents_of, LeafKind, PolyField, Powers, RationalField,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Christoffel symbols `Γ^k_ij` of a representative of a c-projective class.
#[derive(Debug, Clone, PartialEq)]
pub struct CProjectiveData {
    n: usize,
    /// Flattened `[k][i][j]`.
    gamma: Vec<RationalField>,
}

impl CProjectiveData {
    pub fn flat(n: usize) -> Self {
        CProjectiveData {
            n,
            gamma: vec![RationalField::zero(n); n * n * n],
        }
    }

    /// Builds data from a flattened `[k][i][j]` table; symmetry in `(i, j)`
    /// must hold exactly.
    pub fn new(n: usize, gamma: Vec<RationalField>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("complex dimension must be >= 2, got {n}")));
        }
        if gamma.len() != n * n * n {
            return Err(Error::Dimension {
                expected: n * n * n,
                got: gamma.len(),
            });
        }
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    if gamma[(k * n + i) * n + j] != gamma[(k * n + j) * n + i] {
                        return Err(Error::InvalidInput(format!(
                            "Christoffel symbol not symmetric in lower indices at ({},{},{})",
                            k + 1,
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        if gamma.iter().any(|g| g.num_vars() != n) {
            return Err(Error::InvalidInput("Christoffel over wrong variable count".into()));
        }
        Ok(CProjectiveData { n, gamma })
    }

    /// Builds data from sparse `(k, i, j)` entries (0-based); the mirrored
    /// entry `(k, j, i)` is filled in automatically.
    pub fn from_entries(n: usize, entries: BTreeMap<(usize, usize, usize), RationalField>) -> Result<Self> {
        let mut gamma = vec![RationalField::zero(n); n * n * n];
        let mut set = vec![false; n * n * n];
        for ((k, i, j), f) in entries {
            if k >= n || i >= n || j >= n {
                return Err(Error::InvalidInput(format!("index ({k},{i},{j}) out of range")));
            }
            for (a, b) in [(i, j), (j, i)] {
                let idx = (k * n + a) * n + b;
                if set[idx] && gamma[idx] != f {
                    return Err(Error::InvalidInput(format!(
                        "conflicting entries for Γ^{}_{}{}",
                        k + 1,
                        i + 1,
                        j + 1
                    )));
                }
                gamma[idx] = f.clone();
                set[idx] = true;
            }
        }
        Self::new(n, gamma)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &RationalField {
        &self.gamma[(k * self.n + i) * self.n + j]
    }

    pub fn christoffels(&self) -> &[RationalField] {
        &self.gamma
    }

    /// Antiholomorphic block `Γ^k̄_īj̄` as functions of `(z, zb)`.
    pub fn conjugate_christoffels(&self) -> Vec<RationalField> {
        self.gamma.iter().map(|g| g.formal_conjugate()).collect()
    }

    pub fn is_flat_data(&self) -> bool {
        self.gamma.iter().all(|g| g.is_zero())
    }

    /// Checks that the conjugate block evaluated on the diagonal is the
    /// complex conjugate of the holomorphic block. Returns the max deviation.
    pub fn reality_residual(&self, points: &[Vec<Complex64>]) -> Result<f64> {
        let conj = self.conjugate_christoffels();
        let mut worst: f64 = 0.0;
        for z in points {
            for (g, gc) in self.gamma.iter().zip(&conj) {
                let a = g.diagonal_eval(z)?;
                let b = gc.diagonal_eval(z)?;
                worst = worst.max((a.conj() - b).norm());
            }
        }
        Ok(worst)
    }
}

/// Holomorphic connection form `θ_i(z, zb)` of `∇` on `𝔏`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineBundleData {
    theta: Vec<RationalField>,
}

impl LineBundleData {
    pub fn trivial(n: usize) -> Self {
        LineBundleData {
            theta: vec![RationalField::zero(n); n],
        }
    }

    pub fn new(theta: Vec<RationalField>) -> Result<Self> {
        let n = theta.len();
        if theta.iter().any(|t| t.num_vars() != n) {
            return Err(Error::InvalidInput("θ components over wrong variable count".into()));
        }
        Ok(LineBundleData { theta })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[RationalField] {
        &self.theta
    }

    /// Max of `|∂_i θ_j − ∂_j θ_i|` over the sample points: the (2,0) part of
    /// the curvature.
    pub fn curvature_20_residual(&self, points: &[(Vec<Complex64>, Vec<Complex64>)]) -> Result<f64> {
        let n = self.n();
        let mx = max_exponents_of(&self.theta, 2 * n);
        let mut worst: f64 = 0.0;
        for (z, zb) in points {
            let pw = Powers::new(z, zb, &mx);
            let jets = self
                .theta
                .iter()
                .map(|t| t.eval_jet(&pw, 1))
                .collect::<Result<Vec<_>>>()?;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((jets[j].grad[i] - jets[i].grad[j]).norm());
                }
            }
        }
        Ok(worst)
    }
}

/// A real 1-form in type-split components.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub gamma_h: Vec<RationalField>,
    pub gamma_a: Vec<RationalField>,
}

impl OneForm {
    /// Real form determined by its (1,0) part; the (0,1) part is the formal
    /// conjugate.
    pub fn from_holomorphic(gamma_h: Vec<RationalField>) -> Self {
        let gamma_a = gamma_h.iter().map(|g| g.formal_conjugate()).collect();
        OneForm { gamma_h, gamma_a }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_holomorphic(vec![RationalField::zero(n); n])
    }

    pub fn n(&self) -> usize {
        self.gamma_h.len()
    }

    pub fn neg(&self) -> Self {
        OneForm {
            gamma_h: self.gamma_h.iter().map(|g| g.neg()).collect(),
            gamma_a: self.gamma_a.iter().map(|g| g.neg()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let gamma_h = self
            .gamma_h
            .iter()
            .zip(&other.gamma_h)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        let gamma_a = self
            .gamma_a
            .iter()
            .zip(&other.gamma_a)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(OneForm { gamma_h, gamma_a })
    }

    /// Real components `(γ_x1, γ_y1, γ_x2, γ_y2, ...)` at the real point `z`.
    pub fn real_components(&self, z: &[Complex64]) -> Result<DVector<f64>> {
        let n = self.n();
        let mut out = DVector::zeros(2 * n);
        for i in 0..n {
            let h = self.gamma_h[i].diagonal_eval(z)?;
            let a = self.gamma_a[i].diagonal_eval(z)?;
            // ∂_x = ∂_z + ∂_zb, ∂_y = i(∂_z − ∂_zb)
            out[2 * i] = (h + a).re;
            out[2 * i + 1] = (Complex64::i() * (h - a)).re;
        }
        Ok(out)
    }
}

/// The complex structure of `S` in the real frame `(x1, y1, x2, y2, ...)`.
pub fn standard_complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(2 * i + 1, 2 * i)] = 1.0;
        j[(2 * i, 2 * i + 1)] = -1.0;
    }
    j
}

/// `½(γ(Y)Z + γ(Z)Y − γ(JY)JZ − γ(JZ)JY)` in the real chart frame.
pub fn c_bracket(y: &DVector<f64>, gamma: &OneForm, zv: &DVector<f64>, point: &[Complex64]) -> Result<DVector<f64>> {
    let g = gamma.real_components(point)?;
    let j = standard_complex_structure(gamma.n());
    let jy = &j * y;
    let jz = &j * zv;
    Ok((zv * g.dot(y) + y * g.dot(zv) - &jz * g.dot(&jy) - &jy * g.dot(&jz)) * 0.5)
}

/// `½(γ(Y)Z + γ(Z)Y − Σ_i (γ(I_i Y) I_i Z + γ(I_i Z) I_i Y))`.
///
/// `gamma` holds the real covector at the evaluation point.
pub fn q_bracket(
    y: &DVector<f64>,
    gamma: &DVector<f64>,
    zv: &DVector<f64>,
    frame: &[DMatrix<f64>; 3],
) -> Result<DVector<f64>> {
    let residual = quaternion_relation_residual(frame);
    if residual > 1e-10 {
        return Err(Error::Frame { residual });
    }
    let mut out = zv * gamma.dot(y) + y * gamma.dot(zv);
    for ii in frame {
        let iy = ii * y;
        let iz = ii * zv;
        out -= &iz * gamma.dot(&iy) + &iy * gamma.dot(&iz);
    }
    Ok(out * 0.5)
}

/// Max-norm residual of `I² = J² = K² = IJK = −Id` (and `IJ = K`).
pub fn quaternion_relation_residual(frame: &[DMatrix<f64>; 3]) -> f64 {
    let d = frame[0].nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let max = |m: DMatrix<f64>| m.amax();
    let [i, j, k] = frame;
    [
        max(i * i + &id),
        max(j * j + &id),
        max(k * k + &id),
        max(i * j * k + &id),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `D' = D + ⟨·, γ⟩_c`, i.e. `Γ'^k_ij = Γ^k_ij + γ_i δ^k_j + γ_j δ^k_i`.
pub fn change_representative(data: &CProjectiveData, gamma: &OneForm) -> Result<CProjectiveData> {
    let n = data.n();
    if gamma.n() != n {
        return Err(Error::Dimension {
            expected: n,
            got: gamma.n(),
        });
    }
    let mut out = data.gamma.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let idx = (k * n + i) * n + j;
                if k == j {
                    out[idx] = out[idx].add(&gamma.gamma_h[i])?;
                }
                if k == i {
                    out[idx] = out[idx].add(&gamma.gamma_h[j])?;
                }
            }
        }
    }
    CProjectiveData::new(n, out)
}

/// Connection form `τ_i = (1/(n+1)) Γ^c_ic` induced on `O(1)`, with
/// `∇_i l = ∂_i l + τ_i l` in the frame `(∂_1 ∧ … ∧ ∂_n)^{1/(n+1)}`.
pub fn o1_connection_form(data: &CProjectiveData) -> Result<OneForm> {
    let n = data.n();
    let w = Complex64::new(1.0 / (n as f64 + 1.0), 0.0);
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = RationalField::zero(n);
        for c in 0..n {
            acc = acc.add(data.christoffel(c, i, c))?;
        }
        h.push(acc.scale(w));
    }
    Ok(OneForm::from_holomorphic(h))
}

/// Full curvature of the connection at a complexified point, in the frame
/// `(∂_z1..∂_zn, ∂_zb1..∂_zbn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureAtPoint {
    dim: usize,
    data: Vec<Complex64>,
}

impl CurvatureAtPoint {
    fn zeros(dim: usize) -> Self {
        CurvatureAtPoint {
            dim,
            data: vec![ZERO; dim.pow(4)],
        }
    }

    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    /// `R^a_{bcd}`: component `a` of `R(e_c, e_d) e_b`.
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        self.data[self.idx(a, b, c, d)]
    }

    fn set_antisym(&mut self, a: usize, b: usize, c: usize, d: usize, v: Complex64) {
        let i = self.idx(a, b, c, d);
        let j = self.idx(a, b, d, c);
        self.data[i] = v;
        self.data[j] = -v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max modulus over components with `c, d` both holomorphic or both
    /// antiholomorphic.
    pub fn pure_type_norm(&self) -> f64 {
        let n = self.dim / 2;
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    for d in 0..self.dim {
                        if (c < n) == (d < n) {
                            worst = worst.max(self.get(a, b, c, d).norm());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Max over `|R^a_{bcd} + R^a_{cdb} + R^a_{dbc}|`.
    pub fn bianchi_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let s = self.get(a, b, c, d) + self.get(a, c, d, b) + self.get(a, d, b, c);
                        worst = worst.max(s.norm());
                    }
                }
            }
        }
        worst
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Values and first derivatives (over all `2n` slots) of a Christoffel table.
struct ChristoffelJets {
    n: usize,
    val: Vec<Complex64>,
    grad: Vec<Vec<Complex64>>,
}

impl ChristoffelJets {
    fn eval(fields: &[RationalField], n: usize, z: &[Complex64], zb: &[Complex64]) -> Result<Self> {
        let pw = Powers::new(z, zb, &max_exponents_of(fields, 2 * n));
        let mut val = Vec::with_capacity(fields.len());
        let mut grad = Vec::with_capacity(fields.len());
        for f in fields {
            let j = f.eval_jet(&pw, 1)?;
            val.push(j.value);
            grad.push(j.grad);
        }
        Ok(ChristoffelJets { n, val, grad })
    }

    fn g(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.val[(k * self.n + i) * self.n + j]
    }

    fn dg(&self, slot: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.grad[(k * self.n + i) * self.n + j][slot]
    }
}

/// `R_{cd}{}^a{}_b = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb`
/// for a block with derivative slots offset by `slot0`.
fn block_curvature(jets: &ChristoffelJets, slot0: usize, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
    let n = jets.n;
    let mut v = jets.dg(slot0 + c, a, d, b) - jets.dg(slot0 + d, a, c, b);
    for e in 0..n {
        v += jets.g(a, c, e) * jets.g(e, d, b) - jets.g(a, d, e) * jets.g(e, c, b);
    }
    v
}

/// Curvature `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z` on coordinate fields.
pub fn curvature(data: &CProjectiveData, z: &[Complex64], zb: &[Complex64]) -> Result<CurvatureAtPoint> {
    let n = data.n();
    let hol = ChristoffelJets::eval(&data.gamma, n, z, zb)?;
    let conj = ChristoffelJets::eval(&data.conjugate_christoffels(), n, z, zb)?;
    let mut r = CurvatureAtPoint::zeros(2 * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if c < d {
                        r.set_antisym(a, b, c, d, block_curvature(&hol, 0, a, b, c, d));
                        r.set_antisym(n + a, n + b, n + c, n + d, block_curvature(&conj, n, a, b, c, d));
                    }
                    // R(∂_c̄, ∂_d)∂_b = ∂_zb_c Γ^a_db ∂_a
                    r.set_antisym(a, b, n + c, d, hol.dg(n + c, a, d, b));
                    // R(∂_c, ∂_d̄)∂_b̄ = ∂_z_c Γ̄^a_db ∂_ā
                    r.set_antisym(n + a, n + b, c, n + d, conj.dg(c, a, d, b));
                }
            }
        }
    }
    Ok(r)
}

/// Grid of real points used for sampled checks: `points_per_axis^n` points
/// inside the polydisc of the given radius.
pub fn sample_grid(n: usize, radius: f64, points_per_axis: usize) -> Vec<Vec<Complex64>> {
    let m = points_per_axis.max(1);
    let axis: Vec<Complex64> = (0..m)
        .map(|k| {
            let r = if m == 1 { 0.0 } else { 0.9 * radius * k as f64 / (m - 1) as f64 };
            Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / m as f64 + 0.3)
        })
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * m);
        for p in &out {
            for (k, v) in axis.iter().enumerate() {
                let mut q = p.clone();
                // decorrelate the coordinates
                q.push(*v * Complex64::from_polar(1.0, 0.7 * (q.len() * k) as f64));
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Outcome of a sampled type-(1,1) test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Type11Check {
    pub is_type_11: bool,
    pub residual: f64,
}

/// Tolerance separating type-(1,1) data from violations.
pub const TYPE11_TOL: f64 = 1e-10;

/// Type-(1,1) test for the curvature of `D` on the diagonal sample grid.
pub fn is_type_11(data: &CProjectiveData, grid: &[Vec<Complex64>]) -> Result<Type11Check> {
    let mut worst: f64 = 0.0;
    for z in grid {
        let zb: Vec<Complex64> = z.iter().map(|c| c.conj()).collect();
        worst = worst.max(curvature(data, z, &zb)?.pure_type_norm());
    }
    Ok(Type11Check {
        is_type_11: worst < TYPE11_TOL,
        residual: worst,
    })
}

/// Type-(1,1) test for the curvature of `∇`.
pub fn is_type_11_bundle(bundle: &LineBundleData, grid: &[Vec<Complex64>]) -> Result<Type11Check> {
    let pts: Vec<_> = grid
        .iter()
        .map(|z| (z.clone(), z.iter().map(|c| c.conj()).collect()))
        .collect();
    let worst = bundle.curvature_20_residual(&pts)?;
    Ok(Type11Check {
        is_type_11: worst < TYPE11_TOL,
        residual: worst,
    })
}

/// Connection along one leaf: Christoffels restricted to the leaf, as
/// functions of the leaf coordinates only.
#[derive(Debug, Clone)]
pub struct LeafConnection {
    pub kind: LeafKind,
    pub param: Vec<Complex64>,
    /// Flattened `[k][i][j]`, depending on the leaf variables only.
    pub christoffels: Vec<RationalField>,
    max_exp: Vec<u32>,
}

impl LeafConnection {
    pub fn new(data: &CProjectiveData, kind: LeafKind, param: &[Complex64]) -> Result<Self> {
        let source = match kind {
            LeafKind::Holomorphic => data.gamma.clone(),
            LeafKind::AntiHolomorphic => data.conjugate_christoffels(),
        };
        let christoffels = source
            .iter()
            .map(|g| g.restrict_to_leaf(kind, param))
            .collect::<Result<Vec<_>>>()?;
        let max_exp = max_exponents_of(&christoffels, 2 * data.n());
        Ok(LeafConnection {
            kind,
            param: param.to_vec(),
            christoffels,
            max_exp,
        })
    }

    pub fn n(&self) -> usize {
        self.param.len()
    }

    /// Slot offset of the leaf variables.
    pub fn slot0(&self) -> usize {
        match self.kind {
            LeafKind::Holomorphic => 0,
            LeafKind::AntiHolomorphic => self.n(),
        }
    }

    /// Full `(z, zb)` point for a leaf coordinate `u`.
    pub fn ambient(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        match self.kind {
            LeafKind::Holomorphic => (u.to_vec(), self.param.clone()),
            LeafKind::AntiHolomorphic => (self.param.clone(), u.to_vec()),
        }
    }

    /// Leaf curvature `R_{cd}{}^a{}_b` flattened as `[c][d][a][b]`.
    pub fn curvature(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        let (z, zb) = self.ambient(u);
        let pw = Powers::new(&z, &zb, &self.max_exp);
        let mut val = Vec::with_capacity(self.christoffels.len());
        let mut grad = Vec::with_capacity(self.christoffels.len());
        for f in &self.christoffels {
            let j = f.eval_jet(&pw, 1)?;
            val.push(j.value);
            grad.push(j.grad);
        }
        let jets = ChristoffelJets { n, val, grad };
        let s0 = self.slot0();
        let mut out = vec![ZERO; n.pow(4)];
        for c in 0..n {
            for d in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        out[((c * n + d) * n + a) * n + b] = block_curvature(&jets, s0, a, b, c, d);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Ricci `Ric_db = R_{cd}{}^c{}_b` of a flattened leaf curvature.
pub fn ricci(curv: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut ric = vec![ZERO; n * n];
    for d in 0..n {
        for b in 0..n {
            for c in 0..n {
                ric[d * n + b] += curv[((c * n + d) * n + c) * n + b];
            }
        }
    }
    ric
}

/// Projective Schouten tensor `P = Ric_(sym)/(n−1) + Ric_[alt]/(n+1)`.
pub fn schouten(ric: &[Complex64], n: usize) -> Vec<Complex64> {
    let nf = n as f64;
    let mut p = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let sym = 0.5 * (ric[i * n + j] + ric[j * n + i]);
            let alt = 0.5 * (ric[i * n + j] - ric[j * n + i]);
            p[i * n + j] = sym / (nf - 1.0) + alt / (nf + 1.0);
        }
    }
    p
}

/// Projective Weyl tensor of the leaf connection, flattened `[c][d][a][b]`:
/// `W = R − (P_dc − P_cd) δ^a_b + P_cb δ^a_d − P_db δ^a_c`.
pub fn weyl_projective(leaf: &LeafConnection, u: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = leaf.n();
    let r = leaf.curvature(u)?;
    let p = schouten(&ricci(&r, n), n);
    let mut w = r;
    for c in 0..n {
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut corr = ZERO;
                    if a == b {
                        corr += p[d * n + c] - p[c * n + d];
                    }
                    if a == d {
                        corr -= p[c * n + b];
                    }
                    if a == c {
                        corr += p[d * n + b];
                    }
                    w[((c * n + d) * n + a) * n + b] -= corr;
                }
            }
        }
    }
    Ok(w)
}

/// A sampled endomorphism field on an open set of `R^m`.
pub trait EndomorphismField {
    fn dim(&self) -> usize;
    fn contains(&self, p: &[f64]) -> bool;
    fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>>;
}

/// Central-difference Nijenhuis tensor norm
/// `N(X,Y) = [JX,JY] − J[JX,Y] − J[X,JY] − [X,Y]` over coordinate frame pairs.
pub fn nijenhuis<F: EndomorphismField + ?Sized>(field: &F, point: &[f64], step: f64) -> Result<f64> {
    let m = field.dim();
    let mut stencil_ok = field.contains(point);
    let mut derivs = Vec::with_capacity(m);
    for a in 0..m {
        let mut pp = point.to_vec();
        let mut pm = point.to_vec();
        pp[a] += step;
        pm[a] -= step;
        stencil_ok &= field.contains(&pp) && field.contains(&pm);
        if !stencil_ok {
            return Err(Error::Grid);
        }
        derivs.push((field.eval(&pp)? - field.eval(&pm)?) / (2.0 * step));
    }
    let j = field.eval(point)?;
    Ok(nijenhuis_from_derivatives(&j, &derivs))
}

/// `N^k_ij = J^m_i ∂_m J^k_j − J^m_j ∂_m J^k_i − J^k_m (∂_i J^m_j − ∂_j J^m_i)`;
/// `derivs[m]` is `∂_m J`. Returns the max-norm.
pub fn nijenhuis_from_derivatives(j: &DMatrix<f64>, derivs: &[DMatrix<f64>]) -> f64 {
    let m = j.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for jj in 0..m {
            for k in 0..m {
                let mut v = 0.0;
                for l in 0..m {
                    v += j[(l, i)] * derivs[l][(k, jj)] - j[(l, jj)] * derivs[l][(k, i)];
                    v -= j[(k, l)] * (derivs[i][(l, jj)] - derivs[jj][(l, i)]);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// `∂log(1 + Σ z_i zb_i)` components scaled by `c`: `c·zb_i / (1 + z·zb)`.
pub fn fs_log_form(n: usize, c: Complex64) -> Result<Vec<RationalField>> {
    let u = fs_potential_den(n)?;
    (0..n)
        .map(|i| RationalField::new(PolyField::zb(n, i).scale(c), u.clone()))
        .collect()
}

/// `1 + Σ z_i zb_i`.
pub fn fs_potential_den(n: usize) -> Result<PolyField> {
    let mut u = PolyField::one(n);
    for i in 0..n {
        u = u.add(&PolyField::z(n, i).checked_mul(&PolyField::zb(n, i))?);
    }
    Ok(u)
}

mod instances;
pub use instances::{fs_instance, fs_shift_form, pert_instance};

#[cfg(test)]
mod tests;
