//! Charts of the twistor space `Z`: the blow-down maps `φ±` from the
//! projective bundle `𝒫` over `S × S̄` into the duals of the affine-section
//! spaces, the gluing, the `C*`-action and the real structure.
//!
//! Plus-chart points are `(x̃, s)` with `s ∈ (V⁺_x̃)*` written in the basis of
//! affine sections on the (1,0)-leaf `zb = x̃`. Minus-chart points are
//! `(x, t)` over the (0,1)-leaf `z = x`. All bases are normalized at the
//! leaf point with vanishing leaf coordinates, so the dualization `l ↦ l*`
//! is the scalar reciprocal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cproj_geometry::{o1_connection_form, CProjectiveData, LineBundleData};
use crate::error::{Error, Result};
use crate::polynomial_algebra::{max_exponents_of, LeafKind, Powers, RationalField};
use crate::tractor_transport::{transport_matrix, LeafContext, Path, TractorSetup, TransportConfig};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Chart {
    Plus,
    Minus,
}

impl Chart {
    pub fn opposite(self) -> Self {
        match self {
            Chart::Plus => Chart::Minus,
            Chart::Minus => Chart::Plus,
        }
    }

    pub fn leaf_kind(self) -> LeafKind {
        match self {
            Chart::Plus => LeafKind::Holomorphic,
            Chart::Minus => LeafKind::AntiHolomorphic,
        }
    }
}

/// Point of a chart of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart: Chart,
    pub base: Vec<Complex64>,
    pub covector: DVector<Complex64>,
}

impl ChartPoint {
    pub fn new(chart: Chart, base: Vec<Complex64>, covector: DVector<Complex64>) -> Self {
        ChartPoint { chart, base, covector }
    }

    pub fn distance(&self, other: &ChartPoint) -> f64 {
        if self.chart != other.chart {
            return f64::INFINITY;
        }
        let b = self
            .base
            .iter()
            .zip(&other.base)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let c = (&self.covector - &other.covector)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        b.max(c)
    }
}

/// Point of `𝒫 = P(L_{1,0} ⊕ L_{0,1})` over `(x, x̃)`; the plus-chart scalar
/// is `l = l₀ / l₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PPoint {
    pub x: Vec<Complex64>,
    pub xbar: Vec<Complex64>,
    pub fiber: [Complex64; 2],
}

impl PPoint {
    pub fn new(x: Vec<Complex64>, xbar: Vec<Complex64>, fiber: [Complex64; 2]) -> Result<Self> {
        if fiber[0] == Complex64::new(0.0, 0.0) && fiber[1] == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidInput("projective fiber coordinates both zero".into()));
        }
        Ok(PPoint { x, xbar, fiber })
    }

    /// `[l₀ : l₁] ↦ [l₁ : l₀]`.
    pub fn dual(&self) -> Self {
        PPoint {
            x: self.x.clone(),
            xbar: self.xbar.clone(),
            fiber: [self.fiber[1], self.fiber[0]],
        }
    }
}

/// Chart limits: metric balls for the base and a bound on covector size.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TwistorConfig {
    pub domain_radius: f64,
    pub covector_cutoff: f64,
    pub transport: TransportConfig,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
}

impl Default for TwistorConfig {
    fn default() -> Self {
        TwistorConfig::with_radius(0.8, 2)
    }
}

impl TwistorConfig {
    /// Fixed RK4 step count so that evaluations depend smoothly on every
    /// argument.
    pub fn with_radius(domain_radius: f64, n: usize) -> Self {
        let reach = 2.0 * domain_radius * (n as f64).sqrt();
        TwistorConfig {
            domain_radius,
            covector_cutoff: 10.0,
            transport: TransportConfig {
                fixed_steps: Some(((64.0 * reach).ceil() as usize).max(32)),
                ..TransportConfig::default()
            },
            newton_max_iter: 50,
            newton_tol: 1e-11,
        }
    }
}

/// Evaluation row of the affine-section basis and its leaf derivatives.
#[derive(Debug, Clone)]
pub struct EvalJet {
    pub value: DVector<Complex64>,
    /// `∂E/∂u_i` for the leaf coordinates `u`.
    pub grad: Vec<DVector<Complex64>>,
}

/// Annihilator of the `L±` fiber at one base point.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    pub chart: Chart,
    pub base: Vec<Complex64>,
    /// Jet of the line generator at the leaf basepoint; `s ∈ D` iff `s·v = 0`.
    pub normal: DVector<Complex64>,
    /// Orthonormal (Hermitian) spanning set of `{s : s·v = 0}`.
    pub basis: Vec<DVector<Complex64>>,
}

impl Hyperplane {
    pub fn contains(&self, s: &DVector<Complex64>, tol: f64) -> bool {
        self.residual(s) <= tol
    }

    pub fn residual(&self, s: &DVector<Complex64>) -> f64 {
        (s.transpose() * &self.normal)[(0, 0)].norm()
    }
}

/// The glued twistor space of an instance.
#[derive(Debug, Clone)]
pub struct TwistorSpace {
    setup: TractorSetup,
    pub config: TwistorConfig,
    tau_h: Vec<RationalField>,
}

impl TwistorSpace {
    pub fn new(data: &CProjectiveData, bundle: &LineBundleData, config: TwistorConfig) -> Result<Self> {
        let setup = TractorSetup::new(data, bundle)?;
        let tau_h = o1_connection_form(data)?.gamma_h;
        Ok(TwistorSpace { setup, config, tau_h })
    }

    pub fn n(&self) -> usize {
        self.setup.n()
    }

    pub fn setup(&self) -> &TractorSetup {
        &self.setup
    }

    pub fn data(&self) -> &CProjectiveData {
        self.setup.data()
    }

    pub fn leaf(&self, chart: Chart, base: &[Complex64]) -> Result<LeafContext> {
        self.setup.leaf(chart.leaf_kind(), base)
    }

    fn origin(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.n()]
    }

    /// Evaluation at leaf point `u` of the basis of affine sections over the
    /// leaf with parameter `base`, with first derivatives in `u`.
    pub fn eval_jet(&self, chart: Chart, base: &[Complex64], u: &[Complex64]) -> Result<EvalJet> {
        let leaf = self.leaf(chart, base)?;
        eval_jet_on(&leaf, u, &self.config.transport)
    }

    pub fn eval_row(&self, chart: Chart, base: &[Complex64], u: &[Complex64]) -> Result<DVector<Complex64>> {
        let leaf = self.leaf(chart, base)?;
        let phi = transport_matrix(&leaf, &Path::segment(&self.origin(), u), &self.config.transport)?;
        Ok(phi.row(0).transpose())
    }

    /// `(x, x̃, l) ↦ (x̃, l·E⁺_x̃(x))`.
    pub fn phi_plus(&self, x: &[Complex64], xbar: &[Complex64], l: Complex64) -> Result<ChartPoint> {
        let e = self.eval_row(Chart::Plus, xbar, x)?;
        Ok(ChartPoint::new(Chart::Plus, xbar.to_vec(), e * l))
    }

    /// `(x, x̃, l) ↦ (x, l⁻¹·E⁻_x(x̃))`, the minus image of the plus scalar `l`.
    pub fn phi_minus(&self, x: &[Complex64], xbar: &[Complex64], l: Complex64) -> Result<ChartPoint> {
        let e = self.eval_row(Chart::Minus, x, xbar)?;
        Ok(ChartPoint::new(Chart::Minus, x.to_vec(), e / l))
    }

    /// Chart image of a point of `𝒫`: plus chart when `|l₀| ≤ |l₁|`.
    pub fn project(&self, p: &PPoint) -> Result<ChartPoint> {
        if p.fiber[0].norm() <= p.fiber[1].norm() {
            self.phi_plus(&p.x, &p.xbar, p.fiber[0] / p.fiber[1])
        } else {
            self.phi_minus(&p.x, &p.xbar, p.fiber[0] / p.fiber[1])
        }
    }

    /// Solves `covector = l·E(u)` for the leaf point `u` and the scalar `l`
    /// by damped Newton, starting at `guess` (default: the diagonal point
    /// `conj(base)`).
    pub fn invert(&self, p: &ChartPoint, guess: Option<&[Complex64]>) -> Result<(Vec<Complex64>, Complex64)> {
        let n = self.n();
        let s = &p.covector;
        if s.len() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                got: s.len(),
            });
        }
        if s.iter().all(|v| v.norm() == 0.0) {
            return Err(Error::ZeroSection);
        }
        let leaf = self.leaf(p.chart, &p.base)?;
        let mut u: Vec<Complex64> = match guess {
            Some(g) => g.to_vec(),
            None => p.base.iter().map(|v| v.conj()).collect(),
        };
        let e0 = eval_jet_on(&leaf, &u, &self.config.transport)?;
        let mut l = if e0.value[0].norm() > 1e-12 {
            s[0] / e0.value[0]
        } else {
            ONE
        };
        let resid = |e: &DVector<Complex64>, l: Complex64| e * l - s;
        let mut jet = e0;
        let mut r = resid(&jet.value, l);
        let scale = s.norm().max(1.0);
        for _ in 0..self.config.newton_max_iter {
            if r.norm() < self.config.newton_tol * scale {
                if u.iter().map(|v| v.norm()).fold(0.0, f64::max) > 2.0 * self.config.domain_radius {
                    return Err(Error::NotDecomposable("preimage outside the chart domain".into()));
                }
                return Ok((u, l));
            }
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            for i in 0..n {
                jac.set_column(i, &(&jet.grad[i] * l));
            }
            jac.set_column(n, &jet.value);
            let step = jac
                .lu()
                .solve(&(-&r))
                .ok_or_else(|| Error::NotDecomposable("singular Newton system".into()))?;
            let mut damping = 1.0;
            loop {
                let u_new: Vec<Complex64> = u.iter().enumerate().map(|(i, v)| v + step[i] * damping).collect();
                let l_new = l + step[n] * damping;
                let trial = eval_jet_on(&leaf, &u_new, &self.config.transport);
                if let Ok(j) = trial {
                    let r_new = resid(&j.value, l_new);
                    if r_new.norm() < r.norm() || damping < 1e-3 {
                        u = u_new;
                        l = l_new;
                        jet = j;
                        r = r_new;
                        break;
                    }
                }
                damping *= 0.5;
                if damping < 1e-4 {
                    return Err(Error::NotDecomposable("Newton line search failed".into()));
                }
            }
        }
        Err(Error::NotDecomposable(format!(
            "no convergence in {} iterations (residual {:.3e})",
            self.config.newton_max_iter,
            r.norm()
        )))
    }

    /// Plus-chart inverse: returns `(x, l)`.
    pub fn phi_plus_inverse(&self, p: &ChartPoint, guess: Option<&[Complex64]>) -> Result<(Vec<Complex64>, Complex64)> {
        if p.chart != Chart::Plus {
            return Err(Error::InvalidInput("expected a plus-chart point".into()));
        }
        self.invert(p, guess)
    }

    /// Gluing map `φ∓ ∘ * ∘ (φ±)⁻¹`.
    pub fn transition(&self, p: &ChartPoint) -> Result<ChartPoint> {
        let (u, l) = self.invert(p, None)?;
        let e = self.eval_row(p.chart.opposite(), &u, &p.base)?;
        Ok(ChartPoint::new(p.chart.opposite(), u, e / l))
    }

    /// Jet at the leaf basepoint of the `L±` generator for the
    /// representative `rep`, and the annihilating hyperplane of covectors.
    pub fn d_hyperplane(&self, chart: Chart, base: &[Complex64], rep: &CProjectiveData) -> Result<Hyperplane> {
        let rep_tau = o1_connection_form(rep)?.gamma_h;
        self.d_hyperplane_with(chart, base, &rep_tau)
    }

    /// As [`Self::d_hyperplane`] with `τ^D` already computed.
    pub fn d_hyperplane_with(&self, chart: Chart, base: &[Complex64], rep_tau_h: &[RationalField]) -> Result<Hyperplane> {
        let normal = self.line_normal(chart, base, rep_tau_h)?;
        let basis = annihilator_basis(&normal);
        Ok(Hyperplane {
            chart,
            base: base.to_vec(),
            normal,
            basis,
        })
    }

    /// `(1, τ − τ^D)` at the basepoint of the leaf over `base`.
    pub fn line_normal(&self, chart: Chart, base: &[Complex64], rep_tau_h: &[RationalField]) -> Result<DVector<Complex64>> {
        let n = self.n();
        let zero = self.origin();
        let mx = max_exponents_of(self.tau_h.iter().chain(rep_tau_h), 2 * n);
        let mut v = DVector::from_element(n + 1, ONE);
        match chart {
            Chart::Plus => {
                let pw = Powers::new(&zero, base, &mx);
                for i in 0..n {
                    v[i + 1] = self.tau_h[i].eval_jet(&pw, 0)?.value - rep_tau_h[i].eval_jet(&pw, 0)?.value;
                }
            }
            Chart::Minus => {
                // conjugate block: fc(f)(x, 0) = conj f(0, conj x)
                let cb: Vec<Complex64> = base.iter().map(|v| v.conj()).collect();
                let pw = Powers::new(&zero, &cb, &mx);
                for i in 0..n {
                    let d = self.tau_h[i].eval_jet(&pw, 0)?.value - rep_tau_h[i].eval_jet(&pw, 0)?.value;
                    v[i + 1] = d.conj();
                }
            }
        }
        Ok(v)
    }

    /// `x ↦ {(x̄, λ·E⁺_x̄(x))}`; the minus chart is used for `|λ| > 1`.
    pub fn canonical_line(&self, x: &[Complex64], lambda: Complex64) -> Result<ChartPoint> {
        let xb: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        if lambda.norm() <= 1.0 {
            self.phi_plus(x, &xb, lambda)
        } else {
            self.phi_minus(x, &xb, lambda)
        }
    }

    pub fn canonical_line_in(&self, chart: Chart, x: &[Complex64], lambda: Complex64) -> Result<ChartPoint> {
        let xb: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        match chart {
            Chart::Plus => self.phi_plus(x, &xb, lambda),
            Chart::Minus => self.phi_minus(x, &xb, lambda),
        }
    }

    pub fn in_domain(&self, p: &ChartPoint) -> bool {
        p.base.iter().all(|v| v.norm() <= self.config.domain_radius) && p.covector.norm() <= self.config.covector_cutoff
    }
}

/// `E(u)` and `∂E/∂u_i = Φ_{i+1,·} − T_i E` on a leaf.
pub fn eval_jet_on(leaf: &LeafContext, u: &[Complex64], config: &TransportConfig) -> Result<EvalJet> {
    let n = leaf.n();
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let phi = transport_matrix(leaf, &Path::segment(&zero, u), config)?;
    let t = leaf.point(u, 1)?.twist;
    let value: DVector<Complex64> = phi.row(0).transpose();
    let grad = (0..n)
        .map(|i| phi.row(i + 1).transpose() - &value * t[i])
        .collect();
    Ok(EvalJet { value, grad })
}

/// `t·c ↦` scale plus covectors by `c` and minus covectors by `c⁻¹`.
pub fn cstar_action(c: Complex64, p: &ChartPoint) -> ChartPoint {
    let f = match p.chart {
        Chart::Plus => c,
        Chart::Minus => c.inv(),
    };
    ChartPoint::new(p.chart, p.base.clone(), &p.covector * f)
}

/// Antiholomorphic involution `(x̃, s) ↦ (conj x̃, −conj s)` between the
/// charts. On `𝒫` it is `(x, x̃, l) ↦ (conj x̃, conj x, −1/conj l)`.
pub fn real_structure(p: &ChartPoint) -> ChartPoint {
    ChartPoint::new(
        p.chart.opposite(),
        p.base.iter().map(|v| v.conj()).collect(),
        p.covector.map(|v| -v.conj()),
    )
}

/// Hermitian-orthonormal basis of `{s : Σ s_k v_k = 0}`.
pub fn annihilator_basis(v: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
    let m = v.len();
    let w = v.map(|c| c.conj());
    let w = &w / Complex64::new(w.norm(), 0.0);
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(m - 1);
    // Gram-Schmidt on the standard basis, skipping the most aligned vector
    let skip = (0..m)
        .max_by(|&a, &b| w[a].norm().partial_cmp(&w[b].norm()).unwrap())
        .unwrap_or(0);
    for k in 0..m {
        if k == skip {
            continue;
        }
        let mut e = DVector::zeros(m);
        e[k] = ONE;
        let mut q = &e - &w * w.dotc(&e);
        for b in &basis {
            q -= b * b.dotc(&q);
        }
        let nq = q.norm();
        basis.push(q / Complex64::new(nq, 0.0));
    }
    basis
}


/// Max central-difference Cauchy–Riemann defect `|∂_y F − i ∂_x F|` of a
/// chart map over all complex inputs.
pub fn cauchy_riemann_residual(f: &dyn Fn(&ChartPoint) -> ChartPoint, p: &ChartPoint, h: f64) -> f64 {
    let n = p.base.len();
    let flat = |q: &ChartPoint| -> Vec<Complex64> { q.base.iter().copied().chain(q.covector.iter().copied()).collect() };
    let bump = |k: usize, d: Complex64| -> ChartPoint {
        let mut q = p.clone();
        if k < n {
            q.base[k] += d;
        } else {
            q.covector[k - n] += d;
        }
        q
    };
    let mut worst: f64 = 0.0;
    for k in 0..(2 * n + 1) {
        let fxp = flat(&f(&bump(k, Complex64::new(h, 0.0))));
        let fxm = flat(&f(&bump(k, Complex64::new(-h, 0.0))));
        let fyp = flat(&f(&bump(k, Complex64::new(0.0, h))));
        let fym = flat(&f(&bump(k, Complex64::new(0.0, -h))));
        for j in 0..fxp.len() {
            let dx = (fxp[j] - fxm[j]) / (2.0 * h);
            let dy = (fyp[j] - fym[j]) / (2.0 * h);
            worst = worst.max((dy - Complex64::i() * dx).norm());
        }
    }
    worst
}
