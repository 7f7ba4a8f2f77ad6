//! Twisted tractor connection on 1-jets along the leaves of the two
//! foliations of `S × S̄`, its parallel transport, the fibers of `V±` and the
//! line subbundles `L±` attached to a representative.
//!
//! A jet `(l, α)` lives over a leaf point; along a leaf with coordinates
//! `u` the connection reads
//!
//! ```text
//! 𝒟_i (l, α) = (∂_i l + T_i l − α_i,  ∂_i α_b − Γ^c_ib α_c + T_i α_b + P_ib l)
//! ```
//!
//! with `T = θ + τ` the twist form and `P` the projective Schouten tensor of
//! the leaf connection. Parallel transport solves `∂_i X = −A_i X`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cproj_geometry::{
    o1_connection_form, ricci, sample_grid, schouten, CProjectiveData, LeafConnection, LineBundleData,
};
use crate::error::{Error, Result};
use crate::polynomial_algebra::{max_exponents_of, LeafKind, Powers, RationalField};

mod transport;

pub use transport::{transport, transport_matrix, Path, TransportConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default tolerance for the flatness check of the twisted tractor
/// connection along a leaf.
pub const FLATNESS_TOL: f64 = 1e-9;

/// A 1-jet `(l, α)` of a twisted density.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TractorJet {
    pub l: Complex64,
    pub alpha: Vec<Complex64>,
}

impl TractorJet {
    pub fn new(l: Complex64, alpha: Vec<Complex64>) -> Self {
        TractorJet { l, alpha }
    }

    pub fn zero(n: usize) -> Self {
        TractorJet {
            l: ZERO,
            alpha: vec![ZERO; n],
        }
    }

    /// `e_0 = (1, 0)` and `e_{i+1} = (0, dz_i)`.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut j = Self::zero(n);
        if k == 0 {
            j.l = Complex64::new(1.0, 0.0);
        } else {
            j.alpha[k - 1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn to_vector(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.alpha.len() + 1);
        v[0] = self.l;
        for (i, a) in self.alpha.iter().enumerate() {
            v[i + 1] = *a;
        }
        v
    }

    pub fn from_vector(v: &DVector<Complex64>) -> Self {
        TractorJet {
            l: v[0],
            alpha: v.iter().skip(1).copied().collect(),
        }
    }
}

/// Shared symbolic data for building leaves: the holomorphic blocks and
/// their formal conjugates, computed once.
#[derive(Debug, Clone)]
pub struct TractorSetup {
    data: CProjectiveData,
    /// `θ + τ` in holomorphic components.
    twist_h: Vec<RationalField>,
    twist_a: Vec<RationalField>,
    tau_h: Vec<RationalField>,
    tau_a: Vec<RationalField>,
}

impl TractorSetup {
    pub fn new(data: &CProjectiveData, bundle: &LineBundleData) -> Result<Self> {
        if bundle.n() != data.n() {
            return Err(Error::Dimension {
                expected: data.n(),
                got: bundle.n(),
            });
        }
        let tau = o1_connection_form(data)?;
        let twist_h = bundle
            .theta()
            .iter()
            .zip(&tau.gamma_h)
            .map(|(t, s)| t.add(s))
            .collect::<Result<Vec<_>>>()?;
        let twist_a = twist_h.iter().map(|f| f.formal_conjugate()).collect();
        Ok(TractorSetup {
            data: data.clone(),
            twist_h,
            twist_a,
            tau_h: tau.gamma_h,
            tau_a: tau.gamma_a,
        })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn data(&self) -> &CProjectiveData {
        &self.data
    }

    /// Leaf without the flatness check.
    pub fn leaf(&self, kind: LeafKind, param: &[Complex64]) -> Result<LeafContext> {
        if param.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: param.len(),
            });
        }
        let connection = LeafConnection::new(&self.data, kind, param)?;
        let (twist, tau) = match kind {
            LeafKind::Holomorphic => (&self.twist_h, &self.tau_h),
            LeafKind::AntiHolomorphic => (&self.twist_a, &self.tau_a),
        };
        let restrict = |fs: &[RationalField]| -> Result<Vec<RationalField>> {
            fs.iter().map(|f| f.restrict_to_leaf(kind, param)).collect()
        };
        let twist = restrict(twist)?;
        let tau = restrict(tau)?;
        let n = self.n();
        let max_exp = max_exponents_of(connection.christoffels.iter().chain(&twist).chain(&tau), 2 * n);
        Ok(LeafContext {
            connection,
            twist,
            tau,
            max_exp,
        })
    }

    /// Leaf with the flatness invariant validated on a grid of leaf points.
    pub fn checked_leaf(&self, kind: LeafKind, param: &[Complex64], radius: f64) -> Result<LeafContext> {
        let leaf = self.leaf(kind, param)?;
        let residual = leaf.flatness_residual(&sample_grid(self.n(), radius, 3))?;
        if residual > FLATNESS_TOL {
            return Err(Error::Type11Violation { residual });
        }
        Ok(leaf)
    }
}

/// Builds the leaf through `param` of the given foliation and validates that
/// the twisted tractor connection is flat on it.
pub fn make_leaf(
    data: &CProjectiveData,
    bundle: &LineBundleData,
    kind: LeafKind,
    param: &[Complex64],
    radius: f64,
) -> Result<LeafContext> {
    TractorSetup::new(data, bundle)?.checked_leaf(kind, param, radius)
}

/// Twisted tractor connection restricted to one leaf.
#[derive(Debug, Clone)]
pub struct LeafContext {
    connection: LeafConnection,
    /// `θ + τ` restricted to the leaf.
    twist: Vec<RationalField>,
    /// `τ` of the class representative, restricted.
    tau: Vec<RationalField>,
    max_exp: Vec<u32>,
}

/// Pointwise values of the leaf data.
#[derive(Debug, Clone)]
pub struct LeafPoint {
    pub n: usize,
    /// `Γ^k_ij`, flattened `[k][i][j]`.
    pub gamma: Vec<Complex64>,
    /// `P_ij`, flattened.
    pub schouten: Vec<Complex64>,
    pub twist: Vec<Complex64>,
    /// `∂_e Γ^k_ij`, flattened `[e][k][i][j]` (order ≥ 2 only).
    pub d_gamma: Vec<Complex64>,
    /// `∂_e P_ij`, flattened `[e][i][j]` (order ≥ 2 only).
    pub d_schouten: Vec<Complex64>,
    /// `∂_e T_i`, flattened `[e][i]` (order ≥ 2 only).
    pub d_twist: Vec<Complex64>,
}

impl LeafContext {
    pub fn n(&self) -> usize {
        self.connection.n()
    }

    pub fn kind(&self) -> LeafKind {
        self.connection.kind
    }

    pub fn param(&self) -> &[Complex64] {
        &self.connection.param
    }

    pub fn christoffels(&self) -> &[RationalField] {
        &self.connection.christoffels
    }

    pub fn twist_form(&self) -> &[RationalField] {
        &self.twist
    }

    pub fn connection(&self) -> &LeafConnection {
        &self.connection
    }

    /// `τ` of the class representative along the leaf.
    pub fn tau(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let pw = self.powers(u);
        self.tau.iter().map(|f| Ok(f.eval_jet(&pw, 0)?.value)).collect()
    }

    fn powers(&self, u: &[Complex64]) -> Powers {
        let (z, zb) = self.connection.ambient(u);
        Powers::new(&z, &zb, &self.max_exp)
    }

    /// Leaf data at `u`; `order = 2` adds first derivatives of `Γ`, `P`, `T`.
    pub fn point(&self, u: &[Complex64], order: u8) -> Result<LeafPoint> {
        let n = self.n();
        let s0 = self.connection.slot0();
        let pw = self.powers(u);
        let jet_order = order.min(2);
        let jets = self
            .connection
            .christoffels
            .iter()
            .map(|f| f.eval_jet(&pw, jet_order))
            .collect::<Result<Vec<_>>>()?;
        let tw = self
            .twist
            .iter()
            .map(|f| f.eval_jet(&pw, jet_order.min(1)))
            .collect::<Result<Vec<_>>>()?;
        let ix = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
        let gamma: Vec<Complex64> = jets.iter().map(|j| j.value).collect();
        let dg = |e: usize, k: usize, i: usize, j: usize| jets[ix(k, i, j)].grad[s0 + e];

        // leaf curvature R_{cd}^a_b, flattened [c][d][a][b]
        let mut curv = vec![ZERO; n.pow(4)];
        for c in 0..n {
            for d in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut v = dg(c, a, d, b) - dg(d, a, c, b);
                        for f in 0..n {
                            v += gamma[ix(a, c, f)] * gamma[ix(f, d, b)] - gamma[ix(a, d, f)] * gamma[ix(f, c, b)];
                        }
                        curv[((c * n + d) * n + a) * n + b] = v;
                    }
                }
            }
        }
        let p = schouten(&ricci(&curv, n), n);
        let twist: Vec<Complex64> = tw.iter().map(|j| j.value).collect();
        let mut out = LeafPoint {
            n,
            gamma,
            schouten: p,
            twist,
            d_gamma: Vec::new(),
            d_schouten: Vec::new(),
            d_twist: Vec::new(),
        };
        if order >= 2 {
            let ddg = |e: usize, m: usize, k: usize, i: usize, j: usize| jets[ix(k, i, j)].hess_at(s0 + e, s0 + m);
            let mut d_gamma = vec![ZERO; n.pow(4)];
            for e in 0..n {
                for idx in 0..n.pow(3) {
                    d_gamma[e * n.pow(3) + idx] = jets[idx].grad[s0 + e];
                }
            }
            let mut d_schouten = vec![ZERO; n.pow(3)];
            for e in 0..n {
                let mut dcurv = vec![ZERO; n.pow(4)];
                for c in 0..n {
                    for d in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                let mut v = ddg(e, c, a, d, b) - ddg(e, d, a, c, b);
                                for f in 0..n {
                                    v += dg(e, a, c, f) * out.gamma[ix(f, d, b)]
                                        + out.gamma[ix(a, c, f)] * dg(e, f, d, b)
                                        - dg(e, a, d, f) * out.gamma[ix(f, c, b)]
                                        - out.gamma[ix(a, d, f)] * dg(e, f, c, b);
                                }
                                dcurv[((c * n + d) * n + a) * n + b] = v;
                            }
                        }
                    }
                }
                let dp = schouten(&ricci(&dcurv, n), n);
                d_schouten[e * n * n..(e + 1) * n * n].copy_from_slice(&dp);
            }
            let mut d_twist = vec![ZERO; n * n];
            for e in 0..n {
                for i in 0..n {
                    d_twist[e * n + i] = tw[i].grad[s0 + e];
                }
            }
            out.d_gamma = d_gamma;
            out.d_schouten = d_schouten;
            out.d_twist = d_twist;
        }
        Ok(out)
    }

    /// Connection matrices `A_i` with `∂_i X = −A_i X` for parallel `X`.
    pub fn connection_matrices(&self, u: &[Complex64]) -> Result<Vec<DMatrix<Complex64>>> {
        let pt = self.point(u, 1)?;
        Ok((0..self.n()).map(|i| connection_matrix(&pt, i)).collect())
    }

    /// Max-norm of the curvature `∂_i A_j − ∂_j A_i + [A_i, A_j]` over the
    /// given leaf points.
    pub fn flatness_residual(&self, points: &[Vec<Complex64>]) -> Result<f64> {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for u in points {
            let pt = self.point(u, 2)?;
            let a: Vec<_> = (0..n).map(|i| connection_matrix(&pt, i)).collect();
            let da: Vec<_> = (0..n)
                .map(|e| (0..n).map(|i| d_connection_matrix(&pt, e, i)).collect::<Vec<_>>())
                .collect();
            for i in 0..n {
                for j in (i + 1)..n {
                    let f = &da[i][j] - &da[j][i] + &a[i] * &a[j] - &a[j] * &a[i];
                    worst = worst.max(f.iter().map(|v| v.norm()).fold(0.0, f64::max));
                }
            }
        }
        Ok(worst)
    }
}

/// `A_i` at a leaf point.
pub fn connection_matrix(pt: &LeafPoint, i: usize) -> DMatrix<Complex64> {
    let n = pt.n;
    let one = Complex64::new(1.0, 0.0);
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a[(0, 0)] = pt.twist[i];
    a[(0, 1 + i)] = -one;
    for b in 0..n {
        a[(1 + b, 0)] = pt.schouten[i * n + b];
        for c in 0..n {
            a[(1 + b, 1 + c)] = -pt.gamma[(c * n + i) * n + b];
        }
        a[(1 + b, 1 + b)] += pt.twist[i];
    }
    a
}

/// `∂_e A_i`; needs a point evaluated with `order = 2`.
fn d_connection_matrix(pt: &LeafPoint, e: usize, i: usize) -> DMatrix<Complex64> {
    let n = pt.n;
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let dt = pt.d_twist[e * n + i];
    a[(0, 0)] = dt;
    for b in 0..n {
        a[(1 + b, 0)] = pt.d_schouten[(e * n + i) * n + b];
        for c in 0..n {
            a[(1 + b, 1 + c)] = -pt.d_gamma[e * n.pow(3) + (c * n + i) * n + b];
        }
        a[(1 + b, 1 + b)] += dt;
    }
    a
}

/// `𝒟_Y X` at `u` for a jet field with value `jet` and directional
/// derivative `djet = ∂_Y X` there.
pub fn tractor_derivative(
    leaf: &LeafContext,
    jet: &TractorJet,
    djet: &TractorJet,
    direction: &[Complex64],
    u: &[Complex64],
) -> Result<TractorJet> {
    let a = leaf.connection_matrices(u)?;
    let x = jet.to_vector();
    let mut out = djet.to_vector();
    for (ai, yi) in a.iter().zip(direction) {
        out += ai * &x * *yi;
    }
    Ok(TractorJet::from_vector(&out))
}

/// Affine sections along a leaf: the transports of the standard jet basis
/// from the basepoint.
#[derive(Debug, Clone)]
pub struct VFiberBasis {
    pub leaf: LeafContext,
    pub basepoint: Vec<Complex64>,
    pub config: TransportConfig,
}

impl VFiberBasis {
    /// Transport matrix `Φ(u)` from the basepoint; column `k` is the jet of
    /// the `k`-th basis section at `u`.
    pub fn fundamental(&self, u: &[Complex64]) -> Result<DMatrix<Complex64>> {
        transport_matrix(&self.leaf, &Path::segment(&self.basepoint, u), &self.config)
    }

    /// Values at `u` of the `n + 1` basis sections (row 0 of `Φ(u)`).
    pub fn evaluate(&self, u: &[Complex64]) -> Result<DVector<Complex64>> {
        Ok(self.fundamental(u)?.row(0).transpose())
    }

    /// 2-norm condition number of `Φ(u)`.
    pub fn condition(&self, u: &[Complex64]) -> Result<f64> {
        Ok(condition_number(&self.fundamental(u)?))
    }

    /// Max residual of `∂_i Φ + A_i Φ` at `u`, with `∂_i Φ` from central
    /// differences of step `h`.
    pub fn parallel_residual(&self, u: &[Complex64], h: f64) -> Result<f64> {
        let phi = self.fundamental(u)?;
        let a = self.leaf.connection_matrices(u)?;
        let mut worst: f64 = 0.0;
        for i in 0..u.len() {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[i] += h;
            um[i] -= h;
            let d = (self.fundamental(&up)? - self.fundamental(&um)?) / Complex64::new(2.0 * h, 0.0);
            let r = d + &a[i] * &phi;
            worst = worst.max(r.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        Ok(worst)
    }

    pub fn to_json(&self, points: &[Vec<Complex64>]) -> Result<serde_json::Value> {
        let mut rows = Vec::new();
        for u in points {
            let phi = self.fundamental(u)?;
            let m: Vec<Vec<[f64; 2]>> = (0..phi.nrows())
                .map(|r| (0..phi.ncols()).map(|c| [phi[(r, c)].re, phi[(r, c)].im]).collect())
                .collect();
            rows.push(serde_json::json!({
                "point": u.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
                "fundamental": m,
                "condition": condition_number(&phi),
            }));
        }
        Ok(serde_json::json!({
            "kind": self.leaf.kind(),
            "param": self.leaf.param().iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            "samples": rows,
        }))
    }
}

pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn fiber_basis(leaf: &LeafContext, basepoint: &[Complex64], config: &TransportConfig) -> Result<VFiberBasis> {
    let basis = VFiberBasis {
        leaf: leaf.clone(),
        basepoint: basepoint.to_vec(),
        config: config.clone(),
    };
    // the basepoint itself must be pole-free
    leaf.point(basepoint, 1)?;
    Ok(basis)
}

/// The line of `∇^D`-parallel sections along a leaf, stored as jets in the
/// splitting of the class representative used to build the leaf:
/// `(l, (τ − τ^D) l)`.
#[derive(Debug, Clone)]
pub struct LineFiber {
    pub leaf: LeafContext,
    pub basepoint: Vec<Complex64>,
    /// `τ^D` of the chosen representative, restricted to the leaf.
    rep_tau: Vec<RationalField>,
    config: TransportConfig,
}

impl LineFiber {
    /// Jet at the basepoint; the generator has `l = 1` there.
    pub fn base_jet(&self) -> Result<TractorJet> {
        self.jet_with_value(&self.basepoint, Complex64::new(1.0, 0.0))
    }

    fn jet_with_value(&self, u: &[Complex64], l: Complex64) -> Result<TractorJet> {
        let tau = self.leaf.tau(u)?;
        let rep = self.rep_tau_at(u)?;
        Ok(TractorJet::new(l, tau.iter().zip(&rep).map(|(a, b)| (a - b) * l).collect()))
    }

    fn rep_tau_at(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let (z, zb) = self.leaf.connection.ambient(u);
        let pw = Powers::new(&z, &zb, &max_exponents_of(&self.rep_tau, 2 * self.leaf.n()));
        self.rep_tau.iter().map(|f| Ok(f.eval_jet(&pw, 0)?.value)).collect()
    }

    /// Value of the generator at `u`, solving `∂l + (T − τ + τ^D) l = 0`
    /// along the straight segment from the basepoint.
    pub fn value(&self, u: &[Complex64]) -> Result<Complex64> {
        let steps = self.config.steps_for(&self.basepoint, u);
        let d: Vec<Complex64> = u.iter().zip(&self.basepoint).map(|(a, b)| a - b).collect();
        let rate = |t: f64| -> Result<Complex64> {
            let p: Vec<Complex64> = self.basepoint.iter().zip(&d).map(|(b, v)| b + v * t).collect();
            let pt = self.leaf.point(&p, 1)?;
            let tau = self.leaf.tau(&p)?;
            let rep = self.rep_tau_at(&p)?;
            let mut r = ZERO;
            for i in 0..d.len() {
                r -= (pt.twist[i] - tau[i] + rep[i]) * d[i];
            }
            Ok(r)
        };
        let mut l = Complex64::new(1.0, 0.0);
        let h = 1.0 / steps as f64;
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = rate(t)? * l;
            let k2 = rate(t + 0.5 * h)? * (l + k1 * (0.5 * h));
            let k3 = rate(t + 0.5 * h)? * (l + k2 * (0.5 * h));
            let k4 = rate(t + h)? * (l + k3 * h);
            l += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        }
        Ok(l)
    }

    pub fn jet(&self, u: &[Complex64]) -> Result<TractorJet> {
        let l = self.value(u)?;
        self.jet_with_value(u, l)
    }

    /// Distance of the jet at `u` from the transport of the base jet, i.e.
    /// from the span of the affine sections.
    pub fn membership_residual(&self, u: &[Complex64]) -> Result<f64> {
        let basis = VFiberBasis {
            leaf: self.leaf.clone(),
            basepoint: self.basepoint.clone(),
            config: self.config.clone(),
        };
        let phi = basis.fundamental(u)?;
        let want = self.jet(u)?.to_vector();
        // least-squares coefficients in the basis, then the residual
        let coeffs = phi
            .clone()
            .svd(true, true)
            .solve(&want, 1e-14)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let fit = (&phi * coeffs - &want).norm();
        let direct = (&phi * self.base_jet()?.to_vector() - want).norm();
        Ok(fit.max(direct))
    }
}

/// `L` along a leaf for the representative `rep`, which must have
/// type-(1,1) curvature on the sample grid.
pub fn line_fiber(
    leaf: &LeafContext,
    rep: &CProjectiveData,
    basepoint: &[Complex64],
    config: &TransportConfig,
    grid: &[Vec<Complex64>],
) -> Result<LineFiber> {
    let check = crate::cproj_geometry::is_type_11(rep, grid)?;
    if !check.is_type_11 {
        return Err(Error::Type11Violation {
            residual: check.residual,
        });
    }
    let tau = o1_connection_form(rep)?;
    let src = match leaf.kind() {
        LeafKind::Holomorphic => tau.gamma_h,
        LeafKind::AntiHolomorphic => tau.gamma_a,
    };
    let rep_tau = src
        .iter()
        .map(|f| f.restrict_to_leaf(leaf.kind(), leaf.param()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LineFiber {
        leaf: leaf.clone(),
        basepoint: basepoint.to_vec(),
        rep_tau,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests;
