use nalgebra::{DMatrix, DVector};

use super::{MatrixField, QuaternionicChart};
use crate::error::{Error, Result};

/// Curvature of one coordinate plane `(e_b, e_c)`, split as
/// `R = B + Σ q_i I_i + remainder` with `B` commuting with the frame.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PairRecord {
    pub b: usize,
    pub c: usize,
    /// Row-major `R(e_b, e_c)`.
    pub curvature: Vec<f64>,
    pub curvature_norm: f64,
    pub sp1: [f64; 3],
    /// Part of `sp1` orthogonal to the preserved structure's direction.
    pub membership: f64,
    /// Frobenius norm of the part outside `gl(n,ℍ) ⊕ sp(1)`.
    pub remainder: f64,
    /// `|tr B|`.
    pub sl_trace: f64,
    /// `‖B + Σ q_i I_i + remainder − R‖`.
    pub reconstruction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    /// Coefficients of the preserved structure in the frame.
    pub direction: [f64; 3],
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LoopCheck {
    pub point: Vec<f64>,
    pub b: usize,
    pub c: usize,
    pub side: f64,
    /// `‖log H + R h²‖ / ‖R h²‖`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HolonomyReport {
    pub samples: Vec<CurvatureSample>,
    pub loop_checks: Vec<LoopCheck>,
    pub max_membership: f64,
    pub max_remainder: f64,
    pub max_sl_trace: f64,
}

impl HolonomyReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

fn as_column(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Basis of the matrices commuting with all of `frame`.
fn commutant_basis(frame: &[DMatrix<f64>; 3]) -> Result<Vec<DMatrix<f64>>> {
    let m = frame[0].nrows();
    let mm = m * m;
    let mut eqs = DMatrix::zeros(3 * mm, mm);
    for k in 0..mm {
        let mut e = DMatrix::zeros(m, m);
        e[(k % m, k / m)] = 1.0;
        for (i, f) in frame.iter().enumerate() {
            let comm = &e * f - f * &e;
            eqs.view_mut((i * mm, k), (mm, 1)).copy_from_slice(comm.as_slice());
        }
    }
    let svd = eqs.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Rank { expected: mm / 4, found: 0 })?;
    let smax = svd.singular_values.max();
    let basis: Vec<DMatrix<f64>> = (0..mm)
        .filter(|&r| svd.singular_values[r] < 1e-10 * smax)
        .map(|r| DMatrix::from_column_slice(m, m, v_t.row(r).transpose().as_slice()))
        .collect();
    if basis.len() != mm / 4 {
        return Err(Error::Rank {
            expected: mm / 4,
            found: basis.len(),
        });
    }
    Ok(basis)
}

fn lstsq(cols: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = cols.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-13;
    svd.solve(rhs, tol).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Splits the curvature at each point relative to the preserved structure.
pub fn classify_curvature(chart: &QuaternionicChart, preserved: &MatrixField, points: &[Vec<f64>]) -> Result<HolonomyReport> {
    let m = chart.dim();
    let mut samples = Vec::with_capacity(points.len());
    let (mut max_membership, mut max_remainder, mut max_sl): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for x in points {
        let frame = chart.frame_at(x)?;
        let comm = commutant_basis(&frame)?;
        let nb = comm.len();
        let mut cols = DMatrix::zeros(m * m, nb + 3);
        for (k, b) in comm.iter().chain(frame.iter()).enumerate() {
            cols.set_column(k, &as_column(b));
        }
        let mut fcols = DMatrix::zeros(m * m, 3);
        for (k, f) in frame.iter().enumerate() {
            fcols.set_column(k, &as_column(f));
        }
        let p = lstsq(&fcols, &as_column(&preserved.eval(x)?))?;
        let p = &p / p.norm();
        let curv = chart.curvature(x)?;
        let mut pairs = Vec::new();
        for b in 0..m {
            for c in (b + 1)..m {
                let r = &curv[b * m + c];
                let coef = lstsq(&cols, &as_column(r))?;
                let mut big_b = DMatrix::zeros(m, m);
                for (k, basis) in comm.iter().enumerate() {
                    big_b += basis * coef[k];
                }
                let q = DVector::from_iterator(3, (0..3).map(|i| coef[nb + i]));
                let mut sp = DMatrix::zeros(m, m);
                for (i, f) in frame.iter().enumerate() {
                    sp += f * q[i];
                }
                let rem = r - &big_b - &sp;
                let perp = &q - &p * q.dot(&p);
                let record = PairRecord {
                    b,
                    c,
                    curvature: r.transpose().as_slice().to_vec(),
                    curvature_norm: r.norm(),
                    sp1: [q[0], q[1], q[2]],
                    membership: perp.norm(),
                    remainder: rem.norm(),
                    sl_trace: big_b.trace().abs(),
                    reconstruction: (&big_b + &sp + &rem - r).norm(),
                };
                max_membership = max_membership.max(record.membership);
                max_remainder = max_remainder.max(record.remainder);
                max_sl = max_sl.max(record.sl_trace);
                pairs.push(record);
            }
        }
        samples.push(CurvatureSample {
            point: x.clone(),
            direction: [p[0], p[1], p[2]],
            pairs,
        });
    }
    Ok(HolonomyReport {
        samples,
        loop_checks: Vec::new(),
        max_membership,
        max_remainder,
        max_sl_trace: max_sl,
    })
}

/// Accepted Richardson estimate for the transport error around a loop.
pub const LOOP_TOL: f64 = 1e-10;

fn transport(chart: &QuaternionicChart, vertices: &[Vec<f64>], steps: usize) -> Result<DMatrix<f64>> {
    let m = chart.dim();
    let mut v = DMatrix::<f64>::identity(m, m);
    let rate = |x: &[f64], vel: &[f64], v: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let (gam, _) = chart.connection(x, 0)?;
        let mut g = DMatrix::zeros(m, m);
        for (b, s) in vel.iter().enumerate() {
            if *s != 0.0 {
                g += &gam[b] * *s;
            }
        }
        Ok(-(g * v))
    };
    let k = vertices.len();
    for e in 0..k {
        let p = &vertices[e];
        let q = &vertices[(e + 1) % k];
        let vel: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        let at = |t: f64| -> Vec<f64> { p.iter().zip(&vel).map(|(a, d)| a + t * d).collect() };
        let h = 1.0 / steps as f64;
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = rate(&at(t), &vel, &v)?;
            let k2 = rate(&at(t + 0.5 * h), &vel, &(&v + &k1 * (0.5 * h)))?;
            let k3 = rate(&at(t + 0.5 * h), &vel, &(&v + &k2 * (0.5 * h)))?;
            let k4 = rate(&at(t + h), &vel, &(&v + &k3 * h))?;
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(v)
}

/// Parallel transport of the identity frame around the closed polygon
/// through `vertices`, with `resolution` RK4 steps per edge. The result is
/// checked against a run at twice the resolution.
pub fn loop_holonomy(chart: &QuaternionicChart, vertices: &[Vec<f64>], resolution: usize) -> Result<DMatrix<f64>> {
    if vertices.len() < 2 || vertices.iter().any(|v| v.len() != chart.dim()) {
        return Err(Error::InvalidInput("loop needs at least two vertices of chart dimension".into()));
    }
    let steps = resolution.max(1);
    let coarse = transport(chart, vertices, steps)?;
    let fine = transport(chart, vertices, 2 * steps)?;
    let estimate = (&fine - &coarse).amax() / 15.0;
    if estimate > LOOP_TOL {
        return Err(Error::Step {
            estimate,
            tolerance: LOOP_TOL,
        });
    }
    Ok(fine)
}

/// Square of side `h` centred at `x` in the plane of `e_b`, `e_c`, traversed
/// along `e_b` first.
pub fn square_loop(x: &[f64], b: usize, c: usize, h: f64) -> Vec<Vec<f64>> {
    let corner = |sb: f64, sc: f64| {
        let mut p = x.to_vec();
        p[b] += sb * h;
        p[c] += sc * h;
        p
    };
    vec![corner(-0.5, -0.5), corner(0.5, -0.5), corner(0.5, 0.5), corner(-0.5, 0.5)]
}

/// Series logarithm of a matrix within distance 1/2 of the identity.
pub fn log_near_identity(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let x = h - DMatrix::<f64>::identity(n, n);
    let size = x.norm();
    if size >= 0.5 {
        return Err(Error::InvalidInput(format!("matrix is {size:.3} from the identity")));
    }
    let mut out = DMatrix::zeros(n, n);
    let mut power = x.clone();
    for k in 1..200 {
        let term = &power / k as f64;
        if k % 2 == 1 {
            out += &term;
        } else {
            out -= &term;
        }
        if term.norm() < 1e-18 {
            break;
        }
        power = &power * &x;
    }
    Ok(out)
}

/// Compares `log H` around a small square with `−R(e_b, e_c)h²`.
pub fn loop_spot_check(chart: &QuaternionicChart, x: &[f64], b: usize, c: usize, h: f64, resolution: usize) -> Result<LoopCheck> {
    let m = chart.dim();
    let hol = loop_holonomy(chart, &square_loop(x, b, c, h), resolution)?;
    let log = log_near_identity(&hol)?;
    let r = &chart.curvature(x)?[b * m + c] * (h * h);
    let scale = r.norm();
    if scale == 0.0 {
        return Err(Error::InvalidInput("curvature vanishes in this plane".into()));
    }
    Ok(LoopCheck {
        point: x.to_vec(),
        b,
        c,
        side: h,
        relative_error: (log + &r).norm() / scale,
    })
}
