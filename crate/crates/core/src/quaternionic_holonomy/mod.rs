//! Quaternionic charts on `R^{4n}`: a rank-3 frame `I₁, I₂, I₃` and a
//! torsion-free connection, both rational in the real coordinates. Checks
//! of the quaternionic axioms, the connection preserving a given complex
//! structure in the class, and curvature/holonomy classification.
//!
//! Rational fields are reused with `num_vars = 4n`; a real point `x` is
//! evaluated at `z = x`, and only the `z` variables appear.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cproj_geometry::{quaternion_relation_residual, EndomorphismField};
use crate::error::{Error, Result};
use crate::polynomial_algebra::{max_exponents_of, Jet, Powers, RationalField};

mod charts;
mod curvature;
mod gamma;

pub use charts::{gibbons_hawking_chart, left_quaternion_matrices, rotating_structure, standard_frame, twisted_structure};
pub use curvature::{
    classify_curvature, log_near_identity, loop_holonomy, loop_spot_check, square_loop, CurvatureSample, HolonomyReport, LoopCheck,
    PairRecord, LOOP_TOL,
};
pub use gamma::{gamma_system, solve_unique_gamma, GammaSolution, CONDITION_LIMIT};

fn jets_at(fields: &[RationalField], max_exp: &[u32], x: &[f64], order: u8) -> Result<Vec<Jet>> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let zb = vec![Complex64::new(0.0, 0.0); x.len()];
    let pw = Powers::new(&z, &zb, max_exp);
    fields.iter().map(|f| f.eval_jet(&pw, order)).collect()
}

/// Square matrix of rational functions of the real coordinates.
#[derive(Debug, Clone)]
pub struct MatrixField {
    dim: usize,
    entries: Vec<RationalField>,
    max_exp: Vec<u32>,
}

impl MatrixField {
    /// Row-major entries over `dim` real variables.
    pub fn new(dim: usize, entries: Vec<RationalField>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|f| f.num_vars() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.num_vars(),
            });
        }
        let max_exp = max_exponents_of(entries.iter(), 2 * dim);
        Ok(MatrixField { dim, entries, max_exp })
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let entries = (0..dim * dim)
            .map(|k| RationalField::constant(dim, Complex64::new(m[(k / dim, k % dim)], 0.0)))
            .collect();
        MatrixField::new(dim, entries).expect("square constant matrix")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[RationalField] {
        &self.entries
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(x)?.0)
    }

    /// Value and the partial derivatives `∂_b` in every coordinate.
    pub fn jet(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let d = self.dim;
        let jets = jets_at(&self.entries, &self.max_exp, x, 1)?;
        let value = DMatrix::from_fn(d, d, |r, c| jets[r * d + c].value.re);
        let grads = (0..d)
            .map(|b| DMatrix::from_fn(d, d, |r, c| jets[r * d + c].grad[b].re))
            .collect();
        Ok((value, grads))
    }

    /// Linear combination `Σ c_k F_k` of fields with rational coefficients.
    pub fn combine(coeffs: &[RationalField], fields: &[&MatrixField]) -> Result<Self> {
        let dim = fields[0].dim;
        let mut entries = vec![RationalField::zero(dim); dim * dim];
        for (c, f) in coeffs.iter().zip(fields) {
            for (e, fe) in entries.iter_mut().zip(&f.entries) {
                *e = e.add(&c.mul(fe)?)?;
            }
        }
        MatrixField::new(dim, entries)
    }
}

impl EndomorphismField for MatrixField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && self.eval(p).is_ok()
    }

    fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        MatrixField::eval(self, p)
    }
}

/// Frame `I₁, I₂, I₃` and Christoffel symbols `Γ^a_{bc}` with
/// `D_{e_b} e_c = Γ^a_{bc} e_a`.
#[derive(Debug, Clone)]
pub struct QuaternionicChart {
    dim: usize,
    frame: [MatrixField; 3],
    christoffels: Vec<RationalField>,
    max_exp: Vec<u32>,
}

/// Outcome of [`validate_chart`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChartDiagnostics {
    pub relation_residual: f64,
    pub torsion_residual: f64,
    pub q_residual: f64,
    pub pass: bool,
}

pub const RELATION_TOL: f64 = 1e-10;
pub const Q_TOL: f64 = 1e-8;

impl QuaternionicChart {
    /// `christoffels[(a·m + b)·m + c] = Γ^a_{bc}`.
    pub fn new(frame: [MatrixField; 3], christoffels: Vec<RationalField>) -> Result<Self> {
        let dim = frame[0].dim();
        if dim % 4 != 0 || frame.iter().any(|f| f.dim() != dim) {
            return Err(Error::InvalidInput(format!("frame dimension {dim} is not a common multiple of 4")));
        }
        if christoffels.len() != dim * dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim * dim,
                got: christoffels.len(),
            });
        }
        if let Some(bad) = christoffels.iter().find(|f| f.num_vars() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.num_vars(),
            });
        }
        let max_exp = max_exponents_of(christoffels.iter(), 2 * dim);
        Ok(QuaternionicChart {
            dim,
            frame,
            christoffels,
            max_exp,
        })
    }

    /// Constant standard frame on `ℍ^n` with `Γ = 0`.
    pub fn flat(n: usize) -> Self {
        let dim = 4 * n;
        QuaternionicChart::new(standard_frame(n), vec![RationalField::zero(dim); dim * dim * dim]).expect("flat chart")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self) -> &[MatrixField; 3] {
        &self.frame
    }

    pub fn christoffels(&self) -> &[RationalField] {
        &self.christoffels
    }

    pub fn frame_at(&self, x: &[f64]) -> Result<[DMatrix<f64>; 3]> {
        Ok([self.frame[0].eval(x)?, self.frame[1].eval(x)?, self.frame[2].eval(x)?])
    }

    /// Connection matrices `(Γ_b)^a_c = Γ^a_{bc}` and, with `order = 1`, their
    /// partials `[b][e] = ∂_e Γ_b`.
    pub fn connection(&self, x: &[f64], order: u8) -> Result<(Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>)> {
        let m = self.dim;
        let jets = jets_at(&self.christoffels, &self.max_exp, x, order)?;
        let at = |a: usize, b: usize, c: usize| &jets[(a * m + b) * m + c];
        let gam = (0..m)
            .map(|b| DMatrix::from_fn(m, m, |a, c| at(a, b, c).value.re))
            .collect();
        let dgam = if order >= 1 {
            (0..m)
                .map(|b| {
                    (0..m)
                        .map(|e| DMatrix::from_fn(m, m, |a, c| at(a, b, c).grad[e].re))
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((gam, dgam))
    }

    /// `D_b F = ∂_b F + Γ_b F − F Γ_b` for every coordinate direction.
    pub fn covariant_derivative(&self, field: &MatrixField, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let (f, df) = field.jet(x)?;
        let (gam, _) = self.connection(x, 0)?;
        Ok((0..self.dim).map(|b| &df[b] + &gam[b] * &f - &f * &gam[b]).collect())
    }

    /// `R(e_b, e_c) = ∂_b Γ_c − ∂_c Γ_b + [Γ_b, Γ_c]`, indexed `[b·m + c]`.
    pub fn curvature(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let m = self.dim;
        let (gam, dgam) = self.connection(x, 1)?;
        let mut out = Vec::with_capacity(m * m);
        for b in 0..m {
            for c in 0..m {
                out.push(&dgam[c][b] - &dgam[b][c] + &gam[b] * &gam[c] - &gam[c] * &gam[b]);
            }
        }
        Ok(out)
    }

    /// `Γ' = Γ + ⟨·,·⟩_q(γ)` for a one-form `γ = γ_d dx^d`:
    /// `Γ'^a_{bc} = Γ^a_{bc} + ½(γ_b δ^a_c + γ_c δ^a_b − Σ_i (γ(I_i e_b) I_i{}^a_c + γ(I_i e_c) I_i{}^a_b))`.
    pub fn shifted(&self, gamma: &[RationalField]) -> Result<Self> {
        let m = self.dim;
        if gamma.len() != m {
            return Err(Error::Dimension { expected: m, got: gamma.len() });
        }
        let half = Complex64::new(0.5, 0.0);
        // γ(I_i e_b) = Σ_d γ_d I_i^d_b
        let mut gi = vec![vec![RationalField::zero(m); m]; 3];
        for (i, fr) in self.frame.iter().enumerate() {
            for b in 0..m {
                for (d, g) in gamma.iter().enumerate() {
                    let e = &fr.entries[d * m + b];
                    if !e.is_zero() && !g.is_zero() {
                        gi[i][b] = gi[i][b].add(&g.mul(e)?)?;
                    }
                }
            }
        }
        let mut out = self.christoffels.clone();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let mut s = RationalField::zero(m);
                    if a == c {
                        s = s.add(&gamma[b])?;
                    }
                    if a == b {
                        s = s.add(&gamma[c])?;
                    }
                    for (i, fr) in self.frame.iter().enumerate() {
                        let ac = &fr.entries[a * m + c];
                        let ab = &fr.entries[a * m + b];
                        if !ac.is_zero() && !gi[i][b].is_zero() {
                            s = s.sub(&gi[i][b].mul(ac)?)?;
                        }
                        if !ab.is_zero() && !gi[i][c].is_zero() {
                            s = s.sub(&gi[i][c].mul(ab)?)?;
                        }
                    }
                    if !s.is_zero() {
                        let k = (a * m + b) * m + c;
                        out[k] = out[k].add(&s.scale(half))?;
                    }
                }
            }
        }
        QuaternionicChart::new(self.frame.clone(), out)
    }
}

/// `count` points uniformly in the cube `[-radius, radius]^dim`.
pub fn sample_points(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect())
        .collect()
}

/// Relative least-squares distance of `a` from the span of `basis`.
pub fn span_residual(a: &DMatrix<f64>, basis: &[DMatrix<f64>]) -> f64 {
    let len = a.len();
    let mut mat = DMatrix::zeros(len, basis.len());
    for (k, b) in basis.iter().enumerate() {
        mat.column_mut(k).copy_from_slice(b.as_slice());
    }
    let rhs = nalgebra::DVector::from_column_slice(a.as_slice());
    let svd = mat.clone().svd(true, true);
    let tol = svd.singular_values.max() * 1e-13;
    match svd.solve(&rhs, tol) {
        Ok(c) => (&mat * c - &rhs).norm(),
        Err(_) => f64::INFINITY,
    }
}

/// Relations of the frame, symmetry of `Γ`, and `D Q ⊂ Q` at each point.
pub fn validate_chart(chart: &QuaternionicChart, points: &[Vec<f64>]) -> Result<ChartDiagnostics> {
    let m = chart.dim;
    let mut relation: f64 = 0.0;
    let mut torsion: f64 = 0.0;
    let mut q: f64 = 0.0;
    for x in points {
        let frame = chart.frame_at(x)?;
        relation = relation.max(quaternion_relation_residual(&frame));
        let (gam, _) = chart.connection(x, 0)?;
        for b in 0..m {
            for c in 0..m {
                for a in 0..m {
                    torsion = torsion.max((gam[b][(a, c)] - gam[c][(a, b)]).abs());
                }
            }
        }
        let basis = frame.to_vec();
        for fr in &chart.frame {
            for d in chart.covariant_derivative(fr, x)? {
                q = q.max(span_residual(&d, &basis));
            }
        }
    }
    Ok(ChartDiagnostics {
        relation_residual: relation,
        torsion_residual: torsion,
        q_residual: q,
        pass: relation < RELATION_TOL && torsion == 0.0 && q < Q_TOL,
    })
}
