use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ansatz::LineAnsatz;
use super::frame::{complex_structure_at, tangent_frame};
use super::solve::{line_at, solve_line, LineSolverConfig, RealTwistorLine};
use crate::cproj_geometry::{nijenhuis, o1_connection_form, CProjectiveData, EndomorphismField};
use crate::error::{Error, Result};
use crate::polynomial_algebra::RationalField;
use crate::twistor_space::{Chart, TwistorSpace};

/// One sample of `J_D`.
#[derive(Debug, Clone)]
pub struct JdSample {
    pub line: RealTwistorLine,
    pub lambda_d: Complex64,
    /// `J_D` in M-coordinates.
    pub jd: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct JdField {
    pub samples: Vec<JdSample>,
}

/// Root of `λ ↦ s(λ)·v(x̃(λ))` in the closed unit disk by Newton from 0,
/// where `v` is the normal of `D⁺`.
pub fn intersection_parameter(space: &TwistorSpace, ansatz: &LineAnsatz, rep_tau_h: &[RationalField]) -> Result<Complex64> {
    let g = |lam: Complex64| -> Result<Complex64> {
        let base: Vec<Complex64> = ansatz.base_at(lam).iter().copied().collect();
        let v = space.line_normal(Chart::Plus, &base, rep_tau_h)?;
        Ok((ansatz.fiber_at(lam).transpose() * v)[(0, 0)])
    };
    let h = 1e-6;
    let scale = ansatz.fiber_coeffs.iter().map(|b| b.norm()).fold(0.0, f64::max).max(1.0);
    let mut lam = Complex64::new(0.0, 0.0);
    let mut val = g(lam)?;
    for _ in 0..60 {
        if val.norm() < 1e-15 * scale {
            break;
        }
        let dg = (g(lam + h)? - g(lam - h)?) / (2.0 * h);
        if dg.norm() < 1e-14 * scale {
            return Err(Error::Intersection("pairing has a critical point".into()));
        }
        let step = val / dg;
        lam -= step;
        if lam.norm() > 1.5 {
            return Err(Error::Intersection(format!("Newton iterate left the disk at |λ| = {:.3}", lam.norm())));
        }
        val = g(lam)?;
        if step.norm() < 1e-15 {
            break;
        }
    }
    if val.norm() > 1e-11 * scale {
        return Err(Error::NewtonDivergence(format!("intersection residual {:.3e}", val.norm())));
    }
    if lam.norm() > 1.0 {
        return Err(Error::Intersection(format!("root at |λ| = {:.3}", lam.norm())));
    }
    Ok(lam)
}

/// `(λ_D, J_D)`; `J_D = −I_{λ_D}` so that `J_D` restricts to `J` on `S`.
pub fn jd_at(
    space: &TwistorSpace,
    line: &RealTwistorLine,
    rep_tau_h: &[RationalField],
    config: &LineSolverConfig,
) -> Result<(Complex64, DMatrix<f64>)> {
    let lambda_d = intersection_parameter(space, &line.ansatz, rep_tau_h)?;
    let frame = tangent_frame(space, line, config)?;
    let i = complex_structure_at(line, &frame, lambda_d)?;
    Ok((lambda_d, -i))
}

pub fn jd_field(
    space: &TwistorSpace,
    rep: &CProjectiveData,
    targets: &[DVector<f64>],
    config: &LineSolverConfig,
) -> Result<JdField> {
    let rep_tau = o1_connection_form(rep)?.gamma_h;
    let mut samples = Vec::with_capacity(targets.len());
    for t in targets {
        let line = line_at(space, t, config)?;
        let (lambda_d, jd) = jd_at(space, &line, &rep_tau, config)?;
        samples.push(JdSample { line, lambda_d, jd });
    }
    Ok(JdField { samples })
}

/// Differential of the circle action in M-coordinates: the fiber
/// coordinates rotate by `t`, the base coordinates are fixed.
pub fn circle_differential(n: usize, t: f64) -> DMatrix<f64> {
    let mut d = DMatrix::identity(4 * n, 4 * n);
    let (s, c) = t.sin_cos();
    for i in 0..n {
        let r = 2 * n + 2 * i;
        d[(r, r)] = c;
        d[(r, r + 1)] = -s;
        d[(r + 1, r)] = s;
        d[(r + 1, r + 1)] = c;
    }
    d
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `max ‖dφ_t ∘ J_D(m) ∘ dφ_t⁻¹ − J_D(φ_t m)‖` over samples and angles.
pub fn s1_invariance_check(
    space: &TwistorSpace,
    rep: &CProjectiveData,
    field: &JdField,
    angles: &[f64],
    config: &LineSolverConfig,
) -> Result<f64> {
    let rep_tau = o1_connection_form(rep)?.gamma_h;
    let n = space.n();
    let mut worst: f64 = 0.0;
    let inner = LineSolverConfig {
        validate: false,
        ..config.clone()
    };
    for sample in &field.samples {
        for &t in angles {
            if t == 0.0 {
                continue;
            }
            let moved = sample.line.ansatz.rotate(t);
            let target = moved.m_coords();
            let line = solve_line(space, &moved, &target, &inner)?;
            let (_, jd) = jd_at(space, &line, &rep_tau, config)?;
            let d = circle_differential(n, t);
            let dinv = circle_differential(n, -t);
            worst = worst.max(max_abs(&(&d * &sample.jd * dinv - jd)));
        }
    }
    Ok(worst)
}

/// `J_D` on a neighbourhood of a solved line, re-solved at fixed degree
/// from that line.
pub struct LocalJdField<'a> {
    pub space: &'a TwistorSpace,
    pub rep_tau_h: Vec<RationalField>,
    pub seed: LineAnsatz,
    pub center: DVector<f64>,
    pub radius: f64,
    pub config: LineSolverConfig,
}

impl<'a> LocalJdField<'a> {
    pub fn new(space: &'a TwistorSpace, rep: &CProjectiveData, line: &RealTwistorLine, radius: f64, config: &LineSolverConfig) -> Result<Self> {
        Ok(LocalJdField {
            space,
            rep_tau_h: o1_connection_form(rep)?.gamma_h,
            seed: line.ansatz.clone(),
            center: line.target.clone(),
            radius,
            config: LineSolverConfig {
                base_degree: line.ansatz.base_degree(),
                fiber_degree: line.ansatz.fiber_degree(),
                max_fiber_degree: line.ansatz.fiber_degree(),
                continuation_steps: 1,
                validate: false,
                ..config.clone()
            },
        })
    }
}

impl EndomorphismField for LocalJdField<'_> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.center.len() && p.iter().zip(self.center.iter()).all(|(a, b)| (a - b).abs() <= self.radius)
    }

    fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let target = DVector::from_column_slice(p);
        let line = solve_line(self.space, &self.seed, &target, &self.config)?;
        Ok(jd_at(self.space, &line, &self.rep_tau_h, &self.config)?.1)
    }
}

/// Max central-difference Nijenhuis norm of `J_D` at the samples.
pub fn integrability_check(
    space: &TwistorSpace,
    rep: &CProjectiveData,
    field: &JdField,
    step: f64,
    config: &LineSolverConfig,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for sample in &field.samples {
        let local = LocalJdField::new(space, rep, &sample.line, 4.0 * step, config)?;
        let center: Vec<f64> = sample.line.target.iter().copied().collect();
        worst = worst.max(nijenhuis(&local, &center, step)?);
    }
    Ok(worst)
}

fn pairs(v: &DVector<Complex64>) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

impl JdField {
    /// `[{target, coefficients, residuals, lambda_D}]`.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .samples
            .iter()
            .map(|s| {
                serde_json::json!({
                    "target": s.line.target.as_slice(),
                    "coefficients": {
                        "base": s.line.ansatz.base_coeffs.iter().map(pairs).collect::<Vec<_>>(),
                        "fiber": s.line.ansatz.fiber_coeffs.iter().map(pairs).collect::<Vec<_>>(),
                    },
                    "residuals": {
                        "matching": s.line.matching_residual,
                        "reality": s.line.reality_residual,
                    },
                    "lambda_D": [s.lambda_d.re, s.lambda_d.im],
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }

    /// `sample,row,col,value` lines for every entry of every `J_D`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,row,col,value\n");
        for (k, s) in self.samples.iter().enumerate() {
            for r in 0..s.jd.nrows() {
                for c in 0..s.jd.ncols() {
                    out.push_str(&format!("{k},{r},{c},{:.17e}\n", s.jd[(r, c)]));
                }
            }
        }
        out
    }
}
