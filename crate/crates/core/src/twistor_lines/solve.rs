use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ansatz::LineAnsatz;
use super::residual::{collocation_grid, matching_residual, max_matching_residual, residual_jacobian};
use crate::error::{Error, Result};
use crate::twistor_space::{real_structure, Chart, ChartPoint, TwistorSpace};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineSolverConfig {
    pub line_tol: f64,
    pub base_degree: usize,
    pub fiber_degree: usize,
    /// Degrees are raised by 2 until the residual is below `line_tol` or
    /// the fiber degree would exceed this.
    pub max_fiber_degree: usize,
    pub continuation_steps: usize,
    pub max_iter: usize,
    /// Relative step size at which Gauss-Newton stops.
    pub step_tol: f64,
    /// Central-difference step for derivatives in the leaf parameter.
    pub fd_step: f64,
    /// Compute the off-grid reality residual after convergence.
    pub validate: bool,
}

impl Default for LineSolverConfig {
    fn default() -> Self {
        LineSolverConfig {
            line_tol: 1e-9,
            base_degree: 2,
            fiber_degree: 3,
            max_fiber_degree: 11,
            continuation_steps: 10,
            max_iter: 30,
            step_tol: 1e-12,
            fd_step: 1e-5,
            validate: true,
        }
    }
}

/// Converged real line.
#[derive(Debug, Clone)]
pub struct RealTwistorLine {
    pub ansatz: LineAnsatz,
    pub target: DVector<f64>,
    pub grid: Vec<Complex64>,
    /// Max complex matching residual on the grid.
    pub matching_residual: f64,
    /// Max chart distance between the transition of the plus point at `λ`
    /// and the real-structure image of the plus point at `−λ`, on grid
    /// midpoints.
    pub reality_residual: Option<f64>,
    /// Residual norms of every Gauss-Newton run, one list per continuation
    /// step or degree change.
    pub history: Vec<Vec<f64>>,
}

fn pin(ansatz: &mut LineAnsatz, target: &DVector<f64>) {
    ansatz.set_m_coords(target);
    ansatz.fiber_coeffs[0][0] = Complex64::new(0.0, 0.0);
    ansatz.fiber_coeffs[1][0].im = 0.0;
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, smax * 1e-13).map_err(|e| Error::NewtonDivergence(e.to_string()))
}

/// Gauss-Newton at fixed degrees with the M-coordinates pinned to `target`.
/// Returns the converged ansatz and the residual norm per iteration.
pub fn gauss_newton(
    space: &TwistorSpace,
    seed: &LineAnsatz,
    target: &DVector<f64>,
    grid: &[Complex64],
    config: &LineSolverConfig,
) -> Result<(LineAnsatz, Vec<f64>)> {
    let mut ansatz = seed.clone();
    pin(&mut ansatz, target);
    let lay = ansatz.layout();
    let free = lay.free();
    let mut theta = ansatz.to_real();
    let mut history = Vec::new();
    for _ in 0..config.max_iter {
        let (r, jac) = residual_jacobian(space, &ansatz, grid, config.fd_step)?;
        let rn = r.norm();
        history.push(rn);
        let jf = jac.select_columns(&free);
        let delta = lstsq(&jf, &(-&r))?;
        let scale = 1.0 + theta.amax();
        let mut alpha = 1.0;
        loop {
            let mut trial = theta.clone();
            for (q, &p) in free.iter().enumerate() {
                trial[p] += alpha * delta[q];
            }
            let cand = LineAnsatz::from_real(&lay, &trial);
            let accepted = match matching_residual(space, &cand, grid) {
                Ok(rt) => {
                    let tn = rt.norm();
                    if tn <= rn * (1.0 + 1e-9) || delta.amax() * alpha < config.step_tol * scale {
                        Some(tn)
                    } else {
                        None
                    }
                }
                Err(Error::NotDecomposable(_)) => None,
                Err(e) => return Err(e),
            };
            if let Some(tn) = accepted {
                theta = trial;
                ansatz = cand;
                if delta.amax() * alpha < config.step_tol * scale {
                    history.push(tn);
                    return Ok((ansatz, history));
                }
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-3 {
                return Err(Error::NewtonDivergence(format!("line search stalled at residual {rn:.3e}")));
            }
        }
    }
    let last = matching_residual(space, &ansatz, grid)?.norm();
    history.push(last);
    if max_matching_residual(space, &ansatz, grid)? < config.line_tol {
        Ok((ansatz, history))
    } else {
        Err(Error::NewtonDivergence(format!(
            "no convergence in {} iterations (residual {last:.3e})",
            config.max_iter
        )))
    }
}

/// Solves for the real line with M-coordinates `target`, moving from the
/// seed's coordinates in `continuation_steps` equal steps.
pub fn solve_line(
    space: &TwistorSpace,
    seed: &LineAnsatz,
    target: &DVector<f64>,
    config: &LineSolverConfig,
) -> Result<RealTwistorLine> {
    let n = space.n();
    if target.len() != 4 * n || seed.n() != n {
        return Err(Error::Dimension {
            expected: 4 * n,
            got: target.len(),
        });
    }
    let db = config.base_degree.max(seed.base_degree());
    let df = config.fiber_degree.max(seed.fiber_degree());
    let mut current = seed.with_degrees(db, df);
    let mut grid = collocation_grid(df);
    let m0 = seed.m_coords();
    let steps = if (target - &m0).amax() < 1e-15 {
        1
    } else {
        config.continuation_steps.max(1)
    };
    let mut history = Vec::new();
    // intermediate steps only need to stay in the basin
    let loose = LineSolverConfig {
        step_tol: config.step_tol.max(1e-7),
        ..config.clone()
    };
    for k in 1..=steps {
        let m = &m0 + (target - &m0) * (k as f64 / steps as f64);
        let cfg = if k < steps { &loose } else { config };
        let (next, h) = gauss_newton(space, &current, &m, &grid, cfg)?;
        current = next;
        history.push(h);
    }
    let mut resid = max_matching_residual(space, &current, &grid)?;
    while resid >= config.line_tol && current.fiber_degree() + 2 <= config.max_fiber_degree {
        let (b, f) = (current.base_degree() + 2, current.fiber_degree() + 2);
        current = current.with_degrees(b, f);
        grid = collocation_grid(f);
        let (next, h) = gauss_newton(space, &current, target, &grid, config)?;
        current = next;
        history.push(h);
        resid = max_matching_residual(space, &current, &grid)?;
    }
    if resid >= config.line_tol {
        return Err(Error::NewtonDivergence(format!(
            "matching residual {resid:.3e} above tolerance at fiber degree {}",
            current.fiber_degree()
        )));
    }
    let mut line = RealTwistorLine {
        ansatz: current,
        target: target.clone(),
        grid,
        matching_residual: resid,
        reality_residual: None,
        history,
    };
    if config.validate {
        line.reality_residual = Some(reality_residual(space, &line.ansatz, line.grid.len())?);
    }
    Ok(line)
}

/// Real line seeded from the canonical line through `conj a_0`: a direct
/// solve first, then continuation if that fails.
pub fn line_at(space: &TwistorSpace, target: &DVector<f64>, config: &LineSolverConfig) -> Result<RealTwistorLine> {
    let n = space.n();
    if target.len() != 4 * n {
        return Err(Error::Dimension {
            expected: 4 * n,
            got: target.len(),
        });
    }
    let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(target[2 * i], -target[2 * i + 1])).collect();
    let seed = LineAnsatz::canonical(space, &x)?;
    let direct = LineSolverConfig {
        continuation_steps: 1,
        ..config.clone()
    };
    match solve_line(space, &seed, target, &direct) {
        Err(Error::NewtonDivergence(_)) | Err(Error::NotDecomposable(_)) if config.continuation_steps > 1 => {
            solve_line(space, &seed, target, config)
        }
        other => other,
    }
}

/// M-coordinates `(x̄, 0)` of the canonical line over `x`.
pub fn canonical_target(x: &[Complex64]) -> DVector<f64> {
    let n = x.len();
    let mut m = DVector::zeros(4 * n);
    for (i, v) in x.iter().enumerate() {
        m[2 * i] = v.re;
        m[2 * i + 1] = -v.im;
    }
    m
}

pub fn plus_point(ansatz: &LineAnsatz, lambda: Complex64) -> ChartPoint {
    ChartPoint::new(
        Chart::Plus,
        ansatz.base_at(lambda).iter().copied().collect(),
        ansatz.fiber_at(lambda),
    )
}

/// Off-grid check that the line is glued and real: `count` points midway
/// between the points of a grid of that size.
pub fn reality_residual(space: &TwistorSpace, ansatz: &LineAnsatz, count: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..count {
        let lam = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / count as f64);
        let glued = space.transition(&plus_point(ansatz, lam))?;
        let mirrored = real_structure(&plus_point(ansatz, -lam));
        worst = worst.max(glued.distance(&mirrored));
    }
    Ok(worst)
}
