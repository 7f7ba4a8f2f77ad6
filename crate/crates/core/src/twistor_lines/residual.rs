use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ansatz::{Layout, LineAnsatz};
use crate::error::{Error, Result};
use crate::twistor_space::{eval_jet_on, Chart, TwistorSpace};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `N = 4(d_fib + 2)` equally spaced points on `|λ| = 1`; closed under `λ ↦ −λ`.
pub fn collocation_grid(fiber_degree: usize) -> Vec<Complex64> {
    let m = 4 * (fiber_degree + 2);
    (0..m)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64))
        .collect()
}

/// Index of `−λ_j` for every grid point.
pub fn antipodes(grid: &[Complex64]) -> Result<Vec<usize>> {
    grid.iter()
        .map(|&l| {
            if (l.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Grid);
            }
            grid.iter().position(|&m| (m + l).norm() < 1e-12).ok_or(Error::Grid)
        })
        .collect()
}

/// Points `(x̃_j, x_j)` of `S̄ × S` met by the line: `x̃_j = x̃(λ_j)` and, by
/// reality, `x_j = conj x̃(−λ_j)`.
fn base_points(space: &TwistorSpace, ansatz: &LineAnsatz, grid: &[Complex64]) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
    let reach = 2.0 * space.config.domain_radius;
    grid.iter()
        .map(|&l| {
            let w: Vec<Complex64> = ansatz.base_at(l).iter().copied().collect();
            let x: Vec<Complex64> = ansatz.base_at(-l).iter().map(|v| v.conj()).collect();
            if w.iter().chain(&x).any(|v| v.norm() > reach || !v.re.is_finite()) {
                return Err(Error::NotDecomposable("line exits the gluing domain".into()));
            }
            Ok((w, x))
        })
        .collect()
}

struct PointEval {
    value: DVector<Complex64>,
    d_x: Vec<DVector<Complex64>>,
    d_w: Vec<DVector<Complex64>>,
}

fn evaluate_point(space: &TwistorSpace, w: &[Complex64], x: &[Complex64], fd_step: Option<f64>) -> Result<PointEval> {
    let leaf = space.leaf(Chart::Plus, w)?;
    let jet = eval_jet_on(&leaf, x, &space.config.transport)?;
    let mut d_w = Vec::new();
    if let Some(h) = fd_step {
        for i in 0..w.len() {
            let mut wp = w.to_vec();
            let mut wm = w.to_vec();
            wp[i] += h;
            wm[i] -= h;
            let ep = space.eval_row(Chart::Plus, &wp, x)?;
            let em = space.eval_row(Chart::Plus, &wm, x)?;
            d_w.push((ep - em) / Complex64::new(2.0 * h, 0.0));
        }
    }
    Ok(PointEval {
        value: jet.value,
        d_x: jet.grad,
        d_w,
    })
}

fn evaluate_all(space: &TwistorSpace, ansatz: &LineAnsatz, grid: &[Complex64], fd_step: Option<f64>) -> Result<Vec<PointEval>> {
    base_points(space, ansatz, grid)?
        .iter()
        .map(|(w, x)| evaluate_point(space, w, x, fd_step))
        .collect()
}

/// Complex matching residual at each grid point, `[r1 (n), r2 (n+1)]`:
/// `r1 = s' − l·E'` with `l = s_0 / E_0` is membership of the plus point in
/// the image of `φ+` over `(x_j, x̃_j)`, and `r2 = l·t_j − E⁻` compares the
/// reality-determined minus point `t_j = −conj s(−λ_j)` with the transition
/// image `E⁻ / l`.
fn complex_residuals(ansatz: &LineAnsatz, grid: &[Complex64], evals: &[PointEval], anti: &[usize]) -> Result<Vec<DVector<Complex64>>> {
    let n = ansatz.n();
    grid.iter()
        .enumerate()
        .map(|(j, &lam)| {
            let e = &evals[j].value;
            if e[0].norm() < 1e-12 {
                return Err(Error::NotDecomposable("evaluation row degenerates".into()));
            }
            let em = evals[anti[j]].value.map(|v| v.conj());
            let s = ansatz.fiber_at(lam);
            let t = ansatz.fiber_at(-lam).map(|v| -v.conj());
            let l = s[0] / e[0];
            let mut r = DVector::zeros(2 * n + 1);
            for i in 0..n {
                r[i] = s[i + 1] - l * e[i + 1];
            }
            for a in 0..=n {
                r[n + a] = l * t[a] - em[a];
            }
            Ok(r)
        })
        .collect()
}

fn stack(parts: &[DVector<Complex64>]) -> DVector<f64> {
    let m: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(2 * m);
    let mut q = 0;
    for p in parts {
        for v in p.iter() {
            out[2 * q] = v.re;
            out[2 * q + 1] = v.im;
            q += 1;
        }
    }
    out
}

/// Real matching residual vector (re/im interleaved, grid-point major).
pub fn matching_residual(space: &TwistorSpace, ansatz: &LineAnsatz, grid: &[Complex64]) -> Result<DVector<f64>> {
    let anti = antipodes(grid)?;
    let evals = evaluate_all(space, ansatz, grid, None)?;
    Ok(stack(&complex_residuals(ansatz, grid, &evals, &anti)?))
}

/// Largest complex residual entry over the grid.
pub fn max_matching_residual(space: &TwistorSpace, ansatz: &LineAnsatz, grid: &[Complex64]) -> Result<f64> {
    let r = matching_residual(space, ansatz, grid)?;
    Ok(r.as_slice()
        .chunks(2)
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max))
}

/// Residual and its Jacobian with respect to every real ansatz parameter.
/// Derivatives of the evaluation row in the leaf point are exact; in the
/// leaf parameter they are central differences with step `fd_step`.
pub fn residual_jacobian(
    space: &TwistorSpace,
    ansatz: &LineAnsatz,
    grid: &[Complex64],
    fd_step: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = ansatz.n();
    let lay: Layout = ansatz.layout();
    let p = lay.len();
    let anti = antipodes(grid)?;
    let evals = evaluate_all(space, ansatz, grid, Some(fd_step))?;
    let res = complex_residuals(ansatz, grid, &evals, &anti)?;

    // dE⁺_j as a complex (n+1) × p matrix over real parameters
    let mut d_plus = Vec::with_capacity(grid.len());
    for (j, &lam) in grid.iter().enumerate() {
        let mut d: DMatrix<Complex64> = DMatrix::zeros(n + 1, p);
        for k in 0..=lay.base_degree {
            let lk = lam.powu(k as u32);
            let mk = (-lam).powu(k as u32).conj();
            for i in 0..n {
                let col = lay.base(k, i);
                let dw = &evals[j].d_w[i];
                let dx = &evals[j].d_x[i];
                for a in 0..=n {
                    d[(a, col)] += dw[a] * lk + dx[a] * mk;
                    d[(a, col + 1)] += dw[a] * (I * lk) - dx[a] * (I * mk);
                }
            }
        }
        d_plus.push(d);
    }

    let rows_per = 2 * (2 * n + 1);
    let mut jac = DMatrix::zeros(rows_per * grid.len(), p);
    for (j, &lam) in grid.iter().enumerate() {
        let e = &evals[j].value;
        let de = &d_plus[j];
        let dem = d_plus[anti[j]].map(|v: Complex64| v.conj());
        let s = ansatz.fiber_at(lam);
        let t = ansatz.fiber_at(-lam).map(|v| -v.conj());
        let l = s[0] / e[0];
        // ds, dt over real parameters
        let mut ds = DMatrix::zeros(n + 1, p);
        let mut dt = DMatrix::zeros(n + 1, p);
        for k in 0..=lay.fiber_degree {
            let lk = lam.powu(k as u32);
            let mk = (-lam).powu(k as u32).conj();
            for a in 0..=n {
                let col = lay.fiber(k, a);
                ds[(a, col)] = lk;
                ds[(a, col + 1)] = I * lk;
                dt[(a, col)] = -mk;
                dt[(a, col + 1)] = I * mk;
            }
        }
        let dl = (ds.row(0) - de.row(0) * l) / e[0];
        let mut block = DMatrix::zeros(2 * n + 1, p);
        for i in 0..n {
            let row = ds.row(i + 1) - dl.clone() * e[i + 1] - de.row(i + 1) * l;
            block.set_row(i, &row);
        }
        for a in 0..=n {
            let row = dl.clone() * t[a] + dt.row(a) * l - dem.row(a);
            block.set_row(n + a, &row);
        }
        let base = j * rows_per;
        for q in 0..(2 * n + 1) {
            for c in 0..p {
                jac[(base + 2 * q, c)] = block[(q, c)].re;
                jac[(base + 2 * q + 1, c)] = block[(q, c)].im;
            }
        }
    }
    Ok((stack(&res), jac))
}
