use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ansatz::{Layout, LineAnsatz};
use super::residual::residual_jacobian;
use super::solve::{LineSolverConfig, RealTwistorLine};
use crate::error::{Error, Result};
use crate::twistor_space::{annihilator_basis, TwistorSpace};

/// Minimal ratio between the smallest non-kernel and the largest kernel
/// singular value.
pub const KERNEL_GAP: f64 = 1e4;

/// Real line deformations: column `m` moves the M-coordinate `m` by one
/// unit and stays in the kernel of the gauge-fixed matching Jacobian.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub layout: Layout,
    pub vectors: DMatrix<f64>,
    /// Singular values of the gauge-fixed Jacobian, ascending.
    pub singular_values: Vec<f64>,
    pub gap: f64,
}

impl TangentFrame {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Variation `(δx̃(λ), δs(λ)) ∈ C^{2n+1}` of each frame vector.
    pub fn evaluate(&self, lambda: Complex64) -> Vec<DVector<Complex64>> {
        (0..self.dim())
            .map(|m| {
                let v = self.vectors.column(m).into_owned();
                let d = LineAnsatz::from_real(&self.layout, &v);
                let b = d.base_at(lambda);
                let s = d.fiber_at(lambda);
                DVector::from_iterator(b.len() + s.len(), b.iter().chain(s.iter()).copied())
            })
            .collect()
    }
}

pub fn tangent_frame(space: &TwistorSpace, line: &RealTwistorLine, config: &LineSolverConfig) -> Result<TangentFrame> {
    let n = space.n();
    let want = 4 * n;
    let lay = line.ansatz.layout();
    let (_, jac) = residual_jacobian(space, &line.ansatz, &line.grid, config.fd_step)?;
    let cols = lay.non_gauge();
    let j = jac.select_columns(&cols);
    let svd = j.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Rank { expected: want, found: 0 })?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = sv.last().copied().unwrap_or(0.0);
    let found = sv.iter().filter(|&&x| x < smax * 1e-6).count();
    let floor = smax * f64::EPSILON;
    let gap = if want < sv.len() { sv[want] / sv[want - 1].max(floor) } else { 0.0 };
    if found != want || gap < KERNEL_GAP {
        return Err(Error::Rank { expected: want, found });
    }
    let kernel = DMatrix::from_fn(cols.len(), want, |r, c| v_t[(order[c], r)]);
    // target coordinates come first in `non_gauge`
    let km = kernel.rows(0, want).into_owned();
    let inv = km.try_inverse().ok_or(Error::Rank { expected: want, found: 0 })?;
    let local = kernel * inv;
    let mut vectors = DMatrix::zeros(lay.len(), want);
    for (r, &p) in cols.iter().enumerate() {
        vectors.set_row(p, &local.row(r));
    }
    Ok(TangentFrame {
        layout: lay,
        vectors,
        singular_values: sv,
        gap,
    })
}

/// `I_{λ₀} = ev⁻¹ ∘ i ∘ ev` where `ev` takes a deformation to its value at
/// `λ₀` modulo the tangent of the line, in M-coordinates.
pub fn complex_structure_at(line: &RealTwistorLine, frame: &TangentFrame, lambda0: Complex64) -> Result<DMatrix<f64>> {
    let m = frame.dim();
    let b = line.ansatz.base_derivative_at(lambda0);
    let s = line.ansatz.fiber_derivative_at(lambda0);
    let tangent = DVector::from_iterator(b.len() + s.len(), b.iter().chain(s.iter()).map(|v| v.conj()));
    let basis = annihilator_basis(&tangent);
    let values = frame.evaluate(lambda0);
    let mut ev = DMatrix::zeros(m, m);
    for (c, v) in values.iter().enumerate() {
        for (q, u) in basis.iter().enumerate() {
            let z = u.dotc(v);
            ev[(2 * q, c)] = z.re;
            ev[(2 * q + 1, c)] = z.im;
        }
    }
    let sv = ev.clone().singular_values();
    if sv.min() < 1e-10 * sv.max() {
        return Err(Error::Rank {
            expected: m,
            found: sv.iter().filter(|&&x| x >= 1e-10 * sv.max()).count(),
        });
    }
    let mut mult_i = DMatrix::zeros(m, m);
    for q in 0..m / 2 {
        mult_i[(2 * q + 1, 2 * q)] = 1.0;
        mult_i[(2 * q, 2 * q + 1)] = -1.0;
    }
    let inv = ev.clone().try_inverse().ok_or(Error::Rank { expected: m, found: 0 })?;
    Ok(inv * mult_i * ev)
}

#[derive(Debug, Clone)]
pub struct QuaternionTriple {
    pub i: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

impl QuaternionTriple {
    /// Largest Frobenius norm among `I²+1`, `J²+1`, `K²+1`, `IJ+JI`, `IJK+1`.
    pub fn residual(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.i.nrows(), self.i.ncols());
        [
            &self.i * &self.i + &id,
            &self.j * &self.j + &id,
            &self.k * &self.k + &id,
            &self.i * &self.j + &self.j * &self.i,
            &self.i * &self.j * &self.k + &id,
        ]
        .iter()
        .map(|m| m.norm())
        .fold(0.0, f64::max)
    }

    /// Relative least-squares distance of `a` from `span{I, J, K}`.
    pub fn span_residual(&self, a: &DMatrix<f64>) -> f64 {
        let len = a.len();
        let mut basis = DMatrix::zeros(len, 3);
        basis.set_column(0, &DVector::from_column_slice(self.i.as_slice()));
        basis.set_column(1, &DVector::from_column_slice(self.j.as_slice()));
        basis.set_column(2, &DVector::from_column_slice(self.k.as_slice()));
        let rhs = DVector::from_column_slice(a.as_slice());
        let svd = basis.clone().svd(true, true);
        match svd.solve(&rhs, 1e-14) {
            Ok(c) => (&basis * c - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE),
            Err(_) => f64::INFINITY,
        }
    }
}

/// `I := I_0`, `J := I_1`, `K := IJ`.
pub fn quaternion_frame(line: &RealTwistorLine, frame: &TangentFrame, tol: f64) -> Result<QuaternionTriple> {
    let i = complex_structure_at(line, frame, Complex64::new(0.0, 0.0))?;
    let j = complex_structure_at(line, frame, Complex64::new(1.0, 0.0))?;
    let k = &i * &j;
    let triple = QuaternionTriple { i, j, k };
    let residual = triple.residual();
    if residual > tol {
        return Err(Error::Relation { residual });
    }
    Ok(triple)
}
