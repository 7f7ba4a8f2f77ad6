use nalgebra::{DMatrix, DVector};

use super::{MatrixField, QuaternionicChart};
use crate::error::{Error, Result};

/// Systems with a larger condition number are reported as singular.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Solution of `(D + ⟨·,γ⟩_q) I = 0` at one point, in the least-squares sense.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GammaSolution {
    pub point: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Max-abs entry of `D′I` after the shift.
    pub residual: f64,
    pub condition: f64,
}

/// `S_b(e^d)`, the shift of `Γ_b` produced by the coordinate one-form `dx^d`.
fn shift_basis(frame: &[DMatrix<f64>; 3], b: usize, d: usize) -> DMatrix<f64> {
    let m = frame[0].nrows();
    let mut s = DMatrix::zeros(m, m);
    if b == d {
        s += DMatrix::<f64>::identity(m, m);
    }
    s[(b, d)] += 1.0;
    for f in frame {
        s -= f * f[(d, b)];
        s -= f.column(b) * f.row(d);
    }
    s * 0.5
}

/// Linear system `A γ = rhs` whose rows are the entries of `D′_b I` over
/// all directions `b`.
pub fn gamma_system(chart: &QuaternionicChart, field: &MatrixField, x: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = chart.dim();
    if field.dim() != m {
        return Err(Error::Dimension { expected: m, got: field.dim() });
    }
    let frame = chart.frame_at(x)?;
    let f = field.eval(x)?;
    let di = chart.covariant_derivative(field, x)?;
    let mm = m * m;
    let mut a = DMatrix::zeros(m * mm, m);
    let mut rhs = DVector::zeros(m * mm);
    for b in 0..m {
        rhs.rows_mut(b * mm, mm).copy_from_slice(di[b].as_slice());
        for d in 0..m {
            let s = shift_basis(&frame, b, d);
            let comm = &s * &f - &f * &s;
            a.view_mut((b * mm, d), (mm, 1)).copy_from_slice(comm.as_slice());
        }
    }
    Ok((a, -rhs))
}

/// One-form `γ` at each point such that `D + ⟨·,γ⟩_q` preserves `field`.
/// A rank-deficient system is an error; an inconsistent one shows up as a
/// large `residual`.
pub fn solve_unique_gamma(chart: &QuaternionicChart, field: &MatrixField, points: &[Vec<f64>]) -> Result<Vec<GammaSolution>> {
    points
        .iter()
        .map(|x| {
            let (a, rhs) = gamma_system(chart, field, x)?;
            let svd = a.clone().svd(true, true);
            let sv = &svd.singular_values;
            let condition = sv.max() / sv.min();
            let gamma = svd
                .solve(&rhs, 0.0)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let residual = (&a * &gamma - &rhs).amax();
            if !(condition < CONDITION_LIMIT) {
                return Err(Error::SingularSystem { residual, condition });
            }
            Ok(GammaSolution {
                point: x.clone(),
                gamma: gamma.iter().copied().collect(),
                residual,
                condition,
            })
        })
        .collect()
}
