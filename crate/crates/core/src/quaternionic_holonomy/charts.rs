use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{MatrixField, QuaternionicChart};
use crate::error::Result;
use crate::polynomial_algebra::{PolyField, RationalField};

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Left multiplication by `i, j, k` on `ℍ = R⁴` in the basis `(1, i, j, k)`.
pub fn left_quaternion_matrices() -> [DMatrix<f64>; 3] {
    let li = DMatrix::from_row_slice(4, 4, &[0., -1., 0., 0., 1., 0., 0., 0., 0., 0., 0., -1., 0., 0., 1., 0.]);
    let lj = DMatrix::from_row_slice(4, 4, &[0., 0., -1., 0., 0., 0., 0., 1., 1., 0., 0., 0., 0., -1., 0., 0.]);
    let lk = &li * &lj;
    [li, lj, lk]
}

fn block_diag(block: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for q in 0..n {
        m.view_mut((4 * q, 4 * q), (4, 4)).copy_from(block);
    }
    m
}

/// Left multiplication by `i, j, k` on `ℍ^n`.
pub fn standard_frame(n: usize) -> [MatrixField; 3] {
    left_quaternion_matrices().map(|l| MatrixField::constant(&block_diag(&l, n)))
}

type PolyMat = Vec<Vec<PolyField>>;

fn poly_mat_mul(a: &PolyMat, b: &PolyMat) -> Result<PolyMat> {
    let d = a.len();
    let nv = a[0][0].num_vars();
    let mut out = vec![vec![PolyField::zero(nv); d]; d];
    for r in 0..d {
        for c in 0..d {
            for k in 0..d {
                if !a[r][k].is_zero() && !b[k][c].is_zero() {
                    out[r][c] = out[r][c].add(&a[r][k].checked_mul(&b[k][c])?);
                }
            }
        }
    }
    Ok(out)
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1.0,
        (3, 2, 1) | (2, 1, 3) | (1, 3, 2) => -1.0,
        _ => 0.0,
    }
}

/// Gibbons–Hawking metric `V⁻¹(dt − c·x₁dx₂)² + V·|dx|²` with
/// `V = 1 + c·x₃` on coordinates `(t, x₁, x₂, x₃)`, times flat `ℍ`.
/// The frame is its hyperkähler triple and the connection is Levi-Civita,
/// so the chart preserves every `I_i`. Valid where `V > 0`.
pub fn gibbons_hawking_chart(c: f64) -> Result<QuaternionicChart> {
    let m = 8;
    let zero = PolyField::zero(m);
    let one = PolyField::one(m);
    let x = |k: usize| PolyField::z(m, k);
    let v = one.add(&x(3).scale(re(c)));
    let v2 = v.checked_mul(&v)?;
    // connection form A = a2·dx₂
    let a2 = x(1).scale(re(-c));

    // g = G / V, g⁻¹ = H / V on the first four coordinates
    let mut g = vec![vec![zero.clone(); 4]; 4];
    let mut h = vec![vec![zero.clone(); 4]; 4];
    g[0][0] = one.clone();
    g[0][2] = a2.clone();
    g[2][0] = a2.clone();
    g[2][2] = a2.checked_mul(&a2)?.add(&v2);
    g[1][1] = v2.clone();
    g[3][3] = v2.clone();
    h[0][0] = v2.add(&a2.checked_mul(&a2)?);
    h[0][2] = a2.neg();
    h[2][0] = a2.neg();
    h[1][1] = one.clone();
    h[2][2] = one.clone();
    h[3][3] = one.clone();

    let dv: Vec<PolyField> = (0..4).map(|b| v.partial(crate::polynomial_algebra::Var::Z(b))).collect();
    let dg = |b: usize, p: usize, q: usize| -> Result<PolyField> {
        // V²·∂_b(G_pq / V)
        let d = g[p][q].partial(crate::polynomial_algebra::Var::Z(b));
        Ok(d.checked_mul(&v)?.sub(&g[p][q].checked_mul(&dv[b])?))
    };
    let v3 = v2.checked_mul(&v)?;
    let mut gamma = vec![RationalField::zero(m); m * m * m];
    for a in 0..4 {
        for b in 0..4 {
            for cc in 0..4 {
                let mut num = zero.clone();
                for d in 0..4 {
                    if h[a][d].is_zero() {
                        continue;
                    }
                    let k = dg(b, d, cc)?.add(&dg(cc, d, b)?).sub(&dg(d, b, cc)?);
                    if !k.is_zero() {
                        num = num.add(&h[a][d].checked_mul(&k)?);
                    }
                }
                if !num.is_zero() {
                    gamma[(a * m + b) * m + cc] = RationalField::new(num.scale(re(0.5)), v3.clone())?;
                }
            }
        }
    }

    // I_i in the frame E0 = ∂t, E1 = ∂1, E2 = ∂2 + c·x₁∂t, E3 = ∂3, times V
    let mut p = vec![vec![zero.clone(); 4]; 4];
    let mut p_inv = vec![vec![zero.clone(); 4]; 4];
    for r in 0..4 {
        p[r][r] = one.clone();
        p_inv[r][r] = one.clone();
    }
    p[0][2] = a2.neg();
    p_inv[0][2] = a2.clone();
    let flat = left_quaternion_matrices();
    let mut frame = Vec::with_capacity(3);
    for i in 1..=3 {
        let mut mv = vec![vec![zero.clone(); 4]; 4];
        mv[i][0] = one.clone();
        mv[0][i] = v2.neg();
        for j in 1..=3 {
            for k in 1..=3 {
                let e = levi_civita(i, j, k);
                if e != 0.0 {
                    mv[k][j] = v.scale(re(e));
                }
            }
        }
        let coord = poly_mat_mul(&poly_mat_mul(&p, &mv)?, &p_inv)?;
        let mut entries = vec![RationalField::zero(m); m * m];
        for r in 0..4 {
            for cc in 0..4 {
                entries[r * m + cc] = RationalField::new(coord[r][cc].clone(), v.clone())?;
                entries[(r + 4) * m + cc + 4] = RationalField::constant(m, re(flat[i - 1][(r, cc)]));
            }
        }
        frame.push(MatrixField::new(m, entries)?);
    }
    let frame: [MatrixField; 3] = frame.try_into().expect("three structures");
    QuaternionicChart::new(frame, gamma)
}

/// `Σ a_k F_k` for rational coefficients `a` over the given frame.
fn structure_from(a: [RationalField; 3], frame: &[MatrixField; 3]) -> Result<MatrixField> {
    MatrixField::combine(&a, &[&frame[0], &frame[1], &frame[2]])
}

/// Left multiplication by `u = q·i·q⁻¹` with `q = 1 + x₁` on `ℍ²`, where
/// `x₁` is the first quaternionic coordinate. Integrable: it is the pullback
/// of `L_i` by `x ↦ (1 + x₁)⁻¹x`.
pub fn twisted_structure() -> Result<MatrixField> {
    let m = 8;
    let y = |k: usize| PolyField::z(m, k);
    let q0 = PolyField::one(m).add(&y(0));
    let (q1, q2, q3) = (y(1), y(2), y(3));
    let sq = |p: &PolyField| p.checked_mul(p);
    let two = re(2.0);
    let norm = sq(&q0)?.add(&sq(&q1)?).add(&sq(&q2)?).add(&sq(&q3)?);
    let a0 = sq(&q0)?.add(&sq(&q1)?).sub(&sq(&q2)?).sub(&sq(&q3)?);
    let a1 = q1.checked_mul(&q2)?.add(&q0.checked_mul(&q3)?).scale(two);
    let a2 = q1.checked_mul(&q3)?.sub(&q0.checked_mul(&q2)?).scale(two);
    let a = [
        RationalField::new(a0, norm.clone())?,
        RationalField::new(a1, norm.clone())?,
        RationalField::new(a2, norm)?,
    ];
    structure_from(a, &standard_frame(2))
}

/// `cos θ·I₁ + sin θ·I₂` with `θ = 2·atan(x₁)` on flat `ℍ²`, written
/// rationally. Not integrable.
pub fn rotating_structure() -> Result<MatrixField> {
    let m = 8;
    let x = PolyField::z(m, 0);
    let x2 = x.checked_mul(&x)?;
    let den = PolyField::one(m).add(&x2);
    let a = [
        RationalField::new(PolyField::one(m).sub(&x2), den.clone())?,
        RationalField::new(x.scale(re(2.0)), den)?,
        RationalField::zero(m),
    ];
    structure_from(a, &standard_frame(2))
}
