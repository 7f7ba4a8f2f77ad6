use super::*;
use crate::polynomial_algebra::parse_rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rvec(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))
}

fn rpoint(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.gen_range(-r..r), rng.gen_range(-r..r))).collect()
}

fn conj(z: &[Complex64]) -> Vec<Complex64> {
    z.iter().map(|v| v.conj()).collect()
}

fn sample_form() -> OneForm {
    OneForm::from_holomorphic(vec![
        parse_rational("(0.3+0.1i) z2 zb1 + 0.1", 2).unwrap(),
        parse_rational("(-0.2+0.4i) z1^2 + (0.05-0.1i) zb2", 2).unwrap(),
    ])
}

/// `γ(Y) = Σ γ_i Y^i + γ_ī conj(Y^i)` evaluated directly from complex
/// components; `JY` has components `i Y^i`.
fn c_bracket_oracle(y: &DVector<f64>, g: &OneForm, zv: &DVector<f64>, p: &[Complex64]) -> Vec<Complex64> {
    let n = g.n();
    let comp = |v: &DVector<f64>| (0..n).map(|i| c(v[2 * i], v[2 * i + 1])).collect::<Vec<_>>();
    let gh: Vec<_> = g.gamma_h.iter().map(|f| f.diagonal_eval(p).unwrap()).collect();
    let ga: Vec<_> = g.gamma_a.iter().map(|f| f.diagonal_eval(p).unwrap()).collect();
    let pair = |v: &[Complex64]| -> f64 {
        (0..n).map(|i| gh[i] * v[i] + ga[i] * v[i].conj()).sum::<Complex64>().re
    };
    let yc = comp(y);
    let zc = comp(zv);
    let jy: Vec<_> = yc.iter().map(|v| Complex64::i() * v).collect();
    let jz: Vec<_> = zc.iter().map(|v| Complex64::i() * v).collect();
    (0..n)
        .map(|i| 0.5 * (pair(&yc) * zc[i] + pair(&zc) * yc[i] - pair(&jy) * jz[i] - pair(&jz) * jy[i]))
        .collect()
}

#[test]
fn c_bracket_zero_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = rpoint(&mut rng, 2, 0.5);
    let y = rvec(&mut rng, 4);
    let z = rvec(&mut rng, 4);
    assert_eq!(c_bracket(&y, &OneForm::zero(2), &z, &p).unwrap().amax(), 0.0);
    let g = sample_form();
    assert_eq!(c_bracket(&y, &g, &z, &p).unwrap(), c_bracket(&z, &g, &y, &p).unwrap());
}

#[test]
fn c_bracket_matches_transcription() {
    let g = OneForm::from_holomorphic(vec![RationalField::constant(2, c(1.0, 0.0)), RationalField::zero(2)]);
    let p = vec![c(0.2, -0.1), c(0.3, 0.4)];
    let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let out = c_bracket(&e1, &g, &e1, &p).unwrap();
    let want = c_bracket_oracle(&e1, &g, &e1, &p);
    for i in 0..2 {
        assert!((c(out[2 * i], out[2 * i + 1]) - want[i]).norm() < 1e-13);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = sample_form();
    for _ in 0..10 {
        let p = rpoint(&mut rng, 2, 0.6);
        let (y, z) = (rvec(&mut rng, 4), rvec(&mut rng, 4));
        let out = c_bracket(&y, &g, &z, &p).unwrap();
        let want = c_bracket_oracle(&y, &g, &z, &p);
        for i in 0..2 {
            assert!((c(out[2 * i], out[2 * i + 1]) - want[i]).norm() < 1e-13);
        }
    }
}

#[test]
fn c_bracket_commutes_with_j() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = sample_form();
    let j = standard_complex_structure(2);
    for _ in 0..10 {
        let p = rpoint(&mut rng, 2, 0.6);
        let (y, z) = (rvec(&mut rng, 4), rvec(&mut rng, 4));
        let a = c_bracket(&y, &g, &(&j * &z), &p).unwrap();
        let b = &j * c_bracket(&y, &g, &z, &p).unwrap();
        assert!((a - b).amax() < 1e-12);
    }
}

/// Left multiplication by `i, j, k` on `H² = R⁸`, coordinates `(a, b, c, d)`
/// per quaternion.
fn quaternion_frame() -> [DMatrix<f64>; 3] {
    let unit = |u: usize| {
        DMatrix::from_fn(8, 8, |r, col| {
            let (qr, qc) = (r / 4, col / 4);
            if qr != qc {
                return 0.0;
            }
            let e = [0.0, 0.0, 0.0, 0.0];
            let mut basis = e;
            basis[col % 4] = 1.0;
            quat_mul(&unit_quat(u), &basis)[r % 4]
        })
    };
    [unit(1), unit(2), unit(3)]
}

fn unit_quat(u: usize) -> [f64; 4] {
    let mut q = [0.0; 4];
    q[u] = 1.0;
    q
}

fn quat_mul(p: &[f64; 4], q: &[f64; 4]) -> [f64; 4] {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

#[test]
fn q_bracket_matches_quaternion_arithmetic() {
    let frame = quaternion_frame();
    assert!(quaternion_relation_residual(&frame) < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let zero = DVector::zeros(8);
    for _ in 0..10 {
        let (y, z, g) = (rvec(&mut rng, 8), rvec(&mut rng, 8), rvec(&mut rng, 8));
        assert_eq!(q_bracket(&y, &zero, &z, &frame).unwrap().amax(), 0.0);
        let out = q_bracket(&y, &g, &z, &frame).unwrap();
        assert_eq!(out, q_bracket(&z, &g, &y, &frame).unwrap());
        // oracle: act on quaternion pairs directly
        let lmul = |u: usize, v: &DVector<f64>| {
            let mut w = DVector::zeros(8);
            for h in 0..2 {
                let q = [v[4 * h], v[4 * h + 1], v[4 * h + 2], v[4 * h + 3]];
                let r = quat_mul(&unit_quat(u), &q);
                for t in 0..4 {
                    w[4 * h + t] = r[t];
                }
            }
            w
        };
        let mut want = &z * g.dot(&y) + &y * g.dot(&z);
        for u in 1..4 {
            want -= lmul(u, &z) * g.dot(&lmul(u, &y)) + lmul(u, &y) * g.dot(&lmul(u, &z));
        }
        assert!((out - want * 0.5).amax() < 1e-13);
    }
}

#[test]
fn q_bracket_rejects_bad_frame() {
    let mut frame = quaternion_frame();
    frame[2] = frame[2].clone() * 2.0;
    let v = DVector::zeros(8);
    assert!(matches!(q_bracket(&v, &v, &v, &frame), Err(Error::Frame { .. })));
}

#[test]
fn change_representative_round_trip() {
    let (fs, _) = fs_instance(2, c(0.0, 0.0)).unwrap();
    assert_eq!(change_representative(&fs, &OneForm::zero(2)).unwrap(), fs);
    let g = sample_form();
    let there = change_representative(&fs, &g).unwrap();
    let back = change_representative(&there, &g.neg()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let p = rpoint(&mut rng, 2, 0.5);
        for (a, b) in back.christoffels().iter().zip(fs.christoffels()) {
            assert!((a.diagonal_eval(&p).unwrap() - b.diagonal_eval(&p).unwrap()).norm() < 1e-14);
        }
    }
    // polynomial data round-trips exactly
    let pert = pert_instance().unwrap();
    let poly_form = OneForm::from_holomorphic(vec![
        parse_rational("(0.3+0.1i) z2 zb1", 2).unwrap(),
        parse_rational("z1^2", 2).unwrap(),
    ]);
    let back = change_representative(&change_representative(&pert, &poly_form).unwrap(), &poly_form.neg()).unwrap();
    assert_eq!(back, pert);
}

#[test]
fn fs_shift_is_flat() {
    let (fs, _) = fs_instance(3, c(1.0, 0.0)).unwrap();
    let shifted = change_representative(&fs, &fs_shift_form(3).unwrap()).unwrap();
    assert!(shifted.is_flat_data());
}

#[test]
fn change_representative_pointwise() {
    // (D_Y Z)^k = Y(Z^k) + Γ^k_ij Y^i Z^j on (1,0) components for a real
    // vector field Z with holomorphic components Z^k(z, zb).
    let zfield = [
        parse_rational("0.5 z1 zb2 + (0.1-0.3i) z2", 2).unwrap(),
        parse_rational("(0.2+0.2i) zb1^2 + 1", 2).unwrap(),
    ];
    let pert = pert_instance().unwrap();
    let g = sample_form();
    let shifted = change_representative(&pert, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let deriv = |data: &CProjectiveData, y: &[Complex64], p: &[Complex64]| -> Vec<Complex64> {
        let pb = conj(p);
        (0..2)
            .map(|k| {
                let mut v = c(0.0, 0.0);
                for i in 0..2 {
                    let dz = zfield[k].partial(Var::Z(i)).unwrap().eval(p, &pb).unwrap();
                    let dzb = zfield[k].partial(Var::Zb(i)).unwrap().eval(p, &pb).unwrap();
                    v += y[i] * dz + y[i].conj() * dzb;
                    for j in 0..2 {
                        let zj = zfield[j].eval(p, &pb).unwrap();
                        v += data.christoffel(k, i, j).eval(p, &pb).unwrap() * y[i] * zj;
                    }
                }
                v
            })
            .collect()
    };
    for _ in 0..10 {
        let p = rpoint(&mut rng, 2, 0.5);
        let pb = conj(&p);
        let yr = rvec(&mut rng, 4);
        let y = [c(yr[0], yr[1]), c(yr[2], yr[3])];
        let zc: Vec<_> = zfield.iter().map(|f| f.eval(&p, &pb).unwrap()).collect();
        let zr = DVector::from_vec(vec![zc[0].re, zc[0].im, zc[1].re, zc[1].im]);
        let br = c_bracket(&yr, &g, &zr, &p).unwrap();
        let lhs = deriv(&shifted, &y, &p);
        let rhs = deriv(&pert, &y, &p);
        for k in 0..2 {
            assert!((lhs[k] - rhs[k] - c(br[2 * k], br[2 * k + 1])).norm() < 1e-12);
        }
    }
}

use crate::polynomial_algebra::Var;

/// Curvature from central finite differences of the Christoffel symbols in
/// the complexified chart.
fn fd_curvature(data: &CProjectiveData, z: &[Complex64], zb: &[Complex64]) -> CurvatureAtPoint {
    let n = data.n();
    let h = 1e-5;
    let conj_g = data.conjugate_christoffels();
    let eval_all = |fields: &[RationalField], z: &[Complex64], zb: &[Complex64]| -> Vec<Complex64> {
        fields.iter().map(|f| f.eval(z, zb).unwrap()).collect()
    };
    let d = |fields: &[RationalField], slot: usize| -> Vec<Complex64> {
        let (mut zp, mut zm, mut bp, mut bm) = (z.to_vec(), z.to_vec(), zb.to_vec(), zb.to_vec());
        if slot < n {
            zp[slot] += h;
            zm[slot] -= h;
        } else {
            bp[slot - n] += h;
            bm[slot - n] -= h;
        }
        let a = eval_all(fields, &zp, &bp);
        let b = eval_all(fields, &zm, &bm);
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    };
    let g = eval_all(data.christoffels(), z, zb);
    let gc = eval_all(&conj_g, z, zb);
    let dg: Vec<_> = (0..2 * n).map(|s| d(data.christoffels(), s)).collect();
    let dgc: Vec<_> = (0..2 * n).map(|s| d(&conj_g, s)).collect();
    let ix = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let mut r = CurvatureAtPoint::zeros(2 * n);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for dd in 0..n {
                    let mut v = dg[cc][ix(a, dd, b)] - dg[dd][ix(a, cc, b)];
                    let mut w = dgc[n + cc][ix(a, dd, b)] - dgc[n + dd][ix(a, cc, b)];
                    for e in 0..n {
                        v += g[ix(a, cc, e)] * g[ix(e, dd, b)] - g[ix(a, dd, e)] * g[ix(e, cc, b)];
                        w += gc[ix(a, cc, e)] * gc[ix(e, dd, b)] - gc[ix(a, dd, e)] * gc[ix(e, cc, b)];
                    }
                    let i1 = r.idx(a, b, cc, dd);
                    r.data[i1] = v;
                    let i2 = r.idx(n + a, n + b, n + cc, n + dd);
                    r.data[i2] = w;
                    // mixed: ∇_c̄ ∇_d ∂_b − ∇_d ∇_c̄ ∂_b
                    let m = dg[n + cc][ix(a, dd, b)];
                    r.set_antisym(a, b, n + cc, dd, m);
                    let m2 = dgc[cc][ix(a, dd, b)];
                    r.set_antisym(n + a, n + b, cc, n + dd, m2);
                }
            }
        }
    }
    r
}

fn max_diff(a: &CurvatureAtPoint, b: &CurvatureAtPoint) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn curvature_flat_and_fs() {
    let flat = CProjectiveData::flat(2);
    let p = vec![c(0.1, 0.2), c(-0.3, 0.1)];
    assert_eq!(curvature(&flat, &p, &conj(&p)).unwrap().max_norm(), 0.0);

    let (fs, _) = fs_instance(2, c(0.0, 0.0)).unwrap();
    for p in [vec![c(0.0, 0.0); 2], p.clone()] {
        let r = curvature(&fs, &p, &conj(&p)).unwrap();
        assert!(max_diff(&r, &fd_curvature(&fs, &p, &conj(&p))) < 1e-6);
        assert!(r.max_norm() > 0.5);
        assert!(r.bianchi_residual() < 1e-10);
        let m = r.dim();
        for a in 0..m {
            for b in 0..m {
                for cc in 0..m {
                    for dd in 0..m {
                        assert_eq!(r.get(a, b, cc, dd), -r.get(a, b, dd, cc));
                    }
                }
            }
        }
    }
}

#[test]
fn curvature_shift_difference_matches_fd() {
    let pert = pert_instance().unwrap();
    let shifted = change_representative(&pert, &sample_form()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let p = rpoint(&mut rng, 2, 0.5);
        let pb = conj(&p);
        let r0 = curvature(&pert, &p, &pb).unwrap();
        let r1 = curvature(&shifted, &p, &pb).unwrap();
        let f0 = fd_curvature(&pert, &p, &pb);
        let f1 = fd_curvature(&shifted, &p, &pb);
        let worst = (0..r0.data.len())
            .map(|i| ((r1.data[i] - r0.data[i]) - (f1.data[i] - f0.data[i])).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6);
        assert!(r1.bianchi_residual() < 1e-10);
    }
}

#[test]
fn type_11_classification() {
    let grid = sample_grid(2, 0.8, 5);
    assert_eq!(grid.len(), 25);
    let flat = is_type_11(&CProjectiveData::flat(2), &grid).unwrap();
    assert!(flat.is_type_11);
    assert_eq!(flat.residual, 0.0);

    let (fs, theta) = fs_instance(2, c(0.7, 0.0)).unwrap();
    let r = is_type_11(&fs, &grid).unwrap();
    assert!(r.is_type_11 && r.residual < 1e-10, "{r:?}");
    assert!(is_type_11_bundle(&theta, &grid).unwrap().is_type_11);

    let r = is_type_11(&pert_instance().unwrap(), &grid).unwrap();
    assert!(!r.is_type_11 && r.residual > 1e-3);
    let bad = LineBundleData::new(vec![parse_rational("zb1 z2", 2).unwrap(), RationalField::zero(2)]).unwrap();
    assert!(!is_type_11_bundle(&bad, &grid).unwrap().is_type_11);
}

#[test]
fn reality_of_conjugate_block() {
    let (fs, _) = fs_instance(2, c(0.0, 0.0)).unwrap();
    let grid = sample_grid(2, 0.8, 3);
    // conjugate block equals pointwise conjugate on the diagonal
    assert!(fs.reality_residual(&grid).unwrap() < 1e-15);
}

#[test]
fn weyl_flat_fs_and_invariance() {
    let p = vec![c(0.2, 0.1), c(-0.1, 0.3)];
    let flat_leaf = LeafConnection::new(&CProjectiveData::flat(2), LeafKind::Holomorphic, &conj(&p)).unwrap();
    assert!(weyl_projective(&flat_leaf, &p).unwrap().iter().all(|v| v.norm() == 0.0));

    let (fs, _) = fs_instance(3, c(0.0, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [LeafKind::Holomorphic, LeafKind::AntiHolomorphic] {
        let leaf = LeafConnection::new(&fs, kind, &rpoint(&mut rng, 3, 0.4)).unwrap();
        let w = weyl_projective(&leaf, &rpoint(&mut rng, 3, 0.4)).unwrap();
        assert!(w.iter().all(|v| v.norm() < 1e-9));
    }

    // leaf Weyl vanishes identically for n = 2, so test in n = 3
    let mut entries = BTreeMap::new();
    entries.insert((0, 1, 1), parse_rational("z1^2 + (0.3-0.2i) zb2 z3", 3).unwrap());
    entries.insert((1, 0, 2), parse_rational("0.4 z2 zb1", 3).unwrap());
    entries.insert((2, 2, 2), parse_rational("(0.1+0.5i) z1 z2", 3).unwrap());
    let base = CProjectiveData::from_entries(3, entries).unwrap();
    let form = OneForm::from_holomorphic(vec![
        parse_rational("(0.3+0.1i) z2 zb1 + 0.1", 3).unwrap(),
        parse_rational("(-0.2+0.4i) z1^2 + (0.05-0.1i) zb3", 3).unwrap(),
        parse_rational("0.7 z3 zb2 z1", 3).unwrap(),
    ]);
    let shifted = change_representative(&base, &form).unwrap();
    let mut seen: f64 = 0.0;
    for _ in 0..5 {
        let param = rpoint(&mut rng, 3, 0.5);
        let u = rpoint(&mut rng, 3, 0.5);
        let w0 = weyl_projective(&LeafConnection::new(&base, LeafKind::Holomorphic, &param).unwrap(), &u).unwrap();
        let w1 = weyl_projective(&LeafConnection::new(&shifted, LeafKind::Holomorphic, &param).unwrap(), &u).unwrap();
        for (a, b) in w0.iter().zip(&w1) {
            assert!((a - b).norm() < 1e-9);
            seen = seen.max(a.norm());
        }
    }
    assert!(seen > 1e-2);
}

#[test]
fn o1_form() {
    assert!(o1_connection_form(&CProjectiveData::flat(2))
        .unwrap()
        .gamma_h
        .iter()
        .all(|g| g.is_zero()));

    let (fs, _) = fs_instance(2, c(0.0, 0.0)).unwrap();
    let tau = o1_connection_form(&fs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let p = rpoint(&mut rng, 2, 0.6);
        let u = 1.0 + p.iter().map(|v| v.norm_sqr()).sum::<f64>();
        for i in 0..2 {
            // −∂_i log(1 + z·zb)
            let want = -p[i].conj() / u;
            assert!((tau.gamma_h[i].diagonal_eval(&p).unwrap() - want).norm() < 1e-12);
        }
    }

    let g = sample_form();
    let tau2 = o1_connection_form(&change_representative(&fs, &g).unwrap()).unwrap();
    let diff = tau2.sub(&tau).unwrap();
    for _ in 0..5 {
        let p = rpoint(&mut rng, 2, 0.6);
        for i in 0..2 {
            let d = diff.gamma_h[i].diagonal_eval(&p).unwrap();
            let gi = g.gamma_h[i].diagonal_eval(&p).unwrap();
            assert!(d.norm() > 1e-3);
            assert!((d - gi).norm() < 1e-12);
        }
    }
}

struct ConstJ(DMatrix<f64>);

impl EndomorphismField for ConstJ {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn contains(&self, _: &[f64]) -> bool {
        true
    }
    fn eval(&self, _: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
}

/// `dF⁻¹ J₀ dF` for `F(z1, z2) = (z1 + z2², z2 + 0.3 z1²)`.
struct Pullback;

impl EndomorphismField for Pullback {
    fn dim(&self) -> usize {
        4
    }
    fn contains(&self, p: &[f64]) -> bool {
        p.iter().all(|x| x.abs() < 0.5)
    }
    fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let z1 = c(p[0], p[1]);
        let z2 = c(p[2], p[3]);
        let jac = [[c(1.0, 0.0), 2.0 * z2], [0.6 * z1, c(1.0, 0.0)]];
        let mut df = DMatrix::zeros(4, 4);
        for a in 0..2 {
            for b in 0..2 {
                let w = jac[a][b];
                df[(2 * a, 2 * b)] = w.re;
                df[(2 * a, 2 * b + 1)] = -w.im;
                df[(2 * a + 1, 2 * b)] = w.im;
                df[(2 * a + 1, 2 * b + 1)] = w.re;
            }
        }
        let inv = df.clone().try_inverse().unwrap();
        Ok(inv * standard_complex_structure(2) * df)
    }
}

/// `J = cos(x1) I + sin(x1) J` on `H = R⁴`.
struct Rotating;

impl EndomorphismField for Rotating {
    fn dim(&self) -> usize {
        4
    }
    fn contains(&self, p: &[f64]) -> bool {
        p.iter().all(|x| x.abs() < 2.0)
    }
    fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let f = quaternion_frame();
        let i = f[0].view((0, 0), (4, 4)).into_owned();
        let j = f[1].view((0, 0), (4, 4)).into_owned();
        Ok(i * p[0].cos() + j * p[0].sin())
    }
}

#[test]
fn nijenhuis_cases() {
    let pt = [0.1, -0.2, 0.05, 0.15];
    assert!(nijenhuis(&ConstJ(standard_complex_structure(2)), &pt, 1e-3).unwrap() < 1e-12);
    let pb = Pullback.eval(&pt).unwrap();
    assert!(((&pb * &pb) + DMatrix::identity(4, 4)).amax() < 1e-12);
    assert!(nijenhuis(&Pullback, &pt, 1e-3).unwrap() < 1e-5);
    assert!(nijenhuis(&Rotating, &pt, 1e-3).unwrap() > 1e-2);
    assert_eq!(nijenhuis(&Pullback, &[0.4999, 0.0, 0.0, 0.0], 1e-3), Err(Error::Grid));
}
