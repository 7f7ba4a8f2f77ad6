use super::*;
use crate::cproj_geometry::{fs_instance, pert_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rpoint(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.gen_range(-r..r), rng.gen_range(-r..r))).collect()
}

fn fs_setup(n: usize, theta: f64) -> TractorSetup {
    let (d, b) = fs_instance(n, c(theta, 0.0)).unwrap();
    TractorSetup::new(&d, &b).unwrap()
}

fn flat_setup(n: usize) -> TractorSetup {
    TractorSetup::new(&CProjectiveData::flat(n), &LineBundleData::trivial(n)).unwrap()
}

fn vdist(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[test]
fn flat_leaf_is_zero() {
    let leaf = make_leaf(
        &CProjectiveData::flat(2),
        &LineBundleData::trivial(2),
        LeafKind::Holomorphic,
        &[c(0.3, 0.1), c(-0.2, 0.0)],
        0.8,
    )
    .unwrap();
    assert!(leaf.christoffels().iter().all(|g| g.is_zero()));
    assert!(leaf.twist_form().iter().all(|g| g.is_zero()));
    let pt = leaf.point(&[c(0.1, 0.1), c(0.2, -0.3)], 2).unwrap();
    assert!(pt.schouten.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn fs_leaf_restriction_and_flatness() {
    let setup = fs_setup(2, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = rpoint(&mut rng, 2, 0.5);
    for (kind, param) in [
        (LeafKind::Holomorphic, vec![c(0.0, 0.0); 2]),
        (LeafKind::Holomorphic, w.clone()),
        (LeafKind::AntiHolomorphic, w.clone()),
    ] {
        let leaf = setup.checked_leaf(kind, &param, 0.8).unwrap();
        let grid = crate::cproj_geometry::sample_grid(2, 0.8, 4);
        assert!(leaf.flatness_residual(&grid).unwrap() < 1e-9);
        // closed form −(w_i δ^k_j + w_j δ^k_i)/(1 + u·w) with w the frozen
        // coordinates (conjugated for the antiholomorphic block)
        for _ in 0..5 {
            let u = rpoint(&mut rng, 2, 0.5);
            let den = c(1.0, 0.0) + u[0] * param[0] + u[1] * param[1];
            let pt = leaf.point(&u, 1).unwrap();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut want = c(0.0, 0.0);
                        if k == j {
                            want -= param[i];
                        }
                        if k == i {
                            want -= param[j];
                        }
                        let got = pt.gamma[(k * 2 + i) * 2 + j];
                        assert!((got - want / den).norm() < 1e-13);
                    }
                }
            }
            // projectively flat leaf connection: P = −∂γ + γγ = 0 for γ = −∂log(1 + u·w)
            assert!(pt.schouten.iter().all(|v| v.norm() < 1e-13));
        }
        if kind == LeafKind::Holomorphic && param[0].norm() == 0.0 {
            assert!(leaf.christoffels().iter().all(|g| g.is_zero()));
        }
    }
}

#[test]
fn non_type_11_leaf_is_rejected() {
    let res = make_leaf(
        &pert_instance().unwrap(),
        &LineBundleData::trivial(2),
        LeafKind::Holomorphic,
        &[c(0.1, 0.0), c(0.0, 0.2)],
        0.8,
    );
    assert!(matches!(res, Err(Error::Type11Violation { .. })));
}

#[test]
fn tractor_derivative_flat_cases() {
    let leaf = flat_setup(2).leaf(LeafKind::Holomorphic, &[c(0.0, 0.0); 2]).unwrap();
    let u = [c(0.2, 0.1), c(-0.4, 0.3)];
    let y = [c(0.7, -0.2), c(0.1, 0.5)];
    let zero = TractorJet::zero(2);
    let out = tractor_derivative(&leaf, &TractorJet::unit(2, 0), &zero, &y, &u).unwrap();
    assert_eq!(out, TractorJet::zero(2));
    let alpha = vec![c(1.5, 0.5), c(-0.3, 2.0)];
    let out = tractor_derivative(&leaf, &TractorJet::new(c(0.0, 0.0), alpha.clone()), &zero, &y, &u).unwrap();
    assert_eq!(out.l, -(alpha[0] * y[0] + alpha[1] * y[1]));
    assert!(out.alpha.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn tractor_derivative_vanishes_on_parallel_fields() {
    let setup = fs_setup(2, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = TransportConfig::default();
    for kind in [LeafKind::Holomorphic, LeafKind::AntiHolomorphic] {
        let leaf = setup.leaf(kind, &rpoint(&mut rng, 2, 0.5)).unwrap();
        let fb = fiber_basis(&leaf, &[c(0.0, 0.0); 2], &cfg).unwrap();
        let x0 = DVector::from_vec(vec![c(0.3, 0.2), c(-1.0, 0.5), c(0.4, 0.0)]);
        let u = rpoint(&mut rng, 2, 0.4);
        let y = rpoint(&mut rng, 2, 1.0);
        let h = 1e-4;
        let shift = |s: f64| -> Vec<Complex64> { u.iter().zip(&y).map(|(a, b)| a + b * s).collect() };
        let xp = fb.fundamental(&shift(h)).unwrap() * &x0;
        let xm = fb.fundamental(&shift(-h)).unwrap() * &x0;
        let dx = (xp - xm) / c(2.0 * h, 0.0);
        let x = fb.fundamental(&u).unwrap() * &x0;
        let out = tractor_derivative(&leaf, &TractorJet::from_vector(&x), &TractorJet::from_vector(&dx), &y, &u).unwrap();
        assert!(out.to_vector().norm() < 1e-6, "{out:?}");
    }
}

#[test]
fn transport_flat_and_linear() {
    let cfg = TransportConfig::default();
    let leaf = flat_setup(2).leaf(LeafKind::Holomorphic, &[c(0.0, 0.0); 2]).unwrap();
    let a = [c(0.1, 0.0), c(0.0, 0.2)];
    let b = [c(-0.3, 0.4), c(0.5, -0.1)];
    let path = Path::segment(&a, &b);
    let one = TractorJet::unit(2, 0);
    assert_eq!(transport(&leaf, &path, &one, &cfg).unwrap(), one);
    // with α ≠ 0 only l moves, affinely
    let j = TractorJet::new(c(0.5, 0.5), vec![c(1.0, -1.0), c(2.0, 0.0)]);
    let out = transport(&leaf, &path, &j, &cfg).unwrap();
    assert_eq!(out.alpha, j.alpha);
    let want = j.l + j.alpha[0] * (b[0] - a[0]) + j.alpha[1] * (b[1] - a[1]);
    assert!((out.l - want).norm() < 1e-14);

    let setup = fs_setup(2, 0.8);
    let leaf = setup.leaf(LeafKind::Holomorphic, &[c(0.2, 0.3), c(-0.1, 0.2)]).unwrap();
    let j1 = TractorJet::new(c(0.3, -0.2), vec![c(0.1, 0.1), c(1.0, 0.0)]);
    let j2 = TractorJet::new(c(-1.0, 0.4), vec![c(0.0, 0.7), c(0.2, -0.5)]);
    let k = c(0.7, -1.3);
    let sum = TractorJet::from_vector(&(j1.to_vector() + j2.to_vector() * k));
    let lhs = transport(&leaf, &path, &sum, &cfg).unwrap().to_vector();
    let rhs = transport(&leaf, &path, &j1, &cfg).unwrap().to_vector() + transport(&leaf, &path, &j2, &cfg).unwrap().to_vector() * k;
    assert!(vdist(&lhs, &rhs) < 1e-11);
}

/// Richardson-extrapolated explicit Euler with `n` and `2n` steps.
fn euler_oracle(leaf: &LeafContext, a: &[Complex64], b: &[Complex64], x0: &DVector<Complex64>, n: usize) -> DVector<Complex64> {
    let run = |steps: usize| {
        let h = 1.0 / steps as f64;
        let d: Vec<Complex64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
        let mut x = x0.clone();
        for s in 0..steps {
            let t = s as f64 * h;
            let p: Vec<Complex64> = a.iter().zip(&d).map(|(q, v)| q + v * t).collect();
            let mats = leaf.connection_matrices(&p).unwrap();
            let mut dx = DVector::zeros(x.len());
            for (m, di) in mats.iter().zip(&d) {
                dx -= m * &x * *di;
            }
            x += dx * c(h, 0.0);
        }
        x
    };
    run(2 * n) * c(2.0, 0.0) - run(n)
}

#[test]
fn transport_matches_fine_euler() {
    let setup = fs_setup(2, 0.5);
    let leaf = setup.leaf(LeafKind::Holomorphic, &[c(0.3, -0.2), c(0.1, 0.4)]).unwrap();
    let a = [c(0.0, 0.0), c(0.0, 0.0)];
    let b = [c(0.5, 0.2), c(-0.3, 0.4)];
    let j = TractorJet::new(c(1.0, 0.0), vec![c(0.2, 0.1), c(-0.5, 0.3)]);
    let got = transport(&leaf, &Path::segment(&a, &b), &j, &TransportConfig::default()).unwrap();
    let want = euler_oracle(&leaf, &a, &b, &j.to_vector(), 100_000);
    assert!(vdist(&got.to_vector(), &want) < 1e-7);
}

#[test]
fn richardson_monitor_flags_coarse_steps() {
    let setup = fs_setup(2, 3.0);
    let leaf = setup.leaf(LeafKind::Holomorphic, &[c(0.6, -0.2), c(0.4, 0.4)]).unwrap();
    let cfg = TransportConfig {
        steps_per_unit: 1.0,
        min_steps: 1,
        richardson_tol: Some(1e-12),
        fixed_steps: None,
    };
    let path = Path::segment(&[c(0.0, 0.0); 2], &[c(0.7, 0.0), c(0.0, 0.6)]);
    assert!(matches!(transport_matrix(&leaf, &path, &cfg), Err(Error::Step { .. })));
    let fine = TransportConfig {
        richardson_tol: Some(1e-10),
        ..TransportConfig::default()
    };
    assert!(transport_matrix(&leaf, &path, &fine).is_ok());
}

#[test]
fn flat_affine_sections_are_linear_polynomials() {
    let leaf = flat_setup(2).leaf(LeafKind::Holomorphic, &[c(0.4, 0.1), c(0.0, -0.3)]).unwrap();
    let fb = fiber_basis(&leaf, &[c(0.1, 0.2), c(-0.2, 0.0)], &TransportConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<_> = (0..6).map(|_| rpoint(&mut rng, 2, 0.7)).collect();
    // fit E(u) = M (1, u1, u2) with a constant M
    let rows = pts.len();
    let mut poly = DMatrix::zeros(rows, 3);
    let mut vals = DMatrix::zeros(rows, 3);
    for (r, u) in pts.iter().enumerate() {
        poly[(r, 0)] = c(1.0, 0.0);
        poly[(r, 1)] = u[0];
        poly[(r, 2)] = u[1];
        let e = fb.evaluate(u).unwrap();
        for k in 0..3 {
            vals[(r, k)] = e[k];
        }
    }
    let m = poly.clone().svd(true, true).solve(&vals, 1e-14).unwrap();
    let resid = (&poly * &m - &vals).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(resid < 1e-8);
    assert!(condition_number(&m) < 1e6);
}

#[test]
fn path_independence_and_loops() {
    let setup = fs_setup(3, 0.4);
    let cfg = TransportConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for kind in [LeafKind::Holomorphic, LeafKind::AntiHolomorphic] {
        let leaf = setup.leaf(kind, &rpoint(&mut rng, 3, 0.4)).unwrap();
        let o = vec![c(0.0, 0.0); 3];
        let p = rpoint(&mut rng, 3, 0.5);
        let mid = rpoint(&mut rng, 3, 0.5);
        let direct = transport_matrix(&leaf, &Path::segment(&o, &p), &cfg).unwrap();
        let bent = transport_matrix(&leaf, &Path::polyline(vec![o.clone(), mid.clone(), p.clone()]), &cfg).unwrap();
        let d = (&direct - &bent).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(d < 1e-8);
        let lp = transport_matrix(&leaf, &Path::closed(vec![o.clone(), mid, p.clone()]), &cfg).unwrap();
        let id = DMatrix::<Complex64>::identity(4, 4);
        assert!((lp - id).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-7);
        let fb = fiber_basis(&leaf, &o, &cfg).unwrap();
        assert!(fb.condition(&p).unwrap() < 1e6);
        assert!(fb.parallel_residual(&p, 1e-4).unwrap() < 1e-6);
    }
}

#[test]
fn jets_rebuild_from_values() {
    // α = ∂l + T l for every affine section
    let setup = fs_setup(2, 0.7);
    let leaf = setup.leaf(LeafKind::Holomorphic, &[c(0.2, 0.1), c(-0.3, 0.2)]).unwrap();
    let fb = fiber_basis(&leaf, &[c(0.0, 0.0); 2], &TransportConfig::default()).unwrap();
    let u = [c(0.3, -0.1), c(0.1, 0.25)];
    let phi = fb.fundamental(&u).unwrap();
    let t = leaf.point(&u, 1).unwrap().twist;
    let h = 1e-4;
    for i in 0..2 {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[i] += h;
        um[i] -= h;
        let d = (fb.evaluate(&up).unwrap() - fb.evaluate(&um).unwrap()) / c(2.0 * h, 0.0);
        for k in 0..3 {
            let alpha = d[k] + t[i] * phi[(0, k)];
            assert!((alpha - phi[(1 + i, k)]).norm() < 1e-8);
        }
    }
}

#[test]
fn line_fiber_cases() {
    let cfg = TransportConfig::default();
    let grid = crate::cproj_geometry::sample_grid(2, 0.8, 3);
    let flat = CProjectiveData::flat(2);
    let leaf = flat_setup(2).leaf(LeafKind::Holomorphic, &[c(0.2, 0.0), c(0.0, 0.1)]).unwrap();
    let lf = line_fiber(&leaf, &flat, &[c(0.0, 0.0); 2], &cfg, &grid).unwrap();
    let u = [c(0.4, 0.3), c(-0.2, 0.5)];
    assert!((lf.value(&u).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    assert!(lf.jet(&u).unwrap().alpha.iter().all(|a| a.norm() == 0.0));

    // D′ = flat − ∂log(1 + z·zb) on the flat instance
    let (fs, _) = fs_instance(2, c(0.0, 0.0)).unwrap();
    let w = [c(0.3, -0.1), c(0.2, 0.2)];
    let leaf = flat_setup(2).leaf(LeafKind::Holomorphic, &w).unwrap();
    let lf = line_fiber(&leaf, &fs, &[c(0.0, 0.0); 2], &cfg, &grid).unwrap();
    // quadrature oracle: l = exp(−∫ γ) with γ_i = −w_i / (1 + z·w) along the segment
    let gamma = |z: &[Complex64]| -> Vec<Complex64> {
        let den = c(1.0, 0.0) + z[0] * w[0] + z[1] * w[1];
        w.iter().map(|wi| -wi / den).collect()
    };
    let m = 2000;
    let mut integral = c(0.0, 0.0);
    for s in 0..=m {
        let t = s as f64 / m as f64;
        let weight = if s == 0 || s == m {
            1.0
        } else if s % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let z: Vec<Complex64> = u.iter().map(|v| v * t).collect();
        let g = gamma(&z);
        integral += (g[0] * u[0] + g[1] * u[1]) * (weight / (3.0 * m as f64));
    }
    assert!((lf.value(&u).unwrap() - (-integral).exp()).norm() < 1e-8);

    // membership in the span of affine sections, both foliations, both data sets
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for setup in [flat_setup(2), fs_setup(2, 0.5)] {
        for kind in [LeafKind::Holomorphic, LeafKind::AntiHolomorphic] {
            let leaf = setup.leaf(kind, &rpoint(&mut rng, 2, 0.4)).unwrap();
            for rep in [&flat, &fs] {
                let lf = line_fiber(&leaf, rep, &[c(0.0, 0.0); 2], &cfg, &grid).unwrap();
                for u in crate::cproj_geometry::sample_grid(2, 0.6, 3) {
                    assert!(lf.membership_residual(&u).unwrap() < 1e-8);
                    assert!(lf.value(&u).unwrap().norm() > 1e-3);
                }
            }
        }
    }

    let bad = line_fiber(&leaf, &pert_instance().unwrap(), &[c(0.0, 0.0); 2], &cfg, &grid);
    assert!(matches!(bad, Err(Error::Type11Violation { .. })));
}
