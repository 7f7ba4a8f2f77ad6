use std::sync::OnceLock;

use cproj_twistor::cproj_geometry::{
    c_bracket, curvature, fs_instance, standard_complex_structure, CProjectiveData, LineBundleData, OneForm,
};
use cproj_twistor::polynomial_algebra::{PolyField, RationalField};
use cproj_twistor::quaternionic_holonomy::{validate_chart, QuaternionicChart};
use cproj_twistor::twistor_space::{cstar_action, real_structure, Chart, ChartPoint, TwistorConfig, TwistorSpace};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

fn fs() -> &'static (CProjectiveData, LineBundleData, TwistorSpace) {
    static S: OnceLock<(CProjectiveData, LineBundleData, TwistorSpace)> = OnceLock::new();
    S.get_or_init(|| {
        let (d, b) = fs_instance(2, C::new(0.5, 0.0)).unwrap();
        let z = TwistorSpace::new(&d, &b, TwistorConfig::default()).unwrap();
        (d, b, z)
    })
}

fn complex(r: f64) -> impl Strategy<Value = C> {
    (-r..r, -r..r).prop_map(|(a, b)| C::new(a, b))
}

fn point(r: f64) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec(complex(r), 2)
}

fn real_vec(m: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0..1.0f64, m).prop_map(DVector::from_vec)
}

fn chart_point() -> impl Strategy<Value = ChartPoint> {
    (any::<bool>(), point(0.5), prop::collection::vec(complex(1.0), 3)).prop_map(|(plus, base, s)| {
        let chart = if plus { Chart::Plus } else { Chart::Minus };
        ChartPoint::new(chart, base, DVector::from_vec(s))
    })
}

/// Affine one-form `γ_i = c_i + Σ_k c_ik z_k`.
fn affine_form() -> impl Strategy<Value = OneForm> {
    prop::collection::vec(complex(0.5), 6).prop_map(|c| {
        let comps = (0..2)
            .map(|i| {
                let p = PolyField::constant(2, c[3 * i])
                    .add(&PolyField::z(2, 0).scale(c[3 * i + 1]))
                    .add(&PolyField::z(2, 1).scale(c[3 * i + 2]));
                RationalField::from(p)
            })
            .collect();
        OneForm::from_holomorphic(comps)
    })
}

fn real_shift() -> impl Strategy<Value = Vec<RationalField>> {
    prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 9), 8).prop_map(|rows| {
        rows.into_iter()
            .map(|c| {
                let mut p = PolyField::constant(8, C::new(c[0], 0.0));
                for k in 0..8 {
                    p = p.add(&PolyField::z(8, k).scale(C::new(c[k + 1], 0.0)));
                }
                RationalField::from(p)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn c_bracket_commutes_with_j(g in affine_form(), y in real_vec(4), z in real_vec(4), p in point(0.6)) {
        let j = standard_complex_structure(2);
        let a = c_bracket(&y, &g, &(&j * &z), &p).unwrap();
        let b = &j * c_bracket(&y, &g, &z, &p).unwrap();
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn curvature_symmetries(z in point(0.6)) {
        let zb: Vec<C> = z.iter().map(|v| v.conj()).collect();
        let r = curvature(&fs().0, &z, &zb).unwrap();
        let m = r.dim();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        prop_assert!((r.get(a, b, c, d) + r.get(a, b, d, c)).norm() < 1e-14);
                    }
                }
            }
        }
        prop_assert!(r.bianchi_residual() < 1e-10);
    }

    #[test]
    fn real_structure_is_an_involution(p in chart_point()) {
        prop_assert_eq!(real_structure(&real_structure(&p)), p);
    }

    #[test]
    fn cstar_action_is_a_group_action(p in chart_point(), a in complex(2.0), b in complex(2.0)) {
        prop_assume!(a.norm() > 0.1 && b.norm() > 0.1);
        let lhs = cstar_action(a, &cstar_action(b, &p));
        prop_assert!(lhs.distance(&cstar_action(a * b, &p)) < 1e-12);
        // σ(c·p) = c̄·σ(p): the real structure covers conjugation on ℂ*
        let r = real_structure(&cstar_action(a, &p));
        prop_assert!(r.distance(&cstar_action(a.conj().inv(), &real_structure(&p))) < 1e-12);
    }

    #[test]
    fn shifted_charts_stay_quaternionic(gamma in real_shift(), x in prop::collection::vec(-0.4..0.4f64, 8)) {
        let chart = QuaternionicChart::flat(2).shifted(&gamma).unwrap();
        let d = validate_chart(&chart, &[x]).unwrap();
        prop_assert!(d.relation_residual < 1e-10);
        prop_assert!(d.torsion_residual < 1e-12);
        prop_assert!(d.q_residual < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transition_is_invertible(x in point(0.4), xb in point(0.4), l in complex(1.2)) {
        prop_assume!(l.norm() > 0.2);
        let z = &fs().2;
        let p = z.phi_plus(&x, &xb, l).unwrap();
        let q = z.transition(&p).unwrap();
        prop_assert_eq!(q.chart, Chart::Minus);
        prop_assert!(z.transition(&q).unwrap().distance(&p) < 1e-9);
    }

    #[test]
    fn real_structure_exchanges_d_hyperplanes(base in point(0.4), s in prop::collection::vec(complex(1.0), 2)) {
        let (d, _, z) = fs();
        let plus = z.d_hyperplane(Chart::Plus, &base, d).unwrap();
        let conj_base: Vec<C> = base.iter().map(|v| v.conj()).collect();
        let minus = z.d_hyperplane(Chart::Minus, &conj_base, d).unwrap();
        let cov = &plus.basis[0] * s[0] + &plus.basis[1] * s[1];
        prop_assert!(plus.residual(&cov) < 1e-12);
        let image = real_structure(&ChartPoint::new(Chart::Plus, base.clone(), cov));
        prop_assert!(minus.residual(&image.covector) < 1e-8);
        // linear subspace: closed under the ℂ* action
        prop_assert!(minus.residual(&cstar_action(s[0], &image).covector) < 1e-8);
    }
}
