use cproj_twistor::polynomial_algebra::{PolyField, Powers, RationalField, Var};
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Small-integer coefficients keep every ring operation exact.
fn poly() -> impl Strategy<Value = PolyField> {
    prop::collection::vec((prop::collection::vec(0u32..2, 2 * N), -3i32..4, -3i32..4), 0..5).prop_map(|terms| {
        PolyField::from_terms(N, terms.into_iter().map(|(e, re, im)| (e, c(re as f64, im as f64)))).unwrap()
    })
}

fn var() -> impl Strategy<Value = Var> {
    (0..N, any::<bool>()).prop_map(|(i, bar)| if bar { Var::Zb(i) } else { Var::Z(i) })
}

fn point() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-0.8f64..0.8, -0.8f64..0.8), N).prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
}

fn conj(z: &[Complex64]) -> Vec<Complex64> {
    z.iter().map(|v| v.conj()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(p in poly(), q in poly(), r in poly()) {
        prop_assert_eq!(p.add(&q), q.add(&p));
        prop_assert_eq!(p.add(&q).add(&r), p.add(&q.add(&r)));
        let pq = p.checked_mul(&q).unwrap();
        prop_assert_eq!(&pq, &q.checked_mul(&p).unwrap());
        prop_assert_eq!(pq.checked_mul(&r).unwrap(), p.checked_mul(&q.checked_mul(&r).unwrap()).unwrap());
        prop_assert_eq!(
            p.checked_mul(&q.add(&r)).unwrap(),
            pq.add(&p.checked_mul(&r).unwrap())
        );
        prop_assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn leibniz_rule(p in poly(), q in poly(), v in var()) {
        let lhs = p.checked_mul(&q).unwrap().partial(v);
        let rhs = p.partial(v).checked_mul(&q).unwrap().add(&p.checked_mul(&q.partial(v)).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn partials_commute(p in poly(), u in var(), v in var()) {
        prop_assert_eq!(p.partial(u).partial(v), p.partial(v).partial(u));
    }

    #[test]
    fn conjugation_is_an_involutive_homomorphism(p in poly(), q in poly()) {
        prop_assert_eq!(p.formal_conjugate().formal_conjugate(), p.clone());
        prop_assert_eq!(
            p.checked_mul(&q).unwrap().formal_conjugate(),
            p.formal_conjugate().checked_mul(&q.formal_conjugate()).unwrap()
        );
        prop_assert_eq!(p.add(&q).formal_conjugate(), p.formal_conjugate().add(&q.formal_conjugate()));
    }

    #[test]
    fn conjugate_evaluates_to_conjugate(p in poly(), z in point()) {
        let zb = conj(&z);
        let lhs = p.formal_conjugate().eval(&z, &zb);
        let rhs = p.eval(&z, &zb).conj();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn jet_matches_partials(p in poly(), z in point(), w in point()) {
        let pw = Powers::new(&z, &w, &p.max_exponents());
        let jet = p.eval_jet(&pw, 2);
        prop_assert!((jet.value - p.eval(&z, &w)).norm() < 1e-12);
        for i in 0..N {
            for (slot, v) in [(i, Var::Z(i)), (N + i, Var::Zb(i))] {
                prop_assert!((jet.grad[slot] - p.partial(v).eval(&z, &w)).norm() < 1e-11);
            }
        }
        let d2 = p.partial(Var::Z(0)).partial(Var::Zb(1)).eval(&z, &w);
        prop_assert!((jet.hess_at(0, N + 1) - d2).norm() < 1e-10);
    }

    #[test]
    fn rational_quotient_rule(p in poly(), q in poly(), z in point(), v in var()) {
        let den = q.add(&PolyField::constant(N, c(40.0, 0.0)));
        let f = RationalField::new(p.clone(), den.clone()).unwrap();
        let zb = conj(&z);
        let val = f.eval(&z, &zb).unwrap();
        prop_assert!((val - p.eval(&z, &zb) / den.eval(&z, &zb)).norm() < 1e-12);
        // f·den = p, differentiated
        let df = f.partial(v).unwrap().eval(&z, &zb).unwrap();
        let lhs = df * den.eval(&z, &zb) + val * den.partial(v).eval(&z, &zb);
        prop_assert!((lhs - p.partial(v).eval(&z, &zb)).norm() < 1e-9);
    }

    #[test]
    fn rational_field_operations(p in poly(), q in poly(), z in point()) {
        let one = PolyField::one(N);
        let f = RationalField::new(p.clone(), q.add(&one.scale(c(40.0, 0.0)))).unwrap();
        let g = RationalField::new(q.clone(), p.add(&one.scale(c(0.0, 40.0)))).unwrap();
        let zb = conj(&z);
        let (fv, gv) = (f.eval(&z, &zb).unwrap(), g.eval(&z, &zb).unwrap());
        prop_assert!((f.add(&g).unwrap().eval(&z, &zb).unwrap() - (fv + gv)).norm() < 1e-12);
        prop_assert!((f.mul(&g).unwrap().eval(&z, &zb).unwrap() - fv * gv).norm() < 1e-12);
        prop_assert!((f.sub(&f).unwrap().eval(&z, &zb).unwrap()).norm() < 1e-12);
    }
}
