use pqreg::{dual_witness, exp, holder_check, p_sum, Exponent, FunctionSpace, VectorTuple};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::INF), (1.0f64..6.0).prop_map(exp)]
}

fn tuple() -> impl Strategy<Value = VectorTuple> {
    (1..5usize, 1..5usize).prop_flat_map(|(atoms, n)| {
        (
            prop::collection::vec(0.2f64..2.0, atoms),
            exponent(),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, atoms), n),
        )
            .prop_map(|(w, r, m)| VectorTuple::new(FunctionSpace::weighted_lr(w, r).unwrap(), m).unwrap())
    })
}

fn same_shape(t: &VectorTuple) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, t.space().atoms()), t.len())
}

fn holder_triple() -> impl Strategy<Value = (Exponent, Exponent, Exponent)> {
    prop_oneof![
        Just((exp(1.0), exp(2.0), exp(2.0))),
        Just((exp(1.0), exp(1.0), Exponent::INF)),
        Just((exp(2.0), exp(4.0), exp(4.0))),
        (1.2f64..6.0).prop_map(|p| (exp(1.0), exp(p), exp(p).conjugate().unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn p_sums_decrease_in_p(t in tuple(), a in 1.0f64..5.0, b in 0.0f64..5.0) {
        let (small, large) = (p_sum(&t, exp(a)), p_sum(&t, exp(a + b)));
        for (s, l) in small.iter().zip(large.iter()) {
            prop_assert!(*l <= s * (1.0 + 1e-12) + 1e-300);
        }
        let inf = p_sum(&t, Exponent::INF);
        for (s, l) in small.iter().zip(inf.iter()) {
            prop_assert!(*l <= s * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn p_sums_are_homogeneous(t in tuple(), p in exponent(), c in -4.0f64..4.0) {
        let (a, b) = (p_sum(&t.scaled(c), p), p_sum(&t, p));
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - c.abs() * y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn holder_has_nonnegative_slack(
        (t, other) in tuple().prop_flat_map(|t| { let s = same_shape(&t); (Just(t), s) }),
        (r, p, s) in holder_triple(),
    ) {
        let psi = VectorTuple::new(t.space().clone(), other).unwrap();
        let h = holder_check(t.space(), &t, &psi, r, p, s).unwrap();
        prop_assert!(h.slack >= -1e-9 * h.rhs, "{h:?}");
    }

    #[test]
    fn dual_witness_attains_the_p_sum(t in tuple(), (r, p, s) in holder_triple()) {
        let x = t.space().clone();
        let w = dual_witness(&x, &t, p, r, s).unwrap();
        let norm = x.norm(&p_sum(&t, p)).unwrap();
        let h = holder_check(&x, &t, &w, r, p, s).unwrap();
        prop_assert!((h.lhs - norm).abs() <= 1e-9 * norm.max(1e-300), "{} vs {norm}", h.lhs);
        prop_assert!(x.dual().unwrap().norm(&p_sum(&w, s)).unwrap() <= 1.0 + 1e-9);
    }
}
