use pqreg::extension::z_pairing;
use pqreg::{
    calderon_product_norm, dyadic_jn, dyadic_pn, exp, hahn_banach_extend, rho_oracle, z_norm, DyadicLevel, Exponent,
    FunctionSpace, LatticeVector, OperatorMatrix, RegularityParams, ZElement,
};
use proptest::prelude::*;

fn comps(n: usize, atoms: usize) -> impl Strategy<Value = Vec<LatticeVector>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, atoms).prop_map(LatticeVector), n)
}

fn element(q: f64) -> impl Strategy<Value = ZElement> {
    (1..4usize, 2..4usize).prop_flat_map(move |(n, atoms)| {
        (prop::collection::vec(0.25f64..2.0, atoms), prop_oneof![Just(q), Just(q + 1.0), Just(4.0f64.max(q))], comps(n, atoms))
            .prop_map(|(w, r, c)| ZElement::new(FunctionSpace::weighted_lr(w, exp(r)).unwrap(), c).unwrap())
    })
}

fn functional_operator(x: &FunctionSpace, u: &[Vec<f64>], q: Exponent) -> OperatorMatrix {
    let entries = u.iter().map(|uk| uk.iter().zip(x.weights()).map(|(a, m)| a * m).collect()).collect();
    OperatorMatrix::new(x.clone(), FunctionSpace::lr(u.len(), q).unwrap(), entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn z_interval_is_witnessed(q in prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0)], seed in any::<u64>(), v in element(2.0)) {
        let e = z_norm(&v, exp(q), seed).unwrap();
        prop_assert!(e.lower <= e.upper_or_inf() * (1.0 + 1e-9), "{e:?}");
        let pair = z_pairing(&v, e.lower_witness.members());
        prop_assert!((pair - e.lower).abs() <= 1e-9 * (1.0 + e.lower), "{pair} vs {}", e.lower);
    }

    #[test]
    fn z_norm_equals_calderon(q in prop_oneof![Just(1.0), Just(2.0), Just(3.0)], v in element(3.0), seed in any::<u64>()) {
        let a = z_norm(&v, exp(q), seed).unwrap().upper_or_inf();
        let b = calderon_product_norm(&v, exp(q), seed).unwrap().upper_or_inf();
        prop_assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn z_duality_at_q_infinity(c in comps(2, 3), seed in any::<u64>()) {
        let x = FunctionSpace::lr(3, Exponent::INF).unwrap();
        let v = ZElement::new(x.clone(), c).unwrap();
        prop_assume!(v.components().iter().any(|f| f.iter().any(|a| a.abs() > 1e-3)));
        let e = z_norm(&v, Exponent::INF, seed).unwrap();
        let u = e.lower_witness.members().to_vec();
        let params = RegularityParams::new(Exponent::INF, Exponent::INF).unwrap();
        let rho = rho_oracle(&functional_operator(&x, &u, Exponent::INF), params, 2, 1e-6).unwrap();
        prop_assert!(rho.upper_or_inf() <= 1.0 + 1e-9);
        prop_assert!(z_pairing(&v, &u) >= e.upper_or_inf() * (1.0 - 2e-2));
    }

    #[test]
    fn extensions_agree_and_do_not_shrink(
        (b, img) in (prop::collection::vec(-1.0f64..1.0, 3), prop::collection::vec(-1.0f64..1.0, 2)),
        (r, q) in prop_oneof![Just((2.0, 2.0)), Just((3.0, 2.0)), Just((1.0, 1.0)), Just((f64::INFINITY, 2.0))],
        seed in any::<u64>(),
    ) {
        prop_assume!(b.iter().any(|v| v.abs() > 1e-2));
        let x = FunctionSpace::lr(3, exp(r)).unwrap();
        let x0 = pqreg::Subspace::new(x, vec![LatticeVector(b)]).unwrap();
        let ext = hahn_banach_extend(&x0, &[img], exp(q), seed).unwrap();
        prop_assert!(ext.agreement_residual <= 1e-8);
        prop_assert!(ext.rho_after >= ext.rho_before * (1.0 - 1e-9));
        prop_assert!(ext.extension_lower <= ext.rho_after * (1.0 + 1e-9));
    }

    #[test]
    fn dyadic_maps(level in 0u32..4, q in prop_oneof![Just(1.0), Just(2.0), Just(3.5), Just(f64::INFINITY)], f in prop::collection::vec(-1.0f64..1.0, 16)) {
        let lv = DyadicLevel::new(level, exp(q)).unwrap();
        let (p, j) = (dyadic_pn(lv, 16).unwrap(), dyadic_jn(lv, 16).unwrap());
        let pf = p.codomain().norm(&p.apply(&f).unwrap()).unwrap();
        prop_assert!(pf <= p.domain().norm(&f).unwrap() * (1.0 + 1e-12));
        let v = &f[..lv.blocks()];
        let jv = j.codomain().norm(&j.apply(v).unwrap()).unwrap();
        let nv = j.domain().norm(v).unwrap();
        prop_assert!((jv - nv).abs() <= 1e-12 * (1.0 + nv));
        let back = p.apply(&j.apply(v).unwrap()).unwrap();
        for (a, b) in back.iter().zip(v) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
