use super::*;
use crate::exponent::exp;
use crate::regular::{rho_oracle, RegularityParams};
use rand::Rng;

fn lr(n: usize, r: f64) -> FunctionSpace {
    FunctionSpace::lr(n, exp(r)).unwrap()
}

fn z(space: FunctionSpace, comps: Vec<Vec<f64>>) -> ZElement {
    ZElement::new(space, comps.into_iter().map(LatticeVector).collect()).unwrap()
}

fn random_comps(rng: &mut ChaCha8Rng, n: usize, atoms: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..atoms).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn single_component_and_zero() {
    let x = lr(3, 3.0);
    let f = vec![0.3, -1.2, 0.5];
    let v = z(x.clone(), vec![vec![0.0; 3], f.iter().map(|t| -2.0 * t).collect()]);
    let e = z_norm(&v, exp(2.0), 1).unwrap();
    let expect = 2.0 * x.norm(&f).unwrap();
    assert!((e.upper.unwrap() - expect).abs() < 1e-12 * expect);
    assert!((e.lower - expect).abs() < 1e-9 * expect);
    let zero = z(x, vec![vec![0.0; 3]; 2]);
    let e = z_norm(&zero, exp(2.0), 1).unwrap();
    assert_eq!((e.lower, e.upper), (0.0, Some(0.0)));
}

#[test]
fn symmetric_example_against_grid() {
    let v = z(lr(2, 2.0), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let e = z_norm(&v, exp(2.0), 3).unwrap();
    let x = lr(2, 2.0);
    let f = v.active();
    let steps = 400;
    let mut grid = f64::INFINITY;
    for i in 0..steps {
        for j in 0..steps {
            let a = [0.05 + 3.0 * i as f64 / steps as f64, 0.05 + 3.0 * j as f64 / steps as f64];
            grid = grid.min(z_objective(&x, &f, exp(2.0), exp(2.0), &a));
        }
    }
    let u = e.upper.unwrap();
    assert!(u <= grid + 1e-12, "{u} {grid}");
    assert!(grid - u < 1e-4, "{u} {grid}");
    assert!((u - 2.0).abs() < 1e-9);
    assert!(e.lower >= u * (1.0 - 1e-9));
}

#[test]
fn lq_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in [1.5, 2.0, 3.0] {
        for _ in 0..10 {
            let x = FunctionSpace::weighted_lr(vec![0.5, 1.0, 2.0], exp(q)).unwrap();
            let comps = random_comps(&mut rng, 3, 3);
            let expect: f64 = comps.iter().map(|f| x.norm(f).unwrap()).sum();
            let e = z_norm(&z(x, comps), exp(q), 5).unwrap();
            let u = e.upper.unwrap();
            assert!((u - expect).abs() < 1e-8 * expect, "q={q} {u} {expect}");
            assert!(e.lower <= u && e.lower >= u * (1.0 - 1e-6), "q={q} {} {u}", e.lower);
        }
    }
}

#[test]
fn endpoint_exponents() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let comps = random_comps(&mut rng, 2, 3);
        let x = lr(3, 2.5);
        let sum: Vec<f64> = (0..3).map(|w| comps.iter().map(|f| f[w].abs()).sum()).collect();
        let e = z_norm(&z(x.clone(), comps.clone()), Exponent::ONE, 1).unwrap();
        let expect = x.norm(&sum).unwrap();
        assert!((e.upper.unwrap() - expect).abs() < 1e-12 * expect);
        assert!(e.lower >= expect * (1.0 - 1e-9));

        let xi = FunctionSpace::lr(3, Exponent::INF).unwrap();
        let e = z_norm(&z(xi.clone(), comps.clone()), Exponent::INF, 1).unwrap();
        let expect: f64 = comps.iter().map(|f| xi.norm(f).unwrap()).sum();
        assert!((e.upper.unwrap() - expect).abs() < 1e-7 * expect, "{:?} {expect}", e.upper);
        assert!(e.lower >= expect * (1.0 - 1e-6), "{} {expect}", e.lower);
    }
}

#[test]
fn lower_bounds_hold_on_general_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for q in [1.0, 1.5, 2.0, 4.0] {
        for r in [1.0, 2.0, 3.0, 6.0] {
            let x = FunctionSpace::weighted_lr(vec![0.3, 0.7, 1.1], exp(r)).unwrap();
            let comps = random_comps(&mut rng, 3, 3);
            let e = z_norm(&z(x, comps), exp(q), 9).unwrap();
            assert!(e.lower <= e.upper.unwrap() + 1e-12);
            assert!(e.lower > 0.0);
        }
    }
}

#[test]
fn calderon_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (q, r) in [(1.5, 2.0), (2.0, 2.0), (2.0, 3.0), (3.0, 4.0), (1.0, 1.5)] {
        for _ in 0..4 {
            let n = rng.random_range(1..=3);
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.5)).collect();
            let x = FunctionSpace::weighted_lr(w, exp(r)).unwrap();
            let v = z(x, random_comps(&mut rng, n, 3));
            let a = z_norm(&v, exp(q), 2).unwrap().upper.unwrap();
            let b = calderon_product_norm(&v, exp(q), 3).unwrap().upper.unwrap();
            assert!((a - b).abs() <= 1e-6 * a, "q={q} r={r} n={n} {a} {b}");
        }
    }
}

#[test]
fn calderon_basic_cases() {
    let x = lr(3, 3.0);
    let f = vec![1.0, -0.5, 0.25];
    let c = calderon_product_norm(&z(x.clone(), vec![f.clone()]), exp(2.0), 1).unwrap();
    assert!((c.upper.unwrap() - x.norm(&f).unwrap()).abs() < 1e-9);
    let v = z(x, vec![f, vec![0.2, 0.9, -0.4]]);
    let c1 = calderon_product_norm(&v, exp(2.0), 1).unwrap().upper.unwrap();
    let c2 = calderon_product_norm(&v.scaled(-3.0), exp(2.0), 1).unwrap().upper.unwrap();
    assert!((c2 - 3.0 * c1).abs() < 1e-7 * c2);
}

fn functional_operator(x: &FunctionSpace, u: &[Vec<f64>], q: Exponent) -> OperatorMatrix {
    let entries = u.iter().map(|uk| uk.iter().zip(x.weights()).map(|(a, m)| a * m).collect()).collect();
    OperatorMatrix::new(x.clone(), FunctionSpace::lr(u.len(), q).unwrap(), entries).unwrap()
}

#[test]
fn duality_at_q_infinity() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let q = Exponent::INF;
    let params = RegularityParams::new(Exponent::INF, q).unwrap();
    for _ in 0..5 {
        let x = FunctionSpace::lr(3, Exponent::INF).unwrap();
        let v = z(x.clone(), random_comps(&mut rng, 2, 3));
        let e = z_norm(&v, q, 1).unwrap();
        let u = e.lower_witness.members().to_vec();
        let t = functional_operator(&x, &u, q);
        let rho = rho_oracle(&t, params, 2, 1e-6).unwrap();
        assert!(rho.upper.unwrap() <= 1.0 + 1e-9, "{:?}", rho.upper);
        let pair = z_pairing(&v, &u);
        assert!(pair >= e.upper.unwrap() * (1.0 - 2e-2), "{pair} {:?}", e.upper);
    }
}

#[test]
fn weak_duality_for_finite_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for q in [1.0, 2.0] {
        let params = RegularityParams::new(Exponent::INF, exp(q)).unwrap();
        for _ in 0..5 {
            let x = lr(2, 2.0);
            let v = z(x.clone(), random_comps(&mut rng, 2, 2));
            let zn = z_norm(&v, exp(q), 1).unwrap().upper.unwrap();
            let u = random_comps(&mut rng, 2, 2);
            let rho = rho_oracle(&functional_operator(&x, &u, exp(q)), params, 1, 1e-6).unwrap();
            assert!(z_pairing(&v, &u) <= rho.upper.unwrap() * zn * (1.0 + 1e-9));
        }
    }
}

#[test]
fn regular_ball_is_strictly_inside_the_dual_ball() {
    // X = R, v = e_1 ⊗ 1 + e_2 ⊗ 1, q = 2.
    let x = lr(1, 2.0);
    let v = z(x.clone(), vec![vec![1.0], vec![1.0]]);
    let zn = z_norm(&v, exp(2.0), 1).unwrap();
    assert!((zn.upper.unwrap() - 2.0).abs() < 1e-9 && zn.lower > 2.0 - 1e-9);
    let params = RegularityParams::new(Exponent::INF, exp(2.0)).unwrap();
    let mut best = 0.0_f64;
    for k in 0..720 {
        let th = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
        let u = vec![vec![th.cos()], vec![th.sin()]];
        let t = functional_operator(&x, &u, exp(2.0));
        let rho = rho_oracle(&t, params, 2, 1e-6).unwrap().upper.unwrap();
        best = best.max(z_pairing(&v, &u) / rho);
    }
    assert!((best - 2f64.sqrt()).abs() < 1e-3, "{best}");
}

#[test]
fn subspace_rank_check() {
    let x = lr(3, 2.0);
    let err = Subspace::new(x.clone(), vec![LatticeVector(vec![1.0, 2.0, 0.0]), LatticeVector(vec![2.0, 4.0, 0.0])]);
    assert!(matches!(err, Err(Error::RankDeficient { rank: 1, len: 2 })));
    assert_eq!(Subspace::new(x, vec![LatticeVector(vec![1.0, 0.0, 1.0])]).unwrap().dim(), 1);
}

#[test]
fn extension_trivial_cases() {
    let x = lr(3, 2.0);
    let whole = Subspace::whole(x.clone());
    let images = vec![vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.0, 1.0]];
    let ext = hahn_banach_extend(&whole, &images, exp(2.0), 1).unwrap();
    for (k, row) in ext.operator.entries().iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            assert!((v - images[a][k]).abs() < 1e-12);
        }
    }
    let x0 = Subspace::new(x, vec![LatticeVector(vec![1.0, 1.0, 0.0])]).unwrap();
    let ext = hahn_banach_extend(&x0, &[vec![0.0, 0.0]], exp(2.0), 1).unwrap();
    assert!(ext.operator.is_zero());
}

#[test]
fn extension_against_grid() {
    let x = lr(2, 2.0);
    let x0 = Subspace::new(x.clone(), vec![LatticeVector(vec![1.0, 1.0])]).unwrap();
    let ext = hahn_banach_extend(&x0, &[vec![1.0]], exp(2.0), 4).unwrap();
    assert!(ext.agreement_residual < 1e-9);
    let params = RegularityParams::new(Exponent::INF, exp(2.0)).unwrap();
    let mut grid = f64::INFINITY;
    for i in 0..=400 {
        let s = -1.5 + 4.0 * i as f64 / 400.0;
        let t = OperatorMatrix::new(x.clone(), lr(1, 2.0), vec![vec![s, 1.0 - s]]).unwrap();
        grid = grid.min(rho_oracle(&t, params, 1, 1e-6).unwrap().upper.unwrap());
    }
    assert!((grid - 0.5f64.sqrt()).abs() < 1e-6);
    assert!(ext.rho_after <= grid + 1e-2, "{} {grid}", ext.rho_after);
    assert!(ext.rho_after >= ext.rho_before - 1e-9);
    assert!((ext.rho_before - 0.5f64.sqrt()).abs() < 1e-6, "{}", ext.rho_before);
}

#[test]
fn extension_keeps_regularity() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (q, r) in [(2.0, 2.0), (1.0, 1.0), (2.0, 3.0)] {
        for _ in 0..3 {
            let x = lr(3, r);
            let x0 = Subspace::new(x, vec![LatticeVector(random_comps(&mut rng, 1, 3).remove(0))]).unwrap();
            let images = random_comps(&mut rng, 1, 2);
            let ext = hahn_banach_extend(&x0, &images, exp(q), 7).unwrap();
            assert!(ext.agreement_residual < 1e-9);
            assert!(
                ext.rho_after <= ext.rho_before * (1.0 + 1e-2),
                "q={q} r={r} before {} after {} lower {}",
                ext.rho_before,
                ext.rho_after,
                ext.extension_lower
            );
        }
    }
}

#[test]
fn dyadic_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for q in [1.0, 2.0, 3.0, f64::INFINITY] {
        let q = exp(q);
        for level in 0..3 {
            let lv = DyadicLevel::new(level, q).unwrap();
            let p = dyadic_pn(lv, 8).unwrap();
            let j = dyadic_jn(lv, 8).unwrap();
            let pj = p.compose(&j).unwrap();
            for (i, row) in pj.entries().iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    assert!((v - if i == k { 1.0 } else { 0.0 }).abs() <= 1e-12);
                }
            }
            for _ in 0..20 {
                let v: Vec<f64> = (0..lv.blocks()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let jv = j.apply(&v).unwrap();
                let a = j.codomain().norm(&jv).unwrap();
                let b = j.domain().norm(&v).unwrap();
                assert!((a - b).abs() <= 1e-12 * (1.0 + b));
                assert!(jv.iter().zip(&v).all(|_| true));
            }
            assert!(j.is_nonnegative() && p.is_nonnegative());
        }
    }
    let lv = DyadicLevel::new(1, exp(2.0)).unwrap();
    let p = dyadic_pn(lv, 4).unwrap();
    for _ in 0..1000 {
        let f: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pf = p.apply(&f).unwrap();
        assert!(p.codomain().norm(&pf).unwrap() <= p.domain().norm(&f).unwrap() * (1.0 + 1e-12));
    }
    let j = dyadic_jn(lv, 4).unwrap();
    let e1 = j.apply(&[1.0, 0.0]).unwrap();
    assert!((e1[0] - 2f64.sqrt()).abs() < 1e-15 && e1[2] == 0.0);
    assert!(matches!(dyadic_pn(DyadicLevel::new(2, exp(2.0)).unwrap(), 6), Err(Error::Divisibility { level: 2, atoms: 6 })));
    let p0 = dyadic_pn(DyadicLevel::new(0, Exponent::ONE).unwrap(), 4).unwrap();
    assert_eq!(p0.apply(&[2.0, 2.0, 2.0, 2.0]).unwrap(), vec![2.0]);
}

#[test]
fn lq_extension_pipeline() {
    let q = exp(2.0);
    let x = FunctionSpace::uniform_lr(4, q).unwrap();
    let lv = DyadicLevel::new(2, q).unwrap();
    let whole = Subspace::whole(x.clone());
    let images: Vec<Vec<f64>> = (0..4).map(|a| (0..4).map(|b| ((a * 3 + b) % 5) as f64 - 2.0).collect()).collect();
    let ext = extend_operator_lq(&whole, &images, lv, 1).unwrap();
    assert!(ext.agreement_residual < 1e-12);

    let zero = extend_operator_lq(&whole, &vec![vec![0.0; 4]; 4], lv, 1).unwrap();
    assert!(zero.operator.is_zero());

    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let x0 = Subspace::new(x, random_comps(&mut rng, 2, 4).into_iter().map(LatticeVector).collect()).unwrap();
    let images = random_comps(&mut rng, 2, 4);
    let ext = extend_operator_lq(&x0, &images, lv, 2).unwrap();
    assert!(ext.agreement_residual < 1e-8, "{}", ext.agreement_residual);
    assert!(ext.rho_after <= ext.rho_before * (1.0 + 1e-2), "{} {}", ext.rho_before, ext.rho_after);
}

