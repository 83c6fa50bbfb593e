use pqreg::tensor::{laprete_bounds, ChevetSaphar};
use pqreg::{
    eps_norm, exp, phi_pq_upper, pi_bounds, r_pq_bounds, tensor_norm_bounds, Exponent, FunctionSpace, Tensor,
    TensorNorm, K_G,
};
use proptest::prelude::*;

const CUTS: usize = 60;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::INF), Just(exp(1.0)), (1.0f64..4.0).prop_map(exp)]
}

fn space(atoms: usize) -> impl Strategy<Value = FunctionSpace> {
    (prop::collection::vec(0.2f64..2.0, atoms), exponent()).prop_map(|(w, r)| FunctionSpace::weighted_lr(w, r).unwrap())
}

fn terms(l: usize, r: usize) -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>)>> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, l), prop::collection::vec(-1.0f64..1.0, r)), 1..4)
}

fn tensor() -> impl Strategy<Value = Tensor> {
    (1..4usize, 1..4usize).prop_flat_map(|(l, r)| {
        (space(l), space(r), terms(l, r)).prop_map(|(x, y, t)| Tensor::new(x, y, t).unwrap())
    })
}

/// Same element, different representation: split the first term and add a cancelling pair.
fn rerepresent(z: &Tensor, shift: &[f64]) -> Tensor {
    let mut t = z.terms().to_vec();
    let (x, y) = t[0].clone();
    t[0] = (x.iter().map(|v| v * 0.25).collect(), y.clone());
    t.push((x.iter().map(|v| v * 0.75).collect(), y));
    let v: Vec<f64> = (0..z.left().atoms()).map(|k| shift[k % shift.len()]).collect();
    let w = t[0].1.clone();
    t.push((v.clone(), w.clone()));
    t.push((v.iter().map(|a| -a).collect(), w));
    Tensor::new(z.left().clone(), z.right().clone(), t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eps_below_r_below_pi(z in tensor(), (p, q) in prop_oneof![Just((2.0, 2.0)), Just((2.0, 1.0)), Just((f64::INFINITY, 1.0))], seed in any::<u64>()) {
        let e = eps_norm(&z, seed).unwrap();
        let r = r_pq_bounds(&z, exp(p), exp(q), seed, 4).unwrap();
        let pi = pi_bounds(&z, seed, CUTS).unwrap();
        let tol = 1e-9 * (1.0 + pi.upper);
        prop_assert!(e.lower <= e.upper + tol && r.lower <= r.upper + tol && pi.lower <= pi.upper + tol);
        prop_assert!(e.lower <= r.upper + tol, "eps {} r {}", e.lower, r.upper);
        prop_assert!(r.lower <= pi.upper + tol, "r {} pi {}", r.lower, pi.upper);
    }

    #[test]
    fn representation_invariance(z in tensor(), shift in prop::collection::vec(-1.0f64..1.0, 3), seed in any::<u64>()) {
        let z2 = rerepresent(&z, &shift);
        for norm in [TensorNorm::Eps, TensorNorm::Pi, TensorNorm::Phi { p: Exponent::TWO, q: Exponent::TWO }] {
            let (a, b) = (tensor_norm_bounds(&z, norm, seed).unwrap(), tensor_norm_bounds(&z2, norm, seed).unwrap());
            let tol = 1e-6 * (1.0 + a.upper.max(b.upper));
            prop_assert!(a.lower <= b.upper + tol && b.lower <= a.upper + tol, "{norm:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn certificates_are_consistent(z in tensor(), p in (1.0f64..4.0).prop_map(exp), seed in any::<u64>()) {
        let all = [
            pi_bounds(&z, seed, CUTS).unwrap(),
            eps_norm(&z, seed).unwrap(),
            laprete_bounds(&z, ChevetSaphar::G, p, seed).unwrap(),
            laprete_bounds(&z, ChevetSaphar::D, p, seed).unwrap(),
            laprete_bounds(&z, ChevetSaphar::W, p, seed).unwrap(),
        ];
        for b in &all {
            if let Some(cert) = &b.lower_certificate {
                let v = cert.value(&z);
                prop_assert!(v <= b.upper + 1e-9 * (1.0 + b.upper), "{}: {v} > {}", b.norm_name(), b.upper);
                prop_assert!((v - b.lower).abs() <= 1e-9 * (1.0 + v.abs()), "{}: {v} vs {}", b.norm_name(), b.lower);
            }
        }
    }

    #[test]
    fn grothendieck_on_sup_normed_spaces((l, r) in (1..4usize, 1..4usize), t in terms(3, 3), seed in any::<u64>()) {
        let cut = |v: &Vec<f64>, n: usize| v[..n].to_vec();
        let terms = t.iter().map(|(x, y)| (cut(x, l), cut(y, r))).collect();
        let z = Tensor::new(FunctionSpace::lr(l, Exponent::INF).unwrap(), FunctionSpace::lr(r, Exponent::INF).unwrap(), terms).unwrap();
        let pi = pi_bounds(&z, seed, CUTS).unwrap();
        let phi = phi_pq_upper(&z, Exponent::TWO, Exponent::TWO).unwrap();
        prop_assert!(pi.upper <= K_G * phi * (1.0 + 1e-9), "pi {} phi {phi}", pi.upper);
    }

    #[test]
    fn norm_one_inclusion_does_not_increase_pi(
        (l, r) in (1..4usize, 1..4usize),
        t in terms(3, 3),
        (a, b) in (exponent(), exponent()),
        seed in any::<u64>(),
    ) {
        let cut = |v: &Vec<f64>, n: usize| v[..n].to_vec();
        let terms: Vec<_> = t.iter().map(|(x, y)| (cut(x, l), cut(y, r))).collect();
        // Probability weights make L_∞ → L_r(μ) a norm-one inclusion.
        let prob = |n: usize, e: Exponent| FunctionSpace::weighted_lr(vec![1.0 / n as f64; n], e).unwrap();
        let small = Tensor::new(prob(l, Exponent::INF), prob(r, Exponent::INF), terms.clone()).unwrap();
        let large = Tensor::new(prob(l, a), prob(r, b), terms).unwrap();
        let (ps, pl) = (pi_bounds(&small, seed, CUTS).unwrap(), pi_bounds(&large, seed, CUTS).unwrap());
        prop_assert!(pl.lower <= ps.upper * (1.0 + 1e-9) + 1e-12, "{} > {}", pl.lower, ps.upper);
    }
}
