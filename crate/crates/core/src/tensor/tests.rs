use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::exponent::exp;
use crate::regular::K_G;

fn lr(n: usize, r: f64) -> FunctionSpace {
    FunctionSpace::lr(n, exp(r)).unwrap()
}

fn random_tensor(rng: &mut ChaCha8Rng, left: &FunctionSpace, right: &FunctionSpace, rank: usize) -> Tensor {
    let terms = (0..rank)
        .map(|_| {
            let x = (0..left.atoms()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = (0..right.atoms()).map(|_| rng.random_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect();
    Tensor::new(left.clone(), right.clone(), terms).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn canonical_matrix_examples() {
    let z = Tensor::new(lr(2, 2.0), lr(2, 2.0), vec![(vec![1.0, 0.0], vec![0.0, 1.0])]).unwrap();
    assert_eq!(canonical_matrix(&z), vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    let z = Tensor::new(lr(2, 2.0), lr(2, 2.0), vec![(vec![1.0, 2.0], vec![3.0, 1.0]), (vec![-1.0, -2.0], vec![3.0, 1.0])])
        .unwrap();
    assert!(canonical_matrix(&z).iter().flatten().all(|v| *v == 0.0));
    let a = Tensor::new(lr(2, 2.0), lr(2, 2.0), vec![(vec![1.0, 1.0], vec![1.0, 0.0])]).unwrap();
    let b = Tensor::new(lr(2, 2.0), lr(2, 2.0), vec![(vec![1.0, 0.0], vec![1.0, 0.0]), (vec![0.0, 1.0], vec![1.0, 0.0])])
        .unwrap();
    assert_eq!(canonical_matrix(&a), canonical_matrix(&b));
}

#[test]
fn eps_elementary_and_zero() {
    for (r, s) in [(1.0, 2.0), (2.0, 3.0), (f64::INFINITY, 1.0)] {
        let (x, y) = (vec![0.3, -1.2, 0.5], vec![2.0, 0.1]);
        let (l, rr) = (lr(3, r), lr(2, s));
        let z = Tensor::new(l.clone(), rr.clone(), vec![(x.clone(), y.clone())]).unwrap();
        let b = eps_norm(&z, 1).unwrap();
        let want = l.norm(&x).unwrap() * rr.norm(&y).unwrap();
        assert!(close(b.lower, want, 1e-6) && close(b.upper, want, 1e-6), "{b:?} {want}");
    }
    let z = Tensor::new(lr(2, 2.0), lr(2, 2.0), vec![(vec![0.0, 0.0], vec![1.0, 1.0])]).unwrap();
    let b = eps_norm(&z, 1).unwrap();
    assert_eq!((b.lower, b.upper), (0.0, 0.0));
}

fn sign_enumeration_eps(z: &[Vec<f64>]) -> f64 {
    let (n, m) = (z.len(), z[0].len());
    let mut best = 0.0_f64;
    for s in 0..1usize << n {
        for t in 0..1usize << m {
            let sg = |mask: usize, i: usize| if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
            let v: f64 = (0..n).flat_map(|a| (0..m).map(move |b| (a, b))).map(|(a, b)| sg(s, a) * z[a][b] * sg(t, b)).sum();
            best = best.max(v);
        }
    }
    best
}

#[test]
fn eps_on_l1_matches_sign_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = Tensor::from_matrix(lr(2, 1.0), lr(2, 1.0), &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let b = eps_norm(&z, 0).unwrap();
    let want = sign_enumeration_eps(&canonical_matrix(&z));
    assert!(close(b.lower, want, 1e-9) && close(b.upper, want, 1e-9));
    for _ in 0..10 {
        let z = random_tensor(&mut rng, &lr(3, 1.0), &lr(3, 1.0), 3);
        let b = eps_norm(&z, 0).unwrap();
        let want = sign_enumeration_eps(&canonical_matrix(&z));
        assert!(close(b.lower, want, 1e-9) && close(b.upper, want, 1e-9), "{b:?} {want}");
    }
}

#[test]
fn pi_matches_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let z = random_tensor(&mut rng, &lr(3, 1.0), &lr(3, 1.0), 3);
        let want: f64 = canonical_matrix(&z).iter().flatten().map(|v| v.abs()).sum();
        let b = pi_bounds(&z, 1, DEFAULT_CUT_ITERS).unwrap();
        assert!(close(b.lower, want, 1e-7) && close(b.upper, want, 1e-7), "l1: {b:?} {want}");

        let z = random_tensor(&mut rng, &lr(3, 2.0), &lr(3, 2.0), 3);
        let zm = canonical_matrix(&z);
        let want: f64 = DMatrix::from_fn(3, 3, |a, b| zm[a][b]).singular_values().iter().sum();
        let b = pi_bounds(&z, 1, DEFAULT_CUT_ITERS).unwrap();
        assert!(b.lower <= want * (1.0 + 1e-9) && b.upper >= want * (1.0 - 1e-9), "l2: {b:?} {want}");
        assert!(close(b.upper, want, 1e-3), "l2 upper: {b:?} {want}");
        assert!(close(b.lower, want, 2e-2), "l2 lower: {b:?} {want}");

        let z = random_tensor(&mut rng, &lr(3, f64::INFINITY), &lr(2, 1.0), 2);
        let zm = canonical_matrix(&z);
        let want: f64 = (0..2).map(|b| (0..3).map(|a| zm[a][b].abs()).fold(0.0, f64::max)).sum();
        let b = pi_bounds(&z, 1, DEFAULT_CUT_ITERS).unwrap();
        assert!(close(b.lower, want, 1e-6) && close(b.upper, want, 1e-6), "linf-l1: {b:?} {want}");
    }
}

#[test]
fn pi_elementary_and_certificates() {
    let z = Tensor::new(lr(3, 3.0), lr(2, 1.5), vec![(vec![1.0, -2.0, 0.5], vec![0.7, 0.2])]).unwrap();
    let want = z.left().norm(&z.terms()[0].0).unwrap() * z.right().norm(&z.terms()[0].1).unwrap();
    let b = pi_bounds(&z, 3, DEFAULT_CUT_ITERS).unwrap();
    assert!(close(b.lower, want, 1e-6) && close(b.upper, want, 1e-9), "{b:?} {want}");
    let (lo, up) = b.reevaluate(&z).unwrap();
    assert!(close(lo, b.lower, 1e-12) && close(up, b.upper, 1e-12));
}

#[test]
fn grothendieck_upper_on_sup_normed_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let z = random_tensor(&mut rng, &lr(2, f64::INFINITY), &lr(2, f64::INFINITY), 2);
        let pi = pi_bounds(&z, 9, DEFAULT_CUT_ITERS).unwrap();
        let phi = phi_pq_upper(&z, exp(2.0), exp(2.0)).unwrap();
        assert!(pi.upper <= K_G * phi * (1.0 + 1e-9), "{} vs {}", pi.upper, K_G * phi);
        assert!(pi.lower <= pi.upper + pi.tolerance);
    }
}

#[test]
fn chevet_saphar_orderings() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z = Tensor::new(lr(2, 2.0), lr(3, 1.0), vec![(vec![1.0, 2.0], vec![0.5, -1.0, 2.0])]).unwrap();
    let want = z.left().norm(&z.terms()[0].0).unwrap() * z.right().norm(&z.terms()[0].1).unwrap();
    for w in [ChevetSaphar::G, ChevetSaphar::D, ChevetSaphar::W] {
        let b = laprete_bounds(&z, w, exp(2.0), 1).unwrap();
        assert!(close(b.upper, want, 1e-6) && close(b.lower, want, 1e-6), "{w:?} {b:?}");
    }
    for _ in 0..3 {
        let z = random_tensor(&mut rng, &lr(2, 2.0), &lr(2, 2.0), 2);
        let g = laprete_bounds(&z, ChevetSaphar::G, exp(2.0), 2).unwrap();
        let d = laprete_bounds(&z, ChevetSaphar::D, exp(2.0), 2).unwrap();
        let w = laprete_bounds(&z, ChevetSaphar::W, exp(2.0), 2).unwrap();
        assert!(w.upper <= g.upper * (1.0 + 1e-9) && w.upper <= d.upper * (1.0 + 1e-9), "{w:?} {g:?} {d:?}");
        assert!(g.lower <= g.upper + g.tolerance);
    }
}

#[test]
fn lattice_norms_squeeze_elementary_tensors() {
    let z = Tensor::new(lr(2, 3.0), lr(2, 1.5), vec![(vec![1.0, -0.5], vec![0.25, 2.0])]).unwrap();
    let want = z.left().norm(&z.terms()[0].0).unwrap() * z.right().norm(&z.terms()[0].1).unwrap();
    let (p, q) = (exp(3.0), exp(2.0));
    let r = r_pq_bounds(&z, p, q, 1, DEFAULT_BLOCKS).unwrap();
    assert!(close(r.lower, want, 1e-6) && close(r.upper, want, 1e-9), "{r:?}");
    for w in [ConvexConcave::H, ConvexConcave::K] {
        let b = hk_pq_bounds(&z, w, p, q, 1).unwrap();
        assert!(close(b.lower, want, 1e-6) && close(b.upper, want, 1e-9), "{w:?} {b:?}");
    }
    assert!(r_pq_bounds(&z, q, p, 1, 2).is_err());
}

#[test]
fn certified_orderings_on_random_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..4 {
        let (l, r) = (lr(2, [1.0, 2.0, 4.0, f64::INFINITY][k]), lr(3, [2.0, 1.0, f64::INFINITY, 3.0][k]));
        let z = random_tensor(&mut rng, &l, &r, 2);
        let eps = eps_norm(&z, 1).unwrap();
        let pi = pi_bounds(&z, 1, DEFAULT_CUT_ITERS).unwrap();
        for b in [
            r_pq_bounds(&z, exp(2.0), exp(1.0), 1, DEFAULT_BLOCKS).unwrap(),
            hk_pq_bounds(&z, ConvexConcave::H, exp(2.0), exp(1.0), 1).unwrap(),
            hk_pq_bounds(&z, ConvexConcave::K, exp(2.0), exp(1.0), 1).unwrap(),
        ] {
            assert!(eps.lower <= b.upper + b.tolerance, "{eps:?} {b:?}");
            assert!(b.lower <= pi.upper + pi.tolerance, "{b:?} {pi:?}");
            assert!(b.lower <= b.upper + b.tolerance);
            let (lo, up) = b.reevaluate(&z).unwrap();
            assert!(close(lo, b.lower, 1e-9) && close(up, b.upper, 1e-9), "{b:?} {lo} {up}");
        }
    }
}

#[test]
fn quasi_triangle_through_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (p, q, lx, ry) in [(2.0, 2.0, 2.0, 2.0), (4.0, 2.0, 3.0, 2.0), (2.0, 1.0, 1.0, 4.0)] {
    let (p, q) = (exp(p), exp(q));
    let (l, r) = (lr(2, lx), lr(3, ry));
    let t = 1.0 / (q.recip() + p.conjugate().unwrap().recip());
        let z1 = random_tensor(&mut rng, &l, &r, 2);
        let z2 = random_tensor(&mut rng, &l, &r, 2);
        let scale = |z: &Tensor| {
            let phi = phi_pq_of_terms(z, p, q).unwrap();
            let xs: Vec<Vec<f64>> = z.terms().iter().map(|t| t.0.clone()).collect();
            let nx = family::value(z.left(), &xs, Mixed::tuple(q));
            let c = phi.powf(t / q.value()) / nx;
            let terms = z.terms().iter().map(|(x, y)| (x.iter().map(|v| v * c).collect(), y.iter().map(|v| v / c).collect()));
            (Tensor::new(z.left().clone(), z.right().clone(), terms.collect()).unwrap(), phi)
        };
        let ((a, f1), (b, f2)) = (scale(&z1), scale(&z2));
        let v = phi_pq_of_terms(&a.concat(&b).unwrap(), p, q).unwrap();
        assert!(v <= 2f64.powf(1.0 / t - 1.0) * (f1 + f2) * (1.0 + 1e-9), "{v} {f1} {f2}");
    }
}

#[test]
fn trace_duality_examples() {
    let zero = OperatorMatrix::zero(lr(2, 2.0), lr(2, 2.0));
    let r = trace_duality_check(&zero, exp(2.0), exp(2.0), 4, 1).unwrap();
    assert_eq!((r.rho_est, r.dual_sup, r.gap), (0.0, 0.0, 0.0));
    let id = OperatorMatrix::identity(lr(2, 2.0));
    let r = trace_duality_check(&id, exp(2.0), exp(2.0), 4, 1).unwrap();
    assert!(close(r.rho_est, 1.0, 1e-6) && close(r.dual_sup, 1.0, 1e-6), "{r:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..2 {
        let e = (0..2).map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let t = OperatorMatrix::new(lr(2, 2.0), lr(2, 2.0), e).unwrap();
        let r = trace_duality_check(&t, exp(2.0), exp(2.0), 4, 3).unwrap();
        assert!(r.gap <= 2e-2, "{r:?}");
    }
    assert!(trace_duality_check(&OperatorMatrix::identity(lr(4, 2.0)), exp(2.0), exp(2.0), 4, 1).is_err());
}

#[test]
fn bounds_depend_only_on_the_element() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z = random_tensor(&mut rng, &lr(2, 1.0), &lr(2, 3.0), 2);
    let alt = Tensor::from_matrix(z.left().clone(), z.right().clone(), &canonical_matrix(&z)).unwrap();
    let (a, b) = (pi_bounds(&z, 1, 40).unwrap(), pi_bounds(&alt, 1, 40).unwrap());
    assert!(close(a.upper, b.upper, 1e-4) && close(a.lower, b.lower, 1e-4), "{a:?} {b:?}");
}
