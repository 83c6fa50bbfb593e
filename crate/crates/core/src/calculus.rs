//! Pointwise calculus on tuples and matrices of lattice vectors.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exponent::{check_holder_triple, Exponent};
use crate::family::{self, Mixed};
use crate::scalar::{lp, mixed};
use crate::space::{FunctionSpace, LatticeVector};

/// A finite family x_1, …, x_n in one space.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTuple {
    space: FunctionSpace,
    members: Vec<Vec<f64>>,
}

impl VectorTuple {
    pub fn new(space: FunctionSpace, members: Vec<Vec<f64>>) -> Result<Self> {
        for m in &members {
            space.check(m)?;
        }
        Ok(VectorTuple { space, members })
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }
    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn into_members(self) -> Vec<Vec<f64>> {
        self.members
    }

    pub fn scaled(&self, c: f64) -> VectorTuple {
        let mut members = self.members.clone();
        family::scale(&mut members, c);
        VectorTuple { space: self.space.clone(), members }
    }
}

impl Serialize for VectorTuple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(s)
    }
}

/// An n × m matrix of lattice vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMatrix {
    space: FunctionSpace,
    rows: usize,
    cols: usize,
    members: Vec<Vec<f64>>,
}

impl VectorMatrix {
    pub fn new(space: FunctionSpace, rows: usize, cols: usize, members: Vec<Vec<f64>>) -> Result<Self> {
        if members.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: members.len() });
        }
        for m in &members {
            space.check(m)?;
        }
        Ok(VectorMatrix { space, rows, cols, members })
    }
    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.members[i * self.cols + j]
    }
}

impl Serialize for VectorMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[Vec<f64>]> = self.members.chunks(self.cols.max(1)).collect();
        rows.serialize(s)
    }
}

/// Coordinatewise (Σ_i |x_i|^p)^{1/p}; the lattice supremum of |x_i| at p = ∞.
pub fn p_sum(t: &VectorTuple, p: Exponent) -> LatticeVector {
    let n = t.space.atoms();
    LatticeVector((0..n).map(|w| lp(&t.members.iter().map(|m| m[w]).collect::<Vec<_>>(), p)).collect())
}

/// ‖(Σ_i |x_i|^p)^{1/p}‖.
pub fn psum_norm(t: &VectorTuple, p: Exponent) -> f64 {
    t.space.norm_of(&p_sum(t, p))
}

/// ‖(Σ_i (Σ_j |x_ij|^inner)^{outer/inner})^{1/outer}‖.
pub fn mixed_matrix_norm(m: &VectorMatrix, outer: Exponent, inner: Exponent) -> f64 {
    family::value(&m.space, &m.members, Mixed::Lattice { outer, inner, cols: m.cols })
}

/// Member-wise coordinate products; the result lives in L_1 of the same measure.
pub fn pointwise_product(phi: &VectorTuple, psi: &VectorTuple) -> Result<VectorTuple> {
    if phi.len() != psi.len() {
        return Err(Error::DimensionMismatch { expected: phi.len(), got: psi.len() });
    }
    if phi.space.atoms() != psi.space.atoms() {
        return Err(Error::DimensionMismatch { expected: phi.space.atoms(), got: psi.space.atoms() });
    }
    let space = FunctionSpace::weighted_lr(phi.space.weights().to_vec(), Exponent::ONE)?;
    let members = phi
        .members
        .iter()
        .zip(&psi.members)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
        .collect();
    Ok(VectorTuple { space, members })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// ∫ (Σ|φ_i ψ_i|^r)^{1/r} dμ against ‖(Σ|φ_i|^p)^{1/p}‖_X ‖(Σ|ψ_i|^s)^{1/s}‖_{X'}.
pub fn holder_check(
    x: &FunctionSpace,
    phi: &VectorTuple,
    psi: &VectorTuple,
    r: Exponent,
    p: Exponent,
    s: Exponent,
) -> Result<HolderReport> {
    check_holder_triple(r, p, s)?;
    r.require_banach("r")?;
    let prod = pointwise_product(phi, psi)?;
    let lhs = if prod.is_empty() { 0.0 } else { psum_norm(&prod, r) };
    let phi_n = if phi.is_empty() { 0.0 } else { x.norm_of(&p_sum(phi, p)) };
    let psi_n = if psi.is_empty() { 0.0 } else { x.dual()?.norm_of(&p_sum(psi, s)) };
    let rhs = phi_n * psi_n;
    Ok(HolderReport { lhs, rhs, slack: rhs - lhs })
}

/// The dual family x'_i = |x_i|^{(p-r)/r} x' / (Σ|x_i|^p)^{1/s} for a norming x' of the p-sum.
pub fn dual_witness(x: &FunctionSpace, t: &VectorTuple, p: Exponent, r: Exponent, s: Exponent) -> Result<VectorTuple> {
    check_holder_triple(r, p, s)?;
    r.require_banach("r")?;
    if r > p || r > s {
        return Err(Error::ExponentRelation("need r <= p and r <= s".into()));
    }
    let n = x.atoms();
    let psum = p_sum(t, p);
    let xp = x.norming_of(&psum)?;
    let dual = x.dual()?;
    let mut members = vec![vec![0.0; n]; t.len()];
    for w in 0..n {
        if psum[w] == 0.0 {
            continue;
        }
        let c = xp[w].abs();
        match (p, s) {
            (Exponent::Infinity, _) => {
                let mut best = 0;
                for i in 0..t.len() {
                    if t.members[i][w].abs() > t.members[best][w].abs() {
                        best = i;
                    }
                }
                members[best][w] = c;
            }
            (Exponent::Finite(pv), Exponent::Infinity) => {
                let _ = pv;
                for m in members.iter_mut() {
                    m[w] = c;
                }
            }
            (Exponent::Finite(pv), Exponent::Finite(sv)) => {
                let rv = r.value();
                let denom = psum[w].powf(pv / sv);
                for (i, m) in members.iter_mut().enumerate() {
                    let a = t.members[i][w].abs();
                    if a > 0.0 {
                        m[w] = a.powf((pv - rv) / rv) * c / denom;
                    }
                }
            }
        }
    }
    VectorTuple::new(dual, members)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRepresentation {
    pub exact: LatticeVector,
    pub grid_sup: LatticeVector,
    pub gap: f64,
}

fn sphere_grid(n: usize, p: Exponent, grid_size: usize) -> Vec<Vec<f64>> {
    let pc = p.conjugate().unwrap_or(Exponent::INF);
    let normalize = |v: Vec<f64>| -> Option<Vec<f64>> {
        let m = lp(&v, pc);
        (m > 0.0).then(|| v.into_iter().map(|x| x / m).collect())
    };
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    if p.approx_eq(Exponent::ONE) && n <= 20 {
        return (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect();
    }
    if p.is_infinite() {
        let mut out = vec![];
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                out.push(e);
            }
        }
        return out;
    }
    let k = grid_size.max(4);
    if n == 2 {
        return (0..k)
            .filter_map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                normalize(vec![th.cos(), th.sin()])
            })
            .collect();
    }
    let per_axis = ((k as f64).powf(1.0 / (n as f64 - 1.0)).ceil() as usize).max(3);
    let total = per_axis.saturating_pow(n as u32).min(2_000_000);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let v: Vec<f64> = idx.iter().map(|i| -1.0 + 2.0 * *i as f64 / (per_axis - 1) as f64).collect();
        if let Some(v) = normalize(v) {
            out.push(v);
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < per_axis {
                break;
            }
            *d = 0;
        }
    }
    out
}

/// Compares the p-sum with the pointwise maximum of Σ a_i x_i over a grid of the ℓ_{p'} sphere.
pub fn sup_representation_check(t: &VectorTuple, p: Exponent, grid_size: usize) -> Result<SupRepresentation> {
    p.require_banach("p")?;
    let exact = p_sum(t, p);
    let atoms = t.space.atoms();
    let grid = sphere_grid(t.len(), p, grid_size);
    let mut sup = vec![0.0_f64; atoms];
    for w in 0..atoms {
        let v: Vec<f64> = t.members.iter().map(|m| m[w]).collect();
        sup[w] = grid
            .iter()
            .map(|a| a.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>())
            .fold(if t.is_empty() { 0.0 } else { f64::NEG_INFINITY }, f64::max);
    }
    let gap = exact.iter().zip(&sup).map(|(e, s)| (e - s).max(0.0)).fold(0.0, f64::max);
    Ok(SupRepresentation { exact, grid_sup: LatticeVector(sup), gap })
}

/// ∫ (Σ_i |x_i|^r)^{1/r}: the L_1-valued r-sum norm used by the bilinear form.
pub(crate) fn l1_rsum(weights: &[f64], fam: &[Vec<f64>], r: Exponent) -> f64 {
    (0..weights.len())
        .map(|w| weights[w] * mixed(&fam.iter().map(|m| m[w]).collect::<Vec<_>>(), 1, r, r))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::exp;

    fn tup(sp: &FunctionSpace, m: Vec<Vec<f64>>) -> VectorTuple {
        VectorTuple::new(sp.clone(), m).unwrap()
    }

    #[test]
    fn p_sum_examples() {
        let sp = FunctionSpace::lr(2, exp(1.0)).unwrap();
        assert_eq!(p_sum(&tup(&sp, vec![vec![3.0, 0.0], vec![4.0, 0.0]]), exp(2.0)).0, vec![5.0, 0.0]);
        assert_eq!(p_sum(&tup(&sp, vec![vec![1.0, -2.0], vec![0.0, 3.0]]), Exponent::INF).0, vec![1.0, 3.0]);
        let t = tup(&sp, vec![vec![1.0, 1.0]; 5]);
        let v = p_sum(&t, exp(3.0));
        assert!((v[0] - 5f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(p_sum(&tup(&sp, vec![]), exp(2.0)).0, vec![0.0, 0.0]);
    }

    #[test]
    fn psum_norm_examples() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let l1 = FunctionSpace::lr(2, exp(1.0)).unwrap();
        assert_eq!(psum_norm(&tup(&l1, e.clone()), exp(1.0)), 2.0);
        assert_eq!(psum_norm(&tup(&l1, e.clone()), Exponent::INF), l1.norm(&[1.0, 1.0]).unwrap());
        let l2 = FunctionSpace::lr(2, exp(2.0)).unwrap();
        assert!((psum_norm(&tup(&l2, e), exp(2.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mixed_matrix_examples() {
        let sp = FunctionSpace::lr(2, exp(1.5)).unwrap();
        let ms = vec![vec![1.0, -2.0], vec![0.5, 3.0], vec![2.0, 0.0]];
        let col = VectorMatrix::new(sp.clone(), 3, 1, ms.clone()).unwrap();
        let t = tup(&sp, ms.clone());
        assert!((mixed_matrix_norm(&col, exp(3.0), exp(1.2)) - psum_norm(&t, exp(3.0))).abs() < 1e-13);
        let row = VectorMatrix::new(sp.clone(), 1, 3, ms).unwrap();
        assert!((mixed_matrix_norm(&row, exp(3.0), exp(1.2)) - psum_norm(&t, exp(1.2))).abs() < 1e-13);
        let one = FunctionSpace::lr(1, exp(1.0)).unwrap();
        let ones = VectorMatrix::new(one, 2, 2, vec![vec![1.0]; 4]).unwrap();
        let brute: f64 = (2.0 * (1.0f64 + 1.0).powf(2.0 / 2.0)).powf(0.5);
        assert!((mixed_matrix_norm(&ones, exp(2.0), exp(2.0)) - 2.0).abs() < 1e-14);
        assert!((brute - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pointwise_product_examples() {
        let sp = FunctionSpace::lr(2, exp(2.0)).unwrap();
        let a = tup(&sp, vec![vec![1.0, 2.0]]);
        let b = tup(&sp, vec![vec![3.0, 4.0]]);
        assert_eq!(pointwise_product(&a, &b).unwrap().members(), &[vec![3.0, 8.0]]);
        let ones = tup(&sp, vec![vec![1.0, 1.0]]);
        assert_eq!(pointwise_product(&a, &ones).unwrap().members(), a.members());
        let d1 = tup(&sp, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d2 = tup(&sp, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(pointwise_product(&d1, &d2).unwrap().members(), &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(pointwise_product(&a, &d1).is_err());
    }

    #[test]
    fn holder_examples() {
        let sp = FunctionSpace::lr(2, exp(2.0)).unwrap();
        let empty = tup(&sp, vec![]);
        let h = holder_check(&sp, &empty, &empty, exp(1.0), exp(2.0), exp(2.0)).unwrap();
        assert_eq!((h.lhs, h.rhs), (0.0, 0.0));
        assert!(holder_check(&sp, &empty, &empty, exp(2.0), exp(2.0), exp(2.0)).is_err());
        let e = tup(&sp, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let h = holder_check(&sp, &e, &e, exp(1.0), exp(2.0), exp(2.0)).unwrap();
        assert!((h.lhs - 2.0).abs() < 1e-14 && (h.rhs - 2.0).abs() < 1e-14 && h.slack.abs() < 1e-14);
    }

    #[test]
    fn dual_witness_examples() {
        let sp = FunctionSpace::lr(2, exp(1.0)).unwrap();
        let t = tup(&sp, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let w = dual_witness(&sp, &t, exp(2.0), exp(1.0), exp(2.0)).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((w.members()[0][0] - h).abs() < 1e-15 && (w.members()[1][0] - h).abs() < 1e-15);
        assert_eq!(w.members()[0][1], 0.0);
        let prod = pointwise_product(&t, &w).unwrap();
        let lhs = l1_rsum(sp.weights(), prod.members(), exp(1.0));
        assert!((lhs - psum_norm(&t, exp(2.0))).abs() < 1e-14);
        // coarse grid over dual tuples (a, b) with (a^2 + b^2)^{1/2} ≤ 1 at the first atom
        let mut best: f64 = 0.0;
        for k in 0..=400 {
            let th = std::f64::consts::FRAC_PI_2 * k as f64 / 400.0;
            best = best.max(th.cos() + th.sin());
        }
        assert!((best - 2f64.sqrt()).abs() < 1e-4);

        let single = tup(&sp, vec![vec![2.0, -1.0]]);
        let w1 = dual_witness(&sp, &single, exp(3.0), exp(1.0), exp(1.5)).unwrap();
        let xp = sp.norming_functional(&p_sum(&single, exp(3.0))).unwrap();
        for (a, b) in w1.members()[0].iter().zip(&xp) {
            assert!((a - b).abs() < 1e-14);
        }
        let zero = tup(&sp, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let wz = dual_witness(&sp, &zero, exp(2.0), exp(1.0), exp(2.0)).unwrap();
        assert!(wz.members().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn sup_representation_examples() {
        let sp = FunctionSpace::lr(2, exp(2.0)).unwrap();
        let one = tup(&sp, vec![vec![1.5, -2.0]]);
        assert_eq!(sup_representation_check(&one, exp(3.0), 10).unwrap().gap, 0.0);
        let t = tup(&sp, vec![vec![1.0, -2.0], vec![0.5, 3.0], vec![-1.0, 0.0]]);
        assert!(sup_representation_check(&t, exp(1.0), 10).unwrap().gap < 1e-15);
        let e = tup(&sp, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = sup_representation_check(&e, exp(2.0), 360).unwrap();
        assert!(r.gap >= 0.0 && r.gap <= 1e-4, "{}", r.gap);
    }
}
