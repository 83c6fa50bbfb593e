//! Estimation and certification of ρ_{p,q}(T), convexity and concavity norms and the
//! bilinear form P_T.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ascent::{lex_less, operator_norm, OpNormBound, RatioSpec, MAX_ITER, REL_TOL};
use crate::calculus::{l1_rsum, VectorTuple};
use crate::error::{Error, Result};
use crate::exponent::{check_holder_triple, Exponent};
use crate::family::{self, Family, Mixed};
use crate::scalar::{lp, mixed_norming};
use crate::space::{FunctionSpace, NormKind, OperatorMatrix};

/// Default value of the Grothendieck constant bound.
pub const K_G: f64 = 1.78221;

pub const DEFAULT_RESTARTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityParams {
    pub p: Exponent,
    pub q: Exponent,
}

impl RegularityParams {
    pub fn new(p: Exponent, q: Exponent) -> Result<Self> {
        p.require_banach("p")?;
        q.require_banach("q")?;
        Ok(RegularityParams { p, q })
    }

    fn require_q_le_p(&self) -> Result<()> {
        if self.q > self.p {
            return Err(Error::ExponentRelation(format!(
                "estimators need q <= p (got p = {}, q = {})",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "name")]
pub enum UpperKind {
    AnalyticBound(String),
    OracleExact,
    None,
}

/// A certified interval [lower, upper]; `upper = None` means no finite bound is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub lower_witness: VectorTuple,
    pub upper: Option<f64>,
    pub upper_kind: UpperKind,
    pub tolerance: f64,
}

impl NormEstimate {
    pub fn upper_or_inf(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }

    fn assemble(lower: f64, witness: VectorTuple, upper: Option<(f64, String)>) -> Self {
        let tolerance = 1e-9 * (1.0 + lower.abs());
        match upper {
            Some((u, name)) => NormEstimate {
                lower: lower.min(u),
                lower_witness: witness,
                upper: Some(u),
                upper_kind: UpperKind::AnalyticBound(name),
                tolerance,
            },
            None => NormEstimate { lower, lower_witness: witness, upper: None, upper_kind: UpperKind::None, tolerance },
        }
    }
}

fn check_tuple_size(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("tuple_size must be at least 1".into()));
    }
    Ok(())
}

fn warm_tuple(b: &OpNormBound, members: usize) -> Family {
    let mut w = vec![vec![0.0; b.witness.len()]; members];
    w[0] = b.witness.clone();
    w
}

fn min_bound(cands: Vec<(f64, &str)>) -> Option<(f64, String)> {
    cands
        .into_iter()
        .filter(|(v, _)| v.is_finite())
        .fold(None, |acc: Option<(f64, String)>, (v, n)| match acc {
            Some((a, _)) if a <= v => acc,
            _ => Some((v, n.to_string())),
        })
}

/// The best analytic upper bound for ρ_{p,q}(T) with q ≤ p.
pub fn rho_analytic_upper(t: &OperatorMatrix, p: Exponent, q: Exponent) -> Result<Option<(f64, String)>> {
    let mut cands = vec![];
    let norm = operator_norm(t)?;
    let modulus = if t.is_nonnegative() { norm.clone() } else { operator_norm(&t.modulus())? };
    cands.push((modulus.upper, "modulus"));
    if p.approx_eq(Exponent::TWO) && q.approx_eq(Exponent::TWO) {
        cands.push((K_G * norm.upper, "krivine"));
    }
    if let (NormKind::WeightedLr(r), NormKind::WeightedLr(tt)) = (t.domain().kind(), t.codomain().kind()) {
        let lo = if q > *r { q } else { *r };
        let hi = if p < *tt { p } else { *tt };
        if lo <= hi || lo.approx_eq(hi) {
            cands.push((norm.upper, "lr-lt-ordering"));
        }
    }
    Ok(min_bound(cands))
}

/// Lower bound for ρ_{p,q}(T) over tuples of `tuple_size` members by alternating ascent.
pub fn rho_lower_bound(
    t: &OperatorMatrix,
    params: RegularityParams,
    tuple_size: usize,
    seed: u64,
    restarts: usize,
) -> Result<NormEstimate> {
    check_tuple_size(tuple_size)?;
    params.require_q_le_p()?;
    let b = operator_norm(t)?;
    let spec = RatioSpec { op: t, input: Mixed::tuple(params.q), output: Mixed::tuple(params.p), members: tuple_size };
    let (lower, wit) = spec.multistart(restarts, seed, Some(warm_tuple(&b, tuple_size)))?;
    let witness = VectorTuple::new(t.domain().clone(), wit)?;
    Ok(NormEstimate::assemble(lower, witness, rho_analytic_upper(t, params.p, params.q)?))
}

/// Ratio ‖(Σ|Tx_i|^p)^{1/p}‖ / ‖(Σ|x_i|^q)^{1/q}‖ of a given tuple.
pub fn rho_ratio(t: &OperatorMatrix, params: RegularityParams, x: &[Vec<f64>]) -> f64 {
    RatioSpec { op: t, input: Mixed::tuple(params.q), output: Mixed::tuple(params.p), members: x.len() }.ratio(x)
}

/// n^{1/p − 1/q} ‖Tx‖/‖x‖ from the constant tuple (x, …, x), for p < q.
pub fn rho_growth_witness(t: &OperatorMatrix, p: Exponent, q: Exponent, x: &[f64], n: usize) -> Result<f64> {
    if !(p < q) {
        return Err(Error::ExponentRelation("growth witness needs p < q".into()));
    }
    t.domain().check(x)?;
    let tx = t.apply_of(x);
    let ty = t.codomain().norm_of(&tx);
    if ty == 0.0 {
        return Err(Error::ZeroImage);
    }
    let nx = t.domain().norm_of(x);
    Ok((n as f64).powf(p.recip() - q.recip()) * ty / nx)
}

// ---------- oracle ----------

pub const ORACLE_GUARD: usize = 12;
const ORACLE_MAX_CANDIDATES: usize = 2_000_000;

/// Points on the unit sphere of a 2-d norm with a containment factor c: conv(points) ⊇ c·B.
fn polygon(k: usize, norm: &dyn Fn(&[f64]) -> f64, dual: &dyn Fn(&[f64]) -> f64) -> (Vec<Vec<f64>>, f64) {
    let pts: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            let v = [th.cos(), th.sin()];
            let m = norm(&v);
            vec![v[0] / m, v[1] / m]
        })
        .collect();
    let mut c = f64::INFINITY;
    for j in 0..k {
        let a = &pts[j];
        let b = &pts[(j + 1) % k];
        let det = a[0] * b[1] - a[1] * b[0];
        let nu = [(b[1] - a[1]) / det, (a[0] - b[0]) / det];
        c = c.min(1.0 / dual(&nu));
    }
    (pts, c.min(1.0))
}

fn lq_factor(n: usize, q: Exponent, k: usize) -> Option<(Vec<Vec<f64>>, f64)> {
    if n == 1 {
        return Some((vec![vec![1.0], vec![-1.0]], 1.0));
    }
    if q.approx_eq(Exponent::ONE) {
        let mut out = vec![];
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                out.push(e);
            }
        }
        return Some((out, 1.0));
    }
    if q.is_infinite() {
        let out = (0..1usize << n)
            .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect();
        return Some((out, 1.0));
    }
    if n == 2 {
        let qc = q.conjugate().ok()?;
        return Some(polygon(k, &|v| lp(v, q), &|v| lp(v, qc)));
    }
    None
}

enum Ball {
    Product { scales: Vec<f64>, factor: Vec<Vec<f64>> },
    Sum { weights: Vec<f64>, factor: Vec<Vec<f64>> },
    Plane { points: Vec<Vec<f64>> },
}

impl Ball {
    fn count(&self, atoms: usize) -> usize {
        match self {
            Ball::Product { factor, .. } => factor.len().saturating_pow(atoms as u32),
            Ball::Sum { factor, .. } => factor.len() * atoms,
            Ball::Plane { points } => points.len(),
        }
    }

    fn family(&self, idx: usize, atoms: usize, members: usize) -> Family {
        let mut x = vec![vec![0.0; atoms]; members];
        match self {
            Ball::Product { scales, factor } => {
                let mut r = idx;
                for (j, s) in scales.iter().enumerate() {
                    let f = &factor[r % factor.len()];
                    r /= factor.len();
                    for i in 0..members {
                        x[i][j] = s * f[i];
                    }
                }
            }
            Ball::Sum { weights, factor } => {
                let j = idx / factor.len();
                let f = &factor[idx % factor.len()];
                for i in 0..members {
                    x[i][j] = f[i] / weights[j];
                }
            }
            Ball::Plane { points } => {
                x[0] = points[idx].clone();
            }
        }
        x
    }
}

fn oracle_ball(x: &FunctionSpace, n: usize, q: Exponent, k: usize) -> Result<Option<(Ball, f64)>> {
    let r = x
        .lr_exponent()
        .filter(|_| x.is_banach_lr())
        .ok_or_else(|| Error::Unsupported("oracle needs a weighted L_r domain".into()))?;
    let atoms = x.atoms();
    if r.is_infinite() || atoms == 1 {
        let scales = if r.is_infinite() { vec![1.0; atoms] } else { vec![x.weights()[0].powf(-r.recip())] };
        return Ok(lq_factor(n, q, k).map(|(factor, c)| (Ball::Product { scales, factor }, c)));
    }
    if r.approx_eq(Exponent::ONE) {
        return Ok(lq_factor(n, q, k).map(|(factor, c)| (Ball::Sum { weights: x.weights().to_vec(), factor }, c)));
    }
    if atoms * n == 2 {
        let (points, c) = polygon(k, &|v| x.norm_of(v), &|nu| {
            let a: Vec<f64> = nu.iter().zip(x.weights()).map(|(v, w)| v / w).collect();
            x.dual_norm_of(&a)
        });
        return Ok(Some((Ball::Plane { points }, c)));
    }
    Ok(None)
}

/// Reference value of the tuple-size-restricted ρ_{p,q}(T) by exhaustive vertex or polygon
/// enumeration of the domain ball. The interval width is at most `resolution` relative when
/// attainable within the candidate budget.
pub fn rho_oracle(t: &OperatorMatrix, params: RegularityParams, tuple_size: usize, resolution: f64) -> Result<NormEstimate> {
    check_tuple_size(tuple_size)?;
    params.require_q_le_p()?;
    let atoms = t.cols();
    if atoms * tuple_size > ORACLE_GUARD {
        return Err(Error::SizeGuard {
            guard: "oracle",
            detail: format!("atoms x tuple_size = {} > {ORACLE_GUARD}", atoms * tuple_size),
        });
    }
    let resolution = resolution.max(1e-12);
    let mut k = 8;
    let (ball, c) = loop {
        let (ball, c) = oracle_ball(t.domain(), tuple_size, params.q, k)?.ok_or_else(|| {
            Error::Unsupported(format!(
                "oracle has no exact or polygonal description of the domain ball for q = {} and {} atoms x {} members",
                params.q, atoms, tuple_size
            ))
        })?;
        let next = oracle_ball(t.domain(), tuple_size, params.q, 2 * k)?;
        let fits = next.as_ref().is_some_and(|(b, _)| b.count(atoms) <= ORACLE_MAX_CANDIDATES);
        if 1.0 / c - 1.0 <= resolution || !fits || k >= 1 << 16 {
            break (ball, c);
        }
        k *= 2;
    };
    let total = ball.count(atoms);
    if total > ORACLE_MAX_CANDIDATES {
        return Err(Error::SizeGuard { guard: "oracle-candidates", detail: format!("{total} candidates") });
    }
    let spec = RatioSpec { op: t, input: Mixed::tuple(params.q), output: Mixed::tuple(params.p), members: tuple_size };
    let (best, idx) = (0..total)
        .into_par_iter()
        .map(|i| (spec.ratio(&ball.family(i, atoms, tuple_size)), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let witness = VectorTuple::new(t.domain().clone(), ball.family(idx, atoms, tuple_size))?;
    Ok(NormEstimate {
        lower: best,
        lower_witness: witness,
        upper: Some(best / c),
        upper_kind: UpperKind::OracleExact,
        tolerance: 1e-9 * (1.0 + best),
    })
}

// ---------- convexity / concavity ----------

/// (p,q)-concavity constant: sup (Σ‖Tx_i‖^p)^{1/p} / ‖(Σ|x_i|^q)^{1/q}‖.
pub fn concavity_norm(t: &OperatorMatrix, p: Exponent, q: Exponent, tuple_size: usize, seed: u64) -> Result<NormEstimate> {
    let params = RegularityParams::new(p, q)?;
    check_tuple_size(tuple_size)?;
    params.require_q_le_p()?;
    let b = operator_norm(t)?;
    let spec = RatioSpec { op: t, input: Mixed::tuple(q), output: Mixed::Sequence(p), members: tuple_size };
    let (lower, wit) = spec.multistart(DEFAULT_RESTARTS, seed, Some(warm_tuple(&b, tuple_size)))?;
    Ok(NormEstimate::assemble(lower, VectorTuple::new(t.domain().clone(), wit)?, concavity_upper(t, q)?))
}

/// Upper bound for the (p,q)-concavity constant, valid for every q ≤ p.
pub(crate) fn concavity_upper(t: &OperatorMatrix, q: Exponent) -> Result<Option<(f64, String)>> {
    let x = t.domain();
    let y = t.codomain();
    let atomic: f64 = (0..t.cols())
        .map(|a| {
            let col: Vec<f64> = t.entries().iter().map(|row| row[a]).collect();
            y.norm_of(&col) / x.indicator_norm(a)
        })
        .sum();
    let mut cands = vec![(atomic, "atomic")];
    if let NormKind::WeightedLr(r) = x.kind() {
        if *r <= q || r.approx_eq(q) {
            cands.push((operator_norm(t)?.upper, "q-concave-domain"));
        }
    }
    Ok(min_bound(cands))
}

/// (p,q)-convexity constant: sup ‖(Σ|Tx_i|^p)^{1/p}‖ / (Σ‖x_i‖^q)^{1/q}.
pub fn convexity_norm(t: &OperatorMatrix, p: Exponent, q: Exponent, tuple_size: usize, seed: u64) -> Result<NormEstimate> {
    let params = RegularityParams::new(p, q)?;
    check_tuple_size(tuple_size)?;
    params.require_q_le_p()?;
    let b = operator_norm(t)?;
    let spec = RatioSpec { op: t, input: Mixed::Sequence(q), output: Mixed::tuple(p), members: tuple_size };
    let (lower, wit) = spec.multistart(DEFAULT_RESTARTS, seed, Some(warm_tuple(&b, tuple_size)))?;
    Ok(NormEstimate::assemble(lower, VectorTuple::new(t.domain().clone(), wit)?, convexity_upper(t, p)?))
}

/// Upper bound for the (p,q)-convexity constant, valid for every q ≤ p.
pub(crate) fn convexity_upper(t: &OperatorMatrix, p: Exponent) -> Result<Option<(f64, String)>> {
    let x = t.domain();
    let y = t.codomain();
    let atomic: f64 = t
        .entries()
        .iter()
        .enumerate()
        .map(|(b, row)| {
            let f: Vec<f64> = row.iter().zip(x.weights()).map(|(v, w)| v / w).collect();
            y.indicator_norm(b) * x.dual_norm_of(&f)
        })
        .sum();
    let mut cands = vec![(atomic, "atomic")];
    if let NormKind::WeightedLr(tt) = y.kind() {
        if *tt >= p || tt.approx_eq(p) {
            cands.push((operator_norm(t)?.upper, "p-convex-codomain"));
        }
    }
    Ok(min_bound(cands))
}

// ---------- bilinear form ----------

struct Bilinear<'a> {
    t: &'a OperatorMatrix,
    yd: FunctionSpace,
    r: Exponent,
    q: Exponent,
    s: Exponent,
}

impl Bilinear<'_> {
    fn products(&self, tx: &[Vec<f64>], y: &[Vec<f64>]) -> Family {
        tx.iter().zip(y).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).collect()).collect()
    }

    fn value(&self, x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        let tx: Family = x.iter().map(|m| self.t.apply_of(m)).collect();
        let num = l1_rsum(self.t.codomain().weights(), &self.products(&tx, y), self.r);
        let dx = family::value(self.t.domain(), x, Mixed::tuple(self.q));
        let dy = family::value(&self.yd, y, Mixed::tuple(self.s));
        if dx == 0.0 || dy == 0.0 {
            0.0
        } else {
            num / (dx * dy)
        }
    }

    fn weights_z(&self, tx: &[Vec<f64>], y: &[Vec<f64>]) -> Family {
        let prod = self.products(tx, y);
        let m = self.t.rows();
        let mut z = vec![vec![0.0; m]; prod.len()];
        for w in 0..m {
            let v: Vec<f64> = prod.iter().map(|f| f[w]).collect();
            for (i, e) in mixed_norming(&v, 1, self.r, self.r).into_iter().enumerate() {
                z[i][w] = e;
            }
        }
        z
    }

    fn ascend(&self, mut x: Family, mut y: Family) -> (f64, Family) {
        let mut val = self.value(&x, &y);
        for _ in 0..MAX_ITER {
            let tx: Family = x.iter().map(|m| self.t.apply_of(m)).collect();
            let z = self.weights_z(&tx, &y);
            let a: Family = z
                .iter()
                .zip(&y)
                .map(|(zi, yi)| self.t.adjoint_of(&zi.iter().zip(yi).map(|(u, v)| u * v).collect::<Vec<_>>()))
                .collect();
            let xn = family::support(self.t.domain(), &a, Mixed::tuple(self.q));
            let tx: Family = xn.iter().map(|m| self.t.apply_of(m)).collect();
            let z = self.weights_z(&tx, &y);
            let b: Family = z.iter().zip(&tx).map(|(zi, ti)| zi.iter().zip(ti).map(|(u, v)| u * v).collect()).collect();
            let yn = family::support(&self.yd, &b, Mixed::tuple(self.s));
            let vn = self.value(&xn, &yn);
            if vn <= val {
                break;
            }
            let done = vn - val <= REL_TOL * val;
            x = xn;
            y = yn;
            val = vn;
            if done {
                break;
            }
        }
        (val, x)
    }
}

/// Continuity constant of P_T(x, y') = Σ (Tx_i) y'_i e_i into L_1(ν, ℓ^r) on
/// X(ℓ^q) × Y'(ℓ^s), where 1/r = 1/p + 1/s.
pub fn bilinear_pt_norm(
    t: &OperatorMatrix,
    r: Exponent,
    q: Exponent,
    s: Exponent,
    tuple_size: usize,
    seed: u64,
) -> Result<NormEstimate> {
    check_tuple_size(tuple_size)?;
    r.require_banach("r")?;
    let p = Exponent::from_recip(r.recip() - s.recip())
        .map_err(|_| Error::ExponentRelation(format!("1/{r} - 1/{s} must be nonnegative")))?;
    check_holder_triple(r, p, s)?;
    let params = RegularityParams::new(p, q)?;
    params.require_q_le_p()?;
    let bl = Bilinear { t, yd: t.codomain().dual()?, r, q, s };
    let n = t.cols();
    let m = t.rows();
    let runs: Vec<(f64, Family)> = (0..DEFAULT_RESTARTS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let spec_x = RatioSpec { op: t, input: Mixed::tuple(q), output: Mixed::tuple(p), members: tuple_size };
            let x = spec_x.random_start(&mut rng);
            let y: Family = (0..tuple_size)
                .map(|_| (0..m).map(|_| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)).collect())
                .collect();
            let _ = n;
            bl.ascend(x, y)
        })
        .collect();
    let mut best: Option<(f64, Family)> = None;
    for (v, x) in runs {
        best = match best {
            Some((bv, bx)) if bv > v || (bv == v && !lex_less(&x, &bx)) => Some((bv, bx)),
            _ => Some((v, x)),
        };
    }
    let (lower, x) = best.expect("restarts");
    Ok(NormEstimate::assemble(lower, VectorTuple::new(t.domain().clone(), x)?, rho_analytic_upper(t, p, q)?))
}
