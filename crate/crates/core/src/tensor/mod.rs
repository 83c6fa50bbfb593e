//! Elements of X ⊗ Y over function spaces and certified bounds for ε, π, the Chevet–Saphar
//! norms g_p, d_p, w_p and the lattice tensor norms φ_{p,q}, r_{p,q}, h_{p,q}, k_{p,q}.
//!
//! The right factor plays the role of a dual space: an operator T: X → Y pairs with
//! z ∈ X ⊗ Y' through ⟨T, z⟩ = Σ ⟨T x_i, y_i⟩.

pub(crate) mod pi;
mod search;

use serde::{Deserialize, Serialize};

use crate::ascent::operator_norm;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::family::{self, Mixed};
use crate::regular::{concavity_upper, convexity_upper, rho_analytic_upper, rho_lower_bound, RegularityParams};
use crate::space::{FunctionSpace, OperatorMatrix};

use search::{standard_starts, Mat, Objective, Rep, Search};

pub use pi::form_operator;

const SEARCH_ITERS: usize = 1500;
const PHI_SEED: u64 = 0x0f12_2a55;
pub const DEFAULT_CUT_ITERS: usize = 40;
pub const DEFAULT_BLOCKS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct Tensor {
    left_space: FunctionSpace,
    right_space: FunctionSpace,
    terms: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Deserialize)]
struct RawTensor {
    left_space: FunctionSpace,
    right_space: FunctionSpace,
    terms: Vec<(Vec<f64>, Vec<f64>)>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = Error;
    fn try_from(r: RawTensor) -> Result<Self> {
        Tensor::new(r.left_space, r.right_space, r.terms)
    }
}

impl Tensor {
    pub fn new(left: FunctionSpace, right: FunctionSpace, terms: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a tensor needs at least one term".into()));
        }
        for (x, y) in &terms {
            left.check(x)?;
            right.check(y)?;
        }
        Ok(Tensor { left_space: left, right_space: right, terms })
    }

    /// The element with matrix z, written through its rows.
    pub fn from_matrix(left: FunctionSpace, right: FunctionSpace, z: &[Vec<f64>]) -> Result<Self> {
        if z.len() != left.atoms() {
            return Err(Error::DimensionMismatch { expected: left.atoms(), got: z.len() });
        }
        let terms = z
            .iter()
            .enumerate()
            .map(|(a, row)| {
                let mut e = vec![0.0; left.atoms()];
                e[a] = 1.0;
                (e, row.clone())
            })
            .collect();
        Tensor::new(left, right, terms)
    }

    pub fn left(&self) -> &FunctionSpace {
        &self.left_space
    }

    pub fn right(&self) -> &FunctionSpace {
        &self.right_space
    }

    pub fn terms(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.terms
    }

    /// z1 + z2 through the concatenated representation.
    pub fn concat(&self, other: &Tensor) -> Result<Tensor> {
        if self.left_space != other.left_space || self.right_space != other.right_space {
            return Err(Error::InvalidArgument("tensors live over different spaces".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Tensor::new(self.left_space.clone(), self.right_space.clone(), terms)
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        let terms = self.terms.iter().map(|(x, y)| (x.iter().map(|v| v * c).collect(), y.clone())).collect();
        Tensor { terms, ..self.clone() }
    }

    fn is_zero(&self) -> bool {
        canonical_matrix(self).iter().flatten().all(|v| *v == 0.0)
    }
}

/// z[a][b] = Σ_i x_i[a] y_i[b].
pub fn canonical_matrix(z: &Tensor) -> Vec<Vec<f64>> {
    let n = z.left_space.atoms();
    let m = z.right_space.atoms();
    let mut out = vec![vec![0.0; m]; n];
    for (x, y) in &z.terms {
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..m {
                out[a][b] += x[a] * y[b];
            }
        }
    }
    out
}

/// The unweighted pairing Σ A[a][b] z[a][b] of a bilinear form with z.
pub fn form_pairing(a: &[Vec<f64>], z: &Tensor) -> f64 {
    canonical_matrix(z).iter().zip(a).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u * v).sum::<f64>()).sum()
}

/// ⟨T, z⟩ = Σ_i ⟨T x_i, y_i⟩ with y_i acting on the codomain of T.
pub fn trace_pairing(t: &OperatorMatrix, z: &Tensor) -> Result<f64> {
    if z.left().atoms() != t.cols() || z.right().atoms() != t.rows() {
        return Err(Error::DimensionMismatch { expected: t.cols() * t.rows(), got: z.left().atoms() * z.right().atoms() });
    }
    if z.right().weights() != t.codomain().weights() {
        return Err(Error::InvalidArgument("right factor weights differ from the codomain weights".into()));
    }
    let nu = t.codomain().weights();
    Ok(z.terms()
        .iter()
        .map(|(x, y)| t.apply_of(x).iter().zip(y).zip(nu).map(|((u, v), w)| w * u * v).sum::<f64>())
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum TensorNorm {
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "g_p")]
    Gp { p: Exponent },
    #[serde(rename = "d_p")]
    Dp { p: Exponent },
    #[serde(rename = "w_p")]
    Wp { p: Exponent },
    #[serde(rename = "phi_pq")]
    Phi { p: Exponent, q: Exponent },
    #[serde(rename = "r_pq")]
    Rpq { p: Exponent, q: Exponent },
    #[serde(rename = "h_pq")]
    Hpq { p: Exponent, q: Exponent },
    #[serde(rename = "k_pq")]
    Kpq { p: Exponent, q: Exponent },
}

impl TensorNorm {
    fn objective(self) -> Option<Objective> {
        Some(match self {
            TensorNorm::Eps => return None,
            TensorNorm::Pi => Objective::Pi,
            TensorNorm::Gp { p } => Objective::G(p),
            TensorNorm::Dp { p } => Objective::D(p),
            TensorNorm::Wp { p } => Objective::W(p),
            TensorNorm::Phi { p, q } | TensorNorm::Rpq { p, q } => Objective::Phi(p, q),
            TensorNorm::Hpq { p, q } => Objective::Delta(p, q),
            TensorNorm::Kpq { p, q } => Objective::Iota(p, q),
        })
    }
}

/// A bilinear form A on X × Y with ‖A‖ ≤ dual_norm_bound; certifies ⟨A, z⟩ / bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub matrix: Vec<Vec<f64>>,
    pub dual_norm_bound: f64,
    pub operator_class: String,
}

impl DualCertificate {
    pub fn value(&self, z: &Tensor) -> f64 {
        if self.dual_norm_bound == 0.0 {
            0.0
        } else {
            form_pairing(&self.matrix, z) / self.dual_norm_bound
        }
    }
}

/// An explicit representation; `blocks[i]` assigns term i to a block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representation {
    pub terms: Vec<(Vec<f64>, Vec<f64>)>,
    pub blocks: Vec<usize>,
}

impl Representation {
    fn from_rep(r: &Rep) -> Self {
        Representation { terms: r.terms(), blocks: r.labels.clone() }
    }

    fn to_rep(&self) -> Rep {
        let mut r = Rep::from_terms(&self.terms);
        r.labels = self.blocks.clone();
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorNormBounds {
    pub norm: TensorNorm,
    pub lower: f64,
    pub upper: f64,
    pub lower_certificate: Option<DualCertificate>,
    pub upper_certificate: Option<Representation>,
    pub tolerance: f64,
}

impl TensorNormBounds {
    fn new(
        norm: TensorNorm,
        lower: (f64, Option<DualCertificate>),
        upper: (f64, Option<Representation>),
    ) -> Self {
        TensorNormBounds {
            norm,
            lower: lower.0,
            upper: upper.0,
            lower_certificate: lower.1,
            upper_certificate: upper.1,
            tolerance: 1e-9 * (1.0 + upper.0.abs()),
        }
    }

    fn zero(norm: TensorNorm) -> Self {
        TensorNormBounds::new(norm, (0.0, None), (0.0, None))
    }

    pub fn norm_name(&self) -> &'static str {
        match self.norm {
            TensorNorm::Eps => "eps",
            TensorNorm::Pi => "pi",
            TensorNorm::Gp { .. } => "g_p",
            TensorNorm::Dp { .. } => "d_p",
            TensorNorm::Wp { .. } => "w_p",
            TensorNorm::Phi { .. } => "phi_pq",
            TensorNorm::Rpq { .. } => "r_pq",
            TensorNorm::Hpq { .. } => "h_pq",
            TensorNorm::Kpq { .. } => "k_pq",
        }
    }

    /// Recomputes both bounds from the certificates. The representation must reproduce z.
    pub fn reevaluate(&self, z: &Tensor) -> Result<(f64, f64)> {
        let lower = self.lower_certificate.as_ref().map_or(self.lower, |c| c.value(z));
        let upper = match (&self.upper_certificate, self.norm.objective()) {
            (Some(rep), Some(obj)) => {
                let r = Tensor::new(z.left().clone(), z.right().clone(), rep.terms.clone())?;
                let (zm, rm) = (canonical_matrix(z), canonical_matrix(&r));
                let scale = zm.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
                let dev = zm.iter().flatten().zip(rm.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                if dev > 1e-9 * scale {
                    return Err(Error::InvalidArgument(format!("representation misses z by {dev:e}")));
                }
                searcher(z, obj, 1).value(&rep.to_rep(), true)
            }
            _ => self.upper,
        };
        Ok((lower, upper))
    }
}

fn searcher(z: &Tensor, obj: Objective, blocks: usize) -> Search<'_> {
    Search { left: z.left(), right: z.right(), obj, blocks, iters: SEARCH_ITERS }
}

fn require_q_le_p(p: Exponent, q: Exponent) -> Result<()> {
    RegularityParams::new(p, q)?;
    if q > p {
        return Err(Error::ExponentRelation(format!("tensor norm needs q <= p (got p = {p}, q = {q})")));
    }
    Ok(())
}

fn require_banach(z: &Tensor) -> Result<()> {
    z.left().dual()?;
    z.right().dual()?;
    Ok(())
}

/// ε(z) = sup x*⊗y*(z) as the norm of z: X' → Y.
pub fn eps_norm(z: &Tensor, seed: u64) -> Result<TensorNormBounds> {
    let _ = seed;
    require_banach(z)?;
    if z.is_zero() {
        return Ok(TensorNormBounds::zero(TensorNorm::Eps));
    }
    let (left, right) = (z.left(), z.right());
    let zm = canonical_matrix(z);
    let mu = left.weights();
    let entries = (0..right.atoms()).map(|b| (0..left.atoms()).map(|a| mu[a] * zm[a][b]).collect()).collect();
    let op = OperatorMatrix::new(left.dual()?, right.clone(), entries)?;
    let b = operator_norm(&op)?;
    let xs = &b.witness;
    let ys = right.norming_of(&op.apply_of(xs))?;
    let nu = right.weights();
    let a: Mat = (0..left.atoms()).map(|i| (0..right.atoms()).map(|j| mu[i] * xs[i] * nu[j] * ys[j]).collect()).collect();
    let bound = left.dual_norm_of(xs) * right.dual_norm_of(&ys);
    let cert = DualCertificate { matrix: a, dual_norm_bound: bound, operator_class: "rank-one".into() };
    let lower = cert.value(z).min(b.upper);
    Ok(TensorNormBounds::new(TensorNorm::Eps, (lower, Some(cert)), (b.upper, None)))
}

struct PiParts {
    bounds: TensorNormBounds,
    a: Mat,
}

fn pi_parts(z: &Tensor, seed: u64, cut_iters: usize) -> Result<PiParts> {
    require_banach(z)?;
    let (left, right) = (z.left(), z.right());
    let zm = canonical_matrix(z);
    let svd_seeds = standard_starts(&zm, &[], 1).pop().map(|r| r.terms()).unwrap_or_default();
    let mut seeds = z.terms().to_vec();
    seeds.extend(svd_seeds);
    let cg = pi::column_generation(left, right, &zm, &seeds, cut_iters)?;
    let mut upper = (cg.upper, cg.rep.clone());
    let local = searcher(z, Objective::Pi, 1).run(&zm, vec![Rep::from_terms(z.terms())], seed);
    if local.0 < upper.0 {
        upper = local;
    }
    let (_, phi_rep) = phi_search(z, Exponent::TWO, Exponent::TWO);
    if let Some(am) = pi::am_route(left, right, &zm, &phi_rep)? {
        if am.0 < upper.0 {
            upper = am;
        }
    }
    let eps = eps_norm(z, seed)?;
    let cg_cert =
        DualCertificate { matrix: cg.a.clone(), dual_norm_bound: cg.bound, operator_class: "operator-norm".into() };
    let lower = if cg_cert.value(z) >= eps.lower {
        (cg_cert.value(z), Some(cg_cert))
    } else {
        (eps.lower, eps.lower_certificate)
    };
    let mut rep = Representation::from_rep(&upper.1);
    rep.blocks = (0..rep.terms.len()).collect();
    let bounds = TensorNormBounds::new(TensorNorm::Pi, (lower.0.min(upper.0), lower.1), (upper.0, Some(rep)));
    Ok(PiParts { bounds, a: cg.a })
}

/// π(z): column generation with rank-one cuts for the lower bound, explicit representations for
/// the upper bound.
pub fn pi_bounds(z: &Tensor, seed: u64, cut_iters: usize) -> Result<TensorNormBounds> {
    if z.is_zero() {
        require_banach(z)?;
        return Ok(TensorNormBounds::zero(TensorNorm::Pi));
    }
    Ok(pi_parts(z, seed, cut_iters)?.bounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChevetSaphar {
    G,
    D,
    W,
}

fn single_search(z: &Tensor, obj: Objective, seed: u64, extra: Vec<Rep>) -> (f64, Rep) {
    let zm = canonical_matrix(z);
    let mut starts = standard_starts(&zm, z.terms(), 1);
    starts.extend(extra);
    searcher(z, obj, 1).run(&zm, starts, seed)
}

/// g_p, d_p or w_p: representation search from above, ε from below.
pub fn laprete_bounds(z: &Tensor, which: ChevetSaphar, p: Exponent, seed: u64) -> Result<TensorNormBounds> {
    p.require_banach("p")?;
    let norm = match which {
        ChevetSaphar::G => TensorNorm::Gp { p },
        ChevetSaphar::D => TensorNorm::Dp { p },
        ChevetSaphar::W => TensorNorm::Wp { p },
    };
    if z.is_zero() {
        require_banach(z)?;
        return Ok(TensorNormBounds::zero(norm));
    }
    let eps = eps_norm(z, seed)?;
    let (val, rep) = match which {
        ChevetSaphar::W => {
            let g = single_search(z, Objective::G(p), seed, vec![]).1;
            let d = single_search(z, Objective::D(p), seed, vec![]).1;
            single_search(z, Objective::W(p), seed, vec![g, d])
        }
        _ => single_search(z, norm.objective().expect("search norm"), seed, vec![]),
    };
    Ok(TensorNormBounds::new(
        norm,
        (eps.lower.min(val), eps.lower_certificate),
        (val, Some(Representation::from_rep(&rep))),
    ))
}

fn phi_search(z: &Tensor, p: Exponent, q: Exponent) -> (f64, Rep) {
    single_search(z, Objective::Phi(p, q), PHI_SEED, vec![])
}

/// Best searched single-representation value of φ_{p,q}(z).
pub fn phi_pq_upper(z: &Tensor, p: Exponent, q: Exponent) -> Result<f64> {
    require_q_le_p(p, q)?;
    Ok(phi_search(z, p, q).0)
}

/// φ_{p,q} of one explicit representation.
pub fn phi_pq_of_terms(z: &Tensor, p: Exponent, q: Exponent) -> Result<f64> {
    require_q_le_p(p, q)?;
    Ok(searcher(z, Objective::Phi(p, q), 1).value(&Rep::from_terms(z.terms()), true))
}

#[derive(Clone, Copy)]
enum DualClass {
    Regular,
    Convex,
    Concave,
}

fn block_bounds(
    z: &Tensor,
    norm: TensorNorm,
    class: DualClass,
    p: Exponent,
    q: Exponent,
    seed: u64,
    blocks: usize,
) -> Result<TensorNormBounds> {
    require_q_le_p(p, q)?;
    require_banach(z)?;
    if z.is_zero() {
        return Ok(TensorNormBounds::zero(norm));
    }
    let blocks = blocks.max(1);
    let obj = norm.objective().expect("search norm");
    let zm = canonical_matrix(z);
    let mut starts = standard_starts(&zm, z.terms(), blocks);
    if obj == Objective::Phi(p, q) {
        starts.push(phi_search(z, p, q).1);
    }
    let (val, rep) = searcher(z, obj, blocks).run(&zm, starts, seed);
    let pi = pi_parts(z, seed, DEFAULT_CUT_ITERS)?;
    let mut upper = (val, Some(Representation::from_rep(&rep)));
    if pi.bounds.upper < val {
        upper = (pi.bounds.upper, pi.bounds.upper_certificate.clone());
    }

    let eps = eps_norm(z, seed)?;
    let mut lower = (eps.lower, eps.lower_certificate);
    let op = form_operator(z.left(), z.right(), &pi.a)?;
    let (bound, class_name) = match class {
        DualClass::Regular => (rho_analytic_upper(&op, p, q)?, "regular"),
        DualClass::Convex => (convexity_upper(&op, p)?, "convex"),
        DualClass::Concave => (concavity_upper(&op, q)?, "concave"),
    };
    if let Some((b, kind)) = bound {
        let cert = DualCertificate { matrix: pi.a, dual_norm_bound: b, operator_class: format!("{class_name}:{kind}") };
        let v = cert.value(z);
        if v > lower.0 {
            lower = (v, Some(cert));
        }
    }
    lower.0 = lower.0.min(upper.0);
    Ok(TensorNormBounds::new(norm, lower, upper))
}

/// r_{p,q}(z) = inf Σ_j φ_{p,q}(z_j): block search from above, trace duality with
/// (p,q)-regular operators from below.
pub fn r_pq_bounds(z: &Tensor, p: Exponent, q: Exponent, seed: u64, blocks: usize) -> Result<TensorNormBounds> {
    block_bounds(z, TensorNorm::Rpq { p, q }, DualClass::Regular, p, q, seed, blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexConcave {
    H,
    K,
}

/// h_{p,q} (dual to (p,q)-convex operators) or k_{p,q} (dual to (p,q)-concave operators).
pub fn hk_pq_bounds(z: &Tensor, which: ConvexConcave, p: Exponent, q: Exponent, seed: u64) -> Result<TensorNormBounds> {
    match which {
        ConvexConcave::H => block_bounds(z, TensorNorm::Hpq { p, q }, DualClass::Convex, p, q, seed, DEFAULT_BLOCKS),
        ConvexConcave::K => block_bounds(z, TensorNorm::Kpq { p, q }, DualClass::Concave, p, q, seed, DEFAULT_BLOCKS),
    }
}

/// Bounds for any supported norm with the default search settings.
pub fn tensor_norm_bounds(z: &Tensor, norm: TensorNorm, seed: u64) -> Result<TensorNormBounds> {
    match norm {
        TensorNorm::Eps => eps_norm(z, seed),
        TensorNorm::Pi => pi_bounds(z, seed, DEFAULT_CUT_ITERS),
        TensorNorm::Gp { p } => laprete_bounds(z, ChevetSaphar::G, p, seed),
        TensorNorm::Dp { p } => laprete_bounds(z, ChevetSaphar::D, p, seed),
        TensorNorm::Wp { p } => laprete_bounds(z, ChevetSaphar::W, p, seed),
        TensorNorm::Phi { p, q } => {
            require_q_le_p(p, q)?;
            if z.is_zero() {
                require_banach(z)?;
                return Ok(TensorNormBounds::zero(norm));
            }
            let eps = eps_norm(z, seed)?;
            let (val, rep) = phi_search(z, p, q);
            Ok(TensorNormBounds::new(
                norm,
                (eps.lower.min(val), eps.lower_certificate),
                (val, Some(Representation::from_rep(&rep))),
            ))
        }
        TensorNorm::Rpq { p, q } => r_pq_bounds(z, p, q, seed, DEFAULT_BLOCKS),
        TensorNorm::Hpq { p, q } => hk_pq_bounds(z, ConvexConcave::H, p, q, seed),
        TensorNorm::Kpq { p, q } => hk_pq_bounds(z, ConvexConcave::K, p, q, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceDualityReport {
    pub rho_est: f64,
    pub dual_sup: f64,
    pub gap: f64,
}

pub const TRACE_GUARD: usize = 12;

/// Compares the ρ_{p,q}(T) estimate with sup ⟨T, z⟩ over tensors with r_{p,q}(z) ≤ 1.
pub fn trace_duality_check(
    t: &OperatorMatrix,
    p: Exponent,
    q: Exponent,
    rank_budget: usize,
    seed: u64,
) -> Result<TraceDualityReport> {
    let params = RegularityParams::new(p, q)?;
    require_q_le_p(p, q)?;
    if rank_budget == 0 || t.cols() * rank_budget > TRACE_GUARD {
        return Err(Error::SizeGuard {
            guard: "trace-duality",
            detail: format!("atoms x rank_budget = {} must lie in 1..={TRACE_GUARD}", t.cols() * rank_budget),
        });
    }
    if t.is_zero() {
        return Ok(TraceDualityReport { rho_est: 0.0, dual_sup: 0.0, gap: 0.0 });
    }
    let rho = rho_lower_bound(t, params, rank_budget, seed, 64)?;
    let x = rho.lower_witness.members().to_vec();
    let tx: Vec<Vec<f64>> = x.iter().map(|v| t.apply_of(v)).collect();
    let ystar = family::norming(t.codomain(), &tx, Mixed::tuple(p))?;
    let right = t.codomain().dual()?;
    let mut cands = vec![Tensor::new(t.domain().clone(), right.clone(), x.into_iter().zip(ystar).collect())?];
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x7ace);
    for _ in 0..8 {
        let terms = (0..rank_budget)
            .map(|_| {
                let a: Vec<f64> = (0..t.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let b: Vec<f64> = (0..t.rows()).map(|_| StandardNormal.sample(&mut rng)).collect();
                (a, b)
            })
            .collect();
        cands.push(Tensor::new(t.domain().clone(), right.clone(), terms)?);
    }
    let mut dual_sup = 0.0_f64;
    for (k, z) in cands.iter().enumerate() {
        if z.is_zero() {
            continue;
        }
        let zm = canonical_matrix(z);
        let mut starts = standard_starts(&zm, z.terms(), DEFAULT_BLOCKS);
        starts.push(phi_search(z, p, q).1);
        let (r, _) = searcher(z, Objective::Phi(p, q), DEFAULT_BLOCKS).run(&zm, starts, seed.wrapping_add(k as u64));
        if r > 0.0 {
            dual_sup = dual_sup.max(trace_pairing(t, z)?.abs() / r);
        }
    }
    Ok(TraceDualityReport { rho_est: rho.lower, dual_sup, gap: (rho.lower - dual_sup).abs() })
}

#[cfg(test)]
mod tests;
