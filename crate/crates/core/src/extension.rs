//! Z-norms, the Calderón product description, finite Hahn–Banach extension of
//! (∞,q)-regular operators and the dyadic maps P_n, J_n.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ascent::RatioSpec;
use crate::calculus::VectorTuple;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::family::{self, Mixed};
use crate::lp::{Cmp, LinearProgram};
use crate::optim::{minimize, SearchOptions};
use crate::regular::{rho_analytic_upper, NormEstimate, UpperKind};
use crate::scalar::{lp, weighted_norming};
use crate::space::{FunctionSpace, LatticeVector, NormKind, OperatorMatrix};

const RANK_TOL: f64 = 1e-10;
pub const KELLEY_MAX_ITERS: usize = 400;
const KELLEY_GAP: f64 = 1e-3;

fn require_q(q: Exponent) -> Result<()> {
    q.require_banach("q")
}

/// A subspace of a function space spanned by linearly independent vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subspace {
    ambient: FunctionSpace,
    basis: Vec<LatticeVector>,
}

impl Subspace {
    pub fn new(ambient: FunctionSpace, basis: Vec<LatticeVector>) -> Result<Self> {
        for b in &basis {
            ambient.check(b)?;
        }
        if basis.is_empty() {
            return Err(Error::InvalidArgument("subspace needs at least one basis vector".into()));
        }
        let rank = numerical_rank(&basis_matrix(ambient.atoms(), &basis));
        if rank < basis.len() {
            return Err(Error::RankDeficient { rank, len: basis.len() });
        }
        Ok(Subspace { ambient, basis })
    }

    pub fn whole(ambient: FunctionSpace) -> Self {
        let n = ambient.atoms();
        let basis = (0..n)
            .map(|i| LatticeVector((0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()))
            .collect();
        Subspace { ambient, basis }
    }

    pub fn ambient(&self) -> &FunctionSpace {
        &self.ambient
    }
    pub fn basis(&self) -> &[LatticeVector] {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn matrix(&self) -> DMatrix<f64> {
        basis_matrix(self.ambient.atoms(), &self.basis)
    }
}

fn basis_matrix(n: usize, basis: &[LatticeVector]) -> DMatrix<f64> {
    DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i])
}

fn numerical_rank(b: &DMatrix<f64>) -> usize {
    if b.ncols() == 0 {
        return 0;
    }
    let sv = b.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_TOL * top).count()
}

/// An element Σ e_i ⊗ f_i of ℓ_{q'}^n ⊗ X.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZElement {
    space: FunctionSpace,
    components: Vec<LatticeVector>,
}

impl ZElement {
    pub fn new(space: FunctionSpace, components: Vec<LatticeVector>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("at least one component required".into()));
        }
        for c in &components {
            space.check(c)?;
        }
        Ok(ZElement { space, components })
    }

    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }
    pub fn n(&self) -> usize {
        self.components.len()
    }
    pub fn components(&self) -> &[LatticeVector] {
        &self.components
    }

    pub fn scaled(&self, c: f64) -> ZElement {
        let components = self.components.iter().map(|f| LatticeVector(f.iter().map(|v| c * v).collect())).collect();
        ZElement { space: self.space.clone(), components }
    }

    fn active(&self) -> Vec<Vec<f64>> {
        self.components.iter().filter(|f| f.iter().any(|v| *v != 0.0)).map(|f| f.0.clone()).collect()
    }
}

/// ⟨u, v⟩ = Σ_k ∫ u_k f_k dμ.
pub fn z_pairing(v: &ZElement, u: &[Vec<f64>]) -> f64 {
    family::pairing(&v.space, u, &v.components.iter().map(|f| f.0.clone()).collect::<Vec<_>>())
}

fn zero_estimate(space: &FunctionSpace, n: usize) -> Result<NormEstimate> {
    Ok(NormEstimate {
        lower: 0.0,
        lower_witness: VectorTuple::new(space.clone(), vec![vec![0.0; space.atoms()]; n])?,
        upper: Some(0.0),
        upper_kind: UpperKind::AnalyticBound("zero".into()),
        tolerance: 0.0,
    })
}

fn z_objective(x: &FunctionSpace, f: &[Vec<f64>], q: Exponent, qc: Exponent, a: &[f64]) -> f64 {
    let xs: Vec<Vec<f64>> = f.iter().zip(a).map(|(fi, ai)| fi.iter().map(|v| v / ai).collect()).collect();
    lp(a, qc) * family::value(x, &xs, Mixed::tuple(q))
}

/// Minimizing scalings a of the Z-norm representation, with the value.
fn z_scalings(x: &FunctionSpace, f: &[Vec<f64>], q: Exponent, seed: u64) -> (Vec<f64>, f64) {
    let qc = q.conjugate().expect("q >= 1");
    if qc.is_infinite() {
        let a = vec![1.0; f.len()];
        let v = z_objective(x, f, q, qc, &a);
        return (a, v);
    }
    let norms: Vec<f64> = f.iter().map(|fi| x.norm_of(fi)).collect();
    let la0: Vec<f64> = norms.iter().map(|nf| nf.ln() / qc.value()).collect();
    let obj = |la: &[f64]| {
        let a: Vec<f64> = la.iter().map(|v| v.exp()).collect();
        let r = z_objective(x, f, q, qc, &a);
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SearchOptions { max_sweeps: 600, tol: 1e-13, random_dirs: 2, step0: 0.5 };
    let (la, v) = minimize(obj, la0, &opts, &mut rng);
    let shift = la.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (la.iter().map(|l| (l - shift).exp()).collect(), v)
}

/// Upper bound for sup_{‖b‖_{q'} ≤ 1} ‖(Σ_k |b_k u_k|^{q'})^{1/q'}‖_{X'}.
fn z_dual_upper(x: &FunctionSpace, u: &[Vec<f64>], q: Exponent) -> f64 {
    let atoms = x.atoms();
    let envelope: Vec<f64> = (0..atoms).map(|w| u.iter().fold(0.0_f64, |m, uk| m.max(uk[w].abs()))).collect();
    let crude = x.dual_norm_of(&envelope);
    if q.is_infinite() {
        return u.iter().map(|uk| x.dual_norm_of(uk)).fold(0.0, f64::max);
    }
    if q.approx_eq(Exponent::ONE) {
        return crude;
    }
    match (x.kind(), q.conjugate()) {
        (NormKind::WeightedLr(r), Ok(Exponent::Finite(qc))) if *r >= q && x.is_banach_lr() => {
            let s = match r.conjugate() {
                Ok(Exponent::Finite(s)) => s,
                _ => return crude,
            };
            crude.min(frank_wolfe_upper(x.weights(), u, s, qc))
        }
        _ => crude,
    }
}

/// Frank–Wolfe upper bound for the concave maximization of
/// F(β) = (Σ_ω μ_ω (Σ_k β_k |u_k(ω)|^{q'})^{s/q'})^{1/s} over the simplex, s ≤ q'.
fn frank_wolfe_upper(mu: &[f64], u: &[Vec<f64>], s: f64, qc: f64) -> f64 {
    let n = u.len();
    let c: Vec<Vec<f64>> = u.iter().map(|uk| uk.iter().map(|v| v.abs().powf(qc)).collect()).collect();
    let e = s / qc;
    let h = |beta: &[f64]| -> Vec<f64> {
        (0..mu.len()).map(|w| (0..n).map(|k| beta[k] * c[k][w]).sum()).collect()
    };
    let g = |hv: &[f64]| -> f64 { hv.iter().zip(mu).map(|(h, m)| m * h.powf(e)).sum() };
    let f = |beta: &[f64]| g(&h(beta)).powf(1.0 / s);
    let mut beta = vec![1.0 / n as f64; n];
    let mut best_upper = f64::INFINITY;
    for _ in 0..300 {
        let hv = h(&beta);
        let gv = g(&hv);
        if gv <= 0.0 {
            return 0.0;
        }
        let fv = gv.powf(1.0 / s);
        let scale = fv / (s * gv);
        let grad: Vec<f64> = (0..n)
            .map(|k| {
                scale
                    * (0..mu.len())
                        .filter(|w| c[k][*w] > 0.0)
                        .map(|w| mu[w] * e * hv[w].powf(e - 1.0) * c[k][w])
                        .sum::<f64>()
            })
            .collect();
        if grad.iter().any(|v| !v.is_finite()) {
            break;
        }
        let (kmax, gmax) = grad.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, v)| if *v > a.1 { (k, *v) } else { a });
        let gb: f64 = grad.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let upper = fv + (gmax - gb).max(0.0);
        best_upper = best_upper.min(upper);
        if upper - fv <= 1e-13 * (1.0 + fv) {
            break;
        }
        let mut target = vec![0.0; n];
        target[kmax] = 1.0;
        let at = |t: f64| -> Vec<f64> { beta.iter().zip(&target).map(|(b, v)| (1.0 - t) * b + t * v).collect() };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(&at(m1)) < f(&at(m2)) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let t = 0.5 * (lo + hi);
        if f(&at(t)) >= fv {
            beta = at(t);
        }
    }
    best_upper * (1.0 + 1e-12)
}

/// Lower bound for the Z-norm by pairing with the test family u_k = (‖a‖_{q'}/a_k) w_k, where
/// w norms (f_k/a_k) in X(ℓ_q), and with single-component functionals.
fn z_lower(x: &FunctionSpace, f: &[Vec<f64>], a: &[f64], q: Exponent) -> (f64, Vec<Vec<f64>>) {
    let qc = q.conjugate().expect("q >= 1");
    let mut best = (0.0, vec![vec![0.0; x.atoms()]; f.len()]);
    for (k, fk) in f.iter().enumerate() {
        if let Ok(w) = x.norming_of(fk) {
            let val = x.norm_of(fk);
            if val > best.0 {
                let mut u = vec![vec![0.0; x.atoms()]; f.len()];
                u[k] = w;
                best = (val, u);
            }
        }
    }
    let each: Result<Vec<Vec<f64>>> = f.iter().map(|fk| x.norming_of(fk)).collect();
    if let Ok(u) = each {
        let bound = z_dual_upper(x, &u, q);
        let pairing = family::pairing(x, &u, f);
        if bound > 0.0 && pairing / bound > best.0 {
            let c = 1.0 / bound;
            best = (pairing / bound, u.into_iter().map(|uk| uk.into_iter().map(|v| v * c).collect()).collect());
        }
    }
    let xs: Vec<Vec<f64>> = f.iter().zip(a).map(|(fi, ai)| fi.iter().map(|v| v / ai).collect()).collect();
    if let Ok(w) = family::norming(x, &xs, Mixed::tuple(q)) {
        let na = lp(a, qc);
        let u: Vec<Vec<f64>> = w.iter().zip(a).map(|(wk, ak)| wk.iter().map(|v| v * na / ak).collect()).collect();
        let pairing = family::pairing(x, &u, f);
        let bound = z_dual_upper(x, &u, q);
        if bound > 0.0 && pairing / bound > best.0 {
            let c = 1.0 / bound;
            best = (pairing / bound, u.into_iter().map(|uk| uk.into_iter().map(|v| v * c).collect()).collect());
        }
    }
    best
}

fn full_witness(v: &ZElement, active_u: Vec<Vec<f64>>) -> Result<VectorTuple> {
    let mut it = active_u.into_iter();
    let members = v
        .components
        .iter()
        .map(|f| if f.iter().any(|x| *x != 0.0) { it.next().unwrap() } else { vec![0.0; f.len()] })
        .collect();
    VectorTuple::new(v.space.clone(), members)
}

/// ‖v‖_Z = inf over positive a of ‖a‖_{q'} ‖(Σ|f_i/a_i|^q)^{1/q}‖_X. The lower witness is a
/// family u of norm at most one in Z*, paired through [`z_pairing`].
pub fn z_norm(v: &ZElement, q: Exponent, seed: u64) -> Result<NormEstimate> {
    require_q(q)?;
    let f = v.active();
    if f.is_empty() {
        return zero_estimate(&v.space, v.n());
    }
    let (a, upper) = z_scalings(&v.space, &f, q, seed);
    let (lower, u) = z_lower(&v.space, &f, &a, q);
    Ok(NormEstimate {
        lower: lower.min(upper),
        lower_witness: full_witness(v, u)?,
        upper: Some(upper),
        upper_kind: UpperKind::AnalyticBound("scaled-representation".into()),
        tolerance: 1e-9 * (1.0 + upper),
    })
}

fn calderon_value(x: &FunctionSpace, f: &[Vec<f64>], q: f64, qc: f64, s: &[f64], t: &[Vec<f64>]) -> f64 {
    let atoms = x.atoms();
    let mut gmax_sum = 0.0;
    let mut prof = vec![0.0; atoms];
    for (i, fi) in f.iter().enumerate() {
        let mut gmax = 0.0_f64;
        for w in 0..atoms {
            if fi[w] == 0.0 {
                continue;
            }
            let lg = s[i] + t[i][w];
            gmax = gmax.max(lg.exp());
            prof[w] += fi[w].abs().powf(q) * (-q / qc * lg).exp();
        }
        gmax_sum += gmax;
    }
    let h: Vec<f64> = prof.iter().map(|v| v.powf(1.0 / q)).collect();
    let r = gmax_sum.powf(1.0 / qc) * x.norm_of(&h);
    if r.is_finite() {
        r
    } else {
        f64::INFINITY
    }
}

/// inf ‖(g_i)‖_{ℓ_1(L_∞)}^{1−θ} ‖(h_i)‖_{ℓ_1(X^{(q)})}^θ over |f_i| ≤ g_i^{1−θ} h_i^θ, θ = 1/q.
/// The weights g_i range over all positive functions; h_i is then pointwise optimal.
pub fn calderon_product_norm(v: &ZElement, q: Exponent, seed: u64) -> Result<NormEstimate> {
    require_q(q)?;
    let x = &v.space;
    let f = v.active();
    if f.is_empty() {
        return zero_estimate(x, v.n());
    }
    let upper = match q {
        Exponent::Infinity => {
            f.iter().map(|fi| fi.iter().fold(0.0_f64, |m, t| m.max(t.abs()))).sum::<f64>()
        }
        Exponent::Finite(qv) if qv == 1.0 => {
            let s: Vec<f64> = (0..x.atoms()).map(|w| f.iter().map(|fi| fi[w].abs()).sum()).collect();
            x.norm_of(&s)
        }
        Exponent::Finite(qv) => {
            let qc = q.conjugate()?.value();
            let n = f.len();
            let atoms = x.atoms();
            let t0: Vec<Vec<f64>> = f
                .iter()
                .map(|fi| {
                    let logs: Vec<f64> = fi.iter().filter(|v| **v != 0.0).map(|v| v.abs().ln()).collect();
                    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
                    fi.iter().map(|v| if *v != 0.0 { v.abs().ln() - mean } else { 0.0 }).collect()
                })
                .collect();
            let pack = |s: &[f64], t: &[Vec<f64>]| -> Vec<f64> {
                let mut z = s.to_vec();
                for ti in t {
                    z.extend_from_slice(ti);
                }
                z
            };
            let unpack = |z: &[f64]| -> (Vec<f64>, Vec<Vec<f64>>) {
                let s = z[..n].to_vec();
                let t = (0..n).map(|i| z[n + i * atoms..n + (i + 1) * atoms].to_vec()).collect();
                (s, t)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let opts = SearchOptions { max_sweeps: 400, tol: 1e-13, random_dirs: 4, step0: 0.5 };
            let obj = |z: &[f64]| {
                let (s, t) = unpack(z);
                calderon_value(x, &f, qv, qc, &s, &t)
            };
            let (z, general) = minimize(obj, pack(&vec![0.0; n], &t0), &opts, &mut rng);
            // Raising g_i to its supremum never increases the product; then refit the levels.
            let (s, t) = unpack(&z);
            let levels: Vec<f64> = (0..n)
                .map(|i| {
                    (0..atoms).filter(|w| f[i][*w] != 0.0).map(|w| s[i] + t[i][w]).fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let flat = vec![vec![0.0; atoms]; n];
            let (_, polished) =
                minimize(|s: &[f64]| calderon_value(x, &f, qv, qc, s, &flat), levels, &opts, &mut rng);
            general.min(polished)
        }
    };
    let (a, _) = z_scalings(x, &f, q, seed);
    let (lower, u) = z_lower(x, &f, &a, q);
    Ok(NormEstimate {
        lower: lower.min(upper),
        lower_witness: full_witness(v, u)?,
        upper: Some(upper),
        upper_kind: UpperKind::AnalyticBound("calderon-decomposition".into()),
        tolerance: 1e-9 * (1.0 + upper),
    })
}

// ---------- Hahn–Banach extension ----------

/// An extension of an operator given on a subspace, with its regularity record.
#[derive(Debug, Clone, Serialize)]
pub struct Extension {
    pub operator: OperatorMatrix,
    /// Lower bound for ρ_{∞,q} of the operator restricted to the subspace.
    pub rho_before: f64,
    /// Lower estimate of ρ_{∞,q} of the extension.
    pub rho_after: f64,
    /// Analytic upper bound for ρ_{∞,q} of the extension, when available.
    pub rho_after_upper: Option<f64>,
    /// Certified lower bound for ρ_{∞,q} over all extensions.
    pub extension_lower: f64,
    pub agreement_residual: f64,
    pub iterations: usize,
}

fn rho_params(q: Exponent) -> (Mixed, Mixed) {
    (Mixed::tuple(q), Mixed::tuple(Exponent::Infinity))
}

fn rho_estimate(t: &OperatorMatrix, q: Exponent, seed: u64, warm: Option<Vec<Vec<f64>>>) -> Result<(f64, Vec<Vec<f64>>)> {
    rho_estimate_with(t, q, seed, warm, 8)
}

fn rho_estimate_with(
    t: &OperatorMatrix,
    q: Exponent,
    seed: u64,
    warm: Option<Vec<Vec<f64>>>,
    restarts: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let (input, output) = rho_params(q);
    let spec = RatioSpec { op: t, input, output, members: t.rows().max(1) };
    spec.multistart(restarts, seed, warm)
}

/// Lower bound for ρ_{∞,q} of `t` over tuples drawn from span(basis).
fn restricted_rho(t: &OperatorMatrix, basis: &DMatrix<f64>, q: Exponent, seed: u64) -> f64 {
    let (input, output) = rho_params(q);
    let members = t.rows().max(1);
    let d = basis.ncols();
    let n = basis.nrows();
    let spec = RatioSpec { op: t, input, output, members };
    let tuple = |c: &[f64]| -> Vec<Vec<f64>> {
        (0..members)
            .map(|m| (0..n).map(|i| (0..d).map(|j| basis[(i, j)] * c[m * d + j]).sum()).collect())
            .collect()
    };
    let obj = |c: &[f64]| {
        let r = spec.ratio(&tuple(c));
        if r.is_finite() {
            -r
        } else {
            0.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SearchOptions { max_sweeps: 200, tol: 1e-11, random_dirs: 2, step0: 0.5 };
    let mut best = 0.0_f64;
    for k in 0..(2 * d * members).max(8) {
        let c0: Vec<f64> = if k < d {
            let mut c = vec![0.0; d * members];
            c[k] = 1.0;
            c
        } else {
            (0..d * members).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let (_, v) = minimize(obj, c0, &opts, &mut rng);
        best = best.max(-v);
    }
    best
}

struct Frame {
    /// T_B B^+ as codomain × ambient.
    base: Vec<Vec<f64>>,
    /// Orthonormal basis of ker B^T, ambient × m.
    comp: Vec<Vec<f64>>,
}

impl Frame {
    fn new(b: &DMatrix<f64>, images: &[Vec<f64>], rows: usize) -> Result<Self> {
        let n = b.nrows();
        let d = b.ncols();
        let gram = b.transpose() * b;
        let ginv = gram.try_inverse().ok_or(Error::RankDeficient { rank: d.saturating_sub(1), len: d })?;
        let pinv = ginv * b.transpose();
        let base = (0..rows)
            .map(|k| (0..n).map(|a| (0..d).map(|j| images[j][k] * pinv[(j, a)]).sum()).collect())
            .collect();
        let eig = SymmetricEigen::new(b * b.transpose());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));
        let comp = (0..n).map(|a| order[..n - d].iter().map(|c| eig.eigenvectors[(a, *c)]).collect()).collect();
        Ok(Frame { base, comp })
    }

    fn m(&self) -> usize {
        self.comp.first().map_or(0, |r| r.len())
    }

    fn operator(&self, s: &[f64]) -> Vec<Vec<f64>> {
        let m = self.m();
        self.base
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, v)| v + (0..m).map(|j| s[k * m + j] * self.comp[a][j]).sum::<f64>())
                    .collect()
            })
            .collect()
    }
}

/// A supporting cut of S ↦ ρ_{∞,q}(T_S) from a tuple: (constant, coefficients on S).
fn cut_from(frame: &Frame, x: &[Vec<f64>], s: &[f64], space: &FunctionSpace, q: Exponent) -> Option<(f64, Vec<f64>)> {
    let den = family::value(space, x, Mixed::tuple(q));
    if !(den > 0.0) {
        return None;
    }
    let t = frame.operator(s);
    let rows = t.len();
    let m = frame.m();
    let ys: Vec<Vec<f64>> = x.iter().map(|xi| t.iter().map(|r| r.iter().zip(xi).map(|(a, b)| a * b).sum()).collect()).collect();
    let mut pick = vec![0usize; rows];
    let mut vals = vec![0.0; rows];
    for k in 0..rows {
        for (i, y) in ys.iter().enumerate() {
            if y[k].abs() > vals[k] {
                vals[k] = y[k].abs();
                pick[k] = i;
            }
        }
    }
    let c = weighted_norming(None, &vals, q);
    let mut constant = 0.0;
    let mut coefs = vec![0.0; rows * m];
    for k in 0..rows {
        let xi = &x[pick[k]];
        let sg = ys[pick[k]][k].signum() * c[k] / den;
        if sg == 0.0 {
            continue;
        }
        constant += sg * frame.base[k].iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..m {
            coefs[k * m + j] += sg * (0..xi.len()).map(|a| frame.comp[a][j] * xi[a]).sum::<f64>();
        }
    }
    Some((constant, coefs))
}

/// Extends T, given by the images of the subspace basis in ℓ_q^n, to the ambient space,
/// minimizing ρ_{∞,q} over T∘Π + S∘(I − Π) by a cutting-plane method.
pub fn hahn_banach_extend(x0: &Subspace, images: &[Vec<f64>], q: Exponent, seed: u64) -> Result<Extension> {
    require_q(q)?;
    let ambient = x0.ambient();
    match ambient.kind() {
        NormKind::WeightedLr(r) if *r >= q && ambient.is_banach_lr() => {}
        _ => {
            return Err(Error::ExponentRelation(format!(
                "extension needs a weighted L_r ambient space with r >= q = {q}"
            )))
        }
    }
    if images.len() != x0.dim() {
        return Err(Error::DimensionMismatch { expected: x0.dim(), got: images.len() });
    }
    let rows = images.first().map_or(0, |v| v.len());
    if rows == 0 || images.iter().any(|v| v.len() != rows) {
        return Err(Error::InvalidArgument("images must share a positive length".into()));
    }
    let codomain = FunctionSpace::lr(rows, q)?;
    let b = x0.matrix();
    let frame = Frame::new(&b, images, rows)?;
    let m = frame.m();
    let build = |s: &[f64]| OperatorMatrix::new(ambient.clone(), codomain.clone(), frame.operator(s));
    let t0 = build(&vec![0.0; rows * m])?;
    let rho_before = restricted_rho(&t0, &b, q, seed);
    if m == 0 || t0.is_zero() {
        let (after, _) = rho_estimate(&t0, q, seed, None)?;
        return finish(t0, x0, images, q, rho_before, after, rho_before, 0);
    }

    let (rho0, wit0) = rho_estimate(&t0, q, seed, None)?;
    let upper0 = rho_analytic_upper(&t0, Exponent::Infinity, q)?.map_or(2.0 * rho0, |u| u.0.max(rho0));
    let col_mass: f64 = (0..ambient.atoms()).map(|a| ambient.indicator_norm(a)).sum();
    let base_c = frame.base.iter().flatten().fold(0.0_f64, |mx, v| mx.max(v.abs())) * ambient.atoms() as f64;
    let bx = 2.0 * (upper0 * col_mass + base_c) + 1e-9;

    let mut lpm = LinearProgram::default();
    let svars: Vec<usize> = (0..rows * m).map(|_| lpm.var(0.0, -bx, bx)).collect();
    let tau = lpm.var(1.0, 0.0, f64::INFINITY);
    let add = |lpm: &mut LinearProgram, cut: (f64, Vec<f64>)| {
        let mut coefs: Vec<(usize, f64)> = svars.iter().zip(&cut.1).map(|(v, c)| (*v, -c)).collect();
        coefs.push((tau, 1.0));
        lpm.row(coefs, Cmp::Ge, cut.0);
    };
    let zero_s = vec![0.0; rows * m];
    let mut seeds: Vec<Vec<Vec<f64>>> = vec![wit0.clone()];
    for a in 0..ambient.atoms() {
        for sg in [1.0, -1.0] {
            let mut e = vec![0.0; ambient.atoms()];
            e[a] = sg;
            seeds.push(vec![e]);
        }
    }
    for j in 0..m {
        for sg in [1.0, -1.0] {
            seeds.push(vec![(0..ambient.atoms()).map(|a| sg * frame.comp[a][j]).collect()]);
        }
    }
    for x in &seeds {
        for k in 0..rows {
            let mut s = vec![0.0; rows * m];
            for j in 0..m {
                s[k * m + j] = bx;
            }
            for probe in [s.clone(), s.iter().map(|v| -v).collect(), zero_s.clone()] {
                if let Some(c) = cut_from(&frame, x, &probe, ambient, q) {
                    add(&mut lpm, c);
                }
            }
        }
    }

    let mut best = (rho0, zero_s.clone());
    let mut lower = 0.0_f64;
    let mut warm = wit0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut iters = 0;
    while iters < KELLEY_MAX_ITERS {
        iters += 1;
        let (val, sol) = lpm.minimize()?;
        lower = lower.max(val);
        let s: Vec<f64> = svars.iter().map(|v| sol[*v]).collect();
        let t = build(&s)?;
        let (mut est, mut wit) = rho_estimate(&t, q, rng.random(), Some(warm.clone()))?;
        if est <= lower * (1.0 + KELLEY_GAP) + 1e-12 {
            let (e2, w2) = rho_estimate_with(&t, q, rng.random(), Some(wit.clone()), 32)?;
            if e2 > est {
                (est, wit) = (e2, w2);
            }
        }
        if est < best.0 {
            best = (est, s.clone());
        }
        if best.0 <= lower * (1.0 + KELLEY_GAP) + 1e-12 {
            break;
        }
        match cut_from(&frame, &wit, &s, ambient, q) {
            Some(c) => add(&mut lpm, c),
            None => break,
        }
        warm = wit;
    }
    let t = build(&best.1)?;
    let (after, _) = rho_estimate_with(&t, q, seed, None, 32)?;
    finish(t, x0, images, q, rho_before, after.max(best.0), lower, iters)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    t: OperatorMatrix,
    x0: &Subspace,
    images: &[Vec<f64>],
    q: Exponent,
    rho_before: f64,
    rho_after: f64,
    extension_lower: f64,
    iterations: usize,
) -> Result<Extension> {
    let agreement_residual = agreement(&t, x0, images);
    let rho_after_upper = rho_analytic_upper(&t, Exponent::Infinity, q)?.map(|u| u.0);
    Ok(Extension {
        operator: t,
        rho_before,
        rho_after,
        rho_after_upper,
        extension_lower: extension_lower.max(rho_before),
        agreement_residual,
        iterations,
    })
}

fn agreement(t: &OperatorMatrix, x0: &Subspace, images: &[Vec<f64>]) -> f64 {
    x0.basis()
        .iter()
        .zip(images)
        .map(|(b, y)| t.apply_of(b).iter().zip(y).fold(0.0_f64, |m, (a, c)| m.max((a - c).abs())))
        .fold(0.0, f64::max)
}

// ---------- dyadic maps ----------

/// Dyadic resolution 2^level with exponent q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicLevel {
    pub level: u32,
    pub q: Exponent,
}

impl DyadicLevel {
    pub fn new(level: u32, q: Exponent) -> Result<Self> {
        require_q(q)?;
        if level > 30 {
            return Err(Error::InvalidArgument("dyadic level above 30".into()));
        }
        Ok(DyadicLevel { level, q })
    }

    pub fn blocks(&self) -> usize {
        1 << self.level
    }

    fn check(&self, atoms: usize) -> Result<usize> {
        let b = self.blocks();
        if atoms == 0 || atoms % b != 0 {
            return Err(Error::Divisibility { level: self.level, atoms });
        }
        Ok(atoms / b)
    }
}

/// P_n f = 2^{n/q'} Σ_i (∫_{I_i} f dν) e_i from uniform L_q^N to ℓ_q^{2^n}.
pub fn dyadic_pn(level: DyadicLevel, atoms: usize) -> Result<OperatorMatrix> {
    let per = level.check(atoms)?;
    let c = 2f64.powf(level.level as f64 * level.q.conjugate()?.recip()) / atoms as f64;
    let entries = (0..level.blocks())
        .map(|i| (0..atoms).map(|w| if w / per == i { c } else { 0.0 }).collect())
        .collect();
    OperatorMatrix::new(FunctionSpace::uniform_lr(atoms, level.q)?, FunctionSpace::lr(level.blocks(), level.q)?, entries)
}

/// J_n e_i = 2^{n/q} χ_{I_i} from ℓ_q^{2^n} to uniform L_q^N.
pub fn dyadic_jn(level: DyadicLevel, atoms: usize) -> Result<OperatorMatrix> {
    let per = level.check(atoms)?;
    let c = 2f64.powf(level.level as f64 * level.q.recip());
    let entries = (0..atoms)
        .map(|w| (0..level.blocks()).map(|i| if w / per == i { c } else { 0.0 }).collect())
        .collect();
    OperatorMatrix::new(FunctionSpace::lr(level.blocks(), level.q)?, FunctionSpace::uniform_lr(atoms, level.q)?, entries)
}

/// Extends T: X_0 → L_q^M (uniform), given by the images of the basis of X_0, through
/// T̃ = J_n ∘ (extension of P_n ∘ T).
pub fn extend_operator_lq(x0: &Subspace, images: &[Vec<f64>], level: DyadicLevel, seed: u64) -> Result<Extension> {
    let q = level.q;
    let m_atoms = images.first().map_or(0, |v| v.len());
    if images.len() != x0.dim() || images.iter().any(|v| v.len() != m_atoms) {
        return Err(Error::DimensionMismatch { expected: x0.dim(), got: images.len() });
    }
    let pn = dyadic_pn(level, m_atoms)?;
    let jn = dyadic_jn(level, m_atoms)?;
    let projected: Vec<Vec<f64>> = images.iter().map(|y| pn.apply_of(y)).collect();
    let ext = hahn_banach_extend(x0, &projected, q, seed)?;
    let lifted = jn.compose(&ext.operator)?;
    let target = FunctionSpace::uniform_lr(m_atoms, q)?;
    let b = x0.matrix();
    let direct = Frame::new(&b, images, m_atoms)?;
    let t_on_x0 = OperatorMatrix::new(x0.ambient().clone(), target, direct.operator(&vec![0.0; m_atoms * direct.m()]))?;
    let rho_before = restricted_rho(&t_on_x0, &b, q, seed);
    let (after, _) = rho_estimate(&lifted, q, seed, None)?;
    let agreement_residual = agreement(&lifted, x0, images);
    let rho_after_upper = rho_analytic_upper(&lifted, Exponent::Infinity, q)?.map(|u| u.0);
    Ok(Extension {
        operator: lifted,
        rho_before,
        rho_after: after,
        rho_after_upper,
        extension_lower: ext.extension_lower,
        agreement_residual,
        iterations: ext.iterations,
    })
}

#[cfg(test)]
mod tests;
