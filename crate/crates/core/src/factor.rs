//! Maurey–Rosenthal weights by cutting planes, strong factorization through L_r spaces, the
//! matrix inequality constant and Marcinkiewicz–Zygmund coincidence sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ascent::{operator_norm, operator_norm_with, RatioSpec};
use crate::calculus::VectorTuple;
use crate::error::{Counterexample, Error, Result};
use crate::exponent::Exponent;
use crate::family::{self, Mixed};
use crate::lp::{Cmp, LinearProgram};
use crate::regular::{rho_analytic_upper, rho_lower_bound, NormEstimate, RegularityParams, UpperKind};
use crate::scalar::lp;
use crate::space::{FunctionSpace, LatticeVector, NormKind, OperatorMatrix};

pub const DEFAULT_MAX_CUTS: usize = 200;
const STOP_TOL: f64 = 1e-6;
const ACCEPT_TOL: f64 = 1e-2;
const FLOOR: f64 = 1e-12;
const STEP: f64 = 0.5;

/// T = M_g ∘ inner ∘ M_f.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationResult {
    pub f: LatticeVector,
    pub g: LatticeVector,
    pub inner: OperatorMatrix,
    pub constant: f64,
    pub residual: f64,
    pub cuts: usize,
    /// Best violation ratio ‖inner‖/constant seen so far, per iteration.
    pub violation_history: Vec<f64>,
}

fn lr_exponent(sp: &FunctionSpace, what: &str) -> Result<Exponent> {
    match sp.kind() {
        NormKind::WeightedLr(r) => Ok(*r),
        NormKind::Custom(_) => Err(Error::Unsupported(format!("{what} must be a weighted L_r space"))),
    }
}

fn ge(a: Exponent, b: Exponent) -> bool {
    a >= b || a.approx_eq(b)
}

/// Weight side of the Ky Fan problem: weights w0 in the unit ball of L_ball(weights), entering
/// the constraints as (Σ_k coef_k w0_k)^expo.
#[derive(Debug, Clone)]
struct Side {
    weights: Vec<f64>,
    expo: f64,
    ball: Exponent,
}

impl Side {
    fn active(&self) -> bool {
        self.expo > 0.0
    }

    fn cap(&self, k: usize) -> f64 {
        match self.ball {
            Exponent::Infinity => 1.0,
            Exponent::Finite(a) => self.weights[k].powf(-1.0 / a),
        }
    }

    fn norm(&self, w: &[f64]) -> f64 {
        crate::scalar::weighted_lp(Some(&self.weights), w, self.ball)
    }

    fn uniform(&self) -> Vec<f64> {
        let n = self.weights.len();
        let one = vec![1.0; n];
        if !self.active() {
            return one;
        }
        let c = self.norm(&one);
        one.into_iter().map(|v| v / c).collect()
    }

    fn normalized(&self, w: &[f64]) -> Vec<f64> {
        if !self.active() {
            return vec![1.0; w.len()];
        }
        let c = self.norm(w).max(1.0);
        w.iter().enumerate().map(|(k, v)| (v / c).max(FLOOR * self.cap(k))).collect()
    }

    fn factor(&self, w0: &[f64]) -> Vec<f64> {
        w0.iter().map(|v| if self.active() { v.powf(self.expo) } else { 1.0 }).collect()
    }
}

/// One constraint c ≤ C·(Σ a_k f0_k)^{eA}·(Σ b_k g0_k)^{eB}.
#[derive(Debug, Clone)]
struct Cut {
    c: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

fn dotp(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(u, v)| u * v).sum()
}

impl Cut {
    fn rhs(&self, sa: &Side, sb: &Side, f0: &[f64], g0: &[f64], constant: f64) -> f64 {
        let pa = if sa.active() { dotp(&self.a, f0).powf(sa.expo) } else { 1.0 };
        let pb = if sb.active() { dotp(&self.b, g0).powf(sb.expo) } else { 1.0 };
        constant * pa * pb
    }

    fn slack(&self, sa: &Side, sb: &Side, f0: &[f64], g0: &[f64], constant: f64) -> f64 {
        let r = self.rhs(sa, sb, f0, g0, constant);
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        r.ln() - self.c.ln()
    }
}

/// Finds the most violated constraint at weights (f, g): returns ‖inner‖-type value and a cut.
type Oracle<'a> = dyn Fn(&[f64], &[f64], &[f64], &[f64], u64) -> Result<(f64, Option<Cut>)> + Sync + 'a;

struct Engine<'a> {
    a: Side,
    b: Side,
    constant: f64,
    max_cuts: usize,
    seed: u64,
    oracle: &'a Oracle<'a>,
}

struct EngineOutcome {
    f0: Vec<f64>,
    g0: Vec<f64>,
    cuts: usize,
    history: Vec<f64>,
}

impl Engine<'_> {
    fn run(&self) -> Result<EngineOutcome> {
        let (n, m) = (self.a.weights.len(), self.b.weights.len());
        let (mut f0, mut g0) = (self.a.uniform(), self.b.uniform());
        let mut cuts: Vec<Cut> = vec![];
        let mut rows: Vec<(usize, f64, f64)> = vec![];
        let mut tangents_a: Vec<Vec<f64>> = vec![];
        let mut tangents_b: Vec<Vec<f64>> = vec![];
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        let mut history = vec![];
        for it in 0..self.max_cuts {
            let (fa, gb) = (self.a.factor(&f0), self.b.factor(&g0));
            let (v, cut) = (self.oracle)(&f0, &g0, &fa, &gb, self.seed.wrapping_add(it as u64))?;
            let ratio = v / self.constant;
            if best.as_ref().is_none_or(|b| ratio < b.0) {
                best = Some((ratio, f0.clone(), g0.clone()));
            }
            history.push(best.as_ref().expect("set").0);
            if ratio <= 1.0 + STOP_TOL {
                return Ok(EngineOutcome { f0, g0, cuts: cuts.len(), history });
            }
            if let Some(c) = cut.filter(|c| c.c > 0.0) {
                cuts.push(c);
            }
            let lin = |k: usize, f0: &[f64], g0: &[f64]| {
                let aa = if self.a.active() { dotp(&cuts[k].a, f0) } else { 1.0 };
                let bb = if self.b.active() { dotp(&cuts[k].b, g0) } else { 1.0 };
                (k, aa.max(1e-300), bb.max(1e-300))
            };
            if let Some(k) = cuts.len().checked_sub(1) {
                rows.push(lin(k, &f0, &g0));
            }
            let mut viol: Vec<(f64, usize)> = (0..cuts.len().saturating_sub(1))
                .map(|k| (cuts[k].slack(&self.a, &self.b, &f0, &g0, self.constant), k))
                .filter(|(s, _)| *s < 0.0)
                .collect();
            viol.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for (_, k) in viol.into_iter().take(3) {
                rows.push(lin(k, &f0, &g0));
            }
            if rows.is_empty() {
                break;
            }

            let mut prog = LinearProgram::default();
            let fv: Vec<usize> = (0..if self.a.active() { n } else { 0 })
                .map(|k| prog.var(0.0, FLOOR * self.a.cap(k), self.a.cap(k)))
                .collect();
            let gv: Vec<usize> = (0..if self.b.active() { m } else { 0 })
                .map(|k| prog.var(0.0, FLOOR * self.b.cap(k), self.b.cap(k)))
                .collect();
            let tau = prog.var(1.0, -1e6, 1e6);
            for &(k, astar, bstar) in &rows {
                let cut = &cuts[k];
                let mut coefs = vec![(tau, -1.0)];
                let mut rhs = (cut.c / self.constant).ln();
                if self.a.active() {
                    coefs.extend(fv.iter().enumerate().map(|(j, &v)| (v, self.a.expo * cut.a[j] / astar)));
                    rhs += self.a.expo * (1.0 - astar.ln());
                }
                if self.b.active() {
                    coefs.extend(gv.iter().enumerate().map(|(j, &v)| (v, self.b.expo * cut.b[j] / bstar)));
                    rhs += self.b.expo * (1.0 - bstar.ln());
                }
                let scale = coefs.iter().fold(0.0_f64, |m, (_, c)| m.max(c.abs()));
                let coefs = coefs.into_iter().filter(|(_, c)| c.abs() > 1e-12 * scale).map(|(v, c)| (v, c / scale)).collect();
                prog.row(coefs, Cmp::Ge, rhs / scale);
            }
            for (side, vars, tangents) in [(&self.a, &fv, &tangents_a), (&self.b, &gv, &tangents_b)] {
                if !side.active() {
                    continue;
                }
                match side.ball {
                    Exponent::Finite(al) if al == 1.0 => {
                        prog.row(vars.iter().zip(&side.weights).map(|(&v, w)| (v, *w)).collect(), Cmp::Le, 1.0)
                    }
                    Exponent::Finite(_) => {
                        for t in tangents {
                            prog.row(vars.iter().zip(t).map(|(&v, c)| (v, *c)).collect(), Cmp::Le, 1.0);
                        }
                    }
                    Exponent::Infinity => {}
                }
            }
            let (tv, sol) = prog.maximize()?;
            if tv < -(1.0 + ACCEPT_TOL).ln() {
                let (_, bf, bg) = best.clone().expect("set");
                let worst = cuts
                    .iter()
                    .min_by(|x, y| {
                        x.slack(&self.a, &self.b, &bf, &bg, self.constant)
                            .total_cmp(&y.slack(&self.a, &self.b, &bf, &bg, self.constant))
                    })
                    .expect("cuts exist");
                return Err(self.infeasible(worst, &bf, &bg, cuts.len(), history.last().copied().unwrap_or(f64::NAN)));
            }
            let raw_f: Vec<f64> = if self.a.active() { fv.iter().map(|&v| sol[v]).collect() } else { vec![1.0; n] };
            let raw_g: Vec<f64> = if self.b.active() { gv.iter().map(|&v| sol[v]).collect() } else { vec![1.0; m] };
            for (side, raw, tangents) in [(&self.a, &raw_f, &mut tangents_a), (&self.b, &raw_g, &mut tangents_b)] {
                if let Exponent::Finite(al) = side.ball {
                    if side.active() && al > 1.0 && side.norm(raw) > 1.0 + 1e-9 {
                        let hat = raw.iter().map(|v| v / side.norm(raw)).collect::<Vec<_>>();
                        tangents.push(hat.iter().zip(&side.weights).map(|(h, w)| w * h.powf(al - 1.0)).collect());
                    }
                }
            }
            let (_, cf, cg) = best.as_ref().expect("set");
            f0 = toward(cf, &self.a.normalized(&raw_f), STEP);
            g0 = toward(cg, &self.b.normalized(&raw_g), STEP);
        }
        let (ratio, bf, bg) = best.expect("at least one oracle call");
        if ratio <= 1.0 + ACCEPT_TOL {
            return Ok(EngineOutcome { f0: bf, g0: bg, cuts: cuts.len(), history });
        }
        let worst = cuts
            .iter()
            .min_by(|x, y| {
                x.slack(&self.a, &self.b, &bf, &bg, self.constant)
                    .total_cmp(&y.slack(&self.a, &self.b, &bf, &bg, self.constant))
            })
            .ok_or_else(|| Error::InvalidArgument("no constraint could be generated".into()))?;
        Err(self.infeasible(worst, &bf, &bg, cuts.len(), ratio))
    }

    fn infeasible(&self, cut: &Cut, f0: &[f64], g0: &[f64], ncuts: usize, ratio: f64) -> Error {
        Error::Infeasible {
            constant: self.constant,
            cuts: ncuts,
            violation: ratio,
            witness: Box::new(Counterexample {
                x: cut.x.clone(),
                y_dual: cut.y.clone(),
                lhs: cut.c,
                rhs_at_best_weights: cut.rhs(&self.a, &self.b, f0, g0, self.constant),
            }),
        }
    }
}

fn toward(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

fn inner_operator(t: &OperatorMatrix, f: &[f64], g: &[f64], domain: FunctionSpace, codomain: FunctionSpace) -> Result<OperatorMatrix> {
    let entries = t
        .entries()
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v / (g[i] * f[j])).collect())
        .collect();
    OperatorMatrix::new(domain, codomain, entries)
}

fn reconstruction_residual(t: &OperatorMatrix, f: &[f64], g: &[f64], inner: &OperatorMatrix) -> f64 {
    let scale = t.entries().iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let live: Vec<bool> = (0..t.cols()).map(|j| t.entries().iter().any(|r| r[j] != 0.0)).collect();
    let mut dev = 0.0_f64;
    for (i, row) in t.entries().iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !live[j] && inner.entries()[i][j] == 0.0 {
                continue;
            }
            dev = dev.max((g[i] * inner.entries()[i][j] * f[j] - v).abs());
        }
    }
    if scale > 0.0 { dev / scale } else { dev }
}

fn finish(
    t: &OperatorMatrix,
    sides: (&Side, &Side),
    out: EngineOutcome,
    spaces: (FunctionSpace, FunctionSpace),
    constant: f64,
) -> Result<FactorizationResult> {
    let f = sides.0.factor(&out.f0);
    let g = sides.1.factor(&out.g0);
    let inner = inner_operator(t, &f, &g, spaces.0, spaces.1)?;
    let residual = reconstruction_residual(t, &f, &g, &inner);
    Ok(FactorizationResult {
        f: LatticeVector(f),
        g: LatticeVector(g),
        inner,
        constant,
        residual,
        cuts: out.cuts,
        violation_history: out.history,
    })
}

fn zero_result(t: &OperatorMatrix, domain: FunctionSpace, codomain: FunctionSpace) -> Result<FactorizationResult> {
    let (f, g) = (vec![1.0; t.cols()], vec![1.0; t.rows()]);
    let inner = OperatorMatrix::zero(domain, codomain);
    Ok(FactorizationResult {
        f: LatticeVector(f),
        g: LatticeVector(g),
        inner,
        constant: 0.0,
        residual: 0.0,
        cuts: 0,
        violation_history: vec![],
    })
}

fn recip_or_zero(p: Exponent) -> f64 {
    if p.is_infinite() { 0.0 } else { 1.0 / p.value() }
}

/// Ball exponent of the Köthe dual of L_{e/k}: (e/k)'.
fn ball_exponent(e: Exponent, k: Exponent) -> Result<Exponent> {
    let ratio = match (e, k) {
        (Exponent::Infinity, _) => Exponent::INF,
        (Exponent::Finite(a), Exponent::Finite(b)) => Exponent::new(a / b)?,
        (Exponent::Finite(_), Exponent::Infinity) => return Ok(Exponent::INF),
    };
    if ratio < Exponent::ONE && !ratio.approx_eq(Exponent::ONE) {
        return Err(Error::ExponentRelation(format!("power {e}/{k} must be at least 1")));
    }
    ratio.conjugate()
}

/// T = M_g ∘ T̂ ∘ M_f with T̂: L_p(μ) → L_s(ν) and ‖T̂‖ ≤ C, for a p-regular T from a
/// p-convex L_a(μ) into an s-concave L_b(ν).
pub fn maurey_rosenthal_factorize(
    t: &OperatorMatrix,
    p: Exponent,
    s: Exponent,
    c_hint: Option<f64>,
    max_cuts: usize,
    seed: u64,
) -> Result<FactorizationResult> {
    p.require_banach("p")?;
    s.require_banach("s")?;
    if p.is_infinite() {
        return Err(Error::InvalidExponent(f64::INFINITY, "p must be finite"));
    }
    if !ge(p, s) {
        return Err(Error::ExponentRelation(format!("need s <= p (got p = {p}, s = {s})")));
    }
    let a = lr_exponent(t.domain(), "domain")?;
    let b = lr_exponent(t.codomain(), "codomain")?;
    if !ge(a, p) || !ge(s, b) {
        return Err(Error::ExponentRelation(format!(
            "domain exponent {a} must be >= p = {p} and codomain exponent {b} <= s = {s}"
        )));
    }
    let dom = FunctionSpace::weighted_lr(t.domain().weights().to_vec(), p)?;
    let cod = FunctionSpace::weighted_lr(t.codomain().weights().to_vec(), s)?;
    if t.is_zero() {
        return zero_result(t, dom, cod);
    }
    let constant = match c_hint {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(Error::InvalidArgument(format!("constant must be positive, got {c}"))),
        None => rho_analytic_upper(t, p, p)?.map(|x| x.0).ok_or_else(|| {
            Error::InvalidArgument("no analytic bound for the regularity constant; pass one".into())
        })?,
    };
    let sc = s.conjugate()?;
    let side_a = Side { weights: t.domain().weights().to_vec(), expo: 1.0 / p.value(), ball: ball_exponent(a, p)? };
    let side_b = Side {
        weights: t.codomain().weights().to_vec(),
        expo: recip_or_zero(sc),
        ball: if sc.is_infinite() { Exponent::INF } else { ball_exponent(b.conjugate()?, sc)? },
    };
    let (mu, nu) = (t.domain().weights().to_vec(), t.codomain().weights().to_vec());
    let oracle = |_f0: &[f64], _g0: &[f64], f: &[f64], g: &[f64], sd: u64| -> Result<(f64, Option<Cut>)> {
        let hat = inner_operator(t, f, g, dom.clone(), cod.clone())?;
        let bnd = operator_norm_with(&hat, 16, sd)?;
        let u: Vec<f64> = bnd.witness.clone();
        let x: Vec<f64> = u.iter().zip(f).map(|(v, w)| v / w).collect();
        let image = hat.apply_of(&u);
        if image.iter().all(|v| *v == 0.0) {
            return Ok((bnd.lower, None));
        }
        let w = cod.norming_of(&image)?;
        let y: Vec<f64> = w.iter().zip(g).map(|(v, h)| v / h).collect();
        let tx = t.apply_of(&x);
        let c: f64 = tx.iter().zip(&y).zip(&nu).map(|((a, b), n)| n * (a * b).abs()).sum();
        let ca: Vec<f64> = x.iter().zip(&mu).map(|(v, m)| m * v.abs().powf(p.value())).collect();
        let cb: Vec<f64> = match sc {
            Exponent::Finite(e) => y.iter().zip(&nu).map(|(v, n)| n * v.abs().powf(e)).collect(),
            Exponent::Infinity => vec![0.0; y.len()],
        };
        Ok((bnd.lower, Some(Cut { c, a: ca, b: cb, x: vec![x], y: vec![y] })))
    };
    let engine = Engine { a: side_a.clone(), b: side_b.clone(), constant, max_cuts, seed, oracle: &oracle };
    let out = engine.run()?;
    finish(t, (&side_a, &side_b), out, (dom, cod), constant)
}

/// Lower bound for the best K in ‖(Σ_i(Σ_j|Tx_ij|^p)^{r/p})^{1/r}‖ ≤ K‖(Σ_i(Σ_j|x_ij|^q)^{r/q})^{1/r}‖
/// over n×m matrices; the modulus gives an upper bound.
pub fn matrix_inequality_constant(
    t: &OperatorMatrix,
    p: Exponent,
    q: Exponent,
    r: Exponent,
    sizes: (usize, usize),
    seed: u64,
) -> Result<NormEstimate> {
    let params = RegularityParams::new(p, q)?;
    r.require_banach("r")?;
    if !ge(p, q) {
        return Err(Error::ExponentRelation(format!("need q <= p (got p = {p}, q = {q})")));
    }
    let (n, m) = sizes;
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("matrix sizes must be positive".into()));
    }
    let _ = params;
    let b = operator_norm(t)?;
    let mut warm = vec![vec![0.0; t.cols()]; n * m];
    warm[0] = b.witness.clone();
    let spec = RatioSpec {
        op: t,
        input: Mixed::Lattice { outer: r, inner: q, cols: m },
        output: Mixed::Lattice { outer: r, inner: p, cols: m },
        members: n * m,
    };
    let (lower, wit) = spec.multistart(crate::regular::DEFAULT_RESTARTS, seed, Some(warm))?;
    let modulus = if t.is_nonnegative() { b } else { operator_norm(&t.modulus())? };
    let upper = modulus.upper;
    Ok(NormEstimate {
        lower: lower.min(upper),
        lower_witness: VectorTuple::new(t.domain().clone(), wit)?,
        upper: Some(upper),
        upper_kind: UpperKind::AnalyticBound("modulus".into()),
        tolerance: 1e-9 * (1.0 + lower),
    })
}

/// T = M_g ∘ T̂ ∘ M_f with T̂: L_r(μ) → L_r(ν) and ρ_{p,q}(T̂) ≤ K.
pub fn strong_factorize_lr(
    t: &OperatorMatrix,
    p: Exponent,
    q: Exponent,
    r: Exponent,
    k_hint: Option<f64>,
    max_cuts: usize,
    seed: u64,
) -> Result<FactorizationResult> {
    let params = RegularityParams::new(p, q)?;
    r.require_banach("r")?;
    if !ge(p, q) {
        return Err(Error::ExponentRelation(format!("need q <= p (got p = {p}, q = {q})")));
    }
    let a = lr_exponent(t.domain(), "domain")?;
    let b = lr_exponent(t.codomain(), "codomain")?;
    if !ge(a, r) || !ge(r, b) {
        return Err(Error::ExponentRelation(format!(
            "domain exponent {a} must be >= r = {r} and codomain exponent {b} <= r"
        )));
    }
    let dom = FunctionSpace::weighted_lr(t.domain().weights().to_vec(), r)?;
    let cod = FunctionSpace::weighted_lr(t.codomain().weights().to_vec(), r)?;
    if t.is_zero() {
        return zero_result(t, dom, cod);
    }
    let members = 2;
    let constant = match k_hint {
        Some(k) if k > 0.0 => k,
        Some(k) => return Err(Error::InvalidArgument(format!("constant must be positive, got {k}"))),
        None => matrix_inequality_constant(t, p, q, r, (1, members), seed)?.upper_or_inf(),
    };
    let rc = r.conjugate()?;
    let pc = p.conjugate()?;
    let side_a = Side {
        weights: t.domain().weights().to_vec(),
        expo: recip_or_zero(r),
        ball: if r.is_infinite() { Exponent::INF } else { ball_exponent(a, r)? },
    };
    let side_b = Side {
        weights: t.codomain().weights().to_vec(),
        expo: recip_or_zero(rc),
        ball: if rc.is_infinite() { Exponent::INF } else { ball_exponent(b.conjugate()?, rc)? },
    };
    let (mu, nu) = (t.domain().weights().to_vec(), t.codomain().weights().to_vec());
    let oracle = |_f0: &[f64], _g0: &[f64], f: &[f64], g: &[f64], sd: u64| -> Result<(f64, Option<Cut>)> {
        let hat = inner_operator(t, f, g, dom.clone(), cod.clone())?;
        let est = rho_lower_bound(&hat, params, members, sd, 8)?;
        let u = est.lower_witness.members().to_vec();
        let image: Vec<Vec<f64>> = u.iter().map(|v| hat.apply_of(v)).collect();
        if image.iter().flatten().all(|v| *v == 0.0) {
            return Ok((est.lower, None));
        }
        let w = family::norming(&cod, &image, Mixed::tuple(p))?;
        let xs: Vec<Vec<f64>> = u.iter().map(|v| v.iter().zip(f).map(|(a, b)| a / b).collect()).collect();
        let ys: Vec<Vec<f64>> = w.iter().map(|v| v.iter().zip(g).map(|(a, b)| a / b).collect()).collect();
        let mut c = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let tx = t.apply_of(x);
            c += tx.iter().zip(y).zip(&nu).map(|((a, b), n)| n * (a * b).abs()).sum::<f64>();
        }
        let profile = |fam: &[Vec<f64>], k: usize, e: Exponent| lp(&fam.iter().map(|v| v[k]).collect::<Vec<_>>(), e);
        let ca: Vec<f64> = (0..mu.len())
            .map(|k| if r.is_infinite() { 0.0 } else { mu[k] * profile(&xs, k, q).powf(r.value()) })
            .collect();
        let cb: Vec<f64> = (0..nu.len())
            .map(|k| if rc.is_infinite() { 0.0 } else { nu[k] * profile(&ys, k, pc).powf(rc.value()) })
            .collect();
        Ok((est.lower, Some(Cut { c, a: ca, b: cb, x: xs, y: ys })))
    };
    let engine = Engine { a: side_a.clone(), b: side_b.clone(), constant, max_cuts, seed, oracle: &oracle };
    let out = engine.run()?;
    finish(t, (&side_a, &side_b), out, (dom, cod), constant)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub residual: f64,
    pub inner_norm_est: f64,
    pub ok: bool,
}

/// Recomposes M_g ∘ inner ∘ M_f against T and estimates ‖inner‖, or ρ_{p,q}(inner) when
/// `regularity` is given.
pub fn verify_factorization(
    res: &FactorizationResult,
    t: &OperatorMatrix,
    regularity: Option<RegularityParams>,
) -> Result<VerifyReport> {
    if res.f.len() != t.cols() || res.g.len() != t.rows() {
        return Err(Error::DimensionMismatch { expected: t.cols() + t.rows(), got: res.f.len() + res.g.len() });
    }
    if res.inner.rows() != t.rows() || res.inner.cols() != t.cols() {
        return Err(Error::DimensionMismatch { expected: t.rows() * t.cols(), got: res.inner.rows() * res.inner.cols() });
    }
    let residual = reconstruction_residual(t, &res.f, &res.g, &res.inner);
    let nonneg = res.f.iter().chain(res.g.iter()).all(|v| *v >= 0.0);
    let est = match regularity {
        None => operator_norm_with(&res.inner, 32, 0x7e51)?.lower,
        Some(params) => rho_lower_bound(&res.inner, params, 2, 0x7e51, 16)?.lower,
    };
    let ok = nonneg && residual <= 1e-8 && est <= res.constant * (1.0 + ACCEPT_TOL);
    Ok(VerifyReport { residual, inner_norm_est: est, ok })
}

/// One cell of a Marcinkiewicz–Zygmund sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MzCell {
    pub p: Exponent,
    pub q: Exponent,
    pub r1: Exponent,
    pub r2: Exponent,
    pub coincidence_predicted: bool,
    pub observed_ratio: f64,
    pub n: usize,
    pub samples: usize,
}

/// Whether every operator L_{r1} → L_{r2} is (p,q)-regular by the six listed cases.
pub fn mz_predicted(p: Exponent, q: Exponent, r1: Exponent, r2: Exponent) -> bool {
    let (p, q, r1, r2) = (p.value(), q.value(), r1.value(), r2.value());
    if q > p {
        return false;
    }
    let inf = f64::INFINITY;
    let case1 = q <= r1 && r1 == r2 && r1 <= p;
    let case2 = r1 == 1.0 && r2 == 1.0;
    let case3 = r1 == inf && r2 == inf;
    // t ∈ [q, p] with r1 < t ≤ 2: take t = min(p, 2).
    let case4 = 1.0 <= r2 && r2 <= r1 && r1 < 2.0 && {
        let t = p.min(2.0);
        t >= q && t > r1
    };
    // t ∈ [q, p] with 2 ≤ t < r2: take t = max(q, 2).
    let case5 = 2.0 < r2 && r2 <= r1 && r1 <= inf && {
        let t = q.max(2.0);
        t <= p && t < r2
    };
    let case6 = 1.0 <= r2 && r2 <= 2.0 && 2.0 <= r1 && q <= 2.0 && 2.0 <= p;
    case1 || case2 || case3 || case4 || case5 || case6
}

pub type MzGridPoint = (Exponent, Exponent, Exponent, Exponent);

/// Samples Gaussian operators ℓ_{r1}^n → ℓ_{r2}^n per grid point (p, q, r1, r2) and records the
/// largest observed ρ_{p,q}(T)/‖T‖.
pub fn mz_coincidence_sweep(grid: &[MzGridPoint], ns: &[usize], samples: usize, seed: u64) -> Result<Vec<MzCell>> {
    for &(p, q, r1, r2) in grid {
        RegularityParams::new(p, q)?;
        r1.require_banach("r1")?;
        r2.require_banach("r2")?;
        if !ge(p, q) {
            return Err(Error::ExponentRelation(format!(
                "p = {p} < q = {q}: only the zero operator is (p,q)-regular; see rho_growth_witness"
            )));
        }
    }
    if let Some(n) = ns.iter().find(|n| **n == 0 || **n > 4) {
        return Err(Error::SizeGuard { guard: "mz-sweep", detail: format!("n = {n} outside 1..=4") });
    }
    if samples == 0 || samples > 1000 {
        return Err(Error::SizeGuard { guard: "mz-sweep", detail: format!("samples = {samples} outside 1..=1000") });
    }
    let cells: Vec<(usize, MzGridPoint, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(g, pt)| ns.iter().map(move |n| (g, *pt, *n)))
        .collect();
    cells
        .into_par_iter()
        .map(|(g, (p, q, r1, r2), n)| {
            let cell_seed = seed ^ ((g as u64) << 32 | n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
            let dom = FunctionSpace::lr(n, r1)?;
            let cod = FunctionSpace::lr(n, r2)?;
            let params = RegularityParams::new(p, q)?;
            let mut observed = f64::NEG_INFINITY;
            for k in 0..samples {
                let e = (0..n).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
                let t = OperatorMatrix::new(dom.clone(), cod.clone(), e)?;
                let norm = operator_norm(&t)?.lower;
                if norm == 0.0 {
                    continue;
                }
                let rho = rho_lower_bound(&t, params, n, cell_seed.wrapping_add(k as u64), 8)?.lower;
                observed = observed.max(rho / norm);
            }
            Ok(MzCell {
                p,
                q,
                r1,
                r2,
                coincidence_predicted: mz_predicted(p, q, r1, r2),
                observed_ratio: observed,
                n,
                samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::exp;
    use rand::Rng;

    fn lr(n: usize, r: f64) -> FunctionSpace {
        FunctionSpace::lr(n, exp(r)).unwrap()
    }

    #[test]
    fn identity_factors_with_uniform_weights() {
        let t = OperatorMatrix::new(lr(3, 3.0), lr(3, 1.5), vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
            .unwrap();
        let c = operator_norm(&t).unwrap().upper;
        let res = maurey_rosenthal_factorize(&t, exp(3.0), exp(1.5), Some(c), 50, 1).unwrap();
        let v = verify_factorization(&res, &t, None).unwrap();
        assert!(v.ok && v.residual <= 1e-9, "{v:?}");
        assert!(res.f.iter().all(|x| (x - res.f[0]).abs() < 1e-9));
    }

    #[test]
    fn zero_operator() {
        let t = OperatorMatrix::zero(lr(2, 2.0), lr(2, 2.0));
        let res = maurey_rosenthal_factorize(&t, exp(2.0), exp(2.0), None, 10, 1).unwrap();
        assert_eq!(res.constant, 0.0);
        assert!(res.inner.is_zero());
        assert!(verify_factorization(&res, &t, None).unwrap().ok);
    }

    #[test]
    fn positive_operator_between_l4_and_l43() {
        let t = OperatorMatrix::new(lr(2, 4.0), lr(2, 4.0 / 3.0), vec![vec![1.0, 0.5], vec![0.2, 2.0]]).unwrap();
        let params = RegularityParams::new(exp(2.0), exp(2.0)).unwrap();
        let c = crate::regular::rho_oracle(&t, params, 1, 1e-6).unwrap().upper.unwrap();
        let res = maurey_rosenthal_factorize(&t, exp(2.0), exp(2.0), Some(c), DEFAULT_MAX_CUTS, 3).unwrap();
        let v = verify_factorization(&res, &t, None).unwrap();
        assert!(v.ok, "{v:?} {res:?}");
        for w in res.violation_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
    }

    #[test]
    fn perturbed_factorization_is_flagged() {
        let t = OperatorMatrix::new(lr(2, 2.0), lr(2, 2.0), vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let mut res = maurey_rosenthal_factorize(&t, exp(2.0), exp(2.0), None, 50, 1).unwrap();
        assert!(verify_factorization(&res, &t, None).unwrap().ok);
        res.g.0[0] *= 1.1;
        assert!(!verify_factorization(&res, &t, None).unwrap().ok);
    }

    #[test]
    fn hand_built_factorization_verifies() {
        let inner = OperatorMatrix::new(lr(2, 2.0), lr(2, 2.0), vec![vec![0.5, 0.1], vec![0.3, -0.2]]).unwrap();
        let (f, g) = (vec![2.0, 0.5], vec![1.5, 3.0]);
        let e = (0..2).map(|i| (0..2).map(|j| g[i] * inner.entries()[i][j] * f[j]).collect()).collect();
        let t = OperatorMatrix::new(lr(2, 2.0), lr(2, 2.0), e).unwrap();
        let c = operator_norm(&inner).unwrap().upper;
        let res = FactorizationResult {
            f: LatticeVector(f),
            g: LatticeVector(g),
            inner,
            constant: c,
            residual: 0.0,
            cuts: 0,
            violation_history: vec![],
        };
        assert!(verify_factorization(&res, &t, None).unwrap().ok);
    }

    #[test]
    fn scale_equivariance() {
        let t = OperatorMatrix::new(lr(2, 3.0), lr(2, 2.0), vec![vec![1.0, -0.4], vec![0.3, 0.8]]).unwrap();
        let a = maurey_rosenthal_factorize(&t, exp(2.0), exp(2.0), None, 100, 5).unwrap();
        let b = maurey_rosenthal_factorize(&t.scaled(3.0), exp(2.0), exp(2.0), None, 100, 5).unwrap();
        assert!((b.constant - 3.0 * a.constant).abs() <= 1e-9 * b.constant);
        for (x, y) in a.f.iter().zip(b.f.iter()).chain(a.g.iter().zip(b.g.iter())) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{a:?} {b:?}");
        }
    }

    #[test]
    fn strong_identity_and_positive() {
        let id = OperatorMatrix::identity(lr(2, 2.0));
        let res = strong_factorize_lr(&id, exp(2.0), exp(1.0), exp(2.0), None, 50, 1).unwrap();
        let params = RegularityParams::new(exp(2.0), exp(1.0)).unwrap();
        assert!((res.constant - 1.0).abs() < 1e-9);
        assert!(verify_factorization(&res, &id, Some(params)).unwrap().ok);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = (0..2).map(|_| (0..2).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let t = OperatorMatrix::new(lr(2, 2.0), lr(2, 2.0), e).unwrap();
        let k = matrix_inequality_constant(&t, exp(2.0), exp(1.0), exp(2.0), (2, 2), 1).unwrap();
        let res = strong_factorize_lr(&t, exp(2.0), exp(1.0), exp(2.0), k.upper, DEFAULT_MAX_CUTS, 1).unwrap();
        let rho = rho_lower_bound(&res.inner, params, 2, 1, 16).unwrap().lower;
        assert!(rho <= res.constant * (1.0 + 1e-2), "{rho} {res:?}");
        assert!(verify_factorization(&res, &t, Some(params)).unwrap().ok);
    }

    #[test]
    fn matrix_inequality_specializations() {
        let id = OperatorMatrix::identity(lr(2, 3.0));
        let k = matrix_inequality_constant(&id, exp(2.0), exp(1.0), exp(3.0), (2, 2), 1).unwrap();
        assert!((k.lower - 1.0).abs() < 1e-9 && (k.upper_or_inf() - 1.0).abs() < 1e-9);
        let h = OperatorMatrix::new(lr(2, f64::INFINITY), lr(2, 1.0), vec![vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let k = matrix_inequality_constant(&h, exp(2.0), exp(2.0), exp(2.0), (2, 2), 1).unwrap();
        assert!(k.lower >= 2.0 * 2f64.sqrt() * (1.0 - 1e-6), "{k:?}");
        let params = RegularityParams::new(exp(2.0), exp(1.0)).unwrap();
        let t = OperatorMatrix::new(lr(2, 2.0), lr(2, 1.0), vec![vec![1.0, -2.0], vec![0.5, 1.0]]).unwrap();
        let a = matrix_inequality_constant(&t, exp(2.0), exp(1.0), exp(4.0), (1, 2), 9).unwrap();
        let b = rho_lower_bound(&t, params, 2, 9, crate::regular::DEFAULT_RESTARTS).unwrap();
        assert!((a.lower - b.lower).abs() <= 1e-9 * b.lower, "{} {}", a.lower, b.lower);
    }

    #[test]
    fn mz_predictions() {
        let i = f64::INFINITY;
        assert!(mz_predicted(exp(i), exp(1.0), exp(1.0), exp(1.0)));
        for r in [1.0, 1.5, 2.0, 3.0, i] {
            assert!(mz_predicted(exp(2.0), exp(2.0), exp(r), exp(r)), "{r}");
        }
        assert!(!mz_predicted(exp(3.0), exp(3.0), exp(1.5), exp(1.5)));
        assert!(mz_coincidence_sweep(&[(exp(1.0), exp(2.0), exp(2.0), exp(2.0))], &[2], 2, 1).is_err());
        let cells = mz_coincidence_sweep(&[(exp(2.0), exp(1.0), exp(1.0), exp(1.0))], &[2, 3], 3, 1).unwrap();
        assert!(cells.iter().all(|c| c.coincidence_predicted && c.observed_ratio >= 1.0 - 1e-9));
    }
}
