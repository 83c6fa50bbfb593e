//! The acceptance battery, driven by a corpus directory of criterion entries.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ascent::operator_norm;
use crate::calculus::{dual_witness, holder_check, p_sum, VectorTuple};
use crate::error::{Error, Result};
use crate::exponent::{exp, Exponent};
use crate::extension::{
    calderon_product_norm, dyadic_jn, dyadic_pn, extend_operator_lq, hahn_banach_extend, z_norm, DyadicLevel,
    Subspace, ZElement,
};
use crate::factor::{
    maurey_rosenthal_factorize, mz_coincidence_sweep, mz_predicted, strong_factorize_lr, verify_factorization,
    DEFAULT_MAX_CUTS,
};
use crate::regular::{rho_growth_witness, rho_lower_bound, rho_oracle, rho_ratio, RegularityParams, K_G};
use crate::space::{FunctionSpace, LatticeVector, OperatorMatrix};
use crate::tensor::{
    eps_norm, phi_pq_upper, pi_bounds, r_pq_bounds, trace_duality_check, Tensor, DEFAULT_BLOCKS, DEFAULT_CUT_ITERS,
};

pub const CRITERIA: u8 = 12;
const MAX_REPORTED_FAILURES: usize = 10;

/// A strong-factorization request attached to a factorization case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongCase {
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
}

/// An archived operator with the exponents of its Maurey–Rosenthal factorization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCase {
    pub kind: String,
    pub operator: OperatorMatrix,
    pub p: Exponent,
    pub s: Exponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong: Option<StrongCase>,
}

/// One corpus file: the criterion it drives plus optional overrides and archived instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub criterion: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factorizations: Vec<FactorCase>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: Vec<String>,
    pub failure_count: usize,
    pub payload: Value,
    pub elapsed_ms: u64,
    pub budget_ms: u64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} ({} checks, {} failures, {:.1} s of {:.0} s budget)",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.failure_count,
            self.elapsed_ms as f64 / 1000.0,
            self.budget_ms as f64 / 1000.0
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SuiteReport {
    /// The numeric content, without timings.
    pub fn payload(&self) -> Value {
        Value::Array(
            self.outcomes.iter().map(|o| json!({"criterion": o.criterion, "passed": o.passed, "payload": o.payload})).collect(),
        )
    }
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
    failure_count: usize,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < MAX_REPORTED_FAILURES {
                self.failures.push(msg());
            }
        }
    }

    fn record<T>(&mut self, r: Result<T>, what: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                let w = what();
                self.check(false, || format!("{w}: {e}"));
                None
            }
        }
    }
}

/// Reads every `*.json` file of a corpus directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, CorpusEntry)>> {
    let rd = std::fs::read_dir(dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot read corpus {}: {e}", dir.display())))?;
    let mut files: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = vec![];
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let text = std::fs::read_to_string(&f)
            .map_err(|e| Error::InvalidArgument(format!("corpus file {name}: {e}")))?;
        let entry: CorpusEntry = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("corpus file {name}: {e}")))?;
        if entry.criterion == 0 || entry.criterion > CRITERIA {
            return Err(Error::InvalidArgument(format!("corpus file {name}: unknown criterion {}", entry.criterion)));
        }
        out.push((name, entry));
    }
    Ok(out)
}

/// Runs the criteria listed in the corpus. Criterion 12 re-runs all other entries and compares
/// their payloads.
pub fn verify_suite(dir: &Path, seed: u64, progress: &mut dyn FnMut(&CriterionOutcome)) -> Result<SuiteReport> {
    let corpus = load_corpus(dir)?;
    let mut outcomes = vec![];
    for (_, entry) in corpus.iter().filter(|(_, e)| e.criterion != 12) {
        let o = run_criterion(entry, seed);
        progress(&o);
        outcomes.push(o);
    }
    if let Some((_, entry)) = corpus.iter().find(|(_, e)| e.criterion == 12) {
        let start = Instant::now();
        let mut t = Tally::default();
        let mut digests = vec![];
        for (first, (_, e)) in outcomes.iter().zip(corpus.iter().filter(|(_, e)| e.criterion != 12)) {
            let again = run_criterion(e, seed);
            let (a, b) = (serde_json::to_string(&first.payload), serde_json::to_string(&again.payload));
            let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
            t.check(same, || format!("criterion {} payload differs between runs", e.criterion));
            digests.push(json!({"criterion": e.criterion, "bytes": a.map(|s| s.len()).unwrap_or(0)}));
        }
        let o = finish(12, "determinism", t, json!({"compared": digests}), start, budget(entry, 3_600_000));
        progress(&o);
        outcomes.push(o);
    }
    Ok(SuiteReport { passed: outcomes.iter().all(|o| o.passed), outcomes })
}

fn budget(entry: &CorpusEntry, default_ms: u64) -> u64 {
    let _ = entry;
    default_ms
}

fn finish(criterion: u8, name: &str, t: Tally, payload: Value, start: Instant, budget_ms: u64) -> CriterionOutcome {
    let elapsed_ms = start.elapsed().as_millis() as u64;
    let mut failures = t.failures;
    let mut failure_count = t.failure_count;
    if elapsed_ms > budget_ms {
        failures.push(format!("runtime {elapsed_ms} ms exceeds the {budget_ms} ms budget"));
        failure_count += 1;
    }
    CriterionOutcome {
        criterion,
        name: name.into(),
        passed: failure_count == 0,
        checks: t.checks,
        failures,
        failure_count,
        payload,
        elapsed_ms,
        budget_ms,
    }
}

/// Runs one criterion entry.
pub fn run_criterion(entry: &CorpusEntry, seed: u64) -> CriterionOutcome {
    let seed = seed ^ entry.seed.unwrap_or(0);
    let start = Instant::now();
    let (name, budget_ms, (t, payload)) = match entry.criterion {
        1 => ("identity and monotonicity", 160 * 5_000, c1(seed)),
        2 => ("(t,r)-regularity exactness", 120_000, c2(entry.count.unwrap_or(100), seed)),
        3 => ("Krivine bound and Hadamard separation", 180_000, c3(entry.count.unwrap_or(500), seed)),
        4 => ("degeneracy growth for p < q", 60_000, c4(seed)),
        5 => ("duality formula", 60_000, c5(entry.count.unwrap_or(200), seed)),
        6 => ("Hoelder inequality", 300_000, c6(entry.count.unwrap_or(1000), seed)),
        7 => ("tensor ordering and trace duality", 600_000, c7(entry.count.unwrap_or(200), seed)),
        8 => ("Grothendieck pre-dual", 300_000, c8(entry.count.unwrap_or(200), seed)),
        9 => ("factorization soundness", 900_000, c9(&entry.factorizations, seed)),
        10 => ("MZ sweep consistency", 1_200_000, c10(entry.count.unwrap_or(20), seed)),
        11 => ("extension pipeline", 600_000, c11(entry.count.unwrap_or(100), seed)),
        _ => ("determinism", 0, (Tally::default(), Value::Null)),
    };
    finish(entry.criterion, name, t, payload, start, budget_ms)
}

// ---------- generators ----------

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

fn random_space(rng: &mut ChaCha8Rng, atoms: usize, exps: &[f64]) -> FunctionSpace {
    let w = (0..atoms).map(|_| rng.random_range(0.25..2.0)).collect();
    FunctionSpace::weighted_lr(w, exp(pick(rng, exps))).expect("valid space")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_op(rng: &mut ChaCha8Rng, dom: FunctionSpace, cod: FunctionSpace) -> OperatorMatrix {
    let e = (0..cod.atoms()).map(|_| random_vec(rng, dom.atoms())).collect();
    OperatorMatrix::new(dom, cod, e).expect("valid operator")
}

fn lr(n: usize, r: f64) -> FunctionSpace {
    FunctionSpace::lr(n, exp(r)).expect("valid space")
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

const INF: f64 = f64::INFINITY;

// ---------- criteria ----------

fn c1(seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let exps = [1.0, 2.0, 3.0, INF];
    let mut lowers = vec![];
    for n in 1..=4 {
        for r in exps {
            for p in exps {
                for q in exps.iter().copied().filter(|q| *q <= p) {
                    let cell = Instant::now();
                    let id = OperatorMatrix::identity(lr(n, r));
                    let params = RegularityParams::new(exp(p), exp(q)).expect("exponents");
                    let what = || format!("n={n} r={r} p={p} q={q}");
                    if let Some(e) = t.record(rho_lower_bound(&id, params, 2, seed, 8), what) {
                        t.check(e.lower >= 1.0 - 1e-6 && e.lower <= 1.0 + 1e-9, || format!("{} lower {}", what(), e.lower));
                        t.check(e.upper.is_some_and(|u| (u - 1.0).abs() <= 1e-9), || {
                            format!("{} upper {:?}", what(), e.upper)
                        });
                        lowers.push(e.lower);
                    }
                    let ms = cell.elapsed().as_millis();
                    t.check(ms < 5_000, || format!("{} took {ms} ms", what()));
                }
            }
        }
    }
    (t, json!({"cells": lowers.len(), "lowers": lowers}))
}

fn c2(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc2);
    let pairs = [(1.0, 1.0), (1.0, 2.0), (1.0, INF), (2.0, 2.0), (2.0, INF), (INF, INF)];
    let mut ratios = vec![];
    for i in 0..count {
        let (r, tt) = pairs[i % pairs.len()];
        let op = random_op(&mut rng, lr(3, r), lr(3, tt));
        let params = RegularityParams::new(exp(tt), exp(r)).expect("exponents");
        let what = || format!("instance {i} r={r} t={tt}");
        let (Some(b), Some(e)) =
            (t.record(operator_norm(&op), what), t.record(rho_lower_bound(&op, params, 2, seed ^ i as u64, 8), what))
        else {
            continue;
        };
        t.check(e.lower >= b.lower * (1.0 - 1e-3) && e.lower <= b.upper * (1.0 + 1e-9), || {
            format!("{}: rho {} vs norm [{}, {}]", what(), e.lower, b.lower, b.upper)
        });
        ratios.push(e.lower / b.upper);
    }
    (t, json!({"instances": ratios.len(), "rho_over_norm": ratios}))
}

fn c3(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc3);
    let exps = [1.0, 1.5, 2.0, 3.0, INF];
    let params = RegularityParams::new(Exponent::TWO, Exponent::TWO).expect("exponents");
    let mut worst = 0.0_f64;
    let mut ratios = vec![];
    for i in 0..count {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let dom = random_space(&mut rng, n, &exps);
        let cod = random_space(&mut rng, m, &exps);
        let op = random_op(&mut rng, dom, cod);
        let what = || format!("instance {i}");
        let (Some(b), Some(e)) =
            (t.record(operator_norm(&op), what), t.record(rho_lower_bound(&op, params, 2, seed ^ i as u64, 4), what))
        else {
            continue;
        };
        let ratio = if b.upper > 0.0 { e.lower / b.upper } else { 0.0 };
        worst = worst.max(ratio);
        ratios.push(ratio);
        t.check(e.lower <= K_G * b.upper * (1.0 + 1e-9), || format!("{}: rho {} > K_G x {}", what(), e.lower, b.upper));
    }
    let h = OperatorMatrix::new(lr(2, INF), lr(2, 1.0), vec![vec![1.0, 1.0], vec![1.0, -1.0]]).expect("hadamard");
    let mut had = json!(null);
    if let (Some(b), Some(e)) = (
        t.record(operator_norm(&h), || "hadamard norm".into()),
        t.record(rho_lower_bound(&h, params, 2, seed, 32), || "hadamard rho".into()),
    ) {
        t.check(e.lower >= 2.0 * 2f64.sqrt() * (1.0 - 1e-9), || format!("hadamard rho {}", e.lower));
        t.check(e.lower >= 2f64.sqrt() * b.upper * (1.0 - 1e-9), || format!("hadamard separation {} / {}", e.lower, b.upper));
        had = json!({"rho": e.lower, "norm": b.upper});
    }
    (t, json!({"instances": ratios.len(), "worst_ratio": worst, "ratios": ratios, "hadamard": had}))
}

fn c4(seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc4);
    let exps = [1.0, 2.0, 3.0, INF];
    let mut growth = vec![];
    for (p, q) in [(1.0, 2.0), (1.0, INF), (2.0, 3.0), (1.5, 4.0), (2.0, INF)] {
        let dom = random_space(&mut rng, 3, &exps);
        let cod = random_space(&mut rng, 3, &exps);
        let op = random_op(&mut rng, dom, cod);
        let x = random_vec(&mut rng, 3);
        let params = RegularityParams::new(exp(p), exp(q)).expect("exponents");
        let Some(w1) = t.record(rho_growth_witness(&op, exp(p), exp(q), &x, 1), || format!("p={p} q={q}")) else {
            continue;
        };
        let mut last = w1;
        for n in 1..=64usize {
            let Some(w) = t.record(rho_growth_witness(&op, exp(p), exp(q), &x, n), || format!("p={p} q={q} n={n}")) else {
                continue;
            };
            let formula = (n as f64).powf(1.0 / p - 1.0 / q) * w1;
            t.check(rel_close(w, formula, 1e-12), || format!("p={p} q={q} n={n}: {w} vs {formula}"));
            let tuple = rho_ratio(&op, params, &vec![x.clone(); n]);
            t.check(rel_close(w, tuple, 1e-12), || format!("p={p} q={q} n={n}: witness {w} vs tuple ratio {tuple}"));
            last = w;
        }
        growth.push(json!({"p": p, "q": q, "n1": w1, "n64": last}));
    }
    (t, json!({"growth": growth}))
}

fn c5(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc5);
    let exps = [1.0, 1.5, 2.0, 3.0, INF];
    let mut worst = 0.0_f64;
    for i in 0..count {
        let (r, p, s) = match i % 3 {
            0 => (1.0, 2.0, 2.0),
            1 => {
                let p = pick(&mut rng, &[1.5, 3.0, 4.0, INF]);
                (1.0, p, exp(p).conjugate().expect("conjugate").value())
            }
            _ => (2.0, 4.0, 4.0),
        };
        let atoms = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let x = random_space(&mut rng, atoms, &exps);
        let members: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, atoms)).collect();
        let tuple = VectorTuple::new(x.clone(), members.clone()).expect("tuple");
        let what = || format!("instance {i} (r,p,s)=({r},{p},{s})");
        let Some(w) = t.record(dual_witness(&x, &tuple, exp(p), exp(r), exp(s)), what) else {
            continue;
        };
        let norm = x.norm(&p_sum(&tuple, exp(p))).expect("norm");
        let integral: f64 = (0..atoms)
            .map(|a| {
                let prods: Vec<f64> = (0..n).map(|k| (members[k][a] * w.members()[k][a]).abs()).collect();
                let v = if r == 1.0 { prods.iter().sum() } else { prods.iter().map(|v| v * v).sum::<f64>().sqrt() };
                x.weights()[a] * v
            })
            .sum();
        t.check(rel_close(integral, norm, 1e-9), || format!("{}: pairing {integral} vs norm {norm}", what()));
        let dn = x.dual().and_then(|d| d.norm(&p_sum(&w, exp(s)))).unwrap_or(f64::INFINITY);
        t.check(dn <= 1.0 + 1e-9, || format!("{}: dual norm {dn}", what()));
        if norm > 0.0 {
            worst = worst.max((integral - norm).abs() / norm);
        }
    }
    (t, json!({"instances": count, "worst_relative_deviation": worst}))
}

fn c6(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc6);
    let exps = [1.0, 1.5, 2.0, 3.0, INF];
    let triples = [(1.0, 2.0, 2.0), (1.0, 3.0, 1.5), (1.0, 1.0, INF), (1.0, INF, 1.0), (2.0, 4.0, 4.0), (1.5, 3.0, 3.0)];
    let mut min_slack = vec![];
    for (r, p, s) in triples {
        let mut worst = f64::INFINITY;
        for i in 0..count {
            let atoms = rng.random_range(1..=4);
            let n = rng.random_range(1..=4);
            let x = random_space(&mut rng, atoms, &exps);
            let phi = VectorTuple::new(x.clone(), (0..n).map(|_| random_vec(&mut rng, atoms)).collect()).expect("tuple");
            let psi = VectorTuple::new(x.clone(), (0..n).map(|_| random_vec(&mut rng, atoms)).collect()).expect("tuple");
            let what = || format!("(r,p,s)=({r},{p},{s}) instance {i}");
            let Some(h) = t.record(holder_check(&x, &phi, &psi, exp(r), exp(p), exp(s)), what) else {
                continue;
            };
            t.check(h.slack >= -1e-9 * h.rhs, || format!("{}: lhs {} rhs {}", what(), h.lhs, h.rhs));
            if h.rhs > 0.0 {
                worst = worst.min(h.slack / h.rhs);
            }
        }
        min_slack.push(json!({"r": r, "p": p, "s": s, "min_relative_slack": worst}));
    }
    (t, json!({"per_triple": count, "triples": min_slack}))
}

fn random_tensor(rng: &mut ChaCha8Rng, left: FunctionSpace, right: FunctionSpace, rank: usize) -> Tensor {
    let terms = (0..rank).map(|_| (random_vec(rng, left.atoms()), random_vec(rng, right.atoms()))).collect();
    Tensor::new(left, right, terms).expect("tensor")
}

fn c7(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc7);
    let exps = [1.0, 1.5, 2.0, 3.0, INF];
    let pq = [(2.0, 2.0), (2.0, 1.0), (3.0, 2.0), (INF, 1.0)];
    let mut values = vec![];
    for i in 0..count {
        let (p, q) = pq[i % pq.len()];
        let (la, ra) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let left = random_space(&mut rng, la, &exps);
        let right = random_space(&mut rng, ra, &exps);
        let rank = rng.random_range(1..=3);
        let z = random_tensor(&mut rng, left, right, rank);
        let what = || format!("tensor {i} p={p} q={q}");
        let sd = seed ^ i as u64;
        let (Some(e), Some(r), Some(pi)) = (
            t.record(eps_norm(&z, sd), what),
            t.record(r_pq_bounds(&z, exp(p), exp(q), sd, DEFAULT_BLOCKS), what),
            t.record(pi_bounds(&z, sd, DEFAULT_CUT_ITERS), what),
        ) else {
            continue;
        };
        let tol = 1e-9 * (1.0 + pi.upper);
        for (name, lo, up) in [("eps", e.lower, e.upper), ("r", r.lower, r.upper), ("pi", pi.lower, pi.upper)] {
            t.check(lo <= up + tol, || format!("{}: {name} interval [{lo}, {up}]", what()));
        }
        t.check(e.lower <= r.upper + tol, || format!("{}: eps {} > r {}", what(), e.lower, r.upper));
        t.check(r.lower <= pi.upper + tol, || format!("{}: r {} > pi {}", what(), r.lower, pi.upper));
        values.push([e.lower, e.upper, r.lower, r.upper, pi.lower, pi.upper]);
    }
    let mut gaps = vec![];
    let mut trng = ChaCha8Rng::seed_from_u64(seed ^ 0x7c);
    for i in 0..10 {
        let op = random_op(&mut trng, lr(2, 2.0), lr(2, 2.0));
        let what = || format!("trace duality instance {i}");
        if let Some(rep) = t.record(trace_duality_check(&op, Exponent::TWO, Exponent::TWO, 4, seed ^ i), what) {
            let rel = rep.gap / rep.rho_est.max(1e-300);
            t.check(rel <= 2e-2, || format!("{}: gap {} of {}", what(), rep.gap, rep.rho_est));
            gaps.push(rel);
        }
    }
    (t, json!({"tensors": values.len(), "bounds": values, "trace_gaps": gaps}))
}

fn c8(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc8);
    let exps = [1.0, 1.5, 2.0, 3.0, INF];
    let mut worst = 0.0_f64;
    let mut ratios = vec![];
    for i in 0..count {
        let (la, ra) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let (left, right) = if i % 2 == 0 {
            (lr(la, INF), lr(ra, INF))
        } else {
            (random_space(&mut rng, la, &exps), random_space(&mut rng, ra, &exps))
        };
        let rank = rng.random_range(1..=3);
        let z = random_tensor(&mut rng, left, right, rank);
        let what = || format!("tensor {i}");
        let (Some(pi), Some(phi)) = (
            t.record(pi_bounds(&z, seed ^ i as u64, DEFAULT_CUT_ITERS), what),
            t.record(phi_pq_upper(&z, Exponent::TWO, Exponent::TWO), what),
        ) else {
            continue;
        };
        t.check(pi.upper <= K_G * phi * (1.0 + 1e-9), || format!("{}: pi {} > K_G x phi {}", what(), pi.upper, phi));
        let ratio = if phi > 0.0 { pi.upper / phi } else { 0.0 };
        worst = worst.max(ratio);
        ratios.push(ratio);
    }
    (t, json!({"tensors": ratios.len(), "worst_pi_over_phi": worst, "ratios": ratios}))
}

fn c9(cases: &[FactorCase], seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rows = vec![];
    for (i, c) in cases.iter().enumerate() {
        let what = || format!("case {i} ({})", c.kind);
        let sd = seed ^ i as u64;
        let Some(res) = t.record(maurey_rosenthal_factorize(&c.operator, c.p, c.s, None, DEFAULT_MAX_CUTS, sd), what)
        else {
            continue;
        };
        let Some(v) = t.record(verify_factorization(&res, &c.operator, None), what) else {
            continue;
        };
        t.check(v.ok, || format!("{}: {v:?} constant {}", what(), res.constant));
        let mut row = json!({"kind": c.kind, "constant": res.constant, "inner": v.inner_norm_est, "residual": v.residual, "cuts": res.cuts});
        if let Some(st) = &c.strong {
            let params = RegularityParams::new(st.p, st.q).expect("exponents");
            if let Some(sres) =
                t.record(strong_factorize_lr(&c.operator, st.p, st.q, st.r, None, DEFAULT_MAX_CUTS, sd), || {
                    format!("{} strong", what())
                })
            {
                if let Some(sv) = t.record(verify_factorization(&sres, &c.operator, Some(params)), what) {
                    t.check(sv.ok, || format!("{} strong: {sv:?} constant {}", what(), sres.constant));
                    row["strong"] = json!({"constant": sres.constant, "inner_rho": sv.inner_norm_est, "residual": sv.residual});
                }
            }
        }
        rows.push(row);
    }
    (t, json!({"cases": rows.len(), "results": rows}))
}

/// The six predicted-true cell families.
pub fn mz_cells() -> Vec<(f64, f64, f64, f64)> {
    vec![
        (3.0, 1.5, 2.0, 2.0),
        (INF, 1.0, 1.0, 1.0),
        (2.0, 1.0, INF, INF),
        (2.0, 1.0, 1.5, 1.25),
        (3.0, 2.0, 4.0, 3.0),
        (2.0, 2.0, INF, 1.0),
    ]
}

fn c10(samples: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let ns = [2, 3, 4];
    let mut out = vec![];
    for (k, (p, q, r1, r2)) in mz_cells().into_iter().enumerate() {
        let pt = (exp(p), exp(q), exp(r1), exp(r2));
        t.check(mz_predicted(pt.0, pt.1, pt.2, pt.3), || format!("cell {k} not predicted"));
        let what = || format!("cell {k} ({p},{q},{r1},{r2})");
        let Some(cells) = t.record(mz_coincidence_sweep(&[pt], &ns, samples, seed ^ k as u64), what) else {
            continue;
        };
        let ratios: Vec<f64> = cells.iter().map(|c| c.observed_ratio).collect();
        let (mx, mn) = ratios.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), v| (a.max(*v), b.min(*v)));
        t.check(mx <= 1.1 * mn, || format!("{}: ratios {ratios:?}", what()));
        out.push(json!({"p": p, "q": q, "r1": r1, "r2": r2, "ratios": ratios}));
    }
    let guard = (exp(1.0), exp(2.0), exp(2.0), exp(2.0));
    let err = mz_coincidence_sweep(&[guard], &ns, samples, seed);
    t.check(matches!(err, Err(Error::ExponentRelation(_))), || "p < q cell accepted by the sweep".into());
    let id = OperatorMatrix::identity(lr(2, 2.0));
    let x = [1.0, 0.5];
    let mut growth = vec![];
    for n in [1, 8, 64] {
        if let Some(w) = t.record(rho_growth_witness(&id, exp(1.0), exp(2.0), &x, n), || "guard witness".into()) {
            growth.push(w);
        }
    }
    if growth.len() == 3 {
        t.check(rel_close(growth[2] / growth[0], 8.0, 1e-12), || format!("guard growth {growth:?}"));
    }
    (t, json!({"cells": out, "guard_growth": growth}))
}

fn grid_min(f: &dyn Fn(f64, f64) -> f64, center: (f64, f64), half: f64, steps: usize, levels: usize) -> f64 {
    let (mut c, mut h) = (center, half);
    let mut best = (f64::INFINITY, center);
    for _ in 0..levels {
        for i in 0..=steps {
            for j in 0..=steps {
                let a = c.0 - h + 2.0 * h * i as f64 / steps as f64;
                let b = c.1 - h + 2.0 * h * j as f64 / steps as f64;
                let v = f(a, b);
                if v < best.0 {
                    best = (v, (a, b));
                }
            }
        }
        c = best.1;
        h *= 4.0 / steps as f64;
    }
    best.0
}

fn c11(count: usize, seed: u64) -> (Tally, Value) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc11);

    let mut dyadic_worst = 0.0_f64;
    for q in [1.0, 2.0, 3.0, INF] {
        for level in 0..=3 {
            let lv = DyadicLevel::new(level, exp(q)).expect("level");
            let (Some(p), Some(j)) = (t.record(dyadic_pn(lv, 16), || "P_n".into()), t.record(dyadic_jn(lv, 16), || "J_n".into()))
            else {
                continue;
            };
            let pj = p.compose(&j).expect("compose");
            let dev = pj
                .entries()
                .iter()
                .enumerate()
                .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, v)| (v - if a == b { 1.0 } else { 0.0 }).abs()))
                .fold(0.0, f64::max);
            t.check(dev <= 1e-12, || format!("P J deviation {dev} at q={q} level {level}"));
            for _ in 0..50 {
                let v = random_vec(&mut rng, lv.blocks());
                let a = j.codomain().norm(&j.apply(&v).expect("apply")).expect("norm");
                let b = j.domain().norm(&v).expect("norm");
                dyadic_worst = dyadic_worst.max((a - b).abs());
                t.check((a - b).abs() <= 1e-12 * (1.0 + b), || format!("J isometry {a} vs {b}"));
                let f = random_vec(&mut rng, 16);
                let pf = p.codomain().norm(&p.apply(&f).expect("apply")).expect("norm");
                let nf = p.domain().norm(&f).expect("norm");
                t.check(pf <= nf * (1.0 + 1e-12), || format!("P contraction {pf} > {nf}"));
            }
        }
    }
    let lv = DyadicLevel::new(1, Exponent::TWO).expect("level");
    if let Some(p) = t.record(dyadic_pn(lv, 4), || "P_1".into()) {
        for _ in 0..1000 {
            let f = random_vec(&mut rng, 4);
            let pf = p.codomain().norm(&p.apply(&f).expect("apply")).expect("norm");
            let nf = p.domain().norm(&f).expect("norm");
            t.check(pf <= nf * (1.0 + 1e-12), || format!("P_1 contraction {pf} > {nf}"));
        }
    }

    let mut zc_worst = 0.0_f64;
    for i in 0..count {
        let q = pick(&mut rng, &[1.0, 1.5, 2.0, 3.0]);
        let r = pick(&mut rng, &[q, q + 0.5, 2.0 * q, 4.0]);
        let atoms = rng.random_range(2..=3);
        let n = rng.random_range(1..=3);
        let x = FunctionSpace::weighted_lr((0..atoms).map(|_| rng.random_range(0.25..2.0)).collect(), exp(r)).expect("space");
        let comps = (0..n).map(|_| LatticeVector(random_vec(&mut rng, atoms))).collect();
        let v = ZElement::new(x, comps).expect("element");
        let what = || format!("Z instance {i} q={q} r={r}");
        let (Some(a), Some(b)) = (
            t.record(z_norm(&v, exp(q), seed ^ i as u64), what),
            t.record(calderon_product_norm(&v, exp(q), seed ^ i as u64), what),
        ) else {
            continue;
        };
        let (a, b) = (a.upper_or_inf(), b.upper_or_inf());
        let dev = (a - b).abs() / a.max(1e-300);
        zc_worst = zc_worst.max(dev);
        t.check(dev <= 1e-6, || format!("{}: z {a} vs calderon {b}", what()));
    }

    let mut hb = vec![];
    let q2 = Exponent::TWO;
    for i in 0..5 {
        // ℓ_2^3, one-dimensional subspace, scalar codomain: ρ_{∞,2} of a functional is its dual norm.
        let x = lr(3, 2.0);
        let b = random_vec(&mut rng, 3);
        let y = rng.random_range(0.5..2.0);
        let x0 = Subspace::new(x.clone(), vec![LatticeVector(b.clone())]).expect("subspace");
        let what = || format!("grid instance {i}");
        let Some(ext) = t.record(hahn_banach_extend(&x0, &[vec![y]], q2, seed ^ i), what) else {
            continue;
        };
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let u0: Vec<f64> = b.iter().map(|v| y * v / bb).collect();
        let (c1, c2) = complement_pair(&b);
        let f = |s1: f64, s2: f64| -> f64 {
            (0..3).map(|k| (u0[k] + s1 * c1[k] + s2 * c2[k]).powi(2)).sum::<f64>().sqrt()
        };
        let g = grid_min(&f, (0.0, 0.0), 2.0 * (1.0 + y), 40, 4);
        check_extension(&mut t, &what(), &ext, g);
        hb.push(json!({"grid": g, "rho_after": ext.rho_after, "rho_before": ext.rho_before}));
    }
    for i in 0..3 {
        // ℓ_∞^2 ambient, two-dimensional codomain ℓ_2^2: brute force over the two free entries.
        let x = lr(2, INF);
        let b = random_vec(&mut rng, 2);
        let images = vec![random_vec(&mut rng, 2)];
        let x0 = Subspace::new(x.clone(), vec![LatticeVector(b.clone())]).expect("subspace");
        let what = || format!("oracle grid instance {i}");
        let Some(ext) = t.record(hahn_banach_extend(&x0, &images, q2, seed ^ (10 + i)), what) else {
            continue;
        };
        let bb: f64 = b.iter().map(|v| v * v).sum();
        let c = [-b[1] / bb.sqrt(), b[0] / bb.sqrt()];
        let params = RegularityParams::new(Exponent::INF, q2).expect("exponents");
        let f = |s1: f64, s2: f64| -> f64 {
            let s = [s1, s2];
            let e = (0..2).map(|k| (0..2).map(|a| images[0][k] * b[a] / bb + s[k] * c[a]).collect()).collect();
            let op = OperatorMatrix::new(x.clone(), lr(2, 2.0), e).expect("operator");
            rho_oracle(&op, params, 2, 1e-3).map(|e| e.upper_or_inf()).unwrap_or(f64::INFINITY)
        };
        let scale = 2.0 * (1.0 + images[0].iter().map(|v| v.abs()).sum::<f64>() / bb.sqrt());
        let g = grid_min(&f, (0.0, 0.0), scale, 20, 4);
        check_extension(&mut t, &what(), &ext, g);
        hb.push(json!({"grid": g, "rho_after": ext.rho_after, "rho_before": ext.rho_before}));
    }

    let mut pipeline = vec![];
    let lv = DyadicLevel::new(2, q2).expect("level");
    for i in 0..5 {
        let x = FunctionSpace::uniform_lr(4, q2).expect("space");
        let basis = (0..2).map(|_| LatticeVector(random_vec(&mut rng, 4))).collect();
        let images: Vec<Vec<f64>> = (0..2).map(|_| random_vec(&mut rng, 4)).collect();
        let what = || format!("pipeline instance {i}");
        let Some(x0) = t.record(Subspace::new(x, basis), what) else {
            continue;
        };
        let Some(ext) = t.record(extend_operator_lq(&x0, &images, lv, seed ^ (20 + i)), what) else {
            continue;
        };
        t.check(ext.agreement_residual <= 1e-8, || format!("{}: agreement {}", what(), ext.agreement_residual));
        t.check(ext.rho_after <= ext.rho_before * (1.0 + 1e-2), || {
            format!("{}: rho after {} vs before {}", what(), ext.rho_after, ext.rho_before)
        });
        pipeline.push(json!({"rho_before": ext.rho_before, "rho_after": ext.rho_after, "agreement": ext.agreement_residual}));
    }
    (
        t,
        json!({"dyadic_worst": dyadic_worst, "z_calderon_worst": zc_worst, "grid": hb, "pipeline": pipeline}),
    )
}

fn complement_pair(b: &[f64]) -> ([f64; 3], [f64; 3]) {
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u = [b[0] / nb, b[1] / nb, b[2] / nb];
    let e = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = e.iter().zip(&u).map(|(a, b)| a * b).sum();
    let mut c1 = [e[0] - d * u[0], e[1] - d * u[1], e[2] - d * u[2]];
    let n1 = c1.iter().map(|v| v * v).sum::<f64>().sqrt();
    c1.iter_mut().for_each(|v| *v /= n1);
    let c2 = [u[1] * c1[2] - u[2] * c1[1], u[2] * c1[0] - u[0] * c1[2], u[0] * c1[1] - u[1] * c1[0]];
    (c1, c2)
}

fn check_extension(t: &mut Tally, what: &str, ext: &crate::extension::Extension, grid: f64) {
    t.check(ext.agreement_residual <= 1e-8, || format!("{what}: agreement {}", ext.agreement_residual));
    t.check(ext.rho_after <= grid * (1.0 + 1e-2), || format!("{what}: rho {} vs grid {grid}", ext.rho_after));
    t.check(ext.rho_after >= ext.rho_before - 1e-9 * (1.0 + ext.rho_before), || {
        format!("{what}: rho {} below restriction {}", ext.rho_after, ext.rho_before)
    });
    t.check(ext.rho_after <= ext.rho_before * (1.0 + 1e-2), || {
        format!("{what}: rho {} above restriction {}", ext.rho_after, ext.rho_before)
    });
}

/// The archived factorization cases of the default corpus.
pub fn default_factorization_cases(seed: u64) -> Vec<FactorCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![];
    // (a, p, s, b)
    let positive = [(4.0, 2.0, 2.0, 4.0 / 3.0), (INF, 3.0, 1.5, 1.0), (3.0, 3.0, 2.0, 2.0), (2.0, 2.0, 1.0, 1.0), (4.0, 4.0, 4.0, 3.0)];
    for i in 0..50 {
        let (a, p, s, b) = positive[i % positive.len()];
        let (n, m) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let dom = random_space(&mut rng, n, &[a]);
        let cod = random_space(&mut rng, m, &[b]);
        let e = (0..m).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let operator = OperatorMatrix::new(dom, cod, e).expect("operator");
        let strong = (i % 5 == 0 && a >= 2.0 && b <= 2.0).then_some(StrongCase { p: exp(2.0), q: exp(1.0), r: exp(2.0) });
        out.push(FactorCase { kind: "positive".into(), operator, p: exp(p), s: exp(s), strong });
    }
    let krivine = [(2.0, 2.0), (INF, 1.0), (3.0, 1.5), (4.0, 2.0), (INF, 2.0)];
    for i in 0..50 {
        let (a, b) = krivine[i % krivine.len()];
        let (n, m) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let dom = random_space(&mut rng, n, &[a]);
        let cod = random_space(&mut rng, m, &[b]);
        let operator = random_op(&mut rng, dom, cod);
        let strong = (i % 5 == 0).then_some(StrongCase { p: exp(2.0), q: exp(1.0), r: exp(2.0) });
        out.push(FactorCase { kind: "krivine".into(), operator, p: exp(2.0), s: exp(2.0), strong });
    }
    out
}

/// The default corpus: one entry per criterion.
pub fn default_corpus(seed: u64) -> Vec<(String, CorpusEntry)> {
    (1..=CRITERIA)
        .map(|k| {
            let factorizations = if k == 9 { default_factorization_cases(seed) } else { vec![] };
            (format!("c{k:02}.json"), CorpusEntry { criterion: k, count: None, seed: None, factorizations })
        })
        .collect()
}
