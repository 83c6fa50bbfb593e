//! Finite atomic Banach function spaces, their duals and operators between them.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::optim::{minimize, SearchOptions};
use crate::scalar::{weighted_lp, weighted_norming, wdot};

/// A lattice norm on R^N given the atom weights. Coordinates pair with
/// functionals through ⟨a, x⟩ = Σ w_j a_j x_j.
pub trait LatticeNorm: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn norm(&self, weights: &[f64], x: &[f64]) -> f64;
    /// Norm of a functional in the dual frame, if known in closed form.
    fn dual_norm(&self, _weights: &[f64], _a: &[f64]) -> Option<f64> {
        None
    }
    /// A maximizer of ⟨a, x⟩ over the unit ball, if known in closed form.
    fn ball_support(&self, _weights: &[f64], _a: &[f64]) -> Option<Vec<f64>> {
        None
    }
    /// A functional of dual norm one attaining ⟨x', x⟩ = ‖x‖.
    fn norming_functional(&self, _weights: &[f64], _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    /// JSON description, for norms that can be archived.
    fn to_json(&self) -> Option<serde_json::Value> {
        None
    }
}

const FALLBACK_RESTARTS: usize = 64;
const FALLBACK_TOL: f64 = 1e-9;

/// Maximizes ⟨a, x⟩ / ‖x‖ by derivative-free search with restarts.
fn fallback_support(norm: &dyn LatticeNorm, w: &[f64], a: &[f64]) -> (f64, Vec<f64>) {
    let n = w.len();
    if a.iter().all(|v| *v == 0.0) {
        return (0.0, vec![0.0; n]);
    }
    let ratio = |x: &[f64]| {
        let d = norm.norm(w, x);
        if d <= 0.0 {
            0.0
        } else {
            wdot(w, a, x) / d
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba11);
    let opts = SearchOptions { tol: FALLBACK_TOL, ..SearchOptions::default() };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut stale = 0;
    for k in 0..FALLBACK_RESTARTS {
        let x0: Vec<f64> = match k {
            0 => a.to_vec(),
            1 => a.iter().map(|v| v.signum()).collect(),
            _ => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        let (x, v) = minimize(|x| -ratio(x), x0, &opts, &mut rng);
        let v = -v;
        if v > best.0 * (1.0 + FALLBACK_TOL) + 1e-300 {
            stale = 0;
        } else {
            stale += 1;
        }
        if v > best.0 {
            best = (v, x);
        }
        if stale >= 8 {
            break;
        }
    }
    let d = norm.norm(w, &best.1);
    let x: Vec<f64> = best.1.iter().map(|v| v / d).collect();
    (best.0.max(0.0), x)
}

/// Σ_k c_k ‖x‖_{L_{r_k}(w)}: a lattice norm without a closed-form dual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumOfLr {
    pub terms: Vec<(f64, Exponent)>,
}

impl LatticeNorm for SumOfLr {
    fn name(&self) -> String {
        "sum_lr".into()
    }
    fn norm(&self, w: &[f64], x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, r)| c * weighted_lp(Some(w), x, *r)).sum()
    }
    fn norming_functional(&self, w: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        for (c, r) in &self.terms {
            for (o, v) in out.iter_mut().zip(weighted_norming(Some(w), x, *r)) {
                *o += c * v;
            }
        }
        Some(out)
    }
    fn to_json(&self) -> Option<serde_json::Value> {
        serde_json::to_value(self).ok()
    }
}

/// The dual norm of another lattice norm.
#[derive(Debug, Clone)]
pub struct DualNorm(pub Arc<dyn LatticeNorm>);

impl LatticeNorm for DualNorm {
    fn name(&self) -> String {
        format!("dual({})", self.0.name())
    }
    fn norm(&self, w: &[f64], a: &[f64]) -> f64 {
        self.0
            .dual_norm(w, a)
            .unwrap_or_else(|| fallback_support(self.0.as_ref(), w, a).0)
    }
    fn dual_norm(&self, w: &[f64], x: &[f64]) -> Option<f64> {
        Some(self.0.norm(w, x))
    }
    fn ball_support(&self, w: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        self.0.norming_functional(w, x)
    }
    fn norming_functional(&self, w: &[f64], a: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.0
                .ball_support(w, a)
                .unwrap_or_else(|| fallback_support(self.0.as_ref(), w, a).1),
        )
    }
}

#[derive(Debug, Clone)]
pub enum NormKind {
    WeightedLr(Exponent),
    Custom(Arc<dyn LatticeNorm>),
}

/// A finite measure on atoms with a lattice norm.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    weights: Vec<f64>,
    kind: NormKind,
}

impl PartialEq for FunctionSpace {
    fn eq(&self, other: &Self) -> bool {
        if self.weights != other.weights {
            return false;
        }
        match (&self.kind, &other.kind) {
            (NormKind::WeightedLr(a), NormKind::WeightedLr(b)) => a == b,
            (NormKind::Custom(a), NormKind::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("at least one atom required".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeights(format!("weight {w} is not a positive real")));
    }
    Ok(())
}

impl FunctionSpace {
    pub fn weighted_lr(weights: Vec<f64>, r: Exponent) -> Result<Self> {
        check_weights(&weights)?;
        Ok(FunctionSpace { weights, kind: NormKind::WeightedLr(r) })
    }

    /// ℓ_r^n with unit weights.
    pub fn lr(n: usize, r: Exponent) -> Result<Self> {
        Self::weighted_lr(vec![1.0; n], r)
    }

    /// L_r on n atoms of mass 1/n.
    pub fn uniform_lr(n: usize, r: Exponent) -> Result<Self> {
        Self::weighted_lr(vec![1.0 / n.max(1) as f64; n], r)
    }

    pub fn custom(weights: Vec<f64>, norm: Arc<dyn LatticeNorm>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(FunctionSpace { weights, kind: NormKind::Custom(norm) })
    }

    pub fn atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    /// The exponent r when the norm is a weighted L_r norm.
    pub fn lr_exponent(&self) -> Option<Exponent> {
        match self.kind {
            NormKind::WeightedLr(r) => Some(r),
            NormKind::Custom(_) => None,
        }
    }

    pub(crate) fn is_banach_lr(&self) -> bool {
        matches!(self.kind, NormKind::WeightedLr(r) if r.value() >= 1.0)
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.atoms() {
            return Err(Error::DimensionMismatch { expected: self.atoms(), got: x.len() });
        }
        Ok(())
    }

    /// ‖x‖.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.norm_of(x))
    }

    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::WeightedLr(r) => weighted_lp(Some(&self.weights), x, *r),
            NormKind::Custom(n) => n.norm(&self.weights, x),
        }
    }

    /// Norm of a functional under the pairing Σ w_j a_j x_j.
    pub fn dual_norm(&self, a: &[f64]) -> Result<f64> {
        self.check(a)?;
        self.require_banach()?;
        Ok(self.dual_norm_of(a))
    }

    pub(crate) fn dual_norm_of(&self, a: &[f64]) -> f64 {
        match &self.kind {
            NormKind::WeightedLr(r) => {
                weighted_lp(Some(&self.weights), a, r.conjugate().unwrap_or(Exponent::ONE))
            }
            NormKind::Custom(n) => n
                .dual_norm(&self.weights, a)
                .unwrap_or_else(|| fallback_support(n.as_ref(), &self.weights, a).0),
        }
    }

    /// A unit vector maximizing ⟨a, x⟩.
    pub fn ball_support(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.check(a)?;
        self.require_banach()?;
        Ok(self.ball_support_of(a))
    }

    pub(crate) fn ball_support_of(&self, a: &[f64]) -> Vec<f64> {
        match &self.kind {
            NormKind::WeightedLr(r) => {
                weighted_norming(Some(&self.weights), a, r.conjugate().unwrap_or(Exponent::ONE))
            }
            NormKind::Custom(n) => n
                .ball_support(&self.weights, a)
                .unwrap_or_else(|| fallback_support(n.as_ref(), &self.weights, a).1),
        }
    }

    /// A functional x' with dual norm one and ⟨x', u⟩ = ‖u‖.
    pub fn norming_functional(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        self.require_banach()?;
        self.norming_of(u)
    }

    pub(crate) fn norming_of(&self, u: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            NormKind::WeightedLr(r) => Ok(weighted_norming(Some(&self.weights), u, *r)),
            NormKind::Custom(n) => n
                .norming_functional(&self.weights, u)
                .ok_or_else(|| Error::NoNormingFunctional(n.name())),
        }
    }

    /// The dual space under the weighted pairing.
    pub fn dual(&self) -> Result<FunctionSpace> {
        self.require_banach()?;
        Ok(FunctionSpace {
            weights: self.weights.clone(),
            kind: match &self.kind {
                NormKind::WeightedLr(r) => NormKind::WeightedLr(r.conjugate()?),
                NormKind::Custom(n) => NormKind::Custom(Arc::new(DualNorm(n.clone()))),
            },
        })
    }

    fn require_banach(&self) -> Result<()> {
        if let NormKind::WeightedLr(r) = self.kind {
            r.require_banach("space exponent")?;
        }
        Ok(())
    }

    /// ‖u‖_{X_[p]} = ‖u^{1/p}‖^p for u ≥ 0.
    pub fn power_space_norm(&self, p: Exponent, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        if let Some((atom, value)) = u.iter().copied().enumerate().find(|(_, v)| *v < 0.0) {
            return Err(Error::NegativeCoordinate { atom, value });
        }
        match p {
            Exponent::Finite(p) if p == 1.0 => Ok(self.norm_of(u)),
            Exponent::Finite(p) => {
                let root: Vec<f64> = u.iter().map(|v| v.powf(1.0 / p)).collect();
                Ok(self.norm_of(&root).powf(p))
            }
            Exponent::Infinity => Err(Error::ExponentRelation("power space needs finite p".into())),
        }
    }

    /// AM-norm of x relative to x0: ‖x0‖ max_{x0_j>0} |x_j|/x0_j, ∞ if x escapes supp x0.
    pub fn am_norm_from_element(&self, x0: &[f64], x: &[f64]) -> Result<f64> {
        self.check(x0)?;
        self.check(x)?;
        if let Some((atom, value)) = x0.iter().copied().enumerate().find(|(_, v)| *v < 0.0) {
            return Err(Error::NegativeCoordinate { atom, value });
        }
        if x0.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("x0 must be nonzero".into()));
        }
        let n0 = self.norm_of(x0);
        let mut m = 0.0_f64;
        for (a, b) in x.iter().zip(x0) {
            if *b == 0.0 {
                if *a != 0.0 {
                    return Ok(f64::INFINITY);
                }
            } else {
                m = m.max(a.abs() / b);
            }
        }
        Ok(n0 * m)
    }

    pub(crate) fn indicator_norm(&self, j: usize) -> f64 {
        let mut e = vec![0.0; self.atoms()];
        e[j] = 1.0;
        self.norm_of(&e)
    }
}

/// Shorthand for the conjugate exponent.
pub fn conjugate_exponent(p: Exponent) -> Result<Exponent> {
    p.conjugate()
}

/// Coordinates of an element of a function space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeVector(pub Vec<f64>);

impl Deref for LatticeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for LatticeVector {
    fn from(v: Vec<f64>) -> Self {
        LatticeVector(v)
    }
}

/// A dense linear map between two function spaces, entries codomain × domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    domain: FunctionSpace,
    codomain: FunctionSpace,
    entries: Vec<Vec<f64>>,
}

impl OperatorMatrix {
    pub fn new(domain: FunctionSpace, codomain: FunctionSpace, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != codomain.atoms() {
            return Err(Error::DimensionMismatch { expected: codomain.atoms(), got: entries.len() });
        }
        for row in &entries {
            if row.len() != domain.atoms() {
                return Err(Error::DimensionMismatch { expected: domain.atoms(), got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("operator entries must be finite".into()));
            }
        }
        Ok(OperatorMatrix { domain, codomain, entries })
    }

    pub fn identity(space: FunctionSpace) -> Self {
        let n = space.atoms();
        let entries = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        OperatorMatrix { domain: space.clone(), codomain: space, entries }
    }

    pub fn zero(domain: FunctionSpace, codomain: FunctionSpace) -> Self {
        let entries = vec![vec![0.0; domain.atoms()]; codomain.atoms()];
        OperatorMatrix { domain, codomain, entries }
    }

    pub fn domain(&self) -> &FunctionSpace {
        &self.domain
    }
    pub fn codomain(&self) -> &FunctionSpace {
        &self.codomain
    }
    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }
    pub fn rows(&self) -> usize {
        self.codomain.atoms()
    }
    pub fn cols(&self) -> usize {
        self.domain.atoms()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.domain.check(x)?;
        Ok(self.apply_of(x))
    }

    pub(crate) fn apply_of(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Adjoint under the weighted pairings: (T^# y')_j = Σ_i ν_i T_ij y'_i / μ_j.
    pub(crate) fn adjoint_of(&self, y: &[f64]) -> Vec<f64> {
        let nu = self.codomain.weights();
        let mu = self.domain.weights();
        let mut out = vec![0.0; self.cols()];
        for (i, row) in self.entries.iter().enumerate() {
            let c = nu[i] * y[i];
            if c == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(row) {
                *o += c * t;
            }
        }
        out.iter_mut().zip(mu).for_each(|(o, m)| *o /= m);
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let entries = self.entries.iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
        OperatorMatrix { domain: self.domain.clone(), codomain: self.codomain.clone(), entries }
    }

    /// Entrywise absolute value.
    pub fn modulus(&self) -> Self {
        let entries = self.entries.iter().map(|r| r.iter().map(|v| v.abs()).collect()).collect();
        OperatorMatrix { domain: self.domain.clone(), codomain: self.codomain.clone(), entries }
    }

    pub fn with_spaces(&self, domain: FunctionSpace, codomain: FunctionSpace) -> Result<Self> {
        OperatorMatrix::new(domain, codomain, self.entries.clone())
    }

    /// S ∘ T.
    pub fn compose(&self, t: &OperatorMatrix) -> Result<Self> {
        if t.rows() != self.cols() {
            return Err(Error::DimensionMismatch { expected: self.cols(), got: t.rows() });
        }
        let entries = self
            .entries
            .iter()
            .map(|r| (0..t.cols()).map(|j| r.iter().zip(&t.entries).map(|(a, row)| a * row[j]).sum()).collect())
            .collect();
        OperatorMatrix::new(t.domain.clone(), self.codomain.clone(), entries)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().flatten().all(|v| *v >= 0.0)
    }
}

// ---------- JSON ----------

#[derive(Serialize, Deserialize)]
struct NormJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terms: Option<Vec<(f64, Exponent)>>,
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    atoms: usize,
    weights: Vec<f64>,
    norm: NormJson,
}

impl Serialize for FunctionSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let norm = match &self.kind {
            NormKind::WeightedLr(r) => NormJson { kind: "weighted_lr".into(), r: Some(*r), terms: None },
            NormKind::Custom(n) => {
                let v = n
                    .to_json()
                    .ok_or_else(|| serde::ser::Error::custom(format!("norm `{}` is not serializable", n.name())))?;
                let terms: SumOfLr = serde_json::from_value(v).map_err(serde::ser::Error::custom)?;
                NormJson { kind: "sum_lr".into(), r: None, terms: Some(terms.terms) }
            }
        };
        SpaceJson { atoms: self.atoms(), weights: self.weights.clone(), norm }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SpaceJson::deserialize(d)?;
        if raw.weights.len() != raw.atoms {
            return Err(D::Error::custom(format!(
                "atoms = {} but {} weights given",
                raw.atoms,
                raw.weights.len()
            )));
        }
        let sp = match raw.norm.kind.as_str() {
            "weighted_lr" | "lr" => {
                let r = raw.norm.r.ok_or_else(|| D::Error::custom("weighted_lr norm needs `r`"))?;
                FunctionSpace::weighted_lr(raw.weights, r)
            }
            "sum_lr" => {
                let terms = raw.norm.terms.ok_or_else(|| D::Error::custom("sum_lr norm needs `terms`"))?;
                FunctionSpace::custom(raw.weights, Arc::new(SumOfLr { terms }))
            }
            other => return Err(D::Error::custom(format!("unknown norm kind `{other}`"))),
        };
        sp.map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<f64>>,
    domain: FunctionSpace,
    codomain: FunctionSpace,
}

impl Serialize for OperatorMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson {
            rows: self.rows(),
            cols: self.cols(),
            entries: self.entries.clone(),
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = OperatorJson::deserialize(d)?;
        if raw.rows != raw.codomain.atoms() || raw.cols != raw.domain.atoms() {
            return Err(D::Error::custom("rows/cols disagree with the spaces"));
        }
        OperatorMatrix::new(raw.domain, raw.codomain, raw.entries).map_err(D::Error::custom)
    }
}
