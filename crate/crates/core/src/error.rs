use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent {0}: {1}")]
    InvalidExponent(f64, &'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("exponent relation violated: {0}")]
    ExponentRelation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative coordinate {value} at atom {atom}")]
    NegativeCoordinate { atom: usize, value: f64 },
    #[error("no norming functional available for norm `{0}`")]
    NoNormingFunctional(String),
    #[error("size guard `{guard}` exceeded: {detail}")]
    SizeGuard { guard: &'static str, detail: String },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("operator vanishes on the given vector")]
    ZeroImage,
    #[error("no feasible weights at constant {constant} within {cuts} cuts (violation ratio {violation})")]
    Infeasible {
        constant: f64,
        cuts: usize,
        violation: f64,
        witness: Box<Counterexample>,
    },
    #[error("subspace basis is rank deficient (rank {rank} < {len})")]
    RankDeficient { rank: usize, len: usize },
    #[error("dyadic level {level} does not divide {atoms} atoms")]
    Divisibility { level: u32, atoms: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
}

/// A pair (x, y') violating a factorization inequality at the requested constant.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Counterexample {
    pub x: Vec<Vec<f64>>,
    pub y_dual: Vec<Vec<f64>>,
    pub lhs: f64,
    pub rhs_at_best_weights: f64,
}

pub type Result<T> = std::result::Result<T, Error>;
