//! Regularity, tensor norms, factorization and extension of operators between
//! finite atomic Banach function spaces.

pub mod ascent;
pub mod calculus;
pub mod error;
pub mod factor;
pub mod regular;
pub mod tensor;
pub mod exponent;
pub mod extension;
pub mod report;
pub mod suite;
mod family;
mod lp;
mod optim;
mod scalar;
pub mod space;

pub use ascent::{operator_norm, OpNormBound};
pub use calculus::*;
pub use error::{Counterexample, Error, Result};
pub use exponent::{exp, Exponent};
pub use space::{conjugate_exponent, DualNorm, FunctionSpace, LatticeNorm, LatticeVector, NormKind, OperatorMatrix, SumOfLr};
pub use regular::{
    bilinear_pt_norm, concavity_norm, convexity_norm, rho_analytic_upper, rho_growth_witness, rho_lower_bound,
    rho_oracle, rho_ratio, NormEstimate, RegularityParams, UpperKind, K_G,
};
pub use factor::{
    matrix_inequality_constant, maurey_rosenthal_factorize, mz_coincidence_sweep, mz_predicted, strong_factorize_lr,
    verify_factorization, FactorizationResult, MzCell, VerifyReport,
};
pub use tensor::{
    eps_norm, phi_pq_upper, pi_bounds, r_pq_bounds, tensor_norm_bounds, trace_duality_check, Tensor, TensorNorm,
    TensorNormBounds, TraceDualityReport,
};
pub use extension::{
    calderon_product_norm, dyadic_jn, dyadic_pn, extend_operator_lq, hahn_banach_extend, z_norm, DyadicLevel,
    Extension, Subspace, ZElement,
};
pub use report::{Report, RunConfig};
pub use suite::{verify_suite, SuiteReport};
