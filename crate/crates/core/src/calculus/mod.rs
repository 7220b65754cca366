//! Discrete objects of pathwise calculus along a partition level.
//!
//! Every Stieltjes sum here is a left-point sum over the cells of one
//! partition; reductions use [`pairwise_sum`](crate::numeric::pairwise_sum)
//! so results do not depend on scheduling.

mod decomposition;
mod integral;
mod isometry;
mod ito;
mod qv;
mod remainder;

pub use decomposition::{
    qv_precondition, rough_smooth_decompose, rough_smooth_level, DecompositionLevel, QvPrecondition,
    RoughSmoothDecomposition,
};
pub use integral::{change_of_variable_residual, follmer_integral, riemann_sum, CovTerms, IntegralEstimate, Variant};
pub use isometry::{isometry_gap, isometry_level, IsometryLevel};
pub use ito::{ito_isometry_mc, ItoMcOptions, ItoMcResult};
pub use qv::{cross_variation, quadratic_variation, qv_level, qv_terminal, LevelQv, StepMatrixFunction};
pub use remainder::{
    expansion_residual, expansion_samples, remainder_exponent_fit, remainder_samples, ExponentFit, RemainderSample,
    REMAINDER_FLOOR,
};
