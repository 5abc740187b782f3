//! Metric geometry of collapsing tangent bundles: Sasaki lengths, holonomic
//! fiber metrics, quotient models and Gromov-Hausdorff bounds.

mod fiber;
mod finite;
mod gh;
mod holonomic;
mod sasaki;

pub use fiber::{
    berger_product_check, closed_base_loop, fiber_loop_dictionary, model_metric, product_limit_check,
    sample_fiber_metric, FiberOptions, FiberSample, ProductCheck, ProductOptions, MAX_FIBER_SAMPLES,
    MAX_PRODUCT_SAMPLES,
};
pub use finite::{metric_closure, FiniteMetricSpace, TRIANGLE_SLACK};
pub use gh::{distortion, gh_upper_bound, is_correspondence, GhBound, GhOptions, GhStatus, EXACT_PAIR_LIMIT};
pub use holonomic::{
    holonomic_distance, length_norm_estimate, limit_fiber_distance, HolonomyDictionary, LengthEstimate,
    LimitFiberModel, INVERSE_MATCH_TOL,
};
pub use sasaki::sasaki_curve_length;
