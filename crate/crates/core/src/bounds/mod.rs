//! Closed-form and numerically optimized rate-distortion bounds.
//!
//! * [`gaussian`]: fixed-cardinality patterns of i.i.d. standard normal points
//!   under `rho2`.
//! * [`poisson`]: Poisson patterns with uniform intensity on the unit square
//!   under USOSPA.
//!
//! All rates are in nats.

pub mod gaussian;
pub mod optimize;
pub mod poisson;
pub mod special;

pub use gaussian::{
    default_epsilon, gaussian_pp_lower, gaussian_pp_upper, gaussian_pp_upper_terms,
    gaussian_vector_rd, GaussianBoundParams, GaussianUpperTerms,
};
pub use optimize::maximize_concave_1d;
pub use poisson::{
    poisson_gamma_tilde_general, poisson_log_gamma_tilde_unit_square, poisson_lower_unit_square,
    poisson_upper_rate, poisson_upper_unit_square, PoissonBoundParams, PoissonLower,
};
pub use special::{binary_entropy, chi2_cdf, log_factorial};
