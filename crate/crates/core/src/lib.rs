//! Optimal portfolio diversification and leverage.
//!
//! Cross-sectional weights come from maximizing exponential (CARA) utility under
//! compound return distributions: Gaussian returns with an uncertain mean, Wishart
//! covariance noise, or asymmetric Laplace returns. Leverage comes from the
//! generalized mean-variance (GMV) of logarithmic wealth,
//! `E[U] - (λ/2) Var[U]`, which yields fractional Kelly betting. The two are
//! combined as `w_f = f* · w*`.
//!
//! Every closed form in the crate has an independent check in [`mc_oracle`]:
//! Monte-Carlo path simulation or Gaussian quadrature of the defining integral.

// `!(x > 0.0)` is how domain checks here reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocators;
pub mod error;
pub mod gmv_objectives;
pub mod kelly;
pub mod linalg;
pub mod market_model;
pub mod mc_oracle;
pub mod numerics;

pub use error::{Error, Result};
