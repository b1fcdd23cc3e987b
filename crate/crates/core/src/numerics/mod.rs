//! Shared numerical kernels.

mod covparam;
mod mvn;
mod normal;
mod optim;
mod quadrature;

pub use covparam::CorrelatedScales;
pub use mvn::{cholesky, mvn_logpdf};
pub use normal::{
    log_norm_pdf, norm_cdf, norm_quantile, norm_pdf, norm_sf, TruncatedNormal, LN_SQRT_2PI,
};
pub use optim::{
    asymptotic_covariance, minimize, maximize_likelihood, MinimizeOutcome, MleOptions, MleResult,
    Objective, ParamSpec, Transform,
};
pub use quadrature::{
    expect_under_normal, gauss_hermite, gauss_legendre, legendre_cached, QuadratureKind,
    QuadratureRule,
};
