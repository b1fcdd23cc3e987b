//! Early-detection risk prediction from longitudinal biomarker trajectories.
//!
//! Three families of predictors are provided:
//!
//! - [`roca`]: changepoint case models (CS1, CS2) paired with linear mixed control
//!   models (CN1, CN2, CN3), combined by Bayes' rule after marginalizing the unknown
//!   diagnosis time over a pool of observed gap times.
//! - [`pmm`]: a pattern mixture model with a natural cubic spline case model.
//! - [`srem`]: a shared random effects model with a probit outcome link.
//!
//! [`simulation`] generates screening cohorts, [`evaluation`] computes time-dependent
//! AUCs, cross-validated risk tables and parametric bootstrap intervals, and
//! [`methods`] ties everything together under the ten named method variants.

pub mod error;
pub mod evaluation;
pub mod lmm;
pub mod methods;
pub mod numerics;
pub mod pmm;
pub mod roca;
pub mod simulation;
pub mod splines;
pub mod srem;

pub use error::{Error, Result};
pub use lmm::SubjectRecord;
pub use methods::{CaseVariant, ControlVariant, FittedMethod, Method, Score};
