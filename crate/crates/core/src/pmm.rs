//! Pattern mixture model: spline mixed model for cases, CN-type model for controls,
//! combined by Bayes' rule without any diagnosis-time marginalization.

use crate::error::{Error, Result};
use crate::lmm::{fit_lmm, subject_marginal_loglik, LmmFit, LmmSpec, SubjectRecord};
use crate::methods::ControlVariant;
use crate::roca::bayes_posterior;
use crate::splines::make_basis_spec;

#[derive(Debug, Clone, PartialEq)]
pub struct PmmFit {
    /// Spline mixed model; its spec carries the age and time bases.
    pub case_model: LmmFit,
    pub control_model: LmmFit,
    pub prior_case: f64,
}

impl PmmFit {
    pub fn name(&self) -> String {
        format!("PMM-{}", self.control_model.spec.name())
    }
}

/// Spline design with knots from the given subjects: ages one per subject, times pooled.
pub fn spline_spec(subjects: &[SubjectRecord]) -> Result<LmmSpec> {
    let ages: Vec<f64> = subjects.iter().map(|s| s.age).collect();
    let times: Vec<f64> = subjects.iter().flat_map(|s| s.times.iter().copied()).collect();
    Ok(LmmSpec::Spline {
        age: make_basis_spec(&ages)?,
        time: make_basis_spec(&times)?,
    })
}

/// Fit the spline case model with knots placed from the cases.
pub fn fit_case_spline(cases: &[SubjectRecord]) -> Result<LmmFit> {
    let spec = spline_spec(cases)?;
    fit_lmm(cases, &spec)
}

pub fn fit_pmm(
    cases: &[SubjectRecord],
    controls: &[SubjectRecord],
    control_variant: ControlVariant,
) -> Result<PmmFit> {
    let control = fit_lmm(controls, &control_variant.spec())?;
    let prior = cases.len() as f64 / (cases.len() + controls.len()) as f64;
    pmm_from_parts(fit_case_spline(cases)?, control, prior)
}

pub fn pmm_from_parts(case_model: LmmFit, control_model: LmmFit, prior_case: f64) -> Result<PmmFit> {
    if !matches!(case_model.spec, LmmSpec::Spline { .. }) {
        return Err(Error::InvalidArgument("PMM case model must use the spline design".into()));
    }
    if !(prior_case > 0.0 && prior_case < 1.0) {
        return Err(Error::InvalidArgument(format!("prior {prior_case} outside (0, 1)")));
    }
    Ok(PmmFit {
        case_model,
        control_model,
        prior_case,
    })
}

pub fn pmm_logliks(subject: &SubjectRecord, fit: &PmmFit) -> Result<(f64, f64)> {
    Ok((
        subject_marginal_loglik(subject, &fit.case_model)?,
        subject_marginal_loglik(subject, &fit.control_model)?,
    ))
}

pub fn pmm_risk(subject: &SubjectRecord, fit: &PmmFit) -> Result<f64> {
    let (lc, l0) = pmm_logliks(subject, fit)?;
    Ok(bayes_posterior(lc, l0, fit.prior_case))
}
