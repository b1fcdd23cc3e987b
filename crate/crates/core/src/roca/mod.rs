//! ROCA: changepoint case models combined with mixed control models by Bayes' rule.

mod likelihood;
mod model;

use rayon::prelude::*;

pub use model::{CaseVariant, ChangepointModel, CS1_MU_TAU, CS1_SIGMA_TAU, CS1_WINDOW};

use crate::error::{Error, Result};
use crate::lmm::{subject_marginal_loglik, LmmFit, SubjectRecord};
use crate::numerics::{
    asymptotic_covariance, minimize, MleOptions, MleResult, Objective, TruncatedNormal,
};
use likelihood::{integrate, pooled_normal, GradVec, Obs, Prepared, TauLaw, NG};

/// log f(y | t, T): the trajectory likelihood marginalized over the changepoint.
pub fn case_loglik(subject: &SubjectRecord, model: &ChangepointModel, t_diag: f64) -> Result<f64> {
    loglik_obs(&subject.times, &subject.y, model, t_diag)
}

/// As [`case_loglik`] on raw observations.
pub fn loglik_obs(times: &[f64], y: &[f64], model: &ChangepointModel, t_diag: f64) -> Result<f64> {
    if times.is_empty() || times.len() != y.len() {
        return Err(Error::DimensionMismatch("case trajectory needs matching, non-empty times and values".into()));
    }
    let last = times[times.len() - 1];
    if t_diag < last - 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "diagnosis time {t_diag} precedes last screening {last}"
        )));
    }
    if model.variant == CaseVariant::Cs1 {
        let m = t_diag - model.mu_tau;
        TruncatedNormal::new(m, model.sigma_tau, t_diag - CS1_WINDOW, t_diag)?;
    }
    let o = Obs::new(times, y);
    let law = TauLaw::for_model(model, t_diag);
    let mut scratch = Vec::new();
    Ok(integrate(&o, &law, &Prepared::new(model), false, &mut scratch).0)
}

/// Case likelihood averaged over diagnosis times `last + G` for every gap G in the pool,
/// returned on the log scale.
pub fn case_marginal_lik_new(
    subject: &SubjectRecord,
    model: &ChangepointModel,
    gap_pool: &[f64],
) -> Result<f64> {
    if gap_pool.is_empty() {
        return Err(Error::InvalidArgument("gap pool is empty".into()));
    }
    let last = subject.last_time();
    let mut terms = Vec::with_capacity(gap_pool.len());
    for &g in gap_pool {
        terms.push(case_loglik(subject, model, last + g)?);
    }
    Ok(log_mean_exp(&terms))
}

/// Same quantity as [`case_marginal_lik_new`]. Under CS2 the changepoint densities are
/// averaged over the pool before integrating, which needs one set of trajectory
/// evaluations per subject instead of one per gap.
pub fn pooled_case_loglik(
    times: &[f64],
    y: &[f64],
    model: &ChangepointModel,
    gaps_sorted: &[f64],
) -> Result<f64> {
    if gaps_sorted.is_empty() {
        return Err(Error::InvalidArgument("gap pool is empty".into()));
    }
    if times.is_empty() || times.len() != y.len() {
        return Err(Error::DimensionMismatch("case trajectory needs matching, non-empty times and values".into()));
    }
    match model.variant {
        CaseVariant::Cs2 => Ok(pooled_normal(&Obs::new(times, y), model, gaps_sorted)),
        CaseVariant::Cs1 => {
            let last = times[times.len() - 1];
            let terms = gaps_sorted
                .iter()
                .map(|g| loglik_obs(times, y, model, last + g))
                .collect::<Result<Vec<f64>>>()?;
            Ok(log_mean_exp(&terms))
        }
    }
}

pub(crate) fn log_mean_exp(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + (v.iter().map(|x| (x - mx).exp()).sum::<f64>() / v.len() as f64).ln()
}

/// Posterior P(D=1 | Y) from the two log-likelihoods and the prior.
pub fn bayes_posterior(log_lik_case: f64, log_lik_control: f64, prior_case: f64) -> f64 {
    if log_lik_case == log_lik_control {
        return prior_case;
    }
    logistic(posterior_log_odds(log_lik_case, log_lik_control, prior_case))
}

/// logit P(D=1 | Y).
pub fn posterior_log_odds(log_lik_case: f64, log_lik_control: f64, prior_case: f64) -> f64 {
    if prior_case <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if prior_case >= 1.0 {
        return f64::INFINITY;
    }
    let ratio = log_lik_case - log_lik_control;
    let ratio = if ratio.is_nan() { 0.0 } else { ratio };
    prior_case.ln() - (-prior_case).ln_1p() + ratio
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A fitted case model with its optimizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseFit {
    pub model: ChangepointModel,
    pub mle: MleResult,
}

impl CaseFit {
    /// A case model with given parameters and no estimation uncertainty.
    pub fn fixed(model: ChangepointModel) -> Self {
        let w = model.working();
        let k = w.len();
        Self {
            mle: MleResult::from_working(
                ChangepointModel::param_specs(model.variant),
                w,
                f64::NAN,
                nalgebra::DMatrix::zeros(k, k),
                true,
                0,
                vec![false; k],
                false,
            ),
            model,
        }
    }
}

struct CaseObjective<'a> {
    variant: CaseVariant,
    cases: &'a [SubjectRecord],
}

impl CaseObjective<'_> {
    fn eval(&self, w: &[f64], want_grad: bool) -> (f64, GradVec) {
        let model = ChangepointModel::from_working(self.variant, w);
        let p = Prepared::new(&model);
        let parts: Vec<(f64, GradVec)> = self
            .cases
            .par_chunks(16)
            .map(|chunk| {
                let mut scratch = Vec::new();
                let mut ll = 0.0;
                let mut g = [0.0; NG];
                for s in chunk {
                    let o = Obs::new(&s.times, &s.y);
                    let law = TauLaw::for_model(&model, s.followup_time);
                    let (v, gv) = integrate(&o, &law, &p, want_grad, &mut scratch);
                    ll += v;
                    for (a, b) in g.iter_mut().zip(&gv) {
                        *a += b;
                    }
                }
                (ll, g)
            })
            .collect();
        let mut ll = 0.0;
        let mut g = [0.0; NG];
        for (v, gv) in parts {
            ll += v;
            for (a, b) in g.iter_mut().zip(&gv) {
                *a += b;
            }
        }
        (ll, g)
    }
}

impl Objective for CaseObjective<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        let v = -self.eval(w, false).0;
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn value_grad(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let (ll, gv) = self.eval(w, true);
        for (o, v) in g.iter_mut().zip(&gv) {
            *o = -v;
        }
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Data-driven starting values for the case model.
pub fn initial_case_model(cases: &[SubjectRecord], variant: CaseVariant) -> ChangepointModel {
    let early: Vec<f64> = cases
        .iter()
        .flat_map(|s| {
            s.times
                .iter()
                .zip(&s.y)
                .filter(move |(t, _)| **t <= s.followup_time - 3.0)
                .map(|(_, y)| *y)
        })
        .collect();
    let first: Vec<f64> = cases.iter().map(|s| s.y[0]).collect();
    let base = if early.len() >= 10 { &early } else { &first };
    let n = base.len().max(1) as f64;
    let mean = base.iter().sum::<f64>() / n;
    let sd = (base.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd.is_finite() && sd > 0.05 { sd } else { 0.5 };
    ChangepointModel {
        variant,
        theta0: mean,
        gamma0: 1.0,
        sigma_b0: 0.8 * sd,
        sigma_b1: 0.5,
        rho_b0b1: 0.0,
        sigma_xi: 0.6 * sd,
        mu_tau: CS1_MU_TAU,
        sigma_tau: CS1_SIGMA_TAU,
    }
}

/// Maximum-likelihood fit of the case model on cases with known diagnosis time.
pub fn fit_case_model(cases: &[SubjectRecord], variant: CaseVariant) -> Result<CaseFit> {
    fit_case_model_with(cases, variant, &MleOptions::default(), None)
}

pub fn fit_case_model_with(
    cases: &[SubjectRecord],
    variant: CaseVariant,
    opts: &MleOptions,
    init: Option<&ChangepointModel>,
) -> Result<CaseFit> {
    if cases.len() < 10 {
        return Err(Error::InvalidData(format!(
            "case model needs at least 10 cases, got {}",
            cases.len()
        )));
    }
    if let Some(s) = cases.iter().find(|s| !s.event) {
        return Err(Error::InvalidData(format!("subject {} is not a case", s.id)));
    }
    let start = match init {
        Some(m) => {
            let mut m = *m;
            m.variant = variant;
            if variant == CaseVariant::Cs1 {
                m.mu_tau = CS1_MU_TAU;
                m.sigma_tau = CS1_SIGMA_TAU;
            }
            m
        }
        None => initial_case_model(cases, variant),
    };
    let specs = ChangepointModel::param_specs(variant);
    let lower: Vec<f64> = specs.iter().map(|s| s.lower).collect();
    let upper: Vec<f64> = specs.iter().map(|s| s.upper).collect();
    let obj = CaseObjective { variant, cases };
    let x0 = start.working();
    if !obj.value(&x0).is_finite() {
        return Err(Error::Fit("case likelihood is not finite at the starting values".into()));
    }
    let out = minimize(&obj, &x0, &lower, &upper, opts);
    let (cov, pseudo) = asymptotic_covariance(&obj, &out.x, opts.hessian_step);
    if !out.converged {
        log::warn!("{} case model did not converge in {} iterations", variant.name(), out.iterations);
    }
    let model = ChangepointModel::from_working(variant, &out.x);
    let mle = MleResult::from_working(
        specs,
        out.x,
        out.value,
        cov,
        out.converged,
        out.iterations,
        out.at_bound,
        pseudo,
    );
    Ok(CaseFit { model, mle })
}

/// A complete ROCA predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct RocaFit {
    pub case: CaseFit,
    pub control: LmmFit,
    /// Gap times of the training cases, sorted ascending.
    pub case_gap_pool: Vec<f64>,
    pub prior_case: f64,
}

impl RocaFit {
    pub fn new(case: CaseFit, control: LmmFit, mut gaps: Vec<f64>, prior_case: f64) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::InvalidArgument("gap pool is empty".into()));
        }
        if !(prior_case > 0.0 && prior_case < 1.0) {
            return Err(Error::InvalidArgument(format!("prior {prior_case} outside (0, 1)")));
        }
        gaps.sort_by(|a, b| a.total_cmp(b));
        Ok(Self {
            case,
            control,
            case_gap_pool: gaps,
            prior_case,
        })
    }

    pub fn name(&self) -> String {
        format!("ROCA-{}-{}", self.case.model.variant.name(), self.control.spec.name())
    }
}

/// Fit the case model on `cases` and pair it with an already fitted control model.
pub fn fit_roca(
    cases: &[SubjectRecord],
    control: LmmFit,
    variant: CaseVariant,
    prior_case: f64,
) -> Result<RocaFit> {
    let case = fit_case_model(cases, variant)?;
    let gaps = cases.iter().map(|s| s.gap).collect();
    RocaFit::new(case, control, gaps, prior_case)
}

/// log P̃(Y | D=1) and log P(Y | D=0) for one subject.
pub fn roca_logliks(subject: &SubjectRecord, fit: &RocaFit) -> Result<(f64, f64)> {
    let lc = pooled_case_loglik(&subject.times, &subject.y, &fit.case.model, &fit.case_gap_pool)?;
    let l0 = subject_marginal_loglik(subject, &fit.control)?;
    Ok((lc, l0))
}

/// P(D=1 | Y) under a ROCA fit.
pub fn roca_risk(subject: &SubjectRecord, fit: &RocaFit) -> Result<f64> {
    let (lc, l0) = roca_logliks(subject, fit)?;
    Ok(bayes_posterior(lc, l0, fit.prior_case))
}
