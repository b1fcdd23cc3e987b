//! Shared random effects model: one spline mixed model for everyone, then a probit
//! outcome model on the random effects.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lmm::{fit_lmm, posterior_random_effects, LmmFit, SubjectRecord};
use crate::numerics::{
    asymptotic_covariance, log_norm_pdf, minimize, norm_cdf, norm_quantile, MleOptions,
    MleResult, Objective, ParamSpec,
};
use crate::pmm::spline_spec;

/// Bound on every link coefficient (working scale = model scale).
pub const ALPHA_CAP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SremLinkFit {
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub mle: MleResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SremFit {
    pub longitudinal: LmmFit,
    pub link: SremLinkFit,
}

/// Φ((α₀ + αᵀm) / √(1 + αᵀCα)).
pub fn probit_risk(alpha0: f64, alpha: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    norm_cdf(probit_index(alpha0, alpha, mean, cov))
}

pub fn probit_index(alpha0: f64, alpha: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let a = DVector::from_column_slice(alpha);
    (alpha0 + a.dot(mean)) / (1.0 + a.dot(&(cov * &a))).sqrt()
}

struct LinkObjective {
    moments: Vec<(DVector<f64>, DMatrix<f64>)>,
    events: Vec<bool>,
}

/// log Φ(x) and φ(x)/Φ(x).
fn log_cdf_and_ratio(x: f64) -> (f64, f64) {
    let p = norm_cdf(x);
    if p > 1e-300 {
        (p.ln(), (log_norm_pdf(x) - p.ln()).exp())
    } else {
        // asymptotic tail for x ≪ 0
        let r = -x + 1.0 / (-x);
        (log_norm_pdf(x) - r.ln(), r)
    }
}

impl Objective for LinkObjective {
    fn value(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.value_grad(w, &mut g)
    }

    fn value_grad(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let q = w.len() - 1;
        let a = DVector::from_column_slice(&w[1..]);
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut nll = 0.0;
        for ((m, c), &d) in self.moments.iter().zip(&self.events) {
            let ca = c * &a;
            let s = (1.0 + a.dot(&ca)).sqrt();
            let num = w[0] + a.dot(m);
            let eta = num / s;
            // P(D=0) = Φ(−η)
            let (lp, ratio) = if d { log_cdf_and_ratio(eta) } else { log_cdf_and_ratio(-eta) };
            nll -= lp;
            let dl_deta = if d { ratio } else { -ratio };
            g[0] -= dl_deta / s;
            for k in 0..q {
                let deta = m[k] / s - num * ca[k] / (s * s * s);
                g[k + 1] -= dl_deta * deta;
            }
        }
        nll
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// Two-stage fit: spline mixed model on all subjects, then the probit link on the
/// posterior random-effect moments.
pub fn fit_srem(data: &[SubjectRecord]) -> Result<SremFit> {
    let n_events = data.iter().filter(|s| s.event).count();
    if n_events == 0 || n_events == data.len() {
        return Err(Error::InvalidData("shared random effects model needs both outcomes".into()));
    }
    let spec = spline_spec(data)?;
    let longitudinal = fit_lmm(data, &spec)?;
    let link = fit_link(data, &longitudinal)?;
    Ok(SremFit { longitudinal, link })
}

/// Stage 2 alone, given a longitudinal fit.
pub fn fit_link(data: &[SubjectRecord], longitudinal: &LmmFit) -> Result<SremLinkFit> {
    let q = longitudinal.spec.q();
    let moments = data
        .iter()
        .map(|s| posterior_random_effects(s, longitudinal))
        .collect::<Result<Vec<_>>>()?;
    let events: Vec<bool> = data.iter().map(|s| s.event).collect();
    let prevalence = events.iter().filter(|e| **e).count() as f64 / events.len() as f64;
    let specs: Vec<ParamSpec> = (0..=q)
        .map(|k| ParamSpec::identity(format!("alpha{k}")).bounded(-ALPHA_CAP, ALPHA_CAP))
        .collect();
    let mut x0 = vec![0.0; q + 1];
    x0[0] = norm_quantile(prevalence);
    let obj = LinkObjective { moments, events };
    let opts = MleOptions::default();
    let lower = vec![-ALPHA_CAP; q + 1];
    let upper = vec![ALPHA_CAP; q + 1];
    let out = minimize(&obj, &x0, &lower, &upper, &opts);
    let (cov, pseudo) = asymptotic_covariance(&obj, &out.x, opts.hessian_step);
    if out.at_bound.iter().any(|b| *b) {
        log::warn!("probit link coefficients hit the ±{ALPHA_CAP} cap (separation)");
    }
    let mle = MleResult::from_working(
        specs,
        out.x.clone(),
        out.value,
        cov,
        out.converged,
        out.iterations,
        out.at_bound,
        pseudo,
    );
    Ok(SremLinkFit {
        alpha0: out.x[0],
        alpha: out.x[1..].to_vec(),
        mle,
    })
}

pub fn srem_risk(subject: &SubjectRecord, fit: &SremFit) -> Result<f64> {
    Ok(norm_cdf(srem_index(subject, fit)?))
}

/// The probit index; risk is Φ of this.
pub fn srem_index(subject: &SubjectRecord, fit: &SremFit) -> Result<f64> {
    let (m, c) = posterior_random_effects(subject, &fit.longitudinal)?;
    Ok(probit_index(fit.link.alpha0, &fit.link.alpha, &m, &c))
}

/// Risk with no observations: the population-marginal probability.
pub fn srem_marginal_risk(fit: &SremFit) -> f64 {
    let q = fit.longitudinal.spec.q();
    probit_risk(fit.link.alpha0, &fit.link.alpha, &DVector::zeros(q), &fit.longitudinal.cov_b())
}

/// log P(D=1|Y) − log P(D=0|Y) from the probit index, stable in both tails.
pub fn probit_log_odds(index: f64) -> f64 {
    let lp = log_cdf_and_ratio(index).0;
    let lq = log_cdf_and_ratio(-index).0;
    lp - lq
}
