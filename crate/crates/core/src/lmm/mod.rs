//! Linear mixed models `y_i = X_i θ + Z_i b_i + ξ_i` fitted by marginal maximum likelihood.

mod fit;
pub(crate) mod kernel;
mod record;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{CorrelatedScales, MleResult, ParamSpec};
use crate::splines::SplineBasisSpec;

pub use fit::{fit_lmm, fit_lmm_with, initial_working};
pub use record::SubjectRecord;

use kernel::SubjectStats;

/// Fixed and random design rules.
#[derive(Debug, Clone, PartialEq)]
pub enum LmmSpec {
    /// Random intercept around a constant mean.
    Cn1,
    /// Random intercept and slope in time.
    Cn2,
    /// As `Cn2` with baseline age as a fixed covariate.
    Cn3,
    /// Natural-spline age and time effects; random intercept plus random spline-time effects.
    Spline {
        age: SplineBasisSpec,
        time: SplineBasisSpec,
    },
}

impl LmmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LmmSpec::Cn1 => "CN1",
            LmmSpec::Cn2 => "CN2",
            LmmSpec::Cn3 => "CN3",
            LmmSpec::Spline { .. } => "spline",
        }
    }

    /// Number of fixed effects.
    pub fn p(&self) -> usize {
        match self {
            LmmSpec::Cn1 => 1,
            LmmSpec::Cn2 => 2,
            LmmSpec::Cn3 => 3,
            LmmSpec::Spline { .. } => 7,
        }
    }

    /// Number of random effects.
    pub fn q(&self) -> usize {
        match self {
            LmmSpec::Cn1 => 1,
            LmmSpec::Cn2 | LmmSpec::Cn3 => 2,
            LmmSpec::Spline { .. } => 4,
        }
    }

    pub fn fixed_names(&self) -> Vec<String> {
        match self {
            LmmSpec::Cn1 => vec!["theta0".into()],
            LmmSpec::Cn2 => vec!["theta0".into(), "theta1".into()],
            LmmSpec::Cn3 => vec!["theta0".into(), "theta1".into(), "theta2".into()],
            LmmSpec::Spline { .. } => (0..7).map(|i| format!("theta{i}")).collect(),
        }
    }

    /// Model-scale parameter specs in working-vector order:
    /// θ, random-effect SDs, CPCs, residual SD.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let q = self.q();
        let mut out: Vec<ParamSpec> = self.fixed_names().into_iter().map(ParamSpec::identity).collect();
        out.extend((0..q).map(|i| ParamSpec::log(format!("sigma_b{i}"))));
        for i in 0..q {
            for j in 0..i {
                out.push(ParamSpec::fisher_z(format!("cpc_b{j}_b{i}")));
            }
        }
        out.push(ParamSpec::log("sigma_xi"));
        out
    }

    pub fn n_params(&self) -> usize {
        self.p() + CorrelatedScales::n_working(self.q()) + 1
    }

    /// X (n×p) and Z (n×q) for one subject.
    pub fn design(&self, times: &[f64], age: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = times.len();
        match self {
            LmmSpec::Cn1 => (DMatrix::from_element(n, 1, 1.0), DMatrix::from_element(n, 1, 1.0)),
            LmmSpec::Cn2 => {
                let z = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { times[i] });
                (z.clone(), z)
            }
            LmmSpec::Cn3 => (
                DMatrix::from_fn(n, 3, |i, j| [1.0, times[i], age][j]),
                DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { times[i] }),
            ),
            LmmSpec::Spline { age: ab, time: tb } => {
                let ba = ab.eval(age);
                let mut x = DMatrix::zeros(n, 7);
                let mut z = DMatrix::zeros(n, 4);
                for (i, &t) in times.iter().enumerate() {
                    let bt = tb.eval(t);
                    x[(i, 0)] = 1.0;
                    z[(i, 0)] = 1.0;
                    for l in 0..3 {
                        x[(i, 1 + l)] = ba[l];
                        x[(i, 4 + l)] = bt[l];
                        z[(i, 1 + l)] = bt[l];
                    }
                }
                (x, z)
            }
        }
    }

    pub(crate) fn stats(&self, times: &[f64], y: &[f64], age: f64) -> SubjectStats {
        let (x, z) = self.design(times, age);
        SubjectStats::new(&x, &z, &DVector::from_column_slice(y))
    }
}

/// A fitted (or fixed) linear mixed model.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmFit {
    pub spec: LmmSpec,
    pub theta: Vec<f64>,
    pub scales: CorrelatedScales,
    pub sigma_xi: f64,
    /// Optimizer output over the working vector `[θ, ln σ_b, atanh cpc, ln σ_ξ]`.
    pub mle: MleResult,
}

impl LmmFit {
    /// A model with given parameters and no estimation uncertainty.
    pub fn from_parameters(
        spec: LmmSpec,
        theta: Vec<f64>,
        scales: CorrelatedScales,
        sigma_xi: f64,
    ) -> Result<Self> {
        if theta.len() != spec.p() || scales.q() != spec.q() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} fixed and {} random effects",
                spec.name(),
                spec.p(),
                spec.q()
            )));
        }
        if !(sigma_xi > 0.0) || scales.sd.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be positive".into()));
        }
        let mut working = theta.clone();
        working.extend(scales.working());
        working.push(sigma_xi.ln());
        let k = working.len();
        let mle = MleResult::from_working(
            spec.param_specs(),
            working,
            f64::NAN,
            DMatrix::zeros(k, k),
            true,
            0,
            vec![false; k],
            false,
        );
        Ok(Self {
            spec,
            theta,
            scales,
            sigma_xi,
            mle,
        })
    }

    /// Rebuild the model from a working-scale parameter vector (e.g. a bootstrap draw).
    pub fn with_working(&self, w: &[f64]) -> Self {
        let (p, q) = (self.spec.p(), self.spec.q());
        let k = CorrelatedScales::n_working(q);
        assert_eq!(w.len(), p + k + 1, "working vector length");
        Self {
            spec: self.spec.clone(),
            theta: w[..p].to_vec(),
            scales: CorrelatedScales::from_working(q, &w[p..p + k]),
            sigma_xi: w[p + k].exp(),
            mle: self.mle.clone(),
        }
    }

    pub fn working(&self) -> Vec<f64> {
        let mut w = self.theta.clone();
        w.extend(self.scales.working());
        w.push(self.sigma_xi.ln());
        w
    }

    pub fn sigma_b(&self) -> &[f64] {
        &self.scales.sd
    }

    pub fn corr_b(&self) -> DMatrix<f64> {
        self.scales.correlation()
    }

    pub fn cov_b(&self) -> DMatrix<f64> {
        self.scales.covariance()
    }

    pub fn loglik(&self) -> f64 {
        -self.mle.neg_loglik
    }

    pub(crate) fn parts(&self) -> (DVector<f64>, DMatrix<f64>, f64) {
        (
            DVector::from_column_slice(&self.theta),
            self.scales.factor(),
            self.sigma_xi * self.sigma_xi,
        )
    }

    /// Marginal log-likelihood of raw observations (may be empty).
    pub fn loglik_obs(&self, times: &[f64], y: &[f64], age: f64) -> f64 {
        let s = self.spec.stats(times, y, age);
        let (theta, l, s2) = self.parts();
        kernel::loglik(&s, &theta, &l, s2, None)
    }

    /// Posterior moments of b given raw observations (may be empty).
    pub fn posterior_obs(&self, times: &[f64], y: &[f64], age: f64) -> (DVector<f64>, DMatrix<f64>) {
        let s = self.spec.stats(times, y, age);
        let (theta, l, s2) = self.parts();
        kernel::posterior(&s, &theta, &l, s2).unwrap_or_else(|| {
            let q = self.spec.q();
            (DVector::zeros(q), self.cov_b())
        })
    }
}

/// log N(y; Xθ, ZΣ_bZᵀ + σ_ξ²I) for one subject.
pub fn subject_marginal_loglik(subject: &SubjectRecord, fit: &LmmFit) -> Result<f64> {
    if subject.times.len() != subject.y.len() {
        return Err(Error::DimensionMismatch(format!("subject {}", subject.id)));
    }
    Ok(fit.loglik_obs(&subject.times, &subject.y, subject.age))
}

/// Posterior mean and covariance of the subject's random effects.
pub fn posterior_random_effects(
    subject: &SubjectRecord,
    fit: &LmmFit,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if subject.times.len() != subject.y.len() {
        return Err(Error::DimensionMismatch(format!("subject {}", subject.id)));
    }
    Ok(fit.posterior_obs(&subject.times, &subject.y, subject.age))
}
