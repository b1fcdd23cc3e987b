//! The ten named predictors and a suite that fits shared components once.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lmm::{fit_lmm, LmmFit, LmmSpec, SubjectRecord};
use crate::numerics::MleResult;
use crate::pmm::{fit_case_spline, pmm_from_parts, PmmFit};
use crate::roca::{
    fit_case_model, pooled_case_loglik, posterior_log_odds, CaseFit, ChangepointModel, RocaFit,
};
use crate::srem::{fit_srem, probit_log_odds, srem_index, SremFit, SremLinkFit};

pub use crate::roca::CaseVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlVariant {
    /// Random intercept.
    Cn1,
    /// Fixed slope, correlated random intercept and slope.
    Cn2,
    /// CN2 plus a quadratic age effect.
    Cn3,
}

impl ControlVariant {
    pub const ALL: [ControlVariant; 3] = [Self::Cn1, Self::Cn2, Self::Cn3];

    pub fn spec(self) -> LmmSpec {
        match self {
            Self::Cn1 => LmmSpec::Cn1,
            Self::Cn2 => LmmSpec::Cn2,
            Self::Cn3 => LmmSpec::Cn3,
        }
    }

    pub fn name(self) -> &'static str {
        self.spec().name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Roca(CaseVariant, ControlVariant),
    Pmm(ControlVariant),
    Srem,
}

impl Method {
    /// All ten variants in reporting order.
    pub fn all() -> Vec<Method> {
        let mut v = Vec::with_capacity(10);
        for cs in [CaseVariant::Cs1, CaseVariant::Cs2] {
            for cn in ControlVariant::ALL {
                v.push(Method::Roca(cs, cn));
            }
        }
        v.extend(ControlVariant::ALL.map(Method::Pmm));
        v.push(Method::Srem);
        v
    }

    /// Display name such as `ROCA-CS2-CN3`.
    pub fn name(self) -> String {
        match self {
            Method::Roca(cs, cn) => format!("ROCA-{}-{}", cs.name(), cn.name()),
            Method::Pmm(cn) => format!("PMM-{}", cn.name()),
            Method::Srem => "SREM".to_string(),
        }
    }

    /// Config key such as `roca-cs2-cn3`.
    pub fn key(self) -> String {
        self.name().to_ascii_lowercase()
    }

    pub fn parse(s: &str) -> Option<Method> {
        let s = s.trim().to_ascii_lowercase();
        Method::all().into_iter().find(|m| m.key() == s)
    }

    pub fn family(self) -> &'static str {
        match self {
            Method::Roca(..) => "ROCA",
            Method::Pmm(_) => "PMM",
            Method::Srem => "SREM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A risk score together with the log-odds it came from; ranking on the log-odds
/// avoids ties when probabilities saturate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub risk: f64,
    pub log_odds: f64,
}

impl Score {
    pub fn from_log_odds(log_odds: f64) -> Self {
        Self {
            risk: crate::roca::logistic(log_odds),
            log_odds,
        }
    }
}

/// A fitted predictor of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedMethod {
    Roca(RocaFit),
    Pmm(PmmFit),
    Srem(SremFit),
}

impl FittedMethod {
    pub fn method(&self) -> Method {
        match self {
            FittedMethod::Roca(f) => Method::Roca(f.case.model.variant, control_variant(&f.control)),
            FittedMethod::Pmm(f) => Method::Pmm(control_variant(&f.control_model)),
            FittedMethod::Srem(_) => Method::Srem,
        }
    }

    pub fn score(&self, subject: &SubjectRecord) -> Result<Score> {
        if subject.times.is_empty() {
            return Err(Error::InvalidData(format!("subject {} has no observations", subject.id)));
        }
        let lo = match self {
            FittedMethod::Roca(f) => {
                let lc = pooled_case_loglik(&subject.times, &subject.y, &f.case.model, &f.case_gap_pool)?;
                let l0 = f.control.loglik_obs(&subject.times, &subject.y, subject.age);
                posterior_log_odds(lc, l0, f.prior_case)
            }
            FittedMethod::Pmm(f) => {
                let lc = f.case_model.loglik_obs(&subject.times, &subject.y, subject.age);
                let l0 = f.control_model.loglik_obs(&subject.times, &subject.y, subject.age);
                posterior_log_odds(lc, l0, f.prior_case)
            }
            FittedMethod::Srem(f) => probit_log_odds(srem_index(subject, f)?),
        };
        Ok(Score::from_log_odds(lo))
    }

    /// Any component whose optimizer output is flagged.
    pub fn flagged(&self) -> bool {
        self.components().iter().any(|m| m.flagged())
    }

    /// Every component's optimizer met its convergence test.
    pub fn converged(&self) -> bool {
        self.components().iter().all(|m| m.converged)
    }

    fn components(&self) -> Vec<&MleResult> {
        match self {
            FittedMethod::Roca(f) => vec![&f.case.mle, &f.control.mle],
            FittedMethod::Pmm(f) => vec![&f.case_model.mle, &f.control_model.mle],
            FittedMethod::Srem(f) => vec![&f.longitudinal.mle, &f.link.mle],
        }
    }

    /// A copy with every component replaced by a draw from its asymptotic normal
    /// distribution on the working scale. Components are fitted separately, so they are
    /// drawn independently. Draws outside the parameter bounds or non-finite are
    /// redrawn; the number of rejections is returned alongside.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R) -> (Self, usize) {
        let mut rejected = 0;
        let mut draw = |mle: &MleResult| -> Vec<f64> {
            for _ in 0..1000 {
                let w = mle.draw_working(rng);
                let ok = w
                    .iter()
                    .zip(&mle.params)
                    .all(|(v, p)| v.is_finite() && *v >= p.lower && *v <= p.upper);
                if ok {
                    return w;
                }
                rejected += 1;
            }
            mle.working.clone()
        };
        let out = match self {
            FittedMethod::Roca(f) => {
                let case = ChangepointModel::from_working(f.case.model.variant, &draw(&f.case.mle));
                let mut g = f.clone();
                g.case = CaseFit { model: case, mle: f.case.mle.clone() };
                g.control = f.control.with_working(&draw(&f.control.mle));
                FittedMethod::Roca(g)
            }
            FittedMethod::Pmm(f) => {
                let mut g = f.clone();
                g.case_model = f.case_model.with_working(&draw(&f.case_model.mle));
                g.control_model = f.control_model.with_working(&draw(&f.control_model.mle));
                FittedMethod::Pmm(g)
            }
            FittedMethod::Srem(f) => {
                let longitudinal = f.longitudinal.with_working(&draw(&f.longitudinal.mle));
                let a = draw(&f.link.mle);
                FittedMethod::Srem(SremFit {
                    longitudinal,
                    link: SremLinkFit {
                        alpha0: a[0],
                        alpha: a[1..].to_vec(),
                        mle: f.link.mle.clone(),
                    },
                })
            }
        };
        (out, rejected)
    }
}

fn control_variant(fit: &LmmFit) -> ControlVariant {
    match fit.spec {
        LmmSpec::Cn1 => ControlVariant::Cn1,
        LmmSpec::Cn2 => ControlVariant::Cn2,
        _ => ControlVariant::Cn3,
    }
}

/// Split a training set into (cases, controls) by the event flag.
pub fn split_by_event(data: &[SubjectRecord]) -> (Vec<SubjectRecord>, Vec<SubjectRecord>) {
    data.iter().cloned().partition(|s| s.event)
}

fn check_classes(cases: &[SubjectRecord], controls: &[SubjectRecord]) -> Result<f64> {
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::InvalidData(format!(
            "training data needs cases and controls, got {} and {}",
            cases.len(),
            controls.len()
        )));
    }
    Ok(cases.len() as f64 / (cases.len() + controls.len()) as f64)
}

/// Fit one method on a training set.
pub fn fit_method(method: Method, train: &[SubjectRecord]) -> Result<FittedMethod> {
    let mut fits = fit_methods(&[method], train)?;
    fits.remove(&method).expect("requested method present")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Component {
    Control(ControlVariant),
    Case(CaseVariant),
    CaseSpline,
    Srem,
}

enum Fitted {
    Lmm(LmmFit),
    Case(CaseFit),
    Srem(SremFit),
}

/// Fit several methods on one training set, sharing the case and control components
/// between variants. Components are fitted in parallel; a component failure is
/// reported for every method that needs it.
pub fn fit_methods(methods: &[Method], train: &[SubjectRecord]) -> Result<BTreeMap<Method, Result<FittedMethod>>> {
    let (cases, controls) = split_by_event(train);
    let prior = check_classes(&cases, &controls)?;
    let mut needed: Vec<Component> = Vec::new();
    for &m in methods {
        match m {
            Method::Roca(cs, cn) => needed.extend([Component::Case(cs), Component::Control(cn)]),
            Method::Pmm(cn) => needed.extend([Component::CaseSpline, Component::Control(cn)]),
            Method::Srem => needed.push(Component::Srem),
        }
    }
    needed.sort();
    needed.dedup();
    let fitted: BTreeMap<Component, Result<Fitted>> = needed
        .par_iter()
        .map(|&c| {
            let r = match c {
                Component::Control(cn) => fit_lmm(&controls, &cn.spec()).map(Fitted::Lmm),
                Component::Case(cs) => fit_case_model(&cases, cs).map(Fitted::Case),
                Component::CaseSpline => fit_case_spline(&cases).map(Fitted::Lmm),
                Component::Srem => fit_srem(train).map(Fitted::Srem),
            };
            (c, r)
        })
        .collect();
    let lmm = |c: Component| -> Result<LmmFit> {
        match &fitted[&c] {
            Ok(Fitted::Lmm(f)) => Ok(f.clone()),
            Ok(_) => unreachable!("component kind"),
            Err(e) => Err(e.clone()),
        }
    };
    let gaps: Vec<f64> = cases.iter().map(|s| s.gap).collect();
    let mut out = BTreeMap::new();
    for &m in methods {
        let r = match m {
            Method::Roca(cs, cn) => match &fitted[&Component::Case(cs)] {
                Ok(Fitted::Case(case)) => lmm(Component::Control(cn))
                    .and_then(|control| RocaFit::new(case.clone(), control, gaps.clone(), prior))
                    .map(FittedMethod::Roca),
                Ok(_) => unreachable!("component kind"),
                Err(e) => Err(e.clone()),
            },
            Method::Pmm(cn) => lmm(Component::CaseSpline).and_then(|case| {
                let control = lmm(Component::Control(cn))?;
                pmm_from_parts(case, control, prior).map(FittedMethod::Pmm)
            }),
            Method::Srem => match &fitted[&Component::Srem] {
                Ok(Fitted::Srem(f)) => Ok(FittedMethod::Srem(f.clone())),
                Ok(_) => unreachable!("component kind"),
                Err(e) => Err(e.clone()),
            },
        };
        out.insert(m, r);
    }
    Ok(out)
}

/// Score every subject under one fit, in parallel, preserving order.
pub fn score_all(fit: &FittedMethod, subjects: &[SubjectRecord]) -> Result<Vec<Score>> {
    subjects.par_iter().map(|s| fit.score(s)).collect()
}
