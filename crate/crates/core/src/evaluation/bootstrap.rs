use rayon::prelude::*;

use super::auc::{time_dependent_auc, RiskTable};
use crate::error::{Error, Result};
use crate::lmm::SubjectRecord;
use crate::methods::FittedMethod;
use crate::simulation::substream;
use crate::splines::quantile_type7;

/// Replicate count used when none is configured.
pub const DEFAULT_BOOTSTRAP: usize = 200;

const BOOT_DOMAIN: u64 = 0xB007;

/// One fitted model and the subjects it scores: the single train/test fit, or one fold
/// of a cross-validation.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapUnit<'a> {
    pub fit: &'a FittedMethod,
    pub subjects: &'a [SubjectRecord],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub cutoffs: Vec<f64>,
    /// Percentile 2.5% / 97.5% interval per cutoff; `None` where fewer than two
    /// replicates gave a defined AUC.
    pub ci: Vec<Option<(f64, f64)>>,
    /// `replicates[r][c]`: AUC of replicate r at cutoff c.
    pub replicates: Vec<Vec<Option<f64>>>,
    /// Parameter draws rejected and redrawn.
    pub rejected: usize,
}

/// Percentile interval of `values` at the given lower/upper probabilities.
pub fn percentile_interval(values: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Some((quantile_type7(&v, lo), quantile_type7(&v, hi)))
}

/// Parametric bootstrap: each replicate redraws every unit's parameters from its
/// asymptotic normal distribution, rescores the unit's subjects, and recomputes the
/// AUCs. Replicate r of unit u uses its own RNG stream, so the result does not depend
/// on scheduling.
pub fn bootstrap_auc_ci(
    units: &[BootstrapUnit<'_>],
    template: &RiskTable,
    cutoffs: &[f64],
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs B >= 2, got {b}")));
    }
    let per_rep: Vec<(Vec<Option<f64>>, usize)> = (0..b)
        .into_par_iter()
        .map(|r| replicate(units, template, cutoffs, seed, r as u64))
        .collect::<Result<_>>()?;
    let rejected = per_rep.iter().map(|p| p.1).sum();
    let replicates: Vec<Vec<Option<f64>>> = per_rep.into_iter().map(|p| p.0).collect();
    let ci = (0..cutoffs.len())
        .map(|c| {
            let vals: Vec<f64> = replicates.iter().filter_map(|r| r[c]).collect();
            percentile_interval(&vals, 0.025, 0.975)
        })
        .collect();
    Ok(BootstrapResult {
        cutoffs: cutoffs.to_vec(),
        ci,
        replicates,
        rejected,
    })
}

fn replicate(
    units: &[BootstrapUnit<'_>],
    template: &RiskTable,
    cutoffs: &[f64],
    seed: u64,
    r: u64,
) -> Result<(Vec<Option<f64>>, usize)> {
    let mut scores = std::collections::HashMap::new();
    let mut rejected = 0;
    for (u, unit) in units.iter().enumerate() {
        let mut rng = substream(seed ^ BOOT_DOMAIN, r, u as u64);
        let (fit, rej) = unit.fit.perturbed(&mut rng);
        rejected += rej;
        for s in unit.subjects {
            scores.insert(s.id.as_str(), fit.score(s)?);
        }
    }
    let mut table = template.clone();
    for row in &mut table.rows {
        let s = scores
            .get(row.id.as_str())
            .ok_or_else(|| Error::InvalidData(format!("no bootstrap unit scores subject {}", row.id)))?;
        row.risk = s.risk;
        row.log_odds = s.log_odds;
    }
    let aucs = cutoffs
        .iter()
        .map(|&t| time_dependent_auc(&table, t).ok().map(|p| p.auc))
        .collect();
    Ok((aucs, rejected))
}
