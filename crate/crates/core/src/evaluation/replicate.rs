use std::collections::BTreeMap;

use rayon::prelude::*;

use super::auc::{time_dependent_auc, RiskTable};
use crate::error::Result;
use crate::methods::{fit_methods, score_all, Method};
use crate::simulation::{derive_seed, generate_dataset, SimConfig};

/// `aucs[method][c]` for one replicate; `None` where undefined or the method failed.
pub type ReplicateAucs = BTreeMap<Method, Vec<Option<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucSummary {
    pub mean: f64,
    /// Across-replicate sample standard deviation (0 with one replicate).
    pub sd: f64,
    /// Replicates contributing a defined AUC.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedAuc {
    pub cutoffs: Vec<f64>,
    pub summary: BTreeMap<Method, Vec<Option<AucSummary>>>,
    /// Per-replicate results in replicate order; `None` for a failed replicate.
    pub replicates: Vec<Option<ReplicateAucs>>,
    pub failed: usize,
}

/// Run `r` replicates (in parallel, reduced in index order) and summarize the AUCs.
pub fn expected_auc_over_replicates<F>(r: usize, cutoffs: &[f64], run: F) -> ExpectedAuc
where
    F: Fn(usize) -> Result<ReplicateAucs> + Sync,
{
    let replicates: Vec<Option<ReplicateAucs>> = (0..r)
        .into_par_iter()
        .map(|i| match run(i) {
            Ok(a) => Some(a),
            Err(e) => {
                log::warn!("replicate {i} failed: {e}");
                None
            }
        })
        .collect();
    let failed = replicates.iter().filter(|x| x.is_none()).count();
    let mut methods: Vec<Method> = replicates.iter().flatten().flat_map(|m| m.keys().copied()).collect();
    methods.sort();
    methods.dedup();
    let summary = methods
        .into_iter()
        .map(|m| {
            let cols = (0..cutoffs.len())
                .map(|c| {
                    let vals: Vec<f64> = replicates
                        .iter()
                        .flatten()
                        .filter_map(|rep| rep.get(&m).and_then(|v| v[c]))
                        .collect();
                    summarize(&vals)
                })
                .collect();
            (m, cols)
        })
        .collect();
    ExpectedAuc {
        cutoffs: cutoffs.to_vec(),
        summary,
        replicates,
        failed,
    }
}

fn summarize(v: &[f64]) -> Option<AucSummary> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(AucSummary { mean, sd, n: v.len() })
}

/// One simulation replicate: generate train/test with seed derived from `rep`, fit the
/// methods on train, and compute test-set AUCs.
pub fn run_scenario_replicate(
    base: &SimConfig,
    rep: usize,
    methods: &[Method],
    cutoffs: &[f64],
) -> Result<ReplicateAucs> {
    let cfg = SimConfig {
        seed: derive_seed(base.seed, rep as u64),
        ..base.clone()
    };
    let data = generate_dataset(&cfg)?;
    let fits = fit_methods(methods, &data.train)?;
    let mut out = BTreeMap::new();
    for (m, fit) in fits {
        let aucs = match fit {
            Ok(f) => {
                if f.flagged() {
                    log::debug!("replicate {rep}: {} fit flagged", m.name());
                }
                match score_all(&f, &data.test).and_then(|s| RiskTable::from_scores(&data.test, &s)) {
                    Ok(table) => cutoffs
                        .iter()
                        .map(|&t| time_dependent_auc(&table, t).ok().map(|p| p.auc))
                        .collect(),
                    Err(e) => {
                        log::warn!("replicate {rep}: scoring {} failed: {e}", m.name());
                        vec![None; cutoffs.len()]
                    }
                }
            }
            Err(e) => {
                log::warn!("replicate {rep}: fitting {} failed: {e}", m.name());
                vec![None; cutoffs.len()]
            }
        };
        out.insert(m, aucs);
    }
    Ok(out)
}
