//! Versioned key-value text files holding fitted parameters and their asymptotic
//! covariance.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use anyhow::Result;
use earlydetect_core::lmm::{LmmFit, LmmSpec};
use earlydetect_core::numerics::MleResult;
use earlydetect_core::roca::{CS1_MU_TAU, CS1_SIGMA_TAU};
use earlydetect_core::{CaseVariant, FittedMethod};

use crate::config::usage;
use crate::io::num;

pub const FIT_VERSION: &str = "# earlydetect-fit v1";

fn list(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(num).collect::<Vec<_>>().join(",")
}

fn mle_entries(out: &mut String, prefix: &str, mle: &MleResult) {
    let names: Vec<&str> = mle.params.iter().map(|p| p.name.as_str()).collect();
    let _ = writeln!(out, "{prefix}.n_params={}", names.len());
    let _ = writeln!(out, "{prefix}.params={}", names.join(","));
    let _ = writeln!(out, "{prefix}.estimate={}", list(mle.estimate.iter().copied()));
    let _ = writeln!(out, "{prefix}.working={}", list(mle.working.iter().copied()));
    let _ = writeln!(out, "{prefix}.neg_loglik={}", num(mle.neg_loglik));
    let _ = writeln!(out, "{prefix}.converged={}", mle.converged);
    let _ = writeln!(out, "{prefix}.iterations={}", mle.iterations);
    let bounds: Vec<&str> = names
        .iter()
        .zip(&mle.at_bound)
        .filter(|(_, b)| **b)
        .map(|(n, _)| *n)
        .collect();
    let _ = writeln!(out, "{prefix}.at_bound={}", bounds.join(","));
    let _ = writeln!(out, "{prefix}.pseudo_inverse={}", mle.pseudo_inverse);
    for i in 0..mle.asymptotic_cov.nrows() {
        let row = (0..mle.asymptotic_cov.ncols()).map(|j| mle.asymptotic_cov[(i, j)]);
        let _ = writeln!(out, "{prefix}.cov.{i}={}", list(row));
    }
}

fn lmm_entries(out: &mut String, prefix: &str, fit: &LmmFit) {
    let _ = writeln!(out, "{prefix}.design={}", fit.spec.name());
    if let LmmSpec::Spline { age, time } = &fit.spec {
        let _ = writeln!(out, "{prefix}.age_knots={}", list([age.boundary.0, age.internal.0, age.internal.1, age.boundary.1]));
        let _ = writeln!(out, "{prefix}.time_knots={}", list([time.boundary.0, time.internal.0, time.internal.1, time.boundary.1]));
    }
    let _ = writeln!(out, "{prefix}.n_fixed={}", fit.theta.len());
    let _ = writeln!(out, "{prefix}.n_covariance={}", fit.scales.sd.len() + fit.scales.cpc.len());
    mle_entries(out, prefix, &fit.mle);
}

/// Render a fit. Components: `case`/`control` for ROCA and PMM, `longitudinal`/`link`
/// for SREM.
pub fn render_fit(fit: &FittedMethod, n_train: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FIT_VERSION}");
    let _ = writeln!(out, "method={}", fit.method().name());
    let _ = writeln!(out, "n_train={n_train}");
    let _ = writeln!(out, "converged={}", fit.converged());
    let _ = writeln!(out, "flagged={}", fit.flagged());
    match fit {
        FittedMethod::Roca(f) => {
            let _ = writeln!(out, "components=case,control");
            let _ = writeln!(out, "prior_case={}", num(f.prior_case));
            let _ = writeln!(out, "case_gap_pool={}", list(f.case_gap_pool.iter().copied()));
            let _ = writeln!(out, "case.design={}", f.case.model.variant.name());
            if f.case.model.variant == CaseVariant::Cs1 {
                let _ = writeln!(out, "case.fixed.mu_tau={}", num(CS1_MU_TAU));
                let _ = writeln!(out, "case.fixed.sigma_tau={}", num(CS1_SIGMA_TAU));
            }
            mle_entries(&mut out, "case", &f.case.mle);
            lmm_entries(&mut out, "control", &f.control);
        }
        FittedMethod::Pmm(f) => {
            let _ = writeln!(out, "components=case,control");
            let _ = writeln!(out, "prior_case={}", num(f.prior_case));
            lmm_entries(&mut out, "case", &f.case_model);
            lmm_entries(&mut out, "control", &f.control_model);
        }
        FittedMethod::Srem(f) => {
            let _ = writeln!(out, "components=longitudinal,link");
            lmm_entries(&mut out, "longitudinal", &f.longitudinal);
            mle_entries(&mut out, "link", &f.link.mle);
        }
    }
    out
}

/// A parsed fit file: the version line checked, entries in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFile {
    pub entries: BTreeMap<String, String>,
}

impl FitFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        if first.trim_end() != FIT_VERSION {
            return Err(usage(format!("not a fit file: expected '{FIT_VERSION}', found '{first}'")));
        }
        let mut entries = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("fit file line {}: expected key=value", n + 2)))?;
            entries.insert(k.to_string(), v.to_string());
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn values(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.get(key).ok_or_else(|| usage(format!("fit file has no '{key}'")))?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| x.parse::<f64>().map_err(|_| usage(format!("fit file '{key}': bad number '{x}'"))))
            .collect()
    }
}
