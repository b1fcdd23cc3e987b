use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use earlydetect_core::evaluation::{
    auc_report, bootstrap_auc_ci, cv_method_fits, roc_curve, table_from_fold_fits, AucReport, BootstrapUnit,
    Folds, RiskTable, DEFAULT_BOOTSTRAP,
};
use earlydetect_core::methods::{fit_methods, score_all};
use earlydetect_core::{FittedMethod, Method, SubjectRecord};

use super::{emit, load_data, select};
use crate::config::{usage, Config};
use crate::io::{auc_report_bytes, read_risk_table, risk_table_bytes, roc_bytes, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutput {
    pub reports: Vec<AucReport>,
    pub tables: Vec<(String, RiskTable)>,
    pub with_ci: bool,
}

enum Validation {
    Split,
    Folds(Folds),
}

/// Fits kept for the bootstrap: one unit per (fit, scored subjects).
type Units = Vec<(FittedMethod, Vec<SubjectRecord>)>;

pub fn evaluate(cfg: &Config) -> Result<EvaluateOutput> {
    let cutoffs = cfg.cutoffs()?;
    if let Some(path) = cfg.path("risk_table") {
        if cfg.contains("data") || cfg.contains("method") {
            return Err(usage("give either risk_table or data + method, not both"));
        }
        if cfg.usize_or("bootstrap", 0)? > 0 {
            log::warn!("bootstrap intervals need fitted models; a risk table alone gives point AUCs");
        }
        let table = read_risk_table(&path)?;
        let name = cfg.get("method").unwrap_or("risk_table").to_string();
        return Ok(EvaluateOutput {
            reports: vec![auc_report(name.clone(), &table, &cutoffs)],
            tables: vec![(name, table)],
            with_ci: false,
        });
    }
    let methods = cfg.methods("method", false)?;
    let data = load_data(cfg)?;
    let has_test = data.iter().any(|(s, _)| *s == Split::Test);
    let has_train = data.iter().any(|(s, _)| *s == Split::Train);
    let validation = match cfg.get("validation") {
        None if has_test && has_train => Validation::Split,
        None | Some("loocv") => Validation::Folds(Folds::LeaveOneOut),
        Some("split") => {
            if !(has_test && has_train) {
                return Err(usage("validation=split needs both train and test rows"));
            }
            Validation::Split
        }
        Some("kfold") => Validation::Folds(Folds::KFold {
            k: cfg.usize_or("k", 10)?,
            seed: cfg.u64_or("seed", 1)?,
        }),
        Some(other) => return Err(usage(format!("unknown validation '{other}' (expected split, loocv or kfold)"))),
    };
    let b = cfg.usize_or("bootstrap", DEFAULT_BOOTSTRAP)?;
    let seed = cfg.u64_or("seed", 1)?;

    let mut per_method: BTreeMap<Method, (RiskTable, Units)> = BTreeMap::new();
    match validation {
        Validation::Split => {
            let train = select(&data, Some(Split::Train));
            let test = select(&data, Some(Split::Test));
            for (m, fit) in fit_methods(&methods, &train)? {
                let fit = fit.map_err(|e| anyhow::anyhow!("fitting {}: {e}", m.name()))?;
                let table = RiskTable::from_scores(&test, &score_all(&fit, &test)?)?;
                per_method.insert(m, (table, vec![(fit, test.clone())]));
            }
        }
        Validation::Folds(folds) => {
            let all = select(&data, None);
            let kept = cv_method_fits(&all, &methods, folds)?;
            for &m in &methods {
                let table = table_from_fold_fits(&kept, m);
                if table.excluded > 0 {
                    log::warn!("{}: {} subjects excluded by failed folds", m.name(), table.excluded);
                }
                per_method.insert(m, (table, Vec::new()));
            }
            if b > 0 {
                for f in kept {
                    for (m, fit) in f.fits {
                        if let Ok(fit) = fit {
                            per_method.get_mut(&m).expect("method").1.push((fit, f.held_out.clone()));
                        }
                    }
                }
            }
        }
    }

    let mut reports = Vec::new();
    let mut tables = Vec::new();
    for &m in &methods {
        let (table, units) = &per_method[&m];
        let mut rep = auc_report(m.name(), table, &cutoffs);
        if b > 0 {
            let refs: Vec<BootstrapUnit<'_>> = units
                .iter()
                .map(|(fit, subjects)| BootstrapUnit { fit, subjects })
                .collect();
            let boot = bootstrap_auc_ci(&refs, table, &cutoffs, b, seed)?;
            if boot.rejected > 0 {
                log::info!("{}: {} bootstrap draws redrawn", m.name(), boot.rejected);
            }
            rep.ci = boot.ci;
        }
        reports.push(rep);
        tables.push((m.name(), table.clone()));
    }
    Ok(EvaluateOutput { reports, tables, with_ci: b > 0 })
}

pub fn cmd_evaluate(cfg: &Config) -> Result<()> {
    let out = evaluate(cfg)?;
    for rep in &out.reports {
        for (t, a) in rep.cutoffs.iter().zip(&rep.auc) {
            if a.is_none() {
                log::warn!("{}: AUC undefined at cutoff {t}", rep.method);
            }
        }
    }
    emit(cfg.path("out").as_deref().map(Path::new), &auc_report_bytes(&out.reports, out.with_ci)?)?;
    if let Some(p) = cfg.path("roc_out") {
        let cutoffs = cfg.cutoffs()?;
        let mut curves = Vec::new();
        for (name, table) in &out.tables {
            for &t in &cutoffs {
                if let Ok(pts) = roc_curve(table, t) {
                    curves.push((name.clone(), t, pts));
                }
            }
        }
        crate::io::write_file(&p, &roc_bytes(&curves)?)?;
    }
    if let Some(p) = cfg.path("risk_out") {
        let [(_, table)] = &out.tables[..] else {
            return Err(usage("risk_out needs exactly one method"));
        };
        crate::io::write_file(&p, &risk_table_bytes(table)?)?;
    }
    Ok(())
}
