use crate::error::{Error, Result};
use crate::lmm::SubjectRecord;
use crate::methods::Score;

/// Evaluation cutoffs in years since the last screening.
pub const DEFAULT_CUTOFFS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub id: String,
    pub risk: f64,
    /// Ranking key; any strictly increasing function of `risk`.
    pub log_odds: f64,
    /// Years from the last screening to diagnosis or censoring.
    pub gap: f64,
    pub event: bool,
}

/// Out-of-sample risk scores, one row per subject.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
    /// Subjects whose fold failed to train or score.
    pub excluded: usize,
}

impl RiskTable {
    pub fn new(rows: Vec<RiskRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.log_odds.is_nan() || r.risk.is_nan() || r.gap.is_nan()) {
            return Err(Error::InvalidData(format!("row {} has a NaN field", r.id)));
        }
        Ok(Self { rows, excluded: 0 })
    }

    /// Rows whose ranking key is the risk itself.
    pub fn from_risks(rows: impl IntoIterator<Item = (String, f64, f64, bool)>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(|(id, risk, gap, event)| RiskRow {
                    id,
                    risk,
                    log_odds: risk,
                    gap,
                    event,
                })
                .collect(),
        )
    }

    pub fn from_scores(subjects: &[SubjectRecord], scores: &[Score]) -> Result<Self> {
        if subjects.len() != scores.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} subjects but {} scores",
                subjects.len(),
                scores.len()
            )));
        }
        Self::new(
            subjects
                .iter()
                .zip(scores)
                .map(|(s, sc)| RiskRow {
                    id: s.id.clone(),
                    risk: sc.risk,
                    log_odds: sc.log_odds,
                    gap: s.gap,
                    event: s.event,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Ranking keys of cases(t) and controls(t).
    fn split_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut cases = Vec::new();
        let mut controls = Vec::new();
        for r in &self.rows {
            if r.gap > t {
                controls.push(r.log_odds);
            } else if r.event {
                cases.push(r.log_odds);
            }
        }
        (cases, controls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucPoint {
    pub auc: f64,
    pub n_cases: usize,
    pub n_controls: usize,
}

/// Cumulative/dynamic AUC at cutoff `t`. Cases are events with gap ≤ t, controls are
/// all subjects with gap > t, and subjects censored by t are dropped. Ties count ½.
pub fn time_dependent_auc(table: &RiskTable, t: f64) -> Result<AucPoint> {
    let (cases, mut controls) = table.split_at(t);
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::UndefinedAuc {
            cutoff: t,
            cases: cases.len(),
            controls: controls.len(),
        });
    }
    controls.sort_by(|a, b| a.total_cmp(b));
    // twice the pair score keeps every partial sum an exact integer
    let mut twice: u128 = 0;
    for c in &cases {
        let below = controls.partition_point(|x| x < c);
        let not_above = controls.partition_point(|x| x <= c);
        twice += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = cases.len() as f64 * controls.len() as f64;
    Ok(AucPoint {
        auc: twice as f64 / (2.0 * pairs),
        n_cases: cases.len(),
        n_controls: controls.len(),
    })
}

/// The same AUC as a Mann–Whitney statistic from mid-ranks of the pooled scores.
pub fn mann_whitney_auc(table: &RiskTable, t: f64) -> Result<f64> {
    let (cases, controls) = table.split_at(t);
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::UndefinedAuc {
            cutoff: t,
            cases: cases.len(),
            controls: controls.len(),
        });
    }
    let mut all: Vec<(f64, bool)> = cases
        .iter()
        .map(|&v| (v, true))
        .chain(controls.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // doubled mid-ranks are integers
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u128;
        twice_rank_sum += twice_mid * all[i..=j].iter().filter(|e| e.1).count() as u128;
        i = j + 1;
    }
    let n1 = cases.len() as u128;
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2.0 * cases.len() as f64 * controls.len() as f64))
}

/// Empirical ROC points (false positive rate, true positive rate) at cutoff `t`,
/// from the strictest threshold to the loosest.
pub fn roc_curve(table: &RiskTable, t: f64) -> Result<Vec<(f64, f64)>> {
    let (mut cases, mut controls) = table.split_at(t);
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::UndefinedAuc {
            cutoff: t,
            cases: cases.len(),
            controls: controls.len(),
        });
    }
    cases.sort_by(|a, b| b.total_cmp(a));
    controls.sort_by(|a, b| b.total_cmp(a));
    let mut thresholds: Vec<f64> = cases.iter().chain(&controls).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (n1, n0) = (cases.len() as f64, controls.len() as f64);
    let mut pts = vec![(0.0, 0.0)];
    let (mut i, mut j) = (0, 0);
    for th in thresholds {
        while i < cases.len() && cases[i] >= th {
            i += 1;
        }
        while j < controls.len() && controls[j] >= th {
            j += 1;
        }
        pts.push((j as f64 / n0, i as f64 / n1));
    }
    Ok(pts)
}

/// AUCs of one method across cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    pub method: String,
    pub cutoffs: Vec<f64>,
    /// `None` where the AUC is undefined.
    pub auc: Vec<Option<f64>>,
    pub ci: Vec<Option<(f64, f64)>>,
    pub n_cases: Vec<usize>,
    pub n_controls: Vec<usize>,
}

pub fn auc_report(method: impl Into<String>, table: &RiskTable, cutoffs: &[f64]) -> AucReport {
    let mut rep = AucReport {
        method: method.into(),
        cutoffs: cutoffs.to_vec(),
        auc: Vec::new(),
        ci: vec![None; cutoffs.len()],
        n_cases: Vec::new(),
        n_controls: Vec::new(),
    };
    for &t in cutoffs {
        match time_dependent_auc(table, t) {
            Ok(p) => {
                rep.auc.push(Some(p.auc));
                rep.n_cases.push(p.n_cases);
                rep.n_controls.push(p.n_controls);
            }
            Err(Error::UndefinedAuc { cases, controls, .. }) => {
                rep.auc.push(None);
                rep.n_cases.push(cases);
                rep.n_controls.push(controls);
            }
            Err(e) => unreachable!("unexpected AUC error {e}"),
        }
    }
    rep
}
