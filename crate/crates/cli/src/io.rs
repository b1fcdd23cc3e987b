//! Versioned CSV files: datasets, risk tables, gap/age pools, AUC reports and ROC points.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{Context, Result};
use earlydetect_core::evaluation::{AucReport, RiskRow, RiskTable};
use earlydetect_core::SubjectRecord;

use crate::config::usage;

pub const DATASET_VERSION: &str = "# earlydetect-dataset v1";
pub const DATASET_COLUMNS: [&str; 7] = [
    "subject_id",
    "time_years",
    "log_value",
    "age_years",
    "followup_years",
    "event",
    "split",
];

pub const RISK_VERSION: &str = "# earlydetect-risk v1";
pub const RISK_COLUMNS: [&str; 5] = ["subject_id", "risk", "log_odds", "gap_years", "event"];

pub const AUC_VERSION: &str = "# earlydetect-auc v1";
pub const ROC_VERSION: &str = "# earlydetect-roc v1";
pub const POOL_COLUMNS: [&str; 2] = ["gap_years", "age_years"];

/// Shortest decimal that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_bytes<I>(version: Option<&str>, header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut buf = Vec::new();
    if let Some(v) = version {
        buf.extend_from_slice(v.as_bytes());
        buf.push(b'\n');
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))?)
}

/// Parsed rows with their 1-based file line numbers.
fn read_csv(path: &Path, version: Option<&str>, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut offset = 0;
    let mut body = text.as_str();
    if let Some(v) = version {
        let (first, rest) = body.split_once('\n').unwrap_or((body, ""));
        if first.trim_end() != v {
            return Err(usage(format!(
                "{}: expected schema line '{v}', found '{}'",
                path.display(),
                first.trim_end()
            )));
        }
        body = rest;
        offset = 1;
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(body.as_bytes());
    let found: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if found != header {
        return Err(usage(format!(
            "{}: column mismatch, expected [{}] but found [{}]",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map(|p| p.line() as usize + offset).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, col: usize, name: &str) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse::<T>()
        .map_err(|_| usage(format!("{}:{line}: bad {name} '{raw}'", path.display())))
}

fn flag(path: &Path, line: usize, raw: &str) -> Result<bool> {
    match raw {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(usage(format!("{}:{line}: event must be 0 or 1, got '{raw}'", path.display()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One row per observation in subject order.
pub fn dataset_bytes(subjects: &[SubjectRecord], split: Split) -> Result<Vec<u8>> {
    let rows = subjects.iter().flat_map(|s| {
        s.times.iter().zip(&s.y).map(move |(t, y)| {
            vec![
                s.id.clone(),
                num(*t),
                num(*y),
                num(s.age),
                num(s.followup_time),
                (s.event as u8).to_string(),
                split.name().to_string(),
            ]
        })
    });
    csv_bytes(Some(DATASET_VERSION), &DATASET_COLUMNS, rows)
}

/// Subjects with their split, in order of first appearance. With `log_transform` the
/// value column holds raw biomarker values and is log-transformed on read.
pub fn read_dataset(path: &Path, log_transform: bool) -> Result<Vec<(Split, SubjectRecord)>> {
    struct Acc {
        split: Split,
        age: f64,
        followup: f64,
        event: bool,
        obs: Vec<(f64, f64)>,
    }
    let rows = read_csv(path, Some(DATASET_VERSION), &DATASET_COLUMNS)?;
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, Acc> = HashMap::new();
    for (line, rec) in rows {
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(usage(format!("{}:{line}: empty subject_id", path.display())));
        }
        let t: f64 = field(path, line, &rec, 1, "time_years")?;
        let mut y: f64 = field(path, line, &rec, 2, "log_value")?;
        if log_transform {
            if !(y > 0.0) {
                return Err(usage(format!("{}:{line}: raw value {y} cannot be log-transformed", path.display())));
            }
            y = y.ln();
        }
        let age: f64 = field(path, line, &rec, 3, "age_years")?;
        let followup: f64 = field(path, line, &rec, 4, "followup_years")?;
        let event = flag(path, line, rec.get(5).unwrap_or(""))?;
        let split = match rec.get(6).unwrap_or("") {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(usage(format!("{}:{line}: split must be train or test, got '{other}'", path.display()))),
        };
        match acc.get_mut(&id) {
            Some(a) => {
                if a.split != split || a.age != age || a.followup != followup || a.event != event {
                    return Err(usage(format!(
                        "{}:{line}: subject {id} has inconsistent subject-level fields",
                        path.display()
                    )));
                }
                a.obs.push((t, y));
            }
            None => {
                order.push(id.clone());
                acc.insert(id, Acc { split, age, followup, event, obs: vec![(t, y)] });
            }
        }
    }
    order
        .into_iter()
        .map(|id| {
            let mut a = acc.remove(&id).expect("accumulated");
            a.obs.sort_by(|p, q| p.0.total_cmp(&q.0));
            let (times, y): (Vec<f64>, Vec<f64>) = a.obs.into_iter().unzip();
            let rec = SubjectRecord::new(id, times, y, a.age, a.followup, a.event)
                .with_context(|| format!("in {}", path.display()))?;
            Ok((a.split, rec))
        })
        .collect()
}

pub fn risk_table_bytes(table: &RiskTable) -> Result<Vec<u8>> {
    let rows = table.rows.iter().map(|r| {
        vec![r.id.clone(), num(r.risk), num(r.log_odds), num(r.gap), (r.event as u8).to_string()]
    });
    csv_bytes(Some(RISK_VERSION), &RISK_COLUMNS, rows)
}

pub fn read_risk_table(path: &Path) -> Result<RiskTable> {
    let rows = read_csv(path, Some(RISK_VERSION), &RISK_COLUMNS)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        out.push(RiskRow {
            id: rec.get(0).unwrap_or("").to_string(),
            risk: field(path, line, &rec, 1, "risk")?,
            log_odds: field(path, line, &rec, 2, "log_odds")?,
            gap: field(path, line, &rec, 3, "gap_years")?,
            event: flag(path, line, rec.get(4).unwrap_or(""))?,
        });
    }
    Ok(RiskTable::new(out)?)
}

/// Empirical (gap, age) pool; a plain two-column CSV.
pub fn read_pool(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = read_csv(path, None, &POOL_COLUMNS)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let g: f64 = field(path, line, &rec, 0, "gap_years")?;
        let a: f64 = field(path, line, &rec, 1, "age_years")?;
        if !(g >= 0.0 && g.is_finite() && a.is_finite()) {
            return Err(usage(format!("{}:{line}: invalid pool entry ({g}, {a})", path.display())));
        }
        out.push((g, a));
    }
    if out.is_empty() {
        return Err(usage(format!("{}: pool is empty", path.display())));
    }
    Ok(out)
}

/// AUC rows for several methods; CI columns only when `with_ci`.
pub fn auc_report_bytes(reports: &[AucReport], with_ci: bool) -> Result<Vec<u8>> {
    let mut header = vec!["method", "cutoff", "auc", "n_cases", "n_controls", "status"];
    if with_ci {
        header.extend(["ci_lower", "ci_upper"]);
    }
    let mut rows = Vec::new();
    for rep in reports {
        for (c, &t) in rep.cutoffs.iter().enumerate() {
            let (auc, status) = match rep.auc[c] {
                Some(a) => (num(a), "ok"),
                None => (String::new(), "undefined"),
            };
            let mut row = vec![
                rep.method.clone(),
                num(t),
                auc,
                rep.n_cases[c].to_string(),
                rep.n_controls[c].to_string(),
                status.to_string(),
            ];
            if with_ci {
                match rep.ci[c] {
                    Some((lo, hi)) => row.extend([num(lo), num(hi)]),
                    None => row.extend([String::new(), String::new()]),
                }
            }
            rows.push(row);
        }
    }
    csv_bytes(Some(AUC_VERSION), &header, rows)
}

pub fn roc_bytes(curves: &[(String, f64, Vec<(f64, f64)>)]) -> Result<Vec<u8>> {
    let rows = curves.iter().flat_map(|(m, t, pts)| {
        pts.iter().map(move |(fpr, tpr)| vec![m.clone(), num(*t), num(*fpr), num(*tpr)])
    });
    csv_bytes(Some(ROC_VERSION), &["method", "cutoff", "fpr", "tpr"], rows)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
