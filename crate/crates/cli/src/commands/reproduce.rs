use std::fmt::Write;
use std::path::Path;

use anyhow::Result;
use earlydetect_core::evaluation::{expected_auc_over_replicates, run_scenario_replicate, ExpectedAuc};
use earlydetect_core::simulation::Frequency;

use super::{emit, sim_config};
use crate::config::Config;
use crate::io::num;
use crate::reference::Reference;

pub const TABLE_CSV_VERSION: &str = "# earlydetect-expected-auc v1";

/// Default replicate count.
pub const DEFAULT_REPLICATES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOutput {
    pub markdown: String,
    pub csv: Vec<u8>,
    pub blocks: Vec<(Frequency, ExpectedAuc)>,
}

pub fn reproduce_tables(cfg: &Config) -> Result<ReproduceOutput> {
    let frequencies = cfg.frequencies()?;
    let methods = cfg.methods("methods", true)?;
    let cutoffs = cfg.cutoffs()?;
    let r = cfg.usize_or("replicates", DEFAULT_REPLICATES)?;
    let reference = match cfg.get("reference") {
        None => Some(Reference::bundled()),
        Some("none") => None,
        Some(p) => Some(Reference::read(Path::new(p))?),
    };
    let scenario = cfg.scenario()?.number();

    let mut markdown = String::new();
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for f in frequencies {
        let mut local = cfg.clone();
        local.set("frequency", f.name())?;
        let (base, _) = sim_config(&local)?;
        let exp = expected_auc_over_replicates(r, &cutoffs, |rep| run_scenario_replicate(&base, rep, &methods, &cutoffs));
        let _ = writeln!(markdown, "## Scenario {scenario}, {} screening\n", f.name());
        let _ = writeln!(
            markdown,
            "{r} replicates ({} failed); cells are mean AUC (across-replicate SD in %).\n",
            exp.failed
        );
        let mut head = String::from("| Method |");
        let mut rule = String::from("|---|");
        for t in &cutoffs {
            let _ = write!(head, " Year {t:.1} |");
            rule.push_str("---|");
        }
        if reference.is_some() {
            head.push_str(" max abs diff vs reference |");
            rule.push_str("---|");
        }
        let _ = writeln!(markdown, "{head}\n{rule}");
        for &m in &methods {
            let _ = write!(markdown, "| {} |", m.name());
            let mut max_diff: Option<f64> = None;
            for (c, &t) in cutoffs.iter().enumerate() {
                let cell = exp.summary.get(&m).and_then(|v| v[c]);
                let refv = reference.as_ref().and_then(|rf| rf.get(scenario, f.name(), &m.name(), t));
                match cell {
                    Some(s) => {
                        let _ = write!(markdown, " {:.3} ({:.1}) |", s.mean, 100.0 * s.sd);
                    }
                    None => markdown.push_str(" n/a |"),
                }
                let diff = match (cell, refv) {
                    (Some(s), Some((a, _))) => Some(s.mean - a),
                    _ => None,
                };
                if let Some(d) = diff {
                    max_diff = Some(max_diff.map_or(d.abs(), |x: f64| x.max(d.abs())));
                }
                rows.push(vec![
                    scenario.to_string(),
                    f.name().to_string(),
                    m.name(),
                    num(t),
                    cell.map(|s| num(s.mean)).unwrap_or_default(),
                    cell.map(|s| num(s.sd)).unwrap_or_default(),
                    cell.map(|s| s.n.to_string()).unwrap_or_else(|| "0".into()),
                    refv.map(|v| num(v.0)).unwrap_or_default(),
                    diff.map(num).unwrap_or_default(),
                ]);
            }
            if reference.is_some() {
                match max_diff {
                    Some(d) => {
                        let _ = write!(markdown, " {d:.3} |");
                    }
                    None => markdown.push_str(" n/a |"),
                }
            }
            markdown.push('\n');
        }
        markdown.push('\n');
        if exp.failed > 0 {
            log::warn!("{}: {} of {r} replicates failed", f.name(), exp.failed);
        }
        blocks.push((f, exp));
    }
    let mut buf = format!("{TABLE_CSV_VERSION}\n").into_bytes();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
    w.write_record(["scenario", "frequency", "method", "cutoff", "mean_auc", "sd", "n", "reference_auc", "diff"])?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    drop(w);
    Ok(ReproduceOutput { markdown, csv: buf, blocks })
}

pub fn cmd_reproduce_tables(cfg: &Config) -> Result<()> {
    let out = reproduce_tables(cfg)?;
    emit(cfg.path("out").as_deref().map(Path::new), out.markdown.as_bytes())?;
    if let Some(p) = cfg.path("csv_out") {
        crate::io::write_file(&p, &out.csv)?;
    }
    Ok(())
}

