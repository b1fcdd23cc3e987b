mod evaluate;
mod fit;
mod reproduce;
mod simulate;

pub use evaluate::{cmd_evaluate, evaluate, EvaluateOutput};
pub use fit::{cmd_fit, fit};
pub use reproduce::{cmd_reproduce_tables, reproduce_tables, ReproduceOutput};
pub use simulate::{cmd_simulate, sim_config, simulate, SimulateOutput};

use std::path::Path;

use anyhow::Result;
use earlydetect_core::SubjectRecord;

use crate::config::{usage, Config};
use crate::io::{read_dataset, Split};

/// All subjects from the comma-separated `data` paths, tagged with their split.
pub(crate) fn load_data(cfg: &Config) -> Result<Vec<(Split, SubjectRecord)>> {
    let log_transform = cfg.bool_or("log_transform", false)?;
    let mut out = Vec::new();
    for p in cfg.require("data")?.split(',') {
        out.extend(read_dataset(Path::new(p.trim()), log_transform)?);
    }
    if out.is_empty() {
        return Err(usage("dataset is empty"));
    }
    let mut ids: Vec<&str> = out.iter().map(|(_, s)| s.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(usage(format!("subject id '{}' appears in more than one file", w[0])));
    }
    Ok(out)
}

pub(crate) fn select(data: &[(Split, SubjectRecord)], split: Option<Split>) -> Vec<SubjectRecord> {
    data.iter()
        .filter(|(s, _)| split.is_none_or(|w| *s == w))
        .map(|(_, r)| r.clone())
        .collect()
}

/// Write to `path`, or to stdout when absent.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => crate::io::write_file(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}
