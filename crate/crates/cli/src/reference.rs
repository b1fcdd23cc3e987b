//! Published expected AUCs bundled with the binary, used for the diff column.

use std::collections::HashMap;
use std::path::Path;

use anyhow::Result;

use crate::config::usage;

const BUNDLED: &str = include_str!("../data/reference_auc.csv");

/// (scenario, frequency, method, cutoff in tenths) → (mean AUC, SD).
#[derive(Debug, Clone, Default)]
pub struct Reference {
    cells: HashMap<(u8, String, String, i64), (f64, f64)>,
}

fn cutoff_key(t: f64) -> i64 {
    (t * 10.0).round() as i64
}

impl Reference {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled reference parses")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if header != ["scenario", "frequency", "method", "cutoff", "auc", "sd"] {
            return Err(usage(format!("reference file has columns [{}]", header.join(","))));
        }
        let mut cells = HashMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || usage(format!("bad reference row {:?}", rec));
            let scenario: u8 = rec[0].parse().map_err(|_| bad())?;
            let cutoff: f64 = rec[3].parse().map_err(|_| bad())?;
            let auc: f64 = rec[4].parse().map_err(|_| bad())?;
            let sd: f64 = rec[5].parse().map_err(|_| bad())?;
            cells.insert(
                (scenario, rec[1].to_ascii_lowercase(), rec[2].to_ascii_uppercase(), cutoff_key(cutoff)),
                (auc, sd),
            );
        }
        Ok(Self { cells })
    }

    pub fn get(&self, scenario: u8, frequency: &str, method: &str, cutoff: f64) -> Option<(f64, f64)> {
        self.cells
            .get(&(scenario, frequency.to_ascii_lowercase(), method.to_ascii_uppercase(), cutoff_key(cutoff)))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}
