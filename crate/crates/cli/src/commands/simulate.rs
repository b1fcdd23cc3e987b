use std::path::{Path, PathBuf};

use anyhow::Result;
use earlydetect_core::simulation::{generate_dataset, GapAgePool, Scenario, ScheduleRule, SimConfig};

use crate::config::{settings_hash, sha256_hex, usage, Config};
use crate::io::{dataset_bytes, read_pool, write_file, Split};

pub const MANIFEST_VERSION: &str = "# earlydetect-manifest v1";

/// Default per-split size with natural labels.
pub const DEFAULT_N_TOTAL: usize = 6000;

/// Generator settings from the config, plus the resolved settings as key/value pairs
/// (the basis of the config hash).
pub fn sim_config(cfg: &Config) -> Result<(SimConfig, Vec<(String, String)>)> {
    let scenario = cfg.scenario()?;
    let frequency = cfg.frequency()?;
    let seed = cfg.u64_or("seed", 1)?;
    let mut sim = match scenario {
        Scenario::RocaTruth => {
            let mut s = SimConfig::scenario1(frequency, seed);
            s.n_cases = cfg.usize_or("n_cases", s.n_cases)?;
            s.n_controls = cfg.usize_or("n_controls", s.n_controls)?;
            s
        }
        Scenario::PmmTruth => SimConfig::scenario2(frequency, cfg.usize_or("n_total", DEFAULT_N_TOTAL)?, seed),
    };
    sim.rule = match cfg.get("schedule_rule").unwrap_or("through_floor") {
        "through_floor" => ScheduleRule::ThroughFloor,
        "literal" => ScheduleRule::Literal,
        other => return Err(usage(format!("unknown schedule_rule '{other}' (expected through_floor or literal)"))),
    };
    let fallback = cfg.bool_or("pool_fallback", true)?;
    let pool_id = match cfg.path("pool") {
        Some(p) => {
            let bytes = std::fs::read(&p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
            sim.pool = GapAgePool::empirical(read_pool(&p)?, fallback);
            format!("sha256:{}", sha256_hex(&bytes))
        }
        None => "uniform".to_string(),
    };
    let settings = vec![
        ("scenario".to_string(), scenario.number().to_string()),
        ("frequency".to_string(), frequency.name().to_string()),
        ("seed".to_string(), seed.to_string()),
        ("n_cases".to_string(), sim.n_cases.to_string()),
        ("n_controls".to_string(), sim.n_controls.to_string()),
        ("n_total".to_string(), sim.n_total.to_string()),
        ("pool".to_string(), pool_id),
        ("pool_fallback".to_string(), fallback.to_string()),
        ("schedule_rule".to_string(), cfg.get("schedule_rule").unwrap_or("through_floor").to_string()),
    ];
    Ok((sim, settings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub train_csv: Vec<u8>,
    pub test_csv: Vec<u8>,
    pub manifest: String,
}

pub fn simulate(cfg: &Config) -> Result<SimulateOutput> {
    let (sim, settings) = sim_config(cfg)?;
    let data = generate_dataset(&sim)?;
    let train_csv = dataset_bytes(&data.train, Split::Train)?;
    let test_csv = dataset_bytes(&data.test, Split::Test)?;
    let mut manifest = format!("{MANIFEST_VERSION}\ncommand=simulate\n");
    for (k, v) in &settings {
        manifest.push_str(&format!("{k}={v}\n"));
    }
    manifest.push_str(&format!("config_sha256={}\n", settings_hash(&settings)));
    for (name, subjects, bytes) in [("train", &data.train, &train_csv), ("test", &data.test, &test_csv)] {
        let cases = subjects.iter().filter(|s| s.event).count();
        manifest.push_str(&format!("{name}_subjects={}\n", subjects.len()));
        manifest.push_str(&format!("{name}_cases={cases}\n"));
        manifest.push_str(&format!("{name}_sha256={}\n", sha256_hex(bytes)));
    }
    Ok(SimulateOutput { train_csv, test_csv, manifest })
}

/// Write `train.csv`, `test.csv` and `manifest.txt` into `out_dir`.
pub fn cmd_simulate(cfg: &Config) -> Result<()> {
    let out = simulate(cfg)?;
    let dir = cfg.path("out_dir").unwrap_or_else(|| PathBuf::from("."));
    write_file(&dir.join("train.csv"), &out.train_csv)?;
    write_file(&dir.join("test.csv"), &out.test_csv)?;
    write_file(&dir.join("manifest.txt"), out.manifest.as_bytes())?;
    log::info!("wrote {}", Path::new(&dir).display());
    Ok(())
}
