//! Screening-cohort generator: survival and censoring, gap times and ages, visit
//! schedules, and biomarker trajectories from a changepoint or spline truth.

mod schedule;
mod survival;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use schedule::{
    gap_bounds, sample_gap_and_age, schedule_screenings, Frequency, GapAgePool, ScheduleRule,
    AGE_RANGE, MAX_GAP, MAX_SPAN,
};
pub use survival::{simulate_survival, SurvivalDraw, CENSOR_MIXTURE, EVENT_RATE, MAX_FOLLOWUP};

use crate::error::{Error, Result};
use crate::lmm::{LmmFit, LmmSpec, SubjectRecord};
use crate::numerics::CorrelatedScales;
use crate::roca::{CaseVariant, ChangepointModel};
use crate::splines::SplineBasisSpec;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG stream for (seed, domain, index).
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ domain) ^ index))
}

/// Derived seed for (seed, index), e.g. one per simulation replicate.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ 0xA5A5_5A5A_DEAD_BEEF) ^ index)
}

/// Case-model truth with the CS2 estimates from the screening-trial fit.
pub fn truth_cs2() -> ChangepointModel {
    ChangepointModel::new(CaseVariant::Cs2, 2.381, 2.365, 0.497, 1.423, -0.402, 0.271, 1.054, 0.314)
        .expect("valid truth")
}

pub fn truth_cn1() -> LmmFit {
    LmmFit::from_parameters(LmmSpec::Cn1, vec![2.337], CorrelatedScales::independent(vec![0.445]), 0.229)
        .expect("valid truth")
}

pub fn truth_cn2() -> LmmFit {
    LmmFit::from_parameters(
        LmmSpec::Cn2,
        vec![2.296, 0.019],
        CorrelatedScales::new(vec![0.450, 0.039], vec![-0.141]),
        0.215,
    )
    .expect("valid truth")
}

pub fn truth_cn3() -> LmmFit {
    LmmFit::from_parameters(
        LmmSpec::Cn3,
        vec![2.158, 0.019, 0.002],
        CorrelatedScales::new(vec![0.451, 0.039], vec![-0.147]),
        0.215,
    )
    .expect("valid truth")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseTruth {
    Changepoint(ChangepointModel),
    Spline(LmmFit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub case: CaseTruth,
    pub control: LmmFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Changepoint (CS2) cases, CN3 controls; fixed case and control quotas.
    RocaTruth,
    /// Spline-LMM cases, CN3 controls; labels from the survival draw.
    PmmTruth,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "roca" | "roca_truth" | "scenario1" => Some(Scenario::RocaTruth),
            "2" | "pmm" | "pmm_truth" | "scenario2" => Some(Scenario::PmmTruth),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Scenario::RocaTruth => 1,
            Scenario::PmmTruth => 2,
        }
    }
}

pub fn scenario1_truth() -> Truth {
    Truth {
        case: CaseTruth::Changepoint(truth_cs2()),
        control: truth_cn3(),
    }
}

/// Spline case model fitted once to 5000 simulated CS2 cases under annual screening
/// (see [`derive_pmm_case_truth`]); values frozen here so the generator does not refit.
pub fn scenario2_truth() -> Truth {
    Truth {
        case: CaseTruth::Spline(frozen_pmm_case_truth()),
        control: truth_cn3(),
    }
}

/// Seed and size used to derive the frozen spline case truth.
pub const PMM_TRUTH_SEED: u64 = 2019;
pub const PMM_TRUTH_CASES: usize = 5000;

include!("pmm_truth.rs");

/// Fit the spline case model to `n_cases` CS2 cases simulated under annual screening.
pub fn derive_pmm_case_truth(n_cases: usize, seed: u64) -> Result<LmmFit> {
    let cfg = SimConfig {
        n_cases,
        n_controls: 0,
        ..SimConfig::scenario1(Frequency::Annual, seed)
    };
    let cases = generate_split(&cfg, 0)?;
    crate::pmm::fit_case_spline(&cases)
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub frequency: Frequency,
    /// Per-split quotas (changepoint scenario).
    pub n_cases: usize,
    pub n_controls: usize,
    /// Per-split size with natural labels (spline scenario).
    pub n_total: usize,
    pub truth: Truth,
    pub pool: GapAgePool,
    pub rule: ScheduleRule,
    pub seed: u64,
    pub max_attempts: u64,
}

impl SimConfig {
    pub fn scenario1(frequency: Frequency, seed: u64) -> Self {
        Self {
            scenario: Scenario::RocaTruth,
            frequency,
            n_cases: 500,
            n_controls: 1000,
            n_total: 0,
            truth: scenario1_truth(),
            pool: GapAgePool::fallback(),
            rule: ScheduleRule::default(),
            seed,
            max_attempts: 10_000_000,
        }
    }

    pub fn scenario2(frequency: Frequency, n_total: usize, seed: u64) -> Self {
        Self {
            scenario: Scenario::PmmTruth,
            frequency,
            n_cases: 0,
            n_controls: 0,
            n_total,
            truth: scenario2_truth(),
            pool: GapAgePool::fallback(),
            rule: ScheduleRule::default(),
            seed,
            max_attempts: 10_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        let empty = match self.scenario {
            Scenario::RocaTruth => self.n_cases + self.n_controls == 0,
            Scenario::PmmTruth => self.n_total == 0,
        };
        if empty {
            return Err(Error::InvalidArgument("simulation needs at least one subject per split".into()));
        }
        Ok(())
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Log biomarker values for one subject under the truth.
pub fn generate_trajectory<R: Rng + ?Sized>(
    times: &[f64],
    age: f64,
    t_diag: f64,
    is_case: bool,
    truth: &Truth,
    rng: &mut R,
) -> Vec<f64> {
    if !is_case {
        return lmm_trajectory(times, age, &truth.control, rng);
    }
    match &truth.case {
        CaseTruth::Spline(fit) => lmm_trajectory(times, age, fit, rng),
        CaseTruth::Changepoint(m) => {
            let tau = t_diag - m.mu_tau + m.sigma_tau * normal(rng);
            let (z0, z1) = (normal(rng), normal(rng));
            let b0 = m.sigma_b0 * z0;
            let b1 = m.sigma_b1 * (m.rho_b0b1 * z0 + (1.0 - m.rho_b0b1 * m.rho_b0b1).sqrt() * z1);
            times
                .iter()
                .map(|t| {
                    m.theta0 + b0 + (m.gamma0 + b1) * (t - tau).max(0.0) + m.sigma_xi * normal(rng)
                })
                .collect()
        }
    }
}

fn lmm_trajectory<R: Rng + ?Sized>(times: &[f64], age: f64, fit: &LmmFit, rng: &mut R) -> Vec<f64> {
    let q = fit.spec.q();
    let z = DVector::from_fn(q, |_, _| normal(rng));
    let b = fit.scales.factor() * z;
    let (x, zd) = fit.spec.design(times, age);
    let mean = x * DVector::from_column_slice(&fit.theta) + zd * b;
    mean.iter().map(|m| m + fit.sigma_xi * normal(rng)).collect()
}

/// One simulated subject from stream (split, k), or `None` if the schedule rule rejects it.
fn realize(cfg: &SimConfig, split: u64, k: u64, id: String) -> Result<Option<SubjectRecord>> {
    let mut rng = substream(cfg.seed, split, k);
    let surv = simulate_survival(&mut rng);
    let (g, age) = sample_gap_and_age(surv.t, &cfg.pool, &mut rng)?;
    let Some((_, times)) = schedule_screenings(surv.t, g, cfg.frequency, cfg.rule) else {
        return Ok(None);
    };
    let y = generate_trajectory(&times, age, surv.t, surv.s, &cfg.truth, &mut rng);
    SubjectRecord::new(id, times, y, age, surv.t, surv.s).map(Some)
}

fn generate_split(cfg: &SimConfig, split: u64) -> Result<Vec<SubjectRecord>> {
    let prefix = if split == 0 { "tr" } else { "te" };
    let mut out = Vec::new();
    let (mut cases, mut controls) = (0usize, 0usize);
    let mut k = 0u64;
    loop {
        let done = match cfg.scenario {
            Scenario::RocaTruth => cases >= cfg.n_cases && controls >= cfg.n_controls,
            Scenario::PmmTruth => out.len() >= cfg.n_total,
        };
        if done {
            break;
        }
        if k >= cfg.max_attempts {
            return Err(Error::Generation(format!(
                "quota not reached after {k} attempts: {cases} cases, {controls} controls"
            )));
        }
        let surv = simulate_survival(&mut substream(cfg.seed, split, k));
        let wanted = match cfg.scenario {
            Scenario::RocaTruth => {
                if surv.s {
                    cases < cfg.n_cases
                } else {
                    controls < cfg.n_controls
                }
            }
            Scenario::PmmTruth => true,
        };
        if wanted {
            let id = format!("{prefix}{:06}", out.len());
            if let Some(rec) = realize(cfg, split, k, id)? {
                if rec.event {
                    cases += 1;
                } else {
                    controls += 1;
                }
                out.push(rec);
            }
        }
        k += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<SubjectRecord>,
    pub test: Vec<SubjectRecord>,
}

/// Training and testing cohorts; bit-identical for a given configuration.
pub fn generate_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (train, test) = rayon::join(|| generate_split(cfg, 0), || generate_split(cfg, 1));
    Ok(Dataset {
        train: train?,
        test: test?,
    })
}

/// Basis spec helper used by the frozen truth.
fn spec_from_knots(b: (f64, f64), q: (f64, f64)) -> SplineBasisSpec {
    SplineBasisSpec::new(b.0, b.1, q.0, q.1).expect("valid knots")
}
