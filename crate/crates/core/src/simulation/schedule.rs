use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frequency {
    Annual,
    Biannual,
    Quarterly,
}

impl Frequency {
    pub fn step(self) -> f64 {
        match self {
            Frequency::Annual => 1.0,
            Frequency::Biannual => 0.5,
            Frequency::Quarterly => 0.25,
        }
    }

    pub fn per_year(self) -> usize {
        match self {
            Frequency::Annual => 1,
            Frequency::Biannual => 2,
            Frequency::Quarterly => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Frequency::Annual => "annual",
            Frequency::Biannual => "biannual",
            Frequency::Quarterly => "quarterly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "annual" => Some(Frequency::Annual),
            "biannual" => Some(Frequency::Biannual),
            "quarterly" => Some(Frequency::Quarterly),
            _ => None,
        }
    }
}

/// Where the last visit falls relative to n = ⌊T − G⌋.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleRule {
    /// Visits at 0, step, …, n; the realized gap is G + frac(T − G).
    #[default]
    ThroughFloor,
    /// Visits at 0, step, …, n − 1 (n, 2n − 1 or 4n − 3 visits); needs n ≥ 1.
    Literal,
}

/// Screening times for follow-up `t` and gap `g`. Returns `None` when the rule yields
/// no visit, which callers treat as a signal to redraw the subject.
pub fn schedule_screenings(
    t: f64,
    g: f64,
    frequency: Frequency,
    rule: ScheduleRule,
) -> Option<(usize, Vec<f64>)> {
    let span = t - g;
    if !(span >= 0.0) {
        return None;
    }
    let n = span.floor() as usize;
    let last = match rule {
        ScheduleRule::ThroughFloor => n as isize,
        ScheduleRule::Literal => n as isize - 1,
    };
    if last < 0 {
        return None;
    }
    let k = frequency.per_year();
    let count = last as usize * k + 1;
    let times = (0..count).map(|j| j as f64 * frequency.step()).collect();
    Some((n, times))
}

/// Empirical (gap, age) pairs with a uniform fallback.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapAgePool {
    pub entries: Vec<(f64, f64)>,
    pub allow_fallback: bool,
}

pub const AGE_RANGE: (f64, f64) = (55.0, 74.0);
pub const MAX_GAP: f64 = 3.0;
pub const MAX_SPAN: f64 = 6.0;

impl GapAgePool {
    /// No empirical entries: gap ~ U[t_L, t_U], age ~ U[55, 74].
    pub fn fallback() -> Self {
        Self {
            entries: Vec::new(),
            allow_fallback: true,
        }
    }

    pub fn empirical(entries: Vec<(f64, f64)>, allow_fallback: bool) -> Self {
        Self {
            entries,
            allow_fallback,
        }
    }
}

/// Gap bounds [max(0, T − 6), min(3, T)].
pub fn gap_bounds(t: f64) -> (f64, f64) {
    ((t - MAX_SPAN).max(0.0), MAX_GAP.min(t))
}

pub fn sample_gap_and_age<R: Rng + ?Sized>(
    t: f64,
    pool: &GapAgePool,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let (lo, hi) = gap_bounds(t);
    if !pool.entries.is_empty() {
        let eligible: Vec<&(f64, f64)> = pool
            .entries
            .iter()
            .filter(|(g, _)| *g >= lo && *g <= hi)
            .collect();
        if !eligible.is_empty() {
            let pick = eligible[rng.random_range(0..eligible.len())];
            return Ok(*pick);
        }
    }
    if !pool.allow_fallback {
        return Err(Error::Generation(format!(
            "no pool gap in [{lo}, {hi}] for follow-up time {t}"
        )));
    }
    let g = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let age = rng.random_range(AGE_RANGE.0..=AGE_RANGE.1);
    Ok((g, age))
}
