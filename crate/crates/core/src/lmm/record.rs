use crate::error::{Error, Result};

/// One participant: screening times, log biomarker values, baseline age, follow-up and
/// event status.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// Years since randomization, strictly increasing.
    pub times: Vec<f64>,
    /// Natural-log biomarker values.
    pub y: Vec<f64>,
    pub age: f64,
    /// Diagnosis or censoring time T (years since randomization).
    pub followup_time: f64,
    pub event: bool,
    /// T minus the last screening time.
    pub gap: f64,
}

impl SubjectRecord {
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        y: Vec<f64>,
        age: f64,
        followup_time: f64,
        event: bool,
    ) -> Result<Self> {
        let id = id.into();
        if times.is_empty() {
            return Err(Error::InvalidData(format!("subject {id} has no observations")));
        }
        if times.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "subject {id}: {} times but {} values",
                times.len(),
                y.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidData(format!(
                "subject {id}: screening times must be strictly increasing"
            )));
        }
        if times.iter().chain(&y).any(|v| !v.is_finite()) || !age.is_finite() {
            return Err(Error::InvalidData(format!("subject {id}: non-finite value")));
        }
        let last = *times.last().expect("non-empty");
        let gap = followup_time - last;
        if !(gap >= -1e-9) {
            return Err(Error::InvalidData(format!(
                "subject {id}: follow-up {followup_time} precedes last screening {last}"
            )));
        }
        Ok(Self {
            id,
            times,
            y,
            age,
            followup_time,
            event,
            gap: gap.max(0.0),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.times.len()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("validated non-empty")
    }
}
