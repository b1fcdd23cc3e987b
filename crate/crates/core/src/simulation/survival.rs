use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};

/// Diagnosis rate of the latent event time (per year).
pub const EVENT_RATE: f64 = 6e-4;
/// Administrative end of follow-up (years).
pub const MAX_FOLLOWUP: f64 = 8.9;
/// Censoring mixture: weight, log-mean, log-SD.
pub const CENSOR_MIXTURE: [(f64, f64, f64); 2] = [(1.0 / 3.0, 1.7, 0.4), (2.0 / 3.0, 2.1, 0.16)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalDraw {
    pub t_star: f64,
    pub c: f64,
    pub t: f64,
    pub s: bool,
}

/// T* ~ Exp(6e-4); C from the two-component lognormal mixture, capped at 8.9 years.
pub fn simulate_survival<R: Rng + ?Sized>(rng: &mut R) -> SurvivalDraw {
    let t_star = Exp::new(EVENT_RATE).expect("positive rate").sample(rng);
    let (_, mu, sd) = if rng.random::<f64>() < CENSOR_MIXTURE[0].0 {
        CENSOR_MIXTURE[0]
    } else {
        CENSOR_MIXTURE[1]
    };
    let c = LogNormal::new(mu, sd).expect("valid lognormal").sample(rng).min(MAX_FOLLOWUP);
    SurvivalDraw {
        t_star,
        c,
        t: t_star.min(c),
        s: t_star < c,
    }
}
