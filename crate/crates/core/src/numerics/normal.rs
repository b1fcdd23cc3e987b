use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use libm::erfc;

use crate::error::{Error, Result};

/// ln(√(2π)).
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn log_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function 1 − Φ(z).
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function (Acklam's rational approximation refined by one
/// Halley step against [`norm_cdf`]).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Normal distribution N(mu, sigma²) truncated to `[lower, upper]`. Either bound may be
/// infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    log_normalizer: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "truncated normal needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        if !(lower < upper) {
            return Err(Error::InvalidArgument(format!(
                "truncated normal needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        let a = (lower - mu) / sigma;
        let b = (upper - mu) / sigma;
        // Work in whichever tail keeps the difference well conditioned.
        let z = if a > 0.0 {
            norm_sf(a) - norm_sf(b)
        } else {
            norm_cdf(b) - norm_cdf(a)
        };
        if !(z >= 1e-300) {
            return Err(Error::DegenerateTruncation {
                lower,
                upper,
                normalizer: z,
            });
        }
        Ok(Self {
            mu,
            sigma,
            lower,
            upper,
            log_normalizer: z.ln(),
        })
    }

    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        log_norm_pdf((x - self.mu) / self.sigma) - self.sigma.ln() - self.log_normalizer
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// Probability mass of `[a, b]` intersected with the support.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lower);
        let b = b.min(self.upper);
        if a >= b {
            return 0.0;
        }
        let za = (a - self.mu) / self.sigma;
        let zb = (b - self.mu) / self.sigma;
        let m = if za > 0.0 {
            norm_sf(za) - norm_sf(zb)
        } else {
            norm_cdf(zb) - norm_cdf(za)
        };
        (m.ln() - self.log_normalizer).exp()
    }

    /// Draw by rejection from the parent normal when the support holds reasonable mass,
    /// otherwise by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.log_normalizer > (0.05f64).ln() {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = self.mu + self.sigma * z;
                if x >= self.lower && x <= self.upper {
                    return x;
                }
            }
        }
        let a = norm_cdf((self.lower - self.mu) / self.sigma);
        let b = norm_cdf((self.upper - self.mu) / self.sigma);
        let u: f64 = rng.random_range(0.0..1.0);
        let x = self.mu + self.sigma * norm_quantile(a + u * (b - a));
        x.clamp(self.lower, self.upper)
    }
}
