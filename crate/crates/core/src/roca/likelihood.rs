//! Changepoint-marginal likelihood of a case trajectory.
//!
//! Conditional on τ the trajectory is Gaussian with Z = X = [1, (t − τ)⁺], evaluated in
//! closed form for two random effects. The integral over τ is split at the screening
//! times, where the integrand has derivative kinks, and each piece gets Gauss–Legendre
//! nodes. For τ beyond the last screening the integrand does not depend on τ, so that
//! part is the flat-model likelihood times the prior mass.

use super::model::{CaseVariant, ChangepointModel, CS1_WINDOW};
use crate::numerics::{legendre_cached, norm_cdf, norm_sf, LN_SQRT_2PI};

/// Derivative slots: θ₀, γ₀, ln σ_b0, ln σ_b1, atanh ρ, ln σ_ξ, μ_τ, ln σ_τ.
pub(crate) const NG: usize = 8;
pub(crate) type GradVec = [f64; NG];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Prepared {
    th0: f64,
    g0: f64,
    s0: f64,
    s1: f64,
    rho: f64,
    l00: f64,
    l10: f64,
    l11: f64,
    s2: f64,
    ln_s2: f64,
}

impl Prepared {
    pub fn new(m: &ChangepointModel) -> Self {
        let (s0, s1, rho) = (m.sigma_b0, m.sigma_b1, m.rho_b0b1);
        let s2 = m.sigma_xi * m.sigma_xi;
        Self {
            th0: m.theta0,
            g0: m.gamma0,
            s0,
            s1,
            rho,
            l00: s0,
            l10: rho * s1,
            l11: s1 * (1.0 - rho * rho).max(0.0).sqrt(),
            s2,
            ln_s2: s2.ln(),
        }
    }
}

/// One trajectory with its τ-free summary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Obs<'a> {
    pub times: &'a [f64],
    pub y: &'a [f64],
    pub ysum: f64,
    pub y2: f64,
}

impl<'a> Obs<'a> {
    pub fn new(times: &'a [f64], y: &'a [f64]) -> Self {
        Self {
            times,
            y,
            ysum: y.iter().sum(),
            y2: y.iter().map(|v| v * v).sum(),
        }
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// log f(y | τ) and, optionally, its gradient in the first six slots.
pub(crate) fn node_loglik(o: &Obs, tau: f64, p: &Prepared, grad: Option<&mut GradVec>) -> f64 {
    let n = o.times.len() as f64;
    let (mut sa, mut sb, mut ys) = (0.0, 0.0, 0.0);
    for (&t, &v) in o.times.iter().zip(o.y) {
        let s = t - tau;
        if s > 0.0 {
            sa += s;
            sb += s * s;
            ys += v * s;
        }
    }
    let (a00, a01, a11) = (n, sa, sb);
    let (th0, g0) = (p.th0, p.g0);
    let zr0 = o.ysum - n * th0 - g0 * sa;
    let zr1 = ys - th0 * sa - g0 * sb;
    let rr = o.y2 - 2.0 * th0 * o.ysum - 2.0 * g0 * ys
        + n * th0 * th0
        + 2.0 * th0 * g0 * sa
        + g0 * g0 * sb;
    let (l00, l10, l11) = (p.l00, p.l10, p.l11);
    let al00 = a00 * l00 + a01 * l10;
    let al01 = a01 * l11;
    let al10 = a01 * l00 + a11 * l10;
    let al11 = a11 * l11;
    let m00 = l00 * al00 + l10 * al10;
    let m01 = l00 * al01 + l10 * al11;
    let m11 = l11 * al11;
    let w00 = m00 + p.s2;
    let w11 = m11 + p.s2;
    let det = w00 * w11 - m01 * m01;
    let (wi00, wi01, wi11) = (w11 / det, -m01 / det, w00 / det);
    let u0 = l00 * zr0 + l10 * zr1;
    let u1 = l11 * zr1;
    let wiu0 = wi00 * u0 + wi01 * u1;
    let wiu1 = wi01 * u0 + wi11 * u1;
    let quad = (rr - u0 * wiu0 - u1 * wiu1) / p.s2;
    let ll = -n * LN_SQRT_2PI - 0.5 * ((n - 2.0) * p.ln_s2 + det.ln() + quad);
    if let Some(g) = grad {
        let s2 = p.s2;
        let c0 = l00 * wiu0;
        let c1 = l10 * wiu0 + l11 * wiu1;
        let ac0 = a00 * c0 + a01 * c1;
        let ac1 = a01 * c0 + a11 * c1;
        let d0 = (zr0 - ac0) / s2;
        let d1 = (zr1 - ac1) / s2;
        let b00 = al00 * wi00 + al01 * wi01;
        let b01 = al00 * wi01 + al01 * wi11;
        let b10 = al10 * wi00 + al11 * wi01;
        let b11 = al10 * wi01 + al11 * wi11;
        let k00 = b00 * al00 + b01 * al01;
        let k01 = b00 * al10 + b01 * al11;
        let k11 = b10 * al10 + b11 * al11;
        let g00 = 0.5 * (d0 * d0 - (a00 - k00) / s2);
        let g01 = 0.5 * (d0 * d1 - (a01 - k01) / s2);
        let g11 = 0.5 * (d1 * d1 - (a11 - k11) / s2);
        let vr2 = (rr - 2.0 * (c0 * zr0 + c1 * zr1) + c0 * ac0 + c1 * ac1) / (s2 * s2);
        let tr = wi00 * m00 + 2.0 * wi01 * m01 + wi11 * m11;
        let ds2 = 0.5 * (vr2 - (n - tr) / s2);
        let cross = g01 * p.rho * p.s0 * p.s1;
        g[0] = d0;
        g[1] = d1;
        g[2] = 2.0 * (g00 * p.s0 * p.s0 + cross);
        g[3] = 2.0 * (g11 * p.s1 * p.s1 + cross);
        g[4] = 2.0 * g01 * p.s0 * p.s1 * (1.0 - p.rho * p.rho);
        g[5] = ds2 * 2.0 * s2;
        g[6] = 0.0;
        g[7] = 0.0;
    }
    ll
}

/// The trajectory likelihood can change by several log units within a fraction of a
/// year just below the last screening, so resolution never drops below this scale
/// however wide the changepoint law is.
const MAX_RESOLUTION: f64 = 0.35;

/// (τ, weight) Gauss–Legendre nodes on [a, b], split at `breaks` and into pieces no
/// longer than 3·min(σ, 0.35).
pub(crate) fn tau_nodes(breaks: &[f64], a: f64, b: f64, sigma: f64, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let sigma = sigma.min(MAX_RESOLUTION);
    if !(b > a) {
        return;
    }
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    edges.push(b);
    for w in edges.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let pieces = (len / (3.0 * sigma)).ceil().max(1.0) as usize;
        let plen = len / pieces as f64;
        let k = ((8.0 * plen / sigma).ceil() as usize).clamp(8, 24);
        let rule = legendre_cached(k);
        for j in 0..pieces {
            let lo = w[0] + j as f64 * plen;
            let (c, h) = (lo + 0.5 * plen, 0.5 * plen);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                out.push((c + h * x, h * wt));
            }
        }
    }
}

/// Changepoint law for a subject with known T.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TauLaw {
    Normal { m: f64, sigma: f64 },
    Truncated { m: f64, sigma: f64, lo: f64, hi: f64, ln_z: f64 },
}

impl TauLaw {
    pub fn for_model(model: &ChangepointModel, t_diag: f64) -> Self {
        let m = t_diag - model.mu_tau;
        let sigma = model.sigma_tau;
        match model.variant {
            CaseVariant::Cs2 => TauLaw::Normal { m, sigma },
            CaseVariant::Cs1 => {
                let (lo, hi) = (t_diag - CS1_WINDOW, t_diag);
                let z = norm_cdf((hi - m) / sigma) - norm_cdf((lo - m) / sigma);
                TauLaw::Truncated { m, sigma, lo, hi, ln_z: z.ln() }
            }
        }
    }

    fn sigma(&self) -> f64 {
        match *self {
            TauLaw::Normal { sigma, .. } | TauLaw::Truncated { sigma, .. } => sigma,
        }
    }

    fn window(&self) -> (f64, f64) {
        match *self {
            TauLaw::Normal { m, sigma } => (m - 8.0 * sigma, m + 8.0 * sigma),
            TauLaw::Truncated { m, sigma, lo, hi, .. } => {
                (lo.max(m - 8.0 * sigma), hi.min(m + 8.0 * sigma))
            }
        }
    }

    /// log density with derivatives in (μ_τ, ln σ_τ).
    fn log_density(&self, tau: f64) -> (f64, f64, f64) {
        match *self {
            TauLaw::Normal { m, sigma } => {
                let z = (tau - m) / sigma;
                (-0.5 * z * z - sigma.ln() - LN_SQRT_2PI, -z / sigma, z * z - 1.0)
            }
            TauLaw::Truncated { m, sigma, ln_z, .. } => {
                let z = (tau - m) / sigma;
                (-0.5 * z * z - sigma.ln() - LN_SQRT_2PI - ln_z, 0.0, 0.0)
            }
        }
    }

    /// log P(τ ≥ x) with derivatives in (μ_τ, ln σ_τ).
    fn log_mass_above(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            TauLaw::Normal { m, sigma } => {
                let z = (x - m) / sigma;
                let p = norm_sf(z);
                if p < 1e-300 {
                    return (f64::NEG_INFINITY, 0.0, 0.0);
                }
                let ratio = (-0.5 * z * z - LN_SQRT_2PI - p.ln()).exp();
                // ∂ ln P/∂m = φ/(σP) and ∂m/∂μ_τ = −1
                (p.ln(), -ratio / sigma, ratio * z)
            }
            TauLaw::Truncated { m, sigma, lo, hi, ln_z } => {
                if x >= hi {
                    return (f64::NEG_INFINITY, 0.0, 0.0);
                }
                let x = x.max(lo);
                let p = norm_cdf((hi - m) / sigma) - norm_cdf((x - m) / sigma);
                (p.ln() - ln_z, 0.0, 0.0)
            }
        }
    }
}

/// Online log-sum-exp with a weighted gradient average.
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
    grad: GradVec,
}

impl LogSum {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            grad: [0.0; NG],
        }
    }

    pub fn push(&mut self, lv: f64, g: Option<&GradVec>) {
        if lv == f64::NEG_INFINITY || lv.is_nan() {
            return;
        }
        if lv > self.max {
            let scale = (self.max - lv).exp();
            self.sum *= scale;
            for v in &mut self.grad {
                *v *= scale;
            }
            self.max = lv;
        }
        let w = (lv - self.max).exp();
        self.sum += w;
        if let Some(g) = g {
            for (a, b) in self.grad.iter_mut().zip(g) {
                *a += w * b;
            }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sum > 0.0 {
            self.max + self.sum.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn gradient(&self) -> GradVec {
        let mut g = self.grad;
        if self.sum > 0.0 {
            for v in &mut g {
                *v /= self.sum;
            }
        }
        g
    }
}

/// log ∫ f(y | τ) g(τ) dτ with its gradient in all eight slots.
pub(crate) fn integrate(
    o: &Obs,
    law: &TauLaw,
    p: &Prepared,
    want_grad: bool,
    scratch: &mut Vec<(f64, f64)>,
) -> (f64, GradVec) {
    let last = o.last();
    let (lo, hi) = law.window();
    tau_nodes(o.times, lo, hi.min(last), law.sigma(), scratch);
    let mut acc = LogSum::new();
    let mut g = [0.0; NG];
    for &(tau, w) in scratch.iter() {
        let (ld, dm, ds) = law.log_density(tau);
        let ll = node_loglik(o, tau, p, want_grad.then_some(&mut g));
        if want_grad {
            g[6] = dm;
            g[7] = ds;
        }
        acc.push(ll + ld + w.ln(), want_grad.then_some(&g));
    }
    let (lm, dm, ds) = law.log_mass_above(last);
    if lm > f64::NEG_INFINITY {
        let ll = node_loglik(o, last, p, want_grad.then_some(&mut g));
        if want_grad {
            g[6] = dm;
            g[7] = ds;
        }
        acc.push(ll + lm, want_grad.then_some(&g));
    }
    (acc.value(), acc.gradient())
}

/// Marginal case likelihood averaged over diagnosis times `last + G` for a pool of gaps
/// under CS2, where averaging the changepoint densities first gives the same integral
/// with one set of trajectory evaluations.
pub(crate) fn pooled_normal(o: &Obs, model: &ChangepointModel, gaps_sorted: &[f64]) -> f64 {
    let p = Prepared::new(model);
    let last = o.last();
    let sigma = model.sigma_tau;
    let ln_m = (gaps_sorted.len() as f64).ln();
    let centres: Vec<f64> = gaps_sorted.iter().map(|g| last + g - model.mu_tau).collect();
    let lo = centres[0] - 8.0 * sigma;
    let hi = centres[centres.len() - 1] + 8.0 * sigma;
    let mut nodes = Vec::new();
    tau_nodes(o.times, lo, hi.min(last), sigma, &mut nodes);
    let mut acc = LogSum::new();
    let mut terms = Vec::with_capacity(centres.len());
    for &(tau, w) in &nodes {
        terms.clear();
        terms.extend(centres.iter().map(|c| {
            let z = (tau - c) / sigma;
            -0.5 * z * z
        }));
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
        let ld = mx + s.ln() - ln_m - sigma.ln() - LN_SQRT_2PI;
        let ll = node_loglik(o, tau, &p, None);
        acc.push(ll + ld + w.ln(), None);
    }
    let flat: f64 = centres.iter().map(|c| norm_sf((last - c) / sigma)).sum::<f64>()
        / centres.len() as f64;
    if flat > 0.0 {
        acc.push(node_loglik(o, last, &p, None) + flat.ln(), None);
    }
    acc.value()
}
