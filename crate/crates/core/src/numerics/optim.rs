//! Bounded quasi-Newton maximum likelihood with finite-difference asymptotic covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Map between a parameter's model scale and the unconstrained working scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// Positive scale parameters: working = ln(model).
    Log,
    /// Correlations in (−1, 1): working = atanh(model).
    FisherZ,
}

impl Transform {
    pub fn to_model(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::FisherZ => u.tanh(),
        }
    }

    pub fn to_working(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::FisherZ => x.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh(),
        }
    }

    /// d(model)/d(working) at working value `u`.
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => u.exp(),
            Transform::FisherZ => 1.0 - u.tanh().powi(2),
        }
    }
}

/// One parameter of a likelihood: name, transform and box bounds on the working scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub transform: Transform,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, transform: Transform) -> Self {
        let (lower, upper) = match transform {
            Transform::Identity => (f64::NEG_INFINITY, f64::INFINITY),
            Transform::Log => ((1e-6f64).ln(), (1e4f64).ln()),
            Transform::FisherZ => (-5.0, 5.0),
        };
        Self {
            name: name.into(),
            transform,
            lower,
            upper,
        }
    }

    pub fn identity(name: impl Into<String>) -> Self {
        Self::new(name, Transform::Identity)
    }

    pub fn log(name: impl Into<String>) -> Self {
        Self::new(name, Transform::Log)
    }

    pub fn fisher_z(name: impl Into<String>) -> Self {
        Self::new(name, Transform::FisherZ)
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

/// A function to minimize over working-scale parameters (a negative log-likelihood).
pub trait Objective: Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Value and gradient. The default uses central differences.
    fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let f = self.value(x);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let up = self.value(&xp);
            xp[i] = x[i] - h;
            let dn = self.value(&xp);
            xp[i] = x[i];
            g[i] = (up - dn) / (2.0 * h);
        }
        f
    }

    fn has_gradient(&self) -> bool {
        false
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop once the relative objective change falls below this.
    pub rel_tol: f64,
    /// Stop once the projected gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Central-difference step for the Hessian, on the working scale.
    pub hessian_step: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_tol: 1e-9,
            grad_tol: 1e-6,
            hessian_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub at_bound: Vec<bool>,
}

fn eval(obj: &dyn Objective, x: &[f64], g: &mut [f64]) -> f64 {
    let f = obj.value_grad(x, g);
    if f.is_finite() && g.iter().all(|v| v.is_finite()) {
        f
    } else {
        f64::INFINITY
    }
}

struct LineSearch<'a> {
    obj: &'a dyn Objective,
    x: &'a [f64],
    d: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
    f0: f64,
    dphi0: f64,
}

struct Trial {
    alpha: f64,
    f: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

impl LineSearch<'_> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;

    fn trial(&self, alpha: f64) -> Trial {
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.d)
            .enumerate()
            .map(|(i, (xi, di))| (xi + alpha * di).clamp(self.lower[i], self.upper[i]))
            .collect();
        let mut g = vec![0.0; x.len()];
        let f = eval(self.obj, &x, &mut g);
        let dphi = g.iter().zip(self.d).map(|(a, b)| a * b).sum();
        Trial { alpha, f, dphi, x, g }
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + Self::C1 * t.alpha * self.dphi0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.dphi.abs() <= -Self::C2 * self.dphi0
    }

    fn run(&self, alpha0: f64, alpha_max: f64) -> Option<Trial> {
        let mut prev = Trial {
            alpha: 0.0,
            f: self.f0,
            dphi: self.dphi0,
            x: Vec::new(),
            g: Vec::new(),
        };
        let mut alpha = alpha0.min(alpha_max);
        let mut best: Option<Trial> = None;
        for i in 0..40 {
            let t = self.trial(alpha);
            if !t.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                if alpha - prev.alpha < 1e-16 {
                    break;
                }
                continue;
            }
            if !self.armijo(&t) || (i > 0 && t.f >= prev.f) {
                return self.zoom(prev, t).or(best);
            }
            if self.curvature(&t) {
                return Some(t);
            }
            if t.dphi >= 0.0 {
                return self.zoom(t, prev).or(best);
            }
            if alpha >= alpha_max {
                return Some(t);
            }
            alpha = (2.0 * alpha).min(alpha_max);
            best = Some(Trial {
                x: t.x.clone(),
                g: t.g.clone(),
                ..t
            });
            prev = t;
        }
        best
    }

    fn zoom(&self, mut lo: Trial, mut hi: Trial) -> Option<Trial> {
        let mut best_ok: Option<Trial> = None;
        for _ in 0..40 {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width < 1e-16 * b.max(1.0) {
                break;
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (lo.alpha + hi.alpha));
            if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
                alpha = 0.5 * (lo.alpha + hi.alpha);
            }
            let t = self.trial(alpha);
            if !self.armijo(&t) || t.f >= lo.f || !t.f.is_finite() {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return Some(t);
                }
                if t.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                best_ok = Some(Trial {
                    x: t.x.clone(),
                    g: t.g.clone(),
                    ..t
                });
                lo = t;
            }
        }
        if lo.alpha > 0.0 && lo.f < self.f0 && !lo.x.is_empty() {
            return Some(lo);
        }
        best_ok
    }
}

fn cubic_min(a: &Trial, b: &Trial) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite()) {
        return None;
    }
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let den = b.dphi - a.dphi + 2.0 * d2;
    if den == 0.0 {
        return None;
    }
    let v = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / den;
    v.is_finite().then_some(v)
}

/// Projected BFGS over a box. Deterministic for a given objective and start.
pub fn minimize(
    obj: &dyn Objective,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &MleOptions,
) -> MinimizeOutcome {
    let n = x0.len();
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lower[i], upper[i])).collect();
    let mut g = vec![0.0; n];
    let mut f = eval(obj, &x, &mut g);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut converged = false;
    let mut iterations = 0;
    let mut small_steps = 0;

    let active = |x: &[f64], g: &[f64], i: usize| {
        let span = 1e-10 * (1.0 + x[i].abs());
        (x[i] <= lower[i] + span && g[i] > 0.0) || (x[i] >= upper[i] - span && g[i] < 0.0)
    };

    if !f.is_finite() {
        return MinimizeOutcome {
            at_bound: vec![false; n],
            x,
            value: f,
            iterations: 0,
            converged: false,
        };
    }

    while iterations < opts.max_iter {
        let free: Vec<bool> = (0..n).map(|i| !active(&x, &g, i)).collect();
        let pg_norm = (0..n)
            .filter(|&i| free[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut d = vec![0.0; n];
        for i in (0..n).filter(|&i| free[i]) {
            d[i] = -(0..n).filter(|&j| free[j]).map(|j| h[(i, j)] * g[j]).sum::<f64>();
        }
        let mut dphi0: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(dphi0 < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
            dphi0 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        // largest step that stays inside the box
        let mut alpha_max = f64::INFINITY;
        for i in 0..n {
            if d[i] > 0.0 && upper[i].is_finite() {
                alpha_max = alpha_max.min((upper[i] - x[i]) / d[i]);
            } else if d[i] < 0.0 && lower[i].is_finite() {
                alpha_max = alpha_max.min((lower[i] - x[i]) / d[i]);
            }
        }
        let alpha0 = if fresh {
            let dn = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
            (1.0 / dn.max(1e-12)).min(1.0)
        } else {
            1.0
        };
        let ls = LineSearch {
            obj,
            x: &x,
            d: &d,
            lower,
            upper,
            f0: f,
            dphi0,
        };
        let Some(t) = ls.run(alpha0, alpha_max.max(1e-300)) else {
            if fresh {
                // steepest descent failed too: stationary to working precision
                converged = pg_norm <= 1e-3 * f.abs().max(1.0);
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let s = DVector::from_iterator(n, t.x.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, t.g.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        let rel = (f - t.f).abs() / t.f.abs().max(1.0);
        x = t.x;
        g = t.g;
        f = t.f;
        if rel < opts.rel_tol {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    let at_bound = (0..n)
        .map(|i| {
            let span = 1e-8 * (1.0 + x[i].abs());
            x[i] <= lower[i] + span || x[i] >= upper[i] - span
        })
        .collect();
    MinimizeOutcome {
        x,
        value: f,
        iterations,
        converged,
        at_bound,
    }
}

/// Inverse Hessian of `obj` at `x` by central differences with step `step`. Returns the
/// covariance and whether a pseudo-inverse was needed.
pub fn asymptotic_covariance(obj: &dyn Objective, x: &[f64], step: f64) -> (DMatrix<f64>, bool) {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    if obj.has_gradient() {
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for i in 0..n {
            xp[i] = x[i] + step;
            obj.value_grad(&xp, &mut gp);
            xp[i] = x[i] - step;
            obj.value_grad(&xp, &mut gm);
            xp[i] = x[i];
            for j in 0..n {
                hess[(i, j)] = (gp[j] - gm[j]) / (2.0 * step);
            }
        }
    } else {
        let f0 = obj.value(x);
        let at = |xp: &mut Vec<f64>, i: usize, di: f64, j: usize, dj: f64| {
            xp[i] += di;
            xp[j] += dj;
            let v = obj.value(xp);
            xp[i] -= di;
            xp[j] -= dj;
            v
        };
        for i in 0..n {
            let up = at(&mut xp, i, step, i, 0.0);
            let dn = at(&mut xp, i, -step, i, 0.0);
            hess[(i, i)] = (up - 2.0 * f0 + dn) / (step * step);
            for j in 0..i {
                let pp = at(&mut xp, i, step, j, step);
                let pm = at(&mut xp, i, step, j, -step);
                let mp = at(&mut xp, i, -step, j, step);
                let mm = at(&mut xp, i, -step, j, -step);
                let v = (pp - pm - mp + mm) / (4.0 * step * step);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    if hess.iter().any(|v| !v.is_finite()) {
        return (DMatrix::zeros(n, n), true);
    }
    let eig = SymmetricEigen::new(hess);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * max_ev.max(1e-300);
    let pseudo = eig.eigenvalues.iter().any(|&v| v <= tol);
    let inv_vals = eig.eigenvalues.map(|v| if v > tol { 1.0 / v } else { 0.0 });
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    ((&cov + cov.transpose()) * 0.5, pseudo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub params: Vec<ParamSpec>,
    /// Estimate on the model scale.
    pub estimate: Vec<f64>,
    /// Estimate on the working scale.
    pub working: Vec<f64>,
    pub neg_loglik: f64,
    /// Inverse observed information on the working scale.
    pub asymptotic_cov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub at_bound: Vec<bool>,
    pub pseudo_inverse: bool,
}

impl MleResult {
    /// Assemble a result from a working-scale optimum.
    pub fn from_working(
        params: Vec<ParamSpec>,
        working: Vec<f64>,
        neg_loglik: f64,
        asymptotic_cov: DMatrix<f64>,
        converged: bool,
        iterations: usize,
        at_bound: Vec<bool>,
        pseudo_inverse: bool,
    ) -> Self {
        let estimate = params
            .iter()
            .zip(&working)
            .map(|(p, &u)| p.transform.to_model(u))
            .collect();
        Self {
            params,
            estimate,
            working,
            neg_loglik,
            asymptotic_cov,
            converged,
            iterations,
            at_bound,
            pseudo_inverse,
        }
    }

    /// Delta-method covariance on the model scale.
    pub fn model_cov(&self) -> DMatrix<f64> {
        let j: Vec<f64> = self
            .params
            .iter()
            .zip(&self.working)
            .map(|(p, &u)| p.transform.derivative(u))
            .collect();
        DMatrix::from_fn(j.len(), j.len(), |a, b| {
            j[a] * self.asymptotic_cov[(a, b)] * j[b]
        })
    }

    pub fn std_errors(&self) -> Vec<f64> {
        let c = self.model_cov();
        (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn flagged(&self) -> bool {
        !self.converged || self.pseudo_inverse || self.at_bound.iter().any(|&b| b)
    }

    /// A working-scale draw from N(working, asymptotic_cov).
    pub fn draw_working<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.asymptotic_cov.clone());
        let z = DVector::from_fn(self.working.len(), |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v
        });
        let scaled = z.zip_map(&eig.eigenvalues, |zi, ev| zi * ev.max(0.0).sqrt());
        let delta = &eig.eigenvectors * scaled;
        self.working.iter().zip(delta.iter()).map(|(w, d)| w + d).collect()
    }
}

/// Maximize a likelihood given as a negative log-likelihood over working-scale
/// parameters. `init` is on the model scale.
pub fn maximize_likelihood(
    objective: &dyn Objective,
    init: &[f64],
    params: &[ParamSpec],
    opts: &MleOptions,
) -> Result<MleResult> {
    if init.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial values for {} parameters",
            init.len(),
            params.len()
        )));
    }
    let x0: Vec<f64> = params
        .iter()
        .zip(init)
        .map(|(p, &v)| p.transform.to_working(v))
        .collect();
    let f0 = objective.value(&x0);
    if !f0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "objective is not finite at the initial point ({f0})"
        )));
    }
    let lower: Vec<f64> = params.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = params.iter().map(|p| p.upper).collect();
    let out = minimize(objective, &x0, &lower, &upper, opts);
    let (cov, pseudo) = asymptotic_covariance(objective, &out.x, opts.hessian_step);
    if !out.converged {
        log::warn!("optimizer stopped after {} iterations without converging", out.iterations);
    }
    if pseudo {
        log::warn!("observed information is singular; using a pseudo-inverse");
    }
    Ok(MleResult::from_working(
        params.to_vec(),
        out.x,
        out.value,
        cov,
        out.converged,
        out.iterations,
        out.at_bound,
        pseudo,
    ))
}
