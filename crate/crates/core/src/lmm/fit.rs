use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::kernel::{self, Grad, SubjectStats};
use super::{LmmFit, LmmSpec, SubjectRecord};
use crate::error::{Error, Result};
use crate::numerics::{
    asymptotic_covariance, minimize, CorrelatedScales, MleOptions, MleResult, Objective,
};

const CHUNK: usize = 64;

struct LmmData {
    p: usize,
    q: usize,
    stats: Vec<SubjectStats>,
}

impl LmmData {
    fn n_cov(&self) -> usize {
        CorrelatedScales::n_working(self.q)
    }

    fn variance_parts(&self, w: &[f64]) -> (DMatrix<f64>, f64) {
        let k = self.n_cov();
        let l = CorrelatedScales::from_working(self.q, &w[..k]).factor();
        (l, (2.0 * w[k]).exp())
    }

    /// GLS fixed effects for the given variance parameters.
    fn gls(&self, l: &DMatrix<f64>, sigma2: f64) -> Option<DVector<f64>> {
        let parts: Vec<Option<(DMatrix<f64>, DVector<f64>)>> = self
            .stats
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut a = DMatrix::zeros(self.p, self.p);
                let mut b = DVector::zeros(self.p);
                for s in chunk {
                    if !kernel::accumulate_gls(s, l, sigma2, &mut a, &mut b) {
                        return None;
                    }
                }
                Some((a, b))
            })
            .collect();
        let mut a = DMatrix::zeros(self.p, self.p);
        let mut b = DVector::zeros(self.p);
        for part in parts {
            let (pa, pb) = part?;
            a += pa;
            b += pb;
        }
        a.cholesky().map(|c| c.solve(&b))
    }

    fn total(&self, theta: &DVector<f64>, l: &DMatrix<f64>, sigma2: f64) -> (f64, Grad) {
        let parts: Vec<(f64, Grad)> = self
            .stats
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = Grad::zeros(self.p, self.q);
                let mut ll = 0.0;
                for s in chunk {
                    ll += kernel::loglik(s, theta, l, sigma2, Some(&mut g));
                }
                (ll, g)
            })
            .collect();
        let mut g = Grad::zeros(self.p, self.q);
        let mut ll = 0.0;
        for (pl, pg) in parts {
            ll += pl;
            g.add(&pg);
        }
        (ll, g)
    }

    /// Negative-log-likelihood gradient over the variance working parameters.
    fn variance_gradient(&self, wv: &[f64], l_grad: &Grad, sigma2: f64, out: &mut [f64]) {
        let k = self.n_cov();
        let jac = CorrelatedScales::covariance_jacobian(self.q, &wv[..k]);
        for (o, j) in out.iter_mut().zip(&jac) {
            *o = -l_grad.sigma_b.component_mul(j).sum();
        }
        out[k] = -l_grad.sigma2 * 2.0 * sigma2;
    }
}

/// −loglik over variance parameters with θ profiled out.
struct Profiled<'a>(&'a LmmData);

impl Objective for Profiled<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.value_grad(w, &mut g)
    }

    fn value_grad(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let d = self.0;
        let (l, s2) = d.variance_parts(w);
        let Some(theta) = d.gls(&l, s2) else {
            return f64::INFINITY;
        };
        let (ll, grad) = d.total(&theta, &l, s2);
        d.variance_gradient(w, &grad, s2, g);
        -ll
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

/// −loglik over the full working vector [θ, variance parameters].
struct Full<'a>(&'a LmmData);

impl Objective for Full<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.value_grad(w, &mut g)
    }

    fn value_grad(&self, w: &[f64], g: &mut [f64]) -> f64 {
        let d = self.0;
        let p = d.p;
        let theta = DVector::from_column_slice(&w[..p]);
        let (l, s2) = d.variance_parts(&w[p..]);
        let (ll, grad) = d.total(&theta, &l, s2);
        for i in 0..p {
            g[i] = -grad.theta[i];
        }
        d.variance_gradient(&w[p..], &grad, s2, &mut g[p..]);
        -ll
    }

    fn has_gradient(&self) -> bool {
        true
    }
}

fn build(data: &[SubjectRecord], spec: &LmmSpec) -> Result<LmmData> {
    let q = spec.q();
    if data.len() < q + 2 {
        return Err(Error::InvalidData(format!(
            "{} needs at least {} subjects, got {}",
            spec.name(),
            q + 2,
            data.len()
        )));
    }
    let stats = data
        .iter()
        .map(|s| spec.stats(&s.times, &s.y, s.age))
        .collect();
    Ok(LmmData { p: spec.p(), q, stats })
}

/// Moment-based starting point: OLS fixed effects, residual variance split into
/// between- and within-subject parts.
pub fn initial_working(data: &[SubjectRecord], spec: &LmmSpec) -> Result<Vec<f64>> {
    let d = build(data, spec)?;
    Ok(initial(&d))
}

fn initial(d: &LmmData) -> Vec<f64> {
    let (p, q) = (d.p, d.q);
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut ztz = DMatrix::<f64>::zeros(q, q);
    let mut n_obs = 0usize;
    for s in &d.stats {
        xtx += &s.xtx;
        xty += &s.xty;
        ztz += &s.ztz;
        n_obs += s.n;
    }
    let theta = xtx
        .clone()
        .svd(true, true)
        .solve(&xty, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(p));
    let (mut within, mut between, mut inv_n) = (0.0, 0.0, 0.0);
    let mut n_sub = 0usize;
    for s in &d.stats {
        if s.n == 0 {
            continue;
        }
        let rr = s.yty - 2.0 * theta.dot(&s.xty) + theta.dot(&(&s.xtx * &theta));
        // the first random-effect column is the intercept
        let rsum = s.zty[0] - (s.xtz.transpose() * &theta)[0];
        let n = s.n as f64;
        let rbar = rsum / n;
        within += rr - n * rbar * rbar;
        between += rbar * rbar;
        inv_n += 1.0 / n;
        n_sub += 1;
    }
    let total = (within + 0.0) / n_obs.max(1) as f64 + between / n_sub.max(1) as f64;
    let dof = n_obs.saturating_sub(n_sub).max(1) as f64;
    let s2w = (within / dof).max(1e-8);
    let s2b = (between / n_sub.max(1) as f64 - s2w * inv_n / n_sub.max(1) as f64)
        .max(0.05 * total)
        .max(1e-8);
    let mut w: Vec<f64> = theta.iter().copied().collect();
    w.push(0.5 * s2b.ln());
    for j in 1..q {
        let rms = (ztz[(j, j)] / n_obs.max(1) as f64).sqrt().max(1e-3);
        w.push((0.25 * total.max(1e-8).sqrt() / rms).ln());
    }
    w.extend(std::iter::repeat_n(0.0, CorrelatedScales::n_cpc(q)));
    w.push(0.5 * s2w.ln());
    w
}

pub fn fit_lmm(data: &[SubjectRecord], spec: &LmmSpec) -> Result<LmmFit> {
    fit_lmm_with(data, spec, &MleOptions::default(), None)
}

/// Fit with explicit options and an optional full working-vector start.
pub fn fit_lmm_with(
    data: &[SubjectRecord],
    spec: &LmmSpec,
    opts: &MleOptions,
    init: Option<&[f64]>,
) -> Result<LmmFit> {
    let d = build(data, spec)?;
    let p = d.p;
    let start = match init {
        Some(w) if w.len() == spec.n_params() => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!(
                "{} initial values for {} parameters",
                w.len(),
                spec.n_params()
            )))
        }
        None => initial(&d),
    };
    let specs = spec.param_specs();
    let lower: Vec<f64> = specs[p..].iter().map(|s| s.lower).collect();
    let upper: Vec<f64> = specs[p..].iter().map(|s| s.upper).collect();
    let prof = Profiled(&d);
    if !prof.value(&start[p..]).is_finite() {
        return Err(Error::Fit(format!("{}: likelihood not finite at start", spec.name())));
    }
    let out = minimize(&prof, &start[p..], &lower, &upper, opts);
    let (l, s2) = d.variance_parts(&out.x);
    let theta = d
        .gls(&l, s2)
        .ok_or_else(|| Error::Fit(format!("{}: singular GLS system", spec.name())))?;
    let mut working: Vec<f64> = theta.iter().copied().collect();
    working.extend(&out.x);
    let (cov, pseudo) = asymptotic_covariance(&Full(&d), &working, opts.hessian_step);
    let mut at_bound = vec![false; p];
    at_bound.extend(&out.at_bound);
    if !out.converged {
        log::warn!("{} fit did not converge in {} iterations", spec.name(), out.iterations);
    }
    let mle = MleResult::from_working(
        specs,
        working.clone(),
        out.value,
        cov,
        out.converged,
        out.iterations,
        at_bound,
        pseudo,
    );
    let k = CorrelatedScales::n_working(d.q);
    Ok(LmmFit {
        spec: spec.clone(),
        theta: working[..p].to_vec(),
        scales: CorrelatedScales::from_working(d.q, &working[p..p + k]),
        sigma_xi: working[p + k].exp(),
        mle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(spec: &LmmSpec, n: usize) -> Vec<SubjectRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..n)
            .map(|i| {
                let k = rng.random_range(1..6);
                let times: Vec<f64> = (0..k).map(|j| j as f64 * 0.7).collect();
                let b0: f64 = rng.random::<f64>() - 0.5;
                let y = times
                    .iter()
                    .map(|t| 2.0 + b0 + 0.1 * t + 0.3 * (rng.random::<f64>() - 0.5))
                    .collect();
                let age = rng.random_range(55.0..74.0);
                let _ = spec;
                SubjectRecord::new(format!("s{i}"), times, y, age, 6.0, false).unwrap()
            })
            .collect()
    }

    fn check_gradient(obj: &dyn Objective, x: &[f64]) {
        let mut g = vec![0.0; x.len()];
        obj.value_grad(x, &mut g);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6;
            xp[i] = x[i] + h;
            let up = obj.value(&xp);
            xp[i] = x[i] - h;
            let dn = obj.value(&xp);
            xp[i] = x[i];
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let ages: Vec<f64> = (0..40).map(|i| 55.0 + i as f64 * 0.5).collect();
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let spline = LmmSpec::Spline {
            age: crate::splines::make_basis_spec(&ages).unwrap(),
            time: crate::splines::make_basis_spec(&ts).unwrap(),
        };
        for spec in [LmmSpec::Cn1, LmmSpec::Cn2, LmmSpec::Cn3, spline] {
            let data = toy(&spec, 30);
            let d = build(&data, &spec).unwrap();
            let mut w = initial(&d);
            for (i, v) in w.iter_mut().enumerate() {
                *v += 0.05 * ((i * 7 % 5) as f64 - 2.0);
            }
            check_gradient(&Full(&d), &w);
            check_gradient(&Profiled(&d), &w[d.p..]);
        }
    }
}
