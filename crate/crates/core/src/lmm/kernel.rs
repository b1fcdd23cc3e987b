//! Per-subject Gaussian likelihood pieces in Woodbury form.
//!
//! With Σ_b = L Lᵀ and W = σ²I + LᵀZᵀZL, every quantity below needs only the
//! per-subject cross products, never an n×n matrix.

use nalgebra::{DMatrix, DVector};

use crate::numerics::LN_SQRT_2PI;

#[derive(Debug, Clone)]
pub(crate) struct SubjectStats {
    pub n: usize,
    pub xtx: DMatrix<f64>,
    pub xtz: DMatrix<f64>,
    pub ztz: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub zty: DVector<f64>,
    pub yty: f64,
}

impl SubjectStats {
    pub fn new(x: &DMatrix<f64>, z: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let xt = x.transpose();
        let zt = z.transpose();
        Self {
            n: y.len(),
            xtx: &xt * x,
            xtz: &xt * z,
            ztz: &zt * z,
            xty: &xt * y,
            zty: &zt * y,
            yty: y.dot(y),
        }
    }
}

/// Gradient accumulators of the log-likelihood.
#[derive(Debug, Clone)]
pub(crate) struct Grad {
    pub theta: DVector<f64>,
    /// ∂ℓ/∂Σ_b, read as tr(G dΣ).
    pub sigma_b: DMatrix<f64>,
    pub sigma2: f64,
}

impl Grad {
    pub fn zeros(p: usize, q: usize) -> Self {
        Self {
            theta: DVector::zeros(p),
            sigma_b: DMatrix::zeros(q, q),
            sigma2: 0.0,
        }
    }

    pub fn add(&mut self, other: &Grad) {
        self.theta += &other.theta;
        self.sigma_b += &other.sigma_b;
        self.sigma2 += other.sigma2;
    }
}

fn w_inverse(s: &SubjectStats, l: &DMatrix<f64>, sigma2: f64) -> Option<(DMatrix<f64>, f64, DMatrix<f64>)> {
    let q = l.nrows();
    let ztzl = &s.ztz * l;
    let m = l.transpose() * &ztzl;
    let w = &m + DMatrix::identity(q, q) * sigma2;
    let chol = w.cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some((chol.inverse(), logdet, ztzl))
}

/// Adds XᵀV⁻¹X and XᵀV⁻¹y for the GLS fixed-effect solve.
pub(crate) fn accumulate_gls(
    s: &SubjectStats,
    l: &DMatrix<f64>,
    sigma2: f64,
    xvx: &mut DMatrix<f64>,
    xvy: &mut DVector<f64>,
) -> bool {
    let Some((wi, _, _)) = w_inverse(s, l, sigma2) else {
        return false;
    };
    let xzl = &s.xtz * l;
    let lzy = l.transpose() * &s.zty;
    let xzl_wi = &xzl * &wi;
    *xvx += (&s.xtx - &xzl_wi * xzl.transpose()) / sigma2;
    *xvy += (&s.xty - xzl_wi * lzy) / sigma2;
    true
}

/// Marginal log-likelihood of one subject, optionally accumulating its gradient.
pub(crate) fn loglik(
    s: &SubjectStats,
    theta: &DVector<f64>,
    l: &DMatrix<f64>,
    sigma2: f64,
    grad: Option<&mut Grad>,
) -> f64 {
    let q = l.nrows() as f64;
    let n = s.n as f64;
    let Some((wi, logdet_w, ztzl)) = w_inverse(s, l, sigma2) else {
        return f64::NEG_INFINITY;
    };
    let zr = &s.zty - s.xtz.transpose() * theta;
    let rr = s.yty - 2.0 * theta.dot(&s.xty) + theta.dot(&(&s.xtx * theta));
    let u = l.transpose() * &zr;
    let wiu = &wi * &u;
    let quad = (rr - u.dot(&wiu)) / sigma2;
    let ll = -(n * LN_SQRT_2PI + 0.5 * ((n - q) * sigma2.ln() + logdet_w + quad));
    if let Some(g) = grad {
        let c = l * &wiu;
        let ztzc = &s.ztz * &c;
        g.theta += (&s.xty - &s.xtx * theta - &s.xtz * &c) / sigma2;
        let a = (&zr - &ztzc) / sigma2;
        let m_z = (&s.ztz - &ztzl * &wi * ztzl.transpose()) / sigma2;
        g.sigma_b += (&a * a.transpose() - m_z) * 0.5;
        let vr2 = (rr - 2.0 * c.dot(&zr) + c.dot(&ztzc)) / (sigma2 * sigma2);
        let m = l.transpose() * &ztzl;
        let tr = (&wi * m).trace();
        let tr_vi = (n - tr) / sigma2;
        g.sigma2 += 0.5 * (vr2 - tr_vi);
    }
    ll
}

/// Posterior mean and covariance of the random effects given a subject's residuals.
pub(crate) fn posterior(
    s: &SubjectStats,
    theta: &DVector<f64>,
    l: &DMatrix<f64>,
    sigma2: f64,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (wi, _, _) = w_inverse(s, l, sigma2)?;
    let zr = &s.zty - s.xtz.transpose() * theta;
    let mean = l * (&wi * (l.transpose() * zr));
    let mut cov = l * &wi * l.transpose() * sigma2;
    cov = (&cov + cov.transpose()) * 0.5;
    Some((mean, cov))
}
