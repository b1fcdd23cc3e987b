use nalgebra::DMatrix;

use super::mvn::cholesky;
use crate::error::Result;

/// Random-effect covariance written as standard deviations plus canonical partial
/// correlations. Every CPC vector in (−1, 1) yields a valid correlation matrix, and for
/// two effects the single CPC is the ordinary correlation.
///
/// The working (unconstrained) scale is `[ln sd_0, .., ln sd_{q-1}, atanh c_10, atanh c_20,
/// atanh c_21, ..]`, CPCs listed row by row below the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedScales {
    pub sd: Vec<f64>,
    pub cpc: Vec<f64>,
}

impl CorrelatedScales {
    pub fn new(sd: Vec<f64>, cpc: Vec<f64>) -> Self {
        assert_eq!(cpc.len(), Self::n_cpc(sd.len()));
        Self { sd, cpc }
    }

    pub fn independent(sd: Vec<f64>) -> Self {
        let m = Self::n_cpc(sd.len());
        Self { sd, cpc: vec![0.0; m] }
    }

    pub fn q(&self) -> usize {
        self.sd.len()
    }

    pub fn n_cpc(q: usize) -> usize {
        q * q.saturating_sub(1) / 2
    }

    pub fn n_working(q: usize) -> usize {
        q + Self::n_cpc(q)
    }

    pub fn from_working(q: usize, w: &[f64]) -> Self {
        assert_eq!(w.len(), Self::n_working(q));
        Self {
            sd: w[..q].iter().map(|v| v.exp()).collect(),
            cpc: w[q..].iter().map(|v| v.tanh()).collect(),
        }
    }

    pub fn working(&self) -> Vec<f64> {
        self.sd
            .iter()
            .map(|s| s.ln())
            .chain(self.cpc.iter().map(|c| c.atanh()))
            .collect()
    }

    /// Lower Cholesky factor of the correlation matrix.
    pub fn correlation_factor(&self) -> DMatrix<f64> {
        let q = self.q();
        let mut l = DMatrix::zeros(q, q);
        let mut idx = 0;
        for i in 0..q {
            let mut rem: f64 = 1.0;
            for j in 0..i {
                let v = self.cpc[idx] * rem.max(0.0).sqrt();
                idx += 1;
                l[(i, j)] = v;
                rem -= v * v;
            }
            l[(i, i)] = rem.max(0.0).sqrt();
        }
        l
    }

    /// Lower factor L with covariance = L Lᵀ.
    pub fn factor(&self) -> DMatrix<f64> {
        let mut l = self.correlation_factor();
        for i in 0..self.q() {
            for j in 0..=i {
                l[(i, j)] *= self.sd[i];
            }
        }
        l
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let l = self.factor();
        &l * l.transpose()
    }

    pub fn correlation(&self) -> DMatrix<f64> {
        let l = self.correlation_factor();
        let mut r = &l * l.transpose();
        for i in 0..self.q() {
            r[(i, i)] = 1.0;
        }
        r
    }

    /// Inverse of [`Self::covariance`] for a positive-definite input.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let q = cov.nrows();
        let sd: Vec<f64> = (0..q).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        let corr = DMatrix::from_fn(q, q, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
        let l = cholesky(&corr)?;
        let mut cpc = Vec::with_capacity(Self::n_cpc(q));
        for i in 0..q {
            let mut rem: f64 = 1.0;
            for j in 0..i {
                let v = l[(i, j)];
                cpc.push((v / rem.max(1e-300).sqrt()).clamp(-1.0 + 1e-12, 1.0 - 1e-12));
                rem -= v * v;
            }
        }
        Ok(Self { sd, cpc })
    }

    /// ∂Σ/∂w_k for each working coordinate k.
    pub fn covariance_jacobian(q: usize, w: &[f64]) -> Vec<DMatrix<f64>> {
        let base = Self::from_working(q, w).covariance();
        let mut out = Vec::with_capacity(w.len());
        for k in 0..q {
            out.push(DMatrix::from_fn(q, q, |i, j| {
                base[(i, j)] * (((i == k) as u8 + (j == k) as u8) as f64)
            }));
        }
        let h = 1e-6;
        let mut wp = w.to_vec();
        for k in q..w.len() {
            wp[k] = w[k] + h;
            let up = Self::from_working(q, &wp).covariance();
            wp[k] = w[k] - h;
            let dn = Self::from_working(q, &wp).covariance();
            wp[k] = w[k];
            out.push((up - dn) / (2.0 * h));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_effects_cpc_is_correlation() {
        let s = CorrelatedScales::new(vec![0.451, 0.039], vec![-0.147]);
        let c = s.covariance();
        assert!((c[(0, 0)] - 0.451f64.powi(2)).abs() < 1e-15);
        assert!((c[(1, 1)] - 0.039f64.powi(2)).abs() < 1e-15);
        assert!((c[(0, 1)] + 0.147 * 0.451 * 0.039).abs() < 1e-15);
        assert!((s.correlation()[(1, 0)] + 0.147).abs() < 1e-15);
    }

    #[test]
    fn working_round_trip_and_from_covariance() {
        let w = vec![0.1, -0.4, 0.3, -1.2, 0.5, 0.7, -0.2, 0.9, 0.05, -0.6];
        let s = CorrelatedScales::from_working(4, &w);
        let back = s.working();
        for (a, b) in w.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let again = CorrelatedScales::from_covariance(&s.covariance()).unwrap();
        for (a, b) in s.cpc.iter().zip(&again.cpc) {
            assert!((a - b).abs() < 1e-10);
        }
        // any working vector gives a positive-definite correlation matrix with unit diagonal
        let r = s.correlation();
        assert!(cholesky(&r).is_ok());
        for i in 0..4 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let w = vec![-0.3, 0.2, 0.1, 0.4, -0.7, 0.2];
        let jac = CorrelatedScales::covariance_jacobian(3, &w);
        for k in 0..w.len() {
            let mut wp = w.clone();
            wp[k] += 1e-5;
            let up = CorrelatedScales::from_working(3, &wp).covariance();
            wp[k] -= 2e-5;
            let dn = CorrelatedScales::from_working(3, &wp).covariance();
            let fd = (up - dn) / 2e-5;
            assert!((fd - &jac[k]).amax() < 1e-8);
        }
    }
}
