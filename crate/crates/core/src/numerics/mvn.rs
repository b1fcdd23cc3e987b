use nalgebra::{DMatrix, DVector};

use super::normal::LN_SQRT_2PI;
use crate::error::{Error, Result};

/// Lower Cholesky factor. A non-positive pivot is reported by index and value.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            n,
            a.ncols()
        )));
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::SingularMatrix { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Log-density of N(mean, cov) at x, via Cholesky.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = x.len();
    if mean.len() != d || cov.nrows() != d || cov.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "x has {d} entries, mean {}, covariance {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let l = cholesky(cov)?;
    // forward substitution L z = x − mean
    let mut z = x - mean;
    for i in 0..d {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    Ok(-(d as f64) * LN_SQRT_2PI - 0.5 * log_det - 0.5 * z.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn standard_normal_mode() {
        let v = mvn_logpdf(
            &DVector::from_element(1, 0.0),
            &DVector::from_element(1, 0.0),
            &DMatrix::identity(1, 1),
        )
        .unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-14);
        let v2 = mvn_logpdf(
            &DVector::zeros(2),
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!((v2 + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    fn naive_det_inv(a: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        // Gauss–Jordan with partial pivoting.
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = DMatrix::identity(n, n);
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[(i, c)].abs().partial_cmp(&m[(j, c)].abs()).unwrap())
                .unwrap();
            if p != c {
                m.swap_rows(p, c);
                inv.swap_rows(p, c);
                det = -det;
            }
            let piv = m[(c, c)];
            det *= piv;
            for j in 0..n {
                m[(c, j)] /= piv;
                inv[(c, j)] /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = m[(r, c)];
                    for j in 0..n {
                        m[(r, j)] -= f * m[(c, j)];
                        inv[(r, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
        (det, inv)
    }

    #[test]
    fn matches_naive_oracle_in_five_dimensions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let cov = &a * a.transpose() + DMatrix::identity(5, 5) * 0.5;
            let x = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
            let mean = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            let (det, inv) = naive_det_inv(&cov);
            let r = &x - &mean;
            let quad = (r.transpose() * inv * &r)[(0, 0)];
            let oracle = -0.5 * (5.0 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
            let v = mvn_logpdf(&x, &mean, &cov).unwrap();
            assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
        }
    }

    #[test]
    fn non_spd_reports_pivot() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = mvn_logpdf(&DVector::zeros(2), &DVector::zeros(2), &cov).unwrap_err();
        match err {
            Error::SingularMatrix { index, pivot } => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            mvn_logpdf(&DVector::zeros(3), &DVector::zeros(2), &DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn density_integrates_to_one_on_grid() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let mean = DVector::from_vec(vec![0.5, -0.3]);
        let (lo, hi, n) = (-9.0, 9.0, 600);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = DVector::from_vec(vec![
                    lo + (i as f64 + 0.5) * h,
                    lo + (j as f64 + 0.5) * h,
                ]);
                total += mvn_logpdf(&x, &mean, &cov).unwrap().exp();
            }
        }
        total *= h * h;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
