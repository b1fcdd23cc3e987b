//! Natural cubic spline bases with two internal knots at the quartiles.
//!
//! The basis is the B-spline construction used by R's `ns()`: cubic B-splines on
//! `(a,a,a,a,q1,q3,b,b,b,b)`, first column dropped, projected onto the null space of
//! the second-derivative constraints at both boundaries. Beyond the boundaries each
//! function continues linearly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasisSpec {
    pub boundary: (f64, f64),
    pub internal: (f64, f64),
    knots: [f64; 10],
    /// Maps the five retained B-splines onto the three natural-spline functions.
    projection: [[f64; 3]; 5],
    value_lo: [f64; 3],
    slope_lo: [f64; 3],
    value_hi: [f64; 3],
    slope_hi: [f64; 3],
}

pub const BASIS_DIM: usize = 3;

/// Knots from the covariate values: boundary at (min, max), internal at the quartiles.
pub fn make_basis_spec(values: &[f64]) -> Result<SplineBasisSpec> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("spline covariate contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InvalidData(format!(
            "need at least 4 distinct values to place spline knots, got {}",
            distinct.len()
        )));
    }
    let (a, b) = (sorted[0], sorted[sorted.len() - 1]);
    let q1 = quantile_type7(&sorted, 0.25);
    let q3 = quantile_type7(&sorted, 0.75);
    SplineBasisSpec::new(a, b, q1, q3)
}

impl SplineBasisSpec {
    /// Build from explicit knots. Coincident or boundary-touching internal knots are
    /// nudged apart by 1e-6 of the range.
    pub fn new(lower: f64, upper: f64, q1: f64, q3: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidData(format!(
                "spline boundary knots must satisfy min < max, got ({lower}, {upper})"
            )));
        }
        let eps = 1e-6 * (upper - lower);
        let (mut q1, mut q3) = (q1.clamp(lower, upper), q3.clamp(lower, upper));
        if q3 - q1 < eps {
            log::warn!("internal knots coincide at {q1}; nudging apart");
            let mid = 0.5 * (q1 + q3);
            q1 = mid - 0.5 * eps;
            q3 = mid + 0.5 * eps;
        }
        if q1 - lower < eps {
            log::debug!("internal knot {q1} touches the lower boundary; nudging");
            q1 = lower + eps;
            q3 = q3.max(q1 + eps);
        }
        if upper - q3 < eps {
            log::debug!("internal knot {q3} touches the upper boundary; nudging");
            q3 = upper - eps;
            q1 = q1.min(q3 - eps);
        }
        let knots = [lower, lower, lower, lower, q1, q3, upper, upper, upper, upper];

        // second-derivative constraints at both boundaries on B-splines 2..6
        let c = DMatrix::from_fn(5, 2, |i, j| {
            let x = if j == 0 { lower } else { upper };
            bspline(&knots, x, 3, 2)[i + 1]
        });
        let qr = c.qr();
        let mut q_t = DMatrix::<f64>::identity(5, 5);
        qr.q_tr_mul(&mut q_t);
        let q = q_t.transpose();
        let mut projection = [[0.0; 3]; 5];
        for (i, row) in projection.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = q[(i, j + 2)];
            }
        }
        let mut spec = Self {
            boundary: (lower, upper),
            internal: (q1, q3),
            knots,
            projection,
            value_lo: [0.0; 3],
            slope_lo: [0.0; 3],
            value_hi: [0.0; 3],
            slope_hi: [0.0; 3],
        };
        spec.value_lo = spec.project(&bspline(&knots, lower, 3, 0));
        spec.slope_lo = spec.project(&bspline(&knots, lower, 3, 1));
        spec.value_hi = spec.project(&bspline(&knots, upper, 3, 0));
        spec.slope_hi = spec.project(&bspline(&knots, upper, 3, 1));
        Ok(spec)
    }

    fn project(&self, b: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, row) in self.projection.iter().enumerate() {
            for j in 0..3 {
                out[j] += b[i + 1] * row[j];
            }
        }
        out
    }

    /// The three basis values at `x`; linear beyond the boundary knots.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let (a, b) = self.boundary;
        if x < a {
            std::array::from_fn(|j| self.value_lo[j] + self.slope_lo[j] * (x - a))
        } else if x > b {
            std::array::from_fn(|j| self.value_hi[j] + self.slope_hi[j] * (x - b))
        } else {
            self.project(&bspline(&self.knots, x, 3, 0))
        }
    }

    /// Rows of basis values for a batch of points.
    pub fn design(&self, xs: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(xs.len(), 3);
        for (i, &x) in xs.iter().enumerate() {
            let v = self.eval(x);
            for j in 0..3 {
                m[(i, j)] = v[j];
            }
        }
        m
    }
}

pub fn eval_basis(x: f64, spec: &SplineBasisSpec) -> [f64; 3] {
    spec.eval(x)
}

/// All B-spline values (or `deriv`-th derivatives) of the given degree at `x`.
fn bspline(knots: &[f64], x: f64, degree: usize, deriv: usize) -> Vec<f64> {
    let m = knots.len();
    let nb = m - degree - 1;
    if deriv > 0 {
        let lower = bspline(knots, x, degree - 1, deriv - 1);
        let k = degree as f64;
        return (0..nb)
            .map(|i| {
                let left = knots[i + degree] - knots[i];
                let right = knots[i + degree + 1] - knots[i + 1];
                let mut v = 0.0;
                if left > 0.0 {
                    v += k * lower[i] / left;
                }
                if right > 0.0 {
                    v -= k * lower[i + 1] / right;
                }
                v
            })
            .collect();
    }
    // degree-0 indicator of the knot span containing x (last non-empty span at the end)
    let mut span = None;
    for i in 0..m - 1 {
        if knots[i] < knots[i + 1] && knots[i] <= x {
            span = Some(i);
        }
    }
    let mut n = vec![0.0; m - 1];
    if let Some(s) = span {
        n[s] = 1.0;
    }
    for d in 1..=degree {
        for i in 0..m - 1 - d {
            let left = knots[i + d] - knots[i];
            let right = knots[i + d + 1] - knots[i + 1];
            let mut v = 0.0;
            if left > 0.0 {
                v += (x - knots[i]) / left * n[i];
            }
            if right > 0.0 {
                v += (knots[i + d + 1] - x) / right * n[i + 1];
            }
            n[i] = v;
        }
    }
    n.truncate(nb);
    n
}

/// Least-squares residual norm of regressing `target` on the columns of `basis`.
pub fn projection_residual(basis: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let svd = basis.clone().svd(true, true);
    let coef = svd.solve(target, 1e-12).expect("svd with both factors");
    (basis * coef - target).norm()
}
