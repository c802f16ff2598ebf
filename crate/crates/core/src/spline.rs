//! Clamped cubic spline (zero end slopes) for C² trajectory generation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivative at each knot.
    curvature: Vec<f64>,
}

impl CubicSpline {
    /// Builds a spline through `(knots[i], values[i])` with zero first
    /// derivative at both ends.
    pub fn clamped(knots: &[f64], values: &[f64]) -> Result<CubicSpline> {
        let n = knots.len();
        if n != values.len() {
            return Err(Error::LengthMismatch { left: n, right: values.len() });
        }
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("spline knots must be strictly increasing".into()));
        }

        // Tridiagonal system for the knot second derivatives.
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];

        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * ((values[1] - values[0]) / h[0]);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = -6.0 * ((values[n - 1] - values[n - 2]) / h[n - 2]);

        // Thomas algorithm.
        for i in 1..n {
            let m = sub[i] / diag[i - 1];
            diag[i] -= m * sup[i - 1];
            rhs[i] -= m * rhs[i - 1];
        }
        let mut curvature = vec![0.0; n];
        curvature[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            curvature[i] = (rhs[i] - sup[i] * curvature[i + 1]) / diag[i];
        }

        Ok(CubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            curvature,
        })
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Value, first and second derivative at `t`; held constant outside the knot range.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        if t <= self.knots[0] {
            return (self.values[0], 0.0, 0.0);
        }
        if t >= self.knots[n - 1] {
            return (self.values[n - 1], 0.0, 0.0);
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let accel = a * m0 + b * m1;
        (value, slope, accel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_with_clamped_ends() {
        let t = [0.0, 1.0, 2.5, 3.0, 5.0];
        let y = [0.0, 2.0, -1.0, 0.5, 4.0];
        let s = CubicSpline::clamped(&t, &y).unwrap();
        for (ti, yi) in t.iter().zip(y) {
            assert!((s.eval(*ti).0 - yi).abs() < 1e-12);
        }
        assert!(s.eval(0.0 + 1e-12).1.abs() < 1e-9);
        assert!(s.eval(5.0 - 1e-12).1.abs() < 1e-9);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t: Vec<f64> = (0..12).map(|k| k as f64 * 0.7).collect();
        let y: Vec<f64> = t.iter().map(|x| libm::sin(*x)).collect();
        let s = CubicSpline::clamped(&t, &y).unwrap();
        let h = 1e-5;
        for k in 1..70 {
            let x = 0.1 + k as f64 * 0.1;
            let (_, d1, d2) = s.eval(x);
            let fd1 = (s.eval(x + h).0 - s.eval(x - h).0) / (2.0 * h);
            let fd2 = (s.eval(x + h).1 - s.eval(x - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6);
            assert!((d2 - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::clamped(&[0.0], &[1.0]).is_err());
        assert!(CubicSpline::clamped(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }
}
