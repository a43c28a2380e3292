use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex-valued function sampled on a uniform grid over `[0, interval_length]`,
/// including both endpoints. Values between nodes are taken piecewise-linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub interval_length: f64,
    pub values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn new(interval_length: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(interval_length > 0.0) || !interval_length.is_finite() {
            return Err(Error::InvalidInput(format!(
                "interval length must be positive and finite, got {interval_length}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("grid values"));
        }
        Ok(Self {
            interval_length,
            values,
        })
    }

    /// Constant-zero grid with `n + 1` nodes.
    pub fn zeros(interval_length: f64, n: usize) -> Self {
        Self::new(interval_length, vec![Complex64::ZERO; n.max(1) + 1]).unwrap()
    }

    /// Sample a function at `n + 1` uniform nodes.
    pub fn from_fn(interval_length: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let n = n.max(1);
        let h = interval_length / n as f64;
        let values = (0..=n).map(|k| f(k as f64 * h)).collect();
        Self::new(interval_length, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.interval_length / (self.values.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }

    /// Piecewise-linear interpolation; clamps to the interval.
    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.values.len() - 1;
        let s = (x / self.interval_length).clamp(0.0, 1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let frac = s - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    /// Resample onto `n + 1` uniform nodes by linear interpolation.
    pub fn resample(&self, n: usize) -> Self {
        Self::from_fn(self.interval_length, n, |x| self.eval(x)).unwrap()
    }

    /// Trapezoidal integral over the interval (exact for piecewise-linear data).
    pub fn integral(&self) -> Complex64 {
        let h = self.spacing();
        let n = self.values.len() - 1;
        let mut sum = (self.values[0] + self.values[n]) * 0.5;
        for v in &self.values[1..n] {
            sum += v;
        }
        sum * h
    }

    /// L^2 norm, with the integrand treated piecewise-linear
    /// (exact segment integrals of |linear|^2).
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing();
        let mut sum = 0.0;
        for w in self.values.windows(2) {
            let (u, v) = (w[0], w[1]);
            // int_0^1 |u (1-s) + v s|^2 ds = (|u|^2 + Re(conj(u) v) + |v|^2) / 3
            sum += (u.norm_sqr() + (u.conj() * v).re + v.norm_sqr()) / 3.0 * h;
        }
        sum.sqrt()
    }

    /// L^2 distance to another grid on the same interval.
    pub fn l2_distance(&self, other: &ComplexGrid) -> f64 {
        let n = self.len().max(other.len()) - 1;
        let a = self.resample(n);
        let b = other.resample(n);
        let diff = ComplexGrid::new(
            self.interval_length,
            a.values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| x - y)
                .collect(),
        )
        .unwrap();
        diff.l2_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_grids() {
        assert!(ComplexGrid::new(1.0, vec![Complex64::ZERO]).is_err());
        assert!(ComplexGrid::new(0.0, vec![Complex64::ZERO; 3]).is_err());
        assert!(ComplexGrid::new(1.0, vec![Complex64::new(f64::NAN, 0.0); 3]).is_err());
    }

    #[test]
    fn linear_interpolation_is_exact_on_linear_data() {
        let g = ComplexGrid::from_fn(2.0, 8, |x| Complex64::new(3.0 * x + 1.0, -x)).unwrap();
        for &x in &[0.0, 0.31, 1.57, 2.0] {
            let v = g.eval(x);
            assert!((v - Complex64::new(3.0 * x + 1.0, -x)).norm() < 1e-12);
        }
    }

    #[test]
    fn integral_matches_closed_form() {
        let g = ComplexGrid::from_fn(1.0, 1000, |x| Complex64::new(x * x, 0.0)).unwrap();
        assert!((g.integral().re - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn l2_norm_of_constant() {
        let g = ComplexGrid::from_fn(2.0, 4, |_| Complex64::new(0.0, 3.0)).unwrap();
        assert!((g.l2_norm() - 3.0 * 2.0_f64.sqrt()).abs() < 1e-12);
    }
}
