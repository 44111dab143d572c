//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Behaviour outside the sampled interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Hold the end value.
    Clamp,
    /// Continue the end secant.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
    extrapolation: Extrapolation,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>, extrapolation: Extrapolation) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "sample grid has {} times but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidInput("no samples".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
        }

        let n = x.len();
        let mut slopes = vec![0.0; n];
        if n > 1 {
            let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
            slopes[0] = secants[0];
            slopes[n - 1] = secants[n - 2];
            for i in 1..n - 1 {
                let (a, b) = (secants[i - 1], secants[i]);
                slopes[i] = if a * b <= 0.0 {
                    0.0
                } else {
                    // Weighted harmonic mean keeps each cubic monotone.
                    let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    (w1 + w2) / (w1 / a + w2 / b)
                };
            }
            // Endpoint slopes may not overshoot the adjacent secant.
            for (i, s) in [(0, secants[0]), (n - 1, secants[n - 2])] {
                if slopes[i] * s <= 0.0 {
                    slopes[i] = 0.0;
                } else if slopes[i].abs() > 3.0 * s.abs() {
                    slopes[i] = 3.0 * s;
                }
            }
        }
        Ok(Self { x, y, slopes, extrapolation })
    }

    pub fn times(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        if t <= self.x[0] || t >= self.x[n - 1] {
            let (i, j) = if t <= self.x[0] { (0, 1) } else { (n - 1, n - 2) };
            return match self.extrapolation {
                Extrapolation::Clamp => self.y[i],
                Extrapolation::Linear => {
                    let s = (self.y[j] - self.y[i]) / (self.x[j] - self.x[i]);
                    self.y[i] + s * (t - self.x[i])
                }
            };
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.slopes[i] + h01 * self.y[i + 1] + h11 * h * self.slopes[i + 1]
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.x.clone(), self.y.iter().map(|&v| f(v)).collect(), self.extrapolation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_knots_and_rejects_bad_grids() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 0.0], Extrapolation::Clamp).unwrap();
        assert_eq!(c.eval(1.0), 2.0);
        assert_eq!(c.eval(-5.0), 1.0);
        assert_eq!(c.eval(9.0), 0.0);
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0], Extrapolation::Clamp).is_err());
        assert!(MonotoneCubic::new(vec![1.0, 0.0], vec![1.0, 2.0], Extrapolation::Clamp).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0, 2.0], Extrapolation::Clamp).is_err());
    }

    #[test]
    fn linear_extrapolation_continues_end_secant() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0], Extrapolation::Linear).unwrap();
        assert!((c.eval(3.0) - 5.0).abs() < 1e-12);
        assert!((c.eval(-1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_function_converges() {
        let err = |n: usize| {
            let x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64 * 3.0).collect();
            let y = x.iter().map(|v| v.sin()).collect();
            let c = MonotoneCubic::new(x, y, Extrapolation::Clamp).unwrap();
            (0..1000).map(|i| i as f64 * 0.003).map(|t| (c.eval(t) - t.sin()).abs()).fold(0.0, f64::max)
        };
        assert!(err(400) < 1e-5);
        assert!(err(800) < err(400) / 3.0);
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec(0.0..2.0_f64, 2..12)) {
            let x: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
            let y: Vec<f64> = steps.iter().scan(0.0, |acc, s| { *acc += s; Some(*acc) }).collect();
            let c = MonotoneCubic::new(x, y, Extrapolation::Clamp).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=200 {
                let v = c.eval(i as f64 / 200.0 * (steps.len() - 1) as f64);
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
