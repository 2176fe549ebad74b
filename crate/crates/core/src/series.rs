use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniformly sampled complex time series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<Complex64>) -> Self {
        Self { t0, dt, values }
    }

    pub fn sample<F: Fn(f64) -> Complex64>(f: F, t0: f64, dt: f64, len: usize) -> Self {
        let values = (0..len).map(|k| f(t0 + k as f64 * dt)).collect();
        Self { t0, dt, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Linear interpolation; `None` outside `[t0, end]`.
    pub fn interp(&self, t: f64) -> Option<Complex64> {
        if self.is_empty() {
            return None;
        }
        let x = (t - self.t0) / self.dt;
        let last = (self.len() - 1) as f64;
        let slack = 1e-9;
        if x < -slack || x > last + slack {
            return None;
        }
        let x = x.clamp(0.0, last);
        let k = (x.floor() as usize).min(self.len().saturating_sub(2));
        if self.len() == 1 {
            return Some(self.values[0]);
        }
        let frac = x - k as f64;
        Some(self.values[k] * (1.0 - frac) + self.values[k + 1] * frac)
    }

    pub fn interp_checked(&self, t: f64) -> Result<Complex64> {
        self.interp(t).ok_or(Error::OutOfRange {
            t,
            start: self.t0,
            end: self.end(),
        })
    }

    pub fn interp_or_zero(&self, t: f64) -> Complex64 {
        self.interp(t).unwrap_or_default()
    }

    pub fn shifted(mut self, delay: f64) -> Self {
        self.t0 += delay;
        self
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    /// `∫ |x(t)|² dt` by the trapezoid rule.
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        crate::quad::trapezoid_samples(&sq, self.dt)
    }

    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.abs().max(1.0)
            && (self.dt - other.dt).abs() <= 1e-15 * self.dt.abs()
    }
}

/// Relative L2 distance `‖a − b‖ / ‖b‖` over paired samples.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
