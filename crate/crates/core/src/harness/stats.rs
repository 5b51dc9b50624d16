use crate::error::{Error, Result};

/// Sorted copy of a non-empty sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("empirical CDF of an empty sample".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("empirical CDF of a sample containing NaN".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    /// Fraction of the sample at or below `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }

    /// Quantile at `p ∈ [0, 1]`, interpolating linearly between order
    /// statistics at positions `p (n - 1)`.
    pub fn percentile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let pos = p * (self.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo])
    }

    /// `(x, F(x))` at each grid value.
    pub fn at(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().map(|&x| (x, self.eval(x))).collect()
    }

    /// `(x, F(x))` on `n` evenly spaced points from the minimum to the maximum.
    pub fn points(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.min(), self.max());
        if n < 2 || hi == lo {
            return vec![(hi, 1.0)];
        }
        let grid: Vec<f64> = (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect();
        self.at(&grid)
    }
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    Ok(EmpiricalCdf::new(values)?.percentile(p))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
