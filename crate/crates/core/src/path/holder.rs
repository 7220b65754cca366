//! Empirical Hölder exponent from dyadic increment maxima.

use serde::{Deserialize, Serialize};

use super::SampledPath;
use crate::error::{Error, Result};
use crate::numeric::fit_log_log;

/// Dyadic lags `2^min_log2_lag ..= 2^max_log2_lag`, in grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub min_log2_lag: u32,
    pub max_log2_lag: u32,
}

impl Default for ScaleRange {
    fn default() -> Self {
        Self {
            min_log2_lag: 2,
            max_log2_lag: 12,
        }
    }
}

impl ScaleRange {
    pub fn new(min_log2_lag: u32, max_log2_lag: u32) -> Self {
        Self {
            min_log2_lag,
            max_log2_lag,
        }
    }

    /// Lags in grid steps, coarsest first.
    pub fn lags(&self) -> Vec<usize> {
        (self.min_log2_lag..=self.max_log2_lag)
            .rev()
            .map(|j| 1usize << j)
            .collect()
    }

    /// Validate against a grid of `intervals` steps; at least `min_scales` lags.
    pub fn validate(&self, intervals: usize, min_scales: usize) -> Result<()> {
        if self.max_log2_lag < self.min_log2_lag {
            return Err(Error::param("scale range is empty"));
        }
        let count = (self.max_log2_lag - self.min_log2_lag + 1) as usize;
        if count < min_scales {
            return Err(Error::param(format!(
                "need at least {min_scales} dyadic scales, got {count}"
            )));
        }
        if self.max_log2_lag >= usize::BITS || (1usize << self.max_log2_lag) >= intervals {
            return Err(Error::param(format!(
                "largest lag 2^{} does not fit a grid of {intervals} steps",
                self.max_log2_lag
            )));
        }
        Ok(())
    }
}

/// Point estimate of the Hölder exponent and seminorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// Fitted slope clamped into `(0, 1]`.
    pub exponent: f64,
    /// Unclamped least-squares slope.
    pub raw_slope: f64,
    pub norm_estimate: f64,
    /// Time scales, strictly decreasing.
    pub scales_used: Vec<f64>,
    pub r_squared: f64,
}

/// Slope of `log max_k |ω(t_k + h) - ω(t_k)|` against `log h` over dyadic `h`.
///
/// A constant path reports exponent 1 and norm 0.
pub fn holder_estimate(path: &SampledPath, scales: ScaleRange) -> Result<HolderEstimate> {
    scales.validate(path.intervals(), 4)?;
    let dt = path.grid().dt();
    let mut hs = Vec::new();
    let mut maxima = Vec::new();
    for lag in scales.lags() {
        let max_inc = (0..=path.intervals() - lag)
            .map(|k| path.distance(k + lag, k))
            .fold(0.0, f64::max);
        if max_inc > 0.0 {
            hs.push(lag as f64 * dt);
            maxima.push(max_inc);
        }
    }
    if hs.is_empty() {
        return Ok(HolderEstimate {
            exponent: 1.0,
            raw_slope: 1.0,
            norm_estimate: 0.0,
            scales_used: scales.lags().iter().map(|&l| l as f64 * dt).collect(),
            r_squared: 1.0,
        });
    }
    if hs.len() < 2 {
        return Err(Error::param("too few scales with non-zero increments"));
    }
    let fit = fit_log_log(&hs, &maxima).ok_or_else(|| Error::param("degenerate Hölder fit"))?;
    let exponent = fit.slope.clamp(f64::MIN_POSITIVE, 1.0);
    let norm_estimate = hs
        .iter()
        .zip(&maxima)
        .map(|(h, m)| m / h.powf(exponent))
        .fold(0.0, f64::max);
    Ok(HolderEstimate {
        exponent,
        raw_slope: fit.slope,
        norm_estimate,
        scales_used: hs,
        r_squared: fit.r_squared,
    })
}
