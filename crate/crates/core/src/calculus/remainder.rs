use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Functional, Prepared};
use crate::numeric::fit_log_log;
use crate::path::SampledPath;
use crate::rng::ChaChaGaussian;

/// Remainders at or below this size are treated as zero.
pub const REMAINDER_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderSample {
    pub t: f64,
    pub s: f64,
    /// Absolute remainder.
    pub value: f64,
    /// `s − t`
    pub scale: f64,
}

/// Log-log slope of the per-scale maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    /// `None` when degenerate or with fewer than 3 usable scales.
    pub exponent: Option<f64>,
    pub r_squared: Option<f64>,
    /// Every per-scale maximum is below [`REMAINDER_FLOOR`]; the exponent is `+∞`.
    pub degenerate: bool,
    pub scales: Vec<f64>,
    pub maxima: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ExponentFit {
    /// Fitted exponent with the degenerate case mapped to `+∞`.
    pub fn value(&self) -> Option<f64> {
        if self.degenerate {
            Some(f64::INFINITY)
        } else {
            self.exponent
        }
    }
}

/// `count` pairs `(t_k, t_{k+L})` per lag with `k` uniform on the grid.
fn sample_pairs(m: usize, lags: &[usize], count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if count < 16 {
        return Err(Error::param(format!("need at least 16 samples per scale, got {count}")));
    }
    let mut pairs = Vec::with_capacity(lags.len() * count);
    for &lag in lags {
        if lag == 0 || lag > m {
            return Err(Error::param(format!("lag {lag} outside 1..={m}")));
        }
        let mut rng = ChaChaGaussian::stream(seed, lag as u64);
        pairs.extend((0..count).map(|_| {
            let k = rng.random_range(0..=m - lag);
            (k, k + lag)
        }));
    }
    Ok(pairs)
}

fn collect(
    path: &SampledPath,
    pairs: Vec<(usize, usize)>,
    mut value: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<Vec<RemainderSample>> {
    pairs
        .into_iter()
        .map(|(k, l)| {
            Ok(RemainderSample {
                t: path.time(k),
                s: path.time(l),
                value: value(k, l)?.abs(),
                scale: path.time(l) - path.time(k),
            })
        })
        .collect()
}

fn delta(path: &SampledPath, k: usize, l: usize) -> Vec<f64> {
    path.row(l).iter().zip(path.row(k)).map(|(y, x)| y - x).collect()
}

/// `R^F_{t,s} = F(s, ω_s) − F(t, ω_t) − ∇F(t, ω_t)·(ω(s) − ω(t))` at
/// sampled pairs; `lags` are in grid steps.
pub fn remainder_samples(
    f: &Functional,
    path: &SampledPath,
    lags: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<RemainderSample>> {
    f.jet_capability(1)?;
    let prepared = f.prepare(path)?;
    let pairs = sample_pairs(path.intervals(), lags, count, seed)?;
    collect(path, pairs, |k, l| {
        let jet = prepared.jet(k, 1)?;
        let d = delta(path, k, l);
        let linear: f64 = jet.grad.iter().zip(&d).map(|(g, x)| g * x).sum();
        Ok(prepared.value(l) - jet.value - linear)
    })
}

/// Left sums of `𝒟F(t_j, ω_{t_j}) dt` on the grid.
fn horizontal_prefix(prepared: &Prepared, path: &SampledPath) -> Result<Vec<f64>> {
    let dt = path.grid().dt();
    let mut out = Vec::with_capacity(path.grid_size());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..path.intervals() {
        acc += prepared.jet(k, 0)?.horizontal * dt;
        out.push(acc);
    }
    Ok(out)
}

/// Residual of the second-order expansion
/// `F(s) − F(t) − ∇F·δω − ∫_t^s 𝒟F du − ½⟨∇²F, δω δωᵀ⟩` at sampled pairs.
pub fn expansion_samples(
    f: &Functional,
    path: &SampledPath,
    lags: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<RemainderSample>> {
    f.jet_capability(3)?;
    let prepared = f.prepare(path)?;
    let horizontal = horizontal_prefix(&prepared, path)?;
    let dim = path.dim();
    let pairs = sample_pairs(path.intervals(), lags, count, seed)?;
    collect(path, pairs, |k, l| {
        let jet = prepared.jet(k, 2)?;
        let d = delta(path, k, l);
        let linear: f64 = jet.grad.iter().zip(&d).map(|(g, x)| g * x).sum();
        let mut quad = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                quad += jet.hess[i * dim + j] * d[i] * d[j];
            }
        }
        Ok(prepared.value(l) - jet.value - linear - (horizontal[l] - horizontal[k]) - 0.5 * quad)
    })
}

/// Slope of `log max|R|` per scale against `log scale`.
pub fn remainder_exponent_fit(samples: &[RemainderSample]) -> ExponentFit {
    let mut scales: Vec<f64> = samples.iter().map(|s| s.scale).collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let maxima: Vec<f64> = scales
        .iter()
        .map(|&h| {
            samples
                .iter()
                .filter(|s| s.scale == h)
                .map(|s| s.value)
                .fold(0.0, f64::max)
        })
        .collect();
    let usable: Vec<(f64, f64)> = scales
        .iter()
        .zip(&maxima)
        .filter(|(_, m)| **m > REMAINDER_FLOOR)
        .map(|(h, m)| (*h, *m))
        .collect();
    let mut fit = ExponentFit {
        exponent: None,
        r_squared: None,
        degenerate: false,
        scales,
        maxima,
        reason: None,
    };
    if usable.is_empty() {
        fit.degenerate = true;
        fit.reason = Some(format!("all remainders below {REMAINDER_FLOOR:e}"));
    } else if usable.len() < 3 {
        fit.reason = Some(format!("{} scales above the floor, need 3", usable.len()));
    } else {
        let (xs, ys): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
        if let Some(line) = fit_log_log(&xs, &ys) {
            fit.exponent = Some(line.slope);
            fit.r_squared = Some(line.r_squared);
        }
    }
    fit
}

/// Fitted exponent of the expansion residual.
pub fn expansion_residual(
    f: &Functional,
    path: &SampledPath,
    lags: &[usize],
    count: usize,
    seed: u64,
) -> Result<ExponentFit> {
    Ok(remainder_exponent_fit(&expansion_samples(f, path, lags, count, seed)?))
}
