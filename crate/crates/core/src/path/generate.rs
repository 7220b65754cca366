//! Test-path generators.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Grid, SampledPath};
use crate::error::{Error, Result};
use crate::rng::{ChaChaGaussian, GaussianSource, GENERATOR_NAME};

fn checked_grid(intervals: usize, horizon: f64) -> Result<Grid> {
    if intervals < 2 {
        return Err(Error::param(format!(
            "grid needs at least 2 intervals, got {intervals}"
        )));
    }
    Grid::new(intervals, horizon)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    Ok(())
}

/// Standard Brownian motion from ChaCha20 normals, `ω(0) = 0`.
pub fn generate_brownian(dim: usize, horizon: f64, intervals: usize, seed: u64) -> Result<SampledPath> {
    let mut source = ChaChaGaussian::new(seed);
    let mut path = generate_brownian_with(&mut source, dim, horizon, intervals)?;
    path.seed = Some(seed);
    path.label = format!("brownian(seed={seed},rng={GENERATOR_NAME})");
    Ok(path)
}

/// Brownian motion driven by an arbitrary Gaussian source.
pub fn generate_brownian_with(
    source: &mut dyn GaussianSource,
    dim: usize,
    horizon: f64,
    intervals: usize,
) -> Result<SampledPath> {
    check_dim(dim)?;
    let grid = checked_grid(intervals, horizon)?;
    let scale = grid.dt().sqrt();
    let mut values = vec![0.0; grid.len() * dim];
    let mut z = vec![0.0; intervals];
    for i in 0..dim {
        source.fill_standard_normal(i, &mut z);
        let mut acc = 0.0;
        for (k, dz) in z.iter().enumerate() {
            acc += scale * dz;
            values[(k + 1) * dim + i] = acc;
        }
    }
    SampledPath::new(grid, dim, values, "brownian", None)
}

/// Brownian motion with instantaneous correlation matrix `corr` (row-major `dim x dim`).
pub fn generate_brownian_correlated(
    dim: usize,
    horizon: f64,
    intervals: usize,
    seed: u64,
    corr: &[f64],
) -> Result<SampledPath> {
    if corr.len() != dim * dim {
        return Err(Error::param(format!(
            "correlation matrix needs {} entries, got {}",
            dim * dim,
            corr.len()
        )));
    }
    let chol = DMatrix::from_row_slice(dim, dim, corr)
        .cholesky()
        .ok_or_else(|| Error::param("correlation matrix is not positive definite"))?;
    let lower = chol.l();
    let independent = generate_brownian(dim, horizon, intervals, seed)?;
    let mut values = vec![0.0; independent.values.len()];
    for k in 0..independent.grid_size() {
        let row = independent.row(k);
        for i in 0..dim {
            values[k * dim + i] = (0..=i).map(|j| lower[(i, j)] * row[j]).sum();
        }
    }
    SampledPath::new(
        independent.grid,
        dim,
        values,
        format!("brownian(seed={seed},rng={GENERATOR_NAME},correlated)"),
        Some(seed),
    )
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub(crate) fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Fractional Brownian motion by circulant embedding of the increment covariance.
///
/// Embedding eigenvalues that come out negative beyond rounding are clipped
/// to zero and the label gains a `clipped` marker.
pub fn generate_fbm(dim: usize, hurst: f64, horizon: f64, intervals: usize, seed: u64) -> Result<SampledPath> {
    let mut source = ChaChaGaussian::new(seed);
    let mut path = generate_fbm_with(&mut source, dim, hurst, horizon, intervals)?;
    path.seed = Some(seed);
    path.label = path
        .label
        .replacen("fbm(", &format!("fbm(seed={seed},rng={GENERATOR_NAME},"), 1);
    Ok(path)
}

pub fn generate_fbm_with(
    source: &mut dyn GaussianSource,
    dim: usize,
    hurst: f64,
    horizon: f64,
    intervals: usize,
) -> Result<SampledPath> {
    check_dim(dim)?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param(format!("Hurst index must lie in (0,1), got {hurst}")));
    }
    if !intervals.is_power_of_two() {
        return Err(Error::param(format!(
            "fBm synthesis needs a power-of-two grid, got {intervals}"
        )));
    }
    let grid = checked_grid(intervals, horizon)?;
    let m = intervals;
    let size = 2 * m;

    // first row of the circulant embedding
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let lag = if j <= m { j } else { size - j };
            Complex::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);

    let max_eig = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut clipped = false;
    let amplitude: Vec<f64> = row
        .iter()
        .map(|c| {
            let lambda = c.re;
            if lambda < -1e-10 * max_eig {
                clipped = true;
            }
            (lambda.max(0.0) / size as f64).sqrt()
        })
        .collect();

    let scale = grid.dt().powf(hurst);
    let mut values = vec![0.0; grid.len() * dim];
    let mut z = vec![0.0; 2 * size];
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for i in 0..dim {
        source.fill_standard_normal(i, &mut z);
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(z[2 * j], z[2 * j + 1]) * amplitude[j];
        }
        fft.process(&mut buf);
        let mut acc = 0.0;
        for k in 0..m {
            acc += scale * buf[k].re;
            values[(k + 1) * dim + i] = acc;
        }
    }
    let label = if clipped {
        format!("fbm(hurst={hurst},clipped)")
    } else {
        format!("fbm(hurst={hurst})")
    };
    SampledPath::new(grid, dim, values, label, None)
}

/// Constant path at `level` in every coordinate.
pub fn generate_constant(dim: usize, horizon: f64, intervals: usize, level: f64) -> Result<SampledPath> {
    check_dim(dim)?;
    let grid = checked_grid(intervals, horizon)?;
    SampledPath::new(
        grid,
        dim,
        vec![level; grid.len() * dim],
        format!("constant({level})"),
        None,
    )
}

/// One term of a smooth path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SmoothTerm {
    /// `amplitude * sin(2π frequency t + phase)`
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Σ_j coefficients[j] t^j`
    Poly { coefficients: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl SmoothTerm {
    fn value(&self, t: f64) -> f64 {
        match self {
            SmoothTerm::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t + phase).sin(),
            SmoothTerm::Poly { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }
}

/// A finite sum of smooth terms, applied to every coordinate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub terms: Vec<SmoothTerm>,
}

impl SmoothSpec {
    pub fn linear(slope: f64) -> Self {
        Self {
            terms: vec![SmoothTerm::Poly {
                coefficients: vec![0.0, slope],
            }],
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            terms: vec![SmoothTerm::Sine {
                amplitude,
                frequency,
                phase: 0.0,
            }],
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.value(t)).sum()
    }
}

pub fn generate_smooth(dim: usize, horizon: f64, intervals: usize, spec: &SmoothSpec) -> Result<SampledPath> {
    check_dim(dim)?;
    let grid = checked_grid(intervals, horizon)?;
    let mut values = Vec::with_capacity(grid.len() * dim);
    for k in 0..grid.len() {
        let v = spec.value(grid.time(k));
        values.extend(std::iter::repeat_n(v, dim));
    }
    SampledPath::new(grid, dim, values, "smooth", None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ZeroGaussian;

    #[test]
    fn zero_draws_give_zero_paths() {
        let b = generate_brownian_with(&mut ZeroGaussian, 1, 1.0, 4).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
        let f = generate_fbm_with(&mut ZeroGaussian, 2, 0.3, 1.0, 8).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn brownian_is_bit_reproducible() {
        let a = generate_brownian(2, 1.0, 1024, 9).unwrap();
        let b = generate_brownian(2, 1.0, 1024, 9).unwrap();
        let bytes = |p: &SampledPath| -> Vec<u8> { p.values().iter().flat_map(|v| v.to_le_bytes()).collect() };
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a.row(0), &[0.0, 0.0]);
        assert_ne!(a.values(), generate_brownian(2, 1.0, 1024, 10).unwrap().values());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(generate_brownian(1, 1.0, 1, 0).is_err());
        assert!(generate_brownian(1, 0.0, 8, 0).is_err());
        assert!(generate_fbm(1, 1.0, 1.0, 8, 0).is_err());
        assert!(generate_fbm(1, 0.5, 1.0, 12, 0).is_err());
        assert!(generate_brownian_correlated(2, 1.0, 8, 0, &[1.0, 2.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn half_hurst_covariance_is_white() {
        for k in 1..50 {
            assert_eq!(fgn_autocovariance(0.5, k), 0.0);
        }
        assert_eq!(fgn_autocovariance(0.5, 0), 1.0);
    }

    #[test]
    fn fbm_embedding_is_not_clipped_for_moderate_hurst() {
        for h in [0.2, 0.4, 0.5, 0.7, 0.9] {
            let p = generate_fbm(1, h, 1.0, 256, 1).unwrap();
            assert!(!p.label().contains("clipped"), "{}", p.label());
            assert!(p.label().contains("seed=1"));
        }
    }

    #[test]
    fn fbm_increment_variance_matches_scaling() {
        // Var(B_H(t+dt) - B_H(t)) = dt^{2H}; averaged over the sample
        let m = 1 << 14;
        let h = 0.3;
        let p = generate_fbm(1, h, 1.0, m, 3).unwrap();
        let dt = 1.0 / m as f64;
        let mean_sq: f64 = (0..m).map(|k| (p.coord(k + 1, 0) - p.coord(k, 0)).powi(2)).sum::<f64>() / m as f64;
        let ratio = mean_sq / dt.powf(2.0 * h);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn correlated_brownian_has_target_covariation() {
        let rho = -0.6;
        let p = generate_brownian_correlated(2, 1.0, 1 << 16, 5, &[1.0, rho, rho, 1.0]).unwrap();
        let mut cross = 0.0;
        for k in 0..p.intervals() {
            cross += (p.coord(k + 1, 0) - p.coord(k, 0)) * (p.coord(k + 1, 1) - p.coord(k, 1));
        }
        assert!((cross - rho).abs() < 0.03, "cross {cross}");
    }

    #[test]
    fn constant_and_smooth_paths() {
        let c = generate_constant(1, 1.0, 8, 3.0).unwrap();
        assert!(c.values().iter().all(|&v| v == 3.0));
        let l = generate_smooth(1, 1.0, 8, &SmoothSpec::linear(1.0)).unwrap();
        for k in 0..=8 {
            assert_eq!(l.coord(k, 0), l.time(k));
        }
    }
}
