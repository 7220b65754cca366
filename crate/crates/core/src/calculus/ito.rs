use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integral::{riemann_sum, Variant};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::numeric::{mean_stderr, pairwise_sum};
use crate::partition::dyadic_sequence;
use crate::path::{generate_brownian, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoMcOptions {
    pub seeds: Vec<u64>,
    /// Dyadic level of the Riemann sums.
    pub level: usize,
    pub intervals: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoMcResult {
    pub samples: usize,
    pub mean_lhs: f64,
    pub stderr_lhs: f64,
    pub mean_rhs: f64,
    pub stderr_rhs: f64,
    /// `sqrt(se_lhs² + se_rhs²)`
    pub stderr: f64,
}

impl ItoMcResult {
    /// `|mean_lhs − mean_rhs| ≤ k · stderr`.
    pub fn within(&self, k: f64) -> bool {
        (self.mean_lhs - self.mean_rhs).abs() <= k * self.stderr
    }
}

/// Monte Carlo over Brownian paths of `(∫∇F dω)²` against `Σ |∇F(t_i)|² Δt_i`.
pub fn ito_isometry_mc(f: &Functional, opts: &ItoMcOptions) -> Result<ItoMcResult> {
    if opts.seeds.len() < 50 {
        return Err(Error::param(format!(
            "need at least 50 seeds, got {}",
            opts.seeds.len()
        )));
    }
    f.jet_capability(1)?;
    if f.required_dim() > 1 {
        return Err(Error::param(
            "the Monte Carlo check runs on one-dimensional Brownian paths",
        ));
    }
    let grid = Grid::new(opts.intervals, opts.horizon)?;
    let partition = dyadic_sequence(grid, opts.level, opts.level)?
        .finest()
        .partition
        .clone();
    let pairs = opts
        .seeds
        .par_iter()
        .map(|&seed| {
            let w = generate_brownian(1, opts.horizon, opts.intervals, seed)?;
            let (integral, _) = riemann_sum(f, &w, &partition, Variant::AlongPath, false)?;
            let prepared = f.prepare(&w)?;
            let terms = partition
                .cell_bounds()
                .map(|(a, b)| {
                    let g = prepared.jet(a, 1)?.grad;
                    Ok(g.iter().map(|x| x * x).sum::<f64>() * (w.time(b) - w.time(a)))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((integral * integral, pairwise_sum(&terms)))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mean_lhs, stderr_lhs) = mean_stderr(&lhs);
    let (mean_rhs, stderr_rhs) = mean_stderr(&rhs);
    Ok(ItoMcResult {
        samples: lhs.len(),
        mean_lhs,
        stderr_lhs,
        mean_rhs,
        stderr_rhs,
        stderr: stderr_lhs.hypot(stderr_rhs),
    })
}
