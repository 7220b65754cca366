//! Sampled evidence for the regularity assumptions on a functional.
//!
//! Nothing here certifies an assumption. Each estimate is a maximum over a
//! documented, seeded sample and can only falsify or bound from below.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Functional, StoppedState};
use crate::error::Result;
use crate::partition::PartitionSequence;
use crate::path::SampledPath;
use crate::rng::ChaChaGaussian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionOptions {
    /// Perturbed path pairs for the uniform Lipschitz estimate.
    pub lipschitz_samples: usize,
    /// `(t, h)` pairs for the horizontal Lipschitz estimate.
    pub horizontal_samples: usize,
    pub seed: u64,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        Self {
            lipschitz_samples: 256,
            horizontal_samples: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoscillLevel {
    pub n: usize,
    pub foscill_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max |F(t, ω) − F(t, ω')| / ‖ω_t − ω'_t‖∞` over sampled pairs.
    pub lipschitz_k_hat: f64,
    /// `max_i |F(t_{i+1}, ω_{t_{i+1}}) − F(t_i, ω_{t_i})|` per level.
    pub foscill: Vec<FoscillLevel>,
    /// `max |F(t + h, ω_t) − F(t, ω_t)| / h` over sampled frozen extensions.
    pub horiz_lipschitz_c_hat: f64,
    pub samples_used: usize,
}

impl AssumptionReport {
    pub fn foscill_max(&self) -> Vec<f64> {
        self.foscill.iter().map(|l| l.foscill_max).collect()
    }
}

/// Largest `|F(t_{i+1}) − F(t_i)|` over the cells of each level.
pub fn foscill_levels(f: &Functional, path: &SampledPath, seq: &PartitionSequence) -> Result<Vec<FoscillLevel>> {
    let prepared = f.prepare(path)?;
    let values: Vec<f64> = (0..path.grid_size()).map(|k| prepared.value(k)).collect();
    Ok(seq
        .levels()
        .iter()
        .map(|level| FoscillLevel {
            n: level.n,
            foscill_max: level
                .partition
                .cell_bounds()
                .map(|(a, b)| (values[b] - values[a]).abs())
                .fold(0.0, f64::max),
        })
        .collect())
}

/// State of `ω + u` stopped at `k`, together with `‖u_{t_k}‖∞`.
///
/// Even samples shift the whole path by a constant vector; odd samples
/// add an i.i.d. field uniform on `[-1, 1]^d` at every grid point.
fn perturbed_state(f: &Functional, path: &SampledPath, k: usize, sample: usize, seed: u64) -> (StoppedState, f64) {
    let d = path.dim();
    let dt = path.grid().dt();
    let mut rng = ChaChaGaussian::stream(seed, 1 + sample as u64);
    let constant = sample.is_multiple_of(2);
    let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut bump = shift.clone();
    let mut row = vec![0.0; d];
    let mut sums = vec![0.0; f.integrands().len()];
    let mut sup: f64 = 0.0;
    for j in 0..=k {
        if !constant {
            bump.iter_mut().for_each(|b| *b = rng.random_range(-1.0..=1.0));
        }
        for (r, (x, b)) in row.iter_mut().zip(path.row(j).iter().zip(&bump)) {
            *r = x + b;
        }
        sup = sup.max(bump.iter().map(|b| b * b).sum::<f64>().sqrt());
        if j < k {
            for (s, g) in sums.iter_mut().zip(f.integrands()) {
                *s += g.apply(&row);
            }
        }
    }
    let state = StoppedState {
        t: path.time(k),
        x: row,
        integrals: sums.into_iter().map(|s| s * dt).collect(),
    };
    (state, sup)
}

/// Sampled estimates of the uniform Lipschitz constant, the functional
/// increments along each level, and the horizontal Lipschitz constant.
pub fn check_assumptions(
    f: &Functional,
    path: &SampledPath,
    seq: &PartitionSequence,
    opts: &AssumptionOptions,
) -> Result<AssumptionReport> {
    let foscill = foscill_levels(f, path, seq)?;
    let m = path.intervals();
    let mut schedule = ChaChaGaussian::stream(opts.seed, 0);
    let lip_points: Vec<usize> = (0..opts.lipschitz_samples)
        .map(|_| schedule.random_range(0..=m))
        .collect();
    let max_log2 = usize::BITS - 1 - m.leading_zeros();
    let horiz_points: Vec<(usize, usize)> = (0..opts.horizontal_samples)
        .map(|_| {
            let k = schedule.random_range(0..m);
            let lag = 1usize << schedule.random_range(0..=max_log2.min(10));
            (k, lag.min(m - k))
        })
        .collect();

    let prepared = f.prepare(path)?;
    let k_hat = lip_points
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let base = prepared.value(k);
            let (state, dist) = perturbed_state(f, path, k, i, opts.seed);
            if dist > 0.0 {
                (f.value(&state) - base).abs() / dist
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);

    let dt = path.grid().dt();
    let c_hat = horiz_points
        .iter()
        .map(|&(k, lag)| {
            let state = prepared.state(k);
            let h = lag as f64 * dt;
            (f.value(&f.advance(&state, h)) - f.value(&state)).abs() / h
        })
        .fold(0.0, f64::max);

    Ok(AssumptionReport {
        lipschitz_k_hat: k_hat,
        foscill,
        horiz_lipschitz_c_hat: c_hat,
        samples_used: opts.lipschitz_samples + opts.horizontal_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::builtin;
    use crate::partition::dyadic_sequence;
    use crate::path::{generate_brownian, generate_constant};

    fn small_opts() -> AssumptionOptions {
        AssumptionOptions {
            lipschitz_samples: 32,
            horizontal_samples: 32,
            seed: 5,
        }
    }

    #[test]
    fn identity_has_unit_lipschitz_constant() {
        let w = generate_brownian(1, 1.0, 1 << 10, 42).unwrap();
        let seq = dyadic_sequence(w.grid(), 2, 6).unwrap();
        let r = check_assumptions(&builtin("identity").unwrap(), &w, &seq, &small_opts()).unwrap();
        assert!((r.lipschitz_k_hat - 1.0).abs() < 1e-12, "{}", r.lipschitz_k_hat);
        assert_eq!(r.horiz_lipschitz_c_hat, 0.0);
    }

    #[test]
    fn constant_functional_gives_zero_estimates() {
        let w = generate_brownian(1, 1.0, 1 << 10, 42).unwrap();
        let seq = dyadic_sequence(w.grid(), 2, 6).unwrap();
        let r = check_assumptions(&builtin("zero").unwrap(), &w, &seq, &small_opts()).unwrap();
        assert_eq!(r.lipschitz_k_hat, 0.0);
        assert_eq!(r.horiz_lipschitz_c_hat, 0.0);
        assert!(r.foscill_max().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn running_integral_horizontal_constant_is_path_sup() {
        let c = generate_constant(1, 1.0, 256, 0.5).unwrap();
        let seq = dyadic_sequence(c.grid(), 1, 4).unwrap();
        let r = check_assumptions(&builtin("runint").unwrap(), &c, &seq, &small_opts()).unwrap();
        assert!((r.horiz_lipschitz_c_hat - 0.5).abs() < 1e-12);
        // a bump of size u moves the left sum by at most t·u
        assert!(r.lipschitz_k_hat <= 1.0 + 1e-12);
    }
}
