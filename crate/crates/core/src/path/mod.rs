//! Paths sampled on a uniform master grid.
//!
//! A [`SampledPath`] stores `M + 1` rows of a `d`-dimensional path at times
//! `t_k = k T / M`. Every partition in the crate is a subset of this grid.

mod generate;
mod holder;
mod io;

pub use generate::{
    generate_brownian, generate_brownian_correlated, generate_brownian_with, generate_constant, generate_fbm,
    generate_fbm_with, generate_smooth, SmoothSpec, SmoothTerm,
};
pub use holder::{holder_estimate, HolderEstimate, ScaleRange};
pub use io::{read_binary, read_csv, write_binary, write_csv, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Uniform time grid `t_k = k * horizon / intervals`, `k = 0..=intervals`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub intervals: usize,
    pub horizon: f64,
}

impl Grid {
    pub fn new(intervals: usize, horizon: f64) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::param("grid needs at least one interval"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { intervals, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.intervals as f64
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nearest grid index to `t`; exact ties round down.
    pub fn snap(&self, t: f64) -> Result<usize> {
        if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
            return Err(Error::param(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let x = t * self.intervals as f64 / self.horizon;
        let k = x.floor();
        let k = if x - k > 0.5 { k + 1.0 } else { k };
        Ok((k as usize).min(self.intervals))
    }
}

/// A `d`-dimensional path sampled on a uniform grid over `[0, T]`.
///
/// Immutable after construction; values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
    label: String,
    seed: Option<u64>,
}

impl SampledPath {
    /// Build from row-major values of shape `(intervals + 1) x dim`.
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>, label: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("path dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::param(format!(
                "expected {} values for {} rows of dimension {}, got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite path value at row {}", pos / dim)));
        }
        Ok(Self {
            grid,
            dim,
            values,
            label: label.into(),
            seed,
        })
    }

    /// Scalar path from a closure of time.
    pub fn from_fn(grid: Grid, label: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.time(k))).collect();
        Self::new(grid, 1, values, label, None)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon
    }

    /// Number of grid intervals `M`.
    pub fn intervals(&self) -> usize {
        self.grid.intervals
    }

    /// Number of samples `M + 1`.
    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Euclidean distance between rows `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if self.dim == 1 {
            return (self.values[a] - self.values[b]).abs();
        }
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Scalar coordinate `i` as its own path.
    pub fn component(&self, i: usize) -> Result<SampledPath> {
        if i >= self.dim {
            return Err(Error::param(format!("coordinate {i} out of range")));
        }
        let values = (0..self.grid_size()).map(|k| self.coord(k, i)).collect();
        SampledPath::new(self.grid, 1, values, format!("{}[{}]", self.label, i), self.seed)
    }

    /// Sup-norm distance `max_k |self(k) - other(k)|` over the whole grid.
    pub fn sup_distance(&self, other: &SampledPath) -> f64 {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.dim, other.dim);
        (0..self.grid_size())
            .map(|k| {
                self.row(k)
                    .iter()
                    .zip(other.row(k))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// The stopped path `ω_t = ω(t ∧ ·)`: equal to `ω` up to `t`, frozen afterwards.
pub fn stop_path(path: &SampledPath, t: f64) -> Result<SampledPath> {
    let k = path.grid.snap(t)?;
    Ok(stop_path_at(path, k))
}

/// [`stop_path`] at a grid index.
pub fn stop_path_at(path: &SampledPath, k: usize) -> SampledPath {
    let d = path.dim;
    let mut values = path.values.clone();
    let frozen = path.row(k).to_vec();
    for row in values[(k + 1) * d..].chunks_mut(d) {
        row.copy_from_slice(&frozen);
    }
    SampledPath {
        grid: path.grid,
        dim: d,
        values,
        label: format!("{}|stopped@{}", path.label, k),
        seed: path.seed,
    }
}

/// Piecewise-constant approximation along a partition, continuous-path form:
/// `ω^n(t) = ω(t_{i+1})` on `[t_i, t_{i+1})` and `ω^n(T) = ω(T)`.
///
/// On the grid, the left limit `ω^n(t_i-)` is the sample one step before
/// `t_i`, which equals `ω(t_i)` for every interior partition point.
pub fn piecewise_constant_approx(path: &SampledPath, partition: &Partition) -> Result<SampledPath> {
    if partition.grid() != path.grid {
        return Err(Error::partition(format!(
            "partition grid {:?} does not match path grid {:?}",
            partition.grid(),
            path.grid
        )));
    }
    let d = path.dim;
    let mut values = vec![0.0; path.values.len()];
    for w in partition.indices().windows(2) {
        let (a, b) = (w[0], w[1]);
        let target = path.row(b);
        for row in values[a * d..b * d].chunks_mut(d) {
            row.copy_from_slice(target);
        }
    }
    let last = path.intervals();
    values[last * d..].copy_from_slice(path.row(last));
    Ok(SampledPath {
        grid: path.grid,
        dim: d,
        values,
        label: format!("{}|step({} pts)", path.label, partition.len()),
        seed: path.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{dyadic_sequence, oscillation, Partition};

    fn linear(m: usize) -> SampledPath {
        SampledPath::from_fn(Grid::new(m, 1.0).unwrap(), "linear", |t| t).unwrap()
    }

    #[test]
    fn snapping_rounds_ties_down() {
        let g = Grid::new(4, 1.0).unwrap();
        assert_eq!(g.snap(0.125).unwrap(), 0);
        assert_eq!(g.snap(0.13).unwrap(), 1);
        assert_eq!(g.snap(0.375).unwrap(), 1);
        assert_eq!(g.snap(1.0).unwrap(), 4);
        assert!(g.snap(1.01).is_err());
        assert!(g.snap(-0.1).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::new(2, 1.0).unwrap();
        assert!(SampledPath::new(g, 1, vec![0.0, f64::NAN, 1.0], "x", None).is_err());
        assert!(SampledPath::new(g, 1, vec![0.0, 1.0], "x", None).is_err());
    }

    #[test]
    fn stop_at_horizon_is_identity_and_at_zero_is_constant() {
        let w = linear(8);
        assert_eq!(stop_path(&w, 1.0).unwrap().values(), w.values());
        assert!(stop_path(&w, 0.0).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(stop_path(&w, 1.5).is_err());
    }

    #[test]
    fn stop_linear_at_half_is_min() {
        let w = linear(8);
        let s = stop_path(&w, 0.5).unwrap();
        for k in 0..=8 {
            assert_eq!(s.coord(k, 0), w.time(k).min(0.5));
        }
    }

    #[test]
    fn step_approx_of_trivial_partition_is_terminal_value() {
        let w = linear(8);
        let p = Partition::new(w.grid(), vec![0, 8]).unwrap();
        let s = piecewise_constant_approx(&w, &p).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn step_approx_error_on_linear_is_mesh() {
        let w = linear(64);
        let seq = dyadic_sequence(w.grid(), 3, 3).unwrap();
        let p = &seq.levels()[0].partition;
        let s = piecewise_constant_approx(&w, p).unwrap();
        assert!((w.sup_distance(&s) - 0.125).abs() < 1e-15);
        // left limits at interior partition points
        for &k in &p.indices()[1..p.len() - 1] {
            assert_eq!(s.coord(k - 1, 0), w.coord(k, 0));
        }
        assert!(w.sup_distance(&s) <= oscillation(&w, p) + 1e-15);
    }

    #[test]
    fn step_approx_rejects_foreign_grid() {
        let w = linear(8);
        let p = Partition::new(Grid::new(16, 1.0).unwrap(), vec![0, 16]).unwrap();
        assert!(piecewise_constant_approx(&w, &p).is_err());
    }
}
