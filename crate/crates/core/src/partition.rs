//! Partitions of `[0, T]` subordinate to the master grid.
//!
//! Uniform ladders (`base^n` equal cells) and Lebesgue ladders (hitting
//! times of levels spaced `base^{-n}`), with mesh and oscillation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Grid, SampledPath};

/// A strictly increasing set of grid indices containing `0` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    grid: Grid,
    indices: Vec<usize>,
}

impl Partition {
    pub fn new(grid: Grid, indices: Vec<usize>) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::partition("a partition needs at least two points"));
        }
        if indices[0] != 0 || *indices.last().unwrap() != grid.intervals {
            return Err(Error::partition(format!(
                "partition must start at 0 and end at {}",
                grid.intervals
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::partition(format!(
                "indices not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { grid, indices })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of cells, `m(n)` in hitting-time notation.
    pub fn cells(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(self.indices[i])
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.indices.iter().map(|&k| self.grid.time(k))
    }

    /// Consecutive `(left, right)` grid-index pairs.
    pub fn cell_bounds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Largest cell length in time units.
    pub fn mesh(&self) -> f64 {
        let widest = self.cell_bounds().map(|(a, b)| b - a).max().unwrap_or(0);
        widest as f64 * self.grid.dt()
    }

    pub fn is_subset_of(&self, other: &Partition) -> bool {
        let mut it = other.indices.iter().peekable();
        'outer: for k in &self.indices {
            for &o in it.by_ref() {
                if o == *k {
                    continue 'outer;
                }
                if o > *k {
                    return false;
                }
            }
            return false;
        }
        true
    }
}

/// Free function form of [`Partition::mesh`].
pub fn mesh(partition: &Partition) -> f64 {
    partition.mesh()
}

/// `max_j max_{t ∈ (t_j, t_{j+1}]} |f(t) - f(t_j)|` over grid points.
pub fn oscillation(path: &SampledPath, partition: &Partition) -> f64 {
    debug_assert_eq!(path.grid(), partition.grid());
    partition
        .cell_bounds()
        .map(|(a, b)| ((a + 1)..=b).map(|k| path.distance(k, a)).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Uniform,
    Dyadic,
    Lebesgue,
}

/// One level `π^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub n: usize,
    pub partition: Partition,
}

/// A finite ladder `π^{n_min} .. π^{n_max}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    kind: PartitionKind,
    level_base: f64,
    nested: bool,
    levels: Vec<Level>,
}

impl PartitionSequence {
    /// Assemble levels; nestedness is computed, not trusted.
    pub fn new(kind: PartitionKind, level_base: f64, levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::partition("a sequence needs at least one level"));
        }
        if levels.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::partition("levels must be ordered by n"));
        }
        let grid = levels[0].partition.grid();
        if levels.iter().any(|l| l.partition.grid() != grid) {
            return Err(Error::partition("levels live on different grids"));
        }
        let nested = levels.windows(2).all(|w| w[0].partition.is_subset_of(&w[1].partition));
        Ok(Self {
            kind,
            level_base,
            nested,
            levels,
        })
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn level_base(&self) -> f64 {
        self.level_base
    }

    pub fn nested(&self) -> bool {
        self.nested
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn grid(&self) -> Grid {
        self.levels[0].partition.grid()
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    pub fn level(&self, n: usize) -> Option<&Partition> {
        self.levels.iter().find(|l| l.n == n).map(|l| &l.partition)
    }

    /// CSV with one row per point: `n,k,grid_index,time`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "k", "grid_index", "time"])?;
        for level in &self.levels {
            for (k, &idx) in level.partition.indices().iter().enumerate() {
                w.write_record([
                    level.n.to_string(),
                    k.to_string(),
                    idx.to_string(),
                    level.partition.grid().time(idx).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Compact JSON form used inside reports.
    pub fn to_json(&self) -> serde_json::Value {
        let levels: Vec<_> = self
            .levels
            .iter()
            .map(|l| serde_json::json!({"n": l.n, "indices": l.partition.indices()}))
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "level_base": self.level_base,
            "nested": self.nested,
            "grid": self.grid(),
            "levels": levels,
        })
    }
}

fn check_range(n_min: usize, n_max: usize) -> Result<()> {
    if n_min > n_max {
        return Err(Error::param(format!("empty level range {n_min}..{n_max}")));
    }
    Ok(())
}

/// Level `n` has `base^n` equal cells; `base^{n_max}` must divide `M`.
pub fn uniform_sequence(grid: Grid, n_min: usize, n_max: usize, base: usize) -> Result<PartitionSequence> {
    check_range(n_min, n_max)?;
    if base < 2 {
        return Err(Error::param("uniform base must be at least 2"));
    }
    let m = grid.intervals as u128;
    let divides = (base as u128)
        .checked_pow(n_max as u32)
        .is_some_and(|c| c <= m && m.is_multiple_of(c));
    if !divides {
        return Err(Error::param(format!(
            "{base}^{n_max} does not divide the grid size {}",
            grid.intervals
        )));
    }
    let levels = (n_min..=n_max)
        .map(|n| {
            let cells = base.pow(n as u32);
            let step = grid.intervals / cells;
            let indices = (0..=cells).map(|i| i * step).collect();
            Partition::new(grid, indices).map(|partition| Level { n, partition })
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = if base == 2 {
        PartitionKind::Dyadic
    } else {
        PartitionKind::Uniform
    };
    PartitionSequence::new(kind, base as f64, levels)
}

/// Dyadic ladder: level `n` has `2^n + 1` equally spaced indices.
pub fn dyadic_sequence(grid: Grid, n_min: usize, n_max: usize) -> Result<PartitionSequence> {
    uniform_sequence(grid, n_min, n_max, 2)
}

/// First grid times at which the path has moved at least `threshold` from
/// the previous partition point, closed by `M`.
pub fn hitting_times(path: &SampledPath, threshold: f64) -> Partition {
    let m = path.intervals();
    let mut indices = vec![0];
    if path.dim() == 1 {
        let xs = path.values();
        let mut base = xs[0];
        for (k, &x) in xs.iter().enumerate().skip(1) {
            if (x - base).abs() >= threshold {
                indices.push(k);
                base = x;
            }
        }
    } else {
        let mut anchor = 0;
        for k in 1..=m {
            if path.distance(k, anchor) >= threshold {
                indices.push(k);
                anchor = k;
            }
        }
    }
    if *indices.last().unwrap() != m {
        indices.push(m);
    }
    Partition::new(path.grid(), indices).expect("hitting times are strictly increasing")
}

/// Lebesgue partitions `τ^n(ω)` for `n_min..=n_max`, thresholds `level_base^{-n}`.
pub fn lebesgue_sequence(path: &SampledPath, n_min: usize, n_max: usize, level_base: f64) -> Result<PartitionSequence> {
    check_range(n_min, n_max)?;
    if !(level_base.is_finite() && level_base > 1.0) {
        return Err(Error::param(format!("level base must exceed 1, got {level_base}")));
    }
    let levels = (n_min..=n_max)
        .into_par_iter()
        .map(|n| Level {
            n,
            partition: hitting_times(path, level_base.powi(-(n as i32))),
        })
        .collect();
    PartitionSequence::new(PartitionKind::Lebesgue, level_base, levels)
}
