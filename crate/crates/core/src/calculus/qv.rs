use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::numeric::pairwise_sum;
use crate::partition::{Partition, PartitionSequence};
use crate::path::SampledPath;

/// Nondecreasing matrix-valued step function on the points of a partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMatrixFunction {
    dim: usize,
    times: Vec<f64>,
    /// Row-major `d x d` matrices, one per time.
    values: Vec<f64>,
}

impl StepMatrixFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Matrix at the `i`-th partition time.
    pub fn value(&self, i: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.values[i * dd..(i + 1) * dd]
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub fn trace(&self, i: usize) -> f64 {
        let v = self.value(i);
        (0..self.dim).map(|j| v[j * self.dim + j]).sum()
    }

    /// Value at time `t`: the last matrix whose time is `≤ t`.
    pub fn at(&self, t: f64) -> &[f64] {
        let i = self.times.partition_point(|&s| s <= t).max(1) - 1;
        self.value(i)
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim;
        (0..self.len()).all(|i| {
            let v = self.value(i);
            (0..d).all(|a| (0..d).all(|b| v[a * d + b] == v[b * d + a]))
        })
    }

    /// Smallest eigenvalue over all increments `values[i+1] - values[i]`.
    pub fn min_increment_eigenvalue(&self) -> f64 {
        let d = self.dim;
        (1..self.len())
            .map(|i| {
                let inc = DMatrix::from_fn(d, d, |a, b| self.value(i)[a * d + b] - self.value(i - 1)[a * d + b]);
                if d == 1 {
                    inc[(0, 0)]
                } else {
                    SymmetricEigen::new(inc).eigenvalues.min()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelQv {
    pub n: usize,
    pub qv: StepMatrixFunction,
}

fn increment(path: &SampledPath, a: usize, b: usize) -> Vec<f64> {
    path.row(b).iter().zip(path.row(a)).map(|(y, x)| y - x).collect()
}

/// `Σ_{t_{i+1} ≤ t} δω δωᵀ` at every point of one partition.
pub fn qv_level(path: &SampledPath, partition: &Partition) -> StepMatrixFunction {
    let d = path.dim();
    let dd = d * d;
    let mut values = Vec::with_capacity(partition.len() * dd);
    let mut acc = vec![0.0; dd];
    values.extend_from_slice(&acc);
    for (a, b) in partition.cell_bounds() {
        let delta = increment(path, a, b);
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j] += delta[i] * delta[j];
            }
        }
        values.extend_from_slice(&acc);
    }
    StepMatrixFunction {
        dim: d,
        times: partition.times().collect(),
        values,
    }
}

/// `[ω]_{π^n}(T)` with pairwise summation, row-major `d x d`.
pub fn qv_terminal(path: &SampledPath, partition: &Partition) -> Vec<f64> {
    let d = path.dim();
    let deltas: Vec<Vec<f64>> = partition.cell_bounds().map(|(a, b)| increment(path, a, b)).collect();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let terms: Vec<f64> = deltas.iter().map(|v| v[i] * v[j]).collect();
            let s = pairwise_sum(&terms);
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
    out
}

/// Quadratic variation step function for every level.
pub fn quadratic_variation(path: &SampledPath, seq: &PartitionSequence) -> Vec<LevelQv> {
    seq.levels()
        .iter()
        .map(|l| LevelQv {
            n: l.n,
            qv: qv_level(path, &l.partition),
        })
        .collect()
}

/// `Σ δx δy` for two scalar paths on the same grid.
pub fn cross_variation(x: &SampledPath, y: &SampledPath, partition: &Partition) -> f64 {
    let terms: Vec<f64> = partition
        .cell_bounds()
        .map(|(a, b)| (x.row(b)[0] - x.row(a)[0]) * (y.row(b)[0] - y.row(a)[0]))
        .collect();
    pairwise_sum(&terms)
}
