use serde::Serialize;

use crate::error::Result;
use crate::functional::Functional;
use crate::numeric::pairwise_sum;
use crate::partition::{Partition, PartitionSequence};
use crate::path::SampledPath;

/// Strict-QV check on the finest level: every cell must carry a positive
/// increment `tr(δω δωᵀ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvPrecondition {
    pub n: usize,
    pub cells: usize,
    pub zero_cells: usize,
}

impl QvPrecondition {
    pub fn holds(&self) -> bool {
        self.zero_cells == 0
    }
}

pub fn qv_precondition(path: &SampledPath, partition: &Partition, n: usize) -> QvPrecondition {
    let zero_cells = partition
        .cell_bounds()
        .filter(|&(a, b)| path.distance(a, b) == 0.0)
        .count();
    QvPrecondition {
        n,
        cells: partition.cells(),
        zero_cells,
    }
}

/// `ω(t) = F(t, ω̄_t)` split at the points of one level as `rough + smooth`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionLevel {
    pub n: usize,
    pub times: Vec<f64>,
    /// `F(t_i, ω̄_{t_i})`
    pub path: Vec<f64>,
    /// `φ(t_i) = ∇F(t_i, ω̄_{t_i})`, row-major `cells x d`.
    pub phi: Vec<f64>,
    /// `Σ_{j<i} φ(t_j)·δω̄_j`
    pub rough: Vec<f64>,
    /// `F(0, ω̄_0) + Σ_{j<i} (𝒟F(t_j) Δt_j + ½⟨∇²F(t_j), δω̄ δω̄ᵀ⟩)`
    pub smooth: Vec<f64>,
    /// `[ω]_{π^n}(T)`
    pub qv_path: f64,
    /// `[s]_{π^n}(T)`
    pub qv_smooth: f64,
    /// `[s]/[ω]`; 0 when `[s] = 0`.
    pub qv_ratio: f64,
    /// `max_i |ω(t_i) − rough(t_i) − smooth(t_i)|`
    pub closure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoughSmoothDecomposition {
    pub precondition: QvPrecondition,
    pub levels: Vec<DecompositionLevel>,
}

pub fn rough_smooth_level(
    f: &Functional,
    path: &SampledPath,
    partition: &Partition,
    n: usize,
) -> Result<DecompositionLevel> {
    f.jet_capability(2)?;
    let d = path.dim();
    let prepared = f.prepare(path)?;
    let idx = partition.indices();
    let values: Vec<f64> = idx.iter().map(|&k| prepared.value(k)).collect();
    let mut phi = Vec::with_capacity(partition.cells() * d);
    let mut rough_inc = Vec::with_capacity(partition.cells());
    let mut smooth_inc = Vec::with_capacity(partition.cells());
    for (a, b) in partition.cell_bounds() {
        let jet = prepared.jet(a, 2)?;
        let delta: Vec<f64> = path.row(b).iter().zip(path.row(a)).map(|(y, x)| y - x).collect();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += jet.hess[i * d + j] * delta[i] * delta[j];
            }
        }
        rough_inc.push(jet.grad.iter().zip(&delta).map(|(g, x)| g * x).sum::<f64>());
        smooth_inc.push(jet.horizontal * (path.time(b) - path.time(a)) + 0.5 * quad);
        phi.extend_from_slice(&jet.grad);
    }
    let cumulative = |start: f64, inc: &[f64]| {
        let mut acc = start;
        std::iter::once(start)
            .chain(inc.iter().map(|x| {
                acc += x;
                acc
            }))
            .collect::<Vec<f64>>()
    };
    let rough = cumulative(0.0, &rough_inc);
    let smooth = cumulative(values[0], &smooth_inc);
    let path_sq: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    let smooth_sq: Vec<f64> = smooth_inc.iter().map(|x| x * x).collect();
    let qv_path = pairwise_sum(&path_sq);
    let qv_smooth = pairwise_sum(&smooth_sq);
    let qv_ratio = if qv_smooth == 0.0 { 0.0 } else { qv_smooth / qv_path };
    let closure = values
        .iter()
        .zip(rough.iter().zip(&smooth))
        .map(|(v, (r, s))| (v - r - s).abs())
        .fold(0.0, f64::max);
    Ok(DecompositionLevel {
        n,
        times: partition.times().collect(),
        path: values,
        phi,
        rough,
        smooth,
        qv_path,
        qv_smooth,
        qv_ratio,
        closure,
    })
}

/// Decompose `t ↦ F(t, ω̄_t)` on every level. A failed strict-QV check is
/// reported in `precondition`; the computation still runs.
pub fn rough_smooth_decompose(
    f: &Functional,
    path: &SampledPath,
    seq: &PartitionSequence,
) -> Result<RoughSmoothDecomposition> {
    let finest = seq.finest();
    let precondition = qv_precondition(path, &finest.partition, finest.n);
    let levels = seq
        .levels()
        .iter()
        .map(|l| rough_smooth_level(f, path, &l.partition, l.n))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoughSmoothDecomposition { precondition, levels })
}
