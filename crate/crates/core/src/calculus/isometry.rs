use serde::Serialize;

use crate::error::Result;
use crate::functional::Functional;
use crate::numeric::pairwise_sum;
use crate::partition::{Partition, PartitionSequence};
use crate::path::SampledPath;

/// Both sides of the isometry on one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsometryLevel {
    pub n: usize,
    /// `Σ (F(t_{i+1}, ω_{t_{i+1}}) − F(t_i, ω_{t_i}))²`
    pub lhs: f64,
    /// `Σ ⟨∇F(t_i)ᵀ∇F(t_i), δω δωᵀ⟩`
    pub rhs: f64,
    pub gap: f64,
    /// `gap / lhs`, 0 when both sides vanish.
    pub relative_gap: f64,
    /// `Σ (R_i² + 2 R_i ∇F(t_i)·δω)` with `R` the first-order remainder.
    pub gap_from_remainders: f64,
}

impl IsometryLevel {
    /// The definition and the remainder route agree to `10^{-10}` relative.
    pub fn consistent(&self) -> bool {
        let signed = self.lhs - self.rhs;
        (signed - self.gap_from_remainders).abs() <= 1e-10 * self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

pub fn isometry_level(f: &Functional, path: &SampledPath, partition: &Partition, n: usize) -> Result<IsometryLevel> {
    f.jet_capability(1)?;
    let prepared = f.prepare(path)?;
    let cells = partition.cells();
    let mut lhs = Vec::with_capacity(cells);
    let mut rhs = Vec::with_capacity(cells);
    let mut via_r = Vec::with_capacity(cells);
    for (a, b) in partition.cell_bounds() {
        let jet = prepared.jet(a, 1)?;
        let df = prepared.value(b) - jet.value;
        let linear: f64 = jet
            .grad
            .iter()
            .zip(path.row(b).iter().zip(path.row(a)))
            .map(|(g, (y, x))| g * (y - x))
            .sum();
        let r = df - linear;
        lhs.push(df * df);
        rhs.push(linear * linear);
        via_r.push(r * r + 2.0 * r * linear);
    }
    let lhs = pairwise_sum(&lhs);
    let rhs = pairwise_sum(&rhs);
    let gap = (lhs - rhs).abs();
    let relative_gap = if lhs > 0.0 {
        gap / lhs
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(IsometryLevel {
        n,
        lhs,
        rhs,
        gap,
        relative_gap,
        gap_from_remainders: pairwise_sum(&via_r),
    })
}

/// Isometry sides for every level.
pub fn isometry_gap(f: &Functional, path: &SampledPath, seq: &PartitionSequence) -> Result<Vec<IsometryLevel>> {
    seq.levels()
        .iter()
        .map(|l| isometry_level(f, path, &l.partition, l.n))
        .collect()
}
