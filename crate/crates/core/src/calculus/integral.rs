use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functional::{Functional, StoppedState};
use crate::numeric::pairwise_sum;
use crate::partition::{Partition, PartitionSequence};
use crate::path::{piecewise_constant_approx, SampledPath};

/// Where the integrand's path argument is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `∇F(t_i, ω^n_{t_i-})`: history from the piecewise-constant
    /// approximation, terminal value `ω^n(t_i-) = ω(t_i)`.
    AlongApprox,
    /// `∇F(t_i, ω_{t_i})`.
    AlongPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralEstimate {
    pub n: usize,
    pub variant: Variant,
    pub value: f64,
    /// Running sums at each partition time, starting with 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_sums: Option<Vec<f64>>,
}

/// Integrand states at the left point of every cell.
pub(crate) fn left_states(
    f: &Functional,
    path: &SampledPath,
    partition: &Partition,
    variant: Variant,
) -> Result<Vec<StoppedState>> {
    let cells = partition.indices()[..partition.cells()].iter().copied();
    match variant {
        Variant::AlongPath => {
            let prepared = f.prepare(path)?;
            Ok(cells.map(|k| prepared.state(k)).collect())
        }
        Variant::AlongApprox => {
            let approx = piecewise_constant_approx(path, partition)?;
            let prepared = f.prepare(&approx)?;
            Ok(cells.map(|k| prepared.state_with_terminal(k, path.row(k))).collect())
        }
    }
}

fn increments(path: &SampledPath, partition: &Partition) -> Vec<Vec<f64>> {
    partition
        .cell_bounds()
        .map(|(a, b)| path.row(b).iter().zip(path.row(a)).map(|(y, x)| y - x).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_i ∇F(t_i, ·) · (ω(t_{i+1}) − ω(t_i))` on one partition.
pub fn riemann_sum(
    f: &Functional,
    path: &SampledPath,
    partition: &Partition,
    variant: Variant,
    keep_partials: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    f.jet_capability(1)?;
    let states = left_states(f, path, partition, variant)?;
    let deltas = increments(path, partition);
    let terms = states
        .iter()
        .zip(&deltas)
        .map(|(s, d)| Ok(dot(&f.jet(s, 1)?.grad, d)))
        .collect::<Result<Vec<f64>>>()?;
    let partials = keep_partials.then(|| {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(terms.iter().map(|t| {
                acc += t;
                acc
            }))
            .collect()
    });
    Ok((pairwise_sum(&terms), partials))
}

/// Riemann sums for every level of a sequence.
pub fn follmer_integral(
    f: &Functional,
    path: &SampledPath,
    seq: &PartitionSequence,
    variant: Variant,
    keep_partials: bool,
) -> Result<Vec<IntegralEstimate>> {
    seq.levels()
        .iter()
        .map(|l| {
            let (value, partial_sums) = riemann_sum(f, path, &l.partition, variant, keep_partials)?;
            Ok(IntegralEstimate {
                n: l.n,
                variant,
                value,
                partial_sums,
            })
        })
        .collect()
}

/// The three sums of the change-of-variable formula on one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovTerms {
    /// `F(T, ω_T) − F(0, ω_0)`
    pub lhs: f64,
    /// `Σ 𝒟F(t_i) Δt_i`
    pub horizontal: f64,
    /// `½ Σ tr(∇²F(t_i) δω δωᵀ)`
    pub second_order: f64,
    /// `Σ ∇F(t_i) · δω`, along the path
    pub riemann: f64,
    /// `|lhs − (horizontal + second_order + riemann)|`
    pub residual: f64,
}

/// Change-of-variable residual on one partition, all sums left-point and
/// the Riemann sum taken along the path.
pub fn change_of_variable_residual(f: &Functional, path: &SampledPath, partition: &Partition) -> Result<CovTerms> {
    f.jet_capability(2)?;
    let d = path.dim();
    let prepared = f.prepare(path)?;
    let deltas = increments(path, partition);
    let mut horizontal = Vec::with_capacity(deltas.len());
    let mut second = Vec::with_capacity(deltas.len());
    let mut first = Vec::with_capacity(deltas.len());
    for ((a, b), delta) in partition.cell_bounds().zip(&deltas) {
        let jet = f.jet(&prepared.state(a), 2)?;
        horizontal.push(jet.horizontal * (path.time(b) - path.time(a)));
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += jet.hess[i * d + j] * delta[i] * delta[j];
            }
        }
        second.push(0.5 * quad);
        first.push(dot(&jet.grad, delta));
    }
    let lhs = prepared.value(path.intervals()) - prepared.value(0);
    let horizontal = pairwise_sum(&horizontal);
    let second_order = pairwise_sum(&second);
    let riemann = pairwise_sum(&first);
    Ok(CovTerms {
        lhs,
        horizontal,
        second_order,
        riemann,
        residual: (lhs - (horizontal + second_order + riemann)).abs(),
    })
}
