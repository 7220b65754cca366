//! Level ladders over the calculus module, one experiment kind per result
//! being exercised, with tolerance checks and reports.

mod config;
mod report;

pub use config::{ExperimentConfig, ExperimentKind, Generator, PartitionSpec, PathSpec, RemainderSpec};
pub use report::{
    blob_hash, fit_rate, sha256_hex, Check, ConvergenceReport, Environment, LevelRow, PartitionInfo, RateFit,
    CSV_COLUMNS,
};

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::calculus::{
    change_of_variable_residual, expansion_samples, isometry_level, ito_isometry_mc, qv_level, qv_precondition,
    remainder_exponent_fit, remainder_samples, riemann_sum, rough_smooth_level, ItoMcOptions, Variant,
};
use crate::error::{Error, Result};
use crate::functional::{check_assumptions, foscill_levels, Functional};
use crate::partition::{lebesgue_sequence, oscillation, Level, PartitionSequence};
use crate::path::{holder_estimate, SampledPath, ScaleRange};
use crate::rng::GENERATOR_NAME;

/// Flag raised when the finest mesh is no smaller than the coarsest.
pub const MESH_FLAG: &str = "mesh non-vanishing";

fn map_levels<T: Send>(
    seq: &PartitionSequence,
    parallel: bool,
    f: impl Fn(&Level) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if parallel {
        seq.levels().par_iter().map(&f).collect()
    } else {
        seq.levels().iter().map(f).collect()
    }
}

fn base_rows(path: &SampledPath, seq: &PartitionSequence, f: &Functional, parallel: bool) -> Result<Vec<LevelRow>> {
    let foscill = foscill_levels(f, path, seq)?;
    let mut rows = map_levels(seq, parallel, |l| {
        let qv = crate::calculus::qv_terminal(path, &l.partition);
        let d = path.dim();
        Ok(LevelRow {
            n: l.n,
            cells: l.partition.cells(),
            mesh: l.partition.mesh(),
            osc: oscillation(path, &l.partition),
            qv_t: Some((0..d).map(|i| qv[i * d + i]).sum()),
            ..LevelRow::default()
        })
    })?;
    for (row, fo) in rows.iter_mut().zip(foscill) {
        row.foscill_max = Some(fo.foscill_max);
    }
    Ok(rows)
}

fn last_usable(rows: &[LevelRow]) -> Option<&LevelRow> {
    rows.iter().rev().find(|r| r.lhs.is_some_and(|v| v > 0.0))
}

fn trend_check(rows: &[LevelRow]) -> Option<Check> {
    if rows.len() < 4 {
        return None;
    }
    let last = &rows[rows.len() - 1];
    let earlier = &rows[rows.len() - 4];
    let (g1, g0) = (last.gap?, earlier.gap?);
    let exact = g1 <= 1e-12 * last.lhs.unwrap_or(1.0).abs().max(1.0);
    Some(Check::new(
        "gap_trend",
        Some(g1),
        Some(g0),
        g1 < g0 || exact,
        format!("gap(n={}) = {g1:e} against gap(n={}) = {g0:e}", last.n, earlier.n),
    ))
}

fn finest_check(name: &str, value: f64, tol: f64, n: usize) -> Check {
    Check::new(
        name,
        Some(value),
        Some(tol),
        value < tol || value == 0.0,
        format!("finest level n={n}"),
    )
}

/// Run one experiment. The result depends only on the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let f = cfg.parsed_functional()?;
    let path = cfg.path.build()?;
    f.check_path(&path)
        .map_err(|e| Error::config("functional", e.to_string()))?;
    let config = cfg.to_json();
    let config_bytes = serde_json::to_vec(&config)?;
    let path_bytes: Vec<u8> = path.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    let mut report = ConvergenceReport {
        kind: cfg.kind.name().to_string(),
        config,
        input_hash: blob_hash(&config_bytes),
        path_hash: sha256_hex(&path_bytes),
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: GENERATOR_NAME.to_string(),
            path_label: path.label().to_string(),
            seed: path.seed(),
            intervals: path.intervals(),
            horizon: path.horizon(),
            dim: path.dim(),
        },
        partition: None,
        rows: Vec::new(),
        fitted_rate: None,
        fitted_rate_reason: None,
        flags: Vec::new(),
        checks: Vec::new(),
        details: serde_json::Value::Null,
        pass: true,
    };
    if path.label().contains("clipped") {
        report.flags.push("fbm embedding clipped".into());
    }
    let context = |e: Error| match e {
        Error::Capability(msg) => Error::Capability(format!("{} experiment: {msg}", cfg.kind.name())),
        other => other,
    };
    match cfg.kind {
        ExperimentKind::Remainder | ExperimentKind::Expansion => {
            run_remainder(cfg, &f, &path, &mut report).map_err(context)?
        }
        ExperimentKind::ItoMc => run_ito(cfg, &f, &mut report).map_err(context)?,
        _ => run_levels(cfg, &f, &path, &mut report).map_err(context)?,
    }
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

fn run_levels(
    cfg: &ExperimentConfig,
    f: &Functional,
    path: &SampledPath,
    report: &mut ConvergenceReport,
) -> Result<()> {
    let seq = cfg.partition.build(path)?;
    let parallel = cfg.parallel;
    report.partition = Some(PartitionInfo {
        kind: seq.kind(),
        level_base: seq.level_base(),
        nested: seq.nested(),
        n_min: cfg.partition.n_min,
        n_max: cfg.partition.n_max,
    });
    let mut rows = base_rows(path, &seq, f, parallel)?;
    let first_mesh = rows[0].mesh;
    let last_mesh = rows[rows.len() - 1].mesh;
    if last_mesh >= first_mesh && rows.len() > 1 || last_mesh >= path.horizon() {
        report.flags.push(format!("{MESH_FLAG}: finest mesh {last_mesh}"));
    }
    match cfg.kind {
        ExperimentKind::Qv => {
            let tol = cfg.tolerance("psd");
            let min_eig = map_levels(&seq, parallel, |l| {
                Ok(qv_level(path, &l.partition).min_increment_eigenvalue())
            })?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            report.checks.push(Check::new(
                "psd",
                Some(min_eig),
                Some(tol),
                min_eig >= -tol,
                "smallest eigenvalue of any QV increment",
            ));
        }
        ExperimentKind::Isometry | ExperimentKind::IsometryLebesgue => {
            let levels = map_levels(&seq, parallel, |l| isometry_level(f, path, &l.partition, l.n))?;
            let tol_c = cfg.tolerance("consistency");
            let mut worst: f64 = 0.0;
            for (row, iso) in rows.iter_mut().zip(&levels) {
                row.lhs = Some(iso.lhs);
                row.rhs = Some(iso.rhs);
                row.gap = Some(iso.gap);
                row.relative_gap = Some(iso.relative_gap);
                let scale = iso.lhs.abs().max(iso.rhs.abs());
                if scale > 0.0 {
                    worst = worst.max(((iso.lhs - iso.rhs) - iso.gap_from_remainders).abs() / scale);
                }
            }
            report.checks.push(Check::new(
                "consistency",
                Some(worst),
                Some(tol_c),
                worst <= tol_c,
                "definition against the remainder reconstruction, worst level",
            ));
            let tol = cfg.tolerance("relative_gap");
            match last_usable(&rows) {
                Some(r) => report
                    .checks
                    .push(finest_check("relative_gap", r.relative_gap.unwrap_or(0.0), tol, r.n)),
                None => report.checks.push(Check::new(
                    "relative_gap",
                    None,
                    Some(tol),
                    true,
                    "no level with a positive left side; nothing to compare",
                )),
            }
            if cfg.kind == ExperimentKind::Isometry {
                report.checks.extend(trend_check(&rows));
            }
        }
        ExperimentKind::Uniqueness => {
            let pairs = map_levels(&seq, parallel, |l| {
                let (a, _) = riemann_sum(f, path, &l.partition, Variant::AlongApprox, false)?;
                let (p, _) = riemann_sum(f, path, &l.partition, Variant::AlongPath, false)?;
                Ok((a, p))
            })?;
            for (row, (a, p)) in rows.iter_mut().zip(pairs) {
                let gap = (a - p).abs();
                row.value_along_approx = Some(a);
                row.value_along_path = Some(p);
                row.gap = Some(gap);
                row.relative_gap = Some(if gap == 0.0 { 0.0 } else { gap / p.abs() });
            }
            let last = &rows[rows.len() - 1];
            report.checks.push(finest_check(
                "relative_difference",
                last.relative_gap.unwrap_or(0.0),
                cfg.tolerance("relative_difference"),
                last.n,
            ));
        }
        ExperimentKind::ChangeOfVariable => {
            let terms = map_levels(&seq, parallel, |l| change_of_variable_residual(f, path, &l.partition))?;
            for (row, t) in rows.iter_mut().zip(&terms) {
                row.lhs = Some(t.lhs);
                row.rhs = Some(t.horizontal + t.second_order + t.riemann);
                row.gap = Some(t.residual);
                row.residual = Some(t.residual);
                row.value_along_path = Some(t.riemann);
            }
            let last = terms.last().expect("non-empty ladder");
            let scaled = last.residual / (1.0 + last.lhs.abs());
            report.checks.push(finest_check(
                "residual",
                scaled,
                cfg.tolerance("residual"),
                rows[rows.len() - 1].n,
            ));
            report.details = json!({ "terms": terms });
        }
        ExperimentKind::Decomposition => {
            let levels = map_levels(&seq, parallel, |l| rough_smooth_level(f, path, &l.partition, l.n))?;
            let finest = seq.finest();
            let pre = qv_precondition(path, &finest.partition, finest.n);
            if !pre.holds() {
                report.flags.push(format!(
                    "strict-qv precondition failed: {} of {} finest cells carry no increment",
                    pre.zero_cells, pre.cells
                ));
            }
            for (row, l) in rows.iter_mut().zip(&levels) {
                row.lhs = Some(l.qv_path);
                row.rhs = Some(l.qv_smooth);
                row.gap = Some(l.qv_ratio);
                row.residual = Some(l.closure);
            }
            let last = levels.last().expect("non-empty ladder");
            report.checks.push(finest_check(
                "qv_ratio",
                last.qv_ratio,
                cfg.tolerance("qv_ratio"),
                last.n,
            ));
            let summary: Vec<_> = levels
                .iter()
                .map(|l| json!({"n": l.n, "qv_path": l.qv_path, "qv_smooth": l.qv_smooth, "qv_ratio": l.qv_ratio, "closure": l.closure}))
                .collect();
            report.details = json!({ "precondition": pre, "levels": summary });
        }
        ExperimentKind::Assumptions => {
            let a = check_assumptions(f, path, &seq, &cfg.assumptions)?;
            report.details = serde_json::to_value(&a)?;
        }
        _ => unreachable!("dispatched elsewhere"),
    }
    if matches!(
        cfg.kind,
        ExperimentKind::Isometry
            | ExperimentKind::IsometryLebesgue
            | ExperimentKind::Uniqueness
            | ExperimentKind::ChangeOfVariable
    ) {
        let positive = rows.iter().filter(|r| r.gap.is_some_and(|g| g > 0.0)).count();
        if positive >= 4 {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.mesh, r.gap.unwrap_or(0.0))).collect();
            match fit_rate(&pts) {
                Ok(rate) => report.fitted_rate = Some(rate),
                Err(reason) => report.fitted_rate_reason = Some(reason),
            }
        } else {
            report.fitted_rate_reason = Some(format!("{positive} levels with a positive gap, need 4"));
        }
    }
    report.rows = rows;
    Ok(())
}

#[derive(Serialize)]
struct RemainderDetails {
    holder_exponent: f64,
    holder_r_squared: f64,
    bound: f64,
    slack: f64,
    fit: crate::calculus::ExponentFit,
}

fn run_remainder(
    cfg: &ExperimentConfig,
    f: &Functional,
    path: &SampledPath,
    report: &mut ConvergenceReport,
) -> Result<()> {
    let spec = cfg.remainder;
    let holder_scales = if spec.scales.validate(path.intervals(), 4).is_ok() {
        spec.scales
    } else {
        ScaleRange::default()
    };
    let holder = holder_estimate(path, holder_scales)?;
    let nu = holder.exponent;
    let lags = spec.scales.lags();
    let (samples, bound, slack) = if cfg.kind == ExperimentKind::Remainder {
        (
            remainder_samples(f, path, &lags, spec.count, spec.seed)?,
            nu * (1.0 + nu),
            cfg.tolerance("exponent_slack"),
        )
    } else {
        (
            expansion_samples(f, path, &lags, spec.count, spec.seed)?,
            3.0 * nu * nu + nu,
            cfg.tolerance("exponent_slack"),
        )
    };
    let fit = remainder_exponent_fit(&samples);
    let check = if fit.degenerate {
        report.flags.push("remainder below floor: exponent +inf".into());
        Check::new(
            "exponent",
            None,
            Some(bound - slack),
            true,
            "all remainders vanish; exponent +inf",
        )
    } else {
        match fit.exponent {
            Some(e) => Check::new(
                "exponent",
                Some(e),
                Some(bound - slack),
                e >= bound - slack,
                format!("fitted exponent against bound {bound:.4} − slack {slack}, Hölder estimate {nu:.4}"),
            ),
            None => Check::new(
                "exponent",
                None,
                Some(bound - slack),
                false,
                fit.reason.clone().unwrap_or_default(),
            ),
        }
    };
    report.checks.push(check);
    report.details = serde_json::to_value(RemainderDetails {
        holder_exponent: nu,
        holder_r_squared: holder.r_squared,
        bound,
        slack,
        fit,
    })?;
    Ok(())
}

fn run_ito(cfg: &ExperimentConfig, f: &Functional, report: &mut ConvergenceReport) -> Result<()> {
    let level = cfg.partition.n_max;
    let opts = ItoMcOptions {
        seeds: cfg.seeds.clone(),
        level,
        intervals: cfg.path.intervals,
        horizon: cfg.path.horizon,
    };
    let r = ito_isometry_mc(f, &opts)?;
    let k = cfg.tolerance("stderr_multiple");
    let diff = (r.mean_lhs - r.mean_rhs).abs();
    report.rows.push(LevelRow {
        n: level,
        cells: 1 << level,
        mesh: cfg.path.horizon / (1u64 << level) as f64,
        lhs: Some(r.mean_lhs),
        rhs: Some(r.mean_rhs),
        gap: Some(diff),
        ..LevelRow::default()
    });
    report.checks.push(Check::new(
        "stderr_multiple",
        Some(if r.stderr > 0.0 { diff / r.stderr } else { 0.0 }),
        Some(k),
        r.within(k),
        format!("|mean_lhs − mean_rhs| = {diff:e}, combined stderr {:e}", r.stderr),
    ));
    report.details = serde_json::to_value(&r)?;
    Ok(())
}

/// Hitting-time ladder statistics: `m(n)`, mesh and the scaled count
/// `level_base^{-2n} (m(n) − 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LebesgueRow {
    pub n: usize,
    pub m: usize,
    pub mesh: f64,
    pub osc: f64,
    pub scaled_count: f64,
}

pub fn lebesgue_table(path: &SampledPath, n_min: usize, n_max: usize, level_base: f64) -> Result<Vec<LebesgueRow>> {
    let seq = lebesgue_sequence(path, n_min, n_max, level_base)?;
    Ok(seq
        .levels()
        .iter()
        .map(|l| {
            let m = l.partition.cells();
            LebesgueRow {
                n: l.n,
                m,
                mesh: l.partition.mesh(),
                osc: oscillation(path, &l.partition),
                scaled_count: (m as f64 - 1.0) * level_base.powi(-2 * l.n as i32),
            }
        })
        .collect())
}

pub fn write_lebesgue_csv<W: Write>(rows: &[LebesgueRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "m", "mesh", "osc", "scaled_count"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.mesh.to_string(),
            r.osc.to_string(),
            r.scaled_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
