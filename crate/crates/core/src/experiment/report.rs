//! Convergence reports and their CSV/JSON forms.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::numeric::fit_log_log;

/// Column order of the per-level CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "n",
    "mesh",
    "osc",
    "lhs",
    "rhs",
    "gap",
    "value_along_approx",
    "value_along_path",
    "qv_T",
    "residual",
];

/// One level of a ladder. Columns a kind does not produce stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelRow {
    pub n: usize,
    pub cells: usize,
    pub mesh: f64,
    pub osc: f64,
    pub foscill_max: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub gap: Option<f64>,
    pub relative_gap: Option<f64>,
    pub value_along_approx: Option<f64>,
    pub value_along_path: Option<f64>,
    #[serde(rename = "qv_T")]
    pub qv_t: Option<f64>,
    pub residual: Option<f64>,
}

/// Outcome of one tolerance rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, value: Option<f64>, tolerance: Option<f64>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            pass,
            detail: detail.into(),
        }
    }
}

/// Log-log slope of gap against mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `log gap` against `log mesh` over levels with a
/// positive gap; at least 3 such levels are needed.
pub fn fit_rate(levels: &[(f64, f64)]) -> std::result::Result<RateFit, String> {
    let usable: Vec<(f64, f64)> = levels
        .iter()
        .copied()
        .filter(|(m, g)| *m > 0.0 && *g > 0.0 && g.is_finite())
        .collect();
    if usable.len() < 3 {
        return Err(format!("{} levels with a positive gap, need 3", usable.len()));
    }
    let (mesh, gap): (Vec<f64>, Vec<f64>) = usable.iter().copied().unzip();
    let line = fit_log_log(&mesh, &gap).ok_or_else(|| "mesh does not vary across levels".to_string())?;
    Ok(RateFit {
        slope: line.slope,
        r_squared: line.r_squared,
        points: usable.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub version: String,
    pub rng: String,
    pub path_label: String,
    pub seed: Option<u64>,
    pub intervals: usize,
    pub horizon: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionInfo {
    pub kind: crate::partition::PartitionKind,
    pub level_base: f64,
    pub nested: bool,
    pub n_min: usize,
    pub n_max: usize,
}

/// Full record of one experiment run. Contains no timestamp, so identical
/// configs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub kind: String,
    pub config: serde_json::Value,
    /// `sha256("blob <len>\0" + config JSON)`
    pub input_hash: String,
    /// SHA-256 of the path samples as little-endian f64.
    pub path_hash: String,
    pub environment: Environment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionInfo>,
    pub rows: Vec<LevelRow>,
    pub fitted_rate: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_rate_reason: Option<String>,
    pub flags: Vec<String>,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
    pub pass: bool,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.mesh.to_string(),
                r.osc.to_string(),
                cell(r.lhs),
                cell(r.rhs),
                cell(r.gap),
                cell(r.value_along_approx),
                cell(r.value_along_path),
                cell(r.qv_t),
                cell(r.residual),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn has_flag(&self, prefix: &str) -> bool {
        self.flags.iter().any(|f| f.starts_with(prefix))
    }
}

/// Hex SHA-256 of a git-style blob header plus `bytes`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
