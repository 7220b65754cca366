use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use fqv_core::calculus::rough_smooth_level;
use fqv_core::experiment::{
    lebesgue_table, sha256_hex, write_lebesgue_csv, ConvergenceReport, ExperimentConfig, ExperimentKind, Generator,
    PartitionSpec, PathSpec,
};
use fqv_core::partition::PartitionKind;
use fqv_core::path::{holder_estimate, write_binary, write_csv, ScaleRange};
use fqv_core::{run_experiment, Error};

use crate::args::{
    Command, ExperimentArgs, GenerateArgs, ItoMcArgs, LebesgueArgs, PartitionArgs, RemainderArgs, ReportArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Outcome of a successful run: whether every tolerance check passed.
pub type Passed = bool;

pub fn dispatch(command: Command) -> CliResult<Passed> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Partition(a) => partition(a),
        Command::Qv(a) => experiment("qv", &a, ExperimentKind::Qv, |_| Ok(())),
        Command::Integrate(a) => experiment("integrate", &a, ExperimentKind::ChangeOfVariable, |_| Ok(())),
        Command::Isometry(a) => experiment("isometry", &a, ExperimentKind::Isometry, |_| Ok(())),
        Command::Lebesgue(a) => lebesgue(a),
        Command::Uniqueness(a) => experiment("uniqueness", &a, ExperimentKind::Uniqueness, |_| Ok(())),
        Command::Remainder(a) => remainder(a),
        Command::Decompose(a) => experiment("decompose", &a, ExperimentKind::Decomposition, |_| Ok(())),
        Command::ItoMc(a) => ito_mc(a),
        Command::Assumptions(a) => experiment("assumptions", &a, ExperimentKind::Assumptions, |_| Ok(())),
        Command::Report(a) => report(a),
    }
}

fn parse_range(flag: &str, text: &str) -> CliResult<(usize, usize, Option<f64>)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Usage(format!("--{flag} expects A:B or A:B:BASE, got `{text}`"));
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let a = parts[0].parse().map_err(|_| bad())?;
    let b = parts[1].parse().map_err(|_| bad())?;
    let base = parts.get(2).map(|s| s.parse::<f64>()).transpose().map_err(|_| bad())?;
    Ok((a, b, base))
}

fn parse_functional_flag(spec: &str) -> CliResult<Value> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') || trimmed.starts_with('"') {
        serde_json::from_str(trimmed).map_err(|e| CliError::Usage(format!("--functional is not valid JSON: {e}")))
    } else {
        Ok(Value::String(trimmed.to_string()))
    }
}

fn apply_path_overrides(spec: &mut PathSpec, seed: Option<u64>, grid: Option<usize>, horizon: Option<f64>) {
    if seed.is_some() {
        spec.seed = seed;
    }
    if let Some(m) = grid {
        spec.intervals = m;
    }
    if let Some(t) = horizon {
        spec.horizon = t;
    }
}

fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Core(Error::config("", format!("{}: {e}", path.display()))))?;
    Ok(ExperimentConfig::parse_json(&text)?)
}

/// Config from `--config` (if any) with every flag applied on top; not yet validated.
fn build_config(args: &ExperimentArgs, kind: ExperimentKind) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(file) => {
            let mut c = read_config(file)?;
            let lebesgue_pair = matches!(
                (c.kind, kind),
                (ExperimentKind::IsometryLebesgue, ExperimentKind::Isometry)
                    | (ExperimentKind::Expansion, ExperimentKind::Remainder)
            );
            if !lebesgue_pair {
                c.kind = kind;
            }
            c
        }
        None => {
            let spec = args
                .path
                .as_deref()
                .ok_or_else(|| CliError::Usage("either --config or --path is required".into()))?;
            ExperimentConfig::new(kind, PathSpec::parse_mini(spec)?)
        }
    };
    if let (Some(spec), Some(_)) = (&args.path, &args.config) {
        cfg.path = PathSpec::parse_mini(spec)?;
    }
    apply_path_overrides(&mut cfg.path, args.seed, args.grid, args.horizon);
    if let Some(d) = &args.dyadic {
        let (a, b, base) = parse_range("dyadic", d)?;
        if base.is_some() {
            return Err(CliError::Usage("--dyadic takes A:B".into()));
        }
        cfg.partition = PartitionSpec {
            kind: PartitionKind::Dyadic,
            n_min: a,
            n_max: b,
            level_base: 2.0,
        };
    }
    if let Some(l) = &args.lebesgue {
        let (a, b, base) = parse_range("lebesgue", l)?;
        cfg.partition = PartitionSpec {
            kind: PartitionKind::Lebesgue,
            n_min: a,
            n_max: b,
            level_base: base.unwrap_or(2.0),
        };
    }
    if cfg.kind == ExperimentKind::Isometry && cfg.partition.kind == PartitionKind::Lebesgue {
        cfg.kind = ExperimentKind::IsometryLebesgue;
    }
    if let Some(f) = &args.functional {
        cfg.functional = parse_functional_flag(f)?;
    }
    for t in &args.tol {
        let (name, value) = t
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--tol expects NAME=VAL, got `{t}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| CliError::Usage(format!("--tol {name}: `{value}` is not a number")))?;
        cfg.tolerances.insert(name.to_string(), value);
    }
    if args.parallel {
        cfg.parallel = true;
    }
    Ok(cfg)
}

/// Files written by one invocation, recorded in `manifest.json`.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }

    fn finish(mut self, command: &str, input_hash: Option<&str>) -> CliResult<()> {
        self.files.sort();
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(name, hash, bytes)| json!({ "name": name, "sha256": hash, "bytes": bytes }))
            .collect();
        let manifest = json!({
            "tool": "fqv",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "created_unix": created,
            "input_hash": input_hash,
            "files": files,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        println!(
            "wrote {} files and manifest.json to {}",
            self.files.len(),
            self.dir.display()
        );
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

fn print_report(r: &ConvergenceReport) {
    println!(
        "{} on {} (M={}, T={})",
        r.kind, r.environment.path_label, r.environment.intervals, r.environment.horizon
    );
    if !r.rows.is_empty() {
        println!(
            "{:>3} {:>8} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
            "n", "cells", "mesh", "osc", "lhs", "rhs", "gap", "qv_T"
        );
        for row in &r.rows {
            println!(
                "{:>3} {:>8} {:>13.6e} {:>13.6e} {:>13} {:>13} {:>13} {:>13}",
                row.n,
                row.cells,
                row.mesh,
                row.osc,
                fmt_opt(row.lhs),
                fmt_opt(row.rhs),
                fmt_opt(row.gap),
                fmt_opt(row.qv_t)
            );
        }
    }
    if let Some(rate) = &r.fitted_rate {
        println!(
            "fitted rate: slope {:.4} (r² {:.4}, {} levels)",
            rate.slope, rate.r_squared, rate.points
        );
    }
    for flag in &r.flags {
        println!("flag: {flag}");
    }
    for c in &r.checks {
        println!(
            "check {:<20} {} value={} tol={} ({})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            fmt_opt(c.value),
            fmt_opt(c.tolerance),
            c.detail
        );
    }
    println!("{}", if r.pass { "PASS" } else { "FAIL" });
}

fn experiment(
    command: &str,
    args: &ExperimentArgs,
    kind: ExperimentKind,
    adjust: impl FnOnce(&mut ExperimentConfig) -> CliResult<()>,
) -> CliResult<Passed> {
    let mut cfg = build_config(args, kind)?;
    adjust(&mut cfg)?;
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    print_report(&report);
    let mut out = Outputs::new(&args.out)?;
    out.write("report.json", report.json_string().as_bytes())?;
    out.write("report.csv", report.csv_string().as_bytes())?;
    if cfg.kind == ExperimentKind::Decomposition {
        out.write("decomposition.csv", &decomposition_series(&cfg)?)?;
    }
    out.finish(command, Some(&report.input_hash))?;
    Ok(report.pass)
}

/// Series of the decomposition at the finest level: `t, path, rough, smooth, phi_1..phi_d`.
fn decomposition_series(cfg: &ExperimentConfig) -> CliResult<Vec<u8>> {
    let path = cfg.path.build()?;
    let f = cfg.parsed_functional()?;
    let seq = cfg.partition.build(&path)?;
    let finest = seq.finest();
    let level = rough_smooth_level(&f, &path, &finest.partition, finest.n)?;
    let d = path.dim();
    let mut text = String::from("t,path,rough,smooth");
    for i in 1..=d {
        text.push_str(&format!(",phi{i}"));
    }
    text.push('\n');
    for i in 0..level.times.len() {
        text.push_str(&format!(
            "{},{},{},{}",
            level.times[i], level.path[i], level.rough[i], level.smooth[i]
        ));
        // φ lives on cells; the last point repeats the last cell's value
        let cell = i.min(level.times.len() - 2);
        for j in 0..d {
            text.push_str(&format!(",{}", level.phi[cell * d + j]));
        }
        text.push('\n');
    }
    Ok(text.into_bytes())
}

fn remainder(a: RemainderArgs) -> CliResult<Passed> {
    let kind = if a.expansion {
        ExperimentKind::Expansion
    } else {
        ExperimentKind::Remainder
    };
    let scales = a.scales.as_deref().map(|s| parse_range("scales", s)).transpose()?;
    let command = if a.expansion {
        "remainder --expansion"
    } else {
        "remainder"
    };
    experiment(command, &a.common, kind, |cfg| {
        if a.expansion {
            cfg.kind = ExperimentKind::Expansion;
        }
        if let Some((lo, hi, _)) = scales {
            cfg.remainder.scales = ScaleRange::new(lo as u32, hi as u32);
        }
        if let Some(n) = a.count {
            cfg.remainder.count = n;
        }
        Ok(())
    })
}

fn ito_mc(a: ItoMcArgs) -> CliResult<Passed> {
    let mut common = a.common.clone();
    if common.config.is_none() {
        // the mini-spec needs a seed; the Monte Carlo seeds replace it
        common.path.get_or_insert_with(|| "brownian:seed=0".into());
        common.grid.get_or_insert(1 << 16);
        common.dyadic.get_or_insert_with(|| "14:14".into());
    }
    let seeds = match a.seeds.as_deref().map(|s| parse_range("seeds", s)).transpose()? {
        Some((lo, hi, _)) => Some((lo as u64..=hi as u64).collect::<Vec<u64>>()),
        None if common.config.is_none() => Some((1..=200).collect()),
        None => None,
    };
    experiment("ito-mc", &common, ExperimentKind::ItoMc, |cfg| {
        if let Some(s) = seeds {
            cfg.seeds = s;
        }
        if cfg.path.generator != Generator::Brownian {
            return Err(CliError::Usage("ito-mc runs on Brownian paths".into()));
        }
        Ok(())
    })
}

fn generate(a: GenerateArgs) -> CliResult<Passed> {
    let mut spec = PathSpec::parse_mini(&a.path)?;
    apply_path_overrides(&mut spec, a.seed, a.grid, a.horizon);
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    let path = spec.build()?;
    let mut out = Outputs::new(&a.out)?;
    let mut bin = Vec::new();
    write_binary(&path, &mut bin)?;
    out.write("path.fqvp", &bin)?;
    let mut csv = Vec::new();
    write_csv(&path, &mut csv)?;
    out.write("path.csv", &csv)?;
    println!(
        "{} (d={}, M={}, T={})",
        path.label(),
        path.dim(),
        path.intervals(),
        path.horizon()
    );
    if let Ok(h) = holder_estimate(&path, ScaleRange::default()) {
        println!("holder exponent estimate {:.4} (r² {:.4})", h.exponent, h.r_squared);
    }
    out.finish("generate", None)?;
    Ok(true)
}

fn partition(a: PartitionArgs) -> CliResult<Passed> {
    let mut spec = PathSpec::parse_mini(&a.path)?;
    apply_path_overrides(&mut spec, a.seed, a.grid, a.horizon);
    let path = spec.build()?;
    let pspec = match (&a.dyadic, &a.lebesgue) {
        (_, Some(l)) => {
            let (lo, hi, base) = parse_range("lebesgue", l)?;
            PartitionSpec {
                kind: PartitionKind::Lebesgue,
                n_min: lo,
                n_max: hi,
                level_base: base.unwrap_or(2.0),
            }
        }
        (Some(d), None) => {
            let (lo, hi, _) = parse_range("dyadic", d)?;
            PartitionSpec {
                kind: PartitionKind::Dyadic,
                n_min: lo,
                n_max: hi,
                level_base: 2.0,
            }
        }
        (None, None) => return Err(CliError::Usage("one of --dyadic or --lebesgue is required".into())),
    };
    let seq = pspec.build(&path)?;
    println!("{:>3} {:>8} {:>13}", "n", "cells", "mesh");
    for l in seq.levels() {
        println!("{:>3} {:>8} {:>13.6e}", l.n, l.partition.cells(), l.partition.mesh());
    }
    println!("nested: {}", seq.nested());
    let mut out = Outputs::new(&a.out)?;
    let mut csv = Vec::new();
    seq.write_csv(&mut csv)?;
    out.write("partitions.csv", &csv)?;
    let mut js = serde_json::to_string_pretty(&seq.to_json()).expect("partition json");
    js.push('\n');
    out.write("partitions.json", js.as_bytes())?;
    out.finish("partition", None)?;
    Ok(true)
}

fn lebesgue(a: LebesgueArgs) -> CliResult<Passed> {
    let mut spec = PathSpec::parse_mini(&a.path)?;
    apply_path_overrides(&mut spec, a.seed, a.grid, a.horizon);
    let path = spec.build()?;
    let (lo, hi, base) = parse_range("levels", &a.levels)?;
    let base = base.unwrap_or(2.0);
    let rows = lebesgue_table(&path, lo, hi, base)?;
    println!("{:>3} {:>9} {:>13} {:>13} {:>13}", "n", "m(n)", "mesh", "osc", "scaled");
    for r in &rows {
        println!(
            "{:>3} {:>9} {:>13.6e} {:>13.6e} {:>13.6}",
            r.n, r.m, r.mesh, r.osc, r.scaled_count
        );
    }
    let mut out = Outputs::new(&a.out)?;
    let mut csv = Vec::new();
    write_lebesgue_csv(&rows, &mut csv)?;
    out.write("lebesgue.csv", &csv)?;
    out.finish("lebesgue", None)?;
    Ok(true)
}

fn report(a: ReportArgs) -> CliResult<Passed> {
    let text = fs::read_to_string(&a.report)
        .map_err(|e| CliError::Core(Error::config("", format!("{}: {e}", a.report.display()))))?;
    let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
    let kind = v["kind"]
        .as_str()
        .ok_or_else(|| CliError::Core(Error::config("kind", "not a report file")))?;
    println!("{kind} report, input {}", v["input_hash"].as_str().unwrap_or("?"));
    if let Some(rows) = v["rows"].as_array() {
        println!("{:>3} {:>13} {:>13} {:>13} {:>13}", "n", "mesh", "lhs", "rhs", "gap");
        for r in rows {
            println!(
                "{:>3} {:>13} {:>13} {:>13} {:>13}",
                r["n"],
                fmt_opt(r["mesh"].as_f64()),
                fmt_opt(r["lhs"].as_f64()),
                fmt_opt(r["rhs"].as_f64()),
                fmt_opt(r["gap"].as_f64())
            );
        }
    }
    for flag in v["flags"].as_array().into_iter().flatten() {
        println!("flag: {}", flag.as_str().unwrap_or_default());
    }
    for c in v["checks"].as_array().into_iter().flatten() {
        println!(
            "check {:<20} {}",
            c["name"].as_str().unwrap_or("?"),
            if c["pass"].as_bool() == Some(true) {
                "pass"
            } else {
                "FAIL"
            }
        );
    }
    let pass = v["pass"].as_bool().unwrap_or(false);
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("dyadic", "4:8").unwrap(), (4, 8, None));
        assert_eq!(parse_range("lebesgue", "5:9:3").unwrap(), (5, 9, Some(3.0)));
        assert!(parse_range("dyadic", "4").is_err());
        assert!(parse_range("dyadic", "a:b").is_err());
    }

    #[test]
    fn functional_flag_forms() {
        assert_eq!(parse_functional_flag("square").unwrap(), Value::String("square".into()));
        assert!(parse_functional_flag(r#"{"cyl":"x"}"#).unwrap().is_object());
        assert!(parse_functional_flag("{oops").is_err());
    }
}
