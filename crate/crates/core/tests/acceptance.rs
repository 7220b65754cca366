//! Acceptance suite: one line per criterion.
//!
//! Runs at full size (T = 1, M = 2^20, dyadic ladder 6..16). Every library
//! value that has a closed form or a direct loop is checked against it first.
//! Exits non-zero when a criterion fails that is not listed in `EXPECTED_RED`.

use std::process::ExitCode;
use std::time::Instant;

use fqv_core::calculus::{
    change_of_variable_residual, cross_variation, isometry_level, ito_isometry_mc, qv_terminal, riemann_sum,
    rough_smooth_level, ItoMcOptions, Variant,
};
use fqv_core::experiment::{lebesgue_table, Generator, PartitionSpec, PathSpec, MESH_FLAG};
use fqv_core::functional::{builtin_names, fd_horizontal, fd_vertical, fd_vertical_hess};
use fqv_core::partition::{dyadic_sequence, lebesgue_sequence};
use fqv_core::path::{generate_brownian, generate_fbm, holder_estimate};
use fqv_core::{
    builtin, parse_functional, run_experiment, ExperimentConfig, ExperimentKind, Functional, Partition, PartitionKind,
    SampledPath,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const M: usize = 1 << 20;

type Lookup<'a> = Box<dyn Fn(usize) -> f64 + 'a>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
const EXACT: f64 = 1e-10;

/// Criteria known to fail at full size; see the README.
const EXPECTED_RED: &[usize] = &[5];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn f(name: &str) -> Functional {
    builtin(name).unwrap_or_else(|| panic!("no builtin {name}"))
}

fn brownian(seed: u64) -> SampledPath {
    generate_brownian(1, 1.0, M, seed).unwrap()
}

fn dyadic(path: &SampledPath, n: usize) -> Partition {
    dyadic_sequence(path.grid(), n, n).unwrap().finest().partition.clone()
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

fn points(path: &SampledPath, p: &Partition) -> Vec<f64> {
    p.indices().iter().map(|&k| path.coord(k, 0)).collect()
}

fn direct_qv(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Left sums of `ω dt` on the grid, one per grid point.
fn running_integral(path: &SampledPath) -> Vec<f64> {
    let dt = path.grid().dt();
    let mut out = vec![0.0; path.grid_size()];
    for k in 1..path.grid_size() {
        out[k] = out[k - 1] + path.coord(k - 1, 0) * dt;
    }
    out
}

fn exact_identities(w: &SampledPath) -> Outcome {
    let mut worst = 0.0f64;
    let id = f("identity");
    let sq = f("square");
    let x0 = w.coord(0, 0);
    let xt = w.coord(M, 0);
    for n in 6..=16 {
        let p = dyadic(w, n);
        for v in [Variant::AlongApprox, Variant::AlongPath] {
            let (s, _) = riemann_sum(&id, w, &p, v, false).unwrap();
            worst = worst.max(rel(s, xt - x0, xt.abs() + x0.abs()));
        }
        let qv = direct_qv(&points(w, &p));
        let (s, _) = riemann_sum(&sq, w, &p, Variant::AlongPath, false).unwrap();
        worst = worst.max(rel(s, xt * xt - x0 * x0 - qv, xt * xt + x0 * x0 + qv));
        let cov = change_of_variable_residual(&sq, w, &p).unwrap();
        worst = worst.max(cov.residual.abs() / cov.lhs.abs().max(qv));
    }
    let y = brownian(43);
    let p = dyadic(w, 16);
    let sum = SampledPath::new(
        w.grid(),
        1,
        w.values().iter().zip(y.values()).map(|(a, b)| a + b).collect(),
        "sum",
        None,
    )
    .unwrap();
    let diff = SampledPath::new(
        w.grid(),
        1,
        w.values().iter().zip(y.values()).map(|(a, b)| a - b).collect(),
        "diff",
        None,
    )
    .unwrap();
    let cross = cross_variation(w, &y, &p);
    let polar = (direct_qv(&points(&sum, &p)) - direct_qv(&points(&diff, &p))) / 4.0;
    worst = worst.max(rel(
        cross,
        polar,
        direct_qv(&points(w, &p)) + direct_qv(&points(&y, &p)),
    ));
    let joint = SampledPath::new(
        w.grid(),
        2,
        w.values().iter().zip(y.values()).flat_map(|(a, b)| [*a, *b]).collect(),
        "joint",
        None,
    )
    .unwrap();
    let matrix = qv_terminal(&joint, &p);
    worst = worst.max(rel(matrix[1], polar, matrix[0] + matrix[3]));
    worst = worst.max(rel(matrix[1], matrix[2], matrix[0] + matrix[3]));
    Outcome::new(
        worst <= EXACT,
        format!("max relative error {worst:.2e} (tol {EXACT:e})"),
    )
}

fn qv_brownian(w: &SampledPath) -> Outcome {
    let p = dyadic(w, 16);
    let lib = qv_terminal(w, &p)[0];
    let oracle = direct_qv(&points(w, &p));
    let agree = rel(lib, oracle, oracle) <= EXACT;
    Outcome::new(
        agree && (lib - 1.0).abs() < 0.05,
        format!("[w](1) = {lib:.5} at n=16, oracle {oracle:.5} (tol 0.05)"),
    )
}

/// `(lhs, rhs)` by direct loops for `x²` and `x · ∫x dt`.
fn isometry_oracle(name: &str, w: &SampledPath, p: &Partition, integral: &[f64]) -> (f64, f64) {
    let (value, grad): (Lookup, Lookup) = match name {
        "square" => (Box::new(|k| w.coord(k, 0).powi(2)), Box::new(|k| 2.0 * w.coord(k, 0))),
        "x_runint" => (Box::new(|k| w.coord(k, 0) * integral[k]), Box::new(|k| integral[k])),
        _ => unreachable!(),
    };
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (a, b) in p.cell_bounds() {
        lhs += (value(b) - value(a)).powi(2);
        rhs += (grad(a) * (w.coord(b, 0) - w.coord(a, 0))).powi(2);
    }
    (lhs, rhs)
}

fn isometry_dyadic(w: &SampledPath) -> Outcome {
    let integral = running_integral(w);
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["square", "x_runint"] {
        let func = f(name);
        let coarse = isometry_level(&func, w, &dyadic(w, 13), 13).unwrap();
        let p = dyadic(w, 16);
        let fine = isometry_level(&func, w, &p, 16).unwrap();
        let (lhs, rhs) = isometry_oracle(name, w, &p, &integral);
        let agree = rel(fine.lhs, lhs, lhs) <= 1e-9 && rel(fine.rhs, rhs, rhs) <= 1e-9 && fine.consistent();
        let ok = agree && fine.relative_gap < 0.10 && fine.gap.abs() < coarse.gap.abs();
        pass &= ok;
        parts.push(format!(
            "{name}: rel {:.2e} (tol 0.10), |gap| {:.2e} < {:.2e}",
            fine.relative_gap,
            fine.gap.abs(),
            coarse.gap.abs()
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn isometry_lebesgue(w: &SampledPath) -> Outcome {
    let integral = running_integral(w);
    let seq = lebesgue_sequence(w, 5, 9, 2.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["square", "x_runint"] {
        let func = f(name);
        let finest = seq
            .levels()
            .iter()
            .rev()
            .map(|l| (l, isometry_level(&func, w, &l.partition, l.n).unwrap()))
            .find(|(_, r)| r.lhs > 0.0);
        let Some((level, r)) = finest else {
            pass = false;
            parts.push(format!("{name}: no usable level"));
            continue;
        };
        let (lhs, rhs) = isometry_oracle(name, w, &level.partition, &integral);
        let agree = rel(r.lhs, lhs, lhs) <= 1e-9 && rel(r.rhs, rhs, rhs) <= 1e-9 && r.consistent();
        pass &= agree && r.relative_gap < 0.15;
        parts.push(format!(
            "{name}: rel {:.2e} at n={} (tol 0.15)",
            r.relative_gap, level.n
        ));
    }
    let mut cfg = ExperimentConfig::new(
        ExperimentKind::IsometryLebesgue,
        PathSpec::parse_mini("constant:0.5").unwrap(),
    );
    cfg.functional = json!("square");
    cfg.partition = PartitionSpec {
        kind: PartitionKind::Lebesgue,
        n_min: 5,
        n_max: 9,
        level_base: 2.0,
    };
    let report = run_experiment(&cfg).unwrap();
    let flagged = report.has_flag(MESH_FLAG) && report.pass;
    pass &= flagged;
    parts.push(format!("constant path flagged: {flagged}"));
    Outcome::new(pass, parts.join("; "))
}

/// Hitting-time count by a direct scan.
fn hitting_count(w: &SampledPath, threshold: f64) -> usize {
    let mut anchor = w.coord(0, 0);
    let mut last = 0;
    let mut points = 1;
    for k in 1..=M {
        let x = w.coord(k, 0);
        if (x - anchor).abs() >= threshold {
            points += 1;
            anchor = x;
            last = k;
        }
    }
    if last != M {
        points += 1;
    }
    points - 1
}

fn lebesgue_mesh(w: &SampledPath) -> Outcome {
    let rows = lebesgue_table(w, 4, 9, 2.0).unwrap();
    let mut pass = true;
    for r in &rows {
        pass &= r.m == hitting_count(w, 2f64.powi(-(r.n as i32)));
    }
    let monotone = rows.windows(2).all(|p| p[1].mesh <= p[0].mesh);
    pass &= monotone;
    let mut scaled = Vec::new();
    for r in rows.iter().filter(|r| (5..=8).contains(&r.n)) {
        pass &= (0.8..=1.2).contains(&r.scaled_count);
        scaled.push(format!("n={} {:.3}", r.n, r.scaled_count));
    }
    Outcome::new(
        pass,
        format!(
            "mesh nonincreasing: {monotone}; 4^-n (m-1): {} (band [0.8, 1.2])",
            scaled.join(", ")
        ),
    )
}

fn uniqueness(w: &SampledPath) -> Outcome {
    let p = dyadic(w, 16);
    let mut functionals: Vec<Functional> = ["square", "cube", "sin_x", "x_runint", "sin_square", "poly"]
        .into_iter()
        .map(f)
        .collect();
    functionals.push(parse_functional(&json!({"prod": [{"cyl": "x2"}, {"runint": "cos_x"}]})).unwrap());
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for func in &functionals {
        let (a, _) = riemann_sum(func, w, &p, Variant::AlongApprox, false).unwrap();
        let (b, _) = riemann_sum(func, w, &p, Variant::AlongPath, false).unwrap();
        let d = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if d >= worst {
            worst = d;
            worst_name = func.name().to_string();
        }
    }
    Outcome::new(
        worst < 1e-2,
        format!(
            "max relative difference {worst:.2e} ({worst_name}) over {} functionals (tol 1e-2)",
            functionals.len()
        ),
    )
}

fn remainder_exponent() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for hurst in [0.4, 0.5] {
        for seed in [7u64, 42] {
            let path = generate_fbm(1, hurst, 1.0, M, seed).unwrap();
            let mut spec = PathSpec::new(Generator::Fbm);
            spec.hurst = Some(hurst);
            spec.seed = Some(seed);
            let mut cfg = ExperimentConfig::new(ExperimentKind::Remainder, spec);
            cfg.functional = json!("square");
            let report = run_experiment(&cfg).unwrap();
            let nu = holder_estimate(&path, cfg.remainder.scales).unwrap().exponent;
            let samples = fqv_core::calculus::remainder_samples(
                &f("square"),
                &path,
                &cfg.remainder.scales.lags(),
                cfg.remainder.count,
                cfg.remainder.seed,
            )
            .unwrap();
            let oracle = samples.iter().all(|s| {
                let dt = path.grid().dt();
                let (k, l) = ((s.t / dt).round() as usize, (s.s / dt).round() as usize);
                let d = path.coord(l, 0) - path.coord(k, 0);
                (s.value - d * d).abs() <= 1e-12 * (1.0 + d * d)
            });
            let exponent = report.check("exponent").and_then(|c| c.value).unwrap_or(f64::NAN);
            let bound = nu * (1.0 + nu) - 0.15;
            pass &= oracle && exponent >= bound;
            parts.push(format!("H={hurst} seed={seed}: {exponent:.3} >= {bound:.3}"));
        }
    }
    for (label, spec) in [("linear", "linear:1"), ("brownian", "brownian:42")] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Remainder, PathSpec::parse_mini(spec).unwrap());
        cfg.functional = json!("identity");
        let report = run_experiment(&cfg).unwrap();
        let degenerate = report.details["fit"]["degenerate"].as_bool() == Some(true) && report.pass;
        pass &= degenerate;
        parts.push(format!("identity on {label} degenerate: {degenerate}"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn decomposition(w: &SampledPath) -> Outcome {
    let p = dyadic(w, 16);
    let xs = points(w, &p);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, power, coeff) in [("square", 2, 1.0), ("cube", 3, 3.0)] {
        let level = rough_smooth_level(&f(name), w, &p, 16).unwrap();
        let mut smooth = 0.0;
        let mut total = 0.0;
        for pair in xs.windows(2) {
            let d = pair[1] - pair[0];
            let ds = if power == 2 { d * d } else { coeff * pair[0] * d * d };
            smooth += ds * ds;
            total += (pair[1].powi(power) - pair[0].powi(power)).powi(2);
        }
        let oracle = smooth / total;
        pass &= rel(level.qv_ratio, oracle, oracle) <= 1e-8 && level.qv_ratio < 1e-3;
        parts.push(format!(
            "{name}: {:.2e} (oracle {oracle:.2e}, tol 1e-3)",
            level.qv_ratio
        ));
    }
    let id = rough_smooth_level(&f("identity"), w, &p, 16).unwrap();
    pass &= id.qv_ratio == 0.0;
    parts.push(format!("identity: {:e}", id.qv_ratio));
    Outcome::new(pass, parts.join("; "))
}

fn ito_mc() -> Outcome {
    let opts = ItoMcOptions {
        seeds: (1..=200).collect(),
        level: 14,
        intervals: M,
        horizon: 1.0,
    };
    let r = ito_isometry_mc(&f("square"), &opts).unwrap();
    Outcome::new(
        r.within(2.0),
        format!(
            "square, 200 seeds, n=14: lhs {:.4} rhs {:.4} |diff| {:.4} <= 2 x {:.4}",
            r.mean_lhs,
            r.mean_rhs,
            (r.mean_lhs - r.mean_rhs).abs(),
            r.stderr
        ),
    )
}

/// Ratios `e(h)/e(h/2)` and `e(h/2)/e(h/4)`; `None` when `e(h)` is at rounding level.
fn halving_ratios(err: impl Fn(f64) -> f64, h0: f64, scale: f64) -> Option<[f64; 2]> {
    let e = [err(h0), err(h0 / 2.0), err(h0 / 4.0)];
    (e[0] > 1e-9 * scale).then(|| [e[0] / e[1], e[1] / e[2]])
}

fn derivative_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut ratio_fail = Vec::new();
    let mut ratios_checked = 0;
    for (i, name) in builtin_names().iter().enumerate() {
        let func = f(name);
        let path = generate_brownian(2, 1.0, 1 << 10, 100 + i as u64).unwrap();
        let prepared = func.prepare(&path).unwrap();
        for point in 0..64 {
            let k = rng.random_range(1..path.intervals());
            let t = path.time(k);
            let jet = prepared.jet(k, 2).unwrap();
            let scale = 1.0 + jet.value.abs();
            let fd_g = fd_vertical(&func, t, &path, None).unwrap().estimate;
            let fd_h = fd_vertical_hess(&func, t, &path, None).unwrap().estimate;
            let fd_t = fd_horizontal(&func, t, &path, None).unwrap().estimate[0];
            let errs = fd_g
                .iter()
                .zip(&jet.grad)
                .chain(fd_h.iter().zip(&jet.hess))
                .map(|(a, b)| (a - b).abs())
                .chain([(fd_t - jet.horizontal).abs()]);
            for e in errs {
                if e / scale > worst {
                    worst = e / scale;
                    worst_at = format!("{name} t={t:.4}");
                }
            }
            if point < 4 {
                let vertical = halving_ratios(
                    |h| (fd_vertical(&func, t, &path, Some(h)).unwrap().estimate[0] - jet.grad[0]).abs(),
                    1e-2,
                    scale,
                );
                let horizontal = halving_ratios(
                    |h| (fd_horizontal(&func, t, &path, Some(h)).unwrap().estimate[0] - jet.horizontal).abs(),
                    1e-3,
                    scale,
                );
                for (kind, ratios, target) in [("central", vertical, 4.0), ("forward", horizontal, 2.0)] {
                    if let Some(rs) = ratios {
                        ratios_checked += 1;
                        if rs.iter().any(|r| (r / target - 1.0).abs() > 0.2) {
                            ratio_fail.push(format!("{name} {kind} {:.2}/{:.2}", rs[0], rs[1]));
                        }
                    }
                }
            }
        }
    }
    let pass = worst <= 1e-6 && ratio_fail.is_empty() && ratios_checked > 0;
    Outcome::new(
        pass,
        format!(
            "{} builtins x 64 points: max scaled error {worst:.2e} ({worst_at}, tol 1e-6); {ratios_checked} halving checks, failures: [{}]",
            builtin_names().len(),
            ratio_fail.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let mut configs = Vec::new();
    let mut iso = ExperimentConfig::new(ExperimentKind::Isometry, PathSpec::parse_mini("brownian:42").unwrap());
    iso.functional = json!("x_runint");
    configs.push(iso);
    let mut leb = ExperimentConfig::new(
        ExperimentKind::IsometryLebesgue,
        PathSpec::parse_mini("brownian:42").unwrap(),
    );
    leb.functional = json!("square");
    leb.partition = PartitionSpec {
        kind: PartitionKind::Lebesgue,
        n_min: 5,
        n_max: 9,
        level_base: 2.0,
    };
    configs.push(leb);
    let mut dec = ExperimentConfig::new(
        ExperimentKind::Decomposition,
        PathSpec::parse_mini("brownian:42").unwrap(),
    );
    dec.functional = json!("cube");
    configs.push(dec);
    let mut rem = ExperimentConfig::new(
        ExperimentKind::Remainder,
        PathSpec::parse_mini("fbm:0.4,seed=7").unwrap(),
    );
    rem.functional = json!("square");
    configs.push(rem);
    let mut pass = true;
    for cfg in &configs {
        let a = run_experiment(cfg).unwrap();
        let b = run_experiment(cfg).unwrap();
        pass &= a.csv_string() == b.csv_string() && a.json_string() == b.json_string();
        let mut par = cfg.clone();
        par.parallel = true;
        let c = run_experiment(&par).unwrap();
        pass &= a.csv_string() == c.csv_string() && a.rows == c.rows && a.checks == c.checks && a.details == c.details;
    }
    Outcome::new(
        pass,
        format!(
            "{} configs: reruns byte-identical, parallel equals sequential",
            configs.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let w = brownian(42);
    let criteria: Vec<Criterion> = vec![
        ("exact identities", Box::new(|| exact_identities(&w))),
        ("brownian quadratic variation", Box::new(|| qv_brownian(&w))),
        ("isometry, dyadic", Box::new(|| isometry_dyadic(&w))),
        ("isometry, lebesgue", Box::new(|| isometry_lebesgue(&w))),
        ("lebesgue mesh and count", Box::new(|| lebesgue_mesh(&w))),
        ("uniqueness of the limit", Box::new(|| uniqueness(&w))),
        ("remainder exponent", Box::new(remainder_exponent)),
        ("rough-smooth decomposition", Box::new(|| decomposition(&w))),
        ("ito isometry monte carlo", Box::new(ito_mc)),
        ("derivative oracles", Box::new(derivative_oracles)),
        ("determinism", Box::new(determinism)),
    ];
    let mut unexpected = Vec::new();
    for (i, (title, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        let t = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && EXPECTED_RED.contains(&id) {
            " [expected]"
        } else {
            ""
        };
        println!(
            "criterion {id:>2}: {status}{note} | {title} | {} | {:.1}s",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass && !EXPECTED_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
