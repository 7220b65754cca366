//! Experiment configuration: JSON schema, command-line mini-specs and validation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{parse_functional, AssumptionOptions, Functional};
use crate::partition::{dyadic_sequence, lebesgue_sequence, uniform_sequence, PartitionKind, PartitionSequence};
use crate::path::{
    generate_brownian, generate_brownian_correlated, generate_constant, generate_fbm, generate_smooth, read_binary,
    read_csv, Grid, SampledPath, ScaleRange, SmoothSpec, SmoothTerm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Qv,
    Isometry,
    IsometryLebesgue,
    Uniqueness,
    ChangeOfVariable,
    Remainder,
    Expansion,
    Decomposition,
    ItoMc,
    Assumptions,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Qv => "qv",
            ExperimentKind::Isometry => "isometry",
            ExperimentKind::IsometryLebesgue => "isometry_lebesgue",
            ExperimentKind::Uniqueness => "uniqueness",
            ExperimentKind::ChangeOfVariable => "change_of_variable",
            ExperimentKind::Remainder => "remainder",
            ExperimentKind::Expansion => "expansion",
            ExperimentKind::Decomposition => "decomposition",
            ExperimentKind::ItoMc => "ito_mc",
            ExperimentKind::Assumptions => "assumptions",
        }
    }

    /// Named tolerances this kind checks, with defaults.
    pub fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            ExperimentKind::Qv => &[("psd", 1e-12)],
            ExperimentKind::Isometry => &[("relative_gap", 0.10), ("consistency", 1e-10)],
            ExperimentKind::IsometryLebesgue => &[("relative_gap", 0.15), ("consistency", 1e-10)],
            ExperimentKind::Uniqueness => &[("relative_difference", 1e-2)],
            ExperimentKind::ChangeOfVariable => &[("residual", 1e-2)],
            ExperimentKind::Remainder => &[("exponent_slack", 0.15)],
            ExperimentKind::Expansion => &[("exponent_slack", 0.2)],
            ExperimentKind::Decomposition => &[("qv_ratio", 1e-3)],
            ExperimentKind::ItoMc => &[("stderr_multiple", 2.0)],
            ExperimentKind::Assumptions => &[],
        }
    }

    fn needs_levels(self) -> bool {
        !matches!(
            self,
            ExperimentKind::Remainder | ExperimentKind::Expansion | ExperimentKind::ItoMc
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Brownian,
    Fbm,
    Constant,
    Smooth,
    File,
}

fn default_dim() -> usize {
    1
}

fn default_horizon() -> f64 {
    1.0
}

fn default_intervals() -> usize {
    1 << 20
}

/// Which path to run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub generator: Generator,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<SmoothTerm>>,
    /// Row-major correlation matrix for Brownian paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<f64>>,
    /// Binary (`.fqvp`) or CSV path file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl PathSpec {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            dim: default_dim(),
            horizon: default_horizon(),
            intervals: default_intervals(),
            seed: None,
            hurst: None,
            level: None,
            terms: None,
            correlation: None,
            file: None,
        }
    }

    /// Parse `name[:value][,key=value...]`, e.g. `brownian:seed=42`,
    /// `constant:3.0`, `fbm:hurst=0.4,seed=7`, `linear:slope=2`, `sine:frequency=1`.
    pub fn parse_mini(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut out = match name {
            "brownian" => Self::new(Generator::Brownian),
            "fbm" => Self::new(Generator::Fbm),
            "constant" => Self::new(Generator::Constant),
            "linear" | "sine" | "smooth" => Self::new(Generator::Smooth),
            "file" => Self::new(Generator::File),
            other => {
                return Err(Error::config(
                    "path",
                    format!("unknown generator `{other}`; expected brownian, fbm, constant, linear, sine, file"),
                ))
            }
        };
        let mut slope = 1.0;
        let mut amplitude = 1.0;
        let mut frequency = 1.0;
        for (i, item) in rest.split(',').filter(|s| !s.is_empty()).enumerate() {
            let (key, value) = match item.split_once('=') {
                Some(kv) => kv,
                None if i == 0 => (positional_key(name), item),
                None => return Err(Error::config("path", format!("expected key=value, got `{item}`"))),
            };
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("path.{key}"), format!("`{value}` is not a number")))
            };
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|_| Error::config(format!("path.{key}"), format!("`{value}` is not an integer")))
            };
            match key {
                "seed" => out.seed = Some(int()?),
                "dim" => out.dim = int()? as usize,
                "grid" | "intervals" => out.intervals = int()? as usize,
                "horizon" => out.horizon = num()?,
                "hurst" => out.hurst = Some(num()?),
                "level" => out.level = Some(num()?),
                "slope" => slope = num()?,
                "amplitude" => amplitude = num()?,
                "frequency" => frequency = num()?,
                "file" => out.file = Some(PathBuf::from(value)),
                other => return Err(Error::config(format!("path.{other}"), "unknown key")),
            }
        }
        if out.generator == Generator::Smooth {
            out.terms = Some(match name {
                "sine" => SmoothSpec::sine(amplitude, frequency).terms,
                _ => SmoothSpec::linear(slope).terms,
            });
        }
        Ok(out)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.intervals, self.horizon).map_err(|e| Error::config("path.intervals", e.to_string()))
    }

    fn seed_for(&self, seed: Option<u64>) -> Result<u64> {
        seed.or(self.seed)
            .ok_or_else(|| Error::config("path.seed", format!("required for generator {:?}", self.generator)))
    }

    /// Build the path, overriding the seed when `seed` is set.
    pub fn build_with_seed(&self, seed: Option<u64>) -> Result<SampledPath> {
        fn at(field: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::config(format!("path.{field}"), e.to_string())
        }
        match self.generator {
            Generator::Brownian => {
                let s = self.seed_for(seed)?;
                match &self.correlation {
                    Some(c) => generate_brownian_correlated(self.dim, self.horizon, self.intervals, s, c)
                        .map_err(at("correlation")),
                    None => generate_brownian(self.dim, self.horizon, self.intervals, s).map_err(at("intervals")),
                }
            }
            Generator::Fbm => {
                let h = self
                    .hurst
                    .ok_or_else(|| Error::config("path.hurst", "required for generator fbm"))?;
                generate_fbm(self.dim, h, self.horizon, self.intervals, self.seed_for(seed)?).map_err(at("hurst"))
            }
            Generator::Constant => generate_constant(self.dim, self.horizon, self.intervals, self.level.unwrap_or(0.0))
                .map_err(at("intervals")),
            Generator::Smooth => {
                let terms = self
                    .terms
                    .clone()
                    .ok_or_else(|| Error::config("path.terms", "required for generator smooth"))?;
                generate_smooth(self.dim, self.horizon, self.intervals, &SmoothSpec { terms }).map_err(at("terms"))
            }
            Generator::File => {
                let file = self
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::config("path.file", "required for generator file"))?;
                let reader = std::fs::File::open(file)
                    .map_err(|e| Error::config("path.file", format!("{}: {e}", file.display())))?;
                let reader = std::io::BufReader::new(reader);
                let is_csv = file.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
                let loaded = if is_csv {
                    read_csv(reader, &file.display().to_string())
                } else {
                    read_binary(reader)
                };
                loaded.map_err(at("file"))
            }
        }
    }

    pub fn build(&self) -> Result<SampledPath> {
        self.build_with_seed(None)
    }
}

fn positional_key(name: &str) -> &'static str {
    match name {
        "constant" => "level",
        "fbm" => "hurst",
        "linear" => "slope",
        "sine" => "frequency",
        "file" => "file",
        _ => "seed",
    }
}

fn default_base() -> f64 {
    2.0
}

/// Partition ladder `n_min..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default = "default_base")]
    pub level_base: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            kind: PartitionKind::Dyadic,
            n_min: 6,
            n_max: 16,
            level_base: 2.0,
        }
    }
}

impl PartitionSpec {
    pub fn build(&self, path: &SampledPath) -> Result<PartitionSequence> {
        let wrap = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config("partition", other.to_string()),
        };
        if self.n_min > self.n_max {
            return Err(Error::config("partition.n_min", "must not exceed n_max"));
        }
        match self.kind {
            PartitionKind::Dyadic => dyadic_sequence(path.grid(), self.n_min, self.n_max).map_err(wrap),
            PartitionKind::Uniform => {
                if self.level_base.fract() != 0.0 || self.level_base < 2.0 {
                    return Err(Error::config(
                        "partition.level_base",
                        "uniform ladders need an integer base ≥ 2",
                    ));
                }
                uniform_sequence(path.grid(), self.n_min, self.n_max, self.level_base as usize).map_err(wrap)
            }
            PartitionKind::Lebesgue => {
                if self.level_base <= 1.0 {
                    return Err(Error::config("partition.level_base", "must exceed 1"));
                }
                lebesgue_sequence(path, self.n_min, self.n_max, self.level_base).map_err(wrap)
            }
        }
    }
}

fn default_count() -> usize {
    64
}

/// Sampling schedule for remainder and expansion fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemainderSpec {
    #[serde(default)]
    pub scales: ScaleRange,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RemainderSpec {
    fn default() -> Self {
        Self {
            scales: ScaleRange::default(),
            count: default_count(),
            seed: 0,
        }
    }
}

fn default_functional() -> serde_json::Value {
    serde_json::Value::String("identity".into())
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub path: PathSpec,
    /// Monte Carlo seeds; `ito_mc` only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_functional")]
    pub functional: serde_json::Value,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub remainder: RemainderSpec,
    #[serde(default)]
    pub assumptions: AssumptionOptions,
    /// Compute levels in parallel; results are identical to the sequential run.
    #[serde(default)]
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, path: PathSpec) -> Self {
        Self {
            kind,
            path,
            seeds: Vec::new(),
            functional: default_functional(),
            partition: PartitionSpec::default(),
            tolerances: BTreeMap::new(),
            remainder: RemainderSpec::default(),
            assumptions: AssumptionOptions::default(),
            parallel: false,
        }
    }

    /// Parse and validate JSON text; errors carry the field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse JSON text without the semantic checks of [`validate`](Self::validate).
    pub fn parse_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn parsed_functional(&self) -> Result<Functional> {
        parse_functional(&self.functional).map_err(|e| e.within("functional"))
    }

    /// Effective tolerance; user values override the kind's defaults.
    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            self.kind
                .default_tolerances()
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        })
    }

    /// Static checks that do not need the path.
    pub fn validate(&self) -> Result<()> {
        self.parsed_functional()?;
        let known = self.kind.default_tolerances();
        for (name, value) in &self.tolerances {
            if !known.iter().any(|(n, _)| n == name) {
                let names: Vec<&str> = known.iter().map(|(n, _)| *n).collect();
                return Err(Error::config(
                    format!("tolerances.{name}"),
                    format!(
                        "not checked by kind {}; known: [{}]",
                        self.kind.name(),
                        names.join(", ")
                    ),
                ));
            }
            if !value.is_finite() || *value < 0.0 {
                return Err(Error::config(
                    format!("tolerances.{name}"),
                    "must be a finite non-negative number",
                ));
            }
        }
        self.path.grid()?;
        if self.kind.needs_levels() {
            if self.partition.n_min > self.partition.n_max {
                return Err(Error::config("partition.n_min", "must not exceed n_max"));
            }
            if matches!(self.partition.kind, PartitionKind::Dyadic)
                && (self.partition.n_max >= usize::BITS as usize
                    || !self.path.intervals.is_multiple_of(1usize << self.partition.n_max))
            {
                return Err(Error::config(
                    "partition.n_max",
                    format!(
                        "2^{} does not divide the grid size {}",
                        self.partition.n_max, self.path.intervals
                    ),
                ));
            }
        }
        match self.kind {
            ExperimentKind::ItoMc => {
                if self.seeds.len() < 50 {
                    return Err(Error::config(
                        "seeds",
                        format!("need at least 50 seeds, got {}", self.seeds.len()),
                    ));
                }
                if self.path.generator != Generator::Brownian {
                    return Err(Error::config("path.generator", "ito_mc runs on Brownian paths"));
                }
            }
            ExperimentKind::Remainder | ExperimentKind::Expansion => {
                self.remainder
                    .scales
                    .validate(self.path.intervals, 3)
                    .map_err(|e| Error::config("remainder.scales", e.to_string()))?;
                if self.remainder.count < 16 {
                    return Err(Error::config("remainder.count", "need at least 16 samples per scale"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
