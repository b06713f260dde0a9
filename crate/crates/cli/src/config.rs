//! Flat TOML experiment configuration.
//!
//! A config file is a single table of top-level keys: `kind`, `seed`, `out`
//! and the parameters of that kind. Unknown keys are rejected. Command-line
//! `key=value` overrides are applied on top of the file before validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    NqmSweep,
    NqmAutodrop,
    OracleCheck,
    ScheduleValidate,
    Alg2Plan,
    Train,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::NqmSweep,
        Kind::NqmAutodrop,
        Kind::OracleCheck,
        Kind::ScheduleValidate,
        Kind::Alg2Plan,
        Kind::Train,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::NqmSweep => "nqm-sweep",
            Kind::NqmAutodrop => "nqm-autodrop",
            Kind::OracleCheck => "oracle-check",
            Kind::ScheduleValidate => "schedule-validate",
            Kind::Alg2Plan => "alg2-plan",
            Kind::Train => "train",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// Diagonal model `a_i = a_scale · i`, `σ_i² = sigma2`, shared by the
/// quadratic-model experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NqmSweepParams {
    pub dim: usize,
    pub a_scale: f64,
    pub sigma2: f64,
    pub alphas: Vec<f64>,
    pub iterations: u64,
    pub window: usize,
    /// Every coordinate of the starting point.
    pub x0: f64,
    /// Keep every `record_every`-th iteration in the CSV.
    pub record_every: u64,
}

impl Default for NqmSweepParams {
    fn default() -> Self {
        Self {
            dim: 200,
            a_scale: 0.1,
            sigma2: 1.0,
            alphas: vec![0.06, 0.03, 0.01, 0.001],
            iterations: 20_000,
            window: 20,
            x0: 1.0,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NqmAutodropParams {
    pub dim: usize,
    pub a_scale: f64,
    pub sigma2: f64,
    pub iterations: u64,
    pub x0: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub rho: f64,
    pub window: usize,
    /// Degrees.
    pub delta_threshold: f64,
    /// Rate of a fixed-rate comparison run sharing the noise stream; 0
    /// disables it.
    pub baseline_alpha: f64,
    pub record_every: u64,
}

impl Default for NqmAutodropParams {
    fn default() -> Self {
        Self {
            dim: 200,
            a_scale: 0.1,
            sigma2: 1.0,
            iterations: 20_000,
            x0: 1.0,
            alpha0: 0.06,
            alpha_min: 0.001,
            rho: 0.5,
            window: 20,
            delta_threshold: 0.01,
            baseline_alpha: 0.001,
            record_every: 10,
        }
    }
}

/// Either an explicit model (`a`, `sigma2`, `alpha`) or, when `a` is empty,
/// a random contraction-valid one of dimension `dim` drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleCheckParams {
    pub a: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub alpha: f64,
    pub dim: usize,
    /// 0 selects `ceil(10 / (α min a))`.
    pub burn_in: usize,
    pub samples: usize,
}

impl Default for OracleCheckParams {
    fn default() -> Self {
        Self {
            a: Vec::new(),
            sigma2: Vec::new(),
            alpha: 0.1,
            dim: 20,
            burn_in: 0,
            samples: 200_000,
        }
    }
}

/// An explicit schedule (`alphas` and `gaps`), or, when `alphas` is empty,
/// `phases` rates from `law` with gaps `ceil(kappa / α̂_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleValidateParams {
    pub alphas: Vec<f64>,
    pub gaps: Vec<u64>,
    pub alpha_prev: f64,
    pub law: String,
    pub phases: usize,
    pub kappa: f64,
}

impl Default for ScheduleValidateParams {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            gaps: Vec::new(),
            alpha_prev: 1.0,
            law: "inverse-linear".into(),
            phases: 20,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg2PlanParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub tau0: f64,
    pub phases: usize,
    pub law: String,
}

impl Default for Alg2PlanParams {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            gamma: 1.0,
            tau0: 0.5,
            phases: 50,
            law: "inverse-linear".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub classes: usize,
    pub input_dim: usize,
    pub samples: usize,
    pub eval_samples: usize,
    pub separation: f64,
    pub noise_scale: f64,
    /// Seed of the training blobs; evaluation blobs use `data_seed + 1`.
    pub data_seed: u64,
    /// Hidden width; 0 trains a multinomial logistic model.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta: f64,
    /// Unification factor: 0 heavy-ball, 1 Nesterov.
    pub s: f64,
    /// `autodrop`, `constant` or `piecewise`.
    pub scheduler: String,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub theta0: f64,
    pub theta_max: f64,
    pub rho: f64,
    pub n_d: usize,
    pub cooldown_epochs: usize,
    /// Phase rates and epoch counts for the piecewise scheduler.
    pub piecewise_alphas: Vec<f64>,
    pub piecewise_gaps: Vec<u64>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            classes: 2,
            input_dim: 20,
            samples: 2000,
            eval_samples: 2000,
            separation: 1.0,
            noise_scale: 1.0,
            data_seed: 1,
            hidden: 0,
            epochs: 60,
            batch_size: 32,
            beta: 0.9,
            s: 0.0,
            scheduler: "autodrop".into(),
            alpha0: 0.5,
            alpha_min: 1e-4,
            theta0: 3.0,
            theta_max: 30.0,
            rho: 0.1,
            n_d: 5,
            cooldown_epochs: 0,
            piecewise_alphas: Vec::new(),
            piecewise_gaps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    NqmSweep(NqmSweepParams),
    NqmAutodrop(NqmAutodropParams),
    OracleCheck(OracleCheckParams),
    ScheduleValidate(ScheduleValidateParams),
    Alg2Plan(Alg2PlanParams),
    Train(TrainParams),
}

impl Params {
    pub fn defaults(kind: Kind) -> Self {
        match kind {
            Kind::NqmSweep => Params::NqmSweep(Default::default()),
            Kind::NqmAutodrop => Params::NqmAutodrop(Default::default()),
            Kind::OracleCheck => Params::OracleCheck(Default::default()),
            Kind::ScheduleValidate => Params::ScheduleValidate(Default::default()),
            Kind::Alg2Plan => Params::Alg2Plan(Default::default()),
            Kind::Train => Params::Train(Default::default()),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Params::NqmSweep(_) => Kind::NqmSweep,
            Params::NqmAutodrop(_) => Kind::NqmAutodrop,
            Params::OracleCheck(_) => Kind::OracleCheck,
            Params::ScheduleValidate(_) => Kind::ScheduleValidate,
            Params::Alg2Plan(_) => Kind::Alg2Plan,
            Params::Train(_) => Kind::Train,
        }
    }

    fn from_table(kind: Kind, table: Table) -> CliResult<Self> {
        fn parse<T: DeserializeOwned>(table: Table) -> CliResult<T> {
            T::deserialize(Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
        }
        Ok(match kind {
            Kind::NqmSweep => Params::NqmSweep(parse(table)?),
            Kind::NqmAutodrop => Params::NqmAutodrop(parse(table)?),
            Kind::OracleCheck => Params::OracleCheck(parse(table)?),
            Kind::ScheduleValidate => Params::ScheduleValidate(parse(table)?),
            Kind::Alg2Plan => Params::Alg2Plan(parse(table)?),
            Kind::Train => Params::Train(parse(table)?),
        })
    }

    fn to_table(&self) -> Table {
        fn table<T: Serialize>(v: &T) -> Table {
            Table::try_from(v).expect("parameter structs serialize to a table")
        }
        match self {
            Params::NqmSweep(p) => table(p),
            Params::NqmAutodrop(p) => table(p),
            Params::OracleCheck(p) => table(p),
            Params::ScheduleValidate(p) => table(p),
            Params::Alg2Plan(p) => table(p),
            Params::Train(p) => table(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub params: Params,
}

impl ExperimentConfig {
    pub fn defaults(kind: Kind) -> Self {
        Self {
            seed: 0,
            out: PathBuf::from(format!("out/{kind}")),
            params: Params::defaults(kind),
        }
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    /// Builds a config from a parsed table. `kind` may come from the table
    /// itself or from the caller; if both are present they must agree.
    pub fn from_table(mut table: Table, kind: Option<Kind>) -> CliResult<Self> {
        let file_kind = match table.remove("kind") {
            Some(Value::String(s)) => Some(s.parse::<Kind>()?),
            Some(other) => return Err(CliError::Config(format!("`kind` must be a string, got {other}"))),
            None => None,
        };
        let kind = match (file_kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "config file is for `{a}` but `{b}` was requested"
                )))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(CliError::Config("missing `kind`".into())),
        };
        let seed = match table.remove("seed") {
            Some(Value::Integer(s)) if s >= 0 => s as u64,
            Some(other) => return Err(CliError::Config(format!("`seed` must be a non-negative integer, got {other}"))),
            None => 0,
        };
        let out = match table.remove("out") {
            Some(Value::String(s)) => PathBuf::from(s),
            Some(other) => return Err(CliError::Config(format!("`out` must be a string, got {other}"))),
            None => PathBuf::from(format!("out/{kind}")),
        };
        Ok(Self {
            seed,
            out,
            params: Params::from_table(kind, table)?,
        })
    }

    pub fn from_toml_str(text: &str, kind: Option<Kind>) -> CliResult<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Self::from_table(table, kind)
    }

    pub fn to_table(&self) -> Table {
        let mut table = Table::new();
        table.insert("kind".into(), Value::String(self.kind().name().into()));
        table.insert("seed".into(), Value::Integer(self.seed as i64));
        table.insert("out".into(), Value::String(self.out.to_string_lossy().into_owned()));
        table.extend(self.params.to_table());
        table
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_table()).expect("flat table serializes")
    }
}

/// Parses one `key=value` override. The value is read as a TOML value
/// (numbers, booleans, arrays, quoted strings); anything that does not parse
/// is taken as a bare string.
pub fn parse_override(text: &str) -> CliResult<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{text}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{text}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Assembles a config from optional file contents, overrides, and the
/// dedicated `--seed` / `--out` flags (which win over everything else).
pub fn assemble(
    kind: Kind,
    file_text: Option<&str>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> CliResult<ExperimentConfig> {
    let mut table = match file_text {
        Some(text) => text.parse::<Table>().map_err(|e| CliError::Config(e.to_string()))?,
        None => Table::new(),
    };
    for item in overrides {
        let (key, value) = parse_override(item)?;
        table.insert(key, value);
    }
    if let Some(seed) = seed {
        table.insert("seed".into(), Value::Integer(seed as i64));
    }
    if let Some(out) = out {
        table.insert("out".into(), Value::String(out.to_string_lossy().into_owned()));
    }
    ExperimentConfig::from_table(table, Some(kind))
}
