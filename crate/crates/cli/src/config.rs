//! Experiment configuration: a JSON document checked field by field.
//!
//! Parsing happens in two passes. Serde reads the raw shape (reals may be
//! written as `2.2pi`), then [`validate`] checks every command requirement
//! and reports all problems at once.

use std::fmt;
use std::path::PathBuf;

use inghamlab::analysis::SpectralMethod;
use inghamlab::{DirectionsRule, FamilySpec, IntervalSpec};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Density,
    Gram,
    BoundsSweep,
    Trace,
    DefectDecay,
    DdCondition,
    Sharpness,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Density,
        Command::Gram,
        Command::BoundsSweep,
        Command::Trace,
        Command::DefectDecay,
        Command::DdCondition,
        Command::Sharpness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Gram => "gram",
            Command::BoundsSweep => "bounds-sweep",
            Command::Trace => "trace",
            Command::DefectDecay => "defect-decay",
            Command::DdCondition => "dd-condition",
            Command::Sharpness => "sharpness",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Grids {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_r: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Exponents kept outside `Ω_r` on each side when `y`, `r` are defaulted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SpectralMethod>,
    /// Centered truncation for `gram`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_range: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// A validated experiment. Serializing it gives a document that
/// [`parse_config`] maps back to an equal value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub family: FamilySpec,
    pub directions: DirectionsRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalSpec>,
    pub grids: Grids,
    pub params: Params,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Single-line JSON echo used in artifact headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config is always serializable")
    }

    /// The interval, which validation guarantees for commands that use one.
    pub fn interval(&self) -> IntervalSpec {
        self.interval.expect("validated config carries an interval")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// A real written as a JSON number or as text such as `"2.2pi"`, `"-pi"`, `"1e-3"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

pub fn parse_real(text: &str) -> Option<f64> {
    let t = text.trim().to_ascii_lowercase();
    let (head, scale) = match t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        Some(h) => (h.trim().trim_end_matches('*').trim(), std::f64::consts::PI),
        None => (t.as_str(), 1.0),
    };
    let coeff = match head {
        "" | "+" if scale != 1.0 => 1.0,
        "-" if scale != 1.0 => -1.0,
        _ => head.parse::<f64>().ok()?,
    };
    let v = coeff * scale;
    v.is_finite().then_some(v)
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Real(v)),
            Repr::Text(s) => parse_real(&s)
                .map(Real)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot read '{s}' as a real number"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    seed: Option<u64>,
    family: Option<FamilySpec>,
    directions: Option<DirectionsRule>,
    interval: Option<RawInterval>,
    #[serde(default)]
    grids: RawGrids,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    a: Real,
    b: Real,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrids {
    n: Option<Vec<usize>>,
    lengths: Option<Vec<Real>>,
    r: Option<Vec<Real>>,
    big_r: Option<Vec<Real>>,
    delta: Option<Vec<Real>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    y: Option<Real>,
    r: Option<Real>,
    margin: Option<usize>,
    method: Option<SpectralMethod>,
    n: Option<usize>,
    gamma_prime: Option<Real>,
    m: Option<usize>,
    n_range: Option<(i64, i64)>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<Format>,
}

fn reals(v: Option<Vec<Real>>) -> Option<Vec<f64>> {
    v.map(|v| v.into_iter().map(|r| r.0).collect())
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigErrors(vec![format!("config: {e}")]))?;
    validate(raw)
}

/// What each command needs, beyond a family.
struct Needs {
    interval: bool,
    grids: &'static [&'static str],
}

fn needs(c: Command) -> Needs {
    let (interval, grids): (bool, &[&str]) = match c {
        Command::Density => (false, &["r"]),
        Command::Gram => (true, &[]),
        Command::BoundsSweep => (true, &["n"]),
        Command::Trace => (true, &["big_r"]),
        Command::DefectDecay => (true, &["big_r"]),
        Command::DdCondition => (true, &["delta"]),
        Command::Sharpness => (false, &["n", "lengths"]),
    };
    Needs { interval, grids }
}

fn check_increasing<T: PartialOrd + Copy>(name: &str, grid: &[T], errors: &mut Vec<String>) {
    if grid.is_empty() {
        errors.push(format!("grids.{name}: grid is empty"));
    } else if grid.windows(2).any(|w| !(w[1] > w[0])) {
        errors.push(format!("grids.{name}: grid not increasing"));
    }
}

fn check_positive(name: &str, grid: &[f64], errors: &mut Vec<String>) {
    if grid.iter().any(|v| !(*v > 0.0)) {
        errors.push(format!("grids.{name}: values must be positive"));
    }
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let command = match raw.command.as_deref() {
        None => {
            errors.push("command: missing required field".to_string());
            None
        }
        Some(s) => {
            let c = Command::parse(s);
            if c.is_none() {
                let known: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                errors.push(format!("command: unknown command '{s}' (expected one of {})", known.join(", ")));
            }
            c
        }
    };
    if raw.family.is_none() {
        errors.push("family: missing required field".to_string());
    }
    let interval = match raw.interval {
        Some(RawInterval { a, b }) => match IntervalSpec::new(a.0, b.0) {
            Ok(i) => Some(i),
            Err(e) => {
                errors.push(format!("interval: {e}"));
                None
            }
        },
        None => None,
    };
    let grids = Grids {
        n: raw.grids.n,
        lengths: reals(raw.grids.lengths),
        r: reals(raw.grids.r),
        big_r: reals(raw.grids.big_r),
        delta: reals(raw.grids.delta),
    };
    if let Some(g) = &grids.n {
        check_increasing("n", g, &mut errors);
        if g.first() == Some(&0) {
            errors.push("grids.n: truncations must be positive".into());
        }
    }
    for (name, grid) in [("lengths", &grids.lengths), ("r", &grids.r), ("big_r", &grids.big_r), ("delta", &grids.delta)] {
        if let Some(g) = grid {
            check_increasing(name, g, &mut errors);
            check_positive(name, g, &mut errors);
        }
    }
    let params = Params {
        y: raw.params.y.map(|v| v.0),
        r: raw.params.r.map(|v| v.0),
        margin: raw.params.margin,
        method: raw.params.method,
        n: raw.params.n,
        gamma_prime: raw.params.gamma_prime.map(|v| v.0),
        m: raw.params.m,
        n_range: raw.params.n_range,
    };
    if let Some(r) = params.r {
        if !(r > 0.0) {
            errors.push("params.r: must be positive".into());
        }
    }
    if let Some((lo, hi)) = params.n_range {
        if lo > hi {
            errors.push("params.n_range: lower end exceeds upper end".into());
        }
    }

    if let Some(c) = command {
        let need = needs(c);
        if need.interval && interval.is_none() {
            errors.push(format!("interval: missing required field for {c}"));
        }
        for g in need.grids {
            let present = match *g {
                "n" => grids.n.is_some(),
                "lengths" => grids.lengths.is_some(),
                "r" => grids.r.is_some(),
                "big_r" => grids.big_r.is_some(),
                _ => grids.delta.is_some(),
            };
            if !present {
                errors.push(format!("grids.{g}: missing required field for {c}"));
            }
        }
        match c {
            Command::DdCondition => {
                if params.gamma_prime.is_none() {
                    errors.push("params.gamma_prime: missing required field for dd-condition".into());
                }
                if params.m.is_none() {
                    errors.push("params.m: missing required field for dd-condition".into());
                }
                if !matches!(raw.family, None | Some(FamilySpec::ClusteredPairs { .. })) {
                    errors.push("family: dd-condition needs kind clustered-pairs".into());
                }
            }
            Command::Sharpness if !matches!(raw.directions, Some(DirectionsRule::Partition { .. })) => {
                errors.push("directions: sharpness needs rule partition".into());
            }
            _ => {}
        }
    }

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(ExperimentConfig {
        command: command.expect("checked"),
        seed: raw.seed.unwrap_or(0),
        family: raw.family.expect("checked"),
        directions: raw.directions.unwrap_or_default(),
        interval,
        grids,
        params,
        output: OutputSpec { path: raw.output.path, format: raw.output.format.unwrap_or_default() },
    })
}
