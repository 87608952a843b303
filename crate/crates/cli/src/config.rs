//! Experiment configuration: a JSON object naming an example, an operation
//! and its parameters.
//!
//! ```json
//! {
//!   "example": "KSMinimal",
//!   "operation": "suspension-check",
//!   "parameters": { "rho": 0.5, "N": 1000, "pairs": [["0-", "0+"]] },
//!   "seed": 1,
//!   "output": { "path": "check.csv", "format": "csv" }
//! }
//! ```
//!
//! Random pairs (`parameters.random_pairs`) are drawn from ChaCha8 seeded
//! with `seed`, which makes sweeps reproducible across platforms.

use std::fmt;

use explab_core::catalog::ExampleId;
use explab_core::flowcore::{Point2, Profile, VectorFieldSpec, DEFAULT_DT};
use explab_core::separation::SeparationMode;
use explab_core::annulus_robust::DirectReturn;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const DEFAULT_QUAD_N: usize = 512;
pub const DEFAULT_RADII: usize = 32;
pub const DEFAULT_KOKSMA_GRID: usize = 4096;
pub const DEFAULT_CRITERION_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Simulate,
    SeparationSweep,
    SuspensionCheck,
    Series,
    Frechet,
    DenjoyKoksma,
    AnnulusPeriod,
    GreenCheck,
    RobustCriterion,
}

impl Operation {
    pub const ALL: [Operation; 9] = [
        Operation::Simulate,
        Operation::SeparationSweep,
        Operation::SuspensionCheck,
        Operation::Series,
        Operation::Frechet,
        Operation::DenjoyKoksma,
        Operation::AnnulusPeriod,
        Operation::GreenCheck,
        Operation::RobustCriterion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Simulate => "simulate",
            Operation::SeparationSweep => "separation-sweep",
            Operation::SuspensionCheck => "suspension-check",
            Operation::Series => "series",
            Operation::Frechet => "frechet",
            Operation::DenjoyKoksma => "denjoy-koksma",
            Operation::AnnulusPeriod => "annulus-period",
            Operation::GreenCheck => "green-check",
            Operation::RobustCriterion => "robust-criterion",
        }
    }

    /// Parameter keys the operation reads.
    fn accepts(self) -> &'static [&'static str] {
        match self {
            Operation::Simulate => &["start", "horizon", "dt"],
            Operation::SeparationSweep => &["delta", "horizon", "dt", "rho", "N", "mode", "pairs", "random_pairs"],
            Operation::SuspensionCheck => &["rho", "N", "mode", "pairs", "random_pairs"],
            Operation::Series => &["N", "threshold", "pairs", "random_pairs"],
            Operation::Frechet => &["horizon", "dt", "pairs", "random_pairs"],
            Operation::DenjoyKoksma => &["n", "grid"],
            Operation::AnnulusPeriod => &["radii", "quad_n", "direct"],
            Operation::GreenCheck => &["r1", "r2", "quad_n"],
            Operation::RobustCriterion => &["grid"],
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Overrides for a catalog constructor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero: Option<Point2>,
}

impl ExampleParams {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let flags = [
            ("alpha", self.alpha.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("x_min", self.x_min.is_some()),
            ("n_max", self.n_max.is_some()),
            ("j_max", self.j_max.is_some()),
            ("interval_length", self.interval_length.is_some()),
            ("zero", self.zero.is_some()),
        ];
        for (key, set) in flags {
            if set {
                keys.push(key);
            }
        }
        keys
    }
}

/// Keys of [`ExampleParams`] each example understands.
pub fn example_keys(id: ExampleId) -> &'static [&'static str] {
    match id {
        ExampleId::TorusFakeSaddle => &["alpha", "zero"],
        ExampleId::DiscReciprocal => &["x_min"],
        ExampleId::BandKnots => &["n_max"],
        ExampleId::DenjoySuspension => &["alpha", "interval_length", "n_max"],
        ExampleId::KSMinimal => &["alpha", "j_max"],
        ExampleId::RotationSmooth => &["alpha", "amplitude"],
        _ => &[],
    }
}

/// `f(r²)·(y, −x)` on an annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineAnnulus {
    pub profile: Profile,
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineBase {
    Interval { lo: f64, hi: f64 },
    Circle,
    Finite { points: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineMap {
    Identity,
    Halving,
    Negation,
    Rotation { alpha: f64 },
    /// Image indices into the points of a finite base.
    Permutation { images: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineTime {
    Constant { value: f64 },
    Reciprocal { floor: f64 },
    Quadratic,
    Sinusoidal {
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    Affine { intercept: f64, slope: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)>, default: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSuspension {
    pub base: InlineBase,
    pub map: InlineMap,
    pub time: InlineTime,
}

/// What the experiment runs on.
#[derive(Clone, Debug, PartialEq)]
pub enum ExampleRef {
    Named(ExampleId),
    Configured { id: ExampleId, params: ExampleParams },
    Field(VectorFieldSpec),
    Annulus(InlineAnnulus),
    Suspension(InlineSuspension),
}

impl ExampleRef {
    pub fn id(&self) -> Option<ExampleId> {
        match self {
            ExampleRef::Named(id) | ExampleRef::Configured { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub fn params(&self) -> ExampleParams {
        match self {
            ExampleRef::Configured { params, .. } => params.clone(),
            _ => ExampleParams::default(),
        }
    }
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleObject {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<ExampleId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<ExampleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<VectorFieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annulus: Option<InlineAnnulus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    suspension: Option<InlineSuspension>,
}

impl ExampleObject {
    fn resolve(self) -> Result<ExampleRef, String> {
        let ExampleObject {
            id,
            params,
            field,
            annulus,
            suspension,
        } = self;
        let inline = field.is_some() as u8 + annulus.is_some() as u8 + suspension.is_some() as u8;
        match (id, inline) {
            (Some(id), 0) => {
                let params = params.unwrap_or_default();
                let allowed = example_keys(id);
                if let Some(bad) = params.present().into_iter().find(|k| !allowed.contains(k)) {
                    return Err(format!("params.{bad} does not apply to {id} (accepts {allowed:?})"));
                }
                Ok(ExampleRef::Configured { id, params })
            }
            (None, 1) if params.is_none() => Ok(field
                .map(ExampleRef::Field)
                .or(annulus.map(ExampleRef::Annulus))
                .or(suspension.map(ExampleRef::Suspension))
                .expect("one inline flow is present")),
            (None, 1) => Err("params only apply to a catalog id".into()),
            _ => Err("give exactly one of `id`, `field`, `annulus`, `suspension`".into()),
        }
    }
}

impl Serialize for ExampleRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut object = ExampleObject::default();
        match self {
            ExampleRef::Named(id) => return serializer.serialize_str(id.name()),
            ExampleRef::Configured { id, params } => {
                object.id = Some(*id);
                object.params = Some(params.clone());
            }
            ExampleRef::Field(spec) => object.field = Some(spec.clone()),
            ExampleRef::Annulus(a) => object.annulus = Some(a.clone()),
            ExampleRef::Suspension(s) => object.suspension = Some(s.clone()),
        }
        object.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExampleRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RefVisitor;

        impl<'de> Visitor<'de> for RefVisitor {
            type Value = ExampleRef;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an example name or an object with `id`/`params` or an inline flow")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExampleRef, E> {
                v.parse().map(ExampleRef::Named).map_err(E::custom)
            }

            fn visit_map<M: MapAccess<'de>>(self, map: M) -> Result<ExampleRef, M::Error> {
                let object = ExampleObject::deserialize(de::value::MapAccessDeserializer::new(map))?;
                object.resolve().map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_any(RefVisitor)
    }
}

/// One end of a pair: a base coordinate, a named point such as `"0-"`, or a
/// planar point given as `[x, y]` or `{"x": .., "y": ..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Value(f64),
    Named(String),
    Array([f64; 2]),
    Point(Point2),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPairs {
    pub count: usize,
    /// Largest distance between the two points of a pair.
    pub spread: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SeparationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Endpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[Endpoint; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_pairs: Option<RandomPairs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct: Option<DirectReturn>,
}

impl Parameters {
    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("dt", self.dt.is_some()),
            ("delta", self.delta.is_some()),
            ("horizon", self.horizon.is_some()),
            ("rho", self.rho.is_some()),
            ("N", self.steps.is_some()),
            ("mode", self.mode.is_some()),
            ("start", self.start.is_some()),
            ("pairs", self.pairs.is_some()),
            ("random_pairs", self.random_pairs.is_some()),
            ("threshold", self.threshold.is_some()),
            ("n", self.n.is_some()),
            ("grid", self.grid.is_some()),
            ("quad_n", self.quad_n.is_some()),
            ("radii", self.radii.is_some()),
            ("r1", self.r1.is_some()),
            ("r2", self.r2.is_some()),
            ("direct", self.direct.is_some()),
        ];
        flags.into_iter().filter(|(_, set)| *set).map(|(k, _)| k).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub example: ExampleRef,
    pub operation: Operation,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses and validates a config, filling operation defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        // the location is already in `path`; strip serde_json's line/column suffix
        let message = inner.to_string();
        let message = message.split(" at line ").next().unwrap_or(&message).to_string();
        ConfigError::new(if path == "." { "<root>".to_string() } else { path }, message)
    })?;
    de.end()
        .map_err(|e| ConfigError::new("<root>", format!("trailing characters: {e}")))?;
    validate(config)
}

fn required<T>(value: Option<T>, key: &str, op: Operation) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::new(format!("parameters.{key}"), format!("required by {op}")))
}

fn validate(mut config: ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
    let op = config.operation;
    let accepted = op.accepts();
    if let Some(bad) = config.parameters.present().into_iter().find(|k| !accepted.contains(k)) {
        return Err(ConfigError::new(
            format!("parameters.{bad}"),
            format!("not used by {op} (accepts {accepted:?})"),
        ));
    }
    let suspension_like = match &config.example {
        ExampleRef::Named(id) | ExampleRef::Configured { id, .. } => !id.is_field(),
        ExampleRef::Suspension(_) => true,
        _ => false,
    };
    let p = &mut config.parameters;
    let needs_pairs = matches!(
        op,
        Operation::SeparationSweep | Operation::SuspensionCheck | Operation::Series | Operation::Frechet
    );
    if needs_pairs {
        match (&p.pairs, &p.random_pairs) {
            (None, None) => {
                return Err(ConfigError::new("parameters.pairs", format!("{op} needs `pairs` or `random_pairs`")))
            }
            (Some(pairs), _) if pairs.is_empty() => {
                return Err(ConfigError::new("parameters.pairs", "must not be empty"))
            }
            _ => {}
        }
        if let Some(random) = p.random_pairs {
            if random.count == 0 {
                return Err(ConfigError::new("parameters.random_pairs.count", "must be positive"));
            }
            if !(random.spread > 0.0) {
                return Err(ConfigError::new("parameters.random_pairs.spread", "must be positive"));
            }
            if config.seed.is_none() {
                return Err(ConfigError::new("seed", "required when pairs are randomized"));
            }
        }
    }
    match op {
        Operation::Simulate => {
            required(p.start.as_ref(), "start", op)?;
            required(p.horizon, "horizon", op)?;
            p.dt.get_or_insert(DEFAULT_DT);
        }
        Operation::SeparationSweep if !suspension_like => {
            required(p.delta, "delta", op)?;
            required(p.horizon, "horizon", op)?;
            p.dt.get_or_insert(DEFAULT_DT);
            for key in ["rho", "N"] {
                if p.present().contains(&key) {
                    return Err(ConfigError::new(format!("parameters.{key}"), "field sweeps take delta/horizon/dt"));
                }
            }
            p.mode.get_or_insert(SeparationMode::Forward);
        }
        Operation::SeparationSweep | Operation::SuspensionCheck => {
            required(p.rho, "rho", op)?;
            required(p.steps, "N", op)?;
            for key in ["delta", "horizon", "dt"] {
                if p.present().contains(&key) {
                    return Err(ConfigError::new(format!("parameters.{key}"), "suspension checks take rho/N"));
                }
            }
            p.mode.get_or_insert(SeparationMode::Forward);
        }
        Operation::Series => {
            required(p.steps, "N", op)?;
            p.threshold.get_or_insert(explab_core::separation::CERTIFICATE_THRESHOLD);
        }
        Operation::Frechet => {
            required(p.horizon, "horizon", op)?;
            p.dt.get_or_insert(DEFAULT_DT);
        }
        Operation::DenjoyKoksma => {
            required(p.n, "n", op)?;
            p.grid.get_or_insert(DEFAULT_KOKSMA_GRID);
        }
        Operation::AnnulusPeriod => {
            p.radii.get_or_insert(DEFAULT_RADII);
            p.quad_n.get_or_insert(DEFAULT_QUAD_N);
        }
        Operation::GreenCheck => {
            p.quad_n.get_or_insert(DEFAULT_QUAD_N);
        }
        Operation::RobustCriterion => {
            p.grid.get_or_insert(DEFAULT_CRITERION_GRID);
        }
    }
    Ok(config)
}

/// Pretty JSON for a config; `parse_config` reads it back unchanged.
pub fn emit_config(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("configs always serialize")
}
