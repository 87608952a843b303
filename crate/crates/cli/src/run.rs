//! Builds the configured flow, runs the operation and writes its report.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use explab_core::annulus_robust::{
    div_z_grid, green_check, orbit_period_flux, robust_criterion, AnnulusError, ConservativeFieldSpec, GreenReport,
    GridSample, OrbitCurve,
};
use explab_core::catalog::{
    band_knots_suspension, denjoy_suspension, disc_reciprocal_suspension, identity_suspension, ks_minimal_suspension,
    moebius_suspension, periodic_band, rotation_smooth_suspension, torus_fake_saddle, ExampleId,
    DEFAULT_DENJOY_N_MAX, DEFAULT_KS_J_MAX,
};
use explab_core::flowcore::{
    domain_distance, sample_trajectory, Domain, FieldRule, FlowError, Point2, Trajectory, VectorFieldSpec,
};
use explab_core::separation::{
    denjoy_koksma_gap, discrete_frechet, divergence_partial_sums, pair_sweep, return_time_gaps, KoksmaRow, Pair,
    SeparationError, SweepReport, SweepTarget,
};
use explab_core::suspension::{
    BaseMap, BaseSpace, ClosedForm, PiecewiseLinear, ReturnTime, SuspState, SuspensionError, SuspensionFlow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{
    ConfigError, Endpoint, ExampleRef, ExperimentConfig, Format, InlineBase, InlineMap, InlineSuspension, InlineTime,
    Operation, RandomPairs,
};

pub const GOLDEN: f64 = 0.618_033_988_749_894_9;
const DEFAULT_X_MIN: f64 = 1e-12;
const DEFAULT_BAND_N_MAX: u32 = 30;
const DEFAULT_AMPLITUDE: f64 = 0.3;
const DEFAULT_DENJOY_LENGTH: f64 = 0.1;
const RANDOM_PAIR_ATTEMPTS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }

    fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        RunError::Config(ConfigError::new(path, message))
    }
}

impl From<SuspensionError> for RunError {
    fn from(e: SuspensionError) -> Self {
        match e {
            SuspensionError::InvalidBase(_) | SuspensionError::InvalidParameter(_) => {
                RunError::config("example", e.to_string())
            }
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<SeparationError> for RunError {
    fn from(e: SeparationError) -> Self {
        match e {
            SeparationError::InvalidParameter(_) | SeparationError::Unsupported(_) => {
                RunError::config("parameters", e.to_string())
            }
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<AnnulusError> for RunError {
    fn from(e: AnnulusError) -> Self {
        match e {
            AnnulusError::InvalidParameter(_) | AnnulusError::NotAnnulus(_) => RunError::config("parameters", e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<FlowError> for RunError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::InvalidParameter(_) => RunError::config("parameters", e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

/// A constructed flow plus the named base points it exposes.
pub enum Built {
    Field(VectorFieldSpec),
    Suspension {
        flow: SuspensionFlow,
        names: Vec<(&'static str, f64)>,
    },
}

fn build_base(base: &InlineBase) -> Result<BaseSpace, RunError> {
    Ok(match base {
        InlineBase::Interval { lo, hi } => BaseSpace::interval(*lo, *hi)?,
        InlineBase::Circle => BaseSpace::Circle,
        InlineBase::Finite { points } => BaseSpace::finite(points.clone())?,
    })
}

fn build_inline_suspension(s: &InlineSuspension) -> Result<SuspensionFlow, RunError> {
    let base = build_base(&s.base)?;
    let map = match &s.map {
        InlineMap::Identity => BaseMap::Identity,
        InlineMap::Halving => BaseMap::Halving,
        InlineMap::Negation => BaseMap::Negation,
        InlineMap::Rotation { alpha } => BaseMap::Rotation { alpha: *alpha },
        InlineMap::Permutation { images } => match &base {
            BaseSpace::FiniteSet(points) => BaseMap::FinitePermutation {
                points: points.clone(),
                images: images.clone(),
            },
            _ => return Err(RunError::config("example.suspension.map", "a permutation needs a finite base")),
        },
    };
    let time = match &s.time {
        InlineTime::Constant { value } => ReturnTime::Constant(*value),
        InlineTime::Reciprocal { floor } => ReturnTime::ClosedForm(ClosedForm::Reciprocal { floor: *floor }),
        InlineTime::Quadratic => ReturnTime::ClosedForm(ClosedForm::Quadratic),
        InlineTime::Sinusoidal { amplitude, phase } => ReturnTime::ClosedForm(ClosedForm::Sinusoidal {
            amplitude: *amplitude,
            phase: *phase,
        }),
        InlineTime::Affine { intercept, slope } => ReturnTime::ClosedForm(ClosedForm::Affine {
            intercept: *intercept,
            slope: *slope,
        }),
        InlineTime::PiecewiseLinear { knots, default } => {
            ReturnTime::PiecewiseLinear(PiecewiseLinear::new(knots.clone(), *default)?)
        }
    };
    if matches!(map, BaseMap::Identity) {
        return Ok(identity_suspension(base, time)?);
    }
    Ok(SuspensionFlow::new(base, map, time)?)
}

/// Constructs the flow an [`ExampleRef`] describes.
pub fn build(example: &ExampleRef) -> Result<Built, RunError> {
    let suspension = |flow| Built::Suspension { flow, names: Vec::new() };
    let params = example.params();
    let alpha = params.alpha.unwrap_or(GOLDEN);
    let Some(id) = example.id() else {
        return match example {
            ExampleRef::Field(spec) => Ok(Built::Field(spec.clone())),
            ExampleRef::Annulus(a) => {
                let domain = Domain::annulus(a.r_in, a.r_out)?;
                Ok(Built::Field(VectorFieldSpec::new(
                    "radial_profile",
                    domain,
                    FieldRule::Radial {
                        profile: a.profile.clone(),
                    },
                )))
            }
            ExampleRef::Suspension(s) => Ok(suspension(build_inline_suspension(s)?)),
            _ => unreachable!("catalog references carry an id"),
        };
    };
    Ok(match id {
        ExampleId::PeriodicBand => Built::Field(periodic_band(false)),
        ExampleId::RigidBand => Built::Field(periodic_band(true)),
        ExampleId::TorusFakeSaddle => {
            Built::Field(torus_fake_saddle(alpha, params.zero.unwrap_or(Point2::new(0.5, 0.5)))?)
        }
        ExampleId::MoebiusSuspension => suspension(moebius_suspension()),
        ExampleId::DiscReciprocal => suspension(disc_reciprocal_suspension(params.x_min.unwrap_or(DEFAULT_X_MIN))?),
        ExampleId::BandKnots => suspension(band_knots_suspension(params.n_max.unwrap_or(DEFAULT_BAND_N_MAX))?),
        ExampleId::IdentitySuspension => suspension(identity_suspension(
            BaseSpace::Interval { lo: 0.0, hi: 1.0 },
            ReturnTime::ClosedForm(ClosedForm::Affine {
                intercept: 1.0,
                slope: 1.0,
            }),
        )?),
        ExampleId::DenjoySuspension => suspension(denjoy_suspension(
            alpha,
            params.interval_length.unwrap_or(DEFAULT_DENJOY_LENGTH),
            params.n_max.unwrap_or(DEFAULT_DENJOY_N_MAX),
        )?),
        ExampleId::KSMinimal => {
            let ks = ks_minimal_suspension(alpha, params.j_max.unwrap_or(DEFAULT_KS_J_MAX))?;
            Built::Suspension {
                names: vec![("0-", ks.zero_minus), ("0+", ks.zero_plus)],
                flow: ks.flow,
            }
        }
        ExampleId::RotationSmooth => {
            suspension(rotation_smooth_suspension(alpha, params.amplitude.unwrap_or(DEFAULT_AMPLITUDE))?)
        }
    })
}

fn base_point(end: &Endpoint, names: &[(&str, f64)], path: &str) -> Result<f64, RunError> {
    match end {
        Endpoint::Value(v) => Ok(*v),
        Endpoint::Named(name) => names.iter().find(|(n, _)| n == name).map(|(_, v)| *v).ok_or_else(|| {
            let known: Vec<&str> = names.iter().map(|(n, _)| *n).collect();
            RunError::config(path, format!("unknown point `{name}` (this example names {known:?})"))
        }),
        _ => Err(RunError::config(path, "expected a base coordinate")),
    }
}

fn planar_point(end: &Endpoint, path: &str) -> Result<Point2, RunError> {
    match end {
        Endpoint::Array([x, y]) => Ok(Point2::new(*x, *y)),
        Endpoint::Point(p) => Ok(*p),
        _ => Err(RunError::config(path, "expected a planar point [x, y]")),
    }
}

fn random_field_pairs(domain: &Domain, spec: RandomPairs, seed: u64) -> Result<Vec<Pair>, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut found = None;
        for _ in 0..RANDOM_PAIR_ATTEMPTS {
            let a = match *domain {
                Domain::Annulus { r_in, r_out } => {
                    let r = rng.gen_range(r_in..=r_out);
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    Point2::new(r * theta.cos(), r * theta.sin())
                }
                Domain::Disc { radius } => {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    Point2::new(r * theta.cos(), r * theta.sin())
                }
                Domain::FlatTorus => Point2::new(rng.gen(), rng.gen()),
            };
            let length = spec.spread * (1.0 - rng.gen::<f64>());
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let b = domain.normalize(Point2::new(a.x + length * theta.cos(), a.y + length * theta.sin()));
            if domain.contains(b) && b != a {
                found = Some(Pair::Planar(a, b));
                break;
            }
        }
        pairs.push(found.ok_or_else(|| {
            RunError::config("parameters.random_pairs.spread", "could not place a partner inside the domain")
        })?);
    }
    Ok(pairs)
}

fn random_base_pairs(base: &BaseSpace, spec: RandomPairs, seed: u64) -> Result<Vec<Pair>, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut found = None;
        for _ in 0..RANDOM_PAIR_ATTEMPTS {
            let candidate = match base {
                BaseSpace::Interval { lo, hi } => {
                    let x = rng.gen_range(*lo..*hi);
                    let y = x + rng.gen_range(-spec.spread..spec.spread);
                    (*lo..=*hi).contains(&y).then_some((x, y))
                }
                BaseSpace::Circle => {
                    let x: f64 = rng.gen();
                    let y = (x + rng.gen_range(-spec.spread..spec.spread)).rem_euclid(1.0);
                    Some((x, y))
                }
                BaseSpace::FiniteSet(points) => {
                    let i = rng.gen_range(0..points.len());
                    let j = rng.gen_range(0..points.len());
                    Some((points[i], points[j]))
                }
            };
            if let Some((x, y)) = candidate.filter(|(x, y)| x != y) {
                found = Some(Pair::Base(x, y));
                break;
            }
        }
        pairs.push(found.ok_or_else(|| RunError::config("parameters.random_pairs", "could not draw distinct points"))?);
    }
    Ok(pairs)
}

fn resolve_pairs(config: &ExperimentConfig, built: &Built) -> Result<Vec<Pair>, RunError> {
    let p = &config.parameters;
    let mut pairs = Vec::new();
    for (i, [a, b]) in p.pairs.iter().flatten().enumerate() {
        let path = |j: usize| format!("parameters.pairs[{i}][{j}]");
        pairs.push(match built {
            Built::Field(_) => Pair::Planar(planar_point(a, &path(0))?, planar_point(b, &path(1))?),
            Built::Suspension { names, .. } => Pair::Base(base_point(a, names, &path(0))?, base_point(b, names, &path(1))?),
        });
    }
    if let Some(spec) = p.random_pairs {
        let seed = config.seed.expect("validated: random pairs carry a seed");
        pairs.extend(match built {
            Built::Field(field) => random_field_pairs(&field.domain, spec, seed)?,
            Built::Suspension { flow, .. } => random_base_pairs(&flow.base, spec, seed)?,
        });
    }
    Ok(pairs)
}

#[derive(Serialize)]
pub struct FieldSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Serialize)]
pub struct SuspensionSample {
    pub t: f64,
    pub x: f64,
    pub s: f64,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub pair_id: usize,
    pub x: String,
    pub y: String,
    pub separated: Option<bool>,
    pub witness: Option<f64>,
    pub channel: Option<String>,
    pub margin: Option<f64>,
}

#[derive(Serialize)]
pub struct SeriesRow {
    pub pair_id: usize,
    pub n: u64,
    pub gap: f64,
    pub partial_sum: f64,
}

#[derive(Serialize)]
pub struct FrechetRow {
    pub pair_id: usize,
    pub frechet: f64,
    pub sup_distance: f64,
}

#[derive(Serialize)]
pub struct PeriodRow {
    pub r: f64,
    pub flux_period: f64,
    pub direct_period: Option<f64>,
    pub residual: Option<f64>,
}

#[derive(Serialize)]
pub struct GreenRow {
    pub r1: f64,
    pub r2: f64,
    pub quad_n: usize,
    #[serde(flatten)]
    pub report: GreenReport,
}

/// Rows of a report, one variant per CSV layout.
pub enum Table {
    Field(Vec<FieldSample>),
    Suspension(Vec<SuspensionSample>),
    Sweep(Vec<SweepRow>),
    Series(Vec<SeriesRow>),
    Frechet(Vec<FrechetRow>),
    Koksma(Vec<KoksmaRow>),
    Period(Vec<PeriodRow>),
    Green(Vec<GreenRow>),
    Grid(Vec<GridSample>),
}

impl Table {
    pub fn len(&self) -> usize {
        match self {
            Table::Field(r) => r.len(),
            Table::Suspension(r) => r.len(),
            Table::Sweep(r) => r.len(),
            Table::Series(r) => r.len(),
            Table::Frechet(r) => r.len(),
            Table::Koksma(r) => r.len(),
            Table::Period(r) => r.len(),
            Table::Green(r) => r.len(),
            Table::Grid(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct Report {
    pub operation: Operation,
    pub table: Table,
    /// The one-line summary printed after the run.
    pub summary: String,
    /// Structured results beyond the table (verdicts, sweep statistics).
    pub details: serde_json::Value,
    /// Set when the run stopped early or some rows failed; the table holds
    /// whatever was computed.
    pub failure: Option<String>,
}

impl Report {
    fn new(operation: Operation, table: Table, summary: String) -> Self {
        Report {
            operation,
            table,
            summary,
            details: serde_json::Value::Null,
            failure: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            3
        } else {
            0
        }
    }
}

fn fmt_point(p: Point2) -> String {
    format!("{};{}", p.x, p.y)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v}"))
}

fn sweep_table(report: &SweepReport) -> Vec<SweepRow> {
    report
        .outcomes
        .iter()
        .map(|o| {
            let (x, y) = match o.pair {
                Pair::Base(x, y) => (x.to_string(), y.to_string()),
                Pair::Planar(a, b) => (fmt_point(a), fmt_point(b)),
            };
            let verdict = o.verdict.as_ref().ok();
            SweepRow {
                pair_id: o.pair_id,
                x,
                y,
                separated: verdict.map(|v| v.separated),
                witness: verdict.and_then(|v| v.witness_value()),
                channel: verdict.and_then(|v| v.channel).map(|c| c.as_str().to_string()),
                margin: verdict.map(|v| v.margin),
            }
        })
        .collect()
}

fn sweep_report(config: &ExperimentConfig, built: &Built, op: Operation) -> Result<Report, RunError> {
    let p = &config.parameters;
    let pairs = resolve_pairs(config, built)?;
    let mode = p.mode.unwrap_or_default();
    let target = match built {
        Built::Field(spec) => SweepTarget::Field {
            spec,
            delta: p.delta.expect("validated"),
            horizon: p.horizon.expect("validated"),
            dt: p.dt.expect("validated"),
        },
        Built::Suspension { flow, .. } => SweepTarget::Suspension {
            flow,
            rho: p.rho.expect("validated"),
            steps: p.steps.expect("validated"),
        },
    };
    if op == Operation::SuspensionCheck && matches!(built, Built::Field(_)) {
        return Err(RunError::config("example", "suspension-check needs a suspension flow"));
    }
    let sweep = pair_sweep(target, &pairs, mode)?;
    let separated = sweep
        .outcomes
        .iter()
        .filter(|o| o.verdict.as_ref().is_ok_and(|v| v.separated))
        .count();
    let min_margin = sweep
        .outcomes
        .iter()
        .filter_map(|o| o.verdict.as_ref().ok().map(|v| v.margin))
        .reduce(f64::min);
    let mut summary = format!(
        "{op}: {separated}/{} separated, witness range [{}, {}], min margin {}",
        sweep.outcomes.len(),
        fmt_opt(sweep.min_witness),
        fmt_opt(sweep.max_witness),
        fmt_opt(min_margin),
    );
    if let [only] = sweep.outcomes.as_slice() {
        if let Ok(v) = &only.verdict {
            if let Some(channel) = v.channel {
                summary.push_str(&format!(", channel {}", channel.as_str()));
            }
        }
    }
    let failures: Vec<String> = sweep
        .outcomes
        .iter()
        .filter_map(|o| o.verdict.as_ref().err().map(|e| format!("pair {}: {e}", o.pair_id)))
        .collect();
    if !failures.is_empty() {
        summary.push_str(&format!(", {} errors", failures.len()));
    }
    let mut report = Report::new(op, Table::Sweep(sweep_table(&sweep)), summary);
    report.details = serde_json::to_value(&sweep).expect("sweep reports serialize");
    report.failure = (!failures.is_empty()).then(|| failures.join("; "));
    Ok(report)
}

fn simulate(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let p = &config.parameters;
    let start = p.start.as_ref().expect("validated");
    let horizon = p.horizon.expect("validated");
    let dt = p.dt.expect("validated");
    match built {
        Built::Field(spec) => {
            let point = planar_point(start, "parameters.start")?;
            let (trajectory, failure) = match sample_trajectory(spec, point, horizon, dt) {
                Ok(t) => (t, None),
                Err(FlowError::TrajectoryEscape { partial, source }) => (*partial, Some(source.to_string())),
                Err(e) => return Err(e.into()),
            };
            let rows = field_rows(&trajectory);
            let last = trajectory.last();
            let summary = match &failure {
                None => format!("simulate: {} samples, final point {last}", rows.len()),
                Some(e) => format!("simulate: escaped after {} samples at {last}: {e}", rows.len()),
            };
            let mut report = Report::new(Operation::Simulate, Table::Field(rows), summary);
            report.failure = failure;
            Ok(report)
        }
        Built::Suspension { flow, names } => {
            if !(horizon > 0.0 && dt > 0.0) {
                return Err(RunError::config("parameters", "horizon and dt must be positive"));
            }
            let x = base_point(start, names, "parameters.start")?;
            let mut state = flow.state(x, 0.0)?;
            let count = explab_core::flowcore::sample_count(horizon, dt);
            let mut rows = Vec::with_capacity(count);
            for i in 0..count {
                if i > 0 {
                    state = flow.evaluate(state, dt);
                }
                let SuspState { x, s } = state;
                rows.push(SuspensionSample { t: i as f64 * dt, x, s });
            }
            let summary = format!("simulate: {} samples, final state x={} s={}", rows.len(), state.x, state.s);
            Ok(Report::new(Operation::Simulate, Table::Suspension(rows), summary))
        }
    }
}

fn field_rows(trajectory: &Trajectory) -> Vec<FieldSample> {
    trajectory
        .points
        .iter()
        .enumerate()
        .map(|(i, q)| FieldSample {
            t: trajectory.time(i),
            x: q.x,
            y: q.y,
        })
        .collect()
}

fn series(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let Built::Suspension { flow, .. } = built else {
        return Err(RunError::config("example", "series needs a suspension flow"));
    };
    let p = &config.parameters;
    let steps = p.steps.expect("validated");
    let threshold = p.threshold.expect("validated");
    let mut rows = Vec::new();
    let mut crossed = 0;
    let mut first: Option<u64> = None;
    let mut largest: f64 = 0.0;
    let pairs = resolve_pairs(config, built)?;
    for (pair_id, pair) in pairs.iter().enumerate() {
        let Pair::Base(x, y) = *pair else { unreachable!("suspension pairs are base pairs") };
        let certificate = divergence_partial_sums(flow, x, y, steps, threshold)?;
        let gaps = return_time_gaps(flow, x, y, steps);
        if let Some(n) = certificate.crossed {
            crossed += 1;
            first = Some(first.map_or(n, |f| f.min(n)));
        }
        for (n, (gap, partial_sum)) in gaps.iter().zip(&certificate.partial_sums).enumerate() {
            largest = largest.max(partial_sum.abs());
            rows.push(SeriesRow {
                pair_id,
                n: n as u64,
                gap: *gap,
                partial_sum: *partial_sum,
            });
        }
    }
    let summary = format!(
        "series: {crossed}/{} pairs crossed {threshold}, earliest crossing {}, max |S_n| {largest}",
        pairs.len(),
        first.map_or_else(|| "none".to_string(), |n| n.to_string()),
    );
    Ok(Report::new(Operation::Series, Table::Series(rows), summary))
}

fn frechet(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let Built::Field(spec) = built else {
        return Err(RunError::config("example", "frechet needs a planar field"));
    };
    let p = &config.parameters;
    let horizon = p.horizon.expect("validated");
    let dt = p.dt.expect("validated");
    let mut rows = Vec::new();
    let mut failure = None;
    for (pair_id, pair) in resolve_pairs(config, built)?.into_iter().enumerate() {
        let Pair::Planar(a, b) = pair else { unreachable!("field pairs are planar") };
        let sampled = sample_trajectory(spec, a, horizon, dt).and_then(|ta| Ok((ta, sample_trajectory(spec, b, horizon, dt)?)));
        let (ta, tb) = match sampled {
            Ok(t) => t,
            Err(e) => {
                failure = Some(format!("pair {pair_id}: {}", RunError::from(e)));
                break;
            }
        };
        let sup_distance = ta
            .points
            .iter()
            .zip(&tb.points)
            .map(|(u, v)| domain_distance(&spec.domain, *u, *v))
            .fold(0.0, f64::max);
        rows.push(FrechetRow {
            pair_id,
            frechet: discrete_frechet(&ta, &tb)?,
            sup_distance,
        });
    }
    let largest = rows.iter().map(|r| r.frechet).reduce(f64::max);
    let summary = format!("frechet: {} pairs, max distance {}", rows.len(), fmt_opt(largest));
    let mut report = Report::new(Operation::Frechet, Table::Frechet(rows), summary);
    report.failure = failure;
    Ok(report)
}

fn denjoy_koksma(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let Built::Suspension { flow, .. } = built else {
        return Err(RunError::config("example", "denjoy-koksma needs a rotation suspension"));
    };
    let p = &config.parameters;
    let count = p.n.expect("validated");
    let grid = p.grid.expect("validated");
    let rows = (1..=count)
        .map(|n| denjoy_koksma_gap(flow, n, grid))
        .collect::<Result<Vec<_>, _>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    let last = rows.last().expect("n is at least 1");
    let summary = format!(
        "denjoy-koksma: {} convergents, g_{} = {} at q = {}, decreasing {}",
        rows.len(),
        last.n,
        last.gap,
        last.q,
        if decreasing { "yes" } else { "no" },
    );
    Ok(Report::new(Operation::DenjoyKoksma, Table::Koksma(rows), summary))
}

fn conservative(built: &Built, op: Operation) -> Result<ConservativeFieldSpec, RunError> {
    match built {
        Built::Field(spec) => Ok(ConservativeFieldSpec::new(spec.clone())?),
        Built::Suspension { .. } => Err(RunError::config("example", format!("{op} needs an annulus field"))),
    }
}

fn annulus_period(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let field = conservative(built, Operation::AnnulusPeriod)?;
    let p = &config.parameters;
    let count = p.radii.expect("validated");
    let quad_n = p.quad_n.expect("validated");
    if count < 2 {
        return Err(RunError::config("parameters.radii", "need at least two radii"));
    }
    let (r_in, r_out) = field.radii();
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let r = r_in + (r_out - r_in) * i as f64 / (count - 1) as f64;
        let period = orbit_period_flux(&field, &OrbitCurve::Circle { radius: r }, quad_n, p.direct)?;
        rows.push(PeriodRow {
            r,
            flux_period: period.flux_period,
            direct_period: period.direct_period,
            residual: period.residual,
        });
    }
    let worst = rows.iter().filter_map(|r| r.residual).reduce(f64::max);
    let periods: Vec<f64> = rows.iter().map(|r| r.flux_period).collect();
    let summary = format!(
        "annulus-period: {} radii, periods {} .. {}, max residual {}",
        rows.len(),
        periods[0],
        periods[periods.len() - 1],
        fmt_opt(worst),
    );
    let failed = p.direct.is_some() && rows.iter().any(|r| r.direct_period.is_none());
    let mut report = Report::new(Operation::AnnulusPeriod, Table::Period(rows), summary);
    report.failure = failed.then(|| "a direct return never closed up".to_string());
    Ok(report)
}

fn green(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let field = conservative(built, Operation::GreenCheck)?;
    let p = &config.parameters;
    let (r_in, r_out) = field.radii();
    let (r1, r2) = (p.r1.unwrap_or(r_in), p.r2.unwrap_or(r_out));
    let quad_n = p.quad_n.expect("validated");
    let report = green_check(&field, r1, r2, quad_n)?;
    let summary = format!(
        "green-check: residual {} (period difference {}, area integral {})",
        report.residual, report.period_difference, report.area_integral
    );
    Ok(Report::new(
        Operation::GreenCheck,
        Table::Green(vec![GreenRow { r1, r2, quad_n, report }]),
        summary,
    ))
}

fn criterion(config: &ExperimentConfig, built: &Built) -> Result<Report, RunError> {
    let field = conservative(built, Operation::RobustCriterion)?;
    let grid = config.parameters.grid.expect("validated");
    let verdict = robust_criterion(&field, grid)?;
    let samples = div_z_grid(&field, grid)?;
    let summary = format!(
        "robust-criterion: {}, min |div Z| = {} at {}",
        if verdict.satisfied { "satisfied" } else { "not satisfied" },
        verdict.min_abs_div,
        verdict.argmin
    );
    let mut report = Report::new(Operation::RobustCriterion, Table::Grid(samples), summary);
    report.details = serde_json::to_value(verdict).expect("verdicts serialize");
    Ok(report)
}

/// Runs the experiment in memory.
pub fn execute(config: &ExperimentConfig) -> Result<Report, RunError> {
    let built = build(&config.example)?;
    match config.operation {
        Operation::Simulate => simulate(config, &built),
        op @ (Operation::SeparationSweep | Operation::SuspensionCheck) => sweep_report(config, &built, op),
        Operation::Series => series(config, &built),
        Operation::Frechet => frechet(config, &built),
        Operation::DenjoyKoksma => denjoy_koksma(config, &built),
        Operation::AnnulusPeriod => annulus_period(config, &built),
        Operation::GreenCheck => green(config, &built),
        Operation::RobustCriterion => criterion(config, &built),
    }
}

fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| RunError::Io(io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a, R: Serialize> {
    operation: Operation,
    summary: &'a str,
    failure: Option<&'a str>,
    details: &'a serde_json::Value,
    rows: &'a [R],
}

fn write_json<W: Write, R: Serialize>(mut out: W, report: &Report, rows: &[R]) -> Result<(), RunError> {
    let doc = JsonReport {
        operation: report.operation,
        summary: &report.summary,
        failure: report.failure.as_deref(),
        details: &report.details,
        rows,
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Serializes the report in `format`.
pub fn write_report<W: Write>(out: W, report: &Report, format: Format) -> Result<(), RunError> {
    macro_rules! emit {
        ($rows:expr) => {
            match format {
                Format::Csv => write_csv(out, $rows),
                Format::Json => write_json(out, report, $rows),
            }
        };
    }
    match &report.table {
        Table::Field(rows) => emit!(rows),
        Table::Suspension(rows) => emit!(rows),
        Table::Sweep(rows) => emit!(rows),
        Table::Series(rows) => emit!(rows),
        Table::Frechet(rows) => emit!(rows),
        Table::Koksma(rows) => emit!(rows),
        Table::Period(rows) => emit!(rows),
        Table::Green(rows) => emit!(rows),
        Table::Grid(rows) => emit!(rows),
    }
}

/// Where the report goes: the explicit path, else `explab-<operation>.<ext>`.
pub fn report_path(config: &ExperimentConfig) -> PathBuf {
    let output = config.output.clone().unwrap_or_default();
    match output.path {
        Some(path) => PathBuf::from(path),
        None => {
            let ext = match output.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            PathBuf::from(format!("explab-{}.{ext}", config.operation))
        }
    }
}

/// Executes `config` and writes its report (partial on failure) to `path`.
pub fn run_to(config: &ExperimentConfig, path: &Path) -> Result<Report, RunError> {
    let report = execute(config)?;
    let format = config.output.as_ref().map(|o| o.format).unwrap_or_default();
    let file = File::create(path)?;
    write_report(io::BufWriter::new(file), &report, format)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn report(text: &str) -> Report {
        execute(&parse_config(text).unwrap()).unwrap()
    }

    fn csv_of(report: &Report) -> String {
        let mut buf = Vec::new();
        write_report(&mut buf, report, Format::Csv).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn ks_check_separates_at_first_harmonic_crossing() {
        let r = report(
            r#"{"example":"KSMinimal","operation":"suspension-check",
                "parameters":{"rho":1.5,"N":1000,"pairs":[["0-","0+"]]}}"#,
        );
        let Table::Sweep(rows) = &r.table else { panic!() };
        // H_1 = 1 < 1.5 ≤ H_2 = 1.5: first n_j with H_j ≥ ρ is n_2 = 2
        assert_eq!(rows[0].separated, Some(true));
        assert_eq!(rows[0].witness, Some(2.0));
        assert_eq!(rows[0].channel.as_deref(), Some("time-gap"));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn sweep_csv_has_module_columns() {
        let r = report(
            r#"{"example":"MoebiusSuspension","operation":"separation-sweep",
                "parameters":{"rho":0.5,"N":100,"pairs":[[0.1,-0.1],[0.5,-0.5]]}}"#,
        );
        let text = csv_of(&r);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("pair_id,x,y,separated,witness,channel,margin"));
        assert_eq!(lines.next(), Some("0,0.1,-0.1,false,,,0.3"));
        assert_eq!(lines.next(), Some("1,0.5,-0.5,true,0.0,base-distance,-0.5"));
    }

    #[test]
    fn green_check_on_linear_profile() {
        let r = report(
            r#"{"example":{"annulus":{"profile":{"kind":"affine","intercept":0,"slope":1},"r_in":1,"r_out":2}},
                "operation":"green-check"}"#,
        );
        let Table::Green(rows) = &r.table else { panic!() };
        assert!(rows[0].report.residual < 1e-6);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn koksma_table_decreases() {
        let r = report(r#"{"example":"RotationSmooth","operation":"denjoy-koksma","parameters":{"n":8}}"#);
        let Table::Koksma(rows) = &r.table else { panic!() };
        assert_eq!(rows.len(), 8);
        assert!(rows.windows(2).all(|w| w[1].gap < w[0].gap));
        assert_eq!(rows[7].q, 34);
    }

    #[test]
    fn series_rows_cover_every_index() {
        let r = report(
            r#"{"example":"DiscReciprocal","operation":"series","parameters":{"N":10,"pairs":[[0.5,0.75]]}}"#,
        );
        let Table::Series(rows) = &r.table else { panic!() };
        assert_eq!(rows.len(), 11);
        // gap_n = 2ⁿ(1/x − 1/y) = 2ⁿ·(2/3)
        assert!((rows[3].gap - 8.0 * 2.0 / 3.0).abs() < 1e-12);
        assert!(r.summary.contains("1/1 pairs crossed"));
    }

    #[test]
    fn simulate_escape_keeps_partial_rows() {
        let r = report(
            r#"{"example":"RigidBand","operation":"simulate","parameters":{"start":[2,0],"horizon":30,"dt":3}}"#,
        );
        assert_eq!(r.exit_code(), 3);
        assert!(!r.table.is_empty());
    }

    #[test]
    fn named_points_only_where_defined() {
        let config = parse_config(
            r#"{"example":"MoebiusSuspension","operation":"suspension-check","parameters":{"rho":0.5,"N":10,"pairs":[["0-","0+"]]}}"#,
        )
        .unwrap();
        let err = execute(&config).err().unwrap();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn domain_errors_exit_three() {
        let config = parse_config(
            r#"{"example":{"suspension":{"base":{"kind":"interval","lo":0,"hi":1},"map":{"kind":"halving"},
                "time":{"kind":"affine","intercept":-1,"slope":1}}},
                "operation":"series","parameters":{"N":3,"pairs":[[0.1,0.2]]}}"#,
        )
        .unwrap();
        assert_eq!(execute(&config).err().unwrap().exit_code(), 3);
    }

    #[test]
    fn random_pairs_are_reproducible() {
        let text = r#"{"example":"RotationSmooth","operation":"separation-sweep",
            "parameters":{"rho":0.2,"N":200,"random_pairs":{"count":12,"spread":0.05}},"seed":5}"#;
        assert_eq!(csv_of(&report(text)), csv_of(&report(text)));
        let other = text.replace("\"seed\":5", "\"seed\":6");
        assert_ne!(csv_of(&report(text)), csv_of(&report(&other)));
    }
}
