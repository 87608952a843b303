//! Separation tests for planar flows and suspensions.
//!
//! A verdict is always relative to a finite horizon: "not separated" means
//! the threshold was never reached on the scanned grid, and the verdict
//! records how close it came.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowcore::{domain_distance, sample_count, step_rk4, Domain, Field, FlowError, Point2, Trajectory, VectorFieldSpec};
use crate::suspension::{BaseMap, BaseSpace, ClosedForm, ReturnTime, Section, SuspensionFlow};

/// Default certificate threshold for divergent partial sums.
pub const CERTIFICATE_THRESHOLD: f64 = 1e3;

/// Largest number of continued-fraction denominators computed.
pub const MAX_CONVERGENTS: usize = 25;

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trajectory escaped at t = {reached} (largest distance so far {max_distance}): {source}")]
    Escape {
        reached: f64,
        max_distance: f64,
        #[source]
        source: FlowError,
    },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("trajectories live on different domains: {0} and {1}")]
    DomainMismatch(Domain, Domain),
    #[error("continued fraction of {alpha} terminates after {terms:?}")]
    Terminated { alpha: f64, terms: Vec<u64> },
    #[error("return time must be smooth on the circle over a rotation: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMode {
    #[default]
    Forward,
    Backward,
    Bidirectional,
}

/// Which inequality of the suspension criterion failed first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    BaseDistance,
    TimeGap,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::BaseDistance => "base-distance",
            Channel::TimeGap => "time-gap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Time(f64),
    Steps(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    pub separated: bool,
    pub witness_time: Option<f64>,
    pub witness_index: Option<i64>,
    pub threshold: f64,
    pub horizon: Horizon,
    pub channel: Option<Channel>,
    /// Threshold minus the largest observed value; positive when not separated.
    pub margin: f64,
}

impl SeparationVerdict {
    /// Witness as a plain number (time or index), if any.
    pub fn witness_value(&self) -> Option<f64> {
        self.witness_time.or(self.witness_index.map(|n| n as f64))
    }
}

/// Partial sums `S_N = Σ_{i=0}^{N} (T(fⁱx) − T(fⁱy))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCertificate {
    pub partial_sums: Vec<f64>,
    pub threshold: f64,
    pub crossed: Option<u64>,
}

struct Scan {
    witness: Option<(i64, Option<Channel>)>,
    max_seen: f64,
    /// Steps actually covered; short of the request when an orbit leaves the base.
    scanned: u64,
}

fn scan_field<F: Field + ?Sized>(
    field: &F,
    a: Point2,
    b: Point2,
    delta: f64,
    horizon: f64,
    dt: f64,
) -> Result<Scan, SeparationError> {
    let domain = field.domain();
    for p in [a, b] {
        if !domain.contains(p) {
            return Err(FlowError::OutsideDomain { point: p, domain }.into());
        }
    }
    let (mut p, mut q) = (domain.normalize(a), domain.normalize(b));
    let count = sample_count(horizon, dt);
    let mut max_seen: f64 = 0.0;
    for i in 0..count {
        let d = domain_distance(&domain, p, q);
        max_seen = max_seen.max(d);
        if d >= delta {
            return Ok(Scan {
                witness: Some((i as i64, None)),
                max_seen,
                scanned: i as u64,
            });
        }
        if i + 1 < count {
            let escape = |source| SeparationError::Escape {
                reached: i as f64 * dt,
                max_distance: max_seen,
                source,
            };
            p = step_rk4(field, p, dt).map_err(escape)?;
            q = step_rk4(field, q, dt).map_err(escape)?;
        }
    }
    Ok(Scan {
        witness: None,
        max_seen,
        scanned: count as u64 - 1,
    })
}

fn merge_directions(forward: Option<Scan>, backward: Option<Scan>) -> Scan {
    match (forward, backward) {
        (Some(f), None) => f,
        (None, Some(b)) => Scan {
            witness: b.witness.map(|(n, c)| (-n, c)),
            ..b
        },
        (Some(f), Some(b)) => {
            let max_seen = match (f.witness, b.witness) {
                (None, None) => f.max_seen.max(b.max_seen),
                (Some(_), None) => f.max_seen,
                (None, Some(_)) => b.max_seen,
                (Some((nf, _)), Some((nb, _))) => {
                    if nf <= nb {
                        f.max_seen
                    } else {
                        b.max_seen
                    }
                }
            };
            let witness = match (f.witness, b.witness) {
                (Some(fw), Some(bw)) => Some(if fw.0 <= bw.0 { fw } else { (-bw.0, bw.1) }),
                (Some(fw), None) => Some(fw),
                (None, Some(bw)) => Some((-bw.0, bw.1)),
                (None, None) => None,
            };
            Scan {
                witness,
                max_seen,
                scanned: f.scanned.min(b.scanned),
            }
        }
        (None, None) => unreachable!("at least one direction is scanned"),
    }
}

fn check_threshold(name: &str, value: f64) -> Result<(), SeparationError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SeparationError::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// First sampled time at which the orbits of `a` and `b` are `delta` apart,
/// comparing both on the same time grid.
pub fn separation_time(
    spec: &VectorFieldSpec,
    a: Point2,
    b: Point2,
    delta: f64,
    horizon: f64,
    dt: f64,
    mode: SeparationMode,
) -> Result<SeparationVerdict, SeparationError> {
    check_threshold("delta", delta)?;
    check_threshold("horizon", horizon)?;
    check_threshold("dt", dt)?;
    if a == b {
        return Err(SeparationError::InvalidParameter("the two points must differ".into()));
    }
    let forward = match mode {
        SeparationMode::Backward => None,
        _ => Some(scan_field(spec, a, b, delta, horizon, dt)?),
    };
    let backward = match mode {
        SeparationMode::Forward => None,
        _ => Some(scan_field(&spec.reversed(), a, b, delta, horizon, dt)?),
    };
    let scan = merge_directions(forward, backward);
    Ok(SeparationVerdict {
        separated: scan.witness.is_some(),
        witness_time: scan.witness.map(|(n, _)| n as f64 * dt),
        witness_index: None,
        threshold: delta,
        horizon: Horizon::Time(horizon),
        channel: None,
        margin: delta - scan.max_seen,
    })
}

fn scan_section<S: Section + ?Sized>(section: &S, x: f64, y: f64, rho: f64, steps: u64) -> Scan {
    let (mut u, mut v) = (x, y);
    let mut gap = 0.0;
    let mut max_seen: f64 = 0.0;
    let mut n = 0;
    loop {
        let base = section.base_distance(u, v);
        gap += section.roof(u) - section.roof(v);
        max_seen = max_seen.max(base).max(gap.abs());
        let fired = if base >= rho {
            Some(Channel::BaseDistance)
        } else if gap.abs() >= rho {
            Some(Channel::TimeGap)
        } else {
            None
        };
        if let Some(channel) = fired {
            return Scan {
                witness: Some((n as i64, Some(channel))),
                max_seen,
                scanned: n,
            };
        }
        if n == steps || !(section.in_base(u) && section.in_base(v)) {
            break;
        }
        u = section.step(u);
        v = section.step(v);
        n += 1;
    }
    Scan {
        witness: None,
        max_seen,
        scanned: n,
    }
}

/// Suspension criterion: scans `n = 0..=steps` for the first index where the
/// base distance or the accumulated return-time gap reaches `rho`.
///
/// At index `n` the time channel compares `T_{n+1}(x)` with `T_{n+1}(y)`, the
/// times at which the two orbits complete their `n`-th fiber. Backward scans
/// run the same test on the reversed section and report negative indices.
pub fn kinematic_check_pair(
    flow: &SuspensionFlow,
    x: f64,
    y: f64,
    rho: f64,
    steps: u64,
    mode: SeparationMode,
) -> Result<SeparationVerdict, SeparationError> {
    check_threshold("rho", rho)?;
    if steps == 0 {
        return Err(SeparationError::InvalidParameter("N must be at least 1".into()));
    }
    for p in [x, y] {
        if !flow.base.contains(p) {
            return Err(SeparationError::InvalidParameter(format!("{p} is not in the base space")));
        }
    }
    let forward = match mode {
        SeparationMode::Backward => None,
        _ => Some(scan_section(flow, x, y, rho, steps)),
    };
    let backward = match mode {
        SeparationMode::Forward => None,
        _ => Some(scan_section(&flow.reversed(), x, y, rho, steps)),
    };
    let scan = merge_directions(forward, backward);
    Ok(SeparationVerdict {
        separated: scan.witness.is_some(),
        witness_time: None,
        witness_index: scan.witness.map(|(n, _)| n),
        threshold: rho,
        horizon: Horizon::Steps(scan.scanned),
        channel: scan.witness.and_then(|(_, c)| c),
        margin: rho - scan.max_seen,
    })
}

/// Per-step return-time gaps `T(fⁿx) − T(fⁿy)` for `n = 0..=steps`.
pub fn return_time_gaps<S: Section + ?Sized>(section: &S, x: f64, y: f64, steps: u64) -> Vec<f64> {
    let (mut u, mut v) = (x, y);
    let mut gaps = Vec::with_capacity(steps as usize + 1);
    for n in 0..=steps {
        gaps.push(section.roof(u) - section.roof(v));
        if n < steps {
            u = section.step(u);
            v = section.step(v);
        }
    }
    gaps
}

/// Partial sums of return-time gaps along the paired orbits of `x` and `y`.
pub fn divergence_partial_sums<S: Section + ?Sized>(
    section: &S,
    x: f64,
    y: f64,
    steps: u64,
    threshold: f64,
) -> Result<SeriesCertificate, SeparationError> {
    check_threshold("certificate threshold", threshold)?;
    if steps == 0 {
        return Err(SeparationError::InvalidParameter("N must be at least 1".into()));
    }
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = return_time_gaps(section, x, y, steps)
        .into_iter()
        .map(|g| {
            acc += g;
            acc
        })
        .collect();
    let crossed = partial_sums.iter().position(|s| s.abs() > threshold).map(|n| n as u64);
    Ok(SeriesCertificate {
        partial_sums,
        threshold,
        crossed,
    })
}

/// Discrete Fréchet distance with anchored endpoints and monotone couplings.
pub fn discrete_frechet(ta: &Trajectory, tb: &Trajectory) -> Result<f64, SeparationError> {
    if ta.domain != tb.domain {
        return Err(SeparationError::DomainMismatch(ta.domain, tb.domain));
    }
    if ta.is_empty() || tb.is_empty() {
        return Err(SeparationError::InvalidParameter("trajectories must be nonempty".into()));
    }
    let d = |i: usize, j: usize| domain_distance(&ta.domain, ta.points[i], tb.points[j]);
    let m = tb.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0; m];
    for i in 0..ta.len() {
        for j in 0..m {
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = reach.max(d(i, j));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// A pair of initial conditions for a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pair {
    Base(f64, f64),
    Planar(Point2, Point2),
}

/// What a sweep runs its pairs against.
#[derive(Clone, Copy, Debug)]
pub enum SweepTarget<'a> {
    Field {
        spec: &'a VectorFieldSpec,
        delta: f64,
        horizon: f64,
        dt: f64,
    },
    Suspension {
        flow: &'a SuspensionFlow,
        rho: f64,
        steps: u64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct PairOutcome {
    pub pair_id: usize,
    pub pair: Pair,
    pub verdict: Result<SeparationVerdict, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub outcomes: Vec<PairOutcome>,
    pub fraction_separated: f64,
    pub errors: usize,
    pub min_witness: Option<f64>,
    pub max_witness: Option<f64>,
    /// Pair ids ordered by margin, smallest first.
    pub by_margin: Vec<usize>,
}

/// Runs every pair in parallel; per-pair failures are recorded, not fatal.
pub fn pair_sweep(target: SweepTarget<'_>, pairs: &[Pair], mode: SeparationMode) -> Result<SweepReport, SeparationError> {
    if pairs.is_empty() {
        return Err(SeparationError::InvalidParameter("sweep needs at least one pair".into()));
    }
    let outcomes: Vec<PairOutcome> = pairs
        .par_iter()
        .enumerate()
        .map(|(pair_id, &pair)| {
            let verdict = match (target, pair) {
                (SweepTarget::Field { spec, delta, horizon, dt }, Pair::Planar(a, b)) => {
                    separation_time(spec, a, b, delta, horizon, dt, mode)
                }
                (SweepTarget::Suspension { flow, rho, steps }, Pair::Base(x, y)) => {
                    kinematic_check_pair(flow, x, y, rho, steps, mode)
                }
                _ => Err(SeparationError::InvalidParameter("pair kind does not match the sweep target".into())),
            };
            PairOutcome {
                pair_id,
                pair,
                verdict: verdict.map_err(|e| e.to_string()),
            }
        })
        .collect();
    let verdicts: Vec<&SeparationVerdict> = outcomes.iter().filter_map(|o| o.verdict.as_ref().ok()).collect();
    let separated = verdicts.iter().filter(|v| v.separated).count();
    let witnesses: Vec<f64> = verdicts.iter().filter_map(|v| v.witness_value()).collect();
    let mut by_margin: Vec<usize> = (0..outcomes.len()).collect();
    let margin = |i: usize| outcomes[i].verdict.as_ref().map(|v| v.margin).unwrap_or(f64::INFINITY);
    by_margin.sort_by(|&i, &j| margin(i).total_cmp(&margin(j)).then(i.cmp(&j)));
    Ok(SweepReport {
        fraction_separated: separated as f64 / outcomes.len() as f64,
        errors: outcomes.len() - verdicts.len(),
        min_witness: witnesses.iter().copied().reduce(f64::min),
        max_witness: witnesses.iter().copied().reduce(f64::max),
        by_margin,
        outcomes,
    })
}

/// Denominators `q_1..q_k` of the continued-fraction convergents of `alpha`.
pub fn continued_fraction_denominators(alpha: f64, k: usize) -> Result<Vec<u64>, SeparationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SeparationError::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if k == 0 || k > MAX_CONVERGENTS {
        return Err(SeparationError::InvalidParameter(format!(
            "k must lie in 1..={MAX_CONVERGENTS}, got {k}"
        )));
    }
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut rest = alpha;
    let mut terms = Vec::with_capacity(k);
    while terms.len() < k {
        if rest < 1e-9 {
            return Err(SeparationError::Terminated { alpha, terms });
        }
        let inv = 1.0 / rest;
        // an integer reciprocal can come out a hair low; snap it
        let a = if (inv - inv.round()).abs() < 1e-9 * inv { inv.round() } else { inv.floor() };
        rest = (inv - a).max(0.0);
        let next = a as u64 * q + q_prev;
        q_prev = q;
        q = next;
        terms.push(q);
    }
    Ok(terms)
}

/// Distance from `v` to the nearest integer.
pub fn distance_to_integer(v: f64) -> f64 {
    (v - v.round()).abs()
}

/// One row of the Denjoy–Koksma table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoksmaRow {
    pub n: usize,
    pub q: u64,
    pub gap: f64,
}

/// `g_n = max over a grid of |τ·q_n − T_{q_n}(x)|` for a smooth return time
/// over an irrational rotation, `τ` being the mean of `T`.
pub fn denjoy_koksma_gap(flow: &SuspensionFlow, n: usize, grid: usize) -> Result<KoksmaRow, SeparationError> {
    let alpha = match (&flow.base, &flow.map) {
        (BaseSpace::Circle, BaseMap::Rotation { alpha }) => *alpha,
        _ => return Err(SeparationError::Unsupported("the flow must be a rotation of the circle".into())),
    };
    let mean = match flow.time {
        ReturnTime::Constant(c) => c,
        ReturnTime::ClosedForm(ClosedForm::Sinusoidal { .. }) => 1.0,
        _ => {
            return Err(SeparationError::Unsupported(
                "only constant and sinusoidal return times are smooth on the circle".into(),
            ))
        }
    };
    if grid < 1000 {
        return Err(SeparationError::InvalidParameter(format!("grid must be at least 1000, got {grid}")));
    }
    if n == 0 {
        return Err(SeparationError::InvalidParameter("convergent index starts at 1".into()));
    }
    let q = continued_fraction_denominators(alpha, n)?[n - 1];
    let gap = (0..grid)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / grid as f64;
            (mean * q as f64 - flow.birkhoff_sum(x, q as i64)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(KoksmaRow { n, q, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::{sample_trajectory, FieldRule};

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    fn band(rigid: bool) -> VectorFieldSpec {
        let rule = if rigid {
            FieldRule::RigidRotation
        } else {
            FieldRule::UnitSpeedRotation
        };
        VectorFieldSpec::new("band", Domain::annulus(1.0, 2.0).unwrap(), rule)
    }

    fn halving() -> SuspensionFlow {
        SuspensionFlow::new(
            BaseSpace::interval(0.0, 1.0).unwrap(),
            BaseMap::Halving,
            ReturnTime::ClosedForm(ClosedForm::Reciprocal { floor: 1e-12 }),
        )
        .unwrap()
    }

    fn rotation(alpha: f64, amplitude: f64, phase: f64) -> SuspensionFlow {
        SuspensionFlow::new(
            BaseSpace::Circle,
            BaseMap::Rotation { alpha },
            ReturnTime::ClosedForm(ClosedForm::Sinusoidal { amplitude, phase }),
        )
        .unwrap()
    }

    fn two_circle_oracle(delta: f64) -> f64 {
        // angles t and t/1.1 on radii 1 and 1.1
        let cos = (1.0 + 1.21 - delta * delta) / 2.2;
        11.0 * cos.acos()
    }

    #[test]
    fn rigid_rotation_never_separates() {
        let v = separation_time(&band(true), Point2::new(1.0, 0.0), Point2::new(1.1, 0.0), 0.5, 100.0, 0.01, SeparationMode::Forward)
            .unwrap();
        assert!(!v.separated);
        assert!(v.witness_time.is_none());
        assert!((v.margin - 0.4).abs() < 1e-6);
    }

    #[test]
    fn band_separates_near_oracle() {
        let v = separation_time(&band(false), Point2::new(1.0, 0.0), Point2::new(1.1, 0.0), 0.2, 20.0, 1e-3, SeparationMode::Forward)
            .unwrap();
        let t = v.witness_time.unwrap();
        let oracle = two_circle_oracle(0.2);
        assert!((t - oracle).abs() / oracle < 0.15, "{t} vs {oracle}");
        assert!(v.margin <= 0.0);
    }

    #[test]
    fn backward_and_bidirectional_times() {
        let spec = band(false);
        let (a, b) = (Point2::new(1.0, 0.0), Point2::new(1.1, 0.0));
        let back = separation_time(&spec, a, b, 0.2, 20.0, 1e-2, SeparationMode::Backward).unwrap();
        let fwd = separation_time(&spec, a, b, 0.2, 20.0, 1e-2, SeparationMode::Forward).unwrap();
        assert!(back.witness_time.unwrap() < 0.0);
        assert!((back.witness_time.unwrap() + fwd.witness_time.unwrap()).abs() < 1e-9);
        let both = separation_time(&spec, a, b, 0.2, 20.0, 1e-2, SeparationMode::Bidirectional).unwrap();
        assert_eq!(both.witness_time, fwd.witness_time);
    }

    #[test]
    fn oversized_delta_never_separates() {
        let spec = band(false);
        let v = separation_time(&spec, Point2::new(1.0, 0.0), Point2::new(-2.0, 0.0), 5.0, 10.0, 0.01, SeparationMode::Forward)
            .unwrap();
        assert!(!v.separated);
        assert!(separation_time(&spec, Point2::new(1.0, 0.0), Point2::new(1.0, 0.0), 0.1, 1.0, 0.1, SeparationMode::Forward).is_err());
    }

    #[test]
    fn equal_points_never_separate() {
        let v = kinematic_check_pair(&halving(), 0.3, 0.3, 0.1, 200, SeparationMode::Bidirectional).unwrap();
        assert!(!v.separated);
        assert_eq!(v.margin, 0.1);
    }

    #[test]
    fn reciprocal_pair_separates_at_two() {
        let v = kinematic_check_pair(&halving(), 0.5, 0.75, 3.0, 50, SeparationMode::Forward).unwrap();
        assert_eq!(v.witness_index, Some(2));
        assert_eq!(v.channel, Some(Channel::TimeGap));
        // check the index against direct Birkhoff sums
        let gap = |n: i64| halving().birkhoff_sum(0.5, n) - halving().birkhoff_sum(0.75, n);
        assert!(gap(2).abs() < 3.0 && gap(3).abs() >= 3.0);
    }

    #[test]
    fn moebius_pair_stays_close() {
        let flow = SuspensionFlow::new(
            BaseSpace::interval(-1.0, 1.0).unwrap(),
            BaseMap::Negation,
            ReturnTime::ClosedForm(ClosedForm::Quadratic),
        )
        .unwrap();
        let v = kinematic_check_pair(&flow, 0.1, -0.1, 0.5, 10_000, SeparationMode::Bidirectional).unwrap();
        assert!(!v.separated);
        assert!((v.margin - 0.3).abs() < 1e-15);
    }

    #[test]
    fn certificate_examples() {
        let constant = SuspensionFlow::new(BaseSpace::interval(0.0, 1.0).unwrap(), BaseMap::Identity, ReturnTime::Constant(1.0)).unwrap();
        let c = divergence_partial_sums(&constant, 0.2, 0.7, 50, CERTIFICATE_THRESHOLD).unwrap();
        assert!(c.partial_sums.iter().all(|&s| s == 0.0));
        assert_eq!(c.crossed, None);
        let c = divergence_partial_sums(&halving(), 0.5, 0.75, 12, CERTIFICATE_THRESHOLD).unwrap();
        for (n, s) in c.partial_sums.iter().enumerate() {
            let oracle = 2.0 / 3.0 * (2f64.powi(n as i32 + 1) - 1.0);
            assert!((s - oracle).abs() < 1e-9 * oracle.max(1.0));
        }
        assert!((c.partial_sums[10] - 1364.666_666_666_666_7).abs() < 1e-9);
        assert_eq!(c.crossed, Some(10));
    }

    #[test]
    fn certificate_matches_birkhoff() {
        let flow = rotation(GOLDEN, 0.3, 0.0);
        let c = divergence_partial_sums(&flow, 0.1, 0.45, 200, CERTIFICATE_THRESHOLD).unwrap();
        for (n, s) in c.partial_sums.iter().enumerate() {
            let n = n as i64 + 1;
            let direct = flow.birkhoff_sum(0.1, n) - flow.birkhoff_sum(0.45, n);
            assert!((s - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn frechet_examples() {
        let spec = band(false);
        let a = sample_trajectory(&spec, Point2::new(1.0, 0.0), 3.0, 0.1).unwrap();
        assert_eq!(discrete_frechet(&a, &a).unwrap(), 0.0);
        let single = |p| Trajectory {
            start_time: 0.0,
            step: 1.0,
            points: vec![p],
            domain: spec.domain,
        };
        let d = discrete_frechet(&single(Point2::new(1.0, 0.0)), &single(Point2::new(0.0, 1.5))).unwrap();
        assert!((d - 1.0f64.hypot(1.5)).abs() < 1e-15);
        let mut torus = single(Point2::new(0.0, 0.0));
        torus.domain = Domain::FlatTorus;
        assert!(matches!(discrete_frechet(&a, &torus), Err(SeparationError::DomainMismatch(..))));
    }

    #[test]
    fn concentric_orbits_are_frechet_close() {
        let spec = band(false);
        let tau = 2.0 * std::f64::consts::PI;
        let a = sample_trajectory(&spec, Point2::new(1.0, 0.0), tau, 0.01).unwrap();
        let b = sample_trajectory(&spec, Point2::new(1.1, 0.0), tau * 1.1, 0.01).unwrap();
        let d = discrete_frechet(&a, &b).unwrap();
        assert!((d - 0.1).abs() < 1e-2, "{d}");
        assert!((discrete_frechet(&b, &a).unwrap() - d).abs() < 1e-15);
    }

    #[test]
    fn sweeps() {
        let flow = halving();
        let pairs: Vec<Pair> = (1..10).map(|i| Pair::Base(i as f64 / 10.0, i as f64 / 10.0)).collect();
        let r = pair_sweep(SweepTarget::Suspension { flow: &flow, rho: 0.5, steps: 100 }, &pairs, SeparationMode::Forward).unwrap();
        assert_eq!(r.fraction_separated, 0.0);
        assert_eq!(r.errors, 0);
        let spec = band(true);
        let pairs: Vec<Pair> = (0..8)
            .map(|i| Pair::Planar(Point2::new(1.0 + 0.1 * i as f64, 0.0), Point2::new(1.05 + 0.1 * i as f64, 0.0)))
            .collect();
        let target = SweepTarget::Field { spec: &spec, delta: 0.1, horizon: 20.0, dt: 0.01 };
        let r = pair_sweep(target, &pairs, SeparationMode::Forward).unwrap();
        assert_eq!(r.fraction_separated, 0.0);
        assert_eq!(r.outcomes.iter().map(|o| o.pair_id).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
        let mixed = [Pair::Base(0.1, 0.2)];
        let r = pair_sweep(target, &mixed, SeparationMode::Forward).unwrap();
        assert_eq!(r.errors, 1);
        assert!(pair_sweep(target, &[], SeparationMode::Forward).is_err());
    }

    #[test]
    fn convergent_denominators() {
        assert_eq!(continued_fraction_denominators(GOLDEN, 10).unwrap(), vec![1, 2, 3, 5, 8, 13, 21, 34, 55, 89]);
        assert_eq!(continued_fraction_denominators(2f64.sqrt() - 1.0, 4).unwrap(), vec![2, 5, 12, 29]);
        let qs = continued_fraction_denominators(GOLDEN, 20).unwrap();
        for w in qs.windows(2) {
            assert!(distance_to_integer(w[1] as f64 * GOLDEN) < distance_to_integer(w[0] as f64 * GOLDEN));
        }
        match continued_fraction_denominators(0.375, 10) {
            Err(SeparationError::Terminated { terms, .. }) => assert_eq!(terms, vec![2, 3, 8]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recurrence_holds_to_max_depth() {
        let qs = continued_fraction_denominators(GOLDEN, MAX_CONVERGENTS).unwrap();
        for w in qs.windows(3) {
            assert_eq!(w[2], w[1] + w[0]);
        }
    }

    #[test]
    fn koksma_constant_is_zero() {
        let flow = SuspensionFlow::new(BaseSpace::Circle, BaseMap::Rotation { alpha: GOLDEN }, ReturnTime::Constant(1.7)).unwrap();
        for n in 1..6 {
            assert!(denjoy_koksma_gap(&flow, n, 1000).unwrap().gap < 1e-12);
        }
    }

    #[test]
    fn koksma_matches_sinusoid_sum() {
        let flow = rotation(GOLDEN, 0.3, 0.0);
        let oracle = |q: u64| 0.3 * (std::f64::consts::PI * q as f64 * GOLDEN).sin().abs() / (std::f64::consts::PI * GOLDEN).sin().abs();
        let rows: Vec<KoksmaRow> = (1..=10).map(|n| denjoy_koksma_gap(&flow, n, 4096).unwrap()).collect();
        for r in &rows {
            assert!((r.gap - oracle(r.q)).abs() < 1e-6, "{r:?}");
        }
        assert!(rows[3..].iter().all(|r| r.gap < rows[1].gap));
        assert!(rows[9].gap < 1e-2);
    }

    #[test]
    fn koksma_rejects_rough_time() {
        let flow = SuspensionFlow::new(
            BaseSpace::Circle,
            BaseMap::Rotation { alpha: GOLDEN },
            ReturnTime::ClosedForm(ClosedForm::Affine { intercept: 1.0, slope: 0.5 }),
        )
        .unwrap();
        assert!(matches!(denjoy_koksma_gap(&flow, 3, 1000), Err(SeparationError::Unsupported(_))));
        assert!(denjoy_koksma_gap(&rotation(GOLDEN, 0.3, 0.0), 3, 999).is_err());
    }

    #[test]
    fn koksma_witness_pair_stays_close() {
        let flow = rotation(GOLDEN, 0.3, 0.0);
        let row = denjoy_koksma_gap(&flow, 8, 4096).unwrap();
        let shift = distance_to_integer(row.q as f64 * GOLDEN);
        let rho = 3.0 * row.gap + 0.1 * shift;
        let x0 = 0.2;
        let y0 = flow.base_iterate(x0, row.q as i64);
        let v = kinematic_check_pair(&flow, x0, y0, rho, 10 * row.q, SeparationMode::Forward).unwrap();
        assert!(!v.separated);
        assert!(v.margin > 0.0);
    }

    #[test]
    fn backward_equals_forward_of_reversed_flow() {
        let alpha = 0.3819660112501051;
        let flow = rotation(alpha, 0.4, 0.0);
        // reversing time rotates by −α and shifts the roof by one step back
        let reversed = rotation(1.0 - alpha, 0.4, alpha);
        for (x, y) in [(0.1, 0.35), (0.5, 0.52), (0.8, 0.05)] {
            let back = kinematic_check_pair(&flow, x, y, 0.6, 400, SeparationMode::Backward).unwrap();
            let fwd = kinematic_check_pair(&reversed, x, y, 0.6, 400, SeparationMode::Forward).unwrap();
            assert_eq!(back.separated, fwd.separated);
            assert_eq!(back.witness_index.map(|n| -n), fwd.witness_index);
            assert_eq!(back.channel, fwd.channel);
            assert!((back.margin - fwd.margin).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_scan_stops_at_base_edge() {
        // 2ⁿ·0.2 leaves [0,1] after three inverse steps
        let v = kinematic_check_pair(&halving(), 0.2, 0.25, 50.0, 64, SeparationMode::Backward).unwrap();
        assert!(!v.separated);
        assert_eq!(v.horizon, Horizon::Steps(2));
    }
}
