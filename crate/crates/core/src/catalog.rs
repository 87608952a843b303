//! Constructors for the example flows, with their standard parameters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::flowcore::{Domain, FieldRule, Point2, VectorFieldSpec};
use crate::split_circle::{rotate, Decay, SplitCircle, MAX_WINDOW};
use crate::suspension::{
    BaseMap, BaseSpace, ClosedForm, LiftedReturnTime, PiecewiseLinear, Ramp, ReturnTime, SuspensionError,
    SuspensionFlow, AUDIT_GRID,
};

/// Default truncation of the Denjoy tent schedule.
pub const DEFAULT_DENJOY_N_MAX: u32 = 30;
/// Default number of harmonic ramps in the minimal example.
pub const DEFAULT_KS_J_MAX: u32 = 12;
/// Insertion window of the Denjoy circle; lengths `L·2^{−64}` are below resolution.
const DENJOY_WINDOW: i64 = 64;
/// Base interval length for the minimal example's split circle.
pub const KS_INTERVAL_LENGTH: f64 = 0.1;
const KS_MIN_WINDOW: i64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExampleId {
    PeriodicBand,
    RigidBand,
    TorusFakeSaddle,
    MoebiusSuspension,
    DiscReciprocal,
    BandKnots,
    IdentitySuspension,
    DenjoySuspension,
    KSMinimal,
    RotationSmooth,
}

impl ExampleId {
    pub const ALL: [ExampleId; 10] = [
        ExampleId::PeriodicBand,
        ExampleId::RigidBand,
        ExampleId::TorusFakeSaddle,
        ExampleId::MoebiusSuspension,
        ExampleId::DiscReciprocal,
        ExampleId::BandKnots,
        ExampleId::IdentitySuspension,
        ExampleId::DenjoySuspension,
        ExampleId::KSMinimal,
        ExampleId::RotationSmooth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExampleId::PeriodicBand => "PeriodicBand",
            ExampleId::RigidBand => "RigidBand",
            ExampleId::TorusFakeSaddle => "TorusFakeSaddle",
            ExampleId::MoebiusSuspension => "MoebiusSuspension",
            ExampleId::DiscReciprocal => "DiscReciprocal",
            ExampleId::BandKnots => "BandKnots",
            ExampleId::IdentitySuspension => "IdentitySuspension",
            ExampleId::DenjoySuspension => "DenjoySuspension",
            ExampleId::KSMinimal => "KSMinimal",
            ExampleId::RotationSmooth => "RotationSmooth",
        }
    }

    /// One-line description of the construction.
    pub fn anchor(self) -> &'static str {
        match self {
            ExampleId::PeriodicBand => "annulus 1<=r<=2 foliated by unit-speed circles (-y,x)/r",
            ExampleId::RigidBand => "annulus 1<=r<=2 under the rigid rotation (-y,x)",
            ExampleId::TorusFakeSaddle => "linear torus flow (1,alpha) slowed to a single fake saddle",
            ExampleId::MoebiusSuspension => "suspension of x->-x on [-1,1] under T(x)=1+x^2",
            ExampleId::DiscReciprocal => "suspension of x->x/2 under T(x)=1/x, truncated at x_min",
            ExampleId::BandKnots => "suspension of x->x/2 with T(b_n)=1+1/(n+1), T(a_n)=1",
            ExampleId::IdentitySuspension => "identity map suspended under an injective return time",
            ExampleId::DenjoySuspension => "Denjoy circle map with halving wandering intervals, T(z_n)=1+1/n",
            ExampleId::KSMinimal => "rotation split along the orbit of 0, T(x_{n_j})=1+1/j",
            ExampleId::RotationSmooth => "irrational rotation under T(x)=1+a*sin(2*pi*x)",
        }
    }

    pub fn is_field(self) -> bool {
        matches!(self, ExampleId::PeriodicBand | ExampleId::RigidBand | ExampleId::TorusFakeSaddle)
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExampleId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown example `{s}`"))
    }
}

/// Unit-speed circles (`rigid = false`) or the rigid rotation of the band `1 ≤ r ≤ 2`.
pub fn periodic_band(rigid: bool) -> VectorFieldSpec {
    let domain = Domain::Annulus { r_in: 1.0, r_out: 2.0 };
    if rigid {
        VectorFieldSpec::new("rigid_band", domain, FieldRule::RigidRotation)
    } else {
        VectorFieldSpec::new("periodic_band", domain, FieldRule::UnitSpeedRotation)
    }
}

/// `f(q)·(1, alpha)` on the flat torus, `f` vanishing only at `zero`.
pub fn torus_fake_saddle(alpha: f64, zero: Point2) -> Result<VectorFieldSpec, SuspensionError> {
    if !alpha.is_finite() {
        return Err(SuspensionError::InvalidParameter(format!("alpha must be finite, got {alpha}")));
    }
    if !((0.0..1.0).contains(&zero.x) && (0.0..1.0).contains(&zero.y)) {
        return Err(SuspensionError::InvalidParameter(format!("zero {zero} must lie in [0,1)²")));
    }
    Ok(
        VectorFieldSpec::new("torus_fake_saddle", Domain::FlatTorus, FieldRule::TorusFakeSaddle { alpha, zero })
            .with_parameter("alpha", alpha)
            .with_parameter("zero_x", zero.x)
            .with_parameter("zero_y", zero.y),
    )
}

pub fn moebius_suspension() -> SuspensionFlow {
    SuspensionFlow::new(
        BaseSpace::Interval { lo: -1.0, hi: 1.0 },
        BaseMap::Negation,
        ReturnTime::ClosedForm(ClosedForm::Quadratic),
    )
    .expect("the Möbius suspension is well formed")
}

/// Halving on `[0,1]` under `T(x) = 1/max(x, x_min)`.
///
/// Halving never leaves `[0,1]` but does leave `[x_min, 1]`, so the base is
/// the full interval and the reciprocal is frozen below `x_min`.
pub fn disc_reciprocal_suspension(x_min: f64) -> Result<SuspensionFlow, SuspensionError> {
    if !(x_min > 0.0 && x_min < 1.0) {
        return Err(SuspensionError::InvalidParameter(format!("x_min must lie in (0,1), got {x_min}")));
    }
    SuspensionFlow::new(
        BaseSpace::Interval { lo: 0.0, hi: 1.0 },
        BaseMap::Halving,
        ReturnTime::ClosedForm(ClosedForm::Reciprocal { floor: x_min }),
    )
}

/// `a_n = 2^{−n}`.
pub fn band_knot_a(n: u32) -> f64 {
    0.5f64.powi(n as i32)
}

/// `b_n = (1/2 + 2^{−(n+2)})·2^{−n}`.
pub fn band_knot_b(n: u32) -> f64 {
    (0.5 + 0.5f64.powi(n as i32 + 2)) * band_knot_a(n)
}

/// Halving on `[0,1]` with `T(a_n) = 1`, `T(b_n) = 1 + 1/(n+1)` for `n ≤ n_max`,
/// linear in between and 1 below `a_{n_max+1}`.
pub fn band_knots_suspension(n_max: u32) -> Result<SuspensionFlow, SuspensionError> {
    if !(1..=40).contains(&n_max) {
        return Err(SuspensionError::InvalidParameter(format!("n_max must lie in 1..=40, got {n_max}")));
    }
    let mut knots = vec![(0.0, 1.0)];
    for n in 0..=n_max + 1 {
        knots.push((band_knot_a(n), 1.0));
    }
    for n in 0..=n_max {
        knots.push((band_knot_b(n), 1.0 + 1.0 / (n as f64 + 1.0)));
    }
    SuspensionFlow::new(
        BaseSpace::Interval { lo: 0.0, hi: 1.0 },
        BaseMap::Halving,
        ReturnTime::PiecewiseLinear(PiecewiseLinear::new(knots, 1.0)?),
    )
}

/// The identity map suspended under `time`, which must be injective.
pub fn identity_suspension(base: BaseSpace, time: ReturnTime) -> Result<SuspensionFlow, SuspensionError> {
    base.validate()?;
    let samples = base.grid(AUDIT_GRID);
    let values: Vec<f64> = samples.iter().map(|&x| time.eval(x)).collect();
    match base {
        BaseSpace::FiniteSet(_) => {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
            for w in order.windows(2) {
                if values[w[0]] == values[w[1]] {
                    return Err(SuspensionError::NonInjective {
                        x: samples[w[0]],
                        y: samples[w[1]],
                    });
                }
            }
        }
        _ => {
            // a continuous injective function of one variable is strictly monotone
            let rising = values[1] > values[0];
            for k in 1..values.len() {
                let step = values[k] - values[k - 1];
                if step == 0.0 || (step > 0.0) != rising {
                    return Err(SuspensionError::NonInjective {
                        x: samples[k - 1],
                        y: samples[k],
                    });
                }
            }
        }
    }
    SuspensionFlow::new(base, BaseMap::Identity, time)
}

/// Denjoy circle map over the rotation by `alpha`: orbit points of 0 are
/// opened into intervals of length `interval_length·2^{−|n|}`, and the return
/// time is a tent of height `1/n` on the `n`-th forward image for `1 ≤ n ≤ n_max`.
pub fn denjoy_suspension(alpha: f64, interval_length: f64, n_max: u32) -> Result<SuspensionFlow, SuspensionError> {
    if !(1..=30).contains(&n_max) {
        return Err(SuspensionError::InvalidParameter(format!("n_max must lie in 1..=30, got {n_max}")));
    }
    let circle = SplitCircle::new(alpha, interval_length, Decay::Geometric, DENJOY_WINDOW)?;
    let mut knots = Vec::with_capacity(3 * n_max as usize);
    for n in 1..=n_max as i64 {
        let (start, end) = circle.interval(n).expect("tents lie inside the window");
        let peak = start + (end - start) / (n as f64 + 2.0);
        knots.extend([(start, 1.0), (peak, 1.0 + 1.0 / n as f64), (end, 1.0)]);
    }
    SuspensionFlow::new(
        BaseSpace::Circle,
        BaseMap::Denjoy(Arc::new(circle)),
        ReturnTime::PiecewiseLinear(PiecewiseLinear::new(knots, 1.0)?),
    )
}

/// Tent peak `z_n` of the Denjoy return time.
pub fn denjoy_peak(flow: &SuspensionFlow, n: i64) -> Option<f64> {
    let BaseMap::Denjoy(circle) = &flow.map else {
        return None;
    };
    let (start, end) = circle.interval(n)?;
    Some(start + (end - start) / (n as f64 + 2.0))
}

/// The minimal example together with its distinguished data.
#[derive(Clone, Debug)]
pub struct KsMinimal {
    pub flow: SuspensionFlow,
    /// Left endpoint of the interval opened at 0.
    pub zero_minus: f64,
    /// Right endpoint of the interval opened at 0.
    pub zero_plus: f64,
    /// Return times `n_1 < n_2 < …` of the orbit of 0 to shrinking right neighbourhoods.
    pub returns: Vec<u64>,
    /// Ramp widths `δ_j` on the rotation circle.
    pub widths: Vec<f64>,
}

/// Successive first-entry times of `nα mod 1` into `(0, x_{n_{j−1}})`.
pub fn closest_returns(alpha: f64, count: usize, limit: u64) -> Result<Vec<u64>, SuspensionError> {
    let mut returns = Vec::with_capacity(count);
    let mut bound = 1.0;
    let mut n = 0u64;
    while returns.len() < count {
        n += 1;
        if n > limit {
            return Err(SuspensionError::InvalidParameter(format!(
                "only {} returns of the orbit of 0 below index {limit}",
                returns.len()
            )));
        }
        let x = rotate(0.0, n as i64, alpha);
        if x > 0.0 && x < bound {
            returns.push(n);
            bound = x;
        }
    }
    Ok(returns)
}

/// The rotation by `alpha` split along the whole orbit of 0 (lengths decaying
/// like `|n|^{−3}`), with `T` ramping linearly from `1 + 1/j` at `x_{n_j}`
/// down to 1 at `x_{n_j} + δ_j`, and 1 elsewhere.
pub fn ks_minimal_suspension(alpha: f64, j_max: u32) -> Result<KsMinimal, SuspensionError> {
    if !(1..=20).contains(&j_max) {
        return Err(SuspensionError::InvalidParameter(format!("j_max must lie in 1..=20, got {j_max}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SuspensionError::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let returns = closest_returns(alpha, j_max as usize, (MAX_WINDOW / 2) as u64)?;
    let points: Vec<f64> = returns.iter().map(|&n| rotate(0.0, n as i64, alpha)).collect();
    let mut ramps: Vec<Ramp> = Vec::with_capacity(points.len());
    let mut widths = Vec::with_capacity(points.len());
    for (j, &x) in points.iter().enumerate() {
        let previous = if j == 0 { 1.0 } else { points[j - 1] };
        let mut width = (previous - x) / 2.0;
        if let Some(&w) = widths.last() {
            width = width.min(w / 2.0);
        }
        while ramps.iter().any(|r: &Ramp| x < r.left + r.width && r.left < x + width) {
            width /= 2.0;
        }
        if !(x + width > x) || width < 8.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            return Err(SuspensionError::InvalidParameter(format!(
                "ramp {} at {x} cannot be kept disjoint at double precision",
                j + 1
            )));
        }
        widths.push(width);
        ramps.push(Ramp {
            left: x,
            width,
            height: 1.0 / (j as f64 + 1.0),
        });
    }
    let last = *returns.last().expect("j_max >= 1") as i64;
    let window = KS_MIN_WINDOW.max(2 * last);
    let circle = Arc::new(SplitCircle::new(alpha, KS_INTERVAL_LENGTH, Decay::InverseCube, window)?);
    let (zero_minus, zero_plus) = circle.interval(0).expect("0 is always inserted");
    let time = ReturnTime::Lifted(LiftedReturnTime::new(Arc::clone(&circle), ramps));
    let flow = SuspensionFlow::new(BaseSpace::Circle, BaseMap::Denjoy(circle), time)?;
    Ok(KsMinimal {
        flow,
        zero_minus,
        zero_plus,
        returns,
        widths,
    })
}

/// The rotation by `alpha` under `T(x) = 1 + amplitude·sin(2πx)`.
pub fn rotation_smooth_suspension(alpha: f64, amplitude: f64) -> Result<SuspensionFlow, SuspensionError> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(SuspensionError::InvalidParameter(format!("amplitude must lie in [0,1), got {amplitude}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SuspensionError::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    SuspensionFlow::new(
        BaseSpace::Circle,
        BaseMap::Rotation { alpha },
        ReturnTime::ClosedForm(ClosedForm::sinusoidal(amplitude)),
    )
}

/// Harmonic number `H_j`.
pub fn harmonic(j: u32) -> f64 {
    (1..=j).rev().map(|k| 1.0 / k as f64).sum()
}
