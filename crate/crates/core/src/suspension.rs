//! Suspension flows over one-dimensional base maps.
//!
//! A state `(x, s)` moves up the fiber over `x` at unit speed; on reaching
//! height `T(x)` it is glued to `(f(x), 0)`. Everything here is exact
//! arithmetic on the base map and the return time, no integration involved.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::split_circle::{rotate, Location, SplitCircle};

/// Grid size used when auditing return-time positivity.
pub const AUDIT_GRID: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuspensionError {
    #[error("invalid base space: {0}")]
    InvalidBase(String),
    #[error("return time {value} at x = {x} is not strictly positive")]
    NonPositiveTime { x: f64, value: f64 },
    #[error("base map sends {x} to {image}, outside the base space")]
    MapLeavesBase { x: f64, image: f64 },
    #[error("return time is not injective: T({x}) and T({y}) fail to separate")]
    NonInjective { x: f64, y: f64 },
    #[error("inserted intervals have total length {total}, which must stay below 0.5")]
    InsertionOverflow { total: f64 },
    #[error("invalid state: fiber height {s} at x = {x} must lie in [0, {roof})")]
    InvalidState { x: f64, s: f64, roof: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The cross-section a suspension is built over.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseSpace {
    Interval { lo: f64, hi: f64 },
    /// Unit-length circle with coordinates in `[0, 1)`.
    Circle,
    /// Strictly increasing sample points.
    FiniteSet(Vec<f64>),
}

impl BaseSpace {
    pub fn interval(lo: f64, hi: f64) -> Result<Self, SuspensionError> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(SuspensionError::InvalidBase(format!("interval needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(BaseSpace::Interval { lo, hi })
    }

    pub fn finite(points: Vec<f64>) -> Result<Self, SuspensionError> {
        if points.is_empty() || points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SuspensionError::InvalidBase(
                "finite base must be nonempty and strictly increasing".into(),
            ));
        }
        Ok(BaseSpace::FiniteSet(points))
    }

    pub fn validate(&self) -> Result<(), SuspensionError> {
        match self {
            BaseSpace::Interval { lo, hi } => BaseSpace::interval(*lo, *hi).map(|_| ()),
            BaseSpace::Circle => Ok(()),
            BaseSpace::FiniteSet(p) => BaseSpace::finite(p.clone()).map(|_| ()),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        const SLACK: f64 = 1e-12;
        match self {
            BaseSpace::Interval { lo, hi } => x >= lo - SLACK && x <= hi + SLACK,
            BaseSpace::Circle => (0.0..1.0).contains(&x),
            BaseSpace::FiniteSet(p) => p.iter().any(|q| (q - x).abs() <= SLACK),
        }
    }

    pub fn distance(&self, a: f64, b: f64) -> f64 {
        match self {
            BaseSpace::Circle => {
                let d = (a - b).rem_euclid(1.0);
                d.min(1.0 - d)
            }
            _ => (a - b).abs(),
        }
    }

    /// Largest possible base distance.
    pub fn diameter(&self) -> f64 {
        match self {
            BaseSpace::Interval { lo, hi } => hi - lo,
            BaseSpace::Circle => 0.5,
            BaseSpace::FiniteSet(p) => p[p.len() - 1] - p[0],
        }
    }

    /// `n` evenly spread points of the base (all points for a finite set).
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        match self {
            BaseSpace::Interval { lo, hi } => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            BaseSpace::Circle => (0..n).map(|i| i as f64 / n as f64).collect(),
            BaseSpace::FiniteSet(p) => p.clone(),
        }
    }
}

/// The return map of the section.
#[derive(Clone, Debug)]
pub enum BaseMap {
    Identity,
    /// `x ↦ x/2`; injective with inverse `x ↦ 2x` where that stays in the base.
    Halving,
    /// `x ↦ −x`
    Negation,
    /// `x ↦ x + alpha mod 1`
    Rotation { alpha: f64 },
    /// Rotation with its orbit of 0 opened into wandering intervals.
    Denjoy(Arc<SplitCircle>),
    /// `points[i] ↦ points[images[i]]`
    FinitePermutation { points: Vec<f64>, images: Vec<usize> },
}

impl BaseMap {
    pub fn forward(&self, x: f64) -> f64 {
        match self {
            BaseMap::Identity => x,
            BaseMap::Halving => 0.5 * x,
            BaseMap::Negation => -x,
            BaseMap::Rotation { alpha } => rotate(x, 1, *alpha),
            BaseMap::Denjoy(c) => c.forward(x),
            BaseMap::FinitePermutation { points, images } => points[images[nearest(points, x)]],
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match self {
            BaseMap::Identity => x,
            BaseMap::Halving => 2.0 * x,
            BaseMap::Negation => -x,
            BaseMap::Rotation { alpha } => rotate(x, -1, *alpha),
            BaseMap::Denjoy(c) => c.inverse(x),
            BaseMap::FinitePermutation { points, images } => {
                let i = nearest(points, x);
                let pre = images.iter().position(|&j| j == i).expect("permutation");
                points[pre]
            }
        }
    }

    /// `fⁿ(x)` for any integer `n`; rotations jump in one step.
    pub fn iterate(&self, x: f64, n: i64) -> f64 {
        match self {
            BaseMap::Identity => x,
            BaseMap::Negation => {
                if n % 2 == 0 {
                    x
                } else {
                    -x
                }
            }
            BaseMap::Rotation { alpha } => {
                if n == 0 {
                    x
                } else {
                    rotate(x, n, *alpha)
                }
            }
            BaseMap::Halving => {
                let k = n.clamp(-2000, 2000) as i32;
                // split the power so intermediate factors stay normal
                x * 2f64.powi(-k / 2) * 2f64.powi(-(k - k / 2))
            }
            _ => {
                let mut y = x;
                if n >= 0 {
                    for _ in 0..n {
                        y = self.forward(y);
                    }
                } else {
                    for _ in 0..(-n) {
                        y = self.inverse(y);
                    }
                }
                y
            }
        }
    }
}

fn nearest(points: &[f64], x: f64) -> usize {
    let k = points.partition_point(|&p| p < x);
    match k {
        0 => 0,
        k if k == points.len() => k - 1,
        k => {
            if (points[k] - x).abs() < (x - points[k - 1]).abs() {
                k
            } else {
                k - 1
            }
        }
    }
}

/// Linear interpolation through sorted knots, constant `default` off the support.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
    default: f64,
}

impl PiecewiseLinear {
    pub fn new(mut knots: Vec<(f64, f64)>, default: f64) -> Result<Self, SuspensionError> {
        if knots.is_empty() {
            return Err(SuspensionError::InvalidParameter("piecewise-linear needs knots".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(SuspensionError::InvalidParameter("knot positions must be distinct".into()));
        }
        Ok(PiecewiseLinear { knots, default })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn eval(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x < first.0 || x > last.0 {
            return self.default;
        }
        let k = self.knots.partition_point(|k| k.0 <= x);
        let (x0, y0) = self.knots[k - 1];
        if k == self.knots.len() || x == x0 {
            return y0;
        }
        let (x1, y1) = self.knots[k];
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }
}

/// Named closed-form return times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedForm {
    /// `1/max(x, floor)`: the reciprocal truncated where it would blow up.
    Reciprocal { floor: f64 },
    /// `1 + x²`
    Quadratic,
    /// `1 + amplitude·sin(2π(x − phase))`
    Sinusoidal { amplitude: f64, phase: f64 },
    /// `intercept + slope·x`
    Affine { intercept: f64, slope: f64 },
}

impl ClosedForm {
    pub fn sinusoidal(amplitude: f64) -> Self {
        ClosedForm::Sinusoidal { amplitude, phase: 0.0 }
    }

    fn eval(&self, x: f64) -> f64 {
        match *self {
            ClosedForm::Reciprocal { floor } => 1.0 / x.max(floor),
            ClosedForm::Quadratic => 1.0 + x * x,
            ClosedForm::Sinusoidal { amplitude, phase } => 1.0 + amplitude * (2.0 * PI * (x - phase)).sin(),
            ClosedForm::Affine { intercept, slope } => intercept + slope * x,
        }
    }
}

/// A linear ramp on the rotation circle: value `1 + height` at `left`,
/// falling linearly to 1 at `left + width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp {
    pub left: f64,
    pub width: f64,
    pub height: f64,
}

/// A return time given on the rotation circle (continuous except for jumps
/// at ramp left ends) and lifted to a [`SplitCircle`]. On each inserted
/// interval it interpolates between the left and right limits at the
/// corresponding orbit point.
#[derive(Clone, Debug)]
pub struct LiftedReturnTime {
    circle: Arc<SplitCircle>,
    ramps: Vec<Ramp>,
}

impl LiftedReturnTime {
    pub fn new(circle: Arc<SplitCircle>, mut ramps: Vec<Ramp>) -> Self {
        ramps.sort_by(|a, b| a.left.total_cmp(&b.left));
        LiftedReturnTime { circle, ramps }
    }

    pub fn ramps(&self) -> &[Ramp] {
        &self.ramps
    }

    /// Right-continuous value on the rotation circle.
    pub fn on_rotation(&self, theta: f64) -> f64 {
        let k = self.ramps.partition_point(|r| r.left <= theta);
        if k == 0 {
            return 1.0;
        }
        let r = self.ramps[k - 1];
        if theta < r.left + r.width {
            1.0 + r.height * (r.left + r.width - theta) / r.width
        } else {
            1.0
        }
    }

    pub fn left_limit(&self, theta: f64) -> f64 {
        if self.ramps.iter().any(|r| r.left == theta) {
            1.0
        } else {
            self.on_rotation(theta)
        }
    }

    fn eval(&self, y: f64) -> f64 {
        match self.circle.locate(y) {
            Location::Gap { theta } => self.on_rotation(theta),
            Location::Inside { index, offset, length } => {
                let theta = self.circle.orbit_point(index);
                let lo = self.left_limit(theta);
                let hi = self.on_rotation(theta);
                if offset <= 0.0 || length <= 0.0 {
                    lo
                } else if offset >= length {
                    hi
                } else {
                    lo + offset / length * (hi - lo)
                }
            }
        }
    }
}

/// Return-time (roof) function.
#[derive(Clone, Debug)]
pub enum ReturnTime {
    Constant(f64),
    ClosedForm(ClosedForm),
    PiecewiseLinear(PiecewiseLinear),
    Lifted(LiftedReturnTime),
}

impl ReturnTime {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ReturnTime::Constant(c) => *c,
            ReturnTime::ClosedForm(c) => c.eval(x),
            ReturnTime::PiecewiseLinear(p) => p.eval(x),
            ReturnTime::Lifted(l) => l.eval(x),
        }
    }

    /// Points where the function changes slope, checked on top of the audit grid.
    fn audit_points(&self) -> Vec<f64> {
        match self {
            ReturnTime::PiecewiseLinear(p) => p.knots().iter().map(|k| k.0).collect(),
            ReturnTime::Lifted(l) => l.ramps().iter().flat_map(|r| [r.left, r.left + r.width]).collect(),
            _ => Vec::new(),
        }
    }
}

/// A point `(x, s)` of the mapping torus, `0 ≤ s < T(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuspState {
    pub x: f64,
    pub s: f64,
}

impl SuspState {
    pub fn on_section(x: f64) -> Self {
        SuspState { x, s: 0.0 }
    }
}

/// The section dynamics a separation test needs: one step each way, the
/// time spent in the fiber before the next step, and the base metric.
pub trait Section {
    fn step(&self, x: f64) -> f64;
    fn step_back(&self, x: f64) -> f64;
    /// Time from `(x, 0)` to `(step(x), 0)`.
    fn roof(&self, x: f64) -> f64;
    fn base_distance(&self, a: f64, b: f64) -> f64;
    /// Whether `x` is in the base; orbits of partial inverses can leave it.
    fn in_base(&self, x: f64) -> bool;

    /// `T_n(x)`: time from `(x, 0)` to `(fⁿ(x), 0)`, negative for `n < 0`.
    fn birkhoff_sum(&self, x: f64, n: i64) -> f64 {
        let mut acc = 0.0;
        let mut y = x;
        if n >= 0 {
            for _ in 0..n {
                acc += self.roof(y);
                y = self.step(y);
            }
        } else {
            for _ in 0..(-n) {
                y = self.step_back(y);
                acc -= self.roof(y);
            }
        }
        acc
    }
}

/// The suspension of `map` under `time` over `base`.
#[derive(Clone, Debug)]
pub struct SuspensionFlow {
    pub base: BaseSpace,
    pub map: BaseMap,
    pub time: ReturnTime,
}

impl SuspensionFlow {
    /// Builds the flow after auditing positivity of the return time and
    /// invariance of the base.
    pub fn new(base: BaseSpace, map: BaseMap, time: ReturnTime) -> Result<Self, SuspensionError> {
        base.validate()?;
        if let BaseMap::FinitePermutation { points, images } = &map {
            let mut seen = vec![false; points.len()];
            for &j in images {
                if j >= points.len() || std::mem::replace(&mut seen[j], true) {
                    return Err(SuspensionError::InvalidParameter("image table is not a permutation".into()));
                }
            }
            if images.len() != points.len() {
                return Err(SuspensionError::InvalidParameter("image table is not a permutation".into()));
            }
        }
        let flow = SuspensionFlow { base, map, time };
        let mut probes = flow.base.grid(AUDIT_GRID);
        probes.extend(flow.time.audit_points().into_iter().filter(|x| flow.base.contains(*x)));
        for x in probes {
            let value = flow.time.eval(x);
            if !(value > 0.0 && value.is_finite()) {
                return Err(SuspensionError::NonPositiveTime { x, value });
            }
            let image = flow.map.forward(x);
            if !flow.base.contains(image) {
                return Err(SuspensionError::MapLeavesBase { x, image });
            }
        }
        Ok(flow)
    }

    pub fn roof_at(&self, x: f64) -> f64 {
        self.time.eval(x)
    }

    /// Smallest return time over the audit grid.
    pub fn min_return_time(&self) -> f64 {
        let mut probes = self.base.grid(AUDIT_GRID);
        probes.extend(self.time.audit_points().into_iter().filter(|x| self.base.contains(*x)));
        probes.into_iter().map(|x| self.time.eval(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn state(&self, x: f64, s: f64) -> Result<SuspState, SuspensionError> {
        let roof = self.roof_at(x);
        if !self.base.contains(x) || !(0.0..roof).contains(&s) {
            return Err(SuspensionError::InvalidState { x, s, roof });
        }
        Ok(SuspState { x, s })
    }

    pub fn base_iterate(&self, x: f64, n: i64) -> f64 {
        self.map.iterate(x, n)
    }

    /// Flows `state` for time `t`, wrapping through the gluing as often as needed.
    pub fn evaluate(&self, state: SuspState, t: f64) -> SuspState {
        let target = state.s + t;
        let mut x = state.x;
        let mut acc = 0.0;
        if target >= 0.0 {
            loop {
                let roof = self.roof_at(x);
                if target < acc + roof {
                    break;
                }
                acc += roof;
                x = self.map.forward(x);
            }
        } else {
            while target < acc {
                x = self.map.inverse(x);
                acc -= self.roof_at(x);
            }
        }
        SuspState { x, s: target - acc }
    }

    /// Metric on the mapping torus built from the three one-step gluing charts.
    pub fn distance(&self, a: SuspState, b: SuspState) -> f64 {
        let d = |p: f64, q: f64| self.base.distance(p, q);
        let direct = d(a.x, b.x) + (a.s - b.s).abs();
        let a_up = d(self.map.forward(a.x), b.x) + (self.roof_at(a.x) - a.s) + b.s;
        let b_up = d(a.x, self.map.forward(b.x)) + (self.roof_at(b.x) - b.s) + a.s;
        direct.min(a_up).min(b_up)
    }

    /// The time-reversed flow viewed through its section.
    pub fn reversed(&self) -> Reversed<'_> {
        Reversed(self)
    }
}

impl Section for SuspensionFlow {
    fn step(&self, x: f64) -> f64 {
        self.map.forward(x)
    }

    fn step_back(&self, x: f64) -> f64 {
        self.map.inverse(x)
    }

    fn roof(&self, x: f64) -> f64 {
        self.time.eval(x)
    }

    fn base_distance(&self, a: f64, b: f64) -> f64 {
        self.base.distance(a, b)
    }

    fn in_base(&self, x: f64) -> bool {
        self.base.contains(x)
    }
}

/// `φ_{−t}` as a suspension of `f⁻¹` under `T∘f⁻¹`.
#[derive(Clone, Copy, Debug)]
pub struct Reversed<'a>(pub &'a SuspensionFlow);

impl Section for Reversed<'_> {
    fn step(&self, x: f64) -> f64 {
        self.0.map.inverse(x)
    }

    fn step_back(&self, x: f64) -> f64 {
        self.0.map.forward(x)
    }

    fn roof(&self, x: f64) -> f64 {
        self.0.time.eval(self.0.map.inverse(x))
    }

    fn base_distance(&self, a: f64, b: f64) -> f64 {
        self.0.base.distance(a, b)
    }

    fn in_base(&self, x: f64) -> bool {
        self.0.base.contains(x) && self.0.base.contains(self.0.map.inverse(x))
    }
}
