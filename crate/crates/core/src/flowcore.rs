//! Planar and flat-torus vector fields with a fixed-step RK4 integrator.
//!
//! Every field in the catalog is a closed-form rule evaluated pointwise. The
//! integrator never adapts its step: separation experiments compare two orbits
//! on the same time grid, and a fixed grid keeps those comparisons
//! reproducible.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Slack applied to radial domain checks, relative to the outer radius.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Absolute slack on step outputs. RK4 drifts orbits on a boundary circle
/// inward by O(t·dt⁵), far less than this.
const OUTPUT_SLACK: f64 = 1e-6;

/// A point in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn offset(self, v: (f64, f64), scale: f64) -> Point2 {
        Point2::new(self.x + scale * v.0, self.y + scale * v.1)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("point {point} lies outside the {domain} domain")]
    OutsideDomain { point: Point2, domain: Domain },
    #[error("field `{field}` is singular at {point}")]
    Singular { field: String, point: Point2 },
    #[error("integration stage {stage} left the domain at {point}")]
    Escape { stage: u8, point: Point2 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trajectory escaped after {samples} samples: {source}", samples = partial.points.len())]
    TrajectoryEscape {
        partial: Box<Trajectory>,
        source: Box<FlowError>,
    },
}

/// Phase space of a planar flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Annulus { r_in: f64, r_out: f64 },
    Disc { radius: f64 },
    FlatTorus,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Annulus { r_in, r_out } => write!(f, "annulus [{r_in}, {r_out}]"),
            Domain::Disc { radius } => write!(f, "disc of radius {radius}"),
            Domain::FlatTorus => f.write_str("flat torus"),
        }
    }
}

impl Domain {
    pub fn annulus(r_in: f64, r_out: f64) -> Result<Self, FlowError> {
        if !(r_in > 0.0 && r_out > r_in && r_out.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "annulus radii must satisfy 0 < r_in < r_out, got [{r_in}, {r_out}]"
            )));
        }
        Ok(Domain::Annulus { r_in, r_out })
    }

    pub fn disc(radius: f64) -> Result<Self, FlowError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(FlowError::InvalidParameter(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(Domain::Disc { radius })
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.contains_within(p, 0.0)
    }

    /// Membership in the domain widened by an absolute `margin`.
    pub fn contains_within(&self, p: Point2, margin: f64) -> bool {
        if !p.is_finite() {
            return false;
        }
        match *self {
            Domain::Annulus { r_in, r_out } => {
                let slack = BOUNDARY_SLACK * r_out + margin;
                let r = p.norm();
                r >= r_in - slack && r <= r_out + slack
            }
            Domain::Disc { radius } => p.norm() <= radius * (1.0 + BOUNDARY_SLACK) + margin,
            Domain::FlatTorus => true,
        }
    }

    /// Largest distance between two points of the domain.
    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Annulus { r_out, .. } => 2.0 * r_out,
            Domain::Disc { radius } => 2.0 * radius,
            Domain::FlatTorus => 0.5f64.hypot(0.5),
        }
    }

    /// Canonical representative of a point: torus coordinates reduced to [0,1).
    pub fn normalize(&self, p: Point2) -> Point2 {
        match self {
            Domain::FlatTorus => Point2::new(reduce_unit(p.x), reduce_unit(p.y)),
            _ => p,
        }
    }
}

fn reduce_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Radial profile `f` of the field `f(r²)·(y, −x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `f(u) = intercept + slope·u`
    Affine { intercept: f64, slope: f64 },
    /// `f(u) = base(u) + eps·sin(u)`
    Perturbed { base: Box<Profile>, eps: f64 },
}

impl Profile {
    /// The identity profile `f(u) = u`.
    pub fn linear() -> Self {
        Profile::Affine {
            intercept: 0.0,
            slope: 1.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Profile::Affine {
            intercept: c,
            slope: 0.0,
        }
    }

    pub fn perturbed(self, eps: f64) -> Self {
        Profile::Perturbed {
            base: Box::new(self),
            eps,
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Profile::Affine { intercept, slope } => intercept + slope * u,
            Profile::Perturbed { base, eps } => base.value(u) + eps * u.sin(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Profile::Affine { slope, .. } => *slope,
            Profile::Perturbed { base, eps } => base.derivative(u) + eps * u.cos(),
        }
    }
}

/// Closed-form velocity rules available to [`VectorFieldSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldRule {
    Zero,
    /// `(−y, x)`: constant angular velocity.
    RigidRotation,
    /// `(−y, x)/‖(x, y)‖`: unit speed on every circle.
    UnitSpeedRotation,
    /// `f(r²)·(y, −x)`.
    Radial { profile: Profile },
    /// `f(q)·(1, alpha)` on the flat torus, with `f` vanishing only at `zero`.
    TorusFakeSaddle { alpha: f64, zero: Point2 },
}

/// A named planar velocity field on a declared domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldSpec {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub domain: Domain,
    pub rule: FieldRule,
}

impl VectorFieldSpec {
    pub fn new(name: impl Into<String>, domain: Domain, rule: FieldRule) -> Self {
        VectorFieldSpec {
            name: name.into(),
            parameters: BTreeMap::new(),
            domain,
            rule,
        }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    /// Points where the rule itself is undefined.
    pub fn singular_points(&self) -> Vec<Point2> {
        match self.rule {
            FieldRule::UnitSpeedRotation => vec![Point2::ORIGIN],
            _ => Vec::new(),
        }
    }

    /// The same field with its orbits traversed backwards.
    pub fn reversed(&self) -> ReversedField<'_> {
        ReversedField(self)
    }

    fn checked_velocity(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        if self.singular_points().iter().any(|s| *s == p) {
            return Err(FlowError::Singular {
                field: self.name.clone(),
                point: p,
            });
        }
        Ok(self.velocity(p))
    }

    fn velocity(&self, p: Point2) -> (f64, f64) {
        match &self.rule {
            FieldRule::Zero => (0.0, 0.0),
            FieldRule::RigidRotation => (-p.y, p.x),
            FieldRule::UnitSpeedRotation => {
                let r = p.norm();
                (-p.y / r, p.x / r)
            }
            FieldRule::Radial { profile } => {
                let f = profile.value(p.x * p.x + p.y * p.y);
                (f * p.y, -f * p.x)
            }
            FieldRule::TorusFakeSaddle { alpha, zero } => {
                let f = fake_saddle_density(p, *zero);
                (f, f * alpha)
            }
        }
    }
}

/// `sin²(π(q_x−p_x)) + sin²(π(q_y−p_y))`: smooth on the torus, zero only at `p`.
pub fn fake_saddle_density(q: Point2, p: Point2) -> f64 {
    let sx = (PI * (q.x - p.x)).sin();
    let sy = (PI * (q.y - p.y)).sin();
    sx * sx + sy * sy
}

/// Anything that can be integrated by [`step_rk4`].
pub trait Field {
    fn domain(&self) -> Domain;
    fn eval(&self, p: Point2) -> Result<(f64, f64), FlowError>;

    /// Evaluation at an internal stage point, which may sit a hair outside
    /// the domain when the orbit runs along a boundary circle.
    fn eval_stage(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        self.eval(p)
    }
}

impl Field for VectorFieldSpec {
    fn domain(&self) -> Domain {
        self.domain
    }

    fn eval(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        eval_field(self, p)
    }

    fn eval_stage(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        self.checked_velocity(p)
    }
}

/// A field with its velocity negated.
#[derive(Clone, Copy, Debug)]
pub struct ReversedField<'a>(pub &'a VectorFieldSpec);

impl Field for ReversedField<'_> {
    fn domain(&self) -> Domain {
        self.0.domain
    }

    fn eval(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        eval_field(self.0, p).map(|(u, v)| (-u, -v))
    }

    fn eval_stage(&self, p: Point2) -> Result<(f64, f64), FlowError> {
        self.0.checked_velocity(p).map(|(u, v)| (-u, -v))
    }
}

pub fn eval_field(spec: &VectorFieldSpec, p: Point2) -> Result<(f64, f64), FlowError> {
    if !spec.domain.contains(p) {
        return Err(FlowError::OutsideDomain {
            point: p,
            domain: spec.domain,
        });
    }
    spec.checked_velocity(p)
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4<F: Field + ?Sized>(field: &F, p: Point2, dt: f64) -> Result<Point2, FlowError> {
    if dt == 0.0 || !dt.is_finite() {
        return Err(FlowError::InvalidParameter(format!(
            "step must be finite and non-zero, got {dt}"
        )));
    }
    let domain = field.domain();
    if !domain.contains_within(p, OUTPUT_SLACK) {
        return Err(FlowError::OutsideDomain { point: p, domain });
    }
    let k1 = field.eval_stage(p)?;
    // stage points of an orbit on a boundary circle cut the chord, so they
    // may leave the domain by O(dt²); only the step output must stay inside
    let margin = dt * dt * (k1.0 * k1.0 + k1.1 * k1.1).max(1.0);
    let stage = |n: u8, q: Point2, margin: f64| {
        if domain.contains_within(q, margin) {
            Ok(q)
        } else {
            Err(FlowError::Escape { stage: n, point: q })
        }
    };
    let p2 = stage(2, p.offset(k1, 0.5 * dt), margin)?;
    let k2 = field.eval_stage(p2)?;
    let p3 = stage(3, p.offset(k2, 0.5 * dt), margin)?;
    let k3 = field.eval_stage(p3)?;
    let p4 = stage(4, p.offset(k3, dt), margin)?;
    let k4 = field.eval_stage(p4)?;
    let next = Point2::new(
        p.x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        p.y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    );
    let next = stage(5, next, OUTPUT_SLACK)?;
    Ok(domain.normalize(next))
}

/// Splits `|t|` into whole steps of `dt` and a fractional remainder.
fn step_plan(t: f64, dt: f64) -> (u64, f64) {
    let span = t.abs();
    let whole = (span / dt).floor();
    let rest = span - whole * dt;
    if rest <= 1e-12 * dt {
        (whole as u64, 0.0)
    } else {
        (whole as u64, rest)
    }
}

/// Integrates `field` from `p` for time `t` (either sign).
pub fn flow_to<F: Field + ?Sized>(field: &F, p: Point2, t: f64, dt: f64) -> Result<Point2, FlowError> {
    if !(dt > 0.0) || !t.is_finite() {
        return Err(FlowError::InvalidParameter(format!(
            "flow_to needs dt > 0 and finite t, got dt={dt}, t={t}"
        )));
    }
    let domain = field.domain();
    if !domain.contains(p) {
        return Err(FlowError::OutsideDomain { point: p, domain });
    }
    let p = domain.normalize(p);
    if t == 0.0 {
        return Ok(p);
    }
    let sign = t.signum();
    let (whole, rest) = step_plan(t, dt);
    let mut q = p;
    for _ in 0..whole {
        q = step_rk4(field, q, sign * dt)?;
    }
    if rest > 0.0 {
        q = step_rk4(field, q, sign * rest)?;
    }
    Ok(q)
}

/// A uniformly sampled orbit segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_time: f64,
    pub step: f64,
    pub points: Vec<Point2>,
    pub domain: Domain,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.step
    }

    pub fn last(&self) -> Point2 {
        *self.points.last().expect("trajectories are nonempty")
    }
}

/// Number of grid samples in `[0, horizon]` at spacing `dt`, endpoints included.
pub fn sample_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) * (1.0 + 1e-12)).floor() as usize + 1
}

/// Samples the orbit of `p` at times `0, dt, 2dt, …` up to `horizon`.
pub fn sample_trajectory<F: Field + ?Sized>(
    field: &F,
    p: Point2,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory, FlowError> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(FlowError::InvalidParameter(format!(
            "sampling needs horizon > 0 and dt > 0, got horizon={horizon}, dt={dt}"
        )));
    }
    let domain = field.domain();
    if !domain.contains(p) {
        return Err(FlowError::OutsideDomain { point: p, domain });
    }
    let count = sample_count(horizon, dt);
    let mut traj = Trajectory {
        start_time: 0.0,
        step: dt,
        points: Vec::with_capacity(count),
        domain,
    };
    let mut q = domain.normalize(p);
    traj.points.push(q);
    for _ in 1..count {
        match step_rk4(field, q, dt) {
            Ok(next) => {
                q = next;
                traj.points.push(q);
            }
            Err(source) => {
                return Err(FlowError::TrajectoryEscape {
                    partial: Box::new(traj),
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(traj)
}

/// Distance in the domain's own metric (flat quotient metric on the torus).
pub fn domain_distance(domain: &Domain, p: Point2, q: Point2) -> f64 {
    match domain {
        Domain::FlatTorus => {
            let wrap = |a: f64, b: f64| {
                let d = (a - b).rem_euclid(1.0);
                d.min(1.0 - d)
            };
            wrap(p.x, q.x).hypot(wrap(p.y, q.y))
        }
        _ => (p.x - q.x).hypot(p.y - q.y),
    }
}

/// Largest pairwise distance over the sampled segment `φ_[0,s](p)`.
///
/// Samples sit on the grid `0, dt, 2dt, …` plus the endpoint `s`, so the
/// value is a lower bound on the true diameter.
pub fn orbit_segment_diameter<F: Field + ?Sized>(
    field: &F,
    p: Point2,
    s: f64,
    dt: f64,
) -> Result<f64, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let domain = field.domain();
    let sign = s.signum();
    let (whole, rest) = step_plan(s, dt);
    let mut samples = Vec::with_capacity(whole as usize + 2);
    let mut q = domain.normalize(p);
    samples.push(q);
    for _ in 0..whole {
        q = step_rk4(field, q, sign * dt)?;
        samples.push(q);
    }
    if rest > 0.0 {
        samples.push(step_rk4(field, q, sign * rest)?);
    }
    let mut diam = 0.0f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            diam = diam.max(domain_distance(&domain, *a, *b));
        }
    }
    Ok(diam)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> VectorFieldSpec {
        VectorFieldSpec::new(
            "band",
            Domain::annulus(1.0, 2.0).unwrap(),
            FieldRule::UnitSpeedRotation,
        )
    }

    fn rigid() -> VectorFieldSpec {
        VectorFieldSpec::new(
            "rigid",
            Domain::annulus(1.0, 2.0).unwrap(),
            FieldRule::RigidRotation,
        )
    }

    fn plane_rotation() -> VectorFieldSpec {
        VectorFieldSpec::new("rot", Domain::disc(10.0).unwrap(), FieldRule::RigidRotation)
    }

    fn close(a: Point2, b: Point2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn band_velocity_matches_closed_form() {
        let f = band();
        assert_eq!(eval_field(&f, Point2::new(1.0, 0.0)).unwrap(), (0.0, 1.0));
        assert_eq!(eval_field(&f, Point2::new(0.0, 2.0)).unwrap(), (-1.0, 0.0));
    }

    #[test]
    fn fake_saddle_vanishes_at_its_zero() {
        let p = Point2::new(0.3, 0.7);
        let f = VectorFieldSpec::new(
            "saddle",
            Domain::FlatTorus,
            FieldRule::TorusFakeSaddle { alpha: 0.5, zero: p },
        );
        assert_eq!(eval_field(&f, p).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn outside_domain_and_singularity_are_errors() {
        let f = band();
        assert!(matches!(
            eval_field(&f, Point2::new(0.5, 0.0)),
            Err(FlowError::OutsideDomain { .. })
        ));
        let g = VectorFieldSpec::new("bad", Domain::disc(1.0).unwrap(), FieldRule::UnitSpeedRotation);
        assert!(matches!(
            eval_field(&g, Point2::ORIGIN),
            Err(FlowError::Singular { .. })
        ));
    }

    #[test]
    fn zero_field_is_stationary() {
        let f = VectorFieldSpec::new("zero", Domain::disc(1.0).unwrap(), FieldRule::Zero);
        let p = Point2::new(0.2, -0.3);
        assert_eq!(step_rk4(&f, p, 0.1).unwrap(), p);
    }

    #[test]
    fn rk4_step_tracks_exact_rotation() {
        let q = step_rk4(&plane_rotation(), Point2::new(1.0, 0.0), 0.01).unwrap();
        assert!(close(q, Point2::new(0.01f64.cos(), 0.01f64.sin()), 1e-9));
    }

    #[test]
    fn rk4_zero_step_rejected() {
        assert!(step_rk4(&plane_rotation(), Point2::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn escape_reports_stage() {
        // a coarse step cuts across the inner circle
        let err = step_rk4(&rigid(), Point2::new(1.0, 0.0), 1.5).unwrap_err();
        assert!(matches!(err, FlowError::Escape { .. }), "{err}");
    }

    #[test]
    fn halving_the_step_cuts_band_error_sixteenfold() {
        let f = band();
        let p = Point2::new(1.5, 0.0);
        let t = 3.0;
        let reference = flow_to(&f, p, t, 0.1 / 16.0).unwrap();
        let err = |dt: f64| {
            let q = flow_to(&f, p, t, dt).unwrap();
            (q.x - reference.x).hypot(q.y - reference.y)
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn flow_to_zero_time_is_identity() {
        let p = Point2::new(1.2, 0.4);
        assert_eq!(flow_to(&band(), p, 0.0, 1e-3).unwrap(), p);
    }

    #[test]
    fn band_returns_after_one_circumference() {
        let q = flow_to(&band(), Point2::new(1.0, 0.0), 2.0 * PI, 1e-3).unwrap();
        assert!(close(q, Point2::new(1.0, 0.0), 1e-6), "{q}");
    }

    #[test]
    fn flow_composes() {
        let f = band();
        let p = Point2::new(1.3, 0.2);
        let a = flow_to(&f, flow_to(&f, p, 1.7, 1e-3).unwrap(), 2.45, 1e-3).unwrap();
        let b = flow_to(&f, p, 1.7 + 2.45, 1e-3).unwrap();
        assert!(close(a, b, 1e-8));
    }

    #[test]
    fn flow_reverses() {
        for f in [band(), rigid()] {
            let p = Point2::new(0.9, 1.1);
            let q = flow_to(&f, p, 10.0, 1e-3).unwrap();
            let back = flow_to(&f, q, -10.0, 1e-3).unwrap();
            assert!(close(back, p, 1e-7));
        }
    }

    #[test]
    fn band_conserves_radius() {
        let f = band();
        let p = Point2::new(1.4, 0.3);
        let traj = sample_trajectory(&f, p, 100.0, 1e-3).unwrap();
        let r0 = p.norm();
        let worst = traj
            .points
            .iter()
            .map(|q| (q.norm() - r0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn sample_counts() {
        let f = band();
        let one = sample_trajectory(&f, Point2::new(1.0, 0.0), 0.5e-3, 1e-3).unwrap();
        assert_eq!(one.len(), 1);
        let full = sample_trajectory(&f, Point2::new(1.0, 0.0), 2.0 * PI, 0.01).unwrap();
        assert_eq!(full.len(), 629);
        assert!(full.points.iter().all(|q| (q.norm() - 1.0).abs() < 1e-6));
        assert!((full.time(628) - 6.28).abs() < 1e-12);
    }

    #[test]
    fn rigid_rotation_keeps_mutual_distance() {
        let f = rigid();
        let a = sample_trajectory(&f, Point2::new(1.0, 0.0), 20.0, 0.01).unwrap();
        let b = sample_trajectory(&f, Point2::new(2.0, 0.0), 20.0, 0.01).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((domain_distance(&f.domain, *p, *q) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn escape_keeps_partial_trajectory() {
        let f = VectorFieldSpec::new(
            "radial",
            Domain::disc(1.0).unwrap(),
            FieldRule::Radial {
                profile: Profile::constant(1.0),
            },
        );
        // stays on its circle, so no escape
        assert!(sample_trajectory(&f, Point2::new(0.5, 0.0), 1.0, 0.01).is_ok());
        let g = VectorFieldSpec::new("rigid", Domain::annulus(1.0, 2.0).unwrap(), FieldRule::RigidRotation);
        // at this step size the update amplifies the radius by about 1.5
        let err = sample_trajectory(&g, Point2::new(2.0, 0.0), 10.0, 3.0).unwrap_err();
        match err {
            FlowError::TrajectoryEscape { partial, .. } => assert_eq!(partial.len(), 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn distances() {
        let t = Domain::FlatTorus;
        let p = Point2::new(0.3, 0.8);
        assert_eq!(domain_distance(&t, p, p), 0.0);
        let d = domain_distance(&t, Point2::new(0.05, 0.0), Point2::new(0.95, 0.0));
        assert!((d - 0.1).abs() < 1e-15);
        let a = Domain::annulus(1.0, 2.0).unwrap();
        assert_eq!(domain_distance(&a, Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)), 1.0);
    }

    #[test]
    fn torus_points_stay_reduced() {
        let f = VectorFieldSpec::new(
            "saddle",
            Domain::FlatTorus,
            FieldRule::TorusFakeSaddle {
                alpha: 0.618,
                zero: Point2::new(0.5, 0.5),
            },
        );
        let traj = sample_trajectory(&f, Point2::new(0.9, 0.95), 10.0, 0.01).unwrap();
        assert!(traj
            .points
            .iter()
            .all(|q| (0.0..1.0).contains(&q.x) && (0.0..1.0).contains(&q.y)));
    }

    #[test]
    fn segment_diameter() {
        let f = band();
        let p = Point2::new(1.0, 0.0);
        assert_eq!(orbit_segment_diameter(&f, p, 0.0, 1e-3).unwrap(), 0.0);
        let d = orbit_segment_diameter(&f, p, PI, 1e-3).unwrap();
        assert!((d - 2.0).abs() < 1e-3, "{d}");
        let short = orbit_segment_diameter(&f, p, 0.5, 0.01).unwrap();
        let long = orbit_segment_diameter(&f, p, 1.0, 0.01).unwrap();
        assert!(short <= long);
        let back = orbit_segment_diameter(&f, p, -0.5, 0.01).unwrap();
        assert!((back - short).abs() < 1e-9);
    }
}
