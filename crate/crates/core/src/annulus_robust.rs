//! Conservative fields on the annulus: the transverse field
//! `Z = X^⊥/‖X‖²`, its divergence, orbit periods as flux integrals, and the
//! Green identity linking the two.
//!
//! Orientation is fixed once: curves are traversed counterclockwise and the
//! normal between two circles points outward. The flux of `Z` through a
//! circle is then `±T(γ)`, with the sign of `Z·n`: positive for the clockwise
//! family `f(r²)·(y, −x)` with `f > 0`, negative for counterclockwise fields.
//! The area integral of `div Z` between `r1 < r2` equals that sign times
//! `T(r2) − T(r1)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flowcore::{step_rk4, Domain, Field, FieldRule, FlowError, Point2, Profile, VectorFieldSpec};

/// Default half-width of the divergence stencil.
pub const DEFAULT_STENCIL: f64 = 1e-4;
/// `min |div Z|` must exceed this for the criterion to hold.
pub const CRITERION_TOLERANCE: f64 = 1e-8;
const DIVERGENCE_TOLERANCE: f64 = 1e-6;
const TANGENCY_TOLERANCE: f64 = 1e-8;
const AUDIT_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum AnnulusError {
    #[error("conservative fields must live on an annulus, got {0}")]
    NotAnnulus(Domain),
    #[error("the field vanishes at {0}")]
    Vanishing(Point2),
    #[error("divergence {divergence} at {point} exceeds the conservative tolerance")]
    NotConservative { point: Point2, divergence: f64 },
    #[error("radial component {radial} at boundary point {point} is not tangent")]
    NotTangent { point: Point2, radial: f64 },
    #[error("stencil of half-width {h} around {point} leaves the annulus; use a smaller h")]
    StencilOutside { point: Point2, h: f64 },
    #[error("{0} is outside the annulus")]
    Outside(Point2),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// A divergence-free field on an annulus, tangent to both boundary circles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservativeFieldSpec {
    pub underlying: VectorFieldSpec,
    /// Radial profile `f` when the field is `f(r²)·(y, −x)`.
    pub profile: Option<Profile>,
}

fn radii(domain: &Domain) -> Result<(f64, f64), AnnulusError> {
    match *domain {
        Domain::Annulus { r_in, r_out } => Ok((r_in, r_out)),
        other => Err(AnnulusError::NotAnnulus(other)),
    }
}

impl ConservativeFieldSpec {
    /// Audits the field on a polar grid before admitting it.
    pub fn new(underlying: VectorFieldSpec) -> Result<Self, AnnulusError> {
        let (r_in, r_out) = radii(&underlying.domain)?;
        let profile = match &underlying.rule {
            FieldRule::Radial { profile } => Some(profile.clone()),
            FieldRule::RigidRotation => Some(Profile::constant(-1.0)),
            _ => None,
        };
        if let Some(profile) = &profile {
            // a sign change of f between audit radii would slip past the grid
            let first = profile.value(r_in * r_in);
            for k in 0..=1000 {
                let r = r_in + (r_out - r_in) * k as f64 / 1000.0;
                let value = profile.value(r * r);
                if value == 0.0 || value.signum() != first.signum() {
                    return Err(AnnulusError::Vanishing(Point2::new(r, 0.0)));
                }
            }
        }
        let spec = ConservativeFieldSpec { underlying, profile };
        let h = DEFAULT_STENCIL;
        for i in 0..AUDIT_SIZE {
            let theta = 2.0 * PI * i as f64 / AUDIT_SIZE as f64;
            let (c, s) = (theta.cos(), theta.sin());
            for r in [r_in, r_out] {
                let p = Point2::new(r * c, r * s);
                let (a, b) = spec.velocity(p)?;
                let radial = (p.x * a + p.y * b) / r;
                if radial.abs() > TANGENCY_TOLERANCE {
                    return Err(AnnulusError::NotTangent { point: p, radial });
                }
            }
            for k in 0..AUDIT_SIZE {
                let r = r_in + 2.0 * h + (r_out - r_in - 4.0 * h) * k as f64 / (AUDIT_SIZE - 1) as f64;
                let p = Point2::new(r * c, r * s);
                spec.velocity(p)?;
                let divergence = central_divergence(|q| spec.velocity(q), p, h)?;
                if divergence.abs() > DIVERGENCE_TOLERANCE {
                    return Err(AnnulusError::NotConservative { point: p, divergence });
                }
            }
        }
        Ok(spec)
    }

    /// `f(r²)·(y, −x)` on `r_in ≤ r ≤ r_out`.
    pub fn radial(profile: Profile, r_in: f64, r_out: f64) -> Result<Self, AnnulusError> {
        let domain = Domain::annulus(r_in, r_out)?;
        ConservativeFieldSpec::new(VectorFieldSpec::new("radial_profile", domain, FieldRule::Radial { profile }))
    }

    pub fn radii(&self) -> (f64, f64) {
        radii(&self.underlying.domain).expect("checked at construction")
    }

    /// Nonvanishing velocity, evaluated without the domain check so that
    /// quadrature stencils may touch the boundary.
    fn velocity(&self, p: Point2) -> Result<(f64, f64), AnnulusError> {
        let (a, b) = self.underlying.eval_stage(p)?;
        if a == 0.0 && b == 0.0 {
            return Err(AnnulusError::Vanishing(p));
        }
        Ok((a, b))
    }

    fn z_unchecked(&self, p: Point2) -> Result<(f64, f64), AnnulusError> {
        let (a, b) = self.velocity(p)?;
        let n2 = a * a + b * b;
        Ok((-b / n2, a / n2))
    }

    /// Divergence of `Z` at radius `r`: closed form when the profile is known.
    fn div_z_at(&self, p: Point2) -> Result<f64, AnnulusError> {
        match &self.profile {
            Some(profile) => Ok(div_z_closed(profile, p.norm())),
            None => central_divergence(|q| self.z_unchecked(q), p, DEFAULT_STENCIL),
        }
    }
}

fn central_divergence<F>(field: F, p: Point2, h: f64) -> Result<f64, AnnulusError>
where
    F: Fn(Point2) -> Result<(f64, f64), AnnulusError>,
{
    let (east, _) = field(Point2::new(p.x + h, p.y))?;
    let (west, _) = field(Point2::new(p.x - h, p.y))?;
    let (_, north) = field(Point2::new(p.x, p.y + h))?;
    let (_, south) = field(Point2::new(p.x, p.y - h))?;
    Ok((east - west) / (2.0 * h) + (north - south) / (2.0 * h))
}

/// `Z = (−b, a)/(a² + b²)` for `X(p) = (a, b)`.
pub fn z_field(field: &ConservativeFieldSpec, p: Point2) -> Result<(f64, f64), AnnulusError> {
    if !field.underlying.domain.contains(p) {
        return Err(AnnulusError::Outside(p));
    }
    field.z_unchecked(p)
}

/// `∂ₓZ₁ + ∂ᵧZ₂` by central differences of half-width `h`.
pub fn div_z(field: &ConservativeFieldSpec, p: Point2, h: f64) -> Result<f64, AnnulusError> {
    if !(h > 0.0) {
        return Err(AnnulusError::InvalidParameter(format!("stencil width must be positive, got {h}")));
    }
    let domain = field.underlying.domain;
    let corners = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)];
    if corners.iter().any(|(dx, dy)| !domain.contains(Point2::new(p.x + dx, p.y + dy))) {
        return Err(AnnulusError::StencilOutside { point: p, h });
    }
    central_divergence(|q| field.z_unchecked(q), p, h)
}

/// `div Z = −2f′(r²)/f(r²)²` for `X = f(r²)·(y, −x)`.
pub fn div_z_closed(profile: &Profile, r: f64) -> f64 {
    let u = r * r;
    let f = profile.value(u);
    -2.0 * profile.derivative(u) / (f * f)
}

/// A closed orbit, traversed counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitCurve {
    Circle { radius: f64 },
    /// Closed sampled polyline: first point equals last.
    Polyline(Vec<Point2>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub flux_period: f64,
    pub direct_period: Option<f64>,
    /// `|flux − direct|` when both are present.
    pub residual: Option<f64>,
    /// Set when the direct return was requested but never closed up.
    pub direct_failed: bool,
}

/// Settings for the direct-return cross-check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectReturn {
    pub dt: f64,
    /// Give up after this much flow time.
    pub max_time: f64,
}

/// `T(γ) = ∮ 1/‖X‖ dγ` by the composite trapezoid rule on `quad_n` pieces.
pub fn flux_period(field: &ConservativeFieldSpec, gamma: &OrbitCurve, quad_n: usize) -> Result<f64, AnnulusError> {
    if quad_n < 64 {
        return Err(AnnulusError::InvalidParameter(format!("quad_n must be at least 64, got {quad_n}")));
    }
    let domain = field.underlying.domain;
    let speed = |p: Point2| -> Result<f64, AnnulusError> {
        if !domain.contains(p) {
            return Err(AnnulusError::Outside(p));
        }
        let (a, b) = field.velocity(p)?;
        Ok(a.hypot(b))
    };
    match gamma {
        OrbitCurve::Circle { radius } => {
            let step = 2.0 * PI / quad_n as f64;
            let mut total = 0.0;
            for k in 0..quad_n {
                let theta = step * k as f64;
                total += 1.0 / speed(Point2::new(radius * theta.cos(), radius * theta.sin()))?;
            }
            Ok(total * radius * step)
        }
        OrbitCurve::Polyline(points) => {
            if points.len() < 4 || points.first() != points.last() {
                return Err(AnnulusError::InvalidParameter("polyline must be closed with at least three sides".into()));
            }
            let mut total = 0.0;
            for w in points.windows(2) {
                let len = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
                total += 0.5 * len * (1.0 / speed(w[0])? + 1.0 / speed(w[1])?);
            }
            Ok(total)
        }
    }
}

fn turn(from: Point2, to: Point2) -> f64 {
    let cross = from.x * to.y - from.y * to.x;
    let dot = from.x * to.x + from.y * to.y;
    cross.atan2(dot)
}

/// Time for the orbit of `start` to wind once around the origin, or `None`
/// when it does not within `max_time`.
pub fn direct_period(field: &ConservativeFieldSpec, start: Point2, settings: DirectReturn) -> Result<Option<f64>, AnnulusError> {
    let DirectReturn { dt, max_time } = settings;
    if !(dt > 0.0 && max_time > 0.0) {
        return Err(AnnulusError::InvalidParameter("direct return needs dt > 0 and max_time > 0".into()));
    }
    let spec = &field.underlying;
    let full = 2.0 * PI;
    let mut p = start;
    let mut wound = 0.0f64;
    let mut t = 0.0;
    while t < max_time {
        let q = step_rk4(spec, p, dt)?;
        let next = wound + turn(p, q);
        if next.abs() >= full {
            // bisect the last step for the exact crossing
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let m = step_rk4(spec, p, mid)?;
                if (wound + turn(p, m)).abs() >= full {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(t + 0.5 * (lo + hi)));
        }
        wound = next;
        p = q;
        t += dt;
    }
    Ok(None)
}

/// Flux period of `gamma`, optionally cross-checked against a direct return.
pub fn orbit_period_flux(
    field: &ConservativeFieldSpec,
    gamma: &OrbitCurve,
    quad_n: usize,
    direct: Option<DirectReturn>,
) -> Result<PeriodReport, AnnulusError> {
    let flux = flux_period(field, gamma, quad_n)?;
    let Some(settings) = direct else {
        return Ok(PeriodReport {
            flux_period: flux,
            direct_period: None,
            residual: None,
            direct_failed: false,
        });
    };
    let start = match gamma {
        OrbitCurve::Circle { radius } => Point2::new(*radius, 0.0),
        OrbitCurve::Polyline(points) => points[0],
    };
    let direct_period = direct_period(field, start, settings)?;
    Ok(PeriodReport {
        flux_period: flux,
        direct_period,
        residual: direct_period.map(|d| (flux - d).abs()),
        direct_failed: direct_period.is_none(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenReport {
    /// `T(γ₂) − T(γ₁)`
    pub period_difference: f64,
    /// `∬ div Z` over the region between the circles.
    pub area_integral: f64,
    /// Sign of `Z·n` on the circles, `n` the outward normal.
    pub orientation: f64,
    /// `|period_difference − orientation·area_integral|`
    pub residual: f64,
}

/// Both sides of the Green identity between the circles `r1 < r2`: flux
/// periods on the left, composite Simpson in `r` times the periodic
/// trapezoid in `θ` on the right.
pub fn green_check(field: &ConservativeFieldSpec, r1: f64, r2: f64, quad_n: usize) -> Result<GreenReport, AnnulusError> {
    let (r_in, r_out) = field.radii();
    if !(r_in <= r1 && r1 < r2 && r2 <= r_out) {
        return Err(AnnulusError::InvalidParameter(format!(
            "need {r_in} <= r1 < r2 <= {r_out}, got r1={r1}, r2={r2}"
        )));
    }
    let outer = flux_period(field, &OrbitCurve::Circle { radius: r2 }, quad_n)?;
    let inner = flux_period(field, &OrbitCurve::Circle { radius: r1 }, quad_n)?;
    let radial_n = quad_n + quad_n % 2;
    let dr = (r2 - r1) / radial_n as f64;
    let dtheta = 2.0 * PI / quad_n as f64;
    let ring = |r: f64| -> Result<f64, AnnulusError> {
        let mut sum = 0.0;
        for k in 0..quad_n {
            let theta = dtheta * k as f64;
            sum += field.div_z_at(Point2::new(r * theta.cos(), r * theta.sin()))?;
        }
        Ok(sum * dtheta * r)
    };
    let rings: Vec<f64> = (0..=radial_n)
        .into_par_iter()
        .map(|i| ring(r1 + dr * i as f64))
        .collect::<Result<_, _>>()?;
    let mut area = rings[0] + rings[radial_n];
    for (i, v) in rings.iter().enumerate().take(radial_n).skip(1) {
        area += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    area *= dr / 3.0;
    let difference = outer - inner;
    let probe = Point2::new(r1, 0.0);
    let (zx, zy) = field.z_unchecked(probe)?;
    let orientation = (probe.x * zx + probe.y * zy).signum();
    Ok(GreenReport {
        period_difference: difference,
        area_integral: area,
        orientation,
        residual: (difference - orientation * area).abs(),
    })
}

/// One cell of a divergence scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub r: f64,
    pub theta: f64,
    pub div_z: f64,
}

/// `div Z` on a `grid_n × grid_n` polar grid, radii running from boundary to
/// boundary (inset by two stencil widths when the divergence is numerical).
pub fn div_z_grid(field: &ConservativeFieldSpec, grid_n: usize) -> Result<Vec<GridSample>, AnnulusError> {
    if grid_n < 2 {
        return Err(AnnulusError::InvalidParameter(format!("grid must have at least 2 radii, got {grid_n}")));
    }
    let (mut r_in, mut r_out) = field.radii();
    if field.profile.is_none() {
        r_in += 2.0 * DEFAULT_STENCIL;
        r_out -= 2.0 * DEFAULT_STENCIL;
    }
    (0..grid_n * grid_n)
        .into_par_iter()
        .map(|cell| {
            let (i, k) = (cell / grid_n, cell % grid_n);
            let r = r_in + (r_out - r_in) * i as f64 / (grid_n - 1) as f64;
            let theta = 2.0 * PI * k as f64 / grid_n as f64;
            let p = Point2::new(r * theta.cos(), r * theta.sin());
            let div_z = match &field.profile {
                Some(profile) => div_z_closed(profile, r),
                None => div_z(field, p, DEFAULT_STENCIL)?,
            };
            Ok(GridSample { r, theta, div_z })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub satisfied: bool,
    pub min_abs_div: f64,
    pub argmin: Point2,
    pub tolerance: f64,
}

/// `min |div Z|` over the polar grid; the criterion holds when it exceeds
/// [`CRITERION_TOLERANCE`]. Ties go to the lowest grid index.
pub fn robust_criterion(field: &ConservativeFieldSpec, grid_n: usize) -> Result<CriterionVerdict, AnnulusError> {
    if grid_n < 16 {
        return Err(AnnulusError::InvalidParameter(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let samples = div_z_grid(field, grid_n)?;
    let (min_abs_div, index) = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| (s.div_z.abs(), i))
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let best = samples[index];
    Ok(CriterionVerdict {
        satisfied: min_abs_div > CRITERION_TOLERANCE,
        min_abs_div,
        argmin: Point2::new(best.r * best.theta.cos(), best.r * best.theta.sin()),
        tolerance: CRITERION_TOLERANCE,
    })
}

/// How flux periods vary with the radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Flux periods of the circles at `count` evenly spaced radii, with their trend.
pub fn period_trend(field: &ConservativeFieldSpec, count: usize, quad_n: usize) -> Result<(Vec<(f64, f64)>, Trend), AnnulusError> {
    if count < 2 {
        return Err(AnnulusError::InvalidParameter("need at least two radii".into()));
    }
    let (r_in, r_out) = field.radii();
    let rows: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let r = r_in + (r_out - r_in) * i as f64 / (count - 1) as f64;
            flux_period(field, &OrbitCurve::Circle { radius: r }, quad_n).map(|t| (r, t))
        })
        .collect::<Result<_, _>>()?;
    let steps: Vec<f64> = rows.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let trend = if steps.iter().all(|&d| d > 0.0) {
        Trend::Increasing
    } else if steps.iter().all(|&d| d < 0.0) {
        Trend::Decreasing
    } else if steps.iter().all(|&d| d.abs() <= 1e-12) {
        Trend::Constant
    } else {
        Trend::Mixed
    };
    Ok((rows, trend))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> ConservativeFieldSpec {
        ConservativeFieldSpec::radial(Profile::linear(), 1.0, 2.0).unwrap()
    }

    fn unit_speed() -> ConservativeFieldSpec {
        ConservativeFieldSpec::new(VectorFieldSpec::new(
            "band",
            Domain::annulus(1.0, 2.0).unwrap(),
            FieldRule::UnitSpeedRotation,
        ))
        .unwrap()
    }

    fn polar_points(n: usize) -> Vec<Point2> {
        let mut out = Vec::new();
        for i in 0..n {
            for k in 0..n {
                let r = 1.0 + i as f64 / (n - 1) as f64;
                let t = 2.0 * PI * k as f64 / n as f64;
                out.push(Point2::new(r * t.cos(), r * t.sin()));
            }
        }
        out
    }

    #[test]
    fn z_examples() {
        let f = linear();
        let z = z_field(&f, Point2::new(1.0, 0.0)).unwrap();
        assert_eq!(z, (1.0, 0.0));
        for p in polar_points(12) {
            let (a, b) = f.underlying.eval(p).unwrap();
            let (u, v) = z_field(&f, p).unwrap();
            assert!((u * a + v * b).abs() < 1e-15);
            assert!((u.hypot(v) * a.hypot(b) - 1.0).abs() < 1e-14);
        }
        assert!(z_field(&f, Point2::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn divergence_examples() {
        assert!((div_z_closed(&Profile::linear(), 1.5) + 2.0 / 5.0625).abs() < 1e-15);
        assert!((div_z_closed(&Profile::linear(), 1.5) + 0.395062).abs() < 1e-6);
        assert_eq!(div_z_closed(&Profile::constant(3.0), 1.2), 0.0);
        let f = linear();
        let mut points = Vec::new();
        for i in 0..20 {
            for k in 0..20 {
                let r = 1.001 + 0.998 * i as f64 / 19.0;
                let t = 2.0 * PI * k as f64 / 20.0;
                points.push(Point2::new(r * t.cos(), r * t.sin()));
            }
        }
        for p in points {
            let numeric = div_z(&f, p, DEFAULT_STENCIL).unwrap();
            assert!((numeric - div_z_closed(&Profile::linear(), p.norm())).abs() < 1e-5);
        }
        assert!(matches!(
            div_z(&f, Point2::new(1.0, 0.0), DEFAULT_STENCIL),
            Err(AnnulusError::StencilOutside { .. })
        ));
    }

    #[test]
    fn flux_examples() {
        let f = linear();
        let t = flux_period(&f, &OrbitCurve::Circle { radius: 1.5 }, 256).unwrap();
        assert!((t - 2.792_526_803_190_927).abs() < 1e-6);
        assert!((t - 2.0 * PI / 2.25).abs() < 1e-12);
        let rigid = ConservativeFieldSpec::new(VectorFieldSpec::new(
            "rigid",
            Domain::annulus(1.0, 2.0).unwrap(),
            FieldRule::RigidRotation,
        ))
        .unwrap();
        for r in [1.0, 1.3, 2.0] {
            let t = flux_period(&rigid, &OrbitCurve::Circle { radius: r }, 64).unwrap();
            assert!((t - 2.0 * PI).abs() < 1e-8);
        }
        assert!(flux_period(&f, &OrbitCurve::Circle { radius: 1.5 }, 63).is_err());
    }

    #[test]
    fn polyline_flux_converges() {
        let f = linear();
        let polygon = |n: usize| {
            let mut pts: Vec<Point2> = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    Point2::new(1.5 * t.cos(), 1.5 * t.sin())
                })
                .collect();
            pts.push(pts[0]);
            OrbitCurve::Polyline(pts)
        };
        let t = flux_period(&f, &polygon(4096), 64).unwrap();
        assert!((t - 2.0 * PI / 2.25).abs() < 1e-5);
    }

    #[test]
    fn direct_return_agrees() {
        let f = linear();
        let report = orbit_period_flux(
            &f,
            &OrbitCurve::Circle { radius: 1.5 },
            256,
            Some(DirectReturn { dt: 1e-4, max_time: 10.0 }),
        )
        .unwrap();
        assert!(report.residual.unwrap() < 1e-4, "{report:?}");
        let stalled = orbit_period_flux(
            &f,
            &OrbitCurve::Circle { radius: 1.5 },
            256,
            Some(DirectReturn { dt: 1e-2, max_time: 1.0 }),
        )
        .unwrap();
        assert!(stalled.direct_failed && stalled.residual.is_none());
    }

    #[test]
    fn green_examples() {
        let r = green_check(&linear(), 1.0, 2.0, 512).unwrap();
        assert!((r.period_difference + 1.5 * PI).abs() < 1e-9);
        assert!((r.area_integral + 1.5 * PI).abs() < 1e-6);
        assert_eq!(r.orientation, 1.0);
        assert!(r.residual < 1e-6);
        let flat = ConservativeFieldSpec::radial(Profile::constant(2.0), 1.0, 2.0).unwrap();
        let r = green_check(&flat, 1.0, 2.0, 64).unwrap();
        assert!(r.period_difference.abs() < 1e-12 && r.area_integral == 0.0);
    }

    #[test]
    fn green_residual_shrinks_with_quadrature() {
        let f = linear();
        let res: Vec<f64> = [64, 128, 256].iter().map(|&n| green_check(&f, 1.0, 2.0, n).unwrap().residual).collect();
        assert!(res[0] / res[1] >= 4.0 && res[1] / res[2] >= 4.0, "{res:?}");
    }

    #[test]
    fn green_with_numerical_divergence() {
        // unit speed: T(r) = 2πr, so T(2) − T(1) = 2π; Z points inward
        let r = green_check(&unit_speed(), 1.0, 2.0, 128).unwrap();
        assert!((r.period_difference - 2.0 * PI).abs() < 1e-9);
        assert_eq!(r.orientation, -1.0);
        assert!(r.residual < 1e-5, "{r:?}");
    }

    #[test]
    fn criterion_examples() {
        let v = robust_criterion(&linear(), 32).unwrap();
        assert!(v.satisfied);
        assert!((v.min_abs_div - 0.125).abs() < 1e-15);
        assert!((v.argmin.norm() - 2.0).abs() < 1e-12);
        assert_eq!(v.argmin, Point2::new(2.0, 0.0));
        let flat = ConservativeFieldSpec::radial(Profile::constant(1.0), 1.0, 2.0).unwrap();
        let v = robust_criterion(&flat, 16).unwrap();
        assert!(!v.satisfied && v.min_abs_div == 0.0);
        let bumped = ConservativeFieldSpec::radial(Profile::linear().perturbed(0.01), 1.0, 2.0).unwrap();
        assert!(robust_criterion(&bumped, 32).unwrap().satisfied);
        assert!(robust_criterion(&linear(), 15).is_err());
        assert!(robust_criterion(&unit_speed(), 16).unwrap().satisfied);
    }

    #[test]
    fn period_trends_follow_divergence_sign() {
        let (rows, trend) = period_trend(&linear(), 32, 128).unwrap();
        assert_eq!(trend, Trend::Decreasing);
        for (r, t) in rows {
            assert!((t - 2.0 * PI / (r * r)).abs() < 1e-6);
        }
        let falling = ConservativeFieldSpec::radial(
            Profile::Affine {
                intercept: 10.0,
                slope: -1.0,
            },
            1.0,
            2.0,
        )
        .unwrap();
        assert_eq!(period_trend(&falling, 32, 128).unwrap().1, Trend::Increasing);
        let flat = ConservativeFieldSpec::radial(Profile::constant(1.0), 1.0, 2.0).unwrap();
        assert_eq!(period_trend(&flat, 8, 64).unwrap().1, Trend::Constant);
    }

    #[test]
    fn audits_reject_bad_fields() {
        let torus = VectorFieldSpec::new("t", Domain::FlatTorus, FieldRule::Zero);
        assert!(matches!(ConservativeFieldSpec::new(torus), Err(AnnulusError::NotAnnulus(_))));
        let zero = VectorFieldSpec::new("z", Domain::annulus(1.0, 2.0).unwrap(), FieldRule::Zero);
        assert!(matches!(ConservativeFieldSpec::new(zero), Err(AnnulusError::Vanishing(_))));
        let vanishing = ConservativeFieldSpec::radial(
            Profile::Affine {
                intercept: -2.0,
                slope: 1.0,
            },
            1.0,
            2.0,
        );
        assert!(vanishing.is_err());
    }
}
