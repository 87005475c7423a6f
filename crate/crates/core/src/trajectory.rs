//! Piecewise cubic Bézier trajectories with absolute time stamps.
//!
//! A [`Trajectory`] is a contiguous list of [`PolySegment`]s. Past the end of
//! the last segment the trajectory holds its final position forever, so a
//! committed trajectory can always be executed no matter how long the
//! protocol takes to replace it.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Times closer than this are treated as the same instant when splitting.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("query before trajectory start (t = {t}, start = {start})")]
    QueryBeforeStart { t: f64, start: f64 },
    #[error("trajectory has no segments")]
    Empty,
    #[error("segment {index} has non-positive duration")]
    DegenerateSegment { index: usize },
    #[error("segments {index} and {next} are not contiguous in time", next = index + 1)]
    NonContiguous { index: usize },
    #[error("non-finite value in segment {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl StateSample {
    pub fn at_rest(t: f64, position: Vec3) -> Self {
        Self {
            t,
            position,
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
        }
    }
}

/// Per-axis bounds on velocity, acceleration and jerk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
}

impl Default for DynamicLimits {
    fn default() -> Self {
        Self {
            v_max: 10.0,
            a_max: 20.0,
            j_max: 30.0,
        }
    }
}

impl DynamicLimits {
    pub fn is_valid(&self) -> bool {
        [self.v_max, self.a_max, self.j_max]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            v_max: self.v_max * factor,
            a_max: self.a_max * factor,
            j_max: self.j_max * factor,
        }
    }
}

/// Thresholds for detecting mid-flight stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub v_stop: f64,
    pub t_min_stop: f64,
    #[serde(default = "default_stop_grid")]
    pub grid: f64,
}

fn default_stop_grid() -> f64 {
    0.01
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            v_stop: 0.1,
            t_min_stop: 0.2,
            grid: default_stop_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothnessIntegrals {
    /// ∫‖a‖² dt in m²/s³.
    pub accel_integral: f64,
    /// ∫‖j‖² dt in m²/s⁵.
    pub jerk_integral: f64,
}

/// A cubic Bézier curve over the absolute time interval `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolySegment {
    pub t0: f64,
    pub t1: f64,
    pub control_points: [Vec3; 4],
}

impl PolySegment {
    pub fn new(t0: f64, t1: f64, control_points: [Vec3; 4]) -> Result<Self, TrajectoryError> {
        let seg = Self { t0, t1, control_points };
        seg.validate(0)?;
        Ok(seg)
    }

    pub fn constant(p: Vec3, t0: f64, t1: f64) -> Self {
        Self {
            t0,
            t1,
            control_points: [p; 4],
        }
    }

    fn validate(&self, index: usize) -> Result<(), TrajectoryError> {
        let finite = self.t0.is_finite()
            && self.t1.is_finite()
            && self.control_points.iter().all(|p| p.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(TrajectoryError::NonFinite { index });
        }
        if self.t1 - self.t0 <= 0.0 {
            return Err(TrajectoryError::DegenerateSegment { index });
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    fn local(&self, t: f64) -> f64 {
        ((t - self.t0) / self.duration()).clamp(0.0, 1.0)
    }

    /// Position at normalized parameter `u ∈ [0, 1]` by de Casteljau.
    pub fn position_at_u(&self, u: f64) -> Vec3 {
        let [p0, p1, p2, p3] = self.control_points;
        let a = p0.lerp(&p1, u);
        let b = p1.lerp(&p2, u);
        let c = p2.lerp(&p3, u);
        let d = a.lerp(&b, u);
        let e = b.lerp(&c, u);
        d.lerp(&e, u)
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.position_at_u(self.local(t))
    }

    pub fn state(&self, t: f64) -> StateSample {
        let u = self.local(t);
        let [v0, v1, v2] = self.velocity_control_points();
        let [a0, a1] = self.acceleration_control_points();
        let va = v0.lerp(&v1, u);
        let vb = v1.lerp(&v2, u);
        StateSample {
            t,
            position: self.position_at_u(u),
            velocity: va.lerp(&vb, u),
            acceleration: a0.lerp(&a1, u),
        }
    }

    /// Control points of the quadratic Bézier velocity curve (m/s).
    pub fn velocity_control_points(&self) -> [Vec3; 3] {
        let h = self.duration();
        let p = &self.control_points;
        [
            (p[1] - p[0]) * (3.0 / h),
            (p[2] - p[1]) * (3.0 / h),
            (p[3] - p[2]) * (3.0 / h),
        ]
    }

    /// Control points of the linear acceleration curve (m/s²).
    pub fn acceleration_control_points(&self) -> [Vec3; 2] {
        let h = self.duration();
        let p = &self.control_points;
        let k = 6.0 / (h * h);
        [(p[2] - p[1] * 2.0 + p[0]) * k, (p[3] - p[2] * 2.0 + p[1]) * k]
    }

    /// The (constant) jerk of the segment (m/s³).
    pub fn jerk(&self) -> Vec3 {
        let h = self.duration();
        let p = &self.control_points;
        (p[3] - p[2] * 3.0 + p[1] * 3.0 - p[0]) * (6.0 / (h * h * h))
    }

    /// Blossom of the cubic evaluated at normalized parameters.
    fn blossom(&self, u: [f64; 3]) -> Vec3 {
        let mut pts = self.control_points;
        for (level, &ui) in u.iter().enumerate() {
            for k in 0..(3 - level) {
                pts[k] = pts[k].lerp(&pts[k + 1], ui);
            }
        }
        pts[0]
    }

    /// Bézier control points of the restriction of this segment to `[ta, tb]`.
    pub fn sub_control_points(&self, ta: f64, tb: f64) -> [Vec3; 4] {
        let a = self.local(ta);
        let b = self.local(tb);
        [
            self.blossom([a, a, a]),
            self.blossom([a, a, b]),
            self.blossom([a, b, b]),
            self.blossom([b, b, b]),
        ]
    }

    pub fn restricted(&self, ta: f64, tb: f64) -> PolySegment {
        PolySegment {
            t0: ta,
            t1: tb,
            control_points: self.sub_control_points(ta, tb),
        }
    }

    pub fn smoothness(&self) -> SmoothnessIntegrals {
        let h = self.duration();
        let [a0, a1] = self.acceleration_control_points();
        let j = self.jerk();
        SmoothnessIntegrals {
            // acceleration is linear in time: ∫|a0 + (a1-a0)u|² h du
            accel_integral: h * (a0.norm_squared() + a0.dot(&a1) + a1.norm_squared()) / 3.0,
            jerk_integral: h * j.norm_squared(),
        }
    }

    pub fn within_limits(&self, limits: &DynamicLimits) -> bool {
        let inside = |v: &Vec3, bound: f64| v.iter().all(|c| c.abs() <= bound);
        self.velocity_control_points().iter().all(|v| inside(v, limits.v_max))
            && self
                .acceleration_control_points()
                .iter()
                .all(|a| inside(a, limits.a_max))
            && inside(&self.jerk(), limits.j_max)
    }
}

/// Contiguous piecewise cubic trajectory; holds its final position forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryRepr", into = "TrajectoryRepr")]
pub struct Trajectory {
    segments: Vec<PolySegment>,
}

impl Trajectory {
    pub fn new(segments: Vec<PolySegment>) -> Result<Self, TrajectoryError> {
        if segments.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (i, s) in segments.iter().enumerate() {
            s.validate(i)?;
        }
        for (i, w) in segments.windows(2).enumerate() {
            if (w[0].t1 - w[1].t0).abs() > TIME_EPS {
                return Err(TrajectoryError::NonContiguous { index: i });
            }
        }
        Ok(Self { segments })
    }

    /// A trajectory that sits at `p` from `t0` onwards.
    pub fn hold(p: Vec3, t0: f64) -> Self {
        Self {
            segments: vec![PolySegment::constant(p, t0, t0 + 1.0)],
        }
    }

    pub fn segments(&self) -> &[PolySegment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn end_time(&self) -> f64 {
        self.segments[self.segments.len() - 1].t1
    }

    pub fn terminal_hold(&self) -> Vec3 {
        self.segments[self.segments.len() - 1].control_points[3]
    }

    /// Index of the segment containing `t`, or `None` when `t` lies in the
    /// terminal hold. Assumes `t >= start_time()`.
    pub fn segment_index(&self, t: f64) -> Option<usize> {
        let i = self.segments.partition_point(|s| s.t1 <= t);
        (i < self.segments.len()).then_some(i)
    }

    pub fn evaluate(&self, t: f64) -> Result<StateSample, TrajectoryError> {
        let start = self.start_time();
        if t < start {
            return Err(TrajectoryError::QueryBeforeStart { t, start });
        }
        Ok(match self.segment_index(t) {
            Some(i) => self.segments[i].state(t),
            None => StateSample::at_rest(t, self.terminal_hold()),
        })
    }

    /// Position at `t`; times before the start are clamped to the start.
    pub fn position(&self, t: f64) -> Vec3 {
        match self.segment_index(t) {
            Some(i) => self.segments[i].position(t),
            None => self.terminal_hold(),
        }
    }

    /// Control points of the curve over `[ta, tb]`, which must not straddle a
    /// segment boundary. Inside the terminal hold this is four copies of the
    /// final position.
    pub fn control_points_over(&self, ta: f64, tb: f64) -> [Vec3; 4] {
        let mid = 0.5 * (ta + tb);
        match self.segment_index(mid) {
            Some(i) => self.segments[i].sub_control_points(ta, tb),
            None => [self.terminal_hold(); 4],
        }
    }

    /// The same motion with everything before `t` removed. Past the end the
    /// result is a pure hold starting at `t`.
    pub fn restrict_from(&self, t: f64) -> Trajectory {
        if t <= self.start_time() + TIME_EPS {
            return self.clone();
        }
        let Some(i) = self.segment_index(t) else {
            return Trajectory::hold(self.terminal_hold(), t);
        };
        let mut segments = Vec::with_capacity(self.segments.len() - i);
        let first = &self.segments[i];
        let sliver = first.t1 - t <= TIME_EPS;
        if sliver {
            // t sits on the boundary; the next segment is stretched back to t below
        } else if t - first.t0 <= TIME_EPS {
            segments.push(*first);
        } else {
            segments.push(first.restricted(t, first.t1));
        }
        segments.extend_from_slice(&self.segments[i + 1..]);
        if segments.is_empty() {
            return Trajectory::hold(self.terminal_hold(), t);
        }
        if sliver {
            segments[0].t0 = t;
        }
        Trajectory { segments }
    }

    /// Follows `self` until `t`, then `next` (which must be defined at `t`).
    /// If `t` is past the end of `self`, the gap is filled with the hold.
    pub fn splice(&self, next: &Trajectory, t: f64) -> Result<Trajectory, TrajectoryError> {
        if next.start_time() > t + TIME_EPS {
            return Err(TrajectoryError::QueryBeforeStart {
                t,
                start: next.start_time(),
            });
        }
        let mut segments = Vec::with_capacity(self.segments.len() + next.segments.len() + 1);
        for s in &self.segments {
            if s.t1 <= t + TIME_EPS {
                segments.push(*s);
            } else {
                if t - s.t0 > TIME_EPS {
                    segments.push(s.restricted(s.t0, t));
                }
                break;
            }
        }
        let mut seam = match segments.last() {
            Some(s) => s.t1,
            None => self.start_time(),
        };
        if t - seam > TIME_EPS {
            segments.push(PolySegment::constant(self.terminal_hold(), seam, t));
            seam = t;
        }
        let tail = next.restrict_from(t);
        for (k, s) in tail.segments.iter().enumerate() {
            let mut s = *s;
            if k == 0 {
                // absorb rounding so the junction is exact
                s.t0 = seam;
            }
            segments.push(s);
        }
        Trajectory::new(segments)
    }

    /// The motion over `[t0, t1]`, without any hold beyond the last segment.
    pub fn window(&self, t0: f64, t1: f64) -> Trajectory {
        let tail = self.restrict_from(t0);
        if t1 >= tail.end_time() - TIME_EPS {
            return tail;
        }
        let mut segments = Vec::with_capacity(tail.segments.len());
        for s in &tail.segments {
            if s.t1 <= t1 + TIME_EPS {
                segments.push(*s);
            } else {
                if t1 - s.t0 > TIME_EPS {
                    segments.push(s.restricted(s.t0, t1));
                }
                break;
            }
        }
        if segments.is_empty() {
            return Trajectory::hold(tail.position(t0), t0);
        }
        Trajectory { segments }
    }

    pub fn smoothness_integrals(&self) -> SmoothnessIntegrals {
        self.segments
            .iter()
            .map(PolySegment::smoothness)
            .fold(SmoothnessIntegrals::default(), |acc, s| SmoothnessIntegrals {
                accel_integral: acc.accel_integral + s.accel_integral,
                jerk_integral: acc.jerk_integral + s.jerk_integral,
            })
    }

    /// Sufficient (hull-based) check of per-axis dynamic limits.
    pub fn check_limits(&self, limits: &DynamicLimits) -> bool {
        self.segments.iter().all(|s| s.within_limits(limits))
    }

    /// Number of mid-flight stops: maximal runs of grid samples with speed
    /// below `v_stop` lasting at least `t_min_stop`. Runs touching the start
    /// or the end of the trajectory (take-off and terminal hover) are ignored.
    pub fn count_stops(&self, criteria: &StopCriteria) -> usize {
        let start = self.start_time();
        let span = self.end_time() - start;
        let n = (span / criteria.grid).floor() as usize;
        let min_samples = (criteria.t_min_stop / criteria.grid - 1e-9).ceil() as usize;
        let mut stops = 0;
        let mut run: Option<usize> = None;
        for k in 0..=n {
            let t = start + k as f64 * criteria.grid;
            let slow = self
                .evaluate(t)
                .map(|s| s.velocity.norm() < criteria.v_stop)
                .unwrap_or(false);
            match (slow, run) {
                (true, None) => run = Some(k),
                (false, Some(first)) => {
                    if first > 0 && k - first >= min_samples {
                        stops += 1;
                    }
                    run = None;
                }
                _ => {}
            }
        }
        stops
    }

    /// Maximum junction mismatch of position, velocity and acceleration.
    pub fn max_junction_gap(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| {
                let a = w[0].state(w[0].t1);
                let b = w[1].state(w[1].t0);
                (a.position - b.position)
                    .norm()
                    .max((a.velocity - b.velocity).norm())
                    .max((a.acceleration - b.acceleration).norm())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentRepr {
    t0: f64,
    t1: f64,
    cps: [[f64; 3]; 4],
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRepr {
    segments: Vec<SegmentRepr>,
}

impl TryFrom<TrajectoryRepr> for Trajectory {
    type Error = TrajectoryError;

    fn try_from(repr: TrajectoryRepr) -> Result<Self, Self::Error> {
        let segments = repr
            .segments
            .into_iter()
            .map(|s| PolySegment {
                t0: s.t0,
                t1: s.t1,
                control_points: s.cps.map(Vec3::from),
            })
            .collect();
        Trajectory::new(segments)
    }
}

impl From<Trajectory> for TrajectoryRepr {
    fn from(traj: Trajectory) -> Self {
        TrajectoryRepr {
            segments: traj
                .segments
                .into_iter()
                .map(|s| SegmentRepr {
                    t0: s.t0,
                    t1: s.t1,
                    cps: s.control_points.map(|p| [p.x, p.y, p.z]),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn single(cps: [Vec3; 4], t0: f64, t1: f64) -> Trajectory {
        Trajectory::new(vec![PolySegment::new(t0, t1, cps).unwrap()]).unwrap()
    }

    /// Direct cubic Bernstein sum, independent of de Casteljau.
    fn bernstein(cps: &[Vec3; 4], u: f64) -> Vec3 {
        let w = 1.0 - u;
        cps[0] * (w * w * w) + cps[1] * (3.0 * w * w * u) + cps[2] * (3.0 * w * u * u) + cps[3] * (u * u * u)
    }

    #[test]
    fn constant_curve_is_at_rest() {
        let p = v(1.0, 2.0, 3.0);
        let traj = single([p; 4], 0.0, 2.0);
        let s = traj.evaluate(1.0).unwrap();
        assert_eq!(s.position, p);
        assert_eq!(s.velocity, Vec3::zeros());
        assert_eq!(s.acceleration, Vec3::zeros());
    }

    #[test]
    fn straight_line_unit_speed() {
        let traj = single(
            [
                v(0.0, 0.0, 0.0),
                v(1.0 / 3.0, 0.0, 0.0),
                v(2.0 / 3.0, 0.0, 0.0),
                v(1.0, 0.0, 0.0),
            ],
            0.0,
            1.0,
        );
        let s = traj.evaluate(0.5).unwrap();
        assert_relative_eq!(s.position, v(0.5, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(s.velocity, v(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn ease_curve_matches_bernstein_sum() {
        let cps = [v(0.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(1.0, 0.0, 0.0)];
        let traj = single(cps, 0.0, 1.0);
        let expected = bernstein(&cps, 0.5);
        assert_relative_eq!(expected, v(0.5, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(traj.evaluate(0.5).unwrap().position, expected, epsilon = 1e-15);
    }

    #[test]
    fn query_before_start_is_an_error() {
        let traj = Trajectory::hold(Vec3::zeros(), 1.0);
        let err = traj.evaluate(0.5).unwrap_err();
        assert!(err.to_string().contains("query before trajectory start"));
    }

    #[test]
    fn terminal_hold_has_zero_derivatives() {
        let traj = single(
            [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0), v(3.0, 0.0, 0.0)],
            0.0,
            1.0,
        );
        let s = traj.evaluate(7.0).unwrap();
        assert_eq!(s.position, v(3.0, 0.0, 0.0));
        assert_eq!(s.velocity, Vec3::zeros());
    }

    #[test]
    fn rejects_gaps_and_empty() {
        assert_eq!(Trajectory::new(vec![]), Err(TrajectoryError::Empty));
        let a = PolySegment::constant(Vec3::zeros(), 0.0, 1.0);
        let b = PolySegment::constant(Vec3::zeros(), 1.5, 2.0);
        assert_eq!(
            Trajectory::new(vec![a, b]),
            Err(TrajectoryError::NonContiguous { index: 0 })
        );
        assert!(PolySegment::new(1.0, 1.0, [Vec3::zeros(); 4]).is_err());
    }

    #[test]
    fn t_cubed_integrals() {
        // p(t) = t³ on [0,1]: Bézier control points 0, 0, 0, 1
        let traj = single(
            [Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), v(1.0, 0.0, 0.0)],
            0.0,
            1.0,
        );
        let m = traj.smoothness_integrals();
        assert_relative_eq!(m.accel_integral, 12.0, max_relative = 1e-12);
        assert_relative_eq!(m.jerk_integral, 36.0, max_relative = 1e-12);
    }

    #[test]
    fn integrals_are_additive() {
        let traj = single(
            [Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), v(1.0, 0.0, 0.0)],
            0.0,
            1.0,
        );
        let split = Trajectory::new(vec![
            traj.segments()[0].restricted(0.0, 0.4),
            traj.segments()[0].restricted(0.4, 1.0),
        ])
        .unwrap();
        let a = traj.smoothness_integrals();
        let b = split.smoothness_integrals();
        assert_relative_eq!(a.accel_integral, b.accel_integral, max_relative = 1e-12);
        assert_relative_eq!(a.jerk_integral, b.jerk_integral, max_relative = 1e-12);
        assert_eq!(
            Trajectory::hold(v(1.0, 1.0, 1.0), 0.0).smoothness_integrals(),
            SmoothnessIntegrals::default()
        );
    }

    #[test]
    fn limits_detect_overspeed() {
        let c = StopCriteria::default();
        let limits = DynamicLimits::default();
        assert!(Trajectory::hold(v(1.0, 2.0, 3.0), 0.0).check_limits(&limits));
        let line = single(
            [
                v(0.0, 0.0, 0.0),
                v(11.0 / 3.0, 0.0, 0.0),
                v(22.0 / 3.0, 0.0, 0.0),
                v(11.0, 0.0, 0.0),
            ],
            0.0,
            1.0,
        );
        assert!(!line.check_limits(&limits));
        assert_eq!(line.count_stops(&c), 0);
    }

    fn ramp(p0: Vec3, v0: Vec3, p1: Vec3, t0: f64, t1: f64) -> PolySegment {
        // rest-to-rest or cruise blends: cubic Hermite with given end velocities
        let h = t1 - t0;
        PolySegment::new(t0, t1, [p0, p0 + v0 * (h / 3.0), p1, p1]).unwrap()
    }

    #[test]
    fn stop_mid_flight_counts_once() {
        // cruise at 1 m/s, brake to rest, sit for 0.5 s, then leave again
        let cruise = PolySegment::new(
            0.0,
            1.0,
            [
                v(0.0, 0.0, 0.0),
                v(1.0 / 3.0, 0.0, 0.0),
                v(2.0 / 3.0, 0.0, 0.0),
                v(1.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let brake = ramp(v(1.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(1.5, 0.0, 0.0), 1.0, 2.0);
        let rest = PolySegment::constant(v(1.5, 0.0, 0.0), 2.0, 2.5);
        let go = PolySegment::new(
            2.5,
            3.5,
            [v(1.5, 0.0, 0.0), v(1.5, 0.0, 0.0), v(2.0, 0.0, 0.0), v(2.5, 0.0, 0.0)],
        )
        .unwrap();
        let cruise2 = PolySegment::new(
            3.5,
            4.5,
            [v(2.5, 0.0, 0.0), v(3.0, 0.0, 0.0), v(3.5, 0.0, 0.0), v(4.0, 0.0, 0.0)],
        )
        .unwrap();
        let land = PolySegment::new(
            4.5,
            5.5,
            [v(4.0, 0.0, 0.0), v(4.5, 0.0, 0.0), v(5.0, 0.0, 0.0), v(5.0, 0.0, 0.0)],
        )
        .unwrap();
        let traj = Trajectory::new(vec![cruise, brake, rest, go, cruise2, land]).unwrap();
        assert_eq!(traj.count_stops(&StopCriteria::default()), 1);

        // dense oracle: slow for roughly 0.5 s in the middle of the flight
        let slow: usize = (0..5500)
            .map(|k| k as f64 * 1e-3)
            .filter(|&t| t > 1.0 && t < 4.5)
            .filter(|&t| traj.evaluate(t).unwrap().velocity.norm() < 0.1)
            .count();
        assert!((500..800).contains(&slow), "{slow}");
    }

    #[test]
    fn terminal_hover_not_counted() {
        let land = PolySegment::new(
            0.0,
            1.0,
            [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0), v(2.0, 0.0, 0.0)],
        )
        .unwrap();
        let traj = Trajectory::new(vec![land, PolySegment::constant(v(2.0, 0.0, 0.0), 1.0, 3.0)]).unwrap();
        assert_eq!(traj.count_stops(&StopCriteria::default()), 0);
    }

    #[test]
    fn splice_and_restrict() {
        let a = single(
            [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0), v(3.0, 0.0, 0.0)],
            0.0,
            3.0,
        );
        let b = Trajectory::hold(v(9.0, 9.0, 9.0), 1.0);
        let s = a.splice(&b, 1.0).unwrap();
        assert_eq!(s.start_time(), 0.0);
        assert_relative_eq!(s.position(0.5), a.position(0.5), epsilon = 1e-14);
        assert_eq!(s.position(2.0), v(9.0, 9.0, 9.0));

        // splice past the end inserts the hold
        let late = a.splice(&Trajectory::hold(v(5.0, 0.0, 0.0), 4.0), 4.0).unwrap();
        assert_eq!(late.position(3.5), v(3.0, 0.0, 0.0));
        assert_eq!(late.position(4.5), v(5.0, 0.0, 0.0));

        let r = a.restrict_from(1.5);
        assert_eq!(r.start_time(), 1.5);
        assert_relative_eq!(r.position(2.0), a.position(2.0), epsilon = 1e-14);
        assert_eq!(a.restrict_from(10.0).start_time(), 10.0);
    }

    #[test]
    fn json_shape() {
        let traj = Trajectory::hold(v(1.0, 2.0, 3.0), 0.5);
        let json = serde_json::to_string(&traj).unwrap();
        assert_eq!(
            json,
            r#"{"segments":[{"t0":0.5,"t1":1.5,"cps":[[1.0,2.0,3.0],[1.0,2.0,3.0],[1.0,2.0,3.0],[1.0,2.0,3.0]]}]}"#
        );
        let back: Trajectory = serde_json::from_str(&json).unwrap();
        assert_eq!(back, traj);
        assert!(serde_json::from_str::<Trajectory>(r#"{"segments":[]}"#).is_err());
    }
}
