//! Convex min-jerk planner with fixed separating planes.
//!
//! Decision variables are the constant jerks of the `N` cubic segments
//! (3N scalars). Knot states are affine in the jerks, so the Bézier control
//! points, their derivative control points and the terminal position are all
//! affine as well, and the program is a dense strictly convex QP.
//!
//! Planes are fixed before solving: each piece of a reference (initial-guess)
//! trajectory, including its terminal hold, is separated from every
//! time-overlapping piece of every peer trajectory inflated by the pairwise
//! box. If the straight reference cannot be separated, a few detour
//! references are tried before reporting infeasibility.

pub mod qp;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{separating_plane_inflated, BoundaryBox, SeparatingPlane};
use crate::trajectory::{DynamicLimits, PolySegment, StateSample, Trajectory, Vec3, TIME_EPS};
use qp::{solve_qp, QpError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub num_segments: usize,
    pub horizon_min: f64,
    pub horizon_max: f64,
    /// Speed used to turn distance-to-goal into a horizon length (m/s).
    pub cruise_speed: f64,
    pub w_goal: f64,
    /// Constraint violation accepted by the QP, relative to row norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Required clearance of optimized control points from each plane (m).
    pub plane_margin: f64,
    /// Lateral offsets (m) of the detour references tried after the straight one.
    pub detour_offsets: Vec<f64>,
    /// Maximum number of QP solves per call.
    pub max_attempts: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            num_segments: 6,
            horizon_min: 1.0,
            horizon_max: 4.0,
            cruise_speed: 5.0,
            w_goal: 1e4,
            tolerance: 1e-9,
            max_iterations: 2000,
            plane_margin: 1e-4,
            detour_offsets: vec![1.0, 2.0, 3.5],
            max_attempts: 4,
        }
    }
}

impl PlannerConfig {
    /// Horizon length for a plan starting at `start` toward `goal`: the
    /// straight-line time at cruise speed, but no shorter than a jerk-limited
    /// rest-to-rest move over that distance or the time needed to brake;
    /// clipped to `[horizon_min, horizon_max]`.
    pub fn horizon(&self, start: &StateSample, goal: &Vec3, limits: &DynamicLimits) -> f64 {
        let dist = (goal - start.position).norm();
        let brake = start.velocity.amax() / limits.a_max
            + limits.a_max / limits.j_max
            + start.acceleration.amax() / limits.j_max;
        // bang-bang jerk profile covers j·T³/32
        let jerk_limited = (32.0 * dist / limits.j_max).cbrt();
        (dist / self.cruise_speed)
            .max(1.2 * jerk_limited)
            .max(1.5 * brake)
            .clamp(self.horizon_min, self.horizon_max)
    }

    /// Segment duration for [`PlannerConfig::horizon`].
    pub fn segment_duration(&self, start: &StateSample, goal: &Vec3, limits: &DynamicLimits) -> f64 {
        self.horizon(start, goal, limits) / self.num_segments as f64
    }
}

#[derive(Debug, Clone)]
pub struct PeerTrajectory {
    pub id: usize,
    pub trajectory: Arc<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub start: StateSample,
    pub goal: Vec3,
    pub t_switch: f64,
    pub num_segments: usize,
    pub segment_duration: f64,
    pub limits: DynamicLimits,
    pub bbox: BoundaryBox,
    pub constraints: Vec<PeerTrajectory>,
}

/// Plane fixed for agent piece `segment` (index `num_segments` is the
/// terminal hold) against one piece of peer `peer` over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneConstraint {
    pub segment: usize,
    pub peer: usize,
    pub t0: f64,
    pub t1: f64,
    pub plane: SeparatingPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Straight,
    Detour(usize),
    Stop,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub planes_used: Vec<PlaneConstraint>,
    pub solver_iterations: usize,
    pub reference: Reference,
    /// Jerk integral plus weighted squared goal distance.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    /// Every reference intersects some inflated peer hull.
    NoSeparatingPlane,
    /// Planes were found but no reference led to a feasible program.
    Program,
    IterationLimit,
    /// The solver returned a point that failed the post-hoc checks.
    Verification,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Infeasibility::NoSeparatingPlane => "no separating plane",
            Infeasibility::Program => "infeasible program",
            Infeasibility::IterationLimit => "iteration limit",
            Infeasibility::Verification => "verification failed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub enum PlanOutcome {
    Feasible(PlanResult),
    Infeasible(Infeasibility),
}

impl PlanOutcome {
    pub fn feasible(self) -> Option<PlanResult> {
        match self {
            PlanOutcome::Feasible(r) => Some(r),
            PlanOutcome::Infeasible(_) => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid plan request: {0}")]
    InvalidRequest(String),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

fn validate(req: &PlanRequest) -> Result<(), PlanError> {
    let bad = |m: &str| Err(PlanError::InvalidRequest(m.to_string()));
    if req.num_segments < 2 {
        return bad("num_segments must be at least 2");
    }
    if !(req.segment_duration.is_finite() && req.segment_duration > 0.0) {
        return bad("segment_duration must be positive");
    }
    if !req.limits.is_valid() {
        return bad("dynamic limits must be positive and finite");
    }
    if !req.bbox.is_valid() {
        return bad("boundary box must be positive and finite");
    }
    let s = &req.start;
    let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
    if !(finite(&s.position) && finite(&s.velocity) && finite(&s.acceleration) && finite(&req.goal)) {
        return bad("non-finite start or goal");
    }
    if !req.t_switch.is_finite() || (s.t - req.t_switch).abs() > 1e-9 {
        return bad("start.t must equal t_switch");
    }
    Ok(())
}

/// Affine form `c + Σ g[i] x[axis·N + i]` per axis (shared coefficients).
#[derive(Clone)]
struct Form {
    c: Vec3,
    g: Vec<f64>,
}

impl Form {
    fn constant(c: Vec3, n: usize) -> Self {
        Self { c, g: vec![0.0; n] }
    }

    fn axpy(&self, k: f64, other: &Form) -> Form {
        Form {
            c: self.c + other.c * k,
            g: self.g.iter().zip(&other.g).map(|(a, b)| a + k * b).collect(),
        }
    }

    fn is_constant(&self) -> bool {
        self.g.iter().all(|v| *v == 0.0)
    }

    fn eval(&self, x: &DVector<f64>) -> Vec3 {
        let n = self.g.len();
        let mut out = self.c;
        for axis in 0..3 {
            for i in 0..n {
                out[axis] += self.g[i] * x[axis * n + i];
            }
        }
        out
    }
}

/// Control-point forms for every segment given the pinned start state.
struct Forms {
    /// Position control points per segment.
    pos: Vec<[Form; 4]>,
    /// Velocity control points worth bounding (pinned ones excluded later).
    vel: Vec<Form>,
    acc: Vec<Form>,
    end_vel: Form,
    end_acc: Form,
    end_pos: Form,
}

fn build_forms(start: &StateSample, n: usize, h: f64) -> Forms {
    let mut p = Form::constant(start.position, n);
    let mut v = Form::constant(start.velocity, n);
    let mut a = Form::constant(start.acceleration, n);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(2 * n);
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        let mut unit = Form::constant(Vec3::zeros(), n);
        unit.g[i] = 1.0;
        let p1 = p.axpy(h / 3.0, &v);
        let p2 = p.axpy(2.0 * h / 3.0, &v).axpy(h * h / 6.0, &a);
        vel.push(v.axpy(h / 2.0, &a));
        let a_next = a.axpy(h, &unit);
        let v_next = v.axpy(h, &a).axpy(h * h / 2.0, &unit);
        let p_next = p.axpy(h, &v).axpy(h * h / 2.0, &a).axpy(h * h * h / 6.0, &unit);
        pos.push([p.clone(), p1, p2, p_next.clone()]);
        if i + 1 < n {
            vel.push(v_next.clone());
            acc.push(a_next.clone());
        }
        p = p_next;
        v = v_next;
        a = a_next;
    }
    Forms {
        pos,
        vel,
        acc,
        end_vel: v,
        end_acc: a,
        end_pos: p,
    }
}

/// Rows `A x >= b` over the 3N jerk variables.
struct Rows {
    n: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Rows {
    fn push_axis(&mut self, form: &Form, axis: usize, scale: f64, rhs: f64) {
        let mut row = vec![0.0; 3 * self.n];
        for i in 0..self.n {
            row[axis * self.n + i] = scale * form.g[i];
        }
        self.a.push(row);
        self.b.push(rhs);
    }

    /// `lo <= form[axis] <= hi` on every axis.
    fn push_box(&mut self, form: &Form, bound: f64) {
        if form.is_constant() {
            return;
        }
        for axis in 0..3 {
            self.push_axis(form, axis, 1.0, -bound - form.c[axis]);
            self.push_axis(form, axis, -1.0, -(bound - form.c[axis]));
        }
    }

    /// `normal · form <= offset`.
    fn push_plane(&mut self, form: &Form, normal: &Vec3, offset: f64) {
        if form.is_constant() {
            return;
        }
        let mut row = vec![0.0; 3 * self.n];
        for axis in 0..3 {
            for i in 0..self.n {
                row[axis * self.n + i] = -normal[axis] * form.g[i];
            }
        }
        self.a.push(row);
        self.b.push(-(offset - normal.dot(&form.c)));
    }
}

/// Piece-wise reference used only for plane construction.
struct ReferencePath {
    kind: Reference,
    pieces: Vec<[Vec3; 4]>,
    hold: Vec3,
}

impl ReferencePath {
    fn to_trajectory(&self, t_switch: f64, h: f64) -> Trajectory {
        let segs = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, cps)| PolySegment {
                t0: t_switch + i as f64 * h,
                t1: t_switch + (i + 1) as f64 * h,
                control_points: *cps,
            })
            .collect();
        Trajectory::new(segs).expect("reference pieces are contiguous")
    }
}

/// Point at arc length `s` along a polyline.
fn along(path: &[Vec3], s: f64) -> Vec3 {
    let mut left = s;
    for w in path.windows(2) {
        let len = (w[1] - w[0]).norm();
        if left <= len {
            return if len > 0.0 {
                w[0] + (w[1] - w[0]) * (left / len)
            } else {
                w[0]
            };
        }
        left -= len;
    }
    path[path.len() - 1]
}

/// Reference through `waypoints` to the goal at constant speed (capped at
/// `v_max`), with a first segment that leaves the start at the start velocity.
fn reference_along(req: &PlanRequest, waypoints: &[Vec3], kind: Reference) -> ReferencePath {
    let n = req.num_segments;
    let h = req.segment_duration;
    let horizon = n as f64 * h;
    let p0 = req.start.position;
    let mut path = Vec::with_capacity(waypoints.len() + 2);
    path.push(p0);
    path.extend_from_slice(waypoints);
    path.push(req.goal);
    let length: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let speed = (length / horizon).min(req.limits.v_max);
    let knots: Vec<Vec3> = (0..=n)
        .map(|k| if k == 0 { p0 } else { along(&path, speed * k as f64 * h) })
        .collect();
    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (knots[i], knots[i + 1]);
        if i == 0 {
            // leave with the start velocity, arrive with the chord velocity of segment 1
            let next_chord = knots[2] - knots[1];
            pieces.push([a, a + req.start.velocity * (h / 3.0), b - next_chord / 3.0, b]);
        } else {
            let d = b - a;
            pieces.push([a, a + d / 3.0, a + d * (2.0 / 3.0), b]);
        }
    }
    ReferencePath {
        kind,
        pieces,
        hold: knots[n],
    }
}

fn stop_reference(req: &PlanRequest) -> ReferencePath {
    let n = req.num_segments;
    let h = req.segment_duration;
    let p0 = req.start.position;
    let rest = p0 + req.start.velocity * (h / 2.0);
    let mut pieces = vec![[rest; 4]; n];
    pieces[0] = [p0, p0 + req.start.velocity * (h / 3.0), rest, rest];
    ReferencePath {
        kind: Reference::Stop,
        pieces,
        hold: rest,
    }
}

fn detour_references(req: &PlanRequest, offsets: &[f64]) -> Vec<ReferencePath> {
    let p0 = req.start.position;
    let to_goal = req.goal - p0;
    let dist = to_goal.norm();
    let forward = if dist > 1e-6 { to_goal / dist } else { Vec3::x() };
    let up_axis = if forward.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let left = up_axis.cross(&forward).normalize();
    let up = forward.cross(&left);
    let reach = dist.min(req.limits.v_max * req.num_segments as f64 * req.segment_duration);
    let mid = p0 + forward * (0.5 * reach);
    let mut out = Vec::new();
    for &off in offsets {
        for side in [left, -left, up, -up] {
            let wp = mid + side * off;
            out.push(reference_along(req, &[wp], Reference::Detour(out.len())));
        }
    }
    out
}

/// Straight-line constant-speed reference used for plane construction.
pub fn initial_guess(req: &PlanRequest) -> Result<Trajectory, PlanError> {
    validate(req)?;
    let r = reference_along(req, &[], Reference::Straight);
    Ok(r.to_trajectory(req.t_switch, req.segment_duration))
}

/// Fixes one plane per (agent piece, overlapping peer piece); `None` if any
/// pair cannot be separated.
fn build_planes(req: &PlanRequest, reference: &ReferencePath) -> Option<Vec<PlaneConstraint>> {
    let n = req.num_segments;
    let h = req.segment_duration;
    let inflate = req.bbox.pairwise();
    let mut planes = Vec::new();
    for peer in &req.constraints {
        let traj = &peer.trajectory;
        for piece in 0..=n {
            let ta = req.t_switch + piece as f64 * h;
            let tb = if piece < n { ta + h } else { f64::INFINITY };
            let hold_pts = [reference.hold];
            let mine: &[Vec3] = if piece < n { &reference.pieces[piece] } else { &hold_pts };
            let mut overlap = |lo: f64, hi: f64, pts: &[Vec3]| -> Option<()> {
                let plane = separating_plane_inflated(mine, pts, &inflate)?;
                planes.push(PlaneConstraint {
                    segment: piece,
                    peer: peer.id,
                    t0: lo,
                    t1: hi,
                    plane,
                });
                Some(())
            };
            for s in traj.segments() {
                if s.t1 <= ta + TIME_EPS || s.t0 >= tb - TIME_EPS {
                    continue;
                }
                let lo = ta.max(s.t0);
                let hi = tb.min(s.t1);
                overlap(lo, hi, &s.sub_control_points(lo, hi))?;
            }
            let end = traj.end_time();
            if end < tb - TIME_EPS {
                overlap(ta.max(end), tb, &[traj.terminal_hold()])?;
            }
        }
    }
    Some(planes)
}

struct Program {
    g: DMatrix<f64>,
    c: DVector<f64>,
    base: Rows,
    meq: usize,
}

fn base_program(req: &PlanRequest, forms: &Forms, cfg: &PlannerConfig) -> Program {
    let n = req.num_segments;
    let h = req.segment_duration;
    let dim = 3 * n;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    let mut c = DVector::<f64>::zeros(dim);
    for k in 0..dim {
        g[(k, k)] = 2.0 * h;
    }
    let ep = &forms.end_pos;
    for axis in 0..3 {
        let r = ep.c[axis] - req.goal[axis];
        for i in 0..n {
            c[axis * n + i] += 2.0 * cfg.w_goal * r * ep.g[i];
            for j in 0..n {
                g[(axis * n + i, axis * n + j)] += 2.0 * cfg.w_goal * ep.g[i] * ep.g[j];
            }
        }
    }
    let mut rows = Rows {
        n,
        a: Vec::new(),
        b: Vec::new(),
    };
    for form in [&forms.end_vel, &forms.end_acc] {
        for axis in 0..3 {
            rows.push_axis(form, axis, 1.0, -form.c[axis]);
        }
    }
    let meq = rows.a.len();
    // strict limit checks must pass on the solver output
    let lim = req.limits.scaled(1.0 - 1e-7);
    for f in &forms.vel {
        rows.push_box(f, lim.v_max);
    }
    for f in &forms.acc {
        rows.push_box(f, lim.a_max);
    }
    for k in 0..dim {
        let mut row = vec![0.0; dim];
        row[k] = 1.0;
        rows.a.push(row.clone());
        rows.b.push(-lim.j_max);
        row[k] = -1.0;
        rows.a.push(row);
        rows.b.push(-lim.j_max);
    }
    Program { g, c, base: rows, meq }
}

fn piece_forms(forms: &Forms, piece: usize) -> Vec<&Form> {
    if piece < forms.pos.len() {
        forms.pos[piece].iter().collect()
    } else {
        vec![&forms.end_pos]
    }
}

fn assemble(req: &PlanRequest, x: &DVector<f64>, forms: &Forms) -> Trajectory {
    let h = req.segment_duration;
    let segs = forms
        .pos
        .iter()
        .enumerate()
        .map(|(i, cps)| PolySegment {
            t0: req.t_switch + i as f64 * h,
            t1: req.t_switch + (i + 1) as f64 * h,
            control_points: [cps[0].eval(x), cps[1].eval(x), cps[2].eval(x), cps[3].eval(x)],
        })
        .collect();
    Trajectory::new(segs).expect("assembled segments are contiguous")
}

fn verified(traj: &Trajectory, req: &PlanRequest, planes: &[PlaneConstraint]) -> bool {
    if !traj.check_limits(&req.limits) {
        return false;
    }
    let n = req.num_segments;
    planes.iter().all(|pc| {
        let pts: &[Vec3] = if pc.segment < n {
            &traj.segments()[pc.segment].control_points
        } else {
            std::slice::from_ref(&traj.segments()[n - 1].control_points[3])
        };
        pts.iter().all(|p| pc.plane.signed_distance(p) < 0.0)
    })
}

pub fn plan(req: &PlanRequest, cfg: &PlannerConfig) -> Result<PlanOutcome, PlanError> {
    validate(req)?;
    if !(cfg.w_goal > 0.0 && cfg.w_goal.is_finite()) {
        return Err(PlanError::InvalidConfig("w_goal must be positive".into()));
    }
    let n = req.num_segments;
    let forms = build_forms(&req.start, n, req.segment_duration);
    let program = base_program(req, &forms, cfg);

    let mut references = vec![reference_along(req, &[], Reference::Straight)];
    if !req.constraints.is_empty() {
        references.extend(detour_references(req, &cfg.detour_offsets));
        references.push(stop_reference(req));
    }

    let mut attempts = 0;
    let mut total_iterations = 0;
    let mut failure = Infeasibility::NoSeparatingPlane;
    for reference in &references {
        if attempts >= cfg.max_attempts {
            break;
        }
        let Some(planes) = build_planes(req, reference) else {
            continue;
        };
        attempts += 1;
        let mut rows = Rows {
            n,
            a: program.base.a.clone(),
            b: program.base.b.clone(),
        };
        for pc in &planes {
            for f in piece_forms(&forms, pc.segment) {
                rows.push_plane(f, &pc.plane.normal, pc.plane.offset - cfg.plane_margin);
            }
        }
        let m = rows.a.len();
        let a = DMatrix::from_fn(m, 3 * n, |i, j| rows.a[i][j]);
        let b = DVector::from_vec(rows.b);
        match solve_qp(
            &program.g,
            &program.c,
            &a,
            &b,
            program.meq,
            cfg.max_iterations,
            cfg.tolerance,
        ) {
            Ok(sol) => {
                total_iterations += sol.iterations;
                let trajectory = assemble(req, &sol.x, &forms);
                if !verified(&trajectory, req, &planes) {
                    failure = Infeasibility::Verification;
                    continue;
                }
                let end = trajectory.terminal_hold();
                let cost =
                    trajectory.smoothness_integrals().jerk_integral + cfg.w_goal * (end - req.goal).norm_squared();
                return Ok(PlanOutcome::Feasible(PlanResult {
                    trajectory,
                    planes_used: planes,
                    solver_iterations: total_iterations,
                    reference: reference.kind,
                    cost,
                }));
            }
            Err(QpError::IterationLimit) => failure = Infeasibility::IterationLimit,
            Err(QpError::Infeasible) => failure = Infeasibility::Program,
            Err(e) => return Err(PlanError::InvalidConfig(e.to_string())),
        }
    }
    Ok(PlanOutcome::Infeasible(failure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sampling_oracle_collision;

    fn request(goal: Vec3, h: f64) -> PlanRequest {
        PlanRequest {
            start: StateSample::at_rest(0.0, Vec3::zeros()),
            goal,
            t_switch: 0.0,
            num_segments: 6,
            segment_duration: h,
            limits: DynamicLimits::default(),
            bbox: BoundaryBox::default(),
            constraints: vec![],
        }
    }

    #[test]
    fn forms_match_integrated_jerk() {
        let start = StateSample {
            t: 0.0,
            position: Vec3::new(1.0, -2.0, 0.5),
            velocity: Vec3::new(0.3, 0.1, -0.2),
            acceleration: Vec3::new(-1.0, 0.5, 0.0),
        };
        let n = 3;
        let h = 0.4;
        let forms = build_forms(&start, n, h);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0, 2.0, 2.0, -4.0]);
        // direct Euler-free integration of piecewise constant jerk
        let (mut p, mut v, mut a) = (start.position, start.velocity, start.acceleration);
        for i in 0..n {
            let j = Vec3::new(x[i], x[n + i], x[2 * n + i]);
            assert!((forms.pos[i][0].eval(&x) - p).norm() < 1e-12);
            p += v * h + a * (h * h / 2.0) + j * (h * h * h / 6.0);
            v += a * h + j * (h * h / 2.0);
            a += j * h;
        }
        assert!((forms.end_pos.eval(&x) - p).norm() < 1e-12);
        assert!((forms.end_vel.eval(&x) - v).norm() < 1e-12);
        assert!((forms.end_acc.eval(&x) - a).norm() < 1e-12);
        let traj = assemble(
            &PlanRequest {
                start,
                t_switch: 0.0,
                num_segments: n,
                segment_duration: h,
                ..request(Vec3::zeros(), h)
            },
            &x,
            &forms,
        );
        assert!(traj.max_junction_gap() < 1e-9);
    }

    #[test]
    fn reaches_free_goal() {
        let req = request(Vec3::new(5.0, 0.0, 0.0), 1.5);
        let res = plan(&req, &PlannerConfig::default()).unwrap().feasible().unwrap();
        assert!((res.trajectory.terminal_hold() - req.goal).norm() < 1e-3);
        let s = res.trajectory.evaluate(req.t_switch).unwrap();
        assert!((s.position - req.start.position).norm() < 1e-6);
        assert!(res.trajectory.check_limits(&req.limits));
        let end = res.trajectory.evaluate(res.trajectory.end_time()).unwrap();
        assert!(end.velocity.norm() < 1e-9 && end.acceleration.norm() < 1e-9);
    }

    #[test]
    fn goal_at_start_is_constant() {
        let req = request(Vec3::zeros(), 0.5);
        let res = plan(&req, &PlannerConfig::default()).unwrap().feasible().unwrap();
        assert_eq!(res.cost, 0.0);
        for seg in res.trajectory.segments() {
            assert!(seg.control_points.iter().all(|p| p.norm() == 0.0));
        }
    }

    #[test]
    fn routes_around_static_peer() {
        let mut req = request(Vec3::new(5.0, 0.0, 0.0), 0.6);
        req.constraints.push(PeerTrajectory {
            id: 7,
            trajectory: Arc::new(Trajectory::hold(Vec3::new(2.5, 0.0, 0.0), -1.0)),
        });
        let res = plan(&req, &PlannerConfig::default()).unwrap().feasible().unwrap();
        assert_ne!(res.reference, Reference::Straight);
        assert!(!res.planes_used.is_empty());
        assert!(verified(&res.trajectory, &req, &res.planes_used));
        let peer = &req.constraints[0].trajectory;
        assert!(!sampling_oracle_collision(
            &res.trajectory,
            peer,
            &req.bbox,
            (0.0, 5.0),
            1e-3
        ));
    }

    #[test]
    fn rejects_malformed() {
        let mut req = request(Vec3::x(), 0.5);
        req.num_segments = 1;
        assert!(plan(&req, &PlannerConfig::default()).is_err());
        let mut req = request(Vec3::x(), 0.5);
        req.start.t = 0.3;
        assert!(plan(&req, &PlannerConfig::default()).is_err());
        let mut req = request(Vec3::x(), -0.5);
        req.segment_duration = -0.5;
        assert!(initial_guess(&req).is_err());
    }

    #[test]
    fn guess_is_a_line_to_goal() {
        let req = request(Vec3::new(1.0, 0.0, 0.0), 0.5);
        let g = initial_guess(&req).unwrap();
        assert!((g.terminal_hold() - req.goal).norm() < 1e-12);
        for seg in g.segments() {
            for p in &seg.control_points {
                assert!(p.y.abs() < 1e-12 && p.z.abs() < 1e-12);
            }
        }
        let still = initial_guess(&request(Vec3::zeros(), 0.5)).unwrap();
        assert!(still
            .segments()
            .iter()
            .all(|s| s.control_points.iter().all(|p| p.norm() == 0.0)));
    }

    #[test]
    fn guess_blends_start_velocity() {
        let mut req = request(Vec3::new(4.0, 0.0, 0.0), 0.5);
        req.start.velocity = Vec3::new(0.0, 2.0, 0.0);
        let g = initial_guess(&req).unwrap();
        let step = 1e-5;
        let fd = (g.position(step) - g.position(0.0)) / step;
        assert!((fd - req.start.velocity).norm() < 1e-3);
        // C1 at the first junction
        let t1 = req.segment_duration;
        let left = (g.position(t1) - g.position(t1 - step)) / step;
        let right = (g.position(t1 + step) - g.position(t1)) / step;
        assert!((left - right).norm() < 1e-3);
    }
}
