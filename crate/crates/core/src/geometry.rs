//! Boundary boxes, separating planes and pairwise collision checks.
//!
//! Separation between two small point hulls is decided by Wolfe's
//! minimum-norm-point algorithm on their Minkowski difference. The second
//! hull may be inflated by an axis-aligned box, which only changes its
//! support function, so the difference set is never enumerated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Trajectory, Vec3, TIME_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty time window [{0}, {1}]")]
    EmptyWindow(f64, f64),
    #[error("window starts at {t} before trajectory start {start}")]
    OutsideDomain { t: f64, start: f64 },
}

/// Axis-aligned safety volume around one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBox {
    pub half_extents: Vec3,
}

impl Default for BoundaryBox {
    /// 0.8 × 0.8 × 1.5 m full extents; taller in z for downwash.
    fn default() -> Self {
        Self {
            half_extents: Vec3::new(0.4, 0.4, 0.75),
        }
    }
}

impl BoundaryBox {
    pub fn new(hx: f64, hy: f64, hz: f64) -> Self {
        Self {
            half_extents: Vec3::new(hx, hy, hz),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.half_extents.iter().all(|h| h.is_finite() && *h > 0.0)
    }

    /// Half extents of the Minkowski sum of two such boxes.
    pub fn pairwise(&self) -> Vec3 {
        self.half_extents * 2.0
    }
}

/// Half-space `normal · x <= offset` on the first hull's side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatingPlane {
    pub normal: Vec3,
    pub offset: f64,
}

impl SeparatingPlane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

pub fn boxes_collide(p1: &Vec3, p2: &Vec3, bbox: &BoundaryBox) -> bool {
    let d = p1 - p2;
    let lim = bbox.pairwise();
    d.x.abs() < lim.x && d.y.abs() < lim.y && d.z.abs() < lim.z
}

/// Maximum-margin separating plane between the convex hulls of `a` and `b`,
/// or `None` if they intersect.
pub fn compute_separating_plane(a: &[Vec3], b: &[Vec3]) -> Option<SeparatingPlane> {
    separating_plane_inflated(a, b, &Vec3::zeros())
}

/// As [`compute_separating_plane`], with `b` grown by a box of half extents
/// `inflate`.
pub fn separating_plane_inflated(a: &[Vec3], b: &[Vec3], inflate: &Vec3) -> Option<SeparatingPlane> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (ca, cb) = closest_points(a, b, inflate)?;
    let gap = cb - ca;
    let dist = gap.norm();
    if dist <= 1e-12 {
        return None;
    }
    let normal = gap / dist;
    let offset = normal.dot(&(ca + cb)) * 0.5;
    let plane = SeparatingPlane { normal, offset };
    let a_max = a.iter().map(|p| plane.signed_distance(p)).fold(f64::MIN, f64::max);
    let b_min = b.iter().map(|p| plane.signed_distance(p)).fold(f64::MAX, f64::min) - box_support(&normal, inflate);
    (a_max < 0.0 && b_min > 0.0).then_some(plane)
}

/// max over the box of `dir · x`
fn box_support(dir: &Vec3, half: &Vec3) -> f64 {
    dir.x.abs() * half.x + dir.y.abs() * half.y + dir.z.abs() * half.z
}

fn argmin_dot<'a>(pts: &'a [Vec3], dir: &Vec3) -> &'a Vec3 {
    let mut best = &pts[0];
    let mut best_v = dir.dot(best);
    for p in &pts[1..] {
        let v = dir.dot(p);
        if v < best_v {
            best = p;
            best_v = v;
        }
    }
    best
}

/// Point of `B ⊕ box` maximizing `dir · x`.
fn support_inflated(pts: &[Vec3], inflate: &Vec3, dir: &Vec3) -> Vec3 {
    let p = argmin_dot(pts, &-dir);
    let corner = Vec3::new(
        inflate.x.copysign(dir.x),
        inflate.y.copysign(dir.y),
        inflate.z.copysign(dir.z),
    );
    p + corner
}

#[derive(Clone, Copy)]
struct CorralPoint {
    a: Vec3,
    b: Vec3,
}

impl CorralPoint {
    fn diff(&self) -> Vec3 {
        self.a - self.b
    }
}

/// Closest pair between conv(a) and conv(b) ⊕ box, or `None` when they overlap.
fn closest_points(a: &[Vec3], b: &[Vec3], inflate: &Vec3) -> Option<(Vec3, Vec3)> {
    let lmo = |x: &Vec3| {
        let pa = *argmin_dot(a, x);
        let pb = support_inflated(b, inflate, x);
        CorralPoint { a: pa, b: pb }
    };
    let scale = a
        .iter()
        .chain(b.iter())
        .map(|p| p.norm_squared())
        .fold(inflate.norm_squared(), f64::max)
        .max(1.0);
    let zero_tol = 1e-20 * scale;

    let first = lmo(&(a[0] - b[0]));
    let mut corral = vec![first];
    let mut weights = vec![1.0];
    let mut x = first.diff();

    for _ in 0..64 {
        if x.norm_squared() <= zero_tol {
            return None;
        }
        let p = lmo(&x);
        let pd = p.diff();
        // optimality gap of the Frank-Wolfe linearization
        if x.norm_squared() - x.dot(&pd) <= 1e-12 * scale {
            break;
        }
        if corral.iter().any(|c| (c.diff() - pd).norm_squared() <= 1e-24 * scale) {
            break;
        }
        corral.push(p);
        weights.push(0.0);
        if corral.len() > 4 {
            // origin is (numerically) enclosed by a full-dimensional corral
            return None;
        }
        loop {
            let Some(alpha) = affine_minimizer(&corral) else {
                // degenerate corral; keep the last consistent iterate
                corral.pop();
                weights.pop();
                break;
            };
            if alpha.iter().all(|&w| w > 1e-14) {
                weights = alpha;
                x = combine(&corral, &weights);
                break;
            }
            let mut theta = 1.0f64;
            for (w, al) in weights.iter().zip(&alpha) {
                if *al <= 1e-14 && w - al > 0.0 {
                    theta = theta.min(w / (w - al));
                }
            }
            for (w, al) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * al;
            }
            let mut k = 0;
            while k < corral.len() {
                if weights[k] <= 1e-14 {
                    corral.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            if corral.is_empty() {
                return None;
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(&corral, &weights);
        }
    }
    if x.norm_squared() <= zero_tol {
        return None;
    }
    let ca = corral
        .iter()
        .zip(&weights)
        .fold(Vec3::zeros(), |s, (c, w)| s + c.a * *w);
    let cb = corral
        .iter()
        .zip(&weights)
        .fold(Vec3::zeros(), |s, (c, w)| s + c.b * *w);
    Some((ca, cb))
}

fn combine(corral: &[CorralPoint], w: &[f64]) -> Vec3 {
    corral.iter().zip(w).fold(Vec3::zeros(), |s, (c, w)| s + c.diff() * *w)
}

/// Barycentric weights of the minimum-norm point of the affine hull.
fn affine_minimizer(corral: &[CorralPoint]) -> Option<Vec<f64>> {
    let s0 = corral[0].diff();
    let k = corral.len() - 1;
    if k == 0 {
        return Some(vec![1.0]);
    }
    let dirs: Vec<Vec3> = corral[1..].iter().map(|c| c.diff() - s0).collect();
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| dirs[i].dot(&dirs[j]));
    let rhs = nalgebra::DVector::from_fn(k, |i, _| -dirs[i].dot(&s0));
    let scale = gram.diagonal().max();
    if scale <= 0.0 {
        return None;
    }
    let chol = nalgebra::Cholesky::new(gram.clone())?;
    // reject near-singular Gram matrices (affinely dependent corral)
    let min_pivot = chol.l().diagonal().iter().map(|v| v * v).fold(f64::MAX, f64::min);
    if min_pivot <= 1e-13 * scale {
        return None;
    }
    let beta = chol.solve(&rhs);
    let mut alpha = Vec::with_capacity(k + 1);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    Some(alpha)
}

fn aabb(pts: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in &pts[1..] {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Conservative test of whether the hull of `a` may come within the
/// pairwise box of the hull of `b`. `false` means provably separated.
pub fn hulls_may_collide(a: &[Vec3], b: &[Vec3], bbox: &BoundaryBox) -> bool {
    let inflate = bbox.pairwise();
    let (alo, ahi) = aabb(a);
    let (blo, bhi) = aabb(b);
    let disjoint_axis = (0..3).any(|k| ahi[k] <= blo[k] - inflate[k] || bhi[k] + inflate[k] <= alo[k]);
    if disjoint_axis {
        // touching at the boundary does not count: boxes_collide is strict
        return false;
    }
    separating_plane_inflated(a, b, &inflate).is_none()
}

/// Union of segment boundaries of both trajectories inside `(t0, t1)`,
/// with the window ends, sorted.
fn breakpoints(a: &Trajectory, b: &Trajectory, t0: f64, t1: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.segments().len() + b.segments().len() + 2);
    out.push(t0);
    let inner = |traj: &Trajectory| {
        traj.segments()
            .iter()
            .map(|s| s.t1)
            .filter(|&t| t > t0 + TIME_EPS && t < t1 - TIME_EPS)
            .collect::<Vec<_>>()
    };
    let (ia, ib) = (inner(a), inner(b));
    let (mut i, mut j) = (0, 0);
    while i < ia.len() || j < ib.len() {
        let next = match (ia.get(i), ib.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if next - out[out.len() - 1] > TIME_EPS {
            out.push(next);
        }
    }
    out.push(t1);
    out
}

/// Conservative continuous-time collision check over `window`.
///
/// Returns `Ok(false)` only if every sub-interval between segment
/// boundaries has separated hulls; `Ok(true)` may be a false alarm.
pub fn check_pair_collision(
    a: &Trajectory,
    b: &Trajectory,
    bbox: &BoundaryBox,
    window: (f64, f64),
) -> Result<bool, GeometryError> {
    let (t0, t1) = window;
    if t1.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater) {
        return Err(GeometryError::EmptyWindow(t0, t1));
    }
    for traj in [a, b] {
        if t0 < traj.start_time() - TIME_EPS {
            return Err(GeometryError::OutsideDomain {
                t: t0,
                start: traj.start_time(),
            });
        }
    }
    let cuts = breakpoints(a, b, t0, t1);
    for w in cuts.windows(2) {
        let pa = a.control_points_over(w[0], w[1]);
        let pb = b.control_points_over(w[0], w[1]);
        if hulls_may_collide(&pa, &pb, bbox) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Checks from `t_start` onwards, terminal holds included.
pub fn check_pair_collision_from(
    a: &Trajectory,
    b: &Trajectory,
    bbox: &BoundaryBox,
    t_start: f64,
) -> Result<bool, GeometryError> {
    // one extra second covers the hold-vs-hold tail, which is constant
    let t_end = a.end_time().max(b.end_time()).max(t_start) + 1.0;
    check_pair_collision(a, b, bbox, (t_start, t_end))
}

/// Ground truth by dense sampling at `t_start, t_start + dt, …, t_end`.
pub fn sampling_oracle_collision(
    a: &Trajectory,
    b: &Trajectory,
    bbox: &BoundaryBox,
    window: (f64, f64),
    dt: f64,
) -> bool {
    let (t0, t1) = window;
    let n = ((t1 - t0) / dt).floor() as usize;
    let hit = |t: f64| boxes_collide(&a.position(t), &b.position(t), bbox);
    (0..=n).any(|k| hit(t0 + k as f64 * dt)) || hit(t1)
}
