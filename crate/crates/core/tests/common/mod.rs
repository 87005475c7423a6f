use nalgebra::{DMatrix, DVector};
use rmader::{StateSample, Vec3};

/// Minimum of ∫‖j‖² + w‖p_end − goal‖² over C²-continuous piecewise cubics
/// with the given start state and terminal rest, written in Bézier control
/// points and solved through its KKT system (one axis at a time).
pub fn kkt_oracle(start: &StateSample, goal: &Vec3, n: usize, h: f64, w: f64) -> (f64, Vec3) {
    let dim = 4 * n;
    let idx = |seg: usize, k: usize| 4 * seg + k;
    let mut total = 0.0;
    let mut end = Vec3::zeros();
    for axis in 0..3 {
        let mut q = DMatrix::<f64>::zeros(dim, dim);
        let mut lin = DVector::<f64>::zeros(dim);
        // jerk = 6/h³ (P3 − 3P2 + 3P1 − P0), cost h·jerk²
        let coef = [-1.0, 3.0, -3.0, 1.0];
        let s = 6.0 / (h * h * h);
        for seg in 0..n {
            for a in 0..4 {
                for b in 0..4 {
                    q[(idx(seg, a), idx(seg, b))] += 2.0 * h * s * s * coef[a] * coef[b];
                }
            }
        }
        let last = idx(n - 1, 3);
        q[(last, last)] += 2.0 * w;
        lin[last] -= 2.0 * w * goal[axis];

        let mut eq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let (p0, v0, a0) = (start.position[axis], start.velocity[axis], start.acceleration[axis]);
        eq.push((vec![(idx(0, 0), 1.0)], p0));
        eq.push((vec![(idx(0, 1), 1.0)], p0 + v0 * h / 3.0));
        eq.push((vec![(idx(0, 2), 1.0)], p0 + 2.0 * v0 * h / 3.0 + a0 * h * h / 6.0));
        for seg in 0..n - 1 {
            let (l, r) = (seg, seg + 1);
            eq.push((vec![(idx(l, 3), 1.0), (idx(r, 0), -1.0)], 0.0));
            eq.push((
                vec![(idx(l, 3), 1.0), (idx(l, 2), -1.0), (idx(r, 1), -1.0), (idx(r, 0), 1.0)],
                0.0,
            ));
            eq.push((
                vec![
                    (idx(l, 3), 1.0),
                    (idx(l, 2), -2.0),
                    (idx(l, 1), 1.0),
                    (idx(r, 2), -1.0),
                    (idx(r, 1), 2.0),
                    (idx(r, 0), -1.0),
                ],
                0.0,
            ));
        }
        eq.push((vec![(idx(n - 1, 3), 1.0), (idx(n - 1, 2), -1.0)], 0.0));
        eq.push((vec![(idx(n - 1, 2), 1.0), (idx(n - 1, 1), -1.0)], 0.0));

        let m = eq.len();
        let mut kkt = DMatrix::<f64>::zeros(dim + m, dim + m);
        let mut rhs = DVector::<f64>::zeros(dim + m);
        kkt.view_mut((0, 0), (dim, dim)).copy_from(&q);
        for i in 0..dim {
            rhs[i] = -lin[i];
        }
        for (r, (terms, val)) in eq.iter().enumerate() {
            for &(c, v) in terms {
                kkt[(dim + r, c)] = v;
                kkt[(c, dim + r)] = v;
            }
            rhs[dim + r] = *val;
        }
        let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
        for seg in 0..n {
            let cp = |k| sol[idx(seg, k)];
            let j = s * (cp(3) - 3.0 * cp(2) + 3.0 * cp(1) - cp(0));
            total += h * j * j;
        }
        end[axis] = sol[last];
    }
    (total, end)
}
