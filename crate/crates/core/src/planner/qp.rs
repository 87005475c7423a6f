//! Dense strictly convex QP by the Goldfarb–Idnani dual active-set method.
//!
//! ```text
//!     minimize    ½ xᵀ G x + cᵀ x
//!     subject to  aᵢᵀ x  = bᵢ   for i < meq
//!                 aᵢᵀ x >= bᵢ   otherwise
//! ```
//!
//! The method starts from the unconstrained minimizer and adds violated
//! constraints one at a time, so it terminates in finitely many steps and
//! reports infeasibility directly.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("dimension mismatch")]
    Dimension,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per constraint row; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
}

struct Active {
    row: usize,
    sign: f64,
    u: f64,
}

pub fn solve_qp(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    meq: usize,
    max_iterations: usize,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = g.nrows();
    let m = a.nrows();
    if g.ncols() != n || c.len() != n || a.ncols() != n || b.len() != m || meq > m {
        return Err(QpError::Dimension);
    }
    let chol = Cholesky::new(g.clone()).ok_or(QpError::NotPositiveDefinite)?;
    let mut j = chol
        .l()
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut x = -chol.solve(c);
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<Active> = Vec::with_capacity(n);
    let norms: Vec<f64> = (0..m).map(|i| a.row(i).norm().max(1e-300)).collect();
    let mut is_active = vec![false; m];
    let mut iterations = 0;

    loop {
        // equalities first, then the most violated inequality
        let mut pick = (0..meq).find(|&i| !is_active[i]);
        if pick.is_none() {
            let mut worst = -tol;
            for i in meq..m {
                if is_active[i] {
                    continue;
                }
                let s = (a.row(i).dot(&x.transpose()) - b[i]) / norms[i];
                if s < worst {
                    worst = s;
                    pick = Some(i);
                }
            }
        }
        let Some(p) = pick else { break };

        let mut np: DVector<f64> = a.row(p).transpose();
        let mut bp = b[p];
        let mut sign = 1.0;
        if p < meq && np.dot(&x) - bp > 0.0 {
            np = -np;
            bp = -bp;
            sign = -1.0;
        }
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(QpError::IterationLimit);
            }
            let q = active.len();
            let d = j.transpose() * &np;
            let z = if q < n {
                j.columns(q, n - q) * d.rows(q, n - q)
            } else {
                DVector::zeros(n)
            };
            let rv = if q > 0 {
                r.view((0, 0), (q, q))
                    .into_owned()
                    .solve_upper_triangular(&d.rows(0, q).into_owned())
                    .ok_or(QpError::Infeasible)?
            } else {
                DVector::zeros(0)
            };

            // largest dual step that keeps inequality multipliers >= 0
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, act) in active.iter().enumerate() {
                if act.row >= meq && rv[k] > 0.0 {
                    let ratio = act.u / rv[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            // primal step that makes constraint p active
            let s = np.dot(&x) - bp;
            let zn = z.dot(&np);
            let t2 = if z.norm() > 1e-12 * np.norm() && zn > 0.0 {
                -s / zn
            } else {
                f64::INFINITY
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_infinite() {
                for (k, act) in active.iter_mut().enumerate() {
                    act.u -= t1 * rv[k];
                }
                up += t1;
                let k = drop_at.expect("finite t1 has an index");
                drop_constraint(&mut active, &mut is_active, &mut r, &mut j, k);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for (k, act) in active.iter_mut().enumerate() {
                act.u -= t * rv[k];
            }
            up += t;
            if t2 <= t1 {
                add_constraint(&mut r, &mut j, d, q);
                active.push(Active { row: p, sign, u: up });
                is_active[p] = true;
                break;
            }
            let k = drop_at.expect("partial step has an index");
            drop_constraint(&mut active, &mut is_active, &mut r, &mut j, k);
        }
    }

    let mut multipliers = DVector::zeros(m);
    for act in &active {
        multipliers[act.row] = act.sign * act.u;
    }
    Ok(QpSolution {
        x,
        multipliers,
        iterations,
    })
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn rotate_columns(j: &mut DMatrix<f64>, k0: usize, k1: usize, c: f64, s: f64) {
    for i in 0..j.nrows() {
        let x = j[(i, k0)];
        let y = j[(i, k1)];
        j[(i, k0)] = c * x + s * y;
        j[(i, k1)] = -s * x + c * y;
    }
}

/// Appends column `d` (= Jᵀ n) to R, rotating J so that d[q+1..] vanishes.
fn add_constraint(r: &mut DMatrix<f64>, j: &mut DMatrix<f64>, mut d: DVector<f64>, q: usize) {
    let n = d.len();
    for k in (q + 1..n).rev() {
        let (c, s, h) = givens(d[k - 1], d[k]);
        d[k - 1] = h;
        d[k] = 0.0;
        rotate_columns(j, k - 1, k, c, s);
    }
    for i in 0..=q {
        r[(i, q)] = d[i];
    }
}

fn drop_constraint(
    active: &mut Vec<Active>,
    is_active: &mut [bool],
    r: &mut DMatrix<f64>,
    j: &mut DMatrix<f64>,
    l: usize,
) {
    let q = active.len();
    is_active[active[l].row] = false;
    active.remove(l);
    for col in l..q - 1 {
        for i in 0..q {
            r[(i, col)] = r[(i, col + 1)];
        }
    }
    for i in 0..q {
        r[(i, q - 1)] = 0.0;
    }
    // restore triangularity (R is upper Hessenberg from column l)
    for k in l..q - 1 {
        let (c, s, h) = givens(r[(k, k)], r[(k + 1, k)]);
        r[(k, k)] = h;
        r[(k + 1, k)] = 0.0;
        for col in k + 1..q - 1 {
            let x = r[(k, col)];
            let y = r[(k + 1, col)];
            r[(k, col)] = c * x + s * y;
            r[(k + 1, col)] = -s * x + c * y;
        }
        rotate_columns(j, k, k + 1, c, s);
    }
}
