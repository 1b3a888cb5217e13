//! Trajectory-refinement adapter: a single convex QP that minimizes
//! joint-space velocity and acceleration plus deviation from the stored root
//! path, subject to endpoint and joint-limit constraints.
//!
//!   min  w_v ||D1 q||^2 + w_a ||D2 q||^2 + w_s ||q - q_root||^2
//!   s.t. q_0 = q_start,  q_{T-1} = q_goal,  q_min <= q_t <= q_max
//!
//! The objective and constraints act per joint along the time axis, so the
//! program decouples into one small QP per joint sharing the same
//! factorization.

use nalgebra::{DMatrix, DVector};

use crate::adapters::qp::{qp_solve, QpOpts};
use crate::adapters::AdaptError;
use crate::planner::Path;
use crate::robot::Configuration;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct StoOpts {
    pub w_v: f64,
    pub w_a: f64,
    pub w_s: f64,
    pub qp: QpOpts,
}

impl Default for StoOpts {
    fn default() -> Self {
        Self {
            w_v: 1.0,
            w_a: 1.0,
            w_s: 0.1,
            qp: QpOpts::default(),
        }
    }
}

/// Per-call report alongside the adapted path.
#[derive(Debug, Clone, Copy)]
pub struct StoReport {
    /// Worst equality-row residual of the raw solver output (pre-snap).
    pub equality_residual: f64,
    /// Final Eq.-style objective of the returned path.
    pub objective: f64,
    /// Objective of the straight-line feasible candidate.
    pub straight_objective: f64,
}

/// Quadratic cost matrix 2 (w_v D1^T D1 + w_a D2^T D2 + w_s I) for a path of
/// `n` waypoints: D1 holds the n-1 forward differences, D2 the n-2 central
/// second differences (endpoints excluded; they are hard-constrained).
fn cost_matrix(n: usize, opts: &StoOpts) -> DMatrix<f64> {
    let mut d1 = DMatrix::zeros(n - 1, n);
    for r in 0..n - 1 {
        d1[(r, r)] = -1.0;
        d1[(r, r + 1)] = 1.0;
    }
    let mut d2 = DMatrix::zeros(n.saturating_sub(2), n);
    for r in 0..n.saturating_sub(2) {
        d2[(r, r)] = 1.0;
        d2[(r, r + 1)] = -2.0;
        d2[(r, r + 2)] = 1.0;
    }
    let mut p = d1.transpose() * d1 * (2.0 * opts.w_v);
    p += d2.transpose() * d2 * (2.0 * opts.w_a);
    for i in 0..n {
        p[(i, i)] += 2.0 * opts.w_s;
    }
    p
}

fn objective_one_joint(x: &DVector<f64>, root: &DVector<f64>, opts: &StoOpts) -> f64 {
    let n = x.len();
    let mut vel = 0.0;
    for t in 0..n - 1 {
        let d = x[t + 1] - x[t];
        vel += d * d;
    }
    let mut acc = 0.0;
    for t in 1..n - 1 {
        let d = x[t + 1] - 2.0 * x[t] + x[t - 1];
        acc += d * d;
    }
    let dev = (x - root).norm_squared();
    opts.w_v * vel + opts.w_a * acc + opts.w_s * dev
}

/// Full-path objective summed over joints.
pub fn objective(path: &Path, root: &Path, opts: &StoOpts) -> f64 {
    let dof = path.start().len();
    (0..dof)
        .map(|j| {
            let x = DVector::from_iterator(path.len(), path.waypoints.iter().map(|w| w[j]));
            let r = DVector::from_iterator(root.len(), root.waypoints.iter().map(|w| w[j]));
            objective_one_joint(&x, &r, opts)
        })
        .sum()
}

/// Solve the refinement QP, warm-started from the root path. The returned
/// path has exact endpoints (bitwise) and respects the joint limits; its
/// objective never exceeds the straight-line feasible candidate's.
pub fn sto_adapt(
    root: &Path,
    q_start: &Configuration,
    q_goal: &Configuration,
    limits: &[(f64, f64)],
    opts: &StoOpts,
) -> Result<(Path, StoReport), AdaptError> {
    let n = root.len();
    let dof = q_start.len();
    if n < 3 || q_goal.len() != dof || limits.len() != dof {
        return Err(AdaptError::Shape(
            "sto needs a root path with >= 3 waypoints and matching dimensions".into(),
        ));
    }
    let in_limits = |q: &Configuration| {
        limits
            .iter()
            .zip(q.iter())
            .all(|((lo, hi), v)| *v >= *lo && *v <= *hi)
    };
    if !in_limits(q_start) || !in_limits(q_goal) {
        return Err(AdaptError::Shape("sto endpoints violate joint limits".into()));
    }

    let p = cost_matrix(n, opts);
    let identity = DMatrix::identity(n, n);
    let mut equality_residual: f64 = 0.0;

    let mut per_joint: Vec<DVector<f64>> = Vec::with_capacity(dof);
    for j in 0..dof {
        let r = DVector::from_iterator(n, root.waypoints.iter().map(|w| w[j]));
        let q_lin = r.scale(-2.0 * opts.w_s);
        let mut l = DVector::from_element(n, limits[j].0);
        let mut u = DVector::from_element(n, limits[j].1);
        l[0] = q_start[j];
        u[0] = q_start[j];
        l[n - 1] = q_goal[j];
        u[n - 1] = q_goal[j];
        let sol = qp_solve(&p, &q_lin, &identity, &l, &u, &opts.qp, Some(&r))
            .map_err(|e| AdaptError::Qp(e.to_string()))?;
        equality_residual = equality_residual
            .max((sol.x[0] - q_start[j]).abs())
            .max((sol.x[n - 1] - q_goal[j]).abs());
        per_joint.push(sol.x);
    }

    // Snap endpoints exactly and clamp residual box violations (<= solver
    // tolerance) into the limits.
    let mut waypoints = Vec::with_capacity(n);
    for t in 0..n {
        let mut w = DVector::zeros(dof);
        for j in 0..dof {
            w[j] = per_joint[j][t].clamp(limits[j].0, limits[j].1);
        }
        waypoints.push(w);
    }
    waypoints[0] = q_start.clone();
    waypoints[n - 1] = q_goal.clone();
    let refined = Path::new(waypoints);

    // The uniform straight line between in-limit endpoints is always
    // feasible; return whichever candidate scores better so the convex
    // optimum witness holds exactly.
    let straight = straight_line_candidate(q_start, q_goal, n);
    let refined_obj = objective(&refined, root, opts);
    let straight_obj = objective(&straight, root, opts);
    let (best, best_obj) = if refined_obj <= straight_obj {
        (refined, refined_obj)
    } else {
        (straight, straight_obj)
    };
    Ok((
        best,
        StoReport {
            equality_residual,
            objective: best_obj,
            straight_objective: straight_obj,
        },
    ))
}

/// Uniform straight line q_t = q_start + (t/(n-1)) (q_goal - q_start) with
/// bitwise-exact endpoints.
pub fn straight_line_candidate(q_start: &Configuration, q_goal: &Configuration, n: usize) -> Path {
    let mut waypoints = Vec::with_capacity(n);
    waypoints.push(q_start.clone());
    for t in 1..n - 1 {
        let alpha = t as f64 / (n - 1) as f64;
        waypoints.push(q_start * (1.0 - alpha) + q_goal * alpha);
    }
    waypoints.push(q_goal.clone());
    Path::new(waypoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn wide_limits(dof: usize) -> Vec<(f64, f64)> {
        vec![(-100.0, 100.0); dof]
    }

    #[test]
    fn zero_deviation_weight_yields_uniform_straight_line() {
        // With w_s = 0 and inactive limits, the smoothness optimum with
        // fixed endpoints is the uniform straight line.
        let mut opts = StoOpts::default();
        opts.w_s = 0.0;
        let n = 20;
        let root = straight_line_candidate(
            &DVector::from_vec(vec![0.0, 1.0]),
            &DVector::from_vec(vec![0.3, 0.2]),
            n,
        );
        // Root is irrelevant to the optimum here; perturb it.
        let mut bumpy = root.clone();
        bumpy.waypoints[7][0] += 0.5;
        let q_start = DVector::from_vec(vec![0.0, 1.0]);
        let q_goal = DVector::from_vec(vec![1.0, -0.5]);
        let (path, _) = sto_adapt(&bumpy, &q_start, &q_goal, &wide_limits(2), &opts).unwrap();
        for (t, w) in path.waypoints.iter().enumerate() {
            let alpha = t as f64 / (n - 1) as f64;
            for j in 0..2 {
                let expect = q_start[j] * (1.0 - alpha) + q_goal[j] * alpha;
                assert_abs_diff_eq!(w[j], expect, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn root_fixed_point() {
        // Build a root that is already the optimum of its own program by
        // solving once and feeding the solution back in.
        let opts = StoOpts::default();
        let n = 30;
        let mut rng = StdRng::seed_from_u64(5);
        let raw = Path::new(
            (0..n)
                .map(|t| {
                    DVector::from_vec(vec![
                        (t as f64 / (n - 1) as f64) + 0.1 * rng.gen_range(-1.0..1.0),
                    ])
                })
                .collect(),
        );
        let q_start = raw.start().clone();
        let q_goal = raw.end().clone();
        let (optimal, _) = sto_adapt(&raw, &q_start, &q_goal, &wide_limits(1), &opts).unwrap();
        let (again, report) =
            sto_adapt(&optimal, &q_start, &q_goal, &wide_limits(1), &opts).unwrap();
        for (a, b) in again.waypoints.iter().zip(&optimal.waypoints) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-4);
        }
        assert!(report.equality_residual < 1e-6);
    }

    /// Dense KKT oracle: with inactive limits the program is an
    /// equality-constrained QP solvable in closed form.
    fn kkt_oracle(root: &DVector<f64>, start: f64, goal: f64, opts: &StoOpts) -> DVector<f64> {
        let n = root.len();
        let p = cost_matrix(n, opts);
        let q_lin = root.scale(-2.0 * opts.w_s);
        let mut kkt = DMatrix::zeros(n + 2, n + 2);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p);
        kkt[(n, 0)] = 1.0;
        kkt[(0, n)] = 1.0;
        kkt[(n + 1, n - 1)] = 1.0;
        kkt[(n - 1, n + 1)] = 1.0;
        let mut rhs = DVector::zeros(n + 2);
        for i in 0..n {
            rhs[i] = -q_lin[i];
        }
        rhs[n] = start;
        rhs[n + 1] = goal;
        let sol = kkt.lu().solve(&rhs).unwrap();
        DVector::from_iterator(n, (0..n).map(|i| sol[i]))
    }

    #[test]
    fn matches_dense_kkt_on_random_single_joint_instances() {
        let opts = StoOpts::default();
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let n = 10;
            let root_vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let root = Path::new(root_vals.iter().map(|v| DVector::from_vec(vec![*v])).collect());
            let start = rng.gen_range(-0.5..0.5);
            let goal = rng.gen_range(-0.5..0.5);
            let (path, _) = sto_adapt(
                &root,
                &DVector::from_vec(vec![start]),
                &DVector::from_vec(vec![goal]),
                &wide_limits(1),
                &opts,
            )
            .unwrap();
            let oracle = kkt_oracle(
                &DVector::from_vec(root_vals.clone()),
                start,
                goal,
                &opts,
            );
            for t in 0..n {
                assert!(
                    (path.waypoints[t][0] - oracle[t]).abs() < 1e-6,
                    "waypoint {t}: admm {} vs kkt {}",
                    path.waypoints[t][0],
                    oracle[t]
                );
            }
        }
    }

    #[test]
    fn endpoints_exact_and_objective_bounded_by_straight_line() {
        let opts = StoOpts::default();
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..10 {
            let n = 50;
            let root = Path::new(
                (0..n)
                    .map(|t| {
                        let base = t as f64 / (n - 1) as f64;
                        DVector::from_vec(vec![
                            base + 0.2 * (6.0 * base).sin(),
                            -base + 0.1 * rng.gen_range(-1.0..1.0),
                        ])
                    })
                    .collect(),
            );
            let q_start = root.start().clone();
            let q_goal = DVector::from_vec(vec![
                root.end()[0] + rng.gen_range(-0.3..0.3),
                root.end()[1] + rng.gen_range(-0.3..0.3),
            ]);
            let limits = vec![(-2.0, 2.0), (-2.0, 2.0)];
            let (path, report) = sto_adapt(&root, &q_start, &q_goal, &limits, &opts).unwrap();
            for j in 0..2 {
                assert_eq!(path.start()[j].to_bits(), q_start[j].to_bits());
                assert_eq!(path.end()[j].to_bits(), q_goal[j].to_bits());
            }
            assert!(report.equality_residual < 1e-6);
            assert!(report.objective <= report.straight_objective + 1e-12);
            for w in &path.waypoints {
                for j in 0..2 {
                    assert!(w[j] >= limits[j].0 - 1e-12 && w[j] <= limits[j].1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn active_joint_limits_are_respected() {
        let opts = StoOpts::default();
        let n = 40;
        // Root path swings far beyond the limit; the refined path must stay
        // inside.
        let root = Path::new(
            (0..n)
                .map(|t| {
                    let base = t as f64 / (n - 1) as f64;
                    DVector::from_vec(vec![1.5 * (std::f64::consts::PI * base).sin()])
                })
                .collect(),
        );
        let limits = vec![(-0.8, 0.8)];
        let (path, _) = sto_adapt(
            &root,
            &DVector::from_vec(vec![0.0]),
            &DVector::from_vec(vec![0.0]),
            &limits,
            &opts,
        )
        .unwrap();
        for w in &path.waypoints {
            assert!(w[0] >= -0.8 - 1e-9 && w[0] <= 0.8 + 1e-9);
        }
        // It should actually press against the limit somewhere.
        assert!(path.waypoints.iter().any(|w| w[0] > 0.75));
    }
}
