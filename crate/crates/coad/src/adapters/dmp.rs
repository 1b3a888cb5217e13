//! Dynamic-movement-primitive adapter: each joint path is modeled by a
//! critically dampable second-order system with a learned forcing term,
//!
//!   qdd = alpha_y (beta_y (g - q) - qd) + f(s),
//!
//! where the phase s = exp(-alpha_s t / T) decays from 1 toward ~0.018 over
//! the rollout. Goal retargeting is a forward rollout with g replaced.

use nalgebra::DVector;

use crate::adapters::AdaptError;
use crate::planner::Path;
use crate::robot::Configuration;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DmpOpts {
    pub alpha_y: f64,
    pub beta_y: f64,
    /// Canonical-system decay rate.
    pub alpha_s: f64,
    /// Basis function count per joint.
    pub n_basis: usize,
    /// Rollout step count (matches the stored path resolution).
    pub t: usize,
    /// Ridge regularizer for the weight fit.
    pub ridge: f64,
}

impl Default for DmpOpts {
    fn default() -> Self {
        Self {
            alpha_y: 25.0,
            beta_y: 6.25,
            alpha_s: 4.0,
            n_basis: 25,
            t: crate::planner::PATH_RESOLUTION,
            ridge: 1e-8,
        }
    }
}

/// Fitted per-joint weights plus the rollout boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpWeights {
    /// weights[j] has exactly n_basis entries.
    pub weights: Vec<DVector<f64>>,
    pub q_start: Configuration,
    pub demo_goal: Configuration,
}

/// Gaussian basis centers/widths spread evenly in time, mapped into phase
/// space so the early (fast-changing) phase region gets tighter bases.
fn basis_parameters(opts: &DmpOpts) -> (Vec<f64>, Vec<f64>) {
    let nb = opts.n_basis;
    let centers: Vec<f64> = (0..nb)
        .map(|j| (-opts.alpha_s * j as f64 / (nb - 1) as f64).exp())
        .collect();
    let mut widths = Vec::with_capacity(nb);
    for j in 0..nb {
        let gap = if j + 1 < nb {
            centers[j + 1] - centers[j]
        } else {
            centers[nb - 1] - centers[nb - 2]
        };
        widths.push(1.0 / (2.0 * gap * gap));
    }
    (centers, widths)
}

fn forcing(s: f64, weights: &DVector<f64>, centers: &[f64], widths: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((w, c), h) in weights.iter().zip(centers).zip(widths) {
        let psi = (-h * (s - c) * (s - c)).exp();
        num += psi * w;
        den += psi;
    }
    if den < 1e-300 {
        0.0
    } else {
        (num / den) * s
    }
}

/// Fit per-joint forcing weights from a demonstration path by
/// ridge-regularized locally weighted regression over the phase variable.
pub fn dmp_fit(path: &Path, opts: &DmpOpts) -> Result<DmpWeights, AdaptError> {
    let t_count = path.len();
    if t_count < 3 || opts.n_basis < 2 {
        return Err(AdaptError::Shape(
            "dmp fit needs >= 3 waypoints and >= 2 bases".into(),
        ));
    }
    let dof = path.start().len();
    let dt = 1.0 / opts.t as f64;
    let (centers, widths) = basis_parameters(opts);

    let phases: Vec<f64> = (0..t_count)
        .map(|k| (-opts.alpha_s * k as f64 / opts.t as f64).exp())
        .collect();

    let mut weights = Vec::with_capacity(dof);
    for j in 0..dof {
        let y: Vec<f64> = path.waypoints.iter().map(|w| w[j]).collect();
        let g = y[t_count - 1];
        // Finite-differenced velocity/acceleration (central in the
        // interior, one-sided at the ends).
        let mut yd = vec![0.0; t_count];
        let mut ydd = vec![0.0; t_count];
        for k in 0..t_count {
            yd[k] = if k == 0 {
                (y[1] - y[0]) / dt
            } else if k == t_count - 1 {
                (y[k] - y[k - 1]) / dt
            } else {
                (y[k + 1] - y[k - 1]) / (2.0 * dt)
            };
        }
        for k in 0..t_count {
            ydd[k] = if k == 0 {
                (yd[1] - yd[0]) / dt
            } else if k == t_count - 1 {
                (yd[k] - yd[k - 1]) / dt
            } else {
                (yd[k + 1] - yd[k - 1]) / (2.0 * dt)
            };
        }
        // Forcing targets: f_k = qdd - alpha_y (beta_y (g - q) - qd).
        // The regression input is xi = s (the phase gate), so each basis
        // solves a tiny weighted 1-d least squares.
        let mut w = DVector::zeros(opts.n_basis);
        for b in 0..opts.n_basis {
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..t_count {
                let s = phases[k];
                let psi = (-widths[b] * (s - centers[b]) * (s - centers[b])).exp();
                let f_target = ydd[k] - opts.alpha_y * (opts.beta_y * (g - y[k]) - yd[k]);
                num += psi * s * f_target;
                den += psi * s * s;
            }
            w[b] = num / (den + opts.ridge);
        }
        weights.push(w);
    }
    Ok(DmpWeights {
        weights,
        q_start: path.start().clone(),
        demo_goal: path.end().clone(),
    })
}

/// Forward rollout toward `q_goal`, returning the path and the pre-snap
/// endpoint error per joint. The caller decides whether the snap distance is
/// acceptable.
pub fn dmp_rollout(
    w: &DmpWeights,
    q_goal: &Configuration,
    opts: &DmpOpts,
) -> Result<(Path, DVector<f64>), AdaptError> {
    let dof = w.q_start.len();
    if q_goal.len() != dof || w.weights.len() != dof {
        return Err(AdaptError::Shape("dmp dimensions do not match".into()));
    }
    let dt = 1.0 / opts.t as f64;
    let (centers, widths) = basis_parameters(opts);

    let mut q = w.q_start.clone();
    let mut qd = DVector::zeros(dof);
    let mut waypoints = Vec::with_capacity(opts.t);
    waypoints.push(q.clone());
    for k in 1..opts.t {
        let s = (-opts.alpha_s * (k - 1) as f64 / opts.t as f64).exp();
        let mut qdd = DVector::zeros(dof);
        for j in 0..dof {
            let f = forcing(s, &w.weights[j], &centers, &widths);
            qdd[j] = opts.alpha_y * (opts.beta_y * (q_goal[j] - q[j]) - qd[j]) + f;
        }
        qd += qdd * dt;
        q += &qd * dt;
        if q.amax() > 1e3 {
            return Err(AdaptError::Diverged);
        }
        waypoints.push(q.clone());
    }
    let snap = DVector::from_iterator(
        dof,
        (0..dof).map(|j| (waypoints[opts.t - 1][j] - q_goal[j]).abs()),
    );
    Ok((Path::new(waypoints), snap))
}

/// Rollout with the goal-attainment gate: the pre-snap endpoint must be
/// within 1e-3 rad per joint, after which the last waypoint is overwritten
/// with the goal exactly.
pub const SNAP_TOLERANCE: f64 = 1e-3;

pub fn dmp_adapt(
    w: &DmpWeights,
    q_goal: &Configuration,
    opts: &DmpOpts,
) -> Result<Path, AdaptError> {
    let (mut path, snap) = dmp_rollout(w, q_goal, opts)?;
    if snap.amax() >= SNAP_TOLERANCE {
        return Err(AdaptError::SnapTooFar(snap.amax()));
    }
    let last = path.waypoints.len() - 1;
    path.waypoints[last] = q_goal.clone();
    Ok(path)
}
