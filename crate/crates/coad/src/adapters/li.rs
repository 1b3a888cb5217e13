//! Linear-interpolation adapter: append a short interpolated tail from the
//! root path's end to the new goal,
//!
//!   q_n = (1 - n/T_end) q_root + (n/T_end) q_goal,  n in [1, T_end],
//!
//! so the combined path passes through q_root exactly (the root's own last
//! waypoint) and ends at q_goal exactly (n = T_end evaluates bitwise to the
//! goal). A straight joint-space tail can still sweep a curved workspace
//! arc, so library building pairs this with a chord-deviation check.

use crate::adapters::AdaptError;
use crate::geometry::point_segment_distance;
use crate::planner::Path;
use crate::robot::{fk, Configuration, RobotModel};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LiOpts {
    /// Appended waypoint count.
    pub t_end: usize,
    /// Max allowed deviation of the end-effector from the workspace chord, m.
    pub chord_tolerance: f64,
    /// Sample count for the continuity check.
    pub continuity_samples: usize,
}

impl Default for LiOpts {
    fn default() -> Self {
        Self {
            t_end: 10,
            chord_tolerance: 0.05,
            continuity_samples: 20,
        }
    }
}

/// Root path plus the interpolated tail: output has root.len() + t_end
/// waypoints and ends at `q_goal` bitwise.
pub fn li_adapt(root: &Path, q_goal: &Configuration, opts: &LiOpts) -> Result<Path, AdaptError> {
    if root.is_empty() || opts.t_end == 0 {
        return Err(AdaptError::Shape("li needs a non-empty root and t_end >= 1".into()));
    }
    let q_root = root.end();
    if q_root.len() != q_goal.len() {
        return Err(AdaptError::Shape("li goal dimension mismatch".into()));
    }
    let mut waypoints = root.waypoints.clone();
    for n in 1..=opts.t_end {
        let alpha = n as f64 / opts.t_end as f64;
        waypoints.push(q_root * (1.0 - alpha) + q_goal * alpha);
    }
    Ok(Path::new(waypoints))
}

/// Chord-deviation continuity check: sample configurations along the
/// joint-space line from `root_end` to `q_goal` and require every
/// end-effector position to stay within `chord_tolerance` of the workspace
/// segment between the two endpoint poses.
pub fn li_continuity_check(
    model: &RobotModel,
    root_end: &Configuration,
    q_goal: &Configuration,
    opts: &LiOpts,
) -> crate::error::Result<bool> {
    let p_a = fk(model, root_end)?.translation;
    let p_b = fk(model, q_goal)?.translation;
    let samples = opts.continuity_samples.max(2);
    for k in 0..=samples {
        let t = k as f64 / samples as f64;
        let q = root_end * (1.0 - t) + q_goal * t;
        let p = fk(model, &q)?.translation;
        if point_segment_distance(&p, &p_a, &p_b) > opts.chord_tolerance {
            return Ok(false);
        }
    }
    Ok(true)
}
