//! RRT-Connect with random-pair shortcut smoothing and fixed-resolution
//! resampling. Produces the root paths stored in the library.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::robot::{Configuration, RobotModel};
use crate::world::{is_valid_config, is_valid_edge, ValidityContext};

/// Fixed waypoint count for stored paths.
pub const PATH_RESOLUTION: usize = 200;

/// Joint-space waypoint sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Configuration>,
}

impl Path {
    pub fn new(waypoints: Vec<Configuration>) -> Self {
        Self { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> &Configuration {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &Configuration {
        self.waypoints.last().unwrap()
    }

    /// Joint-space path length: sum of Euclidean distances between
    /// consecutive waypoints.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (&w[1] - &w[0]).norm())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PlannerOpts {
    /// Extension step, radians (joint-space Euclidean norm).
    pub step: f64,
    pub max_iterations: usize,
    /// Wall-clock budget, seconds.
    pub timeout: f64,
    pub shortcut_rounds: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PlannerOpts {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iterations: 50_000,
            timeout: 600.0,
            shortcut_rounds: 200,
            seed: 0,
        }
    }
}

impl PlannerOpts {
    pub fn validate(&self) -> Result<()> {
        if self.step <= 0.0 || self.max_iterations == 0 || self.timeout <= 0.0 {
            return Err(Error::Scenario("planner options must be positive".into()));
        }
        Ok(())
    }
}

enum ExtendStatus {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

struct Tree {
    vertices: Vec<Configuration>,
    parents: Vec<Option<usize>>,
    from_start: bool,
}

impl Tree {
    fn new(root: Configuration, from_start: bool) -> Self {
        Self {
            vertices: vec![root],
            parents: vec![None],
            from_start,
        }
    }

    fn nearest(&self, q: &Configuration) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn extend(
        &mut self,
        model: &RobotModel,
        ctx: &ValidityContext,
        q_target: &Configuration,
        step: f64,
    ) -> Result<ExtendStatus> {
        let nearest = self.nearest(q_target);
        let q_near = self.vertices[nearest].clone();
        let diff = q_target - &q_near;
        let dist = diff.norm();
        let (q_new, reached) = if dist <= step {
            (q_target.clone(), true)
        } else {
            (&q_near + diff * (step / dist), false)
        };
        if !is_valid_edge(model, ctx, &q_near, &q_new)? {
            return Ok(ExtendStatus::Trapped);
        }
        self.vertices.push(q_new);
        self.parents.push(Some(nearest));
        let idx = self.vertices.len() - 1;
        Ok(if reached {
            ExtendStatus::Reached(idx)
        } else {
            ExtendStatus::Advanced(idx)
        })
    }

    fn connect(
        &mut self,
        model: &RobotModel,
        ctx: &ValidityContext,
        q_target: &Configuration,
        step: f64,
    ) -> Result<ExtendStatus> {
        loop {
            match self.extend(model, ctx, q_target, step)? {
                ExtendStatus::Advanced(_) => continue,
                status => return Ok(status),
            }
        }
    }

    fn branch_to_root(&self, mut index: usize) -> Vec<Configuration> {
        let mut out = vec![self.vertices[index].clone()];
        while let Some(p) = self.parents[index] {
            index = p;
            out.push(self.vertices[index].clone());
        }
        out
    }
}

/// Bidirectional RRT-Connect over joint space with uniform sampling inside
/// the joint limits. On success the raw tree path is shortcut-smoothed and
/// resampled to `PATH_RESOLUTION` waypoints, uniformly in arc length.
///
/// An invalid start is a caller bug and errors out; an infeasible problem
/// (goal invalid, iteration cap, timeout) returns None.
pub fn plan(
    model: &RobotModel,
    ctx: &ValidityContext,
    q_start: &Configuration,
    q_goal: &Configuration,
    opts: &PlannerOpts,
) -> Result<Option<Path>> {
    opts.validate()?;
    if !model.within_limits(q_start) || !is_valid_config(model, ctx, q_start)? {
        return Err(Error::InvalidStart(
            "start configuration violates limits or collides".into(),
        ));
    }
    if !model.within_limits(q_goal) {
        return Err(Error::InvalidStart("goal configuration violates limits".into()));
    }
    if !is_valid_config(model, ctx, q_goal)? {
        return Ok(None);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tree_a = Tree::new(q_start.clone(), true);
    let mut tree_b = Tree::new(q_goal.clone(), false);
    let started = Instant::now();

    for iteration in 0..opts.max_iterations {
        if iteration % 64 == 0 && started.elapsed().as_secs_f64() > opts.timeout {
            return Ok(None);
        }
        let q_rand = DVector::from_iterator(
            model.dof(),
            model.joints.iter().map(|j| rng.gen_range(j.limits.0..=j.limits.1)),
        );
        match tree_a.extend(model, ctx, &q_rand, opts.step)? {
            ExtendStatus::Trapped => {}
            ExtendStatus::Advanced(new_idx) | ExtendStatus::Reached(new_idx) => {
                let q_new = tree_a.vertices[new_idx].clone();
                if let ExtendStatus::Reached(reach_idx) =
                    tree_b.connect(model, ctx, &q_new, opts.step)?
                {
                    let mut half_a = tree_a.branch_to_root(new_idx);
                    half_a.reverse();
                    let half_b = tree_b.branch_to_root(reach_idx);
                    let mut waypoints = if tree_a.from_start {
                        // half_a: [q_start .. q_new], half_b: [q_new .. q_goal]
                        let mut w = half_a;
                        w.extend(half_b.into_iter().skip(1));
                        w
                    } else {
                        // half_b: [q_new .. q_start], half_a: [q_goal .. q_new]
                        let mut w = half_b;
                        w.reverse();
                        let mut rest = half_a;
                        rest.reverse();
                        w.extend(rest.into_iter().skip(1));
                        w
                    };
                    debug_assert_eq!(waypoints[0], *q_start);
                    debug_assert_eq!(*waypoints.last().unwrap(), *q_goal);
                    if waypoints.len() == 1 {
                        waypoints.push(waypoints[0].clone());
                    }
                    let smoothed = shortcut(
                        &Path::new(waypoints),
                        model,
                        ctx,
                        opts.shortcut_rounds,
                        opts.seed.wrapping_add(0x9e37_79b9),
                    )?;
                    return Ok(Some(resample(&smoothed, PATH_RESOLUTION)));
                }
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
    }
    Ok(None)
}

/// Random-pair shortcutting: replace the segment between two waypoints with
/// the straight edge whenever that edge is valid. The first attempt is
/// always the full (start, end) skip, so an unobstructed problem collapses
/// to the straight line. Never increases path length.
pub fn shortcut(
    path: &Path,
    model: &RobotModel,
    ctx: &ValidityContext,
    rounds: usize,
    seed: u64,
) -> Result<Path> {
    let mut waypoints = path.waypoints.clone();
    if rounds == 0 || waypoints.len() < 3 {
        return Ok(Path::new(waypoints));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..rounds {
        if waypoints.len() < 3 {
            break;
        }
        let (i, j) = if round == 0 {
            (0, waypoints.len() - 1)
        } else {
            let i = rng.gen_range(0..waypoints.len() - 2);
            let j = rng.gen_range(i + 2..waypoints.len());
            (i, j)
        };
        if is_valid_edge(model, ctx, &waypoints[i], &waypoints[j])? {
            waypoints.drain(i + 1..j);
        }
    }
    Ok(Path::new(waypoints))
}

/// Arc-length-uniform linear resampling to exactly `count` waypoints.
/// Endpoints are preserved bitwise; a zero-length path yields `count`
/// copies of the start.
pub fn resample(path: &Path, count: usize) -> Path {
    assert!(count >= 2, "resample needs at least two waypoints");
    let src = &path.waypoints;
    assert!(!src.is_empty());
    let total: f64 = path.length();
    let start = src[0].clone();
    let end = src[src.len() - 1].clone();
    if total <= 0.0 {
        return Path::new(vec![start; count]);
    }
    let mut cumulative = Vec::with_capacity(src.len());
    cumulative.push(0.0);
    for w in src.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (&w[1] - &w[0]).norm());
    }
    let mut out = Vec::with_capacity(count);
    out.push(start);
    let mut seg = 0usize;
    for k in 1..count - 1 {
        let target = total * k as f64 / (count - 1) as f64;
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            (target - cumulative[seg]) / seg_len
        } else {
            0.0
        };
        out.push(&src[seg] * (1.0 - t) + &src[seg + 1] * t);
    }
    out.push(end);
    Path::new(out)
}
