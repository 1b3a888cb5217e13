//! Environment model and object-pose-dependent validity.
//!
//! The free space depends on where the target object sits, so collision
//! contexts come in two flavors: `exact` poses the object at one pose, and
//! `swept` replaces it with a conservative over-approximation covering every
//! pose inside a grid cell. A path checked under the swept context is valid
//! for the whole cell.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{capsule_shape_distance, capsules_collide, Primitive, PrimitiveKind, WorldShape};
use crate::robot::{Configuration, RobotModel};
use crate::transforms::{cell_nominal, CellIndex, GridSpec, Pose4, Transform};

/// Static obstacles in the world frame plus the movable object's shape in
/// its own frame.
#[derive(Debug, Clone)]
pub struct Environment {
    pub static_obstacles: Vec<Primitive>,
    pub object_shape: Vec<Primitive>,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if self.object_shape.is_empty() {
            return Err(Error::Scenario("object shape must be non-empty".into()));
        }
        for p in self.static_obstacles.iter().chain(&self.object_shape) {
            p.validate()?;
        }
        Ok(())
    }
}

/// How the movable object enters collision checking.
#[derive(Debug, Clone)]
pub enum ValidityMode {
    /// Object posed at one exact pose.
    Exact(Pose4),
    /// Object inflated to cover every pose inside one grid cell.
    Swept(CellIndex),
    /// Static obstacles only (start-configuration validation).
    StaticOnly,
}

/// Prepared collision context: world-frame obstacle shapes plus the edge
/// resolution (max per-joint step, radians).
#[derive(Debug, Clone)]
pub struct ValidityContext {
    pub mode: ValidityMode,
    pub resolution: f64,
    obstacles: Vec<WorldShape>,
}

impl ValidityContext {
    pub fn exact(env: &Environment, pose: Pose4, resolution: f64) -> Self {
        let object_world = pose.to_transform();
        let obstacles = env
            .static_obstacles
            .iter()
            .map(|p| p.to_world_shape())
            .chain(env.object_shape.iter().map(|p| p.posed(&object_world).to_world_shape()))
            .collect();
        Self {
            mode: ValidityMode::Exact(pose),
            resolution,
            obstacles,
        }
    }

    pub fn swept(env: &Environment, grid: &GridSpec, cell: CellIndex, resolution: f64) -> Result<Self> {
        let swept = swept_object(env, grid, &cell)?;
        let obstacles = env
            .static_obstacles
            .iter()
            .chain(swept.iter())
            .map(|p| p.to_world_shape())
            .collect();
        Ok(Self {
            mode: ValidityMode::Swept(cell),
            resolution,
            obstacles,
        })
    }

    pub fn static_only(env: &Environment, resolution: f64) -> Self {
        let obstacles = env.static_obstacles.iter().map(|p| p.to_world_shape()).collect();
        Self {
            mode: ValidityMode::StaticOnly,
            resolution,
            obstacles,
        }
    }

    pub fn obstacles(&self) -> &[WorldShape] {
        &self.obstacles
    }
}

/// Conservative swept object for a cell: each object primitive posed at the
/// cell's nominal pose and inflated by
///
///   r_infl = 0.5 * sqrt(dx^2 + dy^2 + dz^2) + r_max * (dpsi / 2)
///
/// where r_max is the primitive's reference distance from the object's
/// vertical axis (center distance for spheres/boxes, max endpoint distance
/// for capsules). Boxes are replaced by their circumscribing sphere first.
/// Translation within the cell moves a primitive by at most the half
/// diagonal; yaw by at most r_max * dpsi/2 of arc, so inflation by their sum
/// contains every posed primitive.
pub fn swept_object(env: &Environment, grid: &GridSpec, cell: &CellIndex) -> Result<Vec<Primitive>> {
    let nominal = cell_nominal(cell, grid)?;
    let object_world = nominal.to_transform();
    let w = &grid.widths;
    let half_diag = 0.5 * (w.dx * w.dx + w.dy * w.dy + w.dz * w.dz).sqrt();
    let half_dpsi = 0.5 * w.dpsi;

    let axis_distance = |p: &Vector3<f64>| (p.x * p.x + p.y * p.y).sqrt();

    let mut out = Vec::with_capacity(env.object_shape.len());
    for prim in &env.object_shape {
        match &prim.kind {
            PrimitiveKind::Sphere { radius } => {
                let center_obj = prim.frame.translation;
                let r_infl = half_diag + axis_distance(&center_obj) * half_dpsi;
                out.push(Primitive {
                    kind: PrimitiveKind::Sphere { radius: radius + r_infl },
                    frame: Transform::from_translation(object_world.transform_point(&center_obj)),
                });
            }
            PrimitiveKind::Capsule { a, b, radius } => {
                let a_obj = prim.frame.transform_point(&Vector3::from(*a));
                let b_obj = prim.frame.transform_point(&Vector3::from(*b));
                let r_max = axis_distance(&a_obj).max(axis_distance(&b_obj));
                let r_infl = half_diag + r_max * half_dpsi;
                out.push(Primitive {
                    kind: PrimitiveKind::Capsule {
                        a: object_world.transform_point(&a_obj).into(),
                        b: object_world.transform_point(&b_obj).into(),
                        radius: radius + r_infl,
                    },
                    frame: Transform::identity(),
                });
            }
            PrimitiveKind::Aabb { min, max } => {
                let min = Vector3::from(*min);
                let max = Vector3::from(*max);
                let center_local = 0.5 * (min + max);
                let circum = 0.5 * (max - min).norm();
                let center_obj = prim.frame.transform_point(&center_local);
                let r_infl = half_diag + axis_distance(&center_obj) * half_dpsi;
                out.push(Primitive {
                    kind: PrimitiveKind::Sphere { radius: circum + r_infl },
                    frame: Transform::from_translation(object_world.transform_point(&center_obj)),
                });
            }
        }
    }
    Ok(out)
}

/// True iff no link capsule touches an obstacle, the (posed or swept)
/// object, or a non-adjacent link. Joint limits are a precondition, not
/// checked here.
pub fn is_valid_config(model: &RobotModel, ctx: &ValidityContext, q: &Configuration) -> Result<bool> {
    let capsules = model.posed_capsules(q)?;
    for (_, capsule) in &capsules {
        for shape in &ctx.obstacles {
            if capsule_shape_distance(capsule, shape) <= 0.0 {
                return Ok(false);
            }
        }
    }
    for i in 0..capsules.len() {
        for j in (i + 1)..capsules.len() {
            let (link_i, cap_i) = &capsules[i];
            let (link_j, cap_j) = &capsules[j];
            if link_j.abs_diff(*link_i) >= 2 && capsules_collide(cap_i, cap_j) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Discretized straight-edge validity. The edge is subdivided so the largest
/// per-joint step is at most ctx.resolution, using a power-of-two count so
/// finer resolutions check a superset of the coarser points (shrinking the
/// resolution can never flip an edge from invalid to valid).
pub fn is_valid_edge(
    model: &RobotModel,
    ctx: &ValidityContext,
    q_a: &Configuration,
    q_b: &Configuration,
) -> Result<bool> {
    let max_step = (q_b - q_a).amax();
    let needed = (max_step / ctx.resolution).ceil().max(1.0) as usize;
    let segments = needed.next_power_of_two();
    for k in 0..=segments {
        let t = k as f64 / segments as f64;
        let q = q_a * (1.0 - t) + q_b * t;
        if !is_valid_config(model, ctx, &q)? {
            return Ok(false);
        }
    }
    Ok(true)
}
