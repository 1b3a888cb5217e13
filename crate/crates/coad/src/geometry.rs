//! Collision primitives and closed-form pairwise distances.
//!
//! Everything the collision checker needs reduces to capsule-vs-shape
//! distance queries: link geometry is capsules, obstacles are spheres,
//! capsules, or (possibly rotated) boxes. Distances are signed only in the
//! sense that a value <= 0 means penetration.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::Transform;

/// Shape parameters expressed in the primitive's own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrimitiveKind {
    Sphere { radius: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    Aabb { min: [f64; 3], max: [f64; 3] },
}

/// A primitive plus the transform placing it in its parent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub frame: Transform,
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PrimitiveKind::Sphere { radius } | PrimitiveKind::Capsule { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::Scenario("primitive radius must be positive".into()));
                }
            }
            PrimitiveKind::Aabb { min, max } => {
                if min.iter().zip(max).any(|(lo, hi)| lo >= hi) {
                    return Err(Error::Scenario("aabb must satisfy min < max per axis".into()));
                }
            }
        }
        Ok(())
    }

    /// The same primitive re-expressed under `pose * frame`.
    pub fn posed(&self, pose: &Transform) -> Primitive {
        Primitive {
            kind: self.kind.clone(),
            frame: pose.compose(&self.frame),
        }
    }

    /// World-frame shape ready for distance queries.
    pub fn to_world_shape(&self) -> WorldShape {
        match &self.kind {
            PrimitiveKind::Sphere { radius } => WorldShape::Sphere {
                center: self.frame.translation,
                radius: *radius,
            },
            PrimitiveKind::Capsule { a, b, radius } => WorldShape::Capsule {
                a: self.frame.transform_point(&Vector3::from(*a)),
                b: self.frame.transform_point(&Vector3::from(*b)),
                radius: *radius,
            },
            PrimitiveKind::Aabb { min, max } => {
                let min = Vector3::from(*min);
                let max = Vector3::from(*max);
                let center_local = 0.5 * (min + max);
                let half = 0.5 * (max - min);
                WorldShape::Box {
                    world_from_box: Transform::new(
                        self.frame.rotation,
                        self.frame.transform_point(&center_local),
                    ),
                    half,
                }
            }
        }
    }
}

/// World-frame shape with precomputed placement.
#[derive(Debug, Clone)]
pub enum WorldShape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    Capsule {
        a: Vector3<f64>,
        b: Vector3<f64>,
        radius: f64,
    },
    /// Oriented box: centered at the frame origin with half-extents `half`.
    Box {
        world_from_box: Transform,
        half: Vector3<f64>,
    },
}

/// Segment in world coordinates with a radius: a posed link capsule.
#[derive(Debug, Clone, Copy)]
pub struct WorldCapsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let denom = ab.dot(&ab);
    let t = if denom <= f64::EPSILON {
        0.0
    } else {
        ((p - a).dot(&ab) / denom).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

/// Closest-point distance between two segments (Ericson-style clamped form).
pub fn segment_segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (mut s, mut t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (p1 - p2).norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom > f64::EPSILON {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

/// Distance from a point (box-local coordinates) to an axis-aligned box
/// centered at the origin with half-extents `half`.
fn point_box_distance_local(p: &Vector3<f64>, half: &Vector3<f64>) -> f64 {
    let dx = (p.x.abs() - half.x).max(0.0);
    let dy = (p.y.abs() - half.y).max(0.0);
    let dz = (p.z.abs() - half.z).max(0.0);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Distance between a segment and an oriented box. The point-to-box distance
/// is convex along the segment, so ternary search converges to the global
/// minimum; 48 halvings put the parameter within ~4e-15 of the optimum.
fn segment_box_distance(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    world_from_box: &Transform,
    half: &Vector3<f64>,
) -> f64 {
    let box_from_world = world_from_box.invert();
    let la = box_from_world.transform_point(a);
    let lb = box_from_world.transform_point(b);
    let eval = |t: f64| point_box_distance_local(&(la + (lb - la) * t), half);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..48 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if eval(m1) <= eval(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    eval(0.5 * (lo + hi)).min(eval(0.0)).min(eval(1.0))
}

/// Distance between a link capsule and a world shape; <= 0 means contact or
/// penetration.
pub fn capsule_shape_distance(capsule: &WorldCapsule, shape: &WorldShape) -> f64 {
    match shape {
        WorldShape::Sphere { center, radius } => {
            point_segment_distance(center, &capsule.a, &capsule.b) - capsule.radius - radius
        }
        WorldShape::Capsule { a, b, radius } => {
            segment_segment_distance(&capsule.a, &capsule.b, a, b) - capsule.radius - radius
        }
        WorldShape::Box { world_from_box, half } => {
            segment_box_distance(&capsule.a, &capsule.b, world_from_box, half) - capsule.radius
        }
    }
}

pub fn capsules_collide(a: &WorldCapsule, b: &WorldCapsule) -> bool {
    segment_segment_distance(&a.a, &a.b, &b.a, &b.b) <= a.radius + b.radius
}
