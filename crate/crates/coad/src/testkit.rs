//! Shared robot fixtures for unit tests.

use nalgebra::Vector3;

use crate::robot::{Joint, LinkCapsule, RobotModel};
use crate::transforms::Transform;

/// Planar 3R arm with links 0.4/0.3/0.2 m, all axes +z.
pub fn planar_3r() -> RobotModel {
    let joint = |x: f64| Joint {
        offset: Transform::from_translation(Vector3::new(x, 0.0, 0.0)),
        axis: Vector3::z(),
        limits: (-2.967, 2.967),
    };
    let capsule = |len: f64, r: f64| LinkCapsule {
        a: Vector3::zeros(),
        b: Vector3::new(len, 0.0, 0.0),
        radius: r,
    };
    RobotModel {
        joints: vec![joint(0.0), joint(0.4), joint(0.3)],
        link_capsules: vec![
            vec![capsule(0.4, 0.04)],
            vec![capsule(0.3, 0.035)],
            vec![capsule(0.2, 0.03)],
        ],
        ee_offset: Transform::from_translation(Vector3::new(0.2, 0.0, 0.0)),
    }
}

/// Spatial 6R chain: base yaw, three pitch joints, wrist roll, wrist yaw.
pub fn spatial_6r() -> RobotModel {
    let j = |xyz: [f64; 3], axis: Vector3<f64>, lim: f64| Joint {
        offset: Transform::from_translation(Vector3::from(xyz)),
        axis,
        limits: (-lim, lim),
    };
    let cap = |len: f64, r: f64| LinkCapsule {
        a: Vector3::zeros(),
        b: Vector3::new(len, 0.0, 0.0),
        radius: r,
    };
    RobotModel {
        joints: vec![
            j([0.0, 0.0, 0.25], Vector3::z(), 2.967),
            j([0.0, 0.0, 0.05], Vector3::y(), 1.9),
            j([0.35, 0.0, 0.0], Vector3::y(), 2.6),
            j([0.30, 0.0, 0.0], Vector3::y(), 2.6),
            j([0.08, 0.0, 0.0], Vector3::x(), 2.967),
            j([0.06, 0.0, 0.0], Vector3::z(), 2.967),
        ],
        link_capsules: vec![
            vec![LinkCapsule {
                a: Vector3::new(0.0, 0.0, -0.2),
                b: Vector3::zeros(),
                radius: 0.05,
            }],
            vec![cap(0.35, 0.045)],
            vec![cap(0.30, 0.04)],
            vec![cap(0.08, 0.035)],
            vec![cap(0.06, 0.035)],
            vec![cap(0.10, 0.03)],
        ],
        ee_offset: Transform::from_translation(Vector3::new(0.10, 0.0, 0.0)),
    }
}
