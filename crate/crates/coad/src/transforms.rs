//! Rigid-transform algebra, task-space-region membership, the conservative
//! inner-box bound, and the uniform task-space grid built from it.
//!
//! Object poses vary only in (x, y, z, yaw); roll and pitch are fixed. An
//! end-effector displacement box composed with a fixed grasp offset defines
//! the set of admissible goals for a given object pose, and inverting that
//! relation yields, per goal pose, a region of object poses it can solve.
//! The inner box inscribed in that region sets the grid cell widths, so one
//! goal pose certifies a whole cell.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical slack for boundary membership tests. Analytic constructions sit
/// exactly on the box faces; this must stay well below 1e-6, which tests pin
/// as a rejected violation.
const MEMBERSHIP_SLACK: f64 = 1e-9;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Rigid transform in 3-space: orthonormal rotation plus translation (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about +z by `psi`, no translation.
    pub fn rotation_z(psi: f64) -> Self {
        let (s, c) = psi.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation about an arbitrary unit axis (Rodrigues).
    pub fn rotation_axis(axis: &Vector3<f64>, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let k = skew(axis);
        let rotation = Matrix3::identity() + k * s + k * k * (1.0 - c);
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    /// Translation plus ZYX Euler rotation (roll about x, pitch about y, yaw
    /// about z, applied as Rz * Ry * Rx).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        let [roll, pitch, yaw] = rpy;
        let rx = Self::rotation_axis(&Vector3::x(), roll);
        let ry = Self::rotation_axis(&Vector3::y(), pitch);
        let rz = Self::rotation_z(yaw);
        let rot = rz.compose(&ry).compose(&rx);
        Self {
            rotation: rot.rotation,
            translation: Vector3::new(xyz[0], xyz[1], xyz[2]),
        }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// ZYX Euler decomposition: (roll, pitch, yaw) with R = Rz(yaw) Ry(pitch) Rx(roll).
    pub fn rpy(&self) -> (f64, f64, f64) {
        let r = &self.rotation;
        let pitch = (-r[(2, 0)]).asin();
        if pitch.abs() > std::f64::consts::FRAC_PI_2 - 1e-9 {
            // Gimbal lock: yaw and roll are coupled; put everything in yaw.
            let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
            (0.0, pitch, yaw)
        } else {
            let roll = r[(2, 1)].atan2(r[(2, 2)]);
            let yaw = r[(1, 0)].atan2(r[(0, 0)]);
            (roll, pitch, yaw)
        }
    }

    /// True when the rotation block is orthonormal with determinant +1
    /// within `tol` elementwise.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let gram = self.rotation.transpose() * self.rotation;
        let eye = Matrix3::identity();
        let ortho = (gram - eye).iter().all(|v| v.abs() <= tol);
        ortho && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_to_pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TWO_PI);
    if a > std::f64::consts::PI {
        a -= TWO_PI;
    }
    a
}

/// Wrap an angle into (0, 2*pi].
pub fn wrap_to_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(TWO_PI);
    if a == 0.0 {
        TWO_PI
    } else {
        a
    }
}

/// Object pose restricted to (x, y, z, yaw); roll and pitch are fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Yaw, always stored in (0, 2*pi].
    pub psi: f64,
}

impl Pose4 {
    pub fn new(x: f64, y: f64, z: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            psi: wrap_to_two_pi(psi),
        }
    }

    pub fn to_transform(&self) -> Transform {
        let mut t = Transform::rotation_z(self.psi);
        t.translation = Vector3::new(self.x, self.y, self.z);
        t
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Symmetric displacement bounds: the admissible end-effector offset stays
/// within +-b on every component. Angles in radians, translations in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub psi: f64,
}

impl DisplacementBox {
    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.z, self.roll, self.pitch, self.psi];
        if all.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::EmptyInterior(
                "displacement bounds must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Admissible end-effector poses relative to an object: a displacement box
/// composed with a fixed grasp offset.
#[derive(Debug, Clone, Copy)]
pub struct TsrSpec {
    pub bounds: DisplacementBox,
    pub grasp_offset: Transform,
}

/// Membership test: does `ee_pose` lie in the goal region of `object_pose`?
///
/// Recovers the displacement T_delta = T_o^-1 * T_e * T_s^-1 and checks its
/// translation componentwise and its roll/pitch/yaw on the wrapped interval
/// (-pi, pi] against the box bounds. Total function.
pub fn tsr_contains(object_pose: &Transform, ee_pose: &Transform, tsr: &TsrSpec) -> bool {
    let delta = object_pose
        .invert()
        .compose(ee_pose)
        .compose(&tsr.grasp_offset.invert());
    let t = delta.translation;
    let b = &tsr.bounds;
    if t.x.abs() > b.x + MEMBERSHIP_SLACK
        || t.y.abs() > b.y + MEMBERSHIP_SLACK
        || t.z.abs() > b.z + MEMBERSHIP_SLACK
    {
        return false;
    }
    let (roll, pitch, yaw) = delta.rpy();
    wrap_to_pi(roll).abs() <= b.roll + MEMBERSHIP_SLACK
        && wrap_to_pi(pitch).abs() <= b.pitch + MEMBERSHIP_SLACK
        && wrap_to_pi(yaw).abs() <= b.psi + MEMBERSHIP_SLACK
}

/// Cell widths of the conservative axis-aligned inner box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellWidths {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dpsi: f64,
}

/// Conservative inner-box widths for a displacement box with non-empty
/// interior in (x, y, z, yaw):
///
///   h_xy  = min(b_x, b_y) / sqrt(2)
///   dx = dy = 2 h_xy,  dz = 2 b_z,  dpsi = 2 b_psi
///
/// The xy coupling introduced by inverting a yawed displacement is absorbed
/// by inscribing an axis-aligned square of half-side h_xy; z and yaw stay
/// decoupled and keep their full bounds.
pub fn inner_box(tsr: &TsrSpec) -> Result<CellWidths> {
    let b = &tsr.bounds;
    b.validate()?;
    if b.x <= 0.0 || b.y <= 0.0 || b.z <= 0.0 || b.psi <= 0.0 {
        return Err(Error::EmptyInterior(format!(
            "b_x, b_y, b_z, b_psi must all be positive, got ({}, {}, {}, {})",
            b.x, b.y, b.z, b.psi
        )));
    }
    let h_xy = b.x.min(b.y) / std::f64::consts::SQRT_2;
    Ok(CellWidths {
        dx: 2.0 * h_xy,
        dy: 2.0 * h_xy,
        dz: 2.0 * b.z,
        dpsi: 2.0 * b.psi,
    })
}

/// Axis-aligned bounds of the task space; yaw is implicitly (0, 2*pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpaceBounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl TaskSpaceBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("x", self.x), ("y", self.y), ("z", self.z)] {
            if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
                return Err(Error::Scenario(format!(
                    "task-space {name} range [{}, {}] is invalid",
                    r[0], r[1]
                )));
            }
        }
        Ok(())
    }
}

/// Uniform grid over the task space with cell widths from the inner box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: TaskSpaceBounds,
    pub widths: CellWidths,
    pub counts: [usize; 4],
}

/// Integer 4-tuple uniquely indexing one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
    pub ipsi: usize,
}

impl CellIndex {
    pub fn new(ix: usize, iy: usize, iz: usize, ipsi: usize) -> Self {
        Self { ix, iy, iz, ipsi }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.ix, self.iy, self.iz, self.ipsi]
    }
}

fn axis_count(extent: f64, width: f64) -> usize {
    if extent <= 0.0 {
        1
    } else {
        (extent / width).ceil() as usize
    }
}

impl GridSpec {
    pub fn new(bounds: TaskSpaceBounds, tsr: &TsrSpec) -> Result<Self> {
        bounds.validate()?;
        let widths = inner_box(tsr)?;
        let counts = [
            axis_count(bounds.x[1] - bounds.x[0], widths.dx),
            axis_count(bounds.y[1] - bounds.y[0], widths.dy),
            axis_count(bounds.z[1] - bounds.z[0], widths.dz),
            axis_count(TWO_PI, widths.dpsi),
        ];
        Ok(Self {
            bounds,
            widths,
            counts,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn contains(&self, pose: &Pose4) -> bool {
        let b = &self.bounds;
        pose.x >= b.x[0]
            && pose.x <= b.x[1]
            && pose.y >= b.y[0]
            && pose.y <= b.y[1]
            && pose.z >= b.z[0]
            && pose.z <= b.z[1]
    }

    pub fn valid_index(&self, index: &CellIndex) -> bool {
        index.ix < self.counts[0]
            && index.iy < self.counts[1]
            && index.iz < self.counts[2]
            && index.ipsi < self.counts[3]
    }

    /// Iterate every cell in lexicographic (ix, iy, iz, ipsi) order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let [nx, ny, nz, np] = self.counts;
        (0..nx).flat_map(move |ix| {
            (0..ny).flat_map(move |iy| {
                (0..nz).flat_map(move |iz| (0..np).map(move |ipsi| CellIndex::new(ix, iy, iz, ipsi)))
            })
        })
    }

    /// Half-open extent [lo, hi) of one cell along a spatial dimension; the
    /// last cell of each dimension is clipped to the task-space bound and is
    /// treated as closed at the top.
    fn axis_cell_range(&self, dim: usize, i: usize) -> (f64, f64) {
        let (lower, upper, width) = match dim {
            0 => (self.bounds.x[0], self.bounds.x[1], self.widths.dx),
            1 => (self.bounds.y[0], self.bounds.y[1], self.widths.dy),
            2 => (self.bounds.z[0], self.bounds.z[1], self.widths.dz),
            _ => (0.0, TWO_PI, self.widths.dpsi),
        };
        let lo = lower + i as f64 * width;
        let hi = (lo + width).min(upper);
        (lo, hi)
    }

    /// Full (unclipped-lo, clipped-hi) range of cell `index`, per dimension.
    pub fn cell_ranges(&self, index: &CellIndex) -> Result<[(f64, f64); 4]> {
        if !self.valid_index(index) {
            return Err(Error::InvalidCellIndex(
                index.ix, index.iy, index.iz, index.ipsi,
            ));
        }
        Ok([
            self.axis_cell_range(0, index.ix),
            self.axis_cell_range(1, index.iy),
            self.axis_cell_range(2, index.iz),
            self.axis_cell_range(3, index.ipsi),
        ])
    }
}

fn axis_index(value: f64, lower: f64, upper: f64, width: f64, count: usize) -> Option<usize> {
    if value < lower || value > upper {
        return None;
    }
    let raw = ((value - lower) / width).floor();
    let i = if raw < 0.0 { 0 } else { raw as usize };
    // Poses exactly on (or within rounding of) the upper bound clamp into the
    // last cell so indexing stays total over the closed task space.
    Some(i.min(count - 1))
}

/// Floor indexing of a pose into its cell. Cells are half-open [lo, lo + d)
/// with the upper task-space boundary clamped into the last cell.
pub fn cell_index(pose: &Pose4, grid: &GridSpec) -> Result<CellIndex> {
    let oob = || Error::OutOfTaskSpace {
        x: pose.x,
        y: pose.y,
        z: pose.z,
        psi: pose.psi,
    };
    let b = &grid.bounds;
    let ix = axis_index(pose.x, b.x[0], b.x[1], grid.widths.dx, grid.counts[0]).ok_or_else(oob)?;
    let iy = axis_index(pose.y, b.y[0], b.y[1], grid.widths.dy, grid.counts[1]).ok_or_else(oob)?;
    let iz = axis_index(pose.z, b.z[0], b.z[1], grid.widths.dz, grid.counts[2]).ok_or_else(oob)?;
    // psi is wrapped into (0, 2*pi] on construction, so it is always in range.
    let ipsi = axis_index(pose.psi, 0.0, TWO_PI, grid.widths.dpsi, grid.counts[3]).ok_or_else(oob)?;
    Ok(CellIndex::new(ix, iy, iz, ipsi))
}

/// Representative object pose of a cell: the center of the cell clipped to
/// the task-space bounds (edge cells may be partial). A degenerate dimension
/// collapses to its lower bound.
pub fn cell_nominal(index: &CellIndex, grid: &GridSpec) -> Result<Pose4> {
    let ranges = grid.cell_ranges(index)?;
    let mid = |r: (f64, f64)| 0.5 * (r.0 + r.1);
    Ok(Pose4::new(
        mid(ranges[0]),
        mid(ranges[1]),
        mid(ranges[2]),
        mid(ranges[3]),
    ))
}

/// End-effector pose that solves the cell's nominal object pose with zero
/// displacement: T_e = T_o * T_s. This is the goal whose coverage region the
/// inner-box construction certifies for the whole cell.
pub fn cell_nominal_goal(index: &CellIndex, grid: &GridSpec, tsr: &TsrSpec) -> Result<Transform> {
    let nominal = cell_nominal(index, grid)?;
    Ok(nominal.to_transform().compose(&tsr.grasp_offset))
}
