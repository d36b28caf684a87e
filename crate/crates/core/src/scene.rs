//! Tunnel, anchor, reflector and trajectory geometry.
//!
//! The global frame has x along the tunnel axis (`0..length`), y across it
//! (`0..width`, walls at `y = 0` and `y = width`) and z up (floor at 0,
//! ceiling at `height`). The cross-section is a box.
//!
//! # Orientation convention
//!
//! An [`Orientation`] `(azimuth, downtilt)` is applied as intrinsic rotations:
//! first `azimuth` about the global z axis, then about the rotated y axis so
//! that a *negative* downtilt points the boresight below the horizon. The
//! boresight of a body frame is therefore
//! `(cos t cos a, cos t sin a, sin t)` with `a` the azimuth and `t` the
//! downtilt. Worked example: `(0, -30)` deg gives boresight
//! `(0.866, 0, -0.5)`; `(90, 0)` deg maps body `(1, 0, 0)` to `(0, 1, 0)`.
//!
//! Array-local frames differ from body frames by a fixed axis permutation:
//! the array lies in its local xy-plane (`z_m = 0` for every element) and the
//! local +z axis is the boresight. Local x is body y (horizontal, left) and
//! local y is body z (up).

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSection {
    /// Vertical walls at `y = 0`, `y = width`, flat ceiling at `z = height`.
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_cross_section")]
    pub cross_section: CrossSection,
}

fn default_cross_section() -> CrossSection {
    CrossSection::Box
}

impl Default for TunnelSpec {
    fn default() -> Self {
        TunnelSpec { length: 100.0, width: 10.0, height: 5.0, cross_section: CrossSection::Box }
    }
}

impl TunnelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0 && self.height > 0.0) {
            return Err(Error::config(format!(
                "tunnel dimensions must be positive, got {} x {} x {}",
                self.length, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x > 0.0 && p.x < self.length && p.y > 0.0 && p.y < self.width && p.z > 0.0 && p.z < self.height
    }
}

/// `(azimuth, downtilt)` in degrees; see the module docs for the convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub azimuth_deg: f64,
    pub downtilt_deg: f64,
}

impl Orientation {
    pub fn new(azimuth_deg: f64, downtilt_deg: f64) -> Self {
        Orientation { azimuth_deg, downtilt_deg }
    }

    /// Body frame (x boresight, y left, z up) to global.
    pub fn body_rotation(&self) -> Rotation3<f64> {
        let yaw = Rotation3::from_axis_angle(&Vec3::z_axis(), self.azimuth_deg.to_radians());
        let pitch = Rotation3::from_axis_angle(&Vec3::y_axis(), -self.downtilt_deg.to_radians());
        yaw * pitch
    }

    /// Array-local frame (array in local xy-plane, boresight local +z) to global.
    pub fn array_rotation(&self) -> Rotation3<f64> {
        #[rustfmt::skip]
        let perm = Matrix3::new(
            0.0, 0.0, 1.0,
            1.0, 0.0, 0.0,
            0.0, 1.0, 0.0,
        );
        self.body_rotation() * Rotation3::from_matrix_unchecked(perm)
    }

    pub fn boresight(&self) -> Vec3 {
        self.body_rotation() * Vec3::x()
    }
}

/// A rigid placement: `global = position + rotation * local`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose { position: Vec3::zeros(), rotation: Rotation3::identity() }
    }

    pub fn body(position: Vec3, orientation: Orientation) -> Self {
        Pose { position, rotation: orientation.body_rotation() }
    }

    pub fn array(position: Vec3, orientation: Orientation) -> Self {
        Pose { position, rotation: orientation.array_rotation() }
    }

    pub fn local_to_global(&self, p: &Vec3) -> Vec3 {
        self.position + self.rotation * p
    }

    pub fn global_to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.position)
    }

    /// Rotates a direction (no translation) from local to global.
    pub fn dir_to_global(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    pub fn dir_to_local(&self, d: &Vec3) -> Vec3 {
        self.rotation.inverse() * d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    /// Reference element position, global frame.
    pub position: Vec3,
    /// One entry per physical array, all sharing the reference position.
    pub arrays: Vec<Orientation>,
    pub rows: usize,
    pub cols: usize,
    /// Inter-element spacing; half a wavelength at the carrier by default.
    pub spacing: f64,
}

impl AnchorSpec {
    pub fn num_antennas(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("anchor array needs at least one row and one column"));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::config("anchor element spacing must be positive"));
        }
        if self.arrays.is_empty() {
            return Err(Error::config("anchor needs at least one array orientation"));
        }
        Ok(())
    }

    pub fn array_pose(&self, index: usize) -> Pose {
        Pose::array(self.position, self.arrays[index])
    }

    /// Index of the array whose boresight points most directly at `target`.
    pub fn facing_array(&self, target: &Vec3) -> usize {
        let dir = target - self.position;
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, o) in self.arrays.iter().enumerate() {
            let d = o.boresight().dot(&dir);
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        best
    }
}

/// Half-wavelength spacing at `carrier_hz`.
pub fn half_wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz / 2.0
}

/// Element positions of a uniform rectangular array in its local frame.
///
/// Element `m = r * cols + c` sits at `(c * spacing, r * spacing, 0)`, so
/// element 0 is the reference at the local origin.
#[derive(Debug, Clone, PartialEq)]
pub struct UraLayout {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub positions: Vec<Vec3>,
}

impl UraLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Element positions in the global frame for a given array pose.
    pub fn to_global(&self, pose: &Pose) -> Vec<Vec3> {
        self.positions.iter().map(|p| pose.local_to_global(p)).collect()
    }
}

pub fn build_ura_layout(anchor: &AnchorSpec) -> UraLayout {
    ura(anchor.rows, anchor.cols, anchor.spacing)
}

pub fn ura(rows: usize, cols: usize, spacing: f64) -> UraLayout {
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push(Vec3::new(c as f64 * spacing, r as f64 * spacing, 0.0));
        }
    }
    UraLayout { rows, cols, spacing, positions }
}

/// Finite planar reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub id: u32,
    pub center: Vec3,
    pub unit_normal: Vec3,
    /// Half sizes along the two in-plane axes (see [`Panel::in_plane_axes`]).
    pub half_extents: (f64, f64),
    pub reflection_loss_db: f64,
    /// Radio-reflective road marking, as opposed to a tunnel wall.
    #[serde(default)]
    pub rrm: bool,
}

impl Panel {
    pub fn new(id: u32, center: Vec3, normal: Vec3, half_extents: (f64, f64), reflection_loss_db: f64) -> Self {
        Panel { id, center, unit_normal: normal.normalize(), half_extents, reflection_loss_db, rrm: false }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.unit_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("panel {} normal is not unit length", self.id)));
        }
        if !(self.half_extents.0 > 0.0 && self.half_extents.1 > 0.0) {
            return Err(Error::config(format!("panel {} half extents must be positive", self.id)));
        }
        Ok(())
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.unit_normal.dot(&(p - self.center))
    }

    /// In-plane axes `(u, v)`: `u` is the tunnel axis projected onto the
    /// plane (falling back to y for planes facing along x), `v = n x u`.
    pub fn in_plane_axes(&self) -> (Vec3, Vec3) {
        let n = self.unit_normal;
        let mut u = Vec3::x() - n * n.x;
        if u.norm() < 1e-6 {
            u = Vec3::y() - n * n.y;
        }
        let u = u.normalize();
        (u, n.cross(&u))
    }

    /// Whether an in-plane point lies inside the finite panel.
    pub fn contains(&self, p: &Vec3) -> bool {
        let (u, v) = self.in_plane_axes();
        let d = p - self.center;
        d.dot(&u).abs() <= self.half_extents.0 && d.dot(&v).abs() <= self.half_extents.1
    }

    /// Infinite vertical wall `y = y0` facing `+y` (`facing_positive`) or `-y`.
    pub fn wall(id: u32, y0: f64, facing_positive: bool, tunnel: &TunnelSpec, loss_db: f64) -> Self {
        let n = if facing_positive { Vec3::y() } else { -Vec3::y() };
        let mut p = Panel::new(
            id,
            Vec3::new(tunnel.length / 2.0, y0, tunnel.height / 2.0),
            n,
            (tunnel.length / 2.0, tunnel.height / 2.0),
            loss_db,
        );
        p.unit_normal = n;
        p
    }
}

/// Complete static geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tunnel: TunnelSpec,
    pub anchor: AnchorSpec,
    pub panels: Vec<Panel>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.tunnel.validate()?;
        self.anchor.validate()?;
        for p in &self.panels {
            p.validate()?;
        }
        Ok(())
    }

    /// Copy without the radio-reflective road markings.
    pub fn without_rrms(&self) -> Scene {
        Scene { panels: self.panels.iter().filter(|p| !p.rrm).cloned().collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Straight,
    Slalom,
}

/// Parametric trajectory generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Longitudinal start coordinate.
    pub start_x: f64,
    /// Lane centre line (transverse coordinate).
    pub lane_y: f64,
    /// Vehicle antenna height, constant.
    pub height: f64,
    pub speed: f64,
    /// Epoch period T.
    pub epoch: f64,
    pub samples: usize,
    /// +1 drives towards increasing x, -1 towards decreasing x.
    #[serde(default = "default_direction")]
    pub direction: f64,
    #[serde(default = "default_slalom_amplitude")]
    pub slalom_amplitude: f64,
    #[serde(default = "default_slalom_period")]
    pub slalom_period: f64,
}

fn default_direction() -> f64 {
    1.0
}
fn default_slalom_amplitude() -> f64 {
    1.5
}
fn default_slalom_period() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Vec3,
    pub speed: f64,
    /// Heading in the horizontal plane, radians from +x.
    pub heading: f64,
}

impl TrajectorySample {
    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.speed * self.heading.cos(), self.speed * self.heading.sin(), 0.0)
    }
}

impl TrajectorySpec {
    /// Lateral coordinate as a function of the longitudinal one.
    pub fn lateral(&self, x: f64) -> f64 {
        match self.kind {
            TrajectoryKind::Straight => self.lane_y,
            TrajectoryKind::Slalom => {
                let phase = std::f64::consts::TAU * (x - self.start_x) / self.slalom_period;
                self.lane_y + self.slalom_amplitude * phase.sin()
            }
        }
    }

    fn lateral_slope(&self, x: f64) -> f64 {
        match self.kind {
            TrajectoryKind::Straight => 0.0,
            TrajectoryKind::Slalom => {
                let k = std::f64::consts::TAU / self.slalom_period;
                self.slalom_amplitude * k * (k * (x - self.start_x)).cos()
            }
        }
    }
}

/// Samples a trajectory at the epoch period.
///
/// Consecutive samples are exactly `speed * epoch` apart (chord length); for
/// the slalom the next longitudinal coordinate is found by bisection.
pub fn gen_trajectory(spec: &TrajectorySpec, tunnel: &TunnelSpec) -> Result<Vec<TrajectorySample>> {
    if !(spec.speed > 0.0) || !(spec.epoch > 0.0) {
        return Err(Error::config("trajectory speed and epoch must be positive"));
    }
    if spec.direction.abs() != 1.0 {
        return Err(Error::config("trajectory direction must be +1 or -1"));
    }
    if spec.kind == TrajectoryKind::Slalom && !(spec.slalom_period > 0.0 && spec.slalom_amplitude >= 0.0) {
        return Err(Error::config("slalom period must be positive and amplitude non-negative"));
    }
    let step = spec.speed * spec.epoch;
    let point = |x: f64| Vec3::new(x, spec.lateral(x), spec.height);

    let mut out = Vec::with_capacity(spec.samples);
    let mut x = spec.start_x;
    for k in 0..spec.samples {
        if k > 0 {
            let prev = point(x);
            // chord(x + s) >= s and chord(x) = 0, so the root is bracketed.
            let (mut lo, mut hi) = (0.0_f64, step);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (point(x + spec.direction * mid) - prev).norm() < step {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            x += spec.direction * 0.5 * (lo + hi);
        }
        let position = point(x);
        if !tunnel.contains(&position) {
            return Err(Error::config(format!(
                "trajectory leaves the tunnel at sample {k}: ({:.3}, {:.3}, {:.3})",
                position.x, position.y, position.z
            )));
        }
        let heading = (spec.direction * spec.lateral_slope(x)).atan2(spec.direction);
        out.push(TrajectorySample { time: k as f64 * spec.epoch, position, speed: spec.speed, heading });
    }
    Ok(out)
}

/// Rotation that maps `from` onto `to` (both non-zero).
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(from, to).unwrap_or_else(|| {
        // Anti-parallel: rotate pi about any perpendicular axis.
        let axis = if from.x.abs() < 0.9 { from.cross(&Vec3::x()) } else { from.cross(&Vec3::y()) };
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI)
    })
}
