//! SE(3) parametrization, rigid transformation, pinhole projection and
//! cylindrical projection.
//!
//! Euler composition order is fixed as `R = Rz(rz) * Ry(ry) * Rx(rx)`.
//! Calibration results are only comparable under this convention.

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

/// The 6-vector of extrinsic parameters being estimated: rotation angles in
/// radians, translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicParams {
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl ExtrinsicParams {
    pub const ZERO: ExtrinsicParams =
        ExtrinsicParams { rx: 0.0, ry: 0.0, rz: 0.0, tx: 0.0, ty: 0.0, tz: 0.0 };

    pub fn new(rx: f64, ry: f64, rz: f64, tx: f64, ty: f64, tz: f64) -> Self {
        ExtrinsicParams { rx, ry, rz, tx, ty, tz }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        ExtrinsicParams::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.rx, self.ry, self.rz, self.tx, self.ty, self.tz]
    }

    pub fn rotation(&self) -> Result<Mat3> {
        rotation_from_angles(self.rx, self.ry, self.rz)
    }

    pub fn translation(&self) -> Vec3 {
        [self.tx, self.ty, self.tz]
    }
}

/// A 3D LiDAR return: position in meters plus reflectivity in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub reflectivity: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, reflectivity: f64) -> Self {
        Point3 { x, y, z, reflectivity }
    }

    pub fn coords(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    /// Euclidean range from the sensor origin.
    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Planar (x, y) range, as used for foreground classification.
    pub fn planar_range(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// Camera model: a 3x4 projection matrix plus the image extent in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    /// Row-major 3x4 projection matrix.
    pub p: [[f64; 4]; 3],
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Accepts any finite projection matrix whose depth row is non-zero; the
    /// matrix may fold a sensor-axis permutation into the intrinsics.
    pub fn new(p: [[f64; 4]; 3], width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid("image extent must be at least 2x2"));
        }
        if p.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection matrix entries must be finite"));
        }
        if p[2].iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("projection matrix depth row is zero"));
        }
        Ok(CameraIntrinsics { p, width, height })
    }

    /// Simple pinhole matrix [[fx,0,cx,0],[0,fy,cy,0],[0,0,1,0]].
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::invalid("principal point must lie inside the image"));
        }
        CameraIntrinsics::new(
            [[fx, 0.0, cx, 0.0], [0.0, fy, cy, 0.0], [0.0, 0.0, 1.0, 0.0]],
            width,
            height,
        )
    }
}

/// Outcome of projecting a camera-frame point onto the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Pixel coordinates and depth; the point lies inside the image bounds
    /// with positive depth.
    InImage { u: f64, v: f64, depth: f64 },
    /// Positive depth but outside [0,N)x[0,M).
    OutOfImage { u: f64, v: f64, depth: f64 },
    /// Non-positive depth; excluded from the cost, never an error.
    BehindCamera,
}

/// Cylindrical panorama grid: scaling `h`, angular resolutions and the
/// azimuth/elevation window covered by the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramaGeometry {
    pub h: f64,
    pub delta_h: f64,
    pub delta_v: f64,
    pub width: usize,
    pub height: usize,
    pub az_min: f64,
    pub az_max: f64,
    pub elev_min: f64,
    pub elev_max: f64,
}

impl PanoramaGeometry {
    /// Derives the grid extent from the angular window and resolutions.
    pub fn new(
        h: f64,
        delta_h: f64,
        delta_v: f64,
        az_min: f64,
        az_max: f64,
        elev_min: f64,
        elev_max: f64,
    ) -> Result<Self> {
        if !(delta_h > 0.0 && delta_v > 0.0 && h > 0.0) {
            return Err(Error::invalid("panorama resolutions and scaling must be positive"));
        }
        if !(az_max > az_min && elev_max > elev_min) {
            return Err(Error::invalid("empty panorama angular window"));
        }
        let width = ((az_max - az_min) * h / delta_h + 0.5).floor() as usize + 1;
        let height = ((elev_max - elev_min) * h / delta_v + 0.5).floor() as usize + 1;
        if width < 2 || height < 2 {
            return Err(Error::invalid("panorama grid must be at least 2x2"));
        }
        Ok(PanoramaGeometry { h, delta_h, delta_v, width, height, az_min, az_max, elev_min, elev_max })
    }

    fn az_center(&self) -> f64 {
        0.5 * (self.az_min + self.az_max)
    }

    fn elev_center(&self) -> f64 {
        0.5 * (self.elev_min + self.elev_max)
    }
}

/// Round to nearest with ties toward the larger index.
fn round_cell(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Builds `R = Rz(rz) * Ry(ry) * Rx(rx)`.
pub fn rotation_from_angles(rx: f64, ry: f64, rz: f64) -> Result<Mat3> {
    if !(rx.is_finite() && ry.is_finite() && rz.is_finite()) {
        return Err(Error::invalid("rotation angles must be finite"));
    }
    let (sx, cx) = rx.sin_cos();
    let (sy, cy) = ry.sin_cos();
    let (sz, cz) = rz.sin_cos();
    Ok([
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ])
}

/// Recovers (rx, ry, rz) from a rotation matrix under the Rz*Ry*Rx
/// convention. Near the gimbal singularity (|cos ry| ~ 0) rx is pinned to 0.
pub fn angles_from_rotation(r: &Mat3) -> (f64, f64, f64) {
    let sy = -r[2][0];
    let cy = (r[0][0] * r[0][0] + r[1][0] * r[1][0]).sqrt();
    let ry = sy.atan2(cy);
    if cy > 1e-9 {
        let rx = r[2][1].atan2(r[2][2]);
        let rz = r[1][0].atan2(r[0][0]);
        (rx, ry, rz)
    } else {
        (0.0, ry, (-r[0][1]).atan2(r[1][1]))
    }
}

pub fn mat_mul_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Applies the rigid transform: `R * p + t`.
pub fn transform_point(theta: &ExtrinsicParams, p: &Point3) -> Result<Vec3> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::invalid("point coordinates must be finite"));
    }
    let r = theta.rotation()?;
    let v = mat_mul_vec(&r, &p.coords());
    Ok([v[0] + theta.tx, v[1] + theta.ty, v[2] + theta.tz])
}

/// Homogeneous pinhole projection of a camera-frame point.
pub fn project_to_image(k: &CameraIntrinsics, p_cam: &Vec3) -> Projection {
    let hx = k.p[0][0] * p_cam[0] + k.p[0][1] * p_cam[1] + k.p[0][2] * p_cam[2] + k.p[0][3];
    let hy = k.p[1][0] * p_cam[0] + k.p[1][1] * p_cam[1] + k.p[1][2] * p_cam[2] + k.p[1][3];
    let hw = k.p[2][0] * p_cam[0] + k.p[2][1] * p_cam[1] + k.p[2][2] * p_cam[2] + k.p[2][3];
    if hw <= 0.0 {
        return Projection::BehindCamera;
    }
    let u = hx / hw;
    let v = hy / hw;
    if u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64 {
        Projection::InImage { u, v, depth: hw }
    } else {
        Projection::OutOfImage { u, v, depth: hw }
    }
}

/// Outcome of projecting a point onto the panorama grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanoramaCell {
    Cell { i: usize, j: usize },
    OutOfRange,
}

/// Maps a 3D point onto the cylindrical grid. Azimuth is `atan2(y, x)`,
/// elevation is `atan2(z, sqrt(x^2+y^2))`; both are offset from the window
/// center and rounded to the nearest cell.
pub fn cylindrical_project(p: &Point3, geom: &PanoramaGeometry) -> Result<PanoramaCell> {
    let planar = p.planar_range();
    if planar == 0.0 && p.z == 0.0 {
        return Err(Error::invalid("cannot project the origin onto the panorama"));
    }
    let az = p.y.atan2(p.x);
    let elev = p.z.atan2(planar);
    if az < geom.az_min || az > geom.az_max || elev < geom.elev_min || elev > geom.elev_max {
        return Ok(PanoramaCell::OutOfRange);
    }
    let i = round_cell((az - geom.az_center()) * geom.h / geom.delta_h
        + (geom.width as f64 - 1.0) / 2.0);
    // Rows grow downward so higher elevation maps to a smaller row index.
    let j = round_cell((geom.elev_center() - elev) * geom.h / geom.delta_v
        + (geom.height as f64 - 1.0) / 2.0);
    if i < 0 || i >= geom.width as i64 || j < 0 || j >= geom.height as i64 {
        return Ok(PanoramaCell::OutOfRange);
    }
    Ok(PanoramaCell::Cell { i: i as usize, j: j as usize })
}
