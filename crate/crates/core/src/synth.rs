//! Synthetic scene generator with exact ground truth: boxes, vertical
//! cylinders and a ground plane, ray-cast into a LiDAR cloud and a camera
//! image under a known extrinsic transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::geometry::{mat_mul_vec, CameraIntrinsics, ExtrinsicParams, Mat3, Point3, Vec3};
use crate::image::GrayImage;

/// Fixed axis permutation from LiDAR axes (x forward, y left, z up) to
/// camera axes (x right, y down, z forward). It is folded into the
/// projection matrix so the calibration parameters stay small angles.
pub const LIDAR_TO_CAMERA_AXES: Mat3 = [
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
];

/// Axis-aligned box with per-face grayscale albedo and reflectivity.
/// Face index = 2*axis + (0 for the min side, 1 for the max side).
#[derive(Debug, Clone)]
pub struct Box3 {
    pub min: Vec3,
    pub max: Vec3,
    pub albedo: [f64; 6],
    pub reflectivity: [f64; 6],
}

/// Vertical cylinder segment (a pole).
#[derive(Debug, Clone)]
pub struct Cylinder {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub z0: f64,
    pub z1: f64,
    pub albedo: f64,
    pub reflectivity: f64,
}

#[derive(Debug, Clone)]
pub struct LidarModel {
    pub ring_elevations: Vec<f64>,
    pub azimuth_start: f64,
    pub azimuth_end: f64,
    pub azimuth_step: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
}

impl LidarModel {
    /// `rings` elevations evenly spaced over [-25 deg, +3 deg].
    pub fn spinning(rings: usize) -> Self {
        let lo = (-25.0_f64).to_radians();
        let hi = 3.0_f64.to_radians();
        let ring_elevations = (0..rings)
            .map(|i| lo + (hi - lo) * i as f64 / (rings - 1).max(1) as f64)
            .collect();
        LidarModel {
            ring_elevations,
            azimuth_start: (-80.0_f64).to_radians(),
            azimuth_end: 80.0_f64.to_radians(),
            azimuth_step: 0.2_f64.to_radians(),
            max_range: 60.0,
            range_noise_sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Ground + objects + sensor models + the true extrinsics.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub ground_z: f64,
    pub ground_albedo: f64,
    pub ground_reflectivity: f64,
    pub sky_albedo: f64,
    pub boxes: Vec<Box3>,
    pub cylinders: Vec<Cylinder>,
    /// Darkened ground stripes (x_min, x_max, brightness factor), camera
    /// image only — photometric shadows leave LiDAR reflectivity alone.
    pub shadow_bands: Vec<(f64, f64, f64)>,
    pub lidar: LidarModel,
    pub camera: CameraModel,
    pub theta_true: ExtrinsicParams,
    pub seed: u64,
}

const DEFAULT_THETA: ExtrinsicParams =
    ExtrinsicParams { rx: 0.02, ry: -0.03, rz: 0.05, tx: 0.10, ty: -0.05, tz: 0.08 };

fn jittered_box(
    rng: &mut ChaCha8Rng,
    x: f64,
    y: f64,
    w: f64,
    d: f64,
    h: f64,
    ground_z: f64,
) -> Box3 {
    let x = x + rng.gen_range(-0.3..0.3);
    let y = y + rng.gen_range(-0.3..0.3);
    let noise = Normal::new(0.0, 0.08).unwrap();
    let albedo: [f64; 6] = std::array::from_fn(|_| rng.gen_range(0.15..0.9));
    // Reflectivity tracks albedo so LiDAR and camera see the same edges.
    let reflectivity: [f64; 6] =
        std::array::from_fn(|i| (albedo[i] + noise.sample(rng)).clamp(0.02, 1.0));
    Box3 {
        min: [x - d / 2.0, y - w / 2.0, ground_z],
        max: [x + d / 2.0, y + w / 2.0, ground_z + h],
        albedo,
        reflectivity,
    }
}

fn pole(rng: &mut ChaCha8Rng, x: f64, y: f64, ground_z: f64, height: f64) -> Cylinder {
    let albedo = rng.gen_range(0.2..0.85);
    let noise = Normal::new(0.0, 0.08).unwrap();
    Cylinder {
        cx: x,
        cy: y,
        radius: 0.15,
        z0: ground_z,
        z1: ground_z + height,
        albedo,
        reflectivity: (albedo + noise.sample(rng)).clamp(0.05, 1.0),
    }
}

/// Far backdrop so the skyline edge has LiDAR-visible structure behind it.
fn backdrop(ground_z: f64) -> Box3 {
    Box3 {
        min: [25.0, -40.0, ground_z],
        max: [27.0, 40.0, ground_z + 14.0],
        albedo: [0.6; 6],
        reflectivity: [0.5; 6],
    }
}

impl SceneSpec {
    fn base(seed: u64) -> (Self, ChaCha8Rng) {
        let rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = SceneSpec {
            ground_z: -1.6,
            ground_albedo: 0.35,
            ground_reflectivity: 0.08,
            sky_albedo: 0.9,
            boxes: Vec::new(),
            cylinders: Vec::new(),
            shadow_bands: Vec::new(),
            lidar: LidarModel::spinning(64),
            camera: CameraModel { fx: 400.0, fy: 400.0, cx: 256.0, cy: 192.0, width: 512, height: 384 },
            theta_true: DEFAULT_THETA,
            seed,
        };
        (spec, rng)
    }

    /// Moderate clutter at a spread of depths, plus poles and a backdrop.
    pub fn urban(seed: u64) -> Self {
        let (mut spec, mut rng) = SceneSpec::base(seed);
        let layout = [
            (2.2, -0.6, 0.6, 0.6, 0.8),
            (2.6, 0.9, 0.7, 0.7, 1.0),
            (3.5, -1.8, 0.8, 0.8, 1.2),
            (4.0, 2.0, 1.0, 1.0, 1.4),
            (5.0, -2.5, 1.2, 1.5, 1.8),
            (8.0, 2.0, 1.8, 2.2, 2.5),
            (12.0, -3.0, 2.5, 1.5, 3.0),
            (15.0, 3.5, 3.0, 4.0, 4.0),
            (10.0, 0.2, 1.0, 1.0, 1.2),
            (13.0, 6.0, 2.0, 2.0, 2.8),
            (7.0, -4.5, 1.0, 1.0, 1.5),
        ];
        for (x, y, w, d, h) in layout {
            spec.boxes.push(jittered_box(&mut rng, x, y, w, d, h, spec.ground_z));
        }
        for _ in 0..4 {
            let x = rng.gen_range(5.0..16.0);
            let y = rng.gen_range(-5.0..5.0);
            spec.cylinders.push(pole(&mut rng, x, y, spec.ground_z, 5.0));
        }
        spec.boxes.push(backdrop(spec.ground_z));
        spec
    }

    /// Dense near-field objects.
    pub fn cluttered(seed: u64) -> Self {
        let (mut spec, mut rng) = SceneSpec::base(seed);
        let layout = [
            (1.8, -0.9, 0.5, 0.5, 0.7),
            (2.0, 0.5, 0.6, 0.6, 0.9),
            (2.8, 1.6, 0.7, 0.7, 1.1),
            (3.0, -1.5, 0.8, 0.6, 1.0),
            (3.6, 0.1, 0.6, 0.8, 1.3),
            (4.4, -2.4, 0.9, 0.9, 1.5),
            (4.8, 1.2, 1.0, 0.8, 1.2),
            (5.5, -0.5, 1.1, 1.0, 1.6),
            (6.5, 2.6, 1.2, 1.2, 1.8),
            (7.5, -3.0, 1.4, 1.2, 2.0),
        ];
        for (x, y, w, d, h) in layout {
            spec.boxes.push(jittered_box(&mut rng, x, y, w, d, h, spec.ground_z));
        }
        for _ in 0..3 {
            let x = rng.gen_range(3.0..9.0);
            let y = rng.gen_range(-3.5..3.5);
            spec.cylinders.push(pole(&mut rng, x, y, spec.ground_z, 4.0));
        }
        spec.boxes.push(backdrop(spec.ground_z));
        spec
    }

    /// Few, mostly distant objects plus photometric shadow bands on the
    /// ground — the hard case for intensity edges.
    pub fn sparse_shadow(seed: u64) -> Self {
        let (mut spec, mut rng) = SceneSpec::base(seed);
        let layout = [
            (3.0, -1.0, 0.8, 0.8, 1.2),
            (6.0, 1.8, 1.4, 1.4, 2.0),
            (11.0, -2.5, 2.0, 1.5, 2.6),
            (16.0, 2.0, 2.5, 3.0, 3.5),
        ];
        for (x, y, w, d, h) in layout {
            spec.boxes.push(jittered_box(&mut rng, x, y, w, d, h, spec.ground_z));
        }
        for _ in 0..2 {
            let x = rng.gen_range(4.0..14.0);
            let y = rng.gen_range(-4.0..4.0);
            spec.cylinders.push(pole(&mut rng, x, y, spec.ground_z, 5.0));
        }
        spec.boxes.push(backdrop(spec.ground_z));
        spec.shadow_bands = vec![(4.5, 7.0, 0.45), (10.0, 13.0, 0.6)];
        spec
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "urban" => Ok(SceneSpec::urban(seed)),
            "cluttered" => Ok(SceneSpec::cluttered(seed)),
            "sparse_shadow" => Ok(SceneSpec::sparse_shadow(seed)),
            _ => Err(crate::error::Error::invalid(format!(
                "unknown scene preset `{name}` (want urban, cluttered, or sparse_shadow)"
            ))),
        }
    }

    /// Projection matrix with the LiDAR-to-camera axis permutation folded in:
    /// P = K * [A | 0].
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let a = &LIDAR_TO_CAMERA_AXES;
        let c = &self.camera;
        let mut p = [[0.0; 4]; 3];
        for col in 0..3 {
            p[0][col] = c.fx * a[0][col] + c.cx * a[2][col];
            p[1][col] = c.fy * a[1][col] + c.cy * a[2][col];
            p[2][col] = a[2][col];
        }
        CameraIntrinsics::new(p, c.width, c.height)
    }
}

struct Hit {
    t: f64,
    albedo: f64,
    reflectivity: f64,
    shadowed: bool,
}

/// Nearest intersection of the ray `o + t*d` (`d` unit-norm) with the scene.
fn ray_hit(spec: &SceneSpec, o: &Vec3, d: &Vec3) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut consider = |h: Hit| {
        if h.t < best.as_ref().map_or(f64::INFINITY, |b| b.t) {
            best = Some(h);
        }
    };
    // Ground plane, hit only from above.
    if d[2] < -1e-12 {
        let t = (spec.ground_z - o[2]) / d[2];
        if t > 1e-6 {
            let x = o[0] + t * d[0];
            let shadowed = spec
                .shadow_bands
                .iter()
                .any(|&(x0, x1, _)| x >= x0 && x <= x1);
            consider(Hit {
                t,
                albedo: spec.ground_albedo,
                reflectivity: spec.ground_reflectivity,
                shadowed,
            });
        }
    }
    for b in &spec.boxes {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        let mut entry_face = 0usize;
        let mut miss = false;
        for axis in 0..3 {
            if d[axis].abs() < 1e-15 {
                if o[axis] < b.min[axis] || o[axis] > b.max[axis] {
                    miss = true;
                    break;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let (mut t1, mut t2) = ((b.min[axis] - o[axis]) * inv, (b.max[axis] - o[axis]) * inv);
            let mut side = if d[axis] > 0.0 { 0 } else { 1 }; // face entered
            if t1 > t2 {
                std::mem::swap(&mut t1, &mut t2);
                side = 1 - side; // unreachable for finite boxes, kept for clarity
            }
            if t1 > t_near {
                t_near = t1;
                entry_face = 2 * axis + side;
            }
            t_far = t_far.min(t2);
        }
        if !miss && t_near <= t_far && t_near > 1e-6 {
            consider(Hit {
                t: t_near,
                albedo: b.albedo[entry_face],
                reflectivity: b.reflectivity[entry_face],
                shadowed: false,
            });
        }
    }
    for c in &spec.cylinders {
        let (ox, oy) = (o[0] - c.cx, o[1] - c.cy);
        let a = d[0] * d[0] + d[1] * d[1];
        if a < 1e-15 {
            continue;
        }
        let b2 = 2.0 * (ox * d[0] + oy * d[1]);
        let cc = ox * ox + oy * oy - c.radius * c.radius;
        let disc = b2 * b2 - 4.0 * a * cc;
        if disc <= 0.0 {
            continue;
        }
        let t = (-b2 - disc.sqrt()) / (2.0 * a);
        if t > 1e-6 {
            let z = o[2] + t * d[2];
            if z >= c.z0 && z <= c.z1 {
                consider(Hit { t, albedo: c.albedo, reflectivity: c.reflectivity, shadowed: false });
            }
        }
    }
    best
}

/// Ray-casts the LiDAR: one ray per (ring, azimuth), nearest hit within max
/// range becomes a point carrying the surface reflectivity, with seeded
/// Gaussian range noise. Misses produce no point.
pub fn render_lidar(spec: &SceneSpec, noise_seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, spec.lidar.range_noise_sigma).unwrap();
    let mut cloud = Vec::new();
    let steps =
        ((spec.lidar.azimuth_end - spec.lidar.azimuth_start) / spec.lidar.azimuth_step) as usize;
    for &elev in &spec.lidar.ring_elevations {
        let (se, ce) = elev.sin_cos();
        for k in 0..steps {
            let az = spec.lidar.azimuth_start + k as f64 * spec.lidar.azimuth_step;
            let (sa, ca) = az.sin_cos();
            let d = [ce * ca, ce * sa, se];
            let Some(hit) = ray_hit(spec, &[0.0, 0.0, 0.0], &d) else {
                continue;
            };
            if hit.t >= spec.lidar.max_range {
                continue;
            }
            let t = if spec.lidar.range_noise_sigma > 0.0 {
                hit.t + noise.sample(&mut rng)
            } else {
                hit.t
            };
            cloud.push(Point3::new(d[0] * t, d[1] * t, d[2] * t, hit.reflectivity));
        }
    }
    cloud
}

fn transpose(m: &Mat3) -> Mat3 {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

/// Rasterizes the scene from the camera defined by the true extrinsics:
/// per-pixel ray casting, flat shading by surface albedo, sky where nothing
/// is hit within max range. Shadow bands darken ground pixels.
pub fn render_camera(spec: &SceneSpec) -> Result<GrayImage> {
    let r = spec.theta_true.rotation()?;
    let rt = transpose(&r);
    let at = transpose(&LIDAR_TO_CAMERA_AXES);
    let tv = spec.theta_true.translation();
    // Camera center in the LiDAR frame: R c + t = 0.
    let center = mat_mul_vec(&rt, &[-tv[0], -tv[1], -tv[2]]);
    let c = &spec.camera;
    let mut data = Vec::with_capacity(c.width * c.height);
    for row in 0..c.height {
        for col in 0..c.width {
            let dcam = [
                (col as f64 - c.cx) / c.fx,
                (row as f64 - c.cy) / c.fy,
                1.0,
            ];
            let dl = mat_mul_vec(&rt, &mat_mul_vec(&at, &dcam));
            let n = (dl[0] * dl[0] + dl[1] * dl[1] + dl[2] * dl[2]).sqrt();
            let dl = [dl[0] / n, dl[1] / n, dl[2] / n];
            let v = match ray_hit(spec, &center, &dl) {
                Some(h) if h.t < spec.lidar.max_range => {
                    if h.shadowed {
                        let factor = spec
                            .shadow_bands
                            .iter()
                            .find(|&&(x0, x1, _)| {
                                let x = center[0] + h.t * dl[0];
                                x >= x0 && x <= x1
                            })
                            .map_or(1.0, |&(_, _, f)| f);
                        h.albedo * factor
                    } else {
                        h.albedo
                    }
                }
                _ => spec.sky_albedo,
            };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(c.height, c.width, data)
}

/// Adds seeded uniform noise in [-magnitude, +magnitude] per component.
pub fn perturb(theta: &ExtrinsicParams, magnitudes: &[f64; 6], seed: u64) -> ExtrinsicParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = theta.to_array();
    for (v, &m) in out.iter_mut().zip(magnitudes) {
        if m > 0.0 {
            *v += rng.gen_range(-m..=m);
        }
    }
    ExtrinsicParams::from_array(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_to_image, transform_point, Projection};

    fn ground_only(seed: u64) -> SceneSpec {
        let mut spec = SceneSpec::urban(seed);
        spec.boxes.clear();
        spec.cylinders.clear();
        spec.shadow_bands.clear();
        spec
    }

    #[test]
    fn lidar_single_ring_on_ground_circle() {
        let mut spec = ground_only(0);
        spec.lidar.ring_elevations = vec![(-10.0_f64).to_radians()];
        spec.lidar.range_noise_sigma = 0.0;
        let cloud = render_lidar(&spec, 0);
        assert!(!cloud.is_empty());
        let expect = 1.6 / 10.0_f64.to_radians().sin();
        for p in &cloud {
            assert!((p.range() - expect).abs() < 1e-9, "range {}", p.range());
            assert!((p.z - spec.ground_z).abs() < 1e-9);
        }
    }

    #[test]
    fn box_occludes_backdrop() {
        let mut spec = ground_only(0);
        spec.lidar.range_noise_sigma = 0.0;
        spec.lidar.ring_elevations = vec![0.0];
        // Wall at x = 20, box in front of it around azimuth 0.
        spec.boxes.push(Box3 {
            min: [20.0, -30.0, -2.0],
            max: [21.0, 30.0, 5.0],
            albedo: [0.5; 6],
            reflectivity: [0.5; 6],
        });
        spec.boxes.push(Box3 {
            min: [5.0, -1.0, -2.0],
            max: [6.0, 1.0, 5.0],
            albedo: [0.8; 6],
            reflectivity: [0.8; 6],
        });
        let cloud = render_lidar(&spec, 0);
        for p in &cloud {
            let az = p.y.atan2(p.x);
            let blocked = az.abs() < (1.0_f64 / 6.0).atan() * 0.95;
            if blocked {
                assert!(p.range() < 10.0, "wall visible through the box at az {az}");
            }
        }
        assert!(cloud.iter().any(|p| p.range() > 15.0), "wall never seen");
    }

    #[test]
    fn renders_are_deterministic() {
        let spec = SceneSpec::urban(3);
        let a = render_lidar(&spec, 11);
        let b = render_lidar(&spec, 11);
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(p, q)| p == q));
        let ia = render_camera(&spec).unwrap();
        let ib = render_camera(&spec).unwrap();
        assert_eq!(ia, ib);
    }

    #[test]
    fn empty_scene_is_sky_above_horizon() {
        let spec = ground_only(0);
        let img = render_camera(&spec).unwrap();
        // Top rows look above the horizon: pure sky.
        for col in 0..spec.camera.width {
            assert_eq!(img.at(0, col), spec.sky_albedo);
        }
    }

    #[test]
    fn lidar_points_lie_on_surfaces() {
        let mut spec = SceneSpec::urban(1);
        spec.lidar.range_noise_sigma = 0.0;
        let noiseless = render_lidar(&spec, 5);
        spec.lidar.range_noise_sigma = 0.01;
        let noisy = render_lidar(&spec, 5);
        assert_eq!(noiseless.len(), noisy.len());
        for (p, q) in noiseless.iter().zip(&noisy) {
            assert!((p.range() - q.range()).abs() <= 0.04, "noise beyond 4 sigma");
        }
    }

    #[test]
    fn shadow_band_darkens_ground() {
        let mut spec = ground_only(0);
        let plain = render_camera(&spec).unwrap();
        spec.shadow_bands = vec![(4.5, 7.0, 0.45)];
        let shadowed = render_camera(&spec).unwrap();
        let mut darker = 0usize;
        for (a, b) in plain.data.iter().zip(&shadowed.data) {
            if (b - a * 0.45).abs() < 1e-12 && *a == spec.ground_albedo {
                darker += 1;
            }
        }
        assert!(darker > 100, "only {darker} shadowed pixels");
    }

    #[test]
    fn box_silhouette_matches_projected_vertices() {
        let mut spec = ground_only(0);
        spec.boxes.push(Box3 {
            min: [6.0, -1.0, -1.0],
            max: [7.0, 1.0, 1.0],
            albedo: [0.2; 6],
            reflectivity: [0.2; 6],
        });
        let img = render_camera(&spec).unwrap();
        let k = spec.intrinsics().unwrap();
        // Project the front-face corners through the true transform.
        let mut us = Vec::new();
        let mut vs = Vec::new();
        for &y in &[-1.0, 1.0] {
            for &z in &[-1.0, 1.0] {
                let p = Point3::new(6.0, y, z, 0.0);
                let cam = transform_point(&spec.theta_true, &p).unwrap();
                let Projection::InImage { u, v, .. } = project_to_image(&k, &cam) else {
                    panic!("corner projects outside the image");
                };
                us.push(u);
                vs.push(v);
            }
        }
        let (umin, umax) = (us.iter().cloned().fold(f64::MAX, f64::min), us.iter().cloned().fold(f64::MIN, f64::max));
        let (vmin, vmax) = (vs.iter().cloned().fold(f64::MAX, f64::min), vs.iter().cloned().fold(f64::MIN, f64::max));
        // Rendered dark pixels of the box stay within the projected
        // silhouette bounds (1 px slack).
        for row in 0..img.height {
            for col in 0..img.width {
                if img.at(row, col) == 0.2 {
                    assert!(col as f64 >= umin - 1.0 && col as f64 <= umax + 1.0);
                    assert!(row as f64 >= vmin - 1.0 && row as f64 <= vmax + 1.0);
                }
            }
        }
        // And the silhouette is actually present.
        let dark = img.data.iter().filter(|&&v| v == 0.2).count();
        assert!(dark > 50, "box not visible ({dark} px)");
    }

    #[test]
    fn lidar_object_points_project_into_silhouette() {
        let spec = SceneSpec::urban(2);
        let mut noiseless = spec.clone();
        noiseless.lidar.range_noise_sigma = 0.0;
        let cloud = render_lidar(&noiseless, 0);
        let img = render_camera(&spec).unwrap();
        let k = spec.intrinsics().unwrap();
        // Non-ground, non-sky points must land on non-ground pixels (2 px
        // dilation tolerance).
        let mut checked = 0usize;
        let mut good = 0usize;
        for p in &cloud {
            if (p.z - spec.ground_z).abs() < 0.05 || p.range() > 24.0 {
                continue; // ground or backdrop
            }
            let cam = transform_point(&spec.theta_true, p).unwrap();
            let Projection::InImage { u, v, .. } = project_to_image(&k, &cam) else {
                continue;
            };
            checked += 1;
            let mut on_object = false;
            for dr in -2i64..=2 {
                for dc in -2i64..=2 {
                    let r = (v.round() as i64 + dr).clamp(0, img.height as i64 - 1) as usize;
                    let c = (u.round() as i64 + dc).clamp(0, img.width as i64 - 1) as usize;
                    let val = img.at(r, c);
                    if val != spec.ground_albedo && val != spec.sky_albedo {
                        on_object = true;
                    }
                }
            }
            good += on_object as usize;
        }
        assert!(checked > 1000, "too few object points ({checked})");
        assert!(good as f64 >= 0.99 * checked as f64, "{good}/{checked} inside silhouettes");
    }

    #[test]
    fn perturb_bounds_and_determinism() {
        let theta = DEFAULT_THETA;
        let zero = perturb(&theta, &[0.0; 6], 9);
        assert_eq!(zero, theta);
        let mags = [0.3, 0.3, 0.3, 0.1, 0.1, 0.1];
        let a = perturb(&theta, &mags, 9);
        let b = perturb(&theta, &mags, 9);
        assert_eq!(a, b);
        for i in 0..6 {
            assert!((a.to_array()[i] - theta.to_array()[i]).abs() <= mags[i]);
        }
        let c = perturb(&theta, &mags, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn preset_names() {
        assert!(SceneSpec::preset("urban", 0).is_ok());
        assert!(SceneSpec::preset("cluttered", 0).is_ok());
        assert!(SceneSpec::preset("sparse_shadow", 0).is_ok());
        assert!(SceneSpec::preset("mars", 0).is_err());
    }
}
