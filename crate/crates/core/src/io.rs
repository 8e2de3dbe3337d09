//! File formats: point-cloud binaries (x, y, z, reflectance as little-endian
//! f32 quadruples), portable gray/pixmaps, calibration text files, flat
//! key-value configs, and result serialization.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::densify::DensePanorama;
use crate::error::{Error, Result};
use crate::geometry::{
    angles_from_rotation, CameraIntrinsics, ExtrinsicParams, Mat3, PanoramaGeometry, Point3,
};
use crate::image::GrayImage;
use crate::objective::CalibrationResult;

/// One calibration input: a point cloud and the matching camera image.
#[derive(Debug, Clone)]
pub struct FramePair {
    pub cloud: Vec<Point3>,
    pub image: GrayImage,
    pub frame_id: String,
    pub ground_truth: Option<ExtrinsicParams>,
}

impl FramePair {
    pub fn new(
        cloud: Vec<Point3>,
        image: GrayImage,
        intrinsics: &CameraIntrinsics,
        frame_id: String,
        ground_truth: Option<ExtrinsicParams>,
    ) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::invalid("frame has an empty point cloud"));
        }
        if image.width != intrinsics.width || image.height != intrinsics.height {
            return Err(Error::invalid("image dimensions do not match the intrinsics record"));
        }
        Ok(FramePair { cloud, image, frame_id, ground_truth })
    }
}

/// Every pipeline tunable, loadable from a flat key-value text file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub ransac_gamma: f64,
    pub ransac_iterations: usize,
    pub dbscan_radius: f64,
    pub dbscan_min_pts: usize,
    pub foreground_delta: f64,
    pub occlusion_kernel_radius: usize,
    pub pano_h: f64,
    pub pano_delta_h: f64,
    pub pano_delta_v: f64,
    pub pano_az_min: f64,
    pub pano_az_max: f64,
    pub pano_elev_min: f64,
    pub pano_elev_max: f64,
    pub tv_lambda: f64,
    pub tv_max_iter: usize,
    pub tv_tol: f64,
    pub edge_sigma: f64,
    pub canny_sigma: f64,
    pub canny_depth_low: f64,
    pub canny_depth_high: f64,
    pub canny_refl_low: f64,
    pub canny_refl_high: f64,
    pub canny_object_low: f64,
    pub canny_object_high: f64,
    pub match_threshold: f64,
    pub bb_epsilon: f64,
    pub bb_max_iter: usize,
    pub bb_gamma0: f64,
    pub bb_step_cap: f64,
    pub bb_delta_h_rot: f64,
    pub bb_delta_h_trans: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            ransac_gamma: 0.2,
            ransac_iterations: 300,
            dbscan_radius: 0.25,
            dbscan_min_pts: 8,
            foreground_delta: 12.0,
            occlusion_kernel_radius: 2,
            pano_h: 1.0,
            pano_delta_h: 0.2_f64.to_radians(),
            pano_delta_v: (28.0 / 63.0_f64).to_radians(),
            pano_az_min: (-45.0_f64).to_radians(),
            pano_az_max: 45.0_f64.to_radians(),
            pano_elev_min: (-25.0_f64).to_radians(),
            pano_elev_max: 3.0_f64.to_radians(),
            tv_lambda: 0.05,
            tv_max_iter: 400,
            tv_tol: 1e-5,
            edge_sigma: 3.0,
            canny_sigma: 1.4,
            canny_depth_low: 0.08,
            canny_depth_high: 0.2,
            canny_refl_low: 0.15,
            canny_refl_high: 0.4,
            canny_object_low: 0.1,
            canny_object_high: 0.3,
            match_threshold: 0.2,
            bb_epsilon: 1e-5,
            bb_max_iter: 200,
            bb_gamma0: 1e-2,
            bb_step_cap: 0.02,
            bb_delta_h_rot: 1e-3,
            bb_delta_h_trans: 1e-3,
        }
    }
}

macro_rules! config_fields {
    ($macro:ident) => {
        $macro!(
            (seed, u64),
            (ransac_gamma, f64),
            (ransac_iterations, usize),
            (dbscan_radius, f64),
            (dbscan_min_pts, usize),
            (foreground_delta, f64),
            (occlusion_kernel_radius, usize),
            (pano_h, f64),
            (pano_delta_h, f64),
            (pano_delta_v, f64),
            (pano_az_min, f64),
            (pano_az_max, f64),
            (pano_elev_min, f64),
            (pano_elev_max, f64),
            (tv_lambda, f64),
            (tv_max_iter, usize),
            (tv_tol, f64),
            (edge_sigma, f64),
            (canny_sigma, f64),
            (canny_depth_low, f64),
            (canny_depth_high, f64),
            (canny_refl_low, f64),
            (canny_refl_high, f64),
            (canny_object_low, f64),
            (canny_object_high, f64),
            (match_threshold, f64),
            (bb_epsilon, f64),
            (bb_max_iter, usize),
            (bb_gamma0, f64),
            (bb_step_cap, f64),
            (bb_delta_h_rot, f64),
            (bb_delta_h_trans, f64)
        )
    };
}

macro_rules! key_names {
    ($(($field:ident, $ty:ty)),*) => {
        &[$(stringify!($field)),*]
    };
}

/// All recognized config keys, in file order.
pub const CONFIG_KEYS: &[&str] = config_fields!(key_names);

impl PipelineConfig {
    /// Defaults retuned for the built-in synthetic presets: a wider camera
    /// edge spread and a lower match threshold widen the objective's basin,
    /// the larger foreground split keeps the backdrop wall in the background
    /// class, and the extra optimizer iterations absorb the longer climbs
    /// that result.
    pub fn tuned_synthetic(seed: u64) -> Self {
        PipelineConfig {
            edge_sigma: 4.0,
            match_threshold: 0.1,
            foreground_delta: 25.0,
            bb_max_iter: 300,
            seed,
            ..PipelineConfig::default()
        }
    }

    /// Stable-ordered key-value view, used for config files and result
    /// snapshots. Float formatting is the shortest round-trip form.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        macro_rules! emit {
            ($(($field:ident, $ty:ty)),*) => {
                vec![$((stringify!($field).to_string(), self.$field.to_string())),*]
            };
        }
        config_fields!(emit)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        macro_rules! apply {
            ($(($field:ident, $ty:ty)),*) => {
                match key {
                    $(stringify!($field) => {
                        self.$field = value
                            .parse::<$ty>()
                            .map_err(|e| format!("bad value for {key}: {e}"))?;
                        Ok(())
                    })*
                    _ => Err(format!(
                        "unknown config key `{key}`; valid keys: {}",
                        CONFIG_KEYS.join(", ")
                    )),
                }
            };
        }
        config_fields!(apply)
    }

    /// Checks every field against its consumer's preconditions.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive")))
            }
        };
        pos(self.ransac_gamma, "ransac_gamma")?;
        if self.ransac_iterations == 0 {
            return Err(Error::invalid("ransac_iterations must be at least 1"));
        }
        pos(self.dbscan_radius, "dbscan_radius")?;
        if self.dbscan_min_pts == 0 {
            return Err(Error::invalid("dbscan_min_pts must be at least 1"));
        }
        pos(self.foreground_delta, "foreground_delta")?;
        self.panorama_geometry()?;
        pos(self.tv_lambda, "tv_lambda")?;
        if self.tv_max_iter == 0 {
            return Err(Error::invalid("tv_max_iter must be at least 1"));
        }
        pos(self.tv_tol, "tv_tol")?;
        pos(self.edge_sigma, "edge_sigma")?;
        pos(self.canny_sigma, "canny_sigma")?;
        for (low, high, name) in [
            (self.canny_depth_low, self.canny_depth_high, "canny depth"),
            (self.canny_refl_low, self.canny_refl_high, "canny reflectivity"),
            (self.canny_object_low, self.canny_object_high, "canny object"),
        ] {
            if !(0.0 <= low && low < high && high <= 1.0) {
                return Err(Error::invalid(format!("{name} thresholds must satisfy 0 <= low < high <= 1")));
            }
        }
        if !(self.match_threshold >= 0.0) {
            return Err(Error::invalid("match_threshold must be non-negative"));
        }
        pos(self.bb_epsilon, "bb_epsilon")?;
        if self.bb_max_iter == 0 {
            return Err(Error::invalid("bb_max_iter must be at least 1"));
        }
        pos(self.bb_gamma0, "bb_gamma0")?;
        pos(self.bb_step_cap, "bb_step_cap")?;
        pos(self.bb_delta_h_rot, "bb_delta_h_rot")?;
        pos(self.bb_delta_h_trans, "bb_delta_h_trans")?;
        Ok(())
    }

    pub fn panorama_geometry(&self) -> Result<PanoramaGeometry> {
        PanoramaGeometry::new(
            self.pano_h,
            self.pano_delta_h,
            self.pano_delta_v,
            self.pano_az_min,
            self.pano_az_max,
            self.pano_elev_min,
            self.pano_elev_max,
        )
    }

    pub fn bb_delta_h(&self) -> [f64; 6] {
        [
            self.bb_delta_h_rot,
            self.bb_delta_h_rot,
            self.bb_delta_h_rot,
            self.bb_delta_h_trans,
            self.bb_delta_h_trans,
            self.bb_delta_h_trans,
        ]
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses little-endian f32 (x, y, z, reflectance) quadruples.
pub fn load_velodyne_bin(path: &Path) -> Result<Vec<Point3>> {
    let bytes = read_bytes(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::parse(
            path,
            format!("file length {} is not a multiple of 16 bytes", bytes.len()),
        ));
    }
    let mut cloud = Vec::with_capacity(bytes.len() / 16);
    for (i, chunk) in bytes.chunks_exact(16).enumerate() {
        let f = |o: usize| f32::from_le_bytes(chunk[o..o + 4].try_into().unwrap()) as f64;
        let p = Point3::new(f(0), f(4), f(8), f(12));
        if ![p.x, p.y, p.z, p.reflectivity].iter().all(|v| v.is_finite()) {
            return Err(Error::parse(path, format!("non-finite value at byte offset {}", i * 16)));
        }
        cloud.push(p);
    }
    Ok(cloud)
}

struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_pnm_header(path: &Path, bytes: &[u8]) -> Result<PnmHeader> {
    if bytes.len() < 2 {
        return Err(Error::parse(path, "file too short for a PNM header"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2usize;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and `#` comment lines between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::parse(path, "malformed PNM header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text.parse().map_err(|_| Error::parse(path, "malformed PNM header value"))?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(path, "missing whitespace after PNM header"));
    }
    pos += 1;
    if fields[0] == 0 || fields[1] == 0 || fields[2] == 0 || fields[2] > 65535 {
        return Err(Error::parse(path, "PNM dimensions and maxval must be positive (maxval <= 65535)"));
    }
    Ok(PnmHeader {
        magic,
        width: fields[0] as usize,
        height: fields[1] as usize,
        maxval: fields[2],
        data_offset: pos,
    })
}

/// Loads a P5 graymap or P6 pixmap (converted to gray with luma weights
/// 0.299/0.587/0.114), scaled to [0, 1]. Both 8- and 16-bit samples are
/// accepted; 16-bit samples are big-endian per the format.
pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    let bytes = read_bytes(path)?;
    let h = parse_pnm_header(path, &bytes)?;
    let channels = match &h.magic {
        b"P5" => 1usize,
        b"P6" => 3usize,
        _ => return Err(Error::parse(path, "unsupported magic number (want P5 or P6)")),
    };
    let wide = h.maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let need = h.width * h.height * channels * sample_bytes;
    let data = &bytes[h.data_offset..];
    if data.len() != need {
        return Err(Error::parse(
            path,
            format!("pixel payload is {} bytes, expected {}", data.len(), need),
        ));
    }
    let sample = |i: usize| -> f64 {
        let raw = if wide {
            u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as u32
        } else {
            data[i] as u32
        };
        raw.min(h.maxval) as f64 / h.maxval as f64
    };
    let mut out = Vec::with_capacity(h.width * h.height);
    for px in 0..h.width * h.height {
        let v = if channels == 1 {
            sample(px)
        } else {
            0.299 * sample(3 * px) + 0.587 * sample(3 * px + 1) + 0.114 * sample(3 * px + 2)
        };
        out.push(v.clamp(0.0, 1.0));
    }
    GrayImage::new(h.height, h.width, out)
}

fn parse_floats(path: &Path, key: &str, text: &str, n: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        text.split_whitespace().map(|t| t.parse::<f64>()).collect();
    let vals = vals.map_err(|e| Error::parse(path, format!("bad float under key `{key}`: {e}")))?;
    if vals.len() != n {
        return Err(Error::parse(path, format!("key `{key}` needs {n} values, found {}", vals.len())));
    }
    Ok(vals)
}

/// Calibration text file: `width:`/`height:` image size, `P:` 12-value
/// row-major projection matrix, and an optional ground-truth extrinsic as
/// `R:` (9 values, row-major) + `T:` (3 values). Rotation converts to Euler
/// angles under the Rz*Ry*Rx convention.
pub fn load_calib(path: &Path) -> Result<(CameraIntrinsics, Option<ExtrinsicParams>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once(':') else {
            return Err(Error::parse(path, format!("expected `key: values`, found `{line}`")));
        };
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let get = |k: &str| entries.iter().find(|(ek, _)| ek == k).map(|(_, v)| v.clone());
    let require = |k: &str| get(k).ok_or_else(|| Error::parse(path, format!("missing key `{k}`")));
    let width = parse_floats(path, "width", &require("width")?, 1)?[0];
    let height = parse_floats(path, "height", &require("height")?, 1)?[0];
    if width < 1.0 || height < 1.0 || width.fract() != 0.0 || height.fract() != 0.0 {
        return Err(Error::parse(path, "width/height must be positive integers"));
    }
    let p = parse_floats(path, "P", &require("P")?, 12)?;
    let mat = [
        [p[0], p[1], p[2], p[3]],
        [p[4], p[5], p[6], p[7]],
        [p[8], p[9], p[10], p[11]],
    ];
    let intrinsics = CameraIntrinsics::new(mat, width as usize, height as usize)?;
    let gt = match (get("R"), get("T")) {
        (Some(r), Some(t)) => {
            let rv = parse_floats(path, "R", &r, 9)?;
            let tv = parse_floats(path, "T", &t, 3)?;
            let m: Mat3 = [
                [rv[0], rv[1], rv[2]],
                [rv[3], rv[4], rv[5]],
                [rv[6], rv[7], rv[8]],
            ];
            let (rx, ry, rz) = angles_from_rotation(&m);
            Some(ExtrinsicParams::new(rx, ry, rz, tv[0], tv[1], tv[2]))
        }
        (None, None) => None,
        _ => return Err(Error::parse(path, "ground truth needs both `R` and `T` keys")),
    };
    Ok((intrinsics, gt))
}

/// Writes a calibration file `load_calib` can read back.
pub fn write_calib(
    k: &CameraIntrinsics,
    gt: Option<&ExtrinsicParams>,
    path: &Path,
) -> Result<()> {
    let mut text = format!("width: {}\nheight: {}\nP:", k.width, k.height);
    for row in &k.p {
        for v in row {
            text.push_str(&format!(" {v}"));
        }
    }
    text.push('\n');
    if let Some(theta) = gt {
        let r = theta.rotation()?;
        text.push_str("R:");
        for row in &r {
            for v in row {
                text.push_str(&format!(" {v}"));
            }
        }
        text.push('\n');
        text.push_str(&format!("T: {} {} {}\n", theta.tx, theta.ty, theta.tz));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a flat `key = value` config with `#` comments. Unknown keys are
/// rejected with the list of valid keys.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = PipelineConfig::default();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::parse(path, format!("expected `key = value`, found `{line}`")));
        };
        cfg.set(k.trim(), v.trim()).map_err(|m| Error::parse(path, m))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_config(cfg: &PipelineConfig, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (k, v) in cfg.to_pairs() {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Structured result file: estimate, cost, trace summary, then the full
/// config snapshot. Field order is fixed so identical runs are
/// byte-identical.
pub fn write_result(result: &CalibrationResult, path: &Path) -> Result<()> {
    let mut text = String::new();
    let t = result.theta;
    for (k, v) in [
        ("rx", t.rx),
        ("ry", t.ry),
        ("rz", t.rz),
        ("tx", t.tx),
        ("ty", t.ty),
        ("tz", t.tz),
        ("objective", result.cost.j),
        ("precision", result.cost.precision),
        ("raw_sum", result.cost.raw_sum),
    ] {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str(&format!("matched = {}\n", result.cost.matched));
    text.push_str(&format!("edge_count = {}\n", result.cost.edge_count));
    text.push_str(&format!("iterations = {}\n", result.trace.entries.len()));
    text.push_str(&format!("termination = {}\n", result.trace.termination.name()));
    for (k, v) in &result.config {
        text.push_str(&format!("config.{k} = {v}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes any scalar grid as a 16-bit P5 graymap, affinely scaled so the
/// value range maps onto [0, 65535]; the original range is kept in a header
/// comment (`# range <min> <max>`).
pub fn write_grid(values: &[f64], height: usize, width: usize, path: &Path) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::invalid("grid length does not match dimensions"));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let mut out = Vec::new();
    write!(out, "P5\n# range {min} {max}\n{width} {height}\n65535\n").unwrap();
    for v in values {
        let q = (((v - min) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Panorama export, 16-bit P5 with the scaling documented in the header.
pub fn write_panorama(pano: &DensePanorama, path: &Path) -> Result<()> {
    write_grid(&pano.values, pano.height, pano.width, path)
}

/// Writes a [0,1] grayscale image as a 16-bit P5 graymap (no rescaling).
pub fn write_gray_image(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "P5\n{} {}\n65535\n", img.width, img.height).unwrap();
    for v in &img.data {
        out.extend_from_slice(&(((v * 65535.0).round()) as u16).to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a point cloud in the binary quadruple format `load_velodyne_bin`
/// reads.
pub fn write_velodyne_bin(cloud: &[Point3], path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(cloud.len() * 16);
    for p in cloud {
        for v in [p.x, p.y, p.z, p.reflectivity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densify::FeatureTag;
    use crate::objective::{CostBreakdown, OptimizerTrace, Termination, TraceEntry};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn velodyne_roundtrip() {
        let dir = tmp();
        let path = dir.path().join("scan.bin");
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5, 4.0, 5.0, 6.0, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let cloud = load_velodyne_bin(&path).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!((cloud[0].x, cloud[0].y, cloud[0].z, cloud[0].reflectivity), (1.0, 2.0, 3.0, 0.5));
        assert_eq!((cloud[1].x, cloud[1].y, cloud[1].z, cloud[1].reflectivity), (4.0, 5.0, 6.0, 0.25));
    }

    #[test]
    fn velodyne_empty_and_truncated() {
        let dir = tmp();
        let empty = dir.path().join("empty.bin");
        fs::write(&empty, b"").unwrap();
        assert!(load_velodyne_bin(&empty).unwrap().is_empty());
        let bad = dir.path().join("bad.bin");
        fs::write(&bad, vec![0u8; 17]).unwrap();
        assert!(matches!(load_velodyne_bin(&bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn velodyne_rejects_non_finite() {
        let dir = tmp();
        let path = dir.path().join("nan.bin");
        let mut bytes = Vec::new();
        for v in [1.0f32, f32::NAN, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let err = load_velodyne_bin(&path).unwrap_err();
        assert!(err.to_string().contains("offset 0"), "{err}");
    }

    #[test]
    fn pgm_p5_values() {
        let dir = tmp();
        let path = dir.path().join("a.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        fs::write(&path, bytes).unwrap();
        let img = load_gray_image(&path).unwrap();
        assert_eq!(img.data, vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn ppm_p6_luma() {
        let dir = tmp();
        let path = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 255, 0, 0, 255, 0, 0, 255, 0, 0]);
        fs::write(&path, bytes).unwrap();
        let img = load_gray_image(&path).unwrap();
        for v in &img.data {
            assert!((v - 0.299).abs() < 1e-12);
        }
    }

    #[test]
    fn pnm_bad_magic_and_short_payload() {
        let dir = tmp();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P7\n2 2\n255\n0000").unwrap();
        assert!(matches!(load_gray_image(&path), Err(Error::Parse { .. })));
        fs::write(&path, b"P5\n2 2\n255\n00").unwrap();
        assert!(matches!(load_gray_image(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn calib_identity_rotation() {
        let dir = tmp();
        let path = dir.path().join("calib.txt");
        fs::write(
            &path,
            "width: 4\nheight: 4\nP: 100 0 2 0 0 100 2 0 0 0 1 0\nR: 1 0 0 0 1 0 0 0 1\nT: 0.5 -0.25 1\n",
        )
        .unwrap();
        let (k, gt) = load_calib(&path).unwrap();
        assert_eq!((k.width, k.height), (4, 4));
        let gt = gt.unwrap();
        assert_eq!((gt.rx, gt.ry, gt.rz), (0.0, 0.0, 0.0));
        assert_eq!((gt.tx, gt.ty, gt.tz), (0.5, -0.25, 1.0));
    }

    #[test]
    fn calib_rz_quarter_turn() {
        let dir = tmp();
        let path = dir.path().join("calib.txt");
        fs::write(
            &path,
            "width: 4\nheight: 4\nP: 100 0 2 0 0 100 2 0 0 0 1 0\nR: 0 -1 0 1 0 0 0 0 1\nT: 0 0 0\n",
        )
        .unwrap();
        let (_, gt) = load_calib(&path).unwrap();
        let gt = gt.unwrap();
        assert!((gt.rz - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(gt.rx.abs() < 1e-12 && gt.ry.abs() < 1e-12);
    }

    #[test]
    fn calib_missing_key_and_bad_float() {
        let dir = tmp();
        let path = dir.path().join("calib.txt");
        fs::write(&path, "width: 4\nheight: 4\n").unwrap();
        let err = load_calib(&path).unwrap_err();
        assert!(err.to_string().contains("`P`"), "{err}");
        fs::write(&path, "width: 4\nheight: 4\nP: 1 0 2 0 0 1 2 0 0 0 x 0\n").unwrap();
        assert!(matches!(load_calib(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn config_roundtrip_identity() {
        let dir = tmp();
        let path = dir.path().join("cfg.txt");
        let mut cfg = PipelineConfig::default();
        cfg.edge_sigma = 4.0;
        cfg.match_threshold = 0.1;
        cfg.seed = 1234567;
        write_config(&cfg, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_unknown_key_lists_valid() {
        let dir = tmp();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "no_such_knob = 3\n").unwrap();
        let err = load_config(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no_such_knob") && msg.contains("ransac_gamma"), "{msg}");
    }

    #[test]
    fn config_rejects_invalid_field() {
        let dir = tmp();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "tv_lambda = -1\n").unwrap();
        assert!(load_config(&path).is_err());
    }

    #[test]
    fn result_file_contains_termination() {
        let dir = tmp();
        let path = dir.path().join("result.txt");
        let theta = ExtrinsicParams::new(0.1, 0.2, 0.3, 1.0, 2.0, 3.0);
        let result = CalibrationResult {
            theta,
            cost: CostBreakdown { j: 5.0, matched: 10, edge_count: 20, precision: 0.5, raw_sum: 10.0 },
            trace: OptimizerTrace {
                entries: vec![TraceEntry { theta, j: 5.0, grad_norm: 0.0, step_size: 0.0 }],
                termination: Termination::Converged,
            },
            config: PipelineConfig::default().to_pairs(),
        };
        write_result(&result, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("termination = converged"));
        assert!(text.contains("rx = 0.1"));
        assert!(text.contains("config.seed = 0"));
    }

    #[test]
    fn panorama_16bit_scaling() {
        let dir = tmp();
        let path = dir.path().join("pano.pgm");
        let pano = DensePanorama {
            height: 2,
            width: 2,
            values: vec![1.0, 2.0, 3.0, 5.0],
            feature: FeatureTag::Depth,
            iterations: 1,
            objective: 0.0,
        };
        write_panorama(&pano, &path).unwrap();
        let img = load_gray_image(&path).unwrap();
        assert_eq!(img.data[0], 0.0);
        assert_eq!(img.data[3], 1.0);
        assert!((img.data[1] - 0.25).abs() < 1e-4);
        let text = fs::read(&path).unwrap();
        assert!(text.starts_with(b"P5\n# range 1 5\n2 2\n65535\n"));
    }

    #[test]
    fn frame_pair_validation() {
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        let k = CameraIntrinsics::pinhole(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        assert!(FramePair::new(vec![], img.clone(), &k, "f0".into(), None).is_err());
        let cloud = vec![Point3::new(1.0, 0.0, 0.0, 0.5)];
        assert!(FramePair::new(cloud.clone(), img.clone(), &k, "f0".into(), None).is_ok());
        let k2 = CameraIntrinsics::pinhole(10.0, 10.0, 2.0, 2.0, 5, 4).unwrap();
        assert!(FramePair::new(cloud, img, &k2, "f0".into(), None).is_err());
    }
}
