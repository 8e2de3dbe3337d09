//! Camera-side preprocessing and shared 2D primitives: histogram
//! equalization, Sobel edges, Gaussian expansion, Canny, binary morphology
//! and bilinear sampling.
//!
//! Border handling is edge-replication throughout, so edge maps never gain
//! spurious frame borders.

use crate::error::{Error, Result};

/// Dense grayscale image with intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::invalid("image must be at least 2x2"));
        }
        if data.len() != height * width {
            return Err(Error::invalid("image data length does not match dimensions"));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("image intensities must lie in [0, 1]"));
        }
        Ok(GrayImage { height, width, data })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        GrayImage::new(height, width, vec![value; height * width])
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Non-negative edge-strength field.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl EdgeMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::invalid("edge map data length does not match dimensions"));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("edge strengths must be finite and non-negative"));
        }
        Ok(EdgeMap { height, width, data })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

/// Binary grid used for Canny output and morphology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn empty(height: usize, width: usize) -> Self {
        BinaryImage { height, width, data: vec![false; height * width] }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

/// Remaps intensities through the cumulative histogram. The mapping is
/// monotone non-decreasing in the input intensity.
pub fn histogram_equalize(img: &GrayImage, bins: usize) -> Result<GrayImage> {
    if bins < 2 {
        return Err(Error::invalid("histogram equalization needs at least 2 bins"));
    }
    let mut counts = vec![0usize; bins];
    for &v in &img.data {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = img.data.len() as f64;
    let mut cdf = vec![0.0; bins];
    let mut acc = 0usize;
    for (b, &c) in counts.iter().enumerate() {
        acc += c;
        cdf[b] = acc as f64 / total;
    }
    let data = img
        .data
        .iter()
        .map(|&v| cdf[((v * bins as f64) as usize).min(bins - 1)])
        .collect();
    GrayImage::new(img.height, img.width, data)
}

#[inline]
fn clamp_idx(v: i64, max: usize) -> usize {
    v.clamp(0, max as i64 - 1) as usize
}

/// Per-pixel Sobel gradients with replicate padding, scaled by 1/8 so a unit
/// step produces gradient 1/2.
fn sobel_gradients(height: usize, width: usize, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let at = |r: i64, c: i64| data[clamp_idx(r, height) * width + clamp_idx(c, width)];
    let mut gx = vec![0.0; height * width];
    let mut gy = vec![0.0; height * width];
    for r in 0..height as i64 {
        for c in 0..width as i64 {
            let sx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let sy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            gx[(r as usize) * width + c as usize] = sx / 8.0;
            gy[(r as usize) * width + c as usize] = sy / 8.0;
        }
    }
    (gx, gy)
}

/// Sobel gradient-magnitude edge map.
pub fn sobel_edges(img: &GrayImage) -> Result<EdgeMap> {
    if img.height < 3 || img.width < 3 {
        return Err(Error::invalid("sobel needs an image of at least 3x3"));
    }
    let (gx, gy) = sobel_gradients(img.height, img.width, &img.data);
    let data = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    EdgeMap::new(img.height, img.width, data)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

fn blur_field(height: usize, width: usize, data: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("gaussian sigma must be positive"));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    // Horizontal pass, then vertical, both with replicate borders.
    let mut tmp = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                acc += kv * data[r * width + clamp_idx(c + ki as i64 - radius, width)];
            }
            tmp[r * width + c as usize] = acc;
        }
    }
    let mut out = vec![0.0; height * width];
    for r in 0..height as i64 {
        for c in 0..width {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp_idx(r + ki as i64 - radius, height) * width + c];
            }
            out[(r as usize) * width + c] = acc;
        }
    }
    Ok(out)
}

/// Separable Gaussian convolution with kernel radius `ceil(3*sigma)`.
pub fn gaussian_blur(map: &EdgeMap, sigma: f64) -> Result<EdgeMap> {
    let data = blur_field(map.height, map.width, &map.data, sigma)?;
    EdgeMap::new(map.height, map.width, data)
}

pub fn gaussian_blur_gray(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let data = blur_field(img.height, img.width, &img.data, sigma)?;
    // Convolution with a unit-mass kernel cannot leave [0,1], up to rounding.
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    GrayImage::new(img.height, img.width, data)
}

/// The expanded camera edge map: histogram equalization, Sobel, Gaussian
/// expansion, then rescale so the maximum is exactly 1 (unless all zero).
pub fn camera_edge_map(img: &GrayImage, sigma: f64) -> Result<EdgeMap> {
    let eq = histogram_equalize(img, 256)?;
    let edges = sobel_edges(&eq)?;
    let blurred = gaussian_blur(&edges, sigma)?;
    let max = blurred.max_value();
    if max == 0.0 {
        return Ok(blurred);
    }
    let data = blurred.data.iter().map(|v| v / max).collect();
    EdgeMap::new(blurred.height, blurred.width, data)
}

/// Canny edge detection: Gaussian smoothing, Sobel gradient with orientation
/// quantized to four directions, non-maximum suppression and hysteresis.
/// Thresholds are relative to the maximum gradient magnitude.
pub fn canny(
    height: usize,
    width: usize,
    values: &[f64],
    sigma: f64,
    low: f64,
    high: f64,
) -> Result<BinaryImage> {
    if !(0.0 <= low && low < high && high <= 1.0) {
        return Err(Error::invalid("canny thresholds must satisfy 0 <= low < high <= 1"));
    }
    if values.len() != height * width {
        return Err(Error::invalid("canny input length does not match dimensions"));
    }
    let smoothed = blur_field(height, width, values, sigma)?;
    let (gx, gy) = sobel_gradients(height, width, &smoothed);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let max_mag = mag.iter().cloned().fold(0.0, f64::max);
    if max_mag == 0.0 {
        return Ok(BinaryImage::empty(height, width));
    }

    // Non-maximum suppression; the 1-pixel border is excluded.
    let mut thin = vec![0.0; height * width];
    for r in 1..height - 1 {
        for c in 1..width - 1 {
            let idx = r * width + c;
            let m = mag[idx];
            if m == 0.0 {
                continue;
            }
            let mut angle = gy[idx].atan2(gx[idx]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dr, dc) = if !(22.5..157.5).contains(&angle) {
                (0usize, 1usize) // horizontal gradient: compare east/west
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, usize::MAX) // (+1, -1) diagonal
            };
            let (n1, n2) = if dc == usize::MAX {
                (mag[(r + 1) * width + c - 1], mag[(r - 1) * width + c + 1])
            } else {
                (mag[(r + dr) * width + c + dc], mag[(r - dr) * width + c - dc])
            };
            if m > n1 && m >= n2 {
                thin[idx] = m;
            }
        }
    }

    // Hysteresis: strong pixels seed a flood fill over weak pixels.
    let tl = low * max_mag;
    let th = high * max_mag;
    let mut out = BinaryImage::empty(height, width);
    let mut stack = Vec::new();
    for (idx, &m) in thin.iter().enumerate() {
        if m >= th && !out.data[idx] {
            out.data[idx] = true;
            stack.push(idx);
            while let Some(p) = stack.pop() {
                let (pr, pc) = (p / width, p % width);
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (pr as i64 + dr, pc as i64 + dc);
                        if nr < 0 || nr >= height as i64 || nc < 0 || nc >= width as i64 {
                            continue;
                        }
                        let n = nr as usize * width + nc as usize;
                        if !out.data[n] && thin[n] >= tl {
                            out.data[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn canny_gray(img: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<BinaryImage> {
    canny(img.height, img.width, &img.data, sigma, low, high)
}

/// Flat square-kernel dilation, radius `r` (kernel (2r+1)^2), implemented as
/// separable running maxima.
pub fn dilate(map: &BinaryImage, kernel_radius: usize) -> BinaryImage {
    morph(map, kernel_radius, true)
}

pub fn erode(map: &BinaryImage, kernel_radius: usize) -> BinaryImage {
    morph(map, kernel_radius, false)
}

/// Morphological closing: dilation then erosion with the same kernel.
///
/// The grid is padded by the kernel radius so the intermediate dilation is
/// not clipped at the borders; otherwise closing would shrink shapes that
/// dilate past the image edge.
pub fn close(map: &BinaryImage, kernel_radius: usize) -> BinaryImage {
    let r = kernel_radius;
    let (h, w) = (map.height, map.width);
    let mut padded = BinaryImage::empty(h + 2 * r, w + 2 * r);
    for row in 0..h {
        for col in 0..w {
            padded.set(row + r, col + r, map.at(row, col));
        }
    }
    let closed = erode(&dilate(&padded, r), r);
    let mut out = BinaryImage::empty(h, w);
    for row in 0..h {
        for col in 0..w {
            out.set(row, col, closed.at(row + r, col + r));
        }
    }
    out
}

fn morph(map: &BinaryImage, radius: usize, dilating: bool) -> BinaryImage {
    let (h, w) = (map.height, map.width);
    let r = radius as i64;
    let mut tmp = BinaryImage::empty(h, w);
    for row in 0..h {
        for col in 0..w as i64 {
            let mut v = !dilating;
            for k in -r..=r {
                let c = col + k;
                // Cells outside the grid count as background.
                let cell = if c < 0 || c >= w as i64 { false } else { map.at(row, c as usize) };
                if dilating {
                    v |= cell;
                } else {
                    v &= cell;
                }
            }
            tmp.set(row, col as usize, v);
        }
    }
    let mut out = BinaryImage::empty(h, w);
    for row in 0..h as i64 {
        for col in 0..w {
            let mut v = !dilating;
            for k in -r..=r {
                let rr = row + k;
                let cell = if rr < 0 || rr >= h as i64 { false } else { tmp.at(rr as usize, col) };
                if dilating {
                    v |= cell;
                } else {
                    v &= cell;
                }
            }
            out.set(row as usize, col, v);
        }
    }
    out
}

/// Bilinear interpolation at a continuous pixel position; `None` outside
/// [0, W-1] x [0, H-1].
pub fn bilinear_sample(map: &EdgeMap, u: f64, v: f64) -> Option<f64> {
    if !(u >= 0.0 && u <= (map.width - 1) as f64 && v >= 0.0 && v <= (map.height - 1) as f64) {
        return None;
    }
    let c0 = (u.floor() as usize).min(map.width - 2);
    let r0 = (v.floor() as usize).min(map.height - 2);
    let fu = u - c0 as f64;
    let fv = v - r0 as f64;
    Some(
        map.at(r0, c0) * (1.0 - fu) * (1.0 - fv)
            + map.at(r0, c0 + 1) * fu * (1.0 - fv)
            + map.at(r0 + 1, c0) * (1.0 - fu) * fv
            + map.at(r0 + 1, c0 + 1) * fu * fv,
    )
}
