//! Sparse feature panoramas and dense-map recovery by masked anisotropic
//! total-variation minimization, solved with FISTA over the fidelity term
//! and a dual (fast gradient projection) TV proximal step.

use crate::error::{Error, Result};
use crate::geometry::PanoramaCell;
use crate::segmentation::LabeledCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureTag {
    Depth,
    Reflectivity,
    Object,
}

impl FeatureTag {
    pub fn name(self) -> &'static str {
        match self {
            FeatureTag::Depth => "depth",
            FeatureTag::Reflectivity => "reflectivity",
            FeatureTag::Object => "object",
        }
    }
}

/// Partially observed panorama: `values` is meaningful where `mask` is set
/// and stored as 0 elsewhere.
#[derive(Debug, Clone)]
pub struct SparsePanorama {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub feature: FeatureTag,
}

impl SparsePanorama {
    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Inpainted panorama with solver metadata.
#[derive(Debug, Clone)]
pub struct DensePanorama {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub feature: FeatureTag,
    pub iterations: usize,
    pub objective: f64,
}

/// Projects labeled points into a per-feature sparse panorama. When several
/// points land in one cell, the nearest-range point wins.
pub fn build_sparse_panorama(
    cloud: &LabeledCloud,
    feature: FeatureTag,
    height: usize,
    width: usize,
) -> SparsePanorama {
    let mut values = vec![0.0; height * width];
    let mut mask = vec![false; height * width];
    let mut best_range = vec![f64::INFINITY; height * width];
    for idx in 0..cloud.len() {
        let PanoramaCell::Cell { i, j } = cloud.cell[idx] else {
            continue;
        };
        let p = &cloud.points[idx];
        let r = p.range();
        let cell = j * width + i;
        if r < best_range[cell] {
            best_range[cell] = r;
            mask[cell] = true;
            values[cell] = match feature {
                FeatureTag::Depth => r,
                FeatureTag::Reflectivity => p.reflectivity,
                FeatureTag::Object => cloud.object_flag[idx] as f64,
            };
        }
    }
    SparsePanorama { height, width, values, mask, feature }
}

/// The masked-TV objective: ||H (phi - u)||^2 + lambda * TV_aniso(phi),
/// with forward differences inside the grid.
pub fn tv_objective(sparse: &SparsePanorama, phi: &[f64], lambda: f64) -> f64 {
    let (h, w) = (sparse.height, sparse.width);
    let mut fidelity = 0.0;
    for i in 0..h * w {
        if sparse.mask[i] {
            let d = phi[i] - sparse.values[i];
            fidelity += d * d;
        }
    }
    let mut tv = 0.0;
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                tv += (phi[r * w + c + 1] - phi[r * w + c]).abs();
            }
            if r + 1 < h {
                tv += (phi[(r + 1) * w + c] - phi[r * w + c]).abs();
            }
        }
    }
    fidelity + lambda * tv
}

/// Proximal operator of `alpha * TV_aniso` at `b`, by fast gradient
/// projection on the dual. `p` holds horizontal dual variables (h x (w-1)),
/// `q` vertical ((h-1) x w).
fn prox_tv(b: &[f64], h: usize, w: usize, alpha: f64, iters: usize) -> Vec<f64> {
    let np = h * (w - 1);
    let nq = (h - 1) * w;
    let mut p = vec![0.0; np];
    let mut q = vec![0.0; nq];
    let mut rp = p.clone();
    let mut rq = q.clone();
    let mut t = 1.0f64;
    let step = 1.0 / (8.0 * alpha);
    // x = b - alpha * L^T(p, q) where L is the forward-difference operator.
    let apply = |p: &[f64], q: &[f64], x: &mut [f64]| {
        x.copy_from_slice(b);
        for r in 0..h {
            for c in 0..w - 1 {
                let v = alpha * p[r * (w - 1) + c];
                x[r * w + c] += v;
                x[r * w + c + 1] -= v;
            }
        }
        for r in 0..h - 1 {
            for c in 0..w {
                let v = alpha * q[r * w + c];
                x[r * w + c] += v;
                x[(r + 1) * w + c] -= v;
            }
        }
    };
    let mut x = vec![0.0; h * w];
    for _ in 0..iters {
        apply(&rp, &rq, &mut x);
        let mut pn = vec![0.0; np];
        let mut qn = vec![0.0; nq];
        for r in 0..h {
            for c in 0..w - 1 {
                let g = x[r * w + c + 1] - x[r * w + c];
                pn[r * (w - 1) + c] = (rp[r * (w - 1) + c] + step * g).clamp(-1.0, 1.0);
            }
        }
        for r in 0..h - 1 {
            for c in 0..w {
                let g = x[(r + 1) * w + c] - x[r * w + c];
                qn[r * w + c] = (rq[r * w + c] + step * g).clamp(-1.0, 1.0);
            }
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let m = (t - 1.0) / t_new;
        for i in 0..np {
            rp[i] = pn[i] + m * (pn[i] - p[i]);
        }
        for i in 0..nq {
            rq[i] = qn[i] + m * (qn[i] - q[i]);
        }
        p = pn;
        q = qn;
        t = t_new;
    }
    apply(&p, &q, &mut x);
    x
}

const FGP_ITERS: usize = 40;
const CONVERGED_STREAK: usize = 5;

/// Masked anisotropic-TV inpainting by FISTA. Stops at `max_iter` or when
/// the relative objective change stays below `tol` for 5 consecutive
/// iterations; returns the best-objective iterate seen (which is never worse
/// than the initialization).
pub fn tv_inpaint(
    sparse: &SparsePanorama,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<DensePanorama> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("tv lambda must be positive"));
    }
    let (h, w) = (sparse.height, sparse.width);
    if h < 2 || w < 2 {
        return Err(Error::invalid("tv inpainting needs a grid of at least 2x2"));
    }
    let observed = sparse.observed_count();
    if observed == 0 {
        return Err(Error::invalid("tv inpainting needs at least one observed cell"));
    }
    if sparse.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("tv inpainting input must be finite"));
    }
    // Initialize observed cells at their values and the rest at the observed
    // mean; the fidelity gradient has Lipschitz constant 2, so step = 1/2.
    let mean: f64 = sparse
        .values
        .iter()
        .zip(&sparse.mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .sum::<f64>()
        / observed as f64;
    let mut x: Vec<f64> = sparse
        .values
        .iter()
        .zip(&sparse.mask)
        .map(|(v, m)| if *m { *v } else { mean })
        .collect();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let step = 0.5;
    let mut best = x.clone();
    let mut best_obj = tv_objective(sparse, &x, lambda);
    let mut prev_obj = best_obj;
    let mut streak = 0usize;
    let mut iterations = 0usize;
    for k in 1..=max_iter {
        iterations = k;
        let mut z = y.clone();
        for i in 0..h * w {
            if sparse.mask[i] {
                z[i] -= step * 2.0 * (y[i] - sparse.values[i]);
            }
        }
        let z = prox_tv(&z, h, w, lambda * step, FGP_ITERS);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let m = (t - 1.0) / t_new;
        for i in 0..h * w {
            y[i] = z[i] + m * (z[i] - x[i]);
        }
        x = z;
        t = t_new;
        let obj = tv_objective(sparse, &x, lambda);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&x);
        }
        let rel = (obj - prev_obj).abs() / prev_obj.abs().max(1e-12);
        streak = if rel < tol { streak + 1 } else { 0 };
        prev_obj = obj;
        if streak >= CONVERGED_STREAK {
            break;
        }
    }
    Ok(DensePanorama {
        height: h,
        width: w,
        values: best,
        feature: sparse.feature,
        iterations,
        objective: best_obj,
    })
}
