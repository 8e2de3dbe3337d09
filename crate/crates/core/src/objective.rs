//! The edge-alignment objective, its numeric gradient, and the
//! Barzilai–Borwein gradient-ascent optimizer.

use crate::edges::EdgePointSet;
use crate::error::{Error, Result};
use crate::geometry::{
    mat_mul_vec, project_to_image, CameraIntrinsics, ExtrinsicParams, Projection,
};
use crate::image::{bilinear_sample, EdgeMap};

/// One evaluation of the objective J = (N_m / N_e) * raw_sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub j: f64,
    pub matched: usize,
    pub edge_count: usize,
    pub precision: f64,
    pub raw_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    DegenerateStep,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::DegenerateStep => "degenerate_step",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub theta: ExtrinsicParams,
    pub j: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

/// Full optimizer history; the last entry holds the returned estimate.
#[derive(Debug, Clone)]
pub struct OptimizerTrace {
    pub entries: Vec<TraceEntry>,
    pub termination: Termination,
}

/// A finished calibration: estimate, final cost, history, and the exact
/// configuration it ran under (flat key-value snapshot).
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub theta: ExtrinsicParams,
    pub cost: CostBreakdown,
    pub trace: OptimizerTrace,
    pub config: Vec<(String, String)>,
}

/// Optimizer knobs. `delta_h` is the per-component central-difference step;
/// `step_cap` bounds the step norm so one bad Barzilai–Borwein ratio cannot
/// throw the iterate out of the objective's basin.
#[derive(Debug, Clone, Copy)]
pub struct BbOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    pub delta_h: [f64; 6],
    pub gamma0: f64,
    pub step_cap: f64,
}

impl Default for BbOptions {
    fn default() -> Self {
        BbOptions {
            epsilon: 1e-5,
            max_iter: 200,
            delta_h: [1e-3; 6],
            gamma0: 1e-2,
            step_cap: 0.02,
        }
    }
}

/// Evaluates the alignment cost at `theta`: every edge point is transformed,
/// projected, and sampled in the camera edge map. Points that project
/// outside the image or behind the camera contribute zero but stay in N_e.
pub fn evaluate_cost(
    theta: &ExtrinsicParams,
    edges: &EdgePointSet,
    e_c: &EdgeMap,
    k: &CameraIntrinsics,
    match_threshold: f64,
) -> Result<CostBreakdown> {
    let n_e = edges.edge_count();
    if n_e == 0 {
        return Err(Error::NoEdges);
    }
    let r = theta.rotation()?;
    let t = theta.translation();
    let mut raw_sum = 0.0;
    let mut matched = 0usize;
    for ep in &edges.points {
        let v = mat_mul_vec(&r, &ep.point.coords());
        let cam = [v[0] + t[0], v[1] + t[1], v[2] + t[2]];
        let Projection::InImage { u, v, .. } = project_to_image(k, &cam) else {
            continue;
        };
        let Some(intensity) = bilinear_sample(e_c, u, v) else {
            continue;
        };
        raw_sum += intensity * ep.probability;
        if intensity >= match_threshold {
            matched += 1;
        }
    }
    let precision = matched as f64 / n_e as f64;
    Ok(CostBreakdown { j: precision * raw_sum, matched, edge_count: n_e, precision, raw_sum })
}

/// Central-difference gradient, one cost evaluation pair per component.
pub fn numeric_gradient(
    cost: &mut impl FnMut(&ExtrinsicParams) -> f64,
    theta: &ExtrinsicParams,
    delta_h: &[f64; 6],
) -> [f64; 6] {
    let base = theta.to_array();
    let mut grad = [0.0; 6];
    for i in 0..6 {
        let mut plus = base;
        let mut minus = base;
        plus[i] += delta_h[i];
        minus[i] -= delta_h[i];
        grad[i] = (cost(&ExtrinsicParams::from_array(plus))
            - cost(&ExtrinsicParams::from_array(minus)))
            / (2.0 * delta_h[i]);
    }
    grad
}

fn norm(v: &[f64; 6]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient ascent with Barzilai–Borwein step length: the update is
/// `theta + alpha * G` with `alpha = s's / s'(G_prev - G)`, which is positive
/// near a maximum. A degenerate ratio (non-positive or non-finite) falls
/// back to a `gamma0`-length step along the gradient direction, and every
/// step is capped at `step_cap` in norm. Returns the best-objective iterate;
/// the trace's last entry is that estimate.
pub fn bb_ascent(
    cost: &mut impl FnMut(&ExtrinsicParams) -> f64,
    theta0: &ExtrinsicParams,
    opts: &BbOptions,
) -> (ExtrinsicParams, OptimizerTrace) {
    let mut theta = theta0.to_array();
    let mut j = cost(&ExtrinsicParams::from_array(theta));
    let mut grad = numeric_gradient(cost, &ExtrinsicParams::from_array(theta), &opts.delta_h);
    let mut entries = vec![TraceEntry {
        theta: ExtrinsicParams::from_array(theta),
        j,
        grad_norm: norm(&grad),
        step_size: 0.0,
    }];
    let mut best_theta = theta;
    let mut best_j = j;
    let mut prev: Option<([f64; 6], [f64; 6])> = None; // (theta, grad)
    let mut termination = Termination::MaxIter;

    for _ in 0..opts.max_iter {
        let gnorm = norm(&grad);
        if !j.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            termination = Termination::DegenerateStep;
            break;
        }
        if gnorm == 0.0 {
            termination = Termination::Converged;
            break;
        }
        let alpha = match prev {
            Some((theta_p, grad_p)) => {
                let mut ss = 0.0;
                let mut sg = 0.0;
                for i in 0..6 {
                    let s = theta[i] - theta_p[i];
                    ss += s * s;
                    sg += s * (grad_p[i] - grad[i]);
                }
                if sg > 0.0 && sg.is_finite() {
                    ss / sg
                } else {
                    opts.gamma0 / gnorm
                }
            }
            None => opts.gamma0 / gnorm,
        };
        let mut step = [0.0; 6];
        for i in 0..6 {
            step[i] = alpha * grad[i];
        }
        let mut snorm = norm(&step);
        if snorm > opts.step_cap {
            let scale = opts.step_cap / snorm;
            for s in &mut step {
                *s *= scale;
            }
            snorm = opts.step_cap;
        }
        let mut next = theta;
        for i in 0..6 {
            next[i] += step[i];
        }
        prev = Some((theta, grad));
        theta = next;
        j = cost(&ExtrinsicParams::from_array(theta));
        grad = numeric_gradient(cost, &ExtrinsicParams::from_array(theta), &opts.delta_h);
        entries.push(TraceEntry {
            theta: ExtrinsicParams::from_array(theta),
            j,
            grad_norm: norm(&grad),
            step_size: snorm,
        });
        if j > best_j {
            best_j = j;
            best_theta = theta;
        }
        if snorm <= opts.epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    // Pin the returned estimate as the final trace entry.
    if best_theta != theta {
        entries.push(TraceEntry {
            theta: ExtrinsicParams::from_array(best_theta),
            j: best_j,
            grad_norm: f64::NAN,
            step_size: 0.0,
        });
    }
    (
        ExtrinsicParams::from_array(best_theta),
        OptimizerTrace { entries, termination },
    )
}
