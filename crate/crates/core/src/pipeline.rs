//! End-to-end calibration driver: camera preprocessing, point-cloud
//! structuring, panorama densification, edge fusion, and optimization.

use crate::densify::{build_sparse_panorama, tv_inpaint, DensePanorama, FeatureTag};
use crate::edges::{mixed_edge_map, select_edge_points, EdgePointSet};
use crate::error::{Error, Result};
use crate::geometry::{
    cylindrical_project, CameraIntrinsics, ExtrinsicParams, PanoramaCell, Point3,
};
use crate::image::{camera_edge_map, canny, BinaryImage, EdgeMap, GrayImage};
use crate::io::PipelineConfig;
use crate::objective::{bb_ascent, evaluate_cost, BbOptions, CalibrationResult};
use crate::segmentation::{
    build_clusters, classify_clusters, dbscan, occlusion_filter, ransac_plane, LabeledCloud,
    PlaneModel,
};

/// Every intermediate product of one frame, up to the edge point set.
pub struct FrameArtifacts {
    pub camera_edges: EdgeMap,
    pub plane: PlaneModel,
    /// All points, labeled, before occlusion filtering.
    pub labeled: LabeledCloud,
    /// Points surviving the occlusion filter.
    pub filtered: LabeledCloud,
    pub dense: Vec<DensePanorama>,
    pub feature_edges: Vec<BinaryImage>,
    pub mixed: EdgeMap,
    pub edge_points: EdgePointSet,
}

/// Runs everything that does not depend on the extrinsic estimate.
pub fn prepare_frame(
    cloud: &[Point3],
    image: &GrayImage,
    cfg: &PipelineConfig,
) -> Result<FrameArtifacts> {
    cfg.validate()?;
    let camera_edges = camera_edge_map(image, cfg.edge_sigma)?;

    let (plane, _inliers, psi1) =
        ransac_plane(cloud, cfg.ransac_gamma, cfg.ransac_iterations, cfg.seed)?;

    // Cluster the non-plane points; everything else stays background.
    let object_points: Vec<Point3> = psi1.iter().map(|&i| cloud[i]).collect();
    let labels = dbscan(&object_points, cfg.dbscan_radius, cfg.dbscan_min_pts)?;
    let clusters = build_clusters(&object_points, &labels);
    let flags = classify_clusters(&clusters, cfg.foreground_delta)?;

    let mut cluster_id = vec![0usize; cloud.len()];
    let mut object_flag = vec![1u8; cloud.len()];
    for (sub, &orig) in psi1.iter().enumerate() {
        let l = labels[sub];
        cluster_id[orig] = l;
        if l > 0 {
            object_flag[orig] = flags[l - 1];
        }
    }

    let geom = cfg.panorama_geometry()?;
    let cell = cloud
        .iter()
        .map(|p| cylindrical_project(p, &geom).unwrap_or(PanoramaCell::OutOfRange))
        .collect();
    let labeled = LabeledCloud { points: cloud.to_vec(), cluster_id, object_flag, cell };
    let filtered = occlusion_filter(&labeled, &geom, cfg.occlusion_kernel_radius);

    let thresholds = [
        (cfg.canny_depth_low, cfg.canny_depth_high),
        (cfg.canny_refl_low, cfg.canny_refl_high),
        (cfg.canny_object_low, cfg.canny_object_high),
    ];
    let mut dense = Vec::new();
    let mut feature_edges = Vec::new();
    for (feature, (low, high)) in
        [FeatureTag::Depth, FeatureTag::Reflectivity, FeatureTag::Object]
            .into_iter()
            .zip(thresholds)
    {
        let sparse = build_sparse_panorama(&filtered, feature, geom.height, geom.width);
        let dm = tv_inpaint(&sparse, cfg.tv_lambda, cfg.tv_max_iter, cfg.tv_tol)?;
        // Scale to a unit range so Canny thresholds mean the same thing for
        // every feature channel.
        let max = dm.values.iter().cloned().fold(0.0, f64::max);
        let normalized: Vec<f64> = if max > 0.0 {
            dm.values.iter().map(|v| v / max).collect()
        } else {
            dm.values.clone()
        };
        let e = canny(geom.height, geom.width, &normalized, cfg.canny_sigma, low, high)?;
        dense.push(dm);
        feature_edges.push(e);
    }
    let mixed = mixed_edge_map(&feature_edges[0], &feature_edges[1], &feature_edges[2])?;
    let edge_points = select_edge_points(&filtered, &mixed);

    Ok(FrameArtifacts {
        camera_edges,
        plane,
        labeled,
        filtered,
        dense,
        feature_edges,
        mixed,
        edge_points,
    })
}

/// Optimizes the extrinsics from `theta0` on already-prepared artifacts.
pub fn optimize(
    artifacts: &FrameArtifacts,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    theta0: &ExtrinsicParams,
) -> Result<CalibrationResult> {
    if artifacts.edge_points.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    let opts = BbOptions {
        epsilon: cfg.bb_epsilon,
        max_iter: cfg.bb_max_iter,
        delta_h: cfg.bb_delta_h(),
        gamma0: cfg.bb_gamma0,
        step_cap: cfg.bb_step_cap,
    };
    let mut cost = |theta: &ExtrinsicParams| {
        evaluate_cost(theta, &artifacts.edge_points, &artifacts.camera_edges, k, cfg.match_threshold)
            .map(|c| c.j)
            .unwrap_or(f64::NAN)
    };
    let (theta, trace) = bb_ascent(&mut cost, theta0, &opts);
    let breakdown = evaluate_cost(
        &theta,
        &artifacts.edge_points,
        &artifacts.camera_edges,
        k,
        cfg.match_threshold,
    )?;
    Ok(CalibrationResult { theta, cost: breakdown, trace, config: cfg.to_pairs() })
}

/// Full single-frame calibration.
pub fn calibrate_frame(
    cloud: &[Point3],
    image: &GrayImage,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    theta0: &ExtrinsicParams,
) -> Result<CalibrationResult> {
    let artifacts = prepare_frame(cloud, image, cfg)?;
    optimize(&artifacts, k, cfg, theta0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render_camera, render_lidar, SceneSpec};

    fn tuned_config() -> PipelineConfig {
        PipelineConfig::tuned_synthetic(7)
    }

    #[test]
    fn pipeline_structures_a_synthetic_frame() {
        let spec = SceneSpec::urban(0);
        let cloud = render_lidar(&spec, 1000);
        let image = render_camera(&spec).unwrap();
        let cfg = tuned_config();
        let art = prepare_frame(&cloud, &image, &cfg).unwrap();
        // The ground plane is found horizontal.
        assert!(art.plane.c > 0.99, "ground normal c = {}", art.plane.c);
        // Foreground clusters and background both survive.
        let fg = art.filtered.object_flag.iter().filter(|&&f| f == 2).count();
        let bg = art.filtered.object_flag.iter().filter(|&&f| f == 1).count();
        assert!(fg > 500, "foreground points: {fg}");
        assert!(bg > 500, "background points: {bg}");
        assert!(art.filtered.len() <= art.labeled.len());
        // Edge points exist and carry 4-level probabilities.
        assert!(art.edge_points.edge_count() > 100);
        for p in &art.edge_points.points {
            assert!(p.probability > 0.0 && p.probability <= 1.0);
        }
    }

    #[test]
    fn calibration_from_truth_stays_at_truth() {
        let spec = SceneSpec::urban(0);
        let cloud = render_lidar(&spec, 1000);
        let image = render_camera(&spec).unwrap();
        let cfg = tuned_config();
        let k = spec.intrinsics().unwrap();
        let result = calibrate_frame(&cloud, &image, &k, &cfg, &spec.theta_true).unwrap();
        let err: Vec<f64> = result
            .theta
            .to_array()
            .iter()
            .zip(spec.theta_true.to_array())
            .map(|(a, b)| (a - b).abs())
            .collect();
        for (i, e) in err.iter().enumerate() {
            let bound = if i < 3 { 0.012 } else { 0.05 };
            assert!(*e <= bound, "component {i} drifted {e}");
        }
    }
}
