//! Fusion of per-feature Canny maps into the mixed edge-probability map, and
//! selection of LiDAR edge points.

use crate::error::{Error, Result};
use crate::geometry::{PanoramaCell, Point3};
use crate::image::{BinaryImage, EdgeMap};
use crate::segmentation::LabeledCloud;

/// One selected edge point: cloud index, coordinates, and the edge
/// probability of its panorama cell (always > 0).
#[derive(Debug, Clone)]
pub struct EdgePoint {
    pub index: usize,
    pub point: Point3,
    pub probability: f64,
}

/// Edge points plus the total cloud size N (N_e = `points.len()`).
#[derive(Debug, Clone)]
pub struct EdgePointSet {
    pub points: Vec<EdgePoint>,
    pub total_points: usize,
}

impl EdgePointSet {
    pub fn edge_count(&self) -> usize {
        self.points.len()
    }
}

/// Cell-wise average of the three binary feature edge maps; values land in
/// {0, 1/3, 2/3, 1}.
pub fn mixed_edge_map(
    depth: &BinaryImage,
    reflectivity: &BinaryImage,
    object: &BinaryImage,
) -> Result<EdgeMap> {
    let same = |m: &BinaryImage| m.height == depth.height && m.width == depth.width;
    if !same(reflectivity) || !same(object) {
        return Err(Error::invalid("edge maps must share dimensions"));
    }
    let data = depth
        .data
        .iter()
        .zip(&reflectivity.data)
        .zip(&object.data)
        .map(|((d, r), o)| (*d as u8 + *r as u8 + *o as u8) as f64 / 3.0)
        .collect();
    EdgeMap::new(depth.height, depth.width, data)
}

/// Every point whose panorama cell has positive edge probability enters the
/// set, carrying that probability. Points outside the panorama window never
/// qualify.
pub fn select_edge_points(cloud: &LabeledCloud, mixed: &EdgeMap) -> EdgePointSet {
    let mut points = Vec::new();
    for idx in 0..cloud.len() {
        let PanoramaCell::Cell { i, j } = cloud.cell[idx] else {
            continue;
        };
        let p = mixed.at(j, i);
        if p > 0.0 {
            points.push(EdgePoint { index: idx, point: cloud.points[idx], probability: p });
        }
    }
    EdgePointSet { points, total_points: cloud.len() }
}
