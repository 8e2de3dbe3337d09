//! Point-cloud structuring: RANSAC ground-plane removal, DBSCAN clustering,
//! foreground/background labeling and the occlusion filter.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{PanoramaCell, PanoramaGeometry, Point3};
use crate::image::{close, BinaryImage};

/// Plane Ax + By + Cz + D = 0 with unit normal (A, B, C).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    /// Unsigned point-to-plane distance.
    pub fn distance(&self, p: &Point3) -> f64 {
        (self.a * p.x + self.b * p.y + self.c * p.z + self.d).abs()
    }
}

/// Cloud points with cluster labels, object flags and panorama cells.
///
/// Flags: 2 = foreground cluster, 1 = background (far clusters, noise);
/// 0 is reserved for panorama cells with no point and never appears here.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub points: Vec<Point3>,
    pub cluster_id: Vec<usize>,
    pub object_flag: Vec<u8>,
    pub cell: Vec<PanoramaCell>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A DBSCAN cluster with its mean planar range d_k.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub id: usize,
    pub member_indices: Vec<usize>,
    pub centroid_distance: f64,
}

fn fit_plane(p1: &Point3, p2: &Point3, p3: &Point3) -> Option<(f64, f64, f64, f64)> {
    let (ux, uy, uz) = (p2.x - p1.x, p2.y - p1.y, p2.z - p1.z);
    let (vx, vy, vz) = (p3.x - p1.x, p3.y - p1.y, p3.z - p1.z);
    let (nx, ny, nz) = (uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx);
    let norm = (nx * nx + ny * ny + nz * nz).sqrt();
    if norm < 1e-12 {
        return None; // collinear sample
    }
    let (a, b, c) = (nx / norm, ny / norm, nz / norm);
    Some((a, b, c, -(a * p1.x + b * p1.y + c * p1.z)))
}

/// RANSAC plane fit. Returns the best plane, its inlier indices, and the
/// non-plane index set. Early exit once the inlier ratio exceeds 0.8.
pub fn ransac_plane(
    cloud: &[Point3],
    gamma: f64,
    iterations: usize,
    seed: u64,
) -> Result<(PlaneModel, Vec<usize>, Vec<usize>)> {
    if cloud.len() < 3 {
        return Err(Error::invalid("plane fit needs at least 3 points"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("ransac gamma must be positive"));
    }
    if iterations == 0 {
        return Err(Error::invalid("ransac needs at least 1 iteration"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cloud.len();
    let mut best: Option<(f64, f64, f64, f64)> = None;
    let mut best_count = 0usize;
    for _ in 0..iterations {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        while j == i {
            j = rng.gen_range(0..n);
        }
        let mut k = rng.gen_range(0..n);
        while k == i || k == j {
            k = rng.gen_range(0..n);
        }
        let Some((a, b, c, d)) = fit_plane(&cloud[i], &cloud[j], &cloud[k]) else {
            continue;
        };
        let count = cloud
            .iter()
            .filter(|p| (a * p.x + b * p.y + c * p.z + d).abs() <= gamma)
            .count();
        if count > best_count {
            best_count = count;
            best = Some((a, b, c, d));
            if count as f64 > 0.8 * n as f64 {
                break;
            }
        }
    }
    let Some((mut a, mut b, mut c, mut d)) = best else {
        return Err(Error::NoPlane);
    };
    // Orient the normal upward so downstream checks are sign-stable.
    if c < 0.0 {
        a = -a;
        b = -b;
        c = -c;
        d = -d;
    }
    let model = PlaneModel { a, b, c, d, inlier_count: best_count };
    let mut inliers = Vec::new();
    let mut psi1 = Vec::new();
    for (idx, p) in cloud.iter().enumerate() {
        if model.distance(p) <= gamma {
            inliers.push(idx);
        } else {
            psi1.push(idx);
        }
    }
    Ok((model, inliers, psi1))
}

struct GridHash {
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    inv: f64,
}

impl GridHash {
    fn build(points: &[Point3], radius: f64) -> Self {
        let inv = 1.0 / radius;
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry((
                    (p.x * inv).floor() as i64,
                    (p.y * inv).floor() as i64,
                    (p.z * inv).floor() as i64,
                ))
                .or_default()
                .push(i);
        }
        GridHash { cells, inv }
    }

    /// Visits every point within `radius` of `p` in ascending index order
    /// within each grid cell (cells scanned in a fixed order).
    fn for_each_neighbor(
        &self,
        points: &[Point3],
        p: &Point3,
        radius: f64,
        mut f: impl FnMut(usize),
    ) {
        let (cx, cy, cz) = (
            (p.x * self.inv).floor() as i64,
            (p.y * self.inv).floor() as i64,
            (p.z * self.inv).floor() as i64,
        );
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        let q = &points[j];
                        let (ex, ey, ez) = (q.x - p.x, q.y - p.y, q.z - p.z);
                        if ex * ex + ey * ey + ez * ez <= r2 {
                            f(j);
                        }
                    }
                }
            }
        }
    }
}

/// Density-based clustering. Returns one cluster id per point: 0 for noise,
/// 1..K otherwise.
///
/// Labeling is fully deterministic and order-pinned: cluster ids follow the
/// ascending order of each cluster's smallest core-point index, and a border
/// point joins the cluster of its smallest-index core neighbor. A point is a
/// core point when at least `min_pts` points (itself included) lie within
/// `radius`.
pub fn dbscan(points: &[Point3], radius: f64, min_pts: usize) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("dbscan radius must be positive"));
    }
    if min_pts < 1 {
        return Err(Error::invalid("dbscan min_pts must be at least 1"));
    }
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let grid = GridHash::build(points, radius);
    let mut core = vec![false; n];
    for i in 0..n {
        let mut count = 0usize;
        grid.for_each_neighbor(points, &points[i], radius, |_| count += 1);
        core[i] = count >= min_pts;
    }
    let mut labels = vec![0usize; n];
    let mut next_id = 0usize;
    let mut stack = Vec::new();
    for i in 0..n {
        if !core[i] || labels[i] != 0 {
            continue;
        }
        next_id += 1;
        labels[i] = next_id;
        stack.push(i);
        while let Some(j) = stack.pop() {
            grid.for_each_neighbor(points, &points[j], radius, |k| {
                if core[k] && labels[k] == 0 {
                    labels[k] = next_id;
                    stack.push(k);
                }
            });
        }
    }
    // Border points: claimed by the smallest-index core neighbor's cluster.
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<usize> = None;
        grid.for_each_neighbor(points, &points[i], radius, |k| {
            if core[k] && best.map_or(true, |b| k < b) {
                best = Some(k);
            }
        });
        labels[i] = best.map_or(0, |k| labels[k]);
    }
    Ok(labels)
}

/// Groups labeled points into clusters with their mean planar range d_k.
/// Noise (label 0) is not returned as a cluster.
pub fn build_clusters(points: &[Point3], labels: &[usize]) -> Vec<Cluster> {
    let k = labels.iter().cloned().max().unwrap_or(0);
    let mut clusters: Vec<Cluster> = (1..=k)
        .map(|id| Cluster { id, member_indices: Vec::new(), centroid_distance: 0.0 })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            clusters[l - 1].member_indices.push(i);
        }
    }
    for c in &mut clusters {
        let sum: f64 = c.member_indices.iter().map(|&i| points[i].planar_range()).sum();
        if !c.member_indices.is_empty() {
            c.centroid_distance = sum / c.member_indices.len() as f64;
        }
    }
    clusters
}

/// Per-cluster object flags: 2 (foreground) when d_k < delta, else 1.
pub fn classify_clusters(clusters: &[Cluster], delta: f64) -> Result<Vec<u8>> {
    if !(delta > 0.0) {
        return Err(Error::invalid("foreground threshold delta must be positive"));
    }
    clusters
        .iter()
        .map(|c| {
            if c.member_indices.is_empty() {
                Err(Error::invalid("cluster has no members"))
            } else {
                Ok(if c.centroid_distance < delta { 2 } else { 1 })
            }
        })
        .collect()
}

/// Removes background points hidden behind foreground objects: the binary
/// foreground panorama is morphologically closed, and every flag-1 point
/// whose cell falls inside the closed mask is dropped. Flag-2 points are
/// never removed.
pub fn occlusion_filter(
    cloud: &LabeledCloud,
    geom: &PanoramaGeometry,
    kernel_radius: usize,
) -> LabeledCloud {
    let mut fg = BinaryImage::empty(geom.height, geom.width);
    for (flag, cell) in cloud.object_flag.iter().zip(&cloud.cell) {
        if let (2, PanoramaCell::Cell { i, j }) = (flag, cell) {
            fg.set(*j, *i, true);
        }
    }
    let mask = close(&fg, kernel_radius);
    let mut out = LabeledCloud {
        points: Vec::new(),
        cluster_id: Vec::new(),
        object_flag: Vec::new(),
        cell: Vec::new(),
    };
    for idx in 0..cloud.len() {
        let drop = cloud.object_flag[idx] == 1
            && matches!(cloud.cell[idx], PanoramaCell::Cell { i, j } if mask.at(j, i));
        if !drop {
            out.points.push(cloud.points[idx]);
            out.cluster_id.push(cloud.cluster_id[idx]);
            out.object_flag.push(cloud.object_flag[idx]);
            out.cell.push(cloud.cell[idx]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64, z: f64) -> Point3 {
        Point3 { x, y, z, reflectivity: 0.5 }
    }

    #[test]
    fn ransac_recovers_ground_plane() {
        let mut cloud = Vec::new();
        for i in 0..1000 {
            let a = (i % 40) as f64 * 0.5 - 10.0;
            let b = (i / 40) as f64 * 0.5 - 6.0;
            cloud.push(pt(a, b, 0.0));
        }
        for i in 0..50 {
            cloud.push(pt(i as f64 * 0.1, 1.0, 5.0));
        }
        let (plane, inliers, psi1) = ransac_plane(&cloud, 0.2, 300, 7).unwrap();
        let angle = plane.c.abs().clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 1.0, "normal off by {angle} deg");
        assert_eq!(inliers.len(), 1000);
        assert_eq!(psi1, (1000..1050).collect::<Vec<_>>());
        assert!((plane.a * plane.a + plane.b * plane.b + plane.c * plane.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ransac_point_on_plane_is_inlier() {
        let plane = PlaneModel { a: 0.0, b: 0.0, c: 1.0, d: 0.0, inlier_count: 0 };
        assert_eq!(plane.distance(&pt(3.0, -2.0, 0.0)), 0.0);
        assert!((plane.distance(&pt(0.0, 0.0, 0.5)) - 0.5).abs() < 1e-15);
        assert!(plane.distance(&pt(0.0, 0.0, 0.5)) > 0.2);
    }

    #[test]
    fn ransac_is_seed_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud: Vec<Point3> = (0..200)
            .map(|_| pt(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.0..0.05)))
            .collect();
        let a = ransac_plane(&cloud, 0.2, 100, 42).unwrap();
        let b = ransac_plane(&cloud, 0.2, 100, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn ransac_all_collinear_is_no_plane() {
        let cloud: Vec<Point3> = (0..10).map(|i| pt(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(ransac_plane(&cloud, 0.2, 50, 1), Err(Error::NoPlane)));
    }

    fn two_groups() -> Vec<Point3> {
        let mut pts = Vec::new();
        for g in 0..2 {
            let off = g as f64 * 5.0;
            for i in 0..5 {
                for j in 0..2 {
                    pts.push(pt(off + i as f64 * 0.1, j as f64 * 0.1, 0.0));
                }
            }
        }
        pts
    }

    #[test]
    fn dbscan_two_groups() {
        let labels = dbscan(&two_groups(), 0.25, 8).unwrap();
        assert_eq!(labels.iter().cloned().max(), Some(2));
        assert!(labels.iter().all(|&l| l > 0));
        assert!(labels[..10].iter().all(|&l| l == 1));
        assert!(labels[10..].iter().all(|&l| l == 2));
    }

    #[test]
    fn dbscan_isolated_point_is_noise() {
        let mut pts = two_groups();
        pts.push(pt(100.0, 0.0, 0.0));
        let labels = dbscan(&pts, 0.25, 8).unwrap();
        assert_eq!(labels[20], 0);
    }

    #[test]
    fn dbscan_empty_input() {
        assert!(dbscan(&[], 0.25, 8).unwrap().is_empty());
    }

    /// Independent brute-force reference: core flags by O(n^2) counting,
    /// clusters as reachability closure via union-find over core pairs,
    /// border points to their smallest-index core neighbor.
    fn dbscan_oracle(points: &[Point3], radius: f64, min_pts: usize) -> Vec<usize> {
        let n = points.len();
        let r2 = radius * radius;
        let near = |a: usize, b: usize| {
            let (dx, dy, dz) = (
                points[a].x - points[b].x,
                points[a].y - points[b].y,
                points[a].z - points[b].z,
            );
            dx * dx + dy * dy + dz * dz <= r2
        };
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
            .collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            for j in i + 1..n {
                if core[i] && core[j] && near(i, j) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut labels = vec![0usize; n];
        let mut next = 0usize;
        let mut id_of_root: std::collections::HashMap<usize, usize> = Default::default();
        for i in 0..n {
            if core[i] {
                let r = find(&mut parent, i);
                let id = *id_of_root.entry(r).or_insert_with(|| {
                    next += 1;
                    next
                });
                labels[i] = id;
            }
        }
        for i in 0..n {
            if !core[i] {
                labels[i] = (0..n)
                    .find(|&j| core[j] && near(i, j))
                    .map_or(0, |j| labels[j]);
            }
        }
        labels
    }

    #[test]
    fn dbscan_matches_bruteforce_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let n = rng.gen_range(1..60);
            let pts: Vec<Point3> = (0..n)
                .map(|_| {
                    pt(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-0.3..0.3),
                    )
                })
                .collect();
            let m = rng.gen_range(2..6);
            let got = dbscan(&pts, 0.25, m).unwrap();
            let want = dbscan_oracle(&pts, 0.25, m);
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn classify_by_mean_planar_range() {
        let pts = vec![pt(3.0, 0.0, 2.0), pt(0.0, 3.0, -1.0), pt(30.0, 0.0, 0.0), pt(4.0, 0.0, 0.0), pt(6.0, 0.0, 9.0)];
        let labels = vec![1, 1, 2, 3, 3];
        let clusters = build_clusters(&pts, &labels);
        assert_eq!(clusters.len(), 3);
        assert!((clusters[0].centroid_distance - 3.0).abs() < 1e-12);
        assert!((clusters[2].centroid_distance - 5.0).abs() < 1e-12);
        let flags = classify_clusters(&clusters, 10.0).unwrap();
        assert_eq!(flags, vec![2, 1, 2]);
    }

    #[test]
    fn classify_order_invariant() {
        let pts = vec![pt(4.0, 0.0, 0.0), pt(6.0, 0.0, 0.0)];
        let a = build_clusters(&pts, &[1, 1]);
        let rev = vec![pt(6.0, 0.0, 0.0), pt(4.0, 0.0, 0.0)];
        let b = build_clusters(&rev, &[1, 1]);
        assert_eq!(a[0].centroid_distance, b[0].centroid_distance);
    }

    #[test]
    fn classify_rejects_empty_cluster() {
        let clusters = vec![Cluster { id: 1, member_indices: vec![], centroid_distance: 0.0 }];
        assert!(classify_clusters(&clusters, 10.0).is_err());
    }

    fn geom() -> PanoramaGeometry {
        PanoramaGeometry::new(1.0, 1.0_f64.to_radians(), 1.0_f64.to_radians(), -30.0_f64.to_radians(), 30.0_f64.to_radians(), -15.0_f64.to_radians(), 15.0_f64.to_radians()).unwrap()
    }

    fn labeled(cells: &[(usize, usize, u8)]) -> LabeledCloud {
        LabeledCloud {
            points: cells.iter().map(|_| pt(1.0, 0.0, 0.0)).collect(),
            cluster_id: cells.iter().map(|&(_, _, f)| if f == 2 { 1 } else { 0 }).collect(),
            object_flag: cells.iter().map(|&(_, _, f)| f).collect(),
            cell: cells.iter().map(|&(i, j, _)| PanoramaCell::Cell { i, j }).collect(),
        }
    }

    #[test]
    fn occlusion_no_foreground_is_identity() {
        let cloud = labeled(&[(5, 5, 1), (10, 10, 1), (20, 3, 1)]);
        let out = occlusion_filter(&cloud, &geom(), 2);
        assert_eq!(out.len(), cloud.len());
    }

    #[test]
    fn occlusion_removes_background_inside_blob() {
        // Foreground blob covering a 3x3 cell patch; one background point in
        // the middle of it, one far away.
        let mut cells: Vec<(usize, usize, u8)> = Vec::new();
        for i in 10..13 {
            for j in 10..13 {
                if (i, j) != (11, 11) {
                    cells.push((i, j, 2));
                }
            }
        }
        cells.push((11, 11, 1)); // hidden background point
        cells.push((30, 11, 1)); // far background point
        let cloud = labeled(&cells);
        let out = occlusion_filter(&cloud, &geom(), 2);
        assert_eq!(out.len(), cloud.len() - 1);
        assert!(out.object_flag.iter().zip(&out.cell).all(|(f, c)| {
            *f != 1 || !matches!(c, PanoramaCell::Cell { i: 11, j: 11 })
        }));
        // The far point survives: it sits more than 2*kernel_radius+2 cells
        // from any foreground cell, beyond the reach of closing.
        assert!(out.cell.iter().any(|c| matches!(c, PanoramaCell::Cell { i: 30, j: 11 })));
    }

    #[test]
    fn occlusion_never_removes_foreground() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cells: Vec<(usize, usize, u8)> = (0..200)
            .map(|_| {
                (
                    rng.gen_range(0..61),
                    rng.gen_range(0..31),
                    if rng.gen_bool(0.5) { 2 } else { 1 },
                )
            })
            .collect();
        let cloud = labeled(&cells);
        let out = occlusion_filter(&cloud, &geom(), 2);
        let fg_in = cloud.object_flag.iter().filter(|&&f| f == 2).count();
        let fg_out = out.object_flag.iter().filter(|&&f| f == 2).count();
        assert_eq!(fg_in, fg_out);
        assert!(out.len() >= fg_out);
    }
}
