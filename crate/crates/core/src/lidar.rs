//! Geometric pole detection in LiDAR clouds.
//!
//! The pipeline is deliberately simple and runs in four stages:
//! 1. ground removal by an iteratively refit least-squares plane,
//! 2. Euclidean clustering of the remaining points,
//! 3. PCA shape features per cluster,
//! 4. a strict linearity / tilt / height / thickness gate.
//!
//! Everything works in the sensor frame of the cloud; callers transform the
//! resulting 2D detections wherever they need them.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// A raw 3D point cloud in the sensor frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CloudRow {
    x: f64,
    y: f64,
    z: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads a cloud from CSV with header `x,y,z` (meters).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let row: CloudRow = row?;
            points.push(Point3::new(row.x, row.y, row.z));
        }
        Ok(Self { points })
    }

    /// Writes the cloud as CSV with header `x,y,z`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        for p in &self.points {
            wtr.serialize(CloudRow { x: p.x, y: p.y, z: p.z })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Ground plane `z = a*x + b*y + c` fitted by least squares.
#[derive(Debug, Clone, Copy)]
pub struct GroundModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GroundModel {
    /// Orthogonal distance from a point to the plane.
    #[inline]
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        (self.a * p.x + self.b * p.y + self.c - p.z).abs()
            / (self.a * self.a + self.b * self.b + 1.0).sqrt()
    }

    /// Angle between the plane normal and the vertical axis.
    pub fn tilt(&self) -> f64 {
        (self.a * self.a + self.b * self.b).sqrt().atan()
    }
}

/// Ground / non-ground split of a cloud.
#[derive(Debug, Clone)]
pub struct GroundSplit {
    pub ground: Vec<usize>,
    pub rest: Vec<usize>,
    pub plane: GroundModel,
}

/// Parameters of the ground-removal stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundParams {
    /// Seed window above the lowest point [m].
    pub seed_height: f64,
    /// Inlier distance to the fitted plane [m].
    pub plane_tol: f64,
    /// Number of refit passes after the seed fit.
    pub iterations: usize,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self { seed_height: 0.3, plane_tol: 0.1, iterations: 3 }
    }
}

/// Maximum plane tilt accepted as ground (steeper fits are walls, not roads).
const MAX_GROUND_TILT: f64 = 30.0 * std::f64::consts::PI / 180.0;

fn fit_plane(cloud: &PointCloud, idx: &[usize]) -> Result<GroundModel> {
    // Normal equations for z = a*x + b*y + c.
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for &i in idx {
        let p = cloud.points[i];
        let row = Vector3::new(p.x, p.y, 1.0);
        m += row * row.transpose();
        rhs += row * p.z;
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::NoGroundPlane)?;
    if !(sol.x.is_finite() && sol.y.is_finite() && sol.z.is_finite()) {
        return Err(Error::NoGroundPlane);
    }
    Ok(GroundModel { a: sol.x, b: sol.y, c: sol.z })
}

/// Splits a cloud into ground and non-ground points.
///
/// Points within `seed_height` of the lowest point seed a least-squares
/// plane; the inlier set and the fit are then refined for a fixed number of
/// passes. Fails with [`Error::NoGroundPlane`] when fewer than 3 points seed
/// the fit, the fit degenerates, or the fitted plane leans more than 30 deg
/// away from horizontal.
pub fn remove_ground(cloud: &PointCloud, params: &GroundParams) -> Result<GroundSplit> {
    if cloud.is_empty() {
        return Err(Error::domain("remove_ground: empty cloud"));
    }
    let min_z = cloud.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let seeds: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.points[i].z <= min_z + params.seed_height)
        .collect();
    if seeds.len() < 3 {
        return Err(Error::NoGroundPlane);
    }
    let mut plane = fit_plane(cloud, &seeds)?;
    for _ in 0..params.iterations {
        let inliers: Vec<usize> = (0..cloud.len())
            .filter(|&i| plane.distance(&cloud.points[i]) <= params.plane_tol)
            .collect();
        if inliers.len() < 3 {
            return Err(Error::NoGroundPlane);
        }
        plane = fit_plane(cloud, &inliers)?;
    }
    if plane.tilt() >= MAX_GROUND_TILT {
        return Err(Error::NoGroundPlane);
    }
    let mut in_ground = vec![false; cloud.len()];
    let inliers: Vec<usize> = (0..cloud.len())
        .filter(|&i| plane.distance(&cloud.points[i]) <= params.plane_tol)
        .collect();
    for &i in &inliers {
        in_ground[i] = true;
    }
    let rest = (0..cloud.len()).filter(|&i| !in_ground[i]).collect();
    Ok(GroundSplit { ground: inliers, rest, plane })
}

/// PCA shape features of one cluster.
#[derive(Debug, Clone, Copy)]
pub struct ClusterFeatures {
    /// Eigenvalues of the covariance, sorted `l1 >= l2 >= l3 >= 0`.
    pub eigenvalues: [f64; 3],
    /// Unit eigenvector of the largest eigenvalue.
    pub principal_axis: Vector3<f64>,
    /// Vertical extent max(z) - min(z) [m].
    pub height: f64,
    /// Twice the largest horizontal distance to the 2D centroid [m].
    pub thickness: f64,
    /// Mean (x, y) of the cluster.
    pub centroid_2d: Point2<f64>,
}

impl ClusterFeatures {
    /// Linearity `(l1 - l2) / l1`, in `[0, 1]`; 0 for degenerate clusters.
    pub fn linearity(&self) -> f64 {
        let l1 = self.eigenvalues[0];
        if l1 <= f64::EPSILON {
            return 0.0;
        }
        (l1 - self.eigenvalues[1]) / l1
    }

    /// Tilt of the principal axis away from vertical, in `[0, pi/2]`.
    pub fn tilt(&self) -> f64 {
        self.principal_axis.z.abs().clamp(0.0, 1.0).acos()
    }
}

/// One Euclidean cluster: point indices into the source cloud plus features
/// once they have been computed.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub indices: Vec<usize>,
    pub features: Option<ClusterFeatures>,
}

/// Groups points into clusters where two points belong together iff they are
/// connected by a chain of hops no longer than `link_radius`. Clusters
/// smaller than `min_points` are dropped. Output clusters are sorted by their
/// smallest point index, and indices within a cluster ascend.
pub fn cluster_euclidean(
    cloud: &PointCloud,
    indices: &[usize],
    link_radius: f64,
    min_points: usize,
) -> Result<Vec<Cluster>> {
    if !(link_radius > 0.0) {
        return Err(Error::domain(format!("link radius must be positive, got {link_radius}")));
    }
    let cell = link_radius;
    let key = |p: &Point3<f64>| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for &i in indices {
        grid.entry(key(&cloud.points[i])).or_default().push(i);
    }
    let r2 = link_radius * link_radius;
    let mut visited: HashMap<usize, bool> = indices.iter().map(|&i| (i, false)).collect();
    let mut clusters = Vec::new();
    for &start in indices {
        if visited[&start] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = vec![start];
        *visited.get_mut(&start).unwrap() = true;
        while let Some(i) = queue.pop() {
            members.push(i);
            let p = cloud.points[i];
            let (kx, ky, kz) = key(&p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&(kx + dx, ky + dy, kz + dz)) else {
                            continue;
                        };
                        for &j in bucket {
                            if !visited[&j] && (cloud.points[j] - p).norm_squared() <= r2 {
                                *visited.get_mut(&j).unwrap() = true;
                                queue.push(j);
                            }
                        }
                    }
                }
            }
        }
        if members.len() >= min_points {
            members.sort_unstable();
            clusters.push(Cluster { indices: members, features: None });
        }
    }
    clusters.sort_by_key(|c| c.indices[0]);
    Ok(clusters)
}

/// Computes PCA shape features for a set of points. Needs at least 3 points.
pub fn pca_features(points: &[Point3<f64>]) -> Result<ClusterFeatures> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let eigenvalues = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    ];
    let principal_axis = eig.eigenvectors.column(order[0]).into_owned();
    let (mut z_min, mut z_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        z_min = z_min.min(p.z);
        z_max = z_max.max(p.z);
    }
    let centroid_2d = Point2::new(mean.x, mean.y);
    let max_r = points
        .iter()
        .map(|p| (Point2::new(p.x, p.y) - centroid_2d).norm())
        .fold(0.0, f64::max);
    Ok(ClusterFeatures {
        eigenvalues,
        principal_axis,
        height: z_max - z_min,
        thickness: 2.0 * max_r,
        centroid_2d,
    })
}

/// Acceptance gate for pole-like clusters. All four comparisons are strict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoleGate {
    /// Lower bound on PCA linearity.
    pub min_linearity: f64,
    /// Upper bound on principal-axis tilt from vertical [rad].
    pub max_tilt: f64,
    /// Lower bound on cluster height [m].
    pub min_height: f64,
    /// Upper bound on cluster thickness [m].
    pub max_thickness: f64,
}

impl Default for PoleGate {
    fn default() -> Self {
        Self { min_linearity: 0.9, max_tilt: 0.25, min_height: 1.0, max_thickness: 0.6 }
    }
}

/// True when the cluster passes every gate with a strict inequality.
pub fn classify_pole(f: &ClusterFeatures, gate: &PoleGate) -> bool {
    f.linearity() > gate.min_linearity
        && f.tilt() < gate.max_tilt
        && f.height > gate.min_height
        && f.thickness < gate.max_thickness
}

/// One detected pole in the sensor frame: 2D footprint center plus an
/// isotropic position covariance.
#[derive(Debug, Clone, Copy)]
pub struct PoleDetection {
    pub position: Point2<f64>,
    pub covariance: Matrix2<f64>,
}

/// All pole detections extracted from one LiDAR frame.
#[derive(Debug, Clone, Default)]
pub struct PoleDetectionSet {
    pub detections: Vec<PoleDetection>,
}

impl PoleDetectionSet {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Full detector configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorParams {
    pub ground: GroundParams,
    /// Chain-connectivity radius for clustering [m].
    pub link_radius: f64,
    /// Minimum points for a cluster to be considered at all.
    pub min_cluster_points: usize,
    pub gate: PoleGate,
    /// 1-sigma of the reported detection position [m].
    pub sigma: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            ground: GroundParams::default(),
            link_radius: 0.5,
            min_cluster_points: 8,
            gate: PoleGate::default(),
            sigma: 0.15,
        }
    }
}

/// Per-frame diagnostics of [`detect_poles`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectReport {
    /// False when no ground plane was found and the whole cloud was kept.
    pub ground_found: bool,
    pub clusters: usize,
    pub rejected: usize,
}

/// Runs the full detector on one cloud.
///
/// A failed ground fit is downgraded to a warning: clustering then runs on
/// the whole cloud. An empty cloud yields an empty detection set.
pub fn detect_poles(cloud: &PointCloud, params: &DetectorParams) -> Result<(PoleDetectionSet, DetectReport)> {
    let mut report = DetectReport::default();
    if cloud.is_empty() {
        return Ok((PoleDetectionSet::default(), report));
    }
    let rest: Vec<usize> = match remove_ground(cloud, &params.ground) {
        Ok(split) => {
            report.ground_found = true;
            split.rest
        }
        Err(Error::NoGroundPlane) => {
            log::warn!("detect_poles: no ground plane found, clustering the whole cloud");
            (0..cloud.len()).collect()
        }
        Err(e) => return Err(e),
    };
    let mut clusters = cluster_euclidean(cloud, &rest, params.link_radius, params.min_cluster_points)?;
    report.clusters = clusters.len();
    let var = params.sigma * params.sigma;
    let mut detections = Vec::new();
    for c in &mut clusters {
        let pts: Vec<Point3<f64>> = c.indices.iter().map(|&i| cloud.points[i]).collect();
        let f = pca_features(&pts)?;
        c.features = Some(f);
        if classify_pole(&f, &params.gate) {
            detections.push(PoleDetection {
                position: f.centroid_2d,
                covariance: Matrix2::from_diagonal_element(var),
            });
        } else {
            report.rejected += 1;
        }
    }
    Ok((PoleDetectionSet { detections }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn sample_cylinder(
        rng: &mut ChaCha12Rng,
        center: Point2<f64>,
        radius: f64,
        z0: f64,
        height: f64,
        n: usize,
    ) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..2.0 * PI);
                let z = rng.random_range(0.0..height);
                Point3::new(
                    center.x + radius * a.cos() + rng.random_range(-0.005..0.005),
                    center.y + radius * a.sin() + rng.random_range(-0.005..0.005),
                    z0 + z,
                )
            })
            .collect()
    }

    fn sample_ground(rng: &mut ChaCha12Rng, half: f64, z: f64, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    z + rng.random_range(-0.02..0.02),
                )
            })
            .collect()
    }

    #[test]
    fn cloud_csv_round_trip() {
        let cloud = PointCloud::new(vec![Point3::new(1.5, -2.0, 0.25), Point3::new(0.0, 0.5, 3.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        cloud.to_csv(&path).unwrap();
        let back = PointCloud::from_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_relative_eq!(back.points[0].x, 1.5);
        assert_relative_eq!(back.points[1].z, 3.0);
    }

    #[test]
    fn ground_split_separates_plane_from_pole() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut pts = sample_ground(&mut rng, 10.0, -1.8, 800);
        let n_ground = pts.len();
        pts.extend(sample_cylinder(&mut rng, Point2::new(3.0, 1.0), 0.1, -1.6, 3.0, 200));
        let cloud = PointCloud::new(pts);
        let split = remove_ground(&cloud, &GroundParams::default()).unwrap();
        // Every labeled ground point is near the true plane; the pole points
        // (starting at z = -1.6, clear of the 0.1 m tolerance band) are kept.
        assert!(split.ground.iter().all(|&i| (cloud.points[i].z + 1.8).abs() < 0.15));
        assert!(split.ground.len() >= n_ground - 5);
        assert!(split.rest.len() >= 190);
        assert!(split.plane.tilt() < 0.05);
    }

    #[test]
    fn two_points_cannot_seed_a_plane() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(remove_ground(&cloud, &GroundParams::default()), Err(Error::NoGroundPlane)));
    }

    #[test]
    fn steep_slope_is_not_ground() {
        // A 45 deg ramp: every point satisfies z = x.
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let pts: Vec<Point3<f64>> = (0..500)
            .map(|_| {
                let x = rng.random_range(-5.0..5.0);
                let y = rng.random_range(-5.0..5.0);
                Point3::new(x, y, x + rng.random_range(-0.01..0.01))
            })
            .collect();
        let r = remove_ground(&PointCloud::new(pts), &GroundParams::default());
        assert!(matches!(r, Err(Error::NoGroundPlane)));
    }

    #[test]
    fn empty_cloud_is_a_domain_error() {
        assert!(matches!(
            remove_ground(&PointCloud::default(), &GroundParams::default()),
            Err(Error::Domain(_))
        ));
    }

    /// O(n^2) union-find clustering used as the oracle.
    fn cluster_oracle(cloud: &PointCloud, idx: &[usize], link: f64) -> Vec<Vec<usize>> {
        let mut parent: HashMap<usize, usize> = idx.iter().map(|&i| (i, i)).collect();
        fn find(parent: &mut HashMap<usize, usize>, i: usize) -> usize {
            let p = parent[&i];
            if p == i {
                return i;
            }
            let r = find(parent, p);
            parent.insert(i, r);
            r
        }
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                if (cloud.points[i] - cloud.points[j]).norm() <= link {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent.insert(ri, rj);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for &i in idx {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups
            .into_values()
            .map(|mut v| {
                v.sort_unstable();
                v
            })
            .collect();
        out.sort_by_key(|v| v[0]);
        out
    }

    #[test]
    fn clustering_matches_union_find_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for _ in 0..20 {
            let pts: Vec<Point3<f64>> = (0..250)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-4.0..4.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let cloud = PointCloud::new(pts);
            let idx: Vec<usize> = (0..cloud.len()).collect();
            let got: Vec<Vec<usize>> = cluster_euclidean(&cloud, &idx, 0.5, 1)
                .unwrap()
                .into_iter()
                .map(|c| c.indices)
                .collect();
            assert_eq!(got, cluster_oracle(&cloud, &idx, 0.5));
        }
    }

    #[test]
    fn small_clusters_are_dropped() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
        ]);
        let idx: Vec<usize> = (0..3).collect();
        let clusters = cluster_euclidean(&cloud, &idx, 0.5, 2).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].indices, vec![0, 1]);
    }

    #[test]
    fn vertical_segment_has_unit_linearity() {
        let pts: Vec<Point3<f64>> = (0..100)
            .map(|i| Point3::new(2.0, -1.0, i as f64 * 0.03))
            .collect();
        let f = pca_features(&pts).unwrap();
        assert_relative_eq!(f.linearity(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.tilt(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(f.centroid_2d.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.height, 99.0 * 0.03, epsilon = 1e-12);
    }

    #[test]
    fn cylinder_features_look_like_a_pole() {
        let mut rng = ChaCha12Rng::seed_from_u64(34);
        let pts = sample_cylinder(&mut rng, Point2::new(1.0, 2.0), 0.1, 0.0, 3.0, 500);
        let f = pca_features(&pts).unwrap();
        assert!(f.linearity() > 0.95, "linearity {}", f.linearity());
        assert!(f.tilt() < 0.05, "tilt {}", f.tilt());
        assert!(f.thickness > 0.18 && f.thickness < 0.22, "thickness {}", f.thickness);
        assert!(classify_pole(&f, &PoleGate::default()));
    }

    #[test]
    fn too_few_points_for_pca() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert!(matches!(pca_features(&pts), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn gate_comparisons_are_strict() {
        let gate = PoleGate::default();
        // Manufacture features sitting exactly on each threshold.
        let at_threshold = ClusterFeatures {
            eigenvalues: [1.0, 1.0 - gate.min_linearity, 0.0],
            principal_axis: Vector3::new(0.0, 0.0, 1.0),
            height: gate.min_height,
            thickness: gate.max_thickness,
            centroid_2d: Point2::origin(),
        };
        assert!(!classify_pole(&at_threshold, &gate));
        let passing = ClusterFeatures {
            eigenvalues: [1.0, 0.01, 0.0],
            principal_axis: Vector3::new(0.0, 0.0, 1.0),
            height: 2.0,
            thickness: 0.2,
            centroid_2d: Point2::origin(),
        };
        assert!(classify_pole(&passing, &gate));
    }

    #[test]
    fn single_pole_is_detected_once() {
        let mut rng = ChaCha12Rng::seed_from_u64(35);
        let mut pts = sample_ground(&mut rng, 15.0, -1.8, 1200);
        pts.extend(sample_cylinder(&mut rng, Point2::new(5.0, 0.0), 0.1, -1.65, 4.0, 250));
        let (set, report) = detect_poles(&PointCloud::new(pts), &DetectorParams::default()).unwrap();
        assert!(report.ground_found);
        assert_eq!(set.len(), 1);
        let d = set.detections[0];
        assert!((d.position - Point2::new(5.0, 0.0)).norm() < 0.1, "off by {:?}", d.position);
        assert_relative_eq!(d.covariance[(0, 0)], 0.15 * 0.15, epsilon = 1e-12);
    }

    #[test]
    fn three_poles_and_a_wall_give_three_detections() {
        let mut rng = ChaCha12Rng::seed_from_u64(36);
        let mut pts = sample_ground(&mut rng, 20.0, -1.8, 1500);
        let centers = [Point2::new(6.0, 3.0), Point2::new(10.0, -4.0), Point2::new(14.0, 2.0)];
        for c in centers {
            pts.extend(sample_cylinder(&mut rng, c, 0.1, -1.65, 3.5, 220));
        }
        // A 4 m wide wall: rejected by thickness and linearity.
        for _ in 0..600 {
            pts.push(Point3::new(
                rng.random_range(8.0..12.0),
                6.0 + rng.random_range(-0.05..0.05),
                rng.random_range(-1.7..0.5),
            ));
        }
        let (set, _) = detect_poles(&PointCloud::new(pts), &DetectorParams::default()).unwrap();
        assert_eq!(set.len(), 3);
        for c in centers {
            assert!(
                set.detections.iter().any(|d| (d.position - c).norm() < 0.1),
                "no detection near {c:?}"
            );
        }
    }

    #[test]
    fn empty_cloud_detects_nothing() {
        let (set, report) = detect_poles(&PointCloud::default(), &DetectorParams::default()).unwrap();
        assert!(set.is_empty());
        assert!(!report.ground_found);
    }

    #[test]
    fn detection_is_rotation_equivariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let mut pts = sample_ground(&mut rng, 15.0, -1.8, 1000);
        pts.extend(sample_cylinder(&mut rng, Point2::new(5.0, 2.0), 0.1, -1.65, 3.0, 200));
        pts.extend(sample_cylinder(&mut rng, Point2::new(-3.0, 7.0), 0.1, -1.65, 3.0, 200));
        let cloud = PointCloud::new(pts);
        let (base, _) = detect_poles(&cloud, &DetectorParams::default()).unwrap();
        assert_eq!(base.len(), 2);
        let phi = 1.234f64;
        let (s, c) = phi.sin_cos();
        let rotated = PointCloud::new(
            cloud
                .points
                .iter()
                .map(|p| Point3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z))
                .collect(),
        );
        let (turned, _) = detect_poles(&rotated, &DetectorParams::default()).unwrap();
        assert_eq!(turned.len(), 2);
        for (a, b) in base.detections.iter().zip(turned.detections.iter()) {
            let expect = Point2::new(c * a.position.x - s * a.position.y, s * a.position.x + c * a.position.y);
            assert!((expect - b.position).norm() < 1e-9);
        }
    }
}
