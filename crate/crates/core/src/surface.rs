//! Local surface frames and radius of curvature.
//!
//! Each point gets an outward unit normal and two tangents from a plane fit to
//! its k-neighborhood, and a local radius from a robust sphere fit over the
//! same neighborhood. The sphere fit samples minimal 4-point subsets, keeps
//! the model with the largest consensus, and refines it by geometric least
//! squares on the consensus set.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{centroid, NeighborIndex, PointCloud};
use crate::rng::{stream_rng, DOMAIN_MLESAC};
use crate::{Point, Vec3};

/// Squared eigenvalue ratio below which a neighborhood has lost a dimension.
const RANK_EPS2: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSurfaceFrame {
    pub normal: Vec3,
    pub tangent1: Vec3,
    pub tangent2: Vec3,
    pub radius_mm: f64,
    /// Set when the fitted radius was clamped to `r_max_mm`.
    pub low_curvature: bool,
}

impl LocalSurfaceFrame {
    /// Right-handed frame from a normal and a tangent hint.
    pub fn from_normal(normal: Vec3, tangent_hint: Vec3, radius_mm: f64, low_curvature: bool) -> Self {
        let normal = normal.normalize();
        let mut t1 = tangent_hint - normal * normal.dot(&tangent_hint);
        if t1.norm() < 1e-6 {
            t1 = any_perpendicular(&normal);
        }
        let t1 = t1.normalize();
        let t2 = normal.cross(&t1).normalize();
        LocalSurfaceFrame {
            normal,
            tangent1: t1,
            tangent2: t2,
            radius_mm,
            low_curvature,
        }
    }
}

fn any_perpendicular(n: &Vec3) -> Vec3 {
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - n * n.dot(&axis)).normalize()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFitParams {
    pub k_neighbors: usize,
    pub mlesac_iterations: usize,
    pub inlier_threshold_mm: f64,
    pub min_inlier_fraction: f64,
    pub r_max_mm: f64,
    pub rng_seed: u64,
}

impl Default for SurfaceFitParams {
    fn default() -> Self {
        SurfaceFitParams {
            k_neighbors: 30,
            mlesac_iterations: 200,
            inlier_threshold_mm: 0.3,
            min_inlier_fraction: 0.5,
            r_max_mm: 300.0,
            rng_seed: 0,
        }
    }
}

impl SurfaceFitParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.k_neighbors < 6 {
            return bad("k_neighbors must be at least 6");
        }
        if self.mlesac_iterations == 0 {
            return bad("mlesac_iterations must be positive");
        }
        if !(self.inlier_threshold_mm > 0.0 && self.inlier_threshold_mm.is_finite()) {
            return bad("inlier_threshold_mm must be positive");
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return bad("min_inlier_fraction must lie in (0, 1]");
        }
        if !(self.r_max_mm > 0.0 && self.r_max_mm.is_finite()) {
            return bad("r_max_mm must be positive");
        }
        Ok(())
    }
}

/// Plane-fit frame before outward orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFrame {
    pub normal: Vec3,
    pub tangent1: Vec3,
    pub tangent2: Vec3,
}

/// Eigen-decomposition of the centered scatter matrix, ascending eigenvalues.
struct Principal {
    values: [f64; 3],
    vectors: [Vec3; 3],
}

fn principal_axes(points: impl Iterator<Item = Point> + Clone) -> Principal {
    let mut n = 0usize;
    let mut sum = Vec3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    let mean = sum / n as f64;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Principal {
        values: order.map(|i| eig.eigenvalues[i].max(0.0)),
        vectors: order.map(|i| eig.eigenvectors.column(i).into_owned()),
    }
}

/// Least-variance direction of the k-neighborhood of point `i`.
pub fn fit_plane_frame(
    cloud: &PointCloud,
    index: &NeighborIndex,
    i: usize,
    params: &SurfaceFitParams,
) -> Result<PlaneFrame> {
    let pts = cloud.points();
    let nbrs = index.k_nearest_indices(&pts[i], params.k_neighbors)?;
    let axes = principal_axes(nbrs.iter().map(|&j| pts[j]));
    let [_, mid, max] = axes.values;
    if max <= 0.0 || mid <= RANK_EPS2 * max {
        return Err(Error::DegenerateNeighborhood { index: i });
    }
    let normal = axes.vectors[0].normalize();
    let frame = LocalSurfaceFrame::from_normal(normal, axes.vectors[2], 1.0, false);
    Ok(PlaneFrame {
        normal: frame.normal,
        tangent1: frame.tangent1,
        tangent2: frame.tangent2,
    })
}

#[derive(Clone, Copy)]
struct EdgeKey(f64, usize, usize);

impl PartialEq for EdgeKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}

impl Eq for EdgeKey {}

impl PartialOrd for EdgeKey {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for EdgeKey {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&o.0)
            .then(self.1.cmp(&o.1))
            .then(self.2.cmp(&o.2))
    }
}

/// Flip normals to a consistent outward orientation.
///
/// Within each connected component of the symmetrized k-neighbor graph the
/// point farthest from the cloud centroid seeds the orientation
/// (`n · (p − centroid) > 0`), which is then propagated along a minimum
/// spanning tree weighted by `1 − |n_i · n_j|`.
pub fn orient_normals(
    cloud: &PointCloud,
    index: &NeighborIndex,
    normals: &[Vec3],
    k: usize,
) -> Result<Vec<Vec3>> {
    let n = cloud.len();
    if normals.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: normals.len(),
        });
    }
    let pts = cloud.points();
    let k = k.min(n);
    let knn: Vec<Vec<usize>> = pts
        .par_iter()
        .map(|p| index.k_nearest_indices(p, k))
        .collect::<Result<_>>()?;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, list) in knn.iter().enumerate() {
        for &j in list {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let c = centroid(cloud);
    let mut by_distance: Vec<usize> = (0..n).collect();
    let far = |i: usize| (pts[i] - c).norm();
    by_distance.sort_by(|&a, &b| far(b).total_cmp(&far(a)).then(a.cmp(&b)));

    let mut out = normals.to_vec();
    let mut visited = vec![false; n];
    let mut component = vec![usize::MAX; n];
    let mut components = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = components;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if component[v] == usize::MAX {
                    component[v] = components;
                    stack.push(v);
                }
            }
        }
        components += 1;
    }

    let mut seeded = vec![false; components];
    for &seed in &by_distance {
        let comp = component[seed];
        if seeded[comp] {
            continue;
        }
        let radial = pts[seed] - c;
        let dot = out[seed].dot(&radial);
        if dot.abs() <= 1e-9 * radial.norm() || radial.norm() == 0.0 {
            continue;
        }
        seeded[comp] = true;
        if dot < 0.0 {
            out[seed] = -out[seed];
        }
        // Prim's algorithm from the seed
        let mut heap = BinaryHeap::new();
        visited[seed] = true;
        let push_edges = |u: usize, out: &[Vec3], visited: &[bool], heap: &mut BinaryHeap<Reverse<EdgeKey>>| {
            for &v in &adj[u] {
                if !visited[v] {
                    let w = 1.0 - out[u].dot(&out[v]).abs();
                    heap.push(Reverse(EdgeKey(w, v, u)));
                }
            }
        };
        push_edges(seed, &out, &visited, &mut heap);
        while let Some(Reverse(EdgeKey(_, v, parent))) = heap.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            if out[v].dot(&out[parent]) < 0.0 {
                out[v] = -out[v];
            }
            push_edges(v, &out, &visited, &mut heap);
        }
    }
    if seeded.iter().any(|s| !s) {
        return Err(Error::NoOutwardOrientation);
    }
    Ok(out)
}

/// Surface model hypothesis. Planes stand in for spheres of infinite radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceModel {
    Sphere { center: Point, radius: f64 },
    Plane { point: Point, normal: Vec3 },
}

impl SurfaceModel {
    pub fn distance(&self, p: &Point) -> f64 {
        match self {
            SurfaceModel::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            SurfaceModel::Plane { point, normal } => normal.dot(&(p - point)).abs(),
        }
    }
}

/// Result of the robust sphere fit over one neighborhood.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustSphere {
    pub model: SurfaceModel,
    /// Indices into the fitted slice.
    pub inliers: Vec<usize>,
}

impl RobustSphere {
    pub fn radius(&self) -> f64 {
        match self.model {
            SurfaceModel::Sphere { radius, .. } => radius,
            SurfaceModel::Plane { .. } => f64::INFINITY,
        }
    }
}

/// Minimal model through four points, or `None` if they are (nearly) collinear
/// or coincident.
pub fn model_through(sample: &[Point; 4]) -> Option<SurfaceModel> {
    let axes = principal_axes(sample.iter().copied());
    let [min, mid, max] = axes.values;
    if max <= 0.0 || mid <= RANK_EPS2 * max {
        return None;
    }
    let origin = Point::from(sample.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / 4.0);
    if min <= RANK_EPS2 * max {
        return Some(SurfaceModel::Plane {
            point: origin,
            normal: axes.vectors[0].normalize(),
        });
    }
    // x² + y² + z² + D x + E y + F z + G = 0 in coordinates centered on the sample
    let mut a = Matrix4::zeros();
    let mut b = Vector4::zeros();
    for (row, p) in sample.iter().enumerate() {
        let d = p - origin;
        a[(row, 0)] = d.x;
        a[(row, 1)] = d.y;
        a[(row, 2)] = d.z;
        a[(row, 3)] = 1.0;
        b[row] = -d.norm_squared();
    }
    let sol = a.lu().solve(&b)?;
    let center = Vec3::new(-sol[0] / 2.0, -sol[1] / 2.0, -sol[2] / 2.0);
    let r2 = center.norm_squared() - sol[3];
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some(SurfaceModel::Sphere {
        center: origin + center,
        radius: r2.sqrt(),
    })
}

/// Algebraic least-squares sphere through `points` (at least 4).
pub fn algebraic_sphere(points: &[Point]) -> Option<(Point, f64)> {
    if points.len() < 4 {
        return None;
    }
    let origin = Point::from(points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / points.len() as f64);
    let mut ata = Matrix4::zeros();
    let mut atb = Vector4::zeros();
    for p in points {
        let d = p - origin;
        let row = Vector4::new(d.x, d.y, d.z, 1.0);
        ata += row * row.transpose();
        atb += row * (-d.norm_squared());
    }
    let sol = ata.lu().solve(&atb)?;
    let center = Vec3::new(-sol[0] / 2.0, -sol[1] / 2.0, -sol[2] / 2.0);
    let r2 = center.norm_squared() - sol[3];
    if !(r2 > 0.0) || !r2.is_finite() {
        return None;
    }
    Some((origin + center, r2.sqrt()))
}

/// Geometric least-squares sphere fit (Levenberg–Marquardt on
/// `Σ (|p − c| − r)²`) starting from `center`, `radius`.
pub fn refine_sphere(points: &[Point], center: Point, radius: f64) -> (Point, f64) {
    let cost = |c: &Point, r: f64| -> f64 {
        points
            .iter()
            .map(|p| {
                let e = (p - c).norm() - r;
                e * e
            })
            .sum()
    };
    let mut c = center;
    let mut r = radius;
    let mut current = cost(&c, r);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for p in points {
            let d = p - c;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let u = d / len;
            let jac = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            let res = len - r;
            jtj += jac * jac.transpose();
            jtr += jac * res;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for d in 0..4 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let nc = c + Vec3::new(step[0], step[1], step[2]);
            let nr = r + step[3];
            let next = cost(&nc, nr);
            if next.is_finite() && next <= current {
                let small = step.norm() <= 1e-13 * (1.0 + c.coords.norm() + r.abs());
                c = nc;
                r = nr;
                let done = small || current - next <= 1e-30 + 1e-15 * current;
                current = next;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (c, r)
}

/// Consensus sphere fit over one neighborhood.
///
/// Returns `None` when no non-degenerate minimal sample could be drawn.
pub fn mlesac_sphere<R: Rng>(points: &[Point], params: &SurfaceFitParams, rng: &mut R) -> Option<RobustSphere> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    let thr = params.inlier_threshold_mm;
    let max_draws = params.mlesac_iterations.saturating_mul(10);
    let mut draws = 0usize;
    let mut best: Option<(SurfaceModel, usize)> = None;
    for _ in 0..params.mlesac_iterations {
        let model = loop {
            if draws >= max_draws {
                break None;
            }
            draws += 1;
            let idx = rand::seq::index::sample(rng, n, 4);
            let sample = [
                points[idx.index(0)],
                points[idx.index(1)],
                points[idx.index(2)],
                points[idx.index(3)],
            ];
            if let Some(m) = model_through(&sample) {
                break Some(m);
            }
        };
        let Some(model) = model else { break };
        let count = points.iter().filter(|p| model.distance(p) <= thr).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((model, count));
        }
    }
    let (model, _) = best?;
    let inliers: Vec<usize> = (0..n).filter(|&j| model.distance(&points[j]) <= thr).collect();
    let model = match model {
        SurfaceModel::Sphere { center, radius } if inliers.len() >= 4 => {
            let subset: Vec<Point> = inliers.iter().map(|&j| points[j]).collect();
            let (c, r) = refine_sphere(&subset, center, radius);
            SurfaceModel::Sphere {
                center: c,
                radius: r.abs(),
            }
        }
        other => other,
    };
    Some(RobustSphere { model, inliers })
}

/// Local radius of curvature at point `i`, clamped to `r_max_mm`.
///
/// The second value is set when clamping occurred (near-flat or saddle-like
/// neighborhoods).
pub fn fit_local_radius(
    cloud: &PointCloud,
    index: &NeighborIndex,
    i: usize,
    params: &SurfaceFitParams,
) -> Result<(f64, bool)> {
    let pts = cloud.points();
    let nbrs = index.k_nearest_indices(&pts[i], params.k_neighbors)?;
    let local: Vec<Point> = nbrs.iter().map(|&j| pts[j]).collect();
    let mut rng = stream_rng(DOMAIN_MLESAC, params.rng_seed, i as u64);
    let fit = mlesac_sphere(&local, params, &mut rng).ok_or(Error::NoConsensus { index: i })?;
    if (fit.inliers.len() as f64) < params.min_inlier_fraction * local.len() as f64 {
        return Err(Error::NoConsensus { index: i });
    }
    let r = fit.radius();
    if r.is_finite() && r <= params.r_max_mm {
        Ok((r, false))
    } else {
        Ok((params.r_max_mm, true))
    }
}

/// Frame and radius for every point of `cloud`.
///
/// Deterministic in `params.rng_seed`; independent of thread count.
pub fn estimate_all_frames(cloud: &PointCloud, params: &SurfaceFitParams) -> Result<Vec<LocalSurfaceFrame>> {
    params.validate()?;
    if params.k_neighbors > cloud.len() {
        return Err(Error::KExceedsCloud {
            k: params.k_neighbors,
            size: cloud.len(),
        });
    }
    let index = NeighborIndex::build(cloud)?;
    let planes = first_error(
        (0..cloud.len())
            .into_par_iter()
            .map(|i| fit_plane_frame(cloud, &index, i, params))
            .collect(),
    )?;
    let normals: Vec<Vec3> = planes.iter().map(|f| f.normal).collect();
    let oriented = orient_normals(cloud, &index, &normals, params.k_neighbors)?;
    let radii = first_error(
        (0..cloud.len())
            .into_par_iter()
            .map(|i| fit_local_radius(cloud, &index, i, params))
            .collect(),
    )?;
    Ok(planes
        .iter()
        .zip(oriented)
        .zip(radii)
        .map(|((plane, normal), (radius, flag))| LocalSurfaceFrame::from_normal(normal, plane.tangent1, radius, flag))
        .collect())
}

/// Lowest-index error wins so failures are reported deterministically.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Label;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fib_sphere(n: usize, r: f64, c: Point) -> Vec<Point> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                c + Vec3::new(rho * phi.cos(), rho * phi.sin(), z) * r
            })
            .collect()
    }

    fn plane_grid(normal: Vec3, n_side: usize, spacing: f64) -> Vec<Point> {
        let f = LocalSurfaceFrame::from_normal(normal, Vec3::new(0.3, 0.7, 0.1), 1.0, false);
        let mut out = Vec::new();
        for a in 0..n_side {
            for b in 0..n_side {
                let u = (a as f64 - n_side as f64 / 2.0) * spacing;
                let v = (b as f64 - n_side as f64 / 2.0) * spacing + 0.13 * a as f64 * spacing;
                out.push(Point::from(f.tangent1 * u + f.tangent2 * v));
            }
        }
        out
    }

    fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
        (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn plane_normal_on_z0() {
        let cloud = PointCloud::from_points(plane_grid(Vec3::z(), 12, 0.5)).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let p = SurfaceFitParams::default();
        for i in [0, 17, 70, 143] {
            let f = fit_plane_frame(&cloud, &idx, i, &p).unwrap();
            assert!((f.normal.z.abs() - 1.0).abs() < 1e-6, "{:?}", f.normal);
        }
    }

    #[test]
    fn plane_normal_on_tilted_plane() {
        let n = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        let cloud = PointCloud::from_points(plane_grid(n, 12, 0.4)).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let f = fit_plane_frame(&cloud, &idx, 50, &SurfaceFitParams::default()).unwrap();
        assert!((f.normal.dot(&n).abs() - 1.0).abs() < 1e-6);
    }

    /// Total least squares through SVD of the centered neighborhood, computed
    /// independently of the scatter-matrix path.
    fn tls_normal(points: &[Point]) -> Vec3 {
        let n = points.len();
        let mean = points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n as f64;
        let m = nalgebra::DMatrix::from_fn(n, 3, |r, c| points[r][c] - mean[c]);
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        Vec3::new(vt[(imin, 0)], vt[(imin, 1)], vt[(imin, 2)])
    }

    #[test]
    fn noisy_plane_within_two_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pts: Vec<Point> = plane_grid(Vec3::z(), 20, 0.7)
            .into_iter()
            .map(|p| p + Vec3::z() * noise.sample(&mut rng))
            .collect();
        let cloud = PointCloud::from_points(pts.clone()).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let p = SurfaceFitParams::default();
        for i in (0..pts.len()).step_by(37) {
            let f = fit_plane_frame(&cloud, &idx, i, &p).unwrap();
            let nb: Vec<Point> = idx
                .k_nearest_indices(&pts[i], 30)
                .unwrap()
                .iter()
                .map(|&j| pts[j])
                .collect();
            let oracle = tls_normal(&nb);
            assert!(angle_deg(&f.normal, &oracle).min(angle_deg(&-f.normal, &oracle)) < 1e-6);
            assert!(angle_deg(&f.normal, &Vec3::z()).min(angle_deg(&-f.normal, &Vec3::z())) < 2.0);
        }
    }

    #[test]
    fn collinear_neighborhood_is_degenerate() {
        let pts: Vec<Point> = (0..40).map(|i| Point::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let cloud = PointCloud::from_points(pts).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let err = fit_plane_frame(&cloud, &idx, 5, &SurfaceFitParams::default()).unwrap_err();
        assert_eq!(err.to_string(), "degenerate neighborhood at point 5");
    }

    #[test]
    fn sphere_normals_point_outward() {
        let c = Point::new(3.0, -2.0, 5.0);
        let cloud = PointCloud::from_points(fib_sphere(2000, 10.0, c)).unwrap();
        let frames = estimate_all_frames(&cloud, &SurfaceFitParams::default()).unwrap();
        for (p, f) in cloud.points().iter().zip(&frames) {
            assert!(f.normal.dot(&(p - c)) > 0.0);
        }
    }

    #[test]
    fn cylinder_normals_radial() {
        let (r, len) = (15.0, 80.0);
        let mut pts = Vec::new();
        for ring in 0..60 {
            for j in 0..80 {
                let h = -len / 2.0 + len * (ring as f64 + 0.5) / 60.0;
                let a = std::f64::consts::TAU * (j as f64 + 0.5 * (ring % 2) as f64) / 80.0;
                pts.push(Point::new(r * a.cos(), r * a.sin(), h));
            }
        }
        let cloud = PointCloud::from_points(pts).unwrap();
        let frames = estimate_all_frames(&cloud, &SurfaceFitParams::default()).unwrap();
        for (p, f) in cloud.points().iter().zip(&frames) {
            let radial = Vec3::new(p.x, p.y, 0.0).normalize();
            assert!(angle_deg(&f.normal, &radial) < 5.0);
        }
    }

    #[test]
    fn two_point_cloud_has_no_orientation() {
        let cloud = PointCloud::from_points(vec![Point::origin(), Point::new(1.0, 0.0, 0.0)]).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let err = orient_normals(&cloud, &idx, &[Vec3::z(), Vec3::z()], 30).unwrap_err();
        assert_eq!(err.to_string(), "cannot establish outward orientation");
    }

    #[test]
    fn exact_sphere_radius() {
        let cloud = PointCloud::from_points(fib_sphere(20000, 25.0, Point::new(1.0, 2.0, 3.0))).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let p = SurfaceFitParams::default();
        for i in (0..cloud.len()).step_by(997) {
            let (r, flag) = fit_local_radius(&cloud, &idx, i, &p).unwrap();
            assert!(!flag);
            assert!((r - 25.0).abs() < 0.01, "{r}");
            assert!((r - 25.0).abs() / 25.0 < 1e-3);
        }
    }

    #[test]
    fn plane_radius_clamps() {
        let cloud = PointCloud::from_points(plane_grid(Vec3::new(0.2, -0.5, 1.0).normalize(), 15, 0.5)).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let p = SurfaceFitParams::default();
        for i in [0, 100, 200] {
            assert_eq!(fit_local_radius(&cloud, &idx, i, &p).unwrap(), (300.0, true));
        }
    }

    #[test]
    fn sphere_cap_with_outliers() {
        // 30-point cap of a radius-20 sphere, every tenth point pushed 5 mm outward
        let c = Point::new(0.0, 0.0, -20.0);
        let cap: Vec<Point> = fib_sphere(6000, 20.0, c)
            .into_iter()
            .filter(|p| p.z > -0.5)
            .take(30)
            .collect();
        assert_eq!(cap.len(), 30);
        let mut pts = cap.clone();
        let mut outliers = Vec::new();
        for (j, p) in pts.iter_mut().enumerate() {
            if j % 10 == 3 {
                *p += (*p - c).normalize() * 5.0;
                outliers.push(j);
            }
        }
        // oracle: geometric least squares on the known inliers
        let known: Vec<Point> = (0..30).filter(|j| !outliers.contains(j)).map(|j| pts[j]).collect();
        let (c0, r0) = algebraic_sphere(&known).unwrap();
        let (_, oracle_r) = refine_sphere(&known, c0, r0);
        assert!((oracle_r - 20.0).abs() < 1e-6);

        let cloud = PointCloud::from_points(pts).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        for seed in 0..5 {
            let p = SurfaceFitParams {
                rng_seed: seed,
                ..Default::default()
            };
            let (r, flag) = fit_local_radius(&cloud, &idx, 0, &p).unwrap();
            assert!(!flag);
            assert!((r - oracle_r).abs() / oracle_r < 0.02, "{r}");
        }
    }

    #[test]
    fn random_cloud_has_no_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> = (0..40)
            .map(|_| Point::new(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0))
            .collect();
        let cloud = PointCloud::from_points(pts).unwrap();
        let idx = NeighborIndex::build(&cloud).unwrap();
        let err = fit_local_radius(&cloud, &idx, 3, &SurfaceFitParams::default()).unwrap_err();
        assert_eq!(err.to_string(), "no consensus sphere at point 3");
    }

    #[test]
    fn minimal_model_cases() {
        let on_sphere = [
            Point::new(5.0, 0.0, 0.0),
            Point::new(0.0, 5.0, 0.0),
            Point::new(0.0, 0.0, 5.0),
            Point::new(-5.0, 0.0, 0.0),
        ];
        match model_through(&on_sphere).unwrap() {
            SurfaceModel::Sphere { center, radius } => {
                assert!((radius - 5.0).abs() < 1e-12);
                assert!(center.coords.norm() < 1e-12);
            }
            m => panic!("{m:?}"),
        }
        let coplanar = [
            Point::new(0.0, 0.0, 1.0),
            Point::new(1.0, 0.0, 1.0),
            Point::new(0.0, 1.0, 1.0),
            Point::new(1.0, 1.0, 1.0),
        ];
        assert!(matches!(model_through(&coplanar), Some(SurfaceModel::Plane { .. })));
        let collinear = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 1.0),
            Point::new(2.0, 2.0, 2.0),
            Point::new(3.0, 3.0, 3.0),
        ];
        assert_eq!(model_through(&collinear), None);
    }

    #[test]
    fn params_validation() {
        let p = SurfaceFitParams {
            k_neighbors: 5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = SurfaceFitParams {
            inlier_threshold_mm: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(SurfaceFitParams::default().validate().is_ok());
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut pts = fib_sphere(1500, 12.0, Point::origin());
        pts.truncate(1200);
        let labels = vec![Label::Wall; pts.len()];
        let cloud = PointCloud::new(pts, labels).unwrap();
        for f in estimate_all_frames(&cloud, &SurfaceFitParams::default()).unwrap() {
            for v in [f.normal, f.tangent1, f.tangent2] {
                assert!((v.norm() - 1.0).abs() < 1e-9);
            }
            assert!(f.normal.dot(&f.tangent1).abs() < 1e-9);
            assert!(f.normal.dot(&f.tangent2).abs() < 1e-9);
            assert!(f.tangent1.dot(&f.tangent2).abs() < 1e-9);
            assert!(f.radius_mm > 0.0 && f.radius_mm <= 300.0);
        }
    }
}
