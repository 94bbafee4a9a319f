//! Point clouds and exact k-nearest-neighbor search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::{Point, Vec3};

/// Region code carried by every wall point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Wall = 0,
    Transition = 1,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Option<Label> {
        match code {
            0 => Some(Label::Wall),
            1 => Some(Label::Transition),
            _ => None,
        }
    }
}

/// Ordered wall points (mm) with a region label per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    labels: Vec<Label>,
    pub id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, labels: Vec<Label>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() != labels.len() {
            return Err(Error::InvalidCloud(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("non-finite coordinate at point {i}")));
        }
        Ok(PointCloud {
            points,
            labels,
            id: String::new(),
        })
    }

    /// Cloud where every point is labelled as wall.
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        let labels = vec![Label::Wall; points.len()];
        Self::new(points, labels)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Same labels and id, new positions.
    pub(crate) fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        let mut out = Self::new(points, self.labels.clone())?;
        out.id = self.id.clone();
        Ok(out)
    }
}

/// Arithmetic mean of all points.
pub fn centroid(cloud: &PointCloud) -> Point {
    let sum = cloud
        .points()
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Point::from(sum / cloud.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[inline]
fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over a snapshot of a cloud's points.
///
/// Queries are exact. Results are ordered by distance with ties broken by the
/// lower point index.
#[derive(Debug)]
pub struct NeighborIndex {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.points())
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = NeighborIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] == 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// The `k` nearest points to `query`, nearest first.
    pub fn k_nearest(&self, query: &Point, k: usize) -> Result<Vec<Neighbor>> {
        if k > self.points.len() {
            return Err(Error::KExceedsCloud {
                k,
                size: self.points.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort();
        Ok(found
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    /// Indices of the `k` nearest points, nearest first.
    pub fn k_nearest_indices(&self, query: &Point, k: usize) -> Result<Vec<usize>> {
        Ok(self.k_nearest(query, k)?.into_iter().map(|n| n.index).collect())
    }

    fn search(&self, node: usize, query: &Point, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: dist2(&self.points[i], query),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if let Some(worst) = heap.peek() {
                        if c < *worst {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // points equal to the split value may sit on either side
                let plane2 = diff * diff;
                let visit_far = heap.len() < k || heap.peek().is_some_and(|w| plane2 <= w.dist2);
                if visit_far {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[Point], q: &Point, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = p - q;
                (d.x * d.x + d.y * d.y + d.z * d.z, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn as_pairs(v: &[Neighbor]) -> Vec<(usize, f64)> {
        v.iter().map(|n| (n.index, n.distance)).collect()
    }

    #[test]
    fn singleton_cloud() {
        let idx = NeighborIndex::from_points(&[Point::new(1.0, 2.0, 3.0)]).unwrap();
        let r = idx.k_nearest(&Point::new(4.0, 6.0, 3.0), 1).unwrap();
        assert_eq!(r[0].index, 0);
        assert_eq!(r[0].distance, 5.0);
    }

    #[test]
    fn nearest_cube_corner() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Point::new(x, y, z));
                }
            }
        }
        let idx = NeighborIndex::from_points(&pts).unwrap();
        let r = idx.k_nearest(&Point::new(0.1, 0.1, 0.1), 1).unwrap();
        assert_eq!(pts[r[0].index], Point::origin());
    }

    #[test]
    fn coincident_query_returns_self() {
        let pts = random_points(50, 3);
        let idx = NeighborIndex::from_points(&pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let r = idx.k_nearest(p, 1).unwrap();
            assert_eq!(r[0].index, i);
            assert_eq!(r[0].distance, 0.0);
        }
    }

    #[test]
    fn collinear_ordering() {
        let pts: Vec<Point> = (0..4).map(|x| Point::new(x as f64, 0.0, 0.0)).collect();
        let idx = NeighborIndex::from_points(&pts).unwrap();
        let r = idx.k_nearest_indices(&Point::new(1.4, 0.0, 0.0), 2).unwrap();
        assert_eq!(r, vec![1, 2]);
    }

    #[test]
    fn ties_break_by_index() {
        // query equidistant from all points
        let pts = vec![
            Point::new(1.0, 0.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, -1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
            Point::new(0.0, 0.0, -1.0),
        ]
        .into_iter()
        .cycle()
        .take(30)
        .collect::<Vec<_>>();
        let idx = NeighborIndex::from_points(&pts).unwrap();
        let r = idx.k_nearest_indices(&Point::origin(), 7).unwrap();
        assert_eq!(r, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn k_too_large() {
        let idx = NeighborIndex::from_points(&random_points(5, 1)).unwrap();
        let err = idx.k_nearest(&Point::origin(), 6).unwrap_err();
        assert!(err.to_string().starts_with("k exceeds cloud size"));
    }

    #[test]
    fn empty_cloud_rejected() {
        assert_eq!(
            NeighborIndex::from_points(&[]).unwrap_err().to_string(),
            "empty point cloud"
        );
        assert!(matches!(PointCloud::from_points(vec![]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn matches_linear_scan_1000_k10() {
        let pts = random_points(1000, 11);
        let idx = NeighborIndex::from_points(&pts).unwrap();
        let queries = random_points(200, 12);
        for q in queries.iter().chain(pts.iter().take(50)) {
            let got = idx.k_nearest(q, 10).unwrap();
            assert_eq!(as_pairs(&got), brute_force(&pts, q, 10));
        }
    }

    #[test]
    fn matches_linear_scan_500_k30() {
        let pts = random_points(500, 21);
        let idx = NeighborIndex::from_points(&pts).unwrap();
        for q in random_points(100, 22).iter().chain(pts.iter()) {
            let got = idx.k_nearest(q, 30).unwrap();
            assert_eq!(as_pairs(&got), brute_force(&pts, q, 30));
        }
    }

    #[test]
    fn matches_linear_scan_on_grid_with_ties() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    pts.push(Point::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let idx = NeighborIndex::from_points(&pts).unwrap();
        for q in pts.iter().chain([Point::new(2.5, 2.5, 2.5), Point::new(0.5, 3.0, 1.5)].iter()) {
            for k in [1, 7, 19, 27] {
                assert_eq!(as_pairs(&idx.k_nearest(q, k).unwrap()), brute_force(&pts, q, k));
            }
        }
    }

    #[test]
    fn centroid_examples() {
        let c = PointCloud::from_points(vec![Point::origin(), Point::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(centroid(&c), Point::new(1.0, 0.0, 0.0));
        let p = Point::new(-3.5, 2.0, 9.0);
        assert_eq!(centroid(&PointCloud::from_points(vec![p]).unwrap()), p);
    }

    #[test]
    fn cloud_invariants() {
        assert!(PointCloud::new(vec![Point::origin()], vec![]).is_err());
        assert!(PointCloud::from_points(vec![Point::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert_eq!(Label::from_code(2), None);
        assert_eq!(Label::from_code(1), Some(Label::Transition));
    }
}
