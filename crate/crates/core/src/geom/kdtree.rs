use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Point3;

/// Immutable k-d tree over a point set.
///
/// Queries return exactly what a linear scan would: neighbours ordered by
/// squared Euclidean distance, ties broken by the lower point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    /// Implicit balanced tree: the node of range `[lo, hi)` sits at
    /// `(lo + hi) / 2`, its split axis at the same slot of `axes`.
    order: Vec<usize>,
    axes: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
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
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes, 0);
        Self { points: points.to_vec(), order, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// The `k` nearest point indices, closest first. `k` is clamped to the
    /// number of indexed points.
    pub fn knn(&self, query: &Point3, k: usize) -> Vec<usize> {
        self.knn_with_distances(query, k).into_iter().map(|(i, _)| i).collect()
    }

    /// As [`SpatialIndex::knn`], paired with squared distances.
    pub fn knn_with_distances(&self, query: &Point3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(query, k, 0, self.points.len(), &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2)).collect()
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, query: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate { dist2: f64::INFINITY, index: usize::MAX };
        self.search_one(query, 0, self.points.len(), &mut best);
        Some((best.index, best.dist2))
    }

    fn search(&self, q: &Point3, k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Candidate>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let cand = Candidate { dist2: dist2(q, p), index: idx };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, k, near.0, near.1, heap);
        // Equal distances may still hide a lower index on the far side, so
        // only prune strictly.
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            self.search(q, k, far.0, far.1, heap);
        }
    }

    fn search_one(&self, q: &Point3, lo: usize, hi: usize, best: &mut Candidate) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let cand = Candidate { dist2: dist2(q, p), index: idx };
        if cand < *best {
            *best = cand;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search_one(q, near.0, near.1, best);
        if diff * diff <= best.dist2 {
            self.search_one(q, far.0, far.1, best);
        }
    }
}

fn build(points: &[Point3], order: &mut [usize], axes: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= 1 {
        if n == 1 {
            axes[offset] = 0;
        }
        return;
    }
    let axis = widest_axis(points, order);
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    axes[offset + mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, axes, offset);
    build(points, &mut rest[1..], axes, offset + mid + 1);
}

fn widest_axis(points: &[Point3], order: &[usize]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a))).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(_, i)| i).collect()
    }

    #[test]
    fn three_points_on_a_line() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0)];
        let idx = SpatialIndex::new(&pts);
        assert_eq!(idx.knn(&Point3::origin(), 2), vec![0, 1]);
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        let pts = [
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        // build again with a permutation so tree order differs from index order
        let idx = SpatialIndex::new(&pts);
        for k in 1..=5 {
            assert_eq!(idx.knn(&Point3::origin(), k), (0..k).collect::<Vec<_>>());
        }
        assert_eq!(idx.nearest(&Point3::origin()).unwrap().0, 0);
    }

    #[test]
    fn duplicate_points_are_all_reported() {
        let pts = vec![Point3::new(2.0, 2.0, 2.0); 6];
        let idx = SpatialIndex::new(&pts);
        assert_eq!(idx.knn(&Point3::origin(), 4), vec![0, 1, 2, 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_linear_scan(
            raw in prop::collection::vec(prop::array::uniform3(-5i32..5), 1..200),
            q in prop::array::uniform3(-6i32..6),
            k in 1usize..20,
        ) {
            // Integer lattice coordinates force many exact distance ties.
            let pts: Vec<Point3> = raw.iter().map(|a| Point3::new(a[0] as f64, a[1] as f64, a[2] as f64 * 0.5)).collect();
            let q = Point3::new(q[0] as f64, q[1] as f64, q[2] as f64);
            let idx = SpatialIndex::new(&pts);
            let k = k.min(pts.len());
            prop_assert_eq!(idx.knn(&q, k), brute_knn(&pts, &q, k));
            prop_assert_eq!(idx.nearest(&q).unwrap().0, brute_knn(&pts, &q, 1)[0]);
        }
    }
}
