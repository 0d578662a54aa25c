//! Nearest-face-centroid queries.
//!
//! [`CentroidIndex`] is an implicit kd-tree: centroids are permuted in place
//! so that every range `[lo, hi)` is split at its midpoint along the axis of
//! largest spread. Pruning compares the squared distance to the splitting
//! plane against the best squared distance with `<=`, so exact ties are
//! still visited and the lowest face id wins, matching a linear scan.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meshio::IndexedMesh;
use crate::model::Vec3;

const LEAF_SIZE: usize = 8;
const PARALLEL_BUILD_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone)]
pub struct CentroidIndex {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    /// Split axis for the range whose midpoint sits at this position.
    axes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub face_id: usize,
    pub distance: f64,
}

impl CentroidIndex {
    pub fn build(mesh: &IndexedMesh) -> Result<Self> {
        let centroids: Vec<Vec3> = mesh.iter_faces().map(|f| f.centroid()).collect();
        Self::from_centroids(centroids)
    }

    /// Builds over arbitrary points; point `i` answers as face `i`.
    pub fn from_centroids(centroids: Vec<Vec3>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut entries: Vec<(Vec3, u32)> = centroids
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p, i as u32))
            .collect();
        let mut axes = vec![0u8; entries.len()];
        build_range(&mut entries, &mut axes);
        let (points, ids) = entries.into_iter().unzip();
        Ok(Self { points, ids, axes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, query: &Vec3) -> Result<Nearest> {
        if !query.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                what: "query point".into(),
                indices: vec![0],
            });
        }
        let mut best = Best {
            dist2: f64::INFINITY,
            id: u32::MAX,
        };
        self.search(0, self.points.len(), query, &mut best);
        Ok(Nearest {
            face_id: best.id as usize,
            distance: best.dist2.sqrt(),
        })
    }

    fn search(&self, lo: usize, hi: usize, q: &Vec3, best: &mut Best) {
        if hi - lo <= LEAF_SIZE {
            for i in lo..hi {
                best.offer((self.points[i] - q).norm_squared(), self.ids[i]);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        best.offer((self.points[mid] - q).norm_squared(), self.ids[mid]);
        let diff = q[axis] - self.points[mid][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if diff * diff <= best.dist2 {
            self.search(far.0, far.1, q, best);
        }
    }
}

struct Best {
    dist2: f64,
    id: u32,
}

impl Best {
    #[inline]
    fn offer(&mut self, dist2: f64, id: u32) {
        if dist2 < self.dist2 || (dist2 == self.dist2 && id < self.id) {
            self.dist2 = dist2;
            self.id = id;
        }
    }
}

fn build_range(entries: &mut [(Vec3, u32)], axes: &mut [u8]) {
    let n = entries.len();
    if n <= LEAF_SIZE {
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (p, _) in entries.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let axis = (hi - lo).imax();
    let mid = n / 2;
    entries.select_nth_unstable_by(mid, |a, b| {
        a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
    });
    axes[mid] = axis as u8;

    let (left, rest) = entries.split_at_mut(mid);
    let right = &mut rest[1..];
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    let right_axes = &mut rest_axes[1..];
    if n >= PARALLEL_BUILD_THRESHOLD {
        rayon::join(
            || build_range(left, left_axes),
            || build_range(right, right_axes),
        );
    } else {
        build_range(left, left_axes);
        build_range(right, right_axes);
    }
}

pub fn build_index(mesh: &IndexedMesh) -> Result<CentroidIndex> {
    CentroidIndex::build(mesh)
}

pub fn nearest_face(index: &CentroidIndex, point: &Vec3) -> Result<Nearest> {
    index.nearest(point)
}

/// Batch query preserving input order.
pub fn nearest_faces(index: &CentroidIndex, points: &[Vec3]) -> Result<Vec<Nearest>> {
    points
        .par_iter()
        .map(|p| index.nearest(p))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn single_face_answers_everything() {
        let index = CentroidIndex::from_centroids(vec![Vec3::new(3.0, 1.0, 2.0)]).unwrap();
        for q in [Vec3::zeros(), Vec3::new(-100.0, 5.0, 1e6)] {
            assert_eq!(index.nearest(&q).unwrap().face_id, 0);
        }
    }

    #[test]
    fn two_centroids_and_ties() {
        let index =
            CentroidIndex::from_centroids(vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)]).unwrap();
        let hit = index.nearest(&Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            hit,
            Nearest {
                face_id: 0,
                distance: 1.0
            }
        );
        let tie = index.nearest(&Vec3::new(5.0, 0.0, 0.0)).unwrap();
        assert_eq!(tie.face_id, 0);

        let reversed =
            CentroidIndex::from_centroids(vec![Vec3::new(10.0, 0.0, 0.0), Vec3::zeros()]).unwrap();
        assert_eq!(
            reversed.nearest(&Vec3::new(5.0, 0.0, 0.0)).unwrap().face_id,
            0
        );
    }

    #[test]
    fn duplicate_centroids_pick_lowest_id() {
        let mut pts = vec![Vec3::new(1.0, 1.0, 1.0); 100];
        pts.push(Vec3::new(5.0, 5.0, 5.0));
        let index = CentroidIndex::from_centroids(pts).unwrap();
        assert_eq!(index.nearest(&Vec3::zeros()).unwrap().face_id, 0);
        assert_eq!(
            index.nearest(&Vec3::new(5.0, 5.0, 4.0)).unwrap().face_id,
            100
        );
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vec3> = (0..5000)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random::<f64>() * 0.1))
            .collect();
        let index = CentroidIndex::from_centroids(points.clone()).unwrap();
        for _ in 0..10_000 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 1.2 - Vec3::repeat(0.1);
            let got = index.nearest(&q).unwrap();
            let (id, d) = linear_scan(&points, &q);
            assert_eq!(got.face_id, id);
            assert_eq!(got.distance, d);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            CentroidIndex::from_centroids(vec![]),
            Err(Error::EmptyMesh)
        ));
        let index = CentroidIndex::from_centroids(vec![Vec3::zeros()]).unwrap();
        assert!(matches!(
            index.nearest(&Vec3::new(f64::NAN, 0.0, 0.0)),
            Err(Error::NonFinite { .. })
        ));
    }
}
