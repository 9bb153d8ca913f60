use std::collections::HashMap;

use super::mc_tables::{EDGE_TABLE, TRI_TABLE};
use super::{GeomError, Point3, PointCloud, TriMesh};

/// Binary occupancy grid. Voxel `(x, y, z)` sits at `(x·sx, y·sy, z·sz)` mm
/// and is stored at `x + nx·(y + ny·z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    dims: [usize; 3],
    spacing: [f64; 3],
    values: Vec<bool>,
}

impl VoxelMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], values: Vec<bool>) -> Result<Self, GeomError> {
        if dims.contains(&0) {
            return Err(GeomError::InvalidInput(format!("voxel dims must be positive, got {dims:?}")));
        }
        if !spacing.iter().all(|&s| s.is_finite() && s > 0.0) {
            return Err(GeomError::InvalidInput(format!("voxel spacing must be positive, got {spacing:?}")));
        }
        let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if expected != Some(values.len()) {
            return Err(GeomError::InvalidInput(format!(
                "dims {dims:?} need {expected:?} voxels, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, spacing, values })
    }

    /// All-empty mask.
    pub fn empty(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self, GeomError> {
        let n = dims.iter().product();
        Self::new(dims, spacing, vec![false; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    fn linear(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.values[self.linear(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.linear(x, y, z);
        self.values[i] = v;
    }

    /// Zero-pads `lo` voxels before and `hi` voxels after along every axis.
    pub fn padded(&self, lo: usize, hi: usize) -> VoxelMask {
        let d = self.dims.map(|n| n + lo + hi);
        let mut out = VoxelMask::empty(d, self.spacing).expect("padding keeps dims valid");
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    out.set(x + lo, y + lo, z + lo, self.get(x, y, z));
                }
            }
        }
        out
    }
}

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Isosurface of `mask` at level `iso` as a welded triangle mesh (mm).
///
/// Uses the classic lookup table without ambiguity resolution. Triangles are
/// wound so that face normals point out of the occupied region.
pub fn marching_cubes_mesh(mask: &VoxelMask, iso: f64) -> Result<TriMesh, GeomError> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(GeomError::InvalidInput(format!("iso level must lie in (0, 1), got {iso}")));
    }
    let [nx, ny, nz] = mask.dims;
    let sample = |x: usize, y: usize, z: usize| if mask.get(x, y, z) { 1.0 } else { 0.0 };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    // (linear index of the lower grid corner, axis) -> vertex id
    let mut edge_vertex: HashMap<(usize, u8), usize> = HashMap::new();

    for z in 0..nz.saturating_sub(1) {
        for y in 0..ny.saturating_sub(1) {
            for x in 0..nx.saturating_sub(1) {
                let vals = CORNERS.map(|c| sample(x + c[0], y + c[1], z + c[2]));
                // Bit set = corner outside the surface.
                let case = vals
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &v)| if v < iso { acc | (1 << i) } else { acc });
                let cut = EDGE_TABLE[case];
                if cut == 0 {
                    continue;
                }
                let mut ids = [usize::MAX; 12];
                for (e, [a, b]) in EDGES.iter().enumerate() {
                    if cut & (1 << e) == 0 {
                        continue;
                    }
                    let (ca, cb) = (CORNERS[*a], CORNERS[*b]);
                    let (lo, hi, va, vb) = if ca <= cb { (ca, cb, vals[*a], vals[*b]) } else { (cb, ca, vals[*b], vals[*a]) };
                    let axis = (0..3).find(|&k| lo[k] != hi[k]).unwrap() as u8;
                    let key = (mask.linear(x + lo[0], y + lo[1], z + lo[2]), axis);
                    ids[e] = *edge_vertex.entry(key).or_insert_with(|| {
                        let t = (iso - va) / (vb - va);
                        let g = [0, 1, 2].map(|k| (([x, y, z][k] + lo[k]) as f64 + t * (hi[k] - lo[k]) as f64) * mask.spacing[k]);
                        vertices.push(Point3::new(g[0], g[1], g[2]));
                        vertices.len() - 1
                    });
                }
                for tri in TRI_TABLE[case].chunks(3).take_while(|t| t[0] >= 0) {
                    triangles.push([ids[tri[0] as usize], ids[tri[1] as usize], ids[tri[2] as usize]]);
                }
            }
        }
    }

    if vertices.is_empty() {
        return Err(GeomError::EmptySurface);
    }
    TriMesh::new(vertices, triangles)
}

/// Isosurface vertices of `mask` at level `iso`, scaled to millimetres.
pub fn marching_cubes(mask: &VoxelMask, iso: f64) -> Result<PointCloud, GeomError> {
    Ok(PointCloud::new(marching_cubes_mesh(mask, iso)?.vertices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;

    fn signed_volume(m: &TriMesh) -> f64 {
        m.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| m.vertices[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    fn solid_box(n: usize, lo: usize, hi: usize, s: f64) -> VoxelMask {
        let mut m = VoxelMask::empty([n; 3], [s; 3]).unwrap();
        for z in lo..hi {
            for y in lo..hi {
                for x in lo..hi {
                    m.set(x, y, z, true);
                }
            }
        }
        m
    }

    #[test]
    fn tables_are_self_consistent() {
        for case in 0..256 {
            let mut used = 0u16;
            let row = TRI_TABLE[case];
            let n = row.iter().position(|&v| v < 0).unwrap_or(16);
            assert_eq!(n % 3, 0, "case {case}");
            assert!(row[n..].iter().all(|&v| v == -1));
            for &e in &row[..n] {
                used |= 1 << e;
            }
            assert_eq!(used, EDGE_TABLE[case], "case {case}");
            // A cut edge joins one inside and one outside corner.
            for e in 0..12 {
                let [a, b] = EDGES[e];
                let cut = ((case >> a) & 1) != ((case >> b) & 1);
                assert_eq!(cut, EDGE_TABLE[case] & (1 << e) != 0, "case {case} edge {e}");
            }
        }
    }

    #[test]
    fn uniform_masks_have_no_surface() {
        let empty = VoxelMask::empty([4, 4, 4], [1.0; 3]).unwrap();
        assert_eq!(marching_cubes(&empty, 0.5), Err(GeomError::EmptySurface));
        let full = VoxelMask::new([4, 4, 4], [1.0; 3], vec![true; 64]).unwrap();
        assert_eq!(marching_cubes(&full, 0.5), Err(GeomError::EmptySurface));
    }

    #[test]
    fn single_voxel_gives_octahedron() {
        let mut m = VoxelMask::empty([3, 3, 3], [0.2; 3]).unwrap();
        m.set(1, 1, 1, true);
        let mesh = marching_cubes_mesh(&m, 0.5).unwrap();
        assert_eq!(mesh.vertices.len(), 6);
        assert_eq!(mesh.triangles.len(), 8);
        assert!(mesh.is_closed());
        let center = Point3::new(0.2, 0.2, 0.2);
        for v in &mesh.vertices {
            let d = (v - center).norm();
            assert!((d - 0.1).abs() < 1e-12 && d <= 0.2);
        }
        assert!(signed_volume(&mesh) > 0.0);
    }

    #[test]
    fn solid_cube_is_watertight_and_on_box_boundary() {
        let s = 0.5;
        let m = solid_box(20, 5, 15, s);
        let mesh = marching_cubes_mesh(&m, 0.5).unwrap();
        assert!(mesh.is_closed());
        assert!(signed_volume(&mesh) > 0.0);
        // Occupied centres span [5, 14] voxels; the surface sits half a voxel out.
        let (lo, hi) = (4.5 * s, 14.5 * s);
        for v in &mesh.vertices {
            let dist_to_boundary = v
                .coords
                .iter()
                .map(|&c| (c - lo).abs().min((c - hi).abs()))
                .fold(f64::INFINITY, f64::min);
            let inside = v.coords.iter().all(|&c| c >= lo - 1e-12 && c <= hi + 1e-12);
            assert!(inside && dist_to_boundary <= 0.5 * s);
        }
    }

    #[test]
    fn zero_padding_only_shifts_vertices() {
        let mut m = VoxelMask::empty([6, 5, 4], [0.2, 0.3, 0.4]).unwrap();
        for &(x, y, z) in &[(1, 1, 1), (2, 1, 1), (2, 2, 1), (3, 3, 2), (4, 2, 2)] {
            m.set(x, y, z, true);
        }
        let base = marching_cubes(&m, 0.5).unwrap();
        let shift = Vector3::new(0.2 * 2.0, 0.3 * 2.0, 0.4 * 2.0);
        let padded = marching_cubes(&m.padded(2, 3), 0.5).unwrap();
        let mut a: Vec<[f64; 3]> = base.points().iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut b: Vec<[f64; 3]> = padded.points().iter().map(|p| [p.x - shift.x, p.y - shift.y, p.z - shift.z]).collect();
        let key = |p: &[f64; 3]| p.map(|c| (c * 1e6).round() as i64);
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(VoxelMask::new([2, 2, 2], [1.0; 3], vec![false; 7]).is_err());
        assert!(VoxelMask::new([2, 2, 2], [1.0, 0.0, 1.0], vec![false; 8]).is_err());
        let m = solid_box(4, 1, 3, 1.0);
        assert!(marching_cubes(&m, 1.0).is_err());
    }
}
