use std::collections::HashMap;

use nalgebra::Unit;

use super::{GeomError, Point3, PointCloud, RigidTransform, UnitVector3, Vector3};

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeomError> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(GeomError::InvalidInput(format!("triangle {t:?} references a missing vertex")));
        }
        Ok(Self { vertices, triangles })
    }

    /// Builds an indexed mesh from a triangle soup, merging corners whose
    /// coordinates are bitwise equal. Vertices keep first-appearance order.
    pub fn from_soup(soup: &[[Point3; 3]]) -> Self {
        let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let triangles = soup
            .iter()
            .map(|tri| {
                tri.map(|p| {
                    // -0.0 and 0.0 are the same position
                    let key = [p.x, p.y, p.z].map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
                    *lookup.entry(key).or_insert_with(|| {
                        vertices.push(p);
                        vertices.len() - 1
                    })
                })
            })
            .collect();
        Self { vertices, triangles }
    }

    pub fn soup(&self) -> Vec<[Point3; 3]> {
        self.triangles.iter().map(|t| t.map(|i| self.vertices[i])).collect()
    }

    /// Unnormalised face normal by right-hand winding (length = 2·area).
    pub fn face_normal(&self, tri: usize) -> Vector3 {
        let [a, b, c] = self.triangles[tri].map(|i| self.vertices[i]);
        (b - a).cross(&(c - a))
    }

    /// Area-weighted vertex normals. Vertices without a non-degenerate
    /// incident face get `None`.
    pub fn vertex_normals(&self) -> Vec<Option<UnitVector3>> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.face_normal(t);
            for &i in tri {
                acc[i] += n;
            }
        }
        acc.into_iter()
            .map(|v| if v.norm() > 0.0 { Some(Unit::new_normalize(v)) } else { None })
            .collect()
    }

    /// Vertex cloud carrying area-weighted normals; isolated vertices fall
    /// back to +z.
    pub fn to_cloud_with_normals(&self) -> PointCloud {
        let normals = self
            .vertex_normals()
            .into_iter()
            .map(|n| n.unwrap_or_else(Vector3::z_axis))
            .collect();
        PointCloud::with_normals(self.vertices.clone(), normals).expect("one normal per vertex")
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|p| t.apply(p)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Every undirected edge shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        !count.is_empty() && count.values().all(|&c| c == 2)
    }
}
