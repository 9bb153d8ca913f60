//! Foundational geometry: points, rigid transforms, nearest-neighbour
//! queries, normal estimation, closed-form rigid fitting and isosurface
//! extraction from binary voxel masks.
//!
//! All coordinates are millimetres.

mod kdtree;
mod marching_cubes;
mod mc_tables;
mod mesh;
mod normals;
mod procrustes;
mod transform;

pub use kdtree::SpatialIndex;
pub use marching_cubes::{marching_cubes, marching_cubes_mesh, VoxelMask};
pub use mesh::TriMesh;
pub use normals::estimate_normals;
pub use procrustes::{fit_rigid, fit_rigid_indexed};
pub use transform::RigidTransform;

use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type UnitVector3 = nalgebra::Unit<Vector3>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("k-neighbourhood of point {index} is collinear; normal is undefined")]
    DegenerateNeighborhood { index: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("mask produces no isosurface (uniformly empty or uniformly full)")]
    EmptySurface,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A set of points with optional per-point unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<UnitVector3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Point3>, normals: Vec<UnitVector3>) -> Result<Self, GeomError> {
        if points.len() != normals.len() {
            return Err(GeomError::InvalidInput(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        Ok(Self { points, normals: Some(normals) })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[UnitVector3]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn centroid(&self) -> Option<Point3> {
        centroid(&self.points)
    }

    /// Applies `t` to every point and rotates normals accordingly.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_unit(n)).collect()),
        }
    }

    /// Concatenates clouds in order. Normals survive only if every input has them.
    pub fn concat<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>) -> PointCloud {
        let mut points = Vec::new();
        let mut normals = Some(Vec::new());
        for c in clouds {
            points.extend_from_slice(&c.points);
            match (&mut normals, &c.normals) {
                (Some(acc), Some(ns)) => acc.extend_from_slice(ns),
                _ => normals = None,
            }
        }
        PointCloud { points, normals }
    }

    /// Returns the sub-cloud at `indices`, keeping normals when present.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
        }
    }

    pub fn check_finite(&self) -> Result<(), GeomError> {
        match self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            Some(i) => Err(GeomError::InvalidInput(format!("point {i} has a non-finite coordinate"))),
            None => Ok(()),
        }
    }
}

pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_drops_normals_if_any_input_lacks_them() {
        let a = PointCloud::with_normals(vec![Point3::origin()], vec![Vector3::z_axis()]).unwrap();
        let b = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]);
        let ab = PointCloud::concat([&a, &b]);
        assert_eq!(ab.len(), 2);
        assert!(ab.normals().is_none());
        let aa = PointCloud::concat([&a, &a]);
        assert_eq!(aa.normals().unwrap().len(), 2);
    }

    #[test]
    fn mismatched_normals_rejected() {
        assert!(PointCloud::with_normals(vec![Point3::origin()], vec![]).is_err());
    }
}
