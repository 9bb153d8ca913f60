use rayon::prelude::*;

use super::{OcclusalFrame, ProjectionError};
use crate::geom::{PointCloud, TriMesh, Vector3};

/// Pixel grid on the occlusal plane. Pixel `(u, v)`, 1-based, is centred at
/// frame coordinates `s·(u + a_x, −v + a_y)` with
/// `a_x = −(N1 + 1)/2`, `a_y = (N2 + 1)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGeometry {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
}

impl Default for ImageGeometry {
    fn default() -> Self {
        Self { width: 400, height: 400, spacing: 0.2 }
    }
}

impl ImageGeometry {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        if self.width == 0 || self.height == 0 || !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(ProjectionError::InvalidInput(format!("bad image geometry {self:?}")));
        }
        Ok(())
    }

    pub fn a_x(&self) -> f64 {
        -(self.width as f64 + 1.0) / 2.0
    }

    pub fn a_y(&self) -> f64 {
        (self.height as f64 + 1.0) / 2.0
    }

    /// Frame `(x, y)` of the centre of 1-based pixel `(u, v)`.
    pub fn pixel_center(&self, u: f64, v: f64) -> (f64, f64) {
        (self.spacing * (u + self.a_x()), self.spacing * (-v + self.a_y()))
    }

    /// Inverse of [`pixel_center`](Self::pixel_center), fractional.
    pub fn pixel_of(&self, x: f64, y: f64) -> (f64, f64) {
        (x / self.spacing - self.a_x(), -(y / self.spacing - self.a_y()))
    }
}

/// Row-major grayscale image; `values[row · width + col]` is pixel
/// `(u, v) = (col + 1, row + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub spacing: f64,
    /// Plane offset `a`; the third component is the largest point norm in
    /// frame coordinates.
    pub offset: Vector3,
    pub values: Vec<f64>,
}

impl RasterImage {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Surface to ray-cast.
#[derive(Debug, Clone, Copy)]
pub enum Surface<'a> {
    /// Exact ray–triangle intersection; normals from triangle winding.
    Mesh(&'a TriMesh),
    /// Point splatting: a ray hits a point within `s/√2` of it. Needs normals.
    Points(&'a PointCloud),
}

/// Topmost hit per pixel: height along `u3` and the unit normal there.
type Hit = Option<(f64, Vector3)>;

/// Rendered image `I_r` and depth image `I_d` of `surface` seen along `−u3`.
pub fn render_images(
    surface: Surface<'_>,
    frame: &OcclusalFrame,
    geometry: &ImageGeometry,
) -> Result<(RasterImage, RasterImage), ProjectionError> {
    geometry.validate()?;
    let (local, hits) = match surface {
        Surface::Mesh(mesh) => {
            let local: Vec<Vector3> = mesh.vertices.iter().map(|p| frame.to_local(p)).collect();
            let hits = cast_mesh(&local, mesh, frame, geometry);
            (local, hits)
        }
        Surface::Points(cloud) => {
            let normals = cloud.normals().ok_or(ProjectionError::MissingNormals)?;
            let local: Vec<Vector3> = cloud.points().iter().map(|p| frame.to_local(p)).collect();
            let local_normals: Vec<Vector3> = normals
                .iter()
                .map(|n| Vector3::new(frame.u1.dot(n), frame.u2.dot(n), frame.u3.dot(n)))
                .collect();
            let hits = splat_points(&local, &local_normals, geometry);
            (local, hits)
        }
    };

    let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (z, _) in hits.iter().flatten() {
        zmin = zmin.min(*z);
        zmax = zmax.max(*z);
    }
    if zmin > zmax {
        return Err(ProjectionError::EmptyProjection);
    }
    let a_z = local.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let offset = Vector3::new(geometry.a_x(), geometry.a_y(), a_z);
    let range = zmax - zmin;

    let rendered = hits.iter().map(|h| h.map_or(0.0, |(_, n)| n.z.max(0.0))).collect();
    let depth = hits
        .iter()
        .map(|h| match h {
            None => 0.0,
            Some(_) if range == 0.0 => 1.0,
            Some((z, _)) => (1.0 - (z - zmin) / range).clamp(0.0, 1.0),
        })
        .collect();
    let image = |values| RasterImage {
        width: geometry.width,
        height: geometry.height,
        spacing: geometry.spacing,
        offset,
        values,
    };
    Ok((image(rendered), image(depth)))
}

fn cast_mesh(local: &[Vector3], mesh: &TriMesh, frame: &OcclusalFrame, g: &ImageGeometry) -> Vec<Hit> {
    // Bucket triangles by the pixel rows their footprint may cover.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); g.height];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let ys = tri.map(|i| local[i].y);
        let (ymin, ymax) = (ys.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        // v = a_y − y/s; larger y means smaller v
        let vlo = (g.a_y() - ymax / g.spacing).ceil().max(1.0);
        let vhi = (g.a_y() - ymin / g.spacing).floor().min(g.height as f64);
        if vlo > vhi {
            continue;
        }
        for v in vlo as usize..=vhi as usize {
            rows[v - 1].push(t);
        }
    }
    let face_normals: Vec<Vector3> = (0..mesh.triangles.len())
        .map(|t| {
            let n = mesh.face_normal(t);
            let n = Vector3::new(frame.u1.dot(&n), frame.u2.dot(&n), frame.u3.dot(&n));
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                n
            }
        })
        .collect();

    rows.par_iter()
        .enumerate()
        .flat_map_iter(|(row, tris)| {
            let mut line: Vec<Hit> = vec![None; g.width];
            let v = row as f64 + 1.0;
            for &t in tris {
                let [a, b, c] = mesh.triangles[t].map(|i| local[i]);
                let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
                if det == 0.0 {
                    continue; // edge-on to the ray
                }
                let xmin = a.x.min(b.x).min(c.x);
                let xmax = a.x.max(b.x).max(c.x);
                let ulo = (xmin / g.spacing - g.a_x()).ceil().max(1.0);
                let uhi = (xmax / g.spacing - g.a_x()).floor().min(g.width as f64);
                if ulo > uhi {
                    continue;
                }
                for u in ulo as usize..=uhi as usize {
                    let (x, y) = g.pixel_center(u as f64, v);
                    let l1 = ((b.x - x) * (c.y - y) - (c.x - x) * (b.y - y)) / det;
                    let l2 = ((c.x - x) * (a.y - y) - (a.x - x) * (c.y - y)) / det;
                    let l3 = 1.0 - l1 - l2;
                    if l1 < 0.0 || l2 < 0.0 || l3 < 0.0 {
                        continue;
                    }
                    let z = l1 * a.z + l2 * b.z + l3 * c.z;
                    let slot = &mut line[u - 1];
                    if slot.is_none_or(|(best, _)| z > best) {
                        *slot = Some((z, face_normals[t]));
                    }
                }
            }
            line
        })
        .collect()
}

fn splat_points(local: &[Vector3], normals: &[Vector3], g: &ImageGeometry) -> Vec<Hit> {
    let radius2 = 0.5 * g.spacing * g.spacing;
    let mut hits: Vec<Hit> = vec![None; g.width * g.height];
    for (p, n) in local.iter().zip(normals) {
        let (fu, fv) = g.pixel_of(p.x, p.y);
        let (ulo, uhi) = ((fu - 1.0).floor().max(1.0), (fu + 1.0).ceil().min(g.width as f64));
        let (vlo, vhi) = ((fv - 1.0).floor().max(1.0), (fv + 1.0).ceil().min(g.height as f64));
        if ulo > uhi || vlo > vhi {
            continue;
        }
        for v in vlo as usize..=vhi as usize {
            for u in ulo as usize..=uhi as usize {
                let (x, y) = g.pixel_center(u as f64, v as f64);
                if (p.x - x).powi(2) + (p.y - y).powi(2) > radius2 {
                    continue;
                }
                let slot = &mut hits[(v - 1) * g.width + (u - 1)];
                if slot.is_none_or(|(best, _)| p.z > best) {
                    *slot = Some((p.z, *n));
                }
            }
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, RigidTransform, UnitVector3};
    use nalgebra::{Rotation3, Unit};

    fn axis_frame() -> OcclusalFrame {
        OcclusalFrame { origin: Point3::origin(), u1: Vector3::x_axis(), u2: Vector3::y_axis(), u3: Vector3::z_axis() }
    }

    /// Upper unit hemisphere of radius `r` as a closed-fan triangle mesh.
    fn hemisphere(r: f64, rings: usize, sectors: usize) -> TriMesh {
        let mut vertices = vec![Point3::new(0.0, 0.0, r)];
        for i in 1..=rings {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / rings as f64;
            for j in 0..sectors {
                let phi = std::f64::consts::TAU * j as f64 / sectors as f64;
                vertices.push(Point3::new(r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()));
            }
        }
        let idx = |i: usize, j: usize| 1 + (i - 1) * sectors + j % sectors;
        let mut triangles = Vec::new();
        for j in 0..sectors {
            triangles.push([0, idx(1, j), idx(1, j + 1)]);
        }
        for i in 1..rings {
            for j in 0..sectors {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        TriMesh::new(vertices, triangles).unwrap()
    }

    #[test]
    fn pixel_geometry_round_trips() {
        let g = ImageGeometry::default();
        let (x, y) = g.pixel_center(1.0, 1.0);
        assert!((x + 0.2 * 199.5).abs() < 1e-12 && (y - 0.2 * 199.5).abs() < 1e-12);
        let (u, v) = g.pixel_of(x, y);
        assert!((u - 1.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_apex_is_fully_lit() {
        let mesh = hemisphere(5.0, 24, 48);
        // odd size puts a pixel centre exactly on the apex axis
        let g = ImageGeometry { width: 61, height: 61, spacing: 0.2 };
        let (ir, id) = render_images(Surface::Mesh(&mesh), &axis_frame(), &g).unwrap();
        let (col, row) = (30, 30);
        assert!((ir.get(col, row) - 1.0).abs() < 1e-2, "{}", ir.get(col, row));
        // apex is the highest hit, so it is the darkest depth value
        assert!(id.get(col, row) < 1e-6);
        // the corner misses
        assert_eq!(ir.get(0, 0), 0.0);
        assert_eq!(id.get(0, 0), 0.0);
        assert!(ir.values.iter().chain(&id.values).all(|v| (0.0..=1.0).contains(v)));
        assert!((ir.offset.z - 5.0).abs() < 1e-12);
    }

    #[test]
    fn flat_plane_depth_is_one() {
        let s = 0.2;
        let pts: Vec<Point3> = (0..20).flat_map(|i| (0..20).map(move |j| Point3::new(i as f64 * s - 2.05, j as f64 * s - 2.05, 3.0))).collect();
        let n = pts.len();
        let cloud = crate::geom::PointCloud::with_normals(pts, vec![Vector3::z_axis(); n]).unwrap();
        let g = ImageGeometry { width: 40, height: 40, spacing: s };
        let (ir, id) = render_images(Surface::Points(&cloud), &axis_frame(), &g).unwrap();
        let hits = ir.values.iter().filter(|&&v| v > 0.0).count();
        assert!(hits >= n);
        for (r, d) in ir.values.iter().zip(&id.values) {
            if *r > 0.0 {
                assert_eq!(*d, 1.0);
                assert!((*r - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(*d, 0.0);
            }
        }
    }

    #[test]
    fn empty_projection() {
        let cloud = crate::geom::PointCloud::with_normals(vec![Point3::new(1e6, 0.0, 0.0)], vec![Vector3::z_axis()]).unwrap();
        assert_eq!(
            render_images(Surface::Points(&cloud), &axis_frame(), &ImageGeometry::default()),
            Err(ProjectionError::EmptyProjection)
        );
    }

    #[test]
    fn images_invariant_under_joint_rigid_motion() {
        let mesh = hemisphere(4.0, 12, 30);
        let g = ImageGeometry { width: 50, height: 50, spacing: 0.2 };
        let frame = axis_frame();
        let t = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, 0.2, 1.0)), 0.9),
            Vector3::new(7.0, -3.0, 2.0),
        );
        let (a_r, a_d) = render_images(Surface::Mesh(&mesh), &frame, &g).unwrap();
        let (b_r, b_d) = render_images(Surface::Mesh(&mesh.transformed(&t)), &frame.transformed(&t), &g).unwrap();
        let agree = |x: &RasterImage, y: &RasterImage| {
            // a pixel centre exactly on a triangle edge may flip sides under rounding
            x.values.iter().zip(&y.values).filter(|(p, q)| (*p - *q).abs() > 1e-9).count()
        };
        assert!(agree(&a_r, &b_r) <= 2);
        assert!(agree(&a_d, &b_d) <= 2);
    }

    #[test]
    fn points_need_normals() {
        let cloud = crate::geom::PointCloud::new(vec![Point3::origin()]);
        assert_eq!(
            render_images(Surface::Points(&cloud), &axis_frame(), &ImageGeometry::default()),
            Err(ProjectionError::MissingNormals)
        );
        let _ = UnitVector3::new_normalize(Vector3::x());
    }
}
