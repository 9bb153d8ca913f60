use serde::{Deserialize, Serialize};

use super::{ImageGeometry, OcclusalFrame, ProjectionError};
use crate::geom::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToothClass {
    Incisor,
    Canine,
    Premolar,
    Molar,
}

impl ToothClass {
    pub const ALL: [ToothClass; 4] = [ToothClass::Incisor, ToothClass::Canine, ToothClass::Premolar, ToothClass::Molar];

    /// Teeth of this class in one quadrant.
    pub fn per_quadrant(self) -> usize {
        match self {
            ToothClass::Incisor => 2,
            ToothClass::Canine => 1,
            ToothClass::Premolar => 2,
            ToothClass::Molar => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToothClass::Incisor => "incisor",
            ToothClass::Canine => "canine",
            ToothClass::Premolar => "premolar",
            ToothClass::Molar => "molar",
        }
    }
}

impl std::str::FromStr for ToothClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToothClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown tooth class {s:?}"))
    }
}

/// Axis-aligned pixel box, left-top `(u1, v1)` to right-bottom `(u2, v2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox2D {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
    pub class: ToothClass,
}

impl BoundingBox2D {
    pub fn new(u1: f64, v1: f64, u2: f64, v2: f64, class: ToothClass) -> Result<Self, ProjectionError> {
        if !(u1 < u2 && v1 < v2) || ![u1, v1, u2, v2].iter().all(|c| c.is_finite()) {
            return Err(ProjectionError::InvalidInput(format!("invalid box ({u1}, {v1}, {u2}, {v2})")));
        }
        Ok(Self { u1, v1, u2, v2, class })
    }

    /// Box centre in the `(u, −v)` plane.
    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.u1 + self.u2), -0.5 * (self.v1 + self.v2)]
    }
}

/// Points of one box's prism.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub box_index: usize,
    /// Indices into the input cloud, ascending.
    pub indices: Vec<usize>,
    pub cloud: PointCloud,
}

impl Roi {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `Err(EmptyRoi)` for a box that captured no points.
    pub fn check(&self) -> Result<&Roi, ProjectionError> {
        if self.is_empty() {
            Err(ProjectionError::EmptyRoi { box_index: self.box_index })
        } else {
            Ok(self)
        }
    }
}

/// Points whose frame coordinates fall in `[s(u1 + a_x), s(u2 + a_x)) ×
/// [s(−v2 + a_y), s(−v1 + a_y)) × ℝ`, i.e. under the box on the image plane.
pub fn extract_rois(
    cloud: &PointCloud,
    frame: &OcclusalFrame,
    boxes: &[BoundingBox2D],
    geometry: &ImageGeometry,
) -> Result<Vec<Roi>, ProjectionError> {
    geometry.validate()?;
    let local: Vec<_> = cloud.points().iter().map(|p| frame.to_local(p)).collect();
    let s = geometry.spacing;
    Ok(boxes
        .iter()
        .enumerate()
        .map(|(box_index, b)| {
            let (x0, x1) = (s * (b.u1 + geometry.a_x()), s * (b.u2 + geometry.a_x()));
            let (y0, y1) = (s * (-b.v2 + geometry.a_y()), s * (-b.v1 + geometry.a_y()));
            let indices: Vec<usize> = local
                .iter()
                .enumerate()
                .filter(|(_, p)| p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1)
                .map(|(i, _)| i)
                .collect();
            let cloud = cloud.select(&indices);
            Roi { box_index, indices, cloud }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame() -> OcclusalFrame {
        OcclusalFrame { origin: Point3::new(1.0, 2.0, 3.0), u1: Vector3::x_axis(), u2: Vector3::y_axis(), u3: Vector3::z_axis() }
    }

    fn cloud(seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..500)
                .map(|_| Point3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-5.0..5.0)))
                .collect(),
        )
    }

    #[test]
    fn full_image_box_takes_everything() {
        let g = ImageGeometry::default();
        let c = cloud(1);
        let b = BoundingBox2D::new(0.0, 0.0, 401.0, 401.0, ToothClass::Molar).unwrap();
        let rois = extract_rois(&c, &frame(), &[b], &g).unwrap();
        assert_eq!(rois[0].indices, (0..c.len()).collect::<Vec<_>>());
    }

    #[test]
    fn box_left_of_everything_is_empty() {
        let g = ImageGeometry::default();
        let b = BoundingBox2D::new(1.0, 1.0, 5.0, 400.0, ToothClass::Incisor).unwrap();
        let rois = extract_rois(&cloud(2), &frame(), &[b], &g).unwrap();
        assert_eq!(rois[0].check(), Err(ProjectionError::EmptyRoi { box_index: 0 }));
    }

    #[test]
    fn random_boxes_match_linear_scan() {
        let g = ImageGeometry::default();
        let c = cloud(3);
        let f = frame();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let boxes: Vec<_> = (0..30)
            .map(|_| {
                let (u, v) = (rng.random_range(50.0..350.0), rng.random_range(50.0..350.0));
                BoundingBox2D::new(u, v, u + rng.random_range(1.0..60.0), v + rng.random_range(1.0..60.0), ToothClass::Premolar).unwrap()
            })
            .collect();
        let rois = extract_rois(&c, &f, &boxes, &g).unwrap();
        for (b, roi) in boxes.iter().zip(&rois) {
            // membership through pixel coordinates instead of plane coordinates
            let expected: Vec<usize> = (0..c.len())
                .filter(|&i| {
                    let p = c.points()[i] - f.origin;
                    let (x_lo, _) = g.pixel_center(b.u1, 0.0);
                    let (x_hi, _) = g.pixel_center(b.u2, 0.0);
                    let (_, y_hi) = g.pixel_center(0.0, b.v1);
                    let (_, y_lo) = g.pixel_center(0.0, b.v2);
                    p.x >= x_lo && p.x < x_hi && p.y >= y_lo && p.y < y_hi
                })
                .collect();
            assert_eq!(roi.indices, expected);
        }
        // reproducible bit-exactly
        assert_eq!(extract_rois(&c, &f, &boxes, &g).unwrap(), rois);
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(BoundingBox2D::new(5.0, 1.0, 4.0, 2.0, ToothClass::Canine).is_err());
        assert_eq!("canine".parse::<ToothClass>(), Ok(ToothClass::Canine));
    }
}
