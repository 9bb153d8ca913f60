use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;

use crate::geom::{Point3, TriMesh};
use crate::projection::ToothClass;

/// Gaussian bump on the occlusal surface, in coordinates normalised by the
/// crown half-extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cusp {
    pub center: [f64; 2],
    pub height: f64,
    pub width: f64,
}

/// Two-half superellipsoid tooth proxy in its local frame: `x` along the
/// arch, `y` bucco-lingual, `z` occlusal. The crown occupies `z ≥ 0`
/// (height `crown_height` plus cusps), the tapered root `z < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToothShape {
    pub class: ToothClass,
    pub half_width: f64,
    pub half_depth: f64,
    pub crown_height: f64,
    pub root_length: f64,
    /// Meridional and azimuthal superellipsoid exponents.
    pub exponents: [f64; 2],
    pub root_taper: f64,
    pub cusps: Vec<Cusp>,
}

/// Half width (along the arch), half depth, crown height and root length of
/// a class, mm.
pub fn class_dimensions(class: ToothClass) -> [f64; 4] {
    match class {
        ToothClass::Incisor => [2.6, 3.0, 5.0, 11.0],
        ToothClass::Canine => [3.4, 3.8, 6.0, 14.0],
        ToothClass::Premolar => [3.4, 4.0, 5.0, 12.0],
        ToothClass::Molar => [5.0, 5.0, 4.5, 11.0],
    }
}

impl ToothShape {
    /// Class template with randomly jittered cusps.
    pub fn random(class: ToothClass, rng: &mut impl Rng) -> Self {
        let [half_width, half_depth, crown_height, root_length] = class_dimensions(class);
        let template: &[([f64; 2], f64, f64)] = match class {
            ToothClass::Incisor => &[([0.0, 0.35], 0.5, 0.45), ([-0.55, 0.3], 0.25, 0.3), ([0.55, 0.3], 0.25, 0.3)],
            ToothClass::Canine => &[([0.0, 0.2], 1.4, 0.35), ([0.0, -0.45], 0.3, 0.35)],
            ToothClass::Premolar => &[([0.0, 0.4], 1.0, 0.35), ([0.0, -0.4], 0.6, 0.35)],
            ToothClass::Molar => &[
                ([-0.45, 0.45], 1.0, 0.3),
                ([0.45, 0.45], 0.8, 0.3),
                ([-0.45, -0.45], 0.75, 0.3),
                ([0.45, -0.45], 0.7, 0.3),
            ],
        };
        let cusps = template
            .iter()
            .map(|&(c, h, w)| Cusp {
                center: [c[0] + rng.random_range(-0.08..0.08), c[1] + rng.random_range(-0.08..0.08)],
                height: h * rng.random_range(0.85..1.15),
                width: w * rng.random_range(0.9..1.1),
            })
            .collect();
        Self {
            class,
            half_width,
            half_depth,
            crown_height,
            root_length,
            exponents: [0.6, 0.7],
            root_taper: 0.6,
            cusps,
        }
    }

    fn cusp_relief(&self, u: f64, v: f64) -> f64 {
        self.cusps
            .iter()
            .map(|c| {
                let d2 = (u - c.center[0]).powi(2) + (v - c.center[1]).powi(2);
                c.height * (-d2 / (2.0 * c.width * c.width)).exp()
            })
            .sum()
    }

    /// Surface point at latitude `eta ∈ [−π/2, π/2]` and azimuth `omega`.
    pub fn surface_point(&self, eta: f64, omega: f64) -> Point3 {
        let [e1, e2] = self.exponents;
        let spow = |v: f64, m: f64| v.signum() * v.abs().powf(m);
        let ring = spow(eta.cos(), e1).max(0.0);
        let (u, v) = (ring * spow(omega.cos(), e2), ring * spow(omega.sin(), e2));
        let lift = spow(eta.sin(), e1);
        if eta >= 0.0 {
            // relief fades out towards the crown margin
            let weight = eta.sin().powi(4);
            let z = self.crown_height * lift + weight * self.cusp_relief(u, v);
            Point3::new(self.half_width * u, self.half_depth * v, z)
        } else {
            let shrink = 1.0 - self.root_taper * eta.sin().abs();
            Point3::new(self.half_width * u * shrink, self.half_depth * v * shrink, self.root_length * lift)
        }
    }
}

/// Closed triangle mesh of a tooth sampled on latitude rings.
#[derive(Debug, Clone, PartialEq)]
pub struct ToothMesh {
    pub mesh: TriMesh,
    /// Vertices `0..crown_vertices` form the crown (`z ≥ 0` rings).
    pub crown_vertices: usize,
    /// Triangles `0..crown_triangles` use crown vertices only.
    pub crown_triangles: usize,
}

impl ToothMesh {
    pub fn crown_mesh(&self) -> TriMesh {
        TriMesh {
            vertices: self.mesh.vertices[..self.crown_vertices].to_vec(),
            triangles: self.mesh.triangles[..self.crown_triangles].to_vec(),
        }
    }

    /// Highest crown vertex: the apex of the main cusp.
    pub fn landmark(&self) -> Point3 {
        *self.mesh.vertices[..self.crown_vertices]
            .iter()
            .max_by(|a, b| a.z.total_cmp(&b.z))
            .expect("crown has vertices")
    }
}

/// Samples `shape` on `rings + 1` latitude rings (`rings` even, pole to
/// pole). Ring `i` carries about `2·rings·cos η_i` vertices at a random
/// phase. Triangles are wound outward.
pub fn tooth_mesh(shape: &ToothShape, rings: usize, rng: &mut impl Rng) -> ToothMesh {
    let rings = rings.max(4) & !1;
    let mut vertices = Vec::new();
    let mut ring_ids: Vec<Vec<(usize, f64)>> = Vec::with_capacity(rings + 1);
    for i in 0..=rings {
        let eta = FRAC_PI_2 - PI * i as f64 / rings as f64;
        let count = if i == 0 || i == rings { 1 } else { ((2 * rings) as f64 * eta.cos()).round().max(3.0) as usize };
        let phase = if count == 1 { 0.0 } else { rng.random_range(0.0..TAU / count as f64) };
        let ring = (0..count)
            .map(|k| {
                let omega = phase + TAU * k as f64 / count as f64;
                vertices.push(shape.surface_point(eta, omega));
                (vertices.len() - 1, omega)
            })
            .collect();
        ring_ids.push(ring);
    }
    let crown_vertices = ring_ids[rings / 2].last().unwrap().0 + 1;

    let mut triangles = Vec::new();
    let mut crown_triangles = 0;
    for i in 0..rings {
        zipper(&ring_ids[i], &ring_ids[i + 1], &mut triangles);
        if i + 1 == rings / 2 {
            crown_triangles = triangles.len();
        }
    }
    let mut mesh = TriMesh { vertices, triangles };
    orient_outward(&mut mesh);
    ToothMesh { mesh, crown_vertices, crown_triangles }
}

/// Triangulates the band between two rings of `(vertex, azimuth)` pairs.
fn zipper(a: &[(usize, f64)], b: &[(usize, f64)], out: &mut Vec<[usize; 3]>) {
    let (p, q) = (a.len(), b.len());
    if p == 1 {
        for j in 0..q {
            out.push([a[0].0, b[j].0, b[(j + 1) % q].0]);
        }
        return;
    }
    if q == 1 {
        for i in 0..p {
            out.push([a[i].0, a[(i + 1) % p].0, b[0].0]);
        }
        return;
    }
    // unwrapped azimuth of the k-th vertex past the start
    let angle = |ring: &[(usize, f64)], k: usize| ring[k % ring.len()].1 + TAU * (k / ring.len()) as f64;
    let (mut i, mut j) = (0, 0);
    while i < p || j < q {
        let advance_a = j == q || (i < p && angle(a, i + 1) < angle(b, j + 1));
        if advance_a {
            out.push([a[i % p].0, b[j % q].0, a[(i + 1) % p].0]);
            i += 1;
        } else {
            out.push([a[i % p].0, b[j % q].0, b[(j + 1) % q].0]);
            j += 1;
        }
    }
}

/// Flips triangles whose normal points towards the tooth axis.
fn orient_outward(mesh: &mut TriMesh) {
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i]);
        let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
        // star-shaped about the crown-root junction on the axis
        let outward = centroid.coords;
        if mesh.face_normal(t).dot(&outward) < 0.0 {
            mesh.triangles[t].swap(1, 2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signed_volume(m: &TriMesh) -> f64 {
        m.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| m.vertices[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn tooth_meshes_are_closed_and_outward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for class in ToothClass::ALL {
            let shape = ToothShape::random(class, &mut rng);
            let tm = tooth_mesh(&shape, 22, &mut rng);
            assert!(tm.mesh.is_closed(), "{class:?}");
            assert!(signed_volume(&tm.mesh) > 0.0);
            let crown = tm.crown_mesh();
            assert!(crown.vertices.iter().all(|p| p.z >= -1e-12));
            assert!(tm.mesh.vertices[tm.crown_vertices..].iter().all(|p| p.z < 0.0));
            assert!(crown.triangles.iter().flatten().all(|&i| i < tm.crown_vertices));
            assert!(tm.landmark().z > shape.crown_height);
            let n = tm.mesh.vertices.len();
            assert!((450..800).contains(&n), "{n}");
        }
    }

    #[test]
    fn shape_extents_follow_class_template() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shape = ToothShape::random(ToothClass::Molar, &mut rng);
        let p = shape.surface_point(0.0, 0.0);
        assert!((p.x - 5.0).abs() < 1e-12 && p.z.abs() < 1e-12);
        let apex = shape.surface_point(-FRAC_PI_2, 0.0);
        assert!((apex.z + 11.0).abs() < 1e-9 && apex.x.abs() < 1e-8);
    }
}
