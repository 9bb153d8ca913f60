use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tooth::{class_dimensions, tooth_mesh, ToothMesh, ToothShape};
use super::SynthError;
use crate::arch::{Jaw, LabeledArch, ToothCode};
use crate::geom::{Matrix3, Point3, PointCloud, RigidTransform, TriMesh, UnitVector3, Vector3};
use crate::projection::ToothClass;

/// Classes from the midline outward within one quadrant.
const QUADRANT: [ToothClass; 8] = [
    ToothClass::Incisor,
    ToothClass::Incisor,
    ToothClass::Canine,
    ToothClass::Premolar,
    ToothClass::Premolar,
    ToothClass::Molar,
    ToothClass::Molar,
    ToothClass::Molar,
];
/// Gap between neighbouring crowns along the arch, mm.
const CONTACT_GAP: f64 = 0.4;
/// Arch depth as a fraction of the span.
const DEPTH_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub jaw: Jaw,
    /// Number of teeth `J`, third molars dropped first.
    pub tooth_count: usize,
    /// Transverse reference width of the parabolic arch, mm.
    pub arch_span: f64,
    /// Approximate vertex count of a full (crown + root) tooth.
    pub points_per_tooth: usize,
    /// Approximate vertex count of the gingiva ribbon in the IOS arch.
    pub gingiva_points: usize,
    pub noise_sigma: f64,
    /// Per-step random-walk sigmas, rad and mm.
    pub drift_sigma_rot: f64,
    pub drift_sigma_trans: f64,
    /// Maps the undrifted IOS frame onto the CBCT frame.
    pub global_offset: RigidTransform,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            jaw: Jaw::Mandible,
            tooth_count: 14,
            arch_span: 50.0,
            points_per_tooth: 600,
            gingiva_points: 1200,
            noise_sigma: 0.0,
            drift_sigma_rot: 0.0,
            drift_sigma_trans: 0.0,
            global_offset: RigidTransform::identity(),
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(1..=16).contains(&self.tooth_count) {
            return bad(format!("tooth_count must be in 1..=16, got {}", self.tooth_count));
        }
        if !(self.arch_span.is_finite() && self.arch_span > 0.0) {
            return bad(format!("arch_span must be positive, got {}", self.arch_span));
        }
        if self.points_per_tooth < 40 {
            return bad(format!("points_per_tooth must be >= 40, got {}", self.points_per_tooth));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("drift_sigma_rot", self.drift_sigma_rot),
            ("drift_sigma_trans", self.drift_sigma_trans),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// A landmark seen in both arches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPair {
    pub code: ToothCode,
    pub ios: Point3,
    pub cbct: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// IOS → CBCT map in the absence of drift.
    pub global: RigidTransform,
    /// Stitching drift of each IOS tooth, undrifted → scanned.
    pub drift: BTreeMap<ToothCode, RigidTransform>,
    /// One cusp apex per tooth, ascending code.
    pub landmarks: Vec<LandmarkPair>,
    /// Occlusal direction of the undrifted IOS arch.
    pub occlusal_normal: UnitVector3,
}

impl GroundTruth {
    pub fn ios_landmarks(&self) -> Vec<Point3> {
        self.landmarks.iter().map(|l| l.ios).collect()
    }

    pub fn cbct_landmarks(&self) -> Vec<Point3> {
        self.landmarks.iter().map(|l| l.cbct).collect()
    }
}

/// Generated IOS / CBCT pair. Arch segments are the labelled vertices of the
/// meshes; the IOS residual is the gingiva ribbon.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub ios: LabeledArch,
    pub cbct: LabeledArch,
    pub truth: GroundTruth,
    pub ios_mesh: TriMesh,
    pub ios_labels: BTreeMap<ToothCode, Vec<usize>>,
    pub cbct_mesh: TriMesh,
    pub cbct_labels: BTreeMap<ToothCode, Vec<usize>>,
    pub classes: BTreeMap<ToothCode, ToothClass>,
}

/// Parabola `y = −κx²` walked by arc length from the apex.
#[derive(Debug, Clone, Copy)]
struct ArchCurve {
    kappa: f64,
}

impl ArchCurve {
    fn arc_length(&self, x: f64) -> f64 {
        let u = 2.0 * self.kappa * x;
        (u * (1.0 + u * u).sqrt() + u.asinh()) / (4.0 * self.kappa)
    }

    fn x_at(&self, s: f64) -> f64 {
        let mut x = s;
        for _ in 0..60 {
            let step = (self.arc_length(x) - s) / (1.0 + (2.0 * self.kappa * x).powi(2)).sqrt();
            x -= step;
            if step.abs() < 1e-14 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// Local frame at arc length `s`: columns are the tangent, the outward
    /// normal in the occlusal plane and the occlusal direction.
    fn frame(&self, s: f64, jaw: Jaw) -> RigidTransform {
        let x = self.x_at(s);
        let t = Vector3::new(1.0, -2.0 * self.kappa * x, 0.0).normalize();
        let n = Vector3::new(-t.y, t.x, 0.0);
        let z = Vector3::z();
        // the upper jaw is the lower one turned over about the tangent
        let (n, z) = match jaw {
            Jaw::Mandible => (n, z),
            Jaw::Maxilla => (-n, -z),
        };
        let r = Matrix3::from_columns(&[t, n, z]);
        RigidTransform::new(r, Vector3::new(x, -self.kappa * x * x, 0.0)).expect("frame is orthonormal")
    }
}

struct Placed {
    code: ToothCode,
    class: ToothClass,
    arc: f64,
    place: RigidTransform,
    tooth: ToothMesh,
    half_depth: f64,
}

/// Universal code of the `k`-th tooth from the midline on the patient's left
/// (`left = true`, negative `x`) or right.
fn code_for(jaw: Jaw, left: bool, k: usize) -> ToothCode {
    let k = k as u32;
    let code = match (jaw, left) {
        (Jaw::Mandible, true) => 24 - k,
        (Jaw::Mandible, false) => 25 + k,
        (Jaw::Maxilla, true) => 9 + k,
        (Jaw::Maxilla, false) => 8 - k,
    };
    ToothCode::new(code).expect("code within jaw")
}

fn gaussian3(rng: &mut impl Rng) -> Vector3 {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Random rigid transform: uniform axis, angle uniform in `[0, max_angle]`,
/// translation uniform in the ball of radius `max_translation`.
pub fn random_offset(seed: u64, max_angle: f64, max_translation: f64) -> RigidTransform {
    let mut rng = stream(seed, 3);
    let axis = loop {
        if let Some(a) = UnitVector3::try_new(gaussian3(&mut rng), 1e-9) {
            break a;
        }
    };
    let angle = rng.random_range(0.0..=max_angle);
    let dir = loop {
        if let Some(d) = UnitVector3::try_new(gaussian3(&mut rng), 1e-9) {
            break d;
        }
    };
    let radius = max_translation * rng.random::<f64>().cbrt();
    let rot = RigidTransform::rotation_about(&axis, angle, &Point3::origin());
    RigidTransform::from_translation(dir.into_inner() * radius).compose(&rot)
}

/// Generates a labelled IOS / CBCT arch pair with known ground truth.
///
/// Shapes, drift and noise draw from independent streams of the seed, so
/// changing a sigma leaves the other random components untouched.
pub fn generate_arch_pair(cfg: &SynthConfig) -> Result<SynthPair, SynthError> {
    cfg.validate()?;
    let curve = ArchCurve { kappa: 4.0 * DEPTH_RATIO / cfg.arch_span };
    let rings = ((cfg.points_per_tooth as f64 * std::f64::consts::PI / 4.0).sqrt().round() as usize).max(4);

    let removed = 16 - cfg.tooth_count;
    let keep_left = 8 - removed.div_ceil(2);
    let keep_right = 8 - removed / 2;

    let mut shape_rng = stream(cfg.rng_seed, 0);
    let mut teeth: Vec<Placed> = Vec::new();
    let mut arc = CONTACT_GAP / 2.0;
    for (k, class) in QUADRANT.into_iter().enumerate() {
        let half_width = class_dimensions(class)[0];
        let center = arc + half_width;
        arc += 2.0 * half_width + CONTACT_GAP;
        for (left, keep) in [(true, keep_left), (false, keep_right)] {
            // draw for every slot so J does not reshuffle the kept teeth
            let shape = ToothShape::random(class, &mut shape_rng);
            let tooth = tooth_mesh(&shape, rings, &mut shape_rng);
            if k >= keep {
                continue;
            }
            let s = if left { -center } else { center };
            teeth.push(Placed {
                code: code_for(cfg.jaw, left, k),
                class,
                arc: s,
                place: curve.frame(s, cfg.jaw),
                tooth,
                half_depth: shape.half_depth,
            });
        }
    }
    teeth.sort_by_key(|t| t.code);

    // stitching drift, cumulative in ascending code (= arch) order
    let mut drift_rng = stream(cfg.rng_seed, 1);
    let mut drift = BTreeMap::new();
    let mut acc = RigidTransform::identity();
    for t in &teeth {
        let rotvec = gaussian3(&mut drift_rng) * cfg.drift_sigma_rot;
        let shift = gaussian3(&mut drift_rng) * cfg.drift_sigma_trans;
        let center = t.place.apply(&Point3::origin());
        let step = match UnitVector3::try_new(rotvec, 0.0) {
            Some(axis) => RigidTransform::rotation_about(&axis, rotvec.norm(), &center),
            None => RigidTransform::identity(),
        };
        let step = RigidTransform::from_translation(shift).compose(&step);
        acc = acc.compose(&step);
        drift.insert(t.code, acc);
    }

    // CBCT: full teeth under the global offset
    let mut cbct_mesh = TriMesh { vertices: Vec::new(), triangles: Vec::new() };
    let mut cbct_labels = BTreeMap::new();
    let mut cbct_segments = BTreeMap::new();
    for t in &teeth {
        let m = t.tooth.mesh.transformed(&cfg.global_offset.compose(&t.place));
        let base = append(&mut cbct_mesh, &m);
        cbct_labels.insert(t.code, (base..base + m.vertices.len()).collect::<Vec<_>>());
        cbct_segments.insert(t.code, PointCloud::new(m.vertices));
    }

    // IOS: drifted crowns plus a gingiva ribbon following the nearest tooth
    let mut ios_mesh = TriMesh { vertices: Vec::new(), triangles: Vec::new() };
    let mut ios_labels = BTreeMap::new();
    for t in &teeth {
        let m = t.tooth.crown_mesh().transformed(&drift[&t.code].compose(&t.place));
        let base = append(&mut ios_mesh, &m);
        ios_labels.insert(t.code, (base..base + m.vertices.len()).collect::<Vec<_>>());
    }
    let gingiva_start = ios_mesh.vertices.len();
    if cfg.gingiva_points > 0 {
        let ribbon = gingiva_ribbon(&curve, cfg, &teeth, &drift);
        append(&mut ios_mesh, &ribbon);
    }

    let mut noise_rng = stream(cfg.rng_seed, 2);
    if cfg.noise_sigma > 0.0 {
        for v in &mut ios_mesh.vertices {
            *v += gaussian3(&mut noise_rng) * cfg.noise_sigma;
        }
    }

    let ios_segments = ios_labels
        .iter()
        .map(|(&c, idx)| (c, PointCloud::new(idx.iter().map(|&i| ios_mesh.vertices[i]).collect())))
        .collect();
    let ios_residual = PointCloud::new(ios_mesh.vertices[gingiva_start..].to_vec());

    let landmarks = teeth
        .iter()
        .map(|t| {
            let local = t.tooth.landmark();
            LandmarkPair {
                code: t.code,
                ios: drift[&t.code].compose(&t.place).apply(&local),
                cbct: cfg.global_offset.compose(&t.place).apply(&local),
            }
        })
        .collect();
    let occlusal_normal = match cfg.jaw {
        Jaw::Mandible => Vector3::z_axis(),
        Jaw::Maxilla => -Vector3::z_axis(),
    };

    let arch_err = |e| SynthError::Arch(e);
    Ok(SynthPair {
        ios: LabeledArch::new(cfg.jaw, ios_segments, ios_residual).map_err(arch_err)?,
        cbct: LabeledArch::new(cfg.jaw, cbct_segments, PointCloud::default()).map_err(arch_err)?,
        truth: GroundTruth { global: cfg.global_offset, drift, landmarks, occlusal_normal },
        ios_mesh,
        ios_labels,
        cbct_mesh,
        cbct_labels,
        classes: teeth.iter().map(|t| (t.code, t.class)).collect(),
    })
}

/// Appends `m` to `into`, returning the vertex offset.
fn append(into: &mut TriMesh, m: &TriMesh) -> usize {
    let base = into.vertices.len();
    into.vertices.extend_from_slice(&m.vertices);
    into.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
    base
}

/// Buccal and lingual gum strips sloping away from the crown margins. Each
/// vertex follows the drift of the tooth nearest along the arch.
fn gingiva_ribbon(curve: &ArchCurve, cfg: &SynthConfig, teeth: &[Placed], drift: &BTreeMap<ToothCode, RigidTransform>) -> TriMesh {
    const COLUMNS: usize = 6;
    const PITCH: f64 = 0.6;
    let lo = teeth.iter().map(|t| t.arc).fold(f64::INFINITY, f64::min) - 3.0;
    let hi = teeth.iter().map(|t| t.arc).fold(f64::NEG_INFINITY, f64::max) + 3.0;
    let rows = (cfg.gingiva_points / (2 * COLUMNS)).max(2);

    let mut mesh = TriMesh { vertices: Vec::new(), triangles: Vec::new() };
    for side in [1.0, -1.0] {
        let base = mesh.vertices.len();
        for r in 0..rows {
            let s = lo + (hi - lo) * r as f64 / (rows - 1) as f64;
            let nearest = teeth
                .iter()
                .min_by(|a, b| (a.arc - s).abs().total_cmp(&(b.arc - s).abs()))
                .expect("at least one tooth");
            let frame = curve.frame(s, cfg.jaw);
            let to_scan = drift[&nearest.code].compose(&frame);
            for c in 0..COLUMNS {
                let d = 0.3 + PITCH * c as f64;
                let local = Point3::new(0.0, side * (nearest.half_depth + d), -0.3 - 0.35 * d);
                mesh.vertices.push(to_scan.apply(&local));
            }
        }
        let id = |r: usize, c: usize| base + r * COLUMNS + c;
        for r in 0..rows - 1 {
            for c in 0..COLUMNS - 1 {
                // wound so the face normal has a positive occlusal component
                let (a, b, cc, d) = (id(r, c), id(r + 1, c), id(r + 1, c + 1), id(r, c + 1));
                if side > 0.0 {
                    mesh.triangles.push([a, b, cc]);
                    mesh.triangles.push([a, cc, d]);
                } else {
                    mesh.triangles.push([a, cc, b]);
                    mesh.triangles.push([a, d, cc]);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_pair_crowns_coincide_with_cbct_vertices() {
        let pair = generate_arch_pair(&SynthConfig::default()).unwrap();
        assert_eq!(pair.ios.tooth_count(), 14);
        let codes: Vec<u8> = pair.ios.codes().map(|c| c.get()).collect();
        assert_eq!(codes, (18..=31).collect::<Vec<_>>());
        for (code, seg) in pair.ios.segments() {
            let full = pair.cbct.segment(*code).unwrap();
            assert!(seg.len() < full.len());
            assert_eq!(&full.points()[..seg.len()], seg.points());
        }
        for l in &pair.truth.landmarks {
            assert_eq!(l.ios, l.cbct);
        }
        assert!(!pair.ios.residual().is_empty());
        assert!(pair.cbct.residual().is_empty());
    }

    #[test]
    fn left_side_is_negative_x() {
        for jaw in [Jaw::Mandible, Jaw::Maxilla] {
            let pair = generate_arch_pair(&SynthConfig { jaw, tooth_count: 16, ..Default::default() }).unwrap();
            for (code, seg) in pair.ios.segments() {
                let left = match jaw {
                    Jaw::Mandible => code.get() <= 24,
                    Jaw::Maxilla => code.get() >= 9,
                };
                let x = seg.centroid().unwrap().x;
                assert_eq!(x < 0.0, left, "{jaw} {code}");
                let crown_tip = seg.points().iter().map(|p| p.z).fold(0.0f64, |m, z| if z.abs() > m.abs() { z } else { m });
                assert_eq!(crown_tip > 0.0, jaw == Jaw::Mandible);
            }
        }
    }

    #[test]
    fn offset_maps_clean_ios_onto_cbct() {
        let offset = RigidTransform::rotation_about(&Vector3::y_axis(), 0.3, &Point3::new(1.0, 2.0, 3.0));
        let pair = generate_arch_pair(&SynthConfig { global_offset: offset, tooth_count: 9, ..Default::default() }).unwrap();
        for l in &pair.truth.landmarks {
            assert!((offset.apply(&l.ios) - l.cbct).norm() < 1e-12);
        }
        assert_eq!(pair.truth.landmarks.len(), 9);
    }

    #[test]
    fn sigmas_only_touch_their_own_component() {
        let base = SynthConfig { rng_seed: 5, ..Default::default() };
        let clean = generate_arch_pair(&base).unwrap();
        let noisy = generate_arch_pair(&SynthConfig { noise_sigma: 0.02, ..base.clone() }).unwrap();
        assert_eq!(clean.cbct, noisy.cbct);
        assert_eq!(clean.truth, noisy.truth);
        assert_ne!(clean.ios, noisy.ios);
        assert_eq!(generate_arch_pair(&base).unwrap(), clean);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { tooth_count: 0, ..Default::default() },
            SynthConfig { tooth_count: 17, ..Default::default() },
            SynthConfig { noise_sigma: -1.0, ..Default::default() },
            SynthConfig { drift_sigma_rot: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(generate_arch_pair(&cfg), Err(SynthError::InvalidConfig(_))));
        }
    }

    #[test]
    fn random_offsets_respect_bounds() {
        for seed in 0..200 {
            let t = random_offset(seed, 0.5, 50.0);
            assert!(t.rotation_angle() <= 0.5 + 1e-12);
            assert!(t.translation().norm() <= 50.0 + 1e-9);
        }
        assert_eq!(random_offset(3, 0.5, 50.0), random_offset(3, 0.5, 50.0));
    }

    #[test]
    fn arc_length_inverse() {
        let c = ArchCurve { kappa: 0.064 };
        for s in [-40.0, -3.0, 0.0, 0.5, 27.0] {
            assert!((c.arc_length(c.x_at(s)) - s).abs() < 1e-10);
        }
    }
}
