use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use dentreg::arch::{correct_stitching, partition_gingiva, transform_arch, ArchError, GingivaPartition, ToothCode};
use dentreg::geom::{RigidTransform, TriMesh};
use dentreg::io::{self, LabelFile};
use dentreg::pipeline::{run_pipeline_observed, PipelineError};
use dentreg::projection::{
    extract_rois, occlusal_frame, order_and_identify, render_images, BoundingBox2D, ImageGeometry, OcclusalFrame, Surface,
};
use dentreg::registration::{global_align, ticp_refine_observed, CorrespondenceSet, IcpIteration};
use dentreg::synth::{generate_arch_pair, random_offset, IcpSummary, SynthConfig, SynthError};

use crate::failure::{from_pipeline, from_projection, from_registration, Classify, Failure};
use crate::inputs::{self, MeshArch};
use crate::report::{evaluate_stage, EvalReport, IntegrateReport};
use crate::{CorrectArgs, EvalArgs, IdentifyArgs, IntegrateArgs, ProjectArgs, RegisterArgs, RoisArgs, SynthArgs};

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    if !(a.offset_angle.is_finite() && a.offset_angle >= 0.0 && a.offset_trans.is_finite() && a.offset_trans >= 0.0) {
        return Err(Failure::usage("--offset-angle and --offset-trans must be finite and >= 0"));
    }
    let cfg = SynthConfig {
        jaw: a.jaw,
        tooth_count: a.teeth,
        points_per_tooth: a.points,
        gingiva_points: a.gingiva,
        noise_sigma: a.noise,
        drift_sigma_rot: a.drift_rot,
        drift_sigma_trans: a.drift_trans,
        global_offset: random_offset(a.seed, a.offset_angle.to_radians(), a.offset_trans),
        rng_seed: a.seed,
        ..Default::default()
    };
    let pair = generate_arch_pair(&cfg).map_err(|e| match e {
        SynthError::InvalidConfig(_) => Failure::Usage(anyhow::Error::new(e)),
        other => Failure::Numerical(anyhow::Error::new(other).context("synthesis")),
    })?;

    let (ios_stl, ios_mesh, ios_labels) = stl_with_labels(&pair.ios_mesh, &pair.ios_labels);
    let (cbct_stl, _, cbct_labels) = stl_with_labels(&pair.cbct_mesh, &pair.cbct_labels);
    let out = &a.out;
    inputs::write(out, "ios.stl", &ios_stl)?;
    inputs::write(out, "ios.labels", io::write_labels(&LabelFile { jaw: a.jaw, labels: ios_labels.clone() }).as_bytes())?;
    inputs::write(out, "cbct.stl", &cbct_stl)?;
    inputs::write(out, "cbct.labels", io::write_labels(&LabelFile { jaw: a.jaw, labels: cbct_labels }).as_bytes())?;
    inputs::write(out, "truth.transform", io::write_transform(&pair.truth.global).as_bytes())?;
    inputs::write(out, "drift.tooth-transforms", io::write_tooth_transforms(&pair.truth.drift).as_bytes())?;
    let lm = |f: fn(&dentreg::synth::LandmarkPair) -> dentreg::geom::Point3| {
        io::write_landmarks(&pair.truth.landmarks.iter().map(|l| (l.code, f(l))).collect::<Vec<_>>())
    };
    inputs::write(out, "ios.landmarks", lm(|l| l.ios).as_bytes())?;
    inputs::write(out, "cbct.landmarks", lm(|l| l.cbct).as_bytes())?;

    // ground-truth boxes on the default occlusal image of the written mesh
    let frame = mesh_frame(&ios_mesh)?;
    let geometry = ImageGeometry::default();
    let boxes: Vec<BoundingBox2D> = ios_labels
        .iter()
        .map(|(code, idx)| {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in idx {
                let p = frame.to_local(&ios_mesh.vertices[i]);
                let (u, v) = geometry.pixel_of(p.x, p.y);
                lo = [lo[0].min(u), lo[1].min(v)];
                hi = [hi[0].max(u), hi[1].max(v)];
            }
            BoundingBox2D::new(lo[0] - 0.5, lo[1] - 0.5, hi[0] + 0.5, hi[1] + 0.5, pair.classes[code]).expect("tooth has extent")
        })
        .collect();
    inputs::write(out, "ios.boxes", io::write_boxes(&boxes).as_bytes())?;
    println!("wrote synthetic {} pair with {} teeth to {}", a.jaw, pair.ios.tooth_count(), out.display());
    Ok(())
}

/// Binary STL of `mesh` and the labels re-indexed to the vertex order a
/// reader recovers from it.
fn stl_with_labels(mesh: &TriMesh, labels: &BTreeMap<ToothCode, Vec<usize>>) -> (Vec<u8>, TriMesh, BTreeMap<ToothCode, Vec<usize>>) {
    let bytes = io::write_stl_binary(mesh);
    let back = io::read_stl(&bytes).expect("freshly written STL parses");
    let key = |p: &dentreg::geom::Point3| [p.x as f32, p.y as f32, p.z as f32].map(|c| if c == 0.0 { 0 } else { c.to_bits() });
    let lookup: HashMap<[u32; 3], usize> = back.vertices.iter().enumerate().map(|(i, p)| (key(p), i)).collect();
    let relabelled = labels
        .iter()
        .map(|(&c, idx)| {
            let mut seen = std::collections::HashSet::new();
            let new: Vec<usize> = idx.iter().filter_map(|&i| lookup.get(&key(&mesh.vertices[i])).copied()).filter(|&j| seen.insert(j)).collect();
            (c, new)
        })
        .collect();
    (bytes, back, relabelled)
}

fn mesh_frame(mesh: &TriMesh) -> Result<OcclusalFrame, Failure> {
    occlusal_frame(&mesh.to_cloud_with_normals()).map_err(|e| from_projection(e, "occlusal frame"))
}

fn log_line(log: &mut String, index: usize, it: &IcpIteration) {
    writeln!(log, "{} {} {} {} {}", index + 1, it.pairs, it.matched_residual, it.residual, it.rms).unwrap();
}

const LOG_HEADER: &str = "# iteration pairs matched_residual residual rms\n";

pub fn register(a: &RegisterArgs) -> Result<(), Failure> {
    let cfg = inputs::pipeline_config(&a.reg)?;
    let src = inputs::load_source(&a.inputs)?;
    let tgt = inputs::load_target(&a.inputs)?;
    let global = global_align(&src.arch, &tgt, &cfg.global).map_err(|e| from_registration(e, "global alignment"))?;
    let mut log = String::from(LOG_HEADER);
    let mut n = 0;
    let report = ticp_refine_observed(&src.arch, &tgt, &global.transform, &cfg.registration, &mut |it: &IcpIteration, _: &CorrespondenceSet| {
        log_line(&mut log, n, it);
        n += 1;
    })
    .map_err(|e| from_registration(e, "ICP refinement"))?;
    inputs::write(&a.out, "global.transform", io::write_transform(&global.transform).as_bytes())?;
    inputs::write(&a.out, "registration.transform", io::write_transform(&report.transform).as_bytes())?;
    inputs::write(&a.out, "residuals.log", log.as_bytes())?;
    let s = IcpSummary::of(&report);
    println!("registered: {} inliers, {} ICP iterations ({}), final residual {:e} mm", global.inliers.len(), s.iterations, s.stop, s.final_residual);
    Ok(())
}

/// Source mesh moved vertex by vertex: tooth vertices with their tooth's
/// transform, gingiva vertices with the transform of their assigned tooth.
fn corrected_mesh(src: &MeshArch, gingiva: &GingivaPartition, transforms: &BTreeMap<ToothCode, RigidTransform>, fallback: &RigidTransform) -> TriMesh {
    let mut owner: Vec<Option<ToothCode>> = vec![None; src.mesh.vertices.len()];
    for (code, idx) in &src.labels.labels {
        for &i in idx {
            owner[i] = Some(*code);
        }
    }
    for (r, &v) in src.residual_vertices.iter().enumerate() {
        owner[v] = Some(gingiva.assignment()[r]);
    }
    let vertices = src
        .mesh
        .vertices
        .iter()
        .zip(&owner)
        .map(|(p, o)| o.and_then(|c| transforms.get(&c)).unwrap_or(fallback).apply(p))
        .collect();
    TriMesh { vertices, triangles: src.mesh.triangles.clone() }
}

fn arch_failure(e: ArchError) -> Failure {
    from_pipeline(PipelineError::Arch(e))
}

pub fn correct(a: &CorrectArgs) -> Result<(), Failure> {
    let cfg = inputs::pipeline_config(&a.reg)?;
    let t = inputs::load_transform(&a.transform)?;
    let src = inputs::load_source(&a.inputs)?;
    let tgt = inputs::load_target(&a.inputs)?;
    let aligned = transform_arch(&src.arch, &t);
    let gingiva = partition_gingiva(&aligned).map_err(arch_failure)?;
    let result = correct_stitching(&aligned, &tgt, &gingiva, &cfg.correction).map_err(arch_failure)?;
    let full: BTreeMap<_, _> = result.per_tooth.iter().map(|(&c, k)| (c, k.compose(&t))).collect();
    inputs::write(&a.out, "tooth.transforms", io::write_tooth_transforms(&full).as_bytes())?;
    inputs::write(&a.out, "corrected.stl", &io::write_stl_binary(&corrected_mesh(&src, &gingiva, &full, &t)))?;
    println!("corrected {} teeth", full.len());
    Ok(())
}

pub fn integrate(a: &IntegrateArgs) -> Result<(), Failure> {
    let cfg = inputs::pipeline_config(&a.reg)?;
    let src = inputs::load_source(&a.inputs)?;
    let tgt = inputs::load_target(&a.inputs)?;
    let landmarks = inputs::load_landmark_pairs(&a.landmarks)?;
    let mut log = String::from(LOG_HEADER);
    let mut n = 0;
    let out = run_pipeline_observed(&src.arch, &tgt, &cfg, &mut |it: &IcpIteration, _: &CorrespondenceSet| {
        log_line(&mut log, n, it);
        n += 1;
    })
    .map_err(from_pipeline)?;

    let t = out.transform();
    let full = out.tooth_transforms();
    let none = BTreeMap::new();
    let report = IntegrateReport {
        source_teeth: src.arch.tooth_count(),
        target_teeth: tgt.tooth_count(),
        global_matches: out.global.matches,
        global_inliers: out.global.inliers.len(),
        registration: IcpSummary::of(&out.registration),
        post_global: evaluate_stage(&src.arch, &tgt, &out.global.transform, &none, landmarks.as_ref()).summary,
        post_registration: evaluate_stage(&src.arch, &tgt, &t, &none, landmarks.as_ref()),
        post_correction: evaluate_stage(&src.arch, &tgt, &t, &full, landmarks.as_ref()),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serialises");

    inputs::write(&a.out, "global.transform", io::write_transform(&out.global.transform).as_bytes())?;
    inputs::write(&a.out, "registration.transform", io::write_transform(&t).as_bytes())?;
    inputs::write(&a.out, "residuals.log", log.as_bytes())?;
    inputs::write(&a.out, "tooth.transforms", io::write_tooth_transforms(&full).as_bytes())?;
    inputs::write(&a.out, "corrected.stl", &io::write_stl_binary(&corrected_mesh(&src, &out.gingiva, &full, &t)))?;
    inputs::write(&a.out, "report.json", format!("{json}\n").as_bytes())?;
    let reg = &report.post_registration.summary;
    let cor = &report.post_correction.summary;
    println!("e_surf registered {:.6} mm, corrected {:.6} mm", reg.e_surf, cor.e_surf);
    if let (Some(r), Some(c)) = (reg.e_land, cor.e_land) {
        println!("e_land registered {r:.6} mm, corrected {c:.6} mm");
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let t = inputs::load_transform(&a.transform)?;
    let src = inputs::load_source(&a.inputs)?;
    let tgt = inputs::load_target(&a.inputs)?;
    let landmarks = inputs::load_landmark_pairs(&a.landmarks)?;
    let corrected = match &a.tooth_transforms {
        Some(p) => {
            let map = io::read_tooth_transforms(&inputs::read_text(p)?).data(|| format!("{}", p.display()))?;
            Some(evaluate_stage(&src.arch, &tgt, &t, &map, landmarks.as_ref()))
        }
        None => None,
    };
    let report = EvalReport { registered: evaluate_stage(&src.arch, &tgt, &t, &BTreeMap::new(), landmarks.as_ref()), corrected };
    let json = format!("{}\n", serde_json::to_string_pretty(&report).expect("report serialises"));
    match &a.out {
        Some(p) => inputs::write_file(p, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

pub fn project(a: &ProjectArgs) -> Result<(), Failure> {
    let geometry = inputs::image_geometry(&a.image)?;
    let mesh = inputs::load_mesh(&a.mesh)?;
    let cloud = mesh.to_cloud_with_normals();
    let frame = mesh_frame(&mesh)?;
    let surface = if a.points { Surface::Points(&cloud) } else { Surface::Mesh(&mesh) };
    let (relief, depth) = render_images(surface, &frame, &geometry).map_err(|e| from_projection(e, "rendering"))?;
    inputs::write(&a.out, "relief.pgm", &io::write_pgm(&relief))?;
    inputs::write(&a.out, "depth.pgm", &io::write_pgm(&depth))?;
    println!("wrote {}x{} relief and depth images to {}", geometry.width, geometry.height, a.out.display());
    Ok(())
}

fn load_boxes(path: &std::path::Path) -> Result<Vec<BoundingBox2D>, Failure> {
    io::read_boxes(&inputs::read_text(path)?).data(|| format!("{}", path.display()))
}

pub fn rois(a: &RoisArgs) -> Result<(), Failure> {
    let geometry = inputs::image_geometry(&a.image)?;
    let mesh = inputs::load_mesh(&a.mesh)?;
    let boxes = load_boxes(&a.boxes)?;
    let frame = mesh_frame(&mesh)?;
    let rois = extract_rois(&mesh.to_cloud_with_normals(), &frame, &boxes, &geometry).map_err(|e| from_projection(e, "ROI extraction"))?;
    for roi in &rois {
        roi.check().map_err(|e| from_projection(e, &format!("{}", a.boxes.display())))?;
    }
    inputs::write_file(&a.out, io::write_rois(&rois, &boxes).as_bytes())?;
    println!("extracted {} regions", rois.len());
    Ok(())
}

pub fn identify(a: &IdentifyArgs) -> Result<(), Failure> {
    let geometry = inputs::image_geometry(&a.image)?;
    let mesh = inputs::load_mesh(&a.mesh)?;
    let boxes = load_boxes(&a.boxes)?;
    let frame = mesh_frame(&mesh)?;
    let rois = extract_rois(&mesh.to_cloud_with_normals(), &frame, &boxes, &geometry).map_err(|e| from_projection(e, "ROI extraction"))?;
    let centers: Vec<[f64; 2]> = boxes.iter().map(|b| b.center()).collect();
    let classes: Vec<_> = boxes.iter().map(|b| b.class).collect();
    let ordering = order_and_identify(&centers, &classes, a.jaw).map_err(|e| from_projection(e, "tooth identification"))?;

    // a vertex under several boxes goes to the box whose centre is nearest
    let mut best: HashMap<usize, (f64, usize)> = HashMap::new();
    for roi in &rois {
        let [cu, cv] = centers[roi.box_index];
        for &i in &roi.indices {
            let p = frame.to_local(&mesh.vertices[i]);
            let (u, v) = geometry.pixel_of(p.x, p.y);
            let d = (u - cu).powi(2) + (-v - cv).powi(2);
            let e = best.entry(i).or_insert((d, roi.box_index));
            if d < e.0 {
                *e = (d, roi.box_index);
            }
        }
    }
    let mut labels: BTreeMap<ToothCode, Vec<usize>> = BTreeMap::new();
    for (b, _) in boxes.iter().enumerate() {
        let code = ordering.code_of(b).expect("every box is ordered");
        labels.entry(code).or_default();
    }
    let mut assigned: Vec<_> = best.into_iter().collect();
    assigned.sort_unstable_by_key(|(v, _)| *v);
    for (vertex, (_, b)) in assigned {
        labels.get_mut(&ordering.code_of(b).expect("ordered")).expect("code present").push(vertex);
    }
    inputs::write_file(&a.out, io::write_labels(&LabelFile { jaw: a.jaw, labels }).as_bytes())?;
    for (b, bx) in boxes.iter().enumerate() {
        println!("box {b} {} -> {}", bx.class.name(), ordering.code_of(b).expect("ordered"));
    }
    Ok(())
}
