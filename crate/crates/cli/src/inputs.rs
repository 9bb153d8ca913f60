use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dentreg::arch::{Jaw, LabeledArch, ToothCode};
use dentreg::geom::{marching_cubes, PointCloud, RigidTransform, TriMesh};
use dentreg::io::{self, LabelFile};
use dentreg::pipeline::PipelineConfig;
use dentreg::projection::ImageGeometry;
use dentreg::registration::{GlobalRegConfig, TicpConfig};

use crate::failure::{from_registration, Classify, Failure};
use crate::report::LandmarkPairs;
use crate::{ArchInputs, ImageFlags, LandmarkInputs, RegFlags};

pub fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).data(|| format!("cannot read {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).data(|| format!("{} is not UTF-8 text", path.display()))
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).data(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    io::write_atomic(&path, bytes).data(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).data(|| format!("cannot create {}", dir.display()))?;
    }
    io::write_atomic(path, bytes).data(|| format!("cannot write {}", path.display()))
}

pub fn load_mesh(path: &Path) -> Result<TriMesh, Failure> {
    io::read_stl(&read(path)?).data(|| format!("{}", path.display()))
}

pub fn load_labels(path: &Path) -> Result<LabelFile, Failure> {
    io::read_labels(&read_text(path)?).data(|| format!("{}", path.display()))
}

pub fn load_transform(path: &Path) -> Result<RigidTransform, Failure> {
    io::read_transform(&read_text(path)?).data(|| format!("{}", path.display()))
}

/// A labelled mesh and the arch built from it.
pub struct MeshArch {
    pub mesh: TriMesh,
    pub labels: LabelFile,
    pub arch: LabeledArch,
    /// Mesh vertex of each residual point.
    pub residual_vertices: Vec<usize>,
}

pub fn load_mesh_arch(mesh_path: &Path, labels_path: &Path) -> Result<MeshArch, Failure> {
    let mesh = load_mesh(mesh_path)?;
    let labels = load_labels(labels_path)?;
    let (arch, residual_vertices) =
        io::labeled_arch(&mesh, &labels).data(|| format!("labels {} do not fit mesh {}", labels_path.display(), mesh_path.display()))?;
    Ok(MeshArch { mesh, labels, arch, residual_vertices })
}

pub fn load_source(inputs: &ArchInputs) -> Result<MeshArch, Failure> {
    load_mesh_arch(&inputs.source_mesh, &inputs.source_labels)
}

/// Target arch from a labelled mesh or from per-tooth voxel masks.
pub fn load_target(inputs: &ArchInputs) -> Result<LabeledArch, Failure> {
    match (&inputs.target_mesh, &inputs.target_labels, inputs.target_masks.is_empty()) {
        (Some(m), Some(l), true) => Ok(load_mesh_arch(m, l)?.arch),
        (None, None, false) => load_masks(&inputs.target_masks),
        _ => Err(Failure::usage("give either --target-mesh with --target-labels, or one or more --target-mask CODE=PATH")),
    }
}

fn load_masks(specs: &[String]) -> Result<LabeledArch, Failure> {
    let mut segments = BTreeMap::new();
    let mut jaw: Option<Jaw> = None;
    for spec in specs {
        let (code, path) = spec.split_once('=').ok_or_else(|| Failure::usage(format!("--target-mask expects CODE=PATH, got {spec:?}")))?;
        let code = code
            .parse::<u32>()
            .ok()
            .and_then(|c| ToothCode::new(c).ok())
            .ok_or_else(|| Failure::usage(format!("--target-mask: invalid tooth code {code:?}")))?;
        match jaw {
            Some(j) if j != code.jaw() => return Err(Failure::usage("--target-mask codes mix both jaws")),
            _ => jaw = Some(code.jaw()),
        }
        let path = Path::new(path);
        let file = io::read_voxels(&read(path)?).data(|| format!("{}", path.display()))?;
        let cloud = marching_cubes(&file.mask, 0.5).data(|| format!("{}: no surface in mask", path.display()))?;
        let cloud = cloud.transformed(&RigidTransform::from_translation(file.origin));
        if segments.insert(code, cloud).is_some() {
            return Err(Failure::usage(format!("--target-mask: tooth {code} given twice")));
        }
    }
    let jaw = jaw.expect("at least one mask");
    LabeledArch::new(jaw, segments, PointCloud::default()).data(|| "target masks".to_string())
}

pub fn load_landmark_pairs(l: &LandmarkInputs) -> Result<Option<LandmarkPairs>, Failure> {
    let (Some(src), Some(tgt)) = (&l.source_landmarks, &l.target_landmarks) else {
        return Ok(None);
    };
    let a = io::read_landmarks(&read_text(src)?).data(|| format!("{}", src.display()))?;
    let b = io::read_landmarks(&read_text(tgt)?).data(|| format!("{}", tgt.display()))?;
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return Err(Failure::Data(anyhow::anyhow!(
            "landmark files {} and {} do not list the same teeth in the same order",
            src.display(),
            tgt.display()
        )));
    }
    if a.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!("landmark file {} is empty", src.display())));
    }
    Ok(Some(a.into_iter().zip(b).map(|((c, x), (_, y))| (c, x, y)).collect()))
}

pub fn pipeline_config(f: &RegFlags) -> Result<PipelineConfig, Failure> {
    let ticp = TicpConfig { epsilon: f.epsilon, max_iterations: f.max_iters, max_distance: None, label_constraint: !f.no_label_constraint };
    let cfg = PipelineConfig {
        global: GlobalRegConfig { tau: f.tau, rng_seed: f.seed, fpfh_k: f.k, ..Default::default() },
        registration: ticp.clone(),
        correction: ticp,
    };
    cfg.validate().map_err(|e| from_registration(e, "invalid parameters"))?;
    Ok(cfg)
}

pub fn image_geometry(f: &ImageFlags) -> Result<ImageGeometry, Failure> {
    let g = ImageGeometry { width: f.width, height: f.height, spacing: f.spacing };
    g.validate().map_err(|e| Failure::Usage(anyhow::Error::new(e).context("invalid image geometry")))?;
    Ok(g)
}
