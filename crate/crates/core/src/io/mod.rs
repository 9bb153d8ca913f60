//! File formats: STL meshes, versioned text sidecars, voxel masks and 16-bit
//! graymaps.

mod pgm;
mod sidecar;
mod stl;
mod voxel;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::arch::LabeledArch;
use crate::geom::{PointCloud, TriMesh};

pub use pgm::{read_pgm, write_pgm, Gray16};
pub use sidecar::{
    read_boxes, read_labels, read_landmarks, read_rois, read_tooth_transforms, read_transform, write_boxes, write_labels, write_landmarks,
    write_rois, write_tooth_transforms, write_transform, LabelFile, FORMAT_VERSION,
};
pub use stl::{read_stl, write_stl_ascii, write_stl_binary};
pub use voxel::{read_voxels, write_voxels, VoxelFile};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed STL: {0}")]
    MalformedStl(String),
    #[error("{kind}: unsupported schema version {found:?} (expected {expected})")]
    SchemaVersionMismatch { kind: String, expected: u32, found: String },
    /// `line` is 1-based; 0 when the problem is not tied to one line.
    #[error("line {line}: {message}")]
    MalformedField { line: usize, message: String },
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

/// Labelled arch from mesh vertices: each tooth is its labelled vertices,
/// the residual is every unlabelled vertex. Also returns the residual's
/// vertex indices, ascending.
pub fn labeled_arch(mesh: &TriMesh, labels: &LabelFile) -> Result<(LabeledArch, Vec<usize>), IoError> {
    labels.check_range(mesh.vertices.len())?;
    let mut owner = vec![None; mesh.vertices.len()];
    for (code, idx) in &labels.labels {
        for &i in idx {
            if let Some(other) = owner[i].replace(*code) {
                return Err(IoError::MalformedField { line: 0, message: format!("vertex {i} labelled as both {other} and {code}") });
            }
        }
    }
    let segments: BTreeMap<_, _> = labels
        .labels
        .iter()
        .map(|(&c, idx)| (c, PointCloud::new(idx.iter().map(|&i| mesh.vertices[i]).collect())))
        .collect();
    let residual_idx: Vec<usize> = (0..owner.len()).filter(|&i| owner[i].is_none()).collect();
    let residual = PointCloud::new(residual_idx.iter().map(|&i| mesh.vertices[i]).collect());
    let arch = LabeledArch::new(labels.jaw, segments, residual).map_err(|e| IoError::MalformedField { line: 0, message: e.to_string() })?;
    Ok((arch, residual_idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Jaw, ToothCode};
    use crate::geom::Point3;

    #[test]
    fn arch_from_labels() {
        let mesh = TriMesh { vertices: (0..6).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect(), triangles: vec![] };
        let code = ToothCode::new(20).unwrap();
        let labels = LabelFile { jaw: Jaw::Mandible, labels: [(code, vec![4, 1])].into() };
        let (arch, residual) = labeled_arch(&mesh, &labels).unwrap();
        assert_eq!(residual, vec![0, 2, 3, 5]);
        assert_eq!(arch.segment(code).unwrap().points(), &[Point3::new(4.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
        let twice = LabelFile { jaw: Jaw::Mandible, labels: [(code, vec![1]), (ToothCode::new(21).unwrap(), vec![1])].into() };
        assert!(labeled_arch(&mesh, &twice).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
