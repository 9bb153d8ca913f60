use super::IoError;
use crate::geom::{Vector3, VoxelMask};

/// A mask plus the world position of voxel `(0, 0, 0)`, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelFile {
    pub mask: VoxelMask,
    pub origin: Vector3,
}

const TAG: &str = "dentreg-voxels";

/// Text header (`dims`, `spacing`, `origin`, `data`) followed by one raw
/// byte per voxel, 0 or 1, in `x + nx·(y + ny·z)` order.
pub fn write_voxels(file: &VoxelFile) -> Vec<u8> {
    let [nx, ny, nz] = file.mask.dims();
    let [sx, sy, sz] = file.mask.spacing();
    let o = file.origin;
    let mut out = format!(
        "{TAG} {}\ndims {nx} {ny} {nz}\nspacing {sx} {sy} {sz}\norigin {} {} {}\ndata\n",
        super::FORMAT_VERSION,
        o.x,
        o.y,
        o.z
    )
    .into_bytes();
    out.extend(file.mask.values().iter().map(|&v| v as u8));
    out
}

pub fn read_voxels(bytes: &[u8]) -> Result<VoxelFile, IoError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = |what: &str| -> Result<(usize, String), IoError> {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| IoError::MalformedField { line: line_no + 1, message: format!("truncated header, expected {what}") })?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| IoError::MalformedField { line: line_no + 1, message: "header is not UTF-8".into() })?
            .trim()
            .to_string();
        pos += end + 1;
        line_no += 1;
        Ok((line_no, line))
    };
    let (n, header) = next_line("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(TAG) {
        return Err(IoError::MalformedField { line: n, message: format!("expected \"{TAG} {}\"", super::FORMAT_VERSION) });
    }
    let version = parts.next().unwrap_or("");
    if version != super::FORMAT_VERSION.to_string() {
        return Err(IoError::SchemaVersionMismatch { kind: TAG.into(), expected: super::FORMAT_VERSION, found: version.into() });
    }
    let mut triple = |key: &str| -> Result<(usize, [String; 3]), IoError> {
        let (n, line) = next_line(key)?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 || f[0] != key {
            return Err(IoError::MalformedField { line: n, message: format!("expected \"{key} <a> <b> <c>\"") });
        }
        Ok((n, [f[1].to_string(), f[2].to_string(), f[3].to_string()]))
    };
    let (dn, d) = triple("dims")?;
    let dims = d.clone().map(|s| s.parse::<usize>());
    if dims.iter().any(|r| r.is_err()) {
        return Err(IoError::MalformedField { line: dn, message: format!("invalid dims {d:?}") });
    }
    let dims = dims.map(|r| r.unwrap());
    let real = |n: usize, s: &[String; 3], key: &str| -> Result<[f64; 3], IoError> {
        let v = s.clone().map(|x| x.parse::<f64>());
        match v {
            [Ok(a), Ok(b), Ok(c)] if a.is_finite() && b.is_finite() && c.is_finite() => Ok([a, b, c]),
            _ => Err(IoError::MalformedField { line: n, message: format!("invalid {key} {s:?}") }),
        }
    };
    let (sn, s) = triple("spacing")?;
    let spacing = real(sn, &s, "spacing")?;
    let (on, o) = triple("origin")?;
    let origin = real(on, &o, "origin")?;
    let (n, data) = next_line("data")?;
    if data != "data" {
        return Err(IoError::MalformedField { line: n, message: "expected \"data\"".into() });
    }
    let payload = &bytes[pos..];
    let expected = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    if expected != Some(payload.len()) {
        return Err(IoError::MalformedField {
            line: n + 1,
            message: format!("payload has {} bytes, dims {dims:?} need {expected:?}", payload.len()),
        });
    }
    if let Some(i) = payload.iter().position(|&b| b > 1) {
        return Err(IoError::MalformedField { line: n + 1, message: format!("voxel {i} has value {}, expected 0 or 1", payload[i]) });
    }
    let mask = VoxelMask::new(dims, spacing, payload.iter().map(|&b| b == 1).collect())
        .map_err(|e| IoError::MalformedField { line: dn, message: e.to_string() })?;
    Ok(VoxelFile { mask, origin: Vector3::from(origin) })
}
