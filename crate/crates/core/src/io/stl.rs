use super::IoError;
use crate::geom::{Point3, TriMesh};

const HEADER: &[u8] = b"dentreg binary STL";

fn malformed(msg: impl Into<String>) -> IoError {
    IoError::MalformedStl(msg.into())
}

/// Parses binary or ASCII STL. A file starting with `solid` is read as
/// ASCII when it parses as such; otherwise it must be structurally valid
/// binary. Corners with identical coordinates are merged into one vertex,
/// in first-appearance order.
pub fn read_stl(bytes: &[u8]) -> Result<TriMesh, IoError> {
    let soup = if bytes.starts_with(b"solid") {
        match parse_ascii(bytes) {
            Ok(soup) => soup,
            // binary headers may legally start with "solid" too
            Err(ascii_err) => match binary_record_count(bytes) {
                Ok(_) => parse_binary(bytes)?,
                Err(_) => return Err(ascii_err),
            },
        }
    } else {
        parse_binary(bytes)?
    };
    if soup.is_empty() {
        return Err(malformed("no triangles"));
    }
    Ok(TriMesh::from_soup(&soup))
}

fn binary_record_count(bytes: &[u8]) -> Result<usize, IoError> {
    if bytes.len() < 84 {
        return Err(malformed(format!("binary header truncated: {} of 84 bytes", bytes.len())));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let expected = 84 + 50 * n;
    match bytes.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(malformed(format!(
            "truncated: header declares {n} triangles ({expected} bytes), file has {} bytes",
            bytes.len()
        ))),
        std::cmp::Ordering::Greater => Err(malformed(format!(
            "count mismatch: header declares {n} triangles ({expected} bytes), file has {} bytes",
            bytes.len()
        ))),
        std::cmp::Ordering::Equal => Ok(n),
    }
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Point3; 3]>, IoError> {
    let n = binary_record_count(bytes)?;
    let f32_at = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
    (0..n)
        .map(|t| {
            let rec = 84 + 50 * t;
            let mut tri = [Point3::origin(); 3];
            for (c, corner) in tri.iter_mut().enumerate() {
                let base = rec + 12 + 12 * c;
                let xyz = [f32_at(base), f32_at(base + 4), f32_at(base + 8)];
                if !xyz.iter().all(|v| v.is_finite()) {
                    return Err(malformed(format!("triangle {t}: non-finite vertex coordinate")));
                }
                *corner = Point3::new(xyz[0] as f64, xyz[1] as f64, xyz[2] as f64);
            }
            Ok(tri)
        })
        .collect()
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Point3; 3]>, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|_| malformed("ASCII STL is not valid UTF-8"))?;
    let mut tokens = text.split_whitespace().peekable();
    let expect = |tokens: &mut std::iter::Peekable<std::str::SplitWhitespace<'_>>, word: &str| match tokens.next() {
        Some(t) if t == word => Ok(()),
        Some(t) => Err(malformed(format!("expected {word:?}, found {t:?}"))),
        None => Err(malformed(format!("unexpected end of file, expected {word:?}"))),
    };
    expect(&mut tokens, "solid")?;
    // optional solid name
    while let Some(&t) = tokens.peek() {
        if t == "facet" || t == "endsolid" {
            break;
        }
        tokens.next();
    }
    let float = |tokens: &mut std::iter::Peekable<std::str::SplitWhitespace<'_>>| -> Result<f64, IoError> {
        let t = tokens.next().ok_or_else(|| malformed("unexpected end of file in coordinates"))?;
        let v: f64 = t.parse().map_err(|_| malformed(format!("bad number {t:?}")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(malformed(format!("non-finite number {t:?}")))
        }
    };
    let mut soup = Vec::new();
    loop {
        match tokens.next() {
            Some("endsolid") => break,
            Some("facet") => {
                expect(&mut tokens, "normal")?;
                for _ in 0..3 {
                    float(&mut tokens)?;
                }
                expect(&mut tokens, "outer")?;
                expect(&mut tokens, "loop")?;
                let mut tri = [Point3::origin(); 3];
                for corner in &mut tri {
                    expect(&mut tokens, "vertex")?;
                    *corner = Point3::new(float(&mut tokens)?, float(&mut tokens)?, float(&mut tokens)?);
                }
                expect(&mut tokens, "endloop")?;
                expect(&mut tokens, "endfacet")?;
                soup.push(tri);
            }
            Some(t) => return Err(malformed(format!("expected \"facet\" or \"endsolid\", found {t:?}"))),
            None => return Err(malformed("missing \"endsolid\"")),
        }
    }
    Ok(soup)
}

fn unit_normal_f32(tri: &[Point3; 3]) -> [f32; 3] {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let len = n.norm();
    if len > 0.0 {
        [(n.x / len) as f32, (n.y / len) as f32, (n.z / len) as f32]
    } else {
        [0.0; 3]
    }
}

/// Binary STL, single precision, zero attribute words.
pub fn write_stl_binary(mesh: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    let mut header = [0u8; 80];
    header[..HEADER.len()].copy_from_slice(HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for tri in mesh.soup() {
        for v in unit_normal_f32(&tri) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for p in tri {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// ASCII STL with single-precision coordinates, so it parses to the same
/// mesh as the binary form.
pub fn write_stl_ascii(mesh: &TriMesh, name: &str) -> String {
    let mut s = format!("solid {name}\n");
    for tri in mesh.soup() {
        let [nx, ny, nz] = unit_normal_f32(&tri);
        s.push_str(&format!("  facet normal {nx:e} {ny:e} {nz:e}\n    outer loop\n"));
        for p in tri {
            s.push_str(&format!("      vertex {:e} {:e} {:e}\n", p.x as f32, p.y as f32, p.z as f32));
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str(&format!("endsolid {name}\n"));
    s
}
