//! Line-oriented text formats. Each file opens with `dentreg-<kind> <version>`;
//! blank lines and lines starting with `#` are ignored. Reals are written in
//! shortest round-trip form, so reading back is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Matrix4;

use super::IoError;
use crate::arch::{Jaw, ToothCode};
use crate::geom::{Point3, RigidTransform};
use crate::projection::{BoundingBox2D, Roi, ToothClass};

pub const FORMAT_VERSION: u32 = 1;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

/// One significant line, 1-based number and whitespace-split fields.
struct Line<'a> {
    number: usize,
    fields: Vec<&'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> IoError {
        IoError::MalformedField { line: self.number, message: message.into() }
    }

    fn expect_len(&self, n: usize) -> Result<(), IoError> {
        if self.fields.len() == n {
            Ok(())
        } else {
            Err(self.err(format!("expected {n} fields, found {}", self.fields.len())))
        }
    }

    fn parse<T: FromStr>(&self, i: usize, what: &str) -> Result<T, IoError> {
        let raw = self.fields.get(i).ok_or_else(|| self.err(format!("missing {what}")))?;
        raw.parse().map_err(|_| self.err(format!("invalid {what} {raw:?}")))
    }

    fn real(&self, i: usize, what: &str) -> Result<f64, IoError> {
        let v: f64 = self.parse(i, what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("{what} must be finite")))
        }
    }

    fn code(&self, i: usize, jaw: Option<Jaw>) -> Result<ToothCode, IoError> {
        let raw: u32 = self.parse(i, "tooth code")?;
        let code = ToothCode::new(raw).map_err(|e| self.err(e.to_string()))?;
        match jaw {
            Some(j) if code.jaw() != j => Err(self.err(format!("tooth {code} is not in the {j}"))),
            _ => Ok(code),
        }
    }
}

impl<'a> Lines<'a> {
    /// Checks the header line and positions after it.
    fn open(text: &'a str, kind: &str) -> Result<Self, IoError> {
        let mut lines = Lines { inner: text.lines().enumerate() };
        let header = lines.next().ok_or_else(|| IoError::MalformedField { line: 1, message: format!("missing dentreg-{kind} header") })?;
        let tag = format!("dentreg-{kind}");
        if header.fields.first() != Some(&tag.as_str()) || header.fields.len() != 2 {
            return Err(header.err(format!("expected header \"{tag} {FORMAT_VERSION}\"")));
        }
        if header.fields[1] != FORMAT_VERSION.to_string() {
            return Err(IoError::SchemaVersionMismatch { kind: tag, expected: FORMAT_VERSION, found: header.fields[1].to_string() });
        }
        Ok(lines)
    }

    fn next(&mut self) -> Option<Line<'a>> {
        for (i, raw) in self.inner.by_ref() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(Line { number: i + 1, fields: trimmed.split_whitespace().collect() });
        }
        None
    }

    fn require(&mut self, what: &str) -> Result<Line<'a>, IoError> {
        self.next().ok_or_else(|| IoError::MalformedField { line: 0, message: format!("unexpected end of file, expected {what}") })
    }
}

fn header(kind: &str) -> String {
    format!("dentreg-{kind} {FORMAT_VERSION}\n")
}

/// Per-tooth vertex indices of a mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFile {
    pub jaw: Jaw,
    pub labels: BTreeMap<ToothCode, Vec<usize>>,
}

impl LabelFile {
    /// Checks that every index addresses one of `vertex_count` vertices.
    pub fn check_range(&self, vertex_count: usize) -> Result<(), IoError> {
        for (code, idx) in &self.labels {
            if let Some(&bad) = idx.iter().find(|&&i| i >= vertex_count) {
                return Err(IoError::MalformedField {
                    line: 0,
                    message: format!("tooth {code}: vertex index {bad} out of range for {vertex_count} vertices"),
                });
            }
        }
        Ok(())
    }
}

pub fn write_labels(file: &LabelFile) -> String {
    let mut s = header("labels");
    writeln!(s, "jaw {}", file.jaw).unwrap();
    for (code, idx) in &file.labels {
        write!(s, "tooth {code}").unwrap();
        for i in idx {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn read_labels(text: &str) -> Result<LabelFile, IoError> {
    let mut lines = Lines::open(text, "labels")?;
    let first = lines.require("jaw line")?;
    first.expect_len(2)?;
    if first.fields[0] != "jaw" {
        return Err(first.err("expected \"jaw <maxilla|mandible>\""));
    }
    let jaw: Jaw = first.parse(1, "jaw")?;
    let mut labels = BTreeMap::new();
    while let Some(line) = lines.next() {
        if line.fields[0] != "tooth" || line.fields.len() < 2 {
            return Err(line.err("expected \"tooth <code> <indices...>\""));
        }
        let code = line.code(1, Some(jaw))?;
        let idx = (2..line.fields.len()).map(|i| line.parse::<usize>(i, "vertex index")).collect::<Result<Vec<_>, _>>()?;
        if labels.insert(code, idx).is_some() {
            return Err(line.err(format!("tooth {code} listed twice")));
        }
    }
    Ok(LabelFile { jaw, labels })
}

fn write_matrix(s: &mut String, t: &RigidTransform) {
    let m = t.to_matrix4();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", m[(r, c)])).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
}

fn read_matrix(lines: &mut Lines<'_>) -> Result<RigidTransform, IoError> {
    let mut m = Matrix4::zeros();
    let mut last = 0;
    for r in 0..4 {
        let line = lines.require("matrix row")?;
        line.expect_len(4)?;
        for c in 0..4 {
            m[(r, c)] = line.real(c, "matrix entry")?;
        }
        last = line.number;
    }
    RigidTransform::from_matrix4(&m).map_err(|e| IoError::MalformedField { line: last, message: e.to_string() })
}

/// 4×4 row-major homogeneous matrix.
pub fn write_transform(t: &RigidTransform) -> String {
    let mut s = header("transform");
    write_matrix(&mut s, t);
    s
}

pub fn read_transform(text: &str) -> Result<RigidTransform, IoError> {
    let mut lines = Lines::open(text, "transform")?;
    let t = read_matrix(&mut lines)?;
    if let Some(extra) = lines.next() {
        return Err(extra.err("trailing content after matrix"));
    }
    Ok(t)
}

pub fn write_tooth_transforms(map: &BTreeMap<ToothCode, RigidTransform>) -> String {
    let mut s = header("tooth-transforms");
    for (code, t) in map {
        writeln!(s, "tooth {code}").unwrap();
        write_matrix(&mut s, t);
    }
    s
}

pub fn read_tooth_transforms(text: &str) -> Result<BTreeMap<ToothCode, RigidTransform>, IoError> {
    let mut lines = Lines::open(text, "tooth-transforms")?;
    let mut map = BTreeMap::new();
    while let Some(line) = lines.next() {
        line.expect_len(2)?;
        if line.fields[0] != "tooth" {
            return Err(line.err("expected \"tooth <code>\""));
        }
        let code = line.code(1, None)?;
        let t = read_matrix(&mut lines)?;
        if map.insert(code, t).is_some() {
            return Err(line.err(format!("tooth {code} listed twice")));
        }
    }
    Ok(map)
}

/// One `<code> x y z` line per landmark, order preserved.
pub fn write_landmarks(landmarks: &[(ToothCode, Point3)]) -> String {
    let mut s = header("landmarks");
    for (code, p) in landmarks {
        writeln!(s, "{code} {} {} {}", p.x, p.y, p.z).unwrap();
    }
    s
}

pub fn read_landmarks(text: &str) -> Result<Vec<(ToothCode, Point3)>, IoError> {
    let mut lines = Lines::open(text, "landmarks")?;
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        line.expect_len(4)?;
        out.push((line.code(0, None)?, Point3::new(line.real(1, "x")?, line.real(2, "y")?, line.real(3, "z")?)));
    }
    Ok(out)
}

/// One `u1 v1 u2 v2 class` line per box, pixel units.
pub fn write_boxes(boxes: &[BoundingBox2D]) -> String {
    let mut s = header("boxes");
    for b in boxes {
        writeln!(s, "{} {} {} {} {}", b.u1, b.v1, b.u2, b.v2, b.class.name()).unwrap();
    }
    s
}

pub fn read_boxes(text: &str) -> Result<Vec<BoundingBox2D>, IoError> {
    let mut lines = Lines::open(text, "boxes")?;
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        line.expect_len(5)?;
        let class: ToothClass = line.parse(4, "tooth class")?;
        let b = BoundingBox2D::new(line.real(0, "u1")?, line.real(1, "v1")?, line.real(2, "u2")?, line.real(3, "v2")?, class)
            .map_err(|e| line.err(e.to_string()))?;
        out.push(b);
    }
    Ok(out)
}

/// Box index, class and captured vertex indices of each ROI.
pub fn write_rois(rois: &[Roi], boxes: &[BoundingBox2D]) -> String {
    let mut s = header("rois");
    for roi in rois {
        write!(s, "box {} {}", roi.box_index, boxes[roi.box_index].class.name()).unwrap();
        for i in &roi.indices {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// `(box index, class, indices)` per ROI line.
pub fn read_rois(text: &str) -> Result<Vec<(usize, ToothClass, Vec<usize>)>, IoError> {
    let mut lines = Lines::open(text, "rois")?;
    let mut out = Vec::new();
    while let Some(line) = lines.next() {
        if line.fields[0] != "box" || line.fields.len() < 3 {
            return Err(line.err("expected \"box <index> <class> <indices...>\""));
        }
        let idx = (3..line.fields.len()).map(|i| line.parse::<usize>(i, "vertex index")).collect::<Result<Vec<_>, _>>()?;
        out.push((line.parse(1, "box index")?, line.parse(2, "tooth class")?, idx));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    #[test]
    fn empty_label_map_round_trips() {
        let f = LabelFile { jaw: Jaw::Maxilla, labels: BTreeMap::new() };
        assert_eq!(read_labels(&write_labels(&f)).unwrap(), f);
    }

    #[test]
    fn full_dentition_labels_round_trip() {
        for jaw in [Jaw::Maxilla, Jaw::Mandible] {
            let labels = jaw
                .codes()
                .map(|c| (ToothCode::new(c as u32).unwrap(), (0..c as usize * 3).map(|i| i * 7 + 1).collect()))
                .collect();
            let f = LabelFile { jaw, labels };
            assert_eq!(read_labels(&write_labels(&f)).unwrap(), f);
        }
    }

    #[test]
    fn labels_reject_foreign_codes_and_bad_versions() {
        let wrong_jaw = "dentreg-labels 1\njaw maxilla\ntooth 20 1 2\n";
        assert!(matches!(read_labels(wrong_jaw), Err(IoError::MalformedField { line: 3, .. })));
        let v2 = "dentreg-labels 2\njaw maxilla\n";
        assert!(matches!(read_labels(v2), Err(IoError::SchemaVersionMismatch { .. })));
        let bad_index = "dentreg-labels 1\njaw maxilla\ntooth 3 1 -2\n";
        assert!(matches!(read_labels(bad_index), Err(IoError::MalformedField { line: 3, .. })));
        let f = read_labels("dentreg-labels 1\n# comment\njaw mandible\ntooth 17 0 9\n").unwrap();
        assert!(f.check_range(10).is_ok());
        assert!(f.check_range(9).is_err());
    }

    #[test]
    fn transform_rejects_bad_bottom_row() {
        let text = "dentreg-transform 1\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 1 1\n";
        assert!(matches!(read_transform(text), Err(IoError::MalformedField { .. })));
        let short = "dentreg-transform 1\n1 0 0 0\n0 1 0 0\n";
        assert!(read_transform(short).is_err());
    }

    #[test]
    fn boxes_landmarks_rois_round_trip() {
        let boxes = vec![
            BoundingBox2D::new(1.5, 2.0, 30.25, 40.0, ToothClass::Molar).unwrap(),
            BoundingBox2D::new(100.0, 0.1, 101.0, 0.2, ToothClass::Incisor).unwrap(),
        ];
        assert_eq!(read_boxes(&write_boxes(&boxes)).unwrap(), boxes);
        let lm = vec![(ToothCode::new(3).unwrap(), Point3::new(0.1, -2.0 / 3.0, 1e-300)), (ToothCode::new(30).unwrap(), Point3::origin())];
        assert_eq!(read_landmarks(&write_landmarks(&lm)).unwrap(), lm);
        let roi = Roi { box_index: 1, indices: vec![4, 8, 15], cloud: Default::default() };
        assert_eq!(read_rois(&write_rois(&[roi], &boxes)).unwrap(), vec![(1, ToothClass::Incisor, vec![4, 8, 15])]);
        assert!(read_boxes("dentreg-boxes 1\n5 1 4 2 canine\n").is_err());
    }

    proptest! {
        #[test]
        fn random_transforms_round_trip(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in -3.1f64..3.1,
                                         tx in -100.0f64..100.0, ty in -100.0f64..100.0, tz in -100.0f64..100.0) {
            let t = RigidTransform::from_rotation(Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(ax, ay, az)), angle), Vector3::new(tx, ty, tz));
            let back = read_transform(&write_transform(&t)).unwrap();
            prop_assert!((back.to_matrix4() - t.to_matrix4()).abs().max() <= 1e-12);
            // shortest round-trip formatting is in fact exact
            prop_assert_eq!(back, t);
            let map: BTreeMap<_, _> = [(ToothCode::new(5).unwrap(), t), (ToothCode::new(6).unwrap(), t.inverse())].into();
            prop_assert_eq!(read_tooth_transforms(&write_tooth_transforms(&map)).unwrap(), map);
        }
    }
}
