use super::IoError;
use crate::projection::RasterImage;

/// 16-bit greyscale raster as read back from a graymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16 {
    pub width: usize,
    pub height: usize,
    /// Row-major samples.
    pub values: Vec<u16>,
}

impl Gray16 {
    /// Samples rescaled to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64 / 65535.0).collect()
    }
}

/// Binary PGM (`P5`, maxval 65535, big-endian samples); pixel value
/// `round(65535·clamp(x, 0, 1))`.
pub fn write_pgm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for &v in &img.values {
        let q = (65535.0 * v.clamp(0.0, 1.0)).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn read_pgm(bytes: &[u8]) -> Result<Gray16, IoError> {
    let bad = |m: &str| IoError::MalformedField { line: 0, message: format!("graymap: {m}") };
    // four whitespace-separated header tokens, then exactly one whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if pos >= bytes.len() {
        return Err(bad("missing payload"));
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(bad("expected magic P5"));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad("invalid header number"));
    let (width, height, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
    if maxval != 65535 {
        return Err(bad("only 16-bit graymaps (maxval 65535) are supported"));
    }
    let payload = &bytes[pos..];
    if payload.len() != 2 * width * height {
        return Err(bad(&format!("payload has {} bytes, expected {}", payload.len(), 2 * width * height)));
    }
    let values = payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(Gray16 { width, height, values })
}
