//! Binary greymap (P5) output.

use std::path::Path;

use crate::{Error, Result};

/// Encodes an 8-bit greymap with maxval 255.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::shape("encode_pgm", width * height, pixels.len()));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(width, height, pixels)?).map_err(|e| Error::io(path, e))
}

/// Maps a probability in `[0, 1]` to a grey level.
pub fn to_grey(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}
