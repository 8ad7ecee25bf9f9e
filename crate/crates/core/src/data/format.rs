//! `CVDS1` dataset files.
//!
//! ```text
//! CVDS1
//! count=N
//! width=W
//! height=H
//! factors=name:card,name:card,...
//! <blank line>
//! N·W·H pixel bytes, then N·F little-endian u16 factor indices
//! ```

use std::path::Path;

use super::{Dataset, Factor};
use crate::{Error, Result};

pub const DATASET_MAGIC: &str = "CVDS1";

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let factors: Vec<String> = ds
        .factors()
        .iter()
        .map(|f| format!("{}:{}", f.name, f.cardinality))
        .collect();
    let mut buf = format!(
        "{DATASET_MAGIC}\ncount={}\nwidth={}\nheight={}\nfactors={}\n\n",
        ds.len(),
        ds.width(),
        ds.height(),
        factors.join(",")
    )
    .into_bytes();
    buf.extend_from_slice(ds.raw_images());
    for &v in ds.raw_factors() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Splits `bytes` into the text header lines (magic first) and the payload
/// that follows the blank line.
pub(crate) fn split_header<'a>(bytes: &'a [u8], path: &Path) -> Result<(Vec<&'a str>, &'a [u8])> {
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "truncated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::format(path, "header is not valid UTF-8"))?;
        pos += end + 1;
        if line.is_empty() {
            return Ok((lines, &bytes[pos..]));
        }
        lines.push(line);
    }
}

pub(crate) fn check_magic(bytes: &[u8], expected: &str, path: &Path) -> Result<()> {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    if first != expected.as_bytes() {
        let shown: String = String::from_utf8_lossy(&first[..first.len().min(16)]).into_owned();
        return Err(Error::format(path, format!("bad magic {shown:?}, expected {expected:?}")));
    }
    Ok(())
}

fn parse_usize(key: &str, value: &str, path: &Path) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::format(path, format!("header key {key}: bad value {value:?}")))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    check_magic(&bytes, DATASET_MAGIC, path)?;
    let (lines, payload) = split_header(&bytes, path)?;

    let (mut count, mut width, mut height, mut factors) = (None, None, None, None);
    for line in &lines[1..] {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("malformed header line {line:?}")))?;
        match key {
            "count" => count = Some(parse_usize(key, value, path)?),
            "width" => width = Some(parse_usize(key, value, path)?),
            "height" => height = Some(parse_usize(key, value, path)?),
            "factors" => {
                let parsed = value
                    .split(',')
                    .map(|item| {
                        let (name, card) = item
                            .split_once(':')
                            .ok_or_else(|| Error::format(path, format!("malformed factor {item:?}")))?;
                        Ok(Factor::new(name, parse_usize("factors", card, path)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                factors = Some(parsed);
            }
            other => return Err(Error::format(path, format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::format(path, format!("missing header key {k:?}"));
    let count = count.ok_or_else(|| missing("count"))?;
    let width = width.ok_or_else(|| missing("width"))?;
    let height = height.ok_or_else(|| missing("height"))?;
    let factors = factors.ok_or_else(|| missing("factors"))?;

    let product: usize = factors.iter().map(|f| f.cardinality).product();
    if product != count {
        return Err(Error::format(
            path,
            format!("count={count} but factor cardinalities multiply to {product}"),
        ));
    }
    let pixel_bytes = count * width * height;
    let expected = pixel_bytes + 2 * count * factors.len();
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "payload is {} bytes but header declares {expected} (count={count})",
                payload.len()
            ),
        ));
    }
    let images = payload[..pixel_bytes].to_vec();
    let labels = payload[pixel_bytes..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Dataset::from_parts(width, height, factors, images, labels).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, FactorSpec};

    fn small() -> Dataset {
        let spec = FactorSpec {
            width: 8,
            scales: vec![0.4, 0.6],
            pos_x: vec![0.4, 0.6],
            pos_y: vec![0.5],
        };
        generate_dataset(&spec).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.cvds");
        let ds = small();
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);
        let again = dir.path().join("again.cvds");
        save_dataset(&loaded, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.cvds");
        save_dataset(&small(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = "CVDS1\ncount=12\nwidth=8\nheight=8\nfactors=shape:3,scale:2,pos_x:2,pos_y:1\n\n";
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + 12 * 64 + 12 * 4 * 2);
    }

    #[test]
    fn bad_magic_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.cvds");
        std::fs::write(&path, b"XXXX\ncount=1\n\n").unwrap();
        let err = load_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("XXXX"), "{err}");
    }

    #[test]
    fn inconsistent_count_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.cvds");
        save_dataset(&small(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let header_end = bytes.windows(2).position(|w| w == b"\n\n").unwrap();
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap().replace("count=12", "count=13");
        let mut raw = header.into_bytes();
        raw.extend_from_slice(&bytes[header_end..]);
        std::fs::write(&path, &raw).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format { .. })));

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format { .. })));

        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_dataset("/nonexistent/x.cvds"), Err(Error::Io { .. })));
    }
}
