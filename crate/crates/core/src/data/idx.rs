//! IDX containers: big-endian headers followed by unsigned bytes.
//! Gzip-compressed files are detected by their magic bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::dataset::SampleSet;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded unsigned-byte IDX tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header: missing {what}")))
}

fn decompress(raw: Vec<u8>) -> Result<Vec<u8>> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parse an IDX byte buffer with the expected magic number.
pub fn read_idx(bytes: &[u8], magic: u32) -> Result<IdxTensor> {
    let found = read_u32(bytes, 0, "magic number")?;
    if found != magic {
        return Err(Error::Format(format!(
            "magic number {found:#010x} does not match expected {magic:#010x}"
        )));
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|d| read_u32(bytes, 4 + 4 * d, "dimension").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = dims.iter().product();
    let start = 4 + 4 * rank;
    let body = &bytes[start.min(bytes.len())..];
    if body.len() != count {
        return Err(Error::Format(format!(
            "header announces {count} bytes of data but {} are present",
            body.len()
        )));
    }
    Ok(IdxTensor {
        dims,
        data: body.to_vec(),
    })
}

fn read_file(path: &Path, magic: u32) -> Result<IdxTensor> {
    read_idx(&decompress(fs::read(path)?)?, magic)
}

/// Load images and labels, scaling pixels to `[0, 1]`. The number of classes
/// is one more than the largest label.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<SampleSet> {
    let img = read_file(images.as_ref(), IMAGES_MAGIC)?;
    let lbl = read_file(labels.as_ref(), LABELS_MAGIC)?;
    if img.dims[0] != lbl.dims[0] {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            img.dims[0], lbl.dims[0]
        )));
    }
    let dim = img.dims[1] * img.dims[2];
    let features = img.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = lbl.data.iter().map(|&b| usize::from(b)).collect();
    let k = labels.iter().copied().max().map_or(1, |m| m + 1);
    SampleSet::new(features, labels, dim, k)
}

pub fn write_idx_images<W: Write>(mut out: W, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    if rows * cols == 0 || !pixels.len().is_multiple_of(rows * cols) {
        return Err(Error::invalid("pixel buffer does not hold whole images"));
    }
    out.write_all(&IMAGES_MAGIC.to_be_bytes())?;
    for d in [pixels.len() / (rows * cols), rows, cols] {
        out.write_all(&(d as u32).to_be_bytes())?;
    }
    out.write_all(pixels)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(mut out: W, labels: &[u8]) -> Result<()> {
    out.write_all(&LABELS_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)?;
    Ok(())
}
