use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::read_bytes;
use crate::network::{Split, TaskData};
use crate::numerics::DenseMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(path: &Path, bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::TruncatedFile {
            path: path.to_path_buf(),
            needed: at + 4,
            found: bytes.len(),
        })
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(path, bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

fn payload<'a>(path: &Path, bytes: &'a [u8], header: usize, len: usize) -> Result<&'a [u8]> {
    let needed = header + len;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    Ok(&bytes[header..needed])
}

/// Parses an unsigned-byte image file into `(count, rows * cols, pixels)`
/// with pixels scaled to `[0, 1]`.
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    check_magic(path, bytes, IDX_IMAGES_MAGIC)?;
    let n = be_u32(path, bytes, 4)? as usize;
    let rows = be_u32(path, bytes, 8)? as usize;
    let cols = be_u32(path, bytes, 12)? as usize;
    let width = rows * cols;
    let raw = payload(path, bytes, 16, n * width)?;
    Ok((n, width, raw.iter().map(|&p| p as f64 / 255.0).collect()))
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(path, bytes, IDX_LABELS_MAGIC)?;
    let n = be_u32(path, bytes, 4)? as usize;
    Ok(payload(path, bytes, 8, n)?
        .iter()
        .map(|&l| l as usize)
        .collect())
}

/// Reads an IDX image file and its label file. Images are flattened row by
/// row; the class count is one more than the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<TaskData> {
    let (n, width, pixels) = parse_idx_images(images_path, &read_bytes(images_path)?)?;
    let labels = parse_idx_labels(labels_path, &read_bytes(labels_path)?)?;
    if labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(1, |&m| m + 1).max(2);
    TaskData::classification(
        DenseMatrix::from_vec(n, width, pixels)?,
        labels,
        classes,
        Split::Train,
    )
}
