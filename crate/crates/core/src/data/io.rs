//! Readers for IDX (MNIST-style, optionally gzip-compressed) and headerful
//! CSV files.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Decoded IDX image tensor: `count` images of `rows x cols` bytes.
pub fn parse_idx_images(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format!("bad image magic 0x{magic:08x}"));
    }
    let header = (1..4)
        .map(|k| be_u32(bytes, 4 * k).map(|v| v as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or("truncated header")?;
    let (count, pixels) = (header[0], header[1] * header[2]);
    let body = &bytes[16..];
    if body.len() < count * pixels {
        return Err(format!("truncated image data: need {} bytes, have {}", count * pixels, body.len()));
    }
    Ok((count, pixels, body[..count * pixels].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format!("bad label magic 0x{magic:08x}"));
    }
    let count = be_u32(bytes, 4).ok_or("truncated header")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(format!("truncated label data: need {count} bytes, have {}", body.len()));
    }
    Ok(body[..count].to_vec())
}

/// Loads an IDX image/label pair. Pixels are scaled to [0, 1]; the class
/// count is one more than the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let fmt = |file: &Path, message: String| Error::Format { file: file.to_path_buf(), message };
    let img = read_maybe_gz(images_path)?;
    let lab = read_maybe_gz(labels_path)?;
    let (count, pixels, data) = parse_idx_images(&img).map_err(|m| fmt(images_path, m))?;
    let labels = parse_idx_labels(&lab).map_err(|m| fmt(labels_path, m))?;
    if labels.len() != count {
        return Err(fmt(labels_path, format!("{} labels for {count} images", labels.len())));
    }
    if pixels == 0 {
        return Err(fmt(images_path, "zero-sized images".into()));
    }
    let features = data.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(features, pixels, labels, class_count)
}

/// Loads a headerful CSV. Every column except `label_column` is a feature.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let fmt = |message: String| Error::Format { file: path.to_path_buf(), message };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| fmt(format!("no column named {label_column:?}")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(fmt("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        for (col, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if col == label_idx {
                let y: usize =
                    cell.parse().map_err(|_| fmt(format!("row {}: label {cell:?} is not a class id", line + 1)))?;
                labels.push(y);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| fmt(format!("row {}, column {:?}: cannot parse {cell:?}", line + 1, &headers[col])))?;
                features.push(v);
            }
        }
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(features, dim, labels, class_count)
}
