//! IDX (MNIST-style) image and label files.

use std::fs;
use std::path::Path;

use super::file::{write_dataset, Dataset};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn idx_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: message.into(),
    }
}

pub fn read_idx_images(path: &Path, bytes: &[u8]) -> Result<IdxImages> {
    let header = (|| {
        Some((
            be_u32(bytes, 0)?,
            be_u32(bytes, 4)?,
            be_u32(bytes, 8)?,
            be_u32(bytes, 12)?,
        ))
    })();
    let (magic, count, rows, cols) = header.ok_or_else(|| idx_err(path, "truncated IDX header"))?;
    if magic != IMAGES_MAGIC {
        return Err(idx_err(path, format!("bad image magic {magic:#010x}")));
    }
    let (count, rows, cols) = (count as usize, rows as usize, cols as usize);
    let expected = count * rows * cols;
    let pixels = &bytes[16..];
    if pixels.len() != expected {
        return Err(idx_err(
            path,
            format!("expected {expected} pixel bytes, found {}", pixels.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: pixels.to_vec(),
    })
}

pub fn read_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| idx_err(path, "truncated IDX header"))?;
    let count = be_u32(bytes, 4).ok_or_else(|| idx_err(path, "truncated IDX header"))? as usize;
    if magic != LABELS_MAGIC {
        return Err(idx_err(path, format!("bad label magic {magic:#010x}")));
    }
    let labels = &bytes[8..];
    if labels.len() != count {
        return Err(idx_err(
            path,
            format!("expected {count} labels, found {}", labels.len()),
        ));
    }
    Ok(labels.to_vec())
}

/// Converts an IDX image/label pair into a dataset file. Pixels are scaled to
/// `[0, 1]` and flattened row-major. `limit` keeps only the first records.
pub fn convert_idx(
    images_path: &Path,
    labels_path: &Path,
    out: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let images = read_idx_images(images_path, &image_bytes)?;
    let labels = read_idx_labels(labels_path, &label_bytes)?;
    if labels.len() != images.count {
        return Err(idx_err(
            labels_path,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let dim = images.rows * images.cols;
    let n = limit.map_or(images.count, |l| l.min(images.count));
    let records: Vec<_> = (0..n)
        .map(|i| {
            let features = images.pixels[i * dim..(i + 1) * dim]
                .iter()
                .map(|&p| f64::from(p) / 255.0)
                .collect();
            (labels[i] as usize, features)
        })
        .collect();
    let num_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(1);
    let dataset = Dataset {
        dim,
        num_classes,
        records,
    };
    write_dataset(out, &dataset)?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastream::read_dataset;

    fn images(count: u32, rows: u32, cols: u32) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend(IMAGES_MAGIC.to_be_bytes());
        bytes.extend(count.to_be_bytes());
        bytes.extend(rows.to_be_bytes());
        bytes.extend(cols.to_be_bytes());
        bytes.extend((0..count * rows * cols).map(|i| (i * 51 % 256) as u8));
        bytes
    }

    fn labels(values: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend(LABELS_MAGIC.to_be_bytes());
        bytes.extend((values.len() as u32).to_be_bytes());
        bytes.extend(values);
        bytes
    }

    #[test]
    fn converts_to_scaled_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp, out) = (
            dir.path().join("img"),
            dir.path().join("lbl"),
            dir.path().join("out.txt"),
        );
        fs::write(&ip, images(3, 2, 2)).unwrap();
        fs::write(&lp, labels(&[1, 0, 2])).unwrap();
        let ds = convert_idx(&ip, &lp, &out, None).unwrap();
        assert_eq!(ds.dim, 4);
        assert_eq!(ds.num_classes, 3);
        assert_eq!(ds.records[0].0, 1);
        assert_eq!(
            ds.records[0].1,
            vec![0.0, 51.0 / 255.0, 102.0 / 255.0, 153.0 / 255.0]
        );
        assert_eq!(read_dataset(&out).unwrap(), ds);
        let limited = convert_idx(&ip, &lp, &out, Some(2)).unwrap();
        assert_eq!(limited.records.len(), 2);
    }

    #[test]
    fn rejects_wrong_magic() {
        let p = Path::new("x");
        assert!(read_idx_images(p, &labels(&[1])).is_err());
        assert!(read_idx_labels(p, &images(1, 1, 1)).is_err());
        let mut truncated = images(2, 2, 2);
        truncated.pop();
        assert!(read_idx_images(p, &truncated).is_err());
    }
}
