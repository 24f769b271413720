//! IDX reader for the MNIST image/label files (uncompressed, big-endian headers).

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or_else(|| Error::Length {
        what: what.to_string(),
        expected: offset + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

/// Pixel rows scaled to `[0, 1]` by `/ 255`, one flattened image per row.
fn parse_images(bytes: &[u8], name: &str) -> Result<Matrix> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{name}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, name)? as usize;
    let rows = be_u32(bytes, 8, name)? as usize;
    let cols = be_u32(bytes, 12, name)? as usize;
    let dim = rows * cols;
    let expected = 16 + n * dim;
    if bytes.len() < expected {
        return Err(Error::Length {
            what: name.to_string(),
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[16..expected].iter().map(|&b| f64::from(b) / 255.0).collect();
    Matrix::from_vec(n, dim, data)
}

fn parse_labels(bytes: &[u8], name: &str) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{name}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, name)? as usize;
    let expected = 8 + n;
    if bytes.len() < expected {
        return Err(Error::Length {
            what: name.to_string(),
            expected,
            found: bytes.len(),
        });
    }
    let labels: Vec<usize> = bytes[8..expected].iter().map(|&b| b as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l >= CLASSES) {
        return Err(Error::Format(format!("{name}: label {bad} outside 0..{CLASSES}")));
    }
    Ok(labels)
}

/// Loads an IDX image file and its label file into a one-hot dataset.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_images(&read_file(ip)?, &ip.display().to_string())?;
    let labels = parse_labels(&read_file(lp)?, &lp.display().to_string())?;
    if images.rows() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.rows(),
            labels.len()
        )));
    }
    LabeledDataset::from_labels(images, &labels, CLASSES)
}

/// Serializes raw pixel bytes as an IDX image file (`n` images of `rows x cols`).
pub fn encode_idx_images(pixels: &[u8], n: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), n * rows * cols, "pixel count");
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn single_bright_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let mut px = vec![0u8; 4];
        px[2] = 255;
        let ip = write(dir.path(), "img", &encode_idx_images(&px, 1, 2, 2));
        let lp = write(dir.path(), "lbl", &encode_idx_labels(&[7]));
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.input_dim(), 4);
        assert_eq!(ds.inputs().max_abs(), 1.0);
        assert_eq!(ds.inputs()[(0, 2)], 1.0);
        assert_eq!(ds.class_of(0), 7);
    }

    #[test]
    fn bad_magic_truncation_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let good_img = encode_idx_images(&[1, 2, 3, 4, 5, 6, 7, 8], 2, 2, 2);
        let good_lbl = encode_idx_labels(&[0, 1]);

        let mut bad = good_img.clone();
        bad[3] = 0x01;
        let ip = write(dir.path(), "bad", &bad);
        let lp = write(dir.path(), "lbl", &good_lbl);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format(_))));

        let ip = write(dir.path(), "short", &good_img[..good_img.len() - 1]);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Length { .. })));

        let ip = write(dir.path(), "img", &good_img);
        let lp = write(dir.path(), "lbl3", &encode_idx_labels(&[0, 1, 2]));
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Consistency(_))));

        let missing = dir.path().join("nope");
        assert!(matches!(load_idx(&missing, &lp), Err(Error::Io { .. })));
    }

    #[test]
    fn scaling_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let px: Vec<u8> = (0..=255u8).chain(0..=255u8).collect();
        let ip = write(dir.path(), "img", &encode_idx_images(&px, 2, 16, 16));
        let lp = write(dir.path(), "lbl", &encode_idx_labels(&[3, 9]));
        let ds = load_idx(&ip, &lp).unwrap();
        let back: Vec<u8> = ds.inputs().as_slice().iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(back, px);
    }
}
