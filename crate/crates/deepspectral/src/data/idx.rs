use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str, path: &Path) -> Result<u32> {
    let slice = bytes.get(offset..offset + 4).ok_or_else(|| {
        Error::format(format!("{}: truncated while reading {what}", path.display()))
    })?;
    Ok(u32::from_be_bytes(slice.try_into().expect("4-byte slice")))
}

/// Loads an IDX image file (and optionally its companion label file).
///
/// Image pixels are bytes scaled to `[0, 1]`; each image is flattened
/// row-major into `rows * cols` features. All multi-byte header fields are
/// big-endian per the IDX convention.
pub fn load_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<Dataset> {
    let bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;

    let magic = read_u32_be(&bytes, 0, "magic", images_path)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(format!(
            "{}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x} (idx3 image file)",
            images_path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4, "image count", images_path)? as usize;
    let rows = read_u32_be(&bytes, 8, "row count", images_path)? as usize;
    let cols = read_u32_be(&bytes, 12, "column count", images_path)? as usize;
    let pixels = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(format!("{}: header overflows", images_path.display())))?;
    if bytes.len() != 16 + pixels {
        return Err(Error::format(format!(
            "{}: expected {} payload bytes for {count} images of {rows}x{cols}, found {}",
            images_path.display(),
            pixels,
            bytes.len().saturating_sub(16)
        )));
    }
    if count == 0 || rows * cols == 0 {
        return Err(Error::format(format!("{}: empty image file", images_path.display())));
    }

    let p = rows * cols;
    let mut features = Matrix::zeros(count, p);
    for (i, chunk) in bytes[16..].chunks_exact(p).enumerate() {
        let row = features.row_mut(i);
        for (dst, &byte) in row.iter_mut().zip(chunk) {
            *dst = byte as f64 / 255.0;
        }
    }

    let raw_labels = match labels_path {
        None => None,
        Some(lp) => {
            let lbytes = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
            let magic = read_u32_be(&lbytes, 0, "magic", lp)?;
            if magic != LABEL_MAGIC {
                return Err(Error::format(format!(
                    "{}: bad magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x} (idx1 label file)",
                    lp.display()
                )));
            }
            let lcount = read_u32_be(&lbytes, 4, "label count", lp)? as usize;
            if lcount != count {
                return Err(Error::format(format!(
                    "{}: {lcount} labels for {count} images",
                    lp.display()
                )));
            }
            if lbytes.len() != 8 + lcount {
                return Err(Error::format(format!(
                    "{}: expected {lcount} payload bytes, found {}",
                    lp.display(),
                    lbytes.len().saturating_sub(8)
                )));
            }
            Some(lbytes[8..].iter().map(|&b| b as i64).collect())
        }
    };

    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    Dataset::new(features, raw_labels, name, images_path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&count.to_be_bytes());
        bytes.extend_from_slice(&rows.to_be_bytes());
        bytes.extend_from_slice(&cols.to_be_bytes());
        bytes.extend_from_slice(payload);
        bytes
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        bytes
    }

    fn write_temp(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn loads_images_and_labels_with_unit_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_temp(&dir, "i.idx", &image_file(2, 1, 2, &[0, 255, 51, 102]));
        let lab = write_temp(&dir, "l.idx", &label_file(&[7, 3]));
        let ds = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(ds.features.shape(), (2, 2));
        assert_eq!(ds.features.row(0), &[0.0, 1.0]);
        assert!((ds.features.get(1, 0) - 0.2).abs() < 1e-12);
        // 3 and 7 compact to 0 and 1.
        assert_eq!(ds.labels, Some(vec![1, 0]));
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = image_file(1, 1, 1, &[9]);
        bytes[3] = 0x01; // label magic in an image slot
        let img = write_temp(&dir, "bad.idx", &bytes);
        let err = load_idx(&img, None).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn truncation_and_count_mismatch_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_temp(&dir, "short.idx", &image_file(2, 2, 2, &[1, 2, 3]));
        assert!(matches!(load_idx(&img, None), Err(Error::Format(_))));

        let img = write_temp(&dir, "ok.idx", &image_file(2, 1, 1, &[1, 2]));
        let lab = write_temp(&dir, "short-labels.idx", &label_file(&[1, 2, 3]));
        let err = load_idx(&img, Some(&lab)).unwrap_err();
        assert!(err.to_string().contains("3 labels for 2 images"));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_idx(Path::new("/nonexistent/x.idx"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn digits_fixture_loads() {
        let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
        let ds = load_idx(
            &base.join("digits-images.idx"),
            Some(&base.join("digits-labels.idx")),
        )
        .unwrap();
        assert_eq!(ds.features.shape(), (1797, 64));
        assert_eq!(ds.k_true(), Some(10));
        let max = ds.features.max_abs();
        assert!(max <= 1.0 && max > 0.9);
    }
}
