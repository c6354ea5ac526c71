//! IDX reader for the MNIST image and label files.

use std::path::Path;

use super::{one_hot, Dataset};
use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Returns `(count, rows·cols, pixels)` with pixels still as raw bytes.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if bytes.len() < 16 {
        return Err(Error::LengthMismatch(format!("{}: truncated header", path.display())));
    }
    let magic = read_u32(&bytes, 0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::BadMagic { path: path.into(), expected: IDX_IMAGE_MAGIC, found: magic });
    }
    let count = read_u32(&bytes, 4) as usize;
    let pixels = read_u32(&bytes, 8) as usize * read_u32(&bytes, 12) as usize;
    if bytes.len() != 16 + count * pixels {
        return Err(Error::LengthMismatch(format!(
            "{}: header promises {count}x{pixels} bytes, file has {}",
            path.display(),
            bytes.len() - 16
        )));
    }
    Ok((count, pixels, bytes[16..].to_vec()))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if bytes.len() < 8 {
        return Err(Error::LengthMismatch(format!("{}: truncated header", path.display())));
    }
    let magic = read_u32(&bytes, 0);
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::BadMagic { path: path.into(), expected: IDX_LABEL_MAGIC, found: magic });
    }
    let count = read_u32(&bytes, 4) as usize;
    if bytes.len() != 8 + count {
        return Err(Error::LengthMismatch(format!(
            "{}: header promises {count} labels, file has {}",
            path.display(),
            bytes.len() - 8
        )));
    }
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Parse { path: path.into(), line: pos, msg: format!("label {}", labels[pos]) });
    }
    Ok(labels)
}

fn read_pair(images: &Path, labels: &Path) -> Result<(usize, Vec<u8>, Vec<u8>)> {
    let (count, pixels, img) = read_idx_images(images)?;
    let lbl = read_idx_labels(labels)?;
    if lbl.len() != count {
        return Err(Error::LengthMismatch(format!(
            "{} images but {} labels",
            count,
            lbl.len()
        )));
    }
    Ok((pixels, img, lbl))
}

/// Loads MNIST from IDX files. Pixels are scaled to [0, 1] and labels are
/// one-hot encoded over 10 classes. The test pair is optional.
pub fn load_mnist(
    train_images: impl AsRef<Path>,
    train_labels: impl AsRef<Path>,
    test: Option<(&Path, &Path)>,
) -> Result<Dataset> {
    let (pixels, mut img, mut lbl) = read_pair(train_images.as_ref(), train_labels.as_ref())?;
    let n_train = lbl.len();
    if let Some((ti, tl)) = test {
        let (test_pixels, timg, tlbl) = read_pair(ti, tl)?;
        if test_pixels != pixels {
            return Err(Error::LengthMismatch(format!("train images have {pixels} pixels, test {test_pixels}")));
        }
        img.extend(timg);
        lbl.extend(tlbl);
    }
    let inputs = img.iter().map(|&b| f64::from(b) / 255.0).collect();
    let targets = one_hot(&lbl, 10);
    let train = (0..n_train).collect();
    let test = (n_train..lbl.len()).collect();
    Dataset::from_parts("mnist", pixels, inputs, 10, targets, train, test)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn write_images(path: &Path, magic: u32, count: u32, side: u32, fill: impl Fn(usize) -> u8) {
        let mut f = std::fs::File::create(path).unwrap();
        for v in [magic, count, side, side] {
            f.write_all(&v.to_be_bytes()).unwrap();
        }
        let data: Vec<u8> = (0..(count * side * side) as usize).map(fill).collect();
        f.write_all(&data).unwrap();
    }

    pub(crate) fn write_labels(path: &Path, labels: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_all(&IDX_LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn loads_synthetic_files() {
        let dir = tempfile::tempdir().unwrap();
        let (ti, tl, vi, vl) = (
            dir.path().join("ti"),
            dir.path().join("tl"),
            dir.path().join("vi"),
            dir.path().join("vl"),
        );
        write_images(&ti, IDX_IMAGE_MAGIC, 6, 28, |i| (i % 256) as u8);
        write_labels(&tl, &[0, 1, 2, 3, 4, 9]);
        write_images(&vi, IDX_IMAGE_MAGIC, 2, 28, |_| 255);
        write_labels(&vl, &[5, 6]);
        let ds = load_mnist(&ti, &tl, Some((&vi, &vl))).unwrap();
        assert_eq!(ds.n_features(), 784);
        assert_eq!(ds.n_train(), 6);
        assert_eq!(ds.test(), &[6, 7]);
        assert_eq!(ds.label(5), 9);
        for row in 0..ds.len() {
            assert!(ds.input(row).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        assert_eq!(ds.input(7)[0], 1.0);
    }

    #[test]
    fn label_magic_in_image_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ti = dir.path().join("ti");
        write_images(&ti, IDX_LABEL_MAGIC, 1, 28, |_| 0);
        let err = read_idx_images(&ti).unwrap_err();
        assert!(matches!(err, Error::BadMagic { found: 2049, .. }), "{err}");
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (ti, tl) = (dir.path().join("ti"), dir.path().join("tl"));
        write_images(&ti, IDX_IMAGE_MAGIC, 3, 28, |_| 0);
        write_labels(&tl, &[1, 2]);
        assert!(matches!(load_mnist(&ti, &tl, None), Err(Error::LengthMismatch(_))));
    }
}
