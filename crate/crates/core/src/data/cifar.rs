use std::path::Path;

use super::{one_hot, Dataset};
use crate::error::{Error, Result};

/// One label byte followed by 32×32×3 pixel bytes.
pub const CIFAR_RECORD_BYTES: usize = 3073;
const CIFAR_PIXELS: usize = CIFAR_RECORD_BYTES - 1;

fn read_batch(path: &Path, pixels: &mut Vec<u8>, labels: &mut Vec<u8>) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(Error::LengthMismatch(format!(
            "{}: {} bytes is not a multiple of {CIFAR_RECORD_BYTES}",
            path.display(),
            bytes.len()
        )));
    }
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        if record[0] > 9 {
            return Err(Error::Parse { path: path.into(), line: i, msg: format!("label {}", record[0]) });
        }
        labels.push(record[0]);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok(())
}

/// Loads one or more CIFAR-10 binary training batches plus an optional test
/// batch. Pixels are scaled to [0, 1]; labels are one-hot over 10 classes.
pub fn load_cifar10<P: AsRef<Path>>(train_batches: &[P], test_batch: Option<&Path>) -> Result<Dataset> {
    if train_batches.is_empty() {
        return Err(Error::Config("no CIFAR-10 training batch given".into()));
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for p in train_batches {
        read_batch(p.as_ref(), &mut pixels, &mut labels)?;
    }
    let n_train = labels.len();
    if let Some(t) = test_batch {
        read_batch(t, &mut pixels, &mut labels)?;
    }
    let inputs = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let targets = one_hot(&labels, 10);
    let train = (0..n_train).collect();
    let test = (n_train..labels.len()).collect();
    Dataset::from_parts("cifar10", CIFAR_PIXELS, inputs, 10, targets, train, test)
}
