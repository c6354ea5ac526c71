use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

pub const WDBC_TRAIN: usize = 400;
pub const WDBC_TEST: usize = 169;
const WDBC_FEATURES: usize = 30;

/// Loads the UCI `wdbc.data` file (id, M/B diagnosis, 30 features).
///
/// Samples are shuffled with `split_seed` and split 400/169. Features are
/// z-scored with the training-split mean and population standard deviation.
/// Malignant maps to 1, benign to 0.
pub fn load_wdbc(path: impl AsRef<Path>, split_seed: u64) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e))?;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let line = line + 1;
        let record = record.map_err(|e| csv_err(path, line, e))?;
        if record.len() != WDBC_FEATURES + 2 {
            return Err(parse(path, line, format!("expected 32 fields, found {}", record.len())));
        }
        let target = match record[1].trim() {
            "M" => 1.0,
            "B" => 0.0,
            other => return Err(parse(path, line, format!("unknown diagnosis {other:?}"))),
        };
        targets.push(target);
        for field in record.iter().skip(2) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse(path, line, format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse(path, line, "non-finite feature".into()));
            }
            inputs.push(v);
        }
    }
    let n = targets.len();
    if n != WDBC_TRAIN + WDBC_TEST {
        return Err(Error::LengthMismatch(format!(
            "{}: expected {} samples, found {n}",
            path.display(),
            WDBC_TRAIN + WDBC_TEST
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let train = order[..WDBC_TRAIN].to_vec();
    let test = order[WDBC_TRAIN..].to_vec();

    for j in 0..WDBC_FEATURES {
        let col = |i: usize| inputs[i * WDBC_FEATURES + j];
        let mean = train.iter().map(|&i| col(i)).sum::<f64>() / train.len() as f64;
        let var = train.iter().map(|&i| (col(i) - mean).powi(2)).sum::<f64>() / train.len() as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            let v = &mut inputs[i * WDBC_FEATURES + j];
            *v = (*v - mean) / sd;
        }
    }

    Dataset::from_parts("wdbc", WDBC_FEATURES, inputs, 1, targets, train, test)
}

fn parse(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg }
}

fn csv_err(path: &Path, line: usize, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        parse(path, line, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn bundled() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.data")
    }

    #[test]
    fn loads_bundled_file() {
        let ds = load_wdbc(bundled(), 0).unwrap();
        assert_eq!(ds.n_train(), 400);
        assert_eq!(ds.test().len(), 169);
        assert_eq!(ds.n_features(), 30);
        assert_eq!(ds.len(), 569);
        let malignant = (0..ds.len()).filter(|&i| ds.label(i) == 1).count();
        assert_eq!(malignant, 212);
    }

    #[test]
    fn training_columns_are_standardized() {
        let ds = load_wdbc(bundled(), 7).unwrap();
        for j in 0..30 {
            let vals: Vec<f64> = ds.train().iter().map(|&i| ds.input(i)[j]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "column {j} var {var}");
        }
    }

    #[test]
    fn split_depends_on_seed_only() {
        let a = load_wdbc(bundled(), 3).unwrap();
        let b = load_wdbc(bundled(), 3).unwrap();
        let c = load_wdbc(bundled(), 4).unwrap();
        assert_eq!(a.train(), b.train());
        assert_ne!(a.train(), c.train());
    }

    #[test]
    fn unknown_diagnosis_is_a_parse_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let feats = vec!["1.0"; 30].join(",");
        writeln!(f, "1,M,{feats}").unwrap();
        writeln!(f, "2,X,{feats}").unwrap();
        let err = load_wdbc(f.path(), 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_wdbc("/nonexistent/wdbc.data", 0).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }
}
