//! MNIST in the IDX format, and the centering/normalization used by the
//! parity and digit experiments.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::{Array1, Array2, Axis};

use super::{Dataset, Provenance, Targets};
use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const PIXELS: usize = 28 * 28;

/// Raw images in `[0, 1]` with digit labels.
#[derive(Debug, Clone)]
pub struct MnistSplit {
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
}

impl MnistSplit {
    pub fn new(images: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        if images.nrows() != labels.len() {
            return Err(Error::CountMismatch { images: images.nrows(), labels: labels.len() });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples (or all of them).
    pub fn truncate(mut self, n: usize) -> Self {
        if n < self.len() {
            self.images = self.images.slice_move(ndarray::s![..n, ..]);
            self.labels.truncate(n);
        }
        self
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]])).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        detail: format!("header ends at byte {}", bytes.len()),
    })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    check_magic(bytes, IMAGE_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let len = n * rows * cols;
    let body = bytes.get(16..16 + len).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        detail: format!("expected {len} pixel bytes, found {}", bytes.len().saturating_sub(16)),
    })?;
    let pixels = body.iter().map(|&b| f64::from(b) / 255.0).collect();
    Array2::from_shape_vec((n, rows * cols), pixels).map_err(|e| Error::Domain(e.to_string()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)? as usize;
    let body = bytes.get(8..8 + n).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        detail: format!("expected {n} label bytes, found {}", bytes.len().saturating_sub(8)),
    })?;
    if let Some(&bad) = body.iter().find(|&&l| l > 9) {
        return Err(Error::Domain(format!("{}: label {bad} out of range", path.display())));
    }
    Ok(body.to_vec())
}

/// Loads an image file and its label file (either may be gzip-compressed).
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<MnistSplit> {
    let images = parse_idx_images(&read_bytes(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read_bytes(labels_path)?, labels_path)?;
    MnistSplit::new(images, labels)
}

const TRAIN_FILES: [&str; 2] = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"];
const TEST_FILES: [&str; 2] = ["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];

/// Standard file names: train images, train labels, test images, test labels.
pub const MNIST_FILES: [&str; 4] = [TRAIN_FILES[0], TRAIN_FILES[1], TEST_FILES[0], TEST_FILES[1]];

fn locate(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz"), stem.replacen("-idx", ".idx", 1)]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Loads `(train, test)` from a directory holding the four standard files,
/// plain or `.gz`.
pub fn load_mnist_dir(dir: &Path) -> Result<(MnistSplit, MnistSplit)> {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for stem in TRAIN_FILES.iter().chain(TEST_FILES.iter()) {
        match locate(dir, stem) {
            Some(p) => found.push(p),
            None => missing.push(dir.join(stem)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData { expected: missing });
    }
    let train = load_mnist_idx(&found[0], &found[1])?;
    let test = load_mnist_idx(&found[2], &found[3])?;
    Ok((train, test))
}

/// Subtracts `mean` from every row, then scales each row to unit ℓ2 norm.
/// Rows that become exactly zero stay zero.
fn center_normalize(images: &Array2<f64>, mean: &Array1<f64>) -> Array2<f64> {
    let mut x = images - &mean.view().insert_axis(Axis(0));
    for mut row in x.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > 0.0 {
            row /= n;
        }
    }
    x
}

fn centered_pair(train: &MnistSplit, test: &MnistSplit) -> Result<(Array2<f64>, Array2<f64>)> {
    if train.is_empty() {
        return Err(Error::InvalidParameter("empty training split".into()));
    }
    if train.images.ncols() != test.images.ncols() {
        return Err(Error::DimensionMismatch { expected: train.images.ncols(), got: test.images.ncols() });
    }
    let mean = train.images.mean_axis(Axis(0)).expect("nonempty");
    Ok((center_normalize(&train.images, &mean), center_normalize(&test.images, &mean)))
}

/// Even digits → `+1`, odd → `-1`; centered by the training mean and
/// normalized per sample.
pub fn preprocess_parity(train: &MnistSplit, test: &MnistSplit) -> Result<(Dataset, Dataset)> {
    let (xtr, xte) = centered_pair(train, test)?;
    let parity = |labels: &[u8]| -> Targets {
        Targets::Binary { y: labels.iter().map(|&l| if l % 2 == 0 { 1.0 } else { -1.0 }).collect(), z: None }
    };
    Ok((
        Dataset::new(xtr, parity(&train.labels), Provenance::MnistParity)?,
        Dataset::new(xte, parity(&test.labels), Provenance::MnistParity)?,
    ))
}

/// Ten-class labels with the same centering and normalization.
pub fn preprocess_digits(train: &MnistSplit, test: &MnistSplit) -> Result<(Dataset, Dataset)> {
    let (xtr, xte) = centered_pair(train, test)?;
    let digits =
        |labels: &[u8]| Targets::Multiclass { labels: labels.iter().map(|&l| l as usize).collect(), classes: 10 };
    Ok((
        Dataset::new(xtr, digits(&train.labels), Provenance::MnistDigits)?,
        Dataset::new(xte, digits(&test.labels), Provenance::MnistDigits)?,
    ))
}

/// Preprocessing entry point for datasets that carry a provenance tag:
/// only raw MNIST may be preprocessed, and only once.
pub fn ensure_raw(ds: &Dataset) -> Result<()> {
    if ds.provenance != Provenance::MnistRaw {
        return Err(Error::AlreadyPreprocessed(ds.provenance.to_string()));
    }
    Ok(())
}

impl TryFrom<&Dataset> for MnistSplit {
    type Error = Error;

    fn try_from(ds: &Dataset) -> Result<Self> {
        ensure_raw(ds)?;
        let labels = ds
            .class_labels()
            .ok_or_else(|| Error::InvalidParameter("raw MNIST must carry digit labels".into()))?
            .iter()
            .map(|&l| l as u8)
            .collect();
        MnistSplit::new(ds.x.clone(), labels)
    }
}

impl MnistSplit {
    /// Raw split as a dataset tagged `mnist-raw`.
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.images.clone(),
            Targets::Multiclass { labels: self.labels.iter().map(|&l| l as usize).collect(), classes: 10 },
            Provenance::MnistRaw,
        )
    }
}

/// Serializes images and labels in IDX layout.
pub fn encode_idx(split: &MnistSplit, rows: u32, cols: u32) -> (Vec<u8>, Vec<u8>) {
    let n = split.len() as u32;
    let mut img = Vec::with_capacity(16 + split.images.len());
    for v in [IMAGE_MAGIC, n, rows, cols] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(split.images.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lab = Vec::with_capacity(8 + split.len());
    for v in [LABEL_MAGIC, n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(&split.labels);
    (img, lab)
}
