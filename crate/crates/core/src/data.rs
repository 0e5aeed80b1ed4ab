//! Image-classification datasets in the IDX distribution format, plus the
//! confusion matrix used to score them.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<u8>, num_classes: usize, split: Split) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(Error::Invalid("dataset needs dim >= 1 and at least one class".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Shape {
                context: "dataset features",
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(v) = features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange { what: "feature", value: *v, lo: 0.0, hi: 1.0 });
        }
        if let Some(&l) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
            return Err(Error::Invalid(format!("label {l} >= {num_classes} classes")));
        }
        Ok(Self { dim, num_classes, features, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.labels[i])
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.num_classes];
        y[self.label(i)] = 1.0;
        y
    }

    /// The first `n` examples (all of them when `n >= len`).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dim: self.dim,
            num_classes: self.num_classes,
            features: self.features[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parses an IDX file, returning its dimensions and payload.
fn parse_idx<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::format(path, format!("file too short for IDX header: {} bytes", bytes.len())));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::format(path, format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::format(
            path,
            format!("truncated header: expected {header} bytes, found {}", bytes.len()),
        ));
    }
    let dims: Vec<usize> = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect();
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for dims {dims:?}, found {}", bytes.len()),
        ));
    }
    Ok((dims, &bytes[header..]))
}

/// Loads an image/label IDX pair, scaling pixels to `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let image_bytes = read_maybe_gzip(images_path)?;
    let label_bytes = read_maybe_gzip(labels_path)?;
    let (idims, pixels) = parse_idx(images_path, &image_bytes, IDX_IMAGES_MAGIC)?;
    let (ldims, labels) = parse_idx(labels_path, &label_bytes, IDX_LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {} images", ldims[0], idims[0]),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::format(labels_path, format!("label {bad} outside 0..=9")));
    }
    let dim = idims[1] * idims[2];
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Dataset::new(features, dim, labels.to_vec(), 10, split)
}

/// Loads the conventional `train-*` / `t10k-*` file pair from `dir`,
/// accepting either raw or `.gz` names.
pub fn load_mnist_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let find = |kind: &str| {
        let base = dir.join(format!("{prefix}-{kind}-ubyte"));
        let gz = dir.join(format!("{prefix}-{kind}-ubyte.gz"));
        if base.exists() {
            base
        } else {
            gz
        }
    };
    load_idx(&find("images-idx3"), &find("labels-idx1"), split)
}

/// Counts indexed by (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "true\\pred")?;
        for j in 0..self.classes {
            write!(f, "{j:>7}")?;
        }
        writeln!(f)?;
        for (i, row) in self.counts.iter().enumerate() {
            write!(f, "{i:>9}")?;
            for c in row {
                write!(f, "{c:>7}")?;
            }
            writeln!(f)?;
        }
        write!(f, "accuracy: {:.4}", self.accuracy())
    }
}
