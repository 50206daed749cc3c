//! Dataset ingestion: IDX-format digit images and synthetic Gaussian blobs.
//!
//! Everything is loaded eagerly into dense f64 tensors; desk-scale sizes make
//! that the simple and fast choice.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{draw_gaussian, draw_uniform, Stream, StreamKey};
use crate::tensor::Tensor;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// One split: `inputs` is `[n, dim]`, `labels[i]` is the class of row `i`.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.shape()[1]
    }

    /// Gather rows by index into a fresh batch.
    pub fn gather(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let dim = self.dim();
        let mut data = Vec::with_capacity(idx.len() * dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(&self.inputs.data()[i * dim..(i + 1) * dim]);
            labels.push(self.labels[i]);
        }
        (Tensor::new(vec![idx.len(), dim], data).expect("gathered batch"), labels)
    }

    /// Sequential batches of at most `batch_size` rows, in index order.
    pub fn sequential_batches(&self, batch_size: usize) -> Vec<Tensor> {
        let n = self.len();
        let dim = self.dim();
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + batch_size).min(n);
            out.push(
                Tensor::new(vec![end - start, dim], self.inputs.data()[start * dim..end * dim].to_vec())
                    .expect("sequential batch"),
            );
            start = end;
        }
        out
    }

    fn truncate(&mut self, n: usize) {
        if n >= self.len() {
            return;
        }
        let dim = self.dim();
        let data = self.inputs.data()[..n * dim].to_vec();
        self.inputs = Tensor::new(vec![n, dim], data).expect("truncated split");
        self.labels.truncate(n);
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: DataSplit,
    pub test: Option<DataSplit>,
    pub classes: usize,
}

/// Where a run's data comes from; serializes into the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// IDX files under `dir` (`train-images-idx3-ubyte` etc.); `subset`
    /// keeps the first N training examples.
    Mnist {
        dir: PathBuf,
        #[serde(default)]
        subset: Option<usize>,
    },
    /// Gaussian blobs centered at `separation`·e_c, one basis vector per
    /// class. Linearly separable when the centers sit many sigma apart.
    /// `nonnegative` folds every entry to its absolute value, giving
    /// pixel-like features. `class_intensity` scales class c's examples by
    /// `1 + class_intensity·c`, planting class signal in the total input
    /// mass the way image datasets carry it in overall brightness.
    Synth {
        classes: usize,
        per_class: usize,
        dim: usize,
        sigma: f64,
        separation: f64,
        #[serde(default)]
        test_per_class: usize,
        #[serde(default)]
        nonnegative: bool,
        #[serde(default)]
        class_intensity: f64,
    },
    /// Each class is a symmetric pair of blobs at ±`separation`·e_c. The
    /// class means all sit at the origin, so no linear classifier works:
    /// the hidden layer has to fold the two lobes together. Still cleanly
    /// learnable when the lobes sit many sigma apart.
    SynthMirrored {
        classes: usize,
        per_class: usize,
        dim: usize,
        sigma: f64,
        separation: f64,
        #[serde(default)]
        test_per_class: usize,
    },
    /// Each class is a mixture of `blobs_per_class` Gaussian lobes at
    /// random unit directions scaled by `separation`. Solving it takes on
    /// the order of classes × blobs distinct hidden features with heavy
    /// permutation ambiguity, which is what makes independently-found
    /// solutions genuinely different networks. `label_noise` relabels that
    /// fraction of training rows (test rows stay clean), leaving a few
    /// confidently-misfit examples the way real datasets do; without them
    /// a fully-fit network's loss would keep improving as its logits are
    /// scaled up, and basin profiles would bottom out past the solution.
    SynthClusters {
        classes: usize,
        blobs_per_class: usize,
        per_class: usize,
        dim: usize,
        sigma: f64,
        separation: f64,
        #[serde(default)]
        test_per_class: usize,
        #[serde(default)]
        label_noise: f64,
    },
}

impl DatasetSpec {
    /// Default synthetic task: 10 classes of 5 random lobes each in 24
    /// dimensions, 1000 train and 200 test points per class. Tuned so that
    /// every optimizer fits it to better than 99% train accuracy in 20
    /// epochs while the 50 hidden units stay busy enough that different
    /// optimizers carve measurably different solutions.
    pub fn synth_default() -> Self {
        DatasetSpec::SynthClusters {
            classes: 10,
            blobs_per_class: 5,
            per_class: 1000,
            dim: 24,
            sigma: 0.35,
            separation: 2.6,
            test_per_class: 200,
            label_noise: 0.0025,
        }
    }

    /// The default task with a larger mislabeled fraction, approximating
    /// the residual-error level of real datasets. Basin profiles need those
    /// confidently-misfit points: they are what makes loss climb again when
    /// a solution's logits are scaled past it.
    pub fn synth_basin_default() -> Self {
        match Self::synth_default() {
            DatasetSpec::SynthClusters { classes, blobs_per_class, per_class, dim, sigma, separation, test_per_class, .. } => {
                DatasetSpec::SynthClusters {
                    classes,
                    blobs_per_class,
                    per_class,
                    dim,
                    sigma,
                    separation,
                    test_per_class,
                    label_noise: 0.04,
                }
            }
            other => other,
        }
    }

    /// Non-negative pixel-like variant of the basis-vector blobs with a
    /// per-class intensity ladder, for experiments whose mechanism depends
    /// on inputs that never change sign (as images do).
    pub fn synth_nonnegative_default() -> Self {
        DatasetSpec::Synth {
            classes: 10,
            per_class: 1000,
            dim: 24,
            sigma: 0.35,
            separation: 3.0,
            test_per_class: 200,
            nonnegative: true,
            class_intensity: 0.2,
        }
    }

    pub fn load(&self, master_seed: u64) -> Result<Dataset> {
        match self {
            DatasetSpec::Mnist { dir, subset } => load_mnist(dir, *subset),
            DatasetSpec::Synth {
                classes,
                per_class,
                dim,
                sigma,
                separation,
                test_per_class,
                nonnegative,
                class_intensity,
            } => {
                let mut ds = synth_dataset(
                    *classes,
                    *per_class,
                    *dim,
                    *sigma,
                    *separation,
                    *test_per_class,
                    master_seed,
                )?;
                let transform = |split: &mut DataSplit| {
                    let d = split.dim();
                    for (i, label) in split.labels.iter().enumerate() {
                        let factor = 1.0 + class_intensity * *label as f64;
                        for v in &mut split.inputs.data_mut()[i * d..(i + 1) * d] {
                            if *nonnegative {
                                *v = v.abs();
                            }
                            *v *= factor;
                        }
                    }
                };
                if *nonnegative || *class_intensity != 0.0 {
                    transform(&mut ds.train);
                    if let Some(test) = &mut ds.test {
                        transform(test);
                    }
                }
                Ok(ds)
            }
            DatasetSpec::SynthMirrored {
                classes,
                per_class,
                dim,
                sigma,
                separation,
                test_per_class,
            } => synth_mirrored_dataset(
                *classes,
                *per_class,
                *dim,
                *sigma,
                *separation,
                *test_per_class,
                master_seed,
            ),
            DatasetSpec::SynthClusters {
                classes,
                blobs_per_class,
                per_class,
                dim,
                sigma,
                separation,
                test_per_class,
                label_noise,
            } => {
                let mut ds = synth_clusters_dataset(
                    *classes,
                    *blobs_per_class,
                    *per_class,
                    *dim,
                    *sigma,
                    *separation,
                    *test_per_class,
                    master_seed,
                )?;
                if *label_noise > 0.0 {
                    apply_label_noise(&mut ds.train, *classes, *label_noise, master_seed);
                }
                Ok(ds)
            }
        }
    }

    /// Input width of the examples this spec produces.
    pub fn input_dim(&self) -> Result<usize> {
        match self {
            DatasetSpec::Mnist { .. } => Ok(784),
            DatasetSpec::Synth { dim, .. }
            | DatasetSpec::SynthMirrored { dim, .. }
            | DatasetSpec::SynthClusters { dim, .. } => Ok(*dim),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Mnist { dir, subset } => match subset {
                Some(n) => format!("mnist({}, first {n})", dir.display()),
                None => format!("mnist({})", dir.display()),
            },
            DatasetSpec::Synth { classes, per_class, dim, .. } => {
                format!("synth({classes} classes x {per_class}, dim {dim})")
            }
            DatasetSpec::SynthMirrored { classes, per_class, dim, .. } => {
                format!("synth_mirrored({classes} classes x {per_class}, dim {dim})")
            }
            DatasetSpec::SynthClusters { classes, blobs_per_class, per_class, dim, .. } => {
                format!("synth_clusters({classes} classes x {blobs_per_class} lobes x {per_class}, dim {dim})")
            }
        }
    }
}

// ── IDX parsing ──────────────────────────────────────────────────────

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let slice = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::Data(format!("truncated file reading {what} at offset {offset}")))?;
    Ok(u32::from_be_bytes([slice[0], slice[1], slice[2], slice[3]]))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut buf)?;
    Ok(buf)
}

/// Parse big-endian IDX image/label pairs; pixels scale to [0, 1] by /255.
fn load_idx_pair(images_path: &Path, labels_path: &Path) -> Result<DataSplit> {
    let img = read_file(images_path)?;
    let magic = read_u32_be(&img, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "bad image magic {magic:#010x} at offset 0 in {} (expected {IDX_IMAGES_MAGIC:#010x})",
            images_path.display()
        )));
    }
    let count = read_u32_be(&img, 4, "image count")? as usize;
    let rows = read_u32_be(&img, 8, "image rows")? as usize;
    let cols = read_u32_be(&img, 12, "image cols")? as usize;
    let pixels = count * rows * cols;
    let body = img
        .get(16..16 + pixels)
        .ok_or_else(|| Error::Data(format!("truncated image payload: want {pixels} bytes")))?;

    let lbl = read_file(labels_path)?;
    let lmagic = read_u32_be(&lbl, 0, "label magic")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "bad label magic {lmagic:#010x} at offset 0 in {} (expected {IDX_LABELS_MAGIC:#010x})",
            labels_path.display()
        )));
    }
    let lcount = read_u32_be(&lbl, 4, "label count")? as usize;
    if lcount != count {
        return Err(Error::Data(format!("{count} images but {lcount} labels")));
    }
    let labels_raw = lbl
        .get(8..8 + lcount)
        .ok_or_else(|| Error::Data(format!("truncated label payload: want {lcount} bytes")))?;

    let data: Vec<f64> = body.iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = labels_raw.iter().map(|&b| b as usize).collect();
    Ok(DataSplit { inputs: Tensor::new(vec![count, rows * cols], data)?, labels })
}

/// Load digit data from `dir`. Expects `train-images-idx3-ubyte` and
/// `train-labels-idx1-ubyte`; picks up the `t10k-*` test pair when present.
/// `subset` keeps the first N training examples, deterministically.
pub fn load_mnist(dir: &Path, subset: Option<usize>) -> Result<Dataset> {
    let mut train = load_idx_pair(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    if let Some(n) = subset {
        train.truncate(n);
    }
    let test_images = dir.join("t10k-images-idx3-ubyte");
    let test = if test_images.exists() {
        Some(load_idx_pair(&test_images, &dir.join("t10k-labels-idx1-ubyte"))?)
    } else {
        None
    };
    let classes = train.labels.iter().copied().max().map_or(0, |m| m + 1);
    Ok(Dataset { train, test, classes })
}

/// True when `dir` holds at least the training IDX pair.
pub fn mnist_available(dir: &Path) -> bool {
    dir.join("train-images-idx3-ubyte").exists() && dir.join("train-labels-idx1-ubyte").exists()
}

// ── Synthetic blobs ──────────────────────────────────────────────────

/// Relabel roughly `fraction` of the split's rows to a different class,
/// deterministically. Row `i` consults counters `u64::MAX/2 + 2i` (flip
/// decision) and `+ 2i + 1` (replacement label), far from any generator's
/// sample counters.
fn apply_label_noise(split: &mut DataSplit, classes: usize, fraction: f64, master_seed: u64) {
    const NOISE_BASE: u64 = u64::MAX / 2;
    for i in 0..split.labels.len() {
        let flip = draw_uniform(StreamKey::new(
            master_seed,
            Stream::DataSynth,
            NOISE_BASE + 2 * i as u64,
        ));
        if flip < fraction {
            let u = draw_uniform(StreamKey::new(
                master_seed,
                Stream::DataSynth,
                NOISE_BASE + 2 * i as u64 + 1,
            ));
            let shift = 1 + (u * (classes - 1) as f64) as usize;
            split.labels[i] = (split.labels[i] + shift.min(classes - 1)) % classes;
        }
    }
}

/// Gaussian blobs on the data-synth stream. Sample `(class c, index s)`
/// draws gaussian counters `(c·per_class + s)·dim + d`; the test split
/// continues after the whole train block, so the two never overlap. Rows
/// are stored class-interleaved (row i has class `i % classes`), keeping
/// prefix subsets and storage-order batches class-balanced.
pub fn synth_dataset(
    classes: usize,
    per_class: usize,
    dim: usize,
    sigma: f64,
    separation: f64,
    test_per_class: usize,
    master_seed: u64,
) -> Result<Dataset> {
    if dim < classes {
        return Err(Error::InvalidArgument(format!(
            "need dim >= classes for basis-vector centers, got {dim} < {classes}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let make_split = |per: usize, counter_base: u64| -> DataSplit {
        let n = classes * per;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            let s = i / classes;
            for d in 0..dim {
                let counter = counter_base + ((c * per + s) * dim + d) as u64;
                let g = draw_gaussian(StreamKey::new(master_seed, Stream::DataSynth, counter));
                let center = if d == c { separation } else { 0.0 };
                data.push(center + sigma * g);
            }
            labels.push(c);
        }
        DataSplit { inputs: Tensor::new(vec![n, dim], data).expect("synth split"), labels }
    };
    let train = make_split(per_class, 0);
    let test = if test_per_class > 0 {
        Some(make_split(test_per_class, (classes * per_class * dim) as u64))
    } else {
        None
    };
    Ok(Dataset { train, test, classes })
}

/// Like [`synth_dataset`], but class `c` is a symmetric pair of blobs at
/// ±`separation`·e_c (even sample indices on the positive lobe, odd on the
/// negative). Every class mean is the origin, so the task defeats linear
/// classifiers while staying cleanly learnable for a one-hidden-layer net.
pub fn synth_mirrored_dataset(
    classes: usize,
    per_class: usize,
    dim: usize,
    sigma: f64,
    separation: f64,
    test_per_class: usize,
    master_seed: u64,
) -> Result<Dataset> {
    if dim < classes {
        return Err(Error::InvalidArgument(format!(
            "need dim >= classes for basis-vector centers, got {dim} < {classes}"
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let make_split = |per: usize, counter_base: u64| -> DataSplit {
        let n = classes * per;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            let s = i / classes;
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            for d in 0..dim {
                let counter = counter_base + ((c * per + s) * dim + d) as u64;
                let g = draw_gaussian(StreamKey::new(master_seed, Stream::DataSynth, counter));
                let center = if d == c { sign * separation } else { 0.0 };
                data.push(center + sigma * g);
            }
            labels.push(c);
        }
        DataSplit { inputs: Tensor::new(vec![n, dim], data).expect("synth split"), labels }
    };
    let train = make_split(per_class, 0);
    let test = if test_per_class > 0 {
        Some(make_split(test_per_class, (classes * per_class * dim) as u64))
    } else {
        None
    };
    Ok(Dataset { train, test, classes })
}

/// Each class is `blobs_per_class` Gaussian lobes at random unit directions
/// scaled by `separation`. Direction vectors draw from the head of the
/// data-synth counter space; samples follow after it, test after train.
/// Sample `s` of a class lands on lobe `s % blobs_per_class`.
#[allow(clippy::too_many_arguments)]
pub fn synth_clusters_dataset(
    classes: usize,
    blobs_per_class: usize,
    per_class: usize,
    dim: usize,
    sigma: f64,
    separation: f64,
    test_per_class: usize,
    master_seed: u64,
) -> Result<Dataset> {
    if blobs_per_class == 0 {
        return Err(Error::InvalidArgument("need at least one lobe per class".into()));
    }
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument("need dim >= 2 for random directions".into()));
    }
    // Lobe centers: normalized gaussian directions, scaled.
    let mut centers = Vec::with_capacity(classes * blobs_per_class);
    for idx in 0..classes * blobs_per_class {
        let mut dir = Vec::with_capacity(dim);
        for d in 0..dim {
            let counter = (idx * dim + d) as u64;
            dir.push(draw_gaussian(StreamKey::new(master_seed, Stream::DataSynth, counter)));
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut dir {
            *v *= separation / norm;
        }
        centers.push(dir);
    }
    let sample_base = (classes * blobs_per_class * dim) as u64;

    let make_split = |per: usize, counter_base: u64| -> DataSplit {
        let n = classes * per;
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            let s = i / classes;
            let center = &centers[c * blobs_per_class + s % blobs_per_class];
            for d in 0..dim {
                let counter = counter_base + ((c * per + s) * dim + d) as u64;
                let g = draw_gaussian(StreamKey::new(master_seed, Stream::DataSynth, counter));
                data.push(center[d] + sigma * g);
            }
            labels.push(c);
        }
        DataSplit { inputs: Tensor::new(vec![n, dim], data).expect("synth split"), labels }
    };
    let train = make_split(per_class, sample_base);
    let test = if test_per_class > 0 {
        Some(make_split(
            test_per_class,
            sample_base + (classes * per_class * dim) as u64,
        ))
    } else {
        None
    };
    Ok(Dataset { train, test, classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx(dir: &Path, name: &str, bytes: &[u8]) {
        let mut f = File::create(dir.join(name)).unwrap();
        f.write_all(bytes).unwrap();
    }

    fn tiny_mnist_files(dir: &Path, count: u32) {
        // 2x2 images, values 0..=255 cycling.
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&count.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        for i in 0..count * 4 {
            img.push((i % 256) as u8);
        }
        write_idx(dir, "train-images-idx3-ubyte", &img);

        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&count.to_be_bytes());
        for i in 0..count {
            lbl.push((i % 10) as u8);
        }
        write_idx(dir, "train-labels-idx1-ubyte", &lbl);
    }

    #[test]
    fn idx_roundtrip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        tiny_mnist_files(dir.path(), 12);
        let ds = load_mnist(dir.path(), None).unwrap();
        assert_eq!(ds.train.len(), 12);
        assert_eq!(ds.train.dim(), 4);
        assert_eq!(ds.train.inputs.data()[1], 1.0 / 255.0);
        assert_eq!(ds.train.labels[11], 1);
        assert_eq!(ds.classes, 10);
        assert!(ds.test.is_none());
    }

    #[test]
    fn idx_bad_magic_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        tiny_mnist_files(dir.path(), 4);
        // Corrupt the image magic.
        let path = dir.path().join("train-images-idx3-ubyte");
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[3] = 0x99;
        std::fs::write(&path, bytes).unwrap();
        let err = load_mnist(dir.path(), None).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("magic") && msg.contains("offset 0"), "{msg}");
    }

    #[test]
    fn idx_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        tiny_mnist_files(dir.path(), 4);
        let path = dir.path().join("train-images-idx3-ubyte");
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_mnist(dir.path(), None).is_err());
    }

    #[test]
    fn idx_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        tiny_mnist_files(dir.path(), 4);
        let path = dir.path().join("train-labels-idx1-ubyte");
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[7] = 3; // claim 3 labels for 4 images
        bytes.truncate(8 + 3);
        std::fs::write(&path, bytes).unwrap();
        let err = load_mnist(dir.path(), None).unwrap_err();
        assert!(format!("{err}").contains("labels"));
    }

    #[test]
    fn subset_is_deterministic_prefix() {
        let dir = tempfile::tempdir().unwrap();
        tiny_mnist_files(dir.path(), 20);
        let a = load_mnist(dir.path(), Some(8)).unwrap();
        let b = load_mnist(dir.path(), Some(8)).unwrap();
        let full = load_mnist(dir.path(), None).unwrap();
        assert_eq!(a.train.len(), 8);
        assert_eq!(a.train.inputs.data(), b.train.inputs.data());
        assert_eq!(a.train.inputs.data(), &full.train.inputs.data()[..8 * 4]);
    }

    #[test]
    fn synth_reproducible_and_separated() {
        let a = synth_dataset(3, 50, 5, 0.3, 3.0, 10, 7).unwrap();
        let b = synth_dataset(3, 50, 5, 0.3, 3.0, 10, 7).unwrap();
        assert_eq!(a.train.inputs.data(), b.train.inputs.data());
        assert_eq!(a.train.len(), 150);
        assert_eq!(a.test.as_ref().unwrap().len(), 30);
        // Class means sit near their centers.
        for c in 0..3 {
            let rows: Vec<usize> = (0..a.train.len()).filter(|&i| a.train.labels[i] == c).collect();
            let mut mean = vec![0.0; 5];
            for &i in &rows {
                for d in 0..5 {
                    mean[d] += a.train.inputs.data()[i * 5 + d];
                }
            }
            for m in &mut mean {
                *m /= rows.len() as f64;
            }
            assert!((mean[c] - 3.0).abs() < 0.3, "class {c} center {mean:?}");
        }
        // Train and test draws differ (disjoint counters).
        assert_ne!(&a.train.inputs.data()[..5], &a.test.as_ref().unwrap().inputs.data()[..5]);
    }

    #[test]
    fn synth_validates_dimensions() {
        assert!(synth_dataset(5, 10, 3, 0.5, 3.0, 0, 1).is_err());
        assert!(synth_dataset(2, 10, 3, 0.0, 3.0, 0, 1).is_err());
    }

    #[test]
    fn gather_and_sequential_batches() {
        let ds = synth_dataset(2, 5, 3, 0.5, 3.0, 0, 1).unwrap();
        let (batch, labels) = ds.train.gather(&[9, 0, 3]);
        assert_eq!(batch.shape(), &[3, 3]);
        assert_eq!(labels, vec![1, 0, 1]);
        assert_eq!(&batch.data()[0..3], &ds.train.inputs.data()[27..30]);
        let batches = ds.train.sequential_batches(4);
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[2].shape(), &[2, 3]);
    }
}
