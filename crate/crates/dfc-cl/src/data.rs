//! MNIST ingestion and split-MNIST task streams.
//!
//! Reads the standard big-endian IDX files (optionally gzip-compressed),
//! scales pixels to [0, 1], and slices the digit classes into five two-digit
//! tasks. Datasets are immutable after loading and safe to share across
//! concurrent runs.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::bufread::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const IMAGE_PIXELS: usize = 784;
pub const NUM_TASKS: usize = 5;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Continual-learning evaluation paradigm: fixed binary label space
/// (digit parity) or growing ten-way label space (digit identity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    DomainIl,
    ClassIl,
}

impl Paradigm {
    pub fn map_label(self, digit: u8) -> u8 {
        match self {
            Paradigm::DomainIl => digit % 2,
            Paradigm::ClassIl => digit,
        }
    }

    pub fn num_classes(self) -> usize {
        match self {
            Paradigm::DomainIl => 2,
            Paradigm::ClassIl => 10,
        }
    }
}

impl std::fmt::Display for Paradigm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Paradigm::DomainIl => write!(f, "domain_il"),
            Paradigm::ClassIl => write!(f, "class_il"),
        }
    }
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domain_il" | "domain-il" | "domain" => Ok(Paradigm::DomainIl),
            "class_il" | "class-il" | "class" => Ok(Paradigm::ClassIl),
            other => Err(Error::InvalidArgument(format!("unknown paradigm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MnistDataset {
    pub images: Matrix,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl MnistDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Build a dataset from already-decoded parts (synthetic data in tests).
    pub fn from_parts(images: Matrix, labels: Vec<u8>, split: Split) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} images vs {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if images.as_slice().iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument("pixel values must lie in [0,1]".into()));
        }
        if labels.iter().any(|&l| l > 9) {
            return Err(Error::InvalidArgument("labels must lie in 0..=9".into()));
        }
        Ok(MnistDataset { images, labels, split })
    }

    /// Deterministic per-digit subsample keeping roughly `fraction` of the
    /// samples of every digit.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<MnistDataset> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument("subsample fraction must lie in [0,1]".into()));
        }
        let mut keep: Vec<usize> = Vec::new();
        for digit in 0u8..=9 {
            let mut idx: Vec<usize> =
                (0..self.len()).filter(|&i| self.labels[i] == digit).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + digit as u64));
            idx.shuffle(&mut rng);
            let take = ((idx.len() as f64) * fraction).round() as usize;
            keep.extend(idx.into_iter().take(take));
        }
        keep.sort_unstable();
        Ok(MnistDataset {
            images: self.images.select_rows(&keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        })
    }
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let buf = BufReader::new(file);
    if path.extension().is_some_and(|ext| ext == "gz") {
        Ok(Box::new(GzDecoder::new(buf)))
    } else {
        Ok(Box::new(buf))
    }
}

fn read_u32_be(reader: &mut dyn Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|_| Error::DataFormat {
        path: path.display().to_string(),
        reason: "truncated header".into(),
    })?;
    Ok(u32::from_be_bytes(buf))
}

fn read_exact_bytes(reader: &mut dyn Read, n: usize, path: &Path) -> Result<Vec<u8>> {
    let mut data = vec![0u8; n];
    reader.read_exact(&mut data).map_err(|_| Error::DataFormat {
        path: path.display().to_string(),
        reason: format!("truncated payload, expected {n} bytes"),
    })?;
    Ok(data)
}

/// Load one MNIST split from an IDX image/label file pair.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<MnistDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let mut reader = open_maybe_gz(images_path)?;
    let magic = read_u32_be(&mut reader, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::DataFormat {
            path: images_path.display().to_string(),
            reason: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let n_images = read_u32_be(&mut reader, images_path)? as usize;
    let height = read_u32_be(&mut reader, images_path)? as usize;
    let width = read_u32_be(&mut reader, images_path)? as usize;
    if height * width != IMAGE_PIXELS {
        return Err(Error::DataFormat {
            path: images_path.display().to_string(),
            reason: format!("expected 28x28 images, got {height}x{width}"),
        });
    }
    let raw = read_exact_bytes(&mut reader, n_images * IMAGE_PIXELS, images_path)?;
    let images = Matrix::from_flat(
        n_images,
        IMAGE_PIXELS,
        raw.iter().map(|&b| f64::from(b) / 255.0).collect(),
    )?;

    let mut reader = open_maybe_gz(labels_path)?;
    let magic = read_u32_be(&mut reader, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::DataFormat {
            path: labels_path.display().to_string(),
            reason: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let n_labels = read_u32_be(&mut reader, labels_path)? as usize;
    if n_labels != n_images {
        return Err(Error::DataFormat {
            path: labels_path.display().to_string(),
            reason: format!("{n_labels} labels for {n_images} images"),
        });
    }
    let labels = read_exact_bytes(&mut reader, n_labels, labels_path)?;
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::DataFormat {
            path: labels_path.display().to_string(),
            reason: format!("label {bad} out of range 0..=9"),
        });
    }

    MnistDataset::from_parts(images, labels, split)
}

/// Load `train-images-idx3-ubyte[.gz]` etc. from a directory.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(MnistDataset, MnistDataset)> {
    let dir = dir.as_ref();
    let find = |stem: &str| -> Result<std::path::PathBuf> {
        let plain = dir.join(stem);
        if plain.exists() {
            return Ok(plain);
        }
        let gz = dir.join(format!("{stem}.gz"));
        if gz.exists() {
            return Ok(gz);
        }
        Err(Error::DataFormat {
            path: dir.display().to_string(),
            reason: format!("missing {stem}[.gz]"),
        })
    };
    let train = load_mnist_idx(
        find("train-images-idx3-ubyte")?,
        find("train-labels-idx1-ubyte")?,
        Split::Train,
    )?;
    let test = load_mnist_idx(
        find("t10k-images-idx3-ubyte")?,
        find("t10k-labels-idx1-ubyte")?,
        Split::Test,
    )?;
    Ok((train, test))
}

/// One supervised task: the samples of a consecutive digit pair with labels
/// mapped for the paradigm.
#[derive(Debug, Clone)]
pub struct Task {
    /// 1-based position in the stream.
    pub index: usize,
    pub digits: (u8, u8),
    pub inputs: Matrix,
    /// Paradigm-mapped targets.
    pub labels: Vec<u8>,
    /// Original digit of every sample, kept for per-digit analysis.
    pub digit_of_sample: Vec<u8>,
    pub paradigm: Paradigm,
}

#[derive(Debug, Clone)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub paradigm: Paradigm,
}

/// Which task (1-based) a digit belongs to.
pub fn task_of_digit(digit: u8) -> usize {
    digit as usize / 2 + 1
}

/// Slice a dataset into the five consecutive-digit-pair tasks.
pub fn build_split_mnist(ds: &MnistDataset, paradigm: Paradigm) -> Result<TaskStream> {
    let mut tasks = Vec::with_capacity(NUM_TASKS);
    for t in 1..=NUM_TASKS {
        let digits = (2 * (t as u8 - 1), 2 * (t as u8 - 1) + 1);
        let idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.labels[i] == digits.0 || ds.labels[i] == digits.1)
            .collect();
        let digit_of_sample: Vec<u8> = idx.iter().map(|&i| ds.labels[i]).collect();
        let labels = digit_of_sample.iter().map(|&d| paradigm.map_label(d)).collect();
        tasks.push(Task {
            index: t,
            digits,
            inputs: ds.images.select_rows(&idx),
            labels,
            digit_of_sample,
            paradigm,
        });
    }
    Ok(TaskStream { tasks, paradigm })
}

/// Mini-batch schedule over one task: a (possibly shuffled) permutation cut
/// into `batch_size` chunks, final partial batch kept. Batches materialize
/// lazily.
pub struct Batches<'a> {
    task: &'a Task,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl Task {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batches(&self, batch_size: usize, rng_seed: u64, shuffle: bool) -> Result<Batches<'_>> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.is_empty() {
            return Err(Error::InvalidArgument(format!("task {} is empty", self.index)));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        if shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            order.shuffle(&mut rng);
        }
        Ok(Batches {
            task: self,
            order,
            pos: 0,
            batch_size,
        })
    }

    /// Number of batches one pass produces.
    pub fn batches_per_epoch(&self, batch_size: usize) -> usize {
        self.len().div_ceil(batch_size)
    }
}

impl Iterator for Batches<'_> {
    type Item = (Matrix, Vec<u8>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        let inputs = self.task.inputs.select_rows(idx);
        let labels = idx.iter().map(|&i| self.task.labels[i]).collect();
        Some((inputs, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, magic: u32, images: &[[u8; 4]]) {
        // tiny 2x2 "images" for format tests
        let mut f = File::create(path).unwrap();
        f.write_all(&magic.to_be_bytes()).unwrap();
        f.write_all(&(images.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
    }

    fn write_idx_labels(path: &Path, magic: u32, labels: &[u8]) {
        let mut f = File::create(path).unwrap();
        f.write_all(&magic.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        write_idx_images(&img, 0x0000_0804, &[[0, 0, 0, 0]]);
        write_idx_labels(&lbl, IDX_LABELS_MAGIC, &[0]);
        let err = load_mnist_idx(&img, &lbl, Split::Train).unwrap_err();
        assert!(err.to_string().contains("bad image magic"));
    }

    fn write_idx_full_images(path: &Path, count: usize) {
        let mut f = File::create(path).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(count as u32).to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&vec![1u8; count * IMAGE_PIXELS]).unwrap();
    }

    #[test]
    fn truncation_and_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        write_idx_full_images(&img, 1);
        write_idx_labels(&lbl, IDX_LABELS_MAGIC, &[1, 2]);
        let err = load_mnist_idx(&img, &lbl, Split::Train).unwrap_err();
        assert!(err.to_string().contains("2 labels for 1 images"));

        // truncated image payload
        let mut f = File::create(&img).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&[7, 7]).unwrap();
        drop(f);
        let err = load_mnist_idx(&img, &lbl, Split::Train).unwrap_err();
        assert!(err.to_string().contains("truncated"));

        // wrong geometry
        write_idx_images(&img, IDX_IMAGES_MAGIC, &[[0, 0, 0, 0]]);
        write_idx_labels(&lbl, IDX_LABELS_MAGIC, &[1]);
        let err = load_mnist_idx(&img, &lbl, Split::Train).unwrap_err();
        assert!(err.to_string().contains("28x28"));
    }

    #[test]
    fn pixel_normalization_endpoints() {
        // this test uses 28x28-sized images so the loader accepts them
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        let mut f = File::create(&img).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        let mut pixels = vec![0u8; IMAGE_PIXELS];
        pixels[0] = 255;
        pixels[1] = 0;
        f.write_all(&pixels).unwrap();
        drop(f);
        write_idx_labels(&lbl, IDX_LABELS_MAGIC, &[3]);
        let ds = load_mnist_idx(&img, &lbl, Split::Test).unwrap();
        assert_eq!(ds.images.get(0, 0), 1.0);
        assert_eq!(ds.images.get(0, 1), 0.0);
        assert_eq!(ds.split, Split::Test);
    }

    fn synthetic_dataset(per_digit: usize) -> MnistDataset {
        let n = per_digit * 10;
        let mut images = Matrix::zeros(n, IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let digit = (i % 10) as u8;
            images.set(i, digit as usize, 1.0);
            labels.push(digit);
        }
        MnistDataset::from_parts(images, labels, Split::Train).unwrap()
    }

    #[test]
    fn label_maps() {
        assert_eq!(Paradigm::DomainIl.map_label(7), 1);
        assert_eq!(Paradigm::ClassIl.map_label(7), 7);
        assert_eq!(Paradigm::DomainIl.map_label(4), 0);
    }

    #[test]
    fn task_digit_sets() {
        let ds = synthetic_dataset(3);
        let stream = build_split_mnist(&ds, Paradigm::DomainIl).unwrap();
        assert_eq!(stream.tasks.len(), 5);
        assert_eq!(stream.tasks[3].digits, (6, 7));
        for (i, task) in stream.tasks.iter().enumerate() {
            assert_eq!(task.index, i + 1);
            for &d in &task.digit_of_sample {
                assert!(d == task.digits.0 || d == task.digits.1);
            }
        }
    }

    #[test]
    fn tasks_partition_dataset() {
        let ds = synthetic_dataset(4);
        let stream = build_split_mnist(&ds, Paradigm::ClassIl).unwrap();
        let total: usize = stream.tasks.iter().map(Task::len).sum();
        assert_eq!(total, ds.len());
        // class labels keep digit identity; parity of class labels matches
        // the domain-IL map
        let domain = build_split_mnist(&ds, Paradigm::DomainIl).unwrap();
        for (tc, td) in stream.tasks.iter().zip(&domain.tasks) {
            for (lc, ld) in tc.labels.iter().zip(&td.labels) {
                assert_eq!(lc % 2, *ld);
            }
        }
    }

    #[test]
    fn batch_sizes_and_partial_tail() {
        let ds = synthetic_dataset(100);
        let stream = build_split_mnist(&ds, Paradigm::DomainIl).unwrap();
        // task has 200 samples; batches of 150 -> [150, 50]
        let sizes: Vec<usize> = stream.tasks[0]
            .batches(150, 1, true)
            .unwrap()
            .map(|(x, _)| x.rows())
            .collect();
        assert_eq!(sizes, vec![150, 50]);
    }

    #[test]
    fn shuffle_determinism_and_identity() {
        let ds = synthetic_dataset(8);
        let stream = build_split_mnist(&ds, Paradigm::ClassIl).unwrap();
        let task = &stream.tasks[2];
        let a: Vec<Vec<u8>> = task.batches(5, 9, true).unwrap().map(|(_, y)| y).collect();
        let b: Vec<Vec<u8>> = task.batches(5, 9, true).unwrap().map(|(_, y)| y).collect();
        assert_eq!(a, b);
        let plain: Vec<u8> = task
            .batches(5, 9, false)
            .unwrap()
            .flat_map(|(_, y)| y)
            .collect();
        assert_eq!(plain, task.labels);
    }

    #[test]
    fn empty_task_and_zero_batch_rejected() {
        let ds = synthetic_dataset(2);
        let stream = build_split_mnist(&ds, Paradigm::DomainIl).unwrap();
        assert!(stream.tasks[0].batches(0, 1, false).is_err());
        let empty = Task {
            index: 1,
            digits: (0, 1),
            inputs: Matrix::zeros(0, IMAGE_PIXELS),
            labels: vec![],
            digit_of_sample: vec![],
            paradigm: Paradigm::DomainIl,
        };
        assert!(empty.batches(4, 1, false).is_err());
    }

    #[test]
    fn subsample_keeps_fraction_per_digit() {
        let ds = synthetic_dataset(50);
        let sub = ds.subsample(0.2, 11).unwrap();
        assert_eq!(sub.len(), 100);
        for digit in 0u8..=9 {
            let count = sub.labels.iter().filter(|&&l| l == digit).count();
            assert_eq!(count, 10);
        }
        let sub2 = ds.subsample(0.2, 11).unwrap();
        assert_eq!(sub.labels, sub2.labels);
    }
}
