//! Image-like classification datasets: a seeded synthetic generator and the
//! raw on-disk format.
//!
//! File layout (little-endian): magic `MPDS`, version `u32` = 1, then `u32`
//! fields count, height, width, channels, num_classes, then per sample one
//! label byte followed by `channels·height·width` pixel bytes (CHW order).

use std::path::{Path, PathBuf};

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codec::{write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::gradcore::Tensor;
use crate::maskednet::InputShape;
use crate::rng::{self, derive_seed, Rng};

const MAGIC: &[u8; 4] = b"MPDS";
const VERSION: u32 = 1;

/// Fraction of each class (in file order) used for training.
pub const TRAIN_FRACTION: f64 = 0.75;

/// Pixel byte `p` is fed to networks as `(p - 128) / 32`.
pub fn normalize_pixel(p: u8) -> f64 {
    (f64::from(p) - 128.0) / 32.0
}

fn quantize(v: f64) -> u8 {
    (128.0 + 32.0 * v).round().clamp(0.0, 255.0) as u8
}

/// Generator parameters.
///
/// Every class prototype is built from smoothed unit-variance random images:
/// its superclass image `B_g` (`g = c mod superclasses`), the normalised sum
/// of `parts_per_class` images drawn from a shared dictionary of `parts`, and
/// an image of its own:
///
/// ```text
/// proto_c = superclass_scale·B_g + part_scale·ΣP_j/√parts_per_class + class_scale·U_c
/// ```
///
/// Samples add `noise_scale`-sized Gaussian noise to the prototype. Because
/// parts are shared, features that help one class help others.
///
/// The shifted variant keeps the superclass and part dictionaries but mixes
/// all superclass images with random weights and draws fresh part
/// combinations and own images, so its classes are new to anything trained
/// on the base variant while sharing its low-level structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub superclasses: usize,
    pub parts: usize,
    pub parts_per_class: usize,
    pub superclass_scale: f64,
    pub part_scale: f64,
    pub class_scale: f64,
    pub noise_scale: f64,
    /// 3×3 box-blur passes applied to every random image.
    pub smoothing: usize,
    pub shifted: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_classes: 20,
            samples_per_class: 200,
            height: 16,
            width: 16,
            channels: 1,
            superclasses: 5,
            parts: 16,
            parts_per_class: 3,
            superclass_scale: 1.0,
            part_scale: 1.0,
            class_scale: 0.3,
            noise_scale: 3.0,
            smoothing: 1,
            shifted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    File(PathBuf),
}

impl DatasetSource {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            Self::Synthetic(cfg) => generate_synthetic_dataset(cfg, seed),
            Self::File(path) => load_dataset(path),
        }
    }
}

/// Samples stored as bytes, labels in `0..num_classes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub num_classes: usize,
    pub labels: Vec<u8>,
    pub pixels: Vec<u8>,
}

impl Dataset {
    pub fn new(shape: InputShape, num_classes: usize, labels: Vec<u8>, pixels: Vec<u8>) -> Result<Self> {
        let ds = Self {
            height: shape.height,
            width: shape.width,
            channels: shape.channels,
            num_classes,
            labels,
            pixels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_len() == 0 || self.num_classes == 0 || self.num_classes > 256 {
            return Err(Error::InvalidConfig(format!(
                "dataset dims {}x{}x{} with {} classes",
                self.channels, self.height, self.width, self.num_classes
            )));
        }
        if self.pixels.len() != self.labels.len() * self.sample_len() {
            return Err(Error::ShapeMismatch {
                op: "dataset",
                expected: vec![self.labels.len() * self.sample_len()],
                actual: vec![self.pixels.len()],
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| usize::from(l) >= self.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad.into(),
                num_classes: self.num_classes,
            });
        }
        Ok(())
    }

    /// Errors unless every class has at least `batch_size` training samples.
    pub fn check_batch_size(&self, batch_size: usize) -> Result<()> {
        for c in 0..self.num_classes {
            let (train, _) = self.split_indices(c);
            if train.len() < batch_size {
                return Err(Error::InvalidConfig(format!(
                    "class {c} has {} training samples, fewer than batch size {batch_size}",
                    train.len()
                )));
            }
        }
        Ok(())
    }

    pub fn input_shape(&self) -> InputShape {
        InputShape {
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[u8] {
        let n = self.sample_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| usize::from(self.labels[i]) == class).collect()
    }

    /// Deterministic disjoint train/test split of one class.
    pub fn split_indices(&self, class: usize) -> (Vec<usize>, Vec<usize>) {
        let mut idx = self.class_indices(class);
        let cut = ((idx.len() as f64) * TRAIN_FRACTION).floor() as usize;
        let test = idx.split_off(cut.min(idx.len()));
        (idx, test)
    }

    /// Training and test indices over all classes.
    pub fn full_split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in 0..self.num_classes {
            let (a, b) = self.split_indices(c);
            train.extend(a);
            test.extend(b);
        }
        (train, test)
    }

    /// Normalised `[len, C, H, W]` tensor of the given samples.
    pub fn to_tensor(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("dataset indices"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.sample_len());
        for &i in indices {
            data.extend(self.sample(i).iter().map(|&p| normalize_pixel(p)));
        }
        Tensor::new(vec![indices.len(), self.channels, self.height, self.width], data)
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| usize::from(self.labels[i])).collect()
    }
}

fn random_image(rng: &mut Rng, cfg: &SyntheticConfig) -> Vec<f64> {
    let (c, h, w) = (cfg.channels, cfg.height, cfg.width);
    let mut img: Vec<f64> = (0..c * h * w).map(|_| StandardNormal.sample(rng)).collect();
    for _ in 0..cfg.smoothing {
        let src = img.clone();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for dy in y.saturating_sub(1)..(y + 2).min(h) {
                        for dx in x.saturating_sub(1)..(x + 2).min(w) {
                            acc += src[(ch * h + dy) * w + dx];
                        }
                    }
                    img[(ch * h + y) * w + x] = acc / 9.0;
                }
            }
        }
    }
    let n = img.len() as f64;
    let mean = img.iter().sum::<f64>() / n;
    let std = (img.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    img.iter_mut().for_each(|v| *v = (*v - mean) / std);
    img
}

/// Deterministic synthetic dataset, class-major sample order.
pub fn generate_synthetic_dataset(cfg: &SyntheticConfig, seed: u64) -> Result<Dataset> {
    if cfg.num_classes == 0 || cfg.num_classes > 256 || cfg.samples_per_class == 0 || cfg.superclasses == 0 {
        return Err(Error::InvalidConfig(format!(
            "synthetic dataset needs 1..=256 classes, samples and superclasses, got {cfg:?}"
        )));
    }
    if cfg.parts_per_class > cfg.parts {
        return Err(Error::InvalidConfig(format!(
            "parts_per_class {} exceeds parts {}",
            cfg.parts_per_class, cfg.parts
        )));
    }
    if cfg.height * cfg.width * cfg.channels == 0 {
        return Err(Error::InvalidConfig("zero image dimension".into()));
    }
    for (name, v) in [
        ("superclass_scale", cfg.superclass_scale),
        ("part_scale", cfg.part_scale),
        ("class_scale", cfg.class_scale),
        ("noise_scale", cfg.noise_scale),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative")));
        }
    }
    let variant = if cfg.shifted { "shifted" } else { "base" };
    let mut basis_rng = rng::seeded(derive_seed(seed, "superclass-basis", 0));
    let basis: Vec<Vec<f64>> = (0..cfg.superclasses).map(|_| random_image(&mut basis_rng, cfg)).collect();
    let parts: Vec<Vec<f64>> = (0..cfg.parts).map(|_| random_image(&mut basis_rng, cfg)).collect();
    let part_norm = (cfg.parts_per_class.max(1) as f64).sqrt();
    let mut class_rng = rng::seeded(derive_seed(seed, &format!("{variant}-classes"), 0));
    let len = cfg.channels * cfg.height * cfg.width;
    let prototypes: Vec<Vec<f64>> = (0..cfg.num_classes)
        .map(|c| {
            let shared: Vec<f64> = if cfg.shifted {
                let weights: Vec<f64> = (0..cfg.superclasses).map(|_| StandardNormal.sample(&mut class_rng)).collect();
                let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
                (0..len)
                    .map(|i| basis.iter().zip(&weights).map(|(b, w)| b[i] * w).sum::<f64>() / norm)
                    .collect()
            } else {
                basis[c % cfg.superclasses].clone()
            };
            let chosen = index::sample(&mut class_rng, cfg.parts, cfg.parts_per_class);
            let own = random_image(&mut class_rng, cfg);
            (0..len)
                .map(|i| {
                    let part: f64 = chosen.iter().map(|j| parts[j][i]).sum::<f64>() / part_norm;
                    cfg.superclass_scale * shared[i] + cfg.part_scale * part + cfg.class_scale * own[i]
                })
                .collect()
        })
        .collect();

    let total = cfg.num_classes * cfg.samples_per_class;
    let mut labels = Vec::with_capacity(total);
    let mut pixels = Vec::with_capacity(total * len);
    for (c, proto) in prototypes.iter().enumerate() {
        let mut noise = rng::seeded(derive_seed(seed, &format!("{variant}-noise"), c as u64));
        for _ in 0..cfg.samples_per_class {
            labels.push(c as u8);
            pixels.extend(proto.iter().map(|&p| {
                let e: f64 = StandardNormal.sample(&mut noise);
                quantize(p + cfg.noise_scale * e)
            }));
        }
    }
    let shape = InputShape {
        channels: cfg.channels,
        height: cfg.height,
        width: cfg.width,
    };
    Dataset::new(shape, cfg.num_classes, labels, pixels)
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC)
        .u32(VERSION)
        .u32(ds.len() as u32)
        .u32(ds.height as u32)
        .u32(ds.width as u32)
        .u32(ds.channels as u32)
        .u32(ds.num_classes as u32);
    for i in 0..ds.len() {
        w.u8(ds.labels[i]).bytes(ds.sample(i));
    }
    w.finish()
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_atomic(path, &encode_dataset(ds))
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut r = Reader::new(bytes, path);
    r.expect_magic(MAGIC)?;
    r.expect_version(VERSION)?;
    let count = r.u32()? as usize;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let channels = r.u32()? as usize;
    let num_classes = r.u32()? as usize;
    let sample_len = height * width * channels;
    if sample_len == 0 {
        return Err(r.err("zero image dimension"));
    }
    if count.saturating_mul(sample_len + 1) > bytes.len() {
        return Err(r.err(format!("truncated: header declares {count} samples")));
    }
    let mut labels = Vec::with_capacity(count);
    let mut pixels = Vec::with_capacity(count * sample_len);
    for _ in 0..count {
        let label = r.u8()?;
        if usize::from(label) >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: label.into(),
                num_classes,
            });
        }
        labels.push(label);
        pixels.extend_from_slice(r.take(sample_len)?);
    }
    r.finish()?;
    let shape = InputShape {
        channels,
        height,
        width,
    };
    Dataset::new(shape, num_classes, labels, pixels)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    decode_dataset(&bytes, path)
}
