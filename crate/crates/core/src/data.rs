//! Datasets: synthetic 2D benchmarks, IDX-format image loading, and
//! deterministic splitting.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Normal;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_MOONS_NOISE: f64 = 0.1;
pub const DEFAULT_CIRCLES_NOISE: f64 = 0.05;
pub const DEFAULT_CIRCLES_FACTOR: f64 = 0.5;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("sample count {0} must be even and at least 2")]
    BadCount(usize),
    #[error("circle factor {0} outside (0, 1)")]
    BadFactor(f64),
    #[error("split fractions {0:?} must lie in [0,1] and sum to 1")]
    BadFractions((f64, f64, f64)),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {got:#010x} at byte 0, expected {expected}")]
    BadMagic {
        path: String,
        got: u32,
        expected: u32,
    },
    #[error("{path}: unsupported image dimensions {rows}x{cols} at byte 8")]
    BadDims { path: String, rows: u32, cols: u32 },
    #[error("{path}: file truncated, needed {needed} bytes from offset {offset}")]
    Truncated {
        path: String,
        offset: usize,
        needed: usize,
    },
    #[error("{images} holds {image_count} images but {labels} holds {label_count} labels")]
    CountMismatch {
        images: String,
        labels: String,
        image_count: usize,
        label_count: usize,
    },
}

/// One training example: a feature vector and a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Split fractions (train, validate, test) and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
}

/// Two isotropic unit-variance Gaussian clusters around centers drawn
/// uniformly from [-10, 10]^2, n/2 points per class.
pub fn make_blobs(n: usize, seed: u64) -> Result<Vec<LabeledExample>, DataError> {
    check_even(n)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let centers: Vec<(f64, f64)> = (0..2)
        .map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
        .collect();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::with_capacity(n);
    for (label, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..n / 2 {
            out.push(LabeledExample {
                features: vec![cx + rng.sample(unit), cy + rng.sample(unit)],
                label: label as u8,
            });
        }
    }
    Ok(out)
}

/// Two interleaved half-circles: class 0 on `(cos t, sin t)`, class 1 on
/// `(1 - cos t, 1 - sin t - 1/2)`, t on a uniform grid over [0, pi], plus
/// Gaussian coordinate noise.
pub fn make_moons(n: usize, noise_std: f64, seed: u64) -> Result<Vec<LabeledExample>, DataError> {
    check_even(n)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = noise_dist(noise_std);
    let half = n / 2;
    let t = |i: usize| {
        if half == 1 {
            0.0
        } else {
            std::f64::consts::PI * i as f64 / (half - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..half {
        out.push(LabeledExample {
            features: vec![
                t(i).cos() + sample(&noise, &mut rng),
                t(i).sin() + sample(&noise, &mut rng),
            ],
            label: 0,
        });
    }
    for i in 0..half {
        out.push(LabeledExample {
            features: vec![
                1.0 - t(i).cos() + sample(&noise, &mut rng),
                1.0 - t(i).sin() - 0.5 + sample(&noise, &mut rng),
            ],
            label: 1,
        });
    }
    Ok(out)
}

/// Two concentric circles: class 0 at radius 1, class 1 at the given factor,
/// angles on a uniform grid, plus Gaussian coordinate noise.
pub fn make_circles(
    n: usize,
    factor: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<LabeledExample>, DataError> {
    check_even(n)?;
    if !(factor > 0.0 && factor < 1.0) {
        return Err(DataError::BadFactor(factor));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = noise_dist(noise_std);
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    for (label, radius) in [(0u8, 1.0), (1u8, factor)] {
        for i in 0..half {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / half as f64;
            out.push(LabeledExample {
                features: vec![
                    radius * angle.cos() + sample(&noise, &mut rng),
                    radius * angle.sin() + sample(&noise, &mut rng),
                ],
                label,
            });
        }
    }
    Ok(out)
}

fn check_even(n: usize) -> Result<(), DataError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(DataError::BadCount(n));
    }
    Ok(())
}

fn noise_dist(std: f64) -> Option<Normal<f64>> {
    (std > 0.0).then(|| Normal::new(0.0, std).unwrap())
}

fn sample(noise: &Option<Normal<f64>>, rng: &mut ChaCha12Rng) -> f64 {
    noise.map_or(0.0, |n| rng.sample(n))
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32, DataError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Truncated {
            path: path.into(),
            offset,
            needed: 4,
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load 28x28 grayscale images and labels from a big-endian IDX file pair.
/// Pixels are scaled to [0, 1]; labels keep their 0-9 values.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
) -> Result<Vec<LabeledExample>, DataError> {
    let images_name = images_path.display().to_string();
    let labels_name = labels_path.display().to_string();
    let image_bytes = fs::read(images_path).map_err(|source| DataError::Io {
        path: images_name.clone(),
        source,
    })?;
    let label_bytes = fs::read(labels_path).map_err(|source| DataError::Io {
        path: labels_name.clone(),
        source,
    })?;

    let magic = read_be_u32(&image_bytes, 0, &images_name)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            path: images_name,
            got: magic,
            expected: IMAGE_MAGIC,
        });
    }
    let image_count = read_be_u32(&image_bytes, 4, &images_name)? as usize;
    let rows = read_be_u32(&image_bytes, 8, &images_name)?;
    let cols = read_be_u32(&image_bytes, 12, &images_name)?;
    if rows != 28 || cols != 28 {
        return Err(DataError::BadDims {
            path: images_name,
            rows,
            cols,
        });
    }
    let pixels = &image_bytes[16..];
    let needed = image_count * 784;
    if pixels.len() < needed {
        return Err(DataError::Truncated {
            path: images_name,
            offset: 16 + pixels.len(),
            needed: needed - pixels.len(),
        });
    }

    let magic = read_be_u32(&label_bytes, 0, &labels_name)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: labels_name,
            got: magic,
            expected: LABEL_MAGIC,
        });
    }
    let label_count = read_be_u32(&label_bytes, 4, &labels_name)? as usize;
    let labels = &label_bytes[8..];
    if labels.len() < label_count {
        return Err(DataError::Truncated {
            path: labels_name,
            offset: 8 + labels.len(),
            needed: label_count - labels.len(),
        });
    }
    if image_count != label_count {
        return Err(DataError::CountMismatch {
            images: images_name,
            labels: labels_name,
            image_count,
            label_count,
        });
    }

    Ok((0..image_count)
        .map(|i| LabeledExample {
            features: pixels[i * 784..(i + 1) * 784]
                .iter()
                .map(|&b| b as f64 / 255.0)
                .collect(),
            label: labels[i],
        })
        .collect())
}

/// Keep only labels 0 and 1 and zero-pad 784-pixel features to 1024.
pub fn filter_binary_and_pad(examples: Vec<LabeledExample>) -> Vec<LabeledExample> {
    examples
        .into_iter()
        .filter(|ex| ex.label <= 1)
        .map(|mut ex| {
            ex.features.resize(1024, 0.0);
            ex
        })
        .collect()
}

/// (train, validate, test) partition of a dataset.
pub type SplitSets = (
    Vec<LabeledExample>,
    Vec<LabeledExample>,
    Vec<LabeledExample>,
);

/// Seeded shuffle followed by a contiguous partition. Sizes of the validate
/// and test parts are floor-rounded; the remainder goes to train.
pub fn split(mut examples: Vec<LabeledExample>, spec: &SplitSpec) -> Result<SplitSets, DataError> {
    let (f_train, f_val, f_test) = spec.fractions;
    let in_range = |f: f64| (0.0..=1.0).contains(&f);
    if !in_range(f_train)
        || !in_range(f_val)
        || !in_range(f_test)
        || (f_train + f_val + f_test - 1.0).abs() > 1e-9
    {
        return Err(DataError::BadFractions(spec.fractions));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    examples.shuffle(&mut rng);
    let n = examples.len();
    let n_val = (f_val * n as f64).floor() as usize;
    let n_test = (f_test * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut rest = examples.split_off(n_train);
    let test = rest.split_off(n_val);
    Ok((examples, rest, test))
}

/// Write a 2D dataset as CSV with header `x1,x2,label`.
pub fn write_dataset_csv(path: &Path, examples: &[LabeledExample]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "x1,x2,label")?;
    for ex in examples {
        writeln!(file, "{},{},{}", ex.features[0], ex.features[1], ex.label)?;
    }
    file.into_inner()?.sync_all()
}
