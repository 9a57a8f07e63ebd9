//! Generation and ingestion of the evaluation datasets and their on-disk
//! formats.
//!
//! Dataset CSV: one sample per row, `p1,...,p(d1*d2),label`, pixels row-major
//! as decimal reals, label last; lines starting with `#` are comments.
//! Loader-angle sidecar: a JSON array with one entry per sample, either
//! `null` or `[row_angles, col_angles]` in radians.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::layers::{loader_amplitudes, qdl_loader_angles};
use crate::{Error, Real, Result};

/// One labeled image; label 0 = stripes (rows), label 1 = bars (columns).
/// Samples generated by perturbing loader angles carry those angles for
/// exact-encoding replay.
#[derive(Clone, Debug)]
pub struct Sample<T: Real> {
    pub pixels: Array2<T>,
    pub label: u8,
    pub qdl_angles: Option<[Vec<T>; 2]>,
}

/// Disjoint train/test partition and the shuffle seed that produced it.
#[derive(Clone, Debug)]
pub struct DatasetSplit<T: Real> {
    pub train: Vec<Sample<T>>,
    pub test: Vec<Sample<T>>,
    pub seed: u64,
}

impl<T: Real> DatasetSplit<T> {
    pub fn class_counts(samples: &[Sample<T>]) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in samples {
            counts[s.label as usize] += 1;
        }
        counts
    }
}

/// Uniformly random non-empty, non-full subset of `d` lines as a bitmask.
fn random_pattern(d: usize, rng: &mut impl Rng) -> u32 {
    // Values 1 ..= 2^d - 2 are exactly the non-empty, non-full subsets.
    rng.gen_range(1..=(1u32 << d) - 2)
}

/// Plain bars-and-stripes samples: a random subset of rows (stripes, label 0)
/// or columns (bars, label 1) is set to 1, the rest to 0. Classes are
/// balanced to within one sample and the order is shuffled.
pub fn gen_bas<T: Real>(d1: usize, d2: usize, n: usize, seed: u64) -> Vec<Sample<T>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_stripes = n / 2 + n % 2;
    let mut samples: Vec<Sample<T>> = (0..n)
        .map(|i| {
            let label = u8::from(i >= n_stripes);
            let d = if label == 0 { d1 } else { d2 };
            let mask = random_pattern(d, &mut rng);
            let pixels = Array2::from_shape_fn((d1, d2), |(r, c)| {
                let line = if label == 0 { r } else { c };
                if mask >> line & 1 == 1 {
                    T::one()
                } else {
                    T::zero()
                }
            });
            Sample {
                pixels,
                label,
                qdl_angles: None,
            }
        })
        .collect();
    samples.shuffle(&mut rng);
    samples
}

/// The noisy-loader variant of the 4x4 bars-and-stripes set: start from a
/// plain pattern, derive its exact per-register loader angles, perturb each
/// angle with independent Gaussian noise of standard deviation `sigma`, and
/// store both the perturbed angles and the resulting rank-1 image (outer
/// product of the two registers' single-photon distributions, rescaled so
/// the brightest pixel is 1).
pub fn gen_custom_bas<T: Real>(n: usize, sigma: f64, seed: u64) -> Result<Vec<Sample<T>>> {
    const D: usize = 4;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|_| Error::NonFinite {
        what: "noise standard deviation",
    })?;
    let n_stripes = n / 2 + n % 2;
    let mut protos: Vec<(u8, u32)> = (0..n)
        .map(|i| {
            let label = u8::from(i >= n_stripes);
            (label, random_pattern(D, &mut rng))
        })
        .collect();
    protos.shuffle(&mut rng);

    let ones = vec![T::one(); D];
    let mut samples = Vec::with_capacity(n);
    for (label, mask) in protos {
        let active: Vec<T> = (0..D)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let (row_target, col_target) = if label == 0 {
            (&active, &ones)
        } else {
            (&ones, &active)
        };
        let mut row_angles = qdl_loader_angles(row_target)?;
        let mut col_angles = qdl_loader_angles(col_target)?;
        for a in row_angles.iter_mut().chain(col_angles.iter_mut()) {
            *a = *a + T::from_f64(noise.sample(&mut rng)).unwrap();
        }
        let p_row: Vec<T> = loader_amplitudes(&row_angles)?
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        let p_col: Vec<T> = loader_amplitudes(&col_angles)?
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        let mut pixels = Array2::from_shape_fn((D, D), |(i, j)| p_row[i] * p_col[j]);
        let max = pixels.iter().copied().fold(T::zero(), T::max);
        pixels.mapv_inplace(|p| p / max);
        samples.push(Sample {
            pixels,
            label,
            qdl_angles: Some([row_angles, col_angles]),
        });
    }
    Ok(samples)
}

/// Load the 8x8 digits CSV (65 columns: 64 pixels row-major in `[0, 16]`,
/// then the digit), keep the two configured digits and map them to labels
/// 0/1. One non-comment header line is tolerated.
pub fn load_mnist8<T: Real>(path: &Path, digit_pair: (u8, u8)) -> Result<Vec<Sample<T>>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_mnist8(&content, digit_pair)
}

fn parse_mnist8<T: Real>(content: &str, digit_pair: (u8, u8)) -> Result<Vec<Sample<T>>> {
    let mut samples = Vec::new();
    let mut counts = [0usize; 2];
    let mut saw_data = false;
    for (line_no, raw) in content.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.trim().parse().ok()).collect();
        let Some(values) = parsed else {
            if !saw_data {
                // Column-name header.
                continue;
            }
            return Err(Error::Data {
                line: Some(line_no),
                message: "non-numeric field".into(),
            });
        };
        saw_data = true;
        if values.len() != 65 {
            return Err(Error::Data {
                line: Some(line_no),
                message: format!("expected 65 columns, found {}", values.len()),
            });
        }
        let digit = values[64];
        if digit.fract() != 0.0 || !(0.0..=9.0).contains(&digit) {
            return Err(Error::Data {
                line: Some(line_no),
                message: format!("label {digit} is not a digit"),
            });
        }
        let digit = digit as u8;
        if digit != digit_pair.0 && digit != digit_pair.1 {
            continue;
        }
        if values[..64].iter().any(|&v| !(0.0..=16.0).contains(&v)) {
            return Err(Error::Data {
                line: Some(line_no),
                message: "pixel outside [0, 16]".into(),
            });
        }
        if values[..64].iter().all(|&v| v == 0.0) {
            return Err(Error::Data {
                line: Some(line_no),
                message: "all-zero image cannot be amplitude-encoded".into(),
            });
        }
        let pixels = Array2::from_shape_fn((8, 8), |(i, j)| {
            T::from_f64(values[i * 8 + j] / 16.0).unwrap()
        });
        let label = u8::from(digit == digit_pair.1);
        counts[label as usize] += 1;
        samples.push(Sample {
            pixels,
            label,
            qdl_angles: None,
        });
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::Data {
            line: None,
            message: format!(
                "digit pair ({}, {}) not present in file (counts {counts:?})",
                digit_pair.0, digit_pair.1
            ),
        });
    }
    Ok(samples)
}

/// Shuffle with the given seed and take disjoint train/test prefixes.
pub fn split<T: Real>(
    samples: &[Sample<T>],
    train_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    if train_n + test_n > samples.len() {
        return Err(Error::InsufficientSamples {
            need: train_n + test_n,
            have: samples.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let train = order[..train_n]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    let test = order[train_n..train_n + test_n]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    Ok(DatasetSplit { train, test, seed })
}

/// Write samples in the dataset CSV format.
pub fn save_csv<T: Real>(samples: &[Sample<T>], path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(first) = samples.first() {
        let (d1, d2) = first.pixels.dim();
        let _ = writeln!(out, "# pixels row-major {d1}x{d2}, label last");
    }
    for s in samples {
        for p in s.pixels.iter() {
            let _ = write!(out, "{},", p.to_f64().unwrap());
        }
        let _ = writeln!(out, "{}", s.label);
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Read samples back from the dataset CSV format.
pub fn load_csv<T: Real>(path: &Path, d1: usize, d2: usize) -> Result<Vec<Sample<T>>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut samples = Vec::new();
    for (line_no, raw) in content.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d1 * d2 + 1 {
            return Err(Error::Data {
                line: Some(line_no),
                message: format!("expected {} columns, found {}", d1 * d2 + 1, fields.len()),
            });
        }
        let mut pixels = Array2::zeros((d1, d2));
        for (i, f) in fields[..d1 * d2].iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| Error::Data {
                line: Some(line_no),
                message: format!("bad pixel value {f:?}"),
            })?;
            pixels[(i / d2, i % d2)] = T::from_f64(v).unwrap();
        }
        let label: u8 = fields[d1 * d2].trim().parse().map_err(|_| Error::Data {
            line: Some(line_no),
            message: format!("bad label {:?}", fields[d1 * d2]),
        })?;
        if label > 1 {
            return Err(Error::Data {
                line: Some(line_no),
                message: format!("label {label} is not binary"),
            });
        }
        samples.push(Sample {
            pixels,
            label,
            qdl_angles: None,
        });
    }
    Ok(samples)
}

/// Write the loader-angle sidecar.
pub fn save_angles_json<T: Real>(samples: &[Sample<T>], path: &Path) -> Result<()> {
    let rows: Vec<Option<Vec<Vec<f64>>>> = samples
        .iter()
        .map(|s| {
            s.qdl_angles.as_ref().map(|[r, c]| {
                vec![
                    r.iter().map(|a| a.to_f64().unwrap()).collect(),
                    c.iter().map(|a| a.to_f64().unwrap()).collect(),
                ]
            })
        })
        .collect();
    let json = serde_json::to_string_pretty(&rows).expect("angle serialization");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Read the loader-angle sidecar and attach it to samples by position.
pub fn attach_angles_json<T: Real>(samples: &mut [Sample<T>], path: &Path) -> Result<()> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let rows: Vec<Option<Vec<Vec<f64>>>> =
        serde_json::from_str(&content).map_err(|e| Error::Data {
            line: None,
            message: format!("bad angle sidecar: {e}"),
        })?;
    if rows.len() != samples.len() {
        return Err(Error::Data {
            line: None,
            message: format!(
                "sidecar has {} entries for {} samples",
                rows.len(),
                samples.len()
            ),
        });
    }
    for (s, row) in samples.iter_mut().zip(rows) {
        s.qdl_angles = match row {
            Some(regs) if regs.len() == 2 => Some([
                regs[0].iter().map(|&a| T::from_f64(a).unwrap()).collect(),
                regs[1].iter().map(|&a| T::from_f64(a).unwrap()).collect(),
            ]),
            Some(_) => {
                return Err(Error::Data {
                    line: None,
                    message: "sidecar entry must hold two registers".into(),
                })
            }
            None => None,
        };
    }
    Ok(())
}
