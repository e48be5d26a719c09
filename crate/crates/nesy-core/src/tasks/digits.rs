//! Digit image sources: an offline synthetic generator and an IDX reader
//! for real MNIST files.

use super::TaskError;
use crate::neural::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIGIT_SIDE: usize = 28;
pub const DIGIT_PIXELS: usize = DIGIT_SIDE * DIGIT_SIDE;

/// A labeled 28×28 grayscale image in [0,1].
#[derive(Debug, Clone)]
pub struct LabeledDigit {
    pub image: Tensor<f64>,
    pub label: u8,
}

fn class_template(class: u8) -> Vec<f64> {
    // Each class gets a fixed pseudo-random blob pattern; distinct enough
    // that a small MLP separates them with direct supervision.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0000 + class as u64);
    let mut img = vec![0.0; DIGIT_PIXELS];
    for _ in 0..6 {
        let cx = rng.gen_range(5.0..23.0);
        let cy = rng.gen_range(5.0..23.0);
        let r = rng.gen_range(2.5..5.0);
        for y in 0..DIGIT_SIDE {
            for x in 0..DIGIT_SIDE {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d < r {
                    img[y * DIGIT_SIDE + x] = (img[y * DIGIT_SIDE + x] + 1.0 - d / r).min(1.0);
                }
            }
        }
    }
    img
}

/// Deterministic labeled digits: 10 template classes plus additive noise,
/// class counts balanced to within one.
pub fn gen_synthetic_digits(seed: u64, count: usize) -> Vec<LabeledDigit> {
    let templates: Vec<Vec<f64>> = (0..10).map(|c| class_template(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let label = (i % 10) as u8;
        let mut img = templates[label as usize].clone();
        for v in &mut img {
            *v = (*v + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0);
        }
        out.push(LabeledDigit { image: Tensor::from_vec(vec![DIGIT_SIDE, DIGIT_SIDE], img).unwrap(), label });
    }
    out.shuffle(&mut rng);
    out
}

/// Serialize images to the IDX u8 container (magic 0x803, big-endian
/// dimensions), quantizing [0,1] pixels to 0..=255.
pub fn write_idx_images(images: &[Tensor<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * DIGIT_PIXELS);
    out.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(DIGIT_SIDE as u32).to_be_bytes());
    out.extend_from_slice(&(DIGIT_SIDE as u32).to_be_bytes());
    for img in images {
        out.extend(img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

/// Serialize labels to the IDX u8 container (magic 0x801).
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_be_u32(bytes: &[u8], at: usize) -> Result<u32, TaskError> {
    let slice = bytes
        .get(at..at + 4)
        .ok_or(TaskError::TruncatedPayload { need: at + 4, have: bytes.len() })?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

/// Parsed IDX container: either an image batch or a label vector.
#[derive(Debug, Clone)]
pub enum IdxData {
    Images(Vec<Tensor<f64>>),
    Labels(Vec<u8>),
}

/// Parse the classic big-endian IDX container (magic 0x803 for u8 image
/// stacks, 0x801 for u8 label vectors). Pixels are normalized to [0,1].
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData, TaskError> {
    let magic = read_be_u32(bytes, 0)?;
    match magic {
        0x0000_0803 => {
            let n = read_be_u32(bytes, 4)? as usize;
            let rows = read_be_u32(bytes, 8)? as usize;
            let cols = read_be_u32(bytes, 12)? as usize;
            let need = 16 + n * rows * cols;
            if bytes.len() < need {
                return Err(TaskError::TruncatedPayload { need, have: bytes.len() });
            }
            let mut images = Vec::with_capacity(n);
            for i in 0..n {
                let start = 16 + i * rows * cols;
                let data: Vec<f64> =
                    bytes[start..start + rows * cols].iter().map(|&b| b as f64 / 255.0).collect();
                images.push(Tensor::from_vec(vec![rows, cols], data).unwrap());
            }
            Ok(IdxData::Images(images))
        }
        0x0000_0801 => {
            let n = read_be_u32(bytes, 4)? as usize;
            let need = 8 + n;
            if bytes.len() < need {
                return Err(TaskError::TruncatedPayload { need, have: bytes.len() });
            }
            Ok(IdxData::Labels(bytes[8..8 + n].to_vec()))
        }
        other => Err(TaskError::BadMagic(other)),
    }
}
