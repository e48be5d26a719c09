//! MNIST Sum: learn a shared digit classifier from pair-sum supervision
//! only, with gradients flowing through the reasoner's query distribution.

use super::digits::{gen_synthetic_digits, parse_idx, IdxData, LabeledDigit, DIGIT_PIXELS};
use super::{Metrics, TaskConfig, TaskError};
use std::path::Path;
use crate::logic::{parse_source, validate, ValidatedProgram, Value};
use crate::neural::{LayerSpec, Network, Optimizer, OptimizerKind, Tensor};
use crate::provenance::SemiringSpec;
use crate::reasoner::{seed_facts, QueryAnswer};
use std::collections::HashMap;
use std::time::Instant;

pub const MNIST_SUM_PROGRAM: &str = "\
rel d1(int).
rel d2(int).
rel sum2(int).
sum2(C) :- d1(A), d2(B), C == A + B.
nn(digit_a, 0)::d1(0); nn(digit_a, 1)::d1(1); nn(digit_a, 2)::d1(2); nn(digit_a, 3)::d1(3); nn(digit_a, 4)::d1(4); nn(digit_a, 5)::d1(5); nn(digit_a, 6)::d1(6); nn(digit_a, 7)::d1(7); nn(digit_a, 8)::d1(8); nn(digit_a, 9)::d1(9).
nn(digit_b, 0)::d2(0); nn(digit_b, 1)::d2(1); nn(digit_b, 2)::d2(2); nn(digit_b, 3)::d2(3); nn(digit_b, 4)::d2(4); nn(digit_b, 5)::d2(5); nn(digit_b, 6)::d2(6); nn(digit_b, 7)::d2(7); nn(digit_b, 8)::d2(8); nn(digit_b, 9)::d2(9).
query sum2(S).
";

pub struct MnistPair {
    pub image_a: Tensor<f64>,
    pub image_b: Tensor<f64>,
    pub sum_label: u8,
    /// Eval-only ground truth; never used in the training loss.
    pub hidden_digits: (u8, u8),
}

pub fn gen_pairs(seed: u64, count: usize) -> Vec<MnistPair> {
    let digits: Vec<LabeledDigit> = gen_synthetic_digits(seed, count * 2);
    digits
        .chunks_exact(2)
        .map(|pair| MnistPair {
            image_a: pair[0].image.clone(),
            image_b: pair[1].image.clone(),
            sum_label: pair[0].label + pair[1].label,
            hidden_digits: (pair[0].label, pair[1].label),
        })
        .collect()
}

/// Load consecutive-image pairs from `{prefix}-images.idx` and
/// `{prefix}-labels.idx` under `dir` (classic IDX containers).
pub fn pairs_from_idx(dir: &Path, prefix: &str) -> Result<Vec<MnistPair>, TaskError> {
    let images = match parse_idx(&std::fs::read(dir.join(format!("{prefix}-images.idx")))?)? {
        IdxData::Images(v) => v,
        IdxData::Labels(_) => return Err(TaskError::Config("expected an image IDX file".into())),
    };
    let labels = match parse_idx(&std::fs::read(dir.join(format!("{prefix}-labels.idx")))?)? {
        IdxData::Labels(v) => v,
        IdxData::Images(_) => return Err(TaskError::Config("expected a label IDX file".into())),
    };
    if images.len() != labels.len() {
        return Err(TaskError::Config(format!(
            "IDX image/label counts differ: {} vs {}",
            images.len(),
            labels.len()
        )));
    }
    Ok(images
        .chunks_exact(2)
        .zip(labels.chunks_exact(2))
        .map(|(imgs, labs)| MnistPair {
            image_a: imgs[0].clone(),
            image_b: imgs[1].clone(),
            sum_label: labs[0] + labs[1],
            hidden_digits: (labs[0], labs[1]),
        })
        .collect())
}

fn load_pairs(config: &TaskConfig, prefix: &str, seed: u64, count: usize) -> Result<Vec<MnistPair>, TaskError> {
    match &config.data_dir {
        Some(dir) => pairs_from_idx(dir, prefix),
        None => Ok(gen_pairs(seed, count)),
    }
}

pub fn digit_network(seed: u64) -> Network<f64> {
    Network::new(
        "digit",
        vec![
            LayerSpec::Linear { input: DIGIT_PIXELS, output: 64 },
            LayerSpec::ReLU,
            LayerSpec::Linear { input: 64, output: 10 },
            LayerSpec::Softmax,
        ],
        seed,
    )
}

/// Probabilities of each sum 0..=18 for a pair of digit distributions, via
/// the reasoner. Sorted by sum value.
pub fn sum_distribution(
    vp: &ValidatedProgram,
    semiring: SemiringSpec,
    pa: &[f64],
    pb: &[f64],
) -> Result<Vec<QueryAnswer>, TaskError> {
    let outs: HashMap<String, Vec<f64>> =
        [("digit_a".to_string(), pa.to_vec()), ("digit_b".to_string(), pb.to_vec())].into();
    let mut ctx = seed_facts(vp, semiring, &outs)?;
    ctx.evaluate()?;
    Ok(ctx.query("sum2")?)
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).map(|(i, _)| i).unwrap_or(0)
}

/// Train the shared digit head from sum labels only.
pub fn train_mnist_sum(config: &TaskConfig) -> Result<(Network<f64>, Metrics), TaskError> {
    config.validate()?;
    let program = parse_source(MNIST_SUM_PROGRAM)?;
    let vp = validate(&program)?;
    let semiring = SemiringSpec::TopKProofsGrad(config.top_k);

    let train = load_pairs(config, "train", config.seed, config.train_count)?;

    let mut net = digit_network(config.seed);
    let mut opt = Optimizer::new(OptimizerKind::adam(config.learning_rate));

    let train_start = Instant::now();
    let mut samples_seen = 0u64;
    for _ in 0..config.epochs {
        for batch in train.chunks(config.batch_size) {
            for pair in batch {
                samples_seen += 1;
                let (pa, ca) = net.forward_cached(&pair.image_a.data)?;
                let (pb, cb) = net.forward_cached(&pair.image_b.data)?;
                let answers = sum_distribution(&vp, semiring, &pa, &pb)?;
                let z: f64 = answers.iter().map(|a| a.prob).sum();
                let target = pair.sum_label as i64;
                let p_target = answers
                    .iter()
                    .find(|a| a.tuple == vec![Value::Int(target)])
                    .map(|a| a.prob)
                    .unwrap_or(0.0);
                // loss = −ln(p_t / Z); d/dp_s = 1/Z − δ_st/p_t.
                let mut ga = vec![0.0; 10];
                let mut gb = vec![0.0; 10];
                for ans in &answers {
                    let is_target = ans.tuple == vec![Value::Int(target)];
                    let dl = 1.0 / z - if is_target { 1.0 / p_target.max(1e-12) } else { 0.0 };
                    if let Some(grad) = &ans.grad {
                        for (fid, g) in &grad.grad {
                            // Group 0 is digit_a, group 1 digit_b; member
                            // index equals the softmax slot by construction.
                            match fid.group {
                                0 => ga[fid.member] += dl * g,
                                _ => gb[fid.member] += dl * g,
                            }
                        }
                    }
                }
                net.backward_cached(&ca, &ga)?;
                net.backward_cached(&cb, &gb)?;
            }
            opt.step(&mut net);
            net.zero_grads();
        }
    }
    let train_ms = train_start.elapsed().as_secs_f64() * 1000.0 / samples_seen.max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("train_ms_per_sample".into(), train_ms);
    Ok((net, metrics))
}

/// Evaluate a digit head on fresh pairs: per-digit and reasoner-sum accuracy.
pub fn eval_mnist_sum(net: &Network<f64>, config: &TaskConfig) -> Result<Metrics, TaskError> {
    config.validate()?;
    let program = parse_source(MNIST_SUM_PROGRAM)?;
    let vp = validate(&program)?;
    let semiring = SemiringSpec::TopKProofsGrad(config.top_k);
    let test = load_pairs(config, "test", config.seed.wrapping_add(1), config.test_count)?;

    let test_start = Instant::now();
    let mut sum_correct = 0usize;
    let mut digit_correct = 0usize;
    for pair in &test {
        let (pa, _) = net.forward_cached(&pair.image_a.data)?;
        let (pb, _) = net.forward_cached(&pair.image_b.data)?;
        if argmax(&pa) == pair.hidden_digits.0 as usize {
            digit_correct += 1;
        }
        if argmax(&pb) == pair.hidden_digits.1 as usize {
            digit_correct += 1;
        }
        let answers = sum_distribution(&vp, semiring, &pa, &pb)?;
        let best = answers
            .iter()
            .max_by(|a, b| a.prob.partial_cmp(&b.prob).unwrap())
            .map(|a| a.tuple[0].clone());
        if best == Some(Value::Int(pair.sum_label as i64)) {
            sum_correct += 1;
        }
    }
    let test_ms = test_start.elapsed().as_secs_f64() * 1000.0 / test.len().max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("sum_accuracy".into(), sum_correct as f64 / test.len() as f64);
    metrics.insert("digit_accuracy".into(), digit_correct as f64 / (2 * test.len()) as f64);
    metrics.insert("test_ms_per_sample".into(), test_ms);
    Ok(metrics)
}

/// Train the shared digit head from sum labels and report accuracies.
pub fn run_mnist_sum(config: &TaskConfig) -> Result<Metrics, TaskError> {
    let (net, mut metrics) = train_mnist_sum(config)?;
    metrics.extend(eval_mnist_sum(&net, config)?);
    Ok(metrics)
}
