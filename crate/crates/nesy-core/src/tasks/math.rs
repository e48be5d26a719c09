//! Math equation inference: four small nets score list properties and a
//! pairwise relation; the global label is their product composition.

use super::{bernoulli_nll, Metrics, TaskConfig, TaskError};
use crate::neural::{ForwardCache, LayerSpec, Network, Optimizer, OptimizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

pub const LIST_LEN: usize = 6;

#[derive(Debug, Clone)]
pub struct MathSample {
    pub l1: [f64; LIST_LEN],
    pub l2: [f64; LIST_LEN],
    /// 1 or 2: which property applies to each list.
    pub prop_a_id: u8,
    pub prop_b_id: u8,
    /// 1 or 2: which relation applies to the pair.
    pub rel_id: u8,
    pub label: bool,
}

pub fn prop_holds(id: u8, xs: &[f64; LIST_LEN]) -> bool {
    match id {
        1 => xs.iter().sum::<f64>() > 0.0,
        _ => xs.iter().map(|x| x.abs()).sum::<f64>() > 0.5,
    }
}

pub fn rel_holds(id: u8, l1: &[f64; LIST_LEN], l2: &[f64; LIST_LEN]) -> bool {
    match id {
        1 => (l1[0] > 0.0) == (l2[0] > 0.0),
        _ => (l1[LIST_LEN - 1] > 0.0) != (l2[LIST_LEN - 1] > 0.0),
    }
}

pub fn gen_math(seed: u64, count: usize) -> Vec<MathSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut l1 = [0.0; LIST_LEN];
            let mut l2 = [0.0; LIST_LEN];
            for v in l1.iter_mut().chain(l2.iter_mut()) {
                *v = rng.gen_range(-1.0..1.0);
            }
            let prop_a_id = rng.gen_range(1..=2u8);
            let prop_b_id = rng.gen_range(1..=2u8);
            let rel_id = rng.gen_range(1..=2u8);
            let label =
                prop_holds(prop_a_id, &l1) && rel_holds(rel_id, &l1, &l2) && prop_holds(prop_b_id, &l2);
            MathSample { l1, l2, prop_a_id, prop_b_id, rel_id, label }
        })
        .collect()
}

pub struct MathNets {
    pub prop1: Network<f64>,
    pub prop2: Network<f64>,
    pub rel1: Network<f64>,
    pub rel2: Network<f64>,
}

impl MathNets {
    pub fn new(seed: u64) -> Self {
        let mlp = |name: &str, input: usize, salt: u64| {
            Network::new(
                name,
                vec![
                    LayerSpec::Linear { input, output: 16 },
                    LayerSpec::ReLU,
                    LayerSpec::Linear { input: 16, output: 2 },
                    LayerSpec::Softmax,
                ],
                seed.wrapping_add(salt),
            )
        };
        MathNets {
            prop1: mlp("prop1", LIST_LEN, 11),
            prop2: mlp("prop2", LIST_LEN, 22),
            rel1: mlp("rel1", 2 * LIST_LEN, 33),
            rel2: mlp("rel2", 2 * LIST_LEN, 44),
        }
    }

    fn prop(&self, id: u8) -> &Network<f64> {
        if id == 1 {
            &self.prop1
        } else {
            &self.prop2
        }
    }

    fn rel(&self, id: u8) -> &Network<f64> {
        if id == 1 {
            &self.rel1
        } else {
            &self.rel2
        }
    }

    fn prop_mut(&mut self, id: u8) -> &mut Network<f64> {
        if id == 1 {
            &mut self.prop1
        } else {
            &mut self.prop2
        }
    }

    fn rel_mut(&mut self, id: u8) -> &mut Network<f64> {
        if id == 1 {
            &mut self.rel1
        } else {
            &mut self.rel2
        }
    }
}

struct Pass {
    pa: f64,
    pr: f64,
    pb: f64,
    ca: ForwardCache<f64>,
    cr: ForwardCache<f64>,
    cb: ForwardCache<f64>,
}

fn forward(nets: &MathNets, s: &MathSample) -> Result<Pass, TaskError> {
    let (oa, ca) = nets.prop(s.prop_a_id).forward_cached(&s.l1)?;
    let (ob, cb) = nets.prop(s.prop_b_id).forward_cached(&s.l2)?;
    let joint: Vec<f64> = s.l1.iter().chain(&s.l2).copied().collect();
    let (or, cr) = nets.rel(s.rel_id).forward_cached(&joint)?;
    Ok(Pass { pa: oa[1], pr: or[1], pb: ob[1], ca, cr, cb })
}

/// Train all four heads from the global label through the product score.
pub fn train_math_inference(config: &TaskConfig) -> Result<(MathNets, Metrics), TaskError> {
    config.validate()?;
    let train = gen_math(config.seed, config.train_count);

    let mut nets = MathNets::new(config.seed);
    let mut opts: Vec<Optimizer<f64>> =
        (0..4).map(|_| Optimizer::new(OptimizerKind::adam(config.learning_rate))).collect();

    let train_start = Instant::now();
    let mut seen = 0u64;
    for _ in 0..config.epochs {
        for batch in train.chunks(config.batch_size) {
            for s in batch {
                seen += 1;
                let pass = forward(&nets, s)?;
                // Composite inference(P_a * R * P_b) with product semantics.
                let score = pass.pa * pass.pr * pass.pb;
                let (_, dl) = bernoulli_nll(score, s.label);
                let ga = dl * pass.pr * pass.pb;
                let gr = dl * pass.pa * pass.pb;
                let gb = dl * pass.pa * pass.pr;
                nets.prop_mut(s.prop_a_id).backward_cached(&pass.ca, &[0.0, ga])?;
                nets.rel_mut(s.rel_id).backward_cached(&pass.cr, &[0.0, gr])?;
                nets.prop_mut(s.prop_b_id).backward_cached(&pass.cb, &[0.0, gb])?;
            }
            opts[0].step(&mut nets.prop1);
            opts[1].step(&mut nets.prop2);
            opts[2].step(&mut nets.rel1);
            opts[3].step(&mut nets.rel2);
            nets.prop1.zero_grads();
            nets.prop2.zero_grads();
            nets.rel1.zero_grads();
            nets.rel2.zero_grads();
        }
    }
    let train_ms = train_start.elapsed().as_secs_f64() * 1000.0 / seen.max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("train_ms_per_sample".into(), train_ms);
    Ok((nets, metrics))
}

/// Evaluate the composite score and each head against recomputed truth.
pub fn eval_math_inference(nets: &MathNets, config: &TaskConfig) -> Result<Metrics, TaskError> {
    config.validate()?;
    let test = gen_math(config.seed.wrapping_add(1), config.test_count);

    let test_start = Instant::now();
    let mut global_correct = 0usize;
    let mut prop_correct = 0usize;
    let mut rel_correct = 0usize;
    for s in &test {
        let pass = forward(nets, s)?;
        let score = pass.pa * pass.pr * pass.pb;
        if (score > 0.5) == s.label {
            global_correct += 1;
        }
        if (pass.pa > 0.5) == prop_holds(s.prop_a_id, &s.l1) {
            prop_correct += 1;
        }
        if (pass.pb > 0.5) == prop_holds(s.prop_b_id, &s.l2) {
            prop_correct += 1;
        }
        if (pass.pr > 0.5) == rel_holds(s.rel_id, &s.l1, &s.l2) {
            rel_correct += 1;
        }
    }
    let test_ms = test_start.elapsed().as_secs_f64() * 1000.0 / test.len().max(1) as f64;

    let n = test.len().max(1) as f64;
    let mut metrics = Metrics::new();
    metrics.insert("global_acc".into(), global_correct as f64 / n);
    metrics.insert("property_acc".into(), prop_correct as f64 / (2.0 * n));
    metrics.insert("relation_acc".into(), rel_correct as f64 / n);
    metrics.insert("test_ms_per_sample".into(), test_ms);
    Ok(metrics)
}

pub fn run_math_inference(config: &TaskConfig) -> Result<Metrics, TaskError> {
    let (nets, mut metrics) = train_math_inference(config)?;
    metrics.extend(eval_math_inference(&nets, config)?);
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_arithmetic() {
        let l1 = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert!(prop_holds(1, &l1));
        assert!(prop_holds(2, &l1));
        let neg = [-0.5, -0.1, -0.1, -0.1, -0.1, -0.1];
        assert!(!prop_holds(1, &neg));
    }

    #[test]
    fn relation_signs() {
        let a = [0.3, 0.0, 0.0, 0.0, 0.0, 0.4];
        let b = [-0.2, 0.0, 0.0, 0.0, 0.0, -0.4];
        assert!(!rel_holds(1, &a, &b));
        assert!(rel_holds(2, &a, &b));
        assert!(rel_holds(1, &a, &a));
        assert!(!rel_holds(2, &a, &a));
    }

    #[test]
    fn labels_recompute() {
        for s in gen_math(2, 300) {
            let truth = prop_holds(s.prop_a_id, &s.l1)
                && rel_holds(s.rel_id, &s.l1, &s.l2)
                && prop_holds(s.prop_b_id, &s.l2);
            assert_eq!(truth, s.label);
        }
    }

    #[test]
    fn generator_deterministic() {
        let a = gen_math(8, 20);
        let b = gen_math(8, 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.l1, y.l1);
            assert_eq!(x.rel_id, y.rel_id);
        }
    }

    #[test]
    fn gradient_flows_into_all_used_heads() {
        let mut nets = MathNets::new(1);
        let s = gen_math(1, 20).into_iter().find(|s| s.label).unwrap();
        let pass = forward(&nets, &s).unwrap();
        let score = pass.pa * pass.pr * pass.pb;
        let (_, dl) = bernoulli_nll(score, s.label);
        nets.prop_mut(s.prop_a_id).backward_cached(&pass.ca, &[0.0, dl * pass.pr * pass.pb]).unwrap();
        nets.rel_mut(s.rel_id).backward_cached(&pass.cr, &[0.0, dl * pass.pa * pass.pb]).unwrap();
        let used_prop = nets.prop(s.prop_a_id);
        assert!(used_prop.grads.iter().any(|g| g.data.iter().any(|&v| v != 0.0)));
        let used_rel = nets.rel(s.rel_id);
        assert!(used_rel.grads.iter().any(|g| g.data.iter().any(|&v| v != 0.0)));
    }
}
