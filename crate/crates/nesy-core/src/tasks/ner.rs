//! Toy NER: six embeddings, two boolean heads, two query labels supervised
//! jointly. The queries exist both as reasoner rules and as constraint
//! expressions; the two paths must agree exactly.

use super::{bernoulli_nll, Interplay, Metrics, TaskConfig, TaskError};
use crate::constraints::{
    primal_dual_step, soft_eval, soft_loss_grad, Assignments, ConstraintExpr, LagrangeState,
};
use crate::logic::{parse_source, validate, ValidatedProgram};
use crate::neural::{ForwardCache, LayerSpec, Network, Optimizer, OptimizerKind};
use crate::provenance::SemiringSpec;
use crate::reasoner::seed_facts;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::time::Instant;

pub const EMB_DIM: usize = 16;

pub const NER_PROGRAM: &str = "\
rel person(int).
rel works(int).
rel c1().
rel c2().
c1() :- person(1), works(1), person(2), works(2).
c2() :- person(2), works(2).
c2() :- person(3), works(3).
nn(person, 0)::person(1).
nn(person, 1)::person(2).
nn(person, 2)::person(3).
nn(works, 0)::works(1).
nn(works, 1)::works(2).
nn(works, 2)::works(3).
query c1().
query c2().
";

#[derive(Debug, Clone)]
pub struct NerSample {
    pub person_emb: [Vec<f64>; 3],
    pub loc_emb: [Vec<f64>; 3],
    pub is_real_person: [bool; 3],
    pub works_in: [bool; 3],
    pub label_c1: bool,
    pub label_c2: bool,
}

fn gaussian(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    mean + sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn class_embedding(rng: &mut ChaCha8Rng, positive: bool) -> Vec<f64> {
    // Class means ±0.5 per dimension with σ = 0.5: 2σ separation.
    let mean = if positive { 0.5 } else { -0.5 };
    (0..EMB_DIM).map(|_| gaussian(rng, mean, 0.5)).collect()
}

pub fn gen_ner(seed: u64, count: usize) -> Vec<NerSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let is_real_person = [rng.gen_bool(0.5), rng.gen_bool(0.5), rng.gen_bool(0.5)];
            let works_in = [rng.gen_bool(0.5), rng.gen_bool(0.5), rng.gen_bool(0.5)];
            let person_emb = [
                class_embedding(&mut rng, is_real_person[0]),
                class_embedding(&mut rng, is_real_person[1]),
                class_embedding(&mut rng, is_real_person[2]),
            ];
            let loc_emb = [
                class_embedding(&mut rng, works_in[0]),
                class_embedding(&mut rng, works_in[1]),
                class_embedding(&mut rng, works_in[2]),
            ];
            let label_c1 = is_real_person[0] && works_in[0] && is_real_person[1] && works_in[1];
            let label_c2 =
                (is_real_person[1] && works_in[1]) || (is_real_person[2] && works_in[2]);
            NerSample { person_emb, loc_emb, is_real_person, works_in, label_c1, label_c2 }
        })
        .collect()
}

/// Constraint-path formulations of the two queries over vars p1..p3, w1..w3.
pub fn ner_constraints() -> (ConstraintExpr, ConstraintExpr) {
    let c1 = ConstraintExpr::AndL(vec![
        ConstraintExpr::is_true("p1"),
        ConstraintExpr::is_true("w1"),
        ConstraintExpr::is_true("p2"),
        ConstraintExpr::is_true("w2"),
    ]);
    let c2 = ConstraintExpr::OrL(vec![
        ConstraintExpr::AndL(vec![ConstraintExpr::is_true("p2"), ConstraintExpr::is_true("w2")]),
        ConstraintExpr::AndL(vec![ConstraintExpr::is_true("p3"), ConstraintExpr::is_true("w3")]),
    ]);
    (c1, c2)
}

/// Query probabilities through the reasoner given head outputs p(person_i),
/// p(works_i).
pub fn reasoner_query_probs(
    vp: &ValidatedProgram,
    person: &[f64; 3],
    works: &[f64; 3],
) -> Result<(f64, f64), TaskError> {
    let outs: HashMap<String, Vec<f64>> =
        [("person".to_string(), person.to_vec()), ("works".to_string(), works.to_vec())].into();
    let mut ctx = seed_facts(vp, SemiringSpec::TopKProofs(None), &outs)?;
    ctx.evaluate()?;
    let q1 = ctx.query("c1")?.first().map(|a| a.prob).unwrap_or(0.0);
    let q2 = ctx.query("c2")?.first().map(|a| a.prob).unwrap_or(0.0);
    Ok((q1, q2))
}

fn assignments(person: &[f64; 3], works: &[f64; 3]) -> Assignments {
    let mut a = Assignments::new();
    for i in 0..3 {
        a.insert(format!("p{}", i + 1), vec![1.0 - person[i], person[i]]);
        a.insert(format!("w{}", i + 1), vec![1.0 - works[i], works[i]]);
    }
    a
}

pub struct NerNets {
    pub person: Network<f64>,
    pub works: Network<f64>,
}

impl NerNets {
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
        NerNets { person: mlp("person", EMB_DIM, 101), works: mlp("works", 2 * EMB_DIM, 202) }
    }
}

struct HeadPass {
    person_p: [f64; 3],
    works_p: [f64; 3],
    person_caches: Vec<ForwardCache<f64>>,
    works_caches: Vec<ForwardCache<f64>>,
}

fn forward_heads(nets: &NerNets, s: &NerSample) -> Result<HeadPass, TaskError> {
    let mut person_p = [0.0; 3];
    let mut works_p = [0.0; 3];
    let mut person_caches = Vec::new();
    let mut works_caches = Vec::new();
    for i in 0..3 {
        let (out, cache) = nets.person.forward_cached(&s.person_emb[i])?;
        person_p[i] = out[1];
        person_caches.push(cache);
        let joint: Vec<f64> =
            s.person_emb[i].iter().chain(&s.loc_emb[i]).copied().collect();
        let (out, cache) = nets.works.forward_cached(&joint)?;
        works_p[i] = out[1];
        works_caches.push(cache);
    }
    Ok(HeadPass { person_p, works_p, person_caches, works_caches })
}

/// Apply loss gradients expressed on p(person_i) / p(works_i) slots.
fn backprop_slots(
    nets: &mut NerNets,
    pass: &HeadPass,
    person_g: &[f64; 3],
    works_g: &[f64; 3],
) -> Result<(), TaskError> {
    for i in 0..3 {
        if person_g[i] != 0.0 {
            nets.person.backward_cached(&pass.person_caches[i], &[0.0, person_g[i]])?;
        }
        if works_g[i] != 0.0 {
            nets.works.backward_cached(&pass.works_caches[i], &[0.0, works_g[i]])?;
        }
    }
    Ok(())
}

/// Train both heads jointly against the two constraint labels.
pub fn train_toy_ner(config: &TaskConfig) -> Result<(NerNets, Metrics), TaskError> {
    config.validate()?;
    let (e1, e2) = ner_constraints();
    let implication = ConstraintExpr::IfL(Box::new(e1.clone()), Box::new(e2.clone()));

    let train = gen_ner(config.seed, config.train_count);

    let mut nets = NerNets::new(config.seed);
    let mut opt_p = Optimizer::new(OptimizerKind::adam(config.learning_rate));
    let mut opt_w = Optimizer::new(OptimizerKind::adam(config.learning_rate));
    let mut lagrange = LagrangeState::new(0.01);
    let use_primal_dual = config.interplay == Interplay::PrimalDual;

    let train_start = Instant::now();
    let mut seen = 0u64;
    for _ in 0..config.epochs {
        for batch in train.chunks(config.batch_size) {
            let mut batch_degrees = Vec::new();
            for s in batch {
                seen += 1;
                let pass = forward_heads(&nets, s)?;
                let a = assignments(&pass.person_p, &pass.works_p);
                let d1 = soft_eval(&e1, &a)?;
                let d2 = soft_eval(&e2, &a)?;
                let (_, dl1) = bernoulli_nll(d1, s.label_c1);
                let (_, dl2) = bernoulli_nll(d2, s.label_c2);

                let (_, g1) = soft_loss_grad(&e1, &a)?;
                let (_, g2) = soft_loss_grad(&e2, &a)?;
                // soft_loss_grad returns ∂(1−degree)/∂slot, so flip sign to
                // get the degree gradient before chaining in dNLL/ddegree.
                let mut person_g = [0.0; 3];
                let mut works_g = [0.0; 3];
                let mut add = |grads: &BTreeMap<(String, usize), f64>, scale: f64| {
                    for ((var, slot), g) in grads {
                        if *slot != 1 {
                            continue;
                        }
                        let idx: usize = var[1..].parse().unwrap();
                        let dv = -g * scale;
                        if var.starts_with('p') {
                            person_g[idx - 1] += dv;
                        } else {
                            works_g[idx - 1] += dv;
                        }
                    }
                };
                add(&g1, dl1);
                add(&g2, dl2);

                if use_primal_dual {
                    let degree = soft_eval(&implication, &a)?;
                    batch_degrees.push(degree);
                    let lambda = lagrange.multipliers.get("c1_implies_c2").copied().unwrap_or(0.0);
                    if lambda > 0.0 {
                        let (_, gi) = soft_loss_grad(&implication, &a)?;
                        // Augmented loss λ·(1−degree): gi already carries
                        // the (1−degree) direction.
                        add(&gi, -lambda);
                    }
                }

                backprop_slots(&mut nets, &pass, &person_g, &works_g)?;
            }
            opt_p.step(&mut nets.person);
            opt_w.step(&mut nets.works);
            nets.person.zero_grads();
            nets.works.zero_grads();
            if use_primal_dual && !batch_degrees.is_empty() {
                let avg = batch_degrees.iter().sum::<f64>() / batch_degrees.len() as f64;
                let degrees: BTreeMap<String, f64> = [("c1_implies_c2".to_string(), avg)].into();
                primal_dual_step(&mut lagrange, &degrees);
            }
        }
    }
    let train_ms = train_start.elapsed().as_secs_f64() * 1000.0 / seen.max(1) as f64;

    let mut metrics = Metrics::new();
    metrics.insert("train_ms_per_sample".into(), train_ms);
    if use_primal_dual {
        metrics.insert(
            "lambda_c1_implies_c2".into(),
            lagrange.multipliers.get("c1_implies_c2").copied().unwrap_or(0.0),
        );
    }
    Ok((nets, metrics))
}

/// Evaluate via the reasoner path; reports constraint/concept accuracies and
/// the hard-violation rate (c1 predicted without c2).
pub fn eval_toy_ner(nets: &NerNets, config: &TaskConfig) -> Result<Metrics, TaskError> {
    config.validate()?;
    let program = parse_source(NER_PROGRAM)?;
    let vp = validate(&program)?;
    let test = gen_ner(config.seed.wrapping_add(1), config.test_count);

    let test_start = Instant::now();
    let mut c1_correct = 0usize;
    let mut c2_correct = 0usize;
    let mut concept_correct = 0usize;
    let mut violations = 0usize;
    for s in &test {
        let pass = forward_heads(nets, s)?;
        let (q1, q2) = reasoner_query_probs(&vp, &pass.person_p, &pass.works_p)?;
        let pred1 = q1 > 0.5;
        let pred2 = q2 > 0.5;
        if pred1 == s.label_c1 {
            c1_correct += 1;
        }
        if pred2 == s.label_c2 {
            c2_correct += 1;
        }
        if pred1 && !pred2 {
            violations += 1;
        }
        for i in 0..3 {
            if (pass.person_p[i] > 0.5) == s.is_real_person[i] {
                concept_correct += 1;
            }
            if (pass.works_p[i] > 0.5) == s.works_in[i] {
                concept_correct += 1;
            }
        }
    }
    let test_ms = test_start.elapsed().as_secs_f64() * 1000.0 / test.len().max(1) as f64;

    let mut metrics = Metrics::new();
    let n = test.len().max(1) as f64;
    metrics.insert("constraint1_acc".into(), c1_correct as f64 / n);
    metrics.insert("constraint2_acc".into(), c2_correct as f64 / n);
    metrics.insert("concept_acc".into(), concept_correct as f64 / (6.0 * n));
    metrics.insert("violation_rate".into(), violations as f64 / n);
    metrics.insert("test_ms_per_sample".into(), test_ms);
    Ok(metrics)
}

pub fn run_toy_ner(config: &TaskConfig) -> Result<Metrics, TaskError> {
    let (nets, mut metrics) = train_toy_ner(config)?;
    metrics.extend(eval_toy_ner(&nets, config)?);
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_truth_tables() {
        for s in gen_ner(1, 200) {
            assert_eq!(
                s.label_c1,
                s.is_real_person[0] && s.works_in[0] && s.is_real_person[1] && s.works_in[1]
            );
            assert_eq!(
                s.label_c2,
                (s.is_real_person[1] && s.works_in[1]) || (s.is_real_person[2] && s.works_in[2])
            );
        }
    }

    #[test]
    fn paths_agree_exactly() {
        let program = parse_source(NER_PROGRAM).unwrap();
        let vp = validate(&program).unwrap();
        let (e1, e2) = ner_constraints();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let person = [rng.gen(), rng.gen(), rng.gen()];
            let works = [rng.gen(), rng.gen(), rng.gen()];
            let (q1, q2) = reasoner_query_probs(&vp, &person, &works).unwrap();
            let a = assignments(&person, &works);
            let d1 = soft_eval(&e1, &a).unwrap();
            let d2 = soft_eval(&e2, &a).unwrap();
            assert!((q1 - d1).abs() < 1e-9, "c1: {q1} vs {d1}");
            assert!((q2 - d2).abs() < 1e-9, "c2: {q2} vs {d2}");
        }
    }

    #[test]
    fn gt_perfect_heads_are_exact() {
        let program = parse_source(NER_PROGRAM).unwrap();
        let vp = validate(&program).unwrap();
        for s in gen_ner(5, 50) {
            let person = [
                s.is_real_person[0] as u8 as f64,
                s.is_real_person[1] as u8 as f64,
                s.is_real_person[2] as u8 as f64,
            ];
            let works =
                [s.works_in[0] as u8 as f64, s.works_in[1] as u8 as f64, s.works_in[2] as u8 as f64];
            let (q1, q2) = reasoner_query_probs(&vp, &person, &works).unwrap();
            assert_eq!(q1 > 0.5, s.label_c1);
            assert_eq!(q2 > 0.5, s.label_c2);
        }
    }

    #[test]
    fn generator_deterministic() {
        let a = gen_ner(3, 10);
        let b = gen_ner(3, 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.person_emb, y.person_emb);
            assert_eq!(x.label_c1, y.label_c1);
        }
    }
}
