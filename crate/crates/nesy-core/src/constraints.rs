//! First-order constraints over concept predictions: product t-norm soft
//! surrogates, a score-function sampling loss, primal-dual multipliers, and
//! exact constrained MAP by exhaustive search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConstraintError {
    #[error("variable `{0}` has no bound probability vector")]
    UnboundVariable(String),
    #[error("joint search space of {size} assignments exceeds cap {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Binary,
    Categorical(usize),
}

impl Domain {
    pub fn size(&self) -> usize {
        match self {
            Domain::Binary => 2,
            Domain::Categorical(n) => *n,
        }
    }
}

/// A concept bound to one neural head's output slot, identified by name in
/// the assignment map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptVar {
    pub name: String,
    pub domain: Domain,
}

impl ConceptVar {
    pub fn binary(name: &str) -> Self {
        ConceptVar { name: name.to_string(), domain: Domain::Binary }
    }

    pub fn categorical(name: &str, n: usize) -> Self {
        ConceptVar { name: name.to_string(), domain: Domain::Categorical(n) }
    }
}

/// Constraint tree. `ExistsL` carries its candidate instantiations
/// explicitly; `ExactL` names a var-group whose categorical must be
/// normalized (a structural no-op over softmax heads).
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintExpr {
    Leaf { var: String, value: usize },
    AndL(Vec<ConstraintExpr>),
    OrL(Vec<ConstraintExpr>),
    NotL(Box<ConstraintExpr>),
    IfL(Box<ConstraintExpr>, Box<ConstraintExpr>),
    ExistsL(Vec<ConstraintExpr>),
    ExactL(Vec<String>),
}

impl ConstraintExpr {
    pub fn is_true(var: &str) -> Self {
        ConstraintExpr::Leaf { var: var.to_string(), value: 1 }
    }

    pub fn eq(var: &str, value: usize) -> Self {
        ConstraintExpr::Leaf { var: var.to_string(), value }
    }

    fn vars_into(&self, out: &mut Vec<String>) {
        match self {
            ConstraintExpr::Leaf { var, .. } => out.push(var.clone()),
            ConstraintExpr::AndL(cs) | ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
                for c in cs {
                    c.vars_into(out);
                }
            }
            ConstraintExpr::NotL(c) => c.vars_into(out),
            ConstraintExpr::IfL(a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            ConstraintExpr::ExactL(vars) => out.extend(vars.iter().cloned()),
        }
    }

    pub fn vars(&self) -> Vec<String> {
        let mut v = Vec::new();
        self.vars_into(&mut v);
        v.sort();
        v.dedup();
        v
    }
}

pub type Assignments = HashMap<String, Vec<f64>>;

fn leaf_prob(assignments: &Assignments, var: &str, value: usize) -> Result<f64, ConstraintError> {
    let vec = assignments.get(var).ok_or_else(|| ConstraintError::UnboundVariable(var.to_string()))?;
    Ok(vec.get(value).copied().unwrap_or(0.0))
}

/// Product t-norm degree of satisfaction in [0,1].
pub fn soft_eval(expr: &ConstraintExpr, assignments: &Assignments) -> Result<f64, ConstraintError> {
    Ok(match expr {
        ConstraintExpr::Leaf { var, value } => leaf_prob(assignments, var, *value)?,
        ConstraintExpr::AndL(cs) => {
            let mut acc = 1.0;
            for c in cs {
                acc *= soft_eval(c, assignments)?;
            }
            acc
        }
        ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
            let mut acc = 1.0;
            for c in cs {
                acc *= 1.0 - soft_eval(c, assignments)?;
            }
            1.0 - acc
        }
        ConstraintExpr::NotL(c) => 1.0 - soft_eval(c, assignments)?,
        ConstraintExpr::IfL(a, b) => {
            let a = soft_eval(a, assignments)?;
            let b = soft_eval(b, assignments)?;
            if a <= b {
                1.0
            } else {
                b / a
            }
        }
        ConstraintExpr::ExactL(vars) => {
            let mut sum = 0.0;
            for v in vars {
                let vec =
                    assignments.get(v).ok_or_else(|| ConstraintError::UnboundVariable(v.to_string()))?;
                sum += vec.iter().sum::<f64>();
            }
            let target = vars.len() as f64;
            (1.0 - (sum - target).abs()).clamp(0.0, 1.0)
        }
    })
}

/// Gradient slot: one entry of a var's probability vector.
pub type SlotGrad = BTreeMap<(String, usize), f64>;

fn soft_grad(
    expr: &ConstraintExpr,
    assignments: &Assignments,
    seed: f64,
    out: &mut SlotGrad,
) -> Result<f64, ConstraintError> {
    Ok(match expr {
        ConstraintExpr::Leaf { var, value } => {
            let p = leaf_prob(assignments, var, *value)?;
            *out.entry((var.clone(), *value)).or_insert(0.0) += seed;
            p
        }
        ConstraintExpr::AndL(cs) => {
            let degrees: Vec<f64> =
                cs.iter().map(|c| soft_eval(c, assignments)).collect::<Result<_, _>>()?;
            let product: f64 = degrees.iter().product();
            for (i, c) in cs.iter().enumerate() {
                // ∂(Πd)/∂d_i = Π_{j≠i} d_j, robust to zero factors.
                let rest: f64 =
                    degrees.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d).product();
                soft_grad(c, assignments, seed * rest, out)?;
            }
            product
        }
        ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
            let degrees: Vec<f64> =
                cs.iter().map(|c| soft_eval(c, assignments)).collect::<Result<_, _>>()?;
            let comp: f64 = degrees.iter().map(|d| 1.0 - d).product();
            for (i, c) in cs.iter().enumerate() {
                let rest: f64 = degrees
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, d)| 1.0 - d)
                    .product();
                soft_grad(c, assignments, seed * rest, out)?;
            }
            1.0 - comp
        }
        ConstraintExpr::NotL(c) => 1.0 - soft_grad(c, assignments, -seed, out)?,
        ConstraintExpr::IfL(a, b) => {
            let da = soft_eval(a, assignments)?;
            let db = soft_eval(b, assignments)?;
            if da <= db {
                // Flat side of the residuum; subgradient 0 at the kink.
                1.0
            } else {
                soft_grad(a, assignments, seed * (-db / (da * da)), out)?;
                soft_grad(b, assignments, seed / da, out)?;
                db / da
            }
        }
        ConstraintExpr::ExactL(_) => soft_eval(expr, assignments)?,
    })
}

/// Loss 1 − degree and its exact partials on every bound probability slot.
pub fn soft_loss_grad(
    expr: &ConstraintExpr,
    assignments: &Assignments,
) -> Result<(f64, SlotGrad), ConstraintError> {
    let mut grads = SlotGrad::new();
    let degree = soft_grad(expr, assignments, -1.0, &mut grads)?;
    Ok((1.0 - degree, grads))
}

/// Hard Boolean semantics under a discrete assignment.
pub fn hard_eval(expr: &ConstraintExpr, assignment: &HashMap<String, usize>) -> Result<bool, ConstraintError> {
    Ok(match expr {
        ConstraintExpr::Leaf { var, value } => {
            let v = assignment.get(var).ok_or_else(|| ConstraintError::UnboundVariable(var.to_string()))?;
            v == value
        }
        ConstraintExpr::AndL(cs) => {
            for c in cs {
                if !hard_eval(c, assignment)? {
                    return Ok(false);
                }
            }
            true
        }
        ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
            for c in cs {
                if hard_eval(c, assignment)? {
                    return Ok(true);
                }
            }
            false
        }
        ConstraintExpr::NotL(c) => !hard_eval(c, assignment)?,
        ConstraintExpr::IfL(a, b) => !hard_eval(a, assignment)? || hard_eval(b, assignment)?,
        ConstraintExpr::ExactL(_) => true,
    })
}

/// Monte-Carlo violation loss with score-function gradients on the sampled
/// slots. Deterministic per seed.
pub fn sampling_loss(
    expr: &ConstraintExpr,
    assignments: &Assignments,
    sample_count: usize,
    rng_seed: u64,
) -> Result<(f64, SlotGrad), ConstraintError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let vars: Vec<&String> = {
        let mut v: Vec<&String> = assignments.keys().collect();
        v.sort();
        v
    };
    let mut violations = 0usize;
    let mut grads = SlotGrad::new();
    for _ in 0..sample_count {
        let mut sample = HashMap::new();
        for &name in &vars {
            let probs = &assignments[name];
            let mut u: f64 = rng.gen();
            let mut chosen = probs.len().saturating_sub(1);
            for (i, p) in probs.iter().enumerate() {
                u -= p;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            sample.insert(name.clone(), chosen);
        }
        if !hard_eval(expr, &sample)? {
            violations += 1;
            for (name, &value) in &sample {
                let p = assignments[name][value].max(1e-12);
                *grads.entry((name.clone(), value)).or_insert(0.0) += 1.0 / p;
            }
        }
    }
    let n = sample_count.max(1) as f64;
    for g in grads.values_mut() {
        *g /= n;
    }
    Ok((violations as f64 / n, grads))
}

/// Lagrange multipliers, one per constraint id. λ stays nonnegative.
#[derive(Debug, Clone, Default)]
pub struct LagrangeState {
    pub multipliers: BTreeMap<String, f64>,
    pub eta: f64,
}

impl LagrangeState {
    pub fn new(eta: f64) -> Self {
        LagrangeState { multipliers: BTreeMap::new(), eta }
    }
}

/// Returns the λ used to weight each constraint's violation this step, then
/// ascends: λ ← max(0, λ + η·(1 − degree)).
pub fn primal_dual_step(
    state: &mut LagrangeState,
    degrees: &BTreeMap<String, f64>,
) -> BTreeMap<String, f64> {
    let mut weights = BTreeMap::new();
    for (id, &degree) in degrees {
        let lambda = state.multipliers.entry(id.clone()).or_insert(0.0);
        weights.insert(id.clone(), *lambda);
        *lambda = (*lambda + state.eta * (1.0 - degree)).max(0.0);
    }
    weights
}

/// Result of constrained decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub assignment: HashMap<String, usize>,
    pub log_prob: f64,
    /// True when no assignment satisfies the constraints and the
    /// unconstrained argmax was returned instead.
    pub infeasible: bool,
}

pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000;

/// Exhaustive MAP over the joint discrete space: maximize Σ log p subject to
/// all hard constraints; ties broken lexicographically over sorted var names.
pub fn constrained_map(
    assignments: &Assignments,
    hard_constraints: &[ConstraintExpr],
    search_cap: u64,
) -> Result<MapResult, ConstraintError> {
    let mut vars: Vec<&String> = assignments.keys().collect();
    vars.sort();
    for c in hard_constraints {
        for v in c.vars() {
            if !assignments.contains_key(&v) {
                return Err(ConstraintError::UnboundVariable(v));
            }
        }
    }
    let mut size: u128 = 1;
    for &v in &vars {
        size = size.saturating_mul(assignments[v].len().max(1) as u128);
    }
    if size > search_cap as u128 {
        return Err(ConstraintError::SearchSpaceTooLarge { size, cap: search_cap });
    }

    let score = |assignment: &HashMap<String, usize>| -> f64 {
        vars.iter().map(|&v| assignments[v][assignment[v]].max(1e-12).ln()).sum()
    };

    let mut best: Option<(f64, HashMap<String, usize>)> = None;
    let mut counters = vec![0usize; vars.len()];
    'space: loop {
        let assignment: HashMap<String, usize> =
            vars.iter().zip(&counters).map(|(&v, &c)| (v.clone(), c)).collect();
        let ok = hard_constraints.iter().try_fold(true, |acc, c| {
            hard_eval(c, &assignment).map(|h| acc && h)
        })?;
        if ok {
            let s = score(&assignment);
            // Lexicographic enumeration order + strict improvement = ties
            // keep the lexicographically first assignment.
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, assignment));
            }
        }
        for i in (0..vars.len()).rev() {
            counters[i] += 1;
            if counters[i] < assignments[vars[i]].len() {
                continue 'space;
            }
            counters[i] = 0;
        }
        break;
    }

    match best {
        Some((log_prob, assignment)) => Ok(MapResult { assignment, log_prob, infeasible: false }),
        None => {
            let assignment: HashMap<String, usize> = vars
                .iter()
                .map(|&v| {
                    let probs = &assignments[v];
                    let arg = probs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    (v.clone(), arg)
                })
                .collect();
            let log_prob = score(&assignment);
            Ok(MapResult { assignment, log_prob, infeasible: true })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn bind(pairs: &[(&str, &[f64])]) -> Assignments {
        pairs.iter().map(|(n, v)| (n.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn and_is_product() {
        let a = bind(&[("a", &[0.2, 0.8]), ("b", &[0.5, 0.5])]);
        let e = ConstraintExpr::AndL(vec![ConstraintExpr::is_true("a"), ConstraintExpr::is_true("b")]);
        assert!((soft_eval(&e, &a).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn if_is_residuum() {
        let a = bind(&[("a", &[0.2, 0.8]), ("b", &[0.6, 0.4])]);
        let e = ConstraintExpr::IfL(
            Box::new(ConstraintExpr::is_true("a")),
            Box::new(ConstraintExpr::is_true("b")),
        );
        assert!((soft_eval(&e, &a).unwrap() - 0.5).abs() < 1e-12);
        let sat = bind(&[("a", &[0.8, 0.2]), ("b", &[0.6, 0.4])]);
        assert_eq!(soft_eval(&e, &sat).unwrap(), 1.0);
    }

    #[test]
    fn exists_is_noisy_or() {
        let a = bind(&[("x", &[0.5, 0.5]), ("y", &[0.5, 0.5])]);
        let e = ConstraintExpr::ExistsL(vec![ConstraintExpr::is_true("x"), ConstraintExpr::is_true("y")]);
        assert!((soft_eval(&e, &a).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn exactl_is_noop_on_normalized_heads() {
        let a = bind(&[("d", &[0.25, 0.25, 0.25, 0.25])]);
        let e = ConstraintExpr::ExactL(vec!["d".to_string()]);
        assert_eq!(soft_eval(&e, &a).unwrap(), 1.0);
        let bad = bind(&[("d", &[0.5, 0.2])]);
        assert!((soft_eval(&e, &bad).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unbound_variable_error() {
        let a = bind(&[]);
        assert_eq!(
            soft_eval(&ConstraintExpr::is_true("ghost"), &a),
            Err(ConstraintError::UnboundVariable("ghost".into()))
        );
    }

    #[test]
    fn and_loss_partial() {
        let a = bind(&[("a", &[0.2, 0.8]), ("b", &[0.5, 0.5])]);
        let e = ConstraintExpr::AndL(vec![ConstraintExpr::is_true("a"), ConstraintExpr::is_true("b")]);
        let (loss, grads) = soft_loss_grad(&e, &a).unwrap();
        assert!((loss - 0.6).abs() < 1e-12);
        assert!((grads[&("a".to_string(), 1)] + 0.5).abs() < 1e-12);
        assert!((grads[&("b".to_string(), 1)] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn satisfied_constraint_has_zero_gradient() {
        let a = bind(&[("a", &[0.0, 1.0]), ("b", &[0.5, 0.5])]);
        let e = ConstraintExpr::IfL(
            Box::new(ConstraintExpr::is_true("b")),
            Box::new(ConstraintExpr::is_true("a")),
        );
        let (loss, grads) = soft_loss_grad(&e, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.values().all(|&g| g == 0.0));
    }

    fn random_expr(rng: &mut impl Rng, vars: &[&str], depth: usize) -> ConstraintExpr {
        if depth == 0 || rng.gen_bool(0.3) {
            return ConstraintExpr::Leaf {
                var: vars[rng.gen_range(0..vars.len())].to_string(),
                value: rng.gen_range(0..2),
            };
        }
        match rng.gen_range(0..4) {
            0 => ConstraintExpr::AndL(
                (0..rng.gen_range(2..4)).map(|_| random_expr(rng, vars, depth - 1)).collect(),
            ),
            1 => ConstraintExpr::OrL(
                (0..rng.gen_range(2..4)).map(|_| random_expr(rng, vars, depth - 1)).collect(),
            ),
            2 => ConstraintExpr::NotL(Box::new(random_expr(rng, vars, depth - 1))),
            _ => ConstraintExpr::IfL(
                Box::new(random_expr(rng, vars, depth - 1)),
                Box::new(random_expr(rng, vars, depth - 1)),
            ),
        }
    }

    // The residuum is non-differentiable where antecedent == consequent;
    // finite differences straddle the kink there, so the check skips those.
    fn near_kink(expr: &ConstraintExpr, a: &Assignments, margin: f64) -> bool {
        match expr {
            ConstraintExpr::Leaf { .. } | ConstraintExpr::ExactL(_) => false,
            ConstraintExpr::AndL(cs) | ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
                cs.iter().any(|c| near_kink(c, a, margin))
            }
            ConstraintExpr::NotL(c) => near_kink(c, a, margin),
            ConstraintExpr::IfL(x, y) => {
                let dx = soft_eval(x, a).unwrap();
                let dy = soft_eval(y, a).unwrap();
                (dx - dy).abs() < margin || near_kink(x, a, margin) || near_kink(y, a, margin)
            }
        }
    }

    #[test]
    fn soft_grads_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let vars = ["u", "v", "w"];
        let mut checked = 0;
        for _ in 0..400 {
            let expr = random_expr(&mut rng, &vars, 3);
            let mut assignments: Assignments = HashMap::new();
            for v in vars {
                let p: f64 = rng.gen_range(0.05..0.95);
                assignments.insert(v.to_string(), vec![1.0 - p, p]);
            }
            if near_kink(&expr, &assignments, 1e-3) {
                let (loss, grads) = soft_loss_grad(&expr, &assignments).unwrap();
                assert!(loss.is_finite() && grads.values().all(|g| g.is_finite()));
                continue;
            }
            checked += 1;
            let (_, grads) = soft_loss_grad(&expr, &assignments).unwrap();
            let eps = 1e-5;
            for v in vars {
                for slot in 0..2 {
                    let orig = assignments[v][slot];
                    assignments.get_mut(v).unwrap()[slot] = orig + eps;
                    let lp = 1.0 - soft_eval(&expr, &assignments).unwrap();
                    assignments.get_mut(v).unwrap()[slot] = orig - eps;
                    let lm = 1.0 - soft_eval(&expr, &assignments).unwrap();
                    assignments.get_mut(v).unwrap()[slot] = orig;
                    let fd = (lp - lm) / (2.0 * eps);
                    let g = grads.get(&(v.to_string(), slot)).copied().unwrap_or(0.0);
                    let scale = g.abs().max(fd.abs()).max(1e-2);
                    assert!((g - fd).abs() / scale < 1e-4, "{expr:?} {v}[{slot}]: {g} vs {fd}");
                }
            }
        }
        assert!(checked >= 200, "only {checked} smooth instances checked");
    }

    #[test]
    fn soft_matches_hard_on_boolean_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vars = ["u", "v", "w"];
        for _ in 0..200 {
            let expr = random_expr(&mut rng, &vars, 3);
            let mut assignments = Assignments::new();
            let mut hard = HashMap::new();
            for v in vars {
                let bit = rng.gen_range(0..2usize);
                let mut vec = vec![0.0, 0.0];
                vec[bit] = 1.0;
                assignments.insert(v.to_string(), vec);
                hard.insert(v.to_string(), bit);
            }
            let soft = soft_eval(&expr, &assignments).unwrap();
            let expected = if hard_eval(&expr, &hard).unwrap() { 1.0 } else { 0.0 };
            assert_eq!(soft, expected, "{expr:?}");
        }
    }

    #[test]
    fn sampling_tautology_and_contradiction() {
        let a = bind(&[("x", &[0.5, 0.5])]);
        let taut = ConstraintExpr::OrL(vec![
            ConstraintExpr::is_true("x"),
            ConstraintExpr::NotL(Box::new(ConstraintExpr::is_true("x"))),
        ]);
        let (loss, grads) = sampling_loss(&taut, &a, 1000, 1).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.is_empty());
        let contra = ConstraintExpr::AndL(vec![
            ConstraintExpr::is_true("x"),
            ConstraintExpr::NotL(Box::new(ConstraintExpr::is_true("x"))),
        ]);
        let (loss, _) = sampling_loss(&contra, &a, 1000, 1).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn sampling_converges_to_violation_probability() {
        let a = bind(&[("x", &[0.5, 0.5]), ("y", &[0.5, 0.5])]);
        let e = ConstraintExpr::AndL(vec![ConstraintExpr::is_true("x"), ConstraintExpr::is_true("y")]);
        let (loss, _) = sampling_loss(&e, &a, 100_000, 7).unwrap();
        assert!((loss - 0.75).abs() < 0.01, "loss {loss}");
    }

    #[test]
    fn primal_dual_update_rule() {
        let mut state = LagrangeState::new(1.0);
        let degrees: BTreeMap<String, f64> = [("c".to_string(), 0.6)].into();
        let weights = primal_dual_step(&mut state, &degrees);
        assert_eq!(weights["c"], 0.0);
        assert!((state.multipliers["c"] - 0.4).abs() < 1e-12);
        let sat: BTreeMap<String, f64> = [("c".to_string(), 1.0)].into();
        primal_dual_step(&mut state, &sat);
        assert!((state.multipliers["c"] - 0.4).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let d: BTreeMap<String, f64> = [("c".to_string(), rng.gen_range(0.0..1.5))].into();
            primal_dual_step(&mut state, &d);
            assert!(state.multipliers["c"] >= 0.0);
        }
    }

    #[test]
    fn constrained_map_digit_sum() {
        // Argmax pair (3,5) but the sum must be 9.
        let mut p1 = vec![0.05; 10];
        p1[3] = 0.55;
        let mut p2 = vec![0.05; 10];
        p2[5] = 0.55;
        let a = bind(&[("d1", &p1), ("d2", &p2)]);
        let sum9 = ConstraintExpr::OrL(
            (0..10)
                .filter(|i| 9 - i < 10)
                .map(|i| {
                    ConstraintExpr::AndL(vec![
                        ConstraintExpr::eq("d1", i),
                        ConstraintExpr::eq("d2", 9 - i),
                    ])
                })
                .collect(),
        );
        let res = constrained_map(&a, &[sum9], DEFAULT_SEARCH_CAP).unwrap();
        assert!(!res.infeasible);
        assert_eq!(res.assignment["d1"] + res.assignment["d2"], 9);
        // Brute force agreement.
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for i in 0..10 {
            let j = 9 - i;
            let s = p1[i].ln() + p2[j].ln();
            if s > best.0 {
                best = (s, i, j);
            }
        }
        assert_eq!((res.assignment["d1"], res.assignment["d2"]), (best.1, best.2));
    }

    #[test]
    fn unconstrained_map_is_argmax() {
        let a = bind(&[("x", &[0.1, 0.7, 0.2]), ("y", &[0.6, 0.4])]);
        let res = constrained_map(&a, &[], DEFAULT_SEARCH_CAP).unwrap();
        assert!(!res.infeasible);
        assert_eq!(res.assignment["x"], 1);
        assert_eq!(res.assignment["y"], 0);
    }

    #[test]
    fn infeasible_falls_back_to_argmax() {
        let a = bind(&[("x", &[0.3, 0.7])]);
        let contra = ConstraintExpr::AndL(vec![
            ConstraintExpr::is_true("x"),
            ConstraintExpr::NotL(Box::new(ConstraintExpr::is_true("x"))),
        ]);
        let res = constrained_map(&a, &[contra], DEFAULT_SEARCH_CAP).unwrap();
        assert!(res.infeasible);
        assert_eq!(res.assignment["x"], 1);
    }

    #[test]
    fn search_cap_enforced() {
        let p = vec![0.1; 10];
        let a: Assignments = (0..8).map(|i| (format!("v{i}"), p.clone())).collect();
        assert!(matches!(
            constrained_map(&a, &[], 1_000_000),
            Err(ConstraintError::SearchSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn map_invariant_under_logit_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let mut a = Assignments::new();
            for name in ["x", "y"] {
                let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                a.insert(name.to_string(), exps.iter().map(|e| e / z).collect());
            }
            let c = ConstraintExpr::NotL(Box::new(ConstraintExpr::AndL(vec![
                ConstraintExpr::eq("x", 0),
                ConstraintExpr::eq("y", 0),
            ])));
            let base = constrained_map(&a, &[c.clone()], DEFAULT_SEARCH_CAP).unwrap();
            // Scale logits by 3: p^3 renormalized.
            let scaled: Assignments = a
                .iter()
                .map(|(k, v)| {
                    let cubed: Vec<f64> = v.iter().map(|p| p.powi(3)).collect();
                    let z: f64 = cubed.iter().sum();
                    (k.clone(), cubed.iter().map(|p| p / z).collect())
                })
                .collect();
            let res = constrained_map(&scaled, &[c], DEFAULT_SEARCH_CAP).unwrap();
            assert_eq!(base.assignment, res.assignment);
        }
    }
}
