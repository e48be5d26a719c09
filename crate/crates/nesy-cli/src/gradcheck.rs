//! Central finite-difference gradient checks for the three analytic
//! gradient paths: model counting, network backprop, and soft constraints.

use nesy_core::constraints::{soft_eval, soft_loss_grad, Assignments, ConstraintExpr};
use nesy_core::logic::FactGroupKind;
use nesy_core::neural::{LayerSpec, Network};
use nesy_core::provenance::{wmc, wmc_grad, Proof, ProofSet, WeightTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub instances: usize,
    pub checks: usize,
    pub max_rel_err: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOL
    }
}

/// rel err = |analytic − fd| / max(|analytic|, |fd|, 0.01): absolute near
/// zero, relative once gradients have magnitude.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-2)
}

fn random_weights(rng: &mut ChaCha8Rng) -> WeightTable {
    let groups = rng.gen_range(2..=4);
    let mut probs = Vec::new();
    let mut kinds = Vec::new();
    for _ in 0..groups {
        if rng.gen_bool(0.5) {
            probs.push(vec![rng.gen_range(0.05..0.95)]);
            kinds.push(FactGroupKind::Independent);
        } else {
            let members = rng.gen_range(2..=4);
            let raw: Vec<f64> = (0..members).map(|_| rng.gen_range(0.1..1.0)).collect();
            let z: f64 = raw.iter().sum();
            probs.push(raw.into_iter().map(|v| v / z).collect());
            kinds.push(FactGroupKind::CategoricalAd);
        }
    }
    WeightTable { probs, kinds }
}

fn random_proofs(rng: &mut ChaCha8Rng, weights: &WeightTable) -> ProofSet {
    let mut proofs = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let len = rng.gen_range(1..=3);
        let facts: Vec<_> = (0..len)
            .map(|_| {
                let group = rng.gen_range(0..weights.probs.len());
                let member = rng.gen_range(0..weights.probs[group].len());
                nesy_core::provenance::FactId { group, member }
            })
            .collect();
        if let Some(p) = Proof::from_facts(facts, weights) {
            proofs.push(p);
        }
    }
    ProofSet::from_proofs(proofs, None, weights)
}

pub fn check_wmc(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0001);
    let mut max_rel = 0.0f64;
    let mut checks = 0usize;
    let mut done = 0usize;
    while done < instances {
        let weights = random_weights(&mut rng);
        let set = random_proofs(&mut rng, &weights);
        if set.is_empty() {
            continue;
        }
        done += 1;
        let analytic = wmc_grad(&set, &weights).unwrap();
        for (fid, g) in &analytic.grad {
            let mut wp = weights.clone();
            wp.probs[fid.group][fid.member] += EPS;
            let mut wm = weights.clone();
            wm.probs[fid.group][fid.member] -= EPS;
            let fd = (wmc(&set, &wp).unwrap() - wmc(&set, &wm).unwrap()) / (2.0 * EPS);
            max_rel = max_rel.max(rel_err(*g, fd));
            checks += 1;
        }
    }
    SuiteResult { name: "wmc_grad", instances: done, checks, max_rel_err: max_rel }
}

/// Scalar objective Σ cᵢ·outᵢ for a random cotangent c; checks parameter
/// gradients of a small MLP against central differences.
pub fn check_neural(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0002);
    let mut max_rel = 0.0f64;
    let mut checks = 0usize;
    for i in 0..instances {
        let specs = vec![
            LayerSpec::Linear { input: 4, output: 6 },
            LayerSpec::ReLU,
            LayerSpec::Linear { input: 6, output: 3 },
            LayerSpec::Softmax,
        ];
        let mut net: Network<f64> = Network::new("probe", specs, i as u64);
        let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cotangent: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let (_, cache) = net.forward_cached(&input).unwrap();
        net.zero_grads();
        net.backward_cached(&cache, &cotangent).unwrap();

        let objective = |net: &Network<f64>| -> f64 {
            let (out, _) = net.forward_cached(&input).unwrap();
            out.iter().zip(&cotangent).map(|(o, c)| o * c).sum()
        };
        // Spot-check a handful of parameters per instance.
        for _ in 0..4 {
            let t = rng.gen_range(0..net.params.len());
            if net.params[t].data.is_empty() {
                continue;
            }
            let j = rng.gen_range(0..net.params[t].data.len());
            let analytic = net.grads[t].data[j];
            let orig = net.params[t].data[j];
            net.params[t].data[j] = orig + EPS;
            let up = objective(&net);
            net.params[t].data[j] = orig - EPS;
            let down = objective(&net);
            net.params[t].data[j] = orig;
            let fd = (up - down) / (2.0 * EPS);
            max_rel = max_rel.max(rel_err(analytic, fd));
            checks += 1;
        }
    }
    SuiteResult { name: "neural_backward", instances, checks, max_rel_err: max_rel }
}

fn random_expr(rng: &mut ChaCha8Rng, vars: &[String], depth: usize) -> ConstraintExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return ConstraintExpr::is_true(&vars[rng.gen_range(0..vars.len())]);
    }
    match rng.gen_range(0..4) {
        0 => ConstraintExpr::AndL(
            (0..rng.gen_range(2..=3)).map(|_| random_expr(rng, vars, depth - 1)).collect(),
        ),
        1 => ConstraintExpr::OrL(
            (0..rng.gen_range(2..=3)).map(|_| random_expr(rng, vars, depth - 1)).collect(),
        ),
        2 => ConstraintExpr::NotL(Box::new(random_expr(rng, vars, depth - 1))),
        _ => ConstraintExpr::IfL(
            Box::new(random_expr(rng, vars, depth - 1)),
            Box::new(random_expr(rng, vars, depth - 1)),
        ),
    }
}

/// The residuum implication is non-smooth where antecedent equals
/// consequent; finite differences straddle that crease, so skip instances
/// containing a near-tie.
fn near_kink(expr: &ConstraintExpr, a: &Assignments) -> bool {
    match expr {
        ConstraintExpr::IfL(p, q) => {
            let dp = soft_eval(p, a).unwrap_or(0.0);
            let dq = soft_eval(q, a).unwrap_or(0.0);
            (dp - dq).abs() < 1e-3 || near_kink(p, a) || near_kink(q, a)
        }
        ConstraintExpr::AndL(cs) | ConstraintExpr::OrL(cs) | ConstraintExpr::ExistsL(cs) => {
            cs.iter().any(|c| near_kink(c, a))
        }
        ConstraintExpr::NotL(c) => near_kink(c, a),
        _ => false,
    }
}

pub fn check_constraints(instances: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE_0003);
    let vars: Vec<String> = (1..=4).map(|i| format!("v{i}")).collect();
    let mut max_rel = 0.0f64;
    let mut checks = 0usize;
    let mut done = 0usize;
    while done < instances {
        let expr = random_expr(&mut rng, &vars, 3);
        let mut a = Assignments::new();
        for v in &vars {
            let p: f64 = rng.gen_range(0.02..0.98);
            a.insert(v.clone(), vec![1.0 - p, p]);
        }
        if near_kink(&expr, &a) {
            continue;
        }
        done += 1;
        let (_, grads) = soft_loss_grad(&expr, &a).unwrap();
        for ((var, slot), g) in &grads {
            let mut up = a.clone();
            up.get_mut(var).unwrap()[*slot] += EPS;
            let mut down = a.clone();
            down.get_mut(var).unwrap()[*slot] -= EPS;
            let (lu, _) = soft_loss_grad(&expr, &up).unwrap();
            let (ld, _) = soft_loss_grad(&expr, &down).unwrap();
            let fd = (lu - ld) / (2.0 * EPS);
            max_rel = max_rel.max(rel_err(*g, fd));
            checks += 1;
        }
    }
    SuiteResult { name: "soft_loss_grad", instances: done, checks, max_rel_err: max_rel }
}

/// Run all suites, print one line each, and report overall success.
pub fn run_all(instances: usize) -> bool {
    let suites = [check_wmc(instances), check_neural(instances), check_constraints(instances)];
    let mut ok = true;
    for s in &suites {
        println!(
            "{}: {} instances, {} checks, max rel err {:.3e} ... {}",
            s.name,
            s.instances,
            s.checks,
            s.max_rel_err,
            if s.passed() { "PASS" } else { "FAIL" }
        );
        ok &= s.passed();
    }
    ok
}
