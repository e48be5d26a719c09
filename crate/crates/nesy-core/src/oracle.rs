//! Exhaustive possible-world reference: exact probabilities and gradients by
//! brute force over joint fact assignments, with an independent naive
//! boolean evaluator underneath. Used to cross-check the reasoner and
//! provenance extraction, and as the exact trainer at tiny scale.

use crate::logic::{
    Atom, CmpOp, Expr, FactGroupKind, Literal, Rule, Term, Tuple, ValidatedProgram, Value,
};
use crate::provenance::{FactId, GradProb, WeightTable};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("{count} world variables exceed the oracle cap of {cap}")]
    TooManyWorlds { count: usize, cap: usize },
    #[error("fact group {group} has no weights")]
    MissingWeights { group: usize },
}

/// Enumeration cap: independent facts plus exclusive groups.
pub const ORACLE_VAR_CAP: usize = 20;

/// One joint choice: a truth value per independent fact and a chosen member
/// per annotated-disjunction group.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldAssignment {
    pub independent_choices: BTreeMap<FactId, bool>,
    pub nad_choices: BTreeMap<usize, usize>,
}

/// Naive bottom-up stratified boolean evaluation, deliberately independent
/// of the semiring reasoner: full recomputation every round, no deltas.
pub fn boolean_evaluate(program: &ValidatedProgram, true_facts: &HashSet<(String, Tuple)>) -> HashSet<(String, Tuple)> {
    let mut db: HashSet<(String, Tuple)> = true_facts.clone();
    let max_stratum = program.max_stratum();
    for stratum in 0..=max_stratum {
        loop {
            let mut added = false;
            for rule in &program.program.rules {
                if program.strata[&rule.head.relation] != stratum {
                    continue;
                }
                let rule = reorder_body(rule);
                let mut derived = Vec::new();
                ground_rule(&rule, &db, &mut HashMap::new(), 0, &mut derived);
                for t in derived {
                    if db.insert((rule.head.relation.clone(), t)) {
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
    }
    db
}

/// Positive atoms first (binding variables), then guards and negations in
/// their original order, so left-to-right grounding always sees bound
/// variables where validate() promised them.
pub(crate) fn reorder_body(rule: &Rule) -> Rule {
    let mut body: Vec<Literal> = rule.body.iter().filter(|l| matches!(l, Literal::Pos(_))).cloned().collect();
    body.extend(rule.body.iter().filter(|l| !matches!(l, Literal::Pos(_))).cloned());
    Rule { head: rule.head.clone(), body, pos: rule.pos }
}

fn eval_expr(expr: &Expr, env: &HashMap<String, Value>) -> Option<Value> {
    match expr {
        Expr::Term(Term::Const(v)) => Some(v.clone()),
        Expr::Term(Term::Var(v)) => env.get(v).cloned(),
        Expr::Binary(op, a, b) => {
            let a = eval_expr(a, env)?;
            let b = eval_expr(b, env)?;
            arith(*op, &a, &b)
        }
    }
}

pub(crate) fn arith(op: crate::logic::ArithOp, a: &Value, b: &Value) -> Option<Value> {
    use crate::logic::ArithOp::*;
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(Value::Int(match op {
            Add => x + y,
            Sub => x - y,
            Mul => x * y,
        })),
        (Value::Float(x), Value::Float(y)) => Some(Value::float(match op {
            Add => x.0 + y.0,
            Sub => x.0 - y.0,
            Mul => x.0 * y.0,
        })),
        (Value::Int(x), Value::Float(y)) => arith(op, &Value::float(*x as f64), &Value::Float(*y)),
        (Value::Float(x), Value::Int(y)) => arith(op, &Value::Float(*x), &Value::float(*y as f64)),
        _ => None,
    }
}

pub(crate) fn compare(op: CmpOp, a: &Value, b: &Value) -> bool {
    // Numeric comparison is type-coerced; symbols compare only under == / !=.
    let ord = match (a, b) {
        (Value::Int(x), Value::Float(y)) => (*x as f64).partial_cmp(&y.0),
        (Value::Float(x), Value::Int(y)) => x.0.partial_cmp(&(*y as f64)),
        _ => a.partial_cmp(b),
    };
    let Some(ord) = ord else { return false };
    match op {
        CmpOp::Eq => ord == std::cmp::Ordering::Equal,
        CmpOp::Ne => ord != std::cmp::Ordering::Equal,
        CmpOp::Lt => ord == std::cmp::Ordering::Less,
        CmpOp::Le => ord != std::cmp::Ordering::Greater,
        CmpOp::Gt => ord == std::cmp::Ordering::Greater,
        CmpOp::Ge => ord != std::cmp::Ordering::Less,
    }
}

fn match_atom(atom: &Atom, tuple: &Tuple, env: &mut HashMap<String, Value>, bound_here: &mut Vec<String>) -> bool {
    for (term, v) in atom.terms.iter().zip(tuple) {
        match term {
            Term::Const(c) => {
                if c != v {
                    return false;
                }
            }
            Term::Var(name) => match env.get(name) {
                Some(existing) => {
                    if existing != v {
                        return false;
                    }
                }
                None => {
                    env.insert(name.clone(), v.clone());
                    bound_here.push(name.clone());
                }
            },
        }
    }
    true
}

fn ground_rule(
    rule: &Rule,
    db: &HashSet<(String, Tuple)>,
    env: &mut HashMap<String, Value>,
    lit_idx: usize,
    out: &mut Vec<Tuple>,
) {
    if lit_idx == rule.body.len() {
        let tuple: Option<Tuple> = rule
            .head
            .terms
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => env.get(v).cloned(),
            })
            .collect();
        if let Some(t) = tuple {
            out.push(t);
        }
        return;
    }
    match &rule.body[lit_idx] {
        Literal::Pos(atom) => {
            for (rel, tuple) in db {
                if rel != &atom.relation {
                    continue;
                }
                let mut bound = Vec::new();
                if match_atom(atom, tuple, env, &mut bound) {
                    ground_rule(rule, db, env, lit_idx + 1, out);
                }
                for b in bound {
                    env.remove(&b);
                }
            }
        }
        Literal::Neg(atom) => {
            let tuple: Option<Tuple> = atom
                .terms
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Some(c.clone()),
                    Term::Var(v) => env.get(v).cloned(),
                })
                .collect();
            match tuple {
                Some(t) if db.contains(&(atom.relation.clone(), t.clone())) => {}
                Some(_) => ground_rule(rule, db, env, lit_idx + 1, out),
                // Unbound negation variables: defer by trying after others.
                // validate() guarantees bindings exist, so this is a rule
                // with negation before its binder; handle by skipping here
                // only when fully ground.
                None => {}
            }
        }
        Literal::Guard { lhs, op, rhs, .. } => {
            // `X == expr` with X unbound acts as an assignment.
            if *op == CmpOp::Eq {
                if let (Expr::Term(Term::Var(v)), Some(val)) = (lhs, eval_expr(rhs, env)) {
                    if !env.contains_key(v) {
                        env.insert(v.clone(), val);
                        ground_rule(rule, db, env, lit_idx + 1, out);
                        env.remove(v);
                        return;
                    }
                }
                if let (Expr::Term(Term::Var(v)), Some(val)) = (rhs, eval_expr(lhs, env)) {
                    if !env.contains_key(v) {
                        env.insert(v.clone(), val);
                        ground_rule(rule, db, env, lit_idx + 1, out);
                        env.remove(v);
                        return;
                    }
                }
            }
            if let (Some(a), Some(b)) = (eval_expr(lhs, env), eval_expr(rhs, env)) {
                if compare(*op, &a, &b) {
                    ground_rule(rule, db, env, lit_idx + 1, out);
                }
            }
        }
    }
}

struct Worlds<'a> {
    program: &'a ValidatedProgram,
    weights: &'a WeightTable,
    independents: Vec<FactId>,
    groups: Vec<usize>,
    /// Boolean fixpoints memoized by the set of true facts.
    memo: HashMap<Vec<FactId>, bool>,
    query: &'a Atom,
}

impl<'a> Worlds<'a> {
    fn new(program: &'a ValidatedProgram, weights: &'a WeightTable, query: &'a Atom) -> Result<Self, OracleError> {
        let mut independents = Vec::new();
        let mut groups = Vec::new();
        for (gi, group) in program.program.fact_groups.iter().enumerate() {
            if weights.probs.get(gi).map(|g| g.len()) != Some(group.members.len()) {
                return Err(OracleError::MissingWeights { group: gi });
            }
            match group.kind {
                FactGroupKind::Independent => {
                    for mi in 0..group.members.len() {
                        independents.push(FactId { group: gi, member: mi });
                    }
                }
                FactGroupKind::CategoricalAd => groups.push(gi),
            }
        }
        let count = independents.len() + groups.len();
        if count > ORACLE_VAR_CAP {
            return Err(OracleError::TooManyWorlds { count, cap: ORACLE_VAR_CAP });
        }
        Ok(Worlds { program, weights, independents, groups, memo: HashMap::new(), query })
    }

    fn query_holds(&mut self, true_facts: &[FactId]) -> bool {
        let key = true_facts.to_vec();
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut db = HashSet::new();
        for f in true_facts {
            let atom = &self.program.program.fact_groups[f.group].members[f.member].atom;
            let tuple: Tuple = atom
                .terms
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(_) => unreachable!("facts are ground"),
                })
                .collect();
            db.insert((atom.relation.clone(), tuple));
        }
        let fixpoint = boolean_evaluate(self.program, &db);
        let holds = fixpoint.iter().any(|(rel, tuple)| {
            rel == &self.query.relation && {
                let mut env = HashMap::new();
                let mut bound = Vec::new();
                match_atom(self.query, tuple, &mut env, &mut bound)
            }
        });
        self.memo.insert(key, holds);
        holds
    }

    fn enumerate(&mut self, want_grad: bool) -> GradProb {
        let n_ind = self.independents.len();
        let mut value = 0.0;
        let mut grad: BTreeMap<FactId, f64> = BTreeMap::new();
        if want_grad {
            for &f in &self.independents {
                grad.insert(f, 0.0);
            }
            for &g in &self.groups {
                for m in 0..self.weights.probs[g].len() {
                    grad.insert(FactId { group: g, member: m }, 0.0);
                }
            }
        }
        let groups = self.groups.clone();
        let independents = self.independents.clone();
        let mut choices: Vec<usize> = vec![0; groups.len()];
        loop {
            // One skeleton of group choices; sweep the independent masks.
            for mask in 0u64..(1u64 << n_ind) {
                let mut true_facts: Vec<FactId> = Vec::new();
                let mut prod_nonzero = 1.0;
                let mut zeros = 0u32;
                let mut zero_var: Option<(FactId, f64)> = None;
                let mut factors: Vec<(FactId, f64, f64)> = Vec::new(); // fact, sign, factor
                for (i, &f) in independents.iter().enumerate() {
                    let p = self.weights.probs[f.group][f.member];
                    let on = mask & (1 << i) != 0;
                    let (factor, sign) = if on { (p, 1.0) } else { (1.0 - p, -1.0) };
                    if on {
                        true_facts.push(f);
                    }
                    if factor == 0.0 {
                        zeros += 1;
                        zero_var = Some((f, sign));
                    } else {
                        prod_nonzero *= factor;
                        factors.push((f, sign, factor));
                    }
                }
                for (slot, &g) in groups.iter().enumerate() {
                    let member = choices[slot];
                    let f = FactId { group: g, member };
                    let p = self.weights.probs[g][member];
                    true_facts.push(f);
                    if p == 0.0 {
                        zeros += 1;
                        zero_var = Some((f, 1.0));
                    } else {
                        prod_nonzero *= p;
                        factors.push((f, 1.0, p));
                    }
                }
                if zeros > 1 || (zeros == 1 && !want_grad) {
                    continue;
                }
                true_facts.sort();
                if !self.query_holds(&true_facts) {
                    continue;
                }
                if zeros == 0 {
                    value += prod_nonzero;
                    if want_grad {
                        for &(f, sign, factor) in &factors {
                            *grad.get_mut(&f).unwrap() += sign * prod_nonzero / factor;
                        }
                    }
                } else if let Some((f, sign)) = zero_var {
                    *grad.get_mut(&f).unwrap() += sign * prod_nonzero;
                }
            }
            // Advance the mixed-radix group counter.
            let mut slot = 0;
            loop {
                if slot == groups.len() {
                    let value = if value > 1.0 && value < 1.0 + 1e-9 { 1.0 } else { value.max(0.0) };
                    return GradProb { value, grad };
                }
                choices[slot] += 1;
                if choices[slot] < self.weights.probs[groups[slot]].len() {
                    break;
                }
                choices[slot] = 0;
                slot += 1;
            }
        }
    }
}

/// Exact query probability by world enumeration.
pub fn enumerate_prob(program: &ValidatedProgram, weights: &WeightTable, query: &Atom) -> Result<f64, OracleError> {
    let mut worlds = Worlds::new(program, weights, query)?;
    Ok(worlds.enumerate(false).value)
}

/// Exact query probability and partials with respect to every fact weight.
pub fn enumerate_grad(program: &ValidatedProgram, weights: &WeightTable, query: &Atom) -> Result<GradProb, OracleError> {
    let mut worlds = Worlds::new(program, weights, query)?;
    Ok(worlds.enumerate(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_source, validate, ProbSlot, Program};

    fn ground_query(rel: &str, vals: &[Value]) -> Atom {
        Atom {
            relation: rel.into(),
            terms: vals.iter().map(|v| Term::Const(v.clone())).collect(),
            pos: Default::default(),
        }
    }

    fn weights_of(program: &Program) -> WeightTable {
        let mut probs = Vec::new();
        let mut kinds = Vec::new();
        for g in &program.fact_groups {
            kinds.push(g.kind);
            probs.push(
                g.members
                    .iter()
                    .map(|m| match &m.slot {
                        ProbSlot::Constant(p) => *p,
                        ProbSlot::NeuralOutput { .. } => panic!("constant program expected"),
                    })
                    .collect(),
            );
        }
        WeightTable { probs, kinds }
    }

    #[test]
    fn conjunction_of_independents() {
        let prog = parse_source(
            "rel a(int).\nrel b(int).\nrel q(int).\n0.6::a(0).\n0.5::b(0).\nq(X) :- a(X), b(X).",
        )
        .unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        let p = enumerate_prob(&vp, &w, &ground_query("q", &[Value::Int(0)])).unwrap();
        assert!((p - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unsatisfiable_query_is_zero() {
        let prog = parse_source("rel a(int).\nrel q(int).\n0.6::a(0).\nq(X) :- a(X), X > 5.").unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        let p = enumerate_prob(&vp, &w, &ground_query("q", &[Value::Int(0)])).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn mnist_sum_zero_is_one_percent() {
        let mut src = String::from("rel d1(int).\nrel d2(int).\nrel sum2(int).\nsum2(C) :- d1(A), d2(B), C == A + B.\n");
        for rel in ["d1", "d2"] {
            let members: Vec<String> = (0..10).map(|d| format!("0.1::{rel}({d})")).collect();
            src.push_str(&members.join("; "));
            src.push_str(".\n");
        }
        let prog = parse_source(&src).unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        let p = enumerate_prob(&vp, &w, &ground_query("sum2", &[Value::Int(0)])).unwrap();
        assert!((p - 0.01).abs() < 1e-12);
        // The query family partitions the worlds.
        let total: f64 = (0..=18)
            .map(|s| enumerate_prob(&vp, &w, &ground_query("sum2", &[Value::Int(s)])).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grad_of_single_fact() {
        let prog = parse_source("rel a(int).\nrel q(int).\n0.3::a(0).\nq(X) :- a(X).").unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        let g = enumerate_grad(&vp, &w, &ground_query("q", &[Value::Int(0)])).unwrap();
        assert!((g.value - 0.3).abs() < 1e-12);
        assert!((g.grad[&FactId { group: 0, member: 0 }] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditioning_identity() {
        // grad[f] = P(q | f) - P(q | not f), recomputed by two enumerations.
        let prog = parse_source(
            "rel a(int).\nrel b(int).\nrel q(int).\n0.4::a(0).\n0.7::b(0).\nq(X) :- a(X).\nq(X) :- b(X).",
        )
        .unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        let q = ground_query("q", &[Value::Int(0)]);
        let g = enumerate_grad(&vp, &w, &q).unwrap();
        let mut w_true = w.clone();
        w_true.probs[0][0] = 1.0;
        let mut w_false = w.clone();
        w_false.probs[0][0] = 0.0;
        let diff = enumerate_prob(&vp, &w_true, &q).unwrap() - enumerate_prob(&vp, &w_false, &q).unwrap();
        assert!((g.grad[&FactId { group: 0, member: 0 }] - diff).abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let mut src = String::from("rel a(int).\nrel q(int).\nq(X) :- a(X).\n");
        for i in 0..=ORACLE_VAR_CAP {
            src.push_str(&format!("0.5::a({i}).\n"));
        }
        let prog = parse_source(&src).unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        assert!(matches!(
            enumerate_prob(&vp, &w, &ground_query("q", &[Value::Int(0)])),
            Err(OracleError::TooManyWorlds { .. })
        ));
    }

    #[test]
    fn stratified_negation_boolean_semantics() {
        let prog = parse_source(
            "rel e(int).\nrel p(int).\nrel q(int).\n1.0::e(0).\n1.0::e(1).\n1.0::p(0).\nq(X) :- e(X), not p(X).",
        )
        .unwrap();
        let vp = validate(&prog).unwrap();
        let w = weights_of(&prog);
        assert_eq!(enumerate_prob(&vp, &w, &ground_query("q", &[Value::Int(1)])).unwrap(), 1.0);
        assert_eq!(enumerate_prob(&vp, &w, &ground_query("q", &[Value::Int(0)])).unwrap(), 0.0);
    }
}
