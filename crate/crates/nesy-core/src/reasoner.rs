//! Bottom-up evaluation of a validated program under a provenance semiring:
//! stratified, semi-naive, with on-the-fly grounding during joins.

use crate::logic::{
    uncertain_relations, Atom, CmpOp, Expr, FactGroupKind, Literal, ProbSlot, Rule, Term, Tuple,
    ValidatedProgram, Value,
};
use crate::oracle::{arith, compare, reorder_body};
use crate::provenance::{
    sr_add, sr_mul, sr_one, wmc, wmc_grad, FactId, GradProb, ProofSet, ProvenanceError, Proof,
    SemiringSpec, Tag, WeightTable,
};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReasonerError {
    #[error("no neural output supplied for head `{0}`")]
    MissingHead(String),
    #[error("output index {index} out of range for head `{head}` (length {len})")]
    IndexOutOfRange { head: String, index: usize, len: usize },
    #[error("negative probability {value} for head `{head}`")]
    NegativeProbability { head: String, value: f64 },
    #[error("evaluation did not reach a fixpoint within {bound} iterations")]
    NonTermination { bound: u64 },
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("proof-based negation over uncertain relation `{relation}` is not supported")]
    ProbabilisticNegation { relation: String },
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
}

/// Derived tuples of one relation with their provenance tags.
#[derive(Debug, Clone, Default)]
pub struct TaggedRelation {
    pub tuples: BTreeMap<Tuple, Tag>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalStats {
    pub iterations: u64,
    pub tuples_derived: u64,
    pub wall_micros: u64,
}

/// Single-owner evaluation state over a shared validated program.
pub struct EvalContext<'p> {
    pub program: &'p ValidatedProgram,
    pub semiring: SemiringSpec,
    pub weights: WeightTable,
    pub relations: HashMap<String, TaggedRelation>,
    pub stats: EvalStats,
    evaluated: bool,
}

/// One row of a query answer.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnswer {
    pub tuple: Tuple,
    pub prob: f64,
    /// Present under the gradient-carrying semiring.
    pub grad: Option<GradProb>,
}

/// Resolve every fact slot against neural outputs and seed input tuples.
///
/// Annotated-disjunction groups whose member probabilities deviate from
/// sum 1 by more than 1e-6 are renormalized.
pub fn seed_facts<'p>(
    program: &'p ValidatedProgram,
    semiring: SemiringSpec,
    neural_outputs: &HashMap<String, Vec<f64>>,
) -> Result<EvalContext<'p>, ReasonerError> {
    let mut probs: Vec<Vec<f64>> = Vec::new();
    let mut kinds = Vec::new();
    for group in &program.program.fact_groups {
        kinds.push(group.kind);
        let mut member_probs = Vec::with_capacity(group.members.len());
        for m in &group.members {
            let p = match &m.slot {
                ProbSlot::Constant(p) => *p,
                ProbSlot::NeuralOutput { head, index } => {
                    let vec = neural_outputs.get(head).ok_or_else(|| ReasonerError::MissingHead(head.clone()))?;
                    let p = *vec.get(*index).ok_or_else(|| ReasonerError::IndexOutOfRange {
                        head: head.clone(),
                        index: *index,
                        len: vec.len(),
                    })?;
                    if p < 0.0 {
                        return Err(ReasonerError::NegativeProbability { head: head.clone(), value: p });
                    }
                    p
                }
            };
            member_probs.push(p);
        }
        if group.kind == FactGroupKind::CategoricalAd {
            let sum: f64 = member_probs.iter().sum();
            if (sum - 1.0).abs() > 1e-6 && sum > 0.0 {
                for p in &mut member_probs {
                    *p /= sum;
                }
            }
        }
        probs.push(member_probs);
    }
    let weights = WeightTable { probs, kinds };

    let mut relations: HashMap<String, TaggedRelation> = HashMap::new();
    for (gi, group) in program.program.fact_groups.iter().enumerate() {
        for (mi, member) in group.members.iter().enumerate() {
            let p = weights.probs[gi][mi];
            let tuple: Tuple = member
                .atom
                .terms
                .iter()
                .map(|t| match t {
                    Term::Const(c) => c.clone(),
                    Term::Var(_) => unreachable!("facts are ground"),
                })
                .collect();
            let id = FactId { group: gi, member: mi };
            let tag = match semiring {
                SemiringSpec::Boolean => Tag::Bool(p > 0.5),
                SemiringSpec::MaxMin | SemiringSpec::AddMultProb => Tag::Scalar(p),
                SemiringSpec::TopKProofs(k) | SemiringSpec::TopKProofsGrad(k) => {
                    Tag::Proofs(ProofSet::from_proofs(vec![Proof::singleton(id)], k, &weights))
                }
            };
            let rel = relations.entry(member.atom.relation.clone()).or_default();
            match rel.tuples.get(&tuple) {
                Some(existing) => {
                    let merged = sr_add(semiring, existing, &tag, &weights);
                    rel.tuples.insert(tuple, merged);
                }
                None => {
                    rel.tuples.insert(tuple, tag);
                }
            }
        }
    }

    Ok(EvalContext { program, semiring, weights, relations, stats: EvalStats::default(), evaluated: false })
}

impl<'p> EvalContext<'p> {
    fn extract_scalar(&self, tag: &Tag) -> Result<f64, ReasonerError> {
        Ok(match tag {
            Tag::Bool(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            Tag::Scalar(x) => *x,
            Tag::Proofs(ps) => wmc(ps, &self.weights)?,
        })
    }

    fn iteration_bound(&self) -> u64 {
        let mut domain: HashSet<Value> = HashSet::new();
        for rel in self.relations.values() {
            for t in rel.tuples.keys() {
                domain.extend(t.iter().cloned());
            }
        }
        for rule in &self.program.program.rules {
            for t in &rule.head.terms {
                if let Term::Const(c) = t {
                    domain.insert(c.clone());
                }
            }
            for lit in &rule.body {
                if let Literal::Pos(a) | Literal::Neg(a) = lit {
                    for t in &a.terms {
                        if let Term::Const(c) = t {
                            domain.insert(c.clone());
                        }
                    }
                }
            }
        }
        let max_arity = self.program.program.relations.iter().map(|r| r.arity()).max().unwrap_or(1).max(1);
        let d = domain.len().max(2) as u64;
        let k = self.semiring.k().unwrap_or(16).max(2) as u64;
        let rules = self.program.program.rules.len().max(1) as u64;
        d.saturating_pow(max_arity.min(6) as u32)
            .saturating_mul(rules)
            .saturating_mul(k)
            .max(64)
    }

    /// Run stratified evaluation to the fixpoint.
    pub fn evaluate(&mut self) -> Result<(), ReasonerError> {
        if self.evaluated {
            return Ok(());
        }
        let start = Instant::now();
        if self.semiring.is_proof_based() {
            let uncertain = uncertain_relations(&self.program.program);
            for rule in &self.program.program.rules {
                for lit in &rule.body {
                    if let Literal::Neg(a) = lit {
                        if uncertain.contains(&a.relation) {
                            return Err(ReasonerError::ProbabilisticNegation { relation: a.relation.clone() });
                        }
                    }
                }
            }
        }
        let bound = self.iteration_bound();
        // Non-idempotent ⊕ (noisy-or) would double-count re-derivations, so
        // AddMultProb recomputes all tags each round instead of joining
        // against deltas.
        let incremental = !matches!(self.semiring, SemiringSpec::AddMultProb);
        for stratum in 0..=self.program.max_stratum() {
            let rules: Vec<Rule> = self
                .program
                .program
                .rules
                .iter()
                .filter(|r| self.program.strata[&r.head.relation] == stratum)
                .map(reorder_body)
                .collect();
            if rules.is_empty() {
                continue;
            }
            if incremental {
                self.eval_stratum_semi_naive(&rules, bound)?;
            } else {
                self.eval_stratum_recompute(&rules, bound)?;
            }
        }
        self.stats.wall_micros = start.elapsed().as_micros() as u64;
        self.evaluated = true;
        Ok(())
    }

    fn eval_stratum_semi_naive(&mut self, rules: &[Rule], bound: u64) -> Result<(), ReasonerError> {
        // Iteration 0 joins everything; afterwards each rule re-fires only
        // through instantiations touching a changed tuple.
        let mut delta: BTreeMap<String, BTreeSet<Tuple>> = BTreeMap::new();
        let mut first = true;
        loop {
            self.stats.iterations += 1;
            if self.stats.iterations > bound {
                return Err(ReasonerError::NonTermination { bound });
            }
            let mut next_delta: BTreeMap<String, BTreeSet<Tuple>> = BTreeMap::new();
            for rule in rules {
                let positives = rule.body.iter().filter(|l| matches!(l, Literal::Pos(_))).count();
                if positives == 0 {
                    if first {
                        self.fire_rule(rule, None, &delta, &mut next_delta)?;
                    }
                    continue;
                }
                if first {
                    self.fire_rule(rule, None, &delta, &mut next_delta)?;
                } else {
                    for pivot in 0..positives {
                        self.fire_rule(rule, Some(pivot), &delta, &mut next_delta)?;
                    }
                }
            }
            if next_delta.values().all(|s| s.is_empty()) {
                return Ok(());
            }
            delta = next_delta;
            first = false;
        }
    }

    fn eval_stratum_recompute(&mut self, rules: &[Rule], bound: u64) -> Result<(), ReasonerError> {
        // Seeds for this stratum's head relations stay as the base; derived
        // contributions are re-accumulated from scratch every round.
        let heads: HashSet<String> = rules.iter().map(|r| r.head.relation.clone()).collect();
        let base: HashMap<String, TaggedRelation> = heads
            .iter()
            .map(|h| (h.clone(), self.relations.get(h).cloned().unwrap_or_default()))
            .collect();
        loop {
            self.stats.iterations += 1;
            if self.stats.iterations > bound {
                return Err(ReasonerError::NonTermination { bound });
            }
            let mut fresh = base.clone();
            for rule in rules {
                let mut derived: Vec<(Tuple, Tag)> = Vec::new();
                self.ground(rule, 0, &mut HashMap::new(), sr_one(self.semiring), None, 0, &BTreeMap::new(), &mut derived)?;
                let target = fresh.get_mut(&rule.head.relation).expect("head in stratum");
                for (tuple, tag) in derived {
                    let merged = match target.tuples.get(&tuple) {
                        Some(existing) => sr_add(self.semiring, existing, &tag, &self.weights),
                        None => tag,
                    };
                    target.tuples.insert(tuple, merged);
                }
            }
            let mut changed = false;
            for (name, rel) in &fresh {
                let old = self.relations.get(name);
                let same = old.is_some_and(|o| {
                    o.tuples.len() == rel.tuples.len()
                        && rel.tuples.iter().all(|(t, tag)| o.tuples.get(t).is_some_and(|ot| ot.converged(tag)))
                });
                if !same {
                    changed = true;
                }
            }
            for (name, rel) in fresh {
                self.stats.tuples_derived += rel.tuples.len() as u64;
                self.relations.insert(name, rel);
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// Evaluate one rule, optionally restricting the `pivot`-th positive
    /// literal to the delta, and merge results into the head relation.
    fn fire_rule(
        &mut self,
        rule: &Rule,
        pivot: Option<usize>,
        delta: &BTreeMap<String, BTreeSet<Tuple>>,
        next_delta: &mut BTreeMap<String, BTreeSet<Tuple>>,
    ) -> Result<(), ReasonerError> {
        let mut derived: Vec<(Tuple, Tag)> = Vec::new();
        self.ground(rule, 0, &mut HashMap::new(), sr_one(self.semiring), pivot, 0, delta, &mut derived)?;
        if derived.is_empty() {
            return Ok(());
        }
        let rel = self.relations.entry(rule.head.relation.clone()).or_default();
        for (tuple, tag) in derived {
            let merged = match rel.tuples.get(&tuple) {
                Some(existing) => sr_add(self.semiring, existing, &tag, &self.weights),
                None => tag,
            };
            let changed = match rel.tuples.get(&tuple) {
                Some(existing) => !existing.converged(&merged),
                None => true,
            };
            if changed {
                self.stats.tuples_derived += 1;
                next_delta.entry(rule.head.relation.clone()).or_default().insert(tuple.clone());
                rel.tuples.insert(tuple, merged);
            }
        }
        Ok(())
    }

    /// Left-to-right backtracking join. `acc` carries the ⊗-product of the
    /// matched body tags; completed bindings emit `(head_tuple, acc)`.
    #[allow(clippy::too_many_arguments)]
    fn ground(
        &self,
        rule: &Rule,
        lit_idx: usize,
        env: &mut HashMap<String, Value>,
        acc: Tag,
        pivot: Option<usize>,
        pos_seen: usize,
        delta: &BTreeMap<String, BTreeSet<Tuple>>,
        out: &mut Vec<(Tuple, Tag)>,
    ) -> Result<(), ReasonerError> {
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
                out.push((t, acc));
            }
            return Ok(());
        }
        match &rule.body[lit_idx] {
            Literal::Pos(atom) => {
                let Some(rel) = self.relations.get(&atom.relation) else { return Ok(()) };
                let restrict = pivot == Some(pos_seen);
                let empty = BTreeSet::new();
                let delta_set = delta.get(&atom.relation).unwrap_or(&empty);
                for (tuple, tag) in &rel.tuples {
                    if restrict && !delta_set.contains(tuple) {
                        continue;
                    }
                    if let Tag::Bool(false) = tag {
                        continue;
                    }
                    let mut bound = Vec::new();
                    if match_tuple(atom, tuple, env, &mut bound) {
                        let next = sr_mul(self.semiring, &acc, tag, &self.weights);
                        let dead = match &next {
                            Tag::Proofs(ps) => ps.is_empty(),
                            Tag::Scalar(x) => *x == 0.0,
                            Tag::Bool(b) => !b,
                        };
                        if !dead {
                            self.ground(rule, lit_idx + 1, env, next, pivot, pos_seen + 1, delta, out)?;
                        }
                    }
                    for b in bound {
                        env.remove(&b);
                    }
                }
                Ok(())
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
                let Some(tuple) = tuple else { return Ok(()) };
                let existing = self.relations.get(&atom.relation).and_then(|r| r.tuples.get(&tuple));
                match self.semiring {
                    SemiringSpec::Boolean => {
                        let holds = matches!(existing, Some(Tag::Bool(true)));
                        if !holds {
                            self.ground(rule, lit_idx + 1, env, acc, pivot, pos_seen, delta, out)?;
                        }
                    }
                    SemiringSpec::MaxMin | SemiringSpec::AddMultProb => {
                        let p = match existing {
                            Some(tag) => self.extract_scalar(tag)?,
                            None => 0.0,
                        };
                        let neg = Tag::Scalar(1.0 - p);
                        let next = sr_mul(self.semiring, &acc, &neg, &self.weights);
                        self.ground(rule, lit_idx + 1, env, next, pivot, pos_seen, delta, out)?;
                    }
                    SemiringSpec::TopKProofs(_) | SemiringSpec::TopKProofsGrad(_) => {
                        // The negated relation is certain (checked up front):
                        // absent or zero blocks nothing, present passes nothing.
                        let holds = match existing {
                            Some(tag) => self.extract_scalar(tag)? > 0.0,
                            None => false,
                        };
                        if !holds {
                            self.ground(rule, lit_idx + 1, env, acc, pivot, pos_seen, delta, out)?;
                        }
                    }
                }
                Ok(())
            }
            Literal::Guard { lhs, op, rhs, .. } => {
                if *op == CmpOp::Eq {
                    if let (Expr::Term(Term::Var(v)), Some(val)) = (lhs, eval_expr(rhs, env)) {
                        if !env.contains_key(v) {
                            env.insert(v.clone(), val);
                            self.ground(rule, lit_idx + 1, env, acc, pivot, pos_seen, delta, out)?;
                            env.remove(v);
                            return Ok(());
                        }
                    }
                    if let (Expr::Term(Term::Var(v)), Some(val)) = (rhs, eval_expr(lhs, env)) {
                        if !env.contains_key(v) {
                            env.insert(v.clone(), val);
                            self.ground(rule, lit_idx + 1, env, acc, pivot, pos_seen, delta, out)?;
                            env.remove(v);
                            return Ok(());
                        }
                    }
                }
                if let (Some(a), Some(b)) = (eval_expr(lhs, env), eval_expr(rhs, env)) {
                    if compare(*op, &a, &b) {
                        self.ground(rule, lit_idx + 1, env, acc, pivot, pos_seen, delta, out)?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Answer a declared query: all matching tuples with extracted
    /// probabilities (and gradients under the gradient semiring), sorted.
    pub fn query(&self, name: &str) -> Result<Vec<QueryAnswer>, ReasonerError> {
        let decl = self
            .program
            .program
            .queries
            .iter()
            .find(|q| q.name() == name)
            .ok_or_else(|| ReasonerError::UnknownQuery(name.to_string()))?;
        let mut answers = Vec::new();
        if let Some(rel) = self.relations.get(&decl.atom.relation) {
            for (tuple, tag) in &rel.tuples {
                let mut env = HashMap::new();
                let mut bound = Vec::new();
                if !match_tuple(&decl.atom, tuple, &mut env, &mut bound) {
                    continue;
                }
                match (self.semiring, tag) {
                    (SemiringSpec::TopKProofsGrad(_), Tag::Proofs(ps)) => {
                        let g = wmc_grad(ps, &self.weights)?;
                        answers.push(QueryAnswer { tuple: tuple.clone(), prob: g.value, grad: Some(g) });
                    }
                    _ => {
                        let p = self.extract_scalar(tag)?;
                        answers.push(QueryAnswer { tuple: tuple.clone(), prob: p, grad: None });
                    }
                }
            }
        }
        answers.sort_by(|a, b| a.tuple.cmp(&b.tuple));
        Ok(answers)
    }
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

fn match_tuple(atom: &Atom, tuple: &Tuple, env: &mut HashMap<String, Value>, bound_here: &mut Vec<String>) -> bool {
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
