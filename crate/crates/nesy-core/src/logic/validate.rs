//! Semantic checks: declarations, range restriction, stratification.

use super::ast::*;
use super::LogicError;
use std::collections::{HashMap, HashSet};

/// A checked program plus the stratum index assigned to every relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProgram {
    pub program: Program,
    pub strata: HashMap<String, usize>,
}

impl ValidatedProgram {
    pub fn max_stratum(&self) -> usize {
        self.strata.values().copied().max().unwrap_or(0)
    }
}

pub fn validate(program: &Program) -> Result<ValidatedProgram, LogicError> {
    let mut decls: HashMap<&str, &RelationDecl> = HashMap::new();
    for rel in &program.relations {
        if decls.insert(&rel.name, rel).is_some() {
            return Err(LogicError::DuplicateRelation { name: rel.name.clone(), pos: rel.pos });
        }
    }

    for rule in &program.rules {
        check_atom(&decls, &rule.head)?;
        for lit in &rule.body {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => check_atom(&decls, a)?,
                Literal::Guard { .. } => {}
            }
        }
        check_range_restriction(rule)?;
    }

    for group in &program.fact_groups {
        check_fact_group(&decls, group)?;
    }

    for q in &program.queries {
        check_atom(&decls, &q.atom)?;
    }

    let strata = stratify(program)?;
    Ok(ValidatedProgram { program: program.clone(), strata })
}

fn check_atom(decls: &HashMap<&str, &RelationDecl>, atom: &Atom) -> Result<(), LogicError> {
    let Some(decl) = decls.get(atom.relation.as_str()) else {
        return Err(LogicError::UnknownRelation { name: atom.relation.clone(), pos: atom.pos });
    };
    if atom.terms.len() != decl.arity() {
        return Err(LogicError::ArityMismatch {
            name: atom.relation.clone(),
            expected: decl.arity(),
            found: atom.terms.len(),
            pos: atom.pos,
        });
    }
    for (term, ty) in atom.terms.iter().zip(&decl.column_types) {
        if let Term::Const(v) = term {
            let ok = match (v, ty) {
                (Value::Int(_), ColumnType::Int) => true,
                (Value::Sym(_), ColumnType::Sym) => true,
                (Value::Float(_), ColumnType::Float) => true,
                // Int literals are accepted in float columns.
                (Value::Int(_), ColumnType::Float) => true,
                _ => false,
            };
            if !ok {
                return Err(LogicError::TypeMismatch {
                    relation: atom.relation.clone(),
                    expected: *ty,
                    found: v.column_type(),
                    pos: atom.pos,
                });
            }
        }
    }
    Ok(())
}

fn atom_vars(atom: &Atom) -> impl Iterator<Item = &String> {
    atom.terms.iter().filter_map(|t| match t {
        Term::Var(v) => Some(v),
        Term::Const(_) => None,
    })
}

/// Range restriction with guard binding: a variable is bound if it occurs in
/// a positive body atom, or on one side of an `==` guard whose other side is
/// already bound. Head variables, negated-atom variables, and all remaining
/// guard variables must be bound.
fn check_range_restriction(rule: &Rule) -> Result<(), LogicError> {
    let mut bound: HashSet<String> = HashSet::new();
    for lit in &rule.body {
        if let Literal::Pos(a) = lit {
            bound.extend(atom_vars(a).cloned());
        }
    }
    // Propagate through `==` guards until a fixpoint: `X == expr` binds X
    // once every variable of `expr` is bound.
    loop {
        let mut changed = false;
        for lit in &rule.body {
            if let Literal::Guard { lhs, op: CmpOp::Eq, rhs, .. } = lit {
                let mut lv = Vec::new();
                let mut rv = Vec::new();
                lhs.vars(&mut lv);
                rhs.vars(&mut rv);
                let l_bound = lv.iter().all(|v| bound.contains(v));
                let r_bound = rv.iter().all(|v| bound.contains(v));
                if l_bound && !r_bound {
                    if let Expr::Term(Term::Var(v)) = rhs {
                        bound.insert(v.clone());
                        changed = true;
                    }
                }
                if r_bound && !l_bound {
                    if let Expr::Term(Term::Var(v)) = lhs {
                        bound.insert(v.clone());
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    for v in atom_vars(&rule.head) {
        if !bound.contains(v.as_str()) {
            return Err(LogicError::RangeRestriction {
                rule: rule.head.relation.clone(),
                variable: v.clone(),
                pos: rule.pos,
            });
        }
    }
    for lit in &rule.body {
        match lit {
            Literal::Neg(a) => {
                for v in atom_vars(a) {
                    if !bound.contains(v.as_str()) {
                        return Err(LogicError::RangeRestriction {
                            rule: rule.head.relation.clone(),
                            variable: v.clone(),
                            pos: a.pos,
                        });
                    }
                }
            }
            Literal::Guard { lhs, rhs, pos, .. } => {
                let mut vs = Vec::new();
                lhs.vars(&mut vs);
                rhs.vars(&mut vs);
                for v in vs {
                    if !bound.contains(v.as_str()) {
                        return Err(LogicError::RangeRestriction {
                            rule: rule.head.relation.clone(),
                            variable: v,
                            pos: *pos,
                        });
                    }
                }
            }
            Literal::Pos(_) => {}
        }
    }
    Ok(())
}

fn check_fact_group(decls: &HashMap<&str, &RelationDecl>, group: &FactGroup) -> Result<(), LogicError> {
    let rel = group.relation().to_string();
    let mut const_sum = 0.0;
    let mut all_const = true;
    for m in &group.members {
        check_atom(decls, &m.atom)?;
        if m.atom.relation != rel {
            return Err(LogicError::MixedFactGroup { pos: group.pos });
        }
        if atom_vars(&m.atom).next().is_some() {
            return Err(LogicError::NonGroundFact { pos: m.atom.pos });
        }
        match &m.slot {
            ProbSlot::Constant(p) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(LogicError::BadProbability { value: *p, pos: m.atom.pos });
                }
                const_sum += p;
            }
            ProbSlot::NeuralOutput { .. } => all_const = false,
        }
    }
    if group.kind == FactGroupKind::CategoricalAd && all_const && (const_sum - 1.0).abs() > 1e-9 {
        return Err(LogicError::BadAdSum { sum: const_sum, pos: group.pos });
    }
    Ok(())
}

/// Assign strata: `stratum(head) >= stratum(b)` for positive body atoms and
/// `>= stratum(b) + 1` for negated ones. Failure to stabilize means a
/// relation depends negatively on itself through a cycle.
fn stratify(program: &Program) -> Result<HashMap<String, usize>, LogicError> {
    let mut strata: HashMap<String, usize> = program.relations.iter().map(|r| (r.name.clone(), 0)).collect();
    let n = program.relations.len().max(1);
    for round in 0..=n * n {
        let mut changed = false;
        for rule in &program.rules {
            let mut need = 0usize;
            for lit in &rule.body {
                match lit {
                    Literal::Pos(a) => need = need.max(strata[&a.relation]),
                    Literal::Neg(a) => need = need.max(strata[&a.relation] + 1),
                    Literal::Guard { .. } => {}
                }
            }
            let cur = strata.get_mut(&rule.head.relation).expect("declared");
            if *cur < need {
                *cur = need;
                changed = true;
            }
        }
        if !changed {
            return Ok(strata);
        }
        if round == n * n {
            break;
        }
    }
    // Relations pushed beyond the relation count are on a negative cycle.
    let mut cycle: Vec<String> = strata
        .iter()
        .filter(|(_, s)| **s >= n)
        .map(|(k, _)| k.clone())
        .collect();
    cycle.sort();
    Err(LogicError::UnstratifiableNegation { cycle })
}

/// True when the relation's value can be influenced by a non-certain fact
/// slot (neural, or constant probability strictly between 0 and 1), directly
/// or through rules. Proof-based negation over such relations is rejected at
/// evaluation setup.
pub fn uncertain_relations(program: &Program) -> HashSet<String> {
    let mut uncertain: HashSet<String> = HashSet::new();
    for group in &program.fact_groups {
        let certain = group.members.iter().all(|m| matches!(m.slot, ProbSlot::Constant(p) if p == 0.0 || p == 1.0));
        if !certain {
            uncertain.insert(group.relation().to_string());
        }
    }
    loop {
        let mut changed = false;
        for rule in &program.rules {
            if uncertain.contains(&rule.head.relation) {
                continue;
            }
            let tainted = rule.body.iter().any(|lit| match lit {
                Literal::Pos(a) | Literal::Neg(a) => uncertain.contains(&a.relation),
                Literal::Guard { .. } => false,
            });
            if tainted {
                uncertain.insert(rule.head.relation.clone());
                changed = true;
            }
        }
        if !changed {
            return uncertain;
        }
    }
}
