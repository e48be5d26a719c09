//! Pretty-printer emitting source that parses back to the same AST.

use super::ast::*;
use std::fmt::Write;

fn write_expr(out: &mut String, expr: &Expr, parent_mul: bool) {
    match expr {
        Expr::Term(t) => {
            let _ = write!(out, "{t}");
        }
        Expr::Binary(op, a, b) => {
            // The grammar has no parentheses in guard expressions; printing
            // relies on left-associative parsing with `*` binding tighter.
            let child_mul = *op == ArithOp::Mul;
            write_expr(out, a, child_mul);
            let _ = write!(out, " {op} ");
            write_expr(out, b, child_mul);
            let _ = parent_mul;
        }
    }
}

fn write_atom(out: &mut String, atom: &Atom) {
    let _ = write!(out, "{}(", atom.relation);
    for (i, t) in atom.terms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{t}");
    }
    out.push(')');
}

fn write_slot(out: &mut String, slot: &ProbSlot) {
    match slot {
        ProbSlot::Constant(p) => {
            if p.fract() == 0.0 {
                let _ = write!(out, "{:.1}", p);
            } else {
                let _ = write!(out, "{p}");
            }
        }
        ProbSlot::NeuralOutput { head, index } => {
            let _ = write!(out, "nn({head}, {index})");
        }
    }
}

/// Render a program in `.nsl` concrete syntax.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for rel in &program.relations {
        let _ = write!(out, "rel {}(", rel.name);
        for (i, ty) in rel.column_types.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{ty}");
        }
        out.push_str(").\n");
    }
    for group in &program.fact_groups {
        for (i, m) in group.members.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            write_slot(&mut out, &m.slot);
            out.push_str("::");
            write_atom(&mut out, &m.atom);
        }
        out.push_str(".\n");
    }
    for rule in &program.rules {
        write_atom(&mut out, &rule.head);
        if !rule.body.is_empty() {
            out.push_str(" :- ");
            for (i, lit) in rule.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match lit {
                    Literal::Pos(a) => write_atom(&mut out, a),
                    Literal::Neg(a) => {
                        out.push_str("not ");
                        write_atom(&mut out, a);
                    }
                    Literal::Guard { lhs, op, rhs, .. } => {
                        write_expr(&mut out, lhs, false);
                        let _ = write!(out, " {op} ");
                        write_expr(&mut out, rhs, false);
                    }
                }
            }
        }
        out.push_str(".\n");
    }
    for q in &program.queries {
        out.push_str("query ");
        write_atom(&mut out, &q.atom);
        out.push_str(".\n");
    }
    out
}

/// AST equality up to source positions, for round-trip checks.
pub fn structurally_equal(a: &Program, b: &Program) -> bool {
    fn atom_eq(a: &Atom, b: &Atom) -> bool {
        a.same_shape(b)
    }
    fn lit_eq(a: &Literal, b: &Literal) -> bool {
        match (a, b) {
            (Literal::Pos(x), Literal::Pos(y)) | (Literal::Neg(x), Literal::Neg(y)) => atom_eq(x, y),
            (
                Literal::Guard { lhs: l1, op: o1, rhs: r1, .. },
                Literal::Guard { lhs: l2, op: o2, rhs: r2, .. },
            ) => l1 == l2 && o1 == o2 && r1 == r2,
            _ => false,
        }
    }
    a.relations.len() == b.relations.len()
        && a.relations
            .iter()
            .zip(&b.relations)
            .all(|(x, y)| x.name == y.name && x.column_types == y.column_types)
        && a.rules.len() == b.rules.len()
        && a.rules.iter().zip(&b.rules).all(|(x, y)| {
            atom_eq(&x.head, &y.head)
                && x.body.len() == y.body.len()
                && x.body.iter().zip(&y.body).all(|(p, q)| lit_eq(p, q))
        })
        && a.fact_groups.len() == b.fact_groups.len()
        && a.fact_groups.iter().zip(&b.fact_groups).all(|(x, y)| {
            x.kind == y.kind
                && x.members.len() == y.members.len()
                && x.members
                    .iter()
                    .zip(&y.members)
                    .all(|(p, q)| atom_eq(&p.atom, &q.atom) && p.slot == q.slot)
        })
        && a.queries.len() == b.queries.len()
        && a.queries.iter().zip(&b.queries).all(|(x, y)| atom_eq(&x.atom, &y.atom))
}
