//! The `.nsl` Datalog dialect: lexer, parser, validation, pretty-printing.
//!
//! The dialect is finite-domain Datalog with `::` probability annotations on
//! facts, `;`-chained annotated disjunctions, `nn(head, index)` neural
//! probability slots, arithmetic/comparison guards, and stratified negation.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod validate;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_program, parse_source};
pub use pretty::{pretty_print, structurally_equal};
pub use validate::{uncertain_relations, validate, ValidatedProgram};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LogicError {
    #[error("illegal character at {pos}")]
    Lex { pos: ast::Pos },
    #[error("parse error at {pos}: expected {expected}, found {found}")]
    Parse { expected: String, found: String, pos: ast::Pos },
    #[error("unsupported feature at {pos}: {feature}")]
    UnsupportedFeature { feature: String, pos: ast::Pos },
    #[error("unknown relation `{name}` at {pos}")]
    UnknownRelation { name: String, pos: ast::Pos },
    #[error("relation `{name}` declared more than once at {pos}")]
    DuplicateRelation { name: String, pos: ast::Pos },
    #[error("atom for `{name}` at {pos} has {found} terms, declaration has {expected}")]
    ArityMismatch { name: String, expected: usize, found: usize, pos: ast::Pos },
    #[error("constant of type {found} in {expected} column of `{relation}` at {pos}")]
    TypeMismatch { relation: String, expected: ast::ColumnType, found: ast::ColumnType, pos: ast::Pos },
    #[error("rule for `{rule}` is not range-restricted: variable `{variable}` at {pos}")]
    RangeRestriction { rule: String, variable: String, pos: ast::Pos },
    #[error("negation is not stratifiable; cycle through {cycle:?}")]
    UnstratifiableNegation { cycle: Vec<String> },
    #[error("fact group at {pos} mixes relations")]
    MixedFactGroup { pos: ast::Pos },
    #[error("fact at {pos} is not ground")]
    NonGroundFact { pos: ast::Pos },
    #[error("probability {value} out of [0,1] at {pos}")]
    BadProbability { value: f64, pos: ast::Pos },
    #[error("annotated disjunction probabilities sum to {sum}, expected 1")]
    BadAdSum { sum: f64, pos: ast::Pos },
}

#[cfg(test)]
mod tests {
    use super::*;

    /// MNIST Sum in the dialect: one rule over two neural digit groups.
    pub(crate) const MNIST_SUM_SRC: &str = r#"
rel d1(int).
rel d2(int).
rel sum2(int).
sum2(C) :- d1(A), d2(B), C == A + B.
nn(digit_a, 0)::d1(0); nn(digit_a, 1)::d1(1); nn(digit_a, 2)::d1(2); nn(digit_a, 3)::d1(3); nn(digit_a, 4)::d1(4); nn(digit_a, 5)::d1(5); nn(digit_a, 6)::d1(6); nn(digit_a, 7)::d1(7); nn(digit_a, 8)::d1(8); nn(digit_a, 9)::d1(9).
nn(digit_b, 0)::d2(0); nn(digit_b, 1)::d2(1); nn(digit_b, 2)::d2(2); nn(digit_b, 3)::d2(3); nn(digit_b, 4)::d2(4); nn(digit_b, 5)::d2(5); nn(digit_b, 6)::d2(6); nn(digit_b, 7)::d2(7); nn(digit_b, 8)::d2(8); nn(digit_b, 9)::d2(9).
query sum2(S).
"#;

    #[test]
    fn mnist_sum_parses() {
        let prog = parse_source(MNIST_SUM_SRC).unwrap();
        assert_eq!(prog.relations.len(), 3);
        assert_eq!(prog.rules.len(), 1);
        assert_eq!(prog.fact_groups.len(), 2);
        assert_eq!(prog.queries.len(), 1);
        assert_eq!(prog.fact_groups[0].kind, FactGroupKind::CategoricalAd);
        assert_eq!(prog.fact_groups[0].members.len(), 10);
    }

    #[test]
    fn truncated_input() {
        let err = parse_source("q() :- p(X").unwrap_err();
        match err {
            LogicError::Parse { expected, .. } => assert!(expected.contains(')'), "{expected}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_decl_parses_but_fails_validation() {
        let prog = parse_source("rel p(int).\nrel p(int).").unwrap();
        assert_eq!(prog.relations.len(), 2);
        assert!(matches!(validate(&prog), Err(LogicError::DuplicateRelation { .. })));
    }

    #[test]
    fn range_restriction_violation() {
        let prog = parse_source("rel p(int).\nrel q(int).\nq(X) :- not p(X).").unwrap();
        match validate(&prog).unwrap_err() {
            LogicError::RangeRestriction { variable, .. } => assert_eq!(variable, "X"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unstratifiable_negation() {
        let prog = parse_source(
            "rel p(int).\nrel q(int).\nrel e(int).\n1.0::e(0).\np(X) :- q(X).\nq(X) :- e(X), not p(X).",
        )
        .unwrap();
        match validate(&prog).unwrap_err() {
            LogicError::UnstratifiableNegation { cycle } => {
                assert!(cycle.contains(&"p".to_string()) && cycle.contains(&"q".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mnist_sum_single_stratum() {
        let prog = parse_source(MNIST_SUM_SRC).unwrap();
        let vp = validate(&prog).unwrap();
        assert!(vp.strata.values().all(|&s| s == 0));
    }

    #[test]
    fn guard_binding_counts_for_range_restriction() {
        // C appears only in `C == A + B`; the equality binds it.
        let prog = parse_source(MNIST_SUM_SRC).unwrap();
        assert!(validate(&prog).is_ok());
    }

    #[test]
    fn aggregation_is_rejected_with_dedicated_error() {
        let err = parse_source("rel p(int).\nc() := count(p).").unwrap_err();
        assert!(matches!(err, LogicError::UnsupportedFeature { .. }));
    }

    #[test]
    fn pretty_print_round_trip() {
        for src in [
            MNIST_SUM_SRC,
            "rel e(int, int).\nrel path(int, int).\n1.0::e(0, 1).\n0.5::e(1, 2).\npath(X, Y) :- e(X, Y).\npath(X, Y) :- path(X, Z), e(Z, Y).\nquery path(A, B).",
            "rel p(sym).\nrel q(sym).\n0.3::p(\"a\"); 0.7::p(\"b\").\nq(X) :- p(X).",
            "rel t(float).\n0.5::t(1.5).\nquery t(X).",
        ] {
            let prog = parse_source(src).unwrap();
            let printed = pretty_print(&prog);
            let reparsed = parse_source(&printed).unwrap();
            assert!(structurally_equal(&prog, &reparsed), "round trip failed for:\n{printed}");
        }
    }

    #[test]
    fn parse_error_position_in_bounds() {
        let src = "rel p(int).\np(X) :- q(X";
        let err = parse_source(src).unwrap_err();
        if let LogicError::Parse { pos, .. } = err {
            let lines: Vec<&str> = src.lines().collect();
            assert!(pos.line >= 1 && pos.line <= lines.len());
            assert!(pos.col >= 1 && pos.col <= lines[pos.line - 1].len() + 1);
        } else {
            panic!("expected parse error");
        }
    }

    #[test]
    fn validate_is_idempotent() {
        let prog = parse_source(MNIST_SUM_SRC).unwrap();
        let a = validate(&prog).unwrap();
        let b = validate(&prog).unwrap();
        assert_eq!(a, b);
    }
}
