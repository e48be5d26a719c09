//! AST for the `.nsl` logic dialect.

use ordered_float::OrderedFloat;
use std::fmt;

/// Line/column position in the source, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Sym,
    Float,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int => write!(f, "int"),
            ColumnType::Sym => write!(f, "sym"),
            ColumnType::Float => write!(f, "float"),
        }
    }
}

/// A ground constant. Floats are wrapped so tuples can be hashed and ordered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(String),
    Float(OrderedFloat<f64>),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int,
            Value::Sym(_) => ColumnType::Sym,
            Value::Float(_) => ColumnType::Float,
        }
    }

    pub fn float(v: f64) -> Value {
        Value::Float(OrderedFloat(v))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write!(f, "\"{s}\""),
            Value::Float(x) => write!(f, "{}", x.0),
        }
    }
}

/// A ground tuple, used as a relation key.
pub type Tuple = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub terms: Vec<Term>,
    pub pos: Pos,
}

impl Atom {
    /// Structural equality ignoring source positions.
    pub fn same_shape(&self, other: &Atom) -> bool {
        self.relation == other.relation && self.terms == other.terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        };
        write!(f, "{s}")
    }
}

/// Arithmetic expression appearing in a guard.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Term(Term),
    Binary(ArithOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Term(Term::Var(v)) => out.push(v.clone()),
            Expr::Term(Term::Const(_)) => {}
            Expr::Binary(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Guard {
        lhs: Expr,
        op: CmpOp,
        rhs: Expr,
        pos: Pos,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationDecl {
    pub name: String,
    pub column_types: Vec<ColumnType>,
    pub pos: Pos,
}

impl RelationDecl {
    pub fn arity(&self) -> usize {
        self.column_types.len()
    }
}

/// Where a fact's probability comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbSlot {
    Constant(f64),
    /// Index into the output vector of the named neural head.
    NeuralOutput { head: String, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactGroupKind {
    /// Each member holds independently with its own probability.
    Independent,
    /// Exactly one member holds per possible world (annotated disjunction).
    CategoricalAd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactMember {
    pub atom: Atom,
    pub slot: ProbSlot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactGroup {
    pub kind: FactGroupKind,
    pub members: Vec<FactMember>,
    pub pos: Pos,
}

impl FactGroup {
    /// Relation name shared by all members (enforced by validate).
    pub fn relation(&self) -> &str {
        &self.members[0].atom.relation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDecl {
    pub atom: Atom,
    pub pos: Pos,
}

impl QueryDecl {
    /// Queries are addressed by their relation name.
    pub fn name(&self) -> &str {
        &self.atom.relation
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub relations: Vec<RelationDecl>,
    pub rules: Vec<Rule>,
    pub fact_groups: Vec<FactGroup>,
    pub queries: Vec<QueryDecl>,
}

impl Program {
    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }
}
