//! The image query language: a small first-order logic over detected objects.
//!
//! A program is a closed formula built from four relations (`HasType`,
//! `HasProperty`, `HasEmotion`, `HasRelation`), the boolean connectives and
//! the two quantifiers. Quantifiers range over the objects detected in one
//! image, so a program is a predicate on images.
//!
//! Concrete syntax, lowest to highest precedence:
//!
//! ```text
//! E := E -> E            (right associative)
//!    | E || E  | E or E
//!    | E && E  | E and E
//!    | !E      | not E
//!    | exists x. E | forall x. E     (body extends as far right as possible)
//!    | Name(arg, ...) | (E)
//! ```
//!
//! Constants are identifiers or double-quoted strings and are stored
//! case-folded. A [`Sketch`] is a program whose constant positions may hold
//! [`Hole`]s; holes print as `?1`, `?2`, ...

mod render;
mod syntax;
mod vocab;

use std::fmt;

pub(crate) use render::KEYWORDS;
pub use render::{render_constant, render_expr};
pub use syntax::{line_col, parse, parse_with_holes, ParseError, ParseFailure};
pub use vocab::{KnownVocabulary, BUILTIN_EMOTIONS, BUILTIN_PROPERTIES, BUILTIN_RELATIONS, FACE};

/// A bound variable name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    /// Returns `None` unless `name` matches `[a-zA-Z_][a-zA-Z0-9_]*`.
    pub fn new(name: &str) -> Option<Self> {
        (is_identifier(name) && !render::KEYWORDS.contains(&name.to_ascii_lowercase().as_str()))
            .then(|| Self(name.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A constant token in canonical (trimmed, lower-case) form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(String);

impl Constant {
    /// Canonicalizes `token`. Returns `None` for tokens that are empty after trimming.
    pub fn new(token: &str) -> Option<Self> {
        let canonical = canonicalize(token);
        (!canonical.is_empty()).then_some(Self(canonical))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Case-folds and trims a token. Idempotent.
pub fn canonicalize(token: &str) -> String {
    token.trim().to_lowercase()
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Ordinal of a hole within one sketch, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HoleId(pub u32);

impl fmt::Display for HoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// Which kind of constant a position expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    TypeConst,
    PropertyConst,
    EmotionConst,
    RelationConst,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::TypeConst => "type",
            Slot::PropertyConst => "property",
            Slot::EmotionConst => "emotion",
            Slot::RelationConst => "relation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    HasType,
    HasEmotion,
    HasProperty,
    HasRelation,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::HasType,
        Relation::HasEmotion,
        Relation::HasProperty,
        Relation::HasRelation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::HasType => "HasType",
            Relation::HasEmotion => "HasEmotion",
            Relation::HasProperty => "HasProperty",
            Relation::HasRelation => "HasRelation",
        }
    }

    /// Case-insensitive lookup of a relation name.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(name))
    }

    pub fn arity(self) -> usize {
        match self {
            Relation::HasRelation => 3,
            _ => 2,
        }
    }

    /// Number of leading variable arguments.
    pub fn variable_args(self) -> usize {
        self.arity() - 1
    }

    /// The slot of the trailing constant argument.
    pub fn slot(self) -> Slot {
        match self {
            Relation::HasType => Slot::TypeConst,
            Relation::HasEmotion => Slot::EmotionConst,
            Relation::HasProperty => Slot::PropertyConst,
            Relation::HasRelation => Slot::RelationConst,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Variable),
    Const(Constant),
    Hole(HoleId),
}

/// An atom `r(t1, ..., tn)`. Leading arguments are variables, the last one is
/// a constant or a hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    relation: Relation,
    args: Vec<Term>,
}

impl Predicate {
    /// Checks arity and argument kinds.
    pub fn new(relation: Relation, args: Vec<Term>) -> Result<Self, ParseError> {
        if args.len() != relation.arity() {
            return Err(ParseError::Arity {
                relation: relation.name().to_owned(),
                got: args.len(),
                want: relation.arity(),
            });
        }
        let vars = relation.variable_args();
        for (i, arg) in args.iter().enumerate() {
            let ok = if i < vars {
                matches!(arg, Term::Var(_))
            } else {
                !matches!(arg, Term::Var(_))
            };
            if !ok {
                return Err(ParseError::Syntax {
                    position: 0,
                    message: format!(
                        "argument {} of {} must be a {}",
                        i + 1,
                        relation,
                        if i < vars { "variable" } else { "constant" }
                    ),
                });
            }
        }
        Ok(Self { relation, args })
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn subject(&self) -> &Variable {
        match &self.args[0] {
            Term::Var(v) => v,
            _ => unreachable!("first argument is always a variable"),
        }
    }

    /// Second variable of a `HasRelation` atom.
    pub fn object(&self) -> Option<&Variable> {
        match (self.relation, &self.args[1]) {
            (Relation::HasRelation, Term::Var(v)) => Some(v),
            _ => None,
        }
    }

    /// The trailing constant-position argument.
    pub fn value(&self) -> &Term {
        self.args.last().expect("predicates have at least two args")
    }
}

/// Convenience constructor used throughout the tests and the translator.
pub fn pred(relation: Relation, vars: &[&str], value: &str) -> QueryExpr {
    let mut args: Vec<Term> = vars
        .iter()
        .map(|v| Term::Var(Variable::new(v).expect("valid variable")))
        .collect();
    args.push(Term::Const(Constant::new(value).expect("nonempty constant")));
    QueryExpr::Pred(Predicate::new(relation, args).expect("well-formed predicate"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryExpr {
    Pred(Predicate),
    Implies(Box<QueryExpr>, Box<QueryExpr>),
    And(Box<QueryExpr>, Box<QueryExpr>),
    Or(Box<QueryExpr>, Box<QueryExpr>),
    Not(Box<QueryExpr>),
    Exists(Variable, Box<QueryExpr>),
    Forall(Variable, Box<QueryExpr>),
}

impl QueryExpr {
    pub fn implies(l: QueryExpr, r: QueryExpr) -> Self {
        Self::Implies(Box::new(l), Box::new(r))
    }

    pub fn and(l: QueryExpr, r: QueryExpr) -> Self {
        Self::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: QueryExpr, r: QueryExpr) -> Self {
        Self::Or(Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: QueryExpr) -> Self {
        Self::Not(Box::new(e))
    }

    pub fn exists(var: &str, body: QueryExpr) -> Self {
        Self::Exists(Variable::new(var).expect("valid variable"), Box::new(body))
    }

    pub fn forall(var: &str, body: QueryExpr) -> Self {
        Self::Forall(Variable::new(var).expect("valid variable"), Box::new(body))
    }

    /// Left-nested conjunction of `parts`. Panics on an empty list.
    pub fn conjunction(parts: impl IntoIterator<Item = QueryExpr>) -> Self {
        parts
            .into_iter()
            .reduce(QueryExpr::and)
            .expect("conjunction of at least one formula")
    }

    /// Number of AST nodes: quantifiers, connectives, predicates and terms
    /// count one each. Quantifier binders are not separate nodes.
    pub fn ast_size(&self) -> usize {
        match self {
            QueryExpr::Pred(p) => 1 + p.args.len(),
            QueryExpr::Implies(l, r) | QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                1 + l.ast_size() + r.ast_size()
            }
            QueryExpr::Not(e) | QueryExpr::Exists(_, e) | QueryExpr::Forall(_, e) => {
                1 + e.ast_size()
            }
        }
    }

    /// Visits every predicate in left-to-right order.
    pub fn for_each_pred<'a>(&'a self, f: &mut impl FnMut(&'a Predicate)) {
        match self {
            QueryExpr::Pred(p) => f(p),
            QueryExpr::Implies(l, r) | QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                l.for_each_pred(f);
                r.for_each_pred(f);
            }
            QueryExpr::Not(e) | QueryExpr::Exists(_, e) | QueryExpr::Forall(_, e) => {
                e.for_each_pred(f)
            }
        }
    }

    /// Hole ids in left-to-right order.
    pub fn hole_ids(&self) -> Vec<HoleId> {
        let mut out = Vec::new();
        self.for_each_pred(&mut |p| {
            if let Term::Hole(id) = p.value() {
                out.push(*id);
            }
        });
        out
    }

    pub fn is_hole_free(&self) -> bool {
        let mut free = true;
        self.for_each_pred(&mut |p| free &= !matches!(p.value(), Term::Hole(_)));
        free
    }

    /// All `(slot, constant)` pairs mentioned by the program.
    pub fn constants(&self) -> Vec<(Slot, Constant)> {
        let mut out = Vec::new();
        self.for_each_pred(&mut |p| {
            if let Term::Const(c) = p.value() {
                out.push((p.relation.slot(), c.clone()));
            }
        });
        out
    }

    /// Replaces each hole by the constant `fill` returns for it. Holes for
    /// which `fill` returns `None` are kept.
    pub fn fill_holes(&self, fill: &impl Fn(HoleId) -> Option<Constant>) -> QueryExpr {
        match self {
            QueryExpr::Pred(p) => {
                let args = p
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Hole(id) => fill(*id).map(Term::Const).unwrap_or(Term::Hole(*id)),
                        other => other.clone(),
                    })
                    .collect();
                QueryExpr::Pred(Predicate {
                    relation: p.relation,
                    args,
                })
            }
            QueryExpr::Implies(l, r) => QueryExpr::implies(l.fill_holes(fill), r.fill_holes(fill)),
            QueryExpr::And(l, r) => QueryExpr::and(l.fill_holes(fill), r.fill_holes(fill)),
            QueryExpr::Or(l, r) => QueryExpr::or(l.fill_holes(fill), r.fill_holes(fill)),
            QueryExpr::Not(e) => QueryExpr::not(e.fill_holes(fill)),
            QueryExpr::Exists(v, e) => QueryExpr::Exists(v.clone(), Box::new(e.fill_holes(fill))),
            QueryExpr::Forall(v, e) => QueryExpr::Forall(v.clone(), Box::new(e.fill_holes(fill))),
        }
    }

    /// Maximum quantifier nesting depth.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            QueryExpr::Pred(_) => 0,
            QueryExpr::Implies(l, r) | QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                l.quantifier_depth().max(r.quantifier_depth())
            }
            QueryExpr::Not(e) => e.quantifier_depth(),
            QueryExpr::Exists(_, e) | QueryExpr::Forall(_, e) => 1 + e.quantifier_depth(),
        }
    }

    /// Checks that every variable is bound and that no quantifier shadows an
    /// enclosing binder.
    pub fn check_closed(&self) -> Result<(), ParseError> {
        fn walk<'a>(e: &'a QueryExpr, scope: &mut Vec<&'a Variable>) -> Result<(), ParseError> {
            match e {
                QueryExpr::Pred(p) => {
                    for arg in &p.args {
                        if let Term::Var(v) = arg {
                            if !scope.contains(&v) {
                                return Err(ParseError::UnboundVariable(v.0.clone()));
                            }
                        }
                    }
                    Ok(())
                }
                QueryExpr::Implies(l, r) | QueryExpr::And(l, r) | QueryExpr::Or(l, r) => {
                    walk(l, scope)?;
                    walk(r, scope)
                }
                QueryExpr::Not(e) => walk(e, scope),
                QueryExpr::Exists(v, body) | QueryExpr::Forall(v, body) => {
                    if scope.contains(&v) {
                        return Err(ParseError::Shadowing(v.0.clone()));
                    }
                    scope.push(v);
                    let res = walk(body, scope);
                    scope.pop();
                    res
                }
            }
        }
        walk(self, &mut Vec::new())
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_expr(self))
    }
}

/// A placeholder for a constant the parser did not recognize.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hole {
    pub id: HoleId,
    /// The unrecognized source token, as written.
    pub origin_token: String,
    pub slot: Slot,
    /// Byte offset of the token in the source text.
    pub position: usize,
}

/// A program with zero or more holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sketch {
    expr: QueryExpr,
    holes: Vec<Hole>,
}

impl Sketch {
    /// Builds a sketch, checking that `holes` indexes exactly the holes in `expr`.
    pub fn new(expr: QueryExpr, mut holes: Vec<Hole>) -> Result<Self, ParseError> {
        holes.sort_by_key(|h| h.id);
        let mut in_expr = expr.hole_ids();
        in_expr.sort();
        let indexed: Vec<HoleId> = holes.iter().map(|h| h.id).collect();
        if in_expr != indexed {
            return Err(ParseError::Syntax {
                position: 0,
                message: format!("hole index {indexed:?} does not match expression holes {in_expr:?}"),
            });
        }
        Ok(Self { expr, holes })
    }

    pub fn complete(expr: QueryExpr) -> Self {
        debug_assert!(expr.is_hole_free());
        Self {
            expr,
            holes: Vec::new(),
        }
    }

    pub fn expr(&self) -> &QueryExpr {
        &self.expr
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn is_complete(&self) -> bool {
        self.holes.is_empty()
    }

    pub fn into_program(self) -> Option<QueryExpr> {
        self.holes.is_empty().then_some(self.expr)
    }

    /// Fills the holes `fill` answers for and drops them from the index.
    pub fn fill(&self, fill: impl Fn(&Hole) -> Option<Constant>) -> Sketch {
        let chosen: Vec<(HoleId, Constant)> = self
            .holes
            .iter()
            .filter_map(|h| fill(h).map(|c| (h.id, c)))
            .collect();
        let lookup = |id: HoleId| {
            chosen
                .iter()
                .find(|(hid, _)| *hid == id)
                .map(|(_, c)| c.clone())
        };
        Sketch {
            expr: self.expr.fill_holes(&lookup),
            holes: self
                .holes
                .iter()
                .filter(|h| lookup(h.id).is_none())
                .cloned()
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        render_expr(&self.expr)
    }
}

impl fmt::Display for Sketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
