//! Template English rendering of complete programs.

use std::collections::BTreeSet;

use crate::annotations::Album;
use crate::dsl::{Constant, Predicate, QueryExpr, Relation, Term, Variable};

/// Plain-English description of the images `program` selects.
pub fn explain(program: &QueryExpr) -> String {
    explain_named(program, &BTreeSet::new())
}

/// Like [`explain`], phrasing the album's tag names as names rather than
/// object kinds.
pub fn explain_for(program: &QueryExpr, album: &Album) -> String {
    explain_named(program, album.vocabulary().tags())
}

pub fn explain_named(program: &QueryExpr, names: &BTreeSet<Constant>) -> String {
    let body = Phrasing { names }.clause(program);
    format!("Images where {body}.")
}

struct Phrasing<'a> {
    names: &'a BTreeSet<Constant>,
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.to_string(),
        Term::Const(c) => c.to_string(),
        Term::Hole(h) => h.to_string(),
    }
}

fn flatten_and<'e>(e: &'e QueryExpr, out: &mut Vec<&'e QueryExpr>) {
    match e {
        QueryExpr::And(l, r) => {
            flatten_and(l, out);
            flatten_and(r, out);
        }
        other => out.push(other),
    }
}

fn type_guard<'e>(e: &'e QueryExpr, var: &Variable) -> Option<&'e Constant> {
    match e {
        QueryExpr::Pred(p) if p.relation() == Relation::HasType && p.subject() == var => match p.value() {
            Term::Const(c) => Some(c),
            _ => None,
        },
        _ => None,
    }
}

#[derive(PartialEq)]
enum Op {
    And,
    Or,
    Implies,
}

fn op(e: &QueryExpr) -> Option<Op> {
    match e {
        QueryExpr::And(..) => Some(Op::And),
        QueryExpr::Or(..) => Some(Op::Or),
        QueryExpr::Implies(..) => Some(Op::Implies),
        _ => None,
    }
}

impl Phrasing<'_> {
    /// "a flower y" or "alice (x)".
    fn described(&self, kind: &Constant, var: &Variable) -> String {
        if self.names.contains(kind) {
            format!("{kind} ({var})")
        } else {
            format!("{} {kind} {var}", article(kind.as_str()))
        }
    }

    fn atom(&self, p: &Predicate, negated: bool) -> String {
        let s = p.subject();
        let v = term(p.value());
        let (yes, no) = match p.relation() {
            Relation::HasType => {
                let kind = match p.value() {
                    Term::Const(c) if self.names.contains(c) => v.clone(),
                    _ => format!("{} {v}", article(&v)),
                };
                (format!("is {kind}"), format!("is not {kind}"))
            }
            Relation::HasProperty => match v.as_str() {
                "smiling" => ("is smiling".into(), "is not smiling".into()),
                "eyesopen" => ("has eyes open".into(), "does not have eyes open".into()),
                "mouthopen" => ("has mouth open".into(), "does not have mouth open".into()),
                "beard" | "mustache" => (format!("has a {v}"), format!("does not have a {v}")),
                "eyeglasses" | "sunglasses" => (format!("wears {v}"), format!("does not wear {v}")),
                _ => (format!("has property {v}"), format!("does not have property {v}")),
            },
            Relation::HasEmotion => {
                let mood = if v == "fear" { "afraid" } else { v.as_str() };
                (format!("looks {mood}"), format!("does not look {mood}"))
            }
            Relation::HasRelation => {
                let o = p.object().map_or_else(String::new, Variable::to_string);
                match v.as_str() {
                    "above" | "below" | "inside" => (format!("is {v} {o}"), format!("is not {v} {o}")),
                    "left" | "right" => (format!("is {v} of {o}"), format!("is not {v} of {o}")),
                    "nextto" => (format!("is next to {o}"), format!("is not next to {o}")),
                    "contains" => (format!("contains {o}"), format!("does not contain {o}")),
                    _ => (format!("has relation {v} to {o}"), format!("does not have relation {v} to {o}")),
                }
            }
        };
        format!("{s} {}", if negated { no } else { yes })
    }

    fn existential(&self, e: &QueryExpr, negated: bool) -> String {
        let mut vars = Vec::new();
        let mut body = e;
        while let QueryExpr::Exists(v, b) = body {
            vars.push(v);
            body = b;
        }
        let mut conjuncts = Vec::new();
        flatten_and(body, &mut conjuncts);
        let mut described = Vec::new();
        for var in &vars {
            let guard = conjuncts.iter().position(|c| type_guard(c, var).is_some());
            match guard {
                Some(k) => {
                    let kind = type_guard(conjuncts.remove(k), var).expect("found above");
                    described.push(self.described(kind, var));
                }
                None => described.push(format!("an object {var}")),
            }
        }
        let rest = self.join(&conjuncts, " and ", Op::And);
        let subject = described.join(" and ");
        let head = if !negated {
            format!("there is {subject}")
        } else if vars.len() == 1 {
            format!("there is no {}", subject.split_once(' ').map_or(subject.as_str(), |(_, s)| s))
        } else {
            format!("it is not the case that there is {subject}")
        };
        if rest.is_empty() {
            head
        } else {
            format!("{head} such that {rest}")
        }
    }

    fn universal(&self, var: &Variable, body: &QueryExpr) -> String {
        if let QueryExpr::Implies(guard, rest) = body {
            if let Some(kind) = type_guard(guard, var) {
                let who = if self.names.contains(kind) {
                    format!("every object {var} that is {kind}")
                } else {
                    format!("every {kind} {var}")
                };
                return format!("{who} satisfies: {}", self.clause(rest));
            }
        }
        format!("every object {var} satisfies: {}", self.clause(body))
    }

    /// Operands of a flattened binary chain; other connectives and
    /// quantifiers that are not last get parentheses.
    fn join(&self, parts: &[&QueryExpr], sep: &str, parent: Op) -> String {
        let n = parts.len();
        parts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let text = self.clause(p);
                let quantified = matches!(p, QueryExpr::Exists(..) | QueryExpr::Forall(..));
                let other_op = op(p).is_some_and(|o| o != parent);
                if other_op || (quantified && i + 1 < n) {
                    format!("({text})")
                } else {
                    text
                }
            })
            .collect::<Vec<_>>()
            .join(sep)
    }

    fn clause(&self, e: &QueryExpr) -> String {
        match e {
            QueryExpr::Pred(p) => self.atom(p, false),
            QueryExpr::Exists(..) => self.existential(e, false),
            QueryExpr::Forall(v, body) => self.universal(v, body),
            QueryExpr::And(..) => {
                let mut parts = Vec::new();
                flatten_and(e, &mut parts);
                self.join(&parts, " and ", Op::And)
            }
            QueryExpr::Or(l, r) => self.join(&[l, r], " or ", Op::Or),
            QueryExpr::Implies(l, r) => {
                let cond = self.join(&[l], "", Op::Implies);
                format!("if {cond} then {}", self.clause(r))
            }
            QueryExpr::Not(inner) => match inner.as_ref() {
                QueryExpr::Pred(p) => self.atom(p, true),
                QueryExpr::Exists(..) => self.existential(inner, true),
                other => format!("it is not the case that ({})", self.clause(other)),
            },
        }
    }
}
