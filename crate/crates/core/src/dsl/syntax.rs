//! Lexer and recursive-descent parser for the query language.

use thiserror::Error;

use super::{
    canonicalize, is_identifier, Constant, Hole, HoleId, KnownVocabulary, Predicate, QueryExpr,
    Relation, Sketch, Slot, Term, Variable,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("{relation} takes {want} arguments, got {got}")]
    Arity {
        relation: String,
        got: usize,
        want: usize,
    },
    #[error("quantifier rebinds variable `{0}` already in scope")]
    Shadowing(String),
}

/// A candidate that is not a structurally valid formula.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("candidate discarded: {reason}")]
pub struct ParseFailure {
    pub reason: ParseError,
}

/// Parses a complete program. Every constant is accepted as written (after
/// case folding); holes (`?n`) and unknown predicate names are errors.
pub fn parse(text: &str) -> Result<QueryExpr, ParseError> {
    let sketch = Parser::new(text, None)?.run()?;
    Ok(sketch.expr)
}

/// Parses candidate text into a sketch, turning constants that `vocab` does
/// not know into holes.
///
/// An unknown predicate applied to two bound variables, `r(x, y)`, becomes
/// `HasRelation(x, y, ?n)` with `r` as the hole's origin token. Anything
/// else that fails to parse is a [`ParseFailure`].
pub fn parse_with_holes(text: &str, vocab: &KnownVocabulary) -> Result<Sketch, ParseFailure> {
    Parser::new(text, Some(vocab))
        .and_then(Parser::run)
        .map_err(|reason| ParseFailure { reason })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    HoleRef(u32),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Or,
    And,
    Not,
    Exists,
    Forall,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::HoleRef(n) => format!("hole ?{n}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Or => "`||`".into(),
            Tok::And => "`&&`".into(),
            Tok::Not => "`!`".into(),
            Tok::Exists => "`exists`".into(),
            Tok::Forall => "`forall`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(position: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '!' | '¬' | '~' => Some(Tok::Not),
            '∧' => Some(Tok::And),
            '∨' => Some(Tok::Or),
            '→' | '⇒' => Some(Tok::Arrow),
            '∃' => Some(Tok::Exists),
            '∀' => Some(Tok::Forall),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((tok, pos));
            continue;
        }
        let pair = |chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>, second: char| {
            chars.next();
            match chars.peek() {
                Some(&(_, c2)) if c2 == second => {
                    chars.next();
                    true
                }
                _ => false,
            }
        };
        match c {
            '-' | '=' => {
                if !pair(&mut chars, '>') {
                    return Err(syntax(pos, format!("expected `{c}>`")));
                }
                out.push((Tok::Arrow, pos));
            }
            '&' => {
                if !pair(&mut chars, '&') {
                    return Err(syntax(pos, "expected `&&`"));
                }
                out.push((Tok::And, pos));
            }
            '|' => {
                if !pair(&mut chars, '|') {
                    return Err(syntax(pos, "expected `||`"));
                }
                out.push((Tok::Or, pos));
            }
            '?' => {
                chars.next();
                let mut digits = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    digits.push(d);
                    chars.next();
                }
                let n = digits
                    .parse()
                    .map_err(|_| syntax(pos, "expected hole number after `?`"))?;
                out.push((Tok::HoleRef(n), pos));
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => s.push(e),
                            Some((p, e)) => return Err(syntax(p, format!("bad escape `\\{e}`"))),
                            None => return Err(syntax(pos, "unterminated string")),
                        },
                        Some((_, ch)) => s.push(ch),
                        None => return Err(syntax(pos, "unterminated string")),
                    }
                }
                out.push((Tok::Str(s), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if !(ch.is_ascii_alphanumeric() || ch == '_') {
                        break;
                    }
                    ident.push(ch);
                    chars.next();
                }
                let tok = match ident.to_ascii_lowercase().as_str() {
                    "exists" => Tok::Exists,
                    "forall" => Tok::Forall,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(ident),
                };
                out.push((tok, pos));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

enum RawArg {
    Name(String, usize),
    Str(String, usize),
    Hole(u32, usize),
}

impl RawArg {
    fn position(&self) -> usize {
        match self {
            RawArg::Name(_, p) | RawArg::Str(_, p) | RawArg::Hole(_, p) => *p,
        }
    }
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    cursor: usize,
    vocab: Option<&'a KnownVocabulary>,
    scope: Vec<Variable>,
    holes: Vec<Hole>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, vocab: Option<&'a KnownVocabulary>) -> Result<Self, ParseError> {
        Ok(Self {
            tokens: lex(text)?,
            cursor: 0,
            vocab,
            scope: Vec::new(),
            holes: Vec::new(),
        })
    }

    fn run(mut self) -> Result<Sketch, ParseError> {
        if self.peek() == &Tok::Eof {
            return Err(syntax(0, "empty program"));
        }
        let expr = self.implies()?;
        if self.peek() != &Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(Sketch {
            expr,
            holes: self.holes,
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.cursor].0
    }

    fn position(&self) -> usize {
        self.tokens[self.cursor].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let tok = self.tokens[self.cursor].clone();
        if tok.0 != Tok::Eof {
            self.cursor += 1;
        }
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        syntax(
            self.position(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn implies(&mut self) -> Result<QueryExpr, ParseError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implies()?;
            return Ok(QueryExpr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<QueryExpr, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = QueryExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<QueryExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = QueryExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<QueryExpr, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(QueryExpr::not(self.unary()?))
            }
            Tok::Exists | Tok::Forall => self.quantifier(),
            _ => self.atom(),
        }
    }

    fn quantifier(&mut self) -> Result<QueryExpr, ParseError> {
        let (kind, _) = self.bump();
        let var = match self.bump() {
            (Tok::Ident(name), _) if is_identifier(&name) => Variable(name),
            (tok, pos) => {
                return Err(syntax(pos, format!("expected variable, found {}", tok.describe())))
            }
        };
        self.expect(Tok::Dot)?;
        if self.scope.contains(&var) {
            return Err(ParseError::Shadowing(var.0));
        }
        self.scope.push(var.clone());
        let body = self.implies();
        self.scope.pop();
        let body = Box::new(body?);
        Ok(match kind {
            Tok::Exists => QueryExpr::Exists(var, body),
            _ => QueryExpr::Forall(var, body),
        })
    }

    fn atom(&mut self) -> Result<QueryExpr, ParseError> {
        match self.bump() {
            (Tok::LParen, _) => {
                let inner = self.implies()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            (Tok::Ident(name), pos) => self.predicate(name, pos),
            (tok, pos) => Err(syntax(
                pos,
                format!("expected formula, found {}", tok.describe()),
            )),
        }
    }

    fn predicate(&mut self, name: String, name_pos: usize) -> Result<QueryExpr, ParseError> {
        if self.peek() != &Tok::LParen {
            return Err(self.unexpected(&format!("`(` after `{name}`")));
        }
        self.bump();
        let mut raw = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let arg = match self.bump() {
                    (Tok::Ident(s), p) => RawArg::Name(s, p),
                    (Tok::Str(s), p) => RawArg::Str(s, p),
                    (Tok::HoleRef(n), p) => RawArg::Hole(n, p),
                    (tok, p) => {
                        return Err(syntax(p, format!("expected argument, found {}", tok.describe())))
                    }
                };
                raw.push(arg);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;

        let Some(relation) = Relation::from_name(&name) else {
            return self.unknown_predicate(name, name_pos, raw);
        };
        if raw.len() != relation.arity() {
            return Err(ParseError::Arity {
                relation: relation.name().to_owned(),
                got: raw.len(),
                want: relation.arity(),
            });
        }
        let value_raw = raw.pop().expect("arity >= 2");
        let mut args = raw
            .into_iter()
            .map(|a| self.variable(a))
            .collect::<Result<Vec<_>, _>>()?;
        args.push(self.constant(relation.slot(), value_raw)?);
        Ok(QueryExpr::Pred(Predicate::new(relation, args)?))
    }

    fn unknown_predicate(
        &mut self,
        name: String,
        name_pos: usize,
        raw: Vec<RawArg>,
    ) -> Result<QueryExpr, ParseError> {
        let bound_pair = self.vocab.is_some()
            && raw.len() == 2
            && raw
                .iter()
                .all(|a| matches!(a, RawArg::Name(n, _) if self.is_bound(n)));
        if !bound_pair {
            return Err(syntax(name_pos, format!("unknown predicate `{name}`")));
        }
        let mut args = raw
            .into_iter()
            .map(|a| self.variable(a))
            .collect::<Result<Vec<_>, _>>()?;
        args.push(self.new_hole(name, Slot::RelationConst, name_pos));
        Ok(QueryExpr::Pred(Predicate::new(Relation::HasRelation, args)?))
    }

    fn is_bound(&self, name: &str) -> bool {
        self.scope.iter().any(|v| v.0 == name)
    }

    fn variable(&self, arg: RawArg) -> Result<Term, ParseError> {
        match arg {
            RawArg::Name(name, _) if self.is_bound(&name) => Ok(Term::Var(Variable(name))),
            RawArg::Name(name, _) => Err(ParseError::UnboundVariable(name)),
            other => Err(syntax(other.position(), "expected a variable")),
        }
    }

    fn constant(&mut self, slot: Slot, arg: RawArg) -> Result<Term, ParseError> {
        let (token, pos) = match arg {
            RawArg::Name(s, p) | RawArg::Str(s, p) => (s, p),
            RawArg::Hole(n, p) => {
                if self.vocab.is_none() {
                    return Err(syntax(p, format!("hole ?{n} in a program that must be complete")));
                }
                return Ok(self.new_hole(format!("?{n}"), slot, p));
            }
        };
        if canonicalize(&token).is_empty() {
            return Err(syntax(pos, "empty constant"));
        }
        match self.vocab {
            None => Ok(Term::Const(Constant::new(&token).expect("checked nonempty"))),
            Some(vocab) => match vocab.resolve(slot, &token) {
                Some(c) => Ok(Term::Const(c)),
                None => Ok(self.new_hole(token, slot, pos)),
            },
        }
    }

    fn new_hole(&mut self, origin_token: String, slot: Slot, position: usize) -> Term {
        let id = HoleId(self.holes.len() as u32 + 1);
        self.holes.push(Hole {
            id,
            origin_token,
            slot,
            position,
        });
        Term::Hole(id)
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, position: usize) -> (usize, usize) {
    let before = &text[..position.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::pred;

    fn vocab() -> KnownVocabulary {
        KnownVocabulary::builtin().with_types(["flower", "tree", "car"])
    }

    #[test]
    fn parses_single_existential() {
        let e = parse("exists x. HasType(x, Tree)").unwrap();
        assert_eq!(e, QueryExpr::exists("x", pred(Relation::HasType, &["x"], "tree")));
    }

    #[test]
    fn parses_universal_implication() {
        let e = parse("forall x. HasType(x, Face) -> HasProperty(x, Smiling)").unwrap();
        assert_eq!(
            e,
            QueryExpr::forall(
                "x",
                QueryExpr::implies(
                    pred(Relation::HasType, &["x"], "face"),
                    pred(Relation::HasProperty, &["x"], "smiling"),
                )
            )
        );
    }

    #[test]
    fn rejects_unbound_variable() {
        assert_eq!(
            parse("exists x. HasType(y, Tree)"),
            Err(ParseError::UnboundVariable("y".into()))
        );
    }

    #[test]
    fn rejects_wrong_arity() {
        assert_eq!(
            parse("exists x. HasRelation(x, Above)"),
            Err(ParseError::Arity {
                relation: "HasRelation".into(),
                got: 2,
                want: 3
            })
        );
    }

    #[test]
    fn rejects_shadowing() {
        assert_eq!(
            parse("exists x. exists x. HasType(x, Tree)"),
            Err(ParseError::Shadowing("x".into()))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("exists x. HasType(x, a) || HasType(x, b) && HasType(x, c) -> HasType(x, d) -> HasType(x, e)")
            .unwrap();
        let t = |c| pred(Relation::HasType, &["x"], c);
        let expected = QueryExpr::exists(
            "x",
            QueryExpr::implies(
                QueryExpr::or(t("a"), QueryExpr::and(t("b"), t("c"))),
                QueryExpr::implies(t("d"), t("e")),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn quantifier_extends_right_inside_conjunction() {
        let e = parse("exists x. HasType(x, a) && exists y. HasType(y, b) && HasType(x, c)").unwrap();
        let expected = QueryExpr::exists(
            "x",
            QueryExpr::and(
                pred(Relation::HasType, &["x"], "a"),
                QueryExpr::exists(
                    "y",
                    QueryExpr::and(
                        pred(Relation::HasType, &["y"], "b"),
                        pred(Relation::HasType, &["x"], "c"),
                    ),
                ),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn keyword_and_unicode_synonyms() {
        let ascii = parse("exists x. !(HasType(x, a) && HasType(x, b)) || HasType(x, c)").unwrap();
        let words = parse("exists x. not (HasType(x, a) and HasType(x, b)) or HasType(x, c)").unwrap();
        let unicode = parse("∃x. ¬(HasType(x, a) ∧ HasType(x, b)) ∨ HasType(x, c)").unwrap();
        assert_eq!(ascii, words);
        assert_eq!(ascii, unicode);
    }

    #[test]
    fn quoted_constants_are_canonicalized() {
        let e = parse(r#"exists x. HasType(x, "Traffic Light")"#).unwrap();
        assert_eq!(e, QueryExpr::exists("x", pred(Relation::HasType, &["x"], "traffic light")));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("exists x. HasType(x, Tree") {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 25),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse(""), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("exists x HasType(x, a)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("exists x. HasType(x, a) &"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("exists x. Holding(x, x)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("exists x. HasType(x, ?1)"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_constants_become_holes_in_source_order() {
        let text = "exists x. exists y. HasType(x, Alice) && HasType(y, Flowers) && HasRelation(x, y, Holding)";
        let sketch = parse_with_holes(text, &vocab()).unwrap();
        let holes = sketch.holes();
        assert_eq!(holes.len(), 2);
        assert_eq!((holes[0].id, holes[0].slot, holes[0].origin_token.as_str()), (HoleId(1), Slot::TypeConst, "Alice"));
        assert_eq!(
            (holes[1].id, holes[1].slot, holes[1].origin_token.as_str()),
            (HoleId(2), Slot::RelationConst, "Holding")
        );
        assert_eq!(&text[holes[0].position..holes[0].position + 5], "Alice");
        assert_eq!(
            sketch.render(),
            "exists x. exists y. HasType(x, ?1) && HasType(y, Flower) && HasRelation(x, y, ?2)"
        );
    }

    #[test]
    fn registered_tag_is_not_a_hole() {
        let text = "exists x. exists y. HasType(x, Alice) && HasType(y, Flowers) && HasRelation(x, y, Holding)";
        let sketch = parse_with_holes(text, &vocab().with_tags(["alice"])).unwrap();
        assert_eq!(sketch.holes().len(), 1);
        assert_eq!(sketch.holes()[0].origin_token, "Holding");
        assert_eq!(sketch.holes()[0].id, HoleId(1));
    }

    #[test]
    fn unknown_binary_predicate_becomes_relation_hole() {
        let sketch = parse_with_holes(
            "exists x. exists y. HasType(x, Face) && HasType(y, Flower) && Holding(x, y)",
            &vocab(),
        )
        .unwrap();
        assert_eq!(sketch.holes().len(), 1);
        assert_eq!(sketch.holes()[0].slot, Slot::RelationConst);
        assert_eq!(sketch.holes()[0].origin_token, "Holding");
        assert!(sketch.render().ends_with("HasRelation(x, y, ?1)"));
    }

    #[test]
    fn structural_errors_fail_with_holes_too() {
        let v = vocab();
        assert!(parse_with_holes("exists x. Frobnicate(x", &v).is_err());
        assert!(parse_with_holes("exists x. Holding(x, Flowers)", &v).is_err());
        assert!(parse_with_holes("exists x. Smiling(x)", &v).is_err());
        assert!(parse_with_holes("Sure! Here is the program:", &v).is_err());
        assert!(parse_with_holes("exists x. HasType(y, Tree)", &v).is_err());
    }

    #[test]
    fn known_vocabulary_equals_plain_parse() {
        let text = "forall x. HasType(x, Face) -> HasProperty(x, Smiling) && exists y. HasType(y, Flower) && HasRelation(x, y, Above)";
        let sketch = parse_with_holes(text, &vocab()).unwrap();
        assert!(sketch.is_complete());
        assert_eq!(sketch.into_program().unwrap(), parse(text).unwrap());
    }

    #[test]
    fn explicit_hole_references() {
        let sketch = parse_with_holes("exists x. exists y. HasRelation(x, y, ?7)", &vocab()).unwrap();
        assert_eq!(sketch.holes()[0].origin_token, "?7");
        assert_eq!(sketch.holes()[0].id, HoleId(1));
    }

    #[test]
    fn line_col_counts_from_one() {
        let text = "exists x.\n  HasType(x, Tree)";
        assert_eq!(line_col(text, 0), (1, 1));
        assert_eq!(line_col(text, 12), (2, 3));
    }
}
