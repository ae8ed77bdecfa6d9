use super::{is_identifier, Constant, Predicate, QueryExpr, Term};

pub(crate) const KEYWORDS: [&str; 5] = ["exists", "forall", "and", "or", "not"];

/// Renders a formula in concrete syntax with the fewest parentheses that
/// still parse back to the same tree.
pub fn render_expr(expr: &QueryExpr) -> String {
    let mut out = String::new();
    write_expr(expr, 0, false, &mut out);
    out
}

fn precedence(expr: &QueryExpr) -> u8 {
    match expr {
        QueryExpr::Implies(..) => 1,
        QueryExpr::Or(..) => 2,
        QueryExpr::And(..) => 3,
        _ => 4,
    }
}

/// `followed` is true when more operator text comes after this subtree in
/// the same parenthesis group; a quantifier body would swallow it.
fn write_expr(expr: &QueryExpr, min_prec: u8, followed: bool, out: &mut String) {
    let quantifier = matches!(expr, QueryExpr::Exists(..) | QueryExpr::Forall(..));
    if precedence(expr) < min_prec || (quantifier && followed) {
        out.push('(');
        write_expr(expr, 0, false, out);
        out.push(')');
        return;
    }
    match expr {
        QueryExpr::Pred(p) => write_pred(p, out),
        QueryExpr::Implies(l, r) => write_binary(l, " -> ", r, (2, 1), followed, out),
        QueryExpr::Or(l, r) => write_binary(l, " || ", r, (2, 3), followed, out),
        QueryExpr::And(l, r) => write_binary(l, " && ", r, (3, 4), followed, out),
        QueryExpr::Not(e) => {
            out.push('!');
            write_expr(e, 4, followed, out);
        }
        QueryExpr::Exists(v, body) | QueryExpr::Forall(v, body) => {
            out.push_str(if matches!(expr, QueryExpr::Exists(..)) {
                "exists "
            } else {
                "forall "
            });
            out.push_str(v.as_str());
            out.push_str(". ");
            write_expr(body, 0, false, out);
        }
    }
}

fn write_binary(
    l: &QueryExpr,
    op: &str,
    r: &QueryExpr,
    (left_prec, right_prec): (u8, u8),
    followed: bool,
    out: &mut String,
) {
    write_expr(l, left_prec, true, out);
    out.push_str(op);
    write_expr(r, right_prec, followed, out);
}

fn write_pred(p: &Predicate, out: &mut String) {
    out.push_str(p.relation().name());
    out.push('(');
    for (i, arg) in p.args().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match arg {
            Term::Var(v) => out.push_str(v.as_str()),
            Term::Const(c) => out.push_str(&render_constant(c)),
            Term::Hole(id) => out.push_str(&id.to_string()),
        }
    }
    out.push(')');
}

/// Identifier-like constants print capitalized (`tree` -> `Tree`); anything
/// else is quoted.
pub fn render_constant(c: &Constant) -> String {
    let s = c.as_str();
    if is_identifier(s) && !KEYWORDS.contains(&s) {
        let mut chars = s.chars();
        let first = chars.next().expect("constants are nonempty");
        first.to_uppercase().chain(chars).collect()
    } else {
        let escaped = s.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    }
}
