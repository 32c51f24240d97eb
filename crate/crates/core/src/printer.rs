//! Pretty-printer for the concrete syntax.  `parse(print(f))` returns a
//! formula structurally equal to `f` for every well-sorted AST.

use crate::ast::*;
use num_traits::Signed;

// Formula precedence levels (higher binds tighter):
// quantifier 0, iff 1, implies 2, or 3, and 4, not 5, atom 6.
// Scalar/vector term levels: add 1, mul 2, neg 3, primary 4.

fn paren(s: String, need: bool) -> String {
    if need {
        format!("({s})")
    } else {
        s
    }
}

fn print_sterm(t: &ScalarTerm, prec: u8) -> String {
    match t {
        ScalarTerm::Rat(q) => {
            let body = format_rat(q);
            // A negative constant prints with a leading minus, which parses
            // as unary negation at the factor level; parenthesize where a
            // primary is required.
            paren(body, q.is_negative() && prec >= 4)
        }
        ScalarTerm::Var(x) => x.clone(),
        ScalarTerm::Add(a, b) => {
            let (op, rhs) = match &**b {
                ScalarTerm::Neg(inner) => ("-", print_sterm(inner, 2)),
                other => ("+", print_sterm(other, 2)),
            };
            paren(format!("{} {op} {rhs}", print_sterm(a, 1)), prec > 1)
        }
        ScalarTerm::Neg(a) => {
            // `-3` lexes as the constant minus three, so an explicit negation
            // of a literal needs parentheses to survive the round trip.
            let inner = match &**a {
                ScalarTerm::Rat(_) => format!("({})", print_sterm(a, 0)),
                other => print_sterm(other, 4),
            };
            paren(format!("-{inner}"), prec > 3)
        }
        ScalarTerm::Mul(a, b) => paren(
            format!("{} * {}", print_sterm(a, 2), print_sterm(b, 3)),
            prec > 2,
        ),
        ScalarTerm::Inner(a, b) => {
            format!("inner({}, {})", print_vterm(a, 0), print_vterm(b, 0))
        }
        ScalarTerm::Norm(a) => format!("norm({})", print_vterm(a, 0)),
        ScalarTerm::Dist(a, b) => format!("d({}, {})", print_vterm(a, 0), print_vterm(b, 0)),
    }
}

fn print_vterm(t: &VectorTerm, prec: u8) -> String {
    match t {
        VectorTerm::Var(x) => x.clone(),
        VectorTerm::Zero => "0v".to_string(),
        VectorTerm::Add(a, b) => {
            let (op, rhs) = match &**b {
                VectorTerm::Neg(inner) => ("-", print_vterm(inner, 2)),
                other => ("+", print_vterm(other, 2)),
            };
            paren(format!("{} {op} {rhs}", print_vterm(a, 1)), prec > 1)
        }
        VectorTerm::Neg(a) => paren(format!("-{}", print_vterm(a, 4)), prec > 3),
        VectorTerm::Scale(s, v) => paren(
            format!("{} * {}", print_sterm(s, 2), print_vterm(v, 3)),
            prec > 2,
        ),
    }
}

fn print_formula_prec(f: &Formula, prec: u8) -> String {
    match f {
        Formula::Cmp(op, a, b) => format!(
            "{} {} {}",
            print_sterm(a, 0),
            op.symbol(),
            print_sterm(b, 0)
        ),
        Formula::VecEq(a, b) => format!("{} = {}", print_vterm(a, 0), print_vterm(b, 0)),
        Formula::Not(p) => paren(format!("~{}", print_formula_prec(p, 5)), prec > 5),
        Formula::And(a, b) => paren(
            format!(
                "{} & {}",
                print_formula_prec(a, 4),
                print_formula_prec(b, 5)
            ),
            prec > 4,
        ),
        Formula::Or(a, b) => paren(
            format!(
                "{} | {}",
                print_formula_prec(a, 3),
                print_formula_prec(b, 4)
            ),
            prec > 3,
        ),
        Formula::Implies(a, b) => paren(
            format!(
                "{} -> {}",
                print_formula_prec(a, 3),
                print_formula_prec(b, 2)
            ),
            prec > 2,
        ),
        Formula::Iff(a, b) => paren(
            format!(
                "{} <-> {}",
                print_formula_prec(a, 2),
                print_formula_prec(b, 2)
            ),
            prec > 1,
        ),
        Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => {
            // Collect a maximal run of same-kind binders into one prefix.
            let is_forall = matches!(f, Formula::Forall(_, _, _));
            let mut binders: Vec<(String, Sort)> = Vec::new();
            let mut cur = f;
            loop {
                match (is_forall, cur) {
                    (true, Formula::Forall(x, s, p)) => {
                        binders.push((x.clone(), *s));
                        cur = p;
                    }
                    (false, Formula::Exists(x, s, p)) => {
                        binders.push((x.clone(), *s));
                        cur = p;
                    }
                    _ => break,
                }
            }
            let word = if is_forall { "forall" } else { "exists" };
            let bs = binders
                .iter()
                .map(|(x, s)| format!("{x}:{s}"))
                .collect::<Vec<_>>()
                .join(", ");
            paren(
                format!("{word} {bs}. {}", print_formula_prec(cur, 0)),
                prec > 0,
            )
        }
    }
}

/// Render a formula in the concrete syntax accepted by [`crate::parser::parse`].
pub fn print(f: &Formula) -> String {
    print_formula_prec(f, 0)
}

/// Render a scalar term in the concrete syntax.
pub fn print_scalar(t: &ScalarTerm) -> String {
    print_sterm(t, 0)
}
