//! Structural transformations: prenex normal form, fragment classification,
//! additivity, and multiplication unnesting.

use crate::ast::*;
use std::collections::BTreeSet;

/// Quantifier kind in a prenex prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quant {
    Forall,
    Exists,
}

impl Quant {
    pub fn dual(self) -> Quant {
        match self {
            Quant::Forall => Quant::Exists,
            Quant::Exists => Quant::Forall,
        }
    }
}

/// One binder of a prenex prefix.
pub type PrefixEntry = (Quant, String, Sort);

/// Expand every `Iff` into a conjunction of implications.
pub fn expand_iff(f: &Formula) -> Formula {
    match f {
        Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => f.clone(),
        Formula::Not(p) => Formula::not(expand_iff(p)),
        Formula::And(a, b) => Formula::and(expand_iff(a), expand_iff(b)),
        Formula::Or(a, b) => Formula::or(expand_iff(a), expand_iff(b)),
        Formula::Implies(a, b) => Formula::implies(expand_iff(a), expand_iff(b)),
        Formula::Iff(a, b) => {
            let ea = expand_iff(a);
            let eb = expand_iff(b);
            Formula::and(
                Formula::implies(ea.clone(), eb.clone()),
                Formula::implies(eb, ea),
            )
        }
        Formula::Forall(x, s, p) => Formula::forall(x.clone(), *s, expand_iff(p)),
        Formula::Exists(x, s, p) => Formula::exists(x.clone(), *s, expand_iff(p)),
    }
}

/// Rename bound variables so that every binder introduces a globally unique
/// name (with respect to both other binders and free variables).  Needed
/// before pulling quantifiers outward.
pub fn rectify(f: &Formula) -> Formula {
    let mut used: BTreeSet<String> = free_vars(f).into_iter().map(|(n, _)| n).collect();
    fn go(f: &Formula, used: &mut BTreeSet<String>) -> Formula {
        match f {
            Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => f.clone(),
            Formula::Not(p) => Formula::not(go(p, used)),
            Formula::And(a, b) => Formula::and(go(a, used), go(b, used)),
            Formula::Or(a, b) => Formula::or(go(a, used), go(b, used)),
            Formula::Implies(a, b) => Formula::implies(go(a, used), go(b, used)),
            Formula::Iff(a, b) => Formula::iff(go(a, used), go(b, used)),
            Formula::Forall(x, s, p) | Formula::Exists(x, s, p) => {
                let (name, body) = if used.contains(x) {
                    let fresh = fresh_name(x, used);
                    let renamed = match s {
                        Sort::Scalar => subst_scalar_var(p, x, &ScalarTerm::var(fresh.clone())),
                        Sort::Vector => {
                            let mut map = std::collections::BTreeMap::new();
                            map.insert(x.clone(), fresh.clone());
                            rename_vector_vars(p, &map)
                        }
                    };
                    (fresh, renamed)
                } else {
                    used.insert(x.clone());
                    (x.clone(), (**p).clone())
                };
                let body = go(&body, used);
                match f {
                    Formula::Forall(_, _, _) => Formula::forall(name, *s, body),
                    _ => Formula::exists(name, *s, body),
                }
            }
        }
    }
    go(f, &mut used)
}

/// Split a formula into a prenex prefix and a quantifier-free matrix.
/// `Iff` is expanded first; bound variables are renamed apart.
pub fn prenex_parts(f: &Formula) -> (Vec<PrefixEntry>, Formula) {
    let f = rectify(&expand_iff(f));
    fn pull(f: &Formula) -> (Vec<PrefixEntry>, Formula) {
        match f {
            Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => (Vec::new(), f.clone()),
            Formula::Not(p) => {
                let (mut pre, m) = pull(p);
                for e in &mut pre {
                    e.0 = e.0.dual();
                }
                (pre, Formula::not(m))
            }
            Formula::And(a, b) => {
                let (mut pa, ma) = pull(a);
                let (pb, mb) = pull(b);
                pa.extend(pb);
                (pa, Formula::and(ma, mb))
            }
            Formula::Or(a, b) => {
                let (mut pa, ma) = pull(a);
                let (pb, mb) = pull(b);
                pa.extend(pb);
                (pa, Formula::or(ma, mb))
            }
            Formula::Implies(a, b) => {
                let (mut pa, ma) = pull(a);
                for e in &mut pa {
                    e.0 = e.0.dual();
                }
                let (pb, mb) = pull(b);
                pa.extend(pb);
                (pa, Formula::implies(ma, mb))
            }
            Formula::Iff(_, _) => unreachable!("Iff expanded before prenexing"),
            Formula::Forall(x, s, p) => {
                let (mut pre, m) = pull(p);
                pre.insert(0, (Quant::Forall, x.clone(), *s));
                (pre, m)
            }
            Formula::Exists(x, s, p) => {
                let (mut pre, m) = pull(p);
                pre.insert(0, (Quant::Exists, x.clone(), *s));
                (pre, m)
            }
        }
    }
    pull(&f)
}

/// Rebuild a formula from a prenex prefix and matrix.
pub fn from_prenex_parts(prefix: &[PrefixEntry], matrix: Formula) -> Formula {
    prefix.iter().rev().fold(matrix, |acc, (q, x, s)| match q {
        Quant::Forall => Formula::forall(x.clone(), *s, acc),
        Quant::Exists => Formula::exists(x.clone(), *s, acc),
    })
}

/// Prenex normal form: all quantifiers leading, matrix quantifier-free.
pub fn prenex(f: &Formula) -> Formula {
    let (prefix, matrix) = prenex_parts(f);
    from_prenex_parts(&prefix, matrix)
}

/// Quantifier shape of a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Prenex prefix is all universal.
    PurelyUniversal,
    /// Prenex prefix is all existential.
    PurelyExistential,
    /// No universal point quantifier in the scope of an existential
    /// quantifier of any sort (the decidable metric validity fragment).
    AEp,
    /// No existential point quantifier in the scope of a universal
    /// quantifier of any sort.
    EAp,
    /// An implication between two purely universal sentences.
    AimpA,
    General,
}

impl Shape {
    pub fn label(self) -> &'static str {
        match self {
            Shape::PurelyUniversal => "purely-universal",
            Shape::PurelyExistential => "purely-existential",
            Shape::AEp => "forall-exists-p",
            Shape::EAp => "exists-forall-p",
            Shape::AimpA => "universal-implies-universal",
            Shape::General => "general",
        }
    }
}

/// Classification of a sentence: quantifier shape, additivity, and variable
/// counts used by the decision procedures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentClass {
    pub shape: Shape,
    pub additive: bool,
    /// Distinct vector variable names in the whole formula, ignoring
    /// binding structure (the frugal dimension bound `k`).
    pub vector_var_count: usize,
    /// Universal vector/point quantifiers in the prenex prefix.
    pub point_universal_count: usize,
    /// Existential vector/point quantifiers in the prenex prefix.
    pub point_existential_count: usize,
}

/// True of a prenex prefix in which no universal point quantifier occurs
/// after (inside) an existential quantifier of any sort.
pub fn prefix_is_ae_p(prefix: &[PrefixEntry]) -> bool {
    let mut seen_exists = false;
    for (q, _, s) in prefix {
        match q {
            Quant::Exists => seen_exists = true,
            Quant::Forall => {
                if *s == Sort::Vector && seen_exists {
                    return false;
                }
            }
        }
    }
    true
}

/// Dual of [`prefix_is_ae_p`]: no existential point quantifier inside a
/// universal quantifier of any sort.
pub fn prefix_is_ea_p(prefix: &[PrefixEntry]) -> bool {
    let mut seen_forall = false;
    for (q, _, s) in prefix {
        match q {
            Quant::Forall => seen_forall = true,
            Quant::Exists => {
                if *s == Sort::Vector && seen_forall {
                    return false;
                }
            }
        }
    }
    true
}

fn is_purely_universal_sentence(f: &Formula) -> bool {
    let (prefix, _) = prenex_parts(f);
    prefix.iter().all(|(q, _, _)| *q == Quant::Forall)
}

/// Classify a closed formula.  Shape fields are computed on the prenex
/// form; the universal-implies-universal case is detected on the original
/// implication structure before prenexing.
pub fn classify_fragment(f: &Formula) -> FragmentClass {
    let (prefix, _) = prenex_parts(f);
    let all_forall = prefix.iter().all(|(q, _, _)| *q == Quant::Forall);
    let all_exists = prefix.iter().all(|(q, _, _)| *q == Quant::Exists);
    let aimpa = matches!(f, Formula::Implies(a, b)
        if is_purely_universal_sentence(a) && is_purely_universal_sentence(b));
    let shape = if all_forall {
        Shape::PurelyUniversal
    } else if all_exists {
        Shape::PurelyExistential
    } else if aimpa {
        Shape::AimpA
    } else if prefix_is_ae_p(&prefix) {
        Shape::AEp
    } else if prefix_is_ea_p(&prefix) {
        Shape::EAp
    } else {
        Shape::General
    };
    FragmentClass {
        shape,
        additive: is_additive(f),
        vector_var_count: count_vector_vars(f),
        point_universal_count: prefix
            .iter()
            .filter(|(q, _, s)| *q == Quant::Forall && *s == Sort::Vector)
            .count(),
        point_existential_count: prefix
            .iter()
            .filter(|(q, _, s)| *q == Quant::Exists && *s == Sort::Vector)
            .count(),
    }
}

/// Additivity: the left operand of every scalar-scalar product,
/// scalar-vector product, and inner product is a constant.
pub fn is_additive(f: &Formula) -> bool {
    fn sterm(t: &ScalarTerm) -> bool {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => true,
            ScalarTerm::Add(a, b) => sterm(a) && sterm(b),
            ScalarTerm::Neg(a) => sterm(a),
            ScalarTerm::Mul(a, b) => a.is_constant() && sterm(a) && sterm(b),
            ScalarTerm::Inner(a, b) => a.is_constant() && vterm(a) && vterm(b),
            ScalarTerm::Norm(a) => vterm(a),
            ScalarTerm::Dist(a, b) => vterm(a) && vterm(b),
        }
    }
    fn vterm(t: &VectorTerm) -> bool {
        match t {
            VectorTerm::Var(_) | VectorTerm::Zero => true,
            VectorTerm::Add(a, b) => vterm(a) && vterm(b),
            VectorTerm::Neg(a) => vterm(a),
            VectorTerm::Scale(s, v) => s.is_constant() && sterm(s) && vterm(v),
        }
    }
    fn go(f: &Formula) -> bool {
        match f {
            Formula::Cmp(_, a, b) => sterm(a) && sterm(b),
            Formula::VecEq(a, b) => vterm(a) && vterm(b),
            Formula::Not(p) => go(p),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => go(a) && go(b),
            Formula::Forall(_, _, p) | Formula::Exists(_, _, p) => go(p),
        }
    }
    go(f)
}

// ---------------------------------------------------------------------------
// Multiplication unnesting
// ---------------------------------------------------------------------------

/// Find, in an atom, an innermost scalar product whose operands are both
/// non-constant (no such product strictly inside it).
fn find_offending_mul(f: &Formula) -> Option<ScalarTerm> {
    fn in_sterm(t: &ScalarTerm) -> Option<ScalarTerm> {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => None,
            ScalarTerm::Add(a, b) => in_sterm(a).or_else(|| in_sterm(b)),
            ScalarTerm::Neg(a) => in_sterm(a),
            ScalarTerm::Mul(a, b) => in_sterm(a).or_else(|| in_sterm(b)).or_else(|| {
                if !a.is_constant() && !b.is_constant() {
                    Some(t.clone())
                } else {
                    None
                }
            }),
            ScalarTerm::Inner(a, b) | ScalarTerm::Dist(a, b) => {
                in_vterm(a).or_else(|| in_vterm(b))
            }
            ScalarTerm::Norm(a) => in_vterm(a),
        }
    }
    fn in_vterm(t: &VectorTerm) -> Option<ScalarTerm> {
        match t {
            VectorTerm::Var(_) | VectorTerm::Zero => None,
            VectorTerm::Add(a, b) => in_vterm(a).or_else(|| in_vterm(b)),
            VectorTerm::Neg(a) => in_vterm(a),
            VectorTerm::Scale(s, v) => in_sterm(s).or_else(|| in_vterm(v)),
        }
    }
    match f {
        Formula::Cmp(_, a, b) => in_sterm(a).or_else(|| in_sterm(b)),
        Formula::VecEq(a, b) => in_vterm(a).or_else(|| in_vterm(b)),
        _ => None,
    }
}

/// Replace all occurrences of a scalar subterm inside an atom.
fn replace_in_atom(f: &Formula, target: &ScalarTerm, repl: &ScalarTerm) -> Formula {
    fn in_sterm(t: &ScalarTerm, target: &ScalarTerm, repl: &ScalarTerm) -> ScalarTerm {
        if t == target {
            return repl.clone();
        }
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => ScalarTerm::add(
                in_sterm(a, target, repl),
                in_sterm(b, target, repl),
            ),
            ScalarTerm::Neg(a) => ScalarTerm::neg(in_sterm(a, target, repl)),
            ScalarTerm::Mul(a, b) => ScalarTerm::mul(
                in_sterm(a, target, repl),
                in_sterm(b, target, repl),
            ),
            ScalarTerm::Inner(a, b) => ScalarTerm::inner(
                in_vterm(a, target, repl),
                in_vterm(b, target, repl),
            ),
            ScalarTerm::Norm(a) => ScalarTerm::norm(in_vterm(a, target, repl)),
            ScalarTerm::Dist(a, b) => ScalarTerm::dist(
                in_vterm(a, target, repl),
                in_vterm(b, target, repl),
            ),
        }
    }
    fn in_vterm(t: &VectorTerm, target: &ScalarTerm, repl: &ScalarTerm) -> VectorTerm {
        match t {
            VectorTerm::Var(_) | VectorTerm::Zero => t.clone(),
            VectorTerm::Add(a, b) => VectorTerm::add(
                in_vterm(a, target, repl),
                in_vterm(b, target, repl),
            ),
            VectorTerm::Neg(a) => VectorTerm::neg(in_vterm(a, target, repl)),
            VectorTerm::Scale(s, v) => VectorTerm::scale(
                in_sterm(s, target, repl),
                in_vterm(v, target, repl),
            ),
        }
    }
    match f {
        Formula::Cmp(op, a, b) => Formula::Cmp(
            *op,
            in_sterm(a, target, repl),
            in_sterm(b, target, repl),
        ),
        Formula::VecEq(a, b) => Formula::VecEq(
            in_vterm(a, target, repl),
            in_vterm(b, target, repl),
        ),
        _ => f.clone(),
    }
}

/// Rewrite an atom so every product of two non-constant scalar terms occurs
/// only as `x * y = z` with `x`, `y`, `z` variables, introducing fresh
/// variables quantified according to `positive` polarity.
fn unnest_atom(atom: &Formula, positive: bool, used: &mut BTreeSet<String>) -> Formula {
    let mut atom = atom.clone();
    // (fresh variable, defining equation)
    let mut defs: Vec<(String, Formula)> = Vec::new();
    // Ensure a term is a variable: introduce `u = t` if necessary.
    let to_var = |t: ScalarTerm,
                      defs: &mut Vec<(String, Formula)>,
                      used: &mut BTreeSet<String>|
     -> ScalarTerm {
        match t {
            ScalarTerm::Var(_) => t,
            other => {
                let u = fresh_name("u", used);
                defs.push((
                    u.clone(),
                    Formula::eq(ScalarTerm::var(u.clone()), other),
                ));
                ScalarTerm::var(u)
            }
        }
    };
    while let Some(mul) = find_offending_mul(&atom) {
        let (a, b) = match &mul {
            ScalarTerm::Mul(a, b) => ((**a).clone(), (**b).clone()),
            _ => unreachable!(),
        };
        let va = to_var(a, &mut defs, used);
        let vb = to_var(b, &mut defs, used);
        let z = fresh_name("z", used);
        defs.push((
            z.clone(),
            Formula::eq(
                ScalarTerm::mul(va, vb),
                ScalarTerm::var(z.clone()),
            ),
        ));
        atom = replace_in_atom(&atom, &mul, &ScalarTerm::var(z));
    }
    if defs.is_empty() {
        return atom;
    }
    let eqs = Formula::and_all(defs.iter().map(|(_, e)| e.clone()));
    let body = if positive {
        Formula::and(eqs, atom)
    } else {
        Formula::implies(eqs, atom)
    };
    defs.iter().rev().fold(body, |acc, (v, _)| {
        if positive {
            Formula::exists(v.clone(), Sort::Scalar, acc)
        } else {
            Formula::forall(v.clone(), Sort::Scalar, acc)
        }
    })
}

/// Logically equivalent formula in which scalar multiplication of two
/// non-constant terms appears only in atoms of the form `x * y = z` over
/// variables.  `Iff` is expanded first so every atom has a definite
/// polarity; fresh definition variables are quantified existentially in
/// positive positions and universally in negative ones.
pub fn unnest_multiplication(f: &Formula) -> Formula {
    let f = expand_iff(f);
    let mut used = all_names(&f);
    fn go(f: &Formula, positive: bool, used: &mut BTreeSet<String>) -> Formula {
        match f {
            Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => unnest_atom(f, positive, used),
            Formula::Not(p) => Formula::not(go(p, !positive, used)),
            Formula::And(a, b) => Formula::and(go(a, positive, used), go(b, positive, used)),
            Formula::Or(a, b) => Formula::or(go(a, positive, used), go(b, positive, used)),
            Formula::Implies(a, b) => {
                Formula::implies(go(a, !positive, used), go(b, positive, used))
            }
            Formula::Iff(_, _) => unreachable!("Iff expanded before unnesting"),
            Formula::Forall(x, s, p) => Formula::forall(x.clone(), *s, go(p, positive, used)),
            Formula::Exists(x, s, p) => Formula::exists(x.clone(), *s, go(p, positive, used)),
        }
    }
    go(&f, true, &mut used)
}
