//! Abstract syntax for the two-sorted language of real vector, metric,
//! normed, and inner product spaces.
//!
//! Terms come in two sorts: scalars (interpreted as real numbers) and
//! vectors/points.  The split is enforced structurally: [`ScalarTerm`] and
//! [`VectorTerm`] are separate types, so an ill-sorted term cannot be
//! constructed.  Rational constants are kept exact (arbitrary precision,
//! lowest terms, positive denominator — the representation maintained by
//! `num_rational::BigRational`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeSet;
use std::fmt;

/// Exact rational number used throughout the crate.
pub type Rat = BigRational;

/// Convenience constructor: the rational `n / d`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Convenience constructor: the rational `n`.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// The two sorts of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Scalar,
    Vector,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Scalar => write!(f, "R"),
            Sort::Vector => write!(f, "V"),
        }
    }
}

/// Comparison operators between scalar terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    /// The relation with the operands swapped (`a R b` iff `b R.flip() a`).
    pub fn flip(self) -> RelOp {
        match self {
            RelOp::Eq => RelOp::Eq,
            RelOp::Lt => RelOp::Gt,
            RelOp::Le => RelOp::Ge,
            RelOp::Gt => RelOp::Lt,
            RelOp::Ge => RelOp::Le,
        }
    }

    /// Evaluate the relation on exact rationals.
    pub fn eval(self, a: &Rat, b: &Rat) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }
}

/// A term of scalar sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScalarTerm {
    /// Exact rational constant.
    Rat(Rat),
    /// Scalar variable.
    Var(String),
    Add(Box<ScalarTerm>, Box<ScalarTerm>),
    Neg(Box<ScalarTerm>),
    Mul(Box<ScalarTerm>, Box<ScalarTerm>),
    /// Inner product of two vectors.
    Inner(Box<VectorTerm>, Box<VectorTerm>),
    /// Norm of a vector.
    Norm(Box<VectorTerm>),
    /// Distance between two points.
    Dist(Box<VectorTerm>, Box<VectorTerm>),
}

/// A term of vector (point) sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VectorTerm {
    Var(String),
    /// The zero vector, written `0v`.
    Zero,
    Add(Box<VectorTerm>, Box<VectorTerm>),
    Neg(Box<VectorTerm>),
    /// Multiplication of a vector by a scalar.
    Scale(Box<ScalarTerm>, Box<VectorTerm>),
}

/// First-order formulas over the two-sorted term language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    /// Scalar comparison `s1 op s2`.
    Cmp(RelOp, ScalarTerm, ScalarTerm),
    /// Vector equation `v1 = v2`.
    VecEq(VectorTerm, VectorTerm),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(String, Sort, Box<Formula>),
    Exists(String, Sort, Box<Formula>),
}

// ---------------------------------------------------------------------------
// Scalar term constructors
// ---------------------------------------------------------------------------

impl ScalarTerm {
    pub fn var(name: impl Into<String>) -> ScalarTerm {
        ScalarTerm::Var(name.into())
    }

    pub fn constant(q: Rat) -> ScalarTerm {
        ScalarTerm::Rat(q)
    }

    pub fn int(n: i64) -> ScalarTerm {
        ScalarTerm::Rat(rat_int(n))
    }

    pub fn zero() -> ScalarTerm {
        ScalarTerm::int(0)
    }

    pub fn one() -> ScalarTerm {
        ScalarTerm::int(1)
    }

    pub fn add(a: ScalarTerm, b: ScalarTerm) -> ScalarTerm {
        ScalarTerm::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: ScalarTerm, b: ScalarTerm) -> ScalarTerm {
        ScalarTerm::add(a, ScalarTerm::neg(b))
    }

    pub fn neg(a: ScalarTerm) -> ScalarTerm {
        ScalarTerm::Neg(Box::new(a))
    }

    pub fn mul(a: ScalarTerm, b: ScalarTerm) -> ScalarTerm {
        ScalarTerm::Mul(Box::new(a), Box::new(b))
    }

    pub fn inner(a: VectorTerm, b: VectorTerm) -> ScalarTerm {
        ScalarTerm::Inner(Box::new(a), Box::new(b))
    }

    pub fn norm(a: VectorTerm) -> ScalarTerm {
        ScalarTerm::Norm(Box::new(a))
    }

    pub fn dist(a: VectorTerm, b: VectorTerm) -> ScalarTerm {
        ScalarTerm::Dist(Box::new(a), Box::new(b))
    }

    /// Sum of a list of terms (`0` for the empty list).
    pub fn sum(terms: impl IntoIterator<Item = ScalarTerm>) -> ScalarTerm {
        let mut it = terms.into_iter();
        match it.next() {
            None => ScalarTerm::zero(),
            Some(first) => it.fold(first, ScalarTerm::add),
        }
    }

    /// True iff the term contains no variables (of either sort).
    pub fn is_constant(&self) -> bool {
        match self {
            ScalarTerm::Rat(_) => true,
            ScalarTerm::Var(_) => false,
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => a.is_constant() && b.is_constant(),
            ScalarTerm::Neg(a) => a.is_constant(),
            ScalarTerm::Inner(a, b) | ScalarTerm::Dist(a, b) => a.is_constant() && b.is_constant(),
            ScalarTerm::Norm(a) => a.is_constant(),
        }
    }
}

impl VectorTerm {
    pub fn var(name: impl Into<String>) -> VectorTerm {
        VectorTerm::Var(name.into())
    }

    pub fn add(a: VectorTerm, b: VectorTerm) -> VectorTerm {
        VectorTerm::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: VectorTerm, b: VectorTerm) -> VectorTerm {
        VectorTerm::add(a, VectorTerm::neg(b))
    }

    pub fn neg(a: VectorTerm) -> VectorTerm {
        VectorTerm::Neg(Box::new(a))
    }

    pub fn scale(s: ScalarTerm, v: VectorTerm) -> VectorTerm {
        VectorTerm::Scale(Box::new(s), Box::new(v))
    }

    /// True iff the term contains no variables (of either sort).
    pub fn is_constant(&self) -> bool {
        match self {
            VectorTerm::Var(_) => false,
            VectorTerm::Zero => true,
            VectorTerm::Add(a, b) => a.is_constant() && b.is_constant(),
            VectorTerm::Neg(a) => a.is_constant(),
            VectorTerm::Scale(s, v) => s.is_constant() && v.is_constant(),
        }
    }
}

// ---------------------------------------------------------------------------
// Formula constructors
// ---------------------------------------------------------------------------

impl Formula {
    pub fn cmp(op: RelOp, a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(op, a, b)
    }

    pub fn eq(a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(RelOp::Eq, a, b)
    }

    pub fn le(a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(RelOp::Le, a, b)
    }

    pub fn lt(a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(RelOp::Lt, a, b)
    }

    pub fn ge(a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(RelOp::Ge, a, b)
    }

    pub fn gt(a: ScalarTerm, b: ScalarTerm) -> Formula {
        Formula::Cmp(RelOp::Gt, a, b)
    }

    pub fn vec_eq(a: VectorTerm, b: VectorTerm) -> Formula {
        Formula::VecEq(a, b)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(name: impl Into<String>, sort: Sort, body: Formula) -> Formula {
        Formula::Forall(name.into(), sort, Box::new(body))
    }

    pub fn exists(name: impl Into<String>, sort: Sort, body: Formula) -> Formula {
        Formula::Exists(name.into(), sort, Box::new(body))
    }

    /// A formula that is always true (`0 = 0`).
    pub fn tru() -> Formula {
        Formula::eq(ScalarTerm::zero(), ScalarTerm::zero())
    }

    /// A formula that is always false (`0 = 1`).
    pub fn fls() -> Formula {
        Formula::eq(ScalarTerm::zero(), ScalarTerm::one())
    }

    /// Conjunction of a list of formulas (`true` for the empty list).
    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::tru(),
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Disjunction of a list of formulas (`false` for the empty list).
    pub fn or_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::fls(),
            Some(first) => it.fold(first, Formula::or),
        }
    }

    /// Prefix the formula with universal quantifiers, innermost last.
    pub fn forall_many(binders: &[(String, Sort)], body: Formula) -> Formula {
        binders
            .iter()
            .rev()
            .fold(body, |acc, (n, s)| Formula::forall(n.clone(), *s, acc))
    }

    /// Prefix the formula with existential quantifiers, innermost last.
    pub fn exists_many(binders: &[(String, Sort)], body: Formula) -> Formula {
        binders
            .iter()
            .rev()
            .fold(body, |acc, (n, s)| Formula::exists(n.clone(), *s, acc))
    }
}

// ---------------------------------------------------------------------------
// Variable accounting
// ---------------------------------------------------------------------------

/// Free variables of a formula, with their sorts.
pub fn free_vars(f: &Formula) -> BTreeSet<(String, Sort)> {
    fn sterm(t: &ScalarTerm, bound: &mut Vec<(String, Sort)>, out: &mut BTreeSet<(String, Sort)>) {
        match t {
            ScalarTerm::Rat(_) => {}
            ScalarTerm::Var(x) => {
                if !bound.iter().any(|(n, s)| n == x && *s == Sort::Scalar) {
                    out.insert((x.clone(), Sort::Scalar));
                }
            }
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => {
                sterm(a, bound, out);
                sterm(b, bound, out);
            }
            ScalarTerm::Neg(a) => sterm(a, bound, out),
            ScalarTerm::Inner(a, b) | ScalarTerm::Dist(a, b) => {
                vterm(a, bound, out);
                vterm(b, bound, out);
            }
            ScalarTerm::Norm(a) => vterm(a, bound, out),
        }
    }
    fn vterm(t: &VectorTerm, bound: &mut Vec<(String, Sort)>, out: &mut BTreeSet<(String, Sort)>) {
        match t {
            VectorTerm::Zero => {}
            VectorTerm::Var(x) => {
                if !bound.iter().any(|(n, s)| n == x && *s == Sort::Vector) {
                    out.insert((x.clone(), Sort::Vector));
                }
            }
            VectorTerm::Add(a, b) => {
                vterm(a, bound, out);
                vterm(b, bound, out);
            }
            VectorTerm::Neg(a) => vterm(a, bound, out),
            VectorTerm::Scale(s, v) => {
                sterm(s, bound, out);
                vterm(v, bound, out);
            }
        }
    }
    fn go(f: &Formula, bound: &mut Vec<(String, Sort)>, out: &mut BTreeSet<(String, Sort)>) {
        match f {
            Formula::Cmp(_, a, b) => {
                sterm(a, bound, out);
                sterm(b, bound, out);
            }
            Formula::VecEq(a, b) => {
                vterm(a, bound, out);
                vterm(b, bound, out);
            }
            Formula::Not(p) => go(p, bound, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::Forall(x, s, p) | Formula::Exists(x, s, p) => {
                bound.push((x.clone(), *s));
                go(p, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// True iff the formula is a sentence (no free variables).
pub fn is_closed(f: &Formula) -> bool {
    free_vars(f).is_empty()
}

/// All variable names occurring anywhere in `f` (free or bound, either sort),
/// including binder names.
pub fn all_names(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn sterm(t: &ScalarTerm, out: &mut BTreeSet<String>) {
        match t {
            ScalarTerm::Rat(_) => {}
            ScalarTerm::Var(x) => {
                out.insert(x.clone());
            }
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => {
                sterm(a, out);
                sterm(b, out);
            }
            ScalarTerm::Neg(a) => sterm(a, out),
            ScalarTerm::Inner(a, b) | ScalarTerm::Dist(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            ScalarTerm::Norm(a) => vterm(a, out),
        }
    }
    fn vterm(t: &VectorTerm, out: &mut BTreeSet<String>) {
        match t {
            VectorTerm::Zero => {}
            VectorTerm::Var(x) => {
                out.insert(x.clone());
            }
            VectorTerm::Add(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            VectorTerm::Neg(a) => vterm(a, out),
            VectorTerm::Scale(s, v) => {
                sterm(s, out);
                vterm(v, out);
            }
        }
    }
    fn go(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::Cmp(_, a, b) => {
                sterm(a, out);
                sterm(b, out);
            }
            Formula::VecEq(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            Formula::Not(p) => go(p, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go(a, out);
                go(b, out);
            }
            Formula::Forall(x, _, p) | Formula::Exists(x, _, p) => {
                out.insert(x.clone());
                go(p, out);
            }
        }
    }
    go(f, &mut out);
    out
}

/// Distinct vector variable names occurring anywhere in `f` (free or bound),
/// ignoring binding structure.  This frugal count is the `k` used by the
/// dimension-case analysis: a name reused by several binders counts once.
pub fn count_vector_vars(f: &Formula) -> usize {
    vector_var_names(f).len()
}

/// The set behind [`count_vector_vars`].
pub fn vector_var_names(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn sterm(t: &ScalarTerm, out: &mut BTreeSet<String>) {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => {}
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => {
                sterm(a, out);
                sterm(b, out);
            }
            ScalarTerm::Neg(a) => sterm(a, out),
            ScalarTerm::Inner(a, b) | ScalarTerm::Dist(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            ScalarTerm::Norm(a) => vterm(a, out),
        }
    }
    fn vterm(t: &VectorTerm, out: &mut BTreeSet<String>) {
        match t {
            VectorTerm::Zero => {}
            VectorTerm::Var(x) => {
                out.insert(x.clone());
            }
            VectorTerm::Add(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            VectorTerm::Neg(a) => vterm(a, out),
            VectorTerm::Scale(s, v) => {
                sterm(s, out);
                vterm(v, out);
            }
        }
    }
    fn go(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::Cmp(_, a, b) => {
                sterm(a, out);
                sterm(b, out);
            }
            Formula::VecEq(a, b) => {
                vterm(a, out);
                vterm(b, out);
            }
            Formula::Not(p) => go(p, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go(a, out);
                go(b, out);
            }
            Formula::Forall(x, s, p) | Formula::Exists(x, s, p) => {
                if *s == Sort::Vector {
                    out.insert(x.clone());
                }
                go(p, out);
            }
        }
    }
    go(f, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Language membership checks
// ---------------------------------------------------------------------------

/// Which function symbols beyond the vector-space core appear in a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SymbolUse {
    pub inner: bool,
    pub norm: bool,
    pub dist: bool,
    pub vector_sort: bool,
}

pub fn symbol_use(f: &Formula) -> SymbolUse {
    let mut u = SymbolUse::default();
    fn sterm(t: &ScalarTerm, u: &mut SymbolUse) {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => {}
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => {
                sterm(a, u);
                sterm(b, u);
            }
            ScalarTerm::Neg(a) => sterm(a, u),
            ScalarTerm::Inner(a, b) => {
                u.inner = true;
                vterm(a, u);
                vterm(b, u);
            }
            ScalarTerm::Norm(a) => {
                u.norm = true;
                vterm(a, u);
            }
            ScalarTerm::Dist(a, b) => {
                u.dist = true;
                vterm(a, u);
                vterm(b, u);
            }
        }
    }
    fn vterm(t: &VectorTerm, u: &mut SymbolUse) {
        u.vector_sort = true;
        match t {
            VectorTerm::Zero | VectorTerm::Var(_) => {}
            VectorTerm::Add(a, b) => {
                vterm(a, u);
                vterm(b, u);
            }
            VectorTerm::Neg(a) => vterm(a, u),
            VectorTerm::Scale(s, v) => {
                sterm(s, u);
                vterm(v, u);
            }
        }
    }
    fn go(f: &Formula, u: &mut SymbolUse) {
        match f {
            Formula::Cmp(_, a, b) => {
                sterm(a, u);
                sterm(b, u);
            }
            Formula::VecEq(a, b) => {
                u.vector_sort = true;
                vterm(a, u);
                vterm(b, u);
            }
            Formula::Not(p) => go(p, u),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go(a, u);
                go(b, u);
            }
            Formula::Forall(x, s, p) | Formula::Exists(x, s, p) => {
                let _ = x;
                if *s == Sort::Vector {
                    u.vector_sort = true;
                }
                go(p, u);
            }
        }
    }
    go(f, &mut u);
    u
}

/// True iff only the scalar sort appears (the language of the real ordered
/// field).
pub fn is_scalar_only(f: &Formula) -> bool {
    let u = symbol_use(f);
    !u.vector_sort && !u.inner && !u.norm && !u.dist
}

/// True iff `f` is in the metric-space language: no vector-space operations
/// on points, no norm, no inner product; points appear only as variables
/// under `d` or in point equations.
pub fn in_metric_language(f: &Formula) -> bool {
    fn vterm_is_var(t: &VectorTerm) -> bool {
        matches!(t, VectorTerm::Var(_))
    }
    fn sterm(t: &ScalarTerm) -> bool {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => true,
            ScalarTerm::Add(a, b) | ScalarTerm::Mul(a, b) => sterm(a) && sterm(b),
            ScalarTerm::Neg(a) => sterm(a),
            ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) => false,
            ScalarTerm::Dist(a, b) => vterm_is_var(a) && vterm_is_var(b),
        }
    }
    fn go(f: &Formula) -> bool {
        match f {
            Formula::Cmp(_, a, b) => sterm(a) && sterm(b),
            Formula::VecEq(a, b) => vterm_is_var(a) && vterm_is_var(b),
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

/// True iff `f` is in the inner-product language (vector space operations
/// plus `inner`; no `norm`, no `d`).
pub fn in_inner_language(f: &Formula) -> bool {
    let u = symbol_use(f);
    !u.norm && !u.dist
}

/// True iff `f` is in the normed-space language (vector space operations
/// plus `norm`; `d` is tolerated as shorthand for `norm` of a difference,
/// and is translated away by [`dist_to_norm`]; no `inner`).
pub fn in_normed_language(f: &Formula) -> bool {
    let u = symbol_use(f);
    !u.inner
}

/// True iff `f` is in the plain vector-space language (no `inner`, `norm`,
/// or `d`).
pub fn in_vector_language(f: &Formula) -> bool {
    let u = symbol_use(f);
    !u.inner && !u.norm && !u.dist
}

/// Replace every `d(a, b)` by `norm(a - b)`, the definition of the metric
/// induced by a norm.
pub fn dist_to_norm(f: &Formula) -> Formula {
    fn sterm(t: &ScalarTerm) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => ScalarTerm::add(sterm(a), sterm(b)),
            ScalarTerm::Mul(a, b) => ScalarTerm::mul(sterm(a), sterm(b)),
            ScalarTerm::Neg(a) => ScalarTerm::neg(sterm(a)),
            ScalarTerm::Inner(a, b) => ScalarTerm::inner(vterm(a), vterm(b)),
            ScalarTerm::Norm(a) => ScalarTerm::norm(vterm(a)),
            ScalarTerm::Dist(a, b) => ScalarTerm::norm(VectorTerm::sub(vterm(a), vterm(b))),
        }
    }
    fn vterm(t: &VectorTerm) -> VectorTerm {
        match t {
            VectorTerm::Var(_) | VectorTerm::Zero => t.clone(),
            VectorTerm::Add(a, b) => VectorTerm::add(vterm(a), vterm(b)),
            VectorTerm::Neg(a) => VectorTerm::neg(vterm(a)),
            VectorTerm::Scale(s, v) => VectorTerm::scale(sterm(s), vterm(v)),
        }
    }
    map_atoms(f, &mut |atom| match atom {
        Formula::Cmp(op, a, b) => Formula::Cmp(*op, sterm(a), sterm(b)),
        Formula::VecEq(a, b) => Formula::VecEq(vterm(a), vterm(b)),
        other => other.clone(),
    })
}

/// Rebuild a formula by applying `f` to every atom, keeping the connective
/// and quantifier structure.
pub fn map_atoms(fm: &Formula, f: &mut impl FnMut(&Formula) -> Formula) -> Formula {
    match fm {
        Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => f(fm),
        Formula::Not(p) => Formula::not(map_atoms(p, f)),
        Formula::And(a, b) => Formula::and(map_atoms(a, f), map_atoms(b, f)),
        Formula::Or(a, b) => Formula::or(map_atoms(a, f), map_atoms(b, f)),
        Formula::Implies(a, b) => Formula::implies(map_atoms(a, f), map_atoms(b, f)),
        Formula::Iff(a, b) => Formula::iff(map_atoms(a, f), map_atoms(b, f)),
        Formula::Forall(x, s, p) => Formula::forall(x.clone(), *s, map_atoms(p, f)),
        Formula::Exists(x, s, p) => Formula::exists(x.clone(), *s, map_atoms(p, f)),
    }
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// Substitute scalar terms for free scalar variables.  The substituted terms
/// must be closed (no capture analysis is performed for their variables);
/// this is all the crate needs, since witnesses are rational constants and
/// generator slots are filled with variable-renamed bodies.
pub fn subst_scalar(f: &Formula, map: &std::collections::BTreeMap<String, ScalarTerm>) -> Formula {
    fn sterm(
        t: &ScalarTerm,
        map: &std::collections::BTreeMap<String, ScalarTerm>,
        shadow: &Vec<String>,
    ) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) => t.clone(),
            ScalarTerm::Var(x) => {
                if !shadow.contains(x) {
                    if let Some(r) = map.get(x) {
                        return r.clone();
                    }
                }
                t.clone()
            }
            ScalarTerm::Add(a, b) => ScalarTerm::add(sterm(a, map, shadow), sterm(b, map, shadow)),
            ScalarTerm::Mul(a, b) => ScalarTerm::mul(sterm(a, map, shadow), sterm(b, map, shadow)),
            ScalarTerm::Neg(a) => ScalarTerm::neg(sterm(a, map, shadow)),
            ScalarTerm::Inner(a, b) => {
                ScalarTerm::inner(vterm(a, map, shadow), vterm(b, map, shadow))
            }
            ScalarTerm::Norm(a) => ScalarTerm::norm(vterm(a, map, shadow)),
            ScalarTerm::Dist(a, b) => {
                ScalarTerm::dist(vterm(a, map, shadow), vterm(b, map, shadow))
            }
        }
    }
    fn vterm(
        t: &VectorTerm,
        map: &std::collections::BTreeMap<String, ScalarTerm>,
        shadow: &Vec<String>,
    ) -> VectorTerm {
        match t {
            VectorTerm::Var(_) | VectorTerm::Zero => t.clone(),
            VectorTerm::Add(a, b) => VectorTerm::add(vterm(a, map, shadow), vterm(b, map, shadow)),
            VectorTerm::Neg(a) => VectorTerm::neg(vterm(a, map, shadow)),
            VectorTerm::Scale(s, v) => {
                VectorTerm::scale(sterm(s, map, shadow), vterm(v, map, shadow))
            }
        }
    }
    fn go(
        f: &Formula,
        map: &std::collections::BTreeMap<String, ScalarTerm>,
        shadow: &mut Vec<String>,
    ) -> Formula {
        match f {
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, sterm(a, map, shadow), sterm(b, map, shadow)),
            Formula::VecEq(a, b) => Formula::VecEq(vterm(a, map, shadow), vterm(b, map, shadow)),
            Formula::Not(p) => Formula::not(go(p, map, shadow)),
            Formula::And(a, b) => Formula::and(go(a, map, shadow), go(b, map, shadow)),
            Formula::Or(a, b) => Formula::or(go(a, map, shadow), go(b, map, shadow)),
            Formula::Implies(a, b) => Formula::implies(go(a, map, shadow), go(b, map, shadow)),
            Formula::Iff(a, b) => Formula::iff(go(a, map, shadow), go(b, map, shadow)),
            Formula::Forall(x, s, p) => {
                let pushed = *s == Sort::Scalar;
                if pushed {
                    shadow.push(x.clone());
                }
                let body = go(p, map, shadow);
                if pushed {
                    shadow.pop();
                }
                Formula::forall(x.clone(), *s, body)
            }
            Formula::Exists(x, s, p) => {
                let pushed = *s == Sort::Scalar;
                if pushed {
                    shadow.push(x.clone());
                }
                let body = go(p, map, shadow);
                if pushed {
                    shadow.pop();
                }
                Formula::exists(x.clone(), *s, body)
            }
        }
    }
    go(f, map, &mut Vec::new())
}

/// Substitute a single scalar term for a free scalar variable.
pub fn subst_scalar_var(f: &Formula, var: &str, replacement: &ScalarTerm) -> Formula {
    let mut map = std::collections::BTreeMap::new();
    map.insert(var.to_string(), replacement.clone());
    subst_scalar(f, &map)
}

/// Rename free vector variables according to `map` (used when instantiating
/// universal point quantifiers with witness names).
pub fn rename_vector_vars(
    f: &Formula,
    map: &std::collections::BTreeMap<String, String>,
) -> Formula {
    fn vterm(
        t: &VectorTerm,
        map: &std::collections::BTreeMap<String, String>,
        shadow: &Vec<String>,
    ) -> VectorTerm {
        match t {
            VectorTerm::Var(x) => {
                if !shadow.contains(x) {
                    if let Some(r) = map.get(x) {
                        return VectorTerm::Var(r.clone());
                    }
                }
                t.clone()
            }
            VectorTerm::Zero => VectorTerm::Zero,
            VectorTerm::Add(a, b) => VectorTerm::add(vterm(a, map, shadow), vterm(b, map, shadow)),
            VectorTerm::Neg(a) => VectorTerm::neg(vterm(a, map, shadow)),
            VectorTerm::Scale(s, v) => {
                VectorTerm::scale(sterm(s, map, shadow), vterm(v, map, shadow))
            }
        }
    }
    fn sterm(
        t: &ScalarTerm,
        map: &std::collections::BTreeMap<String, String>,
        shadow: &Vec<String>,
    ) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => ScalarTerm::add(sterm(a, map, shadow), sterm(b, map, shadow)),
            ScalarTerm::Mul(a, b) => ScalarTerm::mul(sterm(a, map, shadow), sterm(b, map, shadow)),
            ScalarTerm::Neg(a) => ScalarTerm::neg(sterm(a, map, shadow)),
            ScalarTerm::Inner(a, b) => {
                ScalarTerm::inner(vterm(a, map, shadow), vterm(b, map, shadow))
            }
            ScalarTerm::Norm(a) => ScalarTerm::norm(vterm(a, map, shadow)),
            ScalarTerm::Dist(a, b) => {
                ScalarTerm::dist(vterm(a, map, shadow), vterm(b, map, shadow))
            }
        }
    }
    fn go(
        f: &Formula,
        map: &std::collections::BTreeMap<String, String>,
        shadow: &mut Vec<String>,
    ) -> Formula {
        match f {
            Formula::Cmp(op, a, b) => {
                Formula::Cmp(*op, sterm(a, map, shadow), sterm(b, map, shadow))
            }
            Formula::VecEq(a, b) => Formula::VecEq(vterm(a, map, shadow), vterm(b, map, shadow)),
            Formula::Not(p) => Formula::not(go(p, map, shadow)),
            Formula::And(a, b) => Formula::and(go(a, map, shadow), go(b, map, shadow)),
            Formula::Or(a, b) => Formula::or(go(a, map, shadow), go(b, map, shadow)),
            Formula::Implies(a, b) => Formula::implies(go(a, map, shadow), go(b, map, shadow)),
            Formula::Iff(a, b) => Formula::iff(go(a, map, shadow), go(b, map, shadow)),
            Formula::Forall(x, s, p) => {
                let pushed = *s == Sort::Vector;
                if pushed {
                    shadow.push(x.clone());
                }
                let body = go(p, map, shadow);
                if pushed {
                    shadow.pop();
                }
                Formula::forall(x.clone(), *s, body)
            }
            Formula::Exists(x, s, p) => {
                let pushed = *s == Sort::Vector;
                if pushed {
                    shadow.push(x.clone());
                }
                let body = go(p, map, shadow);
                if pushed {
                    shadow.pop();
                }
                Formula::exists(x.clone(), *s, body)
            }
        }
    }
    go(f, map, &mut Vec::new())
}

// ---------------------------------------------------------------------------
// Fresh names
// ---------------------------------------------------------------------------

/// Produce a name based on `base` that does not occur in `used`, appending
/// primes deterministically; the chosen name is inserted into `used`.
pub fn fresh_name(base: &str, used: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while used.contains(&name) {
        name.push('\'');
    }
    // The concrete syntax has no prime character; fall back to underscores
    // so generated formulas stay printable.
    if name.contains('\'') {
        name = base.to_string();
        let mut i = 0u64;
        loop {
            let candidate = format!("{name}_{i}");
            if !used.contains(&candidate) {
                name = candidate;
                break;
            }
            i += 1;
        }
    }
    used.insert(name.clone());
    name
}

/// Absolute-value sugar: build the expansion of `ctx(|t|)` as
/// `(t >= 0 /\ ctx(t)) \/ (t < 0 /\ ctx(-t))`.
pub fn abs_case(t: &ScalarTerm, ctx: impl Fn(ScalarTerm) -> Formula) -> Formula {
    Formula::or(
        Formula::and(
            Formula::ge(t.clone(), ScalarTerm::zero()),
            ctx(t.clone()),
        ),
        Formula::and(
            Formula::lt(t.clone(), ScalarTerm::zero()),
            ctx(ScalarTerm::neg(t.clone())),
        ),
    )
}

/// Evaluate a constant scalar term to an exact rational.  Returns `None` if
/// the term contains a variable or a vector-dependent operation.
pub fn eval_constant(t: &ScalarTerm) -> Option<Rat> {
    match t {
        ScalarTerm::Rat(q) => Some(q.clone()),
        ScalarTerm::Var(_) => None,
        ScalarTerm::Add(a, b) => Some(eval_constant(a)? + eval_constant(b)?),
        ScalarTerm::Mul(a, b) => Some(eval_constant(a)? * eval_constant(b)?),
        ScalarTerm::Neg(a) => Some(-eval_constant(a)?),
        ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => None,
    }
}

/// Format an exact rational in the concrete syntax (`a/b`, or just `a` when
/// the denominator is one).
pub fn format_rat(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parse a rational in the concrete syntax accepted by [`format_rat`],
/// including a leading minus sign.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}
