//! Fourier–Motzkin elimination oracle for *linear* scalar sentences.
//!
//! Completely independent of the sign-matrix engine: works on linear
//! forms, eliminates one variable at a time from a disjunctive normal
//! form, combining lower and upper bounds pairwise.  Panics on nonlinear
//! input (the test generator never produces any).

use eag_core::ast::{Formula, Rat, RelOp, ScalarTerm};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// A linear form: coefficient map plus constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lin {
    pub coeffs: BTreeMap<String, Rat>,
    pub konst: Rat,
}

impl Lin {
    fn zero() -> Lin {
        Lin {
            coeffs: BTreeMap::new(),
            konst: Rat::zero(),
        }
    }

    fn constant(q: Rat) -> Lin {
        Lin {
            coeffs: BTreeMap::new(),
            konst: q,
        }
    }

    fn var(x: &str) -> Lin {
        let mut l = Lin::zero();
        l.coeffs.insert(x.to_string(), Rat::one());
        l
    }

    fn add(&self, other: &Lin) -> Lin {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            let e = out.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
            *e += c;
            if e.is_zero() {
                out.coeffs.remove(v);
            }
        }
        out.konst += &other.konst;
        out
    }

    fn neg(&self) -> Lin {
        Lin {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), -c.clone())).collect(),
            konst: -self.konst.clone(),
        }
    }

    fn scale(&self, q: &Rat) -> Lin {
        if q.is_zero() {
            return Lin::zero();
        }
        Lin {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * q)).collect(),
            konst: &self.konst * q,
        }
    }

    fn as_constant(&self) -> Option<&Rat> {
        if self.coeffs.is_empty() {
            Some(&self.konst)
        } else {
            None
        }
    }

    /// Split off the coefficient of `x`: returns (coeff, remainder).
    fn split(&self, x: &str) -> (Rat, Lin) {
        let mut rest = self.clone();
        let c = rest.coeffs.remove(x).unwrap_or_else(Rat::zero);
        (c, rest)
    }
}

fn lin_of_term(t: &ScalarTerm) -> Lin {
    match t {
        ScalarTerm::Rat(q) => Lin::constant(q.clone()),
        ScalarTerm::Var(x) => Lin::var(x),
        ScalarTerm::Add(a, b) => lin_of_term(a).add(&lin_of_term(b)),
        ScalarTerm::Neg(a) => lin_of_term(a).neg(),
        ScalarTerm::Mul(a, b) => {
            let la = lin_of_term(a);
            let lb = lin_of_term(b);
            if let Some(c) = la.as_constant() {
                lb.scale(c)
            } else if let Some(c) = lb.as_constant() {
                la.scale(c)
            } else {
                panic!("fm oracle: nonlinear multiplication")
            }
        }
        _ => panic!("fm oracle: non-arithmetic term"),
    }
}

/// Quantifier-free formulas in negation normal form over linear atoms
/// `l < 0`, `l <= 0`, `l = 0`, `l != 0`.
#[derive(Debug, Clone)]
enum Of {
    True,
    False,
    Lt(Lin),
    Le(Lin),
    Eq(Lin),
    Ne(Lin),
    And(Box<Of>, Box<Of>),
    Or(Box<Of>, Box<Of>),
}

fn mk_lt(l: Lin) -> Of {
    match l.as_constant() {
        Some(c) if c.is_negative() => Of::True,
        Some(_) => Of::False,
        None => Of::Lt(l),
    }
}

fn mk_le(l: Lin) -> Of {
    match l.as_constant() {
        Some(c) if !c.is_positive() => Of::True,
        Some(_) => Of::False,
        None => Of::Le(l),
    }
}

fn mk_eq(l: Lin) -> Of {
    match l.as_constant() {
        Some(c) if c.is_zero() => Of::True,
        Some(_) => Of::False,
        None => Of::Eq(l),
    }
}

fn mk_ne(l: Lin) -> Of {
    match l.as_constant() {
        Some(c) if c.is_zero() => Of::False,
        Some(_) => Of::True,
        None => Of::Ne(l),
    }
}

fn mk_and(a: Of, b: Of) -> Of {
    match (&a, &b) {
        (Of::False, _) | (_, Of::False) => Of::False,
        (Of::True, _) => b,
        (_, Of::True) => a,
        _ => Of::And(Box::new(a), Box::new(b)),
    }
}

fn mk_or(a: Of, b: Of) -> Of {
    match (&a, &b) {
        (Of::True, _) | (_, Of::True) => Of::True,
        (Of::False, _) => b,
        (_, Of::False) => a,
        _ => Of::Or(Box::new(a), Box::new(b)),
    }
}

fn negate(of: &Of) -> Of {
    match of {
        Of::True => Of::False,
        Of::False => Of::True,
        Of::Lt(l) => mk_le(l.neg()),
        Of::Le(l) => mk_lt(l.neg()),
        Of::Eq(l) => mk_ne(l.clone()),
        Of::Ne(l) => mk_eq(l.clone()),
        Of::And(a, b) => mk_or(negate(a), negate(b)),
        Of::Or(a, b) => mk_and(negate(a), negate(b)),
    }
}

fn atom(op: RelOp, a: &ScalarTerm, b: &ScalarTerm) -> Of {
    let p = lin_of_term(a).add(&lin_of_term(b).neg());
    match op {
        RelOp::Eq => mk_eq(p),
        RelOp::Lt => mk_lt(p),
        RelOp::Le => mk_le(p),
        RelOp::Gt => mk_lt(p.neg()),
        RelOp::Ge => mk_le(p.neg()),
    }
}

/// Eliminate all quantifiers from a formula, positively or negatively.
fn elim(f: &Formula, pos: bool) -> Of {
    match f {
        Formula::Cmp(op, a, b) => {
            let at = atom(*op, a, b);
            if pos {
                at
            } else {
                negate(&at)
            }
        }
        Formula::VecEq(_, _) => panic!("fm oracle: vector atom"),
        Formula::Not(p) => elim(p, !pos),
        Formula::And(a, b) => {
            if pos {
                mk_and(elim(a, true), elim(b, true))
            } else {
                mk_or(elim(a, false), elim(b, false))
            }
        }
        Formula::Or(a, b) => {
            if pos {
                mk_or(elim(a, true), elim(b, true))
            } else {
                mk_and(elim(a, false), elim(b, false))
            }
        }
        Formula::Implies(a, b) => {
            if pos {
                mk_or(elim(a, false), elim(b, true))
            } else {
                mk_and(elim(a, true), elim(b, false))
            }
        }
        Formula::Iff(a, b) => {
            if pos {
                mk_or(
                    mk_and(elim(a, true), elim(b, true)),
                    mk_and(elim(a, false), elim(b, false)),
                )
            } else {
                mk_or(
                    mk_and(elim(a, true), elim(b, false)),
                    mk_and(elim(a, false), elim(b, true)),
                )
            }
        }
        Formula::Exists(x, _, p) => {
            let e = ex_elim(x, elim(p, true));
            if pos {
                e
            } else {
                negate(&e)
            }
        }
        Formula::Forall(x, _, p) => {
            // forall x. p  ==  not (exists x. not p)
            let e = ex_elim(x, elim(p, false));
            if pos {
                negate(&e)
            } else {
                e
            }
        }
    }
}

/// Atom kinds inside a DNF conjunct after `!=` has been split away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lt,
    Le,
    Eq,
}

fn dnf(of: &Of) -> Vec<Vec<(Kind, Lin)>> {
    match of {
        Of::True => vec![vec![]],
        Of::False => vec![],
        Of::Lt(l) => vec![vec![(Kind::Lt, l.clone())]],
        Of::Le(l) => vec![vec![(Kind::Le, l.clone())]],
        Of::Eq(l) => vec![vec![(Kind::Eq, l.clone())]],
        // l != 0 becomes l < 0 or -l < 0 at this point.
        Of::Ne(l) => vec![
            vec![(Kind::Lt, l.clone())],
            vec![(Kind::Lt, l.neg())],
        ],
        Of::And(a, b) => {
            let da = dnf(a);
            let db = dnf(b);
            let mut out = Vec::new();
            for ca in &da {
                for cb in &db {
                    let mut c = ca.clone();
                    c.extend(cb.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
        Of::Or(a, b) => {
            let mut out = dnf(a);
            out.extend(dnf(b));
            out
        }
    }
}

/// Eliminate `exists x` from one conjunct of linear constraints.
fn elim_conjunct(x: &str, conj: &[(Kind, Lin)]) -> Vec<(Kind, Lin)> {
    // An equation with nonzero x-coefficient lets us substitute exactly.
    if let Some(pos) = conj
        .iter()
        .position(|(k, l)| *k == Kind::Eq && !l.split(x).0.is_zero())
    {
        let (c, rest) = conj[pos].1.split(x);
        // x = -rest / c
        let sol = rest.scale(&(-Rat::one() / c));
        let mut out = Vec::new();
        for (i, (k, l)) in conj.iter().enumerate() {
            if i == pos {
                continue;
            }
            let (cl, lr) = l.split(x);
            out.push((*k, lr.add(&sol.scale(&cl))));
        }
        return out;
    }
    let mut keep: Vec<(Kind, Lin)> = Vec::new();
    let mut lowers: Vec<(Lin, bool)> = Vec::new(); // x > / >= bound, strict?
    let mut uppers: Vec<(Lin, bool)> = Vec::new();
    for (k, l) in conj {
        let (c, r) = l.split(x);
        if c.is_zero() {
            keep.push((*k, r));
            continue;
        }
        debug_assert_ne!(*k, Kind::Eq, "handled above");
        let bound = r.scale(&(-Rat::one() / c.clone()));
        let strict = *k == Kind::Lt;
        if c.is_positive() {
            // c x + r (<|<=) 0   =>   x (<|<=) bound
            uppers.push((bound, strict));
        } else {
            lowers.push((bound, strict));
        }
    }
    for (lo, slo) in &lowers {
        for (hi, shi) in &uppers {
            let diff = lo.add(&hi.neg());
            let k = if *slo || *shi { Kind::Lt } else { Kind::Le };
            keep.push((k, diff));
        }
    }
    keep
}

fn ex_elim(x: &str, of: Of) -> Of {
    let mut out = Of::False;
    for conj in dnf(&of) {
        let reduced = elim_conjunct(x, &conj);
        let mut c = Of::True;
        for (k, l) in reduced {
            let a = match k {
                Kind::Lt => mk_lt(l),
                Kind::Le => mk_le(l),
                Kind::Eq => mk_eq(l),
            };
            c = mk_and(c, a);
        }
        out = mk_or(out, c);
    }
    out
}

/// Decide a closed linear scalar sentence by Fourier–Motzkin elimination.
pub fn fm_decide(f: &Formula) -> bool {
    match elim(f, true) {
        Of::True => true,
        Of::False => false,
        other => panic!("fm oracle: residue on closed input: {other:?}"),
    }
}
