//! Decision procedure and quantifier elimination for the first-order
//! theory of the real ordered field.
//!
//! The algorithm is the Cohen–Hörmander sign-matrix method: to eliminate
//! `exists x. p(x, params)`, recursively compute a complete description of
//! the signs of all atom polynomials (viewed as univariate in `x`) over an
//! ordered partition of the real line into points and intervals, then check
//! whether any cell satisfies the matrix of the formula.  Case splits on
//! the signs of parameter coefficients are emitted as quantifier-free
//! conditions, so the procedure performs full quantifier elimination.
//!
//! All arithmetic is exact rational arithmetic; resource limits are
//! enforced by a [`Budget`] and exceeding them is an explicit error, never
//! a wrong answer.

use crate::ast::{
    eval_constant, free_vars, is_closed, is_scalar_only, rat_int, subst_scalar_var,
    Formula, Rat, RelOp, ScalarTerm, Sort,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Public API surface
// ---------------------------------------------------------------------------

/// Truth of a sentence over the reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid,
}

/// A map from variable names to exact rational values.
pub type RationalAssignment = BTreeMap<String, Rat>;

/// Errors reported by the real-closed-field backend.
#[derive(Debug, Clone, thiserror::Error)]
pub enum RcfError {
    #[error("resource budget exceeded")]
    Budget,
    #[error("formula contains vector-sorted symbols; only scalar formulas are supported here")]
    NonScalar,
    #[error("formula is not a sentence; free variables: {0}")]
    NotClosed(String),
    #[error("formula is not quantifier-free")]
    NotQuantifierFree,
    #[error("no value for variable `{0}` in the assignment")]
    MissingVariable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// A shared, interior-mutable work allowance.  Each unit roughly
/// corresponds to one node of the sign-matrix case analysis.
#[derive(Debug)]
pub struct Budget {
    limit: u64,
    used: Cell<u64>,
}

impl Budget {
    pub fn new(limit: u64) -> Budget {
        Budget {
            limit,
            used: Cell::new(0),
        }
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    fn tick(&self) -> Result<(), EErr> {
        self.charge(1)
    }

    /// Charge several units at once.  Used to bill the size of
    /// intermediate formulas produced by quantifier elimination, so that
    /// runaway residue growth is caught even on code paths that do not
    /// go through the sign-matrix core.
    fn charge(&self, n: u64) -> Result<(), EErr> {
        let u = self.used.get().saturating_add(n);
        self.used.set(u);
        if u > self.limit {
            Err(EErr::Budget)
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    /// A generous default suitable for desk-scale problems.
    fn default() -> Budget {
        Budget::new(2_000_000)
    }
}

/// Engine-internal error channel.  `Inconsistent` marks a contradictory
/// sign context; it is caught inside the elimination (the offending branch
/// is simply false) and never escapes to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EErr {
    Budget,
    NonScalar,
    Inconsistent,
}

fn lift_err(e: EErr) -> RcfError {
    match e {
        EErr::Budget => RcfError::Budget,
        EErr::NonScalar => RcfError::NonScalar,
        EErr::Inconsistent => {
            RcfError::Internal("inconsistent sign context escaped the eliminator".into())
        }
    }
}

// ---------------------------------------------------------------------------
// Multivariate polynomials
// ---------------------------------------------------------------------------

/// Monomial: variable name -> positive exponent.
pub type Monomial = BTreeMap<String, u32>;

/// A multivariate polynomial with exact rational coefficients, stored as a
/// map from monomials to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct MPoly {
    terms: BTreeMap<Monomial, Rat>,
}

impl MPoly {
    pub fn zero() -> MPoly {
        MPoly::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant(q: Rat) -> MPoly {
        let mut p = MPoly::zero();
        p.add_term(Monomial::new(), q);
        p
    }

    pub fn var(name: &str) -> MPoly {
        let mut m = Monomial::new();
        m.insert(name.to_string(), 1);
        let mut p = MPoly::zero();
        p.add_term(m, Rat::one());
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                for (v, e) in m2 {
                    *m.entry(v.clone()).or_insert(0) += e;
                }
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, q: &Rat) -> MPoly {
        if q.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    /// `Some(c)` if the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::new()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            out.extend(m.keys().cloned());
        }
        out
    }

    pub fn eval(&self, a: &RationalAssignment) -> Result<Rat, RcfError> {
        let mut total = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m {
                let x = a
                    .get(v)
                    .ok_or_else(|| RcfError::MissingVariable(v.clone()))?;
                for _ in 0..*e {
                    t *= x;
                }
            }
            total += t;
        }
        Ok(total)
    }
}

/// Convert a scalar term into a polynomial.  Vector-valued function
/// symbols are rejected.
fn poly_of_term(t: &ScalarTerm) -> Result<MPoly, EErr> {
    match t {
        ScalarTerm::Rat(q) => Ok(MPoly::constant(q.clone())),
        ScalarTerm::Var(x) => Ok(MPoly::var(x)),
        ScalarTerm::Add(a, b) => Ok(poly_of_term(a)?.add(&poly_of_term(b)?)),
        ScalarTerm::Neg(a) => Ok(poly_of_term(a)?.neg()),
        ScalarTerm::Mul(a, b) => Ok(poly_of_term(a)?.mul(&poly_of_term(b)?)),
        ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => {
            Err(EErr::NonScalar)
        }
    }
}

/// Normalize to an integer-coefficient, content-free polynomial with
/// positive leading coefficient (in monomial order).  Returns the
/// normalized polynomial and whether the sign was flipped.
fn int_normalize(p: &MPoly) -> (MPoly, bool) {
    if p.is_zero() {
        return (MPoly::zero(), false);
    }
    let mut denom_lcm = BigInt::one();
    let mut numer_gcd = BigInt::zero();
    for c in p.terms.values() {
        denom_lcm = denom_lcm.lcm(c.denom());
        numer_gcd = numer_gcd.gcd(c.numer());
    }
    let scale = Rat::new(denom_lcm, numer_gcd);
    let scaled = p.scale(&scale.abs());
    // Leading coefficient: the largest monomial in the canonical order.
    let lead = scaled.terms.values().next_back().unwrap();
    if lead.is_negative() {
        (scaled.neg(), true)
    } else {
        (scaled, false)
    }
}

/// Render a polynomial back into a scalar term (sum of monomials in
/// canonical order).
fn term_of_poly(p: &MPoly) -> ScalarTerm {
    if p.is_zero() {
        return ScalarTerm::zero();
    }
    let mut parts = Vec::new();
    for (m, c) in &p.terms {
        let mut factors: Vec<ScalarTerm> = Vec::new();
        for (v, e) in m {
            for _ in 0..*e {
                factors.push(ScalarTerm::var(v.clone()));
            }
        }
        let mono = if factors.is_empty() {
            ScalarTerm::constant(c.clone())
        } else {
            let vars = factors
                .into_iter()
                .reduce(ScalarTerm::mul)
                .expect("nonempty factor list");
            if c == &Rat::one() {
                vars
            } else {
                ScalarTerm::mul(ScalarTerm::constant(c.clone()), vars)
            }
        };
        parts.push(mono);
    }
    parts.into_iter().reduce(ScalarTerm::add).expect("nonzero polynomial")
}

/// Canonical atom `p rel 0`, with `p` integer-coefficient content-free and
/// positive leading coefficient (the relation is flipped if the sign was).
fn atom_of_poly(op: RelOp, p: &MPoly) -> Formula {
    if let Some(c) = p.as_constant() {
        return if op.eval(&c, &Rat::zero()) {
            Formula::tru()
        } else {
            Formula::fls()
        };
    }
    let (q, flipped) = int_normalize(p);
    let op = if flipped { op.flip() } else { op };
    Formula::cmp(op, term_of_poly(&q), ScalarTerm::zero())
}

// ---------------------------------------------------------------------------
// Univariate view: coefficients (ascending) in the elimination variable
// ---------------------------------------------------------------------------

type UPoly = Vec<MPoly>;

fn up_trim(mut v: UPoly) -> UPoly {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
    v
}

fn up_of_mpoly(p: &MPoly, x: &str) -> UPoly {
    let mut coeffs: Vec<MPoly> = Vec::new();
    for (m, c) in &p.terms {
        let e = *m.get(x).unwrap_or(&0) as usize;
        let mut rest = m.clone();
        rest.remove(x);
        if coeffs.len() <= e {
            coeffs.resize(e + 1, MPoly::zero());
        }
        coeffs[e].add_term(rest, c.clone());
    }
    up_trim(coeffs)
}

fn up_head(p: &[MPoly]) -> MPoly {
    p.last().cloned().unwrap_or_else(MPoly::zero)
}

fn up_behead(p: &[MPoly]) -> UPoly {
    if p.is_empty() {
        return Vec::new();
    }
    up_trim(p[..p.len() - 1].to_vec())
}

fn up_is_constant(p: &[MPoly]) -> bool {
    p.len() <= 1
}

fn up_neg(p: &[MPoly]) -> UPoly {
    p.iter().map(|c| c.neg()).collect()
}

fn up_mul_mp(p: &[MPoly], a: &MPoly) -> UPoly {
    up_trim(p.iter().map(|c| c.mul(a)).collect())
}

fn up_sub(a: &[MPoly], b: &[MPoly]) -> UPoly {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ca = a.get(i).cloned().unwrap_or_else(MPoly::zero);
        let cb = b.get(i).cloned().unwrap_or_else(MPoly::zero);
        out.push(ca.sub(&cb));
    }
    up_trim(out)
}

fn up_shift(p: &[MPoly], k: usize) -> UPoly {
    if p.is_empty() {
        return Vec::new();
    }
    let mut out = vec![MPoly::zero(); k];
    out.extend(p.iter().cloned());
    out
}

fn up_derivative(p: &[MPoly]) -> UPoly {
    let mut out = Vec::new();
    for (i, c) in p.iter().enumerate().skip(1) {
        out.push(c.scale(&rat_int(i as i64)));
    }
    up_trim(out)
}

/// Rebuild a polynomial from its coefficient list in `x`.
fn mp_of_up(up: &[MPoly], x: &str) -> MPoly {
    let xv = MPoly::var(x);
    let mut pow = MPoly::constant(Rat::one());
    let mut out = MPoly::zero();
    for c in up {
        out = out.add(&c.mul(&pow));
        pow = pow.mul(&xv);
    }
    out
}

/// Exact rational square root, if one exists.
fn rat_sqrt(c: &Rat) -> Option<Rat> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    if &(&n * &n) == c.numer() && &(&d * &d) == c.denom() {
        Some(Rat::new(n, d))
    } else {
        None
    }
}

/// Exact polynomial division: `Some(q)` with `p = q * d`, or `None` when
/// `d` does not divide `p`.
fn mp_div_exact(p: &MPoly, d: &MPoly) -> Option<MPoly> {
    if p.is_zero() {
        return Some(MPoly::zero());
    }
    if let Some(c) = d.as_constant() {
        if c.is_zero() {
            return None;
        }
        return Some(p.scale(&(Rat::one() / c)));
    }
    let x = d.vars().into_iter().next().expect("nonconstant divisor");
    let dp = up_of_mpoly(d, &x);
    let mut pp = up_of_mpoly(p, &x);
    let dd = dp.len() - 1;
    if pp.len() < dp.len() {
        return None;
    }
    let mut q: Vec<MPoly> = vec![MPoly::zero(); pp.len() - dd];
    for i in (dd..pp.len()).rev() {
        if pp[i].is_zero() {
            continue;
        }
        let qi = mp_div_exact(&pp[i], &dp[dd])?;
        for (k, dc) in dp.iter().enumerate() {
            pp[i - dd + k] = pp[i - dd + k].sub(&qi.mul(dc));
        }
        q[i - dd] = qi;
    }
    if pp.iter().all(|c| c.is_zero()) {
        Some(mp_of_up(&q, &x))
    } else {
        None
    }
}

/// Exact polynomial square root, if one exists.
fn mp_sqrt(p: &MPoly) -> Option<MPoly> {
    if let Some(c) = p.as_constant() {
        return rat_sqrt(&c).map(MPoly::constant);
    }
    let x = p.vars().into_iter().next().expect("nonconstant polynomial");
    let up = up_of_mpoly(p, &x);
    let deg = up.len() - 1;
    if deg % 2 != 0 {
        return None;
    }
    let d = deg / 2;
    let mut r: Vec<MPoly> = vec![MPoly::zero(); d + 1];
    r[d] = mp_sqrt(&up[deg])?;
    let two_lead = r[d].scale(&rat_int(2));
    for j in (0..d).rev() {
        // Coefficient of x^(d+j) in r^2 contributed by the already known
        // coefficients r_(j+1) .. r_d.
        let mut s = MPoly::zero();
        for i in (j + 1)..=d {
            let k = d + j - i;
            if k > j && k <= d {
                s = s.add(&r[i].mul(&r[k]));
            }
        }
        let target = up.get(d + j).cloned().unwrap_or_else(MPoly::zero);
        r[j] = mp_div_exact(&target.sub(&s), &two_lead)?;
    }
    let root = mp_of_up(&r, &x);
    if root.mul(&root) == *p {
        Some(root)
    } else {
        None
    }
}

/// Decompose `p` into a product of factors with multiplicities: the
/// monomial content variable by variable, then repeated exact square
/// roots of the residual.  The product of `f^e` over the result is `p`.
fn factor_decompose(p: &MPoly) -> Vec<(MPoly, u32)> {
    let mut out: Vec<(MPoly, u32)> = Vec::new();
    // Minimum exponent of each variable over all monomials.
    let mut min_exp: BTreeMap<String, u32> = BTreeMap::new();
    let mut first = true;
    for m in p.terms.keys() {
        if first {
            min_exp = m.clone();
            first = false;
        } else {
            min_exp.retain(|v, e| {
                if let Some(me) = m.get(v) {
                    *e = (*e).min(*me);
                    true
                } else {
                    false
                }
            });
        }
    }
    let mut q = MPoly::zero();
    for (m, c) in &p.terms {
        let mut rest = m.clone();
        for (v, e) in &min_exp {
            let slot = rest.get_mut(v).expect("content variable present");
            *slot -= e;
            if *slot == 0 {
                rest.remove(v);
            }
        }
        q.add_term(rest, c.clone());
    }
    for (v, e) in min_exp {
        out.push((MPoly::var(&v), e));
    }
    let mut mult = 1u32;
    while q.as_constant().is_none() {
        match mp_sqrt(&q) {
            Some(r) => {
                q = r;
                mult *= 2;
            }
            None => break,
        }
    }
    out.push((q, mult));
    out
}

/// `p rel 0` expressed through the factor decomposition of `p`: even
/// multiplicities contribute only zero tests, odd multiplicities carry the
/// sign through their plain product.
fn split_cmp(op: RelOp, p: &MPoly) -> Formula {
    if p.as_constant().is_some() {
        return atom_of_poly(op, p);
    }
    let factors = factor_decompose(p);
    if factors.len() == 1 && factors[0].1 == 1 {
        return atom_of_poly(op, &factors[0].0);
    }
    let any_zero = factors
        .iter()
        .fold(Formula::fls(), |acc, (f, _)| s_or(acc, atom_of_poly(RelOp::Eq, f)));
    let all_nonzero = factors
        .iter()
        .fold(Formula::tru(), |acc, (f, _)| {
            s_and(acc, s_not(atom_of_poly(RelOp::Eq, f)))
        });
    let odd_part = factors
        .iter()
        .filter(|(_, e)| e % 2 == 1)
        .fold(MPoly::constant(Rat::one()), |acc, (f, _)| acc.mul(f));
    match op {
        RelOp::Eq => any_zero,
        RelOp::Gt => s_and(all_nonzero, atom_of_poly(RelOp::Gt, &odd_part)),
        RelOp::Lt => s_and(all_nonzero, atom_of_poly(RelOp::Lt, &odd_part)),
        RelOp::Ge => s_or(any_zero, atom_of_poly(RelOp::Gt, &odd_part)),
        RelOp::Le => s_or(any_zero, atom_of_poly(RelOp::Lt, &odd_part)),
    }
}

/// Rewrite every atom of a quantifier-free formula through its factor
/// decomposition, so products and perfect powers collapse into sign
/// conditions on their factors.
fn split_atoms(f: &Formula) -> Formula {
    match f {
        Formula::Cmp(op, a, b) => {
            let Ok(pa) = poly_of_term(a) else { return f.clone() };
            let Ok(pb) = poly_of_term(b) else { return f.clone() };
            split_cmp(*op, &pa.sub(&pb))
        }
        Formula::Not(p) => s_not(split_atoms(p)),
        Formula::And(a, b) => s_and(split_atoms(a), split_atoms(b)),
        Formula::Or(a, b) => s_or(split_atoms(a), split_atoms(b)),
        Formula::Implies(a, b) => s_implies(split_atoms(a), split_atoms(b)),
        Formula::Iff(a, b) => s_iff(split_atoms(a), split_atoms(b)),
        Formula::VecEq(_, _) | Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => f.clone(),
    }
}

/// Pseudo-division: returns `(k, r)` such that `head(q)^k * s = q*t + r`
/// for some quotient `t`, with `deg r < deg q`.
fn pdivide(s: &[MPoly], q: &[MPoly]) -> (u32, UPoly) {
    let b = up_head(q);
    let mut r = up_trim(s.to_vec());
    let mut k = 0u32;
    while !r.is_empty() && r.len() >= q.len() {
        let c = up_head(&r);
        let shifted = up_shift(&up_mul_mp(q, &c), r.len() - q.len());
        r = up_sub(&up_mul_mp(&r, &b), &shifted);
        k += 1;
    }
    (k, r)
}

// ---------------------------------------------------------------------------
// Signs and sign contexts
// ---------------------------------------------------------------------------

/// Sign of a polynomial in a (possibly partial) context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Zero,
    Nonzero,
    Positive,
    Negative,
}

fn flip_sign(s: Sign) -> Sign {
    match s {
        Sign::Positive => Sign::Negative,
        Sign::Negative => Sign::Positive,
        other => other,
    }
}

fn rat_sign(q: &Rat) -> Sign {
    if q.is_zero() {
        Sign::Zero
    } else if q.is_positive() {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Assumed signs of (normalized, nonconstant) parameter polynomials.
type SignCtx = Vec<(MPoly, Sign)>;

fn findsign(sgns: &SignCtx, p: &MPoly) -> Option<Sign> {
    if let Some(c) = p.as_constant() {
        return Some(rat_sign(&c));
    }
    let (pn, flipped) = int_normalize(p);
    sgns.iter()
        .find(|(q, _)| *q == pn)
        .map(|(_, s)| if flipped { flip_sign(*s) } else { *s })
}

fn assertsign(sgns: &SignCtx, p: &MPoly, s: Sign) -> Result<SignCtx, EErr> {
    if let Some(c) = p.as_constant() {
        return if rat_sign(&c) == s {
            Ok(sgns.clone())
        } else {
            Err(EErr::Inconsistent)
        };
    }
    let (pn, flipped) = int_normalize(p);
    let s2 = if flipped { flip_sign(s) } else { s };
    let mut out = sgns.clone();
    if let Some(entry) = out.iter_mut().find(|(q, _)| *q == pn) {
        let s0 = entry.1;
        if s0 == s2 || (s0 == Sign::Nonzero && matches!(s2, Sign::Positive | Sign::Negative)) {
            entry.1 = s2;
            Ok(out)
        } else if s2 == Sign::Nonzero && matches!(s0, Sign::Positive | Sign::Negative) {
            Ok(out)
        } else {
            Err(EErr::Inconsistent)
        }
    } else {
        out.push((pn, s2));
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Boolean skeletons of quantifier-free matrices
// ---------------------------------------------------------------------------

enum Bf {
    Const(bool),
    Atom(RelOp, usize),
    Not(Box<Bf>),
    And(Box<Bf>, Box<Bf>),
    Or(Box<Bf>, Box<Bf>),
    Implies(Box<Bf>, Box<Bf>),
    Iff(Box<Bf>, Box<Bf>),
}

/// Convert a quantifier-free scalar formula into a skeleton over a shared
/// polynomial table.  Atom polynomials are sign-normalized so that `p < 0`
/// and `-p > 0` share one table entry.
fn bf_of_formula(f: &Formula, pols: &mut Vec<MPoly>) -> Result<Bf, EErr> {
    match f {
        Formula::Cmp(op, a, b) => {
            let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
            if let Some(c) = p.as_constant() {
                return Ok(Bf::Const(op.eval(&c, &Rat::zero())));
            }
            let (pn, flipped) = int_normalize(&p);
            let op = if flipped { op.flip() } else { *op };
            let idx = match pols.iter().position(|q| *q == pn) {
                Some(i) => i,
                None => {
                    pols.push(pn);
                    pols.len() - 1
                }
            };
            Ok(Bf::Atom(op, idx))
        }
        Formula::VecEq(_, _) => Err(EErr::NonScalar),
        Formula::Not(p) => Ok(Bf::Not(Box::new(bf_of_formula(p, pols)?))),
        Formula::And(a, b) => Ok(Bf::And(
            Box::new(bf_of_formula(a, pols)?),
            Box::new(bf_of_formula(b, pols)?),
        )),
        Formula::Or(a, b) => Ok(Bf::Or(
            Box::new(bf_of_formula(a, pols)?),
            Box::new(bf_of_formula(b, pols)?),
        )),
        Formula::Implies(a, b) => Ok(Bf::Implies(
            Box::new(bf_of_formula(a, pols)?),
            Box::new(bf_of_formula(b, pols)?),
        )),
        Formula::Iff(a, b) => Ok(Bf::Iff(
            Box::new(bf_of_formula(a, pols)?),
            Box::new(bf_of_formula(b, pols)?),
        )),
        Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => Err(EErr::NonScalar),
    }
}

fn sign_satisfies(op: RelOp, s: Sign) -> bool {
    match op {
        RelOp::Eq => s == Sign::Zero,
        RelOp::Lt => s == Sign::Negative,
        RelOp::Gt => s == Sign::Positive,
        RelOp::Le => matches!(s, Sign::Zero | Sign::Negative),
        RelOp::Ge => matches!(s, Sign::Zero | Sign::Positive),
    }
}

fn testform(bf: &Bf, row: &[Sign]) -> bool {
    match bf {
        Bf::Const(b) => *b,
        Bf::Atom(op, i) => sign_satisfies(*op, row[*i]),
        Bf::Not(p) => !testform(p, row),
        Bf::And(a, b) => testform(a, row) && testform(b, row),
        Bf::Or(a, b) => testform(a, row) || testform(b, row),
        Bf::Implies(a, b) => !testform(a, row) || testform(b, row),
        Bf::Iff(a, b) => testform(a, row) == testform(b, row),
    }
}

// ---------------------------------------------------------------------------
// The Cohen–Hörmander sign-matrix recursion
// ---------------------------------------------------------------------------

type FRes = Result<Formula, EErr>;
type Cont<'a> = &'a dyn Fn(&SignCtx) -> FRes;
type MatCont<'a> = &'a dyn Fn(&SignCtx, Vec<Vec<Sign>>) -> FRes;

/// Case split on whether `pol` is zero; unknown signs become explicit
/// quantifier-free conditions on the parameters.
fn split_zero(sgns: &SignCtx, pol: &MPoly, cont_z: Cont, cont_n: Cont) -> FRes {
    match findsign(sgns, pol) {
        Some(Sign::Zero) => cont_z(sgns),
        Some(_) => cont_n(sgns),
        None => {
            let sz = assertsign(sgns, pol, Sign::Zero)?;
            let sn = assertsign(sgns, pol, Sign::Nonzero)?;
            let cond = atom_of_poly(RelOp::Eq, pol);
            let fz = cont_z(&sz)?;
            let fnz = cont_n(&sn)?;
            Ok(s_or(s_and(cond.clone(), fz), s_and(s_not(cond), fnz)))
        }
    }
}

/// Refine a known-nonzero polynomial into positive/negative cases.
fn split_sign(sgns: &SignCtx, pol: &MPoly, cont: Cont) -> FRes {
    match findsign(sgns, pol) {
        Some(Sign::Nonzero) => {
            let sp = assertsign(sgns, pol, Sign::Positive)?;
            let sn = assertsign(sgns, pol, Sign::Negative)?;
            let cond = atom_of_poly(RelOp::Gt, pol);
            let fp = cont(&sp)?;
            let fneg = cont(&sn)?;
            Ok(s_or(s_and(cond.clone(), fp), s_and(s_not(cond), fneg)))
        }
        _ => cont(sgns),
    }
}

fn split_trichotomy(sgns: &SignCtx, pol: &MPoly, cont_z: Cont, cont_pn: Cont) -> FRes {
    split_zero(sgns, pol, cont_z, &|s: &SignCtx| split_sign(s, pol, cont_pn))
}

/// Reduce every polynomial to one whose head coefficient has a known
/// nonzero sign, then hand the survivors to [`matrix`].
fn casesplit(
    budget: &Budget,
    dun: &[UPoly],
    pols: &[UPoly],
    cont: MatCont,
    sgns: &SignCtx,
) -> FRes {
    budget.tick()?;
    let Some((p, ops)) = pols.split_first() else {
        return matrix(budget, dun, cont, sgns);
    };
    let head = up_head(p);
    let zero_branch = |s: &SignCtx| -> FRes {
        if up_is_constant(p) {
            delconst(budget, dun, p, ops, cont, s)
        } else {
            let mut rest = vec![up_behead(p)];
            rest.extend_from_slice(ops);
            casesplit(budget, dun, &rest, cont, s)
        }
    };
    let sign_branch = |s: &SignCtx| -> FRes {
        if up_is_constant(p) {
            delconst(budget, dun, p, ops, cont, s)
        } else {
            let mut done = dun.to_vec();
            done.push(p.clone());
            casesplit(budget, &done, ops, cont, s)
        }
    };
    split_trichotomy(sgns, &head, &zero_branch, &sign_branch)
}

/// A polynomial constant in the elimination variable gets a fixed sign
/// column inserted into every row of the eventual matrix.
fn delconst(
    budget: &Budget,
    dun: &[UPoly],
    p: &[MPoly],
    ops: &[UPoly],
    cont: MatCont,
    sgns: &SignCtx,
) -> FRes {
    let c = if p.is_empty() { MPoly::zero() } else { p[0].clone() };
    let Some(s) = findsign(sgns, &c) else {
        return Err(EErr::Inconsistent);
    };
    let i = dun.len();
    let cont2 = |sg: &SignCtx, mat: Vec<Vec<Sign>>| -> FRes {
        let rows = mat
            .into_iter()
            .map(|mut row| {
                row.insert(i, s);
                row
            })
            .collect();
        cont(sg, rows)
    };
    casesplit(budget, dun, ops, &cont2, sgns)
}

/// Core step: pick the polynomial `p` of maximal degree, recursively get a
/// sign matrix for its derivative, the other polynomials, and the adjusted
/// pseudo-remainders of `p` by each of those, then deduce the full sign
/// behavior of `p` by interval reasoning.
fn matrix(budget: &Budget, pols: &[UPoly], cont: MatCont, sgns: &SignCtx) -> FRes {
    if pols.is_empty() {
        // A single unbounded interval; inconsistencies detected anywhere in
        // the deduction tower mean this branch of the case analysis is
        // impossible.
        return match cont(sgns, vec![vec![]]) {
            Err(EErr::Inconsistent) => Ok(Formula::fls()),
            other => other,
        };
    }
    budget.tick()?;
    let i = (0..pols.len())
        .max_by_key(|&j| pols[j].len())
        .expect("nonempty polynomial list");
    let p = &pols[i];
    let pd = up_derivative(p);
    let mut qs: Vec<UPoly> = vec![pd];
    for (j, q) in pols.iter().enumerate() {
        if j != i {
            qs.push(q.clone());
        }
    }
    let mut gs = Vec::with_capacity(qs.len());
    for q in &qs {
        gs.push(pdivide_pos(sgns, p, q)?);
    }
    let cont2 = |sg: &SignCtx, mat: Vec<Vec<Sign>>| -> FRes {
        let rows = mat
            .into_iter()
            .map(|row| {
                let mut r: Vec<Sign> = row[1..].to_vec();
                r.insert(i, row[0]);
                r
            })
            .collect();
        cont(sg, rows)
    };
    let mut all = qs;
    all.extend(gs);
    let dm = |sg: &SignCtx, mat: Vec<Vec<Sign>>| -> FRes { dedmatrix(&cont2, sg, mat) };
    casesplit(budget, &[], &all, &dm, sgns)
}

/// Remainder of `s` divided by `q`, adjusted by a positive factor so that
/// at any root of `q` the sign of `s` equals the sign of the result.
fn pdivide_pos(sgns: &SignCtx, s: &[MPoly], q: &[MPoly]) -> Result<UPoly, EErr> {
    let a = up_head(q);
    let (k, r) = pdivide(s, q);
    match findsign(sgns, &a) {
        Some(Sign::Zero) => Err(EErr::Inconsistent),
        Some(Sign::Positive) => Ok(r),
        _ if k % 2 == 0 => Ok(r),
        Some(Sign::Negative) => Ok(up_neg(&r)),
        _ => Ok(up_mul_mp(&r, &a)),
    }
}

/// At a sample point, if some `q` vanishes then the sign of `p` there is
/// the sign of the corresponding adjusted remainder; otherwise leave a
/// placeholder for interval inference.
fn inferpsign(pd: &[Sign], qd: &[Sign]) -> Vec<Sign> {
    let mut out = Vec::with_capacity(pd.len() + 1);
    match pd.iter().position(|&s| s == Sign::Zero) {
        Some(i) => out.push(qd[i]),
        None => out.push(Sign::Nonzero),
    }
    out.extend_from_slice(pd);
    out
}

/// Fill in interval signs of the lead polynomial between sample points
/// with known signs, inserting a root point where the sign changes
/// (possible at most once per interval since the derivative has constant
/// sign there).
fn inferisign(rows: &[Vec<Sign>]) -> Result<Vec<Vec<Sign>>, EErr> {
    if rows.len() < 3 {
        return Ok(rows.to_vec());
    }
    let x = &rows[0];
    let int = &rows[1];
    let l = x[0];
    let r = rows[2][0];
    let ints = &int[1..];
    let rest = inferisign(&rows[2..])?;
    let mk = |s: Sign| -> Vec<Sign> {
        let mut v = vec![s];
        v.extend_from_slice(ints);
        v
    };
    let mut out = vec![x.clone()];
    match (l, r) {
        (Sign::Zero, Sign::Zero) => return Err(EErr::Inconsistent),
        (Sign::Nonzero, _) | (_, Sign::Nonzero) => return Err(EErr::Inconsistent),
        (Sign::Zero, _) => out.push(mk(r)),
        (_, Sign::Zero) => out.push(mk(l)),
        (Sign::Negative, Sign::Negative) | (Sign::Positive, Sign::Positive) => out.push(mk(l)),
        _ => {
            out.push(mk(l));
            out.push(mk(Sign::Zero));
            out.push(mk(r));
        }
    }
    out.extend(rest);
    Ok(out)
}

/// Drop sample points at which no tracked polynomial vanishes, merging the
/// adjacent intervals.
fn condense(rows: &[Vec<Sign>]) -> Vec<Vec<Sign>> {
    if rows.len() < 2 {
        return rows.to_vec();
    }
    let int = &rows[0];
    let pt = &rows[1];
    let rest = condense(&rows[2..]);
    if pt.contains(&Sign::Zero) {
        let mut out = vec![int.clone(), pt.clone()];
        out.extend(rest);
        out
    } else {
        rest
    }
}

/// From a sign matrix for `p', q_1..q_k, g_0..g_k` deduce one for
/// `p, q_1..q_k` (columns `g_i` are the adjusted remainders of `p`).
fn dedmatrix(cont: MatCont, sgns: &SignCtx, mat: Vec<Vec<Sign>>) -> FRes {
    let width = mat.first().map_or(0, |r| r.len());
    let l = width / 2;
    let m1: Vec<Vec<Sign>> = mat
        .iter()
        .map(|row| inferpsign(&row[..l], &row[l..]))
        .collect();
    let m1 = condense(&m1);
    if m1.is_empty() || m1[0].len() < 2 {
        return Err(EErr::Inconsistent);
    }
    // Behavior at -inf/+inf: the sign of p is minus/plus the sign of p' on
    // the outermost intervals.
    let first = &m1[0];
    let last = m1.last().expect("nonempty matrix");
    let mut m2 = Vec::with_capacity(m1.len() + 2);
    m2.push(vec![flip_sign(first[1])]);
    m2.extend(m1.iter().cloned());
    m2.push(vec![last[1]]);
    let m3 = inferisign(&m2)?;
    let inner = &m3[1..m3.len() - 1];
    let stripped: Vec<Vec<Sign>> = inner
        .iter()
        .map(|row| {
            let mut r = vec![row[0]];
            r.extend_from_slice(&row[2..]);
            r
        })
        .collect();
    cont(sgns, condense(&stripped))
}

// ---------------------------------------------------------------------------
// Formula-level simplification
// ---------------------------------------------------------------------------

/// Truth value of a variable-free atom, if the formula is one.
fn truth_of(f: &Formula) -> Option<bool> {
    if let Formula::Cmp(op, a, b) = f {
        if let (Some(x), Some(y)) = (eval_constant(a), eval_constant(b)) {
            return Some(op.eval(&x, &y));
        }
    }
    None
}

fn s_not(f: Formula) -> Formula {
    if let Some(b) = truth_of(&f) {
        return if b { Formula::fls() } else { Formula::tru() };
    }
    if let Formula::Not(inner) = f {
        return *inner;
    }
    Formula::not(f)
}

fn s_and(a: Formula, b: Formula) -> Formula {
    match (truth_of(&a), truth_of(&b)) {
        (Some(false), _) | (_, Some(false)) => Formula::fls(),
        (Some(true), _) => b,
        (_, Some(true)) => a,
        _ => {
            if a == b {
                a
            } else {
                Formula::and(a, b)
            }
        }
    }
}

fn s_or(a: Formula, b: Formula) -> Formula {
    match (truth_of(&a), truth_of(&b)) {
        (Some(true), _) | (_, Some(true)) => Formula::tru(),
        (Some(false), _) => b,
        (_, Some(false)) => a,
        _ => {
            if a == b {
                a
            } else {
                Formula::or(a, b)
            }
        }
    }
}

fn s_implies(a: Formula, b: Formula) -> Formula {
    match (truth_of(&a), truth_of(&b)) {
        (Some(false), _) | (_, Some(true)) => Formula::tru(),
        (Some(true), _) => b,
        (_, Some(false)) => s_not(a),
        _ => Formula::implies(a, b),
    }
}

fn s_iff(a: Formula, b: Formula) -> Formula {
    match (truth_of(&a), truth_of(&b)) {
        (Some(true), _) => b,
        (_, Some(true)) => a,
        (Some(false), _) => s_not(b),
        (_, Some(false)) => s_not(a),
        _ => {
            if a == b {
                Formula::tru()
            } else {
                Formula::iff(a, b)
            }
        }
    }
}

/// Negation normal form for quantifier-free formulas: negations pushed to
/// the literals (a negated equation is kept as `Not` on the atom; other
/// relations absorb the negation).  Exposes conjunctive and disjunctive
/// structure to the eliminator's miniscoping and pivoting rules.
fn nnf(f: &Formula) -> Formula {
    fn pos(f: &Formula) -> Formula {
        match f {
            Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => f.clone(),
            Formula::Not(p) => neg(p),
            Formula::And(a, b) => s_and(pos(a), pos(b)),
            Formula::Or(a, b) => s_or(pos(a), pos(b)),
            Formula::Implies(a, b) => s_or(neg(a), pos(b)),
            Formula::Iff(a, b) => s_or(s_and(pos(a), pos(b)), s_and(neg(a), neg(b))),
            Formula::Forall(x, s, p) => Formula::Forall(x.clone(), *s, Box::new(pos(p))),
            Formula::Exists(x, s, p) => Formula::Exists(x.clone(), *s, Box::new(pos(p))),
        }
    }
    fn neg(f: &Formula) -> Formula {
        match f {
            Formula::Cmp(op, a, b) => match op {
                RelOp::Eq => s_not(f.clone()),
                RelOp::Lt => Formula::Cmp(RelOp::Ge, a.clone(), b.clone()),
                RelOp::Le => Formula::Cmp(RelOp::Gt, a.clone(), b.clone()),
                RelOp::Gt => Formula::Cmp(RelOp::Le, a.clone(), b.clone()),
                RelOp::Ge => Formula::Cmp(RelOp::Lt, a.clone(), b.clone()),
            },
            Formula::VecEq(_, _) => s_not(f.clone()),
            Formula::Not(p) => pos(p),
            Formula::And(a, b) => s_or(neg(a), neg(b)),
            Formula::Or(a, b) => s_and(neg(a), neg(b)),
            Formula::Implies(a, b) => s_and(pos(a), neg(b)),
            Formula::Iff(a, b) => s_or(s_and(pos(a), neg(b)), s_and(neg(a), pos(b))),
            Formula::Forall(x, s, p) => Formula::Exists(x.clone(), *s, Box::new(neg(p))),
            Formula::Exists(x, s, p) => Formula::Forall(x.clone(), *s, Box::new(neg(p))),
        }
    }
    pos(f)
}

/// Bottom-up propositional simplification with evaluation of ground atoms
/// and removal of vacuous quantifiers.
fn simp(f: &Formula) -> Formula {
    match f {
        Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => {
            if let Some(b) = truth_of(f) {
                if b {
                    Formula::tru()
                } else {
                    Formula::fls()
                }
            } else {
                f.clone()
            }
        }
        Formula::Not(p) => s_not(simp(p)),
        Formula::And(a, b) => s_and(simp(a), simp(b)),
        Formula::Or(a, b) => s_or(simp(a), simp(b)),
        Formula::Implies(a, b) => s_implies(simp(a), simp(b)),
        Formula::Iff(a, b) => s_iff(simp(a), simp(b)),
        Formula::Forall(x, s, p) => {
            let body = simp(p);
            if free_vars(&body).contains(&(x.clone(), *s)) {
                Formula::Forall(x.clone(), *s, Box::new(body))
            } else {
                body
            }
        }
        Formula::Exists(x, s, p) => {
            let body = simp(p);
            if free_vars(&body).contains(&(x.clone(), *s)) {
                Formula::Exists(x.clone(), *s, Box::new(body))
            } else {
                body
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Quantifier elimination driver
// ---------------------------------------------------------------------------

/// Eliminate `exists x. body` where `body` is quantifier-free.
fn basic_qelim(budget: &Budget, x: &str, body: &Formula) -> FRes {
    let mut pols_m: Vec<MPoly> = Vec::new();
    let bf = bf_of_formula(body, &mut pols_m)?;
    let ups: Vec<UPoly> = pols_m.iter().map(|p| up_of_mpoly(p, x)).collect();
    let cont = |_: &SignCtx, mat: Vec<Vec<Sign>>| -> FRes {
        if mat.iter().any(|row| testform(&bf, row)) {
            Ok(Formula::tru())
        } else {
            Ok(Formula::fls())
        }
    };
    let init: SignCtx = Vec::new();
    casesplit(budget, &[], &ups, &cont, &init)
}

fn contains_scalar_var(f: &Formula, x: &str) -> bool {
    free_vars(f).contains(&(x.to_string(), Sort::Scalar))
}

fn conjuncts(f: &Formula, out: &mut Vec<Formula>) {
    if let Formula::And(a, b) = f {
        conjuncts(a, out);
        conjuncts(b, out);
    } else {
        out.push(f.clone());
    }
}

/// If the conjunct is an equation `c*x + r = 0` with rational `c != 0`
/// and `r` free of `x`, return the solution term `-r/c`.
fn solve_linear(conj: &Formula, x: &str) -> Option<ScalarTerm> {
    let Formula::Cmp(RelOp::Eq, a, b) = conj else {
        return None;
    };
    let p = poly_of_term(a).ok()?.sub(&poly_of_term(b).ok()?);
    let up = up_of_mpoly(&p, x);
    if up.len() != 2 {
        return None;
    }
    let c = up[1].as_constant()?;
    if c.is_zero() {
        return None;
    }
    Some(term_of_poly(&up[0].scale(&(-Rat::one() / c))))
}

// ---------------------------------------------------------------------------
// Disjunctive normal form with sign-set pruning
// ---------------------------------------------------------------------------

/// A conjunction of literals, each a normalized polynomial paired with its
/// allowed sign set (bit 0: negative, bit 1: zero, bit 2: positive).
type DBranch = Vec<(ScalarTerm, u8)>;

const SIGN_NEG: u8 = 0b001;
const SIGN_ZERO: u8 = 0b010;
const SIGN_POS: u8 = 0b100;

fn mask_of_op(op: RelOp) -> u8 {
    match op {
        RelOp::Eq => SIGN_ZERO,
        RelOp::Lt => SIGN_NEG,
        RelOp::Le => SIGN_NEG | SIGN_ZERO,
        RelOp::Gt => SIGN_POS,
        RelOp::Ge => SIGN_POS | SIGN_ZERO,
    }
}

fn lit_formula(t: &ScalarTerm, mask: u8) -> Formula {
    let zero = ScalarTerm::zero();
    match mask {
        SIGN_NEG => Formula::Cmp(RelOp::Lt, t.clone(), zero),
        SIGN_ZERO => Formula::Cmp(RelOp::Eq, t.clone(), zero),
        SIGN_POS => Formula::Cmp(RelOp::Gt, t.clone(), zero),
        0b011 => Formula::Cmp(RelOp::Le, t.clone(), zero),
        0b110 => Formula::Cmp(RelOp::Ge, t.clone(), zero),
        0b101 => Formula::not(Formula::Cmp(RelOp::Eq, t.clone(), zero)),
        _ => Formula::tru(),
    }
}

/// Add a literal to a branch, intersecting sign sets for an already
/// present polynomial; returns `false` when the branch became
/// contradictory.
fn dnf_add_lit(branch: &mut DBranch, t: ScalarTerm, mask: u8) -> bool {
    if mask == 0b111 {
        return true;
    }
    if let Some(entry) = branch.iter_mut().find(|(u, _)| *u == t) {
        entry.1 &= mask;
        entry.1 != 0
    } else {
        branch.push((t, mask));
        true
    }
}

const DNF_BRANCH_CAP: usize = 4096;

/// Convert a quantifier-free formula in negation normal form into pruned
/// disjunctive normal form.  Returns `None` when the formula contains
/// unsupported structure or the branch count exceeds the cap.
fn dnf_of(f: &Formula) -> Option<Vec<DBranch>> {
    fn atom(op: RelOp, a: &ScalarTerm, b: &ScalarTerm, negated: bool) -> Option<Vec<DBranch>> {
        let p = poly_of_term(a).ok()?.sub(&poly_of_term(b).ok()?);
        if let Some(c) = p.as_constant() {
            let truth = op.eval(&c, &Rat::zero()) != negated;
            return Some(if truth { vec![Vec::new()] } else { Vec::new() });
        }
        let (q, flipped) = int_normalize(&p);
        let op = if flipped { op.flip() } else { op };
        let mask = if negated {
            !mask_of_op(op) & 0b111
        } else {
            mask_of_op(op)
        };
        Some(vec![vec![(term_of_poly(&q), mask)]])
    }
    match f {
        Formula::Cmp(op, a, b) => atom(*op, a, b, false),
        Formula::Not(p) => {
            if let Formula::Cmp(op, a, b) = &**p {
                atom(*op, a, b, true)
            } else {
                None
            }
        }
        Formula::And(a, b) => {
            let left = dnf_of(a)?;
            let right = dnf_of(b)?;
            let mut out: Vec<DBranch> = Vec::new();
            for l in &left {
                'branch: for r in &right {
                    let mut merged = l.clone();
                    for (t, m) in r {
                        if !dnf_add_lit(&mut merged, t.clone(), *m) {
                            continue 'branch;
                        }
                    }
                    out.push(merged);
                    if out.len() > DNF_BRANCH_CAP {
                        return None;
                    }
                }
            }
            Some(out)
        }
        Formula::Or(a, b) => {
            let mut out = dnf_of(a)?;
            let mut right = dnf_of(b)?;
            out.append(&mut right);
            if out.len() > DNF_BRANCH_CAP {
                None
            } else {
                Some(out)
            }
        }
        _ => None,
    }
}

/// `true` when every literal of `weak` is implied by some literal of
/// `strong` (so the `strong` conjunction implies the `weak` one).
fn branch_implies(strong: &DBranch, weak: &DBranch) -> bool {
    weak.iter().all(|(t, wm)| {
        strong
            .iter()
            .any(|(u, sm)| u == t && sm & wm == *sm)
    })
}

/// Drop branches subsumed by a weaker branch, and detect a trivially true
/// disjunction (an empty branch).
fn dnf_subsume(branches: Vec<DBranch>) -> Vec<DBranch> {
    if branches.iter().any(|b| b.is_empty()) {
        return vec![Vec::new()];
    }
    if branches.len() > 256 {
        return branches;
    }
    let mut kept: Vec<DBranch> = Vec::new();
    'outer: for b in branches {
        for k in &kept {
            if branch_implies(&b, k) {
                continue 'outer;
            }
        }
        kept.retain(|k| !branch_implies(k, &b));
        kept.push(b);
    }
    kept
}

fn dnf_rebuild(branches: &[DBranch]) -> Formula {
    Formula::or_all(branches.iter().map(|b| {
        Formula::and_all(b.iter().map(|(t, m)| lit_formula(t, *m)))
    }))
}

/// Convert a quantifier-free formula in negation normal form into pruned
/// conjunctive normal form: a clause is a disjunction of literals, and a
/// literal whose sign set fills up is a tautology that deletes its clause.
fn cnf_of(f: &Formula) -> Option<Vec<DBranch>> {
    fn atom(op: RelOp, a: &ScalarTerm, b: &ScalarTerm, negated: bool) -> Option<Vec<DBranch>> {
        let p = poly_of_term(a).ok()?.sub(&poly_of_term(b).ok()?);
        if let Some(c) = p.as_constant() {
            let truth = op.eval(&c, &Rat::zero()) != negated;
            return Some(if truth { Vec::new() } else { vec![Vec::new()] });
        }
        let (q, flipped) = int_normalize(&p);
        let op = if flipped { op.flip() } else { op };
        let mask = if negated {
            !mask_of_op(op) & 0b111
        } else {
            mask_of_op(op)
        };
        Some(vec![vec![(term_of_poly(&q), mask)]])
    }
    match f {
        Formula::Cmp(op, a, b) => atom(*op, a, b, false),
        Formula::Not(p) => {
            if let Formula::Cmp(op, a, b) = &**p {
                atom(*op, a, b, true)
            } else {
                None
            }
        }
        Formula::Or(a, b) => {
            let left = cnf_of(a)?;
            let right = cnf_of(b)?;
            let mut out: Vec<DBranch> = Vec::new();
            for l in &left {
                'clause: for r in &right {
                    let mut merged = l.clone();
                    for (t, m) in r {
                        // Union of sign sets; a full set makes the clause
                        // a tautology.
                        if let Some(e) = merged.iter_mut().find(|(u, _)| u == t) {
                            e.1 |= m;
                            if e.1 == 0b111 {
                                continue 'clause;
                            }
                        } else {
                            merged.push((t.clone(), *m));
                        }
                    }
                    out.push(merged);
                    if out.len() > DNF_BRANCH_CAP {
                        return None;
                    }
                }
            }
            Some(out)
        }
        Formula::And(a, b) => {
            let mut out = cnf_of(a)?;
            let mut right = cnf_of(b)?;
            out.append(&mut right);
            if out.len() > DNF_BRANCH_CAP {
                None
            } else {
                Some(out)
            }
        }
        _ => None,
    }
}

/// `true` when the disjunction `strong` implies the disjunction `weak`.
fn clause_implies(strong: &DBranch, weak: &DBranch) -> bool {
    strong.iter().all(|(t, sm)| {
        weak.iter()
            .any(|(u, wm)| u == t && sm & wm == *sm)
    })
}

/// Drop clauses implied by another clause, and detect a trivially false
/// conjunction (an empty clause).
fn cnf_subsume(clauses: Vec<DBranch>) -> Vec<DBranch> {
    if clauses.iter().any(|c| c.is_empty()) {
        return vec![Vec::new()];
    }
    if clauses.len() > 512 {
        return clauses;
    }
    let mut kept: Vec<DBranch> = Vec::new();
    'outer: for c in clauses {
        for k in &kept {
            if clause_implies(k, &c) {
                continue 'outer;
            }
        }
        kept.retain(|k| !clause_implies(&c, k));
        kept.push(c);
    }
    kept
}

fn cnf_rebuild(clauses: &[DBranch]) -> Formula {
    Formula::and_all(clauses.iter().map(|c| {
        Formula::or_all(c.iter().map(|(t, m)| lit_formula(t, *m)))
    }))
}

/// Formula size in nodes, used to pick the cheaper representation.
fn fsize(f: &Formula) -> usize {
    match f {
        Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => 1,
        Formula::Not(p) | Formula::Forall(_, _, p) | Formula::Exists(_, _, p) => 1 + fsize(p),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Implies(a, b)
        | Formula::Iff(a, b) => 1 + fsize(a) + fsize(b),
    }
}

/// Parse a formula as a sign literal on a normalized polynomial, or a
/// constant truth value.
enum Lit {
    Const(bool),
    Sign(ScalarTerm, u8),
    Other,
}

fn lit_of(f: &Formula) -> Lit {
    fn atom(op: RelOp, a: &ScalarTerm, b: &ScalarTerm, negated: bool) -> Lit {
        let Ok(pa) = poly_of_term(a) else {
            return Lit::Other;
        };
        let Ok(pb) = poly_of_term(b) else {
            return Lit::Other;
        };
        let p = pa.sub(&pb);
        if let Some(c) = p.as_constant() {
            return Lit::Const(op.eval(&c, &Rat::zero()) != negated);
        }
        let (q, flipped) = int_normalize(&p);
        let op = if flipped { op.flip() } else { op };
        let mask = if negated {
            !mask_of_op(op) & 0b111
        } else {
            mask_of_op(op)
        };
        Lit::Sign(term_of_poly(&q), mask)
    }
    match f {
        Formula::Cmp(op, a, b) => atom(*op, a, b, false),
        Formula::Not(p) => match &**p {
            Formula::Cmp(op, a, b) => atom(*op, a, b, true),
            _ => Lit::Other,
        },
        _ => Lit::Other,
    }
}

/// Sign context: normalized polynomial -> allowed sign set.
type SignCtxMap = Vec<(ScalarTerm, u8)>;

fn ctx_lookup(ctx: &SignCtxMap, t: &ScalarTerm) -> u8 {
    ctx.iter()
        .find(|(u, _)| u == t)
        .map(|(_, m)| *m)
        .unwrap_or(0b111)
}

fn ctx_insert(ctx: &mut SignCtxMap, t: ScalarTerm, m: u8) {
    if let Some(e) = ctx.iter_mut().find(|(u, _)| *u == t) {
        e.1 &= m;
    } else {
        ctx.push((t, m));
    }
}

/// Context-aware pruning of a quantifier-free formula in negation normal
/// form.  Literal conjuncts constrain their siblings; within a
/// disjunction each disjunct is simplified under the negation of the
/// other literal disjuncts (`A \/ B` is `A \/ (B /\ ~A)`).  This
/// collapses the guard contradictions produced by nested case splits
/// without converting to a normal form.
fn prune_nnf(f: &Formula, ctx: &SignCtxMap) -> Formula {
    match f {
        Formula::And(_, _) => {
            let mut cs = Vec::new();
            conjuncts(f, &mut cs);
            // First gather the literal conjuncts into the context.
            let mut local = ctx.clone();
            for c in &cs {
                if let Lit::Sign(t, m) = lit_of(c) {
                    ctx_insert(&mut local, t, m);
                }
            }
            if local.iter().any(|(_, m)| *m == 0) {
                return Formula::fls();
            }
            let mut acc = Formula::tru();
            for c in cs {
                let g = match lit_of(&c) {
                    // Re-emit literals from the merged context lazily: keep
                    // the literal itself (the context already holds the
                    // intersection, and duplicates collapse in `s_and`).
                    Lit::Sign(_, _) => c,
                    Lit::Const(b) => {
                        if b {
                            continue;
                        } else {
                            return Formula::fls();
                        }
                    }
                    Lit::Other => prune_nnf(&c, &local),
                };
                acc = s_and(acc, g);
                if truth_of(&acc) == Some(false) {
                    return Formula::fls();
                }
            }
            acc
        }
        Formula::Or(_, _) => {
            let mut ds = Vec::new();
            disjuncts(f, &mut ds);
            let mut acc = Formula::fls();
            for (i, d) in ds.iter().enumerate() {
                // Assume the negation of every other literal disjunct.
                let mut local = ctx.clone();
                let mut dead = false;
                for (j, other) in ds.iter().enumerate() {
                    if i != j {
                        if let Lit::Sign(t, m) = lit_of(other) {
                            ctx_insert(&mut local, t, !m & 0b111);
                        }
                    }
                }
                if local.iter().any(|(_, m)| *m == 0) {
                    // The negations of the other literal disjuncts are
                    // jointly unsatisfiable under the context, so their
                    // disjunction is a tautology here.
                    dead = true;
                }
                if dead {
                    return Formula::tru();
                }
                let g = match lit_of(d) {
                    Lit::Const(b) => {
                        if b {
                            return Formula::tru();
                        } else {
                            continue;
                        }
                    }
                    Lit::Sign(t, m) => {
                        let have = ctx_lookup(ctx, &t);
                        if have & m == have {
                            return Formula::tru();
                        } else if have & m == 0 {
                            continue;
                        } else {
                            d.clone()
                        }
                    }
                    Lit::Other => prune_nnf(d, &local),
                };
                acc = s_or(acc, g);
                if truth_of(&acc) == Some(true) {
                    return Formula::tru();
                }
            }
            acc
        }
        _ => match lit_of(f) {
            Lit::Const(b) => {
                if b {
                    Formula::tru()
                } else {
                    Formula::fls()
                }
            }
            Lit::Sign(t, m) => {
                let have = ctx_lookup(ctx, &t);
                if have & m == have {
                    Formula::tru()
                } else if have & m == 0 {
                    Formula::fls()
                } else {
                    f.clone()
                }
            }
            Lit::Other => f.clone(),
        },
    }
}

/// Iterate context-aware pruning to a small fixpoint.
fn prune(f: &Formula) -> Formula {
    let mut g = f.clone();
    for _ in 0..3 {
        let h = prune_nnf(&g, &Vec::new());
        if h == g {
            break;
        }
        g = h;
    }
    g
}

/// Compress a quantifier-free residue by whichever pruned normal form
/// comes out smaller; falls back to the input when neither conversion
/// applies or helps.
fn compress(f: &Formula) -> Formula {
    let mut best = f.clone();
    let mut best_size = fsize(&best);
    if let Some(branches) = dnf_of(f) {
        let g = dnf_rebuild(&dnf_subsume(branches));
        let s = fsize(&g);
        if s < best_size {
            best = g;
            best_size = s;
        }
    }
    if let Some(clauses) = cnf_of(f) {
        let g = cnf_rebuild(&cnf_subsume(clauses));
        if fsize(&g) < best_size {
            best = g;
        }
    }
    best
}

/// A virtual point of the test set used by linear virtual substitution:
/// minus infinity, the root `-d/c` of a linear atom, or that root plus a
/// positive infinitesimal.  Roots are guarded by `c != 0` at the use site.
enum VPoint {
    MinusInf,
    Root(MPoly, MPoly),
    RootEps(MPoly, MPoly),
}

/// Truth of the atom `ca*x + da op 0` at a virtual point, as a formula in
/// the remaining variables.  For a root `-d/c` the value is multiplied
/// through by `c^2 > 0`, which preserves the relation.
fn vsubst_atom(op: RelOp, ca: &MPoly, da: &MPoly, pt: &VPoint) -> Formula {
    match pt {
        VPoint::MinusInf => {
            let toward = match op {
                RelOp::Eq => Formula::fls(),
                RelOp::Lt | RelOp::Le => atom_of_poly(RelOp::Gt, ca),
                RelOp::Gt | RelOp::Ge => atom_of_poly(RelOp::Lt, ca),
            };
            s_or(
                toward,
                s_and(atom_of_poly(RelOp::Eq, ca), atom_of_poly(op, da)),
            )
        }
        VPoint::Root(c, d) => {
            let e = da.mul(c).mul(c).sub(&ca.mul(d).mul(c));
            atom_of_poly(op, &e)
        }
        VPoint::RootEps(c, d) => {
            // Value is e + ca*eps with eps positive infinitesimal, where
            // the sign of e matches the sign of the atom at the root.
            let e = da.mul(c).mul(c).sub(&ca.mul(d).mul(c));
            let at_root = |r| atom_of_poly(r, &e);
            match op {
                RelOp::Eq => s_and(at_root(RelOp::Eq), atom_of_poly(RelOp::Eq, ca)),
                RelOp::Lt => s_or(
                    at_root(RelOp::Lt),
                    s_and(at_root(RelOp::Eq), atom_of_poly(RelOp::Lt, ca)),
                ),
                RelOp::Le => s_or(
                    at_root(RelOp::Lt),
                    s_and(at_root(RelOp::Eq), atom_of_poly(RelOp::Le, ca)),
                ),
                RelOp::Gt => s_or(
                    at_root(RelOp::Gt),
                    s_and(at_root(RelOp::Eq), atom_of_poly(RelOp::Gt, ca)),
                ),
                RelOp::Ge => s_or(
                    at_root(RelOp::Gt),
                    s_and(at_root(RelOp::Eq), atom_of_poly(RelOp::Ge, ca)),
                ),
            }
        }
    }
}

/// Replace every atom of a quantifier-free formula by its truth at the
/// virtual point (atoms free of `x` are merely normalized).
fn vsubst(f: &Formula, x: &str, pt: &VPoint) -> Result<Formula, EErr> {
    Ok(match f {
        Formula::Cmp(op, a, b) => {
            let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
            let up = up_of_mpoly(&p, x);
            if up.len() <= 1 {
                atom_of_poly(*op, &p)
            } else {
                vsubst_atom(*op, &up[1], &up[0], pt)
            }
        }
        Formula::Not(p) => s_not(vsubst(p, x, pt)?),
        Formula::And(a, b) => s_and(vsubst(a, x, pt)?, vsubst(b, x, pt)?),
        Formula::Or(a, b) => s_or(vsubst(a, x, pt)?, vsubst(b, x, pt)?),
        Formula::Implies(a, b) => s_implies(vsubst(a, x, pt)?, vsubst(b, x, pt)?),
        Formula::Iff(a, b) => s_iff(vsubst(a, x, pt)?, vsubst(b, x, pt)?),
        Formula::VecEq(_, _) | Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => {
            return Err(EErr::NonScalar)
        }
    })
}

/// Polarity of a subformula position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pol {
    Pos,
    Neg,
    Both,
}

impl Pol {
    fn flip(self) -> Pol {
        match self {
            Pol::Pos => Pol::Neg,
            Pol::Neg => Pol::Pos,
            Pol::Both => Pol::Both,
        }
    }
}

/// Collect `(c, d)` from every atom `c*x + d op 0` that is degree one in
/// `x`, split by whether its satisfying set is closed or open on the side
/// the literal's polarity selects: closed literals (`=`, `<=`, `>=` used
/// positively, `<`, `>` used negatively) need only the root itself as a
/// test point; open literals need the root plus an infinitesimal.
/// Returns `false` (do not use virtual substitution) when some atom has
/// higher degree in `x` or the formula is not quantifier-free.
fn linear_roots(
    f: &Formula,
    x: &str,
    pol: Pol,
    closed: &mut Vec<(MPoly, MPoly)>,
    open: &mut Vec<(MPoly, MPoly)>,
) -> Result<bool, EErr> {
    Ok(match f {
        Formula::Cmp(op, a, b) => {
            let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
            let up = up_of_mpoly(&p, x);
            match up.len() {
                0 | 1 => true,
                2 => {
                    let cd = (up[1].clone(), up[0].clone());
                    let is_strict = matches!(op, RelOp::Lt | RelOp::Gt);
                    let want_closed = match pol {
                        Pol::Pos => !is_strict,
                        Pol::Neg => is_strict,
                        Pol::Both => true,
                    };
                    let want_open = match pol {
                        Pol::Pos => is_strict || matches!(op, RelOp::Eq),
                        Pol::Neg => !is_strict,
                        Pol::Both => true,
                    };
                    if want_closed && !closed.contains(&cd) {
                        closed.push(cd.clone());
                    }
                    if want_open && !open.contains(&cd) {
                        open.push(cd);
                    }
                    true
                }
                _ => false,
            }
        }
        Formula::Not(p) => linear_roots(p, x, pol.flip(), closed, open)?,
        Formula::And(a, b) | Formula::Or(a, b) => {
            linear_roots(a, x, pol, closed, open)? && linear_roots(b, x, pol, closed, open)?
        }
        Formula::Implies(a, b) => {
            linear_roots(a, x, pol.flip(), closed, open)?
                && linear_roots(b, x, pol, closed, open)?
        }
        Formula::Iff(a, b) => {
            linear_roots(a, x, Pol::Both, closed, open)?
                && linear_roots(b, x, Pol::Both, closed, open)?
        }
        Formula::VecEq(_, _) | Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => false,
    })
}

/// Eliminate `exists x. f` by linear virtual substitution when every atom
/// is at most degree one in `x`: the satisfying set is then a union of
/// intervals delimited by atom roots, so it is nonempty iff `f` holds
/// near minus infinity, at the root of a closed literal, or just to the
/// right of the root of an open literal.  Returns `None` when some atom
/// is nonlinear in `x`.
fn lw_qelim(budget: &Budget, x: &str, f: &Formula) -> Result<Option<Formula>, EErr> {
    let mut closed = Vec::new();
    let mut open = Vec::new();
    if !linear_roots(f, x, Pol::Pos, &mut closed, &mut open)? {
        return Ok(None);
    }
    let mut acc = vsubst(f, x, &VPoint::MinusInf)?;
    for (c, d) in closed {
        budget.tick()?;
        let guard = s_not(atom_of_poly(RelOp::Eq, &c));
        acc = s_or(acc, s_and(guard, vsubst(f, x, &VPoint::Root(c, d))?));
    }
    for (c, d) in open {
        budget.tick()?;
        let guard = s_not(atom_of_poly(RelOp::Eq, &c));
        acc = s_or(acc, s_and(guard, vsubst(f, x, &VPoint::RootEps(c, d))?));
    }
    Ok(Some(simp(&acc)))
}

/// Eliminate `forall x. f` by linear virtual substitution when every atom
/// is at most degree one in `x`: dually to the existential case, `f` must
/// hold near minus infinity and at every test point of its negation.  The
/// result stays a conjunction, which keeps universal blocks factored.
/// Returns `None` when some atom is nonlinear in `x`.
fn lw_qelim_forall(budget: &Budget, x: &str, f: &Formula) -> Result<Option<Formula>, EErr> {
    let mut closed = Vec::new();
    let mut open = Vec::new();
    // Test points must cover the satisfying set of the negation, so the
    // literal polarity classification starts negated.
    if !linear_roots(f, x, Pol::Neg, &mut closed, &mut open)? {
        return Ok(None);
    }
    let mut acc = vsubst(f, x, &VPoint::MinusInf)?;
    for (c, d) in closed {
        budget.tick()?;
        let degenerate = atom_of_poly(RelOp::Eq, &c);
        acc = s_and(acc, s_or(degenerate, vsubst(f, x, &VPoint::Root(c, d))?));
    }
    for (c, d) in open {
        budget.tick()?;
        let degenerate = atom_of_poly(RelOp::Eq, &c);
        acc = s_and(
            acc,
            s_or(degenerate, vsubst(f, x, &VPoint::RootEps(c, d))?),
        );
    }
    Ok(Some(simp(&acc)))
}

/// Substitute the ratio `x := -d/c` (with `c != 0` established by the
/// caller) into a quantifier-free formula, clearing denominators by an
/// even power of `c` so every relation is preserved.
fn vsubst_ratio(f: &Formula, x: &str, c: &MPoly, d: &MPoly) -> Result<Formula, EErr> {
    Ok(match f {
        Formula::Cmp(op, a, b) => {
            let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
            let up = up_of_mpoly(&p, x);
            if up.len() <= 1 {
                atom_of_poly(*op, &p)
            } else {
                // p(-d/c) * c^m, times one more c when m is odd.
                let m = up.len() - 1;
                let neg_d = d.neg();
                let mut val = MPoly::zero();
                let mut num = MPoly::constant(Rat::one()); // (-d)^i
                for (i, coeff) in up.iter().enumerate() {
                    let mut t = coeff.mul(&num);
                    for _ in 0..(m - i) {
                        t = t.mul(c);
                    }
                    val = val.add(&t);
                    if i < m {
                        num = num.mul(&neg_d);
                    }
                }
                if m % 2 == 1 {
                    val = val.mul(c);
                }
                atom_of_poly(*op, &val)
            }
        }
        Formula::Not(p) => s_not(vsubst_ratio(p, x, c, d)?),
        Formula::And(a, b) => s_and(vsubst_ratio(a, x, c, d)?, vsubst_ratio(b, x, c, d)?),
        Formula::Or(a, b) => s_or(vsubst_ratio(a, x, c, d)?, vsubst_ratio(b, x, c, d)?),
        Formula::Implies(a, b) => {
            s_implies(vsubst_ratio(a, x, c, d)?, vsubst_ratio(b, x, c, d)?)
        }
        Formula::Iff(a, b) => s_iff(vsubst_ratio(a, x, c, d)?, vsubst_ratio(b, x, c, d)?),
        Formula::VecEq(_, _) | Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => {
            return Err(EErr::NonScalar)
        }
    })
}

/// Eliminate `exists x` from a conjunction containing an equality pivot
/// `c*x + d = 0` that is linear in `x` (with `c` an arbitrary polynomial
/// in the parameters): split on `c = 0`.  When `c != 0` the equation
/// determines `x = -d/c`, which is substituted into the remaining
/// conjuncts (of any degree in `x`); when `c = 0` the equation reduces to
/// `d = 0` and the quantifier moves to the remaining conjuncts.
fn pivot_eq_qelim(budget: &Budget, x: &str, cs: &[Formula]) -> Result<Option<Formula>, EErr> {
    for (i, cj) in cs.iter().enumerate() {
        let Formula::Cmp(RelOp::Eq, a, b) = cj else {
            continue;
        };
        let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
        let up = up_of_mpoly(&p, x);
        if up.len() != 2 {
            continue;
        }
        budget.tick()?;
        let c = up[1].clone();
        let d = up[0].clone();
        let mut substituted = Formula::tru();
        for (j, other) in cs.iter().enumerate() {
            if j != i {
                substituted = s_and(substituted, vsubst_ratio(other, x, &c, &d)?);
            }
        }
        let determined = s_and(s_not(atom_of_poly(RelOp::Eq, &c)), substituted);
        let rest = Formula::and_all(
            cs.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, g)| g.clone()),
        );
        let degenerate = s_and(
            atom_of_poly(RelOp::Eq, &c),
            s_and(
                atom_of_poly(RelOp::Eq, &d),
                qelim_exists(budget, x, &simp(&rest))?,
            ),
        );
        return Ok(Some(simp(&s_or(determined, degenerate))));
    }
    Ok(None)
}

/// Eliminate `exists x` from a formula with no further structure to
/// exploit: linear virtual substitution when `x` occurs only linearly,
/// otherwise the sign-matrix analysis.
fn qelim_core(budget: &Budget, x: &str, f: &Formula) -> FRes {
    if let Some(g) = lw_qelim(budget, x, f)? {
        return Ok(g);
    }
    basic_qelim(budget, x, f)
}

/// Eliminate `exists x` from a simplified quantifier-free formula,
/// miniscoping through disjunctions and variable-free conjuncts first.
fn qelim_exists(budget: &Budget, x: &str, f: &Formula) -> FRes {
    if !contains_scalar_var(f, x) {
        return Ok(f.clone());
    }
    if let Some(g) = generic_elim(x, f, true) {
        return Ok(simp(&g));
    }
    // A linear equality conjunct with a rational coefficient on x allows
    // exact substitution instead of a sign-matrix analysis.
    {
        let mut cs = Vec::new();
        conjuncts(f, &mut cs);
        if let Some((i, sol)) = cs
            .iter()
            .enumerate()
            .find_map(|(i, c)| solve_linear(c, x).map(|s| (i, s)))
        {
            let mut acc = Formula::tru();
            for (j, c) in cs.iter().enumerate() {
                if j != i {
                    acc = s_and(acc, simp(&subst_scalar_var(c, x, &sol)));
                }
            }
            return Ok(acc);
        }
    }
    match f {
        Formula::Or(a, b) => Ok(s_or(qelim_exists(budget, x, a)?, qelim_exists(budget, x, b)?)),
        Formula::And(_, _) => {
            let mut cs = Vec::new();
            conjuncts(f, &mut cs);
            let (with_x, without): (Vec<Formula>, Vec<Formula>) =
                cs.into_iter().partition(|c| contains_scalar_var(c, x));
            if without.is_empty() {
                if let Some(g) = pivot_eq_qelim(budget, x, &with_x)? {
                    return Ok(g);
                }
                qelim_core(budget, x, f)
            } else {
                let inner = with_x
                    .into_iter()
                    .reduce(Formula::and)
                    .expect("x occurs in f");
                let reduced = qelim_exists(budget, x, &inner)?;
                Ok(without.into_iter().fold(reduced, |acc, c| s_and(acc, c)))
            }
        }
        _ => {
            if matches!(f, Formula::Cmp(RelOp::Eq, _, _)) {
                if let Some(g) = pivot_eq_qelim(budget, x, std::slice::from_ref(f))? {
                    return Ok(g);
                }
            }
            qelim_core(budget, x, f)
        }
    }
}

/// Entry point for eliminating one existential quantifier: normalize to
/// pruned disjunctive normal form when feasible — contradictory sign
/// combinations on shared polynomials (typically the guards emitted by
/// earlier case splits) collapse the case tree, and the disjunctive split
/// keeps each elimination small — then run the structural eliminator.
fn qelim_exists_dnf(budget: &Budget, x: &str, f: &Formula) -> FRes {
    if let Some(branches) = dnf_of(f) {
        let g = dnf_rebuild(&dnf_subsume(branches));
        return qelim_exists(budget, x, &g);
    }
    qelim_exists(budget, x, f)
}

/// Dual of [`qelim_exists_dnf`]: a one-shot conversion to pruned CNF
/// before a universal elimination.  A universal quantifier distributes
/// over the conjunction of clauses, so every virtual substitution works
/// on one small clause instead of the whole residue.
fn qelim_forall_cnf(budget: &Budget, x: &str, f: &Formula) -> FRes {
    if let Some(clauses) = cnf_of(f) {
        let g = cnf_rebuild(&cnf_subsume(clauses));
        return qelim_forall(budget, x, &g);
    }
    qelim_forall(budget, x, f)
}

fn disjuncts(f: &Formula, out: &mut Vec<Formula>) {
    if let Formula::Or(a, b) = f {
        disjuncts(a, out);
        disjuncts(b, out);
    } else {
        out.push(f.clone());
    }
}

/// Genericity elimination.  A generic real avoids the zero set of every
/// polynomial that is not identically zero, and finitely many proper
/// algebraic hypersurfaces cannot cover the line.  So when every literal
/// of an NNF formula containing `x` is a positively occurring
/// disequation `p(x) != 0`, the formula is monotone in those literals and
/// `exists x. f` equals `f` with each replaced by "some x-coefficient of
/// `p` is nonzero".  Dually, when every such literal is an equation
/// `p(x) = 0`, `forall x. f` equals `f` with each replaced by "every
/// x-coefficient of `p` vanishes".  Returns `None` when the shape does
/// not apply.
fn generic_elim(x: &str, f: &Formula, existential: bool) -> Option<Formula> {
    match f {
        Formula::And(a, b) => Some(s_and(
            generic_elim(x, a, existential)?,
            generic_elim(x, b, existential)?,
        )),
        Formula::Or(a, b) => Some(s_or(
            generic_elim(x, a, existential)?,
            generic_elim(x, b, existential)?,
        )),
        _ => {
            if !contains_scalar_var(f, x) {
                return Some(f.clone());
            }
            match lit_of(f) {
                Lit::Const(b) => Some(if b { Formula::tru() } else { Formula::fls() }),
                Lit::Sign(t, m) => {
                    let p = poly_of_term(&t).ok()?;
                    let up = up_of_mpoly(&p, x);
                    if up.len() <= 1 {
                        return Some(lit_formula(&t, m));
                    }
                    if existential && m == (SIGN_NEG | SIGN_POS) {
                        let mut acc = Formula::fls();
                        for c in &up {
                            acc = s_or(acc, s_not(atom_of_poly(RelOp::Eq, c)));
                        }
                        Some(acc)
                    } else if !existential && m == SIGN_ZERO {
                        let mut acc = Formula::tru();
                        for c in &up {
                            acc = s_and(acc, atom_of_poly(RelOp::Eq, c));
                        }
                        Some(acc)
                    } else {
                        None
                    }
                }
                Lit::Other => None,
            }
        }
    }
}

/// Eliminate `forall x` from a quantifier-free formula in negation normal
/// form.  The universal quantifier distributes over conjunction and
/// factors out of `x`-free disjuncts, which keeps the residue of a
/// universal block in conjunctive form instead of one monolithic negated
/// existential.
fn qelim_forall(budget: &Budget, x: &str, f: &Formula) -> FRes {
    if !contains_scalar_var(f, x) {
        return Ok(f.clone());
    }
    if let Some(g) = generic_elim(x, f, false) {
        return Ok(simp(&g));
    }
    match f {
        Formula::And(a, b) => Ok(s_and(
            qelim_forall(budget, x, a)?,
            qelim_forall(budget, x, b)?,
        )),
        Formula::Or(_, _) => {
            let mut ds = Vec::new();
            disjuncts(f, &mut ds);
            let (with_x, without): (Vec<Formula>, Vec<Formula>) =
                ds.into_iter().partition(|d| contains_scalar_var(d, x));
            let inner = with_x
                .into_iter()
                .reduce(Formula::or)
                .expect("x occurs in f");
            let reduced = if let Some(g) = lw_qelim_forall(budget, x, &inner)? {
                g
            } else {
                let negated = nnf(&Formula::not(inner));
                s_not(qelim_exists_dnf(budget, x, &simp(&negated))?)
            };
            Ok(without.into_iter().fold(reduced, |acc, d| s_or(acc, d)))
        }
        _ => {
            if let Some(g) = lw_qelim_forall(budget, x, f)? {
                return Ok(g);
            }
            let negated = nnf(&Formula::not(f.clone()));
            Ok(s_not(qelim_exists_dnf(budget, x, &simp(&negated))?))
        }
    }
}

/// Maximum degree of `x` over all atoms, or `None` when an atom is not
/// polynomial or the formula is not quantifier-free.
fn max_degree_in(f: &Formula, x: &str) -> Option<usize> {
    match f {
        Formula::Cmp(_, a, b) => {
            let p = poly_of_term(a).ok()?.sub(&poly_of_term(b).ok()?);
            let up = up_of_mpoly(&p, x);
            Some(up.len().saturating_sub(1))
        }
        Formula::Not(p) => max_degree_in(p, x),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Implies(a, b)
        | Formula::Iff(a, b) => Some(max_degree_in(a, x)?.max(max_degree_in(b, x)?)),
        Formula::VecEq(_, _) | Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => None,
    }
}

/// Pick the cheapest variable of a same-kind quantifier block to
/// eliminate next: genericity elimination, then an equality pivot (for
/// existentials), then all-linear virtual substitution, then the
/// sign-matrix fallback with the fewest occurrences.
fn choose_var(g: &Formula, vars: &[String], existential: bool) -> usize {
    let mut best = 0usize;
    let mut best_score = usize::MAX;
    for (i, x) in vars.iter().enumerate() {
        let score = if !contains_scalar_var(g, x) {
            0
        } else if generic_elim(x, g, existential).is_some() {
            1
        } else {
            let has_pivot = existential && {
                let mut cs = Vec::new();
                conjuncts(g, &mut cs);
                cs.iter().any(|c| {
                    if let Formula::Cmp(RelOp::Eq, a, b) = c {
                        if let (Ok(pa), Ok(pb)) = (poly_of_term(a), poly_of_term(b)) {
                            return up_of_mpoly(&pa.sub(&pb), x).len() == 2;
                        }
                    }
                    false
                })
            };
            if has_pivot {
                2
            } else {
                match max_degree_in(g, x) {
                    Some(d) if d <= 1 => 3,
                    Some(d) => 4 + d,
                    None => 10,
                }
            }
        };
        if score < best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Debug trace of per-variable elimination, enabled by setting
/// `EAG_QELIM_TRACE` in the environment.
fn trace_step(kind: &str, x: &str, g: &Formula) {
    if std::env::var_os("EAG_QELIM_TRACE").is_some() {
        fn fsz(f: &Formula) -> usize {
            match f {
                Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => 1,
                Formula::Not(p) | Formula::Forall(_, _, p) | Formula::Exists(_, _, p) => {
                    1 + fsz(p)
                }
                Formula::And(a, b)
                | Formula::Or(a, b)
                | Formula::Implies(a, b)
                | Formula::Iff(a, b) => 1 + fsz(a) + fsz(b),
            }
        }
        eprintln!("[qelim] {kind} {x}: size {}", fsz(g));
        if std::env::var("EAG_QELIM_TRACE").as_deref() == Ok("2") && fsz(g) < 400 {
            eprintln!("[qelim]   {}", crate::printer::print(g));
        }
    }
}

/// Innermost-out quantifier elimination over scalar formulas.
/// Estimated work for eliminating one variable from a residue of this
/// size.  Test-point substitution is quadratic in the number of atoms, so
/// the estimate grows quadratically; billing it up front lets the budget
/// stop runaway residue growth before the expensive pass begins.
fn elim_cost(g: &Formula) -> u64 {
    let n = fsize(g) as u64;
    n + n * n / 64
}

fn qelift(budget: &Budget, f: &Formula) -> FRes {
    match f {
        Formula::Cmp(op, a, b) => {
            let p = poly_of_term(a)?.sub(&poly_of_term(b)?);
            Ok(atom_of_poly(*op, &p))
        }
        Formula::VecEq(_, _) => Err(EErr::NonScalar),
        Formula::Not(p) => Ok(s_not(qelift(budget, p)?)),
        Formula::And(a, b) => Ok(s_and(qelift(budget, a)?, qelift(budget, b)?)),
        Formula::Or(a, b) => Ok(s_or(qelift(budget, a)?, qelift(budget, b)?)),
        Formula::Implies(a, b) => Ok(s_implies(qelift(budget, a)?, qelift(budget, b)?)),
        Formula::Iff(a, b) => Ok(s_iff(qelift(budget, a)?, qelift(budget, b)?)),
        Formula::Forall(_, Sort::Scalar, _) => {
            let mut vars: Vec<String> = Vec::new();
            let mut cur = f;
            while let Formula::Forall(x, Sort::Scalar, p) = cur {
                // A repeated name shadows the outer binder; stop the block
                // there so reordering cannot mix the two.
                if vars.iter().any(|v| v == x) {
                    break;
                }
                vars.push(x.clone());
                cur = p;
            }
            let mut g = nnf(&simp(&qelift(budget, cur)?));
            while !vars.is_empty() {
                budget.charge(elim_cost(&g))?;
                let i = choose_var(&g, &vars, false);
                let x = vars.swap_remove(i);
                trace_step("forall pick", &x, &g);
                g = nnf(&compress(&prune(&nnf(&split_atoms(&qelim_forall_cnf(
                    budget, &x, &g,
                )?)))));
                trace_step("forall", &x, &g);
            }
            Ok(g)
        }
        Formula::Exists(_, Sort::Scalar, _) => {
            let mut vars: Vec<String> = Vec::new();
            let mut cur = f;
            while let Formula::Exists(x, Sort::Scalar, p) = cur {
                if vars.iter().any(|v| v == x) {
                    break;
                }
                vars.push(x.clone());
                cur = p;
            }
            let mut g = nnf(&simp(&qelift(budget, cur)?));
            while !vars.is_empty() {
                budget.charge(elim_cost(&g))?;
                let i = choose_var(&g, &vars, true);
                let x = vars.swap_remove(i);
                trace_step("exists pick", &x, &g);
                g = nnf(&compress(&prune(&nnf(&split_atoms(&qelim_exists_dnf(
                    budget, &x, &g,
                )?)))));
                trace_step("exists", &x, &g);
            }
            Ok(g)
        }
        Formula::Forall(_, Sort::Vector, _) | Formula::Exists(_, Sort::Vector, _) => {
            Err(EErr::NonScalar)
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Decide a scalar sentence over the reals.
pub fn decide(f: &Formula, budget: &Budget) -> Result<Validity, RcfError> {
    if !is_scalar_only(f) {
        return Err(RcfError::NonScalar);
    }
    if !is_closed(f) {
        let names: Vec<String> = free_vars(f).into_iter().map(|(n, _)| n).collect();
        return Err(RcfError::NotClosed(names.join(", ")));
    }
    let g = simp(&qelift(budget, f).map_err(lift_err)?);
    match truth_of(&g) {
        Some(true) => Ok(Validity::Valid),
        Some(false) => Ok(Validity::Invalid),
        None => Err(RcfError::Internal(format!(
            "elimination left a non-ground residue: {}",
            crate::printer::print(&g)
        ))),
    }
}

/// Convenience wrapper: `true` iff the sentence is valid.
pub fn decide_bool(f: &Formula, budget: &Budget) -> Result<bool, RcfError> {
    Ok(decide(f, budget)? == Validity::Valid)
}

/// Quantifier elimination: an equivalent quantifier-free formula in the
/// same free variables.  Quantifier-free input is returned normalized.
pub fn eliminate(f: &Formula, budget: &Budget) -> Result<Formula, RcfError> {
    if !is_scalar_only(f) {
        return Err(RcfError::NonScalar);
    }
    Ok(simp(&qelift(budget, f).map_err(lift_err)?))
}

/// Evaluate a quantifier-free scalar formula under a total rational
/// assignment.
pub fn evaluate_qf(f: &Formula, a: &RationalAssignment) -> Result<bool, RcfError> {
    match f {
        Formula::Cmp(op, s, t) => Ok(op.eval(&eval_term(s, a)?, &eval_term(t, a)?)),
        Formula::VecEq(_, _) => Err(RcfError::NonScalar),
        Formula::Not(p) => Ok(!evaluate_qf(p, a)?),
        Formula::And(p, q) => Ok(evaluate_qf(p, a)? && evaluate_qf(q, a)?),
        Formula::Or(p, q) => Ok(evaluate_qf(p, a)? || evaluate_qf(q, a)?),
        Formula::Implies(p, q) => Ok(!evaluate_qf(p, a)? || evaluate_qf(q, a)?),
        Formula::Iff(p, q) => Ok(evaluate_qf(p, a)? == evaluate_qf(q, a)?),
        Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => Err(RcfError::NotQuantifierFree),
    }
}

fn eval_term(t: &ScalarTerm, a: &RationalAssignment) -> Result<Rat, RcfError> {
    match t {
        ScalarTerm::Rat(q) => Ok(q.clone()),
        ScalarTerm::Var(x) => a
            .get(x)
            .cloned()
            .ok_or_else(|| RcfError::MissingVariable(x.clone())),
        ScalarTerm::Add(p, q) => Ok(eval_term(p, a)? + eval_term(q, a)?),
        ScalarTerm::Neg(p) => Ok(-eval_term(p, a)?),
        ScalarTerm::Mul(p, q) => Ok(eval_term(p, a)? * eval_term(q, a)?),
        ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => {
            Err(RcfError::NonScalar)
        }
    }
}

// ---------------------------------------------------------------------------
// Rational witness search
// ---------------------------------------------------------------------------

/// For a formula with a leading block of scalar existentials, try to find
/// exact rational values for the block that make the remainder true.
/// Returns `None` (not an error) when no rational witness is found within
/// the depth bound — e.g. when only irrational witnesses exist.
pub fn find_rational_witness(
    f: &Formula,
    budget: &Budget,
    depth: u32,
) -> Result<Option<RationalAssignment>, RcfError> {
    if !is_scalar_only(f) {
        return Err(RcfError::NonScalar);
    }
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Exists(x, Sort::Scalar, body) = cur {
        vars.push(x.clone());
        cur = body;
    }
    let mut rest = cur.clone();
    let mut asg = RationalAssignment::new();
    for (i, x) in vars.iter().enumerate() {
        // psi(x) := QE(exists remaining. rest); a quantifier-free
        // description of the admissible values for x.
        let mut scoped = rest.clone();
        for y in vars[i + 1..].iter().rev() {
            scoped = Formula::exists(y.clone(), Sort::Scalar, scoped);
        }
        let psi = eliminate(&scoped, budget)?;
        let Some(val) = find_value(&psi, x, budget, depth)? else {
            return Ok(None);
        };
        rest = subst_scalar_var(&rest, x, &ScalarTerm::constant(val.clone()));
        asg.insert(x.clone(), val);
    }
    // Final check: the instantiated remainder must be valid.
    match decide(&rest, budget)? {
        Validity::Valid => Ok(Some(asg)),
        Validity::Invalid => Ok(None),
    }
}

/// Find a rational value of `x` satisfying the quantifier-free formula
/// `psi` whose only free variable is `x`.
fn find_value(
    psi: &Formula,
    x: &str,
    budget: &Budget,
    depth: u32,
) -> Result<Option<Rat>, RcfError> {
    if !contains_scalar_var(psi, x) {
        return match truth_of(&simp(psi)) {
            Some(true) => Ok(Some(Rat::zero())),
            _ => Ok(None),
        };
    }
    // Candidate points: roots of atoms linear in x, midpoints between
    // consecutive roots, points beyond the extremes, and zero.  This is
    // complete when every atom is linear in x.
    let mut roots: Vec<Rat> = Vec::new();
    collect_linear_roots(psi, x, &mut roots);
    roots.sort();
    roots.dedup();
    let mut candidates: Vec<Rat> = vec![Rat::zero()];
    if let (Some(lo), Some(hi)) = (roots.first(), roots.last()) {
        candidates.push(lo - Rat::one());
        candidates.push(hi + Rat::one());
    }
    for w in roots.windows(2) {
        candidates.push((&w[0] + &w[1]) / rat_int(2));
    }
    candidates.extend(roots);
    for c in &candidates {
        let mut a = RationalAssignment::new();
        a.insert(x.to_string(), c.clone());
        if evaluate_qf(psi, &a)? {
            return Ok(Some(c.clone()));
        }
    }
    // Dyadic bisection driven by decide on interval restrictions.
    let xt = ScalarTerm::var(x);
    let restricted = |lo: &Rat, hi: &Rat| -> Formula {
        Formula::exists(
            x,
            Sort::Scalar,
            Formula::and(
                psi.clone(),
                Formula::and(
                    Formula::gt(xt.clone(), ScalarTerm::constant(lo.clone())),
                    Formula::lt(xt.clone(), ScalarTerm::constant(hi.clone())),
                ),
            ),
        )
    };
    let mut bound: Option<(Rat, Rat)> = None;
    let mut m = Rat::one();
    for _ in 0..=depth {
        if decide_bool(&restricted(&-m.clone(), &m), budget)? {
            bound = Some((-m.clone(), m.clone()));
            break;
        }
        m *= rat_int(2);
    }
    let Some((mut lo, mut hi)) = bound else {
        return Ok(None);
    };
    for _ in 0..depth {
        let mid = (&lo + &hi) / rat_int(2);
        let mut a = RationalAssignment::new();
        a.insert(x.to_string(), mid.clone());
        if evaluate_qf(psi, &a)? {
            return Ok(Some(mid));
        }
        if decide_bool(&restricted(&lo, &mid), budget)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(None)
}

/// Collect roots of atom polynomials that are linear in `x` with constant
/// coefficients.
fn collect_linear_roots(f: &Formula, x: &str, out: &mut Vec<Rat>) {
    match f {
        Formula::Cmp(_, a, b) => {
            let Ok(pa) = poly_of_term(a) else { return };
            let Ok(pb) = poly_of_term(b) else { return };
            let p = pa.sub(&pb);
            let up = up_of_mpoly(&p, x);
            if up.len() == 2 {
                if let (Some(c0), Some(c1)) = (up[0].as_constant(), up[1].as_constant()) {
                    if !c1.is_zero() {
                        out.push(-c0 / c1);
                    }
                }
            }
        }
        Formula::VecEq(_, _) => {}
        Formula::Not(p) => collect_linear_roots(p, x, out),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Implies(a, b)
        | Formula::Iff(a, b) => {
            collect_linear_roots(a, x, out);
            collect_linear_roots(b, x, out);
        }
        Formula::Forall(_, _, p) | Formula::Exists(_, _, p) => collect_linear_roots(p, x, out),
    }
}

// Re-exported helper for debug dumps of sign matrices.
/// Render a sign matrix in a line-oriented text format (one row per line,
/// `-`, `0`, `+`, `?` per column).
pub fn format_sign_matrix(mat: &[Vec<Sign>]) -> String {
    let mut out = String::new();
    for row in mat {
        for (i, s) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(match s {
                Sign::Negative => '-',
                Sign::Zero => '0',
                Sign::Positive => '+',
                Sign::Nonzero => '?',
            });
        }
        out.push('\n');
    }
    out
}
