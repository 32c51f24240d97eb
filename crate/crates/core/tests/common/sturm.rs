//! Sturm-sequence oracle for univariate sentences `exists x. p(x) rel 0`.
//!
//! Independent of the sign-matrix engine: counts distinct real roots with
//! a Sturm chain of the squarefree part, isolates them by bisection, and
//! samples one point in every root-free region to decide strict
//! inequalities.

use eag_core::ast::{rat_int, Rat, RelOp};
use num_traits::{One, Signed, Zero};

/// Dense univariate polynomial, ascending coefficients, trimmed.
pub type Poly = Vec<Rat>;

pub fn trim(mut p: Poly) -> Poly {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

pub fn eval(p: &[Rat], x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn derivative(p: &[Rat]) -> Poly {
    let mut out = Vec::new();
    for (i, c) in p.iter().enumerate().skip(1) {
        out.push(c * rat_int(i as i64));
    }
    trim(out)
}

fn neg(p: &[Rat]) -> Poly {
    p.iter().map(|c| -c.clone()).collect()
}

/// Remainder of `a` divided by `b` (exact rational division).
fn rem(a: &[Rat], b: &[Rat]) -> Poly {
    assert!(!b.is_empty(), "division by zero polynomial");
    let mut r = trim(a.to_vec());
    let lead = b.last().unwrap().clone();
    while r.len() >= b.len() {
        let k = r.len() - b.len();
        let f = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            let v = &r[k + i] - &(c * &f);
            r[k + i] = v;
        }
        r = trim(r);
    }
    r
}

fn gcd(a: &[Rat], b: &[Rat]) -> Poly {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !y.is_empty() {
        let r = rem(&x, &y);
        x = y;
        y = r;
    }
    // Normalize monic for stable exact division.
    if let Some(l) = x.last().cloned() {
        x = x.iter().map(|c| c / &l).collect();
    }
    x
}

fn div_exact(a: &[Rat], b: &[Rat]) -> Poly {
    let mut r = trim(a.to_vec());
    let lead = b.last().expect("nonzero divisor").clone();
    let mut q = vec![Rat::zero(); r.len().saturating_sub(b.len()) + 1];
    while r.len() >= b.len() {
        let k = r.len() - b.len();
        let f = r.last().unwrap() / &lead;
        q[k] = f.clone();
        for (i, c) in b.iter().enumerate() {
            let v = &r[k + i] - &(c * &f);
            r[k + i] = v;
        }
        r = trim(r);
    }
    assert!(r.is_empty(), "division was not exact");
    trim(q)
}

fn sturm_chain(p: &[Rat]) -> Vec<Poly> {
    let mut chain = vec![trim(p.to_vec()), derivative(p)];
    loop {
        let n = chain.len();
        if chain[n - 1].is_empty() {
            chain.pop();
            break;
        }
        let r = neg(&rem(&chain[n - 2], &chain[n - 1]));
        if r.is_empty() {
            break;
        }
        chain.push(r);
    }
    chain
}

fn sign_at(p: &[Rat], x: &Rat) -> i32 {
    let v = eval(p, x);
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

fn variations(signs: &[i32]) -> usize {
    let nz: Vec<i32> = signs.iter().copied().filter(|s| *s != 0).collect();
    nz.windows(2).filter(|w| w[0] != w[1]).count()
}

fn count_roots(chain: &[Poly], lo: &Rat, hi: &Rat) -> usize {
    let vl = variations(&chain.iter().map(|q| sign_at(q, lo)).collect::<Vec<_>>());
    let vh = variations(&chain.iter().map(|q| sign_at(q, hi)).collect::<Vec<_>>());
    vl - vh
}

/// Cauchy root bound: all real roots lie in (-B, B).
fn root_bound(p: &[Rat]) -> Rat {
    let lead = p.last().expect("nonzero polynomial").abs();
    let mut m = Rat::zero();
    for c in &p[..p.len() - 1] {
        let a = c.abs() / &lead;
        if a > m {
            m = a;
        }
    }
    m + Rat::one()
}

/// A real root: exactly rational, or isolated in an open interval with
/// non-root endpoints.
#[derive(Debug, Clone)]
enum Root {
    Exact(Rat),
    Interval(Rat, Rat),
}

impl Root {
    fn lower(&self) -> &Rat {
        match self {
            Root::Exact(m) => m,
            Root::Interval(a, _) => a,
        }
    }

    fn upper(&self) -> &Rat {
        match self {
            Root::Exact(m) => m,
            Root::Interval(_, b) => b,
        }
    }
}

/// Isolate all roots of the squarefree `s` in `(lo, hi)`; `s(lo)` and
/// `s(hi)` must be nonzero.  Results are ordered and pairwise disjoint.
fn isolate(s: &[Rat], chain: &[Poly], lo: &Rat, hi: &Rat, out: &mut Vec<Root>) {
    let n = count_roots(chain, lo, hi);
    if n == 0 {
        return;
    }
    if n == 1 {
        out.push(Root::Interval(lo.clone(), hi.clone()));
        return;
    }
    let mid = (lo + hi) / rat_int(2);
    if sign_at(s, &mid) == 0 {
        // Exact rational root at the midpoint; fence it off with non-root
        // points on either side before recursing.
        let mut delta = (hi - lo) / rat_int(4);
        let (a, b) = loop {
            let a = &mid - &delta;
            let b = &mid + &delta;
            if sign_at(s, &a) != 0
                && sign_at(s, &b) != 0
                && count_roots(chain, &a, &b) == 1
            {
                break (a, b);
            }
            delta /= rat_int(2);
        };
        isolate(s, chain, lo, &a, out);
        out.push(Root::Exact(mid));
        isolate(s, chain, &b, hi, out);
    } else {
        isolate(s, chain, lo, &mid, out);
        isolate(s, chain, &mid, hi, out);
    }
}

/// Decide `exists x. p(x) rel 0` over the reals.
pub fn sturm_exists(op: RelOp, p: &[Rat]) -> bool {
    let p = trim(p.to_vec());
    if p.is_empty() {
        // p is identically zero.
        return op.eval(&Rat::zero(), &Rat::zero());
    }
    if p.len() == 1 {
        return op.eval(&p[0], &Rat::zero());
    }
    let d = derivative(&p);
    let g = gcd(&p, &d);
    let s = if g.len() <= 1 { p.clone() } else { div_exact(&p, &g) };
    let chain = sturm_chain(&s);
    let bound = root_bound(&p) + Rat::one();
    let lo = -bound.clone();
    let hi = bound;
    let mut roots = Vec::new();
    isolate(&s, &chain, &lo, &hi, &mut roots);
    let has_root = !roots.is_empty();
    if op == RelOp::Eq {
        return has_root;
    }
    // One sample point inside every maximal root-free region.
    let mut samples = vec![lo.clone(), hi.clone()];
    for w in roots.windows(2) {
        let a = w[0].upper();
        let b = w[1].lower();
        let sep = if a < b {
            (a + b) / rat_int(2)
        } else {
            // Adjacent isolating intervals share a (non-root) bisection
            // endpoint, which lies strictly between the two roots.
            a.clone()
        };
        if sign_at(&s, &sep) != 0 {
            samples.push(sep);
        }
    }
    // Also sample just around each root using its isolating endpoints.
    for r in &roots {
        if let Root::Interval(a, b) = r {
            samples.push(a.clone());
            samples.push(b.clone());
        }
    }
    let any_neg = samples.iter().any(|x| sign_at(&p, x) < 0);
    let any_pos = samples.iter().any(|x| sign_at(&p, x) > 0);
    match op {
        RelOp::Lt => any_neg,
        RelOp::Gt => any_pos,
        RelOp::Le => any_neg || has_root,
        RelOp::Ge => any_pos || has_root,
        RelOp::Eq => unreachable!(),
    }
}
