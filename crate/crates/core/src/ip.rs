//! Full decision for inner product / Hilbert space theories with
//! dimension constraints.
//!
//! The pipeline: a sentence in the inner-product language holds in the
//! n-dimensional space iff its coordinate reduction `res(p, n)` holds over
//! the reals, and its truth is stable for all dimensions (including
//! infinite) at or beyond its vector-variable count `k`.  Deciding the
//! `k + 1` scalar reductions therefore yields the exact set of dimensions
//! in which the sentence holds — always a finite or cofinite subset of
//! ℕ ∪ {∞} — from which validity under any dimension constraint follows.

use crate::ast::{
    all_names, count_vector_vars, free_vars, fresh_name, in_inner_language, is_closed,
    vector_var_names, Formula, Rat, ScalarTerm, Sort, VectorTerm,
};
use crate::axioms::inner_product_axioms;
use crate::rcf::{self, Budget, RcfError, Validity};
use crate::transform::rectify;
use std::collections::{BTreeMap, BTreeSet};

/// Which class of inner product spaces a sentence is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimensionConstraint {
    /// All inner product spaces.
    Any,
    /// All finite-dimensional spaces.
    Finite,
    /// All infinite-dimensional spaces.
    Infinite,
    /// Spaces of exactly this dimension.
    Exactly(u32),
    /// Spaces of dimension at most this.
    AtMost(u32),
}

/// The set of dimensions (in ℕ ∪ {∞}) in which a sentence holds: always
/// a finite set of naturals, or the complement of one (the complement
/// includes ∞).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimensionSet {
    FiniteSet(BTreeSet<u32>),
    /// The complement of the carried finite set; contains ∞.
    CofiniteSet(BTreeSet<u32>),
}

impl DimensionSet {
    pub fn contains(&self, n: u32) -> bool {
        match self {
            DimensionSet::FiniteSet(s) => s.contains(&n),
            DimensionSet::CofiniteSet(e) => !e.contains(&n),
        }
    }

    pub fn contains_infinity(&self) -> bool {
        matches!(self, DimensionSet::CofiniteSet(_))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum IpError {
    #[error("formula is not in the inner-product language (norm or distance symbol present)")]
    NotInnerLanguage,
    #[error("formula must be a closed sentence; free variables: {0}")]
    NotClosed(String),
    #[error(transparent)]
    Rcf(#[from] RcfError),
}

fn require_language(f: &Formula) -> Result<(), IpError> {
    if in_inner_language(f) {
        Ok(())
    } else {
        Err(IpError::NotInnerLanguage)
    }
}

fn require_closed(f: &Formula) -> Result<(), IpError> {
    if is_closed(f) {
        Ok(())
    } else {
        let names: Vec<String> = free_vars(f).into_iter().map(|(n, _)| n).collect();
        Err(IpError::NotClosed(names.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// Standard form
// ---------------------------------------------------------------------------

/// Rewrite a formula in the inner-product language so that the only
/// vector expressions are variables occurring as operands of the inner
/// product.  Vector equations `a = b` become `<a-b, a-b> = 0` first.
pub fn standard_form(f: &Formula) -> Result<Formula, IpError> {
    require_language(f)?;
    sf_formula(f)
}

fn sf_formula(f: &Formula) -> Result<Formula, IpError> {
    Ok(match f {
        Formula::Cmp(op, a, b) => Formula::cmp(*op, sf_term(a)?, sf_term(b)?),
        Formula::VecEq(a, b) => {
            let d = VectorTerm::sub(a.clone(), b.clone());
            Formula::eq(expand_inner(&d, &d)?, ScalarTerm::zero())
        }
        Formula::Not(p) => Formula::not(sf_formula(p)?),
        Formula::And(a, b) => Formula::and(sf_formula(a)?, sf_formula(b)?),
        Formula::Or(a, b) => Formula::or(sf_formula(a)?, sf_formula(b)?),
        Formula::Implies(a, b) => Formula::implies(sf_formula(a)?, sf_formula(b)?),
        Formula::Iff(a, b) => Formula::iff(sf_formula(a)?, sf_formula(b)?),
        Formula::Forall(x, s, p) => Formula::Forall(x.clone(), *s, Box::new(sf_formula(p)?)),
        Formula::Exists(x, s, p) => Formula::Exists(x.clone(), *s, Box::new(sf_formula(p)?)),
    })
}

fn sf_term(t: &ScalarTerm) -> Result<ScalarTerm, IpError> {
    Ok(match t {
        ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
        ScalarTerm::Add(a, b) => ScalarTerm::add(sf_term(a)?, sf_term(b)?),
        ScalarTerm::Neg(a) => ScalarTerm::neg(sf_term(a)?),
        ScalarTerm::Mul(a, b) => ScalarTerm::mul(sf_term(a)?, sf_term(b)?),
        ScalarTerm::Inner(a, b) => expand_inner(a, b)?,
        ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => return Err(IpError::NotInnerLanguage),
    })
}

/// Bilinear expansion of `<a, b>` down to inner products of variables.
fn expand_inner(a: &VectorTerm, b: &VectorTerm) -> Result<ScalarTerm, IpError> {
    Ok(match a {
        VectorTerm::Add(u, v) => ScalarTerm::add(expand_inner(u, b)?, expand_inner(v, b)?),
        VectorTerm::Neg(u) => ScalarTerm::neg(expand_inner(u, b)?),
        VectorTerm::Scale(s, u) => ScalarTerm::mul(sf_term(s)?, expand_inner(u, b)?),
        VectorTerm::Zero => ScalarTerm::zero(),
        VectorTerm::Var(x) => match b {
            VectorTerm::Add(u, v) => ScalarTerm::add(expand_inner(a, u)?, expand_inner(a, v)?),
            VectorTerm::Neg(u) => ScalarTerm::neg(expand_inner(a, u)?),
            VectorTerm::Scale(s, u) => ScalarTerm::mul(sf_term(s)?, expand_inner(a, u)?),
            VectorTerm::Zero => ScalarTerm::zero(),
            VectorTerm::Var(y) => {
                ScalarTerm::inner(VectorTerm::var(x.clone()), VectorTerm::var(y.clone()))
            }
        },
    })
}

// ---------------------------------------------------------------------------
// Coordinate reduction res(p, n)
// ---------------------------------------------------------------------------

/// A scalar sentence valid over ℝ iff `p` holds in the n-dimensional
/// inner product space ℝⁿ.  Vector quantifiers become blocks of `n`
/// scalar quantifiers; inner products become coordinate sums; vector
/// equations become per-coordinate conjunctions.  For `n = 0` vector
/// quantifiers are deleted, inner products become `0`, and vector
/// equations become `0 = 0`.
pub fn res(p: &Formula, n: u32) -> Result<Formula, IpError> {
    require_language(p)?;
    require_closed(p)?;
    let p = rectify(p);
    if n == 0 {
        return res0(&p);
    }
    let mut used = all_names(&p);
    let mut env: BTreeMap<String, Vec<String>> = BTreeMap::new();
    res_n(&p, n as usize, &mut env, &mut used)
}

fn res0(f: &Formula) -> Result<Formula, IpError> {
    Ok(match f {
        Formula::Cmp(op, a, b) => Formula::cmp(*op, res0_term(a)?, res0_term(b)?),
        Formula::VecEq(_, _) => Formula::tru(),
        Formula::Not(p) => Formula::not(res0(p)?),
        Formula::And(a, b) => Formula::and(res0(a)?, res0(b)?),
        Formula::Or(a, b) => Formula::or(res0(a)?, res0(b)?),
        Formula::Implies(a, b) => Formula::implies(res0(a)?, res0(b)?),
        Formula::Iff(a, b) => Formula::iff(res0(a)?, res0(b)?),
        Formula::Forall(_, Sort::Vector, p) | Formula::Exists(_, Sort::Vector, p) => res0(p)?,
        Formula::Forall(x, Sort::Scalar, p) => {
            Formula::forall(x.clone(), Sort::Scalar, res0(p)?)
        }
        Formula::Exists(x, Sort::Scalar, p) => {
            Formula::exists(x.clone(), Sort::Scalar, res0(p)?)
        }
    })
}

fn res0_term(t: &ScalarTerm) -> Result<ScalarTerm, IpError> {
    Ok(match t {
        ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
        ScalarTerm::Add(a, b) => ScalarTerm::add(res0_term(a)?, res0_term(b)?),
        ScalarTerm::Neg(a) => ScalarTerm::neg(res0_term(a)?),
        ScalarTerm::Mul(a, b) => ScalarTerm::mul(res0_term(a)?, res0_term(b)?),
        ScalarTerm::Inner(_, _) => ScalarTerm::zero(),
        ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => return Err(IpError::NotInnerLanguage),
    })
}

fn res_n(
    f: &Formula,
    n: usize,
    env: &mut BTreeMap<String, Vec<String>>,
    used: &mut BTreeSet<String>,
) -> Result<Formula, IpError> {
    Ok(match f {
        Formula::Cmp(op, a, b) => {
            Formula::cmp(*op, res_term(a, n, env, used)?, res_term(b, n, env, used)?)
        }
        Formula::VecEq(a, b) => {
            let ca = coords(a, n, env, used)?;
            let cb = coords(b, n, env, used)?;
            Formula::and_all(
                ca.into_iter()
                    .zip(cb)
                    .map(|(x, y)| Formula::eq(x, y)),
            )
        }
        Formula::Not(p) => Formula::not(res_n(p, n, env, used)?),
        Formula::And(a, b) => Formula::and(res_n(a, n, env, used)?, res_n(b, n, env, used)?),
        Formula::Or(a, b) => Formula::or(res_n(a, n, env, used)?, res_n(b, n, env, used)?),
        Formula::Implies(a, b) => {
            Formula::implies(res_n(a, n, env, used)?, res_n(b, n, env, used)?)
        }
        Formula::Iff(a, b) => Formula::iff(res_n(a, n, env, used)?, res_n(b, n, env, used)?),
        Formula::Forall(v, Sort::Vector, p) | Formula::Exists(v, Sort::Vector, p) => {
            let names: Vec<String> = (1..=n)
                .map(|i| fresh_name(&format!("{v}_{i}"), used))
                .collect();
            env.insert(v.clone(), names.clone());
            let body = res_n(p, n, env, used)?;
            env.remove(v);
            let binders: Vec<(String, Sort)> =
                names.into_iter().map(|x| (x, Sort::Scalar)).collect();
            if matches!(f, Formula::Forall(_, _, _)) {
                Formula::forall_many(&binders, body)
            } else {
                Formula::exists_many(&binders, body)
            }
        }
        Formula::Forall(x, Sort::Scalar, p) => {
            Formula::forall(x.clone(), Sort::Scalar, res_n(p, n, env, used)?)
        }
        Formula::Exists(x, Sort::Scalar, p) => {
            Formula::exists(x.clone(), Sort::Scalar, res_n(p, n, env, used)?)
        }
    })
}

fn res_term(
    t: &ScalarTerm,
    n: usize,
    env: &mut BTreeMap<String, Vec<String>>,
    used: &mut BTreeSet<String>,
) -> Result<ScalarTerm, IpError> {
    Ok(match t {
        ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
        ScalarTerm::Add(a, b) => {
            ScalarTerm::add(res_term(a, n, env, used)?, res_term(b, n, env, used)?)
        }
        ScalarTerm::Neg(a) => ScalarTerm::neg(res_term(a, n, env, used)?),
        ScalarTerm::Mul(a, b) => {
            ScalarTerm::mul(res_term(a, n, env, used)?, res_term(b, n, env, used)?)
        }
        ScalarTerm::Inner(a, b) => {
            let ca = coords(a, n, env, used)?;
            let cb = coords(b, n, env, used)?;
            ScalarTerm::sum(ca.into_iter().zip(cb).map(|(x, y)| ScalarTerm::mul(x, y)))
        }
        ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => return Err(IpError::NotInnerLanguage),
    })
}

fn coords(
    t: &VectorTerm,
    n: usize,
    env: &mut BTreeMap<String, Vec<String>>,
    used: &mut BTreeSet<String>,
) -> Result<Vec<ScalarTerm>, IpError> {
    Ok(match t {
        VectorTerm::Zero => vec![ScalarTerm::zero(); n],
        VectorTerm::Var(v) => {
            let names = env
                .get(v)
                .ok_or_else(|| IpError::NotClosed(v.clone()))?
                .clone();
            names.into_iter().map(ScalarTerm::var).collect()
        }
        VectorTerm::Add(a, b) => {
            let ca = coords(a, n, env, used)?;
            let cb = coords(b, n, env, used)?;
            ca.into_iter()
                .zip(cb)
                .map(|(x, y)| ScalarTerm::add(x, y))
                .collect()
        }
        VectorTerm::Neg(a) => coords(a, n, env, used)?
            .into_iter()
            .map(ScalarTerm::neg)
            .collect(),
        VectorTerm::Scale(s, a) => {
            let sc = res_term(s, n, env, used)?;
            coords(a, n, env, used)?
                .into_iter()
                .map(|x| ScalarTerm::mul(sc.clone(), x))
                .collect()
        }
    })
}

// ---------------------------------------------------------------------------
// Dimension-bounding sentences and the star disjunction
// ---------------------------------------------------------------------------

/// "The space has dimension at most n": there is a spanning set of at
/// most n vectors.  For n = 0 this is `forall w. w = 0v`.
pub fn dim_le_sentence(n: u32) -> Formula {
    if n == 0 {
        return Formula::forall(
            "w",
            Sort::Vector,
            Formula::vec_eq(VectorTerm::var("w"), VectorTerm::Zero),
        );
    }
    let vs: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    let asc: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    let combo = vs
        .iter()
        .zip(&asc)
        .map(|(v, a)| VectorTerm::scale(ScalarTerm::var(a.clone()), VectorTerm::var(v.clone())))
        .reduce(VectorTerm::add)
        .expect("n >= 1");
    let body = Formula::vec_eq(combo, VectorTerm::var("w"));
    let inner = Formula::exists_many(
        &asc.iter()
            .map(|a| (a.clone(), Sort::Scalar))
            .collect::<Vec<_>>(),
        body,
    );
    let all_w = Formula::forall("w", Sort::Vector, inner);
    Formula::exists_many(
        &vs.iter()
            .map(|v| (v.clone(), Sort::Vector))
            .collect::<Vec<_>>(),
        all_w,
    )
}

/// The dimension-case disjunction equivalent to `p` in every inner
/// product space: `(D_0 ∧ Res(p,0)) ∨ (D_1 ∧ Res(p,1)) ∨ ... ∨
/// (¬D_≤(k-1) ∧ Res(p,k))` where `k` is the vector-variable count and
/// `D_n` asserts dimension exactly `n`.
pub fn star(p: &Formula) -> Result<Formula, IpError> {
    require_language(p)?;
    require_closed(p)?;
    let k = count_vector_vars(p) as u32;
    if k == 0 {
        return res(p, 0);
    }
    let mut disjuncts = Vec::new();
    for n in 0..=k {
        let r = res(p, n)?;
        let guard = if n == 0 {
            dim_le_sentence(0)
        } else if n < k {
            Formula::and(
                dim_le_sentence(n),
                Formula::not(dim_le_sentence(n - 1)),
            )
        } else {
            Formula::not(dim_le_sentence(k - 1))
        };
        disjuncts.push(Formula::and(guard, r));
    }
    Ok(Formula::or_all(disjuncts))
}

// ---------------------------------------------------------------------------
// Dimension sets and the decision procedure
// ---------------------------------------------------------------------------

/// The set of dimensions (in ℕ ∪ {∞}) in which the sentence holds.
/// Truth at every dimension ≥ k (k the vector-variable count), including
/// ∞, equals truth at k, so deciding the k+1 reductions suffices.
pub fn dimension_set(p: &Formula, budget: &Budget) -> Result<DimensionSet, IpError> {
    require_language(p)?;
    require_closed(p)?;
    let k = count_vector_vars(p) as u32;
    let mut valid = BTreeSet::new();
    let mut invalid = BTreeSet::new();
    for i in 0..=k {
        match rcf::decide(&res(p, i)?, budget)? {
            Validity::Valid => {
                valid.insert(i);
            }
            Validity::Invalid => {
                invalid.insert(i);
            }
        }
    }
    if valid.contains(&k) {
        Ok(DimensionSet::CofiniteSet(invalid))
    } else {
        Ok(DimensionSet::FiniteSet(valid))
    }
}

/// Whether the sentence holds in the space of dimension `n` (truth at any
/// dimension at or beyond the vector-variable count `k` equals truth at
/// `k`, so the query is capped there).
fn holds_in_dimension(p: &Formula, n: u32, k: u32, budget: &Budget) -> Result<bool, IpError> {
    let r = res(p, n.min(k))?;
    Ok(rcf::decide(&r, budget)? == Validity::Valid)
}

/// Decide a sentence of the inner-product (or plain vector-space)
/// language against a class of spaces given by a dimension constraint.
/// Validity in the Hilbert-space variants coincides with the inner
/// product case, so a single procedure covers both.  Only the coordinate
/// reductions the constraint actually needs are decided.
pub fn decide_ip(
    p: &Formula,
    c: DimensionConstraint,
    budget: &Budget,
) -> Result<Validity, IpError> {
    require_language(p)?;
    require_closed(p)?;
    let k = count_vector_vars(p) as u32;
    let ok = match c {
        // Truth at every dimension in ℕ ∪ {∞} (for Finite: in ℕ) reduces
        // to truth at 0..=k in both cases.
        DimensionConstraint::Any | DimensionConstraint::Finite => {
            let mut all = true;
            for i in 0..=k {
                if !holds_in_dimension(p, i, k, budget)? {
                    all = false;
                    break;
                }
            }
            all
        }
        DimensionConstraint::Infinite => holds_in_dimension(p, k, k, budget)?,
        DimensionConstraint::Exactly(n) => holds_in_dimension(p, n, k, budget)?,
        DimensionConstraint::AtMost(n) => {
            let mut all = true;
            for i in 0..=n.min(k) {
                if !holds_in_dimension(p, i, k, budget)? {
                    all = false;
                    break;
                }
            }
            all
        }
    };
    Ok(if ok { Validity::Valid } else { Validity::Invalid })
}

// ---------------------------------------------------------------------------
// Polarization into the normed language
// ---------------------------------------------------------------------------

/// Translate an inner-product sentence into the normed language via the
/// polarization identity `<a,b> = (|a+b|^2 - |a|^2 - |b|^2) / 2`,
/// guarded by the translated inner-product axioms: the result is
/// `I* => P*`, valid in all normed spaces iff `p` is valid in all inner
/// product spaces.
pub fn polarize(p: &Formula) -> Result<Formula, IpError> {
    require_language(p)?;
    require_closed(p)?;
    let istar = Formula::and_all(
        inner_product_axioms()
            .iter()
            .map(pol_formula)
            .collect::<Result<Vec<_>, _>>()?,
    );
    Ok(Formula::implies(istar, pol_formula(p)?))
}

fn pol_formula(f: &Formula) -> Result<Formula, IpError> {
    Ok(match f {
        Formula::Cmp(op, a, b) => Formula::cmp(*op, pol_term(a)?, pol_term(b)?),
        Formula::VecEq(a, b) => Formula::vec_eq(pol_vterm(a)?, pol_vterm(b)?),
        Formula::Not(p) => Formula::not(pol_formula(p)?),
        Formula::And(a, b) => Formula::and(pol_formula(a)?, pol_formula(b)?),
        Formula::Or(a, b) => Formula::or(pol_formula(a)?, pol_formula(b)?),
        Formula::Implies(a, b) => Formula::implies(pol_formula(a)?, pol_formula(b)?),
        Formula::Iff(a, b) => Formula::iff(pol_formula(a)?, pol_formula(b)?),
        Formula::Forall(x, s, p) => Formula::Forall(x.clone(), *s, Box::new(pol_formula(p)?)),
        Formula::Exists(x, s, p) => Formula::Exists(x.clone(), *s, Box::new(pol_formula(p)?)),
    })
}

fn norm_sq(v: VectorTerm) -> ScalarTerm {
    ScalarTerm::mul(ScalarTerm::norm(v.clone()), ScalarTerm::norm(v))
}

fn pol_term(t: &ScalarTerm) -> Result<ScalarTerm, IpError> {
    Ok(match t {
        ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
        ScalarTerm::Add(a, b) => ScalarTerm::add(pol_term(a)?, pol_term(b)?),
        ScalarTerm::Neg(a) => ScalarTerm::neg(pol_term(a)?),
        ScalarTerm::Mul(a, b) => ScalarTerm::mul(pol_term(a)?, pol_term(b)?),
        ScalarTerm::Inner(a, b) => {
            let a = pol_vterm(a)?;
            let b = pol_vterm(b)?;
            let sum = VectorTerm::add(a.clone(), b.clone());
            ScalarTerm::mul(
                ScalarTerm::constant(Rat::new(1.into(), 2.into())),
                ScalarTerm::add(
                    norm_sq(sum),
                    ScalarTerm::add(
                        ScalarTerm::neg(norm_sq(a)),
                        ScalarTerm::neg(norm_sq(b)),
                    ),
                ),
            )
        }
        ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => return Err(IpError::NotInnerLanguage),
    })
}

fn pol_vterm(t: &VectorTerm) -> Result<VectorTerm, IpError> {
    Ok(match t {
        VectorTerm::Zero | VectorTerm::Var(_) => t.clone(),
        VectorTerm::Add(a, b) => VectorTerm::add(pol_vterm(a)?, pol_vterm(b)?),
        VectorTerm::Neg(a) => VectorTerm::neg(pol_vterm(a)?),
        VectorTerm::Scale(s, a) => VectorTerm::scale(pol_term(s)?, pol_vterm(a)?),
    })
}

// ---------------------------------------------------------------------------
// Special-formula view (debug aid)
// ---------------------------------------------------------------------------

/// The Gram-matrix presentation of a standard-form, quantifier-free
/// formula: scalar variables `x_ij = <v_i, v_j>` plus a vector-free core.
/// This is a debugging view; the decision path works through `res`/`star`
/// directly.
#[derive(Debug, Clone)]
pub struct SpecialFormula {
    pub vector_vars: Vec<String>,
    /// gram_names[i][j] holds the scalar name standing for `<v_i, v_j>`.
    pub gram_names: Vec<Vec<String>>,
    pub core: Formula,
}

impl SpecialFormula {
    /// Rebuild the displayed shape
    /// `exists x_11 .. x_tt. (/\ x_ij = <v_i,v_j>) /\ core`.
    pub fn to_formula(&self) -> Formula {
        let mut defs = Vec::new();
        let mut binders = Vec::new();
        for (i, vi) in self.vector_vars.iter().enumerate() {
            for (j, vj) in self.vector_vars.iter().enumerate() {
                let name = &self.gram_names[i][j];
                binders.push((name.clone(), Sort::Scalar));
                defs.push(Formula::eq(
                    ScalarTerm::var(name.clone()),
                    ScalarTerm::inner(VectorTerm::var(vi.clone()), VectorTerm::var(vj.clone())),
                ));
            }
        }
        let body = Formula::and(Formula::and_all(defs), self.core.clone());
        Formula::exists_many(&binders, body)
    }
}

/// Abstract the inner products of a standard-form formula into Gram
/// scalar variables.
pub fn special_view(f: &Formula) -> Result<SpecialFormula, IpError> {
    let f = standard_form(f)?;
    let vars: Vec<String> = vector_var_names(&f).into_iter().collect();
    let mut used = all_names(&f);
    let gram_names: Vec<Vec<String>> = vars
        .iter()
        .enumerate()
        .map(|(i, _)| {
            vars.iter()
                .enumerate()
                .map(|(j, _)| fresh_name(&format!("x{}_{}", i + 1, j + 1), &mut used))
                .collect()
        })
        .collect();
    let core = abstract_inners(&f, &vars, &gram_names);
    Ok(SpecialFormula {
        vector_vars: vars,
        gram_names,
        core,
    })
}

fn abstract_inners(f: &Formula, vars: &[String], gram: &[Vec<String>]) -> Formula {
    fn go_term(t: &ScalarTerm, vars: &[String], gram: &[Vec<String>]) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => {
                ScalarTerm::add(go_term(a, vars, gram), go_term(b, vars, gram))
            }
            ScalarTerm::Neg(a) => ScalarTerm::neg(go_term(a, vars, gram)),
            ScalarTerm::Mul(a, b) => {
                ScalarTerm::mul(go_term(a, vars, gram), go_term(b, vars, gram))
            }
            ScalarTerm::Inner(a, b) => {
                if let (VectorTerm::Var(x), VectorTerm::Var(y)) = (&**a, &**b) {
                    let i = vars.iter().position(|v| v == x);
                    let j = vars.iter().position(|v| v == y);
                    if let (Some(i), Some(j)) = (i, j) {
                        return ScalarTerm::var(gram[i][j].clone());
                    }
                }
                t.clone()
            }
            ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => t.clone(),
        }
    }
    match f {
        Formula::Cmp(op, a, b) => {
            Formula::cmp(*op, go_term(a, vars, gram), go_term(b, vars, gram))
        }
        Formula::VecEq(_, _) => f.clone(),
        Formula::Not(p) => Formula::not(abstract_inners(p, vars, gram)),
        Formula::And(a, b) => Formula::and(
            abstract_inners(a, vars, gram),
            abstract_inners(b, vars, gram),
        ),
        Formula::Or(a, b) => Formula::or(
            abstract_inners(a, vars, gram),
            abstract_inners(b, vars, gram),
        ),
        Formula::Implies(a, b) => Formula::implies(
            abstract_inners(a, vars, gram),
            abstract_inners(b, vars, gram),
        ),
        Formula::Iff(a, b) => Formula::iff(
            abstract_inners(a, vars, gram),
            abstract_inners(b, vars, gram),
        ),
        Formula::Forall(x, s, p) => {
            Formula::Forall(x.clone(), *s, Box::new(abstract_inners(p, vars, gram)))
        }
        Formula::Exists(x, s, p) => {
            Formula::Exists(x.clone(), *s, Box::new(abstract_inners(p, vars, gram)))
        }
    }
}
