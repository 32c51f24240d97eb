//! Decision procedure for the forall-exists point fragment over metric
//! spaces, with finite counter-model extraction.
//!
//! A prenex sentence whose existential point quantifiers all precede every
//! universal quantifier is satisfiable in some metric space iff it is
//! satisfiable in a finite metric space over its existential witnesses:
//! universal point quantifiers may be instantiated over just the witness
//! points, distances abstracted into scalar unknowns constrained by the
//! metric axioms, and the resulting purely scalar sentence decided over
//! the reals.  Validity of the dual forall-exists fragment follows by
//! negation, and a satisfying rational assignment to the distance
//! unknowns yields an explicit finite model after identifying points at
//! distance zero.

use crate::ast::{
    all_names, format_rat, fresh_name, free_vars, in_metric_language, is_closed, parse_rat,
    rename_vector_vars, Formula, Rat, ScalarTerm, Sort, VectorTerm,
};
use crate::rcf::{self, Budget, RcfError, Validity};
use crate::transform::{from_prenex_parts, prenex_parts, prefix_is_ea_p, Quant};
use num_traits::Zero;
use std::collections::BTreeMap;

/// Verdict for a metric-space validity query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricVerdict {
    Valid,
    Invalid,
    /// The sentence falls outside the decidable forall-exists point
    /// fragment.
    Unsupported,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum MetricError {
    #[error("formula is not in the metric-space language")]
    NotMetricLanguage,
    #[error("formula must be a closed sentence; free variables: {0}")]
    NotClosed(String),
    #[error(
        "sentence is not in the exists-forall point fragment (an existential point \
         quantifier occurs inside a universal quantifier)"
    )]
    NotExistsForallShape,
    #[error("malformed finite metric model: {0}")]
    BadModel(String),
    #[error(transparent)]
    Rcf(#[from] RcfError),
}

/// A finite metric space: points `0..n` with an exact rational distance
/// matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricModel {
    pub dist: Vec<Vec<Rat>>,
}

impl FiniteMetricModel {
    pub fn points(&self) -> usize {
        self.dist.len()
    }

    /// Check the metric axioms: zero diagonal, strict positivity off the
    /// diagonal, symmetry, and the triangle inequality.
    pub fn validate(&self) -> Result<(), MetricError> {
        let n = self.points();
        if n == 0 {
            return Err(MetricError::BadModel("no points".into()));
        }
        for row in &self.dist {
            if row.len() != n {
                return Err(MetricError::BadModel("ragged distance matrix".into()));
            }
        }
        for i in 0..n {
            if !self.dist[i][i].is_zero() {
                return Err(MetricError::BadModel(format!("d({i},{i}) is not 0")));
            }
            for j in 0..n {
                if i != j && self.dist[i][j] <= Rat::zero() {
                    return Err(MetricError::BadModel(format!("d({i},{j}) is not positive")));
                }
                if self.dist[i][j] != self.dist[j][i] {
                    return Err(MetricError::BadModel(format!("d({i},{j}) != d({j},{i})")));
                }
                for k in 0..n {
                    if self.dist[i][k] > &self.dist[i][j] + &self.dist[j][k] {
                        return Err(MetricError::BadModel(format!(
                            "triangle inequality fails on ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Line-oriented text form: a `points n` header, then the rows of the
    /// distance matrix as `a/b` rationals.  Bit-exact round-trip.
    pub fn serialize(&self) -> String {
        let mut out = format!("points {}\n", self.points());
        for row in &self.dist {
            let cells: Vec<String> = row.iter().map(format_rat).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<FiniteMetricModel, MetricError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| MetricError::BadModel("empty input".into()))?;
        let n: usize = header
            .strip_prefix("points ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| MetricError::BadModel("bad header line".into()))?;
        let mut dist = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| MetricError::BadModel("missing matrix row".into()))?;
            let row: Option<Vec<Rat>> = line.split_whitespace().map(parse_rat).collect();
            let row = row.ok_or_else(|| MetricError::BadModel("bad rational".into()))?;
            if row.len() != n {
                return Err(MetricError::BadModel("wrong row length".into()));
            }
            dist.push(row);
        }
        let m = FiniteMetricModel { dist };
        m.validate()?;
        Ok(m)
    }
}

/// The scalar satisfiability encoding of an exists-forall point sentence:
/// universal points instantiated over the `n` existential witnesses,
/// distances replaced by scalar unknowns under the metric-axiom
/// constraints.
#[derive(Debug, Clone)]
pub struct T2Instance {
    pub original: Formula,
    /// Number of witness points (at least 1).
    pub n: usize,
    /// `dist_names[i][j]` is the scalar variable standing for the
    /// distance between witnesses `i` and `j` (empty string on the
    /// diagonal, which is the constant 0).
    pub dist_names: Vec<Vec<String>>,
    /// The closed scalar sentence whose truth over the reals is
    /// satisfiability of the original sentence over metric spaces.
    pub t2: Formula,
}

fn require_metric(f: &Formula) -> Result<(), MetricError> {
    if in_metric_language(f) {
        Ok(())
    } else {
        Err(MetricError::NotMetricLanguage)
    }
}

fn require_closed(f: &Formula) -> Result<(), MetricError> {
    if is_closed(f) {
        Ok(())
    } else {
        let names: Vec<String> = free_vars(f).into_iter().map(|(n, _)| n).collect();
        Err(MetricError::NotClosed(names.join(", ")))
    }
}

/// Expand every universal point quantifier into a conjunction over the
/// witness names; scalar quantifiers stay.  The body contains no
/// existential point quantifiers.
fn instantiate_points(f: &Formula, witnesses: &[String]) -> Formula {
    match f {
        Formula::Forall(y, Sort::Vector, p) => Formula::and_all(witnesses.iter().map(|w| {
            let mut map = BTreeMap::new();
            map.insert(y.clone(), w.clone());
            instantiate_points(&rename_vector_vars(p, &map), witnesses)
        })),
        Formula::Forall(x, Sort::Scalar, p) => {
            Formula::forall(x.clone(), Sort::Scalar, instantiate_points(p, witnesses))
        }
        Formula::Exists(x, Sort::Scalar, p) => {
            Formula::exists(x.clone(), Sort::Scalar, instantiate_points(p, witnesses))
        }
        Formula::Exists(_, Sort::Vector, _) => {
            unreachable!("existential point quantifiers are hoisted before instantiation")
        }
        Formula::Not(p) => Formula::not(instantiate_points(p, witnesses)),
        Formula::And(a, b) => Formula::and(
            instantiate_points(a, witnesses),
            instantiate_points(b, witnesses),
        ),
        Formula::Or(a, b) => Formula::or(
            instantiate_points(a, witnesses),
            instantiate_points(b, witnesses),
        ),
        Formula::Implies(a, b) => Formula::implies(
            instantiate_points(a, witnesses),
            instantiate_points(b, witnesses),
        ),
        Formula::Iff(a, b) => Formula::iff(
            instantiate_points(a, witnesses),
            instantiate_points(b, witnesses),
        ),
        Formula::Cmp(_, _, _) | Formula::VecEq(_, _) => f.clone(),
    }
}

/// Replace `d(x_i, x_j)` by its distance variable and point equations by
/// vanishing distance.
fn abstract_distances(
    f: &Formula,
    index: &BTreeMap<String, usize>,
    names: &[Vec<String>],
) -> Formula {
    fn dterm(
        i: usize,
        j: usize,
        names: &[Vec<String>],
    ) -> ScalarTerm {
        if i == j {
            ScalarTerm::zero()
        } else {
            ScalarTerm::var(names[i.min(j)][i.max(j)].clone())
        }
    }
    fn sterm(
        t: &ScalarTerm,
        index: &BTreeMap<String, usize>,
        names: &[Vec<String>],
    ) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => {
                ScalarTerm::add(sterm(a, index, names), sterm(b, index, names))
            }
            ScalarTerm::Neg(a) => ScalarTerm::neg(sterm(a, index, names)),
            ScalarTerm::Mul(a, b) => {
                ScalarTerm::mul(sterm(a, index, names), sterm(b, index, names))
            }
            ScalarTerm::Dist(a, b) => {
                let (VectorTerm::Var(x), VectorTerm::Var(y)) = (&**a, &**b) else {
                    unreachable!("metric language admits only point variables under d")
                };
                dterm(index[x], index[y], names)
            }
            ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) => {
                unreachable!("metric language excludes inner and norm")
            }
        }
    }
    match f {
        Formula::Cmp(op, a, b) => {
            Formula::cmp(*op, sterm(a, index, names), sterm(b, index, names))
        }
        Formula::VecEq(a, b) => {
            let (VectorTerm::Var(x), VectorTerm::Var(y)) = (a, b) else {
                unreachable!("metric language admits only point variables in equations")
            };
            Formula::eq(dterm(index[x], index[y], names), ScalarTerm::zero())
        }
        Formula::Not(p) => Formula::not(abstract_distances(p, index, names)),
        Formula::And(a, b) => Formula::and(
            abstract_distances(a, index, names),
            abstract_distances(b, index, names),
        ),
        Formula::Or(a, b) => Formula::or(
            abstract_distances(a, index, names),
            abstract_distances(b, index, names),
        ),
        Formula::Implies(a, b) => Formula::implies(
            abstract_distances(a, index, names),
            abstract_distances(b, index, names),
        ),
        Formula::Iff(a, b) => Formula::iff(
            abstract_distances(a, index, names),
            abstract_distances(b, index, names),
        ),
        Formula::Forall(x, s, p) => {
            Formula::Forall(x.clone(), *s, Box::new(abstract_distances(p, index, names)))
        }
        Formula::Exists(x, s, p) => {
            Formula::Exists(x.clone(), *s, Box::new(abstract_distances(p, index, names)))
        }
    }
}

/// Build the scalar satisfiability encoding of an exists-forall point
/// sentence.  The sentence must be closed, in the metric language, and
/// must have no existential point quantifier inside a universal
/// quantifier; a sentence with no point existentials at all is padded
/// with one unused witness.
pub fn build_t2(q: &Formula) -> Result<T2Instance, MetricError> {
    require_metric(q)?;
    require_closed(q)?;
    let (prefix, matrix) = prenex_parts(q);
    if !prefix_is_ea_p(&prefix) {
        return Err(MetricError::NotExistsForallShape);
    }
    let mut used = all_names(q);
    // Existential point quantifiers all precede the first universal
    // quantifier; hoist them out (they commute with the leading scalar
    // existentials they may be interleaved with).
    let mut witnesses: Vec<String> = Vec::new();
    let mut rest: Vec<(Quant, String, Sort)> = Vec::new();
    for entry in prefix {
        if entry.0 == Quant::Exists && entry.2 == Sort::Vector {
            witnesses.push(entry.1);
        } else {
            rest.push(entry);
        }
    }
    if witnesses.is_empty() {
        witnesses.push(fresh_name("x", &mut used));
    }
    let n = witnesses.len();
    let inner = instantiate_points(&from_prenex_parts(&rest, matrix), &witnesses);

    // One scalar unknown per unordered pair of witnesses.
    let mut dist_names: Vec<Vec<String>> = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let name = fresh_name(&format!("d{}_{}", i + 1, j + 1), &mut used);
            dist_names[i][j] = name.clone();
            dist_names[j][i] = name;
        }
    }
    let index: BTreeMap<String, usize> = witnesses
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let core = abstract_distances(&inner, &index, &dist_names);

    // Metric-axiom constraints on the unknowns.  Symmetry is by shared
    // naming; strict positivity is deliberately omitted — coincident
    // witnesses are merged by the model quotient instead.
    let mut constraints = Vec::new();
    let d = |i: usize, j: usize| -> ScalarTerm {
        if i == j {
            ScalarTerm::zero()
        } else {
            ScalarTerm::var(dist_names[i.min(j)][i.max(j)].clone())
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            constraints.push(Formula::ge(d(i, j), ScalarTerm::zero()));
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    constraints.push(Formula::le(
                        d(i, k),
                        ScalarTerm::add(d(i, j), d(j, k)),
                    ));
                }
            }
        }
    }
    let body = Formula::and(Formula::and_all(constraints), core);
    let binders: Vec<(String, Sort)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (dist_names[i][j].clone(), Sort::Scalar))
        .collect();
    let t2 = Formula::exists_many(&binders, body);
    Ok(T2Instance {
        original: q.clone(),
        n,
        dist_names,
        t2,
    })
}

/// Decide validity over all metric spaces for sentences whose universal
/// point quantifiers are not inside existential quantifiers (the dual of
/// the satisfiability encoding); everything else is `Unsupported`.
pub fn decide_ae_validity(p: &Formula, budget: &Budget) -> Result<MetricVerdict, MetricError> {
    require_metric(p)?;
    require_closed(p)?;
    let negated = Formula::not(p.clone());
    let t2 = match build_t2(&negated) {
        Ok(t2) => t2,
        Err(MetricError::NotExistsForallShape) => return Ok(MetricVerdict::Unsupported),
        Err(e) => return Err(e),
    };
    Ok(match rcf::decide(&t2.t2, budget)? {
        Validity::Valid => MetricVerdict::Invalid,
        Validity::Invalid => MetricVerdict::Valid,
    })
}

/// Satisfiability of an exists-forall point sentence over metric spaces.
pub fn satisfiable(q: &Formula, budget: &Budget) -> Result<bool, MetricError> {
    let t2 = build_t2(q)?;
    Ok(rcf::decide(&t2.t2, budget)? == Validity::Valid)
}

/// Try to extract an explicit finite metric model of a satisfiable
/// exists-forall point sentence: find rational distances satisfying the
/// encoding, then merge witnesses at distance zero.  Returns `None` when
/// no rational assignment is found within the search depth (for example
/// when every model needs irrational distances).
pub fn extract_finite_model(
    q: &Formula,
    budget: &Budget,
    depth: u32,
) -> Result<Option<FiniteMetricModel>, MetricError> {
    let t2 = build_t2(q)?;
    let Some(witness) = rcf::find_rational_witness(&t2.t2, budget, depth)? else {
        return Ok(None);
    };
    let n = t2.n;
    let value = |i: usize, j: usize| -> Rat {
        if i == j {
            Rat::zero()
        } else {
            witness[&t2.dist_names[i.min(j)][i.max(j)]].clone()
        }
    };
    // Merge witness points at distance zero: class representatives in
    // first-seen order.
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        if !reps.iter().any(|&r| value(r, i).is_zero()) {
            reps.push(i);
        }
    }
    let dist: Vec<Vec<Rat>> = reps
        .iter()
        .map(|&r| reps.iter().map(|&c| value(r, c)).collect())
        .collect();
    let model = FiniteMetricModel { dist };
    model.validate()?;
    Ok(Some(model))
}

/// Truth of a metric sentence in a finite model: point quantifiers range
/// over the model's points, distances evaluate to matrix entries, and the
/// residual scalar sentence goes to the real-closed-field backend.
pub fn check_model(
    m: &FiniteMetricModel,
    p: &Formula,
    budget: &Budget,
) -> Result<bool, MetricError> {
    require_metric(p)?;
    require_closed(p)?;
    m.validate()?;
    fn expand(
        f: &Formula,
        m: &FiniteMetricModel,
        env: &mut BTreeMap<String, usize>,
    ) -> Formula {
        match f {
            Formula::Forall(x, Sort::Vector, body) => {
                Formula::and_all((0..m.points()).map(|i| {
                    env.insert(x.clone(), i);
                    let g = expand(body, m, env);
                    env.remove(x);
                    g
                }))
            }
            Formula::Exists(x, Sort::Vector, body) => {
                Formula::or_all((0..m.points()).map(|i| {
                    env.insert(x.clone(), i);
                    let g = expand(body, m, env);
                    env.remove(x);
                    g
                }))
            }
            Formula::Forall(x, Sort::Scalar, body) => {
                Formula::forall(x.clone(), Sort::Scalar, expand(body, m, env))
            }
            Formula::Exists(x, Sort::Scalar, body) => {
                Formula::exists(x.clone(), Sort::Scalar, expand(body, m, env))
            }
            Formula::Not(a) => Formula::not(expand(a, m, env)),
            Formula::And(a, b) => Formula::and(expand(a, m, env), expand(b, m, env)),
            Formula::Or(a, b) => Formula::or(expand(a, m, env), expand(b, m, env)),
            Formula::Implies(a, b) => Formula::implies(expand(a, m, env), expand(b, m, env)),
            Formula::Iff(a, b) => Formula::iff(expand(a, m, env), expand(b, m, env)),
            Formula::Cmp(op, a, b) => {
                Formula::cmp(*op, eval_sterm(a, m, env), eval_sterm(b, m, env))
            }
            Formula::VecEq(a, b) => {
                let (VectorTerm::Var(x), VectorTerm::Var(y)) = (a, b) else {
                    unreachable!("metric language admits only point variables in equations")
                };
                if env[x] == env[y] {
                    Formula::tru()
                } else {
                    Formula::fls()
                }
            }
        }
    }
    fn eval_sterm(
        t: &ScalarTerm,
        m: &FiniteMetricModel,
        env: &BTreeMap<String, usize>,
    ) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => {
                ScalarTerm::add(eval_sterm(a, m, env), eval_sterm(b, m, env))
            }
            ScalarTerm::Neg(a) => ScalarTerm::neg(eval_sterm(a, m, env)),
            ScalarTerm::Mul(a, b) => {
                ScalarTerm::mul(eval_sterm(a, m, env), eval_sterm(b, m, env))
            }
            ScalarTerm::Dist(a, b) => {
                let (VectorTerm::Var(x), VectorTerm::Var(y)) = (&**a, &**b) else {
                    unreachable!("metric language admits only point variables under d")
                };
                ScalarTerm::constant(m.dist[env[x]][env[y]].clone())
            }
            ScalarTerm::Inner(_, _) | ScalarTerm::Norm(_) => {
                unreachable!("metric language excludes inner and norm")
            }
        }
    }
    let scalar = expand(p, m, &mut BTreeMap::new());
    Ok(rcf::decide(&scalar, budget)? == Validity::Valid)
}
