//! Normed-space decisions: hull membership, norm-constraint feasibility
//! against a sign-splitting LP oracle, gauge axioms, the purely
//! universal procedure with explicit polyhedral counter-models, and the
//! trivial-space reduction for sentences without universal vectors.

mod common;

use common::fm::fm_decide;
use eag_core::ast::{rat, rat_int};
use eag_core::normed::{
    build_norm, decide_existential_validity, decide_universal, norm_feasible, sconv_member,
    Feasibility, NormConstraintSystem, NormCounterModel, NormedError, NormedVerdict,
    PolyhedralNorm,
};
use eag_core::rcf::{Budget, Validity};
use eag_core::transform::{prenex_parts, Quant};
use eag_core::{
    classify_fragment, parse, theory_axioms, Formula, Rat, RelOp, ScalarTerm, Shape, Sort, Theory,
    VectorTerm,
};
use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;

fn big_budget() -> Budget {
    Budget::new(u64::MAX)
}

fn s(text: &str) -> Formula {
    parse(text).expect("test sentence parses")
}

fn rv(v: &[i64]) -> Vec<Rat> {
    v.iter().map(|&n| rat_int(n)).collect()
}

// ---------------------------------------------------------------------------
// Symmetric convex hull membership
// ---------------------------------------------------------------------------

#[test]
fn hull_membership_examples() {
    let pts = vec![rv(&[1, 0]), rv(&[0, 1])];
    // (1/2, 1/2) lies on the edge between the two points: a member,
    // but on the unit circle, so not a strict member.
    assert!(sconv_member(&pts, &[rat(1, 2), rat(1, 2)], false));
    assert!(!sconv_member(&pts, &[rat(1, 2), rat(1, 2)], true));
    assert!(sconv_member(&pts, &[rat(1, 4), rat(1, 4)], true));
    // A boundary point is a member, but not strictly.
    assert!(sconv_member(&pts, &rv(&[1, 0]), false));
    assert!(!sconv_member(&pts, &rv(&[1, 0]), true));
    // Outside the span.
    assert!(!sconv_member(&[rv(&[1, 0])], &rv(&[0, 1]), false));
    // Symmetry: negations are free.
    assert!(sconv_member(&pts, &[rat(-1, 2), rat(1, 2)], false));
    // Outside the hull but inside the bounding box corner direction.
    assert!(!sconv_member(&pts, &rv(&[1, 1]), false));
    // The origin is always strictly inside.
    assert!(sconv_member(&pts, &rv(&[0, 0]), true));
}

// ---------------------------------------------------------------------------
// Feasibility: examples and the sign-splitting LP oracle
// ---------------------------------------------------------------------------

#[test]
fn feasibility_examples() {
    // Negative bound.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[1, 0]), rat_int(-1))],
        lower: vec![],
    };
    assert!(matches!(norm_feasible(&sys), Feasibility::Infeasible(_)));
    // Zero bound forces the zero vector.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[1, 0]), rat_int(0))],
        lower: vec![],
    };
    assert!(matches!(norm_feasible(&sys), Feasibility::Infeasible(_)));
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[0, 0]), rat_int(0))],
        lower: vec![],
    };
    assert_eq!(norm_feasible(&sys), Feasibility::Feasible);
    // Independent directions: the 1-norm realizes it.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[1, 0]), rat_int(1))],
        lower: vec![(rv(&[0, 1]), rat_int(1))],
    };
    assert_eq!(norm_feasible(&sys), Feasibility::Feasible);
    // The same vector bounded above by 1 and below by 2.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[1, 0]), rat_int(1))],
        lower: vec![(rv(&[1, 0]), rat_int(2))],
    };
    assert!(matches!(norm_feasible(&sys), Feasibility::Infeasible(_)));
}

fn rand_small_rat(rng: &mut StdRng) -> Rat {
    rat(rng.gen_range(-4..=4), rng.gen_range(1..=3))
}

fn rand_vec(rng: &mut StdRng, dim: usize) -> Vec<Rat> {
    (0..dim).map(|_| rand_small_rat(rng)).collect()
}

/// Independent check of the expressibility condition by explicit
/// sign-splitting: is `y = Σ c_i x_i` with `Σ |c_i| b_i < d` solvable?
/// Each orthant of the `c_i` gives a linear system, decided by the
/// Fourier–Motzkin oracle.
fn oracle_expressible(upper: &[(Vec<Rat>, Rat)], y: &[Rat], d: &Rat) -> bool {
    let n = upper.len();
    if n == 0 {
        return y.iter().all(Rat::is_zero) && *d > Rat::zero();
    }
    let cvar = |i: usize| ScalarTerm::var(format!("c{i}"));
    for mask in 0..1u32 << n {
        let sign = |i: usize| if mask >> i & 1 == 0 { 1i64 } else { -1 };
        let mut conj = Vec::new();
        for i in 0..n {
            let signed = ScalarTerm::mul(ScalarTerm::int(sign(i)), cvar(i));
            conj.push(Formula::ge(signed, ScalarTerm::zero()));
        }
        for r in 0..y.len() {
            let combo = ScalarTerm::sum(
                (0..n).map(|i| ScalarTerm::mul(ScalarTerm::constant(upper[i].0[r].clone()), cvar(i))),
            );
            conj.push(Formula::eq(combo, ScalarTerm::constant(y[r].clone())));
        }
        let weight = ScalarTerm::sum((0..n).map(|i| {
            ScalarTerm::mul(
                ScalarTerm::constant(&upper[i].1 * rat_int(sign(i))),
                cvar(i),
            )
        }));
        conj.push(Formula::lt(weight, ScalarTerm::constant(d.clone())));
        let mut f = Formula::and_all(conj);
        for i in (0..n).rev() {
            f = Formula::exists(format!("c{i}"), Sort::Scalar, f);
        }
        if fm_decide(&f) {
            return true;
        }
    }
    false
}

fn oracle_feasible(sys: &NormConstraintSystem) -> bool {
    for (x, b) in &sys.upper {
        if *b < Rat::zero() {
            return false;
        }
        if b.is_zero() && !x.iter().all(Rat::is_zero) {
            return false;
        }
    }
    let positives: Vec<(Vec<Rat>, Rat)> = sys
        .upper
        .iter()
        .filter(|(_, b)| *b > Rat::zero())
        .cloned()
        .collect();
    for (y, d) in &sys.lower {
        if *d <= Rat::zero() {
            continue;
        }
        if oracle_expressible(&positives, y, d) {
            return false;
        }
    }
    true
}

#[test]
fn feasibility_agrees_with_sign_split_lp_oracle() {
    let mut rng = StdRng::seed_from_u64(0x0f_ea_51);
    let mut feasible_seen = 0;
    let mut infeasible_seen = 0;
    for i in 0..220 {
        let dim = rng.gen_range(1..=3);
        let nu = rng.gen_range(0..=2);
        let nl = rng.gen_range(0..=(4 - nu).min(2));
        let sys = NormConstraintSystem {
            dim,
            upper: (0..nu)
                .map(|_| {
                    // Mostly non-negative bounds so condition 3 gets
                    // exercised, with occasional violations of 1 and 2.
                    let b = if rng.gen_bool(0.1) {
                        rat_int(-1)
                    } else if rng.gen_bool(0.15) {
                        rat_int(0)
                    } else {
                        rat(rng.gen_range(1..=4), rng.gen_range(1..=2))
                    };
                    (rand_vec(&mut rng, dim), b)
                })
                .collect(),
            lower: (0..nl)
                .map(|_| (rand_vec(&mut rng, dim), rand_small_rat(&mut rng)))
                .collect(),
        };
        let engine = norm_feasible(&sys) == Feasibility::Feasible;
        let oracle = oracle_feasible(&sys);
        assert_eq!(engine, oracle, "case #{i}: {sys:?}");
        if engine {
            feasible_seen += 1;
            // The constructed norm must satisfy every constraint exactly.
            let nm = build_norm(&sys).unwrap();
            for (x, b) in &sys.upper {
                assert!(nm.gauge(x) <= *b, "case #{i} upper: {sys:?}");
            }
            for (y, d) in &sys.lower {
                assert!(nm.gauge(y) >= *d, "case #{i} lower: {sys:?}");
            }
        } else {
            infeasible_seen += 1;
        }
    }
    assert!(
        feasible_seen >= 30 && infeasible_seen >= 30,
        "suite too one-sided: {feasible_seen} feasible / {infeasible_seen} infeasible"
    );
}

// ---------------------------------------------------------------------------
// Gauge
// ---------------------------------------------------------------------------

#[test]
fn gauge_examples() {
    let one_norm = PolyhedralNorm::new(
        2,
        vec![rv(&[1, 0]), rv(&[-1, 0]), rv(&[0, 1]), rv(&[0, -1])],
        rat_int(1),
    )
    .unwrap();
    assert_eq!(one_norm.gauge(&rv(&[0, 0])), rat_int(0));
    assert_eq!(one_norm.gauge(&rv(&[1, 1])), rat_int(2));
    assert_eq!(one_norm.gauge(&[rat(1, 2), rat(-3, 2)]), rat_int(2));
    assert_eq!(one_norm.gauge(&rv(&[2, 2])), rat_int(4));
    // A norm whose span misses a direction: the complement scale rules.
    let thin = PolyhedralNorm::new(2, vec![rv(&[1, 0]), rv(&[-1, 0])], rat(3, 2)).unwrap();
    assert_eq!(thin.gauge(&rv(&[1, 0])), rat_int(1));
    assert_eq!(thin.gauge(&rv(&[0, 2])), rat_int(3));
    assert_eq!(thin.gauge(&rv(&[1, 2])), rat_int(4));
}

fn rand_norm(rng: &mut StdRng) -> PolyhedralNorm {
    let dim = rng.gen_range(1..=3);
    let k = rng.gen_range(0..=3);
    let mut vertices = Vec::new();
    for _ in 0..k {
        let v = rand_vec(rng, dim);
        let nv: Vec<Rat> = v.iter().map(|c| -c).collect();
        if !vertices.contains(&v) {
            vertices.push(v);
        }
        if !vertices.contains(&nv) {
            vertices.push(nv);
        }
    }
    let scale = rat(rng.gen_range(1..=5), rng.gen_range(1..=2));
    PolyhedralNorm::new(dim, vertices, scale).unwrap()
}

#[test]
fn gauge_satisfies_the_norm_axioms() {
    let mut rng = StdRng::seed_from_u64(0x9a_06e);
    for i in 0..210 {
        let nm = rand_norm(&mut rng);
        let v = rand_vec(&mut rng, nm.dim);
        let w = rand_vec(&mut rng, nm.dim);
        let gv = nm.gauge(&v);
        let gw = nm.gauge(&w);
        // Positive definiteness.
        assert!(gv >= Rat::zero(), "case #{i}");
        assert_eq!(gv.is_zero(), v.iter().all(Rat::is_zero), "case #{i} {nm:?} {v:?}");
        // Absolute homogeneity for a rational factor.
        let q = rand_small_rat(&mut rng);
        let qv: Vec<Rat> = v.iter().map(|c| c * &q).collect();
        assert_eq!(nm.gauge(&qv), q.abs() * &gv, "case #{i} {nm:?} {v:?} {q:?}");
        // Triangle inequality.
        let sum: Vec<Rat> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        assert!(nm.gauge(&sum) <= &gv + &gw, "case #{i} {nm:?} {v:?} {w:?}");
    }
}

#[test]
fn equality_systems_are_realized_exactly() {
    // Setting the value of a single norm.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[1, 0]), rat_int(1))],
        lower: vec![(rv(&[1, 0]), rat_int(1))],
    };
    assert_eq!(norm_feasible(&sys), Feasibility::Feasible);
    assert_eq!(build_norm(&sys).unwrap().gauge(&rv(&[1, 0])), rat_int(1));
    // The separator counter-model values: unit coordinate vectors whose
    // sum has norm exactly 2, as under the 1-norm.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![
            (rv(&[1, 0]), rat_int(1)),
            (rv(&[0, 1]), rat_int(1)),
            (rv(&[1, 1]), rat_int(2)),
        ],
        lower: vec![
            (rv(&[1, 0]), rat_int(1)),
            (rv(&[0, 1]), rat_int(1)),
            (rv(&[1, 1]), rat_int(2)),
        ],
    };
    assert_eq!(norm_feasible(&sys), Feasibility::Feasible);
    let nm = build_norm(&sys).unwrap();
    assert_eq!(nm.gauge(&rv(&[1, 0])), rat_int(1));
    assert_eq!(nm.gauge(&rv(&[0, 1])), rat_int(1));
    assert_eq!(nm.gauge(&rv(&[1, 1])), rat_int(2));
    // An upper-only system leaves slack: any norm below the bounds works.
    let sys = NormConstraintSystem {
        dim: 2,
        upper: vec![(rv(&[2, 0]), rat_int(1))],
        lower: vec![],
    };
    let nm = build_norm(&sys).unwrap();
    assert!(nm.gauge(&rv(&[2, 0])) <= rat_int(1));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[test]
fn norm_serialization_round_trips() {
    let nm = PolyhedralNorm::new(
        2,
        vec![
            vec![rat(1, 2), rat_int(0)],
            vec![rat(-1, 2), rat_int(0)],
            rv(&[1, 1]),
            rv(&[-1, -1]),
        ],
        rat(7, 3),
    )
    .unwrap();
    let text = nm.serialize();
    let back = PolyhedralNorm::deserialize(&text).unwrap();
    assert_eq!(nm, back);
    assert_eq!(back.serialize(), text);
}

#[test]
fn deserialize_rejects_bad_norms() {
    // Not closed under negation.
    assert!(matches!(
        PolyhedralNorm::deserialize("dim 2\nscale 1\n1 0\n"),
        Err(NormedError::BadNorm(_))
    ));
    // Non-positive scale.
    assert!(matches!(
        PolyhedralNorm::deserialize("dim 1\nscale 0\n"),
        Err(NormedError::BadNorm(_))
    ));
    // Wrong vertex arity.
    assert!(matches!(
        PolyhedralNorm::deserialize("dim 2\nscale 1\n1\n-1\n"),
        Err(NormedError::BadNorm(_))
    ));
    // Missing header.
    assert!(matches!(
        PolyhedralNorm::deserialize("scale 1\n"),
        Err(NormedError::BadNorm(_))
    ));
}

// ---------------------------------------------------------------------------
// The purely universal decision procedure
// ---------------------------------------------------------------------------

#[test]
fn universal_norm_axioms_are_valid() {
    let b = big_budget();
    for ax in theory_axioms(Theory::NS) {
        if classify_fragment(&ax).shape == Shape::PurelyUniversal {
            assert_eq!(
                decide_universal(&ax, &b, 8).unwrap(),
                NormedVerdict::Valid,
                "axiom: {}",
                eag_core::print(&ax)
            );
        }
    }
}

#[test]
fn simple_universal_truths_and_falsehoods() {
    let b = big_budget();
    assert_eq!(
        decide_universal(&s("forall v:V. norm(v) >= 0"), &b, 8).unwrap(),
        NormedVerdict::Valid
    );
    assert_eq!(
        decide_universal(&s("forall v:V, w:V. norm(v + w) <= norm(v) + norm(w)"), &b, 8).unwrap(),
        NormedVerdict::Valid
    );
    // False: norms are not always 0.
    assert!(matches!(
        decide_universal(&s("forall v:V. norm(v) = 0"), &b, 8).unwrap(),
        NormedVerdict::Invalid(_)
    ));
    // False already in the scalar part.
    assert!(matches!(
        decide_universal(&s("forall x:R. x >= 0"), &b, 8).unwrap(),
        NormedVerdict::Invalid(_)
    ));
}

/// Direct evaluation of a quantifier-free normed formula under a
/// counter-model: vectors coordinatewise, norms through the gauge.
fn eval_vec(t: &VectorTerm, m: &NormCounterModel) -> Vec<Rat> {
    let dim = m.norm.dim;
    match t {
        VectorTerm::Var(x) => m.vectors[x].clone(),
        VectorTerm::Zero => vec![Rat::zero(); dim],
        VectorTerm::Add(a, b) => eval_vec(a, m)
            .iter()
            .zip(eval_vec(b, m).iter())
            .map(|(p, q)| p + q)
            .collect(),
        VectorTerm::Neg(a) => eval_vec(a, m).iter().map(|p| -p).collect(),
        VectorTerm::Scale(s, v) => {
            let c = eval_scl(s, m);
            eval_vec(v, m).iter().map(|p| p * &c).collect()
        }
    }
}

fn eval_scl(t: &ScalarTerm, m: &NormCounterModel) -> Rat {
    match t {
        ScalarTerm::Rat(q) => q.clone(),
        ScalarTerm::Var(x) => m.scalars[x].clone(),
        ScalarTerm::Add(a, b) => eval_scl(a, m) + eval_scl(b, m),
        ScalarTerm::Neg(a) => -eval_scl(a, m),
        ScalarTerm::Mul(a, b) => eval_scl(a, m) * eval_scl(b, m),
        ScalarTerm::Norm(v) => m.norm.gauge(&eval_vec(v, m)),
        ScalarTerm::Inner(_, _) | ScalarTerm::Dist(_, _) => {
            panic!("not in the normed language")
        }
    }
}

fn eval_formula(f: &Formula, m: &NormCounterModel) -> bool {
    match f {
        Formula::Cmp(op, a, b) => op.eval(&eval_scl(a, m), &eval_scl(b, m)),
        Formula::VecEq(a, b) => eval_vec(a, m) == eval_vec(b, m),
        Formula::Not(p) => !eval_formula(p, m),
        Formula::And(a, b) => eval_formula(a, m) && eval_formula(b, m),
        Formula::Or(a, b) => eval_formula(a, m) || eval_formula(b, m),
        Formula::Implies(a, b) => !eval_formula(a, m) || eval_formula(b, m),
        Formula::Iff(a, b) => eval_formula(a, m) == eval_formula(b, m),
        Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => {
            panic!("evaluator expects a quantifier-free matrix")
        }
    }
}

#[test]
fn separator_sentence_has_a_polyhedral_counter_model() {
    let b = big_budget();
    // Two vectors of equal norm whose sum attains the triangle bound
    // need not coincide: fails under the 1-norm with the coordinate
    // unit vectors.
    let p = s("forall x:V, y:V. norm(x) = norm(y) & norm(x + y) = norm(x) + norm(y) -> x = y");
    let verdict = decide_universal(&p, &b, 8).unwrap();
    let NormedVerdict::Invalid(Some(model)) = verdict else {
        panic!("expected an explicit counter-model, got {verdict:?}");
    };
    // The witness must genuinely falsify the matrix under direct
    // gauge evaluation.
    let (prefix, matrix) = prenex_parts(&p);
    assert!(prefix.iter().all(|(q, _, _)| *q == Quant::Forall));
    assert!(
        !eval_formula(&matrix, &model),
        "counter-model does not falsify the sentence: {model:?}"
    );
    // Spot-check the defining equalities of the counter-example.
    let x = &model.vectors["x"];
    let y = &model.vectors["y"];
    assert_ne!(x, y);
    let sum: Vec<Rat> = x.iter().zip(y.iter()).map(|(a, b)| a + b).collect();
    assert_eq!(model.norm.gauge(x), model.norm.gauge(y));
    assert_eq!(
        model.norm.gauge(&sum),
        model.norm.gauge(x) + model.norm.gauge(y)
    );
}

#[test]
fn universal_counter_models_are_sound() {
    let b = big_budget();
    for text in [
        "forall v:V. norm(v) = 0",
        "forall v:V. norm(v + v) = norm(v)",
        "forall x:R. x >= 0",
        "forall v:V, w:V. norm(v + w) = norm(v) + norm(w)",
    ] {
        let p = s(text);
        match decide_universal(&p, &b, 8).unwrap() {
            NormedVerdict::Invalid(Some(model)) => {
                let (_, matrix) = prenex_parts(&p);
                assert!(!eval_formula(&matrix, &model), "{text}: {model:?}");
            }
            NormedVerdict::Invalid(None) => {
                panic!("{text}: expected a rational counter-model")
            }
            NormedVerdict::Valid => panic!("{text}: expected Invalid"),
        }
    }
}

#[test]
fn universal_rejects_other_fragments_and_languages() {
    let b = big_budget();
    assert!(matches!(
        decide_universal(&s("exists v:V. norm(v) = 0"), &b, 8),
        Err(NormedError::WrongFragment(_))
    ));
    assert!(matches!(
        decide_universal(&s("forall v:V. inner(v, v) >= 0"), &b, 8),
        Err(NormedError::NotNormedLanguage)
    ));
    assert!(matches!(
        decide_universal(&s("forall a:V, b:V. d(a, b) >= 0"), &b, 8),
        Err(NormedError::NotNormedLanguage)
    ));
}

// ---------------------------------------------------------------------------
// Sentences without universal vector quantifiers
// ---------------------------------------------------------------------------

#[test]
fn existential_examples() {
    let b = big_budget();
    assert_eq!(
        decide_existential_validity(&s("exists v:V. norm(v) = 0"), &b).unwrap(),
        Validity::Valid
    );
    // Fails in the trivial space.
    assert_eq!(
        decide_existential_validity(&s("exists v:V. norm(v) = 1"), &b).unwrap(),
        Validity::Invalid
    );
    assert_eq!(
        decide_existential_validity(&s("exists x:R. x > 0"), &b).unwrap(),
        Validity::Valid
    );
    // Scalar universals are allowed; vector universals are not.
    assert_eq!(
        decide_existential_validity(
            &s("forall x:R. exists v:V, y:R. y > x & norm(v) <= y"),
            &b
        )
        .unwrap(),
        Validity::Valid
    );
    assert!(matches!(
        decide_existential_validity(&s("forall v:V. norm(v) >= 0"), &b),
        Err(NormedError::WrongFragment(_))
    ));
}

/// Independent trivial-space evaluation: drop vector quantifiers, send
/// norms to 0 and vector equations to truth, and decide the linear
/// scalar remainder by Fourier–Motzkin.
fn oracle_trivial_space(p: &Formula) -> bool {
    fn strip(f: &Formula) -> Formula {
        match f {
            Formula::Cmp(op, a, b) => Formula::cmp(*op, zap(a), zap(b)),
            Formula::VecEq(_, _) => Formula::ge(ScalarTerm::zero(), ScalarTerm::zero()),
            Formula::Not(p) => Formula::not(strip(p)),
            Formula::And(a, b) => Formula::and(strip(a), strip(b)),
            Formula::Or(a, b) => Formula::or(strip(a), strip(b)),
            Formula::Implies(a, b) => Formula::implies(strip(a), strip(b)),
            Formula::Iff(a, b) => Formula::iff(strip(a), strip(b)),
            Formula::Forall(x, Sort::Scalar, p) => {
                Formula::forall(x.clone(), Sort::Scalar, strip(p))
            }
            Formula::Exists(x, Sort::Scalar, p) => {
                Formula::exists(x.clone(), Sort::Scalar, strip(p))
            }
            Formula::Forall(_, Sort::Vector, p) | Formula::Exists(_, Sort::Vector, p) => strip(p),
        }
    }
    fn zap(t: &ScalarTerm) -> ScalarTerm {
        match t {
            ScalarTerm::Rat(_) | ScalarTerm::Var(_) => t.clone(),
            ScalarTerm::Add(a, b) => ScalarTerm::add(zap(a), zap(b)),
            ScalarTerm::Neg(a) => ScalarTerm::neg(zap(a)),
            ScalarTerm::Mul(a, b) => ScalarTerm::mul(zap(a), zap(b)),
            ScalarTerm::Norm(_) => ScalarTerm::zero(),
            ScalarTerm::Inner(_, _) | ScalarTerm::Dist(_, _) => {
                panic!("not in the normed language")
            }
        }
    }
    fm_decide(&strip(p))
}

fn rand_linear_scalar(rng: &mut StdRng, scalars: &[String], norms: &[ScalarTerm]) -> ScalarTerm {
    let mut t = ScalarTerm::constant(rand_small_rat(rng));
    for x in scalars {
        if rng.gen_bool(0.6) {
            t = ScalarTerm::add(
                t,
                ScalarTerm::mul(ScalarTerm::constant(rand_small_rat(rng)), ScalarTerm::var(x)),
            );
        }
    }
    for nrm in norms {
        if rng.gen_bool(0.4) {
            t = ScalarTerm::add(
                t,
                ScalarTerm::mul(ScalarTerm::constant(rand_small_rat(rng)), nrm.clone()),
            );
        }
    }
    t
}

fn rand_no_universal_vector_sentence(rng: &mut StdRng) -> Formula {
    // Prefix: a mix of scalar quantifiers and existential vectors.
    let mut binders: Vec<(Quant, String, Sort)> = Vec::new();
    let n_vec = rng.gen_range(0..=2);
    let n_scl = rng.gen_range(0..=2);
    for i in 0..n_vec {
        binders.push((Quant::Exists, format!("v{i}"), Sort::Vector));
    }
    for i in 0..n_scl {
        let q = if rng.gen_bool(0.5) {
            Quant::Forall
        } else {
            Quant::Exists
        };
        binders.push((q, format!("x{i}"), Sort::Scalar));
    }
    use rand::seq::SliceRandom;
    binders.shuffle(rng);
    let scalars: Vec<String> = binders
        .iter()
        .filter(|(_, _, s)| *s == Sort::Scalar)
        .map(|(_, x, _)| x.clone())
        .collect();
    let vectors: Vec<String> = binders
        .iter()
        .filter(|(_, _, s)| *s == Sort::Vector)
        .map(|(_, x, _)| x.clone())
        .collect();
    // Norm terms over the available vectors (or the zero vector).
    let mut norm_terms: Vec<ScalarTerm> = vec![ScalarTerm::norm(VectorTerm::Zero)];
    for x in &vectors {
        norm_terms.push(ScalarTerm::norm(VectorTerm::var(x.clone())));
        if rng.gen_bool(0.3) {
            norm_terms.push(ScalarTerm::norm(VectorTerm::add(
                VectorTerm::var(x.clone()),
                VectorTerm::var(vectors[rng.gen_range(0..vectors.len())].clone()),
            )));
        }
    }
    let n_atoms = rng.gen_range(1..=3);
    let mut f = Formula::tru();
    for i in 0..n_atoms {
        let op = match rng.gen_range(0..4) {
            0 => RelOp::Eq,
            1 => RelOp::Le,
            2 => RelOp::Lt,
            _ => RelOp::Ge,
        };
        let atom = Formula::cmp(
            op,
            rand_linear_scalar(rng, &scalars, &norm_terms),
            rand_linear_scalar(rng, &scalars, &norm_terms),
        );
        f = if i == 0 {
            atom
        } else if rng.gen_bool(0.5) {
            Formula::and(f, atom)
        } else {
            Formula::or(f, atom)
        };
    }
    for (q, x, srt) in binders.into_iter().rev() {
        f = match q {
            Quant::Forall => Formula::forall(x, srt, f),
            Quant::Exists => Formula::exists(x, srt, f),
        };
    }
    f
}

#[test]
fn existential_random_agrees_with_trivial_space_oracle() {
    let b = big_budget();
    let mut rng = StdRng::seed_from_u64(0x7113_0a11);
    let mut valid_seen = 0;
    for i in 0..50 {
        let p = rand_no_universal_vector_sentence(&mut rng);
        let engine = decide_existential_validity(&p, &b).unwrap();
        let oracle = if oracle_trivial_space(&p) {
            Validity::Valid
        } else {
            Validity::Invalid
        };
        assert_eq!(engine, oracle, "case #{i}: {}", eag_core::print(&p));
        if engine == Validity::Valid {
            valid_seen += 1;
        }
    }
    assert!(valid_seen >= 5, "suite too one-sided: {valid_seen}/50 valid");
}
