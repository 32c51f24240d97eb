//! Independent evaluator for quantifier-free two-sorted formulas over a
//! concrete rational coordinate space: vectors are tuples of rationals,
//! the inner product is the standard dot product, the norm is not
//! interpreted (evaluation fails on it).  Used as an oracle against the
//! engine's symbolic transformations.

use eag_core::{Formula, Rat, RelOp, ScalarTerm, VectorTerm};
use num_traits::Zero;
use std::collections::BTreeMap;

/// A concrete interpretation: a fixed ambient dimension, scalar values,
/// and vector values (each of length `dim`).
pub struct VecEnv {
    pub dim: usize,
    pub scalars: BTreeMap<String, Rat>,
    pub vectors: BTreeMap<String, Vec<Rat>>,
}

pub fn eval_vterm(t: &VectorTerm, env: &VecEnv) -> Vec<Rat> {
    match t {
        VectorTerm::Zero => vec![Rat::zero(); env.dim],
        VectorTerm::Var(v) => env.vectors.get(v).unwrap_or_else(|| panic!("vector {v}")).clone(),
        VectorTerm::Add(a, b) => {
            let x = eval_vterm(a, env);
            let y = eval_vterm(b, env);
            x.into_iter().zip(y).map(|(p, q)| p + q).collect()
        }
        VectorTerm::Neg(a) => eval_vterm(a, env).into_iter().map(|p| -p).collect(),
        VectorTerm::Scale(s, a) => {
            let c = eval_sterm(s, env);
            eval_vterm(a, env).into_iter().map(|p| &c * p).collect()
        }
    }
}

pub fn eval_sterm(t: &ScalarTerm, env: &VecEnv) -> Rat {
    match t {
        ScalarTerm::Rat(q) => q.clone(),
        ScalarTerm::Var(x) => env.scalars.get(x).unwrap_or_else(|| panic!("scalar {x}")).clone(),
        ScalarTerm::Add(a, b) => eval_sterm(a, env) + eval_sterm(b, env),
        ScalarTerm::Neg(a) => -eval_sterm(a, env),
        ScalarTerm::Mul(a, b) => eval_sterm(a, env) * eval_sterm(b, env),
        ScalarTerm::Inner(a, b) => {
            let x = eval_vterm(a, env);
            let y = eval_vterm(b, env);
            x.into_iter().zip(y).fold(Rat::zero(), |acc, (p, q)| acc + p * q)
        }
        ScalarTerm::Norm(_) | ScalarTerm::Dist(_, _) => {
            panic!("norm/dist not interpreted by the coordinate evaluator")
        }
    }
}

pub fn eval_qf(f: &Formula, env: &VecEnv) -> bool {
    match f {
        Formula::Cmp(op, a, b) => {
            let x = eval_sterm(a, env);
            let y = eval_sterm(b, env);
            match op {
                RelOp::Eq => x == y,
                RelOp::Lt => x < y,
                RelOp::Le => x <= y,
                RelOp::Gt => x > y,
                RelOp::Ge => x >= y,
            }
        }
        Formula::VecEq(a, b) => eval_vterm(a, env) == eval_vterm(b, env),
        Formula::Not(p) => !eval_qf(p, env),
        Formula::And(a, b) => eval_qf(a, env) && eval_qf(b, env),
        Formula::Or(a, b) => eval_qf(a, env) || eval_qf(b, env),
        Formula::Implies(a, b) => !eval_qf(a, env) || eval_qf(b, env),
        Formula::Iff(a, b) => eval_qf(a, env) == eval_qf(b, env),
        Formula::Forall(_, _, _) | Formula::Exists(_, _, _) => {
            panic!("quantified formula passed to the quantifier-free evaluator")
        }
    }
}
