//! Axiom lists for the supported theories, as ASTs.

use crate::ast::*;

/// Supported base theories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theory {
    /// Real vector spaces.
    VS,
    /// Metric spaces.
    MS,
    /// Normed spaces (vector space axioms plus norm axioms).
    NS,
    /// Inner product spaces (vector space axioms plus inner product axioms).
    IP,
}

fn v(name: &str) -> VectorTerm {
    VectorTerm::var(name)
}

fn s(name: &str) -> ScalarTerm {
    ScalarTerm::var(name)
}

/// The eight vector space axioms: the vectors form an Abelian group acted
/// on by the scalar field.
fn vs_axioms() -> Vec<Formula> {
    let vec = |n: &str| (n.to_string(), Sort::Vector);
    let sc = |n: &str| (n.to_string(), Sort::Scalar);
    vec![
        // u + (v + w) = (u + v) + w
        Formula::forall_many(
            &[vec("u"), vec("v"), vec("w")],
            Formula::vec_eq(
                VectorTerm::add(v("u"), VectorTerm::add(v("v"), v("w"))),
                VectorTerm::add(VectorTerm::add(v("u"), v("v")), v("w")),
            ),
        ),
        // v + w = w + v
        Formula::forall_many(
            &[vec("v"), vec("w")],
            Formula::vec_eq(
                VectorTerm::add(v("v"), v("w")),
                VectorTerm::add(v("w"), v("v")),
            ),
        ),
        // 0 + v = v
        Formula::forall_many(
            &[vec("v")],
            Formula::vec_eq(VectorTerm::add(VectorTerm::Zero, v("v")), v("v")),
        ),
        // -v + v = 0
        Formula::forall_many(
            &[vec("v")],
            Formula::vec_eq(
                VectorTerm::add(VectorTerm::neg(v("v")), v("v")),
                VectorTerm::Zero,
            ),
        ),
        // a(v + w) = av + aw
        Formula::forall_many(
            &[sc("a"), vec("v"), vec("w")],
            Formula::vec_eq(
                VectorTerm::scale(s("a"), VectorTerm::add(v("v"), v("w"))),
                VectorTerm::add(
                    VectorTerm::scale(s("a"), v("v")),
                    VectorTerm::scale(s("a"), v("w")),
                ),
            ),
        ),
        // (a + b)v = av + bv
        Formula::forall_many(
            &[sc("a"), sc("b"), vec("v")],
            Formula::vec_eq(
                VectorTerm::scale(ScalarTerm::add(s("a"), s("b")), v("v")),
                VectorTerm::add(
                    VectorTerm::scale(s("a"), v("v")),
                    VectorTerm::scale(s("b"), v("v")),
                ),
            ),
        ),
        // 1v = v
        Formula::forall_many(
            &[vec("v")],
            Formula::vec_eq(VectorTerm::scale(ScalarTerm::one(), v("v")), v("v")),
        ),
        // (ab)v = a(bv)
        Formula::forall_many(
            &[sc("a"), sc("b"), vec("v")],
            Formula::vec_eq(
                VectorTerm::scale(ScalarTerm::mul(s("a"), s("b")), v("v")),
                VectorTerm::scale(s("a"), VectorTerm::scale(s("b"), v("v"))),
            ),
        ),
    ]
}

/// The three metric space axioms: positive definiteness, symmetry, and the
/// triangle inequality.
fn ms_axioms() -> Vec<Formula> {
    let vec = |n: &str| (n.to_string(), Sort::Vector);
    vec![
        // d(x,y) >= 0 /\ (d(x,y) = 0 <-> x = y)
        Formula::forall_many(
            &[vec("x"), vec("y")],
            Formula::and(
                Formula::ge(ScalarTerm::dist(v("x"), v("y")), ScalarTerm::zero()),
                Formula::iff(
                    Formula::eq(ScalarTerm::dist(v("x"), v("y")), ScalarTerm::zero()),
                    Formula::vec_eq(v("x"), v("y")),
                ),
            ),
        ),
        // d(x,y) = d(y,x)
        Formula::forall_many(
            &[vec("x"), vec("y")],
            Formula::eq(
                ScalarTerm::dist(v("x"), v("y")),
                ScalarTerm::dist(v("y"), v("x")),
            ),
        ),
        // d(x,z) <= d(x,y) + d(y,z)
        Formula::forall_many(
            &[vec("x"), vec("y"), vec("z")],
            Formula::le(
                ScalarTerm::dist(v("x"), v("z")),
                ScalarTerm::add(
                    ScalarTerm::dist(v("x"), v("y")),
                    ScalarTerm::dist(v("y"), v("z")),
                ),
            ),
        ),
    ]
}

/// The three norm axioms: positive definiteness, scaling, and the triangle
/// inequality.  The scaling axiom `norm(a*v) = abs(a) * norm(v)` is stated
/// with the absolute value expanded, as the AST has no `abs` node.
fn norm_axioms() -> Vec<Formula> {
    let vec = |n: &str| (n.to_string(), Sort::Vector);
    let sc = |n: &str| (n.to_string(), Sort::Scalar);
    vec![
        // norm(v) >= 0 /\ (norm(v) = 0 <-> v = 0)
        Formula::forall_many(
            &[vec("v")],
            Formula::and(
                Formula::ge(ScalarTerm::norm(v("v")), ScalarTerm::zero()),
                Formula::iff(
                    Formula::eq(ScalarTerm::norm(v("v")), ScalarTerm::zero()),
                    Formula::vec_eq(v("v"), VectorTerm::Zero),
                ),
            ),
        ),
        // norm(a*v) = |a| * norm(v), with |a| expanded by cases
        Formula::forall_many(
            &[sc("a"), vec("v")],
            abs_case(&s("a"), |abs_a| {
                Formula::eq(
                    ScalarTerm::norm(VectorTerm::scale(s("a"), v("v"))),
                    ScalarTerm::mul(abs_a, ScalarTerm::norm(v("v"))),
                )
            }),
        ),
        // norm(v + w) <= norm(v) + norm(w)
        Formula::forall_many(
            &[vec("v"), vec("w")],
            Formula::le(
                ScalarTerm::norm(VectorTerm::add(v("v"), v("w"))),
                ScalarTerm::add(ScalarTerm::norm(v("v")), ScalarTerm::norm(v("w"))),
            ),
        ),
    ]
}

/// The four inner product axioms: the inner product is a positive definite
/// symmetric bilinear form.
fn ip_axioms() -> Vec<Formula> {
    let vec = |n: &str| (n.to_string(), Sort::Vector);
    let sc = |n: &str| (n.to_string(), Sort::Scalar);
    vec![
        // <v,w> = <w,v>
        Formula::forall_many(
            &[vec("v"), vec("w")],
            Formula::eq(
                ScalarTerm::inner(v("v"), v("w")),
                ScalarTerm::inner(v("w"), v("v")),
            ),
        ),
        // <u + v, w> = <u,w> + <v,w>
        Formula::forall_many(
            &[vec("u"), vec("v"), vec("w")],
            Formula::eq(
                ScalarTerm::inner(VectorTerm::add(v("u"), v("v")), v("w")),
                ScalarTerm::add(
                    ScalarTerm::inner(v("u"), v("w")),
                    ScalarTerm::inner(v("v"), v("w")),
                ),
            ),
        ),
        // <a*v, w> = a * <v,w>
        Formula::forall_many(
            &[sc("a"), vec("v"), vec("w")],
            Formula::eq(
                ScalarTerm::inner(VectorTerm::scale(s("a"), v("v")), v("w")),
                ScalarTerm::mul(s("a"), ScalarTerm::inner(v("v"), v("w"))),
            ),
        ),
        // <v,v> >= 0 /\ (<v,v> = 0 <-> v = 0)
        Formula::forall_many(
            &[vec("v")],
            Formula::and(
                Formula::ge(ScalarTerm::inner(v("v"), v("v")), ScalarTerm::zero()),
                Formula::iff(
                    Formula::eq(ScalarTerm::inner(v("v"), v("v")), ScalarTerm::zero()),
                    Formula::vec_eq(v("v"), VectorTerm::Zero),
                ),
            ),
        ),
    ]
}

/// Just the four axioms governing the inner product itself (used when
/// translating inner-product sentences into the normed language).
pub fn inner_product_axioms() -> Vec<Formula> {
    ip_axioms()
}

/// The axiom list for a theory: 8 axioms for vector spaces, 3 for metric
/// spaces, vector space + 3 for normed spaces, vector space + 4 for inner
/// product spaces.
pub fn theory_axioms(theory: Theory) -> Vec<Formula> {
    match theory {
        Theory::VS => vs_axioms(),
        Theory::MS => ms_axioms(),
        Theory::NS => {
            let mut a = vs_axioms();
            a.extend(norm_axioms());
            a
        }
        Theory::IP => {
            let mut a = vs_axioms();
            a.extend(ip_axioms());
            a
        }
    }
}
