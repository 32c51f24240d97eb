//! eag-core: decision procedures for two-sorted first-order theories of
//! real vector spaces, inner product / Hilbert spaces, metric spaces, and
//! normed spaces.
//!
//! The crate is organized around a shared two-sorted AST ([`ast`]):
//!
//! * [`parser`] / [`printer`] — concrete syntax.
//! * [`transform`] — prenexing, fragment classification, additivity,
//!   multiplication unnesting.
//! * [`axioms`] — axiom lists for the supported theories.
//! * [`rcf`] — decision procedure and quantifier elimination for the
//!   first-order theory of the real ordered field (the backend all other
//!   decisions reduce to).
//! * [`ip`] — full decision for inner product / Hilbert space theories
//!   with dimension constraints.
//! * [`metric`] — validity for the forall-exists point fragment over
//!   metric spaces, with finite counter-model extraction.
//! * [`normed`] — purely universal and purely existential normed-space
//!   sentences, with explicit polyhedral counter-norms.
//! * [`arith`] — generators for the arithmetic reduction formulas that
//!   delimit the undecidable fragments.

pub mod arith;
pub mod ast;
pub mod axioms;
pub mod ip;
pub mod metric;
pub mod normed;
pub mod parser;
pub mod printer;
pub mod rcf;
pub mod transform;

pub use ast::{Formula, Rat, RelOp, ScalarTerm, Sort, VectorTerm};
pub use axioms::{theory_axioms, Theory};
pub use parser::{parse, ParseError};
pub use printer::print;
pub use transform::{classify_fragment, prenex, FragmentClass, Shape};
