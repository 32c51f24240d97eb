//! Shared oracle implementations for integration tests.  These are
//! deliberately independent of the main engine: different algorithms,
//! different data structures.

pub mod fm;
pub mod sturm;
pub mod veval;
