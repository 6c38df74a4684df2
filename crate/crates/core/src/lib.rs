//! Workbench for the distributive full non-associative Lambek calculus with
//! iterative division (`\\` and `//`).
//!
//! * [`syntax`]: formulas, sequents, parser and printer, closure sets.
//! * [`semantics`]: finite ternary-relation models and satisfaction.
//! * [`search`]: model enumeration and countermodel search.
//! * [`proofs`]: derivation files and the derivation checker.
//! * [`selftest`]: randomized cross-checks of the above.

pub mod semantics;
pub mod search;
pub mod proofs;
pub mod selftest;
pub mod syntax;
