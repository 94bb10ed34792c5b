//! Finite-satisfiability solver for the one-variable fragment of first-order
//! logic extended with counting terms and Presburger (threshold and modulo)
//! constraints.
//!
//! The pipeline: parse a sentence, flatten it into conjunctions of counting
//! literals, enumerate atomic 1-types, translate each flat formula into a
//! system of linear inequalities and congruences over type-count unknowns,
//! eliminate congruences, and decide feasibility over the naturals with an
//! exact rational branch-and-bound solver. Satisfiable verdicts carry an
//! explicit finite model that is re-checked by the semantic evaluator.

pub mod cli;
pub mod engine;
pub mod flatten;
pub mod formula;
pub mod ilp;
pub mod linsys;
pub mod parser;
pub mod types;

pub use formula::{
    CharacteristicVector, CountRel, CountingTerm, FiniteStructure, Formula, OneType, Signature,
};
pub use parser::{parse, render, ParseError};
