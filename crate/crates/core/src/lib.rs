//! Resource-bounded propositional theorem proving with the matrix (connection)
//! method, Bayesian belief in the truth of a claim from partial search, and
//! expected-value-of-computation control of when to stop and act.

pub mod belief;
pub mod controller;
pub mod decision;
pub mod dimacs;
pub mod exact;
pub mod generator;
pub mod heuristics;
pub mod matrix;
pub mod profile;
pub mod search;

pub use matrix::{brute_force_sat, total_paths, Clause, Literal, Matrix, PathCount};
pub use search::{ClosureEvent, SearchState, SearchStatus};
