//! Classical and quantum consistency tooling for deformed (GUP) phase spaces.
//!
//! A model is a dimension `d`, a deformation function `f` and an antisymmetric
//! matrix `L` of phase-space functions, inducing the brackets
//!
//! ```text
//! {p_i, p_j} = 0,   {q_i, q_j} = L_ij(q, p),   {q_i, p_j} = f(q, p) δ_ij
//! ```
//!
//! The crate checks whether the associated 2-form is symplectic
//! ([`closure`]), reconstructs admissible deformation functions ([`solver`]),
//! analyses rotation generators in three dimensions ([`angular`]), verifies
//! operator Jacobi identities under momenta-left/right orderings ([`opalg`]),
//! and integrates the resulting Hamiltonian flow ([`dynamics`]).
//!
//! Point sampling runs on rayon when the `parallel` feature is enabled (the
//! default); see [`sampling::set_execution`] to force sequential evaluation.

pub mod angular;
pub mod closure;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod opalg;
pub mod poly;
pub mod report;
pub mod sampling;
pub mod solver;
pub mod structure;

pub use error::{Error, Result};
pub use expr::{parse, parse_in, Expr, PhasePoint, Scope, Symbol};
pub use structure::GupModel;
