//! Geodesically compatible metrics for gl-regular Nijenhuis operators.
//!
//! The crate starts from an operator in second companion form, builds the
//! quadratic family `h_1..h_n`, certifies the algebraic and differential
//! identities behind its compatibility as exact polynomial identities, and
//! integrates the associated hydrodynamic-type system both through commuting
//! Hamiltonian flows and by direct finite differences.

pub mod compat;
pub mod exactpoly;
pub mod flows;
pub mod hierarchy;
pub mod metric;
pub mod operator;
pub mod pde;
pub mod problem;
