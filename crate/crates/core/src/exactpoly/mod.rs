//! Exact rational arithmetic and multivariate polynomials.
//!
//! Every symbolic identity in the crate is certified by reducing it to the
//! literal zero [`Polynomial`]. Floating-point evaluation is a separate,
//! lossy projection used only by the numeric modules.

mod parser;
mod polynomial;

pub use parser::{parse_ast, parse_expression, Expression};
pub use polynomial::{rational, CompiledPolynomial, Monomial, Polynomial, Rational};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown variable `{name}` at byte {position}")]
    UnknownVariable { name: String, position: usize },
    #[error("invalid exponent at byte {position}: {message}")]
    BadExponent { position: usize, message: String },
    #[error("polynomials live in different variable spaces ({left} vs {right})")]
    VariableSpaceMismatch { left: usize, right: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("point has {found} coordinates, expected {expected}")]
    PointLength { expected: usize, found: usize },
    #[error("exponent vector has length {found}, expected {expected}")]
    ExponentLength { expected: usize, found: usize },
    #[error("cannot embed {from} variables into {to} at offset {offset}")]
    EmbeddingTooSmall {
        from: usize,
        to: usize,
        offset: usize,
    },
}

/// Names `u1..un`.
pub fn u_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("u{i}")).collect()
}

/// Names `u1..un, p1..pn` in the canonical phase-space order.
pub fn phase_names(n: usize) -> Vec<String> {
    let mut v = u_names(n);
    v.extend((1..=n).map(|i| format!("p{i}")));
    v
}
