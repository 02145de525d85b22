//! Killing operators `A_0..A_{n−1}` of the companion operator and the
//! quadratic first integrals `F_i` they induce on the cotangent chart.

use thiserror::Error;

use crate::exactpoly::{rational, Polynomial};
use crate::metric::{GramMatrix, MetricError, PairwiseBrackets, PhaseFunction};
use crate::operator::{char_coefficients, OperatorError, OperatorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error("expected {expected} operators of size {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// `A_0 = Id`, `A_i = L·A_{i−1} − σ_i·Id` for `i = 1..n−1`, with `σ` the
/// characteristic coefficients of `L`.
pub fn killing_operators(l: &OperatorField) -> Vec<OperatorField> {
    let n = l.dim();
    let nv = l.nvars();
    let sigma = char_coefficients(l);
    let mut family = vec![OperatorField::identity(n, nv)];
    for s in sigma.iter().take(n.saturating_sub(1)) {
        let prev = family.last().expect("nonempty");
        let next = l
            .mul(prev)
            .and_then(|m| m.sub(&OperatorField::scalar(n, s)))
            .expect("same shape");
        family.push(next);
    }
    family
}

/// Coefficients of `(Σ_i λ^{n−1−i} A_i)(λ·Id − L) − χ_L(λ)·Id` from `λ^n`
/// down to `λ^0`; all zero iff the generating identity holds.
pub fn generating_identity_residuals(
    l: &OperatorField,
    family: &[OperatorField],
) -> Result<Vec<OperatorField>, HierarchyError> {
    let n = l.dim();
    if family.len() != n || family.iter().any(|a| a.dim() != n) {
        return Err(HierarchyError::DimensionMismatch {
            expected: n,
            found: family.len(),
        });
    }
    let nv = l.nvars();
    let sigma = char_coefficients(l);
    let id = OperatorField::identity(n, nv);
    let mut out = Vec::with_capacity(n + 1);
    out.push(family[0].sub(&id)?);
    for k in 1..n {
        let r = family[k]
            .sub(&family[k - 1].mul(l)?)?
            .add(&OperatorField::scalar(n, &sigma[k - 1]))?;
        out.push(r);
    }
    let last = OperatorField::scalar(n, &sigma[n - 1]).sub(&family[n - 1].mul(l)?)?;
    out.push(last);
    Ok(out)
}

/// `F_i = ½ Σ h_1^{ab} (A_i)^s_a p_s p_b`.
pub fn first_integrals(
    h1: &GramMatrix,
    family: &[OperatorField],
) -> Result<Vec<PhaseFunction>, HierarchyError> {
    let n = h1.dim();
    let half = rational(1, 2);
    family
        .iter()
        .map(|a| {
            if a.dim() != n {
                return Err(HierarchyError::DimensionMismatch {
                    expected: n,
                    found: a.dim(),
                });
            }
            // (A h_1)^{sb} = Σ_a A^s_a h_1^{ab}.
            let ah = a.mul(h1.as_field())?;
            let mut f = Polynomial::zero(2 * n);
            for s in 0..n {
                for b in 0..n {
                    let c = ah.entry(s, b);
                    if c.is_zero() {
                        continue;
                    }
                    let c = c.embed(2 * n, 0).map_err(MetricError::from)?;
                    let ps = Polynomial::var(2 * n, n + s).map_err(MetricError::from)?;
                    let pb = Polynomial::var(2 * n, n + b).map_err(MetricError::from)?;
                    f = &f + &(&c * &(&ps * &pb));
                }
            }
            Ok(PhaseFunction::new(n, f.scale(&half))?)
        })
        .collect()
}

/// Canonical bracket; errors when the phase spaces differ.
pub fn phase_poisson_bracket(
    f: &PhaseFunction,
    g: &PhaseFunction,
) -> Result<PhaseFunction, HierarchyError> {
    Ok(f.bracket(g)?)
}

/// Result of [`verify_commuting_integrals`].
#[derive(Debug, Clone)]
pub struct CommutationReport {
    pub holds: bool,
    pub brackets: PairwiseBrackets,
}

/// True iff `{F_i, F_j}` is the zero polynomial for all `i < j`.
pub fn verify_commuting_integrals(
    family: &[PhaseFunction],
) -> Result<CommutationReport, HierarchyError> {
    let brackets = PairwiseBrackets::compute(family)?;
    Ok(CommutationReport {
        holds: brackets.all_zero(),
        brackets,
    })
}
