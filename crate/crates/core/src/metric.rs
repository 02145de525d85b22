//! The quadratic family `h_1..h_n`, its Gram matrices and the identities
//! that make `h_1` a contravariant metric compatible with the companion operator.
//!
//! Phase-space polynomials use `2n` variables ordered `(u1..un, p1..pn)`.
//! The canonical bracket is fixed crate-wide as
//! `{f,g} = Σ_k (∂f/∂p_k ∂g/∂u^k − ∂f/∂u^k ∂g/∂p_k)`.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::exactpoly::{phase_names, rational, PolyError, Polynomial};
use crate::operator::{companion_second, OperatorError, OperatorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("phase function must live in {expected} variables, found {found}")]
    PhaseSpace { expected: usize, found: usize },
    #[error("expected a form quadratic in p, found p-degrees {found:?}")]
    NotQuadratic { found: Vec<u32> },
    #[error("Gram matrix must be symmetric")]
    NotSymmetric,
    #[error("dimension mismatch ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Gram matrix is singular at the point (|det| = {det:e})")]
    Singular { det: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Polynomial on the cotangent chart `(u, p)` of dimension `2n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseFunction {
    n: usize,
    poly: Polynomial,
}

impl PhaseFunction {
    pub fn new(n: usize, poly: Polynomial) -> Result<Self, MetricError> {
        if poly.nvars() != 2 * n {
            return Err(MetricError::PhaseSpace {
                expected: 2 * n,
                found: poly.nvars(),
            });
        }
        Ok(PhaseFunction { n, poly })
    }

    pub fn zero(n: usize) -> Self {
        PhaseFunction {
            n,
            poly: Polynomial::zero(2 * n),
        }
    }

    /// The coordinate function `u^i` (zero-based).
    pub fn coordinate_u(n: usize, i: usize) -> Result<Self, MetricError> {
        Ok(PhaseFunction {
            n,
            poly: Polynomial::var(2 * n, i)?,
        })
    }

    /// The momentum `p_i` (zero-based).
    pub fn momentum(n: usize, i: usize) -> Result<Self, MetricError> {
        if i >= n {
            return Err(PolyError::VariableOutOfRange { index: i, nvars: n }.into());
        }
        Ok(PhaseFunction {
            n,
            poly: Polynomial::var(2 * n, n + i)?,
        })
    }

    /// Lift a function on the base into phase space.
    pub fn from_base(n: usize, f: &Polynomial) -> Result<Self, MetricError> {
        Ok(PhaseFunction {
            n,
            poly: f.embed(2 * n, 0)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    /// Homogeneous degree in `p`; `None` when inhomogeneous or zero.
    pub fn p_degree(&self) -> Option<u32> {
        match self.poly.partial_degrees(self.n..2 * self.n).as_slice() {
            [d] => Some(*d),
            _ => None,
        }
    }

    pub fn d_du(&self, k: usize) -> Polynomial {
        self.poly.d(k)
    }

    pub fn d_dp(&self, k: usize) -> Polynomial {
        self.poly.d(self.n + k)
    }

    pub fn evaluate(&self, u: &[f64], p: &[f64]) -> Result<f64, MetricError> {
        let mut z = Vec::with_capacity(2 * self.n);
        z.extend_from_slice(u);
        z.extend_from_slice(p);
        Ok(self.poly.evaluate(&z)?)
    }

    /// Canonical Poisson bracket with the crate-wide sign convention.
    pub fn bracket(&self, other: &PhaseFunction) -> Result<PhaseFunction, MetricError> {
        if self.n != other.n {
            return Err(MetricError::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let mut acc = Polynomial::zero(2 * self.n);
        for k in 0..self.n {
            acc = &acc + &(&self.d_dp(k) * &other.d_du(k));
            acc = &acc - &(&self.d_du(k) * &other.d_dp(k));
        }
        Ok(PhaseFunction {
            n: self.n,
            poly: acc,
        })
    }

    pub fn add(&self, other: &PhaseFunction) -> PhaseFunction {
        PhaseFunction {
            n: self.n,
            poly: &self.poly + &other.poly,
        }
    }

    pub fn sub(&self, other: &PhaseFunction) -> PhaseFunction {
        PhaseFunction {
            n: self.n,
            poly: &self.poly - &other.poly,
        }
    }

    pub fn mul(&self, other: &PhaseFunction) -> PhaseFunction {
        PhaseFunction {
            n: self.n,
            poly: &self.poly * &other.poly,
        }
    }

    pub fn scale(&self, c: &crate::exactpoly::Rational) -> PhaseFunction {
        PhaseFunction {
            n: self.n,
            poly: self.poly.scale(c),
        }
    }
}

impl fmt::Display for PhaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.poly.format_with(&phase_names(self.n)))
    }
}

/// Symmetric coefficient matrix `h^{αβ}(u)` of a quadratic form in `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramMatrix(OperatorField);

impl GramMatrix {
    pub fn from_field(m: OperatorField) -> Result<Self, MetricError> {
        if m != m.transpose() {
            return Err(MetricError::NotSymmetric);
        }
        Ok(GramMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn entry(&self, a: usize, b: usize) -> &Polynomial {
        self.0.entry(a, b)
    }

    pub fn as_field(&self) -> &OperatorField {
        &self.0
    }

    pub fn determinant(&self) -> Polynomial {
        self.0.determinant()
    }

    /// Replace one entry (and its mirror), for building corrupted fixtures.
    pub fn with_entry(&self, a: usize, b: usize, value: Polynomial) -> GramMatrix {
        let mut m = self.0.clone();
        m.set(a, b, value.clone());
        m.set(b, a, value);
        GramMatrix(m)
    }

    /// `Σ h^{αβ} p_α p_β` as a phase function.
    pub fn quadratic_form(&self) -> Result<PhaseFunction, MetricError> {
        let n = self.dim();
        let mut acc = Polynomial::zero(2 * n);
        for a in 0..n {
            for b in 0..n {
                let c = self.entry(a, b).embed(2 * n, 0)?;
                let pp = &Polynomial::var(2 * n, n + a)? * &Polynomial::var(2 * n, n + b)?;
                acc = &acc + &(&c * &pp);
            }
        }
        PhaseFunction::new(n, acc)
    }
}

/// `h_1..h_n` from `h_1 L^{n−1} + … + h_n Id = (p_n L^{n−1} + … + p_1 Id)^2`,
/// read off the first row of the square: entry `(1, j)` is `h_{n+1−j}`.
///
/// The first row of the square is `Σ_{i,j} p_i p_j · row_1(L^{i+j})`, so only
/// first rows of powers of `L` are formed, in the base variables.
pub fn build_h_family(sigma: &[Polynomial]) -> Result<Vec<PhaseFunction>, MetricError> {
    let l = companion_second(sigma)?;
    let n = l.dim();
    let nv = l.nvars();
    let mut rows: Vec<Vec<Polynomial>> = Vec::with_capacity(2 * n - 1);
    let mut row: Vec<Polynomial> = (0..n)
        .map(|j| {
            if j == 0 {
                Polynomial::one(nv)
            } else {
                Polynomial::zero(nv)
            }
        })
        .collect();
    for k in 0..2 * n - 1 {
        if k > 0 {
            row = (0..n)
                .map(|j| {
                    (0..n).fold(Polynomial::zero(nv), |acc, s| {
                        &acc + &(&row[s] * l.entry(s, j))
                    })
                })
                .collect();
        }
        rows.push(row.clone());
    }
    let mut h = vec![Polynomial::zero(2 * n); n];
    for i in 0..n {
        for j in i..n {
            let mult = if i == j { 1 } else { 2 };
            let pij = &Polynomial::var(2 * n, n + i)? * &Polynomial::var(2 * n, n + j)?;
            let pij = pij.scale(&rational(mult, 1));
            for (m, hm) in h.iter_mut().enumerate() {
                let c = &rows[i + j][n - 1 - m];
                if !c.is_zero() {
                    *hm = &*hm + &(&c.embed(2 * n, 0)? * &pij);
                }
            }
        }
    }
    h.into_iter().map(|f| PhaseFunction::new(n, f)).collect()
}

/// Gram matrix of a form quadratic in `p` (off-diagonal coefficients halved).
pub fn gram_matrix(h: &PhaseFunction) -> Result<GramMatrix, MetricError> {
    let n = h.n();
    let degrees = h.poly().partial_degrees(n..2 * n);
    if !(degrees.is_empty() || degrees == [2]) {
        return Err(MetricError::NotQuadratic { found: degrees });
    }
    let half = rational(1, 2);
    let mut m = OperatorField::zero(n, n);
    for (pexp, coeff) in h.poly().split_trailing(n) {
        let idx: Vec<usize> = pexp
            .iter()
            .enumerate()
            .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
            .collect();
        let (a, b) = (idx[0], idx[1]);
        if a == b {
            m.set(a, a, coeff);
        } else {
            let c = coeff.scale(&half);
            m.set(a, b, c.clone());
            m.set(b, a, c);
        }
    }
    Ok(GramMatrix(m))
}

/// Outcome of the anti-triangular pattern and determinant check.
#[derive(Debug, Clone)]
pub struct GramPatternReport {
    pub holds: bool,
    pub pattern_ok: bool,
    pub determinant: Polynomial,
}

/// Zero strictly above the anti-diagonal, ones on it, and `det = ±1` exactly.
pub fn verify_gram_pattern(gram: &GramMatrix) -> GramPatternReport {
    let n = gram.dim();
    let nv = gram.as_field().nvars();
    let one = Polynomial::one(nv);
    let mut pattern_ok = true;
    for a in 0..n {
        for b in 0..n {
            let e = gram.entry(a, b);
            // zero-based: a + b < n − 1 is above the anti-diagonal
            if a + b + 1 < n {
                pattern_ok &= e.is_zero();
            } else if a + b + 1 == n {
                pattern_ok &= *e == one;
            }
        }
    }
    let determinant = gram.determinant();
    let unit = determinant == one || determinant == -&one;
    GramPatternReport {
        holds: pattern_ok && unit,
        pattern_ok,
        determinant,
    }
}

/// Residuals of the two component families of the lifted identities
/// `L̂* dh_i = σ_i dh_1 + dh_{i+1}` (`dh_{n+1} := 0`).
#[derive(Debug, Clone)]
pub struct LiftedIdentityReport {
    pub holds: bool,
    /// `u_part[i][j] = Σ_s ∂h_i/∂u^s L^s_j − σ_i ∂h_1/∂u^j − ∂h_{i+1}/∂u^j`.
    pub u_part: Vec<Vec<Polynomial>>,
    /// `p_part[i][j] = Σ_s ∂h_i/∂p_s L^j_s − σ_i ∂h_1/∂p_j − ∂h_{i+1}/∂p_j`.
    pub p_part: Vec<Vec<Polynomial>>,
}

impl LiftedIdentityReport {
    pub fn nonzero(&self) -> impl Iterator<Item = &Polynomial> {
        self.u_part
            .iter()
            .chain(&self.p_part)
            .flatten()
            .filter(|p| !p.is_zero())
    }
}

pub fn verify_lifted_identities(
    sigma: &[Polynomial],
    h: &[PhaseFunction],
) -> Result<LiftedIdentityReport, MetricError> {
    let l = companion_second(sigma)?;
    let n = l.dim();
    if h.len() != n {
        return Err(MetricError::DimensionMismatch {
            left: n,
            right: h.len(),
        });
    }
    let lp = l.lift(2 * n)?;
    let sig: Vec<Polynomial> = sigma
        .iter()
        .map(|s| s.embed(2 * n, 0))
        .collect::<Result<_, _>>()?;
    let zero = Polynomial::zero(2 * n);
    let mut u_part = Vec::with_capacity(n);
    let mut p_part = Vec::with_capacity(n);
    for i in 0..n {
        let next = h.get(i + 1);
        let mut ur = Vec::with_capacity(n);
        let mut pr = Vec::with_capacity(n);
        for j in 0..n {
            let mut lhs_u = zero.clone();
            let mut lhs_p = zero.clone();
            for s in 0..n {
                lhs_u = &lhs_u + &(&h[i].d_du(s) * lp.entry(s, j));
                lhs_p = &lhs_p + &(&h[i].d_dp(s) * lp.entry(j, s));
            }
            let mut rhs_u = &sig[i] * &h[0].d_du(j);
            let mut rhs_p = &sig[i] * &h[0].d_dp(j);
            if let Some(hn) = next {
                rhs_u = &rhs_u + &hn.d_du(j);
                rhs_p = &rhs_p + &hn.d_dp(j);
            }
            ur.push(&lhs_u - &rhs_u);
            pr.push(&lhs_p - &rhs_p);
        }
        u_part.push(ur);
        p_part.push(pr);
    }
    let holds = u_part
        .iter()
        .chain(&p_part)
        .flatten()
        .all(Polynomial::is_zero);
    Ok(LiftedIdentityReport {
        holds,
        u_part,
        p_part,
    })
}

/// All brackets `{f_i, f_j}`, `i < j`.
#[derive(Debug, Clone)]
pub struct PairwiseBrackets {
    pub pairs: Vec<(usize, usize, PhaseFunction)>,
}

impl PairwiseBrackets {
    pub fn compute(family: &[PhaseFunction]) -> Result<Self, MetricError> {
        let mut pairs = Vec::new();
        for i in 0..family.len() {
            for j in i + 1..family.len() {
                pairs.push((i, j, family[i].bracket(&family[j])?));
            }
        }
        Ok(PairwiseBrackets { pairs })
    }

    pub fn all_zero(&self) -> bool {
        self.pairs.iter().all(|(_, _, b)| b.is_zero())
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &(usize, usize, PhaseFunction)> {
        self.pairs.iter().filter(|(_, _, b)| !b.is_zero())
    }
}

/// `{h_i, h_j}` for all pairs.
pub fn pairwise_poisson_h(h: &[PhaseFunction]) -> Result<PairwiseBrackets, MetricError> {
    PairwiseBrackets::compute(h)
}

/// Covariant metric `g = gram^{-1}` and its first derivatives at a point.
#[derive(Debug, Clone)]
pub struct CovariantMetric {
    pub g: DMatrix<f64>,
    /// `dg[a] = ∂g/∂u^a`.
    pub dg: Vec<DMatrix<f64>>,
}

/// Minimum `|det(gram)|` accepted by [`covariant_at`].
pub const SINGULAR_GRAM_TOLERANCE: f64 = 1e-12;

/// `g = gram(point)^{-1}` and `∂g/∂u^a = −g (∂gram/∂u^a) g`.
pub fn covariant_at(gram: &GramMatrix, point: &[f64]) -> Result<CovariantMetric, MetricError> {
    let jet = gram.as_field().jet_at(point)?;
    let det = jet.value.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_GRAM_TOLERANCE {
        return Err(MetricError::Singular { det });
    }
    let g = jet
        .value
        .clone()
        .try_inverse()
        .ok_or(MetricError::Singular { det })?;
    let dg = jet.deriv.iter().map(|d| -(&g * d * &g)).collect();
    Ok(CovariantMetric { g, dg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactpoly::{parse_expression, u_names};

    fn sigma(exprs: &[&str]) -> Vec<Polynomial> {
        let names = u_names(exprs.len());
        exprs
            .iter()
            .map(|e| parse_expression(e, &names).unwrap())
            .collect()
    }

    fn phase(n: usize, e: &str) -> PhaseFunction {
        PhaseFunction::new(n, parse_expression(e, &phase_names(n)).unwrap()).unwrap()
    }

    #[test]
    fn n2_family_closed_form() {
        let h = build_h_family(&sigma(&["u1", "u2"])).unwrap();
        assert_eq!(h[0], phase(2, "2*p1*p2 + u1*p2^2"));
        assert_eq!(h[1], phase(2, "p1^2 + u2*p2^2"));
        assert!(h.iter().all(|f| f.p_degree() == Some(2)));
    }

    #[test]
    fn n1_family() {
        let h = build_h_family(&sigma(&["u1"])).unwrap();
        assert_eq!(h, vec![phase(1, "p1^2")]);
    }

    #[test]
    fn gram_shapes() {
        let s = sigma(&["u1", "u2"]);
        let g = gram_matrix(&build_h_family(&s).unwrap()[0]).unwrap();
        assert!(g.entry(0, 0).is_zero());
        assert_eq!(g.entry(0, 1), &Polynomial::one(2));
        assert_eq!(g.entry(1, 1), &s[0]);

        let s3 = sigma(&["u1", "u2", "u3"]);
        let g3 = gram_matrix(&build_h_family(&s3).unwrap()[0]).unwrap();
        let s1 = &s3[0];
        assert_eq!(g3.entry(1, 1), &Polynomial::one(3));
        assert_eq!(g3.entry(1, 2), s1);
        assert_eq!(g3.entry(2, 2), &(&s1.pow(2) + &s3[1]));
        assert!(verify_gram_pattern(&g3).holds);
    }

    #[test]
    fn gram_rejects_non_quadratic() {
        assert!(matches!(
            gram_matrix(&phase(2, "p1^2 + p2")),
            Err(MetricError::NotQuadratic { .. })
        ));
    }

    #[test]
    fn gram_pattern_determinant_and_corruption() {
        let g = gram_matrix(&build_h_family(&sigma(&["u1", "u2"])).unwrap()[0]).unwrap();
        let r = verify_gram_pattern(&g);
        assert!(r.holds);
        assert_eq!(r.determinant, Polynomial::from_int(2, -1));
        let bad = g.with_entry(0, 1, Polynomial::zero(2));
        assert!(!verify_gram_pattern(&bad).holds);
    }

    #[test]
    fn lifted_identities_and_brackets_on_fixtures() {
        let e2 = sigma(&["u1", "u2 - 1/2*u1^2"]);
        let h = build_h_family(&e2).unwrap();
        assert!(verify_lifted_identities(&e2, &h).unwrap().holds);
        assert!(pairwise_poisson_h(&h).unwrap().all_zero());

        let e0 = sigma(&["2", "-3"]);
        let h0 = build_h_family(&e0).unwrap();
        assert!(verify_lifted_identities(&e0, &h0).unwrap().holds);
        assert!(pairwise_poisson_h(&h0).unwrap().all_zero());

        let x2 = sigma(&["u1", "u2"]);
        let hx = build_h_family(&x2).unwrap();
        let r = verify_lifted_identities(&x2, &hx).unwrap();
        assert!(!r.holds);
        assert!(r.nonzero().count() > 0);
    }

    #[test]
    fn self_bracket_vanishes() {
        let h = build_h_family(&sigma(&["u1", "u2"])).unwrap();
        for f in &h {
            assert!(f.bracket(f).unwrap().is_zero());
        }
    }

    #[test]
    fn covariant_metric_values() {
        let g = gram_matrix(&build_h_family(&sigma(&["u1", "u2 - 1/2*u1^2"])).unwrap()[0]).unwrap();
        let c = covariant_at(&g, &[0.0, 0.0]).unwrap();
        assert_eq!(c.g, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(
            c.dg[0],
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(c.dg[1], DMatrix::zeros(2, 2));
        let c1 = covariant_at(&g, &[1.0, 5.0]).unwrap();
        assert_eq!(c1.g, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn singular_gram_is_an_error() {
        let m = OperatorField::zero(2, 2);
        let g = GramMatrix::from_field(m).unwrap();
        assert!(matches!(
            covariant_at(&g, &[0.0, 0.0]),
            Err(MetricError::Singular { .. })
        ));
    }
}
