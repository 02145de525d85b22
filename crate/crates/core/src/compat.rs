//! Geodesic compatibility of `(g, L)` in three equivalent forms: the
//! contravariant Benenti bracket identity (exact), the coordinate form with
//! metric derivatives (pointwise), and the Lie-derivative form on arbitrary
//! polynomial vector fields (pointwise). Also the transform `g ↦ gM`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::exactpoly::{rational, Polynomial};
use crate::metric::{gram_matrix, CovariantMetric, GramMatrix, MetricError, PhaseFunction};
use crate::operator::{companion_second, is_symmetry, OperatorError, OperatorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompatError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("transformed metric is singular at the point (|det| = {det:e})")]
    SingularTransform { det: f64 },
    #[error("M is not self-adjoint with respect to g at the point (residual {residual:e})")]
    NotSelfAdjoint { residual: f64 },
    #[error("M is not a symmetry of L")]
    NotSymmetry,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Symbolic,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    Symbolic(Polynomial),
    /// Max-abs value over the sampled points.
    Pointwise(f64),
}

/// Verdict of a compatibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatReport {
    pub mode: CheckMode,
    pub residual: Residual,
    pub verdict: bool,
}

impl CompatReport {
    pub fn symbolic(residual: Polynomial) -> Self {
        CompatReport {
            mode: CheckMode::Symbolic,
            verdict: residual.is_zero(),
            residual: Residual::Symbolic(residual),
        }
    }

    pub fn pointwise(max_abs: f64, tolerance: f64) -> Self {
        CompatReport {
            mode: CheckMode::Pointwise,
            verdict: max_abs.is_finite() && max_abs < tolerance,
            residual: Residual::Pointwise(max_abs),
        }
    }
}

/// `R^{kj} = h_1^{ks} L^j_s − h_1^{js} L^k_s`; zero iff `L` is `h_1`-self-adjoint.
pub fn self_adjoint_residual(h1: &GramMatrix, l: &OperatorField) -> OperatorField {
    let hl = h1_l_transpose(h1, l);
    hl.sub(&hl.transpose()).expect("same shape")
}

/// `(h_1 L^T)^{kj} = h_1^{ks} L^j_s`.
fn h1_l_transpose(h1: &GramMatrix, l: &OperatorField) -> OperatorField {
    h1.as_field().mul(&l.transpose()).expect("same shape")
}

/// `h_1^{ks} L^j_s − σ_1 h_1^{kj} − h_2^{kj}` for the first two members of the family.
pub fn h2_relation_residual(
    h: &[PhaseFunction],
    sigma: &[Polynomial],
) -> Result<OperatorField, CompatError> {
    let l = companion_second(sigma)?;
    let n = l.dim();
    let h1 = gram_matrix(&h[0])?;
    let h2 = match h.get(1) {
        Some(f) => gram_matrix(f)?.as_field().clone(),
        None => OperatorField::zero(n, n),
    };
    let lhs = h1_l_transpose(&h1, &l);
    let rhs = h1.as_field().scale_by(&sigma[0]).add(&h2)?;
    Ok(lhs.sub(&rhs)?)
}

/// `H = ½ h_1` and `F = h_1^{ks} L^j_s p_k p_j`.
pub fn benenti_functions(
    h: &[PhaseFunction],
    sigma: &[Polynomial],
) -> Result<(PhaseFunction, PhaseFunction), CompatError> {
    let l = companion_second(sigma)?;
    let n = l.dim();
    let h1 = gram_matrix(&h[0])?;
    let big_h = h[0].scale(&rational(1, 2));
    let f_gram = h1_l_transpose(&h1, &l);
    let mut f = Polynomial::zero(2 * n);
    for k in 0..n {
        for j in 0..n {
            let c = f_gram
                .entry(k, j)
                .embed(2 * n, 0)
                .map_err(MetricError::from)?;
            let pk = Polynomial::var(2 * n, n + k).map_err(MetricError::from)?;
            let pj = Polynomial::var(2 * n, n + j).map_err(MetricError::from)?;
            f = &f + &(&c * &(&pk * &pj));
        }
    }
    Ok((big_h, PhaseFunction::new(n, f)?))
}

/// `{H,F} − 2H (∂tr L/∂u^q) h_1^{αq} p_α` with `tr L = σ_1`.
///
/// With the crate's bracket convention this vanishes identically for a
/// compatible pair; the opposite sign does not.
pub fn benenti_residual(
    h: &[PhaseFunction],
    sigma: &[Polynomial],
) -> Result<PhaseFunction, CompatError> {
    let n = sigma.len();
    let (big_h, f) = benenti_functions(h, sigma)?;
    let lhs = big_h.bracket(&f)?;
    let h1 = gram_matrix(&h[0])?;
    let mut drift = Polynomial::zero(2 * n);
    for q in 0..n {
        let dq = sigma[0].d(q);
        if dq.is_zero() {
            continue;
        }
        for a in 0..n {
            let c = (&dq * h1.entry(a, q))
                .embed(2 * n, 0)
                .map_err(MetricError::from)?;
            let pa = Polynomial::var(2 * n, n + a).map_err(MetricError::from)?;
            drift = &drift + &(&c * &pa);
        }
    }
    let rhs = big_h
        .scale(&rational(2, 1))
        .mul(&PhaseFunction::new(n, drift)?);
    Ok(lhs.sub(&rhs))
}

/// Numeric jet of everything the coordinate form needs at one point.
struct PointData {
    n: usize,
    l: DMatrix<f64>,
    dl: Vec<DMatrix<f64>>,
    dtr: Vec<f64>,
}

impl PointData {
    fn new(l: &OperatorField, point: &[f64]) -> Result<Self, CompatError> {
        let n = l.dim();
        if point.len() != n {
            return Err(CompatError::DimensionMismatch {
                expected: n,
                found: point.len(),
            });
        }
        let jet = l.jet_at(point)?;
        let dtr = jet.deriv.iter().map(|d| d.trace()).collect();
        Ok(PointData {
            n,
            l: jet.value,
            dl: jet.deriv,
            dtr,
        })
    }
}

fn check_metric_dim(g: &CovariantMetric, n: usize) -> Result<(), CompatError> {
    if g.g.nrows() != n || g.dg.len() != n {
        return Err(CompatError::DimensionMismatch {
            expected: n,
            found: g.g.nrows(),
        });
    }
    Ok(())
}

/// Max over `(i,j,k)` of
/// `|g_{kα}∂_i L^α_j + (∂_α g_{ik} − ∂_k g_{iα}) L^α_j + (j↔k) − g_{ik}∂_j tr L − g_{ij}∂_k tr L|`.
pub fn coordinate_form_residual_at(
    g_at: &CovariantMetric,
    l: &OperatorField,
    point: &[f64],
) -> Result<f64, CompatError> {
    let d = PointData::new(l, point)?;
    check_metric_dim(g_at, d.n)?;
    let n = d.n;
    let g = &g_at.g;
    let dg = &g_at.dg;
    let half = |i: usize, j: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            s += g[(k, a)] * d.dl[i][(a, j)];
            s += (dg[a][(i, k)] - dg[k][(i, a)]) * d.l[(a, j)];
        }
        s - g[(i, k)] * d.dtr[j]
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = half(i, j, k) + half(i, k, j);
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Value and Jacobian of a polynomial vector field at a point.
struct VectorJet {
    value: Vec<f64>,
    /// `jac[c][a] = ∂_c v^a`.
    jac: Vec<Vec<f64>>,
}

impl VectorJet {
    fn new(field: &[Polynomial], point: &[f64]) -> Result<Self, CompatError> {
        let n = point.len();
        let value = field
            .iter()
            .map(|f| f.evaluate(point))
            .collect::<Result<Vec<_>, _>>()
            .map_err(MetricError::from)?;
        let mut jac = vec![vec![0.0; n]; n];
        for (c, row) in jac.iter_mut().enumerate() {
            for (a, f) in field.iter().enumerate() {
                row[a] = f
                    .partial_derivative(c)
                    .and_then(|d| d.evaluate(point))
                    .map_err(MetricError::from)?;
            }
        }
        Ok(VectorJet { value, jac })
    }

    /// `[self, other]^a = X^c ∂_c Y^a − Y^c ∂_c X^a`.
    fn bracket(&self, other: &VectorJet) -> Vec<f64> {
        let n = self.value.len();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|c| self.value[c] * other.jac[c][a] - other.value[c] * self.jac[c][a])
                    .sum()
            })
            .collect()
    }
}

fn pair(g: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += g[(a, b)] * x[a] * y[b];
        }
    }
    s
}

/// `X(g(Y, Z))` via the product rule.
fn derivative_of_pairing(g: &CovariantMetric, x: &[f64], y: &VectorJet, z: &VectorJet) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for c in 0..n {
        if x[c] == 0.0 {
            continue;
        }
        let mut dc = pair(&g.dg[c], &y.value, &z.value);
        dc += pair(&g.g, &y.jac[c], &z.value);
        dc += pair(&g.g, &y.value, &z.jac[c]);
        s += x[c] * dc;
    }
    s
}

/// `|LHS − RHS|` of the Lie-derivative form
/// `L_{Lξ} g(η,ξ) − L_ξ g(η,Lξ) − g(η,[Lξ,ξ]) + g([η,Lξ],ξ) − g([η,ξ],Lξ) = g(η,ξ) L_ξ tr L`.
pub fn lie_form_residual_at(
    g_at: &CovariantMetric,
    l: &OperatorField,
    xi: &[Polynomial],
    eta: &[Polynomial],
    point: &[f64],
) -> Result<f64, CompatError> {
    let n = l.dim();
    if xi.len() != n || eta.len() != n || point.len() != n {
        return Err(CompatError::DimensionMismatch {
            expected: n,
            found: xi.len().min(eta.len()).min(point.len()),
        });
    }
    check_metric_dim(g_at, n)?;
    let lxi_field = l.apply(xi);
    let xi_j = VectorJet::new(xi, point)?;
    let eta_j = VectorJet::new(eta, point)?;
    let lxi_j = VectorJet::new(&lxi_field, point)?;
    let g = &g_at.g;

    let term1 = derivative_of_pairing(g_at, &lxi_j.value, &eta_j, &xi_j);
    let term2 = derivative_of_pairing(g_at, &xi_j.value, &eta_j, &lxi_j);
    let term3 = pair(g, &eta_j.value, &lxi_j.bracket(&xi_j));
    let term4 = pair(g, &eta_j.bracket(&lxi_j), &xi_j.value);
    let term5 = pair(g, &eta_j.bracket(&xi_j), &lxi_j.value);
    let lhs = term1 - term2 - term3 + term4 - term5;

    let trace = l.trace();
    let mut xi_tr = 0.0;
    for c in 0..n {
        xi_tr += xi_j.value[c]
            * trace
                .partial_derivative(c)
                .and_then(|d| d.evaluate(point))
                .map_err(MetricError::from)?;
    }
    let rhs = pair(g, &eta_j.value, &xi_j.value) * xi_tr;
    Ok((lhs - rhs).abs())
}

/// `max |(gL)_{ij} − (gL)_{ji}|`: how far `L` is from `g`-self-adjoint at a point.
pub fn self_adjoint_defect(g: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    let gl = g * l;
    (&gl - gl.transpose()).amax()
}

/// Tolerance for the pointwise self-adjointness precondition of [`symmetry_metric`].
pub const SELF_ADJOINT_TOLERANCE: f64 = 1e-10;
/// Minimum `|det g̃|` accepted by [`symmetry_metric`].
pub const SINGULAR_TRANSFORM_TOLERANCE: f64 = 1e-12;

/// `g̃_{ij} = g_{is} M^s_j` and `∂_a g̃ = (∂_a g) M + g ∂_a M` at a point.
///
/// `M` must be a symmetry of `L` (exact check) and `g`-self-adjoint at the point.
pub fn symmetry_metric(
    g_at: &CovariantMetric,
    l: &OperatorField,
    m: &OperatorField,
    point: &[f64],
) -> Result<CovariantMetric, CompatError> {
    if !is_symmetry(l, m)?.holds {
        return Err(CompatError::NotSymmetry);
    }
    check_metric_dim(g_at, m.dim())?;
    let mj = m.jet_at(point)?;
    let g = &g_at.g * &mj.value;
    let scale = 1.0 + g.amax();
    let residual = (&g - g.transpose()).amax();
    if residual > SELF_ADJOINT_TOLERANCE * scale {
        return Err(CompatError::NotSelfAdjoint { residual });
    }
    let det = g.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_TRANSFORM_TOLERANCE {
        return Err(CompatError::SingularTransform { det });
    }
    let dg = g_at
        .dg
        .iter()
        .zip(&mj.deriv)
        .map(|(dga, dma)| dga * &mj.value + &g_at.g * dma)
        .collect();
    Ok(CovariantMetric { g, dg })
}

/// Max of the coordinate-form residual over the given points.
pub fn coordinate_form_sweep(
    gram: &GramMatrix,
    l: &OperatorField,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<CompatReport, CompatError> {
    let mut worst = 0.0f64;
    for p in points {
        let g = crate::metric::covariant_at(gram, p)?;
        worst = worst.max(coordinate_form_residual_at(&g, l, p)?);
    }
    Ok(CompatReport::pointwise(worst, tolerance))
}
