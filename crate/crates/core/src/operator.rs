//! Operator fields: companion forms, Nijenhuis torsion, the bracket `⟨L,M⟩`,
//! symmetry certification, characteristic coefficients and gl-regularity.
//!
//! Index convention: `entry(k, j)` is the component `L^k_j` (row `k`,
//! column `j`), so `L ∂_j = Σ_k L^k_j ∂_k`. All indices are zero-based.
//!
//! Sign convention: [`nijenhuis_torsion`] is the classical torsion
//! `N_L(ξ,η) = [Lξ,Lη] − L[Lξ,η] − L[ξ,Lη] + L²[ξ,η]`, and
//! [`guiding_bracket`] evaluated at `M = L` equals `−N_L`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exactpoly::{CompiledPolynomial, PolyError, Polynomial, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatorError {
    #[error("expected {expected} characteristic coefficients, got {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("operator dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operators do not commute; ⟨L,M⟩ is not a tensor")]
    NonCommuting,
    #[error("operator entries must share one variable space")]
    MixedVariableSpaces,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Square matrix of polynomials, `dim × dim`, all entries in one variable space.
///
/// For fields on the base this space has `dim` variables `u1..un`; lifted
/// copies (see [`OperatorField::lift`]) live in phase space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorField {
    dim: usize,
    nvars: usize,
    entries: Vec<Polynomial>,
}

impl OperatorField {
    pub fn from_entries(dim: usize, entries: Vec<Polynomial>) -> Result<Self, OperatorError> {
        if entries.len() != dim * dim {
            return Err(OperatorError::WrongLength {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let nvars = entries.first().map_or(dim, Polynomial::nvars);
        if entries.iter().any(|e| e.nvars() != nvars) {
            return Err(OperatorError::MixedVariableSpaces);
        }
        Ok(OperatorField {
            dim,
            nvars,
            entries,
        })
    }

    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Result<Self, OperatorError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(OperatorError::WrongLength {
                expected: dim,
                found: rows.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
            });
        }
        Self::from_entries(dim, rows.into_iter().flatten().collect())
    }

    pub fn zero(dim: usize, nvars: usize) -> Self {
        OperatorField {
            dim,
            nvars,
            entries: vec![Polynomial::zero(nvars); dim * dim],
        }
    }

    pub fn identity(dim: usize, nvars: usize) -> Self {
        Self::scalar(dim, &Polynomial::one(nvars))
    }

    /// `f · Id`.
    pub fn scalar(dim: usize, f: &Polynomial) -> Self {
        let mut m = Self::zero(dim, f.nvars());
        for i in 0..dim {
            m.entries[i * dim + i] = f.clone();
        }
        m
    }

    /// Constant matrix from integers.
    pub fn constant(rows: &[Vec<i64>], nvars: usize) -> Result<Self, OperatorError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&c| Polynomial::from_int(nvars, c)).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn entry(&self, row: usize, col: usize) -> &Polynomial {
        &self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn set(&mut self, row: usize, col: usize, value: Polynomial) {
        assert_eq!(value.nvars(), self.nvars);
        self.entries[row * self.dim + col] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Polynomial::is_zero)
    }

    fn check(&self, other: &OperatorField) -> Result<(), OperatorError> {
        if self.dim != other.dim {
            return Err(OperatorError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.nvars != other.nvars {
            return Err(OperatorError::MixedVariableSpaces);
        }
        Ok(())
    }

    pub fn add(&self, other: &OperatorField) -> Result<OperatorField, OperatorError> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &OperatorField) -> Result<OperatorField, OperatorError> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    fn zip(
        &self,
        other: &OperatorField,
        f: impl Fn(&Polynomial, &Polynomial) -> Polynomial,
    ) -> Self {
        OperatorField {
            dim: self.dim,
            nvars: self.nvars,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn mul(&self, other: &OperatorField) -> Result<OperatorField, OperatorError> {
        self.check(other)?;
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Polynomial::zero(self.nvars);
                for s in 0..n {
                    let a = self.entry(i, s);
                    let b = other.entry(s, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                out.push(acc);
            }
        }
        Ok(OperatorField {
            dim: n,
            nvars: self.nvars,
            entries: out,
        })
    }

    /// Entrywise product with a scalar function.
    pub fn scale_by(&self, f: &Polynomial) -> OperatorField {
        OperatorField {
            dim: self.dim,
            nvars: self.nvars,
            entries: self.entries.iter().map(|e| e * f).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> OperatorField {
        OperatorField {
            dim: self.dim,
            nvars: self.nvars,
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> OperatorField {
        let mut r = Self::identity(self.dim, self.nvars);
        for _ in 0..k {
            r = r.mul(self).expect("same shape");
        }
        r
    }

    pub fn trace(&self) -> Polynomial {
        (0..self.dim).fold(Polynomial::zero(self.nvars), |acc, i| {
            &acc + self.entry(i, i)
        })
    }

    pub fn transpose(&self) -> OperatorField {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] = self.entry(j, i).clone();
            }
        }
        out
    }

    /// Transpose with respect to the anti-diagonal: `(i, j) ↦ (n−1−j, n−1−i)`.
    pub fn anti_transpose(&self) -> OperatorField {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] = self.entry(n - 1 - j, n - 1 - i).clone();
            }
        }
        out
    }

    /// `LM − ML`.
    pub fn commutator(&self, other: &OperatorField) -> Result<OperatorField, OperatorError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn commutes_with(&self, other: &OperatorField) -> Result<bool, OperatorError> {
        Ok(self.commutator(other)?.is_zero())
    }

    /// Entrywise partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Result<OperatorField, OperatorError> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.partial_derivative(var))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorField {
            dim: self.dim,
            nvars: self.nvars,
            entries,
        })
    }

    /// Re-express the entries in a larger variable space (variables keep their indices).
    pub fn lift(&self, nvars: usize) -> Result<OperatorField, OperatorError> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.embed(nvars, 0))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorField {
            dim: self.dim,
            nvars,
            entries,
        })
    }

    /// Apply to a polynomial vector field: `(Lξ)^k = L^k_j ξ^j`.
    pub fn apply(&self, field: &[Polynomial]) -> Vec<Polynomial> {
        (0..self.dim)
            .map(|k| {
                (0..self.dim).fold(Polynomial::zero(self.nvars), |acc, j| {
                    &acc + &(self.entry(k, j) * &field[j])
                })
            })
            .collect()
    }

    /// Symbolic determinant by cofactor expansion along the first row.
    pub fn determinant(&self) -> Polynomial {
        fn det(m: &[Vec<&Polynomial>], nvars: usize) -> Polynomial {
            match m.len() {
                0 => Polynomial::one(nvars),
                1 => m[0][0].clone(),
                n => {
                    let mut acc = Polynomial::zero(nvars);
                    for c in 0..n {
                        if m[0][c].is_zero() {
                            continue;
                        }
                        let minor: Vec<Vec<&Polynomial>> = m[1..]
                            .iter()
                            .map(|row| {
                                row.iter()
                                    .enumerate()
                                    .filter(|(j, _)| *j != c)
                                    .map(|(_, e)| *e)
                                    .collect()
                            })
                            .collect();
                        let term = m[0][c] * &det(&minor, nvars);
                        acc = if c % 2 == 0 {
                            &acc + &term
                        } else {
                            &acc - &term
                        };
                    }
                    acc
                }
            }
        }
        let rows: Vec<Vec<&Polynomial>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j)).collect())
            .collect();
        det(&rows, self.nvars)
    }

    /// Numeric value at a point.
    pub fn eval_at(&self, point: &[f64]) -> Result<DMatrix<f64>, OperatorError> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entry(i, j).evaluate(point)?;
            }
        }
        Ok(m)
    }

    /// Value and first derivatives at a point.
    pub fn jet_at(&self, point: &[f64]) -> Result<OperatorJet, OperatorError> {
        let value = self.eval_at(point)?;
        let deriv = (0..self.nvars)
            .map(|a| self.partial(a)?.eval_at(point))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(OperatorJet { value, deriv })
    }

    /// Precompiled floating-point evaluator for repeated evaluation.
    pub fn compile(&self) -> CompiledOperator {
        CompiledOperator {
            dim: self.dim,
            entries: self.entries.iter().map(CompiledPolynomial::new).collect(),
        }
    }
}

/// Numeric value and first partial derivatives of an operator field at a point.
#[derive(Debug, Clone)]
pub struct OperatorJet {
    pub value: DMatrix<f64>,
    /// `deriv[a] = ∂L/∂u^a`.
    pub deriv: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct CompiledOperator {
    dim: usize,
    entries: Vec<CompiledPolynomial>,
}

impl CompiledOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L(point) · v`.
    pub fn apply_at(&self, point: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.entries[k * n + j].eval(point) * v[j];
            }
            out[k] = s;
        }
    }
}

/// A `(1,2)`-tensor field `T^k_{ij}`, stored in full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneTwoTensorField {
    n: usize,
    nvars: usize,
    components: Vec<Polynomial>,
}

impl OneTwoTensorField {
    fn from_fn(
        n: usize,
        nvars: usize,
        mut f: impl FnMut(usize, usize, usize) -> Polynomial,
    ) -> Self {
        let mut components = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    components.push(f(k, i, j));
                }
            }
        }
        OneTwoTensorField {
            n,
            nvars,
            components,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `T^k_{ij}`.
    pub fn component(&self, k: usize, i: usize, j: usize) -> &Polynomial {
        &self.components[(k * self.n + i) * self.n + j]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    /// `T^k_{ij} + T^k_{ji}`.
    pub fn symmetrization(&self) -> OneTwoTensorField {
        Self::from_fn(self.n, self.nvars, |k, i, j| {
            self.component(k, i, j) + self.component(k, j, i)
        })
    }

    pub fn negate(&self) -> OneTwoTensorField {
        Self::from_fn(self.n, self.nvars, |k, i, j| -self.component(k, i, j))
    }

    /// Nonzero components as `((k, i, j), value)`.
    pub fn nonzero(&self) -> Vec<((usize, usize, usize), &Polynomial)> {
        let n = self.n;
        let mut v = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let c = self.component(k, i, j);
                    if !c.is_zero() {
                        v.push(((k, i, j), c));
                    }
                }
            }
        }
        v
    }
}

/// Second companion form: ones on the superdiagonal, last row `(σ_n, …, σ_1)`.
pub fn companion_second(sigma: &[Polynomial]) -> Result<OperatorField, OperatorError> {
    let n = sigma.len();
    if n == 0 {
        return Err(OperatorError::WrongLength {
            expected: 1,
            found: 0,
        });
    }
    let nvars = sigma[0].nvars();
    if sigma.iter().any(|s| s.nvars() != nvars) {
        return Err(OperatorError::MixedVariableSpaces);
    }
    let mut m = OperatorField::zero(n, nvars);
    for i in 0..n - 1 {
        m.set(i, i + 1, Polynomial::one(nvars));
    }
    for j in 0..n {
        m.set(n - 1, j, sigma[n - 1 - j].clone());
    }
    Ok(m)
}

/// First companion form, the anti-diagonal transpose of [`companion_second`].
pub fn companion_first(sigma: &[Polynomial]) -> Result<OperatorField, OperatorError> {
    Ok(companion_second(sigma)?.anti_transpose())
}

/// `N^k_{ij} = L^s_i ∂_s L^k_j − L^s_j ∂_s L^k_i − L^k_s ∂_i L^s_j + L^k_s ∂_j L^s_i`.
pub fn nijenhuis_torsion(l: &OperatorField) -> OneTwoTensorField {
    let n = l.dim();
    let d: Vec<OperatorField> = (0..n)
        .map(|a| l.partial(a).expect("index in range"))
        .collect();
    OneTwoTensorField::from_fn(n, l.nvars(), |k, i, j| {
        let mut acc = Polynomial::zero(l.nvars());
        for s in 0..n {
            acc = &acc + &(l.entry(s, i) * d[s].entry(k, j));
            acc = &acc - &(l.entry(s, j) * d[s].entry(k, i));
            acc = &acc - &(l.entry(k, s) * d[i].entry(s, j));
            acc = &acc + &(l.entry(k, s) * d[j].entry(s, i));
        }
        acc
    })
}

/// Components of `M[L∂_i,∂_j] + L[∂_i,M∂_j] − [L∂_i,M∂_j]` on coordinate fields,
/// without checking commutativity.
///
/// `⟨L,M⟩^k_{ij} = −M^k_a ∂_j L^a_i + L^k_a ∂_i M^a_j − L^s_i ∂_s M^k_j + M^s_j ∂_s L^k_i`.
fn bracket_components(l: &OperatorField, m: &OperatorField) -> OneTwoTensorField {
    let n = l.dim();
    let dl: Vec<OperatorField> = (0..n).map(|a| l.partial(a).expect("in range")).collect();
    let dm: Vec<OperatorField> = (0..n).map(|a| m.partial(a).expect("in range")).collect();
    OneTwoTensorField::from_fn(n, l.nvars(), |k, i, j| {
        let mut acc = Polynomial::zero(l.nvars());
        for a in 0..n {
            acc = &acc - &(m.entry(k, a) * dl[j].entry(a, i));
            acc = &acc + &(l.entry(k, a) * dm[i].entry(a, j));
            acc = &acc - &(l.entry(a, i) * dm[a].entry(k, j));
            acc = &acc + &(m.entry(a, j) * dl[a].entry(k, i));
        }
        acc
    })
}

/// The tensor `⟨L,M⟩(ξ,η) = M[Lξ,η] + L[ξ,Mη] − [Lξ,Mη] − LM[ξ,η]`.
///
/// Only tensorial when `LM = ML`; non-commuting inputs are rejected.
pub fn guiding_bracket(
    l: &OperatorField,
    m: &OperatorField,
) -> Result<OneTwoTensorField, OperatorError> {
    if !l.commutes_with(m)? {
        return Err(OperatorError::NonCommuting);
    }
    if l.nvars() < l.dim() {
        return Err(OperatorError::MixedVariableSpaces);
    }
    Ok(bracket_components(l, m))
}

/// Outcome of a (strong) symmetry test.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub holds: bool,
    /// `LM − ML`.
    pub commutator: OperatorField,
    /// Symmetrised bracket for [`is_symmetry`], the full bracket for [`is_strong_symmetry`].
    pub residual: OneTwoTensorField,
}

/// `M` is a symmetry of `L`: `LM = ML` and `⟨L,M⟩(ξ,ξ) = 0`.
pub fn is_symmetry(l: &OperatorField, m: &OperatorField) -> Result<SymmetryReport, OperatorError> {
    let commutator = l.commutator(m)?;
    let residual = bracket_components(l, m).symmetrization();
    Ok(SymmetryReport {
        holds: commutator.is_zero() && residual.is_zero(),
        commutator,
        residual,
    })
}

/// `M` is a strong symmetry of `L`: `LM = ML` and `⟨L,M⟩ = 0`.
pub fn is_strong_symmetry(
    l: &OperatorField,
    m: &OperatorField,
) -> Result<SymmetryReport, OperatorError> {
    let commutator = l.commutator(m)?;
    let residual = bracket_components(l, m);
    Ok(SymmetryReport {
        holds: commutator.is_zero() && residual.is_zero(),
        commutator,
        residual,
    })
}

/// `σ_1..σ_n` with `det(λ Id − L) = λ^n − σ_1 λ^{n−1} − … − σ_n`.
///
/// Faddeev–LeVerrier (adjugate) recursion: `N_1 = L`, `a_1 = −tr N_1`,
/// `N_k = L (N_{k−1} + a_{k−1} Id)`, `a_k = −tr(N_k)/k`, and `σ_k = −a_k`.
pub fn char_coefficients(l: &OperatorField) -> Vec<Polynomial> {
    let n = l.dim();
    let nv = l.nvars();
    let mut sigma = Vec::with_capacity(n);
    let mut nk = l.clone();
    let mut a_prev = -nk.trace();
    sigma.push(-&a_prev);
    for k in 2..=n {
        let shifted = nk
            .add(&OperatorField::scalar(n, &a_prev))
            .expect("same shape");
        nk = l.mul(&shifted).expect("same shape");
        a_prev = nk
            .trace()
            .scale(&Rational::new((-1).into(), (k as i64).into()));
        sigma.push(-&a_prev);
    }
    debug_assert!(sigma.iter().all(|s| s.nvars() == nv));
    sigma
}

/// Row-scaled determinant threshold for the cyclic-vector test.
pub const GL_REGULAR_TOLERANCE: f64 = 1e-9;

/// Cyclic-vector test at a point: some `v` makes `[v, Lv, …, L^{n−1}v]` invertible.
///
/// Basis vectors are tried first, from `e_n` down to `e_1`, then `trials`
/// pseudo-random vectors from a fixed seed.
pub fn is_gl_regular_at(
    l: &OperatorField,
    point: &[f64],
    trials: usize,
) -> Result<bool, OperatorError> {
    let m = l.eval_at(point)?;
    let n = l.dim();
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .rev()
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c5f_7265_6775_6c72);
    for _ in 0..trials {
        candidates.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    Ok(candidates
        .iter()
        .any(|v| krylov_scaled_det(&m, v).abs() > GL_REGULAR_TOLERANCE))
}

fn krylov_scaled_det(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut k = DMatrix::zeros(n, n);
    let mut col = nalgebra::DVector::from_column_slice(v);
    for c in 0..n {
        k.set_column(c, &col);
        col = m * &col;
    }
    for r in 0..n {
        let norm = k.row(r).norm();
        if norm == 0.0 {
            return 0.0;
        }
        let scaled = k.row(r) / norm;
        k.set_row(r, &scaled);
    }
    k.determinant()
}
