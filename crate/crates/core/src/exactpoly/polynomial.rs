use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::PolyError;

/// Exact rational coefficient. Always normalised: lowest terms, positive denominator.
pub type Rational = BigRational;

/// Build a rational from a numerator/denominator pair of machine integers.
pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Dense exponent vector of a single monomial.
///
/// Ordered graded-lexicographically: total degree first, then the exponent of
/// the first variable, then the second, and so on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn from_exponents(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with exact rational coefficients.
///
/// Terms are kept in a `BTreeMap` keyed by graded-lex monomials, so iteration,
/// printing and floating-point evaluation all follow one fixed global order.
/// Zero coefficients are never stored, which makes structural equality the
/// same as polynomial equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    pub fn from_int(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, Rational::from_integer(BigInt::from(c)))
    }

    /// The coordinate function of variable `index`.
    pub fn var(nvars: usize, index: usize) -> Result<Self, PolyError> {
        if index >= nvars {
            return Err(PolyError::VariableOutOfRange { index, nvars });
        }
        let mut p = Self::zero(nvars);
        p.terms.insert(Monomial::var(nvars, index), Rational::one());
        Ok(p)
    }

    /// Build from `(exponents, coefficient)` pairs; repeated monomials are summed.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(nvars);
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(PolyError::ExponentLength {
                    expected: nvars,
                    found: exps.len(),
                });
            }
            p.add_term(Monomial(exps), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> + '_ {
        self.terms.iter()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> Rational {
        self.terms
            .get(&Monomial(exponents.to_vec()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Monomial::degree)
    }

    /// Returns the constant value if the polynomial has no non-constant terms.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_space(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            Err(PolyError::VariableSpaceMismatch {
                left: self.nvars,
                right: other.nvars,
            })
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, exp: u32) -> Polynomial {
        let mut result = Polynomial::one(self.nvars);
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn partial_derivative(&self, var: usize) -> Result<Polynomial, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::VariableOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            out.add_term(Monomial(exps), c * Rational::from_integer(BigInt::from(e)));
        }
        Ok(out)
    }

    /// Derivative with an index the caller has already validated.
    pub fn d(&self, var: usize) -> Polynomial {
        self.partial_derivative(var)
            .expect("derivative index within variable space")
    }

    /// Re-express in a space of `nvars` variables, mapping variable `i` to `i + offset`.
    pub fn embed(&self, nvars: usize, offset: usize) -> Result<Polynomial, PolyError> {
        if offset + self.nvars > nvars {
            return Err(PolyError::EmbeddingTooSmall {
                from: self.nvars,
                to: nvars,
                offset,
            });
        }
        let mut out = Polynomial::zero(nvars);
        for (m, c) in &self.terms {
            let mut exps = vec![0; nvars];
            exps[offset..offset + self.nvars].copy_from_slice(&m.0);
            out.terms.insert(Monomial(exps), c.clone());
        }
        Ok(out)
    }

    /// Split off the trailing variables: returns, for every distinct exponent
    /// pattern in variables `keep..nvars`, the coefficient polynomial in the
    /// leading `keep` variables.
    pub fn split_trailing(&self, keep: usize) -> BTreeMap<Vec<u32>, Polynomial> {
        let mut out: BTreeMap<Vec<u32>, Polynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (head, tail) = m.0.split_at(keep);
            out.entry(tail.to_vec())
                .or_insert_with(|| Polynomial::zero(keep))
                .add_term(Monomial(head.to_vec()), c.clone());
        }
        out
    }

    /// Degrees of the terms restricted to the variables in `range`.
    pub fn partial_degrees(&self, range: std::ops::Range<usize>) -> Vec<u32> {
        let mut d: Vec<u32> = self
            .terms
            .keys()
            .map(|m| m.0[range.clone()].iter().sum())
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Floating-point evaluation. Terms are summed in graded-lex order using a
    /// per-variable power table, so the result is bit-reproducible.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::PointLength {
                expected: self.nvars,
                found: point.len(),
            });
        }
        Ok(CompiledPolynomial::new(self).eval(point))
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate_exact(&self, point: &[Rational]) -> Result<Rational, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::PointLength {
                expected: self.nvars,
                found: point.len(),
            });
        }
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(&m.0) {
                if e > 0 {
                    t *= num_traits::pow(x.clone(), e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn max_abs_coefficient(&self) -> Option<f64> {
        self.terms
            .values()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Render with the given variable names, highest graded-lex term first.
    ///
    /// The output is accepted by [`super::parse_expression`] with the same names.
    pub fn format_with(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.nvars, "one name per variable");
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            for (name, &e) in names.iter().zip(&m.0) {
                match e {
                    0 => {}
                    1 => factors.push(name.clone()),
                    _ => factors.push(format!("{name}^{e}")),
                }
            }
            if factors.is_empty() || !mag.is_one() {
                factors.insert(0, format_rational(&mag));
            }
            let _ = write!(out, "{}", factors.join("*"));
        }
        out
    }
}

fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomial spaces must agree")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("polynomial spaces must agree")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("polynomial spaces must agree")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                (&self).$method(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

/// A polynomial lowered to `f64` coefficients for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledPolynomial {
    nvars: usize,
    max_exp: Vec<u32>,
    terms: Vec<(f64, Vec<u32>)>,
}

impl CompiledPolynomial {
    pub fn new(p: &Polynomial) -> Self {
        let mut max_exp = vec![0; p.nvars];
        let terms = p
            .terms
            .iter()
            .map(|(m, c)| {
                for (mx, &e) in max_exp.iter_mut().zip(&m.0) {
                    *mx = (*mx).max(e);
                }
                (c.to_f64().unwrap_or(f64::NAN), m.0.clone())
            })
            .collect();
        CompiledPolynomial {
            nvars: p.nvars,
            max_exp,
            terms,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Evaluate; `point.len()` must equal `nvars` (checked in debug builds).
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        if self.terms.is_empty() {
            return 0.0;
        }
        let powers: Vec<Vec<f64>> = point
            .iter()
            .zip(&self.max_exp)
            .map(|(&x, &mx)| {
                let mut v = Vec::with_capacity(mx as usize + 1);
                let mut acc = 1.0;
                v.push(acc);
                for _ in 0..mx {
                    acc *= x;
                    v.push(acc);
                }
                v
            })
            .collect();
        let mut sum = 0.0;
        for (c, exps) in &self.terms {
            let mut t = *c;
            for (pw, &e) in powers.iter().zip(exps) {
                if e > 0 {
                    t *= pw[e as usize];
                }
            }
            sum += t;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i).unwrap()
    }

    #[test]
    fn additive_inverse_is_zero() {
        let a = u(2, 0);
        assert!((&a + &(-&a)).is_zero());
    }

    #[test]
    fn difference_of_squares() {
        let (a, b) = (u(2, 0), u(2, 1));
        let lhs = &(&a + &b) * &(&a - &b);
        let rhs = &a.pow(2) - &b.pow(2);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn half_of_two_u1() {
        let two_u1 = u(2, 0).scale(&rational(2, 1));
        assert_eq!(two_u1.scale(&rational(1, 2)), u(2, 0));
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let err = u(2, 0).checked_add(&u(3, 0)).unwrap_err();
        assert!(matches!(
            err,
            PolyError::VariableSpaceMismatch { left: 2, right: 3 }
        ));
    }

    #[test]
    fn derivatives() {
        let s2 = &u(2, 1) - &u(2, 0).pow(2).scale(&rational(1, 2));
        assert_eq!(s2.d(0), -u(2, 0));
        assert!(Polynomial::from_int(2, 7).d(1).is_zero());
        assert_eq!((&u(2, 0) * &u(2, 1)).d(1), u(2, 0));
        assert!(matches!(
            s2.partial_derivative(2),
            Err(PolyError::VariableOutOfRange { index: 2, nvars: 2 })
        ));
    }

    #[test]
    fn evaluation() {
        let s2 = &u(2, 1) - &u(2, 0).pow(2).scale(&rational(1, 2));
        assert_eq!(s2.evaluate(&[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(Polynomial::zero(3).evaluate(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let f = &u(4, 0) * &u(4, 3);
        assert_eq!(f.evaluate(&[1.0, 0.0, 0.0, 5.0]).unwrap(), 5.0);
        assert!(matches!(
            f.evaluate(&[1.0]),
            Err(PolyError::PointLength {
                expected: 4,
                found: 1
            })
        ));
    }

    #[test]
    fn graded_lex_order() {
        let a = Monomial(vec![2, 0]);
        let b = Monomial(vec![0, 1]);
        let c = Monomial(vec![1, 1]);
        let d = Monomial(vec![0, 2]);
        assert!(b < a);
        assert!(d < c && c < a);
    }

    #[test]
    fn formatting() {
        let names: Vec<String> = vec!["u1".into(), "u2".into()];
        let s2 = &u(2, 1) - &u(2, 0).pow(2).scale(&rational(1, 2));
        assert_eq!(s2.format_with(&names), "-1/2*u1^2 + u2");
        assert_eq!(Polynomial::zero(2).format_with(&names), "0");
        assert_eq!(Polynomial::from_int(2, -3).format_with(&names), "-3");
        assert_eq!((-u(2, 1).pow(2)).format_with(&names), "-u2^2");
    }

    #[test]
    fn split_trailing_extracts_coefficients() {
        // u1*p1*p2 + 3*p2^2 in (u1, p1, p2) with keep = 1
        let f = Polynomial::from_terms(
            3,
            vec![
                (vec![1, 1, 1], rational(1, 1)),
                (vec![0, 0, 2], rational(3, 1)),
            ],
        )
        .unwrap();
        let parts = f.split_trailing(1);
        assert_eq!(parts[&vec![1, 1]], u(1, 0));
        assert_eq!(parts[&vec![0, 2]], Polynomial::from_int(1, 3));
    }
}
