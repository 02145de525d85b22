//! Recursive-descent parser for polynomial expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | base ('^' uint)?
//! base   := rational | var | '(' expr ')'
//! rational := digits ('/' digits)? | digits '.' digits
//! ```
//!
//! Unary minus binds looser than `^`, so `-u1^2` is `-(u1^2)`.

use num_bigint::BigInt;
use num_traits::Zero;

use super::polynomial::{Polynomial, Rational};
use super::PolyError;

/// Parsed expression tree, before expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Var(usize),
    Literal(Rational),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, u32),
    Neg(Box<Expression>),
}

impl Expression {
    /// Expand into canonical form in a space of `nvars` variables.
    pub fn expand(&self, nvars: usize) -> Polynomial {
        match self {
            Expression::Var(i) => Polynomial::var(nvars, *i).expect("parser checked index"),
            Expression::Literal(c) => Polynomial::constant(nvars, c.clone()),
            Expression::Add(a, b) => &a.expand(nvars) + &b.expand(nvars),
            Expression::Sub(a, b) => &a.expand(nvars) - &b.expand(nvars),
            Expression::Mul(a, b) => &a.expand(nvars) * &b.expand(nvars),
            Expression::Pow(a, e) => a.expand(nvars).pow(*e),
            Expression::Neg(a) => -a.expand(nvars),
        }
    }
}

/// Parse `text` into an expression tree over the declared variable names.
pub fn parse_ast<S: AsRef<str>>(text: &str, variable_names: &[S]) -> Result<Expression, PolyError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        names: variable_names.iter().map(|s| s.as_ref()).collect(),
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

/// Parse and expand a polynomial expression.
///
/// ```
/// use nijenhuis::exactpoly::parse_expression;
/// let f = parse_expression("u1*(u1+2)", &["u1", "u2"]).unwrap();
/// assert_eq!(f, parse_expression("u1^2 + 2*u1", &["u1", "u2"]).unwrap());
/// ```
pub fn parse_expression<S: AsRef<str>>(
    text: &str,
    variable_names: &[S],
) -> Result<Polynomial, PolyError> {
    Ok(parse_ast(text, variable_names)?.expand(variable_names.len()))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: Vec<&'a str>,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> PolyError {
        PolyError::Syntax {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expression, PolyError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, PolyError> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = Expression::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expression, PolyError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expression::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.exponent()?;
            return Ok(Expression::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, PolyError> {
        let start = self.pos;
        match self.peek() {
            Some(b'-') => {
                return Err(PolyError::BadExponent {
                    position: self.pos,
                    message: "negative exponent".into(),
                })
            }
            Some(c) if c.is_ascii_digit() => {}
            _ => return Err(self.syntax("expected non-negative integer exponent")),
        }
        let digits = self.digits();
        if matches!(self.src.get(self.pos), Some(b'.') | Some(b'/')) {
            return Err(PolyError::BadExponent {
                position: start,
                message: "non-integer exponent".into(),
            });
        }
        digits.parse::<u32>().map_err(|_| PolyError::BadExponent {
            position: start,
            message: "exponent too large".into(),
        })
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits")
    }

    fn base(&mut self) -> Result<Expression, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.rational(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.variable(),
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn rational(&mut self) -> Result<Expression, PolyError> {
        let int_part = self.digits();
        let mut value = Rational::from_integer(int_part.parse::<BigInt>().expect("digits"));
        match self.src.get(self.pos) {
            Some(b'/') => {
                self.pos += 1;
                if !matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
                    return Err(self.syntax("expected denominator digits"));
                }
                let den_pos = self.pos;
                let den = self.digits().parse::<BigInt>().expect("digits");
                if den.is_zero() {
                    return Err(PolyError::Syntax {
                        position: den_pos,
                        message: "zero denominator".into(),
                    });
                }
                value /= Rational::from_integer(den);
            }
            Some(b'.') => {
                self.pos += 1;
                let frac = self.digits();
                if frac.is_empty() {
                    return Err(self.syntax("expected digits after '.'"));
                }
                let scale = num_traits::pow(BigInt::from(10), frac.len());
                let frac_val = frac.parse::<BigInt>().expect("digits");
                value += Rational::new(frac_val, scale);
            }
            _ => {}
        }
        Ok(Expression::Literal(value))
    }

    fn variable(&mut self) -> Result<Expression, PolyError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        match self.names.iter().position(|n| *n == name) {
            Some(i) => Ok(Expression::Var(i)),
            None => Err(PolyError::UnknownVariable {
                name: name.to_string(),
                position: start,
            }),
        }
    }
}
