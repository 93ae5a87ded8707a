//! Exact rational arithmetic and sparse univariate polynomials over the rationals.
//!
//! [`Rational`] is `num_rational::BigRational`, which keeps every value reduced
//! with a positive denominator after each operation. [`SparsePolynomial`] stores
//! only the nonzero coefficients, keyed by exponent.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("division by the zero polynomial")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{input}` as a rational number: {reason}")]
pub struct ParseRationalError {
    input: String,
    reason: &'static str,
}

/// Parses `num/den`, an integer, or a decimal literal such as `-1.25e-3`.
///
/// Decimal literals are converted exactly, so `0.1` becomes `1/10`.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason| ParseRationalError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty input"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err("bad numerator"))?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err("bad denominator"))?;
        if den.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(num, den));
    }

    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exp10) = match body.find(['e', 'E']) {
        Some(pos) => {
            let e = body[pos + 1..]
                .parse::<i64>()
                .map_err(|_| err("bad exponent"))?;
            (&body[..pos], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err("unexpected character"));
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num = BigInt::from_str(&digits).map_err(|_| err("bad digits"))?;
    if negative {
        num = -num;
    }
    let scale = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(num * Pow::pow(&ten, scale as u64))
    } else {
        Rational::new(num, Pow::pow(&ten, scale.unsigned_abs()))
    };
    Ok(value)
}

/// Formats a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Univariate polynomial with exact rational coefficients, stored sparsely.
///
/// No stored coefficient is ever zero, so the zero polynomial has no terms and
/// structural equality is polynomial equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparsePolynomial {
    terms: BTreeMap<u32, Rational>,
}

impl SparsePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial(c, 0)
    }

    /// The single term `c·x^exponent`.
    pub fn monomial(c: Rational, exponent: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exponent, c);
        }
        Self { terms }
    }

    /// The polynomial `x`.
    pub fn x() -> Self {
        Self::monomial(Rational::one(), 1)
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs; repeated
    /// exponents are summed.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, Rational)>,
    {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, exponent: u32, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exponent) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest exponent with a nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().copied()
    }

    pub fn leading_coefficient(&self) -> Option<&Rational> {
        self.terms.values().next_back()
    }

    pub fn coefficient(&self, exponent: u32) -> Rational {
        self.terms.get(&exponent).cloned().unwrap_or_else(Rational::zero)
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Nonzero terms in ascending exponent order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (u32, &Rational)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        if factor.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, c * factor)).collect(),
        }
    }

    /// `self^exponent` by repeated squaring; `p^0 = 1`.
    pub fn pow(&self, exponent: u32) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = exponent;
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

    pub fn derivative(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| **e > 0)
                .map(|(e, c)| (e - 1, c * Rational::from_integer(BigInt::from(*e))))
                .collect(),
        }
    }

    pub fn nth_derivative(&self, k: u32) -> Self {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    /// Euclidean division: returns `(q, r)` with `self = q·divisor + r` and
    /// `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self), PolyError> {
        let (d_deg, d_lead) = match (divisor.degree(), divisor.leading_coefficient()) {
            (Some(deg), Some(lead)) => (deg, lead),
            _ => return Err(PolyError::DivisionByZero),
        };
        let mut quotient = Self::zero();
        let mut remainder = self.clone();
        while let Some(r_deg) = remainder.degree() {
            if r_deg < d_deg {
                break;
            }
            let factor = remainder.terms[&r_deg].clone() / d_lead;
            let shift = r_deg - d_deg;
            for (e, c) in divisor.terms() {
                remainder.add_term(e + shift, -(c * &factor));
            }
            quotient.add_term(shift, factor);
        }
        Ok((quotient, remainder))
    }

    /// Exact value at `x`, by Horner's rule over the stored exponents.
    pub fn eval(&self, x: &Rational) -> Rational {
        let mut iter = self.terms.iter().rev();
        let Some((&top, lead)) = iter.next() else {
            return Rational::zero();
        };
        let mut acc = lead.clone();
        let mut current = top;
        for (&e, c) in iter {
            acc = acc * Pow::pow(x, current - e) + c;
            current = e;
        }
        if current > 0 {
            acc *= Pow::pow(x, current);
        }
        acc
    }
}

impl Add for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn add(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        let mut out = self.clone();
        for (e, c) in rhs.terms() {
            out.add_term(e, c.clone());
        }
        out
    }
}

impl Sub for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn sub(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        let mut out = self.clone();
        for (e, c) in rhs.terms() {
            out.add_term(e, -c.clone());
        }
        out
    }
}

impl Neg for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn neg(self) -> SparsePolynomial {
        SparsePolynomial {
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }
}

impl Mul for &SparsePolynomial {
    type Output = SparsePolynomial;

    fn mul(self, rhs: &SparsePolynomial) -> SparsePolynomial {
        let mut out = SparsePolynomial::zero();
        for (e1, c1) in self.terms() {
            for (e2, c2) in rhs.terms() {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($($tr:ident $method:ident),*) => {$(
        impl $tr for SparsePolynomial {
            type Output = SparsePolynomial;
            fn $method(self, rhs: SparsePolynomial) -> SparsePolynomial {
                (&self).$method(&rhs)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl fmt::Display for SparsePolynomial {
    /// Renders as `4/3·x^1 − 1/30·x^4`, ascending exponents.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms().enumerate() {
            let magnitude = format_rational(&c.abs());
            match (i, c.is_negative()) {
                (0, true) => f.write_str("−")?,
                (0, false) => {}
                (_, true) => f.write_str(" − ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if e == 0 {
                f.write_str(&magnitude)?;
            } else {
                write!(f, "{magnitude}·x^{e}")?;
            }
        }
        Ok(())
    }
}
