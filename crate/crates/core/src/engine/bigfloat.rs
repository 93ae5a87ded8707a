//! Binary floating point with an explicit working precision.
//!
//! A value is `±mantissa · 2^exponent` where the mantissa is an arbitrary-size
//! unsigned integer kept odd (or zero), so every value has exactly one
//! representation. Every arithmetic operation takes the precision of its
//! result in bits and rounds to nearest, ties to even, from the exact result.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::exactpoly::Rational;

/// Smallest working precision accepted by any operation.
pub const MIN_PRECISION: u32 = 64;

/// `log2(10)`
pub const LOG2_10: f64 = std::f64::consts::LOG2_10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BigFloatError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse `{0}` as a decimal number")]
    Parse(String),
    #[error("value is not finite")]
    NonFinite,
}

/// Bits needed to hold `digits` significant decimal digits.
pub fn bits_for_digits(digits: u64) -> u32 {
    let bits = (digits as f64 * LOG2_10).ceil() as u64;
    bits.clamp(u64::from(MIN_PRECISION), u64::from(u32::MAX)) as u32
}

/// Decimal digits resolved by `bits` of binary precision.
pub fn digits_for_bits(bits: u32) -> u64 {
    (f64::from(bits) / LOG2_10).floor() as u64
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BigFloat {
    negative: bool,
    mantissa: BigUint,
    exponent: i64,
    precision: u32,
}

fn pow10(k: u64) -> BigUint {
    Pow::pow(&BigUint::from(10u32), k)
}

fn top_bit(mag: &BigUint, exponent: i64) -> i64 {
    mag.bits() as i64 - 1 + exponent
}

/// Rounds `value · 2^exponent` to `precision` bits. `sticky` marks a nonzero
/// tail strictly below the last bit of `mag`; callers only set it when `mag`
/// already carries at least two bits beyond the target precision.
fn round_mag(mag: BigUint, exponent: i64, precision: u32, sticky: bool) -> (BigUint, i64) {
    let bits = mag.bits();
    let precision = u64::from(precision);
    if bits <= precision {
        debug_assert!(!sticky, "sticky bit with too few guard bits");
        return (mag, exponent);
    }
    let shift = bits - precision;
    let half = mag.bit(shift - 1);
    let below_half = sticky || mag.trailing_zeros().is_some_and(|tz| tz < shift - 1);
    let mut q = mag >> shift;
    if half && (below_half || q.bit(0)) {
        q += 1u32;
    }
    (q, exponent + shift as i64)
}

impl BigFloat {
    fn build(negative: bool, mag: BigUint, exponent: i64, precision: u32, sticky: bool) -> Self {
        let precision = precision.max(MIN_PRECISION);
        let (mag, exponent) = round_mag(mag, exponent, precision, sticky);
        if mag.is_zero() {
            return Self::zero(precision);
        }
        let tz = mag.trailing_zeros().unwrap_or(0);
        Self {
            negative,
            mantissa: mag >> tz,
            exponent: exponent + tz as i64,
            precision,
        }
    }

    pub fn zero(precision: u32) -> Self {
        Self {
            negative: false,
            mantissa: BigUint::zero(),
            exponent: 0,
            precision: precision.max(MIN_PRECISION),
        }
    }

    pub fn one(precision: u32) -> Self {
        Self::from_bigint(&BigInt::one(), precision)
    }

    pub fn from_bigint(value: &BigInt, precision: u32) -> Self {
        Self::build(value.is_negative(), value.magnitude().clone(), 0, precision, false)
    }

    pub fn from_i64(value: i64, precision: u32) -> Self {
        Self::from_bigint(&BigInt::from(value), precision)
    }

    /// Exact conversion of a finite `f64` (53 bits fit in any precision).
    pub fn from_f64(value: f64) -> Result<Self, BigFloatError> {
        if !value.is_finite() {
            return Err(BigFloatError::NonFinite);
        }
        if value == 0.0 {
            return Ok(Self::zero(MIN_PRECISION));
        }
        let bits = value.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let fraction = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), biased - 1075)
        };
        Ok(Self::build(negative, BigUint::from(mantissa), exponent, MIN_PRECISION, false))
    }

    /// Correctly rounded `numerator / denominator`.
    pub fn from_ratio(
        numerator: &BigInt,
        denominator: &BigInt,
        precision: u32,
    ) -> Result<Self, BigFloatError> {
        if denominator.is_zero() {
            return Err(BigFloatError::DivisionByZero);
        }
        let negative = numerator.is_negative() != denominator.is_negative();
        Ok(Self::divide_magnitudes(
            negative,
            numerator.magnitude(),
            0,
            denominator.magnitude(),
            0,
            precision,
        ))
    }

    pub fn from_rational(value: &Rational, precision: u32) -> Self {
        Self::from_ratio(value.numer(), value.denom(), precision)
            .expect("rational denominators are positive")
    }

    /// Parses a decimal literal (`-1.25`, `3e-7`, `4.80e-0028`, `10/3`) exactly,
    /// then rounds once to `precision`.
    pub fn parse(input: &str, precision: u32) -> Result<Self, BigFloatError> {
        let r = crate::exactpoly::parse_rational(input)
            .map_err(|_| BigFloatError::Parse(input.to_string()))?;
        Ok(Self::from_rational(&r, precision))
    }

    fn divide_magnitudes(
        negative: bool,
        num: &BigUint,
        num_exp: i64,
        den: &BigUint,
        den_exp: i64,
        precision: u32,
    ) -> Self {
        let precision = precision.max(MIN_PRECISION);
        if num.is_zero() {
            return Self::zero(precision);
        }
        // quotient needs precision + 2 bits so the sticky bit cannot fake a tie
        let want = i64::from(precision) + 2;
        let shift = (want + den.bits() as i64 - num.bits() as i64).max(0);
        let (q, r) = (num << shift as u64).div_rem(den);
        let sticky = !r.is_zero();
        let (q, exponent) = if sticky {
            ((q << 1u32) | BigUint::one(), num_exp - den_exp - shift - 1)
        } else {
            (q, num_exp - den_exp - shift)
        };
        Self::build(negative, q, exponent, precision, sticky)
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Same value rounded to a new precision.
    pub fn with_precision(&self, precision: u32) -> Self {
        Self::build(
            self.negative,
            self.mantissa.clone(),
            self.exponent,
            precision,
            false,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.negative && !self.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        !self.negative && !self.is_zero()
    }

    pub fn abs(&self) -> Self {
        Self {
            negative: false,
            ..self.clone()
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            negative: !self.negative && !self.is_zero(),
            ..self.clone()
        }
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        (!self.is_zero()).then(|| top_bit(&self.mantissa, self.exponent))
    }

    /// Approximate `log2 |x|`, valid far outside the `f64` exponent range.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mantissa.bits();
        let keep = bits.min(64);
        let top = (&self.mantissa >> (bits - keep)).to_f64().unwrap_or(f64::MAX);
        top.log2() + (bits - keep) as f64 + self.exponent as f64
    }

    /// Approximate `log10 |x|`.
    pub fn log10_abs(&self) -> f64 {
        self.log2_abs() / LOG2_10
    }

    /// Nearest `f64`; saturates to infinity or zero outside its range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let rounded = self.with_precision(MIN_PRECISION);
        let m = rounded.mantissa.to_f64().unwrap_or(f64::INFINITY);
        let e = rounded.exponent.clamp(-4000, 4000) as i32;
        let magnitude = if e >= 0 {
            m * 2f64.powi(e.min(1100))
        } else {
            // split to avoid premature underflow
            m * 2f64.powi((e / 2).max(-1100)) * 2f64.powi((e - e / 2).max(-1100))
        };
        if self.negative {
            -magnitude
        } else {
            magnitude
        }
    }

    /// Exact value as a fraction.
    pub fn to_rational(&self) -> Rational {
        let sign = if self.is_negative() { Sign::Minus } else { Sign::Plus };
        let m = BigInt::from_biguint(sign, self.mantissa.clone());
        if self.exponent >= 0 {
            Rational::from_integer(m << self.exponent as u64)
        } else {
            Rational::new(m, BigInt::one() << self.exponent.unsigned_abs())
        }
    }

    /// `self · 2^k`, exact.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self {
            exponent: self.exponent + k,
            ..self.clone()
        }
    }

    pub fn add(&self, rhs: &Self, precision: u32) -> Self {
        self.add_signed(rhs, rhs.negative, precision)
    }

    pub fn sub(&self, rhs: &Self, precision: u32) -> Self {
        self.add_signed(rhs, !rhs.negative, precision)
    }

    fn add_signed(&self, rhs: &Self, rhs_negative: bool, precision: u32) -> Self {
        let precision = precision.max(MIN_PRECISION);
        if rhs.is_zero() {
            return self.with_precision(precision);
        }
        if self.is_zero() {
            return Self {
                negative: rhs_negative,
                ..rhs.with_precision(precision)
            };
        }
        let (big, big_neg, small, small_neg) = {
            let lt = top_bit(&self.mantissa, self.exponent);
            let rt = top_bit(&rhs.mantissa, rhs.exponent);
            if lt >= rt {
                (self, self.negative, rhs, rhs_negative)
            } else {
                (rhs, rhs_negative, self, self.negative)
            }
        };
        // When the smaller operand lies entirely below both the last bit of the
        // larger one and the rounding grid of the result, only its sign matters:
        // replace it by a single bit under that threshold.
        let big_top = top_bit(&big.mantissa, big.exponent);
        let threshold = big.exponent.min(big_top - i64::from(precision) - 4);
        let small_top = top_bit(&small.mantissa, small.exponent);
        let proxy;
        let small = if small_top < threshold {
            proxy = Self {
                negative: small_neg,
                mantissa: BigUint::one(),
                exponent: threshold - 1,
                precision,
            };
            &proxy
        } else {
            small
        };

        let base = big.exponent.min(small.exponent);
        let a = &big.mantissa << (big.exponent - base) as u64;
        let b = &small.mantissa << (small.exponent - base) as u64;
        let (negative, mag) = if big_neg == small_neg {
            (big_neg, a + b)
        } else {
            match a.cmp(&b) {
                Ordering::Greater => (big_neg, a - b),
                Ordering::Less => (small_neg, b - a),
                Ordering::Equal => return Self::zero(precision),
            }
        };
        Self::build(negative, mag, base, precision, false)
    }

    pub fn mul(&self, rhs: &Self, precision: u32) -> Self {
        Self::build(
            self.negative != rhs.negative,
            &self.mantissa * &rhs.mantissa,
            self.exponent + rhs.exponent,
            precision,
            false,
        )
    }

    pub fn mul_int(&self, k: i64, precision: u32) -> Self {
        Self::build(
            self.negative != (k < 0),
            &self.mantissa * BigUint::from(k.unsigned_abs()),
            self.exponent,
            precision,
            false,
        )
    }

    pub fn square(&self, precision: u32) -> Self {
        self.mul(self, precision)
    }

    pub fn div(&self, rhs: &Self, precision: u32) -> Result<Self, BigFloatError> {
        if rhs.is_zero() {
            return Err(BigFloatError::DivisionByZero);
        }
        Ok(Self::divide_magnitudes(
            self.negative != rhs.negative,
            &self.mantissa,
            self.exponent,
            &rhs.mantissa,
            rhs.exponent,
            precision,
        ))
    }

    /// `self^n` by binary powering, rounding every product to `precision`.
    pub fn powi(&self, n: u32, precision: u32) -> Self {
        let mut result = Self::one(precision);
        let mut base = self.with_precision(precision);
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base, precision);
            }
            e >>= 1;
            if e > 0 {
                base = base.square(precision);
            }
        }
        result
    }

    /// Exact `self^n` with no rounding.
    pub fn pow_exact(&self, n: u32) -> Self {
        let mantissa = Pow::pow(&self.mantissa, n);
        let bits = (mantissa.bits() as u32).max(MIN_PRECISION);
        Self {
            negative: self.negative && n % 2 == 1,
            mantissa,
            exponent: self.exponent * i64::from(n),
            precision: bits,
        }
    }

    /// Exact three-way comparison of magnitudes.
    pub fn cmp_abs(&self, rhs: &Self) -> Ordering {
        match (self.is_zero(), rhs.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let lt = top_bit(&self.mantissa, self.exponent);
        let rt = top_bit(&rhs.mantissa, rhs.exponent);
        if lt != rt {
            return lt.cmp(&rt);
        }
        let base = self.exponent.min(rhs.exponent);
        let a = &self.mantissa << (self.exponent - base) as u64;
        let b = &rhs.mantissa << (rhs.exponent - base) as u64;
        a.cmp(&b)
    }

    /// Exact comparison of values; precision does not participate.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match (self.is_negative(), other.is_negative()) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => self.cmp_abs(other),
            (true, true) => other.cmp_abs(self),
        }
    }

    /// Exact comparison of `|self|` against `10^k`.
    pub fn cmp_abs_pow10(&self, k: i64) -> Ordering {
        if self.is_zero() {
            return Ordering::Less;
        }
        // cheap reject when the magnitudes are far apart
        let approx = self.log10_abs();
        if approx < k as f64 - 1.0 {
            return Ordering::Less;
        }
        if approx > k as f64 + 1.0 {
            return Ordering::Greater;
        }
        let mut lhs = self.mantissa.clone();
        let mut rhs = BigUint::one();
        if self.exponent >= 0 {
            lhs <<= self.exponent as u64;
        } else {
            rhs <<= self.exponent.unsigned_abs();
        }
        if k >= 0 {
            rhs *= pow10(k as u64);
        } else {
            lhs *= pow10(k.unsigned_abs());
        }
        lhs.cmp(&rhs)
    }

    /// `round(|self| · 10^scale)` to nearest, ties to even.
    fn scaled_round(&self, scale: i64) -> BigUint {
        let mut num = self.mantissa.clone();
        let mut den = BigUint::one();
        if self.exponent >= 0 {
            num <<= self.exponent as u64;
        } else {
            den <<= self.exponent.unsigned_abs();
        }
        if scale >= 0 {
            num *= pow10(scale as u64);
        } else {
            den *= pow10(scale.unsigned_abs());
        }
        let (q, r) = num.div_rem(&den);
        let twice = r << 1u32;
        match twice.cmp(&den) {
            Ordering::Greater => q + 1u32,
            Ordering::Equal if q.bit(0) => q + 1u32,
            _ => q,
        }
    }

    /// Significant digits of `|self|` rounded to `sig` places, with the decimal
    /// exponent of the first digit: `|self| ≈ 0.d1d2… · 10^(exp + 1)`.
    pub fn decimal_digits(&self, sig: usize) -> (String, i64) {
        let sig = sig.max(1);
        if self.is_zero() {
            return ("0".repeat(sig), 0);
        }
        let mut exp10 = self.log10_abs().floor() as i64;
        let lower = pow10(sig as u64 - 1);
        let upper = pow10(sig as u64);
        loop {
            let n = self.scaled_round(sig as i64 - 1 - exp10);
            if n >= upper {
                exp10 += 1;
            } else if n < lower {
                exp10 -= 1;
            } else {
                return (n.to_string(), exp10);
            }
        }
    }

    /// Scientific notation `d.ddd…e±EEEE` with `sig` significant digits and a
    /// signed exponent of at least four digits.
    pub fn to_scientific(&self, sig: usize) -> String {
        let (digits, exp10) = self.decimal_digits(sig);
        let sign = if self.is_negative() { "-" } else { "" };
        let (lead, rest) = digits.split_at(1);
        let esign = if exp10 < 0 { '-' } else { '+' };
        if rest.is_empty() {
            format!("{sign}{lead}e{esign}{:04}", exp10.unsigned_abs())
        } else {
            format!("{sign}{lead}.{rest}e{esign}{:04}", exp10.unsigned_abs())
        }
    }

    /// Positional notation with `sig` significant digits, rounded to nearest.
    pub fn to_significant(&self, sig: usize) -> String {
        let (digits, exp10) = self.decimal_digits(sig);
        let sign = if self.is_negative() { "-" } else { "" };
        let body = if exp10 < 0 {
            format!("0.{}{}", "0".repeat((-exp10 - 1) as usize), digits)
        } else {
            let int_len = exp10 as usize + 1;
            if int_len >= digits.len() {
                format!("{digits}{}", "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        };
        format!("{sign}{body}")
    }

    /// Positional notation rounded to exactly `decimals` digits after the point.
    pub fn to_fixed(&self, decimals: usize) -> String {
        let n = self.scaled_round(decimals as i64).to_string();
        let sign = if self.is_negative() && n.bytes().any(|b| b != b'0') {
            "-"
        } else {
            ""
        };
        if decimals == 0 {
            return format!("{sign}{n}");
        }
        let padded = if n.len() <= decimals {
            format!("{}{}", "0".repeat(decimals + 1 - n.len()), n)
        } else {
            n
        };
        let (int, frac) = padded.split_at(padded.len() - decimals);
        format!("{sign}{int}.{frac}")
    }

    /// Decimal digits sufficient to recover this exact value when parsed back
    /// at the same precision.
    pub fn round_trip_digits(&self) -> usize {
        digits_for_bits(self.precision) as usize + 3
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigFloat({} @{}b)", self.to_scientific(20), self.precision)
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = f.precision().unwrap_or(20);
        f.write_str(&self.to_significant(sig))
    }
}
