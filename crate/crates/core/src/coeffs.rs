//! Exact construction of the fixed-point polynomial
//!
//! ```text
//! F(x) = Π_{ℓ=1..P} (1 + 1/(ℓM)) · ∫_0^x (1 − t^M/a)^P dt = Σ_{k=0..P} c_k · x^(kM+1)
//! ```
//!
//! whose iteration `x ← F(x)` converges to `a^(1/M)` with order `P + 1`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use thiserror::Error;

use crate::exactpoly::{format_rational, Rational, SparsePolynomial};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("radicand must be positive, got {0}")]
    NonPositiveRadicand(String),
    #[error("root index M must be at least 1")]
    ZeroRootIndex,
    #[error("order parameter P must be at least 1")]
    ZeroOrder,
    #[error("unknown template `{0}` (expected quadratic, cubic, quartic or quintic)")]
    UnknownTemplate(String),
}

/// The equation `x^M = a` with `a > 0` rational and `M ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootProblem {
    a: Rational,
    m: u32,
}

impl RootProblem {
    pub fn new(a: Rational, m: u32) -> Result<Self, DomainError> {
        if !a.is_positive() {
            return Err(DomainError::NonPositiveRadicand(format_rational(&a)));
        }
        if m == 0 {
            return Err(DomainError::ZeroRootIndex);
        }
        Ok(Self { a, m })
    }

    /// Shorthand for an integer radicand.
    pub fn integer(a: i64, m: u32) -> Result<Self, DomainError> {
        Self::new(Rational::from_integer(BigInt::from(a)), m)
    }

    pub fn radicand(&self) -> &Rational {
        &self.a
    }

    pub fn root_index(&self) -> u32 {
        self.m
    }
}

impl fmt::Display for RootProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a = {}, M = {}", format_rational(&self.a), self.m)
    }
}

/// `P ≥ 1`; the iteration then has order of convergence `P + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderParameter(u32);

impl OrderParameter {
    pub fn new(p: u32) -> Result<Self, DomainError> {
        if p == 0 {
            return Err(DomainError::ZeroOrder);
        }
        Ok(Self(p))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn convergence_order(self) -> u32 {
        self.0 + 1
    }
}

/// The coefficient vector `c_0..c_P` of `F`, with exponents `kM + 1`.
///
/// Built once per `(a, M, P)`; the iteration only ever reads it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientSet {
    problem: RootProblem,
    order: OrderParameter,
    coefficients: Vec<Rational>,
    exponents: Vec<u32>,
}

impl CoefficientSet {
    pub fn new(a: Rational, m: u32, p: u32) -> Result<Self, DomainError> {
        Ok(build_coefficients(&RootProblem::new(a, m)?, OrderParameter::new(p)?))
    }

    pub fn problem(&self) -> &RootProblem {
        &self.problem
    }

    pub fn order(&self) -> OrderParameter {
        self.order
    }

    pub fn coefficients(&self) -> &[Rational] {
        &self.coefficients
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// `Π_{ℓ=1..P} (1 + 1/(ℓM))`, which equals `c_0`.
    pub fn prefactor(&self) -> &Rational {
        &self.coefficients[0]
    }
}

fn ratio(n: u64, d: u64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Binomial coefficient by the multiplicative formula; every intermediate
/// quotient is exact.
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut c = BigInt::one();
    for i in 1..=k {
        c = c * BigInt::from(n - k + i) / BigInt::from(i);
    }
    c
}

/// `Π_{ℓ=1..P} (1 + 1/(ℓM))` as an exact rational.
pub fn product_prefactor(m: u32, p: u32) -> Rational {
    let m = u64::from(m);
    (1..=u64::from(p)).fold(Rational::one(), |acc, l| acc * ratio(l * m + 1, l * m))
}

/// Checks `Π (1 + 1/(ℓM)) = Π (1 + ℓM) / (P!·M^P)` exactly.
///
/// Always true; a `false` would mean the rational arithmetic is broken.
pub fn product_identity_check(m: u32, p: u32) -> bool {
    let lhs = product_prefactor(m, p);
    let m_big = BigInt::from(m);
    let numerator: BigInt = (1..=p).map(|l| BigInt::from(l) * &m_big + 1).product();
    let factorial: BigInt = (1..=p).map(BigInt::from).product();
    let denominator = factorial * Pow::pow(&m_big, p);
    lhs == Rational::new(numerator, denominator)
}

/// `c_k = prefactor · (−1)^k / a^k · C(P, k) / (kM + 1)` for `k = 0..=P`.
pub fn build_coefficients(problem: &RootProblem, order: OrderParameter) -> CoefficientSet {
    let p = order.get();
    let m = problem.root_index();
    let prefactor = product_prefactor(m, p);
    let inv_a = problem.radicand().recip();

    let mut coefficients = Vec::with_capacity(p as usize + 1);
    let mut exponents = Vec::with_capacity(p as usize + 1);
    // running (−1/a)^k
    let mut power = Rational::one();
    for k in 0..=p {
        let exponent = k * m + 1;
        let c = &prefactor
            * &power
            * Rational::from_integer(binomial(p, k))
            / Rational::from_integer(BigInt::from(exponent));
        coefficients.push(c);
        exponents.push(exponent);
        power = -(power * &inv_a);
    }
    CoefficientSet {
        problem: problem.clone(),
        order,
        coefficients,
        exponents,
    }
}

pub fn build_polynomial(cs: &CoefficientSet) -> SparsePolynomial {
    SparsePolynomial::from_terms(
        cs.exponents
            .iter()
            .copied()
            .zip(cs.coefficients.iter().cloned()),
    )
}

/// The four closed forms for convergence orders 2 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateOrder {
    Quadratic,
    Cubic,
    Quartic,
    Quintic,
}

impl TemplateOrder {
    pub const ALL: [TemplateOrder; 4] = [
        TemplateOrder::Quadratic,
        TemplateOrder::Cubic,
        TemplateOrder::Quartic,
        TemplateOrder::Quintic,
    ];

    /// The `P` that produces this convergence order.
    pub fn order_parameter(self) -> OrderParameter {
        let p = match self {
            TemplateOrder::Quadratic => 1,
            TemplateOrder::Cubic => 2,
            TemplateOrder::Quartic => 3,
            TemplateOrder::Quintic => 4,
        };
        OrderParameter(p)
    }
}

impl FromStr for TemplateOrder {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" => Ok(TemplateOrder::Quadratic),
            "cubic" => Ok(TemplateOrder::Cubic),
            "quartic" => Ok(TemplateOrder::Quartic),
            "quintic" => Ok(TemplateOrder::Quintic),
            _ => Err(DomainError::UnknownTemplate(s.to_string())),
        }
    }
}

/// Instantiates the hand-written closed form for `order` at `(a, M)`.
///
/// Kept independent of [`build_coefficients`]: the binomial weights and
/// prefactor factors are spelled out per order.
pub fn template_polynomial(order: TemplateOrder, problem: &RootProblem) -> SparsePolynomial {
    let a = problem.radicand();
    let m = problem.root_index();
    let m64 = u64::from(m);
    // weight · x^(jM+1) / ((jM+1) · a^j)
    let term = |weight: i64, j: u32| {
        let denom = Rational::from_integer(BigInt::from(u64::from(j) * m64 + 1)) * Pow::pow(a, j);
        SparsePolynomial::monomial(Rational::from_integer(BigInt::from(weight)) / denom, j * m + 1)
    };
    let factor = |l: u64| Rational::one() + ratio(1, l * m64);

    let (prefactor, body) = match order {
        TemplateOrder::Quadratic => {
            // (1 + 1/M)(x − x^(M+1)/(a(M+1)))
            let lead = SparsePolynomial::x();
            let second = SparsePolynomial::monomial(
                -(a * Rational::from_integer(BigInt::from(m + 1))).recip(),
                m + 1,
            );
            (factor(1), &lead + &second)
        }
        TemplateOrder::Cubic => (
            factor(1) * factor(2),
            [term(1, 0), term(-2, 1), term(1, 2)]
                .iter()
                .fold(SparsePolynomial::zero(), |acc, t| &acc + t),
        ),
        TemplateOrder::Quartic => (
            factor(1) * factor(2) * factor(3),
            [term(1, 0), term(-3, 1), term(3, 2), term(-1, 3)]
                .iter()
                .fold(SparsePolynomial::zero(), |acc, t| &acc + t),
        ),
        TemplateOrder::Quintic => (
            factor(1) * factor(2) * factor(3) * factor(4),
            [term(1, 0), term(-4, 1), term(6, 2), term(-4, 3), term(1, 4)]
                .iter()
                .fold(SparsePolynomial::zero(), |acc, t| &acc + t),
        ),
    };
    body.scale(&prefactor)
}
