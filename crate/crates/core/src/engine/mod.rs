//! Arbitrary-precision iteration of the fixed-point map, with the Newton
//! recurrence as a baseline.

mod bigfloat;
mod iterate;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

pub use bigfloat::{bits_for_digits, digits_for_bits, BigFloat, BigFloatError, LOG2_10, MIN_PRECISION};
pub use iterate::{evaluate_fixed_point, iterate, newton_iterate, FixedPointMap, PrecisionSchedule};

use crate::coeffs::{CoefficientSet, OrderParameter, RootProblem};

/// Decimal precision assumed for the seed when ramping starts.
pub const RAMP_START_DIGITS: u64 = 20;
pub const DEFAULT_GUARD_DIGITS: u64 = 15;
pub const DEFAULT_MAX_ITERATIONS: u32 = 64;
/// Consecutive growing deltas that abort an iteration.
pub const DIVERGENCE_STREAK: u32 = 3;
/// Iterates with `|log2 x|` beyond this count as overflow.
pub const MAX_BINARY_EXPONENT: i64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid iteration config: {0}")]
    InvalidConfig(String),
    #[error("working exponent range exceeded")]
    Overflow,
    #[error(transparent)]
    Arithmetic(#[from] BigFloatError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationConfig {
    pub target_digits: u64,
    /// Stop once `|x_n − x_(n−1)| < 10^(−epsilon_exponent)`.
    pub epsilon_exponent: i64,
    pub max_iterations: u32,
    pub guard_digits: u64,
    pub seed_override: Option<BigFloat>,
    /// Grow the working precision with the expected accuracy instead of
    /// running every step at full precision.
    pub ramping: bool,
}

impl IterationConfig {
    pub fn new(target_digits: u64) -> Self {
        Self {
            target_digits,
            epsilon_exponent: target_digits as i64,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            guard_digits: DEFAULT_GUARD_DIGITS,
            seed_override: None,
            ramping: true,
        }
    }

    pub fn with_epsilon_exponent(mut self, e: i64) -> Self {
        self.epsilon_exponent = e;
        self
    }

    pub fn with_max_iterations(mut self, n: u32) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_guard_digits(mut self, g: u64) -> Self {
        self.guard_digits = g;
        self
    }

    pub fn with_seed(mut self, seed: BigFloat) -> Self {
        self.seed_override = Some(seed);
        self
    }

    pub fn with_ramping(mut self, ramping: bool) -> Self {
        self.ramping = ramping;
        self
    }

    /// Target plus guard digits: the precision of the final steps.
    pub fn working_digits(&self) -> u64 {
        self.target_digits + self.guard_digits
    }

    pub fn working_bits(&self) -> u32 {
        bits_for_digits(self.working_digits())
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.target_digits == 0 {
            return Err(EngineError::InvalidConfig("target digits must be positive".into()));
        }
        if self.epsilon_exponent > self.target_digits as i64 {
            return Err(EngineError::InvalidConfig(format!(
                "epsilon exponent {} exceeds target digits {}",
                self.epsilon_exponent, self.target_digits
            )));
        }
        if self.max_iterations == 0 {
            return Err(EngineError::InvalidConfig("max iterations must be at least 1".into()));
        }
        if let Some(seed) = &self.seed_override {
            if !seed.is_positive() {
                return Err(EngineError::InvalidConfig("seed must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    EpsilonMet,
    MaxIterations,
    DivergenceGuard,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::EpsilonMet => "epsilon_met",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::DivergenceGuard => "divergence_guard",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TerminationReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epsilon_met" => Ok(TerminationReason::EpsilonMet),
            "max_iterations" => Ok(TerminationReason::MaxIterations),
            "divergence_guard" => Ok(TerminationReason::DivergenceGuard),
            other => Err(format!("unknown termination reason `{other}`")),
        }
    }
}

/// Which recurrence produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FixedPoint(OrderParameter),
    Newton,
}

impl Method {
    pub fn convergence_order(self) -> u32 {
        match self {
            Method::FixedPoint(p) => p.convergence_order(),
            Method::Newton => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub n: usize,
    pub x: BigFloat,
    /// `|x_n − x_(n−1)|`; absent for the seed.
    pub delta: Option<BigFloat>,
    pub precision_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationTrace {
    pub problem: RootProblem,
    pub method: Method,
    pub steps: Vec<TraceStep>,
    pub converged: bool,
    pub termination: TerminationReason,
    /// `|x_final^M − a|`
    pub residual: BigFloat,
}

impl IterationTrace {
    pub fn final_x(&self) -> &BigFloat {
        &self.steps.last().expect("trace always holds the seed").x
    }

    /// Number of map applications (steps after the seed).
    pub fn iterations(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn convergence_order(&self) -> u32 {
        self.method.convergence_order()
    }
}

fn ln_biguint(n: &num_bigint::BigUint) -> f64 {
    let bits = n.bits();
    let shift = bits.saturating_sub(64);
    let top = (n >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Double-precision estimate of `a^(1/M)` via `exp(ln(a)/M)`, exact as a
/// 64-bit [`BigFloat`].
///
/// The radicand may lie far outside the `f64` range; the power of two is split
/// off before exponentiating.
pub fn seed_initial(problem: &RootProblem) -> BigFloat {
    let a = problem.radicand();
    let ln_a = ln_biguint(a.numer().magnitude()) - ln_biguint(a.denom().magnitude());
    let t = ln_a / f64::from(problem.root_index());
    let k = (t / std::f64::consts::LN_2).floor();
    let r = t - k * std::f64::consts::LN_2;
    BigFloat::from_f64(r.exp())
        .expect("exp of a reduced argument is finite")
        .mul_pow2(k as i64)
}

/// True iff `|F′(x)| = prefactor · |1 − x^M/a|^P < 1`, i.e.
/// `|1 − x^M/a| < prefactor^(−1/P)`.
pub fn basin_guard(x: &BigFloat, cs: &CoefficientSet) -> bool {
    const BITS: u32 = 128;
    if !x.is_positive() {
        return false;
    }
    let problem = cs.problem();
    if x.log2_abs().abs() * f64::from(problem.root_index()) > MAX_BINARY_EXPONENT as f64 {
        return false;
    }
    let a = BigFloat::from_rational(problem.radicand(), BITS);
    let ratio = x
        .powi(problem.root_index(), BITS)
        .div(&a, BITS)
        .expect("radicand is positive");
    let f = BigFloat::one(BITS).sub(&ratio, BITS).abs();
    let slope = f
        .powi(cs.order().get(), BITS)
        .mul(&BigFloat::from_rational(cs.prefactor(), BITS), BITS);
    slope.cmp_value(&BigFloat::one(BITS)) == std::cmp::Ordering::Less
}

/// `|x^M − a|`, with `x^M` formed exactly and one rounding in the subtraction.
///
/// The result carries at least `digits` decimal digits of relative precision;
/// `residual / (M·a)` estimates the relative error of `x` as a root.
pub fn verify_residual(x: &BigFloat, problem: &RootProblem, digits: u64) -> BigFloat {
    let bits = bits_for_digits(digits.max(RAMP_START_DIGITS));
    let a = problem.radicand();
    let power = x.pow_exact(problem.root_index());
    let q = BigFloat::from_bigint(a.denom(), a.denom().bits().max(1) as u32);
    let scaled = power.mul(&q, power.precision().saturating_add(q.precision()));
    let p = BigFloat::from_bigint(a.numer(), a.numer().bits().max(1) as u32);
    scaled
        .sub(&p, bits.saturating_add(64))
        .div(&q, bits)
        .expect("denominator is positive")
        .abs()
}

/// First-order estimate of the relative root error from a residual:
/// `residual / (M·a)`.
pub fn relative_root_error(residual: &BigFloat, problem: &RootProblem) -> BigFloat {
    let bits = residual.precision();
    let scale = problem.radicand() * BigInt::from(problem.root_index());
    residual
        .div(&BigFloat::from_rational(&scale, bits), bits)
        .expect("radicand is positive")
}

/// Convenience for tests and callers that want a seed from a decimal literal.
pub fn parse_seed(text: &str, config: &IterationConfig) -> Result<BigFloat, BigFloatError> {
    BigFloat::parse(text, config.working_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactpoly::Rational;
    use std::cmp::Ordering;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn seed_examples() {
        let cube = seed_initial(&RootProblem::integer(10, 3).unwrap());
        assert!((cube.to_f64() - 2.154434690031884).abs() < 2.2e-10);
        let unit = seed_initial(&RootProblem::integer(1, 5).unwrap());
        assert_eq!(unit.to_rational(), q(1, 1));
        let sqrt2 = seed_initial(&RootProblem::integer(2, 2).unwrap());
        assert!((sqrt2.to_f64() - std::f64::consts::SQRT_2).abs() < 1e-10);
        assert!(sqrt2.precision() >= 53);
    }

    #[test]
    fn seed_relative_error_outside_f64_range() {
        // a = 10^600 / 3, M = 7
        let a = Rational::new(num_traits::Pow::pow(&BigInt::from(10), 600u32), BigInt::from(3));
        let problem = RootProblem::new(a.clone(), 7).unwrap();
        let seed = seed_initial(&problem);
        let residual = verify_residual(&seed, &problem, 30);
        let rel = relative_root_error(&residual, &problem);
        assert!(rel.log10_abs() < -10.0, "relative error 10^{}", rel.log10_abs());

        let tiny = RootProblem::new(a.recip(), 3).unwrap();
        let seed = seed_initial(&tiny);
        let rel = relative_root_error(&verify_residual(&seed, &tiny, 30), &tiny);
        assert!(rel.log10_abs() < -10.0);
    }

    #[test]
    fn guard_examples() {
        let cs = CoefficientSet::new(q(10, 1), 3, 1).unwrap();
        assert!(basin_guard(&BigFloat::from_i64(2, 64), &cs));
        assert!(!basin_guard(&BigFloat::from_i64(4, 64), &cs));
        assert!(!basin_guard(&BigFloat::zero(64), &cs));
        assert!(!basin_guard(&BigFloat::from_i64(-2, 64), &cs));
        let root = seed_initial(cs.problem());
        assert!(basin_guard(&root, &cs));
        let unit = CoefficientSet::new(q(1, 1), 4, 3).unwrap();
        assert!(basin_guard(&BigFloat::one(64), &unit));
    }

    #[test]
    fn guard_boundary_matches_radius() {
        // |F'(x)| < 1  <=>  |1 - x^M/a| < prefactor^(-1/P); radius for (10,3,1) is 0.75,
        // so the admissible x^3 lie in (2.5, 17.5)
        let cs = CoefficientSet::new(q(10, 1), 3, 1).unwrap();
        let just_outside = BigFloat::parse("2.5999", 128).unwrap(); // x^3 ≈ 17.57
        let upper = BigFloat::parse("2.6", 128).unwrap();
        assert!(!basin_guard(&just_outside, &cs));
        assert!(basin_guard(&BigFloat::parse("2.59", 128).unwrap(), &cs));
        assert!(!basin_guard(&upper, &cs));
        assert!(basin_guard(&BigFloat::parse("1.36", 128).unwrap(), &cs)); // x^3 ≈ 2.515
        assert!(!basin_guard(&BigFloat::parse("1.35", 128).unwrap(), &cs)); // x^3 ≈ 2.460
    }

    #[test]
    fn residual_examples() {
        let problem = RootProblem::integer(10, 3).unwrap();
        let x = BigFloat::from_rational(&q(32, 15), 400);
        let r = verify_residual(&x, &problem, 110);
        let expected = BigFloat::from_rational(&q(982, 3375), 400);
        let diff = r.sub(&expected, 400).abs();
        assert!(diff.log10_abs() < -100.0);

        let unit = RootProblem::integer(1, 9).unwrap();
        assert!(verify_residual(&BigFloat::one(64), &unit, 50).is_zero());

        // rational radicand, exact dyadic x: (3/2)^2 - 9/4 = 0
        let quarter = RootProblem::new(q(9, 4), 2).unwrap();
        assert!(verify_residual(&BigFloat::parse("1.5", 64).unwrap(), &quarter, 30).is_zero());
    }

    #[test]
    fn residual_of_huge_iterate_does_not_blow_up() {
        let problem = RootProblem::integer(2, 3).unwrap();
        let x = BigFloat::one(64).mul_pow2(1 << 30);
        let r = verify_residual(&x, &problem, 30);
        assert!(r.log2_abs() > 3.0e9);
    }

    #[test]
    fn config_validation() {
        assert!(IterationConfig::new(40).validate().is_ok());
        assert!(IterationConfig::new(40).with_epsilon_exponent(41).validate().is_err());
        assert!(IterationConfig::new(40).with_max_iterations(0).validate().is_err());
        assert!(IterationConfig::new(0).validate().is_err());
        let neg = IterationConfig::new(10).with_seed(BigFloat::from_i64(-1, 64));
        assert!(neg.validate().is_err());
        assert_eq!(IterationConfig::new(40).working_digits(), 55);
    }

    #[test]
    fn termination_reason_names() {
        for r in [
            TerminationReason::EpsilonMet,
            TerminationReason::MaxIterations,
            TerminationReason::DivergenceGuard,
        ] {
            assert_eq!(r.as_str().parse::<TerminationReason>(), Ok(r));
        }
        assert!("bogus".parse::<TerminationReason>().is_err());
        assert_eq!(
            BigFloat::from_i64(3, 64).cmp_value(&BigFloat::from_i64(2, 64)),
            Ordering::Greater
        );
    }
}
