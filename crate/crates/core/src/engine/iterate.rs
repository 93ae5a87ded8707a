use std::cmp::Ordering;
use std::collections::HashMap;

use num_bigint::BigInt;

use super::{
    basin_guard, bits_for_digits, seed_initial, verify_residual, BigFloat, EngineError,
    IterationConfig, IterationTrace, Method, TerminationReason, TraceStep, DIVERGENCE_STREAK,
    MAX_BINARY_EXPONENT, RAMP_START_DIGITS,
};
use crate::coeffs::{build_coefficients, CoefficientSet, OrderParameter, RootProblem};
use crate::exactpoly::Rational;

/// Decimal working precision per step.
///
/// With ramping, step `n` runs at `min(target + guard, ceil(q·d_(n−1)) + guard)`
/// starting from `d_0 = 20`, where `q` is the convergence order. Without
/// ramping every step runs at `target + guard`.
#[derive(Debug, Clone)]
pub struct PrecisionSchedule {
    order: u32,
    ramping: bool,
    cap: u64,
    guard: u64,
    last: u64,
}

impl PrecisionSchedule {
    pub fn new(order: u32, config: &IterationConfig) -> Self {
        Self {
            order,
            ramping: config.ramping,
            cap: config.working_digits(),
            guard: config.guard_digits,
            last: RAMP_START_DIGITS,
        }
    }

    pub fn next_digits(&mut self) -> u64 {
        let digits = if self.ramping {
            (u64::from(self.order) * self.last + self.guard).min(self.cap)
        } else {
            self.cap
        };
        self.last = digits;
        digits
    }
}

/// `F(x) = x · g(x^M)` with `g(y) = Σ c_k y^k` evaluated by Horner's rule.
///
/// Coefficients are rounded from their exact values once per precision level
/// and cached.
#[derive(Debug, Clone)]
pub struct FixedPointMap {
    root_index: u32,
    exact: Vec<Rational>,
    rounded: HashMap<u32, Vec<BigFloat>>,
}

impl FixedPointMap {
    pub fn new(cs: &CoefficientSet) -> Self {
        Self {
            root_index: cs.problem().root_index(),
            exact: cs.coefficients().to_vec(),
            rounded: HashMap::new(),
        }
    }

    fn coefficients(&mut self, bits: u32) -> &[BigFloat] {
        let exact = &self.exact;
        self.rounded
            .entry(bits)
            .or_insert_with(|| exact.iter().map(|c| BigFloat::from_rational(c, bits)).collect())
    }

    pub fn apply(&mut self, x: &BigFloat, bits: u32) -> Result<BigFloat, EngineError> {
        let degree = (self.exact.len() - 1) as f64 * f64::from(self.root_index) + 1.0;
        if x.log2_abs() * degree > MAX_BINARY_EXPONENT as f64 {
            return Err(EngineError::Overflow);
        }
        let m = self.root_index;
        let y = x.powi(m, bits);
        let coefficients = self.coefficients(bits);
        let (last, rest) = coefficients.split_last().expect("P + 1 ≥ 2 coefficients");
        let g = rest
            .iter()
            .rev()
            .fold(last.clone(), |acc, c| acc.mul(&y, bits).add(c, bits));
        Ok(x.mul(&g, bits))
    }
}

/// One evaluation of `F(x)` at `precision_bits`.
pub fn evaluate_fixed_point(
    cs: &CoefficientSet,
    x: &BigFloat,
    precision_bits: u32,
) -> Result<BigFloat, EngineError> {
    FixedPointMap::new(cs).apply(x, precision_bits.max(super::MIN_PRECISION))
}

/// Runs `x_n = F(x_(n−1))` until `|x_n − x_(n−1)| < ε`.
///
/// A seed outside the contraction region returns a one-step trace with
/// [`TerminationReason::DivergenceGuard`].
pub fn iterate(
    problem: &RootProblem,
    order: OrderParameter,
    config: &IterationConfig,
) -> Result<IterationTrace, EngineError> {
    config.validate()?;
    let cs = build_coefficients(problem, order);
    let seed = config
        .seed_override
        .clone()
        .unwrap_or_else(|| seed_initial(problem));
    let method = Method::FixedPoint(order);
    if !basin_guard(&seed, &cs) {
        return Ok(rejected_seed(problem, method, seed, config));
    }
    let mut map = FixedPointMap::new(&cs);
    Ok(drive(problem, method, seed, config, |x, bits| map.apply(x, bits)))
}

/// The Newton recurrence `x_(n+1) = x_n − (x_n − a/x_n^(M−1))/M` under the
/// same schedule and termination rule as [`iterate`].
pub fn newton_iterate(
    problem: &RootProblem,
    config: &IterationConfig,
) -> Result<IterationTrace, EngineError> {
    config.validate()?;
    let seed = config
        .seed_override
        .clone()
        .unwrap_or_else(|| seed_initial(problem));
    let m = problem.root_index();
    let m_big = BigFloat::from_bigint(&BigInt::from(m), 64);
    let mut radicand: HashMap<u32, BigFloat> = HashMap::new();
    let step = |x: &BigFloat, bits: u32| -> Result<BigFloat, EngineError> {
        if x.log2_abs().abs() * f64::from(m) > MAX_BINARY_EXPONENT as f64 {
            return Err(EngineError::Overflow);
        }
        let a = radicand
            .entry(bits)
            .or_insert_with(|| BigFloat::from_rational(problem.radicand(), bits));
        let quotient = a.div(&x.powi(m - 1, bits), bits)?;
        let correction = x.sub(&quotient, bits).div(&m_big, bits)?;
        Ok(x.sub(&correction, bits))
    };
    Ok(drive(problem, Method::Newton, seed, config, step))
}

fn rejected_seed(
    problem: &RootProblem,
    method: Method,
    seed: BigFloat,
    config: &IterationConfig,
) -> IterationTrace {
    let residual = verify_residual(&seed, problem, config.working_digits());
    IterationTrace {
        problem: problem.clone(),
        method,
        steps: vec![TraceStep {
            n: 0,
            precision_bits: seed.precision(),
            x: seed,
            delta: None,
        }],
        converged: false,
        termination: TerminationReason::DivergenceGuard,
        residual,
    }
}

fn drive<F>(
    problem: &RootProblem,
    method: Method,
    seed: BigFloat,
    config: &IterationConfig,
    mut step: F,
) -> IterationTrace
where
    F: FnMut(&BigFloat, u32) -> Result<BigFloat, EngineError>,
{
    let mut schedule = PrecisionSchedule::new(method.convergence_order(), config);
    let mut steps = vec![TraceStep {
        n: 0,
        precision_bits: seed.precision(),
        x: seed.clone(),
        delta: None,
    }];
    let mut x = seed;
    let mut previous_delta: Option<BigFloat> = None;
    let mut growth = 0;
    let mut termination = TerminationReason::MaxIterations;

    for n in 1..=config.max_iterations as usize {
        let bits = bits_for_digits(schedule.next_digits());
        let next = match step(&x, bits) {
            Ok(v) if v.is_positive() => v,
            // overflow, a non-positive iterate, or a failed division all mean
            // the sequence left the region where it can converge
            _ => {
                termination = TerminationReason::DivergenceGuard;
                break;
            }
        };
        let delta = next.sub(&x, bits).abs();
        growth = match &previous_delta {
            Some(p) if delta.cmp_abs(p) == Ordering::Greater => growth + 1,
            _ => 0,
        };
        let met = delta.cmp_abs_pow10(-config.epsilon_exponent) == Ordering::Less;
        steps.push(TraceStep {
            n,
            x: next.clone(),
            delta: Some(delta.clone()),
            precision_bits: bits,
        });
        x = next;
        previous_delta = Some(delta);
        if met {
            termination = TerminationReason::EpsilonMet;
            break;
        }
        if growth >= DIVERGENCE_STREAK {
            termination = TerminationReason::DivergenceGuard;
            break;
        }
    }

    let residual = verify_residual(&x, problem, config.working_digits());
    IterationTrace {
        problem: problem.clone(),
        method,
        steps,
        converged: termination == TerminationReason::EpsilonMet,
        termination,
        residual,
    }
}
