//! Exact and empirical checks of the iteration's theory: the root is a fixed
//! point, the first `P` derivatives vanish there, `F^(P+1)` takes the closed
//! form, and traces show order `P + 1` with the predicted error constant.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::coeffs::{build_polynomial, CoefficientSet, RootProblem};
use crate::engine::{
    bits_for_digits, newton_iterate, BigFloat, EngineError, IterationConfig, IterationTrace,
    DEFAULT_GUARD_DIGITS,
};
use crate::exactpoly::SparsePolynomial;

/// Deltas at or above this are treated as pre-asymptotic.
pub const ASYMPTOTIC_THRESHOLD: f64 = 1e-4;
/// Errors admitted as the base of an error-constant ratio must be below this.
pub const ERROR_THRESHOLD: f64 = 1e-6;
/// Bits a difference must sit above the working-precision floor to count.
pub const RESOLUTION_MARGIN_BITS: i64 = 32;
/// Reference roots are computed at this multiple of the requested digits.
pub const REFERENCE_FACTOR: u64 = 4;
/// Relative tolerance when checking recorded deltas against the recorded x values.
const CONSISTENCY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("insufficient asymptotic steps: need {needed}, found {found}")]
    InsufficientAsymptoticSteps { needed: usize, found: usize },
    #[error("reference root did not converge")]
    ReferenceFailed,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// `a^(1/M)` from the Newton recurrence at `digits` digits.
///
/// Newton is used so that empirical checks of the fixed-point map never
/// compare it against itself.
pub fn reference_root(problem: &RootProblem, digits: u64) -> Result<BigFloat, AnalysisError> {
    let trace = newton_iterate(problem, &IterationConfig::new(digits))?;
    if !trace.converged {
        return Err(AnalysisError::ReferenceFailed);
    }
    Ok(trace.final_x().clone())
}

/// Evaluates an exact polynomial at a float point, rounding each coefficient
/// to `bits`.
pub fn eval_polynomial(poly: &SparsePolynomial, x: &BigFloat, bits: u32) -> BigFloat {
    let mut terms = poly.terms().rev();
    let Some((top, lead)) = terms.next() else {
        return BigFloat::zero(bits);
    };
    let mut acc = BigFloat::from_rational(lead, bits);
    let mut current = top;
    for (e, c) in terms {
        acc = acc
            .mul(&x.powi(current - e, bits), bits)
            .add(&BigFloat::from_rational(c, bits), bits);
        current = e;
    }
    if current > 0 {
        acc = acc.mul(&x.powi(current, bits), bits);
    }
    acc
}

/// `|F(x̂) − x̂|` where `x̂` is the root rounded to `digits` digits.
///
/// Since `F′` vanishes at the root, `F(x̂)` lands much closer to the root than
/// `x̂` does, so the result is about the rounding error of `x̂`.
pub fn check_fixed_point(cs: &CoefficientSet, digits: u64) -> Result<BigFloat, AnalysisError> {
    let reference = reference_root(cs.problem(), REFERENCE_FACTOR * digits)?;
    let x = reference.with_precision(bits_for_digits(digits));
    let bits = bits_for_digits(2 * digits + DEFAULT_GUARD_DIGITS);
    let fx = crate::engine::evaluate_fixed_point(cs, &x, bits)?;
    Ok(fx.sub(&x, bits).abs())
}

/// `1 − x^M/a`
fn contraction_factor(problem: &RootProblem) -> SparsePolynomial {
    &SparsePolynomial::one()
        - &SparsePolynomial::monomial(problem.radicand().recip(), problem.root_index())
}

/// Exact check of the derivative structure:
///
/// * `F′ = prefactor · (1 − x^M/a)^P`
/// * `(1 − x^M/a)^(P−k+1)` divides `F^(k)` for every `k = 1..=P`
///
/// Together these force `F^(k)(root) = 0` for `k ≤ P` without touching the
/// irrational root.
pub fn derivative_factor_check(cs: &CoefficientSet) -> bool {
    let f = build_polynomial(cs);
    let p = cs.order().get();
    let base = contraction_factor(cs.problem());
    let first = f.derivative();
    if first != base.pow(p).scale(cs.prefactor()) {
        return false;
    }
    let mut derivative = first;
    for k in 1..=p {
        let divisor = base.pow(p - k + 1);
        match derivative.div_rem(&divisor) {
            Ok((_, remainder)) if remainder.is_zero() => {}
            _ => return false,
        }
        derivative = derivative.derivative();
    }
    true
}

/// `Π_{ℓ=1..P} (1 + ℓM)` as an integer.
fn odd_product(m: u32, p: u32) -> BigInt {
    (1..=p).map(|l| BigInt::from(u64::from(l) * u64::from(m) + 1)).product()
}

fn factorial(n: u32) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// `(−1)^P · Π(1 + ℓM) / root^P`, where `root^P = a^(P/M)`.
fn theoretical_derivative(cs: &CoefficientSet, root: &BigFloat, bits: u32) -> BigFloat {
    let p = cs.order().get();
    let product = BigFloat::from_bigint(&odd_product(cs.problem().root_index(), p), bits);
    let value = product
        .div(&root.powi(p, bits), bits)
        .expect("root is positive");
    if p % 2 == 1 {
        value.neg()
    } else {
        value
    }
}

/// `|F^(P+1)(x̂) − (−1)^P Π(1+ℓM)/a^(P/M)|` with `F^(P+1)` formed exactly and
/// evaluated at the root rounded to `digits` digits.
pub fn derivative_at_root_check(
    cs: &CoefficientSet,
    digits: u64,
) -> Result<BigFloat, AnalysisError> {
    let p = cs.order().get();
    let reference = reference_root(cs.problem(), REFERENCE_FACTOR * digits)?;
    let x = reference.with_precision(bits_for_digits(digits));
    let bits = bits_for_digits(2 * digits + DEFAULT_GUARD_DIGITS);
    let derivative = build_polynomial(cs).nth_derivative(p + 1);
    let computed = eval_polynomial(&derivative, &x, bits);
    let theoretical = theoretical_derivative(cs, &reference, bits);
    Ok(computed.sub(&theoretical, bits).abs())
}

/// `(1/(P+1)!) · (−1)^P / a^(P/M) · Π(1 + ℓM)`, the limit of
/// `e_(n+1) / e_n^(P+1)`.
pub fn theoretical_error_constant(cs: &CoefficientSet, root: &BigFloat, bits: u32) -> BigFloat {
    let p = cs.order().get();
    theoretical_derivative(cs, root, bits)
        .div(&BigFloat::from_bigint(&factorial(p + 1), bits), bits)
        .expect("factorial is positive")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// `ρ_n = log Δ_(n+1) / log Δ_n` over consecutive admitted deltas.
    pub per_step: Vec<f64>,
    pub final_estimate: f64,
    pub theoretical: u32,
}

impl OrderEstimate {
    pub fn deviation(&self) -> f64 {
        (self.final_estimate - f64::from(self.theoretical)).abs()
    }
}

impl fmt::Display for OrderEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let steps: Vec<String> = self.per_step.iter().map(|r| format!("{r:.4}")).collect();
        write!(
            f,
            "order estimate {:.4} (theoretical {}; per step: {})",
            self.final_estimate,
            self.theoretical,
            steps.join(", ")
        )
    }
}

/// True when `value` sits clearly above the rounding floor of an iterate
/// near `x` carried at `bits`.
fn is_resolved(value: &BigFloat, x: &BigFloat, bits: u32) -> bool {
    if value.is_zero() {
        return false;
    }
    let floor = x.floor_log2().unwrap_or(0) - i64::from(bits) + RESOLUTION_MARGIN_BITS;
    value.log2_abs() > floor as f64
}

/// Indices `n` whose delta is nonzero, below the asymptotic threshold and
/// resolved at the step's precision.
fn admitted_deltas(trace: &IterationTrace) -> Vec<usize> {
    let threshold = ASYMPTOTIC_THRESHOLD.log10();
    trace
        .steps
        .iter()
        .enumerate()
        .filter_map(|(i, step)| {
            let delta = step.delta.as_ref()?;
            (is_resolved(delta, &step.x, step.precision_bits) && delta.log10_abs() < threshold)
                .then_some(i)
        })
        .collect()
}

/// Reads the order of convergence off successive deltas.
pub fn estimate_order(trace: &IterationTrace) -> Result<OrderEstimate, AnalysisError> {
    const NEEDED: usize = 3;
    let admitted = admitted_deltas(trace);
    let mut per_step = Vec::new();
    let mut run = 1usize;
    let mut longest = usize::from(!admitted.is_empty());
    for pair in admitted.windows(2) {
        if pair[1] != pair[0] + 1 {
            run = 1;
            continue;
        }
        run += 1;
        longest = longest.max(run);
        let log = |i: usize| trace.steps[i].delta.as_ref().expect("admitted").log10_abs();
        per_step.push(log(pair[1]) / log(pair[0]));
    }
    if longest < NEEDED {
        return Err(AnalysisError::InsufficientAsymptoticSteps {
            needed: NEEDED,
            found: longest,
        });
    }
    Ok(OrderEstimate {
        final_estimate: *per_step.last().expect("at least two ratios"),
        per_step,
        theoretical: trace.convergence_order(),
    })
}

/// How the errors `e_n` were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorEstimator {
    /// `e_n = x_n − root` against an independent reference root.
    ReferenceRoot,
    /// `e_n ≈ −(x_(n+1) − x_n)`, read from the recorded deltas.
    SuccessiveDifferences,
}

impl ErrorEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorEstimator::ReferenceRoot => "reference_root",
            ErrorEstimator::SuccessiveDifferences => "successive_differences",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorConstantReport {
    pub theoretical: BigFloat,
    pub empirical: BigFloat,
    pub relative_mismatch: f64,
    pub estimator: ErrorEstimator,
    /// False when only magnitudes could be compared.
    pub signed: bool,
    /// `n` such that the ratio is `e_n / e_(n−1)^(P+1)`.
    pub step: usize,
}

impl fmt::Display for ErrorConstantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (theo, emp) = if self.signed {
            (self.theoretical.clone(), self.empirical.clone())
        } else {
            (self.theoretical.abs(), self.empirical.abs())
        };
        write!(
            f,
            "error constant {} (theoretical {}; mismatch {:.3e}; {} at step {}{})",
            emp.to_significant(8),
            theo.to_significant(8),
            self.relative_mismatch,
            self.estimator.as_str(),
            self.step,
            if self.signed { "" } else { "; magnitudes only" }
        )
    }
}

/// Whether every recorded delta agrees with the recorded x values.
///
/// Traces that print x to fewer digits than the deltas resolve fail this, and
/// then only delta magnitudes are trustworthy.
fn trace_is_consistent(trace: &IterationTrace) -> bool {
    trace.steps.windows(2).all(|w| {
        let Some(delta) = &w[1].delta else {
            return false;
        };
        let bits = w[1].precision_bits.max(w[0].precision_bits) + 64;
        let recomputed = w[1].x.sub(&w[0].x, bits).abs();
        if delta.is_zero() || recomputed.is_zero() {
            return delta.is_zero() && recomputed.is_zero();
        }
        let diff = recomputed.sub(delta, bits).abs();
        diff.log10_abs() - delta.log10_abs() < CONSISTENCY_TOLERANCE.log10()
    })
}

fn relative_mismatch(empirical: &BigFloat, theoretical: &BigFloat, signed: bool) -> f64 {
    let bits = theoretical.precision().max(128);
    let (e, t) = if signed {
        (empirical.clone(), theoretical.clone())
    } else {
        (empirical.abs(), theoretical.abs())
    };
    let diff = e.sub(&t, bits);
    if diff.is_zero() {
        0.0
    } else {
        10f64.powf(diff.log10_abs() - t.log10_abs())
    }
}

/// Compares `e_(n+1) / e_n^(P+1)` at the last usable step with the
/// theoretical asymptotic error constant.
///
/// `digits` is the accuracy the trace targets; the reference root is
/// computed at four times that.
pub fn error_constant_report(
    trace: &IterationTrace,
    cs: &CoefficientSet,
    digits: u64,
) -> Result<ErrorConstantReport, AnalysisError> {
    let q = trace.convergence_order();
    let reference = reference_root(cs.problem(), REFERENCE_FACTOR * digits.max(20))?;
    let bits = 256;
    let theoretical = theoretical_error_constant(cs, &reference, bits);
    let base_limit = ERROR_THRESHOLD.log10();
    let consistent = trace_is_consistent(trace);

    if consistent {
        let errors: Vec<BigFloat> = trace
            .steps
            .iter()
            .map(|s| s.x.sub(&reference, reference.precision()))
            .collect();
        let usable = (0..errors.len().saturating_sub(1)).rev().find(|&n| {
            let next = &trace.steps[n + 1];
            !errors[n].is_zero()
                && errors[n].log10_abs() < base_limit
                && is_resolved(&errors[n + 1], &next.x, next.precision_bits)
        });
        if let Some(n) = usable {
            let empirical = errors[n + 1]
                .div(&errors[n].powi(q, bits), bits)
                .expect("base error is nonzero");
            return Ok(ErrorConstantReport {
                relative_mismatch: relative_mismatch(&empirical, &theoretical, true),
                theoretical,
                empirical,
                estimator: ErrorEstimator::ReferenceRoot,
                signed: true,
                step: n + 1,
            });
        }
    }

    // e_(k−1) ≈ −d_k with d_k = x_k − x_(k−1)
    let signed_delta = |k: usize| -> BigFloat {
        let step = &trace.steps[k];
        let delta = step.delta.clone().expect("steps after the seed carry deltas");
        let bits = step.precision_bits + 64;
        if consistent && step.x.sub(&trace.steps[k - 1].x, bits).is_negative() {
            delta
        } else if consistent {
            delta.neg()
        } else {
            delta
        }
    };
    let usable = (1..trace.steps.len().saturating_sub(1)).rev().find(|&k| {
        let (cur, next) = (&trace.steps[k], &trace.steps[k + 1]);
        match (&cur.delta, &next.delta) {
            (Some(d), Some(e)) => {
                is_resolved(d, &cur.x, cur.precision_bits)
                    && d.log10_abs() < base_limit
                    && is_resolved(e, &next.x, next.precision_bits)
            }
            _ => false,
        }
    });
    let Some(k) = usable else {
        return Err(AnalysisError::InsufficientAsymptoticSteps {
            needed: 2,
            found: admitted_deltas(trace).len().min(1),
        });
    };
    let empirical = signed_delta(k + 1)
        .div(&signed_delta(k).powi(q, bits), bits)
        .expect("admitted delta is nonzero");
    Ok(ErrorConstantReport {
        relative_mismatch: relative_mismatch(&empirical, &theoretical, consistent),
        theoretical,
        empirical,
        estimator: ErrorEstimator::SuccessiveDifferences,
        signed: consistent,
        step: k,
    })
}
