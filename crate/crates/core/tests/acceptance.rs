//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use polyroot::analysis::{
    check_fixed_point, derivative_at_root_check, derivative_factor_check, error_constant_report,
    estimate_order, reference_root, theoretical_error_constant,
};
use polyroot::cli;
use polyroot::coeffs::{
    build_coefficients, build_polynomial, product_identity_check, template_polynomial,
    CoefficientSet, OrderParameter, RootProblem, TemplateOrder,
};
use polyroot::engine::{bits_for_digits, iterate, newton_iterate, BigFloat, IterationConfig};
use polyroot::exactpoly::Rational;

// criterion 1
const EXAMPLE_ONE_DIGITS: u64 = 40;
const EXAMPLE_ONE_BUDGET: Duration = Duration::from_secs(1);
// criterion 2
const EXAMPLE_TWO_DIGITS: u64 = 20_000;
const EXAMPLE_TWO_SEED: &str = "1.4142135623730950";
const EXAMPLE_TWO_PRINTED_SEED: &str = "1.414213562373";
const EXAMPLE_TWO_MANTISSA_DIGITS: usize = 3;
const LARGE_RUN_DIGITS: u64 = 100_000;
const LARGE_RUN_BUDGET: Duration = Duration::from_secs(60);
const LARGE_RUN_RESIDUAL_EXP: f64 = -99_990.0;
// criterion 3
const ORDER_DIGITS: u64 = 1000;
const ORDER_TOLERANCE: f64 = 0.1;
// criterion 4
const CONSTANT_TOLERANCE: f64 = 0.01;
// criterion 6
const CHECK_DIGITS: u64 = 100;
const FIXED_POINT_SLACK: i64 = 5;
const DERIVATIVE_SLACK: i64 = 10;
// criterion 7
const NEWTON_DIGITS: u64 = 10_000;
const NEWTON_ITERATION_SLACK: usize = 1;
// criterion 8
const RAMPING_DIGITS: [u64; 3] = [100, 1000, 10_000];

const EXAMPLE_ONE_X: [&str; 6] = [
    "2.133333333333333333333333333333333333333",
    "2.154024032921810699588477366255144032922",
    "2.154434533500953092649669501763572523986",
    "2.154434690031860976181374509716973801410",
    "2.154434690031883721759293566039074794849",
    "2.154434690031883721759293566519350495259",
];
const EXAMPLE_ONE_DELTAS: [&str; 6] = [
    "0.1333333333333333333333333333333333333333",
    "0.02069069958847736625514403292181069958848",
    "0.0004105005791423930611921355084284910642133",
    "1.565309078835317050079534012774237318926e-7",
    "2.274557791905632210099343907978738060749e-14",
    "4.802757004105093077094334087308664908888e-28",
];
const EXAMPLE_TWO_DELTAS: [&str; 6] = [
    "4.880168872420969807856967187537694807318e-17",
    "8.773491625654111352087407579690431191435e-66",
    "9.164798637556653681657805406878049888878e-261",
    "1.091251298365935101705686744387078883102e-1040",
    "2.193472316487722705810599621121648551289e-4160",
    "3.580648536099876136173035995717511426715e-16639",
];

fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn order(p: u32) -> OrderParameter {
    OrderParameter::new(p).unwrap()
}

fn grid() -> [(Rational, u32, u32); 4] {
    [(q(10, 1), 3, 1), (q(2, 1), 2, 3), (q(5, 1), 4, 2), (q(7, 3), 2, 4)]
}

fn printed(value: &str) -> BigFloat {
    BigFloat::parse(value, 256).unwrap()
}

/// Mantissa digits and decimal exponent, as in `d.dd…e±EEEE`.
fn mantissa_and_exponent(v: &BigFloat, sig: usize) -> (String, i64) {
    v.decimal_digits(sig)
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn criterion_1() -> Outcome {
    let digits = EXAMPLE_ONE_DIGITS.to_string();
    let args = ["polyroot", "compute", "--a", "10", "--m", "3", "--p", "1", "--digits", &digits, "--x0", "2"];
    let mut out = Vec::new();
    let mut err = Vec::new();
    let start = Instant::now();
    let code = cli::run(args, &mut out, &mut err);
    let elapsed = start.elapsed();
    let text = String::from_utf8(out).unwrap();
    let mut problems = Vec::new();
    if code != 0 {
        problems.push(format!("exit code {code}"));
    }
    for (i, (x, d)) in EXAMPLE_ONE_X.iter().zip(EXAMPLE_ONE_DELTAS).enumerate() {
        let n = i + 1;
        let delta = printed(d).to_scientific(cli::DELTA_DIGITS);
        let expected = format!("step {n:>3}  x = {x}  |x_n - x_(n-1)| = {delta}");
        if !text.lines().any(|l| l.starts_with(&expected)) {
            problems.push(format!("step {n} does not match `{expected}`"));
        }
    }
    if elapsed >= EXAMPLE_ONE_BUDGET {
        problems.push(format!("took {elapsed:?}"));
    }
    check(
        problems.is_empty(),
        format!("6/6 iterates (40 digits) and deltas (10 digits) verbatim in {elapsed:?}"),
        problems.join("; "),
    )
}

fn example_two_deltas(seed: &str) -> Vec<BigFloat> {
    let config = IterationConfig::new(EXAMPLE_TWO_DIGITS).with_ramping(false);
    let config = config.clone().with_seed(BigFloat::parse(seed, config.working_bits()).unwrap());
    let trace = iterate(&RootProblem::integer(2, 2).unwrap(), order(3), &config).unwrap();
    trace.steps[1..].iter().filter_map(|s| s.delta.clone()).take(6).collect()
}

fn criterion_2() -> Outcome {
    let mut problems = Vec::new();
    let deltas = example_two_deltas(EXAMPLE_TWO_SEED);
    for (i, expected) in EXAMPLE_TWO_DELTAS.iter().enumerate() {
        let want = mantissa_and_exponent(&printed(expected), EXAMPLE_TWO_MANTISSA_DIGITS);
        let got = deltas.get(i).map(|d| mantissa_and_exponent(d, EXAMPLE_TWO_MANTISSA_DIGITS));
        if got.as_ref() != Some(&want) {
            problems.push(format!("delta {} = {got:?}, expected {want:?}", i + 1));
        }
    }
    let literal: Vec<String> = example_two_deltas(EXAMPLE_TWO_PRINTED_SEED)
        .iter()
        .map(|d| d.to_scientific(3))
        .collect();
    println!("    note: seed {EXAMPLE_TWO_PRINTED_SEED} as printed gives deltas {}", literal.join(", "));

    let problem = RootProblem::integer(2, 2).unwrap();
    let start = Instant::now();
    let trace = iterate(&problem, order(3), &IterationConfig::new(LARGE_RUN_DIGITS)).unwrap();
    let elapsed = start.elapsed();
    let residual_exp = trace.residual.log10_abs();
    if !trace.converged {
        problems.push(format!("{LARGE_RUN_DIGITS}-digit run ended with {}", trace.termination));
    }
    if elapsed >= LARGE_RUN_BUDGET {
        problems.push(format!("{LARGE_RUN_DIGITS}-digit run took {elapsed:?}"));
    }
    if residual_exp >= LARGE_RUN_RESIDUAL_EXP {
        problems.push(format!("|x^2 - 2| = 10^{residual_exp:.1}"));
    }
    check(
        problems.is_empty(),
        format!(
            "deltas 1-6 match (seed {EXAMPLE_TWO_SEED}, {EXAMPLE_TWO_DIGITS} digits); \
             {LARGE_RUN_DIGITS} digits in {elapsed:?}, |x^2 - 2| = 10^{residual_exp:.1}"
        ),
        problems.join("; "),
    )
}

fn criterion_3() -> Outcome {
    let mut problems = Vec::new();
    let mut seen = Vec::new();
    for (a, m, p) in grid() {
        let problem = RootProblem::new(a.clone(), m).unwrap();
        let trace = iterate(&problem, order(p), &IterationConfig::new(ORDER_DIGITS)).unwrap();
        match estimate_order(&trace) {
            Ok(est) => {
                seen.push(format!("{:.3}", est.final_estimate));
                if est.deviation() > ORDER_TOLERANCE {
                    problems.push(format!("({a},{m},{p}): {est}"));
                }
            }
            Err(e) => problems.push(format!("({a},{m},{p}): {e}")),
        }
    }
    check(
        problems.is_empty(),
        format!("orders {} for P+1 = 2, 4, 3, 5", seen.join(", ")),
        problems.join("; "),
    )
}

fn criterion_4() -> Outcome {
    let mut problems = Vec::new();
    let mut seen = Vec::new();

    let one = CoefficientSet::new(q(10, 1), 3, 1).unwrap();
    let config = IterationConfig::new(EXAMPLE_ONE_DIGITS).with_seed(BigFloat::from_i64(2, 64));
    let trace = iterate(one.problem(), one.order(), &config).unwrap();
    let two = CoefficientSet::new(q(2, 1), 2, 3).unwrap();
    let config = IterationConfig::new(EXAMPLE_TWO_DIGITS).with_ramping(false);
    let config = config
        .clone()
        .with_seed(BigFloat::parse(EXAMPLE_TWO_SEED, config.working_bits()).unwrap());
    let trace_two = iterate(two.problem(), two.order(), &config).unwrap();

    for (label, trace, cs, digits) in [
        ("example 1", &trace, &one, EXAMPLE_ONE_DIGITS),
        ("example 2", &trace_two, &two, EXAMPLE_TWO_DIGITS),
    ] {
        match error_constant_report(trace, cs, digits) {
            Ok(r) => {
                seen.push(format!("{label} {} vs {}", r.empirical.to_significant(7), r.theoretical.to_significant(8)));
                if r.relative_mismatch >= CONSTANT_TOLERANCE {
                    problems.push(format!("{label}: {r}"));
                }
            }
            Err(e) => problems.push(format!("{label}: {e}")),
        }
    }

    // ratios read straight off the printed deltas
    let bits = 256;
    for (label, cs, base, next) in [
        ("example 1 printed", &one, EXAMPLE_ONE_DELTAS[4], EXAMPLE_ONE_DELTAS[5]),
        ("example 2 printed", &two, EXAMPLE_TWO_DELTAS[1], EXAMPLE_TWO_DELTAS[2]),
    ] {
        let q = cs.order().convergence_order();
        let ratio = printed(next).div(&printed(base).powi(q, bits), bits).unwrap();
        let root = reference_root(cs.problem(), 100).unwrap();
        let theo = theoretical_error_constant(cs, &root, bits).abs();
        let mismatch = ratio.sub(&theo, bits).abs().div(&theo, bits).unwrap().to_f64();
        seen.push(format!("{label} {}", ratio.to_significant(4)));
        if mismatch >= CONSTANT_TOLERANCE {
            problems.push(format!("{label}: ratio {} vs {}", ratio.to_significant(6), theo.to_significant(8)));
        }
    }
    check(problems.is_empty(), seen.join("; "), problems.join("; "))
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for m in 1..=10 {
        for p in 1..=10 {
            count += 1;
            if !product_identity_check(m, p) {
                failures.push(format!("identity M={m} P={p}"));
            }
        }
    }
    for a in [q(1, 2), q(2, 1), q(10, 1), q(7, 3)] {
        for m in 1..=5 {
            let problem = RootProblem::new(a.clone(), m).unwrap();
            for p in 1..=5 {
                count += 1;
                if !derivative_factor_check(&build_coefficients(&problem, order(p))) {
                    failures.push(format!("derivative factor a={a} M={m} P={p}"));
                }
            }
            for t in TemplateOrder::ALL {
                count += 1;
                let built = build_polynomial(&build_coefficients(&problem, t.order_parameter()));
                if template_polynomial(t, &problem) != built {
                    failures.push(format!("template {t:?} a={a} M={m}"));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!("{count} exact identities hold"),
        failures.join("; "),
    )
}

fn criterion_6() -> Outcome {
    let mut problems = Vec::new();
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let fixed_limit = -(CHECK_DIGITS as i64) + FIXED_POINT_SLACK;
    let derivative_limit = -(CHECK_DIGITS as i64) + DERIVATIVE_SLACK;
    for (a, m, p) in grid() {
        let cs = CoefficientSet::new(a.clone(), m, p).unwrap();
        let fixed = check_fixed_point(&cs, CHECK_DIGITS).unwrap();
        let derivative = derivative_at_root_check(&cs, CHECK_DIGITS).unwrap();
        let fe = if fixed.is_zero() { f64::NEG_INFINITY } else { fixed.log10_abs() };
        let de = if derivative.is_zero() { f64::NEG_INFINITY } else { derivative.log10_abs() };
        worst = (worst.0.max(fe), worst.1.max(de));
        if fe >= fixed_limit as f64 {
            problems.push(format!("({a},{m},{p}) |F(x) - x| = 10^{fe:.1}"));
        }
        if de >= derivative_limit as f64 {
            problems.push(format!("({a},{m},{p}) derivative error 10^{de:.1}"));
        }
    }
    check(
        problems.is_empty(),
        format!(
            "worst |F(x) - x| = 10^{:.1} < 10^{fixed_limit}, worst derivative error 10^{:.1} < 10^{derivative_limit}",
            worst.0, worst.1
        ),
        problems.join("; "),
    )
}

fn criterion_7() -> Outcome {
    let problem = RootProblem::integer(2, 2).unwrap();
    let config = IterationConfig::new(NEWTON_DIGITS);
    let fixed = iterate(&problem, order(1), &config).unwrap();
    let newton = newton_iterate(&problem, &config).unwrap();
    let (a, b) = (fixed.iterations(), newton.iterations());
    let same_seed = fixed.steps[0].x == newton.steps[0].x;
    check(
        fixed.converged && newton.converged && same_seed && a.abs_diff(b) <= NEWTON_ITERATION_SLACK,
        format!("P=1 {a} iterations, Newton {b}"),
        format!(
            "P=1 {a} iterations ({}), Newton {b} ({}), same seed: {same_seed}",
            fixed.termination, newton.termination
        ),
    )
}

fn criterion_8() -> Outcome {
    let problem = RootProblem::integer(2, 2).unwrap();
    let mut problems = Vec::new();
    for digits in RAMPING_DIGITS {
        let ramped = iterate(&problem, order(3), &IterationConfig::new(digits)).unwrap();
        let flat = iterate(&problem, order(3), &IterationConfig::new(digits).with_ramping(false)).unwrap();
        let bits = bits_for_digits(digits + 30);
        let diff = ramped.final_x().sub(flat.final_x(), bits).abs();
        let agree = diff.is_zero() || diff.log10_abs() < -(digits as f64);
        let printed = ramped.final_x().to_fixed(digits as usize) == flat.final_x().to_fixed(digits as usize);
        if !(agree && printed && ramped.converged && flat.converged) {
            problems.push(format!("{digits} digits: difference 10^{:.1}", diff.log10_abs()));
        }
    }
    check(
        problems.is_empty(),
        format!("ramped and full-precision roots agree at {RAMPING_DIGITS:?} digits"),
        problems.join("; "),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("example 1 reproduction", criterion_1),
        ("example 2 reproduction and 100k digits", criterion_2),
        ("order estimation", criterion_3),
        ("error constant", criterion_4),
        ("exact identities", criterion_5),
        ("fixed point and (P+1)-th derivative", criterion_6),
        ("Newton parity", criterion_7),
        ("precision ramping soundness", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
