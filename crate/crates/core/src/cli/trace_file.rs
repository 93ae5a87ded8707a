//! JSON trace records: one file per run, human-auditable, with deltas kept in
//! short scientific notation so million-digit runs stay small.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{DomainError, OrderParameter, RootProblem};
use crate::engine::{
    BigFloat, IterationConfig, IterationTrace, Method, TerminationReason, TraceStep,
};
use crate::exactpoly::{format_rational, parse_rational};

pub const SCHEMA_VERSION: &str = "1.0";
/// Significant digits kept for deltas and residuals.
pub const DELTA_DIGITS: usize = 10;
/// Precision used when reading the residual back.
const RESIDUAL_BITS: u32 = 64;

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed trace file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed trace file: bad {field} `{value}`")]
    Field { field: &'static str, value: String },
    #[error("malformed trace file: {0}")]
    Domain(#[from] DomainError),
    #[error("unsupported schema version `{0}`")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    /// `num/den`, or an integer.
    pub a: String,
    #[serde(rename = "M")]
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub target_digits: u64,
    pub epsilon_exponent: i64,
    pub max_iterations: u32,
    pub guard_digits: u64,
    pub seed: String,
    #[serde(default = "default_ramping")]
    pub ramping: bool,
}

fn default_ramping() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub x: String,
    pub delta: Option<String>,
    pub precision_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecordFile {
    pub schema_version: String,
    pub problem: ProblemRecord,
    #[serde(rename = "P")]
    pub p: u32,
    pub config: ConfigRecord,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub termination_reason: String,
    pub residual: String,
    pub wall_time_ms: f64,
}

fn field_error(field: &'static str, value: &str) -> TraceFileError {
    TraceFileError::Field {
        field,
        value: value.chars().take(64).collect(),
    }
}

/// Every digit needed to read `x` back exactly at its own precision.
pub fn full_decimal(x: &BigFloat) -> String {
    x.to_significant(x.round_trip_digits())
}

impl TraceRecordFile {
    /// Records a fixed-point trace. `config` supplies the run settings; the
    /// seed is taken from the trace itself.
    pub fn from_trace(
        trace: &IterationTrace,
        order: OrderParameter,
        config: &IterationConfig,
        wall_time_ms: f64,
    ) -> Self {
        let steps = trace
            .steps
            .iter()
            .map(|s| StepRecord {
                n: s.n,
                x: full_decimal(&s.x),
                delta: s.delta.as_ref().map(|d| d.to_scientific(DELTA_DIGITS)),
                precision_bits: s.precision_bits,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            problem: ProblemRecord {
                a: format_rational(trace.problem.radicand()),
                m: trace.problem.root_index(),
            },
            p: order.get(),
            config: ConfigRecord {
                target_digits: config.target_digits,
                epsilon_exponent: config.epsilon_exponent,
                max_iterations: config.max_iterations,
                guard_digits: config.guard_digits,
                seed: full_decimal(&trace.steps[0].x),
                ramping: config.ramping,
            },
            steps,
            converged: trace.converged,
            termination_reason: trace.termination.as_str().to_string(),
            residual: trace.residual.to_scientific(DELTA_DIGITS),
            wall_time_ms,
        }
    }

    pub fn problem(&self) -> Result<RootProblem, TraceFileError> {
        let a = parse_rational(&self.problem.a).map_err(|_| field_error("a", &self.problem.a))?;
        Ok(RootProblem::new(a, self.problem.m)?)
    }

    pub fn order(&self) -> Result<OrderParameter, TraceFileError> {
        Ok(OrderParameter::new(self.p)?)
    }

    pub fn config(&self) -> Result<IterationConfig, TraceFileError> {
        let c = &self.config;
        let mut config = IterationConfig::new(c.target_digits)
            .with_epsilon_exponent(c.epsilon_exponent)
            .with_max_iterations(c.max_iterations)
            .with_guard_digits(c.guard_digits)
            .with_ramping(c.ramping);
        let bits = self.steps.first().map_or(config.working_bits(), |s| s.precision_bits);
        let seed = BigFloat::parse(&c.seed, bits).map_err(|_| field_error("seed", &c.seed))?;
        config.seed_override = Some(seed);
        Ok(config)
    }

    /// Rebuilds the trace; x values are exact, deltas and the residual carry
    /// the recorded ten digits.
    pub fn to_trace(&self) -> Result<IterationTrace, TraceFileError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(TraceFileError::Schema(self.schema_version.clone()));
        }
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let x = BigFloat::parse(&s.x, s.precision_bits).map_err(|_| field_error("x", &s.x))?;
                let delta = s
                    .delta
                    .as_ref()
                    .map(|d| BigFloat::parse(d, s.precision_bits).map_err(|_| field_error("delta", d)))
                    .transpose()?;
                Ok(TraceStep {
                    n: s.n,
                    x,
                    delta,
                    precision_bits: s.precision_bits,
                })
            })
            .collect::<Result<Vec<_>, TraceFileError>>()?;
        if steps.is_empty() {
            return Err(field_error("steps", "[]"));
        }
        let termination: TerminationReason = self
            .termination_reason
            .parse()
            .map_err(|_| field_error("termination_reason", &self.termination_reason))?;
        let residual = BigFloat::parse(&self.residual, RESIDUAL_BITS)
            .map_err(|_| field_error("residual", &self.residual))?;
        Ok(IterationTrace {
            problem: self.problem()?,
            method: Method::FixedPoint(self.order()?),
            steps,
            converged: self.converged,
            termination,
            residual,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TraceFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, TraceFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| TraceFileError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), TraceFileError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| TraceFileError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}
