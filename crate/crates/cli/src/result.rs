//! Result documents written next to the traces.

use std::path::Path;

use serde::{Deserialize, Serialize};
use treeverify::tasks::{Metrics, RobustnessResult, StepDecision};
use treeverify::{BoundsTrace, Example, Status};

use crate::error::CliError;
use crate::task::{AlgorithmName, TaskKind};

/// Non-finite bounds are written as `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Terminal state of one engine run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub algorithm: AlgorithmName,
    pub status: Status,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub witnesses: Vec<Example>,
    pub trace_file: String,
    pub expansions: Option<u64>,
}

impl RunSummary {
    pub fn new(
        algorithm: AlgorithmName,
        trace: &BoundsTrace,
        witnesses: Vec<Example>,
        trace_file: &str,
        expansions: Option<u64>,
    ) -> Self {
        let last = trace.last();
        RunSummary {
            algorithm,
            status: trace.status,
            upper: last.and_then(|e| finite(e.upper)),
            lower: last.and_then(|e| finite(e.lower)),
            witnesses,
            trace_file: trace_file.to_string(),
            expansions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub delta: f64,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub status: Status,
    pub decision: StepDecision,
    pub witness: Option<Example>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessDoc {
    pub delta_lower: f64,
    pub proven_exact: bool,
    pub adversarial_witness: Option<Example>,
    pub witness_distance: Option<f64>,
    pub per_step: Vec<StepDoc>,
}

impl From<&RobustnessResult> for RobustnessDoc {
    fn from(r: &RobustnessResult) -> Self {
        RobustnessDoc {
            delta_lower: r.delta_lower,
            proven_exact: r.proven_exact,
            adversarial_witness: r.adversarial_witness.clone(),
            witness_distance: r.witness_distance,
            per_step: r
                .per_step
                .iter()
                .map(|s| StepDoc {
                    delta: s.delta,
                    upper: finite(s.upper),
                    lower: finite(s.lower),
                    status: s.status,
                    decision: s.decision,
                    witness: s.witness.clone(),
                    t: s.t,
                })
                .collect(),
        }
    }
}

/// One generated task of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchEntry {
    pub index: usize,
    pub target_fraction: f64,
    pub seed: u64,
    pub achieved_fraction: Option<f64>,
    pub result: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDoc {
    pub kind: TaskKind,
    /// `None` for batches, whose runs are listed in `tasks`.
    pub result: Option<RunSummary>,
    /// The second engine's run, for comparisons.
    pub baseline: Option<RunSummary>,
    pub metrics: Option<Metrics>,
    pub robustness: Option<RobustnessDoc>,
    pub tasks: Option<Vec<BatchEntry>>,
}

impl ResultDoc {
    pub fn new(kind: TaskKind) -> Self {
        ResultDoc {
            kind,
            result: None,
            baseline: None,
            metrics: None,
            robustness: None,
            tasks: None,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_trace(path: &Path, trace: &BoundsTrace) -> Result<(), CliError> {
    std::fs::write(path, trace.to_csv()).map_err(|e| CliError::io(path, e))
}
