use serde::{Deserialize, Serialize};

use crate::trace::{BoundsTrace, Status};

/// Below this magnitude the upper bound is too close to zero to divide by.
const DEGENERATE_EPS: f64 = 1e-12;

/// Comparison of an anytime run against a baseline on the same problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Seconds until our upper bound first reached the baseline's final
    /// upper bound; `None` if it never did.
    pub ttb: Option<f64>,
    /// `(upper - lower) / |upper|` at termination; `None` when undefined.
    pub gap_ours: Option<f64>,
    pub gap_baseline: Option<f64>,
    pub gap_ours_degenerate: bool,
    pub gap_baseline_degenerate: bool,
    pub exact_ours: bool,
    pub exact_baseline: bool,
}

/// Relative gap of a final bound pair and whether it is degenerate (no
/// finite bounds, or an upper bound too close to zero).
pub fn relative_gap(upper: f64, lower: f64) -> (Option<f64>, bool) {
    if !upper.is_finite() || !lower.is_finite() {
        return (None, true);
    }
    let degenerate = upper.abs() < DEGENERATE_EPS;
    if upper == lower {
        (Some(0.0), degenerate)
    } else if degenerate {
        (None, true)
    } else {
        (Some((upper - lower) / upper.abs()), false)
    }
}

fn final_gap(trace: &BoundsTrace) -> (Option<f64>, bool) {
    match trace.last() {
        Some(e) => relative_gap(e.upper, e.lower),
        None => (None, true),
    }
}

pub fn compute_metrics(ours: &BoundsTrace, baseline: &BoundsTrace) -> Metrics {
    let ttb = baseline.final_upper().and_then(|target| {
        ours.entries
            .iter()
            .find(|e| e.upper <= target)
            .map(|e| e.t)
    });
    let (gap_ours, gap_ours_degenerate) = final_gap(ours);
    let (gap_baseline, gap_baseline_degenerate) = final_gap(baseline);
    Metrics {
        ttb,
        gap_ours,
        gap_baseline,
        gap_ours_degenerate,
        gap_baseline_degenerate,
        exact_ours: ours.status == Status::Exact,
        exact_baseline: baseline.status == Status::Exact,
    }
}
