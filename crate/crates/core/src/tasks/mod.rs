//! Evaluation protocols built on the engines: adversarial robustness by
//! binary search over the ball radius, the unconstrained stress test,
//! random constraint tasks, and comparison metrics between two traces.

mod metrics;
mod random_task;
mod robustness;

pub use metrics::{compute_metrics, relative_gap, Metrics};
pub use random_task::{generate_random_task, reachable_fraction, RandomTaskSpec, FRACTION_TOLERANCE};
pub use robustness::{robustness_search, RobustnessQuery, RobustnessResult, StepDecision, StepRecord};

use crate::constraints::Constraint;
use crate::ensemble::{Ensemble, Hyperbox};
use crate::error::{Error, Result};
use crate::graph::{run_merge, MergeConfig};
use crate::search::{run_search, Problem, SearchConfig};
use crate::trace::BoundsTrace;

/// Which engine answers a bound query.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Veritas(SearchConfig),
    Merge(MergeConfig),
}

impl Default for Algorithm {
    fn default() -> Self {
        Algorithm::Veritas(SearchConfig::default())
    }
}

/// Index of the highest score; ties go to the lowest index.
pub fn predict(models: &[Ensemble], x: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, m) in models.iter().enumerate() {
        let s = m.eval(x)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidConfig("no class models given".into()))
}

/// Maximal output of `ens` without constraints, by both engines under the
/// same budgets. Returns `(search trace, merge trace)`.
pub fn stress_max(ens: &Ensemble, search: &SearchConfig, merge: &MergeConfig) -> (BoundsTrace, BoundsTrace) {
    let none = Constraint::none();
    let ours = run_search(&Problem::maximize(ens, &none), search).trace;
    let baseline = run_merge(ens, &Hyperbox::unconstrained(), merge);
    (ours, baseline)
}
