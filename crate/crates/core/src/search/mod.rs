//! Anytime best-first search over partial output configurations.
//!
//! States fix one leaf per tree in a fixed tree order, so every state is a
//! clique of the leaf graph and every complete state is an output
//! configuration. The heuristic sums, over the remaining trees, the best leaf
//! value still compatible with the state's box; it is admissible and
//! consistent, so the largest unweighted `g + h` in OPEN is always a valid
//! upper bound. Pop order uses `g + eps * h` with `eps` raised each time a
//! complete state is popped, which yields full solutions (lower bounds) early
//! without restarting the search.

mod context;
mod engine;
mod pair;

use std::time::Duration;

pub use context::{Objective, SearchContext, SearchState};
pub use pair::{pair_witness, PairContext, PairState, Turn};

use crate::constraints::{Constraint, JointConstraint};
use crate::ensemble::{Ensemble, Example, Hyperbox, Interval};
use crate::error::{Error, Result};
use crate::trace::{BoundsTrace, Witness};

use engine::Space;

/// Order in which trees receive their leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeOrder {
    /// Model order.
    #[default]
    Identity,
    /// Trees with the widest leaf-value range first.
    ByValueSpread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Initial heuristic weight, in `(0, 1]`.
    pub epsilon_start: f64,
    /// Added to the weight after each complete state is popped (capped at 1).
    pub epsilon_step: f64,
    pub time_budget: Option<Duration>,
    /// Maximum number of expansions.
    pub node_budget: Option<u64>,
    /// Approximate bytes allowed in OPEN.
    pub memory_budget: Option<usize>,
    pub tree_order: TreeOrder,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            epsilon_start: 0.5,
            epsilon_step: 0.1,
            time_budget: None,
            node_budget: None,
            memory_budget: Some(4096 << 20),
            tree_order: TreeOrder::Identity,
        }
    }
}

impl SearchConfig {
    /// Plain A*: weight 1 from the start, no budgets.
    pub fn exact() -> Self {
        SearchConfig {
            epsilon_start: 1.0,
            memory_budget: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_start > 0.0 && self.epsilon_start <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_start must lie in (0, 1], got {}",
                self.epsilon_start
            )));
        }
        if !(self.epsilon_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_step must be positive, got {}",
                self.epsilon_step
            )));
        }
        Ok(())
    }
}

/// A complete configuration found during search.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Model output (difference of outputs for two-model problems).
    pub value: f64,
    /// One box per instance.
    pub boxes: Vec<Hyperbox>,
    /// `(tree, leaf)` pairs per instance, sorted by tree.
    pub leaves: Vec<Vec<(usize, usize)>>,
    pub witness: Witness,
    pub epsilon_at_discovery: f64,
    /// Seconds since the run started.
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub trace: BoundsTrace,
    /// Strictly improving solutions in discovery order.
    pub solutions: Vec<Solution>,
    pub expansions: u64,
    pub peak_open: usize,
}

impl SearchResult {
    pub fn best(&self) -> Option<&Solution> {
        self.solutions.last()
    }
}

/// Certified bound `value / eps` on the optimum from a solution found with
/// weight `eps`. Only meaningful for positive values.
pub fn suboptimality_bound(solution: &Solution) -> Option<f64> {
    (solution.value > 0.0).then(|| solution.value / solution.epsilon_at_discovery)
}

/// A representative point of `iv`: its lower end, `hi - 1` when only the
/// upper end is finite, 0 when unbounded.
pub fn pick_in(iv: Interval) -> f64 {
    if iv.lo().is_finite() {
        iv.lo()
    } else if iv.hi().is_finite() {
        iv.hi() - 1.0
    } else {
        0.0
    }
}

/// A point inside `bbox`: the lower end of each bounded interval, `hi - 1`
/// when only the upper end is finite, and 0 for free attributes.
pub fn extract_witness(bbox: &Hyperbox, num_attributes: usize) -> Example {
    (0..num_attributes).map(|a| pick_in(bbox.get(a))).collect()
}

/// A single-model optimization problem.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub ensemble: &'a Ensemble,
    pub constraint: &'a Constraint,
    /// Extra pruning box, intersected with the constraint's own.
    pub prune: Hyperbox,
    pub sense: Sense,
}

impl<'a> Problem<'a> {
    pub fn maximize(ensemble: &'a Ensemble, constraint: &'a Constraint) -> Self {
        Problem {
            ensemble,
            constraint,
            prune: Hyperbox::unconstrained(),
            sense: Sense::Maximize,
        }
    }

    pub fn minimize(ensemble: &'a Ensemble, constraint: &'a Constraint) -> Self {
        Problem {
            sense: Sense::Minimize,
            ..Self::maximize(ensemble, constraint)
        }
    }
}

/// `max T2(x2) - T1(x1)` subject to a joint constraint.
#[derive(Debug, Clone)]
pub struct PairProblem<'a> {
    pub first: &'a Ensemble,
    pub second: &'a Ensemble,
    pub constraint: &'a JointConstraint,
    pub prune_first: Hyperbox,
    pub prune_second: Hyperbox,
}

impl<'a> PairProblem<'a> {
    pub fn new(first: &'a Ensemble, second: &'a Ensemble, constraint: &'a JointConstraint) -> Self {
        PairProblem {
            first,
            second,
            constraint,
            prune_first: Hyperbox::unconstrained(),
            prune_second: Hyperbox::unconstrained(),
        }
    }
}

impl Space for SearchContext {
    type State = SearchState;

    fn root(&self) -> Option<SearchState> {
        SearchContext::root(self)
    }

    fn expand_into(&self, s: &SearchState, out: &mut Vec<SearchState>) {
        SearchContext::expand_into(self, s, out)
    }

    fn g(&self, s: &SearchState) -> f64 {
        s.g
    }

    fn h(&self, s: &SearchState) -> f64 {
        s.h
    }

    fn depth(&self, s: &SearchState) -> usize {
        s.depth()
    }

    fn is_goal(&self, s: &SearchState) -> bool {
        SearchContext::is_goal(self, s)
    }

    fn bytes(&self, s: &SearchState) -> usize {
        s.estimated_bytes()
    }

    fn offset(&self) -> f64 {
        self.base_score()
    }

    fn solution(&self, s: &SearchState, value: f64, eps: f64, t: f64) -> Solution {
        Solution {
            value,
            boxes: vec![s.bbox.clone()],
            leaves: vec![self.leaf_refs(s)],
            witness: Witness::Single(self.witness(s)),
            epsilon_at_discovery: eps,
            t,
        }
    }
}

impl Space for PairContext {
    type State = PairState;

    fn root(&self) -> Option<PairState> {
        PairContext::root(self)
    }

    fn expand_into(&self, s: &PairState, out: &mut Vec<PairState>) {
        PairContext::expand_into(self, s, out)
    }

    fn g(&self, s: &PairState) -> f64 {
        s.g()
    }

    fn h(&self, s: &PairState) -> f64 {
        s.h()
    }

    fn depth(&self, s: &PairState) -> usize {
        s.first.depth() + s.second.depth()
    }

    fn is_goal(&self, s: &PairState) -> bool {
        PairContext::is_goal(self, s)
    }

    fn bytes(&self, s: &PairState) -> usize {
        s.first.estimated_bytes() + s.second.estimated_bytes()
    }

    fn offset(&self) -> f64 {
        self.second().base_score() - self.first().base_score()
    }

    fn solution(&self, s: &PairState, value: f64, eps: f64, t: f64) -> Solution {
        let (x1, x2) = self.witness(s);
        Solution {
            value,
            boxes: vec![s.first.bbox.clone(), s.second.bbox.clone()],
            leaves: vec![self.first().leaf_refs(&s.first), self.second().leaf_refs(&s.second)],
            witness: Witness::Pair(x1, x2),
            epsilon_at_discovery: eps,
            t,
        }
    }
}

/// Runs the anytime search on a single-model problem. Minimization runs the
/// same machinery on the negated model and maps the bounds back.
pub fn run_search(problem: &Problem<'_>, cfg: &SearchConfig) -> SearchResult {
    match problem.sense {
        Sense::Maximize => {
            let ctx = SearchContext::new(
                problem.ensemble,
                problem.constraint,
                &problem.prune,
                cfg.tree_order,
                Objective::Max,
            );
            engine::run(&ctx, cfg)
        }
        Sense::Minimize => {
            let negated = problem.ensemble.negate();
            let mut r = run_search(
                &Problem {
                    ensemble: &negated,
                    sense: Sense::Maximize,
                    ..problem.clone()
                },
                cfg,
            );
            for e in &mut r.trace.entries {
                let (u, l) = (e.upper, e.lower);
                e.upper = -l;
                e.lower = -u;
            }
            for s in &mut r.solutions {
                s.value = -s.value;
            }
            r
        }
    }
}

/// Runs the anytime search on a two-model difference problem.
pub fn run_search_two_instance(problem: &PairProblem<'_>, cfg: &SearchConfig) -> SearchResult {
    let ctx = PairContext::new(
        problem.first,
        problem.second,
        problem.constraint,
        &problem.prune_first,
        &problem.prune_second,
        cfg.tree_order,
    );
    engine::run(&ctx, cfg)
}
