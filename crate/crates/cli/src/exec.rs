//! Runs tasks on the engines and checks the results before they are written.

use std::time::Instant;

use treeverify::constraints::{Constraint, PairConstraint};
use treeverify::graph::run_merge;
use treeverify::oracle::{self, DEFAULT_LIMIT};
use treeverify::search::{
    extract_witness, pair_witness, run_search, run_search_two_instance, PairProblem, Problem,
};
use treeverify::tasks::{generate_random_task, robustness_search, Algorithm, RobustnessQuery, RobustnessResult, StepDecision};
use treeverify::{BoundsTrace, Ensemble, Example, Hyperbox, Status, Witness};

use crate::error::CliError;
use crate::task::{merge_config, search_config, AlgorithmName, Task, TaskKind};

/// Relative tolerance when re-evaluating a witness against its bound.
const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub trace: BoundsTrace,
    pub witnesses: Vec<Example>,
    pub expansions: Option<u64>,
}

fn witnesses_of(trace: &BoundsTrace) -> Vec<Example> {
    match trace.best_witness() {
        Some(Witness::Single(x)) => vec![x.clone()],
        Some(Witness::Pair(a, b)) => vec![a.clone(), b.clone()],
        None => Vec::new(),
    }
}

fn from_trace(trace: BoundsTrace, expansions: Option<u64>) -> Outcome {
    Outcome {
        witnesses: witnesses_of(&trace),
        trace,
        expansions,
    }
}

fn infeasible(t: f64) -> BoundsTrace {
    let mut trace = BoundsTrace::new();
    trace.push(t, f64::NEG_INFINITY, f64::NEG_INFINITY, None);
    trace.status = Status::Infeasible;
    trace
}

fn exact(t: f64, value: f64, witness: Witness) -> BoundsTrace {
    let mut trace = BoundsTrace::new();
    trace.push(t, value, value, Some(witness));
    trace.status = Status::Exact;
    trace
}

/// Maps a trace of `max -T` to one of `min T`.
fn flip(trace: &mut BoundsTrace) {
    for e in &mut trace.entries {
        let (u, l) = (e.upper, e.lower);
        e.upper = -l;
        e.lower = -u;
    }
}

/// Merge has no per-state checks, so only box-shaped constraints apply.
fn merge_prune(c: &Constraint) -> Result<Option<Hyperbox>, CliError> {
    if c.needs_state_check() {
        return Err(CliError::Input(
            "merge supports box and linf_ball constraints only".into(),
        ));
    }
    Ok(c.prune_box_checked())
}

fn maximize(task: &Task, ens: &Ensemble, c: &Constraint, alg: AlgorithmName) -> Result<Outcome, CliError> {
    let cfg = &task.doc.config;
    Ok(match alg {
        AlgorithmName::Veritas => {
            let r = run_search(&Problem::maximize(ens, c), &search_config(cfg));
            from_trace(r.trace, Some(r.expansions))
        }
        AlgorithmName::Merge => match merge_prune(c)? {
            Some(prune) => from_trace(run_merge(ens, &prune, &merge_config(cfg)), None),
            None => from_trace(infeasible(0.0), None),
        },
        AlgorithmName::Oracle => {
            let start = Instant::now();
            let best = oracle::exact_max(ens, Some(c), &Hyperbox::unconstrained())?;
            let t = start.elapsed().as_secs_f64();
            from_trace(
                match best {
                    Some(o) => exact(t, o.value, Witness::Single(extract_witness(&o.bbox, ens.num_attributes()))),
                    None => infeasible(t),
                },
                None,
            )
        }
    })
}

fn minimize(task: &Task, ens: &Ensemble, c: &Constraint, alg: AlgorithmName) -> Result<Outcome, CliError> {
    if alg == AlgorithmName::Veritas {
        let r = run_search(&Problem::minimize(ens, c), &search_config(&task.doc.config));
        return Ok(from_trace(r.trace, Some(r.expansions)));
    }
    let mut out = maximize(task, &ens.negate(), c, alg)?;
    flip(&mut out.trace);
    Ok(out)
}

fn diff_maximize(task: &Task, alg: AlgorithmName) -> Result<Outcome, CliError> {
    let (first, second) = (&task.models[0], &task.models[1]);
    let joint = task.constraints.joint_constraint();
    let cfg = &task.doc.config;
    Ok(match alg {
        AlgorithmName::Veritas => {
            let r = run_search_two_instance(&PairProblem::new(first, second, &joint), &search_config(cfg));
            from_trace(r.trace, Some(r.expansions))
        }
        AlgorithmName::Merge => {
            // a single shared input is the only joint shape Merge can express
            let same = !joint.joint.is_empty()
                && joint.joint.iter().any(|p| *p == PairConstraint::same_instance());
            if !same {
                return Err(CliError::Input(
                    "merge handles diff_maximize only for a differs_only constraint with no attributes".into(),
                ));
            }
            let diff = second.difference(first)?;
            let mut out = maximize(task, &diff, &joint.first, alg)?;
            if let Some(x) = out.witnesses.pop() {
                out.witnesses = vec![x.clone(), x];
            }
            out
        }
        AlgorithmName::Oracle => {
            let start = Instant::now();
            let best = oracle::exact_diff_max(first, second, &joint, DEFAULT_LIMIT)?;
            let t = start.elapsed().as_secs_f64();
            from_trace(
                match best {
                    Some((v, c1, c2)) => {
                        let (x1, x2) = pair_witness(
                            &joint.joint,
                            &c1.bbox,
                            &c2.bbox,
                            first.num_attributes(),
                            second.num_attributes(),
                        );
                        exact(t, v, Witness::Pair(x1, x2))
                    }
                    None => infeasible(t),
                },
                None,
            )
        }
    })
}

/// Runs a maximize, minimize, stress or diff_maximize task with `alg`.
pub fn solve(task: &Task, alg: AlgorithmName) -> Result<Outcome, CliError> {
    let out = match task.doc.kind {
        TaskKind::Maximize | TaskKind::Stress => maximize(task, &task.models[0], &task.constraints.single, alg)?,
        TaskKind::Minimize => minimize(task, &task.models[0], &task.constraints.single, alg)?,
        TaskKind::DiffMaximize => diff_maximize(task, alg)?,
        TaskKind::Robustness | TaskKind::RandomTasks => {
            return Err(CliError::Input(format!("{:?} tasks are not single runs", task.doc.kind)))
        }
    };
    check_outcome(task, &out)?;
    Ok(out)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= WITNESS_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Trace monotonicity, and the witness reproducing the bound it certifies.
fn check_outcome(task: &Task, out: &Outcome) -> Result<(), CliError> {
    out.trace.check_monotone().map_err(CliError::Internal)?;
    let Some(last) = out.trace.last() else {
        return Err(CliError::Internal("empty trace".into()));
    };
    let m = &task.models;
    let (value, bound) = match (task.doc.kind, out.witnesses.as_slice()) {
        (_, []) => return Ok(()),
        (TaskKind::DiffMaximize, [x1, x2]) => (m[1].eval(x2)? - m[0].eval(x1)?, last.lower),
        (TaskKind::Minimize, [x]) => (m[0].eval(x)?, last.upper),
        (_, [x]) => (m[0].eval(x)?, last.lower),
        _ => return Err(CliError::Internal("unexpected witness count".into())),
    };
    if !close(value, bound) {
        return Err(CliError::Internal(format!(
            "witness evaluates to {value}, but the reported bound is {bound}"
        )));
    }
    Ok(())
}

pub struct RobustnessOutcome {
    pub result: RobustnessResult,
    /// Bounds on the distance to the closest adversarial example: `lower`
    /// is the largest radius proven clean, `upper` the closest witness.
    pub trace: BoundsTrace,
}

pub fn robustness(task: &Task, alg: AlgorithmName) -> Result<RobustnessOutcome, CliError> {
    let doc = task.doc.robustness.as_ref().expect("checked when the task was loaded");
    let algorithm = match alg {
        AlgorithmName::Veritas => Algorithm::Veritas(search_config(&task.doc.config)),
        AlgorithmName::Merge => Algorithm::Merge(merge_config(&task.doc.config)),
        AlgorithmName::Oracle => {
            return Err(CliError::Input("robustness tasks run on veritas or merge".into()))
        }
    };
    let mut q = RobustnessQuery::new(task.models.clone(), doc.x.clone(), doc.source, doc.target);
    q.delta_start = doc.delta_start.unwrap_or(q.delta_start);
    q.steps = doc.steps.unwrap_or(q.steps);
    q.integer_grid = doc.integer_grid;
    let result = robustness_search(&q, &algorithm)?;

    let mut trace = BoundsTrace::new();
    let (mut upper, mut lower) = (f64::INFINITY, 0.0);
    trace.push(0.0, upper, lower, None);
    for s in &result.per_step {
        let mut changed = false;
        if s.decision == StepDecision::NoAdversarial && s.delta > lower {
            lower = s.delta;
            changed = true;
        }
        let mut witness = None;
        if let Some(w) = &s.witness {
            let d = w.iter().zip(&q.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if d < upper {
                upper = d;
                witness = Some(Witness::Single(w.clone()));
                changed = true;
            }
        }
        if changed {
            trace.push(s.t, upper, lower, witness);
        }
    }
    if result.proven_exact {
        // on an integer grid the clean radius rounds up to the witness distance
        trace.push(trace.last().unwrap().t, upper, upper, None);
        trace.status = Status::Exact;
    } else {
        trace.status = Status::Timeout;
    }
    trace.check_monotone().map_err(CliError::Internal)?;
    for s in &result.per_step {
        if let Some(w) = &s.witness {
            if q.models[q.target].eval(w)? <= q.models[q.source].eval(w)? {
                return Err(CliError::Internal(format!("step witness at delta {} is not adversarial", s.delta)));
            }
        }
    }
    Ok(RobustnessOutcome { result, trace })
}

/// Seed of the `index`-th generated task of a batch.
pub fn task_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Target fraction of the `index`-th task; fractions are used round robin.
pub fn task_fraction(fractions: &[f64], index: usize) -> f64 {
    fractions[index % fractions.len()]
}

/// Generates the `index`-th random box constraint for `ens`.
pub fn random_constraint(
    ens: &Ensemble,
    fractions: &[f64],
    seed: u64,
    index: usize,
) -> treeverify::Result<treeverify::tasks::RandomTaskSpec> {
    generate_random_task(ens, task_fraction(fractions, index), task_seed(seed, index))
}
