use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{predict, Algorithm};
use crate::constraints::{Constraint, LinfBall};
use crate::ensemble::{Ensemble, Example, Hyperbox, Interval};
use crate::error::{Error, Result};
use crate::graph::run_merge;
use crate::search::{run_search, Problem, Sense};
use crate::trace::Status;

/// Find the smallest L-inf perturbation of `x` that makes class `target`
/// outscore class `source`.
#[derive(Debug, Clone)]
pub struct RobustnessQuery {
    /// One-vs-all score model per class.
    pub models: Vec<Ensemble>,
    pub x: Example,
    pub source: usize,
    pub target: usize,
    pub delta_start: f64,
    pub steps: usize,
    /// Inputs take integer values only.
    pub integer_grid: bool,
}

impl RobustnessQuery {
    pub fn new(models: Vec<Ensemble>, x: Example, source: usize, target: usize) -> Self {
        RobustnessQuery {
            models,
            x,
            source,
            target,
            delta_start: 20.0,
            steps: 10,
            integer_grid: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.models.len();
        if self.source >= n || self.target >= n || self.source == self.target {
            return Err(Error::InvalidConfig(format!(
                "source {} and target {} must be distinct classes below {n}",
                self.source, self.target
            )));
        }
        if !(self.delta_start > 0.0 && self.delta_start.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta_start must be positive, got {}",
                self.delta_start
            )));
        }
        let attrs = self.models[0].num_attributes();
        if let Some(m) = self.models.iter().find(|m| m.num_attributes() != attrs) {
            return Err(Error::AttributeMismatch(attrs, m.num_attributes()));
        }
        let predicted = predict(&self.models, &self.x)?;
        if predicted != self.source {
            return Err(Error::InvalidConfig(format!(
                "x is classified as {predicted}, not as source class {}",
                self.source
            )));
        }
        Ok(())
    }

    /// Search box for radius `delta`. On an integer grid the box is shrunk
    /// to the integers strictly inside the ball.
    fn ball_box(&self, delta: f64) -> Hyperbox {
        if !self.integer_grid {
            return LinfBall {
                center: self.x.clone(),
                radius: delta,
            }
            .to_box();
        }
        Hyperbox::from_intervals(self.x.iter().enumerate().filter_map(|(j, &c)| {
            let first = (c - delta).floor() + 1.0;
            let last = (c + delta).ceil() - 1.0;
            Interval::new(first, last + 1.0).map(|iv| (j, iv))
        }))
        .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecision {
    /// The upper bound is negative: no adversarial example within `delta`.
    NoAdversarial,
    /// The upper bound is non-negative, so one may exist.
    MayExist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub delta: f64,
    pub upper: f64,
    pub lower: f64,
    pub status: Status,
    pub decision: StepDecision,
    /// A verified adversarial example found in this step.
    pub witness: Option<Example>,
    /// Seconds since the search started, taken when the step finished.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    /// Largest radius proven free of adversarial examples.
    pub delta_lower: f64,
    pub proven_exact: bool,
    /// Closest verified adversarial example found.
    pub adversarial_witness: Option<Example>,
    pub witness_distance: Option<f64>,
    pub per_step: Vec<StepRecord>,
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Doubling-then-bisection search over the radius. Starting at
/// `delta_start`, a step with a negative upper bound proves the ball clean
/// and the radius grows (doubling until a dirty radius is known, bisecting
/// afterwards); any other step shrinks the radius toward the clean one.
pub fn robustness_search(q: &RobustnessQuery, algorithm: &Algorithm) -> Result<RobustnessResult> {
    q.validate()?;
    let start = Instant::now();
    let diff = q.models[q.target].difference(&q.models[q.source])?;
    let none = Constraint::none();

    let mut lo = 0.0;
    let mut hi: Option<f64> = None;
    let mut delta = q.delta_start;
    let mut per_step = Vec::with_capacity(q.steps);

    for _ in 0..q.steps {
        let evaluated = delta;
        let ball = q.ball_box(delta);
        let (status, upper, lower, candidate) = match algorithm {
            Algorithm::Veritas(cfg) => {
                let problem = Problem {
                    ensemble: &diff,
                    constraint: &none,
                    prune: ball,
                    sense: Sense::Maximize,
                };
                let r = run_search(&problem, cfg);
                let candidate = r
                    .best()
                    .filter(|s| s.value > 0.0)
                    .map(|s| s.boxes[0].closest_point(&q.x));
                let last = r.trace.last().expect("search traces are never empty");
                (r.trace.status, last.upper, last.lower, candidate)
            }
            Algorithm::Merge(cfg) => {
                let t = run_merge(&diff, &ball, cfg);
                let (u, l) = t.last().map_or((f64::NEG_INFINITY, f64::NEG_INFINITY), |e| (e.upper, e.lower));
                let candidate = t.best_witness().map(|w| w.primary().clone());
                (t.status, u, l, candidate)
            }
        };
        let witness = match candidate {
            Some(w) if linf(&w, &q.x) < delta && is_adversarial(q, &w)? => Some(w),
            _ => None,
        };
        let decision = if upper < 0.0 {
            lo = delta;
            delta = hi.map_or(2.0 * delta, |h| (lo + h) / 2.0);
            StepDecision::NoAdversarial
        } else {
            hi = Some(delta);
            delta = (lo + delta) / 2.0;
            StepDecision::MayExist
        };
        per_step.push(StepRecord {
            delta: evaluated,
            upper,
            lower,
            status,
            decision,
            witness,
            t: start.elapsed().as_secs_f64(),
        });
    }

    let best = per_step
        .iter()
        .filter_map(|s| s.witness.as_ref().map(|w| (linf(w, &q.x), w)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let proven_exact = q.integer_grid
        && best.is_some_and(|(d1, _)| {
            per_step
                .iter()
                .filter(|s| s.decision == StepDecision::NoAdversarial)
                .any(|s| d1.floor() == s.delta.ceil())
        });
    Ok(RobustnessResult {
        delta_lower: lo,
        proven_exact,
        witness_distance: best.map(|(d, _)| d),
        adversarial_witness: best.map(|(_, w)| w.clone()),
        per_step,
    })
}

fn is_adversarial(q: &RobustnessQuery, x: &[f64]) -> Result<bool> {
    Ok(q.models[q.target].eval(x)? - q.models[q.source].eval(x)? > 0.0)
}
