//! The anytime best-first loop shared by single- and two-model search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use ordered_float::OrderedFloat;

use super::{SearchConfig, SearchResult, Solution};
use crate::trace::{BoundsTrace, Status};

pub(crate) trait Space {
    type State;

    fn root(&self) -> Option<Self::State>;
    fn expand_into(&self, s: &Self::State, out: &mut Vec<Self::State>);
    fn g(&self, s: &Self::State) -> f64;
    fn h(&self, s: &Self::State) -> f64;
    fn depth(&self, s: &Self::State) -> usize;
    fn is_goal(&self, s: &Self::State) -> bool;
    fn bytes(&self, s: &Self::State) -> usize;
    /// Constant added to `g` to obtain the model output (base scores).
    fn offset(&self) -> f64;
    fn solution(&self, s: &Self::State, value: f64, eps: f64, t: f64) -> Solution;
}

struct Entry<T> {
    key: f64,
    depth: usize,
    seq: u64,
    state: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Entry<T> {}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Entry<T> {
    // max-heap: larger key, then deeper, then older
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// OPEN list keyed by weighted f, with a multiset of unweighted f values
/// on the side so the sound upper bound is always available.
struct Open<T> {
    heap: BinaryHeap<Entry<T>>,
    unweighted: BTreeMap<OrderedFloat<f64>, usize>,
    seq: u64,
    bytes: usize,
}

impl<T> Open<T> {
    fn new() -> Self {
        Open {
            heap: BinaryHeap::new(),
            unweighted: BTreeMap::new(),
            seq: 0,
            bytes: 0,
        }
    }

    fn push<S: Space<State = T>>(&mut self, space: &S, state: T, eps: f64) {
        let (g, h) = (space.g(&state), space.h(&state));
        *self.unweighted.entry(OrderedFloat(g + h)).or_insert(0) += 1;
        self.bytes += space.bytes(&state);
        self.seq += 1;
        self.heap.push(Entry {
            key: g + eps * h,
            depth: space.depth(&state),
            seq: self.seq,
            state,
        });
    }

    fn pop<S: Space<State = T>>(&mut self, space: &S) -> Option<T> {
        let e = self.heap.pop()?;
        let f = OrderedFloat(space.g(&e.state) + space.h(&e.state));
        if let Some(c) = self.unweighted.get_mut(&f) {
            *c -= 1;
            if *c == 0 {
                self.unweighted.remove(&f);
            }
        }
        self.bytes -= space.bytes(&e.state);
        Some(e.state)
    }

    fn max_unweighted(&self) -> Option<f64> {
        self.unweighted.last_key_value().map(|(k, _)| k.0)
    }

    fn len(&self) -> usize {
        self.heap.len()
    }

    /// Recomputes every key for a new `eps` without discarding states.
    fn rekey<S: Space<State = T>>(&mut self, space: &S, eps: f64) {
        let mut entries = std::mem::take(&mut self.heap).into_vec();
        for e in &mut entries {
            e.key = space.g(&e.state) + eps * space.h(&e.state);
        }
        self.heap = BinaryHeap::from(entries);
    }
}

pub(crate) fn run<S: Space>(space: &S, cfg: &SearchConfig) -> SearchResult {
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64();
    let deadline = cfg.time_budget.map(|b| start + b);
    let off = space.offset();
    let mut eps = cfg.epsilon_start.clamp(f64::MIN_POSITIVE, 1.0);

    let mut result = SearchResult {
        trace: BoundsTrace::new(),
        solutions: Vec::new(),
        expansions: 0,
        peak_open: 0,
    };

    let Some(root) = space.root().filter(|r| space.h(r) > f64::NEG_INFINITY) else {
        result.trace.push(elapsed(), f64::NEG_INFINITY, f64::NEG_INFINITY, None);
        result.trace.status = Status::Infeasible;
        return result;
    };

    let mut open = Open::new();
    let mut upper = space.g(&root) + space.h(&root) + off;
    let mut lower = f64::NEG_INFINITY;
    open.push(space, root, eps);
    result.trace.push(elapsed(), upper, lower, None);

    let mut children = Vec::new();
    let status = loop {
        match open.max_unweighted() {
            None if lower > f64::NEG_INFINITY => break Status::Exact,
            None => break Status::Infeasible,
            Some(m) if lower >= m + off => break Status::Exact,
            Some(_) => {}
        }
        if deadline.is_some_and(|d| Instant::now() >= d)
            || cfg.node_budget.is_some_and(|n| result.expansions >= n)
        {
            break Status::Timeout;
        }
        if cfg.memory_budget.is_some_and(|m| open.bytes > m) {
            break Status::Memory;
        }

        let state = open.pop(space).expect("non-empty OPEN");
        let mut improved = false;
        if space.is_goal(&state) {
            let value = space.g(&state) + off;
            if value > lower {
                lower = value;
                improved = true;
                result
                    .solutions
                    .push(space.solution(&state, value, eps, elapsed()));
            }
            let raised = (eps + cfg.epsilon_step).min(1.0);
            if raised != eps {
                eps = raised;
                open.rekey(space, eps);
            }
        } else {
            result.expansions += 1;
            space.expand_into(&state, &mut children);
            for c in children.drain(..) {
                if space.h(&c) > f64::NEG_INFINITY {
                    open.push(space, c, eps);
                }
            }
            result.peak_open = result.peak_open.max(open.len());
        }

        let bound = open.max_unweighted().map_or(lower, |m| (m + off).max(lower));
        if bound < upper || improved {
            upper = upper.min(bound);
            let witness = improved.then(|| result.solutions.last().unwrap().witness.clone());
            // rounding in g and h can leave a solution a few ulps above the bound
            result.trace.push(elapsed(), upper, lower.min(upper), witness);
        }
    };

    if status == Status::Exact {
        upper = upper.min(lower);
    } else if status == Status::Infeasible {
        upper = f64::NEG_INFINITY;
    }
    result.trace.push(elapsed(), upper, lower.min(upper), None);
    result.trace.status = status;
    result
}
