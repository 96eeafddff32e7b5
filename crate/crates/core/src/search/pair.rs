use crate::constraints::{JointConstraint, PairConstraint};
use crate::ensemble::{Ensemble, Example, Hyperbox};

use super::context::{Objective, SearchContext, SearchState};
use super::{pick_in, TreeOrder};

/// A state of the difference problem: one partial configuration per model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    /// State over the subtracted model (minimized).
    pub first: SearchState,
    /// State over the maximized model.
    pub second: SearchState,
}

impl PairState {
    pub fn g(&self) -> f64 {
        self.second.g - self.first.g
    }

    pub fn h(&self) -> f64 {
        self.second.h - self.first.h
    }

    pub fn f(&self, eps: f64) -> f64 {
        self.g() + eps * self.h()
    }
}

/// Which half of a [`PairState`] gets the next leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    First,
    Second,
}

/// Search context for `max T2(x2) - T1(x1)` under a joint constraint.
#[derive(Debug, Clone)]
pub struct PairContext {
    first: SearchContext,
    second: SearchContext,
    joint: Vec<PairConstraint>,
}

impl PairContext {
    pub fn new(
        first: &Ensemble,
        second: &Ensemble,
        constraint: &JointConstraint,
        prune_first: &Hyperbox,
        prune_second: &Hyperbox,
        tree_order: TreeOrder,
    ) -> Self {
        PairContext {
            first: SearchContext::new(first, &constraint.first, prune_first, tree_order, Objective::Min),
            second: SearchContext::new(second, &constraint.second, prune_second, tree_order, Objective::Max),
            joint: constraint.joint.clone(),
        }
    }

    pub fn first(&self) -> &SearchContext {
        &self.first
    }

    pub fn second(&self) -> &SearchContext {
        &self.second
    }

    fn joint_accepts(&self, a: &Hyperbox, b: &Hyperbox) -> bool {
        self.joint.iter().all(|c| c.accepts(a, b))
    }

    pub fn root(&self) -> Option<PairState> {
        let first = self.first.root()?;
        let second = self.second.root()?;
        self.joint_accepts(&first.bbox, &second.bbox)
            .then_some(PairState { first, second })
    }

    /// Instances alternate, first before second at equal depth; once one
    /// instance is complete the other continues alone.
    pub fn turn(&self, s: &PairState) -> Option<Turn> {
        let (d1, d2) = (s.first.depth(), s.second.depth());
        let (m1, m2) = (self.first.num_trees(), self.second.num_trees());
        if d1 < m1 && (d2 >= m2 || d1 <= d2) {
            Some(Turn::First)
        } else if d2 < m2 {
            Some(Turn::Second)
        } else {
            None
        }
    }

    pub fn is_goal(&self, s: &PairState) -> bool {
        self.turn(s).is_none()
    }

    /// `h2(s2) - h1(s1)`.
    pub fn heuristic(&self, s: &PairState) -> f64 {
        self.second.heuristic(&s.second) - self.first.heuristic(&s.first)
    }

    pub fn expand(&self, s: &PairState) -> Vec<PairState> {
        let mut out = Vec::new();
        self.expand_into(s, &mut out);
        out
    }

    pub(crate) fn expand_into(&self, s: &PairState, out: &mut Vec<PairState>) {
        let mut children = Vec::new();
        match self.turn(s) {
            Some(Turn::First) => {
                self.first.expand_into(&s.first, &mut children);
                out.extend(
                    children
                        .into_iter()
                        .filter(|c| self.joint_accepts(&c.bbox, &s.second.bbox))
                        .map(|c| PairState {
                            first: c,
                            second: s.second.clone(),
                        }),
                );
            }
            Some(Turn::Second) => {
                self.second.expand_into(&s.second, &mut children);
                out.extend(
                    children
                        .into_iter()
                        .filter(|c| self.joint_accepts(&s.first.bbox, &c.bbox))
                        .map(|c| PairState {
                            first: s.first.clone(),
                            second: c,
                        }),
                );
            }
            None => {}
        }
    }

    /// A pair of inputs inside the two boxes that agree wherever a joint
    /// constraint ties them together.
    pub fn witness(&self, s: &PairState) -> (Example, Example) {
        pair_witness(
            &self.joint,
            &s.first.bbox,
            &s.second.bbox,
            self.first.num_attributes(),
            self.second.num_attributes(),
        )
    }
}

/// Points inside `first` and `second` that share a value on every attribute
/// some joint constraint ties together.
pub fn pair_witness(
    joint: &[PairConstraint],
    first: &Hyperbox,
    second: &Hyperbox,
    n1: usize,
    n2: usize,
) -> (Example, Example) {
    let mut x1 = super::extract_witness(first, n1);
    let mut x2 = super::extract_witness(second, n2);
    if !joint.is_empty() {
        for a in 0..n1.min(n2) {
            let tied = joint.iter().any(|c| match c {
                PairConstraint::DiffersOnly { attrs } => !attrs.contains(&a),
            });
            if tied {
                if let Some(iv) = first.get(a).intersect(&second.get(a)) {
                    let v = pick_in(iv);
                    x1[a] = v;
                    x2[a] = v;
                }
            }
        }
    }
    (x1, x2)
}
