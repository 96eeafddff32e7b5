use crate::constraints::{Constraint, StateConstraint};
use crate::ensemble::{Ensemble, Example, Hyperbox};
use crate::graph::build_graph;

use super::{extract_witness, TreeOrder};

/// Which way the heuristic bounds the remaining trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Sum of the largest compatible leaf value per remaining tree.
    Max,
    /// Sum of the smallest compatible leaf value per remaining tree.
    Min,
}

/// A partial output configuration: one leaf for each of the first
/// `depth` trees in the context's expansion order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    /// `leaves[i]` is the chosen leaf of the i-th tree in expansion order.
    pub leaves: Vec<u32>,
    /// Intersection of the chosen leaves' boxes and the prune box.
    pub bbox: Hyperbox,
    /// Sum of the chosen leaf values.
    pub g: f64,
    /// Heuristic estimate for the remaining trees.
    pub h: f64,
}

impl SearchState {
    pub fn depth(&self) -> usize {
        self.leaves.len()
    }

    /// `g + eps * h`.
    pub fn f(&self, eps: f64) -> f64 {
        if eps == 1.0 {
            self.g + self.h
        } else {
            self.g + eps * self.h
        }
    }

    pub(crate) fn estimated_bytes(&self) -> usize {
        48 + self.leaves.len() * 4 + self.bbox.len() * 24
    }
}

#[derive(Debug, Clone)]
struct TreeLeaves {
    tree: usize,
    /// `(leaf id, value, pruned box)`, sorted by descending value.
    leaves: Vec<(u32, f64, Hyperbox)>,
}

/// Everything needed to expand and score states of one ensemble: the
/// pruned leaves of each tree in expansion order plus the constraint.
#[derive(Debug, Clone)]
pub struct SearchContext {
    order: Vec<TreeLeaves>,
    root_box: Option<Hyperbox>,
    constraint: Constraint,
    check_states: bool,
    objective: Objective,
    num_attributes: usize,
    base_score: f64,
}

impl SearchContext {
    pub fn new(
        ens: &Ensemble,
        constraint: &Constraint,
        prune: &Hyperbox,
        tree_order: TreeOrder,
        objective: Objective,
    ) -> Self {
        let root_box = constraint
            .prune_box_checked()
            .and_then(|b| b.intersect(prune));
        let graph = root_box.as_ref().and_then(|b| build_graph(ens, b));
        let mut order: Vec<TreeLeaves> = match &graph {
            Some(g) => g
                .sets()
                .iter()
                .enumerate()
                .map(|(tree, set)| TreeLeaves {
                    tree,
                    leaves: set
                        .iter()
                        .map(|v| (v.origin[0].1 as u32, v.value, v.bbox.clone()))
                        .collect(),
                })
                .collect(),
            None => Vec::new(),
        };
        if tree_order == TreeOrder::ByValueSpread {
            let spread = |t: &TreeLeaves| t.leaves[0].1 - t.leaves[t.leaves.len() - 1].1;
            order.sort_by(|a, b| spread(b).total_cmp(&spread(a)).then(a.tree.cmp(&b.tree)));
        }
        SearchContext {
            root_box: graph.and(root_box),
            order,
            check_states: constraint.needs_state_check(),
            constraint: constraint.clone(),
            objective,
            num_attributes: ens.num_attributes(),
            base_score: ens.base_score(),
        }
    }

    /// Number of trees, i.e. the depth of a complete state.
    pub fn num_trees(&self) -> usize {
        self.order.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    /// Ensemble tree index of the tree expanded at `depth`.
    pub fn tree_at(&self, depth: usize) -> usize {
        self.order[depth].tree
    }

    /// The empty state, or `None` when the pruning already proves
    /// infeasibility or the constraint rejects the whole prune box.
    pub fn root(&self) -> Option<SearchState> {
        let bbox = self.root_box.clone()?;
        if self.check_states && !self.constraint.accepts(&bbox) {
            return None;
        }
        let h = self.heuristic_for(0, &bbox);
        Some(SearchState {
            leaves: Vec::new(),
            bbox,
            g: 0.0,
            h,
        })
    }

    pub fn is_goal(&self, state: &SearchState) -> bool {
        state.depth() == self.order.len()
    }

    /// Heuristic of a state whose first `depth` trees are fixed and whose box
    /// is `bbox`. Dead states (a remaining tree has no compatible leaf) get
    /// `-inf` under `Max` and `+inf` under `Min`.
    pub fn heuristic_for(&self, depth: usize, bbox: &Hyperbox) -> f64 {
        let mut sum = 0.0;
        for t in &self.order[depth..] {
            let best = match self.objective {
                Objective::Max => t.leaves.iter().find(|(_, _, b)| b.overlaps(bbox)),
                Objective::Min => t.leaves.iter().rev().find(|(_, _, b)| b.overlaps(bbox)),
            };
            match best {
                Some((_, v, _)) => sum += v,
                None => {
                    return match self.objective {
                        Objective::Max => f64::NEG_INFINITY,
                        Objective::Min => f64::INFINITY,
                    }
                }
            }
        }
        sum
    }

    pub fn heuristic(&self, state: &SearchState) -> f64 {
        self.heuristic_for(state.depth(), &state.bbox)
    }

    /// Children of `state`: one per leaf of the next tree that overlaps the
    /// state's box and whose joint box the constraint accepts.
    pub fn expand(&self, state: &SearchState) -> Vec<SearchState> {
        let mut out = Vec::new();
        self.expand_into(state, &mut out);
        out
    }

    pub(crate) fn expand_into(&self, state: &SearchState, out: &mut Vec<SearchState>) {
        let depth = state.depth();
        let Some(next) = self.order.get(depth) else {
            return;
        };
        for (leaf, value, lbox) in &next.leaves {
            let Some(bbox) = state.bbox.intersect(lbox) else {
                continue;
            };
            if self.check_states && !self.constraint.accepts(&bbox) {
                continue;
            }
            let h = self.heuristic_for(depth + 1, &bbox);
            let mut leaves = Vec::with_capacity(depth + 1);
            leaves.extend_from_slice(&state.leaves);
            leaves.push(*leaf);
            out.push(SearchState {
                leaves,
                bbox,
                g: state.g + value,
                h,
            });
        }
    }

    /// Chosen `(tree index, leaf id)` pairs sorted by tree index.
    pub fn leaf_refs(&self, state: &SearchState) -> Vec<(usize, usize)> {
        let mut refs: Vec<(usize, usize)> = state
            .leaves
            .iter()
            .enumerate()
            .map(|(d, &l)| (self.order[d].tree, l as usize))
            .collect();
        refs.sort_unstable();
        refs
    }

    pub fn witness(&self, state: &SearchState) -> Example {
        extract_witness(&state.bbox, self.num_attributes)
    }
}
