//! The k-partite leaf graph of an ensemble and the Merge baseline.
//!
//! The graph has one independent set per tree and one vertex per reachable
//! leaf; two vertices are adjacent when their boxes overlap. A max-clique
//! (one vertex per set, pairwise adjacent) is exactly an output
//! configuration. Merge repeatedly fuses groups of adjacent sets into a
//! single set of joint cliques, which tightens the sum-of-maxima bound.

use std::time::{Duration, Instant};

use crate::ensemble::{Ensemble, Hyperbox};
use crate::search::extract_witness;
use crate::trace::{BoundsTrace, Status, Witness};

/// Rough size of one vertex without its box and origin list.
const VERTEX_HEADER_BYTES: usize = 64;
/// Size of one stored box entry.
const BOX_ENTRY_BYTES: usize = 24;
/// Size of one `(tree, leaf)` origin pair.
const ORIGIN_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub bbox: Hyperbox,
    pub value: f64,
    /// The `(tree index, leaf id)` pairs fused into this vertex.
    pub origin: Vec<(usize, usize)>,
}

impl Vertex {
    pub fn estimated_bytes(&self) -> usize {
        VERTEX_HEADER_BYTES + self.bbox.len() * BOX_ENTRY_BYTES + self.origin.len() * ORIGIN_BYTES
    }
}

/// Independent sets of vertices, each sorted by descending value.
#[derive(Debug, Clone, PartialEq)]
pub struct KPartiteGraph {
    sets: Vec<Vec<Vertex>>,
    base_score: f64,
}

/// Builds the graph restricted to `prune`. `None` when some tree has no leaf
/// overlapping `prune`, which proves the problem infeasible.
pub fn build_graph(ens: &Ensemble, prune: &Hyperbox) -> Option<KPartiteGraph> {
    let mut sets = Vec::with_capacity(ens.num_trees());
    for (m, tree) in ens.trees().iter().enumerate() {
        let mut set: Vec<Vertex> = tree
            .leaves()
            .filter_map(|(leaf, value, bbox)| {
                Some(Vertex {
                    bbox: bbox.intersect(prune)?,
                    value,
                    origin: vec![(m, leaf)],
                })
            })
            .collect();
        if set.is_empty() {
            return None;
        }
        sort_desc(&mut set);
        sets.push(set);
    }
    Some(KPartiteGraph {
        sets,
        base_score: ens.base_score(),
    })
}

fn sort_desc(set: &mut [Vertex]) {
    set.sort_by(|a, b| b.value.total_cmp(&a.value));
}

/// Why a merge step did not produce a new graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeAbort {
    Memory,
    Timeout,
    /// A group of sets has no joint clique.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    /// Number of adjacent sets fused per group (`L`); at least 2.
    pub group_size: usize,
    pub time_budget: Option<Duration>,
    pub memory_budget: Option<usize>,
    /// Stop after this many merge rounds.
    pub max_steps: Option<usize>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            group_size: 2,
            time_budget: None,
            memory_budget: Some(4096 << 20),
            max_steps: None,
        }
    }
}

impl KPartiteGraph {
    pub fn sets(&self) -> &[Vec<Vertex>] {
        &self.sets
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn vertex_count(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn estimated_bytes(&self) -> usize {
        self.sets.iter().flatten().map(Vertex::estimated_bytes).sum()
    }

    /// Sum over sets of the largest vertex value.
    pub fn upper_bound(&self) -> f64 {
        self.base_score + self.sets.iter().map(|s| s[0].value).sum::<f64>()
    }

    /// Sum over sets of the smallest vertex value.
    pub fn lower_bound(&self) -> f64 {
        self.base_score + self.sets.iter().map(|s| s[s.len() - 1].value).sum::<f64>()
    }

    /// Whether two vertices share an edge.
    pub fn adjacent(a: &Vertex, b: &Vertex) -> bool {
        a.bbox.overlaps(&b.bbox)
    }

    /// Counts max-cliques by pairwise adjacency, stopping at `limit`.
    pub fn count_max_cliques(&self, limit: usize) -> usize {
        fn go<'a>(sets: &'a [Vec<Vertex>], chosen: &mut Vec<&'a Vertex>, count: &mut usize, limit: usize) {
            if *count >= limit {
                return;
            }
            let Some((set, rest)) = sets.split_first() else {
                *count += 1;
                return;
            };
            for v in set {
                if chosen.iter().all(|c| KPartiteGraph::adjacent(c, v)) {
                    chosen.push(v);
                    go(rest, chosen, count, limit);
                    chosen.pop();
                }
            }
        }
        let mut count = 0;
        go(&self.sets, &mut Vec::new(), &mut count, limit);
        count
    }

    /// One Merge round: sets are taken left to right in groups of
    /// `cfg.group_size` and each group is replaced by the set of its joint
    /// cliques. A trailing group of one set is carried over unchanged.
    pub fn merge_step(&self, cfg: &MergeConfig) -> Result<KPartiteGraph, MergeAbort> {
        self.merge_step_until(cfg, None)
    }

    pub(crate) fn merge_step_until(
        &self,
        cfg: &MergeConfig,
        deadline: Option<Instant>,
    ) -> Result<KPartiteGraph, MergeAbort> {
        let l = cfg.group_size.max(2);
        let mut budget = Budget {
            limit: cfg.memory_budget.unwrap_or(usize::MAX),
            used: self.estimated_bytes(),
            deadline,
            ticks: 0,
        };
        let mut sets = Vec::with_capacity(self.sets.len().div_ceil(l));
        for group in self.sets.chunks(l) {
            if group.len() == 1 {
                sets.push(group[0].clone());
                continue;
            }
            // the inputs stay alive until the round finishes
            let mut merged = Vec::new();
            merge_group(group, None, &mut Vec::new(), &mut merged, &mut budget)?;
            if merged.is_empty() {
                return Err(MergeAbort::Infeasible);
            }
            sort_desc(&mut merged);
            sets.push(merged);
        }
        Ok(KPartiteGraph {
            sets,
            base_score: self.base_score,
        })
    }
}

struct Budget {
    limit: usize,
    used: usize,
    deadline: Option<Instant>,
    ticks: u32,
}

impl Budget {
    fn charge(&mut self, bytes: usize) -> Result<(), MergeAbort> {
        self.used += bytes;
        if self.used > self.limit {
            return Err(MergeAbort::Memory);
        }
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(MergeAbort::Timeout);
        }
        Ok(())
    }
}

fn merge_group<'a>(
    group: &'a [Vec<Vertex>],
    bbox: Option<&Hyperbox>,
    chosen: &mut Vec<&'a Vertex>,
    out: &mut Vec<Vertex>,
    budget: &mut Budget,
) -> Result<(), MergeAbort> {
    let Some((set, rest)) = group.split_first() else {
        let v = Vertex {
            bbox: bbox.cloned().unwrap_or_default(),
            value: chosen.iter().map(|v| v.value).sum(),
            origin: chosen.iter().flat_map(|v| v.origin.iter().copied()).collect(),
        };
        budget.charge(v.estimated_bytes())?;
        out.push(v);
        return Ok(());
    };
    for v in set {
        let joint = match bbox {
            None => Some(v.bbox.clone()),
            Some(b) => b.intersect(&v.bbox),
        };
        if let Some(joint) = joint {
            chosen.push(v);
            merge_group(rest, Some(&joint), chosen, out, budget)?;
            chosen.pop();
        }
    }
    Ok(())
}

/// Runs Merge on the graph of `ens` restricted to `prune`, recording the
/// bounds after every round.
pub fn run_merge(ens: &Ensemble, prune: &Hyperbox, cfg: &MergeConfig) -> BoundsTrace {
    let start = Instant::now();
    let deadline = cfg.time_budget.map(|b| start + b);
    let elapsed = || start.elapsed().as_secs_f64();
    let mut trace = BoundsTrace::new();

    let Some(mut graph) = build_graph(ens, prune) else {
        trace.push(elapsed(), f64::NEG_INFINITY, f64::NEG_INFINITY, None);
        trace.status = Status::Infeasible;
        return trace;
    };
    let mut steps = 0usize;
    loop {
        if graph.num_sets() == 1 {
            let best = &graph.sets[0][0];
            let value = graph.base_score + best.value;
            let witness = extract_witness(&best.bbox, ens.num_attributes());
            trace.push(elapsed(), value, value, Some(Witness::Single(witness)));
            trace.status = Status::Exact;
            return trace;
        }
        trace.push(elapsed(), graph.upper_bound(), graph.lower_bound(), None);
        if deadline.is_some_and(|d| Instant::now() >= d) || cfg.max_steps.is_some_and(|s| steps >= s) {
            trace.status = Status::Timeout;
            return trace;
        }
        match graph.merge_step_until(cfg, deadline) {
            Ok(next) => {
                graph = next;
                steps += 1;
            }
            Err(abort) => {
                trace.status = match abort {
                    MergeAbort::Memory => Status::Memory,
                    MergeAbort::Timeout => Status::Timeout,
                    MergeAbort::Infeasible => Status::Infeasible,
                };
                return trace;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Interval, Tree, TreeNode};

    fn stump(tau: f64, l: f64, r: f64) -> Tree {
        Tree::new(&TreeNode::split(0, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
    }

    fn f1() -> Ensemble {
        Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap()
    }

    fn f2() -> Ensemble {
        Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(2.0, 10.0, 5.0)], 1).unwrap()
    }

    #[test]
    fn graph_has_one_set_per_tree() {
        let g = build_graph(&f1(), &Hyperbox::unconstrained()).unwrap();
        assert_eq!(g.num_sets(), 2);
        assert!(g.sets().iter().all(|s| s.len() == 2));
        assert_eq!(g.upper_bound(), 13.0);
        assert_eq!(g.lower_bound(), 6.0);
    }

    #[test]
    fn prune_keeps_right_leaves() {
        let prune = Hyperbox::from_intervals([(0, Interval::at_least(4.0))]).unwrap();
        let g = build_graph(&f1(), &prune).unwrap();
        assert_eq!(g.sets()[0].len(), 1);
        assert_eq!(g.sets()[0][0].origin, vec![(0, 1)]);
        assert_eq!(g.sets()[1][0].origin, vec![(1, 1)]);
        let none = Hyperbox::from_intervals([(0, Interval::new(10.0, 11.0).unwrap())]).unwrap();
        let single = Ensemble::new(vec![stump(2.0, 1.0, 3.0), Tree::constant(0.0)], 1).unwrap();
        assert!(build_graph(&single, &none).is_some());
        let restricted = Ensemble::new(
            vec![Tree::new(&TreeNode::split(
                0,
                2.0,
                TreeNode::leaf(0.0),
                TreeNode::split(0, 5.0, TreeNode::leaf(1.0), TreeNode::leaf(2.0)),
            ))
            .unwrap()],
            1,
        )
        .unwrap();
        assert_eq!(build_graph(&restricted, &none).unwrap().vertex_count(), 1);
    }

    #[test]
    fn merging_f1_drops_incompatible_pair() {
        let g = build_graph(&f1(), &Hyperbox::unconstrained()).unwrap();
        let m = g.merge_step(&MergeConfig::default()).unwrap();
        assert_eq!(m.num_sets(), 1);
        let values: Vec<f64> = m.sets()[0].iter().map(|v| v.value).collect();
        assert_eq!(values, vec![13.0, 11.0, 8.0]);
        assert_eq!(m.sets()[0][0].origin, vec![(0, 1), (1, 0)]);
        assert_eq!(m.upper_bound(), 13.0);
    }

    #[test]
    fn merging_f2_tightens_bound() {
        let g = build_graph(&f2(), &Hyperbox::unconstrained()).unwrap();
        assert_eq!(g.upper_bound(), 13.0);
        let m = g.merge_step(&MergeConfig::default()).unwrap();
        assert_eq!(m.upper_bound(), 11.0);
        assert_eq!(m.lower_bound(), 8.0);
        let trace = run_merge(&f2(), &Hyperbox::unconstrained(), &MergeConfig::default());
        assert_eq!(trace.status, Status::Exact);
        assert_eq!(trace.entries.len(), 2);
        assert_eq!(trace.final_upper(), Some(11.0));
        assert_eq!(trace.final_lower(), Some(11.0));
        let w = trace.best_witness().unwrap().primary();
        assert_eq!(f2().eval(w).unwrap(), 11.0);
    }

    #[test]
    fn eight_trees_take_three_rounds() {
        let trees = (0..8).map(|i| stump(i as f64, 0.0, 1.0)).collect();
        let e = Ensemble::new(trees, 1).unwrap();
        let trace = run_merge(&e, &Hyperbox::unconstrained(), &MergeConfig::default());
        assert_eq!(trace.status, Status::Exact);
        assert_eq!(trace.entries.len(), 4);
    }

    #[test]
    fn zero_time_budget_keeps_initial_bounds() {
        let cfg = MergeConfig {
            time_budget: Some(Duration::ZERO),
            ..MergeConfig::default()
        };
        let trace = run_merge(&f1(), &Hyperbox::unconstrained(), &cfg);
        assert_eq!(trace.status, Status::Timeout);
        assert_eq!(trace.entries.len(), 1);
        assert_eq!(trace.final_upper(), Some(13.0));
    }

    #[test]
    fn tiny_memory_budget_aborts() {
        let cfg = MergeConfig {
            memory_budget: Some(10),
            ..MergeConfig::default()
        };
        let g = build_graph(&f1(), &Hyperbox::unconstrained()).unwrap();
        assert_eq!(g.merge_step(&cfg), Err(MergeAbort::Memory));
        assert_eq!(run_merge(&f1(), &Hyperbox::unconstrained(), &cfg).status, Status::Memory);
    }

    #[test]
    fn single_vertex_set_does_not_grow() {
        let prune = Hyperbox::from_intervals([(0, Interval::at_least(4.0))]).unwrap();
        let e = Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap();
        let mut g = build_graph(&e, &Hyperbox::unconstrained()).unwrap();
        g.sets[1] = build_graph(&e, &prune).unwrap().sets[1].clone();
        let m = g.merge_step(&MergeConfig::default()).unwrap();
        assert!(m.sets()[0].len() <= 2);
    }

    #[test]
    fn clique_count_matches_merge() {
        let g = build_graph(&f1(), &Hyperbox::unconstrained()).unwrap();
        assert_eq!(g.count_max_cliques(usize::MAX), 3);
        assert_eq!(g.count_max_cliques(2), 2);
    }
}
