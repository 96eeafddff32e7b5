#![allow(dead_code)]

use treeverify::oracle::{enumerate_configs, OutputConfig, DEFAULT_LIMIT};
use treeverify::random::small_corpus_member;
use treeverify::search::{SearchContext, SearchState};
use treeverify::{Ensemble, Hyperbox, Tree, TreeNode};

pub const CORPUS_SEED: u64 = 20_240_601;

pub fn stump(attr: usize, tau: f64, l: f64, r: f64) -> Tree {
    Tree::new(&TreeNode::split(attr, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
}

pub fn f1() -> Ensemble {
    Ensemble::new(vec![stump(0, 2.0, 1.0, 3.0), stump(0, 4.0, 10.0, 5.0)], 1).unwrap()
}

pub fn f2() -> Ensemble {
    Ensemble::new(vec![stump(0, 2.0, 1.0, 3.0), stump(0, 2.0, 10.0, 5.0)], 1).unwrap()
}

pub fn corpus(n: usize) -> Vec<Ensemble> {
    (0..n as u64).map(|i| small_corpus_member(CORPUS_SEED, i)).collect()
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// `a <= b` up to the same relative tolerance as [`close`].
pub fn le(a: f64, b: f64) -> bool {
    a <= b || close(a, b)
}

pub fn configs(ens: &Ensemble) -> Vec<OutputConfig> {
    enumerate_configs(ens, None, &Hyperbox::unconstrained(), DEFAULT_LIMIT).unwrap()
}

pub fn oracle_max(ens: &Ensemble) -> f64 {
    configs(ens).iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max)
}

/// Every state reachable from the root by plain expansion, parents before
/// children.
pub fn all_states(ctx: &SearchContext) -> Vec<SearchState> {
    let mut out = Vec::new();
    let mut stack: Vec<SearchState> = ctx.root().into_iter().collect();
    while let Some(s) = stack.pop() {
        stack.extend(ctx.expand(&s));
        out.push(s);
    }
    out
}
