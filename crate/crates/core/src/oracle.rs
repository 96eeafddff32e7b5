//! Brute-force enumeration of output configurations.
//!
//! Deliberately independent of the graph and search modules: it walks the
//! product of the trees' leaf lists directly, intersecting boxes as it goes.
//! Exponential; meant for small models and as ground truth in tests.

use crate::constraints::{Constraint, JointConstraint, StateConstraint};
use crate::ensemble::{Ensemble, Hyperbox};
use crate::error::{Error, Result};

/// Default ceiling on the number of enumerated configurations.
pub const DEFAULT_LIMIT: usize = 10_000_000;

/// One leaf per tree with a non-empty joint box.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Leaf id per tree, in tree order.
    pub leaves: Vec<usize>,
    pub bbox: Hyperbox,
    /// Base score plus the chosen leaf values.
    pub value: f64,
}

/// Every output configuration inside `prune` that `constraint` accepts, in
/// tree order then leaf-id order. Fails rather than truncating once more
/// than `limit` configurations exist.
pub fn enumerate_configs(
    ens: &Ensemble,
    constraint: Option<&Constraint>,
    prune: &Hyperbox,
    limit: usize,
) -> Result<Vec<OutputConfig>> {
    let mut out = Vec::new();
    let start = match constraint {
        Some(c) => match c.prune_box_checked().and_then(|b| b.intersect(prune)) {
            Some(b) => b,
            None => return Ok(out),
        },
        None => prune.clone(),
    };
    let mut leaves = Vec::with_capacity(ens.num_trees());
    walk(ens, constraint, start, 0.0, &mut leaves, limit, &mut out)?;
    Ok(out)
}

fn walk(
    ens: &Ensemble,
    constraint: Option<&Constraint>,
    bbox: Hyperbox,
    sum: f64,
    leaves: &mut Vec<usize>,
    limit: usize,
    out: &mut Vec<OutputConfig>,
) -> Result<()> {
    if constraint.is_some_and(|c| !c.accepts(&bbox)) {
        return Ok(());
    }
    let Some(tree) = ens.trees().get(leaves.len()) else {
        if out.len() >= limit {
            return Err(Error::SizeGuard(limit));
        }
        out.push(OutputConfig {
            leaves: leaves.clone(),
            bbox,
            value: ens.base_score() + sum,
        });
        return Ok(());
    };
    for (id, value, lbox) in tree.leaves() {
        if let Some(b) = bbox.intersect(lbox) {
            leaves.push(id);
            walk(ens, constraint, b, sum + value, leaves, limit, out)?;
            leaves.pop();
        }
    }
    Ok(())
}

fn best_by(
    configs: Vec<OutputConfig>,
    better: impl Fn(f64, f64) -> bool,
) -> Option<OutputConfig> {
    configs.into_iter().fold(None, |best, c| match best {
        Some(b) if !better(c.value, b.value) => Some(b),
        _ => Some(c),
    })
}

/// The configuration with the largest output; `None` when infeasible.
pub fn exact_max(
    ens: &Ensemble,
    constraint: Option<&Constraint>,
    prune: &Hyperbox,
) -> Result<Option<OutputConfig>> {
    Ok(best_by(enumerate_configs(ens, constraint, prune, DEFAULT_LIMIT)?, |a, b| a > b))
}

/// The configuration with the smallest output; `None` when infeasible.
pub fn exact_min(
    ens: &Ensemble,
    constraint: Option<&Constraint>,
    prune: &Hyperbox,
) -> Result<Option<OutputConfig>> {
    Ok(best_by(enumerate_configs(ens, constraint, prune, DEFAULT_LIMIT)?, |a, b| a < b))
}

/// `max value2 - value1` over pairs of configurations the joint constraint
/// accepts. `limit` bounds each side's enumeration.
pub fn exact_diff_max(
    first: &Ensemble,
    second: &Ensemble,
    constraint: &JointConstraint,
    limit: usize,
) -> Result<Option<(f64, OutputConfig, OutputConfig)>> {
    let u = Hyperbox::unconstrained();
    let c1 = enumerate_configs(first, Some(&constraint.first), &u, limit)?;
    let c2 = enumerate_configs(second, Some(&constraint.second), &u, limit)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            let d = b.value - a.value;
            if best.is_none_or(|(v, _, _)| d > v) && constraint.accepts_pair(&a.bbox, &b.bbox) {
                best = Some((d, i, j));
            }
        }
    }
    Ok(best.map(|(d, i, j)| (d, c1[i].clone(), c2[j].clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::PairConstraint;
    use crate::ensemble::{Interval, Tree, TreeNode};

    fn stump(tau: f64, l: f64, r: f64) -> Tree {
        Tree::new(&TreeNode::split(0, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
    }

    fn f1() -> Ensemble {
        Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap()
    }

    #[test]
    fn f1_configs() {
        let u = Hyperbox::unconstrained();
        let vals: Vec<f64> = enumerate_configs(&f1(), None, &u, DEFAULT_LIMIT)
            .unwrap()
            .iter()
            .map(|c| c.value)
            .collect();
        assert_eq!(vals, vec![11.0, 13.0, 8.0]);
        let best = exact_max(&f1(), None, &u).unwrap().unwrap();
        assert_eq!((best.value, best.leaves), (13.0, vec![1, 0]));
        assert_eq!(exact_min(&f1(), None, &u).unwrap().unwrap().value, 8.0);
    }

    #[test]
    fn f2_configs() {
        let f2 = Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(2.0, 10.0, 5.0)], 1).unwrap();
        let u = Hyperbox::unconstrained();
        let vals: Vec<f64> = enumerate_configs(&f2, None, &u, DEFAULT_LIMIT)
            .unwrap()
            .iter()
            .map(|c| c.value)
            .collect();
        assert_eq!(vals, vec![11.0, 8.0]);
    }

    #[test]
    fn pruned_and_infeasible() {
        let right = Hyperbox::unconstrained().refine(0, Interval::at_least(4.0)).unwrap();
        let best = exact_max(&f1(), None, &right).unwrap().unwrap();
        assert_eq!((best.value, best.leaves), (8.0, vec![1, 1]));

        let contradiction = Constraint::all_of(vec![
            Constraint::boxed(Hyperbox::unconstrained().refine(0, Interval::less_than(1.0)).unwrap()),
            Constraint::boxed(Hyperbox::unconstrained().refine(0, Interval::at_least(2.0)).unwrap()),
        ]);
        let u = Hyperbox::unconstrained();
        assert_eq!(exact_max(&f1(), Some(&contradiction), &u).unwrap(), None);
    }

    #[test]
    fn single_tree_one_config_per_leaf() {
        let t = Tree::new(&TreeNode::split(
            0,
            5.0,
            TreeNode::split(0, 2.0, TreeNode::leaf(1.0), TreeNode::leaf(2.0)),
            TreeNode::leaf(3.0),
        ))
        .unwrap();
        let e = Ensemble::new(vec![t], 1).unwrap();
        let n = enumerate_configs(&e, None, &Hyperbox::unconstrained(), DEFAULT_LIMIT)
            .unwrap()
            .len();
        assert_eq!(n, 3);
    }

    #[test]
    fn size_guard_is_an_error() {
        let u = Hyperbox::unconstrained();
        assert!(matches!(
            enumerate_configs(&f1(), None, &u, 2),
            Err(Error::SizeGuard(2))
        ));
    }

    #[test]
    fn diff_max() {
        let e = f1();
        let zero = Ensemble::constant(1, 0.0);
        let lim = DEFAULT_LIMIT;
        let shared = JointConstraint::with_joint(vec![PairConstraint::same_instance()]);
        assert_eq!(exact_diff_max(&e, &e, &shared, lim).unwrap().unwrap().0, 0.0);
        let free = JointConstraint::unconstrained();
        assert_eq!(exact_diff_max(&zero, &e, &free, lim).unwrap().unwrap().0, 13.0);
        assert_eq!(exact_diff_max(&e, &e, &free, lim).unwrap().unwrap().0, 5.0);
    }
}
