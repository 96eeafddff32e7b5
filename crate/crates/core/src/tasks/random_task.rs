use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Hyperbox, Interval, Node};
use crate::error::{Error, Result};

/// Accepted distance between achieved and requested reachable fraction.
pub const FRACTION_TOLERANCE: f64 = 0.05;

const MAX_ROUNDS: usize = 10_000;
/// Chance of taking a move that does not bring the fraction closer.
const EXPLORE_PROB: f64 = 0.1;

/// A random box constraint `tau_min <= X < tau_max` per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTaskSpec {
    pub intervals: Hyperbox,
    pub target_fraction: f64,
    /// Share of all leaves whose box meets `intervals`.
    pub achieved_fraction: f64,
    pub seed: u64,
}

/// Share of the ensemble's leaves whose box overlaps `bbox`, or `None` when
/// some tree has no such leaf.
pub fn reachable_fraction(ens: &Ensemble, bbox: &Hyperbox) -> Option<f64> {
    let mut reachable = 0usize;
    for t in ens.trees() {
        let n = t.leaves().filter(|(_, _, b)| b.overlaps(bbox)).count();
        if n == 0 {
            return None;
        }
        reachable += n;
    }
    Some(reachable as f64 / ens.num_leaves() as f64)
}

/// Split thresholds per attribute, sorted and deduplicated.
fn thresholds(ens: &Ensemble) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); ens.num_attributes()];
    for t in ens.trees() {
        for n in t.nodes() {
            if let Node::Internal { attr, threshold, .. } = n {
                out[*attr].push(*threshold);
            }
        }
    }
    for v in &mut out {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    out
}

/// Moves one end of `iv` by one threshold, inward when tightening and
/// outward when loosening. Ends are always thresholds or infinite.
fn shift(iv: Interval, ts: &[f64], tighten: bool, lower_end: bool) -> Option<Interval> {
    let (lo, hi) = (iv.lo(), iv.hi());
    match (tighten, lower_end) {
        (true, true) => {
            let t = ts.iter().copied().find(|&t| t > lo)?;
            Interval::new(t, hi)
        }
        (true, false) => {
            let t = ts.iter().rev().copied().find(|&t| t < hi)?;
            Interval::new(lo, t)
        }
        (false, true) => {
            let t = ts.iter().rev().copied().find(|&t| t < lo).unwrap_or(f64::NEG_INFINITY);
            lo.is_finite().then(|| Interval::new(t, hi)).flatten()
        }
        (false, false) => {
            let t = ts.iter().copied().find(|&t| t > hi).unwrap_or(f64::INFINITY);
            hi.is_finite().then(|| Interval::new(lo, t)).flatten()
        }
    }
}

/// Searches for a box whose reachable-leaf fraction is within
/// [`FRACTION_TOLERANCE`] of `target`, starting from the unconstrained box
/// and moving one interval end per round. Deterministic per seed.
pub fn generate_random_task(ens: &Ensemble, target: f64, seed: u64) -> Result<RandomTaskSpec> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target fraction must lie in (0, 1], got {target}"
        )));
    }
    let ts = thresholds(ens);
    let attrs: Vec<usize> = (0..ts.len()).filter(|&a| !ts[a].is_empty()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bbox = Hyperbox::unconstrained();
    let mut frac = 1.0;
    for _ in 0..MAX_ROUNDS {
        if (frac - target).abs() <= FRACTION_TOLERANCE {
            return Ok(RandomTaskSpec {
                intervals: bbox,
                target_fraction: target,
                achieved_fraction: frac,
                seed,
            });
        }
        let Some(&attr) = attrs.choose(&mut rng) else {
            break;
        };
        let tighten = frac > target;
        let Some(iv) = shift(bbox.get(attr), &ts[attr], tighten, rng.gen_bool(0.5)) else {
            continue;
        };
        let cand = bbox.with_interval(attr, iv);
        let Some(f) = reachable_fraction(ens, &cand) else {
            continue;
        };
        if (f - target).abs() < (frac - target).abs() || rng.gen_bool(EXPLORE_PROB) {
            bbox = cand;
            frac = f;
        }
    }
    Err(Error::GenerationFailed(MAX_ROUNDS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Tree, TreeNode};

    fn f1() -> Ensemble {
        let stump = |tau, l, r| {
            Tree::new(&TreeNode::split(0, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
        };
        Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap()
    }

    #[test]
    fn full_target_is_unconstrained() {
        let t = generate_random_task(&f1(), 1.0, 0).unwrap();
        assert!(t.intervals.is_unconstrained());
        assert_eq!(t.achieved_fraction, 1.0);
    }

    #[test]
    fn half_of_f1() {
        let e = f1();
        let t = generate_random_task(&e, 0.5, 4).unwrap();
        assert_eq!(t.achieved_fraction, 0.5);
        assert_eq!(reachable_fraction(&e, &t.intervals), Some(0.5));
    }

    #[test]
    fn zero_target_rejected() {
        assert!(matches!(
            generate_random_task(&f1(), 0.0, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unreachable_target_fails() {
        assert!(matches!(
            generate_random_task(&f1(), 0.1, 0),
            Err(Error::GenerationFailed(_))
        ));
    }

    #[test]
    fn reproducible() {
        let e = crate::random::RandomEnsembleSpec {
            num_trees: 10,
            max_depth: 4,
            ..Default::default()
        }
        .generate_seeded(2);
        let a = generate_random_task(&e, 0.3, 9).unwrap();
        let b = generate_random_task(&e, 0.3, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.achieved_fraction - 0.3).abs() <= FRACTION_TOLERANCE);
    }
}
