//! Seeded random ensembles for tests, benchmarks and task generation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::BINARY_SPLIT;
use crate::ensemble::{Ensemble, Hyperbox, Interval, Tree, TreeNode};

/// Shape of a random ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEnsembleSpec {
    pub num_trees: usize,
    pub num_attributes: usize,
    /// Every root-to-leaf path has between `min_depth` and `max_depth` splits,
    /// unless the box runs out of thresholds first.
    pub min_depth: usize,
    pub max_depth: usize,
    /// Leaf values are drawn uniformly from `[lo, hi)`.
    pub leaf_range: (f64, f64),
    /// Thresholds are multiples of `grid` strictly inside `domain`.
    pub domain: (f64, f64),
    pub grid: f64,
    /// Split every attribute at 0.5 instead (binary inputs).
    pub binary: bool,
}

impl Default for RandomEnsembleSpec {
    fn default() -> Self {
        RandomEnsembleSpec {
            num_trees: 4,
            num_attributes: 4,
            min_depth: 1,
            max_depth: 3,
            leaf_range: (-1.0, 1.0),
            domain: (0.0, 10.0),
            grid: 1.0,
            binary: false,
        }
    }
}

impl RandomEnsembleSpec {
    pub fn generate(&self, rng: &mut impl Rng) -> Ensemble {
        let trees = (0..self.num_trees)
            .map(|_| {
                let root = self.node(rng, 0, &Hyperbox::unconstrained());
                Tree::new(&root).expect("generated trees have reachable leaves")
            })
            .collect();
        Ensemble::new(trees, self.num_attributes).expect("generated attributes are in range")
    }

    pub fn generate_seeded(&self, seed: u64) -> Ensemble {
        self.generate(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn node(&self, rng: &mut impl Rng, depth: usize, bbox: &Hyperbox) -> TreeNode {
        let stop = depth >= self.max_depth || (depth >= self.min_depth && rng.gen_bool(0.3));
        if !stop {
            let mut attrs: Vec<usize> = (0..self.num_attributes).collect();
            attrs.shuffle(rng);
            for attr in attrs {
                if let Some(tau) = self.threshold(rng, bbox.get(attr)) {
                    let left = bbox.refine(attr, Interval::less_than(tau)).expect("tau inside");
                    let right = bbox.refine(attr, Interval::at_least(tau)).expect("tau inside");
                    return TreeNode::split(
                        attr,
                        tau,
                        self.node(rng, depth + 1, &left),
                        self.node(rng, depth + 1, &right),
                    );
                }
            }
        }
        let (lo, hi) = self.leaf_range;
        TreeNode::leaf(if lo < hi { rng.gen_range(lo..hi) } else { lo })
    }

    /// A threshold that splits `iv` into two non-empty halves.
    fn threshold(&self, rng: &mut impl Rng, iv: Interval) -> Option<f64> {
        if self.binary {
            return (iv.lo() < BINARY_SPLIT && iv.hi() > BINARY_SPLIT).then_some(BINARY_SPLIT);
        }
        let lo = iv.lo().max(self.domain.0);
        let hi = iv.hi().min(self.domain.1);
        // grid multiples k * grid with lo < k * grid < hi
        let first = (lo / self.grid).floor() as i64 + 1;
        let last = (hi / self.grid).ceil() as i64 - 1;
        (first <= last).then(|| rng.gen_range(first..=last) as f64 * self.grid)
    }
}

/// The spec used for the small-model test corpus: 2 to 6 trees of depth 2 to
/// 4 over 2 to 6 attributes, leaf values uniform in `[-1, 1)`.
pub fn small_corpus_spec(rng: &mut impl Rng) -> RandomEnsembleSpec {
    let depth = rng.gen_range(2..=4);
    RandomEnsembleSpec {
        num_trees: rng.gen_range(2..=6),
        num_attributes: rng.gen_range(2..=6),
        min_depth: 1,
        max_depth: depth,
        ..RandomEnsembleSpec::default()
    }
}

/// The `index`-th member of the seeded small-model corpus.
pub fn small_corpus_member(seed: u64, index: u64) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    small_corpus_spec(&mut rng).generate(&mut rng)
}
