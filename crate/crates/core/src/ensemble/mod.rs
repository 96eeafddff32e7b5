//! Additive ensembles of binary trees and their box algebra.

mod hyperbox;
mod tree;

pub use hyperbox::{AttrId, Hyperbox, Interval, IntervalSpec};
pub use tree::{Node, NodeId, Tree, TreeNode};

use crate::error::{Error, Result};

/// A dense input vector.
pub type Example = Vec<f64>;

/// `base_score + T^1 + ... + T^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<Tree>,
    base_score: f64,
    num_attributes: usize,
}

impl Ensemble {
    pub fn new(trees: Vec<Tree>, num_attributes: usize) -> Result<Self> {
        Self::with_base_score(trees, num_attributes, 0.0)
    }

    pub fn with_base_score(trees: Vec<Tree>, num_attributes: usize, base_score: f64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidModel("ensemble has no trees".into()));
        }
        if !base_score.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite base score {base_score}")));
        }
        for (m, t) in trees.iter().enumerate() {
            if let Some(a) = t.max_attr() {
                if a >= num_attributes {
                    return Err(Error::InvalidModel(format!(
                        "tree {m} splits on attribute {a} but the model has {num_attributes} attributes"
                    )));
                }
            }
        }
        Ok(Ensemble {
            trees,
            base_score,
            num_attributes,
        })
    }

    /// The model that predicts `value` everywhere (one single-leaf tree).
    pub fn constant(num_attributes: usize, value: f64) -> Self {
        Ensemble {
            trees: vec![Tree::constant(value)],
            base_score: 0.0,
            num_attributes,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.trees.iter().map(Tree::num_leaves).sum()
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    fn check_shape(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_attributes {
            return Err(Error::InputShape {
                expected: self.num_attributes,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_shape(x)?;
        let mut sum = self.base_score;
        for t in &self.trees {
            sum += t.eval(x)?.1;
        }
        Ok(sum)
    }

    /// Leaf reached in every tree, in tree order.
    pub fn eval_leaves(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_shape(x)?;
        self.trees.iter().map(|t| t.eval(x).map(|(id, _)| id)).collect()
    }

    /// Flips the sign of every leaf value and of the base score.
    pub fn negate(&self) -> Ensemble {
        Ensemble {
            trees: self.trees.iter().map(|t| t.map_values(|v| -v)).collect(),
            base_score: -self.base_score,
            num_attributes: self.num_attributes,
        }
    }

    /// Appends the trees of `other`; base scores add up.
    pub fn concat(&self, other: &Ensemble) -> Result<Ensemble> {
        if self.num_attributes != other.num_attributes {
            return Err(Error::AttributeMismatch(self.num_attributes, other.num_attributes));
        }
        let mut trees = self.trees.clone();
        trees.extend(other.trees.iter().cloned());
        Ok(Ensemble {
            trees,
            base_score: self.base_score + other.base_score,
            num_attributes: self.num_attributes,
        })
    }

    /// Model whose output is `self(x) - other(x)`.
    pub fn difference(&self, other: &Ensemble) -> Result<Ensemble> {
        self.concat(&other.negate())
    }
}
