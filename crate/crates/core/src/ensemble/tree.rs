use super::hyperbox::{AttrId, Hyperbox, Interval};
use crate::error::{Error, Result};

/// Recursive description of a binary tree, used to build a [`Tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    Split {
        attr: AttrId,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf(value)
    }

    /// `attr < threshold ? left : right`
    pub fn split(attr: AttrId, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split {
            attr,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

pub type NodeId = u32;

/// A node of a compiled tree. Children are indices into [`Tree::nodes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Internal {
        attr: AttrId,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        value: f64,
        leaf_id: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct LeafInfo {
    value: f64,
    bbox: Hyperbox,
}

/// A compiled binary tree. Node 0 is the root; leaf ids are assigned in
/// depth-first left-to-right order, and every leaf's box is precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    leaves: Vec<LeafInfo>,
}

impl Tree {
    /// Compiles `root`. Rejects non-finite thresholds or leaf values and
    /// leaves whose path conditions are contradictory.
    pub fn new(root: &TreeNode) -> Result<Self> {
        let mut tree = Tree {
            nodes: Vec::new(),
            leaves: Vec::new(),
        };
        tree.compile(root, Hyperbox::unconstrained())?;
        Ok(tree)
    }

    /// A tree with a single leaf.
    pub fn constant(value: f64) -> Self {
        Tree::new(&TreeNode::Leaf(value)).expect("finite constant")
    }

    fn compile(&mut self, node: &TreeNode, bbox: Hyperbox) -> Result<NodeId> {
        let id = self.nodes.len() as NodeId;
        match node {
            TreeNode::Leaf(value) => {
                if !value.is_finite() {
                    return Err(Error::InvalidModel(format!("non-finite leaf value {value}")));
                }
                let leaf_id = self.leaves.len();
                self.nodes.push(Node::Leaf {
                    value: *value,
                    leaf_id,
                });
                self.leaves.push(LeafInfo {
                    value: *value,
                    bbox,
                });
            }
            TreeNode::Split {
                attr,
                threshold,
                left,
                right,
            } => {
                if !threshold.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "non-finite threshold {threshold} on attribute {attr}"
                    )));
                }
                let unreachable = || {
                    Error::InvalidModel(format!(
                        "split X{attr} < {threshold} has an unreachable branch under {bbox}"
                    ))
                };
                let lbox = bbox
                    .refine(*attr, Interval::less_than(*threshold))
                    .ok_or_else(unreachable)?;
                let rbox = bbox
                    .refine(*attr, Interval::at_least(*threshold))
                    .ok_or_else(unreachable)?;
                self.nodes.push(Node::Leaf {
                    value: 0.0,
                    leaf_id: usize::MAX,
                });
                let l = self.compile(left, lbox)?;
                let r = self.compile(right, rbox)?;
                self.nodes[id as usize] = Node::Internal {
                    attr: *attr,
                    threshold: *threshold,
                    left: l,
                    right: r,
                };
            }
        }
        Ok(id)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_value(&self, leaf_id: usize) -> Result<f64> {
        self.leaves
            .get(leaf_id)
            .map(|l| l.value)
            .ok_or(Error::UnknownLeaf(leaf_id))
    }

    /// The box of all inputs reaching `leaf_id`.
    pub fn leaf_box(&self, leaf_id: usize) -> Result<&Hyperbox> {
        self.leaves
            .get(leaf_id)
            .map(|l| &l.bbox)
            .ok_or(Error::UnknownLeaf(leaf_id))
    }

    /// `(leaf_id, value, box)` for every leaf, in leaf id order.
    pub fn leaves(&self) -> impl ExactSizeIterator<Item = (usize, f64, &Hyperbox)> + '_ {
        self.leaves
            .iter()
            .enumerate()
            .map(|(i, l)| (i, l.value, &l.bbox))
    }

    pub fn max_leaf_value(&self) -> f64 {
        self.leaves.iter().map(|l| l.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_leaf_value(&self) -> f64 {
        self.leaves.iter().map(|l| l.value).fold(f64::INFINITY, f64::min)
    }

    /// Largest attribute index used by a split.
    pub fn max_attr(&self) -> Option<AttrId> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { attr, .. } => Some(*attr),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Returns `(leaf_id, value)` of the leaf reached by `x`.
    pub fn eval(&self, x: &[f64]) -> Result<(usize, f64)> {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Leaf { value, leaf_id } => return Ok((leaf_id, value)),
                Node::Internal {
                    attr,
                    threshold,
                    left,
                    right,
                } => {
                    let v = *x.get(attr).ok_or(Error::InputShape {
                        expected: attr + 1,
                        got: x.len(),
                    })?;
                    id = if v < threshold { left } else { right } as usize;
                }
            }
        }
    }

    /// Same structure with every leaf value replaced by `f(value)`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Tree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { value, leaf_id } => Node::Leaf {
                    value: f(value),
                    leaf_id,
                },
                other => other,
            })
            .collect();
        let leaves = self
            .leaves
            .iter()
            .map(|l| LeafInfo {
                value: f(l.value),
                bbox: l.bbox.clone(),
            })
            .collect();
        Tree { nodes, leaves }
    }

    /// Converts back to the recursive form.
    pub fn to_node(&self) -> TreeNode {
        fn go(nodes: &[Node], id: usize) -> TreeNode {
            match nodes[id] {
                Node::Leaf { value, .. } => TreeNode::Leaf(value),
                Node::Internal {
                    attr,
                    threshold,
                    left,
                    right,
                } => TreeNode::split(
                    attr,
                    threshold,
                    go(nodes, left as usize),
                    go(nodes, right as usize),
                ),
            }
        }
        go(&self.nodes, 0)
    }
}
