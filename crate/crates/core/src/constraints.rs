//! State-level constraints.
//!
//! A constraint inspects the box of a search state and answers whether some
//! input in that box may still satisfy the example-level predicate. Every
//! constraint here only looks at per-attribute intervals, and expansion only
//! ever shrinks boxes, so once a state is rejected all of its descendants are
//! rejected too.

use serde::{Deserialize, Serialize};

use crate::ensemble::{AttrId, Example, Hyperbox, Interval};

/// Threshold separating the two values of a binary attribute.
pub const BINARY_SPLIT: f64 = 0.5;

/// What a box says about a binary attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryStatus {
    ForcedTrue,
    ForcedFalse,
    Free,
}

pub fn binary_status(iv: Interval) -> BinaryStatus {
    if iv.lo() >= BINARY_SPLIT {
        BinaryStatus::ForcedTrue
    } else if iv.hi() <= BINARY_SPLIT {
        BinaryStatus::ForcedFalse
    } else {
        BinaryStatus::Free
    }
}

/// Capability shared by all single-instance constraints.
pub trait StateConstraint {
    /// Whether a state with box `bbox` may still contain a satisfying input.
    fn accepts(&self, bbox: &Hyperbox) -> bool;

    /// Largest box containing every satisfying input. The search intersects
    /// this with the graph before it starts.
    fn prune_box(&self) -> Hyperbox {
        Hyperbox::unconstrained()
    }
}

/// A conjunction of per-attribute interval conditions, applied by pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraint {
    pub intervals: Hyperbox,
}

impl StateConstraint for BoxConstraint {
    fn accepts(&self, _bbox: &Hyperbox) -> bool {
        true
    }

    fn prune_box(&self) -> Hyperbox {
        self.intervals.clone()
    }
}

/// The same condition as [`BoxConstraint`], but checked state by state
/// instead of by pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFilter {
    pub intervals: Hyperbox,
}

impl StateConstraint for BoxFilter {
    fn accepts(&self, bbox: &Hyperbox) -> bool {
        bbox.overlaps(&self.intervals)
    }
}

/// `||x - center||_inf < radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfBall {
    pub center: Example,
    pub radius: f64,
}

impl LinfBall {
    /// Open ball as a box: the open lower end is the next float above
    /// `center - radius`, which keeps the interval half-open.
    pub fn to_box(&self) -> Hyperbox {
        Hyperbox::from_intervals(self.center.iter().enumerate().filter_map(|(j, &c)| {
            Interval::new((c - self.radius).next_up(), c + self.radius).map(|iv| (j, iv))
        }))
        .unwrap_or_default()
    }
}

impl StateConstraint for LinfBall {
    fn accepts(&self, _bbox: &Hyperbox) -> bool {
        true
    }

    fn prune_box(&self) -> Hyperbox {
        self.to_box()
    }
}

/// Attribute lists are sets: repeated entries count once.
fn distinct(attrs: &[AttrId]) -> impl Iterator<Item = AttrId> + '_ {
    attrs
        .iter()
        .enumerate()
        .filter(|&(i, a)| !attrs[..i].contains(a))
        .map(|(_, &a)| a)
}

/// At most `k` of `attrs` may be switched on beyond those already on in `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtMostK {
    pub attrs: Vec<AttrId>,
    pub k: usize,
    #[serde(default)]
    pub baseline: Option<Example>,
}

impl AtMostK {
    /// Attributes that count toward `k`.
    fn counted(&self) -> impl Iterator<Item = AttrId> + '_ {
        distinct(&self.attrs).filter(|&a| match &self.baseline {
            Some(b) => b.get(a).is_none_or(|v| *v < BINARY_SPLIT),
            None => true,
        })
    }

    pub fn forced_count(&self, bbox: &Hyperbox) -> usize {
        self.counted()
            .filter(|&a| binary_status(bbox.get(a)) == BinaryStatus::ForcedTrue)
            .count()
    }
}

impl StateConstraint for AtMostK {
    fn accepts(&self, bbox: &Hyperbox) -> bool {
        self.forced_count(bbox) <= self.k
    }
}

/// One-hot groups: exactly one member of each group is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneOutOfK {
    pub groups: Vec<Vec<AttrId>>,
}

impl StateConstraint for OneOutOfK {
    fn accepts(&self, bbox: &Hyperbox) -> bool {
        self.groups.iter().all(|group| {
            let (mut on, mut off, mut len) = (0usize, 0usize, 0usize);
            for a in distinct(group) {
                len += 1;
                match binary_status(bbox.get(a)) {
                    BinaryStatus::ForcedTrue => on += 1,
                    BinaryStatus::ForcedFalse => off += 1,
                    BinaryStatus::Free => {}
                }
            }
            on <= 1 && off < len
        })
    }
}

/// Any single-instance constraint, as found in task files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Box(BoxConstraint),
    LinfBall(LinfBall),
    AtMostK(AtMostK),
    OneOutOfK(OneOutOfK),
    AllOf { parts: Vec<Constraint> },
    #[serde(skip)]
    BoxFilter(BoxFilter),
}

impl Constraint {
    /// The constraint that accepts everything.
    pub fn none() -> Self {
        Constraint::AllOf { parts: Vec::new() }
    }

    pub fn boxed(intervals: Hyperbox) -> Self {
        Constraint::Box(BoxConstraint { intervals })
    }

    pub fn linf_ball(center: Example, radius: f64) -> Self {
        Constraint::LinfBall(LinfBall { center, radius })
    }

    pub fn all_of(parts: Vec<Constraint>) -> Self {
        Constraint::AllOf { parts }
    }

    fn as_dyn(&self) -> Option<&dyn StateConstraint> {
        match self {
            Constraint::Box(c) => Some(c),
            Constraint::LinfBall(c) => Some(c),
            Constraint::AtMostK(c) => Some(c),
            Constraint::OneOutOfK(c) => Some(c),
            Constraint::BoxFilter(c) => Some(c),
            Constraint::AllOf { .. } => None,
        }
    }

    /// Whether this constraint (or any part of it) needs a per-state check.
    pub fn needs_state_check(&self) -> bool {
        match self {
            Constraint::Box(_) | Constraint::LinfBall(_) => false,
            Constraint::AllOf { parts } => parts.iter().any(Constraint::needs_state_check),
            _ => true,
        }
    }
}

impl Default for Constraint {
    fn default() -> Self {
        Constraint::none()
    }
}

impl StateConstraint for Constraint {
    fn accepts(&self, bbox: &Hyperbox) -> bool {
        match self {
            Constraint::AllOf { parts } => parts.iter().all(|p| p.accepts(bbox)),
            c => c.as_dyn().is_some_and(|c| c.accepts(bbox)),
        }
    }

    /// The intersection of all parts' prune boxes. `None` is folded into an
    /// unconstrained box here; use [`Constraint::prune_box_checked`] to detect
    /// contradictory parts.
    fn prune_box(&self) -> Hyperbox {
        self.prune_box_checked().unwrap_or_default()
    }
}

impl Constraint {
    /// Like `prune_box`, but `None` when the parts' boxes do not intersect.
    pub fn prune_box_checked(&self) -> Option<Hyperbox> {
        match self {
            Constraint::AllOf { parts } => parts
                .iter()
                .try_fold(Hyperbox::unconstrained(), |acc, p| acc.intersect(&p.prune_box_checked()?)),
            c => Some(c.as_dyn().map(|c| c.prune_box()).unwrap_or_default()),
        }
    }
}

/// A constraint linking the two inputs of a difference problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairConstraint {
    /// The two inputs agree on every attribute except `attrs`.
    DiffersOnly { attrs: Vec<AttrId> },
}

impl PairConstraint {
    /// The two inputs are the same example.
    pub fn same_instance() -> Self {
        PairConstraint::DiffersOnly { attrs: Vec::new() }
    }

    pub fn differs_only(attrs: Vec<AttrId>) -> Self {
        PairConstraint::DiffersOnly { attrs }
    }

    /// Every attribute outside `attrs` must still admit a common value.
    pub fn accepts(&self, first: &Hyperbox, second: &Hyperbox) -> bool {
        match self {
            PairConstraint::DiffersOnly { attrs } => {
                let free = |a: AttrId| attrs.contains(&a);
                first
                    .iter()
                    .all(|(a, iv)| free(a) || iv.overlaps(&second.get(a)))
                    && second
                        .iter()
                        .all(|(a, iv)| free(a) || iv.overlaps(&first.get(a)))
            }
        }
    }
}

/// Everything constraining a two-input problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointConstraint {
    pub first: Constraint,
    pub second: Constraint,
    pub joint: Vec<PairConstraint>,
}

impl JointConstraint {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn with_joint(joint: Vec<PairConstraint>) -> Self {
        JointConstraint {
            joint,
            ..Self::default()
        }
    }

    pub fn accepts_pair(&self, first: &Hyperbox, second: &Hyperbox) -> bool {
        self.joint.iter().all(|c| c.accepts(first, second))
    }
}
