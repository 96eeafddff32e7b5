//! Anytime verification of additive tree ensembles.
//!
//! The crate answers questions of the form "what is the largest output this
//! model can produce for inputs satisfying these constraints", reporting a
//! sound upper bound and the best concrete input found so far at every
//! moment of the run. [`search`] holds the best-first engine, [`graph`] the
//! Merge baseline, and [`oracle`] a brute-force reference used in tests.

pub mod constraints;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod model_io;
pub mod oracle;
pub mod random;
pub mod tasks;
pub mod search;
pub mod trace;

pub use ensemble::{AttrId, Ensemble, Example, Hyperbox, Interval, Tree, TreeNode};
pub use error::{Error, Result};
pub use trace::{BoundsTrace, Status, TraceEntry, Witness};
