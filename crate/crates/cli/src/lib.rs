//! Command-line driver for `treeverify`: task and result documents, and the
//! `run`, `compare` and `gen-tasks` commands.
//!
//! Exit codes: 0 when a task ran (whatever its status), 2 for usage and
//! input errors, 3 when a result fails its own consistency checks.

pub mod commands;
pub mod error;
pub mod exec;
pub mod result;
pub mod task;
