//! Timestamped anytime bounds shared by every solver.

use serde::{Deserialize, Serialize};

use crate::ensemble::Example;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    /// Upper and lower bound met; the last witness is optimal.
    Exact,
    /// Time or node budget ran out.
    Timeout,
    /// Memory budget ran out.
    Memory,
    /// No input satisfies the constraints.
    Infeasible,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Exact => "EXACT",
            Status::Timeout => "TIMEOUT",
            Status::Memory => "MEMORY",
            Status::Infeasible => "INFEASIBLE",
        }
    }
}

/// A concrete input (or pair of inputs for two-model problems) realizing a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    Single(Example),
    Pair(Example, Example),
}

impl Witness {
    /// The single example, or the second example of a pair.
    pub fn primary(&self) -> &Example {
        match self {
            Witness::Single(x) => x,
            Witness::Pair(_, x) => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Seconds since the run started.
    pub t: f64,
    pub upper: f64,
    pub lower: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub entries: Vec<TraceEntry>,
    pub status: Status,
}

impl BoundsTrace {
    pub fn new() -> Self {
        BoundsTrace {
            entries: Vec::new(),
            status: Status::Timeout,
        }
    }

    pub fn push(&mut self, t: f64, upper: f64, lower: f64, witness: Option<Witness>) {
        self.entries.push(TraceEntry {
            t,
            upper,
            lower,
            witness,
        });
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn final_upper(&self) -> Option<f64> {
        self.last().map(|e| e.upper)
    }

    pub fn final_lower(&self) -> Option<f64> {
        self.last().map(|e| e.lower)
    }

    /// Most recent witness, if any entry carried one.
    pub fn best_witness(&self) -> Option<&Witness> {
        self.entries.iter().rev().find_map(|e| e.witness.as_ref())
    }

    /// Checks that time is non-decreasing, `upper` never increases, `lower`
    /// never decreases and `lower <= upper` holds at every entry.
    pub fn check_monotone(&self) -> Result<(), String> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.lower > e.upper {
                return Err(format!("entry {i}: lower {} > upper {}", e.lower, e.upper));
            }
            if i > 0 {
                let p = &self.entries[i - 1];
                if e.t < p.t {
                    return Err(format!("entry {i}: time went backwards"));
                }
                if e.upper > p.upper {
                    return Err(format!("entry {i}: upper rose from {} to {}", p.upper, e.upper));
                }
                if e.lower < p.lower {
                    return Err(format!("entry {i}: lower fell from {} to {}", p.lower, e.lower));
                }
            }
        }
        Ok(())
    }
}

/// Header of [`BoundsTrace::to_csv`].
pub const CSV_HEADER: &str = "t_seconds,upper,lower";

impl BoundsTrace {
    /// One `t_seconds,upper,lower` row per change of the bounds,
    /// LF-terminated. An entry with the same timestamp as the previous row
    /// replaces it, so `t` is strictly increasing; an entry repeating the
    /// previous bounds is dropped. Infinite bounds are written as `inf` / `-inf`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            match rows.last_mut() {
                Some(last) if last.1 == e.upper && last.2 == e.lower => {}
                Some(last) if e.t <= last.0 => *last = (last.0, e.upper, e.lower),
                _ => rows.push((e.t, e.upper, e.lower)),
            }
        }
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (t, u, l) in rows {
            out.push_str(&format!("{t},{u},{l}\n"));
        }
        out
    }
}

impl Default for BoundsTrace {
    fn default() -> Self {
        Self::new()
    }
}
