//! Half-open intervals and sparse axis-aligned boxes.
//!
//! A split `X < tau` sends `X == tau` to the right child, so left branches
//! produce `(-inf, tau)` and right branches produce `[tau, +inf)`. Every
//! interval here is therefore half-open `[lo, hi)` and never empty; an empty
//! intersection is reported as `None` instead of being stored.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of an input attribute.
pub type AttrId = usize;

/// A non-empty half-open interval `[lo, hi)`; `lo` may be `-inf`, `hi` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Returns `None` unless `lo < hi` (this also rejects NaN endpoints).
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo < hi).then_some(Interval { lo, hi })
    }

    /// `(-inf, tau)`, the region of a left branch.
    pub fn less_than(tau: f64) -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: tau,
        }
    }

    /// `[tau, +inf)`, the region of a right branch.
    pub fn at_least(tau: f64) -> Self {
        Interval {
            lo: tau,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) < self.hi.min(other.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == f64::NEG_INFINITY {
            write!(f, "(-inf, {})", self.hi)
        } else {
            write!(f, "[{}, {})", self.lo, self.hi)
        }
    }
}

/// A sparse axis-aligned box. Attributes that are not stored are unconstrained.
///
/// Entries are kept sorted by attribute and unbounded intervals are never
/// stored, so two boxes describing the same region compare equal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<IntervalSpec>", try_from = "Vec<IntervalSpec>")]
pub struct Hyperbox {
    entries: Vec<(AttrId, Interval)>,
}

impl Hyperbox {
    /// The box covering the whole input space.
    pub fn unconstrained() -> Self {
        Hyperbox {
            entries: Vec::new(),
        }
    }

    /// Builds a box as the intersection of the given per-attribute intervals.
    /// Repeated attributes are intersected; returns `None` when empty.
    pub fn from_intervals<I>(intervals: I) -> Option<Self>
    where
        I: IntoIterator<Item = (AttrId, Interval)>,
    {
        let mut entries: Vec<(AttrId, Interval)> = intervals.into_iter().collect();
        entries.sort_by_key(|(a, _)| *a);
        let mut out: Vec<(AttrId, Interval)> = Vec::with_capacity(entries.len());
        for (attr, iv) in entries {
            match out.last_mut() {
                Some((last, cur)) if *last == attr => *cur = cur.intersect(&iv)?,
                _ => out.push((attr, iv)),
            }
        }
        out.retain(|(_, iv)| !iv.is_unbounded());
        Some(Hyperbox { entries: out })
    }

    pub fn is_unconstrained(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of constrained attributes.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttrId, Interval)> + '_ {
        self.entries.iter().copied()
    }

    /// The interval of `attr`, unbounded when the attribute is unconstrained.
    pub fn get(&self, attr: AttrId) -> Interval {
        match self.entries.binary_search_by_key(&attr, |(a, _)| *a) {
            Ok(i) => self.entries[i].1,
            Err(_) => Interval::UNBOUNDED,
        }
    }

    /// Largest attribute index mentioned, if any.
    pub fn max_attr(&self) -> Option<AttrId> {
        self.entries.last().map(|(a, _)| *a)
    }

    /// Intersects `attr`'s interval with `iv`.
    pub fn refine(&self, attr: AttrId, iv: Interval) -> Option<Hyperbox> {
        let cur = self.get(attr);
        let new = cur.intersect(&iv)?;
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&attr, |(a, _)| *a) {
            Ok(i) => entries[i].1 = new,
            Err(i) if !new.is_unbounded() => entries.insert(i, (attr, new)),
            Err(_) => {}
        }
        Some(Hyperbox { entries })
    }

    /// Replaces the interval of `attr`, dropping it when unbounded.
    pub fn with_interval(&self, attr: AttrId, iv: Interval) -> Hyperbox {
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&attr, |(a, _)| *a) {
            Ok(i) if iv.is_unbounded() => {
                entries.remove(i);
            }
            Ok(i) => entries[i].1 = iv,
            Err(i) if !iv.is_unbounded() => entries.insert(i, (attr, iv)),
            Err(_) => {}
        }
        Hyperbox { entries }
    }

    /// Per-attribute intersection; `None` when some attribute becomes empty.
    pub fn intersect(&self, other: &Hyperbox) -> Option<Hyperbox> {
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1.intersect(&b[j].1)?));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Some(Hyperbox { entries: out })
    }

    /// True iff the intersection is non-empty. Does not allocate.
    pub fn overlaps(&self, other: &Hyperbox) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .entries
            .iter()
            .all(|(attr, iv)| iv.overlaps(&large.get(*attr)))
    }

    /// True when every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Hyperbox) -> bool {
        other
            .entries
            .iter()
            .all(|(attr, iv)| self.get(*attr).is_subset_of(iv))
    }

    /// Whether `x` lies in the box. Attributes beyond `x.len()` count as outside.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.entries
            .iter()
            .all(|(attr, iv)| x.get(*attr).is_some_and(|v| iv.contains(*v)))
    }

    /// The point of the box closest to `reference` on every attribute, staying
    /// on integers when the reference and the box edges allow it.
    pub fn closest_point(&self, reference: &[f64]) -> Vec<f64> {
        let mut x = reference.to_vec();
        for (attr, iv) in self.iter() {
            if attr >= x.len() {
                continue;
            }
            let v = x[attr];
            x[attr] = if v < iv.lo {
                iv.lo
            } else if v >= iv.hi {
                let below = iv.hi - 1.0;
                if below >= iv.lo {
                    below
                } else if iv.lo.is_finite() {
                    iv.lo
                } else {
                    iv.hi.next_down()
                }
            } else {
                v
            };
        }
        x
    }
}

impl fmt::Display for Hyperbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (attr, iv)) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "X{attr}: {iv}")?;
        }
        write!(f, "}}")
    }
}

/// Wire form of one box entry; `null` bounds are infinite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub attr: AttrId,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl From<Hyperbox> for Vec<IntervalSpec> {
    fn from(b: Hyperbox) -> Self {
        b.entries
            .into_iter()
            .map(|(attr, iv)| IntervalSpec {
                attr,
                lo: iv.lo.is_finite().then_some(iv.lo),
                hi: iv.hi.is_finite().then_some(iv.hi),
            })
            .collect()
    }
}

impl TryFrom<Vec<IntervalSpec>> for Hyperbox {
    type Error = String;

    fn try_from(specs: Vec<IntervalSpec>) -> Result<Self, Self::Error> {
        let mut ivs = Vec::with_capacity(specs.len());
        for s in specs {
            let lo = s.lo.unwrap_or(f64::NEG_INFINITY);
            let hi = s.hi.unwrap_or(f64::INFINITY);
            let iv = Interval::new(lo, hi)
                .ok_or_else(|| format!("empty interval [{lo}, {hi}) on attribute {}", s.attr))?;
            ivs.push((s.attr, iv));
        }
        Hyperbox::from_intervals(ivs).ok_or_else(|| "box is empty".to_string())
    }
}
