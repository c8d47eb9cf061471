use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed time interval `[start_s, end_s]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite() && start_s < end_s) {
            return Err(Error::InvalidInterval(start_s, end_s));
        }
        Ok(Self { start_s, end_s })
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t <= self.end_s
    }

    pub fn overlap_s(&self, other: &Interval) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }

    pub fn shifted(&self, delta_s: f64) -> Self {
        Self {
            start_s: self.start_s + delta_s,
            end_s: self.end_s + delta_s,
        }
    }
}

/// Annotated food-intake cycle.
pub type BiteAnnotation = Interval;

/// Annotated or estimated meal.
pub type MealAnnotation = Interval;

/// Checks that `intervals` are sorted by start and pairwise disjoint.
/// Touching endpoints count as overlap only when `strict` is set.
pub fn check_sorted_disjoint(intervals: &[Interval], strict: bool) -> Result<()> {
    for pair in intervals.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let overlapping = if strict {
            b.start_s <= a.end_s
        } else {
            b.start_s < a.end_s
        };
        if overlapping {
            return Err(Error::OverlappingIntervals(a.start_s, a.end_s, b.start_s, b.end_s));
        }
    }
    Ok(())
}
