//! Peak picking on the per-step bite probability.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prediction steps per input sample are `1 / DOWNSAMPLE`.
pub const DOWNSAMPLE: f64 = 4.0;

/// Sorted, duplicate-free bite timestamps in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiteSet {
    timestamps_s: Vec<f64>,
}

impl BiteSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts `times` and collapses equal values.
    pub fn from_times(times: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut timestamps_s: Vec<f64> = times.into_iter().collect();
        if let Some(&bad) = timestamps_s.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFiniteTime(bad));
        }
        timestamps_s.sort_by(f64::total_cmp);
        timestamps_s.dedup();
        Ok(Self { timestamps_s })
    }

    pub fn timestamps_s(&self) -> &[f64] {
        &self.timestamps_s
    }

    pub fn len(&self) -> usize {
        self.timestamps_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_s.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.timestamps_s.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiteDetectConfig {
    /// Probabilities below this are discarded.
    pub lambda_p: f64,
    /// Minimum spacing between two reported bites.
    pub min_gap_s: f64,
}

impl Default for BiteDetectConfig {
    fn default() -> Self {
        Self {
            lambda_p: 0.89,
            min_gap_s: 2.0,
        }
    }
}

impl BiteDetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_p > 0.0 && self.lambda_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_p must lie in (0, 1), got {}",
                self.lambda_p
            )));
        }
        if !(self.min_gap_s > 0.0 && self.min_gap_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_gap_s must be positive, got {}",
                self.min_gap_s
            )));
        }
        Ok(())
    }
}

/// Local maxima of `p` after zeroing everything below `threshold`. A run of
/// equal values counts as one peak, at its first index, when both
/// neighbouring runs are lower.
pub fn local_maxima(p: &[f64], threshold: f64) -> Vec<usize> {
    let v = |i: usize| if p[i] >= threshold { p[i] } else { 0.0 };
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < p.len() {
        let value = v(i);
        let mut end = i + 1;
        while end < p.len() && v(end) == value {
            end += 1;
        }
        let left_lower = i == 0 || v(i - 1) < value;
        let right_lower = end == p.len() || v(end) < value;
        if value > 0.0 && left_lower && right_lower {
            peaks.push(i);
        }
        i = end;
    }
    peaks
}

/// Bite timestamps from a prediction vector sampled at `fs_hz / 4`.
///
/// Peaks are accepted greedily from the highest down (earlier index first on
/// ties), skipping any closer than `min_gap_s` to one already accepted.
pub fn detect_bites(p: &[f64], fs_hz: f64, cfg: &BiteDetectConfig) -> Result<BiteSet> {
    cfg.validate()?;
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::InvalidSampleRate(fs_hz));
    }
    let step_s = DOWNSAMPLE / fs_hz;
    let mut order = local_maxima(p, cfg.lambda_p);
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    let mut kept = BTreeSet::new();
    for n in order {
        let far = |m: &usize| (n.abs_diff(*m) as f64) * step_s >= cfg.min_gap_s - 1e-9;
        let before = kept.range(..n).next_back();
        let after = kept.range(n..).next();
        if before.is_none_or(far) && after.is_none_or(far) {
            kept.insert(n);
        }
    }
    Ok(BiteSet {
        timestamps_s: kept.into_iter().map(|n| n as f64 * DOWNSAMPLE / fs_hz).collect(),
    })
}

/// Union of two bite sets with equal timestamps collapsed.
pub fn union_bites(a: &BiteSet, b: &BiteSet) -> BiteSet {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (x, y) = (&a.timestamps_s, &b.timestamps_s);
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&u), Some(&v)) if u <= v => {
                i += 1;
                if u == v {
                    j += 1;
                }
                u
            }
            (Some(_), Some(&v)) | (None, Some(&v)) => {
                j += 1;
                v
            }
            (Some(&u), None) => {
                i += 1;
                u
            }
            (None, None) => unreachable!(),
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    BiteSet { timestamps_s: out }
}
