//! Meal intervals from detected bites.

use serde::{Deserialize, Serialize};

use crate::bites::{BiteSet, DOWNSAMPLE};
use crate::dsp::{convolve_same, FirFilter};
use crate::error::{Error, Result};
use crate::interval::{check_sorted_disjoint, Interval};

/// Sorted, pairwise disjoint meal intervals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MealIntervalSet {
    intervals: Vec<Interval>,
}

impl MealIntervalSet {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            Interval::new(iv.start_s, iv.end_s)?;
        }
        check_sorted_disjoint(&intervals, false)?;
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.intervals.iter().map(Interval::duration_s).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.intervals.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizerConfig {
    pub gauss_len_s: f64,
    pub gauss_std_s: f64,
    /// Threshold on the smoothed bite density.
    pub lambda_s: f64,
    pub merge_gap_s: f64,
    pub min_duration_s: f64,
    /// Length of each lobe of the edge detector.
    pub edge_sidelobe_s: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            gauss_len_s: 240.0,
            gauss_std_s: 45.0,
            lambda_s: 5e-4,
            merge_gap_s: 180.0,
            min_duration_s: 180.0,
            edge_sidelobe_s: 1.0,
        }
    }
}

impl LocalizerConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.gauss_len_s,
            self.gauss_std_s,
            self.lambda_s,
            self.merge_gap_s,
            self.min_duration_s,
            self.edge_sidelobe_s,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(Error::InvalidConfig("localizer settings must be positive".into()));
        }
        if self.gauss_std_s >= self.gauss_len_s {
            return Err(Error::InvalidConfig(
                "Gaussian std must be shorter than the kernel".into(),
            ));
        }
        Ok(())
    }
}

/// Seconds to prediction-timeline samples.
fn steps(seconds: f64, fs_hz: f64) -> f64 {
    seconds * fs_hz / DOWNSAMPLE
}

fn check_rate(fs_hz: f64) -> Result<()> {
    if fs_hz > 0.0 && fs_hz.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSampleRate(fs_hz))
    }
}

/// Length of the prediction timeline covering `duration_s`.
pub fn timeline_len(duration_s: f64, fs_hz: f64) -> usize {
    steps(duration_s, fs_hz).round().max(1.0) as usize
}

/// Unit impulses at each bite on the prediction timeline. A bite at the very
/// end of the recording lands on the last sample.
pub fn impulse_train(bites: &BiteSet, duration_s: f64, fs_hz: f64) -> Result<Vec<f64>> {
    check_rate(fs_hz)?;
    let n = timeline_len(duration_s, fs_hz);
    let mut s = vec![0.0; n];
    for b in bites.iter() {
        if !(0.0..=duration_s).contains(&b) {
            return Err(Error::BiteOutOfRange { time_s: b, duration_s });
        }
        let i = (steps(b, fs_hz).round() as usize).min(n - 1);
        s[i] = 1.0;
    }
    Ok(s)
}

/// The unit-area Gaussian used to close gaps between neighbouring bites.
pub fn gaussian_kernel(cfg: &LocalizerConfig, fs_hz: f64) -> FirFilter {
    let len = steps(cfg.gauss_len_s, fs_hz).round() as usize;
    FirFilter::gaussian(len.max(1), steps(cfg.gauss_std_s, fs_hz))
}

pub fn smooth_close(s: &[f64], cfg: &LocalizerConfig, fs_hz: f64) -> Vec<f64> {
    gaussian_kernel(cfg, fs_hz).apply(s)
}

/// `[1, 2, .., K, 0, -K, .., -2, -1]`
pub fn edge_kernel(k: usize) -> Vec<f64> {
    let rise = (1..=k).map(|v| v as f64);
    let fall = (1..=k).rev().map(|v| -(v as f64));
    rise.chain(std::iter::once(0.0)).chain(fall).collect()
}

/// Binarizes the smoothed density and pairs up the edges found by a
/// differentiating filter into crude meal intervals.
pub fn extract_edge_intervals(smoothed: &[f64], cfg: &LocalizerConfig, fs_hz: f64) -> Result<MealIntervalSet> {
    check_rate(fs_hz)?;
    let k = (steps(cfg.edge_sidelobe_s, fs_hz).round() as usize).max(1);
    let pad = k + 1;
    let n = smoothed.len();
    let mut binary = vec![0.0; n + 2 * pad];
    for (b, &v) in binary[pad..pad + n].iter_mut().zip(smoothed) {
        if v >= cfg.lambda_s {
            *b = 1.0;
        }
    }
    let d = convolve_same(&binary, &edge_kernel(k), k);
    let edges = pair_edges(&find_edges(&d), n, pad)?;
    let to_s = |e: usize| e as f64 * DOWNSAMPLE / fs_hz;
    let intervals = edges
        .into_iter()
        .map(|(e, f)| Interval::new(to_s(e), to_s(f)))
        .collect::<Result<Vec<_>>>()?;
    MealIntervalSet::new(intervals)
}

/// Local maxima of `|d|` as `(index, rising)`. A step between samples
/// `e - 1` and `e` gives equal responses at both; the edge is placed at the
/// later one, the first sample of the new level.
fn find_edges(d: &[f64]) -> Vec<(usize, bool)> {
    let mut edges = Vec::new();
    let mut i = 0;
    while i < d.len() {
        let v = d[i].abs();
        let mut end = i + 1;
        while end < d.len() && d[end].abs() == v {
            end += 1;
        }
        let left_lower = i == 0 || d[i - 1].abs() < v;
        let right_lower = end == d.len() || d[end].abs() < v;
        if v > 0.0 && left_lower && right_lower {
            edges.push(((i + end) / 2, d[i] > 0.0));
        }
        i = end;
    }
    edges
}

/// Pairs each rising edge with the next falling one. Level changes closer
/// together than the detector's sidelobe can blur into repeated edges of one
/// polarity; a run of rises keeps its first and a run of falls its last.
/// Indices are shifted back by `pad` and clamped to `[0, n]`.
fn pair_edges(edges: &[(usize, bool)], n: usize, pad: usize) -> Result<Vec<(usize, usize)>> {
    let mut collapsed: Vec<(usize, bool)> = Vec::with_capacity(edges.len());
    for &(i, rising) in edges {
        match collapsed.last_mut() {
            Some(last) if last.1 == rising => {
                if !rising {
                    last.0 = i;
                }
            }
            _ => collapsed.push((i, rising)),
        }
    }
    if !collapsed.len().is_multiple_of(2) || collapsed.first().is_some_and(|e| !e.1) {
        return Err(Error::UnpairedEdge(collapsed.len()));
    }
    let at = |i: usize| i.saturating_sub(pad).min(n);
    Ok(collapsed.chunks_exact(2).map(|p| (at(p[0].0), at(p[1].0))).collect())
}

/// Merges intervals separated by at most `merge_gap_s`, then drops those
/// shorter than `min_duration_s`.
pub fn refine_intervals(q: &MealIntervalSet, cfg: &LocalizerConfig) -> MealIntervalSet {
    let mut merged: Vec<Interval> = Vec::with_capacity(q.len());
    for iv in q.iter() {
        match merged.last_mut() {
            Some(last) if iv.start_s - last.end_s <= cfg.merge_gap_s => {
                last.end_s = last.end_s.max(iv.end_s);
            }
            _ => merged.push(*iv),
        }
    }
    merged.retain(|iv| iv.duration_s() >= cfg.min_duration_s);
    MealIntervalSet { intervals: merged }
}

pub fn localize_meals(bites: &BiteSet, duration_s: f64, fs_hz: f64, cfg: &LocalizerConfig) -> Result<MealIntervalSet> {
    cfg.validate()?;
    let s = impulse_train(bites, duration_s, fs_hz)?;
    let smoothed = smooth_close(&s, cfg, fs_hz);
    let crude = extract_edge_intervals(&smoothed, cfg, fs_hz)?;
    Ok(refine_intervals(&crude, cfg))
}

/// Density clustering of bite times. Each cluster becomes the interval
/// spanning its first and last member; noise and single-point clusters are
/// dropped. A border point reachable from two clusters joins the earlier one.
pub fn dbscan_localize(bites: &BiteSet, eps_s: f64, min_pts: usize) -> MealIntervalSet {
    let x = bites.timestamps_s();
    let n = x.len();
    // Neighbourhood [lo[i], hi[i]) of every point, itself included.
    let mut lo = vec![0; n];
    let mut hi = vec![0; n];
    let (mut a, mut b) = (0, 0);
    for i in 0..n {
        while x[i] - x[a] > eps_s {
            a += 1;
        }
        while b < n && x[b] - x[i] <= eps_s {
            b += 1;
        }
        lo[i] = a;
        hi[i] = b;
    }
    let core: Vec<usize> = (0..n).filter(|&i| hi[i] - lo[i] >= min_pts).collect();

    let mut out = Vec::new();
    let mut claimed = 0;
    let mut k = 0;
    while k < core.len() {
        let first = core[k];
        let mut last = first;
        k += 1;
        while k < core.len() && x[core[k]] - x[last] <= eps_s {
            last = core[k];
            k += 1;
        }
        let start = lo[first].max(claimed);
        let end = hi[last];
        claimed = end;
        if x[end - 1] > x[start] {
            out.push(Interval {
                start_s: x[start],
                end_s: x[end - 1],
            });
        }
    }
    MealIntervalSet { intervals: out }
}
