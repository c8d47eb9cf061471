//! Bite- and meal-level evaluation metrics.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::bites::BiteSet;
use crate::error::{Error, Result};
use crate::imu::ImuRecording;
use crate::interval::{check_sorted_disjoint, Interval};
use crate::meals::MealIntervalSet;

/// Counts with a true-positive, false-positive and false-negative entry.
pub trait Confusion {
    fn tp(&self) -> u64;
    fn fp(&self) -> u64;
    fn fn_(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiteConfusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealConfusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion for BiteConfusion {
    fn tp(&self) -> u64 {
        self.tp
    }
    fn fp(&self) -> u64 {
        self.fp
    }
    fn fn_(&self) -> u64 {
        self.fn_
    }
}

impl Confusion for MealConfusion {
    fn tp(&self) -> u64 {
        self.tp
    }
    fn fp(&self) -> u64 {
        self.fp
    }
    fn fn_(&self) -> u64 {
        self.fn_
    }
}

impl Add for BiteConfusion {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl Add for MealConfusion {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl MealConfusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `num / den`, or 0 when the denominator vanishes.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and F1, each 0 when undefined.
pub fn precision_recall_f1(c: &impl Confusion) -> (f64, f64, f64) {
    let (tp, fp, fn_) = (c.tp() as f64, c.fp() as f64, c.fn_() as f64);
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    (p, r, ratio(2.0 * p * r, p + r))
}

/// Scores detections against annotated bite intervals (bounds inclusive).
///
/// Detections are visited in time order. A detection inside an unclaimed
/// interval claims it and counts as a true positive; any other detection is
/// a false positive. Intervals never claimed are false negatives. Where two
/// intervals touch, a detection on the shared endpoint goes to the first
/// unclaimed one.
pub fn match_bites(detections: &BiteSet, truth: &[Interval]) -> Result<BiteConfusion> {
    let mut sorted = truth.to_vec();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    check_sorted_disjoint(&sorted, false)?;
    let mut claimed = vec![false; sorted.len()];
    let mut c = BiteConfusion::default();
    for t in detections.iter() {
        let upto = sorted.partition_point(|iv| iv.start_s <= t);
        let hit = (upto.saturating_sub(2)..upto).find(|&i| sorted[i].contains(t) && !claimed[i]);
        match hit {
            Some(i) => {
                claimed[i] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    c.fn_ = claimed.iter().filter(|&&x| !x).count() as u64;
    Ok(c)
}

/// Marks which timeline samples (centred at `(k + 0.5) * resolution_s`)
/// fall inside any of `intervals`.
fn coverage(intervals: &MealIntervalSet, n: usize, resolution_s: f64) -> Vec<bool> {
    let mut covered = vec![false; n];
    for iv in intervals.iter() {
        let first = (iv.start_s / resolution_s - 0.5).ceil().max(0.0) as usize;
        let last = (iv.end_s / resolution_s - 0.5).floor();
        if last < 0.0 {
            continue;
        }
        let last = (last as usize).min(n.saturating_sub(1));
        if first < n && first <= last {
            covered[first..=last].iter_mut().for_each(|c| *c = true);
        }
    }
    covered
}

/// Number of evaluation samples on a timeline of `duration_s`.
pub fn timeline_samples(duration_s: f64, resolution_s: f64) -> usize {
    (duration_s / resolution_s - 1e-9).ceil().max(0.0) as usize
}

/// Sample-level confusion of estimated against true meal intervals on a
/// timeline discretised at `resolution_s`.
pub fn meal_confusion(
    est: &MealIntervalSet,
    truth: &MealIntervalSet,
    duration_s: f64,
    resolution_s: f64,
) -> Result<MealConfusion> {
    if !(resolution_s > 0.0 && resolution_s.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "resolution must be positive, got {resolution_s}"
        )));
    }
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid duration {duration_s}")));
    }
    let n = timeline_samples(duration_s, resolution_s);
    let e = coverage(est, n, resolution_s);
    let t = coverage(truth, n, resolution_s);
    let mut c = MealConfusion::default();
    for (&e, &t) in e.iter().zip(&t) {
        match (e, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn accuracy(c: &MealConfusion) -> f64 {
    ratio((c.tp + c.tn) as f64, c.total() as f64)
}

pub fn specificity(c: &MealConfusion) -> f64 {
    ratio(c.tn as f64, (c.tn + c.fp) as f64)
}

/// Accuracy with every meal sample weighted by `ratio`, so that eating and
/// non-eating time contribute comparably.
pub fn weighted_accuracy(c: &MealConfusion, ratio_w: f64) -> f64 {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    ratio(tp * ratio_w + tn, (tp + fn_) * ratio_w + fp + tn)
}

/// Total recording time over time spent eating.
pub fn duration_ratio(total_s: f64, meal_s: f64) -> f64 {
    ratio(total_s, meal_s)
}

/// `x` cut (not rounded) to `decimals` places, the convention used when
/// metrics are tabulated.
pub fn truncate_decimals(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale + 1e-9).floor() / scale
}

/// [`duration_ratio`] truncated to one decimal.
pub fn weighting_ratio(total_s: f64, meal_s: f64) -> f64 {
    truncate_decimals(duration_ratio(total_s, meal_s), 1)
}

/// Seconds of overlap and of union between two interval sets.
pub fn overlap_union_s(est: &MealIntervalSet, truth: &MealIntervalSet) -> (f64, f64) {
    let (a, b) = (est.intervals(), truth.intervals());
    let (mut i, mut j) = (0, 0);
    let mut inter = 0.0;
    while i < a.len() && j < b.len() {
        inter += a[i].overlap_s(&b[j]);
        if a[i].end_s < b[j].end_s {
            i += 1;
        } else {
            j += 1;
        }
    }
    (inter, est.total_duration_s() + truth.total_duration_s() - inter)
}

/// Overlap over union in seconds; 1 when both sets are empty.
pub fn jaccard_index(est: &MealIntervalSet, truth: &MealIntervalSet) -> f64 {
    let (inter, union) = overlap_union_s(est, truth);
    if union == 0.0 {
        1.0
    } else {
        inter / union
    }
}

/// Centred moving mean of `|a_x| + |a_y| + |a_z|` over `window_s`. Pass a
/// smoothed recording. Windows are truncated at the edges and normalised by
/// the number of samples they cover.
pub fn wrist_motion_energy(rec: &ImuRecording, window_s: f64) -> Result<Vec<f64>> {
    let w = (window_s * rec.sample_rate_hz()).round();
    if !(w >= 2.0 && w.is_finite()) || !(w as usize).is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "energy window must span an even number of samples, got {w}"
        )));
    }
    let half = w as usize / 2;
    let mut prefix = Vec::with_capacity(rec.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for s in rec.samples() {
        acc += s.ax.abs() + s.ay.abs() + s.az.abs();
        prefix.push(acc);
    }
    let m = rec.len();
    Ok((0..m)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(m);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiteReport {
    pub confusion: BiteConfusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BiteReport {
    pub fn from_confusion(confusion: BiteConfusion) -> Self {
        let (precision, recall, f1) = precision_recall_f1(&confusion);
        Self {
            confusion,
            precision,
            recall,
            f1,
        }
    }
}

pub fn evaluate_bites(detections: &BiteSet, truth: &[Interval]) -> Result<BiteReport> {
    Ok(BiteReport::from_confusion(match_bites(detections, truth)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: MealConfusion,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    pub jaccard: f64,
    /// Ratio used to weight true positives.
    pub ratio: f64,
}

impl EvalReport {
    /// Metrics from accumulated counts; `overlap` and `union` are seconds
    /// summed over the same recordings.
    pub fn from_parts(confusion: MealConfusion, overlap_s: f64, union_s: f64, ratio_w: f64) -> Self {
        let (precision, recall, f1) = precision_recall_f1(&confusion);
        Self {
            confusion,
            precision,
            recall,
            specificity: specificity(&confusion),
            f1,
            accuracy: accuracy(&confusion),
            weighted_accuracy: weighted_accuracy(&confusion, ratio_w),
            jaccard: if union_s == 0.0 { 1.0 } else { overlap_s / union_s },
            ratio: ratio_w,
        }
    }
}

/// Meal metrics for one recording. Without an explicit `ratio_w` the
/// weighting ratio is derived from the ground truth.
pub fn evaluate_meals(
    est: &MealIntervalSet,
    truth: &MealIntervalSet,
    duration_s: f64,
    resolution_s: f64,
    ratio_w: Option<f64>,
) -> Result<EvalReport> {
    let confusion = meal_confusion(est, truth, duration_s, resolution_s)?;
    let (inter, union) = overlap_union_s(est, truth);
    let r = ratio_w.unwrap_or_else(|| weighting_ratio(duration_s, truth.total_duration_s()));
    Ok(EvalReport::from_parts(confusion, inter, union, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::{Handedness, ImuSample};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    fn meals(v: &[(f64, f64)]) -> MealIntervalSet {
        MealIntervalSet::new(v.iter().map(|&(a, b)| iv(a, b)).collect()).unwrap()
    }

    fn bites(v: &[f64]) -> BiteSet {
        BiteSet::from_times(v.iter().copied()).unwrap()
    }

    #[test]
    fn bite_matching_fixtures() {
        let truth = [iv(0.0, 4.0), iv(10.0, 14.0)];
        let c = match_bites(&bites(&[2.0, 3.0, 20.0]), &truth).unwrap();
        assert_eq!(c, BiteConfusion { tp: 1, fp: 2, fn_: 1 });
        let c = match_bites(&bites(&[1.0, 12.0]), &truth).unwrap();
        assert_eq!(c, BiteConfusion { tp: 2, fp: 0, fn_: 0 });
        let c = match_bites(&BiteSet::new(), &truth).unwrap();
        assert_eq!(c, BiteConfusion { tp: 0, fp: 0, fn_: 2 });
        assert!(match_bites(&BiteSet::new(), &[iv(0.0, 5.0), iv(4.0, 6.0)]).is_err());
    }

    #[test]
    fn touching_intervals_share_an_endpoint() {
        let truth = [iv(0.0, 4.0), iv(4.0, 8.0)];
        let c = match_bites(&bites(&[4.0]), &truth).unwrap();
        assert_eq!(c, BiteConfusion { tp: 1, fp: 0, fn_: 1 });
        let c = match_bites(&bites(&[2.0, 4.0]), &truth).unwrap();
        assert_eq!(c, BiteConfusion { tp: 2, fp: 0, fn_: 0 });
    }

    #[test]
    fn precision_recall_fixtures() {
        let (p, r, f) = precision_recall_f1(&BiteConfusion {
            tp: 1231,
            fp: 102,
            fn_: 101,
        });
        assert_relative_eq!(f, 2462.0 / 2665.0, epsilon = 1e-15);
        let cut = [p, r, f].map(|x| truncate_decimals(x, 3));
        assert_eq!(cut, [0.923, 0.924, 0.923]);
        assert_eq!(
            precision_recall_f1(&BiteConfusion { tp: 0, fp: 0, fn_: 5 }),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(
            precision_recall_f1(&BiteConfusion {
                tp: 10,
                fp: 10,
                fn_: 10
            }),
            (0.5, 0.5, 0.5)
        );
    }

    #[test]
    fn meal_confusion_fixtures() {
        let c = meal_confusion(&meals(&[(100.0, 200.0)]), &meals(&[(150.0, 250.0)]), 1000.0, 1.0).unwrap();
        assert_eq!(
            c,
            MealConfusion {
                tp: 50,
                fp: 50,
                fn_: 50,
                tn: 850
            }
        );
        let m = meals(&[(10.0, 20.0), (30.0, 45.5)]);
        let c = meal_confusion(&m, &m, 100.0, 1.0).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = meal_confusion(&MealIntervalSet::empty(), &m, 100.0, 1.0).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 26));
        assert!(meal_confusion(&m, &m, 100.0, 0.0).is_err());
    }

    #[test]
    fn weighted_accuracy_fixtures() {
        let c = MealConfusion {
            tp: 50,
            fp: 50,
            fn_: 50,
            tn: 850,
        };
        assert_relative_eq!(weighted_accuracy(&c, 10.0), 1350.0 / 1900.0, epsilon = 1e-15);
        assert_eq!(format!("{:.4}", weighted_accuracy(&c, 10.0)), "0.7105");
        let perfect = MealConfusion {
            tp: 70,
            fp: 0,
            fn_: 0,
            tn: 930,
        };
        for r in [0.5, 1.0, 14.2, 1e3] {
            assert_eq!(weighted_accuracy(&perfect, r), 1.0);
        }
        assert_eq!(weighted_accuracy(&c, 1.0), accuracy(&c));
    }

    #[test]
    fn ratio_truncates_to_one_decimal() {
        assert_eq!(weighting_ratio(77.32, 5.42), 14.2);
        assert!((duration_ratio(77.32, 5.42) - 14.2657).abs() < 1e-4);
        assert_eq!(weighting_ratio(4.10, 1.67), 2.4);
        assert_eq!(weighting_ratio(10.0, 2.0), 5.0);
    }

    #[test]
    fn jaccard_fixtures() {
        let a = meals(&[(100.0, 200.0)]);
        assert_eq!(jaccard_index(&a, &a), 1.0);
        assert_eq!(jaccard_index(&a, &meals(&[(300.0, 400.0)])), 0.0);
        assert_relative_eq!(jaccard_index(&a, &meals(&[(150.0, 250.0)])), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(jaccard_index(&MealIntervalSet::empty(), &MealIntervalSet::empty()), 1.0);
        assert_eq!(jaccard_index(&a, &MealIntervalSet::empty()), 0.0);
    }

    fn recording(rows: &[[f64; 6]], fs: f64) -> ImuRecording {
        ImuRecording::new(
            rows.iter().map(|&r| ImuSample::from(r)).collect(),
            fs,
            Handedness::Right,
            "",
        )
        .unwrap()
    }

    fn energy_oracle(rows: &[[f64; 6]], half: usize) -> Vec<f64> {
        let m = rows.len() as isize;
        (0..m)
            .map(|i| {
                let mut sum = 0.0;
                let mut count = 0;
                for j in i - half as isize..=i + half as isize {
                    if j >= 0 && j < m {
                        let r = rows[j as usize];
                        sum += r[0].abs() + r[1].abs() + r[2].abs();
                        count += 1;
                    }
                }
                sum / count as f64
            })
            .collect()
    }

    #[test]
    fn energy_fixtures() {
        let rows = vec![[1.0, -1.0, 1.0, 5.0, 5.0, 5.0]; 50];
        assert!(wrist_motion_energy(&recording(&rows, 10.0), 1.0)
            .unwrap()
            .iter()
            .all(|&e| (e - 3.0).abs() < 1e-15));
        let rows = vec![[0.0, 0.0, 0.0, 5.0, 5.0, 5.0]; 50];
        assert!(wrist_motion_energy(&recording(&rows, 10.0), 1.0)
            .unwrap()
            .iter()
            .all(|&e| e == 0.0));
        assert!(wrist_motion_energy(&recording(&rows, 10.0), 0.9).is_err());
    }

    proptest! {
        #[test]
        fn energy_matches_oracle(rows in prop::collection::vec(prop::array::uniform6(-20.0f64..20.0), 1..300), half in 1usize..40) {
            let fs = 10.0;
            let e = wrist_motion_energy(&recording(&rows, fs), 2.0 * half as f64 / fs).unwrap();
            for (a, b) in e.iter().zip(energy_oracle(&rows, half)) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }

        #[test]
        fn bite_confusion_invariants(truth_raw in prop::collection::vec((0.5f64..5.0, 0.5f64..5.0), 0..30),
                                     det in prop::collection::vec(0.0f64..200.0, 0..60)) {
            let mut t = 0.0;
            let truth: Vec<Interval> = truth_raw.iter().map(|&(g, l)| { let v = iv(t + g, t + g + l); t += g + l; v }).collect();
            let d = BiteSet::from_times(det).unwrap();
            let c = match_bites(&d, &truth).unwrap();
            prop_assert_eq!(c.tp + c.fn_, truth.len() as u64);
            prop_assert!(c.tp <= d.len() as u64);
            prop_assert_eq!(c.tp + c.fp, d.len() as u64);
        }

        #[test]
        fn meal_metric_identities(a in prop::collection::vec((1.0f64..200.0, 1.0f64..300.0), 0..6),
                                  b in prop::collection::vec((1.0f64..200.0, 1.0f64..300.0), 0..6)) {
            let build = |raw: &[(f64, f64)]| {
                let mut t = 0.0;
                meals(&raw.iter().map(|&(g, l)| { let v = (t + g, t + g + l); t += g + l; v }).collect::<Vec<_>>())
            };
            let (ea, eb) = (build(&a), build(&b));
            let duration = 3000.0;
            let c = meal_confusion(&ea, &eb, duration, 1.0).unwrap();
            prop_assert_eq!(c.total(), 3000);
            prop_assert_eq!(weighted_accuracy(&c, 1.0), accuracy(&c));
            let j = jaccard_index(&ea, &eb);
            prop_assert!((j - jaccard_index(&eb, &ea)).abs() < 1e-12 && (0.0..=1.0).contains(&j));

            // Finer resolution moves each boundary by at most one coarse step.
            let fine = meal_confusion(&ea, &eb, duration, 0.1).unwrap();
            let boundaries = (2 * (ea.len() + eb.len())) as f64;
            let coarse_tp = c.tp as f64;
            let fine_tp = fine.tp as f64 * 0.1;
            prop_assert!((coarse_tp - fine_tp).abs() <= 2.0 * boundaries + 1e-9);
        }
    }
}
