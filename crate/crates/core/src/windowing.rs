//! Training-example extraction: sliding windows, right-edge labels, rotation
//! augmentation and class-balanced mini-batches.

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::{ImuRecording, ImuSample, CHANNELS};
use crate::interval::{BiteAnnotation, MealAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    NotApplicable,
}

impl Label {
    /// Training target: 1 for positive, 0 for negative.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Positive => Some(1.0),
            Label::Negative => Some(0.0),
            Label::NotApplicable => None,
        }
    }
}

/// Anything carrying a window label; lets batching run over owned windows
/// and lightweight references alike.
pub trait Labeled {
    fn label(&self) -> Label;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub frame: Vec<ImuSample>,
    pub end_time_s: f64,
    pub label: Label,
}

impl Labeled for Label {
    fn label(&self) -> Label {
        *self
    }
}

impl Labeled for LabeledWindow {
    fn label(&self) -> Label {
        self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Window length in seconds.
    pub window_s: f64,
    /// Step between consecutive window starts in seconds.
    pub step_s: f64,
    /// Tolerance around a bite end for positive labels, in seconds.
    pub epsilon_s: f64,
}

impl WindowConfig {
    /// Settings for meal-only recordings with bite annotations.
    pub fn in_meal() -> Self {
        Self {
            window_s: 5.0,
            step_s: 0.05,
            epsilon_s: 0.1,
        }
    }

    /// Settings for long free-living recordings with meal annotations.
    pub fn free_living() -> Self {
        Self {
            step_s: 1.0,
            ..Self::in_meal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.window_s) && positive(self.step_s) && positive(self.epsilon_s)) {
            return Err(Error::InvalidConfig("window, step and epsilon must be positive".into()));
        }
        if self.step_s > self.window_s {
            return Err(Error::InvalidConfig(
                "window step must not exceed the window length".into(),
            ));
        }
        Ok(())
    }

    pub fn window_samples(&self, sample_rate_hz: f64) -> usize {
        ((self.window_s * sample_rate_hz).round() as usize).max(1)
    }

    pub fn step_samples(&self, sample_rate_hz: f64) -> usize {
        ((self.step_s * sample_rate_hz).round() as usize).max(1)
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self::in_meal()
    }
}

/// Start sample of every window that fits in a recording of `len` samples.
pub fn window_starts(len: usize, sample_rate_hz: f64, cfg: &WindowConfig) -> Vec<usize> {
    let width = cfg.window_samples(sample_rate_hz);
    let step = cfg.step_samples(sample_rate_hz);
    if len < width {
        return Vec::new();
    }
    (0..=len - width).step_by(step).collect()
}

/// A window borrowed from its recording.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub frame: &'a [ImuSample],
    pub start: usize,
    pub end_time_s: f64,
}

/// Windows of `window_s` seconds every `step_s` seconds. Each window's time
/// stamp is its right edge, `(start + width) / f_s`.
pub fn slide_windows<'a>(rec: &'a ImuRecording, cfg: &WindowConfig) -> Vec<Window<'a>> {
    let fs = rec.sample_rate_hz();
    let width = cfg.window_samples(fs);
    window_starts(rec.len(), fs, cfg)
        .into_iter()
        .map(|start| Window {
            frame: &rec.samples()[start..start + width],
            start,
            end_time_s: (start + width) as f64 / fs,
        })
        .collect()
}

/// Ground truth available for a recording.
#[derive(Debug, Clone, Copy)]
pub enum Annotations<'a> {
    /// Meal recording with every intake cycle annotated.
    Bites(&'a [BiteAnnotation]),
    /// Free-living recording with self-reported meal spans.
    Meals(&'a [MealAnnotation]),
}

/// Label of a window whose right edge sits at `end_time_s`.
///
/// With bite annotations the window is positive when its right edge lies
/// within `epsilon_s` (inclusive) of a bite end. With meal annotations it is
/// not applicable inside a meal and negative elsewhere.
pub fn assign_label(end_time_s: f64, annotations: Annotations<'_>, epsilon_s: f64) -> Label {
    match annotations {
        Annotations::Bites(bites) => {
            let hit = bites.iter().any(|b| (end_time_s - b.end_s).abs() <= epsilon_s);
            if hit {
                Label::Positive
            } else {
                Label::Negative
            }
        }
        Annotations::Meals(meals) => {
            if meals.iter().any(|m| m.contains(end_time_s)) {
                Label::NotApplicable
            } else {
                Label::Negative
            }
        }
    }
}

/// Slides windows over `rec` and labels each by its right edge.
pub fn label_windows(rec: &ImuRecording, annotations: Annotations<'_>, cfg: &WindowConfig) -> Vec<LabeledWindow> {
    slide_windows(rec, cfg)
        .into_iter()
        .map(|w| LabeledWindow {
            frame: w.frame.to_vec(),
            end_time_s: w.end_time_s,
            label: assign_label(w.end_time_s, annotations, cfg.epsilon_s),
        })
        .collect()
}

pub type Rotation = [[f64; 3]; 3];

/// Counter-clockwise rotation about the x axis, angle in degrees.
pub fn rotation_x(deg: f64) -> Rotation {
    let (s, c) = deg.to_radians().sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

/// Counter-clockwise rotation about the z axis, angle in degrees.
pub fn rotation_z(deg: f64) -> Rotation {
    let (s, c) = deg.to_radians().sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn matmul3(a: &Rotation, b: &Rotation) -> Rotation {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// Which composition of the two axis rotations is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationKind {
    X,
    Z,
    XThenZ,
    ZThenX,
}

impl RotationKind {
    pub const ALL: [RotationKind; 4] = [
        RotationKind::X,
        RotationKind::Z,
        RotationKind::XThenZ,
        RotationKind::ZThenX,
    ];

    /// `XThenZ` is the product `Q_x * Q_z`, `ZThenX` is `Q_z * Q_x`.
    pub fn matrix(self, theta_x_deg: f64, theta_z_deg: f64) -> Rotation {
        let qx = rotation_x(theta_x_deg);
        let qz = rotation_z(theta_z_deg);
        match self {
            RotationKind::X => qx,
            RotationKind::Z => qz,
            RotationKind::XThenZ => matmul3(&qx, &qz),
            RotationKind::ZThenX => matmul3(&qz, &qx),
        }
    }
}

/// Standard deviation of the augmentation angles, degrees.
pub const AUGMENT_STD_DEG: f64 = 10.0;

/// Draws an augmentation: `None` half of the time, otherwise a random
/// rotation about x and/or z. Rotation about y is never produced.
pub fn draw_rotation<R: Rng + ?Sized>(rng: &mut R) -> Option<Rotation> {
    if rng.random_bool(0.5) {
        return None;
    }
    let angle = Normal::new(0.0, AUGMENT_STD_DEG).expect("valid normal");
    let theta_x = angle.sample(rng);
    let theta_z = angle.sample(rng);
    let kind = RotationKind::ALL[rng.random_range(0..RotationKind::ALL.len())];
    Some(kind.matrix(theta_x, theta_z))
}

/// Rotates the accelerometer and gyroscope triple of every row by `q`.
pub fn rotate_rows<T: Float>(rows: &mut [[T; CHANNELS]], q: &Rotation) {
    let q: [[T; 3]; 3] = q.map(|r| r.map(|v| T::from(v).expect("finite rotation")));
    for row in rows {
        for base in [0, 3] {
            let v = [row[base], row[base + 1], row[base + 2]];
            for i in 0..3 {
                row[base + i] = q[i][0] * v[0] + q[i][1] * v[1] + q[i][2] * v[2];
            }
        }
    }
}

/// Returns `frame` unchanged with probability 1/2, otherwise rotated about
/// the x and/or z axis by normally distributed angles.
pub fn rotation_augment<R: Rng + ?Sized>(frame: &[ImuSample], rng: &mut R) -> Vec<ImuSample> {
    match draw_rotation(rng) {
        None => frame.to_vec(),
        Some(q) => {
            let mut rows: Vec<[f64; CHANNELS]> = frame.iter().map(|s| s.to_array()).collect();
            rotate_rows(&mut rows, &q);
            rows.into_iter().map(ImuSample::from_array).collect()
        }
    }
}

/// Splits one epoch of `pool` into batches holding exactly `batch_size / 2`
/// positives and `batch_size / 2` negatives.
///
/// The epoch covers the larger class once, in shuffled order. The smaller
/// class is drawn from successive reshuffles of itself, so it is reused once
/// exhausted. Returns indices into `pool`.
pub fn make_balanced_batches<W: Labeled, R: Rng + ?Sized>(
    pool: &[W],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || !batch_size.is_multiple_of(2) {
        return Err(Error::InvalidBatch(format!(
            "batch size must be a positive even number, got {batch_size}"
        )));
    }
    let half = batch_size / 2;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, w) in pool.iter().enumerate() {
        match w.label() {
            Label::Positive => positives.push(i),
            Label::Negative => negatives.push(i),
            Label::NotApplicable => {
                return Err(Error::InvalidBatch(format!(
                    "pool entry {i} is labelled not-applicable"
                )))
            }
        }
    }
    if positives.len() < half || negatives.len() < half {
        return Err(Error::InvalidBatch(format!(
            "need at least {half} examples per class, have {} positive and {} negative",
            positives.len(),
            negatives.len()
        )));
    }
    let n_batches = positives.len().max(negatives.len()).div_ceil(half);
    let mut pos = CyclicDraw::new(positives, rng);
    let mut neg = CyclicDraw::new(negatives, rng);
    let mut batches = Vec::with_capacity(n_batches);
    for _ in 0..n_batches {
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..half {
            batch.push(pos.next(rng));
            batch.push(neg.next(rng));
        }
        batch.shuffle(rng);
        batches.push(batch);
    }
    Ok(batches)
}

/// Walks a shuffled copy of `items`, reshuffling whenever it runs out.
struct CyclicDraw {
    items: Vec<usize>,
    cursor: usize,
}

impl CyclicDraw {
    fn new<R: Rng + ?Sized>(mut items: Vec<usize>, rng: &mut R) -> Self {
        items.shuffle(rng);
        Self { items, cursor: 0 }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        if self.cursor == self.items.len() {
            self.items.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.items[self.cursor - 1]
    }
}
