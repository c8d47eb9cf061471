//! Glue between the stages: recording preparation, detection over whole
//! recordings and the training pool.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bites::{detect_bites, BiteDetectConfig, BiteSet};
use crate::error::{Error, Result};
use crate::evaluate::{
    match_bites, meal_confusion, overlap_union_s, weighting_ratio, BiteConfusion, BiteReport, EvalReport, MealConfusion,
};
use crate::imu::{mirror_hand, preprocess, ImuRecording, ImuSample, PreprocessConfig, CHANNELS};
use crate::meals::{localize_meals, LocalizerConfig, MealIntervalSet};
use crate::net::{
    train_with_progress, EpochStats, ModelParams, NetConfig, Real, TrainConfig, TrainReport, WindowSource,
};
use crate::synth::{CorpusEntry, RecordingKind};
use crate::windowing::{assign_label, window_starts, Annotations, Label, WindowConfig};

/// Maps the recording onto the right-wrist frame, then filters it.
pub fn prepare(rec: &ImuRecording, cfg: &PreprocessConfig) -> Result<ImuRecording> {
    preprocess(&mirror_hand(rec), cfg)
}

/// Network output over a prepared recording, one value per four samples.
pub fn bite_probabilities<T: Real>(params: &ModelParams<T>, prepared: &ImuRecording) -> Result<Vec<f64>> {
    params.forward_sequence(&prepared.rows())
}

pub fn detect_recording<T: Real>(
    params: &ModelParams<T>,
    prepared: &ImuRecording,
    cfg: &BiteDetectConfig,
) -> Result<BiteSet> {
    let p = bite_probabilities(params, prepared)?;
    detect_bites(&p, prepared.sample_rate_hz(), cfg)
}

pub fn localize_recording(bites: &BiteSet, rec: &ImuRecording, cfg: &LocalizerConfig) -> Result<MealIntervalSet> {
    localize_meals(bites, rec.duration_s(), rec.sample_rate_hz(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRef {
    pub recording: usize,
    pub start: usize,
    pub label: Label,
}

/// Labelled training windows that borrow their samples from a set of
/// prepared recordings instead of copying them.
#[derive(Debug, Clone)]
pub struct TrainingPool {
    recordings: Vec<ImuRecording>,
    windows: Vec<WindowRef>,
    width: usize,
    sample_rate_hz: f64,
}

impl TrainingPool {
    pub fn new(sample_rate_hz: f64, window_s: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        let width = (window_s * sample_rate_hz).round() as usize;
        if width == 0 {
            return Err(Error::InvalidConfig(format!("window of {window_s} s is empty")));
        }
        Ok(Self {
            recordings: Vec::new(),
            windows: Vec::new(),
            width,
            sample_rate_hz,
        })
    }

    /// Adds every labelled window of `prepared`. Not-applicable windows are
    /// left out. Returns the number of windows added.
    pub fn add(&mut self, prepared: ImuRecording, annotations: Annotations<'_>, cfg: &WindowConfig) -> Result<usize> {
        cfg.validate()?;
        if prepared.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::InvalidSampleRate(prepared.sample_rate_hz()));
        }
        if cfg.window_samples(self.sample_rate_hz) != self.width {
            return Err(Error::InvalidConfig("window length differs from the pool's".into()));
        }
        let id = self.recordings.len();
        let before = self.windows.len();
        for start in window_starts(prepared.len(), self.sample_rate_hz, cfg) {
            let end_time_s = (start + self.width) as f64 / self.sample_rate_hz;
            let label = assign_label(end_time_s, annotations, cfg.epsilon_s);
            if label != Label::NotApplicable {
                self.windows.push(WindowRef {
                    recording: id,
                    start,
                    label,
                });
            }
        }
        self.recordings.push(prepared);
        Ok(self.windows.len() - before)
    }

    /// Keeps a uniform random subset of at most `max` negative windows.
    pub fn limit_negatives(&mut self, max: usize, seed: u64) {
        let negatives: Vec<usize> = (0..self.windows.len())
            .filter(|&i| self.windows[i].label == Label::Negative)
            .collect();
        if negatives.len() <= max {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![true; self.windows.len()];
        for &i in &negatives {
            keep[i] = false;
        }
        for k in sample(&mut rng, negatives.len(), max) {
            keep[negatives[k]] = true;
        }
        let mut it = keep.into_iter();
        self.windows.retain(|_| it.next().unwrap_or(false));
    }

    /// `(positives, negatives)`.
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.windows.iter().filter(|w| w.label == Label::Positive).count();
        (pos, self.windows.len() - pos)
    }

    pub fn windows(&self) -> &[WindowRef] {
        &self.windows
    }

    pub fn recordings(&self) -> &[ImuRecording] {
        &self.recordings
    }

    pub fn window_samples(&self) -> usize {
        self.width
    }
}

impl WindowSource for TrainingPool {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn label(&self, index: usize) -> Label {
        self.windows[index].label
    }

    fn frame(&self, index: usize) -> &[ImuSample] {
        let w = self.windows[index];
        &self.recordings[w.recording].samples()[w.start..w.start + self.width]
    }
}

/// Copies the window rows out of a prepared recording, for callers that
/// need owned `[f64; 6]` frames.
pub fn window_rows(rec: &ImuRecording, start: usize, len: usize) -> Vec<[f64; CHANNELS]> {
    rec.samples()[start..start + len].iter().map(|s| s.to_array()).collect()
}

/// Every setting of a train-and-evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Seed for the initial weights.
    pub init_seed: u64,
    pub meal_windows: WindowConfig,
    pub day_windows: WindowConfig,
    /// Cap on negative training windows; `None` keeps all of them.
    pub max_negatives: Option<usize>,
    pub detect: BiteDetectConfig,
    pub localizer: LocalizerConfig,
    /// Timeline resolution for meal metrics.
    pub resolution_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            init_seed: 0,
            meal_windows: WindowConfig::in_meal(),
            day_windows: WindowConfig::free_living(),
            max_negatives: None,
            detect: BiteDetectConfig::default(),
            localizer: LocalizerConfig::default(),
            resolution_s: 1.0,
        }
    }
}

impl PipelineConfig {
    /// The reduced network and negative budget used for quick synthetic
    /// runs.
    pub fn reduced() -> Self {
        Self {
            net: NetConfig::with_widths([8, 16, 32], 32),
            max_negatives: Some(16_000),
            ..Self::default()
        }
    }
}

fn prepare_all(entries: &[&CorpusEntry], cfg: &PreprocessConfig) -> Result<Vec<ImuRecording>> {
    entries.par_iter().map(|e| prepare(&e.data.recording, cfg)).collect()
}

/// Prepares the recordings and collects their training windows: bite
/// labels on meal sessions, negatives outside meals on free-living days.
pub fn build_pool(entries: &[&CorpusEntry], cfg: &PipelineConfig) -> Result<TrainingPool> {
    let prepared = prepare_all(entries, &cfg.preprocess)?;
    let fs = match prepared.first() {
        Some(r) => r.sample_rate_hz(),
        None => return Err(Error::InvalidBatch("no training recordings".into())),
    };
    if cfg.meal_windows.window_s != cfg.day_windows.window_s {
        return Err(Error::InvalidConfig(
            "meal and day windows must have the same length".into(),
        ));
    }
    let mut pool = TrainingPool::new(fs, cfg.meal_windows.window_s)?;
    for (e, rec) in entries.iter().zip(prepared) {
        match e.kind {
            RecordingKind::Meal => pool.add(rec, Annotations::Bites(&e.data.bites), &cfg.meal_windows)?,
            RecordingKind::Day => pool.add(rec, Annotations::Meals(&e.data.meals), &cfg.day_windows)?,
        };
    }
    if let Some(max) = cfg.max_negatives {
        pool.limit_negatives(max, cfg.train.seed);
    }
    Ok(pool)
}

pub fn train_model(
    entries: &[&CorpusEntry],
    cfg: &PipelineConfig,
    progress: impl FnMut(&EpochStats),
) -> Result<(ModelParams<f32>, TrainReport)> {
    let pool = build_pool(entries, cfg)?;
    let init = ModelParams::<f32>::init(&cfg.net, cfg.init_seed)?;
    train_with_progress(&init, &pool, &cfg.train, progress)
}

/// Detections and estimated meals for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingOutput {
    pub bites: BiteSet,
    pub meals: MealIntervalSet,
}

pub fn run_recording<T: Real>(
    params: &ModelParams<T>,
    rec: &ImuRecording,
    cfg: &PipelineConfig,
) -> Result<RecordingOutput> {
    let prepared = prepare(rec, &cfg.preprocess)?;
    let bites = detect_recording(params, &prepared, &cfg.detect)?;
    let meals = localize_recording(&bites, &prepared, &cfg.localizer)?;
    Ok(RecordingOutput { bites, meals })
}

/// Meal-level counts that add up across recordings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MealTally {
    pub confusion: MealConfusion,
    pub overlap_s: f64,
    pub union_s: f64,
    pub duration_s: f64,
    pub meal_s: f64,
}

impl MealTally {
    pub fn add(&mut self, other: &MealTally) {
        self.confusion = self.confusion + other.confusion;
        self.overlap_s += other.overlap_s;
        self.union_s += other.union_s;
        self.duration_s += other.duration_s;
        self.meal_s += other.meal_s;
    }

    /// Metrics weighted by the pooled day-to-meal duration ratio.
    pub fn report(&self) -> EvalReport {
        let ratio = if self.meal_s > 0.0 {
            weighting_ratio(self.duration_s, self.meal_s)
        } else {
            1.0
        };
        EvalReport::from_parts(self.confusion, self.overlap_s, self.union_s, ratio)
    }
}

/// Metrics pooled over a set of recordings. Bite metrics come from meal
/// sessions, meal metrics from free-living days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    pub subject: String,
    pub bites: Option<BiteReport>,
    pub meals: Option<EvalReport>,
    pub meal_tally: Option<MealTally>,
}

impl SubjectReport {
    fn new(subject: &str, bites: Option<BiteConfusion>, meal_tally: Option<MealTally>) -> Self {
        Self {
            subject: subject.to_string(),
            bites: bites.map(BiteReport::from_confusion),
            meals: meal_tally.as_ref().map(MealTally::report),
            meal_tally,
        }
    }
}

pub fn evaluate_entries<T: Real>(
    params: &ModelParams<T>,
    subject: &str,
    entries: &[&CorpusEntry],
    cfg: &PipelineConfig,
) -> Result<SubjectReport> {
    let outputs: Vec<RecordingOutput> = entries
        .par_iter()
        .map(|e| run_recording(params, &e.data.recording, cfg))
        .collect::<Result<_>>()?;
    let mut bites: Option<BiteConfusion> = None;
    let mut meals: Option<MealTally> = None;
    for (e, out) in entries.iter().zip(&outputs) {
        match e.kind {
            RecordingKind::Meal => {
                let c = match_bites(&out.bites, &e.data.bites)?;
                bites = Some(bites.unwrap_or_default() + c);
            }
            RecordingKind::Day => {
                let truth = MealIntervalSet::new(e.data.meals.clone())?;
                let duration_s = e.data.recording.duration_s();
                let (overlap_s, union_s) = overlap_union_s(&out.meals, &truth);
                let tally = MealTally {
                    confusion: meal_confusion(&out.meals, &truth, duration_s, cfg.resolution_s)?,
                    overlap_s,
                    union_s,
                    duration_s,
                    meal_s: truth.total_duration_s(),
                };
                meals.get_or_insert_with(MealTally::default).add(&tally);
            }
        }
    }
    Ok(SubjectReport::new(subject, bites, meals))
}

/// Distinct subjects in order of first appearance.
pub fn subjects(entries: &[CorpusEntry]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for e in entries {
        if !out.contains(&e.subject) {
            out.push(e.subject.clone());
        }
    }
    out
}

/// Trains on every subject except `held_out` and evaluates on `held_out`.
pub fn loso_fold(
    entries: &[CorpusEntry],
    held_out: &str,
    cfg: &PipelineConfig,
    progress: impl FnMut(&EpochStats),
) -> Result<(ModelParams<f32>, SubjectReport)> {
    let (test, train): (Vec<&CorpusEntry>, Vec<&CorpusEntry>) = entries.iter().partition(|e| e.subject == held_out);
    if test.is_empty() {
        return Err(Error::InvalidConfig(format!("no recordings for subject {held_out}")));
    }
    let (model, _) = train_model(&train, cfg, progress)?;
    let report = evaluate_entries(&model, held_out, &test, cfg)?;
    Ok((model, report))
}

/// Bite and meal metrics pooled over folds.
pub fn pool_reports(reports: &[SubjectReport]) -> SubjectReport {
    let bites = reports
        .iter()
        .filter_map(|r| r.bites.map(|b| b.confusion))
        .reduce(|a, b| a + b);
    let meals = reports.iter().filter_map(|r| r.meal_tally).reduce(|mut a, b| {
        a.add(&b);
        a
    });
    SubjectReport::new("all", bites, meals)
}
