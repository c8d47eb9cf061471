//! Deterministic synthetic wrist recordings with planted bite gestures.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::{flip_hand, Handedness, ImuRecording, ImuSample, CHANNELS};
use crate::interval::{BiteAnnotation, Interval, MealAnnotation};

/// Rest between the end of one gesture and the start of the next.
const MIN_REST_S: f64 = 0.5;

/// Peak of `sin(2 pi u) * hann(u)`, used to scale the roll channel.
const ROLL_PEAK: f64 = 0.649_519_052_838_329;

/// Shape of one planted intake gesture.
///
/// Over the gesture support, `u` runs from 0 to 1. The roll channel `g_x`
/// swings one way then back, `sin(2 pi u) hann(u)`. `g_z` carries a short
/// wrist flick of `flick_s` that ends with the gesture. All other channels
/// follow `hann(u)`. Each channel is scaled by its `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiteTemplate {
    pub amplitude: [f64; CHANNELS],
    pub mean_width_s: f64,
    /// Widths are uniform in `mean +- jitter`.
    pub width_jitter_s: f64,
    pub flick_s: f64,
}

impl Default for BiteTemplate {
    fn default() -> Self {
        Self {
            amplitude: [2.0, 1.5, -1.5, 3.0, 1.0, 2.0],
            mean_width_s: 4.52,
            width_jitter_s: 0.5,
            flick_s: 0.4,
        }
    }
}

fn hann(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        0.5 * (1.0 - (2.0 * PI * u).cos())
    } else {
        0.0
    }
}

impl BiteTemplate {
    /// Gesture value `t` seconds after its start, for a gesture of `width_s`.
    pub fn value(&self, t: f64, width_s: f64) -> [f64; CHANNELS] {
        let u = t / width_s;
        let body = hann(u);
        let roll = (2.0 * PI * u).sin() * body / ROLL_PEAK;
        let flick = hann((t - (width_s - self.flick_s)) / self.flick_s);
        let shape = [body, body, body, roll, body, flick];
        std::array::from_fn(|c| self.amplitude[c] * shape[c])
    }

    fn validate(&self) -> Result<()> {
        if !(self.width_jitter_s >= 0.0 && self.mean_width_s > self.width_jitter_s) {
            return Err(Error::InvalidSpec("bite widths must be positive".into()));
        }
        let room = self.mean_width_s - self.width_jitter_s;
        if !(self.flick_s > 0.0 && self.flick_s < room) {
            return Err(Error::InvalidSpec("flick must fit inside the shortest gesture".into()));
        }
        Ok(())
    }
}

/// One meal: gestures start roughly every `mean_inter_bite_s` seconds (each
/// gap drawn uniformly in 75-125 % of the mean) until the window is full, or
/// until `bite_count` gestures are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealPlan {
    pub start_s: f64,
    pub end_s: f64,
    pub mean_inter_bite_s: f64,
    #[serde(default)]
    pub bite_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub meals: Vec<MealPlan>,
    pub template: BiteTemplate,
    pub noise_std: [f64; CHANNELS],
    /// Constant accelerometer offset.
    pub gravity: [f64; 3],
    pub handedness: Handedness,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 600.0,
            sample_rate_hz: 100.0,
            meals: Vec::new(),
            template: BiteTemplate::default(),
            noise_std: [0.1; CHANNELS],
            gravity: [0.0, 0.0, 9.81],
            handedness: Handedness::Right,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidSpec(format!("duration {}", self.duration_s)));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidSampleRate(self.sample_rate_hz));
        }
        if self.noise_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec("noise must be non-negative".into()));
        }
        self.template.validate()?;
        let widest = self.template.mean_width_s + self.template.width_jitter_s;
        let mut previous_end = f64::NEG_INFINITY;
        for m in &self.meals {
            if !(m.start_s >= 0.0 && m.start_s < m.end_s) || m.end_s > self.duration_s {
                return Err(Error::InvalidSpec(format!(
                    "meal [{}, {}] does not fit in [0, {}]",
                    m.start_s, m.end_s, self.duration_s
                )));
            }
            if m.start_s < previous_end {
                return Err(Error::InvalidSpec("meals overlap or are unsorted".into()));
            }
            if 0.75 * m.mean_inter_bite_s < widest + MIN_REST_S {
                return Err(Error::InvalidSpec(format!(
                    "inter-bite interval {} s is too short for {} s gestures",
                    m.mean_inter_bite_s, widest
                )));
            }
            previous_end = m.end_s;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub recording: ImuRecording,
    pub bites: Vec<BiteAnnotation>,
    pub meals: Vec<MealAnnotation>,
}

/// Draws the gesture supports for one meal.
fn schedule(plan: &MealPlan, template: &BiteTemplate, rng: &mut ChaCha8Rng) -> Result<Vec<Interval>> {
    let mut bites = Vec::new();
    let mut cursor = plan.start_s + rng.random_range(0.0..1.0);
    loop {
        if plan.bite_count.is_some_and(|k| bites.len() == k) {
            break;
        }
        let jitter = template.width_jitter_s;
        let width = template.mean_width_s
            + if jitter > 0.0 {
                rng.random_range(-jitter..jitter)
            } else {
                0.0
            };
        if cursor + width > plan.end_s {
            if let Some(k) = plan.bite_count {
                return Err(Error::InvalidSpec(format!(
                    "only {} of {k} bites fit in meal [{}, {}]",
                    bites.len(),
                    plan.start_s,
                    plan.end_s
                )));
            }
            break;
        }
        bites.push(Interval::new(cursor, cursor + width)?);
        let gap = plan.mean_inter_bite_s * rng.random_range(0.75..1.25);
        cursor += gap.max(width + MIN_REST_S);
    }
    Ok(bites)
}

/// Renders `spec` into a recording plus its bite and meal annotations. A
/// left-handed spec yields the mirror image of the right-handed signal.
pub fn generate_recording(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fs = spec.sample_rate_hz;
    let mut bites = Vec::new();
    let mut meals = Vec::with_capacity(spec.meals.len());
    for plan in &spec.meals {
        bites.extend(schedule(plan, &spec.template, &mut rng)?);
        meals.push(Interval::new(plan.start_s, plan.end_s)?);
    }

    let len = (spec.duration_s * fs).round().max(1.0) as usize;
    let mut rows = vec![[0.0; CHANNELS]; len];
    for b in &bites {
        let first = (b.start_s * fs).ceil() as usize;
        let last = ((b.end_s * fs).ceil() as usize).min(len);
        for (n, row) in rows.iter_mut().enumerate().take(last).skip(first) {
            let v = spec.template.value(n as f64 / fs - b.start_s, b.duration_s());
            for (r, x) in row.iter_mut().zip(v) {
                *r += x;
            }
        }
    }
    let noise: Vec<Normal<f64>> = spec
        .noise_std
        .iter()
        .map(|&s| Normal::new(0.0, s).map_err(|e| Error::InvalidSpec(e.to_string())))
        .collect::<Result<_>>()?;
    let samples = rows
        .into_iter()
        .map(|mut row| {
            for (c, r) in row.iter_mut().enumerate() {
                if c < 3 {
                    *r += spec.gravity[c];
                }
                *r += noise[c].sample(&mut rng);
            }
            ImuSample::from_array(row)
        })
        .collect();
    let recording = ImuRecording::new(samples, fs, Handedness::Right, "m/s^2,rad/s")?;
    let recording = match spec.handedness {
        Handedness::Right => recording,
        Handedness::Left => flip_hand(&recording),
    };
    Ok(SynthOutput {
        recording,
        bites,
        meals,
    })
}

/// What a corpus recording was made for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordingKind {
    /// A session that is one meal from start to end, bites annotated.
    Meal,
    /// A long free-living recording, only meal spans annotated.
    Day,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub meals_per_subject: usize,
    pub meal_duration_s: f64,
    /// Free-living recordings, assigned to subjects in turn.
    pub days: usize,
    pub day_duration_s: f64,
    /// Length of the single meal placed in each day.
    pub day_meal_duration_s: f64,
    pub mean_inter_bite_s: f64,
    pub sample_rate_hz: f64,
    pub template: BiteTemplate,
    pub noise_std: [f64; CHANNELS],
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subjects: 5,
            meals_per_subject: 4,
            meal_duration_s: 480.0,
            days: 4,
            day_duration_s: 16_300.0,
            day_meal_duration_s: 1148.0,
            mean_inter_bite_s: 10.0,
            sample_rate_hz: 100.0,
            template: BiteTemplate::default(),
            noise_std: [0.1; CHANNELS],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub subject: String,
    pub kind: RecordingKind,
    pub data: SynthOutput,
}

/// Subject `i` is named `s<i>`; every third subject wears the watch on the
/// left wrist.
pub fn subject_name(i: usize) -> String {
    format!("s{i}")
}

fn subject_hand(i: usize) -> Handedness {
    if i % 3 == 1 {
        Handedness::Left
    } else {
        Handedness::Right
    }
}

/// Spec of the `k`-th meal session or day; seeds are derived from the corpus
/// seed so that each recording is independent of how many others exist.
pub fn corpus_recording_spec(spec: &CorpusSpec, subject: usize, kind: RecordingKind, k: usize) -> SynthSpec {
    let tag = match kind {
        RecordingKind::Meal => 0,
        RecordingKind::Day => 1,
    };
    let seed = spec
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(((subject as u64) << 32) ^ ((k as u64) << 1) ^ tag);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (duration_s, meal) = match kind {
        RecordingKind::Meal => (spec.meal_duration_s, (0.0, spec.meal_duration_s)),
        RecordingKind::Day => {
            let len = spec.day_meal_duration_s;
            let start = rng.random_range(0.1..0.9) * (spec.day_duration_s - len);
            (spec.day_duration_s, (start, start + len))
        }
    };
    SynthSpec {
        duration_s,
        sample_rate_hz: spec.sample_rate_hz,
        meals: vec![MealPlan {
            start_s: meal.0,
            end_s: meal.1,
            mean_inter_bite_s: spec.mean_inter_bite_s,
            bite_count: None,
        }],
        template: spec.template.clone(),
        noise_std: spec.noise_std,
        gravity: [0.0, 0.0, 9.81],
        handedness: subject_hand(subject),
        seed: rng.random(),
    }
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusEntry>> {
    if spec.subjects == 0 {
        return Err(Error::InvalidSpec("corpus needs at least one subject".into()));
    }
    if spec.days > 0 && spec.day_meal_duration_s >= spec.day_duration_s {
        return Err(Error::InvalidSpec("day meal must be shorter than the day".into()));
    }
    let mut out = Vec::new();
    for s in 0..spec.subjects {
        for k in 0..spec.meals_per_subject {
            let data = generate_recording(&corpus_recording_spec(spec, s, RecordingKind::Meal, k))?;
            out.push(CorpusEntry {
                subject: subject_name(s),
                kind: RecordingKind::Meal,
                data,
            });
        }
    }
    for d in 0..spec.days {
        let s = d % spec.subjects;
        let data = generate_recording(&corpus_recording_spec(spec, s, RecordingKind::Day, d))?;
        out.push(CorpusEntry {
            subject: subject_name(s),
            kind: RecordingKind::Day,
            data,
        });
    }
    Ok(out)
}
