//! IMU data model and per-recording preprocessing.

use serde::{Deserialize, Serialize};

use crate::dsp::FirFilter;
use crate::error::{Error, Result};

/// Number of inertial channels: three accelerometer and three gyroscope axes.
pub const CHANNELS: usize = 6;

/// One instant of wrist motion: acceleration and angular velocity per axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl ImuSample {
    pub const fn new(ax: f64, ay: f64, az: f64, gx: f64, gy: f64, gz: f64) -> Self {
        Self { ax, ay, az, gx, gy, gz }
    }

    pub const fn from_array(v: [f64; CHANNELS]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub const fn to_array(self) -> [f64; CHANNELS] {
        [self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn accel(&self) -> [f64; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn gyro(&self) -> [f64; 3] {
        [self.gx, self.gy, self.gz]
    }
}

impl From<[f64; CHANNELS]> for ImuSample {
    fn from(v: [f64; CHANNELS]) -> Self {
        Self::from_array(v)
    }
}

/// Wrist the watch was worn on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn opposite(self) -> Self {
        match self {
            Handedness::Left => Handedness::Right,
            Handedness::Right => Handedness::Left,
        }
    }
}

/// A uniformly sampled six-channel wrist recording. Sample `n` sits at
/// `n / sample_rate_hz` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuRecording {
    samples: Vec<ImuSample>,
    sample_rate_hz: f64,
    handedness: Handedness,
    units: String,
}

impl ImuRecording {
    pub fn new(
        samples: Vec<ImuSample>,
        sample_rate_hz: f64,
        handedness: Handedness,
        units: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("recording has no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate_hz));
        }
        if let Some(row) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite value in sample {row}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            handedness,
            units: units.into(),
        })
    }

    /// Builds a recording from six per-channel series of equal length.
    pub fn from_channels(
        channels: &[Vec<f64>; CHANNELS],
        sample_rate_hz: f64,
        handedness: Handedness,
        units: impl Into<String>,
    ) -> Result<Self> {
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidConfig("channel lengths differ".into()));
        }
        let samples = (0..len)
            .map(|n| ImuSample::from_array(std::array::from_fn(|c| channels[c][n])))
            .collect();
        Self::new(samples, sample_rate_hz, handedness, units)
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn handedness(&self) -> Handedness {
        self.handedness
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.to_array()[c]).collect()
    }

    pub fn channels(&self) -> [Vec<f64>; CHANNELS] {
        std::array::from_fn(|c| self.channel(c))
    }

    pub fn rows(&self) -> Vec<[f64; CHANNELS]> {
        self.samples.iter().map(|s| s.to_array()).collect()
    }

    fn with_channels(&self, channels: &[Vec<f64>; CHANNELS]) -> Self {
        let samples = (0..self.len())
            .map(|n| ImuSample::from_array(std::array::from_fn(|c| channels[c][n])))
            .collect();
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            handedness: self.handedness,
            units: self.units.clone(),
        }
    }
}

/// Per-axis sign pattern that maps a left-wrist frame onto the right-wrist
/// reference: `a_x`, `g_y` and `g_z` change direction.
pub const MIRROR_SIGNS: [f64; CHANNELS] = [-1.0, 1.0, 1.0, 1.0, -1.0, -1.0];

/// Applies the mirroring sign pattern unconditionally and swaps the
/// handedness tag. Applying it twice restores the input.
pub fn flip_hand(rec: &ImuRecording) -> ImuRecording {
    let samples = rec
        .samples
        .iter()
        .map(|s| {
            let v = s.to_array();
            ImuSample::from_array(std::array::from_fn(|c| v[c] * MIRROR_SIGNS[c]))
        })
        .collect();
    ImuRecording {
        samples,
        sample_rate_hz: rec.sample_rate_hz,
        handedness: rec.handedness.opposite(),
        units: rec.units.clone(),
    }
}

/// Maps left-wrist recordings onto the right-wrist reference. Right-wrist
/// recordings are returned unchanged.
pub fn mirror_hand(rec: &ImuRecording) -> ImuRecording {
    match rec.handedness {
        Handedness::Left => flip_hand(rec),
        Handedness::Right => rec.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Moving-average length in samples.
    pub ma_len: usize,
    /// Weight of every moving-average tap.
    pub ma_tap: f64,
    pub hp_cutoff_hz: f64,
    /// High-pass FIR length in samples.
    pub hp_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            ma_len: 25,
            ma_tap: 1.0 / 25.0,
            hp_cutoff_hz: 1.0,
            hp_len: 512,
        }
    }
}

impl PreprocessConfig {
    /// Defaults are stated for 100 Hz; this keeps the smoothing span in
    /// seconds constant at other rates.
    pub fn for_sample_rate(sample_rate_hz: f64) -> Self {
        let ma_len = ((25.0 * sample_rate_hz / 100.0).round() as usize).max(1);
        Self {
            ma_len,
            ma_tap: 1.0 / ma_len as f64,
            ..Self::default()
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.ma_len < 1 {
            return Err(Error::InvalidConfig("ma_len must be at least 1".into()));
        }
        if self.hp_len < 2 {
            return Err(Error::InvalidConfig("hp_len must be at least 2".into()));
        }
        if !(self.hp_cutoff_hz > 0.0 && self.hp_cutoff_hz < sample_rate_hz / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "hp_cutoff_hz {} must lie in (0, {})",
                self.hp_cutoff_hz,
                sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// Moving-average smoothing of all six streams.
pub fn smooth(rec: &ImuRecording, ma_len: usize, ma_tap: f64) -> ImuRecording {
    let ma = FirFilter::moving_average(ma_len.max(1), ma_tap);
    let channels = rec.channels().map(|c| ma.apply(&c));
    rec.with_channels(&channels)
}

/// Smooths every stream with the moving average, then removes gravity from
/// the accelerometer streams with the high-pass FIR. Output length and sample
/// rate match the input.
pub fn preprocess(rec: &ImuRecording, cfg: &PreprocessConfig) -> Result<ImuRecording> {
    cfg.validate(rec.sample_rate_hz)?;
    if rec.len() < cfg.hp_len {
        return Err(Error::RecordingTooShort {
            samples: rec.len(),
            needed: cfg.hp_len,
        });
    }
    let ma = FirFilter::moving_average(cfg.ma_len, cfg.ma_tap);
    let hp = FirFilter::highpass(cfg.hp_len, cfg.hp_cutoff_hz / rec.sample_rate_hz);
    let mut channels = rec.channels();
    for (c, series) in channels.iter_mut().enumerate() {
        let smoothed = ma.apply(series);
        *series = if c < 3 { hp.apply(&smoothed) } else { smoothed };
    }
    Ok(rec.with_channels(&channels))
}

/// Euclidean norm of the acceleration vector at every sample.
pub fn accel_magnitude(rec: &ImuRecording) -> Vec<f64> {
    rec.samples
        .iter()
        .map(|s| (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt())
        .collect()
}

/// Linear interpolation onto a uniform grid at `target_hz` spanning the same
/// duration `M / f_s`. Grid points past the last input sample hold its value.
pub fn resample(rec: &ImuRecording, target_hz: f64) -> Result<ImuRecording> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidSampleRate(target_hz));
    }
    let out_len = ((rec.len() as f64 * target_hz / rec.sample_rate_hz).round() as usize).max(1);
    let step = rec.sample_rate_hz / target_hz;
    let last = rec.len() - 1;
    let samples = (0..out_len)
        .map(|k| {
            let pos = k as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return rec.samples[last];
            }
            let frac = pos - i as f64;
            let a = rec.samples[i].to_array();
            let b = rec.samples[i + 1].to_array();
            ImuSample::from_array(std::array::from_fn(|c| a[c] + frac * (b[c] - a[c])))
        })
        .collect();
    Ok(ImuRecording {
        samples,
        sample_rate_hz: target_hz,
        handedness: rec.handedness,
        units: rec.units.clone(),
    })
}
