use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::Real;
use crate::error::{Error, Result};
use crate::imu::{ImuSample, CHANNELS};
use crate::windowing::{draw_rotation, make_balanced_batches, rotate_rows, Label, LabeledWindow};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
const CLAMP: f64 = 1e-7;

/// Examples per gradient job. Fixed so the summation order, and therefore
/// the trained weights, do not depend on the thread count.
const JOB_SIZE: usize = 8;

/// Summed binary cross-entropy of `preds` against 0/1 `targets`.
pub fn bce_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::InvalidConfig(format!(
            "{} predictions but {} targets",
            preds.len(),
            targets.len()
        )));
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub seed: u64,
    /// Random rotation of half the examples in every batch.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 5,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-7,
            seed: 0,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be non-negative".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("need at least one epoch".into()));
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || self.rmsprop_epsilon <= 0.0 {
            return Err(Error::InvalidConfig("invalid RMSProp settings".into()));
        }
        Ok(())
    }
}

/// A labelled pool of training windows.
pub trait WindowSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, index: usize) -> Label;

    fn frame(&self, index: usize) -> &[ImuSample];
}

impl WindowSource for [LabeledWindow] {
    fn len(&self) -> usize {
        <[LabeledWindow]>::len(self)
    }

    fn label(&self, index: usize) -> Label {
        self[index].label
    }

    fn frame(&self, index: usize) -> &[ImuSample] {
        &self[index].frame
    }
}

impl WindowSource for Vec<LabeledWindow> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn label(&self, index: usize) -> Label {
        self[index].label
    }

    fn frame(&self, index: usize) -> &[ImuSample] {
        &self[index].frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub batches: usize,
    /// Mean per-example cross-entropy over the epoch.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

struct RmsProp<T> {
    mean_square: Vec<T>,
    decay: T,
    epsilon: T,
    learning_rate: T,
}

impl<T: Real> RmsProp<T> {
    fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            mean_square: vec![T::zero(); len],
            decay: T::lit(cfg.rmsprop_decay),
            epsilon: T::lit(cfg.rmsprop_epsilon),
            learning_rate: T::lit(cfg.learning_rate),
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T]) {
        let one = T::one();
        for ((w, &g), v) in params.iter_mut().zip(grad).zip(&mut self.mean_square) {
            *v = self.decay * *v + (one - self.decay) * g * g;
            *w = *w - self.learning_rate * g / (v.sqrt() + self.epsilon);
        }
    }
}

/// One example of a batch with its random draws fixed up front.
struct Job {
    index: usize,
    seed: u64,
}

/// Trains with class-balanced mini-batches and RMSProp on the summed
/// cross-entropy. Not-applicable windows are rejected.
pub fn train<T: Real, S: WindowSource + ?Sized>(
    params: &ModelParams<T>,
    pool: &S,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainReport)> {
    train_with_progress(params, pool, cfg, |_| {})
}

/// [`train`], reporting each finished epoch to `progress`.
pub fn train_with_progress<T: Real, S: WindowSource + ?Sized>(
    params: &ModelParams<T>,
    pool: &S,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(ModelParams<T>, TrainReport)> {
    cfg.validate()?;
    let labels: Vec<Label> = (0..pool.len()).map(|i| pool.label(i)).collect();
    let mut model = params.clone();
    let mut optimizer = RmsProp::new(model.count(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        let batches = make_balanced_batches(&labels, cfg.batch_size, &mut rng)?;
        let mut loss_sum = 0.0;
        let mut examples = 0usize;
        for batch in &batches {
            let jobs: Vec<Job> = batch
                .iter()
                .map(|&index| Job {
                    index,
                    seed: rng.random(),
                })
                .collect();
            let partials: Vec<(Vec<T>, f64)> = jobs
                .par_chunks(JOB_SIZE)
                .map(|chunk| {
                    let mut grad = vec![T::zero(); model.count()];
                    let mut loss = 0.0;
                    for job in chunk {
                        loss += example_gradient(&model, pool, &labels, job, cfg.augment, &mut grad);
                    }
                    Ok::<_, Error>((grad, loss))
                })
                .collect::<Result<_>>()?;
            let mut grad = vec![T::zero(); model.count()];
            for (g, loss) in &partials {
                for (acc, &v) in grad.iter_mut().zip(g) {
                    *acc = *acc + v;
                }
                loss_sum += loss;
            }
            examples += batch.len();
            optimizer.step(&mut model.data, &grad);
        }
        let stats = EpochStats {
            epoch,
            batches: batches.len(),
            mean_loss: loss_sum / examples.max(1) as f64,
        };
        progress(&stats);
        report.epochs.push(stats);
    }
    Ok((model, report))
}

fn example_gradient<T: Real, S: WindowSource + ?Sized>(
    model: &ModelParams<T>,
    pool: &S,
    labels: &[Label],
    job: &Job,
    augment: bool,
    grad: &mut [T],
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let mut rows: Vec<[T; CHANNELS]> = pool.frame(job.index).iter().map(|s| s.to_array().map(T::lit)).collect();
    if augment {
        if let Some(q) = draw_rotation(&mut rng) {
            rotate_rows(&mut rows, &q);
        }
    }
    let target = labels[job.index].target().expect("batches hold labelled windows");
    let mask = model.dropout_mask(&mut rng);
    let (signal, len) = model
        .window_signal(&rows)
        .expect("training windows are longer than the downsampling factor");
    let trace = model.trace_window(signal, len, Some(mask));
    model.accumulate_gradient(&trace, T::lit(target), grad);
    let p = trace.prob.to_f64().unwrap_or(0.5).clamp(CLAMP, 1.0 - CLAMP);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}
