use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, Real};
use crate::error::Result;

/// Location of one tensor inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TensorRange {
    pub offset: usize,
    pub len: usize,
}

impl TensorRange {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConvLayout {
    /// `kernel x in x out`, row-major.
    pub weight: TensorRange,
    pub bias: TensorRange,
    pub kernel: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub pool: bool,
}

/// Where every tensor lives in the flat buffer. LSTM gate blocks are packed
/// along the last axis in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub(crate) conv: Vec<ConvLayout>,
    /// `in x 4H`
    pub(crate) lstm_kernel: TensorRange,
    /// `H x 4H`
    pub(crate) lstm_recurrent: TensorRange,
    pub(crate) lstm_bias: TensorRange,
    pub(crate) dense_weight: TensorRange,
    pub(crate) dense_bias: TensorRange,
    pub(crate) lstm_inputs: usize,
    pub(crate) hidden: usize,
    total: usize,
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Self {
        let mut offset = 0;
        let mut take = |len: usize| {
            let r = TensorRange { offset, len };
            offset += len;
            r
        };
        let mut conv = Vec::with_capacity(cfg.conv_filters.len());
        let mut inputs = cfg.input_channels;
        for ((&outputs, &kernel), &pool) in cfg.conv_filters.iter().zip(&cfg.conv_kernels).zip(&cfg.pool_after) {
            conv.push(ConvLayout {
                weight: take(kernel * inputs * outputs),
                bias: take(outputs),
                kernel,
                inputs,
                outputs,
                pool,
            });
            inputs = outputs;
        }
        let hidden = cfg.lstm_units;
        let lstm_kernel = take(inputs * 4 * hidden);
        let lstm_recurrent = take(hidden * 4 * hidden);
        let lstm_bias = take(4 * hidden);
        let dense_weight = take(hidden * cfg.dense_units);
        let dense_bias = take(cfg.dense_units);
        Self {
            conv,
            lstm_kernel,
            lstm_recurrent,
            lstm_bias,
            dense_weight,
            dense_bias,
            lstm_inputs: inputs,
            hidden,
            total: offset,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Named tensor shapes in buffer order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, c) in self.conv.iter().enumerate() {
            out.push((format!("conv{i}.weight"), vec![c.kernel, c.inputs, c.outputs]));
            out.push((format!("conv{i}.bias"), vec![c.outputs]));
        }
        let h = self.hidden;
        out.push(("lstm.kernel".into(), vec![self.lstm_inputs, 4 * h]));
        out.push(("lstm.recurrent".into(), vec![h, 4 * h]));
        out.push(("lstm.bias".into(), vec![4 * h]));
        out.push(("dense.weight".into(), vec![h, self.dense_weight.len / h]));
        out.push(("dense.bias".into(), vec![self.dense_bias.len]));
        out
    }
}

/// All learnable weights of the network, stored in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub(crate) config: NetConfig,
    pub(crate) layout: Layout,
    pub(crate) data: Vec<T>,
}

impl<T: Real> ModelParams<T> {
    /// Glorot-uniform weights, zero biases and a forget-gate bias of 1,
    /// deterministic in `seed`.
    pub fn init(cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(cfg);
        let mut data = vec![T::zero(); layout.total()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |slot: &mut [T], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in slot {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        };
        for c in &layout.conv {
            glorot(&mut data[c.weight.range()], c.kernel * c.inputs, c.kernel * c.outputs);
        }
        let h = layout.hidden;
        glorot(&mut data[layout.lstm_kernel.range()], layout.lstm_inputs, 4 * h);
        glorot(&mut data[layout.lstm_recurrent.range()], h, 4 * h);
        glorot(&mut data[layout.dense_weight.range()], h, cfg.dense_units);
        let forget = layout.lstm_bias.offset + h;
        for b in &mut data[forget..forget + h] {
            *b = T::one();
        }
        Ok(Self {
            config: cfg.clone(),
            layout,
            data,
        })
    }

    /// Every parameter set to zero.
    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(cfg);
        let data = vec![T::zero(); layout.total()];
        Ok(Self {
            config: cfg.clone(),
            layout,
            data,
        })
    }

    pub(crate) fn from_parts(config: NetConfig, data: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if layout.total() != data.len() {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "config needs {} parameters, buffer has {}",
                layout.total(),
                data.len()
            )));
        }
        Ok(Self { config, layout, data })
    }

    /// Number of learnable scalars.
    pub fn count(&self) -> usize {
        self.data.len()
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::lit(v.to_f64().expect("finite parameter")))
                .collect(),
        }
    }

    pub(crate) fn tensor(&self, r: TensorRange) -> &[T] {
        &self.data[r.range()]
    }
}
