//! The convolutional-recurrent bite detector.
//!
//! Three 1-D convolutions (ReLU, the first two followed by x2 max pooling)
//! turn an `M x 6` signal into an `M/4 x F` feature sequence, an LSTM with
//! hard-sigmoid gates scans it, and a single sigmoid unit reads every LSTM
//! output. Training uses only the final step of each window.

mod backward;
mod forward;
mod gradcheck;
mod params;
mod serialize;
mod train;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::{gradient_check, GradCheckReport};
pub use params::{Layout, ModelParams, TensorRange};
pub use serialize::{deserialize_params, serialize_params, FORMAT_VERSION, MAGIC};
pub use train::{bce_loss, train, train_with_progress, EpochStats, TrainConfig, TrainReport, WindowSource};

/// Floating-point type the network computes in.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + Sum + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_channels: usize,
    pub conv_filters: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    /// Whether a x2 max pool follows each convolution.
    pub pool_after: Vec<bool>,
    pub lstm_units: usize,
    pub dense_units: usize,
    /// Dropout on the dense-layer input during training.
    pub dropout_rate: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input_channels: 6,
            conv_filters: vec![32, 64, 128],
            conv_kernels: vec![5, 3, 3],
            pool_after: vec![true, true, false],
            lstm_units: 128,
            dense_units: 1,
            dropout_rate: 0.5,
        }
    }
}

impl NetConfig {
    /// Same topology with custom widths.
    pub fn with_widths(conv_filters: [usize; 3], lstm_units: usize) -> Self {
        Self {
            conv_filters: conv_filters.to_vec(),
            lstm_units,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.conv_filters.len();
        if n == 0 || self.conv_kernels.len() != n || self.pool_after.len() != n {
            return Err(Error::InvalidConfig(
                "conv filters, kernels and pooling flags must have the same non-zero length".into(),
            ));
        }
        if self.input_channels == 0
            || self.lstm_units == 0
            || self.conv_filters.contains(&0)
            || self.conv_kernels.contains(&0)
        {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.dense_units != 1 {
            return Err(Error::InvalidConfig("the output layer has a single unit".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig("dropout rate must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Ratio between input samples and prediction steps.
    pub fn downsample(&self) -> usize {
        1 << self.pool_after.iter().filter(|&&p| p).count()
    }

    /// Width of the feature sequence entering the LSTM.
    pub fn feature_width(&self) -> usize {
        *self.conv_filters.last().expect("validated config")
    }
}
