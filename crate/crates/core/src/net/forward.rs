use rand::Rng;

use super::params::{ConvLayout, ModelParams};
use super::Real;
use crate::error::{Error, Result};
use crate::imu::CHANNELS;

pub(crate) fn hard_sigmoid<T: Real>(x: T) -> T {
    (T::lit(0.2) * x + T::lit(0.5)).max(T::zero()).min(T::one())
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// "Same" 1-D convolution over a `len x cin` row-major signal, returning the
/// `len x cout` pre-activation.
pub(crate) fn conv1d<T: Real>(input: &[T], len: usize, layer: &ConvLayout, w: &[T], b: &[T]) -> Vec<T> {
    let (k, cin, cout) = (layer.kernel, layer.inputs, layer.outputs);
    let pad = (k - 1) / 2;
    let mut out = Vec::with_capacity(len * cout);
    for t in 0..len {
        let start = out.len();
        out.extend_from_slice(b);
        let acc = &mut out[start..start + cout];
        for j in 0..k {
            let Some(s) = (t + j).checked_sub(pad).filter(|&s| s < len) else {
                continue;
            };
            let row = &input[s * cin..(s + 1) * cin];
            for (c, &x) in row.iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                let wrow = &w[(j * cin + c) * cout..(j * cin + c + 1) * cout];
                for (a, &wv) in acc.iter_mut().zip(wrow) {
                    *a = *a + x * wv;
                }
            }
        }
    }
    out
}

/// Max pooling by 2 along time. Returns the pooled signal and, for every
/// pooled value, the flat index of the input element it came from. Ties go
/// to the earlier sample.
pub(crate) fn max_pool2<T: Real>(input: &[T], len: usize, ch: usize) -> (Vec<T>, Vec<usize>) {
    let out_len = len / 2;
    let mut out = Vec::with_capacity(out_len * ch);
    let mut arg = Vec::with_capacity(out_len * ch);
    for t in 0..out_len {
        for c in 0..ch {
            let a = (2 * t) * ch + c;
            let b = a + ch;
            if input[b] > input[a] {
                out.push(input[b]);
                arg.push(b);
            } else {
                out.push(input[a]);
                arg.push(a);
            }
        }
    }
    (out, arg)
}

/// Intermediate values of one convolution layer kept for backpropagation.
#[derive(Debug, Default)]
pub(crate) struct ConvTrace<T> {
    pub input: Vec<T>,
    pub len: usize,
    /// Post-ReLU activation, `len x cout`.
    pub activation: Vec<T>,
    pub pool_argmax: Option<Vec<usize>>,
}

/// Intermediate values of the recurrent and output layers.
#[derive(Debug, Default)]
pub(crate) struct LstmTrace<T> {
    pub steps: usize,
    pub input: Vec<T>,
    /// Activated gates per step, `steps x 4H` in the order i, f, g, o.
    pub gates: Vec<T>,
    /// Cell states, `(steps + 1) x H`; row 0 is the zero initial state.
    pub cells: Vec<T>,
    /// Hidden states, `(steps + 1) x H`; row 0 is the zero initial state.
    pub hidden: Vec<T>,
}

#[derive(Debug, Default)]
pub(crate) struct WindowTrace<T> {
    pub conv: Vec<ConvTrace<T>>,
    pub lstm: LstmTrace<T>,
    /// Dense-layer input after dropout.
    pub dense_input: Vec<T>,
    pub mask: Option<Vec<T>>,
    pub prob: T,
}

impl<T: Real> ModelParams<T> {
    /// Smallest input length that yields one prediction step.
    pub fn min_input_len(&self) -> usize {
        self.config.downsample()
    }

    fn to_signal(&self, rows: &[[f64; CHANNELS]]) -> Result<(Vec<T>, usize)> {
        let d = self.config.downsample();
        let len = rows.len() - rows.len() % d;
        if len < d {
            return Err(Error::InputTooShort {
                samples: rows.len(),
                needed: d,
            });
        }
        let signal = rows[..len].iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect();
        Ok((signal, len))
    }

    /// Runs the convolution stack, returning the `steps x F` feature sequence.
    fn conv_features(
        &self,
        mut signal: Vec<T>,
        mut len: usize,
        mut trace: Option<&mut Vec<ConvTrace<T>>>,
    ) -> (Vec<T>, usize) {
        for layer in &self.layout.conv {
            let mut act = conv1d(&signal, len, layer, self.tensor(layer.weight), self.tensor(layer.bias));
            for v in &mut act {
                *v = v.max(T::zero());
            }
            let (next, next_len, argmax) = if layer.pool {
                let (pooled, arg) = max_pool2(&act, len, layer.outputs);
                (pooled, len / 2, Some(arg))
            } else {
                (act.clone(), len, None)
            };
            if let Some(trace) = trace.as_deref_mut() {
                trace.push(ConvTrace {
                    input: std::mem::take(&mut signal),
                    len,
                    activation: act,
                    pool_argmax: argmax,
                });
            }
            signal = next;
            len = next_len;
        }
        (signal, len)
    }

    /// Scans the feature sequence with the LSTM from a zero state, calling
    /// `on_step` with each hidden state.
    fn lstm_scan(
        &self,
        features: &[T],
        steps: usize,
        mut trace: Option<&mut LstmTrace<T>>,
        mut on_step: impl FnMut(&[T]),
    ) {
        let h = self.layout.hidden;
        let nin = self.layout.lstm_inputs;
        let kernel = self.tensor(self.layout.lstm_kernel);
        let recurrent = self.tensor(self.layout.lstm_recurrent);
        let bias = self.tensor(self.layout.lstm_bias);
        let mut hidden = vec![T::zero(); h];
        let mut cell = vec![T::zero(); h];
        let mut z = vec![T::zero(); 4 * h];
        if let Some(tr) = trace.as_deref_mut() {
            tr.steps = steps;
            tr.input = features.to_vec();
            tr.gates = Vec::with_capacity(steps * 4 * h);
            tr.cells = vec![T::zero(); h];
            tr.hidden = vec![T::zero(); h];
        }
        for t in 0..steps {
            z.copy_from_slice(bias);
            for (i, &x) in features[t * nin..(t + 1) * nin].iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                for (zj, &w) in z.iter_mut().zip(&kernel[i * 4 * h..(i + 1) * 4 * h]) {
                    *zj = *zj + x * w;
                }
            }
            for (k, &hk) in hidden.iter().enumerate() {
                if hk == T::zero() {
                    continue;
                }
                for (zj, &w) in z.iter_mut().zip(&recurrent[k * 4 * h..(k + 1) * 4 * h]) {
                    *zj = *zj + hk * w;
                }
            }
            for j in 0..h {
                let i_g = hard_sigmoid(z[j]);
                let f_g = hard_sigmoid(z[h + j]);
                let g_g = z[2 * h + j].tanh();
                let o_g = hard_sigmoid(z[3 * h + j]);
                cell[j] = f_g * cell[j] + i_g * g_g;
                hidden[j] = o_g * cell[j].tanh();
                z[j] = i_g;
                z[h + j] = f_g;
                z[2 * h + j] = g_g;
                z[3 * h + j] = o_g;
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.gates.extend_from_slice(&z);
                tr.cells.extend_from_slice(&cell);
                tr.hidden.extend_from_slice(&hidden);
            }
            on_step(&hidden);
        }
    }

    fn dense(&self, input: &[T]) -> T {
        let w = self.tensor(self.layout.dense_weight);
        let b = self.tensor(self.layout.dense_bias)[0];
        sigmoid(input.iter().zip(w).fold(b, |acc, (&x, &wv)| acc + x * wv))
    }

    /// Bite probability for every prediction step of a preprocessed
    /// recording. Trailing samples beyond a multiple of 4 are dropped, so the
    /// output has `floor(M / 4)` entries.
    pub fn forward_sequence(&self, rows: &[[f64; CHANNELS]]) -> Result<Vec<f64>> {
        let (signal, len) = self.to_signal(rows)?;
        let (features, steps) = self.conv_features(signal, len, None);
        let mut out = Vec::with_capacity(steps);
        self.lstm_scan(&features, steps, None, |h| {
            out.push(self.dense(h).to_f64().unwrap_or(f64::NAN));
        });
        Ok(out)
    }

    /// Probability for a single window: the output at its final step. With
    /// `training` set, dropout is applied to the dense-layer input.
    pub fn forward_window<R: Rng + ?Sized>(
        &self,
        rows: &[[f64; CHANNELS]],
        training: bool,
        rng: &mut R,
    ) -> Result<f64> {
        let (signal, len) = self.to_signal(rows)?;
        let mask = training.then(|| self.dropout_mask(rng));
        let trace = self.trace_window(signal, len, mask);
        Ok(trace.prob.to_f64().unwrap_or(f64::NAN))
    }

    /// Inference-mode window probability.
    pub fn predict_window(&self, rows: &[[f64; CHANNELS]]) -> Result<f64> {
        let (signal, len) = self.to_signal(rows)?;
        let trace = self.trace_window(signal, len, None);
        Ok(trace.prob.to_f64().unwrap_or(f64::NAN))
    }

    /// Inverted-dropout mask for the dense input: each unit is kept with
    /// probability `1 - rate` and scaled by `1 / (1 - rate)`.
    pub(crate) fn dropout_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let rate = self.config.dropout_rate;
        let keep = T::lit(1.0 / (1.0 - rate));
        (0..self.layout.hidden)
            .map(|_| {
                if rate > 0.0 && rng.random_bool(rate) {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect()
    }

    pub(crate) fn window_signal(&self, rows: &[[T; CHANNELS]]) -> Result<(Vec<T>, usize)> {
        let d = self.config.downsample();
        let len = rows.len() - rows.len() % d;
        if len < d {
            return Err(Error::InputTooShort {
                samples: rows.len(),
                needed: d,
            });
        }
        Ok((rows[..len].iter().flatten().copied().collect(), len))
    }

    pub(crate) fn trace_window(&self, signal: Vec<T>, len: usize, mask: Option<Vec<T>>) -> WindowTrace<T> {
        let mut trace = WindowTrace::default();
        let (features, steps) = self.conv_features(signal, len, Some(&mut trace.conv));
        self.lstm_scan(&features, steps, Some(&mut trace.lstm), |_| {});
        let h = self.layout.hidden;
        let last = &trace.lstm.hidden[steps * h..(steps + 1) * h];
        trace.dense_input = match &mask {
            Some(m) => last.iter().zip(m).map(|(&x, &k)| x * k).collect(),
            None => last.to_vec(),
        };
        trace.prob = self.dense(&trace.dense_input);
        trace.mask = mask;
        trace
    }
}
