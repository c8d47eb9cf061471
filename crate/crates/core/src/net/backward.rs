//! Backpropagation of the window loss through dense, LSTM and convolution
//! layers.

use super::forward::WindowTrace;
use super::params::ModelParams;
use super::Real;

impl<T: Real> ModelParams<T> {
    /// Adds the gradient of the binary cross-entropy of `trace.prob` against
    /// `target` to `grad`, which uses the parameter buffer layout.
    pub(crate) fn accumulate_gradient(&self, trace: &WindowTrace<T>, target: T, grad: &mut [T]) {
        let layout = &self.layout;
        let h = layout.hidden;
        let nin = layout.lstm_inputs;

        // Sigmoid followed by cross-entropy collapses to p - y at the logit.
        let dlogit = trace.prob - target;
        let dense_w = self.tensor(layout.dense_weight);
        for (g, &x) in grad[layout.dense_weight.range()].iter_mut().zip(&trace.dense_input) {
            *g = *g + dlogit * x;
        }
        grad[layout.dense_bias.offset] = grad[layout.dense_bias.offset] + dlogit;

        let mut dh: Vec<T> = dense_w.iter().map(|&w| w * dlogit).collect();
        if let Some(mask) = &trace.mask {
            for (d, &m) in dh.iter_mut().zip(mask) {
                *d = *d * m;
            }
        }

        let lstm = &trace.lstm;
        let steps = lstm.steps;
        let kernel = self.tensor(layout.lstm_kernel);
        let recurrent = self.tensor(layout.lstm_recurrent);
        let mut dc = vec![T::zero(); h];
        let mut dz = vec![T::zero(); 4 * h];
        let mut dfeatures = vec![T::zero(); steps * nin];
        let slope = T::lit(0.2);
        let hs_grad = |a: T| {
            if a > T::zero() && a < T::one() {
                slope
            } else {
                T::zero()
            }
        };
        for t in (0..steps).rev() {
            let gates = &lstm.gates[t * 4 * h..(t + 1) * 4 * h];
            let c_prev = &lstm.cells[t * h..(t + 1) * h];
            let c_now = &lstm.cells[(t + 1) * h..(t + 2) * h];
            for j in 0..h {
                let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = c_now[j].tanh();
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * og * (T::one() - tc * tc);
                dz[j] = dcj * gg * hs_grad(ig);
                dz[h + j] = dcj * c_prev[j] * hs_grad(fg);
                dz[2 * h + j] = dcj * ig * (T::one() - gg * gg);
                dz[3 * h + j] = d_o * hs_grad(og);
                dc[j] = dcj * fg;
            }

            let x = &lstm.input[t * nin..(t + 1) * nin];
            let g_kernel = &mut grad[layout.lstm_kernel.range()];
            for (i, &xi) in x.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                for (g, &d) in g_kernel[i * 4 * h..(i + 1) * 4 * h].iter_mut().zip(&dz) {
                    *g = *g + xi * d;
                }
            }
            let h_prev = &lstm.hidden[t * h..(t + 1) * h];
            let g_rec = &mut grad[layout.lstm_recurrent.range()];
            for (k, &hk) in h_prev.iter().enumerate() {
                if hk == T::zero() {
                    continue;
                }
                for (g, &d) in g_rec[k * 4 * h..(k + 1) * 4 * h].iter_mut().zip(&dz) {
                    *g = *g + hk * d;
                }
            }
            for (g, &d) in grad[layout.lstm_bias.range()].iter_mut().zip(&dz) {
                *g = *g + d;
            }

            let dx = &mut dfeatures[t * nin..(t + 1) * nin];
            for (i, d) in dx.iter_mut().enumerate() {
                let row = &kernel[i * 4 * h..(i + 1) * 4 * h];
                *d = row.iter().zip(&dz).fold(T::zero(), |acc, (&w, &g)| acc + w * g);
            }
            for (k, d) in dh.iter_mut().enumerate() {
                let row = &recurrent[k * 4 * h..(k + 1) * 4 * h];
                *d = row.iter().zip(&dz).fold(T::zero(), |acc, (&w, &g)| acc + w * g);
            }
        }

        // Convolution stack, last layer first. `dout` is the gradient with
        // respect to each layer's (pooled) output.
        let mut dout = dfeatures;
        for (l, (layer, tr)) in layout.conv.iter().zip(&trace.conv).enumerate().rev() {
            let (k, cin, cout) = (layer.kernel, layer.inputs, layer.outputs);
            let len = tr.len;
            let mut dact = match &tr.pool_argmax {
                Some(arg) => {
                    let mut d = vec![T::zero(); len * cout];
                    for (&src, &g) in arg.iter().zip(&dout) {
                        d[src] = d[src] + g;
                    }
                    d
                }
                None => dout,
            };
            for (d, &a) in dact.iter_mut().zip(&tr.activation) {
                if a <= T::zero() {
                    *d = T::zero();
                }
            }
            let pad = (k - 1) / 2;
            let w = self.tensor(layer.weight);
            let need_input_grad = l > 0;
            let mut din = if need_input_grad {
                vec![T::zero(); len * cin]
            } else {
                Vec::new()
            };
            {
                let (g_w, g_b) = {
                    let (head, tail) = grad.split_at_mut(layer.bias.offset);
                    (&mut head[layer.weight.range()], &mut tail[..cout])
                };
                for t in 0..len {
                    let drow = &dact[t * cout..(t + 1) * cout];
                    if drow.iter().all(|&d| d == T::zero()) {
                        continue;
                    }
                    for (gb, &d) in g_b.iter_mut().zip(drow) {
                        *gb = *gb + d;
                    }
                    for j in 0..k {
                        let Some(s) = (t + j).checked_sub(pad).filter(|&s| s < len) else {
                            continue;
                        };
                        let xrow = &tr.input[s * cin..(s + 1) * cin];
                        for c in 0..cin {
                            let base = (j * cin + c) * cout;
                            let xv = xrow[c];
                            if xv != T::zero() {
                                for (g, &d) in g_w[base..base + cout].iter_mut().zip(drow) {
                                    *g = *g + xv * d;
                                }
                            }
                            if need_input_grad {
                                let acc = w[base..base + cout]
                                    .iter()
                                    .zip(drow)
                                    .fold(T::zero(), |acc, (&wv, &d)| acc + wv * d);
                                din[s * cin + c] = din[s * cin + c] + acc;
                            }
                        }
                    }
                }
            }
            dout = din;
        }
    }
}
