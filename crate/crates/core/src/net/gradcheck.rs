use super::params::ModelParams;
use crate::error::Result;
use crate::imu::CHANNELS;

/// Finite-difference step used for every parameter.
pub const FD_STEP: f64 = 1e-4;

/// Gradients below this magnitude are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

fn window_loss(p: &ModelParams<f64>, signal: &[f64], len: usize, target: f64, mask: Option<&[f64]>) -> f64 {
    let prob = p.trace_window(signal.to_vec(), len, mask.map(<[f64]>::to_vec)).prob;
    -(target * prob.ln() + (1.0 - target) * (1.0 - prob).ln())
}

/// Compares the backpropagated gradient of the window cross-entropy with
/// central differences for every parameter. `mask` fixes a dropout pattern
/// on the dense input; `None` checks the inference path.
pub fn gradient_check(
    params: &ModelParams<f64>,
    frame: &[[f64; CHANNELS]],
    target: f64,
    mask: Option<&[f64]>,
) -> Result<GradCheckReport> {
    let (signal, len) = params.window_signal(frame)?;
    let trace = params.trace_window(signal.clone(), len, mask.map(<[f64]>::to_vec));
    let mut analytic = vec![0.0; params.count()];
    params.accumulate_gradient(&trace, target, &mut analytic);

    let mut probe = params.clone();
    let mut numeric = Vec::with_capacity(params.count());
    for i in 0..params.count() {
        let original = probe.data[i];
        probe.data[i] = original + FD_STEP;
        let up = window_loss(&probe, &signal, len, target, mask);
        probe.data[i] = original - FD_STEP;
        let down = window_loss(&probe, &signal, len, target, mask);
        probe.data[i] = original;
        numeric.push((up - down) / (2.0 * FD_STEP));
    }

    let (worst_index, max_relative_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradCheckReport {
        analytic,
        numeric,
        max_relative_error,
        worst_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> NetConfig {
        NetConfig::with_widths([2, 2, 2], 4)
    }

    /// Initialised weights with every entry nudged, so no ReLU sits exactly
    /// on its kink (zero biases over an all-zero receptive field would).
    fn params(seed: u64) -> ModelParams<f64> {
        let mut p = ModelParams::<f64>::init(&tiny(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for w in p.as_mut_slice() {
            *w += rng.random_range(-0.1..0.1);
        }
        p
    }

    fn frame(len: usize, seed: u64) -> Vec<[f64; CHANNELS]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in 0..3 {
            let p = params(seed);
            let report = gradient_check(&p, &frame(40, seed + 10), (seed % 2) as f64, None).unwrap();
            assert!(
                report.passes(1e-4),
                "seed {seed}: {} at {}",
                report.max_relative_error,
                report.worst_index
            );
        }
    }

    #[test]
    fn dropout_mask_is_differentiated() {
        let p = params(4);
        let mask = [2.0, 0.0, 2.0, 0.0];
        let report = gradient_check(&p, &frame(40, 1), 1.0, Some(&mask)).unwrap();
        assert!(report.passes(1e-4), "{}", report.max_relative_error);
        let dense = p.layout().dense_weight;
        assert_eq!(report.analytic[dense.offset + 1], 0.0);
    }

    #[test]
    fn zero_frame_gradients_are_finite() {
        let p = params(2);
        let report = gradient_check(&p, &vec![[0.0; CHANNELS]; 40], 1.0, None).unwrap();
        assert!(report.analytic.iter().all(|g| g.is_finite()));
        assert!(report.passes(1e-4));
    }

    #[test]
    fn dense_bias_gradient_is_prediction_error() {
        let p = params(5);
        let rows = frame(40, 2);
        let prob = p.predict_window(&rows).unwrap();
        for target in [0.0, 1.0] {
            let report = gradient_check(&p, &rows, target, None).unwrap();
            let bias = p.layout().dense_bias.offset;
            assert!((report.analytic[bias] - (prob - target)).abs() < 1e-12);
        }
    }
}
