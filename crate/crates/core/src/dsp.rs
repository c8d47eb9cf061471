//! FIR kernels and same-length convolution.
//!
//! All filters here are applied in "same" mode: the input is zero-padded at
//! both edges and the output is shifted by the filter's group delay so that
//! output sample `n` stays aligned with input sample `n`.

use std::f64::consts::PI;

/// A finite impulse response filter together with the integer delay used to
/// realign its output.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub delay: usize,
}

impl FirFilter {
    /// Filter centred on its middle tap, `delay = (len - 1) / 2`.
    pub fn centered(taps: Vec<f64>) -> Self {
        let delay = taps.len().saturating_sub(1) / 2;
        Self { taps, delay }
    }

    /// Length-`len` boxcar with every tap equal to `tap`.
    pub fn moving_average(len: usize, tap: f64) -> Self {
        Self::centered(vec![tap; len])
    }

    /// Windowed-sinc (Hamming) high-pass filter built by spectral inversion of
    /// a unit-DC-gain low-pass.
    ///
    /// `cutoff` is in cycles per sample. A symmetric even-length filter has a
    /// forced zero at Nyquist and cannot be high-pass, so for even `len` the
    /// filter is designed on `len - 1` taps and padded with a trailing zero.
    /// This also keeps the group delay an integer.
    pub fn highpass(len: usize, cutoff: f64) -> Self {
        assert!(len >= 2, "high-pass filter needs at least two taps");
        assert!(cutoff > 0.0 && cutoff < 0.5, "cutoff must be in (0, 1/2)");
        let odd_len = if len % 2 == 1 { len } else { len - 1 };
        let mid = (odd_len - 1) / 2;
        let window = hamming(odd_len);
        let mut lowpass: Vec<f64> = window
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let x = n as f64 - mid as f64;
                let sinc = if x == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * x).sin() / (PI * x)
                };
                sinc * w
            })
            .collect();
        let dc: f64 = lowpass.iter().sum();
        for tap in &mut lowpass {
            *tap /= dc;
        }
        let mut taps: Vec<f64> = lowpass.iter().map(|t| -t).collect();
        taps[mid] += 1.0;
        if odd_len != len {
            taps.push(0.0);
        }
        Self { taps, delay: mid }
    }

    /// Odd-length sampled Gaussian density with standard deviation `std`
    /// samples. The taps approximate unit area (they are samples of the
    /// normalised density, not renormalised after truncation). Even lengths
    /// are rounded up to the next odd length so the kernel has a centre tap.
    pub fn gaussian(len: usize, std: f64) -> Self {
        let len = len | 1;
        let mid = (len - 1) / 2;
        let norm = 1.0 / (std * (2.0 * PI).sqrt());
        let taps = (0..len)
            .map(|n| {
                let x = n as f64 - mid as f64;
                norm * (-(x * x) / (2.0 * std * std)).exp()
            })
            .collect();
        Self { taps, delay: mid }
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        convolve_same(input, &self.taps, self.delay)
    }

    /// Magnitude of the frequency response at `freq` cycles per sample.
    pub fn magnitude_at(&self, freq: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, tap) in self.taps.iter().enumerate() {
            let phase = -2.0 * PI * freq * n as f64;
            re += tap * phase.cos();
            im += tap * phase.sin();
        }
        re.hypot(im)
    }
}

/// Symmetric Hamming window of length `len`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Same-length convolution `y[n] = sum_j kernel[j] * x[n + delay - j]` with
/// zeros outside the input.
///
/// Work is scattered from the non-zero input samples, so sparse inputs such
/// as impulse trains cost `O(nnz * K)` rather than `O(N * K)`.
pub fn convolve_same(input: &[f64], kernel: &[f64], delay: usize) -> Vec<f64> {
    let n = input.len();
    let mut out = vec![0.0; n];
    if kernel.is_empty() {
        return out;
    }
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        // Output index for kernel tap j is i + j - delay.
        let j_lo = delay.saturating_sub(i);
        let j_hi = (n + delay - i).min(kernel.len());
        if j_lo >= j_hi {
            continue;
        }
        let o_lo = i + j_lo - delay;
        let dst = &mut out[o_lo..o_lo + (j_hi - j_lo)];
        for (y, k) in dst.iter_mut().zip(&kernel[j_lo..j_hi]) {
            *y += k * x;
        }
    }
    out
}
