//! Inputs for the criterion benchmarks under `benches/`.
//!
//! Run with `cargo bench -p mealscope-bench --bench pipeline`.

use mealscope_core::synth::{generate_recording, MealPlan};
use mealscope_core::{BiteSet, ImuRecording, SynthSpec};

pub const FS: f64 = 100.0;

/// Length of a long free-living day in seconds.
pub const DAY_S: f64 = 16_300.0;

/// Synthetic recording at [`FS`] with one meal over its middle half.
pub fn recording(duration_s: f64) -> ImuRecording {
    let spec = SynthSpec {
        duration_s,
        meals: vec![MealPlan {
            start_s: duration_s * 0.25,
            end_s: duration_s * 0.75,
            mean_inter_bite_s: 10.0,
            bite_count: None,
        }],
        seed: 1,
        ..SynthSpec::default()
    };
    generate_recording(&spec).expect("valid spec").recording
}

/// Probability trace with a bump every 10 s, one value per 4 samples.
pub fn probability_trace(duration_s: f64) -> Vec<f64> {
    let steps = (duration_s * FS / 4.0) as usize;
    let period = (10.0 * FS / 4.0) as usize;
    (0..steps)
        .map(|n| {
            let phase = (n % period) as f64 / period as f64;
            0.05 + 0.9 * (-((phase - 0.5) * 20.0).powi(2)).exp()
        })
        .collect()
}

/// `count` bites 10 s apart starting at `start_s`.
pub fn bite_run(start_s: f64, count: usize) -> BiteSet {
    BiteSet::from_times((0..count).map(|i| start_s + 10.0 * i as f64)).expect("sorted finite times")
}
