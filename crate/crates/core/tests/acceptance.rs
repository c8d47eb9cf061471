//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mealscope_core::bites::{detect_bites, BiteDetectConfig};
use mealscope_core::evaluate::{
    accuracy, match_bites, meal_confusion, precision_recall_f1, truncate_decimals, weighted_accuracy, weighting_ratio,
    wrist_motion_energy, BiteConfusion, MealConfusion,
};
use mealscope_core::imu::{flip_hand, mirror_hand, preprocess, Handedness, ImuRecording, ImuSample, MIRROR_SIGNS};
use mealscope_core::meals::{localize_meals, smooth_close, LocalizerConfig, MealIntervalSet};
use mealscope_core::net::{gradient_check, Layout, ModelParams, NetConfig};
use mealscope_core::pipeline::{loso_fold, PipelineConfig};
use mealscope_core::synth::{generate_corpus, CorpusSpec};
use mealscope_core::{BiteSet, Interval, PreprocessConfig, CHANNELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Largest absolute deviation relative to the oracle's largest magnitude.
fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn param_count() -> Outcome {
    let cfg = NetConfig::default();
    let p = ModelParams::<f32>::zeros(&cfg).map_err(|e| e.to_string())?;
    let n = p.count();
    check(n == 163_617 && Layout::new(&cfg).total() == n, format!("count = {n}"))
}

fn shape_law() -> Outcome {
    let p = ModelParams::<f32>::init(&NetConfig::default(), 1).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut lens = Vec::new();
    for m in [96usize, 100, 1000, 7000] {
        let rows: Vec<[f64; CHANNELS]> = (0..m)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let out = p.forward_sequence(&rows).map_err(|e| e.to_string())?;
        if out.len() != m / 4 || out.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(format!("M = {m}: length {} values in (0,1): no", out.len()));
        }
        lens.push(format!("{m}->{}", out.len()));
    }
    Ok(lens.join(", "))
}

fn gradient() -> Outcome {
    let cfg = NetConfig::with_widths([2, 2, 2], 4);
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let mut p = ModelParams::<f64>::init(&cfg, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        // Keep ReLU pre-activations off their kink.
        for w in p.as_mut_slice() {
            *w += rng.random_range(-0.1..0.1);
        }
        let frame: Vec<[f64; CHANNELS]> = (0..40)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let report = gradient_check(&p, &frame, (seed % 2) as f64, None).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_relative_error);
    }
    check(worst < 1e-4, format!("max relative error {worst:.2e} over 3 seeds"))
}

fn random_recording(rng: &mut ChaCha8Rng, len: usize, fs: f64) -> ImuRecording {
    let hand = if rng.random_bool(0.5) {
        Handedness::Left
    } else {
        Handedness::Right
    };
    let samples = (0..len)
        .map(|_| {
            ImuSample::from_array(std::array::from_fn(|c| {
                rng.random_range(-5.0..5.0) + if c == 2 { 9.81 } else { 0.0 }
            }))
        })
        .collect();
    ImuRecording::new(samples, fs, hand, "m/s^2,rad/s").unwrap()
}

/// `y[n] = sum_j h[j] x[n + d - j]`, zeros outside the input.
fn direct_filter(x: &[f64], h: &[f64], d: usize) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let mut acc = 0.0;
            for (j, hj) in h.iter().enumerate() {
                let k = n as isize + d as isize - j as isize;
                if k >= 0 && (k as usize) < x.len() {
                    acc += hj * x[k as usize];
                }
            }
            acc
        })
        .collect()
}

/// Hamming-windowed sinc high-pass on `len - 1` taps plus a trailing zero
/// when `len` is even.
fn highpass_taps(len: usize, cutoff: f64) -> (Vec<f64>, usize) {
    let odd = if len % 2 == 1 { len } else { len - 1 };
    let mid = (odd - 1) / 2;
    let mut lp = Vec::with_capacity(odd);
    for n in 0..odd {
        let x = n as f64 - mid as f64;
        let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (odd - 1) as f64).cos();
        let s = if n == mid {
            2.0 * cutoff
        } else {
            (2.0 * PI * cutoff * x).sin() / (PI * x)
        };
        lp.push(w * s);
    }
    let sum: f64 = lp.iter().sum();
    let mut h: Vec<f64> = lp.iter().map(|v| -v / sum).collect();
    h[mid] += 1.0;
    h.resize(len, 0.0);
    (h, mid)
}

fn preprocess_oracle(rec: &ImuRecording, cfg: &PreprocessConfig) -> Vec<Vec<f64>> {
    let ma = vec![cfg.ma_tap; cfg.ma_len];
    let (hp, hp_delay) = highpass_taps(cfg.hp_len, cfg.hp_cutoff_hz / rec.sample_rate_hz());
    (0..CHANNELS)
        .map(|c| {
            let smoothed = direct_filter(&rec.channel(c), &ma, (cfg.ma_len - 1) / 2);
            if c < 3 {
                direct_filter(&smoothed, &hp, hp_delay)
            } else {
                smoothed
            }
        })
        .collect()
}

fn smooth_oracle(s: &[f64], cfg: &LocalizerConfig, fs: f64) -> Vec<f64> {
    let len = (cfg.gauss_len_s * fs / 4.0).round() as usize | 1;
    let half = (len - 1) / 2;
    let sigma = cfg.gauss_std_s * fs / 4.0;
    (0..s.len())
        .map(|n| {
            let mut acc = 0.0;
            for (m, v) in s.iter().enumerate() {
                let d = n as f64 - m as f64;
                if *v != 0.0 && d.abs() <= half as f64 {
                    acc += v * (-(d * d) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
                }
            }
            acc
        })
        .collect()
}

fn energy_oracle(rec: &ImuRecording, window_s: f64) -> Vec<f64> {
    let half = ((window_s * rec.sample_rate_hz()).round() as usize) / 2;
    let s = rec.samples();
    (0..s.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(s.len() - 1);
            let sum: f64 = s[lo..=hi].iter().map(|x| x.ax.abs() + x.ay.abs() + x.az.abs()).sum();
            sum / (hi - lo + 1) as f64
        })
        .collect()
}

fn detect_oracle(p: &[f64], fs: f64, cfg: &BiteDetectConfig) -> Vec<f64> {
    let v: Vec<f64> = p.iter().map(|&x| if x >= cfg.lambda_p { x } else { 0.0 }).collect();
    let mut peaks = Vec::new();
    for i in 0..v.len() {
        if v[i] == 0.0 || (i > 0 && v[i - 1] == v[i]) {
            continue;
        }
        let left = i == 0 || v[i - 1] < v[i];
        let right = match (i + 1..v.len()).find(|&j| v[j] != v[i]) {
            Some(j) => v[j] < v[i],
            None => true,
        };
        if left && right {
            peaks.push(i);
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    // Repeatedly take the highest remaining peak that is far from all kept.
    let mut remaining = peaks;
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            if p[remaining[k]] > p[remaining[best]] {
                best = k;
            }
        }
        let n = remaining.remove(best);
        if kept
            .iter()
            .all(|&m| n.abs_diff(m) as f64 * 4.0 / fs >= cfg.min_gap_s - 1e-9)
        {
            kept.push(n);
        }
    }
    kept.sort();
    kept.into_iter().map(|n| n as f64 * 4.0 / fs).collect()
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_pre: f64 = 0.0;
    let mut worst_smooth: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for _ in 0..100 {
        let fs = [50.0, 100.0][rng.random_range(0..2)];
        let len = rng.random_range(520..900);
        let rec = random_recording(&mut rng, len, fs);
        let cfg = PreprocessConfig::for_sample_rate(fs);
        let got = preprocess(&rec, &cfg).map_err(|e| e.to_string())?;
        let want = preprocess_oracle(&rec, &cfg);
        for (c, w) in want.iter().enumerate() {
            worst_pre = worst_pre.max(max_rel_err(&got.channel(c), w));
        }

        let e = wrist_motion_energy(&rec, 2.0).map_err(|e| e.to_string())?;
        worst_energy = worst_energy.max(max_rel_err(&e, &energy_oracle(&rec, 2.0)));

        let fs_s = [20.0, 100.0][rng.random_range(0..2)];
        let n = rng.random_range(500..2500);
        let mut s = vec![0.0; n];
        for _ in 0..rng.random_range(1..40) {
            s[rng.random_range(0..n)] = 1.0;
        }
        let lcfg = LocalizerConfig::default();
        worst_smooth = worst_smooth.max(max_rel_err(
            &smooth_close(&s, &lcfg, fs_s),
            &smooth_oracle(&s, &lcfg, fs_s),
        ));
    }
    let mut detect_mismatch = 0;
    for trial in 0..100 {
        let n = rng.random_range(1..4000);
        // Coarse levels make plateaus and ties common.
        let levels = if trial % 2 == 0 { 12 } else { 1_000_000 };
        let p: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..=levels) as f64 / levels as f64)
            .collect();
        let cfg = BiteDetectConfig {
            lambda_p: rng.random_range(0.5..0.99),
            min_gap_s: rng.random_range(0.1..3.0),
        };
        let got = detect_bites(&p, 100.0, &cfg).map_err(|e| e.to_string())?;
        if got.timestamps_s() != detect_oracle(&p, 100.0, &cfg).as_slice() {
            detect_mismatch += 1;
        }
    }
    check(
        worst_pre < 1e-10 && worst_smooth < 1e-10 && worst_energy < 1e-10 && detect_mismatch == 0,
        format!(
            "preprocess {worst_pre:.1e}, smooth_close {worst_smooth:.1e}, energy {worst_energy:.1e}, \
             detect_bites mismatches {detect_mismatch}/100"
        ),
    )
}

fn mirroring() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let len = rng.random_range(1..300);
        let rec = random_recording(&mut rng, len, 100.0);
        let flipped = flip_hand(&rec);
        for (a, b) in rec.samples().iter().zip(flipped.samples()) {
            let (a, b) = (a.to_array(), b.to_array());
            if (0..CHANNELS).any(|c| b[c] != a[c] * MIRROR_SIGNS[c]) {
                return Err("sign pattern violated".into());
            }
        }
        if flip_hand(&flipped) != rec {
            return Err("flip is not an involution".into());
        }
        let mirrored = mirror_hand(&rec);
        match rec.handedness() {
            Handedness::Right if mirrored != rec => return Err("right hand not left unchanged".into()),
            Handedness::Left if mirrored != flipped => return Err("left hand not flipped".into()),
            _ => {}
        }
        if mirrored.handedness() != Handedness::Right || mirror_hand(&mirrored) != mirrored {
            return Err("mirrored recording is not right-handed and stable".into());
        }
    }
    Ok(format!(
        "signs {MIRROR_SIGNS:?}, involution and identity over 200 recordings"
    ))
}

fn isolated_bites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = LocalizerConfig::default();
    let mut nonempty = 0;
    for _ in 0..100 {
        let duration = rng.random_range(10.0..20_000.0);
        let bites = BiteSet::from_times([rng.random_range(0.0..duration)]).unwrap();
        let meals = localize_meals(&bites, duration, 100.0, &cfg).map_err(|e| e.to_string())?;
        if !meals.is_empty() {
            nonempty += 1;
        }
    }
    check(nonempty == 0, format!("{nonempty}/100 placements produced a meal"))
}

fn end_to_end() -> Outcome {
    let corpus = generate_corpus(&CorpusSpec::default()).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::reduced();
    let (_, report) = loso_fold(&corpus, "s0", &cfg, |_| ()).map_err(|e| e.to_string())?;
    let bites = report.bites.ok_or("held-out subject has no meal sessions")?;
    let meals = report.meals.ok_or("held-out subject has no free-living day")?;
    check(
        bites.f1 >= 0.90 && meals.jaccard >= 0.85,
        format!(
            "bite F1 {:.3} (tp {} fp {} fn {}), meal Jaccard {:.3}",
            bites.f1, bites.confusion.tp, bites.confusion.fp, bites.confusion.fn_, meals.jaccard
        ),
    )
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let c = MealConfusion {
            tp: rng.random_range(0..500),
            fp: rng.random_range(0..500),
            fn_: rng.random_range(0..500),
            tn: rng.random_range(1..5000),
        };
        if (weighted_accuracy(&c, 1.0) - accuracy(&c)).abs() > 1e-15 {
            return Err(format!("weighted accuracy at ratio 1 differs for {c:?}"));
        }
    }
    let ratio = weighting_ratio(77.32, 5.42);
    if (ratio - 14.2).abs() > 0.05 {
        return Err(format!("ratio {ratio}"));
    }
    let iv = |a, b| Interval::new(a, b).unwrap();
    let bites = match_bites(
        &BiteSet::from_times([2.0, 3.0, 20.0]).unwrap(),
        &[iv(0.0, 4.0), iv(10.0, 14.0)],
    )
    .map_err(|e| e.to_string())?;
    if bites != (BiteConfusion { tp: 1, fp: 2, fn_: 1 }) {
        return Err(format!("bite fixture {bites:?}"));
    }
    let est = MealIntervalSet::new(vec![iv(100.0, 200.0)]).unwrap();
    let truth = MealIntervalSet::new(vec![iv(150.0, 250.0)]).unwrap();
    let meals = meal_confusion(&est, &truth, 1000.0, 1.0).map_err(|e| e.to_string())?;
    if meals
        != (MealConfusion {
            tp: 50,
            fp: 50,
            fn_: 50,
            tn: 850,
        })
    {
        return Err(format!("meal fixture {meals:?}"));
    }
    let wa = weighted_accuracy(&meals, 10.0);
    if (wa - 1350.0 / 1900.0).abs() > 1e-12 {
        return Err(format!("weighted accuracy {wa}"));
    }
    let (p, r, f) = precision_recall_f1(&BiteConfusion {
        tp: 1231,
        fp: 102,
        fn_: 101,
    });
    let table = [
        truncate_decimals(p, 3),
        truncate_decimals(r, 3),
        truncate_decimals(f, 3),
    ];
    if table != [0.923, 0.924, 0.923] {
        return Err(format!("precision/recall/F1 {table:?}"));
    }
    Ok(format!("ratio {ratio}, fixtures exact, P/R/F1 {table:?}"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "parameter count",
            limit: Duration::from_secs(1),
            run: param_count,
        },
        Criterion {
            name: "shape law",
            limit: Duration::from_secs(5),
            run: shape_law,
        },
        Criterion {
            name: "gradient check",
            limit: Duration::from_secs(60),
            run: gradient,
        },
        Criterion {
            name: "filter/metric oracles",
            limit: Duration::from_secs(60),
            run: oracles,
        },
        Criterion {
            name: "mirroring laws",
            limit: Duration::from_secs(5),
            run: mirroring,
        },
        Criterion {
            name: "isolated-bite rejection",
            limit: Duration::from_secs(10),
            run: isolated_bites,
        },
        Criterion {
            name: "end-to-end synthetic",
            limit: Duration::from_secs(15 * 60),
            run: end_to_end,
        },
        Criterion {
            name: "metric identities",
            limit: Duration::from_secs(5),
            run: metric_identities,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} limit", c.limit)),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}: {} ({:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
