mod args;
mod report;

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use mealscope_core::io::{
    load_corpus, read_events, read_params, read_recording, write_atomic, write_corpus, write_events_to, write_params,
    write_recording, EventList,
};
use mealscope_core::pipeline::{bite_probabilities, loso_fold, pool_reports, prepare, subjects, train_model};
use mealscope_core::{
    dbscan_localize, detect_bites, evaluate_bites, evaluate_meals, localize_meals, BiteSet, CorpusEntry, CorpusSpec,
    MealIntervalSet,
};

use args::{Cli, Command, Method};

/// A request that cannot be carried out as given, reported with exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            if is_usage(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// Bad flags or parameter combinations, as opposed to bad input data.
fn is_usage(e: &anyhow::Error) -> bool {
    use mealscope_core::Error as Core;
    e.is::<UsageError>()
        || matches!(
            e.downcast_ref::<Core>(),
            Some(Core::InvalidConfig(_) | Core::InvalidSpec(_) | Core::InvalidSampleRate(_))
        )
}

/// The error chain, skipping causes already spelled out by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn write_events_out(path: Option<&Path>, events: &EventList) -> Result<()> {
    match path {
        Some(p) => mealscope_core::io::write_events(p, events).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            write_events_to(events, &mut out)?;
            Ok(out.flush()?)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn training_entries<'a>(corpus: &'a [CorpusEntry], exclude: &[String]) -> Vec<&'a CorpusEntry> {
    corpus.iter().filter(|e| !exclude.contains(&e.subject)).collect()
}

fn corpus_rate(corpus: &[CorpusEntry]) -> Result<f64> {
    let fs = corpus
        .first()
        .ok_or_else(|| usage("manifest lists no recordings"))?
        .data
        .recording
        .sample_rate_hz();
    if let Some(e) = corpus.iter().find(|e| e.data.recording.sample_rate_hz() != fs) {
        return Err(usage(format!(
            "recordings mix sample rates: {fs} Hz and {} Hz (subject {})",
            e.data.recording.sample_rate_hz(),
            e.subject
        )));
    }
    Ok(fs)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { input, output, filter } => {
            let rec = read_recording(&input)?;
            let out = prepare(&rec, &filter.config(rec.sample_rate_hz()))?;
            write_recording(&output, &out)?;
        }
        Command::Train {
            manifest,
            output,
            exclude,
            model,
        } => {
            let corpus = load_corpus(&manifest)?;
            let fs = corpus_rate(&corpus)?;
            let entries = training_entries(&corpus, &exclude);
            if entries.is_empty() {
                return Err(usage("every subject is excluded"));
            }
            let cfg = model.pipeline(fs);
            let epochs = cfg.train.epochs;
            let (params, _) = train_model(&entries, &cfg, |s| {
                eprintln!(
                    "epoch {}/{epochs}: mean loss {:.5} over {} batches",
                    s.epoch + 1,
                    s.mean_loss,
                    s.batches
                )
            })?;
            write_params(&output, &params)?;
        }
        Command::DetectBites {
            model,
            input,
            output,
            probabilities,
            filter,
            detect,
        } => {
            let params = read_params(&model)?;
            let rec = read_recording(&input)?;
            let fs = rec.sample_rate_hz();
            let prepared = prepare(&rec, &filter.config(fs))?;
            let p = bite_probabilities(&params, &prepared)?;
            if let Some(path) = probabilities {
                write_atomic(&path, |out| {
                    writeln!(out, "t,p")?;
                    for (n, v) in p.iter().enumerate() {
                        writeln!(out, "{},{}", n as f64 * 4.0 / fs, v)?;
                    }
                    Ok(())
                })?;
            }
            let bites = detect_bites(&p, fs, &detect.config())?;
            write_events_out(output.as_deref(), &EventList::from_bites(&bites))?;
        }
        Command::DetectMeals {
            bites,
            recording,
            duration_s,
            fs_hz,
            method,
            eps_s,
            min_pts,
            output,
            localizer,
        } => {
            let bites: BiteSet = read_events(&bites)?.bite_times();
            let meals = match method {
                Method::Dbscan => dbscan_localize(&bites, eps_s, min_pts),
                Method::Gaussian => {
                    let (duration, fs) = match (recording, duration_s, fs_hz) {
                        (Some(path), _, _) => {
                            let rec = read_recording(&path)?;
                            (rec.duration_s(), rec.sample_rate_hz())
                        }
                        (None, Some(d), Some(fs)) => (d, fs),
                        _ => return Err(usage("give --recording or both --duration-s and --fs-hz")),
                    };
                    localize_meals(&bites, duration, fs, &localizer.config())?
                }
            };
            write_events_out(output.as_deref(), &EventList::from_meals(&meals))?;
        }
        Command::EvaluateBites {
            detections,
            truth,
            json,
        } => {
            let detected = read_events(&detections)?.bite_times();
            let truth = read_events(&truth)?
                .bite_intervals()
                .context("truth bites need start and end")?;
            let report = evaluate_bites(&detected, &truth)?;
            if json {
                print_json(&report)?;
            } else {
                print!("{}", report::bite_table([("all", &report)]));
            }
        }
        Command::EvaluateMeals {
            estimate,
            truth,
            duration_s,
            resolution_s,
            ratio,
            json,
        } => {
            let est: MealIntervalSet = read_events(&estimate)?.meals();
            let truth = read_events(&truth)?.meals();
            let report = evaluate_meals(&est, &truth, duration_s, resolution_s, ratio)?;
            if json {
                print_json(&report)?;
            } else {
                print!("{}", report::meal_table([("all", &report)]));
            }
        }
        Command::Synth { output_dir, corpus } => {
            let spec = CorpusSpec {
                subjects: corpus.subjects,
                meals_per_subject: corpus.meals_per_subject,
                meal_duration_s: corpus.meal_duration_s,
                days: corpus.days,
                day_duration_s: corpus.day_duration_s,
                day_meal_duration_s: corpus.day_meal_duration_s,
                mean_inter_bite_s: corpus.mean_inter_bite_s,
                sample_rate_hz: corpus.sample_rate_hz,
                noise_std: [corpus.noise_std; mealscope_core::CHANNELS],
                seed: corpus.seed,
                ..CorpusSpec::default()
            };
            let entries = mealscope_core::synth::generate_corpus(&spec)?;
            let manifest = write_corpus(&output_dir, &entries)?;
            println!("{}", manifest.display());
        }
        Command::Loso {
            manifest,
            subjects: only,
            model_dir,
            json,
            model,
            detect,
            localizer,
            resolution_s,
        } => {
            let corpus = load_corpus(&manifest)?;
            let fs = corpus_rate(&corpus)?;
            let all = subjects(&corpus);
            if all.len() < 2 {
                return Err(usage("leave-one-subject-out needs at least two subjects"));
            }
            let held: Vec<String> = if only.is_empty() { all.clone() } else { only };
            if let Some(s) = held.iter().find(|s| !all.contains(s)) {
                return Err(usage(format!("unknown subject {s}")));
            }
            if let Some(dir) = &model_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut cfg = model.pipeline(fs);
            cfg.detect = detect.config();
            cfg.localizer = localizer.config();
            cfg.resolution_s = resolution_s;
            let mut folds = Vec::with_capacity(held.len());
            for subject in &held {
                eprintln!("fold {subject}");
                let (params, report) = loso_fold(&corpus, subject, &cfg, |s| {
                    eprintln!("  epoch {}: mean loss {:.5}", s.epoch + 1, s.mean_loss)
                })?;
                if let Some(dir) = &model_dir {
                    write_params(&dir.join(format!("{subject}.bin")), &params)?;
                }
                folds.push(report);
            }
            let pooled = pool_reports(&folds);
            if json {
                print_json(&serde_json::json!({ "folds": folds, "pooled": pooled }))?;
            } else {
                print!("{}", report::loso_tables(&folds, &pooled));
            }
        }
    }
    Ok(())
}
