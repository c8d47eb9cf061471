use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mealscope_core::{
    BiteDetectConfig, LocalizerConfig, NetConfig, PipelineConfig, PreprocessConfig, TrainConfig, WindowConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "mealscope",
    version,
    about = "Bite detection and meal localization from wrist IMU recordings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mirror a recording to the right wrist and filter it.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        filter: PreprocessArgs,
    },
    /// Train a detector on the recordings of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the model parameters.
        #[arg(long)]
        output: PathBuf,
        /// Leave out a subject; may be repeated.
        #[arg(long = "exclude-subject")]
        exclude: Vec<String>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Detect bites in a raw recording.
    DetectBites {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Events file to write; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the per-step bite probabilities as `t,p` CSV.
        #[arg(long)]
        probabilities: Option<PathBuf>,
        #[command(flatten)]
        filter: PreprocessArgs,
        #[command(flatten)]
        detect: DetectArgs,
    },
    /// Group detected bites into meals.
    DetectMeals {
        #[arg(long)]
        bites: PathBuf,
        /// Recording the bites came from; supplies duration and sample rate.
        #[arg(long, conflicts_with_all = ["duration_s", "fs_hz"])]
        recording: Option<PathBuf>,
        #[arg(long, requires = "fs_hz")]
        duration_s: Option<f64>,
        #[arg(long, requires = "duration_s")]
        fs_hz: Option<f64>,
        #[arg(long, value_enum, default_value_t = Method::Gaussian)]
        method: Method,
        /// Neighbourhood radius for the clustering method.
        #[arg(long, default_value_t = 180.0)]
        eps_s: f64,
        #[arg(long, default_value_t = 2)]
        min_pts: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        localizer: LocalizerArgs,
    },
    /// Score detected bites against annotated bite intervals.
    EvaluateBites {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Score estimated meals against annotated meals.
    EvaluateMeals {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        duration_s: f64,
        #[arg(long, default_value_t = 1.0)]
        resolution_s: f64,
        /// Weighting ratio; derived from the truth when absent.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic corpus with a manifest.
    Synth {
        #[arg(long)]
        output_dir: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Leave-one-subject-out training and evaluation over a manifest.
    Loso {
        #[arg(long)]
        manifest: PathBuf,
        /// Evaluate only these held-out subjects; may be repeated.
        #[arg(long = "subject")]
        subjects: Vec<String>,
        /// Save each fold's model here as `<subject>.bin`.
        #[arg(long)]
        model_dir: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        detect: DetectArgs,
        #[command(flatten)]
        localizer: LocalizerArgs,
        #[arg(long, default_value_t = 1.0)]
        resolution_s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gaussian,
    Dbscan,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Moving-average length in samples [default: 0.25 s of samples].
    #[arg(long)]
    pub ma_len: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub hp_cutoff_hz: f64,
    #[arg(long, default_value_t = 512)]
    pub hp_len: usize,
}

impl PreprocessArgs {
    pub fn config(&self, fs_hz: f64) -> PreprocessConfig {
        let base = PreprocessConfig::for_sample_rate(fs_hz);
        let ma_len = self.ma_len.unwrap_or(base.ma_len).max(1);
        PreprocessConfig {
            ma_len,
            ma_tap: 1.0 / ma_len as f64,
            hp_cutoff_hz: self.hp_cutoff_hz,
            hp_len: self.hp_len,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = 0.89)]
    pub lambda_p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub min_gap_s: f64,
}

impl DetectArgs {
    pub fn config(&self) -> BiteDetectConfig {
        BiteDetectConfig {
            lambda_p: self.lambda_p,
            min_gap_s: self.min_gap_s,
        }
    }
}

#[derive(Debug, Args)]
pub struct LocalizerArgs {
    #[arg(long, default_value_t = 240.0)]
    pub gauss_len_s: f64,
    #[arg(long, default_value_t = 45.0)]
    pub gauss_std_s: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub lambda_s: f64,
    #[arg(long, default_value_t = 180.0)]
    pub merge_gap_s: f64,
    #[arg(long, default_value_t = 180.0)]
    pub min_duration_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub edge_sidelobe_s: f64,
}

impl LocalizerArgs {
    pub fn config(&self) -> LocalizerConfig {
        LocalizerConfig {
            gauss_len_s: self.gauss_len_s,
            gauss_std_s: self.gauss_std_s,
            lambda_s: self.lambda_s,
            merge_gap_s: self.merge_gap_s,
            min_duration_s: self.min_duration_s,
            edge_sidelobe_s: self.edge_sidelobe_s,
        }
    }
}

/// Network, windowing and optimizer settings.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Filters of the three convolutions.
    #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128])]
    pub filters: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    pub lstm_units: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rmsprop_decay: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub rmsprop_epsilon: f64,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep at most this many negative windows.
    #[arg(long)]
    pub max_negatives: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.05)]
    pub meal_step_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub day_step_s: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_s: f64,
    #[command(flatten)]
    pub filter: PreprocessArgs,
}

impl ModelArgs {
    pub fn pipeline(&self, fs_hz: f64) -> PipelineConfig {
        let window = |step_s| WindowConfig {
            window_s: self.window_s,
            step_s,
            epsilon_s: self.epsilon_s,
        };
        PipelineConfig {
            preprocess: self.filter.config(fs_hz),
            net: NetConfig {
                conv_filters: self.filters.clone(),
                lstm_units: self.lstm_units,
                dropout_rate: self.dropout,
                ..NetConfig::default()
            },
            train: TrainConfig {
                learning_rate: self.learning_rate,
                batch_size: self.batch_size,
                epochs: self.epochs,
                rmsprop_decay: self.rmsprop_decay,
                rmsprop_epsilon: self.rmsprop_epsilon,
                seed: self.seed,
                augment: !self.no_augment,
            },
            init_seed: self.seed,
            meal_windows: window(self.meal_step_s),
            day_windows: window(self.day_step_s),
            max_negatives: self.max_negatives,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    #[arg(long, default_value_t = 4)]
    pub meals_per_subject: usize,
    #[arg(long, default_value_t = 480.0)]
    pub meal_duration_s: f64,
    #[arg(long, default_value_t = 4)]
    pub days: usize,
    #[arg(long, default_value_t = 16_300.0)]
    pub day_duration_s: f64,
    #[arg(long, default_value_t = 1148.0)]
    pub day_meal_duration_s: f64,
    #[arg(long, default_value_t = 10.0)]
    pub mean_inter_bite_s: f64,
    #[arg(long, default_value_t = 100.0)]
    pub sample_rate_hz: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
