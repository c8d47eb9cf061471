//! Bite detection and meal localization from wrist-worn IMU recordings.
//!
//! A recording is mirrored to the right-wrist frame and filtered
//! ([`imu`]), a convolutional-recurrent network turns it into a bite
//! probability per four samples ([`net`]), peaks become bite timestamps
//! ([`bites`]) and dense runs of bites become meals ([`meals`]).
//! [`evaluate`] scores both against annotations, [`synth`] plants gestures
//! in synthetic recordings, and [`io`] reads and writes the file formats.

pub mod bites;
pub mod dsp;
pub mod error;
pub mod evaluate;
pub mod imu;
pub mod interval;
pub mod io;
pub mod meals;
pub mod net;
pub mod pipeline;
pub mod synth;
pub mod windowing;

pub use bites::{detect_bites, union_bites, BiteDetectConfig, BiteSet};
pub use error::{Error, Result};
pub use evaluate::{
    evaluate_bites, evaluate_meals, jaccard_index, match_bites, meal_confusion, precision_recall_f1, weighted_accuracy,
    weighting_ratio, wrist_motion_energy, BiteConfusion, BiteReport, EvalReport, MealConfusion,
};
pub use imu::{mirror_hand, preprocess, Handedness, ImuRecording, ImuSample, PreprocessConfig, CHANNELS};
pub use interval::{BiteAnnotation, Interval, MealAnnotation};
pub use io::{EventList, ManifestEntry};
pub use meals::{dbscan_localize, localize_meals, LocalizerConfig, MealIntervalSet};
pub use net::{ModelParams, NetConfig, TrainConfig};
pub use pipeline::{PipelineConfig, SubjectReport};
pub use synth::{CorpusEntry, CorpusSpec, RecordingKind, SynthOutput, SynthSpec};
pub use windowing::{Label, WindowConfig};
