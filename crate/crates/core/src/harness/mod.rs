//! Experiment harness: configuration, learning runs, the SNR-loss sweep and
//! their result files.

pub mod config;
pub mod learning;
pub mod output;
pub mod snr_loss;

pub use config::{
    AnomalySpec, AnomalyType, ArraySpec, DictionarySource, DictionarySpec, Estimator,
    EstimatorKind, EstimatorSpec, ExperimentConfig, LearningPlan, OutputSpec, RosterEntry,
    SnrLossSpec, TrainingSpec,
};
pub use learning::{
    realize_arrays, run_learning, Curve, LearningOutcome, SampleSource, TrainedNetwork,
};
pub use output::{
    curves_csv, ensure_writable, snr_loss_csv, write_learning_outputs, write_snr_loss,
};
pub use snr_loss::{run_snr_loss, SnrLossCell};
