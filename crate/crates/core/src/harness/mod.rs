//! Experiment orchestration: training data, BER sweeps, calibration and result files.
//!
//! Every random draw comes from a stream keyed by the master seed and the grid
//! point it belongs to, so a sweep gives the same numbers on any number of
//! worker threads.

mod calibrate;
mod config;
mod link;
mod models;
mod records;
mod replay;
mod sweep;

pub use calibrate::{baseline_ber, calibrate_baseline_sigma, calibrate_coded_transition, Calibration, Probe};
pub use config::{BaselineReference, ExperimentConfig, OutputConfig, OutputFormat, Profile};
pub use link::{generate_evaluation_set, generate_training_set, hard_decision_errors, Link};
pub use models::{model_index, point_training_config, ModelStore, ReadyModel};
pub use records::{emit_results, from_json, read_csv, to_json, write_csv, BerRecord};
pub use replay::{replay_frames, synthesize_frames, Demodulator, ReplayedSymbol};
pub use sweep::{
    block_index, configured_codes, equalized_errors, run_block, run_coded_sweep, run_coded_sweep_with,
    run_uncoded_sweep, run_uncoded_sweep_with, with_workers, BlockOutcome, CodedPoint, CodedReport, NamedCode, PointFailure, UncodedReport,
};
