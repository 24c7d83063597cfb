//! File-based pipeline stages: generate, label, encode, train, eval, predict.
//!
//! Each stage reads the previous stage's artifact, validates its header and
//! writes its own. All randomness is derived from the master seed and the
//! record id.

mod commands;
mod config;
pub mod io;

pub use commands::{
    cmd_encode, cmd_eval, cmd_generate, cmd_label, cmd_predict, cmd_train, default_path, predict_graphs, run_paths,
    LabelSummary, TrainRunSummary,
};
pub use config::RunConfig;
