//! Train, evaluate and compare hopper actors from the command line.

pub mod commands;
pub mod config;

pub use commands::{
    compare, eval_checkpoint, export_plots, final_window_reward, read_train_log, run_dir, train_one, CompareRun,
    Comparison, LogRow, RatioRow,
};
pub use config::ExperimentConfig;
