#![allow(dead_code)]

use std::path::PathBuf;

use lmsv::config::ExperimentConfig;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name), &[]).expect("shipped config parses")
}
