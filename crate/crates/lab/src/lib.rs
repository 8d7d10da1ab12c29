//! Configuration, orchestration and artifact output for the verification experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use config::{ConfigFile, Experiment, ExperimentConfig, Overrides};
use report::Report;

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let run = match cfg.experiment {
        Experiment::Conserve => experiments::conserve::run,
        Experiment::Invariance => experiments::invariance::run,
        Experiment::Converge => experiments::converge::run,
        Experiment::Picard => experiments::picard::run,
        Experiment::Counting => experiments::counting::run,
        Experiment::Strichartz => experiments::strichartz::run,
        Experiment::Ansatz => experiments::ansatz::run,
        Experiment::Threshold => experiments::threshold::run,
    };
    run(cfg).with_context(|| format!("experiment `{}`", cfg.experiment))
}

/// The `*.toml` files of `dir`, sorted by name.
pub fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "toml"));
    files.sort();
    Ok(files)
}

/// Resolve every config in `dir`. A file without `out` writes to `<base>/<file stem>`.
pub fn resolve_dir(dir: &Path, cli: &Overrides) -> Result<Vec<ExperimentConfig>> {
    let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    config_files(dir)?
        .iter()
        .map(|path| {
            let file = ConfigFile::load(path)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let out = file.out.clone().unwrap_or_else(|| base.join(stem));
            let cli = Overrides {
                out: Some(out),
                ..cli.clone()
            };
            ExperimentConfig::resolve(None, file, cli).with_context(|| format!("config {}", path.display()))
        })
        .collect()
}

/// Run every config of `dir` concurrently.
pub fn run_all(dir: &Path, cli: &Overrides) -> Result<Vec<Report>> {
    resolve_dir(dir, cli)?.par_iter().map(run).collect()
}
