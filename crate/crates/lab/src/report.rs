//! Experiment reports and their on-disk artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig};

/// One checked statement. `criterion` links it to a numbered acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub criterion: Option<u8>,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(criterion: impl Into<Option<u8>>, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            criterion: criterion.into(),
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub assertions: Vec<Assertion>,
    /// Experiment-specific numbers (fits, maxima, statistics).
    pub summary: serde_json::Value,
    /// Files written next to `report.json`.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

/// Collects the assertions and artifacts of one run.
pub struct Recorder {
    pub config: ExperimentConfig,
    pub assertions: Vec<Assertion>,
    artifacts: Vec<String>,
}

impl Recorder {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(&config.output_dir).with_context(|| format!("creating {}", config.output_dir.display()))?;
        Ok(Self {
            config: config.clone(),
            assertions: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn check(&mut self, criterion: impl Into<Option<u8>>, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(criterion, name, passed, detail));
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.config.output_dir.join(file)
    }

    /// Write an artifact through `body`.
    pub fn write(&mut self, file: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.path(file);
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        body(&mut w)?;
        w.flush()?;
        self.artifacts.push(file.into());
        Ok(())
    }

    pub fn finish(self, summary: serde_json::Value) -> Result<Report> {
        let report = Report {
            experiment: self.config.experiment,
            master_seed: self.config.master_seed,
            config: self.config,
            assertions: self.assertions,
            summary,
            artifacts: self.artifacts,
        };
        write_json(&report.config.output_dir.join("report.json"), &report)?;
        Ok(report)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
