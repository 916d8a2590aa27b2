//! Experiment orchestration: configuration, the experiment registry, and
//! result files.

pub mod comparison;
pub mod config;
pub mod convergence;
pub mod epsilon;
pub mod initial;
pub mod io;
pub mod registry;
pub mod single;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{ExperimentSpec, InitialData};
pub use initial::build_initial;
pub use registry::{Experiment, ExperimentRegistry};

/// Outcome of one inequality from the theory evaluated on computed data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// What an experiment hands back to the driver.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub experiment: String,
    /// Ordered `key: value` pairs written to `summary.txt`.
    pub summary: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Summary lines followed by `checks_passed`, one line per check, and
    /// notes.
    pub fn summary_entries(&self) -> Vec<(String, String)> {
        let mut out = vec![("experiment".to_string(), self.experiment.clone())];
        out.extend(self.summary.iter().cloned());
        out.push(("checks_passed".into(), self.checks_passed().to_string()));
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "fail" };
            out.push((
                format!("check.{}", c.name),
                format!("{status} ({})", c.detail),
            ));
        }
        for (i, n) in self.notes.iter().enumerate() {
            out.push((format!("note.{}", i + 1), n.clone()));
        }
        out
    }
}

/// Execution settings shared by all experiments.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for RunContext {
    fn default() -> Self {
        Self {
            out_dir: None,
            jobs: 1,
        }
    }
}

impl RunContext {
    pub fn out_dir(&self) -> Option<&Path> {
        self.out_dir.as_deref()
    }

    /// Runs `f` on a pool of `jobs` worker threads.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}
