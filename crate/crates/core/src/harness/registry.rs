use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::config::ExperimentSpec;
use super::{comparison, convergence, epsilon, single, sweep, Report, RunContext};

/// An experiment kind selectable by name from a spec's `kind` field.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    /// Runs the experiment and writes its files when the context has an
    /// output directory.
    fn run(&self, spec: &ExperimentSpec, ctx: &RunContext) -> Result<Report>;
}

#[derive(Default)]
pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every built-in experiment.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(single::Single));
        r.register(Box::new(sweep::MassSweep));
        r.register(Box::new(convergence::GridConvergence));
        r.register(Box::new(comparison::Comparison));
        r.register(Box::new(epsilon::EpsilonStudy));
        r
    }

    /// Adds an experiment, replacing any previous one with the same name.
    pub fn register(&mut self, experiment: Box<dyn Experiment>) {
        self.entries.insert(experiment.name(), experiment);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    /// Dispatches on `spec.kind`, falling back to `default_kind`. A spec
    /// naming a different kind than the caller expects is rejected.
    pub fn run(
        &self,
        spec: &ExperimentSpec,
        default_kind: &str,
        allowed: &[&str],
        ctx: &RunContext,
    ) -> Result<Report> {
        let kind = spec.kind.as_deref().unwrap_or(default_kind);
        if !allowed.is_empty() && !allowed.contains(&kind) {
            return Err(Error::Config(format!(
                "experiment kind `{kind}` cannot be run here; expected one of {allowed:?}"
            )));
        }
        self.get(kind)?.run(spec, ctx)
    }
}
