use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::check_comparison_with_tol;
use crate::error::{Error, Result};
use crate::integrator::integrate;

use super::comparison::{common_samples, paired_config};
use super::config::ExperimentSpec;
use super::initial::build_initial;
use super::io::{self, SUMMARY_FILE};
use super::{Check, Experiment, Report, RunContext};

pub const EPSILON_FILE: &str = "epsilon.csv";

/// Absolute slack of `U^eps <= U`.
pub const ORDERING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub eps: f64,
    /// `min (U - U^eps)` over all nodes and shared samples.
    pub worst_gap: f64,
    /// `||U^eps - U||_inf` at the last shared sample.
    pub final_gap: f64,
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonStudyResult {
    Skipped {
        reason: String,
    },
    Done {
        rows: Vec<EpsilonRow>,
        final_time: f64,
    },
}

pub fn epsilon_study(spec: &ExperimentSpec, ctx: &RunContext) -> Result<EpsilonStudyResult> {
    let section = spec
        .epsilon
        .as_ref()
        .ok_or_else(|| Error::Config("epsilon study needs an [epsilon] section".into()))?;
    if section.values.is_empty() || section.values.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config(
            "epsilon values must be a nonempty list of positive numbers".into(),
        ));
    }
    let params = spec.model.params()?;
    if params.n_dim() == 2 {
        return Ok(EpsilonStudyResult::Skipped {
            reason:
                "N = 2: the regularization exponent is 0, so every eps gives the plain equation"
                    .into(),
        });
    }
    let grid = spec.grid.build(params.n_dim())?;
    let initial = build_initial(&spec.initial, &params, &grid)?;
    let mut eps_list = vec![0.0];
    eps_list.extend(&section.values);
    let records = ctx.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| {
                integrate(
                    &initial,
                    &grid,
                    &params,
                    &paired_config(&spec.solver, Some(eps)),
                )
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let plain = &records[0].profiles;
    let mut rows = Vec::new();
    let mut final_time = f64::INFINITY;
    for (&eps, rec) in eps_list.iter().zip(&records).skip(1) {
        let (reg, base) = common_samples(&rec.profiles, plain);
        let rep = check_comparison_with_tol(reg, base, ORDERING_TOL)?;
        let (a, b) = (
            reg.last().expect("initial sample"),
            base.last().expect("initial sample"),
        );
        final_time = final_time.min(a.t);
        rows.push(EpsilonRow {
            eps,
            worst_gap: rep.worst_gap,
            final_gap: a
                .u
                .iter()
                .zip(&b.u)
                .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())),
            ordered: rep.passed,
        });
    }
    Ok(EpsilonStudyResult::Done { rows, final_time })
}

pub struct EpsilonStudy;

impl Experiment for EpsilonStudy {
    fn name(&self) -> &'static str {
        "epsilon_study"
    }

    fn run(&self, spec: &ExperimentSpec, ctx: &RunContext) -> Result<Report> {
        let mut report = Report::new(self.name());
        report.push("N", spec.model.n_dim);
        let rows = match epsilon_study(spec, ctx)? {
            EpsilonStudyResult::Skipped { reason } => {
                report.push("status", "skipped");
                report.notes.push(reason);
                Vec::new()
            }
            EpsilonStudyResult::Done { rows, final_time } => {
                report.push("status", "done");
                report.push("final_time", final_time);
                for r in &rows {
                    report.push(&format!("final_gap.eps_{}", r.eps), r.final_gap);
                }
                let bad: Vec<String> = rows
                    .iter()
                    .filter(|r| !r.ordered)
                    .map(|r| format!("eps = {}: U - U^eps = {:e}", r.eps, r.worst_gap))
                    .collect();
                let detail = if bad.is_empty() {
                    format!("U^eps <= U + {ORDERING_TOL:e} for {} values", rows.len())
                } else {
                    bad.join("; ")
                };
                report
                    .checks
                    .push(Check::new("epsilon_ordering", bad.is_empty(), detail));
                let mut sorted = rows.clone();
                sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
                let monotone = sorted.windows(2).all(|w| w[0].final_gap <= w[1].final_gap);
                report.push("final_gap_monotone_in_eps", monotone);
                rows
            }
        };
        if let Some(dir) = ctx.out_dir() {
            io::ensure_dir(dir)?;
            io::write_rows(&dir.join(EPSILON_FILE), &rows)?;
            io::write_summary(&dir.join(SUMMARY_FILE), &report.summary_entries())?;
        }
        Ok(report)
    }
}
