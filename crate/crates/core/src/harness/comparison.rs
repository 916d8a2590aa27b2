use rayon::prelude::*;

use crate::diagnostics::{check_comparison, check_comparison_with_tol, ComparisonReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::integrator::{integrate, RunRecord, SolverConfig};
use crate::model::ModelParams;

use super::config::{ComparisonMember, ExperimentSpec};
use super::initial::build_initial;
use super::io::{self, SUMMARY_FILE};
use super::single::{run_summary, write_run_files};
use super::{Check, Experiment, Report, RunContext};

/// Both members share the step sequence: `dt_init` is raised to `dt_max` so
/// that the implicit steps coincide unless a step is rejected.
pub fn paired_config(base: &SolverConfig, eps: Option<f64>) -> SolverConfig {
    let mut cfg = base.clone();
    if let Some(eps) = eps {
        cfg.eps = eps;
    }
    cfg.dt_init = cfg.dt_max;
    cfg.record_profiles = true;
    cfg.stop_on_steady = false;
    cfg
}

#[derive(Debug, Clone)]
pub struct MemberRun {
    pub params: ModelParams,
    pub config: SolverConfig,
    pub record: RunRecord,
}

fn run_member(
    spec: &ExperimentSpec,
    member: &ComparisonMember,
    grid: &Grid,
) -> Result<(MemberRun, State)> {
    let params = match (member.mass, member.mass_ratio) {
        (None, None) => spec.model.params()?,
        (m, r) => ModelParams::new(spec.model.n_dim, spec.model.resolve_mass(m, r)?)?,
    };
    let config = paired_config(&spec.solver, member.eps);
    let initial = build_initial(&member.initial, &params, grid)?;
    let record = integrate(&initial, grid, &params, &config)?;
    Ok((
        MemberRun {
            params,
            config,
            record,
        },
        initial,
    ))
}

/// Leading profiles of two trajectories whose sample times agree.
pub fn common_samples<'a>(a: &'a [State], b: &'a [State]) -> (&'a [State], &'a [State]) {
    let k = a
        .iter()
        .zip(b)
        .take_while(|(x, y)| (x.t - y.t).abs() <= 1e-12 * x.t.abs().max(1.0))
        .count();
    (&a[..k], &b[..k])
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub grid: Grid,
    pub lower: MemberRun,
    pub upper: MemberRun,
    pub report: ComparisonReport,
}

/// Runs both members and checks `lower <= upper` at the shared sample times.
/// The initial data must already be ordered.
pub fn run_comparison(spec: &ExperimentSpec, ctx: &RunContext) -> Result<ComparisonRun> {
    let section = spec
        .comparison
        .as_ref()
        .ok_or_else(|| Error::Config("comparison needs a [comparison] section".into()))?;
    let grid = spec.grid.build(spec.model.n_dim)?;
    let members = [&section.lower, &section.upper];
    let runs = ctx.install(|| {
        members
            .par_iter()
            .map(|m| run_member(spec, m, &grid))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut runs = runs.into_iter();
    let (lower, lower_init) = runs.next().expect("two members");
    let (upper, upper_init) = runs.next().expect("two members");
    let initial = check_comparison_with_tol(&[lower_init], &[upper_init], 0.0)?;
    if !initial.passed {
        return Err(Error::Config(format!(
            "initial data not ordered: upper - lower = {:e} at node {}",
            initial.worst_gap, initial.worst_node
        )));
    }
    let (lo, up) = common_samples(&lower.record.profiles, &upper.record.profiles);
    let report = check_comparison(lo, up)?;
    Ok(ComparisonRun {
        grid,
        lower,
        upper,
        report,
    })
}

pub fn comparison_check(report: &ComparisonReport, samples: usize) -> Check {
    Check::new(
        "comparison_ordering",
        report.passed,
        format!(
            "min upper - lower = {:e} at t = {}, node {} over {samples} samples; tolerance {:e}",
            report.worst_gap, report.worst_time, report.worst_node, report.tolerance
        ),
    )
}

pub struct Comparison;

impl Experiment for Comparison {
    fn name(&self) -> &'static str {
        "comparison"
    }

    fn run(&self, spec: &ExperimentSpec, ctx: &RunContext) -> Result<Report> {
        let run = run_comparison(spec, ctx)?;
        let samples = common_samples(&run.lower.record.profiles, &run.upper.record.profiles)
            .0
            .len();
        let mut report = Report::new(self.name());
        report.push("worst_gap", run.report.worst_gap);
        report.push("worst_time", run.report.worst_time);
        report.push("compared_samples", samples);
        for (tag, member) in [("lower", &run.lower), ("upper", &run.upper)] {
            let mut sub = Report::new(tag);
            run_summary(
                &mut sub,
                &member.params,
                &run.grid,
                &member.config,
                &member.record,
            );
            for (k, v) in sub.summary {
                report.push(&format!("{tag}.{k}"), v);
            }
        }
        report.checks.push(comparison_check(&run.report, samples));
        if let Some(dir) = ctx.out_dir() {
            write_run_files(&dir.join("lower"), &run.grid, &run.lower.record)?;
            write_run_files(&dir.join("upper"), &run.grid, &run.upper.record)?;
            io::write_summary(&dir.join(SUMMARY_FILE), &report.summary_entries())?;
        }
        Ok(report)
    }
}
