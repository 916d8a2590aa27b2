use std::path::Path;

use crate::diagnostics::{
    dissipation_bound_check, moment_ceiling, steady_truncation_error, DiagnosticsSample,
    REGIME_RTOL,
};
use crate::error::Result;
use crate::grid::Grid;
use crate::integrator::{integrate, RunRecord, SolverConfig};
use crate::model::ModelParams;

use super::config::ExperimentSpec;
use super::initial::build_initial;
use super::io::{self, DIAGNOSTICS_FILE, PROFILE_FILE, SUMMARY_FILE};
use super::{fmt_opt, Check, Experiment, Report, RunContext};

/// Relative slack of the moment inequality, as a fraction of the ceiling
/// `N m / (2 omega_N)`.
pub const MOMENT_RTOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub params: ModelParams,
    pub grid: Grid,
    pub config: SolverConfig,
    pub record: RunRecord,
    /// Discretization-error estimate fed to the dissipation check.
    pub discretization_error: f64,
    pub checks: Vec<Check>,
}

pub fn run_single(spec: &ExperimentSpec) -> Result<SingleRun> {
    let params = spec.model.params()?;
    let grid = spec.grid.build(params.n_dim())?;
    let initial = build_initial(&spec.initial, &params, &grid)?;
    let record = integrate(&initial, &grid, &params, &spec.solver)?;
    let op = spec.solver.operator()?;
    let discretization_error = steady_truncation_error(&grid, &params, op.as_ref())?;
    let checks = trajectory_checks(&params, &spec.solver, &record, discretization_error)?;
    Ok(SingleRun {
        params,
        grid,
        config: spec.solver.clone(),
        record,
        discretization_error,
        checks,
    })
}

/// Moment inequality: `psi(t) - psi(0) >= bound(t) - MOMENT_RTOL * ceiling`.
pub fn moment_inequality_check(samples: &[DiagnosticsSample], params: &ModelParams) -> Check {
    let tol = MOMENT_RTOL * moment_ceiling(params);
    let worst = samples
        .iter()
        .map(|s| s.psi - s.psi_lower)
        .fold(f64::INFINITY, f64::min);
    Check::new(
        "moment_inequality",
        worst >= -tol,
        format!("min psi - (psi0 + bound) = {worst:e}, tolerance {tol:e}"),
    )
}

/// `0 < psi < N m / (2 omega_N)` at every sample.
pub fn moment_range_check(samples: &[DiagnosticsSample], params: &ModelParams) -> Check {
    let ceiling = moment_ceiling(params);
    let max = samples
        .iter()
        .map(|s| s.psi)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().map(|s| s.psi).fold(f64::INFINITY, f64::min);
    Check::new(
        "moment_range",
        min > 0.0 && max < ceiling,
        format!("psi in [{min}, {max}], ceiling {ceiling}"),
    )
}

/// Theory checks appropriate to the mass regime of a finished run.
pub fn trajectory_checks(
    params: &ModelParams,
    config: &SolverConfig,
    record: &RunRecord,
    discretization_error: f64,
) -> Result<Vec<Check>> {
    let samples = &record.samples;
    let mut checks = vec![moment_range_check(samples, params)];
    let horizon = samples.first().map_or(0.0, |s| s.t) + config.t_end;
    if params.is_critical(REGIME_RTOL) {
        checks.push(Check::new(
            "no_blow_up",
            !record.outcome.blew_up(),
            format!("outcome {} at t = {}", record.outcome, record.final_state.t),
        ));
        if let Some(c) = dissipation(samples, params, discretization_error)? {
            checks.push(c);
        }
    } else if params.is_subcritical() {
        if let Some(c) = dissipation(samples, params, discretization_error)? {
            checks.push(c);
        }
        let bound = params.n() * params.amplitude();
        let max = samples.iter().filter_map(|s| s.psi_ell).fold(0.0, f64::max);
        checks.push(Check::new(
            "lyapunov_bound",
            max <= bound,
            format!("max Psi_ell = {max}, bound N A = {bound}"),
        ));
    } else {
        checks.push(moment_inequality_check(samples, params));
        let t_star = params.blow_up_time_bound()?;
        match record
            .outcome
            .event_time()
            .filter(|_| record.outcome.blew_up())
        {
            Some(t) => checks.push(Check::new(
                "blow_up_before_T_star",
                t <= t_star,
                format!("t_event = {t}, T* = {t_star}"),
            )),
            None if horizon >= t_star => checks.push(Check::new(
                "blow_up_before_T_star",
                false,
                format!("no blow-up by t = {}, T* = {t_star}", record.final_state.t),
            )),
            None => {}
        }
    }
    Ok(checks)
}

fn dissipation(
    samples: &[DiagnosticsSample],
    params: &ModelParams,
    discretization_error: f64,
) -> Result<Option<Check>> {
    if samples.len() < 3 {
        return Ok(None);
    }
    let rep = dissipation_bound_check(samples, params, discretization_error)?;
    let failed = rep.intervals.iter().filter(|c| !c.passed).count();
    Ok(Some(Check::new(
        "lyapunov_dissipation",
        rep.passed,
        format!(
            "{failed} of {} intervals over tolerance {:e}; worst slope - bound = {:e}",
            rep.intervals.len(),
            rep.tolerance,
            rep.worst_excess
        ),
    )))
}

/// Summary lines shared by single runs and comparison members.
pub fn run_summary(
    report: &mut Report,
    params: &ModelParams,
    grid: &Grid,
    config: &SolverConfig,
    record: &RunRecord,
) {
    report.push("outcome", record.outcome);
    report.push("t_event", fmt_opt(record.outcome.event_time()));
    report.push(
        "T_star",
        params
            .blow_up_time_bound()
            .map_or_else(|_| "undefined".to_string(), |t| t.to_string()),
    );
    report.push("N", params.n_dim());
    report.push("m", params.mass());
    report.push("m_c", params.critical_mass());
    report.push("m_over_m_c", params.mass_ratio());
    report.push("level", params.level());
    report.push("cells", grid.cells());
    report.push("gamma", grid.gamma());
    report.push("t_end", config.t_end);
    report.push("t_final", record.final_state.t);
    report.push("eps", config.eps);
    report.push("scheme", config.scheme);
    report.push("blowup_slope_factor", config.blowup_slope_factor);
    report.push("accepted_steps", record.accepted_steps);
    report.push("rejected_steps", record.rejected_steps);
    if let Some(s) = record.samples.last() {
        report.push("origin_slope_final", s.origin_slope);
        report.push("steady_dist_final", fmt_opt(s.steady_dist));
    }
}

pub fn write_run_files(dir: &Path, grid: &Grid, record: &RunRecord) -> Result<()> {
    io::ensure_dir(dir)?;
    io::write_diagnostics(&dir.join(DIAGNOSTICS_FILE), &record.samples)?;
    io::write_profile(&dir.join(PROFILE_FILE), grid, &record.final_state.u)
}

pub struct Single;

impl Experiment for Single {
    fn name(&self) -> &'static str {
        "single"
    }

    fn run(&self, spec: &ExperimentSpec, ctx: &RunContext) -> Result<Report> {
        let run = run_single(spec)?;
        let mut report = Report::new(self.name());
        run_summary(
            &mut report,
            &run.params,
            &run.grid,
            &run.config,
            &run.record,
        );
        report.push("discretization_error", run.discretization_error);
        report.checks = run.checks;
        if let Some(dir) = ctx.out_dir() {
            write_run_files(dir, &run.grid, &run.record)?;
            io::write_summary(&dir.join(SUMMARY_FILE), &report.summary_entries())?;
        }
        Ok(report)
    }
}
