use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::integrate;
use crate::model::{critical_mass, ModelParams};

use super::config::{ExperimentSpec, InitialData, SweepSection};
use super::initial::build_initial;
use super::io::{self, SUMMARY_FILE};
use super::{fmt_opt, Check, Experiment, Report, RunContext};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mass: f64,
    pub mass_ratio: f64,
    pub outcome: String,
    pub t_event: Option<f64>,
    pub blew_up: bool,
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub n_dim: u32,
    /// Every classified mass, in evaluation order.
    pub points: Vec<SweepPoint>,
    /// Final bracket: `mass_lo` does not blow up within the horizon,
    /// `mass_hi` does.
    pub mass_lo: f64,
    pub mass_hi: f64,
    pub estimate: f64,
    pub width: f64,
    pub critical: f64,
    pub rel_error: f64,
}

fn bracket(sweep: &SweepSection, n_dim: u32) -> Result<(f64, f64)> {
    let mc = critical_mass(n_dim)?;
    let lo = match (sweep.mass_lo, sweep.ratio_lo) {
        (Some(m), None) => m,
        (None, Some(r)) => r * mc,
        _ => {
            return Err(Error::Config(
                "give exactly one of `mass_lo`, `ratio_lo`".into(),
            ))
        }
    };
    let hi = match (sweep.mass_hi, sweep.ratio_hi) {
        (Some(m), None) => m,
        (None, Some(r)) => r * mc,
        _ => {
            return Err(Error::Config(
                "give exactly one of `mass_hi`, `ratio_hi`".into(),
            ))
        }
    };
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::Config(format!(
            "mass bracket [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    if !(sweep.rtol > 0.0) {
        return Err(Error::Config("sweep `rtol` must be positive".into()));
    }
    Ok((lo, hi))
}

fn classify(spec: &ExperimentSpec, grid: &Grid, mass: f64) -> Result<SweepPoint> {
    let params = ModelParams::new(spec.model.n_dim, mass)?;
    let initial = build_initial(&spec.initial, &params, grid)?;
    let record = integrate(&initial, grid, &params, &spec.solver)?;
    let blew_up = record.outcome.blew_up();
    Ok(SweepPoint {
        mass,
        mass_ratio: params.mass_ratio(),
        outcome: record.outcome.label().to_string(),
        t_event: record.outcome.event_time(),
        blew_up,
        t_star: params.blow_up_time_bound().ok(),
    })
}

/// Classifies the bracket ends, then bisects on the mass until the bracket
/// is narrower than `rtol * m_c`. The bisection sequence does not depend on
/// the number of worker threads.
pub fn mass_sweep(spec: &ExperimentSpec, ctx: &RunContext) -> Result<SweepResult> {
    let section = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("mass sweep needs a [sweep] section".into()))?;
    if !matches!(spec.initial, InitialData::Constant) {
        return Err(Error::Config(
            "mass sweep supports only `constant` initial data".into(),
        ));
    }
    let n_dim = spec.model.n_dim;
    let (mut lo, mut hi) = bracket(section, n_dim)?;
    let mc = critical_mass(n_dim)?;
    let grid = spec.grid.build(n_dim)?;

    let ends: Vec<Result<SweepPoint>> = ctx.install(|| {
        [lo, hi]
            .par_iter()
            .map(|&m| classify(spec, &grid, m))
            .collect()
    })?;
    let mut points = ends.into_iter().collect::<Result<Vec<_>>>()?;
    if points[0].blew_up == points[1].blew_up || points[0].blew_up {
        return Err(Error::Bracket {
            lo,
            hi,
            outcome: format!("{} / {}", points[0].outcome, points[1].outcome),
        });
    }
    while hi - lo > section.rtol * mc {
        let mid = 0.5 * (lo + hi);
        let p = classify(spec, &grid, mid)?;
        if p.blew_up {
            hi = mid;
        } else {
            lo = mid;
        }
        points.push(p);
    }
    let estimate = 0.5 * (lo + hi);
    Ok(SweepResult {
        n_dim,
        points,
        mass_lo: lo,
        mass_hi: hi,
        estimate,
        width: hi - lo,
        critical: mc,
        rel_error: (estimate - mc).abs() / mc,
    })
}

/// Every supercritical sweep member whose horizon reaches `T*` must have
/// blown up by `T*`.
pub fn sweep_checks(result: &SweepResult, horizon: f64) -> Vec<Check> {
    let mut violations = Vec::new();
    let mut checked = 0;
    for p in &result.points {
        let Some(t_star) = p.t_star else { continue };
        match (p.blew_up, p.t_event) {
            (true, Some(t)) => {
                checked += 1;
                if t > t_star {
                    violations.push(format!(
                        "m/m_c = {}: t_event {t} > T* {t_star}",
                        p.mass_ratio
                    ));
                }
            }
            _ if horizon >= t_star => {
                checked += 1;
                violations.push(format!(
                    "m/m_c = {}: no blow-up, T* = {t_star}",
                    p.mass_ratio
                ));
            }
            _ => {}
        }
    }
    let detail = if violations.is_empty() {
        format!("{checked} supercritical runs within T*")
    } else {
        violations.join("; ")
    };
    vec![Check::new(
        "blow_up_before_T_star",
        violations.is_empty(),
        detail,
    )]
}

pub struct MassSweep;

impl Experiment for MassSweep {
    fn name(&self) -> &'static str {
        "mass_sweep"
    }

    fn run(&self, spec: &ExperimentSpec, ctx: &RunContext) -> Result<Report> {
        let result = mass_sweep(spec, ctx)?;
        let mut report = Report::new(self.name());
        report.push("N", result.n_dim);
        report.push("m_c", result.critical);
        report.push("m_lo", result.mass_lo);
        report.push("m_hi", result.mass_hi);
        report.push("threshold_estimate", result.estimate);
        report.push("bracket_width", result.width);
        report.push("rel_error", result.rel_error);
        report.push("runs", result.points.len());
        report.push("cells", spec.grid.cells);
        report.push("gamma", spec.grid.gamma);
        report.push("t_end", spec.solver.t_end);
        report.push("blowup_slope_factor", spec.solver.blowup_slope_factor);
        let lo_point = result.points.iter().find(|p| p.mass == result.mass_lo);
        report.push(
            "outcome_lo",
            lo_point.map_or("none", |p| p.outcome.as_str()),
        );
        let hi_point = result.points.iter().find(|p| p.mass == result.mass_hi);
        report.push("t_event_hi", fmt_opt(hi_point.and_then(|p| p.t_event)));
        report.checks = sweep_checks(&result, spec.solver.t_end);
        if let Some(dir) = ctx.out_dir() {
            io::ensure_dir(dir)?;
            io::write_rows(&dir.join(SWEEP_FILE), &result.points)?;
            io::write_summary(&dir.join(SUMMARY_FILE), &report.summary_entries())?;
        }
        Ok(report)
    }
}
