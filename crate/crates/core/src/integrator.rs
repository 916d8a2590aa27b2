//! Backward-Euler time integration with damped Newton solves, adaptive step
//! control and blow-up classification.

use std::collections::VecDeque;
use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostics, DiagnosticsSample};
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::model::ModelParams;
use crate::operator::{operator_for, DriftScheme, ReducedOperator};

/// `||RHS||_inf < STEADY_RTOL * (m / omega_N)` classifies a state as steady.
pub const STEADY_RTOL: f64 = 1e-9;

/// Accepted steps may decrease `U` by at most this fraction of the level.
pub const MONOTONICITY_RTOL: f64 = 1e-10;

const DT_GROWTH: f64 = 1.2;
const MIN_STEP_FAILURES: usize = 3;
const SLOPE_WINDOW: usize = 5;
const LINE_SEARCH_STEPS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Newton tolerance on the sup-norm residual, relative to the boundary level.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub blowup_slope_factor: f64,
    pub t_end: f64,
    /// Drift regularization; `0` selects the unregularized operator.
    pub eps: f64,
    pub scheme: DriftScheme,
    /// Diagnostics cadence; sample times are hit exactly.
    pub sample_every: f64,
    pub stop_on_steady: bool,
    /// Keep the full state at every sample time.
    pub record_profiles: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 0.1,
            newton_tol: 1e-11,
            newton_max_iter: 30,
            blowup_slope_factor: 1e3,
            t_end: 1.0,
            eps: 0.0,
            scheme: DriftScheme::Central,
            sample_every: 0.1,
            stop_on_steady: true,
            record_profiles: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("dt_min", self.dt_min)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_max", self.dt_max)?;
        positive("newton_tol", self.newton_tol)?;
        positive("t_end", self.t_end)?;
        positive("sample_every", self.sample_every)?;
        if !(self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::param(
                "dt_init",
                format!(
                    "need dt_min < dt_init <= dt_max, got {} / {} / {}",
                    self.dt_min, self.dt_init, self.dt_max
                ),
            ));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::param("newton_max_iter", "must be at least 1"));
        }
        if !(self.blowup_slope_factor > 1.0) {
            return Err(Error::param(
                "blowup_slope_factor",
                format!("must exceed 1, got {}", self.blowup_slope_factor),
            ));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::param(
                "eps",
                format!("must be >= 0, got {}", self.eps),
            ));
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<Box<dyn ReducedOperator>> {
        operator_for(self.eps, self.scheme)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Outcome {
    BlewUp { t: f64 },
    ReachedHorizon,
    ConvergedToSteady { t: f64 },
}

impl Outcome {
    pub fn event_time(&self) -> Option<f64> {
        match *self {
            Outcome::BlewUp { t } | Outcome::ConvergedToSteady { t } => Some(t),
            Outcome::ReachedHorizon => None,
        }
    }

    pub fn blew_up(&self) -> bool {
        matches!(self, Outcome::BlewUp { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::BlewUp { .. } => "BlewUp",
            Outcome::ReachedHorizon => "ReachedHorizon",
            Outcome::ConvergedToSteady { .. } => "ConvergedToSteady",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub outcome: Outcome,
    pub samples: Vec<DiagnosticsSample>,
    /// States at the sample times, when requested.
    pub profiles: Vec<State>,
    pub final_state: State,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Reconstructed density at the origin, `N U_1 / xi_1`.
pub fn origin_density(u: &[f64], grid: &Grid) -> f64 {
    f64::from(grid.n_dim()) * u[1] / grid.nodes()[1]
}

/// True once the reconstructed origin density exceeds
/// `blowup_slope_factor` times the uniform density `N m / omega_N`.
pub fn detect_blow_up(
    state: &State,
    grid: &Grid,
    params: &ModelParams,
    config: &SolverConfig,
) -> bool {
    let slope = origin_density(&state.u, grid);
    slope > 0.0 && slope >= config.blowup_slope_factor * params.uniform_density()
}

/// One backward-Euler step of size `dt`. Boundary values are copied from
/// `state`, so the step conserves whatever Dirichlet data it is given.
pub fn step(state: &State, grid: &Grid, config: &SolverConfig, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let op = config.operator()?;
    let mut newton = Newton::new(grid, config);
    let right = state.boundary_level();
    let u = newton.solve(op.as_ref(), &state.u, right, dt)?;
    Ok(State::new(u, state.t + dt))
}

/// Solves the discrete steady problem `RHS(U) = 0` by Newton's method,
/// starting from `guess`.
pub fn solve_discrete_steady(
    guess: &[f64],
    grid: &Grid,
    op: &dyn ReducedOperator,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let scale = guess[guess.len() - 1].abs().max(f64::MIN_POSITIVE);
    let mut u = guess.to_vec();
    let inner = grid.cells() - 1;
    let mut rhs = vec![0.0; inner];
    let mut res = f64::INFINITY;
    for _ in 0..max_iter {
        op.rhs_into(&u, grid, &mut rhs);
        res = sup_norm(&rhs);
        let jac = op.jacobian(&u, grid);
        let neg: Vec<f64> = rhs.iter().map(|v| -v).collect();
        let delta = jac.solve(&neg).ok_or(Error::NewtonFailure {
            residual: res,
            iterations: 0,
        })?;
        for (k, d) in delta.iter().enumerate() {
            u[k + 1] += d;
        }
        if sup_norm(&delta) <= tol * scale {
            return Ok(u);
        }
    }
    Err(Error::NewtonFailure {
        residual: res,
        iterations: max_iter,
    })
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Workspace for the backward-Euler Newton iteration.
struct Newton<'a> {
    grid: &'a Grid,
    tol: f64,
    max_iter: usize,
    rhs: Vec<f64>,
    residual: Vec<f64>,
    trial: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(grid: &'a Grid, config: &SolverConfig) -> Self {
        let inner = grid.cells() - 1;
        Self {
            grid,
            tol: config.newton_tol,
            max_iter: config.newton_max_iter,
            rhs: vec![0.0; inner],
            residual: vec![0.0; inner],
            trial: vec![0.0; grid.len()],
        }
    }

    /// `F(U) = U - U_old - dt RHS(U)` on interior nodes; returns its sup norm.
    fn residual_of(&mut self, op: &dyn ReducedOperator, u: &[f64], old: &[f64], dt: f64) -> f64 {
        op.rhs_into(u, self.grid, &mut self.rhs);
        let mut norm = 0.0f64;
        for k in 0..self.rhs.len() {
            let f = u[k + 1] - old[k + 1] - dt * self.rhs[k];
            self.residual[k] = f;
            norm = norm.max(f.abs());
        }
        if norm.is_finite() {
            norm
        } else {
            f64::INFINITY
        }
    }

    fn solve(
        &mut self,
        op: &dyn ReducedOperator,
        old: &[f64],
        right: f64,
        dt: f64,
    ) -> Result<Vec<f64>> {
        let last = old.len() - 1;
        let scale = right.abs().max(f64::MIN_POSITIVE);
        let target = self.tol * scale;
        let mut u = old.to_vec();
        u[last] = right;
        let mut norm = self.residual_of(op, &u, old, dt);
        for iter in 0..self.max_iter {
            if norm <= target {
                return Ok(u);
            }
            let jac = op.jacobian(&u, self.grid).shifted_identity(dt);
            let neg: Vec<f64> = self.residual.iter().map(|v| -v).collect();
            let delta = jac.solve(&neg).ok_or(Error::NewtonFailure {
                residual: norm,
                iterations: iter,
            })?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..LINE_SEARCH_STEPS {
                self.trial.copy_from_slice(&u);
                for (k, d) in delta.iter().enumerate() {
                    self.trial[k + 1] += alpha * d;
                }
                let trial = std::mem::take(&mut self.trial);
                let trial_norm = self.residual_of(op, &trial, old, dt);
                self.trial = trial;
                if trial_norm < (1.0 - 1e-4 * alpha) * norm {
                    std::mem::swap(&mut u, &mut self.trial);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            let step = alpha * sup_norm(&delta);
            if !accepted {
                // the residual sits at its round-off floor once the update is
                // below tolerance
                if step <= target {
                    return Ok(u);
                }
                return Err(Error::NewtonFailure {
                    residual: norm,
                    iterations: iter + 1,
                });
            }
            if step <= 1e-3 * target {
                return Ok(u);
            }
        }
        if norm <= target {
            return Ok(u);
        }
        Err(Error::NewtonFailure {
            residual: norm,
            iterations: self.max_iter,
        })
    }
}

type BoundaryFn<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

/// Drives one trajectory. By default the right boundary value is held at
/// `m / omega_N`; [`Integrator::with_boundary`] replaces it with a function of
/// time.
pub struct Integrator<'a> {
    grid: &'a Grid,
    params: ModelParams,
    config: SolverConfig,
    boundary: Option<BoundaryFn<'a>>,
}

impl<'a> Integrator<'a> {
    pub fn new(grid: &'a Grid, params: &ModelParams, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            grid,
            params: *params,
            config: config.clone(),
            boundary: None,
        })
    }

    pub fn with_boundary(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        self.boundary = Some(Box::new(f));
        self
    }

    fn right_level(&self, t: f64, current: f64) -> f64 {
        match &self.boundary {
            Some(f) => f(t),
            None => current,
        }
    }

    pub fn run(&self, initial: &State) -> Result<RunRecord> {
        let grid = self.grid;
        let cfg = &self.config;
        if initial.u.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "initial state has {} values, grid has {} nodes",
                initial.u.len(),
                grid.len()
            )));
        }
        let op = cfg.operator()?;
        let diagnostics = Diagnostics::new(grid, &self.params, initial);
        let mut newton = Newton::new(grid, cfg);
        let mut rhs = vec![0.0; grid.cells() - 1];

        let mut state = initial.clone();
        let mut samples = vec![diagnostics.sample(&state)];
        let mut profiles = Vec::new();
        if cfg.record_profiles {
            profiles.push(state.clone());
        }
        let t0 = state.t;
        let t_end = t0 + cfg.t_end;
        let mut sample_index = 1u64;
        let mut next_sample = (t0 + cfg.sample_every).min(t_end);
        let mut dt = cfg.dt_init;
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut min_failures = 0usize;
        let mut slopes: VecDeque<f64> = VecDeque::with_capacity(SLOPE_WINDOW + 1);

        let outcome = loop {
            let remaining = next_sample - state.t;
            let hits_sample = dt >= remaining * (1.0 - 1e-12);
            let h = if hits_sample { remaining } else { dt };
            let t_new = if hits_sample {
                next_sample
            } else {
                state.t + h
            };
            let right = self.right_level(t_new, state.boundary_level());
            let level_scale = right.abs().max(f64::MIN_POSITIVE);

            let attempt = newton.solve(op.as_ref(), &state.u, right, h).and_then(|u| {
                let worst = u.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::min);
                if worst < -MONOTONICITY_RTOL * level_scale {
                    Err(Error::param(
                        "U",
                        format!("monotonicity violated by {worst:e}"),
                    ))
                } else {
                    Ok(u)
                }
            });

            let u_new = match attempt {
                Ok(u) => u,
                Err(err) => {
                    rejected += 1;
                    debug!("t = {:.6e}: rejected dt = {h:.3e}: {err}", state.t);
                    if h <= cfg.dt_min * (1.0 + 1e-12) {
                        min_failures += 1;
                        if min_failures >= MIN_STEP_FAILURES {
                            if slope_rising(&slopes) {
                                break Outcome::BlewUp { t: state.t };
                            }
                            return Err(Error::Stalled { t: state.t });
                        }
                    }
                    dt = (0.5 * h).max(cfg.dt_min);
                    continue;
                }
            };

            accepted += 1;
            min_failures = 0;
            state.u = u_new;
            state.t = t_new;
            if !hits_sample {
                dt = (dt * DT_GROWTH).min(cfg.dt_max);
            }
            slopes.push_back(origin_density(&state.u, grid));
            if slopes.len() > SLOPE_WINDOW {
                slopes.pop_front();
            }

            if detect_blow_up(&state, grid, &self.params, cfg) {
                break Outcome::BlewUp { t: state.t };
            }
            if cfg.stop_on_steady {
                op.rhs_into(&state.u, grid, &mut rhs);
                if sup_norm(&rhs) < STEADY_RTOL * level_scale {
                    break Outcome::ConvergedToSteady { t: state.t };
                }
            }
            if hits_sample {
                samples.push(diagnostics.sample(&state));
                if cfg.record_profiles {
                    profiles.push(state.clone());
                }
                if next_sample >= t_end {
                    break Outcome::ReachedHorizon;
                }
                sample_index += 1;
                next_sample = (t0 + sample_index as f64 * cfg.sample_every).min(t_end);
            }
        };

        if samples.last().is_none_or(|s| s.t < state.t) {
            samples.push(diagnostics.sample(&state));
            if cfg.record_profiles {
                profiles.push(state.clone());
            }
        }
        info!(
            "N = {}, m/m_c = {:.6}: {} at t = {:.6e} ({accepted} steps, {rejected} rejected)",
            self.params.n_dim(),
            self.params.mass_ratio(),
            outcome,
            state.t
        );
        Ok(RunRecord {
            outcome,
            samples,
            profiles,
            final_state: state,
            accepted_steps: accepted,
            rejected_steps: rejected,
        })
    }
}

fn slope_rising(slopes: &VecDeque<f64>) -> bool {
    slopes.len() >= 2
        && slopes
            .iter()
            .zip(slopes.iter().skip(1))
            .all(|(a, b)| b >= a)
        && slopes.back() > slopes.front()
}

/// Integrates from `initial` with the boundary held at `m / omega_N`.
pub fn integrate(
    initial: &State,
    grid: &Grid,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<RunRecord> {
    Integrator::new(grid, params, config)?.run(initial)
}
