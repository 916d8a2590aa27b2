//! Functionals monitored along trajectories: the weighted moment, the two
//! Lyapunov functionals, collapse probes, and cross-run ordering checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::model::{ModelParams, SteadyProfile};
use crate::operator::ReducedOperator;
use crate::quadrature::WeightedRule;

/// Relative tolerance used to decide that `m = m_c` or that a steady level
/// matches the boundary value.
pub const REGIME_RTOL: f64 = 1e-9;

/// Default probe positions for the collapse metric.
pub const DEFAULT_PROBES: [f64; 3] = [0.05, 0.1, 0.3];

/// Column order of `diagnostics.csv`.
pub const CSV_HEADER: [&str; 9] = [
    "t",
    "psi",
    "psi_lower",
    "Psi_ell",
    "Psi_c",
    "R_ell_L1",
    "R_c_L1",
    "origin_slope",
    "steady_dist",
];

/// One row of diagnostics. Functionals that do not apply to the mass regime
/// (`Psi_ell` unless `m < m_c`, `Psi_c` unless `m = m_c`) are `None` and
/// serialize as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    pub psi: f64,
    /// `psi(0)` plus the moment lower bound at `t`.
    pub psi_lower: f64,
    #[serde(rename = "Psi_ell")]
    pub psi_ell: Option<f64>,
    #[serde(rename = "Psi_c")]
    pub psi_c: Option<f64>,
    #[serde(rename = "R_ell_L1")]
    pub r_ell_l1: Option<f64>,
    #[serde(rename = "R_c_L1")]
    pub r_c_l1: Option<f64>,
    /// Reconstructed density at the origin, `N U_1 / xi_1`.
    pub origin_slope: f64,
    pub steady_dist: Option<f64>,
}

impl DiagnosticsSample {
    pub fn is_finite(&self) -> bool {
        let opt = |v: Option<f64>| v.is_none_or(f64::is_finite);
        self.t.is_finite()
            && self.psi.is_finite()
            && self.psi_lower.is_finite()
            && self.origin_slope.is_finite()
            && opt(self.psi_ell)
            && opt(self.psi_c)
            && opt(self.r_ell_l1)
            && opt(self.r_c_l1)
            && opt(self.steady_dist)
    }
}

fn moment_alpha(n_dim: u32) -> f64 {
    2.0 / f64::from(n_dim) - 1.0
}

/// `psi = int_0^1 U xi^{2/N-1} dxi`.
pub fn moment_psi(state: &State, grid: &Grid) -> f64 {
    WeightedRule::new(grid, moment_alpha(grid.n_dim())).integrate(&state.u)
}

/// Linear-in-time lower bound on `psi(t) - psi(0)`.
pub fn moment_lower_bound(t: f64, params: &ModelParams) -> f64 {
    let n = params.n();
    n * n * params.level() * (params.mass_ratio().powf(1.0 / (n - 1.0)) - 1.0) * t
}

/// Supremum of `psi` over admissible states, `N m / (2 omega_N)`.
pub fn moment_ceiling(params: &ModelParams) -> f64 {
    0.5 * params.n() * params.level()
}

fn check_level(u: &[f64], ell: f64) -> Result<()> {
    let boundary = u[u.len() - 1];
    if (boundary - ell).abs() > REGIME_RTOL * ell.abs().max(1.0) {
        return Err(Error::InconsistentLevel {
            steady: ell,
            boundary,
        });
    }
    Ok(())
}

fn check_critical(params: &ModelParams) -> Result<()> {
    if !params.is_critical(REGIME_RTOL) {
        return Err(Error::WrongRegime {
            mass: params.mass(),
            critical: params.critical_mass(),
        });
    }
    Ok(())
}

/// `Psi_l = int_0^1 xi^{2/N-1} (2 - xi) |U - phi_l| dxi`.
pub fn lyapunov_psi_ell(state: &State, steady: &SteadyProfile, grid: &Grid) -> Result<f64> {
    check_level(&state.u, steady.ell())?;
    let rule = WeightedRule::new(grid, moment_alpha(grid.n_dim()));
    let x = grid.nodes();
    Ok(rule.integrate_with(|i| (2.0 - x[i]) * (state.u[i] - steady.value(x[i])).abs()))
}

/// `Psi_c = int_0^1 xi^{2/N-1} (2 - xi) (A - U) dxi`; requires `m = m_c`.
pub fn lyapunov_psi_c(state: &State, grid: &Grid, params: &ModelParams) -> Result<f64> {
    check_critical(params)?;
    Ok(psi_c_unchecked(&state.u, grid, params.amplitude()))
}

fn psi_c_unchecked(u: &[f64], grid: &Grid, amplitude: f64) -> f64 {
    let rule = WeightedRule::new(grid, moment_alpha(grid.n_dim()));
    let x = grid.nodes();
    rule.integrate_with(|i| (2.0 - x[i]) * (amplitude - u[i]))
}

/// Distance of a critical-mass state from total collapse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseMetric {
    pub probes: Vec<f64>,
    /// `A - U(xi_p)` at each probe.
    pub gaps: Vec<f64>,
    /// `int_0^1 (A - U) dxi`.
    pub r_c_l1: f64,
}

pub fn collapse_metric(
    state: &State,
    grid: &Grid,
    params: &ModelParams,
    probes: &[f64],
) -> Result<CollapseMetric> {
    check_critical(params)?;
    let a = params.amplitude();
    let gaps = probes
        .iter()
        .map(|&p| {
            if p >= 1.0 {
                0.0
            } else {
                a - grid.interpolate(&state.u, p)
            }
        })
        .collect();
    let l1 = WeightedRule::new(grid, 0.0).integrate_with(|i| a - state.u[i]);
    Ok(CollapseMetric {
        probes: probes.to_vec(),
        gaps,
        r_c_l1: l1,
    })
}

/// Precomputed evaluator producing [`DiagnosticsSample`]s along one run.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    params: ModelParams,
    moment_rule: WeightedRule,
    plain_rule: WeightedRule,
    nodes: Vec<f64>,
    steady: Option<Vec<f64>>,
    critical: bool,
    psi0: f64,
}

impl Diagnostics {
    pub fn new(grid: &Grid, params: &ModelParams, initial: &State) -> Self {
        let moment_rule = WeightedRule::new(grid, moment_alpha(grid.n_dim()));
        let steady = if params.is_subcritical() {
            params.steady_profile().ok().map(|s| s.sample(grid))
        } else {
            None
        };
        let psi0 = moment_rule.integrate(&initial.u);
        Self {
            params: *params,
            moment_rule,
            plain_rule: WeightedRule::new(grid, 0.0),
            nodes: grid.nodes().to_vec(),
            steady,
            critical: params.is_critical(REGIME_RTOL),
            psi0,
        }
    }

    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn sample(&self, state: &State) -> DiagnosticsSample {
        let u = &state.u;
        let x = &self.nodes;
        let psi = self.moment_rule.integrate(u);
        let (psi_ell, r_ell_l1, steady_dist) = match &self.steady {
            Some(phi) => {
                let psi_ell = self
                    .moment_rule
                    .integrate_with(|i| (2.0 - x[i]) * (u[i] - phi[i]).abs());
                let l1 = self.plain_rule.integrate_with(|i| (u[i] - phi[i]).abs());
                let dist = u
                    .iter()
                    .zip(phi)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                (Some(psi_ell), Some(l1), Some(dist))
            }
            None => (None, None, None),
        };
        let (psi_c, r_c_l1) = if self.critical {
            let a = self.params.amplitude();
            (
                Some(
                    self.moment_rule
                        .integrate_with(|i| (2.0 - x[i]) * (a - u[i])),
                ),
                Some(self.plain_rule.integrate_with(|i| a - u[i])),
            )
        } else {
            (None, None)
        };
        DiagnosticsSample {
            t: state.t,
            psi,
            psi_lower: self.psi0 + moment_lower_bound(state.t, &self.params),
            psi_ell,
            psi_c,
            r_ell_l1,
            r_c_l1,
            origin_slope: self.params.n() * u[1] / x[1],
            steady_dist,
        }
    }
}

/// Weighted L1 norm of the truncation error at the matched steady profile,
/// `int xi^{2/N-1} (2 - xi) |P_h(phi_l)| dxi`, in units of a Lyapunov slope.
/// Zero outside the subcritical regime, where no steady profile exists.
pub fn steady_truncation_error(
    grid: &Grid,
    params: &ModelParams,
    op: &dyn ReducedOperator,
) -> Result<f64> {
    if !params.is_subcritical() {
        return Ok(0.0);
    }
    let phi = params.steady_profile()?.sample(grid);
    let rhs = op.rhs(&phi, grid);
    let x = grid.nodes();
    let last = x.len() - 1;
    Ok(
        WeightedRule::new(grid, moment_alpha(grid.n_dim())).integrate_with(|i| {
            if i == 0 || i == last {
                0.0
            } else {
                (2.0 - x[i]) * rhs[i - 1].abs()
            }
        }),
    )
}

/// Which Lyapunov functional a dissipation check used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    Subcritical,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCheck {
    pub t0: f64,
    pub t1: f64,
    /// Finite-difference slope of the functional over `[t0, t1]`.
    pub slope: f64,
    /// Right-hand side of the dissipation inequality at `t0`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub kind: LyapunovKind,
    pub tolerance: f64,
    pub intervals: Vec<IntervalCheck>,
    /// Largest `slope - bound` over checked intervals.
    pub worst_excess: f64,
    pub passed: bool,
}

/// Checks the sampled Lyapunov functional against its dissipation inequality
/// on every sample interval.
///
/// The regime picks the inequality:
///
/// * `m < m_c`, `N = 2`: `Psi_l' <= -(8 - 2 l) int |R_l|`
/// * `m < m_c`, `N >= 3`: `Psi_l' <= (2 - N) N^2 / (N - 1) int |R_l|`
/// * `m = m_c`, `N = 2`: `Psi_c' <= -Psi_c^2 / 4`
/// * `m = m_c`, `N >= 3`: `Psi_c' <= -(N - 2) N^2 / (N - 1) int R_c`, for `t >= 1`
///
/// `discretization_error` is an estimate, in slope units, of how far the
/// discrete right-hand side can sit from the continuous one; the additive
/// tolerance is `1e-6 + 10 * discretization_error`.
pub fn dissipation_bound_check(
    samples: &[DiagnosticsSample],
    params: &ModelParams,
    discretization_error: f64,
) -> Result<DissipationReport> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    let n = params.n();
    let tolerance = 1e-6 + 10.0 * discretization_error.abs();
    let kind = if params.is_critical(REGIME_RTOL) {
        LyapunovKind::Critical
    } else if params.is_subcritical() {
        LyapunovKind::Subcritical
    } else {
        return Err(Error::WrongRegime {
            mass: params.mass(),
            critical: params.critical_mass(),
        });
    };
    let missing = || Error::Mismatch("sample lacks the Lyapunov functional for this regime".into());

    let mut intervals = Vec::with_capacity(samples.len() - 1);
    for w in samples.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let dt = s1.t - s0.t;
        if !(dt > 0.0) {
            return Err(Error::Mismatch(format!(
                "sample times not increasing at t = {}",
                s0.t
            )));
        }
        let (v0, v1, bound) = match kind {
            LyapunovKind::Subcritical => {
                let v0 = s0.psi_ell.ok_or_else(missing)?;
                let v1 = s1.psi_ell.ok_or_else(missing)?;
                let r = s0.r_ell_l1.ok_or_else(missing)?;
                let coeff = if params.n_dim() == 2 {
                    -(8.0 - 2.0 * params.level())
                } else {
                    (2.0 - n) * n * n / (n - 1.0)
                };
                (v0, v1, coeff * r)
            }
            LyapunovKind::Critical => {
                if params.n_dim() > 2 && s0.t < 1.0 {
                    continue;
                }
                let v0 = s0.psi_c.ok_or_else(missing)?;
                let v1 = s1.psi_c.ok_or_else(missing)?;
                let bound = if params.n_dim() == 2 {
                    -0.25 * v0 * v0
                } else {
                    -(n - 2.0) * n * n / (n - 1.0) * s0.r_c_l1.ok_or_else(missing)?
                };
                (v0, v1, bound)
            }
        };
        let slope = (v1 - v0) / dt;
        intervals.push(IntervalCheck {
            t0: s0.t,
            t1: s1.t,
            slope,
            bound,
            passed: slope <= bound + tolerance,
        });
    }
    let worst_excess = intervals
        .iter()
        .map(|c| c.slope - c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = intervals.iter().all(|c| c.passed);
    Ok(DissipationReport {
        kind,
        tolerance,
        intervals,
        worst_excess,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `min (upper - lower)` over all nodes and samples; nonnegative means
    /// the ordering holds exactly.
    pub worst_gap: f64,
    pub worst_time: f64,
    pub worst_node: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `lower <= upper` nodewise at every sample within
/// `1e-10 * (upper boundary level)`.
pub fn check_comparison(lower: &[State], upper: &[State]) -> Result<ComparisonReport> {
    let scale = upper
        .first()
        .map(|s| s.boundary_level().abs())
        .unwrap_or(0.0);
    check_comparison_with_tol(lower, upper, 1e-10 * scale)
}

pub fn check_comparison_with_tol(
    lower: &[State],
    upper: &[State],
    tolerance: f64,
) -> Result<ComparisonReport> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::Mismatch(format!(
            "trajectories have {} and {} samples",
            lower.len(),
            upper.len()
        )));
    }
    let mut report = ComparisonReport {
        worst_gap: f64::INFINITY,
        worst_time: lower[0].t,
        worst_node: 0,
        tolerance,
        passed: true,
    };
    for (lo, up) in lower.iter().zip(upper) {
        if lo.u.len() != up.u.len() {
            return Err(Error::Mismatch("trajectories on different grids".into()));
        }
        if (lo.t - up.t).abs() > 1e-12 * lo.t.abs().max(1.0) {
            return Err(Error::Mismatch(format!(
                "sample times differ: {} vs {}",
                lo.t, up.t
            )));
        }
        for (i, (a, b)) in lo.u.iter().zip(&up.u).enumerate() {
            let gap = b - a;
            if gap < report.worst_gap {
                report.worst_gap = gap;
                report.worst_time = lo.t;
                report.worst_node = i;
            }
        }
    }
    report.passed = report.worst_gap >= -tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn linear_state(grid: &Grid, level: f64) -> State {
        State::new(grid.nodes().iter().map(|&x| level * x).collect(), 0.0)
    }

    #[test]
    fn moment_of_linear_profiles() {
        let g2 = Grid::new(64, 2.0, 2).unwrap();
        assert_relative_eq!(
            moment_psi(&linear_state(&g2, 1.0), &g2),
            0.5,
            max_relative = 1e-13
        );
        let g3 = Grid::new(64, 2.0, 3).unwrap();
        // int_0^1 xi * xi^{-1/3} dxi = 3/5
        assert_relative_eq!(
            moment_psi(&linear_state(&g3, 1.0), &g3),
            0.6,
            max_relative = 1e-13
        );
        assert_eq!(moment_psi(&State::zeros(&g3), &g3), 0.0);
    }

    #[test]
    fn moment_bound_values() {
        let p = ModelParams::with_mass_ratio(2, 2.0).unwrap();
        assert_relative_eq!(moment_lower_bound(1.0, &p), 32.0, max_relative = 1e-13);
        assert_eq!(moment_lower_bound(0.0, &p), 0.0);
        let pc = ModelParams::with_mass_ratio(3, 1.0).unwrap();
        assert!(moment_lower_bound(5.0, &pc).abs() < 1e-12);
    }

    #[test]
    fn psi_c_closed_forms() {
        let g = Grid::new(128, 2.0, 2).unwrap();
        let p = ModelParams::with_mass_ratio(2, 1.0).unwrap();
        let zero = State::zeros(&g);
        assert_relative_eq!(psi_c_unchecked(&zero.u, &g, 4.0), 6.0, max_relative = 1e-13);
        // U = A xi: int (2 - xi) A (1 - xi) = 5A/6, exact for the rule up to O(h^2)
        let lin = linear_state(&g, 4.0);
        let v = lyapunov_psi_c(&lin, &g, &p).unwrap();
        assert_relative_eq!(v, 10.0 / 3.0, max_relative = 1e-4);
    }

    #[test]
    fn regime_errors() {
        let g = Grid::new(32, 2.0, 2).unwrap();
        let p = ModelParams::with_mass_ratio(2, 0.5).unwrap();
        let s = linear_state(&g, p.level());
        assert!(matches!(
            lyapunov_psi_c(&s, &g, &p),
            Err(Error::WrongRegime { .. })
        ));
        assert!(collapse_metric(&s, &g, &p, &DEFAULT_PROBES).is_err());
        let other = SteadyProfile::from_level(1.0, 2).unwrap();
        assert!(matches!(
            lyapunov_psi_ell(&s, &other, &g),
            Err(Error::InconsistentLevel { .. })
        ));
    }

    #[test]
    fn psi_ell_vanishes_on_steady_profile() {
        for n_dim in 2..5 {
            let g = Grid::new(64, 2.0, n_dim).unwrap();
            let p = ModelParams::with_mass_ratio(n_dim, 0.6).unwrap();
            let steady = p.steady_profile().unwrap();
            let s = State::new(steady.sample(&g), 0.0);
            assert!(lyapunov_psi_ell(&s, &steady, &g).unwrap() < 1e-13);
            let z = linear_state(&g, p.level());
            let v = lyapunov_psi_ell(&z, &steady, &g).unwrap();
            assert!(v > 0.0 && v <= p.n() * p.amplitude());
        }
    }

    #[test]
    fn collapse_probe_at_boundary_is_zero() {
        let g = Grid::new(64, 2.0, 3).unwrap();
        let p = ModelParams::with_mass_ratio(3, 1.0).unwrap();
        let s = linear_state(&g, p.level());
        let c = collapse_metric(&s, &g, &p, &[0.1, 1.0]).unwrap();
        assert_eq!(c.gaps[1], 0.0);
        assert_relative_eq!(c.gaps[0], p.amplitude() * 0.9, max_relative = 1e-12);
    }

    #[test]
    fn comparison_of_identical_runs() {
        let g = Grid::new(32, 2.0, 2).unwrap();
        let traj = vec![
            linear_state(&g, 2.0),
            State::new(linear_state(&g, 2.0).u, 1.0),
        ];
        let rep = check_comparison(&traj, &traj).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.worst_gap, 0.0);
        assert!(check_comparison(&traj, &traj[..1]).is_err());
    }

    #[test]
    fn dissipation_needs_three_samples() {
        let p = ModelParams::with_mass_ratio(2, 0.5).unwrap();
        assert!(matches!(
            dissipation_bound_check(&[], &p, 0.0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn constant_steady_trajectory_passes() {
        let g = Grid::new(64, 2.0, 3).unwrap();
        let p = ModelParams::with_mass_ratio(3, 0.5).unwrap();
        let s0 = State::new(p.steady_profile().unwrap().sample(&g), 0.0);
        let diag = Diagnostics::new(&g, &p, &s0);
        let samples: Vec<_> = (0..5)
            .map(|k| diag.sample(&State::new(s0.u.clone(), k as f64)))
            .collect();
        let rep = dissipation_bound_check(&samples, &p, 0.0).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.intervals.len(), 4);
    }
}
