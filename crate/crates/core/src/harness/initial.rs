use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::model::{accumulate_density, ModelParams, SteadyProfile};

use super::config::InitialData;
use super::io::{read_table, TableProfile};

/// Relative slack allowed between a descriptor's boundary value and
/// `m / omega_N`; the boundary node is then set exactly.
const LEVEL_RTOL: f64 = 1e-9;

/// Relative mass mismatch tolerated for tabulated densities, which are
/// rescaled to the configured mass.
const TABLE_MASS_RTOL: f64 = 1e-3;

fn matches_level(value: f64, level: f64) -> bool {
    (value - level).abs() <= LEVEL_RTOL * level.abs()
}

/// Builds `U0` on the grid with `U0(0) = 0` and `U0(1) = m / omega_N`
/// exactly.
pub fn build_initial(init: &InitialData, params: &ModelParams, grid: &Grid) -> Result<State> {
    let level = params.level();
    let mut u: Vec<f64> = match init {
        InitialData::Constant => grid.nodes().iter().map(|&x| level * x).collect(),
        InitialData::Steady { ell } => {
            let ell = ell.unwrap_or(level);
            if !matches_level(ell, level) {
                return Err(Error::InconsistentLevel {
                    steady: ell,
                    boundary: level,
                });
            }
            SteadyProfile::from_level(ell, params.n_dim())?.sample(grid)
        }
        InitialData::ScaledSteady { ell, factor } => {
            let factor = factor.unwrap_or(level / ell);
            if !(factor > 0.0) || !matches_level(factor * ell, level) {
                return Err(Error::InconsistentLevel {
                    steady: factor * ell,
                    boundary: level,
                });
            }
            let phi = SteadyProfile::from_level(*ell, params.n_dim())?;
            grid.nodes()
                .iter()
                .map(|&x| factor * phi.value(x))
                .collect()
        }
        InitialData::Table { file } => from_table(read_table(file)?, params, grid)?,
    };
    u[0] = 0.0;
    let last = u.len() - 1;
    u[last] = level;
    let state = State::new(u, 0.0);
    state.validate(grid, level, 1e-12 * level)?;
    Ok(state)
}

fn from_table(table: TableProfile, params: &ModelParams, grid: &Grid) -> Result<Vec<f64>> {
    let level = params.level();
    match table {
        TableProfile::Accumulated { xi, u } => {
            let boundary = u[u.len() - 1];
            if !matches_level(boundary, level) || xi[0] != 0.0 || xi[xi.len() - 1] != 1.0 {
                return Err(Error::InconsistentLevel {
                    steady: boundary,
                    boundary: level,
                });
            }
            if xi.as_slice() == grid.nodes() {
                return Ok(u);
            }
            Ok(grid
                .nodes()
                .iter()
                .map(|&x| {
                    let j = xi.partition_point(|&v| v <= x).clamp(1, xi.len() - 1);
                    let w = (x - xi[j - 1]) / (xi[j] - xi[j - 1]);
                    (1.0 - w) * u[j - 1] + w * u[j]
                })
                .collect())
        }
        TableProfile::Density(profile) => {
            let acc = accumulate_density(&profile, params.n_dim(), grid)?;
            let total = acc[acc.len() - 1];
            if !(total > 0.0) || ((total - level) / level).abs() > TABLE_MASS_RTOL {
                return Err(Error::Config(format!(
                    "tabulated density carries U(1) = {total}, configured m / omega_N = {level}"
                )));
            }
            let scale = level / total;
            Ok(acc.into_iter().map(|v| v * scale).collect())
        }
    }
}
