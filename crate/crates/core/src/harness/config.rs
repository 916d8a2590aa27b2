//! Experiment specifications read from TOML. Every table rejects unknown
//! keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::SolverConfig;
use crate::model::{critical_mass, ModelParams};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Registered experiment name; the CLI subcommand supplies it when absent.
    #[serde(default)]
    pub kind: Option<String>,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    #[serde(default)]
    pub comparison: Option<ComparisonSection>,
    #[serde(default)]
    pub epsilon: Option<EpsilonSection>,
}

/// Dimension and mass. The mass is given either absolutely or as a multiple
/// of `m_c`; sweeps take their masses from `[sweep]` instead.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_dim: u32,
    #[serde(default)]
    pub mass: Option<f64>,
    #[serde(default)]
    pub mass_ratio: Option<f64>,
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n_dim, self.resolve_mass(self.mass, self.mass_ratio)?)
    }

    pub(crate) fn resolve_mass(&self, mass: Option<f64>, ratio: Option<f64>) -> Result<f64> {
        match (mass, ratio) {
            (Some(m), None) => Ok(m),
            (None, Some(r)) => Ok(r * critical_mass(self.n_dim)?),
            (Some(_), Some(_)) => Err(Error::Config(
                "give either `mass` or `mass_ratio`, not both".into(),
            )),
            (None, None) => Err(Error::Config("missing `mass` or `mass_ratio`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub cells: usize,
    pub gamma: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells: 512,
            gamma: 2.0,
        }
    }
}

impl GridSection {
    pub fn build(&self, n_dim: u32) -> Result<Grid> {
        Grid::new(self.cells, self.gamma, n_dim)
    }
}

/// Initial accumulated density.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Uniform density, `U0 = (m / omega_N) xi`.
    #[default]
    Constant,
    /// The steady profile `phi_l`; `ell` defaults to `m / omega_N`.
    Steady {
        #[serde(default)]
        ell: Option<f64>,
    },
    /// `factor * phi_l`; `factor` defaults to `(m / omega_N) / l`.
    ScaledSteady {
        ell: f64,
        #[serde(default)]
        factor: Option<f64>,
    },
    /// A CSV file with columns `xi, U` (used as is) or `r, u` (accumulated).
    Table { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Mass bracket for threshold bisection, absolute or relative to `m_c`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub mass_lo: Option<f64>,
    #[serde(default)]
    pub mass_hi: Option<f64>,
    #[serde(default)]
    pub ratio_lo: Option<f64>,
    #[serde(default)]
    pub ratio_hi: Option<f64>,
    /// Stop once the bracket is narrower than `rtol * m_c`.
    #[serde(default = "default_sweep_rtol")]
    pub rtol: f64,
}

fn default_sweep_rtol() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    SteadyResidual,
    BlowUpTime,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub mode: ConvergenceMode,
    pub cells: Vec<usize>,
}

/// One member of an ordered pair. Unset fields inherit from the top-level
/// model and solver sections.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonMember {
    #[serde(default)]
    pub mass: Option<f64>,
    #[serde(default)]
    pub mass_ratio: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    pub initial: InitialData,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    pub lower: ComparisonMember,
    pub upper: ComparisonMember,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSection {
    pub values: Vec<f64>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a spec; relative table paths are resolved against the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            spec.rebase_tables(base);
        }
        Ok(spec)
    }

    fn rebase_tables(&mut self, base: &Path) {
        let fix = |init: &mut InitialData| {
            if let InitialData::Table { file } = init {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
            }
        };
        fix(&mut self.initial);
        if let Some(c) = &mut self.comparison {
            fix(&mut c.lower.initial);
            fix(&mut c.upper.initial);
        }
    }
}
