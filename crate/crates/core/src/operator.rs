//! Semi-discrete reduced operators.
//!
//! At every interior node the right-hand side is
//!
//! ```text
//! N^2 xi^{2-2/N} D2 U + d(xi, U) D1 U
//! ```
//!
//! and the variants differ only in the drift coefficient `d`:
//!
//! * [`FluxLimited`]: `d = N xi^{1-2/N} max(U, 0)^{1/(N-1)}`
//! * [`Regularized`]: `d = N (eps + xi^{2/N-2} U^2)^{(2-N)/(2N-2)} max(U, 0)`
//!
//! Boundary nodes carry Dirichlet data and are never part of the output.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tridiag::Tridiagonal;

/// Below this value the derivative of `U^{1/(N-1)}` is taken as zero.
pub const DRIFT_DERIVATIVE_FLOOR: f64 = 1e-30;

/// First-difference stencil used for the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftScheme {
    #[default]
    Central,
    Upwind,
}

impl FromStr for DriftScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(Self::Central),
            "upwind" => Ok(Self::Upwind),
            other => Err(Error::Config(format!("unknown drift scheme `{other}`"))),
        }
    }
}

impl fmt::Display for DriftScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Central => "central",
            Self::Upwind => "upwind",
        })
    }
}

/// A spatial discretization of the reduced equation.
pub trait ReducedOperator: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn scheme(&self) -> DriftScheme;

    /// Drift coefficient at interior node `i` and its derivative in `U`.
    fn drift(&self, grid: &Grid, i: usize, u: f64) -> (f64, f64);

    /// Time derivatives at the interior nodes `1..n`.
    fn rhs(&self, u: &[f64], grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.cells() - 1];
        self.rhs_into(u, grid, &mut out);
        out
    }

    fn rhs_into(&self, u: &[f64], grid: &Grid, out: &mut [f64]) {
        let scheme = self.scheme();
        for i in 1..grid.cells() {
            let a = grid.d2_weights(i);
            let b = first_difference(grid, scheme, i);
            // stencil weights sum to zero; differencing first keeps the
            // round-off proportional to the increments rather than to U
            let (dm, dp) = (u[i - 1] - u[i], u[i + 1] - u[i]);
            let d2 = a[0] * dm + a[2] * dp;
            let d1 = b[0] * dm + b[2] * dp;
            let (d, _) = self.drift(grid, i, u[i]);
            out[i - 1] = grid.diffusion_coeff(i) * d2 + d * d1;
        }
    }

    /// Analytic Jacobian of [`ReducedOperator::rhs`] with respect to the
    /// interior values.
    fn jacobian(&self, u: &[f64], grid: &Grid) -> Tridiagonal {
        let scheme = self.scheme();
        let mut jac = Tridiagonal::zeros(grid.cells() - 1);
        for i in 1..grid.cells() {
            let a = grid.d2_weights(i);
            let b = first_difference(grid, scheme, i);
            let c2 = grid.diffusion_coeff(i);
            let d1 = b[0] * u[i - 1] + b[1] * u[i] + b[2] * u[i + 1];
            let (d, dd) = self.drift(grid, i, u[i]);
            let row = i - 1;
            jac.lower[row] = c2 * a[0] + d * b[0];
            jac.diag[row] = c2 * a[1] + d * b[1] + dd * d1;
            jac.upper[row] = c2 * a[2] + d * b[2];
        }
        jac
    }
}

#[inline]
fn first_difference(grid: &Grid, scheme: DriftScheme, i: usize) -> [f64; 3] {
    match scheme {
        DriftScheme::Central => grid.d1_weights(i),
        DriftScheme::Upwind => grid.upwind_weights(i),
    }
}

/// The unregularized flux-limited operator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FluxLimited {
    pub scheme: DriftScheme,
}

impl ReducedOperator for FluxLimited {
    fn name(&self) -> &'static str {
        "flux-limited"
    }

    fn scheme(&self) -> DriftScheme {
        self.scheme
    }

    #[inline]
    fn drift(&self, grid: &Grid, i: usize, u: f64) -> (f64, f64) {
        let c1 = grid.drift_coeff(i);
        let q = 1.0 / f64::from(grid.n_dim() - 1);
        let up = u.max(0.0);
        let g = if q == 1.0 { up } else { up.powf(q) };
        let dg = if up <= DRIFT_DERIVATIVE_FLOOR {
            0.0
        } else if q == 1.0 {
            1.0
        } else {
            q * up.powf(q - 1.0)
        };
        (c1 * g, c1 * dg)
    }
}

/// The operator with drift coefficient smoothed by `eps > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularized {
    eps: f64,
    pub scheme: DriftScheme,
}

impl Regularized {
    pub fn new(eps: f64, scheme: DriftScheme) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param(
                "eps",
                format!("regularization must be positive, got {eps}"),
            ));
        }
        Ok(Self { eps, scheme })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl ReducedOperator for Regularized {
    fn name(&self) -> &'static str {
        "regularized"
    }

    fn scheme(&self) -> DriftScheme {
        self.scheme
    }

    #[inline]
    fn drift(&self, grid: &Grid, i: usize, u: f64) -> (f64, f64) {
        let n = f64::from(grid.n_dim());
        let p = (2.0 - n) / (2.0 * n - 2.0);
        let w = grid.regularization_weight(i);
        let up = u.max(0.0);
        let base = self.eps + w * up * up;
        if p == 0.0 {
            return (n * up, if u > 0.0 { n } else { 0.0 });
        }
        let pw = base.powf(p);
        let d = n * pw * up;
        let dd = if u > 0.0 {
            n * (pw + up * p * pw / base * 2.0 * w * up)
        } else {
            0.0
        };
        (d, dd)
    }
}

/// Builds the operator for a regularization parameter (`0` selects the
/// unregularized one).
pub fn operator_for(eps: f64, scheme: DriftScheme) -> Result<Box<dyn ReducedOperator>> {
    if eps == 0.0 {
        Ok(Box::new(FluxLimited { scheme }))
    } else {
        Ok(Box::new(Regularized::new(eps, scheme)?))
    }
}

/// Right-hand side of the unregularized equation with central drift.
pub fn apply_p_rhs(u: &[f64], grid: &Grid) -> Vec<f64> {
    FluxLimited::default().rhs(u, grid)
}

/// Right-hand side of the regularized equation with central drift.
pub fn apply_regularized_rhs(u: &[f64], grid: &Grid, eps: f64) -> Result<Vec<f64>> {
    Ok(Regularized::new(eps, DriftScheme::Central)?.rhs(u, grid))
}

/// Jacobian of [`apply_p_rhs`].
pub fn jacobian_p(u: &[f64], grid: &Grid) -> Tridiagonal {
    FluxLimited::default().jacobian(u, grid)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::model::SteadyProfile;

    #[test]
    fn linear_profile_n2() {
        let grid = Grid::new(16, 1.0, 2).unwrap();
        let u: Vec<f64> = grid.nodes().to_vec();
        let rhs = apply_p_rhs(&u, &grid);
        // U_xixi = 0, so RHS = 2 U U_xi = 2 xi
        for (i, r) in rhs.iter().enumerate() {
            assert_relative_eq!(*r, 2.0 * grid.nodes()[i + 1], max_relative = 1e-12);
        }
        assert_relative_eq!(rhs[7], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_state_is_stationary() {
        for n_dim in 2..5 {
            let grid = Grid::new(32, 2.0, n_dim).unwrap();
            let zero = vec![0.0; grid.len()];
            assert!(apply_p_rhs(&zero, &grid).iter().all(|&v| v == 0.0));
            assert!(apply_regularized_rhs(&zero, &grid, 0.1)
                .unwrap()
                .iter()
                .all(|&v| v == 0.0));
        }
    }

    #[test]
    fn regularization_is_identity_in_two_dimensions() {
        let grid = Grid::new(64, 2.0, 2).unwrap();
        let u = SteadyProfile::from_level(2.5, 2).unwrap().sample(&grid);
        let plain = apply_p_rhs(&u, &grid);
        for &eps in &[1e-6, 0.1, 10.0, 1e3] {
            let reg = apply_regularized_rhs(&u, &grid, eps).unwrap();
            for (a, b) in plain.iter().zip(&reg) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn regularized_limit_matches_plain() {
        let grid = Grid::new(64, 2.0, 3).unwrap();
        let u = SteadyProfile::from_level(8.0, 3).unwrap().sample(&grid);
        // eps far below xi^{2/N-2} U^2 at every interior node
        let floor = (1..grid.cells())
            .map(|i| grid.regularization_weight(i) * u[i] * u[i])
            .fold(f64::INFINITY, f64::min);
        let eps = 1e-12 * floor;
        let plain = FluxLimited::default();
        let reg = Regularized::new(eps, DriftScheme::Central).unwrap();
        for i in 1..grid.cells() {
            let (a, _) = plain.drift(&grid, i, u[i]);
            let (b, _) = reg.drift(&grid, i, u[i]);
            assert!((a - b).abs() <= 1e-8 * a, "node {i}: {a} vs {b}");
        }
    }

    #[test]
    fn regularized_drift_is_smaller() {
        let grid = Grid::new(64, 2.0, 4).unwrap();
        let plain = FluxLimited::default();
        let reg = Regularized::new(1e-2, DriftScheme::Central).unwrap();
        for i in 1..grid.cells() {
            for &u in &[1e-6, 0.1, 1.0, 30.0] {
                assert!(reg.drift(&grid, i, u).0 <= plain.drift(&grid, i, u).0 * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let grid = Grid::new(16, 2.0, 3).unwrap();
        let u = vec![0.0; grid.len()];
        assert!(apply_regularized_rhs(&u, &grid, 0.0).is_err());
        assert!(apply_regularized_rhs(&u, &grid, -1.0).is_err());
        assert!(operator_for(0.0, DriftScheme::Central).unwrap().name() == "flux-limited");
    }

    #[test]
    fn zero_state_jacobian_is_diffusion_stencil() {
        let grid = Grid::new(32, 2.0, 3).unwrap();
        let jac = jacobian_p(&vec![0.0; grid.len()], &grid);
        for i in 1..grid.cells() {
            let a = grid.d2_weights(i);
            let c2 = grid.diffusion_coeff(i);
            assert_eq!(jac.lower[i - 1], c2 * a[0]);
            assert_eq!(jac.diag[i - 1], c2 * a[1]);
            assert_eq!(jac.upper[i - 1], c2 * a[2]);
        }
    }

    #[test]
    fn constant_state_jacobian_n2() {
        let grid = Grid::new(32, 2.0, 2).unwrap();
        let c = 1.3;
        let mut u = vec![c; grid.len()];
        u[0] = 0.0;
        let jac = jacobian_p(&u, &grid);
        // interior nodes away from the boundary: D1 U = 0, so the drift only
        // contributes c1 U times the D1 weights
        for i in 2..grid.cells() - 1 {
            let a = grid.d2_weights(i);
            let b = grid.d1_weights(i);
            let c2 = grid.diffusion_coeff(i);
            let c1 = grid.drift_coeff(i);
            assert_relative_eq!(
                jac.lower[i - 1],
                c2 * a[0] + c1 * c * b[0],
                max_relative = 1e-13
            );
            assert_relative_eq!(
                jac.diag[i - 1],
                c2 * a[1] + c1 * c * b[1],
                max_relative = 1e-13
            );
            assert_relative_eq!(
                jac.upper[i - 1],
                c2 * a[2] + c1 * c * b[2],
                max_relative = 1e-13
            );
        }
    }
}
