use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

/// Graded mesh `xi_i = (i / n)^gamma` on `[0, 1]` with the coefficients of the
/// reduced operator and the nonuniform three-point stencils precomputed at
/// interior nodes. Nothing is ever evaluated at `xi = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    gamma: f64,
    n_dim: u32,
    // interior node i is stored at index i - 1
    diffusion: Vec<f64>,
    drift: Vec<f64>,
    d2: Vec<[f64; 3]>,
    d1: Vec<[f64; 3]>,
    upwind: Vec<[f64; 3]>,
    reg_weight: Vec<f64>,
}

impl Grid {
    pub fn new(cells: usize, gamma: f64, n_dim: u32) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::param(
                "n",
                format!("need at least {MIN_CELLS} cells, got {cells}"),
            ));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::param(
                "gamma",
                format!("grading must be >= 1, got {gamma}"),
            ));
        }
        if n_dim < 2 {
            return Err(Error::InvalidDimension(n_dim));
        }
        let nodes = graded_nodes(cells, gamma);
        let n = f64::from(n_dim);
        let interior = &nodes[1..cells];

        let diffusion = interior
            .iter()
            .map(|&x| n * n * x.powf(2.0 - 2.0 / n))
            .collect();
        let drift = interior
            .iter()
            .map(|&x| n * x.powf(1.0 - 2.0 / n))
            .collect();
        let reg_weight = interior.iter().map(|&x| x.powf(2.0 / n - 2.0)).collect();

        let mut d2 = Vec::with_capacity(cells - 1);
        let mut d1 = Vec::with_capacity(cells - 1);
        let mut upwind = Vec::with_capacity(cells - 1);
        for i in 1..cells {
            let hm = nodes[i] - nodes[i - 1];
            let hp = nodes[i + 1] - nodes[i];
            let s = hm + hp;
            d2.push([2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)]);
            d1.push([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)]);
            upwind.push([0.0, -1.0 / hp, 1.0 / hp]);
        }

        Ok(Self {
            nodes,
            gamma,
            n_dim,
            diffusion,
            drift,
            d2,
            d1,
            upwind,
            reg_weight,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells `n`.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_dim(&self) -> u32 {
        self.n_dim
    }

    /// Radii `xi_i^{1/N}` matching the nodes.
    pub fn radii(&self) -> Vec<f64> {
        let inv = 1.0 / f64::from(self.n_dim);
        self.nodes.iter().map(|&x| x.powf(inv)).collect()
    }

    /// Largest cell width.
    pub fn max_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// `N^2 xi_i^{2-2/N}` at interior node `i` (1-based).
    #[inline]
    pub fn diffusion_coeff(&self, i: usize) -> f64 {
        self.diffusion[i - 1]
    }

    /// `N xi_i^{1-2/N}` at interior node `i`.
    #[inline]
    pub fn drift_coeff(&self, i: usize) -> f64 {
        self.drift[i - 1]
    }

    /// `xi_i^{2/N-2}`, the weight inside the regularized drift.
    #[inline]
    pub fn regularization_weight(&self, i: usize) -> f64 {
        self.reg_weight[i - 1]
    }

    /// Second-difference weights on `(i-1, i, i+1)`.
    #[inline]
    pub fn d2_weights(&self, i: usize) -> [f64; 3] {
        self.d2[i - 1]
    }

    /// Central first-difference weights on `(i-1, i, i+1)`.
    #[inline]
    pub fn d1_weights(&self, i: usize) -> [f64; 3] {
        self.d1[i - 1]
    }

    /// Forward (upwind for nonnegative drift) first-difference weights.
    #[inline]
    pub fn upwind_weights(&self, i: usize) -> [f64; 3] {
        self.upwind[i - 1]
    }

    /// Linear interpolation of nodal values at `xi`.
    pub fn interpolate(&self, values: &[f64], xi: f64) -> f64 {
        let x = &self.nodes;
        if xi <= 0.0 {
            return values[0];
        }
        if xi >= 1.0 {
            return values[x.len() - 1];
        }
        let j = x.partition_point(|&v| v <= xi);
        let w = (xi - x[j - 1]) / (x[j] - x[j - 1]);
        (1.0 - w) * values[j - 1] + w * values[j]
    }
}

/// `(i / n)^gamma` for `i = 0..=n`, endpoints exact.
pub fn graded_nodes(cells: usize, gamma: f64) -> Vec<f64> {
    (0..=cells)
        .map(|i| {
            if i == cells {
                1.0
            } else {
                (i as f64 / cells as f64).powf(gamma)
            }
        })
        .collect()
}

/// Accumulated density at grid nodes and the current time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(u: Vec<f64>, t: f64) -> Self {
        Self { u, t }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::new(vec![0.0; grid.len()], 0.0)
    }

    pub fn boundary_level(&self) -> f64 {
        self.u[self.u.len() - 1]
    }

    /// Most negative increment `U_{i+1} - U_i` (zero if nondecreasing).
    pub fn worst_decrease(&self) -> f64 {
        self.u.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::min)
    }

    /// Checks the Dirichlet data and monotonicity within `tol`.
    pub fn validate(&self, grid: &Grid, level: f64, tol: f64) -> Result<()> {
        if self.u.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "state has {} values, grid has {} nodes",
                self.u.len(),
                grid.len()
            )));
        }
        if self.u[0] != 0.0 || self.boundary_level() != level {
            return Err(Error::param(
                "U",
                format!(
                    "boundary values ({}, {}) differ from (0, {level})",
                    self.u[0],
                    self.boundary_level()
                ),
            ));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("U", "non-finite value"));
        }
        if self.worst_decrease() < -tol {
            return Err(Error::param("U", "profile is not nondecreasing"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_formula() {
        assert_eq!(graded_nodes(4, 1.0), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(
            graded_nodes(4, 2.0),
            vec![0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]
        );
        let g = Grid::new(16, 1.0, 2).unwrap();
        assert_eq!(g.nodes()[4], 0.25);
        assert_eq!(g.nodes()[8], 0.5);
        assert_eq!(g.nodes()[12], 0.75);
    }

    #[test]
    fn endpoints_exact() {
        for &gamma in &[1.0, 1.5, 2.0, 3.7] {
            let g = Grid::new(37, gamma, 3).unwrap();
            assert_eq!(g.nodes()[0], 0.0);
            assert_eq!(*g.nodes().last().unwrap(), 1.0);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid::new(15, 2.0, 2).is_err());
        assert!(Grid::new(64, 0.9, 2).is_err());
        assert!(Grid::new(64, 2.0, 1).is_err());
    }

    #[test]
    fn coefficients_positive_and_finite() {
        for n_dim in 2..6 {
            let g = Grid::new(64, 2.0, n_dim).unwrap();
            for i in 1..g.cells() {
                assert!(g.diffusion_coeff(i) > 0.0 && g.diffusion_coeff(i).is_finite());
                assert!(g.drift_coeff(i) > 0.0 && g.drift_coeff(i).is_finite());
                assert!(g.regularization_weight(i).is_finite());
            }
        }
    }

    #[test]
    fn second_difference_exact_on_quadratics() {
        let g = Grid::new(50, 2.3, 3).unwrap();
        let x = g.nodes();
        for i in 1..g.cells() {
            let w = g.d2_weights(i);
            let d2 = w[0] * x[i - 1].powi(2) + w[1] * x[i].powi(2) + w[2] * x[i + 1].powi(2);
            assert!((d2 - 2.0).abs() < 1e-9, "node {i}: {d2}");
            let v = g.d1_weights(i);
            let d1 = v[0] * x[i - 1].powi(2) + v[1] * x[i].powi(2) + v[2] * x[i + 1].powi(2);
            assert!((d1 - 2.0 * x[i]).abs() < 1e-9, "node {i}: {d1}");
        }
    }
}
