//! Trapezoid-type rules on the (graded) solver grid.

use crate::grid::Grid;

/// Composite rule for `int_0^1 xi^alpha f(xi) dxi` with `alpha > -1`: the
/// weight is integrated exactly against the piecewise-linear interpolant of
/// `f`. For `alpha = 0` this is the ordinary composite trapezoid rule, and it
/// stays accurate when `f(0) != 0` and the weight is singular at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRule {
    weights: Vec<f64>,
}

impl WeightedRule {
    pub fn new(grid: &Grid, alpha: f64) -> Self {
        Self::on_nodes(grid.nodes(), alpha)
    }

    pub fn on_nodes(nodes: &[f64], alpha: f64) -> Self {
        assert!(alpha > -1.0, "weight exponent must exceed -1");
        let mut weights = vec![0.0; nodes.len()];
        for (k, w) in nodes.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let h = b - a;
            let (left, right) = if alpha == 0.0 {
                (0.5 * h, 0.5 * h)
            } else {
                let m0 = (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0);
                let m1 = (b.powf(alpha + 2.0) - a.powf(alpha + 2.0)) / (alpha + 2.0);
                ((b * m0 - m1) / h, (m1 - a * m0) / h)
            };
            weights[k] += left;
            weights[k + 1] += right;
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_with(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }
}
