/// Tridiagonal matrix stored by diagonals. Row `i` holds
/// `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`; `lower[0]` and
/// `upper[len-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(len: usize) -> Self {
        Self {
            lower: vec![0.0; len],
            diag: vec![0.0; len],
            upper: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `I - s * self`.
    pub fn shifted_identity(&self, s: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| -s * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 - s * v).collect(),
            upper: self.upper.iter().map(|v| -s * v).collect(),
        }
    }

    /// Thomas algorithm without pivoting. Returns `None` on a zero or
    /// non-finite pivot.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Some(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            c[i] = if i + 1 < n {
                self.upper[i] / pivot
            } else {
                0.0
            };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        if d.iter().all(|v| v.is_finite()) {
            Some(d)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn solve_inverts_diagonally_dominant(
            rows in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40)
        ) {
            let n = rows.len();
            let mut m = Tridiagonal::zeros(n);
            let mut x = Vec::with_capacity(n);
            for (i, &(a, b, c)) in rows.iter().enumerate() {
                m.lower[i] = a;
                m.upper[i] = b;
                m.diag[i] = 2.5 + c;
                x.push(c * 3.0 - a);
            }
            let y = m.mul_vec(&x);
            let back = m.solve(&y).unwrap();
            for (p, q) in back.iter().zip(&x) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_pivot_detected() {
        let m = Tridiagonal::zeros(3);
        assert!(m.solve(&[1.0, 2.0, 3.0]).is_none());
    }
}
