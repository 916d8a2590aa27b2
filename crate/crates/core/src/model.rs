//! Closed-form model quantities.
//!
//! Everything here is a pure function of the dimension `N`, the total mass
//! `m` and, for the steady family, a dilation parameter `lambda`. The
//! accumulated density is
//!
//! ```text
//! U(xi, t) = int_0^{xi^{1/N}} u(r, t) r^{N-1} dr,    xi in [0, 1],
//! ```
//!
//! so `U(1) = m / omega_N` and the stationary profiles `W_lambda` saturate at
//! the amplitude `A = (N^2 / (N - 1))^(N - 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Measure of the unit sphere `S^{N-1}`, `2 pi^{N/2} / Gamma(N/2)`.
///
/// Evaluated through the recurrence `omega_{N+2} = 2 pi omega_N / N` seeded
/// with `omega_1 = 2` and `omega_2 = 2 pi`.
pub fn unit_sphere_measure(n_dim: u32) -> f64 {
    let (mut k, mut omega) = if n_dim.is_multiple_of(2) {
        (2, 2.0 * PI)
    } else {
        (1, 2.0)
    };
    while k < n_dim {
        omega *= 2.0 * PI / f64::from(k);
        k += 2;
    }
    omega
}

fn check_dim(n_dim: u32) -> Result<()> {
    if n_dim < 2 {
        return Err(Error::InvalidDimension(n_dim));
    }
    Ok(())
}

/// Saturation level `A = (N^2 / (N - 1))^(N - 1)` of the steady family.
pub fn amplitude_a(n_dim: u32) -> Result<f64> {
    check_dim(n_dim)?;
    let n = f64::from(n_dim);
    Ok((n * n / (n - 1.0)).powi(n_dim as i32 - 1))
}

/// Mass threshold `m_c = omega_N A`.
pub fn critical_mass(n_dim: u32) -> Result<f64> {
    Ok(unit_sphere_measure(n_dim) * amplitude_a(n_dim)?)
}

/// Model constants for one dimension and total mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n_dim: u32,
    mass: f64,
    omega: f64,
    amplitude: f64,
    critical: f64,
}

impl ModelParams {
    pub fn new(n_dim: u32, mass: f64) -> Result<Self> {
        check_dim(n_dim)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param(
                "m",
                format!("total mass must be positive, got {mass}"),
            ));
        }
        let omega = unit_sphere_measure(n_dim);
        let amplitude = amplitude_a(n_dim)?;
        Ok(Self {
            n_dim,
            mass,
            omega,
            amplitude,
            critical: omega * amplitude,
        })
    }

    /// Parameters at `factor * m_c`.
    pub fn with_mass_ratio(n_dim: u32, factor: f64) -> Result<Self> {
        Self::new(n_dim, factor * critical_mass(n_dim)?)
    }

    pub fn n_dim(&self) -> u32 {
        self.n_dim
    }

    /// `N` as a float, for formulas.
    pub fn n(&self) -> f64 {
        f64::from(self.n_dim)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn critical_mass(&self) -> f64 {
        self.critical
    }

    /// Dirichlet value `U(1) = m / omega_N`.
    pub fn level(&self) -> f64 {
        self.mass / self.omega
    }

    /// Density of the spatially uniform profile with this mass, `N m / omega_N`.
    pub fn uniform_density(&self) -> f64 {
        self.n() * self.level()
    }

    pub fn mass_ratio(&self) -> f64 {
        self.mass / self.critical
    }

    pub fn is_subcritical(&self) -> bool {
        self.mass < self.critical
    }

    pub fn is_critical(&self, rtol: f64) -> bool {
        ((self.mass - self.critical) / self.critical).abs() <= rtol
    }

    pub fn blow_up_time_bound(&self) -> Result<f64> {
        blow_up_time_bound(self.mass, self.n_dim)
    }

    /// The matched steady profile `phi_l` with `l = m / omega_N`.
    pub fn steady_profile(&self) -> Result<SteadyProfile> {
        SteadyProfile::from_level(self.level(), self.n_dim)
    }
}

/// `W_0(xi) = A xi (1 + xi^{1/(N-1)})^{1-N}`.
pub fn w0(xi: f64, n_dim: u32) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::param("xi", format!("must be nonnegative, got {xi}")));
    }
    Ok(w0_unchecked(xi, n_dim, amplitude_a(n_dim)?))
}

// A (s / (1 + s))^{N-1} with s = xi^{1/(N-1)}; same value, no overflow for large xi.
#[inline]
pub(crate) fn w0_unchecked(xi: f64, n_dim: u32, amplitude: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let s = xi.powf(1.0 / f64::from(n_dim - 1));
    if s.is_infinite() {
        return amplitude;
    }
    amplitude * (s / (1.0 + s)).powi(n_dim as i32 - 1)
}

/// Dilated steady profile `W_lambda(xi) = W_0(lambda^N xi)`.
pub fn w_lambda(xi: f64, lambda: f64, n_dim: u32) -> Result<f64> {
    check_lambda(lambda)?;
    w0(lambda.powi(n_dim as i32) * xi, n_dim)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    Ok(())
}

/// Stationary cell density `X_lambda(r) = N A lambda^N / (1 + (lambda r)^{N/(N-1)})^N`.
pub fn x_lambda(r: f64, lambda: f64, n_dim: u32) -> Result<f64> {
    check_lambda(lambda)?;
    if !(r >= 0.0) {
        return Err(Error::param(
            "r",
            format!("radius must be nonnegative, got {r}"),
        ));
    }
    let n = f64::from(n_dim);
    let a = amplitude_a(n_dim)?;
    let lr = (lambda * r).powf(n / (n - 1.0));
    Ok(n * a * lambda.powi(n_dim as i32) / (1.0 + lr).powi(n_dim as i32))
}

/// The unique `lambda > 0` with `W_0(lambda^N) = level`, by bisection.
pub fn lambda_from_level(level: f64, n_dim: u32) -> Result<f64> {
    let a = amplitude_a(n_dim)?;
    if !(level > 0.0 && level < a) {
        return Err(Error::LevelOutOfRange {
            level,
            amplitude: a,
        });
    }
    let tol = 1e-14 * level;
    let g = |lambda: f64| w0_unchecked(lambda.powi(n_dim as i32), n_dim, a) - level;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        if g(hi).abs() <= tol {
            return Ok(hi);
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::LevelOutOfRange {
                level,
                amplitude: a,
            });
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let r = g(mid);
        if r.abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Upper bound on the existence time for supercritical mass.
pub fn blow_up_time_bound(mass: f64, n_dim: u32) -> Result<f64> {
    let mc = critical_mass(n_dim)?;
    if !(mass > mc) {
        return Err(Error::UndefinedBound { mass, critical: mc });
    }
    let n = f64::from(n_dim);
    Ok(1.0 / (2.0 * n) / ((mass / mc).powf(1.0 / (n - 1.0)) - 1.0))
}

/// A stationary accumulated density `phi_l = W_lambda` on `[0, 1]`, identified
/// by its boundary level `l = phi_l(1)` and the matching dilation `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyProfile {
    ell: f64,
    lambda: f64,
    n_dim: u32,
    amplitude: f64,
}

impl SteadyProfile {
    pub fn from_level(ell: f64, n_dim: u32) -> Result<Self> {
        let lambda = lambda_from_level(ell, n_dim)?;
        Ok(Self {
            ell,
            lambda,
            n_dim,
            amplitude: amplitude_a(n_dim)?,
        })
    }

    pub fn from_lambda(lambda: f64, n_dim: u32) -> Result<Self> {
        let ell = w_lambda(1.0, lambda, n_dim)?;
        Ok(Self {
            ell,
            lambda,
            n_dim,
            amplitude: amplitude_a(n_dim)?,
        })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_dim(&self) -> u32 {
        self.n_dim
    }

    /// `phi_l(xi)`; `xi` must be nonnegative.
    pub fn value(&self, xi: f64) -> f64 {
        w0_unchecked(
            self.lambda.powi(self.n_dim as i32) * xi,
            self.n_dim,
            self.amplitude,
        )
    }

    /// Profile sampled on the grid nodes.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().iter().map(|&xi| self.value(xi)).collect()
    }

    /// Cell density `X_lambda` at radius `r`.
    pub fn density(&self, r: f64) -> f64 {
        let n = f64::from(self.n_dim);
        let lr = (self.lambda * r).powf(n / (n - 1.0));
        n * self.amplitude * self.lambda.powi(self.n_dim as i32)
            / (1.0 + lr).powi(self.n_dim as i32)
    }
}

/// Samples of a radial function on increasing radii in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::Mismatch(format!(
                "{} radii vs {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.len() < 2 {
            return Err(Error::param("profile", "need at least two samples"));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("profile", "radii must be strictly increasing"));
        }
        Ok(Self { radii, values })
    }

    pub fn from_fn(radii: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Piecewise-linear interpolation, constant extrapolation.
    pub fn eval(&self, r: f64) -> f64 {
        let rs = &self.radii;
        if r <= rs[0] {
            return self.values[0];
        }
        if r >= rs[rs.len() - 1] {
            return self.values[rs.len() - 1];
        }
        let j = rs.partition_point(|&x| x <= r);
        let (r0, r1) = (rs[j - 1], rs[j]);
        let w = (r - r0) / (r1 - r0);
        (1.0 - w) * self.values[j - 1] + w * self.values[j]
    }
}

/// Accumulated density of a radial cell density, by the composite trapezoid
/// rule for `u(r) r^{N-1}` on the radii `xi_i^{1/N}` induced by the grid.
pub fn accumulate_density(u0: &RadialProfile, n_dim: u32, grid: &Grid) -> Result<Vec<f64>> {
    check_dim(n_dim)?;
    if let Some((r, v)) = u0
        .radii
        .iter()
        .zip(&u0.values)
        .find(|(_, &v)| v < 0.0 || v.is_nan())
    {
        return Err(Error::NegativeDensity {
            radius: *r,
            value: *v,
        });
    }
    let radii = grid.radii();
    let integrand: Vec<f64> = radii
        .iter()
        .map(|&r| u0.eval(r) * r.powi(n_dim as i32 - 1))
        .collect();
    let mut acc = Vec::with_capacity(radii.len());
    acc.push(0.0);
    let mut total = 0.0;
    for i in 1..radii.len() {
        total += 0.5 * (integrand[i] + integrand[i - 1]) * (radii[i] - radii[i - 1]);
        acc.push(total);
    }
    Ok(acc)
}

/// Cell density `u(r) = N U_xi(r^N)` reconstructed from nodal `U` values.
///
/// Interior slopes use the three-point nonuniform central difference, the end
/// nodes second-order one-sided differences. Negative slopes from round-off
/// are clamped to zero.
pub fn density_from_u(u: &[f64], grid: &Grid, n_dim: u32) -> Result<RadialProfile> {
    check_len(u, grid)?;
    let n = f64::from(n_dim);
    let xi = grid.nodes();
    let last = xi.len() - 1;
    let mut dens = Vec::with_capacity(xi.len());
    for i in 0..=last {
        let slope = if i == 0 {
            one_sided_slope(xi[0], xi[1], xi[2], u[0], u[1], u[2])
        } else if i == last {
            one_sided_slope(
                xi[last],
                xi[last - 1],
                xi[last - 2],
                u[last],
                u[last - 1],
                u[last - 2],
            )
        } else {
            let hm = xi[i] - xi[i - 1];
            let hp = xi[i + 1] - xi[i];
            (hm * hm * u[i + 1] - hp * hp * u[i - 1] + (hp * hp - hm * hm) * u[i])
                / (hm * hp * (hm + hp))
        };
        dens.push(n * slope.max(0.0));
    }
    RadialProfile::new(grid.radii(), dens)
}

// Derivative at x0 of the parabola through (x0,f0), (x1,f1), (x2,f2).
fn one_sided_slope(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let d1 = x1 - x0;
    let d2 = x2 - x0;
    (f1 * d2 * d2 - f2 * d1 * d1 - f0 * (d2 * d2 - d1 * d1)) / (d1 * d2 * (d2 - d1))
}

/// Signal gradient `-v_r(rho) = rho^{1-N} U(rho^N)` on the radii induced by
/// the grid; the value at the origin is the limit 0.
pub fn signal_gradient_from_u(u: &[f64], grid: &Grid, n_dim: u32) -> Result<RadialProfile> {
    check_len(u, grid)?;
    let radii = grid.radii();
    let values = radii
        .iter()
        .zip(u)
        .map(|(&rho, &uu)| {
            if rho == 0.0 {
                0.0
            } else {
                uu * rho.powi(1 - n_dim as i32)
            }
        })
        .collect();
    RadialProfile::new(radii, values)
}

fn check_len(u: &[f64], grid: &Grid) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::Mismatch(format!(
            "{} values for a grid of {} nodes",
            u.len(),
            grid.len()
        )));
    }
    Ok(())
}
