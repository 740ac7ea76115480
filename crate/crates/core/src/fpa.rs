//! Fixed-point iteration `v ← -1/(z - γ I1(v))` for the Silverstein equation
//! at a single point of the upper half-plane.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_gamma, PopulationSpectrum, StieltjesSample};
use crate::silverstein::h_integral_1;

/// Iteration cap used when the iteration serves as a solver.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

const DIVERGENCE_BOUND: f64 = 1e12;
const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpaResult {
    pub sample: StieltjesSample,
    pub iterations: usize,
    pub converged: bool,
    /// Imaginary offset added to a real input before iterating.
    pub lift: f64,
}

impl FpaResult {
    pub fn density(&self) -> f64 {
        self.sample.density()
    }

    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.sample.residual })
        }
    }
}

/// Runs the fixed-point iteration from `v₀ = -1/z` until the Silverstein
/// residual drops to `eta` or `max_iter` updates have been made.
///
/// A real `z` is moved to `z + i eta²`.
///
/// ```
/// use num_complex::Complex64;
/// use spectrode::{fpa::fpa_solve, PopulationSpectrum};
/// let r = fpa_solve(&PopulationSpectrum::identity(), 1e-12, Complex64::new(1.0, 1.0), 1e-6, 10).unwrap();
/// assert!(r.converged && r.iterations <= 2);
/// ```
pub fn fpa_solve(psd: &PopulationSpectrum, gamma: f64, z: Complex64, eta: f64, max_iter: usize) -> Result<FpaResult> {
    check_gamma(gamma)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) || z.im < 0.0 {
        return Err(Error::InvalidArgument(format!("z must lie in the closed upper half-plane, got {z}")));
    }
    let (z, lift) = if z.im == 0.0 { (Complex64::new(z.re, eta * eta), eta * eta) } else { (z, 0.0) };
    let mut v = -1.0 / z;
    let mut iterations = 0;
    loop {
        let h = z - gamma * h_integral_1(psd, v)?;
        let residual = (1.0 / v + h).norm();
        let stop = residual <= eta;
        if stop || iterations >= max_iter || v.norm() > DIVERGENCE_BOUND || !residual.is_finite() {
            return Ok(FpaResult {
                sample: StieltjesSample::new(gamma, z, v, residual),
                iterations,
                converged: stop,
                lift,
            });
        }
        v = -1.0 / h;
        debug_assert!(v.im > 0.0, "iterate left the upper half-plane");
        iterations += 1;
    }
}

/// Density reading of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpaPoint {
    pub x: f64,
    pub density: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Independent fixed-point solves at `x_j + i eta²` for every grid point.
pub fn fpa_density_grid(
    psd: &PopulationSpectrum,
    gamma: f64,
    grid: &[f64],
    eta: f64,
    max_iter: usize,
) -> Result<Vec<FpaPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    grid.par_iter()
        .map(|&x| {
            let r = fpa_solve(psd, gamma, Complex64::new(x, 0.0), eta, max_iter)?;
            let raw = r.density();
            let density = if (-NEGATIVE_CLAMP..0.0).contains(&raw) { 0.0 } else { raw };
            Ok(FpaPoint { x, density, converged: r.converged, iterations: r.iterations })
        })
        .collect()
}
