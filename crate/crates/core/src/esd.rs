//! The density solver: integrate `dv/dz = 1/z'(v)` along `Im z = δ` across
//! each support interval and read off the density by Stieltjes inversion.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpa::fpa_solve;
use crate::model::{
    check_gamma, uniform_grid, DensityInterval, PopulationSpectrum, Precision, SpectralDensity, StieltjesSample,
    SupportReport,
};
use crate::ode::Dopri5;
use crate::silverstein::{silverstein_residual, z_and_prime, z_of_v, z_prime};
use crate::support::find_support;

const CRITICAL_THRESHOLD: f64 = 1e-13;
const DESCENT_TOLERANCE: f64 = 1e-7;
const MAX_RECOVERY_DEPTH: u32 = 3;
const MAX_EDGE_HALVINGS: usize = 60;
const EDGE_CELLS: usize = 4;

/// Values of `v` along one support interval.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrace {
    pub interval_index: usize,
    pub grid: Vec<f64>,
    pub v_values: Vec<Complex64>,
    pub max_residual: f64,
}

/// Right-hand side `dv/dz = 1/z'(v)`.
///
/// ```
/// use num_complex::Complex64;
/// use spectrode::{esd::ode_rhs, PopulationSpectrum};
/// let rhs = ode_rhs(&PopulationSpectrum::identity(), 0.5, Complex64::i()).unwrap();
/// assert!((rhs - 1.0 / Complex64::new(-1.0, 0.25)).norm() < 1e-14);
/// ```
pub fn ode_rhs(psd: &PopulationSpectrum, gamma: f64, v: Complex64) -> Result<Complex64> {
    let zp = z_prime(psd, gamma, v)?;
    if zp.norm() <= CRITICAL_THRESHOLD {
        let x = z_of_v(psd, gamma, v).map(|z| z.re).unwrap_or(f64::NAN);
        return Err(Error::CriticalPoint { x });
    }
    Ok(1.0 / zp)
}

fn lift_height(psd: &PopulationSpectrum, gamma: f64) -> f64 {
    4.0 * psd.max_location() * gamma.sqrt().max(1.0)
}

fn newton_polish(psd: &PopulationSpectrum, gamma: f64, z: Complex64, mut v: Complex64) -> Result<Complex64> {
    for _ in 0..60 {
        let (zv, zp) = z_and_prime(psd, gamma, v)?;
        if zp.norm() == 0.0 {
            break;
        }
        let mut dv = (z - zv) / zp;
        let mut halvings = 0;
        while z.im > 0.0 && (v + dv).im <= 0.0 && halvings < 60 {
            dv *= 0.5;
            halvings += 1;
        }
        v += dv;
        if dv.norm() <= 4.0 * f64::EPSILON * v.norm() {
            break;
        }
    }
    Ok(v)
}

/// Solves the Silverstein equation at `z` off the real axis.
///
/// The fixed-point iteration is run at `Re z + iY` with `Y` large enough
/// for it to contract quickly, the solution is carried down to `Im z` by
/// the ODE `dv/dy = i/z'(v)`, and Newton's method polishes the result.
///
/// ```
/// use num_complex::Complex64;
/// use spectrode::{esd::stieltjes_point, PopulationSpectrum};
/// let s = stieltjes_point(&PopulationSpectrum::identity(), 0.5, Complex64::new(1.0, 1e-12)).unwrap();
/// let exact = 1.75f64.sqrt() / std::f64::consts::PI;
/// assert!((s.density() - exact).abs() < 1e-9);
/// ```
pub fn stieltjes_point(psd: &PopulationSpectrum, gamma: f64, z: Complex64) -> Result<StieltjesSample> {
    check_gamma(gamma)?;
    if z.im < 0.0 {
        let s = stieltjes_point(psd, gamma, z.conj())?;
        return Ok(StieltjesSample { z, v: s.v.conj(), m: s.m.conj(), residual: s.residual });
    }
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("z must lie off the real axis, got {z}")));
    }
    let fail = || Error::FpaStartFailure { x: z.re };
    let top = lift_height(psd, gamma).max(z.im);
    let start = Complex64::new(z.re, top);
    let fp = fpa_solve(psd, gamma, start, 1e-13 * (top + z.re.abs()), 10_000)?;
    if !fp.converged {
        return Err(fail());
    }
    let mut v = newton_polish(psd, gamma, start, fp.sample.v)?;
    if top > z.im {
        let solver = Dopri5::new(DESCENT_TOLERANCE);
        let rhs = |s: f64, v: Complex64| -> Result<Complex64> {
            let zp = z_prime(psd, gamma, v)?;
            Ok(Complex64::new(0.0, s.exp()) / zp)
        };
        let (mut s, target) = (top.ln(), z.im.ln());
        while s > target {
            let next = (s - std::f64::consts::LN_10).max(target);
            v = solver.solve_at(rhs, s, v, &[next]).map_err(|_| fail())?[0];
            let y = if next == target { z.im } else { next.exp() };
            v = newton_polish(psd, gamma, Complex64::new(z.re, y), v)?;
            s = next;
        }
    }
    if !(v.im > 0.0) {
        return Err(fail());
    }
    let residual = silverstein_residual(psd, gamma, z, v)?;
    Ok(StieltjesSample::new(gamma, z, v, residual))
}

#[derive(Clone, Copy)]
struct EdgeNode {
    x: f64,
    v: Complex64,
    f: f64,
}

struct EdgeRefiner<'a> {
    psd: &'a PopulationSpectrum,
    gamma: f64,
    delta: f64,
    epsilon: f64,
}

impl EdgeRefiner<'_> {
    fn density(&self, x: f64, v: Complex64) -> f64 {
        StieltjesSample::new(self.gamma, Complex64::new(x, self.delta), v, 0.0).density()
    }

    fn solve(&self, x: f64, guess: Complex64) -> Result<Complex64> {
        let z = Complex64::new(x, self.delta);
        if let Ok(v) = newton_polish(self.psd, self.gamma, z, guess) {
            let ok = silverstein_residual(self.psd, self.gamma, z, v).map(|r| r <= 1e-10 * (1.0 + z.norm()));
            if v.im > 0.0 && ok == Ok(true) {
                return Ok(v);
            }
        }
        Ok(stieltjes_point(self.psd, self.gamma, z)?.v)
    }

    fn bisect(&self, a: EdgeNode, b: EdgeNode, depth: usize, out: &mut Vec<(f64, Complex64)>) -> Result<()> {
        let width = b.x - a.x;
        if depth >= MAX_EDGE_HALVINGS || width <= 1e3 * self.delta {
            return Ok(());
        }
        let x = 0.5 * (a.x + b.x);
        let v = self.solve(x, 0.5 * (a.v + b.v))?;
        let mid = EdgeNode { x, v, f: self.density(x, v) };
        out.push((x, v));
        if (mid.f - 0.5 * (a.f + b.f)).abs() * width > self.epsilon {
            self.bisect(a, mid, depth + 1, out)?;
            self.bisect(mid, b, depth + 1, out)?;
        }
        Ok(())
    }

    fn refine(&self, grid: &[f64], v_values: &[Complex64], out: &mut Vec<(f64, Complex64)>) -> Result<()> {
        let nodes: Vec<EdgeNode> =
            grid.iter().zip(v_values).map(|(&x, &v)| EdgeNode { x, v, f: self.density(x, v) }).collect();
        let n = nodes.len();
        let cells = EDGE_CELLS.min(n / 2);
        for j in (0..cells).chain(n - 1 - cells..n - 1) {
            self.bisect(nodes[j], nodes[j + 1], 0, out)?;
        }
        Ok(())
    }
}

fn refine_edges(
    psd: &PopulationSpectrum,
    gamma: f64,
    precision: &Precision,
    grid: Vec<f64>,
    v_values: Vec<Complex64>,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if grid.len() < 4 {
        return Ok((grid, v_values));
    }
    let refiner = EdgeRefiner { psd, gamma, delta: precision.delta, epsilon: precision.epsilon };
    let mut extra = Vec::new();
    refiner.refine(&grid, &v_values, &mut extra)?;
    if extra.is_empty() {
        return Ok((grid, v_values));
    }
    let mut points: Vec<(f64, Complex64)> = grid.into_iter().zip(v_values).chain(extra).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(points.into_iter().unzip())
}

fn density_value(sample: &StieltjesSample, clamp: f64) -> Result<f64> {
    let f = sample.density();
    if f >= 0.0 {
        Ok(f)
    } else if f >= -clamp {
        Ok(0.0)
    } else {
        Err(Error::NegativeDensity { x: sample.z.re, value: f })
    }
}

/// Integrates the ODE across `[lower, upper]` at height `δ` and records `v`
/// on the uniform grid of `M + 1` points.
///
/// The integration starts at the first interior grid point so that it
/// never has to pass the square-root branch point sitting just outside
/// the interval.
///
/// The cells next to each endpoint are bisected until linear interpolation
/// misses less than `ε` of mass per cell. This matters most next to an edge
/// close to zero, where the density climbs far faster than a square root.
pub fn solve_interval(
    psd: &PopulationSpectrum,
    gamma: f64,
    lower: f64,
    upper: f64,
    precision: &Precision,
) -> Result<OdeTrace> {
    check_gamma(gamma)?;
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!("empty interval [{lower}, {upper}]")));
    }
    let m = precision.grid_size_per_interval;
    let delta = precision.delta;
    let grid = uniform_grid(lower, upper, m + 1);
    let at = |x: f64| Complex64::new(x, delta);
    let first = stieltjes_point(psd, gamma, at(grid[1])).map_err(|_| Error::FpaStartFailure { x: grid[1] })?;
    let solver = Dopri5::new(precision.ode_tolerance());
    let interior = solver
        .solve_at(
            |x, v| {
                let zp = z_prime(psd, gamma, v)?;
                if zp.norm() <= CRITICAL_THRESHOLD {
                    return Err(Error::CriticalPoint { x });
                }
                Ok(1.0 / zp)
            },
            grid[1],
            first.v,
            &grid[2..m],
        )
        .map_err(|e| match e {
            Error::StepSizeUnderflow { t } | Error::TooManySteps { t } => Error::CriticalPoint { x: t },
            Error::PoleHit { .. } => Error::CriticalPoint { x: f64::NAN },
            other => other,
        })?;
    let left = stieltjes_point(psd, gamma, at(grid[0]))?;
    let right = stieltjes_point(psd, gamma, at(grid[m]))?;
    let mut v_values = Vec::with_capacity(m + 1);
    v_values.push(left.v);
    v_values.push(first.v);
    v_values.extend(interior);
    v_values.push(right.v);
    let (grid, v_values) = refine_edges(psd, gamma, precision, grid, v_values)?;
    let mut max_residual: f64 = 0.0;
    for (x, v) in grid.iter().zip(&v_values) {
        if !(v.im > 0.0) {
            return Err(Error::CriticalPoint { x: *x });
        }
        max_residual = max_residual.max(silverstein_residual(psd, gamma, at(*x), *v)?);
    }
    Ok(OdeTrace { interval_index: 0, grid, v_values, max_residual })
}

/// Density, support and traces of one run.
#[derive(Debug, Clone)]
pub struct EsdSolution {
    pub density: SpectralDensity,
    pub support: SupportReport,
    pub traces: Vec<OdeTrace>,
}

fn solve_with_recovery(
    psd: &PopulationSpectrum,
    gamma: f64,
    lower: f64,
    upper: f64,
    precision: &Precision,
    depth: u32,
) -> Result<Vec<OdeTrace>> {
    match solve_interval(psd, gamma, lower, upper, precision) {
        Ok(trace) => Ok(vec![trace]),
        Err(Error::CriticalPoint { x }) if depth < MAX_RECOVERY_DEPTH => {
            let finer = find_support(psd, gamma, precision.epsilon / 4.0)?;
            let mut pieces: Vec<(f64, f64)> = finer
                .endpoints
                .iter()
                .filter(|&&(l, u)| u > lower && l < upper)
                .map(|&(l, u)| (l.max(lower), u.min(upper)))
                .collect();
            if pieces.len() < 2 {
                let gap = (upper - lower) * 1e-9;
                if !(x > lower + gap && x < upper - gap) {
                    return Err(Error::CriticalPoint { x });
                }
                pieces = vec![(lower, x - gap), (x + gap, upper)];
            }
            let mut out = Vec::new();
            for (l, u) in pieces {
                out.extend(solve_with_recovery(psd, gamma, l, u, precision, depth + 1)?);
            }
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

fn density_clamp(precision: &Precision) -> f64 {
    precision.ode_tolerance().max(1e-12)
}

/// Full computation returning the support and the raw traces alongside the
/// density.
pub fn compute_esd_detailed(psd: &PopulationSpectrum, gamma: f64, precision: &Precision) -> Result<EsdSolution> {
    check_gamma(gamma)?;
    let support = find_support(psd, gamma, precision.epsilon)?;
    let solved: Vec<Vec<OdeTrace>> = support
        .endpoints
        .par_iter()
        .map(|&(l, u)| solve_with_recovery(psd, gamma, l, u, precision, 0))
        .collect::<Result<_>>()?;
    let clamp = density_clamp(precision);
    let mut traces: Vec<OdeTrace> = solved.into_iter().flatten().collect();
    let mut intervals = Vec::with_capacity(traces.len());
    for (k, trace) in traces.iter_mut().enumerate() {
        trace.interval_index = k;
        let last = trace.grid.len() - 1;
        let mut values = Vec::with_capacity(trace.grid.len());
        for (j, (x, v)) in trace.grid.iter().zip(&trace.v_values).enumerate() {
            if j == 0 || j == last {
                values.push(0.0);
            } else {
                let sample = StieltjesSample::new(gamma, Complex64::new(*x, precision.delta), *v, 0.0);
                values.push(density_value(&sample, clamp)?);
            }
        }
        intervals.push(DensityInterval {
            lower: trace.grid[0],
            upper: trace.grid[last],
            grid: trace.grid.clone(),
            values,
        });
    }
    let density = SpectralDensity { gamma, intervals, zero_mass: support.zero_mass };
    Ok(EsdSolution { density, support, traces })
}

/// Limit spectral density on the support grids.
///
/// ```
/// use spectrode::{compute_esd, evaluate_density, PopulationSpectrum, Precision};
/// let esd = compute_esd(&PopulationSpectrum::identity(), 0.5, &Precision::new(1e-6).unwrap()).unwrap();
/// let exact = 1.75f64.sqrt() / std::f64::consts::PI;
/// assert!((evaluate_density(&esd, 1.0) - exact).abs() < 1e-5);
/// ```
pub fn compute_esd(psd: &PopulationSpectrum, gamma: f64, precision: &Precision) -> Result<SpectralDensity> {
    compute_esd_detailed(psd, gamma, precision).map(|s| s.density)
}

/// Linear interpolation of the stored grid values; zero off the support.
pub fn evaluate_density(esd: &SpectralDensity, x: f64) -> f64 {
    for iv in &esd.intervals {
        if x < iv.lower || x > iv.upper {
            continue;
        }
        let i = iv.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return iv.values[0];
        }
        if i == iv.grid.len() {
            return iv.values[i - 1];
        }
        let (x0, x1) = (iv.grid[i - 1], iv.grid[i]);
        if x == x0 {
            return iv.values[i - 1];
        }
        let alpha = (x1 - x) / (x1 - x0);
        return alpha * iv.values[i - 1] + (1.0 - alpha) * iv.values[i];
    }
    0.0
}
