//! Timing and support-identification experiments comparing the ODE solver
//! with the fixed-point baseline.

use serde::Serialize;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::esd::compute_esd;
use crate::fpa::fpa_density_grid;
use crate::model::{PopulationSpectrum, Precision, SpectralDensity};
use crate::oracles::{mp_density, twopoint_density};

/// A test problem with a closed-form or exact oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    MarchenkoPastur,
    TwoPoint { q: f64, t: f64 },
}

impl Problem {
    pub fn psd(&self) -> Result<PopulationSpectrum> {
        match *self {
            Problem::MarchenkoPastur => Ok(PopulationSpectrum::identity()),
            Problem::TwoPoint { q, t } => PopulationSpectrum::two_point(q, t),
        }
    }

    pub fn truth(&self, gamma: f64, x: f64) -> Result<f64> {
        match *self {
            Problem::MarchenkoPastur => Ok(mp_density(gamma, x)),
            Problem::TwoPoint { q, t } => twopoint_density(gamma, q, t, x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::MarchenkoPastur => "mp",
            Problem::TwoPoint { .. } => "twopoint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub warmups: usize,
    pub repeats: usize,
    /// Run both methods on the global thread pool instead of a single thread.
    pub parallel: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig { warmups: 3, repeats: 5, parallel: false }
    }
}

/// One summary row: wall time and accuracy of a method at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub epsilon: f64,
    pub seconds_log10: f64,
    pub mean_digits: f64,
    /// Total fixed-point iterations over the grid; zero for the ODE solver.
    pub fpa_iterations: usize,
    pub error: Option<String>,
}

/// One grid point of one method, enough to recompute every summary number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawPoint {
    pub method: String,
    pub epsilon: f64,
    pub x: f64,
    pub estimate: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub raw: Vec<RawPoint>,
}

/// `-log10` of the mean absolute error.
pub fn mean_digits(estimates: &[f64], truth: &[f64]) -> f64 {
    let n = estimates.len().max(1) as f64;
    let mae = estimates.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    -mae.log10()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn timed<T>(config: &TimingConfig, mut run: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    for _ in 0..config.warmups {
        run()?;
    }
    let mut times = Vec::with_capacity(config.repeats.max(1));
    let mut last = None;
    for _ in 0..config.repeats.max(1) {
        let start = Instant::now();
        let value = run()?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(value);
    }
    Ok((last.expect("at least one repeat"), median(times)))
}

fn failed(method: &str, epsilon: f64, e: &Error) -> TimingRow {
    TimingRow {
        method: method.into(),
        epsilon,
        seconds_log10: f64::NAN,
        mean_digits: f64::NAN,
        fpa_iterations: 0,
        error: Some(e.to_string()),
    }
}

fn esd_grid(esd: &SpectralDensity) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for iv in &esd.intervals {
        xs.extend_from_slice(&iv.grid);
        fs.extend_from_slice(&iv.values);
    }
    (xs, fs)
}

fn time_one(problem: Problem, gamma: f64, epsilon: f64, config: &TimingConfig, report: &mut TimingReport) -> Result<()> {
    let psd = problem.psd()?;
    let precision = Precision::new(epsilon)?;
    let (esd, esd_secs) = timed(config, || compute_esd(&psd, gamma, &precision))?;
    let (grid, values) = esd_grid(&esd);
    let truth = grid.iter().map(|&x| problem.truth(gamma, x)).collect::<Result<Vec<_>>>()?;
    report.rows.push(TimingRow {
        method: "spectrode".into(),
        epsilon,
        seconds_log10: esd_secs.log10(),
        mean_digits: mean_digits(&values, &truth),
        fpa_iterations: 0,
        error: None,
    });
    let max_iter = (1.0 / epsilon).ceil() as usize;
    match timed(config, || fpa_density_grid(&psd, gamma, &grid, epsilon, max_iter)) {
        Ok((points, fpa_secs)) => {
            let fpa_values: Vec<f64> = points.iter().map(|p| p.density).collect();
            report.rows.push(TimingRow {
                method: "fpa".into(),
                epsilon,
                seconds_log10: fpa_secs.log10(),
                mean_digits: mean_digits(&fpa_values, &truth),
                fpa_iterations: points.iter().map(|p| p.iterations).sum(),
                error: None,
            });
            for (i, &x) in grid.iter().enumerate() {
                report.raw.push(RawPoint { method: "fpa".into(), epsilon, x, estimate: fpa_values[i], truth: truth[i] });
            }
        }
        Err(e) => report.rows.push(failed("fpa", epsilon, &e)),
    }
    for (i, &x) in grid.iter().enumerate() {
        report.raw.push(RawPoint { method: "spectrode".into(), epsilon, x, estimate: values[i], truth: truth[i] });
    }
    Ok(())
}

/// Times the ODE solver against early-stopped fixed-point iteration
/// (`η = ε`, at most `⌈1/ε⌉` iterations per point) on the ODE solver's grid.
///
/// Failures are recorded as rows with `error` set. Unless
/// `config.parallel` is set, both methods run on a one-thread pool.
pub fn run_timing(problem: Problem, epsilons: &[f64], gamma: f64, config: &TimingConfig) -> Result<TimingReport> {
    let body = || {
        let mut report = TimingReport::default();
        for &epsilon in epsilons {
            if let Err(e) = time_one(problem, gamma, epsilon, config, &mut report) {
                report.rows.push(failed("spectrode", epsilon, &e));
            }
        }
        report
    };
    if config.parallel {
        return Ok(body());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(body))
}

/// One row of the support experiment. Endpoint errors are infinite when
/// the cluster counts disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportRow {
    pub gamma: f64,
    pub epsilon: f64,
    pub k_hat: usize,
    pub k_gold: usize,
    pub delta_k: usize,
    pub delta_l: f64,
    pub delta_u: f64,
}

/// Connected runs of consecutive grid points with density above
/// `threshold`, as `(first, last)` abscissae.
pub fn thresholded_components(grid: &[f64], density: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for (&x, &f) in grid.iter().zip(density) {
        if f > threshold {
            open = Some(open.map_or((x, x), |(a, _)| (a, x)));
        } else if let Some(c) = open.take() {
            out.push(c);
        }
    }
    out.extend(open);
    out
}

/// Compares the estimated support against a gold standard built from
/// fixed-point iteration at `eps0` on the same grid.
///
/// Each endpoint error is the gap between the two grid abscissae plus
/// the grid spacing on either side.
pub fn run_support_experiment(
    psd: &PopulationSpectrum,
    gammas: &[f64],
    epsilons: &[f64],
    eps0: f64,
) -> Result<Vec<SupportRow>> {
    let min_eps = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    if !(eps0 > 0.0 && eps0 < min_eps) {
        return Err(Error::InvalidArgument(format!(
            "gold-standard eps0 = {eps0} must be positive and below every epsilon (min {min_eps})"
        )));
    }
    let mut rows = Vec::new();
    for &gamma in gammas {
        for &epsilon in epsilons {
            let esd = compute_esd(psd, gamma, &Precision::new(epsilon)?)?;
            let mut gold = Vec::new();
            let mut estimated = Vec::new();
            for iv in &esd.intervals {
                let fpa = fpa_density_grid(psd, gamma, &iv.grid, eps0, crate::fpa::DEFAULT_MAX_ITER)?;
                let values: Vec<f64> = fpa.iter().map(|p| p.density).collect();
                let n = iv.grid.len();
                let step = (iv.grid[1] - iv.grid[0], iv.grid[n - 1] - iv.grid[n - 2]);
                for c in thresholded_components(&iv.grid, &values, eps0) {
                    gold.push((c, step));
                }
                estimated.push(((iv.lower, iv.upper), step));
            }
            let k_hat = estimated.len();
            let k_gold = gold.len();
            let (delta_l, delta_u) = if k_hat == k_gold {
                let n = k_hat.max(1) as f64;
                let mut dl = 0.0;
                let mut du = 0.0;
                for (((l, u), step), ((gl, gu), _)) in estimated.iter().zip(&gold) {
                    dl += (gl - l).abs() + 2.0 * step.0;
                    du += (u - gu).abs() + 2.0 * step.1;
                }
                (dl / n, du / n)
            } else {
                (f64::INFINITY, f64::INFINITY)
            };
            rows.push(SupportRow { gamma, epsilon, k_hat, k_gold, delta_k: k_hat.abs_diff(k_gold), delta_l, delta_u });
        }
    }
    Ok(rows)
}
