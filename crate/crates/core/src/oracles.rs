//! Independent reference solutions: the Marchenko–Pastur density, the
//! cubic equation of two-atom populations, and a seeded Monte Carlo
//! eigenvalue experiment.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{check_gamma, PopulationSpectrum};

/// Edges `(1 ∓ √γ)²` of the Marchenko–Pastur law.
pub fn mp_edges(gamma: f64) -> (f64, f64) {
    let s = gamma.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

/// Marchenko–Pastur density `√((γ₊ - x)(x - γ₋)) / (2πγx)` of the
/// continuous part.
///
/// ```
/// let f = spectrode::oracles::mp_density(0.5, 1.0);
/// assert!((f - 1.75f64.sqrt() / std::f64::consts::PI).abs() < 1e-15);
/// ```
pub fn mp_density(gamma: f64, x: f64) -> f64 {
    let (lo, hi) = mp_edges(gamma);
    if !(x > lo && x < hi) {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * gamma * x)
}

/// Roots of `a x³ + b x² + c x + d` with real coefficients.
///
/// Coefficients are rescaled first; three real roots come from the
/// trigonometric form, otherwise Cardano's formula gives one real root and
/// a conjugate pair. Each root gets two Newton corrections.
pub fn solve_cubic(a: f64, b: f64, c: f64, d: f64) -> Result<[Complex64; 3]> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if !(a.abs() > 1e-14 * scale) {
        return Err(Error::DegenerateCubic(a));
    }
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc <= 0.0 && p < 0.0 {
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(2.0 * r * (phi - 2.0 * PI * k / 3.0).cos() - shift, 0.0))
    } else {
        let sq = disc.max(0.0).sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let w = (-q / 2.0 - sq).cbrt();
        let real = u + w;
        let re = -0.5 * real;
        let im = 0.5 * 3f64.sqrt() * (u - w);
        [Complex64::new(real - shift, 0.0), Complex64::new(re - shift, im), Complex64::new(re - shift, -im)]
    };
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let f = ((*r + b) * *r + c) * *r + d;
            let df = (3.0 * *r + 2.0 * b) * *r + c;
            if df.norm() > 0.0 {
                let next = *r - f / df;
                let fn_next = ((next + b) * next + c) * next + d;
                if fn_next.norm() < f.norm() {
                    *r = next;
                }
            }
        }
    }
    Ok(roots)
}

/// Limit density for `H = q δ₁ + (1 - q) δ_t` from the cubic
/// `x t v³ + (x t + x + t - tγ) v² + (x + t + 1 - γ(q + (1 - q) t)) v + 1 = 0`.
pub fn twopoint_density(gamma: f64, q: f64, t: f64, x: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(q > 0.0 && q < 1.0 && t > 0.0) {
        return Err(Error::InvalidArgument(format!("need 0 < q < 1 and t > 0, got q = {q}, t = {t}")));
    }
    if x == 0.0 {
        return Err(Error::InvalidArgument("x must be nonzero".into()));
    }
    let a = x * t;
    if a.abs() < 1e-14 {
        return Err(Error::DegenerateCubic(a));
    }
    let b = x * t + x + t - t * gamma;
    let c = x + t + 1.0 - gamma * (q + (1.0 - q) * t);
    let roots = solve_cubic(a, b, c, 1.0)?;
    let v = roots.iter().copied().max_by(|u, w| u.im.total_cmp(&w.im)).expect("three roots");
    if v.im <= 0.0 {
        return Ok(0.0);
    }
    Ok(v.im / (gamma * PI))
}

/// Settings of the Monte Carlo experiment.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub p: usize,
    pub replicates: usize,
    pub seed: u64,
    pub max_dimension: usize,
}

impl MonteCarlo {
    pub fn new(p: usize, replicates: usize, seed: u64) -> Self {
        MonteCarlo { p, replicates, seed, max_dimension: 2000 }
    }
}

/// `p` population eigenvalues at the quantiles `(i - 1/2)/p` of `H`.
pub fn population_eigenvalues(psd: &PopulationSpectrum, p: usize) -> Vec<f64> {
    let pieces: Vec<(f64, f64, f64)> = psd
        .atoms()
        .iter()
        .map(|a| (a.t, a.t, a.w))
        .chain(psd.uniforms().iter().map(|u| (u.a, u.b, u.w)))
        .collect();
    let mass = |x: f64, closed: bool| -> f64 {
        pieces
            .iter()
            .map(|&(a, b, w)| {
                if a == b {
                    if x > a || (closed && x == a) { w } else { 0.0 }
                } else if x >= b {
                    w
                } else if x <= a {
                    0.0
                } else {
                    w * (x - a) / (b - a)
                }
            })
            .sum()
    };
    let mut knots: Vec<f64> = pieces.iter().flat_map(|p| [p.0, p.1]).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let quantile = |level: f64| -> f64 {
        if level <= mass(knots[0], true) {
            return knots[0];
        }
        for pair in knots.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let fa = mass(a, true);
            let fb = mass(b, false);
            if level <= fb {
                return a + (b - a) * (level - fa) / (fb - fa);
            }
            if level <= mass(b, true) {
                return b;
            }
        }
        knots[knots.len() - 1]
    };
    (0..p).map(|i| quantile((i as f64 + 0.5) / p as f64)).collect()
}

fn silverman_epanechnikov(sample: &[f64], scale: f64, grid: &[f64]) -> Vec<f64> {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quant = |p: f64| {
        let pos = p * (n - 1.0);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < sorted.len() {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[i]
        }
    };
    let iqr = quant(0.75) - quant(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    grid.iter()
        .map(|&x| {
            let lo = sorted.partition_point(|&s| s < x - h);
            let hi = sorted.partition_point(|&s| s <= x + h);
            let k: f64 = sorted[lo..hi].iter().map(|&s| {
                let u = (x - s) / h;
                0.75 * (1.0 - u * u)
            }).sum();
            k * scale / h
        })
        .collect()
}

/// Averaged kernel density estimate of sample covariance eigenvalues.
///
/// Each replicate draws an `n × p` Gaussian matrix with `n = round(p/γ)`,
/// scales column `j` by the square root of the `j`-th population
/// eigenvalue, and estimates the density of the eigenvalues of `XᵀX/n`
/// with an Epanechnikov kernel and Silverman's bandwidth. The `p - n`
/// structural zero eigenvalues present for `γ > 1` are left out, so the
/// estimate targets the continuous part. Replicate `i` draws from the
/// ChaCha stream `i` of `seed`, so results do not depend on the thread
/// count.
pub fn mc_esd(psd: &PopulationSpectrum, gamma: f64, config: &MonteCarlo, grid: &[f64]) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let p = config.p;
    if p < 10 {
        return Err(Error::InvalidArgument(format!("p must be at least 10, got {p}")));
    }
    if p > config.max_dimension {
        return Err(Error::DimensionTooLarge { p, cap: config.max_dimension });
    }
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("at least one replicate is needed".into()));
    }
    let n = ((p as f64) / gamma).round().max(1.0) as usize;
    let roots: Vec<f64> = population_eigenvalues(psd, p).into_iter().map(f64::sqrt).collect();
    let sums: Vec<Vec<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(rep as u64);
            let x = DMatrix::<f64>::from_fn(n, p, |_, j| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * roots[j]
            });
            let s = (x.transpose() * &x) / n as f64;
            let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let kept = &eig[p.saturating_sub(n)..];
            silverman_epanechnikov(kept, 1.0 / p as f64, grid)
        })
        .collect();
    let mut out = vec![0.0; grid.len()];
    for s in &sums {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= config.replicates as f64);
    Ok(out)
}
