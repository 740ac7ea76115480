//! Locating the support of the limit spectrum from the sign of `z'(v)` on
//! the real `v` axis.
//!
//! Every real `x` outside the support has a unique preimage `v` with
//! `z'(v) > 0`, so gaps of the support are images of the intervals where
//! `z` increases. Each estimated endpoint is the image of a grid point on
//! the increasing side of a sign switch, which places it just outside the
//! true support.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_gamma, zero_mass, PopulationSpectrum, SupportReport};
use crate::silverstein::{z_of_v, z_prime};

const MAX_DOUBLINGS: u32 = 60;
const MIN_POINTS: usize = 64;
const EXTRA_POINTS: usize = 16;

fn zp(psd: &PopulationSpectrum, gamma: f64, v: f64) -> Result<f64> {
    z_prime(psd, gamma, Complex64::new(v, 0.0)).map(|c| c.re)
}

fn zr(psd: &PopulationSpectrum, gamma: f64, v: f64) -> Result<f64> {
    z_of_v(psd, gamma, Complex64::new(v, 0.0)).map(|c| c.re)
}

/// `z'(v) ≥ 0`, nudging `v` toward `toward` when it lands on a pole.
fn increasing_at(psd: &PopulationSpectrum, gamma: f64, v: f64, toward: f64) -> Result<bool> {
    match zp(psd, gamma, v) {
        Err(Error::PoleHit { .. }) => {
            let nudge = 1e-12 * (1.0 + v.abs()) * (toward - v).signum();
            Ok(zp(psd, gamma, v + nudge)? >= 0.0)
        }
        other => Ok(other? >= 0.0),
    }
}

/// Lowest support endpoint for `γ < 1`, returned with its preimage.
///
/// Scans equispaced grids on `[D - 2^k, D - ε/2^k]`, `D = -1/min t`, of
/// `2^k ⌊1/ε⌋` points for `k = 0, 1, ...`. On `(-∞, D)` the sign of `z'`
/// switches exactly once, so the first negative grid point is located by
/// bisection over grid indices.
///
/// ```
/// use spectrode::{support::find_leftmost_edge, PopulationSpectrum};
/// let (_, lower) = find_leftmost_edge(&PopulationSpectrum::identity(), 0.25, 1e-5).unwrap();
/// assert!((lower - 0.25).abs() < 1e-4);
/// ```
pub fn find_leftmost_edge(psd: &PopulationSpectrum, gamma: f64, epsilon: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if gamma > 1.0 {
        return Err(Error::InvalidArgument("the leftmost-edge scan applies to gamma < 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidPrecision(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let d = -1.0 / psd.min_location();
    let base = (1.0 / epsilon).floor();
    for k in 0..MAX_DOUBLINGS {
        let scale = 2f64.powi(k as i32);
        let lo = d - scale;
        let hi = d - epsilon / scale;
        let n = scale * base;
        let step = (hi - lo) / (n - 1.0);
        let point = |i: f64| if i >= n - 1.0 { hi } else { lo + i * step };
        if !increasing_at(psd, gamma, lo, d)? {
            continue;
        }
        if increasing_at(psd, gamma, hi, lo)? {
            continue;
        }
        let (mut pos, mut neg) = (0.0f64, n - 1.0);
        while neg - pos > 1.0 {
            let mid = ((pos + neg) / 2.0).floor();
            if increasing_at(psd, gamma, point(mid), d)? {
                pos = mid;
            } else {
                neg = mid;
            }
        }
        let b_hat = point(neg);
        return Ok((b_hat, zr(psd, gamma, b_hat)?));
    }
    Err(Error::NoSignChange)
}

/// Lowest endpoint of the continuous part for `γ > 1`: the image of the
/// unique critical point of `z` on `(0, ∞)`.
fn positive_side_edge(psd: &PopulationSpectrum, gamma: f64, epsilon: f64) -> Result<(f64, f64)> {
    let mut pos = 1.0 / psd.max_location();
    let mut neg = pos;
    if zp(psd, gamma, pos)? >= 0.0 {
        for _ in 0..200 {
            neg *= 2.0;
            if zp(psd, gamma, neg)? < 0.0 {
                break;
            }
            pos = neg;
        }
    } else {
        for _ in 0..200 {
            pos *= 0.5;
            if zp(psd, gamma, pos)? >= 0.0 {
                break;
            }
            neg = pos;
        }
    }
    if !(zp(psd, gamma, pos)? >= 0.0 && zp(psd, gamma, neg)? < 0.0) {
        return Err(Error::NoSignChange);
    }
    let width = epsilon * pos.max(f64::MIN_POSITIVE).min(1.0);
    while neg - pos > width {
        let mid = 0.5 * (pos + neg);
        if mid <= pos || mid >= neg {
            break;
        }
        if zp(psd, gamma, mid)? >= 0.0 {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    Ok((neg, zr(psd, gamma, neg)?))
}

/// Closed sets of the negative `v` axis where `z` is singular: atom poles
/// `-1/t` and uniform cuts `[-1/a, -1/b]`, merged and sorted.
pub(crate) fn forbidden_set(psd: &PopulationSpectrum) -> Vec<(f64, f64)> {
    let mut pieces: Vec<(f64, f64)> = psd
        .atoms()
        .iter()
        .map(|a| (-1.0 / a.t, -1.0 / a.t))
        .chain(psd.uniforms().iter().map(|u| (-1.0 / u.a, -1.0 / u.b)))
        .collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match merged.last_mut() {
            Some(last) if p.0 <= last.1 => last.1 = last.1.max(p.1),
            _ => merged.push(p),
        }
    }
    merged
}

/// Brackets a sign switch of `z'` between `pos` (increasing side) and `neg`
/// down to width `epsilon` and returns the increasing end.
fn refine_switch(psd: &PopulationSpectrum, gamma: f64, mut pos: f64, mut neg: f64, epsilon: f64) -> Result<f64> {
    for _ in 0..200 {
        if (pos - neg).abs() <= epsilon {
            break;
        }
        let mid = 0.5 * (pos + neg);
        if mid == pos || mid == neg {
            break;
        }
        if increasing_at(psd, gamma, mid, pos)? {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    Ok(pos)
}

/// Increasing intervals inside one open sub-interval `(lo, hi)` between
/// singular sets. `reaches_zero` marks the last one, whose final run
/// extends to `v = 0`.
fn scan_subinterval(
    psd: &PopulationSpectrum,
    gamma: f64,
    lo: f64,
    hi: f64,
    epsilon: f64,
    reaches_zero: bool,
) -> Result<Vec<(f64, f64)>> {
    let h = epsilon.sqrt();
    let n = (((hi - lo) / h).ceil() as usize + EXTRA_POINTS).max(MIN_POINTS);
    let mid = 0.5 * (lo + hi);
    let step = (hi - lo) / (n + 1) as f64;
    let points: Vec<f64> = (0..n).map(|j| lo + (j + 1) as f64 * step).collect();
    let mut signs = Vec::with_capacity(n);
    for &v in &points {
        signs.push(increasing_at(psd, gamma, v, mid)?);
    }
    let mut runs = Vec::new();
    let mut j = 0;
    while j < n {
        if !signs[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < n && signs[j + 1] {
            j += 1;
        }
        let end = j;
        let a = if start == 0 { points[0] } else { refine_switch(psd, gamma, points[start], points[start - 1], epsilon)? };
        let b = if end + 1 == n {
            if reaches_zero {
                0.0
            } else {
                points[end]
            }
        } else {
            refine_switch(psd, gamma, points[end], points[end + 1], epsilon)?
        };
        runs.push((a, b));
        j += 1;
    }
    Ok(runs)
}

/// Estimates the support: the number of intervals and their endpoints.
///
/// ```
/// use spectrode::{support::find_support, PopulationSpectrum};
/// let report = find_support(&PopulationSpectrum::identity(), 4.0, 1e-4).unwrap();
/// assert_eq!(report.k_hat, 1);
/// assert_eq!(report.zero_mass, 0.75);
/// let (l, u) = report.endpoints[0];
/// assert!((l - 1.0).abs() < 1e-3 && (u - 9.0).abs() < 1e-3);
/// ```
pub fn find_support(psd: &PopulationSpectrum, gamma: f64, epsilon: f64) -> Result<SupportReport> {
    check_gamma(gamma)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidPrecision(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let (lower_preimage, lower) = if gamma < 1.0 {
        find_leftmost_edge(psd, gamma, epsilon)?
    } else {
        positive_side_edge(psd, gamma, epsilon)?
    };
    let forbidden = forbidden_set(psd);
    let last = forbidden.last().expect("a spectrum has at least one component").1;
    let mut subs: Vec<(f64, f64, bool)> = forbidden.windows(2).map(|w| (w[0].1, w[1].0, false)).collect();
    subs.push((last, last * epsilon * 1e-3, true));
    let runs: Vec<Vec<(f64, f64)>> = subs
        .par_iter()
        .map(|&(lo, hi, reaches_zero)| scan_subinterval(psd, gamma, lo, hi, epsilon, reaches_zero))
        .collect::<Result<_>>()?;
    let increasing: Vec<(f64, f64)> = runs.into_iter().flatten().collect();
    if increasing.last().map(|r| r.1) != Some(0.0) {
        return Err(Error::NoSignChange);
    }
    let mut endpoints: Vec<(f64, f64)> = Vec::with_capacity(increasing.len());
    let mut gaps = Vec::with_capacity(increasing.len());
    let mut l = lower;
    for &(a, b) in &increasing {
        let u = zr(psd, gamma, a)?;
        if b == 0.0 {
            endpoints.push((l, u));
            gaps.push((a, b));
            break;
        }
        let next = zr(psd, gamma, b)?;
        if u > l && next > u {
            endpoints.push((l, u));
            gaps.push((a, b));
            l = next;
        }
    }
    Ok(SupportReport {
        k_hat: endpoints.len(),
        endpoints,
        increasing_intervals: gaps,
        lower_preimage,
        zero_mass: zero_mass(gamma),
    })
}

/// Reciprocal `w = 1/v` of the real preimage of `x` under `z` on the
/// branch where `z' > 0`; `x` must lie outside the support.
pub fn real_preimage_reciprocal(psd: &PopulationSpectrum, gamma: f64, x: f64, report: &SupportReport) -> Result<f64> {
    check_gamma(gamma)?;
    let fail = |msg: &str| Error::StartFailure(format!("{msg} (x = {x})"));
    if gamma < 1.0 && x == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = if x < report.endpoints[0].0 {
        if gamma < 1.0 && x > 0.0 {
            let b = report.lower_preimage;
            let mut lo = b - 1.0;
            for _ in 0..2000 {
                if zr(psd, gamma, lo)? < x {
                    break;
                }
                lo = b - 2.0 * (b - lo);
            }
            (lo, b)
        } else if gamma < 1.0 {
            let (mut lo, mut hi) = (1.0, 1.0);
            for _ in 0..2000 {
                if zr(psd, gamma, hi)? > x {
                    break;
                }
                hi *= 2.0;
            }
            for _ in 0..2000 {
                if zr(psd, gamma, lo)? < x {
                    break;
                }
                lo *= 0.5;
            }
            (lo, hi)
        } else {
            (f64::MIN_POSITIVE, report.lower_preimage)
        }
    } else {
        let k = report.endpoints.iter().position(|&(_, u)| x < u);
        match k {
            Some(k) if x <= report.endpoints[k].0 && k > 0 => report.increasing_intervals[k - 1],
            Some(_) => return Err(fail("point lies inside the support")),
            None => {
                let (c, _) = *report.increasing_intervals.last().expect("support has a last gap");
                let mut hi = c / 2.0;
                for _ in 0..2000 {
                    if zr(psd, gamma, hi)? > x {
                        break;
                    }
                    hi /= 2.0;
                }
                (c, hi)
            }
        }
    };
    let (mut lo, mut hi) = (lo, hi);
    let (zlo, zhi) = (zr(psd, gamma, lo)?, zr(psd, gamma, hi)?);
    if !(zlo <= x && x <= zhi) {
        return Err(fail("could not bracket the real preimage"));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if zr(psd, gamma, mid)? < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 / (0.5 * (lo + hi)))
}
