//! Functionals of the computed spectrum: moments, quantiles, the mode, and
//! contour integrals of the Stieltjes transform.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::esd::stieltjes_point;
use crate::model::{check_gamma, PopulationSpectrum, Precision, SpectralDensity, SupportReport};
use crate::ode::Dopri5;
use crate::quadrature::integrate_adaptive;
use crate::silverstein::{dual_integral_3, dual_integrals};
use crate::support::{find_support, real_preimage_reciprocal};

/// Trapezoid integral of `h f̂` over the grids plus `zero_mass · h(0)`.
///
/// ```
/// use spectrode::{compute_esd, functionals::esd_moment, PopulationSpectrum, Precision};
/// let esd = compute_esd(&PopulationSpectrum::identity(), 0.5, &Precision::new(1e-8).unwrap()).unwrap();
/// assert!((esd_moment(&esd, |x| x).unwrap() - 1.0).abs() < 1e-5);
/// ```
pub fn esd_moment<H: Fn(f64) -> f64>(esd: &SpectralDensity, h: H) -> Result<f64> {
    let mut total = 0.0;
    for iv in &esd.intervals {
        let mut prev: Option<(f64, f64)> = None;
        for (&x, &f) in iv.grid.iter().zip(&iv.values) {
            let hx = h(x);
            if !hx.is_finite() {
                return Err(Error::NonFiniteH { x });
            }
            let y = hx * f;
            if let Some((x0, y0)) = prev {
                total += 0.5 * (x - x0) * (y0 + y);
            }
            prev = Some((x, y));
        }
    }
    if esd.zero_mass > 0.0 {
        let h0 = h(0.0);
        if !h0.is_finite() {
            return Err(Error::NonFiniteH { x: 0.0 });
        }
        total += esd.zero_mass * h0;
    }
    Ok(total)
}

/// Smallest `x` whose cumulative trapezoid mass, including the point mass
/// at zero, reaches `p`, with linear inverse interpolation inside a cell.
pub fn esd_quantile(esd: &SpectralDensity, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
    }
    let mut cum = esd.zero_mass;
    if cum >= p {
        return Ok(0.0);
    }
    let mut last = 0.0;
    for iv in &esd.intervals {
        for j in 1..iv.grid.len() {
            let (x0, x1) = (iv.grid[j - 1], iv.grid[j]);
            let cell = 0.5 * (x1 - x0) * (iv.values[j - 1] + iv.values[j]);
            if cum + cell >= p && cell > 0.0 {
                return Ok(x0 + (x1 - x0) * (p - cum) / cell);
            }
            cum += cell;
            last = x1;
        }
    }
    Ok(last)
}

/// Cumulative trapezoid mass up to `x`.
pub fn esd_cdf(esd: &SpectralDensity, x: f64) -> f64 {
    let mut cum = if x >= 0.0 { esd.zero_mass } else { 0.0 };
    for iv in &esd.intervals {
        for j in 1..iv.grid.len() {
            let (x0, x1) = (iv.grid[j - 1], iv.grid[j]);
            if x <= x0 {
                return cum;
            }
            let (f0, f1) = (iv.values[j - 1], iv.values[j]);
            if x < x1 {
                let fx = f0 + (f1 - f0) * (x - x0) / (x1 - x0);
                return cum + 0.5 * (x - x0) * (f0 + fx);
            }
            cum += 0.5 * (x1 - x0) * (f0 + f1);
        }
    }
    cum
}

/// Grid location of the largest density value; ties go to the smaller `x`.
pub fn esd_mode(esd: &SpectralDensity) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for iv in &esd.intervals {
        for (&x, &f) in iv.grid.iter().zip(&iv.values) {
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((x, f));
            }
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| Error::InvalidArgument("spectrum has no support interval".into()))
}

type CurveFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// How a contour was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum ContourKind {
    Circle { center: Complex64, radius: f64 },
    Sampled { points: Vec<Complex64> },
    Custom,
}

/// A closed curve `c(t)`, `t ∈ [0, 1]`, with its derivative.
///
/// Circles run as `c(t) = center + r e^{2πit}`. Paired with the
/// `-1/(2πi)` prefactor of [`clt_mean`] this orientation yields the signs
/// of the standard CLT mean values.
#[derive(Clone)]
pub struct ContourSpec {
    pub kind: ContourKind,
    c: CurveFn,
    dc: CurveFn,
}

impl std::fmt::Debug for ContourSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContourSpec").field("kind", &self.kind).finish()
    }
}

impl ContourSpec {
    pub fn circle(center: Complex64, radius: f64) -> Self {
        let w = 2.0 * PI;
        ContourSpec {
            kind: ContourKind::Circle { center, radius },
            c: Arc::new(move |t| center + radius * Complex64::new(0.0, w * t).exp()),
            dc: Arc::new(move |t| Complex64::new(0.0, w) * radius * Complex64::new(0.0, w * t).exp()),
        }
    }

    /// Circle through `0` and `a`: `c(t) = a/2 + (a/2) e^{2πit}`.
    pub fn through_origin(a: f64) -> Self {
        Self::circle(Complex64::new(a / 2.0, 0.0), a / 2.0)
    }

    /// Circle through `0` and `scale · û_K`.
    pub fn default_for(report: &SupportReport, scale: f64) -> Self {
        let upper = report.endpoints.last().map(|e| e.1).unwrap_or(1.0);
        Self::through_origin(scale * upper)
    }

    pub fn from_fn<C, D>(c: C, dc: D) -> Self
    where
        C: Fn(f64) -> Complex64 + Send + Sync + 'static,
        D: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        ContourSpec { kind: ContourKind::Custom, c: Arc::new(c), dc: Arc::new(dc) }
    }

    /// Trigonometric interpolant through equally spaced samples
    /// `c(k/N)`, `k = 0..N`.
    pub fn sampled(points: Vec<Complex64>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::InvalidArgument("a sampled contour needs at least 3 points".into()));
        }
        let half = (n / 2) as i64;
        let freqs: Vec<i64> = (0..n as i64).map(|k| if k <= half && !(n.is_multiple_of(2) && k == half) { k } else { k - n as i64 }).collect();
        let coeffs: Vec<Complex64> = freqs
            .iter()
            .map(|&f| {
                points.iter().enumerate().map(|(j, p)| {
                    p * Complex64::new(0.0, -2.0 * PI * (f * j as i64) as f64 / n as f64).exp()
                }).sum::<Complex64>() / n as f64
            })
            .collect();
        let nyquist = n.is_multiple_of(2).then_some(half as f64);
        let terms: Arc<Vec<(f64, Complex64)>> = Arc::new(freqs.iter().map(|&f| f as f64).zip(coeffs).collect());
        let t1 = terms.clone();
        let eval = move |t: f64| -> Complex64 {
            t1.iter()
                .map(|&(f, c)| {
                    let arg = 2.0 * PI * f * t;
                    if nyquist == Some(f.abs()) { c * arg.cos() } else { c * Complex64::new(0.0, arg).exp() }
                })
                .sum()
        };
        let t2 = terms;
        let deriv = move |t: f64| -> Complex64 {
            t2.iter()
                .map(|&(f, c)| {
                    let (k, arg) = (2.0 * PI * f, 2.0 * PI * f * t);
                    if nyquist == Some(f.abs()) { -c * k * arg.sin() } else { c * Complex64::new(0.0, k) * Complex64::new(0.0, arg).exp() }
                })
                .sum()
        };
        Ok(ContourSpec { kind: ContourKind::Sampled { points }, c: Arc::new(eval), dc: Arc::new(deriv) })
    }

    pub fn point(&self, t: f64) -> Complex64 {
        (self.c)(t)
    }

    pub fn derivative(&self, t: f64) -> Complex64 {
        (self.dc)(t)
    }

    /// Checks closure and that every crossing of the real axis avoids the
    /// support, with `margin` of slack around each interval.
    pub fn validate(&self, report: &SupportReport, margin: f64) -> Result<()> {
        let (c0, c1) = (self.point(0.0), self.point(1.0));
        if (c0 - c1).norm() > 1e-12 * (1.0 + c0.norm()) {
            return Err(Error::InvalidArgument(format!("contour is not closed: c(0) = {c0}, c(1) = {c1}")));
        }
        let n = 4096;
        let mut prev = c0;
        for i in 1..=n {
            let cur = self.point(i as f64 / n as f64);
            if prev.im == 0.0 || prev.im.signum() != cur.im.signum() {
                let x = if prev.im == cur.im { prev.re } else { prev.re + (cur.re - prev.re) * prev.im / (prev.im - cur.im) };
                if report.endpoints.iter().any(|&(l, u)| x >= l - margin && x <= u + margin) {
                    return Err(Error::ContourTouchesSupport { re: x, im: 0.0 });
                }
            }
            prev = cur;
        }
        Ok(())
    }
}

/// Integrand of a contour integral in the reciprocal variable `w = 1/v`.
pub type ReciprocalIntegrand<'a> = dyn Fn(Complex64, Complex64) -> Result<Complex64> + Sync + 'a;

fn start_reciprocal(
    psd: &PopulationSpectrum,
    gamma: f64,
    z0: Complex64,
    report: &SupportReport,
) -> Result<Complex64> {
    let scale = 1e-14 * (1.0 + z0.norm());
    if z0.im.abs() > scale {
        let s = stieltjes_point(psd, gamma, z0).map_err(|e| Error::StartFailure(e.to_string()))?;
        Ok(1.0 / s.v)
    } else {
        let w = real_preimage_reciprocal(psd, gamma, z0.re, report)?;
        Ok(Complex64::new(w, 0.0))
    }
}

/// `∮ G(c(t), w(t)) c'(t) dt` with `w = 1/v(z)` carried along the contour
/// by the ODE `dw/dt = -c'(t) / (1 - γ ∫ t²/(t+w)² dH)`.
///
/// The reciprocal variable stays finite where `v` has a pole, at `z = 0`
/// when `γ < 1`. Each accepted ODE step is one panel of composite
/// Gauss–Legendre quadrature, refined until two successive estimates
/// agree to `ε/10`.
pub fn contour_stieltjes_reciprocal(
    psd: &PopulationSpectrum,
    gamma: f64,
    contour: &ContourSpec,
    integrand: &ReciprocalIntegrand<'_>,
    precision: &Precision,
) -> Result<Complex64> {
    check_gamma(gamma)?;
    let report = find_support(psd, gamma, precision.epsilon)?;
    contour.validate(&report, 0.0)?;
    let z0 = contour.point(0.0);
    let w0 = start_reciprocal(psd, gamma, z0, &report)?;
    let rhs = |t: f64, w: Complex64| -> Result<Complex64> {
        let (_, j2) = dual_integrals(psd, w)?;
        let denom = 1.0 - gamma * j2;
        if denom.norm() <= 1e-13 {
            let z = contour.point(t);
            return Err(Error::ContourTouchesSupport { re: z.re, im: z.im });
        }
        Ok(-contour.derivative(t) / denom)
    };
    let quad_tol = precision.epsilon * 0.1;
    let solver = Dopri5::new(precision.ode_tolerance());
    let mut total = Complex64::new(0.0, 0.0);
    let mut failure: Option<Error> = None;
    let residual_cap = 1e3 * precision.ode_tolerance().max(1e-12);
    let w_end = solver.integrate(rhs, 0.0, w0, 1.0, &[0.5], |step| {
        let z = contour.point(step.t1());
        let w = step.y1();
        let (j1, _) = dual_integrals(psd, w)?;
        let residual = (z - (-w + gamma * w * j1)).norm();
        if residual > residual_cap * (1.0 + z.norm()) {
            return Err(Error::ContourTouchesSupport { re: z.re, im: z.im });
        }
        let panel = integrate_adaptive(
            |t| {
                let w = step.eval(t);
                match integrand(contour.point(t), w) {
                    Ok(g) => g * contour.derivative(t),
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            step.t0,
            step.t1(),
            quad_tol * step.h.abs(),
        );
        total += panel;
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if (w_end - w0).norm() > 1e3 * precision.ode_tolerance() * (1.0 + w0.norm()) {
        return Err(Error::ContourTouchesSupport { re: z0.re, im: z0.im });
    }
    Ok(total)
}

/// `∮ G(z, v(z)) dz` along `contour`.
///
/// `G` receives `v = 1/w`, which is infinite where the contour passes
/// `z = 0` for `γ < 1`; integrands that need that point should use
/// [`contour_stieltjes_reciprocal`].
pub fn contour_stieltjes<G>(
    psd: &PopulationSpectrum,
    gamma: f64,
    contour: &ContourSpec,
    g: G,
    precision: &Precision,
) -> Result<Complex64>
where
    G: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    contour_stieltjes_reciprocal(psd, gamma, contour, &|z, w| Ok(g(z, 1.0 / w)), precision)
}

/// Value and imaginary residue of a CLT mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltMean {
    pub value: f64,
    pub imag_residual: f64,
}

/// Mean of a linear spectral statistic in the CLT for sample covariance
/// matrices:
/// `-(1/2πi) ∮ g(z) γ ∫ v³t²/(1+tv)³ dH / (1 - γ ∫ v²t²/(1+tv)² dH)² dz`.
///
/// ```
/// use num_complex::Complex64;
/// use spectrode::functionals::{clt_mean, ContourSpec};
/// use spectrode::{PopulationSpectrum, Precision};
/// let g = 0.5f64;
/// let contour = ContourSpec::through_origin(1.1 * (1.0 + g.sqrt()).powi(2));
/// let precision = Precision::new(1e-6).unwrap();
/// let r = clt_mean(&PopulationSpectrum::identity(), g, |z: Complex64| z.ln(), &contour, &precision).unwrap();
/// assert!((r.value - 0.5 * (1.0 - g).ln()).abs() < 1e-4);
/// ```
pub fn clt_mean<F>(
    psd: &PopulationSpectrum,
    gamma: f64,
    g: F,
    contour: &ContourSpec,
    precision: &Precision,
) -> Result<CltMean>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let quad_tol = precision.epsilon * 0.1;
    let integrand = |z: Complex64, w: Complex64| -> Result<Complex64> {
        let (_, j2) = dual_integrals(psd, w)?;
        let j3 = dual_integral_3(psd, w, quad_tol * 1e-2)?;
        let denom = 1.0 - gamma * j2;
        Ok(g(z) * gamma * j3 / (denom * denom))
    };
    let integral = contour_stieltjes_reciprocal(psd, gamma, contour, &integrand, precision)?;
    let j = -integral / Complex64::new(0.0, 2.0 * PI);
    let tolerance = 100.0 * quad_tol;
    if j.im.abs() > tolerance {
        return Err(Error::ImaginaryResidue { imag: j.im, tolerance });
    }
    Ok(CltMean { value: j.re, imag_residual: j.im })
}
