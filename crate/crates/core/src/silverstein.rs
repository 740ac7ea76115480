//! The inverse map `z(v) = -1/v + γ ∫ t dH(t)/(1 + t v)`, its derivative, and
//! the population integrals behind them.
//!
//! Uniform components use closed forms with a principal-branch logarithm,
//! switching to a moment series when `|b v|` is small.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{PopulationSpectrum, Uniform};
use crate::quadrature::integrate_adaptive;

const POLE_TOLERANCE: f64 = 1e-14;
const SERIES_RADIUS: f64 = 0.3;
const SERIES_TERMS: usize = 80;

/// `I1(v) = ∫ t dH/(1+tv)` and `I2(v) = ∫ t² dH/(1+tv)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HIntegrals {
    pub i1: Complex64,
    pub i2: Complex64,
}

fn pole_hit(v: Complex64) -> Error {
    Error::PoleHit { re: v.re, im: v.im }
}

/// `ln(1 + u)` accurate for small `|u|`.
fn log1p(u: Complex64) -> Complex64 {
    if u.norm() < 1e-3 {
        let mut term = u;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..12 {
            sum += term / k as f64;
            term *= -u;
        }
        sum
    } else {
        (1.0 + u).ln()
    }
}

/// `E[t^k]` for `k = 0..=n` under the uniform law on `[a, b]`.
fn uniform_moments(u: &Uniform, n: usize) -> Vec<f64> {
    let mut moments = Vec::with_capacity(n + 1);
    let mut s = 1.0;
    let mut a_pow = 1.0;
    moments.push(1.0);
    for k in 1..=n {
        a_pow *= u.a;
        s = u.b * s + a_pow;
        moments.push(s / (k + 1) as f64);
    }
    moments
}

fn uniform_series(u: &Uniform, v: Complex64) -> HIntegrals {
    let m = uniform_moments(u, SERIES_TERMS + 2);
    let mut i1 = Complex64::new(0.0, 0.0);
    let mut i2 = Complex64::new(0.0, 0.0);
    let mut p = Complex64::new(1.0, 0.0);
    for k in 0..SERIES_TERMS {
        let t1 = p * m[k + 1];
        let t2 = p * ((k + 1) as f64 * m[k + 2]);
        i1 += t1;
        i2 += t2;
        if t2.norm() <= 1e-18 * i2.norm() && t1.norm() <= 1e-18 * i1.norm() {
            break;
        }
        p *= -v;
    }
    HIntegrals { i1, i2 }
}

fn on_uniform_cut(u: &Uniform, v: Complex64) -> bool {
    v.im.abs() <= POLE_TOLERANCE * (1.0 + v.norm()) && v.re > -1.0 / u.a && v.re < -1.0 / u.b
}

fn uniform_closed(u: &Uniform, v: Complex64) -> Result<HIntegrals> {
    let width = u.b - u.a;
    let pa = 1.0 + u.a * v;
    let pb = 1.0 + u.b * v;
    let tol = POLE_TOLERANCE * (1.0 + v.norm());
    if pa.norm() <= tol * u.a || pb.norm() <= tol * u.b || on_uniform_cut(u, v) {
        return Err(pole_hit(v));
    }
    if (u.b * v).norm() < SERIES_RADIUS {
        return Ok(uniform_series(u, v));
    }
    let log_ratio = log1p(width * v / pa);
    let inv_v = 1.0 / v;
    let i1 = inv_v - log_ratio / (width * v * v);
    let bracket = 2.0 * log_ratio - width * v / (pa * pb);
    let i2 = inv_v * inv_v - bracket / (width * v * v * v);
    Ok(HIntegrals { i1, i2 })
}

/// Evaluates both population integrals in one pass.
pub fn h_integrals(psd: &PopulationSpectrum, v: Complex64) -> Result<HIntegrals> {
    let mut i1 = Complex64::new(0.0, 0.0);
    let mut i2 = Complex64::new(0.0, 0.0);
    let tol = POLE_TOLERANCE * (1.0 + v.norm());
    for atom in psd.atoms() {
        let p = 1.0 + atom.t * v;
        if p.norm() <= tol * atom.t {
            return Err(pole_hit(v));
        }
        let r = atom.t / p;
        i1 += atom.w * r;
        i2 += atom.w * r * r;
    }
    for u in psd.uniforms() {
        let h = uniform_closed(u, v)?;
        i1 += u.w * h.i1;
        i2 += u.w * h.i2;
    }
    Ok(HIntegrals { i1, i2 })
}

/// `I1(v) = ∫ t dH(t)/(1 + t v)`.
///
/// ```
/// use num_complex::Complex64;
/// use spectrode::{silverstein::h_integral_1, PopulationSpectrum};
/// let psd = PopulationSpectrum::two_point(0.5, 8.0).unwrap();
/// let i1 = h_integral_1(&psd, Complex64::new(-0.25, 0.0)).unwrap();
/// assert!((i1.re + 10.0 / 3.0).abs() < 1e-12);
/// ```
pub fn h_integral_1(psd: &PopulationSpectrum, v: Complex64) -> Result<Complex64> {
    h_integrals(psd, v).map(|h| h.i1)
}

/// `I2(v) = ∫ t² dH(t)/(1 + t v)²`.
pub fn h_integral_2(psd: &PopulationSpectrum, v: Complex64) -> Result<Complex64> {
    h_integrals(psd, v).map(|h| h.i2)
}

fn check_v(v: Complex64) -> Result<()> {
    if v.norm() == 0.0 {
        Err(Error::ZeroV)
    } else if !(v.re.is_finite() && v.im.is_finite()) {
        Err(Error::InvalidArgument(format!("v is not finite: {v}")))
    } else {
        Ok(())
    }
}

/// `z(v) = -1/v + γ I1(v)`.
pub fn z_of_v(psd: &PopulationSpectrum, gamma: f64, v: Complex64) -> Result<Complex64> {
    check_v(v)?;
    Ok(-1.0 / v + gamma * h_integral_1(psd, v)?)
}

/// `z'(v) = 1/v² - γ I2(v)`.
pub fn z_prime(psd: &PopulationSpectrum, gamma: f64, v: Complex64) -> Result<Complex64> {
    check_v(v)?;
    let inv = 1.0 / v;
    Ok(inv * inv - gamma * h_integral_2(psd, v)?)
}

/// `(z(v), z'(v))` from a single pass over the components.
pub fn z_and_prime(psd: &PopulationSpectrum, gamma: f64, v: Complex64) -> Result<(Complex64, Complex64)> {
    check_v(v)?;
    let h = h_integrals(psd, v)?;
    let inv = 1.0 / v;
    Ok((-inv + gamma * h.i1, inv * inv - gamma * h.i2))
}

/// `|1/v + z - γ I1(v)|`, zero exactly when `v` solves the Silverstein
/// equation at `z`.
pub fn silverstein_residual(psd: &PopulationSpectrum, gamma: f64, z: Complex64, v: Complex64) -> Result<f64> {
    check_v(v)?;
    Ok((1.0 / v + z - gamma * h_integral_1(psd, v)?).norm())
}

/// Population integrals in the reciprocal variable `w = 1/v`:
/// `∫ t/(t+w) dH` and `∫ t²/(t+w)² dH`.
///
/// These stay bounded as `v → ∞`, which is where contours cross `z = 0`
/// when `γ < 1`.
pub fn dual_integrals(psd: &PopulationSpectrum, w: Complex64) -> Result<(Complex64, Complex64)> {
    let mut j1 = Complex64::new(0.0, 0.0);
    let mut j2 = Complex64::new(0.0, 0.0);
    let tol = POLE_TOLERANCE * (1.0 + w.norm());
    for atom in psd.atoms() {
        let p = atom.t + w;
        if p.norm() <= tol {
            return Err(pole_hit(1.0 / w));
        }
        let r = atom.t / p;
        j1 += atom.w * r;
        j2 += atom.w * r * r;
    }
    for u in psd.uniforms() {
        let (k1, k2) = uniform_dual(u, w)?;
        j1 += u.w * k1;
        j2 += u.w * k2;
    }
    Ok((j1, j2))
}

fn uniform_dual(u: &Uniform, w: Complex64) -> Result<(Complex64, Complex64)> {
    let tol = POLE_TOLERANCE * (1.0 + w.norm());
    let pa = u.a + w;
    let pb = u.b + w;
    let cut = w.im.abs() <= tol && -w.re > u.a && -w.re < u.b;
    if pa.norm() <= tol || pb.norm() <= tol || cut {
        return Err(pole_hit(if w.norm() > 0.0 { 1.0 / w } else { Complex64::new(f64::INFINITY, 0.0) }));
    }
    if w.norm() * SERIES_RADIUS > u.b {
        let v = 1.0 / w;
        let h = uniform_series(u, v);
        return Ok((v * h.i1, v * v * h.i2));
    }
    let width = u.b - u.a;
    let log_ratio = log1p(width / pa);
    let j1 = 1.0 - w * log_ratio / width;
    let j2 = 1.0 - 2.0 * w * log_ratio / width + w * w / (pa * pb);
    Ok((j1, j2))
}

/// `∫ t²/(t+w)³ dH`, closed form for atoms and adaptive quadrature for
/// uniform components.
pub fn dual_integral_3(psd: &PopulationSpectrum, w: Complex64, tol: f64) -> Result<Complex64> {
    let mut j3 = Complex64::new(0.0, 0.0);
    let pole_tol = POLE_TOLERANCE * (1.0 + w.norm());
    for atom in psd.atoms() {
        let p = atom.t + w;
        if p.norm() <= pole_tol {
            return Err(pole_hit(1.0 / w));
        }
        j3 += atom.w * atom.t * atom.t / (p * p * p);
    }
    for u in psd.uniforms() {
        if w.im.abs() <= pole_tol && -w.re >= u.a && -w.re <= u.b {
            return Err(pole_hit(1.0 / w));
        }
        let density = u.w / (u.b - u.a);
        j3 += density * integrate_adaptive(|t| t * t / ((t + w) * (t + w) * (t + w)), u.a, u.b, tol / u.w);
    }
    Ok(j3)
}
