//! Shared domain types: the population spectrum, precision settings and
//! the computed limit spectrum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point mass of weight `w` at eigenvalue `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

/// Uniform distribution on `[a, b]` carrying total weight `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub a: f64,
    pub b: f64,
    pub w: f64,
}

/// A population spectral distribution `H`: a finite mixture of point
/// masses and uniform components on the positive half-line.
///
/// Only [`validate_psd`] builds one, so every value satisfies: positive
/// locations, distinct atoms sorted ascending, weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpectrum {
    atoms: Vec<Atom>,
    uniforms: Vec<Uniform>,
}

#[derive(Serialize, Deserialize)]
struct PsdWire {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    uniforms: Vec<(f64, f64, f64)>,
}

const RENORMALIZE_TOLERANCE: f64 = 1e-9;
const EXACT_SUM_TOLERANCE: f64 = 1e-12;

/// Checks and normalizes raw component lists.
///
/// Weights are rescaled when their sum is within `1e-9` of one and rejected
/// otherwise. Atoms are sorted by location.
pub fn validate_psd(atoms: &[(f64, f64)], uniforms: &[(f64, f64, f64)]) -> Result<PopulationSpectrum> {
    let mut out_atoms = Vec::with_capacity(atoms.len());
    for &(t, w) in atoms {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonPositiveEigenvalue(t));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NonPositiveWeight(w));
        }
        out_atoms.push(Atom { t, w });
    }
    let mut out_uniforms = Vec::with_capacity(uniforms.len());
    for &(a, b, w) in uniforms {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::NonPositiveEigenvalue(a));
        }
        if !b.is_finite() || a >= b {
            return Err(Error::DegenerateUniform(a, b));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NonPositiveWeight(w));
        }
        out_uniforms.push(Uniform { a, b, w });
    }
    out_atoms.sort_by(|x, y| x.t.total_cmp(&y.t));
    for pair in out_atoms.windows(2) {
        if pair[0].t == pair[1].t {
            return Err(Error::DuplicateAtom(pair[0].t));
        }
    }
    let total: f64 = out_atoms.iter().map(|a| a.w).sum::<f64>() + out_uniforms.iter().map(|u| u.w).sum::<f64>();
    if !((total - 1.0).abs() <= RENORMALIZE_TOLERANCE) {
        return Err(Error::WeightsDoNotSumToOne(total));
    }
    if (total - 1.0).abs() > EXACT_SUM_TOLERANCE {
        out_atoms.iter_mut().for_each(|a| a.w /= total);
        out_uniforms.iter_mut().for_each(|u| u.w /= total);
    }
    Ok(PopulationSpectrum { atoms: out_atoms, uniforms: out_uniforms })
}

/// Comb model `H = Σ_j (a + j b) δ_{c + j d}` for `j = 0..count`, with `a`
/// chosen so that the weights sum to one.
pub fn comb_psd(count: usize, weight_step: f64, first: f64, spacing: f64) -> Result<PopulationSpectrum> {
    if count == 0 {
        return Err(Error::InvalidArgument("comb needs at least one component".into()));
    }
    let n = count as f64;
    let base = (1.0 - weight_step * n * (n - 1.0) / 2.0) / n;
    let mut atoms = Vec::with_capacity(count);
    for j in 0..count {
        let eigenvalue = first + j as f64 * spacing;
        let weight = base + j as f64 * weight_step;
        if !(eigenvalue > 0.0 && weight > 0.0) {
            return Err(Error::InvalidComb { index: j, eigenvalue, weight });
        }
        atoms.push((eigenvalue, weight));
    }
    validate_psd(&atoms, &[])
}

impl PopulationSpectrum {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn uniforms(&self) -> &[Uniform] {
        &self.uniforms
    }

    /// Point mass at `t = 1`, the population of the Marchenko–Pastur law.
    pub fn identity() -> Self {
        PopulationSpectrum { atoms: vec![Atom { t: 1.0, w: 1.0 }], uniforms: Vec::new() }
    }

    /// Weight `q` at 1 and `1 - q` at `t`.
    pub fn two_point(q: f64, t: f64) -> Result<Self> {
        validate_psd(&[(1.0, q), (t, 1.0 - q)], &[])
    }

    /// Half the mass uniform on `[0.5, 1.5]`, half on ten atoms at
    /// `2, 3, ..., 11` with weights `0.0275, 0.0325, ..., 0.0725`.
    pub fn boxcar_mixture() -> Self {
        let atoms: Vec<(f64, f64)> = (0..10).map(|i| (2.0 + i as f64, 0.0275 + 0.005 * i as f64)).collect();
        validate_psd(&atoms, &[(0.5, 1.5, 0.5)]).expect("preset is valid")
    }

    pub fn component_count(&self) -> usize {
        self.atoms.len() + self.uniforms.len()
    }

    /// Smallest point of the support of `H`.
    pub fn min_location(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.t);
        let u = self.uniforms.iter().map(|u| u.a);
        a.chain(u).fold(f64::INFINITY, f64::min)
    }

    /// Largest point of the support of `H`.
    pub fn max_location(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.t);
        let u = self.uniforms.iter().map(|u| u.b);
        a.chain(u).fold(0.0, f64::max)
    }

    /// `∫ t dH(t)`, which is also the mean of the limit spectrum.
    pub fn mean(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| a.w * a.t).sum();
        let u: f64 = self.uniforms.iter().map(|u| u.w * 0.5 * (u.a + u.b)).sum();
        a + u
    }

    pub fn to_json(&self) -> String {
        let wire = PsdWire {
            atoms: self.atoms.iter().map(|a| (a.t, a.w)).collect(),
            uniforms: self.uniforms.iter().map(|u| (u.a, u.b, u.w)).collect(),
        };
        serde_json::to_string(&wire).expect("plain numeric data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: PsdWire =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("PSD JSON: {e}")))?;
        validate_psd(&wire.atoms, &wire.uniforms)
    }
}

/// Rejects `γ = 1` and non-positive or non-finite aspect ratios.
pub fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if gamma == 1.0 {
        return Err(Error::GammaEqualsOne);
    }
    Ok(())
}

/// Weight of the point mass at zero, `1 - 1/γ` for `γ > 1`.
pub fn zero_mass(gamma: f64) -> f64 {
    if gamma > 1.0 {
        1.0 - 1.0 / gamma
    } else {
        0.0
    }
}

/// Accuracy controls derived from the user tolerance `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub epsilon: f64,
    /// Residual threshold of the fixed-point iteration.
    pub eta: f64,
    /// Height of the horizontal line the ODE runs along.
    pub delta: f64,
    /// `M`: each interval carries `M + 1` grid points.
    pub grid_size_per_interval: usize,
}

/// Smallest supported `ε`; below it `δ = ε²` drowns in rounding noise.
pub const EPSILON_FLOOR: f64 = 1e-10;

impl Precision {
    /// `η = ε`, `δ = ε²`, `M = ⌈ε^(-1/2)⌉`.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && (EPSILON_FLOOR..1.0).contains(&epsilon)) {
            return Err(Error::InvalidPrecision(format!(
                "epsilon must lie in [{EPSILON_FLOOR:e}, 1), got {epsilon}"
            )));
        }
        let m = (epsilon.powf(-0.5) - 1e-9).ceil().max(2.0) as usize;
        Ok(Precision { epsilon, eta: epsilon, delta: epsilon * epsilon, grid_size_per_interval: m })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidPrecision(format!("eta must be positive, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidPrecision(format!("delta must be positive, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_grid_size(mut self, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidPrecision(format!("grid size must be at least 2, got {m}")));
        }
        self.grid_size_per_interval = m;
        Ok(self)
    }

    /// Absolute and relative step tolerance of the ODE integrator.
    pub fn ode_tolerance(&self) -> f64 {
        self.epsilon * 1e-2
    }
}

/// One value of the companion Stieltjes transform together with its
/// Silverstein residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSample {
    pub z: Complex64,
    pub v: Complex64,
    pub m: Complex64,
    pub residual: f64,
}

impl StieltjesSample {
    /// `m = v/γ + (1/γ - 1)/z`.
    pub fn new(gamma: f64, z: Complex64, v: Complex64, residual: f64) -> Self {
        let m = v / gamma + (1.0 / gamma - 1.0) / z;
        StieltjesSample { z, v, m, residual }
    }

    /// Stieltjes inversion reading `Im m / π`.
    pub fn density(&self) -> f64 {
        self.m.im / std::f64::consts::PI
    }
}

/// Estimated support of the limit spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub k_hat: usize,
    pub endpoints: Vec<(f64, f64)>,
    /// Intervals of the real `v` axis on which `z(v)` increases.
    pub increasing_intervals: Vec<(f64, f64)>,
    /// Real `v` whose image is the lowest endpoint.
    pub lower_preimage: f64,
    pub zero_mass: f64,
}

/// Density grid of a single support interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityInterval {
    pub lower: f64,
    pub upper: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// The computed limit spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub gamma: f64,
    pub intervals: Vec<DensityInterval>,
    pub zero_mass: f64,
}

impl SpectralDensity {
    pub fn k_hat(&self) -> usize {
        self.intervals.len()
    }

    /// Trapezoid mass of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        self.intervals.iter().map(|iv| trapezoid(&iv.grid, &iv.values)).sum()
    }

    /// All grid points in ascending order.
    pub fn grid(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|iv| iv.grid.iter().copied()).collect()
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// `count` equally spaced points from `lower` to `upper` inclusive.
pub fn uniform_grid(lower: f64, upper: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lower];
    }
    let step = (upper - lower) / (count - 1) as f64;
    (0..count)
        .map(|j| if j + 1 == count { upper } else { lower + j as f64 * step })
        .collect()
}
