//! Dormand–Prince 5(4) for a scalar complex state, with Hairer's
//! continuous extension for dense output.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    end: f64,
    rcont: [Complex64; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.end
    }

    pub fn y0(&self) -> Complex64 {
        self.rcont[0]
    }

    pub fn y1(&self) -> Complex64 {
        self.rcont[0] + self.rcont[1]
    }

    /// Fifth-order accurate interpolant at `t` inside the step.
    pub fn eval(&self, t: f64) -> Complex64 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        r[0] + s * (r[1] + s1 * (r[2] + s * (r[3] + s1 * r[4])))
    }
}

/// Adaptive explicit Runge–Kutta integrator.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Dopri5 {
    pub fn new(tolerance: f64) -> Self {
        Dopri5 { rtol: tolerance, atol: tolerance, max_steps: 10_000_000, initial_step: None }
    }

    fn scale(&self, a: Complex64, b: Complex64) -> f64 {
        self.atol + self.rtol * a.norm().max(b.norm())
    }

    fn initial_h<F>(&self, f: &mut F, t0: f64, y0: Complex64, f0: Complex64, span: f64) -> f64
    where
        F: FnMut(f64, Complex64) -> Result<Complex64>,
    {
        if let Some(h) = self.initial_step {
            return h.abs().min(span.abs()) * span.signum();
        }
        let dir = span.signum();
        let sc = self.scale(y0, y0);
        let d0 = y0.norm() / sc;
        let d1 = f0.norm() / sc;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.abs() } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        let d2 = match f(t0 + dir * h0, y0 + dir * h0 * f0) {
            Ok(f1) => (f1 - f0).norm() / sc / h0,
            Err(_) => return dir * h0 * 1e-3,
        };
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6 * span.abs()) } else { (0.01 / dm).powf(0.2) };
        dir * (100.0 * h0).min(h1).min(span.abs())
    }

    fn attempt<F>(&self, f: &mut F, t: f64, y: Complex64, k1: Complex64, h: f64) -> Result<(Complex64, [Complex64; 7], f64)>
    where
        F: FnMut(f64, Complex64) -> Result<Complex64>,
    {
        let mut k = [Complex64::new(0.0, 0.0); 7];
        k[0] = k1;
        for s in 1..7 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj;
            }
            k[s] = f(t + C[s] * h, y + h * acc)?;
        }
        let mut y_new = y;
        let mut err = Complex64::new(0.0, 0.0);
        for s in 0..6 {
            y_new += h * A[6][s] * k[s];
        }
        for s in 0..7 {
            err += E[s] * k[s];
        }
        let err = (h * err).norm() / self.scale(y, y_new);
        Ok((y_new, k, err))
    }

    /// Integrates from `t0` to `t_end` and calls `on_step` with every
    /// accepted step. Steps are clipped so that each of `stops` (ordered in
    /// the direction of integration) is hit exactly.
    pub fn integrate<F, S>(
        &self,
        mut f: F,
        t0: f64,
        y0: Complex64,
        t_end: f64,
        stops: &[f64],
        mut on_step: S,
    ) -> Result<Complex64>
    where
        F: FnMut(f64, Complex64) -> Result<Complex64>,
        S: FnMut(&DenseStep) -> Result<()>,
    {
        if t_end == t0 {
            return Ok(y0);
        }
        let dir = (t_end - t0).signum();
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, y)?;
        let mut h = self.initial_h(&mut f, t0, y0, k1, t_end - t0);
        let mut stop_iter = stops.iter().copied().filter(|s| dir * (s - t0) > 0.0 && dir * (t_end - s) > 0.0);
        let mut next_stop = stop_iter.next().unwrap_or(t_end);
        let mut last_err: Option<Error> = None;
        let min_h = 1e-14 * t0.abs().max(t_end.abs()).max((t_end - t0).abs());
        for _ in 0..self.max_steps {
            let remaining = next_stop - t;
            let clipped = h.abs() >= remaining.abs() || (remaining.abs() - h.abs()).abs() < 1e-12 * remaining.abs();
            let h_try = if clipped { remaining } else { h };
            if h_try.abs() < min_h && !clipped {
                return Err(last_err.unwrap_or(Error::StepSizeUnderflow { t }));
            }
            match self.attempt(&mut f, t, y, k1, h_try) {
                Ok((y_new, k, err)) if err <= 1.0 && y_new.re.is_finite() && y_new.im.is_finite() => {
                    let diff = y_new - y;
                    let bspl = h_try * k[0] - diff;
                    let mut dense = Complex64::new(0.0, 0.0);
                    for s in 0..7 {
                        dense += D[s] * k[s];
                    }
                    let end = if clipped { next_stop } else { t + h_try };
                    let step = DenseStep {
                        t0: t,
                        h: h_try,
                        end,
                        rcont: [y, diff, bspl, diff - h_try * k[6] - bspl, h_try * dense],
                    };
                    on_step(&step)?;
                    t = end;
                    y = y_new;
                    k1 = k[6];
                    last_err = None;
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !clipped || factor < 1.0 {
                        h = h_try * factor;
                    }
                    if clipped {
                        if next_stop == t_end {
                            return Ok(y);
                        }
                        next_stop = stop_iter.next().unwrap_or(t_end);
                    }
                }
                Ok((_, _, err)) => {
                    let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
                    h = h_try * factor;
                    if h.abs() < min_h {
                        return Err(Error::StepSizeUnderflow { t });
                    }
                }
                Err(e) => {
                    h = h_try * 0.25;
                    if h.abs() < min_h {
                        return Err(e);
                    }
                    last_err = Some(e);
                }
            }
        }
        Err(Error::TooManySteps { t })
    }

    /// Values of the solution at each of `points`, which must be ordered in
    /// the direction of integration starting from `t0`.
    pub fn solve_at<F>(&self, f: F, t0: f64, y0: Complex64, points: &[f64]) -> Result<Vec<Complex64>>
    where
        F: FnMut(f64, Complex64) -> Result<Complex64>,
    {
        let mut out = Vec::with_capacity(points.len());
        let mut rest = points;
        while let Some(&p) = rest.first() {
            if p == t0 {
                out.push(y0);
                rest = &rest[1..];
            } else {
                break;
            }
        }
        let Some(&t_end) = rest.last() else {
            return Ok(out);
        };
        let mut idx = 0;
        self.integrate(f, t0, y0, t_end, rest, |step| {
            while idx < rest.len() && rest[idx] == step.t1() {
                out.push(step.y1());
                idx += 1;
            }
            Ok(())
        })?;
        Ok(out)
    }
}
