//! Multi-component FID fits and stretched-exponential envelope fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use super::lm::{levenberg_marquardt, FitProblem, FitResult, FitStatus, Model, NoiseEstimate};
use crate::error::FitError;

pub const T2_BOUNDS: (f64, f64) = (0.05, 50.0);
pub const DELTA_BOUNDS: (f64, f64) = (0.0, 10.0);
pub const P_BOUNDS: (f64, f64) = (1.0, 2.0);

/// y0 + Σ_k A_k e^{−(t/T2_k)^p} cos(2πΔ_k t + φ_k).
/// Layout: [y0, p, (A, T2, Δ, φ) per component].
#[derive(Debug, Clone, Copy)]
pub struct FidModel {
    pub n: usize,
}

impl FidModel {
    pub const STRIDE: usize = 4;

    pub fn index(k: usize) -> usize {
        2 + Self::STRIDE * k
    }
}

impl Model for FidModel {
    fn n_params(&self) -> usize {
        2 + Self::STRIDE * self.n
    }

    fn eval(&self, t: f64, q: &[f64]) -> f64 {
        let p = q[1];
        let mut s = q[0];
        for k in 0..self.n {
            let b = Self::index(k);
            let (a, t2, d, phi) = (q[b], q[b + 1], q[b + 2], q[b + 3]);
            s += a * (-(t / t2).powf(p)).exp() * (2.0 * PI * d * t + phi).cos();
        }
        s
    }

    fn gradient(&self, t: f64, q: &[f64], out: &mut [f64]) {
        let p = q[1];
        out[0] = 1.0;
        out[1] = 0.0;
        for k in 0..self.n {
            let b = Self::index(k);
            let (a, t2, d, phi) = (q[b], q[b + 1], q[b + 2], q[b + 3]);
            let ratio = t / t2;
            let u = ratio.powf(p);
            let e = (-u).exp();
            let arg = 2.0 * PI * d * t + phi;
            let (sn, cs) = arg.sin_cos();
            out[b] = e * cs;
            out[b + 1] = a * cs * e * u * p / t2;
            out[b + 2] = -a * e * sn * 2.0 * PI * t;
            out[b + 3] = -a * e * sn;
            if ratio > 0.0 {
                out[1] -= a * cs * e * u * ratio.ln();
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FidFitOptions {
    pub n_components: usize,
    /// Shared stretch exponent; `None` fits it.
    pub fixed_p: Option<f64>,
    /// Initial detunings, MHz. Missing entries come from the spectrum.
    pub seeds: Vec<f64>,
    /// Components whose detuning (and phase) are fixed at zero, by seed index.
    pub on_resonance: Vec<usize>,
    pub sigma: Option<Vec<f64>>,
}

impl FidFitOptions {
    pub fn new(n_components: usize, fixed_p: Option<f64>) -> Self {
        Self {
            n_components,
            fixed_p,
            seeds: Vec::new(),
            on_resonance: Vec::new(),
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedComponent {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "T2_us")]
    pub t2: f64,
    #[serde(rename = "T2_err_us")]
    pub t2_err: f64,
    #[serde(rename = "delta_MHz")]
    pub delta: f64,
    #[serde(rename = "phi_rad")]
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidFit {
    pub components: Vec<FittedComponent>,
    pub y0: f64,
    pub p: f64,
    #[serde(skip)]
    pub p_err: f64,
    pub chi2_reduced: f64,
    pub status: FitStatus,
    #[serde(skip)]
    pub result: FitResult,
}

impl FidFit {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("fit report serializes");
        v["uncertainty"] = serde_json::json!("1-sigma linearized covariance");
        v
    }
}

fn check_data(x: &[f64], y: &[f64]) -> Result<(), FitError> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(FitError::InvalidProblem(
            "FID data need matching x and y with >= 4 samples".into(),
        ));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::InvalidProblem("time axis must be strictly ascending".into()));
    }
    Ok(())
}

/// Up to `n` detunings at the largest peaks of the zero-padded spectrum of
/// the mean-removed signal, resampled onto a uniform grid if needed.
pub fn spectral_seeds(x: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let m = x.len();
    let span = x[m - 1] - x[0];
    let dt = span / (m - 1) as f64;
    let mean = y.iter().sum::<f64>() / m as f64;
    let mut j = 0;
    let uniform: Vec<f64> = (0..m)
        .map(|k| {
            let t = x[0] + k as f64 * dt;
            while j + 2 < m && x[j + 1] < t {
                j += 1;
            }
            let w = ((t - x[j]) / (x[j + 1] - x[j])).clamp(0.0, 1.0);
            y[j] + w * (y[j + 1] - y[j]) - mean
        })
        .collect();
    let len = (8 * m).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = uniform.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|z| z.norm()).collect();
    let df = 1.0 / (len as f64 * dt);
    let mut peaks: Vec<(f64, f64)> = (0..mag.len() - 1)
        .filter(|&k| (k == 0 || mag[k] > mag[k - 1]) && mag[k] >= mag[k + 1])
        .map(|k| (mag[k], k as f64 * df))
        .filter(|(_, f)| *f <= DELTA_BOUNDS.1)
        .collect();
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<f64> = peaks.iter().take(n).map(|p| p.1).collect();
    while out.len() < n {
        out.push(out.last().copied().unwrap_or(0.0) + 0.5);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// T2 from a straight-line fit of ln|y − y0| through the running maxima
/// of the detrended signal, clamped to the T2 bounds.
pub fn envelope_seed(x: &[f64], y: &[f64], y0: f64, p: f64) -> f64 {
    let m = x.len();
    let w = (m / 30).max(1);
    let mut px = Vec::new();
    let mut py = Vec::new();
    let mut k = 0;
    while k < m {
        let end = (k + w).min(m);
        let (i, v) = (k..end)
            .map(|i| (i, (y[i] - y0).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if v > 1e-12 {
            px.push(x[i]);
            py.push(v.ln());
        }
        k = end;
    }
    if px.len() < 3 {
        return 1.0;
    }
    // ln|d| = c − (t/T2)^p  ⇒  regress against t^p.
    let tp: Vec<f64> = px.iter().map(|t| t.powf(p)).collect();
    let n = tp.len() as f64;
    let (mx, my) = (tp.iter().sum::<f64>() / n, py.iter().sum::<f64>() / n);
    let sxx: f64 = tp.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = tp.iter().zip(&py).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) || !slope.is_finite() {
        return 1.0;
    }
    (-1.0 / slope).powf(1.0 / p).clamp(T2_BOUNDS.0 * 2.0, T2_BOUNDS.1 / 2.0)
}

/// Linear least squares for y0, A_k, φ_k given fixed T2_k, Δ_k, p.
fn linear_amplitudes(
    x: &[f64],
    y: &[f64],
    p: f64,
    t2: &[f64],
    delta: &[f64],
    on_res: &[bool],
) -> (f64, Vec<(f64, f64)>) {
    let n = t2.len();
    let cols = 1 + 2 * n;
    let mut a = DMatrix::zeros(x.len(), cols);
    for (i, &t) in x.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for k in 0..n {
            let e = (-(t / t2[k]).powf(p)).exp();
            let (s, c) = (2.0 * PI * delta[k] * t).sin_cos();
            a[(i, 1 + 2 * k)] = e * c;
            a[(i, 2 + 2 * k)] = if on_res[k] { 0.0 } else { -e * s };
        }
    }
    let b = DVector::from_column_slice(y);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(cols));
    let comps = (0..n)
        .map(|k| {
            let (c, s) = (sol[1 + 2 * k], sol[2 + 2 * k]);
            // c·cos − s·sin = A cos(· + φ) with A = −√(c²+s²) when c < 0.
            let amp = c.hypot(s);
            if amp == 0.0 {
                (-0.1, 0.0)
            } else {
                let (a, phi) = normalize_phase(amp, s.atan2(c));
                (a, phi)
            }
        })
        .collect();
    (sol[0], comps)
}

/// Map (A, φ) to the equivalent pair with φ ∈ (−π/2, π/2].
pub fn normalize_phase(a: f64, phi: f64) -> (f64, f64) {
    let mut phi = (phi + PI).rem_euclid(2.0 * PI) - PI;
    let mut a = a;
    if phi > PI / 2.0 {
        phi -= PI;
        a = -a;
    } else if phi <= -PI / 2.0 {
        phi += PI;
        a = -a;
    }
    (a, phi)
}

fn run_fid(
    x: &[f64],
    y: &[f64],
    opts: &FidFitOptions,
    deltas: &[f64],
    t2_seed: f64,
    p0: f64,
) -> Result<FitResult, FitError> {
    let n = opts.n_components;
    let on_res: Vec<bool> = (0..n).map(|k| opts.on_resonance.contains(&k)).collect();
    let t2s = vec![t2_seed; n];
    let d: Vec<f64> = deltas
        .iter()
        .zip(&on_res)
        .map(|(v, o)| if *o { 0.0 } else { *v })
        .collect();
    let (y0, amps) = linear_amplitudes(x, y, p0, &t2s, &d, &on_res);
    let model = FidModel { n };
    let mut init = vec![y0, p0];
    for k in 0..n {
        init.extend([amps[k].0, t2s[k], d[k].clamp(DELTA_BOUNDS.0, DELTA_BOUNDS.1), amps[k].1]);
    }
    let mut prob = FitProblem::new(model, x.to_vec(), y.to_vec(), init);
    prob.sigma = opts.sigma.clone();
    prob.noise = NoiseEstimate::Tail;
    prob.free[1] = opts.fixed_p.is_none();
    (prob.lower[1], prob.upper[1]) = P_BOUNDS;
    for (k, &fixed) in on_res.iter().enumerate() {
        let b = FidModel::index(k);
        (prob.lower[b + 1], prob.upper[b + 1]) = T2_BOUNDS;
        (prob.lower[b + 2], prob.upper[b + 2]) = DELTA_BOUNDS;
        if fixed {
            prob.free[b + 2] = false;
            prob.free[b + 3] = false;
        }
    }
    levenberg_marquardt(&prob)
}

/// Fits n_components decaying cosines with one shared offset and stretch.
/// Several T2 starting points are tried and the lowest cost wins.
/// Components come back sorted by |Δ|.
pub fn fit_fid(x: &[f64], y: &[f64], opts: &FidFitOptions) -> Result<FidFit, FitError> {
    check_data(x, y)?;
    let n = opts.n_components;
    if !(1..=3).contains(&n) {
        return Err(FitError::InvalidProblem(format!(
            "n_components must be 1, 2 or 3, got {n}"
        )));
    }
    if opts.on_resonance.iter().any(|&k| k >= n) {
        return Err(FitError::InvalidProblem("on-resonance index out of range".into()));
    }
    let p0 = match opts.fixed_p {
        Some(p) if !(P_BOUNDS.0..=P_BOUNDS.1).contains(&p) => {
            return Err(FitError::InvalidProblem(format!("p must lie in [1, 2], got {p}")));
        }
        Some(p) => p,
        None => 1.5,
    };
    let mut deltas: Vec<f64> = opts.seeds.iter().take(n).map(|v| v.abs()).collect();
    if deltas.len() < n {
        let extra = spectral_seeds(x, y, n);
        for f in extra {
            if deltas.len() == n {
                break;
            }
            if deltas.iter().all(|d| (d - f).abs() > 0.05) {
                deltas.push(f);
            }
        }
        while deltas.len() < n {
            deltas.push(deltas.last().copied().unwrap_or(0.0) + 0.5);
        }
    }

    let m = x.len();
    let tail = &y[m - (m / 4).max(1)..];
    let y0_guess = tail.iter().sum::<f64>() / tail.len() as f64;
    let base = envelope_seed(x, y, y0_guess, p0);

    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for scale in [1.0, 0.5, 2.0] {
        match run_fid(x, y, opts, &deltas, (base * scale).clamp(0.1, 25.0), p0) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let res = match best {
        Some(r) => r,
        None => return Err(last_err.unwrap_or(FitError::SingularJacobian)),
    };

    let mut comps: Vec<FittedComponent> = (0..n)
        .map(|k| {
            let b = FidModel::index(k);
            let (a, phi) = normalize_phase(res.params[b], res.params[b + 3]);
            FittedComponent {
                a,
                t2: res.params[b + 1],
                t2_err: res.errors[b + 1],
                delta: res.params[b + 2],
                phi,
            }
        })
        .collect();
    comps.sort_by(|a, b| a.delta.abs().total_cmp(&b.delta.abs()));
    Ok(FidFit {
        components: comps,
        y0: res.params[0],
        p: res.params[1],
        p_err: res.errors[1],
        chi2_reduced: res.chi2_reduced,
        status: res.status,
        result: res,
    })
}

/// A e^{−(t/T)^p}; layout [A, T, p].
#[derive(Debug, Clone, Copy)]
pub struct StretchedExp;

impl Model for StretchedExp {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, t: f64, q: &[f64]) -> f64 {
        q[0] * (-(t / q[1]).powf(q[2])).exp()
    }

    fn gradient(&self, t: f64, q: &[f64], out: &mut [f64]) {
        let ratio = t / q[1];
        let u = ratio.powf(q[2]);
        let e = (-u).exp();
        out[0] = e;
        out[1] = q[0] * e * u * q[2] / q[1];
        out[2] = if ratio > 0.0 { -q[0] * e * u * ratio.ln() } else { 0.0 };
    }
}

/// Fits A e^{−(t/T)^p} to an envelope, with p free in [1, 2] unless fixed.
pub fn fit_stretched_exponential(x: &[f64], y: &[f64], fixed_p: Option<f64>) -> Result<FitResult, FitError> {
    check_data(x, y)?;
    let p0 = fixed_p.unwrap_or(1.5);
    let a0 = if y[0] != 0.0 { y[0] } else { 1.0 };
    let t0 = envelope_seed(x, y, 0.0, p0);
    let mut prob = FitProblem::new(StretchedExp, x.to_vec(), y.to_vec(), vec![a0, t0, p0]);
    (prob.lower[1], prob.upper[1]) = (1e-6, 1e6);
    (prob.lower[2], prob.upper[2]) = P_BOUNDS;
    prob.free[2] = fixed_p.is_none();
    levenberg_marquardt(&prob)
}
