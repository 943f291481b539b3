//! Free-induction-decay models, closed-form T2* predictions, ensemble decay
//! laws with detuning distributions, and an Ornstein–Uhlenbeck Monte-Carlo
//! dephasing oracle.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;
use crate::spin::PhysicalConstants;

/// Stretch exponent used in the figure fits.
pub const DEFAULT_STRETCH: f64 = 1.24;
/// Stretch exponent quoted for the strong-axial single decay.
pub const TEXT_STRETCH: f64 = 1.28;

/// Minimum Monte-Carlo trial count.
pub const MIN_TRIALS: usize = 1000;
const CHUNK: usize = 1024;

/// One term y0 + A·exp(−(τ/T2)^p)·cos(2πΔτ + φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayComponent {
    pub y0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "T2_us")]
    pub t2: f64,
    pub p: f64,
    #[serde(rename = "delta_MHz")]
    pub delta: f64,
    #[serde(rename = "phi_rad", default)]
    pub phi: f64,
}

impl DecayComponent {
    /// ½[1 − e^{−(τ/T2)^p} cos(2πΔτ)].
    pub fn canonical(t2: f64, p: f64, delta: f64) -> Self {
        Self {
            y0: 0.5,
            a: -0.5,
            t2,
            p,
            delta,
            phi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let finite = [self.y0, self.a, self.t2, self.p, self.delta, self.phi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(DynamicsError::InvalidParameter(
                "component has non-finite fields".into(),
            ));
        }
        if self.t2 <= 0.0 {
            return Err(DynamicsError::InvalidParameter(format!(
                "T2 must be positive, got {}",
                self.t2
            )));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(DynamicsError::InvalidParameter(format!(
                "p must lie in [1, 2], got {}",
                self.p
            )));
        }
        Ok(())
    }

    pub fn envelope(&self, tau: f64) -> f64 {
        (-(tau / self.t2).powf(self.p)).exp()
    }
}

pub fn fid_probability(comp: &DecayComponent, tau: f64) -> f64 {
    comp.y0 + comp.a * comp.envelope(tau) * (2.0 * PI * comp.delta * tau + comp.phi).cos()
}

/// Pointwise sum over components. Offsets add, so a multi-component trace
/// with total offset ½ gives each component y0 = ½/n.
pub fn fid_signal(components: &[DecayComponent], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| components.iter().map(|c| fid_probability(c, t)).sum())
        .collect()
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<(), DynamicsError> {
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite() || *t < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::BadGrid);
    }
    Ok(())
}

/// Uniform grid 0, dt, 2dt, … up to and including `tau_max` (to within dt/2).
pub fn uniform_grid(tau_max: f64, dt: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(dt > 0.0 && tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(DynamicsError::BadGrid);
    }
    let n = (tau_max / dt + 0.5).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

/// Noise amplitudes; a scenario reports which fields it needs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    #[serde(rename = "sigma_B_z_mT", skip_serializing_if = "Option::is_none")]
    pub sigma_b_z: Option<f64>,
    #[serde(rename = "sigma_B_x_mT", skip_serializing_if = "Option::is_none")]
    pub sigma_b_x: Option<f64>,
    #[serde(rename = "sigma_B_y_mT", skip_serializing_if = "Option::is_none")]
    pub sigma_b_y: Option<f64>,
    #[serde(rename = "sigma_Pi_xp_Vcm", skip_serializing_if = "Option::is_none")]
    pub sigma_pi_xp: Option<f64>,
    #[serde(rename = "sigma_Pi_yp_Vcm", skip_serializing_if = "Option::is_none")]
    pub sigma_pi_yp: Option<f64>,
    #[serde(rename = "tau_c_B_us", skip_serializing_if = "Option::is_none")]
    pub tau_c_b: Option<f64>,
    #[serde(rename = "tau_c_Pi_us", skip_serializing_if = "Option::is_none")]
    pub tau_c_pi: Option<f64>,
    #[serde(rename = "sigma_B_ens_mT", skip_serializing_if = "Option::is_none")]
    pub sigma_b_ens: Option<f64>,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64, DynamicsError> {
    v.ok_or(DynamicsError::MissingNoiseParameter(name))
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let sigmas = [
            ("sigma_B_z_mT", self.sigma_b_z),
            ("sigma_B_x_mT", self.sigma_b_x),
            ("sigma_B_y_mT", self.sigma_b_y),
            ("sigma_Pi_xp_Vcm", self.sigma_pi_xp),
            ("sigma_Pi_yp_Vcm", self.sigma_pi_yp),
            ("sigma_B_ens_mT", self.sigma_b_ens),
        ];
        for (name, v) in sigmas {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(DynamicsError::InvalidParameter(format!(
                        "{name} must be finite and nonnegative"
                    )));
                }
            }
        }
        for (name, v) in [("tau_c_B_us", self.tau_c_b), ("tau_c_Pi_us", self.tau_c_pi)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(DynamicsError::InvalidParameter(format!("{name} must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// Which kind of state the FID is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Dressed,
    /// Strong-axial state in an axial bias field.
    StrongAxial {
        b_par_mt: f64,
    },
    /// Partially dressed state with mixing angle γ.
    Partial {
        gamma: f64,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Dressed => "dressed",
            Scenario::StrongAxial { .. } => "strong-axial",
            Scenario::Partial { .. } => "partial",
        }
    }

    /// (|cos γ|, |sin γ|) for the partial case. States with ⟨S_z⟩ < 0 have
    /// γ > π/2 and the same noise sensitivity as their mirror image.
    fn partial_weights(gamma: f64) -> Result<(f64, f64), DynamicsError> {
        if !gamma.is_finite() {
            return Err(DynamicsError::InvalidParameter("gamma must be finite".into()));
        }
        Ok((gamma.cos().abs(), gamma.sin().abs()))
    }

    fn strong_field(b_par_mt: f64) -> Result<f64, DynamicsError> {
        if !(b_par_mt.is_finite() && b_par_mt != 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "strong-axial scenario needs a nonzero axial field".into(),
            ));
        }
        Ok(b_par_mt.abs())
    }
}

fn t2_from_variance(v: f64) -> Result<f64, DynamicsError> {
    if v < 0.0 || v.is_nan() {
        return Err(DynamicsError::NonPositiveRadicand(v));
    }
    Ok(1.0 / (SQRT_2 * PI * v.sqrt()))
}

fn positive_gap(e_gap: f64) -> Result<f64, DynamicsError> {
    if !(e_gap.is_finite() && e_gap > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!(
            "E_gap must be positive, got {e_gap}"
        )));
    }
    Ok(e_gap)
}

/// Slow-bath T2* in µs. T2 = 1/(√2π·√V) with V the scenario's
/// frequency variance; the partial case uses unsquared cos γ, sin γ
/// weights on the variances.
pub fn predict_t2(
    scenario: &Scenario,
    n: &NoiseModel,
    c: &PhysicalConstants,
    e_gap: f64,
) -> Result<f64, DynamicsError> {
    n.validate()?;
    let ge = c.gamma_e;
    let v = match *scenario {
        Scenario::Dressed => {
            let sp = need(n.sigma_pi_xp, "sigma_Pi_xp_Vcm")?;
            let sb = need(n.sigma_b_z, "sigma_B_z_mT")?;
            let e_gap = positive_gap(e_gap)?;
            (c.d_perp * sp).powi(2) + (ge * sb).powi(4) / (e_gap * e_gap)
        }
        Scenario::StrongAxial { b_par_mt } => {
            let sb = need(n.sigma_b_z, "sigma_B_z_mT")?;
            let sx = need(n.sigma_pi_xp, "sigma_Pi_xp_Vcm")?;
            let sy = need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?;
            let bz = Scenario::strong_field(b_par_mt)?;
            let d2 = c.d_perp * c.d_perp;
            (ge * sb).powi(2) + d2 * d2 * (sx.powi(4) + sy.powi(4)) / (2.0 * ge * bz).powi(2)
        }
        Scenario::Partial { gamma } => {
            let sb = need(n.sigma_b_z, "sigma_B_z_mT")?;
            let sy = need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?;
            let (wc, ws) = Scenario::partial_weights(gamma)?;
            (ge * sb).powi(2) * wc + (c.d_perp * sy).powi(2) * ws
        }
    };
    t2_from_variance(v)
}

/// Partial-state T2* with cos²γ, sin²γ weights, the variance of the
/// linear frequency map −γ_e δB_z cos γ − d_⊥ δΠ_y' sin γ.
pub fn predict_t2_partial_squared(gamma: f64, n: &NoiseModel, c: &PhysicalConstants) -> Result<f64, DynamicsError> {
    n.validate()?;
    let sb = need(n.sigma_b_z, "sigma_B_z_mT")?;
    let sy = need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?;
    let (wc, ws) = Scenario::partial_weights(gamma)?;
    t2_from_variance((c.gamma_e * sb * wc).powi(2) + (c.d_perp * sy * ws).powi(2))
}

/// Distribution of static detunings across the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DetuningDistribution {
    Delta {
        #[serde(rename = "delta0_MHz")]
        delta0: f64,
    },
    Gaussian {
        #[serde(rename = "mean_MHz")]
        mean: f64,
        #[serde(rename = "sigma_MHz")]
        sigma: f64,
    },
    /// Density samples on an ascending detuning grid (MHz, 1/MHz).
    Tabulated { detuning: Vec<f64>, density: Vec<f64> },
}

fn trapezoid(x: &[f64], y: impl Fn(usize) -> Complex64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for k in 1..x.len() {
        s += (y(k) + y(k - 1)) * (0.5 * (x[k] - x[k - 1]));
    }
    s
}

impl DetuningDistribution {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        match self {
            DetuningDistribution::Delta { delta0 } if !delta0.is_finite() => {
                Err(DynamicsError::InvalidParameter("delta0 must be finite".into()))
            }
            DetuningDistribution::Gaussian { mean, sigma }
                if !(mean.is_finite() && sigma.is_finite() && *sigma >= 0.0) =>
            {
                Err(DynamicsError::InvalidParameter(
                    "gaussian needs finite mean and sigma >= 0".into(),
                ))
            }
            DetuningDistribution::Tabulated { detuning, density } => {
                if detuning.len() != density.len() || detuning.len() < 2 {
                    return Err(DynamicsError::InvalidParameter(
                        "table needs >= 2 matching samples".into(),
                    ));
                }
                if detuning.windows(2).any(|w| !(w[1] > w[0])) || density.iter().any(|d| !(d.is_finite() && *d >= 0.0))
                {
                    return Err(DynamicsError::InvalidParameter(
                        "table must be ascending with nonnegative density".into(),
                    ));
                }
                let norm = trapezoid(detuning, |k| Complex64::new(density[k], 0.0)).re;
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(DynamicsError::InvalidParameter(format!(
                        "table integrates to {norm}, not 1"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// P̃(τ) = ∫ e^{2πiΔτ} P(Δ) dΔ.
    pub fn characteristic(&self, tau: f64) -> Complex64 {
        match self {
            DetuningDistribution::Delta { delta0 } => Complex64::from_polar(1.0, 2.0 * PI * delta0 * tau),
            DetuningDistribution::Gaussian { mean, sigma } => Complex64::from_polar(
                (-2.0 * PI * PI * sigma * sigma * tau * tau).exp(),
                2.0 * PI * mean * tau,
            ),
            DetuningDistribution::Tabulated { detuning, density } => trapezoid(detuning, |k| {
                Complex64::from_polar(density[k], 2.0 * PI * detuning[k] * tau)
            }),
        }
    }

    /// True for a table whose grid and density are mirror images about zero.
    pub fn is_symmetric(&self) -> bool {
        match self {
            DetuningDistribution::Delta { delta0 } => *delta0 == 0.0,
            DetuningDistribution::Gaussian { mean, .. } => *mean == 0.0,
            DetuningDistribution::Tabulated { detuning, density } => {
                let n = detuning.len();
                let scale = detuning.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let dmax = density.iter().fold(0.0f64, |m, v| m.max(*v));
                (0..n).all(|k| {
                    (detuning[k] + detuning[n - 1 - k]).abs() <= 1e-12 * scale
                        && (density[k] - density[n - 1 - k]).abs() <= 1e-12 * dmax
                })
            }
        }
    }

    /// Re P̃(τ); for symmetric inputs the imaginary part is checked to vanish.
    pub fn real_transform(&self, tau: f64) -> Result<f64, DynamicsError> {
        let z = self.characteristic(tau);
        if self.is_symmetric() && z.im.abs() >= 1e-9 {
            return Err(DynamicsError::InvalidParameter(format!(
                "symmetric distribution has Im P(tau={tau}) = {:.3e}",
                z.im
            )));
        }
        Ok(z.re)
    }
}

/// T2 of the ensemble-averaged strong-axial decay, µs.
pub fn ensemble_t2_strong(sigma_b_ens: f64, c: &PhysicalConstants) -> f64 {
    1.0 / (2.0 * PI * c.gamma_e * sigma_b_ens)
}

/// T2 of the ensemble dressed decay, µs.
pub fn ensemble_t2_dressed(sigma_pi: f64, c: &PhysicalConstants) -> f64 {
    1.0 / (SQRT_2 * PI * c.d_perp * sigma_pi)
}

fn ensemble_envelope(
    scenario: &Scenario,
    n: &NoiseModel,
    c: &PhysicalConstants,
) -> Result<Box<dyn Fn(f64) -> f64>, DynamicsError> {
    n.validate()?;
    Ok(match *scenario {
        Scenario::StrongAxial { .. } => {
            let t = ensemble_t2_strong(need(n.sigma_b_ens, "sigma_B_ens_mT")?, c);
            Box::new(move |tau| (-tau / t).exp())
        }
        Scenario::Dressed => {
            let t = ensemble_t2_dressed(need(n.sigma_pi_xp, "sigma_Pi_xp_Vcm")?, c);
            Box::new(move |tau| (-(tau / t).powi(2)).exp())
        }
        Scenario::Partial { gamma } => {
            let ts = ensemble_t2_strong(need(n.sigma_b_ens, "sigma_B_ens_mT")?, c);
            let td = ensemble_t2_dressed(need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?, c);
            let (wc, ws) = Scenario::partial_weights(gamma)?;
            Box::new(move |tau| (-wc * tau / ts - ws * (tau / td).powi(2)).exp())
        }
    })
}

/// Ensemble-averaged coherence: decay envelope times Re P̃(τ).
pub fn ensemble_decay(
    scenario: &Scenario,
    n: &NoiseModel,
    c: &PhysicalConstants,
    dist: &DetuningDistribution,
    grid: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    check_grid(grid)?;
    dist.validate()?;
    let env = ensemble_envelope(scenario, n, c)?;
    grid.iter().map(|&t| Ok(env(t) * dist.real_transform(t)?)).collect()
}

/// Density of the per-NV coupling scale σ for ensemble scale s:
/// (s/σ²)·√(2/π)·exp(−s²/2σ²).
pub fn coupling_scale_density(sigma: f64, s: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    (s / (sigma * sigma)) * (2.0 / PI).sqrt() * (-(s * s) / (2.0 * sigma * sigma)).exp()
}

/// Inverse-CDF sampler of the coupling-scale density on a log grid
/// spanning [10⁻³ s, 10⁵ s].
#[derive(Debug, Clone)]
pub struct CouplingScaleSampler {
    sigma: Vec<f64>,
    cdf: Vec<f64>,
}

impl CouplingScaleSampler {
    pub fn new(s: f64) -> Result<Self, DynamicsError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "ensemble scale must be positive".into(),
            ));
        }
        let n = 8001;
        let (lo, hi) = ((1e-3f64).ln(), (1e5f64).ln());
        let sigma: Vec<f64> = (0..n)
            .map(|k| s * (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp())
            .collect();
        let mut cdf = vec![0.0; n];
        for k in 1..n {
            let f0 = coupling_scale_density(sigma[k - 1], s);
            let f1 = coupling_scale_density(sigma[k], s);
            cdf[k] = cdf[k - 1] + 0.5 * (f0 + f1) * (sigma[k] - sigma[k - 1]);
        }
        let total = cdf[n - 1];
        cdf.iter_mut().for_each(|v| *v /= total);
        Ok(Self { sigma, cdf })
    }

    pub fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&v| v < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.sigma[k - 1] + w * (self.sigma[k] - self.sigma[k - 1])
    }
}

/// Monte-Carlo average of single-NV Gaussian strong-axial envelopes
/// exp(−2π²γ_e²σ²τ²) over σ drawn from the coupling-scale density.
pub fn ensemble_strong_mc(
    sigma_b_ens: f64,
    c: &PhysicalConstants,
    grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, DynamicsError> {
    check_grid(grid)?;
    if samples < MIN_TRIALS {
        return Err(DynamicsError::InsufficientTrials(samples));
    }
    let sampler = CouplingScaleSampler::new(sigma_b_ens)?;
    let k = 2.0 * PI * PI * c.gamma_e * c.gamma_e;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut acc = vec![0.0; grid.len()];
            for trial in ch * CHUNK..((ch + 1) * CHUNK).min(samples) {
                let mut rng = trial_rng(seed, trial);
                let s = sampler.sample(rng.gen::<f64>());
                for (a, &t) in acc.iter_mut().zip(grid) {
                    *a += (-k * s * s * t * t).exp();
                }
            }
            acc
        })
        .collect();
    Ok(reduce(partial, grid.len(), samples))
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn reduce(partial: Vec<Vec<f64>>, len: usize, trials: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for p in partial {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= trials as f64);
    out
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    /// Drive detuning Δ, MHz.
    pub delta: f64,
    /// OU substeps per grid interval.
    pub substeps: usize,
}

impl MonteCarloConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            delta: 0.0,
            substeps: 10,
        }
    }
}

/// Frequency map δν(δB_z, δΠ_x', δΠ_y') for one scenario, MHz.
#[derive(Debug, Clone, Copy)]
enum FrequencyMap {
    Dressed { d: f64, g: f64, e_gap: f64 },
    Strong { d: f64, g: f64, bz: f64 },
    Partial { d: f64, g: f64, wc: f64, ws: f64 },
}

impl FrequencyMap {
    fn eval(&self, b: f64, px: f64, py: f64) -> f64 {
        match *self {
            FrequencyMap::Dressed { d, g, e_gap } => d * px + (g * b).powi(2) / e_gap,
            FrequencyMap::Strong { d, g, bz } => g * b + d * d * (px * px + py * py) / (2.0 * g * bz),
            FrequencyMap::Partial { d, g, wc, ws } => -g * b * wc - d * py * ws,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OuStep {
    decay: f64,
    kick: f64,
}

impl OuStep {
    fn new(h: f64, tau_c: f64, sigma: f64) -> Self {
        let decay = (-h / tau_c).exp();
        Self {
            decay,
            kick: sigma * (1.0 - decay * decay).max(0.0).sqrt(),
        }
    }

    fn apply(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        x * self.decay + self.kick * xi
    }
}

/// Average of cos(2πΔτ + δφ(τ)) over OU noise realizations, with
/// δφ = ∫2πδν dt accumulated by the trapezoid rule on the substep grid.
/// Trials are seeded per index and reduced in a fixed order, so the result
/// does not depend on the thread count.
pub fn mc_dephasing_oracle(
    scenario: &Scenario,
    n: &NoiseModel,
    c: &PhysicalConstants,
    e_gap: f64,
    grid: &[f64],
    cfg: &MonteCarloConfig,
) -> Result<Vec<f64>, DynamicsError> {
    check_grid(grid)?;
    n.validate()?;
    if cfg.trials < MIN_TRIALS {
        return Err(DynamicsError::InsufficientTrials(cfg.trials));
    }
    if cfg.substeps == 0 || !cfg.delta.is_finite() {
        return Err(DynamicsError::InvalidParameter(
            "substeps must be >= 1 and delta finite".into(),
        ));
    }
    let (d, g) = (c.d_perp, c.gamma_e);
    let tau_b = need(n.tau_c_b, "tau_c_B_us")?;
    let tau_pi = need(n.tau_c_pi, "tau_c_Pi_us")?;
    let sb = need(n.sigma_b_z, "sigma_B_z_mT")?;
    let (map, sx, sy) = match *scenario {
        Scenario::Dressed => (
            FrequencyMap::Dressed {
                d,
                g,
                e_gap: positive_gap(e_gap)?,
            },
            need(n.sigma_pi_xp, "sigma_Pi_xp_Vcm")?,
            0.0,
        ),
        Scenario::StrongAxial { b_par_mt } => (
            FrequencyMap::Strong {
                d,
                g,
                bz: Scenario::strong_field(b_par_mt)?,
            },
            need(n.sigma_pi_xp, "sigma_Pi_xp_Vcm")?,
            need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?,
        ),
        Scenario::Partial { gamma } => {
            let (wc, ws) = Scenario::partial_weights(gamma)?;
            (
                FrequencyMap::Partial { d, g, wc, ws },
                0.0,
                need(n.sigma_pi_yp, "sigma_Pi_yp_Vcm")?,
            )
        }
    };

    // Interval k runs from grid[k-1] (or 0) to grid[k].
    let steps: Vec<(f64, [OuStep; 3])> = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let start = if k == 0 { 0.0 } else { grid[k - 1] };
            let h = (t - start) / cfg.substeps as f64;
            (
                h,
                [
                    OuStep::new(h, tau_b, sb),
                    OuStep::new(h, tau_pi, sx),
                    OuStep::new(h, tau_pi, sy),
                ],
            )
        })
        .collect();

    let chunks = cfg.trials.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut acc = vec![0.0; grid.len()];
            for trial in ch * CHUNK..((ch + 1) * CHUNK).min(cfg.trials) {
                let mut rng = trial_rng(cfg.seed, trial);
                let mut x = [sb, sx, sy].map(|s| s * rng.sample::<f64, _>(StandardNormal));
                let mut nu = map.eval(x[0], x[1], x[2]);
                let mut phase = 0.0;
                for (k, (h, ou)) in steps.iter().enumerate() {
                    if *h > 0.0 {
                        for _ in 0..cfg.substeps {
                            for (xi, step) in x.iter_mut().zip(ou) {
                                *xi = step.apply(*xi, &mut rng);
                            }
                            let next = map.eval(x[0], x[1], x[2]);
                            phase += PI * (nu + next) * h;
                            nu = next;
                        }
                    }
                    acc[k] += (2.0 * PI * cfg.delta * grid[k] + phase).cos();
                }
            }
            acc
        })
        .collect();
    Ok(reduce(partial, grid.len(), cfg.trials))
}

/// Known decay components of one measurement condition, with the quoted
/// T2* and its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub state: &'static str,
    pub t2: f64,
    pub t2_err: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: &'static str,
    pub entries: Vec<TableEntry>,
}

impl TableRow {
    /// Components with equal amplitudes, summed offset ½ and total
    /// amplitude −½.
    pub fn components(&self, p: f64) -> Vec<DecayComponent> {
        let w = 1.0 / self.entries.len() as f64;
        self.entries
            .iter()
            .map(|e| DecayComponent {
                y0: 0.5 * w,
                a: -0.5 * w,
                t2: e.t2,
                p,
                delta: e.delta,
                phi: 0.0,
            })
            .collect()
    }
}

/// Slow on-resonance oscillations reported at point B.
pub const DELTA_1_SLOW: f64 = 0.094;
pub const DELTA_2_SLOW: f64 = 0.147;
/// Point-A detuning between dressed and partially dressed lines.
pub const DELTA_POINT_A: f64 = 0.532;
/// Strong-axial hyperfine detuning.
pub const DELTA_STRONG: f64 = 2.16;

/// The five measurement conditions. `delta_1` and `delta_2` are the point-B
/// splittings dres − p-dres2 and p-dres2 − p-dres3 in MHz.
pub fn measured_conditions(delta_1: f64, delta_2: f64) -> Vec<TableRow> {
    let e = |state, t2, t2_err, delta| TableEntry {
        state,
        t2,
        t2_err,
        delta,
    };
    vec![
        TableRow {
            label: "A, MW on dressed",
            entries: vec![
                e("dressed", 2.6, 0.4, 0.0),
                e("part-dressed-1", 1.41, 0.11, DELTA_POINT_A),
            ],
        },
        TableRow {
            label: "A, MW on part-dressed-1",
            entries: vec![
                e("part-dressed-1", 1.43, 0.15, 0.0),
                e("dressed", 2.2, 0.3, DELTA_POINT_A),
            ],
        },
        TableRow {
            label: "B, MW on dressed",
            entries: vec![
                e("dressed", 2.3, 0.3, DELTA_1_SLOW),
                e("part-dressed-2", 1.43, 0.15, delta_1),
                e("part-dressed-3", 0.89, 0.18, delta_1 + delta_2),
            ],
        },
        TableRow {
            label: "B, MW on part-dressed-2",
            entries: vec![
                e("part-dressed-2", 1.75, 0.15, DELTA_2_SLOW),
                e("dressed", 2.9, 0.4, delta_1),
                e("part-dressed-3", 1.13, 0.19, delta_2),
            ],
        },
        TableRow {
            label: "strong-axial field",
            entries: vec![e("strong-axial", 0.88, 0.17, DELTA_STRONG)],
        },
    ]
}
