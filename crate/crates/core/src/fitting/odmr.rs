//! Lorentzian-dip ODMR fits.

use serde::Serialize;

use super::lm::{levenberg_marquardt, FitProblem, FitResult, FitStatus, Model};
use crate::error::FitError;
use crate::spectra::lorentzian;

/// baseline − Σ_k depth_k·L(ν; center_k, fwhm_k).
/// Layout: [baseline, (center, fwhm, depth) per peak].
#[derive(Debug, Clone, Copy)]
pub struct LorentzianDips {
    pub n: usize,
}

impl Model for LorentzianDips {
    fn n_params(&self) -> usize {
        1 + 3 * self.n
    }

    fn eval(&self, nu: f64, q: &[f64]) -> f64 {
        q[0] - (0..self.n)
            .map(|k| q[3 * k + 3] * lorentzian(nu, q[3 * k + 1], q[3 * k + 2]))
            .sum::<f64>()
    }

    fn gradient(&self, nu: f64, q: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for k in 0..self.n {
            let (c, w, d) = (q[3 * k + 1], q[3 * k + 2], q[3 * k + 3]);
            let x = 2.0 * (nu - c) / w;
            let l = 1.0 / (1.0 + x * x);
            // ∂L/∂x = −2x L².
            let dl_dx = -2.0 * x * l * l;
            out[3 * k + 1] = -d * dl_dx * (-2.0 / w);
            out[3 * k + 2] = -d * dl_dx * (-x / w);
            out[3 * k + 3] = -l;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedPeak {
    #[serde(rename = "center_MHz")]
    pub center: f64,
    #[serde(rename = "center_err_MHz")]
    pub center_err: f64,
    #[serde(rename = "fwhm_MHz")]
    pub fwhm: f64,
    #[serde(rename = "fwhm_err_MHz")]
    pub fwhm_err: f64,
    pub depth: f64,
    pub depth_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdmrFit {
    pub peaks: Vec<FittedPeak>,
    pub baseline: f64,
    pub chi2_reduced: f64,
    pub status: FitStatus,
    #[serde(skip)]
    pub result: FitResult,
}

/// Seeds: baseline from the upper decile, dips picked greedily from the
/// residual below baseline with a peeling step after each pick.
fn seed(x: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let base = sorted[(sorted.len() * 9) / 10];
    let span = x[x.len() - 1] - x[0];
    let mut resid: Vec<f64> = y.iter().map(|v| base - v).collect();
    let mut q = vec![base];
    for _ in 0..n {
        let (i, depth) = resid
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let half = 0.5 * depth;
        let mut lo = i;
        while lo > 0 && resid[lo] > half {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < resid.len() && resid[hi] > half {
            hi += 1;
        }
        let fwhm = (x[hi] - x[lo]).max(span / x.len() as f64 * 2.0);
        let depth = depth.max(1e-12);
        q.extend([x[i], fwhm, depth]);
        for (r, &nu) in resid.iter_mut().zip(x) {
            *r -= depth * lorentzian(nu, x[i], fwhm);
        }
    }
    q
}

/// Fits n_peaks Lorentzian dips below a flat baseline; peaks come back
/// sorted by center.
pub fn fit_odmr(x: &[f64], y: &[f64], n_peaks: usize, sigma: Option<Vec<f64>>) -> Result<OdmrFit, FitError> {
    if n_peaks == 0 {
        return Err(FitError::InvalidProblem("n_peaks must be >= 1".into()));
    }
    if x.len() != y.len() || x.len() < 3 * n_peaks + 3 {
        return Err(FitError::InvalidProblem("not enough ODMR samples".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FitError::InvalidProblem(
            "frequency axis must be strictly ascending".into(),
        ));
    }
    let init = seed(x, y, n_peaks);
    let span = x[x.len() - 1] - x[0];
    let mut prob = FitProblem::new(LorentzianDips { n: n_peaks }, x.to_vec(), y.to_vec(), init);
    prob.sigma = sigma;
    for k in 0..n_peaks {
        (prob.lower[3 * k + 1], prob.upper[3 * k + 1]) = (x[0], x[x.len() - 1]);
        (prob.lower[3 * k + 2], prob.upper[3 * k + 2]) = (1e-6 * span, 10.0 * span);
        prob.lower[3 * k + 3] = 0.0;
        prob.initial[3 * k + 2] = prob.initial[3 * k + 2].clamp(prob.lower[3 * k + 2], prob.upper[3 * k + 2]);
    }
    let res = levenberg_marquardt(&prob)?;
    let mut peaks: Vec<FittedPeak> = (0..n_peaks)
        .map(|k| FittedPeak {
            center: res.params[3 * k + 1],
            center_err: res.errors[3 * k + 1],
            fwhm: res.params[3 * k + 2],
            fwhm_err: res.errors[3 * k + 2],
            depth: res.params[3 * k + 3],
            depth_err: res.errors[3 * k + 3],
        })
        .collect();
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(OdmrFit {
        peaks,
        baseline: res.params[0],
        chi2_reduced: res.chi2_reduced,
        status: res.status,
        result: res,
    })
}
