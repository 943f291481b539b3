//! Bounded Levenberg–Marquardt least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::FitError;

/// A model y = f(x; θ) with an optional analytic gradient.
pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, x: f64, p: &[f64]) -> f64;

    /// ∂f/∂θ_j at x. The default uses central differences.
    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = 1e-6 * p[j].abs().max(1.0);
            q[j] = p[j] + h;
            let up = self.eval(x, &q);
            q[j] = p[j] - h;
            let dn = self.eval(x, &q);
            q[j] = p[j];
            out[j] = (up - dn) / (2.0 * h);
        }
    }
}

/// How noise is estimated when no y-uncertainties are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseEstimate {
    /// Residual variance over all points.
    #[default]
    Global,
    /// Residual variance over the last quarter of the samples, where a
    /// decay has flattened out.
    Tail,
}

#[derive(Debug, Clone)]
pub struct FitProblem<M> {
    pub model: M,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub free: Vec<bool>,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub noise: NoiseEstimate,
}

impl<M: Model> FitProblem<M> {
    /// All parameters free and unbounded.
    pub fn new(model: M, x: Vec<f64>, y: Vec<f64>, initial: Vec<f64>) -> Self {
        let n = initial.len();
        Self {
            model,
            x,
            y,
            sigma: None,
            free: vec![true; n],
            initial,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            noise: NoiseEstimate::Global,
        }
    }

    fn n_free(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let n = self.model.n_params();
        let bad = |m: &str| Err(FitError::InvalidProblem(m.to_string()));
        if [self.initial.len(), self.free.len(), self.lower.len(), self.upper.len()]
            .iter()
            .any(|&l| l != n)
        {
            return bad("parameter vectors do not match the model");
        }
        if self.x.len() != self.y.len() || self.sigma.as_ref().is_some_and(|s| s.len() != self.y.len()) {
            return bad("data arrays differ in length");
        }
        if self.x.len() < self.n_free() + 2 {
            return bad("need at least (free parameters + 2) data points");
        }
        if self.n_free() == 0 {
            return bad("no free parameters");
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return bad("data contain non-finite values");
        }
        if let Some(s) = &self.sigma {
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("uncertainties must be positive");
            }
        }
        for j in 0..n {
            if !(self.lower[j] <= self.initial[j] && self.initial[j] <= self.upper[j]) {
                return bad(&format!("initial value of parameter {j} lies outside its bounds"));
            }
        }
        Ok(())
    }

    fn weight(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| 1.0 / s[i])
    }

    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>, FitError> {
        let r = DVector::from_iterator(
            self.y.len(),
            (0..self.y.len()).map(|i| (self.y[i] - self.model.eval(self.x[i], p)) * self.weight(i)),
        );
        if r.iter().all(|v| v.is_finite()) {
            Ok(r)
        } else {
            Err(FitError::NonFiniteResidual)
        }
    }

    /// Jacobian of the model (not the residual) in weighted units, free columns only.
    fn jacobian(&self, p: &[f64], idx: &[usize]) -> DMatrix<f64> {
        let mut g = vec![0.0; p.len()];
        let mut j = DMatrix::zeros(self.y.len(), idx.len());
        for i in 0..self.y.len() {
            self.model.gradient(self.x[i], p, &mut g);
            let w = self.weight(i);
            for (c, &k) in idx.iter().enumerate() {
                j[(i, c)] = g[k] * w;
            }
        }
        j
    }

    fn project(&self, p: &mut [f64]) {
        for (j, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// 1σ from the linearized covariance; zero for fixed parameters.
    pub errors: Vec<f64>,
    pub chi2_reduced: f64,
    /// Σ r², with r weighted by 1/σ when uncertainties are given.
    pub cost: f64,
    pub status: FitStatus,
    pub iterations: usize,
    /// Noise level used to scale the covariance (1 when σ is supplied).
    pub noise_sigma: f64,
}

pub const MAX_ITERATIONS: usize = 500;
const REL_COST_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e16;

fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

pub fn levenberg_marquardt<M: Model>(prob: &FitProblem<M>) -> Result<FitResult, FitError> {
    prob.validate()?;
    let idx: Vec<usize> = (0..prob.free.len()).filter(|&j| prob.free[j]).collect();
    let mut p = prob.initial.clone();
    let mut r = prob.residuals(&p)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;

    'outer: while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            status = FitStatus::Converged;
            break;
        }
        let j = prob.jacobian(&p, &idx);
        let a = j.transpose() * &j;
        let g = j.transpose() * &r;
        let dmax = a.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut damped = a.clone();
            for k in 0..idx.len() {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12 * dmax);
            }
            let Some(step) = cholesky_solve(&damped, &g) else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    return Err(FitError::SingularJacobian);
                }
                continue;
            };
            let mut trial = p.clone();
            for (c, &k) in idx.iter().enumerate() {
                trial[k] += step[c];
            }
            prob.project(&mut trial);
            let step_norm = idx.iter().map(|&k| (trial[k] - p[k]).powi(2)).sum::<f64>().sqrt();
            let scale = idx.iter().map(|&k| p[k] * p[k]).sum::<f64>().sqrt();
            let trial_r = match prob.residuals(&trial) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        status = FitStatus::Converged;
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial_cost = trial_r.norm_squared();
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                p = trial;
                r = trial_r;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                if rel < REL_COST_TOL || step_norm < STEP_TOL * (scale + STEP_TOL) {
                    status = FitStatus::Converged;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if step_norm < STEP_TOL * (scale + STEP_TOL) || lambda > LAMBDA_MAX {
                // No downhill step is left at any damping.
                status = FitStatus::Converged;
                break 'outer;
            }
        }
    }

    // Undamped polish: removes the residual bias of the last damped step.
    if status == FitStatus::Converged && cost > 0.0 {
        for _ in 0..3 {
            let j = prob.jacobian(&p, &idx);
            let Some(step) = cholesky_solve(&(j.transpose() * &j), &(j.transpose() * &r)) else {
                break;
            };
            let mut trial = p.clone();
            for (c, &k) in idx.iter().enumerate() {
                trial[k] += step[c];
            }
            prob.project(&mut trial);
            match prob.residuals(&trial) {
                Ok(tr) if tr.norm_squared() <= cost * (1.0 + 1e-13) => {
                    cost = tr.norm_squared();
                    r = tr;
                    p = trial;
                }
                _ => break,
            }
        }
    }

    let n = prob.y.len();
    let dof = (n - idx.len()) as f64;
    let noise_sigma = if prob.sigma.is_some() {
        1.0
    } else {
        match prob.noise {
            NoiseEstimate::Global => (cost / dof).sqrt(),
            NoiseEstimate::Tail => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| prob.x[a].total_cmp(&prob.x[b]));
                let tail = &order[n - (n / 4).max(2)..];
                let m = tail.iter().map(|&i| r[i]).sum::<f64>() / tail.len() as f64;
                (tail.iter().map(|&i| (r[i] - m).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt()
            }
        }
    };
    let chi2_reduced = if noise_sigma > 0.0 {
        cost / dof / (noise_sigma * noise_sigma)
    } else {
        0.0
    };

    let j = prob.jacobian(&p, &idx);
    let mut errors = vec![0.0; p.len()];
    match (j.transpose() * &j).try_inverse() {
        Some(cov) if cov.diagonal().iter().all(|v| v.is_finite() && *v >= 0.0) => {
            for (c, &k) in idx.iter().enumerate() {
                errors[k] = cov[(c, c)].sqrt() * noise_sigma;
            }
        }
        _ => {
            status = FitStatus::Singular;
            for &k in &idx {
                errors[k] = f64::INFINITY;
            }
        }
    }
    Ok(FitResult {
        params: p,
        errors,
        chi2_reduced,
        cost,
        status,
        iterations,
        noise_sigma,
    })
}

/// Jᵀr at the given parameters, free columns only (weighted units).
pub fn gradient_at<M: Model>(prob: &FitProblem<M>, p: &[f64]) -> Result<Vec<f64>, FitError> {
    let idx: Vec<usize> = (0..prob.free.len()).filter(|&j| prob.free[j]).collect();
    let r = prob.residuals(p)?;
    Ok((prob.jacobian(p, &idx).transpose() * r).iter().copied().collect())
}

/// A model given by a plain function; gradients by central differences.
pub struct FnModel<F> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> Model for FnModel<F> {
    fn n_params(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        (self.f)(x, p)
    }
}
