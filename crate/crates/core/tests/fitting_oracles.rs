use std::f64::consts::PI;

use nvdressed::dynamics::{fid_signal, uniform_grid, DecayComponent, DEFAULT_STRETCH};
use nvdressed::fitting::fid::{fit_fid, fit_stretched_exponential, FidFitOptions};
use nvdressed::fitting::lm::{gradient_at, levenberg_marquardt, FitProblem, FitStatus, FnModel};
use nvdressed::fitting::odmr::fit_odmr;
use nvdressed::spectra::lorentzian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy(y: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    y.iter().map(|v| v + n.sample(&mut rng)).collect()
}

#[test]
fn linear_model_matches_normal_equations() {
    let x: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
    let y = noisy(&x.iter().map(|v| 1.7 * v - 0.3).collect::<Vec<_>>(), 0.1, 5);
    // Closed-form ordinary least squares.
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let m = FnModel {
        n: 2,
        f: |x: f64, p: &[f64]| p[0] * x + p[1],
    };
    let res = levenberg_marquardt(&FitProblem::new(m, x, y, vec![0.0, 0.0])).unwrap();
    assert_eq!(res.status, FitStatus::Converged);
    assert!((res.params[0] - slope).abs() < 1e-10);
    assert!((res.params[1] - icpt).abs() < 1e-10, "{:?} vs {icpt} {slope}", res);
}

#[test]
fn noiseless_exponential_is_recovered() {
    let x: Vec<f64> = (0..200).map(|k| 0.03 * k as f64).collect();
    let y: Vec<f64> = x.iter().map(|t| 0.8 * (-t / 1.3).exp()).collect();
    let res = fit_stretched_exponential(&x, &y, Some(1.0)).unwrap();
    assert!((res.params[0] / 0.8 - 1.0).abs() < 1e-6);
    assert!((res.params[1] / 1.3 - 1.0).abs() < 1e-6);
}

#[test]
fn converged_fit_is_stationary() {
    let grid = uniform_grid(6.0, 0.01).unwrap();
    let comps = [DecayComponent::canonical(1.41, DEFAULT_STRETCH, 0.532)];
    let y = noisy(&fid_signal(&comps, &grid), 0.01, 9);
    let m = FnModel {
        n: 4,
        f: |t: f64, q: &[f64]| q[0] + q[1] * (-(t / q[2]).powf(1.24)).exp() * (2.0 * PI * q[3] * t).cos(),
    };
    let prob = FitProblem::new(m, grid, y, vec![0.5, -0.4, 1.2, 0.55]);
    let res = levenberg_marquardt(&prob).unwrap();
    let g = gradient_at(&prob, &res.params).unwrap();
    let rnorm = res.cost.sqrt();
    assert!(g.iter().all(|v| v.abs() < 1e-6 * rnorm), "{g:?} vs {rnorm}");
}

fn single_fit(t2: f64, n_rep: usize, seed: u64) -> (f64, f64) {
    let base = uniform_grid(6.0, 0.02).unwrap();
    let mut x = Vec::new();
    // Replicated samples are offset by a tiny amount to keep the axis ascending.
    for (k, &t) in base.iter().enumerate() {
        for r in 0..n_rep {
            let _ = k;
            x.push(t + 1e-9 * r as f64);
        }
    }
    let comps = [DecayComponent::canonical(t2, DEFAULT_STRETCH, 0.8)];
    let y = noisy(&fid_signal(&comps, &x), 0.01, seed);
    let mut opts = FidFitOptions::new(1, Some(DEFAULT_STRETCH));
    opts.seeds = vec![0.8];
    let f = fit_fid(&x, &y, &opts).unwrap();
    (f.components[0].t2, f.components[0].t2_err)
}

#[test]
fn uncertainties_shrink_like_inverse_sqrt_n() {
    let (_, e1) = single_fit(1.41, 1, 21);
    let (_, e4) = single_fit(1.41, 4, 21);
    let ratio = e1 / e4;
    assert!((ratio - 2.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn single_component_fit_is_unbiased() {
    // SNR 50: amplitude 0.5, noise 0.01.
    let truth = 1.41;
    let mean: f64 = (0..200).map(|s| single_fit(truth, 1, 1000 + s).0).sum::<f64>() / 200.0;
    assert!((mean / truth - 1.0).abs() < 0.02, "mean {mean}");
}

#[test]
fn point_a_two_components_within_ten_percent() {
    let grid = uniform_grid(6.0, 0.01).unwrap();
    let comps = [
        DecayComponent {
            y0: 0.25,
            a: -0.25,
            t2: 2.6,
            p: DEFAULT_STRETCH,
            delta: 0.0,
            phi: 0.0,
        },
        DecayComponent {
            y0: 0.25,
            a: -0.25,
            t2: 1.41,
            p: DEFAULT_STRETCH,
            delta: 0.532,
            phi: 0.0,
        },
    ];
    let y = noisy(&fid_signal(&comps, &grid), 0.01, 77);
    let mut opts = FidFitOptions::new(2, Some(DEFAULT_STRETCH));
    opts.seeds = vec![0.0];
    opts.on_resonance = vec![0];
    let f = fit_fid(&grid, &y, &opts).unwrap();
    assert!((f.components[0].t2 / 2.6 - 1.0).abs() < 0.10, "{:?}", f.components);
    assert!((f.components[1].t2 / 1.41 - 1.0).abs() < 0.10, "{:?}", f.components);
    assert!((f.components[1].delta - 0.532).abs() < 0.01);
}

#[test]
fn point_b_three_components_within_fifteen_percent() {
    let grid = uniform_grid(6.0, 0.01).unwrap();
    let truth = [(2.3, 0.094), (1.43, 0.674), (0.89, 2.15)];
    let comps: Vec<DecayComponent> = truth
        .iter()
        .map(|&(t2, d)| DecayComponent {
            y0: 0.5 / 3.0,
            a: -0.5 / 3.0,
            t2,
            p: DEFAULT_STRETCH,
            delta: d,
            phi: 0.0,
        })
        .collect();
    let y = noisy(&fid_signal(&comps, &grid), 0.01, 78);
    // Detunings from the spectrum alone.
    let f = fit_fid(&grid, &y, &FidFitOptions::new(3, Some(DEFAULT_STRETCH))).unwrap();
    for (c, (t2, d)) in f.components.iter().zip(truth) {
        assert!((c.t2 / t2 - 1.0).abs() < 0.15, "{:?}", f.components);
        assert!((c.delta - d).abs() < 0.03, "{:?}", f.components);
    }
}

#[test]
fn strong_axial_free_p_near_generation_value() {
    let grid = uniform_grid(6.0, 0.01).unwrap();
    let comps = [DecayComponent::canonical(0.88, 1.28, 2.16)];
    let y = noisy(&fid_signal(&comps, &grid), 0.01, 79);
    let f = fit_fid(&grid, &y, &FidFitOptions::new(1, None)).unwrap();
    assert!((f.p - 1.28).abs() < 0.1, "p = {}", f.p);
    assert!((f.components[0].t2 / 0.88 - 1.0).abs() < 0.1);
}

#[test]
fn components_sorted_by_detuning() {
    let grid = uniform_grid(6.0, 0.01).unwrap();
    let comps = [
        DecayComponent {
            y0: 0.25,
            a: -0.25,
            t2: 1.0,
            p: 1.24,
            delta: 1.9,
            phi: 0.0,
        },
        DecayComponent {
            y0: 0.25,
            a: -0.25,
            t2: 2.0,
            p: 1.24,
            delta: 0.6,
            phi: 0.0,
        },
    ];
    let y = fid_signal(&comps, &grid);
    let f = fit_fid(&grid, &y, &FidFitOptions::new(2, Some(1.24))).unwrap();
    assert!(f.components[0].delta < f.components[1].delta);
    assert!((f.components[0].t2 - 2.0).abs() < 1e-6);
}

fn dips(x: &[f64], peaks: &[(f64, f64, f64)]) -> Vec<f64> {
    x.iter()
        .map(|&nu| 1.0 - peaks.iter().map(|&(c, w, d)| d * lorentzian(nu, c, w)).sum::<f64>())
        .collect()
}

#[test]
fn single_lorentzian_exact_recovery() {
    let x: Vec<f64> = (0..401).map(|k| 2868.0 + 0.02 * k as f64).collect();
    let y = dips(&x, &[(2871.234, 0.35, 0.02)]);
    let f = fit_odmr(&x, &y, 1, None).unwrap();
    let p = &f.peaks[0];
    assert!((p.center - 2871.234).abs() < 1e-6 * 2871.234);
    assert!((p.fwhm / 0.35 - 1.0).abs() < 1e-6);
    assert!((p.depth / 0.02 - 1.0).abs() < 1e-6);
    assert!((f.baseline - 1.0).abs() < 1e-6);
}

#[test]
fn two_close_lorentzians_at_snr_50() {
    let x: Vec<f64> = (0..601).map(|k| 2875.0 + 0.01 * k as f64).collect();
    let depth = 0.02;
    let y = noisy(
        &dips(&x, &[(2877.2, 0.3, depth), (2877.73, 0.3, depth)]),
        depth / 50.0,
        31,
    );
    let f = fit_odmr(&x, &y, 2, None).unwrap();
    assert!((f.peaks[0].center - 2877.2).abs() < 0.02, "{:?}", f.peaks);
    assert!((f.peaks[1].center - 2877.73).abs() < 0.02, "{:?}", f.peaks);
}

#[test]
fn three_peak_differences_compose() {
    let (n3, n2, n1) = (2875.194, 2876.674, 2877.348);
    let x: Vec<f64> = (0..801).map(|k| 2874.0 + 0.006 * k as f64).collect();
    let y = noisy(
        &dips(&x, &[(n3, 0.3, 0.015), (n2, 0.3, 0.015), (n1, 0.3, 0.015)]),
        0.0003,
        32,
    );
    let f = fit_odmr(&x, &y, 3, None).unwrap();
    let c: Vec<f64> = f.peaks.iter().map(|p| p.center).collect();
    let (d1, d2, d3) = (c[2] - c[1], c[1] - c[0], c[2] - c[0]);
    let err = (f.peaks.iter().map(|p| p.center_err.powi(2)).sum::<f64>()).sqrt();
    assert!((d3 - d1 - d2).abs() <= err.max(1e-12));
    assert!((d1 - (n1 - n2)).abs() < 0.02 && (d2 - (n2 - n3)).abs() < 0.02, "{c:?}");
}
