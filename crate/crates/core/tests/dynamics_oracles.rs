use std::f64::consts::PI;

use nvdressed::dynamics::{
    ensemble_decay, ensemble_strong_mc, ensemble_t2_strong, mc_dephasing_oracle, predict_t2,
    predict_t2_partial_squared, uniform_grid, DetuningDistribution, MonteCarloConfig, NoiseModel, Scenario,
};
use nvdressed::fitting::fid::fit_stretched_exponential;
use nvdressed::spin::PhysicalConstants;

const E_GAP: f64 = 6.42;
const SLOW: f64 = 1e4;

fn gaussian_t2(grid: &[f64], env: &[f64]) -> f64 {
    fit_stretched_exponential(grid, env, Some(2.0)).unwrap().params[1]
}

fn slow(sigma_b: f64, sx: f64, sy: f64) -> NoiseModel {
    NoiseModel {
        sigma_b_z: Some(sigma_b),
        sigma_pi_xp: Some(sx),
        sigma_pi_yp: Some(sy),
        tau_c_b: Some(SLOW),
        tau_c_pi: Some(SLOW),
        ..Default::default()
    }
}

#[test]
fn slow_bath_dressed_and_strong_match_closed_form() {
    let c = PhysicalConstants::default();
    let cases = [
        (Scenario::Dressed, slow(0.001, 5882.0, 0.0)),
        (Scenario::StrongAxial { b_par_mt: 10.0 }, slow(0.005, 1000.0, 1000.0)),
    ];
    for (k, (s, n)) in cases.iter().enumerate() {
        let want = predict_t2(s, n, &c, E_GAP).unwrap();
        let grid = uniform_grid(2.0 * want, want / 40.0).unwrap();
        let env = mc_dephasing_oracle(s, n, &c, E_GAP, &grid, &MonteCarloConfig::new(20_000, 40 + k as u64)).unwrap();
        let got = gaussian_t2(&grid, &env);
        assert!((got / want - 1.0).abs() < 0.05, "{}: {got} vs {want}", s.name());
    }
}

#[test]
fn partial_printed_weights_versus_linear_map() {
    // The oracle follows the linear frequency map, whose variance carries
    // cos²γ and sin²γ. The printed closed form weights the variances by
    // cos γ and sin γ, which gives a shorter T2 for any 0 < γ < π/2.
    let c = PhysicalConstants::default();
    let gamma = PI / 4.0;
    let n = slow(0.004, 0.0, 5000.0);
    let s = Scenario::Partial { gamma };
    let squared = predict_t2_partial_squared(gamma, &n, &c).unwrap();
    let printed = predict_t2(&s, &n, &c, E_GAP).unwrap();
    let grid = uniform_grid(2.0 * squared, squared / 40.0).unwrap();
    let env = mc_dephasing_oracle(&s, &n, &c, E_GAP, &grid, &MonteCarloConfig::new(20_000, 7)).unwrap();
    let got = gaussian_t2(&grid, &env);
    assert!((got / squared - 1.0).abs() < 0.05, "{got} vs {squared}");
    // At γ = π/4 the two forms differ by exactly 2^{1/4}.
    assert!((squared / printed - 2f64.powf(0.25)).abs() < 1e-12);
}

#[test]
fn fast_bath_narrows_toward_exponential() {
    let c = PhysicalConstants::default();
    let n = NoiseModel {
        sigma_b_z: Some(0.04),
        sigma_pi_xp: Some(0.0),
        sigma_pi_yp: Some(0.0),
        tau_c_b: Some(0.01),
        tau_c_pi: Some(0.01),
        ..Default::default()
    };
    let grid = uniform_grid(4.0, 0.02).unwrap();
    let s = Scenario::StrongAxial { b_par_mt: 10.0 };
    let env = mc_dephasing_oracle(&s, &n, &c, E_GAP, &grid, &MonteCarloConfig::new(10_000, 3)).unwrap();
    let fit = fit_stretched_exponential(&grid, &env, None).unwrap();
    assert!(fit.params[2] < 1.3, "p = {}", fit.params[2]);
    // Motional-narrowing rate (2πγ_eσ)²τ_c.
    let rate = (2.0 * PI * c.gamma_e * 0.04).powi(2) * 0.01;
    assert!(
        (fit.params[1] * rate - 1.0).abs() < 0.15,
        "T2 {} vs {}",
        fit.params[1],
        1.0 / rate
    );
}

#[test]
fn strong_ensemble_closed_form_matches_sampled_average() {
    let c = PhysicalConstants::default();
    let s_ens = 0.004;
    let t2 = ensemble_t2_strong(s_ens, &c);
    let grid = uniform_grid(3.0 * t2, t2 / 20.0).unwrap();
    let n = NoiseModel {
        sigma_b_ens: Some(s_ens),
        ..Default::default()
    };
    let closed = ensemble_decay(
        &Scenario::StrongAxial { b_par_mt: 10.0 },
        &n,
        &c,
        &DetuningDistribution::Delta { delta0: 0.0 },
        &grid,
    )
    .unwrap();
    let sampled = ensemble_strong_mc(s_ens, &c, &grid, 200_000, 5).unwrap();
    for (a, b) in closed.iter().zip(&sampled) {
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
    }
}
