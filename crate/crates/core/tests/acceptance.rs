//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nvdressed::dressed::{dressed_trace_distances, sz_expectation, BranchAnalysis, WorkingPoint};
use nvdressed::dynamics::{
    ensemble_decay, ensemble_strong_mc, ensemble_t2_dressed, ensemble_t2_strong, fid_signal, mc_dephasing_oracle,
    measured_conditions, predict_t2, uniform_grid, DetuningDistribution, MonteCarloConfig, NoiseModel, Scenario,
    TableRow, DEFAULT_STRETCH,
};
use nvdressed::eigen::{
    cubic_eigenvalues_exact, diagonalize_hermitian, dressed_minus, dressed_plus, perturbative_spectrum,
    PerturbationParams,
};
use nvdressed::fitting::fid::{fit_fid, fit_stretched_exponential, FidFitOptions};
use nvdressed::polarization::{coupling_to_zero, driven_pair, rwa_hamiltonian, DriveConfig};
use nvdressed::spectra::{
    family_projection, nv_families, reconstruct_transverse_pi, resonance_frequencies, zero_field_splitting, Branch,
};
use nvdressed::spin::{transverse_electronic_hamiltonian, FieldConfiguration, FieldPreset, PhysicalConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(n: usize, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    let timing = if in_time {
        String::new()
    } else {
        format!(" (over time budget {budget:?})")
    };
    println!(
        "criterion {n:>2} {title}: {} [{:.2}s] {}{timing}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        out.detail
    );
    pass
}

fn c() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn main_text() -> FieldConfiguration {
    FieldPreset::MainText.fields()
}

fn eigenstructure() -> Outcome {
    let c = c();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b_max = 0.199 * c.d_gs / c.gamma_e;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (b, phb) = (rng.gen_range(0.0..b_max), rng.gen_range(-PI..PI));
        let (p, php) = (rng.gen_range(0.0..4e5), rng.gen_range(-PI..PI));
        let f =
            FieldConfiguration::new([b * phb.cos(), b * phb.sin(), 0.0], [p * php.cos(), p * php.sin(), 0.0]).unwrap();
        let exact = cubic_eigenvalues_exact(&c, &f);
        let num = diagonalize_hermitian(&transverse_electronic_hamiltonian(&c, &f)).unwrap();
        for (e, v) in exact.iter().zip(&num.values) {
            worst = worst.max((e - v).abs());
        }
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max |cubic - Jacobi| = {worst:.2e} MHz over 1000 configurations"),
    }
}

fn perturbation_order() -> Outcome {
    let c = c();
    let f = main_text();
    let p0 = PerturbationParams::from_fields(&c, &f);
    let (phb, php) = (f.phi_b(), f.phi_pi());
    let zetas = [0.16, 0.08, 0.04, 0.02, 0.01];
    let errs: Vec<f64> = zetas
        .iter()
        .map(|&z| {
            let p = PerturbationParams::from_zeta_r(z, p0.r, c.d_gs, 0.0);
            let b = p.b_script_perp / c.gamma_e;
            let pi = p.e_script / c.d_perp;
            let g = FieldConfiguration::new(
                [b * phb.cos(), b * phb.sin(), 0.0],
                [pi * php.cos(), pi * php.sin(), 0.0],
            )
            .unwrap();
            let s = perturbative_spectrum(&p, phb, php).unwrap();
            let exact = cubic_eigenvalues_exact(&c, &g);
            [s.e0, s.e_minus, s.e_plus]
                .iter()
                .zip(exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: min >= 6.0,
        detail: format!(
            "R = {:.3}, errors {:?} MHz, min ratio per halving {min:.2}",
            p0.r,
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        ),
    }
}

fn lower_sz(c: &PhysicalConstants, f: &FieldConfiguration, b_par: f64, iz: i8) -> f64 {
    let b = BranchAnalysis::new(c, &f.with_b_par(b_par)).unwrap();
    sz_expectation(&b.lower_state(iz)).unwrap()
}

fn fig1a() -> Outcome {
    let c = c();
    let f = main_text();
    let e_gap = perturbative_spectrum(&PerturbationParams::from_fields(&c, &f), f.phi_b(), f.phi_pi())
        .unwrap()
        .e_gap;
    let grid: Vec<f64> = (0..=400).map(|k| -0.4 + 0.002 * k as f64).collect();
    let mut details = Vec::new();
    let mut pass = true;
    for iz in [1i8, -1] {
        // The sweep brackets the zero of ⟨S_z⟩ on the lower branch; bisection refines it.
        let sz: Vec<f64> = grid.iter().map(|&b| lower_sz(&c, &f, b, iz)).collect();
        let expected = -(iz as f64) * c.a_par / c.gamma_e;
        let k = (0..grid.len() - 1)
            .filter(|&k| sz[k].signum() != sz[k + 1].signum())
            .min_by(|&a, &b| (grid[a] - expected).abs().total_cmp(&(grid[b] - expected).abs()));
        let Some(k) = k else {
            details.push(format!("Iz={iz:+}: no dressed point found"));
            pass = false;
            continue;
        };
        let (mut lo, mut hi) = (grid[k], grid[k + 1]);
        let s_lo = sz[k];
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lower_sz(&c, &f, mid, iz).signum() == s_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b0 = 0.5 * (lo + hi);
        let shift_khz = 1e3 * c.gamma_e * (b0 - expected);
        let br = BranchAnalysis::new(&c, &f.with_b_par(b0)).unwrap();
        let gap = br.upper_energy(iz) - br.lower_energy(iz);
        let gap_err = (gap / e_gap - 1.0).abs();
        pass &= shift_khz.abs() < 2.0 && gap_err < 0.10;
        details.push(format!(
            "Iz={iz:+}: dressed at {b0:+.6} mT (offset {shift_khz:+.3} kHz), gap {gap:.4} vs E_gap {e_gap:.4} MHz ({:.1}%)",
            100.0 * gap_err
        ));
    }
    Outcome {
        pass,
        detail: details.join("; "),
    }
}

fn trace_distance() -> Outcome {
    let c = c();
    let f = main_text();
    let bs: Vec<f64> = (0..=20).map(|k| 0.01 * k as f64).collect();
    let d0: Vec<f64> = bs
        .iter()
        .map(|&b| dressed_trace_distances(&c, &f.with_b_par(b)).unwrap()[1])
        .collect();
    let dn: Vec<f64> = bs
        .iter()
        .map(|&b| dressed_trace_distances(&c, &f.with_b_par(-b)).unwrap()[1])
        .collect();
    let mono = d0.windows(2).all(|w| w[1] > w[0]) && dn.windows(2).all(|w| w[1] > w[0]);
    let at_zero = d0[0];
    Outcome {
        pass: at_zero < 0.02 && mono,
        detail: format!(
            "D(Iz=0) at B_par=0 is {at_zero:.4} (limit 0.02); monotone over |B_par| in [0, 0.2]: {mono}; D at 0.2 mT = {:.3}",
            d0[20]
        ),
    }
}

fn resonance_structure() -> Outcome {
    let c = c();
    let fa = main_text().with_b_par(WorkingPoint::A.b_par(&c));
    let fb = main_text().with_b_par(WorkingPoint::B.b_par(&c));
    let ra = resonance_frequencies(&c, &fa, Branch::Lower).unwrap();
    let rb = resonance_frequencies(&c, &fb, Branch::Lower).unwrap();
    let dres = rb.find_iz(-1).map(|r| r.freq).unwrap_or(f64::NAN);
    let pd2 = rb.find_iz(0).map(|r| r.freq).unwrap_or(f64::NAN);
    let gap = dres - pd2;
    let gap_err = (gap / 0.532 - 1.0).abs();
    let fa_lines: Vec<String> = ra.frequencies().iter().map(|v| format!("{v:.4}")).collect();
    Outcome {
        pass: ra.len() == 2 && rb.len() == 3 && gap_err <= 0.15,
        detail: format!(
            "point A: {} lines {fa_lines:?}; point B: {} lines; dres - p-dres2 = {:.1} kHz vs 532 kHz ({:.0}% off)",
            ra.len(),
            rb.len(),
            1e3 * gap,
            100.0 * gap_err
        ),
    }
}

fn zero_field() -> Outcome {
    let s = zero_field_splitting(&main_text(), &c());
    Outcome {
        pass: (5.0..=5.6).contains(&s),
        detail: format!("2 d_perp |Pi_perp| = {s:.4} MHz"),
    }
}

fn ensemble_dichotomy() -> Outcome {
    let c = c();
    let n = NoiseModel {
        sigma_b_ens: Some(0.004),
        sigma_pi_xp: Some(5000.0),
        ..Default::default()
    };
    let delta = DetuningDistribution::Delta { delta0: 0.0 };
    let ts = ensemble_t2_strong(0.004, &c);
    let td = ensemble_t2_dressed(5000.0, &c);
    let gs = uniform_grid(4.0 * ts, ts / 50.0).unwrap();
    let gd = uniform_grid(2.5 * td, td / 50.0).unwrap();
    let strong = ensemble_decay(&Scenario::StrongAxial { b_par_mt: 10.0 }, &n, &c, &delta, &gs).unwrap();
    let dressed = ensemble_decay(&Scenario::Dressed, &n, &c, &delta, &gd).unwrap();
    let sampled = ensemble_strong_mc(0.004, &c, &gs, 200_000, 17).unwrap();
    let ps = fit_stretched_exponential(&gs, &strong, None).unwrap().params[2];
    let pd = fit_stretched_exponential(&gd, &dressed, None).unwrap().params[2];
    let pm = fit_stretched_exponential(&gs, &sampled, None).unwrap().params[2];
    Outcome {
        pass: (0.95..=1.05).contains(&ps) && (1.9..=2.0).contains(&pd) && (0.95..=1.05).contains(&pm),
        detail: format!("p(strong) = {ps:.4}, p(dressed) = {pd:.4}, p(strong, sampled sigma) = {pm:.4}"),
    }
}

fn monte_carlo() -> Outcome {
    let c = c();
    let slow = |sb: f64, sx: f64, sy: f64| NoiseModel {
        sigma_b_z: Some(sb),
        sigma_pi_xp: Some(sx),
        sigma_pi_yp: Some(sy),
        tau_c_b: Some(1e4),
        tau_c_pi: Some(1e4),
        ..Default::default()
    };
    let cases = [
        (Scenario::Dressed, slow(0.001, 5882.0, 0.0)),
        (Scenario::StrongAxial { b_par_mt: 10.0 }, slow(0.005, 1000.0, 1000.0)),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (k, (s, n)) in cases.iter().enumerate() {
        let want = predict_t2(s, n, &c, 6.42).unwrap();
        let grid = uniform_grid(2.0 * want, want / 40.0).unwrap();
        let env = mc_dephasing_oracle(s, n, &c, 6.42, &grid, &MonteCarloConfig::new(100_000, 100 + k as u64)).unwrap();
        let got = fit_stretched_exponential(&grid, &env, Some(2.0)).unwrap().params[1];
        let err = (got / want - 1.0).abs();
        pass &= err < 0.05;
        details.push(format!(
            "{}: MC {got:.4} us vs closed form {want:.4} us ({:.2}%)",
            s.name(),
            100.0 * err
        ));
    }
    Outcome {
        pass,
        detail: details.join("; "),
    }
}

/// Maximum free-evolution delay of the FID sequence, µs.
const FID_WINDOW: f64 = 7.5;

struct RoundTrip {
    all_ok: usize,
    hits: Vec<Vec<usize>>,
}

fn round_trip(rows: &[TableRow], tau_max: f64, noise_level: f64, realizations: usize) -> RoundTrip {
    let grid = uniform_grid(tau_max, 0.01).unwrap();
    let noise = Normal::new(0.0, noise_level).unwrap();
    let mut all_ok = 0;
    let mut hits: Vec<Vec<usize>> = rows.iter().map(|r| vec![0; r.entries.len()]).collect();
    for seed in 0..realizations {
        let mut ok = true;
        for (ri, row) in rows.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * seed as u64 + ri as u64);
            let clean = fid_signal(&row.components(DEFAULT_STRETCH), &grid);
            let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let mut opts = FidFitOptions::new(row.entries.len(), Some(DEFAULT_STRETCH));
            opts.seeds = row.entries.iter().map(|e| e.delta).collect();
            opts.on_resonance = (0..row.entries.len())
                .filter(|&k| row.entries[k].delta == 0.0)
                .collect();
            let Ok(fit) = fit_fid(&grid, &y, &opts) else {
                ok = false;
                continue;
            };
            let mut order: Vec<usize> = (0..row.entries.len()).collect();
            order.sort_by(|&a, &b| row.entries[a].delta.abs().total_cmp(&row.entries[b].delta.abs()));
            for (comp, &ei) in fit.components.iter().zip(&order) {
                let e = &row.entries[ei];
                if (comp.t2 - e.t2).abs() <= e.t2_err {
                    hits[ri][ei] += 1;
                } else {
                    ok = false;
                }
            }
        }
        all_ok += ok as usize;
    }
    RoundTrip { all_ok, hits }
}

fn condition_round_trip() -> Outcome {
    let c = c();
    let fb = main_text().with_b_par(WorkingPoint::B.b_par(&c));
    let rb = resonance_frequencies(&c, &fb, Branch::Lower).unwrap();
    let f = |iz| rb.find_iz(iz).unwrap().freq;
    let (d1, d2) = (f(-1) - f(0), f(0) - f(1));
    let rows = measured_conditions(d1, d2);
    let n = 100;
    let main = round_trip(&rows, FID_WINDOW, 0.01, n);
    let worst = rows
        .iter()
        .zip(&main.hits)
        .flat_map(|(r, h)| {
            r.entries
                .iter()
                .zip(h)
                .map(move |(e, k)| (*k, format!("{} / {}", r.label, e.state)))
        })
        .min_by_key(|(k, _)| *k)
        .unwrap();
    // Reported alongside: the shorter 6 µs window and the 2% noise level.
    let short = round_trip(&rows, 6.0, 0.01, n);
    let noisy = round_trip(&rows, FID_WINDOW, 0.02, n);
    Outcome {
        pass: main.all_ok * 10 >= n * 9,
        detail: format!(
            "{}/{n} realizations with every T2 inside its interval ({FID_WINDOW} us window, 1% noise, Delta1 {d1:.3}, Delta2 {d2:.3} MHz); \
             lowest single-entry rate {}% ({}); for reference: 6 us window {}/{n}, 2% noise {}/{n}",
            main.all_ok, worst.0, worst.1, short.all_ok, noisy.all_ok
        ),
    }
}

fn polarization() -> Outcome {
    let c = c();
    let mut worst_linear: f64 = 0.0;
    let mut worst_ellip: f64 = 0.0;
    let mut circular_ok = true;
    for theta in [0.0, 0.37, -1.2, 2.8] {
        let h = rwa_hamiltonian(&DriveConfig::linear(1.0, theta, 2876.0).unwrap(), &c);
        worst_linear = worst_linear.max(coupling_to_zero(&h, &dressed_minus(theta)).norm());
        let hc = rwa_hamiltonian(&DriveConfig::circular(1.0, theta, 2876.0).unwrap(), &c);
        let zeros = [hc[(0, 1)].norm(), hc[(1, 2)].norm()]
            .iter()
            .filter(|v| **v < 1e-12)
            .count();
        circular_ok &= zeros == 1;
        // A circular drive couples |0⟩ to one bare state, equally to |±⟩_θ.
        let (a, b) = (
            coupling_to_zero(&hc, &dressed_minus(theta)).norm(),
            coupling_to_zero(&hc, &dressed_plus(theta)).norm(),
        );
        circular_ok &= (a - b).abs() < 1e-12;
        for (wt, wp) in [(1.0, 0.3), (0.4, 0.9), (0.7, 0.7), (0.25, 0.0)] {
            let d = DriveConfig::new(wt, wp, theta, 2876.0).unwrap();
            let h = rwa_hamiltonian(&d, &c);
            let pair = driven_pair(&d).unwrap();
            let dark = coupling_to_zero(&h, &pair.minus).norm();
            let bright = coupling_to_zero(&h, &pair.plus).norm();
            worst_ellip = worst_ellip.max(dark).max((bright - (wt * wt + wp * wp).sqrt()).abs());
        }
    }
    Outcome {
        pass: worst_linear < 1e-12 && worst_ellip < 1e-12 && circular_ok,
        detail: format!(
            "linear dark coupling {worst_linear:.1e}; circular zeroes exactly one coupling: {circular_ok}; elliptical identity residual {worst_ellip:.1e}"
        ),
    }
}

fn magnetometry() -> Outcome {
    let c = c();
    let sup = FieldPreset::Supplementary.fields();
    let lab = nv_families()[0].to_lab(sup.b_mt());
    let proj = family_projection(lab);
    let b1 = proj[0].b_perp;
    let b_err = (b1 / 5.08 - 1.0).abs();
    let mut worst: f64 = 0.0;
    for f in [main_text(), sup] {
        let s = zero_field_splitting(&f, &c);
        let (px, py) = reconstruct_transverse_pi(s, f.phi_pi(), &c).unwrap();
        let [ox, oy, _] = f.pi_vcm();
        worst = worst.max(((px - ox).hypot(py - oy)) / f.pi_perp());
    }
    Outcome {
        pass: b_err < 0.005 && worst < 1e-9,
        detail: format!(
            "family-1 |B_perp| = {b1:.4} mT ({:.2}% from 5.08); round-trip relative error {worst:.1e}",
            100.0 * b_err
        ),
    }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "eigenstructure fidelity", s(1), eigenstructure),
        run(2, "perturbation order", s(1), perturbation_order),
        run(3, "energy diagram dressed points", s(5), fig1a),
        run(4, "trace distance", s(5), trace_distance),
        run(5, "resonance structure", s(1), resonance_structure),
        run(6, "zero-field splitting", s(1), zero_field),
        run(7, "ensemble decay dichotomy", s(10), ensemble_dichotomy),
        run(8, "Monte-Carlo vs closed form", s(60), monte_carlo),
        run(9, "measured-condition round trip", s(120), condition_round_trip),
        run(10, "polarization selection", s(1), polarization),
        run(11, "magnetometry round trip", s(1), magnetometry),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
