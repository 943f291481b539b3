use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nvdressed::dressed::{dressed_trace_distances, WorkingPoint};
use nvdressed::dynamics::{
    fid_signal, mc_dephasing_oracle, measured_conditions, predict_t2, predict_t2_partial_squared, uniform_grid,
    DecayComponent, MonteCarloConfig, NoiseModel, Scenario,
};
use nvdressed::eigen::{diagonalize_hermitian, perturbative_spectrum, PerturbationParams};
use nvdressed::fitting::fid::{fit_fid, fit_stretched_exponential, FidFitOptions};
use nvdressed::fitting::odmr::fit_odmr;
use nvdressed::spectra::{
    family_projection, nv_families, odmr_lineshape, reconstruct_transverse_pi, resonance_frequencies,
    resonance_frequencies_merged, zero_field_splitting, Branch, ResonanceSet,
};
use nvdressed::spin::{full_hamiltonian, FieldConfiguration, PhysicalConstants};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::json;

use crate::io::{read_two_columns, resolve, usage, write_csv, write_json, write_manifest, Resolved, SweepRange};
use crate::{BranchArg, Command, GlobalArgs, ScenarioArg, SimPoint};

pub fn run(g: &GlobalArgs, cmd: &Command, args: Vec<String>) -> Result<()> {
    if g.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(g.threads)
            .build_global()
            .ok();
    }
    let r = resolve(g)?;
    fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    let outputs = match cmd {
        Command::EnergyDiagram { bpar_range } => energy_diagram(g, &r, bpar_range)?,
        Command::TraceDistance { bpar_range } => trace_distance(g, &r, bpar_range)?,
        Command::Spectrum {
            point,
            branch,
            merge_tol,
            linewidth,
            contrast,
            freq_range,
        } => spectrum(
            g,
            &r,
            *point,
            *branch,
            *merge_tol,
            *linewidth,
            *contrast,
            freq_range.as_ref(),
        )?,
        Command::FidSim {
            point,
            components,
            row,
            tau_max,
            dt,
            noise,
            p,
        } => fid_sim(g, &r, *point, components, *row, *tau_max, *dt, *noise, *p)?,
        Command::FidFit {
            input,
            n,
            p,
            seeds,
            on_resonance,
        } => fid_fit(g, input, *n, *p, seeds, on_resonance)?,
        Command::OdmrFit { input, n } => odmr_fit(g, input, *n)?,
        Command::Magnetometry {
            b_lab,
            splitting,
            phi_pi,
        } => magnetometry(g, &r, b_lab.as_deref(), *splitting, *phi_pi)?,
        Command::T2Predict { .. } => t2_predict(g, &r, cmd)?,
    };
    let m = write_manifest(g, cmd.name(), &args, &r, &outputs)?;
    let mut out = std::io::stdout().lock();
    for p in outputs.iter().chain([&m]) {
        // A closed pipe downstream is not an error for us.
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(())
}

fn say(line: String) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn energy_diagram(g: &GlobalArgs, r: &Resolved, range: &SweepRange) -> Result<Vec<PathBuf>> {
    let bs = range.values();
    let rows = bs
        .par_iter()
        .map(|&b| -> Result<Vec<f64>> {
            let sol = diagonalize_hermitian(&full_hamiltonian(&r.constants, &r.fields.with_b_par(b)))?;
            let mut row = vec![b];
            row.extend(&sol.values);
            row.extend(sol.labels.iter().map(|l| l.sz.unwrap_or(f64::NAN)));
            row.extend(sol.labels.iter().map(|l| l.iz.unwrap_or(f64::NAN)));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["B_par_mT".to_string()];
    for prefix in ["E", "Sz", "Iz"] {
        header.extend((1..=9).map(|k| {
            if prefix == "E" {
                format!("E{k}_MHz")
            } else {
                format!("{prefix}{k}")
            }
        }));
    }
    let path = g.out.join("energy_diagram.csv");
    write_csv(&path, &header, &rows)?;
    Ok(vec![path])
}

fn trace_distance(g: &GlobalArgs, r: &Resolved, range: &SweepRange) -> Result<Vec<PathBuf>> {
    let rows = range
        .values()
        .par_iter()
        .map(|&b| -> Result<Vec<f64>> {
            let d = dressed_trace_distances(&r.constants, &r.fields.with_b_par(b))?;
            Ok(vec![b, d[0], d[1], d[2]])
        })
        .collect::<Result<Vec<_>>>()?;
    let header = ["B_par_mT", "D_Iz_minus1", "D_Iz_0", "D_Iz_plus1"].map(String::from);
    let path = g.out.join("trace_distance.csv");
    write_csv(&path, &header, &rows)?;
    Ok(vec![path])
}

fn point_fields(c: &PhysicalConstants, f: &FieldConfiguration, point: Option<WorkingPoint>) -> FieldConfiguration {
    match point {
        Some(p) => f.with_b_par(p.b_par(c)),
        None => *f,
    }
}

#[allow(clippy::too_many_arguments)]
fn spectrum(
    g: &GlobalArgs,
    r: &Resolved,
    point: Option<WorkingPoint>,
    branch: BranchArg,
    merge_tol: f64,
    linewidth: f64,
    contrast: f64,
    freq_range: Option<&SweepRange>,
) -> Result<Vec<PathBuf>> {
    if !(merge_tol >= 0.0 && merge_tol.is_finite()) {
        return Err(usage(format!("--merge-tol must be nonnegative, got {merge_tol}")));
    }
    let f = point_fields(&r.constants, &r.fields, point);
    let branches: &[Branch] = match branch {
        BranchArg::Lower => &[Branch::Lower],
        BranchArg::Upper => &[Branch::Upper],
        BranchArg::Both => &[Branch::Lower, Branch::Upper],
    };
    let mut all = ResonanceSet::default();
    for &b in branches {
        all.resonances
            .extend(resonance_frequencies_merged(&r.constants, &f, b, merge_tol)?.resonances);
    }
    let freqs = all.frequencies();
    let grid = match freq_range {
        Some(s) => s.values(),
        None => {
            let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0;
            let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0;
            SweepRange {
                start: lo,
                stop: hi,
                step: 0.002,
            }
            .values()
        }
    };
    let intensity = odmr_lineshape(&all, linewidth, contrast, &grid)?;
    let rows: Vec<Vec<f64>> = grid.iter().zip(&intensity).map(|(&x, &y)| vec![x, y]).collect();
    let csv_path = g.out.join("spectrum.csv");
    write_csv(&csv_path, &["freq_MHz".into(), "intensity".into()], &rows)?;
    let json_path = g.out.join("resonances.json");
    write_json(&json_path, &all.to_json())?;
    Ok(vec![csv_path, json_path])
}

/// Detunings between the three lower-branch lines at point B:
/// dres − p-dres2 and p-dres2 − p-dres3.
fn point_b_splittings(c: &PhysicalConstants, f: &FieldConfiguration) -> Result<(f64, f64)> {
    let fb = f.with_b_par(WorkingPoint::B.b_par(c));
    let rb = resonance_frequencies(c, &fb, Branch::Lower)?;
    let line = |iz: i8| {
        rb.find_iz(iz)
            .map(|x| x.freq)
            .ok_or_else(|| anyhow::anyhow!("no lower-branch line with I_z = {iz} at point B"))
    };
    Ok((line(-1)? - line(0)?, line(0)? - line(1)?))
}

#[allow(clippy::too_many_arguments)]
fn fid_sim(
    g: &GlobalArgs,
    r: &Resolved,
    point: SimPoint,
    components: &str,
    row: Option<usize>,
    tau_max: f64,
    dt: f64,
    noise: f64,
    p: f64,
) -> Result<Vec<PathBuf>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(usage(format!("--noise must be nonnegative, got {noise}")));
    }
    let comps: Vec<DecayComponent> = if components == "auto" {
        let (d1, d2) = point_b_splittings(&r.constants, &r.fields)?;
        let rows = measured_conditions(d1, d2);
        let k = row.unwrap_or(match point {
            SimPoint::A => 1,
            SimPoint::B => 3,
            SimPoint::Strong => 5,
        });
        if !(1..=rows.len()).contains(&k) {
            return Err(usage(format!("--row must be 1..={}, got {k}", rows.len())));
        }
        if !(1.0..=2.0).contains(&p) {
            return Err(usage(format!("--p must lie in [1, 2], got {p}")));
        }
        rows[k - 1].components(p)
    } else {
        let text = fs::read_to_string(components).with_context(|| format!("reading {components}"))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {components}"))?
    };
    for c in &comps {
        c.validate()?;
    }
    let grid = uniform_grid(tau_max, dt).map_err(|e| usage(e.to_string()))?;
    let mut y = fid_signal(&comps, &grid);
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
        let dist = Normal::new(0.0, noise)?;
        for v in &mut y {
            *v += dist.sample(&mut rng);
        }
    }
    let rows: Vec<Vec<f64>> = grid.iter().zip(&y).map(|(&t, &s)| vec![t, s]).collect();
    let trace = g.out.join("fid_trace.csv");
    write_csv(&trace, &["tau_us".into(), "signal".into()], &rows)?;
    let model = g.out.join("fid_components.json");
    write_json(&model, &serde_json::to_value(&comps)?)?;
    Ok(vec![trace, model])
}

fn fid_fit(
    g: &GlobalArgs,
    input: &Path,
    n: usize,
    p: Option<f64>,
    seeds: &[f64],
    on_resonance: &[usize],
) -> Result<Vec<PathBuf>> {
    if !(1..=3).contains(&n) {
        return Err(usage(format!("--n must be 1, 2 or 3, got {n}")));
    }
    let (x, y) = read_two_columns(input, ["tau_us", "signal"])?;
    let mut opts = FidFitOptions::new(n, p);
    opts.seeds = seeds.to_vec();
    opts.on_resonance = on_resonance.to_vec();
    let fit = fit_fid(&x, &y, &opts)?;
    for (k, c) in fit.components.iter().enumerate() {
        say(format!(
            "component {k}: T2 = {:.4} +/- {:.4} us, delta = {:.4} MHz",
            c.t2, c.t2_err, c.delta
        ));
    }
    let path = g.out.join("fid_fit.json");
    write_json(&path, &fit.to_json())?;
    Ok(vec![path])
}

fn odmr_fit(g: &GlobalArgs, input: &Path, n: usize) -> Result<Vec<PathBuf>> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let (x, y) = read_two_columns(input, ["freq_MHz", "intensity"])?;
    let fit = fit_odmr(&x, &y, n, None)?;
    for pk in &fit.peaks {
        say(format!(
            "peak: {:.6} +/- {:.6} MHz, fwhm {:.4} MHz",
            pk.center, pk.center_err, pk.fwhm
        ));
    }
    let path = g.out.join("odmr_fit.json");
    write_json(&path, &serde_json::to_value(&fit)?)?;
    Ok(vec![path])
}

fn magnetometry(
    g: &GlobalArgs,
    r: &Resolved,
    b_lab: Option<&[f64]>,
    splitting: Option<f64>,
    phi_pi: Option<f64>,
) -> Result<Vec<PathBuf>> {
    let lab = match b_lab {
        Some(&[x, y, z]) => [x, y, z],
        Some(_) => return Err(usage("--b-lab takes three comma-separated values")),
        None => nv_families()[0].to_lab(r.fields.b_mt()),
    };
    let families: Vec<_> = family_projection(lab)
        .iter()
        .map(|p| json!({"family": p.family, "B_par_mT": p.b_par, "B_perp_mT": p.b_perp, "phi_B_rad": p.phi_b}))
        .collect();
    let s = splitting.unwrap_or_else(|| zero_field_splitting(&r.fields, &r.constants));
    let phi = phi_pi.unwrap_or_else(|| r.fields.phi_pi());
    let (px, py) = reconstruct_transverse_pi(s, phi, &r.constants).map_err(|e| usage(e.to_string()))?;
    let report = json!({
        "B_lab_mT": lab,
        "families": families,
        "zero_field_splitting_MHz": s,
        "phi_Pi_rad": phi,
        "Pi_perp_Vcm": [px, py],
    });
    let path = g.out.join("magnetometry.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

fn t2_predict(g: &GlobalArgs, r: &Resolved, cmd: &Command) -> Result<Vec<PathBuf>> {
    let Command::T2Predict {
        scenario,
        gamma,
        b_par,
        noise,
        sigma_b_z,
        sigma_pi_x,
        sigma_pi_y,
        tau_c_b,
        tau_c_pi,
        mc_trials,
    } = cmd
    else {
        unreachable!("dispatched on variant");
    };
    let mut n: NoiseModel = match noise {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => NoiseModel::default(),
    };
    let set = |slot: &mut Option<f64>, v: &Option<f64>| {
        if v.is_some() {
            *slot = *v;
        }
    };
    set(&mut n.sigma_b_z, sigma_b_z);
    set(&mut n.sigma_pi_xp, sigma_pi_x);
    set(&mut n.sigma_pi_yp, sigma_pi_y);
    set(&mut n.tau_c_b, tau_c_b);
    set(&mut n.tau_c_pi, tau_c_pi);

    let s = match scenario {
        ScenarioArg::Dressed => Scenario::Dressed,
        ScenarioArg::StrongAxial => Scenario::StrongAxial { b_par_mt: *b_par },
        ScenarioArg::Partial => Scenario::Partial { gamma: *gamma },
    };
    let c = &r.constants;
    let pp = PerturbationParams::from_fields(c, &r.fields);
    let e_gap = perturbative_spectrum(&pp, r.fields.phi_b(), r.fields.phi_pi())?.e_gap;
    let t2 = predict_t2(&s, &n, c, e_gap)?;
    let mut report = json!({
        "scenario": s,
        "noise": n,
        "E_gap_MHz": e_gap,
        "T2_us": t2,
    });
    if let Scenario::Partial { gamma } = s {
        report["T2_squared_weights_us"] = json!(predict_t2_partial_squared(gamma, &n, c)?);
    }
    let mut outputs = Vec::new();
    if *mc_trials > 0 {
        let grid = uniform_grid(3.0 * t2, t2 / 40.0)?;
        let env = mc_dephasing_oracle(&s, &n, c, e_gap, &grid, &MonteCarloConfig::new(*mc_trials, g.seed))?;
        let fit = fit_stretched_exponential(&grid, &env, None)?;
        report["monte_carlo"] = json!({
            "trials": mc_trials,
            "T2_us": fit.params[1],
            "T2_err_us": fit.errors[1],
            "p": fit.params[2],
        });
        let rows: Vec<Vec<f64>> = grid.iter().zip(&env).map(|(&t, &e)| vec![t, e]).collect();
        let path = g.out.join("t2_envelope.csv");
        write_csv(&path, &["tau_us".into(), "coherence".into()], &rows)?;
        outputs.push(path);
    }
    let path = g.out.join("t2_predict.json");
    write_json(&path, &report)?;
    outputs.insert(0, path);
    Ok(outputs)
}
