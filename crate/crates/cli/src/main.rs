mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nvdressed::dressed::WorkingPoint;
use nvdressed::spin::FieldPreset;

use crate::io::{SweepRange, UsageError};

#[derive(Debug, Parser)]
#[command(name = "nvdressed", version, about = "NV-center dressed-state experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON configuration file (falls back to $NV_DRESSED_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named field set: main-text or supplementary.
    #[arg(long, global = true, value_parser = parse_preset)]
    pub preset: Option<FieldPreset>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

fn parse_preset(s: &str) -> Result<FieldPreset, String> {
    s.parse().map_err(|e: nvdressed::error::ConfigError| e.to_string())
}

fn parse_point(s: &str) -> Result<WorkingPoint, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Lower,
    Upper,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimPoint {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Dressed,
    StrongAxial,
    Partial,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nine-level spectrum versus axial field.
    EnergyDiagram {
        /// start:stop:step in mT.
        #[arg(long, allow_hyphen_values = true, default_value = "-0.4:0.4:0.002")]
        bpar_range: SweepRange,
    },
    /// Distance between the dressed model state and the exact lower-branch states.
    TraceDistance {
        #[arg(long, allow_hyphen_values = true, default_value = "-0.2:0.2:0.002")]
        bpar_range: SweepRange,
    },
    /// ODMR resonances and a Lorentzian spectrum.
    Spectrum {
        /// Working point; overrides the configured axial field.
        #[arg(long, value_parser = parse_point)]
        point: Option<WorkingPoint>,
        #[arg(long, value_enum, default_value_t = BranchArg::Both)]
        branch: BranchArg,
        /// Lines closer than this are merged, MHz.
        #[arg(long, default_value_t = nvdressed::spectra::MERGE_TOLERANCE_MHZ)]
        merge_tol: f64,
        /// Lorentzian FWHM, MHz.
        #[arg(long, default_value_t = 0.3)]
        linewidth: f64,
        /// Dip depth per unit line weight.
        #[arg(long, default_value_t = 0.01)]
        contrast: f64,
        /// start:stop:step in MHz; defaults to 3 MHz around the lines.
        #[arg(long)]
        freq_range: Option<SweepRange>,
    },
    /// Synthesize a multi-component FID trace.
    FidSim {
        #[arg(long, value_enum, default_value_t = SimPoint::A)]
        point: SimPoint,
        /// `auto` for the documented conditions, or a JSON list of decay components.
        #[arg(long, default_value = "auto")]
        components: String,
        /// Table row 1..=5 used by `auto`; defaults to the point's first row.
        #[arg(long)]
        row: Option<usize>,
        #[arg(long, default_value_t = 6.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Standard deviation of added Gaussian noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Stretch exponent for `auto` components.
        #[arg(long, default_value_t = nvdressed::dynamics::DEFAULT_STRETCH)]
        p: f64,
    },
    /// Fit a sum of stretched, detuned decays to an FID trace.
    FidFit {
        /// CSV with header `tau_us,signal`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Fixed stretch exponent; omit to fit it.
        #[arg(long)]
        p: Option<f64>,
        /// Initial detunings in MHz, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<f64>,
        /// Component indices held on resonance, comma separated.
        #[arg(long, value_delimiter = ',')]
        on_resonance: Vec<usize>,
    },
    /// Fit Lorentzian dips to an ODMR spectrum.
    OdmrFit {
        /// CSV with header `freq_MHz,intensity`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Per-family field projections and electric-field reconstruction.
    Magnetometry {
        /// Lab-frame field Bx,By,Bz in mT; defaults to the configured field
        /// placed on family 1.
        #[arg(long, value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
        b_lab: Option<Vec<f64>>,
        /// Measured zero-field splitting, MHz; defaults to the configured Π.
        #[arg(long)]
        splitting: Option<f64>,
        /// In-plane angle of Π, rad; defaults to the configured Π.
        #[arg(long, allow_hyphen_values = true)]
        phi_pi: Option<f64>,
    },
    /// Closed-form dephasing time, optionally checked by Monte Carlo.
    T2Predict {
        #[arg(long, value_enum, default_value_t = ScenarioArg::Dressed)]
        scenario: ScenarioArg,
        /// Partial-dressing angle γ, rad.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        /// Axial bias field for strong-axial, mT.
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        b_par: f64,
        /// JSON noise model; flags below override its entries.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        sigma_b_z: Option<f64>,
        #[arg(long)]
        sigma_pi_x: Option<f64>,
        #[arg(long)]
        sigma_pi_y: Option<f64>,
        #[arg(long)]
        tau_c_b: Option<f64>,
        #[arg(long)]
        tau_c_pi: Option<f64>,
        /// Monte-Carlo trials; 0 skips the simulation.
        #[arg(long, default_value_t = 0)]
        mc_trials: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EnergyDiagram { .. } => "energy-diagram",
            Command::TraceDistance { .. } => "trace-distance",
            Command::Spectrum { .. } => "spectrum",
            Command::FidSim { .. } => "fid-sim",
            Command::FidFit { .. } => "fid-fit",
            Command::OdmrFit { .. } => "odmr-fit",
            Command::Magnetometry { .. } => "magnetometry",
            Command::T2Predict { .. } => "t2-predict",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(&cli.global, &cli.command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("usage: nvdressed [--config <json>] [--preset <name>] [--seed <u64>] [--out <dir>] [--threads <n>] <command> [flags]");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
