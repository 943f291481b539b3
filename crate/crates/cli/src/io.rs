use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use nvdressed::spin::{Config, FieldConfiguration, FieldPreset, PhysicalConstants};
use serde_json::{json, Value};

use crate::GlobalArgs;

pub const CONFIG_ENV: &str = "NV_DRESSED_CONFIG";

/// Bad flag values found after parsing; reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// `start:stop:step`, stop included when it lands on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for SweepRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:stop:step, got `{s}`"));
        }
        let mut v = [0.0f64; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.trim().parse().map_err(|_| format!("`{p}` is not a number"))?;
        }
        let [start, stop, step] = v;
        if !(v.iter().all(|x| x.is_finite()) && step > 0.0 && stop >= start) {
            return Err(format!("range `{s}` needs finite values, step > 0 and stop >= start"));
        }
        if (stop - start) / step > 1e7 {
            return Err(format!("range `{s}` has too many samples"));
        }
        Ok(Self { start, stop, step })
    }
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Constants and fields after merging the config file and the preset flag.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub constants: PhysicalConstants,
    pub fields: FieldConfiguration,
    pub config_path: Option<PathBuf>,
    /// `None` when the fields came from the config file.
    pub preset: Option<FieldPreset>,
}

/// An explicit preset wins over config-file fields; with neither, the
/// main-text preset is used.
pub fn resolve(g: &GlobalArgs) -> Result<Resolved> {
    let path = g
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let cfg = match &path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            Config::from_json(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Config {
            constants: PhysicalConstants::default(),
            fields: None,
        },
    };
    let (fields, preset) = match (g.preset, cfg.fields) {
        (Some(p), _) => (p.fields(), Some(p)),
        (None, Some(f)) => (f, None),
        (None, None) => (FieldPreset::MainText.fields(), Some(FieldPreset::MainText)),
    };
    Ok(Resolved {
        constants: cfg.constants,
        fields,
        config_path: path,
        preset,
    })
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes numeric rows under a header; every value printed with 17
/// significant digits.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Two named numeric columns. Header names are matched after trimming.
pub fn read_two_columns(path: &Path, names: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let idx = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let (ix, iy) = (idx(names[0])?, idx(names[1])?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            let v: f64 = s
                .parse()
                .map_err(|_| anyhow!("{}: row {}: `{s}` is not a number", path.display(), line + 2))?;
            if !v.is_finite() {
                bail!("{}: row {}: non-finite value", path.display(), line + 2);
            }
            Ok(v)
        };
        x.push(get(ix)?);
        y.push(get(iy)?);
    }
    Ok((x, y))
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Record written next to each command's outputs. It holds no timestamps,
/// so repeated runs produce identical files.
pub fn write_manifest(
    g: &GlobalArgs,
    command: &str,
    args: &[String],
    r: &Resolved,
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let m = json!({
        "command": command,
        "args": args,
        "config": Config::to_json_value(&r.constants, &r.fields),
        "config_path": r.config_path.as_ref().map(|p| p.display().to_string()),
        "preset": r.preset.map(|p| p.name()),
        "seed": g.seed,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let path = g.out.join(format!("{command}.manifest.json"));
    write_json(&path, &m)?;
    Ok(path)
}
