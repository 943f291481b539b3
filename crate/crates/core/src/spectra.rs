//! Resonance frequencies, CW-ODMR lineshapes, zero-field splitting and
//! vector magnetometry over the four NV orientations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed::{sz_expectation, BranchAnalysis};
use crate::error::SpectraError;
use crate::spin::{FieldConfiguration, PhysicalConstants};

/// Resonances closer than this (MHz) are merged.
pub const MERGE_TOLERANCE_MHZ: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Lower,
    Upper,
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower" => Ok(Branch::Lower),
            "upper" => Ok(Branch::Upper),
            other => Err(format!("unknown branch `{other}` (expected lower or upper)")),
        }
    }
}

/// One (possibly merged) ODMR line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    #[serde(rename = "freq_MHz")]
    pub freq: f64,
    /// ⟨S_z⟩ of the upper state (mean over merged lines).
    #[serde(rename = "Sz")]
    pub sz: f64,
    /// Nuclear projections of all merged lines; ΔI_z = 0 for each.
    #[serde(rename = "Iz")]
    pub iz: Vec<i8>,
    pub weight: f64,
    /// ⟨S_z⟩ of the S_z≈0 state the line starts from.
    #[serde(skip)]
    pub lower_sz: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResonanceSet {
    pub resonances: Vec<Resonance>,
}

impl ResonanceSet {
    pub fn len(&self) -> usize {
        self.resonances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonances.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.resonances.iter().map(|r| r.freq).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.resonances.iter().map(|r| r.weight).sum()
    }

    /// Line carrying the given I_z.
    pub fn find_iz(&self, iz: i8) -> Option<&Resonance> {
        self.resonances.iter().find(|r| r.iz.contains(&iz))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.resonances).expect("plain records serialize")
    }
}

/// Transitions |S_z≈0, I_z⟩ → branch state with the same I_z, sorted by
/// frequency, with lines closer than [`MERGE_TOLERANCE_MHZ`] merged.
pub fn resonance_frequencies(
    c: &PhysicalConstants,
    f: &FieldConfiguration,
    branch: Branch,
) -> Result<ResonanceSet, SpectraError> {
    resonance_frequencies_merged(c, f, branch, MERGE_TOLERANCE_MHZ)
}

/// As [`resonance_frequencies`] with an explicit merge tolerance (MHz).
pub fn resonance_frequencies_merged(
    c: &PhysicalConstants,
    f: &FieldConfiguration,
    branch: Branch,
    merge_tol: f64,
) -> Result<ResonanceSet, SpectraError> {
    let b = BranchAnalysis::new(c, f)?;
    let mut lines: Vec<Resonance> = [1i8, 0, -1]
        .into_iter()
        .map(|iz| {
            let (e, v) = match branch {
                Branch::Lower => (b.lower_energy(iz), b.lower_state(iz)),
                Branch::Upper => (b.upper_energy(iz), b.upper_state(iz)),
            };
            Resonance {
                freq: e - b.ground_energy(iz),
                sz: sz_expectation(&v).unwrap_or(f64::NAN),
                iz: vec![iz],
                weight: 1.0,
                lower_sz: sz_expectation(&b.ground_state(iz)).unwrap_or(f64::NAN),
            }
        })
        .collect();
    lines.sort_by(|a, b| a.freq.total_cmp(&b.freq));

    let mut merged: Vec<Resonance> = Vec::new();
    for line in lines {
        match merged.last_mut() {
            Some(last) if line.freq - last.freq < merge_tol => {
                let w = last.weight + line.weight;
                last.freq = (last.freq * last.weight + line.freq * line.weight) / w;
                last.sz = (last.sz * last.weight + line.sz * line.weight) / w;
                last.lower_sz = (last.lower_sz * last.weight + line.lower_sz * line.weight) / w;
                last.weight = w;
                last.iz.extend(line.iz);
                last.iz.sort_unstable_by(|a, b| b.cmp(a));
            }
            _ => merged.push(line),
        }
    }
    Ok(ResonanceSet { resonances: merged })
}

/// Unit-peak Lorentzian with full width at half maximum `fwhm`.
pub fn lorentzian(nu: f64, center: f64, fwhm: f64) -> f64 {
    let x = 2.0 * (nu - center) / fwhm;
    1.0 / (1.0 + x * x)
}

/// `1 − Σ_k contrast·w_k·L(ν; ν_k, linewidth)` on the grid.
pub fn odmr_lineshape(
    res: &ResonanceSet,
    linewidth: f64,
    contrast: f64,
    grid: &[f64],
) -> Result<Vec<f64>, SpectraError> {
    if !(linewidth > 0.0) || !linewidth.is_finite() {
        return Err(SpectraError::NonPositiveLinewidth(linewidth));
    }
    let depth = contrast * res.total_weight();
    if !(0.0..1.0).contains(&depth) || contrast < 0.0 {
        return Err(SpectraError::BadContrast(depth));
    }
    Ok(grid
        .par_iter()
        .map(|&nu| {
            1.0 - res
                .resonances
                .iter()
                .map(|r| contrast * r.weight * lorentzian(nu, r.freq, linewidth))
                .sum::<f64>()
        })
        .collect())
}

/// `2 d_⊥ |Π_⊥|`, MHz.
pub fn zero_field_splitting(f: &FieldConfiguration, c: &PhysicalConstants) -> f64 {
    2.0 * c.d_perp * f.pi_perp()
}

/// Transverse Π (V/cm) from a measured zero-field splitting and angle.
pub fn reconstruct_transverse_pi(
    splitting: f64,
    phi_pi: f64,
    c: &PhysicalConstants,
) -> Result<(f64, f64), SpectraError> {
    if !(splitting >= 0.0) {
        return Err(SpectraError::NegativeSplitting(splitting));
    }
    let mag = splitting / (2.0 * c.d_perp);
    Ok((mag * phi_pi.cos(), mag * phi_pi.sin()))
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / dot(a, a).sqrt())
}

/// One of the four crystallographic NV orientations, with its local frame:
/// `x` is the normalized projection of lab [100] onto the plane normal to
/// `axis`, and `y = axis × x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NVFamily {
    pub label: u8,
    pub axis: Vec3,
    pub x: Vec3,
    pub y: Vec3,
}

impl NVFamily {
    fn from_direction(label: u8, dir: Vec3) -> Self {
        let axis = normalize(dir);
        let e = [1.0, 0.0, 0.0];
        let x = normalize([
            e[0] - dot(e, axis) * axis[0],
            e[1] - dot(e, axis) * axis[1],
            e[2] - dot(e, axis) * axis[2],
        ]);
        let y = cross(axis, x);
        Self { label, axis, x, y }
    }

    /// Lab vector from components in this family's (x, y, axis) frame.
    pub fn to_lab(&self, local: Vec3) -> Vec3 {
        std::array::from_fn(|k| local[0] * self.x[k] + local[1] * self.y[k] + local[2] * self.axis[k])
    }

    pub fn project(&self, lab: Vec3) -> FamilyProjection {
        let bx = dot(lab, self.x);
        let by = dot(lab, self.y);
        FamilyProjection {
            family: self.label,
            b_par: dot(lab, self.axis),
            b_perp: bx.hypot(by),
            phi_b: by.atan2(bx),
        }
    }
}

pub fn nv_families() -> [NVFamily; 4] {
    [
        NVFamily::from_direction(1, [1.0, 1.0, 1.0]),
        NVFamily::from_direction(2, [1.0, -1.0, -1.0]),
        NVFamily::from_direction(3, [-1.0, 1.0, -1.0]),
        NVFamily::from_direction(4, [-1.0, -1.0, 1.0]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyProjection {
    pub family: u8,
    pub b_par: f64,
    pub b_perp: f64,
    /// In-plane angle in the family frame, rad.
    pub phi_b: f64,
}

/// Axial and transverse parts of a lab-frame field for each NV family.
pub fn family_projection(b_lab: Vec3) -> [FamilyProjection; 4] {
    nv_families().map(|fam| fam.project(b_lab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::FieldPreset;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lorentzian_shape() {
        assert_eq!(lorentzian(3.0, 3.0, 0.4), 1.0);
        assert_abs_diff_eq!(lorentzian(3.2, 3.0, 0.4), 0.5, epsilon = 1e-15);
    }

    fn single(freq: f64) -> ResonanceSet {
        ResonanceSet {
            resonances: vec![Resonance {
                freq,
                sz: 0.0,
                iz: vec![0],
                weight: 1.0,
                lower_sz: 0.0,
            }],
        }
    }

    #[test]
    fn lineshape_cases() {
        let grid = [2870.0, 2871.0, 2872.0];
        let empty = odmr_lineshape(&ResonanceSet::default(), 0.3, 0.1, &grid).unwrap();
        assert_eq!(empty, vec![1.0; 3]);
        let one = odmr_lineshape(&single(2871.0), 0.3, 0.1, &grid).unwrap();
        assert_abs_diff_eq!(one[1], 0.9, epsilon = 1e-15);

        let mut two = single(2871.0);
        two.resonances.push(Resonance {
            freq: 2871.4,
            ..two.resonances[0].clone()
        });
        let mid = [2871.2];
        let a = odmr_lineshape(&two, 0.5, 0.1, &mid).unwrap()[0];
        let b = odmr_lineshape(&single(2871.0), 0.5, 0.1, &mid).unwrap()[0];
        assert!(a < b);
        let expected = 1.0 - 0.2 * lorentzian(2871.2, 2871.0, 0.5);
        assert_abs_diff_eq!(a, expected, epsilon = 1e-12);

        assert!(odmr_lineshape(&single(1.0), 0.0, 0.1, &grid).is_err());
        assert!(odmr_lineshape(&single(1.0), 0.1, 1.0, &grid).is_err());
    }

    #[test]
    fn lineshape_area() {
        let res = single(0.0);
        let (lw, contrast) = (0.4, 0.2);
        let n = 400_001;
        let span = 4000.0;
        let grid: Vec<f64> = (0..n).map(|k| -span / 2.0 + span * k as f64 / (n - 1) as f64).collect();
        let y = odmr_lineshape(&res, lw, contrast, &grid).unwrap();
        let h = span / (n - 1) as f64;
        let area: f64 = y.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let expected = span - std::f64::consts::PI * contrast * lw / 2.0;
        assert!((area - expected).abs() / (span - area) < 0.01);
    }

    #[test]
    fn splitting_and_inverse() {
        let c = PhysicalConstants::default();
        let f = FieldPreset::MainText.fields();
        let s = zero_field_splitting(&f, &c);
        assert!((s - 5.3).abs() < 0.05);
        assert_eq!(zero_field_splitting(&FieldConfiguration::default(), &c), 0.0);
        let mut g = f;
        g.pi_x *= 2.0;
        g.pi_y *= 2.0;
        assert_abs_diff_eq!(zero_field_splitting(&g, &c), 2.0 * s, epsilon = 1e-12);

        let (px, py) = reconstruct_transverse_pi(s, f.phi_pi(), &c).unwrap();
        assert!((px - f.pi_x).abs() < 1e-9 * f.pi_perp());
        assert!((py - f.pi_y).abs() < 1e-9 * f.pi_perp());
        assert_eq!(reconstruct_transverse_pi(0.0, 1.0, &c).unwrap(), (0.0, 0.0));
        assert!(reconstruct_transverse_pi(-1.0, 0.0, &c).is_err());

        let (px, py) = reconstruct_transverse_pi(5.3, 217.2f64.to_radians(), &c).unwrap();
        assert!((px + 124_000.0).abs() < 2000.0 && (py + 94_000.0).abs() < 2000.0);
    }

    #[test]
    fn family_axes() {
        let fams = nv_families();
        for i in 0..4 {
            assert_abs_diff_eq!(dot(fams[i].axis, fams[i].axis), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(fams[i].x, fams[i].axis), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(dot(fams[i].y, fams[i].x), 0.0, epsilon = 1e-15);
            for j in (i + 1)..4 {
                assert_abs_diff_eq!(dot(fams[i].axis, fams[j].axis), -1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn field_along_111() {
        let b = scale([1.0, 1.0, 1.0], 2.0 / 3f64.sqrt());
        let p = family_projection(b);
        assert_abs_diff_eq!(p[0].b_par, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0].b_perp, 0.0, epsilon = 1e-12);
        for q in &p[1..] {
            assert_abs_diff_eq!(q.b_par, -2.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn local_frame_round_trip() {
        let fam = nv_families()[0];
        let lab = fam.to_lab([3.89, 3.27, 0.0]);
        let p = fam.project(lab);
        assert!((p.b_perp - 5.08).abs() / 5.08 < 0.005);
        assert!(p.b_par.abs() < 1e-12);
        assert!((p.phi_b.to_degrees() - 40.0).abs() < 0.5);
    }

    #[test]
    fn point_a_lines() {
        let c = PhysicalConstants::default();
        let f = FieldPreset::MainText.fields();
        // the I_z = ±1 lines sit about 17 kHz apart with the default constants
        let fine = resonance_frequencies(&c, &f, Branch::Lower).unwrap();
        assert_eq!(fine.len(), 3);
        let split = fine.find_iz(1).unwrap().freq - fine.find_iz(-1).unwrap().freq;
        assert!(split.abs() > 0.010 && split.abs() < 0.030, "{split}");
        let r = resonance_frequencies_merged(&c, &f, Branch::Lower, 0.05).unwrap();
        assert_eq!(r.len(), 2);
        let pair = r.find_iz(1).unwrap();
        assert_eq!(pair.weight, 2.0);
        assert_eq!(pair.iz, vec![1, -1]);
        let json = r.to_json();
        assert!(json[0]["freq_MHz"].is_number());
    }
}
