//! Physical constants, field configurations, spin-1 operators and the NV
//! ground-state Hamiltonians.
//!
//! Energies are frequencies in MHz (h = 1). The electronic basis is ordered
//! `|S_z=+1⟩, |S_z=0⟩, |S_z=-1⟩`; the joint electron–nuclear basis is the
//! Kronecker product of that with `|I_z=+1⟩, |I_z=0⟩, |I_z=-1⟩`, electron
//! index major.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
#[cfg(test)]
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Material constants of the NV ground state and the ¹⁴N nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Zero-field splitting.
    #[serde(rename = "D_gs_MHz")]
    pub d_gs: f64,
    /// Transverse electric dipole, MHz per V/cm.
    #[serde(rename = "d_perp_MHz_per_Vcm")]
    pub d_perp: f64,
    /// Axial electric dipole, MHz per V/cm.
    #[serde(rename = "d_par_MHz_per_Vcm")]
    pub d_par: f64,
    /// Electron gyromagnetic factor g_e μ_B / h.
    #[serde(rename = "gamma_e_MHz_per_mT")]
    pub gamma_e: f64,
    /// Nuclear gyromagnetic factor g_n μ_n / h.
    #[serde(rename = "gamma_n_MHz_per_mT")]
    pub gamma_n: f64,
    #[serde(rename = "A_par_MHz")]
    pub a_par: f64,
    #[serde(rename = "A_perp_MHz")]
    pub a_perp: f64,
    /// Nuclear quadrupole.
    #[serde(rename = "Q_MHz")]
    pub q: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            d_gs: 2870.0,
            d_perp: 17e-6,
            d_par: 0.35e-6,
            gamma_e: 28.025,
            gamma_n: 3.077e-3,
            a_par: -2.16,
            a_perp: -2.7,
            q: -4.945,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            self.d_gs,
            self.d_perp,
            self.d_par,
            self.gamma_e,
            self.gamma_n,
            self.a_par,
            self.a_perp,
            self.q,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid("constants must be finite".into()));
        }
        if self.d_gs <= 0.0 || self.d_perp <= 0.0 || self.gamma_e <= 0.0 {
            return Err(ConfigError::Invalid("D_gs, d_perp and gamma_e must be positive".into()));
        }
        if self.d_par.abs() >= 0.05 * self.d_perp {
            return Err(ConfigError::Invalid(format!(
                "|d_par| must stay below 5% of d_perp (got {} vs {})",
                self.d_par, self.d_perp
            )));
        }
        Ok(())
    }

    /// Electronic constants only: hyperfine, quadrupole and nuclear Zeeman
    /// couplings set to zero.
    pub fn without_nucleus(&self) -> Self {
        Self {
            gamma_n: 0.0,
            a_par: 0.0,
            a_perp: 0.0,
            q: 0.0,
            ..*self
        }
    }
}

/// Static magnetic field (mT) and effective electric field Π (V/cm), both in
/// the NV frame with z along the symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldConfiguration {
    pub b_x: f64,
    pub b_y: f64,
    pub b_par: f64,
    pub pi_x: f64,
    pub pi_y: f64,
    pub pi_par: f64,
}

impl FieldConfiguration {
    pub fn new(b_mt: [f64; 3], pi_vcm: [f64; 3]) -> Result<Self, ConfigError> {
        if b_mt.iter().chain(pi_vcm.iter()).any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid("field components must be finite".into()));
        }
        Ok(Self {
            b_x: b_mt[0],
            b_y: b_mt[1],
            b_par: b_mt[2],
            pi_x: pi_vcm[0],
            pi_y: pi_vcm[1],
            pi_par: pi_vcm[2],
        })
    }

    pub fn b_perp(&self) -> f64 {
        self.b_x.hypot(self.b_y)
    }

    pub fn pi_perp(&self) -> f64 {
        self.pi_x.hypot(self.pi_y)
    }

    pub fn phi_b(&self) -> f64 {
        self.b_y.atan2(self.b_x)
    }

    pub fn phi_pi(&self) -> f64 {
        self.pi_y.atan2(self.pi_x)
    }

    pub fn with_b_par(mut self, b_par: f64) -> Self {
        self.b_par = b_par;
        self
    }

    pub fn b_mt(&self) -> [f64; 3] {
        [self.b_x, self.b_y, self.b_par]
    }

    pub fn pi_vcm(&self) -> [f64; 3] {
        [self.pi_x, self.pi_y, self.pi_par]
    }
}

/// The two documented field sets. They differ only in the transverse
/// magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPreset {
    MainText,
    Supplementary,
}

impl FieldPreset {
    pub const NAMES: [&'static str; 2] = ["main-text", "supplementary"];

    pub fn name(self) -> &'static str {
        match self {
            FieldPreset::MainText => "main-text",
            FieldPreset::Supplementary => "supplementary",
        }
    }

    pub fn fields(self) -> FieldConfiguration {
        let b = match self {
            FieldPreset::MainText => [3.83, 3.33, 0.0],
            FieldPreset::Supplementary => [3.89, 3.27, 0.0],
        };
        FieldConfiguration::new(b, [-124_000.0, -94_000.0, 0.0]).expect("finite preset")
    }
}

impl std::str::FromStr for FieldPreset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main-text" => Ok(FieldPreset::MainText),
            "supplementary" => Ok(FieldPreset::Supplementary),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldsRecord {
    #[serde(rename = "B_mT")]
    b_mt: [f64; 3],
    #[serde(rename = "Pi_Vcm")]
    pi_vcm: [f64; 3],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constants: Option<PhysicalConstants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fields: Option<FieldsRecord>,
}

/// Constants and fields loaded from the JSON configuration format
/// `{"constants": {...}, "fields": {"B_mT": [..], "Pi_Vcm": [..]}}`.
///
/// Missing constant keys take their default values; a missing `fields`
/// block is reported as `None` so callers can fall back to a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub constants: PhysicalConstants,
    pub fields: Option<FieldConfiguration>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let rec: ConfigRecord = serde_json::from_str(text)?;
        let constants = rec.constants.unwrap_or_default();
        constants.validate()?;
        let fields = rec
            .fields
            .map(|f| FieldConfiguration::new(f.b_mt, f.pi_vcm))
            .transpose()?;
        Ok(Self { constants, fields })
    }

    pub fn to_json_value(constants: &PhysicalConstants, fields: &FieldConfiguration) -> serde_json::Value {
        let rec = ConfigRecord {
            constants: Some(*constants),
            fields: Some(FieldsRecord {
                b_mt: fields.b_mt(),
                pi_vcm: fields.pi_vcm(),
            }),
        };
        serde_json::to_value(rec).expect("plain record serializes")
    }
}

/// Spin-1 matrices for the electron and the nucleus, plus their 9×9 lifts.
#[derive(Debug, Clone)]
pub struct SpinOperatorSet {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub ix: CMatrix,
    pub iy: CMatrix,
    pub iz: CMatrix,
}

impl SpinOperatorSet {
    /// `S_i ⊗ 1` on the joint space.
    pub fn lift_electron(op: &CMatrix) -> CMatrix {
        op.kronecker(&CMatrix::identity(3, 3))
    }

    /// `1 ⊗ I_i` on the joint space.
    pub fn lift_nucleus(op: &CMatrix) -> CMatrix {
        CMatrix::identity(3, 3).kronecker(op)
    }

    pub fn sz_lifted(&self) -> CMatrix {
        Self::lift_electron(&self.sz)
    }

    pub fn iz_lifted(&self) -> CMatrix {
        Self::lift_nucleus(&self.iz)
    }
}

pub fn spin1_operators() -> SpinOperatorSet {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ir = Complex64::new(0.0, FRAC_1_SQRT_2);
    #[rustfmt::skip]
    let sx = CMatrix::from_row_slice(3, 3, &[
        ZERO, r, ZERO,
        r, ZERO, r,
        ZERO, r, ZERO,
    ]);
    #[rustfmt::skip]
    let sy = CMatrix::from_row_slice(3, 3, &[
        ZERO, -ir, ZERO,
        ir, ZERO, -ir,
        ZERO, ir, ZERO,
    ]);
    let sz = CMatrix::from_diagonal(&CVector::from_row_slice(&[ONE, ZERO, -ONE]));
    SpinOperatorSet {
        ix: sx.clone(),
        iy: sy.clone(),
        iz: sz.clone(),
        sx,
        sy,
        sz,
    }
}

/// Scalars that appear throughout the dressed-state formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFields {
    /// γ_e B_⊥, MHz.
    pub b_perp: f64,
    /// γ_e B_∥, MHz.
    pub b_par: f64,
    /// d_⊥ Π_⊥, MHz.
    pub e_perp: f64,
    pub phi_b: f64,
    pub phi_pi: f64,
}

impl ScaledFields {
    pub fn new(c: &PhysicalConstants, f: &FieldConfiguration) -> Self {
        Self {
            b_perp: c.gamma_e * f.b_perp(),
            b_par: c.gamma_e * f.b_par,
            e_perp: c.d_perp * f.pi_perp(),
            phi_b: f.phi_b(),
            phi_pi: f.phi_pi(),
        }
    }
}

/// Electron-only Hamiltonian `D S_z² + d_∥Π_∥ S_z² + γ_e B·S + Π_⊥ terms`.
///
/// With `B_∥ = Π_∥ = 0` the diagonal is `(D, 0, D)`, the |0⟩↔|±1⟩ entries
/// carry `γ_e B_⊥ e^{∓iφ_B}/√2` and the corners `-d_⊥Π_⊥ e^{±iφ_Π}`.
pub fn electronic_hamiltonian(c: &PhysicalConstants, f: &FieldConfiguration) -> CMatrix {
    let s = ScaledFields::new(c, f);
    let axial = c.d_gs + c.d_par * f.pi_par;
    let zeeman = s.b_par;
    let b_off = Complex64::from_polar(s.b_perp * FRAC_1_SQRT_2, -s.phi_b);
    let corner = -Complex64::new(c.d_perp * f.pi_x, c.d_perp * f.pi_y);

    let mut h = CMatrix::zeros(3, 3);
    h[(0, 0)] = Complex64::new(axial + zeeman, 0.0);
    h[(2, 2)] = Complex64::new(axial - zeeman, 0.0);
    h[(0, 1)] = b_off;
    h[(1, 0)] = b_off.conj();
    h[(1, 2)] = b_off;
    h[(2, 1)] = b_off.conj();
    h[(0, 2)] = corner;
    h[(2, 0)] = corner.conj();
    h
}

/// Transverse-only part of [`electronic_hamiltonian`] (axial terms dropped).
pub fn transverse_electronic_hamiltonian(c: &PhysicalConstants, f: &FieldConfiguration) -> CMatrix {
    let mut ft = *f;
    ft.b_par = 0.0;
    ft.pi_par = 0.0;
    electronic_hamiltonian(c, &ft)
}

/// Full 9×9 electron–nuclear Hamiltonian.
pub fn full_hamiltonian(c: &PhysicalConstants, f: &FieldConfiguration) -> CMatrix {
    let ops = spin1_operators();
    let id3 = CMatrix::identity(3, 3);
    let re = |x: f64| Complex64::new(x, 0.0);

    let sz2 = &ops.sz * &ops.sz;
    let deviator = &sz2 - &id3 * re(2.0 / 3.0);
    let iz2 = &ops.iz * &ops.iz;
    let quad = &iz2 - &id3 * re(2.0 / 3.0);

    let sxx_m_syy = &ops.sx * &ops.sx - &ops.sy * &ops.sy;
    let sxy_p_syx = &ops.sx * &ops.sy + &ops.sy * &ops.sx;

    let electron = &deviator * re(c.d_gs + c.d_par * f.pi_par)
        - (&sxx_m_syy * re(f.pi_x) - &sxy_p_syx * re(f.pi_y)) * re(c.d_perp)
        + &ops.sx * re(c.gamma_e * f.b_x)
        + &ops.sy * re(c.gamma_e * f.b_y)
        + &ops.sz * re(c.gamma_e * f.b_par);

    let nucleus = &quad * re(c.q)
        + &ops.ix * re(c.gamma_n * f.b_x)
        + &ops.iy * re(c.gamma_n * f.b_y)
        + &ops.iz * re(c.gamma_n * f.b_par);

    let hyperfine = ops.sz.kronecker(&ops.iz) * re(c.a_par)
        + (ops.sx.kronecker(&ops.ix) + ops.sy.kronecker(&ops.iy)) * re(c.a_perp);

    electron.kronecker(&id3) + id3.kronecker(&nucleus) + hyperfine
}

/// Largest |H - H†| entry relative to the Frobenius norm of `h`.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let norm = h.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let diff = h - h.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm
}
