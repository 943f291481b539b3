//! Rotating-wave drive Hamiltonians for linear, elliptical and circular
//! microwave polarization in the electronic 3×3 space.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::dressed::{partially_dressed_basis, DressedPairModel, PartiallyDressedPair};
use crate::error::PolarizationError;
use crate::spin::{CMatrix, CVector, PhysicalConstants};

/// Above this Ω/D the rotating-wave approximation is flagged.
pub const RWA_LIMIT: f64 = 0.01;

/// Elliptical drive: Rabi amplitude `omega_theta` along the major axis at
/// angle `theta` and `omega_perp` along θ + π/2, at drive frequency
/// `omega_d` (all MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub omega_theta: f64,
    pub omega_perp: f64,
    pub theta: f64,
    pub omega_d: f64,
}

impl DriveConfig {
    pub fn new(omega_theta: f64, omega_perp: f64, theta: f64, omega_d: f64) -> Result<Self, PolarizationError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(omega_theta) || !ok(omega_perp) || !theta.is_finite() || !omega_d.is_finite() {
            return Err(PolarizationError::NegativeAmplitude);
        }
        Ok(Self {
            omega_theta,
            omega_perp,
            theta,
            omega_d,
        })
    }

    pub fn linear(omega: f64, theta: f64, omega_d: f64) -> Result<Self, PolarizationError> {
        Self::new(omega, 0.0, theta, omega_d)
    }

    pub fn circular(omega: f64, theta: f64, omega_d: f64) -> Result<Self, PolarizationError> {
        Self::new(omega, omega, theta, omega_d)
    }

    /// Largest Rabi amplitude over D.
    pub fn rwa_ratio(&self, c: &PhysicalConstants) -> f64 {
        self.omega_theta.max(self.omega_perp) / c.d_gs
    }

    pub fn rwa_valid(&self, c: &PhysicalConstants) -> bool {
        self.rwa_ratio(c) <= RWA_LIMIT
    }
}

/// Drive Hamiltonian in the frame rotating at `omega_d`, counter-rotating
/// terms dropped.
pub fn rwa_hamiltonian(d: &DriveConfig, c: &PhysicalConstants) -> CMatrix {
    let e = Complex64::from_polar(FRAC_1_SQRT_2, -d.theta);
    let upper = e * (d.omega_theta + d.omega_perp);
    let lower = e * (d.omega_theta - d.omega_perp);
    let det = Complex64::new(c.d_gs - d.omega_d, 0.0);
    let z = Complex64::new(0.0, 0.0);
    CMatrix::from_row_slice(3, 3, &[det, upper, z, upper.conj(), z, lower, z, lower.conj(), det])
}

/// Mixing angle of the partially dressed state |+⟩_{θ,γ} this drive couples
/// to |0⟩: cos(γ/2) = (Ω_θ+Ω_⊥)/√(2(Ω_θ²+Ω_⊥²)). Lies in [−π/2, π/2];
/// negative when Ω_⊥ > Ω_θ.
pub fn drive_match_gamma(d: &DriveConfig) -> Result<f64, PolarizationError> {
    if d.omega_theta == 0.0 && d.omega_perp == 0.0 {
        return Err(PolarizationError::ZeroDrive);
    }
    Ok(2.0 * (d.omega_theta - d.omega_perp).atan2(d.omega_theta + d.omega_perp))
}

/// ⟨ψ|H|0⟩ for the drive Hamiltonian.
pub fn coupling_to_zero(h: &CMatrix, psi: &CVector) -> Complex64 {
    let col = h.column(1);
    psi.dotc(&col)
}

/// The pair of states selected by this drive: `plus` is driven with strength
/// √(Ω_θ²+Ω_⊥²), `minus` is dark.
pub fn driven_pair(d: &DriveConfig) -> Result<PartiallyDressedPair, PolarizationError> {
    let g = drive_match_gamma(d)?;
    // only θ and γ matter for the vectors
    let mut m = DressedPairModel::new(d.theta, 1.0, 0.0, 0.0);
    m.gamma = g;
    Ok(partially_dressed_basis(&m))
}
