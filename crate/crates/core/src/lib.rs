//! NV-center ground-state physics in weak orthogonal fields: spin
//! Hamiltonians, exact and series eigenstructure, dressed-state analysis,
//! ODMR spectra, microwave polarization selection, free-induction-decay
//! models, dephasing and decay fitting.
//!
//! Energies are in MHz, magnetic fields in mT, electric fields in V/cm and
//! times in µs.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dressed;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fitting;
pub mod polarization;
pub mod spectra;
pub mod spin;

pub use dressed::{
    classify_state, mixing_bound, partially_dressed_basis, sz_expectation, trace_distance, BranchAnalysis,
    DressedPairModel, StateClass, WorkingPoint,
};
pub use dynamics::{
    ensemble_decay, fid_probability, fid_signal, mc_dephasing_oracle, predict_t2, DecayComponent, DetuningDistribution,
    MonteCarloConfig, NoiseModel, Scenario,
};
pub use eigen::{
    cubic_eigenvalues_exact, diagonalize_hermitian, perturbative_eigenvectors, perturbative_spectrum, EigenSolution,
    PerturbationParams, PerturbativeSpectrum,
};
pub use error::Error;
pub use fitting::{fit_fid, fit_odmr, levenberg_marquardt, FitProblem, FitResult, FitStatus};
pub use spin::{
    electronic_hamiltonian, full_hamiltonian, spin1_operators, CMatrix, CVector, Config, FieldConfiguration,
    FieldPreset, PhysicalConstants, SpinOperatorSet,
};
