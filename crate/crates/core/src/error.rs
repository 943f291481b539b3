use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (expected main-text or supplementary)")]
    UnknownPreset(String),
    #[error("malformed configuration JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is not Hermitian (relative defect {0:.3e})")]
    NonHermitianInput(f64),
    #[error("matrix must be square with 2 <= n <= 16, got {rows}x{cols}")]
    BadDimension { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("zeta = {0} is outside the series range (< 0.2)")]
    SeriesOutOfRange(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum DressedError {
    #[error("state is not normalized (norm {0})")]
    UnnormalizedInput(f64),
    #[error("state must have 3 or 9 components, got {0}")]
    BadLength(usize),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectraError {
    #[error("linewidth must be positive, got {0}")]
    NonPositiveLinewidth(f64),
    #[error("contrast must lie in [0, 1) after weighting, got {0}")]
    BadContrast(f64),
    #[error("splitting must be nonnegative, got {0}")]
    NegativeSplitting(f64),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Error, PartialEq)]
pub enum PolarizationError {
    #[error("both drive amplitudes are zero")]
    ZeroDrive,
    #[error("drive amplitudes must be finite and nonnegative")]
    NegativeAmplitude,
}

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("noise model lacks `{0}` required by this scenario")]
    MissingNoiseParameter(&'static str),
    #[error("Monte-Carlo needs at least 1000 trials, got {0}")]
    InsufficientTrials(usize),
    #[error("time grid must be nonempty, nonnegative and ascending")]
    BadGrid,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("decay rate radicand is not positive ({0:.3e})")]
    NonPositiveRadicand(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("normal equations are singular")]
    SingularJacobian,
    #[error("residual is not finite at the current parameters")]
    NonFiniteResidual,
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
}

/// Union of the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Dressed(#[from] DressedError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Fit(#[from] FitError),
}
