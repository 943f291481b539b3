//! Least-squares fitting of FID traces and ODMR spectra.

pub mod fid;
pub mod lm;
pub mod odmr;

pub use fid::{fit_fid, fit_stretched_exponential, FidFit, FidFitOptions, FittedComponent};
pub use lm::{levenberg_marquardt, FitProblem, FitResult, FitStatus, Model};
pub use odmr::{fit_odmr, FittedPeak, OdmrFit};
