//! Two-mode levitated optomechanics: analytic output-field spectra,
//! detection-phase squeezing analysis, synthetic heterodyne records and the
//! signal chain that turns them back into a measured covariance matrix.
//!
//! Units: angular frequencies (rad/s) internally, ordinary frequencies (Hz)
//! at every file and configuration boundary. Spectra are symmetrized and
//! normalized so the vacuum level is 1.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsp;
pub mod error;
pub mod fit;
pub mod grid;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod spectra;
pub mod squeezing;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use model::{
    apply_efficiency, cavity_susceptibility, measured_spectra, mech_susceptibility,
    mechanical_spectra, occupancy, occupancy_grid, output_spectra, transfer_functions,
    TransferSet,
};
pub use params::{Mode, SystemParams};
pub use spectra::{Covariance2, SpectralTriple};
pub use squeezing::{
    build_map, dephase_covariance, find_squeezing_bands, optimal_spectrum, quadrature_spectrum,
    rotate_covariance, BandReport, SqueezingMap,
};
