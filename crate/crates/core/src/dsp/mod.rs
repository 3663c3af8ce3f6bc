//! Signal chain from a raw heterodyne record to a calibrated covariance matrix.

pub mod calibrate;
pub mod filter;
pub mod lockin;
pub mod welch;

pub use calibrate::{calibrate_shot_noise, CalibrationConfig};
pub use filter::{filtfilt, filtfilt_with, LowPass, Padding, ZeroPhaseStream};
pub use lockin::{lock_in_demodulate, track_phase, HeterodyneRecord, LockIn, TrackedQuadratures};
pub use welch::{welch_cross_spectra, EstimatedCovariance, Window, WelchAccumulator, WelchConfig};
