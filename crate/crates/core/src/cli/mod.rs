//! Command-line front end: argument parsing and the reproduction workflows.
//!
//! Every command validates its inputs before writing anything, writes its
//! outputs into `--out`, and finishes with a `manifest.json`.

mod commands;
pub mod manifest;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use manifest::{RunManifest, MANIFEST_NAME};

use crate::fit::WeightMode;
use crate::synth::{DEFAULT_BEAT, DEFAULT_SAMPLE_RATE};

#[derive(Debug, Parser)]
#[command(name = "osq", version, about = "Optomechanical squeezing spectra, synthesis and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// `F_START:F_STOP:N`, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub n: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected F_START:F_STOP:N, got `{s}`"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let g = Self {
            start_hz: num(a)?,
            stop_hz: num(b)?,
            n: n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?,
        };
        if !(g.start_hz < g.stop_hz && g.n >= 2) {
            return Err("need F_START < F_STOP and N ≥ 2".into());
        }
        Ok(g)
    }
}

/// `F_LOW:F_HIGH`, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec(pub f64, pub f64);

impl std::str::FromStr for BandSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected F_LOW:F_HIGH, got `{s}`"))?;
        let lo: f64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
        if !(lo < hi) {
            return Err("need F_LOW < F_HIGH".into());
        }
        Ok(Self(lo, hi))
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// System parameter file (TOML, ordinary frequencies in Hz). Defaults to
    /// the built-in reproduction parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Uniform,
    InverseVariance,
}

impl From<Weights> for WeightMode {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Uniform => WeightMode::Uniform,
            Weights::InverseVariance => WeightMode::InverseVariance,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detected output spectra S_QQ, S_PP, S_QP on a frequency grid.
    ModelSpectra {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "50000:170000:2048")]
        grid: GridSpec,
        /// Leave out the detection-phase averaging.
        #[arg(long)]
        no_phase_noise: bool,
    },
    /// Quadrature spectrum over detection phase and frequency.
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "50000:170000:2048")]
        grid: GridSpec,
        #[arg(long, default_value_t = crate::squeezing::DEFAULT_PHASES)]
        phases: usize,
        #[arg(long)]
        no_phase_noise: bool,
    },
    /// Synthetic heterodyne record plus a vacuum reference record.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Record length, s.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: f64,
        #[arg(long, default_value_t = DEFAULT_BEAT)]
        beat: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Jitter corner, Hz.
        #[arg(long, default_value_t = 1.0)]
        jitter_bandwidth: f64,
        /// Vacuum reference length, s; defaults to a quarter of the record, 0 skips it.
        #[arg(long)]
        reference_duration: Option<f64>,
        #[arg(long)]
        no_phase_noise: bool,
    },
    /// Lock-in demodulation, Welch estimation and shot-noise calibration of a record.
    Analyze {
        /// Heterodyne trace file.
        #[arg(long)]
        trace: PathBuf,
        /// Vacuum reference trace; without it the spectra are left uncalibrated.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAT)]
        beat: f64,
        /// Calibration band.
        #[arg(long, default_value = "10000:195000")]
        band: BandSpec,
        /// Welch segment length, samples at the decimated rate.
        #[arg(long, default_value_t = 1 << 14)]
        segment_length: usize,
    },
    /// Fit the phase-noise variance to a measured covariance.
    FitPhaseNoise {
        /// Covariance CSV written by `analyze`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Model spectra CSV on the data grid; computed from the config when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "50000:170000")]
        band: BandSpec,
        #[arg(long, value_enum, default_value_t = Weights::InverseVariance)]
        weights: Weights,
        /// Fit a global detection-phase rotation before the σ² fit.
        #[arg(long)]
        align: bool,
        /// Bootstrap seed for uniform weights.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimal quadrature spectrum and its sub-shot-noise bands.
    Optimal {
        #[command(flatten)]
        common: Common,
        /// Covariance CSV to use instead of the model.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "20000:250000:4096")]
        grid: GridSpec,
        #[arg(long)]
        no_phase_noise: bool,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        let g: GridSpec = "50000:170000:2048".parse().unwrap();
        assert_eq!(g, GridSpec { start_hz: 5e4, stop_hz: 1.7e5, n: 2048 });
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("2:1:10".parse::<GridSpec>().is_err());
        assert_eq!("1e3:2e3".parse::<BandSpec>().unwrap(), BandSpec(1e3, 2e3));
        assert!("x:2".parse::<BandSpec>().is_err());
    }

    #[test]
    fn cli_shape_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
