//! Physical parameters of the two-mode cavity model and the flat config file
//! that carries them.
//!
//! All rates are stored as angular frequencies (rad/s). The config file uses
//! ordinary frequencies in Hz (the "/2π" values), one `key = value` per line.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Rates and detection settings of the tweezer/cavity system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Bare mechanical frequency of the x mode (rad/s).
    pub omega_x: f64,
    /// Bare mechanical frequency of the y mode (rad/s).
    pub omega_y: f64,
    /// Optomechanical coupling rates (rad/s).
    pub g_x: f64,
    pub g_y: f64,
    /// Heating rates (rad/s).
    pub gamma_x: f64,
    pub gamma_y: f64,
    /// Full cavity linewidth (rad/s).
    pub kappa: f64,
    /// Tweezer-cavity detuning (rad/s); negative on the cooling side.
    pub delta: f64,
    /// Total detection efficiency, excluding the heterodyne penalty.
    pub eta: f64,
    /// Halve the efficiency to account for simultaneous detection of both quadratures.
    pub heterodyne_penalty: bool,
    /// Variance of the residual detection-phase jitter (rad²).
    pub sigma_theta_sq: f64,
}

/// Mechanical mode selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    X,
    Y,
}

impl SystemParams {
    /// Measured system of the levitated-nanosphere experiment with an assumed
    /// detuning of −115 kHz (the detuning itself is not part of the published table).
    pub fn reproduction() -> Self {
        Self::from_hz(&ParamsFile {
            omega_x_hz: 121e3,
            omega_y_hz: 109e3,
            g_x_hz: 14.13e3,
            g_y_hz: 10.37e3,
            gamma_x_hz: 4.03e3,
            gamma_y_hz: 3.05e3,
            kappa_hz: 57e3,
            delta_hz: -115e3,
            eta: 0.32,
            heterodyne_penalty: true,
            sigma_theta_sq: 0.062,
        })
    }

    pub fn from_hz(f: &ParamsFile) -> Self {
        Self {
            omega_x: TAU * f.omega_x_hz,
            omega_y: TAU * f.omega_y_hz,
            g_x: TAU * f.g_x_hz,
            g_y: TAU * f.g_y_hz,
            gamma_x: TAU * f.gamma_x_hz,
            gamma_y: TAU * f.gamma_y_hz,
            kappa: TAU * f.kappa_hz,
            delta: TAU * f.delta_hz,
            eta: f.eta,
            heterodyne_penalty: f.heterodyne_penalty,
            sigma_theta_sq: f.sigma_theta_sq,
        }
    }

    pub fn to_hz(&self) -> ParamsFile {
        ParamsFile {
            omega_x_hz: self.omega_x / TAU,
            omega_y_hz: self.omega_y / TAU,
            g_x_hz: self.g_x / TAU,
            g_y_hz: self.g_y / TAU,
            gamma_x_hz: self.gamma_x / TAU,
            gamma_y_hz: self.gamma_y / TAU,
            kappa_hz: self.kappa / TAU,
            delta_hz: self.delta / TAU,
            eta: self.eta,
            heterodyne_penalty: self.heterodyne_penalty,
            sigma_theta_sq: self.sigma_theta_sq,
        }
    }

    pub fn with_delta_hz(mut self, delta_hz: f64) -> Self {
        self.delta = TAU * delta_hz;
        self
    }

    /// Same system with the particle decoupled from the cavity.
    pub fn decoupled(mut self) -> Self {
        self.g_x = 0.0;
        self.g_y = 0.0;
        self
    }

    pub fn eta_eff(&self) -> f64 {
        if self.heterodyne_penalty {
            self.eta / 2.0
        } else {
            self.eta
        }
    }

    pub fn max_mechanical_hz(&self) -> f64 {
        self.omega_x.max(self.omega_y) / TAU
    }

    pub fn omega(&self, mode: Mode) -> f64 {
        match mode {
            Mode::X => self.omega_x,
            Mode::Y => self.omega_y,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_x", self.omega_x),
            ("omega_y", self.omega_y),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("g_x", self.g_x),
            ("g_y", self.g_y),
            ("gamma_x", self.gamma_x),
            ("gamma_y", self.gamma_y),
            ("sigma_theta_sq", self.sigma_theta_sq),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let file: ParamsFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let p = Self::from_hz(&file);
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        self.to_hz().to_config_string()
    }
}

/// On-disk form of [`SystemParams`]; every `_hz` key is an ordinary frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    pub g_x_hz: f64,
    pub g_y_hz: f64,
    pub gamma_x_hz: f64,
    pub gamma_y_hz: f64,
    pub kappa_hz: f64,
    pub delta_hz: f64,
    pub eta: f64,
    pub heterodyne_penalty: bool,
    pub sigma_theta_sq: f64,
}

impl ParamsFile {
    pub fn to_config_string(&self) -> String {
        // flat struct of scalars, serialization cannot fail
        toml::to_string(self).expect("flat config serializes")
    }
}
