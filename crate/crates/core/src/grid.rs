use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Relative distance below which a grid point counts as sitting on a bare pole.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// Strictly increasing set of angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Grid("grid is empty".into()));
        }
        if let Some(bad) = omegas.iter().find(|w| !w.is_finite()) {
            return Err(Error::Grid(format!("non-finite frequency {bad}")));
        }
        if let Some(i) = omegas.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Grid(format!(
                "not strictly increasing at index {}: {} then {}",
                i + 1,
                omegas[i],
                omegas[i + 1]
            )));
        }
        Ok(Self { omegas })
    }

    pub fn from_hz(hz: &[f64]) -> Result<Self> {
        Self::new(hz.iter().map(|f| TAU * f).collect())
    }

    /// `n` evenly spaced points from `start_hz` to `stop_hz` inclusive.
    pub fn linspace_hz(start_hz: f64, stop_hz: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Grid(format!("need at least 2 points, got {n}")));
        }
        let step = (stop_hz - start_hz) / (n - 1) as f64;
        Self::from_hz(
            &(0..n)
                .map(|i| start_hz + step * i as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn hz(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w / TAU).collect()
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Mirror image `-ω`, reordered to stay increasing.
    pub fn negated(&self) -> Self {
        Self {
            omegas: self.omegas.iter().rev().map(|w| -w).collect(),
        }
    }

    /// Fails if any point coincides with ±Ω_x or ±Ω_y.
    pub fn check_poles(&self, p: &SystemParams) -> Result<()> {
        for &w in &self.omegas {
            for pole in [p.omega_x, p.omega_y] {
                if on_pole(w, pole) {
                    return Err(Error::Pole { omega: w, pole });
                }
            }
        }
        Ok(())
    }

    /// `true` for points clear of ±Ω_x and ±Ω_y.
    pub fn pole_free_mask(&self, p: &SystemParams) -> Vec<bool> {
        self.omegas
            .iter()
            .map(|&w| !on_pole(w, p.omega_x) && !on_pole(w, p.omega_y))
            .collect()
    }

    pub fn band_mask(&self, lo_hz: f64, hi_hz: f64) -> Vec<bool> {
        self.omegas
            .iter()
            .map(|w| {
                let f = w / TAU;
                f >= lo_hz && f <= hi_hz
            })
            .collect()
    }

    pub fn select(&self, mask: &[bool]) -> Result<Self> {
        Self::new(
            self.omegas
                .iter()
                .zip(mask)
                .filter_map(|(w, &keep)| keep.then_some(*w))
                .collect(),
        )
    }

    /// Same grid to within `rel_tol` relative to the largest magnitude.
    pub fn matches(&self, other: &Self, rel_tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let scale = self
            .omegas
            .iter()
            .chain(other.omegas.iter())
            .fold(0.0f64, |m, w| m.max(w.abs()))
            .max(f64::MIN_POSITIVE);
        self.omegas
            .iter()
            .zip(&other.omegas)
            .all(|(a, b)| (a - b).abs() <= rel_tol * scale)
    }
}

pub(crate) fn on_pole(omega: f64, pole: f64) -> bool {
    (omega.abs() - pole).abs() <= POLE_TOLERANCE * pole
}
