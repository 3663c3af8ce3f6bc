//! Detection-phase manipulations of the spectral covariance matrix:
//! rotation, Gaussian phase-noise averaging, arbitrary-phase and optimal
//! quadrature spectra, phase/frequency maps and sub-shot-noise bands.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::FrequencyGrid;
use crate::spectra::{fmt12, SpectralTriple};

/// One-degree phase resolution over `[0, π)`.
pub const DEFAULT_PHASES: usize = 181;

pub fn rotate_covariance(s: &SpectralTriple, theta: f64) -> SpectralTriple {
    s.map_bins(|b| b.rotated(theta))
}

/// Average of [`rotate_covariance`] over a Gaussian detection phase of variance `sigma_sq`.
pub fn dephase_covariance(s: &SpectralTriple, sigma_sq: f64) -> SpectralTriple {
    s.map_bins(|b| b.dephased(sigma_sq))
}

/// `S̃^φ = (S_QQ+S_PP)/2 + e^{−2σ²}[(S_QQ−S_PP)/2·cos 2φ + S_QP·sin 2φ]`.
pub fn quadrature_spectrum(s: &SpectralTriple, phi: f64, sigma_sq: f64) -> Vec<f64> {
    s.bins().map(|b| b.quadrature(phi, sigma_sq)).collect()
}

/// Per-bin minimum over detection phase and the phase attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSpectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    /// Optimal phase in `[0, π)`.
    pub phases: Vec<f64>,
}

impl OptimalSpectrum {
    pub fn bands(&self, threshold: f64) -> BandReport {
        bands_from(&self.grid, &self.values, Some(&self.phases), threshold)
    }

    pub fn min(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// CSV `freq_hz,s_opt,phi_opt`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["freq_hz", "s_opt", "phi_opt"])?;
        for (i, f) in self.grid.hz().into_iter().enumerate() {
            out.write_record([fmt12(f), fmt12(self.values[i]), fmt12(self.phases[i])])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(S_QQ+S_PP)/2 − (e^{−2σ²}/2)·√((S_QQ−S_PP)² + 4S_QP²)`, the minimum over φ
/// of [`quadrature_spectrum`].
pub fn optimal_spectrum(s: &SpectralTriple, sigma_sq: f64) -> OptimalSpectrum {
    let (values, phases) = s.bins().map(|b| b.optimal(sigma_sq)).unzip();
    OptimalSpectrum {
        grid: s.grid.clone(),
        values,
        phases,
    }
}

/// Quadrature spectrum on a uniform phase grid; rows are phases.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingMap {
    pub grid: FrequencyGrid,
    pub phases: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SqueezingMap {
    /// Long-format CSV `freq_hz,phase_rad,value`, phase-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["freq_hz", "phase_rad", "value"])?;
        let hz = self.grid.hz();
        for (phi, row) in self.phases.iter().zip(&self.values) {
            for (f, v) in hz.iter().zip(row) {
                out.write_record([fmt12(*f), fmt12(*phi), fmt12(*v)])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Minimum over the phase grid, per frequency, with the row index.
    pub fn column_min(&self) -> Vec<(usize, f64)> {
        (0..self.grid.len())
            .map(|j| {
                self.values
                    .iter()
                    .enumerate()
                    .map(|(i, row)| (i, row[j]))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("at least two phases")
            })
            .collect()
    }
}

pub fn build_map(s: &SpectralTriple, sigma_sq: f64, n_phases: usize) -> Result<SqueezingMap> {
    if n_phases < 2 {
        return Err(invalid("n_phases", "need at least two phases"));
    }
    let phases: Vec<f64> = (0..n_phases)
        .map(|k| PI * k as f64 / n_phases as f64)
        .collect();
    let values = phases
        .iter()
        .map(|&phi| quadrature_spectrum(s, phi, sigma_sq))
        .collect();
    Ok(SqueezingMap {
        grid: s.grid.clone(),
        phases,
        values,
    })
}

/// A maximal run of bins strictly below the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub min_value: f64,
    pub argmin_freq_hz: f64,
    /// Optimal detection phase at the minimum; `None` when not supplied.
    pub argmin_phase: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub threshold: f64,
    pub bands: Vec<Band>,
}

impl BandReport {
    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Band containing or nearest to `f_hz`.
    pub fn nearest(&self, f_hz: f64) -> Option<&Band> {
        let dist = |b: &Band| {
            if f_hz < b.f_low_hz {
                b.f_low_hz - f_hz
            } else if f_hz > b.f_high_hz {
                f_hz - b.f_high_hz
            } else {
                0.0
            }
        };
        self.bands.iter().min_by(|a, b| dist(a).total_cmp(&dist(b)))
    }
}

/// Maximal contiguous runs of `values < threshold` on `grid`.
pub fn find_squeezing_bands(
    values: &[f64],
    grid: &FrequencyGrid,
    threshold: f64,
) -> Result<BandReport> {
    if values.len() != grid.len() {
        return Err(Error::Length(format!(
            "{} values on a {}-point grid",
            values.len(),
            grid.len()
        )));
    }
    Ok(bands_from(grid, values, None, threshold))
}

fn bands_from(
    grid: &FrequencyGrid,
    values: &[f64],
    phases: Option<&[f64]>,
    threshold: f64,
) -> BandReport {
    let hz = grid.hz();
    let mut bands = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i] >= threshold {
            i += 1;
            continue;
        }
        let start = i;
        let mut best = i;
        while i < values.len() && values[i] < threshold {
            if values[i] < values[best] {
                best = i;
            }
            i += 1;
        }
        bands.push(Band {
            f_low_hz: hz[start],
            f_high_hz: hz[i - 1],
            min_value: values[best],
            argmin_freq_hz: hz[best],
            argmin_phase: phases.map(|p| p[best]),
        });
    }
    BandReport { threshold, bands }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn triple(qq: &[f64], pp: &[f64], qp: &[f64]) -> SpectralTriple {
        let hz: Vec<f64> = (1..=qq.len()).map(|k| 1e3 * k as f64).collect();
        SpectralTriple::new(
            FrequencyGrid::from_hz(&hz).unwrap(),
            qq.to_vec(),
            pp.to_vec(),
            qp.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn rotation_identity_and_trace() {
        let s = triple(&[2.0, 0.7], &[1.0, 1.4], &[0.3, -0.2]);
        assert_eq!(rotate_covariance(&s, 0.0), s);
        let r = rotate_covariance(&s, 0.37);
        for i in 0..2 {
            assert!((r.s_qq[i] + r.s_pp[i] - s.s_qq[i] - s.s_pp[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn dephasing_limits() {
        let s = triple(&[2.0, 0.7], &[1.0, 1.4], &[0.3, -0.2]);
        assert_eq!(dephase_covariance(&s, 0.0), s);
        let d = dephase_covariance(&s, 50.0);
        for i in 0..2 {
            let mean = 0.5 * (s.s_qq[i] + s.s_pp[i]);
            assert!((d.s_qq[i] - mean).abs() < 1e-15);
            assert!((d.s_pp[i] - mean).abs() < 1e-15);
            assert!(d.s_qp[i].abs() < 1e-40);
        }
    }

    #[test]
    fn quadrature_special_phases() {
        let s = triple(&[2.0], &[0.5], &[0.25]);
        assert!((quadrature_spectrum(&s, 0.0, 0.0)[0] - 2.0).abs() < 1e-15);
        assert!((quadrature_spectrum(&s, FRAC_PI_2, 0.0)[0] - 0.5).abs() < 1e-15);
        assert!((quadrature_spectrum(&s, FRAC_PI_4, 0.0)[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn optimal_examples() {
        let vac = SpectralTriple::vacuum(FrequencyGrid::from_hz(&[1.0, 2.0]).unwrap());
        assert!(optimal_spectrum(&vac, 0.3).values.iter().all(|&v| v == 1.0));
        let s = triple(&[2.0], &[1.0], &[0.0]);
        let o = optimal_spectrum(&s, 0.0);
        assert!((o.values[0] - 1.0).abs() < 1e-15);
        assert!((o.phases[0] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn map_rows() {
        let s = triple(&[2.0, 0.7], &[1.0, 1.4], &[0.3, -0.2]);
        let m = build_map(&s, 0.0, 2).unwrap();
        assert_eq!(m.phases, vec![0.0, FRAC_PI_2]);
        for (row, want) in m.values.iter().zip([&s.s_qq, &s.s_pp]) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(build_map(&s, 0.0, 1).is_err());
        let vac = SpectralTriple::vacuum(s.grid.clone());
        let m = build_map(&vac, 0.1, DEFAULT_PHASES).unwrap();
        assert!(m.values.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn bands_from_flat_and_dips() {
        let grid = FrequencyGrid::linspace_hz(50e3, 200e3, 151).unwrap();
        let ones = vec![1.0; 151];
        assert!(find_squeezing_bands(&ones, &grid, 1.0).unwrap().is_empty());

        let hz = grid.hz();
        let v: Vec<f64> = hz
            .iter()
            .map(|&f| {
                if (70e3..=95e3).contains(&f) {
                    1.0 - 0.02 * (1.0 - ((f - 82e3) / 13e3).powi(2)).max(0.0) - 1e-9
                } else if (140e3..=160e3).contains(&f) {
                    0.995
                } else {
                    1.01
                }
            })
            .collect();
        let r = find_squeezing_bands(&v, &grid, 1.0).unwrap();
        assert_eq!(r.bands.len(), 2);
        assert_eq!(r.bands[0].f_low_hz, 70e3);
        assert_eq!(r.bands[0].f_high_hz, 95e3);
        assert!((r.bands[0].min_value - 0.98).abs() < 1e-8);
        assert_eq!(r.bands[1].f_low_hz, 140e3);
        assert_eq!(r.nearest(150e3).unwrap().f_high_hz, 160e3);
        assert!(find_squeezing_bands(&v[1..], &grid, 1.0).is_err());
    }

    #[test]
    fn band_at_grid_edges() {
        let grid = FrequencyGrid::linspace_hz(1.0, 5.0, 5).unwrap();
        let r = find_squeezing_bands(&[0.5, 0.9, 1.0, 0.8, 0.7], &grid, 1.0).unwrap();
        assert_eq!(r.bands.len(), 2);
        assert_eq!((r.bands[0].f_low_hz, r.bands[0].f_high_hz), (1.0, 2.0));
        assert_eq!((r.bands[1].f_low_hz, r.bands[1].f_high_hz), (4.0, 5.0));
        assert_eq!(r.bands[1].argmin_freq_hz, 5.0);
    }
}
