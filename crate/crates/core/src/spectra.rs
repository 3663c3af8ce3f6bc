//! Per-frequency symmetric 2×2 quadrature covariance matrices.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// One bin of the spectral covariance matrix `[[qq, qp], [qp, pp]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance2 {
    pub qq: f64,
    pub pp: f64,
    pub qp: f64,
}

impl Covariance2 {
    pub const VACUUM: Self = Self {
        qq: 1.0,
        pp: 1.0,
        qp: 0.0,
    };

    pub fn new(qq: f64, pp: f64, qp: f64) -> Self {
        Self { qq, pp, qp }
    }

    pub fn trace(&self) -> f64 {
        self.qq + self.pp
    }

    /// Congruence `R V Rᵀ` with `R = [[cos θ, −sin θ], [sin θ, cos θ]]`.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let (c2, s2, cs) = (c * c, s * s, c * s);
        Self {
            qq: c2 * self.qq - 2.0 * cs * self.qp + s2 * self.pp,
            pp: s2 * self.qq + 2.0 * cs * self.qp + c2 * self.pp,
            qp: cs * (self.qq - self.pp) + (c2 - s2) * self.qp,
        }
    }

    /// Average of `rotated(θ)` over θ ~ N(0, σ²).
    ///
    /// Diagonal contrast and the off-diagonal both shrink by `exp(−2σ²)`; the
    /// trace is untouched.
    pub fn dephased(&self, sigma_sq: f64) -> Self {
        // written as a correction so that σ² = 0 is an exact identity
        let loss = -(-2.0 * sigma_sq).exp_m1();
        let shift = 0.5 * (self.qq - self.pp) * loss;
        Self {
            qq: self.qq - shift,
            pp: self.pp + shift,
            qp: self.qp * (1.0 - loss),
        }
    }

    /// Spectrum of the quadrature at detection phase `phi` under phase jitter `sigma_sq`.
    pub fn quadrature(&self, phi: f64, sigma_sq: f64) -> f64 {
        let contrast = (-2.0 * sigma_sq).exp();
        let (s2, c2) = (2.0 * phi).sin_cos();
        0.5 * (self.qq + self.pp) + contrast * (0.5 * (self.qq - self.pp) * c2 + self.qp * s2)
    }

    /// Minimum of [`quadrature`](Self::quadrature) over the phase, and the
    /// phase in `[0, π)` where it is reached.
    pub fn optimal(&self, sigma_sq: f64) -> (f64, f64) {
        let contrast = (-2.0 * sigma_sq).exp();
        let diff = self.qq - self.pp;
        let radius = (diff * diff + 4.0 * self.qp * self.qp).sqrt();
        let value = 0.5 * (self.qq + self.pp) - 0.5 * contrast * radius;
        let phi = (0.5 * (2.0 * self.qp).atan2(diff) + std::f64::consts::FRAC_PI_2)
            .rem_euclid(std::f64::consts::PI);
        (value, phi)
    }

    /// Vacuum admixture for a detector of efficiency `eta`.
    pub fn detected(&self, eta: f64) -> Self {
        Self {
            qq: eta * self.qq + (1.0 - eta),
            pp: eta * self.pp + (1.0 - eta),
            qp: eta * self.qp,
        }
    }
}

/// Symmetrized output-field spectra `(S_QQ, S_PP, S_QP)` on a frequency grid,
/// in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple {
    pub grid: FrequencyGrid,
    pub s_qq: Vec<f64>,
    pub s_pp: Vec<f64>,
    pub s_qp: Vec<f64>,
}

impl SpectralTriple {
    pub fn new(grid: FrequencyGrid, s_qq: Vec<f64>, s_pp: Vec<f64>, s_qp: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if s_qq.len() != n || s_pp.len() != n || s_qp.len() != n {
            return Err(Error::Length(format!(
                "grid has {n} points but spectra have {}/{}/{}",
                s_qq.len(),
                s_pp.len(),
                s_qp.len()
            )));
        }
        Ok(Self {
            grid,
            s_qq,
            s_pp,
            s_qp,
        })
    }

    pub fn vacuum(grid: FrequencyGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            s_qq: vec![1.0; n],
            s_pp: vec![1.0; n],
            s_qp: vec![0.0; n],
        }
    }

    pub fn from_bins(grid: FrequencyGrid, bins: impl IntoIterator<Item = Covariance2>) -> Result<Self> {
        let (mut qq, mut pp, mut qp) = (Vec::new(), Vec::new(), Vec::new());
        for b in bins {
            qq.push(b.qq);
            pp.push(b.pp);
            qp.push(b.qp);
        }
        Self::new(grid, qq, pp, qp)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn bin(&self, i: usize) -> Covariance2 {
        Covariance2::new(self.s_qq[i], self.s_pp[i], self.s_qp[i])
    }

    pub fn bins(&self) -> impl Iterator<Item = Covariance2> + '_ {
        (0..self.len()).map(|i| self.bin(i))
    }

    /// Applies `f` to every bin, keeping the grid.
    pub fn map_bins(&self, f: impl Fn(Covariance2) -> Covariance2) -> Self {
        Self::from_bins(self.grid.clone(), self.bins().map(f)).expect("same length")
    }

    pub fn select(&self, mask: &[bool]) -> Result<Self> {
        let pick = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(mask)
                .filter_map(|(x, &keep)| keep.then_some(*x))
                .collect()
        };
        Self::new(
            self.grid.select(mask)?,
            pick(&self.s_qq),
            pick(&self.s_pp),
            pick(&self.s_qp),
        )
    }

    /// CSV with header `freq_hz,s_qq,s_pp,s_qp`, 12 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["freq_hz", "s_qq", "s_pp", "s_qp"])?;
        for (i, f) in self.grid.hz().into_iter().enumerate() {
            out.write_record([
                fmt12(f),
                fmt12(self.s_qq[i]),
                fmt12(self.s_pp[i]),
                fmt12(self.s_qp[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expect = ["freq_hz", "s_qq", "s_pp", "s_qp"];
        if headers.len() < 4 || expect.iter().zip(headers.iter()).any(|(a, b)| *a != b) {
            return Err(Error::Format(format!(
                "expected header freq_hz,s_qq,s_pp,s_qp, got {:?}",
                headers
            )));
        }
        let (mut hz, mut qq, mut pp, mut qp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {i}: {e}")))
            };
            hz.push(field(0)?);
            qq.push(field(1)?);
            pp.push(field(2)?);
            qp.push(field(3)?);
        }
        Self::new(FrequencyGrid::from_hz(&hz)?, qq, pp, qp)
    }
}

/// Scientific notation with 12 significant digits.
pub(crate) fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}
