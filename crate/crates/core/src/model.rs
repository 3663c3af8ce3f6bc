//! Analytic two-mode model: susceptibilities, output-field transfer
//! functions, symmetrized quadrature spectra and mechanical occupancies.
//!
//! Frequencies follow the `O(ω) = ∫ O(t) e^{iωt} dt` convention. Positions are
//! dimensionless (zero-point units) and spectra are in shot-noise units.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{on_pole, FrequencyGrid};
use crate::params::{Mode, SystemParams};
use crate::spectra::{Covariance2, SpectralTriple};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Undamped mechanical susceptibility `Ω_j / (Ω_j² − ω²)`.
pub fn mech_susceptibility(omega: f64, omega_j: f64) -> Result<f64> {
    if on_pole(omega, omega_j) {
        return Err(Error::Pole {
            omega,
            pole: omega_j,
        });
    }
    Ok(omega_j / (omega_j * omega_j - omega * omega))
}

/// Cavity susceptibility `1 / (κ/2 − i(Δ + ω))`.
pub fn cavity_susceptibility(omega: f64, delta: f64, kappa: f64) -> Complex64 {
    Complex64::new(0.5 * kappa, -(delta + omega)).inv()
}

/// Output transfer functions at one frequency. The `_neg` members are the
/// same functions evaluated at `−ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSet {
    pub a_q: Complex64,
    pub b_q_pos: Complex64,
    pub b_q_neg: Complex64,
    pub a_p: Complex64,
    pub b_p_pos: Complex64,
    pub b_p_neg: Complex64,
}

/// Shared pieces of the closed-form solution at one frequency.
struct Kernel {
    chi_x: f64,
    chi_y: f64,
    /// χ_c(ω)
    a: Complex64,
    /// χ_c*(−ω)
    b: Complex64,
    /// g_x²χ_x + g_y²χ_y
    coupling: f64,
    /// 1 − 2i(χ_c(ω) − χ_c*(−ω))(g_x²χ_x + g_y²χ_y)
    denom: Complex64,
}

impl Kernel {
    fn new(omega: f64, p: &SystemParams) -> Result<Self> {
        let chi_x = mech_susceptibility(omega, p.omega_x)?;
        let chi_y = mech_susceptibility(omega, p.omega_y)?;
        let a = cavity_susceptibility(omega, p.delta, p.kappa);
        let b = cavity_susceptibility(-omega, p.delta, p.kappa).conj();
        let coupling = p.g_x * p.g_x * chi_x + p.g_y * p.g_y * chi_y;
        let denom = 1.0 - 2.0 * I * (a - b) * coupling;
        Ok(Self {
            chi_x,
            chi_y,
            a,
            b,
            coupling,
            denom,
        })
    }

    fn a_q(&self, kappa: f64) -> Complex64 {
        I * kappa.sqrt() * (self.a - self.b) / self.denom
    }

    fn a_p(&self, kappa: f64) -> Complex64 {
        kappa.sqrt() * (self.a + self.b) / self.denom
    }

    fn b_q(&self, kappa: f64) -> Complex64 {
        kappa * self.a / self.denom - 1.0
    }

    fn b_p(&self, kappa: f64) -> Complex64 {
        -I * (kappa * self.a * (1.0 + 4.0 * I * self.b * self.coupling) / self.denom - 1.0)
    }

    /// Thermal-force weights `2 g_j χ_j √Γ_j` entering `N`.
    fn noise_weights(&self, p: &SystemParams) -> (f64, f64) {
        (
            2.0 * p.g_x * self.chi_x * p.gamma_x.sqrt(),
            2.0 * p.g_y * self.chi_y * p.gamma_y.sqrt(),
        )
    }
}

/// Evaluates 𝒜_Q, ℬ_Q, 𝒜_P, ℬ_P at `ω` and `−ω`.
///
/// `𝒜_P` is taken as `√κ (χ_c(ω) + χ_c*(−ω)) / D`, which is what eliminating
/// `x`, `y` and `Q_c` from the Langevin equations yields; it makes `P(t)` a
/// real process and the mechanical cross-spectrum even in ω.
pub fn transfer_functions(omega: f64, p: &SystemParams) -> Result<TransferSet> {
    let pos = Kernel::new(omega, p)?;
    let neg = Kernel::new(-omega, p)?;
    Ok(TransferSet {
        a_q: pos.a_q(p.kappa),
        b_q_pos: pos.b_q(p.kappa),
        b_q_neg: neg.b_q(p.kappa),
        a_p: pos.a_p(p.kappa),
        b_p_pos: pos.b_p(p.kappa),
        b_p_neg: neg.b_p(p.kappa),
    })
}

/// Spectral weight of the thermal drive, `4(g_x²χ_x²Γ_x + g_y²χ_y²Γ_y)`.
pub fn thermal_drive(omega: f64, p: &SystemParams) -> Result<f64> {
    let chi_x = mech_susceptibility(omega, p.omega_x)?;
    let chi_y = mech_susceptibility(omega, p.omega_y)?;
    Ok(4.0
        * (p.g_x * p.g_x * chi_x * chi_x * p.gamma_x + p.g_y * p.g_y * chi_y * chi_y * p.gamma_y))
}

/// Number of independent real white inputs driving the output field:
/// the two thermal forces and the two quadratures of the optical input.
pub const N_INPUTS: usize = 4;

/// Linear response of the output quadratures to `(ξ_x, ξ_y, q_in, p_in)`, each
/// a real white process of unit symmetrized spectral density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputResponse {
    pub q: [Complex64; N_INPUTS],
    pub p: [Complex64; N_INPUTS],
}

impl InputResponse {
    pub fn covariance(&self) -> Covariance2 {
        let qq = self.q.iter().map(|z| z.norm_sqr()).sum();
        let pp = self.p.iter().map(|z| z.norm_sqr()).sum();
        let qp = self
            .q
            .iter()
            .zip(&self.p)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        Covariance2::new(qq, pp, qp)
    }
}

/// Output response to each physical input at `ω`.
///
/// The optical input enters through `a_in = (q_in + i p_in)/2` and
/// `a_in† = (q_in − i p_in)/2`, so a single optical draw feeds both output
/// quadratures coherently.
pub fn input_response(omega: f64, p: &SystemParams) -> Result<InputResponse> {
    let pos = Kernel::new(omega, p)?;
    let t = transfer_functions(omega, p)?;
    let (nx, ny) = pos.noise_weights(p);
    let row = |a: Complex64, b_pos: Complex64, b_neg: Complex64| {
        let b_neg_conj = b_neg.conj();
        [
            a * nx,
            a * ny,
            0.5 * (b_pos + b_neg_conj),
            0.5 * I * (b_pos - b_neg_conj),
        ]
    };
    Ok(InputResponse {
        q: row(t.a_q, t.b_q_pos, t.b_q_neg),
        p: row(t.a_p, t.b_p_pos, t.b_p_neg),
    })
}

/// Symmetrized output spectra for perfect detection.
pub fn output_spectra(grid: &FrequencyGrid, p: &SystemParams) -> Result<SpectralTriple> {
    p.validate()?;
    grid.check_poles(p)?;
    let bins = grid
        .omegas()
        .iter()
        .map(|&w| output_bin(w, p))
        .collect::<Result<Vec<_>>>()?;
    SpectralTriple::from_bins(grid.clone(), bins)
}

fn output_bin(omega: f64, p: &SystemParams) -> Result<Covariance2> {
    let t = transfer_functions(omega, p)?;
    let drive = thermal_drive(omega, p)?;
    let qq = drive * t.a_q.norm_sqr() + 0.5 * (t.b_q_neg.norm_sqr() + t.b_q_pos.norm_sqr());
    let pp = drive * t.a_p.norm_sqr() + 0.5 * (t.b_p_neg.norm_sqr() + t.b_p_pos.norm_sqr());
    let qp = drive * (t.a_q.conj() * t.a_p).re
        + 0.5 * ((t.b_q_neg.conj() * t.b_p_neg).re + (t.b_q_pos.conj() * t.b_p_pos).re);
    Ok(Covariance2::new(qq, pp, qp))
}

/// Mixes in vacuum for the effective efficiency (η/2 with the heterodyne penalty).
pub fn apply_efficiency(s: &SpectralTriple, p: &SystemParams) -> SpectralTriple {
    apply_efficiency_with(s, p.eta_eff())
}

pub fn apply_efficiency_with(s: &SpectralTriple, eta_eff: f64) -> SpectralTriple {
    s.map_bins(|b| b.detected(eta_eff))
}

/// Spectra as a detector would record them: efficiency applied and, when
/// `phase_noise` is set, averaged over the detection-phase jitter.
pub fn measured_spectra(
    grid: &FrequencyGrid,
    p: &SystemParams,
    phase_noise: bool,
) -> Result<SpectralTriple> {
    let detected = apply_efficiency(&output_spectra(grid, p)?, p);
    Ok(if phase_noise {
        crate::squeezing::dephase_covariance(&detected, p.sigma_theta_sq)
    } else {
        detected
    })
}

/// Symmetrized displacement spectra of both modes, zero-point units.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalSpectra {
    pub grid: FrequencyGrid,
    pub s_xx: Vec<f64>,
    pub s_yy: Vec<f64>,
}

impl MechanicalSpectra {
    pub fn mode(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::X => &self.s_xx,
            Mode::Y => &self.s_yy,
        }
    }
}

/// Displacement response to `(ξ_x, ξ_y, q_in, p_in)`.
fn position_response(omega: f64, p: &SystemParams) -> Result<([Complex64; 4], [Complex64; 4])> {
    let k = Kernel::new(omega, p)?;
    let (nx, ny) = k.noise_weights(p);
    let f = k.a - k.b;
    let h = k.a + k.b;
    let sk = p.kappa.sqrt();
    // intracavity amplitude quadrature
    let qc = [
        I * f * nx / k.denom,
        I * f * ny / k.denom,
        0.5 * sk * h / k.denom,
        0.5 * I * sk * f / k.denom,
    ];
    let mut x = qc.map(|z| 2.0 * k.chi_x * p.g_x * z);
    let mut y = qc.map(|z| 2.0 * k.chi_y * p.g_y * z);
    // own thermal force, combined with its backaction image in closed form
    x[0] = 2.0 * k.chi_x * p.gamma_x.sqrt() * (1.0 - 2.0 * I * f * p.g_y * p.g_y * k.chi_y)
        / k.denom;
    y[1] = 2.0 * k.chi_y * p.gamma_y.sqrt() * (1.0 - 2.0 * I * f * p.g_x * p.g_x * k.chi_x)
        / k.denom;
    Ok((x, y))
}

pub fn mechanical_spectra(grid: &FrequencyGrid, p: &SystemParams) -> Result<MechanicalSpectra> {
    p.validate()?;
    grid.check_poles(p)?;
    let mut s_xx = Vec::with_capacity(grid.len());
    let mut s_yy = Vec::with_capacity(grid.len());
    for &w in grid.omegas() {
        let (x, y) = position_response(w, p)?;
        s_xx.push(x.iter().map(|z| z.norm_sqr()).sum());
        s_yy.push(y.iter().map(|z| z.norm_sqr()).sum());
    }
    Ok(MechanicalSpectra {
        grid: grid.clone(),
        s_xx,
        s_yy,
    })
}

/// Default threshold on `edge density / peak density` above which the
/// occupancy integral is reported as truncated.
pub const DEFAULT_EDGE_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupancy {
    /// Mean phonon number.
    pub n: f64,
    /// `⟨x²⟩` in zero-point units, `2n + 1`.
    pub variance: f64,
    /// Largest spectral density at an open grid edge relative to the peak.
    pub edge_ratio: f64,
    pub truncated: bool,
}

/// Mean occupancy from `⟨x²⟩ = ∫ S̄_xx dω/2π`, `n = (⟨x²⟩ − 1)/2`.
///
/// Trapezoidal rule on the given grid. A grid that starts at `ω ≥ 0` is taken
/// as one half of an even integrand and doubled; see [`occupancy_grid`] for a
/// grid that resolves the hybridized peaks and the `ω⁻⁴` tail.
pub fn occupancy(grid: &FrequencyGrid, p: &SystemParams, mode: Mode) -> Result<Occupancy> {
    occupancy_with(grid, p, mode, DEFAULT_EDGE_FRACTION)
}

pub fn occupancy_with(
    grid: &FrequencyGrid,
    p: &SystemParams,
    mode: Mode,
    edge_fraction: f64,
) -> Result<Occupancy> {
    if grid.len() < 2 {
        return Err(Error::Grid("occupancy needs at least two points".into()));
    }
    let spectra = mechanical_spectra(grid, p)?;
    let s = spectra.mode(mode);
    let w = grid.omegas();
    let integral: f64 = w
        .windows(2)
        .zip(s.windows(2))
        .map(|(wi, si)| 0.5 * (wi[1] - wi[0]) * (si[0] + si[1]))
        .sum::<f64>()
        / TAU;
    let one_sided = w[0] >= 0.0;
    let variance = if one_sided { 2.0 * integral } else { integral };
    let peak = s.iter().cloned().fold(0.0, f64::max);
    let last = *s.last().expect("non-empty");
    let edge = if one_sided && w[0] == 0.0 {
        last
    } else {
        last.max(s[0])
    };
    let edge_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    let truncated = edge_ratio > edge_fraction;
    if truncated {
        log::warn!(
            "occupancy integral for mode {mode:?} may be truncated: edge density is {edge_ratio:.2e} of peak"
        );
    }
    Ok(Occupancy {
        n: 0.5 * (variance - 1.0),
        variance,
        edge_ratio,
        truncated,
    })
}

/// One-sided integration grid: 5 Hz steps up to three times the highest
/// system frequency, then 4000 log-spaced points out to 300 times it.
pub fn occupancy_grid(p: &SystemParams) -> FrequencyGrid {
    let f_top = p
        .omega_x
        .max(p.omega_y)
        .max(p.delta.abs())
        .max(p.kappa)
        / TAU;
    let step = 5.0;
    let dense_end = 3.0 * f_top;
    let n_dense = (dense_end / step).ceil() as usize;
    let mut hz = Vec::with_capacity(n_dense + 4001);
    hz.push(0.0);
    hz.extend((0..n_dense).map(|k| (k as f64 + 0.5) * step));
    let start = hz.last().copied().unwrap_or(dense_end);
    let ratio = (300.0 * f_top / start).ln() / 4000.0;
    hz.extend((1..=4000).map(|k| start * (ratio * k as f64).exp()));
    for f in hz.iter_mut() {
        for pole in [p.omega_x, p.omega_y] {
            if on_pole(TAU * *f, pole) {
                *f += 0.25 * step;
            }
        }
    }
    FrequencyGrid::from_hz(&hz).expect("construction is increasing and finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured_system() -> SystemParams {
        SystemParams::reproduction()
    }

    #[test]
    fn mechanical_susceptibility_values() {
        let om = TAU * 121e3;
        assert!((mech_susceptibility(0.0, om).unwrap() * om - 1.0).abs() < 1e-15);
        let v = mech_susceptibility(2f64.sqrt() * om, om).unwrap();
        assert!((v + 1.0 / om).abs() * om < 1e-12);
        assert!(matches!(mech_susceptibility(om, om), Err(Error::Pole { .. })));
        assert!(matches!(mech_susceptibility(-om, om), Err(Error::Pole { .. })));
        // even in ω
        assert_eq!(
            mech_susceptibility(0.3 * om, om).unwrap(),
            mech_susceptibility(-0.3 * om, om).unwrap()
        );
    }

    #[test]
    fn cavity_susceptibility_values() {
        let kappa = TAU * 57e3;
        let z = cavity_susceptibility(0.0, 0.0, kappa);
        assert!((z.re - 2.0 / kappa).abs() < 1e-20 && z.im == 0.0);
        let delta = -TAU * 115e3;
        let z = cavity_susceptibility(-delta, delta, kappa);
        assert!((z.re - 2.0 / kappa).abs() < 1e-20 && z.im.abs() < 1e-25);
        assert!(cavity_susceptibility(1e15, delta, kappa).norm() < 1e-14);
        for k in 0..200 {
            let w = -1e6 + 1e4 * k as f64;
            assert!(cavity_susceptibility(w, delta, kappa).norm() <= 2.0 / kappa * (1.0 + 1e-15));
        }
    }

    #[test]
    fn decoupled_b_q_is_a_pure_phase() {
        let p = measured_system().decoupled();
        for k in 0..100 {
            let w = TAU * (-300e3 + 6.1e3 * k as f64);
            let t = transfer_functions(w, &p).unwrap();
            assert!((t.b_q_pos.norm() - 1.0).abs() < 1e-13);
            assert!((t.b_p_pos.norm() - 1.0).abs() < 1e-13);
            let expected = p.kappa * cavity_susceptibility(w, p.delta, p.kappa) - 1.0;
            assert!((t.b_q_pos - expected).norm() < 1e-13);
            assert_eq!(thermal_drive(w, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn shot_noise_limit_for_any_detuning() {
        let grid = FrequencyGrid::linspace_hz(1e3, 500e3, 777).unwrap();
        for delta_hz in [-300e3, -115e3, 0.0, 40e3] {
            let p = measured_system().decoupled().with_delta_hz(delta_hz);
            let s = output_spectra(&grid, &p).unwrap();
            for b in s.bins() {
                assert!((b.qq - 1.0).abs() < 1e-12);
                assert!((b.pp - 1.0).abs() < 1e-12);
                assert!(b.qp.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectra_are_even() {
        let p = measured_system();
        let grid = FrequencyGrid::linspace_hz(3.3e3, 333.3e3, 401).unwrap();
        let pos = output_spectra(&grid, &p).unwrap();
        let neg = output_spectra(&grid.negated(), &p).unwrap();
        let n = grid.len();
        for i in 0..n {
            let (a, b) = (pos.bin(i), neg.bin(n - 1 - i));
            let scale = a.qq.abs().max(1.0);
            assert!((a.qq - b.qq).abs() < 1e-12 * scale);
            assert!((a.pp - b.pp).abs() < 1e-12 * scale);
            assert!((a.qp - b.qp).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn input_response_reproduces_closed_form() {
        let p = measured_system();
        let grid = FrequencyGrid::linspace_hz(40e3, 200e3, 301).unwrap();
        let s = output_spectra(&grid, &p).unwrap();
        for (i, &w) in grid.omegas().iter().enumerate() {
            let c = input_response(w, &p).unwrap().covariance();
            let b = s.bin(i);
            assert!((c.qq - b.qq).abs() < 1e-11 * b.qq);
            assert!((c.pp - b.pp).abs() < 1e-11 * b.pp);
            assert!((c.qp - b.qp).abs() < 1e-11 * b.qq.max(b.pp));
        }
    }

    #[test]
    fn efficiency_examples() {
        let mut p = measured_system();
        let grid = FrequencyGrid::from_hz(&[1.0, 2.0]).unwrap();
        let vac = SpectralTriple::vacuum(grid.clone());
        assert_eq!(apply_efficiency(&vac, &p), vac);
        let s = SpectralTriple::new(grid.clone(), vec![2.0, 0.96], vec![1.0, 1.0], vec![0.0, 0.0])
            .unwrap();
        let d = apply_efficiency(&s, &p);
        assert!((d.s_qq[0] - 1.16).abs() < 1e-15);
        assert!((d.s_qq[1] - 0.9936).abs() < 1e-15);
        p.heterodyne_penalty = false;
        let d = apply_efficiency(&s, &p);
        assert!((d.s_qq[0] - 1.32).abs() < 1e-15);
    }

    #[test]
    fn detection_floor_holds() {
        let p = measured_system();
        let grid = FrequencyGrid::linspace_hz(1e3, 400e3, 2001).unwrap();
        let d = measured_spectra(&grid, &p, false).unwrap();
        let floor = 1.0 - p.eta_eff();
        assert!(d.s_qq.iter().chain(&d.s_pp).all(|&v| v >= floor));
    }

    #[test]
    fn asymptotically_shot_noise() {
        let p = measured_system();
        let top = 100.0 * p.omega_x.max(p.delta.abs()).max(p.kappa) / TAU;
        let grid = FrequencyGrid::linspace_hz(top, 10.0 * top, 50).unwrap();
        let s = output_spectra(&grid, &p).unwrap();
        for b in s.bins() {
            assert!((b.qq - 1.0).abs() < 1e-6);
            assert!((b.pp - 1.0).abs() < 1e-6);
            assert!(b.qp.abs() < 1e-6);
        }
    }

    #[test]
    fn heating_scales_only_the_thermal_term() {
        let p = measured_system();
        let grid = FrequencyGrid::linspace_hz(20e3, 250e3, 500).unwrap();
        let mut cold = p;
        cold.gamma_x = 0.0;
        cold.gamma_y = 0.0;
        let mut hot = p;
        hot.gamma_x *= 3.0;
        hot.gamma_y *= 3.0;
        let s0 = output_spectra(&grid, &cold).unwrap();
        let s1 = output_spectra(&grid, &p).unwrap();
        let s3 = output_spectra(&grid, &hot).unwrap();
        for i in 0..grid.len() {
            let (a, b, c) = (s0.bin(i), s1.bin(i), s3.bin(i));
            assert!(((c.qq - a.qq) - 3.0 * (b.qq - a.qq)).abs() < 1e-10 * c.qq);
            assert!(((c.pp - a.pp) - 3.0 * (b.pp - a.pp)).abs() < 1e-10 * c.pp);
            assert!(((c.qp - a.qp) - 3.0 * (b.qp - a.qp)).abs() < 1e-10 * c.qq);
        }
    }

    #[test]
    fn decoupled_mechanics_is_free_heated_oscillator() {
        let p = measured_system().decoupled();
        let grid = FrequencyGrid::linspace_hz(10e3, 300e3, 97).unwrap();
        let m = mechanical_spectra(&grid, &p).unwrap();
        for (i, &w) in grid.omegas().iter().enumerate() {
            let chi = mech_susceptibility(w, p.omega_x).unwrap();
            let expect = 4.0 * chi * chi * p.gamma_x;
            assert!((m.s_xx[i] - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn reproduction_occupancies_are_below_one() {
        let p = measured_system();
        let grid = occupancy_grid(&p);
        let nx = occupancy(&grid, &p, Mode::X).unwrap();
        let ny = occupancy(&grid, &p, Mode::Y).unwrap();
        assert!(!nx.truncated && !ny.truncated);
        assert!(nx.n > 0.3 && nx.n < 0.9, "{nx:?}");
        assert!(ny.n > 0.4 && ny.n < 1.0, "{ny:?}");
    }

    #[test]
    fn occupancy_is_linear_in_heating() {
        // ⟨x²⟩(cΓ) − ⟨x²⟩(0) = c (⟨x²⟩(Γ) − ⟨x²⟩(0))
        let p = measured_system();
        let grid = occupancy_grid(&p);
        let mut cold = p;
        cold.gamma_x = 0.0;
        cold.gamma_y = 0.0;
        let mut hot = p;
        hot.gamma_x *= 2.0;
        hot.gamma_y *= 2.0;
        for mode in [Mode::X, Mode::Y] {
            let v0 = occupancy(&grid, &cold, mode).unwrap().variance;
            let v1 = occupancy(&grid, &p, mode).unwrap().variance;
            let v2 = occupancy(&grid, &hot, mode).unwrap().variance;
            assert!(((v2 - v0) - 2.0 * (v1 - v0)).abs() < 1e-9 * v2);
            // backaction floor alone sits just above the ground state
            assert!(v0 > 1.0 && v0 < 1.2, "floor {v0}");
        }
    }

    #[test]
    fn vanishing_heating_of_one_mode_approaches_ground_state() {
        let mut p = measured_system();
        p.g_y = 0.0;
        let grid = occupancy_grid(&p);
        let ns: Vec<f64> = [1e-3, 1e-2]
            .iter()
            .map(|&scale| {
                let mut q = p;
                q.gamma_x = p.gamma_x * scale;
                occupancy(&grid, &q, Mode::X).unwrap().n
            })
            .collect();
        // linear extrapolation to zero heating
        let n0 = ns[0] - (ns[1] - ns[0]) / 9.0;
        assert!((-1e-6..0.05).contains(&n0), "extrapolated floor {n0}");
    }
}
