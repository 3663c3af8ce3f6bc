//! Least-squares fit of the phase-noise variance σ² to a measured
//! covariance matrix, all other parameters held fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::welch::EstimatedCovariance;
use crate::error::{invalid, Error, Result};
use crate::spectra::{Covariance2, SpectralTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Uniform,
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Analysis band `(f_low, f_high)` in Hz.
    pub freq_band: (f64, f64),
    /// Search interval for σ² in rad².
    pub sigma_sq_bounds: (f64, f64),
    pub weight_mode: WeightMode,
    /// Absolute convergence tolerance on σ².
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Resamples for the bootstrap interval used with uniform weights.
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            freq_band: (50e3, 170e3),
            sigma_sq_bounds: (0.0, 0.5),
            weight_mode: WeightMode::InverseVariance,
            tolerance: 1e-7,
            max_iterations: 500,
            bootstrap_resamples: 200,
            bootstrap_seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.freq_band;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid("freq_band", "need f_low < f_high"));
        }
        let (a, b) = self.sigma_sq_bounds;
        if !(a >= 0.0 && b.is_finite() && a < b) {
            return Err(invalid("sigma_sq_bounds", "need 0 ≤ lower < upper"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Δχ² = 1 on the inverse-variance residual.
    DeltaChiSquare,
    /// Percentiles of refits to resampled Welch batch means.
    Bootstrap,
    /// Δχ² rescaled by the residual per degree of freedom (uniform weights
    /// without batch means).
    ScaledDeltaChiSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub sigma_sq_hat: f64,
    pub residual_sum: f64,
    /// Residual contributions of the `QQ`, `PP`, `QP` and `PQ` panels.
    pub per_element_residuals: [f64; 4],
    pub ci_68: (f64, f64),
    pub ci_method: IntervalMethod,
    pub n_bins: usize,
    /// The minimum sits on a search bound; the value is a limit, not an estimate.
    pub at_bound: bool,
    pub iterations: usize,
}

/// Data and model restricted to the analysis band.
struct Banded {
    data: Vec<Covariance2>,
    model: Vec<Covariance2>,
    weights: Vec<[f64; 3]>,
}

impl Banded {
    fn new(data: &EstimatedCovariance, model: &SpectralTriple, c: &FitConfig) -> Result<Self> {
        if !data.grid().matches(&model.grid, 1e-9) {
            return Err(Error::Grid(format!(
                "data ({} bins) and model ({} bins) are on different frequency grids",
                data.len(),
                model.len()
            )));
        }
        let (lo, hi) = c.freq_band;
        let mask = data.grid().band_mask(lo, hi);
        let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if idx.is_empty() {
            return Err(Error::EmptyBand { lo_hz: lo, hi_hz: hi });
        }
        let weights = idx
            .iter()
            .map(|&i| match c.weight_mode {
                WeightMode::Uniform => [1.0; 3],
                WeightMode::InverseVariance => [
                    data.stderr_qq[i].powi(-2),
                    data.stderr_pp[i].powi(-2),
                    data.stderr_qp[i].powi(-2),
                ],
            })
            .collect();
        Ok(Self {
            data: idx.iter().map(|&i| data.spectra.bin(i)).collect(),
            model: idx.iter().map(|&i| model.bin(i)).collect(),
            weights,
        })
    }

    fn elements(&self, sigma_sq: f64) -> [f64; 4] {
        let mut acc = [0.0; 3];
        for ((d, m), w) in self.data.iter().zip(&self.model).zip(&self.weights) {
            let m = m.dephased(sigma_sq);
            acc[0] += w[0] * (d.qq - m.qq).powi(2);
            acc[1] += w[1] * (d.pp - m.pp).powi(2);
            acc[2] += w[2] * (d.qp - m.qp).powi(2);
        }
        [acc[0], acc[1], acc[2], acc[2]]
    }

    fn residual(&self, sigma_sq: f64) -> f64 {
        self.elements(sigma_sq).iter().sum()
    }
}

/// Weighted squared distance between the data and the model dephased by
/// `sigma_sq`, summed over the four matrix panels (the off-diagonal twice).
pub fn residual_phase_noise(
    sigma_sq: f64,
    data: &EstimatedCovariance,
    model: &SpectralTriple,
    c: &FitConfig,
) -> Result<f64> {
    c.validate()?;
    Ok(Banded::new(data, model, c)?.residual(sigma_sq))
}

/// Outcome of a bounded scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Brent's bounded minimizer: golden-section steps with parabolic
/// interpolation when it is safe. The bounds themselves are not evaluated.
pub fn minimize_bounded(
    f: impl Fn(f64) -> f64,
    lower: f64,
    upper: f64,
    xatol: f64,
    max_iterations: usize,
) -> Result<Minimum> {
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (lower, upper);
    let mut xf = a + golden * (b - a);
    let (mut nfc, mut fulc) = (xf, xf);
    let (mut rat, mut e) = (0.0f64, 0.0f64);
    let mut fx = f(xf);
    let (mut ffulc, mut fnfc) = (fx, fx);
    let mut xm = 0.5 * (a + b);
    let mut tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
    let mut tol2 = 2.0 * tol1;
    let mut iterations = 0;
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        let mut use_golden = true;
        if e.abs() > tol1 {
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                use_golden = false;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = tol1 * sign(xm - xf);
                }
            }
        }
        if use_golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden * e;
        }
        let x = xf + sign(rat) * rat.abs().max(tol1);
        let fu = f(x);
        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = sqrt_eps * xf.abs() + xatol / 3.0;
        tol2 = 2.0 * tol1;
        iterations += 1;
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations });
        }
    }
    Ok(Minimum {
        x: xf,
        value: fx,
        iterations,
    })
}

/// Bounded minimum that also inspects the bounds, which Brent never samples.
fn minimize_closed(
    f: &impl Fn(f64) -> f64,
    (lo, hi): (f64, f64),
    tol: f64,
    max_iterations: usize,
) -> Result<(Minimum, bool)> {
    let inner = minimize_bounded(f, lo, hi, tol, max_iterations)?;
    let mut best = (inner, false);
    for edge in [lo, hi] {
        let v = f(edge);
        if v <= best.0.value {
            best = (
                Minimum {
                    x: edge,
                    value: v,
                    iterations: inner.iterations,
                },
                true,
            );
        }
    }
    if !best.1 && (best.0.x - lo < 2.0 * tol || hi - best.0.x < 2.0 * tol) {
        best.1 = true;
    }
    Ok(best)
}

/// Where `f` first reaches `target` walking from `from` towards `to`, by
/// bisection; `to` itself if it never does.
fn crossing(f: &impl Fn(f64) -> f64, from: f64, to: f64, target: f64, tol: f64) -> f64 {
    if f(to) < target {
        return to;
    }
    let (mut inside, mut outside) = (from, to);
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if f(mid) < target {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    0.5 * (inside + outside)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, t) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] * (1.0 - t) + sorted[j] * t
}

/// Fits σ² by bounded minimization of [`residual_phase_noise`].
///
/// The 68% interval comes from Δχ² = 1 with inverse-variance weights, and
/// from a bootstrap over the Welch batch means with uniform weights.
pub fn fit_sigma_theta(
    data: &EstimatedCovariance,
    model: &SpectralTriple,
    c: &FitConfig,
) -> Result<FitResult> {
    c.validate()?;
    let banded = Banded::new(data, model, c)?;
    let f = |s: f64| banded.residual(s);
    let (best, at_bound) = minimize_closed(&f, c.sigma_sq_bounds, c.tolerance, c.max_iterations)?;
    if at_bound {
        log::warn!(
            "σ² minimum {:.4e} lies on the search bound [{}, {}]",
            best.x,
            c.sigma_sq_bounds.0,
            c.sigma_sq_bounds.1
        );
    }
    let n_bins = banded.data.len();
    let (lo_b, hi_b) = c.sigma_sq_bounds;
    let delta_ci = |threshold: f64| {
        (
            crossing(&f, best.x, lo_b, best.value + threshold, c.tolerance),
            crossing(&f, best.x, hi_b, best.value + threshold, c.tolerance),
        )
    };
    let (ci, method) = match c.weight_mode {
        WeightMode::InverseVariance => (delta_ci(1.0), IntervalMethod::DeltaChiSquare),
        WeightMode::Uniform if data.batches.len() >= 2 => {
            (bootstrap(data, model, c)?, IntervalMethod::Bootstrap)
        }
        WeightMode::Uniform => {
            // residual per degree of freedom stands in for the unknown variance
            let dof = (3 * n_bins).saturating_sub(1).max(1) as f64;
            (delta_ci(best.value / dof), IntervalMethod::ScaledDeltaChiSquare)
        }
    };
    Ok(FitResult {
        sigma_sq_hat: best.x,
        residual_sum: best.value,
        per_element_residuals: banded.elements(best.x),
        ci_68: (ci.0.min(best.x), ci.1.max(best.x)),
        ci_method: method,
        n_bins,
        at_bound,
        iterations: best.iterations,
    })
}

fn bootstrap(data: &EstimatedCovariance, model: &SpectralTriple, c: &FitConfig) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.bootstrap_seed);
    let batches = &data.batches;
    let n = data.len();
    let mut fits = Vec::with_capacity(c.bootstrap_resamples);
    for _ in 0..c.bootstrap_resamples.max(2) {
        let (mut qq, mut pp, mut qp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut total = 0.0;
        for _ in 0..batches.len() {
            let b = &batches[rng.random_range(0..batches.len())];
            let w = b.segments as f64;
            total += w;
            for i in 0..n {
                qq[i] += w * b.qq[i];
                pp[i] += w * b.pp[i];
                qp[i] += w * b.qp[i];
            }
        }
        for v in qq.iter_mut().chain(pp.iter_mut()).chain(qp.iter_mut()) {
            *v /= total;
        }
        let resampled = EstimatedCovariance {
            spectra: SpectralTriple::new(data.grid().clone(), qq, pp, qp)?,
            batches: Vec::new(),
            ..data.clone()
        };
        let banded = Banded::new(&resampled, model, c)?;
        let f = |s: f64| banded.residual(s);
        fits.push(minimize_closed(&f, c.sigma_sq_bounds, c.tolerance, c.max_iterations)?.0.x);
    }
    fits.sort_by(f64::total_cmp);
    Ok((percentile(&fits, 0.158_655), percentile(&fits, 0.841_345)))
}

/// Global rotation θ, in `[−π/2, π/2)`, for which `model.rotated(θ)` best
/// matches the data's off-diagonal spectrum in the L2 sense over `band`.
///
/// Detection phase references are arbitrary, so this aligns the data's
/// reference with the model's before fitting.
pub fn align_phase(
    data: &EstimatedCovariance,
    model: &SpectralTriple,
    band: (f64, f64),
) -> Result<f64> {
    let c = FitConfig {
        freq_band: band,
        weight_mode: WeightMode::Uniform,
        ..FitConfig::default()
    };
    let banded = Banded::new(data, model, &c)?;
    let cost = |theta: f64| -> f64 {
        banded
            .data
            .iter()
            .zip(&banded.model)
            .map(|(d, m)| (d.qp - m.rotated(theta).qp).powi(2))
            .sum()
    };
    let half = std::f64::consts::FRAC_PI_2;
    let steps = 720;
    let h = 2.0 * half / steps as f64;
    let coarse = (0..steps)
        .map(|k| -half + k as f64 * h)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("non-empty scan");
    let refined = minimize_bounded(cost, coarse - h, coarse + h, 1e-10, 200)?;
    Ok((refined.x + half).rem_euclid(2.0 * half) - half)
}
