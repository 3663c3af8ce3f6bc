//! Shot-noise calibration: divide a measured covariance by the smoothed
//! diagonal of a vacuum reference record taken with the couplings off.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectra::SpectralTriple;

use super::welch::{BatchMean, EstimatedCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Odd width, in bins, of the quadratic Savitzky–Golay smoother applied
    /// to the reference diagonal. 1 disables smoothing.
    pub smoothing_bins: usize,
    /// Reference bins below this fraction of the reference median are refused.
    pub near_zero_fraction: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            smoothing_bins: 129,
            near_zero_fraction: 1e-3,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_bins == 0 || self.smoothing_bins.is_multiple_of(2) {
            return Err(invalid("smoothing_bins", "must be odd and ≥ 1"));
        }
        if !(self.near_zero_fraction > 0.0 && self.near_zero_fraction < 1.0) {
            return Err(invalid("near_zero_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Least-squares quadratic through `len` equally spaced points, evaluated
/// at offset `at` (0-based within the window): returns the linear weights.
fn sg_weights(len: usize, at: usize) -> Vec<f64> {
    if len < 3 {
        return (0..len).map(|j| if j == at { 1.0 } else { 0.0 }).collect();
    }
    let c = (len as f64 - 1.0) / 2.0;
    let xs: Vec<f64> = (0..len).map(|j| j as f64 - c).collect();
    // normal matrix for the basis 1, x, x²
    let mut m = [[0.0f64; 3]; 3];
    for &x in &xs {
        let b = [1.0, x, x * x];
        for r in 0..3 {
            for s in 0..3 {
                m[r][s] += b[r] * b[s];
            }
        }
    }
    let inv = invert3(m);
    let x0 = at as f64 - c;
    let e = [1.0, x0, x0 * x0];
    let row: Vec<f64> = (0..3).map(|s| (0..3).map(|r| e[r] * inv[r][s]).sum()).collect();
    xs.iter().map(|&x| row[0] + row[1] * x + row[2] * x * x).collect()
}

#[allow(clippy::needless_range_loop)]
fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            let (r1, r2) = ((s + 1) % 3, (s + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            out[r][s] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    out
}

/// Smoothed values and their propagated standard errors. Windows are
/// shifted inward at the edges rather than truncated.
pub fn savitzky_golay(values: &[f64], stderr: &[f64], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let len = width.min(n);
    let half = len / 2;
    let interior = sg_weights(len, half);
    let mut out = Vec::with_capacity(n);
    let mut err = Vec::with_capacity(n);
    let mut edge_cache: Vec<Option<Vec<f64>>> = vec![None; len];
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - len);
        let at = i - start;
        let w = if at == half {
            &interior
        } else {
            edge_cache[at].get_or_insert_with(|| sg_weights(len, at))
        };
        let win = start..start + len;
        out.push(w.iter().zip(&values[win.clone()]).map(|(a, b)| a * b).sum());
        err.push(w.iter().zip(&stderr[win]).map(|(a, s)| (a * s).powi(2)).sum::<f64>().sqrt());
    }
    (out, err)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Divides `raw` by the smoothed reference diagonal: `S_QQ/r_Q`, `S_PP/r_P`,
/// `S_QP/√(r_Q r_P)`. Standard errors include the reference uncertainty.
pub fn calibrate_shot_noise(
    raw: &EstimatedCovariance,
    reference: &EstimatedCovariance,
    c: &CalibrationConfig,
) -> Result<EstimatedCovariance> {
    c.validate()?;
    if !raw.grid().matches(reference.grid(), 1e-9) {
        return Err(Error::Grid(
            "reference and raw estimates are on different frequency grids".into(),
        ));
    }
    let rs = &reference.spectra;
    let (rq, eq) = savitzky_golay(&rs.s_qq, &reference.stderr_qq, c.smoothing_bins);
    let (rp, ep) = savitzky_golay(&rs.s_pp, &reference.stderr_pp, c.smoothing_bins);
    let hz = raw.grid().hz();
    for r in [&rq, &rp] {
        let floor = c.near_zero_fraction * median(r).abs();
        if let Some(bin) = r.iter().position(|&v| !(v > floor)) {
            return Err(Error::ReferenceNearZero {
                bin,
                freq_hz: hz[bin],
            });
        }
    }
    let cross: Vec<f64> = rq.iter().zip(&rp).map(|(a, b)| (a * b).sqrt()).collect();
    let s = &raw.spectra;
    let div = |v: &[f64], d: &[f64]| -> Vec<f64> { v.iter().zip(d).map(|(a, b)| a / b).collect() };
    let err = |v: &[f64], se: &[f64], d: &[f64], rel_ref: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let x = v[i] / d[i];
                ((se[i] / d[i]).powi(2) + (x * rel_ref(i)).powi(2)).sqrt()
            })
            .collect()
    };
    let rel_q = |i: usize| eq[i] / rq[i];
    let rel_p = |i: usize| ep[i] / rp[i];
    let rel_x = |i: usize| 0.5 * (rel_q(i).powi(2) + rel_p(i).powi(2)).sqrt();
    Ok(EstimatedCovariance {
        spectra: SpectralTriple::new(
            s.grid.clone(),
            div(&s.s_qq, &rq),
            div(&s.s_pp, &rp),
            div(&s.s_qp, &cross),
        )?,
        stderr_qq: err(&s.s_qq, &raw.stderr_qq, &rq, &rel_q),
        stderr_pp: err(&s.s_pp, &raw.stderr_pp, &rp, &rel_p),
        stderr_qp: err(&s.s_qp, &raw.stderr_qp, &cross, &rel_x),
        qp_imag: div(&raw.qp_imag, &cross),
        n_segments: raw.n_segments,
        batches: raw
            .batches
            .iter()
            .map(|b| BatchMean {
                qq: div(&b.qq, &rq),
                pp: div(&b.pp, &rp),
                qp: div(&b.qp, &cross),
                segments: b.segments,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;

    fn estimate(hz: &[f64], qq: Vec<f64>, pp: Vec<f64>, qp: Vec<f64>) -> EstimatedCovariance {
        let n = hz.len();
        EstimatedCovariance {
            spectra: SpectralTriple::new(FrequencyGrid::from_hz(hz).unwrap(), qq, pp, qp).unwrap(),
            stderr_qq: vec![0.01; n],
            stderr_pp: vec![0.01; n],
            stderr_qp: vec![0.01; n],
            qp_imag: vec![0.0; n],
            n_segments: 10,
            batches: Vec::new(),
        }
    }

    fn hz(n: usize) -> Vec<f64> {
        (0..n).map(|i| 1000.0 + 32.0 * i as f64).collect()
    }

    #[test]
    fn weights_reproduce_quadratics() {
        for at in [0, 3, 6] {
            let w = sg_weights(7, at);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let y: f64 = w.iter().enumerate().map(|(j, c)| c * (j as f64).powi(2)).sum();
            assert!((y - (at as f64).powi(2)).abs() < 1e-10);
        }
        // classic 5-point coefficients (−3, 12, 17, 12, −3)/35
        let w = sg_weights(5, 2);
        assert!((w[0] + 3.0 / 35.0).abs() < 1e-14 && (w[2] - 17.0 / 35.0).abs() < 1e-14);
    }

    #[test]
    fn reference_equal_to_raw_gives_ones() {
        let f = hz(300);
        let g: Vec<f64> = f.iter().map(|x| 2.0 + 1e-5 * x).collect();
        let e = estimate(&f, g.clone(), g.clone(), vec![0.0; 300]);
        let out = calibrate_shot_noise(&e, &e, &CalibrationConfig::default()).unwrap();
        for v in out.spectra.s_qq.iter().chain(&out.spectra.s_pp) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_two_white_is_unity() {
        let f = hz(200);
        let e = estimate(&f, vec![2.0; 200], vec![2.0; 200], vec![1.0; 200]);
        let out = calibrate_shot_noise(&e, &e, &CalibrationConfig::default()).unwrap();
        assert!(out.spectra.s_qq.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(out.spectra.s_qp.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(out.stderr_qq.iter().all(|&s| s > 0.005));
    }

    #[test]
    fn injected_slope_is_removed() {
        use rand::{Rng, SeedableRng};
        let n = 4000;
        let f = hz(n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        // 1% gain slope across the band, 2% per-bin scatter on the reference
        let gain: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64 / n as f64).collect();
        let noisy: Vec<f64> = gain.iter().map(|g| g * (1.0 + 0.02 * (rng.random::<f64>() - 0.5) * 3.46)).collect();
        let reference = estimate(&f, noisy.clone(), noisy, vec![0.0; n]);
        let raw = estimate(&f, gain.clone(), gain, vec![0.0; n]);
        let out = calibrate_shot_noise(&raw, &reference, &CalibrationConfig::default()).unwrap();
        // least-squares slope of the calibrated spectrum over the full band
        let y = &out.spectra.s_qq;
        let xm = (n as f64 - 1.0) / 2.0;
        let ym = y.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, v) in y.iter().enumerate() {
            sxy += (i as f64 - xm) * (v - ym);
            sxx += (i as f64 - xm).powi(2);
        }
        let residual_slope = sxy / sxx * n as f64;
        assert!(residual_slope.abs() < 1e-3, "{residual_slope}");
    }

    #[test]
    fn near_zero_reference_is_refused() {
        let f = hz(200);
        let mut r = vec![1.0; 200];
        for v in &mut r[100..110] {
            *v = 0.0;
        }
        let refe = estimate(&f, r.clone(), vec![1.0; 200], vec![0.0; 200]);
        let raw = estimate(&f, vec![1.0; 200], vec![1.0; 200], vec![0.0; 200]);
        let c = CalibrationConfig {
            smoothing_bins: 1,
            ..CalibrationConfig::default()
        };
        assert!(matches!(
            calibrate_shot_noise(&raw, &refe, &c),
            Err(Error::ReferenceNearZero { bin: 100, .. })
        ));
    }

    #[test]
    fn grid_mismatch_is_refused() {
        let a = estimate(&hz(10), vec![1.0; 10], vec![1.0; 10], vec![0.0; 10]);
        let f: Vec<f64> = hz(10).iter().map(|x| x + 1.0).collect();
        let b = estimate(&f, vec![1.0; 10], vec![1.0; 10], vec![0.0; 10]);
        assert!(calibrate_shot_noise(&a, &b, &CalibrationConfig::default()).is_err());
    }
}
