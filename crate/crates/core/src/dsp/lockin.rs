//! Numerical lock-in: mixing with quadrature references at the beat
//! frequency, zero-phase low-pass filtering and decimation; plus slow
//! beat-phase tracking on a carrier.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::dsp::filter::{filtfilt, filtfilt_with, LowPass, Padding, ZeroPhaseStream};
use crate::error::{invalid, Error, Result};
use crate::synth::Nco;
use crate::trace::TimeTrace;

/// Default lock-in filter order.
pub const DEFAULT_LP_ORDER: usize = 4;
/// Default lock-in corner, Hz; just below half the default beat.
pub const DEFAULT_LP_CORNER: f64 = 190e3;

#[derive(Debug, Clone, PartialEq)]
pub struct HeterodyneRecord {
    pub trace: TimeTrace,
    pub nominal_beat_freq: f64,
}

impl HeterodyneRecord {
    pub fn new(trace: TimeTrace, nominal_beat_freq: f64) -> Result<Self> {
        if !(nominal_beat_freq > 0.0 && nominal_beat_freq < 0.5 * trace.sample_rate) {
            return Err(invalid("nominal_beat_freq", "must lie inside the Nyquist band"));
        }
        Ok(Self {
            trace,
            nominal_beat_freq,
        })
    }
}

fn check_corner(beat: f64, corner: f64) -> Result<()> {
    if !(corner > 0.0 && corner < 0.5 * beat) {
        return Err(invalid(
            "lp_corner",
            format!("must lie in (0, beat/2 = {} Hz)", 0.5 * beat),
        ));
    }
    Ok(())
}

/// Demodulates with references `2cos(ω_b t − φ_lo)` and `2sin(ω_b t − φ_lo)`.
///
/// For `v = q cos ω_b t + p sin ω_b t` the outputs are `q` and `p` rotated by
/// `−φ_lo`: a pure cosine gives `(1, 0)` at `φ_lo = 0` and `(0, −1)` at
/// `φ_lo = π/2`. Filtering is zero-phase (forward–backward Butterworth).
pub fn lock_in_demodulate(
    r: &HeterodyneRecord,
    lo_phase: f64,
    lp_corner: f64,
) -> Result<(TimeTrace, TimeTrace)> {
    lock_in_demodulate_with(r, lo_phase, lp_corner, DEFAULT_LP_ORDER)
}

pub fn lock_in_demodulate_with(
    r: &HeterodyneRecord,
    lo_phase: f64,
    lp_corner: f64,
    order: usize,
) -> Result<(TimeTrace, TimeTrace)> {
    check_corner(r.nominal_beat_freq, lp_corner)?;
    let fs = r.trace.sample_rate;
    let lp = LowPass::butterworth(order, lp_corner, fs)?;
    let mut nco = Nco::new(r.nominal_beat_freq, fs, -lo_phase);
    let (mi, mq): (Vec<f64>, Vec<f64>) = r
        .trace
        .samples
        .iter()
        .map(|v| {
            let (c, s) = nco.next_cos_sin();
            (2.0 * v * c, 2.0 * v * s)
        })
        .unzip();
    Ok((
        TimeTrace::new(filtfilt_with(&lp, &mi, Padding::Even), fs, "Q_m")?,
        TimeTrace::new(filtfilt_with(&lp, &mq, Padding::Even), fs, "P_m")?,
    ))
}

/// Streaming lock-in with decimation after the zero-phase filter.
pub struct LockIn {
    nco: Nco,
    q: ZeroPhaseStream,
    p: ZeroPhaseStream,
    decimation: usize,
    emitted_q: usize,
    emitted_p: usize,
    mix_q: Vec<f64>,
    mix_p: Vec<f64>,
    out_q: Vec<f64>,
    out_p: Vec<f64>,
    sample_rate: f64,
}

impl LockIn {
    pub fn new(
        sample_rate: f64,
        beat: f64,
        lo_phase: f64,
        lp_corner: f64,
        order: usize,
        decimation: usize,
    ) -> Result<Self> {
        check_corner(beat, lp_corner)?;
        if decimation == 0 {
            return Err(invalid("decimation", "must be ≥ 1"));
        }
        if lp_corner >= 0.5 * sample_rate / decimation as f64 {
            return Err(invalid("decimation", "output Nyquist must exceed the corner"));
        }
        let lp = LowPass::butterworth(order, lp_corner, sample_rate)?;
        let block = 1 << 16;
        Ok(Self {
            nco: Nco::new(beat, sample_rate, -lo_phase),
            q: ZeroPhaseStream::new(&lp, block),
            p: ZeroPhaseStream::new(&lp, block),
            decimation,
            emitted_q: 0,
            emitted_p: 0,
            mix_q: Vec::new(),
            mix_p: Vec::new(),
            out_q: Vec::new(),
            out_p: Vec::new(),
            sample_rate,
        })
    }

    pub fn output_rate(&self) -> f64 {
        self.sample_rate / self.decimation as f64
    }

    /// Mixes and filters `v`, appending decimated `(Q_m, P_m)` samples.
    pub fn push(&mut self, v: &[f64], q_out: &mut Vec<f64>, p_out: &mut Vec<f64>) {
        self.mix_q.clear();
        self.mix_p.clear();
        for &x in v {
            let (c, s) = self.nco.next_cos_sin();
            self.mix_q.push(2.0 * x * c);
            self.mix_p.push(2.0 * x * s);
        }
        self.out_q.clear();
        self.out_p.clear();
        self.q.push(&self.mix_q, &mut self.out_q);
        self.p.push(&self.mix_p, &mut self.out_p);
        Self::decimate(&self.out_q, &mut self.emitted_q, self.decimation, q_out);
        Self::decimate(&self.out_p, &mut self.emitted_p, self.decimation, p_out);
    }

    pub fn finish(mut self, q_out: &mut Vec<f64>, p_out: &mut Vec<f64>) {
        self.out_q.clear();
        self.out_p.clear();
        self.q.finish(&mut self.out_q);
        self.p.finish(&mut self.out_p);
        Self::decimate(&self.out_q, &mut self.emitted_q, self.decimation, q_out);
        Self::decimate(&self.out_p, &mut self.emitted_p, self.decimation, p_out);
    }

    fn decimate(src: &[f64], count: &mut usize, d: usize, out: &mut Vec<f64>) {
        let first = (d - *count % d) % d;
        out.extend(src.iter().skip(first).step_by(d));
        *count += src.len();
    }
}

/// Result of beat-phase tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedQuadratures {
    pub q: TimeTrace,
    pub p: TimeTrace,
    /// Estimated slow phase, one value per sample.
    pub theta_est: TimeTrace,
    /// Variance of the phase left after de-rotation, over `[0, 100 ×
    /// tracking bandwidth]`.
    pub residual_variance: f64,
    /// Median magnitude of the tracked carrier.
    pub carrier_magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackConfig {
    pub tracking_bandwidth: f64,
    pub lp_corner: f64,
    /// Tracking fails below this carrier magnitude.
    pub carrier_floor: f64,
}

impl TrackConfig {
    pub fn new(tracking_bandwidth: f64) -> Self {
        Self {
            tracking_bandwidth,
            lp_corner: DEFAULT_LP_CORNER,
            carrier_floor: 1.0,
        }
    }
}

/// Estimates the slowly varying beat phase from the demodulated carrier and
/// de-rotates the quadratures by it.
pub fn track_phase(r: &HeterodyneRecord, tracking_bandwidth: f64) -> Result<TrackedQuadratures> {
    let mut c = TrackConfig::new(tracking_bandwidth);
    c.lp_corner = c.lp_corner.min(0.45 * r.nominal_beat_freq);
    track_phase_with(r, &c)
}

pub fn track_phase_with(r: &HeterodyneRecord, c: &TrackConfig) -> Result<TrackedQuadratures> {
    let (qm, pm) = lock_in_demodulate(r, 0.0, c.lp_corner)?;
    let fs = qm.sample_rate;
    let bw = c.tracking_bandwidth;
    let wide = 100.0 * bw;
    if !(bw > 0.0 && wide < 0.25 * fs) {
        return Err(invalid("tracking_bandwidth", "must be positive and well below the sample rate"));
    }
    // boxcar-average the complex baseband down to ~8× the wide band
    let factor = ((fs / (8.0 * wide)).floor() as usize).clamp(1, qm.len() / 16);
    if factor == 0 {
        return Err(Error::Length("record too short to track".into()));
    }
    let slow_rate = fs / factor as f64;
    let (re, im): (Vec<f64>, Vec<f64>) = qm
        .samples
        .chunks_exact(factor)
        .zip(pm.samples.chunks_exact(factor))
        .map(|(a, b)| {
            let k = factor as f64;
            (a.iter().sum::<f64>() / k, b.iter().sum::<f64>() / k)
        })
        .unzip();
    // blocks touching the lock-in edge transient take their clean neighbour's value
    let guard = LowPass::butterworth(DEFAULT_LP_ORDER, c.lp_corner, fs)?
        .settle_len()
        .div_ceil(factor)
        .min(re.len().saturating_sub(1) / 2);
    let (mut re, mut im) = (re, im);
    let last = re.len() - 1;
    for k in 0..guard {
        re[k] = re[guard];
        im[k] = im[guard];
        re[last - k] = re[last - guard];
        im[last - k] = im[last - guard];
    }
    let narrow = LowPass::butterworth(2, bw, slow_rate)?;
    let (cr, ci) = (filtfilt(&narrow, &re), filtfilt(&narrow, &im));
    let mut mags: Vec<f64> = cr.iter().zip(&ci).map(|(a, b)| a.hypot(*b)).collect();
    mags.sort_by(f64::total_cmp);
    let magnitude = mags[mags.len() / 2];
    if !(magnitude >= c.carrier_floor) {
        return Err(Error::CarrierTooWeak {
            magnitude,
            floor: c.carrier_floor,
        });
    }
    let slow_theta = unwrap(cr.iter().zip(&ci).map(|(a, b)| b.atan2(*a)));
    // linear interpolation back to the full rate, block centers as nodes
    let theta: Vec<f64> = (0..qm.len())
        .map(|i| {
            let x = (i as f64 + 0.5) / factor as f64 - 0.5;
            let j = (x.floor().max(0.0) as usize).min(slow_theta.len() - 1);
            let j1 = (j + 1).min(slow_theta.len() - 1);
            let t = (x - j as f64).clamp(0.0, 1.0);
            slow_theta[j] * (1.0 - t) + slow_theta[j1] * t
        })
        .collect();
    let mut q = qm.samples;
    let mut p = pm.samples;
    for ((a, b), &t) in q.iter_mut().zip(p.iter_mut()).zip(&theta) {
        let z = Complex64::new(*a, *b) * Complex64::from_polar(1.0, -t);
        *a = z.re;
        *b = z.im;
    }
    // residual: phase of the de-rotated carrier within the wide band
    let (rre, rim): (Vec<f64>, Vec<f64>) = q
        .chunks_exact(factor)
        .zip(p.chunks_exact(factor))
        .map(|(a, b)| {
            let k = factor as f64;
            (a.iter().sum::<f64>() / k, b.iter().sum::<f64>() / k)
        })
        .unzip();
    let wide_rate = slow_rate;
    let residual_variance = if wide < 0.5 * wide_rate {
        let lp = LowPass::butterworth(2, wide, wide_rate)?;
        let (wr, wi) = (filtfilt(&lp, &rre), filtfilt(&lp, &rim));
        let phases: Vec<f64> = wr.iter().zip(&wi).map(|(a, b)| b.atan2(*a)).collect();
        let skip = phases.len() / 20;
        let body = &phases[skip..phases.len() - skip];
        let mean = body.iter().sum::<f64>() / body.len() as f64;
        body.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / body.len() as f64
    } else {
        f64::NAN
    };
    Ok(TrackedQuadratures {
        q: TimeTrace::new(q, fs, "Q_tracked")?,
        p: TimeTrace::new(p, fs, "P_tracked")?,
        theta_est: TimeTrace::new(theta, fs, "theta_est")?,
        residual_variance,
        carrier_magnitude: magnitude,
    })
}

fn unwrap(phases: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for ph in phases {
        if let Some(last) = prev {
            let d = ph - last;
            if d > std::f64::consts::PI {
                offset -= TAU;
            } else if d < -std::f64::consts::PI {
                offset += TAU;
            }
        }
        prev = Some(ph);
        out.push(ph + offset);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const FS: f64 = 1_048_576.0;
    const BEAT: f64 = 196_608.0;

    fn tone(n: usize, amp_q: f64, amp_p: f64) -> HeterodyneRecord {
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let ph = TAU * BEAT * i as f64 / FS;
                amp_q * ph.cos() + amp_p * ph.sin()
            })
            .collect();
        HeterodyneRecord::new(TimeTrace::new(v, FS, "v").unwrap(), BEAT).unwrap()
    }

    #[test]
    fn pure_tone_conventions() {
        let r = tone(20_000, 1.0, 0.0);
        let (q, p) = lock_in_demodulate(&r, 0.0, 90e3).unwrap();
        // 2f ripple after a fourth-order filter pair at 90 kHz is ~3e-8
        for i in 1000..19_000 {
            assert!((q.samples[i] - 1.0).abs() < 1e-6 && p.samples[i].abs() < 1e-6);
        }
        let (q, p) = lock_in_demodulate(&r, FRAC_PI_2, 90e3).unwrap();
        for i in 1000..19_000 {
            assert!(q.samples[i].abs() < 1e-6 && (p.samples[i] + 1.0).abs() < 1e-6);
        }
        assert!(lock_in_demodulate(&r, 0.0, 0.6 * BEAT).is_err());
    }

    #[test]
    fn streaming_lock_in_matches_batch() {
        let r = tone(50_000, 0.3, -0.7);
        let (qb, pb) = lock_in_demodulate(&r, 0.2, 90e3).unwrap();
        let mut li = LockIn::new(FS, BEAT, 0.2, 90e3, 4, 2).unwrap();
        let (mut q, mut p) = (Vec::new(), Vec::new());
        for chunk in r.trace.samples.chunks(3001) {
            li.push(chunk, &mut q, &mut p);
        }
        li.finish(&mut q, &mut p);
        assert_eq!(q.len(), 25_000);
        for i in 500..24_500 {
            assert!((q[i] - qb.samples[2 * i]).abs() < 1e-9);
            assert!((p[i] - pb.samples[2 * i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_offset_is_tracked() {
        let theta0: f64 = 0.4;
        let r = tone(1 << 18, 5.0 * theta0.cos(), 5.0 * theta0.sin());
        let t = track_phase(&r, 10.0).unwrap();
        let n = t.theta_est.len();
        let worst = (n / 10..9 * n / 10)
            .map(|i| (t.theta_est.samples[i] - theta0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst:e}");
        assert!((t.q.samples[n / 2] - 5.0).abs() < 1e-6 && t.p.samples[n / 2].abs() < 1e-6);
        assert!(t.residual_variance < 1e-10);
    }

    #[test]
    fn weak_carrier_is_refused() {
        let r = tone(1 << 16, 1e-3, 0.0);
        assert!(matches!(track_phase(&r, 10.0), Err(Error::CarrierTooWeak { .. })));
    }
}
