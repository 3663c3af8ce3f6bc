//! Synthetic detection records with the model's second-order statistics.
//!
//! The output field is a linear filter of four real white inputs (two thermal
//! forces, two optical input quadratures), so Gaussian surrogates are exact:
//! white noise is drawn, shaped by the transfer functions in the frequency
//! domain and transformed back. Short records use one exact circulant
//! transform; [`StreamingSynth`] handles records too long to hold in memory by
//! overlap-save block convolution with a truncated kernel.
//!
//! DFT bin `k` multiplies by the response at `−ω_k` because the model's
//! Fourier convention is `∫ O(t) e^{+iωt} dt`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::input_response;
use crate::params::SystemParams;
use crate::trace::TimeTrace;

/// RNG stream for the physical inputs of the synthesis filter.
pub const STREAM_SYNTHESIS: u64 = 0;
/// RNG stream for detector vacuum noise.
pub const STREAM_DETECTION: u64 = 1;
/// RNG stream for the detection-phase jitter.
pub const STREAM_JITTER: u64 = 2;

/// Default ADC rate, 2²¹ Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 2_097_152.0;
/// Default heterodyne beat, 3/16 of the default sample rate.
pub const DEFAULT_BEAT: f64 = 393_216.0;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Raised-cosine amplitude taper: unity up to `pass_hz`, zero from `stop_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLimit {
    pub pass_hz: f64,
    pub stop_hz: f64,
}

impl BandLimit {
    pub fn gain(&self, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        if f <= self.pass_hz {
            1.0
        } else if f >= self.stop_hz {
            0.0
        } else {
            0.5 * (1.0 + (PI * (f - self.pass_hz) / (self.stop_hz - self.pass_hz)).cos())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub sample_rate: f64,
    pub duration: f64,
    pub seed: u64,
    pub beat_freq: f64,
    pub jitter_sigma_sq: f64,
    /// Corner of the jitter process, Hz. Zero freezes the phase at its initial draw.
    pub jitter_bandwidth: f64,
    /// Baseband taper applied at synthesis. Required for heterodyne
    /// modulation, since unshaped shot noise would fold across DC.
    pub band_limit: Option<BandLimit>,
    /// Mean amplitude added to `q` before the jitter rotation, giving the
    /// beat-note carrier used for phase tracking.
    pub carrier_amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            duration: 1.0,
            seed: 0,
            beat_freq: DEFAULT_BEAT,
            jitter_sigma_sq: 0.062,
            jitter_bandwidth: 1.0,
            band_limit: Some(BandLimit {
                pass_hz: 200e3,
                stop_hz: 240e3,
            }),
            carrier_amplitude: 0.0,
        }
    }
}

impl SynthConfig {
    /// Record length, requiring `duration × sample_rate` to be an integer ≥ 2.
    pub fn n_samples(&self) -> Result<usize> {
        let exact = self.duration * self.sample_rate;
        let n = exact.round();
        if !(exact.is_finite() && n >= 2.0 && (exact - n).abs() <= 1e-9 * n) {
            return Err(invalid(
                "duration",
                format!("duration × sample_rate = {exact} is not an integer ≥ 2"),
            ));
        }
        Ok(n as usize)
    }

    /// Jitter corners above this are rejected: the rotation must be slow on
    /// the scale of the narrowest spectral feature, set by the cavity linewidth.
    pub fn max_jitter_bandwidth(p: &SystemParams) -> f64 {
        p.kappa / TAU / 100.0
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        p.validate()?;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        self.n_samples()?;
        if !(self.beat_freq > 0.0) {
            return Err(invalid("beat_freq", "must be positive"));
        }
        let needed = 4.0 * (self.beat_freq + p.max_mechanical_hz());
        if self.sample_rate <= needed {
            return Err(invalid(
                "sample_rate",
                format!("must exceed 4 × (beat + max mechanical frequency) = {needed} Hz"),
            ));
        }
        if let Some(b) = self.band_limit {
            if !(b.pass_hz > 0.0 && b.stop_hz > b.pass_hz && b.stop_hz <= 0.5 * self.sample_rate) {
                return Err(invalid("band_limit", "need 0 < pass < stop ≤ Nyquist"));
            }
            if self.beat_freq <= b.stop_hz {
                return Err(invalid(
                    "beat_freq",
                    format!("must exceed the baseband support {} Hz", b.stop_hz),
                ));
            }
        }
        if !(self.jitter_sigma_sq >= 0.0 && self.jitter_sigma_sq.is_finite()) {
            return Err(invalid("jitter_sigma_sq", "must be ≥ 0"));
        }
        let limit = Self::max_jitter_bandwidth(p);
        if !(self.jitter_bandwidth >= 0.0 && self.jitter_bandwidth <= limit) {
            return Err(invalid(
                "jitter_bandwidth",
                format!("must lie in [0, {limit:.1}] Hz (slow-jitter regime)"),
            ));
        }
        if !self.carrier_amplitude.is_finite() {
            return Err(invalid("carrier_amplitude", "must be finite"));
        }
        Ok(())
    }

    fn taper(&self, f_hz: f64) -> f64 {
        self.band_limit.map_or(1.0, |b| b.gain(f_hz))
    }
}

/// Input count of the synthesis filter: the four physical inputs plus one
/// detector vacuum channel per quadrature.
const N_CHANNELS: usize = 6;

/// Per-channel responses of `(Q, P)` at `omega`, with the detector folded in
/// when `eta` is given. A frequency landing on a bare mechanical pole is
/// evaluated `nudge` rad/s away; the full response is regular there.
fn channel_rows(
    omega: f64,
    p: &SystemParams,
    eta: Option<f64>,
    nudge: f64,
) -> Result<([Complex64; N_CHANNELS], [Complex64; N_CHANNELS])> {
    let r = match input_response(omega, p) {
        Err(Error::Pole { .. }) => input_response(omega + nudge, p)?,
        other => other?,
    };
    let zero = Complex64::new(0.0, 0.0);
    let mut q = [zero; N_CHANNELS];
    let mut pq = [zero; N_CHANNELS];
    let (signal, vacuum) = match eta {
        Some(e) => (e.sqrt(), (1.0 - e).sqrt()),
        None => (1.0, 0.0),
    };
    for k in 0..4 {
        q[k] = r.q[k] * signal;
        pq[k] = r.p[k] * signal;
    }
    q[4] = Complex64::new(vacuum, 0.0);
    pq[5] = Complex64::new(vacuum, 0.0);
    Ok((q, pq))
}

/// Signed frequency of DFT bin `k` of an `n`-point transform.
fn bin_hz(k: usize, n: usize, fs: f64) -> f64 {
    if 2 * k <= n {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Filters packed pairs of real white inputs with per-channel responses.
///
/// `inputs[j]` holds channels `2j` (real part) and `2j + 1` (imaginary part)
/// in the frequency domain. Returns the spectrum of `q + i p`.
fn combine_pairs(
    inputs: &[Vec<Complex64>],
    n: usize,
    mut rows: impl FnMut(usize) -> Result<([Complex64; N_CHANNELS], [Complex64; N_CHANNELS])>,
) -> Result<Vec<Complex64>> {
    let i = Complex64::new(0.0, 1.0);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, y) in out.iter_mut().enumerate() {
        let (rq, rp) = rows(k)?;
        let km = (n - k) % n;
        for (j, z) in inputs.iter().enumerate() {
            let (za, zb) = (z[k], z[km].conj());
            let w0 = 0.5 * (za + zb);
            let w1 = -0.5 * i * (za - zb);
            let g0 = rq[2 * j] + i * rp[2 * j];
            let g1 = rq[2 * j + 1] + i * rp[2 * j + 1];
            *y += g0 * w0 + g1 * w1;
        }
    }
    Ok(out)
}

fn draw_pairs(rng: &mut ChaCha8Rng, pairs: usize, n: usize) -> Vec<Vec<Complex64>> {
    (0..pairs)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect()
}

fn unpack(y: Vec<Complex64>, fs: f64) -> Result<(TimeTrace, TimeTrace)> {
    let (q, p): (Vec<f64>, Vec<f64>) = y.into_iter().map(|z| (z.re, z.im)).unzip();
    Ok((TimeTrace::new(q, fs, "Q")?, TimeTrace::new(p, fs, "P")?))
}

/// Ideal (η = 1) output quadratures by exact circulant synthesis.
///
/// Unit-variance white inputs are transformed, shaped bin by bin and
/// transformed back, so the record is exactly periodic with the model
/// spectrum (times the band-limit taper, if any). Memory scales with the
/// record; use [`StreamingSynth`] for long records.
pub fn synthesize_quadrature_traces(
    p: &SystemParams,
    c: &SynthConfig,
) -> Result<(TimeTrace, TimeTrace)> {
    c.validate(p)?;
    let n = c.n_samples()?;
    let mut rng = rng_for(c.seed, STREAM_SYNTHESIS);
    let mut inputs = draw_pairs(&mut rng, 2, n);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    for z in inputs.iter_mut() {
        fwd.process(z);
    }
    let nudge = 1e-6 * TAU * c.sample_rate / n as f64;
    let mut y = combine_pairs(&inputs, n, |k| {
        let f = bin_hz(k, n, c.sample_rate);
        let (mut q, mut pq) = channel_rows(-TAU * f, p, None, nudge)?;
        let g = c.taper(f);
        // a lone Nyquist bin must have real weights for the outputs to be real
        let nyquist = 2 * k == n;
        for v in q.iter_mut().chain(pq.iter_mut()) {
            *v *= g;
            if nyquist {
                v.im = 0.0;
            }
        }
        Ok((q, pq))
    })?;
    planner.plan_fft_inverse(n).process(&mut y);
    let scale = 1.0 / n as f64;
    y.iter_mut().for_each(|v| *v *= scale);
    unpack(y, c.sample_rate)
}

/// Streaming synthesis of detected quadratures, block by block.
///
/// The filter has six inputs: the four physical ones scaled by `√η_eff` and
/// one independent vacuum channel per quadrature scaled by `√(1 − η_eff)`.
/// Folding the detector into the filter keeps its vacuum noise inside the
/// band limit. Kernels are `kernel_len` taps, centered, so the output lags
/// the inputs by `kernel_len/2` samples; the process is stationary from the
/// first sample.
pub struct StreamingSynth {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    block: usize,
    kernel_len: usize,
    /// Spectral weights on `Z_j(k)` and `conj Z_j(−k)` for each packed pair.
    direct: Vec<Vec<Complex64>>,
    mirror: Vec<Vec<Complex64>>,
    history: Vec<Vec<Complex64>>,
    spectra: Vec<Vec<Complex64>>,
    output: Vec<Complex64>,
    scratch: Vec<Complex64>,
    ready: usize,
    rng: ChaCha8Rng,
}

pub const DEFAULT_KERNEL_LEN: usize = 1 << 14;
pub const DEFAULT_BLOCK_LEN: usize = 1 << 17;

impl StreamingSynth {
    /// Detected-field synthesizer at `p.eta_eff()`.
    pub fn new(p: &SystemParams, c: &SynthConfig) -> Result<Self> {
        Self::with_sizes(p, c, Some(p.eta_eff()), DEFAULT_KERNEL_LEN, DEFAULT_BLOCK_LEN)
    }

    /// `eta = None` synthesizes the ideal output field without vacuum admixture.
    pub fn with_sizes(
        p: &SystemParams,
        c: &SynthConfig,
        eta: Option<f64>,
        kernel_len: usize,
        block: usize,
    ) -> Result<Self> {
        c.validate(p)?;
        if !(kernel_len >= 2 && block >= 2 * kernel_len) {
            return Err(invalid("block", "need block ≥ 2 × kernel length ≥ 4"));
        }
        let mut planner = FftPlanner::new();
        let fs = c.sample_rate;
        let nudge = 1e-6 * TAU * fs / kernel_len as f64;
        // responses sampled on the short grid; q and p kept apart so each kernel is real
        let zero = Complex64::new(0.0, 0.0);
        let mut q_rows = vec![vec![zero; kernel_len]; N_CHANNELS];
        let mut p_rows = vec![vec![zero; kernel_len]; N_CHANNELS];
        for k in 0..kernel_len {
            let f = bin_hz(k, kernel_len, fs);
            let (q, pq) = channel_rows(-TAU * f, p, eta, nudge)?;
            let g = c.taper(f);
            for m in 0..N_CHANNELS {
                q_rows[m][k] = g * q[m];
                p_rows[m][k] = g * pq[m];
            }
        }
        let inv_short = planner.plan_fft_inverse(kernel_len);
        let fwd_block = planner.plan_fft_forward(block);
        // per channel: q kernel in the real part, p kernel in the imaginary part
        let mut g_block = Vec::with_capacity(N_CHANNELS);
        for m in 0..N_CHANNELS {
            let hq = real_kernel(&mut q_rows[m], &*inv_short);
            let hp = real_kernel(&mut p_rows[m], &*inv_short);
            let mut padded = vec![zero; block];
            for (t, (a, b)) in hq.iter().zip(&hp).enumerate() {
                padded[t] = Complex64::new(*a, *b);
            }
            fwd_block.process(&mut padded);
            g_block.push(padded);
        }
        let i = Complex64::new(0.0, 1.0);
        let pairs = N_CHANNELS / 2;
        let mut direct = Vec::with_capacity(pairs);
        let mut mirror = Vec::with_capacity(pairs);
        for j in 0..pairs {
            let (g0, g1) = (&g_block[2 * j], &g_block[2 * j + 1]);
            direct.push(g0.iter().zip(g1).map(|(a, b)| 0.5 * (a - i * b)).collect());
            mirror.push(g0.iter().zip(g1).map(|(a, b)| 0.5 * (a + i * b)).collect());
        }
        let mut rng = rng_for(c.seed, STREAM_SYNTHESIS);
        // warm history so the first block is already stationary
        let history = (0..pairs)
            .map(|_| {
                let mut h = vec![Complex64::new(0.0, 0.0); block];
                for v in h[block - (kernel_len - 1)..].iter_mut() {
                    *v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                }
                h
            })
            .collect();
        Ok(Self {
            fwd: fwd_block,
            inv: planner.plan_fft_inverse(block),
            block,
            kernel_len,
            direct,
            mirror,
            history,
            spectra: vec![vec![Complex64::new(0.0, 0.0); block]; pairs],
            output: vec![Complex64::new(0.0, 0.0); block],
            scratch: Vec::new(),
            ready: block,
            rng,
        })
    }

    /// New samples produced per block.
    pub fn hop(&self) -> usize {
        self.block - self.kernel_len + 1
    }

    fn next_block(&mut self) {
        let keep = self.kernel_len - 1;
        let block = self.block;
        for (h, spec) in self.history.iter_mut().zip(self.spectra.iter_mut()) {
            h.copy_within(block - keep.., 0);
            for v in h[keep..].iter_mut() {
                *v = Complex64::new(self.rng.sample(StandardNormal), self.rng.sample(StandardNormal));
            }
            spec.copy_from_slice(h);
        }
        let mut scratch = std::mem::take(&mut self.scratch);
        let need = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        scratch.resize(need, Complex64::new(0.0, 0.0));
        for spec in self.spectra.iter_mut() {
            self.fwd.process_with_scratch(spec, &mut scratch);
        }
        let out = &mut self.output;
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for ((z, a), b) in self.spectra.iter().zip(&self.direct).zip(&self.mirror) {
            for k in 0..block {
                let km = (block - k) % block;
                out[k] += a[k] * z[k] + b[k] * z[km].conj();
            }
        }
        self.inv.process_with_scratch(out, &mut scratch);
        self.scratch = scratch;
        let scale = 1.0 / block as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        self.ready = keep;
    }

    /// Fills both buffers with the next `q.len()` samples.
    pub fn fill(&mut self, q: &mut [f64], p: &mut [f64]) {
        assert_eq!(q.len(), p.len(), "quadrature buffers differ in length");
        let mut done = 0;
        while done < q.len() {
            if self.ready == self.block {
                self.next_block();
            }
            let take = (self.block - self.ready).min(q.len() - done);
            for (t, z) in self.output[self.ready..self.ready + take].iter().enumerate() {
                q[done + t] = z.re;
                p[done + t] = z.im;
            }
            self.ready += take;
            done += take;
        }
    }
}

/// Inverse-transforms a sampled response into a real kernel of the same
/// length, rotated so the zero-lag tap sits in the middle.
fn real_kernel(spectrum: &mut [Complex64], inv: &dyn Fft<f64>) -> Vec<f64> {
    let n = spectrum.len();
    inv.process(spectrum);
    let scale = 1.0 / n as f64;
    let half = n / 2;
    (0..n)
        .map(|t| spectrum[(t + n - half) % n].re * scale)
        .collect()
}

/// Mixes in independent unit white noise: `√η x + √(1−η) v` per quadrature,
/// with `η = p.eta_eff()`.
pub fn apply_detection(
    q: &TimeTrace,
    p_trace: &TimeTrace,
    p: &SystemParams,
    seed: u64,
) -> Result<(TimeTrace, TimeTrace)> {
    apply_detection_with(q, p_trace, p.eta_eff(), seed)
}

pub fn apply_detection_with(
    q: &TimeTrace,
    p_trace: &TimeTrace,
    eta: f64,
    seed: u64,
) -> Result<(TimeTrace, TimeTrace)> {
    check_pair(q, p_trace)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", "must lie in [0, 1]"));
    }
    let (a, b) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut rng = rng_for(seed, STREAM_DETECTION);
    let mut mix = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .map(|v| a * v + b * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let qd = mix(&q.samples);
    let pd = mix(&p_trace.samples);
    Ok((
        TimeTrace::new(qd, q.sample_rate, q.label.clone())?,
        TimeTrace::new(pd, p_trace.sample_rate, p_trace.label.clone())?,
    ))
}

fn check_pair(q: &TimeTrace, p: &TimeTrace) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::Length(format!("Q has {} samples, P has {}", q.len(), p.len())));
    }
    if q.sample_rate != p.sample_rate {
        return Err(Error::Length("Q and P sample rates differ".into()));
    }
    Ok(())
}

/// Stationary Gaussian AR(1) phase, the sampled Ornstein–Uhlenbeck process
/// with variance `sigma_sq` and corner `bandwidth`.
pub struct PhaseJitter {
    rho: f64,
    drive: f64,
    theta: f64,
    rng: ChaCha8Rng,
}

impl PhaseJitter {
    pub fn new(sigma_sq: f64, bandwidth: f64, sample_rate: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, STREAM_JITTER);
        let sigma = sigma_sq.max(0.0).sqrt();
        let theta = sigma * rng.sample::<f64, _>(StandardNormal);
        let rho = (-TAU * bandwidth / sample_rate).exp();
        // √(1 − ρ²) without cancellation for slow processes
        let drive = sigma * (-(-2.0 * TAU * bandwidth / sample_rate).exp_m1()).sqrt();
        Self {
            rho,
            drive,
            theta,
            rng,
        }
    }

    pub fn from_config(c: &SynthConfig) -> Self {
        Self::new(c.jitter_sigma_sq, c.jitter_bandwidth, c.sample_rate, c.seed)
    }

    /// Current phase, then advance one sample.
    #[inline]
    pub fn next_theta(&mut self) -> f64 {
        let out = self.theta;
        if self.drive > 0.0 {
            self.theta = self.rho * self.theta + self.drive * self.rng.sample::<f64, _>(StandardNormal);
        }
        out
    }
}

/// In-place rotation `(q, p) → (q cos θ − p sin θ, q sin θ + p cos θ)`.
#[inline]
pub(crate) fn rotate_sample(q: &mut f64, p: &mut f64, theta: f64) {
    let (s, c) = theta.sin_cos();
    let (a, b) = (*q, *p);
    *q = c * a - s * b;
    *p = s * a + c * b;
}

/// Applies a time-dependent rotation, one angle per sample.
pub fn rotate_quadratures(
    q: &TimeTrace,
    p: &TimeTrace,
    theta: &[f64],
) -> Result<(TimeTrace, TimeTrace)> {
    check_pair(q, p)?;
    if theta.len() != q.len() {
        return Err(Error::Length("one angle per sample required".into()));
    }
    let mut qo = q.samples.clone();
    let mut po = p.samples.clone();
    for ((a, b), &t) in qo.iter_mut().zip(po.iter_mut()).zip(theta) {
        rotate_sample(a, b, t);
    }
    Ok((
        TimeTrace::new(qo, q.sample_rate, q.label.clone())?,
        TimeTrace::new(po, p.sample_rate, p.label.clone())?,
    ))
}

/// Rotates `(q, p)` by a slow Gaussian phase drawn from the config.
pub fn apply_phase_jitter(
    q: &TimeTrace,
    p: &TimeTrace,
    c: &SynthConfig,
) -> Result<(TimeTrace, TimeTrace)> {
    check_pair(q, p)?;
    if !(c.jitter_sigma_sq >= 0.0 && c.jitter_bandwidth >= 0.0) {
        return Err(invalid("jitter", "variance and bandwidth must be ≥ 0"));
    }
    let mut jitter = PhaseJitter::new(c.jitter_sigma_sq, c.jitter_bandwidth, q.sample_rate, c.seed);
    let theta: Vec<f64> = (0..q.len()).map(|_| jitter.next_theta()).collect();
    rotate_quadratures(q, p, &theta)
}

/// Adds the carrier amplitude to `q`.
pub fn add_carrier(q: &TimeTrace, amplitude: f64) -> TimeTrace {
    TimeTrace {
        samples: q.samples.iter().map(|v| v + amplitude).collect(),
        sample_rate: q.sample_rate,
        label: q.label.clone(),
    }
}

/// Numerically controlled oscillator producing `(cos φ_n, sin φ_n)` with
/// `φ_n = 2π f n / f_s + φ₀`. A complex phasor recurrence, re-anchored to the
/// exact phase every [`Nco::RESYNC`] samples.
#[derive(Debug, Clone)]
pub struct Nco {
    freq: f64,
    sample_rate: f64,
    offset: f64,
    n: u64,
    phasor: Complex64,
    step: Complex64,
}

impl Nco {
    pub const RESYNC: u64 = 4096;

    pub fn new(freq: f64, sample_rate: f64, offset: f64) -> Self {
        let mut nco = Self {
            freq,
            sample_rate,
            offset,
            n: 0,
            phasor: Complex64::new(1.0, 0.0),
            step: Complex64::from_polar(1.0, TAU * freq / sample_rate),
        };
        nco.phasor = nco.exact(0);
        nco
    }

    fn exact(&self, n: u64) -> Complex64 {
        // reduce cycles before scaling so the angle stays exact for long records
        let cycles = (self.freq * n as f64 / self.sample_rate).fract();
        Complex64::from_polar(1.0, TAU * cycles + self.offset)
    }

    /// Jumps to sample index `n`.
    pub fn seek(&mut self, n: u64) {
        self.n = n;
        self.phasor = self.exact(n);
    }

    #[inline]
    pub fn next_cos_sin(&mut self) -> (f64, f64) {
        let out = (self.phasor.re, self.phasor.im);
        self.n += 1;
        self.phasor = if self.n.is_multiple_of(Self::RESYNC) {
            self.exact(self.n)
        } else {
            self.phasor * self.step
        };
        out
    }
}

/// Heterodyne surrogate `v(t) = q(t) cos(2π f_b t) + p(t) sin(2π f_b t)`.
pub fn modulate_beat(q: &TimeTrace, p: &TimeTrace, c: &SynthConfig) -> Result<TimeTrace> {
    check_pair(q, p)?;
    match c.band_limit {
        Some(b) if b.stop_hz < c.beat_freq => {}
        _ => {
            return Err(invalid(
                "band_limit",
                "heterodyne modulation needs band-limited quadratures below the beat",
            ))
        }
    }
    if 2.0 * c.beat_freq >= q.sample_rate {
        return Err(invalid("beat_freq", "beyond Nyquist"));
    }
    let mut nco = Nco::new(c.beat_freq, q.sample_rate, 0.0);
    let v = q
        .samples
        .iter()
        .zip(&p.samples)
        .map(|(a, b)| {
            let (cs, sn) = nco.next_cos_sin();
            a * cs + b * sn
        })
        .collect();
    TimeTrace::new(v, q.sample_rate, "heterodyne")
}
