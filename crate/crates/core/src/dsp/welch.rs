//! Welch estimation of the symmetrized auto- and cross-spectra of a pair of
//! real records, with per-bin standard errors.
//!
//! Normalization: a unit-variance white record has spectral density 1 in
//! every bin. `S_QP` is the real part of the averaged cross-periodogram; the
//! imaginary part is kept as a diagnostic.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::FrequencyGrid;
use crate::spectra::{fmt12, SpectralTriple};
use crate::trace::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
    Flattop,
}

impl Window {
    /// Periodic (DFT-even) coefficients.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        let x = |i: usize| std::f64::consts::TAU * i as f64 / n as f64;
        match self {
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * x(i).cos()).collect(),
            Window::Rectangular => vec![1.0; n],
            Window::Flattop => {
                const A: [f64; 5] = [
                    0.215_578_95,
                    0.416_631_58,
                    0.277_263_158,
                    0.083_578_947,
                    0.006_947_368,
                ];
                (0..n)
                    .map(|i| {
                        A.iter()
                            .enumerate()
                            .map(|(k, a)| if k % 2 == 0 { 1.0 } else { -1.0 } * a * (k as f64 * x(i)).cos())
                            .sum()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchConfig {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    /// Samples dropped at each end of the record before segmentation.
    pub discard_edges: usize,
}

impl Default for WelchConfig {
    /// 16384-sample Hann segments, half overlap: 32 Hz bins at 524288 Hz.
    fn default() -> Self {
        Self {
            segment_length: 1 << 14,
            overlap_fraction: 0.5,
            window: Window::Hann,
            discard_edges: 0,
        }
    }
}

impl WelchConfig {
    /// Power-of-two segment giving the resolution closest to `resolution_hz`.
    pub fn for_resolution(sample_rate: f64, resolution_hz: f64) -> Self {
        let exact = (sample_rate / resolution_hz).log2().round().max(1.0);
        Self {
            segment_length: 1usize << exact as u32,
            ..Self::default()
        }
    }

    pub fn step(&self) -> usize {
        let s = (self.segment_length as f64 * (1.0 - self.overlap_fraction)).round() as usize;
        s.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 2 {
            return Err(invalid("segment_length", "must be ≥ 2"));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(invalid("overlap_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Segments obtainable from `n` samples after edge discard.
    pub fn segments_for(&self, n: usize) -> usize {
        let usable = n.saturating_sub(2 * self.discard_edges);
        if usable < self.segment_length {
            0
        } else {
            (usable - self.segment_length) / self.step() + 1
        }
    }

    /// Variance inflation of a mean over overlapping segments of white noise:
    /// `1 + 2 Σ_j (1 − j/n) ρ_j`, with `ρ_j` the squared normalized window
    /// overlap at lag `j` steps.
    pub fn overlap_correction(&self, n_segments: usize) -> f64 {
        let w = self.window.coefficients(self.segment_length);
        let norm: f64 = w.iter().map(|v| v * v).sum();
        let step = self.step();
        let mut total = 1.0;
        let mut j = 1;
        while j * step < self.segment_length && j < n_segments {
            let lag = j * step;
            let overlap: f64 = (0..self.segment_length - lag).map(|i| w[i] * w[i + lag]).sum();
            let rho = (overlap / norm).powi(2);
            total += 2.0 * (1.0 - j as f64 / n_segments as f64) * rho;
            j += 1;
        }
        total
    }
}

/// Mean periodograms of a contiguous run of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMean {
    pub qq: Vec<f64>,
    pub pp: Vec<f64>,
    pub qp: Vec<f64>,
    pub segments: usize,
}

impl BatchMean {
    fn empty(bins: usize) -> Self {
        Self {
            qq: vec![0.0; bins],
            pp: vec![0.0; bins],
            qp: vec![0.0; bins],
            segments: 0,
        }
    }

    fn merge(mut self, other: &BatchMean) -> Self {
        let (a, b) = (self.segments as f64, other.segments as f64);
        let t = a + b;
        for (x, y) in [
            (&mut self.qq, &other.qq),
            (&mut self.pp, &other.pp),
            (&mut self.qp, &other.qp),
        ] {
            for (u, v) in x.iter_mut().zip(y) {
                *u = (*u * a + v * b) / t;
            }
        }
        self.segments += other.segments;
        self
    }
}

/// Estimated spectral covariance with statistical errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedCovariance {
    pub spectra: SpectralTriple,
    pub stderr_qq: Vec<f64>,
    pub stderr_pp: Vec<f64>,
    pub stderr_qp: Vec<f64>,
    /// Imaginary part of the averaged cross-periodogram.
    pub qp_imag: Vec<f64>,
    pub n_segments: usize,
    /// Contiguous batch means for resampling; empty when read from a file.
    pub batches: Vec<BatchMean>,
}

const CSV_HEADER: [&str; 7] = [
    "freq_hz",
    "s_qq",
    "s_pp",
    "s_qp",
    "stderr_qq",
    "stderr_pp",
    "stderr_qp",
];

impl EstimatedCovariance {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.spectra.grid
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    pub fn select(&self, mask: &[bool]) -> Result<Self> {
        let pick = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(mask)
                .filter_map(|(x, &k)| k.then_some(*x))
                .collect()
        };
        Ok(Self {
            spectra: self.spectra.select(mask)?,
            stderr_qq: pick(&self.stderr_qq),
            stderr_pp: pick(&self.stderr_pp),
            stderr_qp: pick(&self.stderr_qp),
            qp_imag: pick(&self.qp_imag),
            n_segments: self.n_segments,
            batches: self
                .batches
                .iter()
                .map(|b| BatchMean {
                    qq: pick(&b.qq),
                    pp: pick(&b.pp),
                    qp: pick(&b.qp),
                    segments: b.segments,
                })
                .collect(),
        })
    }

    /// Restriction to `[lo_hz, hi_hz]`.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let mask = self.grid().band_mask(lo_hz, hi_hz);
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyBand { lo_hz, hi_hz });
        }
        self.select(&mask)
    }

    /// CSV `freq_hz,s_qq,s_pp,s_qp,stderr_qq,stderr_pp,stderr_qp`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        let s = &self.spectra;
        for (i, f) in s.grid.hz().into_iter().enumerate() {
            out.write_record([
                fmt12(f),
                fmt12(s.s_qq[i]),
                fmt12(s.s_pp[i]),
                fmt12(s.s_qp[i]),
                fmt12(self.stderr_qq[i]),
                fmt12(self.stderr_pp[i]),
                fmt12(self.stderr_qp[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Segment
    /// counts and batches are not stored; `n_segments` is set to 2.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 7 || CSV_HEADER.iter().zip(headers.iter()).any(|(a, b)| *a != b) {
            return Err(Error::Format(format!(
                "expected header {}, got {:?}",
                CSV_HEADER.join(","),
                headers
            )));
        }
        let mut cols: [Vec<f64>; 7] = Default::default();
        for rec in rdr.records() {
            let rec = rec?;
            for (i, col) in cols.iter_mut().enumerate() {
                col.push(
                    rec[i]
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("column {}: {e}", CSV_HEADER[i])))?,
                );
            }
        }
        let [hz, qq, pp, qp, eq, ep, eqp] = cols;
        let n = hz.len();
        Ok(Self {
            spectra: SpectralTriple::new(FrequencyGrid::from_hz(&hz)?, qq, pp, qp)?,
            stderr_qq: eq,
            stderr_pp: ep,
            stderr_qp: eqp,
            qp_imag: vec![0.0; n],
            n_segments: 2,
            batches: Vec::new(),
        })
    }
}

/// Upper bound on retained batch means; adjacent batches merge when exceeded.
const MAX_BATCHES: usize = 64;

/// Streaming Welch estimator: push sample pairs, then [`finish`](Self::finish).
pub struct WelchAccumulator {
    config: WelchConfig,
    sample_rate: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    frame: Vec<Complex64>,
    buf_q: Vec<f64>,
    buf_p: Vec<f64>,
    to_skip: usize,
    bins: usize,
    sum: [Vec<f64>; 3],
    sum_sq: [Vec<f64>; 3],
    sum_imag: Vec<f64>,
    n_segments: usize,
    batches: Vec<BatchMean>,
    batch_size: usize,
    current: BatchMean,
}

impl WelchAccumulator {
    pub fn new(config: WelchConfig, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        let n = config.segment_length;
        let window = config.window.coefficients(n);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let bins = n / 2 + 1;
        let zeros = || vec![0.0; bins];
        Ok(Self {
            config,
            sample_rate,
            window,
            window_power,
            scratch: vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            fft,
            frame: vec![Complex64::new(0.0, 0.0); n],
            buf_q: Vec::new(),
            buf_p: Vec::new(),
            to_skip: config.discard_edges,
            bins,
            sum: [zeros(), zeros(), zeros()],
            sum_sq: [zeros(), zeros(), zeros()],
            sum_imag: zeros(),
            n_segments: 0,
            batches: Vec::new(),
            batch_size: 1,
            current: BatchMean::empty(bins),
        })
    }

    pub fn segments(&self) -> usize {
        self.n_segments
    }

    pub fn push(&mut self, q: &[f64], p: &[f64]) {
        assert_eq!(q.len(), p.len(), "quadrature chunks differ in length");
        let skip = self.to_skip.min(q.len());
        self.to_skip -= skip;
        self.buf_q.extend_from_slice(&q[skip..]);
        self.buf_p.extend_from_slice(&p[skip..]);
        let (seg, step) = (self.config.segment_length, self.config.step());
        // trailing edge samples are held back until the record ends
        let mut start = 0;
        while self.buf_q.len() - start >= seg + self.config.discard_edges {
            self.segment(start);
            start += step;
        }
        self.buf_q.drain(..start);
        self.buf_p.drain(..start);
    }

    fn segment(&mut self, start: usize) {
        let n = self.config.segment_length;
        for i in 0..n {
            let w = self.window[i];
            self.frame[i] = Complex64::new(w * self.buf_q[start + i], w * self.buf_p[start + i]);
        }
        self.fft.process_with_scratch(&mut self.frame, &mut self.scratch);
        let norm = 1.0 / self.window_power;
        for k in 0..self.bins {
            let z = self.frame[k];
            let zm = self.frame[(n - k) % n].conj();
            let xq = 0.5 * (z + zm);
            let xp = Complex64::new(0.0, -0.5) * (z - zm);
            let cross = xq.conj() * xp;
            let vals = [xq.norm_sqr() * norm, xp.norm_sqr() * norm, cross.re * norm];
            for (c, v) in vals.iter().enumerate() {
                self.sum[c][k] += v;
                self.sum_sq[c][k] += v * v;
            }
            self.sum_imag[k] += cross.im * norm;
            let cur = &mut self.current;
            cur.qq[k] += vals[0];
            cur.pp[k] += vals[1];
            cur.qp[k] += vals[2];
        }
        self.current.segments += 1;
        self.n_segments += 1;
        if self.current.segments == self.batch_size {
            self.close_batch();
        }
    }

    fn close_batch(&mut self) {
        let mut b = std::mem::replace(&mut self.current, BatchMean::empty(self.bins));
        let k = b.segments as f64;
        for v in b.qq.iter_mut().chain(b.pp.iter_mut()).chain(b.qp.iter_mut()) {
            *v /= k;
        }
        self.batches.push(b);
        if self.batches.len() > MAX_BATCHES {
            let old = std::mem::take(&mut self.batches);
            let mut it = old.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => self.batches.push(a.merge(&b)),
                    None => self.batches.push(a),
                }
            }
            self.batch_size *= 2;
        }
    }

    pub fn finish(mut self) -> Result<EstimatedCovariance> {
        let n = self.n_segments;
        if n < 2 {
            return Err(Error::InsufficientSegments(n));
        }
        // a partial trailing batch only counts if it is at least half full
        if self.current.segments * 2 >= self.batch_size && self.current.segments > 0 {
            self.close_batch();
        }
        let inflation = self.config.overlap_correction(n);
        let nf = n as f64;
        let mean = |c: usize| -> Vec<f64> { self.sum[c].iter().map(|s| s / nf).collect() };
        let stderr = |c: usize| -> Vec<f64> {
            self.sum[c]
                .iter()
                .zip(&self.sum_sq[c])
                .map(|(s, s2)| {
                    let m = s / nf;
                    let var = ((s2 - nf * m * m) / (nf - 1.0)).max(0.0);
                    (var * inflation / nf).sqrt().max(f64::MIN_POSITIVE)
                })
                .collect()
        };
        let seg = self.config.segment_length as f64;
        let hz: Vec<f64> = (0..self.bins).map(|k| k as f64 * self.sample_rate / seg).collect();
        Ok(EstimatedCovariance {
            spectra: SpectralTriple::new(FrequencyGrid::from_hz(&hz)?, mean(0), mean(1), mean(2))?,
            stderr_qq: stderr(0),
            stderr_pp: stderr(1),
            stderr_qp: stderr(2),
            qp_imag: self.sum_imag.iter().map(|s| s / nf).collect(),
            n_segments: n,
            batches: self.batches,
        })
    }
}

/// In-memory Welch estimate over a pair of equal-length records.
pub fn welch_cross_spectra(
    q: &TimeTrace,
    p: &TimeTrace,
    c: &WelchConfig,
) -> Result<EstimatedCovariance> {
    if q.len() != p.len() || q.sample_rate != p.sample_rate {
        return Err(Error::Length("Q and P differ in length or rate".into()));
    }
    let segments = c.segments_for(q.len());
    if segments < 2 {
        return Err(Error::InsufficientSegments(segments));
    }
    let mut acc = WelchAccumulator::new(*c, q.sample_rate)?;
    acc.push(&q.samples, &p.samples);
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn trace(v: Vec<f64>) -> TimeTrace {
        TimeTrace::new(v, 1000.0, "").unwrap()
    }

    #[test]
    fn window_shapes() {
        let h = Window::Hann.coefficients(8);
        assert_eq!(h[0], 0.0);
        assert!((h[4] - 1.0).abs() < 1e-15);
        let f = Window::Flattop.coefficients(1024);
        assert!((f[512] - 1.0).abs() < 1e-3);
        assert!(Window::Rectangular.coefficients(3).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn white_noise_is_flat_at_unity() {
        let q = trace(white(1 << 18, 1));
        let p = trace(white(1 << 18, 2));
        let c = WelchConfig {
            segment_length: 1024,
            ..WelchConfig::default()
        };
        let e = welch_cross_spectra(&q, &p, &c).unwrap();
        let inside = |v: &[f64], se: &[f64], want: f64| {
            v.iter().zip(se).skip(1).take(500).filter(|(x, s)| (**x - want).abs() <= 3.0 * **s).count()
        };
        assert!(inside(&e.spectra.s_qq, &e.stderr_qq, 1.0) >= 490);
        assert!(inside(&e.spectra.s_pp, &e.stderr_pp, 1.0) >= 490);
        assert!(inside(&e.spectra.s_qp, &e.stderr_qp, 0.0) >= 490);
        let mean: f64 = e.spectra.s_qq[1..511].iter().sum::<f64>() / 510.0;
        assert!((mean - 1.0).abs() < 0.01);
        assert_eq!(e.n_segments, c.segments_for(1 << 18));
        assert!(e.batches.len() >= 32 && e.batches.len() <= 64);
        let total: usize = e.batches.iter().map(|b| b.segments).sum();
        assert!(total <= e.n_segments && total * 10 >= e.n_segments * 9);
    }

    #[test]
    fn swapping_inputs_keeps_symmetrized_cross() {
        let q = trace(white(1 << 14, 3));
        let mut pv = white(1 << 14, 4);
        for (a, b) in pv.iter_mut().zip(&q.samples) {
            *a += 0.5 * b;
        }
        let p = trace(pv);
        let c = WelchConfig {
            segment_length: 256,
            ..WelchConfig::default()
        };
        let a = welch_cross_spectra(&q, &p, &c).unwrap();
        let b = welch_cross_spectra(&p, &q, &c).unwrap();
        for (x, y) in a.spectra.s_qp.iter().zip(&b.spectra.s_qp) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
        for (x, y) in a.qp_imag.iter().zip(&b.qp_imag) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_equals_batch() {
        let q = white(50_000, 5);
        let p = white(50_000, 6);
        let c = WelchConfig {
            segment_length: 512,
            discard_edges: 300,
            ..WelchConfig::default()
        };
        let batch = welch_cross_spectra(&trace(q.clone()), &trace(p.clone()), &c).unwrap();
        let mut acc = WelchAccumulator::new(c, 1000.0).unwrap();
        for (a, b) in q.chunks(1234).zip(p.chunks(1234)) {
            acc.push(a, b);
        }
        let s = acc.finish().unwrap();
        assert_eq!(s.n_segments, batch.n_segments);
        assert_eq!(s.spectra, batch.spectra);
        assert_eq!(s.n_segments, c.segments_for(50_000));
    }

    #[test]
    fn too_short_is_an_error() {
        let q = trace(white(100, 1));
        let c = WelchConfig {
            segment_length: 64,
            ..WelchConfig::default()
        };
        assert!(matches!(
            welch_cross_spectra(&q, &q, &WelchConfig { segment_length: 128, ..c }),
            Err(Error::InsufficientSegments(0))
        ));
        assert!(welch_cross_spectra(&q, &q, &c).is_ok());
    }

    #[test]
    fn overlap_correction_values() {
        let rect = WelchConfig {
            window: Window::Rectangular,
            overlap_fraction: 0.0,
            ..WelchConfig::default()
        };
        assert_eq!(rect.overlap_correction(100), 1.0);
        // Hann at half overlap: ρ₁ = ((N/16) / (3N/8))² = 1/36
        let hann = WelchConfig::default();
        let c = hann.overlap_correction(1_000_000);
        assert!((c - (1.0 + 2.0 / 36.0)).abs() < 1e-4, "{c}");
    }

    #[test]
    fn csv_round_trip() {
        let q = trace(white(4096, 7));
        let c = WelchConfig {
            segment_length: 64,
            ..WelchConfig::default()
        };
        let e = welch_cross_spectra(&q, &q, &c).unwrap();
        let mut bytes = Vec::new();
        e.write_csv(&mut bytes).unwrap();
        let back = EstimatedCovariance::read_csv(bytes.as_slice()).unwrap();
        assert_eq!(back.len(), e.len());
        for (a, b) in back.spectra.s_qq.iter().zip(&e.spectra.s_qq) {
            assert!((a - b).abs() <= 1e-11 * b.abs());
        }
        assert!(String::from_utf8(bytes).unwrap().starts_with(
            "freq_hz,s_qq,s_pp,s_qp,stderr_qq,stderr_pp,stderr_qp\n"
        ));
    }
}
