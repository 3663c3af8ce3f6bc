//! Streaming end-to-end chain: synthetic heterodyne record, lock-in,
//! Welch estimation and shot-noise calibration, without holding a full
//! record in memory.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsp::calibrate::{calibrate_shot_noise, CalibrationConfig};
use crate::dsp::lockin::{LockIn, DEFAULT_LP_CORNER, DEFAULT_LP_ORDER};
use crate::dsp::welch::{EstimatedCovariance, WelchAccumulator, WelchConfig};
use crate::error::{invalid, Error, Result};
use crate::params::SystemParams;
use crate::synth::{rotate_sample, Nco, PhaseJitter, StreamingSynth, SynthConfig, DEFAULT_BEAT};
use crate::trace::{TimeTrace, TraceReader, TraceWriter};

/// Samples handled per step of the streaming loops.
const CHUNK: usize = 1 << 16;

/// Heterodyne record generator: detected field, phase jitter, carrier and
/// beat modulation, produced chunk by chunk.
pub struct HeterodyneSource {
    synth: StreamingSynth,
    jitter: PhaseJitter,
    nco: Nco,
    carrier: f64,
    remaining: usize,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl HeterodyneSource {
    pub fn new(p: &SystemParams, c: &SynthConfig) -> Result<Self> {
        c.validate(p)?;
        match c.band_limit {
            Some(b) if b.stop_hz < c.beat_freq => {}
            _ => return Err(invalid("band_limit", "heterodyne records need a band limit below the beat")),
        }
        Ok(Self {
            synth: StreamingSynth::new(p, c)?,
            jitter: PhaseJitter::from_config(c),
            nco: Nco::new(c.beat_freq, c.sample_rate, 0.0),
            carrier: c.carrier_amplitude,
            remaining: c.n_samples()?,
            q: vec![0.0; CHUNK],
            p: vec![0.0; CHUNK],
        })
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Writes the next samples into `out` (cleared first); empty at the end.
    pub fn next_chunk(&mut self, out: &mut Vec<f64>) {
        out.clear();
        let n = self.remaining.min(CHUNK);
        let (q, p) = (&mut self.q[..n], &mut self.p[..n]);
        self.synth.fill(q, p);
        for (a, b) in q.iter_mut().zip(p.iter_mut()) {
            *a += self.carrier;
            rotate_sample(a, b, self.jitter.next_theta());
            let (c, s) = self.nco.next_cos_sin();
            out.push(*a * c + *b * s);
        }
        self.remaining -= n;
    }
}

/// Whole heterodyne record in memory.
pub fn simulate_heterodyne(p: &SystemParams, c: &SynthConfig) -> Result<TimeTrace> {
    let mut src = HeterodyneSource::new(p, c)?;
    let mut all = Vec::with_capacity(src.remaining());
    let mut buf = Vec::new();
    while src.remaining() > 0 {
        src.next_chunk(&mut buf);
        all.extend_from_slice(&buf);
    }
    TimeTrace::new(all, c.sample_rate, "heterodyne")
}

/// Streams a heterodyne record to a trace file; returns the sample count.
pub fn simulate_to_file(p: &SystemParams, c: &SynthConfig, path: impl AsRef<Path>) -> Result<u64> {
    let mut src = HeterodyneSource::new(p, c)?;
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?), c.sample_rate)?;
    let mut buf = Vec::new();
    while src.remaining() > 0 {
        src.next_chunk(&mut buf);
        w.push(&buf)?;
    }
    let n = w.samples_written();
    w.finish()?;
    Ok(n)
}

/// Vacuum reference: the same chain with the couplings off, an independent
/// seed, no jitter or carrier.
pub fn reference_config(c: &SynthConfig, duration: f64) -> SynthConfig {
    SynthConfig {
        duration,
        seed: c.seed ^ 0x05ee_d0f5_ca1e,
        jitter_sigma_sq: 0.0,
        carrier_amplitude: 0.0,
        ..c.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub beat_freq: f64,
    pub lo_phase: f64,
    pub lp_corner: f64,
    pub lp_order: usize,
    /// Decimation after the lock-in filter.
    pub decimation: usize,
    pub welch: WelchConfig,
    pub calibration: CalibrationConfig,
    /// Bins kept before calibration; the vacuum reference vanishes outside
    /// the synthesis band.
    pub calibration_band: (f64, f64),
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            beat_freq: DEFAULT_BEAT,
            lo_phase: 0.0,
            lp_corner: DEFAULT_LP_CORNER,
            lp_order: DEFAULT_LP_ORDER,
            decimation: 4,
            welch: WelchConfig {
                // covers the lock-in start-up and end transients at the decimated rate
                discard_edges: 1024,
                ..WelchConfig::default()
            },
            calibration: CalibrationConfig::default(),
            calibration_band: (10e3, 195e3),
        }
    }
}

/// Streaming lock-in followed by Welch estimation.
///
/// Densities refer to the input sample rate, so a unit-variance white
/// quadrature at that rate reads 1 regardless of decimation.
pub struct Analyzer {
    lockin: LockIn,
    welch: WelchAccumulator,
    gain: f64,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl Analyzer {
    pub fn new(sample_rate: f64, c: &AnalysisConfig) -> Result<Self> {
        let lockin = LockIn::new(
            sample_rate,
            c.beat_freq,
            c.lo_phase,
            c.lp_corner,
            c.lp_order,
            c.decimation,
        )?;
        let welch = WelchAccumulator::new(c.welch, lockin.output_rate())?;
        Ok(Self {
            lockin,
            welch,
            gain: (c.decimation as f64).sqrt(),
            q: Vec::new(),
            p: Vec::new(),
        })
    }

    pub fn push(&mut self, v: &[f64]) {
        self.q.clear();
        self.p.clear();
        self.lockin.push(v, &mut self.q, &mut self.p);
        self.feed();
    }

    fn feed(&mut self) {
        for x in self.q.iter_mut().chain(self.p.iter_mut()) {
            *x *= self.gain;
        }
        self.welch.push(&self.q, &self.p);
    }

    /// Uncalibrated estimate over all bins.
    pub fn finish(self) -> Result<EstimatedCovariance> {
        let Self {
            lockin,
            mut welch,
            gain,
            mut q,
            mut p,
        } = self;
        q.clear();
        p.clear();
        lockin.finish(&mut q, &mut p);
        for x in q.iter_mut().chain(p.iter_mut()) {
            *x *= gain;
        }
        welch.push(&q, &p);
        welch.finish()
    }
}

pub fn analyze_trace(t: &TimeTrace, c: &AnalysisConfig) -> Result<EstimatedCovariance> {
    let mut a = Analyzer::new(t.sample_rate, c)?;
    for chunk in t.samples.chunks(CHUNK) {
        a.push(chunk);
    }
    a.finish()
}

pub fn analyze_file(path: impl AsRef<Path>, c: &AnalysisConfig) -> Result<EstimatedCovariance> {
    let mut r = TraceReader::new(BufReader::new(File::open(path)?))?;
    let mut a = Analyzer::new(r.sample_rate(), c)?;
    let mut buf = vec![0.0; CHUNK];
    loop {
        let n = r.read_chunk(&mut buf)?;
        if n == 0 {
            break;
        }
        a.push(&buf[..n]);
    }
    a.finish()
}

/// Synthesizes and analyzes a record without storing it.
pub fn analyze_simulated(
    p: &SystemParams,
    synth: &SynthConfig,
    c: &AnalysisConfig,
) -> Result<EstimatedCovariance> {
    let mut src = HeterodyneSource::new(p, synth)?;
    let mut a = Analyzer::new(synth.sample_rate, c)?;
    let mut buf = Vec::new();
    while src.remaining() > 0 {
        src.next_chunk(&mut buf);
        a.push(&buf);
    }
    a.finish()
}

/// Band selection followed by shot-noise calibration.
pub fn calibrate_in_band(
    raw: &EstimatedCovariance,
    reference: &EstimatedCovariance,
    c: &AnalysisConfig,
) -> Result<EstimatedCovariance> {
    let (lo, hi) = c.calibration_band;
    calibrate_shot_noise(&raw.band(lo, hi)?, &reference.band(lo, hi)?, &c.calibration)
}

/// Raw, reference and calibrated estimates of one simulated run.
#[derive(Debug, Clone)]
pub struct EndToEnd {
    pub raw: EstimatedCovariance,
    pub reference: EstimatedCovariance,
    pub calibrated: EstimatedCovariance,
}

pub fn run_end_to_end(
    p: &SystemParams,
    synth: &SynthConfig,
    reference_duration: f64,
    c: &AnalysisConfig,
) -> Result<EndToEnd> {
    if c.beat_freq != synth.beat_freq {
        return Err(Error::Config(format!(
            "analysis beat {} Hz differs from synthesis beat {} Hz",
            c.beat_freq, synth.beat_freq
        )));
    }
    let raw = analyze_simulated(p, synth, c)?;
    let reference = analyze_simulated(
        &(*p).decoupled(),
        &reference_config(synth, reference_duration),
        c,
    )?;
    let calibrated = calibrate_in_band(&raw, &reference, c)?;
    Ok(EndToEnd {
        raw,
        reference,
        calibrated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> SynthConfig {
        SynthConfig {
            duration,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn streamed_file_matches_memory() {
        let p = SystemParams::reproduction();
        let c = short(0.0625);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.osqt");
        let n = simulate_to_file(&p, &c, &path).unwrap();
        let mem = simulate_heterodyne(&p, &c).unwrap();
        assert_eq!(n as usize, mem.len());
        assert_eq!(TimeTrace::load(&path).unwrap().samples, mem.samples);
        let a = AnalysisConfig {
            welch: WelchConfig {
                segment_length: 1024,
                discard_edges: 1024,
                ..WelchConfig::default()
            },
            ..AnalysisConfig::default()
        };
        let from_file = analyze_file(&path, &a).unwrap();
        let from_mem = analyze_trace(&mem, &a).unwrap();
        assert_eq!(from_file.spectra, from_mem.spectra);
    }

    #[test]
    fn reference_is_flat_in_band() {
        let p = SystemParams::reproduction().decoupled();
        let c = reference_config(&short(1.0), 1.0);
        let a = AnalysisConfig {
            welch: WelchConfig {
                segment_length: 4096,
                discard_edges: 1024,
                ..WelchConfig::default()
            },
            ..AnalysisConfig::default()
        };
        let e = analyze_simulated(&p, &c, &a).unwrap().band(20e3, 100e3).unwrap();
        let mean = e.spectra.s_qq.iter().sum::<f64>() / e.len() as f64;
        // the lock-in passband is flat to better than 1e-4 below 100 kHz
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        let mean_qp = e.spectra.s_qp.iter().sum::<f64>() / e.len() as f64;
        assert!(mean_qp.abs() < 0.01);
    }

    #[test]
    fn beat_mismatch_is_refused() {
        let p = SystemParams::reproduction();
        let a = AnalysisConfig {
            beat_freq: 300e3,
            ..AnalysisConfig::default()
        };
        assert!(matches!(run_end_to_end(&p, &short(0.01), 0.01, &a), Err(Error::Config(_))));
    }
}
