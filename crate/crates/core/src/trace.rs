//! Uniformly sampled real time series and the `OSQT` binary record format.
//!
//! Layout: magic `OSQT`, version `u16`, reserved `u16`, sample rate `f64`,
//! then samples as `f64`, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::spectra::fmt12;

pub const MAGIC: [u8; 4] = *b"OSQT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: String,
}

impl TimeTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64, label: impl Into<String>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive and finite"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len().max(1) as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    /// Samples `[start, end)` as a new trace with the same rate.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
            label: self.label.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = TraceWriter::new(w, self.sample_rate)?;
        out.push(&self.samples)?;
        out.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R, label: impl Into<String>) -> Result<Self> {
        let mut rd = TraceReader::new(r)?;
        let mut samples = Vec::new();
        let mut buf = vec![0.0; 1 << 16];
        loop {
            let n = rd.read_chunk(&mut buf)?;
            if n == 0 {
                break;
            }
            samples.extend_from_slice(&buf[..n]);
        }
        Self::new(samples, rd.sample_rate(), label)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    /// Loads a record; the label is the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_from(BufReader::new(File::open(path)?), label)
    }

    /// CSV `t_s,value`, intended for short excerpts.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_s", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            out.write_record([fmt12(i as f64 / self.sample_rate), fmt12(*v)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Incremental writer; the header goes out on construction.
pub struct TraceWriter<W: Write> {
    inner: W,
    written: u64,
    bytes: Vec<u8>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid("sample_rate", "must be positive and finite"));
        }
        let mut header = [0u8; HEADER_LEN];
        header[..4].copy_from_slice(&MAGIC);
        header[4..6].copy_from_slice(&VERSION.to_le_bytes());
        header[8..].copy_from_slice(&sample_rate.to_le_bytes());
        inner.write_all(&header)?;
        Ok(Self {
            inner,
            written: 0,
            bytes: Vec::new(),
        })
    }

    pub fn push(&mut self, samples: &[f64]) -> Result<()> {
        self.bytes.clear();
        self.bytes.reserve(samples.len() * 8);
        for v in samples {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&self.bytes)?;
        self.written += samples.len() as u64;
        Ok(())
    }

    pub fn samples_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Incremental reader validating the header up front.
pub struct TraceReader<R: Read> {
    inner: R,
    sample_rate: f64,
    bytes: Vec<u8>,
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        inner.read_exact(&mut header).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Format("truncated trace header".into()),
            _ => Error::Io(e),
        })?;
        if header[..4] != MAGIC {
            return Err(Error::Format("not an OSQT trace (bad magic)".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported trace version {version}")));
        }
        let sample_rate = f64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Format(format!("invalid sample rate {sample_rate}")));
        }
        Ok(Self {
            inner,
            sample_rate,
            bytes: Vec::new(),
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Fills up to `buf.len()` samples; returns the count, 0 at end of file.
    pub fn read_chunk(&mut self, buf: &mut [f64]) -> Result<usize> {
        self.bytes.resize(buf.len() * 8, 0);
        let mut filled = 0;
        while filled < self.bytes.len() {
            match self.inner.read(&mut self.bytes[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
        if filled % 8 != 0 {
            return Err(Error::Format("trace payload is not a whole number of samples".into()));
        }
        let n = filled / 8;
        for (dst, chunk) in buf[..n].iter_mut().zip(self.bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        Ok(n)
    }
}
