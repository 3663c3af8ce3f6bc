//! Butterworth low-pass filters as cascaded biquads, and zero-phase
//! (forward–backward) application in batch and streaming form.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// One second-order section, transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator `[a1, a2]` with `a0 = 1`.
    pub a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 2]) -> Self {
        Self {
            b,
            a,
            s1: 0.0,
            s2: 0.0,
        }
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    /// Sets the state to the steady response to a constant input `x`.
    fn settle(&mut self, x: f64) {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * x;
        self.s2 = self.b[2] * x - self.a[1] * y;
        self.s1 = y - self.b[0] * x;
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Digital Butterworth low-pass by bilinear transform with prewarping.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPass {
    sections: Vec<Biquad>,
    corner: f64,
    sample_rate: f64,
    order: usize,
}

impl LowPass {
    pub fn butterworth(order: usize, corner: f64, sample_rate: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "must be ≥ 1"));
        }
        if !(corner > 0.0 && corner < 0.5 * sample_rate) {
            return Err(invalid("corner", "must lie in (0, Nyquist)"));
        }
        let k = (PI * corner / sample_rate).tan();
        let k2 = k * k;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for j in 0..order / 2 {
            // analog pole pair damping 2 sin((2j+1)π / 2n)
            let alpha = 2.0 * (PI * (2 * j + 1) as f64 / (2 * order) as f64).sin();
            let norm = 1.0 / (1.0 + alpha * k + k2);
            let b0 = k2 * norm;
            sections.push(Biquad::new(
                [b0, 2.0 * b0, b0],
                [2.0 * (k2 - 1.0) * norm, (1.0 - alpha * k + k2) * norm],
            ));
        }
        if order % 2 == 1 {
            let b0 = k / (1.0 + k);
            sections.push(Biquad::new([b0, b0, 0.0], [(k - 1.0) / (k + 1.0), 0.0]));
        }
        Ok(Self {
            sections,
            corner,
            sample_rate,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn corner(&self) -> f64 {
        self.corner
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |v, s| s.step(v))
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(Biquad::reset);
    }

    /// Starts from the steady state for a constant input `x`.
    pub fn settle(&mut self, x: f64) {
        let mut v = x;
        for s in self.sections.iter_mut() {
            s.settle(v);
            v *= s.dc_gain();
        }
    }

    pub fn process(&mut self, xs: &mut [f64]) {
        for x in xs.iter_mut() {
            *x = self.step(*x);
        }
    }

    /// Magnitude response of one pass at `f` Hz.
    pub fn gain(&self, f: f64) -> f64 {
        let z = num_complex::Complex64::from_polar(1.0, -2.0 * PI * f / self.sample_rate);
        self.sections
            .iter()
            .map(|s| {
                let num = s.b[0] + s.b[1] * z + s.b[2] * z * z;
                let den = 1.0 + s.a[0] * z + s.a[1] * z * z;
                (num / den).norm()
            })
            .product()
    }

    /// Samples for the impulse response to fall well below double precision
    /// relative to its peak, used as padding and block margins.
    pub fn settle_len(&self) -> usize {
        let cycles = self.sample_rate / self.corner;
        (8.0 * self.order as f64 * cycles).ceil() as usize
    }
}

/// Edge extension used by [`filtfilt_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Point reflection about the end sample; exact for linear trends.
    Odd,
    /// Mirror reflection; continuous, so a large out-of-band component at
    /// the end sample does not become a step.
    Even,
}

/// Forward–backward filtering with odd-reflection padding at both ends.
///
/// The magnitude response is squared and the phase cancels exactly.
pub fn filtfilt(filter: &LowPass, x: &[f64]) -> Vec<f64> {
    filtfilt_with(filter, x, Padding::Odd)
}

pub fn filtfilt_with(filter: &LowPass, x: &[f64], padding: Padding) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = filter.settle_len().min(n - 1);
    let (first, last) = match padding {
        Padding::Odd => (2.0 * x[0], 2.0 * x[n - 1]),
        Padding::Even => (0.0, 0.0),
    };
    let sign = if padding == Padding::Odd { -1.0 } else { 1.0 };
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|j| first + sign * x[j]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|j| last + sign * x[n - 1 - j]));
    let mut f = filter.clone();
    f.reset();
    f.settle(ext[0]);
    f.process(&mut ext);
    ext.reverse();
    f.reset();
    f.settle(ext[0]);
    f.process(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Streaming zero-phase filter.
///
/// The forward pass runs continuously. Output is released in blocks: each
/// block's backward pass starts `margin` samples beyond its end from a zero
/// state, long enough for that start-up transient to die out. Output lags
/// input by up to `block + margin` samples.
#[derive(Debug, Clone)]
pub struct ZeroPhaseStream {
    forward: LowPass,
    backward: LowPass,
    block: usize,
    margin: usize,
    pending: Vec<f64>,
    scratch: Vec<f64>,
    started: bool,
}

impl ZeroPhaseStream {
    pub fn new(filter: &LowPass, block: usize) -> Self {
        Self::with_margin(filter, block, filter.settle_len().max(64))
    }

    pub fn with_margin(filter: &LowPass, block: usize, margin: usize) -> Self {
        let mut forward = filter.clone();
        forward.reset();
        Self {
            forward,
            backward: filter.clone(),
            block: block.max(1),
            margin,
            pending: Vec::new(),
            scratch: Vec::new(),
            started: false,
        }
    }

    /// Feeds samples and appends any completed output.
    pub fn push(&mut self, x: &[f64], out: &mut Vec<f64>) {
        if !self.started {
            if let Some(&x0) = x.first() {
                self.forward.settle(x0);
                self.started = true;
            }
        }
        self.pending.extend(x.iter().map(|&v| self.forward.step(v)));
        let mut offset = 0;
        while self.pending.len() - offset >= self.block + self.margin {
            self.release(offset, self.block, self.block + self.margin, out);
            offset += self.block;
        }
        self.pending.drain(..offset);
    }

    /// Flushes the remaining samples; the final backward pass starts at the
    /// last sample from a settled state.
    pub fn finish(mut self, out: &mut Vec<f64>) {
        let n = self.pending.len();
        if n > 0 {
            self.release(0, n, n, out);
        }
    }

    fn release(&mut self, offset: usize, emit: usize, span: usize, out: &mut Vec<f64>) {
        self.scratch.clear();
        self.scratch
            .extend(self.pending[offset..offset + span].iter().rev().copied());
        self.backward.reset();
        self.backward.settle(self.scratch[0]);
        self.backward.process(&mut self.scratch);
        out.extend(self.scratch[span - emit..].iter().rev());
    }
}
