//! Causal conditioning of kinematic and sEMG channels.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, sin, sqrt};
use nalgebra::DMatrix;

use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Fixed-lag polynomial differentiator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DifferentiatorSpec {
    /// Odd number of samples in the fitting window.
    pub window: usize,
    /// Degree of the fitted polynomial, at least 2.
    pub order: usize,
}

impl Default for DifferentiatorSpec {
    fn default() -> Self {
        Self {
            window: 11,
            order: 3,
        }
    }
}

impl DifferentiatorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) || self.window < 3 {
            return Err(Error::InvalidFilter(format!(
                "window {} must be odd and at least 3",
                self.window
            )));
        }
        if self.order < 2 || self.order >= self.window {
            return Err(Error::InvalidFilter(format!(
                "polynomial order {} must be in [2, window)",
                self.order
            )));
        }
        Ok(())
    }

    /// Delay between the newest input and the sample being estimated.
    pub fn lag(&self) -> usize {
        (self.window - 1) / 2
    }
}

/// Savitzky–Golay weights: `weights[e][d]` evaluates the `d`-th derivative
/// (d = 0, 1, 2) at window position `e`, already scaled by `fs^d`.
#[derive(Debug, Clone)]
struct PolyWeights {
    weights: Vec<[Vec<f64>; 3]>,
}

impl PolyWeights {
    fn new(spec: &DifferentiatorSpec, fs: f64) -> Result<Self> {
        spec.validate()?;
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::NonPositive {
                what: "sample rate",
            });
        }
        let w = spec.window;
        let m = spec.order + 1;
        let center = spec.lag() as f64;
        let t = |k: usize| k as f64 - center;
        let v = DMatrix::from_fn(w, m, |r, c| libm::pow(t(r), c as f64));
        let gram = v.transpose() * &v;
        let inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidFilter("singular polynomial design".into()))?;
        // rows of `proj` map window samples to polynomial coefficients
        let proj = inv * v.transpose();
        let mut weights = Vec::with_capacity(w);
        for e in 0..w {
            let te = t(e);
            let row = |d: usize| -> Vec<f64> {
                let mut h = vec![0.0; w];
                for p in d..m {
                    let falling = (p - d + 1..=p).map(|x| x as f64).product::<f64>();
                    let factor = falling * libm::pow(te, (p - d) as f64) * libm::pow(fs, d as f64);
                    for k in 0..w {
                        h[k] += factor * proj[(p, k)];
                    }
                }
                h
            };
            weights.push([row(0), row(1), row(2)]);
        }
        Ok(Self { weights })
    }
}

/// Smoothed value with first and second derivatives for one sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSample {
    pub index: usize,
    pub value: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Streaming multi-channel differentiator.
///
/// Once a full window is buffered, every new sample releases the estimate for
/// the sample `lag` steps back, evaluated at the window centre. The first
/// `lag` samples are released together with the first full window, and the
/// last `lag` on [`Differentiator::finish`], from the same window evaluated
/// off-centre. Batch and streaming use give identical results.
#[derive(Debug, Clone)]
pub struct Differentiator {
    spec: DifferentiatorSpec,
    width: usize,
    weights: PolyWeights,
    buffer: VecDeque<Vec<f64>>,
    pushed: usize,
}

impl Differentiator {
    pub fn new(spec: DifferentiatorSpec, fs: f64, width: usize) -> Result<Self> {
        let weights = PolyWeights::new(&spec, fs)?;
        Ok(Self {
            spec,
            width,
            weights,
            buffer: VecDeque::with_capacity(spec.window),
            pushed: 0,
        })
    }

    pub fn spec(&self) -> DifferentiatorSpec {
        self.spec
    }

    /// Latency in samples.
    pub fn lag(&self) -> usize {
        self.spec.lag()
    }

    fn evaluate(&self, position: usize) -> DerivativeSample {
        let [h0, h1, h2] = &self.weights.weights[position];
        let mut out = DerivativeSample {
            index: self.pushed - self.spec.window + position,
            value: vec![0.0; self.width],
            first: vec![0.0; self.width],
            second: vec![0.0; self.width],
        };
        for (k, sample) in self.buffer.iter().enumerate() {
            for c in 0..self.width {
                out.value[c] += h0[k] * sample[c];
                out.first[c] += h1[k] * sample[c];
                out.second[c] += h2[k] * sample[c];
            }
        }
        out
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<Vec<DerivativeSample>> {
        if sample.len() != self.width {
            return Err(Error::DimensionMismatch {
                what: "differentiator sample",
                expected: self.width,
                got: sample.len(),
            });
        }
        if self.buffer.len() == self.spec.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample.to_vec());
        self.pushed += 1;
        let lag = self.lag();
        Ok(if self.pushed == self.spec.window {
            (0..=lag).map(|e| self.evaluate(e)).collect()
        } else if self.pushed > self.spec.window {
            vec![self.evaluate(lag)]
        } else {
            Vec::new()
        })
    }

    /// Releases the trailing samples. Fails when fewer than a window of
    /// samples were ever pushed.
    pub fn finish(&mut self) -> Result<Vec<DerivativeSample>> {
        if self.pushed < self.spec.window {
            return Err(Error::WindowTooLong {
                window: self.spec.window,
                len: self.pushed,
            });
        }
        let lag = self.lag();
        Ok((lag + 1..self.spec.window)
            .map(|e| self.evaluate(e))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub smoothed: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Latency of the streaming estimate, in samples.
    pub lag: usize,
}

/// Smoothed signal and its first two derivatives, aligned with the input.
pub fn differentiate(x: &[f64], fs: f64, spec: DifferentiatorSpec) -> Result<Derivatives> {
    let mut d = Differentiator::new(spec, fs, 1)?;
    if x.len() < spec.window {
        return Err(Error::WindowTooLong {
            window: spec.window,
            len: x.len(),
        });
    }
    let mut out = Derivatives {
        smoothed: Vec::with_capacity(x.len()),
        first: Vec::with_capacity(x.len()),
        second: Vec::with_capacity(x.len()),
        lag: spec.lag(),
    };
    let mut take = |samples: Vec<DerivativeSample>| {
        for s in samples {
            out.smoothed.push(s.value[0]);
            out.first.push(s.first[0]);
            out.second.push(s.second[0]);
        }
    };
    for &v in x {
        take(d.push(&[v])?);
    }
    take(d.finish()?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum FilterKind {
    LowPass { cutoff: f64 },
    HighPass { cutoff: f64 },
    BandPass { low: f64, high: f64 },
}

/// Butterworth filter specification. `order` applies to each band edge and
/// must be even (it is realised as cascaded second-order sections).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub order: usize,
    pub sample_rate: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        let fs = self.sample_rate;
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::NonPositive {
                what: "sample rate",
            });
        }
        if self.order == 0 || !self.order.is_multiple_of(2) {
            return Err(Error::InvalidFilter(format!(
                "order {} must be even and positive",
                self.order
            )));
        }
        let nyquist = fs / 2.0;
        let edges: &[f64] = match &self.kind {
            FilterKind::LowPass { cutoff } | FilterKind::HighPass { cutoff } => &[*cutoff],
            FilterKind::BandPass { low, high } => {
                if !(low < high) {
                    return Err(Error::InvalidFilter(format!("band edges {low} >= {high}")));
                }
                &[*low, *high]
            }
        };
        for &e in edges {
            if !(e > 0.0) {
                return Err(Error::InvalidFilter(format!(
                    "band edge {e} Hz must be positive"
                )));
            }
            if e >= nyquist {
                return Err(Error::SampleRateTooLow { fs, edge: e });
            }
        }
        Ok(())
    }
}

/// Direct-form II transposed biquad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn design(cutoff: f64, fs: f64, q: f64, high_pass: bool) -> Self {
        let w0 = 2.0 * core::f64::consts::PI * cutoff / fs;
        let (s, c) = (sin(w0), cos(w0));
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = if high_pass {
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0]
        } else {
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
            z: [0.0; 2],
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Magnitude response at `f` Hz.
    pub fn gain(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * core::f64::consts::PI * f / fs;
        // H(e^{jw}) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
        let (c1, s1, c2, s2) = (cos(w), sin(w), cos(2.0 * w), sin(2.0 * w));
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = -(self.b[1] * s1 + self.b[2] * s2);
        let dr = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let di = -(self.a[0] * s1 + self.a[1] * s2);
        sqrt((nr * nr + ni * ni) / (dr * dr + di * di))
    }
}

/// Cascade of Butterworth biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthFilter {
    sections: Vec<Biquad>,
    sample_rate: f64,
}

impl ButterworthFilter {
    pub fn new(spec: &FilterSpec) -> Result<Self> {
        spec.validate()?;
        let fs = spec.sample_rate;
        let n = spec.order;
        let qs: Vec<f64> = (0..n / 2)
            .map(|k| {
                let theta = (2 * k + 1) as f64 * core::f64::consts::PI / (2 * n) as f64;
                1.0 / (2.0 * cos(theta))
            })
            .collect();
        let mut sections = Vec::new();
        let mut add = |cutoff: f64, high: bool| {
            for &q in &qs {
                sections.push(Biquad::design(cutoff, fs, q, high));
            }
        };
        match spec.kind {
            FilterKind::LowPass { cutoff } => add(cutoff, false),
            FilterKind::HighPass { cutoff } => add(cutoff, true),
            FilterKind::BandPass { low, high } => {
                add(low, true);
                add(high, false);
            }
        }
        Ok(Self {
            sections,
            sample_rate: fs,
        })
    }

    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn gain(&self, f: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.gain(f, self.sample_rate))
            .product()
    }

    pub fn gain_db(&self, f: f64) -> f64 {
        20.0 * libm::log10(self.gain(f))
    }
}

/// Root mean square over a sliding window of the most recent samples.
#[derive(Debug, Clone)]
pub struct MovingRms {
    squares: VecDeque<f64>,
    len: usize,
    sum: f64,
    since_refresh: usize,
}

impl MovingRms {
    pub fn new(len: usize) -> Self {
        let len = len.max(1);
        Self {
            squares: VecDeque::with_capacity(len),
            len,
            sum: 0.0,
            since_refresh: 0,
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let sq = x * x;
        if self.squares.len() == self.len {
            let old = self.squares.pop_front().unwrap_or(0.0);
            self.sum -= old;
        }
        self.squares.push_back(sq);
        self.sum += sq;
        self.since_refresh += 1;
        if self.since_refresh >= self.len {
            // bound the drift of the running sum
            self.sum = self.squares.iter().sum();
            self.since_refresh = 0;
        }
        sqrt(self.sum.max(0.0) / self.squares.len() as f64)
    }
}

pub const N_EMG: usize = 10;

/// Muscle labels in channel order.
pub const EMG_CHANNELS: [&str; N_EMG] =
    ["AD", "PD", "BC", "TC", "TR", "ES", "GM", "RF", "BF", "TA"];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EmgConfig {
    pub band_low: f64,
    pub band_high: f64,
    pub order: usize,
    /// Envelope window [s].
    pub envelope_window: f64,
}

impl Default for EmgConfig {
    fn default() -> Self {
        Self {
            band_low: 2.0,
            band_high: 500.0,
            order: 4,
            envelope_window: 0.25,
        }
    }
}

/// Band-pass, full-wave rectification, moving-RMS envelope and MVC
/// normalization, one sample at a time.
#[derive(Debug, Clone)]
pub struct EmgProcessor {
    filters: Vec<ButterworthFilter>,
    envelopes: Vec<MovingRms>,
    mvc: [f64; N_EMG],
}

impl EmgProcessor {
    pub fn new(sample_rate: f64, mvc: &[f64; N_EMG], config: &EmgConfig) -> Result<Self> {
        for &m in mvc {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::NonPositive { what: "MVC" });
            }
        }
        let spec = FilterSpec {
            kind: FilterKind::BandPass {
                low: config.band_low,
                high: config.band_high,
            },
            order: config.order,
            sample_rate,
        };
        let filter = ButterworthFilter::new(&spec)?;
        if !(config.envelope_window > 0.0) {
            return Err(Error::NonPositive {
                what: "envelope window",
            });
        }
        let len = libm::round(config.envelope_window * sample_rate) as usize;
        Ok(Self {
            filters: vec![filter; N_EMG],
            envelopes: (0..N_EMG).map(|_| MovingRms::new(len)).collect(),
            mvc: *mvc,
        })
    }

    pub fn process(&mut self, raw: &[f64; N_EMG]) -> [f64; N_EMG] {
        core::array::from_fn(|c| {
            let filtered = self.filters[c].process(raw[c]);
            self.envelopes[c].process(filtered.abs()) / self.mvc[c]
        })
    }
}

/// Normalized activation for a whole recording.
pub fn process_emg(
    raw: &[[f64; N_EMG]],
    sample_rate: f64,
    mvc: &[f64; N_EMG],
    config: &EmgConfig,
) -> Result<Vec<[f64; N_EMG]>> {
    let mut p = EmgProcessor::new(sample_rate, mvc, config)?;
    Ok(raw.iter().map(|s| p.process(s)).collect())
}

/// Stretch of a resampled channel bridged across missing input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub channel: usize,
    pub start: f64,
    pub end: f64,
    /// Number of nominal sample periods spanned.
    pub periods: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub times: Vec<f64>,
    pub channels: Vec<Vec<f64>>,
    /// Interpolated stretches longer than the gap limit.
    pub gaps: Vec<Gap>,
}

/// Longest stretch, in nominal sample periods, that interpolation bridges
/// without being flagged.
pub const MAX_GAP_PERIODS: f64 = 5.0;

/// Linear interpolation of each channel onto a uniform grid starting at the
/// first timestamp. Missing input values are `None`; values outside the
/// first/last valid sample are held constant.
pub fn resample_linear(
    times: &[f64],
    channels: &[Vec<Option<f64>>],
    rate: f64,
) -> Result<Resampled> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::NonPositive {
            what: "resampling rate",
        });
    }
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    for ch in channels {
        if ch.len() != times.len() {
            return Err(Error::DimensionMismatch {
                what: "resampled channel",
                expected: times.len(),
                got: ch.len(),
            });
        }
    }
    let period = 1.0 / rate;
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let n = libm::floor(span * rate + 1e-9) as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * period).collect();

    let mut out = Vec::with_capacity(channels.len());
    let mut gaps = Vec::new();
    for (ci, ch) in channels.iter().enumerate() {
        let valid: Vec<(f64, f64)> = times
            .iter()
            .zip(ch)
            .filter_map(|(t, v)| v.map(|v| (*t, v)))
            .collect();
        if valid.is_empty() {
            out.push(vec![f64::NAN; n]);
            gaps.push(Gap {
                channel: ci,
                start: t0,
                end: times[times.len() - 1],
                periods: span * rate,
            });
            continue;
        }
        for pair in valid.windows(2) {
            let periods = (pair[1].0 - pair[0].0) * rate;
            if periods > MAX_GAP_PERIODS {
                gaps.push(Gap {
                    channel: ci,
                    start: pair[0].0,
                    end: pair[1].0,
                    periods,
                });
            }
        }
        let mut k = 0usize;
        let values = grid
            .iter()
            .map(|&t| {
                while k + 1 < valid.len() && valid[k + 1].0 <= t {
                    k += 1;
                }
                let (ta, va) = valid[k];
                if t <= ta || k + 1 == valid.len() {
                    va
                } else {
                    let (tb, vb) = valid[k + 1];
                    va + (vb - va) * (t - ta) / (tb - ta)
                }
            })
            .collect();
        out.push(values);
    }
    Ok(Resampled {
        times: grid,
        channels: out,
        gaps,
    })
}
