//! Signal-conditioning primitives for the receive chain.
//!
//! Each stage exists both as a batch function over a [`SampleBuffer`] and,
//! where the receiver needs it incrementally, as a small streaming struct.
//! The batch functions are implemented on top of the streaming structs so the
//! two paths produce bit-identical output for any chunking of the input.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

use crate::framing::BitStream;
use crate::window::IndexedDeque;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DspError {
    #[error("invalid pass band {low_hz:.1}..{high_hz:.1} Hz at sample rate {sample_rate} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sample_rate: f64,
    },
    #[error("at least 3 taps required, got {0}")]
    TooFewTaps(usize),
    #[error("bad averaging window: window {window}, hop {hop}, input length {len}")]
    BadWindow {
        window: usize,
        hop: usize,
        len: usize,
    },
    #[error("sample rate {0} Hz too low for three probes per millisecond (need >= 3000 Hz)")]
    RateTooLow(f64),
    #[error("bit rate {0} bps does not divide 1000 symbols per second")]
    IncompatibleRate(u32),
    #[error("probe offsets {0:?} must be strictly increasing within [0, 1)")]
    InvalidProbes([f64; 3]),
    #[error("relative threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("empty input")]
    EmptyInput,
}

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, DspError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(DspError::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(SampleBuffer {
            samples,
            sample_rate,
        })
    }

    /// Caller guarantees a positive rate and finite samples.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: f64) -> Self {
        debug_assert!(sample_rate > 0.0);
        SampleBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self, DspError> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Splits at each of the given sample indices (ascending, in range).
    pub fn split_at_indices(&self, cuts: &[usize]) -> Vec<SampleBuffer> {
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut start = 0;
        for &cut in cuts.iter().chain(std::iter::once(&self.samples.len())) {
            out.push(SampleBuffer::from_parts(
                self.samples[start..cut].to_vec(),
                self.sample_rate,
            ));
            start = cut;
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampleBuffer {
        SampleBuffer::from_parts(
            self.samples.iter().map(|&s| f(s)).collect(),
            self.sample_rate,
        )
    }
}

/// FIR coefficients, applied as `y[n] = sum(h[i] * x[n - i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirTaps {
    coefficients: Vec<f64>,
}

impl FirTaps {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, DspError> {
        if coefficients.is_empty() {
            return Err(DspError::EmptyInput);
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(FirTaps { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// |H(e^{jw})| at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let (re, im) =
            self.coefficients
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(re, im), (n, &h)| {
                    let phase = w * n as f64;
                    (re + h * phase.cos(), im - h * phase.sin())
                });
        re.hypot(im)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn hamming(n: usize, len: usize) -> f64 {
    0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()
}

/// Share of the tap mean removed from the raw band-pass.
const DC_CANCELLATION: f64 = 0.5;

/// Windowed-sinc band-pass design.
///
/// The raw taps are the Hamming-windowed difference of two ideal low-passes at
/// the band edges. When the filter is short compared with the centre period
/// (20 taps span about 0.45 ms against 1 ms at 1 kHz) the positive- and
/// negative-frequency lobes merge, and the raw design passes 100 Hz more
/// strongly than the centre. Half of the tap mean is therefore subtracted:
/// cancelling all of it would null DC but push the pass-band peak up to
/// about 2.8 kHz at 3.5x the centre gain, making the filter amplify
/// broadband noise. The result is scaled to unity gain at `center_hz`.
pub fn design_bandpass_fir(
    taps: usize,
    center_hz: f64,
    bandwidth_hz: f64,
    sample_rate: f64,
) -> Result<FirTaps, DspError> {
    if taps < 3 {
        return Err(DspError::TooFewTaps(taps));
    }
    let low_hz = center_hz - bandwidth_hz / 2.0;
    let high_hz = center_hz + bandwidth_hz / 2.0;
    let valid = bandwidth_hz > 0.0
        && low_hz > 0.0
        && high_hz < sample_rate / 2.0
        && [center_hz, bandwidth_hz, sample_rate]
            .iter()
            .all(|v| v.is_finite());
    if !valid {
        return Err(DspError::InvalidBand {
            low_hz,
            high_hz,
            sample_rate,
        });
    }
    let (fl, fh) = (low_hz / sample_rate, high_hz / sample_rate);
    let mid = (taps - 1) as f64 / 2.0;
    let raw: Vec<f64> = (0..taps)
        .map(|n| {
            let m = n as f64 - mid;
            hamming(n, taps) * (2.0 * fh * sinc(2.0 * fh * m) - 2.0 * fl * sinc(2.0 * fl * m))
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / taps as f64;
    let band = FirTaps::new(raw.iter().map(|h| h - DC_CANCELLATION * mean).collect())?;
    let gain = band.magnitude_at(center_hz, sample_rate);
    FirTaps::new(band.coefficients.iter().map(|c| c / gain).collect())
}

/// Direct-form FIR with zero initial state.
#[derive(Debug, Clone)]
pub struct FirFilter {
    taps: Vec<f64>,
    // Double-length delay line: the newest `taps.len()` inputs are always
    // contiguous at `delay[pos + 1..=pos + len]`.
    delay: Vec<f64>,
    pos: usize,
}

impl FirFilter {
    pub fn new(taps: &FirTaps) -> Self {
        let len = taps.len();
        FirFilter {
            taps: taps.coefficients.clone(),
            delay: vec![0.0; 2 * len],
            pos: 0,
        }
    }

    pub fn process_sample(&mut self, x: f64) -> f64 {
        let len = self.taps.len();
        self.pos = (self.pos + 1) % len;
        self.delay[self.pos] = x;
        self.delay[self.pos + len] = x;
        // delay[pos + len] is x[n], delay[pos + len - i] is x[n - i]
        let newest = self.pos + len;
        self.taps
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &h)| acc + h * self.delay[newest - i])
    }

    pub fn process(&mut self, input: &[f64], out: &mut Vec<f64>) {
        out.extend(input.iter().map(|&x| self.process_sample(x)));
    }
}

/// Convolves `input` with `taps`; output has the input's length and rate.
pub fn fir_filter(input: &SampleBuffer, taps: &FirTaps) -> SampleBuffer {
    let mut filter = FirFilter::new(taps);
    let mut out = Vec::with_capacity(input.len());
    filter.process(&input.samples, &mut out);
    SampleBuffer::from_parts(out, input.sample_rate)
}

pub fn rectify(input: &SampleBuffer) -> SampleBuffer {
    input.map(f64::abs)
}

/// Sliding mean over `window` samples advancing by `hop`.
///
/// Window sums are assembled from per-hop block sums plus the remaining
/// `window % hop` samples, in a fixed order, so the result does not depend on
/// how the input is chunked.
#[derive(Debug, Clone)]
pub struct WindowAverager {
    window: usize,
    hop: usize,
    samples: IndexedDeque<f64>,
    blocks: IndexedDeque<f64>,
    block_acc: f64,
    block_fill: usize,
    next: u64,
}

impl WindowAverager {
    pub fn new(window: usize, hop: usize) -> Result<Self, DspError> {
        if hop == 0 || hop > window {
            return Err(DspError::BadWindow {
                window,
                hop,
                len: 0,
            });
        }
        Ok(WindowAverager {
            window,
            hop,
            samples: IndexedDeque::new(),
            blocks: IndexedDeque::new(),
            block_acc: 0.0,
            block_fill: 0,
            next: 0,
        })
    }

    pub fn push(&mut self, input: &[f64], out: &mut Vec<f64>) {
        let (window, hop) = (self.window as u64, self.hop as u64);
        let full = window / hop;
        let rem = window % hop;
        for &x in input {
            self.samples.push(x);
            self.block_acc += x;
            self.block_fill += 1;
            if self.block_fill == self.hop {
                self.blocks.push(self.block_acc);
                self.block_acc = 0.0;
                self.block_fill = 0;
            }
        }
        while self.next * hop + window <= self.samples.end() {
            let j = self.next;
            let mut sum = self.blocks.range(j, j + full).fold(0.0, |acc, b| acc + b);
            let tail = (j + full) * hop;
            sum = self
                .samples
                .range(tail, tail + rem)
                .fold(sum, |acc, s| acc + s);
            out.push(sum / self.window as f64);
            self.next += 1;
        }
        self.samples.trim_before(self.next * hop);
        self.blocks.trim_before(self.next);
    }
}

/// Mean of each `window_len`-sample window, advancing by `hop`.
///
/// Output rate is `input rate / hop`; output length is
/// `(len - window_len) / hop + 1`.
pub fn envelope(
    input: &SampleBuffer,
    window_len: usize,
    hop: usize,
) -> Result<SampleBuffer, DspError> {
    if hop == 0 || hop > window_len || window_len > input.len() {
        return Err(DspError::BadWindow {
            window: window_len,
            hop,
            len: input.len(),
        });
    }
    let mut avg = WindowAverager::new(window_len, hop)?;
    let mut out = Vec::with_capacity((input.len() - window_len) / hop + 1);
    avg.push(&input.samples, &mut out);
    Ok(SampleBuffer::from_parts(
        out,
        input.sample_rate / hop as f64,
    ))
}

fn check_threshold(relative_threshold: f64) -> Result<(), DspError> {
    if relative_threshold > 0.0 && relative_threshold < 1.0 {
        Ok(())
    } else {
        Err(DspError::InvalidThreshold(relative_threshold))
    }
}

#[inline]
fn decide(value: f64, max: f64, relative_threshold: f64) -> f64 {
    if max > 0.0 && value >= relative_threshold * max {
        1.0
    } else {
        0.0
    }
}

/// 1 where the envelope reaches `relative_threshold` of the buffer maximum.
pub fn binarize(
    envelope: &SampleBuffer,
    relative_threshold: f64,
) -> Result<SampleBuffer, DspError> {
    check_threshold(relative_threshold)?;
    if envelope.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let max = envelope.samples.iter().copied().fold(f64::MIN, f64::max);
    Ok(envelope.map(|v| decide(v, max, relative_threshold)))
}

/// Binarizer whose reference maximum is taken over a centred neighbourhood of
/// `half_span` samples on each side, truncated at the stream edges.
///
/// With `half_span` at least the stream length this is exactly [`binarize`].
#[derive(Debug, Clone)]
pub struct LocalMaxBinarizer {
    relative_threshold: f64,
    half_span: u64,
    values: IndexedDeque<f64>,
    // Indices of candidate maxima, values strictly decreasing front to back.
    maxima: VecDeque<u64>,
    next_in: u64,
    next_out: u64,
}

impl LocalMaxBinarizer {
    pub fn new(relative_threshold: f64, half_span: usize) -> Result<Self, DspError> {
        check_threshold(relative_threshold)?;
        Ok(LocalMaxBinarizer {
            relative_threshold,
            half_span: half_span as u64,
            values: IndexedDeque::new(),
            maxima: VecDeque::new(),
            next_in: 0,
            next_out: 0,
        })
    }

    pub fn push(&mut self, input: &[f64], out: &mut Vec<f64>) {
        for &v in input {
            self.values.push(v);
        }
        while self.next_out + self.half_span < self.values.end() {
            self.emit(out);
        }
        self.trim();
    }

    /// Emits the decisions still waiting for look-ahead.
    pub fn finish(&mut self, out: &mut Vec<f64>) {
        while self.next_out < self.values.end() {
            self.emit(out);
        }
        self.trim();
    }

    fn emit(&mut self, out: &mut Vec<f64>) {
        let j = self.next_out;
        let last = (j + self.half_span).min(self.values.end() - 1);
        while self.next_in <= last {
            let v = self.values[self.next_in];
            while self.maxima.back().is_some_and(|&b| self.values[b] <= v) {
                self.maxima.pop_back();
            }
            self.maxima.push_back(self.next_in);
            self.next_in += 1;
        }
        let first = j.saturating_sub(self.half_span);
        while self.maxima.front().is_some_and(|&f| f < first) {
            self.maxima.pop_front();
        }
        let max = self.values[*self.maxima.front().expect("window holds j")];
        out.push(decide(self.values[j], max, self.relative_threshold));
        self.next_out += 1;
    }

    fn trim(&mut self) {
        let keep = self
            .maxima
            .front()
            .copied()
            .unwrap_or(self.next_out)
            .min(self.next_out);
        self.values.trim_before(keep);
    }
}

/// [`binarize`] against a centred local maximum of `half_span` samples each side.
pub fn binarize_local(
    envelope: &SampleBuffer,
    relative_threshold: f64,
    half_span: usize,
) -> Result<SampleBuffer, DspError> {
    if envelope.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let mut bin = LocalMaxBinarizer::new(relative_threshold, half_span)?;
    let mut out = Vec::with_capacity(envelope.len());
    bin.push(&envelope.samples, &mut out);
    bin.finish(&mut out);
    Ok(SampleBuffer::from_parts(out, envelope.sample_rate))
}

pub const DEFAULT_PROBE_OFFSETS: [f64; 3] = [0.25, 0.50, 0.75];

/// Nearest input sample to `offset` (a fraction) inside millisecond `ms`.
pub fn probe_index(ms: u64, offset: f64, sample_rate: f64) -> u64 {
    ((ms as f64 + offset) * sample_rate / 1000.0).round() as u64
}

fn whole_ms(len: u64, sample_rate: f64) -> u64 {
    (len as f64 * 1000.0 / sample_rate).floor() as u64
}

fn check_decimation(sample_rate: f64, offsets: &[f64; 3]) -> Result<(), DspError> {
    if sample_rate < 3000.0 {
        return Err(DspError::RateTooLow(sample_rate));
    }
    let ordered = offsets.windows(2).all(|w| w[0] < w[1]);
    let in_range = offsets.iter().all(|&o| (0.0..1.0).contains(&o));
    if !(ordered && in_range) {
        return Err(DspError::InvalidProbes(*offsets));
    }
    Ok(())
}

/// Reduces a binary stream to one symbol per millisecond: 1 when any of the
/// three probes inside that millisecond reads 1.
#[derive(Debug, Clone)]
pub struct MsDecimator {
    sample_rate: f64,
    offsets: [f64; 3],
    values: IndexedDeque<f64>,
    next_ms: u64,
}

impl MsDecimator {
    pub fn new(sample_rate: f64, offsets: [f64; 3]) -> Result<Self, DspError> {
        check_decimation(sample_rate, &offsets)?;
        Ok(MsDecimator {
            sample_rate,
            offsets,
            values: IndexedDeque::new(),
            next_ms: 0,
        })
    }

    pub fn push(&mut self, input: &[f64], out: &mut Vec<u8>) {
        for &v in input {
            self.values.push(v);
        }
        let end = self.values.end();
        let limit = whole_ms(end, self.sample_rate);
        while self.next_ms < limit
            && probe_index(self.next_ms, self.offsets[2], self.sample_rate) < end
        {
            self.emit(end, out);
        }
        self.trim();
    }

    /// Emits the remaining whole milliseconds, clamping probes to the last sample.
    pub fn finish(&mut self, out: &mut Vec<u8>) {
        let end = self.values.end();
        let limit = whole_ms(end, self.sample_rate);
        while self.next_ms < limit {
            self.emit(end, out);
        }
        self.trim();
    }

    fn emit(&mut self, end: u64, out: &mut Vec<u8>) {
        let m = self.next_ms;
        let any = self.offsets.iter().any(|&o| {
            let idx = probe_index(m, o, self.sample_rate).min(end - 1);
            self.values[idx] != 0.0
        });
        out.push(any as u8);
        self.next_ms += 1;
    }

    fn trim(&mut self) {
        let keep = probe_index(self.next_ms, self.offsets[0], self.sample_rate);
        self.values
            .trim_before(keep.min(self.values.end().saturating_sub(1)));
    }
}

/// One symbol per millisecond at 1000 Hz; see [`MsDecimator`].
pub fn decimate_per_ms(
    binary: &SampleBuffer,
    probe_offsets_ms: [f64; 3],
) -> Result<SampleBuffer, DspError> {
    let mut dec = MsDecimator::new(binary.sample_rate, probe_offsets_ms)?;
    let mut symbols = Vec::new();
    dec.push(&binary.samples, &mut symbols);
    dec.finish(&mut symbols);
    Ok(SampleBuffer::from_parts(
        symbols.into_iter().map(f64::from).collect(),
        1000.0,
    ))
}

/// Number of 1 kHz symbols per bit, or an error if `bit_rate` does not divide 1000.
pub fn symbols_per_bit(bit_rate: u32) -> Result<usize, DspError> {
    if bit_rate == 0 || 1000 % bit_rate != 0 {
        return Err(DspError::IncompatibleRate(bit_rate));
    }
    Ok((1000 / bit_rate) as usize)
}

/// Majority vote over a group of symbols; an exact tie reads as 1.
pub fn majority(symbols: impl IntoIterator<Item = u8>) -> bool {
    let (ones, total) = symbols
        .into_iter()
        .fold((0usize, 0usize), |(ones, total), s| {
            (ones + (s != 0) as usize, total + 1)
        });
    2 * ones >= total
}

/// Majority decision over each group of `1000 / bit_rate` consecutive
/// millisecond symbols. A trailing partial group is dropped.
pub fn slice_bits(decimated: &SampleBuffer, bit_rate: u32) -> Result<BitStream, DspError> {
    let group = symbols_per_bit(bit_rate)?;
    Ok(decimated
        .samples
        .chunks_exact(group)
        .map(|chunk| majority(chunk.iter().map(|&s| (s != 0.0) as u8)))
        .collect())
}
