//! The receive pipeline.
//!
//! ```text
//! samples ─ FIR ─ rectify ─ envelope ─ binarize ─ decimate (1 kHz) ─ slice ─ sync ─ CRC
//! ```
//!
//! Everything runs through [`StreamDecoder`], an incremental engine whose
//! output does not depend on how the input is chunked. [`decode_buffer`] is
//! that engine fed with a single chunk.
//!
//! Two details differ from a naive batch chain:
//!
//! * The averaging window is centred: the stream is zero-padded by half a
//!   window at both ends so envelope sample `j` describes the signal around
//!   input sample `j * hop` and a frame at the very start of a buffer is
//!   still readable.
//! * The binarization threshold is relative to the envelope maximum in a
//!   neighbourhood of `threshold_span_ms` on each side rather than over the
//!   whole buffer, which keeps decisions final after bounded look-ahead.
//!
//! Bit timing is recovered by evaluating every symbol offset as a frame start
//! (all `1000 / bit_rate` phases of the bit grid). Hits at neighbouring phases
//! of the same frame are merged, keeping the median phase.

mod ber;
mod engine;
mod resolve;

pub use ber::{ber_sweep, ber_trial, sweep_payloads, BerReport, SweepPoint, TrialLayout};
pub use engine::StreamDecoder;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::dsp::{self, DspError, SampleBuffer, DEFAULT_PROBE_OFFSETS};
use crate::modem::ModemError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReceiverError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("chunk sample rate {got} Hz differs from stream rate {expected} Hz")]
    RateMismatch { expected: f64, got: f64 },
    #[error("invalid receiver config: {0}")]
    InvalidConfig(String),
}

/// Band-pass parameters for the optional input filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirBand {
    pub taps: usize,
    pub center_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for FirBand {
    fn default() -> Self {
        FirBand {
            taps: 20,
            center_hz: 1000.0,
            bandwidth_hz: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceiverConfig {
    pub fir_enabled: bool,
    pub fir: FirBand,
    /// Averaging window `k`, in input samples.
    pub window_len: usize,
    /// Envelope hop, in input samples.
    pub hop: usize,
    pub relative_threshold: f64,
    /// Half-width of the neighbourhood the threshold maximum is taken over.
    pub threshold_span_ms: f64,
    pub probe_offsets_ms: [f64; 3],
    pub bit_rate: u32,
    /// Capture length `n`: input beyond this many seconds is ignored.
    pub record_seconds: Option<f64>,
    /// Also report sync hits whose CRC fails, with `crc_ok = false`.
    pub report_invalid: bool,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            fir_enabled: true,
            fir: FirBand::default(),
            window_len: 441,
            hop: 11,
            relative_threshold: 0.4,
            threshold_span_ms: 320.0,
            probe_offsets_ms: DEFAULT_PROBE_OFFSETS,
            bit_rate: 100,
            record_seconds: None,
            report_invalid: false,
        }
    }
}

impl ReceiverConfig {
    /// Checks every stage parameter against `sample_rate`.
    pub fn validate(&self, sample_rate: f64) -> Result<(), ReceiverError> {
        engine::FrontEnd::new(self, sample_rate)?;
        dsp::symbols_per_bit(self.bit_rate)?;
        Ok(())
    }

    pub fn envelope_rate(&self, sample_rate: f64) -> f64 {
        sample_rate / self.hop as f64
    }
}

/// A frame recovered from the audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodedFrame {
    pub payload: u8,
    /// Frame start relative to the first input sample.
    pub start_ms: u64,
    pub crc_ok: bool,
}

/// Runs the full pipeline over one buffer.
pub fn decode_buffer(
    input: &SampleBuffer,
    cfg: &ReceiverConfig,
) -> Result<Vec<DecodedFrame>, ReceiverError> {
    let mut decoder = StreamDecoder::new(cfg, input.sample_rate())?;
    let mut frames = decoder.push(input)?;
    frames.extend(decoder.finish());
    Ok(frames)
}

/// Decodes a sequence of chunks; equal to [`decode_buffer`] on their concatenation.
///
/// Use [`StreamDecoder`] directly to receive frames as soon as they are final.
pub fn decode_stream<I>(chunks: I, cfg: &ReceiverConfig) -> Result<Vec<DecodedFrame>, ReceiverError>
where
    I: IntoIterator<Item = SampleBuffer>,
{
    let mut chunks = chunks.into_iter().peekable();
    let Some(first) = chunks.peek() else {
        return Ok(Vec::new());
    };
    let mut decoder = StreamDecoder::new(cfg, first.sample_rate())?;
    let mut frames = Vec::new();
    for chunk in chunks {
        frames.extend(decoder.push(&chunk)?);
    }
    frames.extend(decoder.finish());
    Ok(frames)
}

/// The sample-domain half of the pipeline: 1 kHz binary symbols (0.0 / 1.0).
pub fn demodulate_symbols(
    input: &SampleBuffer,
    cfg: &ReceiverConfig,
) -> Result<SampleBuffer, ReceiverError> {
    let mut front = engine::FrontEnd::new(cfg, input.sample_rate())?;
    let mut symbols = Vec::new();
    front.push(input.samples(), &mut symbols);
    front.finish(&mut symbols);
    Ok(SampleBuffer::from_parts(
        symbols.into_iter().map(f64::from).collect(),
        1000.0,
    ))
}

/// The symbol-domain half of the pipeline: slicing, sync search and CRC.
pub fn decode_symbols(
    symbols: &SampleBuffer,
    cfg: &ReceiverConfig,
) -> Result<Vec<DecodedFrame>, ReceiverError> {
    if symbols.sample_rate() != 1000.0 {
        return Err(ReceiverError::RateMismatch {
            expected: 1000.0,
            got: symbols.sample_rate(),
        });
    }
    let mut back = engine::BackEnd::new(cfg)?;
    let raw: Vec<u8> = symbols
        .samples()
        .iter()
        .map(|&s| (s != 0.0) as u8)
        .collect();
    let mut frames = Vec::new();
    back.push(&raw, &mut frames);
    back.finish(&mut frames);
    Ok(frames)
}
