use crate::dsp::{
    self, design_bandpass_fir, FirFilter, LocalMaxBinarizer, MsDecimator, SampleBuffer,
    WindowAverager,
};
use crate::framing::{decode_frame, sync_at, BitStream, FrameError, FRAME_BITS};
use crate::window::IndexedDeque;

use super::resolve::{Candidate, Resolver};
use super::{DecodedFrame, ReceiverConfig, ReceiverError};

/// Samples in, 1 kHz symbols out.
pub(crate) struct FrontEnd {
    fir: Option<FirFilter>,
    averager: WindowAverager,
    binarizer: LocalMaxBinarizer,
    decimator: MsDecimator,
    trailing_pad: usize,
    sample_limit: Option<u64>,
    consumed: u64,
    scratch: Vec<f64>,
    envelope: Vec<f64>,
    binary: Vec<f64>,
}

impl FrontEnd {
    pub(crate) fn new(cfg: &ReceiverConfig, sample_rate: f64) -> Result<Self, ReceiverError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(dsp::DspError::InvalidSampleRate(sample_rate).into());
        }
        let fir = if cfg.fir_enabled {
            let taps = design_bandpass_fir(
                cfg.fir.taps,
                cfg.fir.center_hz,
                cfg.fir.bandwidth_hz,
                sample_rate,
            )?;
            Some(FirFilter::new(&taps))
        } else {
            None
        };
        let mut averager = WindowAverager::new(cfg.window_len, cfg.hop)?;
        let envelope_rate = cfg.envelope_rate(sample_rate);
        if !(cfg.threshold_span_ms.is_finite() && cfg.threshold_span_ms >= 0.0) {
            return Err(ReceiverError::InvalidConfig(format!(
                "threshold span {} ms",
                cfg.threshold_span_ms
            )));
        }
        let half_span = (cfg.threshold_span_ms * envelope_rate / 1000.0).round() as usize;
        let binarizer = LocalMaxBinarizer::new(cfg.relative_threshold, half_span)?;
        let decimator = MsDecimator::new(envelope_rate, cfg.probe_offsets_ms)?;
        let sample_limit = match cfg.record_seconds {
            Some(secs) if secs.is_finite() && secs > 0.0 => {
                Some((secs * sample_rate).round() as u64)
            }
            Some(secs) => {
                return Err(ReceiverError::InvalidConfig(format!(
                    "record length {secs} s"
                )))
            }
            None => None,
        };

        // Centre the averaging window: half a window of silence before the
        // first sample, the rest after the last one.
        let leading_pad = cfg.window_len / 2;
        let mut discard = Vec::new();
        averager.push(&vec![0.0; leading_pad], &mut discard);
        debug_assert!(discard.is_empty());

        Ok(FrontEnd {
            fir,
            averager,
            binarizer,
            decimator,
            trailing_pad: cfg.window_len - 1 - leading_pad,
            sample_limit,
            consumed: 0,
            scratch: Vec::new(),
            envelope: Vec::new(),
            binary: Vec::new(),
        })
    }

    pub(crate) fn push(&mut self, samples: &[f64], out: &mut Vec<u8>) {
        let take = match self.sample_limit {
            Some(limit) => samples
                .len()
                .min(limit.saturating_sub(self.consumed) as usize),
            None => samples.len(),
        };
        let samples = &samples[..take];
        self.consumed += take as u64;

        self.scratch.clear();
        match &mut self.fir {
            Some(fir) => fir.process(samples, &mut self.scratch),
            None => self.scratch.extend_from_slice(samples),
        }
        for s in self.scratch.iter_mut() {
            *s = s.abs();
        }
        self.envelope.clear();
        self.averager.push(&self.scratch, &mut self.envelope);
        self.binary.clear();
        self.binarizer.push(&self.envelope, &mut self.binary);
        self.decimator.push(&self.binary, out);
    }

    pub(crate) fn finish(&mut self, out: &mut Vec<u8>) {
        self.envelope.clear();
        self.averager
            .push(&vec![0.0; self.trailing_pad], &mut self.envelope);
        self.binary.clear();
        self.binarizer.push(&self.envelope, &mut self.binary);
        self.binarizer.finish(&mut self.binary);
        self.decimator.push(&self.binary, out);
        self.decimator.finish(out);
    }
}

/// 1 kHz symbols in, frames out.
pub(crate) struct BackEnd {
    symbols_per_bit: u64,
    symbols: IndexedDeque<u8>,
    next_start: u64,
    resolver: Resolver,
}

impl BackEnd {
    pub(crate) fn new(cfg: &ReceiverConfig) -> Result<Self, ReceiverError> {
        let spb = dsp::symbols_per_bit(cfg.bit_rate)? as u64;
        Ok(BackEnd {
            symbols_per_bit: spb,
            symbols: IndexedDeque::new(),
            next_start: 0,
            resolver: Resolver::new(spb, cfg.report_invalid),
        })
    }

    fn frame_symbols(&self) -> u64 {
        FRAME_BITS as u64 * self.symbols_per_bit
    }

    pub(crate) fn push(&mut self, symbols: &[u8], out: &mut Vec<DecodedFrame>) {
        for &s in symbols {
            self.symbols.push(s);
        }
        while self.next_start + self.frame_symbols() <= self.symbols.end() {
            if let Some(candidate) = self.candidate_at(self.next_start) {
                self.resolver.offer(candidate);
            }
            self.next_start += 1;
        }
        self.symbols.trim_before(self.next_start);
        self.resolver.drain(self.next_start, false, out);
    }

    pub(crate) fn finish(&mut self, out: &mut Vec<DecodedFrame>) {
        self.resolver.drain(u64::MAX, true, out);
    }

    /// Slices 32 bits starting at symbol `start` and checks for a frame.
    fn candidate_at(&self, start: u64) -> Option<Candidate> {
        let spb = self.symbols_per_bit;
        let bit = |i: u64| {
            let from = start + i * spb;
            dsp::majority(self.symbols.range(from, from + spb).copied())
        };
        let bits: BitStream = (0..FRAME_BITS as u64).map(bit).collect();
        if !sync_at(&bits, 0) {
            return None;
        }
        match decode_frame(&bits, 0) {
            Ok(payload) => Some(Candidate {
                start,
                payload,
                crc_ok: true,
            }),
            Err(FrameError::CrcMismatch { payload, .. }) => Some(Candidate {
                start,
                payload,
                crc_ok: false,
            }),
            Err(_) => None,
        }
    }
}

/// Incremental decoder session.
///
/// Feed chunks with [`push`](Self::push); each call returns the frames that
/// became final. [`finish`](Self::finish) flushes the tail. The concatenated
/// output equals [`decode_buffer`](super::decode_buffer) on the concatenated
/// input, whatever the chunk boundaries.
pub struct StreamDecoder {
    sample_rate: f64,
    front: FrontEnd,
    back: BackEnd,
    symbols: Vec<u8>,
}

impl StreamDecoder {
    pub fn new(cfg: &ReceiverConfig, sample_rate: f64) -> Result<Self, ReceiverError> {
        Ok(StreamDecoder {
            sample_rate,
            front: FrontEnd::new(cfg, sample_rate)?,
            back: BackEnd::new(cfg)?,
            symbols: Vec::new(),
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn push(&mut self, chunk: &SampleBuffer) -> Result<Vec<DecodedFrame>, ReceiverError> {
        if chunk.sample_rate() != self.sample_rate {
            return Err(ReceiverError::RateMismatch {
                expected: self.sample_rate,
                got: chunk.sample_rate(),
            });
        }
        Ok(self.push_samples(chunk.samples()))
    }

    pub fn push_samples(&mut self, samples: &[f64]) -> Vec<DecodedFrame> {
        self.symbols.clear();
        self.front.push(samples, &mut self.symbols);
        let mut frames = Vec::new();
        self.back.push(&self.symbols, &mut frames);
        frames
    }

    pub fn finish(mut self) -> Vec<DecodedFrame> {
        self.symbols.clear();
        self.front.finish(&mut self.symbols);
        let mut frames = Vec::new();
        self.back.push(&self.symbols, &mut frames);
        self.back.finish(&mut frames);
        frames
    }
}
