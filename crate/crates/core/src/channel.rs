//! Body-channel stand-in: gain, white Gaussian noise, DC offset, ADC clipping
//! and burst dropouts, reproducible under a seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::SampleBuffer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("bad dropout interval {start_ms}+{duration_ms} ms: {reason}")]
    BadDropout {
        start_ms: f64,
        duration_ms: f64,
        reason: &'static str,
    },
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
}

/// A zeroed interval of the received signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub start_ms: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub gain_db: f64,
    /// Signal-to-noise ratio over key-on samples; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub dc_offset: f64,
    pub dropouts: Vec<Dropout>,
    /// Clamp the output to [-1, 1] like a saturating ADC.
    pub clip: bool,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            gain_db: 0.0,
            snr_db: None,
            dc_offset: 0.0,
            dropouts: Vec::new(),
            clip: true,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    /// The identity channel.
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_snr(snr_db: f64, seed: u64) -> Self {
        ChannelConfig {
            snr_db: Some(snr_db),
            seed,
            ..Self::default()
        }
    }

    fn validate(&self, duration_ms: f64) -> Result<(), ChannelError> {
        for v in [self.gain_db, self.dc_offset] {
            if !v.is_finite() {
                return Err(ChannelError::InvalidParameter(format!("{v}")));
            }
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(ChannelError::InvalidParameter("snr must be finite".into()));
        }
        let mut sorted = self.dropouts.clone();
        sorted.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
        let mut prev_end = f64::NEG_INFINITY;
        for d in &sorted {
            let bad = |reason| {
                Err(ChannelError::BadDropout {
                    start_ms: d.start_ms,
                    duration_ms: d.duration_ms,
                    reason,
                })
            };
            if !(d.start_ms.is_finite() && d.duration_ms.is_finite()) {
                return bad("not finite");
            }
            if d.start_ms < 0.0 || d.duration_ms <= 0.0 {
                return bad("negative start or non-positive duration");
            }
            if d.start_ms + d.duration_ms > duration_ms {
                return bad("extends past the end of the buffer");
            }
            if d.start_ms < prev_end {
                return bad("overlaps another dropout");
            }
            prev_end = d.start_ms + d.duration_ms;
        }
        Ok(())
    }
}

fn mean_square(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Passes `input` through the channel.
///
/// Noise power is `P / 10^(snr/10)`, where `P` is the mean power of the
/// non-zero (key-on) samples after gain, so the OOK duty cycle does not skew
/// the ratio.
pub fn apply_channel(
    input: &SampleBuffer,
    cfg: &ChannelConfig,
) -> Result<SampleBuffer, ChannelError> {
    if input.is_empty() {
        return Err(ChannelError::EmptyInput);
    }
    let rate = input.sample_rate();
    cfg.validate(input.duration_secs() * 1000.0)?;

    let gain = 10f64.powf(cfg.gain_db / 20.0);
    let mut out: Vec<f64> = input.samples().iter().map(|&s| gain * s).collect();

    if let Some(snr_db) = cfg.snr_db {
        let signal_power = mean_square(out.iter().copied().filter(|&s| s != 0.0)).unwrap_or(0.0);
        let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for s in out.iter_mut() {
                *s += normal.sample(&mut rng);
            }
        }
    }
    for s in out.iter_mut() {
        *s += cfg.dc_offset;
        if cfg.clip {
            *s = s.clamp(-1.0, 1.0);
        }
    }
    for d in &cfg.dropouts {
        let start = ((d.start_ms * rate / 1000.0).round() as usize).min(out.len());
        let end = (((d.start_ms + d.duration_ms) * rate / 1000.0).round() as usize).min(out.len());
        out[start..end].fill(0.0);
    }
    Ok(SampleBuffer::new(out, rate).expect("finite arithmetic on finite input"))
}

/// `10 log10(P(signal) / P(noisy - signal))` in dB.
///
/// Identical buffers give `+inf`; a silent signal against non-zero noise gives `-inf`.
pub fn measure_snr(signal: &SampleBuffer, noisy: &SampleBuffer) -> Result<f64, ChannelError> {
    if signal.len() != noisy.len() {
        return Err(ChannelError::LengthMismatch(signal.len(), noisy.len()));
    }
    if signal.is_empty() {
        return Err(ChannelError::EmptyInput);
    }
    let diff = signal
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(s, n)| n - s);
    let noise_power = mean_square(diff).expect("non-empty");
    if noise_power == 0.0 {
        return Ok(f64::INFINITY);
    }
    let signal_power = mean_square(signal.samples().iter().copied()).expect("non-empty");
    if signal_power == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (signal_power / noise_power).log10())
}
