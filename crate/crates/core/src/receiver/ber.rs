//! Monte-Carlo loopback harness: frames → modem → channel → receiver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_channel, ChannelConfig};
use crate::framing::{encode_frame, BitStream};
use crate::modem::{modulate, ModemConfig};

use super::{decode_buffer, ReceiverConfig, ReceiverError};

/// How trial frames are laid out in the transmitted signal.
///
/// Each payload occupies a slot of `guard_bits` of silence, the 32-bit frame
/// and another `guard_bits` of silence; slots are sent back to back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialLayout {
    pub guard_bits: usize,
}

impl Default for TrialLayout {
    fn default() -> Self {
        TrialLayout { guard_bits: 4 }
    }
}

impl TrialLayout {
    pub fn slot_bits(&self) -> usize {
        2 * self.guard_bits + crate::framing::FRAME_BITS
    }

    /// Start of frame `index`, in milliseconds from the beginning of the signal.
    pub fn frame_start_ms(&self, index: usize, modem: &ModemConfig) -> f64 {
        (index * self.slot_bits() + self.guard_bits) as f64 * modem.bit_duration_ms()
    }

    pub fn bits(&self, payloads: &[u8]) -> BitStream {
        let mut bits = BitStream::new();
        for &p in payloads {
            (0..self.guard_bits).for_each(|_| bits.push(false));
            bits.extend_from(&encode_frame(p));
            (0..self.guard_bits).for_each(|_| bits.push(false));
        }
        bits
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BerReport {
    pub total_frames: usize,
    /// Frames found at their slot, whether or not the CRC held.
    pub frames_detected: usize,
    /// Detected with a valid CRC and the transmitted payload.
    pub frame_successes: usize,
    /// Not detected at all.
    pub frames_lost: usize,
    /// Decoded frames that matched no transmitted slot.
    pub spurious_frames: usize,
    /// Payload bits in error among detected frames.
    pub bit_errors: usize,
    pub bits_compared: usize,
}

impl BerReport {
    pub fn frame_success_rate(&self) -> f64 {
        self.frame_successes as f64 / self.total_frames as f64
    }

    /// Payload bit error rate over detected frames; NaN when nothing was detected.
    pub fn bit_error_rate(&self) -> f64 {
        if self.bits_compared == 0 {
            f64::NAN
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }
}

/// Sends `payloads` through the whole chain once and scores the result.
pub fn ber_trial(
    payloads: &[u8],
    channel: &ChannelConfig,
    modem: &ModemConfig,
    rx: &ReceiverConfig,
) -> Result<BerReport, ReceiverError> {
    ber_trial_with_layout(payloads, channel, modem, rx, TrialLayout::default())
}

pub fn ber_trial_with_layout(
    payloads: &[u8],
    channel: &ChannelConfig,
    modem: &ModemConfig,
    rx: &ReceiverConfig,
    layout: TrialLayout,
) -> Result<BerReport, ReceiverError> {
    let mut report = BerReport {
        total_frames: payloads.len(),
        ..Default::default()
    };
    if payloads.is_empty() {
        return Ok(report);
    }
    let tx = modulate(&layout.bits(payloads), modem)?;
    let received = apply_channel(&tx, channel)?;
    let rx = ReceiverConfig {
        report_invalid: true,
        ..rx.clone()
    };
    let frames = decode_buffer(&received, &rx)?;

    let bit_ms = modem.bit_duration_ms();
    let slot_ms = layout.slot_bits() as f64 * bit_ms;
    let mut matched = vec![false; payloads.len()];
    for frame in frames {
        let offset = frame.start_ms as f64 - layout.guard_bits as f64 * bit_ms;
        let slot = (offset / slot_ms).round();
        let in_range = slot >= 0.0 && (slot as usize) < payloads.len();
        let aligned = in_range
            && (frame.start_ms as f64 - layout.frame_start_ms(slot as usize, modem)).abs()
                <= bit_ms / 2.0;
        if !aligned || matched[slot as usize] {
            report.spurious_frames += 1;
            continue;
        }
        let slot = slot as usize;
        matched[slot] = true;
        report.frames_detected += 1;
        report.bits_compared += 8;
        report.bit_errors += (frame.payload ^ payloads[slot]).count_ones() as usize;
        if frame.crc_ok && frame.payload == payloads[slot] {
            report.frame_successes += 1;
        }
    }
    report.frames_lost = report.total_frames - report.frames_detected;
    Ok(report)
}

/// `count` pseudo-random payloads drawn from `seed`.
pub fn sweep_payloads(count: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub snr_db: Option<f64>,
    pub report: BerReport,
}

/// Runs one trial per SNR point, in parallel.
///
/// Every point uses the same payloads and the same noise seed, so the points
/// differ only in noise power.
pub fn ber_sweep(
    snr_points: &[Option<f64>],
    payloads: &[u8],
    channel: &ChannelConfig,
    modem: &ModemConfig,
    rx: &ReceiverConfig,
) -> Result<Vec<SweepPoint>, ReceiverError> {
    snr_points
        .par_iter()
        .map(|&snr_db| {
            let channel = ChannelConfig {
                snr_db,
                ..channel.clone()
            };
            ber_trial(payloads, &channel, modem, rx).map(|report| SweepPoint { snr_db, report })
        })
        .collect()
}
