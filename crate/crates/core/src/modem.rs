//! OOK tone-burst synthesis on the audio sub-carrier.
//!
//! Only the post-demodulator signal is modelled: a 1 kHz tone keyed on and
//! off at the bit rate, as it reaches the microphone input. The RF carrier
//! never appears in the samples.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::SampleBuffer;
use crate::framing::BitStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModemError {
    #[error("invalid modem config: {0}")]
    InvalidConfig(String),
    #[error("sample rate {sample_rate} is not a whole multiple of bit rate {bit_rate}")]
    NonIntegralBitPeriod { sample_rate: u32, bit_rate: u32 },
    #[error("nothing to modulate")]
    EmptyBits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModemConfig {
    pub bit_rate: u32,
    pub subcarrier_hz: u32,
    pub sample_rate: u32,
    /// Peak amplitude as a fraction of full scale.
    pub amplitude: f64,
    /// RF carrier of the physical link. Informational only.
    pub rf_carrier_hz: f64,
}

impl Default for ModemConfig {
    fn default() -> Self {
        ModemConfig {
            bit_rate: 100,
            subcarrier_hz: 1000,
            sample_rate: 44100,
            amplitude: 0.8,
            rf_carrier_hz: 125_000.0,
        }
    }
}

impl ModemConfig {
    pub fn validate(&self) -> Result<(), ModemError> {
        let invalid = |msg: String| Err(ModemError::InvalidConfig(msg));
        if self.bit_rate == 0 || self.sample_rate == 0 || self.subcarrier_hz == 0 {
            return invalid("rates must be positive".into());
        }
        if 2 * self.subcarrier_hz >= self.sample_rate {
            return invalid(format!(
                "sub-carrier {} Hz must be below Nyquist ({} Hz)",
                self.subcarrier_hz,
                self.sample_rate / 2
            ));
        }
        if !self.subcarrier_hz.is_multiple_of(self.bit_rate) {
            return invalid(format!(
                "bit rate {} must divide the sub-carrier {} Hz",
                self.bit_rate, self.subcarrier_hz
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return invalid(format!("amplitude {} outside (0, 1]", self.amplitude));
        }
        samples_per_bit(self).map(|_| ())
    }

    pub fn bit_duration_ms(&self) -> f64 {
        1000.0 / self.bit_rate as f64
    }
}

/// `sample_rate / bit_rate`, which must be an integer.
pub fn samples_per_bit(cfg: &ModemConfig) -> Result<usize, ModemError> {
    if cfg.bit_rate == 0 || !cfg.sample_rate.is_multiple_of(cfg.bit_rate) {
        return Err(ModemError::NonIntegralBitPeriod {
            sample_rate: cfg.sample_rate,
            bit_rate: cfg.bit_rate,
        });
    }
    Ok((cfg.sample_rate / cfg.bit_rate) as usize)
}

/// Keys the sub-carrier on for each 1-bit and off for each 0-bit.
///
/// Every bit period holds a whole number of carrier cycles, so the phase is
/// computed from the position inside the bit. This keeps the phase continuous
/// and makes `modulate(a ++ b) == modulate(a) ++ modulate(b)` exactly.
pub fn modulate(bits: &BitStream, cfg: &ModemConfig) -> Result<SampleBuffer, ModemError> {
    cfg.validate()?;
    if bits.is_empty() {
        return Err(ModemError::EmptyBits);
    }
    let spb = samples_per_bit(cfg)?;
    let step = 2.0 * PI * cfg.subcarrier_hz as f64 / cfg.sample_rate as f64;
    let tone: Vec<f64> = (0..spb)
        .map(|n| cfg.amplitude * (step * n as f64).sin())
        .collect();
    let mut samples = Vec::with_capacity(bits.len() * spb);
    for &bit in bits.as_slice() {
        if bit {
            samples.extend_from_slice(&tone);
        } else {
            samples.resize(samples.len() + spb, 0.0);
        }
    }
    Ok(SampleBuffer::from_parts(samples, cfg.sample_rate as f64))
}

/// `count` zero samples at the modem's sample rate.
pub fn silence(cfg: &ModemConfig, count: usize) -> SampleBuffer {
    SampleBuffer::from_parts(vec![0.0; count], cfg.sample_rate as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::encode_frame;

    #[test]
    fn one_bit_is_ten_cycles() {
        let cfg = ModemConfig::default();
        let out = modulate(&BitStream::from_bits(&[1]).unwrap(), &cfg).unwrap();
        assert_eq!(out.len(), 441);
        // 10 cycles: 20 sign changes, counting the return to phase 0 at the next bit
        let s = out.samples();
        let rising = (1..s.len())
            .filter(|&i| s[i - 1] < 0.0 && s[i] >= 0.0)
            .count();
        assert_eq!(rising, 9);
        assert!(s[440] < 0.0 && s[0] == 0.0);
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.8).abs() < 1e-3);
    }

    #[test]
    fn zero_bit_is_silent() {
        let out = modulate(
            &BitStream::from_bits(&[0]).unwrap(),
            &ModemConfig::default(),
        )
        .unwrap();
        assert_eq!(out.samples(), vec![0.0; 441].as_slice());
    }

    #[test]
    fn middle_zero_has_no_energy() {
        let out = modulate(
            &BitStream::from_bits(&[1, 0, 1]).unwrap(),
            &ModemConfig::default(),
        )
        .unwrap();
        let energy: f64 = out.samples()[441..882].iter().map(|v| v * v).sum();
        assert_eq!(energy, 0.0);
        assert_eq!(out.len(), 3 * 441);
    }

    #[test]
    fn bit_period() {
        assert_eq!(samples_per_bit(&ModemConfig::default()), Ok(441));
        let cfg = ModemConfig {
            sample_rate: 48000,
            ..Default::default()
        };
        assert_eq!(samples_per_bit(&cfg), Ok(480));
        let cfg = ModemConfig {
            bit_rate: 107,
            ..Default::default()
        };
        assert!(matches!(
            samples_per_bit(&cfg),
            Err(ModemError::NonIntegralBitPeriod { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = [
            ModemConfig {
                subcarrier_hz: 30000,
                ..Default::default()
            },
            ModemConfig {
                bit_rate: 300,
                ..Default::default()
            },
            ModemConfig {
                amplitude: 1.5,
                ..Default::default()
            },
            ModemConfig {
                amplitude: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(modulate(&encode_frame(1), &cfg).is_err(), "{cfg:?}");
        }
        assert_eq!(
            modulate(&BitStream::new(), &ModemConfig::default()),
            Err(ModemError::EmptyBits)
        );
    }
}
