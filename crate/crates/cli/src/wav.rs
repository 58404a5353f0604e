//! Mono 16-bit PCM WAV, the only container the tool reads or writes.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hbc_core::dsp::SampleBuffer;
use hound::{SampleFormat, WavSpec, WavWriter};

const FULL_SCALE: f64 = 32768.0;

/// Reads a mono 16-bit WAV; samples are scaled by 1/32768.
pub fn read(path: &Path) -> Result<SampleBuffer> {
    let mut reader =
        hound::WavReader::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        bail!(
            "{}: {} channels, only mono WAV is supported",
            path.display(),
            spec.channels
        );
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        bail!(
            "{}: {}-bit {:?} samples, only 16-bit integer PCM is supported",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        );
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("{}: malformed sample data", path.display()))?;
    Ok(SampleBuffer::new(samples, spec.sample_rate as f64)?)
}

/// Quantizes to 16 bits: round half away from zero, then saturate.
pub fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write(path: &Path, buffer: &SampleBuffer) -> Result<()> {
    let rate = buffer.sample_rate();
    if rate.fract() != 0.0 || rate < 1.0 || rate > u32::MAX as f64 {
        bail!("sample rate {rate} Hz cannot be stored in a WAV header");
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)
        .with_context(|| format!("cannot write {}", path.display()))?;
    for &x in buffer.samples() {
        writer.write_sample(quantize(x))?;
    }
    writer
        .finalize()
        .with_context(|| format!("cannot finish {}", path.display()))
}
