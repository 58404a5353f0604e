//! `hbc`: encode, decode, simulate and evaluate body-channel OOK audio, and
//! replay beacon traces through region monitoring and artifact fusion.
//!
//! Exit status: 0 on success, 1 on I/O, format or usage errors, 2 when
//! `decode` finds no CRC-valid frame.

mod wav;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hbc_core::beacon::trace::{self, ReplayConfig};
use hbc_core::beacon::{ArtifactRegistry, MonitorConfig, PathLossModel, ZoneThresholds};
use hbc_core::channel::{apply_channel, ChannelConfig, Dropout};
use hbc_core::dsp::SampleBuffer;
use hbc_core::framing::encode_frame;
use hbc_core::modem::{modulate, ModemConfig};
use hbc_core::receiver::{
    ber_sweep, decode_buffer, sweep_payloads, FirBand, ReceiverConfig, SweepPoint, TrialLayout,
};

/// Silence written before and after an encoded frame.
const ENCODE_PAD_MS: u32 = 100;

#[derive(Debug, Parser)]
#[command(
    name = "hbc",
    version,
    about = "Body-channel OOK modem and beacon proximity toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Modulate one framed payload byte into a WAV file.
    Encode {
        /// Payload byte, hex (`0x5A` or `5A`).
        #[arg(long, value_parser = parse_byte)]
        payload: u8,
        /// Output WAV path.
        out: PathBuf,
        #[command(flatten)]
        modem: ModemArgs,
    },
    /// Decode frames from a mono 16-bit WAV file.
    Decode {
        /// Input WAV path.
        input: PathBuf,
        #[command(flatten)]
        rx: ReceiverArgs,
        /// Print a JSON array instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// Modulate a frame sequence, pass it through the channel model, write a WAV.
    Simulate {
        /// Payload bytes, comma-separated hex.
        #[arg(long, value_delimiter = ',', value_parser = parse_byte, required = true)]
        payloads: Vec<u8>,
        /// Output WAV path.
        out: PathBuf,
        #[command(flatten)]
        modem: ModemArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Signal-to-noise ratio in dB over key-on samples; omit for no noise.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
    },
    /// Frame success and bit error rate against SNR.
    BerSweep {
        /// SNR points in dB, comma-separated; `noiseless` for no noise.
        #[arg(long, value_delimiter = ',', value_parser = parse_snr, required = true, allow_hyphen_values = true)]
        snr: Vec<Option<f64>>,
        /// Frames per SNR point.
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
        frames: u32,
        /// Seed for payloads and noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print a JSON report to standard output.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        modem: ModemArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        rx: ReceiverArgs,
    },
    /// Replay a beacon trace through monitoring, ranging and fusion.
    Replay {
        /// Trace file (newline-delimited JSON).
        trace: PathBuf,
        /// Artifact registry (JSON). Without it every fix is unregistered.
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Print a JSON array instead of text lines.
        #[arg(long)]
        json: bool,
        /// Consecutive readings needed to enter a region.
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        enter_after: u32,
        /// Silence in ms after which a region is left.
        #[arg(long, default_value_t = 10_000)]
        exit_after_ms: u64,
        /// RSSI smoothing factor in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Path-loss exponent in [1.5, 4].
        #[arg(long, default_value_t = 2.0)]
        path_loss_exponent: f64,
        /// Immediate/Near boundary in metres.
        #[arg(long, default_value_t = 0.5)]
        immediate_m: f64,
        /// Near/Far boundary in metres.
        #[arg(long, default_value_t = 4.0)]
        near_m: f64,
    },
}

#[derive(Debug, Args)]
struct ModemArgs {
    /// Bits per second.
    #[arg(long, default_value_t = 100)]
    bit_rate: u32,
    /// Audio sub-carrier frequency in Hz.
    #[arg(long, default_value_t = 1000)]
    subcarrier_hz: u32,
    /// Output sample rate in Hz.
    #[arg(long, default_value_t = 44100)]
    sample_rate: u32,
    /// Tone peak amplitude as a fraction of full scale.
    #[arg(long, default_value_t = 0.8)]
    amplitude: f64,
}

impl ModemArgs {
    fn config(&self) -> Result<ModemConfig> {
        let cfg = ModemConfig {
            bit_rate: self.bit_rate,
            subcarrier_hz: self.subcarrier_hz,
            sample_rate: self.sample_rate,
            amplitude: self.amplitude,
            ..ModemConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Channel gain in dB.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gain_db: f64,
    /// DC offset added after the noise.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    dc_offset: f64,
    /// Zeroed interval `START_MS:DURATION_MS`; repeatable.
    #[arg(long, value_parser = parse_dropout)]
    dropout: Vec<Dropout>,
    /// Do not clamp the output to [-1, 1].
    #[arg(long)]
    no_clip: bool,
    /// Noise seed (ber-sweep uses --seed).
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

impl ChannelArgs {
    fn config(&self, snr_db: Option<f64>) -> ChannelConfig {
        ChannelConfig {
            gain_db: self.gain_db,
            snr_db,
            dc_offset: self.dc_offset,
            dropouts: self.dropout.clone(),
            clip: !self.no_clip,
            seed: self.noise_seed,
        }
    }
}

#[derive(Debug, Args)]
struct ReceiverArgs {
    /// Skip the band-pass filter.
    #[arg(long)]
    no_fir: bool,
    /// Band-pass length.
    #[arg(long, default_value_t = 20)]
    fir_taps: usize,
    /// Band-pass centre in Hz.
    #[arg(long, default_value_t = 1000.0)]
    fir_center_hz: f64,
    /// Band-pass width in Hz.
    #[arg(long, default_value_t = 400.0)]
    fir_bandwidth_hz: f64,
    /// Envelope window in samples.
    #[arg(long, default_value_t = 441)]
    window_len: usize,
    /// Envelope hop in samples.
    #[arg(long, default_value_t = 11)]
    hop: usize,
    /// Decision threshold as a fraction of the local envelope maximum.
    #[arg(long, default_value_t = 0.4)]
    threshold: f64,
    /// Half-width in ms of the window the envelope maximum is taken over.
    #[arg(long, default_value_t = 320.0)]
    threshold_span_ms: f64,
    /// Receiver bit rate.
    #[arg(long, default_value_t = 100)]
    rx_bit_rate: u32,
    /// Process only the first N seconds.
    #[arg(long)]
    record_seconds: Option<f64>,
    /// Also report frames whose CRC fails.
    #[arg(long)]
    report_invalid: bool,
}

impl ReceiverArgs {
    fn config(&self) -> ReceiverConfig {
        ReceiverConfig {
            fir_enabled: !self.no_fir,
            fir: FirBand {
                taps: self.fir_taps,
                center_hz: self.fir_center_hz,
                bandwidth_hz: self.fir_bandwidth_hz,
            },
            window_len: self.window_len,
            hop: self.hop,
            relative_threshold: self.threshold,
            threshold_span_ms: self.threshold_span_ms,
            bit_rate: self.rx_bit_rate,
            record_seconds: self.record_seconds,
            report_invalid: self.report_invalid,
            ..ReceiverConfig::default()
        }
    }
}

fn parse_byte(s: &str) -> Result<u8, String> {
    trace::parse_payload_hex(s.trim())
}

fn parse_snr(s: &str) -> Result<Option<f64>, String> {
    match s.trim() {
        "noiseless" | "inf" => Ok(None),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| format!("bad SNR {v:?}: expected dB or `noiseless`")),
    }
}

fn parse_dropout(s: &str) -> Result<Dropout, String> {
    let (start, dur) = s
        .split_once(':')
        .ok_or_else(|| format!("bad dropout {s:?}: expected START_MS:DURATION_MS"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad dropout {s:?}: {v:?} is not a number"))
    };
    Ok(Dropout {
        start_ms: num(start)?,
        duration_ms: num(dur)?,
    })
}

fn concat(parts: &[&SampleBuffer]) -> Result<SampleBuffer> {
    let rate = parts[0].sample_rate();
    let samples = parts
        .iter()
        .flat_map(|p| p.samples().iter().copied())
        .collect();
    Ok(SampleBuffer::new(samples, rate)?)
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn hex_byte(b: u8) -> String {
    format!("0x{b:02x}")
}

#[derive(Serialize)]
struct FrameReport {
    start_ms: u64,
    payload: String,
    crc_ok: bool,
}

fn cmd_encode(payload: u8, out: &Path, modem: &ModemArgs) -> Result<ExitCode> {
    let cfg = modem.config()?;
    let pad = SampleBuffer::zeros(
        (cfg.sample_rate * ENCODE_PAD_MS / 1000) as usize,
        cfg.sample_rate as f64,
    )?;
    let frame = modulate(&encode_frame(payload), &cfg)?;
    wav::write(out, &concat(&[&pad, &frame, &pad])?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(input: &Path, rx: &ReceiverArgs, json: bool) -> Result<ExitCode> {
    let audio = wav::read(input)?;
    let frames = decode_buffer(&audio, &rx.config())?;
    if json {
        let report: Vec<FrameReport> = frames
            .iter()
            .map(|f| FrameReport {
                start_ms: f.start_ms,
                payload: hex_byte(f.payload),
                crc_ok: f.crc_ok,
            })
            .collect();
        emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    } else {
        let text: String = frames
            .iter()
            .map(|f| {
                format!(
                    "{} ms {} CRC {}\n",
                    f.start_ms,
                    hex_byte(f.payload),
                    if f.crc_ok { "OK" } else { "FAIL" }
                )
            })
            .collect();
        emit(&text)?;
    }
    if frames.iter().any(|f| f.crc_ok) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("no valid frames in {}", input.display());
        Ok(ExitCode::from(2))
    }
}

fn cmd_simulate(
    payloads: &[u8],
    out: &Path,
    modem: &ModemArgs,
    channel: &ChannelArgs,
    snr: Option<f64>,
) -> Result<ExitCode> {
    let cfg = modem.config()?;
    let tx = modulate(&TrialLayout::default().bits(payloads), &cfg)?;
    let rx = apply_channel(&tx, &channel.config(snr))?;
    wav::write(out, &rx)?;
    Ok(ExitCode::SUCCESS)
}

fn fmt_rate(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.6}")
    }
}

/// The CSV report, header included.
fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut csv = String::from("snr_db,frame_success_rate,bit_error_rate\n");
    for p in points {
        let snr = p.snr_db.map_or("inf".to_string(), |s| format!("{s}"));
        csv.push_str(&format!(
            "{snr},{},{}\n",
            fmt_rate(p.report.frame_success_rate()),
            fmt_rate(p.report.bit_error_rate())
        ));
    }
    csv
}

#[derive(Serialize)]
struct SweepRow {
    snr_db: Option<f64>,
    frames: usize,
    frame_successes: usize,
    frames_lost: usize,
    spurious_frames: usize,
    bit_errors: usize,
    bits_compared: usize,
    frame_success_rate: f64,
    bit_error_rate: Option<f64>,
}

#[derive(Serialize)]
struct SweepReport {
    seed: u64,
    frames_per_point: u32,
    points: Vec<SweepRow>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_ber_sweep(
    snr: &[Option<f64>],
    frames: u32,
    seed: u64,
    csv: Option<&PathBuf>,
    json: bool,
    modem: &ModemArgs,
    channel: &ChannelArgs,
    rx: &ReceiverArgs,
) -> Result<ExitCode> {
    let payloads = sweep_payloads(frames as usize, seed);
    let channel = ChannelConfig {
        seed,
        ..channel.config(None)
    };
    let points = ber_sweep(snr, &payloads, &channel, &modem.config()?, &rx.config())?;
    let table = sweep_csv(&points);
    if let Some(path) = csv {
        fs::write(path, &table).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if json {
        let report = SweepReport {
            seed,
            frames_per_point: frames,
            points: points
                .iter()
                .map(|p| {
                    let ber = p.report.bit_error_rate();
                    SweepRow {
                        snr_db: p.snr_db,
                        frames: p.report.total_frames,
                        frame_successes: p.report.frame_successes,
                        frames_lost: p.report.frames_lost,
                        spurious_frames: p.report.spurious_frames,
                        bit_errors: p.report.bit_errors,
                        bits_compared: p.report.bits_compared,
                        frame_success_rate: p.report.frame_success_rate(),
                        bit_error_rate: (!ber.is_nan()).then_some(ber),
                    }
                })
                .collect(),
        };
        emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    } else if csv.is_none() {
        emit(&table)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_registry(path: Option<&PathBuf>) -> Result<ArtifactRegistry> {
    match path {
        None => Ok(ArtifactRegistry::new()),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            trace::parse_registry(&text).with_context(|| p.display().to_string())
        }
    }
}

fn cmd_replay(
    trace_path: &Path,
    registry: ArtifactRegistry,
    config: ReplayConfig,
    json: bool,
) -> Result<ExitCode> {
    let text = fs::read_to_string(trace_path)
        .with_context(|| format!("cannot read {}", trace_path.display()))?;
    let log =
        trace::replay(&text, registry, config).with_context(|| trace_path.display().to_string())?;
    if json {
        emit(&(serde_json::to_string_pretty(&trace::log_to_json(&log))? + "\n"))?;
    } else {
        emit(&trace::format_log(&log))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Encode {
            payload,
            out,
            modem,
        } => cmd_encode(*payload, out, modem),
        Command::Decode { input, rx, json } => cmd_decode(input, rx, *json),
        Command::Simulate {
            payloads,
            out,
            modem,
            channel,
            snr,
        } => cmd_simulate(payloads, out, modem, channel, *snr),
        Command::BerSweep {
            snr,
            frames,
            seed,
            csv,
            json,
            modem,
            channel,
            rx,
        } => cmd_ber_sweep(snr, *frames, *seed, csv.as_ref(), *json, modem, channel, rx),
        Command::Replay {
            trace,
            registry,
            json,
            enter_after,
            exit_after_ms,
            alpha,
            path_loss_exponent,
            immediate_m,
            near_m,
        } => {
            if !(immediate_m > &0.0 && immediate_m < near_m) {
                bail!("zone boundaries must satisfy 0 < immediate-m < near-m");
            }
            let config = ReplayConfig {
                monitor: MonitorConfig {
                    enter_after: *enter_after,
                    exit_after_ms: *exit_after_ms,
                },
                smoothing_alpha: *alpha,
                path_loss: PathLossModel::new(*path_loss_exponent)?,
                zones: ZoneThresholds {
                    immediate_m: *immediate_m,
                    near_m: *near_m,
                },
            };
            cmd_replay(trace, load_registry(registry.as_ref())?, config, *json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
