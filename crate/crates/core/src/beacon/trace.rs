//! Beacon trace replay: NDJSON trace and registry files, and the event log.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::receiver::DecodedFrame;

use super::{
    parse_eddystone_uid, ArtifactRegistry, BeaconError, BeaconId, BeaconReading, FusionEvent,
    FusionSession, LocalizationFix, MonitorConfig, MonitorInput, PathLossModel, RegionEvent,
    RegionEventKind, RegionMonitor, RssiSmoother, ZoneThresholds,
};

/// Transmit power assumed when a trace record does not carry one.
pub const DEFAULT_TX_POWER: i8 = -59;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: timestamp {got} ms is earlier than {previous} ms")]
    NonMonotonic {
        line: usize,
        previous: u64,
        got: u64,
    },
    #[error("registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Reading(BeaconReading),
    Frame {
        timestamp_ms: u64,
        frame: DecodedFrame,
    },
    /// A clock advance: an explicit tick or a non-UID advertisement.
    Tick(u64),
}

impl TraceRecord {
    pub fn timestamp_ms(&self) -> u64 {
        match self {
            TraceRecord::Reading(r) => r.timestamp_ms,
            TraceRecord::Frame { timestamp_ms, .. } => *timestamp_ms,
            TraceRecord::Tick(t) => *t,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    timestamp_ms: u64,
    namespace: Option<String>,
    instance: Option<String>,
    rssi: Option<f64>,
    tx_power: Option<i8>,
    eddystone: Option<String>,
    hbc_payload: Option<String>,
    crc_ok: Option<bool>,
}

fn decode_hex<const N: usize>(field: &str, s: &str) -> Result<[u8; N], String> {
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out)
        .map_err(|e| format!("{field}: expected {} hex digits: {e}", 2 * N))?;
    Ok(out)
}

/// Parses `"0x07"` or `"07"`.
pub fn parse_payload_hex(s: &str) -> Result<u8, String> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    if digits.is_empty() || digits.len() > 2 {
        return Err(format!("bad payload {s:?}: expected one hex byte"));
    }
    u8::from_str_radix(digits, 16).map_err(|_| format!("bad payload {s:?}: expected one hex byte"))
}

fn reading(beacon: BeaconId, rssi: Option<f64>, t: u64) -> Result<TraceRecord, String> {
    let rssi = rssi.ok_or("missing rssi")?;
    BeaconReading::new(beacon, rssi, t)
        .map(TraceRecord::Reading)
        .map_err(|e| e.to_string())
}

fn from_raw(raw: RawRecord) -> Result<TraceRecord, String> {
    let t = raw.timestamp_ms;
    match (&raw.namespace, &raw.instance, &raw.eddystone, &raw.hbc_payload) {
        (Some(ns), Some(inst), None, None) => {
            let beacon = BeaconId::new(
                decode_hex("namespace", ns)?,
                decode_hex("instance", inst)?,
                raw.tx_power.unwrap_or(DEFAULT_TX_POWER),
            );
            reading(beacon, raw.rssi, t)
        }
        (None, None, Some(frame), None) => {
            if raw.tx_power.is_some() {
                return Err("tx_power comes from the eddystone frame".into());
            }
            let bytes = hex::decode(frame).map_err(|e| format!("eddystone: {e}"))?;
            match parse_eddystone_uid(&bytes) {
                Ok(beacon) => reading(beacon, raw.rssi, t),
                Err(BeaconError::NotUidFrame(_)) => Ok(TraceRecord::Tick(t)),
                Err(e) => Err(e.to_string()),
            }
        }
        (None, None, None, Some(payload)) => {
            if raw.rssi.is_some() || raw.tx_power.is_some() {
                return Err("hbc records carry no rssi".into());
            }
            Ok(TraceRecord::Frame {
                timestamp_ms: t,
                frame: DecodedFrame {
                    payload: parse_payload_hex(payload)?,
                    start_ms: 0,
                    crc_ok: raw.crc_ok.unwrap_or(true),
                },
            })
        }
        (None, None, None, None) => {
            if raw.rssi.is_some() || raw.tx_power.is_some() || raw.crc_ok.is_some() {
                return Err("tick records carry only timestamp_ms".into());
            }
            Ok(TraceRecord::Tick(t))
        }
        _ => Err(
            "record must be exactly one of: namespace+instance, eddystone, hbc_payload, or a bare timestamp"
                .into(),
        ),
    }
}

/// Parses one trace line.
pub fn parse_record(line: &str) -> Result<TraceRecord, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    from_raw(raw)
}

/// Parses a whole trace, returning each record with its 1-based line number.
///
/// Blank lines and lines starting with `#` are skipped. Timestamps must not
/// decrease.
pub fn parse_trace(text: &str) -> Result<Vec<(usize, TraceRecord)>, TraceError> {
    let mut out: Vec<(usize, TraceRecord)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record = parse_record(trimmed).map_err(|message| TraceError::Line {
            line: line_no,
            message,
        })?;
        if let Some((_, prev)) = out.last() {
            if record.timestamp_ms() < prev.timestamp_ms() {
                return Err(TraceError::NonMonotonic {
                    line: line_no,
                    previous: prev.timestamp_ms(),
                    got: record.timestamp_ms(),
                });
            }
        }
        out.push((line_no, record));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    artifacts: Vec<RawArtifact>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArtifact {
    namespace: String,
    instance: String,
    artifact_id: String,
    description: String,
}

pub fn parse_registry(text: &str) -> Result<ArtifactRegistry, TraceError> {
    let raw: RawRegistry =
        serde_json::from_str(text).map_err(|e| TraceError::Registry(e.to_string()))?;
    let mut registry = ArtifactRegistry::new();
    for (i, a) in raw.artifacts.into_iter().enumerate() {
        let entry = |e: String| TraceError::Registry(format!("artifact {i}: {e}"));
        let region = BeaconId::new(
            decode_hex("namespace", &a.namespace).map_err(entry)?,
            decode_hex("instance", &a.instance).map_err(entry)?,
            DEFAULT_TX_POWER,
        );
        let id = parse_payload_hex(&a.artifact_id).map_err(entry)?;
        if registry.get(&region, id).is_some() {
            return Err(entry(format!("duplicate artifact {}", a.artifact_id)));
        }
        registry.insert(region, id, a.description);
    }
    Ok(registry)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    pub monitor: MonitorConfig,
    pub smoothing_alpha: f64,
    pub path_loss: PathLossModel,
    pub zones: ZoneThresholds,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            monitor: MonitorConfig::default(),
            smoothing_alpha: 0.5,
            path_loss: PathLossModel::default(),
            zones: ZoneThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Region(RegionEvent),
    Fix(LocalizationFix),
}

impl LogEntry {
    pub fn timestamp_ms(&self) -> u64 {
        match self {
            LogEntry::Region(e) => e.timestamp_ms,
            LogEntry::Fix(f) => f.timestamp_ms,
        }
    }
}

/// Monitoring, ranging and fusion wired together for one trace.
///
/// Per record: the monitor steps first (its region events are fused and
/// logged), then a reading is smoothed, ranged and classified, and the zone
/// fused; a frame is fused last. An Exit resets the beacon's smoother.
#[derive(Debug, Clone)]
pub struct Replayer {
    config: ReplayConfig,
    monitor: RegionMonitor,
    smoother: RssiSmoother,
    session: FusionSession,
}

impl Replayer {
    pub fn new(registry: ArtifactRegistry, config: ReplayConfig) -> Result<Self, BeaconError> {
        Ok(Replayer {
            config,
            monitor: RegionMonitor::new(config.monitor),
            smoother: RssiSmoother::new(config.smoothing_alpha)?,
            session: FusionSession::new(registry),
        })
    }

    pub fn session(&self) -> &FusionSession {
        &self.session
    }

    pub fn step(&mut self, record: &TraceRecord) -> Result<Vec<LogEntry>, BeaconError> {
        let input = match record {
            TraceRecord::Reading(r) => MonitorInput::Reading(*r),
            other => MonitorInput::Tick(other.timestamp_ms()),
        };
        let mut log = Vec::new();
        for ev in self.monitor.step(input)? {
            if ev.kind == RegionEventKind::Exit {
                self.smoother.reset(&ev.beacon);
            }
            self.session.fuse(FusionEvent::Region(ev));
            log.push(LogEntry::Region(ev));
        }
        match record {
            TraceRecord::Reading(r) => {
                let smoothed = self.smoother.smooth(r);
                let distance = self
                    .config
                    .path_loss
                    .distance(smoothed, r.beacon.tx_power_1m as f64);
                let zone = self.config.zones.classify(Some(distance));
                self.session.fuse(FusionEvent::Zone {
                    beacon: r.beacon,
                    zone,
                    timestamp_ms: r.timestamp_ms,
                });
            }
            TraceRecord::Frame {
                timestamp_ms,
                frame,
            } => {
                if let Some(fix) = self.session.fuse(FusionEvent::Frame {
                    frame: *frame,
                    timestamp_ms: *timestamp_ms,
                }) {
                    log.push(LogEntry::Fix(fix));
                }
            }
            TraceRecord::Tick(_) => {}
        }
        Ok(log)
    }
}

/// Parses and replays a whole trace.
pub fn replay(
    trace: &str,
    registry: ArtifactRegistry,
    config: ReplayConfig,
) -> Result<Vec<LogEntry>, TraceError> {
    let records = parse_trace(trace)?;
    let mut replayer = Replayer::new(registry, config).map_err(|e| TraceError::Line {
        line: 0,
        message: e.to_string(),
    })?;
    let mut log = Vec::new();
    for (line, record) in &records {
        let entries = replayer.step(record).map_err(|e| TraceError::Line {
            line: *line,
            message: e.to_string(),
        })?;
        log.extend(entries);
    }
    Ok(log)
}

/// One line per entry:
///
/// ```text
/// 2000 ENTER <namespace>/<instance>
/// 5000 FIX <namespace>/<instance> artifact=0x07 zone=near "Bronze statue"
/// 9000 FIX <namespace>/<instance> artifact=0x42 zone=immediate unregistered
/// 21000 EXIT <namespace>/<instance>
/// ```
pub fn format_log(entries: &[LogEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        match entry {
            LogEntry::Region(e) => {
                let kind = match e.kind {
                    RegionEventKind::Enter => "ENTER",
                    RegionEventKind::Exit => "EXIT",
                };
                let _ = writeln!(out, "{} {} {}", e.timestamp_ms, kind, e.beacon);
            }
            LogEntry::Fix(f) => {
                let what = match &f.description {
                    Some(d) => serde_json::to_string(d).expect("strings serialize"),
                    None => "unregistered".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{} FIX {} artifact=0x{:02x} zone={} {}",
                    f.timestamp_ms, f.region, f.artifact_id, f.zone, what
                );
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct JsonEntry<'a> {
    timestamp_ms: u64,
    event: &'static str,
    namespace: String,
    instance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    artifact_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zone: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    registered: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
}

/// The log as a JSON array.
pub fn log_to_json(entries: &[LogEntry]) -> serde_json::Value {
    let rows: Vec<JsonEntry> = entries
        .iter()
        .map(|entry| match entry {
            LogEntry::Region(e) => JsonEntry {
                timestamp_ms: e.timestamp_ms,
                event: match e.kind {
                    RegionEventKind::Enter => "enter",
                    RegionEventKind::Exit => "exit",
                },
                namespace: e.beacon.namespace_hex(),
                instance: e.beacon.instance_hex(),
                artifact_id: None,
                zone: None,
                registered: None,
                description: None,
            },
            LogEntry::Fix(f) => JsonEntry {
                timestamp_ms: f.timestamp_ms,
                event: "fix",
                namespace: f.region.namespace_hex(),
                instance: f.region.instance_hex(),
                artifact_id: Some(format!("0x{:02x}", f.artifact_id)),
                zone: Some(f.zone.as_str()),
                registered: Some(f.registered),
                description: f.description.as_deref(),
            },
        })
        .collect();
    serde_json::to_value(rows).expect("log serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: &str = "00112233445566778899";
    const INST: &str = "000000000001";

    fn reading_line(t: u64, rssi: f64) -> String {
        format!(r#"{{"timestamp_ms":{t},"namespace":"{NS}","instance":"{INST}","rssi":{rssi}}}"#)
    }

    #[test]
    fn record_kinds() {
        let r = parse_record(&reading_line(5, -60.0)).unwrap();
        let TraceRecord::Reading(r) = r else { panic!() };
        assert_eq!(r.beacon.tx_power_1m, DEFAULT_TX_POWER);
        assert_eq!(r.beacon.instance_hex(), INST);

        let f = parse_record(r#"{"timestamp_ms":9,"hbc_payload":"0x07"}"#).unwrap();
        assert!(
            matches!(f, TraceRecord::Frame { frame, .. } if frame.payload == 7 && frame.crc_ok)
        );

        assert_eq!(
            parse_record(r#"{"timestamp_ms":3}"#).unwrap(),
            TraceRecord::Tick(3)
        );

        let url = r#"{"timestamp_ms":4,"eddystone":"10c5","rssi":-50}"#;
        assert_eq!(parse_record(url).unwrap(), TraceRecord::Tick(4));

        let uid = format!(r#"{{"timestamp_ms":4,"eddystone":"00c5{NS}{INST}0000","rssi":-50}}"#);
        assert!(matches!(
            parse_record(&uid).unwrap(),
            TraceRecord::Reading(_)
        ));
    }

    #[test]
    fn rejects_malformed_records() {
        assert!(
            parse_record(r#"{"timestamp_ms":1,"namespace":"00","instance":"01","rssi":-50}"#)
                .is_err()
        );
        assert!(parse_record(r#"{"timestamp_ms":1,"hbc_payload":"0x107"}"#).is_err());
        assert!(parse_record(r#"{"timestamp_ms":1,"colour":"red"}"#).is_err());
        assert!(parse_record(&reading_line(1, 5.0)).is_err());
    }

    #[test]
    fn decreasing_time_names_the_line() {
        let text = format!(
            "{}\n\n{}\n",
            reading_line(10, -60.0),
            reading_line(9, -60.0)
        );
        match parse_trace(&text) {
            Err(TraceError::NonMonotonic { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn registry_round_trip() {
        let text = format!(
            r#"{{"artifacts":[{{"namespace":"{NS}","instance":"{INST}","artifact_id":"0x07","description":"Vase"}}]}}"#
        );
        let reg = parse_registry(&text).unwrap();
        let id = BeaconId::new(
            decode_hex("n", NS).unwrap(),
            decode_hex("i", INST).unwrap(),
            -40,
        );
        assert_eq!(reg.get(&id, 7), Some("Vase"));
    }

    #[test]
    fn short_visit_log() {
        let text = format!(
            "{}\n{}\n{}\n{}\n{}\n",
            reading_line(0, -55.0),
            reading_line(1000, -55.0),
            reading_line(2000, -55.0),
            r#"{"timestamp_ms":2500,"hbc_payload":"0x07"}"#,
            r#"{"timestamp_ms":12000}"#,
        );
        let log = replay(&text, ArtifactRegistry::new(), ReplayConfig::default()).unwrap();
        let expected = format!(
            "2000 ENTER {NS}/{INST}\n2500 FIX {NS}/{INST} artifact=0x07 zone=near unregistered\n12000 EXIT {NS}/{INST}\n"
        );
        assert_eq!(format_log(&log), expected);
    }
}
