//! BLE beacon proximity: Eddystone-UID identities, RSSI ranging, region
//! monitoring, and fusion of beacon regions with decoded artifact frames.
//!
//! Monitoring ([`RegionMonitor`]) answers "which regions am I in" with
//! debounced Enter/Exit events. Ranging is the per-reading
//! smoothed-RSSI → distance → [`Zone`] pipeline. [`FusionSession`] arms the
//! body-channel receiver only while an entered region is close enough, and
//! binds decoded artifact identifiers to that region.

mod fusion;
mod monitor;
pub mod trace;

pub use fusion::{ArtifactRegistry, FusionEvent, FusionSession, LocalizationFix};
pub use monitor::{MonitorConfig, MonitorInput, RegionEvent, RegionEventKind, RegionMonitor};

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeaconError {
    #[error("not an Eddystone-UID frame (frame type 0x{0:02X})")]
    NotUidFrame(u8),
    #[error("truncated Eddystone-UID frame: {0} bytes, need 18")]
    Truncated(usize),
    #[error("time went backwards: {got} ms after {previous} ms")]
    NonMonotonicTime { previous: u64, got: u64 },
    #[error("rssi {0} dBm outside [-120, 0]")]
    RssiOutOfRange(f64),
    #[error("path-loss exponent {0} outside [1.5, 4.0]")]
    BadExponent(f64),
    #[error("smoothing factor {0} outside (0, 1]")]
    BadAlpha(f64),
}

pub const EDDYSTONE_UID_FRAME: u8 = 0x00;
pub const EDDYSTONE_UID_LEN: usize = 18;

/// An Eddystone-UID beacon identity.
///
/// Equality, hashing and ordering use the namespace and instance only; the
/// calibrated transmit power travels along as metadata.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BeaconId {
    pub namespace: [u8; 10],
    pub instance: [u8; 6],
    /// Calibrated RSSI at 1 m, dBm.
    pub tx_power_1m: i8,
}

impl BeaconId {
    pub fn new(namespace: [u8; 10], instance: [u8; 6], tx_power_1m: i8) -> Self {
        BeaconId {
            namespace,
            instance,
            tx_power_1m,
        }
    }

    fn key(&self) -> ([u8; 10], [u8; 6]) {
        (self.namespace, self.instance)
    }

    pub fn namespace_hex(&self) -> String {
        hex::encode(self.namespace)
    }

    pub fn instance_hex(&self) -> String {
        hex::encode(self.instance)
    }
}

impl PartialEq for BeaconId {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for BeaconId {}

impl Hash for BeaconId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for BeaconId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BeaconId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for BeaconId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.namespace_hex(), self.instance_hex())
    }
}

/// Parses Eddystone-UID service data.
///
/// Layout: frame type `0x00`, calibrated transmit power (signed dBm),
/// 10-byte namespace, 6-byte instance, then reserved bytes which are ignored.
pub fn parse_eddystone_uid(frame: &[u8]) -> Result<BeaconId, BeaconError> {
    let Some(&frame_type) = frame.first() else {
        return Err(BeaconError::Truncated(0));
    };
    if frame_type != EDDYSTONE_UID_FRAME {
        return Err(BeaconError::NotUidFrame(frame_type));
    }
    if frame.len() < EDDYSTONE_UID_LEN {
        return Err(BeaconError::Truncated(frame.len()));
    }
    let mut namespace = [0u8; 10];
    namespace.copy_from_slice(&frame[2..12]);
    let mut instance = [0u8; 6];
    instance.copy_from_slice(&frame[12..18]);
    Ok(BeaconId {
        namespace,
        instance,
        tx_power_1m: frame[1] as i8,
    })
}

/// One RSSI observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconReading {
    pub beacon: BeaconId,
    pub rssi: f64,
    pub timestamp_ms: u64,
}

impl BeaconReading {
    pub fn new(beacon: BeaconId, rssi: f64, timestamp_ms: u64) -> Result<Self, BeaconError> {
        if !(-120.0..=0.0).contains(&rssi) {
            return Err(BeaconError::RssiOutOfRange(rssi));
        }
        Ok(BeaconReading {
            beacon,
            rssi,
            timestamp_ms,
        })
    }
}

/// Exponentially weighted moving average of one beacon's RSSI.
///
/// The first reading initializes the state.
pub fn smooth_rssi(state: &mut Option<f64>, rssi: f64, alpha: f64) -> f64 {
    let next = match *state {
        None => rssi,
        Some(prev) => alpha * rssi + (1.0 - alpha) * prev,
    };
    *state = Some(next);
    next
}

/// Per-beacon RSSI smoothing.
#[derive(Debug, Clone)]
pub struct RssiSmoother {
    alpha: f64,
    states: HashMap<BeaconId, f64>,
}

impl RssiSmoother {
    pub fn new(alpha: f64) -> Result<Self, BeaconError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BeaconError::BadAlpha(alpha));
        }
        Ok(RssiSmoother {
            alpha,
            states: HashMap::new(),
        })
    }

    pub fn smooth(&mut self, reading: &BeaconReading) -> f64 {
        let mut state = self.states.get(&reading.beacon).copied();
        let out = smooth_rssi(&mut state, reading.rssi, self.alpha);
        self.states.insert(reading.beacon, out);
        out
    }

    pub fn reset(&mut self, beacon: &BeaconId) {
        self.states.remove(beacon);
    }
}

/// Log-distance path-loss inversion: `10^((tx_power_1m - rssi) / (10 n))` metres.
pub fn estimate_distance(rssi: f64, tx_power_1m: f64, path_loss_exponent: f64) -> f64 {
    10f64.powf((tx_power_1m - rssi) / (10.0 * path_loss_exponent))
}

/// The forward model: RSSI expected at `distance_m`.
pub fn expected_rssi(distance_m: f64, tx_power_1m: f64, path_loss_exponent: f64) -> f64 {
    tx_power_1m - 10.0 * path_loss_exponent * distance_m.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel { exponent: 2.0 }
    }
}

impl PathLossModel {
    pub fn new(exponent: f64) -> Result<Self, BeaconError> {
        if !(1.5..=4.0).contains(&exponent) {
            return Err(BeaconError::BadExponent(exponent));
        }
        Ok(PathLossModel { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn distance(&self, rssi: f64, tx_power_1m: f64) -> f64 {
        estimate_distance(rssi, tx_power_1m, self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Immediate,
    Near,
    Far,
    Unknown,
}

impl Zone {
    /// Close enough to listen for body-channel frames.
    pub fn is_close(self) -> bool {
        matches!(self, Zone::Immediate | Zone::Near)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Immediate => "immediate",
            Zone::Near => "near",
            Zone::Far => "far",
            Zone::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open zone boundaries in metres: `[0, immediate)`, `[immediate, near)`, `[near, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneThresholds {
    pub immediate_m: f64,
    pub near_m: f64,
}

impl Default for ZoneThresholds {
    fn default() -> Self {
        ZoneThresholds {
            immediate_m: 0.5,
            near_m: 4.0,
        }
    }
}

impl ZoneThresholds {
    /// `None`, non-finite and non-positive distances are `Unknown`.
    pub fn classify(&self, distance_m: Option<f64>) -> Zone {
        match distance_m {
            Some(d) if d.is_finite() && d > 0.0 => {
                if d < self.immediate_m {
                    Zone::Immediate
                } else if d < self.near_m {
                    Zone::Near
                } else {
                    Zone::Far
                }
            }
            _ => Zone::Unknown,
        }
    }
}

/// [`ZoneThresholds::classify`] with the default boundaries.
pub fn classify_zone(distance_m: Option<f64>) -> Zone {
    ZoneThresholds::default().classify(distance_m)
}
