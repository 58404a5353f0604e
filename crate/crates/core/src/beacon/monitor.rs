use std::collections::BTreeMap;

use serde::Serialize;

use super::{BeaconError, BeaconId, BeaconReading};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorConfig {
    /// Consecutive readings needed to enter a region.
    pub enter_after: u32,
    /// Silence after which an entered region is left.
    pub exit_after_ms: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            enter_after: 3,
            exit_after_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionEventKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionEvent {
    pub kind: RegionEventKind,
    pub beacon: BeaconId,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonitorInput {
    Reading(BeaconReading),
    /// Clock advance with no reading.
    Tick(u64),
}

impl MonitorInput {
    pub fn timestamp_ms(&self) -> u64 {
        match self {
            MonitorInput::Reading(r) => r.timestamp_ms,
            MonitorInput::Tick(t) => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Track {
    consecutive: u32,
    last_seen: u64,
    entered: bool,
}

/// Debounced region Enter/Exit detection, one region per beacon.
///
/// A beacon's region is entered on the `enter_after`-th reading of a run in
/// which no two readings are `exit_after_ms` or more apart. An entered region
/// is left once any input arrives `exit_after_ms` or more after its last
/// reading. Enter and Exit therefore strictly alternate per beacon.
#[derive(Debug, Clone, Default)]
pub struct RegionMonitor {
    config: MonitorConfig,
    tracks: BTreeMap<BeaconId, Track>,
    clock: Option<u64>,
}

impl RegionMonitor {
    pub fn new(config: MonitorConfig) -> Self {
        RegionMonitor {
            config,
            tracks: BTreeMap::new(),
            clock: None,
        }
    }

    pub fn is_entered(&self, beacon: &BeaconId) -> bool {
        self.tracks.get(beacon).is_some_and(|t| t.entered)
    }

    /// Advances the monitor. Exits come first (in beacon order), then at most
    /// one Enter for the reading's own beacon.
    pub fn step(&mut self, input: MonitorInput) -> Result<Vec<RegionEvent>, BeaconError> {
        let now = input.timestamp_ms();
        if let Some(previous) = self.clock {
            if now < previous {
                return Err(BeaconError::NonMonotonicTime { previous, got: now });
            }
        }
        self.clock = Some(now);

        let mut events = Vec::new();
        let timeout = self.config.exit_after_ms;
        for (beacon, track) in self.tracks.iter_mut() {
            if track.entered && now - track.last_seen >= timeout {
                track.entered = false;
                track.consecutive = 0;
                events.push(RegionEvent {
                    kind: RegionEventKind::Exit,
                    beacon: *beacon,
                    timestamp_ms: now,
                });
            }
        }

        if let MonitorInput::Reading(reading) = input {
            let track = self.tracks.entry(reading.beacon).or_default();
            if track.consecutive > 0 && now - track.last_seen >= timeout {
                track.consecutive = 0;
            }
            track.consecutive = track.consecutive.saturating_add(1);
            track.last_seen = now;
            if !track.entered && track.consecutive >= self.config.enter_after {
                track.entered = true;
                events.push(RegionEvent {
                    kind: RegionEventKind::Enter,
                    beacon: reading.beacon,
                    timestamp_ms: now,
                });
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beacon(n: u8) -> BeaconId {
        BeaconId::new([n; 10], [n; 6], -59)
    }

    fn reading(n: u8, t: u64) -> MonitorInput {
        MonitorInput::Reading(BeaconReading::new(beacon(n), -60.0, t).unwrap())
    }

    #[test]
    fn enter_on_third_reading() {
        let mut m = RegionMonitor::default();
        assert!(m.step(reading(1, 0)).unwrap().is_empty());
        assert!(m.step(reading(1, 1000)).unwrap().is_empty());
        let ev = m.step(reading(1, 2000)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, RegionEventKind::Enter);
        assert_eq!(ev[0].timestamp_ms, 2000);
        assert!(m.step(reading(1, 3000)).unwrap().is_empty());
    }

    #[test]
    fn exit_after_silence() {
        let mut m = RegionMonitor::default();
        for t in [0, 1000, 2000] {
            m.step(reading(1, t)).unwrap();
        }
        assert!(m.step(MonitorInput::Tick(11_999)).unwrap().is_empty());
        let ev = m.step(MonitorInput::Tick(12_000)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, RegionEventKind::Exit);
        assert!(!m.is_entered(&beacon(1)));
    }

    #[test]
    fn below_threshold_never_fires() {
        let mut m = RegionMonitor::default();
        m.step(reading(1, 0)).unwrap();
        m.step(reading(1, 1000)).unwrap();
        for t in (2000..=30_000).step_by(1000) {
            assert!(m.step(MonitorInput::Tick(t)).unwrap().is_empty());
        }
        // the stale run does not count towards a new one
        assert!(m.step(reading(1, 31_000)).unwrap().is_empty());
    }

    #[test]
    fn time_must_not_go_back() {
        let mut m = RegionMonitor::default();
        m.step(reading(1, 500)).unwrap();
        assert_eq!(
            m.step(MonitorInput::Tick(499)),
            Err(BeaconError::NonMonotonicTime {
                previous: 500,
                got: 499
            })
        );
    }

    #[test]
    fn other_beacons_do_not_interrupt_a_run() {
        let mut m = RegionMonitor::default();
        m.step(reading(1, 0)).unwrap();
        m.step(reading(2, 100)).unwrap();
        m.step(reading(1, 200)).unwrap();
        m.step(reading(2, 300)).unwrap();
        let ev = m.step(reading(1, 400)).unwrap();
        assert_eq!(ev[0].beacon, beacon(1));
    }
}
