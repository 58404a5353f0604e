use std::collections::{BTreeMap, HashMap};

use crate::receiver::DecodedFrame;

use super::{BeaconId, RegionEvent, RegionEventKind, Zone};

/// Descriptions of the artifacts reachable from each region.
#[derive(Debug, Clone, Default)]
pub struct ArtifactRegistry {
    entries: HashMap<(BeaconId, u8), String>,
}

impl ArtifactRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: BeaconId, artifact_id: u8, description: impl Into<String>) {
        self.entries
            .insert((region, artifact_id), description.into());
    }

    pub fn get(&self, region: &BeaconId, artifact_id: u8) -> Option<&str> {
        self.entries
            .get(&(*region, artifact_id))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FusionEvent {
    /// Latest ranging result for a beacon.
    Zone {
        beacon: BeaconId,
        zone: Zone,
        timestamp_ms: u64,
    },
    Region(RegionEvent),
    Frame {
        frame: DecodedFrame,
        timestamp_ms: u64,
    },
}

/// A touched artifact bound to the region the visitor is standing in.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationFix {
    pub region: BeaconId,
    pub artifact_id: u8,
    pub timestamp_ms: u64,
    pub zone: Zone,
    pub registered: bool,
    pub description: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct RegionState {
    entered_at: Option<u64>,
    zone: Zone,
}

/// Arms the body-channel receiver while an entered region is close, and turns
/// valid frames into [`LocalizationFix`]es.
///
/// When several regions are armed at once the closest zone wins, then the most
/// recently entered region, then the lowest beacon identity.
#[derive(Debug, Clone)]
pub struct FusionSession {
    registry: ArtifactRegistry,
    regions: BTreeMap<BeaconId, RegionState>,
    unarmed_frames: usize,
    rejected_frames: usize,
}

impl FusionSession {
    pub fn new(registry: ArtifactRegistry) -> Self {
        FusionSession {
            registry,
            regions: BTreeMap::new(),
            unarmed_frames: 0,
            rejected_frames: 0,
        }
    }

    pub fn registry(&self) -> &ArtifactRegistry {
        &self.registry
    }

    /// Valid frames that arrived while no region was armed.
    pub fn unarmed_frames(&self) -> usize {
        self.unarmed_frames
    }

    /// Frames that failed their CRC.
    pub fn rejected_frames(&self) -> usize {
        self.rejected_frames
    }

    pub fn is_armed(&self) -> bool {
        self.armed_region().is_some()
    }

    fn armed_region(&self) -> Option<(BeaconId, Zone)> {
        self.regions
            .iter()
            .filter_map(|(beacon, s)| match s.entered_at {
                Some(at) if s.zone.is_close() => Some((*beacon, s.zone, at)),
                _ => None,
            })
            .min_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)))
            .map(|(beacon, zone, _)| (beacon, zone))
    }

    pub fn fuse(&mut self, event: FusionEvent) -> Option<LocalizationFix> {
        match event {
            FusionEvent::Zone { beacon, zone, .. } => {
                self.regions
                    .entry(beacon)
                    .or_insert(RegionState {
                        entered_at: None,
                        zone: Zone::Unknown,
                    })
                    .zone = zone;
                None
            }
            FusionEvent::Region(ev) => {
                let state = self.regions.entry(ev.beacon).or_insert(RegionState {
                    entered_at: None,
                    zone: Zone::Unknown,
                });
                match ev.kind {
                    RegionEventKind::Enter => state.entered_at = Some(ev.timestamp_ms),
                    RegionEventKind::Exit => {
                        state.entered_at = None;
                        state.zone = Zone::Unknown;
                    }
                }
                None
            }
            FusionEvent::Frame {
                frame,
                timestamp_ms,
            } => {
                if !frame.crc_ok {
                    self.rejected_frames += 1;
                    return None;
                }
                let Some((region, zone)) = self.armed_region() else {
                    self.unarmed_frames += 1;
                    return None;
                };
                let description = self.registry.get(&region, frame.payload).map(str::to_owned);
                Some(LocalizationFix {
                    region,
                    artifact_id: frame.payload,
                    timestamp_ms,
                    zone,
                    registered: description.is_some(),
                    description,
                })
            }
        }
    }
}
