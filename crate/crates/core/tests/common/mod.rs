//! Reference implementations written independently of the library, for
//! differential testing. Deliberately naive.

#![allow(dead_code)]

use hbc_core::beacon::{BeaconId, BeaconReading, MonitorInput};
use hbc_core::dsp::SampleBuffer;
use hbc_core::framing::{encode_frame, BitStream};
use hbc_core::modem::{modulate, ModemConfig};

/// CRC-8/DARC by polynomial long division over GF(2).
///
/// Reflected input: each byte enters least-significant bit first. The message
/// polynomial is multiplied by x^8 and divided by x^8 + x^5 + x^4 + x^3 + 1;
/// the remainder, reflected, is the checksum.
pub fn crc8_long_division(data: &[u8]) -> u8 {
    let generator = [true, false, false, true, true, true, false, false, true]; // x^8 .. x^0
    let mut dividend: Vec<bool> = data
        .iter()
        .flat_map(|&b| (0..8).map(move |i| (b >> i) & 1 == 1))
        .collect();
    dividend.extend([false; 8]);
    for i in 0..dividend.len() - 8 {
        if dividend[i] {
            for (j, &g) in generator.iter().enumerate() {
                dividend[i + j] ^= g;
            }
        }
    }
    // remainder coefficients x^7 .. x^0; reflected output puts x^7 in bit 0
    dividend[dividend.len() - 8..]
        .iter()
        .enumerate()
        .fold(0u8, |acc, (i, &bit)| acc | ((bit as u8) << i))
}

/// Per-millisecond OR of the three probe samples, straight from the definition.
pub fn decimate_brute_force(binary: &[f64], sample_rate: f64, offsets: [f64; 3]) -> Vec<f64> {
    let duration_ms = binary.len() as f64 * 1000.0 / sample_rate;
    let mut out = Vec::new();
    let mut ms = 0usize;
    while (ms + 1) as f64 <= duration_ms {
        let mut any = false;
        for off in offsets {
            let t_ms = ms as f64 + off;
            let nearest = (t_ms / 1000.0 * sample_rate).round() as usize;
            if binary[nearest.min(binary.len() - 1)] != 0.0 {
                any = true;
            }
        }
        out.push(if any { 1.0 } else { 0.0 });
        ms += 1;
    }
    out
}

/// Moving average by direct summation of each window.
pub fn envelope_direct(x: &[f64], window: usize, hop: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= x.len() {
        out.push(x[start..start + window].iter().sum::<f64>() / window as f64);
        start += hop;
    }
    out
}

/// Steady-state gain at `freq` of the filter, measured by driving it with a
/// unit sine and fitting the output amplitude.
pub fn measured_gain(apply: impl Fn(&SampleBuffer) -> SampleBuffer, freq: f64, rate: f64) -> f64 {
    let n = (rate as usize) / 2;
    let w = 2.0 * std::f64::consts::PI * freq / rate;
    let x = SampleBuffer::new((0..n).map(|i| (w * i as f64).sin()).collect(), rate).unwrap();
    let y = apply(&x);
    // project the settled half onto sin/cos
    let (mut s, mut c) = (0.0, 0.0);
    let settled = &y.samples()[n / 2..];
    for (k, v) in settled.iter().enumerate() {
        let phase = w * (k + n / 2) as f64;
        s += v * phase.sin();
        c += v * phase.cos();
    }
    2.0 * s.hypot(c) / settled.len() as f64
}

/// Modulated frames for `payloads`, each surrounded by `guard_bits` of silence.
pub fn frames_signal(payloads: &[u8], guard_bits: usize) -> SampleBuffer {
    let mut bits = BitStream::new();
    for &p in payloads {
        (0..guard_bits).for_each(|_| bits.push(false));
        bits.extend_from(&encode_frame(p));
        (0..guard_bits).for_each(|_| bits.push(false));
    }
    modulate(&bits, &ModemConfig::default()).unwrap()
}

/// Splits `len` samples into random chunk lengths, including empty chunks.
pub fn random_chunking(rng: &mut impl rand::Rng, len: usize) -> Vec<usize> {
    let mut cuts = Vec::new();
    let mut done = 0;
    while done < len {
        let n = match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(1..16),
            2 => rng.random_range(16..2000),
            _ => rng.random_range(2000..40000),
        }
        .min(len - done);
        cuts.push(n);
        done += n;
    }
    cuts
}

pub mod fusion_model {
    use hbc_core::beacon::{
        ArtifactRegistry, BeaconId, FusionEvent, FusionSession, RegionEvent, RegionEventKind, Zone,
    };
    use hbc_core::receiver::DecodedFrame;

    pub fn region(n: u8) -> BeaconId {
        BeaconId::new([0xAB; 10], [0, 0, 0, 0, 0, n], -59)
    }

    /// The alphabet of the exhaustive search. Region events are only applied
    /// when legal for the model (enter when outside, exit when inside), as a
    /// monitor would produce them.
    #[derive(Clone, Copy, Debug)]
    pub enum Symbol {
        EnterA,
        ExitA,
        ZoneAImmediate,
        ZoneAFar,
        EnterB,
        ZoneBNear,
        Frame,
    }

    pub const ALPHABET: [Symbol; 7] = [
        Symbol::EnterA,
        Symbol::ExitA,
        Symbol::ZoneAImmediate,
        Symbol::ZoneAFar,
        Symbol::EnterB,
        Symbol::ZoneBNear,
        Symbol::Frame,
    ];

    /// What the fuser should know: which regions are entered and their latest
    /// zone estimate (forgotten on exit).
    #[derive(Clone, Default)]
    struct Model {
        inside: [bool; 2],
        zone: [Option<Zone>; 2],
    }

    impl Model {
        fn may_fix(&self) -> bool {
            (0..2).any(|i| {
                self.inside[i] && matches!(self.zone[i], Some(Zone::Immediate | Zone::Near))
            })
        }
    }

    fn region_event(kind: RegionEventKind, n: u8, t: u64) -> FusionEvent {
        FusionEvent::Region(RegionEvent {
            kind,
            beacon: region(n),
            timestamp_ms: t,
        })
    }

    /// Depth-first search over every sequence up to `depth`. Returns the
    /// number of sequences visited and the number of fixes observed; panics
    /// with the offending sequence on any violation.
    pub fn exhaustive(depth: usize) -> (u64, u64) {
        let mut registry = ArtifactRegistry::new();
        registry.insert(region(0), 0x07, "a");
        let session = FusionSession::new(registry);
        let mut counts = (0, 0);
        walk(
            &session,
            &Model::default(),
            &mut Vec::new(),
            depth,
            &mut counts,
        );
        counts
    }

    fn walk(
        session: &FusionSession,
        model: &Model,
        path: &mut Vec<Symbol>,
        depth: usize,
        counts: &mut (u64, u64),
    ) {
        counts.0 += 1;
        if path.len() == depth {
            return;
        }
        let t = path.len() as u64 * 100;
        for sym in ALPHABET {
            let mut s = session.clone();
            let mut m = model.clone();
            let event = match sym {
                Symbol::EnterA if !m.inside[0] => {
                    m.inside[0] = true;
                    region_event(RegionEventKind::Enter, 0, t)
                }
                Symbol::ExitA if m.inside[0] => {
                    m.inside[0] = false;
                    m.zone[0] = None;
                    region_event(RegionEventKind::Exit, 0, t)
                }
                Symbol::EnterB if !m.inside[1] => {
                    m.inside[1] = true;
                    region_event(RegionEventKind::Enter, 1, t)
                }
                Symbol::EnterA | Symbol::ExitA | Symbol::EnterB => continue,
                Symbol::ZoneAImmediate | Symbol::ZoneAFar | Symbol::ZoneBNear => {
                    let (i, zone) = match sym {
                        Symbol::ZoneAImmediate => (0, Zone::Immediate),
                        Symbol::ZoneAFar => (0, Zone::Far),
                        _ => (1, Zone::Near),
                    };
                    m.zone[i] = Some(zone);
                    FusionEvent::Zone {
                        beacon: region(i as u8),
                        zone,
                        timestamp_ms: t,
                    }
                }
                Symbol::Frame => FusionEvent::Frame {
                    frame: DecodedFrame {
                        payload: 0x07,
                        start_ms: t,
                        crc_ok: true,
                    },
                    timestamp_ms: t,
                },
            };
            path.push(sym);
            let fix = s.fuse(event);
            match (&fix, matches!(sym, Symbol::Frame), m.may_fix()) {
                (Some(fix), true, true) => {
                    counts.1 += 1;
                    let i = fix.region.instance[5] as usize;
                    assert!(m.inside[i], "fix from a region not entered: {path:?}");
                    assert!(
                        matches!(m.zone[i], Some(Zone::Immediate | Zone::Near)),
                        "fix from a far region: {path:?}"
                    );
                    assert_eq!(fix.zone, m.zone[i].unwrap(), "{path:?}");
                    let closest = (0..2)
                        .filter(|&j| m.inside[j])
                        .filter_map(|j| m.zone[j])
                        .min()
                        .unwrap();
                    assert_eq!(fix.zone, closest, "closest region must win: {path:?}");
                    assert_eq!(fix.registered, i == 0, "{path:?}");
                }
                (None, true, false) | (None, false, _) => {}
                (got, _, expected) => {
                    panic!("expected fix={expected}, got {got:?} after {path:?}")
                }
            }
            walk(&s, &m, path, depth, counts);
            path.pop();
        }
    }
}

/// Random interleaving of readings from three beacons and clock ticks.
pub fn random_trace(rng: &mut impl rand::Rng, len: usize) -> Vec<MonitorInput> {
    let mut t = 0u64;
    (0..len)
        .map(|_| {
            t += match rng.random_range(0..4) {
                0 => 0,
                1 => rng.random_range(1..2000),
                2 => rng.random_range(2000..9000),
                _ => rng.random_range(9000..15000),
            };
            if rng.random_bool(0.7) {
                let b = BeaconId::new([0xED; 10], [0, 0, 0, 0, 0, rng.random_range(0..3)], -59);
                MonitorInput::Reading(BeaconReading::new(b, -60.0, t).unwrap())
            } else {
                MonitorInput::Tick(t)
            }
        })
        .collect()
}
