use std::collections::VecDeque;

use crate::framing::FRAME_BITS;

use super::DecodedFrame;

/// A sync hit at symbol offset `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Candidate {
    pub start: u64,
    pub payload: u8,
    pub crc_ok: bool,
}

/// Turns the raw per-offset sync hits into a frame sequence.
///
/// * The earliest CRC-valid hit opens a cluster of valid hits less than one
///   bit period later (the same frame read at neighbouring grid phases). The
///   cluster's median is reported and everything starting within its 32-bit
///   span is discarded.
/// * With `report_invalid`, a CRC-failing hit is reported only when no valid
///   hit overlaps its span; invalid hits are clustered the same way.
///
/// Candidates must be offered in increasing `start` order. A decision is only
/// taken once every candidate it depends on has been offered, so the output is
/// independent of how the offers were batched.
pub(crate) struct Resolver {
    symbols_per_bit: u64,
    report_invalid: bool,
    pending: VecDeque<Candidate>,
    recent_valid: VecDeque<u64>,
    skip_all_until: u64,
    skip_invalid_until: u64,
}

impl Resolver {
    pub(crate) fn new(symbols_per_bit: u64, report_invalid: bool) -> Self {
        Resolver {
            symbols_per_bit,
            report_invalid,
            pending: VecDeque::new(),
            recent_valid: VecDeque::new(),
            skip_all_until: 0,
            skip_invalid_until: 0,
        }
    }

    fn frame_len(&self) -> u64 {
        FRAME_BITS as u64 * self.symbols_per_bit
    }

    /// Frames starting closer than this after an accepted one are the same
    /// transmission; half a bit of slack absorbs the grid-phase jitter.
    fn skip_span(&self) -> u64 {
        self.frame_len() - self.symbols_per_bit / 2
    }

    pub(crate) fn offer(&mut self, c: Candidate) {
        if c.crc_ok {
            self.recent_valid.push_back(c.start);
        }
        if c.start < self.skip_all_until {
            return;
        }
        if !c.crc_ok && (!self.report_invalid || c.start < self.skip_invalid_until) {
            return;
        }
        self.pending.push_back(c);
    }

    /// Emits every decision that is final once all candidates starting before
    /// `known` have been offered.
    pub(crate) fn drain(&mut self, known: u64, finished: bool, out: &mut Vec<DecodedFrame>) {
        let spb = self.symbols_per_bit;
        while let Some(&first) = self.pending.front() {
            if first.crc_ok {
                if !finished && first.start + spb > known {
                    break;
                }
                let cluster: Vec<Candidate> = self
                    .pending
                    .iter()
                    .take_while(|c| c.start < first.start + spb)
                    .filter(|c| c.crc_ok)
                    .copied()
                    .collect();
                let chosen = cluster[(cluster.len() - 1) / 2];
                out.push(DecodedFrame {
                    payload: chosen.payload,
                    start_ms: chosen.start,
                    crc_ok: true,
                });
                self.skip_all_until = chosen.start + self.skip_span();
                while self
                    .pending
                    .front()
                    .is_some_and(|c| c.start < self.skip_all_until)
                {
                    self.pending.pop_front();
                }
            } else {
                let frame = self.frame_len();
                if !finished && first.start + frame > known {
                    break;
                }
                while self
                    .recent_valid
                    .front()
                    .is_some_and(|&v| v + frame <= first.start)
                {
                    self.recent_valid.pop_front();
                }
                let overlaps_valid = |start: u64, valid: &VecDeque<u64>| {
                    valid
                        .iter()
                        .any(|&v| v + frame > start && v < start + frame)
                };
                if overlaps_valid(first.start, &self.recent_valid) {
                    self.pending.pop_front();
                    continue;
                }
                let cluster: Vec<Candidate> = self
                    .pending
                    .iter()
                    .take_while(|c| c.start < first.start + spb)
                    .filter(|c| !c.crc_ok && !overlaps_valid(c.start, &self.recent_valid))
                    .copied()
                    .collect();
                let chosen = cluster[(cluster.len() - 1) / 2];
                out.push(DecodedFrame {
                    payload: chosen.payload,
                    start_ms: chosen.start,
                    crc_ok: false,
                });
                self.skip_invalid_until = chosen.start + self.skip_span();
                let until = self.skip_invalid_until;
                self.pending.retain(|c| c.crc_ok || c.start >= until);
            }
        }
    }
}
