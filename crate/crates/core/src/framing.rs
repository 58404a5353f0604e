//! Bit-level wire frame.
//!
//! A frame is 32 bits sent MSB-first:
//!
//! | bits   | field    | value                |
//! |--------|----------|----------------------|
//! | 0..8   | preamble | `0xAA`               |
//! | 8..16  | sync     | `0x7E`               |
//! | 16..24 | payload  | artifact identifier  |
//! | 24..32 | crc      | CRC-8/DARC(payload)  |
//!
//! The preamble gives the slicer alternating transitions; the sync byte is the
//! unique word searched for by [`find_sync`].

use std::fmt;

use thiserror::Error;

pub const PREAMBLE: u8 = 0xAA;
pub const SYNC: u8 = 0x7E;
/// Total frame length in bits.
pub const FRAME_BITS: usize = 32;
/// Length of the preamble + sync marker in bits.
pub const MARKER_BITS: usize = 16;

/// CRC-8/DARC polynomial x^8 + x^5 + x^4 + x^3 + 1, normal form.
pub const DARC_POLY: u8 = 0x39;
/// The same polynomial with its bits reversed, for the LSB-first (reflected) register.
const DARC_POLY_REFLECTED: u8 = 0x9C;

const fn make_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ DARC_POLY_REFLECTED
            } else {
                crc >> 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC_TABLE: [u8; 256] = make_table();

/// CRC-8/DARC: poly 0x39, init 0x00, reflected input and output, xorout 0x00.
///
/// Check value for `b"123456789"` is `0x15`.
pub fn crc8_darc(data: &[u8]) -> u8 {
    data.iter()
        .fold(0u8, |crc, &byte| CRC_TABLE[(crc ^ byte) as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error(
        "crc mismatch: payload 0x{payload:02X} expects 0x{expected:02X}, received 0x{received:02X}"
    )]
    CrcMismatch {
        payload: u8,
        expected: u8,
        received: u8,
    },
    #[error("truncated frame: need {needed} bits after offset, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("bit value {0} is neither 0 nor 1")]
    InvalidBit(u8),
}

/// An ordered sequence of binary symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitStream(Vec<bool>);

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a stream from `0`/`1` values.
    pub fn from_bits(bits: &[u8]) -> Result<Self, FrameError> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(FrameError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitStream)
    }

    /// Appends the eight bits of each byte, MSB first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut stream = Self::new();
        for &b in bytes {
            stream.push_byte(b);
        }
        stream
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn push_byte(&mut self, byte: u8) {
        self.0.extend((0..8).rev().map(|i| (byte >> i) & 1 == 1));
    }

    pub fn extend_from(&mut self, other: &BitStream) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.0.get(index).copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Flips the bit at `index`. Panics when out of range.
    pub fn flip(&mut self, index: usize) {
        self.0[index] = !self.0[index];
    }

    /// Reads eight bits starting at `offset` as an MSB-first byte.
    pub fn byte_at(&self, offset: usize) -> Option<u8> {
        let bits = self.0.get(offset..offset + 8)?;
        Some(bits.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }
}

impl From<Vec<bool>> for BitStream {
    fn from(bits: Vec<bool>) -> Self {
        BitStream(bits)
    }
}

impl FromIterator<bool> for BitStream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitStream(iter.into_iter().collect())
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// An 8-bit payload together with its checksum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frame {
    pub payload: u8,
    pub crc: u8,
}

impl Frame {
    pub fn new(payload: u8) -> Self {
        Frame {
            payload,
            crc: crc8_darc(&[payload]),
        }
    }

    pub fn to_bits(&self) -> BitStream {
        BitStream::from_bytes(&[PREAMBLE, SYNC, self.payload, self.crc])
    }
}

/// Serializes `payload` into a complete 32-bit frame.
pub fn encode_frame(payload: u8) -> BitStream {
    Frame::new(payload).to_bits()
}

/// True when the preamble + sync marker starts at `offset`.
pub fn sync_at(stream: &BitStream, offset: usize) -> bool {
    stream.byte_at(offset) == Some(PREAMBLE) && stream.byte_at(offset + 8) == Some(SYNC)
}

/// Every offset at which the 16-bit preamble + sync marker begins, ascending.
///
/// Hits may overlap; the caller disambiguates them with the CRC.
pub fn find_sync(stream: &BitStream) -> Vec<usize> {
    if stream.len() < MARKER_BITS {
        return Vec::new();
    }
    (0..=stream.len() - MARKER_BITS)
        .filter(|&offset| sync_at(stream, offset))
        .collect()
}

/// Extracts and validates the payload of the frame starting at `offset`.
///
/// The marker bits are not re-checked here.
pub fn decode_frame(stream: &BitStream, offset: usize) -> Result<u8, FrameError> {
    let available = stream.len().saturating_sub(offset);
    if available < FRAME_BITS {
        return Err(FrameError::Truncated {
            needed: FRAME_BITS,
            available,
        });
    }
    let payload = stream
        .byte_at(offset + MARKER_BITS)
        .expect("length checked");
    let received = stream
        .byte_at(offset + MARKER_BITS + 8)
        .expect("length checked");
    let expected = crc8_darc(&[payload]);
    if expected == received {
        Ok(payload)
    } else {
        Err(FrameError::CrcMismatch {
            payload,
            expected,
            received,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_values() {
        assert_eq!(crc8_darc(&[]), 0x00);
        assert_eq!(crc8_darc(b"123456789"), 0x15);
        assert_eq!(crc8_darc(&[0x00]), 0x00);
    }

    #[test]
    fn preamble_and_sync_lead_every_frame() {
        let bits = encode_frame(0xFF);
        assert_eq!(bits.len(), FRAME_BITS);
        assert_eq!(bits.to_string()[..16], *"1010101001111110");
    }

    #[test]
    fn encode_zero_payload() {
        let expected = BitStream::from_bytes(&[0xAA, 0x7E, 0x00, crc8_darc(&[0x00])]);
        assert_eq!(encode_frame(0x00), expected);
    }

    #[test]
    fn round_trip_all_payloads() {
        for p in 0..=255u8 {
            assert_eq!(decode_frame(&encode_frame(p), 0), Ok(p));
        }
    }

    #[test]
    fn sync_search() {
        let mut stream: BitStream = std::iter::repeat_n(false, 5).collect();
        stream.extend_from(&encode_frame(0x42));
        assert_eq!(find_sync(&stream), vec![5]);

        let zeros: BitStream = std::iter::repeat_n(false, 64).collect();
        assert!(find_sync(&zeros).is_empty());

        let mut two = encode_frame(0x01);
        two.extend_from(&encode_frame(0x02));
        assert_eq!(find_sync(&two), vec![0, 32]);

        let short = BitStream::from_bytes(&[0xAA]);
        assert!(find_sync(&short).is_empty());
    }

    #[test]
    fn flipped_payload_bit_is_rejected() {
        let mut bits = encode_frame(0x5A);
        bits.flip(MARKER_BITS + 3);
        assert!(matches!(
            decode_frame(&bits, 0),
            Err(FrameError::CrcMismatch { .. })
        ));
    }

    #[test]
    fn truncated_stream() {
        let bits: BitStream = std::iter::repeat_n(true, 20).collect();
        assert_eq!(
            decode_frame(&bits, 0),
            Err(FrameError::Truncated {
                needed: 32,
                available: 20
            })
        );
        assert!(matches!(
            decode_frame(&encode_frame(1), 1),
            Err(FrameError::Truncated { .. })
        ));
    }

    #[test]
    fn from_bits_rejects_non_binary() {
        assert_eq!(
            BitStream::from_bits(&[0, 1, 2]),
            Err(FrameError::InvalidBit(2))
        );
        assert_eq!(BitStream::from_bits(&[1, 0]).unwrap().to_string(), "10");
    }
}
