//! Software modem and proximity toolkit for body-channel artifact tagging.
//!
//! * [`framing`]: 32-bit wire frame with a CRC-8/DARC checksum.
//! * [`dsp`]: FIR filtering, rectification, envelope, thresholding, decimation.
//! * [`modem`]: OOK synthesis on the 1 kHz sub-carrier.
//! * [`channel`]: gain, noise, offset and dropout model of the body channel.
//! * [`receiver`]: the full decode pipeline, batch and streaming.
//! * [`beacon`]: Eddystone-UID parsing, ranging, region monitoring and fusion
//!   of beacon regions with decoded artifact identifiers.

pub mod beacon;
pub mod channel;
pub mod dsp;
pub mod framing;
pub mod modem;
pub mod receiver;
mod window;

pub use channel::{apply_channel, measure_snr, ChannelConfig};
pub use dsp::SampleBuffer;
pub use framing::{crc8_darc, decode_frame, encode_frame, find_sync, BitStream, Frame};
pub use modem::{modulate, ModemConfig};
pub use receiver::{decode_buffer, decode_stream, DecodedFrame, ReceiverConfig, StreamDecoder};
