//! CRSF framing as used on ExpressLRS links.
//!
//! Wire layout: `sync | length | type | payload | crc`, where `length` counts
//! type, payload and crc, and the crc is CRC8/DVB-S2 over type and payload.

mod channels;
mod crc;
mod frame;
mod parser;

pub use channels::{
    microseconds_to_ticks, pack_channels, ticks_to_microseconds, unpack_channels, ChannelSet,
    CHANNEL_COUNT, TICK_CENTER, TICK_MAX, TICK_MIN, TICK_RAW_MAX, US_MAX, US_MIN,
};
pub use crc::crc8_dvb_s2;
pub use frame::{
    decode_rc_frame, encode_rc_frame, CrsfFrame, LinkStatistics, Packet,
    FRAME_TYPE_LINK_STATISTICS, FRAME_TYPE_RC_CHANNELS, LINK_STATS_PAYLOAD_LEN, MAX_FRAME_LEN,
    MAX_PAYLOAD_LEN, RC_CHANNELS_PAYLOAD_LEN, RC_FRAME_LEN, SYNC_BYTE,
};
pub use parser::{CrsfParser, ParserStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrsfError {
    #[error("channel {index} value {value} exceeds the 11-bit range")]
    ChannelRange { index: usize, value: u16 },
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("payload of {0} bytes exceeds the 60-byte frame limit")]
    PayloadTooLong(usize),
    #[error("bad sync byte 0x{0:02X}")]
    Sync(u8),
    #[error("crc mismatch: frame carries 0x{carried:02X}, computed 0x{computed:02X}")]
    Crc { carried: u8, computed: u8 },
    #[error("unexpected frame type 0x{0:02X}")]
    FrameType(u8),
    #[error("{value} {unit} is outside [{min}, {max}]")]
    OutOfRange {
        value: f64,
        min: f64,
        max: f64,
        unit: &'static str,
    },
}
