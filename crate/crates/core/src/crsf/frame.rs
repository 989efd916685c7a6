use serde::{Deserialize, Serialize};

use super::channels::{unpack_channels, ChannelSet};
use super::crc::crc8_dvb_s2;
use super::CrsfError;

/// Address byte for frames going to the flight controller.
pub const SYNC_BYTE: u8 = 0xC8;
pub const FRAME_TYPE_RC_CHANNELS: u8 = 0x16;
pub const FRAME_TYPE_LINK_STATISTICS: u8 = 0x14;

pub const MAX_FRAME_LEN: usize = 64;
pub const MAX_PAYLOAD_LEN: usize = MAX_FRAME_LEN - 4;
pub const RC_CHANNELS_PAYLOAD_LEN: usize = 22;
pub const LINK_STATS_PAYLOAD_LEN: usize = 10;
/// sync + length + type + 22 payload bytes + crc
pub const RC_FRAME_LEN: usize = RC_CHANNELS_PAYLOAD_LEN + 4;

/// Packet rates a link-statistics frame can advertise, indexed by its rf-mode byte.
const RF_MODE_RATES: [u16; 4] = [50, 150, 250, 500];

/// One frame on the wire. The sync byte, length and crc are derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrsfFrame {
    pub frame_type: u8,
    pub payload: Vec<u8>,
}

impl CrsfFrame {
    pub fn new(frame_type: u8, payload: Vec<u8>) -> Result<Self, CrsfError> {
        if payload.len() > MAX_PAYLOAD_LEN {
            return Err(CrsfError::PayloadTooLong(payload.len()));
        }
        Ok(Self {
            frame_type,
            payload,
        })
    }

    /// Value of the length byte: type + payload + crc.
    pub fn frame_length(&self) -> u8 {
        (self.payload.len() + 2) as u8
    }

    pub fn crc(&self) -> u8 {
        let mut data = Vec::with_capacity(self.payload.len() + 1);
        data.push(self.frame_type);
        data.extend_from_slice(&self.payload);
        crc8_dvb_s2(&data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 4);
        out.push(SYNC_BYTE);
        out.push(self.frame_length());
        out.push(self.frame_type);
        out.extend_from_slice(&self.payload);
        out.push(crc8_dvb_s2(&out[2..]));
        out
    }

    /// Parses exactly one complete frame.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CrsfError> {
        if bytes.len() < 4 {
            return Err(CrsfError::Length {
                expected: 4,
                actual: bytes.len(),
            });
        }
        if bytes[0] != SYNC_BYTE {
            return Err(CrsfError::Sync(bytes[0]));
        }
        let expected = usize::from(bytes[1]) + 2;
        if bytes.len() != expected || expected > MAX_FRAME_LEN {
            return Err(CrsfError::Length {
                expected,
                actual: bytes.len(),
            });
        }
        let carried = bytes[expected - 1];
        let computed = crc8_dvb_s2(&bytes[2..expected - 1]);
        if carried != computed {
            return Err(CrsfError::Crc { carried, computed });
        }
        Ok(Self {
            frame_type: bytes[2],
            payload: bytes[3..expected - 1].to_vec(),
        })
    }

    pub fn decode(&self) -> Result<Packet, CrsfError> {
        match self.frame_type {
            FRAME_TYPE_RC_CHANNELS => Ok(Packet::RcChannels(unpack_channels(&self.payload)?)),
            FRAME_TYPE_LINK_STATISTICS => Ok(Packet::LinkStatistics(LinkStatistics::from_payload(
                &self.payload,
            )?)),
            other => Err(CrsfError::FrameType(other)),
        }
    }
}

impl From<&ChannelSet> for CrsfFrame {
    fn from(set: &ChannelSet) -> Self {
        Self {
            frame_type: FRAME_TYPE_RC_CHANNELS,
            payload: set.pack().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packet {
    RcChannels(ChannelSet),
    LinkStatistics(LinkStatistics),
}

pub fn encode_rc_frame(set: &ChannelSet) -> [u8; RC_FRAME_LEN] {
    let mut out = [0u8; RC_FRAME_LEN];
    out[0] = SYNC_BYTE;
    out[1] = (RC_CHANNELS_PAYLOAD_LEN + 2) as u8;
    out[2] = FRAME_TYPE_RC_CHANNELS;
    out[3..3 + RC_CHANNELS_PAYLOAD_LEN].copy_from_slice(&set.pack());
    out[RC_FRAME_LEN - 1] = crc8_dvb_s2(&out[2..RC_FRAME_LEN - 1]);
    out
}

pub fn decode_rc_frame(bytes: &[u8]) -> Result<ChannelSet, CrsfError> {
    let frame = CrsfFrame::from_bytes(bytes)?;
    match frame.decode()? {
        Packet::RcChannels(set) => Ok(set),
        Packet::LinkStatistics(_) => Err(CrsfError::FrameType(frame.frame_type)),
    }
}

/// Uplink health as reported over the telemetry path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStatistics {
    pub uplink_rssi_dbm: i16,
    pub link_quality: u8,
    pub uplink_snr_db: i8,
    pub active_packet_rate_hz: u16,
}

impl LinkStatistics {
    /// Standard 10-byte layout: rssi1, rssi2, lq, snr, antenna, rf mode, tx power,
    /// then downlink rssi, lq, snr. RSSI travels as a positive -dBm magnitude;
    /// the downlink fields mirror the uplink.
    pub fn to_payload(&self) -> Result<[u8; LINK_STATS_PAYLOAD_LEN], CrsfError> {
        if self.link_quality > 100 {
            return Err(CrsfError::OutOfRange {
                value: f64::from(self.link_quality),
                min: 0.0,
                max: 100.0,
                unit: "%",
            });
        }
        let rf_mode = RF_MODE_RATES
            .iter()
            .position(|&r| r == self.active_packet_rate_hz)
            .ok_or(CrsfError::OutOfRange {
                value: f64::from(self.active_packet_rate_hz),
                min: 50.0,
                max: 500.0,
                unit: "Hz",
            })? as u8;
        let rssi = (-self.uplink_rssi_dbm).clamp(0, 255) as u8;
        let snr = self.uplink_snr_db as u8;
        Ok([
            rssi,
            rssi,
            self.link_quality,
            snr,
            0,
            rf_mode,
            0,
            rssi,
            self.link_quality,
            snr,
        ])
    }

    pub fn from_payload(payload: &[u8]) -> Result<Self, CrsfError> {
        if payload.len() != LINK_STATS_PAYLOAD_LEN {
            return Err(CrsfError::Length {
                expected: LINK_STATS_PAYLOAD_LEN,
                actual: payload.len(),
            });
        }
        let rate =
            RF_MODE_RATES
                .get(usize::from(payload[5]))
                .copied()
                .ok_or(CrsfError::OutOfRange {
                    value: f64::from(payload[5]),
                    min: 0.0,
                    max: (RF_MODE_RATES.len() - 1) as f64,
                    unit: "rf mode",
                })?;
        if payload[2] > 100 {
            return Err(CrsfError::OutOfRange {
                value: f64::from(payload[2]),
                min: 0.0,
                max: 100.0,
                unit: "%",
            });
        }
        Ok(Self {
            uplink_rssi_dbm: -i16::from(payload[0]),
            link_quality: payload[2],
            uplink_snr_db: payload[3] as i8,
            active_packet_rate_hz: rate,
        })
    }

    pub fn to_frame(&self) -> Result<CrsfFrame, CrsfError> {
        CrsfFrame::new(FRAME_TYPE_LINK_STATISTICS, self.to_payload()?.to_vec())
    }
}
