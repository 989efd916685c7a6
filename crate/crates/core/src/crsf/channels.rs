use serde::{Deserialize, Serialize};

use super::CrsfError;

pub const CHANNEL_COUNT: usize = 16;
/// Largest value an 11-bit channel can carry.
pub const TICK_RAW_MAX: u16 = 2047;
/// Low end of the usable stick range (988 µs).
pub const TICK_MIN: u16 = 172;
pub const TICK_CENTER: u16 = 992;
/// High end of the usable stick range (2012 µs).
pub const TICK_MAX: u16 = 1811;

pub const US_MIN: u16 = 885;
pub const US_MAX: u16 = 2115;

const PACKED_LEN: usize = 22;

/// Sixteen 11-bit RC channels, in CRSF ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u16>", into = "Vec<u16>")]
pub struct ChannelSet([u16; CHANNEL_COUNT]);

impl ChannelSet {
    pub fn new(values: [u16; CHANNEL_COUNT]) -> Result<Self, CrsfError> {
        check_range(&values)?;
        Ok(Self(values))
    }

    /// Every channel at center.
    pub fn centered() -> Self {
        Self([TICK_CENTER; CHANNEL_COUNT])
    }

    pub fn get(&self, index: usize) -> u16 {
        self.0[index]
    }

    /// Sets one channel; values above 2047 are rejected.
    pub fn set(&mut self, index: usize, value: u16) -> Result<(), CrsfError> {
        if value > TICK_RAW_MAX {
            return Err(CrsfError::ChannelRange { index, value });
        }
        self.0[index] = value;
        Ok(())
    }

    pub fn values(&self) -> &[u16; CHANNEL_COUNT] {
        &self.0
    }

    pub fn pack(&self) -> [u8; PACKED_LEN] {
        pack_unchecked(&self.0)
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::centered()
    }
}

impl TryFrom<Vec<u16>> for ChannelSet {
    type Error = CrsfError;

    fn try_from(v: Vec<u16>) -> Result<Self, Self::Error> {
        let values: [u16; CHANNEL_COUNT] =
            v.as_slice().try_into().map_err(|_| CrsfError::Length {
                expected: CHANNEL_COUNT,
                actual: v.len(),
            })?;
        Self::new(values)
    }
}

impl From<ChannelSet> for Vec<u16> {
    fn from(set: ChannelSet) -> Self {
        set.0.to_vec()
    }
}

fn check_range(values: &[u16; CHANNEL_COUNT]) -> Result<(), CrsfError> {
    match values.iter().position(|&v| v > TICK_RAW_MAX) {
        Some(index) => Err(CrsfError::ChannelRange {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Packs 16 × 11-bit values LSB-first into 22 bytes.
pub fn pack_channels(values: &[u16; CHANNEL_COUNT]) -> Result<[u8; PACKED_LEN], CrsfError> {
    check_range(values)?;
    Ok(pack_unchecked(values))
}

fn pack_unchecked(values: &[u16; CHANNEL_COUNT]) -> [u8; PACKED_LEN] {
    let mut out = [0u8; PACKED_LEN];
    let mut acc: u32 = 0;
    let mut bits = 0;
    let mut pos = 0;
    for &v in values {
        acc |= u32::from(v & TICK_RAW_MAX) << bits;
        bits += 11;
        while bits >= 8 {
            out[pos] = acc as u8;
            pos += 1;
            acc >>= 8;
            bits -= 8;
        }
    }
    debug_assert_eq!(bits, 0);
    out
}

pub fn unpack_channels(bytes: &[u8]) -> Result<ChannelSet, CrsfError> {
    if bytes.len() != PACKED_LEN {
        return Err(CrsfError::Length {
            expected: PACKED_LEN,
            actual: bytes.len(),
        });
    }
    let mut values = [0u16; CHANNEL_COUNT];
    let mut acc: u32 = 0;
    let mut bits = 0;
    let mut bytes = bytes.iter();
    for v in values.iter_mut() {
        while bits < 11 {
            acc |= u32::from(*bytes.next().expect("22 bytes hold 176 bits")) << bits;
            bits += 8;
        }
        *v = (acc & u32::from(TICK_RAW_MAX)) as u16;
        acc >>= 11;
        bits -= 11;
    }
    Ok(ChannelSet(values))
}

/// 992 ↔ 1500 µs at 5/8 µs per tick, rounded half up.
pub fn ticks_to_microseconds(ticks: u16) -> Result<u16, CrsfError> {
    if ticks > TICK_RAW_MAX {
        return Err(CrsfError::OutOfRange {
            value: f64::from(ticks),
            min: 0.0,
            max: f64::from(TICK_RAW_MAX),
            unit: "ticks",
        });
    }
    // 1500 + 5(t - 992)/8 == (5t + 7040)/8
    let num = 5 * u32::from(ticks) + 7040;
    Ok(((num + 4) / 8) as u16)
}

pub fn microseconds_to_ticks(us: u16) -> Result<u16, CrsfError> {
    if !(US_MIN..=US_MAX).contains(&us) {
        return Err(CrsfError::OutOfRange {
            value: f64::from(us),
            min: f64::from(US_MIN),
            max: f64::from(US_MAX),
            unit: "µs",
        });
    }
    // 992 + 8(us - 1500)/5 == (8us - 7040)/5, positive on the valid range
    let num = 8 * u32::from(us) - 7040;
    Ok(((2 * num + 5) / 10) as u16)
}
