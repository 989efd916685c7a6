use super::crc::crc8_dvb_s2;
use super::frame::{
    CrsfFrame, FRAME_TYPE_LINK_STATISTICS, FRAME_TYPE_RC_CHANNELS, MAX_FRAME_LEN, SYNC_BYTE,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParserStats {
    pub frames: u64,
    pub crc_error_count: u64,
    /// Runs of discarded bytes between good frames. A run split across
    /// several `feed` calls counts once.
    pub resyncs: u64,
    /// CRC-valid frames of a type this crate does not decode.
    pub skipped_unknown: u64,
}

/// Streaming CRSF receiver. Bytes may arrive in arbitrary chunks; frames are
/// emitted once they are complete and CRC-valid.
#[derive(Debug, Clone, Default)]
pub struct CrsfParser {
    buf: Vec<u8>,
    start: usize,
    hunting: bool,
    stats: ParserStats,
}

enum Scan {
    Frame(usize),
    Skip(usize),
    NeedMore,
}

impl CrsfParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<CrsfFrame> {
        let mut out = Vec::new();
        self.feed_with(bytes, |f| out.push(f));
        out
    }

    pub fn feed_with(&mut self, bytes: &[u8], mut emit: impl FnMut(CrsfFrame)) {
        self.buf.extend_from_slice(bytes);
        loop {
            match self.scan() {
                Scan::Frame(len) => {
                    let raw = &self.buf[self.start..self.start + len];
                    let frame_type = raw[2];
                    if frame_type == FRAME_TYPE_RC_CHANNELS
                        || frame_type == FRAME_TYPE_LINK_STATISTICS
                    {
                        self.stats.frames += 1;
                        emit(CrsfFrame {
                            frame_type,
                            payload: raw[3..len - 1].to_vec(),
                        });
                    } else {
                        self.stats.skipped_unknown += 1;
                    }
                    self.start += len;
                    self.hunting = false;
                }
                Scan::Skip(n) => {
                    if !self.hunting {
                        self.stats.resyncs += 1;
                        self.hunting = true;
                    }
                    self.start += n;
                }
                Scan::NeedMore => break,
            }
        }
        self.compact();
    }

    fn scan(&mut self) -> Scan {
        let window = &self.buf[self.start..];
        if window.is_empty() {
            return Scan::NeedMore;
        }
        if window[0] != SYNC_BYTE {
            let skip = window
                .iter()
                .position(|&b| b == SYNC_BYTE)
                .unwrap_or(window.len());
            return Scan::Skip(skip);
        }
        if window.len() < 2 {
            return Scan::NeedMore;
        }
        let total = usize::from(window[1]) + 2;
        // Smallest frame is sync, length, type, crc.
        if !(4..=MAX_FRAME_LEN).contains(&total) {
            return Scan::Skip(1);
        }
        if window.len() < total {
            return Scan::NeedMore;
        }
        if crc8_dvb_s2(&window[2..total - 1]) != window[total - 1] {
            self.stats.crc_error_count += 1;
            // Only the sync byte is consumed so a real frame hidden behind a
            // false header is still found.
            return Scan::Skip(1);
        }
        Scan::Frame(total)
    }

    fn compact(&mut self) {
        if self.start == self.buf.len() {
            self.buf.clear();
            self.start = 0;
        } else if self.start > 4096 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
    }
}
