//! C ABI over the motionpilot core.
//!
//! Handles are opaque and owned by the caller once created; each has a
//! matching `_free`. Every fallible call returns an [`MpStatus`]; the text of
//! the most recent error on the calling thread is available through
//! [`mp_last_error`]. No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use motionpilot::crsf::{self, ChannelSet, CrsfParser, Packet, CHANNEL_COUNT};
use motionpilot::mapping::{ArmMode, ControllerState, MappingConfig, MappingPipeline, TiltOffsets};
use motionpilot::session::{InputEvent, Session, SessionConfig, SessionRecord};
use motionpilot::ueq;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Frame failed its CRC or length checks.
    BadFrame = 3,
    BufferTooSmall = 4,
    /// Config or data text could not be parsed or validated.
    InvalidConfig = 5,
    Io = 6,
    /// Nothing queued; not an error.
    Empty = 7,
    /// The simulator session has already ended.
    Ended = 8,
    Internal = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: MpStatus, msg: impl Into<String>) -> MpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> MpStatus) -> MpStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MpStatus::Internal, "internal panic"))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Null means "use defaults" and yields `Ok(None)`.
unsafe fn opt_str<'a>(ptr: *const c_char) -> Result<Option<&'a str>, MpStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Some)
        .map_err(|_| fail(MpStatus::InvalidArgument, "string is not UTF-8"))
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// CRC8 DVB-S2 over `len` bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes (or be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn mp_crc8(data: *const u8, len: usize) -> u8 {
    slice(data, len).map_or(0, crsf::crc8_dvb_s2)
}

/// Encodes 16 channel values (ticks, 0..=2047) into a 26-byte RC frame.
///
/// # Safety
/// `channels` must point to 16 values; `out` to `out_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mp_encode_rc(
    channels: *const u16,
    out: *mut u8,
    out_len: usize,
    written: *mut usize,
) -> MpStatus {
    guard(|| {
        if channels.is_null() || out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let values: [u16; CHANNEL_COUNT] = std::ptr::read(channels.cast());
        let set = match ChannelSet::new(values) {
            Ok(s) => s,
            Err(e) => return fail(MpStatus::InvalidArgument, e.to_string()),
        };
        let frame = crsf::encode_rc_frame(&set);
        if out_len < frame.len() {
            return fail(
                MpStatus::BufferTooSmall,
                format!("need {} bytes", frame.len()),
            );
        }
        std::ptr::copy_nonoverlapping(frame.as_ptr(), out, frame.len());
        if !written.is_null() {
            *written = frame.len();
        }
        MpStatus::Ok
    })
}

/// Decodes a complete RC frame into 16 channel values.
///
/// # Safety
/// `frame` must point to `len` bytes; `channels_out` to 16 writable values.
#[no_mangle]
pub unsafe extern "C" fn mp_decode_rc(
    frame: *const u8,
    len: usize,
    channels_out: *mut u16,
) -> MpStatus {
    guard(|| {
        let (Some(raw), false) = (slice(frame, len), channels_out.is_null()) else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        match crsf::decode_rc_frame(raw) {
            Ok(set) => {
                std::ptr::copy_nonoverlapping(set.values().as_ptr(), channels_out, CHANNEL_COUNT);
                MpStatus::Ok
            }
            Err(e) => fail(MpStatus::BadFrame, e.to_string()),
        }
    })
}

/// Largest payload a CRSF frame can carry.
pub const MP_MAX_PAYLOAD_LEN: usize = 60;
const _: () = assert!(MP_MAX_PAYLOAD_LEN == crsf::MAX_PAYLOAD_LEN);

/// Number of channel values read or written by the channel functions.
pub const MP_CHANNEL_COUNT: usize = 16;
const _: () = assert!(MP_CHANNEL_COUNT == CHANNEL_COUNT);

/// One CRC-valid frame taken from a parser.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MpFrame {
    pub frame_type: u8,
    pub payload_len: u8,
    pub payload: [u8; MP_MAX_PAYLOAD_LEN],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MpParserStats {
    pub frames: u64,
    pub crc_errors: u64,
    pub resyncs: u64,
    pub skipped_unknown: u64,
}

/// Streaming CRSF parser with a queue of decoded frames.
pub struct MpParser {
    inner: CrsfParser,
    queue: std::collections::VecDeque<crsf::CrsfFrame>,
}

#[no_mangle]
pub extern "C" fn mp_parser_new() -> *mut MpParser {
    Box::into_raw(Box::new(MpParser {
        inner: CrsfParser::new(),
        queue: Default::default(),
    }))
}

/// # Safety
/// `parser` must come from [`mp_parser_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mp_parser_free(parser: *mut MpParser) {
    if !parser.is_null() {
        drop(Box::from_raw(parser));
    }
}

/// Feeds bytes in any chunking; complete frames are queued.
///
/// # Safety
/// `parser` must be a live handle; `data` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mp_parser_feed(
    parser: *mut MpParser,
    data: *const u8,
    len: usize,
) -> MpStatus {
    guard(|| {
        let (Some(p), Some(data)) = (parser.as_mut(), slice(data, len)) else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let queue = &mut p.queue;
        p.inner.feed_with(data, |f| queue.push_back(f));
        MpStatus::Ok
    })
}

/// Pops the oldest queued frame, or returns `Empty`.
///
/// # Safety
/// `parser` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_parser_next(parser: *mut MpParser, out: *mut MpFrame) -> MpStatus {
    guard(|| {
        let (Some(p), Some(out)) = (parser.as_mut(), out.as_mut()) else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let Some(f) = p.queue.pop_front() else {
            return MpStatus::Empty;
        };
        let mut payload = [0u8; MP_MAX_PAYLOAD_LEN];
        payload[..f.payload.len()].copy_from_slice(&f.payload);
        *out = MpFrame {
            frame_type: f.frame_type,
            payload_len: f.payload.len() as u8,
            payload,
        };
        MpStatus::Ok
    })
}

/// # Safety
/// `parser` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_parser_stats(
    parser: *const MpParser,
    out: *mut MpParserStats,
) -> MpStatus {
    let (Some(p), Some(out)) = (parser.as_ref(), out.as_mut()) else {
        return fail(MpStatus::NullPointer, "null argument");
    };
    let s = p.inner.stats();
    *out = MpParserStats {
        frames: s.frames,
        crc_errors: s.crc_error_count,
        resyncs: s.resyncs,
        skipped_unknown: s.skipped_unknown,
    };
    MpStatus::Ok
}

/// Decodes an RC frame taken from the parser into 16 channel values.
///
/// # Safety
/// `frame` must be readable; `channels_out` must hold 16 values.
#[no_mangle]
pub unsafe extern "C" fn mp_frame_channels(
    frame: *const MpFrame,
    channels_out: *mut u16,
) -> MpStatus {
    guard(|| {
        let (Some(f), false) = (frame.as_ref(), channels_out.is_null()) else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let len = usize::from(f.payload_len).min(MP_MAX_PAYLOAD_LEN);
        let decoded = crsf::CrsfFrame::new(f.frame_type, f.payload[..len].to_vec())
            .and_then(|frame| frame.decode());
        match decoded {
            Ok(Packet::RcChannels(set)) => {
                std::ptr::copy_nonoverlapping(set.values().as_ptr(), channels_out, CHANNEL_COUNT);
                MpStatus::Ok
            }
            Ok(_) => fail(MpStatus::InvalidArgument, "not an RC channels frame"),
            Err(e) => fail(MpStatus::BadFrame, e.to_string()),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpArmMode {
    Disarmed = 0,
    Armed = 1,
    Failsafe = 2,
}

impl From<ArmMode> for MpArmMode {
    fn from(m: ArmMode) -> Self {
        match m {
            ArmMode::Disarmed => Self::Disarmed,
            ArmMode::Armed => Self::Armed,
            ArmMode::Failsafe => Self::Failsafe,
        }
    }
}

/// One handheld controller reading.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MpControllerState {
    /// Trigger travel, 0 released to 1 fully pulled.
    pub trigger: f64,
    /// Forward tilt in degrees.
    pub tilt_pitch: f64,
    /// Rightward tilt in degrees.
    pub tilt_roll: f64,
    /// -1..1, right positive.
    pub thumbstick_x: f64,
    pub arm_button: bool,
    pub timestamp_ms: u64,
}

impl From<MpControllerState> for ControllerState {
    fn from(s: MpControllerState) -> Self {
        Self {
            trigger: s.trigger,
            tilt_pitch: s.tilt_pitch,
            tilt_roll: s.tilt_roll,
            thumbstick_x: s.thumbstick_x,
            arm_button: s.arm_button,
            timestamp_ms: s.timestamp_ms,
        }
    }
}

/// Controller → channels pipeline with arming and slew limiting.
pub struct MpMapper(MappingPipeline);

/// Creates a mapper from a mapping config in TOML (null for defaults) and
/// neutral tilt offsets in degrees.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mp_mapper_new(
    config_toml: *const c_char,
    offset_pitch: f64,
    offset_roll: f64,
    out: *mut *mut MpMapper,
) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let cfg = match opt_str(config_toml) {
            Ok(None) => MappingConfig::default(),
            Ok(Some(text)) => match MappingConfig::from_toml_str(text) {
                Ok(c) => c,
                Err(e) => return fail(MpStatus::InvalidConfig, e.to_string()),
            },
            Err(s) => return s,
        };
        let offsets = TiltOffsets {
            pitch: offset_pitch,
            roll: offset_roll,
        };
        *out = Box::into_raw(Box::new(MpMapper(MappingPipeline::new(cfg, offsets))));
        MpStatus::Ok
    })
}

/// # Safety
/// `mapper` must come from [`mp_mapper_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mp_mapper_free(mapper: *mut MpMapper) {
    if !mapper.is_null() {
        drop(Box::from_raw(mapper));
    }
}

/// Maps one reading to 16 channel values and reports the arming state.
///
/// # Safety
/// `mapper` must be live; `state` readable; `channels_out` must hold 16
/// values; `arm_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn mp_mapper_update(
    mapper: *mut MpMapper,
    state: *const MpControllerState,
    link_ok: bool,
    channels_out: *mut u16,
    arm_out: *mut MpArmMode,
) -> MpStatus {
    guard(|| {
        let (Some(m), Some(state), false) =
            (mapper.as_mut(), state.as_ref(), channels_out.is_null())
        else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let set = m.0.update(&(*state).into(), link_ok);
        std::ptr::copy_nonoverlapping(set.values().as_ptr(), channels_out, CHANNEL_COUNT);
        if let Some(arm) = arm_out.as_mut() {
            *arm = m.0.arming().mode.into();
        }
        MpStatus::Ok
    })
}

/// Why a simulator session ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpEndReason {
    Running = 0,
    ExerciseCompleted = 1,
    ExerciseFailed = 2,
    InputEnded = 3,
    Stopped = 4,
    Disconnected = 5,
    Timeout = 6,
    Fault = 7,
}

impl From<Option<motionpilot::session::EndReason>> for MpEndReason {
    fn from(r: Option<motionpilot::session::EndReason>) -> Self {
        use motionpilot::session::EndReason as E;
        match r {
            None => Self::Running,
            Some(E::ExerciseCompleted) => Self::ExerciseCompleted,
            Some(E::ExerciseFailed) => Self::ExerciseFailed,
            Some(E::InputEnded) => Self::InputEnded,
            Some(E::Stopped) => Self::Stopped,
            Some(E::Disconnected) => Self::Disconnected,
            Some(E::Timeout) => Self::Timeout,
            Some(E::Fault) => Self::Fault,
        }
    }
}

/// Vehicle and link state after a simulator step. World frame is x forward,
/// y left, z up, metres.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MpSimState {
    pub t_ms: u64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// w, x, y, z
    pub attitude: [f64; 4],
    pub armed: bool,
    pub failsafe: bool,
    /// Percent over the last 100 packets.
    pub link_quality: u8,
    pub ended: MpEndReason,
}

/// A whole session: mapping, lossy link, receiver, flight controller,
/// dynamics and the optional exercise script. Records every step.
pub struct MpSim(Session);

/// Creates a simulator from a session config in TOML (null for defaults).
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mp_sim_new(config_toml: *const c_char, out: *mut *mut MpSim) -> MpStatus {
    guard(|| {
        if out.is_null() {
            return fail(MpStatus::NullPointer, "null argument");
        }
        let cfg = match opt_str(config_toml) {
            Ok(None) => SessionConfig::default(),
            Ok(Some(text)) => match SessionConfig::from_toml_str(text) {
                Ok(c) => c,
                Err(e) => return fail(MpStatus::InvalidConfig, e.to_string()),
            },
            Err(s) => return s,
        };
        match Session::new(cfg, motionpilot::session::unix_time_ms()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(MpSim(s)));
                MpStatus::Ok
            }
            Err(e) => fail(MpStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// # Safety
/// `sim` must come from [`mp_sim_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mp_sim_free(sim: *mut MpSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Milliseconds simulated per [`mp_sim_step`].
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_sim_period_ms(sim: *const MpSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.0.sample_period_ms())
}

/// Advances one controller period. A null `input` means the controller was
/// silent this period, so no packets are sent.
///
/// # Safety
/// `sim` must be live; `input` null or readable; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mp_sim_step(
    sim: *mut MpSim,
    input: *const MpControllerState,
    out: *mut MpSimState,
) -> MpStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        if sim.0.ended().is_some() {
            return fail(MpStatus::Ended, "session has ended");
        }
        let event = match input.as_ref() {
            Some(s) => InputEvent::Sample((*s).into()),
            None => InputEvent::Silent,
        };
        let mut source = |_: u64, _: &_| event;
        sim.0.run_period(&mut source, &mut ());
        if let Some(out) = out.as_mut() {
            *out = snapshot(&sim.0);
        }
        MpStatus::Ok
    })
}

fn snapshot(s: &Session) -> MpSimState {
    let q = s.quad().summary();
    let link = s.link_snapshot();
    MpSimState {
        t_ms: s.t_ms(),
        position: q.position,
        velocity: q.velocity,
        attitude: q.attitude,
        armed: q.armed,
        failsafe: link.failsafe,
        link_quality: link.lq,
        ended: s.ended().into(),
    }
}

/// Ends the session if it is still running and writes its JSONL record.
/// The handle stays valid but will not step again.
///
/// # Safety
/// `sim` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mp_sim_save_record(sim: *mut MpSim, path: *const c_char) -> MpStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let path = match opt_str(path) {
            Ok(Some(p)) => p,
            Ok(None) => return fail(MpStatus::NullPointer, "null path"),
            Err(s) => return s,
        };
        sim.0.stop(&mut ());
        let record: SessionRecord = sim.0.record();
        match record.save(Path::new(path)) {
            Ok(()) => MpStatus::Ok,
            Err(e) => fail(MpStatus::Io, e.to_string()),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MpScaleScore {
    pub mean: f64,
    pub sd: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MpUeqScales {
    pub pragmatic: MpScaleScore,
    pub hedonic: MpScaleScore,
    pub overall: MpScaleScore,
    pub participants: usize,
}

/// Scores UEQ-S answers laid out as `participants` rows of 8 items. With
/// `recode` set, items are on the 1..7 scale and shifted to -3..3 first.
///
/// # Safety
/// `items` must point to `participants * 8` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mp_ueq_score(
    items: *const i8,
    participants: usize,
    recode: bool,
    out: *mut MpUeqScales,
) -> MpStatus {
    guard(|| {
        let Some(n) = participants.checked_mul(ueq::ITEM_COUNT) else {
            return fail(MpStatus::InvalidArgument, "too many participants");
        };
        let (Some(raw), Some(out)) = (slice(items, n), out.as_mut()) else {
            return fail(MpStatus::NullPointer, "null argument");
        };
        let offset = if recode {
            i64::from(ueq::RECODE_OFFSET)
        } else {
            0
        };
        let mut responses = Vec::with_capacity(participants);
        for (i, row) in raw.chunks(ueq::ITEM_COUNT).enumerate() {
            if recode && row.iter().any(|v| !(1..=7).contains(v)) {
                return fail(
                    MpStatus::InvalidArgument,
                    format!("participant {}: answers must be 1..7", i + 1),
                );
            }
            let values: Vec<i64> = row.iter().map(|&b| i64::from(b) - offset).collect();
            match ueq::UeqResponse::new(format!("{}", i + 1), &values) {
                Ok(r) => responses.push(r),
                Err(e) => return fail(MpStatus::InvalidArgument, e.to_string()),
            }
        }
        match ueq::score(&responses) {
            Ok(s) => {
                let conv = |x: ueq::ScaleScore| MpScaleScore {
                    mean: x.mean,
                    sd: x.sd,
                };
                *out = MpUeqScales {
                    pragmatic: conv(s.pragmatic),
                    hedonic: conv(s.hedonic),
                    overall: conv(s.overall),
                    participants: s.participants,
                };
                MpStatus::Ok
            }
            Err(e) => fail(MpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
