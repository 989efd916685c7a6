//! Piloting sessions: controller input through mapping, the simulated link and
//! the flight model, scored against a course, with JSONL recording and replay.

mod input;
mod pilot;
pub mod protocol;
mod server;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use input::{InputEvent, InputSource, ReplayInput, SilentInput};
pub use pilot::AutoPilot;
pub use server::{serve, ServeOptions};

use crate::course::{
    CourseError, CourseFile, RunnerLimits, ScriptEvent, ScriptRunner, ScriptStatus,
};
use crate::crsf::{encode_rc_frame, ChannelSet, CrsfParser, Packet, TICK_MIN};
use crate::dynamics::{
    failsafe_channels, step, AngleController, DynamicsError, FailsafePolicy, QuadParams, QuadState,
    QuadSummary,
};
use crate::link::{check_failsafe, LinkConfig, LinkError, SimLink};
use crate::mapping::{
    ArmMode, Axis, ControllerState, MappingConfig, MappingError, MappingPipeline, TiltOffsets,
    ARM_CHANNEL,
};

pub const SESSION_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Course(#[from] CourseError),
    #[error("record: {0}")]
    Record(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which course file to fly and, optionally, which exercise to score.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourseRef {
    /// Course file; the built-in "paper-track" course when absent.
    pub file: Option<PathBuf>,
    /// Exercise name; free flight when absent.
    pub exercise: Option<String>,
}

impl CourseRef {
    pub fn load(&self) -> Result<CourseFile, CourseError> {
        let file = match &self.file {
            Some(path) => CourseFile::load(path)?,
            None => CourseFile::paper_track(),
        };
        if let Some(name) = &self.exercise {
            file.exercise(name)?;
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub format: u32,
    pub mapping: MappingConfig,
    pub calibration: TiltOffsets,
    pub link: LinkConfig,
    pub quad: QuadParams,
    pub controller: AngleController,
    pub failsafe: FailsafePolicy,
    pub course: CourseRef,
    pub limits: RunnerLimits,
    /// Physics ticks per second.
    pub sim_rate: u32,
    /// Controller samples per second.
    pub controller_rate: u32,
    pub telemetry_rate: u32,
    pub max_duration_s: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            format: SESSION_FORMAT,
            mapping: MappingConfig::default(),
            calibration: TiltOffsets::default(),
            link: LinkConfig::default(),
            quad: QuadParams::default(),
            controller: AngleController::default(),
            failsafe: FailsafePolicy::default(),
            course: CourseRef::default(),
            limits: RunnerLimits::default(),
            sim_rate: 1000,
            controller_rate: 100,
            telemetry_rate: 60,
            max_duration_s: 600.0,
        }
    }
}

impl SessionConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SessionError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::Config(m.to_string()));
        if self.format != SESSION_FORMAT {
            return bad("format must be 1");
        }
        self.mapping.validate()?;
        self.link.validate()?;
        self.quad.validate()?;
        self.controller.validate()?;
        if self.mapping.channel_order != self.controller.channel_order {
            return bad("mapping and controller must use the same channel order");
        }
        if self.controller_rate == 0 || 1000 % self.controller_rate != 0 {
            return bad("controller_rate must divide 1000");
        }
        if self.sim_rate == 0 || !self.sim_rate.is_multiple_of(self.controller_rate) {
            return bad("sim_rate must be a multiple of controller_rate");
        }
        if 1.0 / f64::from(self.sim_rate) > crate::dynamics::MAX_STEP_S {
            return bad("sim_rate too low for the integrator");
        }
        if self.telemetry_rate == 0 || self.telemetry_rate > self.sim_rate {
            return bad("telemetry_rate must be in 1..=sim_rate");
        }
        if !(self.failsafe.disarm_after_s >= 0.0) {
            return bad("failsafe.disarm_after_s must be non-negative");
        }
        if !(self.limits.drone_radius > 0.0) {
            return bad("limits.drone_radius must be positive");
        }
        if !(self.max_duration_s > 0.0) {
            return bad("max_duration_s must be positive");
        }
        Ok(())
    }

    fn ticks_per_sample(&self) -> u64 {
        u64::from(self.sim_rate / self.controller_rate)
    }

    fn sample_period_ms(&self) -> u64 {
        u64::from(1000 / self.controller_rate)
    }
}

/// Session-level events; script events pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionNotice {
    Started,
    Armed,
    Disarmed,
    FailsafeEntered,
    FailsafeCleared,
    InputEnded,
    Stopped,
    Disconnected,
    Timeout,
    Fault { message: String },
    Warning { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SessionEvent {
    Script(ScriptEvent),
    Session(SessionNotice),
}

impl From<ScriptEvent> for SessionEvent {
    fn from(e: ScriptEvent) -> Self {
        Self::Script(e)
    }
}

impl From<SessionNotice> for SessionEvent {
    fn from(e: SessionNotice) -> Self {
        Self::Session(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    ExerciseCompleted,
    ExerciseFailed,
    InputEnded,
    Stopped,
    Disconnected,
    Timeout,
    Fault,
}

impl EndReason {
    fn notice(self) -> Option<SessionNotice> {
        match self {
            Self::InputEnded => Some(SessionNotice::InputEnded),
            Self::Stopped => Some(SessionNotice::Stopped),
            Self::Disconnected => Some(SessionNotice::Disconnected),
            Self::Timeout => Some(SessionNotice::Timeout),
            _ => None,
        }
    }

    fn from_events(events: &[SessionEvent]) -> Option<Self> {
        events.iter().rev().find_map(|e| match e {
            SessionEvent::Script(ScriptEvent::ExerciseCompleted) => Some(Self::ExerciseCompleted),
            SessionEvent::Script(ScriptEvent::ExerciseFailed { .. }) => Some(Self::ExerciseFailed),
            SessionEvent::Session(SessionNotice::InputEnded) => Some(Self::InputEnded),
            SessionEvent::Session(SessionNotice::Stopped) => Some(Self::Stopped),
            SessionEvent::Session(SessionNotice::Disconnected) => Some(Self::Disconnected),
            SessionEvent::Session(SessionNotice::Timeout) => Some(Self::Timeout),
            SessionEvent::Session(SessionNotice::Fault { .. }) => Some(Self::Fault),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSnapshot {
    pub lq: u8,
    pub cumulative_lq: f64,
    pub rssi_dbm: i16,
    pub snr_db: i8,
    pub sent: u64,
    pub delivered: u64,
    pub crc_errors: u64,
    /// Receiver time of the most recent RC frame; 0 before the first one.
    pub last_arrival_ms: f64,
    pub failsafe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseProgress {
    pub name: String,
    pub step: usize,
    pub total: usize,
    pub status: ScriptStatus,
}

/// Live state published at the telemetry rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub t_ms: f64,
    pub quad: QuadSummary,
    pub channels: ChannelSet,
    pub arm: ArmMode,
    pub link: LinkSnapshot,
    pub exercise: Option<ExerciseProgress>,
}

/// Receives live output from a running session.
pub trait SessionSink {
    fn telemetry(&mut self, _frame: &Telemetry) {}
    fn event(&mut self, _t_ms: f64, _event: &SessionEvent) {}
}

impl SessionSink for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: u32,
    pub started_at_unix_ms: u64,
    pub config: SessionConfig,
    /// Snapshot of the course actually flown, so replays do not depend on
    /// files that may have changed since.
    pub course: CourseFile,
}

/// One row per controller sample, plus a final row when the session ends.
/// `quad` is the state at `t_ms`; `events` happened since the previous row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub t_ms: u64,
    pub input: Option<ControllerState>,
    /// Channels handed to the transmitter, absent when the input was silent.
    pub tx: Option<ChannelSet>,
    /// Channels the flight controller is acting on.
    pub fc: ChannelSet,
    pub arm: ArmMode,
    pub quad: QuadSummary,
    pub link: LinkSnapshot,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub header: RecordHeader,
    pub rows: Vec<RecordRow>,
}

impl SessionRecord {
    /// JSON lines: the header, then one line per row.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), SessionError> {
        let to_io = |e: serde_json::Error| SessionError::Record(e.to_string());
        serde_json::to_writer(&mut w, &self.header).map_err(to_io)?;
        w.write_all(b"\n")?;
        for row in &self.rows {
            serde_json::to_writer(&mut w, row).map_err(to_io)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, SessionError> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| SessionError::Record("empty record".into()))??;
        let header: RecordHeader = serde_json::from_str(&first)
            .map_err(|e| SessionError::Record(format!("header: {e}")))?;
        if header.format != SESSION_FORMAT {
            return Err(SessionError::Record(format!(
                "record format {} is not supported",
                header.format
            )));
        }
        let mut rows: Vec<RecordRow> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: RecordRow = serde_json::from_str(&line)
                .map_err(|e| SessionError::Record(format!("row {}: {e}", i + 1)))?;
            if rows.last().is_some_and(|prev| prev.t_ms >= row.t_ms) {
                return Err(SessionError::Record(format!(
                    "row {}: t_ms {} is not increasing",
                    i + 1,
                    row.t_ms
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        self.write_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.rows
            .last()
            .and_then(|r| EndReason::from_events(&r.events))
    }

    /// Time of the first row whose quad state differs bitwise, if any.
    pub fn first_divergence(&self, other: &SessionRecord) -> Option<u64> {
        let bits = |q: &QuadSummary| {
            let mut v: Vec<u64> = Vec::with_capacity(17);
            v.extend(q.position.iter().map(|x| x.to_bits()));
            v.extend(q.velocity.iter().map(|x| x.to_bits()));
            v.extend(q.attitude.iter().map(|x| x.to_bits()));
            v.extend(q.angular_velocity.iter().map(|x| x.to_bits()));
            v.push(q.time.to_bits());
            v.push(u64::from(q.armed));
            v
        };
        for (a, b) in self.rows.iter().zip(&other.rows) {
            if a.t_ms != b.t_ms || bits(&a.quad) != bits(&b.quad) {
                return Some(a.t_ms);
            }
        }
        if self.rows.len() != other.rows.len() {
            let shorter = self.rows.len().min(other.rows.len());
            let t = self.rows.get(shorter).or(other.rows.get(shorter));
            return Some(t.map_or(0, |r| r.t_ms));
        }
        None
    }

    pub fn summary(&self) -> RecordSummary {
        let mut s = RecordSummary {
            duration_ms: self.rows.last().map_or(0, |r| r.t_ms),
            rows: self.rows.len(),
            end_reason: self.end_reason(),
            exercise: self.header.config.course.exercise.clone(),
            ..Default::default()
        };
        for row in &self.rows {
            s.max_altitude_m = s.max_altitude_m.max(row.quad.position[2]);
            for e in &row.events {
                match e {
                    SessionEvent::Script(ScriptEvent::StepCompleted { .. }) => {
                        s.steps_completed += 1
                    }
                    SessionEvent::Script(ScriptEvent::GatePassed { .. }) => s.gates_passed += 1,
                    SessionEvent::Script(ScriptEvent::Collision { .. }) => s.collisions += 1,
                    SessionEvent::Session(SessionNotice::FailsafeEntered) => s.failsafes += 1,
                    _ => {}
                }
            }
        }
        if let Some(last) = self.rows.last() {
            s.final_position_m = last.quad.position;
            s.packets_sent = last.link.sent;
            s.packets_delivered = last.link.delivered;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RecordSummary {
    pub duration_ms: u64,
    pub rows: usize,
    pub end_reason: Option<EndReason>,
    pub exercise: Option<String>,
    pub steps_completed: usize,
    pub gates_passed: usize,
    pub collisions: usize,
    pub failsafes: usize,
    pub max_altitude_m: f64,
    pub final_position_m: [f64; 3],
    pub packets_sent: u64,
    pub packets_delivered: u64,
}

impl std::fmt::Display for RecordSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let reason = self
            .end_reason
            .map(|r| {
                serde_json::to_value(r)
                    .expect("enum")
                    .as_str()
                    .unwrap_or("")
                    .to_string()
            })
            .unwrap_or_else(|| "none".into());
        let [x, y, z] = self.final_position_m;
        writeln!(f, "duration_s      {:.2}", self.duration_ms as f64 / 1000.0)?;
        writeln!(f, "rows            {}", self.rows)?;
        writeln!(f, "end_reason      {reason}")?;
        writeln!(
            f,
            "exercise        {}",
            self.exercise.as_deref().unwrap_or("free flight")
        )?;
        writeln!(f, "steps_completed {}", self.steps_completed)?;
        writeln!(f, "gates_passed    {}", self.gates_passed)?;
        writeln!(f, "collisions      {}", self.collisions)?;
        writeln!(f, "failsafes       {}", self.failsafes)?;
        writeln!(f, "max_altitude_m  {:.3}", self.max_altitude_m)?;
        writeln!(f, "final_position  {x:.3} {y:.3} {z:.3}")?;
        let lq = if self.packets_sent == 0 {
            0.0
        } else {
            self.packets_delivered as f64 * 100.0 / self.packets_sent as f64
        };
        write!(
            f,
            "link            {}/{} delivered ({lq:.1} %)",
            self.packets_delivered, self.packets_sent
        )
    }
}

/// Idle receiver output before the first frame arrives: throttle low, disarmed.
fn idle_channels(cfg: &SessionConfig) -> ChannelSet {
    let mut set = ChannelSet::centered();
    set.set(cfg.controller.channel_order.index(Axis::Throttle), TICK_MIN)
        .expect("valid tick");
    set.set(ARM_CHANNEL, TICK_MIN).expect("valid tick");
    set
}

/// Single-threaded session loop. Call [`Session::run_period`] once per
/// controller sample until it reports an end reason.
#[derive(Debug, Clone)]
pub struct Session {
    header: RecordHeader,
    runner: Option<ScriptRunner>,
    mapper: MappingPipeline,
    link: SimLink,
    rx: CrsfParser,
    quad: QuadState,
    fc: ChannelSet,
    last_good: ChannelSet,
    last_arrival_ms: f64,
    failsafe_since_ms: Option<f64>,
    tx: Option<ChannelSet>,
    tick: u64,
    next_packet: u64,
    pending: Vec<SessionEvent>,
    rows: Vec<RecordRow>,
    ended: Option<EndReason>,
}

impl Session {
    pub fn new(cfg: SessionConfig, started_at_unix_ms: u64) -> Result<Self, SessionError> {
        let course = cfg.course.load()?;
        Self::with_course(cfg, course, started_at_unix_ms)
    }

    pub fn with_course(
        cfg: SessionConfig,
        course: CourseFile,
        started_at_unix_ms: u64,
    ) -> Result<Self, SessionError> {
        cfg.validate()?;
        let runner = match &cfg.course.exercise {
            Some(name) => Some(ScriptRunner::new(
                course.exercise(name)?.clone(),
                cfg.limits,
            )),
            None => None,
        };
        let idle = idle_channels(&cfg);
        Ok(Self {
            runner,
            mapper: MappingPipeline::new(cfg.mapping, cfg.calibration),
            link: SimLink::new(cfg.link)?,
            rx: CrsfParser::new(),
            quad: QuadState::at_rest(Vector3::from(course.course.start)),
            fc: idle,
            last_good: idle,
            last_arrival_ms: 0.0,
            failsafe_since_ms: None,
            tx: None,
            tick: 0,
            next_packet: 0,
            pending: vec![SessionNotice::Started.into()],
            rows: Vec::new(),
            ended: None,
            header: RecordHeader {
                format: SESSION_FORMAT,
                started_at_unix_ms,
                config: cfg,
                course,
            },
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.header.config
    }

    pub fn course(&self) -> &CourseFile {
        &self.header.course
    }

    pub fn quad(&self) -> &QuadState {
        &self.quad
    }

    pub fn ended(&self) -> Option<EndReason> {
        self.ended
    }

    /// Virtual time of the next controller sample.
    pub fn t_ms(&self) -> u64 {
        self.tick / self.config().ticks_per_sample() * self.config().sample_period_ms()
    }

    pub fn sample_period_ms(&self) -> u64 {
        self.config().sample_period_ms()
    }

    fn tick_time_ms(&self, tick: u64) -> f64 {
        tick as f64 * 1000.0 / f64::from(self.config().sim_rate)
    }

    pub fn link_snapshot(&self) -> LinkSnapshot {
        let stats = self.link.stats();
        LinkSnapshot {
            lq: stats.lq(),
            cumulative_lq: stats.cumulative_lq(),
            rssi_dbm: stats.simulated_rssi_dbm(),
            snr_db: stats.simulated_snr_db(),
            sent: stats.total_sent,
            delivered: stats.total_delivered,
            crc_errors: self.rx.stats().crc_error_count,
            last_arrival_ms: self.last_arrival_ms,
            failsafe: self.failsafe_since_ms.is_some(),
        }
    }

    fn exercise_progress(&self) -> Option<ExerciseProgress> {
        self.runner.as_ref().map(|r| ExerciseProgress {
            name: r.exercise().name.clone(),
            step: r.current_step(),
            total: r.exercise().steps.len(),
            status: r.status(),
        })
    }

    fn emit(&mut self, t_ms: f64, event: SessionEvent, sink: &mut dyn SessionSink) {
        sink.event(t_ms, &event);
        self.pending.push(event);
    }

    fn push_row(&mut self, t_ms: u64, input: Option<ControllerState>) {
        let row = RecordRow {
            t_ms,
            input,
            tx: input.and(self.tx),
            fc: self.fc,
            arm: self.mapper.arming().mode,
            quad: self.quad.summary(),
            link: self.link_snapshot(),
            events: std::mem::take(&mut self.pending),
        };
        self.rows.push(row);
    }

    fn finish_with(&mut self, reason: EndReason, t_ms: u64, sink: &mut dyn SessionSink) {
        if let Some(notice) = reason.notice() {
            self.emit(t_ms as f64, notice.into(), sink);
        }
        self.ended = Some(reason);
        self.tx = None;
        self.push_row(t_ms, None);
    }

    /// Samples the input once, then advances the simulation by one controller
    /// period. Returns the end reason once the session is over.
    pub fn run_period(
        &mut self,
        source: &mut dyn InputSource,
        sink: &mut dyn SessionSink,
    ) -> Option<EndReason> {
        if self.ended.is_some() {
            return self.ended;
        }
        let t = self.t_ms();
        let link_ok = self.failsafe_since_ms.is_none();
        let input = match source.next(t, &self.quad.summary()) {
            InputEvent::Sample(mut state) => {
                state.timestamp_ms = t;
                self.tx = Some(self.mapper.update(&state, link_ok));
                Some(state)
            }
            InputEvent::Silent => {
                self.tx = None;
                None
            }
            InputEvent::End => {
                self.finish_with(EndReason::InputEnded, t, sink);
                return self.ended;
            }
            InputEvent::Stop => {
                self.finish_with(EndReason::Stopped, t, sink);
                return self.ended;
            }
            InputEvent::Disconnect => {
                self.finish_with(EndReason::Disconnected, t, sink);
                return self.ended;
            }
        };
        self.push_row(t, input);

        let mut outcome = None;
        for _ in 0..self.config().ticks_per_sample() {
            if let Err(e) = self.tick(sink) {
                let message = e.to_string();
                self.emit(
                    self.tick_time_ms(self.tick),
                    SessionNotice::Fault { message }.into(),
                    sink,
                );
                outcome = Some(EndReason::Fault);
                break;
            }
            match self.runner.as_ref().map(ScriptRunner::status) {
                Some(ScriptStatus::Completed) => {
                    outcome = outcome.or(Some(EndReason::ExerciseCompleted))
                }
                Some(ScriptStatus::Failed) => outcome = outcome.or(Some(EndReason::ExerciseFailed)),
                _ => {}
            }
        }
        let t_next = self.t_ms();
        if outcome.is_none() && t_next as f64 >= self.config().max_duration_s * 1000.0 {
            outcome = Some(EndReason::Timeout);
        }
        if let Some(reason) = outcome {
            self.finish_with(reason, t_next.max(t + 1), sink);
        }
        self.ended
    }

    fn tick(&mut self, sink: &mut dyn SessionSink) -> Result<(), DynamicsError> {
        let cfg = self.header.config.clone();
        let t0 = self.tick_time_ms(self.tick);
        let t1 = self.tick_time_ms(self.tick + 1);
        let dt = 1.0 / f64::from(cfg.sim_rate);

        // Receiver side: frames that have arrived by now.
        for (arrival, bytes) in self.link.poll(t0) {
            for frame in self.rx.feed(&bytes) {
                if let Ok(Packet::RcChannels(set)) = frame.decode() {
                    self.last_good = set;
                    self.last_arrival_ms = arrival;
                    if self.failsafe_since_ms.take().is_some() {
                        self.emit(t0, SessionNotice::FailsafeCleared.into(), sink);
                    }
                }
            }
        }
        if self.failsafe_since_ms.is_none() && check_failsafe(self.last_arrival_ms, t0, &cfg.link) {
            self.failsafe_since_ms = Some(t0);
            self.emit(t0, SessionNotice::FailsafeEntered.into(), sink);
        }
        self.fc = match self.failsafe_since_ms {
            Some(since) => failsafe_channels(
                &self.last_good,
                cfg.controller.channel_order,
                (t0 - since) / 1000.0,
                &cfg.failsafe,
            ),
            None => self.last_good,
        };

        let was_armed = self.quad.armed;
        self.quad = step(&self.quad, &self.fc, &cfg.quad, &cfg.controller, dt)?;
        if self.quad.armed != was_armed {
            let notice = if self.quad.armed {
                SessionNotice::Armed
            } else {
                SessionNotice::Disarmed
            };
            self.emit(t1, notice.into(), sink);
        }

        if let Some(runner) = self.runner.as_mut() {
            let events = runner.advance(&self.header.course.course, &self.quad, dt);
            for e in events {
                self.emit(t1, e.into(), sink);
            }
        }

        // Transmitter side: packets due in this tick carry the latest channels.
        let interval = cfg.link.packet_rate.interval_ms();
        loop {
            let t_packet = self.next_packet as f64 * interval;
            if t_packet >= t1 {
                break;
            }
            if let Some(tx) = self.tx {
                self.link.send(encode_rc_frame(&tx).to_vec(), t_packet);
            }
            self.next_packet += 1;
        }

        let (sr, tr) = (u64::from(cfg.sim_rate), u64::from(cfg.telemetry_rate));
        self.tick += 1;
        if self.tick * tr / sr > (self.tick - 1) * tr / sr {
            let frame = Telemetry {
                t_ms: t1,
                quad: self.quad.summary(),
                channels: self.fc,
                arm: self.mapper.arming().mode,
                link: self.link_snapshot(),
                exercise: self.exercise_progress(),
            };
            sink.telemetry(&frame);
        }
        Ok(())
    }

    /// Ends the session now, as if the input source had asked to stop.
    pub fn stop(&mut self, sink: &mut dyn SessionSink) {
        if self.ended.is_none() {
            let t = self.t_ms();
            self.finish_with(EndReason::Stopped, t, sink);
        }
    }

    /// Copy of everything recorded so far.
    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            header: self.header.clone(),
            rows: self.rows.clone(),
        }
    }

    pub fn into_record(self) -> SessionRecord {
        SessionRecord {
            header: self.header,
            rows: self.rows,
        }
    }
}

pub fn unix_time_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Runs a whole session as fast as possible.
pub fn run_session(
    cfg: SessionConfig,
    source: &mut dyn InputSource,
    sink: &mut dyn SessionSink,
) -> Result<SessionRecord, SessionError> {
    let mut session = Session::new(cfg, unix_time_ms())?;
    while session.run_period(source, sink).is_none() {}
    Ok(session.into_record())
}

/// Re-runs a recorded session from its own header and inputs.
pub fn replay(
    record: &SessionRecord,
    sink: &mut dyn SessionSink,
) -> Result<SessionRecord, SessionError> {
    let mut session = Session::with_course(
        record.header.config.clone(),
        record.header.course.clone(),
        record.header.started_at_unix_ms,
    )?;
    let mut source = ReplayInput::new(record);
    while session.run_period(&mut source, sink).is_none() {}
    Ok(session.into_record())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cfg() -> SessionConfig {
        SessionConfig {
            max_duration_s: 2.0,
            ..Default::default()
        }
    }

    #[derive(Default)]
    struct Collect {
        telemetry: Vec<Telemetry>,
        events: Vec<(f64, SessionEvent)>,
    }

    impl SessionSink for Collect {
        fn telemetry(&mut self, frame: &Telemetry) {
            self.telemetry.push(frame.clone());
        }
        fn event(&mut self, t: f64, e: &SessionEvent) {
            self.events.push((t, e.clone()));
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = SessionConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.sim_rate, 1000);
        assert_eq!(cfg.telemetry_rate, 60);
        let bad = SessionConfig {
            telemetry_rate: 2000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SessionConfig {
            controller_rate: 30,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let mut bad = SessionConfig::default();
        bad.controller.channel_order = crate::mapping::ChannelOrder::Taer;
        assert!(bad.validate().is_err());
        let parsed =
            SessionConfig::from_toml_str("sim_rate = 500\n[link]\npacket_rate = 150\n").unwrap();
        assert_eq!(parsed.sim_rate, 500);
        assert!(SessionConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn silent_input_enters_failsafe_after_timeout_plus_one_tick() {
        let mut sink = Collect::default();
        let rec = run_session(short_cfg(), &mut SilentInput, &mut sink).unwrap();
        let t = sink
            .events
            .iter()
            .find(|(_, e)| *e == SessionNotice::FailsafeEntered.into())
            .map(|(t, _)| *t)
            .expect("failsafe event");
        let timeout = short_cfg().link.failsafe_timeout_ms;
        assert!(t > timeout && t <= timeout + 1.0, "{t}");
        assert_eq!(rec.end_reason(), Some(EndReason::Timeout));
    }

    #[test]
    fn telemetry_count_follows_rate() {
        let mut sink = Collect::default();
        run_session(short_cfg(), &mut SilentInput, &mut sink).unwrap();
        // 2 s at 60 Hz.
        assert!(
            (sink.telemetry.len() as i64 - 120).abs() <= 1,
            "{}",
            sink.telemetry.len()
        );
    }

    #[test]
    fn rows_strictly_increase_and_end_with_reason() {
        let rec = run_session(short_cfg(), &mut SilentInput, &mut ()).unwrap();
        assert!(rec.rows.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
        assert_eq!(rec.rows.len(), 201);
        assert_eq!(rec.rows[0].events, vec![SessionNotice::Started.into()]);
        assert!(rec
            .rows
            .last()
            .unwrap()
            .events
            .contains(&SessionNotice::Timeout.into()));
    }

    #[test]
    fn input_end_finishes_at_sample_time() {
        let mut n = 0;
        let mut source = |_t: u64, _v: &QuadSummary| {
            n += 1;
            if n > 5 {
                InputEvent::End
            } else {
                InputEvent::Sample(ControllerState::default())
            }
        };
        let rec = run_session(short_cfg(), &mut source, &mut ()).unwrap();
        assert_eq!(rec.rows.len(), 6);
        assert_eq!(rec.rows.last().unwrap().t_ms, 50);
        assert_eq!(rec.end_reason(), Some(EndReason::InputEnded));
    }

    #[test]
    fn event_serialization_shapes() {
        let e: SessionEvent = ScriptEvent::GatePassed { index: 0 }.into();
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"event":"gate_passed","index":0}"#
        );
        let e: SessionEvent = SessionNotice::FailsafeEntered.into();
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"{"event":"failsafe_entered"}"#);
        assert_eq!(serde_json::from_str::<SessionEvent>(&text).unwrap(), e);
    }

    #[test]
    fn persistence_round_trip_is_byte_identical() {
        let rec = run_session(short_cfg(), &mut SilentInput, &mut ()).unwrap();
        let bytes = rec.to_jsonl();
        let back = SessionRecord::read_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_jsonl(), bytes);
    }

    #[test]
    fn record_rejects_non_increasing_rows() {
        let rec = run_session(short_cfg(), &mut SilentInput, &mut ()).unwrap();
        let text = String::from_utf8(rec.to_jsonl()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 3);
        assert!(SessionRecord::read_jsonl(lines.join("\n").as_bytes()).is_err());
    }
}
