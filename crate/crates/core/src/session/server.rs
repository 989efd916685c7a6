use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};

use super::protocol::{
    ClientMessage, CourseInfo, ErrorCode, Role, ServerMessage, CAPABILITIES, DEFAULT_SESSION,
    PROTOCOL_FORMAT,
};
use super::{
    unix_time_ms, InputEvent, InputSource, Session, SessionConfig, SessionEvent, SessionNotice,
    SessionSink, Telemetry,
};
use crate::course::CourseFile;
use crate::dynamics::QuadSummary;
use crate::mapping::ControllerState;

/// Per-client backlog of telemetry/events before old frames are dropped.
const FANOUT_CAPACITY: usize = 64;
/// A pilot input older than this is treated as no input.
const INPUT_STALE: Duration = Duration::from_millis(250);
const MAX_LINE: usize = 1 << 20;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Starting configuration for new sessions.
    pub base_config: SessionConfig,
    /// Extra course files offered to clients.
    pub course_dir: Option<PathBuf>,
    /// Where finished session records are written.
    pub record_dir: Option<PathBuf>,
}

enum Control {
    Stop,
    Disconnect,
}

struct SlotState {
    pilot: Option<u64>,
    config: SessionConfig,
    control: Option<mpsc::UnboundedSender<Control>>,
}

struct Slot {
    name: String,
    state: Mutex<SlotState>,
    out: broadcast::Sender<ServerMessage>,
    input: watch::Sender<Option<(ControllerState, Instant)>>,
}

struct Hub {
    opts: ServeOptions,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_conn: AtomicU64,
}

impl Hub {
    fn slot(&self, name: &str) -> Arc<Slot> {
        let mut sessions = self.sessions.lock().expect("hub lock");
        sessions
            .entry(name.to_string())
            .or_insert_with(|| {
                Arc::new(Slot {
                    name: name.to_string(),
                    state: Mutex::new(SlotState {
                        pilot: None,
                        config: self.opts.base_config.clone(),
                        control: None,
                    }),
                    out: broadcast::channel(FANOUT_CAPACITY).0,
                    input: watch::channel(None).0,
                })
            })
            .clone()
    }

    fn courses(&self) -> Vec<CourseInfo> {
        let names = |f: &CourseFile| f.exercises.iter().map(|e| e.name.clone()).collect();
        let builtin = CourseFile::paper_track();
        let mut out = vec![CourseInfo {
            name: builtin.course.name.clone(),
            file: None,
            exercises: names(&builtin),
        }];
        if let Some(dir) = &self.opts.course_dir {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .into_iter()
                .flatten()
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            paths.sort();
            for path in paths {
                if let Ok(file) = CourseFile::load(&path) {
                    out.push(CourseInfo {
                        name: file.course.name.clone(),
                        exercises: names(&file),
                        file: Some(path),
                    });
                }
            }
        }
        out
    }
}

/// Accepts clients until the listener fails.
pub async fn serve(listener: TcpListener, opts: ServeOptions) -> std::io::Result<()> {
    let hub = Arc::new(Hub {
        opts,
        sessions: Mutex::new(HashMap::new()),
        next_conn: AtomicU64::new(1),
    });
    loop {
        let (stream, peer) = listener.accept().await?;
        let hub = hub.clone();
        tokio::spawn(async move {
            if let Err(e) = handle_client(stream, hub).await {
                eprintln!("client {peer}: {e}");
            }
        });
    }
}

enum WriterCmd {
    Send(ServerMessage),
    Subscribe(broadcast::Receiver<ServerMessage>),
    Close,
}

async fn write_message(
    w: &mut (impl AsyncWriteExt + Unpin),
    msg: &ServerMessage,
) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(msg).map_err(std::io::Error::other)?;
    line.push(b'\n');
    w.write_all(&line).await
}

/// Sends direct replies plus the session fan-out. A slow client lags the
/// broadcast and loses frames; the session loop never waits on it.
async fn writer_task(
    mut w: impl AsyncWriteExt + Unpin,
    mut cmds: mpsc::UnboundedReceiver<WriterCmd>,
) {
    let mut fanout: Option<broadcast::Receiver<ServerMessage>> = None;
    loop {
        let msg = tokio::select! {
            cmd = cmds.recv() => match cmd {
                Some(WriterCmd::Send(m)) => m,
                Some(WriterCmd::Subscribe(rx)) => {
                    fanout = Some(rx);
                    continue;
                }
                Some(WriterCmd::Close) | None => break,
            },
            r = async {
                match fanout.as_mut() {
                    Some(rx) => rx.recv().await,
                    None => std::future::pending().await,
                }
            } => match r {
                Ok(m) => m,
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => {
                    fanout = None;
                    continue;
                }
            },
        };
        if write_message(&mut w, &msg).await.is_err() {
            break;
        }
    }
    let _ = w.shutdown().await;
}

struct Member {
    id: u64,
    slot: Arc<Slot>,
    role: Role,
}

async fn handle_client(stream: TcpStream, hub: Arc<Hub>) -> std::io::Result<()> {
    let id = hub.next_conn.fetch_add(1, Ordering::Relaxed);
    let (r, w) = stream.into_split();
    let (tx, rx) = mpsc::unbounded_channel();
    let writer = tokio::spawn(writer_task(w, rx));
    let send = |m: ServerMessage| {
        let _ = tx.send(WriterCmd::Send(m));
    };
    let error = |code: ErrorCode, message: String| ServerMessage::Error { code, message };

    let mut reader = BufReader::new(r);
    let mut member: Option<Member> = None;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).await?;
        if n == 0 {
            break;
        }
        if line.len() > MAX_LINE {
            send(error(ErrorCode::Malformed, "line too long".into()));
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let msg: ClientMessage = match serde_json::from_str(line.trim()) {
            Ok(m) => m,
            Err(e) => {
                send(error(ErrorCode::Malformed, e.to_string()));
                continue;
            }
        };
        if let ClientMessage::Hello {
            format, session, ..
        } = &msg
        {
            if *format != PROTOCOL_FORMAT {
                send(error(
                    ErrorCode::VersionMismatch,
                    format!(
                        "protocol format {format} not supported; server speaks {PROTOCOL_FORMAT}"
                    ),
                ));
                break;
            }
            if member.is_some() {
                send(error(ErrorCode::Malformed, "already greeted".into()));
                continue;
            }
            let slot = hub.slot(session.as_deref().unwrap_or(DEFAULT_SESSION));
            let (role, telemetry_rate) = {
                let mut st = slot.state.lock().expect("slot lock");
                let role = if st.pilot.is_none() {
                    st.pilot = Some(id);
                    Role::Pilot
                } else {
                    Role::Observer
                };
                (role, st.config.telemetry_rate)
            };
            let _ = tx.send(WriterCmd::Subscribe(slot.out.subscribe()));
            send(ServerMessage::HelloAck {
                format: PROTOCOL_FORMAT,
                session: slot.name.clone(),
                role,
                capabilities: CAPABILITIES.iter().map(|s| s.to_string()).collect(),
                telemetry_rate,
            });
            member = Some(Member { id, slot, role });
            continue;
        }
        let Some(m) = member.as_ref() else {
            send(error(ErrorCode::HelloRequired, "send hello first".into()));
            continue;
        };
        if let ClientMessage::ListCourses = msg {
            send(ServerMessage::Courses {
                courses: hub.courses(),
            });
            continue;
        }
        if m.role != Role::Pilot {
            send(error(
                ErrorCode::NotPilot,
                "observers cannot control the session".into(),
            ));
            continue;
        }
        match msg {
            ClientMessage::Configure { config } => {
                let reply = configure(&hub, &m.slot, *config);
                send(reply);
            }
            ClientMessage::ControlInput { state } => {
                let running = m.slot.state.lock().expect("slot lock").control.is_some();
                if running {
                    m.slot.input.send_replace(Some((state, Instant::now())));
                } else {
                    send(ServerMessage::Event {
                        session: m.slot.name.clone(),
                        t_ms: None,
                        event: SessionNotice::Warning {
                            message: "control_input ignored: session not started".into(),
                        }
                        .into(),
                    });
                }
            }
            ClientMessage::Start => send(start(&hub, &m.slot)),
            ClientMessage::Stop => {
                let st = m.slot.state.lock().expect("slot lock");
                match &st.control {
                    Some(c) => {
                        let _ = c.send(Control::Stop);
                        send(ServerMessage::Ack {
                            request: "stop".into(),
                        });
                    }
                    None => send(error(ErrorCode::NotRunning, "no session running".into())),
                }
            }
            ClientMessage::Hello { .. } | ClientMessage::ListCourses => unreachable!(),
        }
    }

    if let Some(m) = member {
        let mut st = m.slot.state.lock().expect("slot lock");
        if st.pilot == Some(m.id) {
            st.pilot = None;
            if let Some(c) = &st.control {
                let _ = c.send(Control::Disconnect);
            }
        }
    }
    let _ = tx.send(WriterCmd::Close);
    let _ = writer.await;
    Ok(())
}

fn configure(hub: &Hub, slot: &Slot, config: SessionConfig) -> ServerMessage {
    let invalid = |message: String| ServerMessage::Error {
        code: ErrorCode::InvalidConfig,
        message,
    };
    if let Err(e) = config.validate() {
        return invalid(e.to_string());
    }
    if let Some(file) = &config.course.file {
        let offered = hub.courses().iter().any(|c| c.file.as_ref() == Some(file));
        if !offered {
            return invalid(format!(
                "course file {} is not offered by this server",
                file.display()
            ));
        }
    }
    if let Err(e) = config.course.load() {
        return invalid(e.to_string());
    }
    let mut st = slot.state.lock().expect("slot lock");
    if st.control.is_some() {
        return ServerMessage::Error {
            code: ErrorCode::AlreadyRunning,
            message: "stop the session before reconfiguring".into(),
        };
    }
    st.config = config;
    ServerMessage::Ack {
        request: "configure".into(),
    }
}

fn start(hub: &Arc<Hub>, slot: &Arc<Slot>) -> ServerMessage {
    let mut st = slot.state.lock().expect("slot lock");
    if st.control.is_some() {
        return ServerMessage::Error {
            code: ErrorCode::AlreadyRunning,
            message: "session already running".into(),
        };
    }
    let session = match Session::new(st.config.clone(), unix_time_ms()) {
        Ok(s) => s,
        Err(e) => {
            return ServerMessage::Error {
                code: ErrorCode::InvalidConfig,
                message: e.to_string(),
            }
        }
    };
    let (ctl_tx, ctl_rx) = mpsc::unbounded_channel();
    st.control = Some(ctl_tx);
    slot.input.send_replace(None);
    tokio::spawn(run_live(
        session,
        slot.clone(),
        hub.opts.record_dir.clone(),
        ctl_rx,
    ));
    ServerMessage::Ack {
        request: "start".into(),
    }
}

struct LiveInput {
    input: watch::Receiver<Option<(ControllerState, Instant)>>,
    control: mpsc::UnboundedReceiver<Control>,
}

impl InputSource for LiveInput {
    fn next(&mut self, _t_ms: u64, _view: &QuadSummary) -> InputEvent {
        match self.control.try_recv() {
            Ok(Control::Stop) => return InputEvent::Stop,
            Ok(Control::Disconnect) => return InputEvent::Disconnect,
            Err(_) => {}
        }
        match *self.input.borrow() {
            Some((state, at)) if at.elapsed() <= INPUT_STALE => InputEvent::Sample(state),
            _ => InputEvent::Silent,
        }
    }
}

struct Fanout {
    session: String,
    out: broadcast::Sender<ServerMessage>,
}

impl SessionSink for Fanout {
    fn telemetry(&mut self, frame: &Telemetry) {
        let _ = self.out.send(ServerMessage::Telemetry {
            session: self.session.clone(),
            frame: Box::new(frame.clone()),
        });
    }

    fn event(&mut self, t_ms: f64, event: &SessionEvent) {
        let _ = self.out.send(ServerMessage::Event {
            session: self.session.clone(),
            t_ms: Some(t_ms),
            event: event.clone(),
        });
    }
}

/// Session loop paced to wall-clock time, one controller period per tick.
async fn run_live(
    mut session: Session,
    slot: Arc<Slot>,
    record_dir: Option<PathBuf>,
    control: mpsc::UnboundedReceiver<Control>,
) {
    let mut source = LiveInput {
        input: slot.input.subscribe(),
        control,
    };
    let mut sink = Fanout {
        session: slot.name.clone(),
        out: slot.out.clone(),
    };
    let mut interval = tokio::time::interval(Duration::from_millis(session.sample_period_ms()));
    let reason = loop {
        interval.tick().await;
        if let Some(reason) = session.run_period(&mut source, &mut sink) {
            break reason;
        }
    };
    let record = session.into_record();
    let path = record_dir.and_then(|dir| {
        let safe: String = slot
            .name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{safe}-{}.jsonl", record.header.started_at_unix_ms));
        match record.save(&path) {
            Ok(()) => Some(path),
            Err(e) => {
                eprintln!("saving record {}: {e}", path.display());
                None
            }
        }
    });
    slot.state.lock().expect("slot lock").control = None;
    let _ = slot.out.send(ServerMessage::Ended {
        session: slot.name.clone(),
        reason,
        record: path,
    });
}
