//! Messages exchanged with session clients: one JSON object per line, tagged
//! by `type`. See `docs/protocol.md`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{EndReason, SessionConfig, SessionEvent, Telemetry};
use crate::mapping::ControllerState;

pub const PROTOCOL_FORMAT: u32 = 1;
pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        format: u32,
        /// Session to join; created on first use.
        #[serde(default)]
        session: Option<String>,
        #[serde(default)]
        client: Option<String>,
    },
    Configure {
        config: Box<SessionConfig>,
    },
    ControlInput {
        state: ControllerState,
    },
    Start,
    Stop,
    ListCourses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pilot,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    VersionMismatch,
    HelloRequired,
    NotPilot,
    AlreadyRunning,
    NotRunning,
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseInfo {
    pub name: String,
    /// Server-side file; absent for the built-in course.
    pub file: Option<PathBuf>,
    pub exercises: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    HelloAck {
        format: u32,
        session: String,
        role: Role,
        capabilities: Vec<String>,
        telemetry_rate: u32,
    },
    Ack {
        request: String,
    },
    Telemetry {
        session: String,
        #[serde(flatten)]
        frame: Box<Telemetry>,
    },
    Event {
        session: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_ms: Option<f64>,
        event: SessionEvent,
    },
    Ended {
        session: String,
        reason: EndReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record: Option<PathBuf>,
    },
    Courses {
        courses: Vec<CourseInfo>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

pub const CAPABILITIES: &[&str] = &[
    "configure",
    "control_input",
    "start",
    "stop",
    "list_courses",
    "telemetry",
    "events",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        let m: ClientMessage = serde_json::from_str(r#"{"type":"hello","format":1}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::Hello {
                format: 1,
                session: None,
                client: None
            }
        );
        let m: ClientMessage = serde_json::from_str(
            r#"{"type":"control_input","state":{"trigger":0.5,"tilt_pitch":1,"tilt_roll":0,"thumbstick_x":0,"arm_button":false,"timestamp_ms":0}}"#,
        )
        .unwrap();
        assert!(matches!(m, ClientMessage::ControlInput { .. }));
        let m: ClientMessage =
            serde_json::from_str(r#"{"type":"configure","config":{"telemetry_rate":30}}"#).unwrap();
        match m {
            ClientMessage::Configure { config } => assert_eq!(config.telemetry_rate, 30),
            other => panic!("{other:?}"),
        }
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"launch"}"#).is_err());
    }

    #[test]
    fn error_shape() {
        let m = ServerMessage::Error {
            code: ErrorCode::VersionMismatch,
            message: "x".into(),
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"type":"error","code":"version_mismatch","message":"x"}"#
        );
    }
}
