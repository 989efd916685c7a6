use std::collections::BTreeMap;

use crate::dynamics::QuadSummary;
use crate::mapping::ControllerState;

use super::{EndReason, SessionRecord};

/// What the input source produced at one controller sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputEvent {
    Sample(ControllerState),
    /// No controller reading: the transmitter stays quiet this period.
    Silent,
    End,
    Stop,
    Disconnect,
}

/// Supplies controller samples. `view` is the simulated vehicle as the pilot
/// would see it; recorded and live sources ignore it.
pub trait InputSource {
    fn next(&mut self, t_ms: u64, view: &QuadSummary) -> InputEvent;
}

impl<F: FnMut(u64, &QuadSummary) -> InputEvent> InputSource for F {
    fn next(&mut self, t_ms: u64, view: &QuadSummary) -> InputEvent {
        self(t_ms, view)
    }
}

/// Never produces a sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct SilentInput;

impl InputSource for SilentInput {
    fn next(&mut self, _t_ms: u64, _view: &QuadSummary) -> InputEvent {
        InputEvent::Silent
    }
}

/// Plays back the inputs stored in a session record.
#[derive(Debug, Clone)]
pub struct ReplayInput {
    samples: BTreeMap<u64, Option<ControllerState>>,
    end_at: Option<(u64, InputEvent)>,
}

impl ReplayInput {
    pub fn new(record: &SessionRecord) -> Self {
        let mut samples: BTreeMap<u64, Option<ControllerState>> =
            record.rows.iter().map(|r| (r.t_ms, r.input)).collect();
        let end_at = record.rows.last().and_then(|last| {
            let ev = match record.end_reason()? {
                EndReason::InputEnded => InputEvent::End,
                EndReason::Stopped => InputEvent::Stop,
                EndReason::Disconnected => InputEvent::Disconnect,
                _ => return None,
            };
            samples.remove(&last.t_ms);
            Some((last.t_ms, ev))
        });
        Self { samples, end_at }
    }
}

impl InputSource for ReplayInput {
    fn next(&mut self, t_ms: u64, _view: &QuadSummary) -> InputEvent {
        if let Some((t_end, ev)) = self.end_at {
            if t_ms >= t_end {
                return ev;
            }
        }
        match self.samples.get(&t_ms) {
            Some(Some(state)) => InputEvent::Sample(*state),
            Some(None) => InputEvent::Silent,
            None => InputEvent::End,
        }
    }
}
