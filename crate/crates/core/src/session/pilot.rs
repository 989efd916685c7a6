use crate::course::{CourseFile, Exercise, ExerciseStep, YawDirection};
use crate::dynamics::{trim_hover, QuadSummary};
use crate::mapping::ControllerState;

use super::{InputEvent, InputSource, SessionConfig, SessionError};

const CRUISE_ALTITUDE: f64 = 1.0;
const GATE_APPROACH: f64 = 0.8;
const MAX_ACCEL: f64 = 3.0;
const DESCENT_RATE: f64 = 0.4;
const TURN_RATE_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Maneuver {
    Arm,
    Hold {
        z: f64,
        tolerance: f64,
        duration: f64,
    },
    Goto {
        xy: [f64; 2],
        z: f64,
        tolerance: f64,
    },
    Rotate {
        degrees: f64,
        direction: YawDirection,
    },
    Descend,
    Idle,
}

/// Closed-loop stand-in for a human pilot. It watches the simulated vehicle,
/// flies an exercise with simple position control, and expresses its
/// commands as handheld-controller readings (tilt, trigger, thumbstick).
#[derive(Debug, Clone)]
pub struct AutoPilot {
    plan: Vec<Maneuver>,
    index: usize,
    cfg: SessionConfig,
    hover: f64,
    started_ms: Option<u64>,
    last_t_ms: Option<u64>,
    timer: f64,
    anchor: Option<[f64; 3]>,
    yaw_ref: f64,
    yaw_turned: f64,
    prev_yaw: Option<f64>,
}

fn yaw_of(q: &[f64; 4]) -> f64 {
    let [w, x, y, z] = *q;
    (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Controller deflection that the shaping curve maps onto `target`.
fn unshape(target: f64, deadzone: f64, expo: f64) -> f64 {
    let s = target.abs().min(1.0);
    if s == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (1.0 - expo) * mid + expo * mid * mid * mid < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    target.signum() * (deadzone + hi * (1.0 - deadzone))
}

impl AutoPilot {
    pub fn new(
        cfg: &SessionConfig,
        course: &CourseFile,
        exercise: &Exercise,
    ) -> Result<Self, SessionError> {
        let hover = trim_hover(&cfg.quad)?;
        let mut plan = vec![Maneuver::Arm];
        let mut z = CRUISE_ALTITUDE;
        let pad = course.course.landing_pad;
        for step in &exercise.steps {
            match *step {
                ExerciseStep::HoldAltitude {
                    z: target,
                    tolerance,
                    duration,
                } => {
                    z = target;
                    plan.push(Maneuver::Hold {
                        z,
                        tolerance: tolerance * 0.5,
                        duration: duration + 0.3,
                    });
                }
                ExerciseStep::TranslateTo { xy, tolerance } => plan.push(Maneuver::Goto {
                    xy,
                    z,
                    tolerance: tolerance * 0.5,
                }),
                ExerciseStep::RotateYaw { degrees, direction } => plan.push(Maneuver::Rotate {
                    degrees: degrees + 10.0,
                    direction,
                }),
                ExerciseStep::PassGate { index } => {
                    let g = course.course.gates[index];
                    z = g.center[2];
                    let along =
                        |d: f64| [g.center[0] + d * g.normal[0], g.center[1] + d * g.normal[1]];
                    plan.push(Maneuver::Goto {
                        xy: along(-GATE_APPROACH),
                        z,
                        tolerance: 0.1,
                    });
                    plan.push(Maneuver::Goto {
                        xy: along(GATE_APPROACH),
                        z,
                        tolerance: 0.15,
                    });
                }
                ExerciseStep::Land => {
                    plan.push(Maneuver::Goto {
                        xy: pad.center_xy,
                        z,
                        tolerance: 0.08,
                    });
                    plan.push(Maneuver::Descend);
                }
            }
        }
        plan.push(Maneuver::Idle);
        Ok(Self {
            plan,
            index: 0,
            cfg: cfg.clone(),
            hover,
            started_ms: None,
            last_t_ms: None,
            timer: 0.0,
            anchor: None,
            yaw_ref: 0.0,
            yaw_turned: 0.0,
            prev_yaw: None,
        })
    }

    fn advance_plan(&mut self) {
        self.index = (self.index + 1).min(self.plan.len() - 1);
        self.timer = 0.0;
        self.anchor = None;
        self.yaw_turned = 0.0;
    }

    /// Controller reading that asks for the given attitude, yaw rate and
    /// thrust fraction.
    fn to_controller(
        &self,
        roll_deg: f64,
        pitch_deg: f64,
        yaw_rate_cw: f64,
        thrust: f64,
    ) -> ControllerState {
        let m = &self.cfg.mapping;
        let tilt_max = self.cfg.quad.max_tilt_cmd_deg;
        let flip = |inv: bool, v: f64| if inv { -v } else { v };
        let pitch = unshape(pitch_deg / tilt_max, m.deadzone, m.expo.pitch) * m.max_tilt_deg;
        let roll = unshape(roll_deg / tilt_max, m.deadzone, m.expo.roll) * m.max_tilt_deg;
        let yaw = unshape(
            yaw_rate_cw / self.cfg.controller.yaw_rate_max_deg,
            m.deadzone,
            m.expo.yaw,
        );
        let thrust = thrust.clamp(0.0, 1.0);
        ControllerState {
            trigger: if m.invert.throttle {
                1.0 - thrust
            } else {
                thrust
            },
            tilt_pitch: flip(m.invert.pitch, pitch) + self.cfg.calibration.pitch,
            tilt_roll: flip(m.invert.roll, roll) + self.cfg.calibration.roll,
            thumbstick_x: flip(m.invert.yaw, yaw),
            arm_button: false,
            timestamp_ms: 0,
        }
    }

    /// Position and heading hold toward `target`, with an optional yaw rate
    /// override (clockwise positive, deg/s).
    fn fly_to(
        &self,
        view: &QuadSummary,
        target: [f64; 3],
        vz_ref: Option<f64>,
        yaw_override: Option<f64>,
    ) -> ControllerState {
        let g = self.cfg.quad.gravity;
        let [x, y, z] = view.position;
        let [vx, vy, vz] = view.velocity;
        let yaw = yaw_of(&view.attitude);

        let mut ax = 1.2 * (target[0] - x) - 1.6 * vx;
        let mut ay = 1.2 * (target[1] - y) - 1.6 * vy;
        let norm = ax.hypot(ay);
        if norm > MAX_ACCEL {
            ax *= MAX_ACCEL / norm;
            ay *= MAX_ACCEL / norm;
        }
        let az = match vz_ref {
            Some(v) => 2.5 * (v - vz),
            None => 2.5 * (target[2] - z) - 2.0 * vz,
        }
        .clamp(-MAX_ACCEL, MAX_ACCEL);

        let (s, c) = yaw.sin_cos();
        let ax_body = c * ax + s * ay;
        let ay_body = -s * ax + c * ay;
        let pitch = (ax_body / g).atan();
        let roll = (-ay_body / g).atan();
        let thrust = self.hover * (g + az) / g / (roll.cos() * pitch.cos());
        let yaw_rate_cw = yaw_override.unwrap_or(-3.0 * wrap(self.yaw_ref - yaw).to_degrees());
        self.to_controller(roll.to_degrees(), pitch.to_degrees(), yaw_rate_cw, thrust)
    }
}

impl InputSource for AutoPilot {
    fn next(&mut self, t_ms: u64, view: &QuadSummary) -> InputEvent {
        let start = *self.started_ms.get_or_insert(t_ms);
        let dt = self.last_t_ms.map_or(0.0, |t| (t_ms - t) as f64 / 1000.0);
        self.last_t_ms = Some(t_ms);
        let yaw = yaw_of(&view.attitude);
        let yaw_delta = self.prev_yaw.map_or(0.0, |p| wrap(yaw - p));
        self.prev_yaw = Some(yaw);
        let pos = view.position;
        let speed = view.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();

        let state = match self.plan[self.index] {
            Maneuver::Arm => {
                let elapsed = t_ms - start;
                if view.armed && elapsed > 300 {
                    self.yaw_ref = yaw;
                    self.advance_plan();
                }
                ControllerState {
                    arm_button: (100..200).contains(&elapsed),
                    ..ControllerState::default()
                }
            }
            Maneuver::Hold {
                z,
                tolerance,
                duration,
            } => {
                let anchor = *self.anchor.get_or_insert(pos);
                if (pos[2] - z).abs() <= tolerance {
                    self.timer += dt;
                } else {
                    self.timer = 0.0;
                }
                let out = self.fly_to(view, [anchor[0], anchor[1], z], None, None);
                if self.timer >= duration {
                    self.advance_plan();
                }
                out
            }
            Maneuver::Goto { xy, z, tolerance } => {
                let out = self.fly_to(view, [xy[0], xy[1], z], None, None);
                let d = (pos[0] - xy[0]).hypot(pos[1] - xy[1]);
                if d <= tolerance && speed < 0.3 {
                    self.advance_plan();
                }
                out
            }
            Maneuver::Rotate { degrees, direction } => {
                let anchor = *self.anchor.get_or_insert(pos);
                let (rate, sign) = match direction {
                    YawDirection::Clockwise => (TURN_RATE_DEG, -1.0),
                    YawDirection::CounterClockwise => (-TURN_RATE_DEG, 1.0),
                };
                self.yaw_turned += sign * yaw_delta;
                let done = self.yaw_turned.to_degrees() >= degrees;
                let out = self.fly_to(view, anchor, None, Some(if done { 0.0 } else { rate }));
                if done {
                    self.yaw_ref = yaw;
                    self.advance_plan();
                }
                out
            }
            Maneuver::Descend => {
                let anchor = *self.anchor.get_or_insert(pos);
                if pos[2] <= 1e-3 && view.velocity[2].abs() < 1e-9 {
                    self.advance_plan();
                    ControllerState::default()
                } else {
                    let vz = if pos[2] > 0.3 { -DESCENT_RATE } else { -0.25 };
                    self.fly_to(view, [anchor[0], anchor[1], 0.0], Some(vz), None)
                }
            }
            Maneuver::Idle => ControllerState::default(),
        };
        InputEvent::Sample(state)
    }
}
