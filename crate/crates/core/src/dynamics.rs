//! Rigid-body quadrotor with an angle-mode (self-levelling) flight controller.
//!
//! Frames: world is x forward, y left, z up; the body frame uses the same
//! convention (FLU). Positive pitch tilts the nose down and accelerates the
//! vehicle forward, positive roll banks right. A positive yaw command turns
//! clockwise seen from above, i.e. a negative body z rate.
//!
//! The controller is a cascade: angle error × `angle_gain` gives a body-rate
//! setpoint, a per-axis PID on the rate error gives a normalized torque command
//! in [-1, 1] which is scaled by [`QuadParams::max_torque`]. Total thrust is the
//! throttle fraction times `max_total_thrust` along body z. Integration is
//! semi-implicit Euler.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crsf::{ChannelSet, TICK_CENTER, TICK_MAX, TICK_MIN};
use crate::mapping::{Axis, ChannelOrder, ARM_CHANNEL};

/// Arm-switch ticks above this count as armed.
pub const ARM_THRESHOLD_TICKS: u16 = 1400;
pub const MAX_STEP_S: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("step size {0} s is outside (0, 0.01]")]
    InvalidStep(f64),
    #[error("non-finite vehicle state at t = {0} s")]
    NonFinite(f64),
    #[error("hover infeasible: max thrust {max_thrust} N does not exceed weight {weight} N")]
    HoverInfeasible { max_thrust: f64, weight: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    pub mass: f64,
    /// Principal moments of inertia, kg·m².
    pub inertia: [f64; 3],
    pub max_total_thrust: f64,
    /// Tilt commanded by full roll/pitch stick, degrees.
    pub max_tilt_cmd_deg: f64,
    /// Linear drag coefficient, N·s/m.
    pub linear_drag: f64,
    pub gravity: f64,
    /// Body torque at full controller output, N·m per axis.
    pub max_torque: [f64; 3],
}

impl Default for QuadParams {
    fn default() -> Self {
        // Artifact defaults sized like a 2-inch whoop; not measured values.
        Self {
            mass: 0.034,
            inertia: [2e-5, 2e-5, 3.5e-5],
            max_total_thrust: 0.8,
            max_tilt_cmd_deg: 30.0,
            linear_drag: 0.002,
            gravity: 9.81,
            max_torque: [0.01, 0.01, 0.007],
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if self.inertia.iter().any(|&i| !(i > 0.0)) {
            return bad("inertia components must be positive");
        }
        if self.max_torque.iter().any(|&t| !(t > 0.0)) {
            return bad("max_torque components must be positive");
        }
        if !(self.max_tilt_cmd_deg > 0.0 && self.max_tilt_cmd_deg < 90.0) {
            return bad("max_tilt_cmd_deg must lie in (0, 90)");
        }
        if !(self.linear_drag >= 0.0) {
            return bad("linear_drag must be >= 0");
        }
        trim_hover(self).map(|_| ())
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Thrust fraction that exactly balances gravity.
pub fn trim_hover(params: &QuadParams) -> Result<f64, DynamicsError> {
    let weight = params.weight();
    if !(params.max_total_thrust > weight) {
        return Err(DynamicsError::HoverInfeasible {
            max_thrust: params.max_total_thrust,
            weight,
        });
    }
    Ok(weight / params.max_total_thrust)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGains {
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

impl Default for RateGains {
    fn default() -> Self {
        Self {
            p: 0.08,
            i: 0.02,
            d: 0.002,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleController {
    /// Angle error to rate setpoint, 1/s.
    pub angle_gain: f64,
    /// Rate PID gains for roll, pitch, yaw. Errors in rad/s, output normalized.
    pub rate_gains: [RateGains; 3],
    pub yaw_rate_max_deg: f64,
    /// Clamp on each integrator, in normalized output units.
    pub integrator_limit: f64,
    /// First-order low-pass on the D term.
    pub d_lowpass_hz: f64,
    pub channel_order: ChannelOrder,
}

impl Default for AngleController {
    fn default() -> Self {
        // Tuned once against the +20° pitch step; artifact defaults.
        Self {
            angle_gain: 8.0,
            rate_gains: [RateGains::default(); 3],
            yaw_rate_max_deg: 180.0,
            integrator_limit: 0.3,
            d_lowpass_hz: 100.0,
            channel_order: ChannelOrder::Aetr,
        }
    }
}

impl AngleController {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let gains_ok = self
            .rate_gains
            .iter()
            .all(|g| g.p >= 0.0 && g.i >= 0.0 && g.d >= 0.0);
        if !(gains_ok && self.angle_gain >= 0.0) {
            return Err(DynamicsError::InvalidParams("gains must be >= 0".into()));
        }
        if !(self.integrator_limit >= 0.0 && self.yaw_rate_max_deg > 0.0 && self.d_lowpass_hz > 0.0)
        {
            return Err(DynamicsError::InvalidParams(
                "integrator_limit, yaw_rate_max_deg and d_lowpass_hz must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// What the pilot is asking the flight controller for.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Setpoints {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    /// Clockwise positive.
    pub yaw_rate_deg_s: f64,
    pub thrust_fraction: f64,
    pub armed: bool,
}

/// Stick ticks to [-1, 1]: 992 → 0, 1811 → +1, 172 → −1, linear on each side.
pub fn stick_fraction(ticks: f64) -> f64 {
    let center = f64::from(TICK_CENTER);
    let v = if ticks >= center {
        (ticks - center) / f64::from(TICK_MAX - TICK_CENTER)
    } else {
        (ticks - center) / f64::from(TICK_CENTER - TICK_MIN)
    };
    v.clamp(-1.0, 1.0)
}

pub fn throttle_fraction(ticks: f64) -> f64 {
    ((ticks - f64::from(TICK_MIN)) / f64::from(TICK_MAX - TICK_MIN)).clamp(0.0, 1.0)
}

pub fn setpoints_from_channels(
    set: &ChannelSet,
    params: &QuadParams,
    ctrl: &AngleController,
) -> Setpoints {
    let ch = |axis| f64::from(set.get(ctrl.channel_order.index(axis)));
    Setpoints {
        roll_deg: stick_fraction(ch(Axis::Roll)) * params.max_tilt_cmd_deg,
        pitch_deg: stick_fraction(ch(Axis::Pitch)) * params.max_tilt_cmd_deg,
        yaw_rate_deg_s: stick_fraction(ch(Axis::Yaw)) * ctrl.yaw_rate_max_deg,
        thrust_fraction: throttle_fraction(ch(Axis::Throttle)),
        armed: set.get(ARM_CHANNEL) > ARM_THRESHOLD_TICKS,
    }
}

/// Per-axis PID memory carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateLoopMemory {
    integral: [f64; 3],
    prev_rate: [f64; 3],
    d_filtered: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Body → world.
    pub attitude: UnitQuaternion<f64>,
    /// Body frame, rad/s.
    pub angular_velocity: Vector3<f64>,
    pub armed: bool,
    pub time: f64,
    pub controller: RateLoopMemory,
}

impl Default for QuadState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl QuadState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            angular_velocity: Vector3::zeros(),
            armed: false,
            time: 0.0,
            controller: RateLoopMemory::default(),
        }
    }

    /// (roll, pitch, yaw) in radians, yaw counter-clockwise positive.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.time.is_finite()
    }

    pub fn summary(&self) -> QuadSummary {
        let q = self.attitude.quaternion();
        QuadSummary {
            position: self.position.into(),
            velocity: self.velocity.into(),
            attitude: [q.w, q.i, q.j, q.k],
            angular_velocity: self.angular_velocity.into(),
            armed: self.armed,
            time: self.time,
        }
    }
}

/// Serializable snapshot of the observable vehicle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSummary {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// w, x, y, z
    pub attitude: [f64; 4],
    pub angular_velocity: [f64; 3],
    pub armed: bool,
    pub time: f64,
}

pub fn step(
    state: &QuadState,
    set: &ChannelSet,
    params: &QuadParams,
    ctrl: &AngleController,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    step_setpoints(
        state,
        &setpoints_from_channels(set, params, ctrl),
        params,
        ctrl,
        dt,
    )
}

/// One integration step driven directly by setpoints.
pub fn step_setpoints(
    state: &QuadState,
    sp: &Setpoints,
    params: &QuadParams,
    ctrl: &AngleController,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_STEP_S) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite(state.time));
    }

    let mut next = state.clone();
    next.armed = sp.armed;
    next.time = state.time + dt;

    let (torque, thrust) = if sp.armed {
        let command = rate_loop(state, sp, params, ctrl, dt, &mut next.controller);
        let torque = Vector3::from_fn(|i, _| command[i] * params.max_torque[i]);
        let thrust = sp.thrust_fraction.clamp(0.0, 1.0) * params.max_total_thrust;
        (torque, thrust)
    } else {
        next.controller = RateLoopMemory::default();
        (Vector3::zeros(), 0.0)
    };

    // Rotation: ω̇ = I⁻¹(τ − ω × Iω), then the attitude advances with the new ω.
    let inertia = Vector3::from(params.inertia);
    let omega = state.angular_velocity;
    let gyro = omega.cross(&inertia.component_mul(&omega));
    let omega_next = omega + (torque - gyro).component_div(&inertia) * dt;
    let attitude = state.attitude * UnitQuaternion::from_scaled_axis(omega_next * dt);
    next.attitude = UnitQuaternion::new_normalize(attitude.into_inner());
    next.angular_velocity = omega_next;

    // Translation, using the attitude at the start of the step.
    let thrust_world = state.attitude * Vector3::new(0.0, 0.0, thrust);
    let accel = thrust_world / params.mass
        - Vector3::new(0.0, 0.0, params.gravity)
        - state.velocity * (params.linear_drag / params.mass);
    next.velocity = state.velocity + accel * dt;
    next.position = state.position + next.velocity * dt;

    if next.position.z <= 0.0 && next.velocity.z <= 0.0 {
        // Inelastic ground: stop, settle level, keep heading.
        let (_, _, yaw) = next.attitude.euler_angles();
        next.position.z = 0.0;
        next.velocity = Vector3::zeros();
        next.angular_velocity = Vector3::zeros();
        next.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
        next.controller = RateLoopMemory::default();
    }

    if !next.is_finite() {
        return Err(DynamicsError::NonFinite(next.time));
    }
    Ok(next)
}

fn rate_loop(
    state: &QuadState,
    sp: &Setpoints,
    params: &QuadParams,
    ctrl: &AngleController,
    dt: f64,
    memory: &mut RateLoopMemory,
) -> [f64; 3] {
    let (roll, pitch, _) = state.euler();
    let max_tilt = params.max_tilt_cmd_deg.to_radians();
    let roll_target = sp.roll_deg.to_radians().clamp(-max_tilt, max_tilt);
    let pitch_target = sp.pitch_deg.to_radians().clamp(-max_tilt, max_tilt);
    let yaw_max = ctrl.yaw_rate_max_deg.to_radians();
    let rate_sp = [
        ctrl.angle_gain * (roll_target - roll),
        ctrl.angle_gain * (pitch_target - pitch),
        -sp.yaw_rate_deg_s.to_radians().clamp(-yaw_max, yaw_max),
    ];

    let rc = 1.0 / (2.0 * std::f64::consts::PI * ctrl.d_lowpass_hz);
    let alpha = dt / (rc + dt);
    let mut out = [0.0; 3];
    for axis in 0..3 {
        let gains = ctrl.rate_gains[axis];
        let rate = state.angular_velocity[axis];
        let err = rate_sp[axis] - rate;
        let lim = ctrl.integrator_limit;
        memory.integral[axis] = (memory.integral[axis] + gains.i * err * dt).clamp(-lim, lim);
        // Derivative on measurement avoids kicks on setpoint steps.
        let raw_d = (rate - state.controller.prev_rate[axis]) / dt;
        memory.d_filtered[axis] += alpha * (raw_d - memory.d_filtered[axis]);
        memory.prev_rate[axis] = rate;
        out[axis] = (gains.p * err + memory.integral[axis] - gains.d * memory.d_filtered[axis])
            .clamp(-1.0, 1.0);
    }
    out
}

/// Flight-controller reaction to losing the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailsafePolicy {
    /// Seconds after failsafe entry at which the vehicle disarms.
    pub disarm_after_s: f64,
}

impl Default for FailsafePolicy {
    fn default() -> Self {
        Self {
            disarm_after_s: 1.0,
        }
    }
}

/// Channels the flight controller substitutes while in failsafe: throttle cut,
/// sticks centered (self-level), armed until `disarm_after_s` has elapsed.
pub fn failsafe_channels(
    last_good: &ChannelSet,
    order: ChannelOrder,
    elapsed_s: f64,
    policy: &FailsafePolicy,
) -> ChannelSet {
    let mut set = ChannelSet::centered();
    set.set(order.index(Axis::Throttle), TICK_MIN)
        .expect("valid tick");
    let still_armed =
        last_good.get(ARM_CHANNEL) > ARM_THRESHOLD_TICKS && elapsed_s < policy.disarm_after_s;
    set.set(ARM_CHANNEL, if still_armed { TICK_MAX } else { TICK_MIN })
        .expect("valid tick");
    set
}
