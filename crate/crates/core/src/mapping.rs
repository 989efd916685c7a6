//! Handheld controller → RC channels.
//!
//! The trigger drives throttle, hand tilt drives pitch and roll, the thumbstick
//! drives yaw, and a button toggles arming which rides on channel 5.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crsf::{ChannelSet, TICK_CENTER, TICK_MAX, TICK_MIN};

/// Half the span between the low and high stick ticks.
pub const HALF_SPAN_TICKS: f64 = (TICK_MAX - TICK_MIN) as f64 / 2.0;
/// Trigger travel below which arming is allowed.
pub const ARM_THROTTLE_LIMIT: f64 = 0.05;
/// Zero-based channel index of the arming switch (channel 5).
pub const ARM_CHANNEL: usize = 4;
pub const MIN_CALIBRATION_SAMPLES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("calibration needs at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("invalid mapping config: {0}")]
    InvalidConfig(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Instantaneous reading of the handheld controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    /// Trigger travel, 0 released to 1 fully pulled.
    pub trigger: f64,
    /// Forward tilt in degrees.
    pub tilt_pitch: f64,
    /// Rightward tilt in degrees.
    pub tilt_roll: f64,
    /// Thumbstick horizontal deflection, right positive.
    pub thumbstick_x: f64,
    pub arm_button: bool,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Roll,
    Pitch,
    Throttle,
    Yaw,
}

/// Assignment of the four control axes to channels 1–4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelOrder {
    /// roll, pitch, throttle, yaw
    #[default]
    Aetr,
    /// throttle, roll, pitch, yaw
    Taer,
}

impl ChannelOrder {
    pub fn index(self, axis: Axis) -> usize {
        match (self, axis) {
            (ChannelOrder::Aetr, Axis::Roll) => 0,
            (ChannelOrder::Aetr, Axis::Pitch) => 1,
            (ChannelOrder::Aetr, Axis::Throttle) => 2,
            (ChannelOrder::Aetr, Axis::Yaw) => 3,
            (ChannelOrder::Taer, Axis::Throttle) => 0,
            (ChannelOrder::Taer, Axis::Roll) => 1,
            (ChannelOrder::Taer, Axis::Pitch) => 2,
            (ChannelOrder::Taer, Axis::Yaw) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisExpo {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for AxisExpo {
    fn default() -> Self {
        Self {
            roll: 0.3,
            pitch: 0.3,
            yaw: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisInvert {
    pub roll: bool,
    pub pitch: bool,
    pub throttle: bool,
    pub yaw: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    /// Tilt giving full stick deflection, degrees.
    pub max_tilt_deg: f64,
    pub deadzone: f64,
    pub expo: AxisExpo,
    /// Maximum channel movement in ticks per second.
    pub slew_limit: f64,
    pub invert: AxisInvert,
    pub channel_order: ChannelOrder,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            max_tilt_deg: 30.0,
            deadzone: 0.05,
            expo: AxisExpo::default(),
            slew_limit: 8000.0,
            invert: AxisInvert::default(),
            channel_order: ChannelOrder::Aetr,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), MappingError> {
        let bad = |msg: &str| Err(MappingError::InvalidConfig(msg.to_string()));
        if !(self.max_tilt_deg.is_finite() && self.max_tilt_deg > 0.0) {
            return bad("max_tilt_deg must be positive");
        }
        if !(0.0..0.5).contains(&self.deadzone) {
            return bad("deadzone must lie in [0, 0.5)");
        }
        for e in [self.expo.roll, self.expo.pitch, self.expo.yaw] {
            if !(0.0..1.0).contains(&e) {
                return bad("expo must lie in [0, 1)");
            }
        }
        if !(self.slew_limit > 0.0) {
            return bad("slew_limit must be positive");
        }
        Ok(())
    }

    /// Reads a TOML document; all keys are optional and default as documented
    /// in `docs/config.md`.
    pub fn from_toml_str(text: &str) -> Result<Self, MappingError> {
        let cfg: Self = toml::from_str(text).map_err(|e| MappingError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Neutral tilt, subtracted before mapping.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltOffsets {
    pub pitch: f64,
    pub roll: f64,
}

/// Averages tilt over samples taken with the controller at rest.
pub fn calibrate_neutral(samples: &[ControllerState]) -> Result<TiltOffsets, MappingError> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(MappingError::InsufficientSamples {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let (pitch, roll) = samples
        .iter()
        .fold((0.0, 0.0), |(p, r), s| (p + s.tilt_pitch, r + s.tilt_roll));
    Ok(TiltOffsets {
        pitch: pitch / n,
        roll: roll / n,
    })
}

/// Deadzone rescale followed by a cubic expo blend. Odd, and fixes ±1.
pub fn shape_axis(x: f64, deadzone: f64, expo: f64) -> f64 {
    let x = sanitize(x).clamp(-1.0, 1.0);
    let y = x.signum() * ((x.abs() - deadzone) / (1.0 - deadzone)).max(0.0);
    (1.0 - expo) * y + expo * y * y * y
}

fn sanitize(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x
    }
}

/// Center plus a shaped deflection, rounded half away from center.
fn stick_ticks(z: f64) -> u16 {
    let t = f64::from(TICK_CENTER) + (HALF_SPAN_TICKS * z).round();
    t.clamp(f64::from(TICK_MIN), f64::from(TICK_MAX)) as u16
}

fn throttle_ticks(trigger: f64) -> u16 {
    let trigger = sanitize(trigger).clamp(0.0, 1.0);
    let t = (f64::from(TICK_MIN) + trigger * f64::from(TICK_MAX - TICK_MIN)).round();
    t.clamp(f64::from(TICK_MIN), f64::from(TICK_MAX)) as u16
}

pub fn map_state(
    state: &ControllerState,
    cfg: &MappingConfig,
    offsets: &TiltOffsets,
    arm: ArmMode,
) -> ChannelSet {
    let flip = |inv: bool, v: f64| if inv { -v } else { v };
    let tilt_axis =
        |tilt: f64, offset: f64| (sanitize(tilt - offset) / cfg.max_tilt_deg).clamp(-1.0, 1.0);

    let roll = flip(cfg.invert.roll, tilt_axis(state.tilt_roll, offsets.roll));
    let pitch = flip(cfg.invert.pitch, tilt_axis(state.tilt_pitch, offsets.pitch));
    let yaw = flip(
        cfg.invert.yaw,
        sanitize(state.thumbstick_x).clamp(-1.0, 1.0),
    );
    let trigger = if cfg.invert.throttle {
        1.0 - sanitize(state.trigger).clamp(0.0, 1.0)
    } else {
        state.trigger
    };

    let mut values = [TICK_CENTER; 16];
    let order = cfg.channel_order;
    values[order.index(Axis::Roll)] = stick_ticks(shape_axis(roll, cfg.deadzone, cfg.expo.roll));
    values[order.index(Axis::Pitch)] = stick_ticks(shape_axis(pitch, cfg.deadzone, cfg.expo.pitch));
    values[order.index(Axis::Throttle)] = throttle_ticks(trigger);
    values[order.index(Axis::Yaw)] = stick_ticks(shape_axis(yaw, cfg.deadzone, cfg.expo.yaw));
    values[ARM_CHANNEL] = if arm == ArmMode::Armed {
        TICK_MAX
    } else {
        TICK_MIN
    };
    ChannelSet::new(values).expect("mapped ticks stay within 11 bits")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmMode {
    #[default]
    Disarmed,
    Armed,
    Failsafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArmingState {
    pub mode: ArmMode,
    pub last_transition_ms: u64,
    /// Button level at the previous step; presses act on the rising edge.
    pub button_held: bool,
}

/// Arming state machine. Link loss always wins; a held button toggles once.
pub fn step_arming(arming: ArmingState, state: &ControllerState, link_ok: bool) -> ArmingState {
    let pressed = state.arm_button && !arming.button_held;
    let throttle_low = sanitize(state.trigger) < ARM_THROTTLE_LIMIT;
    let next = match (arming.mode, link_ok) {
        (ArmMode::Failsafe, true) if throttle_low => ArmMode::Disarmed,
        (ArmMode::Failsafe, _) | (_, false) => ArmMode::Failsafe,
        (ArmMode::Disarmed, true) if pressed && throttle_low => ArmMode::Armed,
        (ArmMode::Armed, true) if pressed => ArmMode::Disarmed,
        (mode, true) => mode,
    };
    ArmingState {
        mode: next,
        last_transition_ms: if next != arming.mode {
            state.timestamp_ms
        } else {
            arming.last_transition_ms
        },
        button_held: state.arm_button,
    }
}

/// Moves each channel toward `next` by at most `limit * dt` ticks.
pub fn slew_limit(prev: &ChannelSet, next: &ChannelSet, dt: f64, limit: f64) -> ChannelSet {
    let max_step = (limit * dt).max(0.0);
    let mut out = *next;
    for i in 0..16 {
        let from = f64::from(prev.get(i));
        let to = f64::from(next.get(i));
        let delta = to - from;
        if delta.abs() > max_step {
            let moved = from + delta.signum() * max_step.floor();
            out.set(i, moved as u16).expect("between two valid ticks");
        }
    }
    out
}

/// Calibration, arming, mapping and slew for one controller.
#[derive(Debug, Clone)]
pub struct MappingPipeline {
    cfg: MappingConfig,
    offsets: TiltOffsets,
    arming: ArmingState,
    last: Option<(u64, ChannelSet)>,
}

impl MappingPipeline {
    pub fn new(cfg: MappingConfig, offsets: TiltOffsets) -> Self {
        Self {
            cfg,
            offsets,
            arming: ArmingState::default(),
            last: None,
        }
    }

    pub fn arming(&self) -> ArmingState {
        self.arming
    }

    pub fn config(&self) -> &MappingConfig {
        &self.cfg
    }

    /// Produces the channels to transmit for one controller sample. The four
    /// stick channels are slew limited; the aux channels switch immediately.
    pub fn update(&mut self, state: &ControllerState, link_ok: bool) -> ChannelSet {
        self.arming = step_arming(self.arming, state, link_ok);
        let target = map_state(state, &self.cfg, &self.offsets, self.arming.mode);
        let out = match self.last {
            Some((t_prev, prev)) if state.timestamp_ms > t_prev => {
                let dt = (state.timestamp_ms - t_prev) as f64 / 1000.0;
                let mut limited = slew_limit(&prev, &target, dt, self.cfg.slew_limit);
                for i in 4..16 {
                    limited.set(i, target.get(i)).expect("valid tick");
                }
                limited
            }
            Some((_, prev)) => {
                let mut held = prev;
                for i in 4..16 {
                    held.set(i, target.get(i)).expect("valid tick");
                }
                held
            }
            None => target,
        };
        self.last = Some((state.timestamp_ms, out));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral() -> ControllerState {
        ControllerState::default()
    }

    #[test]
    fn calibration() {
        let rest = vec![neutral(); 10];
        assert_eq!(calibrate_neutral(&rest).unwrap(), TiltOffsets::default());
        let tilted = vec![
            ControllerState {
                tilt_pitch: 2.0,
                tilt_roll: -1.0,
                ..neutral()
            };
            12
        ];
        assert_eq!(
            calibrate_neutral(&tilted).unwrap(),
            TiltOffsets {
                pitch: 2.0,
                roll: -1.0
            }
        );
        let mixed: Vec<_> = (0..10)
            .map(|i| ControllerState {
                tilt_pitch: i as f64,
                tilt_roll: -0.5 * i as f64,
                ..neutral()
            })
            .collect();
        // 0+1+...+9 = 45
        let off = calibrate_neutral(&mixed).unwrap();
        assert_eq!(off.pitch, 4.5);
        assert_eq!(off.roll, -2.25);
        assert_eq!(
            calibrate_neutral(&rest[..9]),
            Err(MappingError::InsufficientSamples { needed: 10, got: 9 })
        );
    }

    #[test]
    fn shape_axis_examples() {
        assert_eq!(shape_axis(0.0, 0.05, 0.3), 0.0);
        for (dz, expo) in [(0.0, 0.0), (0.05, 0.3), (0.45, 0.99)] {
            assert_eq!(shape_axis(1.0, dz, expo), 1.0);
            assert_eq!(shape_axis(-1.0, dz, expo), -1.0);
        }
        // y = 0.45 / 0.95; z = 0.7 y + 0.3 y^3
        let y: f64 = 0.45 / 0.95;
        let expected = 0.7 * y + 0.3 * y.powi(3);
        assert!((shape_axis(0.5, 0.05, 0.3) - expected).abs() < 1e-15);
        assert!((expected - 0.363_464_061_816_591_3).abs() < 1e-12);
        assert_eq!(shape_axis(0.04, 0.05, 0.3), 0.0);
        assert_eq!(shape_axis(-0.3, 0.05, 0.3), -shape_axis(0.3, 0.05, 0.3));
    }

    #[test]
    fn neutral_state_maps_to_center_and_low() {
        let set = map_state(
            &neutral(),
            &MappingConfig::default(),
            &TiltOffsets::default(),
            ArmMode::Disarmed,
        );
        let mut expected = [992u16; 16];
        expected[2] = 172;
        expected[4] = 172;
        assert_eq!(set.values(), &expected);
    }

    #[test]
    fn full_deflection() {
        let cfg = MappingConfig::default();
        let s = ControllerState {
            trigger: 1.0,
            tilt_pitch: 30.0,
            ..neutral()
        };
        let set = map_state(&s, &cfg, &TiltOffsets::default(), ArmMode::Armed);
        assert_eq!(set.get(2), 1811);
        assert_eq!(set.get(1), 1811);
        assert_eq!(set.get(4), 1811);
        let back = ControllerState {
            tilt_pitch: -45.0,
            ..neutral()
        };
        assert_eq!(
            map_state(&back, &cfg, &TiltOffsets::default(), ArmMode::Armed).get(1),
            172
        );
    }

    #[test]
    fn half_deflection_uses_shaped_value() {
        let cfg = MappingConfig::default();
        let s = ControllerState {
            tilt_pitch: 15.0,
            ..neutral()
        };
        // 992 + round(819.5 * 0.3634638) = 992 + round(297.858) = 1290
        let set = map_state(&s, &cfg, &TiltOffsets::default(), ArmMode::Disarmed);
        assert_eq!(set.get(1), 1290);
    }

    #[test]
    fn offsets_and_inversion() {
        let mut cfg = MappingConfig::default();
        let offsets = TiltOffsets {
            pitch: 5.0,
            roll: 0.0,
        };
        let s = ControllerState {
            tilt_pitch: 5.0,
            ..neutral()
        };
        assert_eq!(map_state(&s, &cfg, &offsets, ArmMode::Disarmed).get(1), 992);
        cfg.invert.roll = true;
        cfg.invert.throttle = true;
        let s = ControllerState {
            tilt_roll: 30.0,
            ..neutral()
        };
        let set = map_state(&s, &cfg, &TiltOffsets::default(), ArmMode::Disarmed);
        assert_eq!(set.get(0), 172);
        assert_eq!(set.get(2), 1811);
    }

    #[test]
    fn taer_order() {
        let cfg = MappingConfig {
            channel_order: ChannelOrder::Taer,
            ..Default::default()
        };
        let set = map_state(&neutral(), &cfg, &TiltOffsets::default(), ArmMode::Disarmed);
        assert_eq!(set.get(0), 172);
        assert_eq!(set.get(2), 992);
    }

    #[test]
    fn non_finite_inputs_stay_in_range() {
        let cfg = MappingConfig::default();
        for v in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            let s = ControllerState {
                trigger: v,
                tilt_pitch: v,
                tilt_roll: v,
                thumbstick_x: v,
                ..neutral()
            };
            let set = map_state(&s, &cfg, &TiltOffsets::default(), ArmMode::Disarmed);
            assert!(set.values().iter().all(|&t| (172..=1811).contains(&t)));
        }
    }

    #[test]
    fn arming_rules() {
        let press = |trigger| ControllerState {
            trigger,
            arm_button: true,
            timestamp_ms: 40,
            ..neutral()
        };
        let disarmed = ArmingState::default();
        assert_eq!(
            step_arming(disarmed, &press(0.0), true).mode,
            ArmMode::Armed
        );
        assert_eq!(
            step_arming(disarmed, &press(0.0), true).last_transition_ms,
            40
        );
        assert_eq!(
            step_arming(disarmed, &press(0.5), true).mode,
            ArmMode::Disarmed
        );

        let armed = ArmingState {
            mode: ArmMode::Armed,
            ..Default::default()
        };
        assert_eq!(
            step_arming(armed, &neutral(), false).mode,
            ArmMode::Failsafe
        );
        assert_eq!(
            step_arming(armed, &press(0.8), true).mode,
            ArmMode::Disarmed
        );

        let failsafe = ArmingState {
            mode: ArmMode::Failsafe,
            ..Default::default()
        };
        let high = ControllerState {
            trigger: 0.6,
            ..neutral()
        };
        assert_eq!(step_arming(failsafe, &high, true).mode, ArmMode::Failsafe);
        assert_eq!(
            step_arming(failsafe, &neutral(), false).mode,
            ArmMode::Failsafe
        );
        assert_eq!(
            step_arming(failsafe, &neutral(), true).mode,
            ArmMode::Disarmed
        );
    }

    #[test]
    fn held_button_toggles_once() {
        let mut arming = ArmingState::default();
        let held = ControllerState {
            arm_button: true,
            ..neutral()
        };
        for _ in 0..5 {
            arming = step_arming(arming, &held, true);
        }
        assert_eq!(arming.mode, ArmMode::Armed);
        arming = step_arming(arming, &neutral(), true);
        arming = step_arming(arming, &held, true);
        assert_eq!(arming.mode, ArmMode::Disarmed);
    }

    #[test]
    fn slew_examples() {
        let center = ChannelSet::centered();
        assert_eq!(slew_limit(&center, &center, 0.004, 8000.0), center);
        let mut high = center;
        high.set(0, 1811).unwrap();
        high.set(1, 172).unwrap();
        let out = slew_limit(&center, &high, 0.004, 8000.0);
        assert_eq!(out.get(0), 1024);
        assert_eq!(out.get(1), 960);
        assert_eq!(slew_limit(&center, &high, 0.004, 1e9), high);
    }

    #[test]
    fn pipeline_slews_sticks_but_not_arm_switch() {
        let mut p = MappingPipeline::new(MappingConfig::default(), TiltOffsets::default());
        let first = p.update(&neutral(), true);
        assert_eq!(first.get(1), 992);
        let s = ControllerState {
            tilt_pitch: 30.0,
            arm_button: true,
            timestamp_ms: 10,
            ..neutral()
        };
        let out = p.update(&s, true);
        // 8000 ticks/s over 10 ms
        assert_eq!(out.get(1), 1072);
        assert_eq!(out.get(4), 1811);
    }

    #[test]
    fn config_from_toml() {
        let cfg = MappingConfig::from_toml_str(
            "max_tilt_deg = 25.0\nchannel_order = \"TAER\"\n[expo]\nyaw = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.max_tilt_deg, 25.0);
        assert_eq!(cfg.channel_order, ChannelOrder::Taer);
        assert_eq!(cfg.expo.yaw, 0.1);
        assert_eq!(cfg.expo.roll, 0.3);
        assert!(MappingConfig::from_toml_str("deadzone = 0.6").is_err());
        assert!(MappingConfig::from_toml_str("bogus = 1").is_err());
    }
}
