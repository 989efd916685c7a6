use motionpilot::crsf::ChannelSet;
use motionpilot::dynamics::{
    step, step_setpoints, trim_hover, AngleController, QuadParams, QuadState, Setpoints,
};
use motionpilot::mapping::ARM_CHANNEL;
use nalgebra::Vector3;

fn pitch_step_channels(pitch_ticks: u16, throttle_ticks: u16) -> ChannelSet {
    let mut set = ChannelSet::centered();
    set.set(1, pitch_ticks).unwrap();
    set.set(2, throttle_ticks).unwrap();
    set.set(ARM_CHANNEL, 1811).unwrap();
    set
}

#[test]
fn twenty_degree_pitch_step_settles_within_one_second() {
    let p = QuadParams::default();
    let c = AngleController::default();
    // 992 + 546 ticks = 2/3 of full deflection = 20°
    let set = pitch_step_channels(1538, 1100);
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 20.0));
    let mut worst_after_settle: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for i in 1..=2000 {
        s = step(&s, &set, &p, &c, 0.001).unwrap();
        let pitch = s.euler().1.to_degrees();
        peak = peak.max(pitch);
        if i >= 1000 {
            worst_after_settle = worst_after_settle.max((pitch - 20.0).abs());
        }
    }
    assert!(worst_after_settle < 1.0, "error {worst_after_settle}");
    assert!(peak < 22.0, "overshoot to {peak}");
}

#[test]
fn hover_holds_for_ten_seconds() {
    let p = QuadParams::default();
    let c = AngleController::default();
    let sp = Setpoints {
        thrust_fraction: trim_hover(&p).unwrap(),
        armed: true,
        ..Default::default()
    };
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0));
    for _ in 0..10_000 {
        s = step_setpoints(&s, &sp, &p, &c, 0.001).unwrap();
    }
    assert!(s.velocity.norm() < 0.01);
    assert!((s.time - 10.0).abs() < 1e-9);
}

#[test]
fn quaternion_norm_stays_unit_under_rotation() {
    let p = QuadParams::default();
    let c = AngleController::default();
    let sp = Setpoints {
        roll_deg: 12.0,
        pitch_deg: -7.0,
        yaw_rate_deg_s: 150.0,
        thrust_fraction: 0.9,
        armed: true,
    };
    let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 1.0));
    for _ in 0..10_000 {
        s = step_setpoints(&s, &sp, &p, &c, 0.001).unwrap();
        assert!((s.attitude.quaternion().norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn identical_inputs_give_bitwise_identical_trajectories() {
    let run = || {
        let p = QuadParams::default();
        let c = AngleController::default();
        let mut s = QuadState::at_rest(Vector3::new(0.0, 0.0, 0.0));
        let mut trace = Vec::new();
        for i in 0..3000u32 {
            let mut set = pitch_step_channels(992 + (i % 400) as u16, 1200);
            set.set(0, 900).unwrap();
            s = step(&s, &set, &p, &c, 0.001).unwrap();
            trace.push(s.summary());
        }
        trace
    };
    let a = run();
    let b = run();
    assert!(a.iter().zip(&b).all(|(x, y)| {
        x.position.map(f64::to_bits) == y.position.map(f64::to_bits)
            && x.attitude.map(f64::to_bits) == y.attitude.map(f64::to_bits)
    }));
}

#[test]
fn takeoff_from_ground_with_full_throttle() {
    let p = QuadParams::default();
    let c = AngleController::default();
    let set = pitch_step_channels(992, 1811);
    let mut s = QuadState::default();
    for _ in 0..500 {
        s = step(&s, &set, &p, &c, 0.001).unwrap();
    }
    assert!(s.position.z > 0.5, "{}", s.position.z);
    assert!(s.armed);
}
