//! Training area: gates, vertical obstacles, a landing pad, and the exercise
//! scripts flown on it.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::QuadState;

pub const COURSE_FORMAT: u32 = 1;
pub const DEFAULT_DRONE_RADIUS: f64 = 0.05;
/// Height below which the drone counts as touching the ground.
const GROUND_EPS: f64 = 1e-3;

/// The built-in course: one gate and a pair of vertical obstacles.
pub const PAPER_TRACK_TOML: &str = include_str!("../data/paper-track.toml");

#[derive(Debug, Error)]
pub enum CourseError {
    #[error("course file format {0} is not supported (expected 1)")]
    Format(u32),
    #[error("invalid course: {0}")]
    Invalid(String),
    #[error("course parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown exercise {0:?}")]
    UnknownExercise(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub center: [f64; 3],
    /// Direction of travel counted as a pass.
    pub normal: [f64; 3],
    pub width: f64,
    pub height: f64,
}

impl Gate {
    /// (normal, width axis, height axis). The width axis is horizontal
    /// (z × normal) unless the gate lies flat, in which case it is world x.
    pub fn frame(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let n = Vector3::from(self.normal).normalize();
        let w = Vector3::z().cross(&n);
        let w = if w.norm() > 1e-9 {
            w.normalize()
        } else {
            Vector3::x()
        };
        let h = n.cross(&w);
        (n, w, h)
    }
}

/// Vertical cylinder standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center_xy: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandingPad {
    pub center_xy: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Course {
    pub name: String,
    /// Take-off position.
    pub start: [f64; 3],
    #[serde(default)]
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub landing_pad: LandingPad,
    pub bounds: Bounds,
}

impl Course {
    pub fn validate(&self) -> Result<(), CourseError> {
        let bad = |m: String| Err(CourseError::Invalid(m));
        for (i, g) in self.gates.iter().enumerate() {
            if !(g.width > 0.0 && g.height > 0.0) {
                return bad(format!("gate {i} needs positive width and height"));
            }
            let n = Vector3::from(g.normal).norm();
            if (n - 1.0).abs() > 1e-6 {
                return bad(format!("gate {i} normal is not unit length ({n})"));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.height > 0.0) {
                return bad(format!("obstacle {i} needs positive radius and height"));
            }
        }
        if !(self.landing_pad.radius > 0.0) {
            return bad("landing pad radius must be positive".into());
        }
        if (0..3).any(|i| !(self.bounds.min[i] < self.bounds.max[i])) {
            return bad("bounds min must be below max on every axis".into());
        }
        if !self.bounds.contains(&Vector3::from(self.start)) {
            return bad("start position lies outside the bounds".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawDirection {
    Clockwise,
    CounterClockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExerciseStep {
    HoldAltitude {
        z: f64,
        tolerance: f64,
        duration: f64,
    },
    TranslateTo {
        xy: [f64; 2],
        tolerance: f64,
    },
    RotateYaw {
        degrees: f64,
        direction: YawDirection,
    },
    PassGate {
        index: usize,
    },
    /// Touch down on the course landing pad.
    Land,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exercise {
    pub name: String,
    pub steps: Vec<ExerciseStep>,
}

impl Exercise {
    pub fn validate(&self, course: &Course) -> Result<(), CourseError> {
        for (i, step) in self.steps.iter().enumerate() {
            let ok = match *step {
                ExerciseStep::HoldAltitude {
                    tolerance,
                    duration,
                    ..
                } => tolerance > 0.0 && duration > 0.0,
                ExerciseStep::TranslateTo { tolerance, .. } => tolerance > 0.0,
                ExerciseStep::RotateYaw { degrees, .. } => degrees > 0.0,
                ExerciseStep::PassGate { index } => index < course.gates.len(),
                ExerciseStep::Land => true,
            };
            if !ok {
                return Err(CourseError::Invalid(format!(
                    "exercise {:?} step {i} is invalid: {step:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// On-disk course document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseFile {
    pub format: u32,
    pub course: Course,
    #[serde(default)]
    pub exercises: Vec<Exercise>,
}

impl CourseFile {
    pub fn from_toml_str(text: &str) -> Result<Self, CourseError> {
        let file: Self = toml::from_str(text)?;
        if file.format != COURSE_FORMAT {
            return Err(CourseError::Format(file.format));
        }
        file.course.validate()?;
        for ex in &file.exercises {
            ex.validate(&file.course)?;
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CourseError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn paper_track() -> Self {
        Self::from_toml_str(PAPER_TRACK_TOML).expect("built-in course is valid")
    }

    pub fn exercise(&self, name: &str) -> Result<&Exercise, CourseError> {
        self.exercises
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| CourseError::UnknownExercise(name.to_string()))
    }
}

/// True iff the segment p0→p1 crosses the gate plane along the normal and the
/// crossing point lies inside the gate rectangle (edges included).
pub fn check_gate_pass(p0: &Vector3<f64>, p1: &Vector3<f64>, gate: &Gate) -> bool {
    let c = Vector3::from(gate.center);
    let (n, w, h) = gate.frame();
    let d0 = (p0 - c).dot(&n);
    let d1 = (p1 - c).dot(&n);
    if !(d0 < 0.0 && d1 >= 0.0) {
        return false;
    }
    let s = d0 / (d0 - d1);
    let hit = p0 + (p1 - p0) * s - c;
    hit.dot(&w).abs() <= gate.width / 2.0 && hit.dot(&h).abs() <= gate.height / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Collision {
    Obstacle { index: usize },
    Ground,
    OutOfBounds,
}

/// Sphere-vs-course test. Touching counts. Resting on the ground (z = 0) is
/// contact, not a collision; impact speed is judged by [`ScriptRunner`].
pub fn find_collision(p: &Vector3<f64>, drone_radius: f64, course: &Course) -> Option<Collision> {
    if !course.bounds.contains(p) {
        return Some(Collision::OutOfBounds);
    }
    if p.z < 0.0 {
        return Some(Collision::Ground);
    }
    course
        .obstacles
        .iter()
        .position(|o| {
            let dx = p.x - o.center_xy[0];
            let dy = p.y - o.center_xy[1];
            let radial = ((dx * dx + dy * dy).sqrt() - o.radius).max(0.0);
            let vertical = (p.z - o.height).max(0.0) + (-p.z).max(0.0);
            (radial * radial + vertical * vertical).sqrt() <= drone_radius
        })
        .map(|index| Collision::Obstacle { index })
}

pub fn check_collision(p: &Vector3<f64>, drone_radius: f64, course: &Course) -> bool {
    find_collision(p, drone_radius, course).is_some()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ScriptEvent {
    StepCompleted { index: usize },
    ExerciseCompleted,
    GatePassed { index: usize },
    Collision { collision: Collision },
    ExerciseFailed { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerLimits {
    pub drone_radius: f64,
    /// Faster ground impacts count as a crash, m/s.
    pub touchdown_speed_limit: f64,
    /// Pad landing requires horizontal speed below this, m/s.
    pub landing_speed_limit: f64,
}

impl Default for RunnerLimits {
    fn default() -> Self {
        Self {
            drone_radius: DEFAULT_DRONE_RADIUS,
            touchdown_speed_limit: 2.0,
            landing_speed_limit: 0.3,
        }
    }
}

/// Progress through one exercise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptRunner {
    exercise: Exercise,
    limits: RunnerLimits,
    step: usize,
    status: ScriptStatus,
    hold_timer: f64,
    yaw_accumulated: f64,
    prev: Option<(Vector3<f64>, Vector3<f64>, f64)>,
}

impl ScriptRunner {
    pub fn new(exercise: Exercise, limits: RunnerLimits) -> Self {
        Self {
            exercise,
            limits,
            step: 0,
            status: ScriptStatus::Running,
            hold_timer: 0.0,
            yaw_accumulated: 0.0,
            prev: None,
        }
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn status(&self) -> ScriptStatus {
        self.status
    }

    pub fn exercise(&self) -> &Exercise {
        &self.exercise
    }

    /// Evaluates one simulation tick. At most one step completes per tick.
    pub fn advance(&mut self, course: &Course, quad: &QuadState, dt: f64) -> Vec<ScriptEvent> {
        let mut events = Vec::new();
        let pos = quad.position;
        let (_, _, yaw) = quad.euler();
        let prev = self.prev.replace((pos, quad.velocity, yaw));

        if let Some((p0, _, _)) = prev {
            for (index, gate) in course.gates.iter().enumerate() {
                if check_gate_pass(&p0, &pos, gate) {
                    events.push(ScriptEvent::GatePassed { index });
                }
            }
        }
        if self.status != ScriptStatus::Running {
            return events;
        }

        let mut collision = find_collision(&pos, self.limits.drone_radius, course);
        if collision.is_none() {
            if let Some((p0, v0, _)) = prev {
                let landed_now = p0.z > GROUND_EPS && pos.z <= GROUND_EPS;
                if landed_now && -v0.z > self.limits.touchdown_speed_limit {
                    collision = Some(Collision::Ground);
                }
            }
        }
        if let Some(collision) = collision {
            self.status = ScriptStatus::Failed;
            events.push(ScriptEvent::Collision { collision });
            events.push(ScriptEvent::ExerciseFailed {
                reason: format!("collision during step {}", self.step),
            });
            return events;
        }

        let Some(step) = self.exercise.steps.get(self.step).copied() else {
            self.status = ScriptStatus::Completed;
            events.push(ScriptEvent::ExerciseCompleted);
            return events;
        };

        let done = match step {
            ExerciseStep::HoldAltitude {
                z,
                tolerance,
                duration,
            } => {
                if (pos.z - z).abs() <= tolerance {
                    self.hold_timer += dt;
                } else {
                    self.hold_timer = 0.0;
                }
                self.hold_timer >= duration - 1e-9
            }
            ExerciseStep::TranslateTo { xy, tolerance } => {
                let dx = pos.x - xy[0];
                let dy = pos.y - xy[1];
                (dx * dx + dy * dy).sqrt() <= tolerance
            }
            ExerciseStep::RotateYaw { degrees, direction } => {
                if let Some((_, _, yaw0)) = prev {
                    let mut delta = yaw - yaw0;
                    if delta > std::f64::consts::PI {
                        delta -= 2.0 * std::f64::consts::PI;
                    } else if delta < -std::f64::consts::PI {
                        delta += 2.0 * std::f64::consts::PI;
                    }
                    self.yaw_accumulated += delta;
                }
                let turned = match direction {
                    YawDirection::Clockwise => -self.yaw_accumulated,
                    YawDirection::CounterClockwise => self.yaw_accumulated,
                };
                turned >= degrees.to_radians()
            }
            ExerciseStep::PassGate { index } => events.contains(&ScriptEvent::GatePassed { index }),
            ExerciseStep::Land => {
                let pad = &course.landing_pad;
                let dx = pos.x - pad.center_xy[0];
                let dy = pos.y - pad.center_xy[1];
                let horizontal_speed = quad.velocity.x.hypot(quad.velocity.y);
                pos.z <= GROUND_EPS
                    && (dx * dx + dy * dy).sqrt() <= pad.radius
                    && horizontal_speed <= self.limits.landing_speed_limit
            }
        };

        if done {
            events.push(ScriptEvent::StepCompleted { index: self.step });
            self.step += 1;
            self.hold_timer = 0.0;
            self.yaw_accumulated = 0.0;
            if self.step == self.exercise.steps.len() {
                self.status = ScriptStatus::Completed;
                events.push(ScriptEvent::ExerciseCompleted);
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn unit_gate() -> Gate {
        Gate {
            center: [0.0, 0.0, 1.0],
            normal: [1.0, 0.0, 0.0],
            width: 1.0,
            height: 1.0,
        }
    }

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn gate_pass_examples() {
        let g = unit_gate();
        assert!(check_gate_pass(&v(-0.1, 0.0, 1.0), &v(0.1, 0.0, 1.0), &g));
        assert!(!check_gate_pass(&v(0.1, 0.0, 1.0), &v(-0.1, 0.0, 1.0), &g));
        assert!(!check_gate_pass(
            &v(-0.1, -0.3, 1.0),
            &v(-0.1, 0.3, 1.0),
            &g
        ));
        // Crossing at y = 0.6 * 0.5 and 1.1 * 0.5.
        assert!(check_gate_pass(&v(-0.2, 0.3, 1.0), &v(0.2, 0.3, 1.0), &g));
        assert!(!check_gate_pass(
            &v(-0.2, 0.55, 1.0),
            &v(0.2, 0.55, 1.0),
            &g
        ));
        // Oblique: from (-1, 0, 0.5) to (1, 0.8, 1.5) crosses at (0, 0.4, 1.0).
        assert!(check_gate_pass(&v(-1.0, 0.0, 0.5), &v(1.0, 0.8, 1.5), &g));
        // Same line, extended so the crossing is (0, 0.6, 1.0): outside.
        assert!(!check_gate_pass(&v(-1.0, 0.2, 0.5), &v(1.0, 1.0, 1.5), &g));
    }

    #[test]
    fn landing_on_the_plane_counts_once() {
        let g = unit_gate();
        assert!(check_gate_pass(&v(-0.1, 0.0, 1.0), &v(0.0, 0.0, 1.0), &g));
        assert!(!check_gate_pass(&v(0.0, 0.0, 1.0), &v(0.1, 0.0, 1.0), &g));
    }

    #[test]
    fn flat_gate_frame() {
        let g = Gate {
            normal: [0.0, 0.0, 1.0],
            ..unit_gate()
        };
        let (n, w, h) = g.frame();
        assert_eq!(n, Vector3::z());
        assert_eq!(w, Vector3::x());
        assert_eq!(h, Vector3::y());
        assert!(check_gate_pass(&v(0.2, 0.2, 0.9), &v(0.2, 0.2, 1.1), &g));
    }

    fn course() -> Course {
        CourseFile::paper_track().course
    }

    #[test]
    fn collision_examples() {
        let c = course();
        assert!(!check_collision(&v(1.0, 0.0, 1.0), 0.05, &c));
        let o = c.obstacles[0];
        assert!(check_collision(
            &v(o.center_xy[0], o.center_xy[1], 1.0),
            0.05,
            &c
        ));
        // Exactly radius_sum away at the same height.
        let touching = v(o.center_xy[0] + o.radius + 0.05, o.center_xy[1], 1.0);
        assert_eq!(
            find_collision(&touching, 0.05, &c),
            Some(Collision::Obstacle { index: 0 })
        );
        let clear = v(o.center_xy[0] + o.radius + 0.0501, o.center_xy[1], 1.0);
        assert!(!check_collision(&clear, 0.05, &c));
        // Above the top cap: vertical gap only.
        let above = v(o.center_xy[0], o.center_xy[1], o.height + 0.04);
        assert!(check_collision(&above, 0.05, &c));
        let over = v(o.center_xy[0], o.center_xy[1], o.height + 0.06);
        assert!(!check_collision(&over, 0.05, &c));
        assert_eq!(
            find_collision(&v(-1.0, 0.0, 1.0), 0.05, &c),
            Some(Collision::OutOfBounds)
        );
        assert!(!check_collision(&Vector3::from(c.start), 0.05, &c));
    }

    #[test]
    fn paper_track_loads() {
        let f = CourseFile::paper_track();
        assert_eq!(f.format, 1);
        assert_eq!(f.course.gates.len(), 1);
        assert_eq!(f.course.obstacles.len(), 2);
        assert!(f.exercise("paper-track").is_ok());
        assert!(f.exercise("basics").is_ok());
        assert!(f.exercise("nope").is_err());
    }

    #[test]
    fn rejects_wrong_format_and_bad_geometry() {
        let text = PAPER_TRACK_TOML.replace("format = 1", "format = 2");
        assert!(matches!(
            CourseFile::from_toml_str(&text),
            Err(CourseError::Format(2))
        ));
        let mut c = course();
        c.gates[0].normal = [1.0, 1.0, 0.0];
        assert!(c.validate().is_err());
        let mut c = course();
        c.obstacles[0].radius = 0.0;
        assert!(c.validate().is_err());
    }

    fn quad_at(p: Vector3<f64>) -> QuadState {
        QuadState::at_rest(p)
    }

    #[test]
    fn translate_already_satisfied_completes_on_first_tick() {
        let c = course();
        let ex = Exercise {
            name: "t".into(),
            steps: vec![ExerciseStep::TranslateTo {
                xy: [c.start[0], c.start[1]],
                tolerance: 0.1,
            }],
        };
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        let ev = r.advance(&c, &quad_at(Vector3::from(c.start)), 0.001);
        assert_eq!(
            ev,
            vec![
                ScriptEvent::StepCompleted { index: 0 },
                ScriptEvent::ExerciseCompleted
            ]
        );
        assert_eq!(r.status(), ScriptStatus::Completed);
    }

    #[test]
    fn hold_altitude_timer_restarts_after_excursion() {
        let c = course();
        let ex = Exercise {
            name: "h".into(),
            steps: vec![ExerciseStep::HoldAltitude {
                z: 1.0,
                tolerance: 0.1,
                duration: 1.0,
            }],
        };
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        let dt = 0.01;
        // 0.6 s inside, 0.2 s outside, then inside until completion.
        let mut completed_at = None;
        for i in 0..300 {
            let t = i as f64 * dt;
            let z = if (0.6..0.8).contains(&t) { 1.5 } else { 1.0 };
            let ev = r.advance(&c, &quad_at(v(1.0, 0.0, z)), dt);
            if ev.contains(&ScriptEvent::ExerciseCompleted) {
                completed_at = Some(t);
                break;
            }
        }
        let t = completed_at.expect("completes");
        // Re-entry at t = 0.8; 100 ticks of 10 ms later is t = 1.79.
        assert!((t - 1.79).abs() < 1e-9, "{t}");
        assert!(t - 0.8 >= 1.0 - dt - 1e-9);
    }

    #[test]
    fn collision_fails_exercise_and_progress_never_reverts() {
        let c = course();
        let ex = CourseFile::paper_track()
            .exercise("paper-track")
            .unwrap()
            .clone();
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        r.advance(&c, &quad_at(v(1.0, 0.0, 1.0)), 0.01);
        let o = c.obstacles[1];
        let ev = r.advance(&c, &quad_at(v(o.center_xy[0], o.center_xy[1], 0.5)), 0.01);
        assert!(ev
            .iter()
            .any(|e| matches!(e, ScriptEvent::ExerciseFailed { .. })));
        assert_eq!(r.status(), ScriptStatus::Failed);
        let step = r.current_step();
        r.advance(&c, &quad_at(v(1.0, 0.0, 1.0)), 0.01);
        assert_eq!(r.current_step(), step);
    }

    #[test]
    fn hard_touchdown_is_a_crash() {
        let c = course();
        let ex = Exercise {
            name: "x".into(),
            steps: vec![ExerciseStep::Land],
        };
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        let mut falling = quad_at(v(1.0, 0.0, 0.2));
        falling.velocity = v(0.0, 0.0, -3.0);
        r.advance(&c, &falling, 0.01);
        let ev = r.advance(&c, &quad_at(v(1.0, 0.0, 0.0)), 0.01);
        assert!(ev.contains(&ScriptEvent::Collision {
            collision: Collision::Ground
        }));
    }

    #[test]
    fn rotate_yaw_counts_direction() {
        let c = course();
        let ex = Exercise {
            name: "r".into(),
            steps: vec![
                ExerciseStep::RotateYaw {
                    degrees: 90.0,
                    direction: YawDirection::Clockwise,
                },
                ExerciseStep::RotateYaw {
                    degrees: 90.0,
                    direction: YawDirection::CounterClockwise,
                },
            ],
        };
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        let mut q = quad_at(v(1.0, 0.0, 1.0));
        // Clockwise through the ±180° wrap: yaw 0 → −100°.
        for deg in (0..=100).map(|d| -(d as f64)) {
            q.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, deg.to_radians());
            r.advance(&c, &q, 0.01);
        }
        assert_eq!(r.current_step(), 1);
        // Step 1 started at −90°, so the overshoot to −100° must be undone first.
        for deg in (0..=95).map(|d| -100.0 + d as f64) {
            q.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, deg.to_radians());
            r.advance(&c, &q, 0.01);
        }
        assert_eq!(r.status(), ScriptStatus::Running);
        for deg in (1..=5).map(|d| -5.0 + d as f64) {
            q.attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, deg.to_radians());
            r.advance(&c, &q, 0.01);
        }
        assert_eq!(r.status(), ScriptStatus::Completed);
    }

    #[test]
    fn pass_gate_step_and_lap_semantics() {
        let c = course();
        let g = c.gates[0];
        let ex = Exercise {
            name: "g".into(),
            steps: vec![ExerciseStep::PassGate { index: 0 }],
        };
        let mut r = ScriptRunner::new(ex, RunnerLimits::default());
        let before = v(g.center[0] - 0.05, g.center[1], g.center[2]);
        let after = v(g.center[0] + 0.05, g.center[1], g.center[2]);
        r.advance(&c, &quad_at(before), 0.01);
        let ev = r.advance(&c, &quad_at(after), 0.01);
        assert!(ev.contains(&ScriptEvent::GatePassed { index: 0 }));
        assert!(ev.contains(&ScriptEvent::ExerciseCompleted));
        // Back through (not counted) then forward again (counted).
        let back = r.advance(&c, &quad_at(before), 0.01);
        assert!(back.is_empty());
        let again = r.advance(&c, &quad_at(after), 0.01);
        assert_eq!(again, vec![ScriptEvent::GatePassed { index: 0 }]);
    }
}
