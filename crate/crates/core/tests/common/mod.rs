//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Gate given by heading angle and an optional flat orientation, with its
/// plane basis written out by hand rather than derived with cross products.
#[derive(Debug, Clone, Copy)]
pub struct OracleGate {
    pub center: [f64; 3],
    /// Horizontal heading of the normal, radians. Ignored when `flat`.
    pub heading: f64,
    /// Normal points straight up when set.
    pub flat: bool,
    pub width: f64,
    pub height: f64,
}

impl OracleGate {
    pub fn normal(&self) -> [f64; 3] {
        if self.flat {
            [0.0, 0.0, 1.0]
        } else {
            [self.heading.cos(), self.heading.sin(), 0.0]
        }
    }

    /// Width and height axes of the opening.
    pub fn axes(&self) -> ([f64; 3], [f64; 3]) {
        if self.flat {
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        } else {
            (
                [-self.heading.sin(), self.heading.cos(), 0.0],
                [0.0, 0.0, 1.0],
            )
        }
    }

    fn local(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [
            p[0] - self.center[0],
            p[1] - self.center[1],
            p[2] - self.center[2],
        ];
        let (w, h) = self.axes();
        let n = self.normal();
        let dot = |a: [f64; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
        [dot(n), dot(w), dot(h)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    NoPass,
    /// Too close to an edge or the plane for the sampler to judge.
    Ambiguous,
}

pub const GATE_SAMPLES: usize = 10_000;
pub const GATE_MARGIN: f64 = 1e-3;

/// Walks the segment in small steps and looks for a back-to-front crossing
/// inside the opening.
pub fn gate_oracle(p0: [f64; 3], p1: [f64; 3], gate: &OracleGate) -> Verdict {
    let at = |s: f64| {
        [
            p0[0] + (p1[0] - p0[0]) * s,
            p0[1] + (p1[1] - p0[1]) * s,
            p0[2] + (p1[2] - p0[2]) * s,
        ]
    };
    let start = gate.local(p0)[0];
    let end = gate.local(p1)[0];
    if start.abs() < GATE_MARGIN || end.abs() < GATE_MARGIN {
        return Verdict::Ambiguous;
    }
    if !(start < 0.0 && end > 0.0) {
        return Verdict::NoPass;
    }
    let mut prev = gate.local(at(0.0));
    for k in 1..=GATE_SAMPLES {
        let cur = gate.local(at(k as f64 / GATE_SAMPLES as f64));
        if prev[0] < 0.0 && cur[0] >= 0.0 {
            let mid = [(prev[1] + cur[1]) / 2.0, (prev[2] + cur[2]) / 2.0];
            let ew = (mid[0].abs() - gate.width / 2.0).abs();
            let eh = (mid[1].abs() - gate.height / 2.0).abs();
            if ew < GATE_MARGIN || eh < GATE_MARGIN {
                return Verdict::Ambiguous;
            }
            let inside = mid[0].abs() < gate.width / 2.0 && mid[1].abs() < gate.height / 2.0;
            return if inside {
                Verdict::Pass
            } else {
                Verdict::NoPass
            };
        }
        prev = cur;
    }
    Verdict::NoPass
}

/// Distance from a point to a ground-standing cylinder, measured in the
/// (radial, vertical) half-plane by sampling the outline of the rectangle
/// [0, radius] × [0, height].
pub fn cylinder_distance(p: [f64; 3], center_xy: [f64; 2], radius: f64, height: f64) -> f64 {
    let rho = ((p[0] - center_xy[0]).powi(2) + (p[1] - center_xy[1]).powi(2)).sqrt();
    let z = p[2];
    if rho <= radius && (0.0..=height).contains(&z) {
        return 0.0;
    }
    const N: usize = 20_000;
    let mut best = f64::INFINITY;
    for k in 0..=N {
        let t = k as f64 / N as f64;
        for (a, b) in [
            (radius, height * t),
            (radius * t, height),
            (radius * t, 0.0),
        ] {
            best = best.min(((rho - a).powi(2) + (z - b).powi(2)).sqrt());
        }
    }
    best
}

/// CRC-8/DVB-S2 computed bit by bit, polynomial 0xD5, init 0.
pub fn crc8_bitwise(data: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &byte in data {
        crc ^= byte;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 {
                (crc << 1) ^ 0xD5
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// True if some offset outside `starts` holds a sync byte, a length in
/// 2..=62 and a matching CRC. Such a frame is indistinguishable from a real
/// one and may swallow the start of a genuine frame.
pub fn has_forged_frame(bytes: &[u8], starts: &[usize]) -> bool {
    (0..bytes.len()).any(|i| {
        if bytes[i] != 0xC8 || starts.contains(&i) || i + 1 >= bytes.len() {
            return false;
        }
        let len = usize::from(bytes[i + 1]);
        let end = i + 2 + len;
        (2..=62).contains(&len)
            && end <= bytes.len()
            && crc8_bitwise(&bytes[i + 2..end - 1]) == bytes[end - 1]
    })
}
