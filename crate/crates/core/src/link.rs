//! ELRS-style radio link model: fixed packet cadence, fixed latency, i.i.d.
//! packet loss, link-quality bookkeeping and receiver failsafe.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crsf::LinkStatistics;

pub const LQ_WINDOW: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("invalid link config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum PacketRate {
    Hz50,
    Hz150,
    Hz250,
    Hz500,
}

impl PacketRate {
    pub fn hz(self) -> u16 {
        match self {
            PacketRate::Hz50 => 50,
            PacketRate::Hz150 => 150,
            PacketRate::Hz250 => 250,
            PacketRate::Hz500 => 500,
        }
    }

    pub fn interval_ms(self) -> f64 {
        1000.0 / f64::from(self.hz())
    }
}

impl TryFrom<u16> for PacketRate {
    type Error = LinkError;

    fn try_from(hz: u16) -> Result<Self, Self::Error> {
        match hz {
            50 => Ok(PacketRate::Hz50),
            150 => Ok(PacketRate::Hz150),
            250 => Ok(PacketRate::Hz250),
            500 => Ok(PacketRate::Hz500),
            other => Err(LinkError::InvalidConfig(format!(
                "packet rate {other} Hz is not one of 50, 150, 250, 500"
            ))),
        }
    }
}

impl From<PacketRate> for u16 {
    fn from(rate: PacketRate) -> Self {
        rate.hz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub packet_rate: PacketRate,
    pub latency_ms: f64,
    pub loss_probability: f64,
    pub rng_seed: u64,
    pub failsafe_timeout_ms: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            packet_rate: PacketRate::Hz250,
            latency_ms: 5.0,
            loss_probability: 0.0,
            rng_seed: 1,
            failsafe_timeout_ms: 300.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err(LinkError::InvalidConfig("latency_ms must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(LinkError::InvalidConfig(
                "loss_probability must lie in [0, 1)".into(),
            ));
        }
        if !(self.failsafe_timeout_ms.is_finite() && self.failsafe_timeout_ms > 0.0) {
            return Err(LinkError::InvalidConfig(
                "failsafe_timeout_ms must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Send times `t0 + k·1000/rate` that fall in `[t0, t1)`.
pub fn schedule_packets(t0_ms: f64, t1_ms: f64, rate: PacketRate) -> Vec<f64> {
    let hz = f64::from(rate.hz());
    (0u64..)
        .map(|k| t0_ms + k as f64 * 1000.0 / hz)
        .take_while(|&t| t < t1_ms)
        .collect()
}

/// Sliding record of the last [`LQ_WINDOW`] packet outcomes plus running totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkStatsWindow {
    outcomes: VecDeque<bool>,
    delivered_in_window: usize,
    pub total_sent: u64,
    pub total_delivered: u64,
}

impl LinkStatsWindow {
    pub fn record(&mut self, delivered: bool) {
        if self.outcomes.len() == LQ_WINDOW && self.outcomes.pop_front() == Some(true) {
            self.delivered_in_window -= 1;
        }
        self.outcomes.push_back(delivered);
        if delivered {
            self.delivered_in_window += 1;
            self.total_delivered += 1;
        }
        self.total_sent += 1;
    }

    /// Percent of the window delivered, truncated. Zero before any packet.
    pub fn lq(&self) -> u8 {
        if self.outcomes.is_empty() {
            return 0;
        }
        (self.delivered_in_window * 100 / self.outcomes.len()) as u8
    }

    /// Percent delivered since the link started.
    pub fn cumulative_lq(&self) -> f64 {
        if self.total_sent == 0 {
            return 0.0;
        }
        self.total_delivered as f64 * 100.0 / self.total_sent as f64
    }

    /// Synthetic RSSI that degrades with LQ: −40 dBm at 100 %, −90 dBm at 0 %.
    pub fn simulated_rssi_dbm(&self) -> i16 {
        -40 - (100 - i16::from(self.lq())) / 2
    }

    pub fn simulated_snr_db(&self) -> i8 {
        10 - ((100 - i16::from(self.lq())) / 5) as i8
    }

    pub fn statistics(&self, rate: PacketRate) -> LinkStatistics {
        LinkStatistics {
            uplink_rssi_dbm: self.simulated_rssi_dbm(),
            link_quality: self.lq(),
            uplink_snr_db: self.simulated_snr_db(),
            active_packet_rate_hz: rate.hz(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmission {
    Delivered { arrival_ms: f64 },
    Lost,
}

/// One send attempt: a single uniform draw decides loss.
pub fn transmit(
    now_ms: f64,
    cfg: &LinkConfig,
    rng: &mut impl Rng,
    window: &mut LinkStatsWindow,
) -> Transmission {
    let lost = rng.gen::<f64>() < cfg.loss_probability;
    window.record(!lost);
    if lost {
        Transmission::Lost
    } else {
        Transmission::Delivered {
            arrival_ms: now_ms + cfg.latency_ms,
        }
    }
}

/// True once the gap since the last arrival strictly exceeds the timeout.
pub fn check_failsafe(last_arrival_ms: f64, now_ms: f64, cfg: &LinkConfig) -> bool {
    now_ms - last_arrival_ms > cfg.failsafe_timeout_ms
}

/// Seeded link carrying raw frame bytes through a single FIFO.
#[derive(Debug, Clone)]
pub struct SimLink {
    cfg: LinkConfig,
    rng: ChaCha8Rng,
    in_flight: VecDeque<(f64, Vec<u8>)>,
    stats: LinkStatsWindow,
}

impl SimLink {
    pub fn new(cfg: LinkConfig) -> Result<Self, LinkError> {
        cfg.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            cfg,
            in_flight: VecDeque::new(),
            stats: LinkStatsWindow::default(),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &LinkStatsWindow {
        &self.stats
    }

    pub fn send(&mut self, bytes: Vec<u8>, now_ms: f64) -> Transmission {
        let outcome = transmit(now_ms, &self.cfg, &mut self.rng, &mut self.stats);
        if let Transmission::Delivered { arrival_ms } = outcome {
            self.in_flight.push_back((arrival_ms, bytes));
        }
        outcome
    }

    /// Frames whose arrival time is at or before `now_ms`, in send order.
    pub fn poll(&mut self, now_ms: f64) -> Vec<(f64, Vec<u8>)> {
        let mut out = Vec::new();
        while self
            .in_flight
            .front()
            .is_some_and(|(arrival, _)| *arrival <= now_ms)
        {
            out.extend(self.in_flight.pop_front());
        }
        out
    }
}
