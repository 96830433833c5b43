//! Reliable-transfer sender/receiver state machines with a pluggable
//! congestion-control layer.
//!
//! The congestion controllers are pure state transitions over [`CcState`],
//! driven by the sender; they can be exercised without the simulator.

pub mod aggressive;
pub mod baseline;
pub mod connection;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::rng::mix64;
use crate::sim::SimTime;

pub use connection::{CcEvent, CcEventKind, Receiver, Sender, SenderOutput, TimerKind, TimerOp, TransportConfig};

/// Congestion threshold beta: losing three segments within one base RTT is
/// treated as a small-probability event on an uncongested path.
pub const BETA_SEGMENTS: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum TransportError {
    #[error("rtt history is empty")]
    EmptyHistory,
    #[error("no base rtt sample recorded yet")]
    NoBaseRtt,
}

/// A simulated data segment. Empty segments carry no payload and exist only
/// to elicit an extra ACK from the receiver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub seq: u64,
    pub len: u32,
    pub is_empty: bool,
    pub sent_at: SimTime,
    pub is_retransmit: bool,
}

/// Cumulative acknowledgment. `echo_sent_at` echoes the send timestamp of the
/// segment that elicited it, so the sender measures RTT exactly even for
/// retransmissions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ack {
    pub cum_ack: u64,
    pub echo_sent_at: SimTime,
    pub recv_at: SimTime,
}

/// Window-growth phase. `FastStart` is the exponential phase (fast start for
/// the aggressive controller, classic slow start for the baselines).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CcPhase {
    FastStart,
    CongestionAvoidance,
    MaintenanceFrozen,
}

/// Congestion controller state: window and threshold in segments (fractional
/// accumulators; transmission gates on the floor).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcState {
    pub cwnd: f64,
    pub ssthresh: f64,
    /// Minimum RTT observed so far, seconds; infinite until the first sample.
    pub base_rtt: f64,
    pub phase: CcPhase,
}

impl CcState {
    pub fn new(initial_cwnd: f64, initial_ssthresh: f64) -> Self {
        CcState {
            cwnd: initial_cwnd.max(1.0),
            ssthresh: initial_ssthresh.max(2.0),
            base_rtt: f64::INFINITY,
            phase: CcPhase::FastStart,
        }
    }
}

/// Timestamped RTT observations, oldest first, evicted oldest-first beyond
/// capacity. Weights for the smoothed mean decay with age at `decay_tau_s`.
#[derive(Clone, Debug)]
pub struct RttHistory {
    samples: VecDeque<(SimTime, f64)>,
    capacity: usize,
    decay_tau_s: f64,
}

impl RttHistory {
    pub fn new(capacity: usize, decay_tau_s: f64) -> Self {
        assert!(capacity >= 1 && decay_tau_s > 0.0);
        RttHistory { samples: VecDeque::with_capacity(capacity), capacity, decay_tau_s }
    }

    pub fn with_defaults() -> Self {
        RttHistory::new(64, 1.0)
    }

    /// Record a sample. Timestamps must be non-decreasing; a sample at the
    /// same instant as the previous one replaces it, keeping T_i strictly
    /// increasing.
    pub fn record(&mut self, at: SimTime, rtt_s: f64) {
        if let Some(last) = self.samples.back_mut() {
            assert!(at >= last.0, "rtt samples must arrive in time order");
            if at == last.0 {
                last.1 = rtt_s;
                return;
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((at, rtt_s));
    }

    pub fn latest(&self) -> Option<(SimTime, f64)> {
        self.samples.back().copied()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn decay_tau_s(&self) -> f64 {
        self.decay_tau_s
    }

    pub fn iter(&self) -> impl Iterator<Item = &(SimTime, f64)> {
        self.samples.iter()
    }
}

/// The throughput-gap signal computed at loss time: sigma in segments,
/// compared against beta to classify the loss cause, and the threshold
/// control coefficient k used on the congestive branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CongestionSignal {
    pub sigma: f64,
    pub beta: f64,
    pub expected: f64,
    pub actual: f64,
    /// Defined (and clamped to <= 1) only when sigma > beta.
    pub k: Option<f64>,
    pub smoothed_rtt: f64,
}

/// Which branch a triple-duplicate-ACK event took.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TripleDupBranch {
    /// sigma <= beta: loss attributed to random corruption; window grows.
    RandomLoss { sigma: f64 },
    /// sigma > beta: loss attributed to congestion; threshold scaled by k.
    CongestiveLoss { sigma: f64, k: f64 },
    /// Baseline controllers, which do not classify.
    Classic,
}

/// Selectable congestion-control algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Aggressive,
    Tahoe,
    Reno,
    Vegas,
    WestwoodLite,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Aggressive,
        Algorithm::Tahoe,
        Algorithm::Reno,
        Algorithm::Vegas,
        Algorithm::WestwoodLite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Aggressive => "aggressive",
            Algorithm::Tahoe => "tahoe",
            Algorithm::Reno => "reno",
            Algorithm::Vegas => "vegas",
            Algorithm::WestwoodLite => "westwood_lite",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Context handed to a controller on a new cumulative ACK.
#[derive(Clone, Copy, Debug)]
pub struct AckInfo {
    pub now: SimTime,
    pub rtt_sample_s: f64,
    pub newly_acked_bytes: u64,
    pub prev_ack_at: Option<SimTime>,
}

/// The pluggable congestion-control interface. Implementations are pure state
/// machines: every method is a transition on [`CcState`] plus private extras.
pub trait CongestionController: std::fmt::Debug {
    fn state(&self) -> CcState;

    /// The sender's authoritative minimum-RTT estimate, refreshed before any
    /// other callback on an ACK.
    fn set_base_rtt(&mut self, base_rtt_s: f64);

    /// A cumulative ACK advanced.
    fn on_new_ack(&mut self, info: &AckInfo, hist: &RttHistory);

    /// A duplicate-valued cumulative ACK arrived (below the retransmit
    /// threshold). `info.newly_acked_bytes` is zero, but the duplicate still
    /// witnesses one segment delivered out of order.
    fn on_dup_ack(&mut self, info: &AckInfo);

    /// The duplicate-ACK threshold was reached.
    fn on_triple_dup(&mut self, now: SimTime, hist: &RttHistory) -> TripleDupBranch;

    /// The retransmission timer expired.
    fn on_timeout(&mut self);

    /// Whether each outgoing data segment should be paired with an empty
    /// ACK-eliciting segment right now.
    fn sends_empty_segments(&self) -> bool {
        false
    }

    /// Freeze the window for a link interruption. Returns false if the
    /// algorithm has no maintenance mode.
    fn enter_maintenance(&mut self) -> bool {
        false
    }

    /// Thaw after a probe was acknowledged.
    fn exit_maintenance(&mut self) {}
}

/// Construct a controller by algorithm name.
pub fn make_controller(
    algo: Algorithm,
    initial_cwnd: f64,
    initial_ssthresh: f64,
    segment_wire_bits: f64,
    empty_segments_in_ca: bool,
) -> Box<dyn CongestionController> {
    let state = CcState::new(initial_cwnd, initial_ssthresh);
    match algo {
        Algorithm::Aggressive => Box::new(aggressive::AggressiveCc::new(state, empty_segments_in_ca)),
        Algorithm::Tahoe => Box::new(baseline::TahoeReno::tahoe(state)),
        Algorithm::Reno => Box::new(baseline::TahoeReno::reno(state)),
        Algorithm::Vegas => Box::new(baseline::Vegas::new(state)),
        Algorithm::WestwoodLite => Box::new(baseline::WestwoodLite::new(state, segment_wire_bits)),
    }
}

const PATTERN_SALT: u64 = 0x0070_6179_6C6F_6164; // "payload"

/// Deterministic synthetic payload byte at a stream offset. Sender and
/// receiver both derive bytes from this, so a checksum over the reassembled
/// stream verifies ordering and coverage end to end.
pub fn pattern_byte(offset: u64) -> u8 {
    let block = mix64((offset >> 3) ^ PATTERN_SALT);
    (block >> ((offset & 7) * 8)) as u8
}

/// FNV-1a checksum of the synthetic stream `[0, len)`.
pub fn stream_checksum(len: u64) -> u64 {
    let mut h = ChecksumState::new();
    h.extend(0, len);
    h.value()
}

/// Incremental FNV-1a over the synthetic byte stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChecksumState(u64);

impl ChecksumState {
    pub fn new() -> Self {
        ChecksumState(0xCBF2_9CE4_8422_2325)
    }

    pub fn extend(&mut self, from: u64, to: u64) {
        let mut h = self.0;
        for off in from..to {
            h ^= pattern_byte(off) as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        self.0 = h;
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

impl Default for ChecksumState {
    fn default() -> Self {
        Self::new()
    }
}
