//! Baseline congestion controllers for comparison runs: Tahoe, Reno, Vegas,
//! and a Westwood-style bandwidth estimator.

use crate::sim::SimTime;

use super::{AckInfo, CcPhase, CcState, CongestionController, RttHistory, TripleDupBranch};

fn slow_start_or_avoidance(state: &mut CcState) {
    if state.cwnd < state.ssthresh {
        state.cwnd += 1.0;
        if state.cwnd >= state.ssthresh {
            state.phase = CcPhase::CongestionAvoidance;
        }
    } else {
        state.phase = CcPhase::CongestionAvoidance;
        state.cwnd += 1.0 / state.cwnd;
    }
}

/// Classic Tahoe and Reno. Tahoe restarts from one segment on any loss; Reno
/// fast-retransmits on three duplicates, halving with window inflation during
/// recovery and deflating to the new threshold on the recovery ACK.
#[derive(Debug)]
pub struct TahoeReno {
    state: CcState,
    fast_recovery: bool,
    is_reno: bool,
}

impl TahoeReno {
    pub fn tahoe(state: CcState) -> Self {
        TahoeReno { state, fast_recovery: false, is_reno: false }
    }

    pub fn reno(state: CcState) -> Self {
        TahoeReno { state, fast_recovery: false, is_reno: true }
    }
}

impl CongestionController for TahoeReno {
    fn state(&self) -> CcState {
        self.state
    }

    fn set_base_rtt(&mut self, base_rtt_s: f64) {
        self.state.base_rtt = base_rtt_s;
    }

    fn on_new_ack(&mut self, _info: &AckInfo, _hist: &RttHistory) {
        if self.fast_recovery {
            // deflate to the halved threshold
            self.state.cwnd = self.state.ssthresh;
            self.fast_recovery = false;
            self.state.phase = CcPhase::CongestionAvoidance;
            return;
        }
        slow_start_or_avoidance(&mut self.state);
    }

    fn on_dup_ack(&mut self) {
        if self.fast_recovery {
            self.state.cwnd += 1.0; // window inflation per extra duplicate
        }
    }

    fn on_triple_dup(&mut self, _now: SimTime, _hist: &RttHistory) -> TripleDupBranch {
        self.state.ssthresh = (self.state.cwnd / 2.0).max(2.0);
        if self.is_reno {
            self.state.cwnd = self.state.ssthresh + 3.0;
            self.fast_recovery = true;
            self.state.phase = CcPhase::CongestionAvoidance;
        } else {
            self.state.cwnd = 1.0;
            self.state.phase = CcPhase::FastStart;
        }
        TripleDupBranch::Classic
    }

    fn on_timeout(&mut self) {
        self.state.ssthresh = (self.state.cwnd / 2.0).max(2.0);
        self.state.cwnd = 1.0;
        self.fast_recovery = false;
        self.state.phase = CcPhase::FastStart;
    }
}

/// Vegas-style RTT watcher: once per round trip, the expected/actual
/// throughput difference (in segments) adjusts the window additively against
/// the alpha/beta band. Zero or negative difference means the path currently
/// shows no queueing signal and the window is held.
#[derive(Debug)]
pub struct Vegas {
    state: CcState,
    alpha: f64,
    beta: f64,
    last_adjust: Option<SimTime>,
}

impl Vegas {
    pub fn new(state: CcState) -> Self {
        Vegas { state, alpha: 1.0, beta: 3.0, last_adjust: None }
    }

    pub fn diff_segments(&self, rtt_s: f64) -> f64 {
        if !self.state.base_rtt.is_finite() || rtt_s <= 0.0 {
            return 0.0;
        }
        let expected = self.state.cwnd / self.state.base_rtt;
        let actual = self.state.cwnd / rtt_s;
        (expected - actual) * self.state.base_rtt
    }
}

impl CongestionController for Vegas {
    fn state(&self) -> CcState {
        self.state
    }

    fn set_base_rtt(&mut self, base_rtt_s: f64) {
        self.state.base_rtt = base_rtt_s;
    }

    fn on_new_ack(&mut self, info: &AckInfo, _hist: &RttHistory) {
        if self.state.cwnd < self.state.ssthresh && self.state.phase == CcPhase::FastStart {
            self.state.cwnd += 1.0;
            if self.state.cwnd >= self.state.ssthresh {
                self.state.phase = CcPhase::CongestionAvoidance;
            }
            return;
        }
        self.state.phase = CcPhase::CongestionAvoidance;
        let due = match self.last_adjust {
            None => true,
            Some(at) => info.now.saturating_sub(at).as_secs_f64() >= info.rtt_sample_s,
        };
        if !due {
            return;
        }
        self.last_adjust = Some(info.now);
        let diff = self.diff_segments(info.rtt_sample_s);
        if diff > self.beta {
            self.state.cwnd = (self.state.cwnd - 1.0).max(2.0);
        } else if diff > 0.0 && diff < self.alpha {
            self.state.cwnd += 1.0;
        }
        // diff <= 0 or within [alpha, beta]: hold
    }

    fn on_dup_ack(&mut self) {}

    fn on_triple_dup(&mut self, _now: SimTime, _hist: &RttHistory) -> TripleDupBranch {
        self.state.ssthresh = (self.state.cwnd / 2.0).max(2.0);
        self.state.cwnd = self.state.ssthresh + 3.0;
        self.state.phase = CcPhase::CongestionAvoidance;
        TripleDupBranch::Classic
    }

    fn on_timeout(&mut self) {
        self.state.ssthresh = (self.state.cwnd / 2.0).max(2.0);
        self.state.cwnd = 1.0;
        self.state.phase = CcPhase::FastStart;
    }
}

/// Westwood-style loss differentiation: an exponentially-weighted ACK-rate
/// filter estimates the delivered bandwidth, and losses set the threshold to
/// the estimated pipe size instead of blindly halving.
#[derive(Debug)]
pub struct WestwoodLite {
    state: CcState,
    bandwidth_bps: f64,
    segment_wire_bits: f64,
    filter_gain: f64,
}

impl WestwoodLite {
    pub fn new(state: CcState, segment_wire_bits: f64) -> Self {
        WestwoodLite { state, bandwidth_bps: 0.0, segment_wire_bits, filter_gain: 0.1 }
    }

    pub fn bandwidth_estimate_bps(&self) -> f64 {
        self.bandwidth_bps
    }

    fn pipe_segments(&self) -> f64 {
        if !self.state.base_rtt.is_finite() {
            return 2.0;
        }
        (self.bandwidth_bps * self.state.base_rtt / self.segment_wire_bits).max(2.0)
    }
}

impl CongestionController for WestwoodLite {
    fn state(&self) -> CcState {
        self.state
    }

    fn set_base_rtt(&mut self, base_rtt_s: f64) {
        self.state.base_rtt = base_rtt_s;
    }

    fn on_new_ack(&mut self, info: &AckInfo, _hist: &RttHistory) {
        if let Some(prev) = info.prev_ack_at {
            let dt = info.now.saturating_sub(prev).as_secs_f64();
            if dt > 0.0 {
                let sample = info.newly_acked_bytes as f64 * 8.0 / dt;
                self.bandwidth_bps += self.filter_gain * (sample - self.bandwidth_bps);
            }
        }
        slow_start_or_avoidance(&mut self.state);
    }

    fn on_dup_ack(&mut self) {}

    fn on_triple_dup(&mut self, _now: SimTime, _hist: &RttHistory) -> TripleDupBranch {
        self.state.ssthresh = self.pipe_segments();
        self.state.cwnd = self.state.ssthresh;
        self.state.phase = CcPhase::CongestionAvoidance;
        TripleDupBranch::Classic
    }

    fn on_timeout(&mut self) {
        self.state.ssthresh = self.pipe_segments();
        self.state.cwnd = 1.0;
        self.state.phase = CcPhase::FastStart;
    }
}
