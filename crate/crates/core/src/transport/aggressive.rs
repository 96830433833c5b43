//! The aggressive congestion-control mechanism: fast start with empty-segment
//! ACK stimulation, RTT-history-based loss-cause classification, and the
//! frozen-window maintenance mode for link interruptions.
//!
//! All transitions are free functions over [`CcState`] so they can be tested
//! directly; [`AggressiveCc`] adapts them to the controller trait.

use crate::sim::SimTime;

use super::{
    AckInfo, CcPhase, CcState, CongestionController, CongestionSignal, RttHistory, TransportError,
    TripleDupBranch, BETA_SEGMENTS,
};

/// Time-decayed weighted mean of the RTT history:
/// RTT~ = sum_i e^(-tau_i) rtt_i / sum_i e^(-tau_i), with tau_i the sample age
/// in units of the history's decay constant.
///
/// Weights are normalized, so only age *differences* matter; computing them
/// relative to the newest sample keeps the exponentials from underflowing.
/// The result is clamped into [min sample, max sample]: it is a convex
/// combination, and the clamp keeps float rounding from leaking outside, so
/// an all-equal history returns exactly that value.
pub fn smoothed_rtt(hist: &RttHistory, now: SimTime) -> Result<f64, TransportError> {
    let Some((t_latest, rtt_latest)) = hist.latest() else {
        return Err(TransportError::EmptyHistory);
    };
    debug_assert!(now >= t_latest);
    let tau = hist.decay_tau_s();
    let mut weight_sum = 0.0;
    let mut offset_sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &(t_i, rtt_i) in hist.iter() {
        let age_rel = (t_latest - t_i).as_secs_f64() / tau;
        let w = (-age_rel).exp();
        weight_sum += w;
        offset_sum += w * (rtt_i - rtt_latest);
        min = min.min(rtt_i);
        max = max.max(rtt_i);
    }
    Ok((rtt_latest + offset_sum / weight_sum).clamp(min, max))
}

/// The throughput-gap signal:
/// expected = cwnd / base_rtt, actual = cwnd / RTT~,
/// sigma = (expected - actual) * base_rtt,
/// and on the congestive side k = (beta/sigma) * (base_rtt/RTT~), clamped to 1.
pub fn compute_sigma(state: &CcState, hist: &RttHistory, now: SimTime) -> Result<CongestionSignal, TransportError> {
    if !(state.base_rtt.is_finite() && state.base_rtt > 0.0) {
        return Err(TransportError::NoBaseRtt);
    }
    let rtt_smooth = smoothed_rtt(hist, now)?;
    let expected = state.cwnd / state.base_rtt;
    let actual = state.cwnd / rtt_smooth;
    let sigma = (expected - actual) * state.base_rtt;
    let k = if sigma > BETA_SEGMENTS {
        Some(((BETA_SEGMENTS / sigma) * (state.base_rtt / rtt_smooth)).min(1.0))
    } else {
        None
    };
    Ok(CongestionSignal { sigma, beta: BETA_SEGMENTS, expected, actual, k, smoothed_rtt: rtt_smooth })
}

/// Loss-cause reaction on the third duplicate ACK.
///
/// sigma <= beta (random corruption): ssthresh takes the current window and
/// the window grows by the three segments the duplicates acknowledged.
/// sigma > beta (congestion): ssthresh is rescaled by k. The rescaled value
/// is kept within [2, cwnd] so the threshold never rises above the window it
/// was cut from.
pub fn on_triple_dup_ack(state: CcState, sig: &CongestionSignal) -> CcState {
    let mut s = state;
    if sig.sigma <= sig.beta {
        s.ssthresh = s.cwnd.max(2.0);
    } else {
        let k = sig.k.expect("k is defined when sigma > beta");
        let scaled = (s.cwnd * k).round().max(2.0);
        s.ssthresh = if s.cwnd >= 2.0 { scaled.min(s.cwnd) } else { 2.0 };
    }
    s.cwnd = s.ssthresh + 3.0;
    s.phase = CcPhase::CongestionAvoidance;
    s
}

/// Retransmission timeout: halve the threshold, restart from a unit window in
/// fast start.
pub fn on_timeout(state: CcState) -> CcState {
    let mut s = state;
    s.ssthresh = (s.ssthresh / 2.0).max(2.0);
    s.cwnd = 1.0;
    s.phase = CcPhase::FastStart;
    s
}

/// Fast start grows the window by one segment per ACK of any kind. With each
/// data segment paired with an empty segment, a lossless round trip delivers
/// two ACKs per segment in flight, tripling the window per RTT.
pub fn fast_start_on_ack(state: CcState) -> CcState {
    debug_assert_eq!(state.phase, CcPhase::FastStart);
    let mut s = state;
    s.cwnd += 1.0;
    if s.cwnd >= s.ssthresh {
        s.phase = CcPhase::CongestionAvoidance;
    }
    s
}

/// Steady-state additive increase: one segment per round trip.
pub fn congestion_avoidance_on_ack(state: CcState) -> CcState {
    let mut s = state;
    s.cwnd += 1.0 / s.cwnd;
    s
}

/// Link-break test: the latest RTT observation exceeded ten times the
/// geometric estimate, or no ACK of any kind has arrived for that long
/// (a fully dead link produces no RTT samples at all).
pub fn maintenance_check(hist: &RttHistory, last_ack_or_open: SimTime, now: SimTime, rtt_est_s: f64) -> bool {
    debug_assert!(rtt_est_s > 0.0);
    let threshold = crate::geometry::INTERRUPTION_RTT_MULTIPLIER * rtt_est_s;
    let latest_exceeds = hist.latest().is_some_and(|(_, rtt)| rtt > threshold);
    let reference = hist.latest().map_or(last_ack_or_open, |(t, _)| t.max(last_ack_or_open));
    let silent = now.saturating_sub(reference).as_secs_f64() > threshold;
    latest_exceeds || silent
}

/// Window and threshold captured at freeze time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaintenanceSnapshot {
    pub cwnd: f64,
    pub ssthresh: f64,
}

/// Freeze the controller: the window state is held exactly as-is while the
/// sender suspends timers and probes the path.
pub fn enter_maintenance(state: CcState) -> (CcState, MaintenanceSnapshot) {
    let snapshot = MaintenanceSnapshot { cwnd: state.cwnd, ssthresh: state.ssthresh };
    let mut s = state;
    s.phase = CcPhase::MaintenanceFrozen;
    (s, snapshot)
}

/// Thaw on a probe acknowledgment: restore the frozen window and resume in
/// congestion avoidance.
pub fn exit_maintenance(state: CcState, snapshot: &MaintenanceSnapshot) -> CcState {
    let mut s = state;
    s.cwnd = snapshot.cwnd;
    s.ssthresh = snapshot.ssthresh;
    s.phase = CcPhase::CongestionAvoidance;
    s
}

#[derive(Debug)]
pub struct AggressiveCc {
    state: CcState,
    snapshot: Option<MaintenanceSnapshot>,
    empty_segments_in_ca: bool,
}

impl AggressiveCc {
    pub fn new(state: CcState, empty_segments_in_ca: bool) -> Self {
        AggressiveCc { state, snapshot: None, empty_segments_in_ca }
    }
}

impl CongestionController for AggressiveCc {
    fn state(&self) -> CcState {
        self.state
    }

    fn set_base_rtt(&mut self, base_rtt_s: f64) {
        self.state.base_rtt = base_rtt_s;
    }

    fn on_new_ack(&mut self, _info: &AckInfo, _hist: &RttHistory) {
        match self.state.phase {
            CcPhase::FastStart => self.state = fast_start_on_ack(self.state),
            CcPhase::CongestionAvoidance => self.state = congestion_avoidance_on_ack(self.state),
            CcPhase::MaintenanceFrozen => {}
        }
    }

    fn on_dup_ack(&mut self, _info: &AckInfo) {
        // Empty-segment ACKs repeat the cumulative value by design; in fast
        // start they still count, one window credit per ACK received.
        if self.state.phase == CcPhase::FastStart {
            self.state = fast_start_on_ack(self.state);
        }
    }

    fn on_triple_dup(&mut self, now: SimTime, hist: &RttHistory) -> TripleDupBranch {
        if self.state.phase == CcPhase::MaintenanceFrozen {
            return TripleDupBranch::Classic;
        }
        // With three duplicates observed, at least one ACK carried an RTT, so
        // the history is non-empty; treat a missing signal as the benign case.
        let sig = match compute_sigma(&self.state, hist, now) {
            Ok(sig) => sig,
            Err(_) => CongestionSignal {
                sigma: 0.0,
                beta: BETA_SEGMENTS,
                expected: 0.0,
                actual: 0.0,
                k: None,
                smoothed_rtt: self.state.base_rtt,
            },
        };
        self.state = on_triple_dup_ack(self.state, &sig);
        match sig.k {
            None => TripleDupBranch::RandomLoss { sigma: sig.sigma },
            Some(k) => TripleDupBranch::CongestiveLoss { sigma: sig.sigma, k },
        }
    }

    fn on_timeout(&mut self) {
        if self.state.phase == CcPhase::MaintenanceFrozen {
            return;
        }
        self.state = on_timeout(self.state);
    }

    fn sends_empty_segments(&self) -> bool {
        match self.state.phase {
            CcPhase::FastStart => true,
            CcPhase::CongestionAvoidance => self.empty_segments_in_ca,
            CcPhase::MaintenanceFrozen => false,
        }
    }

    fn enter_maintenance(&mut self) -> bool {
        if self.state.phase != CcPhase::MaintenanceFrozen {
            let (state, snapshot) = enter_maintenance(self.state);
            self.state = state;
            self.snapshot = Some(snapshot);
        }
        true
    }

    fn exit_maintenance(&mut self) {
        if let Some(snapshot) = self.snapshot.take() {
            self.state = exit_maintenance(self.state, &snapshot);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(secs: f64) -> SimTime {
        SimTime::from_secs_f64(secs)
    }

    fn hist_with(samples: &[(f64, f64)]) -> RttHistory {
        let mut h = RttHistory::with_defaults();
        for &(at, rtt) in samples {
            h.record(t(at), rtt);
        }
        h
    }

    #[test]
    fn smoothed_rtt_single_sample_is_identity() {
        let h = hist_with(&[(3.0, 0.5)]);
        assert_eq!(smoothed_rtt(&h, t(9.0)).unwrap(), 0.5);
    }

    #[test]
    fn smoothed_rtt_two_sample_oracle() {
        // (0.5 e^-1 + 0.7) / (e^-1 + 1) = 0.646_211_715_726_001
        let h = hist_with(&[(0.0, 0.5), (1.0, 0.7)]);
        let got = smoothed_rtt(&h, t(1.0)).unwrap();
        assert!((got - 0.646_211_715_726_001).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn smoothed_rtt_constant_history_exact() {
        let h = hist_with(&[(0.0, 0.37), (0.4, 0.37), (2.7, 0.37)]);
        assert_eq!(smoothed_rtt(&h, t(5.0)).unwrap(), 0.37);
    }

    #[test]
    fn smoothed_rtt_empty_history_errors() {
        let h = RttHistory::with_defaults();
        assert_eq!(smoothed_rtt(&h, t(0.0)), Err(TransportError::EmptyHistory));
    }

    fn state(cwnd: f64, ssthresh: f64, base_rtt: f64) -> CcState {
        CcState { cwnd, ssthresh, base_rtt, phase: CcPhase::CongestionAvoidance }
    }

    #[test]
    fn sigma_zero_when_smoothed_equals_base() {
        let h = hist_with(&[(0.0, 0.5), (1.0, 0.5)]);
        let sig = compute_sigma(&state(20.0, 64.0, 0.5), &h, t(1.0)).unwrap();
        assert_eq!(sig.sigma, 0.0);
        assert_eq!(sig.k, None);
    }

    #[test]
    fn sigma_oracle_from_inflated_history() {
        // cwnd 20, base 0.5, RTT~ = 0.646_211_715_726_001:
        // expected 40, actual 30.949_609..., sigma 4.525_195_448_112_115,
        // k = 0.512_954_790_439_291.
        let h = hist_with(&[(0.0, 0.5), (1.0, 0.7)]);
        let sig = compute_sigma(&state(20.0, 64.0, 0.5), &h, t(1.0)).unwrap();
        assert!((sig.expected - 40.0).abs() < 1e-12);
        assert!((sig.actual - 30.949_609_103_775_77).abs() < 1e-9);
        assert!((sig.sigma - 4.525_195_448_112_115).abs() < 1e-9);
        assert!((sig.k.unwrap() - 0.512_954_790_439_291).abs() < 1e-9);
    }

    #[test]
    fn triple_dup_random_branch_grows_window() {
        let sig = CongestionSignal {
            sigma: 2.0,
            beta: 3.0,
            expected: 40.0,
            actual: 36.0,
            k: None,
            smoothed_rtt: 0.55,
        };
        let s = on_triple_dup_ack(state(20.0, 64.0, 0.5), &sig);
        assert_eq!(s.ssthresh, 20.0);
        assert_eq!(s.cwnd, 23.0);
        assert_eq!(s.phase, CcPhase::CongestionAvoidance);
    }

    #[test]
    fn triple_dup_congestive_branch_oracle() {
        let h = hist_with(&[(0.0, 0.5), (1.0, 0.7)]);
        let before = state(20.0, 64.0, 0.5);
        let sig = compute_sigma(&before, &h, t(1.0)).unwrap();
        let s = on_triple_dup_ack(before, &sig);
        // round(20 * 0.512_954...) = round(10.259...) = 10
        assert_eq!(s.ssthresh, 10.0);
        assert_eq!(s.cwnd, 13.0);
    }

    #[test]
    fn triple_dup_congestive_small_window_clamps() {
        let sig = CongestionSignal {
            sigma: 50.0,
            beta: 3.0,
            expected: 0.0,
            actual: 0.0,
            k: Some(0.01),
            smoothed_rtt: 1.0,
        };
        let s = on_triple_dup_ack(state(4.0, 64.0, 0.5), &sig);
        assert_eq!(s.ssthresh, 2.0);
        assert_eq!(s.cwnd, 5.0);
    }

    #[test]
    fn timeout_halves_threshold_and_resets_window() {
        let s = on_timeout(state(40.0, 20.0, 0.5));
        assert_eq!(s.ssthresh, 10.0);
        assert_eq!(s.cwnd, 1.0);
        assert_eq!(s.phase, CcPhase::FastStart);

        let s = on_timeout(state(40.0, 3.0, 0.5));
        assert_eq!(s.ssthresh, 2.0);
    }

    #[test]
    fn fast_start_exits_at_threshold_without_overshoot() {
        let mut s = CcState { cwnd: 80.0, ssthresh: 81.0, base_rtt: 0.5, phase: CcPhase::FastStart };
        s = fast_start_on_ack(s);
        assert_eq!(s.cwnd, 81.0);
        assert_eq!(s.phase, CcPhase::CongestionAvoidance);
    }

    #[test]
    fn congestion_avoidance_adds_one_per_rtt() {
        let mut s = state(10.0, 5.0, 0.5);
        for _ in 0..10 {
            s = congestion_avoidance_on_ack(s);
        }
        assert!((s.cwnd - 11.0).abs() < 0.05);

        let s = congestion_avoidance_on_ack(state(1.0, 5.0, 0.5));
        assert_eq!(s.cwnd, 2.0);
    }

    #[test]
    fn maintenance_check_thresholds() {
        let h = hist_with(&[(10.0, 5.0)]);
        assert!(maintenance_check(&h, t(10.0), t(10.0), 0.48)); // 5.0 > 4.8

        let h = hist_with(&[(10.0, 4.8)]);
        assert!(!maintenance_check(&h, t(10.0), t(10.0), 0.48)); // boundary is strict

        // silent link: last ack at 10, now 16, threshold 4.8
        let h = hist_with(&[(10.0, 0.5)]);
        assert!(maintenance_check(&h, t(10.0), t(16.0), 0.48));
        assert!(!maintenance_check(&h, t(10.0), t(14.0), 0.48));

        // never any ack: silence measured from open
        let h = RttHistory::with_defaults();
        assert!(maintenance_check(&h, t(0.0), t(6.0), 0.48));
    }

    #[test]
    fn maintenance_freeze_and_restore() {
        let before = state(40.0, 25.0, 0.5);
        let (frozen, snap) = enter_maintenance(before);
        assert_eq!(frozen.phase, CcPhase::MaintenanceFrozen);
        assert_eq!(frozen.cwnd, 40.0);
        let resumed = exit_maintenance(frozen, &snap);
        assert_eq!(resumed.cwnd, 40.0);
        assert_eq!(resumed.ssthresh, 25.0);
        assert_eq!(resumed.phase, CcPhase::CongestionAvoidance);
    }

    #[test]
    fn frozen_controller_ignores_loss_events() {
        let mut cc = AggressiveCc::new(state(40.0, 25.0, 0.5), false);
        assert!(cc.enter_maintenance());
        let h = hist_with(&[(0.0, 0.5)]);
        cc.on_timeout();
        cc.on_triple_dup(t(1.0), &h);
        cc.on_new_ack(
            &AckInfo { now: t(1.0), rtt_sample_s: 0.5, newly_acked_bytes: 0, prev_ack_at: None },
            &h,
        );
        assert_eq!(cc.state().cwnd, 40.0);
        assert_eq!(cc.state().ssthresh, 25.0);
        cc.exit_maintenance();
        assert_eq!(cc.state().cwnd, 40.0);
        assert_eq!(cc.state().phase, CcPhase::CongestionAvoidance);
    }

    #[test]
    fn empty_segments_follow_phase() {
        let mut cc = AggressiveCc::new(CcState::new(1.0, 100.0), false);
        assert!(cc.sends_empty_segments());
        for _ in 0..200 {
            cc.on_dup_ack();
        }
        assert_eq!(cc.state().phase, CcPhase::CongestionAvoidance);
        assert!(!cc.sends_empty_segments());

        let cc = AggressiveCc::new(
            CcState { phase: CcPhase::CongestionAvoidance, ..CcState::new(1.0, 100.0) },
            true,
        );
        assert!(cc.sends_empty_segments());
    }
}
