//! Sender and receiver state machines for one reliable transfer.
//!
//! The sender is event-driven and framework-agnostic: each callback returns a
//! [`SenderOutput`] describing segments to inject on the forward path, timer
//! operations, and congestion-control log records. The simulation runner maps
//! those onto the event queue; tests can drive the machines directly.

use std::collections::BTreeMap;

use crate::sim::SimTime;

use super::aggressive::maintenance_check;
use super::{
    Ack, AckInfo, Algorithm, CcPhase, CcState, ChecksumState, CongestionController, RttHistory,
    Segment, TripleDupBranch, make_controller,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerKind {
    Rto,
    Silence,
    Probe,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimerOp {
    Set(TimerKind, SimTime),
    Cancel(TimerKind),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CcEventKind {
    /// Triple duplicate classified as random corruption (sigma <= beta).
    TripleDupRandom { sigma: f64 },
    /// Triple duplicate classified as congestion (sigma > beta).
    TripleDupCongestive { sigma: f64, k: f64 },
    /// Triple duplicate under a baseline controller.
    TripleDupClassic,
    Timeout,
    MaintenanceEnter,
    MaintenanceExit,
}

/// One congestion-control transition, for the run's event log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcEvent {
    pub at: SimTime,
    pub kind: CcEventKind,
    pub cwnd_before: f64,
    pub cwnd_after: f64,
    pub ssthresh_after: f64,
}

/// Side effects of one sender callback.
#[derive(Debug, Default)]
pub struct SenderOutput {
    pub segments: Vec<Segment>,
    pub timers: Vec<TimerOp>,
    pub cc_events: Vec<CcEvent>,
    /// Payload bytes newly covered by the cumulative ACK.
    pub newly_acked: u64,
    /// Set once, when the whole transfer is acknowledged.
    pub completed: bool,
    pub probes_sent: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct TransportConfig {
    pub segment_payload_bytes: u32,
    pub header_bytes: u32,
    pub initial_cwnd: f64,
    pub initial_ssthresh: f64,
    pub rtt_history_capacity: usize,
    pub rtt_decay_tau_s: f64,
    pub dup_ack_threshold: u32,
    pub min_rto_s: f64,
    pub max_rto_s: f64,
    /// Geometric RTT estimate 2D/c; drives the interruption threshold, the
    /// initial RTO, and the probe cadence.
    pub rtt_est_s: f64,
    pub maintenance_enabled: bool,
    /// Probe cadence while frozen; defaults to 2 * rtt_est.
    pub probe_interval_s: Option<f64>,
    pub empty_segments_in_ca: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            segment_payload_bytes: 1000,
            header_bytes: 40,
            initial_cwnd: 1.0,
            initial_ssthresh: 1e9,
            rtt_history_capacity: 64,
            rtt_decay_tau_s: 1.0,
            dup_ack_threshold: 3,
            min_rto_s: 1.0,
            max_rto_s: 64.0,
            rtt_est_s: 0.5,
            maintenance_enabled: true,
            probe_interval_s: None,
            empty_segments_in_ca: false,
        }
    }
}

impl TransportConfig {
    pub fn wire_bytes(&self, seg: &Segment) -> u32 {
        if seg.is_empty { self.header_bytes } else { seg.len + self.header_bytes }
    }

    pub fn segment_wire_bits(&self) -> f64 {
        ((self.segment_payload_bytes + self.header_bytes) as u64 * 8) as f64
    }

    pub fn probe_interval(&self) -> f64 {
        self.probe_interval_s.unwrap_or(2.0 * self.rtt_est_s)
    }

    pub fn interruption_threshold_s(&self) -> f64 {
        crate::geometry::INTERRUPTION_RTT_MULTIPLIER * self.rtt_est_s
    }
}

#[derive(Clone, Copy, Debug)]
struct SegMeta {
    len: u32,
    retransmitted: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct MaintPause {
    rto_remaining: Option<SimTime>,
}

#[derive(Debug)]
pub struct Sender {
    cfg: TransportConfig,
    cc: Box<dyn CongestionController>,
    algo: Algorithm,

    total_bytes: Option<u64>,
    available: u64,
    next_seq: u64,
    cum_acked: u64,
    inflight: BTreeMap<u64, SegMeta>,
    dup_acks: u32,
    /// Highest sequence outstanding at the last loss event. While the
    /// cumulative ACK is below it, each partial ACK exposes the next hole,
    /// which is retransmitted immediately (no SACK, so one hole per RTT).
    recovery_point: Option<u64>,

    hist: RttHistory,
    base_rtt: f64,
    srtt: Option<f64>,
    rttvar: f64,
    rto_current_s: f64,
    rto_deadline: Option<SimTime>,
    silence_armed: bool,

    open_at: SimTime,
    last_ack_at: Option<SimTime>,
    prev_new_ack_at: Option<SimTime>,
    first_ack_at: Option<SimTime>,
    done_at: Option<SimTime>,
    retired: bool,
    maintenance: Option<MaintPause>,

    pub data_segments_sent: u64,
    pub empty_segments_sent: u64,
    pub retransmits: u64,
}

impl Sender {
    /// `total_bytes: None` means an open-ended stream (data arrives via
    /// `push_app_data` and the transfer never "completes").
    pub fn new(algo: Algorithm, cfg: TransportConfig, total_bytes: Option<u64>, open_at: SimTime) -> Self {
        let cc = make_controller(
            algo,
            cfg.initial_cwnd,
            cfg.initial_ssthresh,
            cfg.segment_wire_bits(),
            cfg.empty_segments_in_ca,
        );
        let rto = (2.0 * cfg.rtt_est_s).clamp(cfg.min_rto_s, cfg.max_rto_s);
        Sender {
            cc,
            algo,
            total_bytes,
            available: 0,
            next_seq: 0,
            cum_acked: 0,
            inflight: BTreeMap::new(),
            dup_acks: 0,
            recovery_point: None,
            hist: RttHistory::new(cfg.rtt_history_capacity, cfg.rtt_decay_tau_s),
            base_rtt: f64::INFINITY,
            srtt: None,
            rttvar: 0.0,
            rto_current_s: rto,
            rto_deadline: None,
            silence_armed: false,
            open_at,
            last_ack_at: None,
            prev_new_ack_at: None,
            first_ack_at: None,
            done_at: None,
            retired: false,
            maintenance: None,
            data_segments_sent: 0,
            empty_segments_sent: 0,
            retransmits: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &TransportConfig {
        &self.cfg
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algo
    }

    pub fn cc_state(&self) -> CcState {
        self.cc.state()
    }

    pub fn cwnd(&self) -> f64 {
        self.cc.state().cwnd
    }

    pub fn phase(&self) -> CcPhase {
        self.cc.state().phase
    }

    pub fn base_rtt(&self) -> f64 {
        self.base_rtt
    }

    pub fn cum_acked(&self) -> u64 {
        self.cum_acked
    }

    pub fn inflight_segments(&self) -> usize {
        self.inflight.len()
    }

    pub fn bytes_in_flight(&self) -> u64 {
        self.inflight.values().map(|m| m.len as u64).sum()
    }

    pub fn done_at(&self) -> Option<SimTime> {
        self.done_at
    }

    pub fn first_ack_at(&self) -> Option<SimTime> {
        self.first_ack_at
    }

    pub fn is_retired(&self) -> bool {
        self.retired
    }

    pub fn is_frozen(&self) -> bool {
        self.cc.state().phase == CcPhase::MaintenanceFrozen
    }

    pub fn rto_current_s(&self) -> f64 {
        self.rto_current_s
    }

    pub fn expected_checksum(&self) -> Option<u64> {
        self.total_bytes.map(super::stream_checksum)
    }

    fn is_active(&self) -> bool {
        !self.retired && self.done_at.is_none()
    }

    /// Make more application data available and send what the window allows.
    pub fn push_app_data(&mut self, bytes: u64, now: SimTime) -> SenderOutput {
        let mut out = SenderOutput::default();
        if !self.is_active() {
            return out;
        }
        self.available += bytes;
        self.try_send(now, &mut out);
        self.arm_silence(now, &mut out);
        out
    }

    pub fn on_ack(&mut self, ack: &Ack, now: SimTime) -> SenderOutput {
        let mut out = SenderOutput::default();
        if !self.is_active() {
            return out;
        }
        if self.is_frozen() {
            self.resume_from_maintenance(ack, now, &mut out);
            return out;
        }

        let rtt_sample = now.saturating_sub(ack.echo_sent_at).as_secs_f64();
        let prev_new_ack = self.prev_new_ack_at;
        self.last_ack_at = Some(now);
        if self.first_ack_at.is_none() {
            self.first_ack_at = Some(now);
        }
        // A sample past the interruption threshold means the link broke; it
        // must not enter the history, where it would poison the smoothed RTT.
        let break_detected = self.maintenance_supported() && rtt_sample > self.cfg.interruption_threshold_s();

        if ack.cum_ack > self.cum_acked {
            let delta = ack.cum_ack - self.cum_acked;
            self.cum_acked = ack.cum_ack;
            while let Some((&seq, meta)) = self.inflight.iter().next() {
                if seq + meta.len as u64 <= ack.cum_ack {
                    self.inflight.remove(&seq);
                } else {
                    break;
                }
            }
            self.dup_acks = 0;
            out.newly_acked = delta;
            let partial = match self.recovery_point {
                Some(rp) if ack.cum_ack < rp => true,
                Some(_) => {
                    self.recovery_point = None;
                    false
                }
                None => false,
            };

            if !break_detected {
                self.record_rtt(now, rtt_sample);
                self.cc.set_base_rtt(self.base_rtt);
                let info = AckInfo { now, rtt_sample_s: rtt_sample, newly_acked_bytes: delta, prev_ack_at: prev_new_ack };
                self.cc.on_new_ack(&info, &self.hist);
                self.prev_new_ack_at = Some(now);
            }

            if let Some(total) = self.total_bytes {
                if self.cum_acked >= total {
                    self.finish(now, &mut out);
                    return out;
                }
            }
            if break_detected {
                self.enter_maintenance_now(now, &mut out);
                return out;
            }
            if partial {
                // the cumulative ACK stopped at the next hole
                self.retransmit_oldest(now, &mut out);
            }
            if self.inflight.is_empty() {
                self.cancel_rto(&mut out);
            } else {
                self.arm_rto(now, &mut out);
            }
            self.try_send(now, &mut out);
        } else if ack.cum_ack == self.cum_acked {
            if break_detected {
                self.enter_maintenance_now(now, &mut out);
                return out;
            }
            self.dup_acks += 1;
            self.record_rtt(now, rtt_sample);
            self.cc.set_base_rtt(self.base_rtt);
            self.cc.on_dup_ack();
            if self.dup_acks == self.cfg.dup_ack_threshold {
                let before = self.cc.state();
                let branch = self.cc.on_triple_dup(now, &self.hist);
                let after = self.cc.state();
                out.cc_events.push(CcEvent {
                    at: now,
                    kind: match branch {
                        TripleDupBranch::RandomLoss { sigma } => CcEventKind::TripleDupRandom { sigma },
                        TripleDupBranch::CongestiveLoss { sigma, k } => {
                            CcEventKind::TripleDupCongestive { sigma, k }
                        }
                        TripleDupBranch::Classic => CcEventKind::TripleDupClassic,
                    },
                    cwnd_before: before.cwnd,
                    cwnd_after: after.cwnd,
                    ssthresh_after: after.ssthresh,
                });
                self.recovery_point = Some(self.next_seq);
                self.retransmit_oldest(now, &mut out);
                self.arm_rto(now, &mut out);
            }
            self.try_send(now, &mut out);
        }
        // else: stale cumulative value; FIFO links make this unreachable

        self.arm_silence(now, &mut out);
        out
    }

    pub fn on_rto_fired(&mut self, now: SimTime) -> SenderOutput {
        let mut out = SenderOutput::default();
        self.rto_deadline = None;
        if !self.is_active() || self.is_frozen() || self.inflight.is_empty() {
            return out;
        }
        let before = self.cc.state();
        self.cc.on_timeout();
        let after = self.cc.state();
        out.cc_events.push(CcEvent {
            at: now,
            kind: CcEventKind::Timeout,
            cwnd_before: before.cwnd,
            cwnd_after: after.cwnd,
            ssthresh_after: after.ssthresh,
        });
        self.dup_acks = 0;
        self.rto_current_s = (self.rto_current_s * 2.0).min(self.cfg.max_rto_s);
        self.recovery_point = Some(self.next_seq);
        self.retransmit_oldest(now, &mut out);
        self.arm_rto(now, &mut out);
        out
    }

    pub fn on_silence_fired(&mut self, now: SimTime) -> SenderOutput {
        let mut out = SenderOutput::default();
        self.silence_armed = false;
        if !self.is_active() || self.is_frozen() || !self.maintenance_supported() {
            return out;
        }
        if self.inflight.is_empty() {
            return out; // idle stream; nothing to maintain
        }
        let reference = self.silence_reference();
        if maintenance_check(&self.hist, reference, now, self.cfg.rtt_est_s) {
            self.enter_maintenance_now(now, &mut out);
        } else {
            self.arm_silence(now, &mut out);
        }
        out
    }

    pub fn on_probe_fired(&mut self, now: SimTime) -> SenderOutput {
        let mut out = SenderOutput::default();
        if self.is_active() && self.is_frozen() {
            self.send_probe(now, &mut out);
        }
        out
    }

    /// Abandon the transfer (e.g. a blocked call): cancel timers and ignore
    /// everything from now on.
    pub fn retire(&mut self) -> SenderOutput {
        let mut out = SenderOutput::default();
        self.cancel_rto(&mut out);
        if self.silence_armed {
            out.timers.push(TimerOp::Cancel(TimerKind::Silence));
            self.silence_armed = false;
        }
        if self.is_frozen() {
            out.timers.push(TimerOp::Cancel(TimerKind::Probe));
        }
        self.retired = true;
        out
    }

    fn maintenance_supported(&self) -> bool {
        self.cfg.maintenance_enabled && self.algo == Algorithm::Aggressive
    }

    fn silence_reference(&self) -> SimTime {
        self.last_ack_at.unwrap_or(self.open_at).max(self.open_at)
    }

    fn record_rtt(&mut self, now: SimTime, rtt_s: f64) {
        self.base_rtt = self.base_rtt.min(rtt_s);
        self.hist.record(now, rtt_s);
        match self.srtt {
            None => {
                self.srtt = Some(rtt_s);
                self.rttvar = rtt_s / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - rtt_s).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * rtt_s);
            }
        }
        let computed = self.srtt.unwrap() + 4.0 * self.rttvar;
        self.rto_current_s = computed.clamp(self.cfg.min_rto_s, self.cfg.max_rto_s);
    }

    fn try_send(&mut self, now: SimTime, out: &mut SenderOutput) {
        if self.is_frozen() {
            return;
        }
        loop {
            let window = self.cc.state().cwnd.floor() as u64;
            if self.inflight.len() as u64 >= window {
                break;
            }
            if self.next_seq >= self.available {
                break;
            }
            let len = (self.available - self.next_seq).min(self.cfg.segment_payload_bytes as u64) as u32;
            let seg = Segment { seq: self.next_seq, len, is_empty: false, sent_at: now, is_retransmit: false };
            self.inflight.insert(self.next_seq, SegMeta { len, retransmitted: false });
            self.next_seq += len as u64;
            self.data_segments_sent += 1;
            out.segments.push(seg);
            if self.cc.sends_empty_segments() {
                self.push_empty(now, out);
            }
            if self.rto_deadline.is_none() {
                self.arm_rto(now, out);
            }
        }
    }

    fn push_empty(&mut self, now: SimTime, out: &mut SenderOutput) {
        out.segments.push(Segment {
            seq: self.next_seq,
            len: 0,
            is_empty: true,
            sent_at: now,
            is_retransmit: false,
        });
        self.empty_segments_sent += 1;
    }

    fn retransmit_oldest(&mut self, now: SimTime, out: &mut SenderOutput) {
        let Some((&seq, meta)) = self.inflight.iter_mut().next() else {
            return;
        };
        meta.retransmitted = true;
        let len = meta.len;
        out.segments.push(Segment { seq, len, is_empty: false, sent_at: now, is_retransmit: true });
        self.retransmits += 1;
        if self.cc.sends_empty_segments() {
            self.push_empty(now, out);
        }
    }

    fn arm_rto(&mut self, now: SimTime, out: &mut SenderOutput) {
        let deadline = now.offset_secs(self.rto_current_s);
        self.rto_deadline = Some(deadline);
        out.timers.push(TimerOp::Set(TimerKind::Rto, deadline));
    }

    fn cancel_rto(&mut self, out: &mut SenderOutput) {
        if self.rto_deadline.take().is_some() {
            out.timers.push(TimerOp::Cancel(TimerKind::Rto));
        }
    }

    fn arm_silence(&mut self, now: SimTime, out: &mut SenderOutput) {
        if !self.maintenance_supported()
            || self.silence_armed
            || self.is_frozen()
            || !self.is_active()
            || self.inflight.is_empty()
        {
            return;
        }
        let micro = SimTime::from_micros(1);
        let target = self
            .silence_reference()
            .offset_secs(self.cfg.interruption_threshold_s())
            + micro;
        let target = target.max(now + micro);
        self.silence_armed = true;
        out.timers.push(TimerOp::Set(TimerKind::Silence, target));
    }

    fn enter_maintenance_now(&mut self, now: SimTime, out: &mut SenderOutput) {
        let before = self.cc.state();
        if !self.cc.enter_maintenance() {
            return;
        }
        self.maintenance = Some(MaintPause {
            rto_remaining: self.rto_deadline.map(|d| d.saturating_sub(now)),
        });
        self.cancel_rto(out);
        if self.silence_armed {
            out.timers.push(TimerOp::Cancel(TimerKind::Silence));
            self.silence_armed = false;
        }
        self.dup_acks = 0;
        let after = self.cc.state();
        out.cc_events.push(CcEvent {
            at: now,
            kind: CcEventKind::MaintenanceEnter,
            cwnd_before: before.cwnd,
            cwnd_after: after.cwnd,
            ssthresh_after: after.ssthresh,
        });
        self.send_probe(now, out);
    }

    fn send_probe(&mut self, now: SimTime, out: &mut SenderOutput) {
        self.push_empty(now, out);
        out.probes_sent += 1;
        out.timers.push(TimerOp::Set(TimerKind::Probe, now.offset_secs(self.cfg.probe_interval())));
    }

    fn resume_from_maintenance(&mut self, ack: &Ack, now: SimTime, out: &mut SenderOutput) {
        // Any ACK arriving while frozen can only be a probe echo: everything
        // in flight at freeze time was blackholed. Its RTT stays out of the
        // history; outage-spanning samples are not path observations.
        let before = self.cc.state();
        self.cc.exit_maintenance();
        let pause = self.maintenance.take().unwrap_or_default();
        out.timers.push(TimerOp::Cancel(TimerKind::Probe));
        self.last_ack_at = Some(now);
        self.dup_acks = 0;
        if ack.cum_ack > self.cum_acked {
            out.newly_acked = ack.cum_ack - self.cum_acked;
            self.cum_acked = ack.cum_ack;
            while let Some((&seq, meta)) = self.inflight.iter().next() {
                if seq + meta.len as u64 <= ack.cum_ack {
                    self.inflight.remove(&seq);
                } else {
                    break;
                }
            }
        }
        let after = self.cc.state();
        out.cc_events.push(CcEvent {
            at: now,
            kind: CcEventKind::MaintenanceExit,
            cwnd_before: before.cwnd,
            cwnd_after: after.cwnd,
            ssthresh_after: after.ssthresh,
        });
        if let Some(total) = self.total_bytes {
            if self.cum_acked >= total {
                self.finish(now, out);
                return;
            }
        }
        if !self.inflight.is_empty() {
            // re-arm the suspended timer with its recorded remaining duration
            let deadline = match pause.rto_remaining {
                Some(rem) => now + rem,
                None => now.offset_secs(self.rto_current_s),
            };
            self.rto_deadline = Some(deadline);
            out.timers.push(TimerOp::Set(TimerKind::Rto, deadline));
            // everything outstanding at the freeze was blackholed; recover
            // hole by hole from the oldest
            self.recovery_point = Some(self.next_seq);
            self.retransmit_oldest(now, out);
        }
        self.try_send(now, out);
        self.arm_silence(now, out);
    }

    fn finish(&mut self, now: SimTime, out: &mut SenderOutput) {
        self.done_at = Some(now);
        out.completed = true;
        self.cancel_rto(out);
        if self.silence_armed {
            out.timers.push(TimerOp::Cancel(TimerKind::Silence));
            self.silence_armed = false;
        }
    }
}

/// Receiving side: cumulative acknowledgment of every segment (no delayed
/// ACKs), out-of-order buffering, and an incremental checksum over the
/// reassembled in-order stream.
#[derive(Debug, Default)]
pub struct Receiver {
    rcv_nxt: u64,
    ooo: BTreeMap<u64, u32>,
    checksum: ChecksumState,
    pub acks_sent: u64,
    pub duplicates_discarded: u64,
}

impl Receiver {
    pub fn new() -> Self {
        Receiver::default()
    }

    pub fn bytes_delivered(&self) -> u64 {
        self.rcv_nxt
    }

    /// Checksum of the in-order stream delivered so far.
    pub fn checksum(&self) -> u64 {
        self.checksum.value()
    }

    /// Every received segment, empty or not, elicits one cumulative ACK.
    pub fn on_segment(&mut self, seg: &Segment, now: SimTime) -> Ack {
        if !seg.is_empty && seg.len > 0 {
            if seg.seq == self.rcv_nxt {
                let mut new_nxt = seg.seq + seg.len as u64;
                while let Some((&s, &l)) = self.ooo.iter().next() {
                    if s <= new_nxt {
                        new_nxt = new_nxt.max(s + l as u64);
                        self.ooo.remove(&s);
                    } else {
                        break;
                    }
                }
                self.checksum.extend(self.rcv_nxt, new_nxt);
                self.rcv_nxt = new_nxt;
            } else if seg.seq > self.rcv_nxt {
                self.ooo.entry(seg.seq).or_insert(seg.len);
            } else {
                self.duplicates_discarded += 1;
            }
        }
        self.acks_sent += 1;
        Ack { cum_ack: self.rcv_nxt, echo_sent_at: seg.sent_at, recv_at: now }
    }
}
