//! Executes scenarios: builds the world from a config, drives the event
//! queue, and emits series, summaries, and comparison sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelError, DeliveryOutcome, Direction, Link};
use crate::metrics::{CallStats, Collector, MetricSeries, RunSummary};
use crate::scenario::{ConfigError, ScenarioConfig, WorkloadConfig};
use crate::sim::{EventQueue, RngStream, SimTime, Ticket};
use crate::traffic::{self, SendRequest, TrafficError};
use crate::transport::{
    Ack, Algorithm, CcEvent, Receiver, Segment, Sender, SenderOutput, TimerKind, TimerOp,
    TransportConfig, stream_checksum,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mismatched sweep: {0}")]
    MismatchedSweep(String),
}

#[derive(Clone, Copy, Debug)]
enum PacketBody {
    Data(Segment),
    AckOf(Ack),
}

#[derive(Clone, Copy, Debug)]
struct Packet {
    conn: usize,
    body: PacketBody,
    wire_bytes: u32,
}

#[derive(Clone, Copy, Debug)]
enum SimEvent {
    Arrive { hop: usize, dir: Direction, pkt: Packet },
    Timer { conn: usize, kind: TimerKind },
    AppData { conn: usize, bytes: u64 },
    OpenCall { arrival: usize },
    BlockCheck { conn: usize },
    Sample,
}

struct Conn {
    sender: Sender,
    receiver: Receiver,
    tickets: [Option<Ticket>; 3],
    opened_at: SimTime,
    total_bytes: Option<u64>,
    is_call: bool,
    resolved: bool,
}

fn timer_slot(kind: TimerKind) -> usize {
    match kind {
        TimerKind::Rto => 0,
        TimerKind::Silence => 1,
        TimerKind::Probe => 2,
    }
}

fn dir_slot(dir: Direction) -> usize {
    match dir {
        Direction::Forward => 0,
        Direction::Reverse => 1,
    }
}

/// Per-link delivery counters, forward and reverse.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct LinkCounters {
    pub delivered: u64,
    pub lost_random: u64,
    pub dropped_queue: u64,
    pub blackholed: u64,
}

/// Everything one seeded run leaves behind.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub throughput: MetricSeries,
    pub cwnd: MetricSeries,
    pub utilization: MetricSeries,
    pub cc_events: Vec<CcEvent>,
    pub probe_times: Vec<SimTime>,
    pub call_stats: CallStats,
    pub events_processed: u64,
    pub transfer_complete: bool,
    /// Receiver's reassembled-stream checksum matches the synthetic source
    /// (FTP and VBR workloads).
    pub checksum_match: Option<bool>,
    pub bytes_acked: u64,
    pub link_counters: Vec<[LinkCounters; 2]>,
    pub workload_kind: &'static str,
}

struct World {
    cfg: ScenarioConfig,
    tcfg: TransportConfig,
    algorithm: Algorithm,
    links: Vec<Link>,
    loss_streams: Vec<[RngStream; 2]>,
    conns: Vec<Conn>,
    collector: Collector,
    bottleneck: usize,
    primary_conn: Option<usize>,
    call_arrivals: Vec<SendRequest>,
    block_timeout_s: f64,
    ftp_done_at: Option<SimTime>,
}

impl World {
    fn build(cfg: &ScenarioConfig, seed: u64) -> Result<(World, EventQueue<SimEvent>), RunError> {
        cfg.validate()?;
        let tcfg = cfg.transport_config();
        let mut links = Vec::with_capacity(cfg.path.links.len());
        let mut loss_streams = Vec::with_capacity(cfg.path.links.len());
        for (i, lc) in cfg.path.links.iter().enumerate() {
            links.push(Link::new(lc.spec(), lc.outage_windows())?);
            loss_streams.push([
                RngStream::with_substream(seed, "loss", (i as u64) * 2),
                RngStream::with_substream(seed, "loss", (i as u64) * 2 + 1),
            ]);
        }

        let mut queue: EventQueue<SimEvent> = EventQueue::new();
        let mut world = World {
            tcfg,
            algorithm: cfg.algorithm,
            links,
            loss_streams,
            conns: Vec::new(),
            collector: Collector::new(),
            bottleneck: cfg.path.bottleneck_index(),
            primary_conn: None,
            call_arrivals: Vec::new(),
            block_timeout_s: 0.0,
            ftp_done_at: None,
            cfg: cfg.clone(),
        };

        match &cfg.workload {
            WorkloadConfig::Ftp(w) => {
                let requests = traffic::generate_ftp(w)?;
                world.primary_conn = Some(world.new_conn(Some(w.total_bytes), false, SimTime::ZERO));
                for r in requests {
                    queue.schedule(r.at, SimEvent::AppData { conn: 0, bytes: r.bytes }).unwrap();
                }
            }
            WorkloadConfig::Calls(w) => {
                let mut rng = RngStream::new(seed, "poisson");
                world.call_arrivals = traffic::generate_calls(w, &mut rng)?;
                world.block_timeout_s = w.block_timeout_s;
                for (i, r) in world.call_arrivals.iter().enumerate() {
                    queue.schedule(r.at, SimEvent::OpenCall { arrival: i }).unwrap();
                }
            }
            WorkloadConfig::Vbr(w) => {
                let mut rng = RngStream::new(seed, "pareto");
                let requests = traffic::generate_vbr(w, cfg.duration_s, &mut rng)?;
                world.primary_conn = Some(world.new_conn(None, false, SimTime::ZERO));
                for r in requests {
                    queue.schedule(r.at, SimEvent::AppData { conn: 0, bytes: r.bytes }).unwrap();
                }
            }
        }

        let interval = SimTime::from_secs_f64(cfg.sample_interval_s);
        queue.schedule(interval, SimEvent::Sample).unwrap();
        Ok((world, queue))
    }

    fn new_conn(&mut self, total_bytes: Option<u64>, is_call: bool, now: SimTime) -> usize {
        let idx = self.conns.len();
        self.conns.push(Conn {
            sender: Sender::new(self.algorithm, self.tcfg, total_bytes, now),
            receiver: Receiver::new(),
            tickets: [None; 3],
            opened_at: now,
            total_bytes,
            is_call,
            resolved: false,
        });
        idx
    }

    fn finished(&self) -> bool {
        match &self.cfg.workload {
            WorkloadConfig::Ftp(_) => self.ftp_done_at.is_some(),
            WorkloadConfig::Calls(_) => {
                self.collector.calls.attempted() >= self.call_arrivals.len() as u64
            }
            WorkloadConfig::Vbr(_) => false,
        }
    }

    fn send_on_link(&mut self, hop: usize, dir: Direction, pkt: Packet, now: SimTime, queue: &mut EventQueue<SimEvent>) {
        let stream = &self.loss_streams[hop][dir_slot(dir)];
        match self.links[hop].transmit(pkt.wire_bytes, dir, now, stream) {
            DeliveryOutcome::Delivered(at) => {
                queue.schedule(at, SimEvent::Arrive { hop, dir, pkt }).expect("delivery is in the future");
            }
            DeliveryOutcome::LostRandom
            | DeliveryOutcome::DroppedQueueFull
            | DeliveryOutcome::BlackholedOutage => {}
        }
    }

    fn apply_output(&mut self, conn_idx: usize, out: SenderOutput, now: SimTime, queue: &mut EventQueue<SimEvent>) {
        for seg in &out.segments {
            let pkt = Packet {
                conn: conn_idx,
                body: PacketBody::Data(*seg),
                wire_bytes: self.tcfg.wire_bytes(seg),
            };
            self.send_on_link(0, Direction::Forward, pkt, now, queue);
        }
        for op in &out.timers {
            match *op {
                TimerOp::Set(kind, at) => {
                    let slot = timer_slot(kind);
                    if let Some(t) = self.conns[conn_idx].tickets[slot].take() {
                        queue.cancel(t);
                    }
                    let ticket = queue
                        .schedule(at.max(now), SimEvent::Timer { conn: conn_idx, kind })
                        .expect("timer deadlines are not in the past");
                    self.conns[conn_idx].tickets[slot] = Some(ticket);
                }
                TimerOp::Cancel(kind) => {
                    if let Some(t) = self.conns[conn_idx].tickets[timer_slot(kind)].take() {
                        queue.cancel(t);
                    }
                }
            }
        }
        self.collector.cc_events.extend(out.cc_events.iter().copied());
        for _ in 0..out.probes_sent {
            self.collector.probe_times.push(now);
        }
        self.collector.on_acked(now, out.newly_acked);
        if out.completed {
            self.on_conn_completed(conn_idx, now);
        }
        if self.primary_conn == Some(conn_idx) {
            let cwnd = self.conns[conn_idx].sender.cwnd();
            self.collector.sample_cwnd(now, cwnd);
        }
    }

    fn on_conn_completed(&mut self, conn_idx: usize, now: SimTime) {
        let conn = &mut self.conns[conn_idx];
        if conn.resolved {
            return;
        }
        conn.resolved = true;
        if conn.is_call {
            let hold_on = now.saturating_sub(conn.opened_at).as_secs_f64();
            self.collector.calls.record_completion(hold_on, conn.total_bytes.unwrap_or(0));
        } else if matches!(self.cfg.workload, WorkloadConfig::Ftp(_)) {
            self.ftp_done_at = Some(now);
        }
    }

    fn dispatch(&mut self, now: SimTime, event: SimEvent, queue: &mut EventQueue<SimEvent>) {
        match event {
            SimEvent::AppData { conn, bytes } => {
                let out = self.conns[conn].sender.push_app_data(bytes, now);
                self.apply_output(conn, out, now, queue);
            }
            SimEvent::OpenCall { arrival } => {
                let bytes = self.call_arrivals[arrival].bytes;
                let idx = self.new_conn(Some(bytes), true, now);
                let out = self.conns[idx].sender.push_app_data(bytes, now);
                self.apply_output(idx, out, now, queue);
                let deadline = now.offset_secs(self.block_timeout_s);
                queue.schedule(deadline, SimEvent::BlockCheck { conn: idx }).unwrap();
            }
            SimEvent::BlockCheck { conn } => {
                let c = &mut self.conns[conn];
                if !c.resolved && c.sender.cum_acked() == 0 {
                    c.resolved = true;
                    let out = c.sender.retire();
                    self.collector.calls.record_blocked();
                    self.apply_output(conn, out, now, queue);
                }
            }
            SimEvent::Timer { conn, kind } => {
                self.conns[conn].tickets[timer_slot(kind)] = None;
                let sender = &mut self.conns[conn].sender;
                let out = match kind {
                    TimerKind::Rto => sender.on_rto_fired(now),
                    TimerKind::Silence => sender.on_silence_fired(now),
                    TimerKind::Probe => sender.on_probe_fired(now),
                };
                self.apply_output(conn, out, now, queue);
            }
            SimEvent::Arrive { hop, dir, pkt } => match dir {
                Direction::Forward => {
                    if hop + 1 < self.links.len() {
                        self.send_on_link(hop + 1, Direction::Forward, pkt, now, queue);
                    } else {
                        self.deliver_to_receiver(pkt, now, queue);
                    }
                }
                Direction::Reverse => {
                    if hop > 0 {
                        self.send_on_link(hop - 1, Direction::Reverse, pkt, now, queue);
                    } else {
                        self.deliver_to_sender(pkt, now, queue);
                    }
                }
            },
            SimEvent::Sample => {
                self.take_samples(now);
                let next = now + SimTime::from_secs_f64(self.cfg.sample_interval_s);
                if next <= SimTime::from_secs_f64(self.cfg.duration_s) {
                    queue.schedule(next, SimEvent::Sample).unwrap();
                }
            }
        }
    }

    fn deliver_to_receiver(&mut self, pkt: Packet, now: SimTime, queue: &mut EventQueue<SimEvent>) {
        let PacketBody::Data(seg) = pkt.body else {
            return; // data plane only flows forward
        };
        let conn = &mut self.conns[pkt.conn];
        if conn.sender.is_retired() {
            return;
        }
        let ack = conn.receiver.on_segment(&seg, now);
        let ack_pkt = Packet {
            conn: pkt.conn,
            body: PacketBody::AckOf(ack),
            wire_bytes: self.tcfg.header_bytes,
        };
        let last = self.links.len() - 1;
        self.send_on_link(last, Direction::Reverse, ack_pkt, now, queue);
    }

    fn deliver_to_sender(&mut self, pkt: Packet, now: SimTime, queue: &mut EventQueue<SimEvent>) {
        let PacketBody::AckOf(ack) = pkt.body else {
            return;
        };
        let out = self.conns[pkt.conn].sender.on_ack(&ack, now);
        self.apply_output(pkt.conn, out, now, queue);
    }

    fn take_samples(&mut self, now: SimTime) {
        if now == SimTime::ZERO {
            return;
        }
        let throughput = self.collector.cum_acked_bytes as f64 * 8.0 / now.as_secs_f64();
        self.collector.throughput.push(now, throughput);
        let utilization = self.links[self.bottleneck]
            .utilization_sample((SimTime::ZERO, now), Direction::Forward, now)
            .expect("window [0, now) has elapsed");
        self.collector.utilization.push(now, utilization);
    }
}

/// Run one scenario under one seed.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput, RunError> {
    let (mut world, mut queue) = World::build(cfg, seed)?;
    let end = SimTime::from_secs_f64(cfg.duration_s);
    let mut events_processed = 0u64;
    while !world.finished() {
        let Some((now, event)) = queue.pop_due(end) else {
            break;
        };
        world.dispatch(now, event, &mut queue);
        events_processed += 1;
    }

    let end_s = match &cfg.workload {
        WorkloadConfig::Ftp(_) => world.ftp_done_at.map(|t| t.as_secs_f64()).unwrap_or(cfg.duration_s),
        _ => cfg.duration_s,
    };
    let end_time = SimTime::from_secs_f64(end_s);

    let mean_utilization = world.links[world.bottleneck]
        .utilization_sample((SimTime::ZERO, end_time.max(SimTime::from_micros(1))), Direction::Forward, SimTime::MAX)
        .ok();
    let mean_throughput_bps = world.collector.cum_acked_bytes as f64 * 8.0 / end_s;

    // checksum over the delivered in-order prefix: catches reassembly bugs
    // whether or not the transfer finished
    let (transfer_complete, checksum_match) = match &cfg.workload {
        WorkloadConfig::Ftp(w) => {
            let conn = &world.conns[0];
            let delivered = conn.receiver.bytes_delivered();
            let complete = world.ftp_done_at.is_some() && delivered >= w.total_bytes;
            (complete, Some(conn.receiver.checksum() == stream_checksum(delivered)))
        }
        WorkloadConfig::Vbr(_) => {
            let conn = &world.conns[0];
            let delivered = conn.receiver.bytes_delivered();
            (false, Some(conn.receiver.checksum() == stream_checksum(delivered)))
        }
        WorkloadConfig::Calls(_) => (world.finished(), None),
    };

    let calls = &world.collector.calls;
    let summary = RunSummary {
        scenario: cfg.name.clone(),
        algorithm: cfg.algorithm.name().to_string(),
        seed,
        loss_rate: cfg.representative_loss_rate(),
        completion_time_s: world.ftp_done_at.map(|t| t.as_secs_f64()),
        mean_throughput_bps,
        mean_utilization,
        mean_hold_on_s: calls.mean_hold_on_s(),
        p95_hold_on_s: calls.p95_hold_on_s(),
        blocking_rate: calls.blocking_rate().ok(),
    };

    let link_counters = world
        .links
        .iter()
        .map(|l| {
            [Direction::Forward, Direction::Reverse].map(|d| {
                let (delivered, lost_random, dropped_queue, blackholed) = l.counters(d);
                LinkCounters { delivered, lost_random, dropped_queue, blackholed }
            })
        })
        .collect();

    Ok(RunOutput {
        summary,
        throughput: world.collector.throughput,
        cwnd: world.collector.cwnd,
        utilization: world.collector.utilization,
        cc_events: world.collector.cc_events,
        probe_times: world.collector.probe_times,
        call_stats: world.collector.calls,
        events_processed,
        transfer_complete,
        checksum_match,
        bytes_acked: world.collector.cum_acked_bytes,
        link_counters,
        workload_kind: cfg.workload.kind_name(),
    })
}

/// Write one run's artifacts into `dir`: per-series CSVs (per the workload's
/// schema) plus `summary.json`.
pub fn write_run_output(dir: &Path, out: &RunOutput) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    let write_series = |name: &str, series: &MetricSeries| -> Result<(), RunError> {
        let mut f = std::fs::File::create(dir.join(name))?;
        series.write_csv(&mut f)?;
        Ok(())
    };
    match out.workload_kind {
        "ftp" => {
            write_series("throughput.csv", &out.throughput)?;
            write_series("cwnd.csv", &out.cwnd)?;
            write_series("utilization.csv", &out.utilization)?;
        }
        "vbr" => {
            write_series("throughput.csv", &out.throughput)?;
        }
        _ => {}
    }
    let mut f = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &out.summary).map_err(std::io::Error::other)?;
    writeln!(f)?;
    Ok(())
}

/// Output directory for one (scenario, algorithm, seed) cell.
pub fn cell_dir(out_root: &Path, scenario: &str, algorithm: &str, seed: u64) -> PathBuf {
    out_root.join(scenario).join(algorithm).join(seed.to_string())
}

/// Run every seed of a scenario and write artifacts under
/// `out_root/<scenario>/<algorithm>/<seed>/`.
pub fn run_and_write(cfg: &ScenarioConfig, out_root: &Path) -> Result<Vec<RunSummary>, RunError> {
    let mut summaries = Vec::new();
    for &seed in &cfg.seeds {
        let out = run_scenario(cfg, seed)?;
        let dir = cell_dir(out_root, &cfg.name, cfg.algorithm.name(), seed);
        write_run_output(&dir, &out)?;
        summaries.push(out.summary);
    }
    Ok(summaries)
}

/// One ranking: algorithms ordered best-first under `metric` at `loss_rate`,
/// using per-algorithm means over the paired seeds.
#[derive(Clone, Debug, Serialize)]
pub struct Ranking {
    pub loss_rate: f64,
    pub metric: String,
    pub ordered_algorithms: Vec<String>,
}

#[derive(Debug)]
pub struct ComparisonReport {
    pub rows: Vec<RunSummary>,
    pub rankings: Vec<Ranking>,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Cross product {algorithms} x {loss rates} x {seeds} with paired seeds: the
/// non-algorithm RNG streams depend only on the seed, so every algorithm faces
/// identical workload draws and identical per-index loss decisions.
pub fn compare(cfg: &ScenarioConfig) -> Result<ComparisonReport, RunError> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| RunError::MismatchedSweep("config has no [sweep] section".into()))?;
    if sweep.algorithms.len() < 2 {
        return Err(RunError::MismatchedSweep("sweep needs at least two algorithms".into()));
    }
    let mut rows = Vec::new();
    for &loss_rate in &sweep.loss_rates {
        for &algorithm in &sweep.algorithms {
            let cell = cfg.with_algorithm(algorithm).with_loss_rate(loss_rate);
            for &seed in &cfg.seeds {
                rows.push(run_scenario(&cell, seed)?.summary);
            }
        }
    }

    let mut rankings = Vec::new();
    for &loss_rate in &sweep.loss_rates {
        let per_algo: Vec<(String, Vec<&RunSummary>)> = sweep
            .algorithms
            .iter()
            .map(|a| {
                let cells: Vec<&RunSummary> = rows
                    .iter()
                    .filter(|r| r.loss_rate == loss_rate && r.algorithm == a.name())
                    .collect();
                (a.name().to_string(), cells)
            })
            .collect();

        type MetricExtract = Box<dyn Fn(&RunSummary) -> Option<f64>>;
        let metric_specs: [(&str, bool, MetricExtract); 4] = [
            ("mean_throughput_bps", true, Box::new(|r: &RunSummary| Some(r.mean_throughput_bps))),
            ("completion_time_s", false, Box::new(|r: &RunSummary| r.completion_time_s)),
            ("mean_hold_on_s", false, Box::new(|r: &RunSummary| r.mean_hold_on_s)),
            ("blocking_rate", false, Box::new(|r: &RunSummary| r.blocking_rate)),
        ];
        for (metric, higher_is_better, extract) in metric_specs {
            let mut scored: Vec<(String, f64)> = per_algo
                .iter()
                .filter_map(|(name, cells)| {
                    let vals: Vec<f64> = cells.iter().filter_map(|r| extract(r)).collect();
                    if vals.len() == cells.len() {
                        mean(&vals).map(|m| (name.clone(), m))
                    } else {
                        None
                    }
                })
                .collect();
            if scored.len() < 2 {
                continue; // metric not applicable to this workload
            }
            scored.sort_by(|a, b| {
                let ord = a.1.partial_cmp(&b.1).unwrap();
                if higher_is_better { ord.reverse() } else { ord }
            });
            rankings.push(Ranking {
                loss_rate,
                metric: metric.to_string(),
                ordered_algorithms: scored.into_iter().map(|(n, _)| n).collect(),
            });
        }
    }
    Ok(ComparisonReport { rows, rankings })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `comparison.csv` and `rankings.json` under `out_root/<scenario>/`.
pub fn write_comparison(out_root: &Path, scenario: &str, report: &ComparisonReport) -> Result<PathBuf, RunError> {
    let dir = out_root.join(scenario);
    std::fs::create_dir_all(&dir)?;
    let mut f = std::fs::File::create(dir.join("comparison.csv"))?;
    writeln!(
        f,
        "algorithm,loss_rate,seed,completion_time_s,mean_throughput_bps,mean_utilization,mean_hold_on_s,p95_hold_on_s,blocking_rate"
    )?;
    for r in &report.rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.loss_rate,
            r.seed,
            fmt_opt(r.completion_time_s),
            r.mean_throughput_bps,
            fmt_opt(r.mean_utilization),
            fmt_opt(r.mean_hold_on_s),
            fmt_opt(r.p95_hold_on_s),
            fmt_opt(r.blocking_rate),
        )?;
    }
    let mut f = std::fs::File::create(dir.join("rankings.json"))?;
    serde_json::to_writer_pretty(&mut f, &report.rankings).map_err(std::io::Error::other)?;
    writeln!(f)?;
    Ok(dir)
}
