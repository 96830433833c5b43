//! Per-run time series and summary statistics: time-average throughput,
//! event-driven cwnd trace, link utilization, and call statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::transport::CcEvent;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no calls recorded")]
    NoCalls,
}

/// A named, time-ordered series of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub points: Vec<(SimTime, f64)>,
}

impl MetricSeries {
    pub fn new(name: impl Into<String>) -> Self {
        MetricSeries { name: name.into(), points: Vec::new() }
    }

    pub fn push(&mut self, at: SimTime, value: f64) {
        if let Some(&(last, _)) = self.points.last() {
            assert!(at >= last, "series {} timestamps must be non-decreasing", self.name);
        }
        self.points.push((at, value));
    }

    /// Last value at or before `at`.
    pub fn value_at(&self, at: SimTime) -> Option<f64> {
        match self.points.binary_search_by(|&(t, _)| t.cmp(&at)) {
            Ok(i) => Some(self.points[i].1),
            Err(0) => None,
            Err(i) => Some(self.points[i - 1].1),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,value")?;
        for (t, v) in &self.points {
            writeln!(w, "{},{}", t.as_secs_f64(), v)?;
        }
        Ok(())
    }
}

/// Running average from t=0: bits cumulatively acknowledged by `at`, over `at`.
pub fn time_avg_throughput(delivered: &[(SimTime, u64)], at: SimTime) -> f64 {
    assert!(at > SimTime::ZERO, "time-average needs a positive time");
    let bytes: u64 = delivered.iter().take_while(|&&(t, _)| t <= at).map(|&(_, b)| b).sum();
    bytes as f64 * 8.0 / at.as_secs_f64()
}

/// Outcome counts and hold-on times for the call workload.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CallStats {
    pub completed: u64,
    pub blocked: u64,
    pub hold_on_times_s: Vec<f64>,
    pub completed_bytes: u64,
}

impl CallStats {
    pub fn attempted(&self) -> u64 {
        self.completed + self.blocked
    }

    pub fn record_completion(&mut self, hold_on_s: f64, bytes: u64) {
        self.completed += 1;
        self.completed_bytes += bytes;
        self.hold_on_times_s.push(hold_on_s);
    }

    pub fn record_blocked(&mut self) {
        self.blocked += 1;
    }

    pub fn blocking_rate(&self) -> Result<f64, MetricsError> {
        if self.attempted() == 0 {
            return Err(MetricsError::NoCalls);
        }
        Ok(self.blocked as f64 / self.attempted() as f64)
    }

    pub fn mean_hold_on_s(&self) -> Option<f64> {
        if self.hold_on_times_s.is_empty() {
            return None;
        }
        Some(self.hold_on_times_s.iter().sum::<f64>() / self.hold_on_times_s.len() as f64)
    }

    pub fn p95_hold_on_s(&self) -> Option<f64> {
        if self.hold_on_times_s.is_empty() {
            return None;
        }
        let mut sorted = self.hold_on_times_s.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((sorted.len() as f64 * 0.95).ceil() as usize).saturating_sub(1);
        Some(sorted[idx.min(sorted.len() - 1)])
    }
}

/// The per-run scalar record written as `summary.json`. Fields that do not
/// apply to a workload are null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub loss_rate: f64,
    pub completion_time_s: Option<f64>,
    pub mean_throughput_bps: f64,
    pub mean_utilization: Option<f64>,
    pub mean_hold_on_s: Option<f64>,
    pub p95_hold_on_s: Option<f64>,
    pub blocking_rate: Option<f64>,
}

/// Everything a single run leaves behind.
#[derive(Debug)]
pub struct Collector {
    pub throughput: MetricSeries,
    pub cwnd: MetricSeries,
    pub utilization: MetricSeries,
    pub delivered: Vec<(SimTime, u64)>,
    pub cum_acked_bytes: u64,
    pub cc_events: Vec<CcEvent>,
    pub probe_times: Vec<SimTime>,
    pub calls: CallStats,
}

impl Collector {
    pub fn new() -> Self {
        Collector {
            throughput: MetricSeries::new("throughput"),
            cwnd: MetricSeries::new("cwnd"),
            utilization: MetricSeries::new("utilization"),
            delivered: Vec::new(),
            cum_acked_bytes: 0,
            cc_events: Vec::new(),
            probe_times: Vec::new(),
            calls: CallStats::default(),
        }
    }

    pub fn on_acked(&mut self, at: SimTime, bytes: u64) {
        if bytes > 0 {
            self.delivered.push((at, bytes));
            self.cum_acked_bytes += bytes;
        }
    }

    pub fn sample_cwnd(&mut self, at: SimTime, cwnd: f64) {
        if self.cwnd.points.last().map(|&(_, v)| v) != Some(cwnd) {
            self.cwnd.push(at, cwnd);
        }
    }
}

impl Default for Collector {
    fn default() -> Self {
        Self::new()
    }
}
