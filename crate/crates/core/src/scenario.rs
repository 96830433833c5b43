//! Scenario configuration: a single TOML file describing the path, the
//! workload, the congestion-control algorithm, seeds, and optional sweep and
//! analysis sections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{LinkSpec, OutageWindow};
use crate::sim::SimTime;
use crate::traffic::{FtpWorkload, ParetoConfig, PoissonCallConfig};
use crate::transport::{Algorithm, TransportConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageConfig {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub prop_delay_s: f64,
    pub forward_rate_bps: f64,
    pub reverse_rate_bps: f64,
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub outages: Vec<OutageConfig>,
}

fn default_queue_capacity() -> usize {
    100
}

impl LinkConfig {
    pub fn spec(&self) -> LinkSpec {
        LinkSpec {
            prop_delay_s: self.prop_delay_s,
            forward_rate_bps: self.forward_rate_bps,
            reverse_rate_bps: self.reverse_rate_bps,
            loss_prob: self.loss_prob,
            queue_capacity: self.queue_capacity,
        }
    }

    pub fn outage_windows(&self) -> Vec<OutageWindow> {
        self.outages
            .iter()
            .map(|o| OutageWindow {
                start: SimTime::from_secs_f64(o.start_s),
                end: SimTime::from_secs_f64(o.end_s),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub links: Vec<LinkConfig>,
    /// Override for the geometric RTT estimate; defaults to twice the summed
    /// propagation delays.
    #[serde(default)]
    pub rtt_est_s: Option<f64>,
}

impl PathConfig {
    pub fn effective_rtt_est_s(&self) -> f64 {
        self.rtt_est_s
            .unwrap_or_else(|| 2.0 * self.links.iter().map(|l| l.prop_delay_s).sum::<f64>())
    }

    /// Index of the narrowest forward link.
    pub fn bottleneck_index(&self) -> usize {
        self.links
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.forward_rate_bps.partial_cmp(&b.1.forward_rate_bps).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadConfig {
    Ftp(FtpWorkload),
    Calls(PoissonCallConfig),
    Vbr(ParetoConfig),
}

impl WorkloadConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            WorkloadConfig::Ftp(_) => "ftp",
            WorkloadConfig::Calls(_) => "calls",
            WorkloadConfig::Vbr(_) => "vbr",
        }
    }
}

/// Optional transport tuning; anything unset falls back to the defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportSection {
    pub segment_payload_bytes: Option<u32>,
    pub header_bytes: Option<u32>,
    pub initial_cwnd: Option<f64>,
    pub initial_ssthresh: Option<f64>,
    pub rtt_history_capacity: Option<usize>,
    pub rtt_decay_tau_s: Option<f64>,
    pub min_rto_s: Option<f64>,
    pub max_rto_s: Option<f64>,
    pub maintenance_enabled: Option<bool>,
    pub probe_interval_s: Option<f64>,
    pub empty_segments_in_ca: Option<bool>,
}

impl TransportSection {
    pub fn build(&self, rtt_est_s: f64) -> TransportConfig {
        let d = TransportConfig::default();
        TransportConfig {
            segment_payload_bytes: self.segment_payload_bytes.unwrap_or(d.segment_payload_bytes),
            header_bytes: self.header_bytes.unwrap_or(d.header_bytes),
            initial_cwnd: self.initial_cwnd.unwrap_or(d.initial_cwnd),
            initial_ssthresh: self.initial_ssthresh.unwrap_or(d.initial_ssthresh),
            rtt_history_capacity: self.rtt_history_capacity.unwrap_or(d.rtt_history_capacity),
            rtt_decay_tau_s: self.rtt_decay_tau_s.unwrap_or(d.rtt_decay_tau_s),
            dup_ack_threshold: d.dup_ack_threshold,
            min_rto_s: self.min_rto_s.unwrap_or(d.min_rto_s),
            max_rto_s: self.max_rto_s.unwrap_or(d.max_rto_s),
            rtt_est_s,
            maintenance_enabled: self.maintenance_enabled.unwrap_or(d.maintenance_enabled),
            probe_interval_s: self.probe_interval_s,
            empty_segments_in_ca: self.empty_segments_in_ca.unwrap_or(d.empty_segments_in_ca),
        }
    }
}

/// Cross-product sweep for `compare`: algorithms x loss rates x seeds, with
/// identical path/workload/seed streams so comparisons are paired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub algorithms: Vec<Algorithm>,
    pub loss_rates: Vec<f64>,
}

/// Inputs for the slow-start duration formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub bandwidth_bps: f64,
    #[serde(default = "default_segment_bits")]
    pub segment_bits: f64,
    /// Defaults to the path's RTT estimate.
    #[serde(default)]
    pub rtt_s: Option<f64>,
}

fn default_segment_bits() -> f64 {
    8192.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    #[serde(default = "default_duration_s")]
    pub duration_s: f64,
    #[serde(default = "default_sample_interval_s")]
    pub sample_interval_s: f64,
    pub path: PathConfig,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub transport: TransportSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub analysis: Option<AnalysisSection>,
}

fn default_duration_s() -> f64 {
    1200.0
}

fn default_sample_interval_s() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(ConfigError::Invalid("name must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("at least one seed is required".into()));
        }
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return Err(ConfigError::Invalid("duration_s must be > 0".into()));
        }
        if !self.sample_interval_s.is_finite() || self.sample_interval_s <= 0.0 {
            return Err(ConfigError::Invalid("sample_interval_s must be > 0".into()));
        }
        if self.path.links.is_empty() {
            return Err(ConfigError::Invalid("path needs at least one link".into()));
        }
        for (i, link) in self.path.links.iter().enumerate() {
            link.spec()
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("links[{i}]: {e}")))?;
            let mut sorted = link.outages.clone();
            sorted.sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).unwrap());
            for o in &sorted {
                if !o.start_s.is_finite() || o.start_s < 0.0 || o.start_s >= o.end_s {
                    return Err(ConfigError::Invalid(format!(
                        "links[{i}]: outage [{}, {}] must have start < end",
                        o.start_s, o.end_s
                    )));
                }
            }
            for pair in sorted.windows(2) {
                if pair[1].start_s < pair[0].end_s {
                    return Err(ConfigError::Invalid(format!("links[{i}]: overlapping outages")));
                }
            }
        }
        let rtt_est = self.path.effective_rtt_est_s();
        if !rtt_est.is_finite() || rtt_est <= 0.0 {
            return Err(ConfigError::Invalid("rtt estimate must be > 0".into()));
        }
        match &self.workload {
            WorkloadConfig::Ftp(w) => {
                if w.total_bytes == 0 {
                    return Err(ConfigError::Invalid("ftp total_bytes must be > 0".into()));
                }
            }
            WorkloadConfig::Calls(w) => {
                if !(w.lambda > 0.0 && w.horizon_s > 0.0 && w.block_timeout_s > 0.0) {
                    return Err(ConfigError::Invalid("calls: lambda, horizon, block_timeout must be > 0".into()));
                }
                if w.bytes_per_call == 0 {
                    return Err(ConfigError::Invalid("calls: bytes_per_call must be > 0".into()));
                }
            }
            WorkloadConfig::Vbr(w) => {
                if !w.alpha.is_finite() || w.alpha <= 1.0 {
                    return Err(ConfigError::Invalid("vbr: alpha must be > 1".into()));
                }
                if !(w.x_min > 0.0 && w.bytes_per_unit > 0.0 && w.frame_interval_s > 0.0) {
                    return Err(ConfigError::Invalid("vbr: x_min, bytes_per_unit, frame_interval must be > 0".into()));
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.algorithms.len() < 2 {
                return Err(ConfigError::Invalid("sweep needs at least two algorithms".into()));
            }
            if sweep.loss_rates.is_empty() {
                return Err(ConfigError::Invalid("sweep needs at least one loss rate".into()));
            }
            for &lr in &sweep.loss_rates {
                if !(0.0..=1.0).contains(&lr) {
                    return Err(ConfigError::Invalid(format!("sweep loss rate {lr} outside [0, 1]")));
                }
            }
        }
        if let Some(a) = &self.analysis {
            if !(a.bandwidth_bps > 0.0 && a.segment_bits > 0.0) {
                return Err(ConfigError::Invalid("analysis: bandwidth and segment bits must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn transport_config(&self) -> TransportConfig {
        self.transport.build(self.path.effective_rtt_est_s())
    }

    /// The loss probability reported in summaries: the largest per-link value.
    pub fn representative_loss_rate(&self) -> f64 {
        self.path.links.iter().map(|l| l.loss_prob).fold(0.0, f64::max)
    }

    /// A copy with every link's loss probability replaced (sweep cells).
    pub fn with_loss_rate(&self, loss_prob: f64) -> Self {
        let mut cfg = self.clone();
        for link in &mut cfg.path.links {
            link.loss_prob = loss_prob;
        }
        cfg
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        let mut cfg = self.clone();
        cfg.algorithm = algorithm;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_toml() -> &'static str {
        r#"
name = "ftp_geo"
algorithm = "aggressive"
seeds = [1, 2, 3]
duration_s = 1200.0

[path]
[[path.links]]
prop_delay_s = 0.275
forward_rate_bps = 1e7
reverse_rate_bps = 1e6
loss_prob = 0.01
queue_capacity = 100

[workload]
kind = "ftp"
total_bytes = 10485760

[sweep]
algorithms = ["aggressive", "reno", "tahoe"]
loss_rates = [0.005, 0.01, 0.05]

[analysis]
bandwidth_bps = 1e7
segment_bits = 8192.0
"#
    }

    #[test]
    fn parse_and_round_trip() {
        let cfg = ScenarioConfig::from_toml_str(sample_toml()).unwrap();
        assert_eq!(cfg.name, "ftp_geo");
        assert_eq!(cfg.algorithm, Algorithm::Aggressive);
        assert_eq!(cfg.path.links.len(), 1);
        assert!((cfg.path.effective_rtt_est_s() - 0.55).abs() < 1e-12);
        match &cfg.workload {
            WorkloadConfig::Ftp(w) => assert_eq!(w.total_bytes, 10_485_760),
            _ => panic!("wrong workload"),
        }
        // round trip: parse -> serialize -> parse is identity
        let text = cfg.to_toml_string();
        let again = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn defaults_fill_in() {
        let minimal = r#"
name = "x"
algorithm = "reno"
seeds = [7]
[path]
[[path.links]]
prop_delay_s = 0.01
forward_rate_bps = 1e6
reverse_rate_bps = 1e6
[workload]
kind = "calls"
"#;
        let cfg = ScenarioConfig::from_toml_str(minimal).unwrap();
        assert_eq!(cfg.duration_s, 1200.0);
        assert_eq!(cfg.path.links[0].queue_capacity, 100);
        match &cfg.workload {
            WorkloadConfig::Calls(c) => {
                assert_eq!(c.lambda, 14.0);
                assert_eq!(c.bytes_per_call, 500);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn invalid_configs_diagnosed() {
        let bad = sample_toml().replace("seeds = [1, 2, 3]", "seeds = []");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(ConfigError::Invalid(_))));

        let bad = sample_toml().replace("loss_prob = 0.01", "loss_prob = 1.5");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());

        let bad = sample_toml().replace("algorithm = \"aggressive\"", "algorithm = \"cubic\"");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn sweep_helpers() {
        let cfg = ScenarioConfig::from_toml_str(sample_toml()).unwrap();
        let cell = cfg.with_algorithm(Algorithm::Reno).with_loss_rate(0.05);
        assert_eq!(cell.algorithm, Algorithm::Reno);
        assert!(cell.path.links.iter().all(|l| l.loss_prob == 0.05));
        assert_eq!(cell.representative_loss_rate(), 0.05);
    }

    #[test]
    fn outage_validation() {
        let with_outage = sample_toml().replace(
            "queue_capacity = 100",
            "queue_capacity = 100\n[[path.links.outages]]\nstart_s = 30.0\nend_s = 20.0",
        );
        assert!(ScenarioConfig::from_toml_str(&with_outage).is_err());
    }
}
