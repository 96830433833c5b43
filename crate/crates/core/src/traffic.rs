//! Workload generators: FTP bulk transfer, Poisson call arrivals, and
//! Pareto-sized VBR video frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{RngStream, SimTime};

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FtpWorkload {
    pub total_bytes: u64,
    pub start_s: f64,
}

impl Default for FtpWorkload {
    fn default() -> Self {
        // 10 MB, binary convention
        FtpWorkload { total_bytes: 10 * 1024 * 1024, start_s: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoissonCallConfig {
    /// Mean arrival rate, calls per second.
    pub lambda: f64,
    /// Arrival window length, seconds.
    pub horizon_s: f64,
    pub bytes_per_call: u32,
    /// Optional hard cap on generated calls.
    pub max_calls: Option<u64>,
    /// A call whose first segment is not acknowledged within this long of its
    /// arrival counts as blocked.
    pub block_timeout_s: f64,
}

impl Default for PoissonCallConfig {
    fn default() -> Self {
        PoissonCallConfig {
            lambda: 14.0,
            horizon_s: 3600.0,
            bytes_per_call: 500,
            max_calls: Some(50_000),
            block_timeout_s: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParetoConfig {
    /// Scale (minimum value) of the Pareto distribution.
    pub x_min: f64,
    /// Shape; must exceed 1 for a finite mean.
    pub alpha: f64,
    /// Bytes per Pareto unit: frame bytes = round(sample * bytes_per_unit).
    pub bytes_per_unit: f64,
    pub frame_interval_s: f64,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        // mean sample = alpha/(alpha-1) = 3, so mean frame = 12 kB at 25 fps
        ParetoConfig { x_min: 1.0, alpha: 1.5, bytes_per_unit: 4000.0, frame_interval_s: 0.04 }
    }
}

/// Inverse CDF of the exponential inter-arrival distribution: -ln(u)/lambda,
/// u in (0, 1].
pub fn exponential_inverse_cdf(u: f64, lambda: f64) -> f64 {
    debug_assert!(u > 0.0 && u <= 1.0 && lambda > 0.0);
    -u.ln() / lambda
}

/// Inverse CDF of the Pareto distribution: x_min * u^(-1/alpha), u in (0, 1].
pub fn pareto_inverse_cdf(u: f64, x_min: f64, alpha: f64) -> f64 {
    debug_assert!(u > 0.0 && u <= 1.0);
    x_min * u.powf(-1.0 / alpha)
}

/// Next inter-arrival gap of a Poisson process with rate `lambda`.
pub fn next_poisson_arrival(rng: &mut RngStream, lambda: f64) -> f64 {
    exponential_inverse_cdf(rng.next_open_f64(), lambda)
}

/// One Pareto sample; always >= x_min.
pub fn sample_pareto(rng: &mut RngStream, cfg: &ParetoConfig) -> f64 {
    pareto_inverse_cdf(rng.next_open_f64(), cfg.x_min, cfg.alpha)
}

/// One application send request: `bytes` become available at `at`. For calls,
/// every request opens its own connection; FTP and VBR share one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SendRequest {
    pub at: SimTime,
    pub bytes: u64,
}

pub fn generate_ftp(cfg: &FtpWorkload) -> Result<Vec<SendRequest>, TrafficError> {
    if cfg.total_bytes == 0 {
        return Err(TrafficError::InvalidConfig("ftp total_bytes must be > 0".into()));
    }
    Ok(vec![SendRequest { at: SimTime::from_secs_f64(cfg.start_s), bytes: cfg.total_bytes }])
}

/// Call arrival times via successive exponential gaps over the horizon.
pub fn generate_calls(cfg: &PoissonCallConfig, rng: &mut RngStream) -> Result<Vec<SendRequest>, TrafficError> {
    if cfg.lambda <= 0.0 {
        return Err(TrafficError::InvalidConfig("lambda must be > 0".into()));
    }
    if cfg.horizon_s <= 0.0 {
        return Err(TrafficError::InvalidConfig("horizon must be > 0".into()));
    }
    let mut requests = Vec::new();
    let mut t = 0.0;
    loop {
        t += next_poisson_arrival(rng, cfg.lambda);
        if t > cfg.horizon_s {
            break;
        }
        if cfg.max_calls.is_some_and(|cap| requests.len() as u64 >= cap) {
            break;
        }
        requests.push(SendRequest { at: SimTime::from_secs_f64(t), bytes: cfg.bytes_per_call as u64 });
    }
    Ok(requests)
}

/// Per-frame VBR sizes on one persistent connection, for `duration_s` of
/// simulated time.
pub fn generate_vbr(cfg: &ParetoConfig, duration_s: f64, rng: &mut RngStream) -> Result<Vec<SendRequest>, TrafficError> {
    if cfg.alpha <= 1.0 {
        return Err(TrafficError::InvalidConfig(format!("alpha {} must be > 1 for a finite mean", cfg.alpha)));
    }
    if cfg.x_min <= 0.0 || cfg.bytes_per_unit <= 0.0 || cfg.frame_interval_s <= 0.0 {
        return Err(TrafficError::InvalidConfig("x_min, bytes_per_unit, frame_interval must be > 0".into()));
    }
    let frames = (duration_s / cfg.frame_interval_s).floor() as u64;
    let mut requests = Vec::with_capacity(frames as usize);
    for i in 0..frames {
        let bytes = (sample_pareto(rng, cfg) * cfg.bytes_per_unit).round() as u64;
        requests.push(SendRequest {
            at: SimTime::from_secs_f64(i as f64 * cfg.frame_interval_s),
            bytes,
        });
    }
    Ok(requests)
}
