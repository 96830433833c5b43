//! Closed-form slow-start duration: how long classic slow start takes to
//! reach a stable rate B with segment length l over a given RTT.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("inputs must be positive (rtt={rtt_s}, bandwidth={bandwidth_bps}, segment={segment_bits})")]
    NonPositiveInput { rtt_s: f64, bandwidth_bps: f64, segment_bits: f64 },
    #[error("degenerate bandwidth-delay product: B*rtt/l = {0} < 1")]
    DegenerateBdp(f64),
}

/// t_ss = RTT * (1 + log2(B * RTT / l)).
pub fn analyze_slow_start(rtt_s: f64, bandwidth_bps: f64, segment_bits: f64) -> Result<f64, AnalysisError> {
    if !(rtt_s > 0.0 && bandwidth_bps > 0.0 && segment_bits > 0.0) {
        return Err(AnalysisError::NonPositiveInput { rtt_s, bandwidth_bps, segment_bits });
    }
    let bdp_segments = bandwidth_bps * rtt_s / segment_bits;
    if bdp_segments < 1.0 {
        return Err(AnalysisError::DegenerateBdp(bdp_segments));
    }
    Ok(rtt_s * (1.0 + bdp_segments.log2()))
}
