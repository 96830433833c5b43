//! Deterministic discrete-event simulator of space communication links with a
//! pluggable congestion-control layer: an aggressive mechanism built around
//! fast start, RTT-based loss-cause classification and window maintenance
//! across link interruptions, plus classical baselines (Tahoe, Reno, Vegas,
//! Westwood-style), satellite path geometry, traffic models, and metrics.

pub mod analysis;
pub mod channel;
pub mod geometry;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod traffic;
pub mod transport;
