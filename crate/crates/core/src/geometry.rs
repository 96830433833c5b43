//! Orbital link geometry: geocentric angle between sub-satellite points,
//! slant distance per hop, end-to-end path distance, the propagation RTT
//! estimate 2D/c, and the 10x interruption threshold derived from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geocentric angles above this bound are outside the stationary-orbit
/// visibility assumption; hops exceeding it are flagged, not rejected.
pub const VISIBILITY_ANGLE_LIMIT: f64 = 2.0 * std::f64::consts::FRAC_PI_3;

/// Multiplier on the RTT estimate used as the link-interruption threshold.
pub const INTERRUPTION_RTT_MULTIPLIER: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("latitude {0} outside [-pi/2, pi/2]")]
    InvalidLatitude(f64),
    #[error("longitude {0} outside (-pi, pi]")]
    InvalidLongitude(f64),
    #[error("altitude {0} must be > 0 meters")]
    InvalidAltitude(f64),
    #[error("path needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate path: rtt estimate is zero")]
    DegeneratePath,
}

/// Sub-satellite latitude/longitude (radians) plus orbital altitude (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubSatellitePoint {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_m: f64,
}

impl SubSatellitePoint {
    pub fn new(latitude: f64, longitude: f64, altitude_m: f64) -> Result<Self, GeometryError> {
        use std::f64::consts::{FRAC_PI_2, PI};
        if !latitude.is_finite() || latitude.abs() > FRAC_PI_2 {
            return Err(GeometryError::InvalidLatitude(latitude));
        }
        if !longitude.is_finite() || longitude <= -PI || longitude > PI {
            return Err(GeometryError::InvalidLongitude(longitude));
        }
        if !altitude_m.is_finite() || altitude_m <= 0.0 {
            return Err(GeometryError::InvalidAltitude(altitude_m));
        }
        Ok(SubSatellitePoint { latitude, longitude, altitude_m })
    }

    /// Ephemeris convention: degrees in, kilometers of altitude in.
    pub fn from_degrees(lat_deg: f64, lon_deg: f64, alt_km: f64) -> Result<Self, GeometryError> {
        SubSatellitePoint::new(lat_deg.to_radians(), lon_deg.to_radians(), alt_km * 1000.0)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub earth_radius_m: f64,
    pub light_speed_mps: f64,
}

impl Default for GeometryConstants {
    fn default() -> Self {
        GeometryConstants { earth_radius_m: 6_371_000.0, light_speed_mps: 299_792_458.0 }
    }
}

/// Per-hop and end-to-end geometry of a relay chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub hop_thetas: Vec<f64>,
    pub hop_distances_m: Vec<f64>,
    pub total_distance_m: f64,
    pub rtt_est_s: f64,
    /// Indices of hops whose geocentric angle exceeds the visibility bound.
    pub wide_angle_hops: Vec<usize>,
}

/// Spherical law of cosines between two sub-satellite points. The cosine
/// argument is clamped into [-1, 1] so the identity case cannot fall out of
/// the arccos domain through rounding.
pub fn geocentric_angle(a: &SubSatellitePoint, b: &SubSatellitePoint) -> f64 {
    let arg = a.latitude.sin() * b.latitude.sin()
        + a.latitude.cos() * b.latitude.cos() * (a.longitude - b.longitude).cos();
    arg.clamp(-1.0, 1.0).acos().clamp(0.0, std::f64::consts::PI)
}

/// Slant distance between two satellites from their geocentric angle and
/// orbital radii (law of cosines in the orbital plane triangle).
pub fn link_distance(a: &SubSatellitePoint, b: &SubSatellitePoint, consts: &GeometryConstants) -> f64 {
    let ra = consts.earth_radius_m + a.altitude_m;
    let rb = consts.earth_radius_m + b.altitude_m;
    let theta = geocentric_angle(a, b);
    (ra * ra + rb * rb - 2.0 * ra * rb * theta.cos()).max(0.0).sqrt()
}

/// Chain geometry over consecutive point pairs: hop distances, total distance
/// D, and the propagation estimate RTT_est = 2D/c.
pub fn path_geometry(
    points: &[SubSatellitePoint],
    consts: &GeometryConstants,
) -> Result<LinkGeometry, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    let mut hop_thetas = Vec::with_capacity(points.len() - 1);
    let mut hop_distances_m = Vec::with_capacity(points.len() - 1);
    let mut wide_angle_hops = Vec::new();
    for (i, pair) in points.windows(2).enumerate() {
        let theta = geocentric_angle(&pair[0], &pair[1]);
        if theta > VISIBILITY_ANGLE_LIMIT {
            wide_angle_hops.push(i);
        }
        hop_thetas.push(theta);
        hop_distances_m.push(link_distance(&pair[0], &pair[1], consts));
    }
    let total_distance_m: f64 = hop_distances_m.iter().sum();
    let rtt_est_s = 2.0 * total_distance_m / consts.light_speed_mps;
    Ok(LinkGeometry { hop_thetas, hop_distances_m, total_distance_m, rtt_est_s, wide_angle_hops })
}

/// Conservative link-break threshold: 10 * RTT_est.
pub fn interruption_threshold(geom: &LinkGeometry) -> Result<f64, GeometryError> {
    if geom.rtt_est_s <= 0.0 {
        return Err(GeometryError::DegeneratePath);
    }
    Ok(INTERRUPTION_RTT_MULTIPLIER * geom.rtt_est_s)
}
