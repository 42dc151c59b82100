//! WGS84 geodetic ↔ local North-East-Down coordinate transforms.
//!
//! All position solving happens in a local tangent frame anchored at a fixed
//! geodetic reference point, so ranges and residuals live in an equal-length
//! planar frame. The conversion goes through ECEF (geodetic → ECEF → rotation
//! into the tangent frame at the reference), which keeps the round trip exact
//! to numerical round-off rather than relying on a flat-earth scale factor.
//!
//! Axis convention used by the 2D solver: x = east, y = north; down is
//! carried alongside but never solved for.

use core::fmt;

use libm::{atan2, cos, sin, sqrt};

/// WGS84 semi-major axis, meters.
pub const WGS84_A: f64 = 6378137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257223563;
/// First eccentricity squared, e² = f(2 − f).
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

const DEG_TO_RAD: f64 = core::f64::consts::PI / 180.0;
const RAD_TO_DEG: f64 = 180.0 / core::f64::consts::PI;

/// A WGS84 geodetic position. Constructed via [`GeodeticPoint::new`], which
/// enforces the coordinate bounds, so every value of this type is valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPoint {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Meters above the WGS84 ellipsoid.
    pub height_m: f64,
}

impl GeodeticPoint {
    pub fn new(latitude_deg: f64, longitude_deg: f64, height_m: f64) -> Result<Self, GeoError> {
        if !latitude_deg.is_finite() || !longitude_deg.is_finite() || !height_m.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(GeoError::LatitudeOutOfBounds(latitude_deg));
        }
        if !(-180.0..=180.0).contains(&longitude_deg) {
            return Err(GeoError::LongitudeOutOfBounds(longitude_deg));
        }
        Ok(Self {
            latitude_deg,
            longitude_deg,
            height_m,
        })
    }

    /// Coordinate-wise linear interpolation toward `other`.
    ///
    /// Valid at deployment scale (kilometers, far from the antimeridian),
    /// where lat/lon are locally affine in position.
    pub fn lerp(&self, other: &GeodeticPoint, fraction: f64) -> GeodeticPoint {
        let a = fraction;
        GeodeticPoint {
            latitude_deg: self.latitude_deg * (1.0 - a) + other.latitude_deg * a,
            longitude_deg: self.longitude_deg * (1.0 - a) + other.longitude_deg * a,
            height_m: self.height_m * (1.0 - a) + other.height_m * a,
        }
    }
}

/// Offsets from a reference origin in the local North-East-Down frame,
/// meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NedPoint {
    pub north_m: f64,
    pub east_m: f64,
    pub down_m: f64,
}

impl NedPoint {
    pub fn new(north_m: f64, east_m: f64, down_m: f64) -> Self {
        Self {
            north_m,
            east_m,
            down_m,
        }
    }

    /// Horizontal (north/east plane) distance to `other`.
    pub fn horizontal_distance(&self, other: &NedPoint) -> f64 {
        let dn = self.north_m - other.north_m;
        let de = self.east_m - other.east_m;
        sqrt(dn * dn + de * de)
    }

    /// Horizontal norm of the offset itself.
    pub fn horizontal_norm(&self) -> f64 {
        sqrt(self.north_m * self.north_m + self.east_m * self.east_m)
    }
}

/// Fixed geodetic anchor of the local tangent frame for one pipeline run.
///
/// Caches the ECEF position and rotation terms of the origin so per-point
/// conversions are cheap.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceOrigin {
    origin: GeodeticPoint,
    ecef: [f64; 3],
    sin_lat: f64,
    cos_lat: f64,
    sin_lon: f64,
    cos_lon: f64,
}

impl ReferenceOrigin {
    pub fn new(origin: GeodeticPoint) -> Self {
        let lat = origin.latitude_deg * DEG_TO_RAD;
        let lon = origin.longitude_deg * DEG_TO_RAD;
        Self {
            origin,
            ecef: geodetic_to_ecef(&origin),
            sin_lat: sin(lat),
            cos_lat: cos(lat),
            sin_lon: sin(lon),
            cos_lon: cos(lon),
        }
    }

    pub fn origin(&self) -> &GeodeticPoint {
        &self.origin
    }
}

/// Geodetic → ECEF (meters).
pub fn geodetic_to_ecef(p: &GeodeticPoint) -> [f64; 3] {
    let lat = p.latitude_deg * DEG_TO_RAD;
    let lon = p.longitude_deg * DEG_TO_RAD;
    let (slat, clat) = (sin(lat), cos(lat));
    let (slon, clon) = (sin(lon), cos(lon));
    // Prime vertical radius of curvature.
    let n = WGS84_A / sqrt(1.0 - WGS84_E2 * slat * slat);
    [
        (n + p.height_m) * clat * clon,
        (n + p.height_m) * clat * slon,
        (n * (1.0 - WGS84_E2) + p.height_m) * slat,
    ]
}

/// ECEF → geodetic via fixed-point iteration on the latitude.
///
/// Converges to sub-nanometer height error in a handful of iterations for
/// any point near the ellipsoid surface (poles excluded, which the
/// coordinate bounds of this pipeline never approach).
pub fn ecef_to_geodetic(ecef: [f64; 3]) -> GeodeticPoint {
    let [x, y, z] = ecef;
    let lon = atan2(y, x);
    let p = sqrt(x * x + y * y);

    let mut lat = atan2(z, p * (1.0 - WGS84_E2));
    let mut height = 0.0;
    for _ in 0..10 {
        let slat = sin(lat);
        let n = WGS84_A / sqrt(1.0 - WGS84_E2 * slat * slat);
        height = p / cos(lat) - n;
        let lat_next = atan2(z, p * (1.0 - WGS84_E2 * n / (n + height)));
        let delta = lat_next - lat;
        lat = lat_next;
        if delta.abs() < 1e-14 {
            break;
        }
    }

    GeodeticPoint {
        latitude_deg: lat * RAD_TO_DEG,
        longitude_deg: lon * RAD_TO_DEG,
        height_m: height,
    }
}

/// NED offsets of `p` relative to `origin`.
pub fn geodetic_to_ned(p: &GeodeticPoint, origin: &ReferenceOrigin) -> NedPoint {
    let ecef = geodetic_to_ecef(p);
    let dx = ecef[0] - origin.ecef[0];
    let dy = ecef[1] - origin.ecef[1];
    let dz = ecef[2] - origin.ecef[2];
    let (slat, clat) = (origin.sin_lat, origin.cos_lat);
    let (slon, clon) = (origin.sin_lon, origin.cos_lon);
    NedPoint {
        north_m: -slat * clon * dx - slat * slon * dy + clat * dz,
        east_m: -slon * dx + clon * dy,
        down_m: -clat * clon * dx - clat * slon * dy - slat * dz,
    }
}

/// Exact inverse of [`geodetic_to_ned`] up to numerical round-off.
pub fn ned_to_geodetic(p: &NedPoint, origin: &ReferenceOrigin) -> GeodeticPoint {
    let (slat, clat) = (origin.sin_lat, origin.cos_lat);
    let (slon, clon) = (origin.sin_lon, origin.cos_lon);
    let (n, e, d) = (p.north_m, p.east_m, p.down_m);
    let dx = -slat * clon * n - slon * e - clat * clon * d;
    let dy = -slat * slon * n + clon * e - clat * slon * d;
    let dz = clat * n - slat * d;
    ecef_to_geodetic([
        origin.ecef[0] + dx,
        origin.ecef[1] + dy,
        origin.ecef[2] + dz,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeoError {
    LatitudeOutOfBounds(f64),
    LongitudeOutOfBounds(f64),
    NonFinite,
}

impl fmt::Display for GeoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeoError::LatitudeOutOfBounds(v) => {
                write!(f, "latitude {v} deg outside [-90, 90]")
            }
            GeoError::LongitudeOutOfBounds(v) => {
                write!(f, "longitude {v} deg outside [-180, 180]")
            }
            GeoError::NonFinite => write!(f, "non-finite coordinate"),
        }
    }
}

impl core::error::Error for GeoError {}
