//! Terminal registry and radius-bounded nearest-terminal lookup.
//!
//! Distances are great-circle distances on a sphere of mean Earth radius.
//! A lookup first discards terminals outside a latitude/longitude rectangle
//! around the user, then measures the survivors exactly.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Mean Earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
/// Default search radius around the user.
pub const DEFAULT_RADIUS_M: f64 = 20.0;
/// Latitudes beyond this are too close to a pole for a lat/lon rectangle.
pub const MAX_BOX_LAT_DEG: f64 = 89.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("radius must be a positive finite number of meters, got {0}")]
    Radius(f64),
    #[error("no bounding box near the poles (latitude {0})")]
    PolarRegion(f64),
}

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat_deg: f64,
    lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        if !lat_deg.is_finite() || !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeoError::Latitude(lat_deg));
        }
        if !lon_deg.is_finite() || !(-180.0..=180.0).contains(&lon_deg) {
            return Err(GeoError::Longitude(lon_deg));
        }
        Ok(GeoPoint { lat_deg, lon_deg })
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat_deg, self.lon_deg)
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat_deg.to_radians();
    let phi2 = b.lat_deg.to_radians();
    let dphi = (b.lat_deg - a.lat_deg).to_radians();
    let dlambda = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Wraps a longitude difference into [-180, 180].
fn wrap_lon_delta(delta: f64) -> f64 {
    if delta > 180.0 {
        delta - 360.0
    } else if delta < -180.0 {
        delta + 360.0
    } else {
        delta
    }
}

/// Latitude/longitude rectangle centred on a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    center: GeoPoint,
    half_lat_deg: f64,
    half_lon_deg: f64,
}

impl BoundingBox {
    pub fn center(&self) -> GeoPoint {
        self.center
    }

    pub fn half_lat_deg(&self) -> f64 {
        self.half_lat_deg
    }

    pub fn half_lon_deg(&self) -> f64 {
        self.half_lon_deg
    }

    pub fn min_lat(&self) -> f64 {
        self.center.lat_deg - self.half_lat_deg
    }

    pub fn max_lat(&self) -> f64 {
        self.center.lat_deg + self.half_lat_deg
    }

    /// Western edge; may be below -180 when the box crosses the antimeridian.
    pub fn min_lon(&self) -> f64 {
        self.center.lon_deg - self.half_lon_deg
    }

    /// Eastern edge; may exceed 180 when the box crosses the antimeridian.
    pub fn max_lon(&self) -> f64 {
        self.center.lon_deg + self.half_lon_deg
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (p.lat_deg - self.center.lat_deg).abs() <= self.half_lat_deg
            && wrap_lon_delta(p.lon_deg - self.center.lon_deg).abs() <= self.half_lon_deg
    }
}

fn check_radius(radius_m: f64) -> Result<(), GeoError> {
    if radius_m.is_finite() && radius_m > 0.0 {
        Ok(())
    } else {
        Err(GeoError::Radius(radius_m))
    }
}

/// Rectangle containing every point within `radius_m` of `center`.
///
/// The latitude half-width is the radius as an arc of a meridian. The
/// longitude half-width is the widest longitude offset any point on the
/// circle reaches, which is the latitude half-width widened by roughly
/// `1 / cos(latitude)`.
pub fn bbox_prefilter(center: GeoPoint, radius_m: f64) -> Result<BoundingBox, GeoError> {
    check_radius(radius_m)?;
    let lat = center.lat_deg;
    let angular = radius_m / EARTH_RADIUS_M;
    let half_lat_deg = angular.to_degrees();
    if lat.abs() > MAX_BOX_LAT_DEG || lat.abs() + half_lat_deg >= 90.0 {
        return Err(GeoError::PolarRegion(lat));
    }
    let ratio = angular.sin() / lat.to_radians().cos();
    if ratio >= 1.0 {
        return Err(GeoError::PolarRegion(lat));
    }
    Ok(BoundingBox { center, half_lat_deg, half_lon_deg: ratio.asin().to_degrees() })
}

/// A registered terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmRecord {
    pub atm_id: String,
    pub position: GeoPoint,
}

impl AtmRecord {
    pub fn new(atm_id: impl Into<String>, position: GeoPoint) -> Self {
        AtmRecord { atm_id: atm_id.into(), position }
    }
}

/// Outcome of a nearest-terminal lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestResult {
    pub atm_id: String,
    pub distance_m: f64,
}

fn closer(a: &NearestResult, b: &NearestResult) -> Ordering {
    a.distance_m.total_cmp(&b.distance_m).then_with(|| a.atm_id.cmp(&b.atm_id))
}

fn pick_nearest<'a>(
    candidates: impl Iterator<Item = &'a AtmRecord>,
    user: GeoPoint,
    radius_m: f64,
) -> Option<NearestResult> {
    candidates
        .filter_map(|atm| {
            let distance_m = haversine_m(user, atm.position);
            (distance_m < radius_m).then(|| NearestResult { atm_id: atm.atm_id.clone(), distance_m })
        })
        .min_by(closer)
}

/// Nearest terminal strictly closer than `radius_m`.
///
/// Equidistant terminals resolve to the smallest id. Terminals outside the
/// prefilter rectangle are never measured; near the poles, where no
/// rectangle exists, every terminal is measured.
pub fn nearest_atm<'a, I>(atms: I, user: GeoPoint, radius_m: f64) -> Result<Option<NearestResult>, GeoError>
where
    I: IntoIterator<Item = &'a AtmRecord>,
{
    check_radius(radius_m)?;
    match bbox_prefilter(user, radius_m) {
        Ok(bbox) => Ok(pick_nearest(atms.into_iter().filter(|a| bbox.contains(a.position)), user, radius_m)),
        Err(GeoError::PolarRegion(_)) => Ok(pick_nearest(atms.into_iter(), user, radius_m)),
        Err(e) => Err(e),
    }
}

/// Nearest terminal by measuring every one of them.
pub fn nearest_atm_full_scan<'a, I>(atms: I, user: GeoPoint, radius_m: f64) -> Result<Option<NearestResult>, GeoError>
where
    I: IntoIterator<Item = &'a AtmRecord>,
{
    check_radius(radius_m)?;
    Ok(pick_nearest(atms.into_iter(), user, radius_m))
}

/// Read-mostly collection of terminals.
#[derive(Debug, Clone, Default)]
pub struct AtmRegistry {
    atms: Vec<AtmRecord>,
}

impl AtmRegistry {
    pub fn new(atms: Vec<AtmRecord>) -> Self {
        AtmRegistry { atms }
    }

    pub fn len(&self) -> usize {
        self.atms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AtmRecord> {
        self.atms.iter()
    }

    pub fn nearest(&self, user: GeoPoint, radius_m: f64) -> Result<Option<NearestResult>, GeoError> {
        nearest_atm(&self.atms, user, radius_m)
    }
}

impl FromIterator<AtmRecord> for AtmRegistry {
    fn from_iter<T: IntoIterator<Item = AtmRecord>>(iter: T) -> Self {
        AtmRegistry { atms: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    // Arc length along a meridian or the equator: pi * R * delta / 180.
    fn arc_m(delta_deg: f64) -> f64 {
        std::f64::consts::PI * EARTH_RADIUS_M * delta_deg / 180.0
    }

    #[test]
    fn point_bounds() {
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
        assert_eq!(GeoPoint::new(90.5, 0.0), Err(GeoError::Latitude(90.5)));
        assert_eq!(GeoPoint::new(0.0, -180.5), Err(GeoError::Longitude(-180.5)));
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_m(pt(51.0, 0.0), pt(51.0, 0.0)), 0.0);
        // pi * 6371008.8 * 0.00018 / 180 = 20.01500...
        let d = haversine_m(pt(51.0, 0.0), pt(51.00018, 0.0));
        assert!((d - 20.015).abs() < 0.01, "{d}");
        assert!((d - arc_m(0.00018)).abs() < 1e-6);
        // pi * 6371008.8 * 0.001 / 180 = 111.19493
        let d = haversine_m(pt(0.0, 0.0), pt(0.0, 0.001));
        assert!((d - 111.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn bbox_examples() {
        let b = bbox_prefilter(pt(0.0, 0.0), 20.0).unwrap();
        // 20 / 111194.93 = 0.000179864
        assert!((b.half_lat_deg() - 0.00017986).abs() < 1e-8);
        assert!((b.half_lon_deg() - 0.00017986).abs() < 1e-8);

        let b = bbox_prefilter(pt(60.0, 0.0), 20.0).unwrap();
        assert!((b.half_lon_deg() - 0.00035972).abs() < 1e-8);
        assert!(b.half_lon_deg() >= b.half_lat_deg() / 60f64.to_radians().cos());

        assert_eq!(bbox_prefilter(pt(0.0, 0.0), 0.0), Err(GeoError::Radius(0.0)));
        assert_eq!(bbox_prefilter(pt(89.5, 0.0), 20.0), Err(GeoError::PolarRegion(89.5)));
        assert_eq!(bbox_prefilter(pt(-89.5, 0.0), 20.0), Err(GeoError::PolarRegion(-89.5)));
    }

    #[test]
    fn bbox_wraps_the_antimeridian() {
        let b = bbox_prefilter(pt(0.0, 179.99999), 20.0).unwrap();
        assert!(b.max_lon() > 180.0);
        assert!(b.contains(pt(0.0, -179.99999)));
        assert!(!b.contains(pt(0.0, -179.9)));
    }

    #[test]
    fn nearest_examples() {
        let user = pt(51.0, 0.0);
        assert_eq!(nearest_atm(&[], user, 20.0).unwrap(), None);

        let one = [AtmRecord::new("atm1", pt(51.00009, 0.0))];
        let got = nearest_atm(&one, user, 20.0).unwrap().unwrap();
        assert_eq!(got.atm_id, "atm1");
        assert!((got.distance_m - 10.008).abs() < 0.001, "{}", got.distance_m);

        let two = [
            AtmRecord::new("far", pt(51.0 + 15.0 / arc_m(1.0), 0.0)),
            AtmRecord::new("near", pt(51.0 - 5.0 / arc_m(1.0), 0.0)),
        ];
        let got = nearest_atm(&two, user, 20.0).unwrap().unwrap();
        assert_eq!(got.atm_id, "near");
        assert_eq!(Some(got), nearest_atm_full_scan(&two, user, 20.0).unwrap());

        let out = [AtmRecord::new("out", pt(51.0 + 22.0 / arc_m(1.0), 0.0))];
        assert_eq!(nearest_atm(&out, user, 20.0).unwrap(), None);

        assert_eq!(nearest_atm(&one, user, -1.0), Err(GeoError::Radius(-1.0)));
    }

    #[test]
    fn cutoff_is_strict() {
        let user = pt(51.0, 0.0);
        let inside = [AtmRecord::new("in", pt(51.0 + 19.9 / arc_m(1.0), 0.0))];
        let outside = [AtmRecord::new("out", pt(51.0 + 20.1 / arc_m(1.0), 0.0))];
        assert!(nearest_atm(&inside, user, 20.0).unwrap().is_some());
        assert!(nearest_atm(&outside, user, 20.0).unwrap().is_none());
        let at = haversine_m(user, inside[0].position);
        assert!(nearest_atm(&inside, user, at).unwrap().is_none());
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let user = pt(10.0, 10.0);
        let d = 8.0 / arc_m(1.0);
        let atms = [
            AtmRecord::new("b", pt(10.0 + d, 10.0)),
            AtmRecord::new("a", pt(10.0 + d, 10.0)),
            AtmRecord::new("c", pt(10.0 + d, 10.0)),
        ];
        assert_eq!(nearest_atm(&atms, user, 20.0).unwrap().unwrap().atm_id, "a");
    }

    #[test]
    fn polar_lookup_falls_back_to_scan() {
        let user = pt(89.9999, 0.0);
        let atms = [AtmRecord::new("pole", pt(89.99995, 120.0))];
        let got = nearest_atm(&atms, user, 20.0).unwrap();
        assert_eq!(got, nearest_atm_full_scan(&atms, user, 20.0).unwrap());
        assert!(got.is_some());
    }

    #[test]
    fn registry_delegates() {
        let reg: AtmRegistry = [AtmRecord::new("x", pt(1.0, 1.0))].into_iter().collect();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.nearest(pt(1.0, 1.0), 20.0).unwrap().unwrap().distance_m, 0.0);
    }

    fn patch_point() -> impl Strategy<Value = GeoPoint> {
        // roughly a 1 km square near London
        (51.5..51.509f64, -0.1..-0.0856f64).prop_map(|(lat, lon)| pt(lat, lon))
    }

    proptest! {
        #[test]
        fn haversine_is_symmetric(a in patch_point(), b in patch_point()) {
            prop_assert_eq!(haversine_m(a, b), haversine_m(b, a));
        }

        #[test]
        fn haversine_triangle_inequality(a in patch_point(), b in patch_point(), c in patch_point()) {
            prop_assert!(haversine_m(a, c) <= haversine_m(a, b) + haversine_m(b, c) + 1e-6);
        }

        #[test]
        fn bbox_contains_the_disc(
            lat in -85.0..85.0f64,
            lon in -180.0..180.0f64,
            radius in 1.0..5000.0f64,
            bearing in 0.0..360.0f64,
            frac in 0.0..0.999_999f64,
        ) {
            let center = pt(lat, lon);
            let b = bbox_prefilter(center, radius).unwrap();
            // destination point along a great circle
            let delta = radius * frac / EARTH_RADIUS_M;
            let (phi1, lambda1, theta) = (lat.to_radians(), lon.to_radians(), bearing.to_radians());
            let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
            let lambda2 = lambda1
                + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
            let mut lon2 = lambda2.to_degrees();
            if lon2 > 180.0 { lon2 -= 360.0 }
            if lon2 < -180.0 { lon2 += 360.0 }
            let p = pt(phi2.to_degrees(), lon2);
            prop_assert!(b.contains(p), "{} at {} m not in {:?}", p, haversine_m(center, p), b);
        }
    }
}
