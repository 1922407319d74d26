//! WGS84 ⇄ UTM using the Krüger series to sixth order in the third
//! flattening, which is accurate to well below a millimetre within a zone.

use serde::{Deserialize, Serialize};

use super::GeoError;

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_INV_F: f64 = 298.257_223_563;
pub const K0: f64 = 0.9996;
pub const FALSE_EASTING: f64 = 500_000.0;
pub const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
pub const MAX_LATITUDE: f64 = 84.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hemisphere {
    #[serde(rename = "N")]
    North,
    #[serde(rename = "S")]
    South,
}

impl Hemisphere {
    pub fn of_latitude(lat: f64) -> Hemisphere {
        if lat < 0.0 {
            Hemisphere::South
        } else {
            Hemisphere::North
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::North => "N",
            Hemisphere::South => "S",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmCoord {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub easting: f64,
    pub northing: f64,
}

struct Series {
    e: f64,
    /// Rectifying radius times k0.
    k0a: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> &'static Series {
    static S: std::sync::OnceLock<Series> = std::sync::OnceLock::new();
    S.get_or_init(|| {
        let f = 1.0 / WGS84_INV_F;
        let e = (f * (2.0 - f)).sqrt();
        let n = f / (2.0 - f);
        let (n2, n3) = (n * n, n * n * n);
        let (n4, n5, n6) = (n3 * n, n3 * n2, n3 * n3);
        let a_rect = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
                + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
                - 1983433.0 * n6 / 1935360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
            49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
            34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
            212378941.0 * n6 / 319334400.0,
        ];
        let beta = [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0
                + 96199.0 * n6 / 604800.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
            4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
            4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
            20648693.0 * n6 / 638668800.0,
        ];
        Series { e, k0a: K0 * a_rect, alpha, beta }
    })
}

/// Conformal latitude tangent τ' from geodetic latitude tangent τ.
fn tau_prime(tau: f64, e: f64) -> f64 {
    let sigma = (e * (e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
    tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt()
}

/// Inverts [`tau_prime`] by Newton's method.
fn tau_from_prime(tp: f64, e: f64) -> f64 {
    let e2m = 1.0 - e * e;
    let mut tau = tp / e2m;
    for _ in 0..10 {
        let tpi = tau_prime(tau, e);
        let dtau = (tp - tpi) / (1.0 + tpi * tpi).sqrt() * (1.0 + e2m * tau * tau)
            / (e2m * (1.0 + tau * tau).sqrt());
        tau += dtau;
        if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    tau
}

pub fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

/// Standard zone for a position, including the Norway and Svalbard
/// exceptions.
pub fn utm_zone(lat: f64, lon: f64) -> u8 {
    let lon = if lon >= 180.0 { lon - 360.0 } else { lon };
    let mut zone = (((lon + 180.0) / 6.0).floor() as i32 + 1).clamp(1, 60) as u8;
    if (56.0..64.0).contains(&lat) && (3.0..12.0).contains(&lon) {
        zone = 32;
    }
    if (72.0..=84.0).contains(&lat) && (0.0..42.0).contains(&lon) {
        zone = match lon {
            l if l < 9.0 => 31,
            l if l < 21.0 => 33,
            l if l < 33.0 => 35,
            _ => 37,
        };
    }
    zone
}

fn check_latlon(lat: f64, lon: f64) -> Result<(), GeoError> {
    if !lat.is_finite() || !lon.is_finite() || lat.abs() > MAX_LATITUDE || !(-180.0..180.0).contains(&lon) {
        return Err(GeoError::OutOfUtmRange(format!("latitude {lat}, longitude {lon}")));
    }
    Ok(())
}

/// Projects into the standard zone for the position.
pub fn wgs84_to_utm(lat: f64, lon: f64) -> Result<UtmCoord, GeoError> {
    check_latlon(lat, lon)?;
    wgs84_to_utm_in_zone(lat, lon, utm_zone(lat, lon), Hemisphere::of_latitude(lat))
}

/// Projects into a given zone and hemisphere, e.g. to keep a site that
/// straddles a boundary in one frame.
pub fn wgs84_to_utm_in_zone(lat: f64, lon: f64, zone: u8, hemisphere: Hemisphere) -> Result<UtmCoord, GeoError> {
    check_latlon(lat, lon)?;
    if !(1..=60).contains(&zone) {
        return Err(GeoError::OutOfUtmRange(format!("zone {zone}")));
    }
    let s = series();
    let mut dlon = lon - central_meridian(zone);
    dlon -= 360.0 * ((dlon + 180.0) / 360.0).floor();
    if dlon.abs() > 90.0 {
        return Err(GeoError::OutOfUtmRange(format!("longitude {lon} is too far from zone {zone}")));
    }
    let lam = dlon.to_radians();
    let tp = tau_prime(lat.to_radians().tan(), s.e);
    let xip = tp.atan2(lam.cos());
    let etap = (lam.sin() / (tp * tp + lam.cos().powi(2)).sqrt()).asinh();
    let mut xi = xip;
    let mut eta = etap;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xip).sin() * (k * etap).cosh();
        eta += a * (k * xip).cos() * (k * etap).sinh();
    }
    let easting = FALSE_EASTING + s.k0a * eta;
    let mut northing = s.k0a * xi;
    if hemisphere == Hemisphere::South {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok(UtmCoord { zone, hemisphere, easting, northing })
}

/// Inverse projection, returning `(lat, lon)` in degrees.
pub fn utm_to_wgs84(utm: &UtmCoord) -> Result<(f64, f64), GeoError> {
    let UtmCoord { zone, hemisphere, easting, northing } = *utm;
    if !(1..=60).contains(&zone)
        || !easting.is_finite()
        || !northing.is_finite()
        || easting <= 100_000.0
        || easting >= 900_000.0
        || !(0.0..=FALSE_NORTHING_SOUTH).contains(&northing)
    {
        return Err(GeoError::OutOfUtmRange(format!(
            "zone {zone}{}, easting {easting}, northing {northing}",
            hemisphere.as_str()
        )));
    }
    let s = series();
    let n0 = if hemisphere == Hemisphere::South { FALSE_NORTHING_SOUTH } else { 0.0 };
    let xi = (northing - n0) / s.k0a;
    let eta = (easting - FALSE_EASTING) / s.k0a;
    let mut xip = xi;
    let mut etap = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xip -= b * (k * xi).sin() * (k * eta).cosh();
        etap -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let tp = xip.sin() / (etap.sinh().powi(2) + xip.cos().powi(2)).sqrt();
    let lam = etap.sinh().atan2(xip.cos());
    let lat = tau_from_prime(tp, s.e).atan().to_degrees();
    let mut lon = central_meridian(zone) + lam.to_degrees();
    if lon >= 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    if lat.abs() > MAX_LATITUDE + 0.5 {
        return Err(GeoError::OutOfUtmRange(format!("latitude {lat}")));
    }
    Ok((lat, lon))
}
