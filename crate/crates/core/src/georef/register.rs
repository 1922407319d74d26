use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::utm::{utm_to_wgs84, utm_zone, wgs84_to_utm_in_zone, Hemisphere, UtmCoord};
use super::GeoError;
use crate::geom::Point2;
use crate::homography::{estimate_homography, Homography};
use crate::trace::{CornerId, EntranceCornerId, FloorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoAnchor {
    pub corner: CornerId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorFile {
    #[serde(default)]
    anchor: Vec<GeoAnchor>,
}

/// Reads an anchor file:
///
/// ```toml
/// [[anchor]]
/// corner = 1
/// lat = 36.999
/// lon = -122.06
/// ```
pub fn parse_anchors(text: &str) -> Result<Vec<GeoAnchor>, GeoError> {
    let file: AnchorFile = toml::from_str(text).map_err(|e| GeoError::AnchorFile(e.to_string()))?;
    Ok(file.anchor)
}

pub fn write_anchors(anchors: &[GeoAnchor]) -> String {
    toml::to_string(&AnchorFile { anchor: anchors.to_vec() }).expect("anchors serialize")
}

/// The pixel→UTM map of a registered plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoFrame {
    pub pixel_to_utm: Homography,
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

impl GeoFrame {
    pub fn pixel_to_utm(&self, p: Point2) -> Result<UtmCoord, GeoError> {
        let q = self.pixel_to_utm.apply(p)?;
        Ok(UtmCoord { zone: self.zone, hemisphere: self.hemisphere, easting: q.x, northing: q.y })
    }

    pub fn pixel_to_latlon(&self, p: Point2) -> Result<LatLon, GeoError> {
        let (lat, lon) = utm_to_wgs84(&self.pixel_to_utm(p)?)?;
        Ok(LatLon { lat, lon })
    }
}

/// Geodetic coordinates of every corner of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoModel {
    pub frame: GeoFrame,
    pub corners: BTreeMap<CornerId, LatLon>,
    pub entrance_corners: BTreeMap<EntranceCornerId, LatLon>,
    /// Distance in metres between each anchor's projected position and its
    /// surveyed position, in anchor order.
    pub anchor_residuals: Vec<f64>,
}

impl GeoModel {
    pub fn rms_residual(&self) -> f64 {
        let n = self.anchor_residuals.len().max(1) as f64;
        (self.anchor_residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt()
    }
}

/// Registers a plan from at least four anchored corners sharing one UTM zone.
pub fn georegister(model: &FloorModel, anchors: &[GeoAnchor]) -> Result<GeoModel, GeoError> {
    if anchors.len() < 4 {
        return Err(GeoError::TooFewAnchors(anchors.len()));
    }
    let mut seen = BTreeSet::new();
    let mut zone = None;
    let mut pairs = Vec::with_capacity(anchors.len());
    for a in anchors {
        if !seen.insert(a.corner) {
            return Err(GeoError::DuplicateAnchor(a.corner));
        }
        let pixel = model
            .corner(a.corner)
            .ok_or(GeoError::UnknownAnchorCorner(a.corner))?
            .point();
        let z = (utm_zone(a.lat, a.lon), Hemisphere::of_latitude(a.lat));
        match zone {
            None => zone = Some(z),
            Some(first) if first != z => {
                return Err(GeoError::ZoneSpan {
                    first: format!("{}{}", first.0, first.1.as_str()),
                    second: format!("{}{}", z.0, z.1.as_str()),
                })
            }
            _ => {}
        }
        let u = wgs84_to_utm_in_zone(a.lat, a.lon, z.0, z.1)?;
        pairs.push((pixel, Point2::new(u.easting, u.northing)));
    }
    let (zone, hemisphere) = zone.expect("at least four anchors");
    let h = estimate_homography(&pairs)?;
    let frame = GeoFrame { pixel_to_utm: h, zone, hemisphere };

    let anchor_residuals = pairs
        .iter()
        .map(|(px, utm)| Ok(h.apply(*px)?.dist(*utm)))
        .collect::<Result<Vec<f64>, GeoError>>()?;
    let corners = model
        .corners
        .iter()
        .map(|c| Ok((c.id, frame.pixel_to_latlon(c.point())?)))
        .collect::<Result<_, GeoError>>()?;
    let entrance_corners = model
        .entrance_corners
        .iter()
        .map(|c| Ok((c.id, frame.pixel_to_latlon(c.point())?)))
        .collect::<Result<_, GeoError>>()?;
    Ok(GeoModel { frame, corners, entrance_corners, anchor_residuals })
}
