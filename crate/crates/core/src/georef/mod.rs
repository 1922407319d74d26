//! Geodetic registration: anchors to UTM, a pixel→UTM collineation, and
//! geodetic coordinates for every traced corner.

mod register;
mod utm;

pub use register::{georegister, parse_anchors, write_anchors, GeoAnchor, GeoFrame, GeoModel, LatLon};
pub use utm::{
    central_meridian, utm_to_wgs84, utm_zone, wgs84_to_utm, wgs84_to_utm_in_zone, Hemisphere, UtmCoord,
    FALSE_EASTING, K0, MAX_LATITUDE, WGS84_A, WGS84_INV_F,
};

use thiserror::Error;

use crate::homography::HomographyError;
use crate::trace::CornerId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("outside the UTM domain: {0}")]
    OutOfUtmRange(String),
    #[error("anchors span UTM zones {first} and {second}")]
    ZoneSpan { first: String, second: String },
    #[error("at least 4 anchors are required, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor references unknown corner #{0}")]
    UnknownAnchorCorner(CornerId),
    #[error("corner #{0} is anchored twice")]
    DuplicateAnchor(CornerId),
    #[error(transparent)]
    Homography(#[from] HomographyError),
    #[error("invalid anchor file: {0}")]
    AnchorFile(String),
}
