//! Multi-stage helpers shared by the command-line tool and the service, so
//! both produce byte-identical artifacts.

use serde::{Deserialize, Serialize};

use crate::geojson::{export_feature_collection, FeatureCollection, StyleConfig};
use crate::geom::Point2;
use crate::georef::{georegister, GeoAnchor};
use crate::homography::Homography;
use crate::mesh::{AngleHistogram, GroundRect, Rectification, Reorientation};
use crate::sim::{parse_sim, write_sim};
use crate::trace::{FloorModel, TraceError};
use crate::Error;

/// Geo-registered GeoJSON for a traced model. The model is normalized
/// through its sim form first, so a model and its sim file export the same
/// bytes.
pub fn export_geojson(model: &FloorModel, anchors: &[GeoAnchor], style: &StyleConfig) -> Result<String, Error> {
    let sim = write_sim(model)?;
    convert_sim(sim.as_bytes(), anchors, style)
}

/// sim bytes to validated GeoJSON text.
pub fn convert_sim(sim: &[u8], anchors: &[GeoAnchor], style: &StyleConfig) -> Result<String, Error> {
    let model = parse_sim(sim)?;
    let geo = georegister(&model, anchors)?;
    let fc = export_feature_collection(&model, &geo, style)?;
    let text = fc.to_json();
    FeatureCollection::from_json(&text)?;
    Ok(text)
}

/// Pixel ring of a space, looked up by id and then by unique name.
pub fn space_polygon(model: &FloorModel, key: &str) -> Result<Vec<Point2>, Error> {
    let space = match model.space(key) {
        Some(s) => s,
        None => {
            let mut hits = model.spaces.iter().filter(|s| s.name == key);
            match (hits.next(), hits.next()) {
                (Some(s), None) => s,
                _ => return Err(TraceError::UnknownSpace(key.to_string()).into()),
            }
        }
    };
    space.corners.iter().map(|&c| model.corner_point(c).map_err(Error::from)).collect()
}

/// Summary written next to a re-oriented mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorientReport {
    pub theta_deg: f64,
    pub dominance: f64,
    pub histogram: AngleHistogram,
}

impl From<&Reorientation> for ReorientReport {
    fn from(r: &Reorientation) -> Self {
        ReorientReport { theta_deg: r.theta_deg, dominance: r.histogram.dominance(), histogram: r.histogram.clone() }
    }
}

/// The quad-to-rectangle map written next to a rectified mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifyReport {
    pub h: Homography,
    pub rect: GroundRect,
}

impl From<&Rectification> for RectifyReport {
    fn from(r: &Rectification) -> Self {
        RectifyReport { h: r.h, rect: r.rect }
    }
}

/// Pretty JSON with a trailing newline, the format of every JSON artifact.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}
