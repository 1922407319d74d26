//! GeoJSON (RFC 7946) export of registered floor plans and boxed objects.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geom::{round_to, signed_area, Point2};
use crate::georef::{GeoError, GeoFrame, GeoModel, Hemisphere, LatLon};
use crate::homography::Homography;
use crate::mesh::ObjectBox;
use crate::trace::{CornerId, EntranceCornerId, FloorModel, Space, SpaceType};

pub const DEGREE_DECIMALS: i32 = 7;
pub const METRE_DECIMALS: i32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error("corner #{0} has no geodetic position")]
    MissingGeoCorner(CornerId),
    #[error("entrance corner #{0} has no geodetic position")]
    MissingGeoEntranceCorner(EntranceCornerId),
    #[error("the map has no geo-registration")]
    UnregisteredModel,
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("object {0:?} collides with a space of the same name")]
    NameCollision(String),
    #[error("invalid GeoJSON: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    pub room_height: f64,
    pub room_color: String,
    pub staircase_color: String,
    pub elevator_color: String,
    pub object_color: String,
    /// Step heights as fractions of `room_height`, one strip per entry.
    pub step_fractions: Vec<f64>,
}

impl Default for StyleConfig {
    fn default() -> Self {
        StyleConfig {
            room_height: 2.5,
            room_color: "#FFD966".into(),
            staircase_color: "#2E8B57".into(),
            elevator_color: "#1E40AF".into(),
            object_color: "#A0522D".into(),
            step_fractions: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
        }
    }
}

fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].chars().all(|c| c.is_ascii_hexdigit())
}

impl StyleConfig {
    pub fn from_toml(text: &str) -> Result<StyleConfig, ExportError> {
        let style: StyleConfig = toml::from_str(text).map_err(|e| ExportError::InvalidStyle(e.to_string()))?;
        style.validate()?;
        Ok(style)
    }

    pub fn validate(&self) -> Result<(), ExportError> {
        let bad = |m: String| Err(ExportError::InvalidStyle(m));
        if !(self.room_height > 0.0 && self.room_height.is_finite()) {
            return bad(format!("room_height must be positive, got {}", self.room_height));
        }
        for c in [&self.room_color, &self.staircase_color, &self.elevator_color, &self.object_color] {
            if !is_hex_color(c) {
                return bad(format!("{c:?} is not a #RRGGBB color"));
            }
        }
        let f = &self.step_fractions;
        if f.is_empty() || f[0] <= 0.0 || f.windows(2).any(|w| w[1] <= w[0]) || f[f.len() - 1] != 1.0 {
            return bad("step_fractions must be positive, strictly increasing and end at 1".into());
        }
        Ok(())
    }

    pub fn color_for(&self, t: SpaceType) -> &str {
        match t {
            SpaceType::Staircase => &self.staircase_color,
            SpaceType::Elevator => &self.elevator_color,
            _ => &self.room_color,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub utm_zone: u8,
    pub hemisphere: Hemisphere,
    pub pixel_to_utm: Homography,
}

impl From<GeoFrame> for Registration {
    fn from(f: GeoFrame) -> Self {
        Registration { utm_zone: f.zone, hemisphere: f.hemisphere, pixel_to_utm: f.pixel_to_utm }
    }
}

impl From<&Registration> for GeoFrame {
    fn from(r: &Registration) -> Self {
        GeoFrame { pixel_to_utm: r.pixel_to_utm, zone: r.utm_zone, hemisphere: r.hemisphere }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection {
    #[serde(rename = "type")]
    pub kind: String,
    /// Foreign member carrying the pixel→UTM map, so objects can be added
    /// to an exported map without the plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<Registration>,
    pub features: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: Geometry,
    pub properties: Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(rename = "type")]
    pub kind: String,
    pub coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Space,
    Step,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntranceProps {
    pub id: String,
    pub wall: u32,
    pub coordinates: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Properties {
    pub name: String,
    pub color: String,
    pub height: f64,
    pub base_height: f64,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_edges: Option<Vec<[[f64; 2]; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entrances: Option<Vec<EntranceProps>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_y: Option<f64>,
}

impl Properties {
    fn new(name: &str, color: &str, height: f64, kind: FeatureKind) -> Properties {
        Properties {
            name: name.to_string(),
            color: color.to_string(),
            height: round_to(height, METRE_DECIMALS),
            base_height: 0.0,
            kind,
            space_id: None,
            space_type: None,
            open_edges: None,
            entrances: None,
            step: None,
            fallback: None,
            min_y: None,
        }
    }
}

fn position(ll: LatLon) -> [f64; 2] {
    [round_to(ll.lon, DEGREE_DECIMALS), round_to(ll.lat, DEGREE_DECIMALS)]
}

/// Closes a ring and makes it counter-clockwise in (lon, lat).
fn closed_ccw(mut ring: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let pts: Vec<Point2> = ring.iter().map(|p| Point2::new(p[0], p[1])).collect();
    if signed_area(&pts) < 0.0 {
        ring.reverse();
    }
    if let Some(first) = ring.first().copied() {
        ring.push(first);
    }
    ring
}

fn polygon(ring: Vec<[f64; 2]>) -> Geometry {
    Geometry { kind: "Polygon".into(), coordinates: vec![closed_ccw(ring)] }
}

fn feature(geometry: Geometry, properties: Properties) -> Feature {
    Feature { kind: "Feature".into(), geometry, properties }
}

/// Splits a quadrilateral into `n` strips of equal width along its longer
/// axis. On a tie the cut runs across whichever edge pair is closer to the
/// pixel x axis. Returns `None` for other polygons.
pub fn staircase_strips(quad: &[Point2], n: usize) -> Option<Vec<[Point2; 4]>> {
    if quad.len() != 4 || n == 0 {
        return None;
    }
    let [q0, q1, q2, q3] = [quad[0], quad[1], quad[2], quad[3]];
    let len_a = q0.dist(q1) + q3.dist(q2);
    let len_b = q1.dist(q2) + q0.dist(q3);
    let tol = 1e-9 * (len_a + len_b);
    let along_a = if (len_a - len_b).abs() <= tol {
        let dir_a = (q1 - q0) + (q2 - q3);
        let dir_b = (q2 - q1) + (q3 - q0);
        dir_a.x.abs() / dir_a.norm() >= dir_b.x.abs() / dir_b.norm()
    } else {
        len_a > len_b
    };
    // Rails (a0→a1) and (b0→b1) run along the split axis.
    let (a0, a1, b0, b1) = if along_a { (q0, q1, q3, q2) } else { (q1, q2, q0, q3) };
    Some(
        (0..n)
            .map(|i| {
                let t0 = i as f64 / n as f64;
                let t1 = (i + 1) as f64 / n as f64;
                [a0.lerp(a1, t0), a0.lerp(a1, t1), b0.lerp(b1, t1), b0.lerp(b1, t0)]
            })
            .collect(),
    )
}

fn corner_latlon(geo: &GeoModel, id: CornerId) -> Result<LatLon, ExportError> {
    geo.corners.get(&id).copied().ok_or(ExportError::MissingGeoCorner(id))
}

fn entrance_latlon(geo: &GeoModel, id: EntranceCornerId) -> Result<LatLon, ExportError> {
    geo.entrance_corners.get(&id).copied().ok_or(ExportError::MissingGeoEntranceCorner(id))
}

fn space_features(model: &FloorModel, space: &Space, geo: &GeoModel, style: &StyleConfig) -> Result<Vec<Feature>, ExportError> {
    let ring = space
        .corners
        .iter()
        .map(|&c| corner_latlon(geo, c).map(position))
        .collect::<Result<Vec<_>, _>>()?;
    let mut props = Properties::new(&space.name, style.color_for(space.space_type), style.room_height, FeatureKind::Space);
    props.space_id = Some(space.id.clone());
    props.space_type = Some(space.space_type.as_str().to_string());

    let mut open_edges = Vec::new();
    for (i, (a, b)) in space.edges().into_iter().enumerate() {
        if !space.wall_flags[i] {
            open_edges.push([position(corner_latlon(geo, a)?), position(corner_latlon(geo, b)?)]);
        }
    }
    props.open_edges = Some(open_edges);
    props.entrances = Some(
        space
            .entrances
            .iter()
            .map(|e| {
                Ok(EntranceProps {
                    id: e.id.clone(),
                    wall: e.wall_index,
                    coordinates: [
                        position(entrance_latlon(geo, e.endpoints.0)?),
                        position(entrance_latlon(geo, e.endpoints.1)?),
                    ],
                })
            })
            .collect::<Result<_, ExportError>>()?,
    );

    if space.space_type != SpaceType::Staircase {
        return Ok(vec![feature(polygon(ring), props)]);
    }
    let pixels = space
        .corners
        .iter()
        .map(|&c| model.corner_point(c).map_err(|_| ExportError::MissingGeoCorner(c)))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(strips) = staircase_strips(&pixels, style.step_fractions.len()) else {
        props.fallback = Some(true);
        return Ok(vec![feature(polygon(ring), props)]);
    };
    let mut out = Vec::with_capacity(strips.len());
    for (i, (strip, frac)) in strips.iter().zip(&style.step_fractions).enumerate() {
        let ring = strip
            .iter()
            .map(|p| geo.frame.pixel_to_latlon(*p).map(position))
            .collect::<Result<Vec<_>, _>>()?;
        let mut p = props.clone();
        p.kind = FeatureKind::Step;
        p.height = round_to(frac * style.room_height, METRE_DECIMALS);
        p.step = Some(i as u32 + 1);
        out.push(feature(polygon(ring), p));
    }
    Ok(out)
}

/// One feature per space (staircases expand to one per step), in space order.
pub fn export_feature_collection(
    model: &FloorModel,
    geo: &GeoModel,
    style: &StyleConfig,
) -> Result<FeatureCollection, ExportError> {
    style.validate()?;
    let mut features = Vec::new();
    for space in &model.spaces {
        features.extend(space_features(model, space, geo, style)?);
    }
    Ok(FeatureCollection {
        kind: "FeatureCollection".into(),
        registration: Some(geo.frame.into()),
        features,
    })
}

/// A box as a ground-standing extrusion of its footprint.
pub fn object_to_feature(obj: &ObjectBox, frame: &GeoFrame, style: &StyleConfig) -> Result<Feature, ExportError> {
    let ring = obj
        .footprint
        .iter()
        .map(|p| frame.pixel_to_latlon(*p).map(position))
        .collect::<Result<Vec<_>, _>>()?;
    let color = obj.color.as_deref().unwrap_or(&style.object_color);
    let mut props = Properties::new(&obj.name, color, obj.height, FeatureKind::Object);
    props.min_y = Some(round_to(obj.min_y, METRE_DECIMALS));
    Ok(feature(polygon(ring), props))
}

/// Adds object features to an exported map. An object replaces an existing
/// object feature of the same name in place; new names are appended.
/// Returns the names that were replaced.
pub fn populate(
    fc: &mut FeatureCollection,
    objects: &[ObjectBox],
    style: &StyleConfig,
) -> Result<Vec<String>, ExportError> {
    style.validate()?;
    let frame: GeoFrame = fc.registration.as_ref().ok_or(ExportError::UnregisteredModel)?.into();
    let mut replaced = Vec::new();
    for obj in objects {
        let f = object_to_feature(obj, &frame, style)?;
        let existing = fc.features.iter().position(|g| g.properties.name == obj.name);
        match existing {
            Some(i) if fc.features[i].properties.kind == FeatureKind::Object => {
                fc.features[i] = f;
                replaced.push(obj.name.clone());
            }
            Some(_) => return Err(ExportError::NameCollision(obj.name.clone())),
            None => fc.features.push(f),
        }
    }
    Ok(replaced)
}

impl FeatureCollection {
    /// Pretty-printed document with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("feature collections serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<FeatureCollection, ExportError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ExportError::Invalid(e.to_string()))?;
        validate(&value)?;
        serde_json::from_value(value).map_err(|e| ExportError::Invalid(e.to_string()))
    }
}

/// Structural RFC 7946 checks on a Polygon FeatureCollection: closed rings
/// of at least four finite positions, (lon, lat) ranges, counter-clockwise
/// exteriors and clockwise holes.
pub fn validate(doc: &Value) -> Result<(), ExportError> {
    let fail = |m: String| Err(ExportError::Invalid(m));
    if doc.get("type") != Some(&Value::from("FeatureCollection")) {
        return fail("top-level type must be FeatureCollection".into());
    }
    let Some(features) = doc.get("features").and_then(Value::as_array) else {
        return fail("features must be an array".into());
    };
    for (i, f) in features.iter().enumerate() {
        if f.get("type") != Some(&Value::from("Feature")) {
            return fail(format!("feature {i}: type must be Feature"));
        }
        match f.get("properties") {
            Some(Value::Object(_)) | Some(Value::Null) => {}
            _ => return fail(format!("feature {i}: properties must be an object or null")),
        }
        let Some(geom) = f.get("geometry") else {
            return fail(format!("feature {i}: missing geometry"));
        };
        if geom.get("type") != Some(&Value::from("Polygon")) {
            return fail(format!("feature {i}: geometry must be a Polygon"));
        }
        let Some(rings) = geom.get("coordinates").and_then(Value::as_array) else {
            return fail(format!("feature {i}: coordinates must be an array"));
        };
        if rings.is_empty() {
            return fail(format!("feature {i}: polygon has no rings"));
        }
        for (r, ring) in rings.iter().enumerate() {
            let Some(positions) = ring.as_array() else {
                return fail(format!("feature {i} ring {r}: not an array"));
            };
            let mut pts = Vec::with_capacity(positions.len());
            for p in positions {
                let coords: Option<Vec<f64>> = p.as_array().map(|a| a.iter().filter_map(Value::as_f64).collect());
                match coords.as_deref() {
                    Some([lon, lat]) | Some([lon, lat, _])
                        if lon.is_finite() && lat.is_finite() && lon.abs() <= 180.0 && lat.abs() <= 90.0 =>
                    {
                        pts.push(Point2::new(*lon, *lat))
                    }
                    _ => return fail(format!("feature {i} ring {r}: bad position {p}")),
                }
            }
            if pts.len() < 4 {
                return fail(format!("feature {i} ring {r}: fewer than 4 positions"));
            }
            if pts[0] != pts[pts.len() - 1] {
                return fail(format!("feature {i} ring {r}: ring is not closed"));
            }
            let area = signed_area(&pts[..pts.len() - 1]);
            if (r == 0 && area <= 0.0) || (r > 0 && area >= 0.0) {
                return fail(format!("feature {i} ring {r}: wrong winding"));
            }
        }
    }
    Ok(())
}
