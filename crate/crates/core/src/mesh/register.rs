use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rectify::GroundRect;
use super::MeshError;
use crate::geom::{bounds, Point2};

/// Quarter turn about +Y applied before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Same convention as `rotate_y`, exact for quarter turns.
    pub fn apply(self, x: f64, z: f64) -> (f64, f64) {
        match self {
            Rotation::R0 => (x, z),
            Rotation::R90 => (z, -x),
            Rotation::R180 => (-x, -z),
            Rotation::R270 => (-z, x),
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;

    fn try_from(d: u16) -> Result<Self, String> {
        Rotation::ALL.into_iter().find(|r| r.degrees() == d).ok_or_else(|| format!("rotation must be 0, 90, 180 or 270, not {d}"))
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

impl FromStr for Rotation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let d: u16 = s.trim().parse().map_err(|_| format!("invalid rotation {s:?}"))?;
        Rotation::try_from(d)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

/// Corner of a pixel-frame bounding box (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RectCorner {
    #[default]
    TopLeft,
    TopRight,
    BottomRight,
    BottomLeft,
}

impl RectCorner {
    fn pick(self, min: Point2, max: Point2) -> Point2 {
        match self {
            RectCorner::TopLeft => min,
            RectCorner::TopRight => Point2::new(max.x, min.y),
            RectCorner::BottomRight => max,
            RectCorner::BottomLeft => Point2::new(min.x, max.y),
        }
    }
}

impl FromStr for RectCorner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "top-left" => Ok(RectCorner::TopLeft),
            "top-right" => Ok(RectCorner::TopRight),
            "bottom-right" => Ok(RectCorner::BottomRight),
            "bottom-left" => Ok(RectCorner::BottomLeft),
            _ => Err(format!("unknown corner {s:?}")),
        }
    }
}

impl fmt::Display for RectCorner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RectCorner::TopLeft => "top-left",
            RectCorner::TopRight => "top-right",
            RectCorner::BottomRight => "bottom-right",
            RectCorner::BottomLeft => "bottom-left",
        })
    }
}

/// Rectified mesh (X, Z) to floor-plan pixels:
/// `p = (scale_x·x', scale_z·z') + offset` where `(x', z') = rotation(X, Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationTransform {
    pub rotation: Rotation,
    /// Pixels per metre along pixel x.
    pub scale_x: f64,
    /// Pixels per metre along pixel y.
    pub scale_z: f64,
    pub offset: Point2,
    pub mesh_rect: GroundRect,
    /// Relative aspect-ratio mismatch between the rotated mesh rectangle and
    /// the room, `exp|ln ar_mesh − ln ar_room| − 1`.
    pub aspect_error: f64,
}

/// Above this aspect error a registration is suspect.
pub const ASPECT_WARNING: f64 = 0.25;

impl RegistrationTransform {
    pub fn apply_xz(&self, x: f64, z: f64) -> Point2 {
        let (x, z) = self.rotation.apply(x, z);
        Point2::new(self.scale_x * x + self.offset.x, self.scale_z * z + self.offset.y)
    }

    pub fn aspect_mismatch(&self) -> bool {
        self.aspect_error > ASPECT_WARNING
    }
}

fn rotated_extent(rect: &GroundRect, rot: Rotation) -> (Point2, Point2) {
    let pts: Vec<Point2> = rect
        .corners()
        .iter()
        .map(|c| {
            let (x, z) = rot.apply(c.x, c.y);
            Point2::new(x, z)
        })
        .collect();
    bounds(&pts).expect("four corners")
}

fn aspect_error(rect: &GroundRect, rot: Rotation, room: (Point2, Point2)) -> f64 {
    let (w, d) = if rot.swaps_axes() { (rect.depth(), rect.width()) } else { (rect.width(), rect.depth()) };
    let (rw, rh) = (room.1.x - room.0.x, room.1.y - room.0.y);
    ((w / d).ln() - (rw / rh).ln()).abs().exp_m1()
}

/// Rotation with the best aspect match, and whether the choice is a tie
/// between a quarter turn and no turn.
pub fn suggest_rotation(rect: &GroundRect, polygon: &[Point2]) -> Option<(Rotation, f64, bool)> {
    let room = bounds(polygon)?;
    let e0 = aspect_error(rect, Rotation::R0, room);
    let e90 = aspect_error(rect, Rotation::R90, room);
    let ambiguous = (e0 - e90).abs() <= 1e-9;
    Some(if e90 < e0 && !ambiguous { (Rotation::R90, e90, false) } else { (Rotation::R0, e0, ambiguous) })
}

/// Maps the rectified mesh rectangle onto the bounding rectangle of the
/// space polygon. Without `rotation` the call fails with a suggestion,
/// since the orientation has to be confirmed by a person.
pub fn register_to_space(
    rect: &GroundRect,
    polygon: &[Point2],
    rotation: Option<Rotation>,
    corner: RectCorner,
) -> Result<RegistrationTransform, MeshError> {
    let room = bounds(polygon).ok_or_else(|| MeshError::InvalidParams("space polygon is empty".into()))?;
    if !(rect.width() > 0.0 && rect.depth() > 0.0) || !(room.1.x > room.0.x && room.1.y > room.0.y) {
        return Err(MeshError::InvalidParams("mesh rectangle and space must have positive extent".into()));
    }
    let Some(rotation) = rotation else {
        let (suggestion, ratio_error, ambiguous) = suggest_rotation(rect, polygon).expect("nonempty polygon");
        return Err(MeshError::RotationRequired { suggestion, ratio_error, ambiguous });
    };
    let target = corner.pick(room.0, room.1);
    if !polygon.iter().any(|p| p.dist(target) <= 1e-9) {
        return Err(MeshError::MissingCorrespondence(corner));
    }
    let (lo, hi) = rotated_extent(rect, rotation);
    let scale_x = (room.1.x - room.0.x) / (hi.x - lo.x);
    let scale_z = (room.1.y - room.0.y) / (hi.y - lo.y);
    let source = corner.pick(lo, hi);
    let offset = Point2::new(target.x - scale_x * source.x, target.y - scale_z * source.y);
    Ok(RegistrationTransform {
        rotation,
        scale_x,
        scale_z,
        offset,
        mesh_rect: *rect,
        aspect_error: aspect_error(rect, rotation, room),
    })
}
