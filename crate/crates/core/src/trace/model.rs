use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::order::candidate_walls;
use super::TraceError;
use crate::geom::{project_onto_segment, signed_area, Point2};

pub type LineId = u32;
pub type CornerId = u32;
pub type EntranceCornerId = u32;

/// Default snapping distance, in pixels, for duplicate lines and wall clicks.
pub const SNAP_TOLERANCE_PX: f64 = 2.0;

/// Recomputed intersections closer than this to an existing corner keep its id.
pub const CORNER_MATCH_PX: f64 = 0.5;

/// Distance under which a point is considered to lie on a line.
const ON_LINE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    Horizontal,
    Vertical,
    Oblique,
}

/// Placement of a grid line in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LineGeometry {
    /// `offset` is the y coordinate.
    Horizontal { offset: f64 },
    /// `offset` is the x coordinate.
    Vertical { offset: f64 },
    /// Line through `anchor` at `angle_deg` from the +x axis toward +y.
    Oblique { angle_deg: f64, anchor: Point2 },
}

impl LineGeometry {
    pub fn kind(&self) -> LineKind {
        match self {
            LineGeometry::Horizontal { .. } => LineKind::Horizontal,
            LineGeometry::Vertical { .. } => LineKind::Vertical,
            LineGeometry::Oblique { .. } => LineKind::Oblique,
        }
    }

    /// A point on the line and its unit direction.
    pub fn point_dir(&self) -> (Point2, Point2) {
        match *self {
            LineGeometry::Horizontal { offset } => (Point2::new(0.0, offset), Point2::new(1.0, 0.0)),
            LineGeometry::Vertical { offset } => (Point2::new(offset, 0.0), Point2::new(0.0, 1.0)),
            LineGeometry::Oblique { angle_deg, anchor } => {
                let a = angle_deg.to_radians();
                (anchor, Point2::new(a.cos(), a.sin()))
            }
        }
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        match *self {
            LineGeometry::Horizontal { offset } => (p.y - offset).abs(),
            LineGeometry::Vertical { offset } => (p.x - offset).abs(),
            LineGeometry::Oblique { .. } => {
                let (o, d) = self.point_dir();
                d.cross(p - o).abs()
            }
        }
    }

    pub fn intersect(&self, other: &LineGeometry) -> Option<Point2> {
        use LineGeometry::*;
        match (*self, *other) {
            (Horizontal { offset: y }, Vertical { offset: x })
            | (Vertical { offset: x }, Horizontal { offset: y }) => Some(Point2::new(x, y)),
            (Horizontal { .. }, Horizontal { .. }) | (Vertical { .. }, Vertical { .. }) => None,
            _ => {
                let (p1, d1) = self.point_dir();
                let (p2, d2) = other.point_dir();
                let denom = d1.cross(d2);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (p2 - p1).cross(d2) / denom;
                let mut p = p1 + d1.scale(t);
                // Keep axis-parallel partners exact.
                match *other {
                    Horizontal { offset } => p.y = offset,
                    Vertical { offset } => p.x = offset,
                    _ => {}
                }
                match *self {
                    Horizontal { offset } => p.y = offset,
                    Vertical { offset } => p.x = offset,
                    _ => {}
                }
                Some(p)
            }
        }
    }

    /// Same kind and within `tol` pixels of each other everywhere.
    fn duplicates(&self, other: &LineGeometry, tol: f64) -> bool {
        use LineGeometry::*;
        match (*self, *other) {
            (Horizontal { offset: a }, Horizontal { offset: b })
            | (Vertical { offset: a }, Vertical { offset: b }) => (a - b).abs() <= tol,
            (Oblique { anchor, .. }, Oblique { .. }) => {
                let (_, d1) = self.point_dir();
                let (_, d2) = other.point_dir();
                d1.cross(d2).abs() < 1e-9 && other.distance_to(anchor) <= tol
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLine {
    pub id: LineId,
    #[serde(flatten)]
    pub geometry: LineGeometry,
    /// A ghost line exists only to create intersections.
    pub ghost: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub id: CornerId,
    pub x: f64,
    pub y: f64,
    pub source: (LineId, LineId),
}

impl Corner {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntranceCorner {
    pub id: EntranceCornerId,
    pub x: f64,
    pub y: f64,
    /// `(space id, 1-based wall index)` of the wall carrying this endpoint.
    pub host_wall: (String, u32),
}

impl EntranceCorner {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceType {
    #[default]
    Room,
    Corridor,
    Restroom,
    Staircase,
    Elevator,
}

impl SpaceType {
    pub const ALL: [SpaceType; 5] = [
        SpaceType::Room,
        SpaceType::Corridor,
        SpaceType::Restroom,
        SpaceType::Staircase,
        SpaceType::Elevator,
    ];

    /// Numeric code used in sim records.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<SpaceType> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpaceType::Room => "room",
            SpaceType::Corridor => "corridor",
            SpaceType::Restroom => "restroom",
            SpaceType::Staircase => "staircase",
            SpaceType::Elevator => "elevator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entrance {
    pub id: String,
    /// 1-based index into the space's edge sequence.
    pub wall_index: u32,
    pub endpoints: (EntranceCornerId, EntranceCornerId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    pub id: String,
    pub space_type: SpaceType,
    pub name: String,
    /// Clockwise on screen.
    pub corners: Vec<CornerId>,
    /// `wall_flags[i]` covers the edge `corners[i] → corners[(i+1) % n]`.
    pub wall_flags: Vec<bool>,
    pub entrances: Vec<Entrance>,
}

impl Space {
    /// The edge with 1-based index `edge_index`.
    pub fn edge(&self, edge_index: u32) -> Option<(CornerId, CornerId)> {
        let n = self.corners.len();
        let i = (edge_index as usize).checked_sub(1)?;
        (i < n).then(|| (self.corners[i], self.corners[(i + 1) % n]))
    }

    pub fn edges(&self) -> Vec<(CornerId, CornerId)> {
        candidate_walls(&self.corners)
    }

    /// Sets or clears the wall on one edge. Clearing an edge that carries an
    /// entrance is rejected.
    pub fn set_wall(&mut self, edge_index: u32, present: bool) -> Result<(), TraceError> {
        let n = self.corners.len();
        if edge_index == 0 || edge_index as usize > n {
            return Err(TraceError::IndexOutOfRange { index: edge_index, len: n });
        }
        if !present {
            if let Some(e) = self.entrances.iter().find(|e| e.wall_index == edge_index) {
                return Err(TraceError::EntranceOnEdge {
                    edge: edge_index,
                    entrance: e.id.clone(),
                });
            }
        }
        self.wall_flags[edge_index as usize - 1] = present;
        Ok(())
    }
}

/// Entrance request before its endpoints are snapped and given ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntranceRequest {
    pub wall_index: u32,
    pub p1: Point2,
    pub p2: Point2,
}

/// A traced floor plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorModel {
    pub image_width: f64,
    pub image_height: f64,
    pub lines: Vec<GridLine>,
    pub corners: Vec<Corner>,
    pub entrance_corners: Vec<EntranceCorner>,
    pub spaces: Vec<Space>,
    /// Set when lines changed since the last corner computation.
    pub corners_stale: bool,
    pub(crate) next_line_id: LineId,
    pub(crate) next_corner_id: CornerId,
    pub(crate) next_entrance_id: u32,
    pub(crate) snap_tolerance: f64,
}

impl FloorModel {
    pub fn new(image_width: f64, image_height: f64) -> Self {
        Self {
            image_width,
            image_height,
            lines: Vec::new(),
            corners: Vec::new(),
            entrance_corners: Vec::new(),
            spaces: Vec::new(),
            corners_stale: false,
            next_line_id: 1,
            next_corner_id: 1,
            next_entrance_id: 1,
            snap_tolerance: SNAP_TOLERANCE_PX,
        }
    }

    pub fn with_snap_tolerance(mut self, tol: f64) -> Self {
        self.snap_tolerance = tol;
        self
    }

    pub fn snap_tolerance(&self) -> f64 {
        self.snap_tolerance
    }

    pub fn corner(&self, id: CornerId) -> Option<&Corner> {
        self.corners.iter().find(|c| c.id == id)
    }

    pub fn corner_point(&self, id: CornerId) -> Result<Point2, TraceError> {
        self.corner(id).map(Corner::point).ok_or(TraceError::UnknownCorner(id))
    }

    pub fn entrance_corner(&self, id: EntranceCornerId) -> Option<&EntranceCorner> {
        self.entrance_corners.iter().find(|c| c.id == id)
    }

    pub fn space(&self, id: &str) -> Option<&Space> {
        self.spaces.iter().find(|s| s.id == id)
    }

    pub fn line(&self, id: LineId) -> Option<&GridLine> {
        self.lines.iter().find(|l| l.id == id)
    }

    fn inside(&self, p: Point2) -> bool {
        let eps = 1e-9;
        p.x >= -eps && p.y >= -eps && p.x <= self.image_width + eps && p.y <= self.image_height + eps
    }

    /// Adds a grid line and marks the corner set stale.
    pub fn add_line(&mut self, geometry: LineGeometry, ghost: bool) -> Result<LineId, TraceError> {
        let in_bounds = match geometry {
            LineGeometry::Horizontal { offset } => (0.0..=self.image_height).contains(&offset),
            LineGeometry::Vertical { offset } => (0.0..=self.image_width).contains(&offset),
            LineGeometry::Oblique { angle_deg, anchor } => angle_deg.is_finite() && self.inside(anchor),
        };
        if !in_bounds {
            return Err(TraceError::OutOfBounds);
        }
        if let Some(existing) = self
            .lines
            .iter()
            .find(|l| l.geometry.duplicates(&geometry, self.snap_tolerance))
        {
            return Err(TraceError::DuplicateLine { existing: existing.id });
        }
        let id = self.next_line_id;
        self.next_line_id += 1;
        self.lines.push(GridLine { id, geometry, ghost });
        self.corners_stale = true;
        Ok(id)
    }

    /// Removes the line nearest to `at`, if one lies within snap tolerance.
    ///
    /// Fails if a finished space uses a corner that would no longer be an
    /// intersection of two remaining lines.
    pub fn remove_line(&mut self, at: Point2) -> Result<LineId, TraceError> {
        let (idx, dist) = self
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| (i, l.geometry.distance_to(at)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .ok_or(TraceError::NoLineNear { x: at.x, y: at.y })?;
        if dist > self.snap_tolerance {
            return Err(TraceError::NoLineNear { x: at.x, y: at.y });
        }
        let line = &self.lines[idx];
        for space in &self.spaces {
            for &cid in &space.corners {
                let Some(corner) = self.corner(cid) else { continue };
                let p = corner.point();
                if line.geometry.distance_to(p) > ON_LINE_EPS {
                    continue;
                }
                let others = self
                    .lines
                    .iter()
                    .filter(|l| l.id != line.id && l.geometry.distance_to(p) <= ON_LINE_EPS)
                    .count();
                if others < 2 {
                    return Err(TraceError::LineInUse {
                        line: line.id,
                        corner: cid,
                        space: space.id.clone(),
                    });
                }
            }
        }
        let removed = self.lines.remove(idx);
        self.corners_stale = true;
        Ok(removed.id)
    }

    /// Recomputes all pairwise intersections inside the image.
    ///
    /// Intersections matching an existing corner within
    /// [`CORNER_MATCH_PX`] keep its id; new ones get fresh ids in
    /// `(round(y), round(x))` order.
    pub fn compute_corners(&mut self) -> &[Corner] {
        let mut found: Vec<(Point2, (LineId, LineId))> = Vec::new();
        for (i, a) in self.lines.iter().enumerate() {
            for b in &self.lines[i + 1..] {
                let Some(p) = a.geometry.intersect(&b.geometry) else { continue };
                if !self.inside(p) {
                    continue;
                }
                if found.iter().any(|(q, _)| q.dist(p) <= CORNER_MATCH_PX) {
                    continue;
                }
                found.push((p, (a.id, b.id)));
            }
        }
        found.sort_by(|a, b| {
            a.0.y
                .round()
                .total_cmp(&b.0.y.round())
                .then(a.0.x.round().total_cmp(&b.0.x.round()))
                .then(a.0.y.total_cmp(&b.0.y))
                .then(a.0.x.total_cmp(&b.0.x))
                .then(a.1.cmp(&b.1))
        });

        let mut claimed: BTreeSet<CornerId> = BTreeSet::new();
        let mut corners = Vec::with_capacity(found.len());
        for (p, source) in found {
            let reuse = self
                .corners
                .iter()
                .filter(|c| !claimed.contains(&c.id))
                .map(|c| (c.id, c.point().dist(p)))
                .filter(|(_, d)| *d <= CORNER_MATCH_PX)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(id, _)| id);
            let id = match reuse {
                Some(id) => id,
                None => {
                    let id = self.next_corner_id;
                    self.next_corner_id += 1;
                    id
                }
            };
            claimed.insert(id);
            corners.push(Corner { id, x: p.x, y: p.y, source });
        }
        corners.sort_by_key(|c| c.id);
        self.corners = corners;
        self.corners_stale = false;
        &self.corners
    }

    /// Validates and appends a finished space, returning its id (`s1`, `s2`, …).
    ///
    /// `corners` must already be in clockwise order; entrance endpoints are
    /// snapped onto their wall.
    pub fn finalize_space(
        &mut self,
        corners: Vec<CornerId>,
        wall_flags: Vec<bool>,
        entrances: &[EntranceRequest],
        name: &str,
        space_type: SpaceType,
    ) -> Result<String, TraceError> {
        validate_name(name)?;
        let id = format!("s{}", self.spaces.len() + 1);
        if self.space(&id).is_some() {
            return Err(TraceError::DuplicateSpaceId(id));
        }
        let mut space = Space {
            id: id.clone(),
            space_type,
            name: name.to_string(),
            corners,
            wall_flags,
            entrances: Vec::new(),
        };
        self.validate_ring(&space)?;

        let mut snapped = Vec::with_capacity(entrances.len());
        for req in entrances {
            snapped.push(self.snap_entrance(&space, req)?);
        }
        let mut new_corners = Vec::new();
        let mut next_ec = self.next_entrance_corner_id();
        let mut next_e = self.next_entrance_id;
        for (req, (a, b)) in entrances.iter().zip(snapped) {
            let ids = (next_ec, next_ec + 1);
            next_ec += 2;
            for (cid, p) in [(ids.0, a), (ids.1, b)] {
                new_corners.push(EntranceCorner {
                    id: cid,
                    x: p.x,
                    y: p.y,
                    host_wall: (id.clone(), req.wall_index),
                });
            }
            space.entrances.push(Entrance {
                id: format!("e{next_e}"),
                wall_index: req.wall_index,
                endpoints: ids,
            });
            next_e += 1;
        }
        self.next_entrance_id = next_e;
        self.entrance_corners.extend(new_corners);
        self.spaces.push(space);
        Ok(id)
    }

    /// Adds an entrance to an already finished space.
    pub fn add_entrance(&mut self, space_id: &str, req: EntranceRequest) -> Result<Entrance, TraceError> {
        let idx = self
            .spaces
            .iter()
            .position(|s| s.id == space_id)
            .ok_or_else(|| TraceError::UnknownSpace(space_id.to_string()))?;
        let (a, b) = self.snap_entrance(&self.spaces[idx], &req)?;
        let first = self.next_entrance_corner_id();
        for (cid, p) in [(first, a), (first + 1, b)] {
            self.entrance_corners.push(EntranceCorner {
                id: cid,
                x: p.x,
                y: p.y,
                host_wall: (space_id.to_string(), req.wall_index),
            });
        }
        let entrance = Entrance {
            id: format!("e{}", self.next_entrance_id),
            wall_index: req.wall_index,
            endpoints: (first, first + 1),
        };
        self.next_entrance_id += 1;
        self.spaces[idx].entrances.push(entrance.clone());
        Ok(entrance)
    }

    /// Sets or clears a wall on a finished space.
    pub fn set_wall(&mut self, space_id: &str, edge_index: u32, present: bool) -> Result<(), TraceError> {
        self.spaces
            .iter_mut()
            .find(|s| s.id == space_id)
            .ok_or_else(|| TraceError::UnknownSpace(space_id.to_string()))?
            .set_wall(edge_index, present)
    }

    fn next_entrance_corner_id(&self) -> EntranceCornerId {
        self.entrance_corners.iter().map(|c| c.id).max().unwrap_or(0) + 1
    }

    /// Projects both clicks onto the wall and checks they are usable.
    pub(crate) fn snap_entrance(&self, space: &Space, req: &EntranceRequest) -> Result<(Point2, Point2), TraceError> {
        let (ca, cb) = space.edge(req.wall_index).ok_or(TraceError::IndexOutOfRange {
            index: req.wall_index,
            len: space.corners.len(),
        })?;
        if !space.wall_flags[req.wall_index as usize - 1] {
            return Err(TraceError::NotAWall { edge: req.wall_index });
        }
        let a = self.corner_point(ca)?;
        let b = self.corner_point(cb)?;
        let len = a.dist(b);
        let tol = self.snap_tolerance;
        let snap = |p: Point2| -> Result<Point2, TraceError> {
            let (t, foot) = project_onto_segment(a, b, p);
            let off = foot.dist(p);
            let slack = tol / len;
            if off > tol || t < -slack || t > 1.0 + slack {
                return Err(TraceError::PointOffWall { x: p.x, y: p.y, edge: req.wall_index });
            }
            Ok(a.lerp(b, t.clamp(0.0, 1.0)))
        };
        let p1 = snap(req.p1)?;
        let p2 = snap(req.p2)?;
        if p1.dist(p2) <= 1e-9 {
            return Err(TraceError::ZeroWidthEntrance);
        }
        Ok((p1, p2))
    }

    /// Ring-level invariants of a space: size, distinct known corners, flag
    /// count and clockwise orientation.
    pub(crate) fn validate_ring(&self, space: &Space) -> Result<(), TraceError> {
        let n = space.corners.len();
        if n < 3 {
            return Err(TraceError::TooFewCorners { count: n });
        }
        let mut seen = BTreeSet::new();
        for &c in &space.corners {
            if !seen.insert(c) {
                return Err(TraceError::DuplicateCorner(c));
            }
        }
        if space.wall_flags.len() != n {
            return Err(TraceError::FlagCountMismatch {
                space: space.id.clone(),
                corners: n,
                flags: space.wall_flags.len(),
            });
        }
        let pts = space
            .corners
            .iter()
            .map(|&c| self.corner_point(c))
            .collect::<Result<Vec<_>, _>>()?;
        if signed_area(&pts) <= 0.0 {
            return Err(TraceError::NotClockwise { space: space.id.clone() });
        }
        Ok(())
    }

    /// Checks every model invariant; used after parsing and before writing.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut ids = BTreeSet::new();
        for s in &self.spaces {
            if !ids.insert(s.id.as_str()) {
                return Err(TraceError::DuplicateSpaceId(s.id.clone()));
            }
            validate_name(&s.name)?;
            self.validate_ring(s)?;
            for e in &s.entrances {
                let (ca, cb) = s.edge(e.wall_index).ok_or(TraceError::IndexOutOfRange {
                    index: e.wall_index,
                    len: s.corners.len(),
                })?;
                if !s.wall_flags[e.wall_index as usize - 1] {
                    return Err(TraceError::NotAWall { edge: e.wall_index });
                }
                if e.endpoints.0 == e.endpoints.1 {
                    return Err(TraceError::ZeroWidthEntrance);
                }
                let a = self.corner_point(ca)?;
                let b = self.corner_point(cb)?;
                for ep in [e.endpoints.0, e.endpoints.1] {
                    let c = self
                        .entrance_corner(ep)
                        .ok_or(TraceError::UnknownEntranceCorner(ep))?;
                    let p = c.point();
                    let (t, foot) = project_onto_segment(a, b, p);
                    let slack = self.snap_tolerance / a.dist(b);
                    if foot.dist(p) > self.snap_tolerance || t < -slack || t > 1.0 + slack {
                        return Err(TraceError::PointOffWall { x: p.x, y: p.y, edge: e.wall_index });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Names end up space-delimited inside sim records.
pub fn validate_name(name: &str) -> Result<(), TraceError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == '{' || c == '}') {
        return Err(TraceError::InvalidName(name.to_string()));
    }
    Ok(())
}
