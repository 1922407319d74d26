use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{CornerId, EntranceRequest, FloorModel, LineGeometry, LineId, LineKind, Space, SpaceType};
use super::order::{candidate_walls, rotate_to_min, sort_clockwise};
use super::TraceError;
use crate::geom::Point2;

/// One tracing edit. Serialized as one JSON object per line, tagged by `op`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TraceOp {
    AddLine {
        kind: LineKind,
        /// y for horizontal lines, x for vertical ones.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<[f64; 2]>,
        #[serde(default)]
        ghost: bool,
    },
    RemoveLine {
        at: [f64; 2],
    },
    ComputeCorners,
    BeginSpace {
        /// Explicit clockwise ring, bypassing the angular sort.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<CornerId>>,
    },
    PickCorner {
        corner: CornerId,
    },
    SetWall {
        edge: u32,
        present: bool,
        /// Target a finished space instead of the open one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        space: Option<String>,
    },
    AddEntrance {
        wall: u32,
        p1: [f64; 2],
        p2: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        space: Option<String>,
    },
    FinalizeSpace {
        name: String,
        #[serde(rename = "type", default)]
        space_type: SpaceType,
    },
}

/// What an op did, for callers that echo progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum OpOutcome {
    LineAdded { line: LineId },
    LineRemoved { line: LineId },
    CornersComputed { count: usize },
    SpaceBegun,
    /// Current clockwise ring (empty until three corners are picked) and
    /// its candidate walls.
    CornerPicked { ring: Vec<CornerId>, walls: Vec<(CornerId, CornerId)> },
    WallSet,
    EntranceAdded,
    SpaceFinalized { space: String },
}

/// A space being traced. Walls and entrances are keyed by corner pair, so
/// they survive re-sorting when more corners are picked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceDraft {
    pub picked: Vec<CornerId>,
    pub explicit_order: bool,
    pub walls: BTreeSet<(CornerId, CornerId)>,
    pub entrances: Vec<((CornerId, CornerId), Point2, Point2)>,
}

fn pair_key(a: CornerId, b: CornerId) -> (CornerId, CornerId) {
    (a.min(b), a.max(b))
}

impl SpaceDraft {
    /// The current clockwise ring.
    pub fn ring(&self, model: &FloorModel) -> Result<Vec<CornerId>, TraceError> {
        if self.explicit_order {
            for &c in &self.picked {
                model.corner_point(c)?;
            }
            return Ok(rotate_to_min(&self.picked));
        }
        let pts = self
            .picked
            .iter()
            .map(|&c| model.corner_point(c).map(|p| (c, p)))
            .collect::<Result<Vec<_>, _>>()?;
        sort_clockwise(&pts)
    }

    /// Materializes the draft as ring, flags and entrance requests.
    fn resolve(&self, model: &FloorModel) -> Result<(Vec<CornerId>, Vec<bool>, Vec<EntranceRequest>), TraceError> {
        let ring = self.ring(model)?;
        let edges = candidate_walls(&ring);
        let flags: Vec<bool> = edges
            .iter()
            .map(|&(a, b)| self.walls.contains(&pair_key(a, b)))
            .collect();
        let mut reqs = Vec::with_capacity(self.entrances.len());
        for (key, p1, p2) in &self.entrances {
            let idx = edges
                .iter()
                .position(|&(a, b)| pair_key(a, b) == *key)
                .ok_or_else(|| {
                    TraceError::InvalidOp(format!(
                        "entrance wall #{}-#{} is no longer an edge of the ring",
                        key.0, key.1
                    ))
                })?;
            reqs.push(EntranceRequest { wall_index: idx as u32 + 1, p1: *p1, p2: *p2 });
        }
        Ok((ring, flags, reqs))
    }

    fn as_space(&self, model: &FloorModel) -> Result<Space, TraceError> {
        let (corners, wall_flags, _) = self.resolve(model)?;
        Ok(Space {
            id: "draft".into(),
            space_type: SpaceType::Room,
            name: "draft".into(),
            corners,
            wall_flags,
            entrances: Vec::new(),
        })
    }
}

/// A floor model plus the space currently being traced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSession {
    pub model: FloorModel,
    pub draft: Option<SpaceDraft>,
}

impl TraceSession {
    pub fn new(image_width: f64, image_height: f64) -> Self {
        Self { model: FloorModel::new(image_width, image_height), draft: None }
    }

    fn draft_mut(&mut self) -> Result<&mut SpaceDraft, TraceError> {
        self.draft.as_mut().ok_or(TraceError::NoOpenSpace)
    }

    /// Applies one op. On error the session is left unchanged.
    pub fn apply(&mut self, op: &TraceOp) -> Result<OpOutcome, TraceError> {
        match op {
            TraceOp::AddLine { kind, offset, angle_deg, anchor, ghost } => {
                let geometry = match (kind, offset, angle_deg, anchor) {
                    (LineKind::Horizontal, Some(o), None, None) => LineGeometry::Horizontal { offset: *o },
                    (LineKind::Vertical, Some(o), None, None) => LineGeometry::Vertical { offset: *o },
                    (LineKind::Oblique, None, Some(a), Some(p)) => LineGeometry::Oblique {
                        angle_deg: *a,
                        anchor: Point2::new(p[0], p[1]),
                    },
                    _ => {
                        return Err(TraceError::InvalidOp(
                            "horizontal/vertical lines take `offset`; oblique lines take `angle_deg` and `anchor`".into(),
                        ))
                    }
                };
                let line = self.model.add_line(geometry, *ghost)?;
                Ok(OpOutcome::LineAdded { line })
            }
            TraceOp::RemoveLine { at } => {
                let line = self.model.remove_line(Point2::new(at[0], at[1]))?;
                Ok(OpOutcome::LineRemoved { line })
            }
            TraceOp::ComputeCorners => {
                let count = self.model.compute_corners().len();
                Ok(OpOutcome::CornersComputed { count })
            }
            TraceOp::BeginSpace { order } => {
                if self.draft.is_some() {
                    return Err(TraceError::SpaceAlreadyOpen);
                }
                let mut draft = SpaceDraft::default();
                if let Some(order) = order {
                    let mut seen = BTreeSet::new();
                    for &c in order {
                        self.model.corner_point(c)?;
                        if !seen.insert(c) {
                            return Err(TraceError::DuplicateCorner(c));
                        }
                    }
                    draft.picked = order.clone();
                    draft.explicit_order = true;
                }
                self.draft = Some(draft);
                Ok(OpOutcome::SpaceBegun)
            }
            TraceOp::PickCorner { corner } => {
                self.model.corner_point(*corner)?;
                let model = &self.model;
                let draft = self.draft.as_mut().ok_or(TraceError::NoOpenSpace)?;
                if draft.explicit_order {
                    return Err(TraceError::InvalidOp("space was begun with an explicit order".into()));
                }
                if draft.picked.contains(corner) {
                    return Err(TraceError::CornerAlreadyPicked(*corner));
                }
                draft.picked.push(*corner);
                let ring = if draft.picked.len() >= 3 {
                    match draft.ring(model) {
                        Ok(r) => r,
                        Err(TraceError::DegenerateRing) => Vec::new(),
                        Err(e) => {
                            draft.picked.pop();
                            return Err(e);
                        }
                    }
                } else {
                    Vec::new()
                };
                let walls = if ring.is_empty() { Vec::new() } else { candidate_walls(&ring) };
                Ok(OpOutcome::CornerPicked { ring, walls })
            }
            TraceOp::SetWall { edge, present, space: Some(space) } => {
                self.model.set_wall(space, *edge, *present)?;
                Ok(OpOutcome::WallSet)
            }
            TraceOp::SetWall { edge, present, space: None } => {
                let model = &self.model;
                let draft = self.draft.as_ref().ok_or(TraceError::NoOpenSpace)?;
                let ring = draft.ring(model)?;
                let n = ring.len();
                if *edge == 0 || *edge as usize > n {
                    return Err(TraceError::IndexOutOfRange { index: *edge, len: n });
                }
                let (a, b) = candidate_walls(&ring)[*edge as usize - 1];
                let key = pair_key(a, b);
                if !present {
                    if let Some(k) = draft.entrances.iter().position(|e| e.0 == key) {
                        return Err(TraceError::EntranceOnEdge {
                            edge: *edge,
                            entrance: format!("pending entrance {}", k + 1),
                        });
                    }
                }
                let draft = self.draft_mut()?;
                if *present {
                    draft.walls.insert(key);
                } else {
                    draft.walls.remove(&key);
                }
                Ok(OpOutcome::WallSet)
            }
            TraceOp::AddEntrance { wall, p1, p2, space: Some(space) } => {
                let req = EntranceRequest {
                    wall_index: *wall,
                    p1: Point2::new(p1[0], p1[1]),
                    p2: Point2::new(p2[0], p2[1]),
                };
                self.model.add_entrance(space, req)?;
                Ok(OpOutcome::EntranceAdded)
            }
            TraceOp::AddEntrance { wall, p1, p2, space: None } => {
                let draft = self.draft.as_ref().ok_or(TraceError::NoOpenSpace)?;
                let space = draft.as_space(&self.model)?;
                let req = EntranceRequest {
                    wall_index: *wall,
                    p1: Point2::new(p1[0], p1[1]),
                    p2: Point2::new(p2[0], p2[1]),
                };
                self.model.snap_entrance(&space, &req)?;
                let (a, b) = space.edge(*wall).expect("checked by snap_entrance");
                let key = pair_key(a, b);
                self.draft_mut()?.entrances.push((key, req.p1, req.p2));
                Ok(OpOutcome::EntranceAdded)
            }
            TraceOp::FinalizeSpace { name, space_type } => {
                let draft = self.draft.as_ref().ok_or(TraceError::NoOpenSpace)?;
                let (ring, flags, reqs) = draft.resolve(&self.model)?;
                let space = self.model.finalize_space(ring, flags, &reqs, name, *space_type)?;
                self.draft = None;
                Ok(OpOutcome::SpaceFinalized { space })
            }
        }
    }

    /// Applies a whole batch, or nothing if any op fails. The error carries
    /// the index of the failing op.
    pub fn apply_batch(&mut self, ops: &[TraceOp]) -> Result<Vec<OpOutcome>, (usize, TraceError)> {
        let mut next = self.clone();
        let mut out = Vec::with_capacity(ops.len());
        for (i, op) in ops.iter().enumerate() {
            out.push(next.apply(op).map_err(|e| (i, e))?);
        }
        *self = next;
        Ok(out)
    }

    /// Replays a script from scratch. Returns the session and any warnings
    /// (for example a space that was begun but never finalized).
    pub fn replay(image_width: f64, image_height: f64, script: &str) -> Result<(Self, Vec<String>), ScriptError> {
        let ops = parse_script(script)?;
        let mut session = TraceSession::new(image_width, image_height);
        for (line, op) in &ops {
            session
                .apply(op)
                .map_err(|e| ScriptError { line: *line, message: e.to_string() })?;
        }
        let mut warnings = Vec::new();
        if let Some(d) = &session.draft {
            warnings.push(format!(
                "space with {} picked corner(s) was never finalized and is excluded",
                d.picked.len()
            ));
        }
        Ok((session, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Parses a newline-delimited op script. Blank lines and lines starting with
/// `#` are skipped. Line numbers are 1-based.
pub fn parse_script(text: &str) -> Result<Vec<(usize, TraceOp)>, ScriptError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let op: TraceOp = serde_json::from_str(line)
            .map_err(|e| ScriptError { line: i + 1, message: e.to_string() })?;
        ops.push((i + 1, op));
    }
    Ok(ops)
}

/// Serializes ops back to script form, one per line.
pub fn write_script(ops: &[TraceOp]) -> String {
    let mut out = String::new();
    for op in ops {
        out.push_str(&serde_json::to_string(op).expect("ops serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECT: &str = r#"
# two by two grid
{"op":"add_line","kind":"horizontal","offset":100}
{"op":"add_line","kind":"horizontal","offset":300}
{"op":"add_line","kind":"vertical","offset":100}
{"op":"add_line","kind":"vertical","offset":400}
{"op":"compute_corners"}
{"op":"begin_space"}
{"op":"pick_corner","corner":4}
{"op":"pick_corner","corner":1}
{"op":"pick_corner","corner":3}
{"op":"pick_corner","corner":2}
{"op":"set_wall","edge":1,"present":true}
{"op":"set_wall","edge":2,"present":true}
{"op":"set_wall","edge":3,"present":true}
{"op":"add_entrance","wall":1,"p1":[150,100.5],"p2":[200,99.5]}
{"op":"finalize_space","name":"217","type":"room"}
"#;

    #[test]
    fn replay_rectangle() {
        let (s, warnings) = TraceSession::replay(800.0, 600.0, RECT).unwrap();
        assert!(warnings.is_empty());
        let sp = &s.model.spaces[0];
        assert_eq!(sp.corners, vec![1, 2, 4, 3]);
        assert_eq!(sp.wall_flags, vec![true, true, true, false]);
        assert_eq!(sp.entrances[0].wall_index, 1);
        assert_eq!(s.model.entrance_corners[0].point(), Point2::new(150.0, 100.0));
    }

    #[test]
    fn replay_is_deterministic() {
        let a = TraceSession::replay(800.0, 600.0, RECT).unwrap();
        let b = TraceSession::replay(800.0, 600.0, RECT).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_finalize_warns() {
        let script = RECT.replace(r#"{"op":"finalize_space","name":"217","type":"room"}"#, "");
        let (s, warnings) = TraceSession::replay(800.0, 600.0, &script).unwrap();
        assert!(s.model.spaces.is_empty());
        assert!(s.model.entrance_corners.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let script = "{\"op\":\"compute_corners\"}\n\n{\"op\":\"pick_corner\",\"corner\":1}\n";
        let err = TraceSession::replay(800.0, 600.0, script).unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_script("{\"op\":\"nope\"}").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn walls_survive_resorting() {
        let mut s = TraceSession::replay(800.0, 600.0, RECT).unwrap().0;
        s.apply(&TraceOp::BeginSpace { order: None }).unwrap();
        for c in [1, 2, 4] {
            s.apply(&TraceOp::PickCorner { corner: c }).unwrap();
        }
        // ring (1,2,4): edge 1 is (1,2)
        s.apply(&TraceOp::SetWall { edge: 1, present: true, space: None }).unwrap();
        let out = s.apply(&TraceOp::PickCorner { corner: 3 }).unwrap();
        assert_eq!(
            out,
            OpOutcome::CornerPicked { ring: vec![1, 2, 4, 3], walls: vec![(1, 2), (2, 4), (4, 3), (3, 1)] }
        );
        s.apply(&TraceOp::FinalizeSpace { name: "x".into(), space_type: SpaceType::Corridor })
            .unwrap();
        assert_eq!(s.model.spaces[1].wall_flags, vec![true, false, false, false]);
    }

    #[test]
    fn batch_is_all_or_nothing() {
        let mut s = TraceSession::new(800.0, 600.0);
        let ops = vec![
            TraceOp::AddLine { kind: LineKind::Horizontal, offset: Some(10.0), angle_deg: None, anchor: None, ghost: false },
            TraceOp::AddLine { kind: LineKind::Horizontal, offset: Some(11.0), angle_deg: None, anchor: None, ghost: false },
        ];
        let before = s.clone();
        assert_eq!(s.apply_batch(&ops).unwrap_err().0, 1);
        assert_eq!(s, before);
    }

    #[test]
    fn script_roundtrip() {
        let ops: Vec<TraceOp> = parse_script(RECT).unwrap().into_iter().map(|(_, o)| o).collect();
        let text = write_script(&ops);
        let again: Vec<TraceOp> = parse_script(&text).unwrap().into_iter().map(|(_, o)| o).collect();
        assert_eq!(ops, again);
    }
}
