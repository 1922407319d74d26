//! Floor-plan tracing.
//!
//! The tracer is a grid of horizontal, vertical and (ghost) oblique lines.
//! Their intersections become numbered corners; spaces are clockwise rings
//! of corners with per-edge wall flags and entrances. All edits go through
//! [`TraceOp`]s so that replaying a script always rebuilds the same model.

mod model;
mod ops;
mod order;

pub use model::{
    validate_name, Corner, CornerId, Entrance, EntranceCorner, EntranceCornerId, EntranceRequest,
    FloorModel, GridLine, LineGeometry, LineId, LineKind, Space, SpaceType, CORNER_MATCH_PX,
    SNAP_TOLERANCE_PX,
};
pub use ops::{parse_script, write_script, OpOutcome, ScriptError, SpaceDraft, TraceOp, TraceSession};
pub use order::{candidate_walls, rotate_to_min, sort_clockwise};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("a line of the same kind already exists within snap tolerance (line {existing})")]
    DuplicateLine { existing: LineId },
    #[error("line lies outside the image")]
    OutOfBounds,
    #[error("no line within snap tolerance of ({x}, {y})")]
    NoLineNear { x: f64, y: f64 },
    #[error("line {line} defines corner #{corner} used by space {space}")]
    LineInUse { line: LineId, corner: CornerId, space: String },
    #[error("unknown corner #{0}")]
    UnknownCorner(CornerId),
    #[error("unknown entrance corner #{0}")]
    UnknownEntranceCorner(EntranceCornerId),
    #[error("unknown space {0}")]
    UnknownSpace(String),
    #[error("corners are collinear")]
    DegenerateRing,
    #[error("a space needs at least 3 corners, got {count}")]
    TooFewCorners { count: usize },
    #[error("corner #{0} appears twice in the ring")]
    DuplicateCorner(CornerId),
    #[error("corner #{0} already picked")]
    CornerAlreadyPicked(CornerId),
    #[error("ring of space {space} is not clockwise")]
    NotClockwise { space: String },
    #[error("space {space}: {corners} corners but {flags} wall flags")]
    FlagCountMismatch { space: String, corners: usize, flags: usize },
    #[error("edge index {index} out of range 1..={len}")]
    IndexOutOfRange { index: u32, len: usize },
    #[error("edge {edge} carries entrance {entrance}")]
    EntranceOnEdge { edge: u32, entrance: String },
    #[error("edge {edge} is not a wall")]
    NotAWall { edge: u32 },
    #[error("point ({x}, {y}) is not on wall {edge}")]
    PointOffWall { x: f64, y: f64, edge: u32 },
    #[error("entrance endpoints coincide")]
    ZeroWidthEntrance,
    #[error("invalid space name {0:?}: must be non-empty without whitespace or braces")]
    InvalidName(String),
    #[error("duplicate space id {0}")]
    DuplicateSpaceId(String),
    #[error("no space is being traced")]
    NoOpenSpace,
    #[error("a space is already being traced")]
    SpaceAlreadyOpen,
    #[error("invalid op: {0}")]
    InvalidOp(String),
}
