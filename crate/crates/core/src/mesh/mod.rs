//! Room-scan population: orient, rectify and register a scan against a
//! traced space, segment it into planar patches and box up named objects.

mod objects;
mod orient;
mod ply;
mod raster;
mod rectify;
mod register;
mod segment;
mod trimesh;
mod walls;

pub use objects::{
    assign_objects, object_box, object_boxes, Assignments, ObjectAssignment, ObjectBox, SubMesh, MIN_EXTENT_M,
};
pub use orient::{
    normal_histogram, reorient, rotate_y, AngleHistogram, Reorientation, DEFAULT_BIN_WIDTH_DEG, DOMINANCE_THRESHOLD,
    WALL_NORMAL_MAX_Y,
};
pub use ply::{load_ply, write_ply, LoadReport, PlyOptions};
pub use raster::{encode_png, label_color, topdown_raster, Legend, LegendEntry};
pub use rectify::{rectify, GroundRect, Rectification};
pub use register::{register_to_space, suggest_rotation, RectCorner, RegistrationTransform, Rotation, ASPECT_WARNING};
pub use segment::{
    face_adjacency, face_edges, labels_csv, parse_labels_csv, segment_count, segment_sizes, superpixelate, FaceEdge,
    SegmentationParams,
};
pub use trimesh::{CleanReport, TriangleMesh, Vec3};
pub use walls::{fit_wall_lines, Line2, Region, Side, SideHints, WallParams, WallQuad};

use thiserror::Error;

use crate::homography::HomographyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("unsupported PLY: {0}")]
    UnsupportedPly(String),
    #[error("malformed PLY: {message}")]
    MalformedPly { line: Option<usize>, message: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no dominant wall orientation (mode bin holds {:.0}% of wall area)", share * 100.0)]
    NoDominantOrientation { share: f64 },
    #[error("{side} wall: only {count} inlier points")]
    InsufficientInliers { side: Side, count: usize },
    #[error("wall quadrilateral rejected: {0}")]
    NonConvexQuad(String),
    #[error(transparent)]
    Homography(#[from] HomographyError),
    #[error("the {0} corner of the space's bounding box is not a polygon vertex")]
    MissingCorrespondence(RectCorner),
    #[error("rotation must be chosen explicitly (suggested {suggestion}°, aspect error {:.1}%{})", ratio_error * 100.0, if *ambiguous { ", ambiguous" } else { "" })]
    RotationRequired { suggestion: Rotation, ratio_error: f64, ambiguous: bool },
    #[error("object {object:?} references unknown super-pixel {id}")]
    UnknownSuperpixel { object: String, id: u32 },
    #[error("super-pixel {id} is claimed by both {first:?} and {second:?}")]
    OverlappingAssignment { id: u32, first: String, second: String },
    #[error("object {0:?} has no super-pixels")]
    EmptyObject(String),
    #[error("object {0:?} has a degenerate bounding box")]
    DegenerateBox(String),
}
