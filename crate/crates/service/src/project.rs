use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use planmap_core::geojson::{populate, FeatureCollection, StyleConfig};
use planmap_core::georef::{georegister, GeoAnchor};
use planmap_core::mesh::{
    assign_objects, fit_wall_lines, load_ply, object_boxes, rectify, register_to_space, reorient, segment_count, superpixelate,
    Assignments, LoadReport, MeshError, ObjectBox, PlyOptions, RectCorner, Rectification, RegistrationTransform, Reorientation,
    Rotation, SegmentationParams, TriangleMesh, WallParams, WallQuad,
};
use planmap_core::par::Execution;
use planmap_core::pipeline::{self, RectifyReport, ReorientReport};
use planmap_core::sim::{parse_sim, write_sim};
use planmap_core::trace::{candidate_walls, OpOutcome, TraceOp, TraceSession};

use crate::ApiError;

/// One mesh-pipeline stage with its parameters, as logged in `stages.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "params", rename_all = "lowercase")]
pub enum StageRequest {
    Reorient,
    Fitwalls(WallParams),
    Rectify,
    Register {
        space: String,
        #[serde(default)]
        rotation: Option<Rotation>,
        #[serde(default)]
        corner: RectCorner,
    },
    Superpixel(SegmentationParams),
}

impl StageRequest {
    pub fn parse(name: &str, params: Value) -> Result<StageRequest, ApiError> {
        let params = if params.as_object().is_some_and(|o| o.is_empty()) && matches!(name, "reorient" | "rectify") {
            Value::Null
        } else {
            params
        };
        let tagged = if params.is_null() { json!({ "stage": name }) } else { json!({ "stage": name, "params": params }) };
        serde_json::from_value(tagged).map_err(|e| match name {
            "reorient" | "fitwalls" | "rectify" | "register" | "superpixel" => ApiError::bad_request(e.to_string()),
            _ => ApiError::not_found(&format!("stage {name:?}")),
        })
    }
}

/// Results of the mesh stages run so far; running a stage clears the later
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshStage {
    pub input: TriangleMesh,
    pub load_report: LoadReport,
    pub z_up: bool,
    pub reoriented: Option<Reorientation>,
    pub quad: Option<WallQuad>,
    pub rectified: Option<Rectification>,
    pub transform: Option<RegistrationTransform>,
    pub labels: Option<Vec<u32>>,
}

fn stage_missing(name: &str) -> ApiError {
    ApiError::conflict("StageNotRun", format!("stage {name} has not been run"))
}

impl MeshStage {
    pub fn load(bytes: &[u8], z_up: bool) -> Result<MeshStage, MeshError> {
        let (input, load_report) = load_ply(bytes, PlyOptions { z_up })?;
        Ok(MeshStage {
            input,
            load_report,
            z_up,
            reoriented: None,
            quad: None,
            rectified: None,
            transform: None,
            labels: None,
        })
    }

    fn completed(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.reoriented.is_some() {
            out.push("reorient");
        }
        if self.quad.is_some() {
            out.push("fitwalls");
        }
        if self.rectified.is_some() {
            out.push("rectify");
        }
        if self.transform.is_some() {
            out.push("register");
        }
        if self.labels.is_some() {
            out.push("superpixel");
        }
        out
    }
}

/// An immutable project snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub id: String,
    /// Number of accepted op batches.
    pub version: u64,
    pub width: f64,
    pub height: f64,
    pub has_image: bool,
    pub session: TraceSession,
    pub anchors: Option<Vec<GeoAnchor>>,
    pub style: StyleConfig,
    pub mesh: Option<Arc<MeshStage>>,
    pub assignments: Option<Assignments>,
    pub boxes: Option<Vec<ObjectBox>>,
}

impl Project {
    pub fn new(id: String, size: Option<(f64, f64)>) -> Project {
        let (width, height) = size.unwrap_or((0.0, 0.0));
        Project {
            id,
            version: 0,
            width,
            height,
            has_image: false,
            session: TraceSession::new(width, height),
            anchors: None,
            style: StyleConfig::default(),
            mesh: None,
            assignments: None,
            boxes: None,
        }
    }

    pub fn set_size(&mut self, width: f64, height: f64) -> Result<(), ApiError> {
        if self.version > 0 {
            return Err(ApiError::conflict("TracingStarted", "the image cannot change after ops were applied"));
        }
        self.width = width;
        self.height = height;
        self.session = TraceSession::new(width, height);
        Ok(())
    }

    /// All-or-nothing batch application.
    pub fn apply_ops(&mut self, base_version: u64, ops: &[TraceOp]) -> Result<Vec<OpOutcome>, ApiError> {
        if base_version != self.version {
            return Err(ApiError::version_conflict(self.version, base_version));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(ApiError::conflict("NoImage", "upload an image or create the project with a size first"));
        }
        let out = self.session.apply_batch(ops).map_err(|(i, e)| ApiError::op_failed(i, e))?;
        self.version += 1;
        Ok(out)
    }

    /// Replays a logged batch without the version check.
    pub fn replay_batch(&mut self, ops: &[TraceOp]) -> Result<(), ApiError> {
        self.session.apply_batch(ops).map_err(|(i, e)| ApiError::op_failed(i, e))?;
        self.version += 1;
        Ok(())
    }

    pub fn set_anchors(&mut self, anchors: Vec<GeoAnchor>) -> Result<f64, ApiError> {
        let model = parse_sim(write_sim(&self.session.model)?.as_bytes())?;
        let geo = georegister(&model, &anchors)?;
        self.anchors = Some(anchors);
        Ok(geo.rms_residual())
    }

    pub fn export_sim(&self) -> Result<String, ApiError> {
        Ok(write_sim(&self.session.model)?)
    }

    pub fn export_geojson(&self) -> Result<String, ApiError> {
        let anchors = self.anchors.as_ref().ok_or_else(|| ApiError::from(planmap_core::geojson::ExportError::UnregisteredModel))?;
        Ok(pipeline::export_geojson(&self.session.model, anchors, &self.style)?)
    }

    pub fn export_populated(&self) -> Result<String, ApiError> {
        let map = self.export_geojson()?;
        let boxes = self.boxes.as_ref().ok_or_else(|| ApiError::conflict("NoAssignments", "post object assignments first"))?;
        let mut fc = FeatureCollection::from_json(&map)?;
        populate(&mut fc, boxes, &self.style)?;
        let text = fc.to_json();
        FeatureCollection::from_json(&text)?;
        Ok(text)
    }

    fn mesh(&self) -> Result<&MeshStage, ApiError> {
        self.mesh.as_deref().ok_or_else(|| ApiError::conflict("NoMesh", "upload a mesh first"))
    }

    pub fn run_stage(&mut self, stage: &StageRequest) -> Result<(), ApiError> {
        let exec = Execution::default();
        let model = match stage {
            StageRequest::Register { .. } => Some(parse_sim(write_sim(&self.session.model)?.as_bytes())?),
            _ => None,
        };
        let m = Arc::make_mut(self.mesh.as_mut().ok_or_else(|| ApiError::conflict("NoMesh", "upload a mesh first"))?);
        match stage {
            StageRequest::Reorient => {
                m.reoriented = Some(reorient(&m.input, exec)?);
                m.quad = None;
                m.rectified = None;
                m.transform = None;
                m.labels = None;
            }
            StageRequest::Fitwalls(params) => {
                let r = m.reoriented.as_ref().ok_or_else(|| stage_missing("reorient"))?;
                m.quad = Some(fit_wall_lines(&r.mesh, params, exec)?);
                m.rectified = None;
                m.transform = None;
                m.labels = None;
            }
            StageRequest::Rectify => {
                let r = m.reoriented.as_ref().ok_or_else(|| stage_missing("reorient"))?;
                let q = m.quad.as_ref().ok_or_else(|| stage_missing("fitwalls"))?;
                m.rectified = Some(rectify(&r.mesh, q, exec)?);
                m.transform = None;
                m.labels = None;
            }
            StageRequest::Register { space, rotation, corner } => {
                let rect = m.rectified.as_ref().ok_or_else(|| stage_missing("rectify"))?.rect;
                let polygon = pipeline::space_polygon(model.as_ref().expect("parsed above"), space)?;
                m.transform = Some(register_to_space(&rect, &polygon, *rotation, *corner)?);
            }
            StageRequest::Superpixel(params) => {
                let r = m.rectified.as_ref().ok_or_else(|| stage_missing("rectify"))?;
                m.labels = Some(superpixelate(&r.mesh, params, exec)?);
            }
        }
        self.assignments = None;
        self.boxes = None;
        Ok(())
    }

    /// The rectified mesh and its super-pixel labels.
    pub fn segmented_mesh(&self) -> Result<(&TriangleMesh, &[u32]), ApiError> {
        let m = self.mesh()?;
        let r = m.rectified.as_ref().ok_or_else(|| stage_missing("rectify"))?;
        let labels = m.labels.as_deref().ok_or_else(|| stage_missing("superpixel"))?;
        Ok((&r.mesh, labels))
    }

    pub fn set_assignments(&mut self, a: Assignments) -> Result<(), ApiError> {
        let (mesh, labels) = self.segmented_mesh()?;
        let t = self.mesh()?.transform.ok_or_else(|| stage_missing("register"))?;
        let boxes = object_boxes(&assign_objects(mesh, labels, &a)?, &t)?;
        self.assignments = Some(a);
        self.boxes = Some(boxes);
        Ok(())
    }

    pub fn stage_artifact(&self, name: &str) -> Result<Value, ApiError> {
        let m = self.mesh()?;
        let value = match name {
            "reorient" => m.reoriented.as_ref().map(|r| json!(ReorientReport::from(r))),
            "fitwalls" => m.quad.as_ref().map(|q| json!(q)),
            "rectify" => m.rectified.as_ref().map(|r| json!(RectifyReport::from(r))),
            "register" => m.transform.as_ref().map(|t| json!(t)),
            "superpixel" => m.labels.as_ref().map(|l| json!({ "count": segment_count(l), "labels": l })),
            _ => return Err(ApiError::not_found(&format!("stage {name:?}"))),
        };
        value.ok_or_else(|| stage_missing(name))
    }

    /// Everything a tracing client needs to render the current view.
    pub fn state_json(&self) -> Value {
        let model = &self.session.model;
        let draft = self.session.draft.as_ref().map(|d| {
            let ring = d.ring(model).unwrap_or_default();
            json!({
                "picked": d.picked,
                "ring": ring,
                "candidate_walls": candidate_walls(&ring),
                "walls": d.walls,
                "entrances": d.entrances,
            })
        });
        let mesh = self.mesh.as_ref().map(|m| {
            json!({
                "vertices": m.input.vertices.len(),
                "faces": m.input.faces.len(),
                "z_up": m.z_up,
                "load_report": m.load_report,
                "stages": m.completed(),
            })
        });
        json!({
            "id": self.id,
            "version": self.version,
            "image": { "width": self.width, "height": self.height, "uploaded": self.has_image },
            "lines": model.lines,
            "corners": model.corners,
            "corners_stale": model.corners_stale,
            "entrance_corners": model.entrance_corners,
            "spaces": model.spaces,
            "draft": draft,
            "anchors": self.anchors,
            "style": self.style,
            "mesh": mesh,
            "assignments": self.assignments,
            "boxes": self.boxes,
        })
    }
}
