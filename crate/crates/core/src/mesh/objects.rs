use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::register::RegistrationTransform;
use super::segment::segment_count;
use super::trimesh::TriangleMesh;
use super::MeshError;
use crate::geom::Point2;

/// Footprint extents below this are widened, so thin objects such as a
/// whiteboard keep a nonzero area.
pub const MIN_EXTENT_M: f64 = 0.02;

/// A named cuboid standing on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectBox {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    /// Axis-aligned extent in the rectified mesh frame, metres.
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Footprint ring in floor-plan pixels.
    pub footprint: [Point2; 4],
    /// Top of the box above the floor, metres.
    pub height: f64,
    /// Lowest point of the sub-mesh, kept for wall-mounted objects.
    pub min_y: f64,
    pub superpixels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectAssignment {
    pub name: String,
    pub superpixels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

/// The assignments file: `[[object]]` tables.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignments {
    #[serde(default, rename = "object")]
    pub objects: Vec<ObjectAssignment>,
}

impl Assignments {
    pub fn from_toml(text: &str) -> Result<Assignments, MeshError> {
        toml::from_str(text).map_err(|e| MeshError::InvalidParams(format!("assignments: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("assignments serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubMesh {
    pub name: String,
    pub color: Option<String>,
    pub superpixels: Vec<u32>,
    /// Source face indices, ascending.
    pub faces: Vec<usize>,
    pub mesh: TriangleMesh,
}

/// Gathers the faces of each object's super-pixels.
pub fn assign_objects(mesh: &TriangleMesh, labels: &[u32], assignments: &Assignments) -> Result<Vec<SubMesh>, MeshError> {
    if labels.len() != mesh.faces.len() {
        return Err(MeshError::InvalidMesh("label count differs from face count".into()));
    }
    let count = segment_count(labels) as u32;
    let mut owner: BTreeMap<u32, &str> = BTreeMap::new();
    let mut names = BTreeMap::new();
    for obj in &assignments.objects {
        if names.insert(obj.name.as_str(), ()).is_some() {
            return Err(MeshError::InvalidParams(format!("object {:?} is assigned twice", obj.name)));
        }
        if obj.superpixels.is_empty() {
            return Err(MeshError::EmptyObject(obj.name.clone()));
        }
        for &id in &obj.superpixels {
            if id >= count {
                return Err(MeshError::UnknownSuperpixel { object: obj.name.clone(), id });
            }
            if let Some(first) = owner.insert(id, &obj.name) {
                if first != obj.name {
                    return Err(MeshError::OverlappingAssignment { id, first: first.into(), second: obj.name.clone() });
                }
            }
        }
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); count as usize];
    for (f, &l) in labels.iter().enumerate() {
        by_label[l as usize].push(f);
    }
    Ok(assignments
        .objects
        .iter()
        .map(|obj| {
            let mut faces: Vec<usize> = obj.superpixels.iter().flat_map(|&id| by_label[id as usize].iter().copied()).collect();
            faces.sort_unstable();
            faces.dedup();
            let mut superpixels = obj.superpixels.clone();
            superpixels.sort_unstable();
            superpixels.dedup();
            SubMesh {
                name: obj.name.clone(),
                color: obj.color.clone(),
                superpixels,
                mesh: mesh.submesh(&faces),
                faces,
            }
        })
        .collect())
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo >= MIN_EXTENT_M {
        (lo, hi)
    } else {
        let mid = 0.5 * (lo + hi);
        (mid - MIN_EXTENT_M / 2.0, mid + MIN_EXTENT_M / 2.0)
    }
}

/// Bounding box of one sub-mesh, its footprint mapped to floor-plan pixels.
pub fn object_box(sub: &SubMesh, transform: &RegistrationTransform) -> Result<ObjectBox, MeshError> {
    let degenerate = || MeshError::DegenerateBox(sub.name.clone());
    if sub.mesh.is_empty() {
        return Err(degenerate());
    }
    let (min, max) = sub.mesh.bounds().ok_or_else(degenerate)?;
    if !(max[1] > 0.0) {
        return Err(degenerate());
    }
    let (x0, x1) = widen(min[0], max[0]);
    let (z0, z1) = widen(min[2], max[2]);
    let footprint = [(x0, z0), (x1, z0), (x1, z1), (x0, z1)].map(|(x, z)| transform.apply_xz(x, z));
    Ok(ObjectBox {
        name: sub.name.clone(),
        color: sub.color.clone(),
        min: [x0, min[1], z0],
        max: [x1, max[1], z1],
        footprint,
        height: max[1],
        min_y: min[1],
        superpixels: sub.superpixels.clone(),
    })
}

pub fn object_boxes(subs: &[SubMesh], transform: &RegistrationTransform) -> Result<Vec<ObjectBox>, MeshError> {
    subs.iter().map(|s| object_box(s, transform)).collect()
}
