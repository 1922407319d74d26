use serde::{Deserialize, Serialize};

use super::MeshError;
use crate::par::{self, Execution};

pub type Vec3 = [f64; 3];

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Indexed triangle mesh, Y up, floor in the X–Z plane.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Optional per-face integer labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanReport {
    pub dropped_faces: usize,
    pub pruned_vertices: usize,
}

impl TriangleMesh {
    /// Checks index ranges and coordinate finiteness.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<TriangleMesh, MeshError> {
        let m = TriangleMesh { vertices, faces, labels: None };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), MeshError> {
        if let Some(i) = self.vertices.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(MeshError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let n = self.vertices.len() as u32;
        if let Some(i) = self.faces.iter().position(|f| f.iter().any(|&v| v >= n)) {
            return Err(MeshError::InvalidMesh(format!("face {i} indexes a missing vertex")));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.faces.len() {
                return Err(MeshError::InvalidMesh("label count differs from face count".into()));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    fn corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized normal (length = twice the area), right-handed winding.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * norm(self.face_cross(f))
    }

    /// Unit normal, or zero for a degenerate face.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_cross(f);
        let l = norm(n);
        if l > 0.0 {
            [n[0] / l, n[1] / l, n[2] / l]
        } else {
            [0.0; 3]
        }
    }

    pub fn normals(&self, exec: Execution) -> Vec<Vec3> {
        par::map_range(exec, self.faces.len(), |f| self.face_normal(f))
    }

    pub fn areas(&self, exec: Execution) -> Vec<f64> {
        par::map_range(exec, self.faces.len(), |f| self.face_area(f))
    }

    /// Axis-aligned bounds, `None` without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }

    /// Applies `f` to every vertex. Faces and labels are kept.
    pub fn map_vertices<F>(&self, exec: Execution, f: F) -> TriangleMesh
    where
        F: Fn(Vec3) -> Vec3 + Sync + Send,
    {
        TriangleMesh {
            vertices: par::map(exec, &self.vertices, |v| f(*v)),
            faces: self.faces.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Drops faces with repeated indices or (near) zero area, then prunes
    /// vertices no face references.
    pub fn clean(&self) -> (TriangleMesh, CleanReport) {
        let diag = self
            .bounds()
            .map(|(lo, hi)| norm(sub(hi, lo)))
            .unwrap_or(0.0);
        let min_area = 1e-12 * diag * diag;
        let keep: Vec<usize> = (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.faces[f];
                a != b && b != c && a != c && self.face_area(f) > min_area
            })
            .collect();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(keep.len());
        for &f in &keep {
            let mut out = [0u32; 3];
            for (k, &v) in self.faces[f].iter().enumerate() {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = vertices.len() as u32;
                    vertices.push(self.vertices[v as usize]);
                }
                out[k] = remap[v as usize];
            }
            faces.push(out);
        }
        let labels = self.labels.as_ref().map(|l| keep.iter().map(|&f| l[f]).collect());
        let report = CleanReport {
            dropped_faces: self.faces.len() - keep.len(),
            pruned_vertices: self.vertices.len() - vertices.len(),
        };
        (TriangleMesh { vertices, faces, labels }, report)
    }

    /// The faces `ids`, with their vertices compacted.
    pub fn submesh(&self, ids: &[usize]) -> TriangleMesh {
        let sub = TriangleMesh {
            vertices: self.vertices.clone(),
            faces: ids.iter().map(|&f| self.faces[f]).collect(),
            labels: self.labels.as_ref().map(|l| ids.iter().map(|&f| l[f]).collect()),
        };
        let mut remap = vec![u32::MAX; sub.vertices.len()];
        let mut vertices = Vec::new();
        let faces = sub
            .faces
            .iter()
            .map(|f| {
                f.map(|v| {
                    if remap[v as usize] == u32::MAX {
                        remap[v as usize] = vertices.len() as u32;
                        vertices.push(sub.vertices[v as usize]);
                    }
                    remap[v as usize]
                })
            })
            .collect();
        TriangleMesh { vertices, faces, labels: sub.labels }
    }

    /// Concatenates meshes, offsetting indices.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        for p in parts {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&p.vertices);
            out.faces.extend(p.faces.iter().map(|f| f.map(|v| v + base)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_drops_degenerate_faces_and_orphans() {
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [2.0, 0.0, 0.0], [9.0, 9.0, 9.0]],
            vec![[0, 1, 2], [0, 1, 3], [2, 2, 1]],
        )
        .unwrap();
        let (c, r) = m.clean();
        assert_eq!(r, CleanReport { dropped_faces: 2, pruned_vertices: 2 });
        assert_eq!(c.faces, vec![[0, 1, 2]]);
        assert_eq!(c.vertices.len(), 3);
    }

    #[test]
    fn normal_and_area() {
        let m = TriangleMesh::new(vec![[0.0, 0.0, 0.0], [0.0, 0.0, 2.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.face_normal(0), [0.0, 1.0, 0.0]);
        assert_eq!(m.face_area(0), 2.0);
    }

    #[test]
    fn out_of_range_index() {
        assert!(TriangleMesh::new(vec![[0.0; 3]], vec![[0, 0, 1]]).is_err());
    }
}
