use serde::{Deserialize, Serialize};

use super::trimesh::TriangleMesh;
use super::walls::WallQuad;
use super::MeshError;
use crate::geom::Point2;
use crate::homography::{estimate_homography, Homography};
use crate::par::Execution;

/// Axis-parallel rectangle in the X–Z plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundRect {
    pub min_x: f64,
    pub min_z: f64,
    pub max_x: f64,
    pub max_z: f64,
}

impl GroundRect {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn depth(&self) -> f64 {
        self.max_z - self.min_z
    }

    /// Same order as [`WallQuad::corners`]: near-left, far-left, far-right,
    /// near-right.
    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.min_x, self.min_z),
            Point2::new(self.min_x, self.max_z),
            Point2::new(self.max_x, self.max_z),
            Point2::new(self.max_x, self.min_z),
        ]
    }

    /// Least-squares axis-parallel fit: each side is the mean of its two
    /// corner coordinates.
    pub fn fit(quad: &WallQuad) -> GroundRect {
        let [nl, fl, fr, nr] = quad.corners;
        GroundRect {
            min_x: 0.5 * (nl.x + fl.x),
            max_x: 0.5 * (nr.x + fr.x),
            min_z: 0.5 * (nl.y + nr.y),
            max_z: 0.5 * (fl.y + fr.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rectification {
    pub mesh: TriangleMesh,
    /// Maps quad (X, Z) to rectangle (X, Z).
    pub h: Homography,
    pub rect: GroundRect,
}

/// Warps every vertex's (X, Z) by the collineation taking the wall quad to
/// its best-fit rectangle. Y is untouched.
pub fn rectify(mesh: &TriangleMesh, quad: &WallQuad, exec: Execution) -> Result<Rectification, MeshError> {
    let rect = GroundRect::fit(quad);
    let pairs: Vec<(Point2, Point2)> = quad.corners.iter().copied().zip(rect.corners()).collect();
    let h = estimate_homography(&pairs)?;
    let mapped = crate::par::map(exec, &mesh.vertices, |v| h.apply(Point2::new(v[0], v[2])).map(|p| [p.x, v[1], p.y]));
    let vertices = mapped.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Rectification { mesh: TriangleMesh { vertices, ..mesh.clone() }, h, rect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::walls::Line2;

    fn quad(corners: [Point2; 4]) -> WallQuad {
        let l = Line2 { point: Point2::default(), dir: Point2::new(1.0, 0.0) };
        WallQuad { lines: [l; 4], corners, inliers: [0; 4] }
    }

    #[test]
    fn rectangle_is_fixed() {
        let r = GroundRect { min_x: -1.0, min_z: -2.0, max_x: 3.0, max_z: 5.0 };
        let m = crate::synthetic::cube();
        let out = rectify(&m, &quad(r.corners()), Execution::Sequential).unwrap();
        assert_eq!(out.rect, r);
        for (a, b) in out.h.to_array().iter().zip(Homography::IDENTITY.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in out.mesh.vertices.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn skewed_corners_land_on_rectangle() {
        let q = quad([
            Point2::new(0.1, 0.0),
            Point2::new(-0.1, 8.0),
            Point2::new(5.05, 8.2),
            Point2::new(4.95, -0.15),
        ]);
        let out = rectify(&crate::synthetic::cube(), &q, Execution::Sequential).unwrap();
        for (c, r) in q.corners.iter().zip(out.rect.corners()) {
            assert!(out.h.apply(*c).unwrap().dist(r) <= 1e-9);
        }
    }
}
