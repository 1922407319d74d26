use serde::{Deserialize, Serialize};

use super::trimesh::TriangleMesh;
use super::MeshError;
use crate::par::{self, Execution};

/// Faces with |n_y| below this count as wall-like.
pub const WALL_NORMAL_MAX_Y: f64 = 0.5;
pub const DEFAULT_BIN_WIDTH_DEG: f64 = 1.0;
pub const DOMINANCE_THRESHOLD: f64 = 0.2;

/// Area-weighted histogram of wall-normal azimuths modulo 90°.
///
/// The azimuth of a normal is `atan2(n_x, n_z)`, the angle to the Z axis.
/// Bin `i` is centred on `i · bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub bin_width_deg: f64,
    pub bins: Vec<f64>,
}

impl AngleHistogram {
    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn mode_bin(&self) -> Option<usize> {
        if self.total() <= 0.0 {
            return None;
        }
        // First maximum wins ties.
        let mut best = 0;
        for (i, &v) in self.bins.iter().enumerate() {
            if v > self.bins[best] {
                best = i;
            }
        }
        Some(best)
    }

    /// Share of the total mass in the mode bin.
    pub fn dominance(&self) -> f64 {
        self.mode_bin().map_or(0.0, |m| self.bins[m] / self.total())
    }

    /// Mode refined by a parabola through the mode bin and its circular
    /// neighbours, in [0, 90).
    pub fn refined_mode(&self) -> Option<f64> {
        let m = self.mode_bin()?;
        let n = self.bins.len();
        let (l, c, r) = (self.bins[(m + n - 1) % n], self.bins[m], self.bins[(m + 1) % n]);
        let denom = l - 2.0 * c + r;
        let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        Some(((m as f64 + offset) * self.bin_width_deg).rem_euclid(90.0))
    }
}

pub fn normal_histogram(mesh: &TriangleMesh, bin_width_deg: f64, exec: Execution) -> Result<AngleHistogram, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let nbins = (90.0 / bin_width_deg).round();
    if !(bin_width_deg > 0.0) || nbins < 1.0 || ((nbins * bin_width_deg) - 90.0).abs() > 1e-9 {
        return Err(MeshError::InvalidParams(format!("bin width {bin_width_deg} does not divide 90°")));
    }
    let nbins = nbins as usize;
    let contributions = par::map_range(exec, mesh.faces.len(), |f| {
        let c = mesh.face_cross(f);
        let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if len == 0.0 || (c[1] / len).abs() >= WALL_NORMAL_MAX_Y {
            return None;
        }
        let a = c[0].atan2(c[2]).to_degrees().rem_euclid(90.0);
        let bin = ((a + bin_width_deg / 2.0) / bin_width_deg).floor() as usize % nbins;
        Some((bin, 0.5 * len))
    });
    let mut bins = vec![0.0; nbins];
    for (bin, area) in contributions.into_iter().flatten() {
        bins[bin] += area;
    }
    Ok(AngleHistogram { bin_width_deg, bins })
}

/// Rotation about +Y by `deg`: x' = x cos θ + z sin θ, z' = −x sin θ + z cos θ.
pub fn rotate_y(mesh: &TriangleMesh, deg: f64, exec: Execution) -> TriangleMesh {
    let (s, c) = deg.to_radians().sin_cos();
    mesh.map_vertices(exec, |[x, y, z]| [x * c + z * s, y, -x * s + z * c])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reorientation {
    pub mesh: TriangleMesh,
    /// The input equals `rotate_y(mesh, theta_deg)`.
    pub theta_deg: f64,
    pub histogram: AngleHistogram,
}

/// Undoes the dominant wall azimuth, then turns a further ±90° if needed so
/// the longer horizontal extent lies along Z.
pub fn reorient(mesh: &TriangleMesh, exec: Execution) -> Result<Reorientation, MeshError> {
    let histogram = normal_histogram(mesh, DEFAULT_BIN_WIDTH_DEG, exec)?;
    let share = histogram.dominance();
    if share < DOMINANCE_THRESHOLD {
        return Err(MeshError::NoDominantOrientation { share });
    }
    let mut theta = histogram.refined_mode().expect("dominant bin exists");
    if theta >= 45.0 {
        theta -= 90.0;
    }
    let mut out = rotate_y(mesh, -theta, exec);
    let (lo, hi) = out.bounds().expect("nonempty mesh");
    if hi[0] - lo[0] > hi[2] - lo[2] {
        let turn = if theta >= 0.0 { -90.0 } else { 90.0 };
        theta += turn;
        out = rotate_y(mesh, -theta, exec);
    }
    Ok(Reorientation { mesh: out, theta_deg: theta, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn box_room_peaks_at_zero() {
        let m = synthetic::box_shell([0.0; 3], [2.0, 1.0, 3.0], 0.5, false);
        let h = normal_histogram(&m, 1.0, Execution::Sequential).unwrap();
        assert_eq!(h.bins.len(), 90);
        assert_eq!(h.mode_bin(), Some(0));
        assert!((h.total() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn floor_only_is_empty() {
        let h = normal_histogram(&synthetic::plane(4), 1.0, Execution::Sequential).unwrap();
        assert_eq!(h.total(), 0.0);
        assert!(matches!(
            reorient(&synthetic::plane(4), Execution::Sequential),
            Err(MeshError::NoDominantOrientation { .. })
        ));
    }

    #[test]
    fn rotated_box_recovers_angle() {
        let m = synthetic::box_shell([0.0; 3], [2.0, 1.0, 3.0], 0.5, false);
        for deg in [17.0, -30.0, 44.0, 60.5] {
            let r = rotate_y(&m, deg, Execution::Sequential);
            let h = normal_histogram(&r, 1.0, Execution::Sequential).unwrap();
            let expect = f64::rem_euclid(deg, 90.0);
            assert!((h.refined_mode().unwrap() - expect).abs() < 0.51, "{deg}");
        }
    }

    #[test]
    fn sphere_has_no_dominant_orientation() {
        let err = reorient(&synthetic::sphere(24, 48), Execution::Sequential).unwrap_err();
        assert!(matches!(err, MeshError::NoDominantOrientation { .. }));
    }

    #[test]
    fn long_side_ends_on_z() {
        // 3 m along X, 1.5 m along Z.
        let m = synthetic::box_shell([0.0; 3], [3.0, 1.0, 1.5], 0.5, false);
        let r = reorient(&rotate_y(&m, 10.0, Execution::Sequential), Execution::Sequential).unwrap();
        let (lo, hi) = r.mesh.bounds().unwrap();
        assert!(hi[2] - lo[2] > hi[0] - lo[0]);
        assert!((r.theta_deg - (10.0 - 90.0)).abs() < 1e-6, "{}", r.theta_deg);
    }
}
