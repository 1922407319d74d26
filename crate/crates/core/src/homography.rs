//! Planar collineations estimated by the normalized DLT.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{orient, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HomographyError {
    #[error("degenerate point configuration (collinear or coincident points)")]
    DegenerateConfiguration,
    #[error("point maps to infinity")]
    PointAtInfinity,
}

/// A 3×3 projective map, row-major, normalized so `m[2][2] == 1` whenever
/// that entry is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl From<[f64; 9]> for Homography {
    fn from(a: [f64; 9]) -> Self {
        Homography { m: [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]] }
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.to_array()
    }
}

impl Homography {
    pub const IDENTITY: Homography = Homography { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    pub fn to_array(&self) -> [f64; 9] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    fn from_matrix(m: &Matrix3<f64>) -> Homography {
        let mut h = Homography { m: [[0.0; 3]; 3] };
        for r in 0..3 {
            for c in 0..3 {
                h.m[r][c] = m[(r, c)];
            }
        }
        h.normalized()
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.m[r][c])
    }

    fn normalized(mut self) -> Homography {
        let s = self.m[2][2];
        if s != 0.0 {
            for row in &mut self.m {
                for v in row {
                    *v /= s;
                }
            }
        }
        self
    }

    pub fn translation(tx: f64, ty: f64) -> Homography {
        Homography { m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]] }
    }

    pub fn scaling(sx: f64, sy: f64) -> Homography {
        Homography { m: [[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, HomographyError> {
        let m = &self.m;
        let x = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
        let y = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        let scale = x.abs().max(y.abs()).max(1.0);
        if w.abs() <= 1e-14 * scale || !w.is_finite() {
            return Err(HomographyError::PointAtInfinity);
        }
        Ok(Point2::new(x / w, y / w))
    }

    pub fn inverse(&self) -> Result<Homography, HomographyError> {
        self.matrix()
            .try_inverse()
            .map(|m| Homography::from_matrix(&m))
            .ok_or(HomographyError::DegenerateConfiguration)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        Homography::from_matrix(&(self.matrix() * other.matrix()))
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn hartley(points: &[Point2]) -> Result<Matrix3<f64>, HomographyError> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Rejects sets where every point lies near one line, and for minimal sets
/// any collinear triple.
fn check_configuration(pts: &[Point2]) -> Result<(), HomographyError> {
    const EPS: f64 = 1e-9;
    if pts.len() == 4 {
        for skip in 0..4 {
            let t: Vec<Point2> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
            if orient(t[0], t[1], t[2]).abs() <= EPS {
                return Err(HomographyError::DegenerateConfiguration);
            }
        }
        return Ok(());
    }
    // Smallest eigenvalue of the (normalized) scatter matrix.
    let n = pts.len() as f64;
    let (sxx, syy, sxy) = pts.iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
        (a + p.x * p.x, b + p.y * p.y, c + p.x * p.y)
    });
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    if tr / 2.0 - disc <= EPS {
        return Err(HomographyError::DegenerateConfiguration);
    }
    Ok(())
}

/// Estimates `H` with `H·src ≈ dst` from at least 4 correspondences.
///
/// Both point sets are Hartley-normalized; the stacked 2n×9 system is solved
/// by SVD, taking the right singular vector of the smallest singular value.
pub fn estimate_homography(pairs: &[(Point2, Point2)]) -> Result<Homography, HomographyError> {
    if pairs.len() < 4 || pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let src: Vec<Point2> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point2> = pairs.iter().map(|p| p.1).collect();
    let ts = hartley(&src)?;
    let td = hartley(&dst)?;
    let src: Vec<Point2> = src.iter().map(|p| transform(&ts, *p)).collect();
    let dst: Vec<Point2> = dst.iter().map(|p| transform(&td, *p)).collect();
    check_configuration(&src)?;
    check_configuration(&dst)?;

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(HomographyError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, runner_up) = (order[0], order[1]);
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[runner_up] <= 1e-10 * largest {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    // Judge singularity in the normalized frames, where entries are O(1).
    if hn.determinant().abs() <= 1e-12 * hn.norm().powi(3) {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let td_inv = td.try_inverse().ok_or(HomographyError::DegenerateConfiguration)?;
    let full = td_inv * hn * ts;
    if !full.iter().all(|v| v.is_finite()) {
        return Err(HomographyError::DegenerateConfiguration);
    }
    Ok(Homography::from_matrix(&full))
}

/// Root-mean-square reprojection error of `h` over the pairs.
pub fn reprojection_rms(h: &Homography, pairs: &[(Point2, Point2)]) -> Result<f64, HomographyError> {
    let mut sum = 0.0;
    for (s, d) in pairs {
        sum += h.apply(*s)?.dist(*d).powi(2);
    }
    Ok((sum / pairs.len().max(1) as f64).sqrt())
}
