use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trimesh::TriangleMesh;
use super::MeshError;
use crate::geom::{is_convex, Point2};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Far,
    Right,
    Near,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Far, Side::Right, Side::Near];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Far => "far",
            Side::Right => "right",
            Side::Near => "near",
        })
    }
}

/// Axis-aligned region of the X–Z plane (x = X, y = Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point2,
    pub max: Point2,
}

impl Region {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// User-drawn regions that replace the automatic slab of a side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideHints {
    pub left: Option<Region>,
    pub far: Option<Region>,
    pub right: Option<Region>,
    pub near: Option<Region>,
}

impl SideHints {
    pub fn get(&self, side: Side) -> Option<Region> {
        match side {
            Side::Left => self.left,
            Side::Far => self.far,
            Side::Right => self.right,
            Side::Near => self.near,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WallParams {
    /// Share of vertices on the outer side of each slab boundary.
    pub slab_fraction: f64,
    /// Metres.
    pub inlier_threshold: f64,
    pub iterations: usize,
    pub seed: u64,
    pub min_points: usize,
    pub hints: SideHints,
}

impl Default for WallParams {
    fn default() -> Self {
        WallParams {
            slab_fraction: 0.1,
            inlier_threshold: 0.02,
            iterations: 500,
            seed: 0,
            min_points: 20,
            hints: SideHints::default(),
        }
    }
}

/// A line in the X–Z plane through `point` along the unit vector `dir`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2 {
    pub point: Point2,
    pub dir: Point2,
}

impl Line2 {
    pub fn through(a: Point2, b: Point2) -> Option<Line2> {
        let d = b - a;
        let n = d.norm();
        (n > 0.0).then(|| Line2 { point: a, dir: d.scale(1.0 / n) })
    }

    pub fn distance(&self, p: Point2) -> f64 {
        self.dir.cross(p - self.point).abs()
    }

    pub fn intersect(&self, o: &Line2) -> Option<Point2> {
        let den = self.dir.cross(o.dir);
        if den.abs() < 1e-12 {
            return None;
        }
        let t = (o.point - self.point).cross(o.dir) / den;
        Some(self.point + self.dir.scale(t))
    }

    /// Angle to the nearest coordinate axis, degrees in [0, 45].
    pub fn axis_deviation_deg(&self) -> f64 {
        let a = self.dir.y.atan2(self.dir.x).to_degrees().rem_euclid(90.0);
        a.min(90.0 - a)
    }

    /// Total least squares fit: through the centroid along the principal axis.
    pub fn fit(points: &[Point2]) -> Option<Line2> {
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let c = Point2::new(
            points.iter().map(|p| p.x).sum::<f64>() / n,
            points.iter().map(|p| p.y).sum::<f64>() / n,
        );
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in points {
            let d = *p - c;
            sxx += d.x * d.x;
            sxy += d.x * d.y;
            syy += d.y * d.y;
        }
        if sxx + syy == 0.0 {
            return None;
        }
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        Some(Line2 { point: c, dir: Point2::new(theta.cos(), theta.sin()) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallQuad {
    /// Indexed by [`Side::index`].
    pub lines: [Line2; 4],
    /// near-left, far-left, far-right, near-right.
    pub corners: [Point2; 4],
    pub inliers: [usize; 4],
}

impl WallQuad {
    pub fn line(&self, side: Side) -> Line2 {
        self.lines[side.index()]
    }

    /// Interior angles at the corners, degrees.
    pub fn angles_deg(&self) -> [f64; 4] {
        let c = &self.corners;
        std::array::from_fn(|i| {
            let a = c[(i + 3) % 4] - c[i];
            let b = c[(i + 1) % 4] - c[i];
            a.cross(b).abs().atan2(a.dot(b)).to_degrees()
        })
    }
}

pub(crate) fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    values[((values.len() - 1) as f64 * q).round() as usize]
}

fn candidates(points: &[Point2], side: Side, params: &WallParams) -> Vec<Point2> {
    if let Some(r) = params.hints.get(side) {
        return points.iter().copied().filter(|p| r.contains(*p)).collect();
    }
    let f = params.slab_fraction;
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut zs: Vec<f64> = points.iter().map(|p| p.y).collect();
    let keep: Box<dyn Fn(&Point2) -> bool> = match side {
        Side::Left => {
            let t = quantile(&mut xs, f);
            Box::new(move |p| p.x <= t)
        }
        Side::Right => {
            let t = quantile(&mut xs, 1.0 - f);
            Box::new(move |p| p.x >= t)
        }
        Side::Near => {
            let t = quantile(&mut zs, f);
            Box::new(move |p| p.y <= t)
        }
        Side::Far => {
            let t = quantile(&mut zs, 1.0 - f);
            Box::new(move |p| p.y >= t)
        }
    };
    points.iter().copied().filter(|p| keep(p)).collect()
}

/// RANSAC over two-point hypotheses, then a least-squares refit on the
/// inliers of the best one.
fn ransac_line(points: &[Point2], side: Side, params: &WallParams, exec: Execution) -> Result<(Line2, usize), MeshError> {
    let insufficient = |count| MeshError::InsufficientInliers { side, count };
    if points.len() < params.min_points.max(2) {
        return Err(insufficient(points.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(side.index() as u64));
    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..params.iterations)
        .map(|_| {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            (i, j)
        })
        .collect();
    let thr = params.inlier_threshold;
    let scores = par::map(exec, &pairs, |&(i, j)| {
        Line2::through(points[i], points[j]).map_or(0, |l| points.iter().filter(|p| l.distance(**p) <= thr).count())
    });
    let mut best = None;
    for (h, &s) in scores.iter().enumerate() {
        if s > 0 && best.is_none_or(|(_, bs)| s > bs) {
            best = Some((h, s));
        }
    }
    let (h, _) = best.ok_or_else(|| insufficient(0))?;
    let line = Line2::through(points[pairs[h].0], points[pairs[h].1]).expect("scored hypothesis is a line");
    let inliers: Vec<Point2> = points.iter().copied().filter(|p| line.distance(*p) <= thr).collect();
    if inliers.len() < params.min_points {
        return Err(insufficient(inliers.len()));
    }
    let refit = Line2::fit(&inliers).ok_or_else(|| insufficient(inliers.len()))?;
    Ok((refit, inliers.len()))
}

/// Fits one line per side to the (X, Z) projection of the vertices and
/// intersects adjacent lines.
pub fn fit_wall_lines(mesh: &TriangleMesh, params: &WallParams, exec: Execution) -> Result<WallQuad, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    if !(params.slab_fraction > 0.0 && params.slab_fraction < 0.5) || !(params.inlier_threshold > 0.0) || params.iterations == 0 {
        return Err(MeshError::InvalidParams("slab_fraction in (0, 0.5), inlier_threshold > 0 and iterations > 0 required".into()));
    }
    let points: Vec<Point2> = mesh.vertices.iter().map(|v| Point2::new(v[0], v[2])).collect();
    let mut lines = [Line2 { point: Point2::default(), dir: Point2::new(1.0, 0.0) }; 4];
    let mut inliers = [0; 4];
    for side in Side::ALL {
        let cand = candidates(&points, side, params);
        let (l, n) = ransac_line(&cand, side, params, exec)?;
        lines[side.index()] = l;
        inliers[side.index()] = n;
    }
    let meet = |a: Side, b: Side| {
        lines[a.index()]
            .intersect(&lines[b.index()])
            .ok_or_else(|| MeshError::NonConvexQuad(format!("{a} and {b} walls are parallel")))
    };
    let corners = [
        meet(Side::Near, Side::Left)?,
        meet(Side::Left, Side::Far)?,
        meet(Side::Far, Side::Right)?,
        meet(Side::Right, Side::Near)?,
    ];
    let quad = WallQuad { lines, corners, inliers };
    if !is_convex(&corners) {
        return Err(MeshError::NonConvexQuad("wall lines do not bound a convex quadrilateral".into()));
    }
    if let Some(a) = quad.angles_deg().iter().find(|a| !(60.0..=120.0).contains(*a)) {
        return Err(MeshError::NonConvexQuad(format!("corner angle {a:.1}° outside [60°, 120°]")));
    }
    Ok(quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn line_helpers() {
        let a = Line2::through(Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)).unwrap();
        let b = Line2::through(Point2::new(1.0, -1.0), Point2::new(1.0, 5.0)).unwrap();
        assert_eq!(a.intersect(&b), Some(Point2::new(1.0, 0.0)));
        assert_eq!(a.distance(Point2::new(7.0, -3.0)), 3.0);
        assert_eq!(b.axis_deviation_deg(), 0.0);
        let f = Line2::fit(&[Point2::new(0.0, 1.0), Point2::new(1.0, 2.0), Point2::new(2.0, 3.0)]).unwrap();
        assert!((f.axis_deviation_deg() - 45.0).abs() < 1e-12);
    }

    #[test]
    fn box_room_corners() {
        let m = synthetic::box_shell([-2.0, 0.0, -3.0], [2.0, 2.0, 3.0], 0.25, false);
        let q = fit_wall_lines(&m, &WallParams::default(), Execution::Sequential).unwrap();
        let expect = [(-2.0, -3.0), (-2.0, 3.0), (2.0, 3.0), (2.0, -3.0)];
        for (c, e) in q.corners.iter().zip(expect) {
            assert!(c.dist(Point2::from(e)) < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn too_few_points() {
        let m = synthetic::cube();
        let err = fit_wall_lines(&m, &WallParams::default(), Execution::Sequential).unwrap_err();
        assert!(matches!(err, MeshError::InsufficientInliers { side: Side::Left, .. }));
    }
}
