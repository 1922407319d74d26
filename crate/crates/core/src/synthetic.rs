//! Procedural meshes for tests, benches and demos.

use std::collections::HashMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mesh::{TriangleMesh, Vec3};

/// A rectangular grid of `nu × nv` cells spanned by `u` and `v` from
/// `origin`; triangle normals point along `u × v`.
pub fn grid(origin: Vec3, u: Vec3, v: Vec3, nu: usize, nv: usize) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    for j in 0..=nv {
        for i in 0..=nu {
            let (s, t) = (i as f64 / nu as f64, j as f64 / nv as f64);
            m.vertices.push([
                origin[0] + s * u[0] + t * v[0],
                origin[1] + s * u[1] + t * v[1],
                origin[2] + s * u[2] + t * v[2],
            ]);
        }
    }
    let w = nu as u32 + 1;
    for j in 0..nv as u32 {
        for i in 0..nu as u32 {
            let a = j * w + i;
            m.faces.push([a, a + 1, a + w + 1]);
            m.faces.push([a, a + w + 1, a + w]);
        }
    }
    m
}

fn cells(len: f64, step: f64) -> usize {
    ((len / step).round() as usize).max(1)
}

/// Merges vertices with identical coordinates.
pub fn weld(mesh: &TriangleMesh) -> TriangleMesh {
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = mesh
        .vertices
        .iter()
        .map(|v| {
            // +0.0 folds -0.0 into one key.
            let key = v.map(|c| (c + 0.0).to_bits());
            *index.entry(key).or_insert_with(|| {
                vertices.push(*v);
                vertices.len() as u32 - 1
            })
        })
        .collect();
    TriangleMesh {
        vertices,
        faces: mesh.faces.iter().map(|f| f.map(|v| remap[v as usize])).collect(),
        labels: mesh.labels.clone(),
    }
}

/// Open-bottomed box sides and top on a grid of roughly `step` metres,
/// welded, with outward normals.
pub fn box_shell(min: Vec3, max: Vec3, step: f64, bottom: bool) -> TriangleMesh {
    let [x0, y0, z0] = min;
    let [x1, y1, z1] = max;
    let (dx, dy, dz) = (x1 - x0, y1 - y0, z1 - z0);
    let (nx, ny, nz) = (cells(dx, step), cells(dy, step), cells(dz, step));
    let mut parts = vec![
        grid([x0, y1, z0], [0.0, 0.0, dz], [dx, 0.0, 0.0], nz, nx), // top, +Y
        grid([x0, y0, z0], [dx, 0.0, 0.0], [0.0, dy, 0.0], nx, ny), // near, -Z
        grid([x0, y0, z1], [0.0, dy, 0.0], [dx, 0.0, 0.0], ny, nx), // far, +Z
        grid([x0, y0, z0], [0.0, dy, 0.0], [0.0, 0.0, dz], ny, nz), // left, -X
        grid([x1, y0, z0], [0.0, 0.0, dz], [0.0, dy, 0.0], nz, ny), // right, +X
    ];
    if bottom {
        parts.push(grid([x0, y0, z0], [dx, 0.0, 0.0], [0.0, 0.0, dz], nx, nz));
    }
    weld(&TriangleMesh::merge(&parts))
}

/// Unit cube, 8 shared vertices and 12 outward triangles.
pub fn cube() -> TriangleMesh {
    let v = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh { vertices: v, faces, labels: None }
}

/// A flat `n × n` grid in the X–Z plane, 1 m across.
pub fn plane(n: usize) -> TriangleMesh {
    grid([0.0; 3], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], n, n)
}

/// Two `n × n` unit squares meeting at a right angle along the Z axis.
pub fn crease(n: usize) -> TriangleMesh {
    let floor = grid([0.0; 3], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], n, n);
    let wall = grid([0.0; 3], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], n, n);
    weld(&TriangleMesh::merge(&[floor, wall]))
}

/// A UV sphere.
pub fn sphere(rings: usize, segments: usize) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    for r in 0..=rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let th = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
            m.vertices.push([phi.sin() * th.cos(), phi.cos(), phi.sin() * th.sin()]);
        }
    }
    let w = segments as u32;
    for r in 0..rings as u32 {
        for s in 0..w {
            let a = r * w + s;
            let b = r * w + (s + 1) % w;
            m.faces.push([a, b, b + w]);
            m.faces.push([a, b + w, a + w]);
        }
    }
    m.clean().0
}

/// Geometry of the synthetic room scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    /// Extent along X, metres.
    pub width: f64,
    /// Extent along Z, metres.
    pub depth: f64,
    pub wall_height: f64,
    /// Facet grid spacing, metres.
    pub step: f64,
    /// Rotation about Y applied last, degrees.
    pub rotation_deg: f64,
    /// Shear of Z by X (z += tan(shear)·x), degrees; the walls of a scan
    /// then meet at 90° ± shear.
    pub shear_deg: f64,
    /// Vertex noise σ as a fraction of `step`.
    pub noise: f64,
    pub seed: u64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec {
            width: 5.0,
            depth: 8.0,
            wall_height: 2.5,
            step: 0.25,
            rotation_deg: 17.0,
            shear_deg: 2.0,
            noise: 0.01,
            seed: 0,
        }
    }
}

/// A scanned room plus the face ranges of each named part.
#[derive(Debug, Clone)]
pub struct SyntheticRoom {
    pub mesh: TriangleMesh,
    pub parts: Vec<(String, Range<usize>)>,
}

impl SyntheticRoom {
    pub fn part(&self, name: &str) -> Option<Range<usize>> {
        self.parts.iter().find(|(n, _)| n == name).map(|(_, r)| r.clone())
    }
}

/// Floor and four walls (no ceiling), a 1×1×0.75 m table, a tall cabinet
/// and a thin whiteboard on the right wall, centred on the origin before
/// the shear, rotation and noise of `spec`.
pub fn room(spec: &RoomSpec) -> SyntheticRoom {
    let (hx, hz, h, st) = (spec.width / 2.0, spec.depth / 2.0, spec.wall_height, spec.step);
    let (nx, nz, ny) = (cells(spec.width, st), cells(spec.depth, st), cells(h, st));
    let shell = weld(&TriangleMesh::merge(&[
        grid([-hx, 0.0, -hz], [0.0, 0.0, spec.depth], [spec.width, 0.0, 0.0], nz, nx),
        grid([-hx, 0.0, -hz], [0.0, 0.0, spec.depth], [0.0, h, 0.0], nz, ny),
        grid([hx, 0.0, -hz], [0.0, h, 0.0], [0.0, 0.0, spec.depth], ny, nz),
        grid([-hx, 0.0, -hz], [0.0, h, 0.0], [spec.width, 0.0, 0.0], ny, nx),
        grid([-hx, 0.0, hz], [spec.width, 0.0, 0.0], [0.0, h, 0.0], nx, ny),
    ]));
    let table = box_shell([0.3, 0.0, 0.5], [1.3, 0.75, 1.5], st, false);
    let cabinet = box_shell([-2.0, 0.0, -2.75], [-1.4, 1.75, -2.25], st, false);
    let board = box_shell([hx - 0.06, 1.0, 0.0], [hx - 0.04, 1.9, 1.25], st, true);

    let mut parts = Vec::new();
    let mut at = 0;
    for (name, m) in [("shell", &shell), ("table", &table), ("cabinet", &cabinet), ("whiteboard", &board)] {
        parts.push((name.to_string(), at..at + m.faces.len()));
        at += m.faces.len();
    }
    let mesh = TriangleMesh::merge(&[shell, table, cabinet, board]);

    let shear = spec.shear_deg.to_radians().tan();
    let (s, c) = spec.rotation_deg.to_radians().sin_cos();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, (spec.noise * st).max(0.0)).expect("finite sigma");
    let vertices = mesh
        .vertices
        .iter()
        .map(|&[x, y, z]| {
            let z = z + shear * x;
            let (x, z) = (x * c + z * s, -x * s + z * c);
            [x + normal.sample(&mut rng), y + normal.sample(&mut rng), z + normal.sample(&mut rng)]
        })
        .collect();
    SyntheticRoom { mesh: TriangleMesh { vertices, ..mesh }, parts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_counts() {
        let c = cube();
        assert_eq!((c.vertices.len(), c.faces.len()), (8, 12));
        assert_eq!(plane(2).faces.len(), 8);
        let cr = crease(1);
        assert_eq!((cr.vertices.len(), cr.faces.len()), (6, 4));
        let b = box_shell([0.0; 3], [1.0, 1.0, 1.0], 0.5, true);
        assert_eq!(b.faces.len(), 48);
        assert_eq!(b.vertices.len(), 26);
    }

    #[test]
    fn room_is_deterministic() {
        let spec = RoomSpec::default();
        let a = room(&spec);
        let b = room(&spec);
        assert_eq!(a.mesh, b.mesh);
        assert_eq!(a.part("table").unwrap().len(), 128);
        assert!(a.mesh.check().is_ok());
    }
}
