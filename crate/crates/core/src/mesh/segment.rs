use serde::{Deserialize, Serialize};

use super::trimesh::{dot, TriangleMesh};
use super::MeshError;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Scale of the threshold `k / |C|`, in weight units.
    pub k: f64,
    /// Components with fewer faces are merged into a neighbour.
    pub min_size: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams { k: 0.05, min_size: 50 }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(MeshError::InvalidParams(format!("k must be > 0, got {}", self.k)));
        }
        if self.min_size == 0 {
            return Err(MeshError::InvalidParams("min_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Dual-graph edge between two faces sharing a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceEdge {
    pub a: u32,
    pub b: u32,
    /// `1 − n_a · n_b`, clamped at 0.
    pub weight: f64,
}

/// Face adjacency in edge-index order: pairs `(a, b)` with `a < b`, sorted
/// and deduplicated.
pub fn face_adjacency(mesh: &TriangleMesh, exec: Execution) -> Vec<(u32, u32)> {
    let mut half: Vec<(u32, u32, u32)> = Vec::with_capacity(mesh.faces.len() * 3);
    for (f, tri) in mesh.faces.iter().enumerate() {
        for e in 0..3 {
            let (u, v) = (tri[e], tri[(e + 1) % 3]);
            half.push((u.min(v), u.max(v), f as u32));
        }
    }
    par::stable_sort_by(exec, &mut half, |x, y| x.cmp(y));
    let mut pairs = Vec::new();
    for group in half.chunk_by(|x, y| (x.0, x.1) == (y.0, y.1)) {
        for (i, x) in group.iter().enumerate() {
            for y in &group[i + 1..] {
                if x.2 != y.2 {
                    pairs.push((x.2.min(y.2), x.2.max(y.2)));
                }
            }
        }
    }
    par::stable_sort_by(exec, &mut pairs, |x, y| x.cmp(y));
    pairs.dedup();
    pairs
}

/// Weighted dual-graph edges in edge-index order.
pub fn face_edges(mesh: &TriangleMesh, exec: Execution) -> Vec<FaceEdge> {
    let normals = mesh.normals(exec);
    let pairs = face_adjacency(mesh, exec);
    par::map(exec, &pairs, |&(a, b)| FaceEdge {
        a,
        b,
        weight: (1.0 - dot(normals[a as usize], normals[b as usize])).max(0.0),
    })
}

struct Forest {
    parent: Vec<u32>,
    size: Vec<u32>,
    internal: Vec<f64>,
}

impl Forest {
    fn new(n: usize) -> Forest {
        Forest { parent: (0..n as u32).collect(), size: vec![1; n], internal: vec![0.0; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32, w: f64) {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.internal[big as usize] = w.max(self.internal[a as usize]).max(self.internal[b as usize]);
    }
}

/// Graph-based segmentation of the faces into near-planar patches.
///
/// Edges are visited by nondecreasing weight (ties in edge-index order) and
/// two components merge when `w ≤ min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)`.
/// Components smaller than `min_size` are then merged along the lightest
/// remaining edges. Labels are dense, numbered by smallest face index.
pub fn superpixelate(mesh: &TriangleMesh, params: &SegmentationParams, exec: Execution) -> Result<Vec<u32>, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    params.validate()?;
    let mut edges = face_edges(mesh, exec);
    par::stable_sort_by(exec, &mut edges, |x, y| x.weight.total_cmp(&y.weight));

    let mut forest = Forest::new(mesh.faces.len());
    for e in &edges {
        let (ra, rb) = (forest.find(e.a), forest.find(e.b));
        if ra == rb {
            continue;
        }
        let ta = forest.internal[ra as usize] + params.k / forest.size[ra as usize] as f64;
        let tb = forest.internal[rb as usize] + params.k / forest.size[rb as usize] as f64;
        if e.weight <= ta.min(tb) {
            forest.union(ra, rb, e.weight);
        }
    }
    for e in &edges {
        let (ra, rb) = (forest.find(e.a), forest.find(e.b));
        let small = |r: u32| (forest.size[r as usize] as usize) < params.min_size;
        if ra != rb && (small(ra) || small(rb)) {
            forest.union(ra, rb, e.weight);
        }
    }
    Ok(dense_labels(&mut forest, mesh.faces.len()))
}

fn dense_labels(forest: &mut Forest, n: usize) -> Vec<u32> {
    let mut label_of_root = vec![u32::MAX; n];
    let mut next = 0;
    (0..n as u32)
        .map(|f| {
            let r = forest.find(f) as usize;
            if label_of_root[r] == u32::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

pub fn segment_count(labels: &[u32]) -> usize {
    labels.iter().max().map_or(0, |&m| m as usize + 1)
}

/// Face count per label.
pub fn segment_sizes(labels: &[u32]) -> Vec<usize> {
    let mut sizes = vec![0; segment_count(labels)];
    for &l in labels {
        sizes[l as usize] += 1;
    }
    sizes
}

/// `face,label` rows with a header.
pub fn labels_csv(labels: &[u32]) -> String {
    let mut out = String::from("face,label\n");
    for (f, l) in labels.iter().enumerate() {
        out.push_str(&format!("{f},{l}\n"));
    }
    out
}

pub fn parse_labels_csv(text: &str) -> Result<Vec<u32>, MeshError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "face,label" => {}
        _ => return Err(MeshError::InvalidParams("label table must start with 'face,label'".into())),
    }
    let mut labels = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || MeshError::InvalidParams(format!("label table line {}: {line:?}", i + 1));
        let (f, l) = line.split_once(',').ok_or_else(bad)?;
        let f: usize = f.trim().parse().map_err(|_| bad())?;
        if f != labels.len() {
            return Err(bad());
        }
        labels.push(l.trim().parse().map_err(|_| bad())?);
    }
    Ok(labels)
}
