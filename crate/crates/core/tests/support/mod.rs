//! Brute-force reference implementations shared by test targets.

use std::collections::BTreeSet;

use planmap_core::mesh::TriangleMesh;

/// Straightforward reading of the merge predicate: adjacency by shared vertex
/// pairs, explicit member lists, edges sorted by (weight, a, b).
pub fn oracle_segmentation(mesh: &TriangleMesh, k: f64, min_size: usize) -> Vec<u32> {
    let n = mesh.faces.len();
    let normal = |f: usize| {
        let [a, b, c] = mesh.faces[f].map(|i| mesh.vertices[i as usize]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let l = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        [x[0] / l, x[1] / l, x[2] / l]
    };
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let sa: BTreeSet<u32> = mesh.faces[a].into_iter().collect();
            let shared = mesh.faces[b].iter().filter(|v| sa.contains(v)).count();
            if shared >= 2 {
                let (na, nb) = (normal(a), normal(b));
                let w = (1.0 - (na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2])).max(0.0);
                edges.push((w, a, b));
            }
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut comp: Vec<usize> = (0..n).collect();
    let mut internal = vec![0.0f64; n];
    let members = |comp: &[usize], c: usize| comp.iter().filter(|&&x| x == c).count();
    let merge = |comp: &mut Vec<usize>, from: usize, into: usize| {
        for x in comp.iter_mut() {
            if *x == from {
                *x = into;
            }
        }
    };
    for &(w, a, b) in &edges {
        let (ca, cb) = (comp[a], comp[b]);
        if ca == cb {
            continue;
        }
        let ta = internal[ca] + k / members(&comp, ca) as f64;
        let tb = internal[cb] + k / members(&comp, cb) as f64;
        if w <= ta.min(tb) {
            merge(&mut comp, cb, ca);
            internal[ca] = w;
        }
    }
    for &(_, a, b) in &edges {
        let (ca, cb) = (comp[a], comp[b]);
        if ca != cb && (members(&comp, ca) < min_size || members(&comp, cb) < min_size) {
            merge(&mut comp, cb, ca);
        }
    }
    let mut seen = Vec::new();
    comp.iter()
        .map(|c| match seen.iter().position(|s| s == c) {
            Some(i) => i as u32,
            None => {
                seen.push(*c);
                seen.len() as u32 - 1
            }
        })
        .collect()
}
