//! Clockwise ring ordering and adjacent wall candidates.

use super::{CornerId, TraceError};
use crate::geom::{signed_area, Point2};

/// Orders corners clockwise on screen (y grows downward) by their angle about
/// the centroid, then rotates the ring so it starts at the smallest id.
///
/// Correct for rings that are star-shaped about their vertex centroid; other
/// shapes should be subdivided or given an explicit order.
pub fn sort_clockwise(corners: &[(CornerId, Point2)]) -> Result<Vec<CornerId>, TraceError> {
    if corners.len() < 3 {
        return Err(TraceError::TooFewCorners { count: corners.len() });
    }
    let n = corners.len() as f64;
    let cx = corners.iter().map(|c| c.1.x).sum::<f64>() / n;
    let cy = corners.iter().map(|c| c.1.y).sum::<f64>() / n;
    let centroid = Point2::new(cx, cy);

    let mut keyed: Vec<(f64, f64, CornerId, Point2)> = corners
        .iter()
        .map(|&(id, p)| {
            let d = p - centroid;
            (d.y.atan2(d.x), d.norm(), id, p)
        })
        .collect();
    // atan2 with y down increases clockwise on screen.
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let ring: Vec<Point2> = keyed.iter().map(|k| k.3).collect();
    let (lo, hi) = crate::geom::bounds(&ring).expect("nonempty");
    let scale = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
    if signed_area(&ring).abs() <= 1e-12 * scale * scale {
        return Err(TraceError::DegenerateRing);
    }

    let ids: Vec<CornerId> = keyed.iter().map(|k| k.2).collect();
    Ok(rotate_to_min(&ids))
}

/// Rotates a ring so that its smallest element comes first.
pub fn rotate_to_min(ring: &[CornerId]) -> Vec<CornerId> {
    let Some(start) = ring
        .iter()
        .enumerate()
        .min_by_key(|(_, id)| **id)
        .map(|(i, _)| i)
    else {
        return Vec::new();
    };
    ring[start..].iter().chain(&ring[..start]).copied().collect()
}

/// All adjacent pairs of a ring, closing back to the first element.
pub fn candidate_walls(ring: &[CornerId]) -> Vec<(CornerId, CornerId)> {
    let n = ring.len();
    (0..n).map(|i| (ring[i], ring[(i + 1) % n])).collect()
}
