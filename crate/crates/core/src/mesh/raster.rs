use image::{ImageFormat, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use super::segment::segment_sizes;
use super::trimesh::TriangleMesh;
use super::MeshError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub id: u32,
    pub color: String,
    pub faces: usize,
}

/// Sidecar for the top-down raster. Pixel `(i, j)` covers
/// `X ∈ origin[0] + [i, i+1) / pixels_per_metre`, likewise Z for `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub width: u32,
    pub height: u32,
    pub pixels_per_metre: f64,
    pub origin: [f64; 2],
    pub labels: Vec<LegendEntry>,
}

impl Legend {
    pub fn label_for_color(&self, rgb: [u8; 3]) -> Option<u32> {
        let hex = hex_color(rgb);
        self.labels.iter().find(|e| e.color == hex).map(|e| e.id)
    }
}

/// Distinct colour per label: an odd multiplier permutes 24-bit values.
pub fn label_color(id: u32) -> [u8; 3] {
    let v = (id.wrapping_add(1)).wrapping_mul(0x9E_3779) & 0xFF_FFFF;
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

fn hex_color(c: [u8; 3]) -> String {
    format!("#{:02X}{:02X}{:02X}", c[0], c[1], c[2])
}

/// Renders the labels seen from above; the highest surface wins each pixel
/// and uncovered pixels stay transparent.
pub fn topdown_raster(mesh: &TriangleMesh, labels: &[u32], pixels_per_metre: f64) -> Result<(RgbaImage, Legend), MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    if labels.len() != mesh.faces.len() {
        return Err(MeshError::InvalidMesh("label count differs from face count".into()));
    }
    if !(pixels_per_metre > 0.0 && pixels_per_metre.is_finite()) {
        return Err(MeshError::InvalidParams("pixels_per_metre must be positive".into()));
    }
    let (lo, hi) = mesh.bounds().expect("nonempty mesh");
    let width = (((hi[0] - lo[0]) * pixels_per_metre).ceil() as u32).max(1);
    let height = (((hi[2] - lo[2]) * pixels_per_metre).ceil() as u32).max(1);
    if (width as u64) * (height as u64) > 64_000_000 {
        return Err(MeshError::InvalidParams(format!("raster of {width}×{height} pixels is too large")));
    }
    let mut depth = vec![f64::NEG_INFINITY; (width * height) as usize];
    let mut img = RgbaImage::new(width, height);
    let to_px = |v: [f64; 3]| ((v[0] - lo[0]) * pixels_per_metre, (v[2] - lo[2]) * pixels_per_metre, v[1]);

    for (f, tri) in mesh.faces.iter().enumerate() {
        let [a, b, c] = tri.map(|i| to_px(mesh.vertices[i as usize]));
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area.abs() < 1e-12 {
            continue; // edge-on from above
        }
        let i0 = a.0.min(b.0).min(c.0).floor().max(0.0) as u32;
        let i1 = (a.0.max(b.0).max(c.0).ceil() as u32).min(width);
        let j0 = a.1.min(b.1).min(c.1).floor().max(0.0) as u32;
        let j1 = (a.1.max(b.1).max(c.1).ceil() as u32).min(height);
        let [r, g, bl] = label_color(labels[f]);
        for j in j0..j1 {
            for i in i0..i1 {
                let (px, py) = (i as f64 + 0.5, j as f64 + 0.5);
                let w0 = ((b.0 - px) * (c.1 - py) - (b.1 - py) * (c.0 - px)) / area;
                let w1 = ((c.0 - px) * (a.1 - py) - (c.1 - py) * (a.0 - px)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let y = w0 * a.2 + w1 * b.2 + w2 * c.2;
                let k = (j * width + i) as usize;
                if y > depth[k] {
                    depth[k] = y;
                    img.put_pixel(i, j, Rgba([r, g, bl, 255]));
                }
            }
        }
    }
    let legend = Legend {
        width,
        height,
        pixels_per_metre,
        origin: [lo[0], lo[2]],
        labels: segment_sizes(labels)
            .into_iter()
            .enumerate()
            .filter(|(_, n)| *n > 0)
            .map(|(id, faces)| LegendEntry { id: id as u32, color: hex_color(label_color(id as u32)), faces })
            .collect(),
    };
    Ok((img, legend))
}

pub fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn colors_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for id in 0..100_000 {
            assert!(seen.insert(label_color(id)));
        }
    }

    #[test]
    fn top_face_wins() {
        // A 1 m floor at y = 0 and a raised half-size slab at y = 1.
        let floor = synthetic::plane(2);
        let mut slab = synthetic::plane(1);
        for v in &mut slab.vertices {
            *v = [v[0] * 0.5, 1.0, v[2] * 0.5];
        }
        let m = TriangleMesh::merge(&[floor, slab]);
        let labels: Vec<u32> = (0..m.faces.len()).map(|f| u32::from(f >= 8)).collect();
        let (img, legend) = topdown_raster(&m, &labels, 10.0).unwrap();
        assert_eq!((legend.width, legend.height), (10, 10));
        let at = |i, j| {
            let p = img.get_pixel(i, j).0;
            legend.label_for_color([p[0], p[1], p[2]])
        };
        assert_eq!(at(2, 2), Some(1));
        assert_eq!(at(8, 8), Some(0));
        assert_eq!(legend.labels.iter().map(|e| e.faces).collect::<Vec<_>>(), vec![8, 2]);
        let png = encode_png(&img);
        assert_eq!(&png[1..4], b"PNG");
    }
}
