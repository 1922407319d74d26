//! PLY ingestion and export on top of `ply-rs-bw`.

use ply_rs_bw::parser::Parser;
use ply_rs_bw::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType,
};
use ply_rs_bw::writer::Writer;
use serde::{Deserialize, Serialize};

use super::trimesh::{CleanReport, TriangleMesh, Vec3};
use super::MeshError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlyOptions {
    /// The file is Z-up; swap into Y-up as (x, z, −y).
    pub z_up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub vertices: usize,
    pub faces: usize,
    pub clean: CleanReport,
    pub warnings: Vec<String>,
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<i64>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUChar(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListShort(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUShort(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListInt(v) => v.iter().map(|&i| i as i64).collect(),
        Property::ListUInt(v) => v.iter().map(|&i| i as i64).collect(),
        _ => return None,
    })
}

/// Reads an ASCII or binary little-endian PLY. Polygons are fan
/// triangulated; degenerate faces and unreferenced vertices are removed.
pub fn load_ply(bytes: &[u8], opts: PlyOptions) -> Result<(TriangleMesh, LoadReport), MeshError> {
    let parser = Parser::<DefaultElement>::new();
    let ply = parser.read_ply(&mut &bytes[..]).map_err(|e| MeshError::MalformedPly {
        line: e.line(),
        message: e.to_string(),
    })?;
    if ply.header.encoding == Encoding::BinaryBigEndian {
        return Err(MeshError::UnsupportedPly("binary big-endian encoding".into()));
    }
    let malformed = |message: String| MeshError::MalformedPly { line: None, message };

    let raw_vertices = ply.payload.get("vertex").map(Vec::as_slice).unwrap_or_default();
    let mut vertices: Vec<Vec3> = Vec::with_capacity(raw_vertices.len());
    for (i, v) in raw_vertices.iter().enumerate() {
        let c = |k: &str| {
            v.get(k)
                .and_then(scalar)
                .ok_or_else(|| MeshError::UnsupportedPly(format!("vertex {i} has no numeric {k}")))
        };
        let (x, y, z) = (c("x")?, c("y")?, c("z")?);
        vertices.push(if opts.z_up { [x, z, -y] } else { [x, y, z] });
    }

    let raw_faces = ply.payload.get("face").map(Vec::as_slice).unwrap_or_default();
    let mut faces = Vec::with_capacity(raw_faces.len());
    let mut labels = Vec::new();
    let mut any_label = false;
    let mut warnings = Vec::new();
    let n = vertices.len() as i64;
    for (i, f) in raw_faces.iter().enumerate() {
        let idx = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| MeshError::UnsupportedPly(format!("face {i} has no vertex index list")))?;
        if let Some(bad) = idx.iter().find(|&&k| k < 0 || k >= n) {
            return Err(malformed(format!("face {i} references vertex {bad} of {n}")));
        }
        if idx.len() < 3 {
            warnings.push(format!("face {i} has {} vertices, skipped", idx.len()));
            continue;
        }
        let label = f.get("label").and_then(scalar);
        any_label |= label.is_some();
        for k in 1..idx.len() - 1 {
            faces.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
            labels.push(label.map_or(0, |l| l as u32));
        }
    }

    let mesh = TriangleMesh { vertices, faces, labels: any_label.then_some(labels) };
    mesh.check()?;
    let (clean, report) = mesh.clean();
    if report.dropped_faces > 0 {
        warnings.push(format!("dropped {} degenerate faces", report.dropped_faces));
    }
    let report = LoadReport { vertices: clean.vertices.len(), faces: clean.faces.len(), clean: report, warnings };
    Ok((clean, report))
}

/// Binary little-endian PLY with double coordinates and, when the mesh has
/// labels, a per-face `label` property.
pub fn write_ply(mesh: &TriangleMesh) -> Result<Vec<u8>, MeshError> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::BinaryLittleEndian;
    let mut vertex = ElementDef::new("vertex".into());
    for k in ["x", "y", "z"] {
        vertex.properties.add(PropertyDef::new(k.into(), PropertyType::Scalar(ScalarType::Double)));
    }
    ply.header.elements.add(vertex);
    let mut face = ElementDef::new("face".into());
    face.properties
        .add(PropertyDef::new("vertex_indices".into(), PropertyType::List(ScalarType::UChar, ScalarType::UInt)));
    if mesh.labels.is_some() {
        face.properties.add(PropertyDef::new("label".into(), PropertyType::Scalar(ScalarType::UInt)));
    }
    ply.header.elements.add(face);

    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            let mut e = DefaultElement::new();
            e.insert("x".into(), Property::Double(v[0]));
            e.insert("y".into(), Property::Double(v[1]));
            e.insert("z".into(), Property::Double(v[2]));
            e
        })
        .collect();
    let faces = mesh
        .faces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut e = DefaultElement::new();
            e.insert("vertex_indices".into(), Property::ListUInt(f.to_vec()));
            if let Some(l) = &mesh.labels {
                e.insert("label".into(), Property::UInt(l[i]));
            }
            e
        })
        .collect();
    ply.payload.insert("vertex".into(), vertices);
    ply.payload.insert("face".into(), faces);

    let mut out = Vec::new();
    Writer::new()
        .write_ply(&mut out, &mut ply)
        .map_err(|e| MeshError::InvalidMesh(format!("cannot encode PLY: {e}")))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "ply
format ascii 1.0
element vertex 8
property float x
property float y
property float z
element face 6
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 1 2 6 5
4 2 3 7 6
4 3 0 4 7
";

    #[test]
    fn ascii_quads_are_fan_triangulated() {
        let (m, r) = load_ply(CUBE.as_bytes(), PlyOptions::default()).unwrap();
        assert_eq!((m.vertices.len(), m.faces.len()), (8, 12));
        assert_eq!((r.vertices, r.faces), (8, 12));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn binary_round_trip_with_labels() {
        let (mut m, _) = load_ply(CUBE.as_bytes(), PlyOptions::default()).unwrap();
        m.labels = Some((0..12).map(|i| i / 2).collect());
        let bytes = write_ply(&m).unwrap();
        assert!(bytes.starts_with(b"ply\nformat binary_little_endian 1.0\n"));
        let (back, _) = load_ply(&bytes, PlyOptions::default()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn z_up_swap() {
        let (m, _) = load_ply(CUBE.as_bytes(), PlyOptions { z_up: true }).unwrap();
        assert_eq!(m.vertices[4], [0.0, 1.0, -0.0]);
    }

    #[test]
    fn truncated_and_degenerate() {
        let cut = &CUBE[..CUBE.len() - 30];
        assert!(matches!(load_ply(cut.as_bytes(), PlyOptions::default()), Err(MeshError::MalformedPly { .. })));
        let zero_area = CUBE.replace("element face 6", "element face 7") + "3 0 1 1\n";
        let (m, r) = load_ply(zero_area.as_bytes(), PlyOptions::default()).unwrap();
        assert_eq!(r.clean.dropped_faces, 1);
        assert_eq!(m.faces.len(), 12);
        assert_eq!(r.warnings.len(), 1);
    }
}
