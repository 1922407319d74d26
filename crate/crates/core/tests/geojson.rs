use planmap_core::geojson::{
    export_feature_collection, populate, staircase_strips, validate, ExportError, FeatureCollection, FeatureKind,
    StyleConfig,
};
use planmap_core::geom::Point2;
use planmap_core::georef::{georegister, utm_to_wgs84, wgs84_to_utm_in_zone, GeoAnchor, GeoModel, Hemisphere, UtmCoord};
use planmap_core::mesh::ObjectBox;
use planmap_core::trace::{FloorModel, LineKind, SpaceType, TraceOp, TraceSession};
use proptest::prelude::*;

fn line(kind: LineKind, offset: f64) -> TraceOp {
    TraceOp::AddLine { kind, offset: Some(offset), angle_deg: None, anchor: None, ghost: false }
}

fn space(corners: &[u32], name: &str, t: SpaceType) -> Vec<TraceOp> {
    let mut ops = vec![TraceOp::BeginSpace { order: None }];
    ops.extend(corners.iter().map(|&c| TraceOp::PickCorner { corner: c }));
    for edge in 1..=corners.len() as u32 {
        ops.push(TraceOp::SetWall { edge, present: edge != 4, space: None });
    }
    ops.push(TraceOp::FinalizeSpace { name: name.into(), space_type: t });
    ops
}

/// Room "217", a staircase and an elevator on a 3×3 corner grid.
fn plan() -> FloorModel {
    let mut s = TraceSession::new(600.0, 700.0);
    let mut ops = vec![];
    for x in [100.0, 300.0, 500.0] {
        ops.push(line(LineKind::Vertical, x));
    }
    for y in [100.0, 400.0, 600.0] {
        ops.push(line(LineKind::Horizontal, y));
    }
    ops.push(TraceOp::ComputeCorners);
    ops.extend(space(&[1, 2, 5, 4], "217", SpaceType::Room));
    ops.extend(space(&[2, 3, 6, 5], "stairs", SpaceType::Staircase));
    ops.extend(space(&[4, 5, 8, 7], "lift", SpaceType::Elevator));
    ops.push(TraceOp::AddEntrance { wall: 1, p1: [150.0, 100.0], p2: [200.0, 100.0], space: Some("s1".into()) });
    s.apply_batch(&ops).unwrap();
    s.model
}

fn anchors(m: &FloorModel) -> Vec<GeoAnchor> {
    let origin = wgs84_to_utm_in_zone(36.999, -122.06, 10, Hemisphere::North).unwrap();
    [1, 3, 9, 7]
        .iter()
        .map(|&id| {
            let p = m.corner(id).unwrap().point();
            let u = UtmCoord {
                zone: 10,
                hemisphere: Hemisphere::North,
                easting: origin.easting + 0.05 * p.x,
                northing: origin.northing - 0.05 * p.y,
            };
            let (lat, lon) = utm_to_wgs84(&u).unwrap();
            GeoAnchor { corner: id, lat, lon }
        })
        .collect()
}

fn registered() -> (FloorModel, GeoModel) {
    let m = plan();
    let geo = georegister(&m, &anchors(&m)).unwrap();
    (m, geo)
}

#[test]
fn export_is_valid_and_follows_the_count_law() {
    let (m, geo) = registered();
    let style = StyleConfig::default();
    let fc = export_feature_collection(&m, &geo, &style).unwrap();
    let json = fc.to_json();
    validate(&serde_json::from_str(&json).unwrap()).unwrap();

    let stairs = m.spaces.iter().filter(|s| s.space_type == SpaceType::Staircase).count();
    assert_eq!(fc.features.len(), m.spaces.len() - stairs + 3 * stairs);

    let room = &fc.features[0];
    assert_eq!(room.properties.name, "217");
    assert_eq!(room.properties.height, 2.5);
    assert_eq!(room.properties.base_height, 0.0);
    assert_eq!(room.geometry.coordinates[0].len(), 5);
    assert_eq!(room.properties.entrances.as_ref().unwrap().len(), 1);
    assert_eq!(room.properties.open_edges.as_ref().unwrap().len(), 1);

    let steps: Vec<_> = fc.features.iter().filter(|f| f.properties.kind == FeatureKind::Step).collect();
    assert_eq!(steps.len(), 3);
    assert!(steps.windows(2).all(|w| w[0].properties.height < w[1].properties.height));
    assert!(steps.iter().all(|f| f.properties.color == "#2E8B57"));
    let lift = fc.features.iter().find(|f| f.properties.name == "lift").unwrap();
    assert_eq!(lift.properties.color, "#1E40AF");

    // Same inputs, same bytes.
    assert_eq!(export_feature_collection(&m, &geo, &style).unwrap().to_json(), json);
    assert_eq!(FeatureCollection::from_json(&json).unwrap(), fc);
}

#[test]
fn coordinates_are_lon_lat_and_survive_utm_round_trip() {
    let (m, geo) = registered();
    let fc = export_feature_collection(&m, &geo, &StyleConfig::default()).unwrap();
    for f in &fc.features {
        for &[lon, lat] in &f.geometry.coordinates[0] {
            assert!((lon + 122.06).abs() < 0.01 && (lat - 36.99).abs() < 0.02, "{lon},{lat}");
            let u = wgs84_to_utm_in_zone(lat, lon, 10, Hemisphere::North).unwrap();
            let (lat2, lon2) = utm_to_wgs84(&u).unwrap();
            assert!((lat - lat2).abs() < 1e-9 && (lon - lon2).abs() < 1e-9);
        }
    }
}

#[test]
fn empty_model_gives_an_empty_valid_collection() {
    let (_, geo) = registered();
    let empty = FloorModel::new(10.0, 10.0);
    let fc = export_feature_collection(&empty, &geo, &StyleConfig::default()).unwrap();
    assert!(fc.features.is_empty());
    validate(&serde_json::from_str(&fc.to_json()).unwrap()).unwrap();
}

#[test]
fn non_quad_staircase_falls_back() {
    let mut s = TraceSession::new(600.0, 700.0);
    let mut ops = vec![];
    for x in [100.0, 300.0, 500.0] {
        ops.push(line(LineKind::Vertical, x));
    }
    for y in [100.0, 400.0, 600.0] {
        ops.push(line(LineKind::Horizontal, y));
    }
    ops.push(TraceOp::ComputeCorners);
    ops.extend(space(&[1, 3, 6, 5, 4], "odd", SpaceType::Staircase));
    s.apply_batch(&ops).unwrap();
    let geo = georegister(&s.model, &anchors(&s.model)).unwrap();
    let fc = export_feature_collection(&s.model, &geo, &StyleConfig::default()).unwrap();
    assert_eq!(fc.features.len(), 1);
    assert_eq!(fc.features[0].properties.fallback, Some(true));
}

fn table(name: &str, x: f64) -> ObjectBox {
    ObjectBox {
        name: name.into(),
        color: None,
        min: [0.0, 0.0, 0.0],
        max: [1.0, 0.75, 1.0],
        footprint: [Point2::new(x, 150.0), Point2::new(x + 20.0, 150.0), Point2::new(x + 20.0, 170.0), Point2::new(x, 170.0)],
        height: 0.75,
        min_y: 0.0,
        superpixels: vec![1, 2],
    }
}

#[test]
fn populate_appends_then_replaces_by_name() {
    let (m, geo) = registered();
    let style = StyleConfig::default();
    let mut fc = export_feature_collection(&m, &geo, &style).unwrap();
    let n = fc.features.len();
    let replaced = populate(&mut fc, &[table("table", 150.0), table("desk", 200.0)], &style).unwrap();
    assert!(replaced.is_empty());
    assert_eq!(fc.features.len(), n + 2);
    let once = fc.to_json();
    validate(&serde_json::from_str(&once).unwrap()).unwrap();
    let obj = &fc.features[n];
    assert_eq!((obj.properties.height, obj.properties.base_height), (0.75, 0.0));

    let replaced = populate(&mut fc, &[table("table", 150.0)], &style).unwrap();
    assert_eq!(replaced, vec!["table".to_string()]);
    assert_eq!(fc.to_json(), once);

    assert_eq!(populate(&mut fc, &[table("217", 150.0)], &style), Err(ExportError::NameCollision("217".into())));
    fc.registration = None;
    assert_eq!(populate(&mut fc, &[table("x", 150.0)], &style), Err(ExportError::UnregisteredModel));
}

proptest! {
    #[test]
    fn strips_tile_the_quad(w in 1.0f64..50.0, h in 1.0f64..50.0, skew in -0.3f64..0.3) {
        let quad = [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w + skew * h, h), Point2::new(skew * h, h)];
        let strips = staircase_strips(&quad, 3).unwrap();
        let total: f64 = strips.iter().map(|s| planmap_core::geom::signed_area(s).abs()).sum();
        prop_assert!((total - planmap_core::geom::signed_area(&quad).abs()).abs() < 1e-9 * w * h);
        let areas: Vec<f64> = strips.iter().map(|s| planmap_core::geom::signed_area(s).abs()).collect();
        prop_assert!((areas[0] - areas[2]).abs() < 1e-9 * w * h);
    }
}
