use std::collections::BTreeSet;

use planmap_core::geom::Point2;
use planmap_core::mesh::*;
use planmap_core::par::Execution;
use planmap_core::synthetic::{self, RoomSpec};
use proptest::prelude::*;

mod support;
use support::oracle_segmentation;

const SEQ: Execution = Execution::Sequential;

fn small_fixtures() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("plane1", synthetic::plane(1)),
        ("plane2", synthetic::plane(2)),
        ("crease1", synthetic::crease(1)),
        ("cube", synthetic::cube()),
        ("bipyramid", synthetic::sphere(2, 4)),
        ("hexpyramid", synthetic::sphere(2, 6)),
    ]
}

fn segment(m: &TriangleMesh, k: f64, min_size: usize) -> Vec<u32> {
    superpixelate(m, &SegmentationParams { k, min_size }, SEQ).unwrap()
}

#[test]
fn segmentation_matches_oracle_on_small_fixtures() {
    for (name, m) in small_fixtures() {
        assert!(m.faces.len() <= 12, "{name}");
        for k in [0.01, 0.05, 0.2, 1.0, 3.0] {
            for min_size in [1, 2, 3, 5] {
                assert_eq!(segment(&m, k, min_size), oracle_segmentation(&m, k, min_size), "{name} k={k} min={min_size}");
            }
        }
    }
}

#[test]
fn segmentation_reference_counts() {
    assert_eq!(segment_count(&segment(&synthetic::plane(3), 0.05, 1)), 1);
    assert_eq!(segment_count(&segment(&synthetic::crease(1), 0.05, 1)), 2);
    assert_eq!(segment_count(&segment(&synthetic::cube(), 0.05, 1)), 6);
}

#[test]
fn segment_count_non_increasing_in_k() {
    let room = synthetic::room(&RoomSpec::default()).mesh;
    let fixtures = small_fixtures().into_iter().map(|(_, m)| m).chain([synthetic::sphere(8, 16), room]);
    for m in fixtures {
        for min_size in [1, 50] {
            let counts: Vec<usize> = [0.01, 0.05, 0.2].iter().map(|&k| segment_count(&segment(&m, k, min_size))).collect();
            assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        }
    }
}

fn noisy_small_mesh() -> impl Strategy<Value = TriangleMesh> {
    let base = prop_oneof![Just(synthetic::cube()), Just(synthetic::plane(2)), Just(synthetic::sphere(2, 6))];
    (base, prop::collection::vec(-0.2f64..0.2, 24)).prop_map(|(mut m, jitter)| {
        for (i, v) in m.vertices.iter_mut().enumerate() {
            for c in 0..3 {
                v[c] += jitter[(3 * i + c) % jitter.len()];
            }
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn segmentation_equals_oracle(m in noisy_small_mesh(), k in 0.001f64..2.0, min_size in 1usize..6) {
        prop_assume!((0..m.faces.len()).all(|f| m.face_area(f) > 1e-6));
        prop_assert_eq!(segment(&m, k, min_size), oracle_segmentation(&m, k, min_size));
    }
}

#[test]
fn reorient_recovers_room_rotation() {
    let room = synthetic::room(&RoomSpec::default());
    let r = reorient(&room.mesh, SEQ).unwrap();
    assert!((r.theta_deg - 17.0).abs() <= 0.5, "{}", r.theta_deg);
    assert!(r.histogram.dominance() >= DOMINANCE_THRESHOLD);
    let (lo, hi) = r.mesh.bounds().unwrap();
    assert!(hi[2] - lo[2] > hi[0] - lo[0]);
    assert_eq!((r.mesh.vertices.len(), r.mesh.faces.len()), (room.mesh.vertices.len(), room.mesh.faces.len()));

    let again = reorient(&r.mesh, SEQ).unwrap();
    assert!(again.theta_deg.abs() <= 0.5, "{}", again.theta_deg);
}

#[test]
fn aligned_room_is_left_alone() {
    let spec = RoomSpec { rotation_deg: 0.0, shear_deg: 0.0, ..RoomSpec::default() };
    let r = reorient(&synthetic::room(&spec).mesh, SEQ).unwrap();
    assert!(r.theta_deg.abs() <= 0.5);
}

#[test]
fn clean_room_quad_corners() {
    let spec = RoomSpec { rotation_deg: 0.0, shear_deg: 0.0, ..RoomSpec::default() };
    let q = fit_wall_lines(&synthetic::room(&spec).mesh, &WallParams::default(), SEQ).unwrap();
    let truth = [(-2.5, -4.0), (-2.5, 4.0), (2.5, 4.0), (2.5, -4.0)].map(Point2::from);
    for (c, t) in q.corners.iter().zip(truth) {
        assert!(c.dist(t) < 0.01, "{c:?} vs {t:?}");
    }
}

#[test]
fn sheared_room_keeps_its_skew() {
    let spec = RoomSpec { rotation_deg: 0.0, ..RoomSpec::default() };
    let q = fit_wall_lines(&synthetic::room(&spec).mesh, &WallParams::default(), SEQ).unwrap();
    for a in q.angles_deg() {
        assert!((a - 88.0).abs() <= 0.25 || (a - 92.0).abs() <= 0.25, "{:?}", q.angles_deg());
    }
}

#[test]
fn sparse_slab_is_rejected() {
    let params = WallParams { min_points: 100_000, ..WallParams::default() };
    let err = fit_wall_lines(&synthetic::room(&RoomSpec::default()).mesh, &params, SEQ).unwrap_err();
    assert!(matches!(err, MeshError::InsufficientInliers { .. }));
}

#[test]
fn hints_replace_slabs() {
    let spec = RoomSpec { rotation_deg: 0.0, shear_deg: 0.0, ..RoomSpec::default() };
    let m = synthetic::room(&spec).mesh;
    let region = |x0, z0, x1, z1| Some(Region { min: Point2::new(x0, z0), max: Point2::new(x1, z1) });
    let params = WallParams {
        hints: SideHints {
            left: region(-2.6, -3.0, -2.4, 3.0),
            far: region(-2.0, 3.9, 2.0, 4.1),
            right: region(2.4, -3.0, 2.6, 3.0),
            near: region(-2.0, -4.1, 2.0, -3.9),
        },
        ..WallParams::default()
    };
    let q = fit_wall_lines(&m, &params, SEQ).unwrap();
    assert!(q.corners[2].dist(Point2::new(2.5, 4.0)) < 0.01);
}

struct Pipeline {
    reoriented: Reorientation,
    quad: WallQuad,
    rect: Rectification,
    labels: Vec<u32>,
}

fn pipeline(exec: Execution) -> Pipeline {
    let room = synthetic::room(&RoomSpec::default());
    let reoriented = reorient(&room.mesh, exec).unwrap();
    let quad = fit_wall_lines(&reoriented.mesh, &WallParams::default(), exec).unwrap();
    let rect = rectify(&reoriented.mesh, &quad, exec).unwrap();
    let labels = superpixelate(&rect.mesh, &SegmentationParams::default(), exec).unwrap();
    Pipeline { reoriented, quad, rect, labels }
}

#[test]
fn rectified_walls_are_axis_parallel() {
    let p = pipeline(SEQ);
    for (c, r) in p.quad.corners.iter().zip(p.rect.rect.corners()) {
        assert!(p.rect.h.apply(*c).unwrap().dist(r) <= 1e-9);
    }
    let refit = fit_wall_lines(&p.rect.mesh, &WallParams::default(), SEQ).unwrap();
    for l in refit.lines {
        assert!(l.axis_deviation_deg() <= 0.2, "{}", l.axis_deviation_deg());
    }
    assert_eq!(p.rect.mesh.vertices.len(), p.reoriented.mesh.vertices.len());
    for (a, b) in p.rect.mesh.vertices.iter().zip(&p.reoriented.mesh.vertices) {
        assert_eq!(a[1], b[1]);
    }
}

#[test]
fn registration_lands_on_room_corners_for_every_rotation() {
    let p = pipeline(SEQ);
    let rect = p.rect.rect;
    for rot in Rotation::ALL {
        let (w, h) = if matches!(rot, Rotation::R90 | Rotation::R270) { (400.0, 250.0) } else { (250.0, 400.0) };
        let room = vec![Point2::new(100.0, 100.0), Point2::new(100.0 + w, 100.0), Point2::new(100.0 + w, 100.0 + h), Point2::new(100.0, 100.0 + h)];
        for corner in [RectCorner::TopLeft, RectCorner::BottomRight] {
            let t = register_to_space(&rect, &room, Some(rot), corner).unwrap();
            let mut hit = [false; 4];
            for c in rect.corners() {
                let q = t.apply_xz(c.x, c.y);
                let i = room.iter().position(|r| r.dist(q) <= 1e-9).unwrap_or_else(|| panic!("{rot} {q:?}"));
                hit[i] = true;
            }
            assert_eq!(hit, [true; 4]);
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let (s, p) = (pipeline(Execution::Sequential), pipeline(Execution::Parallel));
    assert_eq!(s.reoriented, p.reoriented);
    assert_eq!(s.quad, p.quad);
    assert_eq!(s.rect, p.rect);
    assert_eq!(s.labels, p.labels);
}

#[test]
fn room_objects_become_boxes() {
    let p = pipeline(SEQ);
    let room = synthetic::room(&RoomSpec::default());
    let table = room.part("table").unwrap();
    let ids: BTreeSet<u32> = table.clone().map(|f| p.labels[f]).collect();
    // Table super-pixels hold only table faces.
    for (f, l) in p.labels.iter().enumerate() {
        if ids.contains(l) {
            assert!(table.contains(&f), "face {f} in a table super-pixel");
        }
    }
    let a = Assignments {
        objects: vec![ObjectAssignment { name: "table".into(), superpixels: ids.into_iter().collect(), color: None }],
    };
    let subs = assign_objects(&p.rect.mesh, &p.labels, &a).unwrap();
    assert_eq!(subs[0].faces, table.collect::<Vec<_>>());
    let poly = [(0.0, 0.0), (50.0, 0.0), (50.0, 80.0), (0.0, 80.0)].map(Point2::from);
    let t = register_to_space(&p.rect.rect, &poly, Some(Rotation::R0), RectCorner::TopLeft).unwrap();
    let b = &object_boxes(&subs, &t).unwrap()[0];
    assert!((b.height - 0.75).abs() < 0.01);
    assert!(((b.footprint[1].x - b.footprint[0].x) - 10.0).abs() < 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reorient_tracks_rotation(deg in -40.0f64..40.0, seed in 0u64..1000) {
        let spec = RoomSpec { rotation_deg: deg, shear_deg: 0.0, seed, ..RoomSpec::default() };
        let r = reorient(&synthetic::room(&spec).mesh, SEQ).unwrap();
        prop_assert!((r.theta_deg - deg).abs() <= 0.5, "{} vs {}", r.theta_deg, deg);
    }

    #[test]
    fn registration_is_exact(w in 1.0f64..20.0, d in 1.0f64..20.0, sx in 1.0f64..50.0, sy in 1.0f64..50.0, rot in 0usize..4) {
        let rot = Rotation::ALL[rot];
        let rect = GroundRect { min_x: -w / 2.0, min_z: 1.0, max_x: w / 2.0, max_z: 1.0 + d };
        let (pw, ph) = if matches!(rot, Rotation::R90 | Rotation::R270) { (d * sx, w * sy) } else { (w * sx, d * sy) };
        let room = [(3.0, 7.0), (3.0 + pw, 7.0), (3.0 + pw, 7.0 + ph), (3.0, 7.0 + ph)].map(Point2::from);
        let t = register_to_space(&rect, &room, Some(rot), RectCorner::TopLeft).unwrap();
        for c in rect.corners() {
            let q = t.apply_xz(c.x, c.y);
            prop_assert!(room.iter().any(|r| r.dist(q) <= 1e-9), "{:?}", q);
        }
    }
}
