use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use planmap_core::trace::parse_script;
use planmap_service::{router, Store};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures").join(name)
}

fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

fn script_ops() -> Vec<Value> {
    let text = String::from_utf8(read("four_rooms.jsonl")).unwrap();
    parse_script(&text).unwrap().into_iter().map(|(_, op)| serde_json::to_value(op).unwrap()).collect()
}

struct Client {
    app: Router,
}

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
    fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
    fn error_kind(&self) -> String {
        self.json()["error"]["kind"].as_str().unwrap().to_string()
    }
}

impl Client {
    fn open(dir: &Path) -> Client {
        Client { app: router(Arc::new(Store::open(dir).unwrap())) }
    }

    async fn send(&self, method: Method, uri: &str, content_type: Option<&str>, body: Vec<u8>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(ct) = content_type {
            req = req.header(header::CONTENT_TYPE, ct);
        }
        let resp = self.app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = resp.status();
        let content_type = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, content_type, body }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, None, Vec::new()).await
    }

    async fn post_json(&self, uri: &str, v: Value) -> Reply {
        self.send(Method::POST, uri, Some("application/json"), serde_json::to_vec(&v).unwrap()).await
    }

    async fn create(&self, w: f64, h: f64) -> String {
        let r = self.post_json("/v1/projects", json!({ "width": w, "height": h })).await;
        assert_eq!(r.status, StatusCode::CREATED);
        r.json()["id"].as_str().unwrap().to_string()
    }

    async fn ops(&self, id: &str, base: u64, ops: &[Value]) -> Reply {
        self.post_json(&format!("/v1/projects/{id}/ops"), json!({ "base_version": base, "ops": ops })).await
    }

    async fn traced_project(&self) -> String {
        let id = self.create(700.0, 800.0).await;
        let r = self.ops(&id, 0, &script_ops()).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        id
    }

    async fn put_anchors(&self, id: &str) -> Reply {
        self.send(Method::PUT, &format!("/v1/projects/{id}/anchors"), Some("application/toml"), read("anchors.toml")).await
    }
}

#[tokio::test]
async fn traced_script_exports_the_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.traced_project().await;
    let sim = c.get(&format!("/v1/projects/{id}/export/sim")).await;
    assert_eq!(sim.status, StatusCode::OK);
    assert_eq!(sim.body, read("golden/four_rooms.sim"));

    let r = c.get(&format!("/v1/projects/{id}/export/geojson")).await;
    assert_eq!(r.error_kind(), "UnregisteredModel");
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let r = c.put_anchors(&id).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert!(r.json()["rms_residual"].as_f64().unwrap() < 0.05);
    let geo = c.get(&format!("/v1/projects/{id}/export/geojson")).await;
    assert_eq!(geo.status, StatusCode::OK);
    assert_eq!(geo.content_type.as_deref(), Some("application/geo+json"));
    assert_eq!(geo.body, read("golden/four_rooms.geojson"));
}

#[tokio::test]
async fn a_failing_batch_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.create(700.0, 800.0).await;
    let before = c.get(&format!("/v1/projects/{id}/state")).await.json();
    let ops = [
        json!({"op": "add_line", "kind": "vertical", "offset": 100}),
        json!({"op": "add_line", "kind": "horizontal", "offset": 100}),
        json!({"op": "pick_corner", "corner": 1}),
    ];
    let r = c.ops(&id, 0, &ops).await;
    assert!(r.status.is_client_error());
    assert_eq!(r.json()["error"]["op_index"], json!(2));
    assert_eq!(c.get(&format!("/v1/projects/{id}/state")).await.json(), before);

    let r = c.ops(&id, 0, &ops[..2]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["version"], json!(1));
    assert_eq!(r.json()["outcomes"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn stale_version_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.create(700.0, 800.0).await;
    let op = [json!({"op": "add_line", "kind": "vertical", "offset": 100})];
    assert_eq!(c.ops(&id, 0, &op).await.status, StatusCode::OK);
    let r = c.ops(&id, 0, &op).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_kind(), "VersionConflict");
    assert_eq!(r.json()["error"]["current_version"], json!(1));
}

#[tokio::test]
async fn ops_need_an_image_size() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let r = c.send(Method::POST, "/v1/projects", None, Vec::new()).await;
    let id = r.json()["id"].as_str().unwrap().to_string();
    let op = [json!({"op": "add_line", "kind": "vertical", "offset": 1})];
    let r = c.ops(&id, 0, &op).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_kind(), "NoImage");

    let mut png = Vec::new();
    image::RgbaImage::new(40, 30)
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .unwrap();
    let r = c.send(Method::PUT, &format!("/v1/projects/{id}/image"), Some("image/png"), png).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert_eq!(r.json()["width"], json!(40.0));
    assert_eq!(c.ops(&id, 0, &op).await.status, StatusCode::OK);
}

#[tokio::test]
async fn unknown_project_and_stage_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    assert_eq!(c.get("/v1/projects/nope/state").await.status, StatusCode::NOT_FOUND);
    let id = c.create(10.0, 10.0).await;
    let r = c.post_json(&format!("/v1/projects/{id}/stages/melt"), json!({})).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = c.post_json(&format!("/v1/projects/{id}/stages/reorient"), json!({})).await;
    assert_eq!(r.error_kind(), "NoMesh");
}

#[tokio::test]
async fn store_recovers_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, sim, geo) = {
        let c = Client::open(dir.path());
        let id = c.traced_project().await;
        c.put_anchors(&id).await;
        let extra = [json!({"op": "add_line", "kind": "vertical", "offset": 650})];
        assert_eq!(c.ops(&id, 1, &extra).await.status, StatusCode::OK);
        let sim = c.get(&format!("/v1/projects/{id}/export/sim")).await.body;
        let geo = c.get(&format!("/v1/projects/{id}/export/geojson")).await.body;
        (id, sim, geo)
    };
    let c = Client::open(dir.path());
    let state = c.get(&format!("/v1/projects/{id}/state")).await.json();
    assert_eq!(state["version"], json!(2));
    assert_eq!(c.get(&format!("/v1/projects/{id}/export/sim")).await.body, sim);
    assert_eq!(c.get(&format!("/v1/projects/{id}/export/geojson")).await.body, geo);
    assert_ne!(c.create(1.0, 1.0).await, id);
}

#[tokio::test]
async fn torn_log_tail_is_dropped_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, sim) = {
        let c = Client::open(dir.path());
        let id = c.traced_project().await;
        (id.clone(), c.get(&format!("/v1/projects/{id}/export/sim")).await.body)
    };
    let log = dir.path().join(&id).join("ops.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"version\":2,\"ops\":[{\"op\":\"add_li");
    std::fs::write(&log, &text).unwrap();

    let c = Client::open(dir.path());
    assert_eq!(c.get(&format!("/v1/projects/{id}/state")).await.json()["version"], json!(1));
    assert_eq!(c.get(&format!("/v1/projects/{id}/export/sim")).await.body, sim);
    assert!(std::fs::read_to_string(&log).unwrap().ends_with('\n'));
    let op = [json!({"op": "add_line", "kind": "vertical", "offset": 650})];
    assert_eq!(c.ops(&id, 1, &op).await.status, StatusCode::OK);
    let c = Client::open(dir.path());
    assert_eq!(c.get(&format!("/v1/projects/{id}/state")).await.json()["version"], json!(2));
}

async fn run_mesh_stages(c: &Client, id: &str) {
    let r = c
        .send(Method::PUT, &format!("/v1/projects/{id}/mesh"), Some("application/octet-stream"), read("room_scan.ply"))
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    for (stage, params) in [
        ("reorient", json!({})),
        ("fitwalls", json!({})),
        ("rectify", json!({})),
        ("register", json!({"space": "101", "rotation": 0})),
        ("superpixel", json!({"k": 0.05, "min_size": 50})),
    ] {
        let r = c.post_json(&format!("/v1/projects/{id}/stages/{stage}"), params).await;
        assert_eq!(r.status, StatusCode::OK, "{stage}: {}", r.text());
    }
}

#[tokio::test]
async fn mesh_stages_populate_the_map() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.traced_project().await;
    c.put_anchors(&id).await;

    let r = c.post_json(&format!("/v1/projects/{id}/stages/fitwalls"), json!({})).await;
    assert_eq!(r.error_kind(), "NoMesh");
    run_mesh_stages(&c, &id).await;

    let theta = c.get(&format!("/v1/projects/{id}/stages/reorient")).await.json()["theta_deg"].as_f64().unwrap();
    assert!((theta - 17.0).abs() <= 0.5, "{theta}");
    let sp = c.get(&format!("/v1/projects/{id}/stages/superpixel")).await.json();
    assert_eq!(sp["count"], json!(8));

    let top = c.get(&format!("/v1/projects/{id}/superpixels/topdown?pixels_per_metre=20")).await;
    assert_eq!(top.status, StatusCode::OK);
    let top = top.json();
    assert!(top["png_base64"].as_str().unwrap().starts_with("iVBORw0KGgo"));
    assert_eq!(top["legend"]["labels"].as_array().unwrap().len(), 8);

    let r = c.get(&format!("/v1/projects/{id}/export/populated")).await;
    assert_eq!(r.error_kind(), "NoAssignments");
    let r = c
        .send(Method::POST, &format!("/v1/projects/{id}/assignments"), Some("application/toml"), read("assignments.toml"))
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert_eq!(r.json()["boxes"].as_array().unwrap().len(), 3);
    let populated = c.get(&format!("/v1/projects/{id}/export/populated")).await;
    assert_eq!(populated.status, StatusCode::OK);
    assert_eq!(populated.text(), String::from_utf8(read("golden/populated.geojson")).unwrap());

    // Everything survives a restart.
    let c = Client::open(dir.path());
    assert_eq!(c.get(&format!("/v1/projects/{id}/export/populated")).await.body, populated.body);
}

#[tokio::test]
async fn register_without_rotation_suggests_one() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.traced_project().await;
    c.send(Method::PUT, &format!("/v1/projects/{id}/mesh"), None, read("room_scan.ply")).await;
    for stage in ["reorient", "fitwalls", "rectify"] {
        c.post_json(&format!("/v1/projects/{id}/stages/{stage}"), json!({})).await;
    }
    let r = c.post_json(&format!("/v1/projects/{id}/stages/register"), json!({"space": "101"})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_kind(), "RotationRequired");
    let r = c.get(&format!("/v1/projects/{id}/stages/register")).await;
    assert_eq!(r.error_kind(), "StageNotRun");
}

#[tokio::test]
async fn rerunning_a_stage_clears_later_ones() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.traced_project().await;
    run_mesh_stages(&c, &id).await;
    let r = c.post_json(&format!("/v1/projects/{id}/stages/fitwalls"), json!({"seed": 3})).await;
    assert_eq!(r.status, StatusCode::OK);
    let state = c.get(&format!("/v1/projects/{id}/state")).await.json();
    assert_eq!(state["mesh"]["stages"], json!(["reorient", "fitwalls"]));
    let c = Client::open(dir.path());
    let state = c.get(&format!("/v1/projects/{id}/state")).await.json();
    assert_eq!(state["mesh"]["stages"], json!(["reorient", "fitwalls"]));
}

#[tokio::test]
async fn style_accepts_json_and_toml() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::open(dir.path());
    let id = c.create(10.0, 10.0).await;
    let r = c
        .send(Method::PUT, &format!("/v1/projects/{id}/style"), Some("application/toml"), read("style.toml"))
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let style = c.get(&format!("/v1/projects/{id}/state")).await.json()["style"].clone();
    let r = c
        .send(Method::PUT, &format!("/v1/projects/{id}/style"), Some("application/json"), serde_json::to_vec(&style).unwrap())
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
}
