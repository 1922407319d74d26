use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use planmap_core::geojson::StyleConfig;
use planmap_core::georef::{parse_anchors, write_anchors, GeoAnchor};
use planmap_core::mesh::{Assignments, LoadReport};
use planmap_core::trace::{OpOutcome, TraceOp};

use crate::project::{MeshStage, Project, StageRequest};
use crate::ApiError;

const META: &str = "project.json";
const IMAGE: &str = "image";
const OPS: &str = "ops.jsonl";
const ANCHORS: &str = "anchors.toml";
const STYLE: &str = "style.toml";
const MESH: &str = "mesh.ply";
const MESH_META: &str = "mesh.json";
const STAGES: &str = "stages.jsonl";
const ASSIGNMENTS: &str = "assignments.toml";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    width: f64,
    height: f64,
    has_image: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshMeta {
    z_up: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoggedBatch {
    version: u64,
    ops: Vec<TraceOp>,
}

struct Handle {
    dir: PathBuf,
    /// Serializes writers; readers only touch `current`.
    write: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Project>>,
}

/// Projects on disk, one directory each, plus their in-memory snapshots.
pub struct Store {
    root: PathBuf,
    projects: RwLock<BTreeMap<String, Arc<Handle>>>,
    create_lock: tokio::sync::Mutex<()>,
}

fn io_err(e: io::Error) -> ApiError {
    ApiError::internal(e.to_string())
}

/// Write to a temporary file, sync and rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

fn append_line(path: &Path, line: &str) -> io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(format!("{line}\n").as_bytes())?;
    f.sync_data()
}

fn remove_if_exists(path: &Path) -> io::Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}

/// Parses a JSON-lines log. A torn final line, left by a crash during an
/// append, is dropped and cut from the file.
fn read_log<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    let mut good = 0;
    for line in text.split_inclusive('\n') {
        let complete = line.ends_with('\n');
        match serde_json::from_str::<T>(line.trim_end()) {
            Ok(v) if complete => {
                out.push(v);
                good += line.len();
            }
            _ if good + line.len() == text.len() => {
                log::warn!("{}: dropping incomplete trailing record", path.display());
                OpenOptions::new().write(true).open(path)?.set_len(good as u64)?;
                break;
            }
            Err(e) => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Ok(_) => unreachable!("only the last line can lack a newline"),
        }
    }
    Ok(out)
}

fn load_project(id: &str, dir: &Path) -> Result<Project, ApiError> {
    let corrupt = |what: &str, e: String| ApiError::internal(format!("project {id}: {what}: {e}"));
    let meta: Meta =
        serde_json::from_slice(&fs::read(dir.join(META)).map_err(io_err)?).map_err(|e| corrupt(META, e.to_string()))?;
    let mut p = Project::new(id.to_string(), Some((meta.width, meta.height)));
    p.has_image = meta.has_image;
    for batch in read_log::<LoggedBatch>(&dir.join(OPS)).map_err(io_err)? {
        p.replay_batch(&batch.ops)?;
        if p.version != batch.version {
            return Err(corrupt(OPS, format!("batch {} out of sequence", batch.version)));
        }
    }
    if let Ok(text) = fs::read_to_string(dir.join(STYLE)) {
        p.style = StyleConfig::from_toml(&text)?;
    }
    if let Ok(text) = fs::read_to_string(dir.join(ANCHORS)) {
        p.set_anchors(parse_anchors(&text)?)?;
    }
    if let Ok(bytes) = fs::read(dir.join(MESH)) {
        let meta: MeshMeta = serde_json::from_slice(&fs::read(dir.join(MESH_META)).map_err(io_err)?)
            .map_err(|e| corrupt(MESH_META, e.to_string()))?;
        p.mesh = Some(Arc::new(MeshStage::load(&bytes, meta.z_up)?));
        for stage in read_log::<StageRequest>(&dir.join(STAGES)).map_err(io_err)? {
            p.run_stage(&stage)?;
        }
        if let Ok(text) = fs::read_to_string(dir.join(ASSIGNMENTS)) {
            p.set_assignments(Assignments::from_toml(&text)?)?;
        }
    }
    Ok(p)
}

impl Store {
    /// Opens (creating if needed) a data directory and replays every
    /// project in it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, ApiError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err)?;
        let mut projects = BTreeMap::new();
        for entry in fs::read_dir(&root).map_err(io_err)? {
            let entry = entry.map_err(io_err)?;
            let dir = entry.path();
            if !dir.join(META).is_file() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            let p = load_project(&id, &dir)?;
            projects.insert(id, Arc::new(Handle { dir, write: Default::default(), current: RwLock::new(Arc::new(p)) }));
        }
        Ok(Store { root, projects: RwLock::new(projects), create_lock: Default::default() })
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.projects
            .read()
            .expect("project table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(&format!("project {id:?}")))
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<Project>, ApiError> {
        Ok(self.handle(id)?.current.read().expect("snapshot lock").clone())
    }

    pub async fn create(&self, size: Option<(f64, f64)>) -> Result<Arc<Project>, ApiError> {
        let _guard = self.create_lock.lock().await;
        let n = {
            let projects = self.projects.read().expect("project table lock");
            (1..).find(|n| !projects.contains_key(&format!("p{n}")) && !self.root.join(format!("p{n}")).exists()).expect("free id")
        };
        let id = format!("p{n}");
        let dir = self.root.join(&id);
        fs::create_dir_all(&dir).map_err(io_err)?;
        let p = Project::new(id.clone(), size);
        let meta = Meta { width: p.width, height: p.height, has_image: false };
        write_atomic(&dir.join(META), &serde_json::to_vec(&meta).expect("meta")).map_err(io_err)?;
        let p = Arc::new(p);
        let handle = Handle { dir, write: Default::default(), current: RwLock::new(p.clone()) };
        self.projects.write().expect("project table lock").insert(id, Arc::new(handle));
        Ok(p)
    }

    /// Runs `f` on a copy of the project under the project's write lock.
    /// `f` persists its change; the copy is published only if it succeeds.
    async fn mutate<R>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Project, &Path) -> Result<R, ApiError>,
    ) -> Result<(Arc<Project>, R), ApiError> {
        let h = self.handle(id)?;
        let _guard = h.write.lock().await;
        let mut p = (**h.current.read().expect("snapshot lock")).clone();
        let r = f(&mut p, &h.dir)?;
        let p = Arc::new(p);
        *h.current.write().expect("snapshot lock") = p.clone();
        Ok((p, r))
    }

    pub async fn set_image(&self, id: &str, bytes: Vec<u8>) -> Result<Arc<Project>, ApiError> {
        let reader = image::ImageReader::new(io::Cursor::new(&bytes))
            .with_guessed_format()
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let (w, h) = reader.into_dimensions().map_err(|e| ApiError::bad_request(format!("unreadable image: {e}")))?;
        Ok(self
            .mutate(id, |p, dir| {
                p.set_size(w as f64, h as f64)?;
                p.has_image = true;
                write_atomic(&dir.join(IMAGE), &bytes).map_err(io_err)?;
                let meta = Meta { width: p.width, height: p.height, has_image: true };
                write_atomic(&dir.join(META), &serde_json::to_vec(&meta).expect("meta")).map_err(io_err)
            })
            .await?
            .0)
    }

    pub async fn apply_ops(
        &self,
        id: &str,
        base_version: u64,
        ops: Vec<TraceOp>,
    ) -> Result<(Arc<Project>, Vec<OpOutcome>), ApiError> {
        self.mutate(id, |p, dir| {
            let out = p.apply_ops(base_version, &ops)?;
            let line = serde_json::to_string(&LoggedBatch { version: p.version, ops }).expect("ops serialize");
            append_line(&dir.join(OPS), &line).map_err(io_err)?;
            Ok(out)
        })
        .await
    }

    pub async fn set_anchors(&self, id: &str, anchors: Vec<GeoAnchor>) -> Result<(Arc<Project>, f64), ApiError> {
        self.mutate(id, |p, dir| {
            let text = write_anchors(&anchors);
            let rms = p.set_anchors(anchors)?;
            write_atomic(&dir.join(ANCHORS), text.as_bytes()).map_err(io_err)?;
            Ok(rms)
        })
        .await
    }

    pub async fn set_style(&self, id: &str, style: StyleConfig) -> Result<Arc<Project>, ApiError> {
        Ok(self
            .mutate(id, |p, dir| {
                let text = toml::to_string(&style).expect("style serializes");
                p.style = style;
                write_atomic(&dir.join(STYLE), text.as_bytes()).map_err(io_err)
            })
            .await?
            .0)
    }

    pub async fn set_mesh(&self, id: &str, bytes: Vec<u8>, z_up: bool) -> Result<(Arc<Project>, LoadReport), ApiError> {
        self.mutate(id, |p, dir| {
            let stage = MeshStage::load(&bytes, z_up)?;
            let report = stage.load_report.clone();
            p.mesh = Some(Arc::new(stage));
            p.assignments = None;
            p.boxes = None;
            for f in [STAGES, ASSIGNMENTS] {
                remove_if_exists(&dir.join(f)).map_err(io_err)?;
            }
            write_atomic(&dir.join(MESH), &bytes).map_err(io_err)?;
            write_atomic(&dir.join(MESH_META), &serde_json::to_vec(&MeshMeta { z_up }).expect("meta")).map_err(io_err)?;
            Ok(report)
        })
        .await
    }

    pub async fn run_stage(&self, id: &str, stage: StageRequest) -> Result<Arc<Project>, ApiError> {
        Ok(self
            .mutate(id, |p, dir| {
                p.run_stage(&stage)?;
                remove_if_exists(&dir.join(ASSIGNMENTS)).map_err(io_err)?;
                append_line(&dir.join(STAGES), &serde_json::to_string(&stage).expect("stage serializes")).map_err(io_err)
            })
            .await?
            .0)
    }

    pub async fn set_assignments(&self, id: &str, a: Assignments) -> Result<Arc<Project>, ApiError> {
        Ok(self
            .mutate(id, |p, dir| {
                let text = a.to_toml();
                p.set_assignments(a)?;
                write_atomic(&dir.join(ASSIGNMENTS), text.as_bytes()).map_err(io_err)
            })
            .await?
            .0)
    }
}
