//! The `planmap` command line: trace, convert, mesh stages and populate.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use planmap_core::geojson::{populate, FeatureCollection, StyleConfig};
use planmap_core::georef::parse_anchors;
use planmap_core::mesh::{
    self, assign_objects, encode_png, fit_wall_lines, labels_csv, load_ply, object_boxes, parse_labels_csv, register_to_space,
    reorient, superpixelate, topdown_raster, write_ply, Assignments, MeshError, ObjectBox, PlyOptions, RectCorner,
    RegistrationTransform, Rotation, SegmentationParams, SideHints, TriangleMesh, WallParams, WallQuad,
};
use planmap_core::par::Execution;
use planmap_core::pipeline::{self, to_json_pretty, RectifyReport, ReorientReport};
use planmap_core::sim::{parse_sim, write_sim};
use planmap_core::trace::TraceSession;

#[derive(Debug, Parser)]
#[command(name = "planmap", version, about = "Trace floor plans into geo-registered GeoJSON and populate them from room scans")]
pub struct Cli {
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay an op script and write the .sim file.
    Trace(TraceArgs),
    /// Geo-register a .sim file and export GeoJSON.
    Convert(ConvertArgs),
    /// Room-scan stages.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Add object boxes to an exported GeoJSON map.
    Populate(PopulateArgs),
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Op script, one JSON op per line.
    #[arg(long)]
    pub script: PathBuf,
    /// Floor-plan image; its size bounds the plan.
    #[arg(long, required_unless_present = "size")]
    pub image: Option<PathBuf>,
    /// Plan size as WIDTHxHEIGHT pixels, instead of --image.
    #[arg(long, value_parser = parse_size, conflicts_with = "image")]
    pub size: Option<(f64, f64)>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub sim: PathBuf,
    /// TOML file of `[[anchor]]` tables (corner, lat, lon).
    #[arg(long)]
    pub anchors: PathBuf,
    /// Style TOML; defaults apply when omitted.
    #[arg(long)]
    pub style: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PopulateArgs {
    /// GeoJSON written by `convert`.
    #[arg(long)]
    pub map: PathBuf,
    /// Boxes JSON written by `mesh boxes`.
    #[arg(long)]
    pub boxes: PathBuf,
    #[arg(long)]
    pub style: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    /// Align the dominant walls with the axes, long side along Z.
    Reorient {
        #[arg(short, long)]
        input: PathBuf,
        /// The scan is Z-up.
        #[arg(long)]
        z_up: bool,
        /// Re-oriented mesh (PLY).
        #[arg(short, long)]
        output: PathBuf,
        /// Angle report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit the four wall lines of a re-oriented mesh.
    Fitwalls {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        slab: f64,
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 20)]
        min_points: usize,
        /// JSON regions per side replacing the automatic slabs.
        #[arg(long)]
        hints: Option<PathBuf>,
        /// Wall quad (JSON).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Warp the mesh so the wall quad becomes a rectangle.
    Rectify {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        quad: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Homography and rectangle (JSON).
        #[arg(long)]
        report: PathBuf,
    },
    /// Map the rectified rectangle onto a traced space.
    Register {
        /// Report written by `rectify`.
        #[arg(long)]
        rect: PathBuf,
        #[arg(long)]
        sim: PathBuf,
        /// Space id or name.
        #[arg(long)]
        space: String,
        /// Quarter turn about Y: 0, 90, 180 or 270.
        #[arg(long)]
        rotation: Option<Rotation>,
        /// Room bounding-box corner used as the correspondence.
        #[arg(long, default_value_t = RectCorner::TopLeft)]
        corner: RectCorner,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Segment faces into super-pixels.
    Superpixel {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        k: f64,
        #[arg(long, default_value_t = 50)]
        min_size: usize,
        /// Labels table (CSV).
        #[arg(short, long)]
        output: PathBuf,
        /// Top-down PNG for picking; the legend goes to the same path with `.json`.
        #[arg(long)]
        topdown: Option<PathBuf>,
        #[arg(long, default_value_t = 50.0)]
        pixels_per_metre: f64,
    },
    /// Bounding boxes of assigned objects in floor-plan pixels.
    Boxes {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// TOML of `[[object]]` tables (name, superpixels, color).
        #[arg(long)]
        assignments: PathBuf,
        /// Transform written by `register`.
        #[arg(long)]
        transform: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_size(s: &str) -> std::result::Result<(f64, f64), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: f64 = w.trim().parse().map_err(|_| "bad width")?;
    let h: f64 = h.trim().parse().map_err(|_| "bad height")?;
    if w > 0.0 && h > 0.0 {
        Ok((w, h))
    } else {
        Err("size must be positive".into())
    }
}

fn read_text(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn read_bytes(p: &Path) -> Result<Vec<u8>> {
    fs::read(p).with_context(|| format!("reading {}", p.display()))
}

fn write(p: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
    serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))
}

fn read_mesh(p: &Path, z_up: bool) -> Result<TriangleMesh> {
    let (mesh, report) = load_ply(&read_bytes(p)?, PlyOptions { z_up }).with_context(|| format!("loading {}", p.display()))?;
    for w in &report.warnings {
        eprintln!("warning: {}: {w}", p.display());
    }
    Ok(mesh)
}

fn write_mesh(p: &Path, mesh: &TriangleMesh) -> Result<()> {
    write(p, write_ply(mesh)?)
}

fn load_style(p: Option<&Path>) -> Result<StyleConfig> {
    match p {
        Some(p) => StyleConfig::from_toml(&read_text(p)?).with_context(|| format!("style {}", p.display())),
        None => Ok(StyleConfig::default()),
    }
}

/// Runs one command. Progress goes to stdout, warnings to stderr.
pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.command {
        Command::Trace(a) => {
            let (w, h) = match (a.size, &a.image) {
                (Some(s), _) => s,
                (None, Some(img)) => {
                    let (w, h) = image::image_dimensions(img).with_context(|| format!("reading {}", img.display()))?;
                    (w as f64, h as f64)
                }
                (None, None) => bail!("--image or --size is required"),
            };
            let script = read_text(&a.script)?;
            let (session, warnings) = TraceSession::replay(w, h, &script).with_context(|| format!("script {}", a.script.display()))?;
            for warning in warnings {
                eprintln!("warning: {warning}");
            }
            write(&a.output, write_sim(&session.model)?)?;
            let m = &session.model;
            println!("{} corners, {} entrance corners, {} spaces", m.corners.len(), m.entrance_corners.len(), m.spaces.len());
            for s in &m.spaces {
                println!("  {} {} ({}) {} corners", s.id, s.name, s.space_type.as_str(), s.corners.len());
            }
        }
        Command::Convert(a) => {
            let anchors = parse_anchors(&read_text(&a.anchors)?)?;
            let style = load_style(a.style.as_deref())?;
            let text = pipeline::convert_sim(&read_bytes(&a.sim)?, &anchors, &style)?;
            write(&a.output, &text)?;
            let fc = FeatureCollection::from_json(&text)?;
            println!("{} features", fc.features.len());
        }
        Command::Populate(a) => {
            let style = load_style(a.style.as_deref())?;
            let mut fc = FeatureCollection::from_json(&read_text(&a.map)?)?;
            let boxes: Vec<ObjectBox> = read_json(&a.boxes)?;
            for name in populate(&mut fc, &boxes, &style)? {
                eprintln!("replaced existing object {name:?}");
            }
            let text = fc.to_json();
            FeatureCollection::from_json(&text)?;
            write(&a.output, &text)?;
            println!("{} features", fc.features.len());
        }
        Command::Mesh(m) => run_mesh(m, exec)?,
    }
    Ok(())
}

fn run_mesh(cmd: MeshCommand, exec: Execution) -> Result<()> {
    match cmd {
        MeshCommand::Reorient { input, z_up, output, report } => {
            let mesh = read_mesh(&input, z_up)?;
            let r = reorient(&mesh, exec)?;
            write_mesh(&output, &r.mesh)?;
            if let Some(p) = report {
                write(&p, to_json_pretty(&ReorientReport::from(&r)))?;
            }
            println!("rotated by {:.3}° (mode bin {:.1}% of wall area)", r.theta_deg, 100.0 * r.histogram.dominance());
        }
        MeshCommand::Fitwalls { input, seed, slab, threshold, iterations, min_points, hints, output } => {
            let hints: SideHints = match hints {
                Some(p) => read_json(&p)?,
                None => SideHints::default(),
            };
            let params = WallParams { slab_fraction: slab, inlier_threshold: threshold, iterations, seed, min_points, hints };
            let quad = fit_wall_lines(&read_mesh(&input, false)?, &params, exec)?;
            write(&output, to_json_pretty(&quad))?;
            let a = quad.angles_deg();
            println!("corner angles {:.2}° {:.2}° {:.2}° {:.2}°", a[0], a[1], a[2], a[3]);
        }
        MeshCommand::Rectify { input, quad, output, report } => {
            let quad: WallQuad = read_json(&quad)?;
            let r = mesh::rectify(&read_mesh(&input, false)?, &quad, exec)?;
            write_mesh(&output, &r.mesh)?;
            write(&report, to_json_pretty(&RectifyReport::from(&r)))?;
            println!("rectangle {:.3} × {:.3} m", r.rect.width(), r.rect.depth());
        }
        MeshCommand::Register { rect, sim, space, rotation, corner, output } => {
            let rect: RectifyReport = read_json(&rect)?;
            let model = parse_sim(&read_bytes(&sim)?)?;
            let polygon = pipeline::space_polygon(&model, &space)?;
            let t = match register_to_space(&rect.rect, &polygon, rotation, corner) {
                Err(MeshError::RotationRequired { suggestion, ratio_error, ambiguous }) => {
                    let hint = if ambiguous { "the aspect ratios do not decide between 0 and 90" } else { "best aspect match" };
                    bail!(RotationRequired(format!(
                        "choose --rotation 0, 90, 180 or 270 after checking the scan against the plan; \
                         suggested {suggestion} ({hint}, aspect error {:.1}%)",
                        100.0 * ratio_error
                    )));
                }
                other => other?,
            };
            if t.aspect_mismatch() {
                eprintln!("warning: aspect ratios differ by {:.1}%", 100.0 * t.aspect_error);
            }
            write(&output, to_json_pretty(&t))?;
            println!("scale {:.4} × {:.4} px/m, rotation {}", t.scale_x, t.scale_z, t.rotation);
        }
        MeshCommand::Superpixel { input, k, min_size, output, topdown, pixels_per_metre } => {
            let mesh = read_mesh(&input, false)?;
            let labels = superpixelate(&mesh, &SegmentationParams { k, min_size }, exec)?;
            write(&output, labels_csv(&labels))?;
            if let Some(png) = topdown {
                let (img, legend) = topdown_raster(&mesh, &labels, pixels_per_metre)?;
                write(&png, encode_png(&img))?;
                write(&png.with_extension("json"), to_json_pretty(&legend))?;
            }
            println!("{} super-pixels", mesh::segment_count(&labels));
        }
        MeshCommand::Boxes { input, labels, assignments, transform, output } => {
            let mesh = read_mesh(&input, false)?;
            let labels = parse_labels_csv(&read_text(&labels)?)?;
            let assignments = Assignments::from_toml(&read_text(&assignments)?)?;
            let t: RegistrationTransform = read_json(&transform)?;
            let boxes = object_boxes(&assign_objects(&mesh, &labels, &assignments)?, &t)?;
            write(&output, to_json_pretty(&boxes))?;
            println!("{} boxes", boxes.len());
        }
    }
    Ok(())
}

/// Registration needs a human decision; the binary exits with status 2.
#[derive(Debug)]
pub struct RotationRequired(pub String);

impl std::fmt::Display for RotationRequired {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RotationRequired {}

/// Process exit status for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<RotationRequired>().is_some() {
        2
    } else {
        1
    }
}
