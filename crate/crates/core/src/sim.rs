//! The `sim` interchange format.
//!
//! A PLY-like ASCII document: a header declaring element counts, one
//! `x y` line per wall corner, one `x y` line per entrance corner, then one
//! brace-delimited record per space:
//!
//! ```text
//! sim 1.0
//! comment image_size 800 600
//! element wall_corner 27
//! element entrance_corner 2
//! element space 1
//! end_header
//! 10.000 20.000
//! ...
//! {s2 0 217 5 1 3 27 19 12 1 1 1 1 0 e2 3 1 2}
//! ```
//!
//! A space record is `{id type name n <n corner indices> <n wall flags>
//! [entrance quadruples]}` where flag `i` covers the edge from corner `i` to
//! corner `i+1 (mod n)` and every quadruple is `entrance-id wall-index
//! endpoint endpoint`. All indices are 1-based; entrance endpoints index the
//! entrance-corner list.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::geom::{round_to, Point2};
use crate::trace::{
    Corner, Entrance, EntranceCorner, FloorModel, Space, SpaceType, TraceError,
};

pub const MAGIC: &str = "sim 1.0";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("line {line}, column {column}: expected {expected}")]
    Syntax { line: usize, column: usize, expected: String },
    #[error("space {space}: index {index} is out of range")]
    Index { space: String, index: u64 },
    #[error("space {space}: {corners} corners but {flags} wall flags")]
    FlagCountMismatch { space: String, corners: usize, flags: usize },
    #[error("invalid model: {0}")]
    InvalidModel(#[from] TraceError),
}

fn syntax(line: usize, column: usize, expected: impl Into<String>) -> SimError {
    SimError::Syntax { line, column, expected: expected.into() }
}

/// One `{...}` space record with indices as written in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceRecord {
    pub id: String,
    pub type_code: u8,
    pub name: String,
    /// 1-based wall-corner indices, clockwise.
    pub corners: Vec<u32>,
    pub walls: Vec<bool>,
    pub entrances: Vec<EntranceRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntranceRecord {
    pub id: String,
    /// 1-based edge index.
    pub wall_index: u32,
    /// 1-based entrance-corner indices.
    pub endpoints: (u32, u32),
}

impl SpaceRecord {
    /// Wall-corner pairs joined by a wall.
    pub fn wall_pairs(&self) -> Vec<(u32, u32)> {
        let n = self.corners.len();
        (0..n)
            .filter(|&i| self.walls[i])
            .map(|i| (self.corners[i], self.corners[(i + 1) % n]))
            .collect()
    }

    /// Parses a single record. `line` is used for error positions.
    pub fn parse(text: &str, line: usize) -> Result<SpaceRecord, SimError> {
        let t = text.trim_end();
        let body = t
            .strip_prefix('{')
            .ok_or_else(|| syntax(line, 1, "'{' opening a space record"))?;
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| syntax(line, t.chars().count().max(1), "'}' closing the space record"))?;

        // (token, 1-based column)
        let tokens: Vec<(&str, usize)> = body
            .split(' ')
            .scan(2usize, |col, tok| {
                let at = *col;
                *col += tok.chars().count() + 1;
                Some((tok, at))
            })
            .filter(|(tok, _)| !tok.is_empty())
            .collect();
        let end_col = t.chars().count();
        let mut it = tokens.iter().copied().peekable();
        let mut next = |what: &str| it.next().ok_or_else(|| syntax(line, end_col, what.to_string()));

        let (id, _) = next("space id")?;
        let (ty, ty_col) = next("space type code")?;
        let type_code: u8 = ty
            .parse()
            .ok()
            .filter(|c| SpaceType::from_code(*c).is_some())
            .ok_or_else(|| syntax(line, ty_col, "space type code 0-4"))?;
        let (name, _) = next("space name")?;
        let (n_tok, n_col) = next("corner count")?;
        let n: usize = n_tok.parse().map_err(|_| syntax(line, n_col, "corner count"))?;

        let rest: Vec<(&str, usize)> = it.collect();
        if rest.len() < n {
            return Err(syntax(line, end_col, format!("{n} corner indices")));
        }
        let mut corners = Vec::with_capacity(n);
        for &(tok, col) in &rest[..n] {
            corners.push(tok.parse::<u32>().map_err(|_| syntax(line, col, "corner index"))?);
        }
        let rest = &rest[n..];
        let flag_count = rest
            .iter()
            .take_while(|(tok, _)| *tok == "0" || *tok == "1")
            .count();
        if flag_count != n {
            return Err(SimError::FlagCountMismatch { space: id.to_string(), corners: n, flags: flag_count });
        }
        let walls: Vec<bool> = rest[..n].iter().map(|(tok, _)| *tok == "1").collect();
        let rest = &rest[n..];

        let mut entrances = Vec::new();
        for quad in rest.chunks(4) {
            let (eid, eid_col) = quad[0];
            if eid.starts_with(|c: char| c.is_ascii_digit()) {
                return Err(syntax(line, eid_col, "entrance id"));
            }
            if quad.len() < 4 {
                return Err(syntax(line, end_col, "entrance quadruple (id wall endpoint endpoint)"));
            }
            let num = |(tok, col): (&str, usize), what: &str| {
                tok.parse::<u32>().map_err(|_| syntax(line, col, what.to_string()))
            };
            entrances.push(EntranceRecord {
                id: eid.to_string(),
                wall_index: num(quad[1], "entrance wall index")?,
                endpoints: (num(quad[2], "entrance endpoint index")?, num(quad[3], "entrance endpoint index")?),
            });
        }
        Ok(SpaceRecord {
            id: id.to_string(),
            type_code,
            name: name.to_string(),
            corners,
            walls,
            entrances,
        })
    }
}

impl fmt::Display for SpaceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{} {} {} {}", self.id, self.type_code, self.name, self.corners.len())?;
        for c in &self.corners {
            write!(f, " {c}")?;
        }
        for w in &self.walls {
            write!(f, " {}", u8::from(*w))?;
        }
        for e in &self.entrances {
            write!(f, " {} {} {} {}", e.id, e.wall_index, e.endpoints.0, e.endpoints.1)?;
        }
        f.write_str("}")
    }
}

/// A parsed document, before indices are resolved into a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDocument {
    pub image_size: Option<(f64, f64)>,
    pub wall_corners: Vec<Point2>,
    pub entrance_corners: Vec<Point2>,
    pub spaces: Vec<SpaceRecord>,
}

fn fmt_coord(v: f64) -> String {
    format!("{:.3}", round_to(v, 3))
}

impl fmt::Display for SimDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{MAGIC}")?;
        if let Some((w, h)) = self.image_size {
            writeln!(f, "comment image_size {w} {h}")?;
        }
        writeln!(f, "element wall_corner {}", self.wall_corners.len())?;
        writeln!(f, "element entrance_corner {}", self.entrance_corners.len())?;
        writeln!(f, "element space {}", self.spaces.len())?;
        writeln!(f, "end_header")?;
        for p in self.wall_corners.iter().chain(&self.entrance_corners) {
            writeln!(f, "{} {}", fmt_coord(p.x), fmt_coord(p.y))?;
        }
        for s in &self.spaces {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn entrance_sort_key(id: &str) -> (u64, &str) {
    let digits: String = id.chars().skip_while(|c| !c.is_ascii_digit()).collect();
    (digits.parse().unwrap_or(u64::MAX), id)
}

impl SimDocument {
    /// Builds the document for a validated model. Corners are listed in id
    /// order and referenced by their 1-based position.
    pub fn from_model(model: &FloorModel) -> Result<SimDocument, SimError> {
        model.validate()?;
        let mut corners: Vec<&Corner> = model.corners.iter().collect();
        corners.sort_by_key(|c| c.id);
        let corner_index: BTreeMap<u32, u32> =
            corners.iter().enumerate().map(|(i, c)| (c.id, i as u32 + 1)).collect();
        let mut ecorners: Vec<&EntranceCorner> = model.entrance_corners.iter().collect();
        ecorners.sort_by_key(|c| c.id);
        let ecorner_index: BTreeMap<u32, u32> =
            ecorners.iter().enumerate().map(|(i, c)| (c.id, i as u32 + 1)).collect();

        let spaces = model
            .spaces
            .iter()
            .map(|s| {
                let mut entrances: Vec<&Entrance> = s.entrances.iter().collect();
                entrances.sort_by(|a, b| entrance_sort_key(&a.id).cmp(&entrance_sort_key(&b.id)));
                SpaceRecord {
                    id: s.id.clone(),
                    type_code: s.space_type.code(),
                    name: s.name.clone(),
                    corners: s.corners.iter().map(|c| corner_index[c]).collect(),
                    walls: s.wall_flags.clone(),
                    entrances: entrances
                        .into_iter()
                        .map(|e| EntranceRecord {
                            id: e.id.clone(),
                            wall_index: e.wall_index,
                            endpoints: (ecorner_index[&e.endpoints.0], ecorner_index[&e.endpoints.1]),
                        })
                        .collect(),
                }
            })
            .collect();

        Ok(SimDocument {
            image_size: Some((model.image_width, model.image_height)),
            wall_corners: corners.iter().map(|c| c.point()).collect(),
            entrance_corners: ecorners.iter().map(|c| c.point()).collect(),
            spaces,
        })
    }

    pub fn parse(bytes: &[u8]) -> Result<SimDocument, SimError> {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            let ok = &bytes[..e.valid_up_to()];
            let line = ok.iter().filter(|b| **b == b'\n').count() + 1;
            let col = ok.iter().rev().take_while(|b| **b != b'\n').count() + 1;
            syntax(line, col, "UTF-8 text")
        })?;
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
        let mut next_line = |what: &str| -> Result<(usize, &str), SimError> {
            lines.next().ok_or_else(|| syntax(text.split('\n').count(), 1, what.to_string()))
        };

        let (ln, magic) = next_line("magic line")?;
        if magic != MAGIC {
            return Err(syntax(ln, 1, format!("magic line `{MAGIC}`")));
        }

        let mut image_size = None;
        let (mut ln, mut line) = next_line("header")?;
        while let Some(rest) = line.strip_prefix("comment") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.first() == Some(&"image_size") {
                let dims = (parts.len() == 3)
                    .then(|| Some((parts[1].parse::<f64>().ok()?, parts[2].parse::<f64>().ok()?)))
                    .flatten()
                    .filter(|(w, h)| w.is_finite() && h.is_finite() && *w >= 0.0 && *h >= 0.0)
                    .ok_or_else(|| syntax(ln, 9, "image_size <width> <height>"))?;
                image_size = Some(dims);
            }
            (ln, line) = next_line("header")?;
        }

        let mut counts = [0usize; 3];
        for (k, name) in ["wall_corner", "entrance_corner", "space"].iter().enumerate() {
            if k > 0 {
                (ln, line) = next_line("element declaration")?;
            }
            let expected = format!("element {name} <count>");
            let count = line
                .strip_prefix("element ")
                .and_then(|r| r.strip_prefix(name))
                .and_then(|r| r.strip_prefix(' '))
                .and_then(|r| r.parse::<usize>().ok())
                .ok_or_else(|| syntax(ln, 1, expected))?;
            counts[k] = count;
        }
        let (ln, line) = next_line("end_header")?;
        if line != "end_header" {
            return Err(syntax(ln, 1, "end_header"));
        }

        let mut read_points = |count: usize, what: &str| -> Result<Vec<Point2>, SimError> {
            let mut pts = Vec::new();
            for _ in 0..count {
                let (ln, line) = next_line(what)?;
                let mut parts = line.split(' ');
                let mut coord = |col: usize| -> Result<f64, SimError> {
                    parts
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| syntax(ln, col, format!("{what} coordinate")))
                };
                let x = coord(1)?;
                let y = coord(line.find(' ').map_or(1, |i| i + 2))?;
                if parts.next().is_some() {
                    return Err(syntax(ln, line.len(), "end of line"));
                }
                pts.push(Point2::new(x, y));
            }
            Ok(pts)
        };
        let wall_corners = read_points(counts[0], "wall corner")?;
        let entrance_corners = read_points(counts[1], "entrance corner")?;

        let mut spaces = Vec::new();
        for _ in 0..counts[2] {
            let (ln, line) = next_line("space record")?;
            spaces.push(SpaceRecord::parse(line, ln)?);
        }
        for (ln, line) in lines {
            if !line.is_empty() {
                return Err(syntax(ln, 1, "end of file"));
            }
        }
        Ok(SimDocument { image_size, wall_corners, entrance_corners, spaces })
    }

    /// Resolves indices into a validated model. Corner ids become the
    /// 1-based list positions.
    pub fn into_model(self) -> Result<FloorModel, SimError> {
        let (w, h) = self.image_size.unwrap_or((0.0, 0.0));
        let mut model = FloorModel::new(w, h);
        model.corners = self
            .wall_corners
            .iter()
            .enumerate()
            .map(|(i, p)| Corner { id: i as u32 + 1, x: p.x, y: p.y, source: (0, 0) })
            .collect();
        let mut hosts: Vec<Option<(String, u32)>> = vec![None; self.entrance_corners.len()];
        let mut max_entrance = 0u64;

        for rec in &self.spaces {
            let space_type = SpaceType::from_code(rec.type_code).expect("checked while parsing");
            for &c in &rec.corners {
                if c == 0 || c as usize > self.wall_corners.len() {
                    return Err(SimError::Index { space: rec.id.clone(), index: c as u64 });
                }
            }
            let n = rec.corners.len() as u32;
            let mut entrances = Vec::new();
            for e in &rec.entrances {
                if e.wall_index == 0 || e.wall_index > n {
                    return Err(SimError::Index { space: rec.id.clone(), index: e.wall_index as u64 });
                }
                for ep in [e.endpoints.0, e.endpoints.1] {
                    if ep == 0 || ep as usize > self.entrance_corners.len() {
                        return Err(SimError::Index { space: rec.id.clone(), index: ep as u64 });
                    }
                    hosts[ep as usize - 1] = Some((rec.id.clone(), e.wall_index));
                }
                max_entrance = max_entrance.max(entrance_sort_key(&e.id).0.min(u32::MAX as u64 - 1));
                entrances.push(Entrance { id: e.id.clone(), wall_index: e.wall_index, endpoints: e.endpoints });
            }
            model.spaces.push(Space {
                id: rec.id.clone(),
                space_type,
                name: rec.name.clone(),
                corners: rec.corners.clone(),
                wall_flags: rec.walls.clone(),
                entrances,
            });
        }
        model.entrance_corners = self
            .entrance_corners
            .iter()
            .zip(hosts)
            .enumerate()
            .map(|(i, (p, host))| EntranceCorner {
                id: i as u32 + 1,
                x: p.x,
                y: p.y,
                host_wall: host.unwrap_or_default(),
            })
            .collect();
        model.next_corner_id = model.corners.len() as u32 + 1;
        model.next_entrance_id = max_entrance as u32 + 1;
        model.validate()?;
        Ok(model)
    }
}

/// Serializes a model. Output is deterministic.
pub fn write_sim(model: &FloorModel) -> Result<String, SimError> {
    Ok(SimDocument::from_model(model)?.to_string())
}

/// Parses and validates a sim document.
pub fn parse_sim(bytes: &[u8]) -> Result<FloorModel, SimError> {
    SimDocument::parse(bytes)?.into_model()
}
