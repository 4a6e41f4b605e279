//! Point-cloud file I/O: OBJ (vertices), ASCII PLY, and bare XYZ.
//!
//! Coordinates are written with 9 significant digits, which uniquely
//! identifies every `f32`, so save → load round-trips are bit-exact.
//! All writes go through [`write_atomic`]: a temp file in the target
//! directory followed by a rename, so readers never observe a partially
//! written file.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

use super::cloud::{Point3, PointCloud};

/// Supported point-cloud file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    /// Wavefront OBJ; only `v` records are read, everything else ignored.
    Obj,
    /// ASCII PLY with at least `x y z` float vertex properties.
    Ply,
    /// Bare whitespace-separated `x y z` lines; `#` comments allowed.
    Xyz,
}

impl CloudFormat {
    /// Infer the format from a file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(CloudFormat::Obj),
            "ply" => Ok(CloudFormat::Ply),
            "xyz" | "txt" | "pts" => Ok(CloudFormat::Xyz),
            other => Err(Error::Config(format!(
                "cannot infer point-cloud format from extension {:?} (use obj, ply, or xyz)",
                other
            ))),
        }
    }
}

/// Format an `f32` with 9 significant digits (scientific notation).
///
/// Nine digits uniquely identify every finite `f32`, so parsing the
/// output recovers the original bits.
pub fn format_sig9(v: f32) -> String {
    format!("{:.8e}", v)
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write `content` to `path` atomically: temp file in the same directory,
/// flush, then rename over the target.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("not a file path: {}", path.display()))))?;
    let tmp_name = format!(
        ".{}.tmp.{}.{}",
        file_name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    std::fs::write(&tmp_path, content)?;
    match std::fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp_path);
            Err(Error::Io(e))
        }
    }
}

fn parse_coord(path: &Path, line_no: usize, tok: &str) -> Result<f32> {
    let v: f32 = tok.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        line: line_no,
        msg: format!("invalid coordinate {:?}", tok),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: line_no,
            msg: format!("non-finite coordinate {:?}", tok),
        });
    }
    Ok(v)
}

fn parse_obj(path: &Path, text: &str) -> Result<PointCloud> {
    let mut pts: Vec<Point3> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("v ").or_else(|| line.strip_prefix("v\t")) {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            // OBJ vertices are x y z with an optional w we ignore.
            if toks.len() != 3 && toks.len() != 4 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("vertex needs 3 coordinates, found {}", toks.len()),
                });
            }
            pts.push([
                parse_coord(path, line_no, toks[0])?,
                parse_coord(path, line_no, toks[1])?,
                parse_coord(path, line_no, toks[2])?,
            ]);
        }
        // Faces, normals, comments and grouping records are ignored.
    }
    if pts.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "no vertices found".into(),
        });
    }
    PointCloud::new(pts)
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut pts: Vec<Point3> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("expected 3 coordinates, found {}", toks.len()),
            });
        }
        pts.push([
            parse_coord(path, line_no, toks[0])?,
            parse_coord(path, line_no, toks[1])?,
            parse_coord(path, line_no, toks[2])?,
        ]);
    }
    if pts.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "no points found".into(),
        });
    }
    PointCloud::new(pts)
}

fn perr(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    }
}

fn terr(path: &Path, offset: u64, msg: String) -> Error {
    Error::Truncated {
        path: path.display().to_string(),
        offset,
        msg,
    }
}

fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    // Manual line walk tracking byte offsets so truncation can be located.
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut next_line = |offset: &mut usize, line_no: &mut usize| -> Option<(usize, &str)> {
        if *offset >= text.len() {
            return None;
        }
        let rest = &text[*offset..];
        let (line, consumed) = match rest.find('\n') {
            Some(pos) => (&rest[..pos], pos + 1),
            None => (rest, rest.len()),
        };
        *offset += consumed;
        *line_no += 1;
        Some((*line_no, line.trim_end_matches('\r')))
    };

    let (ln, magic) = next_line(&mut offset, &mut line_no)
        .ok_or_else(|| terr(path, 0, "empty file".into()))?;
    if magic.trim() != "ply" {
        return Err(perr(path, ln, "missing ply magic line".into()));
    }

    let mut vertex_count: Option<usize> = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut in_vertex_element = false;
    let mut saw_format = false;
    let mut header_done = false;

    while let Some((ln, line)) = next_line(&mut offset, &mut line_no) {
        let line = line.trim();
        if line.starts_with("comment") || line.is_empty() {
            continue;
        }
        if let Some(fmt) = line.strip_prefix("format ") {
            if fmt.trim() != "ascii 1.0" {
                return Err(perr(
                    path,
                    ln,
                    format!("unsupported PLY format {:?} (only ascii 1.0)", fmt.trim()),
                ));
            }
            saw_format = true;
        } else if let Some(el) = line.strip_prefix("element ") {
            let toks: Vec<&str> = el.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(perr(path, ln, format!("malformed element declaration {:?}", line)));
            }
            if toks[0] == "vertex" {
                if vertex_count.is_some() {
                    return Err(perr(path, ln, "duplicate vertex element".into()));
                }
                let n: usize = toks[1]
                    .parse()
                    .map_err(|_| perr(path, ln, format!("invalid vertex count {:?}", toks[1])))?;
                vertex_count = Some(n);
                in_vertex_element = true;
            } else {
                // Any other element (face, edge ...) must come after vertex
                // for us to be able to read the vertex block first.
                if vertex_count.is_none() {
                    return Err(perr(
                        path,
                        ln,
                        format!("element {:?} precedes the vertex element", toks[0]),
                    ));
                }
                in_vertex_element = false;
            }
        } else if let Some(prop) = line.strip_prefix("property ") {
            if in_vertex_element {
                let toks: Vec<&str> = prop.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(perr(path, ln, format!("unsupported vertex property {:?}", prop)));
                }
                vertex_props.push(toks[1].to_string());
            }
        } else if line == "end_header" {
            header_done = true;
            break;
        } else {
            return Err(perr(path, ln, format!("unexpected header line {:?}", line)));
        }
    }

    if !header_done {
        return Err(terr(path, offset as u64, "header ended before end_header".into()));
    }
    if !saw_format {
        return Err(perr(path, line_no, "missing format declaration".into()));
    }
    let n = vertex_count.ok_or_else(|| perr(path, line_no, "missing vertex element".into()))?;
    if vertex_props.len() < 3
        || vertex_props[0] != "x"
        || vertex_props[1] != "y"
        || vertex_props[2] != "z"
    {
        return Err(perr(
            path,
            line_no,
            format!("vertex properties must start with x, y, z; found {:?}", vertex_props),
        ));
    }
    if n == 0 {
        return Err(perr(path, line_no, "vertex count is zero".into()));
    }

    let mut pts: Vec<Point3> = Vec::with_capacity(n);
    while pts.len() < n {
        let Some((ln, line)) = next_line(&mut offset, &mut line_no) else {
            return Err(terr(
                path,
                offset as u64,
                format!("expected {} vertices, found {}", n, pts.len()),
            ));
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < vertex_props.len() {
            return Err(perr(
                path,
                ln,
                format!(
                    "vertex row has {} values, header declares {} properties",
                    toks.len(),
                    vertex_props.len()
                ),
            ));
        }
        pts.push([
            parse_coord(path, ln, toks[0])?,
            parse_coord(path, ln, toks[1])?,
            parse_coord(path, ln, toks[2])?,
        ]);
    }
    // Trailing elements (faces etc.) are ignored.
    PointCloud::new(pts)
}

/// Load a point cloud from `path` in the given format.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    match format {
        CloudFormat::Obj => parse_obj(path, &text),
        CloudFormat::Ply => parse_ply(path, &text),
        CloudFormat::Xyz => parse_xyz(path, &text),
    }
}

fn render_obj(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48 + 32);
    let _ = writeln!(out, "# point cloud with {} vertices", cloud.len());
    for p in cloud.points() {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_sig9(p[0]),
            format_sig9(p[1]),
            format_sig9(p[2])
        );
    }
    out
}

fn render_ply(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48 + 160);
    let _ = writeln!(out, "ply");
    let _ = writeln!(out, "format ascii 1.0");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    let _ = writeln!(out, "property float x");
    let _ = writeln!(out, "property float y");
    let _ = writeln!(out, "property float z");
    let _ = writeln!(out, "end_header");
    for p in cloud.points() {
        let _ = writeln!(
            out,
            "{} {} {}",
            format_sig9(p[0]),
            format_sig9(p[1]),
            format_sig9(p[2])
        );
    }
    out
}

fn render_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 46);
    for p in cloud.points() {
        let _ = writeln!(
            out,
            "{} {} {}",
            format_sig9(p[0]),
            format_sig9(p[1]),
            format_sig9(p[2])
        );
    }
    out
}

/// Save a point cloud to `path` in the given format (atomic write).
///
/// Fails on an empty cloud: none of the formats can represent one that
/// would round-trip.
pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud("save_cloud"));
    }
    let text = match format {
        CloudFormat::Obj => render_obj(cloud),
        CloudFormat::Ply => render_ply(cloud),
        CloudFormat::Xyz => render_xyz(cloud),
    };
    write_atomic(path, text.as_bytes())
}
