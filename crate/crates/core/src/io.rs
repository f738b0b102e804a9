//! File formats.
//!
//! Shapes are read from CSV or a subset of Wavefront OBJ. Results are written
//! as CSV tables plus a JSON summary. Floats are written in Rust's shortest
//! round-trip form, so every value parses back to the identical `f64`.
//!
//! Shape CSV: a header `x,y,z` optionally followed by any of `leaflet`,
//! `boundary`, `weight`, then one row per point. A triangle section may follow
//! after a blank line: a header `i,j,k` and one row of zero-based indices per
//! triangle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::admm::{IterationRecord, RegistrationResult, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::strain::StrainField;
use crate::trajectory::Trajectory;
use crate::vec3::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFormat {
    Csv,
    Obj,
}

impl ShapeFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(ShapeFormat::Csv),
            Some("obj") => Ok(ShapeFormat::Obj),
            _ => Err(Error::invalid(format!(
                "cannot infer shape format of {} (expected .csv or .obj)",
                path.display()
            ))),
        }
    }
}

/// Parsing options for shape files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Split OBJ polygons with more than three vertices into triangle fans.
    pub fan_triangulate: bool,
}

/// Shortest decimal form that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number {:?}", field.trim())))
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("invalid index {:?}", field.trim())))
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(parse_err(line, format!("invalid boolean {other:?}"))),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_shape(path: &Path, options: ReadOptions) -> Result<Shape> {
    let format = ShapeFormat::from_path(path)?;
    let text = read_text(path)?;
    parse_shape(&text, format, options)
}

pub fn write_shape(shape: &Shape, path: &Path) -> Result<()> {
    let format = ShapeFormat::from_path(path)?;
    write_text(path, &format_shape(shape, format))
}

pub fn parse_shape(text: &str, format: ShapeFormat, options: ReadOptions) -> Result<Shape> {
    match format {
        ShapeFormat::Csv => parse_shape_csv(text),
        ShapeFormat::Obj => parse_obj(text, options),
    }
}

pub fn format_shape(shape: &Shape, format: ShapeFormat) -> String {
    match format {
        ShapeFormat::Csv => format_shape_csv(shape),
        ShapeFormat::Obj => format_obj(shape),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Column {
    Leaflet,
    Boundary,
    Weight,
}

fn parse_shape_csv(text: &str) -> Result<Shape> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_err(1, "empty shape file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
    if names.len() < 3 || names[..3] != ["x", "y", "z"] {
        return Err(parse_err(header_line, "header must start with x,y,z"));
    }
    let mut extra = Vec::new();
    for name in &names[3..] {
        let col = match name.as_str() {
            "leaflet" => Column::Leaflet,
            "boundary" => Column::Boundary,
            "weight" => Column::Weight,
            other => return Err(parse_err(header_line, format!("unknown column {other:?}"))),
        };
        if extra.contains(&col) {
            return Err(parse_err(header_line, format!("duplicate column {name:?}")));
        }
        extra.push(col);
    }

    let mut points = Vec::new();
    let mut leaflet = Vec::new();
    let mut boundary = Vec::new();
    let mut weights = Vec::new();
    let mut triangles = Vec::new();
    let mut in_faces = false;
    let mut expect_face_header = false;
    for (no, line) in lines {
        if line.trim().is_empty() {
            if !in_faces {
                expect_face_header = true;
            }
            continue;
        }
        if expect_face_header {
            let h: Vec<String> = line.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
            if h != ["i", "j", "k"] {
                return Err(parse_err(no, "expected triangle header i,j,k after a blank line"));
            }
            in_faces = true;
            expect_face_header = false;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if in_faces {
            if fields.len() != 3 {
                return Err(parse_err(no, format!("expected 3 indices, found {}", fields.len())));
            }
            let t = [parse_usize(fields[0], no)?, parse_usize(fields[1], no)?, parse_usize(fields[2], no)?];
            if t.iter().any(|&i| i >= points.len()) {
                return Err(parse_err(no, format!("triangle index out of range (m = {})", points.len())));
            }
            triangles.push(t);
            continue;
        }
        if fields.len() != names.len() {
            return Err(parse_err(no, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let p = [parse_f64(fields[0], no)?, parse_f64(fields[1], no)?, parse_f64(fields[2], no)?];
        if !p.iter().all(|v| v.is_finite()) {
            return Err(parse_err(no, "coordinates must be finite"));
        }
        points.push(p);
        for (col, field) in extra.iter().zip(&fields[3..]) {
            match col {
                Column::Leaflet => leaflet.push(
                    field
                        .trim()
                        .parse::<i64>()
                        .map_err(|_| parse_err(no, format!("invalid leaflet id {:?}", field.trim())))?,
                ),
                Column::Boundary => boundary.push(parse_bool(field, no)?),
                Column::Weight => weights.push(parse_f64(field, no)?),
            }
        }
    }
    let mut shape = Shape::new(points)?;
    if extra.contains(&Column::Leaflet) {
        shape = shape.with_leaflet(leaflet)?;
    }
    if extra.contains(&Column::Boundary) {
        shape = shape.with_boundary(boundary)?;
    }
    if extra.contains(&Column::Weight) {
        shape = shape.with_weights(weights)?;
    }
    if in_faces {
        shape = shape.with_triangles(triangles)?;
    }
    Ok(shape)
}

fn has_uniform_weights(shape: &Shape) -> bool {
    let u = 1.0 / shape.len() as f64;
    shape.weights().iter().all(|w| *w == u)
}

fn format_shape_csv(shape: &Shape) -> String {
    let mut out = String::from("x,y,z");
    let leaflet = shape.leaflet();
    let boundary = shape.boundary();
    let weights = (!has_uniform_weights(shape)).then(|| shape.weights());
    if leaflet.is_some() {
        out.push_str(",leaflet");
    }
    if boundary.is_some() {
        out.push_str(",boundary");
    }
    if weights.is_some() {
        out.push_str(",weight");
    }
    out.push('\n');
    for (k, p) in shape.points().iter().enumerate() {
        let _ = write!(out, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
        if let Some(l) = leaflet {
            let _ = write!(out, ",{}", l[k]);
        }
        if let Some(b) = boundary {
            out.push_str(if b[k] { ",1" } else { ",0" });
        }
        if let Some(w) = weights {
            let _ = write!(out, ",{}", fmt_f64(w[k]));
        }
        out.push('\n');
    }
    if let Some(tris) = shape.triangles() {
        out.push_str("\ni,j,k\n");
        for t in tris {
            let _ = writeln!(out, "{},{},{}", t[0], t[1], t[2]);
        }
    }
    out
}

fn parse_obj(text: &str, options: ReadOptions) -> Result<Shape> {
    let mut points: Vec<Point> = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                // an optional fourth (w) component is ignored
                if coords.len() != 3 && coords.len() != 4 {
                    return Err(parse_err(no, format!("vertex needs 3 coordinates, found {}", coords.len())));
                }
                let p = [parse_f64(coords[0], no)?, parse_f64(coords[1], no)?, parse_f64(coords[2], no)?];
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(parse_err(no, "coordinates must be finite"));
                }
                points.push(p);
            }
            Some("f") => {
                let idx = tokens
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        first
                            .parse::<i64>()
                            .map_err(|_| parse_err(no, format!("invalid face index {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(no, "face needs at least 3 vertices"));
                }
                if idx.len() > 3 && !options.fan_triangulate {
                    return Err(parse_err(
                        no,
                        format!("face with {} vertices (enable fan triangulation to split polygons)", idx.len()),
                    ));
                }
                faces.push((no, idx));
            }
            Some("vn" | "vt" | "o" | "g" | "s" | "mtllib" | "usemtl") => {}
            Some(other) => return Err(parse_err(no, format!("unsupported record {other:?}"))),
            None => {}
        }
    }
    let m = points.len();
    let mut triangles = Vec::new();
    for (no, idx) in faces {
        let resolved = idx
            .iter()
            .map(|&i| {
                let r = if i > 0 { i - 1 } else { m as i64 + i };
                if i == 0 || r < 0 || r >= m as i64 {
                    Err(parse_err(no, format!("face index {i} out of range (m = {m})")))
                } else {
                    Ok(r as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for k in 1..resolved.len() - 1 {
            triangles.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }
    let shape = Shape::new(points)?;
    if triangles.is_empty() {
        Ok(shape)
    } else {
        shape.with_triangles(triangles)
    }
}

fn format_obj(shape: &Shape) -> String {
    let mut out = String::new();
    for p in shape.points() {
        let _ = writeln!(out, "v {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    for t in shape.triangles().unwrap_or(&[]) {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// A numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a CSV file whose fields are all numeric.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = read_text(path)?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate();
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(parse_err(1, "empty table")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_f64(f, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(parse_err(i + 1, format!("expected {} fields, found {}", header.len(), row.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn format_trajectory(t: &Trajectory, pad_blocks: usize) -> String {
    let mut out = String::from("time_index,point_index,x,y,z\n");
    for j in 0..t.block_count() {
        for (k, p) in t.block_points(j).iter().enumerate() {
            let _ = writeln!(out, "{j},{k},{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
        }
    }
    for j in t.block_count()..t.block_count() + pad_blocks {
        for k in 0..t.points_per_block() {
            let _ = writeln!(out, "{j},{k},0.0,0.0,0.0");
        }
    }
    out
}

pub const CONVERGENCE_COLUMNS: [&str; 9] = [
    "iter",
    "hausdorff_censored",
    "hausdorff_rel",
    "primal_norm",
    "primal_rel",
    "dual_norm",
    "dual_rel",
    "t_kinetic_s",
    "t_distance_s",
];

pub fn format_convergence(log: &[IterationRecord]) -> String {
    let frames = log.first().map_or(0, |r| r.frame_hausdorff.len());
    let mut out = CONVERGENCE_COLUMNS.join(",");
    for i in 1..=frames {
        let _ = write!(out, ",hausdorff_frame_{i}");
    }
    out.push('\n');
    for r in log {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.hausdorff_censored),
            fmt_f64(r.hausdorff_rel),
            fmt_f64(r.primal_norm),
            fmt_f64(r.primal_rel),
            fmt_f64(r.dual_norm),
            fmt_f64(r.dual_rel),
            fmt_f64(r.t_kinetic_s),
            fmt_f64(r.t_distance_s)
        );
        for v in &r.frame_hausdorff {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn format_strain(strain: Option<&StrainField>) -> String {
    let mut out = String::from("vertex_index,p_iso\n");
    if let Some(s) = strain {
        for (k, p) in s.per_vertex_p.iter().enumerate() {
            let _ = writeln!(out, "{k},{}", fmt_f64(*p));
        }
    }
    out
}

pub fn format_triangle_strain(strain: &StrainField) -> String {
    let mut out = String::from("triangle_index,q_iso,degenerate\n");
    for (t, (q, d)) in strain.per_triangle_q.iter().zip(&strain.degenerate).enumerate() {
        let _ = writeln!(out, "{t},{},{}", fmt_f64(*q), u8::from(*d));
    }
    out
}

/// Strain files for a standalone strain report.
pub fn write_strain(strain: &StrainField, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let vertex = out_dir.join("strain.csv");
    let triangle = out_dir.join("strain_triangles.csv");
    write_text(&vertex, &format_strain(Some(strain)))?;
    write_text(&triangle, &format_triangle_strain(strain))?;
    Ok(vec![vertex, triangle])
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn summary_json(result: &RegistrationResult) -> Value {
    let last = result.log.last();
    let pct = if result.initial_hausdorff > 0.0 {
        100.0 * result.final_hausdorff / result.initial_hausdorff
    } else {
        0.0
    };
    json!({
        "config": result.config,
        "sigma_v": result.sigma_v,
        "sigma_s": result.sigma_s,
        "eps_haus": result.eps_haus,
        "termination": result.termination.condition,
        "termination_fired": result.termination.fired,
        "termination_detail": result.termination.detail,
        "iterations": result.iterations(),
        "data_blocks": result.data_blocks,
        "points": result.control.points_per_block(),
        "initial_hausdorff": result.initial_hausdorff,
        "final_hausdorff": result.final_hausdorff,
        "final_hausdorff_pct": pct,
        "final_hausdorff_faithful": result.final_hausdorff_faithful,
        "frozen_faithful_gap": result.frozen_faithful_gap,
        "kinetic_energy": result.kinetic_energy,
        "final_primal_norm": last.map(|r| r.primal_norm),
        "final_dual_norm": last.map(|r| r.dual_norm),
        "runtime_s": result.runtime_s,
    })
}

/// Writes `trajectory.csv`, `control.csv`, `convergence.csv`, `strain.csv`
/// and `summary.json` into `out_dir`, creating it if needed.
///
/// `control.csv` lists `n + 1` time indices like the state; the control at the
/// last time point does not enter the flow and is written as zeros.
pub fn write_result(result: &RegistrationResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let files = [
        ("trajectory.csv", format_trajectory(&result.state, 0)),
        ("control.csv", format_trajectory(&result.control, 1)),
        ("convergence.csv", format_convergence(&result.log)),
        ("strain.csv", format_strain(result.strain.as_ref())),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
    }
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary_json(result)).expect("summary is valid JSON") + "\n";
    write_text(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// Reads a solver configuration from either a bare config object or a
/// `summary.json` (its `config` field).
pub fn read_config(path: &Path) -> Result<SolverConfig> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let cfg = match value {
        Value::Object(mut map) if map.contains_key("config") => map.remove("config").unwrap_or(Value::Null),
        other => other,
    };
    serde_json::from_value(cfg).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

/// One row of a bandwidth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau_v: f64,
    pub tau_s: f64,
    pub final_distance: f64,
    pub final_distance_pct: f64,
    pub primal_norm: f64,
    pub primal_rel: f64,
    pub dual_norm: f64,
    pub dual_rel: f64,
    pub runtime_s: f64,
    /// Termination condition, or `error: ...` for a failed cell.
    pub status: String,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "tau_v",
    "tau_s",
    "final_distance",
    "final_distance_pct",
    "primal_norm",
    "primal_rel",
    "dual_norm",
    "dual_rel",
    "runtime_s",
    "status",
];

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        // keep the status a single CSV field
        let status = r.status.replace([',', '\n', '\r'], " ");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.tau_v),
            fmt_f64(r.tau_s),
            fmt_f64(r.final_distance),
            fmt_f64(r.final_distance_pct),
            fmt_f64(r.primal_norm),
            fmt_f64(r.primal_rel),
            fmt_f64(r.dual_norm),
            fmt_f64(r.dual_rel),
            fmt_f64(r.runtime_s),
            status
        );
    }
    out
}

pub fn write_sweep(rows: &[SweepRow], out_dir: &Path) -> Result<PathBuf> {
    create_dir(out_dir)?;
    let path = out_dir.join("sweep.csv");
    write_text(&path, &format_sweep(rows))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_minimal() {
        let s = parse_shape("x,y,z\n0,0,0\n1,0,0", ShapeFormat::Csv, ReadOptions::default()).unwrap();
        assert_eq!(s.points(), &[[0.0; 3], [1.0, 0.0, 0.0]]);
        assert!(s.triangles().is_none());
        assert_eq!(s.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn csv_annotations_and_faces() {
        let text = "x,y,z,leaflet,boundary,weight\n0,0,0,1,1,0.25\n1,0,0,1,0,0.25\n0,1,0,2,true,0.5\n\ni,j,k\n0,1,2\n";
        let s = parse_shape(text, ShapeFormat::Csv, ReadOptions::default()).unwrap();
        assert_eq!(s.leaflet(), Some(&[1, 1, 2][..]));
        assert_eq!(s.boundary(), Some(&[true, false, true][..]));
        assert_eq!(s.weights(), &[0.25, 0.25, 0.5]);
        assert_eq!(s.triangles(), Some(&[[0, 1, 2]][..]));
        let text = format_shape(&s, ShapeFormat::Csv);
        assert!(text.starts_with("x,y,z,leaflet,boundary,weight\n0.0,0.0,0.0,1,1,0.25\n"));
        assert_eq!(parse_shape(&text, ShapeFormat::Csv, ReadOptions::default()).unwrap(), s);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = parse_shape("x,y,z\n0,0,0\n1,zero,0\n", ShapeFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_shape("x,y,z\n0,0\n", ShapeFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_shape("a,b,c\n", ShapeFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_shape("x,y,z\n0,0,0\n\ni,j,k\n0,1,2\n", ShapeFormat::Csv, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }));
    }

    #[test]
    fn obj_triangle_and_fan() {
        let s = parse_shape("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", ShapeFormat::Obj, ReadOptions::default()).unwrap();
        assert_eq!(s.triangles(), Some(&[[0, 1, 2]][..]));
        let quad = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n";
        let err = parse_shape(quad, ShapeFormat::Obj, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 6, .. }));
        let s = parse_shape(quad, ShapeFormat::Obj, ReadOptions { fan_triangulate: true }).unwrap();
        assert_eq!(s.triangles(), Some(&[[0, 1, 2], [0, 2, 3]][..]));
        let s = parse_shape("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n", ShapeFormat::Obj, ReadOptions::default()).unwrap();
        assert_eq!(s.triangles(), Some(&[[0, 1, 2]][..]));
        let err = parse_shape("v 0 0 0\nf 1 2 3\n", ShapeFormat::Obj, ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e20, 123456.789, f64::MIN_POSITIVE, -0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn table_parsing() {
        let t = parse_table("a,b\n1,2\n3.5,-1e-3\n").unwrap();
        assert_eq!(t.column("b").unwrap(), vec![2.0, -1e-3]);
        assert!(parse_table("a,b\n1\n").is_err());
    }

    #[test]
    fn sweep_status_stays_one_field() {
        let row = SweepRow {
            tau_v: 6.0,
            tau_s: 1.0,
            final_distance: 0.5,
            final_distance_pct: 50.0,
            primal_norm: 0.1,
            primal_rel: 1.0,
            dual_norm: 0.2,
            dual_rel: 1.0,
            runtime_s: 0.0,
            status: "error: a, b".into(),
        };
        let text = format_sweep(&[row]);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), SWEEP_COLUMNS.len());
    }
}
