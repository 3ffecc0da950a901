//! Triangle meshes of graphs, half-turns about vertical lines, periodic
//! assembly and OBJ / binary PLY export.

use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::ScalarField;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("axis point ({x}, {y}) is not on the boundary of the piece")]
    AxisNotOnBoundary { x: f64, y: f64 },
    #[error("piece does not match the {family} family: {reason}")]
    FamilyMismatch { family: &'static str, reason: String },
    #[error("copies must be positive, got ({0}, {1})")]
    InvalidCopies(usize, usize),
    #[error("malformed {format} file: {reason}")]
    Parse { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How one copy of the fundamental piece was produced: the half-turn axes,
/// applied first to last, and the resulting planar map
/// `p ↦ sign·p + offset` from piece coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub piece: usize,
    pub reflections: Vec<[f64; 2]>,
    pub sign: f64,
    pub offset: [f64; 2],
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            piece: 0,
            reflections: Vec::new(),
            sign: 1.0,
            offset: [0.0, 0.0],
        }
    }
}

impl Provenance {
    fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [self.sign * p[0] + self.offset[0], self.sign * p[1] + self.offset[1]]
    }
}

/// Vertices are recomputed from the piece coordinates after every
/// half-turn, so composing a half-turn with itself is exactly the identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Translations leaving the complete surface invariant (metadata only).
    pub periods: Vec<[f64; 3]>,
    /// Boundary polygon of the fundamental piece in the plane, moved along
    /// with the copies; axes must lie on it.
    pub outline: Vec<[f64; 2]>,
    /// One entry per copy.
    pub copies: Vec<Provenance>,
    /// Copy index of every vertex.
    pub vertex_copy: Vec<usize>,
    piece_vertices: Vec<[f64; 3]>,
    piece_outline: Vec<[f64; 2]>,
}

impl SurfaceMesh {
    /// A single piece with no outline.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Self {
        let n = vertices.len();
        Self {
            piece_vertices: vertices.clone(),
            vertices,
            triangles,
            periods: Vec::new(),
            outline: Vec::new(),
            piece_outline: Vec::new(),
            copies: vec![Provenance::default()],
            vertex_copy: vec![0; n],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Replaces the outline, e.g. with the untruncated polygon whose corner
    /// lines the surface is meant to contain.
    pub fn with_outline(mut self, outline: Vec<[f64; 2]>) -> Self {
        // back to piece coordinates (the map is an involution up to offset)
        let map = self.copies.first().cloned().unwrap_or_default();
        self.piece_outline = outline
            .iter()
            .map(|p| [map.sign * (p[0] - map.offset[0]), map.sign * (p[1] - map.offset[1])])
            .collect();
        self.outline = outline;
        self
    }

    fn append(&mut self, other: &SurfaceMesh) {
        let offset = self.vertices.len();
        let copy_offset = self.copies.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.piece_vertices.extend_from_slice(&other.piece_vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        self.copies.extend(other.copies.iter().cloned());
        self.vertex_copy.extend(other.vertex_copy.iter().map(|c| c + copy_offset));
    }
}

/// Mesh of the graph of `u`, one vertex per node; each cell is split along
/// its shorter diagonal in space.
pub fn graph_to_mesh(u: &ScalarField) -> SurfaceMesh {
    let g = u.grid;
    let mut vertices = Vec::with_capacity(g.len());
    for j in 0..g.n_t {
        for i in 0..g.n_s {
            let [x, y] = g.node_xy(i, j);
            vertices.push([x, y, u.get(i, j)]);
        }
    }
    let dist2 = |a: usize, b: usize| {
        let (p, q) = (vertices[a], vertices[b]);
        (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>()
    };
    let mut triangles = Vec::with_capacity(2 * (g.n_s - 1) * (g.n_t - 1));
    for j in 0..g.n_t - 1 {
        for i in 0..g.n_s - 1 {
            let (a, b, c, d) = (g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1));
            if dist2(a, c) <= dist2(b, d) {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    SurfaceMesh::new(vertices, triangles).with_outline(g.domain.corners().to_vec())
}

fn on_outline(outline: &[[f64; 2]], p: [f64; 2]) -> bool {
    let scale = outline
        .iter()
        .map(|q| q[0].abs().max(q[1].abs()))
        .fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    (0..outline.len()).any(|k| {
        let (a, b) = (outline[k], outline[(k + 1) % outline.len()]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1]) <= tol
    })
}

/// Image of the piece under the half-turn about the vertical line through
/// `axis_point`, `(x, y, z) ↦ (2x₀ - x, 2y₀ - y, z)`. The map preserves
/// orientation, so triangles keep their vertex order.
pub fn schwarz_reflect(piece: &SurfaceMesh, axis_point: [f64; 2]) -> Result<SurfaceMesh, SurfaceError> {
    if !on_outline(&piece.outline, axis_point) {
        return Err(SurfaceError::AxisNotOnBoundary {
            x: axis_point[0],
            y: axis_point[1],
        });
    }
    Ok(rotate(piece, axis_point))
}

/// The piece together with its half-turn about `axis_point`, e.g. a
/// pitchfork completed across the line over the origin.
pub fn complete_by_half_turn(piece: &SurfaceMesh, axis_point: [f64; 2]) -> Result<SurfaceMesh, SurfaceError> {
    let mut m = piece.clone();
    m.append(&schwarz_reflect(piece, axis_point)?);
    Ok(m)
}

fn rotate(piece: &SurfaceMesh, c: [f64; 2]) -> SurfaceMesh {
    let copies: Vec<Provenance> = piece
        .copies
        .iter()
        .map(|p| {
            let mut p = p.clone();
            p.reflections.push(c);
            p.sign = -p.sign;
            p.offset = [2.0 * c[0] - p.offset[0], 2.0 * c[1] - p.offset[1]];
            p
        })
        .collect();
    let vertices = piece
        .piece_vertices
        .iter()
        .zip(&piece.vertex_copy)
        .map(|(v, &k)| {
            let [x, y] = copies[k].apply([v[0], v[1]]);
            [x, y, v[2]]
        })
        .collect();
    let outline = match copies.first() {
        Some(m) => piece.piece_outline.iter().map(|&p| m.apply(p)).collect(),
        None => Vec::new(),
    };
    SurfaceMesh {
        vertices,
        triangles: piece.triangles.clone(),
        periods: piece.periods.clone(),
        outline,
        copies,
        vertex_copy: piece.vertex_copy.clone(),
        piece_vertices: piece.piece_vertices.clone(),
        piece_outline: piece.piece_outline.clone(),
    }
}

/// Which periodic surface a fundamental piece generates, with the vertical
/// lines it contains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    /// Scherk translator over a parallelogram; corners counterclockwise
    /// from the lower left. Doubly periodic.
    Scherk { corners: [[f64; 2]; 4] },
    /// Scherkenoid of angle `alpha` whose `+∞` edge runs from the origin to
    /// `(w cot α, w)`. Singly periodic with period `(2w/tan α, 2w, 0)`.
    Scherkenoid { alpha: f64, w: f64 },
    /// Helicoid-like piece over a strip containing the lines through the
    /// origin and `(x̂, w)`. Singly periodic with period `2(x̂, w, 0)`.
    HelicoidLike { x_hat: f64, w: f64 },
}

impl Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Scherk { .. } => "scherk",
            Family::Scherkenoid { .. } => "scherkenoid",
            Family::HelicoidLike { .. } => "helicoid-like",
        }
    }

    /// Vertical lines of the piece used as half-turn axes.
    pub fn axes(&self) -> Vec<[f64; 2]> {
        match *self {
            Family::Scherk { corners } => corners.to_vec(),
            Family::Scherkenoid { alpha, w } => vec![[0.0, 0.0], [w / alpha.tan(), w]],
            Family::HelicoidLike { x_hat, w } => vec![[0.0, 0.0], [x_hat, w]],
        }
    }

    /// Generating period vectors.
    pub fn periods(&self) -> Vec<[f64; 3]> {
        let ax = self.axes();
        let twice = |a: [f64; 2], b: [f64; 2]| [2.0 * (b[0] - a[0]), 2.0 * (b[1] - a[1]), 0.0];
        match self {
            Family::Scherk { .. } => vec![twice(ax[0], ax[1]), twice(ax[0], ax[3])],
            _ => vec![twice(ax[0], ax[1])],
        }
    }
}

/// Assembles `n₁ × n₂` blocks of the complete surface by composing
/// half-turns about the piece's vertical lines.
///
/// Singly periodic families: each block is the piece and its copy turned
/// about the upper axis, stepped by the period; they need `n₂ = 1`.
///
/// Scherk pieces (graphs on a checkerboard of parallelograms): each block
/// holds 4 images, the piece turned about the corner pairs (c₀, c₂), i.e.
/// `P, R₂P, R₀P, R₀R₂P`. Blocks step by the first period along `n₁` and by
/// twice the second period along `n₂`, so blocks never overlap.
pub fn assemble_periodic(piece: &SurfaceMesh, family: Family, copies: (usize, usize)) -> Result<SurfaceMesh, SurfaceError> {
    let (n1, n2) = copies;
    if n1 == 0 || n2 == 0 {
        return Err(SurfaceError::InvalidCopies(n1, n2));
    }
    let mismatch = |reason: String| SurfaceError::FamilyMismatch {
        family: family.name(),
        reason,
    };
    if piece.copies.len() != 1 {
        return Err(mismatch(format!("expected a single fundamental piece, got {} copies", piece.copies.len())));
    }
    let axes = family.axes();
    for a in &axes {
        if !on_outline(&piece.outline, *a) {
            return Err(mismatch(format!("axis ({}, {}) is not on the piece outline", a[0], a[1])));
        }
    }
    let second_axis = match family {
        Family::Scherk { .. } => axes[2],
        _ => axes[1],
    };
    if !matches!(family, Family::Scherk { .. }) && n2 != 1 {
        return Err(mismatch(format!("singly periodic surfaces take n2 = 1, got {n2}")));
    }
    let (a0, a1) = (axes[0], axes[1]);
    let a3 = *axes.last().unwrap();
    let mut cell = piece.clone();
    cell.append(&schwarz_reflect(piece, second_axis)?);
    let scherk = matches!(family, Family::Scherk { .. });
    if scherk {
        let turned = rotate(&cell, a0);
        cell.append(&turned);
    }
    let mut out = SurfaceMesh {
        periods: family.periods(),
        outline: piece.outline.clone(),
        piece_outline: piece.piece_outline.clone(),
        ..SurfaceMesh::default()
    };
    // translation by 2(b - a) is the half-turn about a followed by b
    let mut row = cell;
    for b in 0..n2 {
        let mut m = row.clone();
        for a in 0..n1 {
            out.append(&m);
            if a + 1 < n1 {
                m = rotate(&rotate(&m, a0), a1);
            }
        }
        if b + 1 < n2 {
            row = rotate(&rotate(&row, a0), a3);
            row = rotate(&rotate(&row, a0), a3);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(format!("unknown mesh format '{other}' (expected obj or ply)")),
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// OBJ text: period comments, `v` lines with 17 significant digits, then
/// 1-based `f` lines.
pub fn obj_bytes(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut s = String::new();
    for p in &mesh.periods {
        s.push_str(&format!("# period {:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
    }
    for v in &mesh.vertices {
        s.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s.into_bytes()
}

/// Binary little-endian PLY with double positions and int indices.
pub fn ply_bytes(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for p in &mesh.periods {
        header.push_str(&format!("comment period {:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
    }
    header.push_str(&format!(
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    ));
    let mut out = header.into_bytes();
    for v in &mesh.vertices {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &k in t {
            out.extend_from_slice(&(k as i32).to_le_bytes());
        }
    }
    out
}

pub fn export_mesh(mesh: &SurfaceMesh, path: &Path, format: MeshFormat) -> Result<(), SurfaceError> {
    let bytes = match format {
        MeshFormat::Obj => obj_bytes(mesh),
        MeshFormat::Ply => ply_bytes(mesh),
    };
    Ok(write_atomic(path, &bytes)?)
}

fn parse_err(format: &'static str, reason: impl Into<String>) -> SurfaceError {
    SurfaceError::Parse {
        format,
        reason: reason.into(),
    }
}

/// Reads vertices, triangles and period comments written by [`obj_bytes`].
pub fn read_obj(path: &Path) -> Result<SurfaceMesh, SurfaceError> {
    let text = fs::read_to_string(path)?;
    let mut mesh = SurfaceMesh::default();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let nums = |it: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>, SurfaceError> {
            it.map(|t| t.parse::<f64>().map_err(|e| parse_err("OBJ", format!("line {}: {e}", n + 1))))
                .collect()
        };
        match it.next() {
            Some("v") => {
                let v = nums(it)?;
                if v.len() < 3 {
                    return Err(parse_err("OBJ", format!("line {}: vertex needs 3 coordinates", n + 1)));
                }
                mesh.vertices.push([v[0], v[1], v[2]]);
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| {
                        t.split('/')
                            .next()
                            .and_then(|k| k.parse::<usize>().ok())
                            .filter(|&k| k >= 1)
                            .map(|k| k - 1)
                            .ok_or_else(|| parse_err("OBJ", format!("line {}: bad index '{t}'", n + 1)))
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(parse_err("OBJ", format!("line {}: only triangles are supported", n + 1)));
                }
                mesh.triangles.push([idx[0], idx[1], idx[2]]);
            }
            Some("#") if line.trim_start().starts_with("# period") => {
                let v = nums(line.trim_start()["# period".len()..].split_whitespace())?;
                if v.len() == 3 {
                    mesh.periods.push([v[0], v[1], v[2]]);
                }
            }
            _ => {}
        }
    }
    finish_read(mesh, "OBJ")
}

/// Reads a file written by [`ply_bytes`].
pub fn read_ply(path: &Path) -> Result<SurfaceMesh, SurfaceError> {
    let bytes = fs::read(path)?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err("PLY", "missing end_header"))?
        + marker.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_err("PLY", "header is not UTF-8"))?;
    if !header.contains("format binary_little_endian 1.0") {
        return Err(parse_err("PLY", "only binary_little_endian 1.0 is supported"));
    }
    let mut mesh = SurfaceMesh::default();
    let (mut nv, mut nf) = (0usize, 0usize);
    for line in header.lines() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["element", "vertex", n] => nv = n.parse().map_err(|_| parse_err("PLY", "bad vertex count"))?,
            ["element", "face", n] => nf = n.parse().map_err(|_| parse_err("PLY", "bad face count"))?,
            ["comment", "period", x, y, z] => {
                let p = |s: &str| s.parse::<f64>().map_err(|_| parse_err("PLY", "bad period"));
                mesh.periods.push([p(x)?, p(y)?, p(z)?]);
            }
            _ => {}
        }
    }
    let mut body = &bytes[end..];
    let mut take = |n: usize| -> Result<&[u8], SurfaceError> {
        if body.len() < n {
            return Err(parse_err("PLY", "truncated body"));
        }
        let (a, b) = body.split_at(n);
        body = b;
        Ok(a)
    };
    for _ in 0..nv {
        let mut v = [0.0; 3];
        for c in &mut v {
            *c = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        mesh.vertices.push(v);
    }
    for _ in 0..nf {
        if take(1)?[0] != 3 {
            return Err(parse_err("PLY", "only triangles are supported"));
        }
        let mut t = [0usize; 3];
        for k in &mut t {
            let i = i32::from_le_bytes(take(4)?.try_into().unwrap());
            *k = usize::try_from(i).map_err(|_| parse_err("PLY", "negative index"))?;
        }
        mesh.triangles.push(t);
    }
    finish_read(mesh, "PLY")
}

fn finish_read(mut mesh: SurfaceMesh, format: &'static str) -> Result<SurfaceMesh, SurfaceError> {
    let n = mesh.vertices.len();
    if mesh.triangles.iter().flatten().any(|&k| k >= n) {
        return Err(parse_err(format, "face index out of range"));
    }
    let periods = std::mem::take(&mut mesh.periods);
    let mut out = SurfaceMesh::new(mesh.vertices, mesh.triangles);
    out.periods = periods;
    Ok(out)
}
