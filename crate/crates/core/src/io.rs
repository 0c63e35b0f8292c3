//! ASCII OBJ and PLY reading and writing (triangles only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ext) if ext == "obj" => Ok(MeshFormat::Obj),
            Some(ext) if ext == "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::Ply => parse_ply(&text),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => write_obj(mesh),
        MeshFormat::Ply => write_ply(mesh, &[]),
    };
    fs::write(path, text)?;
    Ok(())
}

/// Writes a PLY file with extra per-vertex scalar properties.
pub fn save_ply_with_scalars(mesh: &TriangleMesh, scalars: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    for (name, values) in scalars {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidParameter(format!(
                "scalar field {name} has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
    }
    fs::write(path, write_ply(mesh, scalars))?;
    Ok(())
}

fn parse_f64(token: Option<&str>, line: usize) -> Result<f64> {
    token
        .ok_or_else(|| Error::Parse { line, message: "missing coordinate".into() })?
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, message: e.to_string() })
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let x = parse_f64(tokens.next(), line)?;
                let y = parse_f64(tokens.next(), line)?;
                let z = parse_f64(tokens.next(), line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(Error::UnsupportedFormat(format!(
                        "line {line}: face with {} vertices (triangles only)",
                        idx.len()
                    )));
                }
                let mut face = [0usize; 3];
                for (k, tok) in idx.iter().enumerate() {
                    let head = tok.split('/').next().unwrap_or("");
                    let v: i64 = head
                        .parse()
                        .map_err(|_| Error::Parse { line, message: format!("bad face index {tok:?}") })?;
                    let resolved = if v > 0 { v - 1 } else { vertices.len() as i64 + v };
                    if resolved < 0 {
                        return Err(Error::Parse { line, message: format!("face index {v} out of range") });
                    }
                    face[k] = resolved as usize;
                }
                faces.push(face);
            }
            Some(_) | None => {}
        }
    }
    check_indices(&vertices, &faces)?;
    Ok(TriangleMesh::new(vertices, faces))
}

pub fn parse_ply(text: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::Parse { line: 1, message: "missing 'ply' magic".into() }),
    }
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    for (line, content) in lines.by_ref() {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(Error::UnsupportedFormat(format!("line {line}: PLY format {fmt} (ASCII only)")))
            }
            ["format", ..] | ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                n_vertices = Some(n.parse::<usize>().map_err(|e| Error::Parse { line, message: e.to_string() })?);
                current = "vertex";
            }
            ["element", "face", n] => {
                n_faces = Some(n.parse::<usize>().map_err(|e| Error::Parse { line, message: e.to_string() })?);
                current = "face";
            }
            ["element", other, ..] => {
                return Err(Error::UnsupportedFormat(format!("line {line}: element {other}")));
            }
            ["property", "list", ..] => {}
            ["property", _ty, name] if current == "vertex" => vertex_props.push(name.to_string()),
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(Error::Parse { line, message: format!("unexpected header line {content:?}") }),
        }
    }
    let n_vertices = n_vertices.ok_or(Error::Parse { line: 0, message: "no vertex element".into() })?;
    let n_faces = n_faces.ok_or(Error::Parse { line: 0, message: "no face element".into() })?;
    let pos = |name: &str| {
        vertex_props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("vertex property {name} missing") })
    };
    let (ix, iy, iz) = (pos("x")?, pos("y")?, pos("z")?);

    let mut vertices = Vec::with_capacity(n_vertices);
    let mut faces = Vec::with_capacity(n_faces);
    for (line, content) in lines {
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if vertices.len() < n_vertices {
            if tokens.len() < vertex_props.len() {
                return Err(Error::Parse { line, message: "too few vertex properties".into() });
            }
            let get = |k: usize| parse_f64(Some(tokens[k]), line);
            vertices.push(Vec3::new(get(ix)?, get(iy)?, get(iz)?));
        } else if faces.len() < n_faces {
            let count: usize = tokens
                .first()
                .ok_or(Error::Parse { line, message: "empty face".into() })?
                .parse()
                .map_err(|_| Error::Parse { line, message: "bad face count".into() })?;
            if count != 3 {
                return Err(Error::UnsupportedFormat(format!("line {line}: face with {count} vertices (triangles only)")));
            }
            if tokens.len() != 4 {
                return Err(Error::Parse { line, message: "face index count mismatch".into() });
            }
            let mut face = [0usize; 3];
            for k in 0..3 {
                face[k] = tokens[k + 1]
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad face index {:?}", tokens[k + 1]) })?;
            }
            faces.push(face);
        } else {
            return Err(Error::Parse { line, message: "trailing data after faces".into() });
        }
    }
    if vertices.len() != n_vertices || faces.len() != n_faces {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!(
                "expected {n_vertices} vertices and {n_faces} faces, read {} and {}",
                vertices.len(),
                faces.len()
            ),
        });
    }
    check_indices(&vertices, &faces)?;
    Ok(TriangleMesh::new(vertices, faces))
}

fn check_indices(vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<()> {
    for (f, face) in faces.iter().enumerate() {
        if face.iter().any(|&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("face {f} references a missing vertex")));
        }
    }
    Ok(())
}

/// `{:e}` with Rust's shortest round-trip digits, which reproduces the value exactly.
fn fmt_coord(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", fmt_coord(v.x), fmt_coord(v.y), fmt_coord(v.z));
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_ply(mesh: &TriangleMesh, scalars: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", mesh.num_vertices());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    for (name, _) in scalars {
        let _ = writeln!(out, "property double {name}");
    }
    let _ = writeln!(out, "element face {}", mesh.num_faces());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(out, "{} {} {}", fmt_coord(v.x), fmt_coord(v.y), fmt_coord(v.z));
        for (_, values) in scalars {
            let _ = write!(out, " {}", fmt_coord(values[i]));
        }
        out.push('\n');
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}
