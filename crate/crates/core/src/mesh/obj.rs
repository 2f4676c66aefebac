//! ASCII OBJ reading and writing (`v`, `vn`, `f` records only).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;

use super::{MeshError, MeshSequence, TriangleMesh};
use crate::geom::Vec3;
use crate::scalar::Real;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MeshError + '_ {
    move |source| MeshError::Io { path: path.to_path_buf(), source }
}

/// Parses OBJ text. Faces accept `a`, `a/b`, `a/b/c` and `a//c` index forms
/// (only the position index is used); negative indices are relative.
pub fn parse_obj<T: Real>(text: &str) -> Result<TriangleMesh<T>, MeshError> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let bad = |reason: &str| MeshError::MalformedObj { line: line_no, reason: reason.to_string() };
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => vertices.push(parse_vec3::<T>(&mut it).ok_or_else(|| bad("expected `v x y z`"))?),
            Some("vn") => normals.push(parse_vec3::<T>(&mut it).ok_or_else(|| bad("expected `vn x y z`"))?),
            Some("f") => {
                let idx = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                        let count = vertices.len() as i64;
                        let resolved = if i > 0 { i - 1 } else if i < 0 { count + i } else { -1 };
                        if resolved < 0 || resolved >= count {
                            return Err(bad("face index out of range"));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() != 3 {
                    return Err(bad("only triangular faces are supported"));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if normals.is_empty() {
        Ok(mesh)
    } else {
        mesh.with_normals(normals)
    }
}

fn parse_vec3<'a, T: Real>(it: &mut impl Iterator<Item = &'a str>) -> Option<Vec3<T>> {
    let mut c = [T::zero(); 3];
    for slot in c.iter_mut() {
        let v: T = it.next()?.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *slot = v;
    }
    Some(Vec3(c))
}

pub fn read_obj<T: Real>(path: &Path) -> Result<TriangleMesh<T>, MeshError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_obj(&text)
}

/// Serializes a mesh. Coordinates use the shortest representation that reads
/// back to the identical value.
pub fn format_obj<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    if let Some(ns) = mesh.normals() {
        for n in ns {
            let _ = writeln!(out, "vn {} {} {}", n[0], n[1], n[2]);
        }
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj<T: Real>(mesh: &TriangleMesh<T>, path: &Path) -> Result<(), MeshError> {
    fs::write(path, format_obj(mesh)).map_err(io_err(path))
}

struct FramePattern {
    prefix: String,
    width: Option<usize>,
    suffix: String,
}

fn parse_pattern(pattern: &str) -> Result<FramePattern, MeshError> {
    let re = Regex::new(r"^(?P<pre>[^%]*)%(?P<w>0?\d+)?d(?P<suf>[^%]*)$").expect("static regex");
    let caps = re.captures(pattern).ok_or_else(|| MeshError::BadPattern(pattern.to_string()))?;
    let width = caps.name("w").map(|w| w.as_str().trim_start_matches('0').parse::<usize>().unwrap_or(0));
    Ok(FramePattern { prefix: caps["pre"].to_string(), width, suffix: caps["suf"].to_string() })
}

/// Expands a printf-style frame pattern such as `frame_%04d.obj`.
pub fn frame_file_name(pattern: &str, index: usize) -> Result<String, MeshError> {
    let p = parse_pattern(pattern)?;
    let num = match p.width {
        Some(w) => format!("{index:0w$}"),
        None => index.to_string(),
    };
    Ok(format!("{}{}{}", p.prefix, num, p.suffix))
}

/// Loads every file in `dir` matching the printf-style `pattern`, ordered by
/// file name.
pub fn load_obj_sequence<T: Real>(dir: &Path, pattern: &str, fps: u32) -> Result<MeshSequence<T>, MeshError> {
    if !dir.is_dir() {
        return Err(MeshError::MissingDirectory(dir.to_path_buf()));
    }
    let p = parse_pattern(pattern)?;
    let digits = match p.width {
        Some(w) if w > 0 => format!(r"\d{{{w}}}"),
        _ => r"\d+".to_string(),
    };
    let re = Regex::new(&format!("^{}{}{}$", regex::escape(&p.prefix), digits, regex::escape(&p.suffix)))
        .map_err(|_| MeshError::BadPattern(pattern.to_string()))?;
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_str().is_some_and(|n| re.is_match(n)))
        .map(|e| e.path())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(MeshError::MissingDirectory(dir.to_path_buf()));
    }
    let frames = names.iter().map(|p| read_obj(p)).collect::<Result<Vec<_>, _>>()?;
    MeshSequence::new(frames, fps)
}

/// Writes frames as `pattern`-named files, numbered from zero. Returns the paths.
pub fn write_obj_sequence<T: Real>(
    frames: &[TriangleMesh<T>],
    dir: &Path,
    pattern: &str,
) -> Result<Vec<PathBuf>, MeshError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let path = dir.join(frame_file_name(pattern, i)?);
            write_obj(m, &path)?;
            Ok(path)
        })
        .collect()
}
