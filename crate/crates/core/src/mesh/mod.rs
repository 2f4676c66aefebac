//! Triangle mesh data model shared by every other module.

mod obj;
mod synthetic;

pub use obj::{frame_file_name, load_obj_sequence, read_obj, write_obj, write_obj_sequence};
pub use synthetic::{generate_synthetic_sequence, primitives, MotionKind};

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("missing directory or no frames matching the pattern: {0}")]
    MissingDirectory(PathBuf),
    #[error("malformed OBJ at line {line}: {reason}")]
    MalformedObj { line: usize, reason: String },
    #[error("frame {0} does not share the topology of frame 0")]
    InconsistentTopology(usize),
    #[error("unknown motion kind `{0}`")]
    InvalidKind(String),
    #[error("vertex {0} has no incident face with non-zero area")]
    IsolatedVertex(usize),
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("normal count {normals} does not match vertex count {vertices}")]
    NormalCount { normals: usize, vertices: usize },
    #[error("normal {0} cannot be normalized")]
    DegenerateNormal(usize),
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("fps must be positive")]
    InvalidFps,
    #[error("frame count must be at least 1")]
    InvalidFrameCount,
    #[error("bad file name pattern `{0}`")]
    BadPattern(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Indexed triangle mesh. Vertices are finite, face indices valid, and normals
/// (when present) have unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh<T> {
    vertices: Vec<Vec3<T>>,
    faces: Arc<[[u32; 3]]>,
    normals: Option<Vec<Vec3<T>>>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFiniteVertex(i));
        }
        let count = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= count) {
                return Err(MeshError::FaceIndexOutOfRange { face: f, index, count });
            }
        }
        Ok(TriangleMesh { vertices, faces: faces.into(), normals: None })
    }

    /// Attaches per-vertex normals, normalizing each one.
    pub fn with_normals(mut self, normals: Vec<Vec3<T>>) -> Result<Self, MeshError> {
        if normals.len() != self.vertices.len() {
            return Err(MeshError::NormalCount { normals: normals.len(), vertices: self.vertices.len() });
        }
        let normals = normals
            .iter()
            .enumerate()
            .map(|(i, n)| n.normalized().ok_or(MeshError::DegenerateNormal(i)))
            .collect::<Result<Vec<_>, _>>()?;
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vec3<T>]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Replaces vertex positions (and normals), sharing the face list. Used by
    /// operators that preserve topology; positions must be finite.
    pub(crate) fn with_positions(&self, vertices: Vec<Vec3<T>>, normals: Option<Vec<Vec3<T>>>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        TriangleMesh { vertices, faces: self.faces.clone(), normals }
    }

    pub fn bounding_box(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| (lo.component_min(v), hi.component_max(v))))
    }

    /// Length of the bounding-box diagonal; zero for empty meshes.
    pub fn bbox_diagonal(&self) -> T {
        self.bounding_box().map(|(lo, hi)| (hi - lo).norm()).unwrap_or_else(T::zero)
    }

    pub fn centroid(&self) -> Vec3<T> {
        if self.vertices.is_empty() {
            return Vec3::zero();
        }
        let sum = self.vertices.iter().fold(Vec3::zero(), |acc, v| acc + *v);
        sum.scale(T::one() / T::from_usize_lossy(self.vertices.len()))
    }

    /// Same mesh with every coordinate rounded to `f32` wire precision.
    pub fn wire_rounded(&self) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(Vec3::wire_round).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(Vec3::cast).collect(),
            faces: self.faces.clone(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(Vec3::cast).collect()),
        }
    }

    pub fn same_topology(&self, other: &Self) -> bool {
        self.vertices.len() == other.vertices.len() && (Arc::ptr_eq(&self.faces, &other.faces) || self.faces == other.faces)
    }
}

/// Per-vertex normals as the normalized area-weighted sum of incident face
/// normals. Zero-area faces contribute nothing.
pub fn compute_vertex_normals<T: Real>(mesh: &TriangleMesh<T>) -> Result<TriangleMesh<T>, MeshError> {
    let n = mesh.vertex_count();
    let mut acc = vec![Vec3::zero(); n];
    let mut referenced = vec![false; n];
    for tri in mesh.faces() {
        let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
        // |cross| is twice the face area, so the raw cross product is already area weighted.
        let fnormal = (b - a).cross(&(c - a));
        for &i in tri {
            acc[i as usize] += fnormal;
            referenced[i as usize] = true;
        }
    }
    let normals = acc
        .iter()
        .zip(&referenced)
        .enumerate()
        .map(|(i, (v, &r))| if r { v.normalized().ok_or(MeshError::IsolatedVertex(i)) } else { Err(MeshError::IsolatedVertex(i)) })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mesh.with_positions(mesh.vertices.clone(), Some(normals)))
}

/// Ordered frames sharing one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSequence<T> {
    frames: Vec<TriangleMesh<T>>,
    fps: u32,
}

impl<T: Real> MeshSequence<T> {
    pub fn new(frames: Vec<TriangleMesh<T>>, fps: u32) -> Result<Self, MeshError> {
        if fps == 0 {
            return Err(MeshError::InvalidFps);
        }
        let first = frames.first().ok_or(MeshError::EmptySequence)?;
        if let Some(bad) = frames.iter().position(|f| !f.same_topology(first)) {
            return Err(MeshError::InconsistentTopology(bad));
        }
        Ok(MeshSequence { frames, fps })
    }

    pub fn frames(&self) -> &[TriangleMesh<T>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<TriangleMesh<T>> {
        self.frames
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps as f64
    }

    /// Splits into consecutive groups of at most `gof_length` frames.
    pub fn chunks(&self, gof_length: usize) -> impl Iterator<Item = &[TriangleMesh<T>]> {
        self.frames.chunks(gof_length.max(1))
    }
}
