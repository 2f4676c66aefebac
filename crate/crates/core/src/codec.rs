//! Group-of-frames encoder/decoder and the binary stream format.
//!
//! An I-frame carries the first mesh of a GoF plus one anchor graph per
//! ladder level; every later frame carries per-node transforms for every
//! level, applied to the previously decoded frame.
//!
//! Stream layout (little-endian):
//!
//! ```text
//! "DFST" u32 version
//! per GoF:   u32 gof_length, u32 fps, u32 level_count
//!   per level: u32 node_count, f32 radius, u32 edge_count,
//!              u32 × node_count vertex ids, (u32, u32) × edge_count
//!   I-frame:   u32 vertex_count, u32 face_count, f32 × 3V, u32 × 3F
//!   per P-frame, per level: 12 × f32 per node (row-major R, then t)
//! ```

use rayon::prelude::*;
use thiserror::Error;

use crate::deform::{
    apply_deformation, extract_nested_graphs, DeformError, DeformationParams, InfluenceRadius, NodeGraph, WeightMode,
};
use crate::geom::{Mat3, Vec3};
use crate::mesh::{MeshError, TriangleMesh};
use crate::registration::{solve_deformation, EnergyWeights, RegistrationError, SolveOptions};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"DFST";
pub const VERSION: u32 = 1;
/// Bytes of the per-mesh counts preceding I-frame geometry.
pub const RAW_HEADER_BYTES: u64 = 8;
/// P-frames carry no per-record header.
pub const P_HEADER_BYTES: u64 = 0;
pub const FLOATS_PER_NODE: u64 = 12;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("stream does not start with the DFST magic")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u32),
    #[error("stream truncated in record starting at byte {offset}")]
    TruncatedStream { offset: usize },
    #[error("corrupt record at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("ladder level {0} does not exist")]
    MissingLevel(usize),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("a GoF needs at least one frame")]
    EmptyGoF,
    #[error("frame {0} does not share the I-frame topology")]
    TopologyMismatch(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderLevel {
    pub label: String,
    pub node_count: usize,
}

/// Node-graph densities ordered from coarsest to finest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitrateLadder {
    levels: Vec<LadderLevel>,
}

impl BitrateLadder {
    pub fn new(levels: Vec<LadderLevel>) -> Result<Self, CodecError> {
        if levels.is_empty() {
            return Err(CodecError::InvalidLadder("no levels".into()));
        }
        if levels[0].node_count == 0 {
            return Err(CodecError::InvalidLadder("node counts must be at least 1".into()));
        }
        if levels.windows(2).any(|w| w[0].node_count >= w[1].node_count) {
            return Err(CodecError::InvalidLadder("node counts must be strictly increasing".into()));
        }
        Ok(BitrateLadder { levels })
    }

    /// Levels labelled `L1`, `L2`, … in the given order.
    pub fn from_node_counts(counts: &[usize]) -> Result<Self, CodecError> {
        Self::new(
            counts
                .iter()
                .enumerate()
                .map(|(i, &n)| LadderLevel { label: format!("L{}", i + 1), node_count: n })
                .collect(),
        )
    }

    pub fn levels(&self) -> &[LadderLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.node_count).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }
}

/// The transmitted part of a level's node graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGraph<T> {
    pub node_vertex_ids: Vec<u32>,
    pub radius: T,
    pub edges: Vec<(u32, u32)>,
}

impl<T: Real> LevelGraph<T> {
    pub fn node_count(&self) -> usize {
        self.node_vertex_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGoF<T> {
    pub fps: u32,
    /// First frame, positions at wire precision, no normals.
    pub i_frame: TriangleMesh<T>,
    pub levels: Vec<LevelGraph<T>>,
    /// `p_frames[t - 1][level]` carries frame `t`.
    pub p_frames: Vec<Vec<DeformationParams<T>>>,
}

impl<T: Real> EncodedGoF<T> {
    pub fn gof_length(&self) -> usize {
        self.p_frames.len() + 1
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Rebuilds every level's full graph from the I-frame.
    pub fn level_graphs(&self, mode: WeightMode) -> Result<Vec<NodeGraph<T>>, CodecError> {
        self.levels
            .iter()
            .map(|l| Ok(NodeGraph::from_nodes(&self.i_frame, l.node_vertex_ids.clone(), l.radius, mode)?))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncodeOptions<T> {
    pub weights: EnergyWeights<T>,
    pub solver: SolveOptions<T>,
    pub weight_mode: WeightMode,
    pub radius: InfluenceRadius<T>,
}

impl<T: Real> Default for EncodeOptions<T> {
    fn default() -> Self {
        EncodeOptions {
            weights: EnergyWeights::default(),
            solver: SolveOptions::default(),
            weight_mode: WeightMode::default(),
            radius: InfluenceRadius::Auto,
        }
    }
}

/// Encodes one GoF. Each level is encoded closed-loop: frame `t` is solved
/// against the decoder's reconstruction of frame `t - 1` at the same level.
pub fn encode_gof<T: Real>(
    frames: &[TriangleMesh<T>],
    fps: u32,
    ladder: &BitrateLadder,
    opts: &EncodeOptions<T>,
) -> Result<EncodedGoF<T>, CodecError> {
    let first = frames.first().ok_or(CodecError::EmptyGoF)?;
    if let Some(t) = frames.iter().position(|f| !f.same_topology(first)) {
        return Err(CodecError::TopologyMismatch(t));
    }
    let i_frame = first.wire_rounded().without_normals();
    let graphs = extract_nested_graphs(&i_frame, &ladder.node_counts(), opts.radius, opts.weight_mode, T::wire_round)?;

    let per_level: Vec<Vec<DeformationParams<T>>> = graphs
        .par_iter()
        .map(|graph| {
            let mut prev = i_frame.clone();
            let mut out = Vec::with_capacity(frames.len().saturating_sub(1));
            for target in &frames[1..] {
                let anchored = graph.rebased(&prev)?;
                let (params, _) = solve_deformation(&prev, &anchored, target, &opts.weights, &opts.solver)?;
                let params = params.wire_rounded();
                prev = apply_deformation(&prev, graph, &params)?;
                out.push(params);
            }
            Ok(out)
        })
        .collect::<Result<_, CodecError>>()?;

    let p_frames = (0..frames.len() - 1).map(|t| per_level.iter().map(|lv| lv[t].clone()).collect()).collect();
    let levels = graphs
        .iter()
        .map(|g| LevelGraph { node_vertex_ids: g.node_vertex_ids().to_vec(), radius: g.radius(), edges: g.edges().to_vec() })
        .collect();
    Ok(EncodedGoF { fps, i_frame, levels, p_frames })
}

/// Splits `frames` into GoFs of `gof_length` and encodes them in parallel.
pub fn encode_sequence<T: Real>(
    frames: &[TriangleMesh<T>],
    fps: u32,
    gof_length: usize,
    ladder: &BitrateLadder,
    opts: &EncodeOptions<T>,
) -> Result<Vec<EncodedGoF<T>>, CodecError> {
    if gof_length == 0 || frames.is_empty() {
        return Err(CodecError::EmptyGoF);
    }
    frames.par_chunks(gof_length).map(|chunk| encode_gof(chunk, fps, ladder, opts)).collect()
}

/// Reconstructs a GoF. `level_per_frame[t]` selects the level used for frame
/// `t`; the entry for the I-frame is ignored.
pub fn decode_gof<T: Real>(
    enc: &EncodedGoF<T>,
    level_per_frame: &[usize],
    mode: WeightMode,
) -> Result<Vec<TriangleMesh<T>>, CodecError> {
    let graphs = enc.level_graphs(mode)?;
    decode_with_graphs(enc, &graphs, level_per_frame)
}

/// Same as [`decode_gof`] with graphs prepared by [`EncodedGoF::level_graphs`].
pub fn decode_with_graphs<T: Real>(
    enc: &EncodedGoF<T>,
    graphs: &[NodeGraph<T>],
    level_per_frame: &[usize],
) -> Result<Vec<TriangleMesh<T>>, CodecError> {
    if level_per_frame.len() != enc.gof_length() {
        return Err(CodecError::SizeMismatch { expected: enc.gof_length(), got: level_per_frame.len() });
    }
    if let Some(&bad) = level_per_frame.iter().skip(1).find(|&&b| b >= enc.level_count()) {
        return Err(CodecError::MissingLevel(bad));
    }
    let mut out = Vec::with_capacity(enc.gof_length());
    out.push(enc.i_frame.clone());
    for (t, &b) in level_per_frame.iter().enumerate().skip(1) {
        let params = &enc.p_frames[t - 1][b];
        let next = apply_deformation(&out[t - 1], &graphs[b], params)?;
        out.push(next);
    }
    Ok(out)
}

/// Encoded byte sizes per frame and option.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSizeTable {
    /// Raw (I-frame style) size of every frame.
    pub raw: Vec<u64>,
    /// P-frame size per ladder level.
    pub level: Vec<u64>,
}

impl FrameSizeTable {
    /// P-frame size of frame `t` at `level`; `None` for the GoF head.
    pub fn p_size(&self, t: usize, level: usize) -> Option<u64> {
        (t > 0).then(|| self.level.get(level).copied()).flatten()
    }
}

pub fn raw_frame_bytes(vertex_count: usize, face_count: usize) -> u64 {
    RAW_HEADER_BYTES + 12 * vertex_count as u64 + 12 * face_count as u64
}

pub fn p_frame_bytes(node_count: usize) -> u64 {
    P_HEADER_BYTES + FLOATS_PER_NODE * 4 * node_count as u64
}

pub fn measure_sizes<T: Real>(enc: &EncodedGoF<T>, raw_frames: &[TriangleMesh<T>]) -> Result<FrameSizeTable, CodecError> {
    if raw_frames.len() != enc.gof_length() {
        return Err(CodecError::SizeMismatch { expected: enc.gof_length(), got: raw_frames.len() });
    }
    Ok(FrameSizeTable {
        raw: raw_frames.iter().map(|m| raw_frame_bytes(m.vertex_count(), m.face_count())).collect(),
        level: enc.levels.iter().map(|l| p_frame_bytes(l.node_count())).collect(),
    })
}

pub fn serialize_stream<T: Real>(gofs: &[EncodedGoF<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, VERSION);
    for g in gofs {
        put_u32(&mut out, g.gof_length() as u32);
        put_u32(&mut out, g.fps);
        put_u32(&mut out, g.levels.len() as u32);
        for l in &g.levels {
            put_u32(&mut out, l.node_vertex_ids.len() as u32);
            put_f32(&mut out, l.radius.to_wire());
            put_u32(&mut out, l.edges.len() as u32);
            l.node_vertex_ids.iter().for_each(|&id| put_u32(&mut out, id));
            for &(a, b) in &l.edges {
                put_u32(&mut out, a);
                put_u32(&mut out, b);
            }
        }
        put_u32(&mut out, g.i_frame.vertex_count() as u32);
        put_u32(&mut out, g.i_frame.face_count() as u32);
        for v in g.i_frame.vertices() {
            v.0.iter().for_each(|c| put_f32(&mut out, c.to_wire()));
        }
        for f in g.i_frame.faces() {
            f.iter().for_each(|&i| put_u32(&mut out, i));
        }
        for frame in &g.p_frames {
            for params in frame {
                for (r, t) in params.rotations.iter().zip(&params.translations) {
                    r.0.iter().flatten().for_each(|c| put_f32(&mut out, c.to_wire()));
                    t.0.iter().for_each(|c| put_f32(&mut out, c.to_wire()));
                }
            }
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    record: usize,
}

impl<'a> Reader<'a> {
    fn begin(&mut self) {
        self.record = self.pos;
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CodecError::TruncatedStream { offset: self.record })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u32s(&mut self, count: usize) -> Result<Vec<u32>, CodecError> {
        let raw = self.take(count.checked_mul(4).ok_or(CodecError::TruncatedStream { offset: self.record })?)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn f32s<T: Real>(&mut self, count: usize) -> Result<Vec<T>, CodecError> {
        let raw = self.take(count.checked_mul(4).ok_or(CodecError::TruncatedStream { offset: self.record })?)?;
        Ok(raw.chunks_exact(4).map(|c| T::from_wire(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect())
    }

    fn corrupt(&self, reason: impl Into<String>) -> CodecError {
        CodecError::Corrupt { offset: self.record, reason: reason.into() }
    }
}

pub fn deserialize_stream<T: Real>(bytes: &[u8]) -> Result<Vec<EncodedGoF<T>>, CodecError> {
    let mut r = Reader { bytes, pos: 0, record: 0 };
    if r.take(4).map_err(|_| CodecError::BadMagic)? != MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let mut gofs = Vec::new();
    while r.pos < bytes.len() {
        r.begin();
        let gof_length = r.u32()? as usize;
        let fps = r.u32()?;
        let level_count = r.u32()? as usize;
        if gof_length == 0 {
            return Err(r.corrupt("zero-length GoF"));
        }
        let mut levels = Vec::new();
        for _ in 0..level_count {
            r.begin();
            let node_count = r.u32()? as usize;
            let radius = T::from_wire(f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")));
            let edge_count = r.u32()? as usize;
            let node_vertex_ids = r.u32s(node_count)?;
            let flat = r.u32s(edge_count.checked_mul(2).ok_or(r.corrupt("edge count overflow"))?)?;
            if !(radius > T::zero() && radius.is_finite()) {
                return Err(r.corrupt("non-positive influence radius"));
            }
            let edges = flat.chunks_exact(2).map(|e| (e[0], e[1])).collect();
            levels.push(LevelGraph { node_vertex_ids, radius, edges });
        }
        r.begin();
        let vertex_count = r.u32()? as usize;
        let face_count = r.u32()? as usize;
        let coords: Vec<T> = r.f32s(vertex_count.checked_mul(3).ok_or(r.corrupt("vertex count overflow"))?)?;
        let indices = r.u32s(face_count.checked_mul(3).ok_or(r.corrupt("face count overflow"))?)?;
        let vertices = coords.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let faces = indices.chunks_exact(3).map(|f| [f[0], f[1], f[2]]).collect();
        let i_frame = TriangleMesh::new(vertices, faces).map_err(|e| r.corrupt(e.to_string()))?;
        if levels.iter().any(|l| l.node_vertex_ids.iter().any(|&id| id as usize >= vertex_count)) {
            return Err(r.corrupt("node vertex id out of range"));
        }

        let mut p_frames = Vec::with_capacity(gof_length - 1);
        for _ in 1..gof_length {
            let mut per_level = Vec::with_capacity(levels.len());
            for l in &levels {
                r.begin();
                let vals: Vec<T> = r.f32s(l.node_count() * FLOATS_PER_NODE as usize)?;
                let mut params = DeformationParams::identity(l.node_count());
                for (j, c) in vals.chunks_exact(FLOATS_PER_NODE as usize).enumerate() {
                    params.rotations[j] = Mat3([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]);
                    params.translations[j] = Vec3::new(c[9], c[10], c[11]);
                }
                per_level.push(params);
            }
            p_frames.push(per_level);
        }
        gofs.push(EncodedGoF { fps, i_frame, levels, p_frames });
    }
    Ok(gofs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_synthetic_sequence, primitives, MotionKind};

    fn small_gof() -> EncodedGoF<f64> {
        let base = primitives::uv_sphere::<f64>(6, 8, 1.0);
        let seq = generate_synthetic_sequence(MotionKind::RigidTranslate, &base, 3, 0.2, 30).unwrap();
        let ladder = BitrateLadder::from_node_counts(&[2, 4]).unwrap();
        encode_gof(seq.frames(), 30, &ladder, &EncodeOptions::default()).unwrap()
    }

    #[test]
    fn ladder_validation() {
        assert!(BitrateLadder::from_node_counts(&[4, 4]).is_err());
        assert!(BitrateLadder::from_node_counts(&[0, 4]).is_err());
        assert!(BitrateLadder::from_node_counts(&[]).is_err());
        let l = BitrateLadder::from_node_counts(&[8, 32]).unwrap();
        assert_eq!(l.index_of("L2"), Some(1));
    }

    #[test]
    fn single_frame_gof_has_no_p_frames() {
        let base = primitives::cube::<f64>(1.0);
        let ladder = BitrateLadder::from_node_counts(&[2]).unwrap();
        let enc = encode_gof(&[base], 30, &ladder, &EncodeOptions::default()).unwrap();
        assert_eq!(enc.gof_length(), 1);
        assert!(enc.p_frames.is_empty());
    }

    #[test]
    fn empty_stream_is_header_only() {
        let bytes = serialize_stream::<f64>(&[]);
        assert_eq!(bytes.len(), 8);
        assert!(deserialize_stream::<f64>(&bytes).unwrap().is_empty());
    }

    #[test]
    fn stream_round_trip_is_exact() {
        let g = small_gof();
        let bytes = serialize_stream(&[g.clone(), g.clone()]);
        let back = deserialize_stream::<f64>(&bytes).unwrap();
        assert_eq!(back, vec![g.clone(), g]);
    }

    #[test]
    fn header_errors() {
        let mut bytes = serialize_stream(&[small_gof()]);
        bytes[0] = b'X';
        assert!(matches!(deserialize_stream::<f64>(&bytes), Err(CodecError::BadMagic)));
        let mut bytes = serialize_stream(&[small_gof()]);
        bytes[4] = 2;
        assert!(matches!(deserialize_stream::<f64>(&bytes), Err(CodecError::UnsupportedVersion(2))));
        assert!(matches!(deserialize_stream::<f64>(b"DF"), Err(CodecError::BadMagic)));
    }

    #[test]
    fn truncation_reports_start_of_incomplete_p_record() {
        let g = small_gof();
        let bytes = serialize_stream(std::slice::from_ref(&g));
        let p_total: usize = g.levels.iter().map(|l| l.node_count() * 48).sum::<usize>() * 2;
        let last_record = bytes.len() - g.levels[1].node_count() * 48;
        assert_eq!(bytes.len() - p_total, last_record - (p_total - g.levels[1].node_count() * 48));
        let cut = &bytes[..last_record + 10];
        match deserialize_stream::<f64>(cut) {
            Err(CodecError::TruncatedStream { offset }) => assert_eq!(offset, last_record),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sizes_follow_layout() {
        assert_eq!(raw_frame_bytes(100, 196), 8 + 100 * 12 + 196 * 12);
        assert_eq!(p_frame_bytes(50), 50 * 12 * 4);
        let g = small_gof();
        let base = primitives::uv_sphere::<f64>(6, 8, 1.0);
        let t = measure_sizes(&g, &[base.clone(), base.clone(), base]).unwrap();
        assert_eq!(t.level, vec![96, 192]);
        assert_eq!(t.p_size(0, 0), None);
        assert_eq!(t.p_size(1, 1), Some(192));
        assert_eq!(serialize_stream(std::slice::from_ref(&g)).len() as u64 - 8 - 12, {
            let levels: u64 = g.levels.iter().map(|l| 12 + 4 * l.node_count() as u64 + 8 * l.edges.len() as u64).sum();
            levels + t.raw[0] + 2 * (t.level[0] + t.level[1])
        });
    }

    #[test]
    fn decode_rejects_bad_levels() {
        let g = small_gof();
        assert!(matches!(decode_gof(&g, &[0, 0, 2], WeightMode::Uniform), Err(CodecError::MissingLevel(2))));
        assert!(matches!(decode_gof(&g, &[0, 0], WeightMode::Uniform), Err(CodecError::SizeMismatch { .. })));
    }

    #[test]
    fn decoded_levels_reproduce_encoder_reconstruction() {
        let g = small_gof();
        let a = decode_gof(&g, &[0, 1, 1], WeightMode::Uniform).unwrap();
        let b = decode_gof(&g, &[0, 1, 1], WeightMode::Uniform).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
