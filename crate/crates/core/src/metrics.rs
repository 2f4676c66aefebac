//! Hausdorff distance, rate-distortion curves and Bjøntegaard delta rate.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    decode_with_graphs, encode_sequence, p_frame_bytes, raw_frame_bytes, BitrateLadder, CodecError, EncodeOptions, EncodedGoF,
};
use crate::deform::WeightMode;
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("a curve needs at least 4 points, got {0}")]
    InsufficientPoints(usize),
    #[error("distortion ranges do not overlap")]
    NoOverlap,
    #[error("curve points do not determine a cubic fit")]
    DegenerateFit,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("malformed CSV at line {line}")]
    MalformedCsv { line: usize },
    #[error("sequence length {frames} does not match reference length {reference}")]
    LengthMismatch { frames: usize, reference: usize },
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Largest nearest-neighbor distance from `a` into `b`, squared.
fn directed_squared<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
    let tree = KdTree::build(b);
    a.iter().map(|p| tree.nearest(p).map(|(_, d)| d).unwrap_or(T::zero())).fold(T::zero(), T::max)
}

/// Symmetric Hausdorff distance between two vertex sets.
pub fn hausdorff_points<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> Result<T, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    Ok(directed_squared(a, b).max(directed_squared(b, a)).sqrt())
}

pub fn hausdorff<T: Real>(a: &TriangleMesh<T>, b: &TriangleMesh<T>) -> Result<T, MetricsError> {
    hausdorff_points(a.vertices(), b.vertices())
}

/// Per-frame Hausdorff distances, computed in parallel.
pub fn sequence_hausdorff<T: Real>(a: &[TriangleMesh<T>], b: &[TriangleMesh<T>]) -> Result<Vec<T>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { frames: a.len(), reference: b.len() });
    }
    a.par_iter().zip(b).map(|(x, y)| hausdorff(x, y)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub bitrate_bps: f64,
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    points: Vec<RdPoint>,
}

impl RDCurve {
    /// Points are sorted by bitrate; bitrates must be distinct and positive.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self, MetricsError> {
        if points.iter().any(|p| !(p.bitrate_bps > 0.0 && p.bitrate_bps.is_finite())) {
            return Err(MetricsError::InvalidCurve("bitrates must be positive and finite".into()));
        }
        if points.iter().any(|p| !(p.distortion >= 0.0 && p.distortion.is_finite())) {
            return Err(MetricsError::InvalidCurve("distortions must be non-negative and finite".into()));
        }
        points.sort_by(|a, b| a.bitrate_bps.total_cmp(&b.bitrate_bps));
        if points.windows(2).any(|w| w[0].bitrate_bps == w[1].bitrate_bps) {
            return Err(MetricsError::InvalidCurve("duplicate bitrate".into()));
        }
        Ok(RDCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bitrate_bps,distortion\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{}", p.bitrate_bps, p.distortion);
        }
        s
    }

    /// Parses `bitrate_bps,distortion` rows; a non-numeric first row is a header.
    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut points = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let parsed = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            match parsed {
                Some((bitrate_bps, distortion)) => points.push(RdPoint { bitrate_bps, distortion }),
                None if no == 0 => continue,
                None => return Err(MetricsError::MalformedCsv { line: no + 1 }),
            }
        }
        Self::new(points)
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
        Self::from_csv(&text)
    }
}

/// Least-squares cubic `log10(rate) = c0 + c1 u + c2 u² + c3 u³`.
fn fit_cubic(us: &[f64], ys: &[f64]) -> Option<[f64; 4]> {
    let mut a = [[0.0f64; 5]; 4];
    for (&u, &y) in us.iter().zip(ys) {
        let pw = [1.0, u, u * u, u * u * u];
        for r in 0..4 {
            for c in 0..4 {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][4] += pw[r] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the augmented system.
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..4 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..5 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some([a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]])
}

fn integral(c: &[f64; 4], lo: f64, hi: f64) -> f64 {
    let anti = |u: f64| c[0] * u + c[1] * u * u / 2.0 + c[2] * u.powi(3) / 3.0 + c[3] * u.powi(4) / 4.0;
    anti(hi) - anti(lo)
}

/// Average bitrate difference of `test` against `reference` at equal
/// distortion, in percent (negative means `test` needs fewer bits).
pub fn bd_rate(reference: &RDCurve, test: &RDCurve) -> Result<f64, MetricsError> {
    for c in [reference, test] {
        if c.points.len() < 4 {
            return Err(MetricsError::InsufficientPoints(c.points.len()));
        }
    }
    let range = |c: &RDCurve| {
        c.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.distortion), hi.max(p.distortion)))
    };
    let (rlo, rhi) = range(reference);
    let (tlo, thi) = range(test);
    let (lo, hi) = (rlo.max(tlo), rhi.min(thi));
    if !(hi > lo) {
        return Err(MetricsError::NoOverlap);
    }
    // Fit on a shared, normalized abscissa to keep the cubic well conditioned.
    let (all_lo, all_hi) = (rlo.min(tlo), rhi.max(thi));
    let scale = all_hi - all_lo;
    let to_u = |d: f64| (d - all_lo) / scale;
    let fit = |c: &RDCurve| {
        let us: Vec<f64> = c.points.iter().map(|p| to_u(p.distortion)).collect();
        let ys: Vec<f64> = c.points.iter().map(|p| p.bitrate_bps.log10()).collect();
        fit_cubic(&us, &ys).ok_or(MetricsError::DegenerateFit)
    };
    let (cr, ct) = (fit(reference)?, fit(test)?);
    let (ulo, uhi) = (to_u(lo), to_u(hi));
    let avg_diff = (integral(&ct, ulo, uhi) - integral(&cr, ulo, uhi)) / (uhi - ulo);
    Ok((10f64.powf(avg_diff) - 1.0) * 100.0)
}

/// One R-D point per ladder level: every P-frame is sent at that level.
/// Bitrate counts the I-frame, the level's graph and its P-frames; distortion
/// is the mean per-frame Hausdorff error against `frames`.
pub fn build_rd_curve<T: Real>(
    frames: &[TriangleMesh<T>],
    fps: u32,
    gof_length: usize,
    ladder: &BitrateLadder,
    opts: &EncodeOptions<T>,
) -> Result<RDCurve, MetricsError> {
    let gofs = encode_sequence(frames, fps, gof_length, ladder, opts)?;
    rd_curve_from_gofs(&gofs, frames, opts.weight_mode)
}

/// [`build_rd_curve`] over an already encoded stream of `frames`.
pub fn rd_curve_from_gofs<T: Real>(
    gofs: &[EncodedGoF<T>],
    frames: &[TriangleMesh<T>],
    mode: WeightMode,
) -> Result<RDCurve, MetricsError> {
    let total: usize = gofs.iter().map(EncodedGoF::gof_length).sum();
    if total != frames.len() {
        return Err(MetricsError::LengthMismatch { frames: total, reference: frames.len() });
    }
    let levels = gofs.first().map_or(0, EncodedGoF::level_count);
    let fps = gofs.first().map_or(1, |g| g.fps.max(1));
    let duration = frames.len() as f64 / fps as f64;
    let mut points = Vec::with_capacity(levels);
    for b in 0..levels {
        let mut bytes = 0u64;
        let mut errors = Vec::with_capacity(frames.len());
        let mut offset = 0;
        for g in gofs {
            let reference = &frames[offset..offset + g.gof_length()];
            offset += g.gof_length();
            let level = &g.levels[b];
            bytes += raw_frame_bytes(g.i_frame.vertex_count(), g.i_frame.face_count())
                + 12
                + 4 * level.node_count() as u64
                + 8 * level.edges.len() as u64
                + (g.gof_length() as u64 - 1) * p_frame_bytes(level.node_count());
            let graphs = g.level_graphs(mode)?;
            let decoded = decode_with_graphs(g, &graphs, &vec![b; g.gof_length()])?;
            errors.extend(sequence_hausdorff(&decoded, reference)?.into_iter().map(Real::to_f64_lossy));
        }
        let distortion = errors.iter().sum::<f64>() / errors.len() as f64;
        points.push(RdPoint { bitrate_bps: bytes as f64 * 8.0 / duration, distortion });
    }
    RDCurve::new(points)
}
