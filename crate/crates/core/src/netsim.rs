//! Trace-driven chunk streaming simulator and decode-time profiling.
//!
//! Time is tracked in integer nanoseconds so that
//! `total = startup + playback + rebuffer` holds exactly.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abr::{
    build_dependency_tree, optimize_chunk_with, select_dependency_depth, AbrError, AdaptationPlan, DpConfig, FrameKind,
    FrameOption, QoECoefficients,
};
use crate::codec::{decode_with_graphs, p_frame_bytes, raw_frame_bytes, CodecError, EncodedGoF};
use crate::deform::{
    apply_deformation, extract_node_graph, DeformError, DeformationParams, InfluenceRadius, NodeGraph, WeightMode,
};
use crate::geom::{Mat3, Vec3};
use crate::mesh::TriangleMesh;
use crate::metrics::{sequence_hausdorff, MetricsError};
use crate::scalar::Real;

const NS_PER_S: f64 = 1e9;

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("malformed trace row at line {0}")]
    MalformedRow(usize),
    #[error("trace time does not increase at line {0}")]
    NonMonotonicTime(usize),
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("stream has no frames")]
    EmptyStream,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Abr(#[from] AbrError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Deform(#[from] DeformError),
}

/// Piecewise-constant bandwidth: each sample holds until the next one, the
/// last holds forever and the first also covers all earlier times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    samples: Vec<(f64, f64)>,
}

impl BandwidthTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, NetsimError> {
        if samples.is_empty() {
            return Err(NetsimError::EmptyTrace);
        }
        for (i, &(t, bw)) in samples.iter().enumerate() {
            if !t.is_finite() || !(bw.is_finite() && bw >= 0.0) {
                return Err(NetsimError::MalformedRow(i + 1));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(NetsimError::NonMonotonicTime(i + 1));
            }
        }
        Ok(BandwidthTrace { samples })
    }

    pub fn constant(bits_per_s: f64) -> Self {
        BandwidthTrace { samples: vec![(0.0, bits_per_s.max(0.0))] }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every bandwidth multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        BandwidthTrace { samples: self.samples.iter().map(|&(t, b)| (t, b * factor)).collect() }
    }

    /// Parses CSV rows `time_s,bandwidth_bps`; a non-numeric first row is a header.
    pub fn parse(text: &str) -> Result<Self, NetsimError> {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let parsed = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
                _ => None,
            };
            let Some((t, bw)) = parsed else {
                if no == 0 {
                    continue;
                }
                return Err(NetsimError::MalformedRow(no + 1));
            };
            if !t.is_finite() || !(bw.is_finite() && bw >= 0.0) {
                return Err(NetsimError::MalformedRow(no + 1));
            }
            if samples.last().is_some_and(|&(prev, _)| t <= prev) {
                return Err(NetsimError::NonMonotonicTime(no + 1));
            }
            samples.push((t, bw));
        }
        Self::new(samples)
    }

    fn pieces_ns(&self) -> Vec<(i128, f64)> {
        self.samples.iter().map(|&(t, b)| ((t * NS_PER_S).round() as i128, b)).collect()
    }

    /// Bits delivered over `[from_ns, to_ns]`.
    pub fn bits_between(&self, from_ns: i128, to_ns: i128) -> f64 {
        if to_ns <= from_ns {
            return 0.0;
        }
        let pieces = self.pieces_ns();
        let mut bits = 0.0;
        for (k, &(start, rate)) in pieces.iter().enumerate() {
            let lo = if k == 0 { i128::MIN } else { start };
            let hi = pieces.get(k + 1).map_or(i128::MAX, |p| p.0);
            let (a, b) = (lo.max(from_ns), hi.min(to_ns));
            if b > a {
                bits += rate * (b - a) as f64 / NS_PER_S;
            }
        }
        bits
    }

    /// Time at which `bytes` finish transmitting when starting at `start_ns`,
    /// or `None` if the trace never delivers them.
    pub fn finish_time(&self, start_ns: i128, bytes: u64) -> Option<i128> {
        let mut remaining = bytes as f64 * 8.0;
        if remaining <= 0.0 {
            return Some(start_ns);
        }
        let pieces = self.pieces_ns();
        let mut t = start_ns;
        for (k, &(start, rate)) in pieces.iter().enumerate() {
            let hi = pieces.get(k + 1).map_or(i128::MAX, |p| p.0);
            if hi <= t {
                continue;
            }
            let a = if k == 0 { t } else { t.max(start) };
            if rate <= 0.0 {
                if hi == i128::MAX {
                    return None;
                }
                t = hi;
                continue;
            }
            let need_ns = (remaining / rate * NS_PER_S).ceil();
            if hi == i128::MAX || (a as f64 + need_ns) <= hi as f64 {
                return Some(a + need_ns as i128);
            }
            remaining -= rate * (hi - a) as f64 / NS_PER_S;
            t = hi;
        }
        None
    }
}

pub fn load_trace(path: &Path) -> Result<BandwidthTrace, NetsimError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetsimError::Io { path: path.to_path_buf(), source })?;
    BandwidthTrace::parse(&text)
}

/// Decode time `alpha · nodes + beta` seconds per reconstructed frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeTimeModel {
    pub alpha: f64,
    pub beta: f64,
    pub fit_r2: f64,
}

impl DecodeTimeModel {
    pub fn zero() -> Self {
        DecodeTimeModel { alpha: 0.0, beta: 0.0, fit_r2: 1.0 }
    }

    pub fn predict(&self, nodes: usize) -> f64 {
        (self.alpha * nodes as f64 + self.beta).max(0.0)
    }

    /// Least-squares line through `(nodes, seconds)` samples. A negative
    /// intercept is replaced by a fit through the origin and a negative slope
    /// by the mean; a single distinct node count gives `alpha = 0`, `r² = 1`.
    pub fn fit(samples: &[(usize, f64)]) -> Self {
        if samples.is_empty() {
            return Self::zero();
        }
        let n = samples.len() as f64;
        let xs: Vec<f64> = samples.iter().map(|s| s.0 as f64).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let (mut alpha, mut beta) = if sxx > 0.0 { (sxy / sxx, my - sxy / sxx * mx) } else { (0.0, my) };
        if beta < 0.0 {
            let sxx0: f64 = xs.iter().map(|x| x * x).sum();
            alpha = if sxx0 > 0.0 { xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / sxx0 } else { 0.0 };
            beta = 0.0;
        }
        if alpha < 0.0 {
            alpha = 0.0;
            beta = my.max(0.0);
        }
        let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - (alpha * x + beta)).powi(2)).sum();
        let fit_r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        DecodeTimeModel { alpha, beta, fit_r2 }
    }
}

/// Times one deformation of `mesh` per node count (median of `repetitions`)
/// with the wall clock and fits a [`DecodeTimeModel`].
pub fn profile_decode_time<T: Real>(
    mesh: &TriangleMesh<T>,
    node_counts: &[usize],
    repetitions: usize,
    mode: WeightMode,
) -> Result<(DecodeTimeModel, Vec<(usize, f64)>), NetsimError> {
    profile_decode_time_with(mesh, node_counts, repetitions, mode, |_, work| {
        let start = Instant::now();
        work();
        start.elapsed().as_secs_f64()
    })
}

/// Like [`profile_decode_time`] with an injected timer: `timer(nodes, work)`
/// returns the seconds attributed to one run of `work`.
pub fn profile_decode_time_with<T: Real>(
    mesh: &TriangleMesh<T>,
    node_counts: &[usize],
    repetitions: usize,
    mode: WeightMode,
    mut timer: impl FnMut(usize, &mut dyn FnMut()) -> f64,
) -> Result<(DecodeTimeModel, Vec<(usize, f64)>), NetsimError> {
    if node_counts.is_empty() || repetitions == 0 {
        return Err(NetsimError::InvalidConfig("profiling needs node counts and repetitions".into()));
    }
    let smallest = *node_counts.iter().min().expect("non-empty");
    // One radius for every node count so the per-node work is comparable.
    let radius = extract_node_graph(mesh, smallest, InfluenceRadius::Auto, mode)?.radius();
    let mut samples = Vec::with_capacity(node_counts.len());
    for &n in node_counts {
        let graph = extract_node_graph(mesh, n, InfluenceRadius::Fixed(radius), mode)?;
        let params = profiling_params(&graph);
        let mut times: Vec<f64> = (0..repetitions)
            .map(|_| {
                let mut work = || {
                    std::hint::black_box(apply_deformation(mesh, &graph, &params).expect("sizes match"));
                };
                timer(n, &mut work)
            })
            .collect();
        times.sort_by(f64::total_cmp);
        samples.push((n, times[times.len() / 2]));
    }
    Ok((DecodeTimeModel::fit(&samples), samples))
}

fn profiling_params<T: Real>(graph: &NodeGraph<T>) -> DeformationParams<T> {
    let n = graph.node_count();
    DeformationParams {
        rotations: (0..n).map(|j| Mat3::rotation_axis_angle(Vec3::new(T::one(), T::lit(0.5), T::lit(0.25)), T::lit(0.01 * (j % 7) as f64))).collect(),
        translations: (0..n).map(|j| Vec3::new(T::lit(1e-3 * (j % 5) as f64), T::zero(), T::lit(-1e-3))).collect(),
    }
}

/// Per-frame sizes and qualities of an encoded stream, as seen by the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTables {
    pub fps: u32,
    /// Raw size of every frame; GoF heads include their graph data.
    pub raw_bytes: Vec<u64>,
    pub gof_head: Vec<bool>,
    pub level_nodes: Vec<usize>,
    pub level_bytes: Vec<u64>,
    /// `level_error[b][t]`: distortion of frame `t` decoded at level `b`.
    pub level_error: Vec<Vec<f64>>,
}

impl StreamTables {
    pub fn frame_count(&self) -> usize {
        self.raw_bytes.len()
    }

    /// Builds tables from encoded GoFs. Each level's error is the Hausdorff
    /// distance of its all-level decode against `reference`, or against the
    /// finest level's decode when no reference is given.
    pub fn build<T: Real>(
        gofs: &[EncodedGoF<T>],
        reference: Option<&[TriangleMesh<T>]>,
        mode: WeightMode,
    ) -> Result<Self, NetsimError> {
        let first = gofs.first().ok_or(NetsimError::EmptyStream)?;
        let levels = first.level_count();
        if gofs.iter().any(|g| g.level_count() != levels) {
            return Err(NetsimError::InvalidConfig("GoFs disagree on ladder size".into()));
        }
        let total: usize = gofs.iter().map(EncodedGoF::gof_length).sum();
        if let Some(r) = reference {
            if r.len() != total {
                return Err(MetricsError::LengthMismatch { frames: total, reference: r.len() }.into());
            }
        }
        let mut raw_bytes = Vec::with_capacity(total);
        let mut gof_head = Vec::with_capacity(total);
        let mut level_error = vec![Vec::with_capacity(total); levels];
        let mut offset = 0;
        for g in gofs {
            let raw = raw_frame_bytes(g.i_frame.vertex_count(), g.i_frame.face_count());
            let graph_bytes: u64 =
                g.levels.iter().map(|l| 12 + 4 * l.node_count() as u64 + 8 * l.edges.len() as u64).sum();
            for t in 0..g.gof_length() {
                raw_bytes.push(if t == 0 { raw + 12 + graph_bytes } else { raw });
                gof_head.push(t == 0);
            }
            let graphs = g.level_graphs(mode)?;
            let decoded: Vec<Vec<TriangleMesh<T>>> = (0..levels)
                .into_par_iter()
                .map(|b| decode_with_graphs(g, &graphs, &vec![b; g.gof_length()]))
                .collect::<Result<_, _>>()?;
            let span = offset..offset + g.gof_length();
            for b in 0..levels {
                let against: &[TriangleMesh<T>] = match reference {
                    Some(r) => &r[span.clone()],
                    None => &decoded[levels - 1],
                };
                let errs = sequence_hausdorff(&decoded[b], against)?;
                level_error[b].push(0.0);
                level_error[b].extend(errs.into_iter().skip(1).map(Real::to_f64_lossy));
            }
            offset += g.gof_length();
        }
        Ok(StreamTables {
            fps: first.fps,
            raw_bytes,
            gof_head,
            level_nodes: first.levels.iter().map(|l| l.node_count()).collect(),
            level_bytes: first.levels.iter().map(|l| p_frame_bytes(l.node_count())).collect(),
            level_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub coeffs: QoECoefficients,
    pub startup_buffer_s: f64,
    /// A single stall longer than this ends the session.
    pub max_stall_s: f64,
    /// Frames per chunk; defaults to one second of video.
    pub chunk_frames: Option<usize>,
    pub parallel_dp: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            coeffs: QoECoefficients::default(),
            startup_buffer_s: 1.0,
            max_stall_s: 30.0,
            chunk_frames: None,
            parallel_dp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub index: usize,
    pub first_frame: usize,
    pub frame_count: usize,
    pub budget_bytes: u64,
    pub plan_bytes: u64,
    /// The budget admitted no plan and the cheapest plan was sent anyway.
    pub overrun: bool,
    pub intervals: Vec<(usize, usize)>,
    /// Per frame: `None` for raw, otherwise the ladder level.
    pub levels: Vec<Option<usize>>,
    pub hausdorff: Vec<f64>,
    pub qoe: f64,
    pub download_start_ns: i128,
    pub download_end_ns: i128,
    pub decode_ns: i128,
    pub ready_ns: i128,
    pub play_start_ns: i128,
    pub rebuffer_ns: i128,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub chunks: Vec<ChunkRecord>,
    #[serde(skip)]
    pub plans: Vec<AdaptationPlan>,
    pub startup_ns: i128,
    pub playback_ns: i128,
    pub rebuffer_ns: i128,
    pub total_ns: i128,
    pub total_rebuffer_s: f64,
    pub mean_hausdorff: f64,
    pub median_hausdorff: f64,
    pub mean_latency_s: f64,
    pub overrun_count: usize,
    /// The session ended early after a stall longer than the configured limit.
    pub aborted: bool,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// One row per chunk.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "chunk,first_frame,frames,budget_bytes,plan_bytes,overrun,download_s,decode_s,rebuffer_s,latency_s,mean_hausdorff,qoe\n",
        );
        for c in &self.chunks {
            let mean_h = c.hausdorff.iter().sum::<f64>() / c.hausdorff.len().max(1) as f64;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.index,
                c.first_frame,
                c.frame_count,
                c.budget_bytes,
                c.plan_bytes,
                c.overrun,
                (c.download_end_ns - c.download_start_ns) as f64 / NS_PER_S,
                c.decode_ns as f64 / NS_PER_S,
                c.rebuffer_ns as f64 / NS_PER_S,
                c.latency_s,
                mean_h,
                c.qoe
            );
        }
        s
    }

    /// Every chunk's plan as JSON lines tagged with the chunk index.
    pub fn plans_json_lines(&self) -> String {
        self.plans.iter().enumerate().map(|(i, p)| p.to_json_lines(Some(i))).collect()
    }
}

fn secs_to_ns(s: f64) -> i128 {
    (s * NS_PER_S).round() as i128
}

/// Options for one chunk: forced-raw frames get only the raw option.
fn chunk_options(
    tables: &StreamTables,
    frames: std::ops::Range<usize>,
    forced_raw: &[bool],
    model: &DecodeTimeModel,
) -> Vec<Vec<FrameOption>> {
    frames
        .zip(forced_raw)
        .map(|(t, &forced)| {
            let mut opts = vec![FrameOption::raw(t, tables.raw_bytes[t])];
            if !forced {
                for b in 0..tables.level_nodes.len() {
                    opts.push(FrameOption::reconstructed(
                        t,
                        b,
                        tables.level_bytes[b],
                        tables.level_error[b][t],
                        model.predict(tables.level_nodes[b]),
                    ));
                }
            }
            opts
        })
        .collect()
}

/// Streams the whole sequence chunk by chunk. Each chunk's budget is the
/// trace volume over the second preceding its download start; I-frame
/// placement comes from the dependency tree and per-frame options from the
/// QoE dynamic program. Playback starts after the startup buffer and stalls
/// whenever the next chunk has not finished decoding.
pub fn simulate(
    tables: &StreamTables,
    trace: &BandwidthTrace,
    model: &DecodeTimeModel,
    config: &SimConfig,
) -> Result<SimReport, NetsimError> {
    let n = tables.frame_count();
    if n == 0 {
        return Err(NetsimError::EmptyStream);
    }
    if tables.fps == 0 {
        return Err(NetsimError::InvalidConfig("fps must be positive".into()));
    }
    if !(config.startup_buffer_s >= 0.0 && config.max_stall_s > 0.0) {
        return Err(NetsimError::InvalidConfig("startup buffer and stall limit must be non-negative".into()));
    }
    config.coeffs.validate()?;
    let chunk_frames = config.chunk_frames.unwrap_or(tables.fps as usize).max(1);
    let fps = tables.fps as i128;
    let frame_start_ns = |t: usize| t as i128 * 1_000_000_000 / fps;
    let lowest = 0;

    let startup_ns = secs_to_ns(config.startup_buffer_s);
    let max_stall_ns = secs_to_ns(config.max_stall_s);
    let mut play_clock = startup_ns;
    let mut playback_ns = 0i128;
    let mut rebuffer_ns = 0i128;
    let mut download_free = 0i128;
    let mut decode_free = 0i128;
    let mut prev_quality: Option<f64> = None;
    let mut chunks = Vec::new();
    let mut plans = Vec::new();
    let mut aborted = false;

    for (index, first) in (0..n).step_by(chunk_frames).enumerate() {
        let range = first..(first + chunk_frames).min(n);
        let len = range.len();
        let available = frame_start_ns(first);
        let download_start = available.max(download_free);
        let budget = (trace.bits_between(download_start - 1_000_000_000, download_start) / 8.0).floor() as u64;

        let mut forced: Vec<bool> = range.clone().map(|t| tables.gof_head[t]).collect();
        forced[0] = true;
        // The tree prices every non-head frame at the lowest level.
        let p_bytes: Vec<u64> = range
            .clone()
            .zip(&forced)
            .map(|(t, &f)| if f { tables.raw_bytes[t] } else { tables.level_bytes[lowest] })
            .collect();
        let p_error: Vec<f64> =
            range.clone().zip(&forced).map(|(t, &f)| if f { 0.0 } else { tables.level_error[lowest][t] }).collect();
        let raw: Vec<u64> = range.clone().map(|t| tables.raw_bytes[t]).collect();
        let tree = build_dependency_tree(len, &raw, &p_bytes, &p_error)?;

        let (plan, intervals, overrun) = match select_dependency_depth(&tree, budget) {
            Ok(intervals) => {
                for &(lo, _) in &intervals {
                    forced[lo] = true;
                }
                let options = chunk_options(tables, range.clone(), &forced, model);
                let dp = DpConfig { prune: true, parallel: config.parallel_dp };
                let plan = optimize_chunk_with(&options, budget, &config.coeffs, prev_quality, dp)?;
                (plan, intervals, false)
            }
            Err(AbrError::InfeasibleBudget) => {
                let options = chunk_options(tables, range.clone(), &forced, model);
                let choice: Vec<usize> = forced.iter().map(|&f| if f { 0 } else { 1 + lowest }).collect();
                let plan = AdaptationPlan::from_choices(&options, &choice, prev_quality, &config.coeffs);
                (plan, vec![(0, len - 1)], true)
            }
            Err(e) => return Err(e.into()),
        };

        let decode_s: f64 = plan
            .frames
            .iter()
            .filter(|f| f.option.kind == FrameKind::Reconstructed)
            .map(|f| f.option.decode_latency)
            .sum();
        let decode_ns = secs_to_ns(decode_s);
        let download_end = trace.finish_time(download_start, plan.total_bytes);
        let ready = download_end.map(|d| d.max(decode_free) + decode_ns);
        let stall = ready.map_or(i128::MAX, |r| (r - play_clock).max(0));
        let duration_ns = frame_start_ns(range.end) - frame_start_ns(first);

        let record_base = |download_end_ns: i128, ready_ns: i128, play_start_ns: i128, rebuffer: i128| ChunkRecord {
            index,
            first_frame: first,
            frame_count: len,
            budget_bytes: budget,
            plan_bytes: plan.total_bytes,
            overrun,
            intervals: intervals.iter().map(|&(a, b)| (a + first, b + first)).collect(),
            levels: plan.frames.iter().map(|f| f.option.level).collect(),
            hausdorff: plan.frames.iter().map(|f| f.option.quality_error).collect(),
            qoe: plan.total_qoe,
            download_start_ns: download_start,
            download_end_ns,
            decode_ns,
            ready_ns,
            play_start_ns,
            rebuffer_ns: rebuffer,
            latency_s: (play_start_ns - available) as f64 / NS_PER_S,
        };

        if stall > max_stall_ns {
            rebuffer_ns += max_stall_ns;
            play_clock += max_stall_ns;
            let end = download_end.unwrap_or(i128::MAX);
            chunks.push(record_base(end, ready.unwrap_or(i128::MAX), play_clock, max_stall_ns));
            plans.push(plan);
            aborted = true;
            break;
        }
        let ready = ready.expect("finite stall implies completion");
        rebuffer_ns += stall;
        play_clock += stall;
        chunks.push(record_base(download_end.expect("finite"), ready, play_clock, stall));
        prev_quality = plan.frames.last().map(|f| f.option.quality_error);
        plans.push(plan);
        play_clock += duration_ns;
        playback_ns += duration_ns;
        download_free = download_end.expect("finite");
        decode_free = ready;
    }

    let all_h: Vec<f64> = chunks.iter().flat_map(|c| c.hausdorff.iter().copied()).collect();
    let mean_hausdorff = if all_h.is_empty() { 0.0 } else { all_h.iter().sum::<f64>() / all_h.len() as f64 };
    let median_hausdorff = median(&all_h);
    let mean_latency_s = if chunks.is_empty() { 0.0 } else { chunks.iter().map(|c| c.latency_s).sum::<f64>() / chunks.len() as f64 };
    Ok(SimReport {
        overrun_count: chunks.iter().filter(|c| c.overrun).count(),
        chunks,
        plans,
        startup_ns,
        playback_ns,
        rebuffer_ns,
        total_ns: play_clock,
        total_rebuffer_s: rebuffer_ns as f64 / NS_PER_S,
        mean_hausdorff,
        median_hausdorff,
        mean_latency_s,
        aborted,
    })
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
