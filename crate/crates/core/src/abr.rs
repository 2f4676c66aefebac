//! Frame-level adaptation: QoE model, frame-dependency tree and the
//! budget-constrained dynamic program choosing one option per frame.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbrError {
    #[error("no option combination fits the budget")]
    InfeasibleBudget,
    #[error("QoE coefficients must be finite and non-negative")]
    InvalidCoefficients,
    #[error("chunk has no frames")]
    EmptyChunk,
    #[error("frame {0} has no options")]
    NoOptions(usize),
    #[error("frame {0} has more than 255 options")]
    TooManyOptions(usize),
    #[error("table lengths disagree: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoECoefficients {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// Adds `+μ3·l` instead of subtracting it.
    pub latency_reward: bool,
}

impl Default for QoECoefficients {
    fn default() -> Self {
        QoECoefficients { mu1: 1.0, mu2: 1.0, mu3: 1.0, latency_reward: false }
    }
}

impl QoECoefficients {
    pub fn validate(&self) -> Result<(), AbrError> {
        if [self.mu1, self.mu2, self.mu3].iter().all(|m| m.is_finite() && *m >= 0.0) {
            Ok(())
        } else {
            Err(AbrError::InvalidCoefficients)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Raw,
    Reconstructed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOption {
    pub frame: usize,
    pub kind: FrameKind,
    /// Ladder level index for reconstructed options.
    pub level: Option<usize>,
    pub size_bytes: u64,
    /// Distortion of the decoded frame (Hausdorff, model units).
    pub quality_error: f64,
    /// Decode latency in seconds.
    pub decode_latency: f64,
}

impl FrameOption {
    pub fn raw(frame: usize, size_bytes: u64) -> Self {
        FrameOption { frame, kind: FrameKind::Raw, level: None, size_bytes, quality_error: 0.0, decode_latency: 0.0 }
    }

    pub fn reconstructed(frame: usize, level: usize, size_bytes: u64, quality_error: f64, decode_latency: f64) -> Self {
        FrameOption { frame, kind: FrameKind::Reconstructed, level: Some(level), size_bytes, quality_error, decode_latency }
    }
}

/// `−μ1·q − μ2·|q − q_prev| − μ3·l`; the smoothness term is dropped when
/// there is no previous frame.
pub fn qoe(option: &FrameOption, prev_quality: Option<f64>, c: &QoECoefficients) -> f64 {
    let q = option.quality_error;
    let smooth = prev_quality.map_or(0.0, |p| c.mu2 * (q - p).abs());
    let latency = c.mu3 * option.decode_latency;
    let base = -(c.mu1 * q) - smooth;
    if c.latency_reward {
        base + latency
    } else {
        base - latency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedFrame {
    pub option: FrameOption,
    pub qoe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPlan {
    pub frames: Vec<PlannedFrame>,
    pub total_qoe: f64,
    pub total_bytes: u64,
}

#[derive(Serialize)]
struct PlanLine<'a> {
    frame: usize,
    kind: FrameKind,
    level: Option<usize>,
    bytes: u64,
    q: f64,
    l: f64,
    qoe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    chunk: Option<&'a usize>,
}

impl AdaptationPlan {
    /// Builds a plan from chosen option ordinals, accumulating QoE in frame order.
    pub fn from_choices(
        options: &[Vec<FrameOption>],
        choice: &[usize],
        prev_quality: Option<f64>,
        coeffs: &QoECoefficients,
    ) -> Self {
        let mut prev = prev_quality;
        let mut total_qoe = 0.0;
        let mut total_bytes = 0;
        let frames = options
            .iter()
            .zip(choice)
            .map(|(opts, &c)| {
                let option = opts[c].clone();
                let q = qoe(&option, prev, coeffs);
                total_qoe += q;
                total_bytes += option.size_bytes;
                prev = Some(option.quality_error);
                PlannedFrame { option, qoe: q }
            })
            .collect();
        AdaptationPlan { frames, total_qoe, total_bytes }
    }

    /// One JSON object per frame: frame, kind, level, bytes, q, l, qoe.
    pub fn to_json_lines(&self, chunk: Option<usize>) -> String {
        let mut out = String::new();
        for f in &self.frames {
            let line = PlanLine {
                frame: f.option.frame,
                kind: f.option.kind,
                level: f.option.level,
                bytes: f.option.size_bytes,
                q: f.option.quality_error,
                l: f.option.decode_latency,
                qoe: f.qoe,
                chunk: chunk.as_ref(),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&line).expect("plain data serializes"));
        }
        out
    }
}

/// A DP state: bytes consumed so far, the option ordinal chosen for the
/// latest frame, and the accumulated QoE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpState {
    pub bytes: u64,
    pub ordinal: usize,
    pub qoe: f64,
}

/// Drops states over `budget` and states dominated by another state with the
/// same ordinal, fewer bytes and at least the same QoE. Output is ordered by
/// `(ordinal, bytes)`.
pub fn prune_states(states: &[DpState], budget: u64) -> Vec<DpState> {
    let mut s: Vec<DpState> = states.iter().copied().filter(|x| x.bytes <= budget).collect();
    s.sort_by(|a, b| a.ordinal.cmp(&b.ordinal).then(a.bytes.cmp(&b.bytes)).then(b.qoe.total_cmp(&a.qoe)));
    let mut out: Vec<DpState> = Vec::with_capacity(s.len());
    let mut best = f64::NEG_INFINITY;
    for x in s {
        match out.last() {
            Some(last) if last.ordinal == x.ordinal => {
                if x.qoe > best {
                    best = x.qoe;
                    out.push(x);
                }
            }
            _ => {
                best = x.qoe;
                out.push(x);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpConfig {
    /// Apply dominance pruning after every layer.
    pub prune: bool,
    /// Evaluate a layer's target ordinals concurrently.
    pub parallel: bool,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig { prune: true, parallel: false }
    }
}

#[derive(Clone, Copy)]
struct Cell {
    bytes: u64,
    qoe: f64,
    // Predecessor as (ordinal, index within that ordinal's state list).
    prev: (u32, u32),
}

fn validate_chunk(options: &[Vec<FrameOption>], coeffs: &QoECoefficients) -> Result<(), AbrError> {
    coeffs.validate()?;
    if options.is_empty() {
        return Err(AbrError::EmptyChunk);
    }
    for (i, o) in options.iter().enumerate() {
        if o.is_empty() {
            return Err(AbrError::NoOptions(i));
        }
        if o.len() > u8::MAX as usize {
            return Err(AbrError::TooManyOptions(i));
        }
    }
    Ok(())
}

/// Maximizes total QoE subject to total bytes ≤ `budget` over sparse states
/// keyed by `(bytes, ordinal of the latest frame)`. Ties prefer fewer bytes,
/// then the lower option ordinal.
pub fn optimize_chunk(
    options: &[Vec<FrameOption>],
    budget: u64,
    coeffs: &QoECoefficients,
    prev_quality: Option<f64>,
) -> Result<AdaptationPlan, AbrError> {
    optimize_chunk_with(options, budget, coeffs, prev_quality, DpConfig::default())
}

pub fn optimize_chunk_with(
    options: &[Vec<FrameOption>],
    budget: u64,
    coeffs: &QoECoefficients,
    prev_quality: Option<f64>,
    config: DpConfig,
) -> Result<AdaptationPlan, AbrError> {
    validate_chunk(options, coeffs)?;
    // layers[i][o] holds the states whose frame-i choice is ordinal o, sorted by bytes.
    let mut layers: Vec<Vec<Vec<Cell>>> = Vec::with_capacity(options.len());
    let first: Vec<Vec<Cell>> = options[0]
        .iter()
        .map(|o| {
            if o.size_bytes <= budget {
                vec![Cell { bytes: o.size_bytes, qoe: 0.0 + qoe(o, prev_quality, coeffs), prev: (0, 0) }]
            } else {
                Vec::new()
            }
        })
        .collect();
    layers.push(first);

    for i in 1..options.len() {
        let prev_layer = &layers[i - 1];
        let prev_opts = &options[i - 1];
        let build = |o: usize| -> Vec<Cell> {
            let opt = &options[i][o];
            let mut cands: Vec<Cell> = Vec::new();
            for (p, states) in prev_layer.iter().enumerate() {
                let gain = qoe(opt, Some(prev_opts[p].quality_error), coeffs);
                for (idx, s) in states.iter().enumerate() {
                    let bytes = s.bytes + opt.size_bytes;
                    if bytes > budget {
                        // States are sorted by bytes; the rest overflow too.
                        break;
                    }
                    cands.push(Cell { bytes, qoe: s.qoe + gain, prev: (p as u32, idx as u32) });
                }
            }
            merge_candidates(cands, config.prune)
        };
        let next: Vec<Vec<Cell>> = if config.parallel {
            (0..options[i].len()).into_par_iter().map(build).collect()
        } else {
            (0..options[i].len()).map(build).collect()
        };
        layers.push(next);
    }

    let last = layers.last().expect("non-empty");
    let mut best: Option<(f64, u64, usize, usize)> = None;
    for (o, states) in last.iter().enumerate() {
        for (idx, s) in states.iter().enumerate() {
            let better = match best {
                None => true,
                Some((q, b, bo, _)) => s.qoe > q || (s.qoe == q && (s.bytes < b || (s.bytes == b && o < bo))),
            };
            if better {
                best = Some((s.qoe, s.bytes, o, idx));
            }
        }
    }
    let (_, _, mut o, mut idx) = best.ok_or(AbrError::InfeasibleBudget)?;
    let mut choice = vec![0; options.len()];
    for i in (0..options.len()).rev() {
        choice[i] = o;
        let cell = layers[i][o][idx];
        (o, idx) = (cell.prev.0 as usize, cell.prev.1 as usize);
    }
    Ok(AdaptationPlan::from_choices(options, &choice, prev_quality, coeffs))
}

/// Keeps the best candidate per byte count (max QoE, then lower predecessor
/// ordinal, then lower predecessor index) and, with `prune`, only states that
/// strictly improve QoE over every cheaper state.
fn merge_candidates(mut cands: Vec<Cell>, prune: bool) -> Vec<Cell> {
    cands.sort_unstable_by(|a, b| {
        a.bytes.cmp(&b.bytes).then(b.qoe.total_cmp(&a.qoe)).then(a.prev.cmp(&b.prev))
    });
    let mut out: Vec<Cell> = Vec::with_capacity(cands.len());
    let mut best = f64::NEG_INFINITY;
    for c in cands {
        if out.last().is_some_and(|l| l.bytes == c.bytes) {
            continue;
        }
        if prune {
            if c.qoe <= best {
                continue;
            }
            best = c.qoe;
        }
        out.push(c);
    }
    out
}

/// Byte-indexed DP over every budget value `0..=budget`, without pruning.
/// Same objective and tie-breaking as [`optimize_chunk`].
pub fn optimize_chunk_dense(
    options: &[Vec<FrameOption>],
    budget: u64,
    coeffs: &QoECoefficients,
    prev_quality: Option<f64>,
) -> Result<AdaptationPlan, AbrError> {
    validate_chunk(options, coeffs)?;
    let width = budget as usize + 1;
    let n = options.len();
    let k_max = options.iter().map(Vec::len).max().unwrap_or(0);
    // parents[i][o * width + b]: ordinal of frame i-1 on the best path into (b, o).
    let mut parents: Vec<Vec<u8>> = Vec::with_capacity(n);
    let mut cur = vec![f64::NEG_INFINITY; k_max * width];
    for (o, opt) in options[0].iter().enumerate() {
        if opt.size_bytes <= budget {
            cur[o * width + opt.size_bytes as usize] = 0.0 + qoe(opt, prev_quality, coeffs);
        }
    }
    parents.push(Vec::new());
    let mut next = vec![f64::NEG_INFINITY; k_max * width];
    for i in 1..n {
        let mut par = vec![0u8; k_max * width];
        next.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        for (o, opt) in options[i].iter().enumerate() {
            let size = opt.size_bytes as usize;
            if size > budget as usize {
                continue;
            }
            for (p, prev_opt) in options[i - 1].iter().enumerate() {
                let gain = qoe(opt, Some(prev_opt.quality_error), coeffs);
                let src = &cur[p * width..p * width + width - size];
                let dst = &mut next[o * width + size..o * width + width];
                let pdst = &mut par[o * width + size..o * width + width];
                for ((d, pd), &s) in dst.iter_mut().zip(pdst.iter_mut()).zip(src) {
                    let v = s + gain;
                    // Predecessor ordinals ascend, so strict `>` keeps the lower one on ties.
                    if v > *d {
                        *d = v;
                        *pd = p as u8;
                    }
                }
            }
        }
        parents.push(par);
        std::mem::swap(&mut cur, &mut next);
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for b in 0..width {
        for o in 0..options[n - 1].len() {
            let v = cur[o * width + b];
            if v > f64::NEG_INFINITY && best.is_none_or(|(q, _, _)| v > q) {
                best = Some((v, b, o));
            }
        }
    }
    let (_, mut b, mut o) = best.ok_or(AbrError::InfeasibleBudget)?;
    let mut choice = vec![0; n];
    for i in (0..n).rev() {
        choice[i] = o;
        if i > 0 {
            let p = parents[i][o * width + b] as usize;
            b -= options[i][o].size_bytes as usize;
            o = p;
        }
    }
    Ok(AdaptationPlan::from_choices(options, &choice, prev_quality, coeffs))
}

/// Interval node of the dependency tree over 0-based frames `lo..=hi`; the
/// interval's frames depend on frame `lo` through a P-frame chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub lo: usize,
    pub hi: usize,
    /// P bytes of frames `lo+1..=hi`.
    pub chain_bytes: u64,
    /// Raw bytes of the interval head `lo`.
    pub head_raw_bytes: u64,
    /// Summed error of frames `lo+1..=hi`.
    pub error: f64,
    pub children: Option<(usize, usize)>,
}

impl TreeNode {
    pub fn cost(&self) -> u64 {
        self.head_raw_bytes + self.chain_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDependencyTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl FrameDependencyTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.children.is_none())
    }
}

/// Balanced segment tree over `n` frames. `raw_bytes[t]`, `p_bytes[t]` and
/// `p_error[t]` describe frame `t` (the P entries of frame 0 are unused).
pub fn build_dependency_tree(
    n: usize,
    raw_bytes: &[u64],
    p_bytes: &[u64],
    p_error: &[f64],
) -> Result<FrameDependencyTree, AbrError> {
    if n == 0 {
        return Err(AbrError::EmptyChunk);
    }
    for len in [raw_bytes.len(), p_bytes.len(), p_error.len()] {
        if len != n {
            return Err(AbrError::SizeMismatch { expected: n, got: len });
        }
    }
    let mut nodes = Vec::with_capacity(2 * n - 1);
    let root = build_node(&mut nodes, 0, n - 1, raw_bytes, p_bytes, p_error);
    Ok(FrameDependencyTree { nodes, root })
}

fn build_node(nodes: &mut Vec<TreeNode>, lo: usize, hi: usize, raw: &[u64], p: &[u64], e: &[f64]) -> usize {
    let children = (lo < hi).then(|| {
        let mid = (lo + hi) / 2;
        (build_node(nodes, lo, mid, raw, p, e), build_node(nodes, mid + 1, hi, raw, p, e))
    });
    nodes.push(TreeNode {
        lo,
        hi,
        chain_bytes: p[lo + 1..=hi].iter().sum(),
        head_raw_bytes: raw[lo],
        error: e[lo + 1..=hi].iter().sum(),
        children,
    });
    nodes.len() - 1
}

/// Chooses where intervals (and therefore I-frames) start. Begins with the
/// whole range and, while the total cost exceeds `bandwidth`, splits the
/// interval whose split saves the most bytes (then the one with the larger
/// error, then the earlier one). Returns `(lo, hi)` intervals in frame order.
pub fn select_dependency_depth(tree: &FrameDependencyTree, bandwidth: u64) -> Result<Vec<(usize, usize)>, AbrError> {
    let mut cut = vec![tree.root];
    let total = |cut: &[usize]| cut.iter().map(|&id| tree.nodes[id].cost()).sum::<u64>();
    while total(&cut) > bandwidth {
        let best = cut
            .iter()
            .enumerate()
            .filter_map(|(pos, &id)| {
                let node = &tree.nodes[id];
                node.children.map(|(l, r)| {
                    let split = tree.nodes[l].cost() + tree.nodes[r].cost();
                    (pos, node.cost() as i128 - split as i128, node.error, node.lo)
                })
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(a.2.total_cmp(&b.2)).then(b.3.cmp(&a.3)));
        let Some((pos, ..)) = best else {
            return Err(AbrError::InfeasibleBudget);
        };
        let (l, r) = tree.nodes[cut[pos]].children.expect("splittable");
        cut.splice(pos..=pos, [l, r]);
    }
    Ok(cut.iter().map(|&id| (tree.nodes[id].lo, tree.nodes[id].hi)).collect())
}
