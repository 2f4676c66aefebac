//! Anchor node graphs and the embedded-deformation operator.
//!
//! A [`NodeGraph`] samples anchor vertices from a mesh along its principal
//! axis and records, for every vertex, the nodes closer than the influence
//! radius. A [`DeformationParams`] value assigns each node an affine map
//! `(R_j, t_j)`; the deformed position of vertex `v` is the blend of
//! `R_j (v - p_j) + p_j + t_j` over its influencing nodes.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{symmetric_eigen, Mat3, Vec3};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformError {
    #[error("node count {requested} outside 1..={vertices}")]
    NodeCountOutOfRange { requested: usize, vertices: usize },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("rotation of node {0} is singular")]
    SingularRotation(usize),
    #[error("vertex {0} is outside the influence radius of every node")]
    UncoveredVertex(usize),
    #[error("influence radius must be positive and finite")]
    InvalidRadius,
    #[error("node vertex id {0} out of range")]
    NodeIdOutOfRange(u32),
    #[error("ladder node counts must be strictly increasing")]
    UnorderedLevels,
}

/// How node contributions are blended per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Every stored weight is 1 and the blend averages over the influence set.
    #[default]
    Uniform,
    /// Every stored weight is 1 and the blend is the plain sum over the
    /// influence set. Kept to evaluate the unnormalized formula verbatim.
    UniformSum,
    /// `w_j ∝ max(0, 1 - D/R)²`, normalized per vertex, recomputed from the
    /// current positions whenever the graph is rebased.
    NormalizedDistance,
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightMode::Uniform),
            "uniform_sum" => Ok(WeightMode::UniformSum),
            "normalized_distance" | "distance" => Ok(WeightMode::NormalizedDistance),
            other => Err(format!("unknown weight mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfluenceRadius<T> {
    /// Start at `2 * diag / sqrt(node_count)` and double until every vertex is covered.
    Auto,
    Fixed(T),
}

/// Anchor nodes of one mesh with per-vertex influence sets.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGraph<T> {
    node_vertex_ids: Vec<u32>,
    node_positions: Vec<Vec3<T>>,
    radius: T,
    weight_mode: WeightMode,
    // CSR layout of the influence sets, node indices ascending per vertex.
    offsets: Vec<u32>,
    nodes: Vec<u32>,
    weights: Vec<T>,
    edges: Vec<(u32, u32)>,
    // Vertices sharing an identical influence set share one group.
    group_of_vertex: Vec<u32>,
    group_offsets: Vec<u32>,
    group_nodes: Vec<u32>,
}

impl<T: Real> NodeGraph<T> {
    /// Builds the graph for explicitly chosen anchor vertices.
    pub fn from_nodes(
        mesh: &TriangleMesh<T>,
        node_vertex_ids: Vec<u32>,
        radius: T,
        weight_mode: WeightMode,
    ) -> Result<Self, DeformError> {
        if mesh.vertex_count() == 0 {
            return Err(DeformError::EmptyMesh);
        }
        if !(radius > T::zero() && radius.is_finite()) {
            return Err(DeformError::InvalidRadius);
        }
        if let Some(&bad) = node_vertex_ids.iter().find(|&&id| id as usize >= mesh.vertex_count()) {
            return Err(DeformError::NodeIdOutOfRange(bad));
        }
        let positions: Vec<Vec3<T>> = node_vertex_ids.iter().map(|&id| mesh.vertices()[id as usize]).collect();
        let tree = KdTree::build(&positions);

        let mut offsets = Vec::with_capacity(mesh.vertex_count() + 1);
        offsets.push(0u32);
        let mut nodes = Vec::new();
        for (i, v) in mesh.vertices().iter().enumerate() {
            let set = tree.within_radius(v, radius);
            if set.is_empty() {
                return Err(DeformError::UncoveredVertex(i));
            }
            nodes.extend(set.into_iter().map(|j| j as u32));
            offsets.push(nodes.len() as u32);
        }

        let mut group_index: HashMap<&[u32], u32> = HashMap::new();
        let mut group_of_vertex = Vec::with_capacity(mesh.vertex_count());
        let mut group_offsets = vec![0u32];
        let mut group_nodes = Vec::new();
        for i in 0..mesh.vertex_count() {
            let set = &nodes[offsets[i] as usize..offsets[i + 1] as usize];
            let g = *group_index.entry(set).or_insert_with(|| {
                group_nodes.extend_from_slice(set);
                group_offsets.push(group_nodes.len() as u32);
                (group_offsets.len() - 2) as u32
            });
            group_of_vertex.push(g);
        }

        let edges = edges_from_groups(positions.len(), &group_offsets, &group_nodes);
        let weights = vec![T::one(); nodes.len()];
        let mut graph = NodeGraph {
            node_vertex_ids,
            node_positions: positions,
            radius,
            weight_mode,
            offsets,
            nodes,
            weights,
            edges,
            group_of_vertex,
            group_offsets,
            group_nodes,
        };
        if weight_mode == WeightMode::NormalizedDistance {
            graph.recompute_distance_weights(mesh);
        }
        Ok(graph)
    }

    fn recompute_distance_weights(&mut self, mesh: &TriangleMesh<T>) {
        let inv_r = T::one() / self.radius;
        for (i, v) in mesh.vertices().iter().enumerate() {
            let (lo, hi) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
            distance_weights(v, &self.nodes[lo..hi], &self.node_positions, inv_r, &mut self.weights[lo..hi]);
        }
    }

    /// Same graph anchored on `mesh` (a later frame with the same topology):
    /// node positions follow their vertices and, in distance mode, weights are
    /// recomputed from the current distances. Influence sets stay fixed.
    pub fn rebased(&self, mesh: &TriangleMesh<T>) -> Result<Self, DeformError> {
        if mesh.vertex_count() != self.vertex_count() {
            return Err(DeformError::SizeMismatch { expected: self.vertex_count(), got: mesh.vertex_count() });
        }
        let mut g = self.clone();
        g.node_positions = self.node_vertex_ids.iter().map(|&id| mesh.vertices()[id as usize]).collect();
        if g.weight_mode == WeightMode::NormalizedDistance {
            g.recompute_distance_weights(mesh);
        }
        Ok(g)
    }

    /// Switches the blend mode, recomputing stored weights against `mesh`.
    pub fn with_weight_mode(&self, mode: WeightMode, mesh: &TriangleMesh<T>) -> Result<Self, DeformError> {
        let mut g = self.rebased(mesh)?;
        g.weight_mode = mode;
        if mode == WeightMode::NormalizedDistance {
            g.recompute_distance_weights(mesh);
        } else {
            g.weights.iter_mut().for_each(|w| *w = T::one());
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.node_vertex_ids.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn node_vertex_ids(&self) -> &[u32] {
        &self.node_vertex_ids
    }

    pub fn node_positions(&self) -> &[Vec3<T>] {
        &self.node_positions
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    /// Unordered node pairs `(j, k)` with `j < k`, sorted.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Node indices influencing vertex `i` with their stored weights.
    pub fn influences(&self, i: usize) -> (&[u32], &[T]) {
        let (lo, hi) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        (&self.nodes[lo..hi], &self.weights[lo..hi])
    }

    /// Weights actually used in the blend for vertex `i`.
    pub fn blend_weights(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (nodes, weights) = self.influences(i);
        let scale = match self.weight_mode {
            WeightMode::Uniform => T::one() / T::from_usize_lossy(nodes.len()),
            _ => T::one(),
        };
        nodes.iter().zip(weights).map(move |(&j, &w)| (j as usize, w * scale))
    }

    pub fn group_count(&self) -> usize {
        self.group_offsets.len() - 1
    }
}

fn edges_from_groups(node_count: usize, group_offsets: &[u32], group_nodes: &[u32]) -> Vec<(u32, u32)> {
    let words = node_count.div_ceil(64);
    let mut adjacency = vec![0u64; node_count * words];
    let mut members = vec![0u64; words];
    for g in 0..group_offsets.len() - 1 {
        let set = &group_nodes[group_offsets[g] as usize..group_offsets[g + 1] as usize];
        members.iter_mut().for_each(|w| *w = 0);
        for &j in set {
            members[j as usize / 64] |= 1 << (j % 64);
        }
        for &j in set {
            let row = &mut adjacency[j as usize * words..(j as usize + 1) * words];
            for (r, m) in row.iter_mut().zip(&members) {
                *r |= *m;
            }
        }
    }
    let mut edges = Vec::new();
    for j in 0..node_count {
        let row = &adjacency[j * words..(j + 1) * words];
        for (w, &bits) in row.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                let k = w * 64 + b.trailing_zeros() as usize;
                b &= b - 1;
                if k > j {
                    edges.push((j as u32, k as u32));
                }
            }
        }
    }
    edges
}

/// Vertex indices sorted by their projection on the first principal axis
/// (ties by index).
pub fn pca_order<T: Real>(mesh: &TriangleMesh<T>) -> Vec<usize> {
    let c = mesh.centroid();
    let mut cov = Mat3::<T>::zero();
    for v in mesh.vertices() {
        let d = *v - c;
        for a in 0..3 {
            for b in 0..3 {
                cov.0[a][b] = cov.0[a][b] + d[a] * d[b];
            }
        }
    }
    let (_, vecs) = symmetric_eigen(&cov);
    let mut axis = vecs[0];
    // Fix the eigenvector sign so the ordering is reproducible.
    let lead = (0..3).max_by(|&a, &b| axis[a].abs().partial_cmp(&axis[b].abs()).unwrap()).unwrap_or(0);
    if axis[lead] < T::zero() {
        axis = -axis;
    }
    let proj: Vec<T> = mesh.vertices().iter().map(|v| (*v - c).dot(&axis)).collect();
    let mut order: Vec<usize> = (0..mesh.vertex_count()).collect();
    order.sort_by(|&a, &b| proj[a].partial_cmp(&proj[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

/// `count` evenly spaced ranks in `0..len`, endpoints included when `count >= 2`.
pub fn even_ranks(len: usize, count: usize) -> Vec<usize> {
    match count {
        0 => Vec::new(),
        1 => vec![(len - 1) / 2],
        _ => (0..count).map(|k| (2 * k * (len - 1) + (count - 1)) / (2 * (count - 1))).collect(),
    }
}

fn auto_radius<T: Real>(mesh: &TriangleMesh<T>, node_positions: &[Vec3<T>]) -> T {
    let diag = mesh.bbox_diagonal();
    let n = T::from_usize_lossy(node_positions.len());
    let mut r = T::lit(2.0) * diag / n.sqrt();
    if !(r > T::zero()) {
        // All vertices coincide; any positive radius covers them.
        return T::one();
    }
    // Coverage means the nearest node is strictly inside the radius.
    let tree = KdTree::build(node_positions);
    let worst = mesh.vertices().iter().map(|v| tree.nearest(v).map(|(_, d)| d).unwrap_or(T::zero())).fold(T::zero(), T::max);
    while !(r * r > worst) {
        r = r * T::lit(2.0);
    }
    r
}

/// Samples `node_count` anchors at evenly spaced ranks of the principal-axis
/// ordering and builds their influence sets.
pub fn extract_node_graph<T: Real>(
    mesh: &TriangleMesh<T>,
    node_count: usize,
    radius: InfluenceRadius<T>,
    weight_mode: WeightMode,
) -> Result<NodeGraph<T>, DeformError> {
    let v = mesh.vertex_count();
    if v == 0 {
        return Err(DeformError::EmptyMesh);
    }
    if node_count == 0 || node_count > v {
        return Err(DeformError::NodeCountOutOfRange { requested: node_count, vertices: v });
    }
    let order = pca_order(mesh);
    let ids: Vec<u32> = even_ranks(v, node_count).into_iter().map(|r| order[r] as u32).collect();
    build_with_radius(mesh, ids, radius, weight_mode)
}

fn build_with_radius<T: Real>(
    mesh: &TriangleMesh<T>,
    ids: Vec<u32>,
    radius: InfluenceRadius<T>,
    weight_mode: WeightMode,
) -> Result<NodeGraph<T>, DeformError> {
    let r = match radius {
        InfluenceRadius::Fixed(r) => r,
        InfluenceRadius::Auto => {
            let pos: Vec<_> = ids.iter().map(|&i| mesh.vertices()[i as usize]).collect();
            auto_radius(mesh, &pos)
        }
    };
    NodeGraph::from_nodes(mesh, ids, r, weight_mode)
}

/// One graph per ladder level with nested anchor sets: every coarser level
/// picks evenly spaced nodes out of the next finer level's ordered anchors.
/// `radius_for` maps each level's final radius (e.g. rounding to wire precision).
pub fn extract_nested_graphs<T: Real>(
    mesh: &TriangleMesh<T>,
    node_counts: &[usize],
    radius: InfluenceRadius<T>,
    weight_mode: WeightMode,
    radius_for: impl Fn(T) -> T,
) -> Result<Vec<NodeGraph<T>>, DeformError> {
    let v = mesh.vertex_count();
    if v == 0 {
        return Err(DeformError::EmptyMesh);
    }
    if node_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DeformError::UnorderedLevels);
    }
    let Some(&finest) = node_counts.last() else {
        return Ok(Vec::new());
    };
    if node_counts[0] == 0 || finest > v {
        return Err(DeformError::NodeCountOutOfRange { requested: if node_counts[0] == 0 { 0 } else { finest }, vertices: v });
    }
    let order = pca_order(mesh);
    let mut level_ids: Vec<Vec<u32>> = vec![even_ranks(v, finest).into_iter().map(|r| order[r] as u32).collect()];
    for &n in node_counts.iter().rev().skip(1) {
        let finer = level_ids.last().expect("finest level present");
        let ids = even_ranks(finer.len(), n).into_iter().map(|r| finer[r]).collect();
        level_ids.push(ids);
    }
    level_ids
        .into_iter()
        .rev()
        .map(|ids| {
            let r = match radius {
                InfluenceRadius::Fixed(r) => r,
                InfluenceRadius::Auto => {
                    let pos: Vec<_> = ids.iter().map(|&i| mesh.vertices()[i as usize]).collect();
                    auto_radius(mesh, &pos)
                }
            };
            let r = radius_for(r);
            NodeGraph::from_nodes(mesh, ids, r, weight_mode)
        })
        .collect()
}

/// Per-node affine transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationParams<T> {
    pub rotations: Vec<Mat3<T>>,
    pub translations: Vec<Vec3<T>>,
}

impl<T: Real> DeformationParams<T> {
    pub fn identity(node_count: usize) -> Self {
        DeformationParams { rotations: vec![Mat3::identity(); node_count], translations: vec![Vec3::zero(); node_count] }
    }

    /// Every node gets the same rigid motion `x -> rotation * x + translation`.
    pub fn from_rigid(graph: &NodeGraph<T>, rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        let translations = graph
            .node_positions()
            .iter()
            .map(|p| rotation.mul_vec(p) + translation - *p)
            .collect();
        DeformationParams { rotations: vec![rotation; graph.node_count()], translations }
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rotations.iter().all(Mat3::is_finite) && self.translations.iter().all(Vec3::is_finite)
    }

    /// Values as they survive the `f32` wire format.
    pub fn wire_rounded(&self) -> Self {
        DeformationParams {
            rotations: self.rotations.iter().map(Mat3::wire_round).collect(),
            translations: self.translations.iter().map(Vec3::wire_round).collect(),
        }
    }

    fn check(&self, graph: &NodeGraph<T>) -> Result<(), DeformError> {
        if self.rotations.len() != graph.node_count() || self.translations.len() != graph.node_count() {
            return Err(DeformError::SizeMismatch {
                expected: graph.node_count(),
                got: self.rotations.len().min(self.translations.len()),
            });
        }
        Ok(())
    }
}

/// Deforms every vertex (and normal, when present) of `mesh`. Node positions
/// are taken from `mesh` itself at the graph's anchor vertices and distance
/// weights are evaluated against the current positions.
pub fn apply_deformation<T: Real>(
    mesh: &TriangleMesh<T>,
    graph: &NodeGraph<T>,
    params: &DeformationParams<T>,
) -> Result<TriangleMesh<T>, DeformError> {
    if mesh.vertex_count() != graph.vertex_count() {
        return Err(DeformError::SizeMismatch { expected: graph.vertex_count(), got: mesh.vertex_count() });
    }
    params.check(graph)?;
    let anchors: Vec<Vec3<T>> = graph.node_vertex_ids.iter().map(|&id| mesh.vertices()[id as usize]).collect();
    let live = Weights::Live(mesh.vertices());
    let vertices = deform_positions(mesh.vertices(), graph, &anchors, params, live);
    let normals = match mesh.normals() {
        Some(ns) => Some(blend_normals(ns, graph, &anchors, params, live)?),
        None => None,
    };
    Ok(mesh.with_positions(vertices, normals))
}

/// Deformed positions using the graph's stored node positions and weights;
/// `vertices` must be the positions the graph is anchored on.
pub fn deform_vertices<T: Real>(
    vertices: &[Vec3<T>],
    graph: &NodeGraph<T>,
    params: &DeformationParams<T>,
) -> Result<Vec<Vec3<T>>, DeformError> {
    if vertices.len() != graph.vertex_count() {
        return Err(DeformError::SizeMismatch { expected: graph.vertex_count(), got: vertices.len() });
    }
    params.check(graph)?;
    Ok(deform_positions(vertices, graph, &graph.node_positions, params, Weights::Stored))
}

#[derive(Clone, Copy)]
enum Weights<'a, T> {
    Stored,
    /// Recompute distance weights against these vertex positions.
    Live(&'a [Vec3<T>]),
}

/// Normalized `max(0, 1 - D/R)²` weights of `v` over `nodes`, written to `out`.
fn distance_weights<T: Real>(v: &Vec3<T>, nodes: &[u32], anchors: &[Vec3<T>], inv_r: T, out: &mut [T]) {
    let mut sum = T::zero();
    for (w, &j) in out.iter_mut().zip(nodes) {
        let falloff = (T::one() - v.distance(&anchors[j as usize]) * inv_r).max(T::zero());
        *w = falloff * falloff;
        sum = sum + *w;
    }
    if sum > T::zero() {
        let inv = T::one() / sum;
        out.iter_mut().for_each(|w| *w = *w * inv);
    } else {
        let u = T::one() / T::from_usize_lossy(out.len());
        out.iter_mut().for_each(|w| *w = u);
    }
}

fn deform_positions<T: Real>(
    vertices: &[Vec3<T>],
    graph: &NodeGraph<T>,
    anchors: &[Vec3<T>],
    params: &DeformationParams<T>,
    weights: Weights<'_, T>,
) -> Vec<Vec3<T>> {
    let ident = Mat3::identity();
    match graph.weight_mode {
        WeightMode::UniformSum => vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (nodes, _) = graph.influences(i);
                nodes.iter().fold(Vec3::zero(), |acc, &j| {
                    let j = j as usize;
                    let p = anchors[j];
                    acc + params.rotations[j].mul_vec(&(*v - p)) + p + params.translations[j]
                })
            })
            .collect(),
        mode => {
            // Displacement form: v + Σ w_j [(R_j - I) v + t_j - (R_j - I) p_j],
            // which is exactly v when every R_j = I and t_j = 0.
            let lin: Vec<Mat3<T>> = params.rotations.iter().map(|r| r.sub(&ident)).collect();
            let off: Vec<Vec3<T>> = lin
                .iter()
                .zip(&params.translations)
                .zip(anchors)
                .map(|((m, t), p)| *t - m.mul_vec(p))
                .collect();
            if mode == WeightMode::Uniform {
                // Flat rows [a00 a01 a02 c0 | a10 a11 a12 c1 | a20 a21 a22 c2].
                let packed: Vec<[T; 12]> = lin
                    .iter()
                    .zip(&off)
                    .map(|(m, c)| {
                        let mut p = [T::zero(); 12];
                        for a in 0..3 {
                            p[a * 4..a * 4 + 3].copy_from_slice(&m.0[a]);
                            p[a * 4 + 3] = c.0[a];
                        }
                        p
                    })
                    .collect();
                let blended: Vec<[T; 12]> = (0..graph.group_count())
                    .map(|g| {
                        let set = &graph.group_nodes[graph.group_offsets[g] as usize..graph.group_offsets[g + 1] as usize];
                        let mut acc = [T::zero(); 12];
                        for &j in set {
                            let p = &packed[j as usize];
                            for k in 0..12 {
                                acc[k] = acc[k] + p[k];
                            }
                        }
                        let inv = T::one() / T::from_usize_lossy(set.len());
                        acc.iter_mut().for_each(|x| *x = *x * inv);
                        acc
                    })
                    .collect();
                vertices
                    .iter()
                    .zip(&graph.group_of_vertex)
                    .map(|(v, &g)| {
                        let b = &blended[g as usize];
                        let [x, y, z] = v.0;
                        Vec3([
                            x + b[0] * x + b[1] * y + b[2] * z + b[3],
                            y + b[4] * x + b[5] * y + b[6] * z + b[7],
                            z + b[8] * x + b[9] * y + b[10] * z + b[11],
                        ])
                    })
                    .collect()
            } else {
                let inv_r = T::one() / graph.radius;
                let mut buf = Vec::new();
                vertices
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let (nodes, stored) = graph.influences(i);
                        let ws = match weights {
                            Weights::Stored => stored,
                            Weights::Live(pos) => {
                                buf.resize(nodes.len(), T::zero());
                                distance_weights(&pos[i], nodes, anchors, inv_r, &mut buf);
                                &buf[..]
                            }
                        };
                        let mut d = Vec3::zero();
                        for (&j, &w) in nodes.iter().zip(ws) {
                            let j = j as usize;
                            d += (lin[j].mul_vec(v) + off[j]).scale(w);
                        }
                        *v + d
                    })
                    .collect()
            }
        }
    }
}

/// Blends `R_j^{-T} n` over each vertex's influence set (stored weights) and
/// renormalizes.
pub fn transform_normals<T: Real>(
    normals: &[Vec3<T>],
    graph: &NodeGraph<T>,
    params: &DeformationParams<T>,
) -> Result<Vec<Vec3<T>>, DeformError> {
    if normals.len() != graph.vertex_count() {
        return Err(DeformError::SizeMismatch { expected: graph.vertex_count(), got: normals.len() });
    }
    params.check(graph)?;
    blend_normals(normals, graph, &graph.node_positions, params, Weights::Stored)
}

fn blend_normals<T: Real>(
    normals: &[Vec3<T>],
    graph: &NodeGraph<T>,
    anchors: &[Vec3<T>],
    params: &DeformationParams<T>,
    weights: Weights<'_, T>,
) -> Result<Vec<Vec3<T>>, DeformError> {
    let min_det = T::lit(1e-12);
    let inv_t = params
        .rotations
        .iter()
        .enumerate()
        .map(|(j, r)| r.inverse_transpose(min_det).ok_or(DeformError::SingularRotation(j)))
        .collect::<Result<Vec<_>, _>>()?;
    let inv_r = T::one() / graph.radius;
    let mut buf = Vec::new();
    Ok(normals
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let (nodes, stored) = graph.influences(i);
            let blended = match (graph.weight_mode, weights) {
                (WeightMode::NormalizedDistance, Weights::Live(pos)) => {
                    buf.resize(nodes.len(), T::zero());
                    distance_weights(&pos[i], nodes, anchors, inv_r, &mut buf);
                    nodes.iter().zip(&buf).fold(Vec3::zero(), |acc, (&j, &w)| acc + inv_t[j as usize].mul_vec(n).scale(w))
                }
                (WeightMode::NormalizedDistance, Weights::Stored) => {
                    nodes.iter().zip(stored).fold(Vec3::zero(), |acc, (&j, &w)| acc + inv_t[j as usize].mul_vec(n).scale(w))
                }
                // Equal weights only rescale the sum, which renormalization removes.
                _ => nodes.iter().fold(Vec3::zero(), |acc, &j| acc + inv_t[j as usize].mul_vec(n)),
            };
            blended.normalized().unwrap_or(*n)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{compute_vertex_normals, primitives};
    use std::f64::consts::FRAC_PI_2;

    fn line(n: usize) -> TriangleMesh<f64> {
        TriangleMesh::new((0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(), vec![]).unwrap()
    }

    #[test]
    fn collinear_two_nodes_hand_trace() {
        let m = line(10);
        let g = extract_node_graph(&m, 2, InfluenceRadius::Fixed(6.0), WeightMode::Uniform).unwrap();
        let mut xs: Vec<f64> = g.node_positions().iter().map(|p| p.x()).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, vec![0.0, 9.0]);
        assert_eq!(g.influences(4).0.len(), 2);
        assert_eq!(g.influences(5).0.len(), 2);
        assert_eq!(g.influences(3).0.len(), 1);
        assert_eq!(g.influences(6).0.len(), 1);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(g.influences(4).1.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn saturated_and_singleton_graphs() {
        let m = primitives::uv_sphere::<f64>(5, 6, 1.0);
        let n = m.vertex_count();
        let g = extract_node_graph(&m, n, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
        for i in 0..n {
            let own = g.node_vertex_ids().iter().position(|&id| id as usize == i).unwrap() as u32;
            assert!(g.influences(i).0.contains(&own));
        }
        let g1 = extract_node_graph(&m, 1, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
        assert!(g1.edges().is_empty());
        assert!((0..n).all(|i| g1.influences(i).0 == [0]));

        assert!(matches!(
            extract_node_graph(&m, 0, InfluenceRadius::Auto, WeightMode::Uniform),
            Err(DeformError::NodeCountOutOfRange { .. })
        ));
        assert!(matches!(
            extract_node_graph(&m, 1, InfluenceRadius::Fixed(0.01), WeightMode::Uniform),
            Err(DeformError::UncoveredVertex(_))
        ));
    }

    #[test]
    fn edges_match_shared_influence_definition() {
        let m = primitives::uv_sphere::<f64>(12, 16, 1.0);
        let g = extract_node_graph(&m, 20, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
        let mut expected = std::collections::BTreeSet::new();
        for i in 0..m.vertex_count() {
            let set = g.influences(i).0;
            for a in set {
                for b in set {
                    if a < b {
                        expected.insert((*a, *b));
                    }
                }
            }
        }
        assert_eq!(g.edges(), expected.into_iter().collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn distance_weights_sum_to_one() {
        let m = primitives::uv_sphere::<f64>(12, 16, 1.0);
        let g = extract_node_graph(&m, 20, InfluenceRadius::Auto, WeightMode::NormalizedDistance).unwrap();
        for i in 0..m.vertex_count() {
            let s: f64 = g.influences(i).1.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nested_levels_share_anchors() {
        let m = primitives::uv_sphere::<f64>(12, 16, 1.0);
        let gs = extract_nested_graphs(&m, &[4, 16, 64], InfluenceRadius::Auto, WeightMode::Uniform, |r| r).unwrap();
        for w in gs.windows(2) {
            assert!(w[0].node_vertex_ids().iter().all(|id| w[1].node_vertex_ids().contains(id)));
        }
        assert!(extract_nested_graphs(&m, &[16, 4], InfluenceRadius::Auto, WeightMode::Uniform, |r| r).is_err());
    }

    #[test]
    fn identity_params_are_exact_identity() {
        let m = compute_vertex_normals(&primitives::uv_sphere::<f64>(10, 12, 1.3)).unwrap();
        for mode in [WeightMode::Uniform, WeightMode::NormalizedDistance] {
            let g = extract_node_graph(&m, 9, InfluenceRadius::Auto, mode).unwrap();
            let out = apply_deformation(&m, &g, &DeformationParams::identity(9)).unwrap();
            assert_eq!(out.vertices(), m.vertices());
            let ns = transform_normals(m.normals().unwrap(), &g, &DeformationParams::identity(9)).unwrap();
            for (a, b) in ns.iter().zip(m.normals().unwrap()) {
                assert!((*a - *b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_node_rotation_about_origin() {
        let m = TriangleMesh::new(vec![Vec3::zero(), Vec3::new(1.0, 0.0, 0.0)], vec![]).unwrap();
        let g = NodeGraph::from_nodes(&m, vec![0], 10.0, WeightMode::Uniform).unwrap();
        let p = DeformationParams { rotations: vec![Mat3::rotation_z(FRAC_PI_2)], translations: vec![Vec3::zero()] };
        let out = apply_deformation(&m, &g, &p).unwrap();
        assert!((out.vertices()[1] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);

        let ns = transform_normals(&[Vec3::new(1.0, 0.0, 0.0); 2], &g, &p).unwrap();
        assert!((ns[1] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);

        let scaled = DeformationParams { rotations: vec![Mat3::from_diagonal(3.0)], translations: vec![Vec3::zero()] };
        let n0 = Vec3::new(0.6, 0.0, 0.8);
        let ns = transform_normals(&[n0; 2], &g, &scaled).unwrap();
        assert!((ns[0] - n0).norm() < 1e-15);

        let singular = DeformationParams { rotations: vec![Mat3::zero()], translations: vec![Vec3::zero()] };
        assert_eq!(transform_normals(&[n0; 2], &g, &singular), Err(DeformError::SingularRotation(0)));
    }

    #[test]
    fn uniform_sum_double_counts_overlapping_nodes() {
        // Vertex 2 sits at the origin and is influenced by both nodes.
        let m = TriangleMesh::new(
            vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::zero()],
            vec![],
        )
        .unwrap();
        let p = DeformationParams { rotations: vec![Mat3::identity(); 2], translations: vec![Vec3::new(1.0, 0.0, 0.0); 2] };
        let g = NodeGraph::from_nodes(&m, vec![0, 1], 1.5, WeightMode::UniformSum).unwrap();
        assert_eq!(g.influences(2).0, &[0, 1]);
        let out = apply_deformation(&m, &g, &p).unwrap();
        assert_eq!(out.vertices()[2], Vec3::new(2.0, 0.0, 0.0));

        let avg = g.with_weight_mode(WeightMode::Uniform, &m).unwrap();
        let out = apply_deformation(&m, &avg, &p).unwrap();
        assert_eq!(out.vertices()[2], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn shared_rigid_motion_reproduces_rigid_image() {
        let m = primitives::uv_sphere::<f64>(10, 12, 1.0);
        let g = extract_node_graph(&m, m.vertex_count(), InfluenceRadius::Fixed(1e-3), WeightMode::Uniform).unwrap();
        assert!((0..m.vertex_count()).all(|i| g.influences(i).0.len() == 1));
        let r = Mat3::rotation_axis_angle(Vec3::new(0.2, 1.0, -0.4), 0.9);
        let t = Vec3::new(0.3, -2.0, 5.0);
        let out = apply_deformation(&m, &g, &DeformationParams::from_rigid(&g, r, t)).unwrap();
        for (a, b) in out.vertices().iter().zip(m.vertices()) {
            assert!((*a - (r.mul_vec(b) + t)).norm() < 1e-12);
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let m = primitives::cube::<f64>(1.0);
        let g = extract_node_graph(&m, 3, InfluenceRadius::Auto, WeightMode::Uniform).unwrap();
        assert!(matches!(
            apply_deformation(&m, &g, &DeformationParams::identity(2)),
            Err(DeformError::SizeMismatch { .. })
        ));
    }
}
