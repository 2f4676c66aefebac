//! Non-rigid registration: per-node affine transforms that carry a source
//! frame onto a target frame, found by damped Gauss-Newton on
//! `λ_align·E_align + λ_rot·E_rot + λ_reg·E_reg`.

use thiserror::Error;

use crate::deform::{deform_vertices, DeformError, DeformationParams, NodeGraph};
use crate::geom::{Mat3, Vec3};
use crate::linalg::{BlockNormal, BLOCK};
use crate::mesh::TriangleMesh;
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("correspondence source index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("energy became non-finite")]
    NonFiniteEnergy,
    #[error("energy weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error(transparent)]
    Deform(#[from] DeformError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights<T> {
    pub lambda_align: T,
    pub lambda_rot: T,
    pub lambda_reg: T,
}

impl<T: Real> Default for EnergyWeights<T> {
    fn default() -> Self {
        EnergyWeights { lambda_align: T::one(), lambda_rot: T::one(), lambda_reg: T::lit(10.0) }
    }
}

impl<T: Real> EnergyWeights<T> {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        let ws = [self.lambda_align, self.lambda_rot, self.lambda_reg];
        if ws.iter().all(|w| w.is_finite() && *w >= T::zero()) && ws.iter().any(|w| *w > T::zero()) {
            Ok(())
        } else {
            Err(RegistrationError::InvalidWeights)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<T> {
    pub source: usize,
    pub target: Vec3<T>,
    pub confidence: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet<T> {
    pub pairs: Vec<Correspondence<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    /// Stop once an accepted step lowers the energy by less than this fraction.
    pub tol: T,
    pub max_iters: usize,
    pub initial_damping: T,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions { tol: T::lit(1e-6), max_iters: 50, initial_damping: T::lit(1e-4) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub final_energy: T,
    /// Unweighted `(align, rot, reg)` at the solution.
    pub term_energies: [T; 3],
    pub iterations: usize,
    pub converged: bool,
    /// Total energy at the start and after every accepted step.
    pub energy_history: Vec<T>,
}

/// Index-aligned pairs when both meshes share topology, otherwise each source
/// vertex paired with its nearest target vertex.
pub fn compute_correspondences<T: Real>(
    source: &TriangleMesh<T>,
    target: &TriangleMesh<T>,
) -> Result<CorrespondenceSet<T>, RegistrationError> {
    if source.vertex_count() == 0 || target.vertex_count() == 0 {
        return Err(RegistrationError::EmptyMesh);
    }
    if source.same_topology(target) {
        let pairs = target
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, y)| Correspondence { source: i, target: *y, confidence: T::one() })
            .collect();
        return Ok(CorrespondenceSet { pairs });
    }
    Ok(nearest_correspondences(source.vertices(), target))
}

/// Confidence falls off as `exp(-(d/σ)²)` with `σ` the mean match distance.
fn nearest_correspondences<T: Real>(points: &[Vec3<T>], target: &TriangleMesh<T>) -> CorrespondenceSet<T> {
    let tree = KdTree::build(target.vertices());
    let matches: Vec<(usize, T)> =
        points.iter().map(|p| tree.nearest(p).map(|(i, d2)| (i, d2.sqrt())).expect("non-empty target")).collect();
    let sigma = matches.iter().map(|m| m.1).sum::<T>() / T::from_usize_lossy(matches.len());
    let pairs = matches
        .iter()
        .enumerate()
        .map(|(i, &(j, d))| {
            let confidence = if sigma > T::zero() { (-(d / sigma).powi(2)).exp() } else { T::one() };
            Correspondence { source: i, target: target.vertices()[j], confidence }
        })
        .collect();
    CorrespondenceSet { pairs }
}

fn check_pairs<T: Real>(corr: &CorrespondenceSet<T>, vertex_count: usize) -> Result<(), RegistrationError> {
    match corr.pairs.iter().find(|c| c.source >= vertex_count) {
        Some(c) => Err(RegistrationError::IndexOutOfRange(c.source)),
        None => Ok(()),
    }
}

/// `Σ confidence·‖ṽ_i − target_i‖²` over the correspondence pairs.
pub fn energy_alignment<T: Real>(
    source: &TriangleMesh<T>,
    graph: &NodeGraph<T>,
    params: &DeformationParams<T>,
    corr: &CorrespondenceSet<T>,
) -> Result<T, RegistrationError> {
    check_pairs(corr, source.vertex_count())?;
    let deformed = deform_vertices(source.vertices(), graph, params)?;
    Ok(alignment_from_deformed(&deformed, corr))
}

fn alignment_from_deformed<T: Real>(deformed: &[Vec3<T>], corr: &CorrespondenceSet<T>) -> T {
    corr.pairs.iter().fold(T::zero(), |s, c| s + c.confidence * (deformed[c.source] - c.target).norm_squared())
}

/// Orthonormality penalty on the columns of every `R_j`.
pub fn energy_rotation<T: Real>(params: &DeformationParams<T>) -> T {
    params.rotations.iter().map(rotation_penalty).sum()
}

fn rotation_penalty<T: Real>(r: &Mat3<T>) -> T {
    let c = [r.column(0), r.column(1), r.column(2)];
    let cross = c[0].dot(&c[1]).powi(2) + c[0].dot(&c[2]).powi(2) + c[1].dot(&c[2]).powi(2);
    let unit = (0..3).map(|a| (c[a].dot(&c[a]) - T::one()).powi(2)).sum::<T>();
    cross + unit
}

/// Edge consistency `‖R_j(p_k − p_j) + p_j + t_j − (p_k + t_k)‖²`, summed over
/// both directions of every graph edge.
pub fn energy_regularization<T: Real>(graph: &NodeGraph<T>, params: &DeformationParams<T>) -> Result<T, RegistrationError> {
    if params.len() != graph.node_count() || params.translations.len() != graph.node_count() {
        return Err(RegistrationError::SizeMismatch { expected: graph.node_count(), got: params.len() });
    }
    let p = graph.node_positions();
    let mut e = T::zero();
    for &(j, k) in graph.edges() {
        for (s, d) in [(j as usize, k as usize), (k as usize, j as usize)] {
            e = e + edge_residual(p, params, s, d).norm_squared();
        }
    }
    Ok(e)
}

#[inline]
fn edge_residual<T: Real>(p: &[Vec3<T>], params: &DeformationParams<T>, s: usize, d: usize) -> Vec3<T> {
    // Same value as R_s e + p_s + t_s − p_d − t_d with e = p_d − p_s, but
    // exactly zero for identity transforms.
    params.rotations[s].sub(&Mat3::identity()).mul_vec(&(p[d] - p[s])) + params.translations[s] - params.translations[d]
}

/// Flat parameter vector in the solver layout (`j*12 + a*4 + b`; `b == 3` is `t[a]`).
fn to_flat<T: Real>(params: &DeformationParams<T>) -> Vec<T> {
    let mut x = vec![T::zero(); params.len() * BLOCK];
    for (j, (r, t)) in params.rotations.iter().zip(&params.translations).enumerate() {
        for a in 0..3 {
            for b in 0..3 {
                x[j * BLOCK + a * 4 + b] = r.0[a][b];
            }
            x[j * BLOCK + a * 4 + 3] = t[a];
        }
    }
    x
}

fn from_flat<T: Real>(x: &[T]) -> DeformationParams<T> {
    let n = x.len() / BLOCK;
    let mut params = DeformationParams::identity(n);
    for j in 0..n {
        for a in 0..3 {
            for b in 0..3 {
                params.rotations[j].0[a][b] = x[j * BLOCK + a * 4 + b];
            }
            params.translations[j][a] = x[j * BLOCK + a * 4 + 3];
        }
    }
    params
}

struct Problem<'a, T> {
    source: &'a TriangleMesh<T>,
    graph: &'a NodeGraph<T>,
    corr: &'a CorrespondenceSet<T>,
    weights: EnergyWeights<T>,
}

impl<T: Real> Problem<'_, T> {
    fn terms(&self, params: &DeformationParams<T>) -> Result<[T; 3], RegistrationError> {
        let deformed = deform_vertices(self.source.vertices(), self.graph, params)?;
        Ok([
            alignment_from_deformed(&deformed, self.corr),
            energy_rotation(params),
            energy_regularization(self.graph, params)?,
        ])
    }

    fn total(&self, terms: &[T; 3]) -> T {
        self.weights.lambda_align * terms[0] + self.weights.lambda_rot * terms[1] + self.weights.lambda_reg * terms[2]
    }

    /// Per-term half gradients `Jᵀr`, optionally accumulating `JᵀJ` of the
    /// weighted sum into `normal`.
    fn linearize(&self, params: &DeformationParams<T>, mut normal: Option<&mut BlockNormal<'_, T>>) -> Result<[Vec<T>; 3], RegistrationError> {
        let n = self.graph.node_count();
        let mut grads = [vec![T::zero(); n * BLOCK], vec![T::zero(); n * BLOCK], vec![T::zero(); n * BLOCK]];
        let w = self.weights;
        let verts = self.source.vertices();
        let nodes = self.graph.node_positions();

        if w.lambda_align > T::zero() {
            let deformed = deform_vertices(verts, self.graph, params)?;
            let mut us: Vec<(usize, T, [T; 4])> = Vec::new();
            for c in &self.corr.pairs {
                let v = verts[c.source];
                let res = deformed[c.source] - c.target;
                us.clear();
                us.extend(self.graph.blend_weights(c.source).filter(|(_, wj)| *wj != T::zero()).map(|(j, wj)| {
                    let d = v - nodes[j];
                    (j, wj, [d[0], d[1], d[2], T::one()])
                }));
                for &(j, wj, u) in &us {
                    for a in 0..3 {
                        let s = c.confidence * wj * res[a];
                        for b in 0..4 {
                            let g = &mut grads[0][j * BLOCK + a * 4 + b];
                            *g = *g + s * u[b];
                        }
                    }
                }
                if let Some(h) = normal.as_deref_mut() {
                    let base = w.lambda_align * c.confidence;
                    for (x, &(j, wj, uj)) in us.iter().enumerate() {
                        h.add_diag_outer(j, &uj, base * wj * wj);
                        for &(k, wk, uk) in &us[x + 1..] {
                            h.add_off_outer(j, &uj, k, &uk, base * wj * wk);
                        }
                    }
                }
            }
        }

        if w.lambda_rot > T::zero() {
            for (j, r) in params.rotations.iter().enumerate() {
                let m = &r.0;
                let col = |a: usize| Vec3::new(m[0][a], m[1][a], m[2][a]);
                let mut residuals: [(T, [T; BLOCK]); 6] = [(T::zero(), [T::zero(); BLOCK]); 6];
                let mut idx = 0;
                for a in 0..3 {
                    for b in a..3 {
                        let mut g = [T::zero(); BLOCK];
                        let f = if a == b {
                            for row in 0..3 {
                                g[row * 4 + a] = T::lit(2.0) * m[row][a];
                            }
                            col(a).dot(&col(a)) - T::one()
                        } else {
                            for row in 0..3 {
                                g[row * 4 + a] = m[row][b];
                                g[row * 4 + b] = m[row][a];
                            }
                            col(a).dot(&col(b))
                        };
                        residuals[idx] = (f, g);
                        idx += 1;
                    }
                }
                for (f, g) in &residuals {
                    for (q, gq) in g.iter().enumerate() {
                        let slot = &mut grads[1][j * BLOCK + q];
                        *slot = *slot + *f * *gq;
                    }
                    if let Some(h) = normal.as_deref_mut() {
                        h.add_diag_full(j, g, w.lambda_rot);
                    }
                }
            }
        }

        if w.lambda_reg > T::zero() {
            let neg = [T::zero(), T::zero(), T::zero(), -T::one()];
            for &(j, k) in self.graph.edges() {
                for (s, d) in [(j as usize, k as usize), (k as usize, j as usize)] {
                    let e = nodes[d] - nodes[s];
                    let us = [e[0], e[1], e[2], T::one()];
                    let res = edge_residual(nodes, params, s, d);
                    for a in 0..3 {
                        for b in 0..4 {
                            let g = &mut grads[2][s * BLOCK + a * 4 + b];
                            *g = *g + res[a] * us[b];
                        }
                        let g = &mut grads[2][d * BLOCK + a * 4 + 3];
                        *g = *g - res[a];
                    }
                    if let Some(h) = normal.as_deref_mut() {
                        h.add_diag_outer(s, &us, w.lambda_reg);
                        h.add_diag_outer(d, &neg, w.lambda_reg);
                        h.add_off_outer(s, &us, d, &neg, w.lambda_reg);
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Analytic gradients `∂E/∂x` of the unweighted `(align, rot, reg)` terms in
/// the flat solver layout (`j*12 + a*4 + b`, where `b == 3` addresses `t[a]`).
pub fn energy_gradients<T: Real>(
    source: &TriangleMesh<T>,
    graph: &NodeGraph<T>,
    params: &DeformationParams<T>,
    corr: &CorrespondenceSet<T>,
) -> Result<[Vec<T>; 3], RegistrationError> {
    check_pairs(corr, source.vertex_count())?;
    let ones = EnergyWeights { lambda_align: T::one(), lambda_rot: T::one(), lambda_reg: T::one() };
    let problem = Problem { source, graph, corr, weights: ones };
    let mut grads = problem.linearize(params, None)?;
    for g in &mut grads {
        g.iter_mut().for_each(|v| *v = *v * T::lit(2.0));
    }
    Ok(grads)
}

/// Flattens parameters into the layout used by [`energy_gradients`].
pub fn flatten_params<T: Real>(params: &DeformationParams<T>) -> Vec<T> {
    to_flat(params)
}

pub fn unflatten_params<T: Real>(x: &[T]) -> DeformationParams<T> {
    from_flat(x)
}

/// Registers `source` onto `target`. `graph` must be anchored on `source`.
pub fn solve_deformation<T: Real>(
    source: &TriangleMesh<T>,
    graph: &NodeGraph<T>,
    target: &TriangleMesh<T>,
    weights: &EnergyWeights<T>,
    opts: &SolveOptions<T>,
) -> Result<(DeformationParams<T>, SolveReport<T>), RegistrationError> {
    weights.validate()?;
    if graph.vertex_count() != source.vertex_count() {
        return Err(RegistrationError::SizeMismatch { expected: graph.vertex_count(), got: source.vertex_count() });
    }
    let corr = compute_correspondences(source, target)?;
    let (params, report) = solve_with_correspondences(source, graph, &corr, weights, opts, None)?;
    if source.same_topology(target) {
        return Ok((params, report));
    }
    // One re-correspondence round from the deformed source positions.
    let moved = deform_vertices(source.vertices(), graph, &params)?;
    let corr = nearest_correspondences(&moved, target);
    let (params, second) = solve_with_correspondences(source, graph, &corr, weights, opts, Some(&params))?;
    Ok((params, SolveReport { iterations: report.iterations + second.iterations, ..second }))
}

/// Levenberg-Marquardt on fixed correspondences, starting from `init` or identity.
pub fn solve_with_correspondences<T: Real>(
    source: &TriangleMesh<T>,
    graph: &NodeGraph<T>,
    corr: &CorrespondenceSet<T>,
    weights: &EnergyWeights<T>,
    opts: &SolveOptions<T>,
    init: Option<&DeformationParams<T>>,
) -> Result<(DeformationParams<T>, SolveReport<T>), RegistrationError> {
    weights.validate()?;
    check_pairs(corr, source.vertex_count())?;
    let problem = Problem { source, graph, corr, weights: *weights };
    let mut params = init.cloned().unwrap_or_else(|| DeformationParams::identity(graph.node_count()));
    let mut terms = problem.terms(&params)?;
    let mut energy = problem.total(&terms);
    if !energy.is_finite() {
        return Err(RegistrationError::NonFiniteEnergy);
    }

    let diag = source.bbox_diagonal().max(T::epsilon());
    let floor = (T::epsilon() * diag).powi(2) * T::from_usize_lossy(corr.pairs.len().max(1));
    let max_damping = T::lit(1e12);
    let mut mu = opts.initial_damping;
    let mut history = vec![energy];
    let mut iterations = 0;
    let mut converged = energy <= floor;

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut normal = BlockNormal::new(graph.node_count(), graph.edges());
        let grads = problem.linearize(&params, Some(&mut normal))?;
        let rhs: Vec<T> = (0..grads[0].len())
            .map(|i| -(weights.lambda_align * grads[0][i] + weights.lambda_rot * grads[1][i] + weights.lambda_reg * grads[2][i]))
            .collect();
        let x = to_flat(&params);

        let mut accepted = false;
        while mu <= max_damping {
            let Some(step) = normal.solve(&rhs, mu) else {
                mu = mu * T::lit(10.0);
                continue;
            };
            let trial_x: Vec<T> = x.iter().zip(&step).map(|(a, b)| *a + *b).collect();
            let trial = from_flat(&trial_x);
            let trial_terms = problem.terms(&trial)?;
            let trial_energy = problem.total(&trial_terms);
            if trial_energy.is_finite() && trial_energy < energy {
                let rel = (energy - trial_energy) / energy;
                params = trial;
                terms = trial_terms;
                energy = trial_energy;
                history.push(energy);
                mu = (mu / T::lit(10.0)).max(T::lit(1e-12));
                converged = rel < opts.tol || energy <= floor;
                accepted = true;
                break;
            }
            mu = mu * T::lit(10.0);
        }
        if !accepted {
            // No descent direction left at working precision.
            converged = true;
        }
    }

    if !energy.is_finite() || !params.is_finite() {
        return Err(RegistrationError::NonFiniteEnergy);
    }
    Ok((params, SolveReport { final_energy: energy, term_energies: terms, iterations, converged, energy_history: history }))
}
