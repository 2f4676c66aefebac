//! Block-sparse normal equations for the per-node 12-parameter layout.
//!
//! Parameters of node `j` occupy `j*12 .. j*12+12`, grouped per output axis
//! `a` as `[R[a][0], R[a][1], R[a][2], t[a]]`. Coupling between different
//! nodes only ever acts within the same axis group with an identical 4×4
//! block, so off-diagonal blocks store that single 4×4 matrix.

use crate::scalar::Real;

pub(crate) const BLOCK: usize = 12;
const SUB: usize = 4;

/// Node counts up to this use a dense Cholesky factorization; larger systems
/// use block-Jacobi preconditioned conjugate gradients.
pub const DENSE_NODE_LIMIT: usize = 64;

pub(crate) struct BlockNormal<'a, T> {
    nodes: usize,
    diag: Vec<[T; BLOCK * BLOCK]>,
    pairs: &'a [(u32, u32)],
    off: Vec<[T; SUB * SUB]>,
}

impl<'a, T: Real> BlockNormal<'a, T> {
    /// `pairs` must be sorted with `j < k` and contain every coupled pair.
    pub(crate) fn new(nodes: usize, pairs: &'a [(u32, u32)]) -> Self {
        BlockNormal {
            nodes,
            diag: vec![[T::zero(); BLOCK * BLOCK]; nodes],
            pairs,
            off: vec![[T::zero(); SUB * SUB]; pairs.len()],
        }
    }

    fn pair_index(&self, j: usize, k: usize) -> usize {
        self.pairs
            .binary_search(&(j as u32, k as u32))
            .unwrap_or_else(|_| panic!("nodes {j} and {k} are not coupled in the graph"))
    }

    /// Adds `s · u uᵀ` to every axis group of node `j`'s diagonal block.
    pub(crate) fn add_diag_outer(&mut self, j: usize, u: &[T; SUB], s: T) {
        let d = &mut self.diag[j];
        for a in 0..3 {
            for p in 0..SUB {
                let sp = s * u[p];
                for q in 0..SUB {
                    let idx = (a * SUB + p) * BLOCK + a * SUB + q;
                    d[idx] = d[idx] + sp * u[q];
                }
            }
        }
    }

    /// Adds `s · g gᵀ` for a full 12-vector `g` to node `j`'s diagonal block.
    pub(crate) fn add_diag_full(&mut self, j: usize, g: &[T; BLOCK], s: T) {
        let d = &mut self.diag[j];
        for p in 0..BLOCK {
            if g[p] == T::zero() {
                continue;
            }
            let sp = s * g[p];
            for q in 0..BLOCK {
                d[p * BLOCK + q] = d[p * BLOCK + q] + sp * g[q];
            }
        }
    }

    /// Adds `s · u_j u_kᵀ` to the coupling between nodes `j != k`.
    pub(crate) fn add_off_outer(&mut self, j: usize, uj: &[T; SUB], k: usize, uk: &[T; SUB], s: T) {
        let (lo, ulo, hi, uhi) = if j < k { (j, uj, k, uk) } else { (k, uk, j, uj) };
        let idx = self.pair_index(lo, hi);
        let b = &mut self.off[idx];
        for p in 0..SUB {
            let sp = s * ulo[p];
            for q in 0..SUB {
                b[p * SUB + q] = b[p * SUB + q] + sp * uhi[q];
            }
        }
    }

    fn dim(&self) -> usize {
        self.nodes * BLOCK
    }

    /// `y = (H + mu·I) x`.
    fn mul(&self, x: &[T], mu: T, y: &mut [T]) {
        for j in 0..self.nodes {
            let d = &self.diag[j];
            let xj = &x[j * BLOCK..(j + 1) * BLOCK];
            for p in 0..BLOCK {
                let mut acc = mu * xj[p];
                for q in 0..BLOCK {
                    acc = acc + d[p * BLOCK + q] * xj[q];
                }
                y[j * BLOCK + p] = acc;
            }
        }
        for (idx, &(j, k)) in self.pairs.iter().enumerate() {
            let (j, k) = (j as usize, k as usize);
            let b = &self.off[idx];
            for a in 0..3 {
                let (oj, ok) = (j * BLOCK + a * SUB, k * BLOCK + a * SUB);
                for p in 0..SUB {
                    let mut to_j = T::zero();
                    let mut to_k = T::zero();
                    for q in 0..SUB {
                        to_j = to_j + b[p * SUB + q] * x[ok + q];
                        to_k = to_k + b[q * SUB + p] * x[oj + q];
                    }
                    y[oj + p] = y[oj + p] + to_j;
                    y[ok + p] = y[ok + p] + to_k;
                }
            }
        }
    }

    fn to_dense(&self, mu: T) -> Vec<T> {
        let n = self.dim();
        let mut m = vec![T::zero(); n * n];
        for j in 0..self.nodes {
            for p in 0..BLOCK {
                for q in 0..BLOCK {
                    m[(j * BLOCK + p) * n + j * BLOCK + q] = self.diag[j][p * BLOCK + q];
                }
            }
        }
        for (idx, &(j, k)) in self.pairs.iter().enumerate() {
            let (j, k) = (j as usize, k as usize);
            for a in 0..3 {
                for p in 0..SUB {
                    for q in 0..SUB {
                        let v = self.off[idx][p * SUB + q];
                        let (r, c) = (j * BLOCK + a * SUB + p, k * BLOCK + a * SUB + q);
                        m[r * n + c] = v;
                        m[c * n + r] = v;
                    }
                }
            }
        }
        for i in 0..n {
            m[i * n + i] = m[i * n + i] + mu;
        }
        m
    }

    /// Solves `(H + mu·I) x = rhs`. Returns `None` if the system is not
    /// numerically positive definite.
    pub(crate) fn solve(&self, rhs: &[T], mu: T) -> Option<Vec<T>> {
        if self.nodes <= DENSE_NODE_LIMIT {
            let n = self.dim();
            let mut m = self.to_dense(mu);
            if !cholesky_in_place(&mut m, n) {
                return None;
            }
            let mut x = rhs.to_vec();
            cholesky_substitute(&m, n, &mut x);
            Some(x)
        } else {
            self.pcg(rhs, mu)
        }
    }

    fn pcg(&self, rhs: &[T], mu: T) -> Option<Vec<T>> {
        let n = self.dim();
        let mut precond = Vec::with_capacity(self.nodes);
        for d in &self.diag {
            let mut f = d.to_vec();
            for p in 0..BLOCK {
                f[p * BLOCK + p] = f[p * BLOCK + p] + mu;
            }
            if !cholesky_in_place(&mut f, BLOCK) {
                return None;
            }
            precond.push(f);
        }
        let apply_precond = |r: &[T], z: &mut [T]| {
            z.copy_from_slice(r);
            for (j, f) in precond.iter().enumerate() {
                cholesky_substitute(f, BLOCK, &mut z[j * BLOCK..(j + 1) * BLOCK]);
            }
        };
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y);

        let mut x = vec![T::zero(); n];
        let mut r = rhs.to_vec();
        let mut z = vec![T::zero(); n];
        apply_precond(&r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![T::zero(); n];
        let mut rz = dot(&r, &z);
        let b_norm = dot(rhs, rhs).sqrt();
        if b_norm == T::zero() {
            return Some(x);
        }
        let tol = T::epsilon().sqrt() * T::lit(1e-3) * b_norm;
        for _ in 0..(4 * n).max(100) {
            self.mul(&p, mu, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) {
                return None;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
                r[i] = r[i] - alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= tol {
                break;
            }
            apply_precond(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

/// Lower Cholesky factor of a row-major symmetric matrix, in place.
pub(crate) fn cholesky_in_place<T: Real>(m: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d = d - m[j * n + k] * m[j * n + k];
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s = s - m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_substitute<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
