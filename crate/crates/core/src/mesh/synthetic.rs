//! Synthetic test sequences and primitive meshes.

use std::str::FromStr;

use super::{MeshError, MeshSequence, TriangleMesh};
use crate::geom::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    /// Translation along +x by `magnitude` at the last frame.
    RigidTranslate,
    /// Rotation about the z axis through the origin by `magnitude` radians.
    RigidRotate,
    /// Height-dependent rotation about z: the slice at the top of the
    /// bounding box turns by `magnitude` radians, the bottom stays fixed.
    Bend,
}

impl FromStr for MotionKind {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rigid_translate" => Ok(MotionKind::RigidTranslate),
            "rigid_rotate" => Ok(MotionKind::RigidRotate),
            "bend" => Ok(MotionKind::Bend),
            other => Err(MeshError::InvalidKind(other.to_string())),
        }
    }
}

/// Frame `t` applies the motion scaled by `t / (frame_count - 1)`; frame 0 is
/// `base` itself.
pub fn generate_synthetic_sequence<T: Real>(
    kind: MotionKind,
    base: &TriangleMesh<T>,
    frame_count: usize,
    magnitude: T,
    fps: u32,
) -> Result<MeshSequence<T>, MeshError> {
    if frame_count == 0 {
        return Err(MeshError::InvalidFrameCount);
    }
    if base.vertex_count() == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let base = base.clone().without_normals();
    let denom = T::from_usize_lossy(frame_count.saturating_sub(1).max(1));
    let (lo, hi) = base.bounding_box().expect("non-empty");
    let frames = (0..frame_count)
        .map(|t| {
            let amount = magnitude * T::from_usize_lossy(t) / denom;
            if amount == T::zero() {
                return base.clone();
            }
            let moved: Vec<Vec3<T>> = match kind {
                MotionKind::RigidTranslate => {
                    let d = Vec3::new(amount, T::zero(), T::zero());
                    base.vertices().iter().map(|v| *v + d).collect()
                }
                MotionKind::RigidRotate => {
                    let r = Mat3::rotation_z(amount);
                    base.vertices().iter().map(|v| r.mul_vec(v)).collect()
                }
                MotionKind::Bend => {
                    let height = hi.y() - lo.y();
                    let cx = (lo.x() + hi.x()) * T::lit(0.5);
                    base.vertices()
                        .iter()
                        .map(|v| {
                            let frac = if height > T::zero() { (v.y() - lo.y()) / height } else { T::zero() };
                            let theta = amount * frac;
                            if theta == T::zero() {
                                return *v;
                            }
                            let (s, c) = theta.sin_cos();
                            let (dx, dy) = (v.x() - cx, v.y() - lo.y());
                            Vec3::new(cx + c * dx - s * dy, lo.y() + s * dx + c * dy, v.z())
                        })
                        .collect()
                }
            };
            base.with_positions(moved, None)
        })
        .collect();
    MeshSequence::new(frames, fps)
}

pub mod primitives {
    //! Closed and open primitive meshes with consistent outward winding.

    use super::*;

    pub fn cube<T: Real>(half: f64) -> TriangleMesh<T> {
        let h = T::lit(half);
        let mut v = Vec::with_capacity(8);
        for i in 0..8u32 {
            let s = |bit: u32| if i & bit != 0 { h } else { -h };
            v.push(Vec3::new(s(1), s(2), s(4)));
        }
        // Two triangles per face, counter-clockwise seen from outside.
        let faces = vec![
            [0, 2, 3], [0, 3, 1], // -z
            [4, 5, 7], [4, 7, 6], // +z
            [0, 1, 5], [0, 5, 4], // -y
            [2, 6, 7], [2, 7, 3], // +y
            [0, 4, 6], [0, 6, 2], // -x
            [1, 3, 7], [1, 7, 5], // +x
        ];
        TriangleMesh::new(v, faces).expect("valid cube")
    }

    /// `nx × ny` vertex grid on the z = 0 plane spanning `[0, width] × [0, height]`.
    pub fn grid<T: Real>(nx: usize, ny: usize, width: f64, height: f64) -> TriangleMesh<T> {
        let (nx, ny) = (nx.max(2), ny.max(2));
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = width * i as f64 / (nx - 1) as f64;
                let y = height * j as f64 / (ny - 1) as f64;
                v.push(Vec3::new(T::lit(x), T::lit(y), T::zero()));
            }
        }
        let mut f = Vec::with_capacity((nx - 1) * (ny - 1) * 2);
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let a = (j * nx + i) as u32;
                let b = a + 1;
                let c = a + nx as u32;
                let d = c + 1;
                f.push([a, b, d]);
                f.push([a, d, c]);
            }
        }
        TriangleMesh::new(v, f).expect("valid grid")
    }

    /// Latitude/longitude sphere with `2 + (rings - 1) * segments` vertices.
    pub fn uv_sphere<T: Real>(rings: usize, segments: usize, radius: f64) -> TriangleMesh<T> {
        let (rings, segments) = (rings.max(2), segments.max(3));
        let mut v = vec![Vec3::new(T::zero(), T::zero(), T::lit(radius))];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                v.push(Vec3::new(
                    T::lit(radius * phi.sin() * theta.cos()),
                    T::lit(radius * phi.sin() * theta.sin()),
                    T::lit(radius * phi.cos()),
                ));
            }
        }
        let south = v.len() as u32;
        v.push(Vec3::new(T::zero(), T::zero(), T::lit(-radius)));
        let seg = segments as u32;
        let ring_start = |r: usize| 1 + ((r - 1) * segments) as u32;
        let mut f = Vec::new();
        for s in 0..seg {
            f.push([0, ring_start(1) + s, ring_start(1) + (s + 1) % seg]);
        }
        for r in 1..rings - 1 {
            let (a0, b0) = (ring_start(r), ring_start(r + 1));
            for s in 0..seg {
                let (a, a1) = (a0 + s, a0 + (s + 1) % seg);
                let (b, b1) = (b0 + s, b0 + (s + 1) % seg);
                f.push([a, b, b1]);
                f.push([a, b1, a1]);
            }
        }
        let last = ring_start(rings - 1);
        for s in 0..seg {
            f.push([south, last + (s + 1) % seg, last + s]);
        }
        TriangleMesh::new(v, f).expect("valid sphere")
    }

    /// Open tube along +y with `rings × segments` vertices.
    pub fn cylinder<T: Real>(rings: usize, segments: usize, radius: f64, height: f64) -> TriangleMesh<T> {
        let (rings, segments) = (rings.max(2), segments.max(3));
        let mut v = Vec::with_capacity(rings * segments);
        for r in 0..rings {
            let y = height * r as f64 / (rings - 1) as f64;
            for s in 0..segments {
                let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                v.push(Vec3::new(T::lit(radius * theta.cos()), T::lit(y), T::lit(radius * theta.sin())));
            }
        }
        let seg = segments as u32;
        let mut f = Vec::new();
        for r in 0..rings as u32 - 1 {
            for s in 0..seg {
                let a = r * seg + s;
                let a1 = r * seg + (s + 1) % seg;
                let b = a + seg;
                let b1 = a1 + seg;
                f.push([a, b, b1]);
                f.push([a, b1, a1]);
            }
        }
        TriangleMesh::new(v, f).expect("valid cylinder")
    }
}
