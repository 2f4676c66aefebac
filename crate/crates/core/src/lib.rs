//! Embedded-deformation inter-frame codec for triangle-mesh sequences,
//! QoE-driven frame adaptation and a trace-driven streaming simulator.
//!
//! The geometric core is generic over [`Real`] (`f32` / `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod abr;
pub mod codec;
pub mod deform;
pub mod geom;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod netsim;
pub mod registration;
pub mod scalar;
pub mod spatial;

pub use scalar::Real;

pub type Vec3d = geom::Vec3<f64>;
pub type Mat3d = geom::Mat3<f64>;
pub type Mesh = mesh::TriangleMesh<f64>;
pub type Mesh32 = mesh::TriangleMesh<f32>;
pub type Sequence = mesh::MeshSequence<f64>;
pub type Graph = deform::NodeGraph<f64>;
pub type Params = deform::DeformationParams<f64>;
