//! Steady Darcy flow on 3D discrete fracture networks.
//!
//! Flow on a network of intersecting planar fractures is posed as a
//! PDE-constrained optimization problem: per-fracture diffusion equations act
//! as constraints, while interface unknowns on the intersection segments — a
//! flux jump (piecewise constant) and an interface head (piecewise linear) —
//! are chosen to minimize the squared L2 mismatch between fracture head
//! traces and the interface head. Fracture meshes never need to align with
//! the intersection segments or with each other.
//!
//! The crate provides the geometry and meshing layers, assembly of all
//! discrete operators, a direct solver for the optimality (KKT) system, a
//! matrix-free preconditioned conjugate gradient solver on the reduced
//! problem, and accuracy/conservation indicators.

pub mod error;
pub mod geometry;
pub mod la;
pub mod quadrature;
pub mod sparse;

pub mod assembly;
pub mod indicators;
pub mod meshing;
pub mod optimizer;

pub use error::{GeometryError, IndicatorError, MeshError, SolveError};
pub use geometry::{
    BcKind, EdgeBc, Fracture, FractureNetwork, Frame, ScalarField, Tensor2, Trace,
};
pub use la::{Vec2, Vec3};
