//! Error types for the network, meshing, assembly and solver layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("fracture {id}: polygon needs at least 3 vertices, got {count}")]
    TooFewVertices { id: usize, count: usize },
    #[error("fracture {id}: vertices deviate from a common plane by {deviation:.3e} (tolerance {tolerance:.3e})")]
    NotCoplanar { id: usize, deviation: f64, tolerance: f64 },
    #[error("fracture {id}: degenerate polygon (zero area)")]
    DegeneratePolygon { id: usize },
    #[error("fracture {id}: polygon is self-intersecting")]
    SelfIntersecting { id: usize },
    #[error("fracture {id}: transmissivity tensor is not symmetric positive definite")]
    NonPositiveTransmissivity { id: usize },
    #[error("fracture {id}: expected one boundary condition per polygon edge ({edges}), got {bcs}")]
    BcCountMismatch { id: usize, edges: usize, bcs: usize },
    #[error("fractures {a} and {b} are coplanar with overlapping interiors")]
    CoplanarOverlap { a: usize, b: usize },
    #[error("fractures {a} and {b}: polygon intersection is not a single segment")]
    NonSegmentIntersection { a: usize, b: usize },
    #[error("point ({x}, {y}, {z}) is {distance:.3e} off the fracture plane (tolerance {tolerance:.3e})")]
    PointOffPlane { x: f64, y: f64, z: f64, distance: f64, tolerance: f64 },
    #[error("network has no Dirichlet boundary edge")]
    NoDirichletBoundary,
    #[error("fracture ids must match their position in the list (fracture {found} at position {position})")]
    IdMismatch { found: usize, position: usize },
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh parameter {name} = {value} out of range {expected}")]
    InvalidParameter { name: &'static str, value: f64, expected: &'static str },
    #[error("fracture {fracture}: estimated node count {estimate} exceeds cap {cap}; increase max element area or the cap")]
    ResourceLimit { fracture: usize, estimate: usize, cap: usize },
    #[error("fracture {fracture}: refinement stopped before reaching the requested element area")]
    RefinementIncomplete { fracture: usize },
    #[error("trace {trace} on fracture {fracture}: failed to cover the trace with mesh elements near parameter {parameter}")]
    TraceCoverage { trace: usize, fracture: usize, parameter: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("fracture {fracture}: local solve failed: {reason}")]
    LocalSolve { fracture: usize, reason: String },
    #[error("KKT factorization failed in the {block} block near index {index}")]
    KktSingular { block: String, index: usize },
    #[error("KKT solve stagnated at relative residual {residual:.3e}")]
    KktResidual { residual: f64 },
    #[error("operator is not positive definite: non-positive curvature at iteration {iteration}")]
    Indefinite { iteration: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("inflow flux is zero; the in/out mismatch indicator is undefined")]
    ZeroInflow,
    #[error("no exact solution registered for this network")]
    MissingExactSolution,
}
