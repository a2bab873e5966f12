//! Per-fracture triangulation and trace discretizations.
//!
//! Each fracture is meshed independently: a constrained Delaunay
//! triangulation of the polygon refined until every element is below the
//! requested area. Meshes are non-conforming to traces by default; the
//! trace-conforming mode additionally constrains the mesh to the trace
//! segments so that every trace becomes a chain of element edges.
//!
//! Each trace also carries two independent 1D meshes for the interface
//! unknowns: a piecewise-constant flux-jump mesh and a piecewise-linear
//! interface-head mesh, sized relative to the partition that the fracture
//! meshes induce on the trace.

use std::collections::HashMap;

use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::MeshError;
use crate::geometry::{point_in_polygon, point_segment_distance, BcKind, Fracture, FractureNetwork, Frame, Trace};
use crate::la::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshMode {
    NonConforming,
    TraceConforming,
}

#[derive(Clone, Debug)]
pub struct MeshParams {
    /// Maximum element area on every fracture.
    pub max_area: f64,
    /// Flux-jump mesh density relative to the induced partition, in (0, 1].
    pub lambda_ratio: f64,
    /// Interface-head mesh density relative to the induced partition, in (0, 1].
    pub psi_ratio: f64,
    pub mode: MeshMode,
    /// Hard cap on nodes per fracture.
    pub node_cap: usize,
    /// Optional per-fracture max-area overrides as (fracture id, area).
    pub max_area_overrides: Vec<(usize, f64)>,
}

impl MeshParams {
    pub fn new(max_area: f64) -> Self {
        MeshParams {
            max_area,
            lambda_ratio: 0.5,
            psi_ratio: 0.3,
            mode: MeshMode::NonConforming,
            node_cap: 2_000_000,
            max_area_overrides: Vec::new(),
        }
    }

    fn area_for(&self, fracture: usize) -> f64 {
        self.max_area_overrides
            .iter()
            .find(|(id, _)| *id == fracture)
            .map(|(_, a)| *a)
            .unwrap_or(self.max_area)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.max_area > 0.0) {
            return Err(MeshError::InvalidParameter {
                name: "max_area",
                value: self.max_area,
                expected: "> 0",
            });
        }
        for &(_, a) in &self.max_area_overrides {
            if !(a > 0.0) {
                return Err(MeshError::InvalidParameter { name: "max_area", value: a, expected: "> 0" });
            }
        }
        for (name, v) in [("lambda_ratio", self.lambda_ratio), ("psi_ratio", self.psi_ratio)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(MeshError::InvalidParameter { name, value: v, expected: "in (0, 1]" });
            }
        }
        Ok(())
    }
}

/// Mesh boundary edge lying on a polygon edge.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub polygon_edge: usize,
}

/// P1 triangulation of one fracture in its local frame.
#[derive(Clone, Debug)]
pub struct FractureMesh {
    pub fracture_id: usize,
    pub frame: Frame,
    pub nodes: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    /// Lowest-index Dirichlet polygon edge containing the node, if any.
    pub dirichlet_edge_of_node: Vec<Option<usize>>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// node -> free dof index (None for Dirichlet nodes)
    pub free_index: Vec<Option<usize>>,
    /// free dof index -> node
    pub free_nodes: Vec<usize>,
    /// Largest element area actually present.
    pub max_area: f64,
    pub requested_max_area: f64,
}

impl FractureMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet_edge_of_node[node].is_some()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * (pb - pa).cross(pc - pa)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Recomputes the free-dof maps from `dirichlet_edge_of_node`.
    pub fn rebuild_free_maps(&mut self) {
        self.free_index = vec![None; self.nodes.len()];
        self.free_nodes.clear();
        for k in 0..self.nodes.len() {
            if self.dirichlet_edge_of_node[k].is_none() {
                self.free_index[k] = Some(self.free_nodes.len());
                self.free_nodes.push(k);
            }
        }
    }

    /// Barycentric coordinates of a local point within triangle `t`.
    pub fn barycentric(&self, t: usize, p: Vec2) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let den = (pb - pa).cross(pc - pa);
        let l1 = (pb - p).cross(pc - p) / den;
        let l2 = (pc - p).cross(pa - p) / den;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Constant P1 gradients of the three hat functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let den = (pb - pa).cross(pc - pa);
        [
            Vec2::new(pb.y - pc.y, pc.x - pb.x).scale(1.0 / den),
            Vec2::new(pc.y - pa.y, pa.x - pc.x).scale(1.0 / den),
            Vec2::new(pa.y - pb.y, pb.x - pa.x).scale(1.0 / den),
        ]
    }
}

/// Subdivision of a trace induced by one fracture mesh: between consecutive
/// breakpoints the trace lies inside a single triangle.
#[derive(Clone, Debug)]
pub struct TracePartition {
    pub trace_id: usize,
    pub fracture_id: usize,
    /// Arclength parameters, strictly increasing, first = 0, last = length.
    pub breakpoints: Vec<f64>,
    /// Containing triangle per element (length = breakpoints.len() - 1).
    pub triangles: Vec<usize>,
}

impl TracePartition {
    pub fn elem_count(&self) -> usize {
        self.triangles.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceBasisKind {
    /// Piecewise-constant basis (flux jump).
    Lambda,
    /// Continuous piecewise-linear basis (interface head).
    Psi,
}

/// Uniform 1D mesh on a trace carrying one of the control bases.
#[derive(Clone, Debug)]
pub struct TraceMesh {
    pub trace_id: usize,
    pub kind: TraceBasisKind,
    pub breakpoints: Vec<f64>,
    pub dof_count: usize,
}

impl TraceMesh {
    pub fn elem_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn elem_bounds(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Element containing arclength `s` (clamped).
    pub fn locate(&self, s: f64) -> usize {
        let n = self.elem_count();
        match self.breakpoints.binary_search_by(|b| b.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(n - 1),
            Err(k) => k.saturating_sub(1).min(n - 1),
        }
    }

    /// Basis functions supported on element `k` at local coordinate xi in
    /// [0, 1], as (dof, value) pairs.
    pub fn basis_on_elem(&self, k: usize, xi: f64) -> [(usize, f64); 2] {
        match self.kind {
            TraceBasisKind::Lambda => [(k, 1.0), (k, 0.0)],
            TraceBasisKind::Psi => [(k, 1.0 - xi), (k + 1, xi)],
        }
    }
}

/// Number of control elements for a density ratio and induced element count:
/// max(1, round(ratio * n_induced)).
pub fn control_elem_count(ratio: f64, n_induced: usize) -> usize {
    ((ratio * n_induced as f64).round() as usize).max(1)
}

/// Builds a uniform control mesh on a trace from the two induced partitions.
/// The reference count is the finer (max) of the two induced counts.
pub fn build_trace_mesh(
    trace: &Trace,
    induced: [&TracePartition; 2],
    ratio: f64,
    kind: TraceBasisKind,
) -> Result<TraceMesh, MeshError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(MeshError::InvalidParameter {
            name: "control mesh ratio",
            value: ratio,
            expected: "in (0, 1]",
        });
    }
    let n_ind = induced[0].elem_count().max(induced[1].elem_count());
    let n = control_elem_count(ratio, n_ind);
    let breakpoints: Vec<f64> = (0..=n).map(|k| trace.length * k as f64 / n as f64).collect();
    let dof_count = match kind {
        TraceBasisKind::Lambda => n,
        TraceBasisKind::Psi => n + 1,
    };
    Ok(TraceMesh { trace_id: trace.id, kind, breakpoints, dof_count })
}

/// All meshes of a network, ready for assembly.
#[derive(Clone, Debug)]
pub struct NetworkMesh {
    pub fracture_meshes: Vec<FractureMesh>,
    /// Per trace: induced partitions on [lower fracture, higher fracture].
    pub partitions: Vec<[TracePartition; 2]>,
    pub lambda_meshes: Vec<TraceMesh>,
    pub psi_meshes: Vec<TraceMesh>,
}

pub fn mesh_network(network: &FractureNetwork, params: &MeshParams) -> Result<NetworkMesh, MeshError> {
    params.validate()?;
    let mut fracture_meshes = Vec::with_capacity(network.fractures.len());
    for f in &network.fractures {
        let traces_on_f: Vec<(usize, [Vec2; 2])> = network.incidence[f.id]
            .iter()
            .map(|&tid| {
                let t = &network.traces[tid];
                let a = f.map_to_local(t.endpoints[0])?;
                let b = f.map_to_local(t.endpoints[1])?;
                Ok((tid, [a, b]))
            })
            .collect::<Result<_, crate::error::GeometryError>>()?;
        fracture_meshes.push(triangulate_fracture(f, &traces_on_f, params)?);
    }
    let mut partitions = Vec::with_capacity(network.traces.len());
    for t in &network.traces {
        let lo = induced_trace_partition(&fracture_meshes[t.fracture_pair.0], t)?;
        let hi = induced_trace_partition(&fracture_meshes[t.fracture_pair.1], t)?;
        partitions.push([lo, hi]);
    }
    let mut lambda_meshes = Vec::with_capacity(network.traces.len());
    let mut psi_meshes = Vec::with_capacity(network.traces.len());
    for t in &network.traces {
        let parts = [&partitions[t.id][0], &partitions[t.id][1]];
        lambda_meshes.push(build_trace_mesh(t, parts, params.lambda_ratio, TraceBasisKind::Lambda)?);
        psi_meshes.push(build_trace_mesh(t, parts, params.psi_ratio, TraceBasisKind::Psi)?);
    }
    Ok(NetworkMesh { fracture_meshes, partitions, lambda_meshes, psi_meshes })
}

/// Point set with tolerance-based deduplication on a uniform grid.
struct PointDedup {
    tol: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Vec2>,
}

impl PointDedup {
    fn new(tol: f64) -> Self {
        PointDedup { tol, grid: HashMap::new(), points: Vec::new() }
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64)
    }

    fn insert(&mut self, p: Vec2) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &idx in bucket {
                        if (self.points[idx] - p).norm() <= self.tol {
                            return idx;
                        }
                    }
                }
            }
        }
        let idx = self.points.len();
        self.points.push(p);
        self.grid.entry((kx, ky)).or_default().push(idx);
        idx
    }
}

/// A constraint segment before arrangement.
#[derive(Clone, Copy)]
struct RawSegment {
    a: Vec2,
    b: Vec2,
}

/// Splits segments at mutual intersections and endpoint incidences so that
/// the resulting sub-segments meet only at shared endpoints.
fn arrange_segments(segments: &[RawSegment], tol: f64) -> Vec<(Vec2, Vec2)> {
    let n = segments.len();
    let mut splits: Vec<Vec<f64>> = vec![Vec::new(); n];
    let param_of = |s: &RawSegment, p: Vec2| -> f64 {
        let d = s.b - s.a;
        (p - s.a).dot(d) / d.dot(d)
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (si, sj) = (&segments[i], &segments[j]);
            // endpoints of j lying on i
            for p in [sj.a, sj.b] {
                if point_segment_distance(p, si.a, si.b) <= tol {
                    splits[i].push(param_of(si, p).clamp(0.0, 1.0));
                }
            }
            if i < j {
                // proper crossing
                let d1 = si.b - si.a;
                let d2 = sj.b - sj.a;
                let den = d1.cross(d2);
                if den.abs() > 1e-14 * d1.norm() * d2.norm() {
                    let t = (sj.a - si.a).cross(d2) / den;
                    let u = (sj.a - si.a).cross(d1) / den;
                    let margin_t = tol / d1.norm();
                    let margin_u = tol / d2.norm();
                    if t > margin_t && t < 1.0 - margin_t && u > margin_u && u < 1.0 - margin_u {
                        splits[i].push(t);
                        splits[j].push(u);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let len = (seg.b - seg.a).norm();
        let mut ts = vec![0.0, 1.0];
        ts.append(&mut splits[i]);
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ts.dedup_by(|x, y| (*x - *y).abs() * len <= tol);
        if ts.last() != Some(&1.0) {
            ts.push(1.0);
        }
        for w in ts.windows(2) {
            let pa = seg.a + (seg.b - seg.a) * w[0];
            let pb = seg.a + (seg.b - seg.a) * w[1];
            if (pb - pa).norm() > tol {
                out.push((pa, pb));
            }
        }
    }
    out
}

/// Triangulates one fracture. `traces_local` holds the local-frame endpoints
/// of every trace on the fracture; in trace-conforming mode those segments
/// are constrained into the mesh.
pub fn triangulate_fracture(
    fracture: &Fracture,
    traces_local: &[(usize, [Vec2; 2])],
    params: &MeshParams,
) -> Result<FractureMesh, MeshError> {
    params.validate()?;
    let max_area = params.area_for(fracture.id);
    let frame = fracture.frame()?;
    let poly: Vec<Vec2> = fracture.vertices.iter().map(|&v| frame.to_local(v)).collect();
    let diam = fracture.diameter();
    let area = fracture.area();
    let tol = 1e-9 * diam;

    let estimate = (2.2 * area / max_area) as usize + 4 * poly.len();
    if estimate > params.node_cap {
        return Err(MeshError::ResourceLimit { fracture: fracture.id, estimate, cap: params.node_cap });
    }

    // constraint segments: polygon boundary, plus traces when conforming
    let mut raw = Vec::new();
    for k in 0..poly.len() {
        raw.push(RawSegment { a: poly[k], b: poly[(k + 1) % poly.len()] });
    }
    if params.mode == MeshMode::TraceConforming {
        for &(_, [a, b]) in traces_local {
            raw.push(RawSegment { a, b });
        }
    }
    let arranged = arrange_segments(&raw, tol);

    // uniform presplit to the target edge length (equilateral with max_area)
    let target_len = (4.0 * max_area / 3.0f64.sqrt()).sqrt();
    let mut dedup = PointDedup::new(tol);
    let mut constraint_pairs: Vec<(usize, usize)> = Vec::new();
    for (a, b) in arranged {
        let len = (b - a).norm();
        let pieces = (len / target_len).ceil().max(1.0) as usize;
        let mut prev = dedup.insert(a);
        for k in 1..=pieces {
            let p = if k == pieces { b } else { a + (b - a) * (k as f64 / pieces as f64) };
            let cur = dedup.insert(p);
            if cur != prev {
                constraint_pairs.push((prev, cur));
            }
            prev = cur;
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handle_of = Vec::with_capacity(dedup.points.len());
    for p in &dedup.points {
        let h = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|_| MeshError::RefinementIncomplete { fracture: fracture.id })?;
        handle_of.push(h);
    }
    let mut seen = std::collections::HashSet::new();
    for (a, b) in constraint_pairs {
        let key = (a.min(b), a.max(b));
        if seen.insert(key) && handle_of[a] != handle_of[b] {
            cdt.add_constraint(handle_of[a], handle_of[b]);
        }
    }

    let refinement = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(params.node_cap),
    );
    if !refinement.refinement_complete {
        return Err(MeshError::ResourceLimit {
            fracture: fracture.id,
            estimate: cdt.num_vertices(),
            cap: params.node_cap,
        });
    }

    // extract nodes and the triangles inside the polygon
    let all_nodes: Vec<Vec2> = cdt.vertices().map(|v| Vec2::new(v.position().x, v.position().y)).collect();
    let mut keep_tris: Vec<[usize; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        let ids = face.vertices().map(|v| v.index());
        let centroid = (all_nodes[ids[0]] + all_nodes[ids[1]] + all_nodes[ids[2]]).scale(1.0 / 3.0);
        if point_in_polygon(&poly, centroid, tol) {
            keep_tris.push([ids[0], ids[1], ids[2]]);
        }
    }

    // compact node numbering
    let mut new_index = vec![usize::MAX; all_nodes.len()];
    let mut nodes = Vec::new();
    for tri in &keep_tris {
        for &v in tri {
            if new_index[v] == usize::MAX {
                new_index[v] = nodes.len();
                nodes.push(all_nodes[v]);
            }
        }
    }
    let mut triangles: Vec<[usize; 3]> = keep_tris
        .iter()
        .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
        .collect();
    // enforce counter-clockwise orientation and check the area bound
    let mut achieved_max_area = 0.0f64;
    for tri in &mut triangles {
        let (a, b, c) = (nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        let signed = 0.5 * (b - a).cross(c - a);
        if signed < 0.0 {
            tri.swap(1, 2);
        }
        achieved_max_area = achieved_max_area.max(signed.abs());
    }
    if achieved_max_area > max_area * (1.0 + 1e-9) {
        return Err(MeshError::RefinementIncomplete { fracture: fracture.id });
    }

    // node classification against polygon edges
    let n_poly = poly.len();
    let mut dirichlet_edge_of_node = vec![None; nodes.len()];
    for (k, &p) in nodes.iter().enumerate() {
        let mut best: Option<usize> = None;
        for e in 0..n_poly {
            if fracture.edge_bcs[e].kind != BcKind::Dirichlet {
                continue;
            }
            if point_segment_distance(p, poly[e], poly[(e + 1) % n_poly]) <= tol {
                best = Some(best.map_or(e, |b: usize| b.min(e)));
            }
        }
        dirichlet_edge_of_node[k] = best;
    }

    // boundary mesh edges: triangle edges used exactly once
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *edge_use.entry(key).or_insert(0) += 1;
        }
    }
    let mut boundary_edges = Vec::new();
    let mut keys: Vec<_> = edge_use.iter().filter(|(_, &c)| c == 1).map(|(&k, _)| k).collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let mid = (nodes[a] + nodes[b]).scale(0.5);
        let mut best_edge = None;
        let mut best_dist = f64::INFINITY;
        for e in 0..n_poly {
            let d = point_segment_distance(mid, poly[e], poly[(e + 1) % n_poly]);
            if d < best_dist {
                best_dist = d;
                best_edge = Some(e);
            }
        }
        if best_dist <= tol {
            boundary_edges.push(BoundaryEdge { nodes: [a, b], polygon_edge: best_edge.unwrap() });
        }
    }

    let mut mesh = FractureMesh {
        fracture_id: fracture.id,
        frame,
        nodes,
        triangles,
        dirichlet_edge_of_node,
        boundary_edges,
        free_index: Vec::new(),
        free_nodes: Vec::new(),
        max_area: achieved_max_area,
        requested_max_area: max_area,
    };
    mesh.rebuild_free_maps();
    Ok(mesh)
}

/// Computes the partition a fracture mesh induces on a trace: the subdivision
/// of [0, L] by element-edge crossings, each piece tagged with its containing
/// triangle.
pub fn induced_trace_partition(mesh: &FractureMesh, trace: &Trace) -> Result<TracePartition, MeshError> {
    let a = mesh.frame.to_local(trace.endpoints[0]);
    let b = mesh.frame.to_local(trace.endpoints[1]);
    let len = trace.length;
    let dir = (b - a).scale(1.0 / (b - a).norm());
    let eps = 1e-10 * len;

    // clip the segment against every triangle
    let mut intervals: Vec<(f64, f64, usize)> = Vec::new();
    for t in 0..mesh.triangles.len() {
        if let Some((t0, t1)) = clip_segment_triangle(mesh, t, a, dir, len, eps) {
            if t1 - t0 > eps {
                intervals.push((t0, t1, t));
            }
        }
    }

    let mut breakpoints: Vec<f64> = vec![0.0, len];
    for &(t0, t1, _) in &intervals {
        breakpoints.push(t0.clamp(0.0, len));
        breakpoints.push(t1.clamp(0.0, len));
    }
    breakpoints.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let merge_tol = 1e-11 * len;
    let mut cleaned: Vec<f64> = Vec::with_capacity(breakpoints.len());
    for v in breakpoints {
        match cleaned.last() {
            Some(&last) if v - last <= merge_tol => {}
            _ => cleaned.push(v),
        }
    }
    // snap the ends exactly
    *cleaned.first_mut().unwrap() = 0.0;
    *cleaned.last_mut().unwrap() = len;

    let mut triangles = Vec::with_capacity(cleaned.len() - 1);
    for w in cleaned.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let tri = intervals
            .iter()
            .find(|&&(t0, t1, _)| mid >= t0 - eps && mid <= t1 + eps)
            .map(|&(_, _, t)| t);
        match tri {
            Some(t) => triangles.push(t),
            None => {
                return Err(MeshError::TraceCoverage {
                    trace: trace.id,
                    fracture: mesh.fracture_id,
                    parameter: mid,
                })
            }
        }
    }
    Ok(TracePartition {
        trace_id: trace.id,
        fracture_id: mesh.fracture_id,
        breakpoints: cleaned,
        triangles,
    })
}

/// Parameter interval of the segment p(s) = a + s*dir, s in [0, len], inside
/// triangle `t` (closed, with slack eps).
fn clip_segment_triangle(
    mesh: &FractureMesh,
    t: usize,
    a: Vec2,
    dir: Vec2,
    len: f64,
    eps: f64,
) -> Option<(f64, f64)> {
    let [i, j, k] = mesh.triangles[t];
    let verts = [mesh.nodes[i], mesh.nodes[j], mesh.nodes[k]];
    let mut lo = 0.0f64;
    let mut hi = len;
    for e in 0..3 {
        let v0 = verts[e];
        let v1 = verts[(e + 1) % 3];
        let edge = v1 - v0;
        let elen = edge.norm();
        // inside means left of each ccw edge; signed distances scaled by edge length
        let g = edge.cross(dir) / elen;
        let h = edge.cross(a - v0) / elen;
        // constraint: h + s*g >= 0 (with slack eps for near-parallel runs)
        if g.abs() * len <= eps {
            if h < -eps {
                return None;
            }
            continue;
        }
        let s_bound = -h / g;
        if g > 0.0 {
            lo = lo.max(s_bound);
        } else {
            hi = hi.min(s_bound);
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EdgeBc, ScalarField, Tensor2};
    use crate::la::Vec3;

    fn square_fracture(id: usize, size: f64) -> Fracture {
        Fracture::new(
            id,
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(size, 0.0, 0.0),
                Vec3::new(size, size, 0.0),
                Vec3::new(0.0, size, 0.0),
            ],
            Tensor2::isotropic(1.0),
            vec![EdgeBc::dirichlet(0.0); 4],
            ScalarField::Constant(0.0),
        )
        .unwrap()
    }

    fn dfn3_network() -> FractureNetwork {
        let f1 = Fracture::new(
            0,
            vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(0.5, -1.0, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
            Tensor2::isotropic(1.0),
            vec![EdgeBc::dirichlet(0.0); 4],
            ScalarField::Constant(0.0),
        )
        .unwrap();
        let f2 = Fracture::new(
            1,
            vec![
                Vec3::new(-1.0, 0.0, -1.0),
                Vec3::new(0.0, 0.0, -1.0),
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(-1.0, 0.0, 1.0),
            ],
            Tensor2::isotropic(1.0),
            vec![EdgeBc::dirichlet(0.0); 4],
            ScalarField::Constant(0.0),
        )
        .unwrap();
        let f3 = Fracture::new(
            2,
            vec![
                Vec3::new(-0.5, -1.0, -1.0),
                Vec3::new(-0.5, 1.0, -1.0),
                Vec3::new(-0.5, 1.0, 1.0),
                Vec3::new(-0.5, -1.0, 1.0),
            ],
            Tensor2::isotropic(1.0),
            vec![EdgeBc::dirichlet(0.0); 4],
            ScalarField::Constant(0.0),
        )
        .unwrap();
        FractureNetwork::new(vec![f1, f2, f3]).unwrap()
    }

    #[test]
    fn unit_square_coarse_mesh() {
        let f = square_fracture(0, 1.0);
        let mesh = triangulate_fracture(&f, &[], &MeshParams::new(0.5)).unwrap();
        assert!(mesh.triangles.len() >= 2);
        for t in 0..mesh.triangles.len() {
            assert!(mesh.triangle_area(t) <= 0.5 * (1.0 + 1e-12));
            assert!(mesh.triangle_area(t) > 0.0);
        }
        assert!((mesh.total_area() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_by_two_square_area_bound() {
        let f = square_fracture(0, 2.0);
        let mesh = triangulate_fracture(&f, &[], &MeshParams::new(0.02)).unwrap();
        assert!(mesh.triangles.len() >= 200, "{} triangles", mesh.triangles.len());
        assert!((mesh.total_area() - 4.0).abs() / 4.0 < 1e-10);
    }

    #[test]
    fn node_cap_resource_error() {
        let f = square_fracture(0, 1.0);
        let mut params = MeshParams::new(1e-9);
        params.node_cap = 10_000;
        assert!(matches!(
            triangulate_fracture(&f, &[], &params),
            Err(MeshError::ResourceLimit { .. })
        ));
    }

    #[test]
    fn meshing_is_deterministic() {
        let net = dfn3_network();
        let params = MeshParams::new(0.05);
        let a = mesh_network(&net, &params).unwrap();
        let b = mesh_network(&net, &params).unwrap();
        for (ma, mb) in a.fracture_meshes.iter().zip(&b.fracture_meshes) {
            assert_eq!(ma.nodes.len(), mb.nodes.len());
            for (pa, pb) in ma.nodes.iter().zip(&mb.nodes) {
                assert_eq!(pa.x.to_bits(), pb.x.to_bits());
                assert_eq!(pa.y.to_bits(), pb.y.to_bits());
            }
            assert_eq!(ma.triangles, mb.triangles);
        }
    }

    #[test]
    fn meshes_are_independent() {
        let net = dfn3_network();
        let params = MeshParams::new(0.05);
        let base = mesh_network(&net, &params).unwrap();
        // rebuild fracture 0 with a different resolution; fracture 2 unchanged
        let mut params2 = params.clone();
        params2.max_area_overrides.push((0, 0.01));
        let other = mesh_network(&net, &params2).unwrap();
        assert_ne!(base.fracture_meshes[0].nodes.len(), other.fracture_meshes[0].nodes.len());
        assert_eq!(base.fracture_meshes[2].nodes.len(), other.fracture_meshes[2].nodes.len());
        for (pa, pb) in base.fracture_meshes[2].nodes.iter().zip(&other.fracture_meshes[2].nodes) {
            assert_eq!(pa.x.to_bits(), pb.x.to_bits());
            assert_eq!(pa.y.to_bits(), pb.y.to_bits());
        }
    }

    fn two_triangle_mesh() -> FractureMesh {
        // unit square split along the diagonal (0,0)-(1,1)
        let nodes = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let triangles = vec![[0, 1, 2], [0, 2, 3]];
        let mut mesh = FractureMesh {
            fracture_id: 0,
            frame: square_fracture(0, 1.0).frame().unwrap(),
            nodes,
            triangles,
            dirichlet_edge_of_node: vec![None; 4],
            boundary_edges: Vec::new(),
            free_index: Vec::new(),
            free_nodes: Vec::new(),
            max_area: 0.5,
            requested_max_area: 0.5,
        };
        mesh.rebuild_free_maps();
        mesh
    }

    fn trace_between(a: Vec3, b: Vec3) -> Trace {
        Trace { id: 0, endpoints: [a, b], fracture_pair: (0, 1), length: (b - a).norm() }
    }

    #[test]
    fn partition_trace_inside_one_triangle() {
        let mesh = two_triangle_mesh();
        let t = trace_between(Vec3::new(0.5, 0.1, 0.0), Vec3::new(0.8, 0.2, 0.0));
        let part = induced_trace_partition(&mesh, &t).unwrap();
        assert_eq!(part.breakpoints.len(), 2);
        assert_eq!(part.breakpoints[0], 0.0);
        assert!((part.breakpoints[1] - t.length).abs() < 1e-15);
        assert_eq!(part.triangles, vec![0]);
    }

    #[test]
    fn partition_trace_crossing_one_edge() {
        let mesh = two_triangle_mesh();
        // crosses the diagonal once
        let t = trace_between(Vec3::new(0.6, 0.2, 0.0), Vec3::new(0.2, 0.6, 0.0));
        let part = induced_trace_partition(&mesh, &t).unwrap();
        assert_eq!(part.breakpoints.len(), 3);
        assert_eq!(part.triangles.len(), 2);
        assert_ne!(part.triangles[0], part.triangles[1]);
        let total: f64 = part.breakpoints.windows(2).map(|w| w[1] - w[0]).sum();
        assert!((total - t.length).abs() < 1e-12 * t.length);
    }

    /// Independent oracle: element count from explicit edge-segment crossings.
    fn edge_crossing_oracle(mesh: &FractureMesh, trace: &Trace) -> usize {
        let a = mesh.frame.to_local(trace.endpoints[0]);
        let b = mesh.frame.to_local(trace.endpoints[1]);
        let mut params = vec![0.0, 1.0];
        let mut edges = std::collections::HashSet::new();
        for tri in &mesh.triangles {
            for k in 0..3 {
                let (u, v) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((u.min(v), u.max(v)));
            }
        }
        for (u, v) in edges {
            let (p, q) = (mesh.nodes[u], mesh.nodes[v]);
            let d1 = b - a;
            let d2 = q - p;
            let den = d1.cross(d2);
            if den.abs() < 1e-14 {
                continue;
            }
            let t = (p - a).cross(d2) / den;
            let s = (p - a).cross(d1) / den;
            if t > 1e-12 && t < 1.0 - 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                params.push(t);
            }
        }
        params.sort_by(|x, y| x.partial_cmp(y).unwrap());
        params.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
        params.len() - 1
    }

    #[test]
    fn partition_matches_edge_crossing_oracle_on_dfn3() {
        let net = dfn3_network();
        let meshed = mesh_network(&net, &MeshParams::new(0.1)).unwrap();
        for tid in 0..net.traces.len() {
            for side in 0..2 {
                let part = &meshed.partitions[tid][side];
                let mesh = &meshed.fracture_meshes[part.fracture_id];
                let oracle = edge_crossing_oracle(mesh, &net.traces[tid]);
                assert_eq!(part.elem_count(), oracle, "trace {tid} side {side}");
            }
        }
    }

    #[test]
    fn partition_lengths_sum_to_trace_length() {
        let net = dfn3_network();
        let meshed = mesh_network(&net, &MeshParams::new(0.03)).unwrap();
        for (t, parts) in net.traces.iter().zip(&meshed.partitions) {
            for part in parts {
                let total: f64 = part.breakpoints.windows(2).map(|w| w[1] - w[0]).sum();
                assert!((total - t.length).abs() < 1e-12 * t.length);
                for w in part.breakpoints.windows(2) {
                    assert!(w[1] > w[0]);
                }
            }
        }
    }

    #[test]
    fn conforming_mode_puts_traces_on_edges() {
        let net = dfn3_network();
        let mut params = MeshParams::new(0.08);
        params.mode = MeshMode::TraceConforming;
        let meshed = mesh_network(&net, &params).unwrap();
        // every interior breakpoint of every induced partition must coincide
        // with a mesh node lying on the trace
        for (t, parts) in net.traces.iter().zip(&meshed.partitions) {
            for part in parts {
                let mesh = &meshed.fracture_meshes[part.fracture_id];
                let a = mesh.frame.to_local(t.endpoints[0]);
                let b = mesh.frame.to_local(t.endpoints[1]);
                let dir = (b - a).scale(1.0 / t.length);
                for &s in &part.breakpoints[1..part.breakpoints.len() - 1] {
                    let p = a + dir * s;
                    let near_node = mesh.nodes.iter().any(|&q| (q - p).norm() < 1e-8 * t.length.max(1.0));
                    assert!(near_node, "breakpoint {s} not at a node");
                }
            }
        }
    }

    #[test]
    fn trace_mesh_counts() {
        let t = trace_between(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let part = |n: usize| TracePartition {
            trace_id: 0,
            fracture_id: 0,
            breakpoints: (0..=n).map(|k| k as f64 / n as f64).collect(),
            triangles: vec![0; n],
        };
        let p7 = part(7);
        let p5 = part(5);
        let m = build_trace_mesh(&t, [&p7, &p5], 1.0, TraceBasisKind::Lambda).unwrap();
        assert_eq!(m.elem_count(), 7);
        assert_eq!(m.dof_count, 7);
        let p10 = part(10);
        let m = build_trace_mesh(&t, [&p10, &p5], 0.5, TraceBasisKind::Psi).unwrap();
        assert_eq!(m.elem_count(), 5);
        assert_eq!(m.dof_count, 6);
        let p3 = part(3);
        let m = build_trace_mesh(&t, [&p3, &p3], 0.1, TraceBasisKind::Lambda).unwrap();
        assert_eq!(m.elem_count(), 1);
        assert!(build_trace_mesh(&t, [&p3, &p3], 0.0, TraceBasisKind::Lambda).is_err());
        assert!(build_trace_mesh(&t, [&p3, &p3], 1.5, TraceBasisKind::Lambda).is_err());
    }
}
