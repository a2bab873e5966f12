//! Fracture network geometry: planar polygonal fractures, their pairwise
//! intersection segments (traces), local 2D frames and boundary-condition
//! tagging.

use std::fmt;
use std::sync::Arc;

use crate::error::GeometryError;
use crate::la::{Vec2, Vec3};

/// Relative tolerance for coplanarity and on-plane checks.
pub const PLANE_TOL: f64 = 1e-10;
/// Traces shorter than this fraction of the smaller fracture diameter are
/// treated as point contacts and discarded.
pub const TRACE_LENGTH_TOL: f64 = 1e-8;

/// Symmetric positive definite 2x2 transmissivity tensor in the fracture's
/// local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2 {
    pub kxx: f64,
    pub kxy: f64,
    pub kyy: f64,
}

impl Tensor2 {
    pub fn isotropic(k: f64) -> Self {
        Tensor2 { kxx: k, kxy: 0.0, kyy: k }
    }

    pub fn is_spd(&self) -> bool {
        self.kxx > 0.0 && self.kyy > 0.0 && self.kxx * self.kyy - self.kxy * self.kxy > 0.0
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.kxx * v.x + self.kxy * v.y, self.kxy * v.x + self.kyy * v.y)
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2 { kxx: self.kxx * s, kxy: self.kxy * s, kyy: self.kyy * s }
    }

    /// Scalar magnitude used for order-of-magnitude estimates: sqrt(det K).
    pub fn scalar_magnitude(&self) -> f64 {
        (self.kxx * self.kyy - self.kxy * self.kxy).sqrt()
    }
}

/// A scalar field given either as a constant or as a named analytic callback
/// of the global 3D position. The name survives serialization round trips.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Expr { name: String, f: Arc<dyn Fn(Vec3) -> f64 + Send + Sync> },
}

impl ScalarField {
    pub fn expr<F>(name: &str, f: F) -> Self
    where
        F: Fn(Vec3) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Expr { name: name.to_string(), f: Arc::new(f) }
    }

    pub fn eval(&self, p: Vec3) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Expr { f, .. } => f(p),
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(fm, "Constant({c})"),
            ScalarField::Expr { name, .. } => write!(fm, "Expr({name})"),
        }
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ScalarField::Constant(a), ScalarField::Constant(b)) => a == b,
            (ScalarField::Expr { name: a, .. }, ScalarField::Expr { name: b, .. }) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Boundary condition attached to one polygon edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBc {
    pub kind: BcKind,
    pub value: ScalarField,
}

impl EdgeBc {
    pub fn dirichlet(value: f64) -> Self {
        EdgeBc { kind: BcKind::Dirichlet, value: ScalarField::Constant(value) }
    }

    pub fn neumann(value: f64) -> Self {
        EdgeBc { kind: BcKind::Neumann, value: ScalarField::Constant(value) }
    }
}

/// Orthonormal in-plane frame of a fracture. Mapping to local coordinates is
/// an isometry of the plane.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
}

impl Frame {
    pub fn to_local(&self, p: Vec3) -> Vec2 {
        let d = p - self.origin;
        Vec2::new(d.dot(self.e1), d.dot(self.e2))
    }

    pub fn to_global(&self, q: Vec2) -> Vec3 {
        self.origin + self.e1 * q.x + self.e2 * q.y
    }

    /// Rotates an in-plane 3D direction into local coordinates.
    pub fn dir_to_local(&self, d: Vec3) -> Vec2 {
        Vec2::new(d.dot(self.e1), d.dot(self.e2))
    }

    pub fn offplane_distance(&self, p: Vec3) -> f64 {
        (p - self.origin).dot(self.normal).abs()
    }
}

#[derive(Clone, Debug)]
pub struct Fracture {
    pub id: usize,
    pub vertices: Vec<Vec3>,
    pub transmissivity: Tensor2,
    pub edge_bcs: Vec<EdgeBc>,
    pub source: ScalarField,
}

impl Fracture {
    pub fn new(
        id: usize,
        vertices: Vec<Vec3>,
        transmissivity: Tensor2,
        edge_bcs: Vec<EdgeBc>,
        source: ScalarField,
    ) -> Result<Self, GeometryError> {
        let f = Fracture { id, vertices, transmissivity, edge_bcs, source };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let id = self.id;
        let n = self.vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices { id, count: n });
        }
        if self.edge_bcs.len() != n {
            return Err(GeometryError::BcCountMismatch { id, edges: n, bcs: self.edge_bcs.len() });
        }
        if !self.transmissivity.is_spd() {
            return Err(GeometryError::NonPositiveTransmissivity { id });
        }
        let diam = self.diameter();
        let normal = self.newell_normal();
        let area2 = normal.norm();
        if area2 <= (PLANE_TOL * diam * diam).max(f64::MIN_POSITIVE) {
            return Err(GeometryError::DegeneratePolygon { id });
        }
        let unit_n = normal.normalize();
        let centroid = self.centroid();
        let tol = PLANE_TOL * diam;
        let mut worst = 0.0f64;
        for v in &self.vertices {
            worst = worst.max((*v - centroid).dot(unit_n).abs());
        }
        if worst > tol {
            return Err(GeometryError::NotCoplanar { id, deviation: worst, tolerance: tol });
        }
        // simple polygon: non-adjacent edges must not intersect
        let frame = self.frame()?;
        let local: Vec<Vec2> = self.vertices.iter().map(|&v| frame.to_local(v)).collect();
        for i in 0..n {
            let (a1, a2) = (local[i], local[(i + 1) % n]);
            for j in i + 1..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (b1, b2) = (local[j], local[(j + 1) % n]);
                if segments_properly_intersect(a1, a2, b1, b2, 1e-12 * diam) {
                    return Err(GeometryError::SelfIntersecting { id });
                }
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.vertices.len() {
            for j in i + 1..self.vertices.len() {
                d = d.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        d
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::ZERO;
        for v in &self.vertices {
            c = c + *v;
        }
        c * (1.0 / self.vertices.len() as f64)
    }

    fn newell_normal(&self) -> Vec3 {
        let mut n = Vec3::ZERO;
        let vs = &self.vertices;
        for i in 0..vs.len() {
            let a = vs[i];
            let b = vs[(i + 1) % vs.len()];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        n
    }

    /// Local frame: origin at the first vertex, first basis vector along the
    /// first edge, second completing a right-handed system with the normal.
    pub fn frame(&self) -> Result<Frame, GeometryError> {
        let normal = self.newell_normal();
        let diam = self.diameter();
        if normal.norm() <= (PLANE_TOL * diam * diam).max(f64::MIN_POSITIVE) {
            return Err(GeometryError::DegeneratePolygon { id: self.id });
        }
        let n = normal.normalize();
        let e1 = (self.vertices[1] - self.vertices[0]).normalize();
        let e2 = n.cross(e1);
        Ok(Frame { origin: self.vertices[0], e1, e2, normal: n })
    }

    /// Maps an on-plane point to local coordinates; errors if the point is
    /// off the plane beyond tolerance.
    pub fn map_to_local(&self, p: Vec3) -> Result<Vec2, GeometryError> {
        let frame = self.frame()?;
        let tol = PLANE_TOL * self.diameter();
        let dist = frame.offplane_distance(p);
        if dist > tol {
            return Err(GeometryError::PointOffPlane { x: p.x, y: p.y, z: p.z, distance: dist, tolerance: tol });
        }
        Ok(frame.to_local(p))
    }

    pub fn local_polygon(&self) -> Result<Vec<Vec2>, GeometryError> {
        let frame = self.frame()?;
        Ok(self.vertices.iter().map(|&v| frame.to_local(v)).collect())
    }

    pub fn area(&self) -> f64 {
        0.5 * self.newell_normal().norm()
    }

    pub fn has_dirichlet_edge(&self) -> bool {
        self.edge_bcs.iter().any(|bc| bc.kind == BcKind::Dirichlet)
    }
}

/// Intersection segment of two fractures.
#[derive(Clone, Debug)]
pub struct Trace {
    pub id: usize,
    pub endpoints: [Vec3; 2],
    /// (lower index, higher index), strictly ordered.
    pub fracture_pair: (usize, usize),
    pub length: f64,
}

impl Trace {
    pub fn direction(&self) -> Vec3 {
        (self.endpoints[1] - self.endpoints[0]).normalize()
    }

    /// Point at arclength s from the first endpoint.
    pub fn point_at(&self, s: f64) -> Vec3 {
        self.endpoints[0] + self.direction() * s
    }

    /// Orientation sign of the flux unknown in the given fracture's equation:
    /// +1 for the lower-indexed fracture of the pair, -1 for the higher.
    pub fn sign_for(&self, fracture: usize) -> f64 {
        trace_sign(fracture, self.fracture_pair)
    }
}

/// The flux unknown on a trace is positive for the lower-indexed fracture and
/// negative for the higher-indexed one. Pure function of the indices.
pub fn trace_sign(fracture: usize, pair: (usize, usize)) -> f64 {
    debug_assert!(fracture == pair.0 || fracture == pair.1);
    if fracture == pair.0.max(pair.1) {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Debug)]
pub struct FractureNetwork {
    pub fractures: Vec<Fracture>,
    pub traces: Vec<Trace>,
    /// Per-fracture list of incident trace ids, ascending.
    pub incidence: Vec<Vec<usize>>,
}

impl FractureNetwork {
    /// Validates the fractures, computes all traces and builds the incidence
    /// lists. Requires at least one Dirichlet edge in the network.
    pub fn new(fractures: Vec<Fracture>) -> Result<Self, GeometryError> {
        for (pos, f) in fractures.iter().enumerate() {
            if f.id != pos {
                return Err(GeometryError::IdMismatch { found: f.id, position: pos });
            }
            f.validate()?;
        }
        if !fractures.iter().any(|f| f.has_dirichlet_edge()) {
            return Err(GeometryError::NoDirichletBoundary);
        }
        let traces = compute_traces(&fractures)?;
        let mut incidence = vec![Vec::new(); fractures.len()];
        for t in &traces {
            incidence[t.fracture_pair.0].push(t.id);
            incidence[t.fracture_pair.1].push(t.id);
        }
        Ok(FractureNetwork { fractures, traces, incidence })
    }

    pub fn total_trace_length(&self) -> f64 {
        self.traces.iter().map(|t| t.length).sum()
    }

    /// Copy of the network with every transmissivity multiplied by `factor`.
    /// Heads of the scaled problem equal heads of the original; fluxes scale
    /// by the same factor.
    pub fn rescaled(&self, factor: f64) -> FractureNetwork {
        let mut out = self.clone();
        for f in &mut out.fractures {
            f.transmissivity = f.transmissivity.scale(factor);
        }
        out
    }
}

/// Computes all traces of a fracture list: one trace per unordered pair whose
/// closed polygons intersect in a segment of positive length. Point contacts
/// are skipped; coplanar pairs with overlapping interiors are rejected.
pub fn compute_traces(fractures: &[Fracture]) -> Result<Vec<Trace>, GeometryError> {
    let mut traces = Vec::new();
    let frames: Vec<Frame> = fractures.iter().map(|f| f.frame()).collect::<Result<_, _>>()?;
    let locals: Vec<Vec<Vec2>> = fractures
        .iter()
        .zip(&frames)
        .map(|(f, fr)| f.vertices.iter().map(|&v| fr.to_local(v)).collect())
        .collect();
    let diams: Vec<f64> = fractures.iter().map(|f| f.diameter()).collect();

    for i in 0..fractures.len() {
        for j in i + 1..fractures.len() {
            let min_diam = diams[i].min(diams[j]);
            let plane_tol = PLANE_TOL * diams[i].max(diams[j]);
            let ni = frames[i].normal;
            let nj = frames[j].normal;
            let cross = ni.cross(nj);
            if cross.norm() < 1e-12 {
                // parallel planes: coplanar only if all vertices of j lie on plane i
                let coplanar = fractures[j]
                    .vertices
                    .iter()
                    .all(|&v| frames[i].offplane_distance(v) <= plane_tol);
                if coplanar && coplanar_interiors_overlap(&locals[i], &fractures[j], &frames[i], min_diam) {
                    return Err(GeometryError::CoplanarOverlap { a: i, b: j });
                }
                continue;
            }
            let dir = cross.normalize();
            // point on both planes: solve [ni; nj; dir] p = [ni.oi; nj.oj; 0]
            let oi = frames[i].origin;
            let oj = frames[j].origin;
            let p0 = match solve3(ni, nj, dir, ni.dot(oi), nj.dot(oj), 0.0) {
                Some(p) => p,
                None => continue,
            };

            let iv_i = polygon_line_intervals(&locals[i], frames[i].to_local(p0), frames[i].dir_to_local(dir), plane_tol);
            let iv_j = polygon_line_intervals(&locals[j], frames[j].to_local(p0), frames[j].dir_to_local(dir), plane_tol);

            let mut overlaps = Vec::new();
            for &(a0, a1) in &iv_i {
                for &(b0, b1) in &iv_j {
                    let lo = a0.max(b0);
                    let hi = a1.min(b1);
                    if hi - lo > TRACE_LENGTH_TOL * min_diam {
                        overlaps.push((lo, hi));
                    }
                }
            }
            match overlaps.len() {
                0 => {}
                1 => {
                    let (t0, t1) = overlaps[0];
                    let mut a = p0 + dir * t0;
                    let mut b = p0 + dir * t1;
                    if !a.lex_le(b) {
                        std::mem::swap(&mut a, &mut b);
                    }
                    traces.push(Trace {
                        id: traces.len(),
                        length: (b - a).norm(),
                        endpoints: [a, b],
                        fracture_pair: (i, j),
                    });
                }
                _ => return Err(GeometryError::NonSegmentIntersection { a: i, b: j }),
            }
        }
    }
    Ok(traces)
}

fn solve3(r0: Vec3, r1: Vec3, r2: Vec3, b0: f64, b1: f64, b2: f64) -> Option<Vec3> {
    let det = r0.dot(r1.cross(r2));
    if det.abs() < 1e-14 {
        return None;
    }
    // Cramer's rule on the system with rows r0, r1, r2
    let m = |c0: Vec3, c1: Vec3, c2: Vec3| c0.dot(c1.cross(c2));
    let bx = Vec3::new(b0, b1, b2);
    let col0 = Vec3::new(r0.x, r1.x, r2.x);
    let col1 = Vec3::new(r0.y, r1.y, r2.y);
    let col2 = Vec3::new(r0.z, r1.z, r2.z);
    let x = m(bx, col1, col2) / det;
    let y = m(col0, bx, col2) / det;
    let z = m(col0, col1, bx) / det;
    Some(Vec3::new(x, y, z))
}

/// Intersection of the parametric line q0 + t*dir with a simple polygon:
/// returns the sorted list of parameter intervals lying inside the closed
/// polygon, including degenerate runs along the boundary.
fn polygon_line_intervals(poly: &[Vec2], q0: Vec2, dir: Vec2, tol: f64) -> Vec<(f64, f64)> {
    let dir = dir.scale(1.0 / dir.norm());
    let n = poly.len();
    let mut crossings: Vec<f64> = Vec::new();
    let mut overlaps: Vec<(f64, f64)> = Vec::new();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        // signed perpendicular distances to the line
        let sa = dir.cross(a - q0);
        let sb = dir.cross(b - q0);
        let ta = (a - q0).dot(dir);
        let tb = (b - q0).dot(dir);
        if sa.abs() <= tol && sb.abs() <= tol {
            overlaps.push((ta.min(tb), ta.max(tb)));
            continue;
        }
        // consistent tie-break: vertices on the line count as on the positive side
        let sa_eff = if sa.abs() <= tol { tol } else { sa };
        let sb_eff = if sb.abs() <= tol { tol } else { sb };
        if sa_eff * sb_eff < 0.0 {
            let t = ta + (tb - ta) * sa / (sa - sb);
            crossings.push(t);
        }
    }
    crossings.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut k = 0;
    while k + 1 < crossings.len() {
        intervals.push((crossings[k], crossings[k + 1]));
        k += 2;
    }
    intervals.extend(overlaps);
    if intervals.is_empty() {
        return intervals;
    }
    intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // merge touching/overlapping pieces
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some((_, mhi)) if lo <= *mhi + tol => {
                *mhi = mhi.max(hi);
            }
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

/// True if p lies inside or on the boundary of the polygon.
pub fn point_in_polygon(poly: &[Vec2], p: Vec2, tol: f64) -> bool {
    let n = poly.len();
    // on-boundary check
    for k in 0..n {
        if point_segment_distance(p, poly[k], poly[(k + 1) % n]) <= tol {
            return true;
        }
    }
    // even-odd ray cast along +x
    let mut inside = false;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn segments_properly_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2, tol: f64) -> bool {
    let d1 = (a2 - a1).cross(b1 - a1);
    let d2 = (a2 - a1).cross(b2 - a1);
    let d3 = (b2 - b1).cross(a1 - b1);
    let d4 = (b2 - b1).cross(a2 - b1);
    d1 * d2 < -tol * tol && d3 * d4 < -tol * tol
}

fn coplanar_interiors_overlap(poly_i: &[Vec2], fj: &Fracture, frame_i: &Frame, min_diam: f64) -> bool {
    let poly_j: Vec<Vec2> = fj.vertices.iter().map(|&v| frame_i.to_local(v)).collect();
    let tol = 1e-9 * min_diam;
    // proper edge crossings imply interior overlap
    for a in 0..poly_i.len() {
        let (a1, a2) = (poly_i[a], poly_i[(a + 1) % poly_i.len()]);
        for b in 0..poly_j.len() {
            let (b1, b2) = (poly_j[b], poly_j[(b + 1) % poly_j.len()]);
            if segments_properly_intersect(a1, a2, b1, b2, tol) {
                return true;
            }
        }
    }
    // one polygon strictly containing a vertex of the other
    let strictly_inside = |poly: &[Vec2], p: Vec2| -> bool {
        if !point_in_polygon(poly, p, 0.0) {
            return false;
        }
        poly.iter()
            .enumerate()
            .all(|(k, _)| point_segment_distance(p, poly[k], poly[(k + 1) % poly.len()]) > tol)
    };
    let centroid = |poly: &[Vec2]| {
        let mut c = Vec2::new(0.0, 0.0);
        for &p in poly {
            c = c + p;
        }
        c.scale(1.0 / poly.len() as f64)
    };
    poly_j.iter().any(|&p| strictly_inside(poly_i, p))
        || poly_i.iter().any(|&p| strictly_inside(&poly_j, p))
        || strictly_inside(poly_i, centroid(&poly_j))
        || strictly_inside(&poly_j, centroid(poly_i))
}
