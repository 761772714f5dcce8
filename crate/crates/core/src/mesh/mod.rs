//! Straight-edged triangulations fitted to a curved domain, and the boundary
//! bookkeeping of the Petrov-Galerkin construction.

mod generate;
mod io;

pub use generate::{
    disk_domain, generate_disk, generate_quarter_annulus, generate_unit_square, quarter_annulus_domain,
    unit_square_domain,
};
pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{foot_of_perpendicular, BcTag, Convexity, DomainBoundary, Vec2};

/// A boundary edge and the arc of the true boundary it approximates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub arc: usize,
    pub tag: BcTag,
}

/// Conforming triangulation.
///
/// Local edge `i` of a triangle is the edge opposite its vertex `i`, running
/// counterclockwise from vertex `i+1` to vertex `i+2`. Global edges are
/// oriented from the lower to the higher vertex index; `triangle_edges`
/// stores `+1` when the local direction matches the global one.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub triangle_edges: Vec<[(usize, i8); 3]>,
    pub edge_triangles: Vec<Vec<usize>>,
    pub boundary_edges: Vec<BoundaryEdge>,
    edge_boundary: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds edge connectivity. Clockwise triangles are reoriented.
    pub fn new(vertices: Vec<Vec2>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let det = (b - a).cross(c - a);
            if det.abs() < 1e-300 {
                return Err(Error::DegenerateTriangle { det });
            }
            if det < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [(0usize, 1i8); 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push(Vec::new());
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
                *slot = (e, if a < b { 1 } else { -1 });
            }
            triangle_edges.push(local);
        }
        if let Some(e) = edge_triangles.iter().position(|ts| ts.len() > 2) {
            return Err(Error::InvalidMesh(format!("edge {e} is shared by more than two triangles")));
        }
        let n_edges = edges.len();
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_edges: Vec::new(),
            edge_boundary: vec![None; n_edges],
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e].len() == 1
    }

    /// Index into `boundary_edges` for edge `e`, if it is on the boundary.
    pub fn boundary_of_edge(&self, e: usize) -> Option<&BoundaryEdge> {
        self.edge_boundary[e].map(|i| &self.boundary_edges[i])
    }

    /// Assigns each boundary edge to the arc containing both its endpoints.
    /// When several arcs qualify, the one closest to the edge midpoint wins.
    pub fn attach_boundary(&mut self, domain: &DomainBoundary) -> Result<()> {
        let tol = 1e-10;
        let mut boundary = Vec::new();
        let mut edge_boundary = vec![None; self.edges.len()];
        for e in 0..self.edges.len() {
            if !self.is_boundary_edge(e) {
                continue;
            }
            let [a, b] = self.edges[e].map(|v| self.vertices[v]);
            let mid = 0.5 * (a + b);
            let mut best: Option<(usize, f64)> = None;
            for (k, arc) in domain.arcs.iter().enumerate() {
                if arc.closest_point(a).0 > tol || arc.closest_point(b).0 > tol {
                    continue;
                }
                let dm = arc.closest_point(mid).0;
                if best.is_none_or(|(_, d)| dm < d) {
                    best = Some((k, dm));
                }
            }
            let (arc, _) = best.ok_or_else(|| {
                Error::InvalidMesh(format!("boundary edge {e} has an endpoint off the boundary"))
            })?;
            edge_boundary[e] = Some(boundary.len());
            boundary.push(BoundaryEdge { edge: e, arc, tag: domain.arcs[arc].tag });
        }
        self.boundary_edges = boundary;
        self.edge_boundary = edge_boundary;
        Ok(())
    }

    /// Sets the boundary edges from explicit records.
    pub fn set_boundary_edges(&mut self, records: Vec<BoundaryEdge>) -> Result<()> {
        let mut edge_boundary = vec![None; self.edges.len()];
        for (i, r) in records.iter().enumerate() {
            if r.edge >= self.edges.len() || !self.is_boundary_edge(r.edge) {
                return Err(Error::InvalidMesh(format!("record {i}: edge {} is not a boundary edge", r.edge)));
            }
            edge_boundary[r.edge] = Some(i);
        }
        if let Some(e) = (0..self.edges.len()).find(|&e| self.is_boundary_edge(e) && edge_boundary[e].is_none()) {
            return Err(Error::InvalidMesh(format!("boundary edge {e} has no arc record")));
        }
        self.boundary_edges = records;
        self.edge_boundary = edge_boundary;
        Ok(())
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * (b - a).cross(c - a)
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        self.vertices[a].dist(self.vertices[b])
    }

    /// Longest edge of triangle `t`.
    pub fn h_t(&self, t: usize) -> f64 {
        self.triangle_edges[t].iter().map(|&(e, _)| self.edge_length(e)).fold(0.0, f64::max)
    }

    /// Longest edge in the mesh.
    pub fn h(&self) -> f64 {
        (0..self.n_edges()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    /// Local index of edge `e` in triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> Option<usize> {
        self.triangle_edges[t].iter().position(|&(g, _)| g == e)
    }

    /// Endpoints of a boundary edge in the counterclockwise order of its
    /// triangle, and the outer unit normal.
    pub fn boundary_edge_frame(&self, e: usize) -> (Vec2, Vec2, Vec2) {
        let t = self.edge_triangles[e][0];
        let i = self.local_edge(t, e).expect("edge belongs to its triangle");
        let tri = self.triangles[t];
        let a = self.vertices[tri[(i + 1) % 3]];
        let b = self.vertices[tri[(i + 2) % 3]];
        (a, b, (b - a).rot_cw().normalized())
    }

    /// Smallest interior angle in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_vertices(t);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                let ang = u.cross(v).abs().atan2(u.dot(v)).to_degrees();
                min = min.min(ang);
            }
        }
        min
    }

    /// Checks conformity, orientation, the angle floor, and that boundary
    /// vertices lie on the boundary.
    pub fn validate(&self, domain: &DomainBoundary, min_angle_floor_deg: f64) -> Result<()> {
        for (e, ts) in self.edge_triangles.iter().enumerate() {
            if ts.is_empty() || ts.len() > 2 {
                return Err(Error::InvalidMesh(format!("edge {e} has {} triangles", ts.len())));
            }
        }
        for t in 0..self.n_triangles() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is not counterclockwise")));
            }
        }
        let angle = self.min_angle_deg();
        if angle < min_angle_floor_deg {
            return Err(Error::InvalidMesh(format!(
                "minimum angle {angle:.2} deg is below the floor {min_angle_floor_deg} deg"
            )));
        }
        for be in &self.boundary_edges {
            let arc = &domain.arcs[be.arc];
            for &v in &self.edges[be.edge] {
                let d = arc.closest_point(self.vertices[v]).0;
                if d > 1e-10 {
                    return Err(Error::InvalidMesh(format!("boundary vertex {v} is {d:.3e} off the boundary")));
                }
            }
        }
        Ok(())
    }
}

/// A triangle owning a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTriangle {
    pub triangle: usize,
    pub local_edge: usize,
    pub edge: usize,
    pub arc: usize,
    pub tag: BcTag,
    /// `+1` when the sliver between chord and arc lies outside the polygon,
    /// `-1` when it lies inside, `0` for straight arcs.
    pub sigma: i8,
}

/// Boundary triangles split by boundary-condition tag.
#[derive(Debug, Clone, Default)]
pub struct BoundaryClassification {
    pub s_1h: Vec<usize>,
    pub s_0h: Vec<usize>,
    pub entries: Vec<BoundaryTriangle>,
    pub by_triangle: HashMap<usize, Vec<usize>>,
}

impl BoundaryClassification {
    /// All triangles with a boundary edge, sorted.
    pub fn s_h(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.by_triangle.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn entries_of(&self, t: usize) -> impl Iterator<Item = &BoundaryTriangle> {
        self.by_triangle.get(&t).into_iter().flatten().map(|&i| &self.entries[i])
    }

    /// The curved boundary edge of `t`, if any.
    pub fn curved_entry(&self, t: usize, domain: &DomainBoundary) -> Option<&BoundaryTriangle> {
        self.entries_of(t).find(|b| !domain.arcs[b.arc].is_straight())
    }
}

/// Splits the boundary triangles into the Neumann and Dirichlet sets and
/// computes the sliver orientation of every boundary edge.
pub fn classify_boundary(mesh: &Mesh, domain: &DomainBoundary) -> Result<BoundaryClassification> {
    let mut c = BoundaryClassification::default();
    for be in &mesh.boundary_edges {
        let t = mesh.edge_triangles[be.edge][0];
        let local_edge = mesh.local_edge(t, be.edge).expect("edge of its triangle");
        let arc = &domain.arcs[be.arc];
        let sigma = if arc.is_straight() {
            0
        } else {
            let (a, b, n_t) = mesh.boundary_edge_frame(be.edge);
            let bracket = (arc.param_of(a), arc.param_of(b));
            let foot = foot_of_perpendicular(arc, 0.5 * (a + b), n_t, bracket)?;
            let sigma = if foot.signed_distance > 0.0 { 1 } else { -1 };
            let expected = match arc.convexity() {
                Convexity::Convex => 1,
                Convexity::Concave => -1,
                Convexity::Straight => 0,
            };
            if sigma != expected {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {} bulges against the convexity of arc {}",
                    be.edge, be.arc
                )));
            }
            sigma
        };
        let idx = c.entries.len();
        c.entries.push(BoundaryTriangle {
            triangle: t,
            local_edge,
            edge: be.edge,
            arc: be.arc,
            tag: be.tag,
            sigma,
        });
        c.by_triangle.entry(t).or_default().push(idx);
    }
    for (&t, list) in &c.by_triangle {
        let curved = list.iter().filter(|&&i| !domain.arcs[c.entries[i].arc].is_straight()).count();
        if curved > 1 {
            return Err(Error::ThreeBoundaryVertices { triangle: t });
        }
    }
    let mut s1: Vec<usize> = c.entries.iter().filter(|b| b.tag == BcTag::Gamma1).map(|b| b.triangle).collect();
    let mut s0: Vec<usize> = c.entries.iter().filter(|b| b.tag == BcTag::Gamma0).map(|b| b.triangle).collect();
    s1.sort_unstable();
    s1.dedup();
    s0.sort_unstable();
    s0.dedup();
    c.s_1h = s1;
    c.s_0h = s0;
    Ok(c)
}
