//! Affine map of the reference triangle and the contravariant Piola transform.

use std::sync::Arc;

use super::quadrature::gauss_legendre;
use super::rt::{rt_basis, RtLocalBasis};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// `x = B xi + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiolaMap {
    /// Columns of `B`.
    pub b: [Vec2; 2],
    pub shift: Vec2,
    pub det: f64,
}

impl PiolaMap {
    pub fn new(b: [Vec2; 2], shift: Vec2) -> Result<Self> {
        let det = b[0].cross(b[1]);
        if !(det > 0.0) {
            return Err(Error::DegenerateTriangle { det });
        }
        Ok(PiolaMap { b, shift, det })
    }

    /// Map sending the reference vertices to `v` in order.
    pub fn from_vertices(v: [Vec2; 3]) -> Result<Self> {
        Self::new([v[1] - v[0], v[2] - v[0]], v[0])
    }

    pub fn identity() -> Self {
        PiolaMap { b: [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)], shift: Vec2::ZERO, det: 1.0 }
    }

    pub fn apply_linear(&self, v: Vec2) -> Vec2 {
        v.x * self.b[0] + v.y * self.b[1]
    }

    pub fn map(&self, xi: Vec2) -> Vec2 {
        self.shift + self.apply_linear(xi)
    }

    /// `B^-1 v`.
    pub fn solve_linear(&self, v: Vec2) -> Vec2 {
        Vec2::new(v.cross(self.b[1]), self.b[0].cross(v)) * (1.0 / self.det)
    }

    pub fn inverse(&self, x: Vec2) -> Vec2 {
        self.solve_linear(x - self.shift)
    }

    /// `B q / det B`.
    pub fn push(&self, q: Vec2) -> Vec2 {
        self.apply_linear(q) * (1.0 / self.det)
    }

    pub fn push_div(&self, div: f64) -> f64 {
        div / self.det
    }

    /// Inverse of [`PiolaMap::push`].
    pub fn pull(&self, q: Vec2) -> Vec2 {
        self.solve_linear(q) * self.det
    }
}

/// Physical counterpart of a reference field.
pub fn piola_push(field: impl Fn(Vec2) -> Vec2, map: PiolaMap) -> impl Fn(Vec2) -> Vec2 {
    move |x| map.push(field(map.inverse(x)))
}

/// RT_k basis on a physical triangle.
///
/// Field `j` is `s_j P phi_j` with `P` the Piola push and `s_j = |e|/|e_ref|`
/// on edge slots, `sqrt(det B)` on interior slots. With this scaling the basis
/// is dual to [`PhysicalElement::dofs`]: mean normal moments along each edge
/// (local counterclockwise orientation) and `sqrt(det B)`-scaled pulled-back
/// interior moments, so DOF values are independent of the element size.
#[derive(Debug, Clone)]
pub struct PhysicalElement {
    pub map: PiolaMap,
    pub vertices: [Vec2; 3],
    pub basis: Arc<RtLocalBasis>,
    pub scale: Vec<f64>,
}

impl PhysicalElement {
    pub fn new(vertices: [Vec2; 3], k: usize) -> Result<Self> {
        let map = PiolaMap::from_vertices(vertices)?;
        let basis = rt_basis(k)?;
        let mut scale = Vec::with_capacity(basis.dim());
        for i in 0..3 {
            let (a, b, _) = super::rt::reference_edge(i);
            let len = vertices[(i + 1) % 3].dist(vertices[(i + 2) % 3]);
            scale.extend(std::iter::repeat_n(len / a.dist(b), k + 1));
        }
        scale.extend(std::iter::repeat_n(map.det.sqrt(), basis.n_interior_dofs()));
        Ok(PhysicalElement { map, vertices, basis, scale })
    }

    pub fn k(&self) -> usize {
        self.basis.k
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Values and divergences of all local fields at reference point `xi`.
    pub fn eval_ref(&self, xi: Vec2) -> (Vec<Vec2>, Vec<f64>) {
        let (mut v, mut d) = self.basis.eval_all(xi);
        for j in 0..v.len() {
            v[j] = self.scale[j] * self.map.push(v[j]);
            d[j] = self.scale[j] * self.map.push_div(d[j]);
        }
        (v, d)
    }

    /// Values and divergences at a physical point (anywhere in the plane:
    /// the polynomials extend beyond the triangle).
    pub fn eval_all(&self, x: Vec2) -> (Vec<Vec2>, Vec<f64>) {
        self.eval_ref(self.map.inverse(x))
    }

    /// Start and end of local edge `i`, counterclockwise.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }

    /// Outward unit normal of local edge `i`.
    pub fn edge_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        (b - a).rot_cw().normalized()
    }

    /// Local physical DOFs of `field`.
    pub fn dofs(&self, field: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let k = self.k();
        let mut out = Vec::with_capacity(self.dim());
        let (sx, sw) = gauss_legendre(k + 8);
        for i in 0..3 {
            let (a, b) = self.edge(i);
            let n = self.edge_normal(i);
            for m in 0..=k {
                let mut acc = 0.0;
                for (s, w) in sx.iter().zip(&sw) {
                    acc += w * field(a + *s * (b - a)).dot(n) * super::polynomial::legendre01(m, *s);
                }
                out.push(acc);
            }
        }
        if k > 0 {
            let sq = self.map.det.sqrt();
            let pulled = |xi: Vec2| self.map.solve_linear(field(self.map.map(xi))) * sq;
            let interior = self.basis.reference_dofs(pulled);
            out.extend_from_slice(&interior[3 * (k + 1)..]);
        }
        out
    }
}
