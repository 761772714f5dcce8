//! Raviart-Thomas basis on the reference triangle.
//!
//! Degrees of freedom, in order:
//! * for each edge `i` (opposite vertex `i`, parametrized counterclockwise by
//!   `s in [0, 1]`), the `k+1` mean normal moments
//!   `int_0^1 q(s).n L_m(s) ds` against shifted Legendre polynomials;
//! * for `k > 0`, the `k(k+1)` moments `int_T q.w` against an
//!   L2-orthonormal basis of `[P_{k-1}]^2`, interleaved as `(phi_a, 0), (0, phi_a)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::Mat;

use super::polynomial::{dim_pk, invert, legendre01, monomial_exponents, monomials, monomials_with_gradient};
use super::quadrature::{gauss_legendre, triangle_rule, MAX_TRIANGLE_DEGREE};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const REFERENCE_VERTICES: [Vec2; 3] = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];

/// Start, end, and outward unit normal of reference edge `i`.
pub fn reference_edge(i: usize) -> (Vec2, Vec2, Vec2) {
    let a = REFERENCE_VERTICES[(i + 1) % 3];
    let b = REFERENCE_VERTICES[(i + 2) % 3];
    (a, b, (b - a).rot_cw().normalized())
}

/// `(k+3)(k+1)`.
pub fn rt_dim(k: usize) -> usize {
    (k + 3) * (k + 1)
}

#[derive(Debug)]
pub struct RtLocalBasis {
    pub k: usize,
    /// Column `j` holds the spanning-set coefficients of basis field `j`.
    coeffs: Mat<f64>,
    /// Rows: orthonormal `P_{k-1}` functions in monomial coefficients.
    interior_scalar: Vec<Vec<f64>>,
}

impl RtLocalBasis {
    fn build(k: usize) -> Result<Self> {
        let n = rt_dim(k);
        let interior_scalar = if k > 0 { orthonormal_pk(k - 1) } else { Vec::new() };
        let mut partial = RtLocalBasis { k, coeffs: Mat::identity(n, n), interior_scalar };
        // V[i][c] = DOF_i(span_c)
        let mut v = Mat::<f64>::zeros(n, n);
        for c in 0..n {
            let dofs = partial.reference_dofs(|p| partial.spanning_value(c, p));
            for (i, d) in dofs.into_iter().enumerate() {
                v[(i, c)] = d;
            }
        }
        partial.coeffs = invert(&v, 1e-9).ok_or(Error::SingularBasis { k })?;
        Ok(partial)
    }

    pub fn dim(&self) -> usize {
        rt_dim(self.k)
    }

    pub fn n_edge_dofs(&self) -> usize {
        self.k + 1
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.k * (self.k + 1)
    }

    pub fn edge_slot(&self, edge: usize, m: usize) -> usize {
        edge * (self.k + 1) + m
    }

    pub fn interior_slot(&self, l: usize) -> usize {
        3 * (self.k + 1) + l
    }

    fn n_scalar(&self) -> usize {
        dim_pk(self.k)
    }

    /// Spanning set: `(m, 0)`, `(0, m)` for monomials `m` of degree `<= k`,
    /// then `(x m, y m)` for homogeneous `m` of degree `k`.
    fn spanning_value(&self, c: usize, p: Vec2) -> Vec2 {
        let ns = self.n_scalar();
        let mono = monomials(self.k, p.x, p.y);
        if c < ns {
            Vec2::new(mono[c], 0.0)
        } else if c < 2 * ns {
            Vec2::new(0.0, mono[c - ns])
        } else {
            let h = mono[ns - (self.k + 1) + (c - 2 * ns)];
            Vec2::new(p.x * h, p.y * h)
        }
    }

    fn spanning_all(&self, p: Vec2) -> (Vec<Vec2>, Vec<f64>) {
        let ns = self.n_scalar();
        let (mono, dx, dy) = monomials_with_gradient(self.k, p.x, p.y);
        let mut vals = Vec::with_capacity(self.dim());
        let mut divs = Vec::with_capacity(self.dim());
        for c in 0..ns {
            vals.push(Vec2::new(mono[c], 0.0));
            divs.push(dx[c]);
        }
        for c in 0..ns {
            vals.push(Vec2::new(0.0, mono[c]));
            divs.push(dy[c]);
        }
        for j in 0..=self.k {
            let h = mono[ns - (self.k + 1) + j];
            vals.push(Vec2::new(p.x * h, p.y * h));
            divs.push((self.k + 2) as f64 * h);
        }
        (vals, divs)
    }

    /// Values and divergences of all basis fields at a reference point.
    pub fn eval_all(&self, p: Vec2) -> (Vec<Vec2>, Vec<f64>) {
        let (sv, sd) = self.spanning_all(p);
        let n = self.dim();
        let mut vals = vec![Vec2::ZERO; n];
        let mut divs = vec![0.0; n];
        for j in 0..n {
            let mut v = Vec2::ZERO;
            let mut d = 0.0;
            for c in 0..n {
                let a = self.coeffs[(c, j)];
                v += a * sv[c];
                d += a * sd[c];
            }
            vals[j] = v;
            divs[j] = d;
        }
        (vals, divs)
    }

    /// Interior test function `w_l` at a reference point.
    pub fn interior_test(&self, l: usize, p: Vec2) -> Vec2 {
        let a = l / 2;
        let mono = monomials(self.k - 1, p.x, p.y);
        let phi: f64 = self.interior_scalar[a].iter().zip(&mono).map(|(c, m)| c * m).sum();
        if l % 2 == 0 {
            Vec2::new(phi, 0.0)
        } else {
            Vec2::new(0.0, phi)
        }
    }

    /// Canonical reference DOFs of an arbitrary field.
    pub fn reference_dofs(&self, field: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let k = self.k;
        let mut out = Vec::with_capacity(self.dim());
        let (sx, sw) = gauss_legendre(k + 8);
        for i in 0..3 {
            let (a, b, n) = reference_edge(i);
            for m in 0..=k {
                let mut acc = 0.0;
                for (s, w) in sx.iter().zip(&sw) {
                    acc += w * field(a + *s * (b - a)).dot(n) * legendre01(m, *s);
                }
                out.push(acc);
            }
        }
        if k > 0 {
            // generous degree: also used on non-polynomial fields
            let rule = triangle_rule((2 * k + 12).min(MAX_TRIANGLE_DEGREE)).expect("degree within table");
            for l in 0..self.n_interior_dofs() {
                let mut acc = 0.0;
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = Vec2::new(p[0], p[1]);
                    acc += w * field(x).dot(self.interior_test(l, x));
                }
                out.push(acc);
            }
        }
        out
    }
}

/// L2(T)-orthonormal basis of `P_d` on the reference triangle, by modified
/// Gram-Schmidt on the monomials.
fn orthonormal_pk(d: usize) -> Vec<Vec<f64>> {
    let rule = triangle_rule(2 * d).expect("degree within table");
    let n = dim_pk(d);
    let tab: Vec<Vec<f64>> = rule.points.iter().map(|p| monomials(d, p[0], p[1])).collect();
    let inner = |u: &[f64], v: &[f64]| -> f64 {
        tab.iter()
            .zip(&rule.weights)
            .map(|(m, w)| {
                let a: f64 = u.iter().zip(m).map(|(c, x)| c * x).sum();
                let b: f64 = v.iter().zip(m).map(|(c, x)| c * x).sum();
                w * a * b
            })
            .sum()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = inner(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
        basis.push(v);
    }
    debug_assert_eq!(monomial_exponents(d).len(), n);
    basis
}

/// Cached reference basis for order `k`.
pub fn rt_basis(k: usize) -> Result<Arc<RtLocalBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<RtLocalBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(&k) {
        return Ok(b.clone());
    }
    let b = Arc::new(RtLocalBasis::build(k)?);
    cache.lock().expect("basis cache poisoned").insert(k, b.clone());
    Ok(b)
}
