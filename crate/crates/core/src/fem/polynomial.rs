//! Monomial and Legendre helpers on the reference triangle.

use faer::prelude::*;
use faer::Mat;

/// Exponents `(a, b)` of the monomials `x^a y^b` with `a + b <= degree`,
/// ordered by total degree, then by increasing power of `y`.
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for d in 0..=degree {
        for j in 0..=d {
            v.push((d - j, j));
        }
    }
    v
}

/// `dim P_k` in two variables.
pub fn dim_pk(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    let mut v = 1.0;
    for _ in 0..=n {
        p.push(v);
        v *= x;
    }
    p
}

/// Values of all monomials of degree `<= degree` at `(x, y)`.
pub fn monomials(degree: usize, x: f64, y: f64) -> Vec<f64> {
    let px = powers(x, degree);
    let py = powers(y, degree);
    monomial_exponents(degree).into_iter().map(|(a, b)| px[a] * py[b]).collect()
}

/// Values and first partial derivatives of the monomials of degree `<= degree`.
pub fn monomials_with_gradient(degree: usize, x: f64, y: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let px = powers(x, degree);
    let py = powers(y, degree);
    let ex = monomial_exponents(degree);
    let mut v = Vec::with_capacity(ex.len());
    let mut dx = Vec::with_capacity(ex.len());
    let mut dy = Vec::with_capacity(ex.len());
    for (a, b) in ex {
        v.push(px[a] * py[b]);
        dx.push(if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 });
        dy.push(if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 });
    }
    (v, dx, dy)
}

/// Legendre polynomial of degree `m` shifted to `[0, 1]`.
pub fn legendre01(m: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut p0 = 1.0;
    if m == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Inverse of a small dense matrix, or `None` when `A A^-1` is not the
/// identity to `tol`.
pub fn invert(a: &Mat<f64>, tol: f64) -> Option<Mat<f64>> {
    let n = a.nrows();
    let inv = a.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    let prod = a * &inv;
    for i in 0..n {
        for j in 0..n {
            let e = prod[(i, j)] - if i == j { 1.0 } else { 0.0 };
            if !e.is_finite() || e.abs() > tol {
                return None;
            }
        }
    }
    Some(inv)
}
