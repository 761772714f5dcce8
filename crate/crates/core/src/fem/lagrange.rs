//! Discontinuous P_k multiplier basis: Lagrange functions on the principal
//! lattice of the reference triangle (the centroid for `k = 0`).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::Mat;

use super::polynomial::{dim_pk, invert, monomials};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

#[derive(Debug)]
pub struct PressureBasis {
    pub k: usize,
    pub nodes: Vec<Vec2>,
    coeffs: Mat<f64>,
}

impl PressureBasis {
    fn build(k: usize) -> Result<Self> {
        let nodes = lattice(k);
        let n = dim_pk(k);
        let mut v = Mat::<f64>::zeros(n, n);
        for (i, p) in nodes.iter().enumerate() {
            for (c, m) in monomials(k, p.x, p.y).into_iter().enumerate() {
                v[(i, c)] = m;
            }
        }
        let coeffs = invert(&v, 1e-9).ok_or(Error::SingularBasis { k })?;
        Ok(PressureBasis { k, nodes, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Values of all basis functions at reference point `xi`.
    pub fn eval_all(&self, xi: Vec2) -> Vec<f64> {
        let mono = monomials(self.k, xi.x, xi.y);
        (0..self.dim())
            .map(|j| mono.iter().enumerate().map(|(c, m)| m * self.coeffs[(c, j)]).sum())
            .collect()
    }
}

/// Principal lattice `(i/k, j/k)`, `i + j <= k`, ordered by `j` then `i`.
pub fn lattice(k: usize) -> Vec<Vec2> {
    if k == 0 {
        return vec![Vec2::new(1.0 / 3.0, 1.0 / 3.0)];
    }
    let mut v = Vec::with_capacity(dim_pk(k));
    for j in 0..=k {
        for i in 0..=k - j {
            v.push(Vec2::new(i as f64 / k as f64, j as f64 / k as f64));
        }
    }
    v
}

pub fn pressure_basis(k: usize) -> Result<Arc<PressureBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PressureBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(&k) {
        return Ok(b.clone());
    }
    let b = Arc::new(PressureBasis::build(k)?);
    cache.lock().expect("basis cache poisoned").insert(k, b.clone());
    Ok(b)
}
