//! Assembly and direct solution of the mixed system
//!
//! ```text
//! [ A  B ] [p]   [0]
//! [ D  0 ] [u] = [F]
//! ```
//!
//! with rows indexed by test functions and columns by trial functions:
//! `A_ij = (p_j, q_i)`, `B_il = (u_l, div q_i)`, `D_lj = -(div p_j, v_l)` and
//! `F_l = (f, v_l)`. Without a Dirichlet boundary the system is bordered by
//! the constraint `int u_h = 0` and its multiplier.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::polynomial::invert;
use crate::fem::quadrature::{triangle_rule, MAX_TRIANGLE_DEGREE};
use crate::geometry::Vec2;
use crate::spaces::{pressure_moments, Discretization, Side};

/// How the load functional is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsMode {
    /// `(f, v)` by quadrature of the supplied (extended) `f`.
    ExactQuadrature,
    /// `(f_h, v)` with `f_h` the P_k interpolate of `f` on the lattice of the
    /// triangle shrunk about its centroid by `chi`; `f` is only sampled
    /// inside the true domain.
    Fh { chi: f64 },
}

impl RhsMode {
    pub const DEFAULT_CHI: f64 = 0.75;
}

/// Trial space on the flux side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    PetrovGalerkin,
    /// Test space on both sides: the classical symmetric RT method.
    Classical,
}

impl Formulation {
    fn trial_side(self) -> Side {
        match self {
            Formulation::PetrovGalerkin => Side::Trial,
            Formulation::Classical => Side::Test,
        }
    }
}

pub type Triplets = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub n_flux: usize,
    pub n_pressure: usize,
    pub formulation: Formulation,
    /// Flux rows x flux columns.
    pub a: Triplets,
    /// Flux rows x pressure columns.
    pub b: Triplets,
    /// Pressure rows x flux columns.
    pub d: Triplets,
    pub rhs_flux: Vec<f64>,
    pub rhs_pressure: Vec<f64>,
    /// `int psi_l` when the zero-mean constraint is active.
    pub mean_constraint: Option<Vec<f64>>,
}

fn merge(mut t: Triplets) -> Triplets {
    t.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut out: Triplets = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

impl MixedSystem {
    pub fn dim(&self) -> usize {
        self.n_flux + self.n_pressure + usize::from(self.mean_constraint.is_some())
    }

    /// All entries of the square system matrix.
    pub fn triplets(&self) -> Triplets {
        let nf = self.n_flux;
        let mut t = Vec::with_capacity(self.a.len() + self.b.len() + self.d.len() + 2 * self.n_pressure);
        t.extend(self.a.iter().copied());
        t.extend(self.b.iter().map(|&(r, c, v)| (r, c + nf, v)));
        t.extend(self.d.iter().map(|&(r, c, v)| (r + nf, c, v)));
        if let Some(m) = &self.mean_constraint {
            let last = self.dim() - 1;
            for (l, &v) in m.iter().enumerate() {
                t.push((nf + l, last, v));
                t.push((last, nf + l, v));
            }
        }
        t
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_flux.clone();
        r.extend_from_slice(&self.rhs_pressure);
        if self.mean_constraint.is_some() {
            r.push(0.0);
        }
        r
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// `M x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (r, c, v) in self.triplets() {
            y[r] += v * x[c];
        }
        y
    }
}

struct ElementBlocks {
    a: Triplets,
    b: Triplets,
    d: Triplets,
    load: Vec<(usize, f64)>,
}

/// Load vector contributions of triangle `t` in its local pressure basis.
fn element_load(
    disc: &Discretization,
    t: usize,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    rhs_mode: RhsMode,
    pmass: &Mat<f64>,
) -> Result<Vec<f64>> {
    let el = &disc.elements[t];
    let np = disc.pressure.dim();
    match rhs_mode {
        RhsMode::ExactQuadrature => {
            let rule = triangle_rule((2 * disc.k + 6).min(MAX_TRIANGLE_DEGREE))?;
            let mut out = vec![0.0; np];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let xi = Vec2::new(p[0], p[1]);
                let fv = f(el.map.map(xi));
                for (l, b) in disc.pressure.eval_all(xi).iter().enumerate() {
                    out[l] += w * el.map.det * fv * b;
                }
            }
            Ok(out)
        }
        RhsMode::Fh { chi } => {
            let c = Vec2::new(1.0 / 3.0, 1.0 / 3.0);
            let pts: Vec<Vec2> = disc.pressure.nodes.iter().map(|&n| c + chi * (n - c)).collect();
            let mut v = Mat::<f64>::zeros(np, np);
            let mut vals = Vec::with_capacity(np);
            for (i, &xi) in pts.iter().enumerate() {
                let x = el.map.map(xi);
                if !disc.domain.contains(x) {
                    return Err(Error::NotEvaluable {
                        x: x.x,
                        y: x.y,
                        reason: "shrunken lattice point outside the domain".into(),
                    });
                }
                vals.push(f(x));
                for (l, b) in disc.pressure.eval_all(xi).into_iter().enumerate() {
                    v[(i, l)] = b;
                }
            }
            let vi = invert(&v, 1e-9).ok_or(Error::SingularBasis { k: disc.k })?;
            let coef: Vec<f64> = (0..np).map(|l| (0..np).map(|i| vi[(l, i)] * vals[i]).sum()).collect();
            Ok((0..np).map(|l| (0..np).map(|j| pmass[(l, j)] * coef[j]).sum::<f64>() * el.map.det).collect())
        }
    }
}

fn element_blocks(
    disc: &Discretization,
    t: usize,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    rhs_mode: RhsMode,
    formulation: Formulation,
    pmass: &Mat<f64>,
) -> Result<ElementBlocks> {
    let el = &disc.elements[t];
    let n = el.dim();
    let np = disc.pressure.dim();
    let dofs = disc.dofs();
    let rule = triangle_rule(2 * disc.k + 2)?;
    let mut mass = Mat::<f64>::zeros(n, n);
    let mut dc = Mat::<f64>::zeros(np, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let xi = Vec2::new(p[0], p[1]);
        let (v, d) = el.eval_ref(xi);
        let psi = disc.pressure.eval_all(xi);
        let wd = w * el.map.det;
        for a in 0..n {
            for b in a..n {
                mass[(a, b)] += wd * v[a].dot(v[b]);
            }
            for l in 0..np {
                dc[(l, a)] += wd * psi[l] * d[a];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            mass[(a, b)] = mass[(b, a)];
        }
    }
    let x_test = disc.local_expansion(t, Side::Test);
    let x_trial = disc.local_expansion(t, formulation.trial_side());
    let a_loc = x_test.transpose() * &mass * &x_trial;
    let b_loc = x_test.transpose() * dc.transpose();
    let d_loc = &dc * &x_trial;

    let slots = &dofs.local[t];
    let mut out = ElementBlocks { a: Vec::new(), b: Vec::new(), d: Vec::new(), load: Vec::new() };
    for (i, si) in slots.iter().enumerate() {
        let Some((gi, sgi)) = *si else { continue };
        for (j, sj) in slots.iter().enumerate() {
            let Some((gj, sgj)) = *sj else { continue };
            let v = a_loc[(i, j)];
            if v != 0.0 {
                out.a.push((gi, gj, sgi * sgj * v));
            }
        }
        for l in 0..np {
            let v = b_loc[(i, l)];
            if v != 0.0 {
                out.b.push((gi, dofs.pressure_dof(t, l), sgi * v));
            }
        }
    }
    for l in 0..np {
        for (j, sj) in slots.iter().enumerate() {
            let Some((gj, sgj)) = *sj else { continue };
            let v = d_loc[(l, j)];
            if v != 0.0 {
                out.d.push((dofs.pressure_dof(t, l), gj, -sgj * v));
            }
        }
    }
    let load = element_load(disc, t, f, rhs_mode, pmass)?;
    out.load = load.into_iter().enumerate().map(|(l, v)| (dofs.pressure_dof(t, l), v)).collect();
    Ok(out)
}

fn reference_pressure_mass(disc: &Discretization) -> Result<Mat<f64>> {
    let np = disc.pressure.dim();
    let rule = triangle_rule(2 * disc.k)?;
    let mut m = Mat::<f64>::zeros(np, np);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = disc.pressure.eval_all(Vec2::new(p[0], p[1]));
        for i in 0..np {
            for j in 0..np {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    Ok(m)
}

/// Assembles the mixed system. Element matrices are computed in parallel and
/// scattered in element order, so the result is bit-identical across runs.
pub fn assemble(
    disc: &Discretization,
    f: &(dyn Fn(Vec2) -> f64 + Sync),
    rhs_mode: RhsMode,
    formulation: Formulation,
) -> Result<MixedSystem> {
    let pmass = reference_pressure_mass(disc)?;
    let blocks: Vec<ElementBlocks> = (0..disc.mesh.n_triangles())
        .into_par_iter()
        .map(|t| element_blocks(disc, t, f, rhs_mode, formulation, &pmass))
        .collect::<Result<_>>()?;
    let dofs = disc.dofs();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut d = Vec::new();
    let mut rhs_pressure = vec![0.0; dofs.n_pressure];
    for blk in blocks {
        a.extend(blk.a);
        b.extend(blk.b);
        d.extend(blk.d);
        for (l, v) in blk.load {
            rhs_pressure[l] += v;
        }
    }
    Ok(MixedSystem {
        n_flux: dofs.n_flux,
        n_pressure: dofs.n_pressure,
        formulation,
        a: merge(a),
        b: merge(b),
        d: merge(d),
        rhs_flux: vec![0.0; dofs.n_flux],
        rhs_pressure,
        mean_constraint: dofs.zero_mean.then(|| pressure_moments(disc)),
    })
}

#[derive(Debug, Clone)]
pub struct SolutionFields {
    /// Global flux coefficients (trial space for Petrov-Galerkin solves).
    pub flux: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: Option<f64>,
    pub residual_norm: f64,
    pub side: Side,
}

/// Direct sparse LU solve with a residual check.
pub fn solve(system: &MixedSystem) -> Result<SolutionFields> {
    let n = system.dim();
    let trip: Vec<Triplet<usize, usize, f64>> =
        system.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;
    let rhs = system.rhs();
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let ax = system.apply(&x);
    let residual = ax.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !residual.is_finite() || residual > 1e-9 * (1.0 + rhs_norm) {
        return Err(Error::SingularSystem(format!("residual {residual:.3e} after LU solve (rhs norm {rhs_norm:.3e})")));
    }
    let nf = system.n_flux;
    let np = system.n_pressure;
    Ok(SolutionFields {
        flux: x[..nf].to_vec(),
        pressure: x[nf..nf + np].to_vec(),
        multiplier: system.mean_constraint.as_ref().map(|_| x[n - 1]),
        residual_norm: residual,
        side: system.formulation.trial_side(),
    })
}

/// Classical symmetric solve for a boundary that is entirely Dirichlet.
pub fn solve_pure_dirichlet(disc: &Discretization, f: &(dyn Fn(Vec2) -> f64 + Sync)) -> Result<SolutionFields> {
    if !disc.dofs().constrained_edges.is_empty() {
        return Err(Error::Config("pure Dirichlet solve needs every boundary arc tagged gamma0".into()));
    }
    solve(&assemble(disc, f, RhsMode::ExactQuadrature, Formulation::Classical)?)
}

/// Flux value and multiplier value at reference point `xi` of `element`.
pub fn evaluate(disc: &Discretization, fields: &SolutionFields, element: usize, xi: Vec2) -> Result<(Vec2, f64)> {
    if element >= disc.mesh.n_triangles() {
        return Err(Error::ElementOutOfRange(element));
    }
    let local = disc.local_flux(element, fields.side, &fields.flux);
    let (p, _) = disc.eval_flux_ref(element, &local, xi);
    Ok((p, disc.eval_pressure_ref(element, &fields.pressure, xi)))
}

/// CSV dump `entity,index,moment,value` of every coefficient.
pub fn solution_csv(disc: &Discretization, fields: &SolutionFields) -> String {
    let dofs = disc.dofs();
    let mut s = String::from("entity,index,moment,value\n");
    for (e, start) in dofs.edge_dofs.iter().enumerate() {
        if let Some(g) = start {
            for m in 0..=dofs.k {
                s.push_str(&format!("edge,{e},{m},{:.15e}\n", fields.flux[g + m]));
            }
        }
    }
    let ni = dofs.k * (dofs.k + 1);
    for (t, &g) in dofs.interior_dofs.iter().enumerate() {
        for l in 0..ni {
            s.push_str(&format!("interior,{t},{l},{:.15e}\n", fields.flux[g + l]));
        }
    }
    for t in 0..disc.mesh.n_triangles() {
        for l in 0..dofs.pressure_local {
            s.push_str(&format!("pressure,{t},{l},{:.15e}\n", fields.pressure[dofs.pressure_dof(t, l)]));
        }
    }
    if let Some(m) = fields.multiplier {
        s.push_str(&format!("multiplier,0,0,{m:.15e}\n"));
    }
    s
}
