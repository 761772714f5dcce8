//! Error norms, convergence tables, interpolation studies, and the residual
//! and stability probes.

use std::fmt::Write as _;

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::{Mat, Side as FaerSide};
use rayon::prelude::*;

use crate::assembly::{MixedSystem, SolutionFields};
use crate::error::{Error, Result};
use crate::fem::quadrature::{gauss_legendre, triangle_rule, MAX_TRIANGLE_DEGREE};
use crate::geometry::{BcTag, Vec2};
use crate::spaces::{interpolate_test, pressure_moments, Discretization, Side};

/// Errors of one discrete solution, integrated over the polygon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub h: f64,
    pub l2_u: f64,
    pub l2_p: f64,
    pub l2_div: f64,
    /// Largest multiplier error at the lattice points.
    pub max_dof_u: f64,
    /// Largest error over the free flux DOFs.
    pub max_dof_p: f64,
}

fn error_rule(k: usize) -> &'static crate::fem::QuadratureRule {
    triangle_rule((2 * k + 6).min(MAX_TRIANGLE_DEGREE)).expect("degree within table")
}

/// Per-triangle `(|e_u|^2, |e_p|^2, |e_div|^2, int e_u)` with
/// `e_u = u - u_h`.
fn element_errors(
    disc: &Discretization,
    flux: &[f64],
    side: Side,
    pressure: Option<&[f64]>,
    exact_u: &(dyn Fn(Vec2) -> f64 + Sync),
    exact_p: &(dyn Fn(Vec2) -> Vec2 + Sync),
    exact_div: &(dyn Fn(Vec2) -> f64 + Sync),
    shift: f64,
) -> Vec<[f64; 4]> {
    let rule = error_rule(disc.k);
    (0..disc.mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = &disc.elements[t];
            let local = disc.local_flux(t, side, flux);
            let mut acc = [0.0; 4];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let xi = Vec2::new(p[0], p[1]);
                let x = el.map.map(xi);
                let wd = w * el.map.det;
                let (q, dq) = disc.eval_flux_ref(t, &local, xi);
                if let Some(u) = pressure {
                    let eu = exact_u(x) - disc.eval_pressure_ref(t, u, xi) - shift;
                    acc[0] += wd * eu * eu;
                    acc[3] += wd * eu;
                }
                let ep = exact_p(x) - q;
                acc[1] += wd * ep.dot(ep);
                let ed = exact_div(x) - dq;
                acc[2] += wd * ed * ed;
            }
            acc
        })
        .collect()
}

/// Errors of `solution` against the exact fields. With `zero_mean_shift`
/// the mean of `u - u_h` over the polygon is removed first.
pub fn compute_errors(
    disc: &Discretization,
    solution: &SolutionFields,
    exact_u: &(dyn Fn(Vec2) -> f64 + Sync),
    exact_p: &(dyn Fn(Vec2) -> Vec2 + Sync),
    exact_div: &(dyn Fn(Vec2) -> f64 + Sync),
    zero_mean_shift: bool,
) -> Result<ErrorReport> {
    let mut shift = 0.0;
    if zero_mean_shift {
        let e = element_errors(disc, &solution.flux, solution.side, Some(&solution.pressure), exact_u, exact_p, exact_div, 0.0);
        shift = e.iter().map(|a| a[3]).sum::<f64>() / disc.mesh.area();
    }
    let e = element_errors(disc, &solution.flux, solution.side, Some(&solution.pressure), exact_u, exact_p, exact_div, shift);
    let sum = |i: usize| e.iter().map(|a| a[i]).sum::<f64>().sqrt();
    let report_nan = |v: f64, what: &str| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NotEvaluable { x: f64::NAN, y: f64::NAN, reason: format!("{what} error is not finite") })
        }
    };

    let mut max_u: f64 = 0.0;
    for t in 0..disc.mesh.n_triangles() {
        for (l, xi) in disc.pressure.nodes.iter().enumerate() {
            let x = disc.elements[t].map.map(*xi);
            let uh = solution.pressure[disc.dofs().pressure_dof(t, l)];
            max_u = max_u.max((exact_u(x) - uh - shift).abs());
        }
    }
    let pi = interpolate_test(disc, exact_p);
    let max_p = pi.iter().zip(&solution.flux).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ErrorReport {
        h: disc.mesh.h(),
        l2_u: report_nan(sum(0), "multiplier")?,
        l2_p: report_nan(sum(1), "flux")?,
        l2_div: report_nan(sum(2), "divergence")?,
        max_dof_u: report_nan(max_u, "multiplier DOF")?,
        max_dof_p: report_nan(max_p, "flux DOF")?,
    })
}

/// `(||m - q_h||, ||div(m - q_h)||)` over the polygon for a flux vector.
pub fn flux_error(
    disc: &Discretization,
    flux: &[f64],
    side: Side,
    exact_p: &(dyn Fn(Vec2) -> Vec2 + Sync),
    exact_div: &(dyn Fn(Vec2) -> f64 + Sync),
) -> (f64, f64) {
    let e = element_errors(disc, flux, side, None, &|_| 0.0, exact_p, exact_div, 0.0);
    (e.iter().map(|a| a[1]).sum::<f64>().sqrt(), e.iter().map(|a| a[2]).sum::<f64>().sqrt())
}

/// Experimental order between two levels; `NaN` unless the error decreases
/// and both errors are above round-off.
pub fn eoc(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    const FLOOR: f64 = 1e-11;
    if !(e_coarse > FLOOR && e_fine > FLOOR && e_fine < e_coarse) {
        return f64::NAN;
    }
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// One row per level: the resolution `L`, the mesh size, and the errors.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<(usize, ErrorReport)>,
}

/// Columns of a [`ConvergenceTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    L2U,
    L2P,
    L2Div,
    MaxU,
    MaxP,
}

impl ConvergenceTable {
    pub fn push(&mut self, level: usize, report: ErrorReport) {
        self.rows.push((level, report));
    }

    pub fn column(&self, c: Column) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(_, r)| match c {
                Column::L2U => r.l2_u,
                Column::L2P => r.l2_p,
                Column::L2Div => r.l2_div,
                Column::MaxU => r.max_dof_u,
                Column::MaxP => r.max_dof_p,
            })
            .collect()
    }

    /// Orders between consecutive rows. A column that is not decreasing at
    /// some step gets `NaN` there, with a warning.
    pub fn eoc(&self, c: Column) -> Vec<f64> {
        let e = self.column(c);
        (1..self.rows.len())
            .map(|i| {
                let o = eoc(e[i - 1], e[i], self.rows[i - 1].1.h, self.rows[i].1.h);
                if o.is_nan() && e[i - 1] > 1e-11 {
                    log::warn!("{c:?} error does not decrease between rows {} and {}", i - 1, i);
                }
                o
            })
            .collect()
    }

    fn order_cell(v: Option<f64>) -> String {
        match v {
            Some(o) if o.is_finite() => format!("{o:.3}"),
            Some(_) => "NaN".into(),
            None => String::new(),
        }
    }

    /// `level,h,l2_u,l2_p,l2_div,max_u,max_p,eoc_u,eoc_p,eoc_div`; the first
    /// row leaves the order columns empty.
    pub fn to_csv(&self) -> String {
        let (ou, op, od) = (self.eoc(Column::L2U), self.eoc(Column::L2P), self.eoc(Column::L2Div));
        let mut s = String::from("level,h,l2_u,l2_p,l2_div,max_u,max_p,eoc_u,eoc_p,eoc_div\n");
        for (i, (l, r)) in self.rows.iter().enumerate() {
            let o = |v: &Vec<f64>| Self::order_cell(i.checked_sub(1).map(|j| v[j]));
            let _ = writeln!(
                s,
                "{l},{:.6e},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e},{},{},{}",
                r.h,
                r.l2_u,
                r.l2_p,
                r.l2_div,
                r.max_dof_u,
                r.max_dof_p,
                o(&ou),
                o(&op),
                o(&od)
            );
        }
        s
    }

    /// Markdown table with one column per level, one row per error measure.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| h |");
        for (l, _) in &self.rows {
            let _ = write!(s, " 1/{l} |");
        }
        s.push_str("\n|---|");
        for _ in &self.rows {
            s.push_str("---|");
        }
        s.push('\n');
        let rows = [
            ("‖u_h − u‖_{0,h}", Column::L2U),
            ("‖p_h − p‖_{0,h}", Column::L2P),
            ("‖∇·(p_h − p)‖_{0,h}", Column::L2Div),
            ("|u_h − u|_{0,∞,h}", Column::MaxU),
            ("|p_h − p|_{0,∞,h}", Column::MaxP),
        ];
        for (label, c) in rows {
            let _ = write!(s, "| {label} |");
            for v in self.column(c) {
                let _ = write!(s, " {} |", fortran_e(v));
            }
            s.push('\n');
        }
        for (label, c) in [("EOC u", Column::L2U), ("EOC p", Column::L2P), ("EOC div p", Column::L2Div)] {
            let _ = write!(s, "| {label} | |");
            for o in self.eoc(c) {
                let _ = write!(s, " {} |", Self::order_cell(Some(o)));
            }
            s.push('\n');
        }
        s
    }
}

/// `0.28440E-2` style: five significant digits, mantissa in `[0.1, 1)`.
pub fn fortran_e(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.5}");
    }
    let exp = v.abs().log10().floor() as i32 + 1;
    let mut mant = v / 10f64.powi(exp);
    let mut exp = exp;
    if (mant.abs() * 1e5).round() >= 1e5 {
        mant /= 10.0;
        exp += 1;
    }
    format!("{mant:.5}E{exp}")
}

/// `[|m - Pi m|]_h`: H(div) error of the test (`Side::Test`) or trial
/// interpolant of `field`.
pub fn interpolation_error(
    disc: &Discretization,
    field: &(dyn Fn(Vec2) -> Vec2 + Sync),
    div_field: &(dyn Fn(Vec2) -> f64 + Sync),
    side: Side,
) -> f64 {
    let c = interpolate_test(disc, field);
    let (e, d) = flux_error(disc, &c, side, field, div_field);
    (e * e + d * d).sqrt()
}

/// Interpolation errors over a family of discretizations; the table stores
/// the H(div) error in the `l2_p` column.
pub fn interpolation_study(
    family: &[(usize, Discretization)],
    field: &(dyn Fn(Vec2) -> Vec2 + Sync),
    div_field: &(dyn Fn(Vec2) -> f64 + Sync),
    which: Side,
) -> ConvergenceTable {
    let mut table = ConvergenceTable::default();
    for (l, disc) in family {
        let e = interpolation_error(disc, field, div_field, which);
        table.push(*l, ErrorReport { h: 1.0 / *l as f64, l2_p: e, ..Default::default() });
    }
    table
}

/// Sparse H(div) Gram matrix of the test flux space.
fn test_hdiv_gram(disc: &Discretization) -> Vec<(usize, usize, f64)> {
    let rule = triangle_rule(2 * disc.k + 2).expect("degree within table");
    let blocks: Vec<Vec<(usize, usize, f64)>> = (0..disc.mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let el = &disc.elements[t];
            let slots = &disc.dofs().local[t];
            let n = el.dim();
            let mut g = vec![0.0; n * n];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (v, d) = el.eval_ref(Vec2::new(p[0], p[1]));
                for a in 0..n {
                    for b in 0..n {
                        g[a * n + b] += w * el.map.det * (v[a].dot(v[b]) + d[a] * d[b]);
                    }
                }
            }
            let mut out = Vec::new();
            for (a, sa) in slots.iter().enumerate() {
                let Some((ga, za)) = *sa else { continue };
                for (b, sb) in slots.iter().enumerate() {
                    let Some((gb, zb)) = *sb else { continue };
                    out.push((ga, gb, za * zb * g[a * n + b]));
                }
            }
            out
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

/// `sup |(u, q.n_h)_{Gamma_0,h}|` over test fluxes of unit H(div) norm,
/// computed as `sqrt(g^T G^-1 g)`.
pub fn dirichlet_residual(disc: &Discretization, exact_u: &(dyn Fn(Vec2) -> f64 + Sync)) -> Result<f64> {
    let dofs = disc.dofs();
    let mut g = vec![0.0; dofs.n_flux];
    let (x, w) = gauss_legendre(disc.k + 8);
    for b in disc.classification.entries.iter().filter(|b| b.tag == BcTag::Gamma0) {
        let t = b.triangle;
        let el = &disc.elements[t];
        let (pa, pb) = el.edge(b.local_edge);
        let n = el.edge_normal(b.local_edge);
        let len = pa.dist(pb);
        for (s, wt) in x.iter().zip(&w) {
            let pt = pa + *s * (pb - pa);
            let vals = el.eval_all(pt).0;
            let u = exact_u(pt);
            for (j, slot) in dofs.local[t].iter().enumerate() {
                if let Some((gj, sg)) = *slot {
                    g[gj] += wt * len * u * sg * vals[j].dot(n);
                }
            }
        }
    }
    if g.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let trip: Vec<Triplet<usize, usize, f64>> =
        test_hdiv_gram(disc).into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let n = dofs.n_flux;
    let gram = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
    let chol = gram.sp_cholesky(FaerSide::Lower).map_err(|_| Error::GramNotPositive)?;
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| g[i]);
    let y = chol.solve(&rhs);
    let val: f64 = (0..n).map(|i| g[i] * y[(i, 0)]).sum();
    Ok(val.max(0.0).sqrt())
}

/// Dense product Gram matrix `(H(div) on the flux, L2 on the multiplier)`
/// for one side, permuted like the system unknowns.
fn product_gram(disc: &Discretization, side: Side) -> Mat<f64> {
    let dofs = disc.dofs();
    let nf = dofs.n_flux;
    let n = nf + dofs.n_pressure;
    let mut g = Mat::<f64>::zeros(n, n);
    let rule = triangle_rule(2 * disc.k + 2).expect("degree within table");
    for t in 0..disc.mesh.n_triangles() {
        let el = &disc.elements[t];
        let x = disc.local_expansion(t, side);
        let slots = &dofs.local[t];
        let nl = el.dim();
        let np = disc.pressure.dim();
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = Vec2::new(p[0], p[1]);
            let (v, d) = el.eval_ref(xi);
            let wd = w * el.map.det;
            // fields of the local slots of this side
            let mut fv = vec![Vec2::ZERO; nl];
            let mut fd = vec![0.0; nl];
            for j in 0..nl {
                for r in 0..nl {
                    let c = x[(r, j)];
                    if c != 0.0 {
                        fv[j] += c * v[r];
                        fd[j] += c * d[r];
                    }
                }
            }
            for (a, sa) in slots.iter().enumerate() {
                let Some((ga, za)) = *sa else { continue };
                for (b, sb) in slots.iter().enumerate() {
                    let Some((gb, zb)) = *sb else { continue };
                    g[(ga, gb)] += wd * za * zb * (fv[a].dot(fv[b]) + fd[a] * fd[b]);
                }
            }
            let psi = disc.pressure.eval_all(xi);
            for a in 0..np {
                for b in 0..np {
                    g[(nf + dofs.pressure_dof(t, a), nf + dofs.pressure_dof(t, b))] += wd * psi[a] * psi[b];
                }
            }
        }
    }
    g
}

/// Smallest singular value of `C` measured in the product norms: with
/// `G = L L^T`, `sigma_min(L_test^-1 C L_trial^-T)`. In zero-mean mode both
/// sides are restricted to multipliers with vanishing mean.
pub fn infsup_constant(disc: &Discretization, system: &MixedSystem) -> Result<f64> {
    let nf = system.n_flux;
    let n = nf + system.n_pressure;
    let full = system.to_dense();
    let c = Mat::<f64>::from_fn(n, n, |i, j| full[(i, j)]);
    let g_trial = product_gram(disc, system_side(system));
    let g_test = product_gram(disc, Side::Test);
    // basis of the admissible subspace
    let z = if system.mean_constraint.is_some() {
        let m = pressure_moments(disc);
        mean_free_basis(nf, &m)
    } else {
        Mat::<f64>::identity(n, n)
    };
    let c = z.transpose() * &c * &z;
    let g_trial = z.transpose() * &g_trial * &z;
    let g_test = z.transpose() * &g_test * &z;
    let l_r = g_trial.llt(FaerSide::Lower).map_err(|_| Error::GramNotPositive)?;
    let l_t = g_test.llt(FaerSide::Lower).map_err(|_| Error::GramNotPositive)?;
    let lr = l_r.L().to_owned();
    let lt = l_t.L().to_owned();
    let lr_inv = lower_inverse(&lr);
    let lt_inv = lower_inverse(&lt);
    let k = &lt_inv * &c * lr_inv.transpose();
    let sv = k.singular_values().map_err(|e| Error::SingularSystem(format!("SVD failed: {e:?}")))?;
    Ok(sv.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn system_side(system: &MixedSystem) -> Side {
    match system.formulation {
        crate::assembly::Formulation::PetrovGalerkin => Side::Trial,
        crate::assembly::Formulation::Classical => Side::Test,
    }
}

fn lower_inverse(l: &Mat<f64>) -> Mat<f64> {
    let n = l.nrows();
    let mut inv = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Columns spanning `{x : m . x_pressure = 0}`: all flux unknowns, and the
/// pressure differences against the unknown with the largest weight.
fn mean_free_basis(nf: usize, m: &[f64]) -> Mat<f64> {
    let np = m.len();
    let pivot = (0..np).max_by(|&a, &b| m[a].abs().total_cmp(&m[b].abs())).unwrap_or(0);
    let n = nf + np;
    let mut z = Mat::<f64>::zeros(n, n - 1);
    for i in 0..nf {
        z[(i, i)] = 1.0;
    }
    let mut col = nf;
    for l in 0..np {
        if l == pivot {
            continue;
        }
        z[(nf + l, col)] = 1.0;
        z[(nf + pivot, col)] = -m[l] / m[pivot];
        col += 1;
    }
    z
}
