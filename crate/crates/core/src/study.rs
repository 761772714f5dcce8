//! Family runners shared by the command-line tool and the test suites.

use std::fmt::Write as _;

use crate::analysis::{compute_errors, dirichlet_residual, infsup_constant, ConvergenceTable, ErrorReport};
use crate::assembly::{assemble, solve, Formulation, RhsMode, SolutionFields};
use crate::cases::{Case, ExactSolution};
use crate::error::Result;
use crate::fem::quadrature::{triangle_rule, MAX_TRIANGLE_DEGREE};
use crate::geometry::{max_gap_and_normal_deviation, Vec2};
use crate::spaces::{project_l2, Discretization};

/// Solve on `disc` with the source of `exact` and measure the errors.
pub fn solve_and_measure(
    disc: &Discretization,
    exact: ExactSolution,
    rhs_mode: RhsMode,
    formulation: Formulation,
) -> Result<(SolutionFields, ErrorReport)> {
    let system = assemble(disc, &|x| exact.f(x), rhs_mode, formulation)?;
    let sol = solve(&system)?;
    let report = compute_errors(disc, &sol, &exact.u, &exact.p, &exact.div_p, disc.dofs().zero_mean)?;
    Ok((sol, report))
}

/// Nominal mesh size `1/L` used for orders.
pub fn nominal_h(l: usize) -> f64 {
    1.0 / l as f64
}

/// One solve per resolution `L` in `levels`; rows carry the nominal `h`.
pub fn run_convergence(
    case: Case,
    k: usize,
    levels: &[usize],
    rhs_mode: RhsMode,
    formulation: Formulation,
) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::default();
    for &l in levels {
        let disc = case.discretization(l, k)?;
        let (_, mut report) = solve_and_measure(&disc, case.exact(), rhs_mode, formulation)?;
        report.h = nominal_h(l);
        log::info!("{case} k={k} L={l}: l2_u={:.4e} l2_p={:.4e}", report.l2_u, report.l2_p);
        table.push(l, report);
    }
    Ok(table)
}

/// `max_T ||div p_h + pi_h f||_{0,T}` with `pi_h` the elementwise L2
/// projection onto P_k.
pub fn load_identity_defect(disc: &Discretization, sol: &SolutionFields, f: &(dyn Fn(Vec2) -> f64 + Sync)) -> f64 {
    let pf = project_l2(disc, f);
    let rule = triangle_rule((2 * disc.k + 2).min(MAX_TRIANGLE_DEGREE)).expect("degree within table");
    let mut worst: f64 = 0.0;
    for t in 0..disc.mesh.n_triangles() {
        let el = &disc.elements[t];
        let local = disc.local_flux(t, sol.side, &sol.flux);
        let mut acc = 0.0;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = Vec2::new(p[0], p[1]);
            let (_, d) = disc.eval_flux_ref(t, &local, xi);
            let r = d + disc.eval_pressure_ref(t, &pf, xi);
            acc += w * el.map.det * r * r;
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

/// Boundary-approximation measurements of one mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryRow {
    pub level: usize,
    pub h: f64,
    pub max_gap: f64,
    pub max_normal_deviation: f64,
    /// `max_T ||E_T - I||_inf` over the modified elements.
    pub max_perturbation: f64,
    pub max_cond: f64,
}

pub fn geometry_rates(case: Case, k: usize, levels: &[usize]) -> Result<Vec<GeometryRow>> {
    levels
        .iter()
        .map(|&l| {
            let disc = case.discretization(l, k)?;
            let (gap, dev) = max_gap_and_normal_deviation(&disc.mesh, &disc.domain)?;
            let mods = disc.trial.modified.iter().flatten();
            let (pert, cond) = mods.fold((0.0f64, 0.0f64), |(p, c), m| {
                (p.max(m.perturbation_norm()), c.max(m.cond_estimate))
            });
            Ok(GeometryRow {
                level: l,
                h: nominal_h(l),
                max_gap: gap,
                max_normal_deviation: dev,
                max_perturbation: pert,
                max_cond: cond,
            })
        })
        .collect()
}

/// `(L, h, value)` rows of a scalar probe.
pub type ProbeRows = Vec<(usize, f64, f64)>;

/// Discrete inf-sup constant of the Petrov-Galerkin system per level.
pub fn infsup_family(case: Case, k: usize, levels: &[usize]) -> Result<ProbeRows> {
    levels
        .iter()
        .map(|&l| {
            let disc = case.discretization(l, k)?;
            let ex = case.exact();
            let system = assemble(&disc, &|x| ex.f(x), RhsMode::ExactQuadrature, Formulation::PetrovGalerkin)?;
            Ok((l, nominal_h(l), infsup_constant(&disc, &system)?))
        })
        .collect()
}

/// Dirichlet consistency residual of the exact solution per level.
pub fn residual_family(case: Case, k: usize, levels: &[usize]) -> Result<ProbeRows> {
    levels
        .iter()
        .map(|&l| {
            let disc = case.discretization(l, k)?;
            Ok((l, nominal_h(l), dirichlet_residual(&disc, &case.exact().u)?))
        })
        .collect()
}

pub fn probe_csv(name: &str, rows: &ProbeRows) -> String {
    let mut s = format!("level,h,{name}\n");
    for (l, h, v) in rows {
        let _ = writeln!(s, "{l},{h:.6e},{v:.6e}");
    }
    s
}

pub fn geometry_csv(rows: &[GeometryRow]) -> String {
    let mut s = String::from("level,h,max_gap,max_normal_deviation,max_e_tilde_perturbation,max_cond\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.level, r.h, r.max_gap, r.max_normal_deviation, r.max_perturbation, r.max_cond
        );
    }
    s
}

/// `2^a ..= 2^b`.
pub fn dyadic_levels(a: u32, b: u32) -> Vec<usize> {
    (a..=b).map(|m| 1usize << m).collect()
}
