//! `curvedrt`: meshes, solves, convergence tables and probes.

mod config;

use std::fs;
use std::process::ExitCode;

use clap::Parser;
use curved_rt::analysis::{interpolation_study, Column};
use curved_rt::assembly::{assemble, solution_csv, solve};
use curved_rt::geometry::{BcTag, DomainBoundary, Vec2};
use curved_rt::mesh::{read_mesh, write_mesh, Mesh};
use curved_rt::spaces::Discretization;
use curved_rt::study::{geometry_csv, geometry_rates, infsup_family, probe_csv, residual_family, run_convergence};
use curved_rt::{Error, Result};

use config::{BcChoice, Command, CommandKind, Format, MeshSource, RunConfig, Source};

#[derive(Debug, Parser)]
#[command(name = "curvedrt", version, about = "Petrov-Galerkin Raviart-Thomas solver on curved domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_GEOMETRY: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::UnsupportedDegree(_) => EXIT_CONFIG,
        Error::InvalidGeometry(_)
        | Error::NoIntersection { .. }
        | Error::NonConvergence { .. }
        | Error::InvalidMesh(_)
        | Error::ThreeBoundaryVertices { .. }
        | Error::DegenerateTriangle { .. }
        | Error::IllConditioned { .. }
        | Error::MissingModifiedElement(_)
        | Error::NotEvaluable { .. } => EXIT_GEOMETRY,
        Error::SingularBasis { .. }
        | Error::SingularSystem(_)
        | Error::GramNotPositive
        | Error::ElementOutOfRange(_) => EXIT_SOLVER,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CURVEDRT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("CURVEDRT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn retag(mesh: &mut Mesh, domain: &mut DomainBoundary, tag: BcTag) -> Result<()> {
    let mut arcs = domain.arcs.clone();
    for a in &mut arcs {
        a.tag = tag;
    }
    *domain = DomainBoundary::new(arcs)?;
    let mut records = mesh.boundary_edges.clone();
    for r in &mut records {
        r.tag = tag;
    }
    mesh.set_boundary_edges(records)
}

fn load_mesh(cfg: &RunConfig) -> Result<(Mesh, DomainBoundary)> {
    match cfg.mesh.as_ref().expect("single-mesh command") {
        MeshSource::Case { case, l } => case.mesh(*l),
        MeshSource::File { mesh, domain } => {
            let (mut m, mut d) = read_mesh(&fs::read_to_string(mesh)?)?;
            if let Some(path) = domain {
                d = DomainBoundary::parse(&fs::read_to_string(path)?)?;
                m.attach_boundary(&d)?;
            }
            Ok((m, d))
        }
    }
}

fn cmd_mesh_gen(cfg: &RunConfig) -> Result<()> {
    let (mut mesh, mut domain) = load_mesh(cfg)?;
    match cfg.bc {
        BcChoice::NeumannAll => retag(&mut mesh, &mut domain, BcTag::Gamma1)?,
        BcChoice::DirichletAll => retag(&mut mesh, &mut domain, BcTag::Gamma0)?,
        BcChoice::File => {}
    }
    log::info!("{} vertices, {} triangles", mesh.vertices.len(), mesh.n_triangles());
    emit(cfg, &write_mesh(&mesh, &domain))
}

fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let (mut mesh, mut domain) = load_mesh(cfg)?;
    match cfg.bc {
        BcChoice::NeumannAll => retag(&mut mesh, &mut domain, BcTag::Gamma1)?,
        BcChoice::DirichletAll => retag(&mut mesh, &mut domain, BcTag::Gamma0)?,
        BcChoice::File => {}
    }
    let disc = Discretization::new(mesh, domain, cfg.k)?;
    let f: Box<dyn Fn(Vec2) -> f64 + Sync> = match cfg.source {
        Source::Zero => Box::new(|_| 0.0),
        Source::One => Box::new(|_| 1.0),
        Source::Case => {
            let ex = cfg.case.expect("validated").exact();
            Box::new(move |x| ex.f(x))
        }
    };
    let system = assemble(&disc, &*f, cfg.rhs_mode, cfg.formulation)?;
    let sol = solve(&system)?;
    log::info!("{} unknowns, residual {:.3e}", system.dim(), sol.residual_norm);
    emit(cfg, &solution_csv(&disc, &sol))
}

fn cmd_convergence(cfg: &RunConfig) -> Result<()> {
    let table = run_convergence(cfg.case.expect("validated"), cfg.k, &cfg.levels, cfg.rhs_mode, cfg.formulation)?;
    emit(cfg, &match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Md => table.to_markdown(),
    })
}

fn probe_markdown(name: &str, rows: &[(usize, f64, f64)]) -> String {
    let mut s = format!("| L | h | {name} |\n|---|---|---|\n");
    for (l, h, v) in rows {
        s.push_str(&format!("| {l} | {h:.6e} | {v:.6e} |\n"));
    }
    s
}

fn cmd_probe(cfg: &RunConfig) -> Result<()> {
    let case = cfg.case.expect("validated");
    let (name, rows) = match cfg.command {
        CommandKind::Infsup => ("sigma_min", infsup_family(case, cfg.k, &cfg.levels)?),
        CommandKind::Residual => ("dirichlet_residual", residual_family(case, cfg.k, &cfg.levels)?),
        CommandKind::Interp => {
            let ex = case.exact();
            let family = cfg
                .levels
                .iter()
                .map(|&l| case.discretization(l, cfg.k).map(|d| (l, d)))
                .collect::<Result<Vec<_>>>()?;
            let t = interpolation_study(&family, &ex.p, &ex.div_p, cfg.side);
            let rows = t.rows.iter().zip(t.column(Column::L2P)).map(|((l, r), e)| (*l, r.h, e)).collect();
            ("hdiv_interpolation_error", rows)
        }
        _ => unreachable!("not a probe"),
    };
    emit(cfg, &match cfg.format {
        Format::Csv => probe_csv(name, &rows),
        Format::Md => probe_markdown(name, &rows),
    })
}

fn cmd_geometry(cfg: &RunConfig) -> Result<()> {
    let rows = geometry_rates(cfg.case.expect("validated"), cfg.k, &cfg.levels)?;
    emit(cfg, &geometry_csv(&rows))
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::MeshGen(a) => (CommandKind::MeshGen, a),
        Command::Solve(a) => (CommandKind::Solve, a),
        Command::Convergence(a) => (CommandKind::Convergence, a),
        Command::Infsup(a) => (CommandKind::Infsup, a),
        Command::Interp(a) => (CommandKind::Interp, a),
        Command::Residual(a) => (CommandKind::Residual, a),
        Command::Geometry(a) => (CommandKind::Geometry, a),
    };
    let cfg = RunConfig::resolve(kind, args)?;
    if cfg.dry_run {
        print!("{cfg}");
        return Ok(());
    }
    init_threads()?;
    match kind {
        CommandKind::MeshGen => cmd_mesh_gen(&cfg),
        CommandKind::Solve => cmd_solve(&cfg),
        CommandKind::Convergence => cmd_convergence(&cfg),
        CommandKind::Infsup | CommandKind::Residual | CommandKind::Interp => cmd_probe(&cfg),
        CommandKind::Geometry => cmd_geometry(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
