//! Parse-then-validate run configuration.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use curved_rt::assembly::{Formulation, RhsMode};
use curved_rt::cases::Case;
use curved_rt::spaces::Side;
use curved_rt::{Error, Result};

pub const MAX_K: usize = 6;
pub const MAX_LEVEL_EXPONENT: u32 = 8;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in mesh in the text mesh format.
    MeshGen(CommonArgs),
    /// Solve once and dump every coefficient as CSV.
    Solve(CommonArgs),
    /// Error table over a range of levels.
    Convergence(CommonArgs),
    /// Discrete inf-sup constant per level.
    Infsup(CommonArgs),
    /// H(div) interpolation error per level.
    Interp(CommonArgs),
    /// Dirichlet consistency residual per level.
    Residual(CommonArgs),
    /// Boundary gap, normal deviation and modified-element measurements per level.
    Geometry(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Zero,
    One,
    /// The source of the case's exact solution.
    Case,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcChoice {
    NeumannAll,
    DirichletAll,
    /// Keep the tags stored with the mesh or case.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsChoice {
    Exact,
    Fh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationChoice {
    Pg,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideChoice {
    Trial,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Built-in case name.
    #[arg(long)]
    pub case: Option<String>,
    /// Polynomial order of the flux space.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Refinement exponents `a..b` (inclusive), `L = 2^m`.
    #[arg(long)]
    pub levels: Option<String>,
    /// Single resolution `L`.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Mesh file (solve only).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Domain file replacing the boundary stored with the mesh (solve only).
    #[arg(long)]
    pub domain: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub f: Option<Source>,
    #[arg(long, value_enum, default_value_t = BcChoice::File)]
    pub bc: BcChoice,
    #[arg(long = "rhs-mode", value_enum, default_value_t = RhsChoice::Exact)]
    pub rhs_mode: RhsChoice,
    /// Shrink factor of the interior lattice in `fh` mode.
    #[arg(long, default_value_t = RhsMode::DEFAULT_CHI)]
    pub chi: f64,
    #[arg(long, value_enum, default_value_t = FormulationChoice::Pg)]
    pub formulation: FormulationChoice,
    /// Interpolant measured by `interp`.
    #[arg(long, value_enum, default_value_t = SideChoice::Trial)]
    pub side: SideChoice,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "dry-run")]
    pub dry_run: bool,
    /// Recorded in the resolved configuration; all commands are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    MeshGen,
    Solve,
    Convergence,
    Infsup,
    Interp,
    Residual,
    Geometry,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::MeshGen => "mesh-gen",
            CommandKind::Solve => "solve",
            CommandKind::Convergence => "convergence",
            CommandKind::Infsup => "infsup",
            CommandKind::Interp => "interp",
            CommandKind::Residual => "residual",
            CommandKind::Geometry => "geometry",
        }
    }

    fn is_family(self) -> bool {
        !matches!(self, CommandKind::MeshGen | CommandKind::Solve)
    }
}

/// Where the mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Case { case: Case, l: usize },
    File { mesh: PathBuf, domain: Option<PathBuf> },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub k: usize,
    /// Resolutions `L` of a family command.
    pub levels: Vec<usize>,
    pub case: Option<Case>,
    pub mesh: Option<MeshSource>,
    pub source: Source,
    pub bc: BcChoice,
    pub rhs_mode: RhsMode,
    pub formulation: Formulation,
    pub side: Side,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub dry_run: bool,
    pub seed: u64,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// `a..b`, `a..=b` or a single exponent.
pub fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let exp = |t: &str| -> Result<u32> {
        t.trim().parse::<u32>().map_err(|_| config(format!("bad level exponent '{t}'")))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (exp(a)?, exp(b.trim_start_matches('='))?),
        None => {
            let m = exp(s)?;
            (m, m)
        }
    };
    if a > b {
        return Err(config(format!("empty level range '{s}'")));
    }
    if b > MAX_LEVEL_EXPONENT {
        return Err(config(format!("level exponent {b} exceeds {MAX_LEVEL_EXPONENT}")));
    }
    Ok((a..=b).map(|m| 1usize << m).collect())
}

impl RunConfig {
    pub fn resolve(command: CommandKind, a: &CommonArgs) -> Result<Self> {
        if a.k > MAX_K {
            return Err(config(format!("k = {} exceeds the supported maximum {MAX_K}", a.k)));
        }
        if !(a.chi > 0.0 && a.chi < 1.0) {
            return Err(config(format!("chi must lie in (0, 1), got {}", a.chi)));
        }
        let case = a.case.as_deref().map(Case::parse).transpose()?;
        let mut levels = Vec::new();
        let mut mesh = None;
        if command.is_family() {
            let c = case.ok_or_else(|| config(format!("{} needs --case", command.name())))?;
            if a.mesh.is_some() || a.domain.is_some() {
                return Err(config(format!("{} runs built-in cases only; drop --mesh/--domain", command.name())));
            }
            levels = match (&a.levels, a.l) {
                (Some(_), Some(_)) => return Err(config("give either --levels or --L")),
                (Some(s), None) => parse_levels(s)?,
                (None, Some(l)) => vec![l],
                (None, None) => default_levels(c),
            };
        } else {
            if a.levels.is_some() {
                return Err(config(format!("{} takes --L, not --levels", command.name())));
            }
            mesh = Some(match (&a.mesh, case) {
                (Some(_), Some(_)) => return Err(config("give either --mesh or --case")),
                (Some(m), None) => {
                    if command == CommandKind::MeshGen {
                        return Err(config("mesh-gen builds built-in meshes; use --case"));
                    }
                    MeshSource::File { mesh: m.clone(), domain: a.domain.clone() }
                }
                (None, Some(c)) => {
                    if a.domain.is_some() {
                        return Err(config("--domain applies to --mesh files only"));
                    }
                    MeshSource::Case { case: c, l: a.l.ok_or_else(|| config("--case needs --L"))? }
                }
                (None, None) => return Err(config("give --mesh or --case")),
            });
            if let Some(MeshSource::Case { l: 0, .. }) = mesh {
                return Err(config("--L must be positive"));
            }
        }
        let source = match (a.f, case) {
            (Some(Source::Case), None) => return Err(config("--f case needs --case")),
            (Some(s), _) => s,
            (None, Some(_)) => Source::Case,
            (None, None) => Source::Zero,
        };
        if command.is_family() && (source != Source::Case || a.bc != BcChoice::File) {
            return Err(config("family commands use the case's own source and boundary conditions"));
        }
        if command == CommandKind::Solve && a.format == Format::Md {
            return Err(config("solve writes CSV only"));
        }
        Ok(RunConfig {
            command,
            k: a.k,
            levels,
            case,
            mesh,
            source,
            bc: a.bc,
            rhs_mode: match a.rhs_mode {
                RhsChoice::Exact => RhsMode::ExactQuadrature,
                RhsChoice::Fh => RhsMode::Fh { chi: a.chi },
            },
            formulation: match a.formulation {
                FormulationChoice::Pg => Formulation::PetrovGalerkin,
                FormulationChoice::Classical => Formulation::Classical,
            },
            side: match a.side {
                SideChoice::Trial => Side::Trial,
                SideChoice::Test => Side::Test,
            },
            format: a.format,
            out: a.out.clone(),
            dry_run: a.dry_run,
            seed: a.seed,
        })
    }
}

fn default_levels(case: Case) -> Vec<usize> {
    match case {
        // small straight meshes: exactness holds at every size
        Case::SquarePatch => vec![1, 2, 4, 8],
        _ => (2..=5).map(|m| 1usize << m).collect(),
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "command = {}", self.command.name())?;
        writeln!(f, "k = {}", self.k)?;
        if let Some(c) = self.case {
            writeln!(f, "case = {c}")?;
        }
        if !self.levels.is_empty() {
            let l: Vec<String> = self.levels.iter().map(|l| l.to_string()).collect();
            writeln!(f, "levels(L) = {}", l.join(","))?;
        }
        match &self.mesh {
            Some(MeshSource::Case { l, .. }) => writeln!(f, "L = {l}")?,
            Some(MeshSource::File { mesh, domain }) => {
                writeln!(f, "mesh = {}", mesh.display())?;
                if let Some(d) = domain {
                    writeln!(f, "domain = {}", d.display())?;
                }
            }
            None => {}
        }
        writeln!(f, "f = {:?}", self.source)?;
        writeln!(f, "bc = {:?}", self.bc)?;
        writeln!(f, "rhs_mode = {:?}", self.rhs_mode)?;
        writeln!(f, "formulation = {:?}", self.formulation)?;
        writeln!(f, "side = {:?}", self.side)?;
        writeln!(f, "format = {:?}", self.format)?;
        match &self.out {
            Some(p) => writeln!(f, "out = {}", p.display())?,
            None => writeln!(f, "out = -")?,
        }
        writeln!(f, "seed = {}", self.seed)
    }
}
