//! Built-in test problems with closed-form solutions.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{BcTag, DomainBoundary, Vec2};
use crate::mesh::{
    disk_domain, generate_disk, generate_quarter_annulus, generate_unit_square, quarter_annulus_domain,
    unit_square_domain, Mesh,
};
use crate::spaces::Discretization;

/// Exact `(p; u)` with `p = grad u`; the source is `f = -div p`.
#[derive(Clone, Copy)]
pub struct ExactSolution {
    pub u: fn(Vec2) -> f64,
    pub p: fn(Vec2) -> Vec2,
    pub div_p: fn(Vec2) -> f64,
}

impl ExactSolution {
    pub fn f(&self, x: Vec2) -> f64 {
        -(self.div_p)(x)
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Quarter annulus `1/2 < r < 1`, Dirichlet inside, Neumann outside and on the cuts.
    AnnulusQuarter,
    /// Unit square, Dirichlet on `y = 0, 1`, Neumann on `x = 0, 1`, `u = y - y^2`.
    SquarePatch,
    /// Unit disk, Dirichlet, `u = (1 - r^2)/4`.
    DiskDirichlet,
    /// Unit square, pure Neumann, `u = cos(pi x) cos(pi y)`.
    SquareNeumann,
    /// Unit disk, pure Neumann, `u = r^2/2 - r^4/4 - 1/6`.
    DiskNeumann,
}

fn annulus_u(x: Vec2) -> f64 {
    let r = x.norm();
    0.5 * (r * r - 2.0 * r + 0.75)
}
fn annulus_p(x: Vec2) -> Vec2 {
    let r = x.norm();
    ((r - 1.0) / r) * x
}
fn annulus_div(x: Vec2) -> f64 {
    2.0 - 1.0 / x.norm()
}

fn patch_u(x: Vec2) -> f64 {
    x.y - x.y * x.y
}
fn patch_p(x: Vec2) -> Vec2 {
    Vec2::new(0.0, 1.0 - 2.0 * x.y)
}
fn patch_div(_: Vec2) -> f64 {
    -2.0
}

fn disk_u(x: Vec2) -> f64 {
    0.25 * (1.0 - x.dot(x))
}
fn disk_p(x: Vec2) -> Vec2 {
    -0.5 * x
}
fn disk_div(_: Vec2) -> f64 {
    -1.0
}

fn cos_u(x: Vec2) -> f64 {
    (PI * x.x).cos() * (PI * x.y).cos()
}
fn cos_p(x: Vec2) -> Vec2 {
    Vec2::new(-PI * (PI * x.x).sin() * (PI * x.y).cos(), -PI * (PI * x.x).cos() * (PI * x.y).sin())
}
fn cos_div(x: Vec2) -> f64 {
    -2.0 * PI * PI * cos_u(x)
}

fn dn_u(x: Vec2) -> f64 {
    let r2 = x.dot(x);
    0.5 * r2 - 0.25 * r2 * r2 - 1.0 / 6.0
}
fn dn_p(x: Vec2) -> Vec2 {
    (1.0 - x.dot(x)) * x
}
fn dn_div(x: Vec2) -> f64 {
    2.0 - 4.0 * x.dot(x)
}

impl Case {
    pub const ALL: [Case; 5] =
        [Case::AnnulusQuarter, Case::SquarePatch, Case::DiskDirichlet, Case::SquareNeumann, Case::DiskNeumann];

    pub fn name(self) -> &'static str {
        match self {
            Case::AnnulusQuarter => "annulus-quarter",
            Case::SquarePatch => "square-patch",
            Case::DiskDirichlet => "disk-dirichlet",
            Case::SquareNeumann => "square-neumann",
            Case::DiskNeumann => "disk-neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Case> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown case '{s}'")))
    }

    pub fn exact(self) -> ExactSolution {
        match self {
            Case::AnnulusQuarter => ExactSolution { u: annulus_u, p: annulus_p, div_p: annulus_div },
            Case::SquarePatch => ExactSolution { u: patch_u, p: patch_p, div_p: patch_div },
            Case::DiskDirichlet => ExactSolution { u: disk_u, p: disk_p, div_p: disk_div },
            Case::SquareNeumann => ExactSolution { u: cos_u, p: cos_p, div_p: cos_div },
            Case::DiskNeumann => ExactSolution { u: dn_u, p: dn_p, div_p: dn_div },
        }
    }

    pub fn domain(self) -> DomainBoundary {
        match self {
            Case::AnnulusQuarter => quarter_annulus_domain(),
            Case::SquarePatch => unit_square_domain([BcTag::Gamma0, BcTag::Gamma1, BcTag::Gamma0, BcTag::Gamma1]),
            Case::DiskDirichlet => disk_domain(BcTag::Gamma0),
            Case::SquareNeumann => unit_square_domain([BcTag::Gamma1; 4]),
            Case::DiskNeumann => disk_domain(BcTag::Gamma1),
        }
    }

    /// Mesh with resolution parameter `l` (cells per unit length; a power of
    /// two for the curved cases).
    pub fn mesh(self, l: usize) -> Result<(Mesh, DomainBoundary)> {
        let domain = self.domain();
        let mesh = match self {
            Case::AnnulusQuarter => generate_quarter_annulus(l)?,
            Case::SquarePatch | Case::SquareNeumann => {
                let (mut m, _) = generate_unit_square(l)?;
                m.attach_boundary(&domain)?;
                m
            }
            Case::DiskDirichlet => generate_disk(l, BcTag::Gamma0)?,
            Case::DiskNeumann => generate_disk(l, BcTag::Gamma1)?,
        };
        Ok((mesh, domain))
    }

    pub fn discretization(self, l: usize, k: usize) -> Result<Discretization> {
        let (mesh, domain) = self.mesh(l)?;
        Discretization::new(mesh, domain, k)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
