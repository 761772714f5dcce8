use std::collections::HashMap;
use std::f64::consts::PI;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::{circle_arc, segment_arc, BcTag, DomainBoundary, Vec2};

/// Position of integer grid point `(a, b)` after mapping the square
/// `[-L, L]^2` onto the unit disk: the max-norm ring `rho` goes to the circle
/// of radius `rho / L`, with its `8 rho` points equally spaced in angle.
fn polar_grid_point(a: i64, b: i64, l: usize) -> Vec2 {
    let rho = a.abs().max(b.abs());
    if rho == 0 {
        return Vec2::ZERO;
    }
    let idx = if a == rho && b >= 0 {
        b
    } else if b == rho {
        2 * rho - a
    } else if a == -rho {
        4 * rho - b
    } else if b == -rho {
        6 * rho + a
    } else {
        8 * rho + b
    };
    let theta = idx as f64 * PI / (4.0 * rho as f64);
    let r = rho as f64 / l as f64;
    Vec2::new(r * theta.cos(), r * theta.sin())
}

/// Triangulates the grid squares selected by `keep`, splitting each square
/// along the diagonal that points away from the origin's quadrant corner.
fn polar_grid_mesh(l: usize, range: (i64, i64), keep: impl Fn(i64, i64) -> bool) -> Result<Mesh> {
    let mut ids: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |a: i64, b: i64, vertices: &mut Vec<Vec2>| -> usize {
        *ids.entry((a, b)).or_insert_with(|| {
            vertices.push(polar_grid_point(a, b, l));
            vertices.len() - 1
        })
    };
    for b in range.0..range.1 {
        for a in range.0..range.1 {
            if !keep(a, b) {
                continue;
            }
            let p00 = vid(a, b, &mut vertices);
            let p10 = vid(a + 1, b, &mut vertices);
            let p11 = vid(a + 1, b + 1, &mut vertices);
            let p01 = vid(a, b + 1, &mut vertices);
            // quadrants I and III split along (a,b)-(a+1,b+1)
            let same_sign = (2 * a + 1).signum() == (2 * b + 1).signum();
            if same_sign {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    Mesh::new(vertices, triangles)
}

fn check_power_of_two(l: usize, min: usize) -> Result<()> {
    if l < min || !l.is_power_of_two() {
        return Err(Error::Config(format!("L must be a power of two >= {min}, got {l}")));
    }
    Ok(())
}

/// Quarter annulus `1/2 <= r <= 1`, `x, y >= 0`, traversed counterclockwise:
/// cut on `y = 0`, outer circle, cut on `x = 0`, inner circle. Inner circle
/// is tagged `Gamma0`, the rest `Gamma1`.
pub fn quarter_annulus_domain() -> DomainBoundary {
    let arcs = vec![
        segment_arc(Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0), BcTag::Gamma1).unwrap(),
        circle_arc(Vec2::ZERO, 1.0, (0.0, PI / 2.0), BcTag::Gamma1, false).unwrap(),
        segment_arc(Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.5), BcTag::Gamma1).unwrap(),
        circle_arc(Vec2::ZERO, 0.5, (PI / 2.0, 0.0), BcTag::Gamma0, true).unwrap(),
    ];
    DomainBoundary::new(arcs).expect("quarter annulus boundary is closed")
}

/// Quarter-annulus mesh: the `2 L^2` triangles of a mapped quarter-disk grid
/// minus the `L^2 / 2` triangles inside radius one half.
pub fn generate_quarter_annulus(l: usize) -> Result<Mesh> {
    check_power_of_two(l, 2)?;
    let half = (l / 2) as i64;
    let mut mesh = polar_grid_mesh(l, (0, l as i64), |a, b| a.max(b) >= half)?;
    mesh.attach_boundary(&quarter_annulus_domain())?;
    Ok(mesh)
}

/// Unit disk boundary as four quarter circles with a common tag.
pub fn disk_domain(tag: BcTag) -> DomainBoundary {
    let arcs = (0..4)
        .map(|q| {
            let t0 = q as f64 * PI / 2.0;
            circle_arc(Vec2::ZERO, 1.0, (t0, t0 + PI / 2.0), tag, false).unwrap()
        })
        .collect();
    DomainBoundary::new(arcs).expect("disk boundary is closed")
}

/// Unit-disk mesh with `8 L^2` triangles.
pub fn generate_disk(l: usize, tag: BcTag) -> Result<Mesh> {
    check_power_of_two(l, 1)?;
    let li = l as i64;
    let mut mesh = polar_grid_mesh(l, (-li, li), |_, _| true)?;
    mesh.attach_boundary(&disk_domain(tag))?;
    Ok(mesh)
}

/// Unit square with sides bottom, right, top, left tagged as given.
pub fn unit_square_domain(tags: [BcTag; 4]) -> DomainBoundary {
    let c = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
    let arcs = (0..4).map(|i| segment_arc(c[i], c[(i + 1) % 4], tags[i]).unwrap()).collect();
    DomainBoundary::new(arcs).expect("square boundary is closed")
}

/// `2 n^2` right triangles on the unit square, all sides tagged `Gamma1`.
pub fn generate_unit_square(n: usize) -> Result<(Mesh, DomainBoundary)> {
    if n == 0 {
        return Err(Error::Config("square subdivision must be at least 1".into()));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let domain = unit_square_domain([BcTag::Gamma1; 4]);
    let mut mesh = Mesh::new(vertices, triangles)?;
    mesh.attach_boundary(&domain)?;
    Ok((mesh, domain))
}
