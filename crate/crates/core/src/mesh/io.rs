//! Text mesh format.
//!
//! ```text
//! curvedrt-mesh 1
//! counts <vertices> <triangles> <arcs> <boundary edges>
//! arc <domain-format arc record>
//! v x y
//! t i j k
//! be edge_index arc_index tag
//! ```
//!
//! Edge indices refer to the deterministic numbering produced by
//! [`Mesh::new`] from the triangle list.

use super::{BoundaryEdge, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{arc_to_line, parse_arc_tokens, BcTag, DomainBoundary, Vec2};

pub fn write_mesh(mesh: &Mesh, domain: &DomainBoundary) -> String {
    let mut s = String::new();
    s.push_str("curvedrt-mesh 1\n");
    s.push_str(&format!(
        "counts {} {} {} {}\n",
        mesh.vertices.len(),
        mesh.triangles.len(),
        domain.arcs.len(),
        mesh.boundary_edges.len()
    ));
    for arc in &domain.arcs {
        s.push_str("arc ");
        s.push_str(&arc_to_line(arc));
        s.push('\n');
    }
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {}\n", v.x, v.y));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("t {} {} {}\n", t[0], t[1], t[2]));
    }
    for be in &mesh.boundary_edges {
        s.push_str(&format!("be {} {} {}\n", be.edge, be.arc, be.tag));
    }
    s
}

pub fn read_mesh(text: &str) -> Result<(Mesh, DomainBoundary)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    let err = |line: usize, m: &str| Error::Parse { line: line + 1, message: m.to_string() };
    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty mesh file"))?;
    if header.trim() != "curvedrt-mesh 1" {
        return Err(err(ln, "missing 'curvedrt-mesh 1' header"));
    }
    let (ln, counts) = lines.next().ok_or_else(|| err(ln, "missing counts"))?;
    let c: Vec<usize> = counts
        .split_whitespace()
        .skip(1)
        .map(|x| x.parse().map_err(|_| err(ln, "bad count")))
        .collect::<Result<_>>()?;
    if c.len() != 4 || !counts.trim_start().starts_with("counts") {
        return Err(err(ln, "counts line needs four integers"));
    }
    let mut arcs = Vec::with_capacity(c[2]);
    let mut vertices = Vec::with_capacity(c[0]);
    let mut triangles = Vec::with_capacity(c[1]);
    let mut records = Vec::with_capacity(c[3]);
    for (ln, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(ln, &format!("bad number '{s}'")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(ln, &format!("bad index '{s}'")));
        match tok[0] {
            "arc" => arcs.push(parse_arc_tokens(&tok[1..], ln + 1)?),
            "v" if tok.len() == 3 => vertices.push(Vec2::new(num(tok[1])?, num(tok[2])?)),
            "t" if tok.len() == 4 => triangles.push([int(tok[1])?, int(tok[2])?, int(tok[3])?]),
            "be" if tok.len() == 4 => {
                let tag = BcTag::parse(tok[3]).ok_or_else(|| err(ln, "bad tag"))?;
                records.push(BoundaryEdge { edge: int(tok[1])?, arc: int(tok[2])?, tag });
            }
            _ => return Err(err(ln, &format!("unrecognized record '{line}'"))),
        }
    }
    if vertices.len() != c[0] || triangles.len() != c[1] || arcs.len() != c[2] || records.len() != c[3] {
        return Err(Error::Parse { line: 2, message: "record counts do not match header".into() });
    }
    let domain = DomainBoundary::new(arcs)?;
    if let Some(r) = records.iter().find(|r| r.arc >= domain.arcs.len()) {
        return Err(Error::InvalidMesh(format!("boundary record references missing arc {}", r.arc)));
    }
    let mut mesh = Mesh::new(vertices, triangles)?;
    mesh.set_boundary_edges(records)?;
    Ok((mesh, domain))
}
