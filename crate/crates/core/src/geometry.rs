//! Boundary description and the geometric queries of the curved-boundary
//! construction.
//!
//! The boundary is an ordered loop of parametric arcs traversed with the
//! domain on the left. Each arc carries its boundary-condition tag. The central
//! query is [`foot_of_perpendicular`]: given a point `M` on a straight boundary
//! edge and the edge's outer normal, find the nearest point `N` where the
//! normal line crosses the true boundary.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre;
use crate::mesh::Mesh;

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotation by -90 degrees: the outward normal of a counterclockwise tangent.
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Boundary-condition tag: `Gamma0` carries `u = 0`, `Gamma1` carries `p.n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcTag {
    Gamma0,
    Gamma1,
}

impl BcTag {
    pub fn parse(s: &str) -> Option<BcTag> {
        match s.to_ascii_lowercase().as_str() {
            "gamma0" | "g0" | "0" | "dirichlet" => Some(BcTag::Gamma0),
            "gamma1" | "g1" | "1" | "neumann" => Some(BcTag::Gamma1),
            _ => None,
        }
    }
}

impl fmt::Display for BcTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BcTag::Gamma0 => write!(f, "gamma0"),
            BcTag::Gamma1 => write!(f, "gamma1"),
        }
    }
}

/// Local shape of the boundary relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Convex,
    Concave,
    Straight,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArcShape {
    /// Parametrized by the polar angle around `center`. `inward` marks a
    /// circle whose interior lies outside the domain.
    Circle {
        center: Vec2,
        radius: f64,
        inward: bool,
    },
    /// Parametrized by `t` in `[0, 1]`.
    Segment { start: Vec2, end: Vec2 },
    /// Cubic Bezier curve, parametrized by `t` in `[0, 1]`.
    Cubic { control: [Vec2; 4] },
}

/// A smooth piece of the boundary, traversed from `t_start` to `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryArc {
    pub shape: ArcShape,
    pub t_start: f64,
    pub t_end: f64,
    pub tag: BcTag,
}

/// Builds a circular arc over the angle range `(t_start, t_end)`.
///
/// The traversal runs from the first angle to the second; for a domain lying
/// outside the circle (`inward`) this is normally a decreasing range.
pub fn circle_arc(
    center: Vec2,
    radius: f64,
    angle_range: (f64, f64),
    tag: BcTag,
    inward: bool,
) -> Result<BoundaryArc> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidGeometry(format!("circle radius must be positive, got {radius}")));
    }
    let (t0, t1) = angle_range;
    if !((t1 - t0).abs() > 1e-14) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidGeometry("degenerate angle range".into()));
    }
    if (t1 - t0).abs() > 2.0 * PI + 1e-12 {
        return Err(Error::InvalidGeometry("angle range exceeds a full turn".into()));
    }
    Ok(BoundaryArc {
        shape: ArcShape::Circle { center, radius, inward },
        t_start: t0,
        t_end: t1,
        tag,
    })
}

pub fn segment_arc(start: Vec2, end: Vec2, tag: BcTag) -> Result<BoundaryArc> {
    if start.dist(end) < 1e-14 {
        return Err(Error::InvalidGeometry("zero-length segment".into()));
    }
    Ok(BoundaryArc {
        shape: ArcShape::Segment { start, end },
        t_start: 0.0,
        t_end: 1.0,
        tag,
    })
}

/// Cubic Bezier arc. Rejected when its curvature changes sign: convex and
/// concave pieces must be separate arcs.
pub fn cubic_arc(control: [Vec2; 4], tag: BcTag) -> Result<BoundaryArc> {
    let arc = BoundaryArc {
        shape: ArcShape::Cubic { control },
        t_start: 0.0,
        t_end: 1.0,
        tag,
    };
    let mut sign = 0.0f64;
    for i in 0..=64 {
        let t = i as f64 / 64.0;
        let d = arc.derivative(t);
        if d.norm() < 1e-12 {
            return Err(Error::InvalidGeometry("cubic arc has a stationary point".into()));
        }
        let c = d.cross(arc.second_derivative(t));
        if c.abs() > 1e-12 {
            if sign != 0.0 && c.signum() != sign {
                return Err(Error::InvalidGeometry("cubic arc has an inflection point".into()));
            }
            sign = c.signum();
        }
    }
    Ok(arc)
}

impl BoundaryArc {
    /// `(min, max)` of the parameter interval.
    pub fn param_range(&self) -> (f64, f64) {
        (self.t_start.min(self.t_end), self.t_start.max(self.t_end))
    }

    fn direction(&self) -> f64 {
        if self.t_end >= self.t_start {
            1.0
        } else {
            -1.0
        }
    }

    pub fn position(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Circle { center, radius, .. } => {
                *center + *radius * Vec2::new(t.cos(), t.sin())
            }
            ArcShape::Segment { start, end } => *start + t * (*end - *start),
            ArcShape::Cubic { control: c } => {
                let s = 1.0 - t;
                (s * s * s) * c[0] + (3.0 * s * s * t) * c[1] + (3.0 * s * t * t) * c[2] + (t * t * t) * c[3]
            }
        }
    }

    /// Derivative of `position` with respect to the parameter.
    pub fn derivative(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Circle { radius, .. } => *radius * Vec2::new(-t.sin(), t.cos()),
            ArcShape::Segment { start, end } => *end - *start,
            ArcShape::Cubic { control: c } => {
                let s = 1.0 - t;
                (3.0 * s * s) * (c[1] - c[0]) + (6.0 * s * t) * (c[2] - c[1]) + (3.0 * t * t) * (c[3] - c[2])
            }
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Circle { radius, .. } => *radius * Vec2::new(-t.cos(), -t.sin()),
            ArcShape::Segment { .. } => Vec2::ZERO,
            ArcShape::Cubic { control: c } => {
                let s = 1.0 - t;
                (6.0 * s) * (c[2] - 2.0 * c[1] + c[0]) + (6.0 * t) * (c[3] - 2.0 * c[2] + c[1])
            }
        }
    }

    /// Unit tangent in the traversal direction.
    pub fn tangent(&self, t: f64) -> Vec2 {
        (self.direction() * self.derivative(t)).normalized()
    }

    /// Unit normal pointing out of the domain.
    pub fn outward_normal(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Circle { inward, .. } => {
                let radial = Vec2::new(t.cos(), t.sin());
                if *inward {
                    -radial
                } else {
                    radial
                }
            }
            _ => self.tangent(t).rot_cw(),
        }
    }

    pub fn start(&self) -> Vec2 {
        self.position(self.t_start)
    }

    pub fn end(&self) -> Vec2 {
        self.position(self.t_end)
    }

    pub fn is_straight(&self) -> bool {
        matches!(self.shape, ArcShape::Segment { .. })
    }

    pub fn convexity(&self) -> Convexity {
        match &self.shape {
            ArcShape::Circle { inward, .. } => {
                if *inward {
                    Convexity::Concave
                } else {
                    Convexity::Convex
                }
            }
            ArcShape::Segment { .. } => Convexity::Straight,
            ArcShape::Cubic { .. } => {
                let t = 0.5;
                let c = self.direction() * self.derivative(t).cross(self.direction() * self.second_derivative(t));
                if c > 0.0 {
                    Convexity::Convex
                } else {
                    Convexity::Concave
                }
            }
        }
    }

    /// Distance from `p` to the arc and the parameter of the closest point.
    pub fn closest_point(&self, p: Vec2) -> (f64, f64) {
        let (lo, hi) = self.param_range();
        match &self.shape {
            ArcShape::Circle { center, radius, .. } => {
                let d = p - *center;
                if d.norm() > 0.0 {
                    let t = self.unwrap_angle(d.y.atan2(d.x));
                    if t >= lo && t <= hi {
                        return ((d.norm() - radius).abs(), t);
                    }
                }
                let (da, db) = (p.dist(self.position(lo)), p.dist(self.position(hi)));
                if da <= db {
                    (da, lo)
                } else {
                    (db, hi)
                }
            }
            ArcShape::Segment { start, end } => {
                let e = *end - *start;
                let t = ((p - *start).dot(e) / e.dot(e)).clamp(0.0, 1.0);
                (p.dist(self.position(t)), t)
            }
            ArcShape::Cubic { .. } => {
                let n = 64;
                let mut best = (f64::INFINITY, lo);
                for i in 0..=n {
                    let t = lo + (hi - lo) * i as f64 / n as f64;
                    let d = p.dist(self.position(t));
                    if d < best.0 {
                        best = (d, t);
                    }
                }
                let mut t = best.1;
                for _ in 0..50 {
                    let r = self.position(t) - p;
                    let d1 = self.derivative(t);
                    let g = r.dot(d1);
                    let dg = d1.dot(d1) + r.dot(self.second_derivative(t));
                    if dg.abs() < 1e-300 {
                        break;
                    }
                    let tn = (t - g / dg).clamp(lo, hi);
                    if (tn - t).abs() < 1e-15 {
                        t = tn;
                        break;
                    }
                    t = tn;
                }
                let d = p.dist(self.position(t));
                if d < best.0 {
                    (d, t)
                } else {
                    best
                }
            }
        }
    }

    /// Parameter of a point lying on the arc (closest-point parameter).
    pub fn param_of(&self, p: Vec2) -> f64 {
        self.closest_point(p).1
    }

    fn unwrap_angle(&self, mut a: f64) -> f64 {
        let (lo, hi) = self.param_range();
        let mid = 0.5 * (lo + hi);
        while a < mid - PI {
            a += 2.0 * PI;
        }
        while a > mid + PI {
            a -= 2.0 * PI;
        }
        a
    }

    /// Winding-angle correction turning the chord start->end into the arc,
    /// seen from `p`: `+-2 pi` when `p` lies between the chord and the arc.
    fn winding_correction(&self, p: Vec2) -> f64 {
        let a = self.start();
        let b = self.end();
        let mid = self.position(0.5 * (self.t_start + self.t_end));
        let orient = (mid - a).cross(b - a);
        let inside_region = match &self.shape {
            ArcShape::Segment { .. } => false,
            ArcShape::Circle { center, radius, .. } => {
                if p.dist(*center) >= *radius {
                    false
                } else {
                    // same side of the chord line as the arc midpoint
                    let side_mid = (b - a).cross(mid - a);
                    let side_p = (b - a).cross(p - a);
                    side_mid * side_p > 0.0
                }
            }
            ArcShape::Cubic { .. } => {
                // closed loop arc + reversed chord, sampled
                let n = 512;
                let mut pts: Vec<Vec2> = (0..=n)
                    .map(|i| self.position(self.t_start + (self.t_end - self.t_start) * i as f64 / n as f64))
                    .collect();
                pts.push(a);
                winding_of_polyline(&pts, p).abs() > PI
            }
        };
        if inside_region {
            // loop a -> arc -> b -> chord -> a has the orientation of (a, mid, b)
            if orient > 0.0 {
                2.0 * PI
            } else {
                -2.0 * PI
            }
        } else {
            0.0
        }
    }
}

fn winding_of_polyline(pts: &[Vec2], p: Vec2) -> f64 {
    let mut total = 0.0;
    for w in pts.windows(2) {
        let a = w[0] - p;
        let b = w[1] - p;
        total += a.cross(b).atan2(a.dot(b));
    }
    total
}

/// Closed boundary loop of arcs traversed with the domain on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBoundary {
    pub arcs: Vec<BoundaryArc>,
}

impl DomainBoundary {
    pub fn new(arcs: Vec<BoundaryArc>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::InvalidGeometry("empty boundary".into()));
        }
        let n = arcs.len();
        for i in 0..n {
            let a = &arcs[i];
            let b = &arcs[(i + 1) % n];
            let gap = a.end().dist(b.start());
            if gap > 1e-12 {
                return Err(Error::InvalidGeometry(format!(
                    "arc {i} ends {gap:.3e} away from the start of arc {}",
                    (i + 1) % n
                )));
            }
        }
        for (i, a) in arcs.iter().enumerate() {
            if let ArcShape::Circle { .. } = a.shape {
                let t = 0.5 * (a.t_start + a.t_end);
                let expected = a.tangent(t).rot_cw();
                if expected.dot(a.outward_normal(t)) < 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "circle arc {i}: traversal direction inconsistent with its inward/outward flag"
                    )));
                }
            }
        }
        let d = DomainBoundary { arcs };
        if d.signed_area() <= 0.0 {
            return Err(Error::InvalidGeometry("boundary is not counterclockwise".into()));
        }
        Ok(d)
    }

    /// Points where the boundary-condition tag changes.
    pub fn transition_points(&self) -> Vec<Vec2> {
        let n = self.arcs.len();
        (0..n)
            .filter(|&i| self.arcs[i].tag != self.arcs[(i + 1) % n].tag)
            .map(|i| self.arcs[i].end())
            .collect()
    }

    pub fn convexity_flags(&self) -> Vec<Convexity> {
        self.arcs.iter().map(BoundaryArc::convexity).collect()
    }

    pub fn has_gamma0(&self) -> bool {
        self.arcs.iter().any(|a| a.tag == BcTag::Gamma0)
    }

    /// Enclosed area, by Green's theorem with Gauss quadrature on each arc.
    pub fn signed_area(&self) -> f64 {
        let (nodes, weights) = gauss_legendre(12);
        let mut area = 0.0;
        for arc in &self.arcs {
            let pieces = 16;
            let dt = (arc.t_end - arc.t_start) / pieces as f64;
            for p in 0..pieces {
                let t0 = arc.t_start + p as f64 * dt;
                for (s, w) in nodes.iter().zip(&weights) {
                    let t = t0 + s * dt;
                    let x = arc.position(t);
                    let d = arc.derivative(t);
                    area += 0.5 * w * dt * x.cross(d);
                }
            }
        }
        area
    }

    /// Winding-number point-in-domain test. Circle arcs are handled exactly;
    /// points on the boundary are classified arbitrarily.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut total = 0.0;
        for arc in &self.arcs {
            let a = arc.start() - p;
            let b = arc.end() - p;
            total += a.cross(b).atan2(a.dot(b));
            total += arc.winding_correction(p);
        }
        total.abs() > PI
    }

    /// Parses the line-oriented domain format:
    ///
    /// ```text
    /// circle cx cy r t0 t1 tag inward|outward
    /// segment x0 y0 x1 y1 tag
    /// cubic x0 y0 x1 y1 x2 y2 x3 y3 tag
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut arcs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            arcs.push(parse_arc_tokens(&tokens, i + 1)?);
        }
        DomainBoundary::new(arcs)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for arc in &self.arcs {
            s.push_str(&arc_to_line(arc));
            s.push('\n');
        }
        s
    }
}

pub(crate) fn parse_arc_tokens(tokens: &[&str], line: usize) -> Result<BoundaryArc> {
    let err = |m: &str| Error::Parse { line, message: m.to_string() };
    let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number '{s}'")));
    let tag = |s: &str| BcTag::parse(s).ok_or_else(|| err(&format!("bad tag '{s}'")));
    match tokens.first().copied() {
        Some("circle") => {
            if tokens.len() != 8 {
                return Err(err("circle needs: cx cy r t0 t1 tag inward|outward"));
            }
            let inward = match tokens[7] {
                "inward" => true,
                "outward" => false,
                other => return Err(err(&format!("expected inward|outward, got '{other}'"))),
            };
            circle_arc(
                Vec2::new(num(tokens[1])?, num(tokens[2])?),
                num(tokens[3])?,
                (num(tokens[4])?, num(tokens[5])?),
                tag(tokens[6])?,
                inward,
            )
            .map_err(|e| err(&e.to_string()))
        }
        Some("segment") => {
            if tokens.len() != 6 {
                return Err(err("segment needs: x0 y0 x1 y1 tag"));
            }
            segment_arc(
                Vec2::new(num(tokens[1])?, num(tokens[2])?),
                Vec2::new(num(tokens[3])?, num(tokens[4])?),
                tag(tokens[5])?,
            )
            .map_err(|e| err(&e.to_string()))
        }
        Some("cubic") => {
            if tokens.len() != 10 {
                return Err(err("cubic needs: x0 y0 x1 y1 x2 y2 x3 y3 tag"));
            }
            let mut c = [Vec2::ZERO; 4];
            for (j, cj) in c.iter_mut().enumerate() {
                *cj = Vec2::new(num(tokens[1 + 2 * j])?, num(tokens[2 + 2 * j])?);
            }
            cubic_arc(c, tag(tokens[9])?).map_err(|e| err(&e.to_string()))
        }
        Some(other) => Err(err(&format!("unknown arc kind '{other}'"))),
        None => Err(err("empty record")),
    }
}

pub(crate) fn arc_to_line(arc: &BoundaryArc) -> String {
    match &arc.shape {
        ArcShape::Circle { center, radius, inward } => format!(
            "circle {:e} {:e} {:e} {:e} {:e} {} {}",
            center.x,
            center.y,
            radius,
            arc.t_start,
            arc.t_end,
            arc.tag,
            if *inward { "inward" } else { "outward" }
        ),
        ArcShape::Segment { start, end } => {
            format!("segment {:e} {:e} {:e} {:e} {}", start.x, start.y, end.x, end.y, arc.tag)
        }
        ArcShape::Cubic { control: c } => format!(
            "cubic {:e} {:e} {:e} {:e} {:e} {:e} {:e} {:e} {}",
            c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y, arc.tag
        ),
    }
}

/// Intersection of the perpendicular through `M` with the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootResult {
    pub point: Vec2,
    pub param: f64,
    /// `|MN|`.
    pub distance: f64,
    /// `s` with `N = M + s n_T`; positive when `N` lies outside the polygon.
    pub signed_distance: f64,
    pub normal: Vec2,
}

const FOOT_SUBINTERVALS: usize = 32;
const FOOT_MAX_ITER: usize = 100;

/// Nearest intersection of the line `{M + s n_T}` with `arc` for parameters
/// inside `param_bracket`.
///
/// The crossing condition `n_T x (gamma(t) - M) = 0` is solved for the curve
/// parameter by safeguarded Newton with bisection fallback. All roots in the
/// bracket are located and the one with the smallest `|s|` is returned; ties
/// go to the smaller parameter.
pub fn foot_of_perpendicular(
    arc: &BoundaryArc,
    m: Vec2,
    n_t: Vec2,
    param_bracket: (f64, f64),
) -> Result<FootResult> {
    let lo = param_bracket.0.min(param_bracket.1);
    let hi = param_bracket.0.max(param_bracket.1);
    let scale = arc.position(lo).dist(arc.position(hi));
    let tol = 1e-13 * (1.0 + scale);
    let g = |t: f64| n_t.cross(arc.position(t) - m);
    let dg = |t: f64| n_t.cross(arc.derivative(t));

    let mut roots: Vec<f64> = Vec::new();
    let ts: Vec<f64> = (0..=FOOT_SUBINTERVALS)
        .map(|i| lo + (hi - lo) * i as f64 / FOOT_SUBINTERVALS as f64)
        .collect();
    let gs: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    for i in 0..FOOT_SUBINTERVALS {
        let (a, b) = (ts[i], ts[i + 1]);
        let (ga, gb) = (gs[i], gs[i + 1]);
        if ga.abs() <= tol {
            roots.push(a);
            continue;
        }
        if i + 1 == FOOT_SUBINTERVALS && gb.abs() <= tol {
            roots.push(b);
            continue;
        }
        if ga * gb < 0.0 {
            roots.push(safeguarded_newton(&g, &dg, a, b, ga, tol)?);
        }
    }
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + x.abs()));

    let mut best: Option<(f64, f64)> = None;
    for &t in &roots {
        let s = (arc.position(t) - m).dot(n_t);
        match best {
            None => best = Some((t, s)),
            Some((bt, bs)) => {
                if (s.abs() - bs.abs()).abs() <= 1e-12 * (1.0 + scale) && (t - bt).abs() > 1e-12 {
                    log::warn!(
                        "equidistant boundary intersections at t={bt:.6} and t={t:.6}; mesh likely too coarse"
                    );
                    if t < bt {
                        best = Some((t, s));
                    }
                } else if s.abs() < bs.abs() {
                    best = Some((t, s));
                }
            }
        }
    }
    let (t, s) = best.ok_or(Error::NoIntersection { x: m.x, y: m.y })?;
    let point = arc.position(t);
    Ok(FootResult {
        point,
        param: t,
        distance: s.abs(),
        signed_distance: s,
        normal: arc.outward_normal(t),
    })
}

fn safeguarded_newton(
    g: &impl Fn(f64) -> f64,
    dg: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    tol: f64,
) -> Result<f64> {
    let mut t = 0.5 * (a + b);
    let mut last = f64::INFINITY;
    for _ in 0..FOOT_MAX_ITER {
        let gt = g(t);
        last = gt;
        if gt.abs() <= tol {
            return Ok(t);
        }
        if ga * gt < 0.0 {
            b = t;
        } else {
            a = t;
            ga = gt;
        }
        let d = dg(t);
        let newton = if d != 0.0 { t - gt / d } else { f64::NAN };
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) || (b - a) <= 1e-16 * (1.0 + t.abs()) {
            let gn = g(next);
            if gn.abs() <= 1e3 * tol {
                return Ok(next);
            }
            return Err(Error::NonConvergence { iterations: FOOT_MAX_ITER, residual: gn.abs() });
        }
        t = next;
    }
    Err(Error::NonConvergence { iterations: FOOT_MAX_ITER, residual: last.abs() })
}

/// Closed-form nearest intersection of `{M + s n}` with a full circle
/// (line-circle quadratic). Used to cross-check the generic solver.
pub fn circle_line_foot(center: Vec2, radius: f64, m: Vec2, n: Vec2) -> Option<(Vec2, f64)> {
    // |m - c + s n|^2 = r^2
    let d = m - center;
    let b = d.dot(n);
    let c = d.dot(d) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s1 = -b - sq;
    let s2 = -b + sq;
    let s = if s1.abs() <= s2.abs() { s1 } else { s2 };
    Some((m + s * n, s))
}

/// Largest `|MN|` and largest `|n(N) - n_T|` over all curved boundary edges,
/// sampled at the 3-point Gauss nodes of each edge.
pub fn max_gap_and_normal_deviation(mesh: &Mesh, domain: &DomainBoundary) -> Result<(f64, f64)> {
    let (nodes, _) = gauss_legendre(3);
    let mut gap: f64 = 0.0;
    let mut dev: f64 = 0.0;
    for be in &mesh.boundary_edges {
        let arc = &domain.arcs[be.arc];
        if arc.is_straight() {
            continue;
        }
        let (a, b, n_t) = mesh.boundary_edge_frame(be.edge);
        let bracket = (arc.param_of(a), arc.param_of(b));
        for &s in &nodes {
            let m = a + s * (b - a);
            let foot = foot_of_perpendicular(arc, m, n_t, bracket)?;
            gap = gap.max(foot.distance);
            dev = dev.max((foot.normal - n_t).norm());
        }
    }
    Ok((gap, dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_unit_circle() -> BoundaryArc {
        circle_arc(Vec2::ZERO, 1.0, (0.0, PI / 2.0), BcTag::Gamma1, false).unwrap()
    }

    #[test]
    fn circle_arc_examples() {
        let outer = quarter_unit_circle();
        assert!(outer.position(0.0).dist(Vec2::new(1.0, 0.0)) < 1e-15);
        assert!(outer.outward_normal(0.0).dist(Vec2::new(1.0, 0.0)) < 1e-15);
        let p = outer.position(PI / 4.0);
        assert!((p.x - 0.7071067812).abs() < 1e-10 && (p.y - 0.7071067812).abs() < 1e-10);

        let inner = circle_arc(Vec2::ZERO, 0.5, (0.0, PI / 2.0), BcTag::Gamma0, true).unwrap();
        assert!(inner.outward_normal(0.0).dist(Vec2::new(-1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn circle_arc_rejects_bad_radius() {
        assert!(circle_arc(Vec2::ZERO, 0.0, (0.0, 1.0), BcTag::Gamma1, false).is_err());
        assert!(circle_arc(Vec2::ZERO, -1.0, (0.0, 1.0), BcTag::Gamma1, false).is_err());
        assert!(circle_arc(Vec2::ZERO, 1.0, (1.0, 1.0), BcTag::Gamma1, false).is_err());
    }

    #[test]
    fn tangent_and_normal_are_orthonormal() {
        let arcs = [
            quarter_unit_circle(),
            circle_arc(Vec2::new(0.3, -0.2), 0.5, (PI / 2.0, 0.0), BcTag::Gamma0, true).unwrap(),
            segment_arc(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), BcTag::Gamma1).unwrap(),
            cubic_arc(
                [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.5), Vec2::new(2.5, 1.5)],
                BcTag::Gamma1,
            )
            .unwrap(),
        ];
        for arc in &arcs {
            let (lo, hi) = arc.param_range();
            for i in 0..=50 {
                let t = lo + (hi - lo) * i as f64 / 50.0;
                let tg = arc.tangent(t);
                let n = arc.outward_normal(t);
                assert!((tg.norm() - 1.0).abs() < 1e-12);
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(tg.dot(n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn foot_at_chord_midpoint() {
        let arc = quarter_unit_circle();
        let s = 2f64.sqrt() / 2.0;
        let f = foot_of_perpendicular(&arc, Vec2::new(0.5, 0.5), Vec2::new(s, s), (0.0, PI / 2.0)).unwrap();
        assert!(f.point.dist(Vec2::new(s, s)) < 1e-12);
        assert!((f.distance - 0.2928932188).abs() < 1e-10);
        assert!(f.signed_distance > 0.0);
    }

    #[test]
    fn foot_at_gauss_node_matches_parameter_scan() {
        let arc = quarter_unit_circle();
        let a = Vec2::new(1.0, 0.0);
        let b = Vec2::new(0.0, 1.0);
        let n_t = (b - a).rot_cw().normalized();
        let s0 = 0.5 - 0.5 / 3f64.sqrt();
        let m = a + s0 * (b - a);
        let f = foot_of_perpendicular(&arc, m, n_t, (0.0, PI / 2.0)).unwrap();
        // brute-force oracle: scan 10^6 parameters for the smallest
        // distance from the perpendicular line
        let n = 1_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let t = PI / 2.0 * i as f64 / n as f64;
            let d = n_t.cross(arc.position(t) - m).abs();
            if d < best.0 {
                best = (d, t);
            }
        }
        let dt = PI / 2.0 / n as f64;
        assert!((f.param - best.1).abs() <= dt);
        assert!(f.point.dist(arc.position(best.1)) < 2e-6);
        assert!(n_t.cross(f.point - m).abs() <= 1e-10 * f.distance + 1e-14);
    }

    #[test]
    fn foot_at_vertex_is_vertex() {
        let arc = quarter_unit_circle();
        let a = Vec2::new(1.0, 0.0);
        let b = Vec2::new(0.0, 1.0);
        let n_t = (b - a).rot_cw().normalized();
        let f = foot_of_perpendicular(&arc, a, n_t, (0.0, PI / 2.0)).unwrap();
        assert!(f.distance < 1e-13);
        assert!(f.point.dist(a) < 1e-13);
    }

    #[test]
    fn foot_no_intersection() {
        let arc = quarter_unit_circle();
        let err = foot_of_perpendicular(&arc, Vec2::new(5.0, 5.0), Vec2::new(1.0, 0.0), (0.0, 0.1));
        assert!(matches!(err, Err(Error::NoIntersection { .. })));
    }

    #[test]
    fn generic_solver_agrees_with_circle_formula() {
        let center = Vec2::new(0.2, -0.1);
        let arc = circle_arc(center, 0.7, (0.3, 1.4), BcTag::Gamma1, false).unwrap();
        let a = arc.position(0.6);
        let b = arc.position(0.75);
        let n_t = (b - a).rot_cw().normalized();
        for i in 0..=10 {
            let m = a + (i as f64 / 10.0) * (b - a);
            let f = foot_of_perpendicular(&arc, m, n_t, (0.6, 0.75)).unwrap();
            let (p, s) = circle_line_foot(center, 0.7, m, n_t).unwrap();
            assert!(f.point.dist(p) < 1e-11);
            assert!((f.signed_distance - s).abs() < 1e-11);
        }
    }

    #[test]
    fn foot_is_stable_under_rebracketing() {
        let arc = quarter_unit_circle();
        let a = arc.position(0.2);
        let b = arc.position(0.5);
        let n_t = (b - a).rot_cw().normalized();
        let m = a + 0.3 * (b - a);
        let f = foot_of_perpendicular(&arc, m, n_t, (0.2, 0.5)).unwrap();
        let g = foot_of_perpendicular(&arc, m, n_t, (f.param - 1e-3, f.param + 1e-3)).unwrap();
        assert!(f.point.dist(g.point) < 1e-12);
    }

    #[test]
    fn foot_on_cubic_arc() {
        let arc = cubic_arc(
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.5), Vec2::new(2.5, 1.5)],
            BcTag::Gamma1,
        )
        .unwrap();
        let a = arc.position(0.4);
        let b = arc.position(0.5);
        let n_t = (b - a).rot_cw().normalized();
        let m = a + 0.25 * (b - a);
        let f = foot_of_perpendicular(&arc, m, n_t, (0.4, 0.5)).unwrap();
        assert!(arc.position(f.param).dist(f.point) < 1e-12);
        assert!(n_t.cross(f.point - m).abs() <= 1e-10 * f.distance + 1e-14);
    }

    #[test]
    fn domain_parse_and_contains() {
        let text = "\
# quarter annulus
segment 0.5 0 1 0 gamma1
circle 0 0 1 0 1.5707963267948966 gamma1 outward
segment 0 1 0 0.5 gamma1
circle 0 0 0.5 1.5707963267948966 0 gamma0 inward
";
        let d = DomainBoundary::parse(text).unwrap();
        assert_eq!(d.arcs.len(), 4);
        assert!((d.signed_area() - 3.0 * PI / 16.0).abs() < 1e-12);
        assert_eq!(d.transition_points().len(), 2);
        assert_eq!(
            d.convexity_flags(),
            vec![Convexity::Straight, Convexity::Convex, Convexity::Straight, Convexity::Concave]
        );
        assert!(d.contains(Vec2::new(0.6, 0.6)));
        assert!(!d.contains(Vec2::new(0.3, 0.3)));
        assert!(!d.contains(Vec2::new(0.72, 0.72)));
        // points between an arc and its chord
        assert!(d.contains(Vec2::new(0.69, 0.69)));
        assert!(d.contains(Vec2::new(0.36, 0.36)));
        let again = DomainBoundary::parse(&d.to_text()).unwrap();
        assert_eq!(again.arcs.len(), 4);
    }

    #[test]
    fn domain_rejects_open_loop() {
        let arcs = vec![
            segment_arc(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), BcTag::Gamma1).unwrap(),
            segment_arc(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), BcTag::Gamma1).unwrap(),
        ];
        assert!(DomainBoundary::new(arcs).is_err());
    }

    #[test]
    fn parse_errors_report_line() {
        let e = DomainBoundary::parse("segment 0 0 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = DomainBoundary::parse("\nblob 1 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }
}
