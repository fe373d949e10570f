//! Computational-geometry kernels shared by the generator and the decoder.
//!
//! All routines work in plain `f64` on unit-square scale. Degenerate inputs
//! (collinear triples, coincident points, rank-deficient fits) are reported
//! through [`GeometryError`] rather than producing NaNs.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// |signed twice-area| below this counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;
/// Distance below which two points are treated as coincident.
pub const COINCIDENT_TOL: f64 = 1e-12;
/// Largest accepted condition number of the circle-fit normal matrix.
pub const FIT_CONDITION_LIMIT: f64 = 1e12;
/// Relative radial error above which a least-squares circle fit is rejected.
pub const FIT_REJECT_RATIO: f64 = 0.10;

const INTERSECT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error(
        "circle fit rejected: max radial error {max_error:.6} exceeds 10% of radius {radius:.6}"
    )]
    FitRejected { max_error: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
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

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > COINCIDENT_TOL).then(|| self / n)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleGeom {
    pub center: Vec2,
    pub radius: f64,
}

impl CircleGeom {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !radius.is_finite() || radius <= 0.0 {
            return Err(GeometryError::Degenerate(
                "circle radius must be positive and finite",
            ));
        }
        Ok(Self { center, radius })
    }
}

/// An infinite line through two distinct points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGeom {
    pub p: Vec2,
    pub q: Vec2,
}

impl LineGeom {
    pub fn new(p: Vec2, q: Vec2) -> Self {
        Self { p, q }
    }

    pub fn direction(&self) -> Vec2 {
        self.q - self.p
    }

    /// Distance from `pt` to the infinite line.
    pub fn distance_to(&self, pt: Vec2) -> f64 {
        let d = self.direction();
        (d.cross(pt - self.p)).abs() / d.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Line(LineGeom),
    Circle(CircleGeom),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Intersection {
    /// Zero, one or two crossing points.
    Points(Vec<Vec2>),
    /// The primitives coincide; the intersection is not a finite set.
    Coincident,
}

impl Intersection {
    pub fn points(&self) -> &[Vec2] {
        match self {
            Intersection::Points(p) => p,
            Intersection::Coincident => &[],
        }
    }
}

/// Twice the signed area of the triangle `abc` (positive when counter-clockwise).
pub fn twice_signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

pub fn is_collinear(a: Vec2, b: Vec2, c: Vec2) -> bool {
    twice_signed_area(a, b, c).abs() < COLLINEAR_TOL
}

/// Radius of a circle centred at `center` passing through `p`.
pub fn point_circle_radius(p: Vec2, center: Vec2) -> Result<f64, GeometryError> {
    let r = p.distance(center);
    if r <= COINCIDENT_TOL {
        return Err(GeometryError::Degenerate(
            "point coincides with circle center",
        ));
    }
    Ok(r)
}

/// Inscribed-circle radius `A / s`, with the area from Heron's formula.
pub fn incircle_radius(v1: Vec2, v2: Vec2, v3: Vec2) -> Result<f64, GeometryError> {
    if is_collinear(v1, v2, v3) {
        return Err(GeometryError::Degenerate("triangle vertices are collinear"));
    }
    let mut sides = [v2.distance(v3), v1.distance(v3), v1.distance(v2)];
    sides.sort_by(|a, b| b.total_cmp(a));
    let [a, b, c] = sides;
    let s = 0.5 * (a + b + c);
    // Heron in the cancellation-free ordering (a >= b >= c).
    let area = 0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).sqrt();
    if area.is_nan() || area <= 0.0 {
        return Err(GeometryError::Degenerate("triangle has zero area"));
    }
    Ok(area / s)
}

/// Least-squares circle through `points` using the linearisation
/// `x² + y² = 2ax + 2by + c`, with `r = sqrt(c + a² + b²)`.
///
/// The normal equations are formed on centred, RMS-scaled coordinates; the
/// model is similarity-equivariant so this changes conditioning only.
pub fn circumcircle_fit(points: &[Vec2]) -> Result<CircleGeom, GeometryError> {
    let circle = circumcircle_fit_unchecked(points)?;
    let max_error = max_radial_error(points, &circle);
    if max_error > FIT_REJECT_RATIO * circle.radius {
        return Err(GeometryError::FitRejected {
            max_error,
            radius: circle.radius,
        });
    }
    Ok(circle)
}

/// The least-squares solve without the 10% rejection rule.
pub fn circumcircle_fit_unchecked(points: &[Vec2]) -> Result<CircleGeom, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::Degenerate(
            "circle fit needs at least three points",
        ));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::Degenerate("non-finite point"));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec2::default(), |acc, &p| acc + p) / n;
    let scale = (points
        .iter()
        .map(|&p| (p - centroid).norm_sq())
        .sum::<f64>()
        / n)
        .sqrt();
    if scale <= COINCIDENT_TOL {
        return Err(GeometryError::Degenerate("all points coincide"));
    }

    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &p in points {
        let q = (p - centroid) / scale;
        let row = Vector3::new(q.x, q.y, 1.0);
        ata += row * row.transpose();
        atb += row * q.norm_sq();
    }

    let eig = ata.symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    if min_ev.is_nan() || min_ev <= 0.0 || max_ev / min_ev > FIT_CONDITION_LIMIT {
        return Err(GeometryError::Degenerate(
            "circle fit system is rank-deficient",
        ));
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or(GeometryError::Degenerate("circle fit system is singular"))?;

    let a = 0.5 * sol[0];
    let b = 0.5 * sol[1];
    let r2 = sol[2] + a * a + b * b;
    if r2.is_nan() || r2 <= 0.0 {
        return Err(GeometryError::Degenerate(
            "circle fit produced non-positive radius",
        ));
    }
    let center = centroid + Vec2::new(a, b) * scale;
    CircleGeom::new(center, r2.sqrt() * scale)
}

/// `max_i | ‖p_i − c‖ − r |`.
pub fn max_radial_error(points: &[Vec2], circle: &CircleGeom) -> f64 {
    points
        .iter()
        .map(|p| (p.distance(circle.center) - circle.radius).abs())
        .fold(0.0, f64::max)
}

pub fn intersections(a: &Primitive, b: &Primitive) -> Intersection {
    match (a, b) {
        (Primitive::Line(l1), Primitive::Line(l2)) => line_line(l1, l2),
        (Primitive::Line(l), Primitive::Circle(c)) | (Primitive::Circle(c), Primitive::Line(l)) => {
            line_circle(l, c)
        }
        (Primitive::Circle(c1), Primitive::Circle(c2)) => circle_circle(c1, c2),
    }
}

fn line_line(l1: &LineGeom, l2: &LineGeom) -> Intersection {
    let d1 = l1.direction();
    let d2 = l2.direction();
    let denom = d1.cross(d2);
    let scale = d1.norm() * d2.norm();
    if denom.abs() <= INTERSECT_TOL * scale {
        if l1.distance_to(l2.p) <= INTERSECT_TOL {
            return Intersection::Coincident;
        }
        return Intersection::Points(Vec::new());
    }
    let t = (l2.p - l1.p).cross(d2) / denom;
    Intersection::Points(vec![l1.p + d1 * t])
}

fn line_circle(l: &LineGeom, c: &CircleGeom) -> Intersection {
    let d = match l.direction().normalized() {
        Some(d) => d,
        None => return Intersection::Points(Vec::new()),
    };
    // Foot of the perpendicular from the centre, then step along the line.
    let foot = l.p + d * (c.center - l.p).dot(d);
    let h = foot.distance(c.center);
    if h > c.radius + INTERSECT_TOL {
        return Intersection::Points(Vec::new());
    }
    let half = (c.radius * c.radius - h * h).max(0.0).sqrt();
    if half <= INTERSECT_TOL {
        return Intersection::Points(vec![foot]);
    }
    let mut pts = vec![foot - d * half, foot + d * half];
    sort_points(&mut pts);
    Intersection::Points(pts)
}

fn circle_circle(c1: &CircleGeom, c2: &CircleGeom) -> Intersection {
    let delta = c2.center - c1.center;
    let d = delta.norm();
    if d <= INTERSECT_TOL {
        if (c1.radius - c2.radius).abs() <= INTERSECT_TOL {
            return Intersection::Coincident;
        }
        return Intersection::Points(Vec::new());
    }
    if d > c1.radius + c2.radius + INTERSECT_TOL
        || d < (c1.radius - c2.radius).abs() - INTERSECT_TOL
    {
        return Intersection::Points(Vec::new());
    }
    let a = (c1.radius * c1.radius - c2.radius * c2.radius + d * d) / (2.0 * d);
    let h = (c1.radius * c1.radius - a * a).max(0.0).sqrt();
    let u = delta / d;
    let base = c1.center + u * a;
    if h <= INTERSECT_TOL {
        return Intersection::Points(vec![base]);
    }
    let mut pts = vec![base + u.perp() * h, base - u.perp() * h];
    sort_points(&mut pts);
    Intersection::Points(pts)
}

// Orders results so that intersections(a, b) and intersections(b, a) agree.
fn sort_points(pts: &mut [Vec2]) {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
}

/// Standard Euclidean constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Construction {
    Midpoint(Vec2, Vec2),
    /// Foot of the perpendicular from `point` onto the line through `a` and `b`.
    PerpendicularFoot {
        point: Vec2,
        a: Vec2,
        b: Vec2,
    },
    Circumcenter(Vec2, Vec2, Vec2),
    Incenter(Vec2, Vec2, Vec2),
    /// Where the bisector of the angle at `vertex` meets the segment `a`–`c`.
    AngleBisectorPoint {
        vertex: Vec2,
        a: Vec2,
        c: Vec2,
    },
}

pub fn derived_point(kind: Construction) -> Result<Vec2, GeometryError> {
    match kind {
        Construction::Midpoint(a, b) => Ok((a + b) * 0.5),
        Construction::PerpendicularFoot { point, a, b } => {
            let d = b - a;
            let len2 = d.norm_sq();
            if len2 <= COINCIDENT_TOL * COINCIDENT_TOL {
                return Err(GeometryError::Degenerate("line endpoints coincide"));
            }
            Ok(a + d * ((point - a).dot(d) / len2))
        }
        Construction::Circumcenter(a, b, c) => {
            let d = 2.0 * twice_signed_area(a, b, c);
            if d.abs() < 2.0 * COLLINEAR_TOL {
                return Err(GeometryError::Degenerate("triangle vertices are collinear"));
            }
            let (ab, ac) = (b - a, c - a);
            let ux = (ac.y * ab.norm_sq() - ab.y * ac.norm_sq()) / d;
            let uy = (ab.x * ac.norm_sq() - ac.x * ab.norm_sq()) / d;
            Ok(a + Vec2::new(ux, uy))
        }
        Construction::Incenter(a, b, c) => {
            if is_collinear(a, b, c) {
                return Err(GeometryError::Degenerate("triangle vertices are collinear"));
            }
            let la = b.distance(c);
            let lb = a.distance(c);
            let lc = a.distance(b);
            Ok((a * la + b * lb + c * lc) / (la + lb + lc))
        }
        Construction::AngleBisectorPoint { vertex, a, c } => {
            if is_collinear(vertex, a, c) {
                return Err(GeometryError::Degenerate("angle arms are collinear"));
            }
            // Angle-bisector theorem: the foot splits ac in ratio |va| : |vc|.
            let la = vertex.distance(a);
            let lc = vertex.distance(c);
            Ok(a + (c - a) * (la / (la + lc)))
        }
    }
}

/// Interior angle at `vertex` in radians, in `[0, π]`.
pub fn angle_at(vertex: Vec2, a: Vec2, c: Vec2) -> Option<f64> {
    let u = (a - vertex).normalized()?;
    let v = (c - vertex).normalized()?;
    Some(u.cross(v).atan2(u.dot(v)).abs())
}

/// Acute angle between two directions in radians, in `[0, π/2]`.
pub fn angle_between_lines(d1: Vec2, d2: Vec2) -> Option<f64> {
    let u = d1.normalized()?;
    let v = d2.normalized()?;
    let a = u.cross(v).atan2(u.dot(v)).abs();
    Some(if a > std::f64::consts::FRAC_PI_2 {
        std::f64::consts::PI - a
    } else {
        a
    })
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.distance(a + d * t)
}

/// Crossing point of the open segments `a`–`b` and `c`–`d`, if any.
pub fn segment_crossing(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<(Vec2, f64, f64)> {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom.abs() < COLLINEAR_TOL {
        return None;
    }
    let t = (c - a).cross(s) / denom;
    let u = (c - a).cross(r) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then(|| (a + r * t, t, u))
}
