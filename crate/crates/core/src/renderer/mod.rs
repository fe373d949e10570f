//! Deterministic decoder from logic forms to raster diagrams.
//!
//! Circle radii are derived from the relations, a square viewport with a 40%
//! margin is fitted around all geometry, and lines, circles, point markers and
//! labels are rasterized with coverage anti-aliasing. Anything that prevents a
//! render produces an all-black image through [`render`].

mod font;
mod image;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    circumcircle_fit, distance_to_segment, incircle_radius, point_circle_radius, CircleGeom, Vec2,
    FIT_REJECT_RATIO,
};
use crate::logic_form::{canonicalize, parse, LogicForm, LogicFormError, RelationKind, Term};

pub use image::{ImageError, RasterImage};

pub const DEFAULT_SIZE: usize = 512;
pub const VIEWPORT_MARGIN: f64 = 0.4;
pub const MIN_EXTENT: f64 = 0.2;
/// Largest accepted output side, guarding service callers against huge allocations.
pub const MAX_SIZE: usize = 4096;
const REFERENCE_SIZE: f64 = 512.0;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("logic form does not parse: {0}")]
    Parse(#[from] LogicFormError),
    #[error("logic form has no points")]
    EmptyGeometry,
    #[error("image size must be between 1 and {MAX_SIZE}, got {0}")]
    BadSize(usize),
    #[error("non-finite geometry")]
    NonFinite,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Drawing parameters. Pixel quantities are given at 512 px and scale with
/// the output size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub background: [f32; 3],
    pub line_color: [f32; 3],
    pub line_width: f64,
    pub line_opacity: f32,
    pub circle_color: [f32; 3],
    pub circle_width: f64,
    pub circle_opacity: f32,
    pub marker_color: [f32; 3],
    pub marker_radius: f64,
    pub label_color: [f32; 3],
    pub label_offset: f64,
    /// Integer magnification of the 5x7 glyphs.
    pub label_scale: usize,
    pub draw_markers: bool,
    pub draw_labels: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            background: [1.0, 1.0, 1.0],
            line_color: [0.0, 0.0, 0.0],
            line_width: 1.2,
            line_opacity: 0.8,
            circle_color: [0.0, 0.0, 1.0],
            circle_width: 1.2,
            circle_opacity: 0.8,
            marker_color: [0.0, 0.0, 0.0],
            marker_radius: 3.0,
            label_color: [0.0, 0.0, 0.0],
            label_offset: 8.0,
            label_scale: 2,
            draw_markers: true,
            draw_labels: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CircleSource {
    Explicit,
    PointOnCircle,
    Concyclic,
    Incircle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedCircle {
    pub center: String,
    pub geom: CircleGeom,
    pub source: CircleSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum RenderWarning {
    UnresolvedCircle { center: String },
    RejectedFit { points: Vec<String>, reason: String },
}

impl fmt::Display for RenderWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderWarning::UnresolvedCircle { center } => {
                write!(
                    f,
                    "circle at `{center}` has no resolvable radius and was dropped"
                )
            }
            RenderWarning::RejectedFit { points, reason } => {
                write!(
                    f,
                    "ConcyclicPoints({}) not fitted: {reason}",
                    points.join(", ")
                )
            }
        }
    }
}

/// Circle centres in order of first mention, from shapes then relations.
fn circle_centers(lf: &LogicForm) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |c: &str| {
        if !out.iter().any(|o| o == c) {
            out.push(c.to_string());
        }
    };
    for s in &lf.shapes {
        if let Some(c) = s.center() {
            push(c);
        }
    }
    for r in &lf.relations {
        for t in &r.arguments {
            if let Term::Circle { center, .. } = t {
                push(center);
            }
        }
    }
    out
}

fn circle_arg(t: &Term) -> Option<&str> {
    match t {
        Term::Circle { center, .. } => Some(center),
        _ => None,
    }
}

/// Resolves a radius for every circle. Priority: explicit radius, then
/// PointLiesOnCircle distance, then a ConcyclicPoints least-squares fit whose
/// centre agrees with the declared centre, then the Incircle of a triangle.
pub fn derive_circles(lf: &LogicForm) -> (Vec<ResolvedCircle>, Vec<RenderWarning>) {
    let mut warnings = Vec::new();

    let mut fits = Vec::new();
    for r in lf
        .relations
        .iter()
        .filter(|r| r.kind == RelationKind::ConcyclicPoints)
    {
        let names: Vec<String> = r
            .arguments
            .iter()
            .flat_map(|t| t.point_names())
            .map(String::from)
            .collect();
        let pts: Option<Vec<Vec2>> = names.iter().map(|n| lf.position(n)).collect();
        let Some(pts) = pts else { continue };
        match circumcircle_fit(&pts) {
            Ok(fit) => fits.push(fit),
            Err(e) => warnings.push(RenderWarning::RejectedFit {
                points: names,
                reason: e.to_string(),
            }),
        }
    }

    let mut circles = Vec::new();
    for center in circle_centers(lf) {
        let Some(c) = lf.position(&center) else {
            continue;
        };
        let resolved = explicit_radius(lf, &center)
            .map(|r| (r, CircleSource::Explicit))
            .or_else(|| {
                point_on_circle_radius(lf, &center, c).map(|r| (r, CircleSource::PointOnCircle))
            })
            .or_else(|| {
                fits.iter()
                    .find(|f| f.center.distance(c) <= FIT_REJECT_RATIO * f.radius)
                    .map(|f| (f.radius, CircleSource::Concyclic))
            })
            .or_else(|| incircle(lf, &center).map(|r| (r, CircleSource::Incircle)));
        match resolved.and_then(|(r, src)| CircleGeom::new(c, r).ok().map(|g| (g, src))) {
            Some((geom, source)) => circles.push(ResolvedCircle {
                center,
                geom,
                source,
            }),
            None => warnings.push(RenderWarning::UnresolvedCircle { center }),
        }
    }
    (circles, warnings)
}

fn explicit_radius(lf: &LogicForm, center: &str) -> Option<f64> {
    lf.shapes
        .iter()
        .filter(|s| s.center() == Some(center))
        .find_map(|s| s.radius)
        .or_else(|| {
            lf.relations
                .iter()
                .flat_map(|r| &r.arguments)
                .find_map(|t| match t {
                    Term::Circle {
                        center: c,
                        radius: Some(r),
                    } if c == center => Some(*r),
                    _ => None,
                })
        })
}

fn point_on_circle_radius(lf: &LogicForm, center: &str, c: Vec2) -> Option<f64> {
    lf.relations
        .iter()
        .filter(|r| r.kind == RelationKind::PointLiesOnCircle)
        .filter(|r| r.arguments.get(1).and_then(circle_arg) == Some(center))
        .find_map(|r| match &r.arguments[0] {
            Term::Point { name } => lf
                .position(name)
                .and_then(|p| point_circle_radius(p, c).ok()),
            _ => None,
        })
}

fn incircle(lf: &LogicForm, center: &str) -> Option<f64> {
    lf.relations
        .iter()
        .filter(|r| r.kind == RelationKind::Incircle)
        .filter(|r| r.arguments.first().and_then(circle_arg) == Some(center))
        .find_map(|r| match r.arguments.get(1) {
            Some(Term::Shape { kind, vertices }) if kind.is_triangle() => {
                let v: Option<Vec<Vec2>> = vertices.iter().map(|n| lf.position(n)).collect();
                let v = v?;
                incircle_radius(v[0], v[1], v[2]).ok()
            }
            _ => None,
        })
}

/// Visible region in display coordinates, where display y is `1 - y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Viewport {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Whether a logic-space point lies inside (display y flipped).
    pub fn contains(&self, p: Vec2) -> bool {
        let y = 1.0 - p.y;
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&y)
    }

    /// Continuous pixel coordinates (origin at the top-left image corner) of
    /// a logic-space point on a `size`×`size` canvas.
    pub fn to_pixel(&self, p: Vec2, size: usize) -> Vec2 {
        let s = size as f64;
        let yd = 1.0 - p.y;
        Vec2::new(
            (p.x - self.x_min) / self.width() * s,
            (self.y_max - yd) / self.height() * s,
        )
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    let (lo, hi) = if hi - lo < MIN_EXTENT {
        let mid = 0.5 * (lo + hi);
        (mid - 0.5 * MIN_EXTENT, mid + 0.5 * MIN_EXTENT)
    } else {
        (lo, hi)
    };
    let d = hi - lo;
    (lo - VIEWPORT_MARGIN * d, hi + VIEWPORT_MARGIN * d)
}

/// Bounding box of all points and circle extents before margins, in display
/// coordinates.
pub fn content_bounds(lf: &LogicForm, circles: &[ResolvedCircle]) -> Option<Viewport> {
    let mut it = lf
        .points
        .iter()
        .map(|p| (p.x, p.x, 1.0 - p.y, 1.0 - p.y))
        .chain(circles.iter().map(|c| {
            let (x, y, r) = (c.geom.center.x, 1.0 - c.geom.center.y, c.geom.radius);
            (x - r, x + r, y - r, y + r)
        }));
    let first = it.next()?;
    let (x0, x1, y0, y1) = it.fold(first, |a, b| {
        (a.0.min(b.0), a.1.max(b.1), a.2.min(b.2), a.3.max(b.3))
    });
    Some(Viewport {
        x_min: x0,
        x_max: x1,
        y_min: y0,
        y_max: y1,
    })
}

/// Square viewport: content bounds, floored to a minimum extent, widened by
/// the margin on every side, then the shorter axis grown symmetrically.
pub fn viewport(lf: &LogicForm, circles: &[ResolvedCircle]) -> Result<Viewport, RenderError> {
    if lf.points.is_empty() {
        return Err(RenderError::EmptyGeometry);
    }
    let b = content_bounds(lf, circles).ok_or(RenderError::EmptyGeometry)?;
    let (x_min, x_max) = widen(b.x_min, b.x_max);
    let (y_min, y_max) = widen(b.y_min, b.y_max);
    let mut v = Viewport {
        x_min,
        x_max,
        y_min,
        y_max,
    };
    if ![v.x_min, v.x_max, v.y_min, v.y_max]
        .iter()
        .all(|c| c.is_finite())
    {
        return Err(RenderError::NonFinite);
    }
    let (w, h) = (v.width(), v.height());
    if w > h {
        v.y_min -= 0.5 * (w - h);
        v.y_max += 0.5 * (w - h);
    } else if h > w {
        v.x_min -= 0.5 * (h - w);
        v.x_max += 0.5 * (h - w);
    }
    Ok(v)
}

/// Renders `lf`, or explains why it cannot be rendered.
pub fn try_render(
    lf: &LogicForm,
    style: &RenderStyle,
    size: usize,
) -> Result<(RasterImage, Vec<RenderWarning>), RenderError> {
    if size == 0 || size > MAX_SIZE {
        return Err(RenderError::BadSize(size));
    }
    let lf = canonicalize(lf);
    let (circles, warnings) = derive_circles(&lf);
    let vp = viewport(&lf, &circles)?;
    let k = size as f64 / REFERENCE_SIZE;
    let px_per_unit = size as f64 / vp.width();

    let mut canvas = RasterImage::white(size, size)?;
    if style.background != [1.0; 3] {
        for y in 0..size {
            for x in 0..size {
                canvas.set_pixel(x, y, style.background);
            }
        }
    }

    let pos: HashMap<&str, Vec2> = lf
        .points
        .iter()
        .map(|p| (p.name.as_str(), vp.to_pixel(p.position(), size)))
        .collect();

    let segments: Vec<(Vec2, Vec2)> = lf
        .lines
        .iter()
        .filter_map(|l| Some((*pos.get(l.a.as_str())?, *pos.get(l.b.as_str())?)))
        .collect();
    let rings: Vec<(Vec2, f64)> = circles
        .iter()
        .map(|c| {
            (
                vp.to_pixel(c.geom.center, size),
                c.geom.radius * px_per_unit,
            )
        })
        .collect();

    let half_line = 0.5 * style.line_width * k;
    for &(a, b) in &segments {
        stroke_segment(
            &mut canvas,
            a,
            b,
            half_line,
            style.line_color,
            style.line_opacity,
        );
    }
    let half_circle = 0.5 * style.circle_width * k;
    for &(c, r) in &rings {
        stroke_ring(
            &mut canvas,
            c,
            r,
            half_circle,
            style.circle_color,
            style.circle_opacity,
        );
    }
    let marker = style.marker_radius * k;
    if style.draw_markers {
        for p in &lf.points {
            fill_disk(
                &mut canvas,
                pos[p.name.as_str()],
                marker,
                style.marker_color,
            );
        }
    }
    if style.draw_labels {
        let scale = ((style.label_scale as f64 * k).round() as usize).max(1);
        let mut layout = LabelLayout {
            segments: &segments,
            rings: &rings,
            markers: lf.points.iter().map(|p| pos[p.name.as_str()]).collect(),
            marker_radius: marker,
            stroke_half: half_line.max(half_circle),
            offset: style.label_offset * k,
            scale,
            size,
            placed: Vec::new(),
        };
        for (i, p) in lf.points.iter().enumerate() {
            let rect = layout.place(i, &p.name, &lf, &pos);
            draw_text(&mut canvas, &p.name, rect, scale, style.label_color);
        }
    }
    Ok((canvas, warnings))
}

/// Renders `lf`; any failure yields an all-black image of the requested size.
pub fn render(lf: &LogicForm, style: &RenderStyle, size: usize) -> RasterImage {
    match try_render(lf, style, size) {
        Ok((img, _)) => img,
        Err(_) => black(size),
    }
}

/// Parses and renders logic-form text with the same failure semantics as
/// [`render`].
pub fn render_text(text: &str, style: &RenderStyle, size: usize) -> RasterImage {
    match parse(text) {
        Ok(lf) => render(&lf, style, size),
        Err(_) => black(size),
    }
}

fn black(size: usize) -> RasterImage {
    RasterImage::black(size.clamp(1, MAX_SIZE), size.clamp(1, MAX_SIZE)).expect("positive size")
}

/// Coverage of a pixel whose centre is `d` px from a stroke's centreline.
fn coverage(d: f64, half: f64) -> f32 {
    ((half + 0.5 - d).clamp(0.0, 1.0) - (0.5 - half - d).clamp(0.0, 1.0)) as f32
}

fn row_range(size: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let a = (lo - 0.5).ceil().max(0.0);
    let b = (hi - 0.5).floor() + 1.0;
    let b = b.min(size as f64);
    if b <= a {
        0..0
    } else {
        a as usize..b as usize
    }
}

fn stroke_segment(
    img: &mut RasterImage,
    a: Vec2,
    b: Vec2,
    half: f64,
    color: [f32; 3],
    opacity: f32,
) {
    let reach = half + 1.0;
    let size = img.width();
    let d = b - a;
    let n = d
        .normalized()
        .map(Vec2::perp)
        .unwrap_or(Vec2::new(0.0, 0.0))
        * reach;
    let corners = [a + n, b + n, b - n, a - n];
    for j in row_range(size, a.y.min(b.y) - reach, a.y.max(b.y) + reach) {
        let yc = j as f64 + 0.5;
        // The capsule is convex, so its cross-section is one interval.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in [a, b] {
            let dy = yc - p.y;
            if dy.abs() <= reach {
                let w = (reach * reach - dy * dy).sqrt();
                lo = lo.min(p.x - w);
                hi = hi.max(p.x + w);
            }
        }
        for i in 0..4 {
            let (p, q) = (corners[i], corners[(i + 1) % 4]);
            if (p.y - yc) * (q.y - yc) <= 0.0 && p.y != q.y {
                let x = p.x + (yc - p.y) / (q.y - p.y) * (q.x - p.x);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        for i in row_range(size, lo, hi) {
            let c = Vec2::new(i as f64 + 0.5, yc);
            let cov = coverage(distance_to_segment(c, a, b), half);
            img.blend(i, j, color, opacity * cov);
        }
    }
}

fn stroke_ring(img: &mut RasterImage, c: Vec2, r: f64, half: f64, color: [f32; 3], opacity: f32) {
    let reach = half + 1.0;
    let size = img.width();
    let (ro, ri) = (r + reach, r - reach);
    for j in row_range(size, c.y - ro, c.y + ro) {
        let yc = j as f64 + 0.5;
        let dy = yc - c.y;
        let xo = (ro * ro - dy * dy).max(0.0).sqrt();
        let spans = if ri > 0.0 && dy.abs() < ri {
            let xi = (ri * ri - dy * dy).sqrt();
            vec![(c.x - xo, c.x - xi), (c.x + xi, c.x + xo)]
        } else {
            vec![(c.x - xo, c.x + xo)]
        };
        for (lo, hi) in spans {
            for i in row_range(size, lo, hi) {
                let p = Vec2::new(i as f64 + 0.5, yc);
                let cov = coverage((p.distance(c) - r).abs(), half);
                img.blend(i, j, color, opacity * cov);
            }
        }
    }
}

fn fill_disk(img: &mut RasterImage, c: Vec2, r: f64, color: [f32; 3]) {
    let size = img.width();
    for j in row_range(size, c.y - r - 1.0, c.y + r + 1.0) {
        for i in row_range(size, c.x - r - 1.0, c.x + r + 1.0) {
            let d = Vec2::new(i as f64 + 0.5, j as f64 + 0.5).distance(c);
            let cov = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
            img.blend(i, j, color, cov);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    fn inflate(&self, m: f64) -> Rect {
        Rect {
            x0: self.x0 - m,
            y0: self.y0 - m,
            x1: self.x1 + m,
            y1: self.y1 + m,
        }
    }

    fn distance_to(&self, p: Vec2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    fn max_distance_to(&self, p: Vec2) -> f64 {
        let dx = (p.x - self.x0).abs().max((p.x - self.x1).abs());
        let dy = (p.y - self.y0).abs().max((p.y - self.y1).abs());
        dx.hypot(dy)
    }

    fn hits_segment(&self, a: Vec2, b: Vec2) -> bool {
        // Liang-Barsky clip of the segment against the rectangle.
        let d = b - a;
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for (p, q) in [
            (-d.x, a.x - self.x0),
            (d.x, self.x1 - a.x),
            (-d.y, a.y - self.y0),
            (d.y, self.y1 - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        t0 <= t1
    }
}

const COMPASS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (
        std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
    ),
    (0.0, -1.0),
    (
        -std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
    ),
    (-1.0, 0.0),
    (
        -std::f64::consts::FRAC_1_SQRT_2,
        std::f64::consts::FRAC_1_SQRT_2,
    ),
    (0.0, 1.0),
    (
        std::f64::consts::FRAC_1_SQRT_2,
        std::f64::consts::FRAC_1_SQRT_2,
    ),
];

struct LabelLayout<'a> {
    segments: &'a [(Vec2, Vec2)],
    rings: &'a [(Vec2, f64)],
    markers: Vec<Vec2>,
    marker_radius: f64,
    stroke_half: f64,
    offset: f64,
    scale: usize,
    size: usize,
    placed: Vec<Rect>,
}

impl LabelLayout<'_> {
    /// Greedy placement: compass directions ordered by closeness to the
    /// direction pointing away from incident strokes; the first one free of
    /// conflicts wins, otherwise the least conflicted.
    fn place(
        &mut self,
        index: usize,
        name: &str,
        lf: &LogicForm,
        pos: &HashMap<&str, Vec2>,
    ) -> Rect {
        let p = self.markers[index];
        let mut pull = Vec2::new(0.0, 0.0);
        for l in lf.lines.iter().filter(|l| l.touches(name)) {
            let other = if l.a == name { &l.b } else { &l.a };
            if let Some(u) = (pos[other.as_str()] - p).normalized() {
                pull = pull + u;
            }
        }
        for &(c, r) in self.rings {
            if ((p.distance(c)) - r).abs() < 2.0 {
                if let Some(u) = (c - p).normalized() {
                    pull = pull + u;
                }
            }
        }
        let preferred = (-pull).normalized().unwrap_or(Vec2::new(
            std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
        ));
        let mut order: Vec<usize> = (0..8).collect();
        order.sort_by(|&i, &j| {
            let di = Vec2::new(COMPASS[i].0, COMPASS[i].1).dot(preferred);
            let dj = Vec2::new(COMPASS[j].0, COMPASS[j].1).dot(preferred);
            dj.total_cmp(&di).then(i.cmp(&j))
        });

        let (w, h) = font::text_size(name, self.scale);
        let (w, h) = (w as f64, h as f64);
        let s = self.size as f64;
        let mut best: Option<((u32, u32), Rect)> = None;
        for &i in &order {
            let dir = Vec2::new(COMPASS[i].0, COMPASS[i].1);
            let anchor = p + dir * self.offset;
            let cx = anchor.x + dir.x * 0.5 * w;
            let cy = anchor.y + dir.y * 0.5 * h;
            let rect = Rect {
                x0: cx - 0.5 * w,
                y0: cy - 0.5 * h,
                x1: cx + 0.5 * w,
                y1: cy + 0.5 * h,
            };
            let mut hard = 0u32;
            if rect.x0 < 0.0 || rect.y0 < 0.0 || rect.x1 > s || rect.y1 > s {
                hard += 1;
            }
            hard += self
                .placed
                .iter()
                .filter(|o| o.inflate(1.0).overlaps(&rect))
                .count() as u32;
            hard += self
                .markers
                .iter()
                .filter(|m| rect.distance_to(**m) < self.marker_radius)
                .count() as u32;
            let grown = rect.inflate(self.stroke_half);
            let soft = self
                .segments
                .iter()
                .filter(|(a, b)| grown.hits_segment(*a, *b))
                .count()
                + self
                    .rings
                    .iter()
                    .filter(|(c, r)| grown.distance_to(*c) <= *r && *r <= grown.max_distance_to(*c))
                    .count();
            let score = (hard, soft as u32);
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, rect));
            }
            if score == (0, 0) {
                break;
            }
        }
        let mut rect = best.expect("eight candidates").1;
        // Keep the label on the canvas even when every candidate spills over.
        let dx = (-rect.x0).max(0.0) - (rect.x1 - s).max(0.0);
        let dy = (-rect.y0).max(0.0) - (rect.y1 - s).max(0.0);
        rect = Rect {
            x0: rect.x0 + dx,
            x1: rect.x1 + dx,
            y0: rect.y0 + dy,
            y1: rect.y1 + dy,
        };
        self.placed.push(rect);
        rect
    }
}

fn draw_text(img: &mut RasterImage, text: &str, rect: Rect, scale: usize, color: [f32; 3]) {
    let x0 = rect.x0.round() as i64;
    let y0 = rect.y0.round() as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    for (k, ch) in text.chars().enumerate() {
        let gx = x0 + (k * (font::GLYPH_W + 1) * scale) as i64;
        for row in 0..font::GLYPH_H {
            for col in 0..font::GLYPH_W {
                if !font::is_set(ch, col, row) {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let x = gx + (col * scale + dx) as i64;
                        let y = y0 + (row * scale + dy) as i64;
                        if (0..w).contains(&x) && (0..h).contains(&y) {
                            img.blend(x as usize, y as usize, color, 1.0);
                        }
                    }
                }
            }
        }
    }
}

/// Whether a logic form is rendered through the failure path.
pub fn renders_black(lf: &LogicForm, size: usize) -> bool {
    try_render(lf, &RenderStyle::default(), size).is_err()
}

#[cfg(test)]
mod tests;
