//! Synthetic (diagram, logic form, conversation) triples built from random
//! constructive geometry.
//!
//! A configuration is grown one construction at a time. Each construction is
//! drawn with probability proportional to its weight times a budget factor,
//! and rejected and redrawn whenever the result is degenerate. Shapes are then
//! annotated with the indicators their coordinates satisfy, rendered, and
//! written out as a conversation record.

mod dataset;
mod enrich;
mod ops;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CircleGeom, Vec2};
use crate::logic_form::{serialize, LogicForm, ShapeKind};
use crate::renderer::{
    derive_circles, try_render, RasterImage, RenderError, RenderStyle, DEFAULT_SIZE,
};
use crate::sub_seed;

pub use dataset::{dataset_stats, emit_dataset, DatasetStats, Manifest, HUMAN_PROMPT};
pub use enrich::{classify_triangle, enrich_indicators, indicator_holds, EnrichTolerances};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("no valid construction after {retries} attempts at step {step}")]
    ExhaustedRetries { step: usize, retries: usize },
    #[error("sample {index} failed after {restarts} restarts: {last}")]
    SampleFailed {
        index: usize,
        restarts: usize,
        last: String,
    },
    #[error("rendering failed: {0}")]
    Render(#[from] RenderError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Construction operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    /// A free point anywhere in the frame.
    Point,
    /// A segment joining two existing points.
    Segment,
    /// A polygon, either fresh or erected on an existing segment.
    Polygon,
    /// Declares a triangle already closed by three segments.
    ShapeFromLines,
    /// A circle by centre and radius, with one point on it.
    Circle,
    /// The circle through three existing points.
    CircleThrough3,
    /// A line-line, line-circle or circle-circle intersection point.
    Intersection,
    Midpoint,
    PerpendicularFoot,
    PerpendicularBisector,
    Parallel,
    AngleBisector,
    /// Incentre and incircle of an existing triangle.
    Incircle,
    /// A tangent segment touching an existing circle.
    Tangent,
}

impl Op {
    pub const ALL: [Op; 14] = [
        Op::Point,
        Op::Segment,
        Op::Polygon,
        Op::ShapeFromLines,
        Op::Circle,
        Op::CircleThrough3,
        Op::Intersection,
        Op::Midpoint,
        Op::PerpendicularFoot,
        Op::PerpendicularBisector,
        Op::Parallel,
        Op::AngleBisector,
        Op::Incircle,
        Op::Tangent,
    ];

    /// Whether the op may add points.
    pub fn adds_points(self) -> bool {
        !matches!(self, Op::Segment | Op::ShapeFromLines)
    }

    /// Whether the op may add segments.
    pub fn adds_lines(self) -> bool {
        matches!(
            self,
            Op::Segment
                | Op::Polygon
                | Op::PerpendicularFoot
                | Op::PerpendicularBisector
                | Op::Parallel
                | Op::AngleBisector
                | Op::Tangent
        )
    }

    /// Whether the op may add a polygon or circle.
    pub fn adds_shapes(self) -> bool {
        matches!(
            self,
            Op::Polygon | Op::ShapeFromLines | Op::Circle | Op::CircleThrough3 | Op::Incircle
        )
    }
}

/// Limits a configuration must respect to count as non-degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegeneracyTolerances {
    /// Minimum |sin| of the angle at every polygon vertex, and for point
    /// triples a circle is fitted through.
    pub collinearity: f64,
    pub min_separation: f64,
    /// Two circles whose centres and radii both agree within this overlap.
    pub circle_overlap: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Points must lie in `[margin, 1 - margin]`.
    pub margin: f64,
}

impl Default for DegeneracyTolerances {
    fn default() -> Self {
        Self {
            collinearity: 0.1,
            min_separation: 0.04,
            circle_overlap: 0.02,
            min_radius: 0.05,
            max_radius: 0.45,
            margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub count: usize,
    pub op_weights: BTreeMap<Op, f64>,
    pub k_min: usize,
    pub k_max: usize,
    pub tolerances: DegeneracyTolerances,
    /// Weights for polygon kinds drawn by [`Op::Polygon`].
    pub shape_weights: BTreeMap<ShapeKind, f64>,
    /// Soft caps: ops adding points, lines or shapes fade out as the
    /// respective count approaches its cap.
    pub point_cap: usize,
    pub line_cap: usize,
    pub shape_cap: usize,
    pub retries_per_op: usize,
    /// Fresh attempts at a sample, each from a derived seed, before giving up.
    pub max_restarts: usize,
    pub image_size: usize,
    pub style: RenderStyle,
}

impl Default for GenConfig {
    fn default() -> Self {
        let op_weights = [
            (Op::Point, 1.0),
            (Op::Segment, 1.6),
            (Op::Polygon, 2.0),
            (Op::ShapeFromLines, 0.25),
            (Op::Circle, 1.0),
            (Op::CircleThrough3, 0.3),
            (Op::Intersection, 1.2),
            (Op::Midpoint, 0.8),
            (Op::PerpendicularFoot, 0.8),
            (Op::PerpendicularBisector, 0.4),
            (Op::Parallel, 0.5),
            (Op::AngleBisector, 0.4),
            (Op::Incircle, 0.3),
            (Op::Tangent, 0.4),
        ];
        let shape_weights = [
            (ShapeKind::Triangle, 0.8),
            (ShapeKind::RightTriangle, 1.2),
            (ShapeKind::IsoscelesTriangle, 1.0),
            (ShapeKind::EquilateralTriangle, 0.6),
            (ShapeKind::Quadrilateral, 0.6),
            (ShapeKind::Square, 0.8),
            (ShapeKind::Rectangle, 0.8),
            (ShapeKind::Parallelogram, 0.8),
            (ShapeKind::Trapezoid, 0.6),
            (ShapeKind::Rhombus, 0.4),
            (ShapeKind::Pentagon, 0.2),
            (ShapeKind::Hexagon, 0.2),
        ];
        Self {
            seed: 0,
            count: 1,
            op_weights: op_weights.into_iter().collect(),
            k_min: 5,
            k_max: 15,
            tolerances: DegeneracyTolerances::default(),
            shape_weights: shape_weights.into_iter().collect(),
            point_cap: 5,
            line_cap: 8,
            shape_cap: 4,
            retries_per_op: 100,
            max_restarts: 32,
            image_size: DEFAULT_SIZE,
            style: RenderStyle::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |m: &str| Err(GenError::Config(m.to_string()));
        if self.k_min > self.k_max {
            return fail("k_min exceeds k_max");
        }
        if self.op_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("op weights must be finite and nonnegative");
        }
        if !self.op_weights.values().any(|w| *w > 0.0) {
            return fail("at least one op weight must be positive");
        }
        if self.op_weights.get(&Op::Polygon).copied().unwrap_or(0.0) > 0.0 {
            let ok = self
                .shape_weights
                .iter()
                .any(|(k, w)| k.is_polygon() && *w > 0.0);
            if !ok
                || self
                    .shape_weights
                    .values()
                    .any(|w| !w.is_finite() || *w < 0.0)
            {
                return fail("polygon op needs a positive polygon shape weight");
            }
        }
        if self.point_cap == 0
            || self.line_cap == 0
            || self.shape_cap == 0
            || self.retries_per_op == 0
        {
            return fail("caps and retries_per_op must be positive");
        }
        if self.image_size == 0 || self.image_size > crate::renderer::MAX_SIZE {
            return fail("image_size out of range");
        }
        let t = &self.tolerances;
        if !(t.margin >= 0.0
            && t.margin < 0.5
            && t.min_radius > 0.0
            && t.max_radius >= t.min_radius)
        {
            return fail("degeneracy tolerances out of range");
        }
        Ok(())
    }

    /// Config whose only construction is `op`.
    pub fn only(op: Op) -> Self {
        Self {
            op_weights: [(op, 1.0)].into_iter().collect(),
            ..Self::default()
        }
    }
}

/// One emitted example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub logic_form: LogicForm,
    pub image: RasterImage,
    /// The model turn: the serialized logic form.
    pub answer: String,
}

/// Name for the `i`-th point: `a` to `z`, then `a1` to `z1`, and so on.
pub fn point_name(i: usize) -> String {
    let letter = (b'a' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        n => format!("{letter}{n}"),
    }
}

/// Reasons a configuration counts as degenerate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Degeneracy {
    #[error("point {0} is outside the frame")]
    OutOfFrame(String),
    #[error("points {0} and {1} are too close")]
    TooClose(String, String),
    #[error("polygon {0} is collinear, non-convex or self-intersecting")]
    BadPolygon(String),
    #[error("circle at {0} has no usable radius")]
    BadCircle(String),
    #[error("circles at {0} and {1} overlap")]
    OverlappingCircles(String, String),
}

/// Checks a configuration against the degeneracy tolerances.
pub fn check_degeneracy(lf: &LogicForm, tol: &DegeneracyTolerances) -> Result<(), Degeneracy> {
    let lo = tol.margin;
    let hi = 1.0 - tol.margin;
    for p in &lf.points {
        if !(lo..=hi).contains(&p.x) || !(lo..=hi).contains(&p.y) {
            return Err(Degeneracy::OutOfFrame(p.name.clone()));
        }
    }
    for (i, p) in lf.points.iter().enumerate() {
        for q in &lf.points[i + 1..] {
            if p.position().distance(q.position()) < tol.min_separation {
                return Err(Degeneracy::TooClose(p.name.clone(), q.name.clone()));
            }
        }
    }
    for s in lf.shapes.iter().filter(|s| s.kind.is_polygon()) {
        let pts: Option<Vec<Vec2>> = s.vertices.iter().map(|v| lf.position(v)).collect();
        if !pts.is_some_and(|p| convex_polygon(&p, tol.collinearity)) {
            return Err(Degeneracy::BadPolygon(s.vertices.join("")));
        }
    }
    let (circles, _) = derive_circles(lf);
    let centers = lf.shapes.iter().filter_map(|s| s.center());
    for c in centers {
        let ok = circles
            .iter()
            .find(|r| r.center == c)
            .is_some_and(|r| (tol.min_radius..=tol.max_radius).contains(&r.geom.radius));
        if !ok {
            return Err(Degeneracy::BadCircle(c.to_string()));
        }
    }
    for (i, a) in circles.iter().enumerate() {
        for b in &circles[i + 1..] {
            if overlapping(&a.geom, &b.geom, tol.circle_overlap) {
                return Err(Degeneracy::OverlappingCircles(
                    a.center.clone(),
                    b.center.clone(),
                ));
            }
        }
    }
    Ok(())
}

fn overlapping(a: &CircleGeom, b: &CircleGeom, tol: f64) -> bool {
    a.center.distance(b.center) < tol && (a.radius - b.radius).abs() < tol
}

/// Strictly convex with every vertex angle away from 0 and 180 degrees.
pub(crate) fn convex_polygon(pts: &[Vec2], min_sin: f64) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0;
    let mut turning = 0.0;
    for i in 0..n {
        let u = pts[(i + 1) % n] - pts[i];
        let v = pts[(i + 2) % n] - pts[(i + 1) % n];
        let (lu, lv) = (u.norm(), v.norm());
        if lu == 0.0 || lv == 0.0 {
            return false;
        }
        let s = u.cross(v) / (lu * lv);
        if s.abs() < min_sin || (sign != 0.0 && s.signum() != sign) {
            return false;
        }
        sign = s.signum();
        turning += u.cross(v).atan2(u.dot(v));
    }
    // A convex polygon turns exactly once; star shapes turn more.
    (turning.abs() - std::f64::consts::TAU).abs() < 1e-6
}

/// Stage one: a raw configuration with no indicators.
pub fn generate_configuration(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LogicForm, GenError> {
    cfg.validate()?;
    let k = rng.random_range(cfg.k_min..=cfg.k_max);
    let mut lf = LogicForm::default();
    for step in 0..k {
        let mut applied = false;
        for _ in 0..cfg.retries_per_op {
            let op = sample_op(cfg, &lf, rng);
            let mut next = lf.clone();
            if ops::apply(op, &mut next, cfg, rng).is_some()
                && check_degeneracy(&next, &cfg.tolerances).is_ok()
            {
                lf = next;
                applied = true;
                break;
            }
        }
        if !applied {
            return Err(GenError::ExhaustedRetries {
                step,
                retries: cfg.retries_per_op,
            });
        }
    }
    Ok(lf)
}

/// Static weight times a budget factor per resource the op consumes.
fn sample_op(cfg: &GenConfig, lf: &LogicForm, rng: &mut ChaCha8Rng) -> Op {
    let budget = |count: usize, cap: usize| {
        let fill = count as f64 / cap as f64;
        (1.0 - fill * fill).max(0.02)
    };
    let points = budget(lf.points.len(), cfg.point_cap);
    let lines = budget(lf.lines.len(), cfg.line_cap);
    let shapes = budget(lf.shapes.len(), cfg.shape_cap);
    let weights: Vec<(Op, f64)> = cfg
        .op_weights
        .iter()
        .map(|(op, w)| {
            let p = if op.adds_points() { points } else { 1.0 };
            let l = if op.adds_lines() { lines } else { 1.0 };
            let g = if op.adds_shapes() { shapes } else { 1.0 };
            (*op, w * p * l * g)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for (op, w) in &weights {
        if x < *w {
            return *op;
        }
        x -= w;
    }
    weights
        .last()
        .expect("validated: some weight is positive")
        .0
}

/// Stages one and three for sample `index`: an enriched configuration,
/// restarting from derived seeds when the retry budget runs out.
pub fn generate_logic_form(cfg: &GenConfig, index: usize) -> Result<LogicForm, GenError> {
    cfg.validate()?;
    let base = sub_seed(cfg.seed, index as u64);
    let mut last = String::new();
    for restart in 0..=cfg.max_restarts {
        let seed = if restart == 0 {
            base
        } else {
            sub_seed(base, restart as u64)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match generate_configuration(cfg, &mut rng) {
            Ok(raw) => return Ok(enrich_indicators(&raw, &EnrichTolerances::default())),
            Err(e @ GenError::ExhaustedRetries { .. }) => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Err(GenError::SampleFailed {
        index,
        restarts: cfg.max_restarts,
        last,
    })
}

/// One complete sample: enriched logic form, rendered image and answer text.
pub fn generate_sample(cfg: &GenConfig, index: usize) -> Result<Sample, GenError> {
    let lf = generate_logic_form(cfg, index)?;
    let (image, _) = try_render(&lf, &cfg.style, cfg.image_size)?;
    let answer = serialize(&lf);
    Ok(Sample {
        id: format!("sample_{index}"),
        logic_form: lf,
        image,
        answer,
    })
}

#[cfg(test)]
mod tests;
