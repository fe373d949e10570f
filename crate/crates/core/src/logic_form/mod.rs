//! The logic-form language: a symbolic description of a geometric diagram as
//! points with coordinates, lines, shapes, shape indicators and relations.
//!
//! The concrete text syntax is line oriented:
//!
//! ```text
//! Point(a, 0.1000, 0.2000)
//! Point(b, 0.9000, 0.2000)
//! Point(c, 0.5000, 0.8000)
//! Line(ab)
//! Shape(Triangle(a, b, c))
//! Indicator(Triangle(a, b, c), Equals(ac, bc))
//! Relation(PointLiesOnLine(n, Line(a, b)))
//! ```
//!
//! `#` starts a comment. A structural (JSON) form mirroring the five sets is
//! available through serde.

mod canonical;
mod parse;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub use canonical::{canonicalize, ValidationWarning};
pub use parse::{parse, parse_with_warnings};
pub use serialize::serialize;

/// Coordinate comparison tolerance for structural equality: half a unit in
/// the fourth decimal, the precision the serializer emits.
pub const STRUCTURAL_TOL: f64 = 5e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogicFormError {
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("{}unknown point `{name}`", at(*line))]
    Reference { line: usize, name: String },
    #[error("{}{kind} takes {expected} operands, found {found}", at(*line))]
    Arity {
        line: usize,
        kind: String,
        expected: String,
        found: usize,
    },
    #[error("{}{message}", at(*line))]
    Invalid { line: usize, message: String },
}

fn at(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}: ")
    }
}

impl LogicFormError {
    /// Short category tag used in service error envelopes.
    pub fn category(&self) -> &'static str {
        match self {
            LogicFormError::Syntax { .. } => "syntax",
            LogicFormError::Reference { .. } => "reference",
            LogicFormError::Arity { .. } => "arity",
            LogicFormError::Invalid { .. } => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDecl {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

impl PointDecl {
    pub fn new(name: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            name: name.into(),
            x,
            y,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// A segment between two named points. Endpoint order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineDecl {
    pub a: String,
    pub b: String,
}

impl LineDecl {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
        }
    }

    /// Endpoints in lexicographic order (`ba` becomes `ab`).
    pub fn canonical(&self) -> LineDecl {
        if self.a <= self.b {
            self.clone()
        } else {
            LineDecl::new(self.b.clone(), self.a.clone())
        }
    }

    pub fn touches(&self, name: &str) -> bool {
        self.a == name || self.b == name
    }
}

macro_rules! shape_kinds {
    ($($kind:ident => $arity:expr),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum ShapeKind { $($kind),* }

        impl ShapeKind {
            pub const ALL: [ShapeKind; 13] = [$(ShapeKind::$kind),*];

            pub fn name(self) -> &'static str {
                match self { $(ShapeKind::$kind => stringify!($kind)),* }
            }

            pub fn from_name(name: &str) -> Option<ShapeKind> {
                match name { $(stringify!($kind) => Some(ShapeKind::$kind),)* _ => None }
            }

            /// Number of named points the shape takes (the centre, for circles).
            pub fn arity(self) -> usize {
                match self { $(ShapeKind::$kind => $arity),* }
            }
        }
    };
}

shape_kinds! {
    Triangle => 3,
    RightTriangle => 3,
    IsoscelesTriangle => 3,
    EquilateralTriangle => 3,
    Quadrilateral => 4,
    Square => 4,
    Rectangle => 4,
    Parallelogram => 4,
    Trapezoid => 4,
    Rhombus => 4,
    Pentagon => 5,
    Hexagon => 6,
    Circle => 1,
}

impl ShapeKind {
    pub fn is_polygon(self) -> bool {
        self != ShapeKind::Circle
    }

    pub fn is_triangle(self) -> bool {
        self.arity() == 3
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A shape instance: polygon vertices in order, or a circle centre with an
/// optional explicit radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDecl {
    pub kind: ShapeKind,
    pub vertices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl ShapeDecl {
    pub fn polygon(kind: ShapeKind, vertices: &[&str]) -> Self {
        Self {
            kind,
            vertices: vertices.iter().map(|v| v.to_string()).collect(),
            radius: None,
        }
    }

    pub fn circle(center: impl Into<String>, radius: Option<f64>) -> Self {
        Self {
            kind: ShapeKind::Circle,
            vertices: vec![center.into()],
            radius,
        }
    }

    pub fn center(&self) -> Option<&str> {
        (self.kind == ShapeKind::Circle)
            .then(|| self.vertices.first().map(String::as_str))
            .flatten()
    }

    pub fn shape_ref(&self) -> ShapeRef {
        ShapeRef {
            kind: self.kind,
            vertices: self.vertices.clone(),
        }
    }

    /// Polygon sides in vertex order, closing back to the first vertex.
    pub fn sides(&self) -> Vec<LineDecl> {
        if !self.kind.is_polygon() {
            return Vec::new();
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| LineDecl::new(&self.vertices[i], &self.vertices[(i + 1) % n]))
            .collect()
    }
}

/// A reference to a shape by kind and exact vertex tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapeRef {
    pub kind: ShapeKind,
    pub vertices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndicatorProperty {
    Parallel,
    Perpendicular,
    Equals,
    RightAngle,
}

impl IndicatorProperty {
    pub const ALL: [IndicatorProperty; 4] = [
        IndicatorProperty::Parallel,
        IndicatorProperty::Perpendicular,
        IndicatorProperty::Equals,
        IndicatorProperty::RightAngle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndicatorProperty::Parallel => "Parallel",
            IndicatorProperty::Perpendicular => "Perpendicular",
            IndicatorProperty::Equals => "Equals",
            IndicatorProperty::RightAngle => "RightAngle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "operand", rename_all = "snake_case")]
pub enum IndicatorOperand {
    Side { a: String, b: String },
    Vertex { name: String },
}

impl IndicatorOperand {
    pub fn side(a: impl Into<String>, b: impl Into<String>) -> Self {
        IndicatorOperand::Side {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn vertex(name: impl Into<String>) -> Self {
        IndicatorOperand::Vertex { name: name.into() }
    }

    pub fn canonical(&self) -> Self {
        match self {
            IndicatorOperand::Side { a, b } if a > b => {
                IndicatorOperand::side(b.clone(), a.clone())
            }
            other => other.clone(),
        }
    }
}

/// A property annotation on a polygon: parallel, perpendicular or equal sides,
/// or a right angle at a vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndicatorDecl {
    pub shape: ShapeRef,
    pub property: IndicatorProperty,
    pub operands: Vec<IndicatorOperand>,
}

macro_rules! relation_kinds {
    ($($kind:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum RelationKind { $($kind),* }

        impl RelationKind {
            pub const ALL: [RelationKind; 10] = [$(RelationKind::$kind),*];

            pub fn name(self) -> &'static str {
                match self { $(RelationKind::$kind => stringify!($kind)),* }
            }

            pub fn from_name(name: &str) -> Option<RelationKind> {
                match name { $(stringify!($kind) => Some(RelationKind::$kind),)* _ => None }
            }
        }
    };
}

relation_kinds! {
    PointLiesOnLine,
    PointLiesOnCircle,
    Equals,
    Perpendicular,
    Parallel,
    Incircle,
    Tangent,
    ConcyclicPoints,
    IntersectAt,
    AngleBisector,
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A typed relation argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum Term {
    Point {
        name: String,
    },
    Line {
        a: String,
        b: String,
    },
    /// A circle by centre; `radius: None` is the symbolic `radius` placeholder.
    Circle {
        center: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    /// The angle `a`-`vertex`-`c`.
    Angle {
        a: String,
        vertex: String,
        c: String,
    },
    Shape {
        kind: ShapeKind,
        vertices: Vec<String>,
    },
    Number {
        value: f64,
    },
}

impl Term {
    pub fn point(name: impl Into<String>) -> Self {
        Term::Point { name: name.into() }
    }

    pub fn line(a: impl Into<String>, b: impl Into<String>) -> Self {
        Term::Line {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn circle(center: impl Into<String>) -> Self {
        Term::Circle {
            center: center.into(),
            radius: None,
        }
    }

    pub fn angle(a: impl Into<String>, vertex: impl Into<String>, c: impl Into<String>) -> Self {
        Term::Angle {
            a: a.into(),
            vertex: vertex.into(),
            c: c.into(),
        }
    }

    pub fn shape(kind: ShapeKind, vertices: &[&str]) -> Self {
        Term::Shape {
            kind,
            vertices: vertices.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub(crate) fn type_name(&self) -> &'static str {
        match self {
            Term::Point { .. } => "point",
            Term::Line { .. } => "line",
            Term::Circle { .. } => "circle",
            Term::Angle { .. } => "angle",
            Term::Shape { .. } => "shape",
            Term::Number { .. } => "number",
        }
    }

    /// Every point name the term mentions.
    pub fn point_names(&self) -> Vec<&str> {
        match self {
            Term::Point { name } => vec![name],
            Term::Line { a, b } => vec![a, b],
            Term::Circle { center, .. } => vec![center],
            Term::Angle { a, vertex, c } => vec![a, vertex, c],
            Term::Shape { vertices, .. } => vertices.iter().map(String::as_str).collect(),
            Term::Number { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDecl {
    pub kind: RelationKind,
    pub arguments: Vec<Term>,
}

impl RelationDecl {
    pub fn new(kind: RelationKind, arguments: Vec<Term>) -> Self {
        Self { kind, arguments }
    }
}

/// A complete logic form: the point, line, shape, indicator and relation sets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogicForm {
    #[serde(default)]
    pub points: Vec<PointDecl>,
    #[serde(default)]
    pub lines: Vec<LineDecl>,
    #[serde(default)]
    pub shapes: Vec<ShapeDecl>,
    #[serde(default)]
    pub indicators: Vec<IndicatorDecl>,
    #[serde(default)]
    pub relations: Vec<RelationDecl>,
}

impl LogicForm {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
            && self.lines.is_empty()
            && self.shapes.is_empty()
            && self.indicators.is_empty()
            && self.relations.is_empty()
    }

    pub fn point(&self, name: &str) -> Option<&PointDecl> {
        self.points.iter().find(|p| p.name == name)
    }

    pub fn position(&self, name: &str) -> Option<Vec2> {
        self.point(name).map(PointDecl::position)
    }

    pub fn has_point(&self, name: &str) -> bool {
        self.point(name).is_some()
    }

    pub fn polygon_count(&self) -> usize {
        self.shapes.iter().filter(|s| s.kind.is_polygon()).count()
    }

    pub fn circle_count(&self) -> usize {
        self.shapes
            .iter()
            .filter(|s| s.kind == ShapeKind::Circle)
            .count()
    }

    /// Checks every invariant of the language; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<ValidationWarning>, LogicFormError> {
        canonical::validate(self)
    }

    /// Equality up to the serializer's coordinate precision, with lines
    /// compared as a multiset of unordered pairs.
    pub fn structurally_eq(&self, other: &LogicForm) -> bool {
        fn num_eq(a: f64, b: f64) -> bool {
            (a - b).abs() <= STRUCTURAL_TOL
        }
        fn opt_eq(a: Option<f64>, b: Option<f64>) -> bool {
            match (a, b) {
                (Some(a), Some(b)) => num_eq(a, b),
                (None, None) => true,
                _ => false,
            }
        }
        fn term_eq(a: &Term, b: &Term) -> bool {
            match (a, b) {
                (Term::Number { value: x }, Term::Number { value: y }) => num_eq(*x, *y),
                (
                    Term::Circle {
                        center: c1,
                        radius: r1,
                    },
                    Term::Circle {
                        center: c2,
                        radius: r2,
                    },
                ) => c1 == c2 && opt_eq(*r1, *r2),
                _ => a.canonical() == b.canonical(),
            }
        }

        let points_eq = self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(p, q)| p.name == q.name && num_eq(p.x, q.x) && num_eq(p.y, q.y));
        let mut l1: Vec<_> = self.lines.iter().map(LineDecl::canonical).collect();
        let mut l2: Vec<_> = other.lines.iter().map(LineDecl::canonical).collect();
        l1.sort();
        l2.sort();
        let shapes_eq = self.shapes.len() == other.shapes.len()
            && self.shapes.iter().zip(&other.shapes).all(|(s, t)| {
                s.kind == t.kind && s.vertices == t.vertices && opt_eq(s.radius, t.radius)
            });
        let relations_eq = self.relations.len() == other.relations.len()
            && self.relations.iter().zip(&other.relations).all(|(r, s)| {
                r.kind == s.kind
                    && r.arguments.len() == s.arguments.len()
                    && r.arguments
                        .iter()
                        .zip(&s.arguments)
                        .all(|(a, b)| term_eq(a, b))
            });
        let indicators_eq = self.indicators.len() == other.indicators.len()
            && self
                .indicators
                .iter()
                .zip(&other.indicators)
                .all(|(i, j)| i.canonical() == j.canonical());
        points_eq && l1 == l2 && shapes_eq && indicators_eq && relations_eq
    }
}
