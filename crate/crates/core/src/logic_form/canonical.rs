use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::parse::check_signature;
use super::{
    IndicatorDecl, IndicatorOperand, IndicatorProperty, LineDecl, LogicForm, LogicFormError,
    PointDecl, ShapeKind, Term,
};

/// Smallest radius that survives a serialization round trip.
pub const MIN_RADIUS: f64 = 1e-6;

/// Non-fatal findings from [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum ValidationWarning {
    DuplicatePoint { name: String },
    DuplicateLine { a: String, b: String },
    RightTriangleWithoutIndicator { vertices: Vec<String> },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::DuplicatePoint { name } => {
                write!(f, "point `{name}` declared twice")
            }
            ValidationWarning::DuplicateLine { a, b } => write!(f, "line `{a}{b}` declared twice"),
            ValidationWarning::RightTriangleWithoutIndicator { vertices } => write!(
                f,
                "RightTriangle({}) has no right-angle or perpendicular indicator",
                vertices.join(", ")
            ),
        }
    }
}

impl IndicatorDecl {
    /// Sides with sorted endpoints; operands of symmetric properties sorted.
    pub fn canonical(&self) -> IndicatorDecl {
        let mut operands: Vec<IndicatorOperand> = self
            .operands
            .iter()
            .map(IndicatorOperand::canonical)
            .collect();
        if self.property != IndicatorProperty::RightAngle {
            operands.sort();
        }
        IndicatorDecl {
            shape: self.shape.clone(),
            property: self.property,
            operands,
        }
    }
}

impl Term {
    /// Line terms with sorted endpoints; everything else unchanged.
    pub fn canonical(&self) -> Term {
        match self {
            Term::Line { a, b } if a > b => Term::line(b.clone(), a.clone()),
            other => other.clone(),
        }
    }
}

fn lower(s: &str) -> String {
    s.to_ascii_lowercase()
}

fn lower_term(t: &Term) -> Term {
    match t {
        Term::Point { name } => Term::point(lower(name)),
        Term::Line { a, b } => Term::line(lower(a), lower(b)),
        Term::Circle { center, radius } => Term::Circle {
            center: lower(center),
            radius: *radius,
        },
        Term::Angle { a, vertex, c } => Term::angle(lower(a), lower(vertex), lower(c)),
        Term::Shape { kind, vertices } => Term::Shape {
            kind: *kind,
            vertices: vertices.iter().map(|v| lower(v)).collect(),
        },
        Term::Number { value } => Term::Number { value: *value },
    }
}

/// Normal form used before comparing logic forms.
///
/// Names are lowercased, repeated points collapse to their first declaration,
/// lines become sorted unique unordered pairs, indicator operands and relation
/// line terms are put in canonical order. Coordinates and shape vertex order
/// are never touched.
pub fn canonicalize(lf: &LogicForm) -> LogicForm {
    let mut seen = HashSet::new();
    let points = lf
        .points
        .iter()
        .filter_map(|p| {
            let name = lower(&p.name);
            seen.insert(name.clone()).then_some(PointDecl {
                name,
                x: p.x,
                y: p.y,
            })
        })
        .collect();

    let mut lines: Vec<LineDecl> = lf
        .lines
        .iter()
        .map(|l| LineDecl::new(lower(&l.a), lower(&l.b)).canonical())
        .collect();
    lines.sort();
    lines.dedup();

    let shapes = lf
        .shapes
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.vertices.iter_mut().for_each(|v| *v = lower(v));
            s
        })
        .collect();

    let indicators = lf
        .indicators
        .iter()
        .map(|ind| {
            let mut ind = ind.clone();
            ind.shape.vertices.iter_mut().for_each(|v| *v = lower(v));
            for op in &mut ind.operands {
                match op {
                    IndicatorOperand::Side { a, b } => {
                        *a = lower(a);
                        *b = lower(b);
                    }
                    IndicatorOperand::Vertex { name } => *name = lower(name),
                }
            }
            ind.canonical()
        })
        .collect();

    let relations = lf
        .relations
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.arguments = r
                .arguments
                .iter()
                .map(|t| lower_term(t).canonical())
                .collect();
            r
        })
        .collect();

    LogicForm {
        points,
        lines,
        shapes,
        indicators,
        relations,
    }
}

fn invalid(message: String) -> LogicFormError {
    LogicFormError::Invalid { line: 0, message }
}

fn reference(name: &str) -> LogicFormError {
    LogicFormError::Reference {
        line: 0,
        name: name.to_string(),
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
}

pub(super) fn validate(lf: &LogicForm) -> Result<Vec<ValidationWarning>, LogicFormError> {
    let mut warnings = Vec::new();
    let mut coords: HashMap<&str, (f64, f64)> = HashMap::new();
    for p in &lf.points {
        if !valid_name(&p.name) {
            return Err(invalid(format!("invalid point name `{}`", p.name)));
        }
        for v in [p.x, p.y] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!(
                    "coordinate {v} of point `{}` lies outside [0, 1]",
                    p.name
                )));
            }
        }
        match coords.get(p.name.as_str()) {
            Some(&(x, y)) if x == p.x && y == p.y => {
                warnings.push(ValidationWarning::DuplicatePoint {
                    name: p.name.clone(),
                })
            }
            Some(_) => {
                return Err(invalid(format!(
                    "point `{}` declared twice with different coordinates",
                    p.name
                )))
            }
            None => {
                coords.insert(&p.name, (p.x, p.y));
            }
        }
    }
    let exists = |n: &str| coords.contains_key(n);
    let require = |n: &str| if exists(n) { Ok(()) } else { Err(reference(n)) };

    let mut seen_lines = HashSet::new();
    for l in &lf.lines {
        require(&l.a)?;
        require(&l.b)?;
        if l.a == l.b {
            return Err(invalid(format!(
                "line `{}{}` has identical endpoints",
                l.a, l.b
            )));
        }
        let c = l.canonical();
        if !seen_lines.insert(c.clone()) {
            warnings.push(ValidationWarning::DuplicateLine { a: c.a, b: c.b });
        }
    }

    for s in &lf.shapes {
        if s.vertices.len() != s.kind.arity() {
            return Err(LogicFormError::Arity {
                line: 0,
                kind: s.kind.name().into(),
                expected: s.kind.arity().to_string(),
                found: s.vertices.len(),
            });
        }
        for v in &s.vertices {
            require(v)?;
        }
        let distinct: HashSet<_> = s.vertices.iter().collect();
        if distinct.len() != s.vertices.len() {
            return Err(invalid(format!("{} repeats a vertex", s.kind)));
        }
        if s.kind.is_polygon() && s.radius.is_some() {
            return Err(invalid(format!("{} cannot carry a radius", s.kind)));
        }
        if let Some(r) = s.radius {
            if !(r.is_finite() && r >= MIN_RADIUS) {
                return Err(invalid(format!(
                    "circle radius {r} must be a positive number"
                )));
            }
        }
    }

    for ind in &lf.indicators {
        validate_indicator(lf, ind)?;
    }

    for s in lf
        .shapes
        .iter()
        .filter(|s| s.kind == ShapeKind::RightTriangle)
    {
        let annotated = lf.indicators.iter().any(|i| {
            i.shape.kind == s.kind
                && i.shape.vertices == s.vertices
                && matches!(
                    i.property,
                    IndicatorProperty::RightAngle | IndicatorProperty::Perpendicular
                )
        });
        if !annotated {
            warnings.push(ValidationWarning::RightTriangleWithoutIndicator {
                vertices: s.vertices.clone(),
            });
        }
    }

    for r in &lf.relations {
        check_signature(r.kind, &r.arguments, 0)?;
        for t in &r.arguments {
            for n in t.point_names() {
                require(n)?;
            }
            match t {
                Term::Line { a, b } if a == b => {
                    return Err(invalid(format!("line `{a}{b}` has identical endpoints")))
                }
                Term::Circle {
                    radius: Some(r), ..
                } if !(r.is_finite() && *r >= MIN_RADIUS) => {
                    return Err(invalid(format!(
                        "circle radius {r} must be a positive number"
                    )))
                }
                Term::Number { value } if !value.is_finite() => {
                    return Err(invalid("numbers must be finite".into()))
                }
                Term::Shape { kind, vertices }
                    if !kind.is_polygon() || vertices.len() != kind.arity() =>
                {
                    return Err(LogicFormError::Arity {
                        line: 0,
                        kind: kind.name().into(),
                        expected: kind.arity().to_string(),
                        found: vertices.len(),
                    })
                }
                _ => {}
            }
        }
    }
    Ok(warnings)
}

fn validate_indicator(lf: &LogicForm, ind: &IndicatorDecl) -> Result<(), LogicFormError> {
    let shape = &ind.shape;
    if !lf
        .shapes
        .iter()
        .any(|s| s.kind == shape.kind && s.vertices == shape.vertices)
    {
        return Err(reference(&format!(
            "{}({})",
            shape.kind,
            shape.vertices.join(", ")
        )));
    }
    if !shape.kind.is_polygon() {
        return Err(invalid("indicators apply to polygons, not circles".into()));
    }
    let in_shape = |n: &str| shape.vertices.iter().any(|v| v == n);
    let n = ind.operands.len();
    let arity_ok = match ind.property {
        IndicatorProperty::RightAngle => n == 1,
        IndicatorProperty::Parallel | IndicatorProperty::Perpendicular => n == 2,
        IndicatorProperty::Equals => n >= 2,
    };
    if !arity_ok {
        return Err(LogicFormError::Arity {
            line: 0,
            kind: ind.property.name().into(),
            expected: match ind.property {
                IndicatorProperty::RightAngle => "1",
                IndicatorProperty::Equals => "at least 2",
                _ => "2",
            }
            .into(),
            found: n,
        });
    }
    for op in &ind.operands {
        match (ind.property, op) {
            (IndicatorProperty::RightAngle, IndicatorOperand::Vertex { name })
                if in_shape(name) => {}
            (IndicatorProperty::RightAngle, _) => {
                return Err(invalid("RightAngle takes one vertex of its shape".into()))
            }
            (_, IndicatorOperand::Side { a, b }) if a != b && in_shape(a) && in_shape(b) => {}
            (p, _) => {
                return Err(invalid(format!(
                    "{} operands must be sides formed by the shape's vertices",
                    p.name()
                )))
            }
        }
    }
    Ok(())
}
