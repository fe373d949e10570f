//! Indicator enrichment: annotate each polygon with the side and angle
//! properties its coordinates actually satisfy.

use serde::{Deserialize, Serialize};

use crate::geometry::{angle_at, angle_between_lines, Vec2};
use crate::logic_form::{
    IndicatorDecl, IndicatorOperand, IndicatorProperty, LineDecl, LogicForm, ShapeDecl, ShapeKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrichTolerances {
    /// Degrees from 90 (perpendicular, right angle) or 0 (parallel).
    pub angle_deg: f64,
    /// Absolute side-length difference still counted as equal.
    pub length: f64,
}

impl Default for EnrichTolerances {
    fn default() -> Self {
        Self {
            angle_deg: 0.5,
            length: 1e-3,
        }
    }
}

fn is_right(angle: f64, tol: &EnrichTolerances) -> bool {
    (angle.to_degrees() - 90.0).abs() <= tol.angle_deg
}

fn side_vec(lf: &LogicForm, s: &LineDecl) -> Option<Vec2> {
    Some(lf.position(&s.b)? - lf.position(&s.a)?)
}

/// Most specific triangle kind the three vertices satisfy.
pub fn classify_triangle(v: [Vec2; 3], tol: &EnrichTolerances) -> ShapeKind {
    let sides = [
        v[0].distance(v[1]),
        v[1].distance(v[2]),
        v[2].distance(v[0]),
    ];
    let eq = |i: usize, j: usize| (sides[i] - sides[j]).abs() <= tol.length;
    let right = (0..3)
        .any(|i| angle_at(v[i], v[(i + 1) % 3], v[(i + 2) % 3]).is_some_and(|a| is_right(a, tol)));
    if eq(0, 1) && eq(1, 2) {
        ShapeKind::EquilateralTriangle
    } else if right {
        ShapeKind::RightTriangle
    } else if eq(0, 1) || eq(1, 2) || eq(0, 2) {
        ShapeKind::IsoscelesTriangle
    } else {
        ShapeKind::Triangle
    }
}

fn side(l: &LineDecl) -> IndicatorOperand {
    IndicatorOperand::side(l.a.clone(), l.b.clone())
}

/// Indicators that hold on the coordinates of one polygon.
fn shape_indicators(
    lf: &LogicForm,
    shape: &ShapeDecl,
    tol: &EnrichTolerances,
) -> Vec<IndicatorDecl> {
    let sides = shape.sides();
    let Some(vecs) = sides
        .iter()
        .map(|s| side_vec(lf, s))
        .collect::<Option<Vec<Vec2>>>()
    else {
        return Vec::new();
    };
    let n = sides.len();
    let mk = |property, operands| IndicatorDecl {
        shape: shape.shape_ref(),
        property,
        operands,
    };
    let mut out = Vec::new();

    if n == 3 {
        for (i, v) in shape.vertices.iter().enumerate() {
            let (Some(p), Some(a), Some(c)) = (
                lf.position(v),
                lf.position(&shape.vertices[(i + 2) % 3]),
                lf.position(&shape.vertices[(i + 1) % 3]),
            ) else {
                continue;
            };
            if angle_at(p, a, c).is_some_and(|ang| is_right(ang, tol)) {
                out.push(mk(
                    IndicatorProperty::RightAngle,
                    vec![IndicatorOperand::vertex(v.clone())],
                ));
            }
        }
    } else {
        for i in 0..n {
            for j in i + 2..n {
                if (j + 1) % n == i {
                    continue;
                }
                if angle_between_lines(vecs[i], vecs[j])
                    .is_some_and(|a| a.to_degrees() <= tol.angle_deg)
                {
                    out.push(mk(
                        IndicatorProperty::Parallel,
                        vec![side(&sides[i]), side(&sides[j])],
                    ));
                }
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if angle_between_lines(vecs[i], vecs[j]).is_some_and(|a| is_right(a, tol)) {
                out.push(mk(
                    IndicatorProperty::Perpendicular,
                    vec![side(&sides[i]), side(&sides[j])],
                ));
            }
        }
    }

    let lengths: Vec<f64> = vecs.iter().map(|v| v.norm()).collect();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (lengths[j] - lengths[i]).abs() <= tol.length)
            .collect();
        for &j in &class {
            assigned[j] = true;
        }
        if class.len() >= 2 {
            out.push(mk(
                IndicatorProperty::Equals,
                class.iter().map(|&j| side(&sides[j])).collect(),
            ));
        }
    }
    out
}

/// Adds every indicator the coordinates support. Existing indicators are
/// kept and nothing is added twice, so the operation is idempotent.
pub fn enrich_indicators(lf: &LogicForm, tol: &EnrichTolerances) -> LogicForm {
    let mut out = lf.clone();
    let mut seen: Vec<IndicatorDecl> = lf.indicators.iter().map(IndicatorDecl::canonical).collect();
    for shape in lf.shapes.iter().filter(|s| s.kind.is_polygon()) {
        for ind in shape_indicators(lf, shape, tol) {
            let c = ind.canonical();
            if !seen.contains(&c) {
                seen.push(c);
                out.indicators.push(ind);
            }
        }
    }
    out
}

/// Recomputes the geometric predicate behind an indicator.
pub fn indicator_holds(lf: &LogicForm, ind: &IndicatorDecl, tol: &EnrichTolerances) -> bool {
    let vec_of = |op: &IndicatorOperand| match op {
        IndicatorOperand::Side { a, b } => side_vec(lf, &LineDecl::new(a.clone(), b.clone())),
        IndicatorOperand::Vertex { .. } => None,
    };
    match ind.property {
        IndicatorProperty::RightAngle => {
            let [IndicatorOperand::Vertex { name }] = ind.operands.as_slice() else {
                return false;
            };
            let v = &ind.shape.vertices;
            let Some(i) = v.iter().position(|x| x == name) else {
                return false;
            };
            let n = v.len();
            let (Some(p), Some(a), Some(c)) = (
                lf.position(name),
                lf.position(&v[(i + n - 1) % n]),
                lf.position(&v[(i + 1) % n]),
            ) else {
                return false;
            };
            angle_at(p, a, c).is_some_and(|ang| is_right(ang, tol))
        }
        IndicatorProperty::Parallel | IndicatorProperty::Perpendicular => {
            let [Some(u), Some(w)] = [
                ind.operands.first().and_then(vec_of),
                ind.operands.get(1).and_then(vec_of),
            ] else {
                return false;
            };
            let Some(a) = angle_between_lines(u, w) else {
                return false;
            };
            if ind.property == IndicatorProperty::Parallel {
                a.to_degrees() <= tol.angle_deg
            } else {
                is_right(a, tol)
            }
        }
        IndicatorProperty::Equals => {
            let lens: Option<Vec<f64>> = ind
                .operands
                .iter()
                .map(|o| vec_of(o).map(Vec2::norm))
                .collect();
            lens.is_some_and(|l| l.len() >= 2 && l.iter().all(|x| (x - l[0]).abs() <= tol.length))
        }
    }
}
