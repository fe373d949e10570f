use std::fmt::Write;

use super::{IndicatorDecl, IndicatorOperand, IndicatorProperty, LineDecl, LogicForm, Term};

/// Renders a logic form as source text.
///
/// Points keep declaration order, lines are emitted canonically sorted, and
/// shapes, indicators and relations keep declaration order. Coordinates use
/// exactly four fractional digits.
pub fn serialize(lf: &LogicForm) -> String {
    let mut out = String::new();
    let known = |s: &str| lf.points.iter().any(|p| p.name == s);

    for p in &lf.points {
        writeln!(out, "Point({}, {}, {})", p.name, coord(p.x), coord(p.y)).unwrap();
    }

    let mut lines: Vec<LineDecl> = lf.lines.iter().map(LineDecl::canonical).collect();
    lines.sort();
    for l in &lines {
        writeln!(out, "Line({})", pair(&l.a, &l.b, &known)).unwrap();
    }

    for s in &lf.shapes {
        match s.center() {
            Some(c) => match s.radius {
                Some(r) => writeln!(out, "Shape(Circle({c}, {}))", number(r)).unwrap(),
                None => writeln!(out, "Shape(Circle({c}))").unwrap(),
            },
            None => writeln!(out, "Shape({}({}))", s.kind, s.vertices.join(", ")).unwrap(),
        }
    }

    for ind in &lf.indicators {
        writeln!(out, "Indicator({})", indicator(&ind.canonical())).unwrap();
    }

    for r in &lf.relations {
        let args: Vec<String> = r.arguments.iter().map(term).collect();
        writeln!(out, "Relation({}({}))", r.kind, args.join(", ")).unwrap();
    }
    out
}

fn indicator(ind: &IndicatorDecl) -> String {
    let vertices = &ind.shape.vertices;
    let in_shape = |s: &str| vertices.iter().any(|v| v == s);
    let ops: Vec<String> = ind
        .operands
        .iter()
        .map(|op| match op {
            IndicatorOperand::Side { a, b } => pair(a, b, &in_shape),
            IndicatorOperand::Vertex { name } => name.clone(),
        })
        .collect();
    debug_assert!(ind.property != IndicatorProperty::RightAngle || ops.len() == 1);
    format!(
        "{}({}), {}({})",
        ind.shape.kind,
        vertices.join(", "),
        ind.property.name(),
        ops.join(", ")
    )
}

/// `ab` when the concatenation splits back uniquely, `Line(a, b)` otherwise.
fn pair(a: &str, b: &str, known: &dyn Fn(&str) -> bool) -> String {
    let joined = format!("{a}{b}");
    if unique_split(&joined, a, known) {
        joined
    } else {
        format!("Line({a}, {b})")
    }
}

fn unique_split(joined: &str, a: &str, known: &dyn Fn(&str) -> bool) -> bool {
    let splits = (1..joined.len())
        .filter(|&i| known(&joined[..i]) && known(&joined[i..]))
        .collect::<Vec<_>>();
    splits == [a.len()]
}

fn term(t: &Term) -> String {
    match t {
        Term::Point { name } => name.clone(),
        Term::Line { a, b } => format!("Line({a}, {b})"),
        Term::Circle {
            center,
            radius: None,
        } => format!("Circle({center}, radius)"),
        Term::Circle {
            center,
            radius: Some(r),
        } => format!("Circle({center}, {})", number(*r)),
        Term::Angle { a, vertex, c } => format!("Angle({a}, {vertex}, {c})"),
        Term::Shape { kind, vertices } => format!("{kind}({})", vertices.join(", ")),
        Term::Number { value } => number(*value),
    }
}

fn coord(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

/// Up to six fractional digits, trailing zeros trimmed down to four.
fn number(v: f64) -> String {
    let mut s = format!("{v:.6}");
    while s.ends_with('0') && s.len() - s.find('.').unwrap_or(s.len()) > 5 {
        s.pop();
    }
    if s.starts_with("-0.") && s[1..].chars().all(|c| c == '0' || c == '.') {
        s.remove(0);
    }
    s
}
