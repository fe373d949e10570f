//! The construction operations. Each one mutates a candidate configuration
//! and returns `None` when its preconditions do not hold; degeneracy is
//! judged afterwards by the caller.

use std::f64::consts::{PI, TAU};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::enrich::{classify_triangle, EnrichTolerances};
use super::{convex_polygon, point_name, GenConfig, Op};
use crate::geometry::{
    derived_point, intersections, segment_crossing, Construction, LineGeom, Primitive, Vec2,
};
use crate::logic_form::{
    LineDecl, LogicForm, PointDecl, RelationDecl, RelationKind, ShapeDecl, ShapeKind, Term,
};
use crate::renderer::{derive_circles, ResolvedCircle};

pub(super) fn apply(
    op: Op,
    lf: &mut LogicForm,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Option<()> {
    match op {
        Op::Point => {
            let p = frame_point(cfg, rng);
            add_point(lf, p);
            Some(())
        }
        Op::Segment => segment(lf, rng),
        Op::Polygon => polygon(lf, cfg, rng),
        Op::ShapeFromLines => shape_from_lines(lf, rng),
        Op::Circle => circle(lf, cfg, rng),
        Op::CircleThrough3 => circle_through3(lf, cfg, rng),
        Op::Intersection => intersection(lf, rng),
        Op::Midpoint => midpoint(lf, rng),
        Op::PerpendicularFoot => perpendicular_foot(lf, rng),
        Op::PerpendicularBisector => perpendicular_bisector(lf, rng),
        Op::Parallel => parallel(lf, rng),
        Op::AngleBisector => angle_bisector(lf, rng),
        Op::Incircle => incircle(lf, rng),
        Op::Tangent => tangent(lf, rng),
    }
}

fn round4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn frame_point(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec2 {
    let m = cfg.tolerances.margin;
    Vec2::new(rng.random_range(m..=1.0 - m), rng.random_range(m..=1.0 - m))
}

/// Adds a point at `p`, snapped to the four decimals the serializer keeps.
fn add_point(lf: &mut LogicForm, p: Vec2) -> String {
    let name = point_name(lf.points.len());
    lf.points
        .push(PointDecl::new(name.clone(), round4(p.x), round4(p.y)));
    name
}

fn pos(lf: &LogicForm, name: &str) -> Vec2 {
    lf.position(name).expect("generated names are declared")
}

fn has_line(lf: &LogicForm, a: &str, b: &str) -> bool {
    lf.lines
        .iter()
        .any(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
}

fn add_line(lf: &mut LogicForm, a: &str, b: &str) {
    if !has_line(lf, a, b) {
        lf.lines.push(LineDecl::new(a, b));
    }
}

fn relate(lf: &mut LogicForm, kind: RelationKind, args: Vec<Term>) {
    lf.relations.push(RelationDecl::new(kind, args));
}

fn random_line(lf: &LogicForm, rng: &mut ChaCha8Rng) -> Option<(String, String)> {
    let l = lf.lines.choose(rng)?;
    Some(if rng.random_bool(0.5) {
        (l.a.clone(), l.b.clone())
    } else {
        (l.b.clone(), l.a.clone())
    })
}

fn unit(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn circles(lf: &LogicForm) -> Vec<ResolvedCircle> {
    derive_circles(lf).0
}

fn segment(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let n = lf.points.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !has_line(lf, &lf.points[i].name, &lf.points[j].name))
        .collect();
    let &(i, j) = pairs.choose(rng)?;
    let (a, b) = (lf.points[i].name.clone(), lf.points[j].name.clone());
    add_line(lf, &a, &b);
    Some(())
}

fn pick_polygon_kind(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Option<ShapeKind> {
    let kinds: Vec<(ShapeKind, f64)> = cfg
        .shape_weights
        .iter()
        .filter(|(k, w)| k.is_polygon() && **w > 0.0)
        .map(|(k, w)| (*k, *w))
        .collect();
    kinds
        .choose_weighted(rng, |(_, w)| *w)
        .ok()
        .map(|(k, _)| *k)
}

/// Vertices of a `kind` polygon whose first side is `a`-`b`, built on the
/// side of `ab` given by `s`.
fn polygon_vertices(kind: ShapeKind, a: Vec2, b: Vec2, s: f64, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let d = b - a;
    let len = d.norm();
    let u = d * (1.0 / len);
    let n = u.perp() * s;
    let slanted = |theta: f64, w: f64| (u * theta.cos() + n * theta.sin()) * w;
    match kind {
        ShapeKind::Triangle => {
            let t = rng.random_range(0.15..0.85);
            let h = rng.random_range(0.5..1.2) * len;
            vec![a, b, a + d * t + n * h]
        }
        ShapeKind::RightTriangle => vec![a, b, b + n * (rng.random_range(0.5..1.5) * len)],
        ShapeKind::IsoscelesTriangle => {
            let mut h: f64 = rng.random_range(0.35..1.3);
            if (h - 0.866).abs() < 0.08 {
                h += 0.2;
            }
            vec![a, b, a + d * 0.5 + n * (h * len)]
        }
        ShapeKind::EquilateralTriangle => vec![a, b, a + d * 0.5 + n * (len * 3f64.sqrt() / 2.0)],
        ShapeKind::Square => vec![a, b, b + n * len, a + n * len],
        ShapeKind::Rectangle => {
            let mut r = rng.random_range(0.45..0.8);
            if rng.random_bool(0.5) {
                r = 1.0 / r;
            }
            vec![a, b, b + n * (r * len), a + n * (r * len)]
        }
        ShapeKind::Parallelogram | ShapeKind::Rhombus => {
            let mut theta = rng.random_range(50f64..75.0).to_radians();
            if rng.random_bool(0.5) {
                theta = PI - theta;
            }
            let w = if kind == ShapeKind::Rhombus {
                len
            } else {
                rng.random_range(0.55..0.85) * len
            };
            let v = slanted(theta, w);
            vec![a, b, b + v, a + v]
        }
        ShapeKind::Trapezoid => {
            let theta = rng.random_range(60f64..120.0).to_radians();
            let top = a + slanted(theta, rng.random_range(0.5..0.9) * len);
            vec![a, b, top + d * rng.random_range(0.35..0.7), top]
        }
        ShapeKind::Quadrilateral => {
            let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.3..0.3) * len;
            let c = b + n * (rng.random_range(0.5..1.0) * len) + u * jitter(rng);
            let e = a + n * (rng.random_range(0.5..1.0) * len) + u * jitter(rng);
            vec![a, b, c, e]
        }
        ShapeKind::Pentagon | ShapeKind::Hexagon => {
            let sides = kind.arity();
            let turn = s * TAU / sides as f64;
            let mut pts = vec![a, b];
            let mut dir = d;
            for _ in 2..sides {
                dir = dir.rotated(turn);
                pts.push(*pts.last().expect("nonempty") + dir);
            }
            pts
        }
        ShapeKind::Circle => unreachable!("polygon kinds only"),
    }
}

fn polygon(lf: &mut LogicForm, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Option<()> {
    let kind = pick_polygon_kind(cfg, rng)?;
    let base = if !lf.lines.is_empty() && rng.random_bool(0.8) {
        random_line(lf, rng)
    } else {
        None
    };
    let (a, b) = match &base {
        Some((a, b)) => (pos(lf, a), pos(lf, b)),
        None => {
            let a = frame_point(cfg, rng);
            let len = rng.random_range(0.2..0.4) * if kind.arity() > 4 { 0.6 } else { 1.0 };
            (a, a + unit(rng.random_range(0.0..TAU)) * len)
        }
    };
    let verts = polygon_vertices(kind, a, b, sign(rng), rng);
    let names: Vec<String> = verts
        .iter()
        .enumerate()
        .map(|(i, v)| match (&base, i) {
            (Some((a, _)), 0) => a.clone(),
            (Some((_, b)), 1) => b.clone(),
            _ => add_point(lf, *v),
        })
        .collect();
    for i in 0..names.len() {
        add_line(lf, &names[i], &names[(i + 1) % names.len()]);
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    lf.shapes.push(ShapeDecl::polygon(kind, &refs));
    Some(())
}

fn same_vertex_set(a: &[String], b: &[&str]) -> bool {
    a.len() == b.len() && b.iter().all(|v| a.iter().any(|x| x == v))
}

fn shape_from_lines(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let names: Vec<&str> = lf.points.iter().map(|p| p.name.as_str()).collect();
    let n = names.len();
    let mut found = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !has_line(lf, names[i], names[j]) {
                continue;
            }
            for k in j + 1..n {
                let tri = [names[i], names[j], names[k]];
                if has_line(lf, names[j], names[k])
                    && has_line(lf, names[i], names[k])
                    && !lf.shapes.iter().any(|s| same_vertex_set(&s.vertices, &tri))
                {
                    found.push(tri.map(String::from));
                }
            }
        }
    }
    let tri = found.choose(rng)?.clone();
    let pts = tri.clone().map(|v| pos(lf, &v));
    let kind = classify_triangle(pts, &EnrichTolerances::default());
    let refs: Vec<&str> = tri.iter().map(String::as_str).collect();
    lf.shapes.push(ShapeDecl::polygon(kind, &refs));
    Some(())
}

fn is_center(lf: &LogicForm, name: &str) -> bool {
    lf.shapes.iter().any(|s| s.center() == Some(name))
}

fn circle(lf: &mut LogicForm, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Option<()> {
    let (lo, hi) = (0.1, 0.3);
    // Prefer a centre and a rim point that already exist.
    let pairs: Vec<(String, String)> = lf
        .points
        .iter()
        .filter(|c| !is_center(lf, &c.name))
        .flat_map(|c| lf.points.iter().map(move |p| (c, p)))
        .filter(|(c, p)| {
            c.name != p.name && (lo..=hi).contains(&c.position().distance(p.position()))
        })
        .map(|(c, p)| (c.name.clone(), p.name.clone()))
        .collect();
    let (center, on) = match pairs.choose(rng) {
        Some(pair) if rng.random_bool(0.7) => pair.clone(),
        _ => {
            let free: Vec<String> = lf
                .points
                .iter()
                .map(|p| p.name.clone())
                .filter(|n| !is_center(lf, n))
                .collect();
            let center = match free.choose(rng) {
                Some(n) if rng.random_bool(0.5) => n.clone(),
                _ => add_point(lf, frame_point(cfg, rng)),
            };
            let r = rng.random_range(lo..hi);
            let on = add_point(lf, pos(lf, &center) + unit(rng.random_range(0.0..TAU)) * r);
            (center, on)
        }
    };
    lf.shapes.push(ShapeDecl::circle(center.clone(), None));
    relate(
        lf,
        RelationKind::PointLiesOnCircle,
        vec![Term::point(&on), Term::circle(&center)],
    );
    if rng.random_bool(0.3) {
        add_line(lf, &center, &on);
    }
    Some(())
}

fn circle_through3(lf: &mut LogicForm, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Option<()> {
    let chosen: Vec<String> = lf
        .points
        .choose_multiple(rng, 3)
        .map(|p| p.name.clone())
        .collect();
    if chosen.len() < 3 {
        return None;
    }
    let pts: Vec<Vec2> = chosen.iter().map(|n| pos(lf, n)).collect();
    if !convex_polygon(&pts, cfg.tolerances.collinearity) {
        return None;
    }
    let o = derived_point(Construction::Circumcenter(pts[0], pts[1], pts[2])).ok()?;
    let center = add_point(lf, o);
    lf.shapes.push(ShapeDecl::circle(center.clone(), None));
    for p in &chosen {
        relate(
            lf,
            RelationKind::PointLiesOnCircle,
            vec![Term::point(p), Term::circle(&center)],
        );
    }
    Some(())
}

enum Prim {
    Seg(String, String),
    Circ(String),
}

fn intersection(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let resolved = circles(lf);
    let mut prims: Vec<Prim> = lf
        .lines
        .iter()
        .map(|l| Prim::Seg(l.a.clone(), l.b.clone()))
        .collect();
    prims.extend(resolved.iter().map(|c| Prim::Circ(c.center.clone())));
    if prims.len() < 2 {
        return None;
    }
    let geom = |p: &Prim| match p {
        Prim::Seg(a, b) => Primitive::Line(LineGeom::new(pos(lf, a), pos(lf, b))),
        Prim::Circ(c) => Primitive::Circle(
            resolved
                .iter()
                .find(|r| &r.center == c)
                .expect("resolved")
                .geom,
        ),
    };
    // Fraction along a segment, to keep intersections off the endpoints.
    let along = |a: &str, b: &str, x: Vec2| {
        let (pa, pb) = (pos(lf, a), pos(lf, b));
        (x - pa).dot(pb - pa) / (pb - pa).norm_sq()
    };
    let inner = |t: f64| (0.05..=0.95).contains(&t);
    let pair: Vec<&Prim> = prims.choose_multiple(rng, 2).collect();
    let (p, q) = (pair[0], pair[1]);
    let hits: Vec<Vec2> = match (p, q) {
        (Prim::Seg(a, b), Prim::Seg(c, d)) => {
            if [a, b].iter().any(|x| *x == c || *x == d) {
                return None;
            }
            let (x, t, u) = segment_crossing(pos(lf, a), pos(lf, b), pos(lf, c), pos(lf, d))?;
            if inner(t) && inner(u) {
                vec![x]
            } else {
                vec![]
            }
        }
        _ => intersections(&geom(p), &geom(q))
            .points()
            .iter()
            .copied()
            .filter(|x| {
                [p, q].iter().all(|prim| match prim {
                    Prim::Seg(a, b) => inner(along(a, b, *x)),
                    Prim::Circ(_) => true,
                })
            })
            .collect(),
    };
    let x = *hits.choose(rng)?;
    let name = add_point(lf, x);
    let collinear_form = rng.random_bool(0.3);
    match (p, q) {
        (Prim::Seg(a, b), Prim::Seg(c, d)) if collinear_form => {
            relate(
                lf,
                RelationKind::IntersectAt,
                vec![Term::line(a, b), Term::line(c, d), Term::point(&name)],
            );
        }
        _ => {
            for prim in [p, q] {
                match prim {
                    Prim::Seg(a, b) => relate(
                        lf,
                        RelationKind::PointLiesOnLine,
                        vec![Term::point(&name), Term::line(a, b)],
                    ),
                    Prim::Circ(c) => relate(
                        lf,
                        RelationKind::PointLiesOnCircle,
                        vec![Term::point(&name), Term::circle(c)],
                    ),
                }
            }
        }
    }
    Some(())
}

fn midpoint(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let (a, b) = random_line(lf, rng)?;
    let m = add_point(lf, (pos(lf, &a) + pos(lf, &b)) * 0.5);
    relate(
        lf,
        RelationKind::PointLiesOnLine,
        vec![Term::point(&m), Term::line(&a, &b)],
    );
    relate(
        lf,
        RelationKind::Equals,
        vec![Term::line(&a, &m), Term::line(&m, &b)],
    );
    Some(())
}

fn perpendicular_foot(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let (a, b) = random_line(lf, rng)?;
    let p = lf
        .points
        .iter()
        .filter(|p| p.name != a && p.name != b)
        .collect::<Vec<_>>()
        .choose(rng)?
        .name
        .clone();
    let (pa, pb, pp) = (pos(lf, &a), pos(lf, &b), pos(lf, &p));
    let f = derived_point(Construction::PerpendicularFoot {
        point: pp,
        a: pa,
        b: pb,
    })
    .ok()?;
    let t = (f - pa).dot(pb - pa) / (pb - pa).norm_sq();
    if !(0.05..=0.95).contains(&t) {
        return None;
    }
    let f = add_point(lf, f);
    add_line(lf, &p, &f);
    relate(
        lf,
        RelationKind::PointLiesOnLine,
        vec![Term::point(&f), Term::line(&a, &b)],
    );
    relate(
        lf,
        RelationKind::Perpendicular,
        vec![Term::line(&p, &f), Term::line(&a, &b)],
    );
    Some(())
}

fn perpendicular_bisector(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let (a, b) = random_line(lf, rng)?;
    let (pa, pb) = (pos(lf, &a), pos(lf, &b));
    let mid = (pa + pb) * 0.5;
    let n = (pb - pa).perp().normalized()?;
    let q = mid + n * (sign(rng) * rng.random_range(0.1..0.3));
    let m = add_point(lf, mid);
    let q = add_point(lf, q);
    add_line(lf, &m, &q);
    relate(
        lf,
        RelationKind::PointLiesOnLine,
        vec![Term::point(&m), Term::line(&a, &b)],
    );
    relate(
        lf,
        RelationKind::Perpendicular,
        vec![Term::line(&m, &q), Term::line(&a, &b)],
    );
    relate(
        lf,
        RelationKind::Equals,
        vec![Term::line(&a, &m), Term::line(&m, &b)],
    );
    Some(())
}

fn parallel(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let (a, b) = random_line(lf, rng)?;
    let p = lf
        .points
        .iter()
        .filter(|p| p.name != a && p.name != b)
        .collect::<Vec<_>>()
        .choose(rng)?
        .name
        .clone();
    let (pa, pb, pp) = (pos(lf, &a), pos(lf, &b), pos(lf, &p));
    if LineGeom::new(pa, pb).distance_to(pp) < 0.05 {
        return None;
    }
    let q = add_point(
        lf,
        pp + (pb - pa) * (sign(rng) * rng.random_range(0.5..1.0)),
    );
    add_line(lf, &p, &q);
    relate(
        lf,
        RelationKind::Parallel,
        vec![Term::line(&p, &q), Term::line(&a, &b)],
    );
    Some(())
}

fn neighbours(lf: &LogicForm, v: &str) -> Vec<String> {
    lf.lines
        .iter()
        .filter_map(|l| {
            if l.a == v {
                Some(l.b.clone())
            } else if l.b == v {
                Some(l.a.clone())
            } else {
                None
            }
        })
        .collect()
}

fn angle_bisector(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let vertices: Vec<String> = lf
        .points
        .iter()
        .map(|p| p.name.clone())
        .filter(|n| neighbours(lf, n).len() >= 2)
        .collect();
    let v = vertices.choose(rng)?.clone();
    let arms: Vec<String> = neighbours(lf, &v)
        .choose_multiple(rng, 2)
        .cloned()
        .collect();
    let (a, c) = (&arms[0], &arms[1]);
    let (pv, pa, pc) = (pos(lf, &v), pos(lf, a), pos(lf, c));
    let angle = crate::geometry::angle_at(pv, pa, pc)?;
    if !(25f64.to_radians()..=155f64.to_radians()).contains(&angle) {
        return None;
    }
    let d = derived_point(Construction::AngleBisectorPoint {
        vertex: pv,
        a: pa,
        c: pc,
    })
    .ok()?;
    let d = add_point(lf, d);
    add_line(lf, &v, &d);
    relate(
        lf,
        RelationKind::AngleBisector,
        vec![Term::line(&v, &d), Term::angle(a, &v, c)],
    );
    relate(
        lf,
        RelationKind::Equals,
        vec![Term::angle(a, &v, &d), Term::angle(&d, &v, c)],
    );
    if has_line(lf, a, c) {
        relate(
            lf,
            RelationKind::PointLiesOnLine,
            vec![Term::point(&d), Term::line(a, c)],
        );
    }
    Some(())
}

fn incircle(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let taken = |s: &ShapeDecl| {
        lf.relations.iter().any(|r| {
            r.kind == RelationKind::Incircle
                && matches!(r.arguments.get(1), Some(Term::Shape { vertices, .. }) if *vertices == s.vertices)
        })
    };
    let tris: Vec<&ShapeDecl> = lf
        .shapes
        .iter()
        .filter(|s| s.kind.is_triangle() && !taken(s))
        .collect();
    let tri = (*tris.choose(rng)?).clone();
    let v: Vec<Vec2> = tri.vertices.iter().map(|n| pos(lf, n)).collect();
    let i = derived_point(Construction::Incenter(v[0], v[1], v[2])).ok()?;
    let center = add_point(lf, i);
    lf.shapes.push(ShapeDecl::circle(center.clone(), None));
    let verts: Vec<&str> = tri.vertices.iter().map(String::as_str).collect();
    relate(
        lf,
        RelationKind::Incircle,
        vec![Term::circle(&center), Term::shape(tri.kind, &verts)],
    );
    Some(())
}

fn tangent(lf: &mut LogicForm, rng: &mut ChaCha8Rng) -> Option<()> {
    let resolved = circles(lf);
    let c = resolved.choose(rng)?;
    let theta = rng.random_range(0.0..TAU);
    let touch = c.geom.center + unit(theta) * c.geom.radius;
    let dir = unit(theta).perp();
    let far = touch + dir * (sign(rng) * rng.random_range(0.15..0.35));
    let center = c.center.clone();
    let p = add_point(lf, touch);
    let q = add_point(lf, far);
    add_line(lf, &p, &q);
    relate(
        lf,
        RelationKind::PointLiesOnCircle,
        vec![Term::point(&p), Term::circle(&center)],
    );
    relate(
        lf,
        RelationKind::Tangent,
        vec![Term::line(&p, &q), Term::circle(&center)],
    );
    Some(())
}
