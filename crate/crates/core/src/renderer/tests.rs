use proptest::prelude::*;

use super::*;
use crate::logic_form::{LineDecl, PointDecl, ShapeDecl};

fn markers_only() -> RenderStyle {
    RenderStyle {
        draw_labels: false,
        ..RenderStyle::default()
    }
}

fn strokes_only() -> RenderStyle {
    RenderStyle {
        draw_labels: false,
        draw_markers: false,
        ..RenderStyle::default()
    }
}

fn form(points: &[(&str, f64, f64)], lines: &[(&str, &str)]) -> LogicForm {
    LogicForm {
        points: points
            .iter()
            .map(|&(n, x, y)| PointDecl::new(n, x, y))
            .collect(),
        lines: lines.iter().map(|&(a, b)| LineDecl::new(a, b)).collect(),
        ..Default::default()
    }
}

fn darkness(img: &RasterImage, x: usize, y: usize) -> f64 {
    let [r, g, b] = img.pixel(x, y);
    1.0 - (r + g + b) as f64 / 3.0
}

fn centroid(img: &RasterImage, near: Vec2, radius: f64) -> Vec2 {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let c = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            if c.distance(near) > radius {
                continue;
            }
            let w = darkness(img, x, y);
            sx += w * c.x;
            sy += w * c.y;
            sw += w;
        }
    }
    Vec2::new(sx / sw, sy / sw)
}

#[test]
fn point_on_circle_radius() {
    let lf = parse(
        "Point(o, 0.5, 0.5)\nPoint(p, 0.5, 0.9)\nShape(Circle(o))\n\
         Relation(PointLiesOnCircle(p, Circle(o, radius)))",
    )
    .unwrap();
    let (circles, warnings) = derive_circles(&lf);
    assert!(warnings.is_empty());
    assert_eq!(circles.len(), 1);
    assert!((circles[0].geom.radius - 0.4).abs() < 1e-12);
    assert_eq!(circles[0].source, CircleSource::PointOnCircle);
}

#[test]
fn concyclic_fit_on_cardinal_points() {
    let lf = parse(
        "Point(o, 0.5, 0.5)\nPoint(a, 0.75, 0.5)\nPoint(b, 0.5, 0.75)\nPoint(c, 0.25, 0.5)\n\
         Point(d, 0.5, 0.25)\nShape(Circle(o))\nRelation(ConcyclicPoints(a, b, c, d))",
    )
    .unwrap();
    let (circles, _) = derive_circles(&lf);
    assert_eq!(circles[0].source, CircleSource::Concyclic);
    assert!((circles[0].geom.radius - 0.25).abs() < 1e-12);
}

#[test]
fn incircle_radius_from_triangle() {
    let lf = parse(
        "Point(a, 0, 0)\nPoint(b, 0.3, 0)\nPoint(c, 0, 0.4)\nPoint(o, 0.1, 0.1)\n\
         Shape(Triangle(a, b, c))\nRelation(Incircle(Circle(o, radius), Triangle(a, b, c)))",
    )
    .unwrap();
    let (circles, _) = derive_circles(&lf);
    assert_eq!(circles[0].source, CircleSource::Incircle);
    assert!((circles[0].geom.radius - 0.1).abs() < 1e-12);
}

#[test]
fn explicit_radius_takes_priority_and_unresolved_circles_warn() {
    let lf = parse(
        "Point(o, 0.5, 0.5)\nPoint(p, 0.5, 0.9)\nPoint(q, 0.2, 0.2)\nShape(Circle(o, 0.3))\n\
         Shape(Circle(q))\nRelation(PointLiesOnCircle(p, Circle(o, radius)))",
    )
    .unwrap();
    let (circles, warnings) = derive_circles(&lf);
    assert_eq!(circles.len(), 1);
    assert_eq!(
        (circles[0].geom.radius, circles[0].source),
        (0.3, CircleSource::Explicit)
    );
    assert_eq!(
        warnings,
        vec![RenderWarning::UnresolvedCircle { center: "q".into() }]
    );
    let (img, w) = try_render(&lf, &RenderStyle::default(), 64).unwrap();
    assert_eq!(w.len(), 1);
    assert!(!img.is_all_black());
}

#[test]
fn viewport_margin_example() {
    let lf = form(&[("a", 0.2, 0.45), ("b", 0.8, 0.55)], &[]);
    let vp = viewport(&lf, &[]).unwrap();
    assert!(
        (vp.x_min + 0.04).abs() < 1e-12 && (vp.x_max - 1.04).abs() < 1e-12,
        "{vp:?}"
    );
    assert!((vp.width() - vp.height()).abs() < 1e-12);
}

#[test]
fn viewport_floor_for_single_point() {
    let lf = form(&[("a", 0.3, 0.6)], &[]);
    let vp = viewport(&lf, &[]).unwrap();
    let span = MIN_EXTENT * (1.0 + 2.0 * VIEWPORT_MARGIN);
    assert!((vp.width() - span).abs() < 1e-12 && (vp.height() - span).abs() < 1e-12);
    assert!(vp.contains(Vec2::new(0.3, 0.6)));
}

#[test]
fn circle_extent_bounds() {
    let lf = form(&[("o", 0.5, 0.5)], &[]);
    let circle = ResolvedCircle {
        center: "o".into(),
        geom: CircleGeom::new(Vec2::new(0.5, 0.5), 0.4).unwrap(),
        source: CircleSource::Explicit,
    };
    let b = content_bounds(&lf, &[circle]).unwrap();
    for (lo, hi) in [(b.x_min, b.x_max), (b.y_min, b.y_max)] {
        assert!((lo - 0.1).abs() < 1e-12 && (hi - 0.9).abs() < 1e-12);
    }
}

#[test]
fn empty_and_garbage_inputs_render_black() {
    let img = render(&LogicForm::default(), &RenderStyle::default(), 32);
    assert!(img.is_all_black());
    assert_eq!((img.width(), img.height()), (32, 32));
    assert!(render_text("not a logic form (", &RenderStyle::default(), 16).is_all_black());
    assert!(matches!(
        try_render(&LogicForm::default(), &RenderStyle::default(), 8),
        Err(RenderError::EmptyGeometry)
    ));
    assert!(matches!(
        try_render(&form(&[("a", 0.5, 0.5)], &[]), &RenderStyle::default(), 0),
        Err(RenderError::BadSize(0))
    ));
}

#[test]
fn segment_endpoints_follow_viewport_transform() {
    let lf = form(&[("a", 0.2, 0.3), ("b", 0.8, 0.6)], &[("a", "b")]);
    let size = 256;
    let img = render(&lf, &strokes_only(), size);
    let vp = viewport(&canonicalize(&lf), &[]).unwrap();
    let pa = vp.to_pixel(Vec2::new(0.2, 0.3), size);
    let pb = vp.to_pixel(Vec2::new(0.8, 0.6), size);

    let mut dark = Vec::new();
    for y in 0..size {
        for x in 0..size {
            if darkness(&img, x, y) > 0.4 {
                dark.push(Vec2::new(x as f64 + 0.5, y as f64 + 0.5));
            }
        }
    }
    let min_x = dark.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = dark.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    assert!((min_x - pa.x).abs() <= 1.5, "{min_x} vs {}", pa.x);
    assert!((max_x - pb.x).abs() <= 1.5, "{max_x} vs {}", pb.x);
    // Logic y grows downward on the canvas once the display flip is applied.
    assert!(pb.y > pa.y);
    for p in &dark {
        assert!(distance_to_segment(*p, pa, pb) < 1.5);
    }
}

#[test]
fn render_is_deterministic_and_draws_everything() {
    let src = "Point(a, 0.1, 0.1)\nPoint(b, 0.9, 0.1)\nPoint(c, 0.5, 0.8)\nPoint(o, 0.5, 0.4)\n\
               Line(ab)\nLine(bc)\nLine(ca)\nShape(Circle(o, 0.2))";
    let lf = parse(src).unwrap();
    let a = render(&lf, &RenderStyle::default(), DEFAULT_SIZE);
    let b = render(&lf, &RenderStyle::default(), DEFAULT_SIZE);
    assert_eq!(a.data(), b.data());
    assert_eq!(a.to_png().unwrap(), b.to_png().unwrap());

    let blue = (0..DEFAULT_SIZE * DEFAULT_SIZE)
        .filter(|i| {
            let [r, g, b] = a.pixel(i % DEFAULT_SIZE, i / DEFAULT_SIZE);
            b > 0.9 && r < 0.5 && g < 0.5
        })
        .count();
    assert!(blue > 100, "circle stroke missing: {blue}");
    let ink = |img: &RasterImage| {
        (0..img.width() * img.height())
            .filter(|i| darkness(img, i % img.width(), i / img.width()) > 0.5)
            .count()
    };
    let with_labels = ink(&a);
    let without = ink(&render(&lf, &markers_only(), DEFAULT_SIZE));
    assert!(with_labels > without + 4 * 20, "{with_labels} vs {without}");
}

#[test]
fn labels_do_not_overlap_each_other() {
    let lf = form(&[("a", 0.5, 0.5), ("b", 0.51, 0.5), ("c", 0.5, 0.51)], &[]);
    let canon = canonicalize(&lf);
    let vp = viewport(&canon, &[]).unwrap();
    let size = 512;
    let pos: HashMap<&str, Vec2> = canon
        .points
        .iter()
        .map(|p| (p.name.as_str(), vp.to_pixel(p.position(), size)))
        .collect();
    let mut layout = LabelLayout {
        segments: &[],
        rings: &[],
        markers: canon.points.iter().map(|p| pos[p.name.as_str()]).collect(),
        marker_radius: 3.0,
        stroke_half: 0.6,
        offset: 8.0,
        scale: 2,
        size,
        placed: Vec::new(),
    };
    let rects: Vec<Rect> = canon
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| layout.place(i, &p.name, &canon, &pos))
        .collect();
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            assert!(
                !rects[i].overlaps(&rects[j]),
                "{:?} {:?}",
                rects[i],
                rects[j]
            );
        }
    }
}

#[test]
fn labels_avoid_incident_lines() {
    // Lines leave `a` to the right and upward on the canvas, so its label goes down-left.
    let lf = form(
        &[("a", 0.3, 0.7), ("b", 0.7, 0.7), ("c", 0.3, 0.3)],
        &[("a", "b"), ("a", "c")],
    );
    let canon = canonicalize(&lf);
    let vp = viewport(&canon, &[]).unwrap();
    let pos: HashMap<&str, Vec2> = canon
        .points
        .iter()
        .map(|p| (p.name.as_str(), vp.to_pixel(p.position(), 512)))
        .collect();
    let segs = vec![(pos["a"], pos["b"]), (pos["a"], pos["c"])];
    let mut layout = LabelLayout {
        segments: &segs,
        rings: &[],
        markers: canon.points.iter().map(|p| pos[p.name.as_str()]).collect(),
        marker_radius: 3.0,
        stroke_half: 0.6,
        offset: 8.0,
        scale: 2,
        size: 512,
        placed: Vec::new(),
    };
    let r = layout.place(0, "a", &canon, &pos);
    assert!(
        r.x1 <= pos["a"].x && r.y0 >= pos["a"].y,
        "{r:?} {:?}",
        pos["a"]
    );
}

#[test]
fn rect_segment_clipping() {
    let r = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 10.0,
        y1: 10.0,
    };
    assert!(r.hits_segment(Vec2::new(-5.0, 5.0), Vec2::new(15.0, 5.0)));
    assert!(!r.hits_segment(Vec2::new(-5.0, 15.0), Vec2::new(15.0, 15.0)));
    assert!(r.hits_segment(Vec2::new(2.0, 2.0), Vec2::new(3.0, 3.0)));
    assert!(!r.hits_segment(Vec2::new(11.0, -5.0), Vec2::new(20.0, 5.0)));
}

#[test]
fn scaled_output_sizes() {
    let lf = form(&[("a", 0.2, 0.2), ("b", 0.8, 0.8)], &[("a", "b")]);
    for size in [1, 7, 64, 300] {
        let img = render(&lf, &RenderStyle::default(), size);
        assert_eq!((img.width(), img.height()), (size, size));
    }
    let circle = parse("Point(o, 0.5, 0.5)\nShape(Circle(o, 0.1))").unwrap();
    assert!(!render(&circle, &RenderStyle::default(), 96).is_all_black());
    let _ = ShapeDecl::circle("o", Some(0.1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marker_centroid_matches_transform(pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..4)) {
        let names = ["a", "b", "c", "d"];
        let mut lf = LogicForm::default();
        for (i, (x, y)) in pts.iter().enumerate() {
            lf.points.push(PointDecl::new(names[i], *x, *y));
        }
        let size = 128;
        let vp = viewport(&lf, &[]).unwrap();
        let px: Vec<Vec2> = lf.points.iter().map(|p| vp.to_pixel(p.position(), size)).collect();
        // Only check markers isolated from the others.
        let img = render(&lf, &markers_only(), size);
        for (i, p) in px.iter().enumerate() {
            if px.iter().enumerate().any(|(j, q)| i != j && p.distance(*q) < 14.0) {
                continue;
            }
            let c = centroid(&img, *p, 6.0);
            prop_assert!(c.distance(*p) <= 1.5, "{:?} vs {:?}", c, p);
        }
    }

    #[test]
    fn adding_a_point_never_shrinks_viewport(
        pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..6),
        extra in (0.0f64..=1.0, 0.0f64..=1.0),
    ) {
        let mut lf = LogicForm::default();
        for (i, (x, y)) in pts.iter().enumerate() {
            lf.points.push(PointDecl::new(format!("q{i}"), *x, *y));
        }
        let before = viewport(&lf, &[]).unwrap();
        lf.points.push(PointDecl::new("z", extra.0, extra.1));
        let after = viewport(&lf, &[]).unwrap();
        prop_assert!(after.width() >= before.width() - 1e-12);
        prop_assert!(after.height() >= before.height() - 1e-12);
        for p in &lf.points {
            prop_assert!(after.contains(p.position()));
        }
    }
}
