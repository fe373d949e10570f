use std::fs;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::MetaRecord;
use super::*;
use crate::logic_form::{
    parse, parse_with_warnings, IndicatorDecl, IndicatorOperand, IndicatorProperty, PointDecl,
    ShapeDecl,
};
use crate::renderer::renders_black;

fn form(points: &[(&str, f64, f64)], shapes: Vec<ShapeDecl>) -> LogicForm {
    LogicForm {
        points: points
            .iter()
            .map(|&(n, x, y)| PointDecl::new(n, x, y))
            .collect(),
        shapes,
        ..Default::default()
    }
}

fn props(lf: &LogicForm) -> Vec<IndicatorProperty> {
    let mut p: Vec<_> = lf.indicators.iter().map(|i| i.property).collect();
    p.sort();
    p
}

#[test]
fn point_names_overflow_with_suffix() {
    assert_eq!(point_name(0), "a");
    assert_eq!(point_name(25), "z");
    assert_eq!(point_name(26), "a1");
    assert_eq!(point_name(53), "b2");
}

#[test]
fn single_op_closure() {
    let cfg = GenConfig {
        k_min: 3,
        k_max: 3,
        ..GenConfig::only(Op::Point)
    };
    let lf = generate_configuration(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(lf.points.len(), 3);
    assert!(lf.lines.is_empty() && lf.shapes.is_empty() && lf.relations.is_empty());
}

#[test]
fn inapplicable_ops_exhaust_retries() {
    let cfg = GenConfig {
        retries_per_op: 5,
        ..GenConfig::only(Op::Segment)
    };
    let err = generate_configuration(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
    assert!(matches!(
        err,
        GenError::ExhaustedRetries {
            step: 0,
            retries: 5
        }
    ));
    let err = generate_logic_form(
        &GenConfig {
            max_restarts: 2,
            ..cfg
        },
        0,
    )
    .unwrap_err();
    assert!(matches!(err, GenError::SampleFailed { restarts: 2, .. }));
}

#[test]
fn config_validation() {
    assert!(GenConfig::default().validate().is_ok());
    assert!(GenConfig {
        k_min: 9,
        k_max: 3,
        ..Default::default()
    }
    .validate()
    .is_err());
    let mut cfg = GenConfig::default();
    cfg.op_weights.values_mut().for_each(|w| *w = 0.0);
    assert!(cfg.validate().is_err());
    let mut cfg = GenConfig::only(Op::Polygon);
    cfg.shape_weights.clear();
    assert!(cfg.validate().is_err());
    let cfg: GenConfig =
        serde_json::from_str(r#"{"seed": 5, "op_weights": {"point": 1.0}}"#).unwrap();
    assert_eq!((cfg.seed, cfg.k_min, cfg.op_weights.len()), (5, 5, 1));
}

#[test]
fn fixed_seed_is_deterministic() {
    let cfg = GenConfig {
        seed: 42,
        ..Default::default()
    };
    for i in 0..20 {
        let a = serialize(&generate_logic_form(&cfg, i).unwrap());
        let b = serialize(&generate_logic_form(&cfg, i).unwrap());
        assert_eq!(a, b);
    }
    let other = GenConfig {
        seed: 43,
        ..Default::default()
    };
    assert_ne!(
        serialize(&generate_logic_form(&cfg, 0).unwrap()),
        serialize(&generate_logic_form(&other, 0).unwrap())
    );
}

#[test]
fn generated_forms_are_valid_and_round_trip() {
    let cfg = GenConfig {
        seed: 3,
        ..Default::default()
    };
    for i in 0..200 {
        let lf = generate_logic_form(&cfg, i).unwrap();
        let text = serialize(&lf);
        let (back, warnings) = parse_with_warnings(&text).unwrap();
        assert!(warnings.is_empty(), "{i}: {warnings:?}\n{text}");
        assert!(back.structurally_eq(&lf), "{i}\n{text}");
        assert_eq!(
            check_degeneracy(&back, &cfg.tolerances),
            Ok(()),
            "{i}\n{text}"
        );
        for ind in &lf.indicators {
            assert!(
                indicator_holds(&lf, ind, &EnrichTolerances::default()),
                "{i}: {ind:?}"
            );
        }
    }
}

#[test]
fn generated_forms_render() {
    let cfg = GenConfig {
        seed: 11,
        image_size: 128,
        ..Default::default()
    };
    for i in 0..30 {
        let s = generate_sample(&cfg, i).unwrap();
        assert_eq!(s.id, format!("sample_{i}"));
        assert_eq!((s.image.width(), s.image.height()), (128, 128));
        assert!(!s.image.is_all_black());
        assert!(!renders_black(&parse(&s.answer).unwrap(), 64));
    }
}

#[test]
fn mean_counts_near_targets() {
    let cfg = GenConfig {
        seed: 2024,
        ..Default::default()
    };
    let forms: Vec<LogicForm> = (0..1000)
        .map(|i| generate_logic_form(&cfg, i).unwrap())
        .collect();
    let m = DatasetStats::from_forms(&forms).means();
    for (got, want) in [
        (m.points, 6.0),
        (m.lines, 7.0),
        (m.polygons, 2.0),
        (m.circles, 1.0),
    ] {
        assert!((got - want).abs() <= 0.3 * want, "{m:?}");
    }
}

#[test]
fn right_triangle_gets_right_angle_at_origin() {
    let lf = form(
        &[("a", 0.0, 0.0), ("b", 0.4, 0.0), ("c", 0.0, 0.3)],
        vec![ShapeDecl::polygon(ShapeKind::Triangle, &["a", "b", "c"])],
    );
    let out = enrich_indicators(&lf, &EnrichTolerances::default());
    assert_eq!(out.indicators.len(), 1);
    assert_eq!(out.indicators[0].property, IndicatorProperty::RightAngle);
    assert_eq!(
        out.indicators[0].operands,
        vec![IndicatorOperand::vertex("a")]
    );
}

#[test]
fn square_gets_parallel_perpendicular_and_equals() {
    let lf = form(
        &[
            ("a", 0.0, 0.0),
            ("b", 1.0, 0.0),
            ("c", 1.0, 1.0),
            ("d", 0.0, 1.0),
        ],
        vec![ShapeDecl::polygon(ShapeKind::Square, &["a", "b", "c", "d"])],
    );
    let out = enrich_indicators(&lf, &EnrichTolerances::default());
    let p = props(&out);
    assert_eq!(
        p.iter()
            .filter(|x| **x == IndicatorProperty::Parallel)
            .count(),
        2
    );
    assert!(p.contains(&IndicatorProperty::Perpendicular));
    let eq: Vec<&IndicatorDecl> = out
        .indicators
        .iter()
        .filter(|i| i.property == IndicatorProperty::Equals)
        .collect();
    assert_eq!(eq.len(), 1);
    assert_eq!(eq[0].operands.len(), 4);
}

#[test]
fn scalene_triangle_gets_nothing() {
    let lf = form(
        &[("a", 0.1, 0.1), ("b", 0.8, 0.25), ("c", 0.3, 0.7)],
        vec![ShapeDecl::polygon(ShapeKind::Triangle, &["a", "b", "c"])],
    );
    // Angle oracle: all three angles well away from 90 degrees.
    let v: Vec<Vec2> = lf.points.iter().map(|p| p.position()).collect();
    for i in 0..3 {
        let a = crate::geometry::angle_at(v[i], v[(i + 1) % 3], v[(i + 2) % 3])
            .unwrap()
            .to_degrees();
        assert!((a - 90.0).abs() > 5.0);
    }
    assert!(enrich_indicators(&lf, &EnrichTolerances::default())
        .indicators
        .is_empty());
}

#[test]
fn enrichment_keeps_existing_and_is_idempotent() {
    let mut lf = form(
        &[("a", 0.0, 0.0), ("b", 0.4, 0.0), ("c", 0.0, 0.3)],
        vec![ShapeDecl::polygon(
            ShapeKind::RightTriangle,
            &["a", "b", "c"],
        )],
    );
    lf.indicators.push(IndicatorDecl {
        shape: lf.shapes[0].shape_ref(),
        property: IndicatorProperty::RightAngle,
        operands: vec![IndicatorOperand::vertex("a")],
    });
    let tol = EnrichTolerances::default();
    let once = enrich_indicators(&lf, &tol);
    assert_eq!(once, lf);
    assert_eq!(enrich_indicators(&once, &tol), once);
}

#[test]
fn triangle_classification() {
    let tol = EnrichTolerances::default();
    let v = |x: f64, y: f64| Vec2::new(x, y);
    let h = 3f64.sqrt() / 2.0;
    assert_eq!(
        classify_triangle([v(0.0, 0.0), v(1.0, 0.0), v(0.5, h)], &tol),
        ShapeKind::EquilateralTriangle
    );
    assert_eq!(
        classify_triangle([v(0.0, 0.0), v(0.4, 0.0), v(0.0, 0.3)], &tol),
        ShapeKind::RightTriangle
    );
    assert_eq!(
        classify_triangle([v(0.0, 0.0), v(1.0, 0.0), v(0.5, 0.3)], &tol),
        ShapeKind::IsoscelesTriangle
    );
    assert_eq!(
        classify_triangle([v(0.1, 0.1), v(0.8, 0.25), v(0.3, 0.7)], &tol),
        ShapeKind::Triangle
    );
}

#[test]
fn convexity_check() {
    let v = |x: f64, y: f64| Vec2::new(x, y);
    assert!(convex_polygon(
        &[v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)],
        0.1
    ));
    assert!(!convex_polygon(
        &[v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0), v(1.0, 1.0)],
        0.1
    ));
    assert!(!convex_polygon(
        &[v(0.0, 0.0), v(0.5, 0.01), v(1.0, 0.0)],
        0.1
    ));
    // A pentagram turns twice.
    let star: Vec<Vec2> = (0..5)
        .map(|i| Vec2::new(0.0, 1.0).rotated(i as f64 * 4.0 * std::f64::consts::PI / 5.0))
        .collect();
    assert!(!convex_polygon(&star, 0.1));
}

#[test]
fn degeneracy_examples() {
    let tol = DegeneracyTolerances::default();
    assert!(matches!(
        check_degeneracy(&form(&[("a", 0.01, 0.5)], vec![]), &tol),
        Err(Degeneracy::OutOfFrame(_))
    ));
    let close = form(&[("a", 0.5, 0.5), ("b", 0.51, 0.5)], vec![]);
    assert!(matches!(
        check_degeneracy(&close, &tol),
        Err(Degeneracy::TooClose(..))
    ));
    let mut circles = form(
        &[
            ("o", 0.5, 0.5),
            ("p", 0.51, 0.5),
            ("q", 0.7, 0.5),
            ("r", 0.72, 0.5),
        ],
        vec![],
    );
    circles.points[1] = PointDecl::new("p", 0.5, 0.7);
    circles.points[3] = PointDecl::new("r", 0.5, 0.29);
    circles.shapes = vec![
        ShapeDecl::circle("o", Some(0.2)),
        ShapeDecl::circle("q", Some(0.2)),
    ];
    assert_eq!(check_degeneracy(&circles, &tol), Ok(()));
    circles.points[2] = PointDecl::new("q", 0.51, 0.5);
    circles.points[0] = PointDecl::new("o", 0.5, 0.55);
    circles.points[2] = PointDecl::new("q", 0.5, 0.56);
    assert!(check_degeneracy(&circles, &tol).is_err());
}

#[test]
fn emit_one_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig {
        seed: 9,
        count: 1,
        image_size: 96,
        ..Default::default()
    };
    let manifest = emit_dataset(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.ids, vec!["sample_0"]);
    let rec: MetaRecord =
        serde_json::from_str(&fs::read_to_string(dir.path().join("meta/sample_0.json")).unwrap())
            .unwrap();
    assert_eq!(rec.image, "images/sample_0.png");
    let from: Vec<&str> = rec.conversations.iter().map(|t| t.from.as_str()).collect();
    assert_eq!(from, ["human", "gpt"]);
    assert_eq!(
        rec.conversations[0].value,
        "<image>\nGenerate the logic forms for this geometric diagram."
    );
    assert!(parse(&rec.conversations[1].value).is_ok());
    let img = crate::renderer::RasterImage::read_png(&dir.path().join(&rec.image)).unwrap();
    assert_eq!(img.width(), 96);
    let on_disk: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(on_disk, manifest);
}

#[test]
fn emit_zero_samples() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_dataset(
        &GenConfig {
            count: 0,
            ..Default::default()
        },
        dir.path(),
    )
    .unwrap();
    assert!(manifest.ids.is_empty());
    assert!(!dir.path().join("images").exists() && !dir.path().join("meta").exists());
    let stats = dataset_stats(dir.path()).unwrap();
    assert_eq!(stats, DatasetStats::default());
}

#[test]
fn regeneration_is_byte_identical() {
    let cfg = GenConfig {
        seed: 77,
        count: 4,
        image_size: 64,
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_dataset(&cfg, a.path()).unwrap();
    emit_dataset(&cfg, b.path()).unwrap();
    for i in 0..4 {
        for rel in [
            format!("meta/sample_{i}.json"),
            format!("images/sample_{i}.png"),
        ] {
            assert_eq!(
                fs::read(a.path().join(&rel)).unwrap(),
                fs::read(b.path().join(&rel)).unwrap(),
                "{rel}"
            );
        }
    }
    assert_eq!(
        fs::read(a.path().join("manifest.json")).unwrap(),
        fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn stats_of_single_circle_sample_and_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta");
    fs::create_dir_all(&meta).unwrap();
    let rec = MetaRecord {
        id: "sample_0".into(),
        image: "images/sample_0.png".into(),
        conversations: vec![
            dataset::Turn { from: "human".into(), value: HUMAN_PROMPT.into() },
            dataset::Turn {
                from: "gpt".into(),
                value: "Point(o, 0.5, 0.5)\nPoint(p, 0.7, 0.5)\nShape(Circle(o))\nRelation(PointLiesOnCircle(p, Circle(o, radius)))".into(),
            },
        ],
    };
    fs::write(
        meta.join("sample_0.json"),
        serde_json::to_string(&rec).unwrap(),
    )
    .unwrap();
    fs::write(meta.join("sample_1.json"), "{not json").unwrap();
    let stats = dataset_stats(dir.path()).unwrap();
    assert_eq!(stats.samples, 1);
    assert_eq!(
        stats.shape_distribution(),
        vec![("Circle".to_string(), 100.0)]
    );
    assert_eq!(stats.errors.len(), 1);
    assert!(stats.errors[0].contains("sample_1.json"));
    assert!(dataset_stats(&dir.path().join("missing")).is_err());
}

#[test]
fn report_formatting_on_reference_proportions() {
    let mut stats = DatasetStats {
        samples: 1000,
        ..Default::default()
    };
    for (k, c) in [
        ("Circle", 279),
        ("RightTriangle", 102),
        ("Triangle", 100),
        ("Square", 519),
    ] {
        stats.shape_counts.insert(k.into(), c);
    }
    for (k, c) in [
        ("Equals", 349),
        ("PointLiesOnLine", 323),
        ("PointLiesOnCircle", 200),
        ("Parallel", 128),
    ] {
        stats.relation_counts.insert(k.into(), c);
    }
    let text = stats.to_string();
    for line in [
        "  Circle                27.9%",
        "  RightTriangle         10.2%",
        "  Triangle              10.0%",
        "  Equals                34.9%",
        "  PointLiesOnLine       32.3%",
        "  PointLiesOnCircle     20.0%",
    ] {
        assert!(text.contains(line), "{text}");
    }
    assert!(text.find("Square").unwrap() < text.find("Circle").unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_respect_degeneracy_and_enrichment(seed in any::<u64>(), index in 0usize..1000) {
        let cfg = GenConfig { seed, ..Default::default() };
        let lf = generate_logic_form(&cfg, index).unwrap();
        prop_assert_eq!(check_degeneracy(&lf, &cfg.tolerances), Ok(()));
        prop_assert!(lf.validate().is_ok());
        let tol = EnrichTolerances::default();
        prop_assert_eq!(enrich_indicators(&lf, &tol), lf.clone());
        for ind in &lf.indicators {
            prop_assert!(indicator_holds(&lf, ind, &tol));
        }
    }
}
