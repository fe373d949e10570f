use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use symdiag_core::logic_form::{parse, serialize};
use symdiag_core::metrics::HttpEmbeddingProvider;
use symdiag_core::renderer::{render, render_text, RenderStyle};
use symdiag_core::reward_engine::{
    reward_visual, score_logic, score_logic_text, AggregationMode, RewardConfig,
};
use symdiag_core::rl_shaping::{shape_group, ShapingConfig, ShapingMode};
use symdiag_core::synthgen::{generate_sample, GenConfig};

#[test]
fn generated_sample_round_trips_through_text_and_pixels() {
    let cfg = GenConfig {
        image_size: 128,
        ..GenConfig::default()
    };
    let rc = RewardConfig::default();
    for i in 0..10 {
        let s = generate_sample(&cfg, i).unwrap();
        let lf = parse(&s.answer).unwrap();
        assert_eq!(serialize(&lf), s.answer);
        assert_eq!(score_logic(&lf, &s.logic_form, &rc).r_logic, 1.0);

        let again = render(&lf, &cfg.style, cfg.image_size);
        let v = reward_visual(&again, &s.image, &rc, None).unwrap();
        assert_eq!(v.r_vis, 1.0, "sample {i}");
    }
}

#[test]
fn rollout_group_rewards_shape_into_ordered_advantages() {
    let cfg = GenConfig::default();
    let gt = serialize(&symdiag_core::synthgen::generate_logic_form(&cfg, 3).unwrap());
    // Progressively truncated predictions score progressively worse.
    let lines: Vec<&str> = gt.lines().collect();
    let rollouts: Vec<String> = [lines.len(), lines.len() * 2 / 3, lines.len() / 3, 0]
        .iter()
        .map(|&n| lines[..n].join("\n"))
        .collect();
    let rewards: Vec<f64> = rollouts
        .iter()
        .map(|p| {
            score_logic_text(p, &gt, AggregationMode::Hier, &RewardConfig::default())
                .unwrap()
                .reward()
        })
        .collect();
    assert_eq!(rewards[0], 1.0);
    assert!(rewards.windows(2).all(|w| w[0] >= w[1]), "{rewards:?}");

    let shaped = shape_group(&rewards, 0, ShapingMode::Power, &ShapingConfig::default()).unwrap();
    assert!(shaped.advantages.windows(2).all(|w| w[0] >= w[1]));
    assert!(shaped.advantages.iter().sum::<f64>().abs() < 1e-12);
}

/// Answers each connection with the given status and body.
fn mock_provider(responses: Vec<(u16, String)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}/embed")
}

#[test]
fn http_embedding_provider_contributes_and_retries() {
    let style = RenderStyle::default();
    let img = render_text(
        "Point(a, 0.2, 0.2)\nPoint(b, 0.8, 0.6)\nLine(ab)",
        &style,
        64,
    );
    let rc = RewardConfig::default();

    let url = mock_provider(vec![
        (503, "{}".into()),
        (200, r#"{"embeddings": [[1.0, 0.0], [0.6, 0.8]]}"#.into()),
    ]);
    let provider = HttpEmbeddingProvider::new(url);
    let v = reward_visual(&img, &img, &rc, Some(&provider)).unwrap();
    assert!((v.embed_r.unwrap() - 0.6).abs() < 1e-12);
    assert!((v.r_vis - (0.6 + 0.3 + 0.1 * 0.6)).abs() < 1e-12);

    let url = mock_provider(vec![(200, r#"{"embeddings": [[1.0]]}"#.into())]);
    let v = reward_visual(&img, &img, &rc, Some(&HttpEmbeddingProvider::new(url))).unwrap();
    assert_eq!(v.embed_r, None);
    assert_eq!(v.r_vis, 1.0);
    assert!(v.embed_warning.unwrap().contains("two embeddings"));
}
