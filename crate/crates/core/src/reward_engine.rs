//! Verifiable rewards for predicted logic forms: six component scores, flat
//! and hierarchical aggregation, the weighted visual reward and adaptive
//! visual/textual weighting.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_form::{
    canonicalize, parse, IndicatorDecl, LineDecl, LogicForm, LogicFormError, RelationKind,
    ShapeKind,
};
use crate::metrics::{embedding_similarity, mse, ssim, EmbeddingProvider, MetricsError};
use crate::renderer::RasterImage;

/// Version of the flat breakdown key set.
pub const BREAKDOWN_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("tau_position must be positive, got {0}")]
    Tau(f64),
    #[error("alpha_hier must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("visual weights must be nonnegative and not all zero")]
    Weights,
    #[error("adaptive parameters must be finite")]
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualWeights {
    pub mse: f64,
    pub ssim: f64,
    pub embed: f64,
}

impl Default for VisualWeights {
    fn default() -> Self {
        Self {
            mse: 0.6,
            ssim: 0.3,
            embed: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub tau_math: f64,
    pub alpha_scale: f64,
    pub w1: f64,
    pub w2: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            tau_math: 0.5,
            alpha_scale: 1.0,
            w1: 0.3,
            w2: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub tau_position: f64,
    pub alpha_hier: f64,
    pub visual: VisualWeights,
    pub adaptive: AdaptiveConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            tau_position: 0.05,
            alpha_hier: 0.9,
            visual: VisualWeights::default(),
            adaptive: AdaptiveConfig::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tau_position.is_finite() && self.tau_position > 0.0) {
            return Err(ConfigError::Tau(self.tau_position));
        }
        if !(0.0..=1.0).contains(&self.alpha_hier) {
            return Err(ConfigError::Alpha(self.alpha_hier));
        }
        let w = [self.visual.mse, self.visual.ssim, self.visual.embed];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::Weights);
        }
        let a = &self.adaptive;
        if ![a.tau_math, a.alpha_scale, a.w1, a.w2]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(ConfigError::Adaptive);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Hier,
    Flat,
}

/// The six per-component scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Components {
    pub point: f64,
    pub position: f64,
    pub line: f64,
    pub shape: f64,
    pub indicator: f64,
    pub relation: f64,
}

impl Components {
    pub fn all(v: f64) -> Self {
        Self {
            point: v,
            position: v,
            line: v,
            shape: v,
            indicator: v,
            relation: v,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.point,
            self.position,
            self.line,
            self.shape,
            self.indicator,
            self.relation,
        ]
    }

    pub fn mean(&self) -> f64 {
        self.values().iter().sum::<f64>() / 6.0
    }
}

/// `2|p ∩ g| / (|p| + |g|)` over multisets; 1 when both are empty.
pub fn f1<T: Eq + Hash>(pred: &[T], gt: &[T]) -> f64 {
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gt.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for g in gt {
        *counts.entry(g).or_default() += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    2.0 * common as f64 / (pred.len() + gt.len()) as f64
}

pub fn reward_point(pred: &LogicForm, gt: &LogicForm) -> f64 {
    let names = |lf: &LogicForm| lf.points.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
    f1(&names(pred), &names(gt))
}

pub fn reward_line(pred: &LogicForm, gt: &LogicForm) -> f64 {
    let lines = |lf: &LogicForm| lf.lines.iter().map(LineDecl::canonical).collect::<Vec<_>>();
    f1(&lines(pred), &lines(gt))
}

pub fn reward_shape(pred: &LogicForm, gt: &LogicForm) -> f64 {
    let shapes = |lf: &LogicForm| {
        lf.shapes
            .iter()
            .map(|s| (s.kind, s.vertices.clone()))
            .collect::<Vec<(ShapeKind, Vec<String>)>>()
    };
    f1(&shapes(pred), &shapes(gt))
}

/// Indicator F1 gated by the shape reward.
pub fn reward_indicator(pred: &LogicForm, gt: &LogicForm) -> f64 {
    let inds = |lf: &LogicForm| {
        lf.indicators
            .iter()
            .map(IndicatorDecl::canonical)
            .collect::<Vec<_>>()
    };
    reward_shape(pred, gt) * f1(&inds(pred), &inds(gt))
}

/// F1 over the multiset of relation kinds, ignoring operands.
pub fn reward_relation(pred: &LogicForm, gt: &LogicForm) -> f64 {
    let kinds = |lf: &LogicForm| {
        lf.relations
            .iter()
            .map(|r| r.kind)
            .collect::<Vec<RelationKind>>()
    };
    f1(&kinds(pred), &kinds(gt))
}

/// `exp(-d_avg / tau)` over points sharing a name; 1 when both forms have no
/// points, 0 when no name is shared otherwise.
pub fn reward_position(pred: &LogicForm, gt: &LogicForm, tau: f64) -> f64 {
    if pred.points.is_empty() && gt.points.is_empty() {
        return 1.0;
    }
    let gt_pos: HashMap<&str, _> = gt
        .points
        .iter()
        .map(|p| (p.name.as_str(), p.position()))
        .collect();
    let mut seen = std::collections::HashSet::new();
    let dists: Vec<f64> = pred
        .points
        .iter()
        .filter(|p| seen.insert(p.name.as_str()))
        .filter_map(|p| {
            gt_pos
                .get(p.name.as_str())
                .map(|g| p.position().distance(*g))
        })
        .collect();
    if dists.is_empty() {
        return 0.0;
    }
    let d_avg = dists.iter().sum::<f64>() / dists.len() as f64;
    (-d_avg / tau).exp()
}

/// All six raw components on canonicalized inputs.
pub fn raw_components(pred: &LogicForm, gt: &LogicForm, cfg: &RewardConfig) -> Components {
    let p = canonicalize(pred);
    let g = canonicalize(gt);
    Components {
        point: reward_point(&p, &g),
        position: reward_position(&p, &g, cfg.tau_position),
        line: reward_line(&p, &g),
        shape: reward_shape(&p, &g),
        indicator: reward_indicator(&p, &g),
        relation: reward_relation(&p, &g),
    }
}

pub fn aggregate_flat(raw: &Components) -> f64 {
    raw.mean()
}

/// Blends each dependent component with its parent's adjusted value:
/// line on point, shape on line, relation on shape. Point, position and
/// indicator pass through.
pub fn aggregate_hierarchical(raw: &Components, alpha: f64) -> (Components, f64) {
    let gate = |parent: f64| (1.0 - alpha) + alpha * parent;
    let line = raw.line * gate(raw.point);
    let shape = raw.shape * gate(line);
    let relation = raw.relation * gate(shape);
    let adjusted = Components {
        point: raw.point,
        position: raw.position,
        line,
        shape,
        indicator: raw.indicator,
        relation,
    };
    let r_logic = adjusted.mean();
    (adjusted, r_logic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogicScores {
    pub raw: Components,
    pub adjusted: Components,
    pub r_flat: f64,
    pub r_logic: f64,
}

impl LogicScores {
    pub fn zero() -> Self {
        Self {
            raw: Components::default(),
            adjusted: Components::default(),
            r_flat: 0.0,
            r_logic: 0.0,
        }
    }

    pub fn from_raw(raw: Components, alpha: f64) -> Self {
        let (adjusted, r_logic) = aggregate_hierarchical(&raw, alpha);
        Self {
            raw,
            adjusted,
            r_flat: aggregate_flat(&raw),
            r_logic,
        }
    }

    pub fn aggregate(&self, mode: AggregationMode) -> f64 {
        match mode {
            AggregationMode::Hier => self.r_logic,
            AggregationMode::Flat => self.r_flat,
        }
    }
}

pub fn score_logic(pred: &LogicForm, gt: &LogicForm, cfg: &RewardConfig) -> LogicScores {
    LogicScores::from_raw(raw_components(pred, gt, cfg), cfg.alpha_hier)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisualScores {
    pub mse_r: f64,
    pub ssim_r: f64,
    pub embed_r: Option<f64>,
    pub r_vis: f64,
    /// Why the embedding term was skipped, when a provider was given but failed.
    pub embed_warning: Option<String>,
}

/// Weighted mean of the available components, renormalizing the weights
/// over whatever is present.
pub fn combine_visual(mse_r: f64, ssim_r: f64, embed_r: Option<f64>, w: &VisualWeights) -> f64 {
    // Accumulated as a weighted shortfall from 1 so that perfect scores give
    // exactly 1, and weights already summing to one skip the division.
    let mut deficit = w.mse * (1.0 - mse_r) + w.ssim * (1.0 - ssim_r);
    let mut den = w.mse + w.ssim;
    if let Some(e) = embed_r {
        deficit += w.embed * (1.0 - e);
        den += w.embed;
    }
    if den <= 0.0 {
        return 0.0;
    }
    let deficit = if (den - 1.0).abs() <= 1e-9 {
        deficit
    } else {
        deficit / den
    };
    (1.0 - deficit).clamp(0.0, 1.0)
}

/// Visual reward between a reconstruction and its target. A failing
/// provider downgrades to the two pixel-based terms with a warning.
pub fn reward_visual(
    pred: &RasterImage,
    gt: &RasterImage,
    cfg: &RewardConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<VisualScores, MetricsError> {
    let mse_r = (1.0 - mse(pred, gt)?).clamp(0.0, 1.0);
    let ssim_r = ssim(pred, gt)?.clamp(0.0, 1.0);
    let (embed_r, embed_warning) = match provider {
        None => (None, None),
        Some(p) => match embedding_similarity(pred, gt, Some(p)) {
            Ok(c) => (Some(c.clamp(0.0, 1.0)), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let r_vis = combine_visual(mse_r, ssim_r, embed_r, &cfg.visual);
    Ok(VisualScores {
        mse_r,
        ssim_r,
        embed_r,
        r_vis,
        embed_warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveScores {
    pub gamma: f64,
    pub r_vis_scaled: f64,
    pub r_total: f64,
}

/// Damps the visual reward exponentially while the answer reward is at or
/// below `tau_math`, then mixes the two.
pub fn adaptive_total(r_vis: f64, r_math: f64, cfg: &AdaptiveConfig) -> AdaptiveScores {
    let gamma = if r_math > cfg.tau_math {
        1.0
    } else {
        (r_math - cfg.tau_math).exp()
    };
    let r_vis_scaled = cfg.alpha_scale * gamma * r_vis;
    AdaptiveScores {
        gamma,
        r_vis_scaled,
        r_total: cfg.w1 * r_vis_scaled + cfg.w2 * r_math,
    }
}

/// Everything a scoring call reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub mode: AggregationMode,
    pub pred_parsed: bool,
    pub logic: LogicScores,
    pub visual: Option<VisualScores>,
    pub adaptive: Option<AdaptiveScores>,
}

impl RewardBreakdown {
    /// The mode-selected logic aggregate.
    pub fn reward(&self) -> f64 {
        self.logic.aggregate(self.mode)
    }

    /// Flat key to number map. Values are rounded to six significant digits
    /// unless `precise`.
    pub fn to_flat(&self, precise: bool) -> BTreeMap<String, serde_json::Value> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            let v = if precise { v } else { round_sig(v, 6) };
            m.insert(k.to_string(), serde_json::json!(v));
        };
        for (prefix, c) in [("raw", &self.logic.raw), ("adj", &self.logic.adjusted)] {
            for (name, v) in [
                "point",
                "position",
                "line",
                "shape",
                "indicator",
                "relation",
            ]
            .iter()
            .zip(c.values())
            {
                put(&format!("{prefix}_{name}"), v);
            }
        }
        put("r_flat", self.logic.r_flat);
        put("r_logic", self.logic.r_logic);
        put("reward", self.reward());
        put("pred_parsed", if self.pred_parsed { 1.0 } else { 0.0 });
        put(
            "hierarchical",
            if self.mode == AggregationMode::Hier {
                1.0
            } else {
                0.0
            },
        );
        if let Some(v) = &self.visual {
            put("mse_r", v.mse_r);
            put("ssim_r", v.ssim_r);
            if let Some(e) = v.embed_r {
                put("embed_r", e);
            }
            put("r_vis", v.r_vis);
        }
        if let Some(a) = &self.adaptive {
            put("gamma", a.gamma);
            put("r_vis_scaled", a.r_vis_scaled);
            put("r_total", a.r_total);
        }
        m.insert("version".into(), serde_json::json!(BREAKDOWN_VERSION));
        m
    }

    pub fn to_json_string(&self, precise: bool) -> String {
        serde_json::to_string(&self.to_flat(precise)).expect("numbers serialize")
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { 0.0 } else { v };
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), v);
    s.parse().unwrap_or(v)
}

/// Scores prediction text against ground-truth text. A prediction that does
/// not parse scores zero on every component; a ground truth that does not
/// parse is an error.
pub fn score_logic_text(
    pred: &str,
    gt: &str,
    mode: AggregationMode,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown, LogicFormError> {
    let gt = parse(gt)?;
    let (logic, pred_parsed) = match parse(pred) {
        Ok(p) => (score_logic(&p, &gt, cfg), true),
        Err(_) => (LogicScores::zero(), false),
    };
    Ok(RewardBreakdown {
        mode,
        pred_parsed,
        logic,
        visual: None,
        adaptive: None,
    })
}
