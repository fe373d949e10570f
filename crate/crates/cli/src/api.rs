//! Request handling shared by the command line and the HTTP service. Every
//! function here is pure apart from the optional embedding provider, and
//! returns the JSON value that either front end prints or wraps.

use std::collections::BTreeMap;
use std::fmt;

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use symdiag_core::logic_form::{parse, LogicFormError};
use symdiag_core::metrics::EmbeddingProvider;
use symdiag_core::renderer::{
    render, render_text, try_render, RasterImage, RenderError, RenderStyle, DEFAULT_SIZE, MAX_SIZE,
};
use symdiag_core::reward_engine::{
    adaptive_total, reward_visual, round_sig, score_logic_text, AggregationMode, RewardConfig,
    VisualScores, VisualWeights, BREAKDOWN_VERSION,
};
use symdiag_core::rl_shaping::{shape_group, ShapingConfig, ShapingError, ShapingMode};

pub const API_VERSION: &str = "v1";

/// Digits kept in emitted numbers unless full precision is requested.
pub const SIG_DIGITS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(422, code, message)
    }

    /// Whether the caller passed bad parameters, as opposed to bad data or
    /// an internal fault. The command line maps this to its usage exit code.
    pub fn is_usage(&self) -> bool {
        matches!(
            self.code,
            "invalid_request"
                | "invalid_config"
                | "invalid_size"
                | "group_too_small"
                | "non_finite"
        )
    }

    pub fn to_json(&self) -> Value {
        json!({ "code": self.code, "message": self.message, "detail": self.detail })
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

fn logic_form_error(code: &'static str, what: &str, e: &LogicFormError) -> ApiError {
    ApiError::invalid(code, format!("{what}: {e}")).with_detail(json!({ "category": e.category() }))
}

/// Rounds every non-integer number in `v` to [`SIG_DIGITS`] significant digits.
pub fn round_json(v: Value, precise: bool) -> Value {
    if precise {
        return v;
    }
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n
            .as_f64()
            .map(|x| json!(round_sig(x, SIG_DIGITS)))
            .unwrap_or(Value::Number(n)),
        Value::Array(a) => Value::Array(a.into_iter().map(|x| round_json(x, false)).collect()),
        Value::Object(o) => Value::Object(
            o.into_iter()
                .map(|(k, x)| (k, round_json(x, false)))
                .collect(),
        ),
        other => other,
    }
}

fn check_size(size: Option<usize>) -> Result<usize, ApiError> {
    let size = size.unwrap_or(DEFAULT_SIZE);
    if size == 0 || size > MAX_SIZE {
        return Err(ApiError::invalid(
            "invalid_size",
            format!("size must be between 1 and {MAX_SIZE}, got {size}"),
        ));
    }
    Ok(size)
}

fn check_r_math(r_math: Option<f64>) -> Result<Option<f64>, ApiError> {
    match r_math {
        Some(r) if !(0.0..=1.0).contains(&r) => Err(ApiError::invalid(
            "invalid_request",
            format!("r_math must lie in [0, 1], got {r}"),
        )),
        other => Ok(other),
    }
}

fn insert_visual(m: &mut BTreeMap<String, Value>, v: &VisualScores, precise: bool) -> Vec<String> {
    let r = |x: f64| if precise { x } else { round_sig(x, SIG_DIGITS) };
    m.insert("mse_r".into(), json!(r(v.mse_r)));
    m.insert("ssim_r".into(), json!(r(v.ssim_r)));
    if let Some(e) = v.embed_r {
        m.insert("embed_r".into(), json!(r(e)));
    }
    m.insert("r_vis".into(), json!(r(v.r_vis)));
    v.embed_warning
        .iter()
        .map(|w| format!("embedding term skipped: {w}"))
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScoreLogicRequest {
    pub pred: String,
    pub gt: String,
    #[serde(default)]
    pub mode: AggregationMode,
    #[serde(default)]
    pub config: Option<RewardConfig>,
    /// Also render both forms and report the visual reward.
    #[serde(default)]
    pub visual: bool,
    #[serde(default)]
    pub size: Option<usize>,
    /// Answer reward for the adaptive total; requires `visual`.
    #[serde(default)]
    pub r_math: Option<f64>,
    #[serde(default)]
    pub precise: bool,
}

impl ScoreLogicRequest {
    pub fn new(pred: impl Into<String>, gt: impl Into<String>, mode: AggregationMode) -> Self {
        Self {
            pred: pred.into(),
            gt: gt.into(),
            mode,
            config: None,
            visual: false,
            size: None,
            r_math: None,
            precise: false,
        }
    }
}

/// Reward breakdown as a flat key to number object. A prediction that does
/// not parse scores zero; a ground truth that does not parse is an error.
pub fn score_logic(
    req: &ScoreLogicRequest,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Value, ApiError> {
    let cfg = req.config.unwrap_or_default();
    cfg.validate()
        .map_err(|e| ApiError::invalid("invalid_config", e.to_string()))?;
    let r_math = check_r_math(req.r_math)?;
    if r_math.is_some() && !req.visual {
        return Err(ApiError::invalid(
            "invalid_request",
            "r_math requires visual scoring",
        ));
    }
    let size = if req.visual {
        check_size(req.size)?
    } else {
        DEFAULT_SIZE
    };
    let mut breakdown = score_logic_text(&req.pred, &req.gt, req.mode, &cfg)
        .map_err(|e| logic_form_error("invalid_ground_truth", "ground truth does not parse", &e))?;

    let mut warnings = Vec::new();
    if req.visual {
        let style = RenderStyle::default();
        let gt_lf = parse(&req.gt).map_err(|e| {
            logic_form_error("invalid_ground_truth", "ground truth does not parse", &e)
        })?;
        let gt_img = render(&gt_lf, &style, size);
        let pred_img = render_text(&req.pred, &style, size);
        let visual = reward_visual(&pred_img, &gt_img, &cfg, provider)
            .map_err(|e| ApiError::new(500, "internal", e.to_string()))?;
        if let Some(w) = &visual.embed_warning {
            warnings.push(format!("embedding term skipped: {w}"));
        }
        breakdown.adaptive = r_math.map(|r| adaptive_total(visual.r_vis, r, &cfg.adaptive));
        breakdown.visual = Some(visual);
    }
    let mut flat = breakdown.to_flat(req.precise);
    if !warnings.is_empty() {
        flat.insert("warnings".into(), json!(warnings));
    }
    Ok(json!(flat))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScoreVisualRequest {
    #[serde(default)]
    pub pred_image_b64: Option<String>,
    #[serde(default)]
    pub pred_logic: Option<String>,
    #[serde(default)]
    pub gt_image_b64: Option<String>,
    #[serde(default)]
    pub gt_logic: Option<String>,
    #[serde(default)]
    pub weights: Option<VisualWeights>,
    /// Render size for logic inputs. Defaults to the size of a supplied
    /// image, else 512.
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub r_math: Option<f64>,
    #[serde(default)]
    pub precise: bool,
}

enum VisualInput<'a> {
    Image(&'a str),
    Logic(&'a str),
}

fn one_of<'a>(
    side: &str,
    image: &'a Option<String>,
    logic: &'a Option<String>,
) -> Result<VisualInput<'a>, ApiError> {
    match (image, logic) {
        (Some(i), None) => Ok(VisualInput::Image(i)),
        (None, Some(l)) => Ok(VisualInput::Logic(l)),
        _ => Err(ApiError::invalid(
            "invalid_request",
            format!("give exactly one of {side}_image_b64 and {side}_logic"),
        )),
    }
}

pub fn decode_png_b64(side: &str, b64: &str) -> Result<RasterImage, ApiError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map_err(|e| ApiError::new(400, "invalid_base64", format!("{side} image: {e}")))?;
    RasterImage::from_png(&bytes)
        .map_err(|e| ApiError::invalid("invalid_image", format!("{side} image: {e}")))
}

/// Visual reward between two diagrams, each given as a PNG or as logic-form
/// text to render. Prediction text that does not parse renders black; a
/// ground truth that does not parse is an error.
pub fn score_visual(
    req: &ScoreVisualRequest,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Value, ApiError> {
    let pred = one_of("pred", &req.pred_image_b64, &req.pred_logic)?;
    let gt = one_of("gt", &req.gt_image_b64, &req.gt_logic)?;
    let r_math = check_r_math(req.r_math)?;
    let mut cfg = RewardConfig::default();
    if let Some(w) = req.weights {
        cfg.visual = w;
    }
    cfg.validate()
        .map_err(|e| ApiError::invalid("invalid_config", e.to_string()))?;

    let pred_img = match pred {
        VisualInput::Image(b) => Some(decode_png_b64("pred", b)?),
        VisualInput::Logic(_) => None,
    };
    let gt_img = match gt {
        VisualInput::Image(b) => Some(decode_png_b64("gt", b)?),
        VisualInput::Logic(_) => None,
    };
    let natural = gt_img
        .as_ref()
        .or(pred_img.as_ref())
        .map(RasterImage::width);
    let size = check_size(req.size.or(natural))?;
    let style = RenderStyle::default();
    let gt_img = match (gt_img, gt) {
        (Some(img), _) => img,
        (None, VisualInput::Logic(text)) => {
            let lf = parse(text).map_err(|e| {
                logic_form_error("invalid_ground_truth", "ground truth does not parse", &e)
            })?;
            render(&lf, &style, size)
        }
        (None, VisualInput::Image(_)) => unreachable!("image inputs decode above"),
    };
    let pred_img = match (pred_img, pred) {
        (Some(img), _) => img,
        (None, VisualInput::Logic(text)) => render_text(text, &style, size),
        (None, VisualInput::Image(_)) => unreachable!("image inputs decode above"),
    };
    if pred_img.width() != gt_img.width() || pred_img.height() != gt_img.height() {
        return Err(ApiError::invalid(
            "dimension_mismatch",
            format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred_img.width(),
                pred_img.height(),
                gt_img.width(),
                gt_img.height()
            ),
        ));
    }
    let visual = reward_visual(&pred_img, &gt_img, &cfg, provider)
        .map_err(|e| ApiError::new(500, "internal", e.to_string()))?;

    let mut m = BTreeMap::new();
    let warnings = insert_visual(&mut m, &visual, req.precise);
    if let Some(r) = r_math {
        let a = adaptive_total(visual.r_vis, r, &cfg.adaptive);
        for (k, v) in [
            ("gamma", a.gamma),
            ("r_vis_scaled", a.r_vis_scaled),
            ("r_total", a.r_total),
        ] {
            m.insert(
                k.into(),
                json!(if req.precise {
                    v
                } else {
                    round_sig(v, SIG_DIGITS)
                }),
            );
        }
    }
    m.insert("version".into(), json!(BREAKDOWN_VERSION));
    if !warnings.is_empty() {
        m.insert("warnings".into(), json!(warnings));
    }
    Ok(json!(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnError {
    /// Emit an all-black image, the decoder's failure convention.
    #[default]
    Black,
    Fail,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RenderRequest {
    pub logic_form: String,
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub on_error: OnError,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub png: Vec<u8>,
    pub size: usize,
    /// True when the failure path produced the image.
    pub black: bool,
    pub warnings: Vec<String>,
}

impl Rendered {
    pub fn to_json(&self) -> Value {
        json!({
            "image_b64": base64::engine::general_purpose::STANDARD.encode(&self.png),
            "width": self.size,
            "height": self.size,
            "black": self.black,
            "warnings": self.warnings,
        })
    }
}

/// Renders logic-form text to PNG bytes.
pub fn render_png(req: &RenderRequest) -> Result<Rendered, ApiError> {
    let size = check_size(req.size)?;
    let outcome = parse(&req.logic_form)
        .map_err(RenderError::from)
        .and_then(|lf| try_render(&lf, &RenderStyle::default(), size));
    let (img, black, warnings) = match outcome {
        Ok((img, w)) => (img, false, w.iter().map(ToString::to_string).collect()),
        Err(e) if req.on_error == OnError::Fail => {
            let detail = match &e {
                RenderError::Parse(p) => json!({ "category": p.category() }),
                _ => Value::Null,
            };
            return Err(ApiError::invalid("render_failed", e.to_string()).with_detail(detail));
        }
        Err(e) => {
            let img = RasterImage::black(size, size)
                .map_err(|e| ApiError::new(500, "internal", e.to_string()))?;
            (img, true, vec![format!("rendered black: {e}")])
        }
    };
    let png = img
        .to_png()
        .map_err(|e| ApiError::new(500, "internal", e.to_string()))?;
    Ok(Rendered {
        png,
        size,
        black,
        warnings,
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShapeRequest {
    pub rewards: Vec<f64>,
    #[serde(default)]
    pub step: u64,
    #[serde(default)]
    pub total_steps: Option<u64>,
    #[serde(default)]
    pub mode: ShapingMode,
    #[serde(default)]
    pub config: Option<ShapingConfig>,
    #[serde(default)]
    pub precise: bool,
}

/// Transformed rewards and group advantages for one rollout group.
pub fn shape(req: &ShapeRequest) -> Result<Value, ApiError> {
    let mut cfg = req.config.unwrap_or_default();
    if let Some(n) = req.total_steps {
        cfg.total_steps = n;
    }
    let group = shape_group(&req.rewards, req.step, req.mode, &cfg).map_err(|e| {
        let code = match e {
            ShapingError::GroupTooSmall(_) => "group_too_small",
            ShapingError::NonFinite { .. } => "non_finite",
            ShapingError::Config(_) => "invalid_config",
        };
        ApiError::invalid(code, e.to_string())
    })?;
    let v =
        serde_json::to_value(&group).map_err(|e| ApiError::new(500, "internal", e.to_string()))?;
    Ok(round_json(v, req.precise))
}
