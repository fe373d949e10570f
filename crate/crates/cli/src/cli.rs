//! The `symdiag` command line. Exit status is 0 on success, 1 on an
//! operational failure (I/O, unreadable data) and 2 on a usage error.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use symdiag_core::metrics::{EmbeddingProvider, HttpEmbeddingProvider};
use symdiag_core::reward_engine::{AggregationMode, RewardConfig};
use symdiag_core::rl_shaping::{ShapingConfig, ShapingMode};
use symdiag_core::synthgen::{dataset_stats, emit_dataset, GenConfig, GenError};

use crate::api::{self, ApiError, OnError};
use crate::service::{self, AppState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "symdiag",
    version,
    about = "Synthetic geometry diagrams, logic-form rewards and GRPO reward shaping"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of diagrams and logic forms.
    Gen(GenArgs),
    /// Render a logic form to PNG.
    Render(RenderArgs),
    /// Score a predicted logic form against a ground truth.
    Score(ScoreArgs),
    /// Shape one group of rollout rewards into advantages.
    Shape(ShapeArgs),
    /// Run the HTTP scoring service.
    Serve(ServeArgs),
    /// Summarize an emitted dataset.
    Stats(StatsArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Fewest construction steps per sample.
    #[arg(long)]
    pub min_ops: Option<usize>,
    /// Most construction steps per sample.
    #[arg(long)]
    pub max_ops: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    /// JSON generator config; flags given explicitly take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OnErrorArg {
    Black,
    Fail,
}

#[derive(Debug, clap::Args)]
pub struct RenderArgs {
    /// Logic-form file, or `-` for stdin.
    #[arg(default_value = "-")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = OnErrorArg::Black)]
    pub on_error: OnErrorArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Hier,
    Flat,
}

#[derive(Debug, clap::Args)]
pub struct ScoreArgs {
    /// Predicted logic form, or `-` for stdin.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Hier)]
    pub mode: ModeArg,
    /// Hierarchical gating strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Position reward distance scale.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Render both forms and add the visual reward.
    #[arg(long)]
    pub visual: bool,
    /// Embedding service URL; defaults to SYMDIAG_EMBED_URL.
    #[arg(long)]
    pub embed_endpoint: Option<String>,
    /// Answer reward for the adaptive total (with --visual).
    #[arg(long)]
    pub r_math: Option<f64>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Emit full-precision numbers.
    #[arg(long)]
    pub precise: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeModeArg {
    Power,
    Noise,
    None,
}

#[derive(Debug, clap::Args)]
pub struct ShapeArgs {
    /// Comma-separated group rewards.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub rewards: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub step: u64,
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long, value_enum, default_value_t = ShapeModeArg::Power)]
    pub mode: ShapeModeArg,
    #[arg(long)]
    pub pmax: Option<f64>,
    #[arg(long)]
    pub pmin: Option<f64>,
    #[arg(long)]
    pub precise: bool,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, clap::Args)]
pub struct StatsArgs {
    pub dir: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

enum Failure {
    Usage(String),
    Op(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Op(e)
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Op(e.into())
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Op(other.into()),
        }
    }
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Op(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Gen(a) => gen(a, out),
        Command::Render(a) => render(a, err),
        Command::Score(a) => score(a, out),
        Command::Shape(a) => shape(a, out),
        Command::Serve(a) => serve(a),
        Command::Stats(a) => stats(a, out),
    }
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    writeln!(out, "{text}").context("writing output")?;
    Ok(())
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<GenConfig>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => GenConfig::default(),
    };
    cfg.count = a.count;
    cfg.seed = a.seed;
    if let Some(k) = a.min_ops {
        cfg.k_min = k;
    }
    if let Some(k) = a.max_ops {
        cfg.k_max = k;
    }
    if let Some(s) = a.size {
        cfg.image_size = s;
    }
    cfg.validate()?;
    emit_dataset(&cfg, &a.out)?;
    let stats = dataset_stats(&a.out)?;
    emit(
        out,
        &format!("manifest: {}", a.out.join("manifest.json").display()),
    )?;
    write!(out, "{stats}").context("writing output")?;
    Ok(())
}

fn render(a: RenderArgs, err: &mut dyn Write) -> Result<(), Failure> {
    let text = read_input(&a.input)?;
    let on_error = match a.on_error {
        OnErrorArg::Black => OnError::Black,
        OnErrorArg::Fail => OnError::Fail,
    };
    let rendered = api::render_png(&api::RenderRequest {
        logic_form: text,
        size: Some(a.size),
        on_error,
    })
    .map_err(|e| {
        if e.is_usage() {
            Failure::from(e)
        } else {
            Failure::Op(e.into())
        }
    })?;
    for w in &rendered.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    fs::write(&a.out, &rendered.png).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn provider_for(endpoint: Option<String>) -> Option<Arc<dyn EmbeddingProvider>> {
    match endpoint {
        Some(url) => Some(Arc::new(HttpEmbeddingProvider::new(url))),
        None => {
            HttpEmbeddingProvider::from_env().map(|p| Arc::new(p) as Arc<dyn EmbeddingProvider>)
        }
    }
}

fn score(a: ScoreArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let pred = read_input(&a.pred)?;
    let gt = read_input(&a.gt)?;
    let mut config = RewardConfig::default();
    if let Some(alpha) = a.alpha {
        config.alpha_hier = alpha;
    }
    if let Some(tau) = a.tau {
        config.tau_position = tau;
    }
    let mode = match a.mode {
        ModeArg::Hier => AggregationMode::Hier,
        ModeArg::Flat => AggregationMode::Flat,
    };
    let req = api::ScoreLogicRequest {
        config: Some(config),
        visual: a.visual,
        size: a.size,
        r_math: a.r_math,
        precise: a.precise,
        ..api::ScoreLogicRequest::new(pred, gt, mode)
    };
    let provider = if a.visual {
        provider_for(a.embed_endpoint)
    } else {
        None
    };
    let v = api::score_logic(&req, provider.as_deref())?;
    emit(out, &v.to_string())
}

fn shape(a: ShapeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut config = ShapingConfig::default();
    if let Some(p) = a.pmax {
        config.power.p_max = p;
    }
    if let Some(p) = a.pmin {
        config.power.p_min = p;
    }
    let mode = match a.mode {
        ShapeModeArg::Power => ShapingMode::Power,
        ShapeModeArg::Noise => ShapingMode::Noise,
        ShapeModeArg::None => ShapingMode::None,
    };
    let req = api::ShapeRequest {
        rewards: a.rewards,
        step: a.step,
        total_steps: a.total_steps,
        mode,
        config: Some(config),
        precise: a.precise,
    };
    let v = api::shape(&req)?;
    emit(out, &v.to_string())
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    let addr = SocketAddr::new(a.host, a.port);
    runtime
        .block_on(service::serve(addr, AppState::from_env()))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let stats = dataset_stats(&a.dir)?;
    if a.json {
        let mut v = serde_json::to_value(&stats).context("encoding stats")?;
        v["means"] = serde_json::to_value(stats.means()).context("encoding stats")?;
        emit(out, &api::round_json(v, false).to_string())
    } else {
        write!(out, "{stats}").context("writing output")?;
        Ok(())
    }
}
