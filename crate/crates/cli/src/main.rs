use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

mod commands;

/// Process outcome with its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Evaluation or check finished but found errors (exit 1).
    Findings(String),
    /// Bad arguments, unreadable or malformed inputs (exit 2).
    Usage(anyhow::Error),
    /// Perception backend could not be reached (exit 3).
    Backend(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Findings(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Backend(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Findings(_) => "findings",
            Failure::Usage(_) => "usage",
            Failure::Backend(_) => "backend-unreachable",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Findings(m) => m.clone(),
            Failure::Usage(e) | Failure::Backend(e) => format!("{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

pub type CmdResult = Result<(), Failure>;

/// One JSON object per line on stderr.
pub fn diag(level: &str, code: &str, message: &str) {
    let line = json!({"level": level, "code": code, "message": message});
    eprintln!("{line}");
}

#[derive(Parser)]
#[command(
    name = "vprog",
    version,
    about = "Visual-program evaluation of text-to-image outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Skill-based prompt corpus.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Run evaluation programs against a perception backend.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Parse, format, validate or generate evaluation programs.
    #[command(subcommand)]
    Program(ProgramCmd),
    /// Two-step layout text codec.
    #[command(subcommand)]
    Layout(LayoutCmd),
    /// Correlation and agreement statistics over CSV columns.
    Correlate(CorrelateArgs),
    /// Render or summarize evaluation reports.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand)]
pub enum BenchCmd {
    Generate(BenchGenerateArgs),
}

#[derive(Args)]
pub struct BenchGenerateArgs {
    /// `all` or one of object, count, spatial, scale, text.
    #[arg(long, default_value = "all")]
    pub skill: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vocabulary JSON overriding the defaults.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Output JSON-Lines file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum EvalCmd {
    Run(EvalRunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    CountAsZero,
    Exclude,
}

#[derive(Args)]
pub struct EvalRunArgs {
    /// Fixture JSON backend.
    #[arg(long, conflicts_with = "backend_url")]
    pub fixture: Option<PathBuf>,
    /// Fail on fixture misses instead of returning empty results.
    #[arg(long, requires = "fixture")]
    pub strict_fixture: bool,
    /// Perception service base URL; falls back to VPE_BACKEND_URL.
    #[arg(long)]
    pub backend_url: Option<String>,
    /// Corpus JSON-Lines with `id`, `prompt`, `program` and optional `skill`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// JSON object mapping prompt id to image reference.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long, default_value_t = vprog::perception::DEFAULT_BOX_THRESHOLD)]
    pub box_threshold: f64,
    #[arg(long, default_value_t = vprog::modules::DEFAULT_SCALE_TAU)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "count-as-zero")]
    pub error_policy: PolicyArg,
    /// Model tag copied into every report.
    #[arg(long)]
    pub model: Option<String>,
    /// Remote retries on transport failure or 503.
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ProgramInput {
    /// Program file; stdin when absent or `-`.
    pub file: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum ProgramCmd {
    /// Parse and print the canonical program, or the AST with spans.
    Parse {
        #[command(flatten)]
        input: ProgramInput,
        #[arg(long)]
        ast_json: bool,
    },
    /// Print the canonical form.
    Fmt {
        #[command(flatten)]
        input: ProgramInput,
    },
    /// Report semantic diagnostics; exit 1 on errors.
    Validate {
        #[command(flatten)]
        input: ProgramInput,
    },
    /// Generate a program for an open-ended prompt.
    Gen(ProgramGenArgs),
}

#[derive(Args)]
pub struct ProgramGenArgs {
    #[arg(long)]
    pub prompt: String,
    /// JSON map of prompt to completion; no network access.
    #[arg(long)]
    pub offline_fixture: Option<PathBuf>,
    /// Exemplar JSON replacing the bundled set.
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
    /// Chat endpoint; falls back to VPE_LLM_URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "gpt-35-turbo")]
    pub model: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2)]
    pub max_retries: u32,
    #[arg(long)]
    pub reprompt: bool,
    /// Print the request text instead of sending it.
    #[arg(long)]
    pub print_request: bool,
    /// Emit program, diagnostics and coverage as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Subcommand)]
pub enum LayoutCmd {
    /// JSON layout with normalized boxes to the two text lines.
    Encode {
        file: Option<PathBuf>,
        #[arg(long, default_value_t = vprog::layout::DEFAULT_MAX_COUNT)]
        max_count: u32,
    },
    /// The two text lines (objects, then placements) to canonical text or JSON.
    Decode {
        file: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = vprog::layout::DEFAULT_MAX_COUNT)]
        max_count: u32,
        /// Reject counts above the maximum instead of warning.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Spearman,
    Kappa,
    Alpha,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum AlphaScale {
    Nominal,
    Interval,
}

#[derive(Args)]
pub struct CorrelateArgs {
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// CSV with a header row; empty cells are missing.
    #[arg(long)]
    pub csv: PathBuf,
    /// Comma-separated column names; the first two (spearman, kappa) or all
    /// (alpha) when absent.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    #[arg(long, value_enum, default_value = "nominal")]
    pub alpha_metric: AlphaScale,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RenderFormat {
    Text,
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GroupArg {
    Skill,
    Model,
}

#[derive(Subcommand)]
pub enum ReportCmd {
    Render {
        /// Reports JSON-Lines as written by `eval run`.
        reports: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: RenderFormat,
        /// Write one SVG overlay per report here.
        #[arg(long)]
        overlay_dir: Option<PathBuf>,
        /// Overlay size in pixels, `WxH`.
        #[arg(long, default_value = "512x512")]
        dims: String,
    },
    Summarize {
        reports: PathBuf,
        #[arg(long, value_enum, default_value = "skill")]
        group_by: GroupArg,
        #[arg(long, value_enum, default_value = "text")]
        format: TableFormat,
    },
}

pub fn read_input(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
        }
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .context("cannot read stdin")?;
            Ok(s)
        }
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .context("cannot write stdout")?;
            out.flush().context("cannot write stdout")
        }
    }
}

pub fn read_json_map(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a JSON object of strings", path.display()))
}

pub fn parse_dims(s: &str) -> anyhow::Result<(u32, u32)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("dims {s:?} must look like WxH"))?;
    let w: u32 = w
        .trim()
        .parse()
        .with_context(|| format!("bad width in {s:?}"))?;
    let h: u32 = h
        .trim()
        .parse()
        .with_context(|| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        bail!("dims {s:?} must be positive");
    }
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(BenchCmd::Generate(a)) => commands::bench_generate(a),
        Command::Eval(EvalCmd::Run(a)) => commands::eval_run(a),
        Command::Program(c) => commands::program(c),
        Command::Layout(c) => commands::layout(c),
        Command::Correlate(a) => commands::correlate(a),
        Command::Report(c) => commands::report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            diag("error", f.kind(), &f.message());
            ExitCode::from(f.code())
        }
    }
}
