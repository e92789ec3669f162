use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use svgcheck::corpus::build::{split_dir, write_atomic, MANIFEST_FILE};
use svgcheck::corpus::{build_corpus, load_split, CorpusConfig, SplitName};
use svgcheck::eval::{emit_report, evaluate_dirs, ReportFormat};
use svgcheck::grpo::{reward_windows, train, write_log_line, GrpoConfig};
use svgcheck::oracle::{oracle_check, OracleClient};
use svgcheck::plan::deserialize_plan;
use svgcheck::text::builtin_font;
use svgcheck::verifier::{curriculum_weights, verify_with, RewardBreakdown, VerifierConfig, DEFAULT_WORKERS};

#[derive(Parser, Debug)]
#[command(
    name = "svgcheck",
    version,
    about = "Geometry checks, corpora, metrics and toy GRPO for box-arrow-text SVG diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus with ground-truth plans and SVGs.
    Gen(GenArgs),
    /// Score one SVG against its layout plan.
    Verify(VerifyArgs),
    /// Compute corpus metrics for a directory of predicted SVGs.
    Eval(EvalArgs),
    /// Train the toy perturbation policy with GRPO against verifier rewards.
    TrainToy(TrainArgs),
    /// Run the protocol self-test against an external render oracle.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Corpus config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multiplier on the full-scale split sizes.
    #[arg(long)]
    scale: Option<f64>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifierFlags {
    /// Verifier config file (JSON).
    #[arg(long = "verifier-config")]
    verifier_config: Option<PathBuf>,
    /// Anchor hit radius in px.
    #[arg(long)]
    tau: Option<f64>,
    /// Minimum text clearance in px.
    #[arg(long)]
    padding: Option<f64>,
}

impl VerifierFlags {
    fn load(&self) -> Result<VerifierConfig> {
        let mut cfg = match &self.verifier_config {
            Some(p) => VerifierConfig::from_json(&read(p)?).with_context(|| p.display().to_string())?,
            None => VerifierConfig::default(),
        };
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(p) = self.padding {
            cfg.padding = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Renderer {
    Builtin,
    External,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Print the full JSON document instead of a summary.
    #[arg(long)]
    json: bool,
    /// Apply the curriculum weights of this update index.
    #[arg(long)]
    update: Option<u64>,
    #[arg(long, value_enum, default_value = "builtin")]
    renderer: Renderer,
    /// Oracle command line, required with `--renderer external`.
    #[arg(long = "oracle-cmd")]
    oracle_cmd: Option<String>,
    #[command(flatten)]
    verifier: VerifierFlags,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Reference split directory.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory holding `<sample_id>.svg` predictions.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-sample records as JSON lines.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Verification worker threads.
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    #[command(flatten)]
    verifier: VerifierFlags,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus root (uses its train split) or a split directory.
    #[arg(long)]
    corpus: PathBuf,
    /// GRPO config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    updates: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long = "group-size")]
    group_size: Option<usize>,
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long = "kl-coeff")]
    kl_coeff: Option<f64>,
    /// Training log (JSON lines); stdout when absent.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    verifier: VerifierFlags,
}

#[derive(Args, Debug)]
struct OracleCheckArgs {
    /// Oracle command line, run through `sh -c`.
    #[arg(long = "oracle-cmd")]
    oracle_cmd: String,
    #[arg(long, default_value_t = 100)]
    requests: usize,
    #[arg(long)]
    json: bool,
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_atomic(p, text.as_bytes())?),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => CorpusConfig::from_json(&read(p)?)?,
        None => CorpusConfig::default(),
    };
    if let Some(s) = a.scale {
        cfg.scale = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let manifest = build_corpus(&cfg, &a.out)?;
    for s in &manifest.splits {
        eprintln!("{:<20} {:>6} samples", s.name.as_str(), s.count);
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyDoc<'a> {
    svg: String,
    plan: String,
    renderer: &'static str,
    valid: bool,
    total: f64,
    breakdown: &'a RewardBreakdown,
    diagnostics: &'a [String],
}

fn verify_cmd(a: VerifyArgs) -> Result<()> {
    if a.renderer == Renderer::External && a.oracle_cmd.is_none() {
        return Err(Usage("--renderer external requires --oracle-cmd".into()).into());
    }
    let cfg = a.verifier.load()?;
    let svg = read(&a.svg)?;
    let plan = deserialize_plan(&read(&a.plan)?).with_context(|| a.plan.display().to_string())?;
    let weights = match a.update {
        Some(u) => curriculum_weights(&cfg.weights, u),
        None => cfg.weights,
    };
    let v = match a.renderer {
        Renderer::Builtin => verify_with(&svg, &plan, &cfg, &weights, builtin_font()),
        Renderer::External => {
            let cmd = a.oracle_cmd.as_deref().expect("checked above");
            let mut client = OracleClient::spawn(cmd)?;
            let cfg = VerifierConfig { weights, ..cfg.clone() };
            svgcheck::oracle::verify_with_oracle(&mut client, "verify", &svg, &plan, &cfg)
        }
    };
    let b = &v.breakdown;
    if a.json {
        let doc = VerifyDoc {
            svg: a.svg.display().to_string(),
            plan: a.plan.display().to_string(),
            renderer: if a.renderer == Renderer::Builtin {
                "builtin"
            } else {
                "external"
            },
            valid: b.exec == 1.0,
            total: b.total,
            breakdown: b,
            diagnostics: &v.diagnostics,
        };
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("total        {:.4}", b.total);
        for (name, x) in [
            ("exec", b.exec),
            ("fit", b.fit),
            ("overflow", b.overflow),
            ("anchor_acc", b.anchor_acc),
            ("anchor_err", b.anchor_err),
            ("text_in_box", b.text_in_box),
            ("padding", b.padding),
            ("graph", b.graph),
            ("clean", b.clean),
        ] {
            println!("{name:<12} {x:.4}");
        }
        for d in &v.diagnostics {
            println!("note: {d}");
        }
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let cfg = a.verifier.load()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers.max(1)).build()?;
    let ev = pool.install(|| evaluate_dirs(&a.corpus, &a.pred, &cfg, builtin_font()))?;
    if !ev.missing_predictions.is_empty() {
        eprintln!(
            "warning: {} prediction(s) missing, scored as failed renders",
            ev.missing_predictions.len()
        );
    }
    let format = match a.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
        Format::Md => ReportFormat::Md,
    };
    if let Some(p) = &a.records {
        let mut text = String::new();
        for r in &ev.records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        write_atomic(p, text.as_bytes())?;
    }
    write_out(a.out.as_deref(), &emit_report(&ev.report, format))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let vcfg = a.verifier.load()?;
    let mut cfg = match &a.config {
        Some(p) => GrpoConfig::from_json(&read(p)?)?,
        None => GrpoConfig::default(),
    };
    if let Some(u) = a.updates {
        cfg.updates = u;
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(g) = a.group_size {
        cfg.group_size = g;
    }
    if let Some(lr) = a.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(k) = a.kl_coeff {
        cfg.kl_coeff = k;
    }
    cfg.validate()?;
    let dir = if a.corpus.join(MANIFEST_FILE).exists() {
        split_dir(&a.corpus, SplitName::Train)
    } else {
        a.corpus.clone()
    };
    let corpus = load_split(&dir)?;
    let mut buf = Vec::new();
    for &seed in &cfg.seeds {
        let (_, log) = train(&corpus, &cfg, &vcfg, seed, builtin_font(), |r| {
            write_log_line(&mut buf, r).expect("in-memory write");
        })?;
        if let Some((first, last)) = reward_windows(&log, 50) {
            eprintln!("seed {seed}: mean reward {first:.3} over the first 50 updates, {last:.3} over the last 50");
        }
    }
    match &a.log {
        Some(p) => write_atomic(p, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

/// Failed check: domain outcome rather than a crash.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct CheckFailed(String);

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn oracle_check_cmd(a: OracleCheckArgs) -> Result<()> {
    let mut client = OracleClient::spawn(&a.oracle_cmd)?;
    let rep = oracle_check(&mut client, a.requests);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        println!("requests     {}", rep.requests);
        println!("ids matched  {}", rep.ids_matched);
        println!("max latency  {:.1} ms", rep.max_latency_ms);
        if let Some(e) = rep.max_rect_error {
            println!("rect error   {e:.3} px");
        }
        println!("font family  {}", rep.font_family.as_deref().unwrap_or("unreported"));
        for f in &rep.failures {
            println!("fail: {f}");
        }
    }
    if rep.passed {
        Ok(())
    } else {
        bail!(CheckFailed(format!(
            "oracle check failed ({} problem(s))",
            rep.failures.len()
        )))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::TrainToy(a) => train_cmd(a),
        Command::OracleCheck(a) => oracle_check_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
