//! `finforge` command-line front end: one subcommand per pipeline stage,
//! a handful of calculators and utilities, and manifest-driven runs.

use std::collections::HashSet;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use finforge_core::calc;
use finforge_core::dpo::{dpo_grad, dpo_loss, lr_at_step, DpoInputs, LrSchedule};
use finforge_core::eval::{
    convert_csv, convert_json_value, render_table, sweep_csv, McqItem, ScoreRow, SweepPoint,
};
use finforge_core::jsonl;
use finforge_core::pipeline::{
    plan_stage, run_pipeline, run_stage, AppConfig, Manifest, StageIo, StageKind,
};
use finforge_core::planner::{
    count_tokens, plan_mix, CharHeuristic, Ratio, TokenCounter, VocabCounter,
};
use finforge_core::pretrain::Chunk;
use finforge_core::providers::{self, ProviderMode};
use finforge_core::tool::tool_chat_loop;
use finforge_core::Error;

#[derive(Parser)]
#[command(name = "finforge", version, about = "Financial LLM data toolkit")]
struct Cli {
    /// TOML config file; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for intra-stage parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

/// Paths and generic overrides shared by every stage subcommand.
#[derive(Args)]
struct StageArgs {
    /// Input file(s); several are concatenated in order.
    #[arg(short, long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Stage parameter override `key=value` (value parsed as TOML, else a string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ProviderArg {
    /// Provider mode for this stage, overriding the config file.
    #[arg(long)]
    provider: Option<ProviderMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize documents and split them into balanced chunks.
    Chunk {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        max_length: Option<usize>,
    },
    /// Apply filter, privacy and pattern rules to chunks.
    Clean {
        #[command(flatten)]
        io: StageArgs,
    },
    /// Drop SimHash near-duplicate chunks.
    DedupSimhash {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        hamming_threshold: Option<u32>,
        /// Sidecar index of an earlier run whose chunks count as already kept.
        #[arg(long)]
        prior_index: Option<PathBuf>,
    },
    /// Report token totals and the domain:general mix.
    PlanMix {
        /// Domain token count, or a chunk JSONL file to count.
        #[arg(long)]
        domain: String,
        /// `name=COUNT` or `name=FILE`, repeatable.
        #[arg(long = "general", required = true)]
        general: Vec<String>,
        #[arg(long, default_value = "1:3")]
        target: Ratio,
        /// Vocabulary file (one token per line) for counting; defaults to the character heuristic.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Learn domain tokens missing from a base vocabulary.
    ExtendVocab {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        base_vocab: PathBuf,
        #[arg(long)]
        max_new: Option<usize>,
    },
    /// Map raw instruction records to the uniform format.
    SftFormat {
        #[command(flatten)]
        io: StageArgs,
    },
    /// Drop malformed or inappropriate instruction records.
    SftClean {
        #[command(flatten)]
        io: StageArgs,
    },
    /// Build instruction records from corpus chunks.
    SftFromContext {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long, default_value = "summarize")]
        task: String,
        /// Fill question slots and empty answers with the chat provider.
        #[arg(long)]
        complete: bool,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Derive harder instructions by template evolution.
    SftEvolve {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        role: Option<String>,
        #[arg(long)]
        scenario: Option<String>,
        /// Rewrite the evolved instruction with the chat provider.
        #[arg(long)]
        chat: bool,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Cluster near-duplicate instructions by embedding similarity.
    DedupEmbed {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Annotate records with instruction-following difficulty scores.
    IfdScore {
        #[command(flatten)]
        io: StageArgs,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Keep the top fraction of records by IFD.
    IfdFilter {
        #[command(flatten)]
        io: StageArgs,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Split records into low, mid and high IFD tertiles.
    IfdBands {
        #[command(flatten)]
        io: StageArgs,
    },
    /// Build preference pairs from clusters or model outputs.
    BuildPrefs {
        #[command(flatten)]
        io: StageArgs,
        /// `clusters` (first input is the cluster file) or `model`.
        #[arg(long, default_value = "clusters")]
        from: String,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Evaluate a calculator expression.
    Calc {
        expr: String,
        /// Print the full marker instead of the display value.
        #[arg(long)]
        marker: bool,
    },
    /// Check calculator markers in records against recomputed values.
    CalcVerify {
        #[command(flatten)]
        io: StageArgs,
    },
    /// Run the calculation assistant with calculator interception.
    ToolRun {
        /// User message; read from stdin when absent.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// DPO loss, margin and gradient for one example.
    DpoLoss {
        #[arg(long, allow_hyphen_values = true)]
        policy_chosen: f64,
        #[arg(long, allow_hyphen_values = true)]
        policy_rejected: f64,
        #[arg(long, allow_hyphen_values = true)]
        ref_chosen: f64,
        #[arg(long, allow_hyphen_values = true)]
        ref_rejected: f64,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Warmup + cosine learning rate at a step, or the whole curve as CSV.
    Lr {
        #[arg(long)]
        peak: f64,
        #[arg(long)]
        total: u64,
        #[arg(long, conflicts_with = "warmup_ratio")]
        warmup_steps: Option<u64>,
        #[arg(long)]
        warmup_ratio: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, required_unless_present = "csv")]
        step: Option<u64>,
        /// Print `step,lr` for every step from 0 to total.
        #[arg(long)]
        csv: bool,
    },
    /// Score a multiple-choice benchmark.
    Eval {
        #[command(flatten)]
        io: StageArgs,
        /// Dev items for few-shot prompts.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        shots: Option<usize>,
        #[command(flatten)]
        provider: ProviderArg,
    },
    /// Render a model x dataset accuracy table, or a checkpoint sweep as CSV.
    EvalTable {
        /// JSONL of `{model, dataset, accuracy}` rows, or of `{step, dataset, accuracy}` with --sweep.
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        sweep: bool,
    },
    /// Convert a CSV or JSON/JSONL benchmark into multiple-choice items.
    EvalConvert {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "item")]
        prefix: String,
        #[arg(long, default_value = "default")]
        category: String,
    },
    /// Run a pipeline manifest.
    Pipeline { manifest: PathBuf },
}

fn parse_set(kv: &str) -> anyhow::Result<(String, toml::Value)> {
    let (k, v) = kv
        .split_once('=')
        .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Collects stage params: typed flags first, then `--set` overrides.
struct Params(toml::Table);

impl Params {
    fn new() -> Self {
        Params(toml::Table::new())
    }

    fn put<V: Into<toml::Value>>(&mut self, key: &str, v: Option<V>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.into());
        }
        self
    }

    fn flag(&mut self, key: &str, on: bool) -> &mut Self {
        self.put(key, on.then_some(true))
    }

    fn path(&mut self, key: &str, p: &Option<PathBuf>) -> &mut Self {
        self.put(key, p.as_ref().map(|p| p.display().to_string()))
    }

    fn provider(&mut self, p: &ProviderArg) -> &mut Self {
        self.put(
            "provider",
            p.provider.map(|m| match m {
                ProviderMode::Http => "http",
                ProviderMode::Stub => "stub",
            }),
        )
    }
}

fn stage_command(cmd: &Command) -> Option<(StageKind, &StageArgs, Params)> {
    let mut p = Params::new();
    let (kind, io) = match cmd {
        Command::Chunk { io, max_length } => {
            p.put("max_length", max_length.map(|v| v as i64));
            (StageKind::Chunk, io)
        }
        Command::Clean { io } => (StageKind::Clean, io),
        Command::DedupSimhash {
            io,
            hamming_threshold,
            prior_index,
        } => {
            p.put("hamming_threshold", hamming_threshold.map(i64::from))
                .path("prior_index", prior_index);
            (StageKind::DedupSimhash, io)
        }
        Command::ExtendVocab {
            io,
            base_vocab,
            max_new,
        } => {
            p.path("base_vocab", &Some(base_vocab.clone()))
                .put("max_new", max_new.map(|v| v as i64));
            (StageKind::ExtendVocab, io)
        }
        Command::SftFormat { io } => (StageKind::SftFormat, io),
        Command::SftClean { io } => (StageKind::SftClean, io),
        Command::SftFromContext {
            io,
            task,
            complete,
            provider,
        } => {
            p.put("task", Some(task.as_str()))
                .flag("complete", *complete)
                .provider(provider);
            (StageKind::SftFromContext, io)
        }
        Command::SftEvolve {
            io,
            kind,
            n,
            format,
            role,
            scenario,
            chat,
            provider,
        } => {
            p.put("kind", Some(kind.as_str()))
                .put("n", n.map(|v| v as i64))
                .put("format", format.clone())
                .put("role", role.clone())
                .put("scenario", scenario.clone())
                .flag("chat", *chat)
                .provider(provider);
            (StageKind::SftEvolve, io)
        }
        Command::DedupEmbed {
            io,
            threshold,
            provider,
        } => {
            p.put("threshold", *threshold).provider(provider);
            (StageKind::DedupEmbed, io)
        }
        Command::IfdScore { io, provider } => {
            p.provider(provider);
            (StageKind::IfdScore, io)
        }
        Command::IfdFilter { io, fraction } => {
            p.put("fraction", *fraction);
            (StageKind::IfdFilter, io)
        }
        Command::IfdBands { io } => (StageKind::IfdBands, io),
        Command::BuildPrefs { io, from, provider } => {
            p.put("from", Some(from.as_str())).provider(provider);
            (StageKind::BuildPrefs, io)
        }
        Command::CalcVerify { io } => (StageKind::CalcVerify, io),
        Command::Eval {
            io,
            dev,
            shots,
            provider,
        } => {
            p.path("dev", dev)
                .put("shots", shots.map(|v| v as i64))
                .provider(provider);
            (StageKind::Eval, io)
        }
        _ => return None,
    };
    Some((kind, io, p))
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// Either a literal token count or a chunk file to count.
fn token_total(arg: &str, counter: &dyn TokenCounter) -> anyhow::Result<u64> {
    if let Ok(n) = arg.parse::<u64>() {
        return Ok(n);
    }
    let chunks: Vec<Chunk> = jsonl::read(Path::new(arg))?;
    Ok(count_tokens(&chunks, counter))
}

fn read_mcq_source(path: &Path, prefix: &str, category: &str) -> anyhow::Result<Vec<McqItem>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("csv") {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        return Ok(convert_csv(f, prefix, category)?);
    }
    let values: Vec<serde_json::Value> = if ext.eq_ignore_ascii_case("json") {
        match jsonl::read_json::<serde_json::Value>(path)? {
            serde_json::Value::Array(v) => v,
            other => vec![other],
        }
    } else {
        jsonl::read(path)?
    };
    let items = values
        .iter()
        .enumerate()
        .map(|(i, v)| convert_json_value(v, &format!("{prefix}-{}", i + 1), category))
        .collect::<finforge_core::Result<Vec<_>>>()?;
    Ok(items)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::from_env(),
    };

    if let Some((kind, io, mut params)) = stage_command(&cli.command) {
        for kv in &io.set {
            let (k, v) = parse_set(kv)?;
            params.0.insert(k, v);
        }
        let plan = plan_stage(kind, &params.0, &cfg, 0, Path::new(""))?;
        let stage_io = StageIo::new(kind, io.inputs.clone(), io.output.clone());
        let report = run_stage(kind, &stage_io, &plan)?;
        log::info!(
            "{}: {} in, {} out, {} dropped",
            report.stage,
            report.records_in,
            report.records_out,
            report.dropped
        );
        return print_json(&report);
    }

    match cli.command {
        Command::PlanMix {
            domain,
            general,
            target,
            vocab,
        } => {
            let counter: Box<dyn TokenCounter> = match vocab {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    let tokens: HashSet<String> = text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_string)
                        .collect();
                    Box::new(VocabCounter::new(tokens))
                }
                None => Box::new(CharHeuristic),
            };
            let domain_tokens = token_total(&domain, counter.as_ref())?;
            let mut sources = Vec::new();
            for g in &general {
                let (name, v) = g
                    .split_once('=')
                    .with_context(|| format!("--general expects NAME=COUNT|FILE, got `{g}`"))?;
                sources.push((name.to_string(), token_total(v, counter.as_ref())?));
            }
            print_json(&plan_mix(domain_tokens, &sources, target)?)
        }
        Command::Calc { expr, marker } => {
            let r = calc::evaluate(&expr).map_err(Error::from)?;
            if marker {
                println!("{}", calc::format_marker(&expr, &r).map_err(Error::from)?);
            } else {
                println!("{}", r.display);
            }
            Ok(())
        }
        Command::ToolRun {
            prompt,
            max_rounds,
            provider,
        } => {
            let prompt = match prompt {
                Some(p) => p,
                None => io::read_to_string(io::stdin()).context("reading prompt from stdin")?,
            };
            let mut chat_cfg = cfg.providers.chat.clone();
            if let Some(m) = provider.provider {
                chat_cfg.mode = m;
            }
            let chat = providers::build_chat(&chat_cfg)?;
            let run = tool_chat_loop(
                &prompt,
                chat.as_ref(),
                max_rounds.unwrap_or(cfg.tool.max_rounds),
            )?;
            print_json(&run)
        }
        Command::DpoLoss {
            policy_chosen,
            policy_rejected,
            ref_chosen,
            ref_rejected,
            beta,
        } => {
            let x = DpoInputs {
                logp_policy_chosen: policy_chosen,
                logp_policy_rejected: policy_rejected,
                logp_ref_chosen: ref_chosen,
                logp_ref_rejected: ref_rejected,
                beta: beta.unwrap_or(cfg.dpo.beta),
            };
            let loss = dpo_loss(&x)?;
            let (g_chosen, g_rejected) = dpo_grad(&x)?;
            print_json(&serde_json::json!({
                "loss": loss,
                "margin": x.margin(),
                "grad_policy_chosen": g_chosen,
                "grad_policy_rejected": g_rejected,
            }))
        }
        Command::Lr {
            peak,
            total,
            warmup_steps,
            warmup_ratio,
            floor,
            step,
            csv,
        } => {
            let sched = match (warmup_steps, warmup_ratio) {
                (Some(w), _) => {
                    let s = LrSchedule {
                        peak_lr: peak,
                        warmup_steps: w,
                        total_steps: total,
                        floor_lr: floor,
                    };
                    s.validate()?;
                    s
                }
                (None, Some(r)) => LrSchedule::from_warmup_ratio(peak, r, total, floor)?,
                (None, None) => bail!(Error::config(
                    "one of --warmup-steps or --warmup-ratio is required"
                )),
            };
            if csv {
                let mut out = io::stdout().lock();
                writeln!(out, "step,lr")?;
                for s in 0..=total {
                    writeln!(out, "{s},{:e}", lr_at_step(s, &sched)?)?;
                }
            } else if let Some(s) = step {
                println!("{:e}", lr_at_step(s, &sched)?);
            }
            Ok(())
        }
        Command::EvalTable { input, sweep } => {
            let text = if sweep {
                sweep_csv(&jsonl::read::<SweepPoint>(&input)?)?
            } else {
                render_table(&jsonl::read::<ScoreRow>(&input)?)?
            };
            print!("{text}");
            Ok(())
        }
        Command::EvalConvert {
            input,
            output,
            prefix,
            category,
        } => {
            let items = read_mcq_source(&input, &prefix, &category)?;
            for it in &items {
                it.validate()?;
            }
            jsonl::write(&output, &items)?;
            eprintln!("wrote {} items to {}", items.len(), output.display());
            Ok(())
        }
        Command::Pipeline { manifest } => {
            let m = Manifest::load(&manifest)?;
            let outcome = run_pipeline(&m, &cfg)?;
            eprintln!("run report: {}", outcome.report_path.display());
            let report = outcome.into_result()?;
            print_json(&report)
        }
        _ => unreachable!("stage subcommands are handled above"),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) => e.exit_code() as u8,
        None => 1,
    }
}

/// Output piped into a reader that closed early, such as `head`.
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let kind = c
            .downcast_ref::<io::Error>()
            .map(io::Error::kind)
            .or_else(|| {
                c.downcast_ref::<serde_json::Error>()
                    .and_then(serde_json::Error::io_error_kind)
            });
        kind == Some(io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already embed their cause in the message.
            let msg = match e.downcast_ref::<Error>() {
                Some(core) => core.to_string(),
                None => format!("{e:#}"),
            };
            eprintln!("error: {}", msg.trim_end());
            ExitCode::from(exit_code(&e))
        }
    }
}
