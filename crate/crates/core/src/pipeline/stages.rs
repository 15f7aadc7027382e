use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{with_overrides, AppConfig};
use crate::embed_dedup::{
    collapse_clusters, embed_records, find_near_duplicates, DupCluster, EmbedDedupConfig,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_mcq, EvalConfig, McqItem};
use crate::ifd::{band_partition, filter_top_fraction, score_records};
use crate::jsonl;
use crate::planner::{extend_vocab, VocabConfig};
use crate::prefs::{pairs_from_clusters, pairs_from_model_outputs, PrefOutput};
use crate::pretrain::{
    apply_clean_rules, chunk_documents, normalize_document, Chunk, ChunkConfig, DocumentRecord,
    RuleSet, RulesConfig,
};
use crate::providers::{self, ProviderConfig, ProviderMode};
use crate::sft::{
    clean_instruction, complete_record, context_to_instruction, evolve_prompt, evolve_with_chat,
    to_uniform_batch, EvolKind, EvolSpec, FieldMap, InstructionRecord, SftCleanConfig, TaskKind,
    TemplateSet,
};
use crate::simhash::{dedup_chunks_with_prior, read_index, write_index, DedupConfig};
use crate::tool::{split_verified, verify_examples, Tolerance, VerifyStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageKind {
    Chunk,
    Clean,
    DedupSimhash,
    ExtendVocab,
    SftFormat,
    SftClean,
    SftFromContext,
    SftEvolve,
    CalcVerify,
    IfdScore,
    DedupEmbed,
    IfdFilter,
    IfdBands,
    BuildPrefs,
    Eval,
}

impl StageKind {
    pub const ALL: [StageKind; 15] = [
        StageKind::Chunk,
        StageKind::Clean,
        StageKind::DedupSimhash,
        StageKind::ExtendVocab,
        StageKind::SftFormat,
        StageKind::SftClean,
        StageKind::SftFromContext,
        StageKind::SftEvolve,
        StageKind::CalcVerify,
        StageKind::IfdScore,
        StageKind::DedupEmbed,
        StageKind::IfdFilter,
        StageKind::IfdBands,
        StageKind::BuildPrefs,
        StageKind::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Chunk => "chunk",
            StageKind::Clean => "clean",
            StageKind::DedupSimhash => "dedup-simhash",
            StageKind::ExtendVocab => "extend-vocab",
            StageKind::SftFormat => "sft-format",
            StageKind::SftClean => "sft-clean",
            StageKind::SftFromContext => "sft-from-context",
            StageKind::SftEvolve => "sft-evolve",
            StageKind::CalcVerify => "calc-verify",
            StageKind::IfdScore => "ifd-score",
            StageKind::DedupEmbed => "dedup-embed",
            StageKind::IfdFilter => "ifd-filter",
            StageKind::IfdBands => "ifd-bands",
            StageKind::BuildPrefs => "build-prefs",
            StageKind::Eval => "eval",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        StageKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = StageKind::ALL.iter().map(|k| k.name()).collect();
                Error::config(format!(
                    "unknown stage `{name}` (known: {})",
                    known.join(", ")
                ))
            })
    }

    /// Extra files written next to the main output, as (tag, extension).
    pub fn side_outputs(self) -> &'static [(&'static str, &'static str)] {
        match self {
            StageKind::DedupSimhash => &[("index", "bin"), ("pairs", "jsonl")],
            StageKind::DedupEmbed => &[("removed", "jsonl"), ("clusters", "jsonl")],
            StageKind::IfdFilter => &[("rest", "jsonl")],
            StageKind::IfdBands => &[("low", "jsonl"), ("mid", "jsonl"), ("high", "jsonl")],
            StageKind::CalcVerify => &[("outcomes", "jsonl"), ("rejected", "jsonl")],
            StageKind::BuildPrefs => &[("skipped", "jsonl")],
            StageKind::Eval => &[("items", "jsonl")],
            _ => &[],
        }
    }

    /// Whether `records_out == records_in - dropped` is part of the stage's
    /// contract. Chunking regroups documents and vocabulary learning emits
    /// tokens, so neither conserves record counts.
    pub fn conserves(self) -> bool {
        !matches!(self, StageKind::Chunk | StageKind::ExtendVocab)
    }

    /// Stage parameters that are not fields of the stage's config section.
    fn extra_keys(self) -> &'static [&'static str] {
        match self {
            StageKind::DedupSimhash => &["prior_index"],
            StageKind::ExtendVocab => &["base_vocab"],
            StageKind::SftFromContext => &["task", "complete", "skip_invalid", "provider"],
            StageKind::SftEvolve => &[
                "kind", "n", "format", "role", "scenario", "chat", "provider",
            ],
            StageKind::IfdScore | StageKind::DedupEmbed => &["provider"],
            StageKind::BuildPrefs => &["from", "provider"],
            StageKind::Eval => &["dev", "provider"],
            _ => &[],
        }
    }

    fn min_inputs(self) -> usize {
        1
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `dir/stem.tag.ext` for an output `dir/stem.*`.
pub fn side_path(output: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    output.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Input and output paths of one stage run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageIo {
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub sides: BTreeMap<String, PathBuf>,
}

impl StageIo {
    /// Side outputs default to [`side_path`] of the main output.
    pub fn new(kind: StageKind, inputs: Vec<PathBuf>, output: PathBuf) -> Self {
        let sides = kind
            .side_outputs()
            .iter()
            .map(|(tag, ext)| (tag.to_string(), side_path(&output, tag, ext)))
            .collect();
        StageIo {
            inputs,
            output,
            sides,
        }
    }

    pub fn side(&self, tag: &str) -> &Path {
        self.sides
            .get(tag)
            .map(PathBuf::as_path)
            .expect("side outputs are fixed per stage kind")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub side_outputs: Vec<PathBuf>,
    pub records_in: usize,
    pub records_out: usize,
    pub dropped: usize,
    pub drop_reasons: BTreeMap<String, usize>,
    pub conserves: bool,
    pub wall_ms: u64,
}

impl StageReport {
    /// True when the counts satisfy `out == in - dropped` or the stage does
    /// not promise conservation.
    pub fn is_conserved(&self) -> bool {
        !self.conserves || self.records_out + self.dropped == self.records_in
    }
}

/// Parsed settings of one stage, checked before anything runs.
#[derive(Debug, Clone)]
pub enum Plan {
    Chunk(ChunkConfig),
    Clean(RulesConfig),
    DedupSimhash {
        cfg: DedupConfig,
        prior_index: Option<PathBuf>,
    },
    ExtendVocab {
        cfg: VocabConfig,
        base_vocab: PathBuf,
    },
    SftFormat(FieldMap),
    SftClean(SftCleanConfig),
    SftFromContext {
        templates: TemplateSet,
        task: TaskKind,
        complete: bool,
        skip_invalid: bool,
        chat: ProviderConfig,
    },
    SftEvolve {
        spec: EvolSpec,
        chat: Option<ProviderConfig>,
    },
    CalcVerify(Tolerance),
    IfdScore(ProviderConfig),
    DedupEmbed {
        cfg: EmbedDedupConfig,
        provider: ProviderConfig,
    },
    IfdFilter(f64),
    IfdBands,
    BuildPrefs {
        from: PrefSource,
        provider: ProviderConfig,
    },
    Eval {
        cfg: EvalConfig,
        dev: Option<PathBuf>,
        chat: ProviderConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefSource {
    Clusters,
    Model,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Extras {
    prior_index: Option<PathBuf>,
    base_vocab: Option<PathBuf>,
    task: Option<TaskKind>,
    complete: Option<bool>,
    skip_invalid: Option<bool>,
    provider: Option<ProviderMode>,
    kind: Option<EvolKind>,
    n: Option<toml::Value>,
    format: Option<String>,
    role: Option<String>,
    scenario: Option<String>,
    chat: Option<bool>,
    from: Option<PrefSource>,
    dev: Option<PathBuf>,
}

fn scalar_string(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn section<T: Serialize + DeserializeOwned>(
    base: &T,
    params: &toml::Table,
    kind: StageKind,
) -> Result<T> {
    with_overrides(base, params, &format!("stage {kind}"))
}

fn with_mode(base: &ProviderConfig, mode: Option<ProviderMode>) -> ProviderConfig {
    let mut p = base.clone();
    if let Some(m) = mode {
        p.mode = m;
    }
    p
}

/// Validates `params` for `kind` against the config and returns the stage
/// settings. Relative paths in params are resolved against `base_dir`.
pub fn plan_stage(
    kind: StageKind,
    params: &toml::Table,
    cfg: &AppConfig,
    seed: u64,
    base_dir: &Path,
) -> Result<Plan> {
    let (extra_tbl, rest): (toml::Table, toml::Table) = params
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .partition(|(k, _)| kind.extra_keys().contains(&k.as_str()));
    let extras: Extras = toml::Value::Table(extra_tbl)
        .try_into()
        .map_err(|e| Error::config(format!("stage {kind}: {e}")))?;
    let resolve = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base_dir.join(p)
        }
    };
    let no_section = || -> Result<()> {
        match rest.keys().next() {
            Some(k) => Err(Error::config(format!(
                "stage {kind}: unknown parameter `{k}`"
            ))),
            None => Ok(()),
        }
    };
    let plan = match kind {
        StageKind::Chunk => Plan::Chunk(section(&cfg.chunk, &rest, kind)?),
        StageKind::Clean => {
            let rules: RulesConfig = section(&cfg.clean, &rest, kind)?;
            RuleSet::from_config(&rules)?;
            Plan::Clean(rules)
        }
        StageKind::DedupSimhash => {
            let d: DedupConfig = section(&cfg.dedup, &rest, kind)?;
            d.validate()?;
            Plan::DedupSimhash {
                cfg: d,
                prior_index: extras.prior_index.as_ref().map(resolve),
            }
        }
        StageKind::ExtendVocab => Plan::ExtendVocab {
            cfg: section(&cfg.vocab, &rest, kind)?,
            base_vocab: extras
                .base_vocab
                .as_ref()
                .map(resolve)
                .ok_or_else(|| Error::config("extend-vocab needs a `base_vocab` file"))?,
        },
        StageKind::SftFormat => Plan::SftFormat(section(&cfg.field_map, &rest, kind)?),
        StageKind::SftClean => Plan::SftClean(section(&cfg.sft_clean, &rest, kind)?),
        StageKind::SftFromContext => {
            let task = extras.task.unwrap_or(TaskKind::Summarize);
            if !matches!(task, TaskKind::Summarize | TaskKind::QaOpen | TaskKind::Mrc) {
                return Err(Error::config(format!(
                    "sft-from-context supports summarize, qa_open and mrc, not {task}"
                )));
            }
            Plan::SftFromContext {
                templates: section(&cfg.templates, &rest, kind)?,
                task,
                complete: extras.complete.unwrap_or(false),
                skip_invalid: extras.skip_invalid.unwrap_or(true),
                chat: with_mode(&cfg.providers.chat, extras.provider),
            }
        }
        StageKind::SftEvolve => {
            no_section()?;
            let kind_ = extras
                .kind
                .ok_or_else(|| Error::config("sft-evolve needs a `kind`"))?;
            let mut spec = EvolSpec::new(kind_);
            if let Some(n) = &extras.n {
                spec.params.insert("n".into(), scalar_string(n));
            }
            for (k, v) in [
                ("format", &extras.format),
                ("role", &extras.role),
                ("scenario", &extras.scenario),
            ] {
                if let Some(v) = v {
                    spec.params.insert(k.into(), v.clone());
                }
            }
            spec.validate()?;
            let chat = extras
                .chat
                .unwrap_or(false)
                .then(|| with_mode(&cfg.providers.chat, extras.provider));
            Plan::SftEvolve { spec, chat }
        }
        StageKind::CalcVerify => Plan::CalcVerify(section(&cfg.verify, &rest, kind)?),
        StageKind::IfdScore => {
            no_section()?;
            Plan::IfdScore(with_mode(&cfg.providers.logprob, extras.provider))
        }
        StageKind::DedupEmbed => {
            let mut base = cfg.embed_dedup.clone();
            if !rest.contains_key("seed") {
                base.seed = seed;
            }
            let e: EmbedDedupConfig = section(&base, &rest, kind)?;
            e.validate()?;
            Plan::DedupEmbed {
                cfg: e,
                provider: with_mode(&cfg.providers.embed, extras.provider),
            }
        }
        StageKind::IfdFilter => {
            let f = section(&cfg.ifd, &rest, kind)?.fraction;
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!(
                    "fraction must be in (0, 1], got {f}"
                )));
            }
            Plan::IfdFilter(f)
        }
        StageKind::IfdBands => {
            no_section()?;
            Plan::IfdBands
        }
        StageKind::BuildPrefs => {
            no_section()?;
            let from = extras.from.unwrap_or(PrefSource::Clusters);
            let base = match from {
                PrefSource::Clusters => &cfg.providers.judge,
                PrefSource::Model => &cfg.providers.chat,
            };
            Plan::BuildPrefs {
                from,
                provider: with_mode(base, extras.provider),
            }
        }
        StageKind::Eval => {
            let e: EvalConfig = section(&cfg.eval, &rest, kind)?;
            e.validate()?;
            Plan::Eval {
                cfg: e,
                dev: extras.dev.as_ref().map(resolve),
                chat: with_mode(&cfg.providers.chat, extras.provider),
            }
        }
    };
    Ok(plan)
}

/// Minimum number of inputs for a stage with the given settings.
pub fn min_inputs(kind: StageKind, plan: &Plan) -> usize {
    match plan {
        Plan::BuildPrefs {
            from: PrefSource::Clusters,
            ..
        } => 2,
        _ => kind.min_inputs(),
    }
}

fn read_all<T: DeserializeOwned + Send>(paths: &[PathBuf]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read::<T>(p)?);
    }
    Ok(out)
}

struct Counts {
    records_in: usize,
    records_out: usize,
    drop_reasons: BTreeMap<String, usize>,
}

impl Counts {
    fn new(records_in: usize, records_out: usize) -> Self {
        Counts {
            records_in,
            records_out,
            drop_reasons: BTreeMap::new(),
        }
    }

    fn with_reasons(mut self, reasons: BTreeMap<String, usize>) -> Self {
        self.drop_reasons = reasons;
        self
    }

    fn with_drops(mut self, reason: &str, n: usize) -> Self {
        if n > 0 {
            self.drop_reasons.insert(reason.to_string(), n);
        }
        self
    }
}

/// Runs one stage. The same function backs each CLI subcommand and each
/// manifest entry, so both produce identical files.
pub fn run_stage(kind: StageKind, io: &StageIo, plan: &Plan) -> Result<StageReport> {
    let started = Instant::now();
    if io.inputs.len() < min_inputs(kind, plan) {
        return Err(Error::config(format!(
            "stage {kind} needs at least {} input(s)",
            min_inputs(kind, plan)
        )));
    }
    let counts = execute(io, plan)?;
    let dropped = counts.drop_reasons.values().sum();
    Ok(StageReport {
        stage: kind.name().to_string(),
        inputs: io.inputs.clone(),
        output: io.output.clone(),
        side_outputs: io.sides.values().cloned().collect(),
        records_in: counts.records_in,
        records_out: counts.records_out,
        dropped,
        drop_reasons: counts.drop_reasons,
        conserves: kind.conserves(),
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

fn write_prefs(io: &StageIo, out: &PrefOutput, records_in: usize) -> Result<Counts> {
    jsonl::write(&io.output, &out.pairs)?;
    jsonl::write(io.side("skipped"), &out.skipped)?;
    Ok(Counts::new(records_in, out.pairs.len()).with_reasons(out.skip_counts()))
}

fn execute(io: &StageIo, plan: &Plan) -> Result<Counts> {
    match plan {
        Plan::Chunk(cfg) => {
            let docs: Vec<DocumentRecord> = read_all(&io.inputs)?;
            let n = docs.len();
            let docs: Vec<DocumentRecord> = docs.into_par_iter().map(normalize_document).collect();
            let empty = docs.iter().filter(|d| d.text.trim().is_empty()).count();
            let chunks = chunk_documents(&docs, cfg)?;
            jsonl::write(&io.output, &chunks)?;
            Ok(Counts::new(n, chunks.len()).with_drops("empty_document", empty))
        }
        Plan::Clean(rules) => {
            let chunks: Vec<Chunk> = read_all(&io.inputs)?;
            let n = chunks.len();
            let (kept, report) = apply_clean_rules(chunks, &RuleSet::from_config(rules)?);
            jsonl::write(&io.output, &kept)?;
            Ok(Counts::new(n, kept.len()).with_reasons(report.reasons))
        }
        Plan::DedupSimhash { cfg, prior_index } => {
            let chunks: Vec<Chunk> = read_all(&io.inputs)?;
            let n = chunks.len();
            let prior = match prior_index {
                Some(p) => read_index(p)?,
                None => Vec::new(),
            };
            let out = dedup_chunks_with_prior(chunks, &prior, cfg)?;
            jsonl::write(&io.output, &out.kept)?;
            write_index(io.side("index"), &out.index)?;
            jsonl::write(io.side("pairs"), &out.dropped_pairs)?;
            Ok(
                Counts::new(n, out.kept.len())
                    .with_drops("near_duplicate", out.dropped_pairs.len()),
            )
        }
        Plan::ExtendVocab { cfg, base_vocab } => {
            let chunks: Vec<Chunk> = read_all(&io.inputs)?;
            let text = std::fs::read_to_string(base_vocab).map_err(|e| Error::io(base_vocab, e))?;
            let base: HashSet<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            let ext = extend_vocab(&chunks, &base, cfg)?;
            jsonl::write_json(&io.output, &ext)?;
            Ok(Counts::new(chunks.len(), ext.new_tokens.len()))
        }
        Plan::SftFormat(map) => {
            let raws: Vec<serde_json::Value> = read_all(&io.inputs)?;
            let recs = to_uniform_batch(&raws, map)?;
            jsonl::write(&io.output, &recs)?;
            Ok(Counts::new(raws.len(), recs.len()))
        }
        Plan::SftClean(cfg) => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let (kept, report) = clean_instruction(recs, cfg)?;
            jsonl::write(&io.output, &kept)?;
            Ok(Counts::new(n, kept.len()).with_reasons(report.reasons))
        }
        Plan::SftFromContext {
            templates,
            task,
            complete,
            skip_invalid,
            chat,
        } => {
            let chunks: Vec<Chunk> = read_all(&io.inputs)?;
            let built: Vec<Result<InstructionRecord>> = chunks
                .par_iter()
                .map(|c| context_to_instruction(c, *task, templates))
                .collect();
            let reason = match task {
                TaskKind::QaOpen => "not_a_concept",
                _ => "chunk_too_short",
            };
            let mut recs = Vec::new();
            let mut skipped = 0;
            for r in built {
                match r {
                    Ok(rec) => recs.push(rec),
                    Err(e @ Error::Record { .. }) if *skip_invalid => {
                        log::debug!("sft-from-context: {e}");
                        skipped += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            if *complete {
                let provider = providers::build_chat(chat)?;
                recs = recs
                    .into_par_iter()
                    .map(|r| complete_record(r, templates, provider.as_ref()))
                    .collect::<Result<_>>()?;
            }
            jsonl::write(&io.output, &recs)?;
            Ok(Counts::new(chunks.len(), recs.len()).with_drops(reason, skipped))
        }
        Plan::SftEvolve { spec, chat } => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let out: Vec<InstructionRecord> = match chat {
                Some(p) => {
                    let provider = providers::build_chat(p)?;
                    recs.par_iter()
                        .map(|r| evolve_with_chat(r, spec, provider.as_ref()))
                        .collect::<Result<_>>()?
                }
                None => recs
                    .par_iter()
                    .map(|r| evolve_prompt(r, spec))
                    .collect::<Result<_>>()?,
            };
            jsonl::write(&io.output, &out)?;
            Ok(Counts::new(recs.len(), out.len()))
        }
        Plan::CalcVerify(tol) => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let outcomes = verify_examples(&recs, tol);
            let mut reasons = BTreeMap::new();
            for o in outcomes.iter().filter(|o| o.status != VerifyStatus::Ok) {
                let key = serde_json::to_value(o.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *reasons.entry(key).or_default() += 1;
            }
            let (ok, rejected) = split_verified(recs, &outcomes);
            jsonl::write(&io.output, &ok)?;
            jsonl::write(io.side("outcomes"), &outcomes)?;
            jsonl::write(io.side("rejected"), &rejected)?;
            Ok(Counts::new(n, ok.len()).with_reasons(reasons))
        }
        Plan::IfdScore(p) => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let provider = providers::build_logprobs(p)?;
            let scored: Vec<InstructionRecord> = score_records(recs, provider.as_ref())?
                .into_iter()
                .map(|(r, _)| r)
                .collect();
            jsonl::write(&io.output, &scored)?;
            Ok(Counts::new(n, scored.len()))
        }
        Plan::DedupEmbed { cfg, provider } => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let embedder = providers::build_embedder(provider)?;
            let vectors = embed_records(&recs, embedder.as_ref())?;
            let mut clusters = find_near_duplicates(&vectors, cfg)?;
            let (kept, removed) = collapse_clusters(recs, &mut clusters)?;
            jsonl::write(&io.output, &kept)?;
            jsonl::write(io.side("removed"), &removed)?;
            jsonl::write(io.side("clusters"), &clusters)?;
            Ok(Counts::new(n, kept.len()).with_drops("near_duplicate", removed.len()))
        }
        Plan::IfdFilter(fraction) => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let (kept, rest) = filter_top_fraction(recs, *fraction)?;
            jsonl::write(&io.output, &kept)?;
            jsonl::write(io.side("rest"), &rest)?;
            Ok(Counts::new(n, kept.len()).with_drops("below_top_fraction", rest.len()))
        }
        Plan::IfdBands => {
            let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
            let n = recs.len();
            let bands = band_partition(recs)?;
            jsonl::write(io.side("low"), &bands.low)?;
            jsonl::write(io.side("mid"), &bands.mid)?;
            jsonl::write(io.side("high"), &bands.high)?;
            let all: Vec<&InstructionRecord> = bands
                .low
                .iter()
                .chain(&bands.mid)
                .chain(&bands.high)
                .collect();
            jsonl::write(&io.output, &all)?;
            Ok(Counts::new(n, all.len()))
        }
        Plan::BuildPrefs { from, provider } => match from {
            PrefSource::Clusters => {
                let clusters: Vec<DupCluster> = jsonl::read(&io.inputs[0])?;
                let recs: Vec<InstructionRecord> = read_all(&io.inputs[1..])?;
                let mut map = HashMap::with_capacity(recs.len());
                for r in recs {
                    if map.contains_key(&r.id) {
                        return Err(Error::record(&r.id, "duplicate id across record inputs"));
                    }
                    map.insert(r.id.clone(), r);
                }
                let candidates = clusters
                    .iter()
                    .map(|c| c.member_ids.len().saturating_sub(1))
                    .sum();
                let judge = providers::build_judge(provider)?;
                let out = pairs_from_clusters(&clusters, &map, judge.as_ref())?;
                write_prefs(io, &out, candidates)
            }
            PrefSource::Model => {
                let recs: Vec<InstructionRecord> = read_all(&io.inputs)?;
                let chat = providers::build_chat(provider)?;
                let out = pairs_from_model_outputs(&recs, chat.as_ref())?;
                write_prefs(io, &out, recs.len())
            }
        },
        Plan::Eval { cfg, dev, chat } => {
            let items: Vec<McqItem> = read_all(&io.inputs)?;
            let dev_items: Vec<McqItem> = match dev {
                Some(p) => jsonl::read(p)?,
                None => Vec::new(),
            };
            let provider = providers::build_chat(chat)?;
            let run = evaluate_mcq(&items, &dev_items, provider.as_ref(), cfg)?;
            jsonl::write_json(&io.output, &run.report)?;
            jsonl::write(io.side("items"), &run.items)?;
            Ok(Counts::new(items.len(), run.items.len()))
        }
    }
}
