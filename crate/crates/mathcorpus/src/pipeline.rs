//! Config-driven orchestration of the full curation pipeline.
//!
//! The run order mirrors the two-stage curation design: ingest → fast
//! extract → loose classify → dedup → quality re-extract (from the stored
//! optimized HTML of survivors) → strict classify → decontaminate → emit.
//! Every stage reads its predecessor's JSON Lines store from the work
//! directory and writes its own atomically, together with a tally sidecar;
//! the manifest is assembled purely from sidecars, so a resumed run and a
//! fresh run produce byte-identical manifests.
//!
//! Failure model: per-document problems are flagged and tallied, never
//! fatal; a stage-level problem (missing store, unreadable model) halts the
//! run at the stage boundary with a partial manifest on disk and the stage
//! name as a resume token.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::decontam::{build_decontam_index, decontaminate, load_benchmarks, DecontamIndex};
use crate::dedup::{lsh_cluster, minhash, DedupEntry, LshConfig};
use crate::document::{Document, Stage};
use crate::extract::{stage_extract, ExtractionProfile};
use crate::hash::hash128;
use crate::ingest::{
    document_from_record, identify_language, snapshot_id_from_path, url_filter, Blocklist,
    IngestCounters, WarcReader,
};
use crate::jsonl::{read_jsonl, write_jsonl};

/// Flag set on documents rejected by language identification.
pub const FLAG_LANG_REJECTED: &str = "lang_rejected";
/// Flag set on documents below the loose first-round math threshold.
pub const FLAG_MATH_BELOW_LOOSE: &str = "math_below_loose";
/// Flag set on documents below the strict second-round math threshold.
pub const FLAG_MATH_BELOW_STRICT: &str = "math_below_strict";
/// Flag set on documents overlapping the benchmark index.
pub const FLAG_CONTAMINATED: &str = "contaminated";

// ---------------------------------------------------------------------------
// Stages

/// The eight pipeline stages, in canonical run order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PipelineStage {
    Ingest,
    FastExtract,
    LooseClassify,
    Dedup,
    QualityExtract,
    StrictClassify,
    Decontaminate,
    Emit,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 8] = [
        PipelineStage::Ingest,
        PipelineStage::FastExtract,
        PipelineStage::LooseClassify,
        PipelineStage::Dedup,
        PipelineStage::QualityExtract,
        PipelineStage::StrictClassify,
        PipelineStage::Decontaminate,
        PipelineStage::Emit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PipelineStage::Ingest => "ingest",
            PipelineStage::FastExtract => "fast_extract",
            PipelineStage::LooseClassify => "loose_classify",
            PipelineStage::Dedup => "dedup",
            PipelineStage::QualityExtract => "quality_extract",
            PipelineStage::StrictClassify => "strict_classify",
            PipelineStage::Decontaminate => "decontaminate",
            PipelineStage::Emit => "emit",
        }
    }

    pub fn parse(name: &str) -> Option<PipelineStage> {
        PipelineStage::ALL.into_iter().find(|s| s.name() == name)
    }

    fn index(&self) -> usize {
        PipelineStage::ALL
            .iter()
            .position(|s| s == self)
            .expect("stage in canonical list")
    }

    /// Manifest key and store-file stem: zero-padded order plus name, so
    /// ordered maps iterate in run order.
    pub fn key(&self) -> String {
        format!("{:02}_{}", self.index() + 1, self.name())
    }

    fn store_file(&self) -> String {
        format!("{}.jsonl", self.key())
    }

    fn sidecar_file(&self) -> String {
        format!("{}.tally.json", self.key())
    }

    fn predecessor(&self) -> Option<PipelineStage> {
        let i = self.index();
        (i > 0).then(|| PipelineStage::ALL[i - 1])
    }
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Configuration

/// Input/output locations. Relative paths are taken as-is; `load` resolves
/// them against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// WARC file, or directory of `.warc` / `.warc.gz` files.
    pub input: PathBuf,
    /// Stage stores, sidecars, and the manifest live here.
    pub workdir: PathBuf,
    /// Final corpus JSON Lines file.
    pub output: PathBuf,
    /// Domain blocklist (one domain per line); empty blocklist when unset.
    pub blocklist: Option<PathBuf>,
    /// Benchmark JSONL for decontamination; nothing removed when unset.
    pub benchmarks: Option<PathBuf>,
    /// Language-identification model (required for the classify stages).
    pub langid_model: Option<PathBuf>,
    /// First-round math classifier model.
    pub stage1_model: Option<PathBuf>,
    /// Second-round math classifier model.
    pub stage2_model: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            input: PathBuf::from("input"),
            workdir: PathBuf::from("work"),
            output: PathBuf::from("corpus.jsonl"),
            blocklist: None,
            benchmarks: None,
            langid_model: None,
            stage1_model: None,
            stage2_model: None,
        }
    }
}

/// Score cutoffs, all inclusive "keep at or above".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// English-probability floor at language identification.
    pub lang: f64,
    /// First-round (loose) math-probability floor.
    pub stage1_loose: f64,
    /// Second-round (strict) math-probability floor.
    pub stage2: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            lang: 0.65,
            stage1_loose: 0.5,
            stage2: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecontamConfig {
    /// Token-window width for benchmark fingerprints.
    pub ngram_size: usize,
}

impl Default for DecontamConfig {
    fn default() -> Self {
        DecontamConfig { ngram_size: 13 }
    }
}

/// Settings for the code-recall and mixture commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeConfig {
    pub min_edu: u8,
    pub min_math: u8,
    /// Ceiling on the code share of the final token mixture.
    pub code_cap: f64,
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            min_edu: 4,
            min_math: 4,
            code_cap: 0.2,
        }
    }
}

/// LLM client settings for the synthesis-side commands. The web pipeline
/// stages never call a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Use the deterministic mock client instead of a live endpoint.
    pub mock: bool,
    /// Chat-completions endpoint; falls back to the environment when unset.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Parallel in-flight requests.
    pub workers: usize,
    /// Global request-rate ceiling; 0 disables limiting.
    pub max_rps: f64,
    pub max_retries: u32,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            mock: true,
            endpoint: None,
            model: None,
            workers: 4,
            max_rps: 0.0,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Stage names to run; must be a contiguous slice of the canonical
    /// order. Defaults to all stages.
    pub stages: Vec<String>,
    /// Worker threads for shard-parallel stages; 0 = library default.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stages: PipelineStage::ALL.iter().map(|s| s.name().to_string()).collect(),
            workers: 0,
        }
    }
}

/// Everything a pipeline run needs, loadable from one declarative TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub thresholds: ThresholdConfig,
    pub lsh: LshConfig,
    pub decontam: DecontamConfig,
    pub code: CodeConfig,
    pub llm: LlmConfig,
    pub run: RunConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(format!("config parse: {e}")))
    }

    /// Read a config file, resolving its relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("config {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        anchor(&mut self.paths.input);
        anchor(&mut self.paths.workdir);
        anchor(&mut self.paths.output);
        for opt in [
            &mut self.paths.blocklist,
            &mut self.paths.benchmarks,
            &mut self.paths.langid_model,
            &mut self.paths.stage1_model,
            &mut self.paths.stage2_model,
        ] {
            if let Some(p) = opt {
                anchor(p);
            }
        }
    }

    /// The stages this config runs, in canonical order.
    pub fn stages(&self) -> Result<Vec<PipelineStage>, PipelineError> {
        let mut stages = Vec::with_capacity(self.run.stages.len());
        for name in &self.run.stages {
            let stage = PipelineStage::parse(name)
                .ok_or_else(|| PipelineError::Config(format!("unknown stage {name:?}")))?;
            stages.push(stage);
        }
        if stages.is_empty() {
            return Err(PipelineError::Config("no stages configured".into()));
        }
        let contiguous = stages
            .windows(2)
            .all(|w| w[1].index() == w[0].index() + 1);
        if !contiguous {
            return Err(PipelineError::Config(
                "stages must be a contiguous slice of the canonical order".into(),
            ));
        }
        Ok(stages)
    }

    /// Check value ranges and the existence of every referenced input path
    /// the configured stages need.
    pub fn validate(&self) -> Result<Vec<PipelineStage>, PipelineError> {
        let stages = self.stages()?;

        let unit = |v: f64, what: &str| -> Result<(), PipelineError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{what} must be in [0, 1], got {v}")))
            }
        };
        unit(self.thresholds.lang, "thresholds.lang")?;
        unit(self.thresholds.stage1_loose, "thresholds.stage1_loose")?;
        unit(self.thresholds.stage2, "thresholds.stage2")?;
        if !(0.0..1.0).contains(&self.code.code_cap) {
            return Err(PipelineError::Config(format!(
                "code.code_cap must be in [0, 1), got {}",
                self.code.code_cap
            )));
        }
        if self.decontam.ngram_size < 2 {
            return Err(PipelineError::Config(format!(
                "decontam.ngram_size must be at least 2, got {}",
                self.decontam.ngram_size
            )));
        }
        self.lsh
            .validate()
            .map_err(|e| PipelineError::Config(format!("lsh: {e}")))?;

        let must_exist = |path: &Path, what: &str| -> Result<(), PipelineError> {
            if path.exists() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "{what} does not exist: {}",
                    path.display()
                )))
            }
        };
        if stages.contains(&PipelineStage::Ingest) {
            must_exist(&self.paths.input, "paths.input")?;
            if let Some(p) = &self.paths.blocklist {
                must_exist(p, "paths.blocklist")?;
            }
        }
        if stages.contains(&PipelineStage::LooseClassify) {
            let langid = self.paths.langid_model.as_deref().ok_or_else(|| {
                PipelineError::Config("paths.langid_model required for loose_classify".into())
            })?;
            must_exist(langid, "paths.langid_model")?;
            let stage1 = self.paths.stage1_model.as_deref().ok_or_else(|| {
                PipelineError::Config("paths.stage1_model required for loose_classify".into())
            })?;
            must_exist(stage1, "paths.stage1_model")?;
        }
        if stages.contains(&PipelineStage::StrictClassify) {
            let stage2 = self.paths.stage2_model.as_deref().ok_or_else(|| {
                PipelineError::Config("paths.stage2_model required for strict_classify".into())
            })?;
            must_exist(stage2, "paths.stage2_model")?;
        }
        if stages.contains(&PipelineStage::Decontaminate) {
            if let Some(p) = &self.paths.benchmarks {
                must_exist(p, "paths.benchmarks")?;
            }
        }
        Ok(stages)
    }

    /// Content hash binding a manifest to the exact configuration that
    /// produced it; any field change changes the hash.
    pub fn config_hash(&self) -> u64 {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hash128(&[b"pipeline-config-v1", &canonical]) as u64
    }
}

// ---------------------------------------------------------------------------
// Manifest

/// Counts for one completed stage: documents written to its store, tokens
/// in their extracted text, and how often each flag was seen on documents
/// processed by the stage (kept or dropped).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTally {
    pub doc_count: u64,
    pub token_count: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, u64>,
}

/// Deduplication accounting: `clusters` counts only merge events (clusters
/// with two or more members); every cluster leaves one survivor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupSummary {
    pub clusters: u64,
    pub survivors: u64,
    pub removed: u64,
}

/// The run record written next to the stage stores. Assembled purely from
/// per-stage sidecars and carrying no timestamps, so identical configs and
/// inputs reproduce it byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config_hash: u64,
    /// Which tokenizer produced the token counts.
    pub tokenizer: String,
    /// Stage key (`01_ingest`, ...) → tally; keys sort in run order.
    pub per_stage: BTreeMap<String, StageTally>,
    pub dedup: DedupSummary,
    /// Fraction of documents entering decontamination that were removed.
    pub decontam_removed_fraction: f64,
}

impl CorpusManifest {
    /// Document counts never increase from one completed stage to the next.
    pub fn counts_monotone(&self) -> bool {
        self.per_stage
            .values()
            .zip(self.per_stage.values().skip(1))
            .all(|(a, b)| b.doc_count <= a.doc_count)
    }
}

/// One stage's persisted result: its tally plus any stage-specific summary.
/// The manifest is assembled from these, never from in-memory state, so
/// fresh and resumed runs cannot diverge.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct StageSidecar {
    tally: StageTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dedup: Option<DedupSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decontam_removed_fraction: Option<f64>,
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug)]
pub enum PipelineError {
    /// Invalid configuration; nothing ran. CLI exit code 2.
    Config(String),
    /// A stage failed; completed stages are on disk and the run can resume
    /// from `stage`. CLI exit code 3.
    Stage { stage: &'static str, message: String },
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config(msg) => write!(f, "config error: {msg}"),
            PipelineError::Stage { stage, message } => {
                write!(f, "stage {stage} failed: {message} (resume from {stage})")
            }
        }
    }
}

impl std::error::Error for PipelineError {}

// ---------------------------------------------------------------------------
// Tokenizers

/// Counts tokens for manifest and statistics accounting.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> u64;
}

/// Default token accounting: whitespace-separated words.
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> u64 {
        text.split_whitespace().count() as u64
    }
}

// ---------------------------------------------------------------------------
// Statistics

/// Per-source corpus breakdown row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub docs: u64,
    pub tokens: u64,
}

/// Group documents by crawl snapshot and count docs and tokens per group.
pub fn corpus_stats<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    tokenizer: &dyn Tokenizer,
) -> BTreeMap<String, SourceStats> {
    let mut table: BTreeMap<String, SourceStats> = BTreeMap::new();
    for doc in docs {
        let row = table.entry(doc.snapshot_id.clone()).or_default();
        row.docs += 1;
        row.tokens += tokenizer.count(doc.text.as_deref().unwrap_or(""));
    }
    table
}

// ---------------------------------------------------------------------------
// Pipeline

/// Atomically replace `path` with `bytes` (write sibling + rename).
/// Document stores go through [`write_jsonl`], which is atomic already.
fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

struct StageIo<'a> {
    config: &'a PipelineConfig,
    tokenizer: &'a dyn Tokenizer,
}

impl StageIo<'_> {
    fn workdir(&self) -> &Path {
        &self.config.paths.workdir
    }

    fn store_path(&self, stage: PipelineStage) -> PathBuf {
        self.workdir().join(stage.store_file())
    }

    fn sidecar_path(&self, stage: PipelineStage) -> PathBuf {
        self.workdir().join(stage.sidecar_file())
    }

    fn fail(&self, stage: PipelineStage, message: impl fmt::Display) -> PipelineError {
        PipelineError::Stage {
            stage: stage.name(),
            message: message.to_string(),
        }
    }

    /// Read the predecessor's store as this stage's input.
    fn read_input(&self, stage: PipelineStage) -> Result<Vec<Document>, PipelineError> {
        let prev = stage.predecessor().expect("non-ingest stage has input");
        let path = self.store_path(prev);
        if !path.exists() {
            return Err(self.fail(
                stage,
                format!(
                    "input store {} missing; run the {} stage first",
                    path.display(),
                    prev.name()
                ),
            ));
        }
        read_jsonl::<Document>(&path).map_err(|e| self.fail(stage, e))
    }

    /// Tally documents surviving a stage plus the flags seen on every
    /// processed document (kept or dropped).
    fn tally(&self, kept: &[Document], processed_flags: &BTreeMap<String, u64>) -> StageTally {
        StageTally {
            doc_count: kept.len() as u64,
            token_count: kept
                .iter()
                .map(|d| self.tokenizer.count(d.text.as_deref().unwrap_or("")))
                .sum(),
            flags: processed_flags.clone(),
        }
    }
}

/// Merge every flag of every document into one tally map.
fn flag_counts(docs: &[Document]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for doc in docs {
        for flag in &doc.flags {
            *counts.entry(flag.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// List the WARC inputs under a file-or-directory path, sorted for
/// determinism.
fn warc_inputs(input: &Path) -> std::io::Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".warc") || name.ends_with(".warc.gz")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn run_ingest(io: &StageIo<'_>) -> Result<(Vec<Document>, StageTally), PipelineError> {
    let stage = PipelineStage::Ingest;
    let config = io.config;
    let blocklist = match &config.paths.blocklist {
        Some(path) => Blocklist::from_file(path).map_err(|e| io.fail(stage, e))?,
        None => Blocklist::from_lines([]),
    };
    let files = warc_inputs(&config.paths.input).map_err(|e| io.fail(stage, e))?;

    let mut docs = Vec::new();
    let mut extra: BTreeMap<String, u64> = BTreeMap::new();
    let counters = IngestCounters::default();
    for file in files {
        let Some(snapshot) = snapshot_id_from_path(&file) else {
            *extra.entry("warc_snapshot_id_unknown".into()).or_insert(0) += 1;
            continue;
        };
        let mut reader =
            WarcReader::from_path(&file, &snapshot).map_err(|e| io.fail(stage, e))?;
        for record in reader.by_ref() {
            if !url_filter(&record, &blocklist, &counters) {
                *extra.entry("url_blocked".into()).or_insert(0) += 1;
                continue;
            }
            let (doc, _report) = document_from_record(&record);
            docs.push(doc);
        }
        let stats = reader.stats();
        let warc_tallies = [
            ("warc_skipped_non_response", stats.skipped_non_response),
            ("warc_skipped_non_html", stats.skipped_non_html),
            ("warc_skipped_malformed", stats.skipped_malformed),
            ("warc_skipped_oversize", stats.skipped_oversize),
            ("warc_truncated", u64::from(stats.truncated)),
        ];
        for (key, n) in warc_tallies {
            if n > 0 {
                *extra.entry(key.into()).or_insert(0) += n;
            }
        }
    }
    if counters.parse_failures() > 0 {
        *extra.entry("url_parse_failed".into()).or_insert(0) += counters.parse_failures();
    }

    // Deterministic store order regardless of directory listing quirks.
    docs.sort_by_key(|d| d.doc_id);
    let mut flags = flag_counts(&docs);
    flags.extend(extra);
    let tally = io.tally(&docs, &flags);
    Ok((docs, tally))
}

/// Run an extraction pass and keep only documents that reached the
/// profile's target stage; stragglers are tallied by their failure flag.
fn run_extract(
    io: &StageIo<'_>,
    stage: PipelineStage,
    profile: &ExtractionProfile,
) -> Result<(Vec<Document>, StageTally), PipelineError> {
    let input = io.read_input(stage)?;
    let extracted = stage_extract(input, profile);
    let target = profile.target_stage();
    let flags = flag_counts(&extracted);
    let mut kept: Vec<Document> = extracted
        .into_iter()
        .filter(|d| d.stage >= target)
        .collect();
    // Quality re-extraction is the last consumer of the stored HTML.
    if stage == PipelineStage::QualityExtract {
        for doc in &mut kept {
            doc.html_optimized = None;
        }
    }
    let tally = io.tally(&kept, &flags);
    Ok((kept, tally))
}

fn load_model(io: &StageIo<'_>, stage: PipelineStage, path: Option<&Path>, what: &str)
    -> Result<ClassifierModel, PipelineError>
{
    let path = path.ok_or_else(|| io.fail(stage, format!("{what} not configured")))?;
    ClassifierModel::load(path).map_err(|e| io.fail(stage, format!("{what}: {e}")))
}

fn run_loose_classify(io: &StageIo<'_>) -> Result<(Vec<Document>, StageTally), PipelineError> {
    let stage = PipelineStage::LooseClassify;
    let config = io.config;
    let langid = load_model(io, stage, config.paths.langid_model.as_deref(), "langid model")?;
    let stage1 = load_model(io, stage, config.paths.stage1_model.as_deref(), "stage1 model")?;

    let mut input = io.read_input(stage)?;
    input.par_iter_mut().for_each(|doc| {
        let text = doc.text.clone().unwrap_or_default();
        let (lang_ok, lang_score) = identify_language(&text, &langid, config.thresholds.lang);
        doc.lang_score = Some(lang_score);
        if !lang_ok {
            doc.flags.insert(FLAG_LANG_REJECTED.to_string());
            return;
        }
        let math_score = stage1.predict(&text).prob("math");
        doc.math_score = Some(math_score);
        if math_score < config.thresholds.stage1_loose {
            doc.flags.insert(FLAG_MATH_BELOW_LOOSE.to_string());
            return;
        }
        doc.stage = Stage::Stage1Kept;
    });
    let flags = flag_counts(&input);
    let kept: Vec<Document> = input
        .into_iter()
        .filter(|d| d.stage >= Stage::Stage1Kept)
        .collect();
    let tally = io.tally(&kept, &flags);
    Ok((kept, tally))
}

fn run_dedup(io: &StageIo<'_>) -> Result<(Vec<Document>, StageTally, DedupSummary), PipelineError> {
    let stage = PipelineStage::Dedup;
    let cfg = &io.config.lsh;
    let input = io.read_input(stage)?;

    let entries: Vec<DedupEntry> = input
        .par_iter()
        .map(|doc| {
            let text = doc.text.as_deref().unwrap_or("");
            DedupEntry {
                doc_id: doc.doc_id,
                text_len: text.len() as u64,
                signature: minhash(text, cfg),
            }
        })
        .collect();
    let clusters = lsh_cluster(&entries, cfg).map_err(|e| io.fail(stage, e))?;

    let survivors: std::collections::BTreeSet<u128> =
        clusters.iter().map(|c| c.survivor).collect();
    let summary = DedupSummary {
        clusters: clusters.iter().filter(|c| c.members.len() > 1).count() as u64,
        survivors: survivors.len() as u64,
        removed: (input.len() - survivors.len()) as u64,
    };

    let flags = flag_counts(&input);
    let kept: Vec<Document> = input
        .into_iter()
        .filter(|d| survivors.contains(&d.doc_id))
        .map(|mut d| {
            d.stage = Stage::Deduped;
            d
        })
        .collect();
    let tally = io.tally(&kept, &flags);
    Ok((kept, tally, summary))
}

fn run_strict_classify(io: &StageIo<'_>) -> Result<(Vec<Document>, StageTally), PipelineError> {
    let stage = PipelineStage::StrictClassify;
    let config = io.config;
    let stage2 = load_model(io, stage, config.paths.stage2_model.as_deref(), "stage2 model")?;

    let mut input = io.read_input(stage)?;
    input.par_iter_mut().for_each(|doc| {
        let text = doc.text.clone().unwrap_or_default();
        let math_score = stage2.predict(&text).prob("math");
        doc.math_score = Some(math_score);
        if math_score < config.thresholds.stage2 {
            doc.flags.insert(FLAG_MATH_BELOW_STRICT.to_string());
        } else {
            doc.stage = Stage::Stage2Kept;
        }
    });
    let flags = flag_counts(&input);
    let kept: Vec<Document> = input
        .into_iter()
        .filter(|d| d.stage >= Stage::Stage2Kept)
        .collect();
    let tally = io.tally(&kept, &flags);
    Ok((kept, tally))
}

fn run_decontaminate(
    io: &StageIo<'_>,
) -> Result<(Vec<Document>, StageTally, f64), PipelineError> {
    let stage = PipelineStage::Decontaminate;
    let config = io.config;
    let index: DecontamIndex = match &config.paths.benchmarks {
        Some(path) => {
            let benchmarks = load_benchmarks(path).map_err(|e| io.fail(stage, e))?;
            build_decontam_index(&benchmarks, config.decontam.ngram_size)
        }
        None => build_decontam_index(&[], config.decontam.ngram_size),
    };

    let mut input = io.read_input(stage)?;
    let entering = input.len();
    input.par_iter_mut().for_each(|doc| {
        let (clean, _hits) = decontaminate(doc, &index);
        if clean {
            doc.stage = Stage::Decontaminated;
        } else {
            doc.flags.insert(FLAG_CONTAMINATED.to_string());
        }
    });
    let flags = flag_counts(&input);
    let kept: Vec<Document> = input
        .into_iter()
        .filter(|d| d.stage >= Stage::Decontaminated)
        .collect();
    let removed = entering - kept.len();
    let fraction = if entering == 0 {
        0.0
    } else {
        removed as f64 / entering as f64
    };
    let tally = io.tally(&kept, &flags);
    Ok((kept, tally, fraction))
}

fn run_emit(io: &StageIo<'_>) -> Result<(Vec<Document>, StageTally), PipelineError> {
    let stage = PipelineStage::Emit;
    let mut docs = io.read_input(stage)?;
    for doc in &mut docs {
        doc.stage = Stage::Final;
    }
    let output = &io.config.paths.output;
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io.fail(stage, e))?;
        }
    }
    write_jsonl(output, &docs).map_err(|e| io.fail(stage, e))?;
    let flags = flag_counts(&docs);
    let tally = io.tally(&docs, &flags);
    Ok((docs, tally))
}

/// Execute one stage: read input, transform, persist store + sidecar.
fn run_stage(io: &StageIo<'_>, stage: PipelineStage) -> Result<StageSidecar, PipelineError> {
    let mut sidecar = StageSidecar::default();
    let docs = match stage {
        PipelineStage::Ingest => {
            let (docs, tally) = run_ingest(io)?;
            sidecar.tally = tally;
            docs
        }
        PipelineStage::FastExtract => {
            let (docs, tally) = run_extract(io, stage, &ExtractionProfile::fast())?;
            sidecar.tally = tally;
            docs
        }
        PipelineStage::LooseClassify => {
            let (docs, tally) = run_loose_classify(io)?;
            sidecar.tally = tally;
            docs
        }
        PipelineStage::Dedup => {
            let (docs, tally, summary) = run_dedup(io)?;
            sidecar.tally = tally;
            sidecar.dedup = Some(summary);
            docs
        }
        PipelineStage::QualityExtract => {
            let (docs, tally) = run_extract(io, stage, &ExtractionProfile::quality())?;
            sidecar.tally = tally;
            docs
        }
        PipelineStage::StrictClassify => {
            let (docs, tally) = run_strict_classify(io)?;
            sidecar.tally = tally;
            docs
        }
        PipelineStage::Decontaminate => {
            let (docs, tally, fraction) = run_decontaminate(io)?;
            sidecar.tally = tally;
            sidecar.decontam_removed_fraction = Some(fraction);
            docs
        }
        PipelineStage::Emit => {
            let (docs, tally) = run_emit(io)?;
            sidecar.tally = tally;
            docs
        }
    };

    write_jsonl(&io.store_path(stage), &docs).map_err(|e| io.fail(stage, e))?;
    let sidecar_bytes =
        serde_json::to_vec_pretty(&sidecar).map_err(|e| io.fail(stage, e))?;
    atomic_write(&io.sidecar_path(stage), &sidecar_bytes).map_err(|e| io.fail(stage, e))?;
    Ok(sidecar)
}

/// Assemble the manifest from whatever sidecars exist in the work
/// directory, in canonical stage order.
fn assemble_manifest(io: &StageIo<'_>) -> CorpusManifest {
    let mut manifest = CorpusManifest {
        config_hash: io.config.config_hash(),
        tokenizer: io.tokenizer.name().to_string(),
        ..CorpusManifest::default()
    };
    for stage in PipelineStage::ALL {
        let path = io.sidecar_path(stage);
        let Ok(bytes) = fs::read(&path) else { continue };
        let Ok(sidecar) = serde_json::from_slice::<StageSidecar>(&bytes) else {
            continue;
        };
        if let Some(summary) = sidecar.dedup {
            manifest.dedup = summary;
        }
        if let Some(fraction) = sidecar.decontam_removed_fraction {
            manifest.decontam_removed_fraction = fraction;
        }
        manifest.per_stage.insert(stage.key(), sidecar.tally);
    }
    manifest
}

/// Run the configured stages with the default whitespace tokenizer.
///
/// With `resume`, stages whose store and sidecar both already exist are
/// skipped and their persisted tallies reused.
pub fn run_pipeline(config: &PipelineConfig, resume: bool) -> Result<CorpusManifest, PipelineError> {
    run_pipeline_with(config, resume, &WhitespaceTokenizer)
}

/// [`run_pipeline`] with a caller-chosen tokenizer for all token counts.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    resume: bool,
    tokenizer: &dyn Tokenizer,
) -> Result<CorpusManifest, PipelineError> {
    let stages = config.validate()?;
    fs::create_dir_all(&config.paths.workdir)
        .map_err(|e| PipelineError::Config(format!("workdir: {e}")))?;
    let io = StageIo { config, tokenizer };

    for stage in stages {
        if resume && io.store_path(stage).exists() && io.sidecar_path(stage).exists() {
            continue;
        }
        if let Err(err) = run_stage(&io, stage) {
            // Leave a partial manifest and surface the resume token.
            let partial = assemble_manifest(&io);
            if let Ok(bytes) = serde_json::to_vec_pretty(&partial) {
                let _ = atomic_write(&io.workdir().join("manifest.partial.json"), &bytes);
            }
            return Err(err);
        }
    }

    let manifest = assemble_manifest(&io);
    let bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| PipelineError::Config(format!("manifest serialization: {e}")))?;
    atomic_write(&io.workdir().join("manifest.json"), &bytes).map_err(|e| PipelineError::Stage {
        stage: "emit",
        message: format!("manifest write: {e}"),
    })?;
    Ok(manifest)
}
