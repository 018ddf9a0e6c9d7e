//! Command-line front end for the math-corpus curation pipeline.
//!
//! Thin orchestration over the `mathcorpus` library: every subcommand maps
//! onto library operations, with one shared TOML configuration file and
//! uniform exit codes (0 success, 2 configuration error, 3 stage failure).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mathcorpus::classifier::{train, ClassifierModel, SeedCorpus, TrainSettings};
use mathcorpus::coderecall::{
    plan_mixture, score_snippet, select_languages, threshold_filter, CodeSnippet,
};
use mathcorpus::document::Document;
use mathcorpus::jsonl::{read_jsonl, write_jsonl};
use mathcorpus::llm::{ChatClient, LiveChatClient, MockChatClient, ENV_API_KEY};
use mathcorpus::pipeline::{
    corpus_stats, run_pipeline, LlmConfig, PipelineConfig, PipelineError, PipelineStage,
    WhitespaceTokenizer,
};
use mathcorpus::prompt::{PromptLibrary, RefineStyle};
use mathcorpus::synth::blocks::{generate_blocks, ExecPolicy};
use mathcorpus::synth::exec::interpreter_available;
use mathcorpus::synth::pro::{pro_filter, pro_refine, LlmEduScorer, ProThresholds};
use mathcorpus::synth::qa::{extract_qa, refine_qa, QaExtraction, RefineOutcome};
use mathcorpus::synth::translate::{translate_code, TranslateOutcome};
use mathcorpus::synth::{ExecLimits, SafetyTables, SynthRecord};

#[derive(Parser)]
#[command(
    name = "mathcorpus",
    version,
    about = "Curate a mathematical pretraining corpus from web archives"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Reuse completed stage outputs found in the work directory.
    #[arg(long, global = true)]
    resume: bool,

    /// Override the deduplication permutation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for shard-parallel stages (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured pipeline end to end (or a contiguous subset).
    Run {
        /// Comma-separated stage names overriding the configured list.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
    /// Ingest web archives into the document store.
    Ingest,
    /// Run one text-extraction stage.
    Extract {
        #[arg(long, value_enum, default_value_t = ExtractPhase::Fast)]
        phase: ExtractPhase,
    },
    /// Train, apply, or stage-run the text classifiers.
    Classify {
        #[command(subcommand)]
        action: ClassifyCmd,
    },
    /// Run the near-duplicate removal stage.
    Dedup,
    /// Run the benchmark-decontamination stage.
    Decontam,
    /// Score a code-snippet store on both rubrics and keep the qualifying
    /// snippets; or plan the final code/text token mixture.
    RecallCode(RecallCodeArgs),
    /// Synthesize training artifacts from curated documents or snippets.
    Synth(SynthArgs),
    /// Filter documents by educational value; optionally refine them.
    Pro(ProArgs),
    /// Per-source document and token counts for a document store.
    Stats {
        /// Document store to summarize.
        #[arg(long, value_name = "FILE")]
        docs: PathBuf,
        /// Emit the table as JSON instead of aligned text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractPhase {
    /// Permissive first-round extraction.
    Fast,
    /// Boilerplate-pruning re-extraction of dedup survivors.
    Quality,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifyPhase {
    /// First-round filtering at the loose threshold.
    Loose,
    /// Second-round filtering at the strict threshold.
    Strict,
}

#[derive(Subcommand)]
enum ClassifyCmd {
    /// Run a classification stage of the pipeline.
    Stage {
        #[arg(long, value_enum)]
        phase: ClassifyPhase,
    },
    /// Train a model from a seed JSONL file of {text, label[, weight]} rows.
    Train {
        #[arg(long, value_name = "FILE")]
        seeds: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, default_value = "math")]
        positive: String,
        #[arg(long, default_value = "not_math")]
        negative: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
        #[arg(long)]
        word_ngrams: Option<usize>,
    },
    /// Score one text with a trained model.
    Predict {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Literal text to score.
        #[arg(long, conflicts_with = "file")]
        text: Option<String>,
        /// File whose contents are scored.
        #[arg(long, value_name = "FILE")]
        file: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RecallCodeArgs {
    /// Snippet store to score and filter.
    #[arg(long, value_name = "FILE", required_unless_present = "mixture")]
    snippets: Option<PathBuf>,
    /// Where the kept snippets are written.
    #[arg(long, value_name = "FILE", required_unless_present = "mixture")]
    output: Option<PathBuf>,
    /// Also write the rejected snippets here.
    #[arg(long, value_name = "FILE")]
    dropped: Option<PathBuf>,
    /// Plan the token mixture from a JSON map of source → available tokens
    /// instead of filtering snippets.
    #[arg(long, value_name = "FILE")]
    mixture: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthMode {
    /// Extract (and optionally refine) question–answer pairs.
    Qa,
    /// Generate executable computation blocks from document text.
    Blocks,
    /// Translate non-Python snippets to Python.
    Translate,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Vanilla,
    Eli5,
    Eli5Ic,
}

impl StyleArg {
    fn to_style(self) -> RefineStyle {
        match self {
            StyleArg::Vanilla => RefineStyle::Vanilla,
            StyleArg::Eli5 => RefineStyle::Eli5,
            StyleArg::Eli5Ic => RefineStyle::Eli5Ic,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    mode: SynthMode,
    /// Document store (qa and blocks modes).
    #[arg(long, value_name = "FILE")]
    docs: Option<PathBuf>,
    /// Snippet store (translate mode).
    #[arg(long, value_name = "FILE")]
    snippets: Option<PathBuf>,
    /// Synthesized records are written here.
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// Refine extracted pairs in this style (qa mode).
    #[arg(long, value_enum)]
    style: Option<StyleArg>,
    /// Execute generated code blocks in the sandboxed interpreter
    /// (blocks mode; otherwise they are safety-screened only).
    #[arg(long)]
    execute: bool,
}

#[derive(Args)]
struct ProArgs {
    /// Document store to filter.
    #[arg(long, value_name = "FILE")]
    docs: PathBuf,
    /// Surviving (optionally refined) documents are written here.
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// Also write refinement records here (requires --refine).
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Publication year assumed for threshold selection.
    #[arg(long, default_value_t = 2025)]
    year: i32,
    /// Rewrite surviving documents with the refinement prompt.
    #[arg(long)]
    refine: bool,
}

/// CLI failure with its process exit code.
enum CliError {
    /// Invalid configuration or arguments; nothing ran. Exit 2.
    Config(String),
    /// A processing step failed. Exit 3.
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Run(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => CliError::Config(e.to_string()),
            PipelineError::Stage { .. } => CliError::Run(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        if workers > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global()
                .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        }
    }

    match &cli.command {
        Command::Run { stages } => {
            let config = load_config(&cli, stages.clone())?;
            run_stages(&config, cli.resume)
        }
        Command::Ingest => {
            let config = load_config(&cli, vec!["ingest".into()])?;
            run_stages(&config, cli.resume)
        }
        Command::Extract { phase } => {
            let stage = match phase {
                ExtractPhase::Fast => "fast_extract",
                ExtractPhase::Quality => "quality_extract",
            };
            let config = load_config(&cli, vec![stage.into()])?;
            run_stages(&config, cli.resume)
        }
        Command::Classify { action } => classify(&cli, action),
        Command::Dedup => {
            let config = load_config(&cli, vec!["dedup".into()])?;
            run_stages(&config, cli.resume)
        }
        Command::Decontam => {
            let config = load_config(&cli, vec!["decontaminate".into()])?;
            run_stages(&config, cli.resume)
        }
        Command::RecallCode(args) => recall_code(&cli, args),
        Command::Synth(args) => synth(&cli, args),
        Command::Pro(args) => pro(&cli, args),
        Command::Stats { docs, json } => stats(docs, *json),
    }
}

/// Load the shared configuration file, apply global overrides, and (when
/// `stages` is non-empty) replace the stage list.
fn load_config(cli: &Cli, stages: Vec<String>) -> Result<PipelineConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config <FILE>".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.lsh.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.run.workers = workers;
    }
    if !stages.is_empty() {
        config.run.stages = stages;
    }
    Ok(config)
}

fn run_stages(config: &PipelineConfig, resume: bool) -> Result<(), CliError> {
    let manifest = run_pipeline(config, resume)?;
    let final_key = PipelineStage::Emit.key();
    for (key, tally) in &manifest.per_stage {
        println!("{key}: {} docs, {} tokens", tally.doc_count, tally.token_count);
    }
    if let Some(tally) = manifest.per_stage.get(&final_key) {
        println!(
            "final corpus: {} docs, {} tokens ({})",
            tally.doc_count,
            tally.token_count,
            config.paths.output.display()
        );
    }
    println!("manifest: {}", config.paths.workdir.join("manifest.json").display());
    Ok(())
}

fn classify(cli: &Cli, action: &ClassifyCmd) -> Result<(), CliError> {
    match action {
        ClassifyCmd::Stage { phase } => {
            let stage = match phase {
                ClassifyPhase::Loose => "loose_classify",
                ClassifyPhase::Strict => "strict_classify",
            };
            let config = load_config(cli, vec![stage.into()])?;
            run_stages(&config, cli.resume)
        }
        ClassifyCmd::Train {
            seeds,
            output,
            positive,
            negative,
            dim,
            epochs,
            lr,
            word_ngrams,
        } => {
            let corpus = SeedCorpus::from_jsonl(seeds, positive, negative)
                .map_err(|e| CliError::Config(format!("seed corpus: {e}")))?;
            let mut settings = TrainSettings {
                positive_label: positive.clone(),
                negative_label: negative.clone(),
                ..TrainSettings::default()
            };
            if let Some(d) = dim {
                settings.dim = *d;
            }
            if let Some(e) = epochs {
                settings.epochs = *e;
            }
            if let Some(l) = lr {
                settings.lr = *l;
            }
            if let Some(n) = word_ngrams {
                settings.word_ngrams = *n;
            }
            if let Some(seed) = cli.seed {
                settings.seed = seed;
            }
            let model =
                train(&corpus, &settings).map_err(|e| CliError::Run(format!("training: {e}")))?;
            model
                .save(output)
                .map_err(|e| CliError::Run(format!("saving model: {e}")))?;
            println!(
                "trained on {} positive / {} negative samples -> {}",
                corpus.positives.len(),
                corpus.negatives.len(),
                output.display()
            );
            Ok(())
        }
        ClassifyCmd::Predict { model, text, file } => {
            let model = ClassifierModel::load(model)
                .map_err(|e| CliError::Config(format!("model: {e}")))?;
            let text = match (text, file) {
                (Some(t), _) => t.clone(),
                (None, Some(f)) => std::fs::read_to_string(f)
                    .map_err(|e| CliError::Config(format!("{}: {e}", f.display())))?,
                (None, None) => {
                    return Err(CliError::Config("pass --text or --file".into()));
                }
            };
            let prediction = model.predict(&text);
            let (label, prob) = prediction.top();
            println!("{label}\t{prob:.4}");
            Ok(())
        }
    }
}

/// The deterministic offline client: recognizable replies for every prompt
/// family, so mock-mode runs exercise the full machinery without a network.
fn mock_client() -> MockChatClient {
    MockChatClient::rule(|prompt| {
        if prompt.contains("Translate the code from other programming languages into Python") {
            "```python\nprint(42)\n```".to_string()
        } else if prompt.contains("identify all the complex computations") {
            concat!(
                "Conditions Needed:\n",
                "1. The integers from 1 to 10.\n",
                "Computation Expression: \\sum_{i=1}^{10} i\n",
                "Computation Result: 55\n",
                "Python Code Snippet:\n",
                "```python\nprint(sum(range(1, 11)))\n```\n",
            )
            .to_string()
        } else if prompt.contains("Assess whether it contains a mathematical question-and-answer")
        {
            "Question: What is the sum of the first ten positive integers?\nAnswer: 55."
                .to_string()
        } else if prompt.contains("Refine the answer based on the following requirements") {
            // Echo the embedded pair (it sits at the prompt's tail), so the
            // refined answer deterministically restates the original.
            match prompt.rfind("Question:") {
                Some(pos) => prompt[pos..].trim().to_string(),
                None => "Question: ?\nAnswer: unavailable.".to_string(),
            }
        } else if prompt.contains("extract key facts, concrete details") {
            "Summary of the source document, preserving key facts and numbers.".to_string()
        } else {
            // Every scoring rubric asks for a final "Score:" line.
            "Score: 4".to_string()
        }
    })
    .named("mock")
}

fn build_client(llm: &LlmConfig) -> Result<Box<dyn ChatClient>, CliError> {
    if llm.mock {
        return Ok(Box::new(mock_client()));
    }
    let mut client = match (&llm.endpoint, &llm.model) {
        (Some(endpoint), Some(model)) => LiveChatClient::new(endpoint, model),
        _ => LiveChatClient::from_env()
            .map_err(|e| CliError::Config(format!("live endpoint: {e}")))?,
    };
    if let Ok(key) = std::env::var(ENV_API_KEY) {
        client = client.with_api_key(key);
    }
    client = client.with_max_retries(llm.max_retries);
    if llm.max_rps > 0.0 {
        client = client.with_max_requests_per_second(llm.max_rps);
    }
    Ok(Box::new(client))
}

fn read_docs(path: &PathBuf) -> Result<Vec<Document>, CliError> {
    read_jsonl::<Document>(path).map_err(|e| CliError::Config(format!("document store: {e}")))
}

fn recall_code(cli: &Cli, args: &RecallCodeArgs) -> Result<(), CliError> {
    let config = load_config(cli, Vec::new())?;

    if let Some(mixture_path) = &args.mixture {
        let raw = std::fs::read_to_string(mixture_path)
            .map_err(|e| CliError::Config(format!("{}: {e}", mixture_path.display())))?;
        let available: BTreeMap<String, u64> = serde_json::from_str(&raw)
            .map_err(|e| CliError::Config(format!("token table: {e}")))?;
        let plan = plan_mixture(&available, config.code.code_cap)
            .map_err(|e| CliError::Run(format!("mixture: {e}")))?;
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
        return Ok(());
    }

    let (snippets_path, output_path) = match (&args.snippets, &args.output) {
        (Some(s), Some(o)) => (s, o),
        _ => return Err(CliError::Config("pass --snippets and --output".into())),
    };
    let raw: Vec<CodeSnippet> = read_jsonl(snippets_path)
        .map_err(|e| CliError::Config(format!("snippet store: {e}")))?;
    let total = raw.len();
    let selected = select_languages(raw);
    let language_kept = selected.len();

    let client = build_client(&config.llm)?;
    let prompts = PromptLibrary::builtin();
    let scored: Vec<CodeSnippet> = selected
        .into_iter()
        .map(|s| score_snippet(s, client.as_ref(), &prompts))
        .collect();
    let (kept, dropped) =
        threshold_filter(scored, config.code.min_edu, config.code.min_math);

    write_jsonl(output_path, &kept).map_err(|e| CliError::Run(format!("writing kept: {e}")))?;
    if let Some(dropped_path) = &args.dropped {
        write_jsonl(dropped_path, &dropped)
            .map_err(|e| CliError::Run(format!("writing dropped: {e}")))?;
    }
    println!(
        "{total} snippets -> {language_kept} in retained languages -> {} kept, {} dropped",
        kept.len(),
        dropped.len()
    );
    Ok(())
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<(), CliError> {
    let config = load_config(cli, Vec::new())?;
    let client = build_client(&config.llm)?;
    let prompts = PromptLibrary::builtin();
    let tables = SafetyTables::builtin();
    let mut records: Vec<SynthRecord> = Vec::new();

    match args.mode {
        SynthMode::Qa => {
            let docs_path = args
                .docs
                .as_ref()
                .ok_or_else(|| CliError::Config("qa mode needs --docs".into()))?;
            let docs = read_docs(docs_path)?;
            let mut no_qa = 0usize;
            let mut failed = 0usize;
            for doc in &docs {
                let Some(text) = doc.text.as_deref().filter(|t| !t.is_empty()) else {
                    continue;
                };
                match extract_qa(text, client.as_ref(), &prompts) {
                    Ok(QaExtraction::Pairs(pairs)) => {
                        for pair in &pairs {
                            match args.style {
                                Some(style_arg) => {
                                    let style = style_arg.to_style();
                                    match refine_qa(pair, client.as_ref(), &prompts, style) {
                                        Ok(RefineOutcome::Refined { pair, style }) => {
                                            records.push(SynthRecord::qa(
                                                doc.doc_id,
                                                client.name(),
                                                &pair,
                                                Some(style.label()),
                                            ));
                                        }
                                        Ok(RefineOutcome::Failed { original, .. }) => {
                                            failed += 1;
                                            records.push(SynthRecord::qa(
                                                doc.doc_id,
                                                client.name(),
                                                &original,
                                                None,
                                            ));
                                        }
                                        Err(e) => {
                                            failed += 1;
                                            log::warn!("refine failed for {:032x}: {e}", doc.doc_id);
                                        }
                                    }
                                }
                                None => {
                                    records.push(SynthRecord::qa(
                                        doc.doc_id,
                                        client.name(),
                                        pair,
                                        None,
                                    ));
                                }
                            }
                        }
                    }
                    Ok(QaExtraction::NoQa) => no_qa += 1,
                    Ok(QaExtraction::ParseFailed { .. }) => failed += 1,
                    Err(e) => {
                        failed += 1;
                        log::warn!("extraction failed for {:032x}: {e}", doc.doc_id);
                    }
                }
            }
            println!(
                "{} docs -> {} qa records ({no_qa} without qa, {failed} failures)",
                docs.len(),
                records.len()
            );
        }
        SynthMode::Blocks => {
            let docs_path = args
                .docs
                .as_ref()
                .ok_or_else(|| CliError::Config("blocks mode needs --docs".into()))?;
            let docs = read_docs(docs_path)?;
            let limits = ExecLimits::default();
            let policy = if args.execute {
                if !interpreter_available(&limits) {
                    return Err(CliError::Config(format!(
                        "interpreter {} unavailable; drop --execute or install it",
                        limits.interpreter.display()
                    )));
                }
                ExecPolicy::Execute(&limits)
            } else {
                ExecPolicy::SafetyOnly
            };
            let mut empty = 0usize;
            for doc in &docs {
                let Some(text) = doc.text.as_deref().filter(|t| !t.is_empty()) else {
                    continue;
                };
                match generate_blocks(text, client.as_ref(), &prompts, tables, &policy) {
                    Ok((Some(sample), _report)) => {
                        records.push(SynthRecord::text_code_block(
                            doc.doc_id,
                            client.name(),
                            &sample,
                        ));
                    }
                    Ok((None, _report)) => empty += 1,
                    Err(e) => {
                        empty += 1;
                        log::warn!("block generation failed for {:032x}: {e}", doc.doc_id);
                    }
                }
            }
            println!(
                "{} docs -> {} block records ({empty} without usable blocks)",
                docs.len(),
                records.len()
            );
        }
        SynthMode::Translate => {
            let snippets_path = args
                .snippets
                .as_ref()
                .ok_or_else(|| CliError::Config("translate mode needs --snippets".into()))?;
            let snippets: Vec<CodeSnippet> = read_jsonl(snippets_path)
                .map_err(|e| CliError::Config(format!("snippet store: {e}")))?;
            let mut skipped = 0usize;
            for snippet in &snippets {
                if snippet.language == "Python" {
                    skipped += 1;
                    continue;
                }
                match translate_code(snippet, client.as_ref(), &prompts, tables) {
                    Ok(TranslateOutcome::Translated(python)) => {
                        records.push(SynthRecord::translated(
                            snippet.snippet_id,
                            client.name(),
                            &snippet.language,
                            python,
                        ));
                    }
                    Ok(_) => skipped += 1,
                    Err(e) => {
                        skipped += 1;
                        log::warn!("translation failed for {:032x}: {e}", snippet.snippet_id);
                    }
                }
            }
            println!(
                "{} snippets -> {} translations ({skipped} skipped)",
                snippets.len(),
                records.len()
            );
        }
    }

    write_jsonl(&args.output, &records)
        .map_err(|e| CliError::Run(format!("writing records: {e}")))?;
    Ok(())
}

fn pro(cli: &Cli, args: &ProArgs) -> Result<(), CliError> {
    let config = load_config(cli, Vec::new())?;
    let client = build_client(&config.llm)?;
    let prompts = PromptLibrary::builtin();
    let scorer = LlmEduScorer {
        client: client.as_ref(),
        prompts: &prompts,
        template: "web_math_score",
    };
    let thresholds = ProThresholds::default();

    let docs = read_docs(&args.docs)?;
    let total = docs.len();
    let mut kept: Vec<Document> = Vec::new();
    let mut records: Vec<SynthRecord> = Vec::new();
    for mut doc in docs {
        if !pro_filter(&mut doc, args.year, &scorer, &thresholds) {
            continue;
        }
        if args.refine {
            let outcome = pro_refine(doc, client.as_ref(), &prompts);
            if let Some(record) = outcome.record {
                records.push(record);
            }
            kept.push(outcome.doc);
        } else {
            kept.push(doc);
        }
    }

    write_jsonl(&args.output, &kept)
        .map_err(|e| CliError::Run(format!("writing documents: {e}")))?;
    if let Some(records_path) = &args.records {
        write_jsonl(records_path, &records)
            .map_err(|e| CliError::Run(format!("writing records: {e}")))?;
    }
    println!(
        "{total} docs -> {} kept{}",
        kept.len(),
        if args.refine {
            format!(", {} refined", records.len())
        } else {
            String::new()
        }
    );
    Ok(())
}

fn stats(docs_path: &PathBuf, json: bool) -> Result<(), CliError> {
    let docs = read_docs(docs_path)?;
    let table = corpus_stats(docs.iter(), &WhitespaceTokenizer);
    if json {
        println!("{}", serde_json::to_string_pretty(&table).expect("table serializes"));
        return Ok(());
    }
    println!("{:<20} {:>10} {:>14}", "source", "docs", "tokens");
    let mut total_docs = 0u64;
    let mut total_tokens = 0u64;
    for (source, row) in &table {
        println!("{:<20} {:>10} {:>14}", source, row.docs, row.tokens);
        total_docs += row.docs;
        total_tokens += row.tokens;
    }
    println!("{:<20} {:>10} {:>14}", "total", total_docs, total_tokens);
    Ok(())
}
