//! Deterministic fixture builders: synthetic pages, WARC archives, seed
//! corpora, tiny trained classifier models, and a fully planted corpus with
//! known expected counts at every pipeline stage.
//!
//! Everything here is seeded; the same seed reproduces the same bytes.
//! Intended for integration tests, benchmarks, and examples — nothing in
//! the production pipeline depends on this module.

use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::classifier::{train, ClassifierModel, Sample, SeedCorpus, TrainSettings};
use crate::decontam::BenchmarkItem;
use crate::jsonl::write_jsonl;
use crate::pipeline::{PipelineConfig, PathsConfig};

/// Vocabulary for mathematical pages and positive classifier seeds.
pub const MATH_WORDS: [&str; 40] = [
    "theorem", "proof", "lemma", "integral", "derivative", "equation", "matrix", "vector",
    "polynomial", "algebra", "geometry", "topology", "converges", "sequence", "series", "limit",
    "function", "continuous", "differentiable", "eigenvalue", "determinant", "modulo", "prime",
    "integer", "rational", "irrational", "numerator", "denominator", "coefficient", "quadratic",
    "binomial", "factorial", "permutation", "combinatorics", "probability", "variance", "median",
    "axiom", "corollary", "inequality",
];

/// Vocabulary for ordinary prose pages and negative classifier seeds.
pub const PROSE_WORDS: [&str; 40] = [
    "recipe", "garden", "travel", "weather", "holiday", "kitchen", "flavor", "butter", "roasted",
    "festival", "museum", "afternoon", "village", "harbor", "sunset", "jacket", "autumn",
    "concert", "guitar", "melody", "painting", "gallery", "novel", "chapter", "character",
    "journey", "mountain", "river", "bicycle", "coffee", "morning", "market", "cheese", "bread",
    "wooden", "candle", "blanket", "window", "neighbor", "story",
];

/// Non-English filler for language-identification negatives.
pub const NOISE_WORDS: [&str; 24] = [
    "le", "la", "les", "des", "une", "est", "avec", "pour", "dans", "nous", "vous", "elle",
    "bonjour", "merci", "fromage", "maison", "jardin", "voiture", "rue", "ville", "toujours",
    "jamais", "demain", "hier",
];

/// Inline formulas sprinkled through mathematical pages.
pub const INLINE_MATH: [&str; 6] = [
    "$a^{2}+b^{2}=c^{2}$",
    "$\\int_{0}^{1} x^{2} \\, dx = \\frac{1}{3}$",
    "$e^{i\\pi}+1=0$",
    "$\\sum_{n=1}^{\\infty} \\frac{1}{n^{2}} = \\frac{\\pi^{2}}{6}$",
    "$\\frac{d}{dx} \\sin x = \\cos x$",
    "$\\det(AB) = \\det(A)\\det(B)$",
];

/// `n` words drawn uniformly from `pool`, space-joined.
pub fn word_salad(rng: &mut StdRng, pool: &[&str], n: usize) -> String {
    (0..n)
        .map(|_| pool[rng.gen_range(0..pool.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// An English sentence mixing everyday connectives with `pool` vocabulary.
pub fn sentence(rng: &mut StdRng, pool: &[&str], words: usize) -> String {
    const CONNECTIVES: [&str; 12] = [
        "the", "a", "this", "that", "we", "it", "is", "and", "then", "shows", "gives", "using",
    ];
    let mut parts = Vec::with_capacity(words);
    for i in 0..words {
        if i % 3 == 1 {
            parts.push(CONNECTIVES[rng.gen_range(0..CONNECTIVES.len())]);
        } else {
            parts.push(pool[rng.gen_range(0..pool.len())]);
        }
    }
    let mut s = parts.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// A mathematical paragraph of roughly `words` words, with inline formulas.
pub fn math_paragraph(rng: &mut StdRng, words: usize) -> String {
    let mut out = Vec::new();
    let mut emitted = 0;
    while emitted < words {
        let n = rng.gen_range(8..14).min(words - emitted.min(words));
        let mut s = sentence(rng, &MATH_WORDS, n.max(4));
        if rng.gen_bool(0.4) {
            s.pop();
            s.push_str(&format!(" {}.", INLINE_MATH[rng.gen_range(0..INLINE_MATH.len())]));
        }
        emitted += n.max(4);
        out.push(s);
    }
    out.join(" ")
}

/// A prose paragraph of roughly `words` words.
pub fn prose_paragraph(rng: &mut StdRng, words: usize) -> String {
    let mut out = Vec::new();
    let mut emitted = 0;
    while emitted < words {
        let n = rng.gen_range(8..14).min(words - emitted.min(words));
        out.push(sentence(rng, &PROSE_WORDS, n.max(4)));
        emitted += n.max(4);
    }
    out.join(" ")
}

/// Minimal page markup around body paragraphs.
pub fn html_page(title: &str, paragraphs: &[String]) -> String {
    let mut html = String::new();
    html.push_str("<html><head><title>");
    html.push_str(title);
    html.push_str("</title><style>p{margin:0}</style></head><body><article>");
    for p in paragraphs {
        html.push_str("<p>");
        html.push_str(p);
        html.push_str("</p>");
    }
    html.push_str("</article></body></html>");
    html
}

/// One WARC 1.0 response record wrapping an HTML page.
pub fn warc_response(url: &str, date: &str, html: &str) -> Vec<u8> {
    let body = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\n\r\n{}",
        html.len(),
        html
    );
    let mut record = format!(
        "WARC/1.0\r\nWARC-Type: response\r\nWARC-Target-URI: {url}\r\nWARC-Date: {date}\r\nWARC-Record-ID: <urn:uuid:fixture>\r\nContent-Length: {}\r\n\r\n",
        body.len()
    )
    .into_bytes();
    record.extend_from_slice(body.as_bytes());
    record.extend_from_slice(b"\r\n\r\n");
    record
}

/// Concatenate records into an archive file.
pub fn write_warc(path: &Path, records: &[Vec<u8>]) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    for r in records {
        bytes.extend_from_slice(r);
    }
    fs::write(path, bytes)
}

/// Seed corpus separating mathematical from everyday English text.
pub fn math_seed_corpus(rng: &mut StdRng, per_side: usize) -> SeedCorpus {
    let mut corpus = SeedCorpus::default();
    for _ in 0..per_side {
        corpus.positives.push(Sample::new(math_paragraph(rng, 40)));
        corpus.negatives.push(Sample::new(prose_paragraph(rng, 40)));
    }
    corpus.provenance.insert("generator".into(), "testkit math/prose pools".into());
    corpus
}

/// Seed corpus separating English from non-English filler text.
pub fn langid_seed_corpus(rng: &mut StdRng, per_side: usize) -> SeedCorpus {
    let mut corpus = SeedCorpus::default();
    for i in 0..per_side {
        let pool: &[&str] = if i % 2 == 0 { &MATH_WORDS } else { &PROSE_WORDS };
        corpus.positives.push(Sample::new(sentence(rng, pool, 24)));
        corpus.negatives.push(Sample::new(word_salad(rng, &NOISE_WORDS, 24)));
    }
    corpus.provenance.insert("generator".into(), "testkit english/noise pools".into());
    corpus
}

/// Small, fast training settings for fixture models.
pub fn tiny_train_settings(positive: &str, negative: &str, seed: u64) -> TrainSettings {
    TrainSettings {
        dim: 16,
        hash_buckets: 1 << 14,
        word_ngrams: 2,
        // Small fixture corpora need more aggressive optimization than the
        // production defaults to reach confident separation.
        epochs: 30,
        lr: 0.4,
        seed,
        positive_label: positive.to_string(),
        negative_label: negative.to_string(),
        ..TrainSettings::default()
    }
}

/// Paths of the three models a pipeline run needs.
pub struct TinyModels {
    pub langid: PathBuf,
    pub stage1: PathBuf,
    pub stage2: PathBuf,
}

/// Train and save a language-id model and both math classifiers into `dir`.
pub fn train_tiny_models(dir: &Path) -> TinyModels {
    fs::create_dir_all(dir).expect("model dir");
    let mut rng = StdRng::seed_from_u64(0x7e57_0001);

    let langid_corpus = langid_seed_corpus(&mut rng, 60);
    let langid = train(&langid_corpus, &tiny_train_settings("en", "xx", 11)).expect("langid training");
    let langid_path = dir.join("langid.bin");
    langid.save(&langid_path).expect("save langid");

    let math_corpus = math_seed_corpus(&mut rng, 60);
    let stage1 = train(&math_corpus, &tiny_train_settings("math", "not_math", 12)).expect("stage1 training");
    let stage1_path = dir.join("stage1.bin");
    stage1.save(&stage1_path).expect("save stage1");

    let stage2 = train(&math_corpus, &tiny_train_settings("math", "not_math", 13)).expect("stage2 training");
    let stage2_path = dir.join("stage2.bin");
    stage2.save(&stage2_path).expect("save stage2");

    TinyModels {
        langid: langid_path,
        stage1: stage1_path,
        stage2: stage2_path,
    }
}

/// Load a fixture model back (convenience for direct library tests).
pub fn load_model(path: &Path) -> ClassifierModel {
    ClassifierModel::load(path).expect("fixture model loads")
}

/// Replace `k` evenly spaced words of `text` with pool words — a
/// near-duplicate with a controlled edit distance.
pub fn substitute_words(text: &str, k: usize, rng: &mut StdRng) -> String {
    let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if words.is_empty() || k == 0 {
        return text.to_string();
    }
    let step = (words.len() / (k + 1)).max(1);
    for i in 0..k {
        let idx = ((i + 1) * step).min(words.len() - 1);
        words[idx] = format!("{}{}", MATH_WORDS[rng.gen_range(0..MATH_WORDS.len())], i);
    }
    words.join(" ")
}

/// A corpus planted on disk with known composition, plus the sidecar files
/// a pipeline run needs. Every expected count is derivable from the fields.
pub struct PlantedCorpus {
    /// Directory holding one `.warc` archive.
    pub input_dir: PathBuf,
    pub blocklist: PathBuf,
    pub benchmarks: PathBuf,
    pub math_pages: usize,
    pub near_dup_pages: usize,
    pub non_math_pages: usize,
    pub blocked_pages: usize,
    pub contaminated_pages: usize,
}

impl PlantedCorpus {
    /// Records in the archive.
    pub fn total_records(&self) -> usize {
        self.math_pages
            + self.near_dup_pages
            + self.non_math_pages
            + self.blocked_pages
            + self.contaminated_pages
    }

    /// Documents surviving the URL filter.
    pub fn expected_ingested(&self) -> usize {
        self.total_records() - self.blocked_pages
    }

    /// Documents surviving the loose math filter: everything mathematical.
    pub fn expected_loose_kept(&self) -> usize {
        self.math_pages + self.near_dup_pages + self.contaminated_pages
    }

    /// Dedup survivors: each near-dup merges into its original.
    pub fn expected_dedup_survivors(&self) -> usize {
        self.expected_loose_kept() - self.near_dup_pages
    }

    /// Final documents: survivors minus benchmark-contaminated pages.
    pub fn expected_final(&self) -> usize {
        self.expected_dedup_survivors() - self.contaminated_pages
    }
}

/// Build the standard planted corpus in `dir`:
///
/// * `math` original mathematical pages (~300 words each);
/// * one near-duplicate of each of the first `near_dups` math pages
///   (1–2 word substitutions, Jaccard ≈ 0.93–0.97);
/// * `non_math` prose pages;
/// * `blocked` pages hosted on blocklisted domains;
/// * `contaminated` mathematical pages embedding a benchmark item verbatim.
///
/// The blocklist and an 8-item benchmark file are written next to the
/// archive.
pub fn plant_corpus(
    dir: &Path,
    seed: u64,
    math: usize,
    near_dups: usize,
    non_math: usize,
    blocked: usize,
    contaminated: usize,
) -> PlantedCorpus {
    assert!(near_dups <= math, "each near-dup shadows an original");
    let mut rng = StdRng::seed_from_u64(seed);
    let input_dir = dir.join("input");
    fs::create_dir_all(&input_dir).expect("input dir");

    let benchmarks: Vec<BenchmarkItem> = (0..contaminated.max(8))
        .map(|i| BenchmarkItem {
            problem: format!(
                "Problem {i}: compute the sum of the first {} positive integers and \
                 justify the closed form n times n plus one over two",
                10 + i
            ),
            solution: format!(
                "By the pairing argument the total equals {} which matches the closed form",
                (10 + i) * (11 + i) / 2
            ),
        })
        .collect();
    let benchmarks_path = dir.join("benchmarks.jsonl");
    write_jsonl(&benchmarks_path, &benchmarks).expect("write benchmarks");

    let blocklist_path = dir.join("blocklist.txt");
    fs::write(
        &blocklist_path,
        "# fixture blocklist\nbad.example\ncasino-spam.example\n",
    )
    .expect("write blocklist");

    let date = "2024-11-10T10:00:00Z";
    let mut records = Vec::new();
    let mut originals = Vec::new();

    for i in 0..math {
        let text = math_paragraph(&mut rng, 300);
        originals.push(text.clone());
        let page = html_page(&format!("Lecture {i}"), &[text]);
        records.push(warc_response(
            &format!("https://mathnotes.example.org/lecture/{i}"),
            date,
            &page,
        ));
    }
    for (i, original) in originals.iter().take(near_dups).enumerate() {
        let k = 1 + (i % 2); // 1–2 substitutions: Jaccard stays ≥ ~0.93
        let text = substitute_words(original, k, &mut rng);
        let page = html_page(&format!("Lecture {i} (mirror)"), &[text]);
        records.push(warc_response(
            &format!("https://mirror.example.net/lecture/{i}"),
            date,
            &page,
        ));
    }
    for i in 0..non_math {
        let page = html_page(
            &format!("Weekend notes {i}"),
            &[prose_paragraph(&mut rng, 300)],
        );
        records.push(warc_response(
            &format!("https://chatter.example.com/post/{i}"),
            date,
            &page,
        ));
    }
    for i in 0..blocked {
        let page = html_page("Blocked", &[prose_paragraph(&mut rng, 60)]);
        records.push(warc_response(
            &format!("https://sub{i}.bad.example/landing/{i}"),
            date,
            &page,
        ));
    }
    for i in 0..contaminated {
        let item = &benchmarks[i % benchmarks.len()];
        let text = format!(
            "{} {} {} {}",
            math_paragraph(&mut rng, 140),
            item.problem,
            item.solution,
            math_paragraph(&mut rng, 140),
        );
        let page = html_page(&format!("Solved problems {i}"), &[text]);
        records.push(warc_response(
            &format!("https://solutions.example.org/bank/{i}"),
            date,
            &page,
        ));
    }

    write_warc(&input_dir.join("crawl-2024-46-000.warc"), &records).expect("write warc");

    PlantedCorpus {
        input_dir,
        blocklist: blocklist_path,
        benchmarks: benchmarks_path,
        math_pages: math,
        near_dup_pages: near_dups,
        non_math_pages: non_math,
        blocked_pages: blocked,
        contaminated_pages: contaminated,
    }
}

/// A ready-to-run pipeline configuration over a planted corpus: work files
/// under `workdir`, final corpus at `output`.
pub fn plant_config(
    plant: &PlantedCorpus,
    models: &TinyModels,
    workdir: &Path,
    output: &Path,
) -> PipelineConfig {
    PipelineConfig {
        paths: PathsConfig {
            input: plant.input_dir.clone(),
            workdir: workdir.to_path_buf(),
            output: output.to_path_buf(),
            blocklist: Some(plant.blocklist.clone()),
            benchmarks: Some(plant.benchmarks.clone()),
            langid_model: Some(models.langid.clone()),
            stage1_model: Some(models.stage1.clone()),
            stage2_model: Some(models.stage2.clone()),
        },
        ..PipelineConfig::default()
    }
}

/// Serialize a configuration to a TOML file (as the CLI consumes it).
pub fn write_config_toml(config: &PipelineConfig, path: &Path) {
    let text = toml::to_string_pretty(config).expect("config serializes to TOML");
    fs::write(path, text).expect("write config file");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_text, ExtractionProfile};

    #[test]
    fn generators_are_deterministic_per_seed() {
        let mut a = StdRng::seed_from_u64(7);
        let mut b = StdRng::seed_from_u64(7);
        assert_eq!(math_paragraph(&mut a, 50), math_paragraph(&mut b, 50));
        let mut c = StdRng::seed_from_u64(8);
        assert_ne!(math_paragraph(&mut a, 50), math_paragraph(&mut c, 50));
    }

    #[test]
    fn page_text_survives_extraction() {
        let mut rng = StdRng::seed_from_u64(1);
        let text = math_paragraph(&mut rng, 120);
        let page = html_page("T", &[text.clone()]);
        let fast = extract_text(&page, &ExtractionProfile::fast());
        assert!(fast.contains("theorem") || fast.contains("integral") || fast.len() > 200);
        // Style block from the head never leaks into the text.
        assert!(!fast.contains("margin:0"));
    }

    #[test]
    fn substitution_changes_exactly_k_words() {
        let mut rng = StdRng::seed_from_u64(2);
        let text = math_paragraph(&mut rng, 300);
        let edited = substitute_words(&text, 3, &mut rng);
        let a: Vec<&str> = text.split_whitespace().collect();
        let b: Vec<&str> = edited.split_whitespace().collect();
        assert_eq!(a.len(), b.len());
        let diffs = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert_eq!(diffs, 3);
    }

    #[test]
    fn tiny_models_separate_their_classes() {
        let dir = tempfile::tempdir().unwrap();
        let models = train_tiny_models(dir.path());
        let mut rng = StdRng::seed_from_u64(42);

        let stage1 = load_model(&models.stage1);
        let math = math_paragraph(&mut rng, 120);
        let prose = prose_paragraph(&mut rng, 120);
        assert!(stage1.predict(&math).prob("math") > 0.9, "fixture math page scores high");
        assert!(stage1.predict(&prose).prob("math") < 0.3, "fixture prose page scores low");

        let langid = load_model(&models.langid);
        assert!(langid.predict(&math).prob("en") > 0.9);
        let noise = word_salad(&mut rng, &NOISE_WORDS, 60);
        assert!(langid.predict(&noise).prob("en") < 0.35);
    }

    #[test]
    fn planted_corpus_counts_add_up() {
        let dir = tempfile::tempdir().unwrap();
        let plant = plant_corpus(dir.path(), 9, 10, 10, 20, 5, 5);
        assert_eq!(plant.total_records(), 50);
        assert_eq!(plant.expected_ingested(), 45);
        assert_eq!(plant.expected_loose_kept(), 25);
        assert_eq!(plant.expected_dedup_survivors(), 15);
        assert_eq!(plant.expected_final(), 10);
        assert!(plant.input_dir.join("crawl-2024-46-000.warc").exists());
        assert!(plant.blocklist.exists());
        assert!(plant.benchmarks.exists());
    }
}
