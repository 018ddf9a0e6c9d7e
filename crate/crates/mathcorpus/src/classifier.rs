//! Supervised text classifier: hashed bag-of-words + word n-grams feeding a
//! mean-embedding linear softmax, trained by SGD with a linearly decaying
//! learning rate.
//!
//! This is the quality gate of the whole pipeline: a small, fast model that
//! can be retrained from seed corpora in seconds and applied to millions of
//! documents. The same normalization rules used for its features are reused
//! by near-duplicate detection and decontamination so that all three see the
//! same token stream.
//!
//! Training is single-threaded and fully seeded: the same corpus, settings,
//! and seed produce a bit-identical model on any platform.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::hash::hash_tokens;

/// Magic bytes identifying the model file format.
pub const MODEL_MAGIC: &[u8; 5] = b"MMFT1";

/// Text canonicalization applied before tokenization. The full chain is
/// idempotent: `normalize_text(normalize_text(x)) == normalize_text(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationRules {
    /// Unicode NFKC compatibility fold (applied before *and* after
    /// lowercasing, because lowercasing can denormalize).
    pub nfkc: bool,
    /// Unicode lowercasing.
    pub lowercase: bool,
    /// Map every ASCII digit to '0' so numbers don't fragment the vocabulary.
    pub digits_to_zero: bool,
    /// Drop control and invisible-format characters that aren't whitespace.
    pub strip_control: bool,
    /// Collapse whitespace runs to single spaces and trim the ends.
    pub collapse_whitespace: bool,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        NormalizationRules {
            nfkc: true,
            lowercase: true,
            digits_to_zero: true,
            strip_control: true,
            collapse_whitespace: true,
        }
    }
}

/// Invisible format characters stripped alongside control characters.
fn is_invisible_format(c: char) -> bool {
    matches!(c,
        '\u{00ad}' | '\u{200b}'..='\u{200f}' | '\u{202a}'..='\u{202e}' | '\u{2060}' | '\u{feff}')
}

/// Apply `rules` to `text`. Never fails; the empty string maps to itself.
pub fn normalize_text(text: &str, rules: &NormalizationRules) -> String {
    let mut s: String = if rules.nfkc {
        text.nfkc().collect()
    } else {
        text.to_string()
    };
    if rules.lowercase {
        s = s.to_lowercase();
        if rules.nfkc {
            // Lowercasing can produce denormalized sequences (e.g. İ →
            // i + combining dot); re-fold so the result is a fixed point.
            s = s.nfkc().collect();
        }
    }
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if rules.strip_control && ((c.is_control() && !c.is_whitespace()) || is_invisible_format(c))
        {
            continue;
        }
        if rules.digits_to_zero && c.is_ascii_digit() {
            out.push('0');
        } else {
            out.push(c);
        }
    }
    if rules.collapse_whitespace {
        let collapsed: Vec<&str> = out.split_whitespace().collect();
        out = collapsed.join(" ");
    }
    out
}

/// One training sample. `weight` scales its gradient contribution; sampling
/// schemes that want certain positives (e.g. worked-solution pages) to count
/// double express that here instead of physically duplicating text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    #[serde(default = "default_weight")]
    pub weight: f32,
}

fn default_weight() -> f32 {
    1.0
}

impl Sample {
    pub fn new(text: impl Into<String>) -> Self {
        Sample {
            text: text.into(),
            weight: 1.0,
        }
    }

    pub fn weighted(text: impl Into<String>, weight: f32) -> Self {
        Sample {
            text: text.into(),
            weight,
        }
    }
}

/// Labeled seed data for binary training.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SeedCorpus {
    pub positives: Vec<Sample>,
    pub negatives: Vec<Sample>,
    /// Free-form notes about where each pool came from (source → detail);
    /// recorded for audit, not used by training.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl SeedCorpus {
    /// Read a JSONL file of `{"text": ..., "label": ..., "weight"?: ...}`
    /// rows, splitting rows into pools by the two given label names. Rows
    /// with any other label are ignored.
    pub fn from_jsonl(
        path: &Path,
        positive_label: &str,
        negative_label: &str,
    ) -> Result<Self, TrainError> {
        #[derive(Deserialize)]
        struct Row {
            text: String,
            label: String,
            #[serde(default = "default_weight")]
            weight: f32,
        }
        let file = std::fs::File::open(path).map_err(|e| TrainError::Io(path.into(), e))?;
        let reader = std::io::BufReader::new(file);
        let mut corpus = SeedCorpus::default();
        for (lineno, line) in std::io::BufRead::lines(reader).enumerate() {
            let line = line.map_err(|e| TrainError::Io(path.into(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| TrainError::BadSeedRow {
                path: path.into(),
                line: lineno + 1,
                source: e,
            })?;
            let sample = Sample::weighted(row.text, row.weight);
            if row.label == positive_label {
                corpus.positives.push(sample);
            } else if row.label == negative_label {
                corpus.negatives.push(sample);
            }
        }
        corpus
            .provenance
            .insert("seed_file".into(), path.display().to_string());
        Ok(corpus)
    }
}

/// Training hyperparameters. The defaults are the production settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    /// Embedding width.
    pub dim: usize,
    /// Number of feature hash buckets (power of two recommended).
    pub hash_buckets: usize,
    /// Highest word n-gram order to hash (1 = unigrams only).
    pub word_ngrams: usize,
    /// Initial learning rate; decays linearly to zero over training.
    pub lr: f32,
    pub epochs: usize,
    pub seed: u64,
    /// Label assigned to `positives` / `negatives` pools.
    pub positive_label: String,
    pub negative_label: String,
    pub norm: NormalizationRules,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            dim: 64,
            hash_buckets: 1 << 20,
            word_ngrams: 3,
            lr: 0.1,
            epochs: 5,
            seed: 42,
            positive_label: "math".into(),
            negative_label: "not_math".into(),
            norm: NormalizationRules::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("seed corpus has an empty pool: positives={positives}, negatives={negatives}")]
    EmptyPool { positives: usize, negatives: usize },
    #[error("training settings invalid: {0}")]
    BadSettings(String),
    #[error("training diverged: non-finite weights after epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("bad seed-corpus row at {path}:{line}: {source}")]
    BadSeedRow {
        path: std::path::PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("i/o error on {0}: {1}")]
    Io(std::path::PathBuf, std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("i/o error on {0}: {1}")]
    Io(std::path::PathBuf, std::io::Error),
    #[error("not a classifier model file (bad magic bytes)")]
    BadMagic,
    #[error("model header malformed: {0}")]
    BadHeader(String),
    #[error("model file truncated or oversized: expected {expected} matrix bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
}

/// A trained classifier: label set, feature space geometry, normalization
/// rules, and the two weight matrices.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub labels: Vec<String>,
    pub hash_buckets: usize,
    pub dim: usize,
    pub word_ngrams: usize,
    pub norm: NormalizationRules,
    /// Input embeddings, `hash_buckets × dim`, row-major.
    pub embeddings: Vec<f32>,
    /// Output projection, `labels.len() × dim`, row-major.
    pub output: Vec<f32>,
}

/// Prediction result: a full label→probability map plus a flag for inputs
/// that produced no tokens (their distribution is uniform by construction).
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub probs: BTreeMap<String, f64>,
    pub no_tokens: bool,
}

impl Prediction {
    /// Highest-probability label. Ties break toward the lexically smallest
    /// label so results are stable.
    pub fn top(&self) -> (&str, f64) {
        let mut best: Option<(&str, f64)> = None;
        for (label, &p) in &self.probs {
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((label.as_str(), p)),
            }
        }
        best.expect("prediction always carries at least two labels")
    }

    pub fn prob(&self, label: &str) -> f64 {
        self.probs.get(label).copied().unwrap_or(0.0)
    }
}

/// Hash the normalized token stream into feature bucket indices: every word
/// unigram plus every n-gram window up to `word_ngrams`.
fn featurize(normalized: &str, word_ngrams: usize, hash_buckets: usize) -> Vec<u32> {
    let words: Vec<&str> = normalized.split_whitespace().collect();
    let mut feats = Vec::with_capacity(words.len() * word_ngrams);
    for n in 1..=word_ngrams.max(1) {
        if words.len() < n {
            break;
        }
        for window in words.windows(n) {
            feats.push((hash_tokens(window) % hash_buckets as u64) as u32);
        }
    }
    feats
}

impl ClassifierModel {
    /// Mean of the feature embeddings (the "hidden" vector). Empty feature
    /// lists produce the zero vector.
    fn hidden(&self, feats: &[u32]) -> Vec<f32> {
        let mut h = vec![0.0f32; self.dim];
        if feats.is_empty() {
            return h;
        }
        for &f in feats {
            let row = &self.embeddings[f as usize * self.dim..(f as usize + 1) * self.dim];
            for (hv, rv) in h.iter_mut().zip(row) {
                *hv += rv;
            }
        }
        let inv = 1.0 / feats.len() as f32;
        for hv in &mut h {
            *hv *= inv;
        }
        h
    }

    fn logits(&self, hidden: &[f32]) -> Vec<f32> {
        (0..self.labels.len())
            .map(|l| {
                let row = &self.output[l * self.dim..(l + 1) * self.dim];
                row.iter().zip(hidden).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Classify `text`. Normalization and featurization happen inside, with
    /// the rules stored in the model, so callers can hand over raw text.
    pub fn predict(&self, text: &str) -> Prediction {
        let normalized = normalize_text(text, &self.norm);
        let feats = featurize(&normalized, self.word_ngrams, self.hash_buckets);
        if feats.is_empty() {
            let uniform = 1.0 / self.labels.len() as f64;
            return Prediction {
                probs: self.labels.iter().map(|l| (l.clone(), uniform)).collect(),
                no_tokens: true,
            };
        }
        let hidden = self.hidden(&feats);
        let logits = self.logits(&hidden);
        let probs = softmax_f64(&logits);
        Prediction {
            probs: self
                .labels
                .iter()
                .cloned()
                .zip(probs)
                .collect(),
            no_tokens: false,
        }
    }

    /// Serialize to `path`: magic, JSON header, then the two matrices as
    /// little-endian f32. Bit-exact round trip.
    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        let header = serde_json::json!({
            "version": 1,
            "labels": self.labels,
            "hash_buckets": self.hash_buckets,
            "dim": self.dim,
            "word_ngrams": self.word_ngrams,
            "norm": self.norm,
        });
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| ModelIoError::BadHeader(e.to_string()))?;
        let mut buf = Vec::with_capacity(
            5 + 4 + header_bytes.len() + (self.embeddings.len() + self.output.len()) * 4,
        );
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header_bytes);
        for &v in self.embeddings.iter().chain(self.output.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        let write = |p: &Path| -> std::io::Result<()> {
            let mut f = std::fs::File::create(p)?;
            f.write_all(&buf)?;
            f.sync_all()
        };
        write(&tmp).map_err(|e| ModelIoError::Io(tmp.clone(), e))?;
        std::fs::rename(&tmp, path).map_err(|e| ModelIoError::Io(path.into(), e))?;
        Ok(())
    }

    /// Load a model written by [`ClassifierModel::save`].
    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        let mut file =
            std::fs::File::open(path).map_err(|e| ModelIoError::Io(path.into(), e))?;
        let mut data = Vec::new();
        file.read_to_end(&mut data)
            .map_err(|e| ModelIoError::Io(path.into(), e))?;
        if data.len() < 9 || &data[..5] != MODEL_MAGIC {
            return Err(ModelIoError::BadMagic);
        }
        let header_len = u32::from_le_bytes(data[5..9].try_into().unwrap()) as usize;
        if data.len() < 9 + header_len {
            return Err(ModelIoError::BadHeader("header extends past EOF".into()));
        }
        #[derive(Deserialize)]
        struct Header {
            version: u32,
            labels: Vec<String>,
            hash_buckets: usize,
            dim: usize,
            word_ngrams: usize,
            norm: NormalizationRules,
        }
        let header: Header = serde_json::from_slice(&data[9..9 + header_len])
            .map_err(|e| ModelIoError::BadHeader(e.to_string()))?;
        if header.version != 1 {
            return Err(ModelIoError::BadHeader(format!(
                "unsupported version {}",
                header.version
            )));
        }
        if header.labels.len() < 2 || header.dim == 0 || header.hash_buckets == 0 {
            return Err(ModelIoError::BadHeader("degenerate geometry".into()));
        }
        let matrix_bytes = &data[9 + header_len..];
        let expected = (header.hash_buckets * header.dim + header.labels.len() * header.dim) * 4;
        if matrix_bytes.len() != expected {
            return Err(ModelIoError::SizeMismatch {
                expected,
                found: matrix_bytes.len(),
            });
        }
        let mut values = matrix_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let embeddings: Vec<f32> = values.by_ref().take(header.hash_buckets * header.dim).collect();
        let output: Vec<f32> = values.collect();
        Ok(ClassifierModel {
            labels: header.labels,
            hash_buckets: header.hash_buckets,
            dim: header.dim,
            word_ngrams: header.word_ngrams,
            norm: header.norm,
            embeddings,
            output,
        })
    }
}

fn softmax_f64(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&l| ((l as f64) - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn softmax_f32(logits: &mut [f32]) {
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// Train a binary classifier on the seed corpus. Deterministic for a fixed
/// (corpus, settings) pair.
pub fn train(corpus: &SeedCorpus, settings: &TrainSettings) -> Result<ClassifierModel, TrainError> {
    if corpus.positives.is_empty() || corpus.negatives.is_empty() {
        return Err(TrainError::EmptyPool {
            positives: corpus.positives.len(),
            negatives: corpus.negatives.len(),
        });
    }
    if settings.dim == 0 || settings.hash_buckets == 0 || settings.epochs == 0 {
        return Err(TrainError::BadSettings(
            "dim, hash_buckets, and epochs must be nonzero".into(),
        ));
    }
    if settings.positive_label == settings.negative_label {
        return Err(TrainError::BadSettings("labels must differ".into()));
    }

    // Labels sorted so the model is invariant to pool naming order.
    let mut labels = vec![
        settings.positive_label.clone(),
        settings.negative_label.clone(),
    ];
    labels.sort();
    let pos_idx = labels
        .iter()
        .position(|l| *l == settings.positive_label)
        .unwrap();

    // Featurize once up front; training then touches only bucket indices.
    let mut samples: Vec<(Vec<u32>, usize, f32)> = Vec::new();
    for (pool, label_idx) in [(&corpus.positives, pos_idx), (&corpus.negatives, 1 - pos_idx)] {
        for s in pool {
            let normalized = normalize_text(&s.text, &settings.norm);
            let feats = featurize(&normalized, settings.word_ngrams, settings.hash_buckets);
            if feats.is_empty() {
                continue; // nothing to learn from
            }
            samples.push((feats, label_idx, s.weight.max(0.0)));
        }
    }
    if samples.is_empty() {
        return Err(TrainError::BadSettings(
            "no sample produced any tokens after normalization".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut model = ClassifierModel {
        labels,
        hash_buckets: settings.hash_buckets,
        dim: settings.dim,
        word_ngrams: settings.word_ngrams,
        norm: settings.norm.clone(),
        embeddings: {
            // Uniform init in [-1/dim, 1/dim], the usual scale for
            // mean-pooled embeddings.
            let bound = 1.0 / settings.dim as f32;
            (0..settings.hash_buckets * settings.dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect()
        },
        output: vec![0.0; 2 * settings.dim],
    };

    let total_steps = (settings.epochs * samples.len()) as f32;
    let mut step = 0f32;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let dim = settings.dim;

    for epoch in 0..settings.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let (feats, label_idx, weight) = &samples[si];
            let lr = settings.lr * (1.0 - step / total_steps) * weight;
            step += 1.0;
            if lr <= 0.0 {
                continue;
            }

            let hidden = model.hidden(feats);
            let mut probs = model.logits(&hidden);
            softmax_f32(&mut probs);

            // Gradient of cross-entropy wrt logits: p - onehot(label).
            let mut grad_hidden = vec![0.0f32; dim];
            for l in 0..2 {
                let delta = lr * (probs[l] - if l == *label_idx { 1.0 } else { 0.0 });
                let row = &mut model.output[l * dim..(l + 1) * dim];
                for d in 0..dim {
                    grad_hidden[d] += delta * row[d];
                    row[d] -= delta * hidden[d];
                }
            }
            // Spread the hidden-vector gradient back over the contributing
            // feature rows (mean pooling → divide by count).
            let inv = 1.0 / feats.len() as f32;
            for &f in feats {
                let row = &mut model.embeddings[f as usize * dim..(f as usize + 1) * dim];
                for d in 0..dim {
                    row[d] -= grad_hidden[d] * inv;
                }
            }
        }
        if model.output.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
    }
    Ok(model)
}

/// One labeled evaluation sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledSample {
    pub text: String,
    pub label: String,
}

/// Per-slice binary metrics.
#[derive(Debug, Clone, Serialize)]
pub struct SliceMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Evaluation over held-out slices from distributions the training seed never
/// saw. Top-level precision/recall/f1 are pooled over all samples (so f1 is
/// exactly the harmonic mean of precision and recall); the unweighted mean of
/// slice F1s is available via [`EvalReport::macro_f1`].
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_slice: BTreeMap<String, SliceMetrics>,
    /// Slices skipped because they were empty.
    pub skipped_slices: Vec<String>,
}

impl EvalReport {
    /// Unweighted mean of per-slice F1 scores.
    pub fn macro_f1(&self) -> f64 {
        if self.per_slice.is_empty() {
            return 0.0;
        }
        self.per_slice.values().map(|m| m.f1).sum::<f64>() / self.per_slice.len() as f64
    }
}

fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Score the model against labeled slices keyed by slice name. Samples whose
/// label is neither `positive_label` nor anything else meaningful are treated
/// as negatives; empty slices are omitted with a warning.
pub fn evaluate_ood(
    model: &ClassifierModel,
    slices: &BTreeMap<String, Vec<LabeledSample>>,
    positive_label: &str,
) -> EvalReport {
    let mut per_slice = BTreeMap::new();
    let mut skipped = Vec::new();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (name, samples) in slices {
        if samples.is_empty() {
            log::warn!("evaluation slice {name:?} is empty; omitting");
            skipped.push(name.clone());
            continue;
        }
        let (mut stp, mut sfp, mut sfn) = (0u64, 0u64, 0u64);
        for s in samples {
            let predicted_positive = model.predict(&s.text).top().0 == positive_label;
            let actually_positive = s.label == positive_label;
            match (predicted_positive, actually_positive) {
                (true, true) => stp += 1,
                (true, false) => sfp += 1,
                (false, true) => sfn += 1,
                (false, false) => {}
            }
        }
        let (precision, recall, f1) = prf(stp, sfp, sfn);
        per_slice.insert(
            name.clone(),
            SliceMetrics {
                precision,
                recall,
                f1,
                support: samples.len(),
            },
        );
        tp += stp;
        fp += sfp;
        fn_ += sfn;
    }
    let (precision, recall, f1) = prf(tp, fp, fn_);
    EvalReport {
        precision,
        recall,
        f1,
        per_slice,
        skipped_slices: skipped,
    }
}
