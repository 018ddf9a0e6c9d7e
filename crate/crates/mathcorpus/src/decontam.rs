//! Benchmark decontamination by exact n-gram fingerprint matching.
//!
//! Benchmark problems and solutions are concatenated, tokenized, and every
//! consecutive `ngram_size`-token window (default 13) is fingerprinted into
//! a set. A document is contaminated iff one of its own windows hits the
//! set. Matching is exact at the token level; normalization makes it
//! insensitive to case, digits, punctuation, and whitespace.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{normalize_text, NormalizationRules};
use crate::document::Document;
use crate::hash::hash_tokens;
use crate::jsonl::{read_jsonl, JsonlError};

pub const DEFAULT_NGRAM_SIZE: usize = 13;

/// One benchmark sample, as stored in the benchmark JSONL input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub problem: String,
    pub solution: String,
}

/// Immutable fingerprint set built from benchmark samples; lookups are
/// freely concurrent.
#[derive(Debug, Clone)]
pub struct DecontamIndex {
    ngram_size: usize,
    hashes: HashSet<u64>,
    /// Benchmark samples indexed.
    source_count: usize,
    /// Samples shorter than `ngram_size` tokens; recorded as whole-sample
    /// fingerprints and tallied separately.
    short_samples: usize,
}

impl DecontamIndex {
    pub fn ngram_size(&self) -> usize {
        self.ngram_size
    }

    /// Distinct fingerprints in the index.
    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn short_samples(&self) -> usize {
        self.short_samples
    }

    pub fn contains(&self, fingerprint: u64) -> bool {
        self.hashes.contains(&fingerprint)
    }
}

/// Normalize then split on non-alphanumeric runs. This is the shared
/// tokenizer for benchmark samples and documents, so the match semantics
/// are symmetric.
pub fn decontam_tokens(text: &str) -> Vec<String> {
    normalize_text(text, &NormalizationRules::default())
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Build the fingerprint index: each sample contributes every consecutive
/// `ngram_size`-token window of its concatenated problem + solution text.
/// Samples too short for a full window contribute one whole-sample
/// fingerprint instead and are tallied in `short_samples`.
pub fn build_decontam_index(benchmarks: &[BenchmarkItem], ngram_size: usize) -> DecontamIndex {
    assert!(ngram_size >= 1, "ngram_size must be at least 1");
    let mut hashes = HashSet::new();
    let mut short_samples = 0;
    for item in benchmarks {
        let text = format!("{} {}", item.problem, item.solution);
        let tokens = decontam_tokens(&text);
        if tokens.is_empty() {
            short_samples += 1;
            continue;
        }
        if tokens.len() < ngram_size {
            hashes.insert(hash_tokens(&tokens));
            short_samples += 1;
        } else {
            for window in tokens.windows(ngram_size) {
                hashes.insert(hash_tokens(window));
            }
        }
    }
    DecontamIndex {
        ngram_size,
        hashes,
        source_count: benchmarks.len(),
        short_samples,
    }
}

/// Load benchmark samples from a `{problem, solution}` JSON Lines file.
pub fn load_benchmarks(path: &Path) -> Result<Vec<BenchmarkItem>, JsonlError> {
    read_jsonl(path)
}

/// Contamination check over raw text: `(clean, hit_count)` where
/// `hit_count` is the number of document windows found in the index.
pub fn scan_text(text: &str, index: &DecontamIndex) -> (bool, u64) {
    let tokens = decontam_tokens(text);
    if tokens.len() < index.ngram_size {
        return (true, 0);
    }
    let hits = tokens
        .windows(index.ngram_size)
        .filter(|w| index.contains(hash_tokens(w)))
        .count() as u64;
    (hits == 0, hits)
}

/// Contamination check for a pipeline document (uses `doc.text`).
pub fn decontaminate(doc: &Document, index: &DecontamIndex) -> (bool, u64) {
    scan_text(doc.text.as_deref().unwrap_or(""), index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(problem: &str, solution: &str) -> BenchmarkItem {
        BenchmarkItem {
            problem: problem.into(),
            solution: solution.into(),
        }
    }

    /// Thirteen distinct tokens.
    const THIRTEEN: &str = "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu";

    #[test]
    fn single_window_sample_yields_one_fingerprint() {
        let index = build_decontam_index(&[item(THIRTEEN, "")], 13);
        assert_eq!(index.len(), 1);
        assert_eq!(index.source_count(), 1);
        assert_eq!(index.short_samples(), 0);
    }

    #[test]
    fn twenty_token_sample_yields_eight_fingerprints() {
        let twenty = "one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen sixteen seventeen eighteen nineteen twenty";
        let index = build_decontam_index(&[item(twenty, "")], 13);
        assert_eq!(index.len(), 8); // 20 − 13 + 1
    }

    #[test]
    fn empty_benchmark_list_builds_empty_index() {
        let index = build_decontam_index(&[], 13);
        assert!(index.is_empty());
        assert_eq!(index.source_count(), 0);
    }

    #[test]
    fn problem_and_solution_are_concatenated_before_windowing() {
        // 7 + 6 = 13 tokens: only the concatenation reaches a full window.
        let index = build_decontam_index(
            &[item(
                "alpha beta gamma delta epsilon zeta eta",
                "theta iota kappa lambda mu nu",
            )],
            13,
        );
        assert_eq!(index.len(), 1);
        let (clean, hits) = scan_text(&format!("intro words {THIRTEEN} trailing words"), &index);
        assert!(!clean);
        assert_eq!(hits, 1);
    }

    #[test]
    fn short_samples_are_fingerprinted_whole_and_tallied() {
        let index = build_decontam_index(&[item("what is two plus two", "four")], 13);
        assert_eq!(index.short_samples(), 1);
        assert_eq!(index.len(), 1);
        // A 13-token window can only hit a short-sample fingerprint by hash
        // accident, so embedding the short sample does not flag.
        let (clean, _) = scan_text("what is two plus two four and then some more words here to pad", &index);
        assert!(clean);
    }

    #[test]
    fn verbatim_thirteen_token_span_flags_but_twelve_does_not() {
        let index = build_decontam_index(&[item(THIRTEEN, "")], 13);
        let doc = format!("some prose before {THIRTEEN} and some after");
        let (clean, hits) = scan_text(&doc, &index);
        assert!(!clean);
        assert_eq!(hits, 1);

        // Same span with one token changed: longest shared run is 12.
        let twelve = THIRTEEN.replace(" nu", " xi");
        let (clean, hits) = scan_text(&format!("some prose before {twelve} and after"), &index);
        assert!(clean, "12-token overlap must not flag");
        assert_eq!(hits, 0);
    }

    #[test]
    fn matching_ignores_case_digits_punctuation_and_whitespace() {
        let index = build_decontam_index(
            &[item(
                "If x = 12, what is the value of 3x + 4? Show all work.",
                "The answer is 40.",
            )],
            13,
        );
        let doc = "if X   = 99 , what IS the value of 3X+7 ?? show ALL work: the ANSWER is 55";
        let (clean, _) = scan_text(doc, &index);
        assert!(!clean, "normalized token stream must match");
    }

    #[test]
    fn flag_set_matches_brute_force_oracle() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        let vocab: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let sentence = |len: usize, rng: &mut StdRng| -> String {
            (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let benchmarks: Vec<BenchmarkItem> = (0..20)
            .map(|_| {
                let n = rng.gen_range(13..30);
                item(&sentence(n, &mut rng), "")
            })
            .collect();
        let index = build_decontam_index(&benchmarks, 13);

        // Brute-force oracle: set intersection over literal token windows.
        let mut oracle: HashSet<Vec<String>> = HashSet::new();
        for b in &benchmarks {
            let toks = decontam_tokens(&format!("{} {}", b.problem, b.solution));
            for w in toks.windows(13) {
                oracle.insert(w.to_vec());
            }
        }
        for i in 0..200 {
            let mut text = sentence(rng.gen_range(5..60), &mut rng);
            if i % 7 == 0 {
                // Plant a verbatim benchmark prefix in some documents.
                let b = &benchmarks[rng.gen_range(0..benchmarks.len())];
                text = format!("{text} {}", b.problem);
            }
            let toks = decontam_tokens(&text);
            let expected_hits = if toks.len() < 13 {
                0
            } else {
                toks.windows(13).filter(|w| oracle.contains(*w)).count() as u64
            };
            let (clean, hits) = scan_text(&text, &index);
            assert_eq!(hits, expected_hits, "doc {i}");
            assert_eq!(clean, hits == 0);
        }
    }
}
