//! Near-duplicate detection: MinHash signatures, banded locality-sensitive
//! hashing, the analytic collision model, and a brute-force parameter
//! solver for the band/row trade-off.
//!
//! The collision model: a pair with Jaccard similarity `S` lands in the same
//! bucket of at least one band with probability `P = 1 − (1 − S^b)^r`, for
//! `r` bands of `b` rows each. The solver ranks all `(r, b)` factorizations
//! of a permutation budget by how sharply that curve transitions at the
//! target threshold `t`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{normalize_text, NormalizationRules};
use crate::document::u128_hex_vec;
use crate::hash::{combine, hash_tokens, mix64, FNV_OFFSET};
use crate::unionfind::UnionFind;

/// Banding parameters. `r` bands of `b` rows each; `r·b` permutations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshConfig {
    /// Number of bands (buckets).
    pub r: u32,
    /// Rows (hash functions) per band.
    pub b: u32,
    /// Target Jaccard threshold the banding is tuned for.
    pub t: f64,
    /// Word-shingle width.
    pub shingle_size: usize,
    pub seed: u64,
}

impl Default for LshConfig {
    /// The pipeline default: 11 bands × 10 rows (110 permutations) tuned
    /// for a 0.75 Jaccard threshold, word 5-gram shingles.
    fn default() -> Self {
        LshConfig {
            r: 11,
            b: 10,
            t: 0.75,
            shingle_size: 5,
            seed: 42,
        }
    }
}

impl LshConfig {
    pub fn permutations(&self) -> usize {
        (self.r as usize) * (self.b as usize)
    }

    pub fn validate(&self) -> Result<(), DedupError> {
        if self.r == 0 || self.b == 0 {
            return Err(DedupError::BadConfig("r and b must be positive".into()));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(DedupError::BadConfig("t must be in (0,1)".into()));
        }
        if self.shingle_size == 0 {
            return Err(DedupError::BadConfig("shingle_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-document MinHash sketch: one minimum per permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    /// Document had fewer tokens than the shingle width; `values` is all
    /// sentinel maxima and the document never enters banding.
    pub too_short: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("signature/config mismatch: expected {expected} components, found {found}")]
    SignatureMismatch { expected: usize, found: usize },
    #[error("empty permutation range")]
    EmptyRange,
    #[error("bad LSH config: {0}")]
    BadConfig(String),
}

/// Analytic probability that a pair with Jaccard similarity `s` collides in
/// at least one band: `1 − (1 − s^b)^r`.
pub fn collision_probability(s: f64, cfg: &LshConfig) -> f64 {
    1.0 - (1.0 - s.powi(cfg.b as i32)).powi(cfg.r as i32)
}

/// Seeded hash family: component `i` applies an independent mix to every
/// shingle fingerprint.
#[inline]
fn permuted(shingle: u64, component_seed: u64) -> u64 {
    mix64(shingle ^ component_seed)
}

/// MinHash over pre-fingerprinted shingles. Public so collision statistics
/// can be driven with exactly controlled shingle sets.
pub fn signature_from_hashes(shingles: &[u64], cfg: &LshConfig) -> MinHashSignature {
    let perms = cfg.permutations();
    if shingles.is_empty() {
        return MinHashSignature {
            values: vec![u64::MAX; perms],
            too_short: true,
        };
    }
    let values = (0..perms)
        .map(|i| {
            let component_seed = mix64(cfg.seed.wrapping_add(i as u64));
            shingles
                .iter()
                .map(|&s| permuted(s, component_seed))
                .min()
                .expect("non-empty shingles")
        })
        .collect();
    MinHashSignature {
        values,
        too_short: false,
    }
}

/// Fingerprint the word shingles of `text` after classifier normalization.
pub fn shingle_hashes(text: &str, cfg: &LshConfig) -> Vec<u64> {
    let normalized = normalize_text(text, &NormalizationRules::default());
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    if tokens.len() < cfg.shingle_size {
        return Vec::new();
    }
    tokens
        .windows(cfg.shingle_size)
        .map(|w| hash_tokens(w))
        .collect()
}

/// Sketch a document's text: word shingles over normalized text, one
/// minimum per seeded permutation. Texts with fewer tokens than the shingle
/// width get a sentinel signature flagged `too_short`.
pub fn minhash(text: &str, cfg: &LshConfig) -> MinHashSignature {
    signature_from_hashes(&shingle_hashes(text, cfg), cfg)
}

/// Clustering input: identity, a length for survivor selection, the sketch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupEntry {
    #[serde(with = "crate::document::u128_hex")]
    pub doc_id: u128,
    /// Character length of the document text; the longest member survives.
    pub text_len: u64,
    pub signature: MinHashSignature,
}

/// One near-duplicate cluster; `members` always includes the survivor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: u64,
    #[serde(with = "crate::document::u128_hex")]
    pub survivor: u128,
    #[serde(with = "u128_hex_vec")]
    pub members: Vec<u128>,
}

/// Banded LSH clustering. Two documents are candidate-linked iff some band
/// of `b` consecutive components hashes identically; the result is the
/// transitive closure, returned as a full partition (singletons included),
/// ordered by each cluster's smallest member id.
///
/// Survivor rule: longest `text_len`, ties to the smallest `doc_id`.
/// Sentinel (`too_short`) signatures never enter banding — their documents
/// come back as singletons rather than one giant false cluster.
pub fn lsh_cluster(entries: &[DedupEntry], cfg: &LshConfig) -> Result<Vec<Cluster>, DedupError> {
    cfg.validate()?;
    let perms = cfg.permutations();
    for entry in entries {
        if entry.signature.values.len() != perms {
            return Err(DedupError::SignatureMismatch {
                expected: perms,
                found: entry.signature.values.len(),
            });
        }
    }

    let b = cfg.b as usize;
    // Each band owns its own bucket table, so bands parallelize freely.
    let candidate_links: Vec<(usize, usize)> = (0..cfg.r as usize)
        .into_par_iter()
        .flat_map_iter(|band| {
            let mut buckets: HashMap<u64, usize> = HashMap::new();
            let mut links = Vec::new();
            for (idx, entry) in entries.iter().enumerate() {
                if entry.signature.too_short {
                    continue;
                }
                let slice = &entry.signature.values[band * b..(band + 1) * b];
                let key = slice.iter().fold(FNV_OFFSET, |acc, &v| combine(acc, v));
                match buckets.entry(key) {
                    std::collections::hash_map::Entry::Occupied(first) => {
                        links.push((*first.get(), idx));
                    }
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(idx);
                    }
                }
            }
            links
        })
        .collect();

    let mut uf = UnionFind::new(entries.len());
    for (a, c) in candidate_links {
        uf.union(a, c);
    }

    let mut clusters: Vec<Cluster> = uf
        .sets()
        .into_iter()
        .map(|set| {
            let survivor = set
                .iter()
                .map(|&i| &entries[i])
                .fold(None::<&DedupEntry>, |best, e| match best {
                    None => Some(e),
                    Some(cur) => {
                        let better = e.text_len > cur.text_len
                            || (e.text_len == cur.text_len && e.doc_id < cur.doc_id);
                        Some(if better { e } else { cur })
                    }
                })
                .expect("sets are non-empty")
                .doc_id;
            let mut members: Vec<u128> = set.iter().map(|&i| entries[i].doc_id).collect();
            members.sort_unstable();
            Cluster {
                cluster_id: 0, // assigned after ordering
                survivor,
                members,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.members[0]);
    for (i, cluster) in clusters.iter_mut().enumerate() {
        cluster.cluster_id = i as u64;
    }
    Ok(clusters)
}

/// Ranking objective for [`solve_lsh_params`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[non_exhaustive]
pub enum SolverObjective {
    /// Minimize `∫₀ᵗ P(S) dS − ∫ₜ¹ P(S) dS`: penalize collision mass below
    /// the threshold, reward it above — the sharpest S-curve at `t`.
    #[default]
    SharpestTransition,
}

/// Composite Simpson integration over an even number of panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: u32) -> f64 {
    debug_assert!(panels % 2 == 0);
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Enumerate every `(r, b)` with `r·b` inside `perm_range` (inclusive) and
/// rank by the objective, best first. Ties order by `(r, b)` so the ranking
/// is fully deterministic. Returned configs carry `t` and default shingle
/// and seed settings; scores come back alongside for inspection.
pub fn solve_lsh_params(
    t: f64,
    perm_range: (u32, u32),
    objective: SolverObjective,
) -> Result<Vec<(LshConfig, f64)>, DedupError> {
    let (lo, hi) = perm_range;
    if lo == 0 || hi < lo {
        return Err(DedupError::EmptyRange);
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(DedupError::BadConfig("t must be in (0,1)".into()));
    }
    let mut ranked = Vec::new();
    for n in lo..=hi {
        for r in 1..=n {
            if n % r != 0 {
                continue;
            }
            let cfg = LshConfig {
                r,
                b: n / r,
                t,
                ..LshConfig::default()
            };
            let score = match objective {
                SolverObjective::SharpestTransition => {
                    let p = |s: f64| collision_probability(s, &cfg);
                    simpson(p, 0.0, t, 4096) - simpson(p, t, 1.0, 4096)
                }
            };
            ranked.push((cfg, score));
        }
    }
    ranked.sort_by(|(ca, sa), (cb, sb)| {
        sa.partial_cmp(sb)
            .expect("scores are finite")
            .then(ca.r.cmp(&cb.r))
            .then(ca.b.cmp(&cb.b))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn collision_probability_hits_endpoints_and_reference_values() {
        let cfg = LshConfig::default();
        assert_eq!(collision_probability(0.0, &cfg), 0.0);
        assert_eq!(collision_probability(1.0, &cfg), 1.0);
        // Reference values computed independently with arbitrary-precision
        // arithmetic for (r=11, b=10).
        for (s, expected) in [
            (0.6, 0.0645379462),
            (0.7, 0.2703539929),
            (0.75, 0.4714268599),
            (0.8, 0.7133421214),
            (0.9, 0.9910515050),
        ] {
            let got = collision_probability(s, &cfg);
            assert!(
                (got - expected).abs() < 1e-6,
                "P({s}) = {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn collision_probability_is_monotone_in_similarity() {
        let cfg = LshConfig::default();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let p = collision_probability(s, &cfg);
            assert!(p >= prev - 1e-15, "not monotone at S={s}");
            prev = p;
        }
    }

    #[test]
    fn identical_texts_get_identical_signatures() {
        let cfg = LshConfig::default();
        let text = "the quick brown fox jumps over the lazy dog near the river bank";
        assert_eq!(minhash(text, &cfg), minhash(text, &cfg));
        assert_eq!(minhash(text, &cfg).values.len(), 110);
    }

    #[test]
    fn normalization_folds_case_digits_and_whitespace_into_one_signature() {
        let cfg = LshConfig::default();
        let a = minhash("The Sum of 123 and 456 equals 579 as every student knows", &cfg);
        let b = minhash("the  sum of 999 and 000 equals 111 as every student knows", &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn short_text_gets_sentinel_signature_with_flag() {
        let cfg = LshConfig::default();
        let sig = minhash("only four tokens here", &cfg); // 4 < shingle 5
        assert!(sig.too_short);
        assert!(sig.values.iter().all(|&v| v == u64::MAX));
        assert!(!minhash("exactly five tokens sit here", &cfg).too_short);
    }

    #[test]
    fn disjoint_shingle_sets_agree_nowhere() {
        let cfg = LshConfig::default();
        let a: Vec<u64> = (0..200u64).map(|i| mix64(i)).collect();
        let b: Vec<u64> = (1000..1200u64).map(|i| mix64(i)).collect();
        let sa = signature_from_hashes(&a, &cfg);
        let sb = signature_from_hashes(&b, &cfg);
        let agree = sa
            .values
            .iter()
            .zip(&sb.values)
            .filter(|(x, y)| x == y)
            .count();
        assert_eq!(agree, 0);
    }

    #[test]
    fn per_component_agreement_estimates_jaccard() {
        // Sanity-sized unbiasedness check; the full-precision version runs
        // in the acceptance suite.
        let cfg = LshConfig::default();
        let mut rng = StdRng::seed_from_u64(7);
        let mut total_err = 0.0;
        let pairs = 300;
        for _ in 0..pairs {
            let shared = rng.gen_range(20..80usize);
            let only_a = rng.gen_range(5..40usize);
            let only_b = rng.gen_range(5..40usize);
            let mut next = || -> u64 { rng.gen() };
            let common: Vec<u64> = (0..shared).map(|_| next()).collect();
            let mut a = common.clone();
            a.extend((0..only_a).map(|_| next()));
            let mut b = common;
            b.extend((0..only_b).map(|_| next()));
            let jaccard = shared as f64 / (shared + only_a + only_b) as f64;
            let sa = signature_from_hashes(&a, &cfg);
            let sb = signature_from_hashes(&b, &cfg);
            let agree = sa
                .values
                .iter()
                .zip(&sb.values)
                .filter(|(x, y)| x == y)
                .count() as f64
                / sa.values.len() as f64;
            total_err += agree - jaccard;
        }
        let mean_err = total_err / pairs as f64;
        assert!(
            mean_err.abs() < 0.03,
            "mean agreement error {mean_err} exceeds tolerance"
        );
    }

    fn entry(doc_id: u128, text_len: u64, text: &str, cfg: &LshConfig) -> DedupEntry {
        DedupEntry {
            doc_id,
            text_len,
            signature: minhash(text, cfg),
        }
    }

    #[test]
    fn exact_duplicates_cluster_and_longest_text_survives() {
        let cfg = LshConfig::default();
        let text = "integration by parts transfers the derivative from one factor to the other";
        let entries = vec![
            entry(3, 75, text, &cfg),
            entry(1, 80, text, &cfg),
            entry(2, 80, text, &cfg),
            entry(9, 40, "a completely different sentence about gardening and the joy of tomatoes", &cfg),
        ];
        let clusters = lsh_cluster(&entries, &cfg).unwrap();
        assert_eq!(clusters.len(), 2);
        let dup = clusters.iter().find(|c| c.members.len() == 3).unwrap();
        assert_eq!(dup.members, vec![1, 2, 3]);
        // Longest text wins; the 80/80 tie breaks to the smaller id.
        assert_eq!(dup.survivor, 1);
        let single = clusters.iter().find(|c| c.members.len() == 1).unwrap();
        assert_eq!(single.members, vec![9]);
        assert_eq!(single.survivor, 9);
    }

    #[test]
    fn output_is_a_partition_and_ids_are_sequential() {
        let cfg = LshConfig::default();
        let mut entries = Vec::new();
        for i in 0..30u128 {
            let text = format!(
                "document number {i} talks about topic {} in moderate depth with several words",
                i % 7
            );
            entries.push(entry(i, text.len() as u64, &text, &cfg));
        }
        let clusters = lsh_cluster(&entries, &cfg).unwrap();
        let mut seen: Vec<u128> = clusters.iter().flat_map(|c| c.members.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>(), "disjoint and exhaustive");
        for (i, c) in clusters.iter().enumerate() {
            assert_eq!(c.cluster_id, i as u64);
            assert!(c.members.contains(&c.survivor));
        }
    }

    #[test]
    fn too_short_documents_do_not_glom_into_one_cluster() {
        let cfg = LshConfig::default();
        let entries = vec![
            entry(1, 3, "one two", &cfg),
            entry(2, 3, "red blue", &cfg),
            entry(3, 3, "up down", &cfg),
        ];
        let clusters = lsh_cluster(&entries, &cfg).unwrap();
        assert_eq!(clusters.len(), 3, "sentinel signatures must not collide");
    }

    #[test]
    fn mixed_config_signatures_are_rejected() {
        let cfg = LshConfig::default();
        let other = LshConfig {
            r: 10,
            b: 11,
            ..LshConfig::default()
        };
        let text = "a sentence long enough to shingle into a proper signature for testing";
        let entries = vec![entry(1, 10, text, &cfg), entry(2, 10, text, &other)];
        // Same length (110) — passes the length check and clusters fine.
        assert!(lsh_cluster(&entries, &cfg).is_ok());
        let short = LshConfig {
            r: 8,
            b: 8,
            ..LshConfig::default()
        };
        let entries = vec![entry(1, 10, text, &cfg), entry(2, 10, text, &short)];
        match lsh_cluster(&entries, &cfg) {
            Err(DedupError::SignatureMismatch { expected, found }) => {
                assert_eq!((expected, found), (110, 64));
            }
            other => panic!("expected mismatch error, got {other:?}"),
        }
    }

    #[test]
    fn cluster_report_roundtrips_as_jsonl() {
        let c = Cluster {
            cluster_id: 5,
            survivor: 0xabcdef,
            members: vec![0xabcdef, 0xfedcba],
        };
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"00000000000000000000000000abcdef\""));
        let back: Cluster = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn solver_reproduces_reference_ranking_for_the_default_budget() {
        let ranked =
            solve_lsh_params(0.75, (110, 128), SolverObjective::SharpestTransition).unwrap();
        assert_eq!(ranked.len(), 115);
        let order: Vec<(u32, u32)> = ranked.iter().map(|(c, _)| (c.r, c.b)).collect();
        // Reference ranking and scores computed independently by numeric
        // integration of the collision model.
        assert_eq!(&order[..5], &[(11, 11), (12, 10), (11, 10), (10, 11), (10, 12)]);
        for (pair, expected) in [
            ((11, 11), -0.183192),
            ((12, 10), -0.182375),
            ((11, 10), -0.181826),
        ] {
            let (_, score) = ranked[order.iter().position(|p| *p == pair).unwrap()];
            assert!(
                (score - expected).abs() < 1e-5,
                "score for {pair:?} = {score}, expected {expected}"
            );
        }
        assert_eq!(order.iter().position(|p| *p == (14, 8)), Some(10));
        assert_eq!(order.iter().position(|p| *p == (1, 110)), Some(52));
        assert_eq!(order.iter().position(|p| *p == (110, 1)), Some(96));
    }

    #[test]
    fn solver_enumerates_exact_factorizations_for_a_single_budget() {
        let ranked =
            solve_lsh_params(0.75, (110, 110), SolverObjective::SharpestTransition).unwrap();
        let mut pairs: Vec<(u32, u32)> = ranked.iter().map(|(c, _)| (c.r, c.b)).collect();
        pairs.sort_unstable();
        assert_eq!(
            pairs,
            vec![
                (1, 110),
                (2, 55),
                (5, 22),
                (10, 11),
                (11, 10),
                (22, 5),
                (55, 2),
                (110, 1)
            ]
        );
        // A banded config beats the degenerate single-band curve.
        let rank_of = |r, b| {
            ranked
                .iter()
                .position(|(c, _)| c.r == r && c.b == b)
                .unwrap()
        };
        assert!(rank_of(11, 10) < rank_of(1, 110));
    }

    #[test]
    fn solver_rejects_empty_ranges_and_bad_thresholds() {
        assert!(matches!(
            solve_lsh_params(0.75, (0, 10), SolverObjective::SharpestTransition),
            Err(DedupError::EmptyRange)
        ));
        assert!(matches!(
            solve_lsh_params(0.75, (20, 10), SolverObjective::SharpestTransition),
            Err(DedupError::EmptyRange)
        ));
        assert!(matches!(
            solve_lsh_params(1.0, (110, 128), SolverObjective::SharpestTransition),
            Err(DedupError::BadConfig(_))
        ));
    }
}
