//! Release gate: one check per acceptance criterion, each printing a
//! PASS/FAIL line. Everything here is deterministic — fixed seeds, the
//! offline chat client, no network — and the whole suite stays well under
//! its ten-minute budget.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use mathcorpus::classifier::{
    evaluate_ood, train, LabeledSample, NormalizationRules, SeedCorpus, TrainSettings,
};
use mathcorpus::coderecall::{plan_mixture, threshold_filter, CodeSnippet};
use mathcorpus::decontam::{
    build_decontam_index, decontam_tokens, decontaminate, BenchmarkItem,
};
use mathcorpus::dedup::{
    collision_probability, lsh_cluster, minhash, shingle_hashes, signature_from_hashes,
    DedupEntry, LshConfig, MinHashSignature,
};
use mathcorpus::document::Document;
use mathcorpus::extract::{extract_text, ExtractionProfile};
use mathcorpus::mathhtml::optimize_math_html;
use mathcorpus::pipeline::run_pipeline;
use mathcorpus::synth::exec::{execute_verified, interpreter_available};
use mathcorpus::synth::safety::safety_filter;
use mathcorpus::synth::{ExecLimits, SafetyTables, ViolationCategory};
use mathcorpus::testkit::{
    math_paragraph, plant_config, plant_corpus, prose_paragraph, substitute_words,
    train_tiny_models, word_salad, MATH_WORDS, PROSE_WORDS,
};

type Check = fn() -> Result<String, String>;

#[test]
fn release_criteria() {
    let checks: [(&str, Check); 9] = [
        ("band-collision rate matches the analytic curve", check_lsh_analytic_agreement),
        ("minhash component agreement is an unbiased jaccard estimate", check_minhash_unbiasedness),
        ("near-duplicate recall and false-merge bounds hold", check_dedup_recall),
        ("contamination flags equal the brute-force n-gram oracle", check_decontam_oracle),
        ("math notation survives optimization and dies without it", check_math_preservation),
        ("classifier meets held-out f1 and normalization helps out-of-distribution", check_classifier_protocol),
        ("prohibited code is always rejected and the pass-set always executes", check_safety_and_execution),
        ("score thresholds match their oracle and the code cap holds", check_threshold_and_mixture),
        ("pipeline runs are byte-identical and account for every planted page", check_pipeline_determinism),
    ];

    let mut failures = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS - {name} [{detail}]", i + 1),
            Err(detail) => {
                println!("criterion {}: FAIL - {name} [{detail}]", i + 1);
                failures.push(i + 1);
            }
        }
    }
    assert!(
        failures.is_empty(),
        "acceptance criteria failed: {failures:?}"
    );
}

/// Distinct random 64-bit values standing in for shingle hashes.
fn fresh_hashes(rng: &mut StdRng, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.gen()).collect()
}

fn bands_collide(a: &MinHashSignature, b: &MinHashSignature, cfg: &LshConfig) -> bool {
    let rows = cfg.b as usize;
    (0..cfg.r as usize).any(|band| {
        let s = band * rows;
        a.values[s..s + rows] == b.values[s..s + rows]
    })
}

/// Criterion 1: over 10,000 controlled pairs (2,000 per similarity point),
/// the frequency of banded signature collisions under the default
/// 11-band x 10-row layout matches 1-(1-S^b)^r within +/-0.03, in under a
/// minute.
fn check_lsh_analytic_agreement() -> Result<String, String> {
    let start = Instant::now();
    let cfg = LshConfig::default();
    let mut rng = StdRng::seed_from_u64(0xACC1);
    // (similarity, shared elements, extra elements per side):
    // jaccard = shared / (shared + 2 * extra).
    let points = [
        (0.60, 60usize, 20usize),
        (0.70, 70, 15),
        (0.75, 60, 10),
        (0.80, 80, 10),
        (0.90, 90, 5),
    ];
    let pairs_per_point = 2_000;
    let mut worst: (f64, f64) = (0.0, 0.0); // (similarity, |error|)
    for (s, shared, extra) in points {
        let mut collisions = 0u32;
        for _ in 0..pairs_per_point {
            let common = fresh_hashes(&mut rng, shared);
            let mut a = common.clone();
            a.extend(fresh_hashes(&mut rng, extra));
            let mut b = common;
            b.extend(fresh_hashes(&mut rng, extra));
            let sig_a = signature_from_hashes(&a, &cfg);
            let sig_b = signature_from_hashes(&b, &cfg);
            if bands_collide(&sig_a, &sig_b, &cfg) {
                collisions += 1;
            }
        }
        let empirical = f64::from(collisions) / f64::from(pairs_per_point);
        let analytic = collision_probability(s, &cfg);
        let error = (empirical - analytic).abs();
        if error > worst.1 {
            worst = (s, error);
        }
        if error > 0.03 {
            return Err(format!(
                "at similarity {s}: empirical {empirical:.4} vs analytic {analytic:.4}"
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 60 {
        return Err(format!("took {elapsed:.1?}, budget is one minute"));
    }
    Ok(format!(
        "worst error {:.4} at similarity {}, {elapsed:.1?}",
        worst.1, worst.0
    ))
}

/// Criterion 2: across 1,000 random set pairs, mean component agreement of
/// 110-permutation signatures sits within +/-0.02 of the mean brute-force
/// Jaccard similarity.
fn check_minhash_unbiasedness() -> Result<String, String> {
    let cfg = LshConfig::default();
    let perms = cfg.permutations();
    let mut rng = StdRng::seed_from_u64(0xACC2);
    let mut sum_agreement = 0.0;
    let mut sum_jaccard = 0.0;
    let pairs = 1_000;
    for _ in 0..pairs {
        let n_a = rng.gen_range(50..150);
        let n_b = rng.gen_range(50..150);
        let shared = (rng.gen_range(0.0..1.0) * n_a.min(n_b) as f64) as usize;
        let common = fresh_hashes(&mut rng, shared);
        let mut a = common.clone();
        a.extend(fresh_hashes(&mut rng, n_a - shared));
        let mut b = common;
        b.extend(fresh_hashes(&mut rng, n_b - shared));

        let set_a: HashSet<u64> = a.iter().copied().collect();
        let set_b: HashSet<u64> = b.iter().copied().collect();
        let inter = set_a.intersection(&set_b).count();
        let union = set_a.len() + set_b.len() - inter;
        sum_jaccard += inter as f64 / union as f64;

        let sig_a = signature_from_hashes(&a, &cfg);
        let sig_b = signature_from_hashes(&b, &cfg);
        let agree = sig_a
            .values
            .iter()
            .zip(&sig_b.values)
            .filter(|(x, y)| x == y)
            .count();
        sum_agreement += agree as f64 / perms as f64;
    }
    let mean_agreement = sum_agreement / f64::from(pairs);
    let mean_jaccard = sum_jaccard / f64::from(pairs);
    let bias = mean_agreement - mean_jaccard;
    if bias.abs() > 0.02 {
        return Err(format!(
            "mean agreement {mean_agreement:.4} vs mean jaccard {mean_jaccard:.4}"
        ));
    }
    Ok(format!("bias {bias:+.4} over {pairs} pairs"))
}

fn jaccard_of_texts(x: &str, y: &str, cfg: &LshConfig) -> f64 {
    let a: HashSet<u64> = shingle_hashes(x, cfg).into_iter().collect();
    let b: HashSet<u64> = shingle_hashes(y, cfg).into_iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(&b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Criterion 3: 100 planted near-duplicate pairs (verified similarity >= 0.8
/// in 300-word documents) are co-clustered at a >= 95% rate, while 300
/// unrelated documents (verified pairwise similarity <= 0.3 against
/// everything) produce at most 1 false pair per 100 planted pairs.
fn check_dedup_recall() -> Result<String, String> {
    let cfg = LshConfig::default();
    let mut rng = StdRng::seed_from_u64(0xACC3);
    let pool: Vec<&str> = MATH_WORDS.iter().chain(PROSE_WORDS.iter()).copied().collect();

    let planted_pairs = 100usize;
    let mut texts: Vec<(u128, String)> = Vec::new();
    for i in 0..planted_pairs {
        let original = word_salad(&mut rng, &pool, 300);
        let near_dup = substitute_words(&original, 1 + (i % 4), &mut rng);
        texts.push((i as u128, original));
        texts.push((1_000 + i as u128, near_dup));
    }
    for j in 0..300u128 {
        texts.push((2_000 + j, word_salad(&mut rng, &pool, 300)));
    }

    // Premises: planted pairs really are >= 0.8, everything else <= 0.3.
    for i in 0..planted_pairs {
        let j = jaccard_of_texts(&texts[2 * i].1, &texts[2 * i + 1].1, &cfg);
        if j < 0.8 {
            return Err(format!("planted pair {i} has similarity {j:.3} < 0.8"));
        }
    }
    let is_planted = |a: u128, b: u128| a % 1_000 == b % 1_000 && a != b && a < 2_000 && b < 2_000;
    let mut max_unplanted = 0.0f64;
    for x in 0..texts.len() {
        for y in (x + 1)..texts.len() {
            if is_planted(texts[x].0, texts[y].0) {
                continue;
            }
            let j = jaccard_of_texts(&texts[x].1, &texts[y].1, &cfg);
            max_unplanted = max_unplanted.max(j);
        }
    }
    if max_unplanted > 0.3 {
        return Err(format!(
            "an unplanted pair reaches similarity {max_unplanted:.3} > 0.3"
        ));
    }

    let entries: Vec<DedupEntry> = texts
        .iter()
        .map(|(id, text)| DedupEntry {
            doc_id: *id,
            text_len: text.len() as u64,
            signature: minhash(text, &cfg),
        })
        .collect();
    let clusters = lsh_cluster(&entries, &cfg).map_err(|e| e.to_string())?;

    let mut recalled = 0usize;
    let mut false_pairs = 0usize;
    for cluster in &clusters {
        for x in 0..cluster.members.len() {
            for y in (x + 1)..cluster.members.len() {
                if is_planted(cluster.members[x], cluster.members[y]) {
                    recalled += 1;
                } else {
                    false_pairs += 1;
                }
            }
        }
    }
    if recalled < 95 {
        return Err(format!("only {recalled}/{planted_pairs} planted pairs co-clustered"));
    }
    if false_pairs > planted_pairs / 100 {
        return Err(format!("{false_pairs} false pairs exceed the 1% budget"));
    }
    Ok(format!(
        "recall {recalled}/{planted_pairs}, {false_pairs} false pairs, max unplanted similarity {max_unplanted:.3}"
    ))
}

fn benchmark_fixture(i: usize, rng: &mut StdRng) -> BenchmarkItem {
    use mathcorpus::testkit::NOISE_WORDS;
    BenchmarkItem {
        problem: format!(
            "benchmark item {i} asks {} about quantity {}",
            word_salad(rng, &NOISE_WORDS, 16),
            i * 7 + 3
        ),
        solution: format!(
            "the answer to item {i} equals {} because {}",
            i * i + 1,
            word_salad(rng, &NOISE_WORDS, 12)
        ),
    }
}

/// Insert `span` consecutive tokens of benchmark `item` into the middle of
/// `doc_text`.
fn plant_overlap(doc_text: &str, item: &BenchmarkItem, span: usize) -> String {
    let combined = format!("{} {}", item.problem, item.solution);
    let tokens = decontam_tokens(&combined);
    assert!(tokens.len() >= span, "benchmark shorter than planted span");
    let window = tokens[..span].join(" ");
    let mut words: Vec<&str> = doc_text.split_whitespace().collect();
    let mid = words.len() / 2;
    words.insert(mid, &window);
    words.join(" ")
}

/// Criterion 4: on 1,000 documents x 100 benchmark items, the contamination
/// flag equals a string-level brute-force 13-gram intersection for every
/// document; and on a corpus with one contaminated document in 10,000 the
/// removal fraction lands in [0.005%, 0.02%].
fn check_decontam_oracle() -> Result<String, String> {
    let ngram = 13usize;
    let mut rng = StdRng::seed_from_u64(0xACC4);
    let pool: Vec<&str> = MATH_WORDS.iter().chain(PROSE_WORDS.iter()).copied().collect();

    let benchmarks: Vec<BenchmarkItem> =
        (0..100).map(|i| benchmark_fixture(i, &mut rng)).collect();
    let index = build_decontam_index(&benchmarks, ngram);

    // Independent oracle: exact token windows, no hashing involved.
    let mut oracle_windows: HashSet<String> = HashSet::new();
    for item in &benchmarks {
        let tokens = decontam_tokens(&format!("{} {}", item.problem, item.solution));
        for window in tokens.windows(ngram) {
            oracle_windows.insert(window.join(" "));
        }
    }
    let oracle_flags = |text: &str| -> bool {
        let tokens = decontam_tokens(text);
        tokens
            .windows(ngram)
            .any(|w| oracle_windows.contains(&w.join(" ")))
    };

    let mut docs: Vec<Document> = Vec::new();
    for i in 0..1_000u128 {
        let mut text = word_salad(&mut rng, &pool, 80);
        if i < 20 {
            // Full 15-token benchmark run: must be flagged.
            text = plant_overlap(&text, &benchmarks[i as usize], 15);
        } else if i < 40 {
            // One token short of an n-gram: must not be flagged.
            text = plant_overlap(&text, &benchmarks[i as usize % 100], ngram - 1);
        }
        let mut doc = Document::new(i, format!("https://d.example/{i}"), "2024-46");
        doc.text = Some(text);
        docs.push(doc);
    }

    let mut planted_flagged = 0usize;
    let mut near_miss_flagged = 0usize;
    for (i, doc) in docs.iter().enumerate() {
        let (clean, _) = decontaminate(doc, &index);
        let flagged = !clean;
        let expected = oracle_flags(doc.text.as_deref().unwrap());
        if flagged != expected {
            return Err(format!(
                "document {i}: engine says {flagged}, oracle says {expected}"
            ));
        }
        if i < 20 && flagged {
            planted_flagged += 1;
        }
        if (20..40).contains(&i) && flagged {
            near_miss_flagged += 1;
        }
    }
    if planted_flagged != 20 || near_miss_flagged != 0 {
        return Err(format!(
            "plant accounting off: {planted_flagged}/20 full overlaps flagged, {near_miss_flagged} near-misses flagged"
        ));
    }

    // Removal-fraction corpus: exactly one contaminated document in 10,000.
    let mut removed = 0u32;
    for i in 0..10_000u32 {
        let mut text = word_salad(&mut rng, &pool, 40);
        if i == 4_321 {
            text = plant_overlap(&text, &benchmarks[7], 15);
        }
        if decontaminate_text(&text, &index) {
            removed += 1;
        }
    }
    let fraction = f64::from(removed) / 10_000.0;
    if !(0.000_05..=0.000_2).contains(&fraction) {
        return Err(format!("removal fraction {fraction:.6} outside [0.005%, 0.02%]"));
    }
    Ok(format!(
        "1,000/1,000 flags match the oracle; removal fraction {:.4}%",
        fraction * 100.0
    ))
}

fn decontaminate_text(text: &str, index: &mathcorpus::decontam::DecontamIndex) -> bool {
    let (clean, _) = mathcorpus::decontam::scan_text(text, index);
    !clean
}

fn load_fixtures() -> Vec<(String, String, String)> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mathhtml");
    let mut dirs: Vec<_> = std::fs::read_dir(&root)
        .expect("fixture directory exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|dir| {
            let name = dir.file_name().unwrap().to_string_lossy().into_owned();
            let input = std::fs::read_to_string(dir.join("input.html")).expect("input.html");
            let raw = std::fs::read_to_string(dir.join("expected.txt")).expect("expected.txt");
            let expected = raw.strip_suffix('\n').unwrap_or(&raw).to_string();
            (name, input, expected)
        })
        .collect()
}

fn is_math_token(token: &str) -> bool {
    token
        .chars()
        .any(|c| matches!(c, '\\' | '^' | '_' | '$' | '{' | '}'))
}

/// Criterion 5: across >= 20 fixture pages, every expected LaTeX token
/// survives optimization followed by quality extraction, and skipping the
/// optimization pass loses at least one math token from every fixture.
fn check_math_preservation() -> Result<String, String> {
    let fixtures = load_fixtures();
    if fixtures.len() < 20 {
        return Err(format!("only {} fixtures present", fixtures.len()));
    }
    let quality = ExtractionProfile::quality();
    let mut total_tokens = 0usize;
    for (name, input, expected) in &fixtures {
        let (optimized, _) = optimize_math_html(input);
        let preserved = extract_text(&optimized, &quality);
        let raw = extract_text(input, &quality);
        let math_tokens: Vec<&str> = expected
            .split_whitespace()
            .filter(|t| is_math_token(t))
            .collect();
        if math_tokens.is_empty() {
            return Err(format!("{name}: no math tokens to check"));
        }
        total_tokens += math_tokens.len();
        for token in &math_tokens {
            if !preserved.contains(token) {
                return Err(format!("{name}: {token:?} lost on the optimized path"));
            }
        }
        if !math_tokens.iter().any(|t| !raw.contains(*t)) {
            return Err(format!("{name}: raw extraction kept every math token"));
        }
    }
    Ok(format!(
        "{} fixtures, {total_tokens} math tokens preserved, all fixtures degrade unoptimized",
        fixtures.len()
    ))
}

fn shift_digits(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '1' => '7',
            '2' => '8',
            '3' => '9',
            '4' => '6',
            other => other,
        })
        .collect()
}

fn widen_letters(text: &str) -> String {
    // Fullwidth compatibility forms; NFKC folds them back to ASCII.
    text.chars()
        .map(|c| match c {
            'a' => 'ａ',
            'e' => 'ｅ',
            'o' => 'ｏ',
            other => other,
        })
        .collect()
}

fn title_case(text: &str) -> String {
    text.split_whitespace()
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Criterion 6: trained on one synthetic two-family corpus, the classifier
/// reaches held-out F1 >= 0.95 with normalization on, and its pooled F1 on
/// four out-of-distribution slices (case, digit, width, and title
/// variations) strictly exceeds the same protocol with normalization off.
fn check_classifier_protocol() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(0xACC6);
    let mut corpus = SeedCorpus::default();
    for _ in 0..300 {
        corpus
            .positives
            .push(mathcorpus::classifier::Sample::new(math_paragraph(&mut rng, 60)));
        corpus
            .negatives
            .push(mathcorpus::classifier::Sample::new(prose_paragraph(&mut rng, 60)));
    }
    let base = TrainSettings {
        dim: 32,
        hash_buckets: 1 << 16,
        word_ngrams: 2,
        lr: 0.3,
        epochs: 20,
        seed: 17,
        ..TrainSettings::default()
    };
    let norm_off = TrainSettings {
        norm: NormalizationRules {
            nfkc: false,
            lowercase: false,
            digits_to_zero: false,
            strip_control: false,
            collapse_whitespace: false,
        },
        ..base.clone()
    };
    let model_on = train(&corpus, &base).map_err(|e| e.to_string())?;
    let model_off = train(&corpus, &norm_off).map_err(|e| e.to_string())?;

    let mut held_out = Vec::new();
    for _ in 0..100 {
        held_out.push(LabeledSample {
            text: math_paragraph(&mut rng, 60),
            label: "math".into(),
        });
        held_out.push(LabeledSample {
            text: prose_paragraph(&mut rng, 60),
            label: "not_math".into(),
        });
    }
    let held_out_report = evaluate_ood(
        &model_on,
        &BTreeMap::from([("held_out".to_string(), held_out)]),
        "math",
    );
    if held_out_report.f1 < 0.95 {
        return Err(format!("held-out f1 {:.4} < 0.95", held_out_report.f1));
    }

    let transforms: [(&str, fn(&str) -> String); 4] = [
        ("papers", |t| t.to_uppercase()),
        ("qa_forum", shift_digits),
        ("encyclopedia", title_case),
        ("textbook", widen_letters),
    ];
    let mut slices: BTreeMap<String, Vec<LabeledSample>> = BTreeMap::new();
    for (slice, transform) in transforms {
        let mut samples = Vec::new();
        for _ in 0..20 {
            samples.push(LabeledSample {
                text: transform(&math_paragraph(&mut rng, 60)),
                label: "math".into(),
            });
            samples.push(LabeledSample {
                text: transform(&prose_paragraph(&mut rng, 60)),
                label: "not_math".into(),
            });
        }
        slices.insert(slice.to_string(), samples);
    }
    let ood_on = evaluate_ood(&model_on, &slices, "math");
    let ood_off = evaluate_ood(&model_off, &slices, "math");
    if ood_on.f1 <= ood_off.f1 {
        return Err(format!(
            "normalization did not help: on {:.4} vs off {:.4}",
            ood_on.f1, ood_off.f1
        ));
    }
    Ok(format!(
        "held-out f1 {:.3}; ood f1 {:.3} (norm on) > {:.3} (norm off)",
        held_out_report.f1, ood_on.f1, ood_off.f1
    ))
}

/// Every prohibited-API table entry, expanded into code the screen must
/// reject.
fn prohibited_snippets() -> Result<Vec<(ViolationCategory, String)>, String> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/prohibited");
    let files = [
        ("file_ops.txt", ViolationCategory::FileOps),
        ("concurrency.txt", ViolationCategory::Concurrency),
        ("network.txt", ViolationCategory::Network),
    ];
    let mut snippets = Vec::new();
    for (file, category) in files {
        let body = std::fs::read_to_string(data.join(file)).map_err(|e| format!("{file}: {e}"))?;
        for line in body.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (kind, name) = line
                .split_once(':')
                .ok_or_else(|| format!("{file}: malformed entry {line:?}"))?;
            match kind {
                "module" => {
                    snippets.push((category, format!("import {name}\n")));
                    snippets.push((category, format!("from {name} import helper\n")));
                    snippets.push((
                        category,
                        format!("import {name} as zz\nzz.helper()\n"),
                    ));
                }
                "call" => snippets.push((category, format!("{name}(\"payload\")\n"))),
                "method" => snippets.push((category, format!("value.{name}()\n"))),
                other => return Err(format!("{file}: unknown entry kind {other:?}")),
            }
        }
    }
    Ok(snippets)
}

/// Criterion 7: the static screen rejects every snippet derived from the
/// prohibited-API tables (zero false negatives, with the right category),
/// and a 200-snippet pass-set runs through the execution harness with a
/// 100% success rate.
fn check_safety_and_execution() -> Result<String, String> {
    let tables = SafetyTables::builtin();
    let prohibited = prohibited_snippets()?;
    for (category, code) in &prohibited {
        let verdict = safety_filter(code, tables);
        if verdict.allowed() {
            return Err(format!("false negative: {code:?} was allowed"));
        }
        if !verdict.has_category(*category) {
            return Err(format!(
                "{code:?} rejected, but not for {category:?}: {verdict}"
            ));
        }
    }

    let mut pass_set = Vec::new();
    for i in 0..200usize {
        let code = match i % 5 {
            0 => format!("print(sum(range({})))\n", 10 + i),
            1 => format!("x = {} * {}\nprint(x - {})\n", i + 2, i + 3, i),
            2 => format!("print([k * k for k in range({})])\n", 3 + i % 7),
            3 => format!("s = \"term{i}\"\nprint(len(s) + {i})\n"),
            _ => format!("total = 0\nfor k in range({}):\n    total += k\nprint(total)\n", 5 + i % 11),
        };
        pass_set.push(code);
    }
    for code in &pass_set {
        if !safety_filter(code, tables).allowed() {
            return Err(format!("pass-set snippet rejected by the screen: {code:?}"));
        }
    }

    let limits = ExecLimits::default();
    if !interpreter_available(&limits) {
        return Err(format!(
            "interpreter {} unavailable; cannot demonstrate the execution rate",
            limits.interpreter.display()
        ));
    }
    let failures: Vec<String> = pass_set
        .par_iter()
        .filter_map(|code| match execute_verified(code, tables, &limits) {
            Ok(outcome) if outcome.ok => None,
            Ok(outcome) => Some(format!(
                "{code:?}: {}",
                outcome.reason.unwrap_or_else(|| "failed".into())
            )),
            Err(e) => Some(format!("{code:?}: harness error {e}")),
        })
        .collect();
    if !failures.is_empty() {
        return Err(format!(
            "{}/200 executions failed; first: {}",
            failures.len(),
            failures[0]
        ));
    }
    Ok(format!(
        "{} prohibited snippets all rejected; 200/200 executions succeeded",
        prohibited.len()
    ))
}

/// Criterion 8: the score-threshold filter agrees with its brute-force
/// oracle on 10,000 random score pairs at the default (4,4) bars, and the
/// mixture planner never allocates code beyond the 0.2 cap across
/// randomized availability tables.
fn check_threshold_and_mixture() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(0xACC8);
    let mut snippets = Vec::new();
    let score = |rng: &mut StdRng| -> Option<u8> {
        if rng.gen_bool(0.1) {
            None
        } else {
            Some(rng.gen_range(0..=5))
        }
    };
    for i in 0..10_000u128 {
        let mut s = CodeSnippet::new(i, "Python", "pass", "code:web");
        s.s_edu = score(&mut rng);
        s.s_math = score(&mut rng);
        snippets.push(s);
    }
    let oracle_kept: HashSet<u128> = snippets
        .iter()
        .filter(|s| matches!((s.s_edu, s.s_math), (Some(e), Some(m)) if e >= 4 && m >= 4))
        .map(|s| s.snippet_id)
        .collect();
    let oracle_unscored: HashSet<u128> = snippets
        .iter()
        .filter(|s| s.s_edu.is_none() || s.s_math.is_none())
        .map(|s| s.snippet_id)
        .collect();
    let (kept, dropped) = threshold_filter(snippets, 4, 4);
    let kept_ids: HashSet<u128> = kept.iter().map(|s| s.snippet_id).collect();
    if kept_ids != oracle_kept {
        return Err(format!(
            "kept set disagrees with the oracle: {} vs {}",
            kept_ids.len(),
            oracle_kept.len()
        ));
    }
    if kept.len() + dropped.len() != 10_000 {
        return Err("filter lost or duplicated snippets".into());
    }
    for s in &dropped {
        if s.has_flag("unscored") != oracle_unscored.contains(&s.snippet_id) {
            return Err(format!("snippet {:x}: wrong unscored flag", s.snippet_id));
        }
    }

    let sources = ["web", "arxiv", "textbooks", "code", "code:web", "code/github"];
    let mut worst_fraction = 0.0f64;
    for _ in 0..200 {
        let mut table = BTreeMap::new();
        for source in sources {
            if rng.gen_bool(0.7) {
                table.insert(source.to_string(), rng.gen_range(0..1_000_000_000u64));
            }
        }
        table.entry("web".to_string()).or_insert(1); // planner requires a text source
        let plan = plan_mixture(&table, 0.2).map_err(|e| e.to_string())?;
        let code: u64 = plan
            .per_source_tokens
            .iter()
            .filter(|(k, _)| mathcorpus::coderecall::is_code_source(k))
            .map(|(_, v)| *v)
            .sum();
        let total: u64 = plan.per_source_tokens.values().sum();
        for (source, allocated) in &plan.per_source_tokens {
            if allocated > &table[source] {
                return Err(format!("{source}: allocated beyond availability"));
            }
        }
        if total > 0 {
            let fraction = code as f64 / total as f64;
            worst_fraction = worst_fraction.max(fraction);
            if fraction > 0.2 + 1e-9 {
                return Err(format!("code fraction {fraction:.4} exceeds the cap"));
            }
            if (plan.code_fraction - fraction).abs() > 1e-9 {
                return Err("reported code fraction disagrees with the allocation".into());
            }
        }
    }
    Ok(format!(
        "10,000 threshold decisions match; worst code share {worst_fraction:.4} <= 0.2"
    ))
}

/// Criterion 9: two fresh runs over the 50-page planted archive yield
/// byte-identical manifests, and the stage tallies equal the plant design.
fn check_pipeline_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plant = plant_corpus(dir.path(), 0xACC9, 10, 10, 20, 5, 5);
    let models = train_tiny_models(&dir.path().join("models"));
    let workdir = dir.path().join("work");
    let output = dir.path().join("out").join("corpus.jsonl");
    let config = plant_config(&plant, &models, &workdir, &output);

    let run = |label: &str| -> Result<(Vec<u8>, mathcorpus::pipeline::CorpusManifest), String> {
        if workdir.exists() {
            std::fs::remove_dir_all(&workdir).map_err(|e| e.to_string())?;
        }
        if output.exists() {
            std::fs::remove_file(&output).map_err(|e| e.to_string())?;
        }
        let manifest = run_pipeline(&config, false).map_err(|e| format!("{label}: {e}"))?;
        let bytes = std::fs::read(workdir.join("manifest.json")).map_err(|e| e.to_string())?;
        Ok((bytes, manifest))
    };
    let (bytes_a, manifest) = run("first run")?;
    let (bytes_b, _) = run("second run")?;
    if bytes_a != bytes_b {
        return Err("manifests differ between identical runs".into());
    }

    let count = |stage: &str| -> u64 {
        manifest
            .per_stage
            .get(stage)
            .map(|t| t.doc_count)
            .unwrap_or(u64::MAX)
    };
    let expected = [
        ("01_ingest", plant.expected_ingested() as u64),
        ("03_loose_classify", plant.expected_loose_kept() as u64),
        ("04_dedup", plant.expected_dedup_survivors() as u64),
        ("07_decontaminate", plant.expected_final() as u64),
        ("08_emit", plant.expected_final() as u64),
    ];
    for (stage, want) in expected {
        if count(stage) != want {
            return Err(format!("{stage}: {} documents, plant expects {want}", count(stage)));
        }
    }
    if manifest.dedup.removed != 10 || manifest.dedup.survivors != 15 {
        return Err(format!(
            "dedup summary {{survivors {}, removed {}}} does not match the plant",
            manifest.dedup.survivors, manifest.dedup.removed
        ));
    }
    Ok(format!(
        "byte-identical manifests; 45 ingested -> 25 kept -> 15 unique -> 10 final"
    ))
}
