//! End-to-end pipeline orchestration: planted-corpus accounting, manifest
//! determinism, resume equivalence at every split point, and stage-failure
//! recovery.

use std::fs;
use std::path::Path;

use mathcorpus::document::Stage;
use mathcorpus::jsonl::read_jsonl;
use mathcorpus::pipeline::{
    run_pipeline, CorpusManifest, PipelineConfig, PipelineError, PipelineStage,
};
use mathcorpus::testkit::{plant_config, plant_corpus, train_tiny_models, PlantedCorpus};

/// Plant the standard 50-record corpus and train fixture models in `dir`.
fn standard_setup(dir: &Path) -> (PlantedCorpus, PipelineConfig) {
    let plant = plant_corpus(dir, 0xC0FFEE, 10, 10, 20, 5, 5);
    let models = train_tiny_models(&dir.join("models"));
    let config = plant_config(
        &plant,
        &models,
        &dir.join("work"),
        &dir.join("corpus.jsonl"),
    );
    (plant, config)
}

fn manifest_bytes(workdir: &Path) -> Vec<u8> {
    fs::read(workdir.join("manifest.json")).expect("manifest.json present")
}

#[test]
fn full_run_accounts_for_every_planted_document() {
    let dir = tempfile::tempdir().unwrap();
    let (plant, config) = standard_setup(dir.path());

    let manifest = run_pipeline(&config, false).expect("pipeline completes");

    let count = |key: &str| manifest.per_stage[key].doc_count;
    assert_eq!(count("01_ingest"), plant.expected_ingested() as u64);
    assert_eq!(
        manifest.per_stage["01_ingest"].flags.get("url_blocked"),
        Some(&(plant.blocked_pages as u64))
    );
    assert_eq!(count("02_fast_extract"), plant.expected_ingested() as u64);
    assert_eq!(count("03_loose_classify"), plant.expected_loose_kept() as u64);
    assert_eq!(
        manifest.per_stage["03_loose_classify"].flags.get("math_below_loose"),
        Some(&(plant.non_math_pages as u64))
    );
    assert_eq!(count("04_dedup"), plant.expected_dedup_survivors() as u64);
    assert_eq!(manifest.dedup.clusters, plant.near_dup_pages as u64);
    assert_eq!(manifest.dedup.survivors, plant.expected_dedup_survivors() as u64);
    assert_eq!(manifest.dedup.removed, plant.near_dup_pages as u64);
    assert_eq!(count("05_quality_extract"), plant.expected_dedup_survivors() as u64);
    assert_eq!(count("06_strict_classify"), plant.expected_dedup_survivors() as u64);
    assert_eq!(count("07_decontaminate"), plant.expected_final() as u64);
    assert_eq!(
        manifest.per_stage["07_decontaminate"].flags.get("contaminated"),
        Some(&(plant.contaminated_pages as u64))
    );
    assert_eq!(count("08_emit"), plant.expected_final() as u64);

    let expected_fraction =
        plant.contaminated_pages as f64 / plant.expected_dedup_survivors() as f64;
    assert!((manifest.decontam_removed_fraction - expected_fraction).abs() < 1e-12);
    assert!(manifest.counts_monotone(), "doc counts never increase");
    assert_eq!(manifest.tokenizer, "whitespace");
    assert_eq!(manifest.config_hash, config.config_hash());

    // The emitted corpus holds exactly the final documents, fully advanced,
    // with extracted text and no retained HTML.
    let docs: Vec<mathcorpus::document::Document> =
        read_jsonl(&config.paths.output).expect("final corpus readable");
    assert_eq!(docs.len(), plant.expected_final());
    for doc in &docs {
        assert_eq!(doc.stage, Stage::Final);
        assert!(doc.text.as_deref().is_some_and(|t| !t.is_empty()));
        assert!(doc.html_optimized.is_none(), "stage-2 extraction drops stored HTML");
        assert!(doc.math_score.unwrap() >= config.thresholds.stage2);
    }
    // Token accounting matches a brute-force recount of the final store.
    let recount: u64 = docs
        .iter()
        .map(|d| d.text.as_deref().unwrap().split_whitespace().count() as u64)
        .sum();
    assert_eq!(manifest.per_stage["08_emit"].token_count, recount);
}

#[test]
fn rerun_with_identical_config_reproduces_manifest_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (_plant, config) = standard_setup(dir.path());

    run_pipeline(&config, false).expect("first run");
    let first = manifest_bytes(&config.paths.workdir);

    fs::remove_dir_all(&config.paths.workdir).unwrap();
    run_pipeline(&config, false).expect("second run");
    let second = manifest_bytes(&config.paths.workdir);

    assert_eq!(first, second, "identical config and input reproduce the manifest byte for byte");
}

#[test]
fn resume_equivalence_at_every_split_point() {
    let dir = tempfile::tempdir().unwrap();
    let (_plant, config) = standard_setup(dir.path());

    run_pipeline(&config, false).expect("reference run");
    let reference = manifest_bytes(&config.paths.workdir);

    let all_names: Vec<String> = PipelineStage::ALL.iter().map(|s| s.name().to_string()).collect();
    for split in 1..all_names.len() {
        fs::remove_dir_all(&config.paths.workdir).unwrap();

        let mut prefix = config.clone();
        prefix.run.stages = all_names[..split].to_vec();
        run_pipeline(&prefix, false).unwrap_or_else(|e| panic!("prefix run to {split} failed: {e}"));

        let resumed = run_pipeline(&config, true)
            .unwrap_or_else(|e| panic!("resume after {split} failed: {e}"));
        assert!(resumed.counts_monotone());
        assert_eq!(
            manifest_bytes(&config.paths.workdir),
            reference,
            "split after stage {split} diverged from the straight-through run"
        );
    }
}

#[test]
fn corrupt_model_halts_at_stage_boundary_and_resumes_after_repair() {
    let dir = tempfile::tempdir().unwrap();
    let (_plant, config) = standard_setup(dir.path());

    // Reference manifest from an untampered run in a separate work tree.
    let mut reference_config = config.clone();
    reference_config.paths.workdir = dir.path().join("work_ref");
    reference_config.paths.output = dir.path().join("corpus_ref.jsonl");
    run_pipeline(&reference_config, false).expect("reference run");

    // Sabotage the strict-stage model: present (passes validation) but
    // unloadable, so the failure surfaces at the stage boundary.
    let stage2_path = config.paths.stage2_model.clone().unwrap();
    let good_bytes = fs::read(&stage2_path).unwrap();
    fs::write(&stage2_path, b"not a model").unwrap();

    let err = run_pipeline(&config, false).expect_err("corrupt model must halt the run");
    match &err {
        PipelineError::Stage { stage, .. } => assert_eq!(*stage, "strict_classify"),
        other => panic!("expected stage failure, got {other}"),
    }

    // Completed stages are on disk with a partial manifest for inspection.
    let partial: CorpusManifest = serde_json::from_slice(
        &fs::read(config.paths.workdir.join("manifest.partial.json")).expect("partial manifest"),
    )
    .expect("partial manifest parses");
    assert!(partial.per_stage.contains_key("05_quality_extract"));
    assert!(!partial.per_stage.contains_key("06_strict_classify"));

    // Repair and resume: completed stages are reused, the rest run, and the
    // outcome matches an untampered run of the same shape.
    fs::write(&stage2_path, good_bytes).unwrap();
    let resumed = run_pipeline(&config, true).expect("resume after repair");
    let reference = run_pipeline(&reference_config, true).expect("reference reread");
    assert_eq!(resumed.per_stage, reference.per_stage);
    assert_eq!(resumed.dedup, reference.dedup);
}

#[test]
fn empty_input_completes_with_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let models = train_tiny_models(&dir.path().join("models"));
    let input = dir.path().join("input");
    fs::create_dir_all(&input).unwrap();

    let mut config = PipelineConfig::default();
    config.paths.input = input;
    config.paths.workdir = dir.path().join("work");
    config.paths.output = dir.path().join("corpus.jsonl");
    config.paths.langid_model = Some(models.langid);
    config.paths.stage1_model = Some(models.stage1);
    config.paths.stage2_model = Some(models.stage2);

    let manifest = run_pipeline(&config, false).expect("empty input is a successful run");
    assert_eq!(manifest.per_stage.len(), 8);
    for (key, tally) in &manifest.per_stage {
        assert_eq!(tally.doc_count, 0, "{key} doc count");
        assert_eq!(tally.token_count, 0, "{key} token count");
    }
    assert_eq!(manifest.dedup.survivors, 0);
    assert_eq!(manifest.decontam_removed_fraction, 0.0);
    let docs: Vec<mathcorpus::document::Document> =
        read_jsonl(&config.paths.output).expect("empty corpus file exists");
    assert!(docs.is_empty());
}

#[test]
fn running_a_later_stage_without_its_input_store_is_a_stage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_plant, mut config) = standard_setup(dir.path());
    config.run.stages = vec!["dedup".into()];

    match run_pipeline(&config, false) {
        Err(PipelineError::Stage { stage, message }) => {
            assert_eq!(stage, "dedup");
            assert!(message.contains("loose_classify"), "{message}");
        }
        other => panic!("expected missing-store stage error, got {other:?}"),
    }
}
