mod common;

use common::toy::toy_pipeline as toy_config;
use revgen::error::Error;
use revgen::experiment::{Experiment, ExperimentConfig, Stage};

#[test]
fn prepare_reports_counts_for_three_records() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("three.jsonl");
    std::fs::write(
        &input,
        concat!(
            r#"{"reviewerID":"a","asin":"x","overall":5,"helpful":[1,2],"reviewText":"Fine."}"#, "\n",
            r#"{"reviewerID":"b","asin":"x","overall":2,"helpful":[0,0],"reviewText":"Meh."}"#, "\n",
            r#"{"reviewerID":"c","asin":"y","overall":4,"helpful":[3,3],"reviewText":"Good."}"#, "\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("run");
    let cfg = toy_config(&out, &[&format!("data.input=\"{}\"", input.display())]);
    let e = Experiment::new(cfg).unwrap();
    e.run(Stage::Prepare).unwrap();
    let manifest = std::fs::read_to_string(out.join("prepare/manifest.tsv")).unwrap();
    let get = |k: &str| {
        manifest
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k}\t")))
            .unwrap()
            .to_string()
    };
    assert!(manifest.starts_with("# config "));
    assert_eq!(get("lines"), "3");
    assert_eq!(get("dropped_votes"), "1");
    assert_eq!(get("dropped_occurrence"), "2");
    assert_eq!(get("retained"), "0");
}

#[test]
fn stages_need_their_inputs_and_skip_when_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let e = Experiment::new(toy_config(dir.path(), &[])).unwrap();
    match e.run(Stage::Train) {
        Err(Error::MissingArtifact { stage, .. }) => assert_eq!(stage, "prepare"),
        other => panic!("expected a missing-artifact error, got {other:?}"),
    }
    assert!(!e.run(Stage::Prepare).unwrap().skipped);
    assert!(e.run(Stage::Prepare).unwrap().skipped);
    assert!(dir.path().join("effective_config.toml").exists());

    let changed = Experiment::new(toy_config(dir.path(), &["seeds.corpus=5"])).unwrap();
    assert!(!changed.run(Stage::Prepare).unwrap().skipped);
}

#[test]
fn full_run_is_reproducible_and_guards_its_inputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ea = Experiment::new(toy_config(a.path(), &[])).unwrap();
    let eb = Experiment::new(toy_config(b.path(), &["workers=1"])).unwrap();
    ea.run_all().unwrap();
    eb.run_all().unwrap();
    let (ra, rb) = (ea.load_report().unwrap(), eb.load_report().unwrap());
    assert_eq!(ra.content_hash(), rb.content_hash());
    assert_eq!(ra.rows.len(), 5);
    assert!(ra.rows.iter().all(|r| r.config_hash == ra.config_hash));
    assert!(ra.models().all(|r| r.checkpoint_hash.is_some()));
    assert!(ea.run_all().unwrap().iter().all(|o| o.skipped));

    let metrics = std::fs::read_to_string(a.path().join("report/metrics.tsv")).unwrap();
    assert!(metrics.starts_with(&format!("# config {} corpus {}", ra.config_hash, ra.corpus_hash)));

    // A re-prepared corpus no longer matches the evaluation summaries.
    let path = a.path().join("prepare/corpus.json");
    let mut corpus: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    corpus["corpus_hash"] = "0000000000000000ffff".into();
    std::fs::write(&path, corpus.to_string()).unwrap();
    assert!(matches!(ea.report(), Err(Error::Mismatch(_))));
}

#[test]
fn report_without_models_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let e = Experiment::new(toy_config(dir.path(), &["models=[]"])).unwrap();
    for s in [Stage::Prepare, Stage::Train, Stage::Generate, Stage::EvalNlp, Stage::EvalRec] {
        e.run(s).unwrap();
    }
    assert!(matches!(e.run(Stage::Report), Err(Error::Usage(_))));
}

#[test]
fn output_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "[data.synthetic]\nusers = 6\n").unwrap();
    std::env::set_var(revgen::experiment::OUTPUT_DIR_ENV, dir.path().join("elsewhere"));
    let cfg = ExperimentConfig::load(&file, &[]).unwrap();
    std::env::remove_var(revgen::experiment::OUTPUT_DIR_ENV);
    assert_eq!(cfg.output_dir, dir.path().join("elsewhere"));
}
