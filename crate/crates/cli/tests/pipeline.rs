//! End-to-end pipeline contracts: byte-identical reruns under a fixed
//! seed, and stage-wise execution matching the monolithic run.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use saga_cli::artifacts;
use saga_cli::commands::{cmd_evaluate, cmd_factorize, cmd_groups, cmd_recommend};
use saga_cli::config::{Algorithm, ExperimentConfig, InputFormat};
use saga_cli::pipeline::{run_experiment, AlgoRun};
use saga_core::evaluation::GroupKind;

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "saga-pipeline-{tag}-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::SeqCst)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small planted dataset written as a csv input file.
fn synth_dataset(dir: &Path) -> PathBuf {
    let triples = saga_core::synthetic::planted_ratings(48, 60, 3, 24, 11);
    let mut out = String::new();
    for (u, i, r) in triples {
        out.push_str(&format!("{u},{i},{r}\n"));
    }
    let path = dir.join("ratings.csv");
    fs::write(&path, out).unwrap();
    path
}

fn small_config(input: PathBuf, out: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(input, InputFormat::Csv, out);
    cfg.min_ratings = 10;
    cfg.repetitions = 2;
    cfg.d = 6;
    cfg.max_iters = 12;
    cfg.gamma_grid = vec![0.5, 2.0];
    cfg.lambda_grid = vec![0.0, 0.5, 1.0];
    cfg.group_sizes = vec![2, 3];
    cfg.group_count = Some(4);
    cfg.k_list = vec![3, 5];
    cfg.seed = 99;
    cfg
}

#[test]
fn rerunning_with_the_same_seed_is_byte_identical() {
    let base = temp_dir("determinism");
    let input = synth_dataset(&base);

    let cfg_a = small_config(input.clone(), base.join("a"));
    let cfg_b = small_config(input, base.join("b"));
    run_experiment(&cfg_a).unwrap();
    run_experiment(&cfg_b).unwrap();

    for file in ["metrics.csv", "summary.csv"] {
        let a = fs::read(cfg_a.out.join(file)).unwrap();
        let b = fs::read(cfg_b.out.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // spot-check per-rep artifacts
    for rel in [
        "rep0/split.csv",
        "rep0/user_features.csv",
        "rep1/item_features.csv",
        "rep0/groups_random_2.csv",
        "rep1/recs_similar_3_saga-concave_p2.csv",
    ] {
        let a = fs::read(cfg_a.out.join(rel)).unwrap();
        let b = fs::read(cfg_b.out.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }

    fs::remove_dir_all(base).unwrap();
}

#[test]
fn different_seeds_change_the_outputs() {
    let base = temp_dir("seeds");
    let input = synth_dataset(&base);
    let cfg_a = small_config(input.clone(), base.join("a"));
    let mut cfg_b = small_config(input, base.join("b"));
    cfg_b.seed = 100;
    run_experiment(&cfg_a).unwrap();
    run_experiment(&cfg_b).unwrap();
    let a = fs::read(cfg_a.out.join("metrics.csv")).unwrap();
    let b = fs::read(cfg_b.out.join("metrics.csv")).unwrap();
    assert_ne!(a, b);
    fs::remove_dir_all(base).unwrap();
}

#[test]
fn stage_wise_execution_matches_the_monolithic_run() {
    let base = temp_dir("staging");
    let input = synth_dataset(&base);

    let cfg_run = small_config(input.clone(), base.join("mono"));
    let output = run_experiment(&cfg_run).unwrap();

    // replay rep 1 stage by stage into a fresh directory
    let cfg_stage = small_config(input, base.join("staged"));
    let rep = 1;
    cmd_factorize(&cfg_stage, rep).unwrap();
    for kind in [GroupKind::Random, GroupKind::Similar] {
        for size in [2, 3] {
            cmd_groups(&cfg_stage, rep, kind, size).unwrap();
        }
    }

    let runs = [
        AlgoRun {
            algo: Algorithm::SagaConcave,
            param: Some(2.0),
        },
        AlgoRun {
            algo: Algorithm::Am,
            param: None,
        },
        AlgoRun {
            algo: Algorithm::Fm,
            param: Some(0.5),
        },
    ];
    let kind = GroupKind::Random;
    let size = 3;
    for run in runs {
        cmd_recommend(&cfg_stage, rep, kind, size, run, cfg_stage.max_k()).unwrap();

        // the recommendations file must match the monolithic run's bytes
        let staged = artifacts::recs_path(&cfg_stage.out, rep, kind, size, run.algo, run.param);
        let mono = artifacts::recs_path(&cfg_run.out, rep, kind, size, run.algo, run.param);
        assert_eq!(
            fs::read(&staged).unwrap(),
            fs::read(&mono).unwrap(),
            "recommendations differ for {run:?}"
        );

        // and the evaluated rows must equal the monolithic metric rows
        let rows = cmd_evaluate(&cfg_stage, rep, kind, size, run, None).unwrap();
        for row in rows {
            let mono_row = output
                .rows
                .iter()
                .find(|r| {
                    r.repetition == row.repetition
                        && r.kind == row.kind
                        && r.size == row.size
                        && r.k == row.k
                        && r.algorithm == row.algorithm
                        && r.param == row.param
                })
                .expect("monolithic run has the matching cell");
            assert_eq!(row.dcg, mono_row.dcg, "dcg differs for {run:?} k={}", row.k);
            assert_eq!(row.psr, mono_row.psr, "psr differs for {run:?} k={}", row.k);
        }
    }

    // per-rep artifacts written by the stages match the monolithic ones
    for rel in [
        "split.csv",
        "user_features.csv",
        "item_features.csv",
        "groups_similar_2.csv",
    ] {
        let staged = fs::read(artifacts::rep_dir(&cfg_stage.out, rep).join(rel)).unwrap();
        let mono = fs::read(artifacts::rep_dir(&cfg_run.out, rep).join(rel)).unwrap();
        assert_eq!(staged, mono, "{rel} differs between staged and monolithic");
    }

    fs::remove_dir_all(base).unwrap();
}

#[test]
fn stages_demand_their_upstream_artifacts() {
    let base = temp_dir("missing");
    let cfg = small_config(base.join("none.csv"), base.join("out"));
    let err = cmd_groups(&cfg, 0, GroupKind::Random, 2).unwrap_err();
    assert!(
        err.to_string().contains("saga factorize"),
        "unexpected message: {err}"
    );
    let err = cmd_evaluate(
        &cfg,
        0,
        GroupKind::Random,
        2,
        AlgoRun {
            algo: Algorithm::Am,
            param: None,
        },
        None,
    )
    .unwrap_err();
    assert!(err.to_string().contains("first"), "unexpected message: {err}");
    fs::remove_dir_all(base).unwrap();
}

#[test]
fn config_echo_lands_next_to_every_output() {
    let base = temp_dir("echo");
    let input = synth_dataset(&base);
    let mut cfg = small_config(input, base.join("out"));
    cfg.repetitions = 1;
    cfg.group_sizes = vec![2];
    run_experiment(&cfg).unwrap();
    let echoed = fs::read_to_string(cfg.out.join("config_run.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&echoed).unwrap();
    assert_eq!(parsed["seed"], 99);
    assert_eq!(parsed["holdout_frac"], 0.30);
    assert_eq!(parsed["group_kinds"][0], "random");
    fs::remove_dir_all(base).unwrap();
}
