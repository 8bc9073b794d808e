//! Stage-wise entry points behind the CLI subcommands. Each stage reads
//! the artifacts earlier stages wrote under the output directory, does its
//! part with exactly the code [`crate::pipeline::run_experiment`] uses,
//! and writes its own artifacts, so pipelines can be resumed or re-run
//! piecemeal.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Result};
use rayon::prelude::*;

use saga_core::evaluation::{GroupKind, TestRelevance};
use saga_core::model::ItemId;

use crate::artifacts::{
    self, groups_path, item_features_path, recs_path, split_path, user_features_path, MetricRow,
};
use crate::config::ExperimentConfig;
use crate::pipeline::{
    cell_metrics, precompute_group, prepare, rec_rows, recommend_group, rep_factorize, rep_groups,
    rep_split, AlgoRun,
};

pub fn cmd_factorize(cfg: &ExperimentConfig, rep: usize) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    artifacts::save_json(&cfg.out.join("config_factorize.json"), cfg)?;

    let prepared = prepare(cfg)?;
    if prepared.malformed > 0 {
        println!("skipped {} malformed lines", prepared.malformed);
    }
    println!(
        "dataset: {} users x {} items, {} ratings after min-ratings filter",
        prepared.ratings.n_users(),
        prepared.ratings.n_items(),
        prepared.ratings.n_entries()
    );

    let split = rep_split(&prepared.ratings, cfg, rep)?;
    artifacts::save_split(&split_path(&cfg.out, rep), &split)?;

    let (user_f, item_f, trace) = rep_factorize(&split, cfg, rep)?;
    artifacts::save_features(&user_features_path(&cfg.out, rep), &user_f)?;
    artifacts::save_features(&item_features_path(&cfg.out, rep), &item_f)?;
    println!(
        "factorized rep {rep}: d={}, objective {} -> {} in {} alternations",
        cfg.d,
        trace.first().unwrap(),
        trace.last().unwrap(),
        trace.len() - 1
    );
    Ok(())
}

pub fn cmd_groups(cfg: &ExperimentConfig, rep: usize, kind: GroupKind, size: usize) -> Result<()> {
    artifacts::save_json(&cfg.out.join("config_groups.json"), cfg)?;
    let split = artifacts::load_split(&split_path(&cfg.out, rep))?;
    let user_f = artifacts::load_features(&user_features_path(&cfg.out, rep))?;
    let batch = rep_groups(&split, &user_f, cfg, rep, kind, size)?;
    if batch.failures > 0 {
        println!(
            "warning: {} group slots abandoned after {} draws each",
            batch.failures, cfg.retry_budget
        );
    }
    artifacts::save_groups(&groups_path(&cfg.out, rep, kind, size), &batch.groups)?;
    println!(
        "formed {} {} groups of size {size} for rep {rep}",
        batch.groups.len(),
        kind.as_str()
    );
    Ok(())
}

pub fn cmd_recommend(
    cfg: &ExperimentConfig,
    rep: usize,
    kind: GroupKind,
    size: usize,
    run: AlgoRun,
    k: usize,
) -> Result<()> {
    artifacts::save_json(&cfg.out.join("config_recommend.json"), cfg)?;
    let split = artifacts::load_split(&split_path(&cfg.out, rep))?;
    let user_f = artifacts::load_features(&user_features_path(&cfg.out, rep))?;
    let item_f = artifacts::load_features(&item_features_path(&cfg.out, rep))?;
    let groups = artifacts::load_groups(&groups_path(&cfg.out, rep, kind, size), &split)?;
    if groups.is_empty() {
        return Err(anyhow!("groups file is empty; nothing to recommend"));
    }

    let recs: Vec<Vec<(ItemId, f64)>> = groups
        .par_iter()
        .map(|group| {
            let gc = precompute_group(group, &user_f, &item_f)?;
            recommend_group(&gc, group, run, k, item_f.rows())
        })
        .collect::<Result<_>>()?;

    let path = recs_path(&cfg.out, rep, kind, size, run.algo, run.param);
    artifacts::save_recs(&path, &rec_rows(&recs))?;
    println!(
        "recommended top-{k} for {} groups with {} -> {}",
        groups.len(),
        run.algo,
        path.display()
    );
    Ok(())
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    rep: usize,
    kind: GroupKind,
    size: usize,
    run: AlgoRun,
    metrics_out: Option<PathBuf>,
) -> Result<Vec<MetricRow>> {
    artifacts::save_json(&cfg.out.join("config_evaluate.json"), cfg)?;
    let split = artifacts::load_split(&split_path(&cfg.out, rep))?;
    let groups = artifacts::load_groups(&groups_path(&cfg.out, rep, kind, size), &split)?;
    let rec_file = recs_path(&cfg.out, rep, kind, size, run.algo, run.param);
    let flat = artifacts::load_recs(&rec_file)?;

    let mut recs: Vec<Vec<(ItemId, f64)>> = vec![Vec::new(); groups.len()];
    for row in flat {
        if row.group_id >= groups.len() {
            return Err(anyhow!(
                "recommendation row for group {} but only {} groups on file",
                row.group_id,
                groups.len()
            ));
        }
        recs[row.group_id].push((row.item, row.gain));
    }

    let test = TestRelevance::new(&split, cfg.relevance_threshold);
    let rows: Vec<MetricRow> = cfg
        .k_list
        .iter()
        .map(|&k| {
            let (dcg, psr) = cell_metrics(&groups, &recs, &test, k, cfg);
            MetricRow {
                repetition: rep,
                kind,
                size,
                k,
                algorithm: run.algo,
                param: run.param,
                dcg,
                psr,
            }
        })
        .collect();

    let out = metrics_out.unwrap_or_else(|| {
        let suffix = run
            .param
            .map(|p| format!("_p{p}"))
            .unwrap_or_default();
        artifacts::rep_dir(&cfg.out, rep).join(format!(
            "metrics_{}_{}_{}{}.csv",
            kind.as_str(),
            size,
            run.algo.as_str(),
            suffix
        ))
    });
    artifacts::save_metrics(&out, &rows)?;
    for row in &rows {
        println!("{}", artifacts::metric_line(row));
    }
    Ok(rows)
}
