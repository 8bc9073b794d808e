//! Experiment orchestration.
//!
//! The monolithic [`run_experiment`] and the stage-wise CLI subcommands
//! share these functions, so a pipeline resumed from saved artifacts
//! produces exactly the same outputs as a single run. Every randomized
//! stage derives its seed from the master seed plus fixed counters
//! (stage tag, repetition, group kind/size), which keeps stages
//! independently reproducible.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use saga_core::affinity::{member_weights, DistanceBlock, UserAffinity};
use saga_core::baselines::{self, PredictedScores};
use saga_core::consensus::{GscoreState, SaturationSpec};
use saga_core::evaluation::{
    group_dcg, holdout_split, make_groups, psr, GroupBatch, GroupKind, GroupSpec, TestRelevance,
};
use saga_core::factorization::{factorize, FactorizationConfig};
use saga_core::model::{filter_min_ratings, FeatureMatrix, Group, ItemId, RatingsMatrix};
use saga_core::optimizer::saga;
use saga_core::seed::{derive_seed, stage};

use crate::artifacts::{self, MetricRow, RecRow};
use crate::config::{Algorithm, ExperimentConfig};
use crate::ingest::{ingest, Ingested};

pub fn kind_code(kind: GroupKind) -> u64 {
    match kind {
        GroupKind::Random => 0,
        GroupKind::Similar => 1,
    }
}

pub fn split_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    derive_seed(cfg.seed, &[stage::SPLIT, rep as u64])
}

pub fn factorize_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    derive_seed(cfg.seed, &[stage::FACTORIZE, rep as u64])
}

pub fn groups_seed(cfg: &ExperimentConfig, rep: usize, kind: GroupKind, size: usize) -> u64 {
    derive_seed(
        cfg.seed,
        &[stage::GROUPS, rep as u64, kind_code(kind), size as u64],
    )
}

/// Ingested and min-ratings-filtered dataset, with the id tables remapped
/// to the filtered user space.
pub struct Prepared {
    pub ratings: RatingsMatrix,
    pub user_externals: Vec<u64>,
    pub item_externals: Vec<u64>,
    pub malformed: usize,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let Ingested {
        ratings,
        users,
        items,
        malformed,
    } = ingest(&cfg.input, cfg.format)?;
    let (filtered, remap) = filter_min_ratings(&ratings, cfg.min_ratings);
    if filtered.n_train() == 0 {
        return Err(anyhow!(
            "no users survive the min-ratings filter ({})",
            cfg.min_ratings
        ));
    }
    let user_externals = remap
        .kept
        .iter()
        .map(|&old| users.external(old.0).expect("kept user was interned"))
        .collect();
    Ok(Prepared {
        ratings: filtered,
        user_externals,
        item_externals: items.externals().to_vec(),
        malformed,
    })
}

pub fn rep_split(filtered: &RatingsMatrix, cfg: &ExperimentConfig, rep: usize) -> Result<RatingsMatrix> {
    holdout_split(filtered, cfg.holdout_frac, split_seed(cfg, rep)).map_err(Into::into)
}

pub fn rep_factorize(
    split: &RatingsMatrix,
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<f64>)> {
    let fc = FactorizationConfig {
        d: cfg.d,
        reg: cfg.reg,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        seed: factorize_seed(cfg, rep),
    };
    factorize(split, &fc).map_err(Into::into)
}

pub fn rep_groups(
    split: &RatingsMatrix,
    user_features: &FeatureMatrix,
    cfg: &ExperimentConfig,
    rep: usize,
    kind: GroupKind,
    size: usize,
) -> Result<GroupBatch> {
    let spec = GroupSpec {
        kind,
        size,
        count: cfg.group_count_for(kind, size),
        sim_threshold: cfg.sim_threshold,
        seed: groups_seed(cfg, rep, kind, size),
        retry_budget: cfg.retry_budget,
    };
    make_groups(&spec, Some(user_features), split).map_err(Into::into)
}

/// One algorithm instantiation: the algorithm plus its swept parameter
/// (gamma for the consensus variants, lambda for fm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoRun {
    pub algo: Algorithm,
    pub param: Option<f64>,
}

/// Expand the configured algorithms over their parameter grids.
pub fn algo_runs(cfg: &ExperimentConfig) -> Vec<AlgoRun> {
    let mut runs = Vec::new();
    for &algo in &cfg.algorithms {
        match algo {
            Algorithm::SagaLinear | Algorithm::SagaConcave => {
                runs.extend(cfg.gamma_grid.iter().map(|&g| AlgoRun {
                    algo,
                    param: Some(g),
                }));
            }
            Algorithm::Fm => {
                runs.extend(cfg.lambda_grid.iter().map(|&l| AlgoRun {
                    algo,
                    param: Some(l),
                }));
            }
            _ => runs.push(AlgoRun { algo, param: None }),
        }
    }
    runs
}

/// Per-group precomputation shared by every algorithm run: consensus
/// weights, the observed-items distance block, the candidate set and the
/// predicted scores for the baselines.
pub struct GroupCompute {
    pub weights: Vec<f64>,
    pub block: DistanceBlock,
    pub candidates: Vec<ItemId>,
    pub scores: PredictedScores,
}

pub fn precompute_group(
    group: &Group,
    user_features: &FeatureMatrix,
    item_features: &FeatureMatrix,
) -> Result<GroupCompute> {
    let n_items = item_features.rows();
    let weights = member_weights(group, &UserAffinity::Cosine(user_features));
    let union = group.observed_union();
    let mut observed = vec![false; n_items];
    for &i in &union {
        observed[i.0] = true;
    }
    let candidates: Vec<ItemId> = (0..n_items)
        .filter(|&j| !observed[j])
        .map(ItemId)
        .collect();
    if candidates.is_empty() {
        return Err(anyhow!("group has observed every item; nothing to recommend"));
    }
    let block = DistanceBlock::new(item_features, &union);
    let scores = PredictedScores::from_features(user_features, item_features, group, candidates.clone())?;
    Ok(GroupCompute {
        weights,
        block,
        candidates,
        scores,
    })
}

/// Ordered recommendation (item, score-or-gain) of length at most `k` for
/// one group under one algorithm run.
pub fn recommend_group(
    gc: &GroupCompute,
    group: &Group,
    run: AlgoRun,
    k: usize,
    n_items: usize,
) -> Result<Vec<(ItemId, f64)>> {
    match run.algo {
        Algorithm::SagaLinear | Algorithm::SagaConcave => {
            let gamma = run
                .param
                .with_context(|| format!("{} needs a gamma value", run.algo))?;
            let sat = if run.algo == Algorithm::SagaLinear {
                SaturationSpec::linear()
            } else {
                SaturationSpec::concave()
            };
            let mut state =
                GscoreState::from_distance_block(group, gc.weights.clone(), &gc.block, gamma, n_items)?;
            let res = saga(&mut state, &sat, k)?;
            Ok(res.selected.into_iter().zip(res.gains).collect())
        }
        Algorithm::Am => baselines::average_misery(&gc.scores, k).map_err(Into::into),
        Algorithm::Fm => {
            let lambda = run
                .param
                .with_context(|| format!("{} needs a lambda value", run.algo))?;
            baselines::fm(&gc.scores, k, lambda).map_err(Into::into)
        }
        Algorithm::LeastMisery => baselines::least_misery(&gc.scores, k).map_err(Into::into),
        Algorithm::MostPleasure => baselines::most_pleasure(&gc.scores, k).map_err(Into::into),
        Algorithm::Plurality => baselines::plurality(&gc.scores, k).map_err(Into::into),
    }
}

/// DCG and PSR for one cell at list length `k`: metrics go member-average
/// -> group-average; groups whose PSR is undefined are left out of the
/// PSR mean.
pub fn cell_metrics(
    groups: &[Group],
    recs: &[Vec<(ItemId, f64)>],
    test: &TestRelevance,
    k: usize,
    cfg: &ExperimentConfig,
) -> (Option<f64>, Option<f64>) {
    let mut dcg_sum = 0.0;
    let mut psr_sum = 0.0;
    let mut psr_n = 0usize;
    for (group, rec) in groups.iter().zip(recs) {
        let items: Vec<ItemId> = rec.iter().take(k).map(|&(i, _)| i).collect();
        dcg_sum += group_dcg(group, &items, test, cfg.dcg_log_base);
        if let Some(p) = psr(group, &items, test, cfg.beta) {
            psr_sum += p;
            psr_n += 1;
        }
    }
    let dcg = (!groups.is_empty()).then(|| dcg_sum / groups.len() as f64);
    let psr = (psr_n > 0).then(|| psr_sum / psr_n as f64);
    (dcg, psr)
}

/// Best swept parameter per metric, aggregated over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: GroupKind,
    pub size: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    pub metric: &'static str,
    pub param: Option<f64>,
    pub value: f64,
}

/// Mean of a metric over the repetitions of one (cell, param) slice.
fn mean_over_reps(rows: &[&MetricRow], metric: &str) -> Option<f64> {
    let values: Vec<f64> = rows
        .iter()
        .filter_map(|r| if metric == "dcg" { r.dcg } else { r.psr })
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Reduce the per-repetition rows to, per cell and algorithm, the best
/// parameter value for each metric.
pub fn summarize(rows: &[MetricRow], cfg: &ExperimentConfig) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &kind in &cfg.group_kinds {
        for &size in &cfg.group_sizes {
            for &k in &cfg.k_list {
                for &algo in &cfg.algorithms {
                    let cell: Vec<&MetricRow> = rows
                        .iter()
                        .filter(|r| {
                            r.kind == kind && r.size == size && r.k == k && r.algorithm == algo
                        })
                        .collect();
                    if cell.is_empty() {
                        continue;
                    }
                    let mut params: Vec<Option<f64>> =
                        cell.iter().map(|r| r.param).collect();
                    params.sort_by(|a, b| {
                        a.unwrap_or(f64::NEG_INFINITY)
                            .total_cmp(&b.unwrap_or(f64::NEG_INFINITY))
                    });
                    params.dedup();
                    for metric in ["dcg", "psr"] {
                        let mut best: Option<(Option<f64>, f64)> = None;
                        for &param in &params {
                            let slice: Vec<&MetricRow> = cell
                                .iter()
                                .filter(|r| r.param == param)
                                .copied()
                                .collect();
                            if let Some(mean) = mean_over_reps(&slice, metric) {
                                match best {
                                    Some((_, v)) if mean <= v => {}
                                    _ => best = Some((param, mean)),
                                }
                            }
                        }
                        if let Some((param, value)) = best {
                            out.push(SummaryRow {
                                kind,
                                size,
                                k,
                                algorithm: algo,
                                metric,
                                param,
                                value,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn save_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::from("group_kind,group_size,k,algorithm,metric,param,value\n");
    for r in rows {
        let param = r.param.map(|p| format!("{p}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.kind.as_str(),
            r.size,
            r.k,
            r.algorithm.as_str(),
            r.metric,
            param,
            r.value
        ));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn save_id_map(path: &Path, externals: &[u64]) -> Result<()> {
    let mut out = String::from("internal,external\n");
    for (i, e) in externals.iter().enumerate() {
        out.push_str(&format!("{i},{e}\n"));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Everything [`run_experiment`] produces besides the files on disk.
pub struct ExperimentOutput {
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
    pub malformed: usize,
    pub group_failures: usize,
    /// Repetitions dropped after an error, with their causes.
    pub aborted: Vec<(usize, String)>,
}

/// Recommendation rows for one cell's groups in rank order.
pub fn rec_rows(recs: &[Vec<(ItemId, f64)>]) -> Vec<RecRow> {
    let mut rows = Vec::new();
    for (gid, rec) in recs.iter().enumerate() {
        for (rank0, &(item, gain)) in rec.iter().enumerate() {
            rows.push(RecRow {
                group_id: gid,
                rank: rank0 + 1,
                item,
                gain,
            });
        }
    }
    rows
}

fn run_repetition(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    runs: &[AlgoRun],
    rep: usize,
    rows: &mut Vec<MetricRow>,
    group_failures: &mut usize,
) -> Result<()> {
    let k_max = cfg.max_k();
    let split = rep_split(&prepared.ratings, cfg, rep)?;
    artifacts::save_split(&artifacts::split_path(&cfg.out, rep), &split)?;

    let (user_f, item_f, _trace) = rep_factorize(&split, cfg, rep)?;
    artifacts::save_features(&artifacts::user_features_path(&cfg.out, rep), &user_f)?;
    artifacts::save_features(&artifacts::item_features_path(&cfg.out, rep), &item_f)?;

    let test = TestRelevance::new(&split, cfg.relevance_threshold);

    for &kind in &cfg.group_kinds {
        for &size in &cfg.group_sizes {
            let batch = rep_groups(&split, &user_f, cfg, rep, kind, size)?;
            *group_failures += batch.failures;
            artifacts::save_groups(
                &artifacts::groups_path(&cfg.out, rep, kind, size),
                &batch.groups,
            )?;
            if batch.groups.is_empty() {
                continue;
            }

            // one pass per group computes its distance block once and
            // reuses it for every algorithm run
            let per_group: Vec<Vec<Vec<(ItemId, f64)>>> = batch
                .groups
                .par_iter()
                .map(|group| {
                    let gc = precompute_group(group, &user_f, &item_f)?;
                    runs.iter()
                        .map(|&run| recommend_group(&gc, group, run, k_max, item_f.rows()))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;

            for (run_idx, &run) in runs.iter().enumerate() {
                let recs: Vec<Vec<(ItemId, f64)>> = per_group
                    .iter()
                    .map(|by_run| by_run[run_idx].clone())
                    .collect();
                artifacts::save_recs(
                    &artifacts::recs_path(&cfg.out, rep, kind, size, run.algo, run.param),
                    &rec_rows(&recs),
                )?;
                for &k in &cfg.k_list {
                    let (dcg, psr) = cell_metrics(&batch.groups, &recs, &test, k, cfg);
                    rows.push(MetricRow {
                        repetition: rep,
                        kind,
                        size,
                        k,
                        algorithm: run.algo,
                        param: run.param,
                        dcg,
                        psr,
                    });
                }
            }
        }
    }
    Ok(())
}

/// The full protocol: filter, then per repetition holdout, factorize,
/// form groups, recommend under every algorithm run, and score; finally
/// pick the best parameter per algorithm and metric. All artifacts land
/// under `cfg.out`; the returned rows mirror `metrics.csv`. A repetition
/// that fails is logged and dropped, its rows withheld, and the partial
/// output is flagged in `aborted_partial.txt` next to the metrics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate().map_err(|e| anyhow!(e))?;
    fs::create_dir_all(&cfg.out)?;
    artifacts::save_json(&cfg.out.join("config_run.json"), cfg)?;

    let prepared = prepare(cfg)?;
    save_id_map(&cfg.out.join("users_map.csv"), &prepared.user_externals)?;
    save_id_map(&cfg.out.join("items_map.csv"), &prepared.item_externals)?;

    let runs = algo_runs(cfg);
    let mut rows = Vec::new();
    let mut group_failures = 0usize;
    let mut aborted: Vec<(usize, String)> = Vec::new();

    for rep in 0..cfg.repetitions {
        let before = rows.len();
        if let Err(cause) = run_repetition(cfg, &prepared, &runs, rep, &mut rows, &mut group_failures)
        {
            eprintln!("repetition {rep} aborted: {cause:#}");
            rows.truncate(before);
            aborted.push((rep, format!("{cause:#}")));
        }
    }
    if aborted.len() == cfg.repetitions {
        return Err(anyhow!("every repetition aborted; first cause: {}", aborted[0].1));
    }

    let summary = summarize(&rows, cfg);
    artifacts::save_metrics(&cfg.out.join("metrics.csv"), &rows)?;
    save_summary(&cfg.out.join("summary.csv"), &summary)?;
    let flag_path = cfg.out.join("aborted_partial.txt");
    if aborted.is_empty() {
        let _ = fs::remove_file(&flag_path);
    } else {
        let mut flag = String::from("metrics.csv is partial; aborted repetitions:\n");
        for (rep, cause) in &aborted {
            flag.push_str(&format!("rep {rep}: {cause}\n"));
        }
        fs::write(&flag_path, flag)?;
    }

    Ok(ExperimentOutput {
        rows,
        summary,
        malformed: prepared.malformed,
        group_failures,
        aborted,
    })
}
