//! On-disk artifacts connecting the pipeline stages.
//!
//! Everything is plain CSV. Floats are written with Rust's shortest
//! round-trip formatting, so save/load is lossless and stage-wise runs
//! reproduce the monolithic run byte for byte.
//!
//! - `split.csv`: `# n_users=U n_items=I` header comment, then
//!   `user,item,rating,split` rows
//! - `user_features.csv` / `item_features.csv`: one comma-separated row
//!   of latent values per user/item
//! - `groups_<kind>_<size>.csv`: `group_id,user_id` rows
//! - `recs_<kind>_<size>_<algo>[_p<param>].csv`:
//!   `group_id,rank,item_id,marginal_gain` rows
//! - `metrics.csv`: `repetition,group_kind,group_size,k,algorithm,gamma,dcg,psr`

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use saga_core::evaluation::GroupKind;
use saga_core::model::{
    build_ratings_with_dims, FeatureMatrix, Group, ItemId, RatingsMatrix, Split, UserId,
};

use crate::config::Algorithm;

/// Directory holding one repetition's artifacts.
pub fn rep_dir(out: &Path, rep: usize) -> PathBuf {
    out.join(format!("rep{rep}"))
}

pub fn split_path(out: &Path, rep: usize) -> PathBuf {
    rep_dir(out, rep).join("split.csv")
}

pub fn user_features_path(out: &Path, rep: usize) -> PathBuf {
    rep_dir(out, rep).join("user_features.csv")
}

pub fn item_features_path(out: &Path, rep: usize) -> PathBuf {
    rep_dir(out, rep).join("item_features.csv")
}

pub fn groups_path(out: &Path, rep: usize, kind: GroupKind, size: usize) -> PathBuf {
    rep_dir(out, rep).join(format!("groups_{}_{}.csv", kind.as_str(), size))
}

/// Recommendation file for one (kind, size, algorithm, parameter) cell.
pub fn recs_path(
    out: &Path,
    rep: usize,
    kind: GroupKind,
    size: usize,
    algo: Algorithm,
    param: Option<f64>,
) -> PathBuf {
    let suffix = match param {
        Some(p) => format!("_p{p}"),
        None => String::new(),
    };
    rep_dir(out, rep).join(format!(
        "recs_{}_{}_{}{}.csv",
        kind.as_str(),
        size,
        algo.as_str(),
        suffix
    ))
}

fn read_artifact(path: &Path, produced_by: &str) -> Result<String> {
    if !path.exists() {
        bail!(
            "{} not found; run `saga {produced_by}` first",
            path.display()
        );
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn save_split(path: &Path, r: &RatingsMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# n_users={} n_items={}\n",
        r.n_users(),
        r.n_items()
    ));
    out.push_str("user,item,rating,split\n");
    for (u, i, rating, split) in r.entries() {
        let tag = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let _ = writeln!(out, "{u},{i},{rating},{tag}");
    }
    write_file(path, &out)
}

pub fn load_split(path: &Path) -> Result<RatingsMatrix> {
    let text = read_artifact(path, "factorize")?;
    let mut lines = text.lines();
    let dims = lines
        .next()
        .context("empty split file")?
        .strip_prefix("# ")
        .context("split file missing the dimension comment")?;
    let mut n_users = None;
    let mut n_items = None;
    for part in dims.split_whitespace() {
        if let Some(v) = part.strip_prefix("n_users=") {
            n_users = Some(v.parse::<usize>()?);
        }
        if let Some(v) = part.strip_prefix("n_items=") {
            n_items = Some(v.parse::<usize>()?);
        }
    }
    let (n_users, n_items) = (
        n_users.context("split file missing n_users")?,
        n_items.context("split file missing n_items")?,
    );

    let mut triples = Vec::new();
    let mut test_pairs = std::collections::HashSet::new();
    for line in lines.skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let u: usize = f.next().context("user field")?.parse()?;
        let i: usize = f.next().context("item field")?.parse()?;
        let r: u8 = f.next().context("rating field")?.parse()?;
        let tag = f.next().context("split field")?;
        if tag == "test" {
            test_pairs.insert((u, i));
        }
        triples.push((u, i, r));
    }
    let m = build_ratings_with_dims(&triples, n_users, n_items)?;
    Ok(m.remask(|u, i| {
        if test_pairs.contains(&(u.0, i.0)) {
            Split::Test
        } else {
            Split::Train
        }
    }))
}

pub fn save_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    let mut out = String::with_capacity(f.rows() * f.d() * 8);
    for r in 0..f.rows() {
        let row = f.row(r);
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let text = read_artifact(path, "factorize")?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut d = None;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let mut count = 0usize;
        for field in line.split(',') {
            values.push(field.parse::<f64>().context("feature value")?);
            count += 1;
        }
        match d {
            None => d = Some(count),
            Some(expect) if expect != count => bail!("ragged feature file"),
            _ => {}
        }
        rows += 1;
    }
    let d = d.context("empty feature file")?;
    FeatureMatrix::new(rows, d, values).map_err(Into::into)
}

pub fn save_groups(path: &Path, groups: &[Group]) -> Result<()> {
    let mut out = String::from("group_id,user_id\n");
    for (gid, g) in groups.iter().enumerate() {
        for &u in g.members() {
            out.push_str(&format!("{gid},{u}\n"));
        }
    }
    write_file(path, &out)
}

pub fn load_groups(path: &Path, split: &RatingsMatrix) -> Result<Vec<Group>> {
    let text = read_artifact(path, "groups")?;
    let mut members_by_group: Vec<Vec<UserId>> = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let gid: usize = f.next().context("group_id")?.parse()?;
        let uid: usize = f.next().context("user_id")?.parse()?;
        if gid >= members_by_group.len() {
            members_by_group.resize(gid + 1, Vec::new());
        }
        members_by_group[gid].push(UserId(uid));
    }
    members_by_group
        .into_iter()
        .map(|members| Group::from_train(split, members).map_err(Into::into))
        .collect()
}

/// One ranked recommendation row.
#[derive(Debug, Clone, PartialEq)]
pub struct RecRow {
    pub group_id: usize,
    pub rank: usize,
    pub item: ItemId,
    pub gain: f64,
}

pub fn save_recs(path: &Path, rows: &[RecRow]) -> Result<()> {
    let mut out = String::from("group_id,rank,item_id,marginal_gain\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.group_id, r.rank, r.item, r.gain);
    }
    write_file(path, &out)
}

pub fn load_recs(path: &Path) -> Result<Vec<RecRow>> {
    let text = read_artifact(path, "recommend")?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut f = line.split(',');
        rows.push(RecRow {
            group_id: f.next().context("group_id")?.parse()?,
            rank: f.next().context("rank")?.parse()?,
            item: ItemId(f.next().context("item_id")?.parse()?),
            gain: f.next().context("marginal_gain")?.parse()?,
        });
    }
    Ok(rows)
}

/// One aggregated metrics row (averaged over the groups of a cell).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub repetition: usize,
    pub kind: GroupKind,
    pub size: usize,
    pub k: usize,
    pub algorithm: Algorithm,
    /// Swept parameter: gamma for the consensus variants, lambda for fm,
    /// absent for the plain aggregation baselines.
    pub param: Option<f64>,
    pub dcg: Option<f64>,
    pub psr: Option<f64>,
}

pub const METRICS_HEADER: &str = "repetition,group_kind,group_size,k,algorithm,gamma,dcg,psr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn metric_line(row: &MetricRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.repetition,
        row.kind.as_str(),
        row.size,
        row.k,
        row.algorithm.as_str(),
        opt(row.param),
        opt(row.dcg),
        opt(row.psr)
    )
}

pub fn save_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&metric_line(r));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}
