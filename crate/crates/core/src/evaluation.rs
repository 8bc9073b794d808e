//! Offline evaluation: the item-holdout protocol, group formation, and
//! the DCG / PSR metrics.
//!
//! The holdout marks every rating of a randomly chosen 30% of the items as
//! test data. Groups are either uniformly random user samples or "similar"
//! groups whose members all exceed a pairwise cosine threshold. DCG scores
//! the graded relevance of a ranked list per user; PSR is a recall variant
//! that down-weights popular items by `(1/N_i+)^beta` to reward coverage
//! of the long tail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{FeatureMatrix, Group, ItemId, RatingsMatrix, Split, UserId};

/// Re-split a ratings matrix by holding out a random fraction of the item
/// set: every rating of a chosen item becomes test, everything else train.
/// The chosen subset has ceil(frac * n_items) items and must be a strict
/// nonempty subset.
pub fn holdout_split(r: &RatingsMatrix, frac: f64, seed: u64) -> Result<RatingsMatrix> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidHoldout {
            frac,
            chosen: 0,
            n_items: r.n_items(),
        });
    }
    let n_items = r.n_items();
    let chosen = (frac * n_items as f64).ceil() as usize;
    if chosen == 0 || chosen >= n_items {
        return Err(Error::InvalidHoldout {
            frac,
            chosen,
            n_items,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_item = vec![false; n_items];
    for idx in rand::seq::index::sample(&mut rng, n_items, chosen) {
        test_item[idx] = true;
    }
    Ok(r.remask(|_, item| {
        if test_item[item.0] {
            Split::Test
        } else {
            Split::Train
        }
    }))
}

/// How group members are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Random,
    Similar,
}

impl GroupKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupKind::Random => "random",
            GroupKind::Similar => "similar",
        }
    }
}

/// Parameters for one batch of groups.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub size: usize,
    pub count: usize,
    /// Pairwise cosine threshold for similar groups.
    pub sim_threshold: f64,
    pub seed: u64,
    /// Candidate draws allowed per group before giving up on it.
    pub retry_budget: usize,
}

impl GroupSpec {
    pub fn new(kind: GroupKind, size: usize, count: usize, seed: u64) -> Self {
        GroupSpec {
            kind,
            size,
            count,
            sim_threshold: 0.60,
            seed,
            retry_budget: 1000,
        }
    }
}

/// Groups actually formed, plus the number of slots abandoned after the
/// retry budget ran out.
#[derive(Debug, Clone)]
pub struct GroupBatch {
    pub groups: Vec<Group>,
    pub failures: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Draw groups per `spec`. Random groups sample members uniformly without
/// replacement; similar groups grow one member at a time, rejecting any
/// candidate whose cosine to a current member is not above the threshold.
/// Groups may overlap across draws. `user_features` is required for
/// similar groups.
pub fn make_groups(
    spec: &GroupSpec,
    user_features: Option<&FeatureMatrix>,
    ratings: &RatingsMatrix,
) -> Result<GroupBatch> {
    if spec.size < 2 {
        return Err(Error::InvalidConfig("group size must be >= 2".into()));
    }
    let n_users = ratings.n_users();
    if n_users < spec.size {
        return Err(Error::NotEnoughUsers {
            need: spec.size,
            have: n_users,
        });
    }
    let features = match (spec.kind, user_features) {
        (GroupKind::Similar, None) => return Err(Error::MissingFeatures),
        (_, f) => f,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups = Vec::with_capacity(spec.count);
    let mut failures = 0usize;

    for _ in 0..spec.count {
        let members: Option<Vec<UserId>> = match spec.kind {
            GroupKind::Random => Some(
                rand::seq::index::sample(&mut rng, n_users, spec.size)
                    .into_iter()
                    .map(UserId)
                    .collect(),
            ),
            GroupKind::Similar => {
                let features = features.expect("checked above");
                let mut members: Vec<UserId> = Vec::with_capacity(spec.size);
                let mut draws = 0usize;
                while members.len() < spec.size && draws < spec.retry_budget {
                    draws += 1;
                    let candidate = UserId(rng.gen_range(0..n_users));
                    if members.contains(&candidate) {
                        continue;
                    }
                    let ok = members.iter().all(|&m| {
                        cosine(features.row(m.0), features.row(candidate.0))
                            > spec.sim_threshold
                    });
                    if ok {
                        members.push(candidate);
                    }
                }
                (members.len() == spec.size).then_some(members)
            }
        };
        match members {
            Some(m) => groups.push(Group::from_train(ratings, m)?),
            None => failures += 1,
        }
    }

    Ok(GroupBatch { groups, failures })
}

/// Discounted cumulative gain of a ranked list: position `p` (1-based)
/// contributes `(2^rel - 1) / log_base(p + 1)`.
pub fn dcg(ranked: &[ItemId], relevance: impl Fn(ItemId) -> f64, log_base: f64) -> f64 {
    let ln_base = log_base.ln();
    ranked
        .iter()
        .enumerate()
        .map(|(idx, &item)| {
            let rel = relevance(item);
            let discount = ((idx + 2) as f64).ln() / ln_base;
            (rel.exp2() - 1.0) / discount
        })
        .sum()
}

/// Test-split relevance data shared by the metrics: per-user test ratings
/// and, per item, the number of relevant test ratings `N_i+`.
#[derive(Debug, Clone)]
pub struct TestRelevance {
    per_user: Vec<HashMap<ItemId, f64>>,
    n_plus: Vec<usize>,
    threshold: f64,
}

impl TestRelevance {
    /// `threshold` is the minimum rating that counts as relevant.
    pub fn new(r: &RatingsMatrix, threshold: f64) -> Self {
        let mut per_user = vec![HashMap::new(); r.n_users()];
        let mut n_plus = vec![0usize; r.n_items()];
        for (u, i, rating, split) in r.entries() {
            if split == Split::Test {
                let rating = f64::from(rating);
                per_user[u.0].insert(i, rating);
                if rating >= threshold {
                    n_plus[i.0] += 1;
                }
            }
        }
        TestRelevance {
            per_user,
            n_plus,
            threshold,
        }
    }

    /// Test rating of `(u, i)` if present.
    pub fn rating(&self, u: UserId, i: ItemId) -> Option<f64> {
        self.per_user.get(u.0).and_then(|m| m.get(&i)).copied()
    }

    /// Whether `(u, i)` is a relevant test rating.
    pub fn is_relevant(&self, u: UserId, i: ItemId) -> bool {
        self.rating(u, i).is_some_and(|r| r >= self.threshold)
    }

    /// Number of relevant test ratings of item `i`.
    pub fn n_plus(&self, i: ItemId) -> usize {
        self.n_plus.get(i.0).copied().unwrap_or(0)
    }

    /// The user's relevant test items, ascending.
    pub fn relevant_items(&self, u: UserId) -> Vec<ItemId> {
        let mut items: Vec<ItemId> = self.per_user[u.0]
            .iter()
            .filter(|&(_, &r)| r >= self.threshold)
            .map(|(&i, _)| i)
            .collect();
        items.sort_unstable();
        items
    }
}

/// DCG of the recommendation for one group: per-member DCG against that
/// member's test ratings (unrated items count 0), averaged over members.
pub fn group_dcg(
    group: &Group,
    recommended: &[ItemId],
    test: &TestRelevance,
    log_base: f64,
) -> f64 {
    let total: f64 = group
        .members()
        .iter()
        .map(|&u| dcg(recommended, |i| test.rating(u, i).unwrap_or(0.0), log_base))
        .sum();
    total / group.len() as f64
}

/// Popularity-stratified recall of the recommendation for one group:
///
/// ```text
/// (1/|G|) * sum_u sum_{i in S_u+} (1/N_i+)^beta
///         / sum_u sum_{i in T_u}  (1/N_i+)^beta
/// ```
///
/// where `S_u+` are the recommended items relevant to `u` in the test set
/// and `T_u` the user's relevant test items. Returns None when no member
/// has any relevant test item (the denominator vanishes).
pub fn psr(
    group: &Group,
    recommended: &[ItemId],
    test: &TestRelevance,
    beta: f64,
) -> Option<f64> {
    let weight = |i: ItemId| (1.0 / test.n_plus(i) as f64).powf(beta);
    let mut num = 0.0;
    let mut den = 0.0;
    for &u in group.members() {
        for i in test.relevant_items(u) {
            den += weight(i);
        }
        for &i in recommended {
            if test.is_relevant(u, i) {
                num += weight(i);
            }
        }
    }
    if den == 0.0 {
        return None;
    }
    Some(num / den / group.len() as f64)
}
