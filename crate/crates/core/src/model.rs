//! Shared identifiers, the sparse ratings matrix and dataset containers.
//!
//! Ids are dense and 0-based. The [`RatingsMatrix`] keeps both a row-major
//! and a column-major index so that user-wise and item-wise iteration are
//! both cheap; everything is immutable after construction and safe to share
//! across threads.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Dense 0-based user index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub usize);

/// Dense 0-based item index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub usize);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Train/test membership of a rating entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    user: usize,
    item: usize,
    rating: u8,
    split: Split,
}

/// Sparse user x item ordinal ratings (1-5) with per-entry train/test masks.
#[derive(Debug, Clone)]
pub struct RatingsMatrix {
    n_users: usize,
    n_items: usize,
    entries: Vec<Entry>,
    row_index: Vec<Vec<usize>>,
    col_index: Vec<Vec<usize>>,
}

impl RatingsMatrix {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn n_train(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .count()
    }

    /// All entries of a user row as `(item, rating, split)`.
    pub fn row(&self, user: UserId) -> impl Iterator<Item = (ItemId, u8, Split)> + '_ {
        self.row_index
            .get(user.0)
            .into_iter()
            .flatten()
            .map(move |&idx| {
                let e = &self.entries[idx];
                (ItemId(e.item), e.rating, e.split)
            })
    }

    /// All entries of an item column as `(user, rating, split)`.
    pub fn col(&self, item: ItemId) -> impl Iterator<Item = (UserId, u8, Split)> + '_ {
        self.col_index
            .get(item.0)
            .into_iter()
            .flatten()
            .map(move |&idx| {
                let e = &self.entries[idx];
                (UserId(e.user), e.rating, e.split)
            })
    }

    /// Train entries of a user row as `(item, rating)`.
    pub fn train_row(&self, user: UserId) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.row(user)
            .filter(|(_, _, s)| *s == Split::Train)
            .map(|(i, r, _)| (i, f64::from(r)))
    }

    /// Test entries of a user row as `(item, rating)`.
    pub fn test_row(&self, user: UserId) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.row(user)
            .filter(|(_, _, s)| *s == Split::Test)
            .map(|(i, r, _)| (i, f64::from(r)))
    }

    /// Train entries of an item column as `(user, rating)`.
    pub fn train_col(&self, item: ItemId) -> impl Iterator<Item = (UserId, f64)> + '_ {
        self.col(item)
            .filter(|(_, _, s)| *s == Split::Train)
            .map(|(u, r, _)| (u, f64::from(r)))
    }

    /// Every entry as `(user, item, rating, split)` in insertion order.
    pub fn entries(&self) -> impl Iterator<Item = (UserId, ItemId, u8, Split)> + '_ {
        self.entries
            .iter()
            .map(|e| (UserId(e.user), ItemId(e.item), e.rating, e.split))
    }

    /// Number of train entries in a user row.
    pub fn train_count(&self, user: UserId) -> usize {
        self.train_row(user).count()
    }

    /// Mean of the train ratings; 0 when there are none.
    pub fn mean_train_rating(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for e in &self.entries {
            if e.split == Split::Train {
                sum += f64::from(e.rating);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Rebuild with new splits decided per entry. `decide` is called in
    /// entry order with `(user, item)`.
    pub fn remask(&self, mut decide: impl FnMut(UserId, ItemId) -> Split) -> RatingsMatrix {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.split = decide(UserId(e.user), ItemId(e.item));
        }
        out
    }
}

/// Build a ratings matrix from `(user, item, rating)` triples.
///
/// All entries are marked train. Ids must be dense enough to index by
/// (the matrix spans `0..=max` of each id). Duplicate `(user, item)` pairs
/// and ratings outside 1-5 are rejected.
pub fn build_ratings(triples: &[(usize, usize, u8)]) -> Result<RatingsMatrix> {
    let n_users = triples.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    let n_items = triples.iter().map(|t| t.1 + 1).max().unwrap_or(0);
    build_ratings_with_dims(triples, n_users, n_items)
}

/// Like [`build_ratings`] but with explicit dimensions, so users or items
/// without any entry keep their slots (a filtered matrix preserves the
/// full item space).
pub fn build_ratings_with_dims(
    triples: &[(usize, usize, u8)],
    n_users: usize,
    n_items: usize,
) -> Result<RatingsMatrix> {
    for &(user, item, _) in triples {
        if user >= n_users {
            return Err(Error::UserOutOfRange(UserId(user)));
        }
        if item >= n_items {
            return Err(Error::ItemOutOfRange(ItemId(item)));
        }
    }

    let mut seen: HashMap<(usize, usize), ()> = HashMap::with_capacity(triples.len());
    let mut entries = Vec::with_capacity(triples.len());
    for &(user, item, rating) in triples {
        if !(1..=5).contains(&rating) {
            return Err(Error::RatingOutOfRange {
                user: UserId(user),
                item: ItemId(item),
                rating,
            });
        }
        if seen.insert((user, item), ()).is_some() {
            return Err(Error::DuplicateRating {
                user: UserId(user),
                item: ItemId(item),
            });
        }
        entries.push(Entry {
            user,
            item,
            rating,
            split: Split::Train,
        });
    }

    let mut row_index = vec![Vec::new(); n_users];
    let mut col_index = vec![Vec::new(); n_items];
    for (idx, e) in entries.iter().enumerate() {
        row_index[e.user].push(idx);
        col_index[e.item].push(idx);
    }

    Ok(RatingsMatrix {
        n_users,
        n_items,
        entries,
        row_index,
        col_index,
    })
}

/// Mapping from pre-filter user ids to post-filter ids.
#[derive(Debug, Clone)]
pub struct UserRemap {
    /// `forward[old] = Some(new)` for kept users.
    pub forward: Vec<Option<UserId>>,
    /// `kept[new] = old`.
    pub kept: Vec<UserId>,
}

/// Drop users with fewer than `min_count` train entries and re-densify
/// user ids. Item ids are preserved.
pub fn filter_min_ratings(r: &RatingsMatrix, min_count: usize) -> (RatingsMatrix, UserRemap) {
    let mut forward = vec![None; r.n_users];
    let mut kept = Vec::new();
    for (u, slot) in forward.iter_mut().enumerate() {
        if r.train_count(UserId(u)) >= min_count {
            *slot = Some(UserId(kept.len()));
            kept.push(UserId(u));
        }
    }

    let mut entries = Vec::new();
    for e in &r.entries {
        if let Some(new_u) = forward[e.user] {
            entries.push(Entry {
                user: new_u.0,
                ..*e
            });
        }
    }

    let n_users = kept.len();
    let n_items = r.n_items;
    let mut row_index = vec![Vec::new(); n_users];
    let mut col_index = vec![Vec::new(); n_items];
    for (idx, e) in entries.iter().enumerate() {
        row_index[e.user].push(idx);
        col_index[e.item].push(idx);
    }

    (
        RatingsMatrix {
            n_users,
            n_items,
            entries,
            row_index,
            col_index,
        },
        UserRemap { forward, kept },
    )
}

/// Dense non-negative latent features, row-major, one row per user or item.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    d: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Wrap row-major values. Fails on a size mismatch or a negative value.
    pub fn new(rows: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * d {
            return Err(Error::InvalidConfig(format!(
                "feature matrix needs {} values, got {}",
                rows * d,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "feature values must be finite and non-negative".into(),
            ));
        }
        Ok(FeatureMatrix { rows, d, values })
    }

    pub fn zeros(rows: usize, d: usize) -> Self {
        FeatureMatrix {
            rows,
            d,
            values: vec![0.0; rows * d],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.d..(idx + 1) * self.d]
    }

    pub(crate) fn row_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.d..(idx + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// An ordered set of users with their train-observed items and ratings.
#[derive(Debug, Clone)]
pub struct Group {
    members: Vec<UserId>,
    observed: Vec<Vec<(ItemId, f64)>>,
}

impl Group {
    /// Build a group for `members`, pulling each member's observed list
    /// from the train split of `ratings`.
    pub fn from_train(ratings: &RatingsMatrix, members: Vec<UserId>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mut seen = HashMap::new();
        for &m in &members {
            if m.0 >= ratings.n_users() {
                return Err(Error::UserOutOfRange(m));
            }
            if seen.insert(m, ()).is_some() {
                return Err(Error::DuplicateMember(m));
            }
        }
        let observed = members
            .iter()
            .map(|&u| ratings.train_row(u).collect())
            .collect();
        Ok(Group { members, observed })
    }

    /// Build directly from per-member observed lists (small fixtures).
    pub fn from_observed(members: Vec<UserId>, observed: Vec<Vec<(ItemId, f64)>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if members.len() != observed.len() {
            return Err(Error::InvalidConfig(
                "one observed list per member required".into(),
            ));
        }
        let mut seen = HashMap::new();
        for &m in &members {
            if seen.insert(m, ()).is_some() {
                return Err(Error::DuplicateMember(m));
            }
        }
        Ok(Group { members, observed })
    }

    pub fn members(&self) -> &[UserId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Observed `(item, rating)` list of the member at `idx`.
    pub fn observed(&self, idx: usize) -> &[(ItemId, f64)] {
        &self.observed[idx]
    }

    /// Sorted union of all members' observed items.
    pub fn observed_union(&self) -> Vec<ItemId> {
        let mut items: Vec<ItemId> = self
            .observed
            .iter()
            .flatten()
            .map(|&(i, _)| i)
            .collect();
        items.sort_unstable();
        items.dedup();
        items
    }
}
