//! Item-item and user-user affinity.
//!
//! Item affinity is an RBF kernel over item features,
//! `W_ij = exp(-gamma * |x_i - x_j|^2)`, so every value lies in (0, 1] and
//! the diagonal is exactly 1. User affinity is the cosine of user feature
//! vectors, or an indicator / identity matrix where no features apply.
//!
//! The full n x n item matrix is never materialized; consumers pull the
//! rows they need (the consensus score only reads rows of observed items),
//! and [`DistanceBlock`] caches squared distances for one group so a gamma
//! sweep only re-exponentiates.

use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist};
use crate::model::{FeatureMatrix, Group, ItemId, UserId};

/// RBF kernel over item features.
#[derive(Debug, Clone, Copy)]
pub struct ItemAffinity<'a> {
    features: &'a FeatureMatrix,
    gamma: f64,
}

impl<'a> ItemAffinity<'a> {
    pub fn new(features: &'a FeatureMatrix, gamma: f64) -> Result<Self> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(Error::InvalidConfig("gamma must be > 0".into()));
        }
        Ok(ItemAffinity { features, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_items(&self) -> usize {
        self.features.rows()
    }

    /// Single affinity value `W_ij`.
    pub fn value(&self, i: ItemId, j: ItemId) -> f64 {
        if i == j {
            return 1.0;
        }
        (-self.gamma * sq_dist(self.features.row(i.0), self.features.row(j.0))).exp()
    }

    /// Dense affinity row of item `i` against all items.
    pub fn row(&self, i: ItemId) -> Vec<f64> {
        let n = self.features.rows();
        let xi = self.features.row(i.0);
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            if j == i.0 {
                out.push(1.0);
            } else {
                out.push((-self.gamma * sq_dist(xi, self.features.row(j))).exp());
            }
        }
        out
    }
}

/// Squared distances from a fixed set of items to every item, cached so
/// the same group can be scored under several gamma values.
#[derive(Debug, Clone)]
pub struct DistanceBlock {
    items: Vec<ItemId>,
    n_items: usize,
    // row-major |items| x n_items
    dist2: Vec<f64>,
}

impl DistanceBlock {
    pub fn new(features: &FeatureMatrix, items: &[ItemId]) -> Self {
        let n = features.rows();
        let norms: Vec<f64> = (0..n).map(|j| dot(features.row(j), features.row(j))).collect();
        let mut dist2 = vec![0.0; items.len() * n];
        for (r, &i) in items.iter().enumerate() {
            let xi = features.row(i.0);
            let ni = norms[i.0];
            let row = &mut dist2[r * n..(r + 1) * n];
            for (j, slot) in row.iter_mut().enumerate() {
                let d2 = ni + norms[j] - 2.0 * dot(xi, features.row(j));
                *slot = d2.max(0.0);
            }
            row[i.0] = 0.0;
        }
        DistanceBlock {
            items: items.to_vec(),
            n_items: n,
            dist2,
        }
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    /// Affinity row `exp(-gamma * d^2)` for the `r`-th cached item.
    pub fn affinity_row(&self, r: usize, gamma: f64) -> Vec<f64> {
        self.dist2[r * self.n_items..(r + 1) * self.n_items]
            .iter()
            .map(|&d2| (-gamma * d2).exp())
            .collect()
    }
}

/// User-user affinity.
#[derive(Debug, Clone, Copy)]
pub enum UserAffinity<'a> {
    /// Cosine of user feature vectors; zero-norm vectors get affinity 0.
    Cosine(&'a FeatureMatrix),
    /// 1 iff both users belong to the queried group.
    Indicator,
    /// 1 iff the users are the same.
    Identity,
}

impl UserAffinity<'_> {
    /// Affinity between `u` and `v`, with `group` giving the queried
    /// group's members for the indicator case.
    pub fn value(&self, u: UserId, v: UserId, group: &[UserId]) -> f64 {
        match self {
            UserAffinity::Cosine(features) => cosine(features.row(u.0), features.row(v.0)),
            UserAffinity::Indicator => {
                if group.contains(&u) && group.contains(&v) {
                    1.0
                } else {
                    0.0
                }
            }
            UserAffinity::Identity => {
                if u == v {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Per-member weights `w_u` for the consensus score: the sum of the user's
/// affinity to every other member, or 1 for a singleton group (the sum
/// over an empty member set would zero the objective, while a single-user
/// group must reduce to personalized recommendation).
pub fn member_weights(group: &Group, affinity: &UserAffinity<'_>) -> Vec<f64> {
    let members = group.members();
    if members.len() == 1 {
        return vec![1.0];
    }
    members
        .iter()
        .map(|&u| {
            members
                .iter()
                .filter(|&&l| l != u)
                .map(|&l| affinity.value(u, l, members))
                .sum()
        })
        .collect()
}
