//! Synthetic data: random consensus instances for property checks, the
//! three-cluster coverage fixture, and planted ratings matrices that stand
//! in when no real dataset is available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affinity::ItemAffinity;
use crate::consensus::GscoreState;
use crate::model::{FeatureMatrix, ItemId};

/// A random consensus instance: arbitrary non-negative affinities, a few
/// members with small observed lists, ordinal ratings.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub n_items: usize,
    pub observed: Vec<Vec<(ItemId, f64)>>,
    pub weights: Vec<f64>,
    /// Item affinity matrix, row-major, entries in [0, 1). No symmetry or
    /// unit diagonal is imposed.
    pub w: Vec<Vec<f64>>,
}

impl RandomInstance {
    /// Deterministically generate an instance. Observed items are drawn
    /// from the lower half of the item range so candidates always exist.
    pub fn generate(seed: u64, max_n: usize, max_members: usize, max_obs: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(6..=max_n.max(6));
        let members = rng.gen_range(1..=max_members.max(1));
        let obs_pool = n / 2;

        let observed: Vec<Vec<(ItemId, f64)>> = (0..members)
            .map(|_| {
                let count = rng.gen_range(1..=max_obs.min(obs_pool).max(1));
                let picks = rand::seq::index::sample(&mut rng, obs_pool, count);
                picks
                    .into_iter()
                    .map(|i| (ItemId(i), f64::from(rng.gen_range(1..=5u8))))
                    .collect()
            })
            .collect();

        let weights = if members == 1 {
            vec![1.0]
        } else {
            // asymmetric non-negative user affinity, summed over the rest
            let a: Vec<Vec<f64>> = (0..members)
                .map(|_| (0..members).map(|_| rng.gen::<f64>()).collect())
                .collect();
            (0..members)
                .map(|u| (0..members).filter(|&l| l != u).map(|l| a[u][l]).sum())
                .collect()
        };

        let w: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
            .collect();

        RandomInstance {
            n_items: n,
            observed,
            weights,
            w,
        }
    }

    pub fn state(&self) -> GscoreState {
        GscoreState::build(self.n_items, &self.observed, &self.weights, |i| {
            self.w[i.0].clone()
        })
        .expect("random instance is well-formed")
    }
}

/// Three well-separated item clusters of ten items each, three users who
/// each rated the first five items of their own cluster, and oracle
/// predicted scores under which one cluster dominates the others.
#[derive(Debug, Clone)]
pub struct ClusterFixture {
    pub item_features: FeatureMatrix,
    pub observed: Vec<Vec<(ItemId, f64)>>,
    pub weights: Vec<f64>,
    /// Candidate items (the unrated half of each cluster), ascending.
    pub candidates: Vec<ItemId>,
    /// Oracle predicted score per member per candidate, aligned with
    /// `candidates`.
    pub oracle_scores: Vec<Vec<f64>>,
}

pub const CLUSTERS: usize = 3;
pub const ITEMS_PER_CLUSTER: usize = 10;

pub fn cluster_of(item: ItemId) -> usize {
    item.0 / ITEMS_PER_CLUSTER
}

pub fn three_cluster_fixture() -> ClusterFixture {
    let centers = [(6.0, 0.0), (0.0, 6.0), (6.0, 6.0)];
    let n = CLUSTERS * ITEMS_PER_CLUSTER;
    let mut values = Vec::with_capacity(n * 2);
    for &(cx, cy) in centers.iter().take(CLUSTERS) {
        for t in 0..ITEMS_PER_CLUSTER {
            values.push(cx + 0.04 * t as f64);
            values.push(cy + 0.03 * ((t * 7) % 5) as f64);
        }
    }
    let item_features = FeatureMatrix::new(n, 2, values).expect("non-negative by construction");

    // member c rated the first five items of cluster c with the top grade
    let observed: Vec<Vec<(ItemId, f64)>> = (0..CLUSTERS)
        .map(|c| {
            (0..5)
                .map(|t| (ItemId(c * ITEMS_PER_CLUSTER + t), 5.0))
                .collect()
        })
        .collect();

    let candidates: Vec<ItemId> = (0..n)
        .map(ItemId)
        .filter(|&i| i.0 % ITEMS_PER_CLUSTER >= 5)
        .collect();

    // own cluster 5.0; cluster 0 appeals to everyone (2.0), other cross 1.0
    let oracle_scores: Vec<Vec<f64>> = (0..CLUSTERS)
        .map(|member| {
            candidates
                .iter()
                .map(|&i| {
                    let c = cluster_of(i);
                    if c == member {
                        5.0
                    } else if c == 0 {
                        2.0
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();

    ClusterFixture {
        item_features,
        observed,
        // full mutual affinity between the three members
        weights: vec![2.0; CLUSTERS],
        candidates,
        oracle_scores,
    }
}

impl ClusterFixture {
    pub fn n_items(&self) -> usize {
        CLUSTERS * ITEMS_PER_CLUSTER
    }

    pub fn state(&self, gamma: f64) -> GscoreState {
        let affinity = ItemAffinity::new(&self.item_features, gamma).expect("gamma > 0");
        GscoreState::build(self.n_items(), &self.observed, &self.weights, |i| {
            affinity.row(i)
        })
        .expect("fixture is well-formed")
    }
}

/// Ratings with planted user/item cluster structure: users rate their own
/// cluster's items highly and a sprinkling of other items low. Useful as a
/// stand-in dataset when no real one is on disk.
pub fn planted_ratings(
    n_users: usize,
    n_items: usize,
    n_clusters: usize,
    per_user: usize,
    seed: u64,
) -> Vec<(usize, usize, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(n_users * per_user);
    for u in 0..n_users {
        let own = u % n_clusters;
        let own_items: Vec<usize> = (0..n_items).filter(|i| i % n_clusters == own).collect();
        let other_items: Vec<usize> = (0..n_items).filter(|i| i % n_clusters != own).collect();
        let n_own = ((per_user * 4) / 5).min(own_items.len());
        let n_other = (per_user - n_own).min(other_items.len());
        for idx in rand::seq::index::sample(&mut rng, own_items.len(), n_own) {
            triples.push((u, own_items[idx], rng.gen_range(4..=5u8)));
        }
        for idx in rand::seq::index::sample(&mut rng, other_items.len(), n_other) {
            triples.push((u, other_items[idx], rng.gen_range(1..=3u8)));
        }
    }
    triples
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_are_reproducible_and_well_formed() {
        let a = RandomInstance::generate(9, 20, 4, 4);
        let b = RandomInstance::generate(9, 20, 4, 4);
        assert_eq!(a.n_items, b.n_items);
        assert_eq!(a.observed, b.observed);
        assert_eq!(a.w, b.w);
        let state = a.state();
        assert!(!state.candidates().is_empty());
        assert!(a.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn fixture_has_separated_clusters() {
        let fx = three_cluster_fixture();
        let aff = ItemAffinity::new(&fx.item_features, 0.5).unwrap();
        // within-cluster affinity dwarfs cross-cluster affinity
        let within = aff.value(ItemId(0), ItemId(4));
        let cross = aff.value(ItemId(0), ItemId(14));
        assert!(within > 0.9, "within {within}");
        assert!(cross < 1e-6, "cross {cross}");
        assert_eq!(fx.candidates.len(), 15);
    }

    #[test]
    fn planted_ratings_are_valid_triples() {
        let triples = planted_ratings(30, 40, 3, 12, 5);
        assert!(!triples.is_empty());
        let m = crate::model::build_ratings(&triples).unwrap();
        assert_eq!(m.n_entries(), triples.len());
    }
}
