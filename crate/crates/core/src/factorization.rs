//! Weighted-regularized non-negative alternating least squares.
//!
//! Only observed train entries carry weight; unobserved cells are ignored.
//! Each alternation solves one side's rows as ridge least-squares problems
//! constrained to the non-negative orthant (active-set re-solve), so the
//! objective
//!
//! ```text
//! sum over observed train (u,i) of (r_ui - y_u . x_i)^2
//!   + reg * (|Y|_F^2 + |X|_F^2)
//! ```
//!
//! never increases from one alternation to the next.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, nnls_ridge};
use crate::model::{FeatureMatrix, ItemId, RatingsMatrix, UserId};

/// Configuration for [`factorize`].
#[derive(Debug, Clone)]
pub struct FactorizationConfig {
    /// Latent dimension.
    pub d: usize,
    /// L2 regularization weight, strictly positive.
    pub reg: f64,
    /// Maximum number of alternations.
    pub max_iters: usize,
    /// Stop when the relative objective improvement falls below this.
    pub tol: f64,
    /// RNG seed for the initial factors.
    pub seed: u64,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        FactorizationConfig {
            d: 150,
            reg: 0.1,
            max_iters: 50,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl FactorizationConfig {
    fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::InvalidConfig("d must be >= 1".into()));
        }
        if self.reg.is_nan() || self.reg <= 0.0 {
            return Err(Error::InvalidConfig("reg must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-block iteration cap for the active-set re-solve.
const NNLS_PASSES: usize = 30;

struct SolveSide<'a> {
    // per row: list of (other-side row index, rating)
    obs: &'a [Vec<(usize, f64)>],
    fixed: &'a FeatureMatrix,
    reg: f64,
}

/// Solve all rows of one side given the other side fixed. Each row's new
/// value is kept only if it does not worsen that row's local objective, so
/// a full sweep can never increase the global objective.
fn solve_side(side: &SolveSide<'_>, target: &mut FeatureMatrix) -> std::result::Result<(), ()> {
    let d = target.d();
    let rows: Vec<Vec<f64>> = side
        .obs
        .par_iter()
        .enumerate()
        .map(|(row, obs)| {
            if obs.is_empty() {
                // pure ridge term: optimum is the zero vector
                return Ok(vec![0.0; d]);
            }
            let mut gram = vec![0.0; d * d];
            let mut rhs = vec![0.0; d];
            for &(other, rating) in obs {
                let f = side.fixed.row(other);
                for a in 0..d {
                    let fa = f[a];
                    rhs[a] += rating * fa;
                    let base = a * d;
                    for b in 0..d {
                        gram[base + b] += fa * f[b];
                    }
                }
            }
            let candidate = nnls_ridge(&gram, &rhs, side.reg, d, NNLS_PASSES).ok_or(())?;
            if candidate.iter().any(|v| !v.is_finite()) {
                return Err(());
            }
            let local = |y: &[f64]| -> f64 {
                let mut obj = side.reg * dot(y, y);
                for &(other, rating) in obs {
                    let e = rating - dot(y, side.fixed.row(other));
                    obj += e * e;
                }
                obj
            };
            let old = target.row(row);
            if local(&candidate) <= local(old) {
                Ok(candidate)
            } else {
                Ok(old.to_vec())
            }
        })
        .collect::<std::result::Result<_, ()>>()?;
    for (row, values) in rows.into_iter().enumerate() {
        target.row_mut(row).copy_from_slice(&values);
    }
    Ok(())
}

fn objective(r: &RatingsMatrix, users: &FeatureMatrix, items: &FeatureMatrix, reg: f64) -> f64 {
    let mut obj = 0.0;
    for u in 0..r.n_users() {
        for (i, rating) in r.train_row(UserId(u)) {
            let e = rating - dot(users.row(u), items.row(i.0));
            obj += e * e;
        }
    }
    obj + reg * (dot(users.values(), users.values()) + dot(items.values(), items.values()))
}

/// Factorize the train split of `r` into non-negative user and item
/// features. Returns the two matrices and the objective trace (initial
/// value first, then one entry per alternation). Deterministic for a
/// fixed seed.
pub fn factorize(
    r: &RatingsMatrix,
    cfg: &FactorizationConfig,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<f64>)> {
    cfg.validate()?;
    if r.n_train() == 0 {
        return Err(Error::EmptyTrainSet);
    }

    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = r.mean_train_rating() / d as f64;
    let mut users = FeatureMatrix::zeros(r.n_users(), d);
    let mut items = FeatureMatrix::zeros(r.n_items(), d);
    for row in 0..r.n_users() {
        for v in users.row_mut(row) {
            *v = rng.gen::<f64>() * scale;
        }
    }
    for row in 0..r.n_items() {
        for v in items.row_mut(row) {
            *v = rng.gen::<f64>() * scale;
        }
    }

    let user_obs: Vec<Vec<(usize, f64)>> = (0..r.n_users())
        .map(|u| {
            r.train_row(UserId(u))
                .map(|(i, rating)| (i.0, rating))
                .collect()
        })
        .collect();
    let item_obs: Vec<Vec<(usize, f64)>> = (0..r.n_items())
        .map(|i| {
            r.train_col(ItemId(i))
                .map(|(u, rating)| (u.0, rating))
                .collect()
        })
        .collect();

    let mut trace = vec![objective(r, &users, &items, cfg.reg)];

    for iter in 0..cfg.max_iters {
        solve_side(
            &SolveSide {
                obs: &user_obs,
                fixed: &items,
                reg: cfg.reg,
            },
            &mut users,
        )
        .map_err(|_| Error::NonFinite(iter))?;
        solve_side(
            &SolveSide {
                obs: &item_obs,
                fixed: &users,
                reg: cfg.reg,
            },
            &mut items,
        )
        .map_err(|_| Error::NonFinite(iter))?;

        let obj = objective(r, &users, &items, cfg.reg);
        if !obj.is_finite() {
            return Err(Error::NonFinite(iter));
        }
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if prev - obj <= cfg.tol * prev {
            break;
        }
    }

    Ok((users, items, trace))
}

/// Predicted rating `y_u . x_i`, clamped to the rating scale.
pub fn predict_clamped(users: &FeatureMatrix, items: &FeatureMatrix, u: UserId, i: ItemId) -> f64 {
    dot(users.row(u.0), items.row(i.0)).clamp(1.0, 5.0)
}

/// Predicted rating `y_u . x_i` without clamping.
pub fn predict_raw(users: &FeatureMatrix, items: &FeatureMatrix, u: UserId, i: ItemId) -> f64 {
    dot(users.row(u.0), items.row(i.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_ratings;

    fn cfg(d: usize, reg: f64, iters: usize, seed: u64) -> FactorizationConfig {
        FactorizationConfig {
            d,
            reg,
            max_iters: iters,
            tol: 0.0,
            seed,
        }
    }

    #[test]
    fn empty_train_set_is_an_error() {
        let m = build_ratings(&[]).unwrap();
        assert!(matches!(
            factorize(&m, &FactorizationConfig::default()),
            Err(Error::EmptyTrainSet)
        ));
    }

    #[test]
    fn rank_one_matrix_is_recovered() {
        // r = a b^T with a, b >= 0, fully observed, integer products in 1..5
        let a: [f64; 4] = [1.0, 2.0, 1.0, 2.0];
        let b: [f64; 3] = [2.0, 1.0, 2.0];
        let mut triples = Vec::new();
        let mut frob = 0.0;
        for (u, &au) in a.iter().enumerate() {
            for (i, &bi) in b.iter().enumerate() {
                let r = au * bi;
                frob += r * r;
                triples.push((u, i, r as u8));
            }
        }
        let m = build_ratings(&triples).unwrap();
        let (users, items, trace) = factorize(&m, &cfg(1, 1e-6, 200, 7)).unwrap();
        let mut err = 0.0;
        for (u, i, r, _) in m.entries() {
            let e = f64::from(r) - predict_raw(&users, &items, u, i);
            err += e * e;
        }
        assert!(
            err < 1e-3 * frob,
            "reconstruction error {err} vs bound {}",
            1e-3 * frob
        );
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_entry_shrinks_below_rating() {
        let m = build_ratings(&[(0, 0, 4)]).unwrap();
        let (users, items, trace) = factorize(&m, &cfg(1, 0.1, 50, 3)).unwrap();
        let pred = predict_raw(&users, &items, UserId(0), ItemId(0));
        assert!(pred < 4.0, "regularization must pull below 4, got {pred}");
        assert!(pred > 0.0);
        assert!(*trace.last().unwrap() < trace[0]);
    }

    #[test]
    fn same_seed_gives_bitwise_identical_trace() {
        let m = build_ratings(&[(0, 0, 5), (0, 1, 3), (1, 0, 2), (1, 2, 4), (2, 1, 1)]).unwrap();
        let c = cfg(3, 0.1, 25, 11);
        let (ua, ia, ta) = factorize(&m, &c).unwrap();
        let (ub, ib, tb) = factorize(&m, &c).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(ua.values(), ub.values());
        assert_eq!(ia.values(), ib.values());
    }

    #[test]
    fn different_seed_changes_initial_objective() {
        let m = build_ratings(&[(0, 0, 5), (1, 1, 3)]).unwrap();
        let (_, _, ta) = factorize(&m, &cfg(2, 0.1, 1, 1)).unwrap();
        let (_, _, tb) = factorize(&m, &cfg(2, 0.1, 1, 2)).unwrap();
        assert_ne!(ta[0], tb[0]);
    }

    #[test]
    fn features_are_exactly_non_negative() {
        let m = build_ratings(&[
            (0, 0, 5),
            (0, 1, 1),
            (1, 0, 1),
            (1, 1, 5),
            (2, 0, 3),
            (2, 2, 2),
        ])
        .unwrap();
        let (users, items, _) = factorize(&m, &cfg(4, 0.05, 30, 5)).unwrap();
        assert!(users.values().iter().all(|&v| v >= 0.0));
        assert!(items.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn trace_is_monotone_on_random_sparse_input() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut triples = Vec::new();
        for u in 0..15usize {
            for i in 0..12usize {
                if rng.gen::<f64>() < 0.4 {
                    triples.push((u, i, rng.gen_range(1..=5u8)));
                }
            }
        }
        let m = build_ratings(&triples).unwrap();
        let (_, _, trace) = factorize(&m, &cfg(4, 0.1, 30, 13)).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "objective increased: {} -> {}", w[0], w[1]);
        }
    }
}
