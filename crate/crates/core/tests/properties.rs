//! Property tests: the consensus score against a direct re-evaluation of
//! its defining formula, diminishing returns, monotonicity, and the
//! lazy/eager agreement of the optimizers.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saga_core::consensus::{GscoreState, SaturationSpec};
use saga_core::model::{build_ratings, ItemId, UserId};
use saga_core::optimizer::{eager_greedy, saga};
use saga_core::synthetic::RandomInstance;

/// Direct evaluation of the consensus formula from the instance data,
/// independent of the incremental machinery in `GscoreState`.
fn direct_gscore(
    inst: &RandomInstance,
    subset: &[ItemId],
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
) -> f64 {
    let mut total = 0.0;
    for (m, obs) in inst.observed.iter().enumerate() {
        let mut inner = 0.0;
        for &(i, r) in obs {
            let s: f64 = subset.iter().map(|&j| inst.w[i.0][j.0]).sum();
            inner += r * f(s);
        }
        total += g(inst.weights[m] * inner);
    }
    total
}

/// Split the candidates of an instance into nested subsets S1 subset-of S2
/// and a probe element outside both.
fn nested_subsets(inst: &RandomInstance, seed: u64) -> (Vec<ItemId>, Vec<ItemId>, ItemId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = inst.state();
    let mut pool = state.candidates();
    debug_assert!(pool.len() >= 3);
    let probe_idx = rng.gen_range(0..pool.len());
    let probe = pool.remove(probe_idx);
    let s2_len = rng.gen_range(1..=pool.len().min(6));
    let mut s2 = Vec::with_capacity(s2_len);
    for _ in 0..s2_len {
        let idx = rng.gen_range(0..pool.len());
        s2.push(pool.remove(idx));
    }
    let s1_len = rng.gen_range(0..=s2.len());
    let s1 = s2[..s1_len].to_vec();
    (s1, s2, probe)
}

fn state_with(inst: &RandomInstance, subset: &[ItemId]) -> GscoreState {
    let mut state = inst.state();
    for &e in subset {
        state.commit(e).expect("subset items are candidates");
    }
    state
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn marginal_gain_matches_direct_formula(seed in any::<u64>(), split_seed in any::<u64>()) {
        let inst = RandomInstance::generate(seed, 16, 4, 4);
        let (_, s2, probe) = nested_subsets(&inst, split_seed);
        let state = state_with(&inst, &s2);

        type Scalar = fn(f64) -> f64;
        let cases: [(SaturationSpec, Scalar, Scalar); 3] = [
            (SaturationSpec::linear(), |x| x.ln_1p(), |x| x),
            (SaturationSpec::concave(), |x| x.ln_1p(), |x| x.sqrt()),
            (SaturationSpec::modular(), |x| x, |x| x),
        ];
        for (sat, f, g) in cases {
            let gain = state.marginal_gain(&sat, probe).unwrap();
            let mut with_probe = s2.clone();
            with_probe.push(probe);
            let want = direct_gscore(&inst, &with_probe, f, g) - direct_gscore(&inst, &s2, f, g);
            let scale = want.abs().max(1.0);
            prop_assert!(
                (gain - want).abs() <= 1e-10 * scale,
                "gain {gain} vs direct {want}"
            );
        }
    }

    #[test]
    fn diminishing_returns_hold(seed in any::<u64>(), split_seed in any::<u64>()) {
        let inst = RandomInstance::generate(seed, 16, 4, 4);
        let (s1, s2, probe) = nested_subsets(&inst, split_seed);
        for sat in [SaturationSpec::linear(), SaturationSpec::concave()] {
            let small = state_with(&inst, &s1).marginal_gain(&sat, probe).unwrap();
            let large = state_with(&inst, &s2).marginal_gain(&sat, probe).unwrap();
            prop_assert!(
                small >= large - 1e-9,
                "gain at S1 {small} < gain at S2 {large}"
            );
        }
    }

    #[test]
    fn gscore_is_monotone_in_the_selection(seed in any::<u64>(), split_seed in any::<u64>()) {
        let inst = RandomInstance::generate(seed, 16, 4, 4);
        let (s1, s2, _) = nested_subsets(&inst, split_seed);
        for sat in [SaturationSpec::linear(), SaturationSpec::concave()] {
            let small = state_with(&inst, &s1).gscore(&sat).unwrap();
            let large = state_with(&inst, &s2).gscore(&sat).unwrap();
            prop_assert!(small <= large + 1e-9);
            prop_assert!(small >= 0.0 && large >= 0.0);
        }
    }

    #[test]
    fn running_sums_survive_commits(seed in any::<u64>(), split_seed in any::<u64>()) {
        let inst = RandomInstance::generate(seed, 16, 4, 4);
        let (_, s2, probe) = nested_subsets(&inst, split_seed);
        let mut state = state_with(&inst, &s2);
        state.commit(probe).unwrap();
        let live = state.running_sums().to_vec();
        let fresh = state.recomputed_sums();
        for (a, b) in live.iter().zip(&fresh) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn lazy_and_eager_agree(seed in any::<u64>(), k in 1usize..5) {
        let inst = RandomInstance::generate(seed, 24, 4, 4);
        for sat in [SaturationSpec::linear(), SaturationSpec::concave()] {
            let mut a = inst.state();
            let lazy = saga(&mut a, &sat, k).unwrap();
            let mut b = inst.state();
            let eager = eager_greedy(&mut b, &sat, k).unwrap();
            prop_assert_eq!(&lazy.selected, &eager.selected);
            prop_assert!(lazy.evaluations <= eager.evaluations);
            prop_assert!(
                (lazy.objective - eager.objective).abs()
                    <= 1e-12 * eager.objective.abs().max(1.0)
            );
        }
    }

    #[test]
    fn greedy_gains_sum_to_the_objective(seed in any::<u64>(), k in 1usize..5) {
        let inst = RandomInstance::generate(seed, 20, 3, 3);
        let sat = SaturationSpec::concave();
        let mut state = inst.state();
        let res = saga(&mut state, &sat, k).unwrap();
        let total: f64 = res.gains.iter().sum();
        prop_assert!((total - res.objective).abs() <= 1e-9 * res.objective.abs().max(1.0));
    }

    #[test]
    fn modular_greedy_is_top_k_by_closed_form(seed in any::<u64>(), k in 1usize..5) {
        // indicator user affinity: every member weight is |G| - 1
        let mut inst = RandomInstance::generate(seed, 18, 3, 3);
        let members = inst.observed.len();
        let w = if members == 1 { 1.0 } else { (members - 1) as f64 };
        inst.weights = vec![w; members];

        let mut state = inst.state();
        let res = saga(&mut state, &sat_modular(), k).unwrap();

        // closed form: score_j = sum_u (|G|-1) sum_i r_u^i W_ij
        state.reset();
        let mut scored: Vec<(ItemId, f64)> = state
            .candidates()
            .into_iter()
            .map(|j| {
                let mut score = 0.0;
                for obs in &inst.observed {
                    for &(i, r) in obs {
                        score += w * r * inst.w[i.0][j.0];
                    }
                }
                (j, score)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let want: Vec<ItemId> = scored
            .iter()
            .take(k.min(scored.len()))
            .map(|&(j, _)| j)
            .collect();
        prop_assert_eq!(res.selected, want);
    }

    #[test]
    fn ratings_round_trip_as_a_multiset(
        triples in proptest::collection::btree_set((0usize..30, 0usize..30), 0..60)
            .prop_map(|set| {
                set.into_iter()
                    .enumerate()
                    .map(|(n, (u, i))| (u, i, (n % 5 + 1) as u8))
                    .collect::<Vec<_>>()
            })
    ) {
        let m = build_ratings(&triples).unwrap();
        let mut seen: Vec<(usize, usize, u8)> = Vec::new();
        for u in 0..m.n_users() {
            for (i, r, _) in m.row(UserId(u)) {
                seen.push((u, i.0, r));
            }
        }
        let mut want = triples.clone();
        want.sort_unstable();
        seen.sort_unstable();
        prop_assert_eq!(seen, want);

        let by_rows: usize = (0..m.n_users()).map(|u| m.row(UserId(u)).count()).sum();
        let by_cols: usize = (0..m.n_items()).map(|i| m.col(ItemId(i)).count()).sum();
        prop_assert_eq!(by_rows, by_cols);
    }
}

fn sat_modular() -> SaturationSpec {
    SaturationSpec::modular()
}
