//! The group consensus score and its marginal gains.
//!
//! For a group with members `u`, per-member weights `w_u`, observed items
//! `I_u` with ratings `r_u^i`, item affinity rows `W_i.` and a selected set
//! `S`, the score is
//!
//! ```text
//! sum over u of  g_u( w_u * sum over i in I_u of r_u^i * f(s_i) )
//! with s_i = sum over j in S of W_ij
//! ```
//!
//! The running sums `s_i` are maintained incrementally so a marginal gain
//! costs one affinity-row lookup per observed item instead of a full
//! re-evaluation. `w_u` is the member's summed affinity to the rest of the
//! group (see [`crate::affinity::member_weights`]) and does not depend on
//! `S`, so it is fixed at construction.

use std::collections::HashMap;

use crate::affinity::{member_weights, DistanceBlock, ItemAffinity, UserAffinity};
use crate::error::{Error, Result};
use crate::model::{Group, ItemId};

/// Saturation applied to the per-observed-item affinity mass `s_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemSaturation {
    Identity,
    /// `ln(1 + x)`, monotone concave with f(0) = 0.
    Log1p,
}

impl ItemSaturation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ItemSaturation::Identity => x,
            ItemSaturation::Log1p => x.ln_1p(),
        }
    }
}

/// Saturation applied to each member's aggregate term.
#[derive(Debug, Clone, PartialEq)]
pub enum UserSaturation {
    Identity,
    /// Square root, monotone concave with g(0) = 0.
    Sqrt,
    /// `g_u(x) = x / t_u` with a positive per-member time weight, used to
    /// damp members whose engagement is fading.
    ScaledIdentity(Vec<f64>),
}

impl UserSaturation {
    fn apply(&self, member: usize, x: f64) -> f64 {
        match self {
            UserSaturation::Identity => x,
            UserSaturation::Sqrt => x.sqrt(),
            UserSaturation::ScaledIdentity(times) => x / times[member],
        }
    }
}

/// Saturation pair defining one consensus-score variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSpec {
    pub item_fn: ItemSaturation,
    pub user_fn: UserSaturation,
}

impl SaturationSpec {
    /// f = ln(1+x), g = identity.
    pub fn linear() -> Self {
        SaturationSpec {
            item_fn: ItemSaturation::Log1p,
            user_fn: UserSaturation::Identity,
        }
    }

    /// f = ln(1+x), g = sqrt.
    pub fn concave() -> Self {
        SaturationSpec {
            item_fn: ItemSaturation::Log1p,
            user_fn: UserSaturation::Sqrt,
        }
    }

    /// f = identity, g = identity (the modular special case).
    pub fn modular() -> Self {
        SaturationSpec {
            item_fn: ItemSaturation::Identity,
            user_fn: UserSaturation::Identity,
        }
    }

    fn validate(&self, n_members: usize) -> Result<()> {
        if let UserSaturation::ScaledIdentity(times) = &self.user_fn {
            if times.len() != n_members {
                return Err(Error::InvalidSaturation(format!(
                    "need {} time weights, got {}",
                    n_members,
                    times.len()
                )));
            }
            if times.iter().any(|&t| t.is_nan() || t <= 0.0) {
                return Err(Error::InvalidSaturation(
                    "time weights must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Evaluation state for one group: observed structure, affinity rows and
/// the running sums for the currently selected set.
#[derive(Debug, Clone)]
pub struct GscoreState {
    n_items: usize,
    weights: Vec<f64>,
    // per member: (index into `distinct`, rating)
    obs: Vec<Vec<(usize, f64)>>,
    distinct: Vec<ItemId>,
    rows: Vec<Vec<f64>>,
    observed_mask: Vec<bool>,
    sums: Vec<f64>,
    selected: Vec<ItemId>,
    selected_mask: Vec<bool>,
}

impl GscoreState {
    /// Build from raw parts: one observed `(item, rating)` list and one
    /// weight per member, and a function producing the affinity row of an
    /// observed item against all `n_items` items. `row_fn` is called once
    /// per distinct observed item, in ascending item order.
    pub fn build(
        n_items: usize,
        observed: &[Vec<(ItemId, f64)>],
        weights: &[f64],
        mut row_fn: impl FnMut(ItemId) -> Vec<f64>,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if observed.len() != weights.len() {
            return Err(Error::InvalidConfig(
                "one weight per member required".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "member weights must be finite and non-negative".into(),
            ));
        }

        let mut distinct: Vec<ItemId> = observed
            .iter()
            .flatten()
            .map(|&(i, _)| i)
            .collect();
        distinct.sort_unstable();
        distinct.dedup();

        let mut index = HashMap::with_capacity(distinct.len());
        let mut observed_mask = vec![false; n_items];
        for (di, &item) in distinct.iter().enumerate() {
            if item.0 >= n_items {
                return Err(Error::ItemOutOfRange(item));
            }
            index.insert(item, di);
            observed_mask[item.0] = true;
        }

        let mut obs = Vec::with_capacity(observed.len());
        for member in observed {
            let mut list = Vec::with_capacity(member.len());
            for &(item, rating) in member {
                if !rating.is_finite() || rating < 0.0 {
                    return Err(Error::InvalidConfig(
                        "observed ratings must be finite and non-negative".into(),
                    ));
                }
                list.push((index[&item], rating));
            }
            obs.push(list);
        }

        let mut rows = Vec::with_capacity(distinct.len());
        for &item in &distinct {
            let row = row_fn(item);
            if row.len() != n_items {
                return Err(Error::InvalidConfig(format!(
                    "affinity row for item {item} has length {}, expected {n_items}",
                    row.len()
                )));
            }
            rows.push(row);
        }

        let n_distinct = distinct.len();
        Ok(GscoreState {
            n_items,
            weights: weights.to_vec(),
            obs,
            distinct,
            rows,
            observed_mask,
            sums: vec![0.0; n_distinct],
            selected: Vec::new(),
            selected_mask: vec![false; n_items],
        })
    }

    /// Build for a group with cosine/indicator/identity user affinity and
    /// an RBF item affinity.
    pub fn for_group(
        group: &Group,
        user_affinity: &UserAffinity<'_>,
        item_affinity: &ItemAffinity<'_>,
    ) -> Result<Self> {
        let weights = member_weights(group, user_affinity);
        let observed: Vec<Vec<(ItemId, f64)>> = (0..group.len())
            .map(|m| group.observed(m).to_vec())
            .collect();
        GscoreState::build(item_affinity.n_items(), &observed, &weights, |i| {
            item_affinity.row(i)
        })
    }

    /// Build from a precomputed distance block (gamma sweeps). The block
    /// must have been constructed over exactly `group.observed_union()`.
    pub fn from_distance_block(
        group: &Group,
        weights: Vec<f64>,
        block: &DistanceBlock,
        gamma: f64,
        n_items: usize,
    ) -> Result<Self> {
        let union = group.observed_union();
        if block.items() != union.as_slice() {
            return Err(Error::InvalidConfig(
                "distance block does not cover the group's observed items".into(),
            ));
        }
        let observed: Vec<Vec<(ItemId, f64)>> = (0..group.len())
            .map(|m| group.observed(m).to_vec())
            .collect();
        let mut next = 0usize;
        GscoreState::build(n_items, &observed, &weights, |_| {
            let row = block.affinity_row(next, gamma);
            next += 1;
            row
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_members(&self) -> usize {
        self.weights.len()
    }

    pub fn selected(&self) -> &[ItemId] {
        &self.selected
    }

    pub fn is_observed(&self, item: ItemId) -> bool {
        item.0 < self.n_items && self.observed_mask[item.0]
    }

    /// Candidate items: everything neither observed nor selected,
    /// ascending.
    pub fn candidates(&self) -> Vec<ItemId> {
        (0..self.n_items)
            .filter(|&j| !self.observed_mask[j] && !self.selected_mask[j])
            .map(ItemId)
            .collect()
    }

    /// Clear the selection, keeping the cached affinity rows.
    pub fn reset(&mut self) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for &item in &self.selected {
            self.selected_mask[item.0] = false;
        }
        self.selected.clear();
    }

    fn member_term(&self, m: usize, sat: &SaturationSpec, s: impl Fn(usize) -> f64) -> f64 {
        self.obs[m]
            .iter()
            .map(|&(di, r)| r * sat.item_fn.apply(s(di)))
            .sum()
    }

    fn total(&self, sat: &SaturationSpec, s: impl Fn(usize) -> f64 + Copy) -> f64 {
        (0..self.n_members())
            .map(|m| {
                sat.user_fn
                    .apply(m, self.weights[m] * self.member_term(m, sat, s))
            })
            .sum()
    }

    /// The consensus score of the current selection.
    pub fn gscore(&self, sat: &SaturationSpec) -> Result<f64> {
        sat.validate(self.n_members())?;
        for (di, &s) in self.sums.iter().enumerate() {
            if s.is_nan() || s < 0.0 {
                return Err(Error::CorruptState(self.distinct[di]));
            }
        }
        Ok(self.total(sat, |di| self.sums[di]))
    }

    /// Gain of adding candidate `e` to the current selection, computed
    /// from the running sums without mutating the state.
    pub fn marginal_gain(&self, sat: &SaturationSpec, e: ItemId) -> Result<f64> {
        let after = self.score_with(sat, e)?;
        Ok(after - self.total(sat, |di| self.sums[di]))
    }

    /// Score of the current selection plus candidate `e`, without
    /// mutating the state. `score_with(e) - gscore()` equals
    /// [`GscoreState::marginal_gain`]; optimizers scanning many
    /// candidates use this to avoid re-evaluating the unchanged base.
    pub fn score_with(&self, sat: &SaturationSpec, e: ItemId) -> Result<f64> {
        sat.validate(self.n_members())?;
        if e.0 >= self.n_items {
            return Err(Error::ItemOutOfRange(e));
        }
        if self.selected_mask[e.0] || self.observed_mask[e.0] {
            return Err(Error::NotACandidate(e));
        }
        Ok(self.total(sat, |di| self.sums[di] + self.rows[di][e.0]))
    }

    /// Add `e` to the selection and push its affinity into the running
    /// sums.
    pub fn commit(&mut self, e: ItemId) -> Result<()> {
        if e.0 >= self.n_items {
            return Err(Error::ItemOutOfRange(e));
        }
        if self.selected_mask[e.0] {
            return Err(Error::AlreadySelected(e));
        }
        if self.observed_mask[e.0] {
            return Err(Error::NotACandidate(e));
        }
        for (di, s) in self.sums.iter_mut().enumerate() {
            *s += self.rows[di][e.0];
        }
        self.selected_mask[e.0] = true;
        self.selected.push(e);
        Ok(())
    }

    /// Score an explicit subset without touching the current selection.
    pub fn gscore_of(&self, sat: &SaturationSpec, subset: &[ItemId]) -> Result<f64> {
        sat.validate(self.n_members())?;
        let mut mask = vec![false; self.n_items];
        for &e in subset {
            if e.0 >= self.n_items {
                return Err(Error::ItemOutOfRange(e));
            }
            if mask[e.0] || self.observed_mask[e.0] {
                return Err(Error::NotACandidate(e));
            }
            mask[e.0] = true;
        }
        let sums: Vec<f64> = self
            .rows
            .iter()
            .map(|row| subset.iter().map(|&e| row[e.0]).sum())
            .collect();
        Ok(self.total(sat, |di| sums[di]))
    }

    /// Recompute the running sums from the selection, in commit order.
    /// Tests compare this against the incrementally maintained values.
    pub fn recomputed_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| self.selected.iter().map(|&e| row[e.0]).sum())
            .collect()
    }

    /// The incrementally maintained running sums, aligned with
    /// [`GscoreState::distinct_observed`].
    pub fn running_sums(&self) -> &[f64] {
        &self.sums
    }

    /// Distinct observed items, ascending.
    pub fn distinct_observed(&self) -> &[ItemId] {
        &self.distinct
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two members, mutual affinity 1, one observed item each rated 5,
    /// and one candidate fully affine to both observed items.
    fn two_user_instance() -> GscoreState {
        let observed = vec![
            vec![(ItemId(0), 5.0)],
            vec![(ItemId(1), 5.0)],
        ];
        let weights = vec![1.0, 1.0];
        // items 0,1 observed; item 2 the candidate with W = 1 to both
        let rows = [vec![1.0, 0.3, 1.0], vec![0.3, 1.0, 1.0]];
        let mut next = 0;
        GscoreState::build(3, &observed, &weights, |_| {
            let r = rows[next].clone();
            next += 1;
            r
        })
        .unwrap()
    }

    #[test]
    fn empty_selection_scores_zero() {
        let state = two_user_instance();
        assert_eq!(state.gscore(&SaturationSpec::linear()).unwrap(), 0.0);
        assert_eq!(state.gscore(&SaturationSpec::concave()).unwrap(), 0.0);
        assert_eq!(state.gscore(&SaturationSpec::modular()).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_two_user_score() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        // each member: w=1, one item rated 5, s=1 -> 5 ln 2; identity g
        let got = state.gscore(&SaturationSpec::linear()).unwrap();
        let want = 10.0 * 2.0f64.ln();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn hand_evaluated_two_user_score_sqrt() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        let got = state.gscore(&SaturationSpec::concave()).unwrap();
        let want = 2.0 * (5.0 * 2.0f64.ln()).sqrt();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn first_selection_gain_equals_singleton_score() {
        let state = two_user_instance();
        let sat = SaturationSpec::concave();
        let gain = state.marginal_gain(&sat, ItemId(2)).unwrap();
        let single = state.gscore_of(&sat, &[ItemId(2)]).unwrap();
        assert!((gain - single).abs() < 1e-15);
    }

    #[test]
    fn zero_affinity_candidate_gains_nothing() {
        let observed = vec![vec![(ItemId(0), 4.0)]];
        let state = GscoreState::build(3, &observed, &[1.0], |_| vec![1.0, 0.0, 0.7]).unwrap();
        for sat in [SaturationSpec::modular(), SaturationSpec::linear()] {
            assert_eq!(state.marginal_gain(&sat, ItemId(1)).unwrap(), 0.0);
        }
    }

    #[test]
    fn score_with_matches_commit_then_score() {
        let mut state = two_user_instance();
        let sat = SaturationSpec::concave();
        let scored = state.score_with(&sat, ItemId(2)).unwrap();
        state.commit(ItemId(2)).unwrap();
        assert_eq!(scored, state.gscore(&sat).unwrap());
    }

    #[test]
    fn gain_then_commit_changes_score_by_exactly_gain() {
        let mut state = two_user_instance();
        let sat = SaturationSpec::concave();
        let before = state.gscore(&sat).unwrap();
        let delta = state.marginal_gain(&sat, ItemId(2)).unwrap();
        state.commit(ItemId(2)).unwrap();
        let after = state.gscore(&sat).unwrap();
        assert_eq!(after - before, delta);
    }

    #[test]
    fn commit_keeps_running_sums_consistent() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        assert_eq!(state.running_sums(), state.recomputed_sums().as_slice());
        assert_eq!(state.selected(), &[ItemId(2)]);
    }

    #[test]
    fn duplicate_commit_is_an_error() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        assert_eq!(
            state.commit(ItemId(2)).unwrap_err(),
            Error::AlreadySelected(ItemId(2))
        );
        assert_eq!(state.selected().len(), 1);
    }

    #[test]
    fn observed_items_are_not_candidates() {
        let state = two_user_instance();
        let sat = SaturationSpec::linear();
        assert_eq!(
            state.marginal_gain(&sat, ItemId(0)).unwrap_err(),
            Error::NotACandidate(ItemId(0))
        );
        assert_eq!(state.candidates(), vec![ItemId(2)]);
    }

    #[test]
    fn corrupted_sums_are_detected() {
        let observed = vec![vec![(ItemId(0), 4.0)]];
        // a negative affinity row drives the running sum negative
        let mut state =
            GscoreState::build(2, &observed, &[1.0], |_| vec![1.0, -0.5]).unwrap();
        state.commit(ItemId(1)).unwrap();
        assert_eq!(
            state.gscore(&SaturationSpec::linear()).unwrap_err(),
            Error::CorruptState(ItemId(0))
        );
    }

    #[test]
    fn scaled_identity_validates_weights() {
        let state = two_user_instance();
        let bad_len = SaturationSpec {
            item_fn: ItemSaturation::Log1p,
            user_fn: UserSaturation::ScaledIdentity(vec![1.0]),
        };
        assert!(matches!(
            state.gscore(&bad_len),
            Err(Error::InvalidSaturation(_))
        ));
        let bad_sign = SaturationSpec {
            item_fn: ItemSaturation::Log1p,
            user_fn: UserSaturation::ScaledIdentity(vec![1.0, 0.0]),
        };
        assert!(matches!(
            state.gscore(&bad_sign),
            Err(Error::InvalidSaturation(_))
        ));
    }

    #[test]
    fn scaled_identity_divides_member_terms() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        let plain = state
            .gscore(&SaturationSpec::linear())
            .unwrap();
        let scaled = state
            .gscore(&SaturationSpec {
                item_fn: ItemSaturation::Log1p,
                user_fn: UserSaturation::ScaledIdentity(vec![2.0, 2.0]),
            })
            .unwrap();
        assert!((scaled - plain / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reset_restores_empty_selection() {
        let mut state = two_user_instance();
        state.commit(ItemId(2)).unwrap();
        state.reset();
        assert!(state.selected().is_empty());
        assert_eq!(state.gscore(&SaturationSpec::linear()).unwrap(), 0.0);
        assert_eq!(state.candidates(), vec![ItemId(2)]);
    }

    #[test]
    fn singleton_group_reduces_to_personalized_score() {
        // |G| = 1 uses weight 1, so the score is g(sum r f(s))
        let observed = vec![vec![(ItemId(0), 3.0), (ItemId(1), 5.0)]];
        let rows = [vec![1.0, 0.2, 0.9, 0.1], vec![0.2, 1.0, 0.4, 0.6]];
        let mut next = 0;
        let mut state = GscoreState::build(4, &observed, &[1.0], |_| {
            let r = rows[next].clone();
            next += 1;
            r
        })
        .unwrap();
        state.commit(ItemId(2)).unwrap();
        let want = 3.0 * 0.9f64.ln_1p() + 5.0 * 0.4f64.ln_1p();
        let got = state.gscore(&SaturationSpec::linear()).unwrap();
        assert!((got - want).abs() < 1e-12);
    }
}
