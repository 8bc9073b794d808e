//! Score-aggregation and scalarization baselines.
//!
//! These operate on predicted ratings (one per member and candidate) that
//! a factorization produced beforehand, in contrast to the consensus
//! optimizer which never needs predicted scores for unseen items.

use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, Group, ItemId};

/// Predicted ratings for every (member, candidate) pair of one group.
#[derive(Debug, Clone)]
pub struct PredictedScores {
    candidates: Vec<ItemId>,
    // row-major: members x candidates
    scores: Vec<f64>,
    n_members: usize,
}

impl PredictedScores {
    /// Predict `y_u . x_i` for each member and candidate, clamped to the
    /// 1-5 rating scale so pairwise disagreements stay bounded.
    pub fn from_features(
        users: &FeatureMatrix,
        items: &FeatureMatrix,
        group: &Group,
        candidates: Vec<ItemId>,
    ) -> Result<Self> {
        let n_members = group.len();
        let mut scores = Vec::with_capacity(n_members * candidates.len());
        for &u in group.members() {
            if u.0 >= users.rows() {
                return Err(Error::UserOutOfRange(u));
            }
            for &i in &candidates {
                if i.0 >= items.rows() {
                    return Err(Error::ItemOutOfRange(i));
                }
                scores.push(crate::factorization::predict_clamped(users, items, u, i));
            }
        }
        Ok(PredictedScores {
            candidates,
            scores,
            n_members,
        })
    }

    /// Wrap raw per-member score rows (tests, oracle scores).
    pub fn from_rows(candidates: Vec<ItemId>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if rows.iter().any(|r| r.len() != candidates.len()) {
            return Err(Error::InvalidConfig(
                "each score row needs one value per candidate".into(),
            ));
        }
        Ok(PredictedScores {
            candidates,
            n_members: rows.len(),
            scores: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn candidates(&self) -> &[ItemId] {
        &self.candidates
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    fn score(&self, member: usize, candidate_idx: usize) -> f64 {
        self.scores[member * self.candidates.len() + candidate_idx]
    }

    fn column(&self, candidate_idx: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_members).map(move |m| self.score(m, candidate_idx))
    }
}

fn top_k(
    scores: &PredictedScores,
    k: usize,
    value: impl Fn(usize) -> f64,
) -> Result<Vec<(ItemId, f64)>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if scores.candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut order: Vec<(ItemId, f64)> = scores
        .candidates
        .iter()
        .enumerate()
        .map(|(ci, &item)| (item, value(ci)))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order.truncate(k);
    Ok(order)
}

/// Group relevance of one candidate: the sum of member scores.
fn rel(scores: &PredictedScores, ci: usize) -> f64 {
    scores.column(ci).sum()
}

/// Average pairwise absolute disagreement over unordered member pairs;
/// zero for a singleton group.
fn dis(scores: &PredictedScores, ci: usize) -> f64 {
    let g = scores.n_members;
    if g < 2 {
        return 0.0;
    }
    let col: Vec<f64> = scores.column(ci).collect();
    let mut total = 0.0;
    for u in 0..g {
        for v in (u + 1)..g {
            total += (col[u] - col[v]).abs();
        }
    }
    2.0 * total / (g * (g - 1)) as f64
}

/// Top-k candidates by summed member score, descending; ties go to the
/// lowest item id. Each item is returned with its aggregation score.
pub fn average_misery(scores: &PredictedScores, k: usize) -> Result<Vec<(ItemId, f64)>> {
    top_k(scores, k, |ci| rel(scores, ci))
}

/// Top-k by `lambda * rel + (1 - lambda) * (1 - dis)`: relevance traded
/// against average pairwise disagreement.
pub fn fm(scores: &PredictedScores, k: usize, lambda: f64) -> Result<Vec<(ItemId, f64)>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    top_k(scores, k, |ci| {
        lambda * rel(scores, ci) + (1.0 - lambda) * (1.0 - dis(scores, ci))
    })
}

/// Top-k by the group's minimum member score.
pub fn least_misery(scores: &PredictedScores, k: usize) -> Result<Vec<(ItemId, f64)>> {
    top_k(scores, k, |ci| {
        scores.column(ci).fold(f64::INFINITY, f64::min)
    })
}

/// Top-k by the group's maximum member score.
pub fn most_pleasure(scores: &PredictedScores, k: usize) -> Result<Vec<(ItemId, f64)>> {
    top_k(scores, k, |ci| {
        scores.column(ci).fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Top-k by the number of members for whom the candidate attains their
/// personal maximum over the candidate set. A member with tied maxima
/// votes for all of them.
pub fn plurality(scores: &PredictedScores, k: usize) -> Result<Vec<(ItemId, f64)>> {
    if scores.candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let n = scores.candidates.len();
    let mut votes = vec![0usize; n];
    for m in 0..scores.n_members {
        let best = (0..n)
            .map(|ci| scores.score(m, ci))
            .fold(f64::NEG_INFINITY, f64::max);
        for (ci, v) in votes.iter_mut().enumerate() {
            if scores.score(m, ci) == best {
                *v += 1;
            }
        }
    }
    top_k(scores, k, |ci| votes[ci] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(rows: &[Vec<f64>]) -> PredictedScores {
        let n = rows[0].len();
        PredictedScores::from_rows((0..n).map(ItemId).collect(), rows).unwrap()
    }

    fn items(ranked: Vec<(ItemId, f64)>) -> Vec<ItemId> {
        ranked.into_iter().map(|(i, _)| i).collect()
    }

    #[test]
    fn average_misery_breaks_ties_by_lowest_id() {
        // item 0 scores (1,5), item 1 scores (3,3): both rel 6
        let s = scores(&[vec![1.0, 3.0], vec![5.0, 3.0]]);
        assert_eq!(
            items(average_misery(&s, 2).unwrap()),
            vec![ItemId(0), ItemId(1)]
        );
    }

    #[test]
    fn average_misery_prefers_dominating_items() {
        let s = scores(&[vec![5.0, 4.0], vec![5.0, 4.0]]);
        assert_eq!(items(average_misery(&s, 1).unwrap()), vec![ItemId(0)]);
    }

    #[test]
    fn singleton_group_baselines_coincide_with_personal_top_k() {
        let s = scores(&[vec![2.0, 5.0, 3.0, 4.0]]);
        let want = vec![ItemId(1), ItemId(3), ItemId(2)];
        assert_eq!(items(average_misery(&s, 3).unwrap()), want);
        assert_eq!(items(least_misery(&s, 3).unwrap()), want);
        assert_eq!(items(most_pleasure(&s, 3).unwrap()), want);
        assert_eq!(items(plurality(&s, 1).unwrap()), vec![ItemId(1)]);
    }

    #[test]
    fn fm_with_lambda_one_matches_average_misery() {
        let s = scores(&[
            vec![1.0, 3.0, 4.5, 2.2],
            vec![5.0, 3.1, 1.2, 4.4],
            vec![2.5, 2.5, 3.3, 1.0],
        ]);
        assert_eq!(
            items(fm(&s, 4, 1.0).unwrap()),
            items(average_misery(&s, 4).unwrap())
        );
    }

    #[test]
    fn fm_lambda_zero_minimizes_disagreement() {
        // item 0 (3,3): dis 0; item 1 (1,5): dis 4
        let s = scores(&[vec![3.0, 1.0], vec![3.0, 5.0]]);
        assert_eq!(items(fm(&s, 1, 0.0).unwrap()), vec![ItemId(0)]);
    }

    #[test]
    fn pairwise_disagreement_hand_case() {
        let s = scores(&[vec![1.0], vec![5.0]]);
        assert_eq!(dis(&s, 0), 4.0);
    }

    #[test]
    fn disagreement_is_zero_on_agreement_and_never_negative() {
        let s = scores(&[vec![2.0, 1.0], vec![2.0, 4.0], vec![2.0, 2.5]]);
        assert_eq!(dis(&s, 0), 0.0);
        assert!(dis(&s, 1) > 0.0);
    }

    #[test]
    fn fm_rejects_lambda_outside_unit_interval() {
        let s = scores(&[vec![1.0]]);
        assert!(matches!(fm(&s, 1, -0.1), Err(Error::InvalidLambda(_))));
        assert!(matches!(fm(&s, 1, 1.1), Err(Error::InvalidLambda(_))));
    }

    #[test]
    fn fm_on_a_singleton_group_has_no_disagreement_term() {
        let s = scores(&[vec![2.0, 5.0, 3.0]]);
        for ci in 0..3 {
            assert_eq!(dis(&s, ci), 0.0);
        }
        assert_eq!(
            items(fm(&s, 3, 0.7).unwrap()),
            items(average_misery(&s, 3).unwrap())
        );
    }

    #[test]
    fn least_misery_and_most_pleasure_split_on_conflict() {
        // item 0 (1,5), item 1 (3,3)
        let s = scores(&[vec![1.0, 3.0], vec![5.0, 3.0]]);
        assert_eq!(items(least_misery(&s, 1).unwrap()), vec![ItemId(1)]);
        assert_eq!(items(most_pleasure(&s, 1).unwrap()), vec![ItemId(0)]);
    }

    #[test]
    fn plurality_counts_per_member_argmaxes() {
        // item 0 is both members' argmax; item 1 only looks good on average
        let s = scores(&[vec![5.0, 4.9, 1.0], vec![5.0, 4.9, 1.0]]);
        let ranked = plurality(&s, 1).unwrap();
        assert_eq!(ranked, vec![(ItemId(0), 2.0)]);
    }

    #[test]
    fn plurality_counts_ties_for_every_argmax() {
        // member 0 has a tied max on items 0 and 1; member 1 peaks on 1
        let s = scores(&[vec![4.0, 4.0, 1.0], vec![2.0, 5.0, 3.0]]);
        assert_eq!(
            items(plurality(&s, 2).unwrap()),
            vec![ItemId(1), ItemId(0)]
        );
    }

    #[test]
    fn min_mean_max_ordering_holds_per_item() {
        let s = scores(&[
            vec![1.0, 4.0, 2.0],
            vec![5.0, 4.0, 2.5],
            vec![3.0, 3.5, 2.2],
        ]);
        let g = s.n_members() as f64;
        for ci in 0..3 {
            let lm = s.column(ci).fold(f64::INFINITY, f64::min);
            let mp = s.column(ci).fold(f64::NEG_INFINITY, f64::max);
            let mean = rel(&s, ci) / g;
            assert!(lm <= mean && mean <= mp);
        }
    }

    #[test]
    fn empty_candidates_error() {
        let s = PredictedScores::from_rows(vec![], &[vec![]]).unwrap();
        assert!(matches!(average_misery(&s, 1), Err(Error::NoCandidates)));
        assert!(matches!(plurality(&s, 1), Err(Error::NoCandidates)));
    }
}
