//! Fusion scoring, ranking and the discrete weight space.
//!
//! An item's fused score is `Σ_j w_j · ln(1 + s_j)`; the log compresses the
//! scale gap between objectives. Weights come from a per-task grid of bin
//! values, and an action is feasible when its weights sum to one within a
//! tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::types::{FusionAction, ScoreVector};

/// Default cap on `B^k` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Fused score of one item under weight vector `w`.
pub fn fuse_score(s: &ScoreVector, w: &[f64]) -> Result<f64> {
    check_dim("fuse_score weights", s.len(), w.len())?;
    Ok(fuse_unchecked(s.values(), w))
}

#[inline]
pub(crate) fn fuse_unchecked(s: &[f64], w: &[f64]) -> f64 {
    s.iter().zip(w).map(|(&sj, &wj)| wj * sj.ln_1p()).sum()
}

/// Candidates ordered by descending fused score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    /// `order[p]` is the candidate index shown at position `p`.
    pub order: Vec<usize>,
    /// Fused score per candidate, indexed by candidate.
    pub fused_scores: Vec<f64>,
}

impl RankedList {
    /// Builds a list from explicit scores. Ties go to the lower index.
    pub fn from_scores(fused_scores: Vec<f64>) -> Result<Self> {
        if fused_scores.is_empty() {
            return Err(Error::Empty("candidate list"));
        }
        let mut order: Vec<usize> = (0..fused_scores.len()).collect();
        order.sort_by(|&a, &b| {
            fused_scores[b]
                .total_cmp(&fused_scores[a])
                .then_with(|| a.cmp(&b))
        });
        Ok(Self {
            order,
            fused_scores,
        })
    }

    /// A list shown in the given order. Scores are the negated positions.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::Empty("candidate list"));
        }
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPermutation(n));
            }
        }
        let mut fused_scores = vec![0.0; n];
        for (pos, &i) in order.iter().enumerate() {
            fused_scores[i] = -(pos as f64);
        }
        Ok(Self {
            order,
            fused_scores,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Values indexed by candidate, re-read in display order.
    pub fn reorder<T: Copy>(&self, per_candidate: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| per_candidate[i]).collect()
    }
}

/// Ranks candidates by fused score under a shared weight vector.
pub fn rank(candidates: &[ScoreVector], w: &[f64]) -> Result<RankedList> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let scores = candidates
        .iter()
        .map(|s| fuse_score(s, w))
        .collect::<Result<Vec<_>>>()?;
    RankedList::from_scores(scores)
}

/// Per-task bins, bounds and the feasibility tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    bins: Vec<Vec<f64>>,
    bounds: Vec<(f64, f64)>,
    tolerance: f64,
}

impl ActionSpace {
    pub fn new(bins: Vec<Vec<f64>>, bounds: Vec<(f64, f64)>, tolerance: f64) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Empty("action space"));
        }
        check_dim("action space bounds", bins.len(), bounds.len())?;
        if !(tolerance > 0.0) {
            return Err(Error::invalid("xi", tolerance, "> 0"));
        }
        let width = bins[0].len();
        if width == 0 {
            return Err(Error::Empty("bin list"));
        }
        for (j, (task_bins, &(lo, hi))) in bins.iter().zip(&bounds).enumerate() {
            check_dim("bins per task", width, task_bins.len())?;
            if !(lo <= hi) {
                return Err(Error::invalid(format!("bounds[{j}]"), format!("({lo}, {hi})"), "min <= max"));
            }
            for pair in task_bins.windows(2) {
                if !(pair[0] < pair[1]) {
                    return Err(Error::invalid(
                        format!("bins[{j}]"),
                        format!("{task_bins:?}"),
                        "strictly ascending",
                    ));
                }
            }
            if task_bins.iter().any(|&b| b < lo || b > hi) {
                return Err(Error::invalid(
                    format!("bins[{j}]"),
                    format!("{task_bins:?}"),
                    format!("within [{lo}, {hi}]"),
                ));
            }
        }
        Ok(Self {
            bins,
            bounds,
            tolerance,
        })
    }

    /// `count` evenly spaced bins spanning `[min, max]` for each of `tasks`.
    pub fn uniform_grid(tasks: usize, min: f64, max: f64, count: usize, tolerance: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Empty("bin list"));
        }
        let grid: Vec<f64> = if count == 1 {
            vec![min]
        } else {
            (0..count)
                .map(|b| min + (max - min) * b as f64 / (count - 1) as f64)
                .collect()
        };
        Self::new(vec![grid; tasks], vec![(min, max); tasks], tolerance)
    }

    pub fn tasks(&self) -> usize {
        self.bins.len()
    }

    pub fn bins_per_task(&self) -> usize {
        self.bins[0].len()
    }

    pub fn bins(&self) -> &[Vec<f64>] {
        &self.bins
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Resolves bin indices into an action.
    pub fn action(&self, bin_indices: Vec<usize>) -> Result<FusionAction> {
        check_dim("action bin indices", self.tasks(), bin_indices.len())?;
        let weights = bin_indices
            .iter()
            .enumerate()
            .map(|(task, &index)| {
                self.bins[task].get(index).copied().ok_or(Error::BinOutOfRange {
                    task,
                    index,
                    bins: self.bins_per_task(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FusionAction {
            bin_indices,
            weights,
        })
    }

    /// The action whose weights are closest to `target` per task.
    pub fn nearest(&self, target: &[f64]) -> Result<FusionAction> {
        check_dim("nearest target", self.tasks(), target.len())?;
        let idx = self
            .bins
            .iter()
            .zip(target)
            .map(|(bins, &t)| {
                let mut best = 0;
                for (b, v) in bins.iter().enumerate() {
                    if (v - t).abs() < (bins[best] - t).abs() {
                        best = b;
                    }
                }
                best
            })
            .collect();
        self.action(idx)
    }
}

/// True iff `|Σ w − 1| ≤ ξ`.
pub fn is_feasible(a: &FusionAction, xi: f64) -> bool {
    (a.weight_sum() - 1.0).abs() <= xi
}

/// All feasible actions in lexicographic bin-index order.
pub fn enumerate_feasible(space: &ActionSpace) -> Result<Vec<FusionAction>> {
    enumerate_feasible_capped(space, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_feasible_capped(space: &ActionSpace, cap: u128) -> Result<Vec<FusionAction>> {
    let k = space.tasks();
    let b = space.bins_per_task();
    let required = (b as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let action = space.action(idx.clone())?;
        if is_feasible(&action, space.tolerance()) {
            out.push(action);
        }
        // Odometer increment, last task fastest.
        let mut pos = k;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < b {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_scores_fuse_to_zero() {
        assert_eq!(fuse_score(&sv(&[0.0, 0.0, 0.0]), &[0.3, 5.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn fuse_matches_direct_evaluation() {
        // 0.5·ln 2 + 0.5·ln 4 = 1.5·ln 2
        let expected = 1.039_720_770_839_917_9;
        let got = fuse_score(&sv(&[1.0, 3.0]), &[0.5, 0.5]).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got}");
    }

    #[test]
    fn fuse_dimension_mismatch() {
        assert!(matches!(
            fuse_score(&sv(&[1.0, 2.0]), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn one_hot_weight_ranks_by_that_task() {
        let mut rng = SeededRng::new(4);
        let cands: Vec<ScoreVector> = (0..12)
            .map(|_| sv(&[rng.uniform() * 10.0, rng.uniform(), rng.uniform() * 100.0]))
            .collect();
        let list = rank(&cands, &[0.0, 1.0, 0.0]).unwrap();
        let mut by_task: Vec<usize> = (0..12).collect();
        by_task.sort_by(|&a, &b| cands[b].values()[1].total_cmp(&cands[a].values()[1]));
        assert_eq!(list.order, by_task);
    }

    #[test]
    fn rank_edge_cases() {
        assert_eq!(rank(&[sv(&[1.0])], &[1.0]).unwrap().order, vec![0]);
        let same = sv(&[2.0, 3.0]);
        assert_eq!(rank(&[same.clone(), same], &[0.5, 0.5]).unwrap().order, vec![0, 1]);
        assert!(matches!(rank(&[], &[1.0]), Err(Error::Empty(_))));
    }

    #[test]
    fn rank_matches_brute_force_sort() {
        let mut rng = SeededRng::new(11);
        for _ in 0..50 {
            let cands: Vec<ScoreVector> = (0..5)
                .map(|_| sv(&[rng.uniform() * 3.0, rng.uniform() * 30.0]))
                .collect();
            let w = [rng.uniform(), rng.uniform()];
            let list = rank(&cands, &w).unwrap();
            // Selection sort over independently computed scores.
            let scores: Vec<f64> = cands
                .iter()
                .map(|c| w[0] * (1.0 + c.values()[0]).ln() + w[1] * (1.0 + c.values()[1]).ln())
                .collect();
            let mut remaining: Vec<usize> = (0..5).collect();
            let mut oracle = Vec::new();
            while !remaining.is_empty() {
                let mut best = 0;
                for (p, &i) in remaining.iter().enumerate() {
                    if scores[i] > scores[remaining[best]] {
                        best = p;
                    }
                }
                oracle.push(remaining.remove(best));
            }
            assert_eq!(list.order, oracle);
        }
    }

    #[test]
    fn enumerate_three_bin_example() {
        let space = ActionSpace::uniform_grid(2, 0.0, 1.0, 3, 0.01).unwrap();
        let feasible: Vec<Vec<f64>> = enumerate_feasible(&space)
            .unwrap()
            .into_iter()
            .map(|a| a.weights)
            .collect();
        assert_eq!(feasible, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
    }

    #[test]
    fn enumerate_vacuous_and_single() {
        let space = ActionSpace::uniform_grid(3, 0.0, 1.0, 4, 3.0).unwrap();
        assert_eq!(enumerate_feasible(&space).unwrap().len(), 64);
        let single = ActionSpace::new(vec![vec![1.0]], vec![(0.0, 1.0)], 0.01).unwrap();
        let all = enumerate_feasible(&single).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].weights, vec![1.0]);
    }

    #[test]
    fn enumerate_respects_cap() {
        let space = ActionSpace::uniform_grid(4, 0.0, 1.0, 10, 0.01).unwrap();
        assert!(matches!(
            enumerate_feasible_capped(&space, 9_999),
            Err(Error::EnumerationCap { required: 10_000, .. })
        ));
    }

    #[test]
    fn feasibility_boundaries() {
        let a = |w: Vec<f64>| FusionAction {
            bin_indices: vec![0; w.len()],
            weights: w,
        };
        assert!(is_feasible(&a(vec![0.25, 0.75]), 0.01));
        assert!(!is_feasible(&a(vec![0.6, 0.6]), 0.01));
        // 0.75 + 0.375 = 1.125 exactly, so the sum sits on the boundary 1 + ξ.
        assert!(is_feasible(&a(vec![0.75, 0.375]), 0.125));
        assert!(is_feasible(&a(vec![0.5, 0.375]), 0.125));
        assert!(!is_feasible(&a(vec![0.75, 0.5]), 0.125));
    }

    #[test]
    fn action_space_validation() {
        assert!(ActionSpace::new(vec![vec![0.5, 0.2]], vec![(0.0, 1.0)], 0.01).is_err());
        assert!(ActionSpace::new(vec![vec![0.5, 1.2]], vec![(0.0, 1.0)], 0.01).is_err());
        assert!(ActionSpace::new(vec![vec![0.5], vec![0.1, 0.2]], vec![(0.0, 1.0); 2], 0.01).is_err());
        assert!(ActionSpace::new(vec![vec![0.5]], vec![(0.0, 1.0)], 0.0).is_err());
        let space = ActionSpace::uniform_grid(2, 0.0, 1.0, 3, 0.01).unwrap();
        assert!(matches!(space.action(vec![0, 3]), Err(Error::BinOutOfRange { task: 1, .. })));
    }

    proptest! {
        #[test]
        fn scaling_a_score_never_lowers_fused_score(
            s in prop::collection::vec(0.0f64..100.0, 3),
            w in prop::collection::vec(0.0f64..1.0, 3),
            j in 0usize..3,
            factor in 1.0f64..50.0,
        ) {
            let before = fuse_score(&sv(&s), &w).unwrap();
            let mut t = s.clone();
            t[j] *= factor;
            let after = fuse_score(&sv(&t), &w).unwrap();
            prop_assert!(after >= before);
        }

        #[test]
        fn permuting_candidates_permutes_order(
            raw in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 2), 2..8),
            w in prop::collection::vec(0.0f64..1.0, 2),
            seed in any::<u64>(),
        ) {
            let cands: Vec<ScoreVector> = raw.iter().map(|v| sv(v)).collect();
            let n = cands.len();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = SeededRng::new(seed);
            for i in (1..n).rev() {
                perm.swap(i, rng.below(i + 1));
            }
            let permuted: Vec<ScoreVector> = perm.iter().map(|&i| cands[i].clone()).collect();
            let base = rank(&cands, &w).unwrap();
            let moved = rank(&permuted, &w).unwrap();
            let scores_base: Vec<f64> = base.order.iter().map(|&i| base.fused_scores[i]).collect();
            let scores_moved: Vec<f64> = moved.order.iter().map(|&i| moved.fused_scores[i]).collect();
            prop_assert_eq!(scores_base, scores_moved);
            let distinct = {
                let mut v = base.fused_scores.clone();
                v.sort_by(f64::total_cmp);
                v.windows(2).all(|p| p[0] != p[1])
            };
            if distinct {
                let mapped: Vec<usize> = moved.order.iter().map(|&i| perm[i]).collect();
                prop_assert_eq!(mapped, base.order);
            }
        }

        #[test]
        fn enumeration_is_closed_under_feasibility(
            k in 1usize..4, b in 1usize..6, xi in 0.001f64..0.5,
        ) {
            let space = ActionSpace::uniform_grid(k, 0.0, 1.0, b, xi).unwrap();
            let feasible = enumerate_feasible(&space).unwrap();
            prop_assert!(feasible.iter().all(|a| is_feasible(a, xi)));
            let total = b.pow(k as u32);
            let mut count = 0;
            for code in 0..total {
                let mut idx = vec![0; k];
                let mut c = code;
                for slot in idx.iter_mut().rev() {
                    *slot = c % b;
                    c /= b;
                }
                let a = space.action(idx).unwrap();
                if is_feasible(&a, xi) {
                    prop_assert_eq!(&feasible[count], &a);
                    count += 1;
                }
            }
            prop_assert_eq!(count, feasible.len());
        }
    }
}
