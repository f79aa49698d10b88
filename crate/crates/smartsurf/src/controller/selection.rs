//! Multi-cell element-path assignment.
//!
//! Every element exposes two independently filterable paths; each path is
//! dedicated to at most one eNB. Assignment starts balanced and random and
//! then improves by greedy pairwise swaps: once every eNB's phase search
//! has converged, the controller sums the converged per-eNB metrics, swaps
//! a small fraction of paths between eNBs, re-runs the searches, and keeps
//! the swap only if the summed metric improved.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Path-to-eNB map; index = element * 2 + path slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    per_path: Vec<Option<usize>>,
}

impl Assignment {
    /// Balanced random assignment of `n_paths` paths across `enb_ids`.
    /// Counts differ by at most one.
    pub fn balanced_random<R: Rng + ?Sized>(
        n_paths: usize,
        enb_ids: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if enb_ids.is_empty() {
            return Err(Error::Domain("no eNBs to assign paths to".into()));
        }
        let mut pool: Vec<usize> = (0..n_paths).map(|i| enb_ids[i % enb_ids.len()]).collect();
        pool.shuffle(rng);
        Ok(Self {
            per_path: pool.into_iter().map(Some).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.per_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_path.is_empty()
    }

    pub fn owner(&self, path: usize) -> Option<usize> {
        self.per_path[path]
    }

    /// Paths owned by an eNB, ascending.
    pub fn paths_of(&self, enb_id: usize) -> Vec<usize> {
        self.per_path
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(enb_id))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut c = BTreeMap::new();
        for o in self.per_path.iter().flatten() {
            *c.entry(*o).or_insert(0) += 1;
        }
        c
    }

    /// Swap the owners of two paths.
    pub fn swap(&mut self, a: usize, b: usize) {
        self.per_path.swap(a, b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    /// First round, or the pending swap improved and was kept.
    Kept,
    /// The pending swap regressed and was undone.
    Reverted,
    /// Fewer than two eNBs: nothing to swap.
    Degenerate,
}

/// Greedy swap search over assignments.
#[derive(Debug, Clone)]
pub struct GreedySelection {
    pub current: Assignment,
    best: Assignment,
    best_metric: Option<f64>,
    swap_frac: f64,
}

impl GreedySelection {
    pub fn new(initial: Assignment, swap_frac: f64) -> Self {
        Self {
            best: initial.clone(),
            current: initial,
            best_metric: None,
            swap_frac,
        }
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best_metric
    }

    /// One selection round. `converged_metrics` holds each eNB's converged
    /// metric under `current`. Keeps or reverts the last proposal, then
    /// proposes the next assignment (already installed in `current`).
    pub fn round<R: Rng + ?Sized>(
        &mut self,
        converged_metrics: &BTreeMap<usize, f64>,
        rng: &mut R,
    ) -> RoundOutcome {
        let total: f64 = converged_metrics.values().sum();
        let outcome = match self.best_metric {
            Some(best) if total <= best => {
                self.current = self.best.clone();
                RoundOutcome::Reverted
            }
            _ => {
                self.best_metric = Some(total);
                self.best = self.current.clone();
                RoundOutcome::Kept
            }
        };
        let enbs: Vec<usize> = self.best.counts().keys().copied().collect();
        if enbs.len() < 2 {
            return RoundOutcome::Degenerate;
        }
        let swaps = ((self.best.len() as f64 * self.swap_frac).round() as usize).max(1);
        let mut next = self.best.clone();
        for _ in 0..swaps {
            // Pick two distinct eNBs with at least one path each and swap
            // one random path of each.
            let a = enbs[rng.gen_range(0..enbs.len())];
            let b = loop {
                let c = enbs[rng.gen_range(0..enbs.len())];
                if c != a {
                    break c;
                }
            };
            let pa = next.paths_of(a);
            let pb = next.paths_of(b);
            if pa.is_empty() || pb.is_empty() {
                continue;
            }
            let i = pa[rng.gen_range(0..pa.len())];
            let j = pb[rng.gen_range(0..pb.len())];
            next.swap(i, j);
        }
        self.current = next;
        outcome
    }

    /// Restart from a fresh balanced random assignment (e.g. when the set
    /// of active eNBs changes).
    pub fn reinitialize<R: Rng + ?Sized>(
        &mut self,
        n_paths: usize,
        enb_ids: &[usize],
        rng: &mut R,
    ) -> Result<()> {
        self.current = Assignment::balanced_random(n_paths, enb_ids, rng)?;
        self.best = self.current.clone();
        self.best_metric = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn balanced_counts_differ_by_at_most_one() {
        let mut rng = stream(1, "sel");
        for n_paths in [4usize, 7, 32, 33] {
            for ids in [vec![0usize, 1], vec![3, 5, 9]] {
                let a = Assignment::balanced_random(n_paths, &ids, &mut rng).unwrap();
                let counts = a.counts();
                let min = counts.values().min().unwrap();
                let max = counts.values().max().unwrap();
                assert!(max - min <= 1, "{counts:?}");
                assert_eq!(counts.values().sum::<usize>(), n_paths);
            }
        }
        assert!(Assignment::balanced_random(4, &[], &mut rng).is_err());
    }

    #[test]
    fn swaps_preserve_counts() {
        let mut rng = stream(2, "sel");
        let a = Assignment::balanced_random(32, &[0, 1, 2], &mut rng).unwrap();
        let counts = a.counts();
        let mut sel = GreedySelection::new(a, 0.1);
        let mut metrics = BTreeMap::new();
        metrics.insert(0, 1.0);
        metrics.insert(1, 1.0);
        metrics.insert(2, 1.0);
        for _ in 0..50 {
            sel.round(&metrics, &mut rng);
            assert_eq!(sel.current.counts(), counts);
        }
    }

    #[test]
    fn regressing_swap_is_reverted() {
        let mut rng = stream(3, "sel");
        let a = Assignment::balanced_random(8, &[0, 1], &mut rng).unwrap();
        let mut sel = GreedySelection::new(a.clone(), 0.25);
        let mut good = BTreeMap::new();
        good.insert(0, 2.0);
        good.insert(1, 2.0);
        assert_eq!(sel.round(&good, &mut rng), RoundOutcome::Kept);
        let best_after_first = sel.best.clone();
        let mut bad = BTreeMap::new();
        bad.insert(0, 1.0);
        bad.insert(1, 1.0);
        assert_eq!(sel.round(&bad, &mut rng), RoundOutcome::Reverted);
        assert_eq!(sel.best, best_after_first);
        assert_eq!(sel.best_metric(), Some(4.0));
    }

    #[test]
    fn improving_swap_is_kept() {
        let mut rng = stream(4, "sel");
        let a = Assignment::balanced_random(8, &[0, 1], &mut rng).unwrap();
        let mut sel = GreedySelection::new(a, 0.25);
        let m = |v: f64| {
            let mut m = BTreeMap::new();
            m.insert(0, v);
            m.insert(1, v);
            m
        };
        sel.round(&m(1.0), &mut rng);
        let proposed = sel.current.clone();
        assert_eq!(sel.round(&m(3.0), &mut rng), RoundOutcome::Kept);
        assert_eq!(sel.best, proposed);
        assert_eq!(sel.best_metric(), Some(6.0));
    }

    #[test]
    fn single_enb_is_degenerate() {
        let mut rng = stream(5, "sel");
        let a = Assignment::balanced_random(8, &[0], &mut rng).unwrap();
        let mut sel = GreedySelection::new(a.clone(), 0.25);
        let mut m = BTreeMap::new();
        m.insert(0, 1.0);
        assert_eq!(sel.round(&m, &mut rng), RoundOutcome::Degenerate);
        assert_eq!(sel.current, a, "assignment unchanged");
    }

    #[test]
    fn reinitialize_resets_best() {
        let mut rng = stream(6, "sel");
        let a = Assignment::balanced_random(8, &[0, 1], &mut rng).unwrap();
        let mut sel = GreedySelection::new(a, 0.25);
        let mut m = BTreeMap::new();
        m.insert(0, 1.0);
        m.insert(1, 1.0);
        sel.round(&m, &mut rng);
        assert!(sel.best_metric().is_some());
        sel.reinitialize(8, &[0, 1, 2], &mut rng).unwrap();
        assert!(sel.best_metric().is_none());
        assert_eq!(sel.current.counts().len(), 3);
    }
}
