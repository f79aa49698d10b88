//! Control plane: DCI-derived metrics, blind phase search, TDD time
//! synchronization, per-entity phase scheduling and multi-cell path
//! assignment.

pub mod beamform;
pub mod runloop;
pub mod schedule;
pub mod selection;
pub mod sync;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::sim::DciRecord;
use crate::{Error, Result};

/// Tunables of the control loop; defaults match a small indoor deployment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// Metric window length, subframes.
    pub n_sf: usize,
    /// Non-improving evaluations before a forced re-measure of the stored
    /// maximum.
    pub n_nf: u32,
    /// Channel-change margin on the stored maximum, metric units.
    pub epsilon: f64,
    /// Per-element perturbation probability.
    pub perturb_prob: f64,
    /// Evaluations without a new maximum before an eNB is considered
    /// converged.
    pub plateau: u32,
    /// Fraction of paths swapped per element-selection round.
    pub swap_frac: f64,
    /// RSRP step treated as a surface-induced glitch, dB.
    pub sync_threshold_db: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            n_sf: 20,
            n_nf: 8,
            epsilon: 0.185,
            perturb_prob: 0.25,
            plateau: 50,
            swap_frac: 0.05,
            sync_threshold_db: 1.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_sf == 0 {
            return Err(Error::Domain("n_sf must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.perturb_prob) || self.perturb_prob == 0.0 {
            return Err(Error::Domain(format!(
                "perturb_prob {} must be in (0, 1]",
                self.perturb_prob
            )));
        }
        if self.epsilon < 0.0 || self.sync_threshold_db <= 0.0 {
            return Err(Error::Domain("epsilon/sync_threshold_db out of range".into()));
        }
        if !(0.0..=1.0).contains(&self.swap_frac) {
            return Err(Error::Domain(format!(
                "swap_frac {} must be in [0, 1]",
                self.swap_frac
            )));
        }
        Ok(())
    }
}

/// Sliding window over the last `n_sf` subframes of decoded downlink DCI
/// for one eNB. Each slot holds the records observed in that subframe.
#[derive(Debug, Clone)]
pub struct MetricWindow {
    n_sf: usize,
    slots: VecDeque<Vec<(usize, f64, u32)>>,
}

impl MetricWindow {
    pub fn new(n_sf: usize) -> Self {
        Self {
            n_sf,
            slots: VecDeque::with_capacity(n_sf),
        }
    }

    /// Record one subframe's worth of decoded downlink records.
    pub fn push_subframe(&mut self, records: &[&DciRecord]) {
        self.push_subframe_raw(
            &records
                .iter()
                .map(|r| (r.ue_id, r.rate(), r.n_prb))
                .collect::<Vec<_>>(),
        );
    }

    /// Record one subframe as raw `(ue_id, rate, n_prb)` entries.
    pub fn push_subframe_raw(&mut self, entries: &[(usize, f64, u32)]) {
        if self.slots.len() == self.n_sf {
            self.slots.pop_front();
        }
        self.slots.push_back(entries.to_vec());
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.n_sf
    }

    fn per_ue(&self) -> BTreeMap<usize, (f64, u64, u64)> {
        // ue -> (sum rate, count, sum prb)
        let mut acc: BTreeMap<usize, (f64, u64, u64)> = BTreeMap::new();
        for slot in &self.slots {
            for &(ue, rate, prb) in slot {
                let e = acc.entry(ue).or_insert((0.0, 0, 0));
                e.0 += rate;
                e.1 += 1;
                e.2 += prb as u64;
            }
        }
        acc
    }

    /// Mean of the rate field over the subframes in which the UE was
    /// actually scheduled.
    pub fn avg_rate(&self, ue_id: usize) -> Result<f64> {
        match self.per_ue().get(&ue_id) {
            Some(&(sum, count, _)) if count > 0 => Ok(sum / count as f64),
            _ => Err(Error::EmptyMetric),
        }
    }

    /// Single-UE objective: the windowed average rate of that UE.
    pub fn metric_single(&self, ue_id: usize) -> Result<f64> {
        self.avg_rate(ue_id)
    }

    /// Multi-UE objective: PRB-weighted mean of per-UE average rates.
    /// Collapses exactly (no weighting round-off) to the per-UE average
    /// when only one UE is present.
    pub fn metric_multi(&self) -> Result<f64> {
        let acc = self.per_ue();
        let active: Vec<_> = acc
            .into_iter()
            .filter(|(_, (_, count, prb))| *count > 0 && *prb > 0)
            .collect();
        match active.as_slice() {
            [] => Err(Error::EmptyMetric),
            [(_, (sum, count, _))] => Ok(sum / *count as f64),
            _ => {
                let mut num = 0.0;
                let mut den = 0.0;
                for (_, (sum, count, prb)) in &active {
                    num += (sum / *count as f64) * *prb as f64;
                    den += *prb as f64;
                }
                Ok(num / den)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Direction;
    use crate::tdd::SubframeClock;
    use approx::assert_abs_diff_eq;

    fn rec(ue_id: usize, rate_index: u8, n_prb: u32) -> DciRecord {
        DciRecord {
            timestamp: SubframeClock::default(),
            enb_id: 0,
            ue_id,
            direction: Direction::Dl,
            rate_index,
            n_prb,
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let w = MetricWindow::new(8);
        assert!(matches!(w.avg_rate(0), Err(Error::EmptyMetric)));
        assert!(matches!(w.metric_multi(), Err(Error::EmptyMetric)));
    }

    #[test]
    fn avg_rate_divides_by_scheduled_count() {
        let mut w = MetricWindow::new(10);
        // UE 0 scheduled in 4 of 10 subframes at index 10 (rate 3.70).
        for i in 0..10 {
            if i % 3 == 0 {
                w.push_subframe(&[&rec(0, 10, 20)]);
            } else {
                w.push_subframe(&[]);
            }
        }
        let r = w.avg_rate(0).unwrap();
        assert_abs_diff_eq!(r, 10.0 * crate::sim::RATE_STEP, epsilon = 1e-12);
    }

    #[test]
    fn metric_multi_worked_example() {
        // Two UEs: averages 4.0 on 10 PRB and 2.0 on 30 PRB -> 2.5.
        // Rate indices cannot hit 4.0 / 2.0 exactly on the 0.37 grid, so
        // feed the window synthetic per-subframe slots via raw tuples.
        let mut w = MetricWindow::new(4);
        w.slots.push_back(vec![(1, 4.0, 5), (2, 2.0, 15)]);
        w.slots.push_back(vec![(1, 4.0, 5), (2, 2.0, 15)]);
        let m = w.metric_multi().unwrap();
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn single_ue_multi_equals_single() {
        let mut w = MetricWindow::new(6);
        for idx in [3u8, 5, 7] {
            w.push_subframe(&[&rec(7, idx, 40)]);
        }
        assert_abs_diff_eq!(
            w.metric_multi().unwrap(),
            w.metric_single(7).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn window_evicts_old_subframes() {
        let mut w = MetricWindow::new(3);
        w.push_subframe(&[&rec(0, 15, 10)]);
        for _ in 0..3 {
            w.push_subframe(&[&rec(0, 1, 10)]);
        }
        // The index-15 record fell out.
        assert_abs_diff_eq!(
            w.avg_rate(0).unwrap(),
            crate::sim::RATE_STEP,
            epsilon = 1e-12
        );
        assert!(w.is_full());
        w.clear();
        assert!(w.avg_rate(0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ControllerParams::default().validate().is_ok());
        let mut p = ControllerParams::default();
        p.perturb_prob = 0.0;
        assert!(p.validate().is_err());
        let mut p = ControllerParams::default();
        p.n_sf = 0;
        assert!(p.validate().is_err());
        let mut p = ControllerParams::default();
        p.swap_frac = 1.5;
        assert!(p.validate().is_err());
    }
}
