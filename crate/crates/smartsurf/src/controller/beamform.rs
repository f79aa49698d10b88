//! Blind greedy phase search over the quantized shifter settings.
//!
//! The search never observes the channel directly: it perturbs the phase
//! vector, watches the windowed rate metric, keeps the perturbation only if
//! the metric improved, and otherwise reverts to the best vector seen. A
//! sustained run of non-improvements triggers a fresh re-measure of the
//! stored maximum so that a changed channel (stale maximum) is detected and
//! the search restarts.

use rand::Rng;

use crate::linkbudget::PhaseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Improved,
    Reverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelVerdict {
    Unchanged,
    Changed,
}

#[derive(Debug, Clone)]
pub struct BeamformState {
    /// Vector currently applied to the surface.
    pub theta: PhaseVector,
    /// Best vector observed so far.
    pub best_theta: PhaseVector,
    /// Metric achieved by `best_theta`; `None` right after a (re)start.
    pub m_max: Option<f64>,
    pub negative_streak: u32,
    pub iterations: u64,
}

impl BeamformState {
    pub fn new(k: usize) -> Self {
        let zero = PhaseVector::zeros(k);
        Self {
            theta: zero.clone(),
            best_theta: zero,
            m_max: None,
            negative_streak: 0,
            iterations: 0,
        }
    }

    pub fn from_theta(theta: PhaseVector) -> Self {
        Self {
            best_theta: theta.clone(),
            theta,
            m_max: None,
            negative_streak: 0,
            iterations: 0,
        }
    }

    /// Restart the search from the currently applied vector, forgetting the
    /// stored maximum.
    pub fn reset(&mut self) {
        self.best_theta = self.theta.clone();
        self.m_max = None;
        self.negative_streak = 0;
    }
}

/// Draw a sparse perturbation: each element independently shifts by one
/// quantization step up or down with probability `p`; the all-zero draw is
/// rejected and redrawn so every perturbation moves.
pub fn draw_perturbation<R: Rng + ?Sized>(k: usize, p: f64, rng: &mut R) -> Vec<i8> {
    loop {
        let delta: Vec<i8> = (0..k)
            .map(|_| {
                if rng.gen_bool(p) {
                    if rng.gen_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                }
            })
            .collect();
        if delta.iter().any(|&d| d != 0) {
            return delta;
        }
    }
}

/// One iteration of the greedy search: fold in the metric observed under
/// the currently applied `theta`, then propose the next vector to apply.
pub fn beamform_step<R: Rng + ?Sized>(
    state: &mut BeamformState,
    observed_m: f64,
    perturb_prob: f64,
    rng: &mut R,
) -> StepOutcome {
    state.iterations += 1;
    let outcome = match state.m_max {
        Some(best) if observed_m <= best => {
            state.negative_streak += 1;
            state.theta = state.best_theta.clone();
            StepOutcome::Reverted
        }
        _ => {
            state.m_max = Some(observed_m);
            state.best_theta = state.theta.clone();
            state.negative_streak = 0;
            StepOutcome::Improved
        }
    };
    let delta = draw_perturbation(state.best_theta.len(), perturb_prob, rng);
    state.theta = state.best_theta.shifted(&delta);
    outcome
}

/// After `n_nf` consecutive non-improvements the controller re-applies
/// `best_theta` and re-measures. Feed that fresh measurement here: a value
/// more than `epsilon` below the stored maximum means the channel moved,
/// and the state restarts from the current vector.
pub fn detect_channel_change(
    state: &mut BeamformState,
    m_new: f64,
    epsilon: f64,
) -> ChannelVerdict {
    match state.m_max {
        Some(best) if m_new < best - epsilon => {
            state.theta = state.best_theta.clone();
            state.reset();
            ChannelVerdict::Changed
        }
        _ => {
            // Plateau of a still-valid maximum: refresh it with the new
            // measurement and keep searching.
            if let Some(best) = state.m_max {
                state.m_max = Some(best.max(m_new));
            }
            state.negative_streak = 0;
            ChannelVerdict::Unchanged
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn first_observation_becomes_maximum() {
        let mut st = BeamformState::new(4);
        let mut rng = stream(1, "bf");
        let out = beamform_step(&mut st, 1.5, 0.25, &mut rng);
        assert_eq!(out, StepOutcome::Improved);
        assert_eq!(st.m_max, Some(1.5));
        assert_eq!(st.negative_streak, 0);
    }

    #[test]
    fn non_improvement_reverts_to_best() {
        let mut st = BeamformState::new(8);
        let mut rng = stream(2, "bf");
        beamform_step(&mut st, 2.0, 0.25, &mut rng);
        let best = st.best_theta.clone();
        let proposed = st.theta.clone();
        assert_ne!(best, proposed, "a perturbation must move");
        beamform_step(&mut st, 1.9, 0.25, &mut rng);
        assert_eq!(st.best_theta, best, "best kept");
        assert_eq!(st.m_max, Some(2.0));
        assert_eq!(st.negative_streak, 1);
    }

    #[test]
    fn ties_do_not_replace_maximum() {
        let mut st = BeamformState::new(8);
        let mut rng = stream(3, "bf");
        beamform_step(&mut st, 2.0, 0.25, &mut rng);
        let out = beamform_step(&mut st, 2.0, 0.25, &mut rng);
        assert_eq!(out, StepOutcome::Reverted);
        assert_eq!(st.negative_streak, 1);
    }

    #[test]
    fn maximum_never_decreases_under_greedy_steps() {
        let mut st = BeamformState::new(16);
        let mut rng = stream(4, "bf");
        let mut prev = f64::NEG_INFINITY;
        // Pseudo-random noisy metric stream.
        let mut mrng = stream(5, "metric");
        for _ in 0..500 {
            let m: f64 = mrng.gen_range(0.0..5.55);
            beamform_step(&mut st, m, 0.25, &mut rng);
            let cur = st.m_max.unwrap();
            assert!(cur >= prev, "stored maximum regressed");
            prev = cur;
        }
    }

    #[test]
    fn perturbation_statistics() {
        let mut rng = stream(6, "delta");
        let k = 64;
        let trials = 2000;
        let mut nonzero = 0usize;
        for _ in 0..trials {
            let d = draw_perturbation(k, 0.25, &mut rng);
            assert!(d.iter().any(|&x| x != 0));
            assert!(d.iter().all(|&x| (-1..=1).contains(&x)));
            nonzero += d.iter().filter(|&&x| x != 0).count();
        }
        let frac = nonzero as f64 / (trials * k) as f64;
        assert!((frac - 0.25).abs() < 0.02, "perturb fraction {frac}");
    }

    #[test]
    fn channel_change_resets_state() {
        let mut st = BeamformState::new(4);
        let mut rng = stream(7, "bf");
        beamform_step(&mut st, 3.0, 0.25, &mut rng);
        for _ in 0..8 {
            beamform_step(&mut st, 2.5, 0.25, &mut rng);
        }
        assert_eq!(st.negative_streak, 8);
        // Fresh re-measure far below the maximum: channel moved.
        let v = detect_channel_change(&mut st, 1.0, 0.185);
        assert_eq!(v, ChannelVerdict::Changed);
        assert_eq!(st.m_max, None);
        assert_eq!(st.negative_streak, 0);
        assert_eq!(st.theta, st.best_theta);
    }

    #[test]
    fn plateau_without_change_keeps_maximum() {
        let mut st = BeamformState::new(4);
        let mut rng = stream(8, "bf");
        beamform_step(&mut st, 3.0, 0.25, &mut rng);
        st.negative_streak = 8;
        let v = detect_channel_change(&mut st, 2.95, 0.185);
        assert_eq!(v, ChannelVerdict::Unchanged);
        assert_eq!(st.m_max, Some(3.0));
        assert_eq!(st.negative_streak, 0);
    }
}
