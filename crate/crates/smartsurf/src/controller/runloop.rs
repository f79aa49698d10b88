//! Closed-loop controller driving a [`World`].
//!
//! The loop owns the surface configuration. Every `n_sf` subframes it reads
//! the windowed rate metric for each eNB, runs one greedy beamforming
//! iteration over that eNB's assigned paths, and re-applies the result. A
//! long non-improving streak forces a re-measure of the stored maximum;
//! a stale maximum means the channel moved, so the loop re-scans the band,
//! re-centers the paths' filters on the eNB's current channel and restarts
//! the search. Once every eNB has plateaued, a multi-cell deployment runs
//! one element-selection round and starts over on the swapped assignment.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::beamform::{
    beamform_step, detect_channel_change, BeamformState, ChannelVerdict, StepOutcome,
};
use crate::controller::selection::{Assignment, GreedySelection};
use crate::controller::{ControllerParams, MetricWindow};
use crate::rng::stream;
use crate::sim::{cell_search, DciRecord, Direction, World};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Surface fully disabled: environment path only.
    Baseline,
    /// Amplification chain enabled, phases held at zero, no control loop.
    AmpOnly,
    /// Full closed loop: beamforming, change detection, element selection.
    Waveflex,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Mode::Baseline),
            "amp_only" => Some(Mode::AmpOnly),
            "waveflex" => Some(Mode::Waveflex),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::AmpOnly => "amp_only",
            Mode::Waveflex => "waveflex",
        }
    }
}

/// One logged surface mutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandRecord {
    pub time_ms: f64,
    pub element: usize,
    pub path: usize,
    pub phase_level: u8,
    pub filter_center_hz: f64,
}

#[derive(Debug)]
struct EnbLoop {
    enb_id: usize,
    /// Surface path indices owned by this eNB, ascending; beamform slot i
    /// drives `paths[i]`.
    paths: Vec<usize>,
    window: MetricWindow,
    beam: BeamformState,
    evals_since_improve: u32,
    pending_remeasure: bool,
    known_center_hz: f64,
    channel_changes_detected: u64,
}

#[derive(Debug)]
pub struct ControllerLoop {
    mode: Mode,
    params: ControllerParams,
    enbs: Vec<EnbLoop>,
    selection: Option<GreedySelection>,
    rng: ChaCha8Rng,
    sf_since_eval: usize,
    commands: Vec<CommandRecord>,
    selection_rounds: u64,
}

impl ControllerLoop {
    /// Build the loop and install the mode's initial surface state.
    pub fn new(
        mode: Mode,
        params: ControllerParams,
        world: &mut World,
        master_seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let rng = stream(master_seed, "controller");
        let n_paths = world.surface.path_count();
        let enb_ids: Vec<usize> = world
            .enbs
            .iter()
            .filter(|e| e.active)
            .map(|e| e.id)
            .collect();

        let mut loopy = Self {
            mode,
            params,
            enbs: Vec::new(),
            selection: None,
            rng,
            sf_since_eval: 0,
            commands: Vec::new(),
            selection_rounds: 0,
        };

        match mode {
            Mode::Baseline => {
                world.surface.set_all_enabled(false);
                return Ok(loopy);
            }
            Mode::AmpOnly => {
                // Deterministic balanced split, zero phases.
                world.surface.set_all_enabled(true);
                for p in 0..n_paths {
                    let owner = enb_ids[p % enb_ids.len()];
                    loopy.retune_path(world, p, 0, Self::center_of(world, owner));
                }
                return Ok(loopy);
            }
            Mode::Waveflex => {}
        }

        world.surface.set_all_enabled(true);
        let assignment = Assignment::balanced_random(n_paths, &enb_ids, &mut loopy.rng)?;
        loopy.install_assignment(world, &assignment);
        loopy.selection = Some(GreedySelection::new(assignment, params.swap_frac));
        Ok(loopy)
    }

    fn center_of(world: &World, enb_id: usize) -> f64 {
        world
            .enbs
            .iter()
            .find(|e| e.id == enb_id)
            .map(|e| e.channel.center_hz())
            .unwrap_or(crate::linkbudget::CBRS_LOW_HZ)
    }

    fn retune_path(&mut self, world: &mut World, path: usize, phase: u8, center_hz: f64) {
        let time_ms = world.clock.time_ms();
        let p = world.surface.path_mut(path);
        p.phase_level = phase;
        p.filter = p.filter.retuned(center_hz);
        self.commands.push(CommandRecord {
            time_ms,
            element: path / 2,
            path: path % 2,
            phase_level: phase,
            filter_center_hz: center_hz,
        });
    }

    /// Rebuild per-eNB loops from an assignment and push it to the surface.
    fn install_assignment(&mut self, world: &mut World, assignment: &Assignment) {
        let mut per_enb: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for p in 0..assignment.len() {
            if let Some(owner) = assignment.owner(p) {
                per_enb.entry(owner).or_default().push(p);
            }
        }
        self.enbs = per_enb
            .into_iter()
            .map(|(enb_id, paths)| EnbLoop {
                enb_id,
                beam: BeamformState::new(paths.len()),
                window: MetricWindow::new(self.params.n_sf),
                evals_since_improve: 0,
                pending_remeasure: false,
                known_center_hz: Self::center_of(world, enb_id),
                channel_changes_detected: 0,
                paths,
            })
            .collect();
        for ei in 0..self.enbs.len() {
            let enb_id = self.enbs[ei].enb_id;
            let center = Self::center_of(world, enb_id);
            let paths = self.enbs[ei].paths.clone();
            for (slot, path) in paths.iter().enumerate() {
                let phase = self.enbs[ei].beam.theta.level(slot);
                self.retune_path(world, *path, phase, center);
            }
        }
        self.sf_since_eval = 0;
    }

    fn apply_theta(&mut self, world: &mut World, ei: usize) {
        let paths = self.enbs[ei].paths.clone();
        let center = self.enbs[ei].known_center_hz;
        for (slot, path) in paths.iter().enumerate() {
            let phase = self.enbs[ei].beam.theta.level(slot);
            self.retune_path(world, *path, phase, center);
        }
    }

    /// Feed one subframe's decoded DCI into the loop; may mutate the
    /// surface for subsequent subframes. Call after each `step_subframe`.
    pub fn observe(&mut self, world: &mut World, dci: &[DciRecord]) {
        if self.mode != Mode::Waveflex {
            return;
        }
        for e in &mut self.enbs {
            let recs: Vec<&DciRecord> = dci
                .iter()
                .filter(|r| r.enb_id == e.enb_id && r.direction == Direction::Dl)
                .collect();
            e.window.push_subframe(&recs);
        }
        self.sf_since_eval += 1;
        if self.sf_since_eval < self.params.n_sf {
            return;
        }
        self.sf_since_eval = 0;
        self.evaluate_all(world);
    }

    fn evaluate_all(&mut self, world: &mut World) {
        for ei in 0..self.enbs.len() {
            let metric = match self.enbs[ei].window.metric_multi() {
                Ok(m) => m,
                Err(_) => continue,
            };
            self.enbs[ei].window.clear();
            if self.enbs[ei].pending_remeasure {
                self.enbs[ei].pending_remeasure = false;
                let verdict =
                    detect_channel_change(&mut self.enbs[ei].beam, metric, self.params.epsilon);
                if verdict == ChannelVerdict::Changed {
                    self.enbs[ei].channel_changes_detected += 1;
                    self.enbs[ei].evals_since_improve = 0;
                    self.resync_channel(world, ei);
                    continue;
                }
                // Maximum still valid: resume the perturbation search.
                let delta = crate::controller::beamform::draw_perturbation(
                    self.enbs[ei].paths.len(),
                    self.params.perturb_prob,
                    &mut self.rng,
                );
                self.enbs[ei].beam.theta = self.enbs[ei].beam.best_theta.shifted(&delta);
                self.apply_theta(world, ei);
                continue;
            }
            let outcome = beamform_step(
                &mut self.enbs[ei].beam,
                metric,
                self.params.perturb_prob,
                &mut self.rng,
            );
            match outcome {
                StepOutcome::Improved => self.enbs[ei].evals_since_improve = 0,
                StepOutcome::Reverted => self.enbs[ei].evals_since_improve += 1,
            }
            if self.enbs[ei].beam.negative_streak >= self.params.n_nf {
                // Re-apply the best vector and measure it afresh next round.
                self.enbs[ei].pending_remeasure = true;
                self.enbs[ei].beam.theta = self.enbs[ei].beam.best_theta.clone();
            }
            self.apply_theta(world, ei);
        }
        self.maybe_select(world);
    }

    /// Re-scan the band and re-center the eNB's filters on its current
    /// channel after a detected change.
    fn resync_channel(&mut self, world: &mut World, ei: usize) {
        let enb_id = self.enbs[ei].enb_id;
        let found = cell_search(world, (3550.0, 3700.0), 10.0);
        if let Some(&(_, center)) = found.iter().find(|(id, _)| *id == enb_id) {
            self.enbs[ei].known_center_hz = center;
        }
        self.apply_theta(world, ei);
    }

    fn maybe_select(&mut self, world: &mut World) {
        let Some(sel) = self.selection.as_mut() else {
            return;
        };
        if self.enbs.len() < 2 {
            return;
        }
        let all_converged = self
            .enbs
            .iter()
            .all(|e| e.evals_since_improve >= self.params.plateau && e.beam.m_max.is_some());
        if !all_converged {
            return;
        }
        let metrics: BTreeMap<usize, f64> = self
            .enbs
            .iter()
            .map(|e| (e.enb_id, e.beam.m_max.unwrap_or(0.0)))
            .collect();
        sel.round(&metrics, &mut self.rng);
        self.selection_rounds += 1;
        let next = sel.current.clone();
        self.install_assignment(world, &next);
    }

    /// Install every eNB's best-known vector (the operating configuration
    /// once exploration stops). No-op outside waveflex mode.
    pub fn apply_best(&mut self, world: &mut World) {
        if self.mode != Mode::Waveflex {
            return;
        }
        for ei in 0..self.enbs.len() {
            self.enbs[ei].beam.theta = self.enbs[ei].beam.best_theta.clone();
            self.apply_theta(world, ei);
        }
    }

    pub fn commands(&self) -> &[CommandRecord] {
        &self.commands
    }

    pub fn selection_rounds(&self) -> u64 {
        self.selection_rounds
    }

    /// Total channel changes detected across eNBs.
    pub fn channel_changes_detected(&self) -> u64 {
        self.enbs.iter().map(|e| e.channel_changes_detected).sum()
    }

    /// Best stored metric per eNB.
    pub fn best_metrics(&self) -> BTreeMap<usize, Option<f64>> {
        self.enbs.iter().map(|e| (e.enb_id, e.beam.m_max)).collect()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}
