//! Experiment orchestration and CSV emission.
//!
//! Everything here is deterministic given the scenario seed: random draws
//! come from labeled streams of the master seed, iteration order is fixed,
//! and floats are formatted with a fixed precision so identical runs emit
//! byte-identical CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::runloop::{ControllerLoop, Mode};
use crate::controller::sync::{estimate_time_offset, offset_residual_ms};
use crate::filter::{align_tuning_rates, resonant_frequencies, TuningTargets, VaractorLaw};
use crate::linkbudget::{surface_gain, surface_gain_coherent, PhaseVector, Position};
use crate::scenario::Scenario;
use crate::sim::{
    cell_search, DciRecord, Direction, EnbState, RsrpSample, SurfaceModel, UeState, World,
};
use crate::tdd::{default_frame_config, SUBFRAMES_PER_FRAME};
use crate::{Error, Result};

/// Fixed float formatting for CSV output.
fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub duration_ms: u64,
    pub seed_override: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkStats {
    pub enb: usize,
    pub ue: usize,
    pub direction: Direction,
    pub mean_snr_db: f64,
    pub throughput_mbps: f64,
    pub scheduled_subframes: u64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub mode: Mode,
    pub duration_ms: u64,
    pub seed: u64,
    pub links: Vec<LinkStats>,
    pub channel_changes_detected: u64,
    pub selection_rounds: u64,
    pub command_count: usize,
    pub dci_count: usize,
    /// Mean SNR per link measured on the final operating configuration
    /// (best vectors applied, no exploration).
    pub final_snr_db: BTreeMap<(usize, usize, Direction), f64>,
}

/// Run one scenario in one mode and optionally emit CSV artifacts.
pub fn run(scenario: &Scenario, cfg: &RunConfig) -> Result<RunSummary> {
    let seed = cfg.seed_override.unwrap_or(scenario.seed);
    let mut world = scenario.build_world()?;
    let mut ctl = ControllerLoop::new(cfg.mode, scenario.controller, &mut world, seed)?;

    let mut all_dci: Vec<DciRecord> = Vec::new();
    let mut all_rsrp: Vec<RsrpSample> = Vec::new();
    let mut snr_rows: Vec<(f64, usize, usize, Direction, f64)> = Vec::new();

    for _ in 0..cfg.duration_ms {
        let (dci, rsrp) = world.step_subframe()?;
        for r in &dci {
            let snr = world.effective_snr(r.enb_id, r.ue_id, r.direction)?;
            snr_rows.push((r.timestamp.time_ms(), r.enb_id, r.ue_id, r.direction, snr));
        }
        ctl.observe(&mut world, &dci);
        all_dci.extend(dci);
        all_rsrp.extend(rsrp);
    }

    // Final operating configuration: apply best vectors, stop exploring.
    ctl.apply_best(&mut world);
    let mut final_snr = BTreeMap::new();
    for key in snr_rows
        .iter()
        .map(|&(_, e, u, d, _)| (e, u, d))
        .collect::<std::collections::BTreeSet<_>>()
    {
        final_snr.insert(key, world.effective_snr(key.0, key.1, key.2)?);
    }

    let tput = crate::sim::throughput(&all_dci, cfg.duration_ms as f64)?;
    let mut links = Vec::new();
    for ((enb, ue, dir), mbps) in tput {
        let snrs: Vec<f64> = snr_rows
            .iter()
            .filter(|&&(_, e, u, d, _)| (e, u, d) == (enb, ue, dir))
            .map(|&(_, _, _, _, s)| s)
            .collect();
        links.push(LinkStats {
            enb,
            ue,
            direction: dir,
            mean_snr_db: snrs.iter().sum::<f64>() / snrs.len().max(1) as f64,
            throughput_mbps: mbps,
            scheduled_subframes: snrs.len() as u64,
        });
    }

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        write_dci_csv(&all_dci, &dir.join("dci.csv"))?;
        write_rsrp_csv(&all_rsrp, &dir.join("rsrp.csv"))?;
        write_snr_csv(&snr_rows, &dir.join("snr.csv"))?;
        write_throughput_csv(&links, &dir.join("throughput.csv"))?;
        write_commands_csv(ctl.commands(), &dir.join("commands.csv"))?;
    }

    Ok(RunSummary {
        mode: cfg.mode,
        duration_ms: cfg.duration_ms,
        seed,
        links,
        channel_changes_detected: ctl.channel_changes_detected(),
        selection_rounds: ctl.selection_rounds(),
        command_count: ctl.commands().len(),
        dci_count: all_dci.len(),
        final_snr_db: final_snr,
    })
}

fn write_dci_csv(records: &[DciRecord], path: &Path) -> Result<()> {
    let mut s = String::from("time_ms,enb,ue,dir,rate_index,n_prb\n");
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f(r.timestamp.time_ms()),
            r.enb_id,
            r.ue_id,
            r.direction.letter(),
            r.rate_index,
            r.n_prb
        )
        .expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_rsrp_csv(samples: &[RsrpSample], path: &Path) -> Result<()> {
    let mut s = String::from("time_ms,enb,rsrp_dbm\n");
    for r in samples {
        writeln!(s, "{},{},{}", fmt_f(r.time_ms), r.enb_id, fmt_f(r.rsrp_dbm))
            .expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_snr_csv(rows: &[(f64, usize, usize, Direction, f64)], path: &Path) -> Result<()> {
    let mut s = String::from("time_ms,enb,ue,dir,snr_db\n");
    for &(t, e, u, d, snr) in rows {
        writeln!(s, "{},{},{},{},{}", fmt_f(t), e, u, d.letter(), fmt_f(snr))
            .expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_throughput_csv(links: &[LinkStats], path: &Path) -> Result<()> {
    let mut s = String::from("enb,ue,dir,mbps,mean_snr_db\n");
    for l in links {
        writeln!(
            s,
            "{},{},{},{},{}",
            l.enb,
            l.ue,
            l.direction.letter(),
            fmt_f(l.throughput_mbps),
            fmt_f(l.mean_snr_db)
        )
        .expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_commands_csv(
    commands: &[crate::controller::runloop::CommandRecord],
    path: &Path,
) -> Result<()> {
    let mut s = String::from("time_ms,element,path,phase_level,filter_center_hz\n");
    for c in commands {
        writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f(c.time_ms),
            c.element,
            c.path,
            c.phase_level,
            fmt_f(c.filter_center_hz)
        )
        .expect("string write");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Surface-gain grid over element count and environment path loss.
///
/// `l_ele_db` is the per-element path loss entering the gain ratio; the
/// default (`None`) uses the reference geometry 5 m + 1 m at 3.58 GHz with
/// the measured component chain.
pub fn linkbudget_sweep(
    k_range: (u32, u32),
    l_env_values: &[f64],
    l_ele_db: Option<f64>,
) -> Result<String> {
    if k_range.0 < 1 || k_range.1 < k_range.0 {
        return Err(Error::Domain(format!(
            "bad k range {}..={}",
            k_range.0, k_range.1
        )));
    }
    let l_ele = match l_ele_db {
        Some(v) => v,
        None => {
            let chain = crate::linkbudget::ElementGainChain::default();
            -crate::linkbudget::element_path_loss(5.0, 1.0, 3.58e9, &chain)?
        }
    };
    let mut s = String::from("k,l_env_db,g_s_db,g_s_coherent_db\n");
    for k in k_range.0..=k_range.1 {
        for &l_env in l_env_values {
            let g = surface_gain(k, 0.0, l_ele, l_env)?;
            let gc = surface_gain_coherent(k, 0.0, l_ele, l_env)?;
            writeln!(s, "{},{},{},{}", k, fmt_f(l_env), fmt_f(g), fmt_f(gc))
                .expect("string write");
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncRound {
    pub round: u32,
    pub estimate_ms: f64,
    pub residual_ms: f64,
    pub glitches: usize,
}

#[derive(Debug, Clone)]
pub struct SyncDemo {
    pub rounds: Vec<SyncRound>,
    /// Believed clock offset after the last correction, ms.
    pub final_offset_ms: f64,
    /// Smallest period at which the offset is observable, ms.
    pub period_ms: f64,
}

impl SyncDemo {
    pub fn residual_ms(&self) -> f64 {
        offset_residual_ms(self.final_offset_ms, 0.0, self.period_ms)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("round,estimate_ms,residual_ms,glitches\n");
        for r in &self.rounds {
            writeln!(
                s,
                "{},{},{},{}",
                r.round,
                fmt_f(r.estimate_ms),
                fmt_f(r.residual_ms),
                r.glitches
            )
            .expect("string write");
        }
        s
    }
}

fn sync_fixture() -> Result<World> {
    let cfg = default_frame_config();
    let enb = EnbState {
        id: 0,
        channel: crate::linkbudget::CbrsChannel::new(3.58e9, 20e6)?,
        position: Position::new(0.0, 0.0, 2.0),
        tx_power_dbm: -20.0,
        frame_config: cfg,
        active: true,
    };
    let ue = UeState {
        id: 0,
        position: Position::new(4.0, 3.0, 1.0),
        serving_enb: 0,
        demand_mbps: 10.0,
        velocity: (0.0, 0.0, 0.0),
        tx_power_dbm: -20.0,
    };
    let surface = SurfaceModel::uniform(8, Position::new(3.5, 2.5, 1.2), 3.58e9);
    World::new(
        vec![enb],
        vec![ue],
        surface,
        Position::new(3.4, 2.4, 1.2),
        vec![],
        -94.0,
        15.0,
    )
}

/// Demonstrate offset estimation and correction on a noiseless deployment.
///
/// The surface toggles between two phase configurations at the boundaries
/// the controller believes are direction flips; glitches reveal the clock
/// offset, which is corrected round by round until a frame is glitch-free.
pub fn sync_demo(offset_ms: f64, max_rounds: u32, threshold_db: f64) -> Result<SyncDemo> {
    if !(0.0..10.0).contains(&offset_ms) {
        return Err(Error::Domain(format!(
            "offset {offset_ms} ms must be in [0, 10)"
        )));
    }
    let cfg = default_frame_config();
    let period = cfg.direction_period_ms() as f64;
    let rel_boundaries: Vec<f64> = cfg
        .direction_boundaries_ms()
        .iter()
        .map(|b| (*b as f64).rem_euclid(period))
        .collect();
    let mut believed = offset_ms;
    let mut rounds = Vec::new();

    for round in 1..=max_rounds {
        let mut world = sync_fixture()?;
        let mut samples: Vec<RsrpSample> = Vec::new();
        let mut toggles: Vec<f64> = Vec::new();
        let mut last_cfg: Option<bool> = None;
        let frames = 8u64;
        for _ in 0..frames * SUBFRAMES_PER_FRAME as u64 {
            let b0 = rel_boundaries[0];
            let b1 = rel_boundaries[1];
            let bel = believed;
            let mut flips: Vec<(f64, bool)> = Vec::new();
            let (_, rsrp) = world.step_subframe_with_symbol_hook(|surface, t| {
                // Config A inside the believed "first segment", B elsewhere.
                let shifted = (t - bel).rem_euclid(period);
                let config_a = (b0..b1).contains(&shifted);
                if last_cfg != Some(config_a) {
                    if last_cfg.is_some() {
                        flips.push((t, config_a));
                    }
                    last_cfg = Some(config_a);
                    let level = if config_a { 0 } else { 8 };
                    let k = surface.element_count();
                    surface.apply_phases(0, &PhaseVector::from_levels(vec![level; k]));
                    surface.apply_phases(1, &PhaseVector::from_levels(vec![level; k]));
                }
            })?;
            toggles.extend(flips.iter().map(|&(t, _)| t));
            samples.extend(rsrp);
        }
        let obs = estimate_time_offset(&samples, &cfg, &toggles, threshold_db);
        if obs.glitches == 0 {
            break;
        }
        believed -= obs.estimate_ms;
        rounds.push(SyncRound {
            round,
            estimate_ms: obs.estimate_ms,
            residual_ms: offset_residual_ms(believed, 0.0, period),
            glitches: obs.glitches,
        });
        if offset_residual_ms(believed, 0.0, period) < 1e-9 {
            // Exactly corrected; the next round would observe no glitches.
            break;
        }
    }

    Ok(SyncDemo {
        rounds,
        final_offset_ms: believed,
        period_ms: period,
    })
}

/// Bias sweep of the solved dual-mode filter design.
pub fn filter_design_sweep(
    targets: &TuningTargets,
    law: &VaractorLaw,
    points: usize,
) -> Result<String> {
    let params = align_tuning_rates(targets)?;
    let bias_lo = law.bias_for_capacitance(targets.c_v1)?;
    let bias_hi = law.bias_for_capacitance(targets.c_v2)?;
    let (lo, hi) = if bias_lo <= bias_hi {
        (bias_lo, bias_hi)
    } else {
        (bias_hi, bias_lo)
    };
    let mut s = String::from("bias_v,c_v_pf,f_odd_hz,f_even_hz,center_hz\n");
    for i in 0..points {
        let bias = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
        let c_v = law.capacitance(bias);
        let (f_odd, f_even) = resonant_frequencies(&params, c_v, crate::filter::SEARCH_BAND_HZ)?;
        let center = 0.5 * (f_odd + f_even);
        writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f(bias),
            fmt_f(c_v * 1e12),
            fmt_f(f_odd),
            fmt_f(f_even),
            fmt_f(center)
        )
        .expect("string write");
    }
    Ok(s)
}

/// Run the sniffer's band scan for a scenario and format the result.
pub fn cellsearch_report(scenario: &Scenario) -> Result<String> {
    let world = scenario.build_world()?;
    let found = cell_search(&world, (3550.0, 3700.0), 10.0);
    let mut s = String::from("enb,center_hz,bandwidth_hz,prb_budget\n");
    for (id, center) in found {
        let enb = world.enbs.iter().find(|e| e.id == id).expect("found id");
        writeln!(
            s,
            "{},{},{},{}",
            id,
            fmt_f(center),
            fmt_f(enb.channel.bandwidth_hz()),
            enb.channel.prb_budget()
        )
        .expect("string write");
    }
    Ok(s)
}
