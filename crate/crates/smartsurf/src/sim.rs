//! Discrete-time air-link simulation: eNBs, UEs and the surface's physical
//! effect on the channel.
//!
//! The world advances one 1 ms subframe at a time and emits the streams a
//! control-channel sniffer would observe: per-subframe DCI records and
//! symbol-rate RSRP samples. Signal combination is a complex sum of the
//! environment path and every enabled element path, with each path's filter
//! response applied at the carrier of interest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::filter::FilterResponse;
use crate::linkbudget::{
    element_path_loss, free_space_path_loss, CbrsChannel, ElementGainChain, PhaseVector, Position,
    CBRS_HIGH_HZ, CBRS_LOW_HZ, PHASE_STEP, SPEED_OF_LIGHT,
};
use crate::tdd::{FrameConfig, SubframeClock, SubframeKind, SYMBOLS_PER_SUBFRAME};
use crate::{Error, Result};

/// Rate staircase: 15 equal steps capped at 5.55 bits/PRB-proxy.
pub const RATE_LEVELS: u8 = 15;
pub const RATE_CAP: f64 = 5.55;
pub const RATE_STEP: f64 = RATE_CAP / RATE_LEVELS as f64;

/// Bits carried by one PRB per unit rate index value (12 subcarriers x 14
/// symbols).
pub const BITS_PER_PRB_UNIT: f64 = 168.0;

/// PRBs requested per Mbps of demand before capping at the channel budget.
pub const PRB_PER_MBPS: f64 = 2.5;

#[derive(Debug, Clone)]
pub struct EnbState {
    pub id: usize,
    pub channel: CbrsChannel,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub frame_config: FrameConfig,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct UeState {
    pub id: usize,
    pub position: Position,
    pub serving_enb: usize,
    pub demand_mbps: f64,
    pub velocity: (f64, f64, f64),
    pub tx_power_dbm: f64,
}

/// One of the two independent signal paths of a surface element.
#[derive(Debug, Clone)]
pub struct ElementPath {
    pub phase_level: u8,
    pub filter: FilterResponse,
    pub enabled: bool,
}

#[derive(Debug, Clone)]
pub struct SurfaceElement {
    pub position: Position,
    pub paths: [ElementPath; 2],
}

#[derive(Debug, Clone)]
pub struct SurfaceModel {
    pub elements: Vec<SurfaceElement>,
    pub chain: ElementGainChain,
}

impl SurfaceModel {
    /// Uniform surface: all elements at `position`, both paths centered on
    /// `filter_center_hz`, disabled phases zeroed.
    pub fn uniform(k: usize, position: Position, filter_center_hz: f64) -> Self {
        let path = ElementPath {
            phase_level: 0,
            filter: FilterResponse::new(filter_center_hz),
            enabled: true,
        };
        Self {
            elements: vec![
                SurfaceElement {
                    position,
                    paths: [path.clone(), path],
                };
                k
            ],
            chain: ElementGainChain::default(),
        }
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn path_count(&self) -> usize {
        self.elements.len() * 2
    }

    pub fn path(&self, idx: usize) -> &ElementPath {
        &self.elements[idx / 2].paths[idx % 2]
    }

    pub fn path_mut(&mut self, idx: usize) -> &mut ElementPath {
        &mut self.elements[idx / 2].paths[idx % 2]
    }

    pub fn element_position(&self, path_idx: usize) -> Position {
        self.elements[path_idx / 2].position
    }

    pub fn set_all_enabled(&mut self, enabled: bool) {
        for e in &mut self.elements {
            for p in &mut e.paths {
                p.enabled = enabled;
            }
        }
    }

    /// Apply a phase vector to one path of every element (`path_slot` 0 or
    /// 1); the vector length must equal the element count.
    pub fn apply_phases(&mut self, path_slot: usize, phases: &PhaseVector) {
        assert_eq!(phases.len(), self.elements.len());
        for (i, e) in self.elements.iter_mut().enumerate() {
            e.paths[path_slot].phase_level = phases.level(i);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        for e in &self.elements {
            for p in &e.paths {
                let c = p.filter.center_hz;
                if !(CBRS_LOW_HZ..=CBRS_HIGH_HZ).contains(&c) {
                    return Err(Error::Domain(format!(
                        "path filter center {c} Hz outside CBRS band"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DL")]
    Dl,
    #[serde(rename = "UL")]
    Ul,
}

impl Direction {
    pub fn letter(&self) -> &'static str {
        match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DciRecord {
    pub timestamp: SubframeClock,
    pub enb_id: usize,
    pub ue_id: usize,
    pub direction: Direction,
    pub rate_index: u8,
    pub n_prb: u32,
}

impl DciRecord {
    /// Physical rate proxy R_w, bits per PRB.
    pub fn rate(&self) -> f64 {
        self.rate_index as f64 * RATE_STEP
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsrpSample {
    /// Milliseconds since epoch, 1/14 ms resolution.
    pub time_ms: f64,
    pub enb_id: usize,
    pub rsrp_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelEventKind {
    BlockageOn,
    BlockageOff,
    EnbRetune { enb_id: usize, new_center_hz: f64 },
    UeDemand { ue_id: usize, mbps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub time_ms: f64,
    #[serde(flatten)]
    pub kind: ChannelEventKind,
}

/// Monotone staircase from SNR to the broadcast rate index.
pub fn rate_from_snr(snr_db: f64) -> u8 {
    if !snr_db.is_finite() && snr_db < 0.0 {
        return 0;
    }
    let spectral = (1.0 + 10f64.powf(snr_db / 10.0)).log2();
    let idx = (spectral / RATE_STEP).round();
    if idx < 0.0 {
        0
    } else {
        (idx as u64).min(RATE_LEVELS as u64) as u8
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub enbs: Vec<EnbState>,
    pub ues: Vec<UeState>,
    pub surface: SurfaceModel,
    /// Where the sniffer antenna measures RSRP.
    pub monitor: Position,
    pub clock: SubframeClock,
    pub noise_floor_dbm: f64,
    pub blockage_penalty_db: f64,
    pub blockage_active: bool,
    events: Vec<ChannelEvent>,
    next_event: usize,
    rr_counters: Vec<u64>,
}

impl World {
    pub fn new(
        enbs: Vec<EnbState>,
        ues: Vec<UeState>,
        surface: SurfaceModel,
        monitor: Position,
        mut events: Vec<ChannelEvent>,
        noise_floor_dbm: f64,
        blockage_penalty_db: f64,
    ) -> Result<Self> {
        surface.validate()?;
        for w in enbs.windows(1) {
            let _ = w;
        }
        for (i, a) in enbs.iter().enumerate() {
            if !a.position.is_finite() {
                return Err(Error::Domain(format!("enb {} position not finite", a.id)));
            }
            for b in &enbs[i + 1..] {
                if a.active && b.active && a.channel.overlaps(&b.channel) {
                    return Err(Error::Domain(format!(
                        "enbs {} and {} occupy overlapping channels",
                        a.id, b.id
                    )));
                }
            }
        }
        for ue in &ues {
            if !enbs.iter().any(|e| e.id == ue.serving_enb && e.active) {
                return Err(Error::UnknownId(format!(
                    "ue {} serves missing/inactive enb {}",
                    ue.id, ue.serving_enb
                )));
            }
        }
        events.sort_by(|a, b| a.time_ms.total_cmp(&b.time_ms));
        if events.iter().any(|e| e.time_ms < 0.0) {
            return Err(Error::Domain("event times must be non-negative".into()));
        }
        let n_enb = enbs.len();
        Ok(Self {
            enbs,
            ues,
            surface,
            monitor,
            clock: SubframeClock::default(),
            noise_floor_dbm,
            blockage_penalty_db,
            blockage_active: false,
            events,
            next_event: 0,
            rr_counters: vec![0; n_enb],
        })
    }

    fn enb_index(&self, id: usize) -> Result<usize> {
        self.enbs
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| Error::UnknownId(format!("enb {id}")))
    }

    fn ue_index(&self, id: usize) -> Result<usize> {
        self.ues
            .iter()
            .position(|u| u.id == id)
            .ok_or_else(|| Error::UnknownId(format!("ue {id}")))
    }

    /// Complex field at `rx` produced by a transmitter at `tx`, carrier
    /// `f_hz`, via the environment path plus every enabled element path.
    /// Amplitudes are in linear units relative to 1 mW; phases come from
    /// path lengths and shifter settings.
    fn received_field(&self, tx: Position, tx_power_dbm: f64, rx: Position, f_hz: f64) -> Complex64 {
        let lambda = SPEED_OF_LIGHT / f_hz;
        let k_wave = std::f64::consts::TAU / lambda;
        let d_env = tx.distance(&rx).max(1e-6);
        let mut l_env = free_space_path_loss(d_env, f_hz).unwrap_or(0.0);
        if self.blockage_active {
            l_env += self.blockage_penalty_db;
        }
        let env_amp = 10f64.powf((tx_power_dbm - l_env) / 20.0);
        let mut field = Complex64::from_polar(env_amp, -k_wave * d_env);
        for e in &self.surface.elements {
            let d_b = tx.distance(&e.position).max(1e-6);
            let d_u = e.position.distance(&rx).max(1e-6);
            for p in &e.paths {
                if !p.enabled {
                    continue;
                }
                let base = match element_path_loss(d_b, d_u, f_hz, &self.surface.chain) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let gain_db = base - p.filter.excess_attenuation_db(f_hz);
                let amp = 10f64.powf((tx_power_dbm + gain_db) / 20.0);
                let phase = -k_wave * (d_b + d_u) + p.phase_level as f64 * PHASE_STEP;
                field += Complex64::from_polar(amp, phase);
            }
        }
        field
    }

    /// Received power at `rx` in dBm.
    fn received_power_dbm(&self, tx: Position, tx_power_dbm: f64, rx: Position, f_hz: f64) -> f64 {
        let field = self.received_field(tx, tx_power_dbm, rx, f_hz);
        20.0 * field.norm().max(1e-30).log10()
    }

    /// SNR of the (eNB, UE) link in the given direction, dB.
    pub fn effective_snr(&self, enb_id: usize, ue_id: usize, dir: Direction) -> Result<f64> {
        let e = &self.enbs[self.enb_index(enb_id)?];
        let u = &self.ues[self.ue_index(ue_id)?];
        if u.serving_enb != enb_id {
            return Err(Error::UnknownId(format!(
                "ue {ue_id} not served by enb {enb_id}"
            )));
        }
        let f = e.channel.center_hz();
        let p = match dir {
            Direction::Dl => self.received_power_dbm(e.position, e.tx_power_dbm, u.position, f),
            Direction::Ul => self.received_power_dbm(u.position, u.tx_power_dbm, e.position, f),
        };
        Ok(p - self.noise_floor_dbm)
    }

    /// Direction-independent combined path gain of the link, dB.
    pub fn combined_path_gain(&self, enb_id: usize, ue_id: usize) -> Result<f64> {
        let e = &self.enbs[self.enb_index(enb_id)?];
        let u = &self.ues[self.ue_index(ue_id)?];
        let f = e.channel.center_hz();
        Ok(self.received_power_dbm(e.position, 0.0, u.position, f))
    }

    fn apply_due_events(&mut self) -> Result<()> {
        let now = self.clock.time_ms();
        while self.next_event < self.events.len() && self.events[self.next_event].time_ms <= now {
            let ev = self.events[self.next_event];
            self.next_event += 1;
            match ev.kind {
                ChannelEventKind::BlockageOn => self.blockage_active = true,
                ChannelEventKind::BlockageOff => self.blockage_active = false,
                ChannelEventKind::EnbRetune {
                    enb_id,
                    new_center_hz,
                } => {
                    let idx = self.enb_index(enb_id)?;
                    let bw = self.enbs[idx].channel.bandwidth_hz();
                    self.enbs[idx].channel = CbrsChannel::new(new_center_hz, bw)?;
                }
                ChannelEventKind::UeDemand { ue_id, mbps } => {
                    let idx = self.ue_index(ue_id)?;
                    self.ues[idx].demand_mbps = mbps;
                }
            }
        }
        Ok(())
    }

    fn move_ues(&mut self) {
        for u in &mut self.ues {
            u.position.x += u.velocity.0 * 1e-3;
            u.position.y += u.velocity.1 * 1e-3;
            u.position.z += u.velocity.2 * 1e-3;
        }
    }

    /// Advance one subframe. The optional hook runs before each of the 14
    /// symbol periods and may retune the surface; this is the mutation point
    /// used by synchronization experiments.
    pub fn step_subframe_with_symbol_hook<F>(
        &mut self,
        mut hook: F,
    ) -> Result<(Vec<DciRecord>, Vec<RsrpSample>)>
    where
        F: FnMut(&mut SurfaceModel, f64),
    {
        self.apply_due_events()?;
        let subframe_start = self.clock.time_ms();
        let mut dci = Vec::new();

        // Scheduling decisions are taken with the subframe-start surface
        // state; per-eNB round-robin over demand-positive served UEs.
        for ei in 0..self.enbs.len() {
            if !self.enbs[ei].active {
                continue;
            }
            let kind = self.enbs[ei].frame_config.kind(self.clock.subframe);
            let served: Vec<usize> = self
                .ues
                .iter()
                .enumerate()
                .filter(|(_, u)| u.serving_enb == self.enbs[ei].id && u.demand_mbps > 0.0)
                .map(|(i, _)| i)
                .collect();
            if served.is_empty() {
                continue;
            }
            let pick = served[(self.rr_counters[ei] % served.len() as u64) as usize];
            self.rr_counters[ei] += 1;
            let ue = &self.ues[pick];
            let budget = self.enbs[ei].channel.prb_budget();
            let n_prb = ((ue.demand_mbps * PRB_PER_MBPS).ceil() as u32).clamp(1, budget);
            let dir = if kind.carries_dci() {
                Direction::Dl
            } else {
                Direction::Ul
            };
            let snr = self.effective_snr(self.enbs[ei].id, ue.id, dir)?;
            dci.push(DciRecord {
                timestamp: self.clock,
                enb_id: self.enbs[ei].id,
                ue_id: ue.id,
                direction: dir,
                rate_index: rate_from_snr(snr),
                n_prb,
            });
        }

        // RSRP: one sample per symbol per active eNB, from whoever is
        // transmitting in this subframe, regardless of payload.
        let mut rsrp = Vec::new();
        for s in 0..SYMBOLS_PER_SUBFRAME {
            let t = subframe_start + s as f64 / SYMBOLS_PER_SUBFRAME as f64;
            hook(&mut self.surface, t);
            for ei in 0..self.enbs.len() {
                if !self.enbs[ei].active {
                    continue;
                }
                let enb = &self.enbs[ei];
                let kind = enb.frame_config.kind(self.clock.subframe);
                let f = enb.channel.center_hz();
                let power = if kind.is_downlink_tx() {
                    self.received_power_dbm(enb.position, enb.tx_power_dbm, self.monitor, f)
                } else {
                    // Uplink: the transmitter is the UE scheduled this
                    // subframe (the round-robin pick above), if any.
                    let tx = dci
                        .iter()
                        .find(|r| r.enb_id == enb.id && r.direction == Direction::Ul)
                        .map(|r| self.ue_index(r.ue_id))
                        .transpose()?;
                    match tx {
                        Some(ui) => {
                            let u = &self.ues[ui];
                            self.received_power_dbm(u.position, u.tx_power_dbm, self.monitor, f)
                        }
                        None => self.noise_floor_dbm,
                    }
                };
                rsrp.push(RsrpSample {
                    time_ms: t,
                    enb_id: enb.id,
                    rsrp_dbm: power,
                });
            }
        }

        self.move_ues();
        self.clock.advance();
        Ok((dci, rsrp))
    }

    pub fn step_subframe(&mut self) -> Result<(Vec<DciRecord>, Vec<RsrpSample>)> {
        self.step_subframe_with_symbol_hook(|_, _| {})
    }

    /// Subframe kind seen by a given eNB at the current clock.
    pub fn current_kind(&self, enb_id: usize) -> Result<SubframeKind> {
        let ei = self.enb_index(enb_id)?;
        Ok(self.enbs[ei].frame_config.kind(self.clock.subframe))
    }
}

/// Scan the CBRS band on a fixed grid and report every active eNB whose
/// channel center lies on a visited point.
pub fn cell_search(world: &World, band_mhz: (f64, f64), step_mhz: f64) -> Vec<(usize, f64)> {
    let mut found = Vec::new();
    let steps = ((band_mhz.1 - band_mhz.0) / step_mhz).round() as usize;
    for enb in world.enbs.iter().filter(|e| e.active) {
        let center_mhz = enb.channel.center_hz() / 1e6;
        let on_grid = (0..=steps).any(|i| {
            let grid = band_mhz.0 + step_mhz * i as f64;
            (grid - center_mhz).abs() < 1e-6
        });
        if on_grid {
            found.push((enb.id, enb.channel.center_hz()));
        }
    }
    found.sort_by_key(|(id, _)| *id);
    found
}

/// Mean throughput per (eNB, UE, direction) over a window, Mbps.
pub fn throughput(
    records: &[DciRecord],
    window_ms: f64,
) -> Result<Vec<((usize, usize, Direction), f64)>> {
    if window_ms <= 0.0 {
        return Err(Error::Domain(format!("window {window_ms} ms must be > 0")));
    }
    let mut sums: std::collections::BTreeMap<(usize, usize, Direction), f64> =
        std::collections::BTreeMap::new();
    for r in records {
        let bits = r.rate() * r.n_prb as f64 * BITS_PER_PRB_UNIT;
        *sums.entry((r.enb_id, r.ue_id, r.direction)).or_insert(0.0) += bits;
    }
    Ok(sums
        .into_iter()
        .map(|(k, bits)| (k, bits / (window_ms * 1000.0)))
        .collect())
}
