//! TOML scenario files: deployment geometry, radio parameters, scripted
//! events and controller/filter tunables, all turned into a validated
//! [`World`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::filter::{FilterResponse, VaractorLaw};
use crate::linkbudget::{CbrsChannel, ElementGainChain, Position};
use crate::sim::{ChannelEvent, EnbState, SurfaceModel, UeState, World};
use crate::tdd::FrameConfig;
use crate::{Error, Result};

fn default_noise_floor() -> f64 {
    -94.0
}

fn default_blockage_penalty() -> f64 {
    15.0
}

fn default_tx_power() -> f64 {
    -20.0
}

fn default_bandwidth_mhz() -> f64 {
    20.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnbSpec {
    pub id: usize,
    pub center_mhz: f64,
    #[serde(default = "default_bandwidth_mhz")]
    pub bandwidth_mhz: f64,
    pub position: [f64; 3],
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UeSpec {
    pub id: usize,
    pub serving_enb: usize,
    pub position: [f64; 3],
    pub demand_mbps: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub elements: usize,
    pub position: [f64; 3],
    pub monitor_position: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TddSpec {
    pub config_id: u8,
}

impl Default for TddSpec {
    fn default() -> Self {
        Self { config_id: 0 }
    }
}

/// Filter tunables. `c0`/`phi`/`gamma`/`l1` parameterize the varactor law
/// and resonator used by the design solver; insertion loss and roll-off
/// shape the response the simulator applies per path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub c0: f64,
    pub phi: f64,
    pub gamma: f64,
    pub l1: f64,
    pub insertion_loss_db: f64,
    pub rolloff_db_per_20mhz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        let law = VaractorLaw::default();
        Self {
            c0: law.c0,
            phi: law.phi,
            gamma: law.gamma,
            l1: 0.5e-9,
            insertion_loss_db: -6.1,
            rolloff_db_per_20mhz: 3.23,
        }
    }
}

impl FilterSpec {
    pub fn law(&self) -> VaractorLaw {
        VaractorLaw {
            c0: self.c0,
            phi: self.phi,
            gamma: self.gamma,
        }
    }

    pub fn response(&self, center_hz: f64) -> FilterResponse {
        FilterResponse {
            center_hz,
            insertion_loss_db: self.insertion_loss_db,
            rolloff_db_per_20mhz: self.rolloff_db_per_20mhz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbm: f64,
    #[serde(default = "default_blockage_penalty")]
    pub blockage_penalty_db: f64,
    pub enb: Vec<EnbSpec>,
    #[serde(default)]
    pub ue: Vec<UeSpec>,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub events: Vec<ChannelEvent>,
    #[serde(default)]
    pub tdd: TddSpec,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub filter: FilterSpec,
}

fn pos(p: [f64; 3]) -> Position {
    Position::new(p[0], p[1], p[2])
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::Scenario(format!("TOML parse: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.enb.is_empty() {
            return Err(Error::Scenario("at least one eNB is required".into()));
        }
        for (i, e) in self.enb.iter().enumerate() {
            if self.enb[i + 1..].iter().any(|o| o.id == e.id) {
                return Err(Error::Scenario(format!("duplicate eNB id {}", e.id)));
            }
        }
        for (i, u) in self.ue.iter().enumerate() {
            if self.ue[i + 1..].iter().any(|o| o.id == u.id) {
                return Err(Error::Scenario(format!("duplicate UE id {}", u.id)));
            }
            if !self.enb.iter().any(|e| e.id == u.serving_enb) {
                return Err(Error::Scenario(format!(
                    "UE {} references unknown eNB {}",
                    u.id, u.serving_enb
                )));
            }
            if u.demand_mbps < 0.0 {
                return Err(Error::Scenario(format!(
                    "UE {} demand {} must be >= 0",
                    u.id, u.demand_mbps
                )));
            }
        }
        if self.surface.elements == 0 {
            return Err(Error::Scenario("surface needs at least one element".into()));
        }
        self.controller.validate()?;
        FrameConfig::from_id(self.tdd.config_id)?;
        Ok(())
    }

    /// Materialize the validated scenario.
    pub fn build_world(&self) -> Result<World> {
        let frame_config = FrameConfig::from_id(self.tdd.config_id)?;
        let enbs: Vec<EnbState> = self
            .enb
            .iter()
            .map(|e| {
                Ok(EnbState {
                    id: e.id,
                    channel: CbrsChannel::new(e.center_mhz * 1e6, e.bandwidth_mhz * 1e6)?,
                    position: pos(e.position),
                    tx_power_dbm: e.tx_power_dbm,
                    frame_config,
                    active: true,
                })
            })
            .collect::<Result<_>>()?;
        let ues: Vec<UeState> = self
            .ue
            .iter()
            .map(|u| UeState {
                id: u.id,
                position: pos(u.position),
                serving_enb: u.serving_enb,
                demand_mbps: u.demand_mbps,
                velocity: (u.velocity[0], u.velocity[1], u.velocity[2]),
                tx_power_dbm: u.tx_power_dbm,
            })
            .collect();
        let mut surface = SurfaceModel::uniform(
            self.surface.elements,
            pos(self.surface.position),
            enbs[0].channel.center_hz(),
        );
        surface.chain = ElementGainChain::default();
        for e in &mut surface.elements {
            for p in &mut e.paths {
                p.filter = self.filter.response(p.filter.center_hz);
            }
        }
        World::new(
            enbs,
            ues,
            surface,
            pos(self.surface.monitor_position),
            self.events.clone(),
            self.noise_floor_dbm,
            self.blockage_penalty_db,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 42

[surface]
elements = 8
position = [3.5, 2.5, 1.2]
monitor_position = [3.5, 2.4, 1.2]

[[enb]]
id = 0
center_mhz = 3580.0
position = [0.0, 0.0, 2.0]

[[ue]]
id = 0
serving_enb = 0
position = [4.0, 3.0, 1.0]
demand_mbps = 50.0
"#;

    #[test]
    fn minimal_scenario_builds() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.seed, 42);
        assert_eq!(s.controller.n_sf, 20);
        let w = s.build_world().unwrap();
        assert_eq!(w.enbs.len(), 1);
        assert_eq!(w.surface.element_count(), 8);
        assert_eq!(w.noise_floor_dbm, -94.0);
    }

    #[test]
    fn events_parse() {
        let text = format!(
            "{MINIMAL}
[[events]]
time_ms = 3000.0
kind = \"enb_retune\"
enb_id = 0
new_center_hz = 3.66e9

[[events]]
time_ms = 5000.0
kind = \"blockage_on\"
"
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert_eq!(s.events.len(), 2);
        s.build_world().unwrap();
    }

    #[test]
    fn bad_references_rejected() {
        let bad = MINIMAL.replace("serving_enb = 0", "serving_enb = 9");
        let err = Scenario::from_toml(&bad).unwrap_err();
        assert!(matches!(err, Error::Scenario(_)), "{err}");

        let neg = MINIMAL.replace("demand_mbps = 50.0", "demand_mbps = -1.0");
        assert!(Scenario::from_toml(&neg).is_err());
    }

    #[test]
    fn off_raster_channel_rejected_at_build() {
        let s = MINIMAL.replace("center_mhz = 3580.0", "center_mhz = 3583.0");
        let sc = Scenario::from_toml(&s).unwrap();
        assert!(sc.build_world().is_err());
    }

    #[test]
    fn controller_overrides_apply() {
        let text = format!(
            "{MINIMAL}
[controller]
n_sf = 40
epsilon = 0.4
"
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert_eq!(s.controller.n_sf, 40);
        assert_eq!(s.controller.epsilon, 0.4);
        // Unspecified keys keep defaults.
        assert_eq!(s.controller.n_nf, 8);
    }

    #[test]
    fn filter_overrides_reach_paths() {
        let text = format!(
            "{MINIMAL}
[filter]
insertion_loss_db = -3.5
"
        );
        let s = Scenario::from_toml(&text).unwrap();
        let w = s.build_world().unwrap();
        assert_eq!(w.surface.elements[0].paths[0].filter.insertion_loss_db, -3.5);
    }

    #[test]
    fn bad_tdd_config_rejected() {
        let text = format!(
            "{MINIMAL}
[tdd]
config_id = 9
"
        );
        assert!(Scenario::from_toml(&text).is_err());
    }
}
