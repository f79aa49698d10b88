//! LTE TDD frame structures and subframe timing.
//!
//! A frame is 10 subframes of 1 ms. Each subframe is downlink (D), special
//! (S) or uplink (U); DCI travels in D and S subframes only. SIB1 recurs
//! every 20 ms, i.e. subframe 0 of even frames.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Symbols per subframe; RSRP is sampled once per symbol.
pub const SYMBOLS_PER_SUBFRAME: u32 = 14;

pub const SUBFRAMES_PER_FRAME: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubframeKind {
    #[serde(rename = "D")]
    Downlink,
    #[serde(rename = "S")]
    Special,
    #[serde(rename = "U")]
    Uplink,
}

impl SubframeKind {
    /// D and S subframes carry DCI; U subframes do not.
    pub fn carries_dci(&self) -> bool {
        !matches!(self, SubframeKind::Uplink)
    }

    /// True when the eNB transmits in this subframe (D and S), false when
    /// a UE does (U).
    pub fn is_downlink_tx(&self) -> bool {
        !matches!(self, SubframeKind::Uplink)
    }

    pub fn letter(&self) -> char {
        match self {
            SubframeKind::Downlink => 'D',
            SubframeKind::Special => 'S',
            SubframeKind::Uplink => 'U',
        }
    }
}

use SubframeKind::{Downlink as D, Special as S, Uplink as U};

/// The seven standard LTE TDD uplink/downlink configurations.
const CONFIG_TABLE: [[SubframeKind; 10]; 7] = [
    [D, S, U, U, U, D, S, U, U, U], // 0
    [D, S, U, U, D, D, S, U, U, D], // 1
    [D, S, U, D, D, D, S, U, D, D], // 2
    [D, S, U, U, U, D, D, D, D, D], // 3
    [D, S, U, U, D, D, D, D, D, D], // 4
    [D, S, U, D, D, D, D, D, D, D], // 5
    [D, S, U, U, U, D, S, U, U, D], // 6
];

/// One of the seven standard TDD subframe patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    config_id: u8,
    pattern: [SubframeKind; 10],
}

impl FrameConfig {
    pub fn from_id(config_id: u8) -> Result<Self> {
        if config_id > 6 {
            return Err(Error::Domain(format!(
                "TDD config_id {config_id} outside 0..=6"
            )));
        }
        Ok(Self {
            config_id,
            pattern: CONFIG_TABLE[config_id as usize],
        })
    }

    pub fn config_id(&self) -> u8 {
        self.config_id
    }

    pub fn pattern(&self) -> &[SubframeKind; 10] {
        &self.pattern
    }

    pub fn kind(&self, subframe_index: u8) -> SubframeKind {
        self.pattern[(subframe_index % SUBFRAMES_PER_FRAME) as usize]
    }

    /// Subframe indices (ms offsets within a frame) at which the active
    /// transmitter direction changes relative to the previous subframe,
    /// treating the frame as circular.
    pub fn direction_boundaries_ms(&self) -> Vec<u32> {
        (0..10u32)
            .filter(|&i| {
                let prev = self.pattern[((i + 9) % 10) as usize];
                self.pattern[i as usize].is_downlink_tx() != prev.is_downlink_tx()
            })
            .collect()
    }

    /// Fundamental period of the transmitter-direction pattern in ms: the
    /// smallest divisor of 10 under which the D/U pattern repeats. Time
    /// offsets are observable from RSRP only modulo this period.
    pub fn direction_period_ms(&self) -> u32 {
        for p in [1u32, 2, 5, 10] {
            if 10 % p == 0
                && (0..10).all(|i| {
                    self.pattern[i as usize].is_downlink_tx()
                        == self.pattern[((i + p) % 10) as usize].is_downlink_tx()
                })
            {
                return p;
            }
        }
        10
    }
}

/// The paper's deployment pattern: uplink runs begin at subframes 2 and 7.
pub fn default_frame_config() -> FrameConfig {
    FrameConfig::from_id(0).expect("config 0 is valid")
}

/// Frame/subframe counter. Subframes are 1 ms, frames 10 ms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubframeClock {
    pub frame: u64,
    pub subframe: u8,
}

impl SubframeClock {
    pub fn time_ms(&self) -> f64 {
        self.frame as f64 * 10.0 + self.subframe as f64
    }

    pub fn advance(&mut self) {
        self.subframe += 1;
        if self.subframe == SUBFRAMES_PER_FRAME {
            self.subframe = 0;
            self.frame += 1;
        }
    }

    /// SIB1 is broadcast every 20 ms: subframe 0 of even frames.
    pub fn sib1_due(&self) -> bool {
        self.subframe == 0 && self.frame % 2 == 0
    }
}

pub fn subframe_kind(cfg: &FrameConfig, clock: &SubframeClock) -> SubframeKind {
    cfg.kind(clock.subframe)
}
