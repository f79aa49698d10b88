//! Domain types and link-budget arithmetic for the surface-assisted link.
//!
//! All gains and losses are in dB, powers in dBm, distances in meters and
//! frequencies in Hz. Component losses are stored as non-negative magnitudes
//! and subtracted, so a passive chain always produces a net loss.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Exact speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of quantized phase-shifter levels (pi/8 granularity).
pub const PHASE_LEVELS: u8 = 16;

/// Size of one phase quantization step, radians.
pub const PHASE_STEP: f64 = std::f64::consts::PI / 8.0;

pub const CBRS_LOW_HZ: f64 = 3.55e9;
pub const CBRS_HIGH_HZ: f64 = 3.70e9;

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A channel on the CBRS grid: center on a 10 MHz raster inside
/// 3550..=3700 MHz, bandwidth 10 or 20 MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbrsChannel {
    center_hz: f64,
    bandwidth_hz: f64,
}

impl CbrsChannel {
    pub fn new(center_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(CBRS_LOW_HZ..=CBRS_HIGH_HZ).contains(&center_hz) {
            return Err(Error::Domain(format!(
                "channel center {center_hz} Hz outside CBRS band"
            )));
        }
        let grid = center_hz / 10e6;
        if (grid - grid.round()).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "channel center {center_hz} Hz not a multiple of 10 MHz"
            )));
        }
        if bandwidth_hz != 10e6 && bandwidth_hz != 20e6 {
            return Err(Error::Domain(format!(
                "bandwidth {bandwidth_hz} Hz not in {{10, 20}} MHz"
            )));
        }
        Ok(Self {
            center_hz,
            bandwidth_hz,
        })
    }

    pub fn center_hz(&self) -> f64 {
        self.center_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// PRB budget: 50 PRB per 10 MHz of bandwidth.
    pub fn prb_budget(&self) -> u32 {
        (self.bandwidth_hz / 10e6).round() as u32 * 50
    }

    pub fn overlaps(&self, other: &CbrsChannel) -> bool {
        let half = (self.bandwidth_hz + other.bandwidth_hz) / 2.0;
        (self.center_hz - other.center_hz).abs() < half
    }
}

/// Per-element phase settings, one quantized level per element.
///
/// Levels index the 16-step pi/8 grid; `radians(i)` is the shifter angle of
/// element `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseVector {
    levels: Vec<u8>,
}

impl PhaseVector {
    pub fn zeros(k: usize) -> Self {
        Self {
            levels: vec![0; k],
        }
    }

    pub fn from_levels(levels: Vec<u8>) -> Self {
        Self {
            levels: levels.into_iter().map(|l| l % PHASE_LEVELS).collect(),
        }
    }

    /// Quantize arbitrary angles onto the 16-level grid (round to nearest).
    pub fn quantize(phases: &[f64]) -> Self {
        let levels = phases
            .iter()
            .map(|&p| {
                let step = (p / PHASE_STEP).round() as i64;
                step.rem_euclid(PHASE_LEVELS as i64) as u8
            })
            .collect();
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, i: usize) -> u8 {
        self.levels[i]
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn radians(&self, i: usize) -> f64 {
        self.levels[i] as f64 * PHASE_STEP
    }

    /// Shift element `i` by `steps` quantization steps (wrapping).
    pub fn shift(&mut self, i: usize, steps: i8) {
        let l = self.levels[i] as i16 + steps as i16;
        self.levels[i] = l.rem_euclid(PHASE_LEVELS as i16) as u8;
    }

    /// New vector with every element shifted by the matching entry of
    /// `delta` (wrapping).
    pub fn shifted(&self, delta: &[i8]) -> Self {
        assert_eq!(delta.len(), self.levels.len());
        let mut out = self.clone();
        for (i, &d) in delta.iter().enumerate() {
            out.shift(i, d);
        }
        out
    }
}

/// Gain/loss chain of one surface element. Losses are magnitudes (>= 0) and
/// are subtracted in [`element_gain`]; `l_splitop` is the 3 dB splitting
/// loss.
///
/// Defaults are the measured component values: G_rx = G_tx = 2.46 dB,
/// G_amp = 16.65 dB, splitter/combiner 0.64 dB each, phase shifter 2.5 dB,
/// filter 5 dB, line 1 dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElementGainChain {
    pub g_rx: f64,
    pub g_tx: f64,
    pub g_amp: f64,
    pub l_split: f64,
    pub l_comb: f64,
    pub l_phase: f64,
    pub l_filter: f64,
    pub l_line: f64,
    pub l_splitop: f64,
}

impl Default for ElementGainChain {
    fn default() -> Self {
        Self {
            g_rx: 2.46,
            g_tx: 2.46,
            g_amp: 16.65,
            l_split: 0.64,
            l_comb: 0.64,
            l_phase: 2.5,
            l_filter: 5.0,
            l_line: 1.0,
            l_splitop: 3.0,
        }
    }
}

impl ElementGainChain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_split", self.l_split),
            ("l_comb", self.l_comb),
            ("l_phase", self.l_phase),
            ("l_filter", self.l_filter),
            ("l_line", self.l_line),
            ("l_splitop", self.l_splitop),
        ] {
            if v < 0.0 {
                return Err(Error::Domain(format!("loss magnitude {name} = {v} < 0")));
            }
        }
        Ok(())
    }
}

/// Full link-budget breakdown for one element plus the k-element surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetResult {
    pub l_be: f64,
    pub l_eu: f64,
    pub g_ele: f64,
    pub l_ele: f64,
    pub g_s: f64,
}

/// Free-space path loss 20*log10(4*pi*d/lambda), dB.
pub fn free_space_path_loss(d_m: f64, f_hz: f64) -> Result<f64> {
    if d_m <= 0.0 || !d_m.is_finite() {
        return Err(Error::Domain(format!("distance {d_m} m must be > 0")));
    }
    if f_hz <= 0.0 || !f_hz.is_finite() {
        return Err(Error::Domain(format!("frequency {f_hz} Hz must be > 0")));
    }
    let lambda = SPEED_OF_LIGHT / f_hz;
    Ok(20.0 * (4.0 * std::f64::consts::PI * d_m / lambda).log10())
}

/// Net gain through one element: antenna and amplifier gains minus all
/// component loss magnitudes and the 3 dB splitting loss.
pub fn element_gain(chain: &ElementGainChain) -> f64 {
    chain.g_rx + chain.g_tx + chain.g_amp
        - chain.l_split
        - chain.l_comb
        - chain.l_phase
        - chain.l_filter
        - chain.l_line
        - chain.l_splitop
}

/// End-to-end element path "loss" (negative values mean net loss):
/// element gain minus both free-space hops.
pub fn element_path_loss(d_b: f64, d_u: f64, f_hz: f64, chain: &ElementGainChain) -> Result<f64> {
    let l_be = free_space_path_loss(d_b, f_hz)?;
    let l_eu = free_space_path_loss(d_u, f_hz)?;
    Ok(element_gain(chain) - l_be - l_eu)
}

/// Surface gain over the environment path for k elements (incoherent
/// power-sum form):
/// 10*log10(k * 10^((p_b - l_ele)/10) / 10^((p_b - l_env)/10)).
///
/// `p_b` cancels algebraically; it is kept as a parameter for fidelity to
/// the link-budget formulation.
pub fn surface_gain(k: u32, p_b: f64, l_ele: f64, l_env: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("element count k must be >= 1".into()));
    }
    let num = k as f64 * 10f64.powf((p_b - l_ele) / 10.0);
    let den = 10f64.powf((p_b - l_env) / 10.0);
    Ok(10.0 * (num / den).log10())
}

/// Coherent variant: amplitude-sum of k perfectly phase-aligned element
/// signals, 20*log10(k) element scaling.
pub fn surface_gain_coherent(k: u32, p_b: f64, l_ele: f64, l_env: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("element count k must be >= 1".into()));
    }
    let amp = k as f64 * 10f64.powf((p_b - l_ele) / 20.0);
    let den = 10f64.powf((p_b - l_env) / 20.0);
    Ok(20.0 * (amp / den).log10())
}

/// Convenience: the whole budget for one geometry.
pub fn link_budget(
    d_b: f64,
    d_u: f64,
    f_hz: f64,
    chain: &ElementGainChain,
    p_b: f64,
    l_env: f64,
    k: u32,
) -> Result<LinkBudgetResult> {
    let l_be = free_space_path_loss(d_b, f_hz)?;
    let l_eu = free_space_path_loss(d_u, f_hz)?;
    let g_ele = element_gain(chain);
    let l_ele = g_ele - l_be - l_eu;
    // Eq. form expects L_ele as a loss entering (p_b - l_ele); flip sign.
    let g_s = surface_gain(k, p_b, -l_ele, l_env)?;
    Ok(LinkBudgetResult {
        l_be,
        l_eu,
        g_ele,
        l_ele,
        g_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fspl_hand_evaluated() {
        // 20*log10(4*pi*5/(c/3.58e9))
        let v = free_space_path_loss(5.0, 3.58e9).unwrap();
        assert_abs_diff_eq!(v, 57.51, epsilon = 0.05);
    }

    #[test]
    fn fspl_zero_at_lambda_over_4pi() {
        let f = 3.6e9;
        let d = SPEED_OF_LIGHT / f / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(free_space_path_loss(d, f).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fspl_doubling_distance_adds_6db() {
        let a = free_space_path_loss(3.0, 3.6e9).unwrap();
        let b = free_space_path_loss(6.0, 3.6e9).unwrap();
        assert_abs_diff_eq!(b - a, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn fspl_rejects_nonpositive() {
        assert!(free_space_path_loss(0.0, 3.6e9).is_err());
        assert!(free_space_path_loss(-1.0, 3.6e9).is_err());
        assert!(free_space_path_loss(1.0, 0.0).is_err());
    }

    #[test]
    fn fspl_monotone_in_d_and_f() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..200 {
            let v = free_space_path_loss(0.1 * i as f64, 3.6e9).unwrap();
            assert!(v > prev);
            prev = v;
        }
        prev = f64::NEG_INFINITY;
        for i in 1..200 {
            let v = free_space_path_loss(5.0, 3.55e9 + 1e6 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn element_gain_paper_constants() {
        let g = element_gain(&ElementGainChain::default());
        // 2.46 + 2.46 + 16.65 - 0.64 - 0.64 - 2.5 - 5 - 1 - 3
        assert_abs_diff_eq!(g, 8.79, epsilon = 1e-9);
    }

    #[test]
    fn element_gain_zero_chain_keeps_splitting_loss() {
        let chain = ElementGainChain {
            g_rx: 0.0,
            g_tx: 0.0,
            g_amp: 0.0,
            l_split: 0.0,
            l_comb: 0.0,
            l_phase: 0.0,
            l_filter: 0.0,
            l_line: 0.0,
            l_splitop: 3.0,
        };
        assert_abs_diff_eq!(element_gain(&chain), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn element_gain_linear_in_amp() {
        let mut chain = ElementGainChain::default();
        let g0 = element_gain(&chain);
        chain.g_amp += 1.0;
        assert_abs_diff_eq!(element_gain(&chain), g0 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn element_gain_rx_tx_symmetric() {
        let mut a = ElementGainChain::default();
        a.g_rx = 1.0;
        a.g_tx = 4.0;
        let mut b = a;
        std::mem::swap(&mut b.g_rx, &mut b.g_tx);
        assert_eq!(element_gain(&a), element_gain(&b));
    }

    #[test]
    fn element_path_loss_composes() {
        let chain = ElementGainChain::default();
        let v = element_path_loss(5.0, 1.0, 3.58e9, &chain).unwrap();
        assert_abs_diff_eq!(v, -92.25, epsilon = 0.1);
    }

    #[test]
    fn element_path_loss_additive_in_gain() {
        let mut chain = ElementGainChain::default();
        let v0 = element_path_loss(5.0, 1.0, 3.58e9, &chain).unwrap();
        chain.g_amp += 2.5;
        let v1 = element_path_loss(5.0, 1.0, 3.58e9, &chain).unwrap();
        assert_abs_diff_eq!(v1, v0 + 2.5, epsilon = 1e-12);
    }

    #[test]
    fn element_path_loss_degenerate_second_hop() {
        let chain = ElementGainChain::default();
        let f = 3.6e9;
        let d_u = SPEED_OF_LIGHT / f / (4.0 * std::f64::consts::PI);
        let v = element_path_loss(5.0, d_u, f, &chain).unwrap();
        let expect = element_gain(&chain) - free_space_path_loss(5.0, f).unwrap();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
    }

    #[test]
    fn surface_gain_identities() {
        assert_abs_diff_eq!(surface_gain(1, 30.0, 60.0, 60.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            surface_gain(10, 30.0, 60.0, 60.0).unwrap(),
            10.0,
            epsilon = 1e-12
        );
        assert!(surface_gain(0, 30.0, 60.0, 60.0).is_err());
    }

    #[test]
    fn surface_gain_independent_of_pb() {
        let a = surface_gain(8, 30.0, 95.0, 70.0).unwrap();
        let b = surface_gain(8, -10.0, 95.0, 70.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn surface_gain_growth_law() {
        let g1 = surface_gain(1, 20.0, 90.0, 75.0).unwrap();
        for k in 1..=64u32 {
            let gk = surface_gain(k, 20.0, 90.0, 75.0).unwrap();
            assert_abs_diff_eq!(gk - g1, 10.0 * (k as f64).log10(), epsilon = 1e-12);
        }
    }

    #[test]
    fn surface_gain_unit_slope_in_lenv() {
        let g = |l_env: f64| surface_gain(4, 20.0, 90.0, l_env).unwrap();
        for i in 0..50 {
            let l = 60.0 + i as f64;
            assert_abs_diff_eq!(g(l + 1.0) - g(l), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn channel_grid_validation() {
        assert!(CbrsChannel::new(3.58e9, 20e6).is_ok());
        assert!(CbrsChannel::new(3.585e9, 20e6).is_err());
        assert!(CbrsChannel::new(3.54e9, 10e6).is_err());
        assert!(CbrsChannel::new(3.71e9, 10e6).is_err());
        assert!(CbrsChannel::new(3.58e9, 15e6).is_err());
    }

    #[test]
    fn prb_budget_scales_with_bandwidth() {
        assert_eq!(CbrsChannel::new(3.58e9, 10e6).unwrap().prb_budget(), 50);
        assert_eq!(CbrsChannel::new(3.58e9, 20e6).unwrap().prb_budget(), 100);
    }

    #[test]
    fn phase_quantization_idempotent() {
        let v = PhaseVector::quantize(&[0.3, 1.7, -0.4, 6.0]);
        let angles: Vec<f64> = (0..v.len()).map(|i| v.radians(i)).collect();
        let w = PhaseVector::quantize(&angles);
        assert_eq!(v, w);
    }

    #[test]
    fn phase_shift_wraps() {
        let mut v = PhaseVector::zeros(2);
        v.shift(0, -1);
        assert_eq!(v.level(0), 15);
        v.shift(0, 2);
        assert_eq!(v.level(0), 1);
    }
}
