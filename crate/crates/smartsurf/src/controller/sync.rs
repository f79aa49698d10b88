//! TDD time synchronization from RSRP glitches.
//!
//! The controller toggles the surface between two distinct phase
//! configurations at the subframe boundaries where it believes the link
//! direction flips. If its clock is offset, the toggles land mid-burst and
//! each produces an RSRP step ("glitch"). The offset estimator aligns the
//! observed glitch times against the frame configuration's direction
//! boundaries; a run with zero glitches means the clock is aligned.
//!
//! Because the downlink/uplink pattern of a frame configuration can repeat
//! with a sub-frame period (5 ms for the default configuration), offsets
//! are observable only modulo that direction period.

use crate::sim::RsrpSample;
use crate::tdd::{FrameConfig, SYMBOLS_PER_SUBFRAME};

/// Tolerance around a true boundary inside which an RSRP step is attributed
/// to the direction flip itself rather than a mistimed toggle.
pub const BOUNDARY_TOLERANCE_MS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SyncObservation {
    /// Estimated clock offset, ms, in (-period/2, period/2].
    pub estimate_ms: f64,
    /// Number of mistimed-toggle glitches found.
    pub glitches: usize,
}

fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Signed circular difference a - b mapped into (-period/2, period/2].
fn circular_signed(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d > period / 2.0 {
        d - period
    } else {
        d
    }
}

/// Extract glitch times: RSRP steps larger than `threshold_db` that do not
/// lie within [`BOUNDARY_TOLERANCE_MS`] of a true direction boundary.
/// `samples` must be a single eNB's stream in time order.
pub fn detect_glitches(
    samples: &[RsrpSample],
    cfg: &FrameConfig,
    threshold_db: f64,
) -> Vec<f64> {
    let period = cfg.direction_period_ms() as f64;
    let boundaries: Vec<f64> = cfg
        .direction_boundaries_ms()
        .iter()
        .map(|b| (*b as f64).rem_euclid(period))
        .collect();
    let mut out = Vec::new();
    for w in samples.windows(2) {
        if (w[1].rsrp_dbm - w[0].rsrp_dbm).abs() <= threshold_db {
            continue;
        }
        // The step is attributed to the start time of the later symbol.
        let t = w[1].time_ms;
        let near_boundary = boundaries
            .iter()
            .any(|&b| circular_distance(t, b, period) <= BOUNDARY_TOLERANCE_MS);
        if !near_boundary {
            out.push(t);
        }
    }
    out
}

/// Estimate the clock offset from mistimed-toggle glitch times.
///
/// `toggle_times_ms` is the controller's own log of when it switched the
/// surface (believed boundaries); it gates the estimator: with no toggles
/// there is nothing to align and the estimate is zero. The returned offset
/// is what must be subtracted from the controller clock to align it, and is
/// only meaningful modulo the direction period.
pub fn estimate_time_offset(
    samples: &[RsrpSample],
    cfg: &FrameConfig,
    toggle_times_ms: &[f64],
    threshold_db: f64,
) -> SyncObservation {
    let glitches = detect_glitches(samples, cfg, threshold_db);
    if glitches.is_empty() || toggle_times_ms.is_empty() {
        return SyncObservation {
            estimate_ms: 0.0,
            glitches: glitches.len(),
        };
    }
    let period = cfg.direction_period_ms() as f64;
    let boundaries: Vec<f64> = cfg
        .direction_boundaries_ms()
        .iter()
        .map(|b| (*b as f64).rem_euclid(period))
        .collect();

    // Coarse: grid-search the shift that best aligns glitches onto
    // boundaries, at symbol resolution.
    let steps = (period * SYMBOLS_PER_SUBFRAME as f64).round() as usize;
    let mut best_tau = 0.0;
    let mut best_cost = f64::INFINITY;
    for i in 0..steps {
        let tau = i as f64 / SYMBOLS_PER_SUBFRAME as f64;
        let cost: f64 = glitches
            .iter()
            .map(|&g| {
                boundaries
                    .iter()
                    .map(|&b| circular_distance(g, b + tau, period))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best_tau = tau;
        }
    }

    // Fine: median signed residual against the nearest shifted boundary.
    let mut residuals: Vec<f64> = glitches
        .iter()
        .map(|&g| {
            let b = boundaries
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    circular_distance(g, x + best_tau, period)
                        .total_cmp(&circular_distance(g, y + best_tau, period))
                })
                .unwrap();
            circular_signed(g, b + best_tau, period)
        })
        .collect();
    residuals.sort_by(f64::total_cmp);
    let median = residuals[residuals.len() / 2];

    let raw = best_tau + median;
    SyncObservation {
        estimate_ms: circular_signed(raw, 0.0, period),
        glitches: glitches.len(),
    }
}

/// Residual of an offset against the estimator's observable grid: the
/// distance from `offset_ms` to the nearest integer multiple of the
/// direction period once `estimate_ms` is removed.
pub fn offset_residual_ms(offset_ms: f64, estimate_ms: f64, period_ms: f64) -> f64 {
    circular_distance(offset_ms - estimate_ms, 0.0, period_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdd::default_frame_config;
    use approx::assert_abs_diff_eq;

    /// Synthesize an RSRP stream in which the surface toggle at believed
    /// boundary times (true boundary + offset) produces a 3 dB step, and
    /// true direction flips produce their own steps.
    fn synth_stream(offset_ms: f64, frames: usize) -> Vec<RsrpSample> {
        let cfg = default_frame_config();
        let period = cfg.direction_period_ms() as f64;
        let boundaries: Vec<f64> = cfg
            .direction_boundaries_ms()
            .iter()
            .map(|b| (*b as f64).rem_euclid(period))
            .collect();
        let mut out = Vec::new();
        let total_symbols = frames * 10 * SYMBOLS_PER_SUBFRAME as usize;
        for s in 0..total_symbols {
            let t = s as f64 / SYMBOLS_PER_SUBFRAME as f64;
            let tp = t.rem_euclid(period);
            // Direction level: +/-4 dB square wave across true boundaries.
            let dir_level = if (boundaries[0]..boundaries[1]).contains(&tp) {
                -60.0
            } else {
                -64.0
            };
            // Toggle level: 3 dB square wave across believed boundaries.
            let shifted = (tp - offset_ms).rem_euclid(period);
            let tog_level = if (boundaries[0]..boundaries[1]).contains(&shifted) {
                0.0
            } else {
                -3.0
            };
            out.push(RsrpSample {
                time_ms: t,
                enb_id: 0,
                rsrp_dbm: dir_level + tog_level,
            });
        }
        out
    }

    #[test]
    fn aligned_clock_has_no_glitches() {
        let cfg = default_frame_config();
        let s = synth_stream(0.0, 4);
        let g = detect_glitches(&s, &cfg, 1.0);
        assert!(g.is_empty(), "found {} glitches", g.len());
        let obs = estimate_time_offset(&s, &cfg, &[0.0, 2.0, 5.0, 7.0], 1.0);
        assert_eq!(obs.glitches, 0);
        assert_abs_diff_eq!(obs.estimate_ms, 0.0);
    }

    #[test]
    fn estimates_various_offsets_modulo_period() {
        let cfg = default_frame_config();
        let period = cfg.direction_period_ms() as f64;
        for &off in &[0.5, 1.0, 2.5, 4.9, 7.3, -0.5] {
            let s = synth_stream(off, 8);
            let obs = estimate_time_offset(&s, &cfg, &[0.0], 1.0);
            let resid = offset_residual_ms(off, obs.estimate_ms, period);
            if obs.glitches == 0 {
                // Offsets within the boundary tolerance of a period
                // multiple are indistinguishable from alignment.
                assert!(
                    offset_residual_ms(off, 0.0, period) <= BOUNDARY_TOLERANCE_MS,
                    "offset {off} produced no glitches"
                );
                continue;
            }
            assert!(
                resid <= 1.0 / SYMBOLS_PER_SUBFRAME as f64 + 1e-9,
                "offset {off}: estimate {} residual {resid}",
                obs.estimate_ms
            );
        }
    }

    #[test]
    fn no_toggles_means_zero_estimate() {
        let cfg = default_frame_config();
        let s = synth_stream(1.0, 4);
        let obs = estimate_time_offset(&s, &cfg, &[], 1.0);
        assert_abs_diff_eq!(obs.estimate_ms, 0.0);
    }

    #[test]
    fn circular_helpers() {
        assert_abs_diff_eq!(circular_distance(4.9, 0.0, 5.0), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(circular_signed(4.9, 0.0, 5.0), -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(circular_signed(2.5, 0.0, 5.0), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(offset_residual_ms(7.3, 2.3, 5.0), 0.0, epsilon = 1e-9);
    }
}
