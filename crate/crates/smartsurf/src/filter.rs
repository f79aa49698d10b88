//! Varactor-tuned dual-mode resonator solver and behavioral pass-band
//! response.
//!
//! The resonator is described in admittance/electrical-length space. The odd
//! mode sees the outer line only; the even mode additionally sees the
//! loading element, modeled as a shorted stub (characteristic admittance
//! `y_e`, electrical length `theta_e`) alongside the inductance `l1`. Both
//! modes are loaded by the varactor capacitance `c_v`, and their resonances
//! are the zeros of the respective input susceptances. The odd resonance is
//! the upper pass-band edge, the even resonance the lower one.
//!
//! Electrical lengths scale linearly with frequency (non-dispersive lines):
//! `theta(f) = theta_ref * f / f_ref`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Susceptance residual accepted at a solved resonance, siemens.
pub const ROOT_RESIDUAL_S: f64 = 1e-9;

/// Default in-band search window for resonances, Hz.
pub const SEARCH_BAND_HZ: (f64, f64) = (3.0e9, 4.5e9);

/// Values larger than this during a grid scan are treated as pole
/// neighborhoods and excluded from bracketing.
const POLE_GUARD_S: f64 = 5.0;

/// Resonator description: outer-line and loading-element admittances and
/// electrical lengths at the reference frequency, plus the loading
/// inductance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Outer line characteristic admittance, siemens.
    pub y_o: f64,
    /// Loading stub characteristic admittance, siemens.
    pub y_e: f64,
    /// Outer line electrical length at `f_ref`, radians.
    pub theta_o_ref: f64,
    /// Loading stub electrical length at `f_ref`, radians.
    pub theta_e_ref: f64,
    /// Reference frequency for the electrical lengths, Hz.
    pub f_ref: f64,
    /// Loading inductance, henries (default 0.5 nH).
    pub l1: f64,
}

impl ResonatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.y_o <= 0.0 {
            return Err(Error::Domain(format!("y_o = {} must be > 0", self.y_o)));
        }
        if self.y_e < 0.0 {
            return Err(Error::Domain(format!("y_e = {} must be >= 0", self.y_e)));
        }
        for (name, th) in [
            ("theta_o_ref", self.theta_o_ref),
            ("theta_e_ref", self.theta_e_ref),
        ] {
            if !(0.0..std::f64::consts::PI).contains(&th) {
                return Err(Error::Domain(format!("{name} = {th} outside (0, pi)")));
            }
        }
        Ok(())
    }

    fn theta_o(&self, f: f64) -> f64 {
        self.theta_o_ref * f / self.f_ref
    }

    fn theta_e(&self, f: f64) -> f64 {
        self.theta_e_ref * f / self.f_ref
    }

    /// Susceptance of the loading element at `f`: shorted stub in parallel
    /// with the inductance `l1`. `y_e == 0` means no loading element at all
    /// (the even mode then degenerates per the plain outer-line form).
    fn loading_susceptance(&self, f: f64) -> Option<f64> {
        if self.y_e == 0.0 {
            return Some(0.0);
        }
        let te = self.theta_e(f);
        let t = te.tan();
        if t.abs() < 1e-12 {
            return None; // cot pole
        }
        let mut b = -self.y_e / t;
        if self.l1 > 0.0 {
            b -= 1.0 / (TWO_PI * f * self.l1);
        }
        Some(b)
    }

    /// Imaginary part of the odd-mode input admittance,
    /// `w*C_v - Y_o/tan(theta_o)`, siemens.
    pub fn odd_mode_admittance(&self, c_v: f64, f: f64) -> Result<f64> {
        if f <= 0.0 {
            return Err(Error::Domain(format!("frequency {f} must be > 0")));
        }
        let t = self.theta_o(f).tan();
        if t.abs() < 1e-12 {
            return Err(Error::Domain("odd-mode tangent pole".into()));
        }
        Ok(TWO_PI * f * c_v - self.y_o / t)
    }

    /// Imaginary part of the even-mode input admittance,
    /// `w*C_v + Y_o*(B + Y_o*tan(theta_o)) / (Y_o - B*tan(theta_o))`, with
    /// `B` the loading-element susceptance at `f`, siemens.
    pub fn even_mode_admittance(&self, c_v: f64, f: f64) -> Result<f64> {
        if f <= 0.0 {
            return Err(Error::Domain(format!("frequency {f} must be > 0")));
        }
        let t = self.theta_o(f).tan();
        let b = self
            .loading_susceptance(f)
            .ok_or_else(|| Error::Domain("loading-stub cotangent pole".into()))?;
        let den = self.y_o - b * t;
        if den.abs() < 1e-12 {
            return Err(Error::Domain("even-mode denominator pole".into()));
        }
        Ok(TWO_PI * f * c_v + self.y_o * (b + self.y_o * t) / den)
    }
}

/// Varactor bias point. Bias must stay in the 2..=6 V hardware range;
/// capacitance is strictly decreasing in bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaractorState {
    pub bias_v: f64,
    pub c_v: f64,
}

/// Abrupt-junction bias-to-capacitance law `C(V) = C0 * (1 + V/phi)^(-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaractorLaw {
    pub c0: f64,
    pub phi: f64,
    pub gamma: f64,
}

impl VaractorLaw {
    /// Fit `c0` and `gamma` so the law passes through two (bias,
    /// capacitance) anchors at a fixed junction potential `phi`.
    pub fn fit(phi: f64, b1: f64, c1: f64, b2: f64, c2: f64) -> Result<Self> {
        if b1 >= b2 || c1 <= c2 {
            return Err(Error::Domain(
                "anchors must satisfy b1 < b2 and c1 > c2".into(),
            ));
        }
        let gamma = (c1 / c2).ln() / ((1.0 + b2 / phi) / (1.0 + b1 / phi)).ln();
        let c0 = c1 * (1.0 + b1 / phi).powf(gamma);
        Ok(Self { c0, phi, gamma })
    }

    pub fn state(&self, bias_v: f64) -> Result<VaractorState> {
        if !(2.0..=6.0).contains(&bias_v) {
            return Err(Error::Domain(format!(
                "bias {bias_v} V outside 2..=6 V range"
            )));
        }
        Ok(VaractorState {
            bias_v,
            c_v: self.capacitance(bias_v),
        })
    }

    /// Invert the law: the bias that yields capacitance `c` (farads).
    pub fn bias_for_capacitance(&self, c: f64) -> Result<f64> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::Domain(format!("capacitance {c} F must be > 0")));
        }
        Ok(self.phi * ((self.c0 / c).powf(1.0 / self.gamma) - 1.0))
    }

    pub fn capacitance(&self, bias_v: f64) -> f64 {
        self.c0 * (1.0 + bias_v / self.phi).powf(-self.gamma)
    }
}

impl Default for VaractorLaw {
    /// Anchored so bias 3.0 V -> 0.9 pF (center 3.55 GHz) and
    /// bias 4.5 V -> 0.6 pF (center 3.70 GHz).
    fn default() -> Self {
        VaractorLaw::fit(0.7, 3.0, 0.9e-12, 4.5, 0.6e-12).expect("default anchors valid")
    }
}

/// Behavioral pass-band response used by the air-link simulator. Flat at the
/// insertion loss within +/-10 MHz of center, then linear roll-off, with the
/// extra attenuation capped at 40 dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterResponse {
    pub center_hz: f64,
    /// Loss at center, dB (negative).
    pub insertion_loss_db: f64,
    /// Roll-off steepness, dB per 20 MHz beyond the pass edge.
    pub rolloff_db_per_20mhz: f64,
}

impl FilterResponse {
    /// Half-width of the flat pass region, Hz.
    pub const FLAT_HALF_WIDTH_HZ: f64 = 10e6;

    /// Extra attenuation cap beyond the insertion loss, dB.
    pub const ROLLOFF_CAP_DB: f64 = 40.0;

    pub fn new(center_hz: f64) -> Self {
        Self {
            center_hz,
            insertion_loss_db: -6.1,
            rolloff_db_per_20mhz: 3.23,
        }
    }

    /// Same loss profile, new center.
    pub fn retuned(&self, center_hz: f64) -> Self {
        Self { center_hz, ..*self }
    }

    /// Attenuation at `f`, dB (negative).
    pub fn response_at(&self, f_hz: f64) -> f64 {
        let dist = (f_hz - self.center_hz).abs();
        if dist <= Self::FLAT_HALF_WIDTH_HZ {
            return self.insertion_loss_db;
        }
        let extra = (self.rolloff_db_per_20mhz * (dist - Self::FLAT_HALF_WIDTH_HZ) / 20e6)
            .min(Self::ROLLOFF_CAP_DB);
        self.insertion_loss_db - extra
    }

    /// Attenuation relative to the pass-band center, dB (>= 0). The
    /// simulator applies this on top of the chain's nominal filter loss to
    /// avoid double-counting the insertion loss.
    pub fn excess_attenuation_db(&self, f_hz: f64) -> f64 {
        self.insertion_loss_db - self.response_at(f_hz)
    }
}

fn bisect<F: Fn(f64) -> Option<f64>>(f: &F, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < ROOT_RESIDUAL_S * 0.1 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Lowest in-band zero of `f`, skipping pole neighborhoods.
fn lowest_root<F: Fn(f64) -> Option<f64>>(f: F, band: (f64, f64)) -> Result<f64> {
    const N: usize = 3000;
    let step = (band.1 - band.0) / N as f64;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=N {
        let x = band.0 + step * i as f64;
        let v = f(x).filter(|v| v.abs() < POLE_GUARD_S);
        if let (Some((px, pv)), Some(v)) = (prev, v) {
            if pv.signum() != v.signum() {
                if let Some(root) = bisect(&f, px, x) {
                    return Ok(root);
                }
            }
        }
        prev = v.map(|v| (x, v));
    }
    Err(Error::NoResonance {
        lo_hz: band.0,
        hi_hz: band.1,
    })
}

/// Lowest odd- and even-mode resonances inside `band`, Hz. Residual of the
/// corresponding susceptance is below [`ROOT_RESIDUAL_S`].
pub fn resonant_frequencies(
    params: &ResonatorParams,
    c_v: f64,
    band: (f64, f64),
) -> Result<(f64, f64)> {
    params.validate()?;
    let f_odd = lowest_root(|f| params.odd_mode_admittance(c_v, f).ok(), band)?;
    let f_even = lowest_root(|f| params.even_mode_admittance(c_v, f).ok(), band)?;
    Ok((f_odd, f_even))
}

/// Tuning targets for [`align_tuning_rates`]: at capacitance `c_v1` the
/// pass band is centered at `center_high_hz`, at `c_v2 > c_v1` it is
/// centered at `center_low_hz`; `passband_hz` is the odd-even edge spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningTargets {
    pub c_v1: f64,
    pub c_v2: f64,
    pub center_high_hz: f64,
    pub center_low_hz: f64,
    pub passband_hz: f64,
    pub f_ref: f64,
    pub l1: f64,
}

impl Default for TuningTargets {
    fn default() -> Self {
        Self {
            c_v1: 0.6e-12,
            c_v2: 0.9e-12,
            center_high_hz: 3.70e9,
            center_low_hz: 3.55e9,
            passband_hz: 10e6,
            f_ref: 3.6e9,
            l1: 0.5e-9,
        }
    }
}

/// Dimension the resonator so both modes tune across the target band at
/// matching rates.
///
/// The odd mode has two free parameters and two band-edge conditions, so it
/// is pinned exactly by bisection. The even mode's loading element can only
/// approximate its two conditions (a passive load's susceptance slope is
/// bounded from below), so the stub is anchored to the mid-range target and
/// its length is chosen by golden-section search to minimize the residual
/// tuning-rate mismatch. The result is rejected if the mismatch exceeds 1%.
pub fn align_tuning_rates(targets: &TuningTargets) -> Result<ResonatorParams> {
    let t = targets;
    if t.c_v1 >= t.c_v2 {
        return Err(Error::Domain("require c_v1 < c_v2".into()));
    }
    let hw = t.passband_hz / 2.0;
    // Odd mode (upper edge): exact two-point solve.
    let fo1 = t.center_high_hz + hw;
    let fo2 = t.center_low_hz + hw;
    let odd_gap = |th: f64| -> f64 {
        TWO_PI * fo1 * t.c_v1 * (th * fo1 / t.f_ref).tan()
            - TWO_PI * fo2 * t.c_v2 * (th * fo2 / t.f_ref).tan()
    };
    let th_max = 0.999_999 * std::f64::consts::FRAC_PI_2 * t.f_ref / fo1.max(fo2);
    let theta_o_ref = bisect(&|th| Some(odd_gap(th)), 1e-9, th_max).ok_or_else(|| {
        Error::InfeasibleDesign("odd-mode edge targets admit no electrical length".into())
    })?;
    let y_o = TWO_PI * fo1 * t.c_v1 * (theta_o_ref * fo1 / t.f_ref).tan();

    // Even mode (lower edge): anchor the stub at the mid-range target, then
    // pick the stub length that minimizes the tuning-rate mismatch.
    let fe1 = t.center_high_hz - hw;
    let fe2 = t.center_low_hz - hw;
    let (c_mid, fe_mid) = (0.5 * (t.c_v1 + t.c_v2), 0.5 * (fe1 + fe2));
    let required_b = |c_v: f64, f: f64| -> Option<f64> {
        let w = TWO_PI * f;
        let tan_o = (theta_o_ref * f / t.f_ref).tan();
        let den = y_o - w * c_v * tan_o;
        if den.abs() < 1e-12 {
            return None;
        }
        Some(-y_o * (w * c_v + y_o * tan_o) / den)
    };
    let b_mid = required_b(c_mid, fe_mid)
        .ok_or_else(|| Error::InfeasibleDesign("mid-band loading requirement at a pole".into()))?;
    let stub_b_mid = b_mid + 1.0 / (TWO_PI * fe_mid * t.l1);
    if stub_b_mid >= 0.0 {
        return Err(Error::InfeasibleDesign(format!(
            "mid-band loading susceptance {stub_b_mid:.4} S not inductive; \
             achievable band excludes [{fe2:.3e}, {fe1:.3e}] Hz"
        )));
    }

    let build = |theta_e_ref: f64| -> ResonatorParams {
        // y_e from the mid anchor: -y_e / tan(theta_e(fe_mid)) = stub_b_mid.
        let y_e = -stub_b_mid * (theta_e_ref * fe_mid / t.f_ref).tan();
        ResonatorParams {
            y_o,
            y_e,
            theta_o_ref,
            theta_e_ref,
            f_ref: t.f_ref,
            l1: t.l1,
        }
    };
    let rate_mismatch = |theta_e_ref: f64| -> f64 {
        let p = build(theta_e_ref);
        let e1 = lowest_root(|f| p.even_mode_admittance(t.c_v1, f).ok(), SEARCH_BAND_HZ);
        let e2 = lowest_root(|f| p.even_mode_admittance(t.c_v2, f).ok(), SEARCH_BAND_HZ);
        match (e1, e2) {
            (Ok(e1), Ok(e2)) => ((e1 - e2) - (fo1 - fo2)).abs() / (fo1 - fo2).abs(),
            _ => f64::INFINITY,
        }
    };
    // Golden-section minimization over the stub length.
    let (mut a, mut b) = (0.02f64, 1.4f64);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - inv_phi * (b - a), a + inv_phi * (b - a));
    let (mut f1, mut f2) = (rate_mismatch(x1), rate_mismatch(x2));
    for _ in 0..40 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = rate_mismatch(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = rate_mismatch(x2);
        }
    }
    let theta_e_ref = if f1 < f2 { x1 } else { x2 };
    let params = build(theta_e_ref);
    params.validate()?;

    let (odd1, even1) = resonant_frequencies(&params, t.c_v1, SEARCH_BAND_HZ)?;
    let (odd2, even2) = resonant_frequencies(&params, t.c_v2, SEARCH_BAND_HZ)?;
    let mismatch = ((even1 - even2) - (odd1 - odd2)).abs() / (odd1 - odd2).abs();
    if mismatch > 0.01 {
        return Err(Error::InfeasibleDesign(format!(
            "tuning-rate mismatch {:.2}% exceeds 1%; achievable centers \
             [{:.4e}, {:.4e}] Hz",
            mismatch * 100.0,
            (odd2 + even2) / 2.0,
            (odd1 + even1) / 2.0
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solved() -> ResonatorParams {
        align_tuning_rates(&TuningTargets::default()).unwrap()
    }

    #[test]
    fn odd_root_quarter_wave_when_unloaded() {
        // C_v -> 0: the root sits where theta_o = pi/2.
        let p = ResonatorParams {
            y_o: 0.1,
            y_e: 0.0,
            theta_o_ref: 1.3,
            theta_e_ref: 0.5,
            f_ref: 3.6e9,
            l1: 0.0,
        };
        let quarter_wave = std::f64::consts::FRAC_PI_2 / 1.3 * 3.6e9;
        let root = lowest_root(|f| p.odd_mode_admittance(1e-18, f).ok(), (3.0e9, 5.0e9)).unwrap();
        assert_abs_diff_eq!(root, quarter_wave, epsilon = 1e3);
    }

    #[test]
    fn even_mode_reduces_when_unloaded() {
        let p = ResonatorParams {
            y_o: 0.1,
            y_e: 0.0,
            theta_o_ref: 1.3,
            theta_e_ref: 0.5,
            f_ref: 3.6e9,
            l1: 0.5e-9,
        };
        let f = 3.6e9;
        let expect = TWO_PI * f * 0.8e-12 + 0.1 * (1.3f64).tan();
        assert_abs_diff_eq!(
            p.even_mode_admittance(0.8e-12, f).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn roots_decrease_with_capacitance() {
        let p = solved();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..100 {
            let c_v = 0.6e-12 + 0.3e-12 * i as f64 / 99.0;
            let (fo, fe) = resonant_frequencies(&p, c_v, SEARCH_BAND_HZ).unwrap();
            if let Some((po, pe)) = prev {
                assert!(fo < po, "odd root must fall as C_v grows");
                assert!(fe < pe, "even root must fall as C_v grows");
            }
            prev = Some((fo, fe));
        }
    }

    #[test]
    fn roots_bracket_pass_band() {
        let p = solved();
        let (fo, fe) = resonant_frequencies(&p, 0.75e-12, SEARCH_BAND_HZ).unwrap();
        assert!(fe < fo, "even (lower) edge below odd (upper) edge");
        let width = fo - fe;
        assert!(width > 5e6 && width < 20e6, "width {width}");
    }

    #[test]
    fn root_residuals_below_tolerance() {
        let p = solved();
        for c_v in [0.6e-12, 0.7e-12, 0.8e-12, 0.9e-12] {
            let (fo, fe) = resonant_frequencies(&p, c_v, SEARCH_BAND_HZ).unwrap();
            assert!(p.odd_mode_admittance(c_v, fo).unwrap().abs() < ROOT_RESIDUAL_S);
            assert!(p.even_mode_admittance(c_v, fe).unwrap().abs() < ROOT_RESIDUAL_S);
        }
    }

    #[test]
    fn solved_design_reproduces_band_edges() {
        let t = TuningTargets::default();
        let p = align_tuning_rates(&t).unwrap();
        let hw = t.passband_hz / 2.0;
        let (fo1, fe1) = resonant_frequencies(&p, t.c_v1, SEARCH_BAND_HZ).unwrap();
        let (fo2, fe2) = resonant_frequencies(&p, t.c_v2, SEARCH_BAND_HZ).unwrap();
        assert!((fo1 - (t.center_high_hz + hw)).abs() < 5e6);
        assert!((fe1 - (t.center_high_hz - hw)).abs() < 5e6);
        assert!((fo2 - (t.center_low_hz + hw)).abs() < 5e6);
        assert!((fe2 - (t.center_low_hz - hw)).abs() < 5e6);
    }

    #[test]
    fn no_resonance_outside_band() {
        let p = solved();
        assert!(matches!(
            resonant_frequencies(&p, 0.75e-12, (1.0e9, 1.5e9)),
            Err(Error::NoResonance { .. })
        ));
    }

    #[test]
    fn varactor_law_monotone_and_anchored() {
        let law = VaractorLaw::default();
        assert_abs_diff_eq!(law.capacitance(3.0), 0.9e-12, epsilon = 1e-18);
        assert_abs_diff_eq!(law.capacitance(4.5), 0.6e-12, epsilon = 1e-18);
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let c = law.capacitance(2.0 + 4.0 * i as f64 / 40.0);
            assert!(c < prev);
            prev = c;
        }
        assert!(law.state(1.5).is_err());
        assert!(law.state(6.5).is_err());
    }

    #[test]
    fn response_shape() {
        let r = FilterResponse::new(3.6e9);
        assert_abs_diff_eq!(r.response_at(3.6e9), -6.1);
        // One 20 MHz step beyond the pass edge.
        assert_abs_diff_eq!(r.response_at(3.6e9 + 30e6), -6.1 - 3.23, epsilon = 1e-12);
        for d in [5e6, 17e6, 43e6, 200e6] {
            assert_abs_diff_eq!(
                r.response_at(3.6e9 + d),
                r.response_at(3.6e9 - d),
                epsilon = 1e-12
            );
        }
        // Cap at 40 dB extra.
        assert_abs_diff_eq!(r.response_at(3.6e9 + 1e9), -46.1, epsilon = 1e-12);
        assert_abs_diff_eq!(r.excess_attenuation_db(3.6e9 + 30e6), 3.23, epsilon = 1e-12);
    }
}
