//! Sideband/index transforms and the common/differential scatter matrix.
//!
//! AM and PM put the same lines around the carrier and differ only in the
//! sign of the lower sideband:
//!
//! ```text
//! lsb = A(a - p)/2      usb = A(a + p)/2
//! a   = (usb + lsb)/A   p   = (usb - lsb)/A
//! ```
//!
//! Pushing the three lines through `H` and converting back yields
//!
//! ```text
//! hc = (H(jωu) + H(jωl)) / 2H(jωc)     a' = hc·a + hd·p
//! hd = (H(jωu) - H(jωl)) / 2H(jωc)     p' = hd·a + hc·p
//! ```

use crate::error::{Error, Result};
use crate::filterlib::{Frequency, TransferFunction};
use crate::{to_db, Complex};

/// Carrier magnitudes below this cannot be used to normalize sidebands.
pub const DEFAULT_CARRIER_FLOOR: f64 = 1e-30;

/// Largest index magnitude for which the three-line model is a good
/// physical description.
pub const SMALL_INDEX_LIMIT: f64 = 0.1;

/// Carrier amplitude with AM and PM indices.
///
/// Inputs are normally real; after filtering all three are complex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationState {
    pub amplitude: Complex,
    pub am_index: Complex,
    pub pm_index: Complex,
}

impl ModulationState {
    pub fn new(amplitude: Complex, am_index: Complex, pm_index: Complex) -> Result<Self> {
        let m = ModulationState {
            amplitude,
            am_index,
            pm_index,
        };
        m.check()?;
        Ok(m)
    }

    /// Real-valued input state.
    pub fn real(amplitude: f64, am_index: f64, pm_index: f64) -> Result<Self> {
        Self::new(
            Complex::new(amplitude, 0.0),
            Complex::new(am_index, 0.0),
            Complex::new(pm_index, 0.0),
        )
    }

    fn check(&self) -> Result<()> {
        let finite = |c: Complex| c.re.is_finite() && c.im.is_finite();
        if !(finite(self.amplitude) && finite(self.am_index) && finite(self.pm_index)) {
            return Err(Error::invalid("modulation state has non-finite values"));
        }
        if self.amplitude.norm() <= 0.0 {
            return Err(Error::invalid("carrier amplitude must be nonzero"));
        }
        Ok(())
    }

    /// Whether both indices sit in the small-index regime (≤ 0.1).
    pub fn is_small_index(&self) -> bool {
        self.am_index.norm() <= SMALL_INDEX_LIMIT && self.pm_index.norm() <= SMALL_INDEX_LIMIT
    }
}

/// Complex line amplitudes at `fc - fm`, `fc` and `fc + fm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandTriplet {
    pub lsb: Complex,
    pub carrier: Complex,
    pub usb: Complex,
    pub fc: Frequency,
    pub fm: Frequency,
}

/// Common/differential responses of a filter for one `(fc, fm)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterResult {
    pub hc: Complex,
    pub hd: Complex,
    /// `H(jωc)`.
    pub carrier_gain: Complex,
    pub fc: Frequency,
    pub fm: Frequency,
}

impl ScatterResult {
    /// AM→AM (and PM→PM) coupling in dB.
    pub fn am_am_db(&self) -> f64 {
        to_db(self.hc.norm())
    }

    /// AM→PM (and PM→AM) coupling in dB; `-inf` for an exact null.
    pub fn am_pm_db(&self) -> f64 {
        to_db(self.hd.norm())
    }

    pub fn carrier_gain_db(&self) -> f64 {
        to_db(self.carrier_gain.norm())
    }

    /// The 2x2 map from `(a, p)` to `(a', p')`.
    pub fn matrix(&self) -> [[Complex; 2]; 2] {
        [[self.hc, self.hd], [self.hd, self.hc]]
    }
}

fn check_offsets(fc: Frequency, fm: Frequency) -> Result<()> {
    if fm >= fc {
        return Err(Error::invalid(format!(
            "modulation frequency ({fm}) must be below the carrier ({fc})"
        )));
    }
    Ok(())
}

pub fn sidebands_from_indices(
    m: &ModulationState,
    fc: Frequency,
    fm: Frequency,
) -> Result<SidebandTriplet> {
    check_offsets(fc, fm)?;
    m.check()?;
    let a = m.amplitude;
    Ok(SidebandTriplet {
        lsb: a * (m.am_index - m.pm_index) / 2.0,
        carrier: a,
        usb: a * (m.am_index + m.pm_index) / 2.0,
        fc,
        fm,
    })
}

pub fn indices_from_sidebands(s: &SidebandTriplet) -> Result<ModulationState> {
    indices_from_sidebands_with_floor(s, DEFAULT_CARRIER_FLOOR)
}

pub fn indices_from_sidebands_with_floor(
    s: &SidebandTriplet,
    floor: f64,
) -> Result<ModulationState> {
    let mag = s.carrier.norm();
    if !(mag >= floor) {
        return Err(Error::DegenerateCarrier { magnitude: mag });
    }
    Ok(ModulationState {
        amplitude: s.carrier,
        am_index: (s.usb + s.lsb) / s.carrier,
        pm_index: (s.usb - s.lsb) / s.carrier,
    })
}

/// The filter's response at the lower sideband, carrier and upper sideband.
fn line_responses(
    tf: &TransferFunction,
    fc: Frequency,
    fm: Frequency,
) -> Result<(Complex, Complex, Complex)> {
    check_offsets(fc, fm)?;
    let h_l = tf.evaluate(fc.hz() - fm.hz())?;
    let h_c = tf.evaluate(fc.hz())?;
    let h_u = tf.evaluate(fc.hz() + fm.hz())?;
    if !(h_c.norm() >= DEFAULT_CARRIER_FLOOR) {
        return Err(Error::DegenerateCarrier {
            magnitude: h_c.norm(),
        });
    }
    Ok((h_l, h_c, h_u))
}

/// Evaluates `H` at the three lines and forms `hc`, `hd`.
pub fn compute_scatter(tf: &TransferFunction, fc: Frequency, fm: Frequency) -> Result<ScatterResult> {
    let (h_l, h_c, h_u) = line_responses(tf, fc, fm)?;
    let twice_carrier = h_c * 2.0;
    Ok(ScatterResult {
        hc: (h_u + h_l) / twice_carrier,
        hd: (h_u - h_l) / twice_carrier,
        carrier_gain: h_c,
        fc,
        fm,
    })
}

pub fn apply_scatter(r: &ScatterResult, m: &ModulationState) -> ModulationState {
    ModulationState {
        amplitude: r.carrier_gain * m.amplitude,
        am_index: r.hc * m.am_index + r.hd * m.pm_index,
        pm_index: r.hd * m.am_index + r.hc * m.pm_index,
    }
}

/// Propagates the modulation line by line: indices to sidebands, each line
/// scaled by the response at its own frequency, sidebands back to indices.
pub fn propagate_via_sidebands(
    tf: &TransferFunction,
    m: &ModulationState,
    fc: Frequency,
    fm: Frequency,
) -> Result<ModulationState> {
    let lines = sidebands_from_indices(m, fc, fm)?;
    let (h_l, h_c, h_u) = line_responses(tf, fc, fm)?;
    let filtered = SidebandTriplet {
        lsb: h_l * lines.lsb,
        carrier: h_c * lines.carrier,
        usb: h_u * lines.usb,
        ..lines
    };
    indices_from_sidebands(&filtered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn hz(f: f64) -> Frequency {
        Frequency::new(f).unwrap()
    }

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn sidebands_for_equal_am_pm_cancel_lsb() {
        let m = ModulationState::real(1.0, 0.01, 0.01).unwrap();
        let s = sidebands_from_indices(&m, hz(1e6), hz(1e3)).unwrap();
        assert_eq!(s.lsb, c(0.0));
        assert_eq!(s.usb, c(0.01));
        assert_eq!(s.carrier, c(1.0));
    }

    #[test]
    fn pure_am_and_pure_pm_sidebands() {
        let am = ModulationState::real(1.0, 0.02, 0.0).unwrap();
        let s = sidebands_from_indices(&am, hz(1e6), hz(1e3)).unwrap();
        assert_eq!((s.lsb, s.usb), (c(0.01), c(0.01)));

        let pm = ModulationState::real(2.0, 0.0, 0.02).unwrap();
        let s = sidebands_from_indices(&pm, hz(1e6), hz(1e3)).unwrap();
        assert_eq!((s.lsb, s.usb), (c(-0.02), c(0.02)));
    }

    #[test]
    fn sidebands_require_fm_below_fc() {
        let m = ModulationState::real(1.0, 0.01, 0.0).unwrap();
        assert!(matches!(
            sidebands_from_indices(&m, hz(1e3), hz(1e3)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(sidebands_from_indices(&m, hz(1e3), hz(2e3)).is_err());
    }

    #[test]
    fn indices_from_known_sidebands() {
        let s = SidebandTriplet {
            lsb: c(0.01),
            carrier: c(1.0),
            usb: c(0.01),
            fc: hz(1e6),
            fm: hz(1e3),
        };
        let m = indices_from_sidebands(&s).unwrap();
        assert_eq!((m.am_index, m.pm_index), (c(0.02), c(0.0)));

        let s = SidebandTriplet {
            lsb: c(-0.005),
            usb: c(0.005),
            ..s
        };
        let m = indices_from_sidebands(&s).unwrap();
        assert_eq!((m.am_index, m.pm_index), (c(0.0), c(0.01)));
    }

    #[test]
    fn vanishing_carrier_is_degenerate() {
        let s = SidebandTriplet {
            lsb: c(0.01),
            carrier: c(1e-31),
            usb: c(0.01),
            fc: hz(1e6),
            fm: hz(1e3),
        };
        assert!(matches!(
            indices_from_sidebands(&s),
            Err(Error::DegenerateCarrier { .. })
        ));
        assert!(indices_from_sidebands_with_floor(&s, 1e-40).is_ok());
    }

    #[test]
    fn identity_filter_has_unit_common_and_null_differential() {
        let r = compute_scatter(&TransferFunction::identity(), hz(5e6), hz(1e3)).unwrap();
        assert_eq!(r.hc, c(1.0));
        assert_eq!(r.hd, c(0.0));
        assert_eq!(r.am_am_db(), 0.0);
        assert_eq!(r.am_pm_db(), f64::NEG_INFINITY);
    }

    #[test]
    fn paper_43_db_case() {
        let tf = TransferFunction::one_pole_lowpass(10e6).unwrap();
        let r = compute_scatter(&tf, hz(10e6), hz(100e3)).unwrap();
        assert!((r.hd.norm() - 100e3 / (SQRT_2 * 10e6)).abs() < 1e-7);
        assert!((r.am_pm_db() + 43.0).abs() < 0.2, "{}", r.am_pm_db());
        assert!((r.carrier_gain_db() + 3.0103).abs() < 1e-3);
    }

    #[test]
    fn paper_60_db_case() {
        let tf = TransferFunction::one_pole_lowpass(100e6).unwrap();
        let r = compute_scatter(&tf, hz(10e6), hz(100e3)).unwrap();
        assert!((r.am_pm_db() + 60.0).abs() < 1.0, "{}", r.am_pm_db());
    }

    /// Closed forms for the stable one-pole `ω0/(s+ω0)`, derived by hand:
    /// with `D = ω0² - ωc² + ωm² + 2jω0ωc`,
    /// `hc = (ω0 + jωc)² / D` and `hd = ωm(ωc - jω0) / D`.
    fn one_pole_closed_form(f0: f64, fc: f64, fm: f64) -> (Complex, Complex) {
        let (w0, wc, wm) = (2.0 * PI * f0, 2.0 * PI * fc, 2.0 * PI * fm);
        let d = Complex::new(w0 * w0 - wc * wc + wm * wm, 2.0 * w0 * wc);
        let hc = Complex::new(w0, wc).powi(2) / d;
        let hd = Complex::new(wm * wc, -wm * w0) / d;
        (hc, hd)
    }

    #[test]
    fn one_pole_matches_closed_form() {
        for &(f0, fc, fm) in &[
            (10e6, 10e6, 100e3),
            (100e6, 10e6, 100e3),
            (1e10, 1e7, 1e4),
            (1e5, 1e7, 1e4),
            (3.3e3, 1e3, 999.0),
        ] {
            let r = compute_scatter(
                &TransferFunction::one_pole_lowpass(f0).unwrap(),
                hz(fc),
                hz(fm),
            )
            .unwrap();
            let (hc, hd) = one_pole_closed_form(f0, fc, fm);
            // hd is a difference of two near-equal responses, so rounding
            // of order 1e-16 is absolute, not relative.
            assert!((r.hc - hc).norm() <= 1e-12 * hc.norm(), "{f0} {fc} {fm}");
            assert!((r.hd - hd).norm() <= 1e-12 * hd.norm() + 1e-15, "{f0} {fc} {fm}");
        }
    }

    #[test]
    fn far_passband_row() {
        let fc = 1e7;
        let r = compute_scatter(
            &TransferFunction::one_pole_lowpass(1000.0 * fc).unwrap(),
            hz(fc),
            hz(1e-3 * fc),
        )
        .unwrap();
        assert!((r.hc.norm() - 1.0).abs() < 1e-3);
        assert!(r.hd.norm() <= 2e-5, "{}", r.hd.norm());
    }

    #[test]
    fn apply_identity_scatter_is_noop() {
        let r = compute_scatter(&TransferFunction::identity(), hz(1e6), hz(1e3)).unwrap();
        let m = ModulationState::new(c(2.0), Complex::new(0.01, 0.003), c(-0.02)).unwrap();
        assert_eq!(apply_scatter(&r, &m), m);
    }

    #[test]
    fn pure_am_leaks_into_pm() {
        let tf = TransferFunction::one_pole_lowpass(10e6).unwrap();
        let r = compute_scatter(&tf, hz(10e6), hz(100e3)).unwrap();
        let out = apply_scatter(&r, &ModulationState::real(1.0, 0.01, 0.0).unwrap());
        assert!((out.pm_index.norm() - 7.07e-5).abs() < 0.01e-5);

        let via = propagate_via_sidebands(
            &tf,
            &ModulationState::real(1.0, 0.02, 0.0).unwrap(),
            hz(10e6),
            hz(100e3),
        )
        .unwrap();
        assert!((via.pm_index.norm() / 0.02 - r.hd.norm()).abs() <= 1e-12 * r.hd.norm());
    }

    #[test]
    fn identity_propagation_is_noop() {
        let m = ModulationState::real(1.5, 0.01, -0.004).unwrap();
        let out =
            propagate_via_sidebands(&TransferFunction::identity(), &m, hz(1e6), hz(10e3)).unwrap();
        assert!((out.am_index - m.am_index).norm() < 1e-17);
        assert!((out.pm_index - m.pm_index).norm() < 1e-17);
        assert_eq!(out.amplitude, m.amplitude);
    }

    #[test]
    fn tiny_offset_nearly_scales_input() {
        let tf = TransferFunction::one_pole_lowpass(10e6).unwrap();
        let fc = 10e6;
        let r = compute_scatter(&tf, hz(fc), hz(fc * 1e-9)).unwrap();
        assert!(r.hd.norm() < 1e-8);
        assert!((r.hc - 1.0).norm() < 1e-8);
    }

    #[test]
    fn zero_offset_is_exact() {
        let tf = TransferFunction::one_pole_lowpass(3e6).unwrap();
        let r = compute_scatter(&tf, hz(10e6), hz(0.0)).unwrap();
        assert_eq!(r.hc, c(1.0));
        assert_eq!(r.hd, c(0.0));
    }

    #[test]
    fn carrier_in_a_notch_is_degenerate() {
        // s² + ωc² zero pair on the carrier, over (s + ωc)².
        let wc = 2.0 * PI * 1e3;
        let tf = TransferFunction::new(vec![wc * wc, 0.0, 1.0], vec![wc * wc, 2.0 * wc, 1.0])
            .unwrap();
        let err = compute_scatter(&tf, hz(1e3), hz(10.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateCarrier { .. }), "{err:?}");
    }

    #[test]
    fn matrix_is_symmetric() {
        let tf = TransferFunction::one_pole_lowpass(2e6).unwrap();
        let r = compute_scatter(&tf, hz(10e6), hz(300e3)).unwrap();
        let m = r.matrix();
        assert_eq!(m[0][1], m[1][0]);
        assert_eq!(m[0][0], m[1][1]);
    }

    #[test]
    fn small_index_flag() {
        assert!(ModulationState::real(1.0, 0.1, 0.05).unwrap().is_small_index());
        assert!(!ModulationState::real(1.0, 0.2, 0.0).unwrap().is_small_index());
        assert!(ModulationState::real(0.0, 0.01, 0.0).is_err());
    }
}
