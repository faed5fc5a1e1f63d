//! Temperature-driven defocus of the divergence-control optics.
//!
//! The measured deviation is linear in temperature on each side of the 20 °C
//! reference, with different slopes for cold and hot excursions, and is known
//! at two divergence anchors (collimated and 5 mrad). Between anchors the
//! deviation is interpolated linearly in the set divergence.
//!
//! Physically the drift is a defocus: it moves the effective lens position.
//! [`ThermalShift`] expresses the same anchors as an affine map of the signed
//! lens position, which is what lets a collimated beam that drifted wide be
//! pulled back by moving the lens across the collimation point. On the
//! diverging branch the two descriptions agree exactly.

use serde::{Deserialize, Serialize};

use super::map::{Branch, DivergenceMap};
use crate::beam_optics::DivergenceAngle;
use crate::error::{Error, Result};

pub const REFERENCE_TEMPERATURE: f64 = 20.0;
pub const QUALIFIED_RANGE: (f64, f64) = (-30.0, 60.0);

/// Deviation slopes for one anchor, radians per °C away from the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSlopes {
    pub cold: f64,
    pub hot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalModel {
    pub reference_temperature: f64,
    /// FWHM set divergence of the narrow anchor, radians.
    pub collimated_anchor: f64,
    /// FWHM set divergence of the wide anchor, radians.
    pub wide_anchor: f64,
    pub collimated: SideSlopes,
    pub wide: SideSlopes,
    pub min_temperature: f64,
    pub max_temperature: f64,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self::design()
    }
}

impl ThermalModel {
    /// Anchored at 7.5× / 4.7× the collimated 90 µrad and 1/1.2× / 1.1× of
    /// 5 mrad at −30 °C / +60 °C.
    pub fn design() -> Self {
        let (cold_t, hot_t) = QUALIFIED_RANGE;
        let cold_span = REFERENCE_TEMPERATURE - cold_t;
        let hot_span = hot_t - REFERENCE_TEMPERATURE;
        let c = 90e-6;
        let w = 5e-3;
        Self {
            reference_temperature: REFERENCE_TEMPERATURE,
            collimated_anchor: c,
            wide_anchor: w,
            collimated: SideSlopes {
                cold: (7.5 * c - c) / cold_span,
                hot: (4.7 * c - c) / hot_span,
            },
            wide: SideSlopes {
                cold: (w / 1.2 - w) / cold_span,
                hot: (1.1 * w - w) / hot_span,
            },
            min_temperature: cold_t,
            max_temperature: hot_t,
        }
    }

    /// No temperature dependence at all.
    pub fn neutral() -> Self {
        let zero = SideSlopes { cold: 0.0, hot: 0.0 };
        Self {
            collimated: zero,
            wide: zero,
            ..Self::design()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.reference_temperature,
            self.collimated_anchor,
            self.wide_anchor,
            self.collimated.cold,
            self.collimated.hot,
            self.wide.cold,
            self.wide.hot,
            self.min_temperature,
            self.max_temperature,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("thermal model", "all fields must be finite"));
        }
        if !(self.collimated_anchor > 0.0 && self.wide_anchor > self.collimated_anchor) {
            return Err(Error::invalid("thermal model", "need 0 < collimated_anchor < wide_anchor"));
        }
        if !(self.min_temperature <= self.reference_temperature && self.reference_temperature <= self.max_temperature) {
            return Err(Error::invalid("thermal model", "reference temperature outside the qualified range"));
        }
        Ok(())
    }

    pub fn check_temperature(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.min_temperature || t > self.max_temperature {
            return Err(Error::OutOfRange {
                name: "temperature",
                value: t,
                min: self.min_temperature,
                max: self.max_temperature,
            });
        }
        Ok(())
    }

    fn side_deviation(slopes: &SideSlopes, dt: f64) -> f64 {
        if dt < 0.0 {
            slopes.cold * -dt
        } else {
            slopes.hot * dt
        }
    }

    /// Deviation at the (collimated, wide) anchors at temperature `t`.
    pub fn anchor_deviations(&self, t: f64) -> (f64, f64) {
        let dt = t - self.reference_temperature;
        (
            Self::side_deviation(&self.collimated, dt),
            Self::side_deviation(&self.wide, dt),
        )
    }

    /// Divergence deviation for a given set divergence, interpolated (or
    /// extrapolated) linearly between the anchors.
    pub fn deviation(&self, theta_set: f64, t: f64) -> f64 {
        let (dc, dw) = self.anchor_deviations(t);
        let frac = (theta_set - self.collimated_anchor) / (self.wide_anchor - self.collimated_anchor);
        dc + frac * (dw - dc)
    }

    /// Position-space equivalent of this model at temperature `t`.
    pub fn shift(&self, t: f64, map: &DivergenceMap) -> Result<ThermalShift> {
        self.check_temperature(t)?;
        let (dc, dw) = self.anchor_deviations(t);
        let span = self.wide_anchor - self.collimated_anchor;
        // The collimated point cannot get narrower than its diffraction limit.
        let dc = dc.max(0.0);
        let offset = dc / map.diverging_slope;
        let diverging_scale = 1.0 + (dw - dc) / span;
        let converging_scale = (span + dw + dc * map.converging_slope / map.diverging_slope) / span;
        if !(diverging_scale > 0.0 && converging_scale > 0.0) {
            return Err(Error::Numerical(format!(
                "thermal model at {t} °C folds the lens map (scales {diverging_scale}, {converging_scale})"
            )));
        }
        Ok(ThermalShift {
            offset,
            diverging_scale,
            converging_scale,
        })
    }
}

/// Affine, branch-wise map from mechanical to effective (optical) lens
/// position at one temperature. Continuous and strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalShift {
    pub offset: f64,
    pub diverging_scale: f64,
    pub converging_scale: f64,
}

impl ThermalShift {
    pub fn effective_position(&self, x: f64) -> f64 {
        let scale = match Branch::of_position(x) {
            Branch::Diverging => self.diverging_scale,
            Branch::Converging => self.converging_scale,
        };
        self.offset + scale * x
    }

    pub fn mechanical_position(&self, x_eff: f64) -> f64 {
        let scale = if x_eff >= self.offset {
            self.diverging_scale
        } else {
            self.converging_scale
        };
        (x_eff - self.offset) / scale
    }
}

/// Divergence actually produced when `theta_set` is dialed in at `t` °C.
pub fn apply_temperature(theta_set: DivergenceAngle, t: f64, model: &ThermalModel) -> Result<DivergenceAngle> {
    model.check_temperature(t)?;
    let set = theta_set.fwhm_value();
    DivergenceAngle::fwhm(set + model.deviation(set, t))
}

/// Divergence produced at mechanical lens position `x` and temperature `t`.
pub fn divergence_at_temperature(x: f64, t: f64, model: &ThermalModel, map: &DivergenceMap) -> Result<DivergenceAngle> {
    let shift = model.shift(t, map)?;
    DivergenceAngle::fwhm(map.divergence_at(shift.effective_position(x)))
}

/// Lens position that yields `theta_target` at temperature `t`.
///
/// Tries `preferred` first and falls back to the other branch when the
/// compensated position would leave the travel range.
pub fn temperature_corrected_position(
    theta_target: DivergenceAngle,
    t: f64,
    model: &ThermalModel,
    map: &DivergenceMap,
    preferred: Branch,
) -> Result<(f64, Branch)> {
    let target = theta_target.fwhm_value();
    if target < map.collimated_divergence * (1.0 - 1e-12) {
        return Err(Error::OutOfRange {
            name: "divergence",
            value: target,
            min: map.collimated_divergence,
            max: map.common_max(),
        });
    }
    let shift = model.shift(t, map)?;
    for branch in [preferred, preferred.other()] {
        let x = shift.mechanical_position(map.position_at(target, branch));
        if x.abs() <= map.max_travel {
            return Ok((x, branch));
        }
    }
    Err(Error::OutOfRange {
        name: "thermally corrected lens position",
        value: shift.mechanical_position(map.position_at(target, preferred)),
        min: -map.max_travel,
        max: map.max_travel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fwhm(v: f64) -> DivergenceAngle {
        DivergenceAngle::fwhm(v).unwrap()
    }

    #[test]
    fn anchors() {
        let m = ThermalModel::design();
        let at = |theta: f64, t: f64| apply_temperature(fwhm(theta), t, &m).unwrap().value();
        assert_eq!(at(90e-6, 20.0), 90e-6);
        assert!((at(90e-6, -30.0) - 675e-6).abs() < 1e-15);
        assert!((at(90e-6, 60.0) - 423e-6).abs() < 1e-15);
        assert!((at(5e-3, -30.0) - 4.16667e-3).abs() < 1e-8);
        assert!((at(5e-3, 60.0) - 5.5e-3).abs() < 1e-15);
        assert!((m.collimated.cold - 11.7e-6).abs() < 1e-18);
    }

    #[test]
    fn range_checked() {
        let m = ThermalModel::design();
        assert!(apply_temperature(fwhm(90e-6), -31.0, &m).is_err());
        assert!(apply_temperature(fwhm(90e-6), 61.0, &m).is_err());
    }

    #[test]
    fn ambient_needs_no_correction() {
        let (m, map) = (ThermalModel::design(), DivergenceMap::design());
        for theta in [90e-6, 1e-3, 4e-3, 6e-3] {
            let (x, _) = temperature_corrected_position(fwhm(theta), 20.0, &m, &map, Branch::Diverging).unwrap();
            let plain = map.position_from_divergence(fwhm(theta), Branch::Diverging).unwrap();
            assert!((x - plain).abs() < 1e-15);
        }
    }

    #[test]
    fn cold_collimated_correction_crosses_focus() {
        let (m, map) = (ThermalModel::design(), DivergenceMap::design());
        let (x, _) = temperature_corrected_position(fwhm(90e-6), -30.0, &m, &map, Branch::Diverging).unwrap();
        assert!(x < 0.0);
        // Oracle: bisection on the forward model alone.
        let f = |x: f64| divergence_at_temperature(x, -30.0, &m, &map).unwrap().value();
        let (mut lo, mut hi) = (-map.max_travel, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // Left of the V minimum the divergence falls as x rises.
            if f(mid) > f(mid + 1e-12) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - x).abs() < 1e-9);
        assert!((f(x) - 90e-6).abs() < 1e-12);
    }

    #[test]
    fn out_of_travel_reported() {
        let mut m = ThermalModel::design();
        m.collimated.cold = 1e-3;
        let map = DivergenceMap::design();
        let r = temperature_corrected_position(fwhm(6e-3), -30.0, &m, &map, Branch::Diverging);
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn position_model_matches_anchor_interpolation(x in 0.0f64..3.5e-3, t in -30.0f64..60.0) {
            let (m, map) = (ThermalModel::design(), DivergenceMap::design());
            let set = map.divergence_from_position(x).unwrap();
            let a = apply_temperature(set, t, &m).unwrap().value();
            let b = divergence_at_temperature(x, t, &m, &map).unwrap().value();
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }

        #[test]
        fn deviation_monotone_per_side(theta in 90e-6f64..6e-3, d1 in 0.0f64..50.0, d2 in 0.0f64..50.0) {
            let m = ThermalModel::design();
            let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            for sign in [-1.0, 1.0] {
                let (t_near, t_far) = (20.0 + sign * near, 20.0 + sign * far);
                if t_far < -30.0 || t_far > 60.0 { continue; }
                let a = m.deviation(theta, t_near).abs();
                let b = m.deviation(theta, t_far).abs();
                prop_assert!(b >= a - 1e-18);
            }
        }

        #[test]
        fn shift_inverts(x in -3.5e-3f64..3.5e-3, t in -30.0f64..60.0) {
            let s = ThermalModel::design().shift(t, &DivergenceMap::design()).unwrap();
            let back = s.mechanical_position(s.effective_position(x));
            prop_assert!((back - x).abs() < 1e-15);
        }
    }
}
