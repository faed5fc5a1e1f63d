use serde::{Deserialize, Serialize};

use crate::beam_optics::DivergenceAngle;
use crate::error::{Error, Result};

/// Divergence offsets measured at the band edges relative to the optimization
/// wavelength, for one divergence anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeOffsets {
    /// Offset at the short-wavelength edge, radians.
    pub short: f64,
    /// Offset at the long-wavelength edge, radians.
    pub long: f64,
}

/// Wavelength dependence of the (non-achromatic) optics.
///
/// Per anchor, the offset is the quadratic through (short, 0), (reference, 0
/// offset) and (long, 0); across anchors it is linear in the divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChromaticModel {
    pub short_wavelength: f64,
    pub reference_wavelength: f64,
    pub long_wavelength: f64,
    pub collimated_anchor: f64,
    pub wide_anchor: f64,
    pub collimated: EdgeOffsets,
    pub wide: EdgeOffsets,
}

impl Default for ChromaticModel {
    fn default() -> Self {
        Self::design()
    }
}

impl ChromaticModel {
    /// +10/+3 µrad on the collimated beam and +171/+130 µrad at 5 mrad, at
    /// 1530/1565 nm relative to 1550 nm.
    pub fn design() -> Self {
        Self {
            short_wavelength: 1530e-9,
            reference_wavelength: 1550e-9,
            long_wavelength: 1565e-9,
            collimated_anchor: 90e-6,
            wide_anchor: 5e-3,
            collimated: EdgeOffsets {
                short: 10e-6,
                long: 3e-6,
            },
            wide: EdgeOffsets {
                short: 171e-6,
                long: 130e-6,
            },
        }
    }

    pub fn neutral() -> Self {
        let zero = EdgeOffsets { short: 0.0, long: 0.0 };
        Self {
            collimated: zero,
            wide: zero,
            ..Self::design()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.short_wavelength < self.reference_wavelength && self.reference_wavelength < self.long_wavelength) {
            return Err(Error::invalid("chromatic model", "need short < reference < long wavelength"));
        }
        if !(self.collimated_anchor > 0.0 && self.wide_anchor > self.collimated_anchor) {
            return Err(Error::invalid("chromatic model", "need 0 < collimated_anchor < wide_anchor"));
        }
        let all = [self.collimated.short, self.collimated.long, self.wide.short, self.wide.long];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("chromatic model", "offsets must be finite"));
        }
        Ok(())
    }

    pub fn check_wavelength(&self, lambda: f64) -> Result<()> {
        // Tolerate the rounding of values written in nanometres.
        let slack = 1e-12 * self.long_wavelength;
        if !lambda.is_finite() || lambda < self.short_wavelength - slack || lambda > self.long_wavelength + slack {
            return Err(Error::OutOfRange {
                name: "wavelength",
                value: lambda,
                min: self.short_wavelength,
                max: self.long_wavelength,
            });
        }
        Ok(())
    }

    fn anchor_offset(&self, edges: &EdgeOffsets, lambda: f64) -> f64 {
        let (a, b, c) = (self.short_wavelength, self.reference_wavelength, self.long_wavelength);
        // Lagrange basis; the reference node carries a zero offset.
        let la = (lambda - b) * (lambda - c) / ((a - b) * (a - c));
        let lc = (lambda - a) * (lambda - b) / ((c - a) * (c - b));
        edges.short * la + edges.long * lc
    }

    pub fn offset(&self, theta: f64, lambda: f64) -> f64 {
        let oc = self.anchor_offset(&self.collimated, lambda);
        let ow = self.anchor_offset(&self.wide, lambda);
        let frac = (theta - self.collimated_anchor) / (self.wide_anchor - self.collimated_anchor);
        oc + frac * (ow - oc)
    }
}

/// Divergence at wavelength `lambda` of a beam set to `theta` at the
/// reference wavelength.
pub fn apply_wavelength(theta: DivergenceAngle, lambda: f64, model: &ChromaticModel) -> Result<DivergenceAngle> {
    model.check_wavelength(lambda)?;
    let t = theta.fwhm_value();
    DivergenceAngle::fwhm(t + model.offset(t, lambda))
}
