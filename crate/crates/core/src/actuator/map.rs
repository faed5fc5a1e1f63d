use serde::{Deserialize, Serialize};

use crate::beam_optics::DivergenceAngle;
use crate::error::{require_positive, Error, Result};

/// Side of the collimation point the moving-lens group sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Positive lens positions; the beam diverges from the output lens.
    #[default]
    Diverging,
    /// Negative lens positions; the beam converges to a focus, then spreads.
    Converging,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Diverging => 1.0,
            Branch::Converging => -1.0,
        }
    }

    pub fn of_position(x: f64) -> Self {
        if x < 0.0 {
            Branch::Converging
        } else {
            Branch::Diverging
        }
    }

    pub fn other(self) -> Self {
        match self {
            Branch::Diverging => Branch::Converging,
            Branch::Converging => Branch::Diverging,
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diverging" => Ok(Branch::Diverging),
            "converging" => Ok(Branch::Converging),
            other => Err(Error::invalid("branch", format!("expected diverging|converging, got {other}"))),
        }
    }
}

/// Piecewise-linear lens position → FWHM divergence map, V-shaped about the
/// collimation point at x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivergenceMap {
    /// FWHM divergence at x = 0, radians.
    pub collimated_divergence: f64,
    /// dθ/dx for x > 0, radians per meter.
    pub diverging_slope: f64,
    /// dθ/d|x| for x < 0, radians per meter.
    pub converging_slope: f64,
    /// Mechanical travel on each side of collimation, meters.
    pub max_travel: f64,
}

pub const DESIGN_COLLIMATED_FWHM: f64 = 90e-6;
pub const DESIGN_DIVERGING_MAX: f64 = 6.14e-3;
pub const DESIGN_CONVERGING_MAX: f64 = 6.25e-3;
pub const DESIGN_MAX_TRAVEL: f64 = 3.5e-3;

impl Default for DivergenceMap {
    fn default() -> Self {
        Self::design()
    }
}

impl DivergenceMap {
    /// Map through the collimated point and both end-of-travel divergences.
    pub fn from_endpoints(collimated: f64, diverging_max: f64, converging_max: f64, max_travel: f64) -> Result<Self> {
        let map = Self {
            collimated_divergence: collimated,
            diverging_slope: (diverging_max - collimated) / max_travel,
            converging_slope: (converging_max - collimated) / max_travel,
            max_travel,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn design() -> Self {
        Self::from_endpoints(
            DESIGN_COLLIMATED_FWHM,
            DESIGN_DIVERGING_MAX,
            DESIGN_CONVERGING_MAX,
            DESIGN_MAX_TRAVEL,
        )
        .expect("design map is valid")
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("collimated_divergence", self.collimated_divergence)?;
        require_positive("diverging_slope", self.diverging_slope)?;
        require_positive("converging_slope", self.converging_slope)?;
        require_positive("max_travel", self.max_travel)?;
        Ok(())
    }

    pub fn slope(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Diverging => self.diverging_slope,
            Branch::Converging => self.converging_slope,
        }
    }

    /// Widest divergence reachable on `branch` within travel.
    pub fn branch_max(&self, branch: Branch) -> f64 {
        self.collimated_divergence + self.slope(branch) * self.max_travel
    }

    /// Widest divergence reachable on both branches.
    pub fn common_max(&self) -> f64 {
        self.branch_max(Branch::Diverging).min(self.branch_max(Branch::Converging))
    }

    /// Optical divergence at any signed position, ignoring the travel limit.
    pub fn divergence_at(&self, x: f64) -> f64 {
        self.collimated_divergence + self.slope(Branch::of_position(x)) * x.abs()
    }

    /// Signed position producing `theta` on `branch`, ignoring the travel limit.
    pub fn position_at(&self, theta: f64, branch: Branch) -> f64 {
        branch.sign() * (theta - self.collimated_divergence) / self.slope(branch)
    }

    pub fn divergence_from_position(&self, x: f64) -> Result<DivergenceAngle> {
        if !x.is_finite() || x.abs() > self.max_travel {
            return Err(Error::OutOfRange {
                name: "lens position",
                value: x,
                min: -self.max_travel,
                max: self.max_travel,
            });
        }
        DivergenceAngle::fwhm(self.divergence_at(x))
    }

    pub fn position_from_divergence(&self, theta: DivergenceAngle, branch: Branch) -> Result<f64> {
        let t = theta.fwhm_value();
        let max = self.branch_max(branch);
        // Allow for rounding in the endpoint itself.
        let slack = 1e-12 * max;
        if t < self.collimated_divergence - slack || t > max + slack {
            return Err(Error::OutOfRange {
                name: "divergence",
                value: t,
                min: self.collimated_divergence,
                max,
            });
        }
        let x = self.position_at(t.max(self.collimated_divergence), branch);
        Ok(x.clamp(-self.max_travel, self.max_travel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fwhm(v: f64) -> DivergenceAngle {
        DivergenceAngle::fwhm(v).unwrap()
    }

    #[test]
    fn design_anchors() {
        let m = DivergenceMap::design();
        assert_eq!(m.divergence_from_position(0.0).unwrap().value(), 90e-6);
        assert!((m.divergence_from_position(3.5e-3).unwrap().value() - 6.14e-3).abs() < 1e-15);
        assert!((m.divergence_from_position(-3.5e-3).unwrap().value() - 6.25e-3).abs() < 1e-15);
        assert!((m.diverging_slope * 1e-3 - 1728.571e-6).abs() < 1e-9);
        assert!((m.converging_slope * 1e-3 - 1760e-6).abs() < 1e-12);
        for b in [Branch::Diverging, Branch::Converging] {
            assert!((5e-3..=7e-3).contains(&m.branch_max(b)));
        }
    }

    #[test]
    fn inverse_cases() {
        let m = DivergenceMap::design();
        assert_eq!(m.position_from_divergence(fwhm(90e-6), Branch::Diverging).unwrap(), 0.0);
        assert_eq!(m.position_from_divergence(fwhm(90e-6), Branch::Converging).unwrap(), 0.0);
        let x = m.position_from_divergence(fwhm(6.25e-3), Branch::Converging).unwrap();
        assert!((x + 3.5e-3).abs() < 1e-15);
        let mid = m.position_from_divergence(fwhm(3.115e-3), Branch::Diverging).unwrap();
        assert!((mid - 1.75e-3).abs() < 1e-15);
    }

    #[test]
    fn range_errors() {
        let m = DivergenceMap::design();
        assert!(m.divergence_from_position(3.6e-3).is_err());
        assert!(m.position_from_divergence(fwhm(80e-6), Branch::Diverging).is_err());
        assert!(m.position_from_divergence(fwhm(6.2e-3), Branch::Diverging).is_err());
        assert!(m.position_from_divergence(fwhm(6.2e-3), Branch::Converging).is_ok());
    }

    proptest! {
        #[test]
        fn exact_inverse(x in -3.5e-3f64..3.5e-3) {
            let m = DivergenceMap::design();
            let theta = m.divergence_from_position(x).unwrap();
            let back = m.position_from_divergence(theta, Branch::of_position(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-9));
            let again = m.divergence_from_position(back).unwrap().value();
            prop_assert!(((again - theta.value()) / theta.value()).abs() < 1e-12);
        }
    }
}
