//! Pointing-jitter loss and divergence selection.
//!
//! The mean pointing penalty is `L_p = 10^(−2β²)` with `β = 2σ/θ`. Maximizing
//! `G(θ)·L_p(θ)` gives the divergence that best trades gain for robustness;
//! with `G ∝ θ⁻ⁿ` the optimum is `θ* = σ·sqrt(16·ln 10 / n)`.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Nominal ADCS pointing accuracy of the reference CubeSat, degrees.
pub const ASTERIA_NOMINAL_SIGMA_DEG: f64 = 0.021;
/// Improvement factor achieved after on-orbit calibration.
pub const ASTERIA_IMPROVEMENT_FACTOR: f64 = 50.0;
/// Multiplier of the rule-of-thumb optimum.
pub const RULE_OF_THUMB_FACTOR: f64 = 5.0;

/// A pointing-accuracy figure and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointingModel {
    /// Pointing accuracy σ_p, radians.
    pub sigma: f64,
    /// How a vendor figure was mapped onto `sigma`.
    pub source_note: String,
}

impl PointingModel {
    pub fn new(sigma: f64, source_note: impl Into<String>) -> Result<Self> {
        require_non_negative("sigma", sigma)?;
        Ok(Self {
            sigma,
            source_note: source_note.into(),
        })
    }

    /// The nominal 0.021° ADCS figure, applied verbatim as σ_p.
    pub fn asteria_nominal() -> Self {
        Self {
            sigma: ASTERIA_NOMINAL_SIGMA_DEG.to_radians(),
            source_note: "0.021° (vendor: 3σ, per axis) taken directly as σ_p".into(),
        }
    }

    /// The nominal figure improved 50× by on-orbit calibration.
    pub fn asteria_calibrated() -> Self {
        Self {
            sigma: ASTERIA_NOMINAL_SIGMA_DEG.to_radians() / ASTERIA_IMPROVEMENT_FACTOR,
            source_note: "0.021° / 50 after bias and drift removal, taken as σ_p".into(),
        }
    }
}

/// How transmit gain scales with divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainConvention {
    /// G ∝ 1/θ² (solid-angle law).
    Quadratic,
    /// G ∝ 1/θ.
    Linear,
}

impl GainConvention {
    fn exponent(self) -> f64 {
        match self {
            GainConvention::Quadratic => 2.0,
            GainConvention::Linear => 1.0,
        }
    }
}

fn beta(sigma: f64, theta_d: f64) -> Result<f64> {
    require_positive("theta_d", theta_d)?;
    require_non_negative("sigma", sigma)?;
    Ok(2.0 * sigma / theta_d)
}

/// Fractional pointing loss `10^(−2β²)`, in (0, 1].
pub fn pointing_loss(sigma: f64, theta_d: f64) -> Result<f64> {
    let b = beta(sigma, theta_d)?;
    Ok(10f64.powf(-2.0 * b * b))
}

/// Pointing loss as a positive dB figure, `20β²`.
pub fn pointing_loss_db(sigma: f64, theta_d: f64) -> Result<f64> {
    let b = beta(sigma, theta_d)?;
    Ok(20.0 * b * b)
}

/// `θ_d ≈ 5σ`. Zero jitter has no rule-of-thumb answer.
pub fn rule_of_thumb_divergence(sigma: f64) -> Result<f64> {
    require_non_negative("sigma", sigma)?;
    if sigma == 0.0 {
        return Err(Error::ZeroJitter);
    }
    Ok(RULE_OF_THUMB_FACTOR * sigma)
}

/// Exact maximizer of `G(θ)·L_p(θ)` for the given gain law.
pub fn optimal_divergence(sigma: f64, convention: GainConvention) -> f64 {
    sigma * (16.0 * LN_10 / convention.exponent()).sqrt()
}

/// `G(θ)·L_p(θ)` up to a constant factor.
pub fn objective(sigma: f64, theta: f64, convention: GainConvention) -> f64 {
    let b = 2.0 * sigma / theta;
    theta.powf(-convention.exponent()) * 10f64.powf(-2.0 * b * b)
}

/// Gain gained by narrowing from `theta_ref` to `theta_new`, dB.
pub fn gain_improvement_db(theta_ref: f64, theta_new: f64, convention: GainConvention) -> Result<f64> {
    require_positive("theta_ref", theta_ref)?;
    require_positive("theta_new", theta_new)?;
    Ok(10.0 * convention.exponent() * (theta_ref / theta_new).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loss_cases() {
        assert_eq!(pointing_loss(0.0, 90e-6).unwrap(), 1.0);
        assert_eq!(pointing_loss_db(0.0, 90e-6).unwrap(), 0.0);
        assert_eq!(pointing_loss(1e-6, 2e-6).unwrap(), 0.01);
        assert!((pointing_loss_db(1e-6, 2e-6).unwrap() - 20.0).abs() < 1e-12);
        let l = pointing_loss(1e-6, 5e-6).unwrap();
        assert!((l - 10f64.powf(-0.32)).abs() < 1e-15);
        assert!((l - 0.479).abs() < 5e-4);
        assert!((pointing_loss_db(1e-6, 5e-6).unwrap() - 3.2).abs() < 1e-12);
        assert!(pointing_loss(1e-6, 0.0).is_err());
        assert!(pointing_loss(-1e-6, 1e-6).is_err());
    }

    #[test]
    fn rule_of_thumb_cases() {
        let nominal = PointingModel::asteria_nominal();
        assert!((nominal.sigma - 366.5e-6).abs() < 0.05e-6);
        let theta = rule_of_thumb_divergence(nominal.sigma).unwrap();
        assert!((theta - 1.833e-3).abs() < 0.5e-6);

        let calibrated = rule_of_thumb_divergence(PointingModel::asteria_calibrated().sigma).unwrap();
        assert!((calibrated - 36.65e-6).abs() < 0.01e-6);
        assert!(((calibrated - 39e-6) / 39e-6).abs() < 0.10);

        assert!((rule_of_thumb_divergence(1e-6).unwrap() - 5e-6).abs() < 1e-20);
        assert!(matches!(rule_of_thumb_divergence(0.0), Err(Error::ZeroJitter)));
    }

    #[test]
    fn optimal_closed_forms() {
        let q = optimal_divergence(100e-6, GainConvention::Quadratic);
        let l = optimal_divergence(100e-6, GainConvention::Linear);
        assert!((q - 429.19e-6).abs() < 0.01e-6);
        assert!((l - 606.97e-6).abs() < 0.01e-6);
    }

    #[test]
    fn optimum_matches_sweep() {
        // Oracle: dense linear sweep of the objective, no calculus.
        for conv in [GainConvention::Quadratic, GainConvention::Linear] {
            let sigma = 100e-6;
            let (mut best_t, mut best) = (0.0, f64::MIN);
            for i in 1..=200_000 {
                let t = i as f64 * 5e-9;
                let v = objective(sigma, t, conv);
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            let closed = optimal_divergence(sigma, conv);
            assert!(((best_t - closed) / closed).abs() < 1e-4, "{conv:?}: {best_t} vs {closed}");
        }
    }

    #[test]
    fn improvement_cases() {
        let l = GainConvention::Linear;
        assert!((gain_improvement_db(1.833e-3, 39e-6, l).unwrap() - 16.7).abs() < 0.05);
        assert!((gain_improvement_db(1.833e-3, 90e-6, l).unwrap() - 13.1).abs() < 0.05);
        assert_eq!(gain_improvement_db(1e-4, 1e-4, GainConvention::Quadratic).unwrap(), 0.0);
        assert!(gain_improvement_db(0.0, 1e-4, l).is_err());
    }

    proptest! {
        #[test]
        fn loss_increases_with_divergence(sigma in 1e-7f64..1e-3, t in 1e-6f64..1e-2, f in 1.001f64..10.0) {
            prop_assert!(pointing_loss(sigma, t * f).unwrap() >= pointing_loss(sigma, t).unwrap());
            prop_assert!(pointing_loss(sigma, t).unwrap() < 1.0);
        }

        #[test]
        fn optimum_scales_linearly(sigma in 1e-8f64..1e-2, k in 0.01f64..100.0) {
            for conv in [GainConvention::Quadratic, GainConvention::Linear] {
                let a = optimal_divergence(k * sigma, conv);
                let b = k * optimal_divergence(sigma, conv);
                prop_assert!(((a - b) / b).abs() < 1e-14);
            }
        }

        #[test]
        fn improvement_antisymmetric(a in 1e-6f64..1e-2, b in 1e-6f64..1e-2) {
            for conv in [GainConvention::Quadratic, GainConvention::Linear] {
                let fwd = gain_improvement_db(a, b, conv).unwrap();
                let back = gain_improvement_db(b, a, conv).unwrap();
                prop_assert!((fwd + back).abs() < 1e-12);
            }
        }
    }
}
