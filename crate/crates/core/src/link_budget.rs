//! Received power, margin and maximum data rate of the satellite-to-ground
//! downlink.
//!
//! The budget is a plain gain product in dB:
//!
//! ```text
//! P_rx = P_tx + G_T − L_insertion − L_pointing − L_fs + G_R − L_misc
//! ```
//!
//! with `G_T = 16/θ²` (full 1/e² angle), `G_R = (πD/λ)²` and
//! `L_fs = (4πL/λ)²`. Receiver sensitivity grows by 10·log10 of the data rate
//! (constant photons per bit), anchored at one reference rate.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beam_optics::{transmit_gain_db, DivergenceAngle, DESIGN_WAVELENGTH};
use crate::error::{require_non_negative, require_positive, Error, Result};

/// Insertion loss of the divergence-control optics alone, dB.
pub const INSERTION_LOSS_DIVERGENCE_ONLY_DB: f64 = 0.026;
/// Insertion loss including the anti-vibration / steering stage, dB.
pub const INSERTION_LOSS_FULL_SYSTEM_DB: f64 = 0.032;

pub const DESIGN_TX_POWER_W: f64 = 2.0;
pub const DESIGN_RX_APERTURE: f64 = 0.35;
pub const DESIGN_DIVERGENCE_FWHM: f64 = 90e-6;

/// Closest-approach operating point used to anchor receiver sensitivity.
pub const DESIGN_ANCHOR: LinkAnchor = LinkAnchor {
    distance: 600e3,
    rate: 10e9,
    margin_db: 5.0,
};

/// Longest-approach operating point.
pub const DESIGN_FAR_POINT: LinkAnchor = LinkAnchor {
    distance: 1200e3,
    rate: 2.5e9,
    margin_db: 5.0,
};

/// A (distance, rate, margin) operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkAnchor {
    pub distance: f64,
    pub rate: f64,
    pub margin_db: f64,
}

/// Log-linear receiver sensitivity: `S(R) = S_ref + 10·log10(R/R_ref)` dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityModel {
    /// Reference data rate, bit/s.
    pub ref_rate: f64,
    /// Sensitivity at `ref_rate`, dBm.
    pub ref_sensitivity_dbm: f64,
}

impl SensitivityModel {
    pub fn new(ref_rate: f64, ref_sensitivity_dbm: f64) -> Result<Self> {
        require_positive("ref_rate", ref_rate)?;
        if !ref_sensitivity_dbm.is_finite() {
            return Err(Error::invalid("ref_sensitivity_dbm", "must be finite"));
        }
        Ok(Self {
            ref_rate,
            ref_sensitivity_dbm,
        })
    }

    pub fn sensitivity_dbm(&self, rate: f64) -> Result<f64> {
        require_positive("rate", rate)?;
        Ok(self.ref_sensitivity_dbm + 10.0 * (rate / self.ref_rate).log10())
    }

    pub fn margin_db(&self, received_power_dbm: f64, rate: f64) -> Result<f64> {
        Ok(received_power_dbm - self.sensitivity_dbm(rate)?)
    }

    /// Rate at which the margin equals `required_margin_db`.
    pub fn max_rate(&self, received_power_dbm: f64, required_margin_db: f64) -> Result<f64> {
        let excess = received_power_dbm - self.ref_sensitivity_dbm - required_margin_db;
        let rate = self.ref_rate * 10f64.powf(excess / 10.0);
        if rate.is_finite() && rate > 0.0 {
            Ok(rate)
        } else {
            Err(Error::LinkClosed)
        }
    }
}

/// Everything needed to close the downlink budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Optical power at the transmitter input, watts.
    pub tx_power: f64,
    /// Meters.
    pub wavelength: f64,
    pub tx_divergence: DivergenceAngle,
    /// Receiver telescope diameter, meters.
    pub rx_aperture_diameter: f64,
    /// Transmitter device insertion loss, dB.
    pub insertion_loss_db: f64,
    /// Everything else: atmosphere, receive optics, coupling. dB.
    pub misc_loss_db: f64,
    pub sensitivity: Option<SensitivityModel>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self::design_uncalibrated()
    }
}

impl LinkConfig {
    /// The reference downlink without a sensitivity model.
    pub fn design_uncalibrated() -> Self {
        Self {
            tx_power: DESIGN_TX_POWER_W,
            wavelength: DESIGN_WAVELENGTH,
            tx_divergence: DivergenceAngle::fwhm(DESIGN_DIVERGENCE_FWHM).expect("positive"),
            rx_aperture_diameter: DESIGN_RX_APERTURE,
            insertion_loss_db: INSERTION_LOSS_FULL_SYSTEM_DB,
            misc_loss_db: 0.0,
            sensitivity: None,
        }
    }

    /// The reference downlink with sensitivity anchored at 600 km, 10 Gbit/s, 5 dB.
    pub fn design() -> Self {
        let mut cfg = Self::design_uncalibrated();
        let sens = calibrate_sensitivity(&cfg, DESIGN_ANCHOR).expect("design anchor is valid");
        cfg.sensitivity = Some(sens);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("tx_power", self.tx_power)?;
        require_positive("wavelength", self.wavelength)?;
        require_positive("tx_divergence", self.tx_divergence.value())?;
        require_positive("rx_aperture_diameter", self.rx_aperture_diameter)?;
        require_non_negative("insertion_loss_db", self.insertion_loss_db)?;
        require_non_negative("misc_loss_db", self.misc_loss_db)?;
        if let Some(s) = &self.sensitivity {
            SensitivityModel::new(s.ref_rate, s.ref_sensitivity_dbm)?;
        }
        Ok(())
    }

    pub fn with_divergence(&self, theta: DivergenceAngle) -> Self {
        Self {
            tx_divergence: theta,
            ..self.clone()
        }
    }

    fn sensitivity(&self) -> Result<&SensitivityModel> {
        self.sensitivity.as_ref().ok_or(Error::MissingSensitivity)
    }
}

/// One signed contribution to the received power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetTerm {
    pub name: String,
    /// dB (or dBm for the transmit power). Losses are negative.
    pub value_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub distance: f64,
    pub terms: Vec<BudgetTerm>,
    pub received_power_dbm: f64,
    pub rate: Option<f64>,
    pub sensitivity_dbm: Option<f64>,
    pub margin_db: Option<f64>,
}

impl BudgetReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value_db)
    }

    /// Fills in sensitivity and margin at `rate`.
    pub fn at_rate(mut self, sensitivity: &SensitivityModel, rate: f64) -> Result<Self> {
        let s = sensitivity.sensitivity_dbm(rate)?;
        self.rate = Some(rate);
        self.sensitivity_dbm = Some(s);
        self.margin_db = Some(self.received_power_dbm - s);
        Ok(self)
    }
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>14.3} km", "distance", self.distance / 1e3)?;
        for t in &self.terms {
            let unit = if t.name == "tx_power" { "dBm" } else { "dB" };
            writeln!(f, "{:<24} {:>14.3} {unit}", t.name, t.value_db)?;
        }
        write!(f, "{:<24} {:>14.3} dBm", "received_power", self.received_power_dbm)?;
        if let (Some(r), Some(s), Some(m)) = (self.rate, self.sensitivity_dbm, self.margin_db) {
            writeln!(f)?;
            writeln!(f, "{:<24} {:>14.3} Gbit/s", "rate", r / 1e9)?;
            writeln!(f, "{:<24} {:>14.3} dBm", "sensitivity", s)?;
            write!(f, "{:<24} {:>14.3} dB", "margin", m)?;
        }
        Ok(())
    }
}

/// Free-space path loss `20·log10(4πL/λ)`, positive dB.
pub fn free_space_loss_db(distance: f64, wavelength: f64) -> Result<f64> {
    require_positive("distance", distance)?;
    require_positive("wavelength", wavelength)?;
    Ok(20.0 * (4.0 * PI * distance / wavelength).log10())
}

/// Receive telescope gain `(πD/λ)²` in dB.
pub fn receiver_gain_db(diameter: f64, wavelength: f64) -> Result<f64> {
    require_positive("rx_aperture_diameter", diameter)?;
    require_positive("wavelength", wavelength)?;
    Ok(20.0 * (PI * diameter / wavelength).log10())
}

/// Full per-term budget at `distance`. `pointing_loss_db` is a positive loss.
pub fn received_power_dbm(config: &LinkConfig, distance: f64, pointing_loss_db: f64) -> Result<BudgetReport> {
    config.validate()?;
    require_positive("distance", distance)?;
    require_non_negative("pointing_loss_db", pointing_loss_db)?;

    let terms = vec![
        BudgetTerm {
            name: "tx_power".into(),
            value_db: 10.0 * (config.tx_power * 1e3).log10(),
        },
        BudgetTerm {
            name: "tx_gain".into(),
            value_db: transmit_gain_db(config.tx_divergence)?,
        },
        BudgetTerm {
            name: "insertion_loss".into(),
            value_db: -config.insertion_loss_db,
        },
        BudgetTerm {
            name: "pointing_loss".into(),
            value_db: -pointing_loss_db,
        },
        BudgetTerm {
            name: "free_space_loss".into(),
            value_db: -free_space_loss_db(distance, config.wavelength)?,
        },
        BudgetTerm {
            name: "rx_gain".into(),
            value_db: receiver_gain_db(config.rx_aperture_diameter, config.wavelength)?,
        },
        BudgetTerm {
            name: "misc_loss".into(),
            value_db: -config.misc_loss_db,
        },
    ];
    let received_power_dbm: f64 = terms.iter().map(|t| t.value_db).sum();
    if let Some(t) = terms.iter().find(|t| !t.value_db.is_finite()) {
        return Err(Error::Numerical(format!("budget term {} is not finite", t.name)));
    }
    Ok(BudgetReport {
        distance,
        terms,
        received_power_dbm,
        rate: None,
        sensitivity_dbm: None,
        margin_db: None,
    })
}

/// Margin at `rate` with no pointing loss.
pub fn link_margin_db(config: &LinkConfig, distance: f64, rate: f64) -> Result<f64> {
    let sens = config.sensitivity()?;
    let report = received_power_dbm(config, distance, 0.0)?;
    sens.margin_db(report.received_power_dbm, rate)
}

/// Highest rate that keeps `required_margin_db`, with no pointing loss.
pub fn max_rate(config: &LinkConfig, distance: f64, required_margin_db: f64) -> Result<f64> {
    let sens = config.sensitivity()?;
    let report = received_power_dbm(config, distance, 0.0)?;
    sens.max_rate(report.received_power_dbm, required_margin_db)
}

/// Sensitivity model that makes `config` hit `anchor` exactly. Any existing
/// sensitivity in `config` is ignored.
pub fn calibrate_sensitivity(config: &LinkConfig, anchor: LinkAnchor) -> Result<SensitivityModel> {
    require_positive("anchor rate", anchor.rate)?;
    if !anchor.margin_db.is_finite() {
        return Err(Error::invalid("anchor margin", "must be finite"));
    }
    let uncalibrated = LinkConfig {
        sensitivity: None,
        ..config.clone()
    };
    let report = received_power_dbm(&uncalibrated, anchor.distance, 0.0)?;
    SensitivityModel::new(anchor.rate, report.received_power_dbm - anchor.margin_db)
}
