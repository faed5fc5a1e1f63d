//! LEO pass geometry and closed-loop divergence control over a pass.
//!
//! A pass is a circular-orbit overhead arc (Earth rotation ignored) sampled
//! on a grid centered on the culmination, plus the exact rise and set times.
//! Each tick the controller picks a divergence from the current pointing
//! jitter, the emulated actuator slews towards it, and the link budget is
//! evaluated at the divergence actually emitted.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::actuator::{steering_residual, Branch, DivergenceMap, Emulator, EmulatorConfig};
use crate::beam_optics::DivergenceAngle;
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::link_budget::{calibrate_sensitivity, received_power_dbm, LinkConfig, SensitivityModel, DESIGN_ANCHOR};
use crate::pointing::{optimal_divergence, pointing_loss_db, rule_of_thumb_divergence, GainConvention};

pub const EARTH_RADIUS: f64 = 6371e3;
/// Standard gravitational parameter of the Earth, m³/s².
pub const EARTH_MU: f64 = 3.986004418e14;
pub const DESIGN_ALTITUDE: f64 = 600e3;
/// Longest slant range of the operational window, meters.
pub const DESIGN_MAX_RANGE: f64 = 1200e3;
/// Margins this close below the floor still count as meeting it; continuous
/// rate selection lands exactly on the floor up to rounding.
pub const MARGIN_TOLERANCE_DB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassGeometry {
    /// Meters.
    pub orbit_altitude: f64,
    /// Meters.
    pub earth_radius: f64,
    /// Lowest tracked elevation, degrees. Give this or `max_range`.
    pub min_elevation_deg: Option<f64>,
    /// Longest tracked slant range, meters; sets the minimum elevation.
    pub max_range: Option<f64>,
    /// Culmination elevation, degrees.
    pub max_elevation_deg: f64,
    /// Sampling interval, seconds.
    pub dt: f64,
}

impl Default for PassGeometry {
    fn default() -> Self {
        Self {
            orbit_altitude: DESIGN_ALTITUDE,
            earth_radius: EARTH_RADIUS,
            min_elevation_deg: None,
            max_range: Some(DESIGN_MAX_RANGE),
            max_elevation_deg: 90.0,
            dt: 1.0,
        }
    }
}

impl PassGeometry {
    pub fn validate(&self) -> Result<()> {
        require_positive("orbit_altitude", self.orbit_altitude)?;
        require_positive("earth_radius", self.earth_radius)?;
        require_positive("dt", self.dt)?;
        if !(self.max_elevation_deg > 0.0 && self.max_elevation_deg <= 90.0) {
            return Err(Error::OutOfRange {
                name: "max_elevation_deg",
                value: self.max_elevation_deg,
                min: 0.0,
                max: 90.0,
            });
        }
        self.min_elevation().map(|_| ())
    }

    fn orbit_radius(&self) -> f64 {
        self.earth_radius + self.orbit_altitude
    }

    /// Effective minimum elevation, degrees.
    pub fn min_elevation(&self) -> Result<f64> {
        match (self.min_elevation_deg, self.max_range) {
            (Some(el), None) => {
                if el > 0.0 && el < 90.0 {
                    Ok(el)
                } else {
                    Err(Error::OutOfRange {
                        name: "min_elevation_deg",
                        value: el,
                        min: 0.0,
                        max: 90.0,
                    })
                }
            }
            (None, Some(range)) => elevation_for_range(range, self),
            _ => Err(Error::invalid("pass", "set exactly one of min_elevation_deg and max_range")),
        }
    }

    /// Orbital angular rate, rad/s.
    pub fn angular_rate(&self) -> f64 {
        (EARTH_MU / self.orbit_radius().powi(3)).sqrt()
    }

    /// Earth central angle between station and sub-satellite point at
    /// `elevation_deg`.
    pub fn central_angle(&self, elevation_deg: f64) -> f64 {
        let el = elevation_deg.to_radians();
        (self.earth_radius * el.cos() / self.orbit_radius()).acos() - el
    }

    fn range_from_central(&self, gamma: f64) -> f64 {
        let h = self.orbit_altitude;
        let s = (gamma / 2.0).sin();
        (h * h + 4.0 * self.earth_radius * self.orbit_radius() * s * s).sqrt()
    }

    fn elevation_from_central(&self, gamma: f64) -> f64 {
        (gamma.cos() - self.earth_radius / self.orbit_radius())
            .atan2(gamma.sin())
            .to_degrees()
    }
}

/// Slant range at `elevation_deg` ∈ (0, 90] over a spherical Earth.
pub fn slant_range(elevation_deg: f64, geometry: &PassGeometry) -> Result<f64> {
    if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
        return Err(Error::OutOfRange {
            name: "elevation",
            value: elevation_deg,
            min: 0.0,
            max: 90.0,
        });
    }
    let re = geometry.earth_radius;
    let r = geometry.orbit_radius();
    let el = elevation_deg.to_radians();
    Ok((r * r - (re * el.cos()).powi(2)).sqrt() - re * el.sin())
}

/// Elevation, degrees, at which the slant range equals `range`.
pub fn elevation_for_range(range: f64, geometry: &PassGeometry) -> Result<f64> {
    let re = geometry.earth_radius;
    let r = geometry.orbit_radius();
    let horizon = (r * r - re * re).sqrt();
    if !(range >= geometry.orbit_altitude && range < horizon) {
        return Err(Error::OutOfRange {
            name: "slant range",
            value: range,
            min: geometry.orbit_altitude,
            max: horizon,
        });
    }
    let s = (r * r - re * re - range * range) / (2.0 * re * range);
    Ok(s.clamp(-1.0, 1.0).asin().to_degrees())
}

/// One sample of a pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSample {
    /// Seconds since the start of the pass.
    pub t: f64,
    pub elevation_deg: f64,
    pub slant_range: f64,
    /// Integration weight of this sample, seconds.
    pub weight: f64,
}

/// Symmetric overhead pass between the minimum elevation on either side.
pub fn pass_profile(geometry: &PassGeometry) -> Result<Vec<PassSample>> {
    geometry.validate()?;
    let min_el = geometry.min_elevation()?;
    if geometry.max_elevation_deg <= min_el {
        return Err(Error::invalid(
            "pass",
            format!(
                "maximum elevation {}° does not exceed the minimum {min_el}°; the pass is empty",
                geometry.max_elevation_deg
            ),
        ));
    }
    let g_min = geometry.central_angle(geometry.max_elevation_deg);
    let g_max = geometry.central_angle(min_el);
    let w = geometry.angular_rate();
    let half = (g_max.cos() / g_min.cos()).clamp(-1.0, 1.0).acos() / w;

    let dt = geometry.dt;
    let mut k = (half / dt).floor() as i64;
    if k as f64 * dt >= half {
        k -= 1;
    }
    let mut offsets = Vec::with_capacity(2 * k as usize + 3);
    offsets.push(-half);
    offsets.extend((-k..=k).map(|i| i as f64 * dt));
    offsets.push(half);

    let n = offsets.len();
    let samples = (0..n)
        .map(|i| {
            let tau = offsets[i];
            let gamma = (g_min.cos() * (w * tau).cos()).clamp(-1.0, 1.0).acos();
            let lo = offsets[i.saturating_sub(1)];
            let hi = offsets[(i + 1).min(n - 1)];
            PassSample {
                t: tau + half,
                elevation_deg: geometry.elevation_from_central(gamma),
                slant_range: geometry.range_from_central(gamma),
                weight: (hi - lo) / 2.0,
            }
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// 5σ, clamped to the actuator range.
    #[serde(rename = "RULE_5_SIGMA")]
    Rule5Sigma,
    /// Maximizer of gain × pointing loss, clamped.
    #[serde(rename = "EXACT_OPT")]
    ExactOpt,
    /// A configured divergence.
    #[serde(rename = "FIXED")]
    Fixed,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "RULE_5_SIGMA" => Ok(Strategy::Rule5Sigma),
            "EXACT_OPT" => Ok(Strategy::ExactOpt),
            "FIXED" => Ok(Strategy::Fixed),
            _ => Err(Error::invalid("strategy", format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlPolicy {
    pub strategy: Strategy,
    /// FWHM divergence for [`Strategy::Fixed`], radians.
    pub fixed_divergence: Option<f64>,
    pub convention: GainConvention,
    /// Margin every delivered bit must keep, dB.
    pub margin_floor_db: f64,
    /// Discrete rates, bit/s, ascending. Empty selects continuous rates.
    pub rate_ladder: Vec<f64>,
    /// Rates below this are not worth transmitting, bit/s.
    pub min_rate: f64,
    pub branch: Branch,
    /// Command temperature-corrected lens positions.
    pub thermal_correction: bool,
}

impl Default for ControlPolicy {
    fn default() -> Self {
        Self {
            strategy: Strategy::ExactOpt,
            fixed_divergence: None,
            convention: GainConvention::Quadratic,
            margin_floor_db: 5.0,
            rate_ladder: Vec::new(),
            min_rate: 0.0,
            branch: Branch::Diverging,
            thermal_correction: false,
        }
    }
}

impl ControlPolicy {
    pub fn validate(&self, map: &DivergenceMap) -> Result<()> {
        require_non_negative("margin_floor_db", self.margin_floor_db)?;
        require_non_negative("min_rate", self.min_rate)?;
        if self.rate_ladder.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("rate_ladder", "rates must be positive"));
        }
        if self.rate_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("rate_ladder", "rates must be strictly ascending"));
        }
        match (self.strategy, self.fixed_divergence) {
            (Strategy::Fixed, None) => Err(Error::invalid("fixed_divergence", "required by the FIXED strategy")),
            (_, Some(theta)) => {
                let (lo, hi) = (map.collimated_divergence, map.branch_max(self.branch));
                if theta.is_finite() && theta >= lo && theta <= hi * (1.0 + 1e-12) {
                    Ok(())
                } else {
                    Err(Error::OutOfRange {
                        name: "fixed_divergence",
                        value: theta,
                        min: lo,
                        max: hi,
                    })
                }
            }
            _ => Ok(()),
        }
    }
}

/// FWHM divergence the policy asks for at jitter `sigma`, always inside
/// [collimated, branch maximum].
pub fn adaptive_policy(policy: &ControlPolicy, sigma: f64, map: &DivergenceMap) -> f64 {
    let lo = map.collimated_divergence;
    let hi = map.branch_max(policy.branch);
    let raw = match policy.strategy {
        // Zero jitter has no rule-of-thumb value; the narrowest beam is best.
        Strategy::Rule5Sigma => rule_of_thumb_divergence(sigma).unwrap_or(lo),
        Strategy::ExactOpt => optimal_divergence(sigma, policy.convention),
        Strategy::Fixed => policy.fixed_divergence.unwrap_or(lo),
    };
    if raw.is_nan() {
        return lo;
    }
    raw.clamp(lo, hi)
}

/// Pointing jitter over the pass: a constant, or a piecewise-linear series
/// held flat beyond its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct JitterSchedule {
    /// Constant σ_p, radians.
    pub sigma: f64,
    /// Seconds since the start of the pass.
    pub times: Vec<f64>,
    /// σ_p at `times`, radians.
    pub sigmas: Vec<f64>,
}

impl JitterSchedule {
    pub fn constant(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("jitter.sigma", self.sigma)?;
        if self.times.len() != self.sigmas.len() {
            return Err(Error::invalid("jitter", "times and sigmas differ in length"));
        }
        if !self.times.is_empty() && self.sigma != 0.0 {
            return Err(Error::invalid("jitter", "give either a constant sigma or a series, not both"));
        }
        if self.times.iter().any(|t| !t.is_finite()) || self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("jitter.times", "must be finite and strictly ascending"));
        }
        for &s in &self.sigmas {
            require_non_negative("jitter.sigmas", s)?;
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        let (ts, ss) = (&self.times, &self.sigmas);
        match ts.len() {
            0 => self.sigma,
            _ if t <= ts[0] => ss[0],
            n if t >= ts[n - 1] => ss[n - 1],
            _ => {
                let i = ts.partition_point(|&x| x <= t);
                let f = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                ss[i - 1] + f * (ss[i] - ss[i - 1])
            }
        }
    }
}

/// A sinusoidal platform disturbance seen by the isolation stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vibration {
    /// Hz.
    pub frequency: f64,
    /// Radians.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    /// Terminal temperature, °C.
    pub temperature: f64,
    /// Add the emulator's random axis wander to the pointing error.
    pub axis_wander: bool,
    pub vibration: Option<Vibration>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            temperature: crate::actuator::REFERENCE_TEMPERATURE,
            axis_wander: false,
            vibration: None,
        }
    }
}

/// Everything a pass run needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub geometry: PassGeometry,
    pub policy: ControlPolicy,
    pub link: LinkConfig,
    pub actuator: EmulatorConfig,
    pub jitter: JitterSchedule,
    pub options: SimOptions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.link.validate()?;
        self.actuator.validate()?;
        self.policy.validate(&self.actuator.map)?;
        self.jitter.validate()?;
        self.actuator.thermal.check_temperature(self.options.temperature)?;
        self.actuator.chromatic.check_wavelength(self.link.wavelength)?;
        if let Some(v) = self.options.vibration {
            require_non_negative("vibration.frequency", v.frequency)?;
            require_non_negative("vibration.amplitude", v.amplitude)?;
        }
        Ok(())
    }

    /// The configured sensitivity, or one anchored at the design operating
    /// point when none is given.
    pub fn sensitivity(&self) -> Result<(SensitivityModel, bool)> {
        match self.link.sensitivity {
            Some(s) => Ok((s, false)),
            None => Ok((calibrate_sensitivity(&self.link, DESIGN_ANCHOR)?, true)),
        }
    }
}

/// Link quality at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTick {
    pub pointing_loss_db: f64,
    pub received_power_dbm: f64,
    pub rate: f64,
    pub margin_db: f64,
    pub margin_ok: bool,
}

/// Received power, selected rate and margin with the beam at `theta_fwhm`.
pub fn evaluate_link(
    link: &LinkConfig,
    sensitivity: &SensitivityModel,
    policy: &ControlPolicy,
    range: f64,
    sigma: f64,
    theta_fwhm: f64,
) -> Result<LinkTick> {
    let theta = DivergenceAngle::fwhm(theta_fwhm)?;
    let loss = pointing_loss_db(sigma, theta_fwhm)?;
    let power = received_power_dbm(&link.with_divergence(theta), range, loss)?.received_power_dbm;
    let continuous = match sensitivity.max_rate(power, policy.margin_floor_db) {
        Ok(r) => r,
        Err(Error::LinkClosed) => 0.0,
        Err(e) => return Err(e),
    };
    let mut rate = if policy.rate_ladder.is_empty() {
        continuous
    } else {
        // Accept a rung the continuous rate reaches up to rounding.
        let reach = continuous * (1.0 + 1e-12);
        policy.rate_ladder.iter().rev().copied().find(|&r| r <= reach).unwrap_or(0.0)
    };
    if rate < policy.min_rate {
        rate = 0.0;
    }
    let margin_rate = if rate > 0.0 {
        rate
    } else if policy.min_rate > 0.0 {
        policy.min_rate
    } else {
        policy.rate_ladder.first().copied().unwrap_or(sensitivity.ref_rate)
    };
    let margin = sensitivity.margin_db(power, margin_rate)?;
    Ok(LinkTick {
        pointing_loss_db: loss,
        received_power_dbm: power,
        rate,
        margin_db: margin,
        margin_ok: rate > 0.0 && margin >= policy.margin_floor_db - MARGIN_TOLERANCE_DB,
    })
}

/// One row of the per-tick trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub t_s: f64,
    pub weight_s: f64,
    pub elevation_deg: f64,
    pub slant_range_m: f64,
    pub sigma_p_rad: f64,
    pub theta_commanded_rad: f64,
    /// Divergence the nominal map gives at the lens position.
    pub theta_set_rad: f64,
    /// Divergence emitted after thermal and chromatic effects.
    pub theta_actual_rad: f64,
    pub lens_position_m: f64,
    pub pointing_loss_db: f64,
    pub received_power_dbm: f64,
    pub margin_db: f64,
    pub rate_bps: f64,
    pub margin_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub strategy: Strategy,
    pub ticks: usize,
    /// Seconds.
    pub pass_duration: f64,
    pub min_slant_range: f64,
    pub max_slant_range: f64,
    /// Σ rate·weight over ticks meeting the margin floor, bits.
    pub total_bits: f64,
    /// Time-weighted fraction of the pass meeting the margin floor.
    pub fraction_margin_ok: f64,
    /// total_bits / pass_duration, bit/s.
    pub mean_rate: f64,
    /// Mean |actual − commanded| divergence, radians.
    pub lag_mean: f64,
    pub lag_max: f64,
    pub sensitivity: SensitivityModel,
    /// The sensitivity was anchored at the design operating point because
    /// the link configuration had none.
    pub sensitivity_calibrated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassRun {
    pub steps: Vec<SimStep>,
    pub summary: Summary,
}

/// Runs the closed loop over one pass. The actuator starts at rest at the
/// first command.
pub fn run_pass(scenario: &Scenario, seed: u64) -> Result<PassRun> {
    scenario.validate()?;
    let (sensitivity, calibrated) = scenario.sensitivity()?;
    let samples = pass_profile(&scenario.geometry)?;
    let policy = &scenario.policy;
    let map = scenario.actuator.map;

    let mut emu = Emulator::new(scenario.actuator, seed)?;
    emu.set_temperature(scenario.options.temperature)?;
    emu.set_wavelength(scenario.link.wavelength)?;
    let vibration = match scenario.options.vibration {
        Some(v) => steering_residual(v.frequency, v.amplitude, &scenario.actuator.steering)?.residual,
        None => 0.0,
    };

    let mut steps = Vec::with_capacity(samples.len());
    let mut prev_t = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let axis = if scenario.options.axis_wander {
            let (x, y) = emu.axis_deviation()?;
            x.hypot(y)
        } else {
            0.0
        };
        let sigma = scenario.jitter.at(s.t).hypot(vibration).hypot(axis);
        let command = adaptive_policy(policy, sigma, &map);
        let theta = DivergenceAngle::fwhm(command)?;
        if i == 0 {
            emu.preposition(theta, policy.branch, policy.thermal_correction)?;
        } else {
            emu.retarget(theta, policy.branch, policy.thermal_correction)?;
            let dt = s.t - prev_t;
            if dt > 0.0 {
                emu.step(dt)?;
            }
        }
        prev_t = s.t;

        let actual = emu.actual_divergence()?.fwhm_value();
        let tick = evaluate_link(&scenario.link, &sensitivity, policy, s.slant_range, sigma, actual)?;
        steps.push(SimStep {
            t_s: s.t,
            weight_s: s.weight,
            elevation_deg: s.elevation_deg,
            slant_range_m: s.slant_range,
            sigma_p_rad: sigma,
            theta_commanded_rad: command,
            theta_set_rad: emu.set_divergence()?.fwhm_value(),
            theta_actual_rad: actual,
            lens_position_m: emu.state().lens_position,
            pointing_loss_db: tick.pointing_loss_db,
            received_power_dbm: tick.received_power_dbm,
            margin_db: tick.margin_db,
            rate_bps: tick.rate,
            margin_ok: tick.margin_ok,
        });
    }
    let summary = summarize(&steps, seed, policy.strategy, sensitivity, calibrated);
    Ok(PassRun { steps, summary })
}

fn summarize(steps: &[SimStep], seed: u64, strategy: Strategy, sensitivity: SensitivityModel, calibrated: bool) -> Summary {
    let duration: f64 = steps.iter().map(|s| s.weight_s).sum();
    let total_bits: f64 = steps.iter().filter(|s| s.margin_ok).map(|s| s.rate_bps * s.weight_s).sum();
    let ok_time: f64 = steps.iter().filter(|s| s.margin_ok).map(|s| s.weight_s).sum();
    let lags: Vec<f64> = steps.iter().map(|s| (s.theta_actual_rad - s.theta_commanded_rad).abs()).collect();
    let ranges = steps.iter().map(|s| s.slant_range_m);
    Summary {
        seed,
        strategy,
        ticks: steps.len(),
        pass_duration: duration,
        min_slant_range: ranges.clone().fold(f64::INFINITY, f64::min),
        max_slant_range: ranges.fold(0.0, f64::max),
        total_bits,
        fraction_margin_ok: if duration > 0.0 { ok_time / duration } else { 0.0 },
        mean_rate: if duration > 0.0 { total_bits / duration } else { 0.0 },
        lag_mean: lags.iter().sum::<f64>() / lags.len().max(1) as f64,
        lag_max: lags.iter().copied().fold(0.0, f64::max),
        sensitivity,
        sensitivity_calibrated: calibrated,
    }
}

/// Per-tick CSV; the header is the [`SimStep`] field names.
pub fn write_steps_csv<W: Write>(steps: &[SimStep], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in steps {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(summary: &Summary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::ThermalModel;
    use crate::link_budget::{DESIGN_FAR_POINT, DESIGN_DIVERGENCE_FWHM};
    use super::Strategy;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn slant_range_cases() {
        let g = PassGeometry::default();
        assert_eq!(slant_range(90.0, &g).unwrap(), 600e3);
        let el = elevation_for_range(1200e3, &g).unwrap();
        assert!(el > 0.0 && el < 90.0, "{el}");
        assert!(rel(slant_range(el, &g).unwrap(), 1200e3) < 1e-12);
        assert!(slant_range(0.0, &g).is_err());
        assert!(slant_range(90.5, &g).is_err());
        assert!(elevation_for_range(500e3, &g).is_err());
    }

    #[test]
    fn slant_range_matches_law_of_cosines() {
        // Oracle: station at (0, Re), satellite at orbit radius r along the
        // direction given by the central angle.
        let g = PassGeometry::default();
        for el in [5.0, 20.0, 45.0, 70.0, 89.0] {
            let gamma = g.central_angle(el);
            let r = g.earth_radius + g.orbit_altitude;
            let (sx, sy) = (r * gamma.sin(), r * gamma.cos());
            let d = (sx * sx + (sy - g.earth_radius).powi(2)).sqrt();
            assert!(rel(slant_range(el, &g).unwrap(), d) < 1e-12);
            assert!(rel(g.range_from_central(gamma), d) < 1e-12);
            assert!((g.elevation_from_central(gamma) - el).abs() < 1e-9);
        }
    }

    #[test]
    fn zenith_pass_profile() {
        let g = PassGeometry::default();
        let p = pass_profile(&g).unwrap();
        let n = p.len();
        let peak = p.iter().map(|s| s.slant_range).fold(f64::INFINITY, f64::min);
        assert_eq!(peak, 600e3);
        assert!(rel(p[0].slant_range, 1200e3) < 1e-9);
        assert!(rel(p[n - 1].slant_range, 1200e3) < 1e-9);
        assert_eq!(p[0].t, 0.0);
        for i in 0..n {
            assert!(rel(p[i].slant_range, p[n - 1 - i].slant_range) < 1e-12);
        }
        let total: f64 = p.iter().map(|s| s.weight).sum();
        assert!((total - p[n - 1].t).abs() < 1e-9);
        // A 600 km orbit moves at about 3.6 mrad/s of arc.
        assert!(p[n - 1].t > 100.0 && p[n - 1].t < 600.0, "{}", p[n - 1].t);
    }

    #[test]
    fn empty_pass() {
        let g = PassGeometry {
            max_elevation_deg: 10.0,
            ..PassGeometry::default()
        };
        assert!(pass_profile(&g).is_err());
        let both = PassGeometry {
            min_elevation_deg: Some(10.0),
            ..PassGeometry::default()
        };
        assert!(both.validate().is_err());
    }

    #[test]
    fn policy_cases() {
        let map = DivergenceMap::design();
        let rule = ControlPolicy {
            strategy: Strategy::Rule5Sigma,
            ..ControlPolicy::default()
        };
        assert!((adaptive_policy(&rule, 366.5e-6, &map) - 1.8325e-3).abs() < 1e-12);
        assert_eq!(adaptive_policy(&rule, 1e-6, &map), 90e-6);
        assert_eq!(adaptive_policy(&rule, 0.0, &map), 90e-6);
        assert_eq!(adaptive_policy(&rule, 1.0, &map), map.branch_max(Branch::Diverging));
        let fixed = ControlPolicy {
            strategy: Strategy::Fixed,
            fixed_divergence: Some(5e-3),
            ..ControlPolicy::default()
        };
        for s in [0.0, 1e-6, 1e-3] {
            assert_eq!(adaptive_policy(&fixed, s, &map), 5e-3);
        }
        let opt = ControlPolicy::default();
        assert_eq!(adaptive_policy(&opt, 0.0, &map), 90e-6);
        assert!((adaptive_policy(&opt, 100e-6, &map) - 429.19e-6).abs() < 0.01e-6);
    }

    #[test]
    fn policy_validation() {
        let map = DivergenceMap::design();
        let p = ControlPolicy {
            strategy: Strategy::Fixed,
            ..ControlPolicy::default()
        };
        assert!(p.validate(&map).is_err());
        let p = ControlPolicy {
            fixed_divergence: Some(10e-3),
            ..p
        };
        assert!(p.validate(&map).is_err());
        let p = ControlPolicy {
            rate_ladder: vec![2e9, 1e9],
            ..ControlPolicy::default()
        };
        assert!(p.validate(&map).is_err());
        assert_eq!("rule_5_sigma".parse::<Strategy>().unwrap(), Strategy::Rule5Sigma);
    }

    #[test]
    fn jitter_interpolation() {
        let j = JitterSchedule {
            sigma: 0.0,
            times: vec![0.0, 10.0],
            sigmas: vec![1e-6, 3e-6],
        };
        j.validate().unwrap();
        assert_eq!(j.at(-5.0), 1e-6);
        assert!((j.at(5.0) - 2e-6).abs() < 1e-18);
        assert_eq!(j.at(50.0), 3e-6);
        assert_eq!(JitterSchedule::constant(4e-6).at(1.0), 4e-6);
    }

    fn anchor_run() -> PassRun {
        run_pass(&Scenario::default(), 1).unwrap()
    }

    #[test]
    fn zero_jitter_reproduces_anchors() {
        let run = anchor_run();
        assert!(run.summary.sensitivity_calibrated);
        for s in &run.steps {
            assert_eq!(s.theta_commanded_rad, DESIGN_DIVERGENCE_FWHM);
            assert!((s.theta_actual_rad - 90e-6).abs() < 1e-15);
        }
        let zenith = run.steps.iter().find(|s| s.slant_range_m == 600e3).unwrap();
        assert!(rel(zenith.rate_bps, 10e9) < 1e-9);
        assert!((zenith.margin_db - 5.0).abs() < 1e-9);
        assert!(zenith.margin_ok);
        for edge in [run.steps.first().unwrap(), run.steps.last().unwrap()] {
            assert!(rel(edge.slant_range_m, DESIGN_FAR_POINT.distance) < 1e-9);
            assert!(rel(edge.rate_bps, DESIGN_FAR_POINT.rate) < 1e-6, "{}", edge.rate_bps);
            assert!((edge.margin_db - 5.0).abs() < 0.01);
        }
        assert_eq!(run.summary.fraction_margin_ok, 1.0);
    }

    #[test]
    fn ladder_anchor_rates() {
        let mut sc = Scenario::default();
        sc.policy.rate_ladder = vec![1e9, 2.5e9, 5e9, 10e9];
        let run = run_pass(&sc, 0).unwrap();
        let zenith = run.steps.iter().find(|s| s.slant_range_m == 600e3).unwrap();
        assert_eq!(zenith.rate_bps, 10e9);
        assert!(zenith.margin_ok);
        assert_eq!(run.steps[0].rate_bps, 2.5e9);
        assert!(run.steps.iter().all(|s| sc.policy.rate_ladder.contains(&s.rate_bps)));
    }

    #[test]
    fn bits_are_the_sum_of_delivered_ticks() {
        let mut sc = Scenario::default();
        sc.jitter = JitterSchedule::constant(30e-6);
        sc.policy.min_rate = 1e9;
        let run = run_pass(&sc, 5).unwrap();
        let sum: f64 = run.steps.iter().filter(|s| s.margin_ok).map(|s| s.rate_bps * s.weight_s).sum();
        assert_eq!(run.summary.total_bits, sum);
        assert!(run.summary.fraction_margin_ok < 1.0 && run.summary.fraction_margin_ok > 0.0);
    }

    fn ramp_scenario(dt: f64) -> Scenario {
        let mut sc = Scenario::default();
        sc.geometry.dt = dt;
        sc.jitter = JitterSchedule {
            sigma: 0.0,
            times: vec![0.0, 200.0, 400.0],
            sigmas: vec![20e-6, 150e-6, 40e-6],
        };
        sc
    }

    #[test]
    fn dt_refinement_is_consistent() {
        let coarse = run_pass(&ramp_scenario(2.0), 0).unwrap().summary.total_bits;
        let fine = run_pass(&ramp_scenario(1.0), 0).unwrap().summary.total_bits;
        let finer = run_pass(&ramp_scenario(0.5), 0).unwrap().summary.total_bits;
        assert!(rel(coarse, fine) < 0.01, "{coarse} {fine}");
        assert!(rel(fine, finer) < 0.01, "{fine} {finer}");
    }

    #[test]
    fn commands_stay_in_range_and_motion_respects_slew() {
        let mut sc = ramp_scenario(0.5);
        sc.policy.strategy = Strategy::Rule5Sigma;
        sc.jitter.sigmas = vec![20e-6, 2e-3, 40e-6];
        let run = run_pass(&sc, 0).unwrap();
        let map = sc.actuator.map;
        let v = sc.actuator.motor_speed;
        for w in run.steps.windows(2) {
            let moved = (w[1].lens_position_m - w[0].lens_position_m).abs();
            assert!(moved <= v * (w[1].t_s - w[0].t_s) + 1.5 * sc.actuator.position_quantum);
        }
        for s in &run.steps {
            assert!(s.theta_commanded_rad >= map.collimated_divergence);
            assert!(s.theta_commanded_rad <= map.branch_max(Branch::Diverging));
        }
    }

    #[test]
    fn adaptive_equals_fixed_minimum_without_jitter() {
        let adaptive = run_pass(&Scenario::default(), 0).unwrap();
        let mut sc = Scenario::default();
        sc.policy.strategy = Strategy::Fixed;
        sc.policy.fixed_divergence = Some(90e-6);
        let fixed = run_pass(&sc, 0).unwrap();
        assert_eq!(adaptive.summary.total_bits, fixed.summary.total_bits);
        for (a, f) in adaptive.steps.iter().zip(&fixed.steps) {
            assert_eq!(a.margin_db, f.margin_db);
        }
    }

    #[test]
    fn identical_seeds_identical_bytes() {
        let mut sc = ramp_scenario(1.0);
        sc.options.axis_wander = true;
        sc.options.vibration = Some(Vibration {
            frequency: 50.0,
            amplitude: 20e-6,
        });
        let render = |seed| {
            let run = run_pass(&sc, seed).unwrap();
            let mut csv = Vec::new();
            write_steps_csv(&run.steps, &mut csv).unwrap();
            let mut json = Vec::new();
            write_summary_json(&run.summary, &mut json).unwrap();
            (csv, json)
        };
        assert_eq!(render(42), render(42));
        assert_ne!(render(42).0, render(43).0);
    }

    #[test]
    fn thermal_correction_restores_power() {
        let mut sc = Scenario::default();
        sc.options.temperature = -30.0;
        let drifted = run_pass(&sc, 0).unwrap();
        assert!((drifted.steps[0].theta_actual_rad - 675e-6).abs() < 1e-9);
        sc.policy.thermal_correction = true;
        let corrected = run_pass(&sc, 0).unwrap();
        assert!(rel(corrected.steps[0].theta_actual_rad, 90e-6) < 0.01);
        assert!(corrected.summary.total_bits > drifted.summary.total_bits);
        assert_eq!(ThermalModel::design().min_temperature, -30.0);
    }

    #[test]
    fn bad_configs_fail_before_running() {
        let mut sc = Scenario::default();
        sc.options.temperature = 80.0;
        assert!(run_pass(&sc, 0).is_err());
        let mut sc = Scenario::default();
        sc.geometry.dt = 0.0;
        assert!(run_pass(&sc, 0).is_err());
    }

    proptest! {
        #[test]
        fn range_decreases_with_elevation(a in 0.5f64..89.0, d in 0.01f64..1.0) {
            let g = PassGeometry::default();
            prop_assert!(slant_range(a + d, &g).unwrap() < slant_range(a, &g).unwrap());
            prop_assert!(slant_range(a, &g).unwrap() >= g.orbit_altitude);
        }

        #[test]
        fn wider_jitter_never_helps(s1 in 0.0f64..2e-3, ds in 0.0f64..1e-3, range in 600e3f64..1200e3) {
            let link = LinkConfig::design();
            let sens = link.sensitivity.unwrap();
            let policy = ControlPolicy::default();
            let map = DivergenceMap::design();
            let eval = |s: f64| {
                let theta = adaptive_policy(&policy, s, &map);
                evaluate_link(&link, &sens, &policy, range, s, theta).unwrap()
            };
            let (a, b) = (eval(s1), eval(s1 + ds));
            prop_assert!(b.received_power_dbm <= a.received_power_dbm + 1e-9);
            prop_assert!(b.rate <= a.rate * (1.0 + 1e-9));
        }
    }
}
