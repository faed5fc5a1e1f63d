//! The run configuration file.
//!
//! TOML with one table per model; JSON with the same structure is accepted
//! for files ending in `.json`. Every table is optional and falls back to the
//! reference design. Unknown keys are rejected and reported with their full
//! dotted path.
//!
//! ```toml
//! seed = 7
//!
//! [link]
//! tx_power = 2.0                  # W
//! tx_divergence = { value = 90e-6, convention = "fwhm" }
//!
//! [pass]
//! max_range = 1.2e6               # m
//! dt = 1.0                        # s
//!
//! [policy]
//! strategy = "EXACT_OPT"
//! margin_floor_db = 5.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuator::{AxisStability, ChromaticModel, DivergenceMap, EmulatorConfig, SteeringModel, ThermalModel, DEFAULT_POSITION_QUANTUM, FULL_TRAVERSE_TIME};
use crate::error::{Error, Result};
use crate::link_budget::LinkConfig;
use crate::sim::{ControlPolicy, JitterSchedule, PassGeometry, Scenario, SimOptions};

/// Lens-drive parameters that are not part of the optical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorSection {
    /// m/s. Defaults to the full travel of both branches in 0.9 s.
    pub motor_speed: Option<f64>,
    /// m.
    pub position_quantum: f64,
    pub axis: AxisStability,
    pub steering: SteeringModel,
}

impl Default for ActuatorSection {
    fn default() -> Self {
        Self {
            motor_speed: None,
            position_quantum: DEFAULT_POSITION_QUANTUM,
            axis: AxisStability::default(),
            steering: SteeringModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Per-tick or trace CSV.
    pub csv: Option<PathBuf>,
    /// Summary or report JSON.
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub link: LinkConfig,
    pub map: DivergenceMap,
    pub thermal: ThermalModel,
    pub chromatic: ChromaticModel,
    pub actuator: ActuatorSection,
    pub pass: PassGeometry,
    pub policy: ControlPolicy,
    pub jitter: JitterSchedule,
    pub sim: SimOptions,
    pub output: OutputSection,
}

fn config_error<E>(err: serde_path_to_error::Error<E>, message: impl FnOnce(E) -> String) -> Error {
    let key = err.path().to_string();
    Error::Config {
        key: if key == "." { String::new() } else { key },
        message: message(err.into_inner()),
    }
}

/// The parser's own message plus the 1-based line it points at.
fn toml_message(err: &toml::de::Error, text: &str) -> String {
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("{} (line {line})", err.message().trim())
        }
        None => err.message().trim().to_owned(),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config {
            key: String::new(),
            message: toml_message(&e, text),
        })?;
        let cfg: Self =
            serde_path_to_error::deserialize(de).map_err(|e| config_error(e, |inner| toml_message(&inner, text)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| config_error(e, |inner| inner.to_string()))?;
        de.end().map_err(|e| Error::Config {
            key: String::new(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, as JSON when it ends in `.json` and TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn emulator_config(&self) -> EmulatorConfig {
        EmulatorConfig {
            map: self.map,
            thermal: self.thermal,
            chromatic: self.chromatic,
            motor_speed: self
                .actuator
                .motor_speed
                .unwrap_or(2.0 * self.map.max_travel / FULL_TRAVERSE_TIME),
            position_quantum: self.actuator.position_quantum,
            axis: self.actuator.axis,
            steering: self.actuator.steering,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            geometry: self.pass,
            policy: self.policy.clone(),
            link: self.link.clone(),
            actuator: self.emulator_config(),
            jitter: self.jitter.clone(),
            options: self.sim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config {
            key: String::new(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Strategy;

    #[test]
    fn empty_file_is_the_design() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.emulator_config(), EmulatorConfig::default());
    }

    #[test]
    fn partial_tables_override_defaults() {
        let cfg = RunConfig::from_toml_str(
            r#"
            seed = 9
            [link]
            tx_power = 1.0
            [thermal]
            min_temperature = -40.0
            [policy]
            strategy = "FIXED"
            fixed_divergence = 5e-3
            [jitter]
            times = [0.0, 100.0]
            sigmas = [1e-6, 2e-6]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.link.tx_power, 1.0);
        assert_eq!(cfg.link.wavelength, 1550e-9);
        assert_eq!(cfg.thermal.min_temperature, -40.0);
        assert_eq!(cfg.thermal.max_temperature, 60.0);
        assert_eq!(cfg.policy.strategy, Strategy::Fixed);
        assert_eq!(cfg.jitter.at(50.0), 1.5e-6);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml_str("[link]\ntx_powr = 2.0\n").unwrap_err();
        match err {
            Error::Config { key, message } => {
                assert_eq!(key, "link.tx_powr");
                assert!(message.contains("tx_powr"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = RunConfig::from_toml_str("bogus = 1\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "bogus"), "{err:?}");
        let err = RunConfig::from_json_str(r#"{"pass": {"dt": 1.0, "zzz": 2}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "pass.zzz"), "{err:?}");
    }

    #[test]
    fn wrong_types_are_named() {
        let err = RunConfig::from_toml_str("[pass]\ndt = \"fast\"\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "pass.dt"), "{err:?}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml_str("[pass]\ndt = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[policy]\nstrategy = \"FIXED\"\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = Some(3);
        cfg.link = LinkConfig::design();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json_str(&json).unwrap(), cfg);
    }
}
