//! Regenerates the sample files under `fixtures/`.
//!
//! ```text
//! cargo run -p beamdiv --example make_fixtures -- fixtures
//! ```

use std::fs::{self, File};
use std::path::PathBuf;

use beamdiv::actuator::EmulatorConfig;
use beamdiv::beam_optics::{DivergenceAngle, DESIGN_WAIST_DIAMETER};
use beamdiv::calibration::synth::{
    emulator_chromatic_observations, emulator_position_pairs, emulator_profile_samples, emulator_thermal_observations,
    multiplicative_noise, profile_samples, ProfilerNoise, PROFILE_DISTANCES, THERMAL_CAMPAIGN,
};
use beamdiv::calibration::write_samples;
use beamdiv::config::RunConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> beamdiv::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&dir)?;
    let config = EmulatorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    write_samples(&emulator_profile_samples(&config, 5, &PROFILE_DISTANCES)?, File::create(dir.join("lens_sweep_profiles.csv"))?)?;

    let pairs = emulator_position_pairs(&config, 10)?;
    write_samples(&pairs, File::create(dir.join("positions.csv"))?)?;
    write_samples(&multiplicative_noise(&pairs, 0.02, &mut rng), File::create(dir.join("positions_noisy.csv"))?)?;

    let full = DivergenceAngle::fwhm(config.map.collimated_divergence)?.full_1e2_value();
    let readings = profile_samples(None, full, DESIGN_WAIST_DIAMETER, &PROFILE_DISTANCES, 200, Some(ProfilerNoise::design()), &mut rng);
    write_samples(&readings, File::create(dir.join("collimated_profiles.csv"))?)?;

    write_samples(&emulator_thermal_observations(&config, &THERMAL_CAMPAIGN)?, File::create(dir.join("thermal.csv"))?)?;
    write_samples(&emulator_chromatic_observations(&config)?, File::create(dir.join("chromatic.csv"))?)?;

    let run = RunConfig {
        seed: Some(1),
        ..RunConfig::default()
    };
    fs::write(dir.join("design.toml"), run.to_toml_string()?)?;
    Ok(())
}
