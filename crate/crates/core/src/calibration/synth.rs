//! Synthetic measurement campaigns, generated from the device models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ChromaticObservation, PositionSample, ProfilerSample, ThermalObservation, PROFILER_RESOLUTION};
use crate::actuator::{apply_temperature, apply_wavelength, divergence_at_temperature, Branch, DivergenceMap, Emulator, EmulatorConfig, ThermalModel};
use crate::beam_optics::{DivergenceAngle, DESIGN_WAIST_DIAMETER};
use crate::error::Result;

/// Profiler stations, meters from the prototype.
pub const PROFILE_DISTANCES: [f64; 4] = [3.0, 5.0, 10.0, 15.0];
/// Temperatures of the thermal-vacuum steps, °C.
pub const THERMAL_CAMPAIGN: [f64; 5] = [-30.0, -20.0, 20.0, 40.0, 60.0];

/// Uniform quantization of a spot-diameter reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilerNoise {
    pub resolution: f64,
    /// Adds uniform dither of one quantum before rounding, which makes the
    /// reading unbiased on average.
    pub dither: bool,
}

impl ProfilerNoise {
    pub fn design() -> Self {
        Self {
            resolution: PROFILER_RESOLUTION,
            dither: true,
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, diameter: f64, rng: &mut R) -> f64 {
        let u = if self.dither { rng.random_range(-0.5..0.5) } else { 0.0 };
        (diameter / self.resolution + u).round() * self.resolution
    }
}

/// Readings of a beam with 1/e² full-angle divergence `theta_full_1e2`
/// leaving the prototype with diameter `waist_diameter`.
pub fn profile_samples<R: Rng + ?Sized>(
    lens_position: Option<f64>,
    theta_full_1e2: f64,
    waist_diameter: f64,
    distances: &[f64],
    replicates: u32,
    noise: Option<ProfilerNoise>,
    rng: &mut R,
) -> Vec<ProfilerSample> {
    let mut out = Vec::with_capacity(distances.len() * replicates as usize);
    for &z in distances {
        let truth = waist_diameter + theta_full_1e2 * z;
        for r in 0..replicates {
            let d = match noise {
                Some(n) => n.apply(truth, rng),
                None => truth,
            };
            out.push(ProfilerSample {
                lens_position,
                distance: z,
                spot_diameter_1e2: d,
                replicate: (replicates > 1).then_some(r),
            });
        }
    }
    out
}

/// Symmetric grid of `2·per_side + 1` lens positions across the full travel.
pub fn travel_grid(map: &DivergenceMap, per_side: u32) -> Vec<f64> {
    let n = per_side as i64;
    (-n..=n).map(|k| map.max_travel * (k as f64 / n as f64)).collect()
}

/// Exact (position, divergence) pairs of a map.
pub fn map_pairs(map: &DivergenceMap, per_side: u32) -> Vec<PositionSample> {
    travel_grid(map, per_side)
        .into_iter()
        .map(|x| PositionSample {
            lens_position: x,
            theta: map.divergence_at(x),
        })
        .collect()
}

/// Divergence the emulator reports at each grid position, at ambient
/// conditions.
pub fn emulator_position_pairs(config: &EmulatorConfig, per_side: u32) -> Result<Vec<PositionSample>> {
    let mut emu = Emulator::new(*config, 0)?;
    travel_grid(&config.map, per_side)
        .into_iter()
        .map(|x| {
            let theta = config.map.divergence_from_position(x)?;
            emu.preposition(theta, Branch::of_position(x), false)?;
            Ok(PositionSample {
                lens_position: emu.state().lens_position,
                theta: emu.actual_divergence()?.fwhm_value(),
            })
        })
        .collect()
}

/// Noiseless profiler readings at every grid position of the emulator.
pub fn emulator_profile_samples(config: &EmulatorConfig, per_side: u32, distances: &[f64]) -> Result<Vec<ProfilerSample>> {
    // Noiseless: the generator is never drawn from.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::new();
    for p in emulator_position_pairs(config, per_side)? {
        let full = DivergenceAngle::fwhm(p.theta)?.full_1e2_value();
        out.extend(profile_samples(
            Some(p.lens_position),
            full,
            DESIGN_WAIST_DIAMETER,
            distances,
            1,
            None,
            &mut rng,
        ));
    }
    Ok(out)
}

/// Multiplies every divergence by `1 + N(0, relative)`.
pub fn multiplicative_noise<R: Rng + ?Sized>(pairs: &[PositionSample], relative: f64, rng: &mut R) -> Vec<PositionSample> {
    let normal = Normal::new(0.0, relative).expect("finite noise level");
    pairs
        .iter()
        .map(|p| PositionSample {
            lens_position: p.lens_position,
            theta: p.theta * (1.0 + normal.sample(rng)),
        })
        .collect()
}

/// Emulated divergence at both thermal anchors for each temperature.
pub fn emulator_thermal_observations(config: &EmulatorConfig, temperatures: &[f64]) -> Result<Vec<ThermalObservation>> {
    let mut out = Vec::new();
    for anchor in [config.thermal.collimated_anchor, config.thermal.wide_anchor] {
        let x = config.map.position_at(anchor, Branch::Diverging);
        for &t in temperatures {
            out.push(ThermalObservation {
                theta_set: anchor,
                temperature: t,
                theta_measured: divergence_at_temperature(x, t, &config.thermal, &config.map)?.fwhm_value(),
            });
        }
    }
    Ok(out)
}

/// Observations predicted directly by a thermal model at its anchors.
pub fn model_thermal_observations(model: &ThermalModel, temperatures: &[f64]) -> Vec<ThermalObservation> {
    let mut out = Vec::new();
    for anchor in [model.collimated_anchor, model.wide_anchor] {
        for &t in temperatures {
            let set = DivergenceAngle::fwhm(anchor).expect("positive anchor");
            let theta_measured = match apply_temperature(set, t, model) {
                Ok(v) => v.fwhm_value(),
                // A negative divergence is not an angle, but the fit only
                // needs the arithmetic value.
                Err(_) => anchor + model.deviation(anchor, t),
            };
            out.push(ThermalObservation {
                theta_set: anchor,
                temperature: t,
                theta_measured,
            });
        }
    }
    out
}

/// Emulated divergence at both chromatic anchors at the band edges and the
/// reference wavelength, at ambient temperature.
pub fn emulator_chromatic_observations(config: &EmulatorConfig) -> Result<Vec<ChromaticObservation>> {
    let c = &config.chromatic;
    let mut out = Vec::new();
    for anchor in [c.collimated_anchor, c.wide_anchor] {
        let x = config.map.position_at(anchor, Branch::Diverging);
        let base = divergence_at_temperature(x, config.thermal.reference_temperature, &config.thermal, &config.map)?;
        for lambda in [c.short_wavelength, c.reference_wavelength, c.long_wavelength] {
            out.push(ChromaticObservation {
                theta_set: anchor,
                wavelength: lambda,
                theta_measured: apply_wavelength(base, lambda, c)?.fwhm_value(),
            });
        }
    }
    Ok(out)
}
