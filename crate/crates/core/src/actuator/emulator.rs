use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::chromatic::{apply_wavelength, ChromaticModel};
use super::map::{Branch, DivergenceMap};
use super::thermal::{temperature_corrected_position, ThermalModel, REFERENCE_TEMPERATURE};
use crate::beam_optics::{DivergenceAngle, DESIGN_WAVELENGTH};
use crate::error::{require_non_negative, require_positive, Error, Result};

/// Total lens travel (both branches) covered in the full-range slew time.
pub const FULL_TRAVERSE_TIME: f64 = 0.9;
/// Peak power draw of the optomechanics while moving, watts (metadata only).
pub const PEAK_POWER_W: f64 = 0.7;
pub const DEFAULT_POSITION_QUANTUM: f64 = 1e-6;

/// Axis wander statistics. The wander scales with the set divergence and is
/// hard-limited to a fraction of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxisStability {
    /// Long-run mean deviation magnitude at the collimated divergence, radians.
    pub collimated_mean: f64,
    /// Divergence at which `collimated_mean` applies, radians FWHM.
    pub collimated_divergence: f64,
    /// Bound on |deviation| as a fraction of the set divergence.
    pub bound_fraction: f64,
}

impl Default for AxisStability {
    fn default() -> Self {
        Self {
            collimated_mean: 1.3e-6,
            collimated_divergence: 90e-6,
            bound_fraction: 0.05,
        }
    }
}

impl AxisStability {
    /// One (x, y) deviation sample for a beam set to `theta_set`.
    ///
    /// Circular Gaussian wander, rejection-truncated at the bound.
    pub fn sample<R: Rng + ?Sized>(&self, theta_set: f64, rng: &mut R) -> (f64, f64) {
        let mean = self.collimated_mean * theta_set / self.collimated_divergence;
        // Rayleigh mean = σ·sqrt(π/2).
        let sigma = mean / (PI / 2.0).sqrt();
        let bound = self.bound_fraction * theta_set;
        let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        let mut draw = (0.0, 0.0);
        for _ in 0..64 {
            draw = (normal.sample(rng), normal.sample(rng));
            if draw.0.hypot(draw.1) <= bound {
                return draw;
            }
        }
        let scale = bound / draw.0.hypot(draw.1);
        (draw.0 * scale, draw.1 * scale)
    }
}

/// Two-axis wedge-prism steering and vibration isolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteeringModel {
    /// Per-axis steering range, ± radians.
    pub range: f64,
    /// Highest disturbance frequency that is rejected, Hz.
    pub isolation_bandwidth: f64,
    /// Residual fraction of an in-band disturbance.
    pub rejection_factor: f64,
}

impl Default for SteeringModel {
    fn default() -> Self {
        Self {
            range: 100e-6,
            isolation_bandwidth: 100.0,
            rejection_factor: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringResidual {
    pub residual: f64,
    /// The disturbance exceeded the steering range.
    pub saturated: bool,
}

/// Pointing error left after the isolation stage acts on a sinusoidal
/// disturbance of `amplitude` radians at `frequency` Hz.
pub fn steering_residual(frequency: f64, amplitude: f64, model: &SteeringModel) -> Result<SteeringResidual> {
    require_non_negative("frequency", frequency)?;
    require_non_negative("amplitude", amplitude)?;
    let steerable = amplitude.min(model.range);
    let excess = amplitude - steerable;
    let residual = if frequency <= model.isolation_bandwidth {
        steerable * model.rejection_factor + excess
    } else {
        amplitude
    };
    Ok(SteeringResidual {
        residual,
        saturated: excess > 0.0,
    })
}

/// Static configuration of the emulated device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmulatorConfig {
    pub map: DivergenceMap,
    pub thermal: ThermalModel,
    pub chromatic: ChromaticModel,
    /// Lens-group speed, m/s.
    pub motor_speed: f64,
    /// Smallest lens increment, meters.
    pub position_quantum: f64,
    pub axis: AxisStability,
    pub steering: SteeringModel,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        let map = DivergenceMap::design();
        Self {
            map,
            thermal: ThermalModel::design(),
            chromatic: ChromaticModel::design(),
            motor_speed: 2.0 * map.max_travel / FULL_TRAVERSE_TIME,
            position_quantum: DEFAULT_POSITION_QUANTUM,
            axis: AxisStability::default(),
            steering: SteeringModel::default(),
        }
    }
}

impl EmulatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.thermal.validate()?;
        self.chromatic.validate()?;
        require_positive("motor_speed", self.motor_speed)?;
        require_positive("position_quantum", self.position_quantum)?;
        require_non_negative("axis.collimated_mean", self.axis.collimated_mean)?;
        require_positive("axis.collimated_divergence", self.axis.collimated_divergence)?;
        require_positive("axis.bound_fraction", self.axis.bound_fraction)?;
        require_positive("steering.range", self.steering.range)?;
        require_non_negative("steering.isolation_bandwidth", self.steering.isolation_bandwidth)?;
        require_non_negative("steering.rejection_factor", self.steering.rejection_factor)?;
        Ok(())
    }
}

/// Snapshot of the emulated hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Emulator clock, seconds.
    pub time: f64,
    /// Signed lens position, meters; positive is the diverging branch.
    pub lens_position: f64,
    pub target_position: f64,
    /// m/s.
    pub motor_speed: f64,
    /// °C.
    pub temperature: f64,
    /// Meters.
    pub wavelength: f64,
    /// (tip, tilt) steering angles, radians.
    pub steering: (f64, f64),
    pub in_motion: bool,
    /// Fractional quanta travelled but not yet taken.
    #[serde(default)]
    pub travel_carry: f64,
}

impl ActuatorState {
    /// Collimated, at rest, 20 °C, 1550 nm.
    pub fn initial(motor_speed: f64) -> Self {
        Self {
            time: 0.0,
            lens_position: 0.0,
            target_position: 0.0,
            motor_speed,
            temperature: REFERENCE_TEMPERATURE,
            wavelength: DESIGN_WAVELENGTH,
            steering: (0.0, 0.0),
            in_motion: false,
            travel_carry: 0.0,
        }
    }
}

/// Where the lens will go and how long it takes to get there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub target_position: f64,
    pub branch: Branch,
    pub duration: f64,
}

/// Plans a constant-speed move to `target_position`, snapped to the quantum.
pub fn plan_move(state: &ActuatorState, target_position: f64, branch: Branch, quantum: f64) -> MotionPlan {
    let target = (target_position / quantum).round() * quantum;
    MotionPlan {
        target_position: target,
        branch,
        duration: (target - state.lens_position).abs() / state.motor_speed,
    }
}

/// Motion plan for an uncorrected divergence command.
pub fn command_divergence(
    state: &ActuatorState,
    theta_target: DivergenceAngle,
    branch: Branch,
    config: &EmulatorConfig,
) -> Result<MotionPlan> {
    let x = config.map.position_from_divergence(theta_target, branch)?;
    Ok(plan_move(state, x, branch, config.position_quantum))
}

/// Advances the constant-speed motion by `dt` seconds.
///
/// The lens only ever sits on multiples of `quantum`; fractional travel is
/// carried to the next call, so splitting an interval does not change where
/// the lens ends up.
pub fn step(state: &ActuatorState, dt: f64, quantum: f64) -> Result<ActuatorState> {
    require_positive("dt", dt)?;
    require_positive("position_quantum", quantum)?;
    let mut next = state.clone();
    next.time += dt;
    let current = (state.lens_position / quantum).round() as i64;
    let target = (state.target_position / quantum).round() as i64;
    let remaining = (target - current).unsigned_abs() as f64;
    if remaining == 0.0 {
        next.lens_position = current as f64 * quantum;
        next.in_motion = false;
        next.travel_carry = 0.0;
        return Ok(next);
    }
    let travel = state.motor_speed * dt / quantum + state.travel_carry;
    // Absorb rounding so that exactly-timed moves land on schedule.
    let whole = (travel + 1e-9).floor();
    let reached = if whole >= remaining {
        next.in_motion = false;
        next.travel_carry = 0.0;
        target
    } else {
        next.in_motion = true;
        next.travel_carry = (travel - whole).max(0.0);
        current + (target - current).signum() * whole as i64
    };
    next.lens_position = reached as f64 * quantum;
    Ok(next)
}

/// One deviation sample from a fresh generator seeded with `seed`.
pub fn axis_deviation(state: &ActuatorState, config: &EmulatorConfig, seed: u64) -> Result<(f64, f64)> {
    let theta = config.map.divergence_from_position(state.lens_position)?.value();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(config.axis.sample(theta, &mut rng))
}

/// Stateful device emulator: configuration, current state and the axis-wander
/// random stream.
#[derive(Debug, Clone)]
pub struct Emulator {
    config: EmulatorConfig,
    state: ActuatorState,
    rng: ChaCha8Rng,
}

impl Emulator {
    pub fn new(config: EmulatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: ActuatorState::initial(config.motor_speed),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &EmulatorConfig {
        &self.config
    }

    pub fn state(&self) -> &ActuatorState {
        &self.state
    }

    pub fn map(&self) -> &DivergenceMap {
        &self.config.map
    }

    fn start(&mut self, plan: MotionPlan) {
        self.state.target_position = plan.target_position;
        self.state.in_motion = plan.target_position != self.state.lens_position;
        self.state.travel_carry = 0.0;
    }

    /// Starts a move to `theta` on `branch` using the nominal map.
    pub fn command_divergence(&mut self, theta: DivergenceAngle, branch: Branch) -> Result<MotionPlan> {
        let plan = command_divergence(&self.state, theta, branch, &self.config)?;
        self.start(plan);
        Ok(plan)
    }

    /// Starts a move to the lens position that yields `theta` at the current
    /// temperature.
    pub fn command_corrected(&mut self, theta: DivergenceAngle, branch: Branch) -> Result<MotionPlan> {
        let (x, branch) = temperature_corrected_position(
            theta,
            self.state.temperature,
            &self.config.thermal,
            &self.config.map,
            branch,
        )?;
        let plan = plan_move(&self.state, x, branch, self.config.position_quantum);
        self.start(plan);
        Ok(plan)
    }

    /// Starts a move to `theta` unless the lens is already headed to the
    /// same quantized position. Returns whether a new move started.
    pub fn retarget(&mut self, theta: DivergenceAngle, branch: Branch, corrected: bool) -> Result<bool> {
        let plan = if corrected {
            let (x, branch) = temperature_corrected_position(
                theta,
                self.state.temperature,
                &self.config.thermal,
                &self.config.map,
                branch,
            )?;
            plan_move(&self.state, x, branch, self.config.position_quantum)
        } else {
            command_divergence(&self.state, theta, branch, &self.config)?
        };
        if plan.target_position == self.state.target_position {
            return Ok(false);
        }
        self.start(plan);
        Ok(true)
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.state = step(&self.state, dt, self.config.position_quantum)?;
        Ok(())
    }

    /// Steps in `tick` increments until the lens arrives. Returns the elapsed time.
    pub fn settle(&mut self, tick: f64) -> Result<f64> {
        require_positive("tick", tick)?;
        let start = self.state.time;
        let budget = 2.0 * self.config.map.max_travel / self.config.motor_speed / tick + 2.0;
        let mut n = 0.0;
        while self.state.in_motion || self.state.lens_position != self.state.target_position {
            if n > budget {
                return Err(Error::Numerical("lens did not reach its target".into()));
            }
            self.step(tick)?;
            n += 1.0;
        }
        Ok(self.state.time - start)
    }

    /// Jumps straight to `theta` without simulating the move.
    pub fn preposition(&mut self, theta: DivergenceAngle, branch: Branch, corrected: bool) -> Result<()> {
        if corrected {
            self.command_corrected(theta, branch)?;
        } else {
            self.command_divergence(theta, branch)?;
        }
        self.state.lens_position = self.state.target_position;
        self.state.in_motion = false;
        Ok(())
    }

    pub fn set_temperature(&mut self, t: f64) -> Result<()> {
        self.config.thermal.check_temperature(t)?;
        self.state.temperature = t;
        Ok(())
    }

    pub fn set_wavelength(&mut self, lambda: f64) -> Result<()> {
        self.config.chromatic.check_wavelength(lambda)?;
        self.state.wavelength = lambda;
        Ok(())
    }

    pub fn steer(&mut self, tip: f64, tilt: f64) -> Result<()> {
        let r = self.config.steering.range;
        for (name, v) in [("tip", tip), ("tilt", tilt)] {
            if !v.is_finite() || v.abs() > r {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    min: -r,
                    max: r,
                });
            }
        }
        self.state.steering = (tip, tilt);
        Ok(())
    }

    /// Divergence the nominal map assigns to the current lens position.
    pub fn set_divergence(&self) -> Result<DivergenceAngle> {
        self.config.map.divergence_from_position(self.state.lens_position)
    }

    /// Divergence actually emitted: nominal map, thermal defocus, then
    /// chromatic offset.
    pub fn actual_divergence(&self) -> Result<DivergenceAngle> {
        let shift = self.config.thermal.shift(self.state.temperature, &self.config.map)?;
        let thermal = DivergenceAngle::fwhm(self.config.map.divergence_at(shift.effective_position(self.state.lens_position)))?;
        apply_wavelength(thermal, self.state.wavelength, &self.config.chromatic)
    }

    /// Next axis-deviation sample from the emulator's random stream.
    pub fn axis_deviation(&mut self) -> Result<(f64, f64)> {
        let theta = self.set_divergence()?.value();
        Ok(self.config.axis.sample(theta, &mut self.rng))
    }

    pub fn steering_residual(&self, frequency: f64, amplitude: f64) -> Result<SteeringResidual> {
        steering_residual(frequency, amplitude, &self.config.steering)
    }
}
