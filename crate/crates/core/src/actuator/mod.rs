//! Discrete-time emulator of the beam-divergence control hardware.
//!
//! A stepper-driven lens group moves at constant speed along a rail. Its
//! position maps piecewise-linearly to the output divergence; temperature and
//! wavelength perturb that mapping, and the optical axis wanders slightly.

mod chromatic;
mod emulator;
mod map;
pub mod script;
mod thermal;

pub use chromatic::{apply_wavelength, ChromaticModel, EdgeOffsets};
pub use emulator::{
    axis_deviation, command_divergence, plan_move, step, steering_residual, ActuatorState, AxisStability,
    Emulator, EmulatorConfig, MotionPlan, SteeringModel, SteeringResidual, DEFAULT_POSITION_QUANTUM,
    FULL_TRAVERSE_TIME, PEAK_POWER_W,
};
pub use map::{
    Branch, DivergenceMap, DESIGN_COLLIMATED_FWHM, DESIGN_CONVERGING_MAX, DESIGN_DIVERGING_MAX, DESIGN_MAX_TRAVEL,
};
pub use thermal::{
    apply_temperature, divergence_at_temperature, temperature_corrected_position, SideSlopes, ThermalModel,
    ThermalShift, QUALIFIED_RANGE, REFERENCE_TEMPERATURE,
};
