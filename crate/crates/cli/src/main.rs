//! `beamdiv`: link budgets, divergence optimization, actuator emulation,
//! calibration fits and pass simulation from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue};
use clap::{Args, Parser, Subcommand};

use output::{ErrorRecord, Format};

macro_rules! units {
    () => {
        "\
Units and conventions:
  Angles in files, flags and configs are radians. Tables also show µrad or mrad.
  Divergence is the full-angle FWHM unless a field says otherwise; the 1/e²
  full angle is FWHM / sqrt(ln2 / 2) ≈ 1.699 × FWHM.
  Lengths and distances are meters, times seconds, temperatures °C, rates bit/s.
  Gains and losses are dB (losses are positive numbers); powers are dBm.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure.
Failures print one JSON record on stderr: {\"error\":{\"code\",\"kind\",\"key\",\"message\"}}."
    };
}

const UNITS: &str = units!();

const SCRIPT_HELP: &str = concat!(
    "Script grammar, one command per line or separated by `;`, `#` starts a comment:\n",
    "  set-divergence 5 mrad [diverging|converging]   nominal map position\n",
    "  set-divergence-lut 90 urad [branch]            temperature-corrected position\n",
    "  set-temperature -30        °C\n",
    "  set-wavelength 1530 nm\n",
    "  steer 20 urad -15 urad     tip and tilt\n",
    "  step 0.9 s                 advance time\n",
    "  settle                     step until the lens stops\n",
    "  query                      record the state only\n",
    "Bare numbers are SI. The trace starts with the initial state and has one row per command.\n\n",
    units!()
);

const CALIBRATE_HELP: &str = concat!(
    "Sample files (CSV with a header row):\n",
    "  profiles   distance_m, spot_diameter_m (1/e² diameter)[, replicate][, lens_position_m]\n",
    "  positions  lens_position_m, theta_rad (FWHM)\n",
    "  thermal    theta_set_rad, temp_c, theta_meas_rad\n",
    "  chromatic  theta_set_rad, wavelength_m, theta_meas_rad\n",
    "The position map must reach R² >= 0.9999 on both branches. A failed gate is\n",
    "reported in the table and as a warning on stderr; the exit code stays 0.\n\n",
    units!()
);

#[derive(Debug, Parser)]
#[command(name = "beamdiv", version, about = "Adaptive beam-divergence transmitter models", after_help = UNITS)]
pub struct Cli {
    /// Run configuration, TOML (or JSON when the name ends in .json).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config. Defaults to 0.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format. Each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Downlink budget at one slant range.
    #[command(after_help = UNITS)]
    Budget(BudgetArgs),
    /// Divergence that maximizes received power for a pointing jitter.
    #[command(after_help = UNITS)]
    Optimize(OptimizeArgs),
    /// Run an actuator command script and print the state trace.
    #[command(after_help = SCRIPT_HELP)]
    Emulate(EmulateArgs),
    /// Fit beam-profiler, position, thermal and chromatic samples.
    #[command(after_help = CALIBRATE_HELP)]
    Calibrate(CalibrateArgs),
    /// Simulate one satellite pass under the configured control policy.
    #[command(after_help = UNITS)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Slant range, m.
    #[arg(long, value_name = "M")]
    pub distance: f64,
    /// Data rate, bit/s. Without it the report gives the highest rate that
    /// keeps the configured margin floor.
    #[arg(long, value_name = "BPS")]
    pub rate: Option<f64>,
    /// RMS pointing jitter per axis, rad. Adds the pointing loss at the
    /// configured transmit divergence (FWHM).
    #[arg(long, value_name = "RAD", default_value_t = 0.0)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// RMS pointing jitter per axis, rad.
    #[arg(long, value_name = "RAD", required_unless_present = "sigma_deg", conflicts_with = "sigma_deg")]
    pub sigma: Option<f64>,
    /// RMS pointing jitter per axis, degrees.
    #[arg(long, value_name = "DEG")]
    pub sigma_deg: Option<f64>,
    /// Gain law for the exact optimum: quadratic (G ∝ 1/θ²) or linear (G ∝ 1/θ).
    #[arg(long, value_enum, default_value = "quadratic")]
    pub convention: commands::Law,
    /// Divergence the rule-of-thumb value is compared against, rad (FWHM).
    /// Defaults to the collimated hardware minimum.
    #[arg(long, value_name = "RAD")]
    pub reference: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmulateArgs {
    /// Command script; `-` reads stdin.
    pub script: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Sample CSV files. The kind of each is detected from its header.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Treat every file as this kind instead of detecting it.
    #[arg(long, value_name = "KIND")]
    pub kind: Option<String>,
    /// Measurement date recorded in the table's provenance.
    #[arg(long, value_name = "DATE")]
    pub measured_on: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Also write the per-tick CSV here (defaults to output.csv in the config).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Also write the summary JSON here (defaults to output.json in the config).
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e
                .render()
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect::<Vec<_>>()
                .join(" ");
            let key = match e.get(ContextKind::InvalidArg) {
                Some(ContextValue::String(s)) => Some(s.clone()),
                Some(ContextValue::Strings(v)) => Some(v.join(", ")),
                _ => None,
            };
            ErrorRecord::usage(message.trim_start_matches("error: ").to_owned(), key).print();
            return ExitCode::from(output::EXIT_CONFIG);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = ErrorRecord::from_error(&err);
            record.print();
            ExitCode::from(record.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_command_documents_units() {
        let mut cmd = Cli::command();
        for sub in cmd.get_subcommands_mut() {
            let help = sub.render_long_help().to_string();
            assert!(help.contains("FWHM"), "{}", sub.get_name());
            assert!(help.contains("rad"), "{}", sub.get_name());
            assert!(help.contains("dB"), "{}", sub.get_name());
        }
    }
}
