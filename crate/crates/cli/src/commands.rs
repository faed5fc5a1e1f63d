use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use beamdiv::actuator::script::{parse_script, run_script, write_trace_csv, TraceRow};
use beamdiv::actuator::Emulator;
use beamdiv::calibration::{calibrate, read_samples, CalibrationTable, SampleKind};
use beamdiv::config::RunConfig;
use beamdiv::link_budget::{calibrate_sensitivity, received_power_dbm, BudgetReport, DESIGN_ANCHOR};
use beamdiv::pointing::{gain_improvement_db, optimal_divergence, pointing_loss_db, rule_of_thumb_divergence, GainConvention};
use beamdiv::sim::{run_pass, write_steps_csv, write_summary_json, Summary};
use beamdiv::{Error, Result};
use serde::Serialize;

use crate::output::{angle, emit, json_bytes, key_value_csv, line, rate, Format};
use crate::{BudgetArgs, CalibrateArgs, Cli, Command, EmulateArgs, OptimizeArgs, SimulateArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Law {
    Quadratic,
    Linear,
}

impl From<Law> for GainConvention {
    fn from(law: Law) -> Self {
        match law {
            Law::Quadratic => GainConvention::Quadratic,
            Law::Linear => GainConvention::Linear,
        }
    }
}

struct Context {
    config: RunConfig,
    seed: u64,
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        config,
    };
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Budget(args) => budget(&ctx, args, cli.format.unwrap_or(Format::Table), out),
        Command::Optimize(args) => optimize(&ctx, args, cli.format.unwrap_or(Format::Table), out),
        Command::Emulate(args) => emulate(&ctx, args, cli.format.unwrap_or(Format::Csv), out),
        Command::Calibrate(args) => calibrate_cmd(args, cli.format.unwrap_or(Format::Json), out),
        Command::Simulate(args) => simulate(&ctx, args, cli.format.unwrap_or(Format::Csv), out),
    }
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

/// Serializes a report as JSON or key,value CSV, or renders `table`.
fn emit_report<T: Serialize>(value: &T, format: Format, out: Option<&Path>, table: impl FnOnce() -> String) -> Result<()> {
    let bytes = match format {
        Format::Json => json_bytes(value)?,
        Format::Csv => key_value_csv(value)?,
        Format::Table => table().into_bytes(),
    };
    emit(out, &bytes)
}

#[derive(Debug, Serialize)]
struct BudgetOutput {
    #[serde(flatten)]
    report: BudgetReport,
    tx_divergence_fwhm_rad: f64,
    sigma_rad: f64,
    margin_floor_db: f64,
    /// Highest rate keeping the margin floor; absent when no rate does.
    max_rate_bps: Option<f64>,
    sensitivity_calibrated: bool,
}

fn budget(ctx: &Context, args: &BudgetArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let link = &ctx.config.link;
    let theta = link.tx_divergence.fwhm_value();
    let loss = pointing_loss_db(args.sigma, theta)?;
    let (sens, calibrated) = match link.sensitivity {
        Some(s) => (s, false),
        None => (calibrate_sensitivity(link, DESIGN_ANCHOR)?, true),
    };
    let floor = ctx.config.policy.margin_floor_db;
    let report = received_power_dbm(link, args.distance, loss)?;
    let max_rate = match sens.max_rate(report.received_power_dbm, floor) {
        Ok(r) => Some(r),
        Err(Error::LinkClosed) => None,
        Err(e) => return Err(e),
    };
    let report = match args.rate.or(max_rate) {
        Some(r) => report.at_rate(&sens, r)?,
        None => report,
    };
    let output = BudgetOutput {
        report,
        tx_divergence_fwhm_rad: theta,
        sigma_rad: args.sigma,
        margin_floor_db: floor,
        max_rate_bps: max_rate,
        sensitivity_calibrated: calibrated,
    };
    emit_report(&output, format, out, || {
        let mut s = format!("{}\n", output.report);
        line(&mut s, "tx divergence (FWHM)", angle(theta));
        line(&mut s, "pointing jitter σ", angle(args.sigma));
        match max_rate {
            Some(r) => line(&mut s, &format!("max rate at {floor} dB margin"), rate(r)),
            None => line(&mut s, &format!("max rate at {floor} dB margin"), "link closed"),
        }
        if calibrated {
            s.push_str("sensitivity anchored at 600 km, 10 Gbit/s, 5 dB margin\n");
        }
        s
    })
}

#[derive(Debug, Serialize)]
struct Improvement {
    linear_db: f64,
    quadratic_db: f64,
}

#[derive(Debug, Serialize)]
struct OptimizeOutput {
    sigma_rad: f64,
    convention: GainConvention,
    /// 5σ; absent for zero jitter.
    rule_of_thumb_rad: Option<f64>,
    exact_rad: f64,
    hardware_min_rad: f64,
    hardware_max_rad: f64,
    rule_of_thumb_clamped_rad: f64,
    exact_clamped_rad: f64,
    reference_rad: f64,
    /// Gain from narrowing the rule-of-thumb divergence to the reference.
    gain_improvement: Option<Improvement>,
    warnings: Vec<String>,
}

fn optimize(ctx: &Context, args: &OptimizeArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let sigma = match (args.sigma, args.sigma_deg) {
        (Some(s), _) => s,
        (None, Some(d)) => d.to_radians(),
        (None, None) => return Err(Error::invalid("sigma", "give --sigma or --sigma-deg")),
    };
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be finite and non-negative"));
    }
    let map = &ctx.config.map;
    let (lo, hi) = (map.collimated_divergence, map.common_max());
    let convention = GainConvention::from(args.convention);
    let reference = args.reference.unwrap_or(lo);
    let mut warnings = Vec::new();
    let rule = match rule_of_thumb_divergence(sigma) {
        Ok(r) => Some(r),
        Err(Error::ZeroJitter) => {
            warnings.push("zero pointing jitter: the narrowest hardware divergence is optimal".to_owned());
            None
        }
        Err(e) => return Err(e),
    };
    let exact = optimal_divergence(sigma, convention);
    let clamp = |t: f64| t.clamp(lo, hi);
    let gain_improvement = match rule {
        Some(r) => Some(Improvement {
            linear_db: gain_improvement_db(r, reference, GainConvention::Linear)?,
            quadratic_db: gain_improvement_db(r, reference, GainConvention::Quadratic)?,
        }),
        None => None,
    };
    for (name, t) in [("rule-of-thumb", rule.unwrap_or(lo)), ("exact", exact)] {
        if t < lo || t > hi {
            warnings.push(format!("{name} divergence {} is outside the hardware range, clamped", angle(t)));
        }
    }
    for w in &warnings {
        warn(w);
    }
    let output = OptimizeOutput {
        sigma_rad: sigma,
        convention,
        rule_of_thumb_rad: rule,
        exact_rad: exact,
        hardware_min_rad: lo,
        hardware_max_rad: hi,
        rule_of_thumb_clamped_rad: clamp(rule.unwrap_or(lo)),
        exact_clamped_rad: clamp(exact),
        reference_rad: reference,
        gain_improvement,
        warnings,
    };
    emit_report(&output, format, out, || {
        let mut s = String::new();
        line(&mut s, "pointing jitter σ", angle(sigma));
        line(&mut s, "rule of thumb 5σ", rule.map_or("n/a".to_owned(), angle));
        line(&mut s, &format!("exact optimum ({:?})", args.convention).to_lowercase(), angle(exact));
        line(&mut s, "hardware range", format!("{} .. {}", angle(lo), angle(hi)));
        line(&mut s, "rule of thumb, clamped", angle(output.rule_of_thumb_clamped_rad));
        line(&mut s, "exact, clamped", angle(output.exact_clamped_rad));
        if let Some(g) = &output.gain_improvement {
            line(&mut s, &format!("gain 5σ → {}", angle(reference)), format!("{:.2} dB linear, {:.2} dB quadratic", g.linear_db, g.quadratic_db));
        }
        s
    })
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        File::open(path)?.read_to_string(&mut text)?;
    }
    Ok(text)
}

fn trace_table(rows: &[TraceRow]) -> String {
    let mut s = format!(
        "{:>9} {:>11} {:>9} {:>13} {:>13}  {}\n",
        "t [s]", "lens [mm]", "T [°C]", "set [µrad]", "actual [µrad]", "record"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>9.4} {:>11.5} {:>9.2} {:>13.3} {:>13.3}  {}\n",
            r.time_s,
            r.lens_position_m * 1e3,
            r.temperature_c,
            r.theta_set_fwhm_rad * 1e6,
            r.theta_actual_fwhm_rad * 1e6,
            r.record
        ));
    }
    s
}

fn emulate(ctx: &Context, args: &EmulateArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let records = parse_script(&read_input(&args.script)?)?;
    let mut emu = Emulator::new(ctx.config.emulator_config(), ctx.seed)?;
    let rows = run_script(&mut emu, &records)?;
    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_trace_csv(&rows, &mut buf)?;
            buf
        }
        Format::Json => json_bytes(&rows)?,
        Format::Table => trace_table(&rows).into_bytes(),
    };
    emit(out, &bytes)
}

fn calibration_table(table: &CalibrationTable) -> String {
    let mut s = String::new();
    for p in &table.profiles {
        let at = p.lens_position.map_or(String::new(), |x| format!(" at {:.4} mm", x * 1e3));
        line(&mut s, &format!("profile{at}"), format!("{} (FWHM), R² {:.6}", angle(p.theta_fwhm), p.fit.r_squared));
    }
    if let Some(m) = &table.position_map {
        line(&mut s, "collimated divergence", angle(m.map.collimated_divergence));
        line(&mut s, "diverging slope", format!("{:.6} mrad/mm, R² {:.6}", m.diverging.slope, m.diverging.r_squared));
        line(&mut s, "converging slope", format!("{:.6} mrad/mm, R² {:.6}", m.converging.slope, m.converging.r_squared));
        line(&mut s, "max travel", format!("{:.4} mm", m.map.max_travel * 1e3));
        line(&mut s, "R² gate", format!("{} ({})", m.r_squared_gate, if m.passed { "pass" } else { "FAIL" }));
    }
    if let Some(t) = &table.thermal {
        line(&mut s, "thermal fit residual rms", angle(t.residual_rms));
    }
    if let Some(c) = &table.chromatic {
        line(&mut s, "chromatic fit residual rms", angle(c.residual_rms));
    }
    s
}

fn calibrate_cmd(args: &CalibrateArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let kind = args.kind.as_deref().map(str::parse::<SampleKind>).transpose()?;
    let mut sets = Vec::with_capacity(args.files.len());
    for path in &args.files {
        let set = read_samples(File::open(path)?, kind)?;
        sets.push((path.display().to_string(), set));
    }
    let mut table = calibrate(&sets)?;
    table.provenance.measured_on = args.measured_on.clone();
    if !table.gates_passed() {
        warn("calibration gate failed: position-map R² below the gate");
    }
    emit_report(&table, format, out, || calibration_table(&table))
}

fn summary_table(s: &Summary) -> String {
    let mut t = String::new();
    line(&mut t, "seed", s.seed);
    line(&mut t, "strategy", format!("{:?}", s.strategy));
    line(&mut t, "ticks", s.ticks);
    line(&mut t, "pass duration", format!("{:.1} s", s.pass_duration));
    line(&mut t, "slant range", format!("{:.1} .. {:.1} km", s.min_slant_range / 1e3, s.max_slant_range / 1e3));
    line(&mut t, "delivered", format!("{:.4} Tbit", s.total_bits / 1e12));
    line(&mut t, "mean rate", rate(s.mean_rate));
    line(&mut t, "time at margin floor", format!("{:.2} %", 100.0 * s.fraction_margin_ok));
    line(&mut t, "divergence lag mean / max", format!("{} / {}", angle(s.lag_mean), angle(s.lag_max)));
    t
}

fn simulate(ctx: &Context, args: &SimulateArgs, format: Format, out: Option<&Path>) -> Result<()> {
    let run = run_pass(&ctx.config.scenario(), ctx.seed)?;
    let mut csv = Vec::new();
    write_steps_csv(&run.steps, &mut csv)?;
    let mut json = Vec::new();
    write_summary_json(&run.summary, &mut json)?;
    let output = &ctx.config.output;
    if let Some(p) = args.csv.as_deref().or(output.csv.as_deref()) {
        std::fs::write(p, &csv)?;
    }
    if let Some(p) = args.summary.as_deref().or(output.json.as_deref()) {
        std::fs::write(p, &json)?;
    }
    match format {
        Format::Csv => emit(out, &csv),
        Format::Json => emit(out, &json),
        Format::Table => emit(out, summary_table(&run.summary).as_bytes()),
    }
}
