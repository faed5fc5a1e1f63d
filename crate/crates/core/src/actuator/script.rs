//! Newline-delimited command scripts for driving the emulator.
//!
//! ```text
//! # comment
//! set-divergence 5 mrad [diverging|converging]
//! set-divergence-lut 90 urad [diverging|converging]
//! set-temperature -30
//! set-wavelength 1530 nm
//! steer 20 urad -15 urad
//! step 0.9 s
//! settle
//! query
//! ```
//!
//! Several commands may share a line, separated by `;`.
//!
//! Bare numbers are SI (radians, meters, seconds, °C). Every record appends
//! one row to the state trace.

use std::io::Write;

use serde::Serialize;

use super::emulator::Emulator;
use super::map::Branch;
use crate::beam_optics::DivergenceAngle;
use crate::error::{Error, Result};

/// Tick used by `settle`, seconds.
pub const SETTLE_TICK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetDivergence { theta: f64, branch: Branch, corrected: bool },
    SetTemperature(f64),
    SetWavelength(f64),
    Steer(f64, f64),
    Step(f64),
    Settle,
    Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: usize,
    pub text: String,
    pub command: Command,
}

#[derive(Clone, Copy)]
enum Quantity {
    Angle,
    Length,
    Time,
    Temperature,
}

/// Units per SI unit. Dividing (rather than multiplying by 1e-6) keeps
/// `90 urad` equal to the literal `90e-6`.
fn units_per_si(q: Quantity, unit: &str) -> Option<f64> {
    match (q, unit) {
        (Quantity::Angle, "rad") => Some(1.0),
        (Quantity::Angle, "mrad") => Some(1e3),
        (Quantity::Angle, "urad" | "µrad") => Some(1e6),
        (Quantity::Length, "m") => Some(1.0),
        (Quantity::Length, "mm") => Some(1e3),
        (Quantity::Length, "um" | "µm") => Some(1e6),
        (Quantity::Length, "nm") => Some(1e9),
        (Quantity::Time, "s") => Some(1.0),
        (Quantity::Time, "ms") => Some(1e3),
        (Quantity::Temperature, "c" | "C" | "degC" | "°C") => Some(1.0),
        _ => None,
    }
}

struct Tokens<'a> {
    line: usize,
    items: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Script {
            line: self.line,
            message: message.into(),
        }
    }

    fn quantity(&mut self, q: Quantity) -> Result<f64> {
        let raw = self.items.get(self.pos).ok_or_else(|| self.err("missing value"))?;
        let value: f64 = raw.parse().map_err(|_| self.err(format!("`{raw}` is not a number")))?;
        self.pos += 1;
        if let Some(unit) = self.items.get(self.pos) {
            if let Some(per) = units_per_si(q, unit) {
                self.pos += 1;
                return Ok(value / per);
            }
        }
        Ok(value)
    }

    fn branch(&mut self) -> Result<Branch> {
        match self.items.get(self.pos) {
            None => Ok(Branch::default()),
            Some(word) => {
                self.pos += 1;
                word.parse().map_err(|e: Error| self.err(e.to_string()))
            }
        }
    }

    fn finish(&self) -> Result<()> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some(extra) => Err(self.err(format!("unexpected `{extra}`"))),
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let statements = text.lines().enumerate().flat_map(|(i, raw)| {
        let code = raw.split('#').next().unwrap_or("");
        code.split(';').map(move |s| (i, s.trim()))
    });
    for (i, body) in statements {
        if body.is_empty() {
            continue;
        }
        let mut items = body.split_whitespace();
        let verb = items.next().expect("non-empty line");
        let mut t = Tokens {
            line: i + 1,
            items: items.collect(),
            pos: 0,
        };
        let command = match verb {
            "set-divergence" | "set-divergence-lut" => Command::SetDivergence {
                theta: t.quantity(Quantity::Angle)?,
                branch: t.branch()?,
                corrected: verb == "set-divergence-lut",
            },
            "set-temperature" => Command::SetTemperature(t.quantity(Quantity::Temperature)?),
            "set-wavelength" => Command::SetWavelength(t.quantity(Quantity::Length)?),
            "steer" => Command::Steer(t.quantity(Quantity::Angle)?, t.quantity(Quantity::Angle)?),
            "step" => Command::Step(t.quantity(Quantity::Time)?),
            "settle" => Command::Settle,
            "query" => Command::Query,
            other => return Err(t.err(format!("unknown command `{other}`"))),
        };
        t.finish()?;
        out.push(Record {
            line: i + 1,
            text: body.to_string(),
            command,
        });
    }
    Ok(out)
}

/// One row of the emulator state trace. Angles in radians, lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub time_s: f64,
    pub record: String,
    pub lens_position_m: f64,
    pub target_position_m: f64,
    pub in_motion: bool,
    pub temperature_c: f64,
    pub wavelength_m: f64,
    pub tip_rad: f64,
    pub tilt_rad: f64,
    pub theta_set_fwhm_rad: f64,
    pub theta_actual_fwhm_rad: f64,
}

fn snapshot(emu: &Emulator, record: &str) -> Result<TraceRow> {
    let s = emu.state();
    Ok(TraceRow {
        time_s: s.time,
        record: record.to_string(),
        lens_position_m: s.lens_position,
        target_position_m: s.target_position,
        in_motion: s.in_motion,
        temperature_c: s.temperature,
        wavelength_m: s.wavelength,
        tip_rad: s.steering.0,
        tilt_rad: s.steering.1,
        theta_set_fwhm_rad: emu.set_divergence()?.value(),
        theta_actual_fwhm_rad: emu.actual_divergence()?.value(),
    })
}

fn apply(emu: &mut Emulator, command: &Command) -> Result<()> {
    match *command {
        Command::SetDivergence { theta, branch, corrected } => {
            let theta = DivergenceAngle::fwhm(theta)?;
            if corrected {
                emu.command_corrected(theta, branch)?;
            } else {
                emu.command_divergence(theta, branch)?;
            }
        }
        Command::SetTemperature(t) => emu.set_temperature(t)?,
        Command::SetWavelength(l) => emu.set_wavelength(l)?,
        Command::Steer(tip, tilt) => emu.steer(tip, tilt)?,
        Command::Step(dt) => emu.step(dt)?,
        Command::Settle => {
            emu.settle(SETTLE_TICK)?;
        }
        Command::Query => {}
    }
    Ok(())
}

/// Runs `records` against `emu`. The first row is the initial state.
pub fn run_script(emu: &mut Emulator, records: &[Record]) -> Result<Vec<TraceRow>> {
    let mut rows = vec![snapshot(emu, "initial")?];
    for r in records {
        apply(emu, &r.command).map_err(|e| Error::Script {
            line: r.line,
            message: e.to_string(),
        })?;
        rows.push(snapshot(emu, &r.text)?);
    }
    Ok(rows)
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::EmulatorConfig;

    fn emu() -> Emulator {
        Emulator::new(EmulatorConfig::default(), 7).unwrap()
    }

    #[test]
    fn parses_units_and_comments() {
        let recs = parse_script(
            "# header\nset-divergence 5 mrad converging\nstep 900 ms # go\nset-wavelength 1530 nm\nsteer 20 urad -15 urad\n\nquery\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 5);
        assert_eq!(
            recs[0].command,
            Command::SetDivergence {
                theta: 5e-3,
                branch: Branch::Converging,
                corrected: false
            }
        );
        assert_eq!(recs[1].command, Command::Step(0.9));
        assert_eq!(recs[1].line, 3);
        assert!(matches!(recs[2].command, Command::SetWavelength(l) if (l - 1530e-9).abs() < 1e-20));
        assert!(matches!(recs[3].command, Command::Steer(a, b) if (a - 20e-6).abs() < 1e-18 && (b + 15e-6).abs() < 1e-18));
    }

    #[test]
    fn unit_suffix_matches_the_literal() {
        let r = parse_script("set-divergence-lut 90 urad\nstep 900 ms\nset-wavelength 1550 nm").unwrap();
        assert!(matches!(r[0].command, Command::SetDivergence { theta, .. } if theta == 90e-6));
        assert_eq!(r[1].command, Command::Step(0.9));
        assert!(matches!(r[2].command, Command::SetWavelength(l) if l == 1550e-9));
    }

    #[test]
    fn semicolons_separate_commands() {
        let r = parse_script("set-divergence 5 mrad; step 0.9 s # go\nquery").unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1].line, 1);
        assert_eq!(r[1].text, "step 0.9 s");
        assert_eq!(r[2].line, 2);
    }

    #[test]
    fn parse_errors_name_the_line() {
        match parse_script("query\nfly 3\n") {
            Err(Error::Script { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_script("step\n").is_err());
        assert!(parse_script("step 1 s extra\n").is_err());
        assert!(parse_script("set-divergence 1 mrad sideways\n").is_err());
    }

    #[test]
    fn empty_script_is_initial_state_only() {
        let rows = run_script(&mut emu(), &parse_script("").unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].record, "initial");
        assert_eq!(rows[0].theta_actual_fwhm_rad, 90e-6);
    }

    #[test]
    fn full_move_in_0_9_s() {
        let recs = parse_script("set-divergence 5 mrad\nstep 0.9 s\n").unwrap();
        let rows = run_script(&mut emu(), &recs).unwrap();
        let last = rows.last().unwrap();
        assert!(!last.in_motion);
        assert_eq!(last.lens_position_m, last.target_position_m);
        assert!((last.theta_set_fwhm_rad - 5e-3).abs() < 1e-6 * 1.73);
    }

    #[test]
    fn cold_query() {
        let recs = parse_script("set-temperature -30\nquery\n").unwrap();
        let rows = run_script(&mut emu(), &recs).unwrap();
        assert!((rows[2].theta_actual_fwhm_rad - 675e-6).abs() < 1e-12);
    }

    #[test]
    fn runtime_errors_name_the_line() {
        let recs = parse_script("query\nset-temperature 90\n").unwrap();
        match run_script(&mut emu(), &recs) {
            Err(Error::Script { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_header() {
        let rows = run_script(&mut emu(), &[]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,record,lens_position_m,"));
    }
}
