//! Reduction of bench measurements into a calibration table.
//!
//! Spot diameters are 1/e² throughout; a profile fit's slope is therefore the
//! 1/e² full-angle divergence, converted to FWHM only where a fit feeds the
//! position map.

pub mod regression;
pub mod synth;

use std::collections::BTreeMap;
use std::io::Read;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::actuator::{ChromaticModel, DivergenceMap, EdgeOffsets, SideSlopes, ThermalModel};
use crate::beam_optics::{fwhm_per_full_1e2, GaussianBeam};
use crate::error::{require_positive, Error, Result};
pub use regression::{fit_line, fit_through_origin, least_squares, r_squared, RegressionResult};

/// Smallest spot diameter the beam profiler resolves, meters.
pub const PROFILER_RESOLUTION: f64 = 800e-6;
/// R² a position-map branch must reach.
pub const R_SQUARED_GATE: f64 = 0.9999;
/// Divergence setting accuracy, percent.
pub const DIVERGENCE_ACCURACY_PCT: f64 = 1.0;
/// Deviations up to this multiple of the gate are reported as marginal.
pub const MARGINAL_FACTOR: f64 = 1.1;
/// Effective focal length relating a fiber NA error to the collimated beam
/// size: a 2.62° NA difference moved the beam diameter by 3.5 mm.
pub const NA_FOCAL_LENGTH: f64 = 3.5e-3 / (2.62 * std::f64::consts::PI / 180.0);

/// One beam-profiler reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilerSample {
    /// Lens position the reading was taken at, when the campaign sweeps it.
    #[serde(rename = "lens_position_m", default, skip_serializing_if = "Option::is_none")]
    pub lens_position: Option<f64>,
    /// Distance from the prototype, meters.
    #[serde(rename = "distance_m")]
    pub distance: f64,
    /// 1/e² spot diameter, meters.
    #[serde(rename = "spot_diameter_m")]
    pub spot_diameter_1e2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u32>,
}

impl ProfilerSample {
    pub fn validate(&self) -> Result<()> {
        require_positive("distance", self.distance)?;
        if !(self.spot_diameter_1e2.is_finite() && self.spot_diameter_1e2 >= PROFILER_RESOLUTION) {
            return Err(Error::OutOfRange {
                name: "spot_diameter",
                value: self.spot_diameter_1e2,
                min: PROFILER_RESOLUTION,
                max: f64::INFINITY,
            });
        }
        if let Some(x) = self.lens_position {
            if !x.is_finite() {
                return Err(Error::invalid("lens_position", "must be finite"));
            }
        }
        Ok(())
    }
}

/// A measured (lens position, FWHM divergence) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionSample {
    #[serde(rename = "lens_position_m")]
    pub lens_position: f64,
    #[serde(rename = "theta_rad")]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalObservation {
    /// FWHM set divergence, radians.
    #[serde(rename = "theta_set_rad")]
    pub theta_set: f64,
    /// °C.
    #[serde(rename = "temp_c")]
    pub temperature: f64,
    /// FWHM measured divergence, radians.
    #[serde(rename = "theta_meas_rad")]
    pub theta_measured: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaticObservation {
    #[serde(rename = "theta_set_rad")]
    pub theta_set: f64,
    #[serde(rename = "wavelength_m")]
    pub wavelength: f64,
    #[serde(rename = "theta_meas_rad")]
    pub theta_measured: f64,
}

/// Groups `items` by an f64 key, in ascending key order.
fn group_by<T: Copy>(items: &[T], key: impl Fn(&T) -> f64) -> Vec<(f64, Vec<T>)> {
    let mut sorted: Vec<T> = items.to_vec();
    sorted.sort_by(|a, b| key(a).total_cmp(&key(b)));
    let mut groups: Vec<(f64, Vec<T>)> = Vec::new();
    for item in sorted {
        let k = key(&item);
        match groups.last_mut() {
            Some((gk, g)) if gk.total_cmp(&k).is_eq() => g.push(item),
            _ => groups.push((k, vec![item])),
        }
    }
    groups
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|r| r * r).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Least-squares line of spot diameter against distance. Replicates at a
/// distance are averaged before fitting; the slope is the 1/e² full-angle
/// divergence.
pub fn fit_divergence(samples: &[ProfilerSample]) -> Result<RegressionResult> {
    for s in samples {
        s.validate()?;
    }
    let groups = group_by(samples, |s| s.distance);
    if groups.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "divergence fit needs at least 3 distinct distances, got {}",
            groups.len()
        )));
    }
    let xs: Vec<f64> = groups.iter().map(|(d, _)| *d).collect();
    let ys: Vec<f64> = groups
        .iter()
        .map(|(_, g)| {
            let mut d: Vec<f64> = g.iter().map(|s| s.spot_diameter_1e2).collect();
            d.sort_by(f64::total_cmp);
            mean(&d)
        })
        .collect();
    fit_line(&xs, &ys)
}

/// Divergence fit of the readings taken at one lens position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lens_position: Option<f64>,
    pub samples: usize,
    pub fit: RegressionResult,
    /// FWHM divergence implied by the fitted slope, radians.
    pub theta_fwhm: f64,
}

/// Splits readings by lens position and fits each group.
pub fn fit_profiles(samples: &[ProfilerSample]) -> Result<Vec<ProfileFit>> {
    let key = |s: &ProfilerSample| s.lens_position.unwrap_or(f64::NAN);
    if samples.iter().any(|s| s.lens_position.is_some()) && samples.iter().any(|s| s.lens_position.is_none()) {
        return Err(Error::invalid("profiler samples", "lens_position must be given for all rows or none"));
    }
    group_by(samples, key)
        .into_iter()
        .map(|(_, group)| {
            let fit = fit_divergence(&group)?;
            Ok(ProfileFit {
                lens_position: group[0].lens_position,
                samples: group.len(),
                theta_fwhm: fit.slope * fwhm_per_full_1e2(),
                fit,
            })
        })
        .collect()
}

/// A fitted position map with its per-branch goodness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionMapFit {
    pub map: DivergenceMap,
    /// Slope in rad/m, intercept in radians; R² over the diverging points
    /// and the collimated point(s).
    pub diverging: RegressionResult,
    pub converging: RegressionResult,
    pub r_squared_gate: f64,
    pub passed: bool,
}

/// Fits the V-shaped position map: one shared collimated intercept and a
/// slope per branch, solved jointly. The travel limit is the largest
/// |position| in the data.
pub fn build_position_map(pairs: &[PositionSample]) -> Result<PositionMapFit> {
    if pairs.iter().any(|p| !p.lens_position.is_finite() || !p.theta.is_finite()) {
        return Err(Error::invalid("position samples", "all values must be finite"));
    }
    let count = |pred: fn(f64) -> bool| {
        let mut xs: Vec<f64> = pairs.iter().map(|p| p.lens_position).filter(|&x| pred(x)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    let (n_div, n_conv, n_zero) = (count(|x| x > 0.0), count(|x| x < 0.0), count(|x| x == 0.0));
    if n_div < 2 || n_conv < 2 || n_zero < 1 {
        return Err(Error::InsufficientData(format!(
            "position map needs 2 positions per branch plus the collimated point; \
             got {n_div} diverging, {n_conv} converging, {n_zero} collimated"
        )));
    }
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| vec![1.0, p.lens_position.max(0.0), (-p.lens_position).max(0.0)])
        .collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.theta).collect();
    let beta = least_squares(&rows, &ys)?;
    let (c, s_div, s_conv) = (beta[0], beta[1], beta[2]);

    let branch = |on_branch: fn(f64) -> bool, slope: f64| {
        let pts: Vec<&PositionSample> = pairs.iter().filter(|p| on_branch(p.lens_position)).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.theta).collect();
        let residuals: Vec<f64> = pts.iter().map(|p| p.theta - (c + slope * p.lens_position.abs())).collect();
        RegressionResult {
            slope,
            intercept: c,
            r_squared: r_squared(&y, &residuals),
            residuals,
        }
    };
    let diverging = branch(|x| x >= 0.0, s_div);
    let converging = branch(|x| x <= 0.0, s_conv);
    let max_travel = pairs.iter().map(|p| p.lens_position.abs()).fold(0.0, f64::max);
    let map = DivergenceMap {
        collimated_divergence: c,
        diverging_slope: s_div,
        converging_slope: s_conv,
        max_travel,
    };
    map.validate()?;
    let passed = diverging.r_squared >= R_SQUARED_GATE && converging.r_squared >= R_SQUARED_GATE;
    Ok(PositionMapFit {
        map,
        diverging,
        converging,
        r_squared_gate: R_SQUARED_GATE,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Outside the gate by less than [`MARGINAL_FACTOR`].
    MarginalFail,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDivergenceEstimate {
    pub count: usize,
    pub mean: f64,
    pub nominal: f64,
    /// |mean − nominal| / nominal, percent.
    pub deviation_pct: f64,
    pub gate_pct: f64,
    pub verdict: Verdict,
}

/// Averages repeated minimum-divergence measurements and grades them against
/// the setting-accuracy gate.
pub fn estimate_min_divergence(measurements: &[f64], nominal: f64, gate_pct: f64) -> Result<MinDivergenceEstimate> {
    require_positive("nominal", nominal)?;
    require_positive("gate_pct", gate_pct)?;
    if measurements.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 measurements, got {}",
            measurements.len()
        )));
    }
    if measurements.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("measurements", "all values must be finite"));
    }
    let m = mean(measurements);
    let deviation_pct = ((m - nominal) / nominal).abs() * 100.0;
    let verdict = if deviation_pct <= gate_pct {
        Verdict::Pass
    } else if deviation_pct <= gate_pct * MARGINAL_FACTOR {
        Verdict::MarginalFail
    } else {
        Verdict::Fail
    };
    Ok(MinDivergenceEstimate {
        count: measurements.len(),
        mean: m,
        nominal,
        deviation_pct,
        gate_pct,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaMismatch {
    /// Shrink of the collimated 1/e² beam diameter, meters. Negative when the
    /// beam grows.
    pub diameter_reduction: f64,
    pub new_diameter: f64,
    pub nominal_fwhm: f64,
    pub new_fwhm: f64,
    /// new − nominal FWHM, radians.
    pub divergence_change: f64,
}

/// Effect of a fiber NA error on the collimated beam. A larger real NA
/// (positive `delta_na_deg`) gives a smaller beam and a wider divergence.
pub fn na_mismatch_effect(delta_na_deg: f64, f_eff: f64, nominal_beam: &GaussianBeam, nominal_fwhm: f64) -> Result<NaMismatch> {
    require_positive("f_eff", f_eff)?;
    require_positive("nominal_fwhm", nominal_fwhm)?;
    if !delta_na_deg.is_finite() {
        return Err(Error::invalid("delta_na_deg", "must be finite"));
    }
    let reduction = f_eff * delta_na_deg.to_radians();
    let d0 = nominal_beam.waist_diameter_1e2;
    let new_diameter = d0 - reduction;
    if new_diameter <= 0.0 {
        return Err(Error::OutOfRange {
            name: "new beam diameter",
            value: new_diameter,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let new_fwhm = nominal_fwhm * d0 / new_diameter;
    Ok(NaMismatch {
        diameter_reduction: reduction,
        new_diameter,
        nominal_fwhm,
        new_fwhm,
        divergence_change: new_fwhm - nominal_fwhm,
    })
}

/// Sorted distinct set divergences; exactly two are required.
fn two_anchors(values: impl Iterator<Item = f64>) -> Result<(f64, f64)> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    match v[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::InsufficientData(format!(
            "observations must cover exactly 2 set divergences, got {}",
            v.len()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFit {
    pub model: ThermalModel,
    pub samples: usize,
    /// RMS of measured minus modelled divergence, radians.
    pub residual_rms: f64,
    pub max_abs_residual: f64,
    pub residuals: Vec<f64>,
}

/// Per-anchor, per-side slopes of divergence deviation against |T − T_ref|,
/// each a least-squares line through the origin.
pub fn build_thermal_model(observations: &[ThermalObservation], reference_temperature: f64) -> Result<ThermalFit> {
    if observations
        .iter()
        .any(|o| !(o.theta_set.is_finite() && o.temperature.is_finite() && o.theta_measured.is_finite()))
    {
        return Err(Error::invalid("thermal observations", "all values must be finite"));
    }
    let (lo, hi) = two_anchors(observations.iter().map(|o| o.theta_set))?;
    let side_slope = |anchor: f64, cold: bool| -> Result<f64> {
        let pts: Vec<&ThermalObservation> = observations
            .iter()
            .filter(|o| o.theta_set == anchor)
            .filter(|o| if cold { o.temperature < reference_temperature } else { o.temperature > reference_temperature })
            .collect();
        let mut temps: Vec<f64> = pts.iter().map(|o| o.temperature).collect();
        temps.sort_by(f64::total_cmp);
        temps.dedup();
        if temps.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{} side of {} °C at set divergence {anchor:e} rad has {} temperature(s), need 2",
                if cold { "cold" } else { "hot" },
                reference_temperature,
                temps.len()
            )));
        }
        let xs: Vec<f64> = pts.iter().map(|o| (o.temperature - reference_temperature).abs()).collect();
        let ys: Vec<f64> = pts.iter().map(|o| o.theta_measured - o.theta_set).collect();
        fit_through_origin(&xs, &ys)
    };
    let temps = observations.iter().map(|o| o.temperature);
    let model = ThermalModel {
        reference_temperature,
        collimated_anchor: lo,
        wide_anchor: hi,
        collimated: SideSlopes {
            cold: side_slope(lo, true)?,
            hot: side_slope(lo, false)?,
        },
        wide: SideSlopes {
            cold: side_slope(hi, true)?,
            hot: side_slope(hi, false)?,
        },
        min_temperature: temps.clone().fold(reference_temperature, f64::min),
        max_temperature: temps.fold(reference_temperature, f64::max),
    };
    model.validate()?;
    let residuals: Vec<f64> = observations
        .iter()
        .map(|o| o.theta_measured - (o.theta_set + model.deviation(o.theta_set, o.temperature)))
        .collect();
    Ok(ThermalFit {
        model,
        samples: observations.len(),
        residual_rms: rms(&residuals),
        max_abs_residual: residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromaticFit {
    pub model: ChromaticModel,
    pub samples: usize,
    pub residual_rms: f64,
    pub residuals: Vec<f64>,
}

/// Edge offsets from observations at three wavelengths and two divergences.
/// The middle wavelength is the reference; offsets are averaged per cell and
/// taken relative to the reference cell.
pub fn build_chromatic_model(observations: &[ChromaticObservation]) -> Result<ChromaticFit> {
    if observations
        .iter()
        .any(|o| !(o.theta_set.is_finite() && o.wavelength.is_finite() && o.theta_measured.is_finite()))
    {
        return Err(Error::invalid("chromatic observations", "all values must be finite"));
    }
    let (lo, hi) = two_anchors(observations.iter().map(|o| o.theta_set))?;
    let mut wl: Vec<f64> = observations.iter().map(|o| o.wavelength).collect();
    wl.sort_by(f64::total_cmp);
    wl.dedup();
    let [short, reference, long] = wl[..] else {
        return Err(Error::InsufficientData(format!(
            "chromatic observations must cover exactly 3 wavelengths, got {}",
            wl.len()
        )));
    };
    let mut cells: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for o in observations {
        cells
            .entry((o.theta_set.to_bits(), o.wavelength.to_bits()))
            .or_default()
            .push(o.theta_measured - o.theta_set);
    }
    let cell = |anchor: f64, lambda: f64| -> Result<f64> {
        cells
            .get(&(anchor.to_bits(), lambda.to_bits()))
            .map(|v| mean(v))
            .ok_or_else(|| {
                Error::InsufficientData(format!("no observation at set divergence {anchor:e} rad, wavelength {lambda:e} m"))
            })
    };
    let edges = |anchor: f64| -> Result<EdgeOffsets> {
        let r = cell(anchor, reference)?;
        Ok(EdgeOffsets {
            short: cell(anchor, short)? - r,
            long: cell(anchor, long)? - r,
        })
    };
    let model = ChromaticModel {
        short_wavelength: short,
        reference_wavelength: reference,
        long_wavelength: long,
        collimated_anchor: lo,
        wide_anchor: hi,
        collimated: edges(lo)?,
        wide: edges(hi)?,
    };
    model.validate()?;
    let residuals: Vec<f64> = observations
        .iter()
        .map(|o| o.theta_measured - (o.theta_set + model.offset(o.theta_set, o.wavelength)))
        .collect();
    Ok(ChromaticFit {
        model,
        samples: observations.len(),
        residual_rms: rms(&residuals),
        residuals,
    })
}

/// Where a fit's samples came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub kind: SampleKind,
    pub source: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub generator: String,
    /// Measurement date supplied by the operator, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_on: Option<String>,
    pub sources: Vec<SourceRecord>,
}

/// All fits of one calibration campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CalibrationTable {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<ProfileFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_map: Option<PositionMapFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chromatic: Option<ChromaticFit>,
    pub provenance: Provenance,
}

impl CalibrationTable {
    /// True unless a gated fit failed its gate.
    pub fn gates_passed(&self) -> bool {
        self.position_map.as_ref().is_none_or(|m| m.passed)
    }
}

/// The kinds of sample file the pipeline ingests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// distance_m, spot_diameter_m[, replicate][, lens_position_m]
    Profiles,
    /// lens_position_m, theta_rad
    Positions,
    /// theta_set_rad, temp_c, theta_meas_rad
    Thermal,
    /// theta_set_rad, wavelength_m, theta_meas_rad
    Chromatic,
}

impl SampleKind {
    pub fn required_columns(self) -> &'static [&'static str] {
        match self {
            SampleKind::Profiles => &["distance_m", "spot_diameter_m"],
            SampleKind::Positions => &["lens_position_m", "theta_rad"],
            SampleKind::Thermal => &["theta_set_rad", "temp_c", "theta_meas_rad"],
            SampleKind::Chromatic => &["theta_set_rad", "wavelength_m", "theta_meas_rad"],
        }
    }

    /// Guesses the kind from a header row by its most specific column.
    pub fn detect(headers: &[&str]) -> Option<Self> {
        let has = |c: &str| headers.contains(&c);
        if has("temp_c") {
            Some(SampleKind::Thermal)
        } else if has("wavelength_m") {
            Some(SampleKind::Chromatic)
        } else if has("distance_m") || has("spot_diameter_m") {
            Some(SampleKind::Profiles)
        } else if has("theta_rad") {
            Some(SampleKind::Positions)
        } else {
            None
        }
    }
}

impl std::str::FromStr for SampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profiles" => Ok(SampleKind::Profiles),
            "positions" => Ok(SampleKind::Positions),
            "thermal" => Ok(SampleKind::Thermal),
            "chromatic" => Ok(SampleKind::Chromatic),
            other => Err(Error::invalid("sample kind", format!("unknown kind `{other}`"))),
        }
    }
}

/// Samples read from one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSet {
    Profiles(Vec<ProfilerSample>),
    Positions(Vec<PositionSample>),
    Thermal(Vec<ThermalObservation>),
    Chromatic(Vec<ChromaticObservation>),
}

impl SampleSet {
    pub fn kind(&self) -> SampleKind {
        match self {
            SampleSet::Profiles(_) => SampleKind::Profiles,
            SampleSet::Positions(_) => SampleKind::Positions,
            SampleSet::Thermal(_) => SampleKind::Thermal,
            SampleSet::Chromatic(_) => SampleKind::Chromatic,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SampleSet::Profiles(v) => v.len(),
            SampleSet::Positions(v) => v.len(),
            SampleSet::Thermal(v) => v.len(),
            SampleSet::Chromatic(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn deserialize_rows<T: DeserializeOwned, R: Read>(mut reader: csv::Reader<R>) -> Result<Vec<T>> {
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Reads a sample CSV. With `kind = None` the kind is detected from the
/// header; a required column that is absent is reported by name.
pub fn read_samples<R: Read>(input: R, kind: Option<SampleKind>) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();
    let kind = match kind.or_else(|| SampleKind::detect(&names)) {
        Some(k) => k,
        None => {
            return Err(Error::invalid(
                "sample file",
                format!("cannot tell the sample kind from columns [{}]", names.join(", ")),
            ))
        }
    };
    if let Some(missing) = kind.required_columns().iter().find(|c| !names.contains(c)) {
        return Err(Error::MissingColumn((*missing).to_owned()));
    }
    Ok(match kind {
        SampleKind::Profiles => SampleSet::Profiles(deserialize_rows(reader)?),
        SampleKind::Positions => SampleSet::Positions(deserialize_rows(reader)?),
        SampleKind::Thermal => SampleSet::Thermal(deserialize_rows(reader)?),
        SampleKind::Chromatic => SampleSet::Chromatic(deserialize_rows(reader)?),
    })
}

/// Writes rows with a header derived from the record type.
pub fn write_samples<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every applicable fit over the given sample sets.
///
/// Profile readings taken at several lens positions also feed the position
/// map unless explicit position samples are supplied.
pub fn calibrate(sets: &[(String, SampleSet)]) -> Result<CalibrationTable> {
    let mut profiles = Vec::new();
    let mut positions = Vec::new();
    let mut thermal = Vec::new();
    let mut chromatic = Vec::new();
    let mut sources = Vec::new();
    for (source, set) in sets {
        sources.push(SourceRecord {
            kind: set.kind(),
            source: source.clone(),
            samples: set.len(),
        });
        match set {
            SampleSet::Profiles(v) => profiles.extend_from_slice(v),
            SampleSet::Positions(v) => positions.extend_from_slice(v),
            SampleSet::Thermal(v) => thermal.extend_from_slice(v),
            SampleSet::Chromatic(v) => chromatic.extend_from_slice(v),
        }
    }
    if sets.is_empty() {
        return Err(Error::InsufficientData("no sample files given".into()));
    }
    let profile_fits = if profiles.is_empty() { Vec::new() } else { fit_profiles(&profiles)? };
    if positions.is_empty() {
        positions = profile_fits
            .iter()
            .filter_map(|p| {
                p.lens_position.map(|x| PositionSample {
                    lens_position: x,
                    theta: p.theta_fwhm,
                })
            })
            .collect();
    }
    let position_map = if positions.is_empty() { None } else { Some(build_position_map(&positions)?) };
    let thermal = if thermal.is_empty() {
        None
    } else {
        Some(build_thermal_model(&thermal, crate::actuator::REFERENCE_TEMPERATURE)?)
    };
    let chromatic = if chromatic.is_empty() { None } else { Some(build_chromatic_model(&chromatic)?) };
    Ok(CalibrationTable {
        profiles: profile_fits,
        position_map,
        thermal,
        chromatic,
        provenance: Provenance {
            generator: format!("beamdiv {}", env!("CARGO_PKG_VERSION")),
            measured_on: None,
            sources,
        },
    })
}
