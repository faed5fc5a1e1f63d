//! Gaussian-beam and truncated-aperture far-field optics.
//!
//! The far field of a Gaussian field clipped by a circular aperture has no
//! closed form, so it is evaluated with a radial diffraction integral
//!
//! ```text
//! U(θ) = ∫₀ᵃ exp(−r²/w²) · J₀(k·r·sin θ) · r dr
//! ```
//!
//! where `w` is the 1/e² intensity radius and `a` the aperture radius. The
//! normalized intensity is `|U(θ)/U(0)|²`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Design 1/e² beam diameter of the collimated transmit beam.
pub const DESIGN_WAIST_DIAMETER: f64 = 17.8e-3;
/// Clear aperture of the output lens.
pub const DESIGN_APERTURE_DIAMETER: f64 = 20e-3;
/// Operating wavelength the optics are optimized for.
pub const DESIGN_WAVELENGTH: f64 = 1550e-9;

/// C-band limits accepted by [`GaussianBeam::c_band`].
pub const C_BAND: (f64, f64) = (1.50e-6, 1.60e-6);

/// Ratio FWHM / full 1/e² angle of a Gaussian intensity profile.
pub fn fwhm_per_full_1e2() -> f64 {
    (LN_2 / 2.0).sqrt()
}

/// Which width of the far-field intensity profile an angle describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Full width at half maximum intensity.
    Fwhm,
    /// Full angle between the 1/e² intensity points.
    Full1e2,
}

/// A full divergence angle in radians, tagged with its width convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceAngle {
    value: f64,
    convention: Convention,
}

impl DivergenceAngle {
    pub fn new(value: f64, convention: Convention) -> Result<Self> {
        require_positive("divergence angle", value)?;
        Ok(Self { value, convention })
    }

    pub fn fwhm(value: f64) -> Result<Self> {
        Self::new(value, Convention::Fwhm)
    }

    pub fn full_1e2(value: f64) -> Result<Self> {
        Self::new(value, Convention::Full1e2)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Same angle expressed in `target` convention.
    pub fn to(self, target: Convention) -> Self {
        let value = match (self.convention, target) {
            (Convention::Full1e2, Convention::Fwhm) => self.value * fwhm_per_full_1e2(),
            (Convention::Fwhm, Convention::Full1e2) => self.value / fwhm_per_full_1e2(),
            _ => self.value,
        };
        Self {
            value,
            convention: target,
        }
    }

    pub fn fwhm_value(&self) -> f64 {
        self.to(Convention::Fwhm).value
    }

    pub fn full_1e2_value(&self) -> f64 {
        self.to(Convention::Full1e2).value
    }
}

/// Converts `angle` to the `target` convention.
pub fn convert_divergence(angle: DivergenceAngle, target: Convention) -> Result<DivergenceAngle> {
    require_positive("divergence angle", angle.value)?;
    Ok(angle.to(target))
}

/// An ideal TEM00 beam at its waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// 1/e² intensity diameter, meters.
    pub waist_diameter_1e2: f64,
    /// Meters.
    pub wavelength: f64,
}

impl GaussianBeam {
    pub fn new(waist_diameter_1e2: f64, wavelength: f64) -> Result<Self> {
        require_positive("waist diameter", waist_diameter_1e2)?;
        require_positive("wavelength", wavelength)?;
        Ok(Self {
            waist_diameter_1e2,
            wavelength,
        })
    }

    /// Like [`GaussianBeam::new`] but also requires a C-band wavelength.
    pub fn c_band(waist_diameter_1e2: f64, wavelength: f64) -> Result<Self> {
        let beam = Self::new(waist_diameter_1e2, wavelength)?;
        if !(C_BAND.0..=C_BAND.1).contains(&wavelength) {
            return Err(Error::OutOfRange {
                name: "wavelength",
                value: wavelength,
                min: C_BAND.0,
                max: C_BAND.1,
            });
        }
        Ok(beam)
    }

    pub fn design() -> Self {
        Self {
            waist_diameter_1e2: DESIGN_WAIST_DIAMETER,
            wavelength: DESIGN_WAVELENGTH,
        }
    }

    /// 1/e² intensity radius (equal to the 1/e field radius).
    pub fn radius(&self) -> f64 {
        self.waist_diameter_1e2 / 2.0
    }
}

/// A Gaussian beam clipped by a circular, unobscured aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AperturedBeam {
    pub beam: GaussianBeam,
    /// Meters.
    pub aperture_diameter: f64,
}

impl AperturedBeam {
    pub fn new(beam: GaussianBeam, aperture_diameter: f64) -> Result<Self> {
        require_positive("aperture diameter", aperture_diameter)?;
        Ok(Self {
            beam,
            aperture_diameter,
        })
    }

    /// 17.8 mm beam behind a 20 mm aperture at 1550 nm.
    pub fn design() -> Self {
        Self {
            beam: GaussianBeam::design(),
            aperture_diameter: DESIGN_APERTURE_DIAMETER,
        }
    }

    /// Aperture radius over the 1/e² beam radius.
    pub fn truncation_ratio(&self) -> f64 {
        self.aperture_diameter / self.beam.waist_diameter_1e2
    }
}

/// Full-angle 1/e² far-field divergence of the unclipped beam, `4λ/(πD)`.
pub fn untruncated_divergence(beam: &GaussianBeam) -> DivergenceAngle {
    DivergenceAngle {
        value: 4.0 * beam.wavelength / (PI * beam.waist_diameter_1e2),
        convention: Convention::Full1e2,
    }
}

/// Resolution settings for the radial diffraction integral.
///
/// Composite Simpson on `intervals` panels. With `tolerance` set the panel
/// count is doubled until two successive estimates agree to
/// `tolerance · |U(0)|`, up to `max_intervals`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub intervals: usize,
    pub tolerance: Option<f64>,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            intervals: 128,
            tolerance: Some(1e-10),
            max_intervals: 1 << 16,
        }
    }
}

impl Quadrature {
    /// A non-adaptive rule with exactly `intervals` panels.
    pub fn fixed(intervals: usize) -> Self {
        Self {
            intervals,
            tolerance: None,
            max_intervals: intervals,
        }
    }
}

// Beyond this many 1/e² radii the Gaussian is below 1e-21 of its peak.
const GAUSSIAN_SUPPORT_RADII: f64 = 7.0;

struct RadialIntegrator {
    w: f64,
    upper: f64,
    k: f64,
    quad: Quadrature,
    norm: f64,
}

impl RadialIntegrator {
    fn new(apertured: &AperturedBeam, quad: Quadrature) -> Result<Self> {
        if quad.intervals < 2 || quad.max_intervals < quad.intervals {
            return Err(Error::invalid(
                "quadrature",
                format!(
                    "need 2 <= intervals <= max_intervals, got {} / {}",
                    quad.intervals, quad.max_intervals
                ),
            ));
        }
        let w = apertured.beam.radius();
        let a = apertured.aperture_diameter / 2.0;
        let mut this = Self {
            w,
            upper: a.min(GAUSSIAN_SUPPORT_RADII * w),
            k: 2.0 * PI / apertured.beam.wavelength,
            quad,
            norm: 1.0,
        };
        // Closed form at θ = 0: ∫ exp(−r²/w²) r dr = w²/2 · (1 − exp(−R²/w²)).
        this.norm = 0.5 * w * w * (1.0 - (-(this.upper / w).powi(2)).exp());
        Ok(this)
    }

    fn simpson(&self, theta: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = self.upper / n as f64;
        let kr = self.k * theta.sin();
        let f = |r: f64| (-(r / self.w).powi(2)).exp() * libm::j0(kr * r) * r;
        let mut sum = f(0.0) + f(self.upper);
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += weight * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    /// Field amplitude normalized by its closed-form on-axis value.
    fn amplitude(&self, theta: f64) -> Result<f64> {
        let mut n = self.quad.intervals;
        let mut estimate = self.simpson(theta, n);
        let Some(tol) = self.quad.tolerance else {
            return Ok(estimate / self.norm);
        };
        while n * 2 <= self.quad.max_intervals {
            n *= 2;
            let refined = self.simpson(theta, n);
            let converged = (refined - estimate).abs() <= tol * self.norm;
            estimate = refined;
            if converged {
                return Ok(estimate / self.norm);
            }
        }
        Err(Error::Numerical(format!(
            "diffraction integral at θ = {theta:e} rad did not converge within {} panels",
            self.quad.max_intervals
        )))
    }

    fn intensity(&self, theta: f64, on_axis: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(1.0);
        }
        let u = self.amplitude(theta)? / on_axis;
        Ok(u * u)
    }
}

/// Normalized far-field intensity of a clipped Gaussian at each angle (radians,
/// measured from the optical axis). The value at θ = 0 is exactly 1.
pub fn farfield_intensity(
    apertured: &AperturedBeam,
    angles: &[f64],
    quad: Quadrature,
) -> Result<Vec<f64>> {
    if let Some(bad) = angles.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::invalid("angle", format!("must be finite and >= 0, got {bad}")));
    }
    if angles.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("angles", "must be sorted ascending"));
    }
    let integ = RadialIntegrator::new(apertured, quad)?;
    let on_axis = integ.amplitude(0.0)?;
    angles.iter().map(|&t| integ.intensity(t, on_axis)).collect()
}

/// Full width at half maximum of the clipped-Gaussian far field.
pub fn truncated_fwhm(apertured: &AperturedBeam, quad: Quadrature) -> Result<DivergenceAngle> {
    let integ = RadialIntegrator::new(apertured, quad)?;
    let on_axis = integ.amplitude(0.0)?;
    let excess = |t: f64| integ.intensity(t, on_axis).map(|i| i - 0.5);

    // Start inside the main lobe at the unclipped half-width and expand.
    // Everything past the first null stays below half power, so the first
    // bracket found encloses the only crossing.
    let mut lo = 0.0;
    let mut hi = 0.5 * untruncated_divergence(&apertured.beam).fwhm_value();
    let mut expansions = 0;
    while excess(hi)? > 0.0 {
        lo = hi;
        hi *= 1.5;
        expansions += 1;
        if expansions > 64 {
            return Err(Error::Numerical("could not bracket the half-power angle".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    DivergenceAngle::fwhm(lo + hi)
}

/// On-axis transmit gain `16/θ²` with θ the full 1/e² angle.
pub fn transmit_gain(theta: DivergenceAngle) -> Result<f64> {
    let t = require_positive("divergence angle", theta.full_1e2_value())?;
    Ok(16.0 / (t * t))
}

pub fn transmit_gain_db(theta: DivergenceAngle) -> Result<f64> {
    Ok(10.0 * transmit_gain(theta)?.log10())
}

/// Beam footprint diameter at `distance`, using the FWHM angle.
pub fn footprint(theta: DivergenceAngle, distance: f64) -> Result<f64> {
    let t = theta.fwhm_value();
    if t >= 0.1 {
        return Err(Error::invalid("divergence angle", format!("{t} rad is outside the small-angle regime")));
    }
    require_positive("distance", distance)?;
    Ok(t * distance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn full_to_fwhm_factor() {
        let a = DivergenceAngle::full_1e2(100e-6).unwrap().to(Convention::Fwhm);
        assert!((a.value() - 58.87e-6).abs() < 0.005e-6);
    }

    #[test]
    fn fwhm_identity() {
        let a = DivergenceAngle::fwhm(90e-6).unwrap();
        assert_eq!(convert_divergence(a, Convention::Fwhm).unwrap(), a);
    }

    #[test]
    fn fwhm_to_full_checked_against_profile() {
        let full = DivergenceAngle::fwhm(90e-6).unwrap().full_1e2_value();
        assert!((full - 152.9e-6).abs() < 0.05e-6);
        // exp(−2(θ/half_1e2)²) must be 1/2 at half the FWHM.
        let half_1e2 = full / 2.0;
        let at_half_max = (-2.0 * (45e-6 / half_1e2).powi(2)).exp();
        assert!((at_half_max - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(DivergenceAngle::fwhm(0.0).is_err());
        assert!(DivergenceAngle::fwhm(-1e-6).is_err());
        assert!(DivergenceAngle::fwhm(f64::NAN).is_err());
    }

    #[test]
    fn untruncated_values() {
        let beam = GaussianBeam::design();
        let t = untruncated_divergence(&beam);
        assert_eq!(t.convention(), Convention::Full1e2);
        assert!((t.value() - 110.9e-6).abs() < 0.05e-6);

        let wide = GaussianBeam::new(2.0 * DESIGN_WAIST_DIAMETER, DESIGN_WAVELENGTH).unwrap();
        assert!(rel(untruncated_divergence(&wide).value(), t.value() / 2.0) < 1e-15);

        let red = GaussianBeam::new(DESIGN_WAIST_DIAMETER, 1565e-9).unwrap();
        assert!((untruncated_divergence(&red).value() - 111.94e-6).abs() < 0.01e-6);
    }

    #[test]
    fn c_band_guard() {
        assert!(GaussianBeam::c_band(17.8e-3, 1550e-9).is_ok());
        assert!(GaussianBeam::c_band(17.8e-3, 1310e-9).is_err());
    }

    #[test]
    fn design_truncation_ratio() {
        assert!((AperturedBeam::design().truncation_ratio() - 1.12).abs() < 0.005);
    }

    #[test]
    fn intensity_normalized_and_monotone_in_main_lobe() {
        let ap = AperturedBeam::design();
        let angles: Vec<f64> = (0..=60).map(|i| i as f64 * 1e-6).collect();
        let i = farfield_intensity(&ap, &angles, Quadrature::default()).unwrap();
        assert_eq!(i[0], 1.0);
        assert!(i.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn intensity_input_checks() {
        let ap = AperturedBeam::design();
        assert!(farfield_intensity(&ap, &[1e-6, 0.0], Quadrature::default()).is_err());
        assert!(farfield_intensity(&ap, &[-1e-6], Quadrature::default()).is_err());
        assert!(farfield_intensity(&ap, &[0.0], Quadrature::fixed(1)).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let quad = Quadrature {
            intervals: 2,
            tolerance: Some(1e-30),
            max_intervals: 8,
        };
        let err = farfield_intensity(&AperturedBeam::design(), &[40e-6], quad).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn huge_aperture_matches_gaussian_far_field() {
        let beam = GaussianBeam::design();
        let ap = AperturedBeam::new(beam, 1.0).unwrap();
        let half_1e2 = untruncated_divergence(&beam).value() / 2.0;
        let angles: Vec<f64> = (0..=40).map(|i| i as f64 * half_1e2 / 40.0).collect();
        let got = farfield_intensity(&ap, &angles, Quadrature::default()).unwrap();
        for (t, i) in angles.iter().zip(got) {
            let expected = (-2.0 * (t / half_1e2).powi(2)).exp();
            assert!((i - expected).abs() < 0.01 * expected, "θ={t:e}: {i} vs {expected}");
        }
        let fwhm = truncated_fwhm(&ap, Quadrature::default()).unwrap();
        assert!(rel(fwhm.value(), 65.27e-6) < 1e-3);
    }

    #[test]
    fn design_point_fwhm() {
        let fwhm = truncated_fwhm(&AperturedBeam::design(), Quadrature::default()).unwrap();
        assert_eq!(fwhm.convention(), Convention::Fwhm);
        assert!(rel(fwhm.value(), 90e-6) < 0.10, "{}", fwhm.value());
    }

    #[test]
    fn fwhm_scales_with_wavelength() {
        let base = truncated_fwhm(&AperturedBeam::design(), Quadrature::default()).unwrap();
        let mut ap = AperturedBeam::design();
        ap.beam.wavelength = 1565e-9;
        let red = truncated_fwhm(&ap, Quadrature::default()).unwrap();
        assert!(rel(red.value(), base.value() * 1565.0 / 1550.0) < 1e-6);
    }

    #[test]
    fn gain_values() {
        assert_eq!(transmit_gain(DivergenceAngle::full_1e2(4.0).unwrap()).unwrap(), 1.0);
        let t = DivergenceAngle::full_1e2(152.9e-6).unwrap();
        // 10·log10(16/θ²) evaluated independently: 88.3530 dB.
        assert!((transmit_gain_db(t).unwrap() - 88.3530).abs() < 1e-3);
        let half = DivergenceAngle::full_1e2(76.45e-6).unwrap();
        let delta = transmit_gain_db(half).unwrap() - transmit_gain_db(t).unwrap();
        assert!((delta - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn footprint_values() {
        let t = DivergenceAngle::fwhm(90e-6).unwrap();
        assert!((footprint(t, 600e3).unwrap() - 54.0).abs() < 1e-9);
        assert!((footprint(t, 1200e3).unwrap() - 108.0).abs() < 1e-9);
        let wide = DivergenceAngle::fwhm(5e-3).unwrap();
        assert!((footprint(wide, 600e3).unwrap() - 3000.0).abs() < 1e-9);
        assert!(footprint(DivergenceAngle::fwhm(0.2).unwrap(), 1.0).is_err());
        assert!(footprint(t, 0.0).is_err());
    }
}
