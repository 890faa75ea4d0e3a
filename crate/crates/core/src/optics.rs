//! Distinguishability model: filter bandwidths, coherence length, delay and
//! polarization mismatch mapped onto the temporal-mode overlap amplitude of
//! the two photons meeting at the beam splitter.
//!
//! All spectra are Gaussian. Lengths are in μm of optical path, wavelengths
//! and bandwidths in nm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in μm per fs.
pub const SPEED_OF_LIGHT_UM_PER_FS: f64 = 0.299_792_458;

/// Time-bandwidth constant of a transform-limited Gaussian, `2 ln 2 / π`.
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI;

/// Relative tolerance on `1/λ_pump = 1/λ_signal + 1/λ_herald`.
pub const ENERGY_CONSERVATION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("invalid filter: center {center_nm} nm, fwhm {fwhm_nm} nm")]
    InvalidFilter { center_nm: f64, fwhm_nm: f64 },
    #[error("wavelengths violate energy conservation: 1/{pump_nm} vs 1/{signal_nm} + 1/{herald_nm}")]
    EnergyConservation {
        pump_nm: f64,
        signal_nm: f64,
        herald_nm: f64,
    },
    #[error("{name} = {value} outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Gaussian band-pass filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    center_nm: f64,
    fwhm_nm: f64,
}

impl FilterSpec {
    /// Requires `0 < fwhm < center`.
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self, OpticsError> {
        let valid = center_nm.is_finite() && fwhm_nm.is_finite() && fwhm_nm > 0.0 && fwhm_nm < center_nm;
        if !valid {
            return Err(OpticsError::InvalidFilter { center_nm, fwhm_nm });
        }
        Ok(Self { center_nm, fwhm_nm })
    }

    /// No filtering at all (infinite bandwidth).
    pub fn unfiltered(center_nm: f64) -> Self {
        Self {
            center_nm,
            fwhm_nm: f64::INFINITY,
        }
    }

    pub fn center_nm(&self) -> f64 {
        self.center_nm
    }

    pub fn fwhm_nm(&self) -> f64 {
        self.fwhm_nm
    }

    /// FWHM in optical frequency, proportional to `Δλ/λ²`.
    fn frequency_width(&self) -> f64 {
        self.fwhm_nm / (self.center_nm * self.center_nm)
    }
}

/// Pump laser spectrum. The bandwidth is informational; it is not used in
/// any rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl PumpSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self, OpticsError> {
        if !(center_nm > 0.0 && fwhm_nm >= 0.0 && center_nm.is_finite()) {
            return Err(OpticsError::InvalidFilter { center_nm, fwhm_nm });
        }
        Ok(Self { center_nm, fwhm_nm })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceLength {
    pub um: f64,
    pub fs: f64,
}

/// FWHM coherence length of light passed through a Gaussian filter:
/// `l_c = (2 ln 2 / π) λ² / Δλ`.
pub fn coherence_length(filter: &FilterSpec) -> CoherenceLength {
    let um = GAUSSIAN_TIME_BANDWIDTH * filter.center_nm * filter.center_nm / filter.fwhm_nm * 1e-3;
    CoherenceLength {
        um,
        fs: um / SPEED_OF_LIGHT_UM_PER_FS,
    }
}

/// Effective filter on the signal photon once its twin is detected behind
/// `herald_filter`. Energy conservation with a narrowband pump maps the
/// herald bandwidth onto the signal at equal frequency width; the two
/// Gaussian transmissions then multiply, so inverse variances add.
pub fn heralded_bandwidth(
    signal_filter: &FilterSpec,
    herald_filter: &FilterSpec,
    pump: &PumpSpec,
) -> Result<FilterSpec, OpticsError> {
    let (ls, lh, lp) = (signal_filter.center_nm, herald_filter.center_nm, pump.center_nm);
    let mismatch = ((1.0 / ls + 1.0 / lh) - 1.0 / lp).abs() * lp;
    if !mismatch.is_finite() || mismatch > ENERGY_CONSERVATION_TOLERANCE {
        return Err(OpticsError::EnergyConservation {
            pump_nm: lp,
            signal_nm: ls,
            herald_nm: lh,
        });
    }
    let mapped = herald_filter.frequency_width() * ls * ls;
    if mapped.is_infinite() {
        return Ok(*signal_filter);
    }
    let inv_sq = signal_filter.fwhm_nm.powi(-2) + mapped.powi(-2);
    Ok(FilterSpec {
        center_nm: ls,
        fwhm_nm: inv_sq.powf(-0.5),
    })
}

/// Herald filter width expressed at the signal wavelength.
pub fn mapped_herald_width_nm(signal_center_nm: f64, herald_filter: &FilterSpec) -> f64 {
    herald_filter.frequency_width() * signal_center_nm * signal_center_nm
}

/// Everything that can make the photon from source 2 distinguishable from
/// the one from source 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityContext {
    pub delay_um: f64,
    pub coherence_length_um: f64,
    pub polarization_angle: f64,
    pub spectral_mismatch: f64,
}

impl DistinguishabilityContext {
    pub fn new(delay_um: f64, coherence_length_um: f64) -> Self {
        Self {
            delay_um,
            coherence_length_um,
            polarization_angle: 0.0,
            spectral_mismatch: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !self.delay_um.is_finite() {
            return Err(OpticsError::OutOfRange { name: "delay_um", value: self.delay_um });
        }
        if self.coherence_length_um.is_nan() || self.coherence_length_um <= 0.0 {
            return Err(OpticsError::OutOfRange {
                name: "coherence_length_um",
                value: self.coherence_length_um,
            });
        }
        if !self.polarization_angle.is_finite() {
            return Err(OpticsError::OutOfRange {
                name: "polarization_angle",
                value: self.polarization_angle,
            });
        }
        if !(0.0..=1.0).contains(&self.spectral_mismatch) {
            return Err(OpticsError::OutOfRange {
                name: "spectral_mismatch",
                value: self.spectral_mismatch,
            });
        }
        Ok(())
    }
}

/// Width of `|m(δ)|²` as a Gaussian in δ: `σ_d = l_c / (2√ln 2)`, which puts
/// the half maximum of the dip at `|δ| = l_c/√2`.
pub fn overlap_sigma_um(coherence_length_um: f64) -> f64 {
    coherence_length_um / (2.0 * std::f64::consts::LN_2.sqrt())
}

/// FWHM of the dip for photons of coherence length `l_c`.
pub fn dip_fwhm_um(coherence_length_um: f64) -> f64 {
    std::f64::consts::SQRT_2 * coherence_length_um
}

/// Overlap amplitude `m` of the two single-photon wave packets. The
/// returned value is real and non-negative.
pub fn overlap_amplitude(ctx: &DistinguishabilityContext) -> Complex64 {
    let sigma = overlap_sigma_um(ctx.coherence_length_um);
    let temporal = (-ctx.delay_um * ctx.delay_um / (2.0 * sigma * sigma)).exp();
    let cos = ctx.polarization_angle.cos();
    let overlap_sqr = cos * cos * (1.0 - ctx.spectral_mismatch) * temporal;
    Complex64::new(overlap_sqr.sqrt(), 0.0)
}

/// Temporal mode of photon 2 written in the `(matched, orthogonal)` basis,
/// where `matched` is photon 1's mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub matched: Complex64,
    pub orthogonal: Complex64,
}

impl ModeAmplitudes {
    pub const IDENTICAL: Self = Self {
        matched: Complex64::new(1.0, 0.0),
        orthogonal: Complex64::new(0.0, 0.0),
    };

    pub const DISTINGUISHABLE: Self = Self {
        matched: Complex64::new(0.0, 0.0),
        orthogonal: Complex64::new(1.0, 0.0),
    };

    pub fn overlap_sqr(&self) -> f64 {
        self.matched.norm_sqr()
    }
}

pub fn decompose_modes(m: Complex64) -> Result<ModeAmplitudes, OpticsError> {
    let overlap_sqr = m.norm_sqr();
    if overlap_sqr.is_nan() || overlap_sqr > 1.0 + 1e-12 {
        return Err(OpticsError::OutOfRange {
            name: "|m|",
            value: m.norm(),
        });
    }
    Ok(ModeAmplitudes {
        matched: m,
        orthogonal: Complex64::new((1.0 - overlap_sqr).max(0.0).sqrt(), 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, SQRT_2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn coherence_length_at_1310() {
        let lc = coherence_length(&FilterSpec::new(1310.0, 10.0).unwrap());
        assert!(rel(lc.um, 75.0) < 0.02, "{}", lc.um);
        assert!(rel(lc.fs, 250.0) < 0.02, "{}", lc.fs);
    }

    #[test]
    fn coherence_length_scales_with_wavelength_squared() {
        let a = coherence_length(&FilterSpec::new(1310.0, 10.0).unwrap());
        let b = coherence_length(&FilterSpec::new(2620.0, 10.0).unwrap());
        assert!(rel(b.um, 4.0 * a.um) < 1e-12);
    }

    #[test]
    fn coherence_length_at_1550() {
        let lc = coherence_length(&FilterSpec::new(1550.0, 10.0).unwrap());
        let expected = 0.441 * 1550.0 * 1550.0 / 10.0 * 1e-3;
        assert!(rel(lc.um, expected) < 1e-3);
        assert!((lc.um - 106.0).abs() < 0.5);
    }

    #[test]
    fn invalid_filters_rejected() {
        assert!(FilterSpec::new(1310.0, 0.0).is_err());
        assert!(FilterSpec::new(1310.0, -1.0).is_err());
        assert!(FilterSpec::new(10.0, 20.0).is_err());
        assert!(FilterSpec::new(f64::NAN, 1.0).is_err());
    }

    fn pump() -> PumpSpec {
        PumpSpec::new(710.0, 4.5).unwrap()
    }

    #[test]
    fn herald_alone_maps_to_seven_nm() {
        let herald = FilterSpec::new(1550.0, 10.0).unwrap();
        let mapped = mapped_herald_width_nm(1310.0, &herald);
        assert!((mapped - 7.14).abs() < 0.01, "{mapped}");
        let eff = heralded_bandwidth(&FilterSpec::unfiltered(1310.0), &herald, &pump()).unwrap();
        assert!((eff.fwhm_nm() - mapped).abs() < 1e-12);
    }

    #[test]
    fn wide_herald_leaves_signal_unchanged() {
        let signal = FilterSpec::new(1310.0, 10.0).unwrap();
        let eff = heralded_bandwidth(&signal, &FilterSpec::unfiltered(1550.0), &pump()).unwrap();
        assert_eq!(eff, signal);
    }

    #[test]
    fn combined_bandwidth_inverse_quadrature() {
        let signal = FilterSpec::new(1310.0, 10.0).unwrap();
        let herald = FilterSpec::new(1550.0, 10.0).unwrap();
        let eff = heralded_bandwidth(&signal, &herald, &pump()).unwrap();
        // Oracle: 1/Δ² = 1/10² + 1/Δ_h², Δ_h = 10·(1310/1550)².
        let dh = 10.0 * (1310.0f64 / 1550.0).powi(2);
        let oracle = 1.0 / (1.0 / 100.0 + 1.0 / (dh * dh)).sqrt();
        assert!((eff.fwhm_nm() - oracle).abs() < 1e-12);
        assert!((eff.fwhm_nm() - 5.8).abs() < 0.05);
    }

    #[test]
    fn inconsistent_wavelengths_rejected() {
        let signal = FilterSpec::new(1310.0, 10.0).unwrap();
        let herald = FilterSpec::new(1310.0, 10.0).unwrap();
        assert!(matches!(
            heralded_bandwidth(&signal, &herald, &pump()),
            Err(OpticsError::EnergyConservation { .. })
        ));
    }

    #[test]
    fn perfect_overlap_at_zero_delay() {
        let m = overlap_amplitude(&DistinguishabilityContext::new(0.0, 75.0));
        assert!((m.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_half_at_half_fwhm() {
        let lc = 75.0;
        let m = overlap_amplitude(&DistinguishabilityContext::new(SQRT_2 * lc / 2.0, lc));
        assert!((m.norm_sqr() - 0.5).abs() < 1e-12);
        let m = overlap_amplitude(&DistinguishabilityContext::new(-SQRT_2 * lc / 2.0, lc));
        assert!((m.norm_sqr() - 0.5).abs() < 1e-12);
        assert!((dip_fwhm_um(75.0) - 106.066).abs() < 1e-3);
        let lc_lab = coherence_length(&FilterSpec::new(1310.0, 10.0).unwrap()).um;
        assert!(rel(dip_fwhm_um(lc_lab), 107.0) < 0.02);
    }

    #[test]
    fn orthogonal_polarization_kills_overlap() {
        for delay in [-100.0, 0.0, 37.0] {
            let ctx = DistinguishabilityContext {
                polarization_angle: FRAC_PI_2,
                ..DistinguishabilityContext::new(delay, 75.0)
            };
            assert!(overlap_amplitude(&ctx).norm_sqr() < 1e-30);
        }
    }

    #[test]
    fn sigma_gives_sqrt2_lc_fwhm() {
        let sigma = overlap_sigma_um(75.0);
        assert!(rel(2.0 * (2.0 * LN_2).sqrt() * sigma, SQRT_2 * 75.0) < 1e-15);
    }

    #[test]
    fn decomposition_limits() {
        assert_eq!(decompose_modes(Complex64::new(1.0, 0.0)).unwrap(), ModeAmplitudes::IDENTICAL);
        assert_eq!(decompose_modes(Complex64::new(0.0, 0.0)).unwrap(), ModeAmplitudes::DISTINGUISHABLE);
        assert!(decompose_modes(Complex64::new(1.1, 0.0)).is_err());
        let d = decompose_modes(Complex64::new(0.6, 0.0)).unwrap();
        assert!((d.matched.norm_sqr() + d.orthogonal.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn context_validation() {
        let mut ctx = DistinguishabilityContext::new(0.0, 75.0);
        assert!(ctx.validate().is_ok());
        ctx.spectral_mismatch = 1.5;
        assert!(ctx.validate().is_err());
        let ctx = DistinguishabilityContext::new(0.0, 0.0);
        assert!(ctx.validate().is_err());
    }
}
