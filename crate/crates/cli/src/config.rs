//! On-disk JSON config and its translation into an [`ExperimentConfig`].

use homdip::detect::{ClickModel, CoincidenceScheme, DetectorBank, DetectorModel, DetectorRole, SchemeKind};
use homdip::optics::{FilterSpec, PumpSpec};
use homdip::pdc::SourceParams;
use homdip::runner::{delay_grid, ExperimentConfig, DEFAULT_PULSE_RATE_HZ};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sources: Sources,
    pub filters: Filters,
    pub detectors: Vec<Detector>,
    pub scheme: SchemeKind,
    pub delays: Delays,
    pub mc: MonteCarlo,
    #[serde(default)]
    pub pulse_rate_hz: Option<f64>,
    #[serde(default = "unity")]
    pub collection_efficiency: f64,
    #[serde(default)]
    pub optics: Optics,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: u32,
    #[serde(default)]
    pub detection: ClickModel,
}

/// Exactly one of `zeta` or `P`, one entry per source.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    #[serde(default)]
    pub zeta: Option<[f64; 2]>,
    #[serde(default, rename = "P")]
    pub p: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filters {
    pub signal_nm: f64,
    pub signal_fwhm_nm: f64,
    pub herald_nm: f64,
    pub herald_fwhm_nm: f64,
    pub pump_fwhm_nm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detector {
    pub eta: f64,
    pub dark_prob: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delays {
    pub min_um: f64,
    pub max_um: f64,
    pub step_um: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub pulses_per_point: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optics {
    #[serde(default)]
    pub polarization_angle_rad: f64,
    #[serde(default)]
    pub spectral_mismatch: f64,
    #[serde(default = "half")]
    pub splitting_ratio: f64,
}

impl Default for Optics {
    fn default() -> Self {
        Self {
            polarization_angle_rad: 0.0,
            spectral_mismatch: 0.0,
            splitting_ratio: 0.5,
        }
    }
}

fn unity() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn default_max_pairs() -> u32 {
    3
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// Builds and validates the engine configuration.
    pub fn to_experiment(&self) -> Result<ExperimentConfig, String> {
        let sources = match (self.sources.zeta, self.sources.p) {
            (Some(z), None) => z.map(SourceParams::from_zeta),
            (None, Some(p)) => p.map(SourceParams::from_pair_probability),
            _ => return Err("sources must give exactly one of `zeta` or `P`".into()),
        };
        let [s1, s2] = sources;
        let sources = [s1.map_err(|e| e.to_string())?, s2.map_err(|e| e.to_string())?];

        let f = &self.filters;
        let signal_filter = FilterSpec::new(f.signal_nm, f.signal_fwhm_nm).map_err(|e| e.to_string())?;
        let herald_filter = FilterSpec::new(f.herald_nm, f.herald_fwhm_nm).map_err(|e| e.to_string())?;
        // The pump sits where energy conservation puts it.
        let pump_nm = 1.0 / (1.0 / f.signal_nm + 1.0 / f.herald_nm);
        let pump = PumpSpec::new(pump_nm, f.pump_fwhm_nm).map_err(|e| e.to_string())?;

        let detectors: [Detector; 4] = self
            .detectors
            .clone()
            .try_into()
            .map_err(|v: Vec<Detector>| format!("expected 4 detectors, got {}", v.len()))?;
        let mut models = Vec::with_capacity(4);
        for (d, role) in detectors.iter().zip(DetectorRole::ALL) {
            models.push(DetectorModel::new(role, d.eta, d.dark_prob).map_err(|e| e.to_string())?);
        }
        let models: [DetectorModel; 4] = models.try_into().expect("four detectors");
        let detectors = DetectorBank::new(models).map_err(|e| e.to_string())?;

        let delays_um = delay_grid(self.delays.min_um, self.delays.max_um, self.delays.step_um)
            .map_err(|e| e.to_string())?;

        let cfg = ExperimentConfig {
            sources,
            signal_filter,
            herald_filter,
            pump,
            detectors,
            scheme: match self.scheme {
                SchemeKind::Threefold => CoincidenceScheme::threefold(),
                SchemeKind::Fivefold => CoincidenceScheme::fivefold(),
            },
            delays_um,
            pulses_per_point: self.mc.pulses_per_point,
            seed: self.mc.seed,
            pulse_rate_hz: self.pulse_rate_hz.unwrap_or(DEFAULT_PULSE_RATE_HZ),
            collection_efficiency: self.collection_efficiency,
            polarization_angle: self.optics.polarization_angle_rad,
            spectral_mismatch: self.optics.spectral_mismatch,
            splitting_ratio: self.optics.splitting_ratio,
            max_pairs: self.max_pairs,
            click_model: self.detection,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}
