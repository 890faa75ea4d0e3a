//! Experiment engine: pair statistics → distinguishability → beam splitter
//! → detectors, evaluated over a delay scan either in closed form or by
//! Monte Carlo.
//!
//! Pair configurations `(n1, n2)` beyond `max_pairs` are outside the model.
//! The analytic mode sums the unnormalized thermal weights of the retained
//! configurations; the Monte Carlo mode drops pulses that sample beyond the
//! budget, so both modes estimate the same quantity.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detect::{
    accidental_rate, ClickModel, CoincidenceScheme, DetectError, DetectorBank, DetectorRole, SchemeKind,
};
use crate::fock::{
    apply_beamsplitter_with, mode_probabilities, BeamSplitter, FockError, Grouping, ModeRegistry, Spatial,
    DEFAULT_MAX_PHOTONS,
};
use crate::optics::{
    coherence_length, decompose_modes, heralded_bandwidth, overlap_amplitude, DistinguishabilityContext, FilterSpec,
    ModeAmplitudes, OpticsError, PumpSpec,
};
use crate::pdc::{configuration_state, configurations, PairCountSample, PairSampler, PdcError, SourceParams};

/// Validated range of pair probabilities for the five-fold bound.
pub const FIVEFOLD_FORMULA_MAX_P: f64 = 0.2;

/// Repetition rate assumed when none is configured (mode-locked Ti:Sapphire).
pub const DEFAULT_PULSE_RATE_HZ: f64 = 7.6e7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("pair probability {0} outside the validated range [0, 0.2]")]
    PairProbabilityRange(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Pdc(#[from] PdcError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

/// Ideal three-fold visibility of two thermal sources.
pub fn analytic_visibility_threefold() -> f64 {
    1.0 / 3.0
}

/// `(1 + 8P) / (1 + 12P)` without range checks.
pub fn fivefold_visibility_formula(p: f64) -> f64 {
    (1.0 + 8.0 * p) / (1.0 + 12.0 * p)
}

/// Upper bound on the five-fold visibility when up to three pairs are
/// created per pulse, valid for `0 ≤ P ≤ 0.2`.
pub fn analytic_visibility_fivefold_max(p: f64) -> Result<f64, RunError> {
    if !(0.0..=FIVEFOLD_FORMULA_MAX_P).contains(&p) {
        return Err(RunError::PairProbabilityRange(p));
    }
    Ok(fivefold_visibility_formula(p))
}

/// Inclusive, evenly spaced delay grid.
pub fn delay_grid(min_um: f64, max_um: f64, step_um: f64) -> Result<Vec<f64>, RunError> {
    if !(min_um.is_finite() && max_um.is_finite() && step_um.is_finite()) {
        return Err(RunError::Config("delay grid bounds must be finite".into()));
    }
    if max_um < min_um {
        return Err(RunError::Config(format!("delay grid is empty: max {max_um} < min {min_um}")));
    }
    if step_um <= 0.0 {
        return Err(RunError::Config(format!("delay step must be positive, got {step_um}")));
    }
    let count = ((max_um - min_um) / step_um + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| min_um + i as f64 * step_um).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sources: [SourceParams; 2],
    pub signal_filter: FilterSpec,
    pub herald_filter: FilterSpec,
    pub pump: PumpSpec,
    pub detectors: DetectorBank,
    pub scheme: CoincidenceScheme,
    pub delays_um: Vec<f64>,
    pub pulses_per_point: u64,
    pub seed: u64,
    pub pulse_rate_hz: f64,
    /// Overall transmission folded into every detector efficiency.
    pub collection_efficiency: f64,
    pub polarization_angle: f64,
    pub spectral_mismatch: f64,
    /// Power transmissivity of the final beam splitter.
    pub splitting_ratio: f64,
    pub max_pairs: u32,
    pub click_model: ClickModel,
}

impl ExperimentConfig {
    /// The lab setup: 4 % pairs per pulse and source, 10 nm filters at 1310
    /// and 1550 nm, the lab detectors, ±300 μm scan.
    pub fn lab_default(kind: SchemeKind) -> Self {
        let source = SourceParams::from_pair_probability(0.04).expect("valid P");
        Self {
            sources: [source, source],
            signal_filter: FilterSpec::new(1310.0, 10.0).expect("valid filter"),
            herald_filter: FilterSpec::new(1550.0, 10.0).expect("valid filter"),
            pump: PumpSpec::new(710.0, 4.5).expect("valid pump"),
            detectors: DetectorBank::lab_default(),
            scheme: match kind {
                SchemeKind::Threefold => CoincidenceScheme::threefold(),
                SchemeKind::Fivefold => CoincidenceScheme::fivefold(),
            },
            delays_um: delay_grid(-300.0, 300.0, 10.0).expect("valid grid"),
            pulses_per_point: 1_000_000,
            seed: 20030101,
            pulse_rate_hz: DEFAULT_PULSE_RATE_HZ,
            collection_efficiency: 1.0,
            polarization_angle: 0.0,
            spectral_mismatch: 0.0,
            splitting_ratio: 0.5,
            max_pairs: 3,
            click_model: ClickModel::Threshold,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.delays_um.is_empty() {
            return Err(RunError::Config("delay grid is empty".into()));
        }
        if self.delays_um.iter().any(|d| !d.is_finite()) {
            return Err(RunError::Config("delay grid contains non-finite values".into()));
        }
        if self.delays_um.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RunError::Config("delay grid must be strictly increasing".into()));
        }
        if !(self.pulse_rate_hz > 0.0 && self.pulse_rate_hz.is_finite()) {
            return Err(RunError::Config(format!("pulse_rate_hz must be positive, got {}", self.pulse_rate_hz)));
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            return Err(RunError::Config(format!(
                "collection_efficiency must lie in [0, 1], got {}",
                self.collection_efficiency
            )));
        }
        if 2 * self.max_pairs > DEFAULT_MAX_PHOTONS {
            return Err(FockError::Truncation {
                requested: 2 * self.max_pairs,
                max: DEFAULT_MAX_PHOTONS,
            }
            .into());
        }
        BeamSplitter::new(self.splitting_ratio)?;
        self.context(0.0).validate()?;
        self.coherence_length_um()?;
        Ok(())
    }

    /// Coherence length of the 1310 nm photons as seen by the scheme: the
    /// five-fold also filters them through their heralds.
    pub fn coherence_length_um(&self) -> Result<f64, RunError> {
        let filter = match self.scheme.kind {
            SchemeKind::Threefold => self.signal_filter,
            SchemeKind::Fivefold => heralded_bandwidth(&self.signal_filter, &self.herald_filter, &self.pump)?,
        };
        Ok(coherence_length(&filter).um)
    }

    fn context(&self, delay_um: f64) -> DistinguishabilityContext {
        let lc = self.coherence_length_um().unwrap_or(f64::NAN);
        DistinguishabilityContext {
            delay_um,
            coherence_length_um: lc,
            polarization_angle: self.polarization_angle,
            spectral_mismatch: self.spectral_mismatch,
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipPoint {
    pub delay_um: f64,
    pub rate_hz: f64,
    pub err_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub scheme: SchemeKind,
    pub mode: CurveMode,
    pub config_digest: String,
    pub coherence_length_um: f64,
    /// Estimated delay-independent accidental floor.
    pub accidental_hz: f64,
    /// Monte Carlo pulses dropped for exceeding the pair budget.
    pub truncated_pulses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    pub points: Vec<DipPoint>,
    pub metadata: Option<CurveMetadata>,
}

impl DipCurve {
    pub fn from_points(points: Vec<DipPoint>) -> Self {
        Self { points, metadata: None }
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.delay_um)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.rate_hz)
    }

    pub fn accidental_hz(&self) -> f64 {
        self.metadata.as_ref().map_or(0.0, |m| m.accidental_hz)
    }
}

/// Photon-number distribution over the four detectors, with cumulative
/// weights for sampling.
#[derive(Debug, Clone)]
pub struct PatternTable {
    patterns: Vec<[u32; 4]>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PatternTable {
    fn from_map(map: BTreeMap<Vec<u32>, f64>) -> Self {
        let mut patterns = Vec::with_capacity(map.len());
        let mut probabilities = Vec::with_capacity(map.len());
        for (pattern, p) in map {
            patterns.push([pattern[0], pattern[1], pattern[2], pattern[3]]);
            probabilities.push(p);
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            patterns,
            probabilities,
            cumulative,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32; 4], f64)> {
        self.patterns.iter().zip(self.probabilities.iter().copied())
    }

    fn sample(&self, u: f64) -> &[u32; 4] {
        let total = *self.cumulative.last().expect("non-empty table");
        let target = u * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        &self.patterns[i.min(self.patterns.len() - 1)]
    }
}

/// Precomputed pieces of one experiment configuration.
#[derive(Debug, Clone)]
pub struct Engine {
    config: ExperimentConfig,
    registry: Arc<ModeRegistry>,
    bank: DetectorBank,
    splitter: BeamSplitter,
    grouping: Grouping,
    coherence_length_um: f64,
    weights: Vec<(PairCountSample, f64)>,
}

impl Engine {
    pub fn new(config: &ExperimentConfig) -> Result<Self, RunError> {
        config.validate()?;
        let registry = Arc::new(ModeRegistry::two_source());
        let grouping = Grouping::by_spatial(
            &registry,
            &[Spatial::C, Spatial::D, Spatial::Herald1, Spatial::Herald2],
        );
        let [s1, s2] = config.sources;
        let weights = configurations(config.max_pairs)
            .into_iter()
            .map(|pairs| (pairs, pairs.probability(&s1, &s2)))
            .collect();
        Ok(Self {
            config: config.clone(),
            bank: config.detectors.attenuated(config.collection_efficiency)?,
            splitter: BeamSplitter::new(config.splitting_ratio)?,
            grouping,
            coherence_length_um: config.coherence_length_um()?,
            registry,
            weights,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn coherence_length_um(&self) -> f64 {
        self.coherence_length_um
    }

    /// Detectors after collection losses.
    pub fn bank(&self) -> &DetectorBank {
        &self.bank
    }

    /// Pair configurations inside the budget with their thermal weights.
    pub fn weights(&self) -> &[(PairCountSample, f64)] {
        &self.weights
    }

    pub fn modes_at(&self, delay_um: f64) -> Result<ModeAmplitudes, RunError> {
        let mut ctx = self.config.context(delay_um);
        ctx.coherence_length_um = self.coherence_length_um;
        Ok(decompose_modes(overlap_amplitude(&ctx))?)
    }

    /// Photon counts at (c, d, herald1, herald2) for one pair configuration.
    pub fn pattern_table(&self, pairs: PairCountSample, modes: &ModeAmplitudes) -> Result<PatternTable, RunError> {
        let input = configuration_state(&self.registry, DEFAULT_MAX_PHOTONS, pairs, modes)?;
        let output = apply_beamsplitter_with(&input, self.splitter, (Spatial::A, Spatial::B), (Spatial::C, Spatial::D))?;
        Ok(PatternTable::from_map(mode_probabilities(&output, &self.grouping)))
    }

    fn tables(&self, modes: &ModeAmplitudes) -> Result<Vec<PatternTable>, RunError> {
        self.weights.iter().map(|(pairs, _)| self.pattern_table(*pairs, modes)).collect()
    }

    fn pattern_click(&self, bank: &DetectorBank, pattern: &[u32; 4]) -> f64 {
        self.config
            .scheme
            .roles()
            .iter()
            .map(|&r| self.config.click_model.click(pattern[r.index()], bank.get(r)))
            .product()
    }

    fn probability_with(&self, bank: &DetectorBank, modes: &ModeAmplitudes) -> Result<f64, RunError> {
        let tables = self.tables(modes)?;
        Ok(self
            .weights
            .iter()
            .zip(&tables)
            .map(|((_, w), table)| w * table.iter().map(|(pat, p)| p * self.pattern_click(bank, pat)).sum::<f64>())
            .sum())
    }

    /// Per-pulse coincidence probability for photon 2 in the given mode.
    pub fn coincidence_probability(&self, modes: &ModeAmplitudes) -> Result<f64, RunError> {
        self.probability_with(&self.bank, modes)
    }

    /// Same, with every dark count switched off.
    pub fn signal_coincidence_probability(&self, modes: &ModeAmplitudes) -> Result<f64, RunError> {
        self.probability_with(&self.bank.without_darks(), modes)
    }

    pub fn coincidence_probability_at(&self, delay_um: f64) -> Result<f64, RunError> {
        self.coincidence_probability(&self.modes_at(delay_um)?)
    }

    /// Signal-only (dark-free) click probability of every detector.
    pub fn signal_singles(&self, modes: &ModeAmplitudes) -> Result<BTreeMap<DetectorRole, f64>, RunError> {
        let tables = self.tables(modes)?;
        let bank = self.bank.without_darks();
        Ok(DetectorRole::ALL
            .iter()
            .map(|&role| {
                let det = bank.get(role);
                let single = self
                    .weights
                    .iter()
                    .zip(&tables)
                    .map(|((_, w), t)| {
                        w * t
                            .iter()
                            .map(|(pat, p)| p * self.config.click_model.click(pat[role.index()], det))
                            .sum::<f64>()
                    })
                    .sum();
                (role, single)
            })
            .collect())
    }

    /// Accidental floor per pulse, from singles far outside the dip.
    pub fn accidental_probability(&self) -> Result<f64, RunError> {
        let singles = self.signal_singles(&ModeAmplitudes::DISTINGUISHABLE)?;
        Ok(accidental_rate(&self.config.scheme, &self.bank, &singles)?)
    }

    /// Coincidence probabilities far outside the dip (fully distinguishable
    /// photons) and at zero delay, i.e. `(I_max, I_min)`.
    pub fn dip_extremes(&self) -> Result<(f64, f64), RunError> {
        Ok((
            self.coincidence_probability(&ModeAmplitudes::DISTINGUISHABLE)?,
            self.coincidence_probability_at(0.0)?,
        ))
    }

    fn metadata(&self, mode: CurveMode, truncated_pulses: u64) -> Result<CurveMetadata, RunError> {
        Ok(CurveMetadata {
            scheme: self.config.scheme.kind,
            mode,
            config_digest: self.config.digest(),
            coherence_length_um: self.coherence_length_um,
            accidental_hz: self.accidental_probability()? * self.config.pulse_rate_hz,
            truncated_pulses,
        })
    }

    fn mc_point(&self, index: usize, delay_um: f64) -> Result<(DipPoint, u64), RunError> {
        let cfg = &self.config;
        let modes = self.modes_at(delay_um)?;
        let tables = self.tables(&modes)?;
        let budget = cfg.max_pairs as usize;
        let mut lookup = vec![vec![usize::MAX; budget + 1]; budget + 1];
        for (i, (pairs, _)) in self.weights.iter().enumerate() {
            lookup[pairs.n1 as usize][pairs.n2 as usize] = i;
        }
        let clicks: Vec<Vec<f64>> = DetectorRole::ALL
            .iter()
            .map(|&r| (0..=DEFAULT_MAX_PHOTONS).map(|n| cfg.click_model.click(n, self.bank.get(r))).collect())
            .collect();
        let roles = cfg.scheme.roles();

        let [s1, s2] = cfg.sources;
        let sampler = PairSampler::new(&s1, &s2);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);

        let mut counts = 0u64;
        let mut truncated = 0u64;
        for _ in 0..cfg.pulses_per_point {
            let pairs = sampler.sample(&mut rng);
            if !pairs.within(cfg.max_pairs) {
                truncated += 1;
                continue;
            }
            let table = &tables[lookup[pairs.n1 as usize][pairs.n2 as usize]];
            let pattern = table.sample(rng.random());
            // Heralds are only interrogated once the 1310 nm pair has fired.
            if roles
                .iter()
                .all(|r| rng.random::<f64>() < clicks[r.index()][pattern[r.index()] as usize])
            {
                counts += 1;
            }
        }

        let n = cfg.pulses_per_point as f64;
        let p_hat = counts as f64 / n;
        let p_err = (counts.max(1) as f64 / n).min(1.0);
        let point = DipPoint {
            delay_um,
            rate_hz: p_hat * cfg.pulse_rate_hz,
            err_hz: (p_err * (1.0 - p_err) / n).sqrt() * cfg.pulse_rate_hz,
        };
        Ok((point, truncated))
    }
}

/// Closed-form delay scan. Errors are zero.
pub fn dip_curve_analytic(config: &ExperimentConfig) -> Result<DipCurve, RunError> {
    let engine = Engine::new(config)?;
    let points = config
        .delays_um
        .iter()
        .map(|&delay_um| {
            Ok(DipPoint {
                delay_um,
                rate_hz: engine.coincidence_probability_at(delay_um)? * config.pulse_rate_hz,
                err_hz: 0.0,
            })
        })
        .collect::<Result<_, RunError>>()?;
    Ok(DipCurve {
        points,
        metadata: Some(engine.metadata(CurveMode::Analytic, 0)?),
    })
}

/// Monte Carlo delay scan. Point `i` draws from the ChaCha8 stream
/// `(seed, i)`, so results do not depend on how points are scheduled.
pub fn dip_curve_mc(config: &ExperimentConfig) -> Result<DipCurve, RunError> {
    if config.pulses_per_point == 0 {
        return Err(RunError::Config("pulses_per_point must be at least 1".into()));
    }
    let engine = Engine::new(config)?;
    let results: Vec<(DipPoint, u64)> = config
        .delays_um
        .par_iter()
        .enumerate()
        .map(|(i, &d)| engine.mc_point(i, d))
        .collect::<Result<_, _>>()?;
    let truncated = results.iter().map(|(_, t)| t).sum();
    Ok(DipCurve {
        points: results.into_iter().map(|(p, _)| p).collect(),
        metadata: Some(engine.metadata(CurveMode::Mc, truncated)?),
    })
}
