//! Pulsed parametric down-conversion statistics.
//!
//! Each source emits `n` pairs per pulse with the thermal law
//! `p(n) = (1 − λ) λⁿ`, `λ = tanh² ζ`. The 1310 nm photons of source 1 and
//! source 2 enter ports `a` and `b` of the beam splitter; their 1550 nm
//! twins go to `herald1` and `herald2`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{
    apply_creation, apply_creation_superposed, FockError, ModeLabel, ModeRegistry, PureState, Spatial, Temporal,
};
use crate::optics::ModeAmplitudes;

/// Largest tolerated relative gap between `P` and `ζ²` in small-ζ mode.
pub const SMALL_ZETA_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdcError {
    #[error("squeezing parameter {0} must be finite and non-negative")]
    InvalidZeta(f64),
    #[error("pair probability {0} must lie in [0, 1)")]
    InvalidPairProbability(f64),
    #[error("small-ζ approximation violated: |P − ζ²|/ζ² = {0:.4}")]
    SmallZetaViolated(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// One down-conversion source, parameterized by its squeezing `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    zeta: f64,
}

impl SourceParams {
    pub fn from_zeta(zeta: f64) -> Result<Self, PdcError> {
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(PdcError::InvalidZeta(zeta));
        }
        Ok(Self { zeta })
    }

    /// Inverse of [`SourceParams::pair_probability`]: `ζ = artanh √P`.
    pub fn from_pair_probability(p: f64) -> Result<Self, PdcError> {
        if !(0.0..1.0).contains(&p) {
            return Err(PdcError::InvalidPairProbability(p));
        }
        Ok(Self { zeta: p.sqrt().atanh() })
    }

    pub fn off() -> Self {
        Self { zeta: 0.0 }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `Γ = tanh ζ`.
    pub fn gamma(&self) -> f64 {
        self.zeta.tanh()
    }

    /// `g = ln cosh ζ`.
    pub fn g(&self) -> f64 {
        self.zeta.cosh().ln()
    }

    /// Geometric ratio `λ = tanh² ζ`.
    pub fn lambda(&self) -> f64 {
        let t = self.gamma();
        t * t
    }

    /// Pair probability `P`, identified with `λ` in every rate formula.
    pub fn pair_probability(&self) -> f64 {
        self.lambda()
    }

    /// Checks `|P − ζ²| / ζ² < 5 %`. The vacuum source passes trivially.
    pub fn check_small_zeta(&self) -> Result<(), PdcError> {
        let z2 = self.zeta * self.zeta;
        if z2 == 0.0 {
            return Ok(());
        }
        let gap = (self.pair_probability() - z2).abs() / z2;
        if gap < SMALL_ZETA_TOLERANCE {
            Ok(())
        } else {
            Err(PdcError::SmallZetaViolated(gap))
        }
    }
}

/// Probability of exactly `n` pairs in one pulse.
pub fn pair_number_distribution(params: &SourceParams, n: u32) -> f64 {
    let lambda = params.lambda();
    (1.0 - lambda) * lambda.powi(n as i32)
}

/// Pairs emitted by the two sources in one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairCountSample {
    pub n1: u32,
    pub n2: u32,
}

impl PairCountSample {
    pub fn total(&self) -> u32 {
        self.n1 + self.n2
    }

    pub fn within(&self, max_pairs: u32) -> bool {
        self.total() <= max_pairs
    }

    /// Joint probability under independent thermal sources.
    pub fn probability(&self, s1: &SourceParams, s2: &SourceParams) -> f64 {
        pair_number_distribution(s1, self.n1) * pair_number_distribution(s2, self.n2)
    }
}

/// Independent geometric samplers for both sources.
#[derive(Debug, Clone, Copy)]
pub struct PairSampler {
    first: Geometric,
    second: Geometric,
}

impl PairSampler {
    pub fn new(s1: &SourceParams, s2: &SourceParams) -> Self {
        let geo = |s: &SourceParams| Geometric::new(1.0 - s.lambda()).expect("1 − λ lies in (0, 1]");
        Self {
            first: geo(s1),
            second: geo(s2),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PairCountSample {
        let n1 = self.first.sample(rng).min(u64::from(u32::MAX)) as u32;
        let n2 = self.second.sample(rng).min(u64::from(u32::MAX)) as u32;
        PairCountSample { n1, n2 }
    }
}

/// Draws one pulse's pair numbers. Not truncated: callers decide what to do
/// with pulses exceeding their pair budget.
pub fn sample_pair_counts<R: Rng + ?Sized>(s1: &SourceParams, s2: &SourceParams, rng: &mut R) -> PairCountSample {
    PairSampler::new(s1, s2).sample(rng)
}

/// Normalized state of one pair configuration: `n1` photons in `a`
/// (matched) with `n1` heralds, `n2` photons in `b` occupying the mode
/// described by `source2_mode` with `n2` heralds.
pub fn configuration_state(
    registry: &Arc<ModeRegistry>,
    max_photons: u32,
    pairs: PairCountSample,
    source2_mode: &ModeAmplitudes,
) -> Result<PureState, PdcError> {
    let b_mode = ModeLabel::plain(Spatial::B);
    let b_components = [
        (b_mode, source2_mode.matched),
        (
            ModeLabel {
                temporal: Temporal::Orthogonal,
                ..b_mode
            },
            source2_mode.orthogonal,
        ),
    ];
    let mut state = PureState::vacuum_with_truncation(registry.clone(), max_photons);
    state = apply_creation(&state, ModeLabel::plain(Spatial::A), pairs.n1)?;
    state = apply_creation(&state, ModeLabel::plain(Spatial::Herald1), pairs.n1)?;
    state = apply_creation_superposed(&state, &b_components, pairs.n2)?;
    state = apply_creation(&state, ModeLabel::plain(Spatial::Herald2), pairs.n2)?;
    Ok(state.normalize()?)
}

/// All pair configurations `(n1, n2)` with `n1 + n2 ≤ max_pairs`, ordered by
/// total then by `n1` descending.
pub fn configurations(max_pairs: u32) -> Vec<PairCountSample> {
    let mut out = Vec::new();
    for total in 0..=max_pairs {
        for n2 in 0..=total {
            out.push(PairCountSample { n1: total - n2, n2 });
        }
    }
    out
}

/// Coherent two-source state truncated at `max_pairs` pairs in total.
///
/// Each configuration carries the product of the single-source amplitudes
/// `Γⁿ / cosh ζ`; the truncated sum is then renormalized.
pub fn joint_input_state(
    registry: &Arc<ModeRegistry>,
    max_photons: u32,
    s1: &SourceParams,
    s2: &SourceParams,
    max_pairs: u32,
    source2_mode: &ModeAmplitudes,
) -> Result<PureState, PdcError> {
    if 2 * max_pairs > max_photons {
        return Err(FockError::Truncation {
            requested: 2 * max_pairs,
            max: max_photons,
        }
        .into());
    }
    let mut state = PureState::zero(registry.clone(), max_photons);
    for pairs in configurations(max_pairs) {
        let amp = s1.gamma().powi(pairs.n1 as i32) * s2.gamma().powi(pairs.n2 as i32)
            / (s1.zeta().cosh() * s2.zeta().cosh());
        if amp == 0.0 {
            continue;
        }
        let component = configuration_state(registry, max_photons, pairs, source2_mode)?;
        state.add_scaled(&component, Complex64::new(amp, 0.0))?;
    }
    Ok(state.normalize()?)
}
