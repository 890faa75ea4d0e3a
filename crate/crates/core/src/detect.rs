//! Threshold detectors and 3-fold / 5-fold coincidence logic.
//!
//! Detectors cannot resolve photon number. A detector sees `n` photons and
//! clicks with probability `1 − (1 − η)ⁿ (1 − p_dark)`. Gating is purely
//! logical: the scheme decides which detectors must click on a pulse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("{name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("pattern has no entry for detector {0:?}")]
    MissingDetector(DetectorRole),
    #[error("negative rate {0}")]
    NegativeInput(f64),
    #[error("detector bank must hold one detector per role, in role order")]
    BankLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorRole {
    /// Ge APD on the first beam-splitter output.
    Ge1310,
    /// Gated InGaAs APD on the second beam-splitter output.
    InGaAs1310,
    /// Herald of source 1.
    InGaAs1550First,
    /// Herald of source 2.
    InGaAs1550Second,
}

impl DetectorRole {
    pub const ALL: [DetectorRole; 4] = [
        DetectorRole::Ge1310,
        DetectorRole::InGaAs1310,
        DetectorRole::InGaAs1550First,
        DetectorRole::InGaAs1550Second,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub role: DetectorRole,
    efficiency: f64,
    dark_prob: f64,
}

impl DetectorModel {
    pub fn new(role: DetectorRole, efficiency: f64, dark_prob: f64) -> Result<Self, DetectError> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(DetectError::InvalidProbability {
                name: "efficiency",
                value: efficiency,
            });
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(DetectError::InvalidProbability {
                name: "dark_prob",
                value: dark_prob,
            });
        }
        Ok(Self {
            role,
            efficiency,
            dark_prob,
        })
    }

    /// Lab values: Ge at 10 % with 40 kHz darks seen through a 1 ns clock
    /// window (4·10⁻⁵ per gate); InGaAs at 30 % with 10⁻⁴ per ns.
    pub fn lab_default(role: DetectorRole) -> Self {
        match role {
            DetectorRole::Ge1310 => Self {
                role,
                efficiency: 0.10,
                dark_prob: 4e-5,
            },
            _ => Self {
                role,
                efficiency: 0.30,
                dark_prob: 1e-4,
            },
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_prob(&self) -> f64 {
        self.dark_prob
    }

    /// Same detector with losses folded into its efficiency.
    pub fn attenuated(&self, transmission: f64) -> Result<Self, DetectError> {
        Self::new(self.role, self.efficiency * transmission, self.dark_prob)
    }

    pub fn without_darks(&self) -> Self {
        Self { dark_prob: 0.0, ..*self }
    }
}

/// Exact threshold click probability for `n` incident photons.
pub fn click_probability(n: u32, det: &DetectorModel) -> f64 {
    1.0 - (1.0 - det.efficiency).powi(n as i32) * (1.0 - det.dark_prob)
}

/// First-order (small η, small dark) click probability `n η + p_dark`,
/// capped at 1.
pub fn linear_click_probability(n: u32, det: &DetectorModel) -> f64 {
    (f64::from(n) * det.efficiency + det.dark_prob).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickModel {
    /// `1 − (1−η)ⁿ(1−p_dark)`.
    #[default]
    Threshold,
    /// The `η → 0` limit, `n η + p_dark`.
    Linear,
}

impl ClickModel {
    pub fn click(self, n: u32, det: &DetectorModel) -> f64 {
        match self {
            ClickModel::Threshold => click_probability(n, det),
            ClickModel::Linear => linear_click_probability(n, det),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Both 1310 nm detectors plus the clock.
    Threefold,
    /// Three-fold plus both heralds.
    Fivefold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceScheme {
    pub kind: SchemeKind,
    /// Coincidence window in ns; bookkeeping only.
    pub window_ns: f64,
}

impl CoincidenceScheme {
    pub fn threefold() -> Self {
        Self {
            kind: SchemeKind::Threefold,
            window_ns: 1.0,
        }
    }

    pub fn fivefold() -> Self {
        Self {
            kind: SchemeKind::Fivefold,
            window_ns: 1.0,
        }
    }

    /// Detectors that must click, 1310 nm pair first. The heralds of a
    /// five-fold are gated by the three-fold.
    pub fn roles(&self) -> &'static [DetectorRole] {
        match self.kind {
            SchemeKind::Threefold => &DetectorRole::ALL[..2],
            SchemeKind::Fivefold => &DetectorRole::ALL,
        }
    }
}

/// The four detectors of the setup, indexed by [`DetectorRole`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorBank {
    detectors: [DetectorModel; 4],
}

impl DetectorBank {
    pub fn new(detectors: [DetectorModel; 4]) -> Result<Self, DetectError> {
        if detectors.iter().zip(DetectorRole::ALL).any(|(d, r)| d.role != r) {
            return Err(DetectError::BankLayout);
        }
        Ok(Self { detectors })
    }

    pub fn lab_default() -> Self {
        Self {
            detectors: DetectorRole::ALL.map(DetectorModel::lab_default),
        }
    }

    pub fn get(&self, role: DetectorRole) -> &DetectorModel {
        &self.detectors[role.index()]
    }

    pub fn detectors(&self) -> &[DetectorModel; 4] {
        &self.detectors
    }

    pub fn attenuated(&self, transmission: f64) -> Result<Self, DetectError> {
        let mut out = *self;
        for d in &mut out.detectors {
            *d = d.attenuated(transmission)?;
        }
        Ok(out)
    }

    pub fn without_darks(&self) -> Self {
        Self {
            detectors: self.detectors.map(|d| d.without_darks()),
        }
    }
}

/// Photons arriving at each detector on one pulse.
pub type PhotonPattern = BTreeMap<DetectorRole, u32>;

/// Probability that every detector of `scheme` clicks, detectors acting
/// independently.
pub fn coincidence_probability(
    pattern: &PhotonPattern,
    scheme: &CoincidenceScheme,
    bank: &DetectorBank,
) -> Result<f64, DetectError> {
    coincidence_probability_with(ClickModel::Threshold, pattern, scheme, bank)
}

pub fn coincidence_probability_with(
    model: ClickModel,
    pattern: &PhotonPattern,
    scheme: &CoincidenceScheme,
    bank: &DetectorBank,
) -> Result<f64, DetectError> {
    scheme.roles().iter().try_fold(1.0, |acc, &role| {
        let n = *pattern.get(&role).ok_or(DetectError::MissingDetector(role))?;
        Ok(acc * model.click(n, bank.get(role)))
    })
}

/// Per-pulse probability of a coincidence in which at least one detector
/// fired on a dark count alone, treating detectors as uncorrelated:
/// `Π (s_i + d_i − s_i d_i) − Π s_i`, with `s_i` the signal-only click
/// probability of detector `i`.
pub fn accidental_rate(
    scheme: &CoincidenceScheme,
    bank: &DetectorBank,
    singles: &BTreeMap<DetectorRole, f64>,
) -> Result<f64, DetectError> {
    let mut with_darks = 1.0;
    let mut signal_only = 1.0;
    for &role in scheme.roles() {
        let s = *singles.get(&role).ok_or(DetectError::MissingDetector(role))?;
        if !(0.0..=1.0).contains(&s) {
            if s < 0.0 {
                return Err(DetectError::NegativeInput(s));
            }
            return Err(DetectError::InvalidProbability { name: "single", value: s });
        }
        let d = bank.get(role).dark_prob;
        with_darks *= s + d - s * d;
        signal_only *= s;
    }
    Ok((with_darks - signal_only).max(0.0))
}

/// `raw − accidental`, floored at zero.
pub fn subtract_accidentals(raw: f64, accidental: f64) -> Result<f64, DetectError> {
    if raw < 0.0 {
        return Err(DetectError::NegativeInput(raw));
    }
    if accidental < 0.0 {
        return Err(DetectError::NegativeInput(accidental));
    }
    Ok((raw - accidental).max(0.0))
}
