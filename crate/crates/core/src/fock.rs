//! Multimode bosonic Fock-state algebra.
//!
//! States are sparse superpositions of occupation-number vectors over a
//! fixed [`ModeRegistry`]. A mode is labelled by its spatial port plus a
//! temporal and a polarization sublabel; the beam splitter mixes the two
//! input ports and acts identically (block-diagonally) on every sublabel.
//!
//! Every basis vector `|n_1 … n_k⟩` is normalized, i.e. it stands for
//! `Π_j (a_j†)^{n_j} / √(n_j!) |0⟩`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default total photon-number truncation (three simultaneous pairs).
pub const DEFAULT_MAX_PHOTONS: u32 = 6;

/// Amplitudes below this magnitude are dropped from a state.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("photon number {requested} exceeds truncation {max}")]
    Truncation { requested: u32, max: u32 },
    #[error("mode {0} is not registered")]
    UnknownMode(ModeLabel),
    #[error("mode {0} is registered twice")]
    DuplicateMode(ModeLabel),
    #[error("output mode {0} is already populated before the beam splitter")]
    OccupiedOutput(ModeLabel),
    #[error("beam splitter ports must be distinct")]
    InvalidPorts,
    #[error("splitting ratio {0} outside [0, 1]")]
    InvalidSplitting(f64),
    #[error("cannot normalize a zero-norm state")]
    ZeroNorm,
    #[error("states are defined over different mode registries")]
    RegistryMismatch,
    #[error("malformed state text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Spatial {
    A,
    B,
    C,
    D,
    Herald1,
    Herald2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Temporal {
    Matched,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub spatial: Spatial,
    pub temporal: Temporal,
    pub polarization: Polarization,
}

impl ModeLabel {
    pub const fn new(spatial: Spatial, temporal: Temporal, polarization: Polarization) -> Self {
        Self {
            spatial,
            temporal,
            polarization,
        }
    }

    /// Matched temporal mode, horizontal polarization.
    pub const fn plain(spatial: Spatial) -> Self {
        Self::new(spatial, Temporal::Matched, Polarization::H)
    }

    pub const fn with_spatial(self, spatial: Spatial) -> Self {
        Self { spatial, ..self }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.spatial {
            Spatial::A => "a",
            Spatial::B => "b",
            Spatial::C => "c",
            Spatial::D => "d",
            Spatial::Herald1 => "herald1",
            Spatial::Herald2 => "herald2",
        };
        let t = match self.temporal {
            Temporal::Matched => "matched",
            Temporal::Orthogonal => "orthogonal",
        };
        let p = match self.polarization {
            Polarization::H => "H",
            Polarization::V => "V",
        };
        write!(f, "{s}/{t}/{p}")
    }
}

/// Ordered, duplicate-free list of modes. The order fixes the layout of
/// every [`FockOccupation`] built on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    modes: Vec<ModeLabel>,
}

impl ModeRegistry {
    pub fn new(modes: Vec<ModeLabel>) -> Result<Self, FockError> {
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(FockError::DuplicateMode(*m));
            }
        }
        Ok(Self { modes })
    }

    /// Ports a, b, c, d for every combination of the given sublabels, plus
    /// (optionally) one matched/H herald mode per source.
    pub fn interferometer(
        temporal: &[Temporal],
        polarization: &[Polarization],
        heralds: bool,
    ) -> Result<Self, FockError> {
        let mut modes = Vec::new();
        for spatial in [Spatial::A, Spatial::B, Spatial::C, Spatial::D] {
            for &t in temporal {
                for &p in polarization {
                    modes.push(ModeLabel::new(spatial, t, p));
                }
            }
        }
        if heralds {
            modes.push(ModeLabel::plain(Spatial::Herald1));
            modes.push(ModeLabel::plain(Spatial::Herald2));
        }
        Self::new(modes)
    }

    /// The registry used by the two-source experiment: matched and
    /// orthogonal temporal sublabels on a single polarization, plus heralds.
    pub fn two_source() -> Self {
        Self::interferometer(
            &[Temporal::Matched, Temporal::Orthogonal],
            &[Polarization::H],
            true,
        )
        .expect("static registry has unique labels")
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.modes.iter().position(|m| *m == label)
    }

    pub fn label(&self, index: usize) -> ModeLabel {
        self.modes[index]
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.modes
    }

    fn require(&self, label: ModeLabel) -> Result<usize, FockError> {
        self.index_of(label).ok_or(FockError::UnknownMode(label))
    }
}

/// Occupation numbers, one per registered mode, in registry order.
/// Ordering is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockOccupation(Vec<u32>);

impl FockOccupation {
    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn from_vec(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.0[mode]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Sparse pure state over a shared registry.
#[derive(Debug, Clone)]
pub struct PureState {
    registry: Arc<ModeRegistry>,
    max_photons: u32,
    prune: f64,
    terms: BTreeMap<FockOccupation, Complex64>,
}

impl PureState {
    pub fn vacuum(registry: Arc<ModeRegistry>) -> Self {
        Self::vacuum_with_truncation(registry, DEFAULT_MAX_PHOTONS)
    }

    pub fn vacuum_with_truncation(registry: Arc<ModeRegistry>, max_photons: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(FockOccupation::vacuum(registry.len()), Complex64::new(1.0, 0.0));
        Self {
            registry,
            max_photons,
            prune: DEFAULT_PRUNE_THRESHOLD,
            terms,
        }
    }

    /// Zero vector; useful as an accumulator.
    pub fn zero(registry: Arc<ModeRegistry>, max_photons: u32) -> Self {
        Self {
            registry,
            max_photons,
            prune: DEFAULT_PRUNE_THRESHOLD,
            terms: BTreeMap::new(),
        }
    }

    pub fn with_prune_threshold(mut self, prune: f64) -> Self {
        self.prune = prune;
        self.prune_small();
        self
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn max_photons(&self) -> u32 {
        self.max_photons
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Basis terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&FockOccupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occupation: &FockOccupation) -> Complex64 {
        self.terms.get(occupation).copied().unwrap_or_default()
    }

    /// Amplitude of the basis vector given as `(mode, count)` pairs; modes
    /// not listed are empty.
    pub fn amplitude_of(&self, occupied: &[(ModeLabel, u32)]) -> Result<Complex64, FockError> {
        let mut occ = vec![0; self.registry.len()];
        for &(label, n) in occupied {
            occ[self.registry.require(label)?] += n;
        }
        Ok(self.amplitude(&FockOccupation(occ)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(mut self) -> Result<Self, FockError> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(FockError::ZeroNorm);
        }
        for a in self.terms.values_mut() {
            *a /= n;
        }
        self.prune_small();
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for a in self.terms.values_mut() {
            *a *= factor;
        }
        self.prune_small();
        self
    }

    /// `self + factor · other`.
    pub fn add_scaled(&mut self, other: &PureState, factor: Complex64) -> Result<(), FockError> {
        if self.registry != other.registry {
            return Err(FockError::RegistryMismatch);
        }
        for (occ, amp) in &other.terms {
            *self.terms.entry(occ.clone()).or_default() += amp * factor;
        }
        self.prune_small();
        Ok(())
    }

    /// Insert (accumulate) a single basis term.
    pub fn add_term(&mut self, occupation: FockOccupation, amplitude: Complex64) -> Result<(), FockError> {
        if occupation.0.len() != self.registry.len() {
            return Err(FockError::Parse(format!(
                "occupation has {} entries, registry has {}",
                occupation.0.len(),
                self.registry.len()
            )));
        }
        let total = occupation.total();
        if total > self.max_photons {
            return Err(FockError::Truncation {
                requested: total,
                max: self.max_photons,
            });
        }
        *self.terms.entry(occupation).or_default() += amplitude;
        self.prune_small();
        Ok(())
    }

    /// Moves the photons of every mode to the mode with the mapped spatial
    /// label (same sublabels). Spatial labels absent from `map` stay put.
    pub fn relabel_spatial(&self, map: &[(Spatial, Spatial)]) -> Result<PureState, FockError> {
        let reg = &self.registry;
        let target: Vec<usize> = (0..reg.len())
            .map(|i| {
                let label = reg.label(i);
                match map.iter().find(|(from, _)| *from == label.spatial) {
                    Some(&(_, to)) => reg.require(label.with_spatial(to)),
                    None => Ok(i),
                }
            })
            .collect::<Result<_, _>>()?;
        let mut out = PureState::zero(reg.clone(), self.max_photons);
        for (occ, amp) in &self.terms {
            let mut moved = vec![0; reg.len()];
            for (i, &n) in occ.0.iter().enumerate() {
                moved[target[i]] += n;
            }
            *out.terms.entry(FockOccupation(moved)).or_default() += *amp;
        }
        out.prune_small();
        Ok(out)
    }

    /// Text form used by golden tests: one `amp_re amp_im | n1 n2 … nk`
    /// line per basis term, in lexicographic order.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for (occ, amp) in &self.terms {
            let occs: Vec<String> = occ.0.iter().map(u32::to_string).collect();
            out.push_str(&format!(
                "{} {} | {}\n",
                fmt_component(amp.re),
                fmt_component(amp.im),
                occs.join(" ")
            ));
        }
        out
    }

    pub fn from_debug_text(
        registry: Arc<ModeRegistry>,
        max_photons: u32,
        text: &str,
    ) -> Result<Self, FockError> {
        let mut state = PureState::zero(registry, max_photons);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (amp, occ) = line
                .split_once('|')
                .ok_or_else(|| FockError::Parse(format!("missing '|' in {line:?}")))?;
            let parts: Vec<f64> = amp
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| FockError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            let [re, im] = parts[..] else {
                return Err(FockError::Parse(format!("expected two amplitude fields in {line:?}")));
            };
            let occ: Vec<u32> = occ
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|e| FockError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            state.add_term(FockOccupation(occ), Complex64::new(re, im))?;
        }
        Ok(state)
    }

    fn prune_small(&mut self) {
        let prune = self.prune;
        self.terms.retain(|_, a| a.norm() >= prune);
    }
}

fn fmt_component(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Applies `(a_mode†)^power`. The result is not renormalized.
pub fn apply_creation(state: &PureState, mode: ModeLabel, power: u32) -> Result<PureState, FockError> {
    let idx = state.registry.require(mode)?;
    let mut out = PureState::zero(state.registry.clone(), state.max_photons);
    out.prune = state.prune;
    for (occ, amp) in &state.terms {
        let total = occ.total() + power;
        if total > state.max_photons {
            return Err(FockError::Truncation {
                requested: total,
                max: state.max_photons,
            });
        }
        let n = occ.0[idx];
        let ladder: f64 = (1..=power).map(|k| f64::from(n + k).sqrt()).product();
        let mut raised = occ.0.clone();
        raised[idx] += power;
        *out.terms.entry(FockOccupation(raised)).or_default() += amp * ladder;
    }
    out.prune_small();
    Ok(out)
}

/// Applies `(Σ_k c_k a_k†)^power`, the creation operator of a superposed
/// mode. Not renormalized.
pub fn apply_creation_superposed(
    state: &PureState,
    components: &[(ModeLabel, Complex64)],
    power: u32,
) -> Result<PureState, FockError> {
    let mut current = state.clone();
    for _ in 0..power {
        let mut next = PureState::zero(state.registry.clone(), state.max_photons);
        next.prune = state.prune;
        for &(mode, coeff) in components {
            let raised = apply_creation(&current, mode, 1)?;
            next.add_scaled(&raised, coeff)?;
        }
        current = next;
    }
    Ok(current)
}

/// Two-port lossless beam splitter with power transmissivity `T`:
/// `a† → √T c† + i√(1−T) d†`, `b† → i√(1−T) c† + √T d†`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    transmissivity: f64,
}

impl BeamSplitter {
    pub fn new(transmissivity: f64) -> Result<Self, FockError> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(FockError::InvalidSplitting(transmissivity));
        }
        Ok(Self { transmissivity })
    }

    pub fn balanced() -> Self {
        Self { transmissivity: 0.5 }
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    /// Coefficients `(to first output, to second output)` for each input.
    fn coefficients(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new(self.transmissivity.sqrt(), 0.0);
        let r = Complex64::new(0.0, (1.0 - self.transmissivity).sqrt());
        [[t, r], [r, t]]
    }
}

/// 50-50 beam splitter mapping `in_modes` onto `out_modes`.
pub fn apply_beamsplitter(
    state: &PureState,
    in_modes: (Spatial, Spatial),
    out_modes: (Spatial, Spatial),
) -> Result<PureState, FockError> {
    apply_beamsplitter_with(state, BeamSplitter::balanced(), in_modes, out_modes)
}

pub fn apply_beamsplitter_with(
    state: &PureState,
    splitter: BeamSplitter,
    in_modes: (Spatial, Spatial),
    out_modes: (Spatial, Spatial),
) -> Result<PureState, FockError> {
    let ports = [in_modes.0, in_modes.1, out_modes.0, out_modes.1];
    for (i, p) in ports.iter().enumerate() {
        if ports[..i].contains(p) {
            return Err(FockError::InvalidPorts);
        }
    }
    let reg = &state.registry;
    let coeffs = splitter.coefficients();

    // For every input-port mode: (input index, which input, output indices).
    let mut routes = Vec::new();
    for (i, label) in reg.labels().iter().enumerate() {
        let which = if label.spatial == in_modes.0 {
            0
        } else if label.spatial == in_modes.1 {
            1
        } else {
            continue;
        };
        routes.push((i, which, label));
    }

    let mut out = PureState::zero(reg.clone(), state.max_photons);
    out.prune = state.prune;
    for (occ, amp) in &state.terms {
        for (i, &n) in occ.0.iter().enumerate() {
            let label = reg.label(i);
            if n > 0 && (label.spatial == out_modes.0 || label.spatial == out_modes.1) {
                return Err(FockError::OccupiedOutput(label));
            }
        }

        // Work with raw operator monomials: amp / √(Π n!) · Π (a†)^n.
        let norm: f64 = occ.0.iter().map(|&n| factorial(n)).product();
        let mut base = occ.0.clone();
        for &(i, _, _) in &routes {
            base[i] = 0;
        }
        let mut monomials: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        monomials.insert(base, amp / norm.sqrt());

        for &(i, which, label) in &routes {
            let n = occ.0[i];
            if n == 0 {
                continue;
            }
            let first = reg.require(label.with_spatial(out_modes.0))?;
            let second = reg.require(label.with_spatial(out_modes.1))?;
            let [to_first, to_second] = coeffs[which];
            let mut expanded = BTreeMap::new();
            for (mono, c) in &monomials {
                for k in 0..=n {
                    let weight = to_first.powu(k) * to_second.powu(n - k) * binomial(n, k);
                    let mut m = mono.clone();
                    m[first] += k;
                    m[second] += n - k;
                    *expanded.entry(m).or_insert(Complex64::default()) += c * weight;
                }
            }
            monomials = expanded;
        }

        for (mono, c) in monomials {
            let fock_norm: f64 = mono.iter().map(|&n| factorial(n)).product();
            *out.terms.entry(FockOccupation(mono)).or_default() += c * fock_norm.sqrt();
        }
    }
    out.prune_small();
    Ok(out)
}

/// Assignment of modes to detector-like groups. Modes outside every group
/// are traced out.
#[derive(Debug, Clone)]
pub struct Grouping {
    group_of: Vec<Option<usize>>,
    groups: usize,
}

impl Grouping {
    pub fn new(
        registry: &ModeRegistry,
        groups: usize,
        assign: impl Fn(ModeLabel) -> Option<usize>,
    ) -> Self {
        let group_of = registry
            .labels()
            .iter()
            .map(|&l| assign(l).filter(|&g| g < groups))
            .collect();
        Self { group_of, groups }
    }

    /// One group per listed spatial port; sublabels are summed.
    pub fn by_spatial(registry: &ModeRegistry, ports: &[Spatial]) -> Self {
        Self::new(registry, ports.len(), |l| ports.iter().position(|&p| p == l.spatial))
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn pattern(&self, occupation: &FockOccupation) -> Vec<u32> {
        let mut pattern = vec![0; self.groups];
        for (i, &n) in occupation.0.iter().enumerate() {
            if let Some(g) = self.group_of[i] {
                pattern[g] += n;
            }
        }
        pattern
    }
}

/// Probability of each grouped photon-count pattern.
pub fn mode_probabilities(state: &PureState, grouping: &Grouping) -> BTreeMap<Vec<u32>, f64> {
    let mut probs = BTreeMap::new();
    for (occ, amp) in &state.terms {
        *probs.entry(grouping.pattern(occ)).or_insert(0.0) += amp.norm_sqr();
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode_registry() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::interferometer(&[Temporal::Matched], &[Polarization::H], false).unwrap())
    }

    fn a() -> ModeLabel {
        ModeLabel::plain(Spatial::A)
    }

    fn b() -> ModeLabel {
        ModeLabel::plain(Spatial::B)
    }

    fn close(x: Complex64, y: Complex64) -> bool {
        (x - y).norm() < 1e-12
    }

    #[test]
    fn creation_on_vacuum() {
        let reg = single_mode_registry();
        let s = apply_creation(&PureState::vacuum(reg), a(), 1).unwrap();
        assert_eq!(s.len(), 1);
        assert!(close(s.amplitude_of(&[(a(), 1)]).unwrap(), Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn creation_ladder_factor() {
        let reg = single_mode_registry();
        let one = apply_creation(&PureState::vacuum(reg), a(), 1).unwrap();
        let two = apply_creation(&one, a(), 1).unwrap();
        let amp = two.amplitude_of(&[(a(), 2)]).unwrap();
        assert!(close(amp, Complex64::new(2f64.sqrt(), 0.0)));
    }

    #[test]
    fn creation_power_matches_repeated_application() {
        let reg = single_mode_registry();
        let vac = PureState::vacuum(reg);
        let seed = apply_creation(&vac, b(), 1).unwrap();
        let twice = apply_creation(&apply_creation(&seed, a(), 1).unwrap(), a(), 1).unwrap();
        let once = apply_creation(&seed, a(), 2).unwrap();
        // (a†)² |0_a 1_b⟩ = √2 |2_a 1_b⟩ either way.
        assert!(close(
            twice.amplitude_of(&[(a(), 2), (b(), 1)]).unwrap(),
            Complex64::new(2f64.sqrt(), 0.0)
        ));
        assert_eq!(
            twice.normalize().unwrap().to_debug_text(),
            once.normalize().unwrap().to_debug_text()
        );
    }

    #[test]
    fn creation_beyond_truncation_is_an_error() {
        let reg = single_mode_registry();
        let vac = PureState::vacuum_with_truncation(reg, 2);
        let err = apply_creation(&vac, a(), 3).unwrap_err();
        assert_eq!(err, FockError::Truncation { requested: 3, max: 2 });
    }

    #[test]
    fn unknown_mode_is_an_error() {
        let reg = single_mode_registry();
        let err = apply_creation(&PureState::vacuum(reg), ModeLabel::plain(Spatial::Herald1), 1).unwrap_err();
        assert!(matches!(err, FockError::UnknownMode(_)));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = ModeRegistry::new(vec![a(), b(), a()]).unwrap_err();
        assert_eq!(err, FockError::DuplicateMode(a()));
    }

    #[test]
    fn vacuum_is_invariant_under_splitter() {
        let reg = single_mode_registry();
        let out = apply_beamsplitter(&PureState::vacuum(reg), (Spatial::A, Spatial::B), (Spatial::C, Spatial::D)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(close(out.amplitude_of(&[]).unwrap(), Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn two_photon_bunching() {
        let reg = single_mode_registry();
        let input = apply_creation(&apply_creation(&PureState::vacuum(reg), a(), 1).unwrap(), b(), 1).unwrap();
        let out = apply_beamsplitter(&input, (Spatial::A, Spatial::B), (Spatial::C, Spatial::D)).unwrap();
        let c = ModeLabel::plain(Spatial::C);
        let d = ModeLabel::plain(Spatial::D);
        let half = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        assert!(close(out.amplitude_of(&[(c, 2)]).unwrap(), half));
        assert!(close(out.amplitude_of(&[(d, 2)]).unwrap(), half));
        assert_eq!(out.amplitude_of(&[(c, 1), (d, 1)]).unwrap(), Complex64::default());
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn populated_output_rejected() {
        let reg = single_mode_registry();
        let input = apply_creation(&PureState::vacuum(reg), ModeLabel::plain(Spatial::C), 1).unwrap();
        let err = apply_beamsplitter(&input, (Spatial::A, Spatial::B), (Spatial::C, Spatial::D)).unwrap_err();
        assert!(matches!(err, FockError::OccupiedOutput(_)));
    }

    #[test]
    fn splitter_ports_must_differ() {
        let reg = single_mode_registry();
        let err = apply_beamsplitter(&PureState::vacuum(reg), (Spatial::A, Spatial::A), (Spatial::C, Spatial::D)).unwrap_err();
        assert_eq!(err, FockError::InvalidPorts);
    }

    #[test]
    fn missing_output_sublabel_rejected() {
        let reg = Arc::new(ModeRegistry::new(vec![a(), b(), ModeLabel::plain(Spatial::C)]).unwrap());
        let input = apply_creation(&PureState::vacuum(reg), a(), 1).unwrap();
        let err = apply_beamsplitter(&input, (Spatial::A, Spatial::B), (Spatial::C, Spatial::D)).unwrap_err();
        assert_eq!(err, FockError::UnknownMode(ModeLabel::plain(Spatial::D)));
    }

    #[test]
    fn grouping_traces_out_sublabels() {
        let reg = Arc::new(ModeRegistry::two_source());
        let c_m = ModeLabel::plain(Spatial::C);
        let d_o = ModeLabel::new(Spatial::D, Temporal::Orthogonal, Polarization::H);
        let s = apply_creation(&apply_creation(&PureState::vacuum(reg.clone()), c_m, 1).unwrap(), d_o, 1).unwrap();
        let probs = mode_probabilities(&s, &Grouping::by_spatial(&reg, &[Spatial::C, Spatial::D]));
        assert_eq!(probs.len(), 1);
        assert!((probs[&vec![1, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn debug_text_golden() {
        let reg = single_mode_registry();
        let input = apply_creation(&apply_creation(&PureState::vacuum(reg), a(), 1).unwrap(), b(), 1).unwrap();
        let out = apply_beamsplitter(&input, (Spatial::A, Spatial::B), (Spatial::C, Spatial::D)).unwrap();
        assert_eq!(
            out.to_debug_text(),
            "0.000000000000 0.707106781187 | 0 0 0 2\n0.000000000000 0.707106781187 | 0 0 2 0\n"
        );
    }

    #[test]
    fn zero_state_cannot_be_normalized() {
        let reg = single_mode_registry();
        assert_eq!(PureState::zero(reg, 6).normalize().unwrap_err(), FockError::ZeroNorm);
    }

    #[test]
    fn prune_threshold_drops_tiny_terms() {
        let reg = single_mode_registry();
        let mut s = PureState::vacuum(reg);
        s.add_term(FockOccupation::from_vec(vec![1, 0, 0, 0]), Complex64::new(1e-16, 0.0)).unwrap();
        assert_eq!(s.len(), 1);
    }
}
