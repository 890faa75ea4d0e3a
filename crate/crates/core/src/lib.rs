//! Simulation and analysis of Hong-Ou-Mandel interference between photons
//! from two independent pulsed down-conversion sources.
//!
//! The pipeline runs [`pdc`] (pair statistics) → [`optics`]
//! (distinguishability) → [`fock`] (beam-splitter interference) →
//! [`detect`] (threshold detectors, 3-fold / 5-fold coincidences), driven by
//! [`runner`] over a delay scan and fitted by [`analysis`].

pub mod analysis;
pub mod detect;
pub mod fock;
pub mod optics;
pub mod pdc;
pub mod runner;

pub use analysis::{fit_dip, DipFit, FitReport};
pub use runner::{dip_curve_analytic, dip_curve_mc, DipCurve, DipPoint, ExperimentConfig};
