//! Gaussian dip fitting and visibility bookkeeping.
//!
//! The dip model is `R(τ) = S (1 − V exp(−τ² / 2σ²))`, fitted by damped
//! Gauss-Newton with an analytic Jacobian.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{DipCurve, DipPoint};

/// `FWHM = 2√(2 ln 2) σ`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_FIT_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("fit did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<DipFit>),
    #[error("outside-dip rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("inside-dip rate {id} outside [0, {od}]")]
    RateOutOfRange { od: f64, id: f64 },
    #[error("accidental rate {accidental} must lie in [0, S = {s})")]
    AccidentalTooLarge { accidental: f64, s: f64 },
    #[error("subtracting {accidental} would make the dip center negative")]
    NegativeNetRate { accidental: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DipFit {
    pub s: f64,
    pub v: f64,
    pub sigma_tau_um: f64,
    pub fwhm_um: f64,
    /// Parameter covariance in `(S, V, σ)` order.
    pub covariance: [[f64; 3]; 3],
    /// `√(Σ w r²)`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

impl DipFit {
    pub fn rate_at(&self, tau_um: f64) -> f64 {
        dip_model(tau_um, self.s, self.v, self.sigma_tau_um)
    }

    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn report(&self) -> FitReport {
        FitReport {
            s: self.s,
            v: self.v,
            sigma_tau_um: self.sigma_tau_um,
            fwhm_um: self.fwhm_um,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// JSON form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub sigma_tau_um: f64,
    pub fwhm_um: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn dip_model(tau: f64, s: f64, v: f64, sigma: f64) -> f64 {
    s * (1.0 - v * gaussian(tau, sigma))
}

/// `∂R/∂(S, V, σ)`.
pub fn dip_jacobian(tau: f64, s: f64, v: f64, sigma: f64) -> [f64; 3] {
    let e = gaussian(tau, sigma);
    [1.0 - v * e, -s * e, -s * v * e * tau * tau / (sigma * sigma * sigma)]
}

fn gaussian(tau: f64, sigma: f64) -> f64 {
    (-tau * tau / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub s: f64,
    pub v: f64,
    pub sigma_tau_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once the largest relative parameter change drops below this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// Deterministic starting point: `S` from the outer quarter of the points
/// (largest `|τ|`), `V` from the lowest point, `σ` from where the data
/// cross half depth.
pub fn initial_guess(points: &[DipPoint]) -> InitialGuess {
    let mut by_distance: Vec<&DipPoint> = points.iter().collect();
    by_distance.sort_by(|a, b| b.delay_um.abs().total_cmp(&a.delay_um.abs()));
    let outer = (points.len() / 4).max(1);
    let s = by_distance[..outer].iter().map(|p| p.rate_hz).sum::<f64>() / outer as f64;

    let min = points.iter().map(|p| p.rate_hz).fold(f64::INFINITY, f64::min);
    let v = if s > 0.0 { (1.0 - min / s).clamp(0.01, 0.99) } else { 0.5 };

    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.delay_um), hi.max(p.delay_um)));
    let span = hi - lo;
    let half_depth = s * (1.0 - v / 2.0);

    // Walk outward on each side of τ = 0 until the rate recovers past half depth.
    let mut sorted: Vec<&DipPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.delay_um.total_cmp(&b.delay_um));
    let mut crossings = Vec::new();
    for side in [1.0, -1.0] {
        let mut prev: Option<&DipPoint> = None;
        let side_points: Vec<&DipPoint> = if side > 0.0 {
            sorted.iter().copied().filter(|p| p.delay_um >= 0.0).collect()
        } else {
            sorted.iter().rev().copied().filter(|p| p.delay_um <= 0.0).collect()
        };
        for p in side_points {
            if p.rate_hz >= half_depth {
                let tau = match prev {
                    Some(q) if p.rate_hz != q.rate_hz => {
                        q.delay_um + (half_depth - q.rate_hz) * (p.delay_um - q.delay_um) / (p.rate_hz - q.rate_hz)
                    }
                    _ => p.delay_um,
                };
                crossings.push(tau.abs());
                break;
            }
            prev = Some(p);
        }
    }
    let hwhm = crossings.iter().sum::<f64>() / crossings.len().max(1) as f64;
    let sigma = if hwhm > 0.0 {
        2.0 * hwhm / FWHM_PER_SIGMA
    } else {
        (span / 4.0).max(f64::MIN_POSITIVE)
    };
    InitialGuess {
        s,
        v,
        sigma_tau_um: sigma,
    }
}

/// Fits the dip model to a curve. Points are weighted by `1/err²` when
/// every error is positive, uniformly otherwise.
pub fn fit_dip(curve: &DipCurve, initial: Option<InitialGuess>) -> Result<DipFit, FitError> {
    fit_points(&curve.points, initial, FitOptions::default())
}

pub fn fit_points(points: &[DipPoint], initial: Option<InitialGuess>, options: FitOptions) -> Result<DipFit, FitError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !(p.delay_um.is_finite() && p.rate_hz.is_finite() && p.err_hz.is_finite())) {
        return Err(FitError::Degenerate("non-finite values".into()));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.delay_um), hi.max(p.delay_um)));
    if hi <= lo {
        return Err(FitError::Degenerate("all points share one delay".into()));
    }

    let weighted = points.iter().all(|p| p.err_hz > 0.0);
    let weights: Vec<f64> = points
        .iter()
        .map(|p| if weighted { 1.0 / (p.err_hz * p.err_hz) } else { 1.0 })
        .collect();
    let mean = points.iter().map(|p| p.rate_hz).sum::<f64>() / points.len() as f64;
    if mean <= 0.0 {
        return Err(FitError::Degenerate("no counts".into()));
    }

    let (rmin, rmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.rate_hz), hi.max(p.rate_hz)));
    if rmax - rmin <= 1e-12 * mean.abs() {
        let sigma = (hi - lo) / 4.0;
        return Ok(DipFit {
            s: mean,
            v: 0.0,
            sigma_tau_um: sigma,
            fwhm_um: FWHM_PER_SIGMA * sigma,
            covariance: [[f64::NAN; 3]; 3],
            residual: 0.0,
            iterations: 0,
            converged: true,
            warning: Some("flat curve: visibility pinned at 0".into()),
        });
    }

    let guess = initial.unwrap_or_else(|| initial_guess(points));
    let sigma_floor = 1e-9 * (hi - lo);
    let project = |p: Vector3<f64>| Vector3::new(p[0].max(f64::MIN_POSITIVE), p[1].clamp(0.0, 1.0), p[2].max(sigma_floor));
    let mut params = project(Vector3::new(guess.s, guess.v, guess.sigma_tau_um));

    let cost = |p: &Vector3<f64>| -> f64 {
        points
            .iter()
            .zip(&weights)
            .map(|(pt, w)| {
                let r = pt.rate_hz - dip_model(pt.delay_um, p[0], p[1], p[2]);
                w * r * r
            })
            .sum()
    };
    let normal_equations = |p: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (pt, w) in points.iter().zip(&weights) {
            let j = Vector3::from(dip_jacobian(pt.delay_um, p[0], p[1], p[2]));
            let r = pt.rate_hz - dip_model(pt.delay_um, p[0], p[1], p[2]);
            jtj += (j * j.transpose()) * *w;
            jtr += j * (w * r);
        }
        (jtj, jtr)
    };

    let mut damping = 1e-3;
    let mut current = cost(&params);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&params);
        let ridge = 1e-12 * jtj.trace().max(f64::MIN_POSITIVE) / 3.0;
        let mut accepted = None;
        loop {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] += damping * jtj[(i, i)].max(ridge);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                damping *= 10.0;
                if damping > 1e30 {
                    break;
                }
                continue;
            };
            let candidate = project(params + step);
            let change = relative_change(&params, &candidate);
            if change < options.tolerance {
                converged = true;
                let c = cost(&candidate);
                if c <= current {
                    params = candidate;
                    current = c;
                }
                break;
            }
            let c = cost(&candidate);
            if c <= current {
                accepted = Some((candidate, c));
                damping = (damping / 10.0).max(1e-15);
                break;
            }
            damping *= 10.0;
            if damping > 1e30 {
                // No descent direction left at working precision.
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
        match accepted {
            Some((candidate, c)) => {
                params = candidate;
                current = c;
            }
            None => break,
        }
    }

    let (jtj, _) = normal_equations(&params);
    let dof = points.len().saturating_sub(3).max(1) as f64;
    let scale = if weighted { 1.0 } else { current / dof };
    let covariance = jtj
        .try_inverse()
        .map(|m| {
            let m = m * scale;
            [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
        })
        .unwrap_or([[f64::NAN; 3]; 3]);

    let mut warning = None;
    if params[1] == 0.0 {
        warning = Some("visibility pinned at 0".to_string());
    }
    let fwhm = FWHM_PER_SIGMA * params[2];
    if params[1] > 0.0 && fwhm > hi - lo {
        warning = Some(format!("data span {:.3} μm is narrower than the fitted FWHM {fwhm:.3} μm", hi - lo));
    }

    let fit = DipFit {
        s: params[0],
        v: params[1],
        sigma_tau_um: params[2],
        fwhm_um: fwhm,
        covariance,
        residual: current.sqrt(),
        iterations,
        converged,
        warning,
    };
    if converged {
        Ok(fit)
    } else {
        Err(FitError::NotConverged(Box::new(fit)))
    }
}

fn relative_change(old: &Vector3<f64>, new: &Vector3<f64>) -> f64 {
    (0..3)
        .map(|i| (new[i] - old[i]).abs() / old[i].abs().max(new[i].abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Dip visibility `(I_max − I_min) / I_max`.
pub fn visibility(od_rate: f64, id_rate: f64) -> Result<f64, FitError> {
    if od_rate.is_nan() || od_rate <= 0.0 {
        return Err(FitError::NonPositiveRate(od_rate));
    }
    if !(0.0..=od_rate).contains(&id_rate) {
        return Err(FitError::RateOutOfRange { od: od_rate, id: id_rate });
    }
    Ok((od_rate - id_rate) / od_rate)
}

/// Rescales a raw fit for a constant accidental floor: `S − A` and
/// `V S / (S − A)`.
pub fn net_from_raw(fit_raw: &DipFit, accidental: f64) -> Result<DipFit, FitError> {
    if !(0.0..fit_raw.s).contains(&accidental) {
        return Err(FitError::AccidentalTooLarge {
            accidental,
            s: fit_raw.s,
        });
    }
    let s = fit_raw.s - accidental;
    let v = fit_raw.v * fit_raw.s / s;
    if v > 1.0 {
        return Err(FitError::NegativeNetRate { accidental });
    }
    Ok(DipFit { s, v, ..fit_raw.clone() })
}

/// Point-wise subtraction of a delay-independent floor, clamped at zero.
/// Errors are left untouched.
pub fn subtract_floor(curve: &DipCurve, accidental: f64) -> DipCurve {
    let points = curve
        .points
        .iter()
        .map(|p| DipPoint {
            rate_hz: (p.rate_hz - accidental).max(0.0),
            ..*p
        })
        .collect();
    let metadata = curve.metadata.clone().map(|mut m| {
        m.accidental_hz = 0.0;
        m
    });
    DipCurve { points, metadata }
}
