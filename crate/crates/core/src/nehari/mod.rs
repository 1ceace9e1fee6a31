//! Projection onto the Nehari manifold `𝒩 = {u ≠ 0 : 𝒥'(u)(u) = 0}`,
//! ground-state minimization and the manifold diagnostics.

mod diagnostics;
mod solver;

pub use diagnostics::{
    dichotomy_probe, escape_sweep, lipschitz_check, DichotomyOptions, DichotomyReport, DichotomyStatus, EscapePoint,
    LipschitzReport,
};
pub use solver::{gaussian_seeds, minimize, recenter, GroundStateReport, SolverOptions, StartOutcome, StartStatus};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{energy, FiberingProfile, ProblemSpec};
use crate::grid::Field;
use crate::inequalities::golden_max;

/// Largest fibering scale searched before giving up.
pub const T_MAX: f64 = 1e8;
/// Smallest fibering scale searched.
pub const T_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionResult {
    /// Maximizer `t(u)` of `t ↦ 𝒥(tu)`.
    pub t_star: f64,
    #[serde(skip)]
    pub projected: Field,
    /// `𝒥'(t(u)u)(t(u)u)`.
    pub residual: f64,
    /// `𝒥(t(u)u)`.
    pub fibering_max: f64,
    /// Bracket around `t_star` found before refinement.
    pub bracket: (f64, f64),
}

/// Ray maximizer for an already-evaluated profile.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayMax {
    pub t: f64,
    pub bracket: (f64, f64),
}

pub(crate) fn maximize_ray(profile: &FiberingProfile) -> Result<RayMax> {
    if !(profile.quadratic > 0.0 && profile.focusing > 0.0) {
        return Err(Error::NoNehariIntersection { t_max: T_MAX });
    }
    let d = |t: f64| profile.derivative(t);
    // Doubling bracket: d > 0 at `lo`, d <= 0 at `hi`.
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    if d(1.0) > 0.0 {
        while d(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > T_MAX {
                return Err(Error::NoNehariIntersection { t_max: T_MAX });
            }
        }
    } else {
        while d(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < T_MIN {
                return Err(Error::NoNehariIntersection { t_max: T_MAX });
            }
        }
    }
    let bracket = (lo, hi);
    // Golden section resolves the peak to ~sqrt(eps); a safeguarded Newton
    // iteration on the derivative then pins the root.
    let (mut t, _) = golden_max(|t| profile.value(t), lo, hi, 1e-7);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        let dt = d(t);
        if dt == 0.0 {
            break;
        }
        if dt > 0.0 {
            a = t;
        } else {
            b = t;
        }
        let curvature = profile.second_derivative(t);
        let mut next = t - dt / curvature;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let done = (next - t).abs() <= 1e-15 * t;
        t = next;
        if done || (b - a) <= 4.0 * f64::EPSILON * t {
            break;
        }
    }
    Ok(RayMax { t, bracket })
}

/// Fibering projection `m̂(u) = t(u) u`.
pub fn project(u: &Field, spec: &ProblemSpec) -> Result<ProjectionResult> {
    if u.is_zero() {
        return Err(Error::DomainError("the zero field has no Nehari projection".into()));
    }
    let profile = FiberingProfile::of(u, spec)?;
    let ray = maximize_ray(&profile)?;
    let projected = u.scaled(ray.t);
    let report = energy(&projected, spec)?;
    Ok(ProjectionResult {
        t_star: ray.t,
        projected,
        residual: report.nehari_residual,
        fibering_max: report.j,
        bracket: ray.bracket,
    })
}
