//! Lattice-translation identities, profile-decomposition energy splitting
//! and standing-wave time evolution.

mod decomposition;
mod evolve;

pub use decomposition::{decomposition_energy_check, limit_spec, DecompositionReport, ProfileBundle};
pub use evolve::{
    evolve, evolve_wave, stable_dt, standing_wave_check, StandingWaveReport, Trajectory, WaveState, MASS_DRIFT_LIMIT,
    SNAPSHOT_EVERY,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{energy, inner, norm_sq, ProblemSpec};
use crate::grid::Field;
use crate::nehari::project;

/// Relative tolerance of every identity in the translation suite.
pub const TRANSLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationReport {
    pub shift: Vec<i64>,
    /// `|⟨τ_k u, v⟩ - ⟨u, τ_{-k} v⟩| / (‖u‖‖v‖)`.
    pub adjoint_error: f64,
    /// `|‖τ_k u‖ - ‖u‖| / ‖u‖`.
    pub isometry_error: f64,
    /// `|𝒥(τ_k u) - 𝒥(u)| / |𝒥(u)|`.
    pub energy_error: f64,
    /// `|t(τ_k u) - t(u)| / t(u)`.
    pub manifold_error: f64,
    /// `τ_{-k} τ_k u == u` nodewise.
    pub inverse_exact: bool,
    pub passed: bool,
}

fn check_shift(k: &[i64], spec: &ProblemSpec) -> Result<()> {
    let step = spec.translation_step().ok_or_else(|| Error::UnsupportedClass {
        expected: "periodic (no localized part, mu = 0)",
        found: spec.potential().class.name().to_string(),
    })?;
    if k.len() != step.len() {
        return Err(Error::InvalidShift(format!(
            "shift has {} components on a {}-dimensional grid",
            k.len(),
            step.len()
        )));
    }
    for (axis, (&s, &st)) in k.iter().zip(&step).enumerate() {
        if s % st != 0 {
            return Err(Error::InvalidShift(format!(
                "shift {s} on axis {axis} is not a multiple of the period ({st} cells)"
            )));
        }
    }
    Ok(())
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Checks adjointness, isometry and `𝒥`/`𝒩` invariance of the lattice shift
/// `τ_k` (counted in grid cells, as in [`Field::translated`]).
pub fn translation_suite(u: &Field, v: &Field, k: &[i64], spec: &ProblemSpec) -> Result<TranslationReport> {
    check_shift(k, spec)?;
    let minus: Vec<i64> = k.iter().map(|s| -s).collect();
    let tu = u.translated(k)?;
    let tmv = v.translated(&minus)?;

    let nu = norm_sq(u, spec)?.sqrt();
    let nv = norm_sq(v, spec)?.sqrt();
    let adjoint_error = rel(inner(&tu, v, spec)?, inner(u, &tmv, spec)?, nu * nv);
    let ntu = norm_sq(&tu, spec)?.sqrt();
    let isometry_error = rel(ntu, nu, nu);
    let ju = energy(u, spec)?.j;
    let energy_error = rel(energy(&tu, spec)?.j, ju, ju.abs());
    let t_u = project(u, spec)?.t_star;
    let manifold_error = rel(project(&tu, spec)?.t_star, t_u, t_u);
    let inverse_exact = tu.translated(&minus)? == *u;

    let passed = [adjoint_error, isometry_error, energy_error, manifold_error]
        .iter()
        .all(|e| *e <= TRANSLATION_TOL)
        && inverse_exact;
    Ok(TranslationReport {
        shift: k.to_vec(),
        adjoint_error,
        isometry_error,
        energy_error,
        manifold_error,
        inverse_exact,
        passed,
    })
}
