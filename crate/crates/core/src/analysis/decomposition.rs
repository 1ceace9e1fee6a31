use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{energy, hardy_integral, ProblemSpec};
use crate::grid::Field;
use crate::operators::{PotentialClass, PotentialSpec};

/// `u_n = u_0 + Σ_k w^k(· - y_n^k)` for a family of shift sequences.
#[derive(Debug, Clone)]
pub struct ProfileBundle {
    pub u0: Field,
    pub profiles: Vec<Field>,
    /// `shifts[k][n]` is `y_n^k` in grid cells.
    pub shifts: Vec<Vec<Vec<i64>>>,
}

impl ProfileBundle {
    pub fn new(u0: Field, profiles: Vec<Field>, shifts: Vec<Vec<Vec<i64>>>) -> Result<Self> {
        if profiles.len() != shifts.len() {
            return Err(Error::InvalidShift(format!(
                "{} profiles but {} shift sequences",
                profiles.len(),
                shifts.len()
            )));
        }
        for w in &profiles {
            u0.same_grid(w)?;
        }
        if let Some(first) = shifts.first() {
            if shifts.iter().any(|s| s.len() != first.len()) {
                return Err(Error::InvalidShift("shift sequences differ in length".into()));
            }
        }
        let dim = u0.grid().dim();
        if shifts.iter().flatten().any(|y| y.len() != dim) {
            return Err(Error::InvalidShift(format!("shift vectors must have {dim} components")));
        }
        Ok(Self { u0, profiles, shifts })
    }

    /// Number of profiles `ℓ`.
    pub fn ell(&self) -> usize {
        self.profiles.len()
    }

    /// Length of the shift sequences (unbounded when `ℓ = 0`).
    pub fn len(&self) -> Option<usize> {
        self.shifts.first().map(Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Smallest pairwise distance at index `n` between the profile centers,
    /// `u_0` counted at the origin; infinite when there is nothing to compare.
    pub fn min_separation(&self, n: usize) -> f64 {
        let grid = self.u0.grid();
        let mut centers: Vec<Vec<f64>> = vec![vec![0.0; grid.dim()]];
        for s in &self.shifts {
            centers.push(
                s[n].iter()
                    .enumerate()
                    .map(|(a, &c)| c as f64 * grid.spacing(a))
                    .collect(),
            );
        }
        let mut best = f64::INFINITY;
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d2: f64 = (0..grid.dim())
                    .map(|a| {
                        let l = grid.lengths()[a];
                        let d = (centers[i][a] - centers[j][a]).rem_euclid(l);
                        let d = d.min(l - d);
                        d * d
                    })
                    .sum();
                best = best.min(d2.sqrt());
            }
        }
        best
    }

    /// `u_n`.
    pub fn synthesize(&self, n: usize) -> Result<Field> {
        let mut u = self.u0.clone();
        for (w, s) in self.profiles.iter().zip(&self.shifts) {
            let y = s
                .get(n)
                .ok_or_else(|| Error::InvalidShift(format!("no shift at index {n}")))?;
            u = u.add(&w.translated(y)?)?;
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub ell: usize,
    pub min_separation: f64,
    /// `𝒥(u_n)`.
    pub energy_un: f64,
    /// `𝒥(u_0)`.
    pub energy_u0: f64,
    /// `𝒥_∞(w^k)`: periodic part of the potential plus the Hardy term.
    pub profile_energies: Vec<f64>,
    /// `(μ/2) Σ_k ∫ |w^k|² / |x|^α`.
    pub hardy_correction: f64,
    /// `|𝒥(u_0)| + Σ|𝒥_∞(w^k)| + hardy_correction`.
    pub term_magnitude: f64,
    /// Deviation from the prediction including `hardy_correction`.
    pub deviation: f64,
    /// Deviation from the prediction without it.
    pub deviation_uncorrected: f64,
}

/// The translation-invariant limit problem `V_per - μ|x|^{-α}`.
pub fn limit_spec(spec: &ProblemSpec) -> Result<ProblemSpec> {
    let pot = spec.potential();
    let limit = match pot.class {
        PotentialClass::Coercive => {
            return Err(Error::UnsupportedClass {
                expected: "periodic, close_to_periodic or hardy",
                found: pot.class.name().to_string(),
            })
        }
        _ if pot.mu != 0.0 => PotentialSpec::hardy(pot.v_per, None, pot.mu),
        _ => PotentialSpec::periodic(pot.v_per),
    };
    spec.with_potential(limit)
}

/// Compares `𝒥(u_n)` with `𝒥(u_0) + Σ_k 𝒥_∞(w^k)` (plus the Hardy correction).
pub fn decomposition_energy_check(bundle: &ProfileBundle, n: usize, spec: &ProblemSpec) -> Result<DecompositionReport> {
    let grid = spec.grid();
    let limit = limit_spec(spec)?;
    let lattice = spec.with_potential(PotentialSpec::periodic(spec.potential().v_per))?;
    let step = lattice.translation_step();
    for seq in &bundle.shifts {
        let y = seq
            .get(n)
            .ok_or_else(|| Error::InvalidShift(format!("no shift at index {n}")))?;
        for (axis, &c) in y.iter().enumerate() {
            if 2 * c.unsigned_abs() as usize > grid.points()[axis] {
                return Err(Error::InvalidShift(format!(
                    "shift {c} on axis {axis} exceeds the torus half-width ({} cells)",
                    grid.points()[axis] / 2
                )));
            }
            match &step {
                Some(st) if c % st[axis] == 0 => {}
                Some(st) => {
                    return Err(Error::InvalidShift(format!(
                        "shift {c} on axis {axis} is not a multiple of the period ({} cells)",
                        st[axis]
                    )))
                }
                None => {
                    return Err(Error::InvalidShift(
                        "the periodic part has no lattice translations on this grid".into(),
                    ))
                }
            }
        }
    }

    let un = bundle.synthesize(n)?;
    let energy_un = energy(&un, spec)?.j;
    let energy_u0 = energy(&bundle.u0, spec)?.j;
    let mut profile_energies = Vec::with_capacity(bundle.ell());
    let mut hardy_correction = 0.0;
    for w in &bundle.profiles {
        profile_energies.push(energy(w, &limit)?.j);
        hardy_correction += 0.5 * hardy_integral(w, &limit)?;
    }
    let base = energy_u0 + profile_energies.iter().sum::<f64>();
    let deviation_uncorrected = (energy_un - base).abs();
    let deviation = (energy_un - (base + hardy_correction)).abs();
    let term_magnitude = energy_u0.abs() + profile_energies.iter().map(|e| e.abs()).sum::<f64>() + hardy_correction;
    Ok(DecompositionReport {
        n,
        ell: bundle.ell(),
        min_separation: bundle.min_separation(n),
        energy_un,
        energy_u0,
        profile_energies,
        hardy_correction,
        term_magnitude,
        deviation,
        deviation_uncorrected,
    })
}
