use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ProblemSpec;
use crate::grid::{accurate_sum, Field, TorusGrid};
use crate::ngsf::ComplexRecord;
use crate::operators::abs_pow;

/// Relative mass drift that aborts an evolution.
pub const MASS_DRIFT_LIMIT: f64 = 1e-6;
/// Steps between stored snapshots.
pub const SNAPSHOT_EVERY: usize = 10;

/// Complex amplitude `Ψ` on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: Arc<TorusGrid>,
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub omega: f64,
}

impl WaveState {
    pub fn from_real(u: &Field, omega: f64) -> Self {
        Self {
            grid: Arc::clone(u.grid()),
            psi: u.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            t: 0.0,
            omega,
        }
    }

    pub fn from_fn(grid: &Arc<TorusGrid>, omega: f64, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let coords = grid.node_coordinates();
        let n = grid.dim();
        Self {
            grid: Arc::clone(grid),
            psi: coords.chunks_exact(n).map(f).collect(),
            t: 0.0,
            omega,
        }
    }

    /// `∫ |Ψ|²`.
    pub fn mass(&self) -> f64 {
        accurate_sum(self.psi.iter().map(|z| z.norm_sqr())) * self.grid.cell_volume()
    }

    pub fn modulus(&self) -> Field {
        Field::from_values(&self.grid, self.psi.iter().map(|z| z.norm()).collect()).expect("finite amplitudes")
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn to_record(&self, alpha: f64) -> ComplexRecord {
        ComplexRecord {
            grid: Arc::clone(&self.grid),
            alpha,
            time: self.t,
            re: self.psi.iter().map(|z| z.re).collect(),
            im: self.psi.iter().map(|z| z.im).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Every [`SNAPSHOT_EVERY`]-th state, starting with the initial one and
    /// always ending with the final one.
    pub snapshots: Vec<WaveState>,
    pub steps: usize,
    /// Largest `|m(t)/m(0) - 1|` observed.
    pub mass_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &WaveState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Real nodewise rate of the phase step,
/// `V + ω - μ|x|^{-α} - Γ|Ψ|^{p-2} + K|Ψ|^{q-2}`.
fn phase_rate(spec: &ProblemSpec, omega: f64, i: usize, modulus: f64) -> f64 {
    let nl = spec.nonlinearity();
    let mut rate = spec.v().values()[i] + omega - spec.gamma().values()[i] * abs_pow(modulus, nl.p - 2.0)
        + spec.k().values()[i] * abs_pow(modulus, nl.q - 2.0);
    if let Some(w) = spec.hardy_field() {
        rate -= spec.mu() * w.values()[i];
    }
    rate
}

/// Largest step keeping every nodewise phase increment of the initial data
/// below `π`, so that the potential and nonlinearity are resolved in time.
pub fn stable_dt(initial: &WaveState, spec: &ProblemSpec) -> f64 {
    let max = initial
        .psi
        .iter()
        .enumerate()
        .map(|(i, z)| phase_rate(spec, initial.omega, i, z.norm()).abs())
        .fold(0.0, f64::max);
    if max == 0.0 {
        f64::INFINITY
    } else {
        PI / max
    }
}

fn phase_step(state: &mut WaveState, spec: &ProblemSpec, tau: f64) {
    let omega = state.omega;
    for (i, z) in state.psi.iter_mut().enumerate() {
        let rate = phase_rate(spec, omega, i, z.norm());
        *z *= Complex64::from_polar(1.0, -tau * rate);
    }
}

/// Strang splitting for `i∂_tΨ = (-Δ)^{α/2}Ψ + (V+ω)Ψ - μΨ/|x|^α - Γ|Ψ|^{p-2}Ψ + K|Ψ|^{q-2}Ψ`.
pub fn evolve_wave(initial: WaveState, spec: &ProblemSpec, t_final: f64, dt: f64) -> Result<Trajectory> {
    if **spec.grid() != *initial.grid {
        return Err(Error::GridMismatch);
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::DomainError(format!(
            "need dt > 0 and T >= 0, got dt={dt} T={t_final}"
        )));
    }
    if !initial.is_finite() {
        return Err(Error::NumericalOverflow {
            term: "initial amplitude",
        });
    }
    let grid = Arc::clone(&initial.grid);
    let steps = (t_final / dt).round() as usize;
    if ((steps as f64) * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::DomainError(format!(
            "T = {t_final} is not a whole number of steps dt = {dt}"
        )));
    }
    let symbol = grid.symbol(spec.alpha());
    let scale = 1.0 / grid.len() as f64;
    let propagator: Vec<Complex64> = symbol.iter().map(|&s| Complex64::from_polar(scale, -dt * s)).collect();
    let suggested = 0.5 * dt.min(stable_dt(&initial, spec));

    let mass0 = initial.mass();
    let mut state = initial;
    let mut snapshots = vec![state.clone()];
    let mut drift: f64 = 0.0;
    for step in 1..=steps {
        phase_step(&mut state, spec, 0.5 * dt);
        grid.dft_in_place(&mut state.psi, false);
        for (z, p) in state.psi.iter_mut().zip(&propagator) {
            *z *= p;
        }
        grid.dft_in_place(&mut state.psi, true);
        phase_step(&mut state, spec, 0.5 * dt);
        state.t = step as f64 * dt;

        let mass = state.mass();
        let d = if mass0 > 0.0 { (mass / mass0 - 1.0).abs() } else { mass };
        if !d.is_finite() || d > MASS_DRIFT_LIMIT {
            return Err(Error::UnstableStep {
                drift: d,
                suggested_dt: suggested,
            });
        }
        drift = drift.max(d);
        if step % SNAPSHOT_EVERY == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }
    Ok(Trajectory {
        snapshots,
        steps,
        mass_drift: drift,
    })
}

/// Evolves the real profile `u` as `Ψ(0) = u` with frequency `ω`.
pub fn evolve(initial: &Field, omega: f64, spec: &ProblemSpec, t_final: f64, dt: f64) -> Result<Trajectory> {
    evolve_wave(WaveState::from_real(initial, omega), spec, t_final, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandingWaveReport {
    pub t_final: f64,
    pub dt: f64,
    /// `max_t ‖|Ψ(t)| - u‖₂ / ‖u‖₂` over the stored snapshots.
    pub deviation: f64,
    /// The same with `dt/2`.
    pub deviation_half_dt: f64,
    pub mass_drift: f64,
    /// `max_t |arg ⟨Ψ(t), u⟩ + ωt|`: phase error against `e^{-iωt}`.
    pub phase_error: f64,
}

fn max_deviation(traj: &Trajectory, u: &Field) -> (f64, f64) {
    let nu = accurate_sum(u.values().iter().map(|v| v * v)).sqrt();
    let mut dev: f64 = 0.0;
    let mut phase: f64 = 0.0;
    for s in &traj.snapshots {
        let d = accurate_sum(s.psi.iter().zip(u.values()).map(|(z, v)| (z.norm() - v).powi(2))).sqrt();
        dev = dev.max(d / nu);
        let overlap: Complex64 = s.psi.iter().zip(u.values()).map(|(z, v)| z * v).sum();
        let expected = Complex64::from_polar(1.0, -s.omega * s.t);
        phase = phase.max((overlap * expected.conj()).arg().abs());
    }
    (dev, phase)
}

/// Evolves a stationary profile and measures how well `|Ψ(t)|` stays at `u`,
/// repeating with half the step for comparison.
pub fn standing_wave_check(
    u: &Field,
    omega: f64,
    spec: &ProblemSpec,
    t_final: f64,
    dt: f64,
) -> Result<StandingWaveReport> {
    let coarse = evolve(u, omega, spec, t_final, dt)?;
    let fine = evolve(u, omega, spec, t_final, 0.5 * dt)?;
    let (deviation, phase_error) = max_deviation(&coarse, u);
    let (deviation_half_dt, _) = max_deviation(&fine, u);
    Ok(StandingWaveReport {
        t_final,
        dt,
        deviation,
        deviation_half_dt,
        mass_drift: coarse.mass_drift.max(fine.mass_drift),
        phase_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{PeriodicProfile, PotentialSpec};

    fn linear(v0: f64, alpha: f64) -> ProblemSpec {
        let grid = Arc::new(TorusGrid::cubic(1, 2.0 * PI, 32).unwrap());
        ProblemSpec::linear(grid, alpha, PotentialSpec::periodic(PeriodicProfile::constant(v0))).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let s = linear(1.0, 0.5);
        let traj = evolve(&Field::zeros(s.grid()), 0.3, &s, 0.1, 0.01).unwrap();
        assert!(traj.final_state().psi.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(traj.snapshots.len(), 2);
    }

    #[test]
    fn plane_wave_phase() {
        let (v0, omega, alpha) = (0.7, 0.2, 0.5);
        let s = linear(v0, alpha);
        let k = 3.0;
        let init = WaveState::from_fn(s.grid(), omega, |x| Complex64::from_polar(1.0, k * x[0]));
        let traj = evolve_wave(init.clone(), &s, 1.0, 1e-3).unwrap();
        let phase = Complex64::from_polar(1.0, -(k.powf(alpha) + v0 + omega) * 1.0);
        let err = traj
            .final_state()
            .psi
            .iter()
            .zip(&init.psi)
            .map(|(z, z0)| (z - z0 * phase).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert_eq!(traj.snapshots.len(), 101);
    }

    #[test]
    fn rejects_bad_steps() {
        let s = linear(1.0, 0.5);
        let u = Field::constant(s.grid(), 1.0);
        assert!(evolve(&u, 0.0, &s, 1.0, 0.0).is_err());
        assert!(evolve(&u, 0.0, &s, 1.0, 0.3).is_err());
    }
}
