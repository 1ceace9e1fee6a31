use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::maximize_ray;
use crate::error::{Error, Result};
use crate::functional::{energy, power_difference, FiberingProfile, ProblemSpec};
use crate::grid::{Field, TorusGrid};
use crate::operators::{abs_pow, power_term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol_energy: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_energy: 1e-10,
            tol_grad: 1e-8,
            max_iter: 50_000,
            starts: 5,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_energy > 0.0 && self.tol_grad > 0.0) {
            return Err(Error::InvalidSpec("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.starts == 0 {
            return Err(Error::InvalidSpec("max_iter and starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartStatus {
    Converged,
    IterationCap,
    /// Line search could not produce a decrease before the tolerances were met.
    Stalled,
    /// The seed could not be projected onto the manifold.
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct StartOutcome {
    pub index: usize,
    pub status: StartStatus,
    pub c_value: Option<f64>,
    pub iterations: usize,
    pub grad_norm: Option<f64>,
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    #[serde(skip_serializing)]
    pub minimizer: Field,
    pub c_value: f64,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub nehari_residual_final: f64,
    /// Smallest `‖u‖` over every accepted manifold point of every start.
    pub beta_estimate: f64,
    /// Max minus min energy over the converged starts.
    pub multi_start_spread: f64,
    pub starts: Vec<StartOutcome>,
    /// Energies of the accepted iterates of the reported start.
    pub energy_history: Vec<f64>,
}

/// Gaussian seeds `exp(-|x-c|²/(2w²))`, center uniform in `[-L/4, L/4]^N`
/// and width uniform in `[0.5, 2]`.
pub fn gaussian_seeds(grid: &Arc<TorusGrid>, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let center: Vec<f64> = grid
                .lengths()
                .iter()
                .map(|&l| rng.random_range(-0.25 * l..=0.25 * l))
                .collect();
            let width: f64 = rng.random_range(0.5..=2.0);
            Field::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-0.5 * r2 / (width * width)).exp()
            })
        })
        .collect()
}

/// Shifts `u` by whole multiples of `step` so that its circular center of
/// mass lies as close to the origin as the step allows.
pub fn recenter(u: &Field, step: &[i64]) -> Result<Field> {
    let grid = u.grid();
    let mut idx = vec![0usize; grid.dim()];
    let mut shift = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let (mut c, mut s) = (0.0, 0.0);
        let l = grid.lengths()[axis];
        for (flat, &val) in u.values().iter().enumerate() {
            grid.unravel(flat, &mut idx);
            let theta = 2.0 * PI * grid.coordinate(axis, idx[axis]) / l;
            let w = val * val;
            c += w * theta.cos();
            s += w * theta.sin();
        }
        if c == 0.0 && s == 0.0 {
            shift.push(0);
            continue;
        }
        let center = s.atan2(c) * l / (2.0 * PI);
        let cells = center / grid.spacing(axis);
        let st = step[axis].max(1);
        shift.push(-((cells / st as f64).round() as i64) * st);
    }
    u.translated(&shift)
}

/// A manifold point with the operator and gradient data the descent needs.
struct State {
    u: Vec<f64>,
    /// `A u = (-Δ)^{α/2}u + Vu - μ|x|^{-α}u`.
    au: Vec<f64>,
    g: Vec<f64>,
    /// Preconditioned gradient `(s + (-Δ)^{α/2})^{-1} g`.
    d: Vec<f64>,
    ad: Vec<f64>,
    gnorm: f64,
}

struct Problem<'a> {
    spec: &'a ProblemSpec,
    grid: Arc<TorusGrid>,
    /// `V - μ|x|^{-α}`.
    local: Vec<f64>,
    shift: f64,
    has_k: bool,
}

impl<'a> Problem<'a> {
    fn new(spec: &'a ProblemSpec) -> Self {
        let grid = Arc::clone(spec.grid());
        let mut local = spec.v().values().to_vec();
        if let Some(w) = spec.hardy_field() {
            for (l, h) in local.iter_mut().zip(w.values()) {
                *l -= spec.mu() * h;
            }
        }
        let n = grid.len() as f64;
        let mean = spec.v().values().iter().sum::<f64>() / n;
        Self {
            spec,
            grid,
            local,
            shift: mean.max(1e-3),
            has_k: spec.k().values().iter().any(|&k| k != 0.0),
        }
    }

    fn sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.spec.weighted_sum(f)
    }

    fn state(&self, u: Vec<f64>) -> Result<State> {
        let field = Field::from_values(&self.grid, u)?;
        let mut au = self.spec.laplacian().apply(&field)?.into_values();
        let u = field.into_values();
        let (p, q) = (self.spec.nonlinearity().p, self.spec.nonlinearity().q);
        let (gm, km) = (self.spec.gamma().values(), self.spec.k().values());
        let mut g = vec![0.0; u.len()];
        for i in 0..u.len() {
            au[i] += self.local[i] * u[i];
            g[i] = au[i] - gm[i] * power_term(u[i], p) + km[i] * power_term(u[i], q);
        }
        let gf = Field::from_values(&self.grid, g)?;
        let d = self.spec.laplacian().resolvent(&gf, self.shift)?.into_values();
        let g = gf.into_values();
        // (s + (-Δ)^{α/2}) d = g
        let ad: Vec<f64> = (0..u.len())
            .map(|i| g[i] - self.shift * d[i] + self.local[i] * d[i])
            .collect();
        let gnorm = self.sum(|i| g[i] * d[i]).max(0.0).sqrt();
        if !gnorm.is_finite() {
            return Err(Error::NumericalOverflow { term: "gradient" });
        }
        Ok(State { u, au, g, d, ad, gnorm })
    }

    /// Profile of `u - s d` built from cached operator products.
    fn profile(&self, st: &State, s: f64, v: &[f64]) -> (FiberingProfile, f64) {
        let (au, ad) = (&st.au, &st.ad);
        let quadratic = self.sum(|i| (au[i] - s * ad[i]) * v[i]);
        let hardy = match self.spec.hardy_field() {
            Some(w) => {
                let w = w.values();
                self.spec.mu() * self.sum(|i| w[i] * v[i] * v[i])
            }
            None => 0.0,
        };
        let nl = self.spec.nonlinearity();
        let (gm, km) = (self.spec.gamma().values(), self.spec.k().values());
        let prof = FiberingProfile {
            norm_sq: quadratic + hardy,
            quadratic,
            focusing: self.sum(|i| gm[i] * abs_pow(v[i], nl.p)),
            defocusing: if self.has_k {
                self.sum(|i| km[i] * abs_pow(v[i], nl.q))
            } else {
                0.0
            },
            p: nl.p,
            q: nl.q,
        };
        (prof, quadratic + hardy)
    }

    /// `𝒥(t(u - s d)) - 𝒥(u)` without cancellation in the quadratic part.
    fn energy_change(&self, st: &State, s: f64, t: f64, w: &[f64]) -> f64 {
        let (u, d, au, ad) = (&st.u, &st.d, &st.au, &st.ad);
        let a = t - 1.0;
        let b = t * s;
        let quad = self.sum(|i| (a * au[i] - b * ad[i]) * ((t + 1.0) * u[i] - b * d[i]));
        let nl = self.spec.nonlinearity();
        let (gm, km) = (self.spec.gamma().values(), self.spec.k().values());
        let delta = |i: usize| a * u[i] - b * d[i];
        let foc = self.sum(|i| gm[i] * power_difference(u[i], w[i], delta(i), nl.p));
        let def = if self.has_k {
            self.sum(|i| km[i] * power_difference(u[i], w[i], delta(i), nl.q))
        } else {
            0.0
        };
        0.5 * quad - foc / nl.p + def / nl.q
    }
}

struct Run {
    u: Field,
    status: StartStatus,
    iterations: usize,
    gnorm: f64,
    beta: f64,
    history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

fn descend(problem: &Problem, seed: &Field, opts: &SolverOptions) -> Result<Run> {
    let spec = problem.spec;
    let start = super::project(seed, spec)?;
    let mut j = start.fibering_max;
    let mut beta = FiberingProfile::of(&start.projected, spec)?.norm_sq.sqrt();
    let mut st = problem.state(start.projected.into_values())?;
    let mut history = vec![j];
    let mut step = 1.0;
    let mut last_change = f64::INFINITY;
    let mut status = StartStatus::IterationCap;
    let mut iterations = 0;
    let n = st.u.len();
    let mut trial = vec![0.0; n];

    while iterations < opts.max_iter {
        if st.gnorm <= opts.tol_grad && last_change.abs() <= opts.tol_energy * (1.0 + j.abs()) {
            status = StartStatus::Converged;
            break;
        }
        if st.gnorm == 0.0 {
            status = StartStatus::Converged;
            break;
        }
        let slope = st.gnorm * st.gnorm;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            for ((t, u), d) in trial.iter_mut().zip(&st.u[..n]).zip(&st.d[..n]) {
                *t = u - s * d;
            }
            let (prof, _) = problem.profile(&st, s, &trial);
            if let Ok(ray) = maximize_ray(&prof) {
                let t = ray.t;
                for v in trial.iter_mut() {
                    *v *= t;
                }
                let dj = problem.energy_change(&st, s, t, &trial);
                if dj.is_finite() && dj <= -ARMIJO * s * slope {
                    accepted = Some((dj, prof.norm_sq * t * t));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((dj, norm_sq)) = accepted else {
            status = if st.gnorm <= opts.tol_grad {
                StartStatus::Converged
            } else {
                StartStatus::Stalled
            };
            break;
        };
        let next = problem.state(trial.clone())?;
        // Barzilai-Borwein step in the preconditioned metric.
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let dg = next.g[i] - st.g[i];
            num += (next.u[i] - st.u[i]) * dg;
            den += dg * (next.d[i] - st.d[i]);
        }
        let bb = num / den;
        step = if bb.is_finite() && bb > 0.0 {
            bb.clamp(1e-8, 1e4)
        } else {
            (2.0 * s).min(1e4)
        };
        j += dj;
        last_change = dj;
        beta = beta.min(norm_sq.max(0.0).sqrt());
        history.push(j);
        st = next;
        iterations += 1;
    }
    Ok(Run {
        u: Field::from_values(&problem.grid, st.u)?,
        status,
        iterations,
        gnorm: st.gnorm,
        beta,
        history,
    })
}

/// Nehari descent from every seed; the lowest converged energy wins.
pub fn minimize(spec: &ProblemSpec, opts: &SolverOptions, seeds: &[Field]) -> Result<GroundStateReport> {
    opts.validate()?;
    if seeds.is_empty() {
        return Err(Error::NoFeasibleStart);
    }
    for s in seeds {
        spec.check(s)?;
    }
    let problem = Problem::new(spec);
    let runs: Vec<Result<Run>> = seeds.par_iter().map(|s| descend(&problem, s, opts)).collect();

    let mut outcomes = Vec::with_capacity(runs.len());
    let mut finished: Vec<(usize, Run, f64)> = Vec::new();
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let c = energy(&run.u, spec)?.j;
                outcomes.push(StartOutcome {
                    index,
                    status: run.status,
                    c_value: Some(c),
                    iterations: run.iterations,
                    grad_norm: Some(run.gnorm),
                    beta: Some(run.beta),
                    message: None,
                });
                finished.push((index, run, c));
            }
            Err(e) => outcomes.push(StartOutcome {
                index,
                status: StartStatus::Failed,
                c_value: None,
                iterations: 0,
                grad_norm: None,
                beta: None,
                message: Some(e.to_string()),
            }),
        }
    }
    if finished.is_empty() {
        return Err(Error::NoFeasibleStart);
    }
    let converged: Vec<&(usize, Run, f64)> = finished
        .iter()
        .filter(|r| r.1.status == StartStatus::Converged)
        .collect();
    let pool: Vec<&(usize, Run, f64)> = if converged.is_empty() {
        finished.iter().collect()
    } else {
        converged.clone()
    };
    let best = pool
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .expect("non-empty pool");
    let spread = if converged.is_empty() {
        0.0
    } else {
        let hi = converged.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        let lo = converged.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        hi - lo
    };
    let beta = finished.iter().map(|r| r.1.beta).fold(f64::INFINITY, f64::min);

    let mut minimizer = best.1.u.clone();
    if let Some(step) = spec.translation_step() {
        minimizer = recenter(&minimizer, &step)?;
    }
    let rep = energy(&minimizer, spec)?;
    let report = GroundStateReport {
        minimizer,
        c_value: rep.j,
        iterations: best.1.iterations,
        grad_norm_final: best.1.gnorm,
        nehari_residual_final: rep.nehari_residual,
        beta_estimate: beta,
        multi_start_spread: spread,
        starts: outcomes,
        energy_history: best.1.history.clone(),
    };
    if converged.is_empty() {
        return Err(Error::NotConverged(Box::new(report)));
    }
    Ok(report)
}
