//! Task execution and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nehari_core::analysis::{
    decomposition_energy_check, evolve, standing_wave_check, DecompositionReport, ProfileBundle, StandingWaveReport,
};
use nehari_core::functional::{energy, EnergyReport};
use nehari_core::inequalities::{epsilon_bound_for, hardy_check, HardyConstants, HardyReport};
use nehari_core::nehari::{dichotomy_probe, gaussian_seeds, DichotomyOptions, DichotomyStatus};
use nehari_core::ngsf::{load_field, save_field, save_trajectory};
use nehari_core::{minimize, Error as CoreError, Field, GroundStateReport, PotentialClass, ProblemSpec, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, Task};

/// Outcome of a task that completed without an operational error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The computation finished but could not reach a decision (iteration
    /// cap, inconclusive dichotomy, inequality violation).
    Inconclusive(String),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Inconclusive(_) => 2,
        }
    }

    fn merge(self, other: Status) -> Status {
        match self {
            Status::Success => other,
            s => s,
        }
    }
}

/// Output directory plus the list of files written so far.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    fn field(&mut self, name: &str, u: &Field, alpha: f64) -> Result<()> {
        let path = self.path(name);
        save_field(&path, u, alpha).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

#[derive(Serialize)]
struct Versions {
    nehari_cli: &'static str,
    nehari_core: &'static str,
}

#[derive(Serialize)]
struct Timing {
    total_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    task: &'a str,
    versions: Versions,
    seed: u64,
    threads: usize,
    config: &'a RunConfig,
    derived: crate::config::Derived,
    outputs: Vec<String>,
    status: String,
    exit_code: i32,
    notes: Vec<&'static str>,
    timing: Timing,
}

/// Runs `task` and writes the manifest last. Reports other than the
/// manifest contain no timing information, so identical configurations
/// give identical report bytes.
pub fn execute(task: Task, cfg: &RunConfig) -> Result<Status> {
    let start = Instant::now();
    let mut out = Artifacts::new(&cfg.output.directory)?;
    let mut notes = Vec::new();
    let status = match task {
        Task::Solve => solve(cfg, &mut out)?,
        Task::Validate => validate(cfg, &mut out)?,
        Task::Dichotomy => dichotomy(cfg, &mut out)?,
        Task::Evolve => {
            notes.push(
                "evolution uses i dPsi/dt = (-Delta)^{alpha/2} Psi + (V + omega) Psi - ...; \
                 a stationary u evolves as exp(-i omega t) u",
            );
            run_evolve(cfg, &mut out)?
        }
        Task::Decompose => decompose(cfg, &mut out)?,
        Task::Sweep => sweep(cfg, &mut out)?,
    };
    let manifest = Manifest {
        task: task.name(),
        versions: Versions {
            nehari_cli: env!("CARGO_PKG_VERSION"),
            nehari_core: nehari_core::VERSION,
        },
        seed: cfg.solver.seed,
        threads: rayon::current_num_threads(),
        config: cfg,
        derived: cfg.derived(),
        outputs: out.written().to_vec(),
        status: match &status {
            Status::Success => "success".into(),
            Status::Inconclusive(msg) => format!("inconclusive: {msg}"),
        },
        exit_code: status.exit_code(),
        notes,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    out.json("manifest.json", &manifest)?;
    Ok(status)
}

/// Solves the ground-state problem; a report is returned even at the
/// iteration cap.
fn ground_state(spec: &ProblemSpec, cfg: &RunConfig) -> Result<(GroundStateReport, Status)> {
    let seeds = gaussian_seeds(spec.grid(), cfg.solver.starts, cfg.solver.seed);
    match minimize(spec, &cfg.solver, &seeds) {
        Ok(rep) => Ok((rep, Status::Success)),
        Err(CoreError::NotConverged(rep)) => {
            let msg = format!(
                "no start converged within {} iterations (grad norm {:.3e})",
                cfg.solver.max_iter, rep.grad_norm_final
            );
            Ok((*rep, Status::Inconclusive(msg)))
        }
        Err(e) => Err(e).context("ground-state solve failed"),
    }
}

fn write_ground_state(out: &mut Artifacts, name: &str, rep: &GroundStateReport, cfg: &RunConfig) -> Result<()> {
    out.json(&format!("{name}.json"), rep)?;
    out.csv(
        &format!("{name}_history.csv"),
        "iteration,J",
        rep.energy_history.iter().enumerate().map(|(i, j)| format!("{i},{j:e}")),
    )?;
    if cfg.output.fields {
        out.field(&format!("{name}.ngsf"), &rep.minimizer, cfg.problem.alpha)?;
    }
    Ok(())
}

fn solve(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let spec = cfg.problem.spec()?;
    let (rep, status) = ground_state(&spec, cfg)?;
    write_ground_state(out, "ground_state", &rep, cfg)?;
    let energy: EnergyReport = energy(&rep.minimizer, &spec)?;
    out.csv("ground_state_energy.csv", EnergyReport::CSV_HEADER, [energy.csv_row()])?;
    Ok(status)
}

/// `validate.fields` sums of one to three Gaussian bumps with random sign.
fn corpus(grid: &Arc<TorusGrid>, cfg: &RunConfig) -> Vec<Field> {
    let v = &cfg.validate;
    let length = cfg.problem.box_length;
    let spread = v.center_fraction * length;
    let [w0, w1] = v.width_fraction.map(|f| f * length);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    (0..v.fields)
        .map(|_| {
            let count = rng.random_range(1..=3);
            let bumps: Vec<(f64, Vec<f64>, f64)> = (0..count)
                .map(|_| {
                    let sign = if rng.random_bool(0.25) { -1.0 } else { 1.0 };
                    let amp = sign * rng.random_range(0.3..=1.5);
                    let center = (0..grid.dim()).map(|_| rng.random_range(-spread..=spread)).collect();
                    (amp, center, rng.random_range(w0..=w1))
                })
                .collect();
            Field::from_fn(grid, |x| {
                bumps
                    .iter()
                    .map(|(a, c, w)| {
                        let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci).powi(2)).sum();
                        a * (-0.5 * r2 / (w * w)).exp()
                    })
                    .sum()
            })
        })
        .collect()
}

#[derive(Serialize)]
struct EpsilonRow {
    epsilon: f64,
    c_epsilon: f64,
    gamma_max: f64,
    holds: bool,
}

#[derive(Serialize)]
struct NormRow {
    norm_sq: f64,
    mu_norm_sq: f64,
    lower: f64,
    passed: bool,
}

#[derive(Serialize)]
struct ValidateSummary {
    fields: usize,
    hardy_constant: f64,
    hardy_violations: usize,
    smallest_hardy_ratio: f64,
    norm_equivalence_d: Option<f64>,
    norm_equivalence_violations: Option<usize>,
    epsilon_bounds: Vec<EpsilonRow>,
}

fn validate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let spec = cfg.problem.spec()?;
    let grid = spec.grid();
    let constants = HardyConstants::new(grid.dim(), cfg.problem.alpha)?;
    let fields = corpus(grid, cfg);
    let reports: Vec<HardyReport> = fields
        .par_iter()
        .map(|u| hardy_check(u, &constants))
        .collect::<nehari_core::Result<_>>()
        .context("Hardy check failed")?;
    out.csv(
        "hardy.csv",
        &format!("field,{}", HardyReport::CSV_HEADER),
        reports.iter().enumerate().map(|(i, r)| format!("{i},{}", r.csv_row())),
    )?;
    let hardy_violations = reports.iter().filter(|r| !r.passed).count();
    let smallest = reports
        .iter()
        .filter(|r| r.rhs > 0.0)
        .map(|r| r.lhs / (r.constant * r.rhs))
        .fold(f64::INFINITY, f64::min);

    let (d, norm_violations) = if cfg.problem.potential.class == PotentialClass::Hardy {
        let d = constants.d(spec.mu());
        let rows: Vec<NormRow> = fields
            .par_iter()
            .map(|u| {
                energy(u, &spec).map(|e| NormRow {
                    norm_sq: e.norm_sq,
                    mu_norm_sq: e.mu_norm_sq(),
                    lower: d * e.norm_sq,
                    passed: d * e.norm_sq <= e.mu_norm_sq() && e.mu_norm_sq() <= e.norm_sq,
                })
            })
            .collect::<nehari_core::Result<_>>()?;
        out.csv(
            "norm_equivalence.csv",
            "field,norm_sq,mu_norm_sq,lower,passed",
            rows.iter()
                .enumerate()
                .map(|(i, r)| format!("{i},{:e},{:e},{:e},{}", r.norm_sq, r.mu_norm_sq, r.lower, r.passed)),
        )?;
        (Some(d), Some(rows.iter().filter(|r| !r.passed).count()))
    } else {
        (None, None)
    };

    let nl = &cfg.problem.nonlinearity;
    let epsilon_bounds = cfg
        .validate
        .epsilons
        .iter()
        .map(|&eps| {
            let c = epsilon_bound_for(nl, eps)?;
            Ok(EpsilonRow {
                epsilon: eps,
                c_epsilon: c,
                gamma_max: nl.gamma.max(),
                holds: c <= nl.gamma.max() * (1.0 + 1e-10),
            })
        })
        .collect::<nehari_core::Result<Vec<_>>>()?;
    let eps_failures = epsilon_bounds.iter().filter(|r| !r.holds).count();

    out.json(
        "validate.json",
        &ValidateSummary {
            fields: fields.len(),
            hardy_constant: constants.h_n_alpha.unwrap_or(constants.mu_star),
            hardy_violations,
            smallest_hardy_ratio: smallest,
            norm_equivalence_d: d,
            norm_equivalence_violations: norm_violations,
            epsilon_bounds,
        },
    )?;
    let total = hardy_violations + norm_violations.unwrap_or(0) + eps_failures;
    Ok(if total == 0 {
        Status::Success
    } else {
        Status::Inconclusive(format!("{total} inequality violations"))
    })
}

fn dichotomy(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let full = cfg.problem.spec()?;
    let periodic = full.with_potential(cfg.problem.potential.periodic_part())?;
    let opts = DichotomyOptions {
        solver: cfg.solver,
        margin_factor: cfg.dichotomy.margin_factor,
        escape_tolerance: cfg.dichotomy.escape_tolerance,
        coarse_check: cfg.dichotomy.coarse_check,
    };
    let rep = match dichotomy_probe(&full, &periodic, &opts) {
        Ok(r) => r,
        Err(CoreError::NotConverged(r)) => {
            out.json("dichotomy_partial.json", &*r)?;
            return Ok(Status::Inconclusive(
                "a ground-state solve hit the iteration cap".into(),
            ));
        }
        Err(e) => return Err(e).context("dichotomy probe failed"),
    };
    out.json("dichotomy.json", &rep)?;
    out.csv(
        "escape_curve.csv",
        "shift,energy",
        rep.escape_curve.iter().map(|p| format!("{},{:e}", p.shift, p.energy)),
    )?;
    if cfg.output.fields {
        out.field("full.ngsf", &rep.full.minimizer, cfg.problem.alpha)?;
        out.field("periodic.ngsf", &rep.periodic.minimizer, cfg.problem.alpha)?;
    }
    Ok(match rep.status {
        DichotomyStatus::Confirmed => Status::Success,
        DichotomyStatus::Inconclusive => Status::Inconclusive(format!(
            "gap c_per - c = {:.3e} against margin {:.3e}",
            rep.gap, rep.margin
        )),
    })
}

#[derive(Serialize)]
struct EvolveReport {
    omega: f64,
    t_final: f64,
    dt: f64,
    steps: usize,
    snapshots: usize,
    mass_drift: f64,
    standing_wave: StandingWaveReport,
}

fn run_evolve(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let spec = cfg.problem.spec()?;
    let e = &cfg.evolve;
    let (u, status) = match &e.initial {
        Some(path) => {
            let (u, alpha) = load_field(path).with_context(|| format!("cannot load {}", path.display()))?;
            if **u.grid() != **spec.grid() {
                bail!("initial field {} does not live on the configured grid", path.display());
            }
            if alpha != cfg.problem.alpha {
                bail!(
                    "initial field was written for alpha = {alpha}, config has {}",
                    cfg.problem.alpha
                );
            }
            (u, Status::Success)
        }
        None => {
            let (rep, status) = ground_state(&spec, cfg)?;
            write_ground_state(out, "ground_state", &rep, cfg)?;
            if status != Status::Success {
                return Ok(status);
            }
            (rep.minimizer, status)
        }
    };
    let traj = evolve(&u, e.omega, &spec, e.t_final, e.dt).context("evolution failed")?;
    if cfg.output.fields {
        let records: Vec<_> = traj.snapshots.iter().map(|s| s.to_record(cfg.problem.alpha)).collect();
        let path = out.path("trajectory.ngsf");
        save_trajectory(&path, &records).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let sw = standing_wave_check(&u, e.omega, &spec, e.t_final, e.dt).context("standing-wave check failed")?;
    out.json(
        "evolve.json",
        &EvolveReport {
            omega: e.omega,
            t_final: e.t_final,
            dt: e.dt,
            steps: traj.steps,
            snapshots: traj.snapshots.len(),
            mass_drift: traj.mass_drift,
            standing_wave: sw,
        },
    )?;
    Ok(status)
}

fn gaussian_bump(grid: &Arc<TorusGrid>, width: f64, amplitude: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        amplitude * (-0.5 * r2 / (width * width)).exp()
    })
}

#[derive(Serialize)]
struct DecomposeSummary {
    reports: Vec<DecompositionReport>,
    /// Deviation strictly decreasing along increasing separations.
    deviation_decreasing: bool,
}

fn decompose(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let spec = cfg.problem.spec()?;
    let grid = spec.grid();
    let d = &cfg.decompose;
    let u0 = gaussian_bump(grid, d.u0_width, d.u0_amplitude);
    let w = gaussian_bump(grid, d.profile_width, d.profile_amplitude);
    let mut separations = d.separations.clone();
    separations.sort_by(f64::total_cmp);
    let h = grid.spacing(d.axis);
    let shifts: Vec<Vec<i64>> = separations
        .iter()
        .map(|s| {
            let mut y = vec![0i64; grid.dim()];
            y[d.axis] = (s / h).round() as i64;
            y
        })
        .collect();
    let bundle = ProfileBundle::new(u0, vec![w], vec![shifts])?;
    let reports = (0..separations.len())
        .map(|n| decomposition_energy_check(&bundle, n, &spec))
        .collect::<nehari_core::Result<Vec<_>>>()
        .context("decomposition check failed")?;
    out.csv(
        "decomposition.csv",
        "separation,energy_un,energy_u0,profile_energy,hardy_correction,term_magnitude,deviation,deviation_uncorrected",
        reports.iter().map(|r| {
            format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.min_separation,
                r.energy_un,
                r.energy_u0,
                r.profile_energies[0],
                r.hardy_correction,
                r.term_magnitude,
                r.deviation,
                r.deviation_uncorrected
            )
        }),
    )?;
    let deviation_decreasing = reports.windows(2).all(|p| p[1].deviation < p[0].deviation);
    out.json(
        "decompose.json",
        &DecomposeSummary {
            reports,
            deviation_decreasing,
        },
    )?;
    Ok(Status::Success)
}

fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let sweep = cfg.sweep.as_ref().context("sweep task needs a [sweep] table")?;
    let mut rows = Vec::new();
    let mut status = Status::Success;
    for &value in &sweep.values {
        let problem = cfg.problem_at(sweep.parameter, value)?;
        let spec = problem.spec()?;
        let (rep, s) = ground_state(&spec, cfg).with_context(|| format!("sweep value {value}"))?;
        let converged = s == Status::Success;
        rows.push(format!(
            "{value},{:e},{},{:e},{:e},{:e},{:e},{}",
            rep.c_value,
            rep.iterations,
            rep.grad_norm_final,
            rep.nehari_residual_final,
            rep.multi_start_spread,
            rep.beta_estimate,
            if converged { "converged" } else { "iteration_cap" }
        ));
        status = status.merge(match s {
            Status::Inconclusive(msg) => Status::Inconclusive(format!("value {value}: {msg}")),
            ok => ok,
        });
    }
    out.csv(
        "sweep.csv",
        &format!(
            "{},c_value,iterations,grad_norm_final,nehari_residual_final,multi_start_spread,beta_estimate,status",
            serde_json::to_value(sweep.parameter)?.as_str().unwrap_or("value")
        ),
        rows,
    )?;
    Ok(status)
}
