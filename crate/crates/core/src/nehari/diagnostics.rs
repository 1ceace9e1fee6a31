use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::project;
use super::solver::{gaussian_seeds, minimize, GroundStateReport, SolverOptions};
use crate::error::{Error, Result};
use crate::functional::{energy, norm_sq, ProblemSpec};
use crate::grid::{Field, TorusGrid};
use crate::operators::Sign;

/// Manifold membership tolerance relative to `‖u‖²`.
pub const MANIFOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `‖u/‖u‖ - v/‖v‖‖ / ((2/β)‖u - v‖)` seen.
    pub max_ratio: f64,
    pub beta: f64,
}

fn require_on_manifold(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    let rep = energy(u, spec)?;
    let limit = MANIFOLD_TOL * rep.norm_sq;
    if u.is_zero() || rep.nehari_residual.abs() > limit {
        return Err(Error::NotOnManifold {
            residual: rep.nehari_residual,
            limit,
        });
    }
    Ok(rep.norm_sq.sqrt())
}

/// Checks `‖u/‖u‖ - v/‖v‖‖ ≤ (2/β)‖u - v‖` for every pair of manifold points.
pub fn lipschitz_check(pairs: &[(Field, Field)], beta: f64, spec: &ProblemSpec) -> Result<LipschitzReport> {
    if !(beta > 0.0) {
        return Err(Error::DomainError(format!("beta must be positive, got {beta}")));
    }
    let mut report = LipschitzReport {
        checked: 0,
        violations: 0,
        max_ratio: 0.0,
        beta,
    };
    for (u, v) in pairs {
        let nu = require_on_manifold(u, spec)?;
        let nv = require_on_manifold(v, spec)?;
        if beta > nu.min(nv) * (1.0 + 1e-12) {
            return Err(Error::DomainError(format!(
                "beta = {beta} exceeds the norm {} of a supplied point",
                nu.min(nv)
            )));
        }
        let lhs = norm_sq(&u.scaled(1.0 / nu).sub(&v.scaled(1.0 / nv))?, spec)?
            .max(0.0)
            .sqrt();
        let rhs = 2.0 / beta * norm_sq(&u.sub(v)?, spec)?.max(0.0).sqrt();
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
            report.violations += 1;
        }
        report.max_ratio = report.max_ratio.max(ratio);
        report.checked += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DichotomyOptions {
    pub solver: SolverOptions,
    /// Required gap `c_per - c` in units of `tol_energy·(1 + |c|)`.
    pub margin_factor: f64,
    /// Largest `|c - c_per| / c_per` accepted for a positive perturbation.
    pub escape_tolerance: f64,
    /// Repeat both solves on a grid with half the points per axis and
    /// require the sign of `c - c_per` to agree.
    pub coarse_check: bool,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            margin_factor: 10.0,
            escape_tolerance: 0.02,
            coarse_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DichotomyStatus {
    Confirmed,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapePoint {
    /// Integer shift along the first axis, in length units.
    pub shift: i64,
    /// `𝒥(t_y τ_y u_per)` for the full problem.
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub v_loc_sign: Sign,
    pub c: f64,
    pub c_per: f64,
    /// `c_per - c`.
    pub gap: f64,
    /// Gap required for a decisive negative-perturbation verdict.
    pub margin: f64,
    pub escape_curve: Vec<EscapePoint>,
    pub escape_decreasing: bool,
    /// `|c - c_per| / c_per`.
    pub relative_gap: f64,
    /// Distance of the full minimizer's center of mass from the origin.
    pub full_center_offset: f64,
    /// `(c, c_per)` on the coarse grid.
    pub coarse: Option<(f64, f64)>,
    pub status: DichotomyStatus,
    pub full: GroundStateReport,
    pub periodic: GroundStateReport,
}

fn center_offset(u: &Field) -> f64 {
    let grid = u.grid();
    let mut idx = vec![0usize; grid.dim()];
    let mut r2 = 0.0;
    for axis in 0..grid.dim() {
        let l = grid.lengths()[axis];
        let (mut c, mut s) = (0.0, 0.0);
        for (flat, &val) in u.values().iter().enumerate() {
            grid.unravel(flat, &mut idx);
            let theta = 2.0 * PI * grid.coordinate(axis, idx[axis]) / l;
            c += val * val * theta.cos();
            s += val * val * theta.sin();
        }
        let x = s.atan2(c) * l / (2.0 * PI);
        r2 += x * x;
    }
    r2.sqrt()
}

fn solve_pair(
    full: &ProblemSpec,
    periodic: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<(GroundStateReport, GroundStateReport)> {
    let seeds = gaussian_seeds(full.grid(), opts.starts, opts.seed);
    let a = minimize(full, opts, &seeds)?;
    let b = minimize(periodic, opts, &seeds)?;
    Ok((a, b))
}

/// Compares the perturbed problem with its periodic part.
pub fn dichotomy_probe(full: &ProblemSpec, periodic: &ProblemSpec, opts: &DichotomyOptions) -> Result<DichotomyReport> {
    if **full.grid() != **periodic.grid()
        || full.alpha() != periodic.alpha()
        || full.nonlinearity() != periodic.nonlinearity()
    {
        return Err(Error::InvalidSpec(
            "dichotomy specs must share grid, alpha and nonlinearity".into(),
        ));
    }
    if periodic.potential().v_loc_sign() != Sign::Zero || periodic.mu() != 0.0 {
        return Err(Error::UnsupportedClass {
            expected: "periodic",
            found: periodic.potential().class.name().to_string(),
        });
    }
    let sign = full.potential().v_loc_sign();
    let (full_rep, per_rep) = solve_pair(full, periodic, &opts.solver)?;
    let c = full_rep.c_value;
    let c_per = per_rep.c_value;
    let gap = c_per - c;
    let margin = opts.margin_factor * opts.solver.tol_energy * (1.0 + c.abs());
    let relative_gap = (c - c_per).abs() / c_per;

    let mut escape_curve = Vec::new();
    let mut escape_decreasing = true;
    if sign == Sign::Positive {
        escape_curve = escape_sweep(full, &per_rep.minimizer)?;
        let tol = 1e-12 * c_per.abs();
        escape_decreasing = escape_curve.windows(2).all(|w| w[1].energy <= w[0].energy + tol);
    }

    let coarse = if opts.coarse_check {
        let pts: Vec<usize> = full.grid().points().iter().map(|m| m / 2).collect();
        let grid = Arc::new(TorusGrid::new(full.grid().lengths().to_vec(), pts)?);
        let (a, b) = solve_pair(
            &full.on_grid(Arc::clone(&grid))?,
            &periodic.on_grid(grid)?,
            &opts.solver,
        )?;
        Some((a.c_value, b.c_value))
    } else {
        None
    };
    let coarse_agrees = coarse.is_none_or(|(a, b)| match sign {
        Sign::Negative => b - a > 0.0,
        _ => true,
    });

    let decisive = match sign {
        Sign::Negative => gap > margin,
        Sign::Positive => escape_decreasing && relative_gap <= opts.escape_tolerance && gap <= margin,
        Sign::Zero => gap.abs() <= margin,
    };
    let status = if decisive && coarse_agrees {
        DichotomyStatus::Confirmed
    } else {
        DichotomyStatus::Inconclusive
    };
    Ok(DichotomyReport {
        v_loc_sign: sign,
        c,
        c_per,
        gap,
        margin,
        escape_curve,
        escape_decreasing,
        relative_gap,
        full_center_offset: center_offset(&full_rep.minimizer),
        coarse,
        status,
        full: full_rep,
        periodic: per_rep,
    })
}

/// `y ↦ 𝒥(t_y τ_y u)` for `y = 1..L/4` along the first axis.
pub fn escape_sweep(spec: &ProblemSpec, u: &Field) -> Result<Vec<EscapePoint>> {
    let grid = spec.grid();
    let cells = 1.0 / grid.spacing(0);
    if (cells - cells.round()).abs() > 1e-9 {
        return Err(Error::InvalidShift(format!(
            "unit shifts need an integer number of cells per unit length, got {cells}"
        )));
    }
    let cells = cells.round() as i64;
    let max = (grid.lengths()[0] / 4.0).floor() as i64;
    (1..=max)
        .map(|y| {
            let mut shift = vec![0i64; grid.dim()];
            shift[0] = y * cells;
            let p = project(&u.translated(&shift)?, spec)?;
            Ok(EscapePoint {
                shift: y,
                energy: p.fibering_max,
            })
        })
        .collect()
}
