//! Hardy-type constants and numerical validators for the functional
//! inequalities the variational framework relies on.

pub mod gamma;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{accurate_sum, l2_inner, lp_norm, Field};
use crate::operators::{critical_exponent, hardy_weight, FractionalLaplacian, NonlinearitySpec};

pub use gamma::gamma_fn;
use gamma::gamma_real;

fn check_dimension(n: usize, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidOrder(alpha));
    }
    if !(n as f64 > alpha) {
        return Err(Error::DomainError(format!("need N > alpha, got N={n} alpha={alpha}")));
    }
    Ok(())
}

/// Quadratic-form constant `c_{N,α}` linking `⟨(-Δ)^{α/2}u,u⟩` to the
/// Gagliardo double integral. Defined for `0 < α < 2`.
pub fn c_n_alpha(n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::DomainError(format!(
            "c_N,alpha needs 0 < alpha < 2, got {alpha}"
        )));
    }
    let nf = n as f64;
    let g_neg = gamma_real(-0.5 * alpha)?.abs();
    Ok(2f64.powf(alpha) * gamma_fn(0.5 * (nf + alpha))? / (2.0 * PI.powf(0.5 * nf) * g_neg))
}

/// Sharp fractional Hardy constant `H_{N,α}` (Frank–Seiringer).
pub fn h_n_alpha(n: usize, alpha: f64) -> Result<f64> {
    check_dimension(n, alpha)?;
    if alpha == 2.0 {
        return Err(Error::DomainError("H_N,alpha is not finite at alpha = 2".into()));
    }
    let nf = n as f64;
    let g_neg = gamma_real(-0.5 * alpha)?.abs();
    let num = gamma_fn(0.25 * (nf + alpha))?.powi(2) * g_neg;
    let den = gamma_fn(0.25 * (nf - alpha))?.powi(2) * gamma_fn(0.5 * (nf + alpha))?;
    Ok(2.0 * PI.powf(0.5 * nf) * num / den)
}

/// Critical Hardy coupling `μ* = 2^α (Γ((N+α)/4) / Γ((N-α)/4))²`.
pub fn mu_star(n: usize, alpha: f64) -> Result<f64> {
    check_dimension(n, alpha)?;
    let nf = n as f64;
    let ratio = gamma_fn(0.25 * (nf + alpha))? / gamma_fn(0.25 * (nf - alpha))?;
    Ok(2f64.powf(alpha) * ratio * ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyConstants {
    pub n: usize,
    pub alpha: f64,
    /// `None` in the local case, where the Gagliardo form degenerates.
    pub c_n_alpha: Option<f64>,
    pub h_n_alpha: Option<f64>,
    pub mu_star: f64,
}

impl HardyConstants {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        check_dimension(n, alpha)?;
        let (c, h) = if alpha < 2.0 {
            (Some(c_n_alpha(n, alpha)?), Some(h_n_alpha(n, alpha)?))
        } else {
            (None, None)
        };
        Ok(Self {
            n,
            alpha,
            c_n_alpha: c,
            h_n_alpha: h,
            mu_star: mu_star(n, alpha)?,
        })
    }

    /// Norm-equivalence constant `D = ½(1 - μ/μ*)`.
    pub fn d(&self, mu: f64) -> f64 {
        0.5 * (1.0 - mu / self.mu_star)
    }
}

/// Tail-mass limit for the Hardy validator.
pub const HARDY_TAIL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyReport {
    /// Gagliardo seminorm (or `∫|∇u|²` when α = 2).
    pub lhs: f64,
    /// `∫ u² / |x|^α`.
    pub rhs: f64,
    /// `H_{N,α}` (or `μ*` when α = 2).
    pub constant: f64,
    pub slack: f64,
    pub passed: bool,
}

impl HardyReport {
    pub const CSV_HEADER: &'static str = "lhs,rhs,constant,slack,passed";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{}",
            self.lhs, self.rhs, self.constant, self.slack, self.passed
        )
    }
}

/// Checks `∬|u(x)-u(y)|²/|x-y|^{N+α} ≥ H_{N,α} ∫u²/|x|^α` on the grid.
pub fn hardy_check(u: &Field, constants: &HardyConstants) -> Result<HardyReport> {
    let grid = u.grid();
    if grid.dim() != constants.n {
        return Err(Error::DomainError(format!(
            "constants for N={} applied to a {}-dimensional field",
            constants.n,
            grid.dim()
        )));
    }
    let tail = u.tail_mass_fraction(0.125);
    if tail > HARDY_TAIL_LIMIT {
        return Err(Error::NotLocalized {
            tail_mass: tail,
            limit: HARDY_TAIL_LIMIT,
        });
    }
    let lap = FractionalLaplacian::new(grid, constants.alpha)?;
    let form = l2_inner(u, &lap.apply(u)?)?;
    let weight = hardy_weight(grid, constants.alpha);
    let rhs = l2_inner(&u.mul(u)?, &weight)?;
    let (lhs, constant) = match (constants.c_n_alpha, constants.h_n_alpha) {
        (Some(c), Some(h)) => (form / c, h),
        _ => (form, constants.mu_star),
    };
    let slack = lhs - constant * rhs;
    Ok(HardyReport {
        lhs,
        rhs,
        constant,
        slack,
        passed: slack >= -1e-10 * lhs.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnReport {
    pub r: f64,
    /// `|u|_{r+1}^{r+1}`.
    pub lhs: f64,
    /// `‖u‖_{H^{α/2}}`.
    pub sobolev_norm: f64,
    pub l2_norm: f64,
    pub sobolev_exponent: f64,
    pub l2_exponent: f64,
    pub ratio: f64,
}

/// Exponents `(a, b)` of `|u|_{r+1}^{r+1} ≤ C ‖u‖^a |u|₂^b`.
pub fn gn_exponents(n: usize, r: f64, alpha: f64) -> Result<(f64, f64)> {
    check_dimension(n, alpha)?;
    let crit = critical_exponent(n, alpha);
    if !(r > 1.0 && r + 1.0 <= crit) {
        return Err(Error::InvalidExponent {
            value: r,
            reason: format!("need r > 1 and r + 1 <= 2*_alpha = {crit}"),
        });
    }
    let a = (r - 1.0) * n as f64 / alpha;
    Ok((a, r + 1.0 - a))
}

/// Ratio of the two sides of the Gagliardo–Nirenberg inequality.
pub fn gn_check(u: &Field, r: f64, alpha: f64) -> Result<GnReport> {
    let grid = u.grid();
    let (a, b) = gn_exponents(grid.dim(), r, alpha)?;
    let lap = FractionalLaplacian::new(grid, alpha)?;
    let l2_sq = l2_inner(u, u)?;
    let sobolev = (l2_inner(u, &lap.apply(u)?)? + l2_sq).sqrt();
    let l2 = l2_sq.sqrt();
    let lhs = lp_norm(u, r + 1.0)?.powf(r + 1.0);
    let ratio = if lhs == 0.0 {
        0.0
    } else {
        lhs / (sobolev.powf(a) * l2.powf(b))
    };
    Ok(GnReport {
        r,
        lhs,
        sobolev_norm: sobolev,
        l2_norm: l2,
        sobolev_exponent: a,
        l2_exponent: b,
        ratio,
    })
}

/// Largest ratio over a corpus: an empirical Gagliardo–Nirenberg constant.
pub fn gn_empirical_constant(corpus: &[Field], r: f64, alpha: f64) -> Result<f64> {
    corpus
        .iter()
        .map(|u| gn_check(u, r, alpha).map(|rep| rep.ratio))
        .try_fold(0.0_f64, |m, x| x.map(|x| m.max(x)))
}

/// Log-spaced scan of `|u| ∈ [lo, hi]` used by [`epsilon_bound_check`].
#[derive(Debug, Clone, Copy)]
pub struct Scan {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Scan {
    fn default() -> Self {
        Self {
            lo: 1e-8,
            hi: 1e8,
            points: 4001,
        }
    }
}

impl Scan {
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points: (self.points - 1) * factor + 1,
            ..*self
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        let (llo, lhi) = (self.lo.ln(), self.hi.ln());
        let steps = (self.points - 1).max(1) as f64;
        (0..self.points).map(move |i| (llo + (lhi - llo) * i as f64 / steps).exp())
    }
}

/// Smallest `C_ε` with `|f(u)| ≤ ε|u| + C_ε|u|^{p-1}` on the scan (both signs).
///
/// The scan maximum is polished by golden-section search on the neighbouring
/// scan interval so finer scans cannot exceed the returned value.
pub fn epsilon_bound_check(f: impl Fn(f64) -> f64, p: f64, eps: f64, scan: Scan) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::DomainError(format!("epsilon must be positive, got {eps}")));
    }
    let need = |u: f64| (f(u).abs() - eps * u.abs()) / u.abs().powf(p - 1.0);
    let samples: Vec<f64> = scan.samples().collect();
    let mut best = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let values: Vec<f64> = samples.iter().map(|&u| need(sign * u)).collect();
        let (imax, &vmax) =
            values.iter().enumerate().fold(
                (0, &f64::NEG_INFINITY),
                |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc },
            );
        best = best.max(vmax);
        let lo = samples[imax.saturating_sub(1)].ln();
        let hi = samples[(imax + 1).min(samples.len() - 1)].ln();
        if hi > lo {
            let polished = golden_max(|s| need(sign * s.exp()), lo, hi, 1e-12);
            best = best.max(polished.1);
        }
    }
    if !best.is_finite() {
        return Err(Error::NumericalOverflow { term: "epsilon bound" });
    }
    Ok(best.max(0.0) * (1.0 + 1e-12))
}

/// `C_ε` for the model nonlinearity, using the largest Γ.
pub fn epsilon_bound_for(nl: &NonlinearitySpec, eps: f64) -> Result<f64> {
    let g = nl.gamma.max();
    epsilon_bound_check(
        |u| g * crate::operators::power_term(u, nl.p),
        nl.p,
        eps,
        Scan::default(),
    )
}

/// Golden-section maximization on `[a, b]`; returns `(argmax, max)`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (a.abs() + b.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub shift: f64,
    pub value: f64,
}

/// `∫ |u(· - s)|² / |x|^α` along a list of whole-cell shifts.
pub fn hardy_translation_decay(u: &Field, shifts: &[Vec<i64>], alpha: f64) -> Result<Vec<DecayPoint>> {
    let grid = u.grid();
    let weight = hardy_weight(grid, alpha);
    let h = grid.cell_volume();
    shifts
        .iter()
        .map(|s| {
            let mut len2 = 0.0;
            for (axis, &k) in s.iter().enumerate().take(grid.dim()) {
                let d = k as f64 * grid.spacing(axis);
                if d.abs() > 0.5 * grid.lengths()[axis] + 1e-12 {
                    return Err(Error::InvalidShift(format!(
                        "shift {d} exceeds the half-width along axis {axis}"
                    )));
                }
                len2 += d * d;
            }
            let moved = u.translated(s)?;
            let value = accurate_sum(moved.values().iter().zip(weight.values()).map(|(v, w)| v * v * w)) * h;
            Ok(DecayPoint {
                shift: len2.sqrt(),
                value,
            })
        })
        .collect()
}
