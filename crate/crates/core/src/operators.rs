//! Fractional Laplacian (Fourier multiplier and principal-value quadrature),
//! external potentials, the Hardy weight and the power nonlinearity.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_symbol, Field, TorusGrid};
use crate::inequalities::{self, gamma::gamma_fn};

fn check_order(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidOrder(alpha))
    }
}

/// `(-Δ)^{α/2}` as the Fourier multiplier `|k|^α`, with the symbol cached.
#[derive(Debug, Clone)]
pub struct FractionalLaplacian {
    alpha: f64,
    grid: Arc<TorusGrid>,
    symbol: Arc<Vec<f64>>,
}

impl FractionalLaplacian {
    pub fn new(grid: &Arc<TorusGrid>, alpha: f64) -> Result<Self> {
        check_order(alpha)?;
        let symbol = if alpha == 2.0 {
            grid.wavenumber_sq()
        } else {
            grid.symbol(alpha)
        };
        Ok(Self {
            alpha,
            grid: Arc::clone(grid),
            symbol: Arc::new(symbol),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(apply_symbol(u, &self.symbol))
    }

    /// Applies `(shift + |k|^α)^{-1}`.
    pub fn resolvent(&self, u: &Field, shift: f64) -> Result<Field> {
        if **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let inverse: Vec<f64> = self.symbol.iter().map(|s| 1.0 / (shift + s)).collect();
        Ok(apply_symbol(u, &inverse))
    }
}

pub fn frac_laplacian_fourier(u: &Field, alpha: f64) -> Result<Field> {
    FractionalLaplacian::new(u.grid(), alpha)?.apply(u)
}

/// Normalization constant of the singular-integral form, `C_{N,α} = 2 c_{N,α}`.
pub fn pv_constant(n: usize, alpha: f64) -> Result<f64> {
    Ok(2.0 * inequalities::c_n_alpha(n, alpha)?)
}

fn unit_sphere_area(n: usize) -> f64 {
    let half = 0.5 * n as f64;
    2.0 * PI.powf(half) / gamma_fn(half).expect("positive argument")
}

/// Tail mass limit for the principal-value oracle.
pub const PV_TAIL_LIMIT: f64 = 1e-8;

/// Principal-value quadrature of `C_{N,α} P.V.∫ (u(x) - u(y)) / |x-y|^{N+α} dy`.
///
/// Nodes closer than `exclusion` are replaced by a second-difference Taylor
/// correction over the excluded ball.
///
/// In one dimension the symmetric difference is modeled as `r²·const` on each
/// cell and integrated exactly against the kernel, and the far field beyond
/// `L/2` is the periodic continuation of `u` (image sums), matching the
/// Fourier multiplier on the torus. In higher dimensions a midpoint rule over
/// the minimum-image cell is closed with the analytic tail of a localized
/// profile. O(M^{2N}) work, intended as a cross-check on small problems.
pub fn frac_laplacian_pv(u: &Field, alpha: f64, exclusion: f64) -> Result<Field> {
    check_order(alpha)?;
    if alpha == 2.0 {
        return Err(Error::InvalidOrder(alpha));
    }
    let grid = u.grid();
    let n = grid.dim();
    let h_min = (0..n).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    if !(exclusion >= h_min * (1.0 - 1e-12)) {
        return Err(Error::DomainError(format!(
            "exclusion radius {exclusion} is below the grid spacing {h_min}"
        )));
    }
    let tail = u.tail_mass_fraction(0.125);
    if tail > PV_TAIL_LIMIT {
        return Err(Error::NotLocalized {
            tail_mass: tail,
            limit: PV_TAIL_LIMIT,
        });
    }
    let constant = pv_constant(n, alpha)?;
    let far = 0.5 * grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
    let sphere = unit_sphere_area(n);
    let ball = sphere * exclusion.powf(2.0 - alpha) / (2.0 - alpha) / (2.0 * n as f64);
    let tail_weight = sphere * far.powf(-alpha) / alpha;
    let laplacian = second_difference_laplacian(u);
    let values = u.values();

    let out: Vec<f64> = if n == 1 {
        let m = grid.points()[0];
        let h = grid.spacing(0);
        let cell = |j: usize| {
            let lo = ((j as f64 - 0.5) * h).max(exclusion);
            let hi = ((j as f64 + 0.5) * h).min(far);
            if hi > lo {
                // The symmetric difference behaves like r² near the origin:
                // integrate r² r^{-1-α} exactly and divide by the nodal r².
                let r = j as f64 * h;
                (hi.powf(2.0 - alpha) - lo.powf(2.0 - alpha)) / ((2.0 - alpha) * r * r)
            } else {
                0.0
            }
        };
        let weights: Vec<f64> = (1..=m / 2).map(cell).collect();
        let images = periodic_image_weights(m, grid.lengths()[0], alpha);
        (0..m)
            .map(|i| {
                let ui = values[i];
                let mut acc = 0.0;
                for (j, w) in (1..=m / 2).zip(&weights) {
                    if *w == 0.0 {
                        continue;
                    }
                    let plus = values[(i + j) % m];
                    let minus = values[(i + m - j) % m];
                    // Each side's cell covers half the antipodal node.
                    let pair = if j == m / 2 { 2.0 * plus } else { plus + minus };
                    acc += (2.0 * ui - pair) * w;
                }
                let mut image = ui * images[0] + values[(i + m / 2) % m] * images[m / 2];
                for (j, w) in images.iter().enumerate().take(m / 2).skip(1) {
                    image += (values[(i + j) % m] + values[(i + m - j) % m]) * w;
                }
                constant * (acc - laplacian[i] * ball + ui * tail_weight - image)
            })
            .collect()
    } else {
        let coords = grid.node_coordinates();
        let cell = grid.cell_volume();
        let lengths = grid.lengths();
        (0..grid.len())
            .map(|i| {
                let xi = &coords[i * n..(i + 1) * n];
                let ui = values[i];
                let mut acc = 0.0;
                for (j, &uj) in values.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let xj = &coords[j * n..(j + 1) * n];
                    let r2: f64 = (0..n)
                        .map(|a| {
                            let d = xi[a] - xj[a];
                            let d = d - lengths[a] * (d / lengths[a]).round();
                            d * d
                        })
                        .sum();
                    let r = r2.sqrt();
                    if r >= exclusion {
                        acc += (ui - uj) * r.powf(-(n as f64) - alpha) * cell;
                    }
                }
                constant * (acc - laplacian[i] * ball + ui * tail_weight)
            })
            .collect()
    };
    Field::from_values(grid, out)
}

/// `W_j = Σ_{k≠0} ∫_{cell(j) + kL} |y|^{-1-α} dy` for node offsets
/// `j = 0..=m/2` (`W_{-j} = W_j`), so that `Σ_j u_{i+j} W_j` is the
/// contribution of the periodic images of `u` outside the central window.
fn periodic_image_weights(m: usize, length: f64, alpha: f64) -> Vec<f64> {
    const IMAGES: i64 = 400;
    let h = length / m as f64;
    let prim = |y: f64| y.powf(-alpha) / alpha;
    let mut out = vec![0.0; m / 2 + 1];
    for (j, w) in out.iter_mut().enumerate() {
        let off = j as f64 * h;
        let mut acc = 0.0;
        for k in 1..=IMAGES {
            for side in [-1.0, 1.0] {
                let c = (side * k as f64 * length + off).abs();
                let (lo, hi) = (c - 0.5 * h, c + 0.5 * h);
                let part = prim(lo) - prim(hi);
                // The antipodal node sits on the window edge: half its cell
                // belongs to each neighbour window.
                acc += if j == m / 2 { 0.5 * part } else { part };
            }
        }
        if j == m / 2 {
            acc *= 2.0;
        }
        // Remaining images at distance > (IMAGES + 1/2) L, one cell each per period.
        acc += 2.0 * h * ((IMAGES as f64 + 0.5) * length).powf(-alpha) / (alpha * length);
        *w = acc;
    }
    out
}

/// Centered second-difference Laplacian on the torus.
fn second_difference_laplacian(u: &Field) -> Vec<f64> {
    let grid = u.grid();
    let values = u.values();
    let n = grid.dim();
    let mut idx = vec![0usize; n];
    (0..grid.len())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            let mut lap = 0.0;
            for (axis, &i) in idx.iter().enumerate() {
                let m = grid.points()[axis];
                let stride = grid.stride(axis);
                let up = flat - i * stride + ((i + 1) % m) * stride;
                let down = flat - i * stride + ((i + m - 1) % m) * stride;
                let h = grid.spacing(axis);
                lap += ((values[up] + values[down]) - 2.0 * values[flat]) / (h * h);
            }
            lap
        })
        .collect()
}

/// `|x|^{-α}` at every node (the box is centered on the origin image).
pub fn hardy_weight(grid: &Arc<TorusGrid>, alpha: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        r2.powf(-0.5 * alpha)
    })
}

/// `mean + amplitude · (1/N) Σ_i cos(2π x_i)`: a ℤ^N-periodic profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicProfile {
    pub mean: f64,
    #[serde(default)]
    pub amplitude: f64,
}

impl PeriodicProfile {
    pub fn constant(value: f64) -> Self {
        Self {
            mean: value,
            amplitude: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn min(&self) -> f64 {
        self.mean - self.amplitude.abs()
    }

    pub fn max(&self) -> f64 {
        self.mean + self.amplitude.abs()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return self.mean;
        }
        let avg = x.iter().map(|c| (2.0 * PI * c).cos()).sum::<f64>() / x.len() as f64;
        self.mean + self.amplitude * avg
    }

    pub fn sample(&self, grid: &Arc<TorusGrid>) -> Field {
        Field::from_fn(grid, |x| self.value(x))
    }

    fn check_commensurate(&self, grid: &TorusGrid, name: &str) -> Result<()> {
        if self.is_constant() {
            return Ok(());
        }
        for &l in grid.lengths() {
            if (l - l.round()).abs() > 1e-9 || l.round() < 1.0 {
                return Err(Error::InvalidSpec(format!(
                    "{name} is ℤ^N-periodic but box length {l} is not an integer"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Zero,
    Negative,
    Positive,
}

/// `amplitude · exp(-|x|²/width²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizedPotential {
    pub amplitude: f64,
    #[serde(default = "unit_width")]
    pub width: f64,
}

fn unit_width() -> f64 {
    1.0
}

impl LocalizedPotential {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self { amplitude, width }
    }

    pub fn sign(&self) -> Sign {
        if self.amplitude > 0.0 {
            Sign::Positive
        } else if self.amplitude < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        self.amplitude * (-r2 / (self.width * self.width)).exp()
    }
}

/// `base + coefficient · |x|^exponent`, growing toward the box boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoerciveGrowth {
    pub base: f64,
    pub coefficient: f64,
    #[serde(default = "quadratic")]
    pub exponent: f64,
}

fn quadratic() -> f64 {
    2.0
}

impl CoerciveGrowth {
    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        self.base + self.coefficient * r2.powf(0.5 * self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialClass {
    Periodic,
    CloseToPeriodic,
    Coercive,
    Hardy,
}

impl PotentialClass {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialClass::Periodic => "periodic",
            PotentialClass::CloseToPeriodic => "close_to_periodic",
            PotentialClass::Coercive => "coercive",
            PotentialClass::Hardy => "hardy",
        }
    }
}

/// External potential `V = V_per + V_loc` (or a coercive profile), with an
/// optional Hardy coupling `-μ/|x|^α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub class: PotentialClass,
    #[serde(default = "unit_profile")]
    pub v_per: PeriodicProfile,
    #[serde(default)]
    pub v_loc: Option<LocalizedPotential>,
    #[serde(default)]
    pub coercive: Option<CoerciveGrowth>,
    #[serde(default)]
    pub mu: f64,
}

fn unit_profile() -> PeriodicProfile {
    PeriodicProfile::constant(1.0)
}

impl PotentialSpec {
    pub fn periodic(v_per: PeriodicProfile) -> Self {
        Self {
            class: PotentialClass::Periodic,
            v_per,
            v_loc: None,
            coercive: None,
            mu: 0.0,
        }
    }

    pub fn close_to_periodic(v_per: PeriodicProfile, v_loc: LocalizedPotential) -> Self {
        Self {
            class: PotentialClass::CloseToPeriodic,
            v_per,
            v_loc: Some(v_loc),
            coercive: None,
            mu: 0.0,
        }
    }

    pub fn coercive(growth: CoerciveGrowth) -> Self {
        Self {
            class: PotentialClass::Coercive,
            v_per: PeriodicProfile::constant(0.0),
            v_loc: None,
            coercive: Some(growth),
            mu: 0.0,
        }
    }

    pub fn hardy(v_per: PeriodicProfile, v_loc: Option<LocalizedPotential>, mu: f64) -> Self {
        Self {
            class: PotentialClass::Hardy,
            v_per,
            v_loc,
            coercive: None,
            mu,
        }
    }

    /// The same potential with the localized part and the Hardy term removed.
    pub fn periodic_part(&self) -> Self {
        Self::periodic(self.v_per)
    }

    pub fn v_loc_sign(&self) -> Sign {
        self.v_loc.map(|v| v.sign()).unwrap_or(Sign::Zero)
    }

    /// `V(x)` without the Hardy term.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.class {
            PotentialClass::Coercive => self.coercive.map(|c| c.value(x)).unwrap_or(0.0),
            _ => self.v_per.value(x) + self.v_loc.map(|v| v.value(x)).unwrap_or(0.0),
        }
    }

    pub fn sample(&self, grid: &Arc<TorusGrid>) -> Field {
        Field::from_fn(grid, |x| self.value(x))
    }

    pub fn sample_localized(&self, grid: &Arc<TorusGrid>) -> Field {
        match self.v_loc {
            Some(v) => Field::from_fn(grid, |x| v.value(x)),
            None => Field::zeros(grid),
        }
    }

    pub fn validate(&self, grid: &TorusGrid, alpha: f64) -> Result<()> {
        let n = grid.dim();
        if !self.mu.is_finite() {
            return Err(Error::InvalidSpec("mu must be finite".into()));
        }
        match self.class {
            PotentialClass::Periodic => {
                if self.v_loc_sign() != Sign::Zero || self.mu != 0.0 {
                    return Err(Error::InvalidSpec(
                        "periodic class requires V_loc ≡ 0 and mu = 0".into(),
                    ));
                }
            }
            PotentialClass::CloseToPeriodic => {
                if self.mu != 0.0 {
                    return Err(Error::InvalidSpec("close_to_periodic class requires mu = 0".into()));
                }
            }
            PotentialClass::Coercive => {
                let Some(c) = self.coercive else {
                    return Err(Error::InvalidSpec("coercive class needs a growth profile".into()));
                };
                if !(c.base > 0.0 && c.coefficient > 0.0 && c.exponent > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "coercive growth needs V0 > 0, coefficient > 0, exponent > 0 (got {}, {}, {})",
                        c.base, c.coefficient, c.exponent
                    )));
                }
                if self.v_loc.is_some() || self.mu != 0.0 {
                    return Err(Error::InvalidSpec("coercive class takes neither V_loc nor mu".into()));
                }
            }
            PotentialClass::Hardy => {
                let mu_star = inequalities::mu_star(n, alpha)?;
                if !(self.mu >= 0.0 && self.mu < mu_star) {
                    return Err(Error::InvalidSpec(format!(
                        "0 <= mu < mu* violated: mu={} mu*={mu_star}",
                        self.mu
                    )));
                }
            }
        }
        if let Some(v) = self.v_loc {
            if !(v.width > 0.0 && v.amplitude.is_finite()) {
                return Err(Error::InvalidSpec("V_loc width must be positive".into()));
            }
        }
        if self.class != PotentialClass::Coercive {
            self.v_per.check_commensurate(grid, "V_per")?;
        }
        let grid = Arc::new(grid.clone());
        let min_v = self.sample(&grid).values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(min_v > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "essential infimum of V must be positive, min over nodes is {min_v}"
            )));
        }
        Ok(())
    }
}

/// Focusing term `f(x,u) = Γ(x)|u|^{p-2}u` and defocusing `K(x)|u|^{q-2}u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub p: f64,
    pub q: f64,
    #[serde(default = "unit_profile")]
    pub gamma: PeriodicProfile,
    #[serde(default = "zero_profile")]
    pub k: PeriodicProfile,
}

fn zero_profile() -> PeriodicProfile {
    PeriodicProfile::constant(0.0)
}

/// Critical exponent `2N/(N-α)`; infinite when `N <= α`.
pub fn critical_exponent(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    if n > alpha {
        2.0 * n / (n - alpha)
    } else {
        f64::INFINITY
    }
}

impl NonlinearitySpec {
    pub fn power(p: f64, q: f64, gamma: f64, k: f64) -> Self {
        Self {
            p,
            q,
            gamma: PeriodicProfile::constant(gamma),
            k: PeriodicProfile::constant(k),
        }
    }

    pub fn validate(&self, grid: &TorusGrid, alpha: f64) -> Result<()> {
        let crit = critical_exponent(grid.dim(), alpha);
        let (p, q) = (self.p, self.q);
        if !(2.0 < q) {
            return Err(Error::InvalidSpec(format!("2 < q violated: q={q}")));
        }
        if !(q < p) {
            return Err(Error::InvalidSpec(format!("q < p violated: q={q:?} p={p:?}")));
        }
        if !(p < crit) {
            return Err(Error::InvalidSpec(format!(
                "p < 2*_alpha violated (need 2 < q < p < 2*_alpha): p={p} 2*_alpha={crit}"
            )));
        }
        if !(self.gamma.min() > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "Gamma must be positive, min is {}",
                self.gamma.min()
            )));
        }
        if !(self.k.min() >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "K must be nonnegative, min is {}",
                self.k.min()
            )));
        }
        self.gamma.check_commensurate(grid, "Gamma")?;
        self.k.check_commensurate(grid, "K")?;
        Ok(())
    }
}

/// `|u|^e`, avoiding `powf` for integer and half-integer exponents.
#[inline]
pub(crate) fn abs_pow(u: f64, e: f64) -> f64 {
    let a = u.abs();
    let twice = 2.0 * e;
    if twice == twice.round() && twice.abs() <= 64.0 {
        let whole = e.floor();
        let base = a.powi(whole as i32);
        if e == whole {
            base
        } else {
            base * a.sqrt()
        }
    } else {
        a.powf(e)
    }
}

/// `Γ|u|^{p-2}u` at one node.
#[inline]
pub(crate) fn power_term(u: f64, exponent: f64) -> f64 {
    abs_pow(u, exponent - 2.0) * u
}

pub fn apply_f(u: &Field, nl: &NonlinearitySpec) -> Field {
    let gamma = nl.gamma.sample(u.grid());
    let values = u
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(&v, &g)| g * power_term(v, nl.p))
        .collect();
    Field::from_values(u.grid(), values).expect("finite nonlinearity")
}

/// `F(x,u) = Γ|u|^p / p`.
pub fn primitive_f(u: &Field, nl: &NonlinearitySpec) -> Field {
    let gamma = nl.gamma.sample(u.grid());
    let values = u
        .values()
        .iter()
        .zip(gamma.values())
        .map(|(&v, &g)| g * abs_pow(v, nl.p) / nl.p)
        .collect();
    Field::from_values(u.grid(), values).expect("finite primitive")
}
