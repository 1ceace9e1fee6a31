//! The energy functional `𝒥`, its L²-gradient, the Nehari residual
//! `𝒥'(u)(u)` and the fibering map `t ↦ 𝒥(tu)`.
//!
//! `‖u‖² = ⟨(-Δ)^{α/2}u, u⟩ + ∫ V u²` is evaluated through the Fourier
//! multiplier; for `0 < α < 2` this equals `c_{N,α}` times the Gagliardo
//! double integral.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{accurate_sum, l2_inner, Field, TorusGrid};
use crate::operators::{
    abs_pow, hardy_weight, power_term, FractionalLaplacian, NonlinearitySpec, PotentialClass, PotentialSpec, Sign,
};

/// Validated problem data with every nodewise coefficient pre-sampled.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Arc<TorusGrid>,
    alpha: f64,
    potential: PotentialSpec,
    nonlinearity: NonlinearitySpec,
    laplacian: FractionalLaplacian,
    v: Field,
    v_loc: Field,
    hardy: Option<Field>,
    gamma: Field,
    k: Field,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<TorusGrid>,
        alpha: f64,
        potential: PotentialSpec,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidOrder(alpha));
        }
        if !(grid.dim() as f64 > alpha) {
            return Err(Error::InvalidSpec(format!(
                "N > alpha violated: N={} alpha={alpha}",
                grid.dim()
            )));
        }
        potential.validate(&grid, alpha)?;
        nonlinearity.validate(&grid, alpha)?;
        Self::assemble(grid, alpha, potential, nonlinearity)
    }

    /// Linear problem (`Γ ≡ 0`, `K ≡ 0`) for propagation tests; it has no
    /// Nehari manifold.
    pub fn linear(grid: Arc<TorusGrid>, alpha: f64, potential: PotentialSpec) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidOrder(alpha));
        }
        potential.validate(&grid, alpha)?;
        Self::assemble(grid, alpha, potential, NonlinearitySpec::power(4.0, 3.0, 0.0, 0.0))
    }

    fn assemble(
        grid: Arc<TorusGrid>,
        alpha: f64,
        potential: PotentialSpec,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        let laplacian = FractionalLaplacian::new(&grid, alpha)?;
        let v = potential.sample(&grid);
        let v_loc = potential.sample_localized(&grid);
        let hardy = (potential.mu != 0.0).then(|| hardy_weight(&grid, alpha));
        let gamma = nonlinearity.gamma.sample(&grid);
        let k = nonlinearity.k.sample(&grid);
        Ok(Self {
            grid,
            alpha,
            potential,
            nonlinearity,
            laplacian,
            v,
            v_loc,
            hardy,
            gamma,
            k,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn laplacian(&self) -> &FractionalLaplacian {
        &self.laplacian
    }

    pub fn mu(&self) -> f64 {
        self.potential.mu
    }

    /// Sampled `V` (without the Hardy term).
    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn v_loc(&self) -> &Field {
        &self.v_loc
    }

    pub fn gamma(&self) -> &Field {
        &self.gamma
    }

    pub fn k(&self) -> &Field {
        &self.k
    }

    /// Same grid, order and nonlinearity with a different potential.
    pub fn with_potential(&self, potential: PotentialSpec) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), self.alpha, potential, self.nonlinearity)
    }

    /// Same problem on another grid.
    pub fn on_grid(&self, grid: Arc<TorusGrid>) -> Result<Self> {
        Self::new(grid, self.alpha, self.potential.clone(), self.nonlinearity)
    }

    /// Smallest whole-cell shift per axis under which the problem is
    /// invariant, or `None` when there is no translation symmetry.
    pub fn translation_step(&self) -> Option<Vec<i64>> {
        let pot = &self.potential;
        if pot.class == PotentialClass::Coercive || pot.mu != 0.0 || pot.v_loc_sign() != Sign::Zero {
            return None;
        }
        let constant =
            pot.v_per.is_constant() && self.nonlinearity.gamma.is_constant() && self.nonlinearity.k.is_constant();
        (0..self.grid.dim())
            .map(|axis| {
                if constant {
                    return Some(1);
                }
                let cells = 1.0 / self.grid.spacing(axis);
                ((cells - cells.round()).abs() < 1e-9).then(|| cells.round() as i64)
            })
            .collect()
    }

    /// `|x|^{-α}` sampled on the grid when `μ ≠ 0`.
    pub(crate) fn hardy_field(&self) -> Option<&Field> {
        self.hardy.as_ref()
    }

    pub(crate) fn check(&self, u: &Field) -> Result<()> {
        if **u.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub(crate) fn weighted_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        accurate_sum((0..self.grid.len()).map(f)) * self.grid.cell_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "J")]
    pub j: f64,
    /// `‖u‖² = ⟨(-Δ)^{α/2}u,u⟩ + ∫Vu²`.
    pub norm_sq: f64,
    /// `μ ∫ u²/|x|^α`.
    pub hardy_term: f64,
    /// `∫ F(x,u)`.
    pub f_integral: f64,
    /// `(1/q) ∫ K|u|^q`.
    pub k_integral: f64,
    /// `𝒥'(u)(u)`.
    pub nehari_residual: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "J,norm_sq,hardy_term,F_integral,K_integral,nehari_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            self.j, self.norm_sq, self.hardy_term, self.f_integral, self.k_integral, self.nehari_residual
        )
    }

    /// `‖u‖²_μ = ‖u‖² - μ∫u²/|x|^α`.
    pub fn mu_norm_sq(&self) -> f64 {
        self.norm_sq - self.hardy_term
    }
}

fn finite(value: f64, term: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericalOverflow { term })
    }
}

/// `‖u‖²` (energy norm, without the Hardy term).
pub fn norm_sq(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    inner(u, u, spec)
}

/// Scalar product `⟨u,v⟩ = ⟨(-Δ)^{α/2}u, v⟩ + ∫ V u v`.
pub fn inner(u: &Field, v: &Field, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    spec.check(v)?;
    let lin = spec.laplacian.apply(u)?;
    let (a, b, pot) = (lin.values(), v.values(), spec.v.values());
    let uv = u.values();
    Ok(spec.weighted_sum(|i| a[i] * b[i] + pot[i] * uv[i] * b[i]))
}

/// Scalar integrals entering the energy of `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberingProfile {
    /// `‖u‖²`
    pub norm_sq: f64,
    /// `‖u‖²_μ`
    pub quadratic: f64,
    /// `∫ Γ|u|^p`
    pub focusing: f64,
    /// `∫ K|u|^q`
    pub defocusing: f64,
    pub p: f64,
    pub q: f64,
}

impl FiberingProfile {
    pub fn of(u: &Field, spec: &ProblemSpec) -> Result<Self> {
        let rep = energy(u, spec)?;
        Ok(Self {
            norm_sq: rep.norm_sq,
            quadratic: rep.norm_sq - rep.hardy_term,
            focusing: spec.nonlinearity.p * rep.f_integral,
            defocusing: spec.nonlinearity.q * rep.k_integral,
            p: spec.nonlinearity.p,
            q: spec.nonlinearity.q,
        })
    }

    /// `𝒥(tu)`.
    pub fn value(&self, t: f64) -> f64 {
        0.5 * self.quadratic * t * t - self.focusing * t.powf(self.p) / self.p
            + self.defocusing * t.powf(self.q) / self.q
    }

    /// `d/dt 𝒥(tu) = 𝒥'(tu)(u)`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.quadratic * t - self.focusing * t.powf(self.p - 1.0) + self.defocusing * t.powf(self.q - 1.0)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        self.quadratic - (self.p - 1.0) * self.focusing * t.powf(self.p - 2.0)
            + (self.q - 1.0) * self.defocusing * t.powf(self.q - 2.0)
    }
}

pub fn energy(u: &Field, spec: &ProblemSpec) -> Result<EnergyReport> {
    spec.check(u)?;
    let lin = spec.laplacian.apply(u)?;
    let (uv, lv, pot) = (u.values(), lin.values(), spec.v.values());
    let norm_sq = finite(spec.weighted_sum(|i| uv[i] * lv[i] + pot[i] * uv[i] * uv[i]), "norm")?;
    let hardy_term = match &spec.hardy {
        Some(w) => {
            let w = w.values();
            finite(spec.mu() * spec.weighted_sum(|i| uv[i] * uv[i] * w[i]), "hardy term")?
        }
        None => 0.0,
    };
    let (p, q) = (spec.nonlinearity.p, spec.nonlinearity.q);
    let (g, k) = (spec.gamma.values(), spec.k.values());
    let focusing = finite(spec.weighted_sum(|i| g[i] * abs_pow(uv[i], p)), "F integral")?;
    let defocusing = finite(spec.weighted_sum(|i| k[i] * abs_pow(uv[i], q)), "K integral")?;
    let f_integral = focusing / p;
    let k_integral = defocusing / q;
    let j = 0.5 * norm_sq - 0.5 * hardy_term - f_integral + k_integral;
    Ok(EnergyReport {
        j: finite(j, "energy")?,
        norm_sq,
        hardy_term,
        f_integral,
        k_integral,
        nehari_residual: norm_sq - hardy_term - focusing + defocusing,
    })
}

/// L²-representative of `𝒥'(u)`:
/// `(-Δ)^{α/2}u + Vu - μu/|x|^α - Γ|u|^{p-2}u + K|u|^{q-2}u`.
pub fn gradient(u: &Field, spec: &ProblemSpec) -> Result<Field> {
    spec.check(u)?;
    let mut out = spec.laplacian.apply(u)?;
    let (p, q, mu) = (spec.nonlinearity.p, spec.nonlinearity.q, spec.mu());
    let (uv, pot, g, k) = (u.values(), spec.v.values(), spec.gamma.values(), spec.k.values());
    let hardy = spec.hardy.as_ref().map(|w| w.values());
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        let x = uv[i];
        let mut local = pot[i] * x - g[i] * power_term(x, p) + k[i] * power_term(x, q);
        if let Some(w) = hardy {
            local -= mu * w[i] * x;
        }
        *o += local;
    }
    if !out.is_finite() {
        return Err(Error::NumericalOverflow { term: "gradient" });
    }
    Ok(out)
}

pub fn nehari_residual(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    Ok(energy(u, spec)?.nehari_residual)
}

/// `𝒥(tu)`.
pub fn fibering_value(u: &Field, t: f64, spec: &ProblemSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::DomainError(format!("fibering parameter must be >= 0, got {t}")));
    }
    Ok(energy(&u.scaled(t), spec)?.j)
}

/// `|b|^e - |a|^e` without cancellation when `a ≈ b`.
pub(crate) fn power_difference(a: f64, b: f64, diff: f64, e: f64) -> f64 {
    let (ma, mb) = (a.abs(), b.abs());
    if ma == 0.0 || mb == 0.0 || a.signum() != b.signum() {
        return abs_pow(mb, e) - abs_pow(ma, e);
    }
    let dm = diff * a.signum();
    let ratio = dm / ma;
    if ratio.abs() > 0.5 {
        return abs_pow(mb, e) - abs_pow(ma, e);
    }
    if e == e.round() && (1.0..=16.0).contains(&e) {
        // b^e - a^e = (b - a) Σ a^j b^{e-1-j}
        let mut acc = 0.0;
        let mut pa = 1.0;
        for j in 0..e as i32 {
            acc += pa * mb.powi(e as i32 - 1 - j);
            pa *= ma;
        }
        return dm * acc;
    }
    abs_pow(ma, e) * (e * ratio.ln_1p()).exp_m1()
}

/// `𝒥(w) - 𝒥(u)` evaluated from `w - u`, accurate to rounding in the
/// difference itself rather than in the energies.
pub fn energy_difference(u: &Field, w: &Field, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    spec.check(w)?;
    let delta = w.sub(u)?;
    let sum = w.add(u)?;
    let lin = spec.laplacian.apply(&delta)?;
    let (dv, sv, lv, pot) = (delta.values(), sum.values(), lin.values(), spec.v.values());
    let quad = spec.weighted_sum(|i| lv[i] * sv[i] + pot[i] * dv[i] * sv[i]);
    let hardy = match &spec.hardy {
        Some(wt) => {
            let wt = wt.values();
            spec.mu() * spec.weighted_sum(|i| wt[i] * dv[i] * sv[i])
        }
        None => 0.0,
    };
    let (p, q) = (spec.nonlinearity.p, spec.nonlinearity.q);
    let (g, k, a, b) = (spec.gamma.values(), spec.k.values(), u.values(), w.values());
    let focusing = spec.weighted_sum(|i| g[i] * power_difference(a[i], b[i], dv[i], p));
    let defocusing = spec.weighted_sum(|i| k[i] * power_difference(a[i], b[i], dv[i], q));
    finite(
        0.5 * quad - 0.5 * hardy - focusing / p + defocusing / q,
        "energy difference",
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitEnergies {
    pub full: f64,
    /// `𝒥_per(u) = 𝒥(u) - ½∫V_loc u²`.
    pub periodic: f64,
    /// `𝒥_∞(u) = 𝒥(u) - ½∫V_loc u²` (keeps the Hardy term).
    pub limit: f64,
}

pub fn split_energies(u: &Field, spec: &ProblemSpec) -> Result<SplitEnergies> {
    match spec.potential.class {
        PotentialClass::CloseToPeriodic | PotentialClass::Hardy => {}
        other => {
            return Err(Error::UnsupportedClass {
                expected: "close_to_periodic or hardy",
                found: other.name().to_string(),
            })
        }
    }
    let full = energy(u, spec)?.j;
    let local = 0.5 * l2_inner(&u.mul(u)?, &spec.v_loc)?;
    Ok(SplitEnergies {
        full,
        periodic: full - local,
        limit: full - local,
    })
}

/// `μ ∫ u² / |x|^α` (zero without a Hardy term).
pub fn hardy_integral(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    spec.check(u)?;
    Ok(match &spec.hardy {
        Some(w) => {
            let (uv, w) = (u.values(), w.values());
            spec.mu() * spec.weighted_sum(|i| uv[i] * uv[i] * w[i])
        }
        None => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{LocalizedPotential, PeriodicProfile};
    use std::f64::consts::PI;

    fn spec_1d(potential: PotentialSpec, nl: NonlinearitySpec, l: f64, m: usize) -> ProblemSpec {
        let grid = Arc::new(TorusGrid::cubic(1, l, m).unwrap());
        ProblemSpec::new(grid, 0.5, potential, nl).unwrap()
    }

    fn unit() -> PeriodicProfile {
        PeriodicProfile::constant(1.0)
    }

    #[test]
    fn zero_field() {
        let spec = spec_1d(
            PotentialSpec::periodic(unit()),
            NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3),
            16.0,
            64,
        );
        let z = Field::zeros(spec.grid());
        let rep = energy(&z, &spec).unwrap();
        assert_eq!(rep.j, 0.0);
        assert_eq!(rep.nehari_residual, 0.0);
        assert!(gradient(&z, &spec).unwrap().is_zero());
        assert_eq!(fibering_value(&z, 3.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn assembly_identity() {
        let spec = spec_1d(
            PotentialSpec::periodic(unit()),
            NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3),
            16.0,
            64,
        );
        let u = Field::from_fn(spec.grid(), |x| 1.3 * (-x[0] * x[0] / 3.0).exp());
        let r = energy(&u, &spec).unwrap();
        let assembled = 0.5 * r.norm_sq - 0.5 * r.hardy_term - r.f_integral + r.k_integral;
        assert!((r.j - assembled).abs() <= 1e-12 * r.j.abs());
    }

    #[test]
    fn cosine_energy_against_direct_sum() {
        // V ≡ 1, K = 0, Γ ≡ 1, p = 4 on [0, 2π): norm² = (k^α + 1)π.
        let grid = Arc::new(TorusGrid::cubic(1, 2.0 * PI, 64).unwrap());
        let alpha = 0.5;
        let spec = ProblemSpec::new(
            Arc::clone(&grid),
            alpha,
            PotentialSpec::periodic(unit()),
            NonlinearitySpec::power(3.9, 2.5, 1.0, 0.0),
        )
        .unwrap();
        let kk = 3.0_f64;
        let u = Field::from_fn(&grid, |x| (kk * x[0]).cos());
        let h = grid.spacing(0);
        let direct_f: f64 = (0..64)
            .map(|i| grid.coordinate(0, i))
            .map(|x| (kk * x).cos().abs().powf(3.9) / 3.9 * h)
            .sum();
        let expected = 0.5 * (kk.powf(alpha) + 1.0) * PI - direct_f;
        let got = energy(&u, &spec).unwrap().j;
        assert!(((got - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn hardy_class_with_zero_mu_matches_periodic() {
        let nl = NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3);
        let a = spec_1d(PotentialSpec::periodic(unit()), nl, 16.0, 64);
        let b = spec_1d(PotentialSpec::hardy(unit(), None, 0.0), nl, 16.0, 64);
        let u = Field::from_fn(a.grid(), |x| (-x[0] * x[0]).exp());
        assert_eq!(energy(&u, &a).unwrap(), energy(&u, &b).unwrap());
        let s = split_energies(&u, &b).unwrap();
        assert_eq!(s.full, s.periodic);
        assert_eq!(s.full, s.limit);
    }

    #[test]
    fn split_energy_signs() {
        let nl = NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3);
        let flat = spec_1d(
            PotentialSpec::close_to_periodic(unit(), LocalizedPotential::gaussian(0.0, 1.0)),
            nl,
            16.0,
            64,
        );
        let u = Field::from_fn(flat.grid(), |x| (-x[0] * x[0]).exp());
        let s = split_energies(&u, &flat).unwrap();
        assert_eq!(s.full, s.periodic);
        let well = flat
            .with_potential(PotentialSpec::close_to_periodic(
                unit(),
                LocalizedPotential::gaussian(-0.3, 1.0),
            ))
            .unwrap();
        let s = split_energies(&u, &well).unwrap();
        assert!(s.full < s.periodic);
        let periodic = flat.with_potential(PotentialSpec::periodic(unit())).unwrap();
        assert!(matches!(
            split_energies(&u, &periodic),
            Err(Error::UnsupportedClass { .. })
        ));
    }

    #[test]
    fn pure_power_residual_scaling() {
        let spec = spec_1d(
            PotentialSpec::periodic(unit()),
            NonlinearitySpec::power(3.5, 2.5, 1.0, 0.0),
            16.0,
            64,
        );
        let u = Field::from_fn(spec.grid(), |x| 0.8 * (-x[0] * x[0] / 2.0).exp());
        let n2 = norm_sq(&u, &spec).unwrap();
        let fp: f64 = u.values().iter().map(|v| v.abs().powf(3.5)).sum::<f64>() * spec.grid().cell_volume();
        let t: f64 = 2.0;
        let expected = t * t * n2 - t.powf(3.5) * fp;
        let got = nehari_residual(&u.scaled(t), &spec).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn energy_difference_matches_direct_difference() {
        let spec = spec_1d(
            PotentialSpec::periodic(unit()),
            NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3),
            16.0,
            64,
        );
        let u = Field::from_fn(spec.grid(), |x| (-x[0] * x[0]).exp() - 0.1);
        let w = Field::from_fn(spec.grid(), |x| 1.1 * (-x[0] * x[0] * 0.9).exp() + 0.05 * x[0].sin());
        let direct = energy(&w, &spec).unwrap().j - energy(&u, &spec).unwrap().j;
        let stable = energy_difference(&u, &w, &spec).unwrap();
        assert!((direct - stable).abs() < 1e-13 * direct.abs().max(1.0));
    }

    #[test]
    fn linear_gradient_is_operator_plus_potential() {
        let spec = spec_1d(
            PotentialSpec::periodic(PeriodicProfile {
                mean: 1.5,
                amplitude: 0.5,
            }),
            NonlinearitySpec::power(3.5, 2.5, 1.0, 0.0),
            16.0,
            64,
        );
        let u = Field::from_fn(spec.grid(), |x| 1e-30 * (x[0] * 0.7).cos());
        let g = gradient(&u, &spec).unwrap();
        let expected = spec
            .laplacian()
            .apply(&u)
            .unwrap()
            .add(&u.mul(spec.v()).unwrap())
            .unwrap();
        for (a, b) in g.values().iter().zip(expected.values()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-30));
        }
    }

    #[test]
    fn translation_step_detection() {
        let nl = NonlinearitySpec::power(3.5, 2.5, 1.0, 0.3);
        let flat = spec_1d(PotentialSpec::periodic(unit()), nl, 16.0, 64);
        assert_eq!(flat.translation_step(), Some(vec![1]));
        let wavy = flat
            .with_potential(PotentialSpec::periodic(PeriodicProfile {
                mean: 1.0,
                amplitude: 0.2,
            }))
            .unwrap();
        assert_eq!(wavy.translation_step(), Some(vec![4]));
        let well = flat
            .with_potential(PotentialSpec::close_to_periodic(
                unit(),
                LocalizedPotential::gaussian(-0.3, 1.0),
            ))
            .unwrap();
        assert_eq!(well.translation_step(), None);
    }
}
