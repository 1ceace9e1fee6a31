//! Worked examples of the public operations, checked against closed forms
//! and independent quadrature.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use nehari_core::analysis::{decomposition_energy_check, translation_suite, ProfileBundle};
use nehari_core::functional::{fibering_value, norm_sq, split_energies};
use nehari_core::grid::{l2_inner, lp_norm};
use nehari_core::inequalities::{
    gamma_fn, gn_check, gn_empirical_constant, hardy_check, hardy_translation_decay, mu_star, HardyConstants,
};
use nehari_core::nehari::{dichotomy_probe, lipschitz_check, DichotomyOptions};
use nehari_core::operators::{hardy_weight, LocalizedPotential, PeriodicProfile};
use nehari_core::{energy, project, Field, NonlinearitySpec, PotentialSpec, ProblemSpec};

use common::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gaussian(g: &Arc<nehari_core::TorusGrid>, sigma: f64) -> Field {
    Field::from_fn(g, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-0.5 * r2 / (sigma * sigma)).exp()
    })
}

#[test]
fn l4_norm_of_gaussian() {
    let sigma = 1.3;
    let g = grid(1, 20.0 * sigma, 256);
    let u = gaussian(&g, sigma);
    // ∫ e^{-2x²/σ²} dx = σ √(π/2)
    let exact = (sigma * (PI / 2.0).sqrt()).powf(0.25);
    assert!(rel(lp_norm(&u, 4.0).unwrap(), exact) < 1e-6);
}

/// `∫ e^{-|x|²}/|x|` on the grid at spacing `12/m`.
fn weighted_gaussian(m: usize) -> f64 {
    let g = grid(3, 12.0, m);
    let u = gaussian(&g, 1.0);
    l2_inner(&u.mul(&u).unwrap(), &hardy_weight(&g, 1.0)).unwrap()
}

/// The nodal sum of the singular integrand converges at second order; the
/// extrapolated value is compared with the closed form.
#[test]
fn hardy_weighted_gaussian_integral() {
    let exact = gaussian_hardy_integral(3, 1.0);
    let (coarse, fine) = (weighted_gaussian(48), weighted_gaussian(96));
    let ratio = (coarse - exact) / (fine - exact);
    assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!(rel(extrapolated, exact) < 1e-4, "{:e}", rel(extrapolated, exact));
}

#[test]
fn hardy_check_on_gaussian() {
    let c = HardyConstants::new(3, 1.0).unwrap();
    let lhs = gaussian_seminorm(3, 1.0) / c.c_n_alpha.unwrap();
    let rhs = gaussian_hardy_integral(3, 1.0);
    // The seminorm converges with the box size (the symbol has a cusp at
    // k = 0), the weighted integral with the spacing.
    let wide = hardy_check(&gaussian(&grid(3, 40.0, 96), 1.0), &c).unwrap();
    assert!(rel(wide.lhs, lhs) < 1e-4, "{:e}", rel(wide.lhs, lhs));
    assert!(wide.slack > 0.0 && wide.passed);
    let reps: Vec<_> = [48, 96]
        .iter()
        .map(|&m| hardy_check(&gaussian(&grid(3, 12.0, m), 1.0), &c).unwrap())
        .collect();
    assert!(reps.iter().all(|r| r.slack > 0.0 && r.passed));
    let extrapolated = (4.0 * reps[1].rhs - reps[0].rhs) / 3.0;
    assert!(rel(extrapolated, rhs) < 1e-4, "{:e}", rel(extrapolated, rhs));
    let g = grid(3, 12.0, 48);
    assert_eq!(hardy_check(&Field::zeros(&g), &c).unwrap().slack, 0.0);
}

#[test]
fn local_hardy_constants() {
    assert!((mu_star(3, 2.0).unwrap() - 0.25).abs() < 1e-14);
    assert!((mu_star(4, 2.0).unwrap() - 1.0).abs() < 1e-14);
    assert!(rel(gamma_fn(7.25).unwrap(), 1155.3810139199893) < 1e-12);
}

#[test]
fn gagliardo_nirenberg_dilation_family() {
    let g = grid(1, 64.0, 512);
    let corpus: Vec<Field> = [0.5, 1.0, 1.5, 2.0, 3.0].iter().map(|&s| gaussian(&g, s)).collect();
    let c = gn_empirical_constant(&corpus, 2.0, 0.5).unwrap();
    for u in &corpus {
        let rep = gn_check(u, 2.0, 0.5).unwrap();
        assert!(rep.ratio <= c);
        assert_eq!(rep.sobolev_exponent + rep.l2_exponent, 3.0);
    }
    assert_eq!(gn_check(&Field::zeros(&g), 2.0, 0.5).unwrap().ratio, 0.0);
}

#[test]
fn hardy_term_decays_under_translation() {
    let g = grid(1, 40.0, 256);
    let u = gaussian(&g, 1.0 / 2f64.sqrt());
    let cells = |d: f64| (d / g.spacing(0)).round() as i64;
    let pts = hardy_translation_decay(&u, &[vec![0], vec![cells(5.0)], vec![cells(10.0)]], 0.5).unwrap();
    assert_eq!(
        pts[0].value,
        l2_inner(&u.mul(&u).unwrap(), &hardy_weight(&g, 0.5)).unwrap()
    );
    assert!(pts[2].value < pts[1].value && pts[1].value < pts[0].value);
}

/// Builds `Γ` so that `‖u‖² = 4` and `∫Γ|u|⁴ = 2` for the scaled field.
#[test]
fn fibering_maximum_at_sqrt_two() {
    let g = grid(2, 16.0, 64);
    let base = PotentialSpec::periodic(PeriodicProfile::constant(1.0));
    let probe = ProblemSpec::new(
        Arc::clone(&g),
        1.5,
        base.clone(),
        NonlinearitySpec::power(4.0, 3.0, 1.0, 0.0),
    )
    .unwrap();
    let raw = gaussian(&g, 1.0);
    let a = norm_sq(&raw, &probe).unwrap();
    let u = raw.scaled(2.0 / a.sqrt());
    let b = lp_norm(&u, 4.0).unwrap().powi(4);
    let spec = ProblemSpec::new(
        Arc::clone(&g),
        1.5,
        base,
        NonlinearitySpec::power(4.0, 3.0, 2.0 / b, 0.0),
    )
    .unwrap();

    let res = project(&u, &spec).unwrap();
    assert!(rel(res.t_star, 2f64.sqrt()) < 1e-12);

    // Independent golden-section search on t ↦ 𝒥(tu).
    let phi = |t: f64| fibering_value(&u, t, &spec).unwrap();
    let (mut lo, mut hi) = (0.5, 3.0);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-10 {
        let (c, d) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if phi(c) > phi(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let t = 0.5 * (lo + hi);
    assert!(rel(phi(t), res.fibering_max) < 1e-8);
    assert!((t - res.t_star).abs() < 1e-6);
    // ½·4·2 - 2·4/4
    assert!(rel(phi(res.t_star), 2.0) < 1e-12);
    assert!(rel(res.fibering_max, 2.0) < 1e-12);
}

#[test]
fn localized_well_lowers_energy() {
    let g = grid(1, 32.0, 256);
    let u = gaussian(&g, 1.5);
    let v_per = PeriodicProfile::constant(1.0);
    let nl = NonlinearitySpec::power(3.5, 2.5, 1.0, 0.2);
    let well = ProblemSpec::new(
        Arc::clone(&g),
        0.5,
        PotentialSpec::close_to_periodic(v_per, LocalizedPotential::gaussian(-0.3, 1.0)),
        nl,
    )
    .unwrap();
    let s = split_energies(&u, &well).unwrap();
    assert!(s.full < s.periodic);

    let hardy0 = ProblemSpec::new(Arc::clone(&g), 0.5, PotentialSpec::hardy(v_per, None, 0.0), nl).unwrap();
    let s = split_energies(&u, &hardy0).unwrap();
    assert_eq!(s.full, s.periodic);
    assert_eq!(s.full, s.limit);
}

#[test]
fn mountain_pass_geometry() {
    let spec = model_1d(None);
    let mut r = rng(3);
    let radius = 0.1;
    for _ in 0..20 {
        let v = random_bumps(spec.grid(), &mut r, 6.0, 0.5, 2.0);
        let u = v.scaled(radius / norm_sq(&v, &spec).unwrap().sqrt());
        assert!(energy(&u, &spec).unwrap().j > 0.0);
        let q = spec.nonlinearity().q;
        let ratios: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| fibering_value(&v, t, &spec).unwrap() / f64::powf(t, q))
            .collect();
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2] && ratios[2] < 0.0);
    }
}

#[test]
fn lipschitz_trivial_pairs() {
    let spec = model_1d(None);
    let mut r = rng(4);
    let u = project(&random_bumps(spec.grid(), &mut r, 4.0, 0.8, 2.0), &spec)
        .unwrap()
        .projected;
    let v = u.translated(&[16]).unwrap();
    let beta = norm_sq(&u, &spec).unwrap().sqrt();
    let same = lipschitz_check(&[(u.clone(), u.clone())], beta, &spec).unwrap();
    assert_eq!(same.max_ratio, 0.0);
    let moved = lipschitz_check(&[(u.clone(), v.clone())], beta, &spec).unwrap();
    assert_eq!(moved.violations, 0);
    // Equal norms: the left side is ‖u - τu‖ / ‖u‖.
    let d = norm_sq(&u.sub(&v).unwrap(), &spec).unwrap().sqrt();
    assert!(rel(moved.max_ratio, (d / beta) / (2.0 * d / beta)) < 1e-10);
}

#[test]
fn dichotomy_without_localized_part() {
    let periodic = model_1d(None);
    let rep = dichotomy_probe(&periodic, &periodic, &DichotomyOptions::default()).unwrap();
    assert!((rep.c - rep.c_per).abs() <= 1e-8 * rep.c_per);
}

#[test]
fn decomposition_single_profile() {
    let g = grid(2, 40.0, 128);
    let spec = ProblemSpec::new(
        Arc::clone(&g),
        1.5,
        PotentialSpec::close_to_periodic(PeriodicProfile::constant(1.0), LocalizedPotential::gaussian(-0.5, 2.0)),
        NonlinearitySpec::power(3.0, 2.5, 1.0, 0.2),
    )
    .unwrap();
    let u0 = gaussian(&g, 1.2);
    let w = gaussian(&g, 1.0).scaled(0.8);
    let cells = (10.0 / g.spacing(0)).round() as i64;
    let bundle = ProfileBundle::new(u0, vec![w], vec![vec![vec![cells / 2, 0], vec![cells, 0]]]).unwrap();
    let near = decomposition_energy_check(&bundle, 0, &spec).unwrap();
    let far = decomposition_energy_check(&bundle, 1, &spec).unwrap();
    assert!(
        far.deviation <= 1e-3 * (near.energy_u0.abs() + near.profile_energies[0].abs()),
        "{far:?}"
    );
    assert!(far.deviation < near.deviation);
}

#[test]
fn translation_adjoint_in_one_dimension() {
    let spec = model_1d(None);
    let mut r = rng(5);
    let u = random_bumps(spec.grid(), &mut r, 4.0, 0.5, 2.0);
    let v = random_bumps(spec.grid(), &mut r, 4.0, 0.5, 2.0);
    let rep = translation_suite(&u, &v, &[3 * spec.translation_step().unwrap()[0]], &spec).unwrap();
    assert!(rep.adjoint_error < 1e-15 && rep.inverse_exact && rep.passed);
    let zero = translation_suite(&u, &v, &[0], &spec).unwrap();
    assert_eq!(zero.adjoint_error, 0.0);
    assert_eq!(zero.isometry_error, 0.0);
}
