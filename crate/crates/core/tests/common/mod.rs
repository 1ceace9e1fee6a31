//! Shared fixtures and independent reference computations for the
//! integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nehari_core::operators::{LocalizedPotential, PeriodicProfile};
use nehari_core::{Field, NonlinearitySpec, PotentialSpec, ProblemSpec, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(dim: usize, length: f64, points: usize) -> Arc<TorusGrid> {
    Arc::new(TorusGrid::cubic(dim, length, points).unwrap())
}

/// Sum of 1-3 Gaussian bumps with random sign, amplitude, center in
/// `[-c, c]^N` and width in `[w0, w1]`.
pub fn random_bumps(g: &Arc<TorusGrid>, rng: &mut ChaCha8Rng, c: f64, w0: f64, w1: f64) -> Field {
    let count = rng.random_range(1..=3);
    let bumps: Vec<(f64, Vec<f64>, f64)> = (0..count)
        .map(|_| {
            let amp = rng.random_range(0.3..1.5) * if rng.random_bool(0.25) { -1.0 } else { 1.0 };
            let center = (0..g.dim()).map(|_| rng.random_range(-c..=c)).collect();
            (amp, center, rng.random_range(w0..=w1))
        })
        .collect();
    Field::from_fn(g, |x| {
        bumps
            .iter()
            .map(|(a, cen, w)| {
                let r2: f64 = x.iter().zip(cen).map(|(xi, ci)| (xi - ci).powi(2)).sum();
                a * (-0.5 * r2 / (w * w)).exp()
            })
            .sum()
    })
}

/// Positive version of [`random_bumps`] (every amplitude positive).
pub fn random_positive_bumps(g: &Arc<TorusGrid>, rng: &mut ChaCha8Rng, c: f64, w0: f64, w1: f64) -> Field {
    random_bumps(g, rng, c, w0, w1).map(f64::abs)
}

/// `V ≡ 1`, `Γ ≡ 1`, `K ≡ k` with the given exponents.
pub fn constant_spec(g: &Arc<TorusGrid>, alpha: f64, p: f64, q: f64, k: f64) -> ProblemSpec {
    ProblemSpec::new(
        Arc::clone(g),
        alpha,
        PotentialSpec::periodic(PeriodicProfile::constant(1.0)),
        NonlinearitySpec::power(p, q, 1.0, k),
    )
    .unwrap()
}

/// The one-dimensional model used for the dichotomy and standing-wave
/// checks: `N = 1`, `α = 0.5`, `L = 32`, `M = 256`, `V_per ≡ 1`, `Γ ≡ 1`,
/// `p = 3.5`, `q = 2.5`, `K ≡ 0.2`.
pub fn model_1d(v_loc: Option<f64>) -> ProblemSpec {
    let g = grid(1, 32.0, 256);
    let v_per = PeriodicProfile::constant(1.0);
    let pot = match v_loc {
        Some(a) => PotentialSpec::close_to_periodic(v_per, LocalizedPotential::gaussian(a, 1.0)),
        None => PotentialSpec::periodic(v_per),
    };
    ProblemSpec::new(g, 0.5, pot, NonlinearitySpec::power(3.5, 2.5, 1.0, 0.2)).unwrap()
}

/// Plain N-dimensional FFT on a row-major buffer, built directly on rustfft.
pub fn fftn(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = dims.iter().product();
    let mut stride = total;
    for &m in dims {
        stride /= m;
        let fft = if inverse {
            planner.plan_fft_inverse(m)
        } else {
            planner.plan_fft_forward(m)
        };
        let mut line = vec![Complex64::default(); m];
        for outer in 0..total / (m * stride) {
            for inner in 0..stride {
                let base = outer * m * stride + inner;
                for i in 0..m {
                    line[i] = data[base + i * stride];
                }
                fft.process(&mut line);
                for i in 0..m {
                    data[base + i * stride] = line[i];
                }
            }
        }
    }
}

/// `|k|^α` in FFT order for a cubic grid.
pub fn symbol(dims: &[usize], length: f64, alpha: f64) -> Vec<f64> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut k2 = 0.0;
        for &m in dims.iter().rev() {
            let i = rem % m;
            rem /= m;
            let mode = if i < m / 2 { i as f64 } else { i as f64 - m as f64 };
            k2 += (2.0 * PI * mode / length).powi(2);
        }
        out.push(if k2 == 0.0 { 0.0 } else { k2.powf(0.5 * alpha) });
    }
    out
}

/// Applies the multiplier `mult(k)` to real data.
pub fn apply_multiplier(values: &[f64], dims: &[usize], mult: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fftn(&mut buf, dims, false);
    let n = buf.len() as f64;
    for (z, m) in buf.iter_mut().zip(mult) {
        *z *= m / n;
    }
    fftn(&mut buf, dims, true);
    buf.into_iter().map(|z| z.re).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct FlowResult {
    /// `min ‖w‖²` on `{∫|w|^p = 1}`.
    pub s: f64,
    /// `(1/2 - 1/p) S^{p/(p-2)}`.
    pub c: f64,
    pub iterations: usize,
}

/// Normalized gradient flow for `K ≡ 0`, `Γ ≡ 1`, constant `V = v0`:
/// minimizes `‖w‖² = ⟨(-Δ)^{α/2}w,w⟩ + v0∫w²` on the sphere `∫|w|^p = 1`
/// with the semi-implicit step
/// `(1 + dt((-Δ)^{α/2} + v0)) w* = w + dt λ |w|^{p-2} w`, `λ = ‖w‖²`,
/// followed by renormalization. The ground-state level is then
/// `c = (1/2 - 1/p) S^{p/(p-2)}`.
#[allow(clippy::too_many_arguments)]
pub fn normalized_gradient_flow(
    dims: &[usize],
    length: f64,
    alpha: f64,
    v0: f64,
    p: f64,
    initial: &[f64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> FlowResult {
    let cell = (length / dims[0] as f64).powi(dims.len() as i32);
    let sym = symbol(dims, length, alpha);
    let implicit: Vec<f64> = sym.iter().map(|s| 1.0 / (1.0 + dt * (s + v0))).collect();
    let lp = |w: &[f64]| w.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell;
    let quad = |w: &[f64]| {
        let lw = apply_multiplier(w, dims, &sym);
        w.iter().zip(&lw).map(|(a, b)| a * b + v0 * a * a).sum::<f64>() * cell
    };
    let normalize = |w: &mut Vec<f64>| {
        let s = lp(w).powf(1.0 / p);
        w.iter_mut().for_each(|v| *v /= s);
    };
    let mut w = initial.to_vec();
    normalize(&mut w);
    let mut s = quad(&w);
    let mut iterations = 0;
    for it in 0..max_iter {
        let rhs: Vec<f64> = w.iter().map(|&v| v + dt * s * v.abs().powf(p - 2.0) * v).collect();
        let mut next = apply_multiplier(&rhs, dims, &implicit);
        normalize(&mut next);
        let s_next = quad(&next);
        let change = (s_next - s).abs();
        w = next;
        s = s_next;
        iterations = it + 1;
        if change <= tol * s {
            break;
        }
    }
    FlowResult {
        s,
        c: (0.5 - 1.0 / p) * s.powf(p / (p - 2.0)),
        iterations,
    }
}

/// `⟨(-Δ)^{α/2}u, u⟩` for `u = e^{-|x|²/2}` on `ℝ^N`.
pub fn gaussian_seminorm(n: usize, alpha: f64) -> f64 {
    sphere_area(n) * gamma((alpha + n as f64) / 2.0) / 2.0
}

/// `∫ e^{-|x|²} / |x|^α` on `ℝ^N`.
pub fn gaussian_hardy_integral(n: usize, alpha: f64) -> f64 {
    sphere_area(n) * gamma((n as f64 - alpha) / 2.0) / 2.0
}

pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Gamma function by Stirling's series after upward recurrence; accurate
/// to ~1e-15 for positive arguments.
pub fn gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 1.0;
    let mut y = x;
    while y < 20.0 {
        shift *= y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    let ln = (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + series;
    ln.exp() / shift
}
