//! Periodic torus discretization, the discrete Fourier transform and
//! quadrature-weighted inner products.
//!
//! Nodes sit at `(m + 1/2) h - L/2`, so the box is symmetric about the origin
//! and no node coincides with it. Spectral coefficients approximate the
//! continuous transform `∫ e^{-i k·x} u(x) dx`, which makes
//! `Σ u_j² h^N = L^{-N} Σ |û_k|²` hold without stray factors.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Compensated (Neumaier) summation.
pub(crate) fn accurate_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[derive(Clone)]
struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Discretized periodic box standing in for ℝ^N.
#[derive(Clone)]
pub struct TorusGrid {
    points: Vec<usize>,
    lengths: Vec<f64>,
    plans: Arc<Vec<AxisPlan>>,
    phases: Arc<OnceLock<Vec<Complex64>>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("points", &self.points)
            .field("lengths", &self.lengths)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.lengths == other.lengths
    }
}

impl TorusGrid {
    /// Cubic grid: `dimension` axes of length `box_length` with `points` nodes each.
    pub fn cubic(dimension: usize, box_length: f64, points: usize) -> Result<Self> {
        Self::new(vec![box_length; dimension], vec![points; dimension])
    }

    pub fn new(lengths: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if lengths.len() != points.len() {
            return Err(Error::InvalidGrid(format!(
                "{} box lengths for {} axes",
                lengths.len(),
                points.len()
            )));
        }
        for (&l, &m) in lengths.iter().zip(&points) {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("box length {l} must be positive")));
            }
            if m < 8 || m % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be even and >= 8, got {m}"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let plans = points
            .iter()
            .map(|&m| AxisPlan {
                forward: planner.plan_fft_forward(m),
                inverse: planner.plan_fft_inverse(m),
            })
            .collect();
        Ok(Self {
            points,
            lengths,
            plans: Arc::new(plans),
            phases: Arc::new(OnceLock::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Row-major stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    /// Node coordinate; mirrored indices give exactly negated values.
    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        let twice = 2 * index as i64 + 1 - self.points[axis] as i64;
        twice as f64 * 0.5 * self.spacing(axis)
    }

    /// Signed mode number `m ∈ {-M/2, …, M/2 - 1}` of FFT index `index`.
    pub fn mode_number(&self, axis: usize, index: usize) -> i64 {
        let m = self.points[axis];
        if index < m / 2 {
            index as i64
        } else {
            index as i64 - m as i64
        }
    }

    pub fn wavenumber(&self, axis: usize, index: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode_number(axis, index) as f64 / self.lengths[axis]
    }

    /// Multi-index of flat node `flat`.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            let m = self.points[axis];
            out[axis] = flat % m;
            flat /= m;
        }
    }

    /// Coordinates of every node, row-major, `dim` values per node.
    pub fn node_coordinates(&self) -> Vec<f64> {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let mut out = Vec::with_capacity(self.len() * n);
        for flat in 0..self.len() {
            self.unravel(flat, &mut idx);
            for (axis, &i) in idx.iter().enumerate() {
                out.push(self.coordinate(axis, i));
            }
        }
        out
    }

    /// `|k|²` at every spectral node, in FFT order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                idx.iter()
                    .enumerate()
                    .map(|(axis, &i)| self.wavenumber(axis, i).powi(2))
                    .sum()
            })
            .collect()
    }

    /// The Fourier symbol `|k|^alpha` in FFT order.
    pub fn symbol(&self, alpha: f64) -> Vec<f64> {
        self.wavenumber_sq()
            .into_iter()
            .map(|k2| if k2 == 0.0 { 0.0 } else { k2.powf(0.5 * alpha) })
            .collect()
    }

    /// Largest `|k|` on the lattice.
    pub fn max_wavenumber(&self) -> f64 {
        (0..self.dim())
            .map(|a| (std::f64::consts::PI * self.points[a] as f64 / self.lengths[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Unnormalized in-place N-dimensional DFT over a row-major buffer.
    pub(crate) fn dft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let total = data.len();
        let mut block = Vec::new();
        let mut scratch = Vec::new();
        for axis in 0..self.dim() {
            let plan = &self.plans[axis];
            let fft = if inverse { &plan.inverse } else { &plan.forward };
            let len = self.points[axis];
            let stride = self.stride(axis);
            scratch.resize(fft.get_inplace_scratch_len(), Complex64::default());
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            // Gather the `stride` lines of each outer slab into one contiguous block.
            block.resize(len * stride, Complex64::default());
            for slab in data.chunks_exact_mut(len * stride).take(total / (len * stride)) {
                for s in 0..stride {
                    for i in 0..len {
                        block[s * len + i] = slab[i * stride + s];
                    }
                }
                fft.process_with_scratch(&mut block, &mut scratch);
                for s in 0..stride {
                    for i in 0..len {
                        slab[i * stride + s] = block[s * len + i];
                    }
                }
            }
        }
    }

    /// `e^{-i k·x_0}` at every spectral node, with `x_0` the first node.
    /// `exp(-i k·x_0)` per mode, computed on first use.
    fn offset_phase(&self) -> &[Complex64] {
        self.phases.get_or_init(|| self.compute_offset_phase())
    }

    fn compute_offset_phase(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut idx = vec![0usize; n];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                let phase: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(axis, &i)| self.wavenumber(axis, i) * self.coordinate(axis, 0))
                    .sum();
                Complex64::from_polar(1.0, -phase)
            })
            .collect()
    }
}

/// Real grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<TorusGrid>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow { term: "field values" });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.dim();
        let coords = grid.node_coordinates();
        let values = coords.chunks_exact(n).map(f).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        self.map(|v| factor * v)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// Nodewise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Cyclic translation by whole grid cells: `(τ_s u)(x) = u(x - s h)`.
    pub fn translated(&self, shift: &[i64]) -> Result<Field> {
        let grid = &self.grid;
        if shift.len() != grid.dim() {
            return Err(Error::InvalidShift(format!(
                "shift has {} components on a {}-dimensional grid",
                shift.len(),
                grid.dim()
            )));
        }
        let n = grid.dim();
        let mut idx = vec![0usize; n];
        let mut out = vec![0.0; self.values.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            grid.unravel(flat, &mut idx);
            let mut target = 0usize;
            for axis in 0..n {
                let m = grid.points[axis] as i64;
                let j = (idx[axis] as i64 + shift[axis]).rem_euclid(m) as usize;
                target = target * grid.points[axis] + j;
            }
            out[target] = v;
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values: out,
        })
    }

    /// Fraction of `∫ u²` carried by nodes with some `|x_i| > (1/2 - margin) L_i`.
    pub fn tail_mass_fraction(&self, margin: f64) -> f64 {
        let grid = &self.grid;
        let n = grid.dim();
        let mut idx = vec![0usize; n];
        let mut total = 0.0;
        let mut tail = 0.0;
        for (flat, &v) in self.values.iter().enumerate() {
            grid.unravel(flat, &mut idx);
            let w = v * v;
            total += w;
            let outer = idx
                .iter()
                .enumerate()
                .any(|(a, &i)| grid.coordinate(a, i).abs() > (0.5 - margin) * grid.lengths[a]);
            if outer {
                tail += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

/// Spectral coefficients `û(k) ≈ ∫ e^{-i k·x} u(x) dx` in FFT order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<TorusGrid>,
    coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// `L^{-N} Σ |û_k|²`, the discrete Plancherel side of `|u|₂²`.
    pub fn energy(&self) -> f64 {
        accurate_sum(self.coefficients.iter().map(|c| c.norm_sqr())) / self.grid.volume()
    }
}

pub fn forward_transform(u: &Field) -> Spectrum {
    let grid = &u.grid;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.dft_in_place(&mut data, false);
    let weight = grid.cell_volume();
    for (c, phase) in data.iter_mut().zip(grid.offset_phase().iter()) {
        *c *= phase * weight;
    }
    Spectrum {
        grid: Arc::clone(grid),
        coefficients: data,
    }
}

/// Inverse of [`forward_transform`]; imaginary parts are discarded.
pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let grid = &spectrum.grid;
    let weight = 1.0 / grid.volume();
    let mut data: Vec<Complex64> = spectrum
        .coefficients
        .iter()
        .zip(grid.offset_phase().iter())
        .map(|(c, phase)| c * phase.conj() * weight)
        .collect();
    grid.dft_in_place(&mut data, true);
    Field {
        grid: Arc::clone(grid),
        values: data.into_iter().map(|c| c.re).collect(),
    }
}

/// Applies the real even Fourier symbol `symbol` (FFT order) to `u`.
pub(crate) fn apply_symbol(u: &Field, symbol: &[f64]) -> Field {
    let grid = &u.grid;
    let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.dft_in_place(&mut data, false);
    let scale = 1.0 / grid.len() as f64;
    for (c, &s) in data.iter_mut().zip(symbol) {
        *c *= s * scale;
    }
    grid.dft_in_place(&mut data, true);
    Field {
        grid: Arc::clone(grid),
        values: data.into_iter().map(|c| c.re).collect(),
    }
}

/// `∫ u v dx` with weight `h^N`.
pub fn l2_inner(u: &Field, v: &Field) -> Result<f64> {
    u.same_grid(v)?;
    Ok(accurate_sum(u.values.iter().zip(&v.values).map(|(a, b)| a * b)) * u.grid.cell_volume())
}

/// `|u|_r`; `r = f64::INFINITY` gives the maximum modulus.
pub fn lp_norm(u: &Field, r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidExponent {
            value: r,
            reason: "Lebesgue exponent must be >= 1".into(),
        });
    }
    if r.is_infinite() {
        return Ok(u.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let sum = accurate_sum(u.values.iter().map(|v| v.abs().powf(r)));
    Ok((sum * u.grid.cell_volume()).powf(1.0 / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(l: f64, m: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::cubic(1, l, m).unwrap())
    }

    #[test]
    fn rejects_bad_point_counts() {
        assert!(TorusGrid::cubic(1, 1.0, 6).is_err());
        assert!(TorusGrid::cubic(1, 1.0, 9).is_err());
        assert!(TorusGrid::cubic(1, -1.0, 8).is_err());
        assert!(TorusGrid::new(vec![1.0, 2.0], vec![8]).is_err());
    }

    #[test]
    fn nodes_avoid_origin_and_span_box() {
        let g = TorusGrid::cubic(1, 2.0, 8).unwrap();
        assert!((0..8).all(|i| g.coordinate(0, i) != 0.0));
        assert!((g.coordinate(0, 0) + 0.875).abs() < 1e-15);
        assert!((g.coordinate(0, 7) - 0.875).abs() < 1e-15);
        assert_eq!(g.spacing(0) * 8.0, 2.0);
    }

    #[test]
    fn frequency_lattice_layout() {
        let g = TorusGrid::cubic(1, 2.0 * PI, 8).unwrap();
        let m: Vec<i64> = (0..8).map(|i| g.mode_number(0, i)).collect();
        assert_eq!(m, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.wavenumber(0, 3), 3.0);
    }

    #[test]
    fn constant_field_is_pure_zero_mode() {
        let g = grid1(2.0, 16);
        let s = forward_transform(&Field::constant(&g, 1.0));
        assert!((s.coefficients()[0].re - 2.0).abs() < 1e-14);
        assert!(s.coefficients()[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn cosine_occupies_two_modes() {
        let g = grid1(2.0 * PI, 32);
        let u = Field::from_fn(&g, |x| (3.0 * x[0]).cos());
        let s = forward_transform(&u);
        let big: Vec<usize> = s
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-12)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(big, vec![3, 29]);
    }

    #[test]
    fn cosine_inner_product_is_half_volume() {
        let g = grid1(2.0 * PI, 64);
        let u = Field::from_fn(&g, |x| (5.0 * x[0]).cos());
        assert!((l2_inner(&u, &u).unwrap() - PI).abs() < 1e-13);
        assert_eq!(l2_inner(&u, &Field::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = grid1(2.0, 16);
        let one = Field::constant(&g, 1.0);
        assert!((lp_norm(&one, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&Field::zeros(&g), 3.0).unwrap(), 0.0);
        assert_eq!(lp_norm(&one, f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(lp_norm(&one, 0.5), Err(Error::InvalidExponent { .. })));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Field::zeros(&grid1(2.0, 16));
        let b = Field::zeros(&grid1(2.0, 32));
        assert!(matches!(l2_inner(&a, &b), Err(Error::GridMismatch)));
        // Equal grids built separately interoperate.
        let c = Field::zeros(&grid1(2.0, 16));
        assert!(l2_inner(&a, &c).is_ok());
    }

    #[test]
    fn translation_round_trip_and_wrap() {
        let g = Arc::new(TorusGrid::new(vec![1.0, 2.0], vec![8, 10]).unwrap());
        let u = Field::from_fn(&g, |x| x[0] + 10.0 * x[1]);
        let s = u.translated(&[3, -7]).unwrap();
        assert_eq!(s.translated(&[-3, 7]).unwrap(), u);
        // τ_s u at node j equals u at node j - s.
        assert_eq!(s.values()[3 * 10 + 3], u.values()[0]);
    }

    #[test]
    fn accurate_sum_cancels() {
        let terms = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(accurate_sum(terms), 2.0);
    }
}
