//! Periodic sampling grids, complex fields, discrete Fourier analysis and
//! quadrature.
//!
//! Samples sit at cell centres `x_k = -L/2 + (k + 1/2) L/N` on every axis and
//! the frequency lattice is `(1/L) {-N/2, ..., N/2 - 1}^d`. The continuous
//! Fourier convention is `f^(xi) = int f(x) exp(-2 pi i <x, xi>) dx`, which is
//! approximated by a Riemann sum with weight `(L/N)^d`.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A periodic, uniform, cell-centred grid on `[-L/2, L/2)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    period: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("grid dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "samples per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Physical coordinate of sample index `k` along one axis.
    pub fn coord(&self, k: usize) -> f64 {
        -0.5 * self.period + (k as f64 + 0.5) * self.spacing()
    }

    /// Signed frequency index of FFT bin `k`.
    pub fn freq_index(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Frequency `xi` of FFT bin `k` along one axis.
    pub fn freq(&self, k: usize) -> f64 {
        self.freq_index(k) as f64 / self.period
    }

    /// Per-axis indices of a flat index (axis 0 varies slowest).
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &k| acc * self.n + k)
    }

    /// Coordinates of the sample with the given flat index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// Frequency vector of the spectral bin with the given flat index.
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.freq(idx[axis]);
        }
        xi
    }

    /// Integer number of samples per cell of side `delta`.
    pub fn samples_per_cell(&self, delta: f64) -> Result<usize> {
        let ratio = delta / self.spacing();
        let s = ratio.round();
        if s < 1.0 || (ratio - s).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Resolution(format!(
                "cell side {delta} is not an integer multiple of the grid spacing {}",
                self.spacing()
            )));
        }
        let s = s as usize;
        if !self.n.is_multiple_of(s) || !(self.n / s).is_multiple_of(2) {
            return Err(Error::Resolution(format!(
                "cells of side {delta} do not tile the torus of period {} symmetrically",
                self.period
            )));
        }
        Ok(s)
    }
}

/// Whether samples are point values or Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<C64>,
    space: Space,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![C64::new(0.0, 0.0); grid.len()], space: Space::Physical }
    }

    pub fn constant(grid: Grid, value: C64) -> Self {
        Self { grid, data: vec![value; grid.len()], space: Space::Physical }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> C64) -> Self {
        let data = (0..grid.len())
            .map(|k| {
                let x = grid.point(k);
                f(&x[..grid.dim()])
            })
            .collect();
        Self { grid, data, space: Space::Physical }
    }

    pub fn from_vec(grid: Grid, data: Vec<C64>, space: Space) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} samples supplied for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data, space })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect(), space: self.space }
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, s: C64) -> Field {
        self.map(|v| v * s)
    }

    fn zip(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        check_same_grid(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, data, space: self.space })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a * b)
    }

    /// Arithmetic mean of the samples.
    pub fn mean(&self) -> C64 {
        sum_c64(&self.data) / self.data.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete L^2 norm with quadrature weight `h^d`.
    pub fn l2_norm(&self) -> f64 {
        let squares: Vec<f64> = self.data.iter().map(|v| v.norm_sqr()).collect();
        (sum_f64(&squares) * self.grid.cell_volume()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

pub(crate) fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::Config(format!("grid mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Pairwise summation, accurate to `O(log n)` roundoffs.
pub(crate) fn sum_c64(values: &[C64]) -> C64 {
    if values.len() <= 32 {
        return values.iter().fold(C64::new(0.0, 0.0), |acc, &v| acc + v);
    }
    let (a, b) = values.split_at(values.len() / 2);
    sum_c64(a) + sum_c64(b)
}

pub(crate) fn sum_f64(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    sum_f64(a) + sum_f64(b)
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = planner().lock().expect("fft planner poisoned");
    match direction {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

const LINE_BATCH: usize = 32;

/// Unnormalised in-place multidimensional DFT of row-major data.
pub(crate) fn dft_in_place(grid: &Grid, data: &mut [C64], direction: Direction) {
    let n = grid.n();
    let dim = grid.dim();
    let fft = plan(n, direction);
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = n * stride;
        let mut buf = vec![C64::new(0.0, 0.0); n * LINE_BATCH.min(stride)];
        for chunk in data.chunks_mut(block) {
            let mut col = 0;
            while col < stride {
                let b = LINE_BATCH.min(stride - col);
                for i in 0..n {
                    let row = &chunk[i * stride + col..i * stride + col + b];
                    for (j, &v) in row.iter().enumerate() {
                        buf[j * n + i] = v;
                    }
                }
                fft.process_with_scratch(&mut buf[..b * n], &mut scratch);
                for i in 0..n {
                    let row = &mut chunk[i * stride + col..i * stride + col + b];
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = buf[j * n + i];
                    }
                }
                col += b;
            }
        }
    }
}

/// Applies a Fourier multiplier to physical-space samples: transforms,
/// multiplies bin-wise by `symbol(xi)` and transforms back. The multiplier
/// receives the frequency vector (only the first `d` entries are meaningful).
pub(crate) fn apply_multiplier(field: &Field, symbol: impl Fn(&[f64; 3]) -> C64) -> Field {
    let grid = *field.grid();
    let mut data = field.data().to_vec();
    dft_in_place(&grid, &mut data, Direction::Forward);
    let norm = 1.0 / grid.len() as f64;
    for (k, v) in data.iter_mut().enumerate() {
        *v *= symbol(&grid.frequency(k)) * norm;
    }
    dft_in_place(&grid, &mut data, Direction::Inverse);
    Field { grid, data, space: Space::Physical }
}

/// Phase factor relating the raw DFT to the centred-grid Fourier integral.
fn centring_phase(grid: &Grid, flat: usize) -> C64 {
    let idx = grid.unflatten(flat);
    let n = grid.n() as f64;
    let mut angle = 0.0;
    for &k in idx.iter().take(grid.dim()) {
        let m = grid.freq_index(k) as f64;
        angle += PI * m * (1.0 - 1.0 / n);
    }
    C64::from_polar(1.0, angle)
}

/// Forward transform approximates the continuous Fourier integral with weight
/// `h^d`; the inverse transform is its exact discrete inverse.
pub fn spectral_transform(f: &Field, direction: Direction) -> Result<Field> {
    let expected = match direction {
        Direction::Forward => Space::Physical,
        Direction::Inverse => Space::Spectral,
    };
    if f.space() != expected {
        return Err(Error::Config(format!(
            "{direction:?} transform needs a {expected:?} field, got {:?}",
            f.space()
        )));
    }
    let grid = *f.grid();
    let mut data = f.data().to_vec();
    let weight = grid.cell_volume();
    match direction {
        Direction::Forward => {
            dft_in_place(&grid, &mut data, Direction::Forward);
            for (k, v) in data.iter_mut().enumerate() {
                *v *= centring_phase(&grid, k) * weight;
            }
            Ok(Field { grid, data, space: Space::Spectral })
        }
        Direction::Inverse => {
            for (k, v) in data.iter_mut().enumerate() {
                *v *= centring_phase(&grid, k).conj();
            }
            dft_in_place(&grid, &mut data, Direction::Inverse);
            let norm = 1.0 / (grid.len() as f64 * weight);
            for v in data.iter_mut() {
                *v *= norm;
            }
            Ok(Field { grid, data, space: Space::Physical })
        }
    }
}

/// `sum_x f(x) phi(x) h^d`, without conjugation.
pub fn pairing(f: &Field, phi: &Field) -> Result<C64> {
    check_same_grid(f.grid(), phi.grid())?;
    if f.space() != Space::Physical || phi.space() != Space::Physical {
        return Err(Error::Config("pairing needs physical-space fields".into()));
    }
    let s = f.data().iter().zip(phi.data()).fold(C64::new(0.0, 0.0), |acc, (&a, &b)| acc + a * b);
    Ok(s * f.grid().cell_volume())
}

/// Discrete L^p norm; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Argument(format!("L^p norm needs p >= 1, got {p}")));
    }
    if f.space() != Space::Physical {
        return Err(Error::Config("lp_norm needs a physical-space field".into()));
    }
    if p.is_infinite() {
        return Ok(f.sup_norm());
    }
    if p == 2.0 {
        return Ok(f.l2_norm());
    }
    let s: f64 = f.data().iter().map(|v| v.norm().powf(p)).sum();
    Ok((s * f.grid().cell_volume()).powf(1.0 / p))
}

/// Values indexed by the cells `n delta + [0, delta)^d` of the torus, with
/// `n` ranging over `{-C/2, ..., C/2 - 1}^d` and `C = L / delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMap {
    dim: usize,
    cells_per_axis: usize,
    delta: f64,
    values: Vec<C64>,
}

impl CellMap {
    pub fn new(dim: usize, cells_per_axis: usize, delta: f64, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), cells_per_axis.pow(dim as u32));
        Self { dim, cells_per_axis, delta, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Lattice index `n` of the cell stored at flat position `flat`.
    pub fn site(&self, flat: usize) -> [i64; 3] {
        let c = self.cells_per_axis;
        let half = (c / 2) as i64;
        let mut n = [0i64; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            n[axis] = (rem % c) as i64 - half;
            rem /= c;
        }
        n
    }

    pub fn get(&self, site: &[i64]) -> C64 {
        let c = self.cells_per_axis as i64;
        let half = c / 2;
        let flat = site
            .iter()
            .take(self.dim)
            .fold(0usize, |acc, &n| acc * c as usize + (n + half).rem_euclid(c) as usize);
        self.values[flat]
    }

    /// Piecewise-constant prolongation back onto `grid`.
    pub fn prolong(&self, grid: &Grid) -> Result<Field> {
        let s = grid.samples_per_cell(self.delta)?;
        if grid.dim() != self.dim || grid.n() / s != self.cells_per_axis {
            return Err(Error::Config("cell map does not match grid".into()));
        }
        let c = self.cells_per_axis;
        let data = (0..grid.len())
            .map(|k| {
                let idx = grid.unflatten(k);
                let flat = idx.iter().take(self.dim).fold(0, |acc, &i| acc * c + i / s);
                self.values[flat]
            })
            .collect();
        Field::from_vec(*grid, data, Space::Physical)
    }
}

/// Exact averages of the samples of `f` over the cells of side `delta`.
pub fn cell_average(f: &Field, delta: f64) -> Result<CellMap> {
    let grid = *f.grid();
    let s = grid.samples_per_cell(delta)?;
    let c = grid.n() / s;
    let dim = grid.dim();
    let mut sums = vec![C64::new(0.0, 0.0); c.pow(dim as u32)];
    for (k, &v) in f.data().iter().enumerate() {
        let idx = grid.unflatten(k);
        let flat = idx.iter().take(dim).fold(0, |acc, &i| acc * c + i / s);
        sums[flat] += v;
    }
    let per_cell = (s as f64).powi(dim as i32);
    for v in sums.iter_mut() {
        *v /= per_cell;
    }
    Ok(CellMap::new(dim, c, delta, sums))
}

/// Serde adapter for complex numbers: written as `[re, im]`, read from either
/// `[re, im]` or a plain real number.
pub mod cplx {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::C64;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => C64::new(re, 0.0),
            Repr::Pair([re, im]) => C64::new(re, im),
        })
    }

    /// The same adapter for lists of complex numbers.
    pub mod list {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        use super::{Repr, C64};

        pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
            Ok(Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| match r {
                    Repr::Real(re) => C64::new(re, 0.0),
                    Repr::Pair([re, im]) => C64::new(re, im),
                })
                .collect())
        }
    }
}
