//! Dilatation models: bump profiles, site distributions, envelopes, random
//! bump fields and the (stochastic) multiscale tensor product.
//!
//! Randomness is attached to lattice sites. The stream for site `n` at level
//! `j` is seeded from a 64-bit mix of `(seed, j, n)`, so a field is a pure
//! function of its inputs no matter how or in which order it is evaluated.
//! Different levels `j` use independent streams.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cell_average, cplx, CellMap, Field, Grid, Space, C64};

/// Minimum samples per cell for profiles that are not cell-aligned indicators.
pub const SMOOTH_MIN_SAMPLES: usize = 8;

/// Relative cutoff used to truncate non-compact profiles.
pub const TAIL_EPS: f64 = 1e-12;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of integer labels.
pub fn derive_seed(seed: u64, labels: &[i64]) -> u64 {
    labels.iter().fold(splitmix64(seed), |h, &l| splitmix64(h ^ (l as u64).rotate_left(17)))
}

/// Random stream of site `n` at level `j`.
pub fn site_rng(seed: u64, j: u32, site: &[i64]) -> ChaCha8Rng {
    let mut labels = vec![j as i64];
    labels.extend_from_slice(site);
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &labels))
}

/// A function on `R^d`, given in cell units relative to a cell's lower
/// corner, that gets translated onto every cell of the lattice.
pub trait Profile: Sync {
    fn eval(&self, u: &[f64]) -> C64;

    /// How many neighbouring cells (per axis, each side) a translate reaches.
    fn reach(&self) -> usize;

    fn min_samples_per_cell(&self) -> usize {
        SMOOTH_MIN_SAMPLES
    }
}

fn smooth_step_bump(t: f64) -> f64 {
    // exp(1 - 1/(1 - s^2)) on s = 2t - 1 in (-1, 1); peak value 1 at t = 1/2.
    let s = 2.0 * t - 1.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Radial C-infinity bump of radius 1 and peak 1.
pub fn radial_bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// Built-in bump profiles `g(z)`; the random parameter enters as a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BumpProfile {
    /// `1_{[0,1)^d}`.
    UnitSquareIndicator,
    /// `scale * exp(-pi |u - c|^2)` about the cell centre `c`.
    GaussianBump { scale: f64 },
    /// `scale * prod_i b(u_i)` with a C-infinity bump `b` supported in (0, 1).
    SmoothSquareBump { scale: f64 },
    /// `phi(. - A) + phi(. + A)` with `phi` the unit radial bump, rescaled
    /// into the unit cell (planar only).
    TwoBump { separation: f64, scale: f64 },
    /// `+1` on the left half of the cell, `-1` on the right half.
    HalfCellDipole,
    /// Radial profile about the cell centre, `(radius, value)` pairs in cell
    /// units, linear in between and zero beyond the last radius.
    CustomRadial { table: Vec<(f64, f64)> },
}

impl BumpProfile {
    fn centre_dist2(u: &[f64]) -> f64 {
        u.iter().map(|v| (v - 0.5) * (v - 0.5)).sum()
    }

    /// Radius beyond which `|g| < eps * max |g|`, measured from the cell centre.
    pub fn tail_radius(&self, eps: f64) -> f64 {
        match self {
            BumpProfile::GaussianBump { .. } => ((1.0 / eps).ln() / PI).sqrt(),
            BumpProfile::CustomRadial { table } => table.last().map_or(0.0, |e| e.0),
            _ => 0.5 * 3f64.sqrt(),
        }
    }

    fn is_cell_supported(&self) -> bool {
        match self {
            BumpProfile::GaussianBump { .. } => false,
            BumpProfile::CustomRadial { table } => table.last().is_none_or(|e| e.0 <= 0.5),
            _ => true,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, BumpProfile::UnitSquareIndicator | BumpProfile::HalfCellDipole)
    }

    pub fn sup(&self) -> f64 {
        match self {
            BumpProfile::GaussianBump { scale }
            | BumpProfile::SmoothSquareBump { scale }
            | BumpProfile::TwoBump { scale, .. } => scale.abs(),
            BumpProfile::CustomRadial { table } => table.iter().fold(0.0, |m, e| m.max(e.1.abs())),
            _ => 1.0,
        }
    }
}

impl Profile for BumpProfile {
    fn eval(&self, u: &[f64]) -> C64 {
        let v = match self {
            BumpProfile::UnitSquareIndicator => {
                if u.iter().all(|&t| (0.0..1.0).contains(&t)) {
                    1.0
                } else {
                    0.0
                }
            }
            BumpProfile::GaussianBump { scale } => scale * (-PI * Self::centre_dist2(u)).exp(),
            BumpProfile::SmoothSquareBump { scale } => {
                scale * u.iter().map(|&t| smooth_step_bump(t)).product::<f64>()
            }
            BumpProfile::TwoBump { separation, scale } => {
                if u.len() != 2 {
                    return C64::new(0.0, 0.0);
                }
                // Support of phi_A is [-A-1, A+1] x [-1, 1]; squeeze it into (0,1)^2.
                let stretch = 2.0 * (separation + 1.0) + 0.5;
                let x = (u[0] - 0.5) * stretch;
                let y = (u[1] - 0.5) * stretch;
                let left = radial_bump(((x + separation).powi(2) + y * y).sqrt());
                let right = radial_bump(((x - separation).powi(2) + y * y).sqrt());
                scale * (left + right)
            }
            BumpProfile::HalfCellDipole => {
                if !u.iter().all(|&t| (0.0..1.0).contains(&t)) {
                    0.0
                } else if u[0] < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            BumpProfile::CustomRadial { table } => {
                let r = Self::centre_dist2(u).sqrt();
                interpolate_radial(table, r)
            }
        };
        C64::new(v, 0.0)
    }

    fn reach(&self) -> usize {
        if self.is_cell_supported() {
            0
        } else {
            (self.tail_radius(TAIL_EPS) + 0.5).ceil() as usize
        }
    }

    fn min_samples_per_cell(&self) -> usize {
        if self.is_indicator() {
            1
        } else {
            SMOOTH_MIN_SAMPLES
        }
    }
}

fn interpolate_radial(table: &[(f64, f64)], r: f64) -> f64 {
    match table.iter().position(|e| e.0 >= r) {
        None => 0.0,
        Some(0) => table[0].1,
        Some(i) => {
            let (r0, v0) = table[i - 1];
            let (r1, v1) = table[i];
            if r1 <= r0 {
                v1
            } else {
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }
}

/// Law of the per-site random amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Distribution {
    /// Uniform on `{-1, +1}`.
    #[default]
    Rademacher,
    /// Uniform on the closed disk of the given radius.
    SymmetricComplexDisk { radius: f64 },
    Constant {
        #[serde(with = "cplx")]
        value: C64,
    },
    /// Distortion `K = 1 + E / gamma` with `E ~ Exp(1)` (so `P(K > t) =
    /// exp(-gamma (t - 1))`), capped at `k_cap`; modulus `(K-1)/(K+1)` and a
    /// uniform phase.
    DegenerateK { gamma: f64, k_cap: f64 },
}


impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::SymmetricComplexDisk { radius } if !(radius >= 0.0) => {
                Err(Error::Model(format!("disk radius must be nonnegative, got {radius}")))
            }
            Distribution::DegenerateK { gamma, k_cap } => {
                if !(gamma > 2.0) {
                    return Err(Error::Model(format!("tail exponent gamma must exceed 2, got {gamma}")));
                }
                if !(k_cap > 1.0 && k_cap.is_finite()) {
                    return Err(Error::Model(format!("K cap must be finite and > 1, got {k_cap}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// One draw and whether it hit the distortion cap.
    pub fn sample(&self, rng: &mut impl Rng) -> (C64, bool) {
        match *self {
            Distribution::Rademacher => {
                (C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0), false)
            }
            Distribution::SymmetricComplexDisk { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                (C64::from_polar(r, theta), false)
            }
            Distribution::Constant { value } => (value, false),
            Distribution::DegenerateK { gamma, k_cap } => {
                let e = -(1.0 - rng.random::<f64>()).ln();
                let mut k = 1.0 + e / gamma;
                let clamped = k > k_cap;
                if clamped {
                    k = k_cap;
                }
                let modulus = (k - 1.0) / (k + 1.0);
                let theta = 2.0 * PI * rng.random::<f64>();
                (C64::from_polar(modulus, theta), clamped)
            }
        }
    }

    /// Whether `X` and `-X` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Distribution::Constant { value } => value.norm() == 0.0,
            _ => true,
        }
    }

    pub fn max_modulus(&self) -> f64 {
        match *self {
            Distribution::Rademacher => 1.0,
            Distribution::SymmetricComplexDisk { radius } => radius,
            Distribution::Constant { value } => value.norm(),
            Distribution::DegenerateK { k_cap, .. } => (k_cap - 1.0) / (k_cap + 1.0),
        }
    }
}

/// Axis-aligned box `[lo, lo + side)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub side: f64,
}

impl BoxRegion {
    /// The unit cube `[0, 1)^d`.
    pub fn unit(dim: usize) -> Self {
        Self { lo: vec![0.0; dim], side: 1.0 }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lo).all(|(&v, &lo)| v >= lo && v < lo + self.side)
    }
}

/// Macroscopic modulation `phi`, independent of the scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant {
        #[serde(with = "cplx")]
        value: C64,
    },
    /// `value * 1_Q`.
    IndicatorSquare {
        region: BoxRegion,
        #[serde(with = "cplx")]
        value: C64,
    },
    /// `height * b(|x - center| / radius)` with the unit radial bump `b`.
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
        #[serde(with = "cplx")]
        height: C64,
    },
    /// `height * exp(-|x - center|^2 / width^2)`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(with = "cplx")]
        height: C64,
    },
    /// `1_U * inner` for a box `U`.
    HolderProduct { region: BoxRegion, inner: Box<Envelope> },
}

impl Envelope {
    pub fn constant(value: C64) -> Self {
        Envelope::Constant { value }
    }

    pub fn gaussian(center: &[f64], width: f64, height: f64) -> Self {
        Envelope::Gaussian { center: center.to_vec(), width, height: C64::new(height, 0.0) }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        match self {
            Envelope::Constant { value } => *value,
            Envelope::IndicatorSquare { region, value } => {
                if region.contains(x) {
                    *value
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Envelope::SmoothBump { center, radius, height } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                height * radial_bump(r2.sqrt() / radius)
            }
            Envelope::Gaussian { center, width, height } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                height * (-r2 / (width * width)).exp()
            }
            Envelope::HolderProduct { region, inner } => {
                if region.contains(x) {
                    inner.eval(x)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        }
    }

    /// `sup |phi|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Envelope::Constant { value } | Envelope::IndicatorSquare { value, .. } => value.norm(),
            Envelope::SmoothBump { height, .. } | Envelope::Gaussian { height, .. } => height.norm(),
            Envelope::HolderProduct { inner, .. } => inner.sup_bound(),
        }
    }

    /// L^1-Holder exponent of the built-in envelope (metadata only).
    pub fn holder_exponent(&self) -> f64 {
        1.0
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        Field::from_fn(*grid, |x| self.eval(x))
    }
}

/// `sum_n w_n g(x / delta - n)` on the torus, for cell weights `w`.
pub fn sum_translates(grid: &Grid, weights: &CellMap, profile: &dyn Profile) -> Result<Field> {
    let delta = weights.delta();
    let s = grid.samples_per_cell(delta)?;
    if s < profile.min_samples_per_cell() {
        return Err(Error::Resolution(format!(
            "delta / h = {s} is below the required {} samples per cell",
            profile.min_samples_per_cell()
        )));
    }
    let dim = grid.dim();
    let c = grid.n() / s;
    if weights.cells_per_axis() != c || weights.dim() != dim {
        return Err(Error::Config("cell weights do not match the grid".into()));
    }
    let reach = profile.reach();
    let width = 2 * reach + 1;
    if width > c {
        return Err(Error::Resolution(format!(
            "profile tail spans {width} cells but the torus only has {c} per axis"
        )));
    }
    let offsets = s.pow(dim as u32);
    let shifts = width.pow(dim as u32);
    let mut table = vec![C64::new(0.0, 0.0); offsets * shifts];
    let mut u = [0.0; 3];
    for o in 0..offsets {
        let mut rem_o = o;
        let mut base = [0.0; 3];
        for axis in (0..dim).rev() {
            base[axis] = ((rem_o % s) as f64 + 0.5) / s as f64;
            rem_o /= s;
        }
        for m in 0..shifts {
            let mut rem_m = m;
            for axis in (0..dim).rev() {
                let shift = (rem_m % width) as f64 - reach as f64;
                rem_m /= width;
                u[axis] = base[axis] + shift;
            }
            table[o * shifts + m] = profile.eval(&u[..dim]);
        }
    }

    let w = weights.values();
    let ci = c as i64;
    let data: Vec<C64> = (0..grid.len())
        .map(|k| {
            let idx = grid.unflatten(k);
            let mut o = 0;
            let mut cell = [0i64; 3];
            for axis in 0..dim {
                o = o * s + idx[axis] % s;
                cell[axis] = (idx[axis] / s) as i64;
            }
            let row = &table[o * shifts..(o + 1) * shifts];
            if reach == 0 {
                let flat = (0..dim).fold(0usize, |acc, a| acc * c + cell[a] as usize);
                return w[flat] * row[0];
            }
            let mut acc = C64::new(0.0, 0.0);
            for (m, &g) in row.iter().enumerate() {
                if g.re == 0.0 && g.im == 0.0 {
                    continue;
                }
                let mut rem_m = m;
                let mut shift = [0i64; 3];
                for axis in (0..dim).rev() {
                    shift[axis] = (rem_m % width) as i64 - reach as i64;
                    rem_m /= width;
                }
                let flat = (0..dim)
                    .fold(0usize, |f, a| f * c + (cell[a] - shift[a]).rem_euclid(ci) as usize);
                acc += w[flat] * g;
            }
            acc
        })
        .collect();
    Field::from_vec(*grid, data, Space::Physical)
}

/// Riemann sum of `g` over `R^d` using the offsets a grid with `s` samples
/// per cell would use, so it matches [`sum_translates`] exactly.
pub fn profile_integral(profile: &dyn Profile, s: usize, dim: usize) -> C64 {
    let reach = profile.reach() as i64;
    let width = (2 * reach + 1) as usize;
    let mut total = C64::new(0.0, 0.0);
    let mut u = [0.0; 3];
    for o in 0..s.pow(dim as u32) {
        for m in 0..width.pow(dim as u32) {
            let (mut ro, mut rm) = (o, m);
            for axis in (0..dim).rev() {
                u[axis] = ((ro % s) as f64 + 0.5) / s as f64 + ((rm % width) as i64 - reach) as f64;
                ro /= s;
                rm /= width;
            }
            total += profile.eval(&u[..dim]);
        }
    }
    total / (s as f64).powi(dim as i32)
}

/// `g2(u) sum_n g(u + n)`, the profile of a product of two tensor products
/// at the same scale.
pub struct PeriodizedProduct<'a> {
    pub g: &'a dyn Profile,
    pub g2: &'a dyn Profile,
    pub dim: usize,
}

impl Profile for PeriodizedProduct<'_> {
    fn eval(&self, u: &[f64]) -> C64 {
        let g2 = self.g2.eval(u);
        if g2.norm() == 0.0 {
            return g2;
        }
        let reach = (self.g.reach() + self.g2.reach() + 1) as i64;
        let width = 2 * reach + 1;
        let mut sum = C64::new(0.0, 0.0);
        let mut v = [0.0; 3];
        for m in 0..(width as usize).pow(self.dim as u32) {
            let mut rm = m as i64;
            for axis in (0..self.dim).rev() {
                v[axis] = u[axis] + ((rm % width) - reach) as f64;
                rm /= width;
            }
            sum += self.g.eval(&v[..self.dim]);
        }
        g2 * sum
    }

    fn reach(&self) -> usize {
        self.g2.reach()
    }

    fn min_samples_per_cell(&self) -> usize {
        self.g.min_samples_per_cell().max(self.g2.min_samples_per_cell())
    }
}

/// `sup |g(u)| (1 + |u - c|)^m` along the axes and diagonals out to
/// `radius` cells from the cell centre `c`, for `m = 0..=max_m`.
pub fn decay_constants(profile: &dyn Profile, dim: usize, radius: f64, max_m: i32) -> Vec<f64> {
    let mut out = vec![0.0f64; max_m as usize + 1];
    let steps = 400;
    let dirs: Vec<Vec<f64>> = (0..(1usize << dim))
        .map(|bits| (0..dim).map(|a| if bits >> a & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .chain((0..dim).map(|a| (0..dim).map(|b| if a == b { 1.0 } else { 0.0 }).collect()))
        .collect();
    for dir in &dirs {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..=steps {
            let r = radius * k as f64 / steps as f64;
            let u: Vec<f64> = dir.iter().map(|v| 0.5 + r * v / norm).collect();
            let g = profile.eval(&u).norm();
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = slot.max(g * (1.0 + r).powi(m as i32));
            }
        }
    }
    out
}

/// Site counts and cap events from a random draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteStats {
    pub sites: usize,
    pub clamped: usize,
}

/// Draws one amplitude per torus cell from `dist`, restricted to cells
/// accepted by `keep` (others get zero).
pub fn draw_sites(
    grid: &Grid,
    delta: f64,
    j: u32,
    dist: &Distribution,
    seed: u64,
    keep: impl Fn(&[i64]) -> bool,
) -> Result<(CellMap, SiteStats)> {
    dist.validate()?;
    let s = grid.samples_per_cell(delta)?;
    let c = grid.n() / s;
    let dim = grid.dim();
    let mut map = CellMap::new(dim, c, delta, vec![C64::new(0.0, 0.0); c.pow(dim as u32)]);
    let mut stats = SiteStats::default();
    for flat in 0..map.len() {
        let site = map.site(flat);
        if !keep(&site[..dim]) {
            continue;
        }
        let mut rng = site_rng(seed, j, &site[..dim]);
        let (value, clamped) = dist.sample(&mut rng);
        map.values_mut()[flat] = value;
        stats.sites += 1;
        stats.clamped += clamped as usize;
    }
    Ok((map, stats))
}

pub fn scale_delta(j: u32) -> f64 {
    0.5f64.powi(j as i32)
}

/// Random bump field `B_delta = sum_n X_n g(x/delta - n)` at `delta = 2^-j`.
pub fn bump_field(
    grid: &Grid,
    profile: &BumpProfile,
    dist: &Distribution,
    j: u32,
    seed: u64,
) -> Result<Field> {
    let delta = scale_delta(j);
    let (weights, _) = draw_sites(grid, delta, j, dist, seed, |_| true)?;
    sum_translates(grid, &weights, profile)
}

/// Source of the macroscopic factor in a tensor product.
#[derive(Debug, Clone, Copy)]
pub enum TensorFactor<'a> {
    Envelope(&'a Envelope),
    Field(&'a Field),
}

/// `f (x)_delta g = sum_n [f]_delta(n) g(x/delta - n, X_n)`; deterministic
/// when `randomness` is `None`.
pub fn tensor_product(
    grid: &Grid,
    f: TensorFactor<'_>,
    profile: &dyn Profile,
    j: u32,
    randomness: Option<(&Distribution, u64)>,
) -> Result<Field> {
    let delta = scale_delta(j);
    let sampled;
    let field = match f {
        TensorFactor::Envelope(env) => {
            sampled = env.sample(grid);
            &sampled
        }
        TensorFactor::Field(field) => field,
    };
    let mut weights = cell_average(field, delta)?;
    if let Some((dist, seed)) = randomness {
        let (draws, _) = draw_sites(grid, delta, j, dist, seed, |_| true)?;
        for (w, x) in weights.values_mut().iter_mut().zip(draws.values()) {
            *w *= x;
        }
    }
    sum_translates(grid, &weights, profile)
}

/// Outcome of a Monte Carlo check of `|sum_n g(z - n, y_n)| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpBoundReport {
    pub trials: usize,
    pub sup: f64,
    pub witness: Vec<f64>,
    /// `sup_z sum_n |g(z - n)| * max|X|` over the sampled points.
    pub modulus_bound: f64,
    pub pass: bool,
}

pub fn validate_bump_bound(
    profile: &BumpProfile,
    dist: &Distribution,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<BumpBoundReport> {
    dist.validate()?;
    let reach = profile.reach() as i64 + 1;
    let width = 2 * reach + 1;
    let shifts = (width as usize).pow(dim as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[-1]));
    let mut sup: f64 = 0.0;
    let mut modulus_bound: f64 = 0.0;
    let mut witness = vec![0.0; dim];
    let max_x = dist.max_modulus();
    for _ in 0..trials {
        let z: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut total = C64::new(0.0, 0.0);
        let mut abs_total = 0.0;
        for m in 0..shifts {
            let mut rem = m;
            let mut u = [0.0; 3];
            for axis in (0..dim).rev() {
                let n = (rem as i64 % width) - reach;
                rem /= width as usize;
                u[axis] = z[axis] - n as f64;
            }
            let g = profile.eval(&u[..dim]);
            if g.norm() == 0.0 {
                continue;
            }
            let (y, _) = dist.sample(&mut rng);
            total += g * y;
            abs_total += g.norm();
        }
        modulus_bound = modulus_bound.max(abs_total * max_x);
        if total.norm() > sup {
            sup = total.norm();
            witness.clone_from(&z);
        }
    }
    Ok(BumpBoundReport { trials, sup, witness, modulus_bound, pass: sup <= 1.0 + 1e-9 })
}

/// Generator of a Beltrami coefficient at scale `delta = 2^-j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// `phi(z) sum_n a(z/delta - n)`, deterministic.
    Model1Periodic { envelope: Envelope, profile: BumpProfile },
    /// `a sum_n eps_n 1_{n delta + [0, delta)^d}`, optionally times `1_Q`.
    Model2Checkerboard {
        #[serde(with = "cplx")]
        a: C64,
        #[serde(default)]
        masked: bool,
        #[serde(default)]
        mask: Option<BoxRegion>,
        #[serde(default)]
        dist: Distribution,
    },
    /// `phi B_delta` with a random bump field.
    Model3Bumpfield { envelope: Envelope, profile: BumpProfile, dist: Distribution },
    /// Masked checkerboard with degenerate amplitudes of unbounded distortion.
    Model4Degenerate {
        gamma: f64,
        #[serde(default = "default_k_cap")]
        k_cap: f64,
        #[serde(default = "default_exp_p")]
        exp_p: f64,
    },
    /// `+a` on `[2n delta, (2n+1) delta)`, `-a` on the next strip, in `x_1`.
    Stripes { a: f64 },
    Constant {
        #[serde(with = "cplx")]
        a: C64,
    },
}

pub fn default_k_cap() -> f64 {
    50.0
}

pub fn default_exp_p() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilatationModel {
    pub kind: ModelKind,
    pub j: u32,
    pub seed: u64,
}

impl DilatationModel {
    pub fn new(kind: ModelKind, j: u32, seed: u64) -> Self {
        Self { kind, j, seed }
    }

    pub fn delta(&self) -> f64 {
        scale_delta(self.j)
    }

    /// Samples per cell the model needs at its finest feature.
    pub fn min_samples_per_cell(&self) -> usize {
        match &self.kind {
            ModelKind::Model1Periodic { profile, .. } | ModelKind::Model3Bumpfield { profile, .. } => {
                profile.min_samples_per_cell()
            }
            ModelKind::Constant { .. } => 0,
            _ => 1,
        }
    }

    /// Checks that the grid resolves the model's scale.
    pub fn check_resolution(&self, grid: &Grid) -> Result<()> {
        let need = self.min_samples_per_cell();
        if need == 0 {
            return Ok(());
        }
        let s = grid.samples_per_cell(self.delta())?;
        if s < need {
            return Err(Error::Resolution(format!(
                "delta/h = {s} at j = {} is below the required {need}",
                self.j
            )));
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            ModelKind::Model2Checkerboard { dist, .. } | ModelKind::Model3Bumpfield { dist, .. } => {
                dist.is_symmetric()
            }
            ModelKind::Model4Degenerate { .. } => true,
            _ => false,
        }
    }
}

/// Diagnostics reported with a generated dilatation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub sup_norm: f64,
    pub sites: usize,
    pub clamped: usize,
    pub clamp_rate: Option<f64>,
    pub exp_k_integral: Option<f64>,
}

/// Samples the model on `grid`.
pub fn build_dilatation(grid: &Grid, model: &DilatationModel) -> Result<(Field, ModelDiagnostics)> {
    model.check_resolution(grid)?;
    let delta = model.delta();
    let dim = grid.dim();
    let mut diag = ModelDiagnostics::default();
    let field = match &model.kind {
        ModelKind::Constant { a } => Field::constant(*grid, *a),
        ModelKind::Stripes { a } => {
            if !(a.abs() < 1.0) {
                return Err(Error::Model(format!("stripe amplitude must satisfy |a| < 1, got {a}")));
            }
            let s = grid.samples_per_cell(delta)?;
            let a = *a;
            let data = (0..grid.len())
                .map(|k| {
                    let cell = grid.unflatten(k)[0] / s;
                    let n = cell as i64 - (grid.n() / s / 2) as i64;
                    C64::new(if n.rem_euclid(2) == 0 { a } else { -a }, 0.0)
                })
                .collect();
            Field::from_vec(*grid, data, Space::Physical)?
        }
        ModelKind::Model1Periodic { envelope, profile } => {
            let (ones, _) =
                draw_sites(grid, delta, model.j, &Distribution::Constant { value: C64::new(1.0, 0.0) }, 0, |_| true)?;
            let periodic = sum_translates(grid, &ones, profile)?;
            envelope.sample(grid).mul(&periodic)?
        }
        ModelKind::Model2Checkerboard { a, masked, mask, dist } => {
            let region = mask.clone().unwrap_or_else(|| BoxRegion::unit(dim));
            let keep = |n: &[i64]| !*masked || cell_inside(n, delta, &region);
            let (weights, stats) = draw_sites(grid, delta, model.j, dist, model.seed, keep)?;
            diag.sites = stats.sites;
            let field = sum_translates(grid, &weights, &BumpProfile::UnitSquareIndicator)?;
            let a = *a;
            let masked = *masked;
            let mut out = field.scale(a);
            if masked {
                for (k, v) in out.data_mut().iter_mut().enumerate() {
                    if !region.contains(&grid.point(k)[..dim]) {
                        *v = C64::new(0.0, 0.0);
                    }
                }
            }
            out
        }
        ModelKind::Model3Bumpfield { envelope, profile, dist } => {
            let (weights, stats) = draw_sites(grid, delta, model.j, dist, model.seed, |_| true)?;
            diag.sites = stats.sites;
            let bumps = sum_translates(grid, &weights, profile)?;
            envelope.sample(grid).mul(&bumps)?
        }
        ModelKind::Model4Degenerate { gamma, k_cap, exp_p } => {
            let region = BoxRegion::unit(dim);
            let dist = Distribution::DegenerateK { gamma: *gamma, k_cap: *k_cap };
            let (weights, stats) = draw_sites(grid, delta, model.j, &dist, model.seed, |n| {
                cell_inside(n, delta, &region)
            })?;
            diag.sites = stats.sites;
            diag.clamped = stats.clamped;
            diag.clamp_rate =
                Some(if stats.sites == 0 { 0.0 } else { stats.clamped as f64 / stats.sites as f64 });
            let mut out = sum_translates(grid, &weights, &BumpProfile::UnitSquareIndicator)?;
            let mut integral = 0.0;
            for (k, v) in out.data_mut().iter_mut().enumerate() {
                if region.contains(&grid.point(k)[..dim]) {
                    let m = v.norm();
                    let distortion = (1.0 + m) / (1.0 - m);
                    integral += (exp_p * distortion).exp();
                } else {
                    *v = C64::new(0.0, 0.0);
                }
            }
            diag.exp_k_integral = Some(integral * grid.cell_volume());
            out
        }
    };
    diag.sup_norm = field.sup_norm();
    if !(diag.sup_norm < 1.0) {
        return Err(Error::Model(format!(
            "generated dilatation has sup norm {} >= 1",
            diag.sup_norm
        )));
    }
    Ok((field, diag))
}

fn cell_inside(n: &[i64], delta: f64, region: &BoxRegion) -> bool {
    let centre: Vec<f64> = n.iter().map(|&k| (k as f64 + 0.5) * delta).collect();
    region.contains(&centre)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(2, 128, 4.0).unwrap()
    }

    #[test]
    fn indicator_with_constant_amplitude_is_one() {
        let grid = grid2();
        let dist = Distribution::Constant { value: C64::new(1.0, 0.0) };
        let b = bump_field(&grid, &BumpProfile::UnitSquareIndicator, &dist, 2, 7).unwrap();
        assert!(b.data().iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn rademacher_checkerboard_is_cellwise_sign() {
        let grid = grid2();
        let b = bump_field(&grid, &BumpProfile::UnitSquareIndicator, &Distribution::Rademacher, 3, 11)
            .unwrap();
        let s = grid.samples_per_cell(0.125).unwrap();
        for k in 0..grid.len() {
            let v = b.data()[k];
            assert!(v.im == 0.0 && v.re.abs() == 1.0);
            let idx = grid.unflatten(k);
            let corner = grid.flatten(&[idx[0] / s * s, idx[1] / s * s]);
            assert_eq!(v, b.data()[corner]);
        }
    }

    #[test]
    fn rademacher_site_mean_is_centred() {
        // 128 x 128 = 16384 cells, one sample each.
        let grid = Grid::new(2, 128, 128.0).unwrap();
        let b = bump_field(&grid, &BumpProfile::UnitSquareIndicator, &Distribution::Rademacher, 0, 5)
            .unwrap();
        let n = grid.len() as f64;
        let mean = b.mean().re;
        assert!(mean.abs() <= 3.0 / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn fields_are_deterministic() {
        let grid = grid2();
        let a = bump_field(&grid, &BumpProfile::GaussianBump { scale: 0.5 }, &Distribution::Rademacher, 2, 3)
            .unwrap();
        let b = bump_field(&grid, &BumpProfile::GaussianBump { scale: 0.5 }, &Distribution::Rademacher, 2, 3)
            .unwrap();
        assert_eq!(a.data(), b.data());
        let c = bump_field(&grid, &BumpProfile::GaussianBump { scale: 0.5 }, &Distribution::Rademacher, 2, 4)
            .unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn smooth_profile_needs_eight_samples() {
        let grid = Grid::new(2, 64, 4.0).unwrap();
        // delta = 1/8, h = 1/16: two samples per cell.
        let err = bump_field(&grid, &BumpProfile::SmoothSquareBump { scale: 1.0 }, &Distribution::Rademacher, 3, 0);
        assert!(matches!(err, Err(Error::Resolution(_))));
        assert!(bump_field(&grid, &BumpProfile::UnitSquareIndicator, &Distribution::Rademacher, 3, 0).is_ok());
    }

    #[test]
    fn gaussian_translates_sum_to_theta_product() {
        // Deterministic unit weights: sum_n exp(-pi |u - c - n|^2) is the square of
        // a Jacobi theta value, evaluated here by direct lattice summation.
        let grid = Grid::new(2, 128, 4.0).unwrap();
        let dist = Distribution::Constant { value: C64::new(1.0, 0.0) };
        let b = bump_field(&grid, &BumpProfile::GaussianBump { scale: 1.0 }, &dist, 2, 0).unwrap();
        let s = 8;
        for k in [0usize, 5, 17 * 128 + 3, 128 * 128 - 1] {
            let idx = grid.unflatten(k);
            let u: Vec<f64> = (0..2).map(|a| ((idx[a] % s) as f64 + 0.5) / s as f64 - 0.5).collect();
            let theta = |t: f64| (-20..=20).map(|n| (-PI * (t - n as f64).powi(2)).exp()).sum::<f64>();
            let exact = theta(u[0]) * theta(u[1]);
            assert!((b.data()[k].re - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn tensor_product_examples() {
        let grid = Grid::new(2, 256, 4.0).unwrap();
        let one = Envelope::constant(C64::new(1.0, 0.0));
        let f = tensor_product(&grid, TensorFactor::Envelope(&one), &BumpProfile::UnitSquareIndicator, 3, None)
            .unwrap();
        assert!(f.data().iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));

        let env = Envelope::gaussian(&[0.2, -0.1], 0.5, 0.8);
        let j = 4;
        let t = tensor_product(&grid, TensorFactor::Envelope(&env), &BumpProfile::UnitSquareIndicator, j, None)
            .unwrap();
        let avg = cell_average(&env.sample(&grid), scale_delta(j)).unwrap().prolong(&grid).unwrap();
        assert!(t.sub(&avg).unwrap().sup_norm() < 1e-15);
        // Lipschitz constant of the envelope times the cell diameter.
        let lip = 0.8 * (2.0f64).sqrt() / 0.5 * (-0.5f64).exp();
        let sup_diff = t.sub(&env.sample(&grid)).unwrap().sup_norm();
        assert!(sup_diff <= lip * scale_delta(j) * 2f64.sqrt());
    }

    #[test]
    fn bump_bound_examples() {
        let r = validate_bump_bound(&BumpProfile::UnitSquareIndicator, &Distribution::Rademacher, 2, 500, 1)
            .unwrap();
        assert!(r.pass);
        assert!((r.sup - 1.0).abs() < 1e-15);

        // Lattice sum of exp(-pi|z - n|^2) peaks at the cell centre with value theta(0)^2.
        let theta0: f64 = (-20..=20).map(|n| (-PI * (n * n) as f64).exp()).sum();
        let scale = 0.99 / (theta0 * theta0);
        let ok = validate_bump_bound(&BumpProfile::GaussianBump { scale }, &Distribution::Rademacher, 2, 500, 2)
            .unwrap();
        assert!(ok.pass, "sup {}", ok.sup);
        assert!(ok.modulus_bound <= 0.99 + 1e-9);
        let bad =
            validate_bump_bound(&BumpProfile::GaussianBump { scale: 2.0 * scale }, &Distribution::Rademacher, 2, 500, 2)
                .unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.witness.len(), 2);
    }

    #[test]
    fn model_examples() {
        let grid = Grid::new(2, 256, 4.0).unwrap();
        let (mu, d) =
            build_dilatation(&grid, &DilatationModel::new(ModelKind::Constant { a: C64::new(0.3, 0.0) }, 0, 0))
                .unwrap();
        assert!(mu.data().iter().all(|&v| v == C64::new(0.3, 0.0)));
        assert!((d.sup_norm - 0.3).abs() < 1e-15);

        let (st, d) = build_dilatation(&grid, &DilatationModel::new(ModelKind::Stripes { a: 0.5 }, 3, 0)).unwrap();
        assert_eq!(d.sup_norm, 0.5);
        for k in 0..grid.len() {
            let x = grid.point(k)[0];
            let expected = if (x / 0.125).floor().rem_euclid(2.0) == 0.0 { 0.5 } else { -0.5 };
            assert_eq!(st.data()[k].re, expected);
        }

        let cb = ModelKind::Model2Checkerboard {
            a: C64::new(0.5, 0.0),
            masked: true,
            mask: None,
            dist: Distribution::Rademacher,
        };
        let (mu, d) = build_dilatation(&grid, &DilatationModel::new(cb, 4, 9)).unwrap();
        assert_eq!(d.sites, 256);
        for k in 0..grid.len() {
            let p = grid.point(k);
            let v = mu.data()[k];
            if (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]) {
                assert_eq!(v.re.abs(), 0.5);
            } else {
                assert_eq!(v, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn degenerate_model_reports_diagnostics() {
        let grid = Grid::new(2, 128, 4.0).unwrap();
        let model = DilatationModel::new(ModelKind::Model4Degenerate { gamma: 4.0, k_cap: 1.5, exp_p: 2.5 }, 3, 1);
        let (mu, d) = build_dilatation(&grid, &model).unwrap();
        assert!(mu.sup_norm() <= 0.5 / 2.5 + 1e-15);
        assert_eq!(d.sites, 64);
        // P(K > 1.5) = exp(-2) ~ 0.135.
        assert!(d.clamp_rate.unwrap() > 0.0);
        assert!(d.exp_k_integral.unwrap() > (2.5f64).exp());
        let bad = DilatationModel::new(ModelKind::Model4Degenerate { gamma: 2.0, k_cap: 50.0, exp_p: 2.5 }, 3, 1);
        assert!(matches!(build_dilatation(&grid, &bad), Err(Error::Model(_))));
    }

    #[test]
    fn site_correlation_is_small() {
        let grid = Grid::new(2, 16, 2.0).unwrap();
        let mut prod = 0.0;
        let seeds = 256;
        for seed in 0..seeds {
            let b = bump_field(&grid, &BumpProfile::UnitSquareIndicator, &Distribution::Rademacher, 2, seed)
                .unwrap();
            // two distinct cells of side 1/4 (4 samples each)
            prod += (b.data()[0] * b.data()[grid.flatten(&[5, 9])]).re;
        }
        let corr = prod / seeds as f64;
        assert!(corr.abs() <= 4.0 / (seeds as f64).sqrt());
    }

    #[test]
    fn profile_integrals() {
        let one = profile_integral(&BumpProfile::UnitSquareIndicator, 4, 2);
        assert!((one - 1.0).norm() < 1e-15);
        // int exp(-pi |u|^2) = 1 in any dimension.
        let g = profile_integral(&BumpProfile::GaussianBump { scale: 1.0 }, 16, 2);
        assert!((g - 1.0).norm() < 1e-12);
        assert!(profile_integral(&BumpProfile::HalfCellDipole, 8, 2).norm() < 1e-15);
    }

    #[test]
    fn periodized_product_examples() {
        let ind = BumpProfile::UnitSquareIndicator;
        let p = PeriodizedProduct { g: &ind, g2: &ind, dim: 2 };
        for u in [[0.3, 0.7], [0.0, 0.99], [1.2, 0.5], [-0.1, 0.5]] {
            assert_eq!(p.eval(&u), ind.eval(&u));
        }
        let gauss = BumpProfile::GaussianBump { scale: 1.0 };
        let q = PeriodizedProduct { g: &gauss, g2: &ind, dim: 1 };
        let theta: f64 = (-30..=30).map(|n| (-PI * (0.25 - 0.5 + n as f64).powi(2)).exp()).sum();
        assert!((q.eval(&[0.25]).re - theta).abs() < 1e-12);
    }

    #[test]
    fn profiles_decay_rapidly() {
        for p in [
            BumpProfile::GaussianBump { scale: 1.0 },
            BumpProfile::SmoothSquareBump { scale: 1.0 },
            BumpProfile::TwoBump { separation: 1.0, scale: 1.0 },
            BumpProfile::UnitSquareIndicator,
        ] {
            let c = decay_constants(&p, 2, 20.0, 4);
            assert!(c.iter().all(|v| v.is_finite()));
            assert!(c[4] < 60.0, "{p:?}: {c:?}");
        }
    }

    #[test]
    fn profile_parses_from_json() {
        let p: BumpProfile = serde_json::from_str(r#"{"kind":"gaussian_bump","scale":0.5}"#).unwrap();
        assert_eq!(p, BumpProfile::GaussianBump { scale: 0.5 });
        let m: ModelKind =
            serde_json::from_str(r#"{"kind":"model2_checkerboard","a":[0.5,0.1],"masked":true}"#).unwrap();
        assert!(matches!(m, ModelKind::Model2Checkerboard { masked: true, .. }));
        assert!(serde_json::from_str::<ModelKind>(r#"{"kind":"stripes","a":0.5,"b":1}"#).is_err());
    }
}
