//! Beltrami equation `dbar F = mu dz F` on the torus.
//!
//! Solutions are sought as `F = z + A zbar + C(g - A)` where `g = dbar F`
//! solves `g = mu (1 + T g)`, `T` is the Beurling transform, `C` the Cauchy
//! transform and `A = mean(g)`. The mean of `g` cannot be produced by `C`, so
//! it is carried by the `zbar` term, and `A` is the effective dilatation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, C64};
use crate::ops::{apply_operator, MultiplierOp};

pub const DEFAULT_TOL: f64 = 1e-10;

/// `10 ceil(log(tol) / log(k))`, at least 10.
pub fn default_max_iter(tol: f64, k: f64) -> usize {
    if !(k > 0.0) {
        return 10;
    }
    if k >= 1.0 {
        return 10_000;
    }
    let steps = (tol.ln() / k.ln()).ceil().max(1.0);
    10 * steps as usize
}

/// Terms `psi_1 = mu`, `psi_m = mu T psi_{m-1}` with their L2 norms.
#[derive(Debug, Clone)]
pub struct NeumannTerms {
    pub terms: Vec<Field>,
    pub norms: Vec<f64>,
}

impl NeumannTerms {
    pub fn sum(&self) -> Result<Field> {
        let mut acc = Field::zeros(*self.terms[0].grid());
        for t in &self.terms {
            acc = acc.add(t)?;
        }
        Ok(acc)
    }
}

pub fn neumann_terms(mu: &Field, t: &MultiplierOp, m: usize) -> Result<NeumannTerms> {
    if m == 0 {
        return Err(Error::Argument("need at least one Neumann term".into()));
    }
    let mut terms = vec![mu.clone()];
    let mut norms = vec![mu.l2_norm()];
    if !mu.is_finite() {
        return Err(Error::Divergence { last_finite: 0 });
    }
    while terms.len() < m {
        let next = mu.mul(&apply_operator(t, terms.last().unwrap())?)?;
        let norm = next.l2_norm();
        if !norm.is_finite() {
            return Err(Error::Divergence { last_finite: terms.len() });
        }
        terms.push(next);
        norms.push(norm);
    }
    Ok(NeumannTerms { terms, norms })
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub mu: Field,
    /// `dbar F`.
    pub g: Field,
    pub a_eff: C64,
    /// `||g - mu (1 + T g)||_2 / ||mu||_2`.
    pub residual: f64,
    pub iterations: usize,
    /// `||psi_m||_2` for `m = 1, 2, ...`, read off the fixed-point increments.
    pub term_norms: Vec<f64>,
    pub clamp_rate: Option<f64>,
    pub exp_k_integral: Option<f64>,
}

/// Iterates `g <- mu (1 + T g)` from `g = mu`.
///
/// The increments of the iteration are exactly the Neumann terms, so the
/// relative update of a step is the residual of the iterate it started from;
/// that iterate is returned once its residual drops below `tol`.
pub fn solve_fixed_point(
    mu: &Field,
    t: &MultiplierOp,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let k = mu.sup_norm();
    if !(k < 1.0) {
        return Err(Error::Model(format!("dilatation has sup norm {k} >= 1")));
    }
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(tol, k));
    let mu_norm = mu.l2_norm();
    let mut report = SolveReport {
        mu: mu.clone(),
        g: mu.clone(),
        a_eff: mu.mean(),
        residual: 0.0,
        iterations: 0,
        term_norms: vec![mu_norm],
        clamp_rate: None,
        exp_k_integral: None,
    };
    if mu_norm == 0.0 {
        return Ok(report);
    }
    let mut g = mu.clone();
    for it in 1..=max_iter {
        let tg = apply_operator(t, &g)?;
        let next: Vec<C64> =
            mu.data().iter().zip(tg.data()).map(|(&m, &v)| m * (1.0 + v)).collect();
        let next = Field::from_vec(*mu.grid(), next, mu.space())?;
        let update = next.sub(&g)?.l2_norm();
        if !update.is_finite() {
            return Err(Error::Divergence { last_finite: it - 1 });
        }
        report.term_norms.push(update);
        let residual = update / mu_norm;
        report.iterations = it;
        report.residual = residual;
        if residual <= tol {
            report.a_eff = g.mean();
            report.g = g;
            return Ok(report);
        }
        g = next;
    }
    Err(Error::Convergence { iterations: max_iter, residual: report.residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    ThreePoint,
}

/// `F(z) = lin_z z + lin_zbar zbar + offset + periodic_scale P(z)` with a
/// periodic part `P` sampled on a planar grid.
#[derive(Debug, Clone)]
pub struct MapField {
    pub lin_z: C64,
    pub lin_zbar: C64,
    pub offset: C64,
    pub periodic_scale: C64,
    pub periodic: Field,
    pub normalization: Normalization,
}

impl MapField {
    pub fn affine(grid: Grid, lin_z: C64, lin_zbar: C64) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::Argument("maps live on planar grids".into()));
        }
        Ok(Self {
            lin_z,
            lin_zbar,
            offset: C64::new(0.0, 0.0),
            periodic_scale: C64::new(1.0, 0.0),
            periodic: Field::zeros(grid),
            normalization: Normalization::Raw,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.periodic.grid()
    }

    fn affine_part(&self, z: C64) -> C64 {
        self.lin_z * z + self.lin_zbar * z.conj() + self.offset
    }

    /// Bilinear interpolation of the periodic part, extended periodically.
    pub fn periodic_at(&self, z: C64) -> C64 {
        let grid = self.grid();
        let n = grid.n();
        let h = grid.spacing();
        let half = grid.period() / 2.0;
        let locate = |x: f64| {
            let t = (x + half) / h - 0.5;
            let i = t.floor();
            let w = t - i;
            let i0 = (i as i64).rem_euclid(n as i64) as usize;
            (i0, (i0 + 1) % n, w)
        };
        let (x0, x1, wx) = locate(z.re);
        let (y0, y1, wy) = locate(z.im);
        let p = self.periodic.data();
        let at = |i: usize, j: usize| p[i * n + j];
        at(x0, y0) * (1.0 - wx) * (1.0 - wy)
            + at(x1, y0) * wx * (1.0 - wy)
            + at(x0, y1) * (1.0 - wx) * wy
            + at(x1, y1) * wx * wy
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.affine_part(z) + self.periodic_scale * self.periodic_at(z)
    }

    /// Value at grid node `k`, without interpolation.
    pub fn at_node(&self, k: usize) -> C64 {
        let p = self.grid().point(k);
        self.affine_part(C64::new(p[0], p[1])) + self.periodic_scale * self.periodic.data()[k]
    }

    /// `sup |F(z) - other(z)|` over [`window_points`].
    pub fn sup_distance(&self, other: impl Fn(C64) -> C64, radius: f64) -> f64 {
        window_points(radius).into_iter().map(|z| (self.eval(z) - other(z)).norm()).fold(0.0, f64::max)
    }

    /// Applies `F -> s (F - c)`.
    fn renormalize(mut self, c: C64, s: C64) -> Self {
        self.lin_z *= s;
        self.lin_zbar *= s;
        self.offset = (self.offset - c) * s;
        self.periodic_scale *= s;
        self.normalization = Normalization::ThreePoint;
        self
    }

    /// `dbar F` and `dz F` computed spectrally.
    pub fn derivatives(&self) -> Result<(Field, Field)> {
        let dzbar = apply_operator(&MultiplierOp::dzbar(), &self.periodic)?;
        let dz = apply_operator(&MultiplierOp::dz(), &self.periodic)?;
        let s = self.periodic_scale;
        Ok((dzbar.map(|v| self.lin_zbar + s * v), dz.map(|v| self.lin_z + s * v)))
    }
}

/// Lattice of spacing `radius / 32` inside the closed disk `B(0, radius)`.
pub fn window_points(radius: f64) -> Vec<C64> {
    let step = radius / 32.0;
    let mut pts = Vec::new();
    for i in -32..=32 {
        for j in -32..=32 {
            let z = C64::new(i as f64 * step, j as f64 * step);
            if z.norm() <= radius * (1.0 + 1e-12) {
                pts.push(z);
            }
        }
    }
    pts
}

/// `F = z + A zbar + C(g - A)`.
pub fn reconstruct_map(report: &SolveReport) -> Result<MapField> {
    let g = &report.g;
    let mut map = MapField::affine(*g.grid(), C64::new(1.0, 0.0), report.a_eff)?;
    map.periodic = apply_operator(&MultiplierOp::cauchy(), g)?;
    Ok(map)
}

/// `||dbar F - mu dz F||_2 / ||mu||_2`.
pub fn beltrami_residual(mu: &Field, map: &MapField) -> Result<f64> {
    let (dzbar, dz) = map.derivatives()?;
    let r = dzbar.sub(&mu.mul(&dz)?)?.l2_norm();
    let m = mu.l2_norm();
    Ok(if m == 0.0 { r } else { r / m })
}

/// `(F - F(0)) / (F(1) - F(0))`.
pub fn normalize_3pt(map: MapField) -> Result<MapField> {
    let f0 = map.eval(C64::new(0.0, 0.0));
    let f1 = map.eval(C64::new(1.0, 0.0));
    normalize_with(map, f0, f1)
}

/// Three-point normalization using given values of `F(0)` and `F(1)`.
pub fn normalize_with(map: MapField, f0: C64, f1: C64) -> Result<MapField> {
    let d = f1 - f0;
    if !(d.norm() >= 1e-9) {
        return Err(Error::DegenerateNormalization(d.norm()));
    }
    Ok(map.renormalize(f0, 1.0 / d))
}

/// Parameters of the exact laminate map for dilatation `+a` on
/// `[2n delta, (2n+1) delta)` and `-a` on the remaining strips.
#[derive(Debug, Clone, Copy)]
pub struct Stripes {
    pub a: f64,
    pub delta: f64,
}

impl Stripes {
    pub fn new(a: f64, delta: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Argument(format!("stripe amplitude must lie in (0, 1), got {a}")));
        }
        if !(delta > 0.0) {
            return Err(Error::Argument(format!("strip width must be positive, got {delta}")));
        }
        Ok(Self { a, delta })
    }

    pub fn b(&self) -> f64 {
        (1.0 - self.a) / (1.0 + self.a)
    }

    /// Vertical stretch `2b / (1 + b^2) = (1 - a^2) / (1 + a^2)`.
    pub fn kappa(&self) -> f64 {
        let b = self.b();
        2.0 * b / (1.0 + b * b)
    }

    /// Periodic deviation of the real part from `x`: a triangle wave with
    /// slope `+-(1 - b^2)/(1 + b^2)`, vanishing on `2 delta Z`.
    pub fn deviation(&self, x: f64) -> f64 {
        let b = self.b();
        let period = 2.0 * self.delta;
        let r = x - period * (x / period).round();
        r.abs() * (1.0 - b * b) / (1.0 + b * b)
    }

    /// The map with unit mean horizontal slope, `F(0) = 0`.
    pub fn raw(&self, z: C64) -> C64 {
        C64::new(z.re + self.deviation(z.re), self.kappa() * z.im)
    }

    /// Three-point normalized closed form.
    pub fn value(&self, z: C64) -> C64 {
        self.raw(z) / self.raw(C64::new(1.0, 0.0))
    }

    /// Exact effective dilatation.
    pub fn effective(&self) -> f64 {
        self.a * self.a
    }
}

/// The closed-form laminate map sampled on `grid` and normalized.
pub fn stripes_exact(a: f64, grid: &Grid, delta: f64) -> Result<MapField> {
    let s = Stripes::new(a, delta)?;
    grid.samples_per_cell(delta)?;
    let kappa = s.kappa();
    let mut map = MapField::affine(*grid, C64::new((1.0 + kappa) / 2.0, 0.0), C64::new((1.0 - kappa) / 2.0, 0.0))?;
    map.periodic = Field::from_fn(*grid, |x| C64::new(s.deviation(x[0]), 0.0));
    normalize_with(map, C64::new(0.0, 0.0), s.raw(C64::new(1.0, 0.0)))
}

/// Complex dilatation `dbar F / dz F` of a map given pointwise, from centred
/// differences with step `h`.
pub fn finite_difference_dilatation(f: impl Fn(C64) -> C64, z: C64, h: f64) -> C64 {
    let fx = (f(z + h) - f(z - h)) / (2.0 * h);
    let fy = (f(z + C64::new(0.0, h)) - f(z - C64::new(0.0, h))) / (2.0 * h);
    let i = C64::new(0.0, 1.0);
    let dz = (fx - i * fy) / 2.0;
    let dzbar = (fx + i * fy) / 2.0;
    dzbar / dz
}

/// `sup_z |F(z) - z|` over the window.
pub fn distance_to_identity(map: &MapField, radius: f64) -> f64 {
    map.sup_distance(|z| z, radius)
}
