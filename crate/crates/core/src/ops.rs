//! Translation- and dilation-invariant operators realised as Fourier
//! multipliers.
//!
//! Every operator annihilates the zero mode. With the `exp(-2 pi i <x, xi>)`
//! convention, `d/dzbar` has symbol `pi i xi` and `d/dz` has symbol
//! `pi i conj(xi)` where `xi = xi_1 + i xi_2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, dft_in_place, Direction, Field, Grid, Space, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `conj(xi) / xi`, the planar Beurling transform.
    Beurling,
    /// `1 / (pi i xi)`, inverse of `d/dzbar` on mean-zero data.
    Cauchy,
    Dz,
    Dzbar,
    /// `-xi_j xi_k / |xi|^2` (1-based axes).
    Riesz { j: usize, k: usize },
    /// `-1 / (4 pi^2 |xi|^2)`.
    InvLaplacian,
    Identity,
    /// `Delta^{-1} P(D)` for `P(D) = sum_jk c_jk d_j d_k`, i.e. the symbol
    /// `sum_jk c_jk xi_j xi_k / |xi|^2`.
    SecondOrderRatio { coeffs: [[f64; 3]; 3] },
    /// Tabulated angular symbol on the unit circle, `(angle, value)` pairs,
    /// interpolated linearly in the angle.
    Custom { table: Vec<(f64, C64)> },
}

/// A Fourier multiplier `m(xi) = |xi|^degree * angular(xi / |xi|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierOp {
    pub name: String,
    pub kind: OperatorKind,
}

impl MultiplierOp {
    fn named(name: &str, kind: OperatorKind) -> Self {
        Self { name: name.to_string(), kind }
    }

    pub fn beurling() -> Self {
        Self::named("beurling", OperatorKind::Beurling)
    }

    pub fn cauchy() -> Self {
        Self::named("cauchy", OperatorKind::Cauchy)
    }

    pub fn dz() -> Self {
        Self::named("dz", OperatorKind::Dz)
    }

    pub fn dzbar() -> Self {
        Self::named("dzbar", OperatorKind::Dzbar)
    }

    pub fn riesz2(j: usize, k: usize) -> Self {
        Self::named(&format!("riesz2({j},{k})"), OperatorKind::Riesz { j, k })
    }

    pub fn inv_laplacian() -> Self {
        Self::named("inv_laplacian", OperatorKind::InvLaplacian)
    }

    pub fn identity() -> Self {
        Self::named("identity", OperatorKind::Identity)
    }

    /// `Delta^{-1} P(D)` with `P(D) = sum c_jk d_j d_k`; `coeffs` is symmetrised.
    pub fn laplace_ratio(name: &str, coeffs: [[f64; 3]; 3]) -> Self {
        let mut sym = [[0.0; 3]; 3];
        for (j, row) in sym.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = 0.5 * (coeffs[j][k] + coeffs[k][j]);
            }
        }
        Self::named(name, OperatorKind::SecondOrderRatio { coeffs: sym })
    }

    /// `Delta^{-1} d_1 d_2`.
    pub fn mixed_ratio_12() -> Self {
        let mut c = [[0.0; 3]; 3];
        c[0][1] = 1.0;
        Self::laplace_ratio("laplace_ratio(1,2)", c)
    }

    pub fn custom(name: &str, mut table: Vec<(f64, C64)>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Config("custom symbol table is empty".into()));
        }
        for entry in table.iter_mut() {
            entry.0 = wrap_angle(entry.0);
        }
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::named(name, OperatorKind::Custom { table }))
    }

    /// Looks up a built-in operator by its identifier.
    pub fn from_name(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        match trimmed {
            "beurling" => Ok(Self::beurling()),
            "cauchy" => Ok(Self::cauchy()),
            "dz" => Ok(Self::dz()),
            "dzbar" => Ok(Self::dzbar()),
            "inv_laplacian" => Ok(Self::inv_laplacian()),
            "identity" => Ok(Self::identity()),
            _ => {
                let (head, args) = parse_call(trimmed)
                    .ok_or_else(|| Error::Config(format!("unknown operator `{name}`")))?;
                match (head, args.as_slice()) {
                    ("riesz2", [j, k]) if *j >= 1 && *k >= 1 && *j <= 3 && *k <= 3 => {
                        Ok(Self::riesz2(*j, *k))
                    }
                    ("laplace_ratio", [j, k]) if *j >= 1 && *k >= 1 && *j <= 3 && *k <= 3 => {
                        let mut c = [[0.0; 3]; 3];
                        c[j - 1][k - 1] = 1.0;
                        Ok(Self::laplace_ratio(trimmed, c))
                    }
                    _ => Err(Error::Config(format!("unknown operator `{name}`"))),
                }
            }
        }
    }

    /// Homogeneity degree of the symbol.
    pub fn degree(&self) -> i32 {
        match self.kind {
            OperatorKind::Cauchy => -1,
            OperatorKind::InvLaplacian => -2,
            OperatorKind::Dz | OperatorKind::Dzbar => 1,
            _ => 0,
        }
    }

    /// Dimension the operator is restricted to, if any.
    pub fn required_dim(&self) -> Option<usize> {
        match self.kind {
            OperatorKind::Beurling
            | OperatorKind::Cauchy
            | OperatorKind::Dz
            | OperatorKind::Dzbar
            | OperatorKind::Custom { .. } => Some(2),
            _ => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let Some(required) = self.required_dim() {
            if required != dim {
                return Err(Error::Config(format!(
                    "operator {} is planar but the field has dimension {dim}",
                    self.name
                )));
            }
        }
        if let OperatorKind::Riesz { j, k } = self.kind {
            if j == 0 || k == 0 || j > dim || k > dim {
                return Err(Error::Config(format!(
                    "operator {} needs axes within 1..={dim}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Symbol at a nonzero frequency (entries beyond `dim` are ignored).
    pub fn symbol(&self, xi: &[f64; 3], dim: usize) -> C64 {
        let z = C64::new(xi[0], if dim >= 2 { xi[1] } else { 0.0 });
        let r2: f64 = xi.iter().take(dim).map(|v| v * v).sum();
        match &self.kind {
            OperatorKind::Beurling => z.conj() / z,
            OperatorKind::Cauchy => 1.0 / (C64::new(0.0, PI) * z),
            OperatorKind::Dz => C64::new(0.0, PI) * z.conj(),
            OperatorKind::Dzbar => C64::new(0.0, PI) * z,
            OperatorKind::Riesz { j, k } => C64::new(-xi[j - 1] * xi[k - 1] / r2, 0.0),
            OperatorKind::InvLaplacian => C64::new(-1.0 / (4.0 * PI * PI * r2), 0.0),
            OperatorKind::Identity => C64::new(1.0, 0.0),
            OperatorKind::SecondOrderRatio { coeffs } => {
                let mut s = 0.0;
                for j in 0..dim {
                    for k in 0..dim {
                        s += coeffs[j][k] * xi[j] * xi[k];
                    }
                }
                C64::new(s / r2, 0.0)
            }
            OperatorKind::Custom { table } => interpolate_angular(table, z.arg()),
        }
    }
}

impl MultiplierOp {
    /// Symbol applied on a grid whose Nyquist frequency is `nyquist`.
    ///
    /// On an even grid the Nyquist mode stands for both `+-nyquist`, so a
    /// symbol that is not even in that coordinate is replaced by its average
    /// over the aliased partners. This keeps the discrete operators
    /// equivariant under the reflections and quarter turns of the grid.
    /// `d/dzbar` and the Cauchy transform keep their raw symbols so they stay
    /// exact inverses, and `d/dz` is taken as `T d/dzbar`.
    pub fn grid_symbol(&self, xi: &[f64; 3], dim: usize, nyquist: f64) -> C64 {
        if xi.iter().take(dim).all(|&v| v == 0.0) {
            return C64::new(0.0, 0.0);
        }
        match self.kind {
            OperatorKind::Dzbar | OperatorKind::Cauchy => self.symbol(xi, dim),
            OperatorKind::Dz => {
                MultiplierOp::beurling().grid_symbol(xi, dim, nyquist) * MultiplierOp::dzbar().symbol(xi, dim)
            }
            _ => nyquist_average(|x| self.symbol(x, dim), xi, dim, nyquist),
        }
    }
}

fn nyquist_average(f: impl Fn(&[f64; 3]) -> C64, xi: &[f64; 3], dim: usize, nyquist: f64) -> C64 {
    let axes: Vec<usize> = (0..dim).filter(|&a| xi[a] == nyquist).collect();
    if axes.is_empty() {
        return f(xi);
    }
    let count = 1usize << axes.len();
    let mut total = C64::new(0.0, 0.0);
    for flips in 0..count {
        let mut x = *xi;
        for (b, &a) in axes.iter().enumerate() {
            if flips >> b & 1 == 1 {
                x[a] = -x[a];
            }
        }
        total += f(&x);
    }
    total / count as f64
}

fn parse_call(s: &str) -> Option<(&str, Vec<usize>)> {
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    let args = inner.split(',').map(|a| a.trim().parse().ok()).collect::<Option<Vec<usize>>>()?;
    Some((&s[..open], args))
}

fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn interpolate_angular(table: &[(f64, C64)], theta: f64) -> C64 {
    if table.len() == 1 {
        return table[0].1;
    }
    let theta = wrap_angle(theta);
    let pos = table.partition_point(|e| e.0 <= theta);
    let (lo, hi) = if pos == 0 || pos == table.len() {
        let last = table[table.len() - 1];
        let first = table[0];
        (last, (first.0 + 2.0 * PI, first.1))
    } else {
        (table[pos - 1], table[pos])
    };
    let mut t = theta;
    if t < lo.0 {
        t += 2.0 * PI;
    }
    let span = hi.0 - lo.0;
    if span <= 0.0 {
        return lo.1;
    }
    let w = (t - lo.0) / span;
    lo.1 * (1.0 - w) + hi.1 * w
}

/// Inverse transform of `m(xi) f^(xi)` with the zero mode removed.
pub fn apply_operator(op: &MultiplierOp, f: &Field) -> Result<Field> {
    if f.space() != Space::Physical {
        return Err(Error::Config("operators act on physical-space fields".into()));
    }
    let dim = f.grid().dim();
    op.check_dim(dim)?;
    if op.kind == OperatorKind::Identity {
        let mean = f.mean();
        return Ok(f.map(|v| v - mean));
    }
    let nyquist = f.grid().freq(f.grid().n() / 2);
    Ok(apply_multiplier(f, |xi| op.grid_symbol(xi, dim, nyquist)))
}

/// `max |m(xi)|` over the nonzero frequencies of `grid`.
pub fn operator_sup_norm(op: &MultiplierOp, grid: &Grid) -> f64 {
    let dim = grid.dim();
    (1..grid.len()).map(|k| op.symbol(&grid.frequency(k), dim).norm()).fold(0.0, f64::max)
}

/// One factor of an operator chain.
#[derive(Debug, Clone, Copy)]
pub enum ChainStep<'a> {
    Multiply(&'a Field),
    Apply(&'a MultiplierOp),
}

/// Composes the steps right to left: `[Multiply(mu), Apply(T), Multiply(mu)]`
/// applied to `start` gives `mu T (mu start)`.
pub fn chain_apply(steps: &[ChainStep<'_>], start: &Field) -> Result<Field> {
    let mut current = start.clone();
    for step in steps.iter().rev() {
        current = match step {
            ChainStep::Multiply(m) => m.mul(&current)?,
            ChainStep::Apply(op) => apply_operator(op, &current)?,
        };
    }
    Ok(current)
}

/// Pointwise product evaluated on a 2x zero-padded grid and truncated back,
/// removing the aliasing of the product's high frequencies.
pub fn padded_product(a: &Field, b: &Field) -> Result<Field> {
    let grid = *a.grid();
    if a.grid() != b.grid() {
        return Err(Error::Config("padded product needs fields on one grid".into()));
    }
    let big = Grid::new(grid.dim(), 2 * grid.n(), grid.period())?;
    let up = |f: &Field| -> Vec<C64> {
        let mut small = f.data().to_vec();
        dft_in_place(&grid, &mut small, Direction::Forward);
        let mut wide = vec![C64::new(0.0, 0.0); big.len()];
        for (k, v) in small.iter().enumerate() {
            wide[big_index(&grid, &big, k)] = *v / grid.len() as f64;
        }
        dft_in_place(&big, &mut wide, Direction::Inverse);
        wide
    };
    let wa = up(a);
    let wb = up(b);
    let mut prod: Vec<C64> = wa.iter().zip(&wb).map(|(x, y)| x * y).collect();
    dft_in_place(&big, &mut prod, Direction::Forward);
    let mut small = vec![C64::new(0.0, 0.0); grid.len()];
    for (k, v) in small.iter_mut().enumerate() {
        *v = prod[big_index(&grid, &big, k)] / big.len() as f64;
    }
    dft_in_place(&grid, &mut small, Direction::Inverse);
    Field::from_vec(grid, small, Space::Physical)
}

fn big_index(small: &Grid, big: &Grid, k: usize) -> usize {
    let idx = small.unflatten(k);
    let mut out = [0usize; 3];
    for axis in 0..small.dim() {
        let m = small.freq_index(idx[axis]);
        out[axis] = m.rem_euclid(big.n() as i64) as usize;
    }
    big.flatten(&out[..small.dim()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_grid() -> Grid {
        Grid::new(2, 256, 16.0).unwrap()
    }

    #[test]
    fn beurling_kills_constants() {
        let grid = Grid::new(2, 32, 4.0).unwrap();
        let f = Field::constant(grid, C64::new(0.3, 0.1));
        let tf = apply_operator(&MultiplierOp::beurling(), &f).unwrap();
        assert!(tf.sup_norm() < 1e-15);
    }

    #[test]
    fn beurling_maps_z_gaussian_to_zbar_gaussian() {
        let grid = gauss_grid();
        let f = Field::from_fn(grid, |x| {
            C64::new(x[0], x[1]) * (-(x[0] * x[0] + x[1] * x[1])).exp()
        });
        let expected = Field::from_fn(grid, |x| {
            C64::new(x[0], -x[1]) * (-(x[0] * x[0] + x[1] * x[1])).exp()
        });
        let tf = apply_operator(&MultiplierOp::beurling(), &f).unwrap();
        let err = tf.sub(&expected).unwrap().sup_norm();
        assert!(err <= 1e-6, "error {err:e}");
    }

    #[test]
    fn cauchy_inverts_dzbar() {
        let grid = gauss_grid();
        let f = Field::from_fn(grid, |x| {
            C64::new(1.0 + x[1], 0.5 * x[0]) * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp()
        });
        let back = apply_operator(
            &MultiplierOp::cauchy(),
            &apply_operator(&MultiplierOp::dzbar(), &f).unwrap(),
        )
        .unwrap();
        let mean = f.mean();
        let err = back.sub(&f.map(|v| v - mean)).unwrap().sup_norm();
        assert!(err <= 1e-8, "error {err:e}");
    }

    #[test]
    fn planar_operators_reject_other_dimensions() {
        let grid = Grid::new(3, 8, 1.0).unwrap();
        let f = Field::zeros(grid);
        assert!(matches!(apply_operator(&MultiplierOp::beurling(), &f), Err(Error::Config(_))));
        assert!(apply_operator(&MultiplierOp::cauchy(), &f).is_err());
        assert!(apply_operator(&MultiplierOp::riesz2(1, 3), &f).is_ok());
        let g1 = Field::zeros(Grid::new(1, 8, 1.0).unwrap());
        assert!(apply_operator(&MultiplierOp::riesz2(1, 2), &g1).is_err());
    }

    #[test]
    fn sup_norms() {
        let grid = Grid::new(2, 64, 4.0).unwrap();
        assert!((operator_sup_norm(&MultiplierOp::beurling(), &grid) - 1.0).abs() < 1e-15);
        assert!((operator_sup_norm(&MultiplierOp::riesz2(1, 2), &grid) - 0.5).abs() < 1e-15);
        assert!((operator_sup_norm(&MultiplierOp::identity(), &grid) - 1.0).abs() < 1e-15);
        assert!((operator_sup_norm(&MultiplierOp::mixed_ratio_12(), &grid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn riesz_diagonal_sums_to_minus_identity() {
        let grid = Grid::new(3, 16, 2.0).unwrap();
        let f = Field::from_fn(grid, |x| C64::new((x[0] * 3.0).sin() + x[2], x[1].cos()));
        let mut total = Field::zeros(grid);
        for j in 1..=3 {
            total = total.add(&apply_operator(&MultiplierOp::riesz2(j, j), &f).unwrap()).unwrap();
        }
        let mean = f.mean();
        let err = total.add(&f.map(|v| v - mean)).unwrap().sup_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn chain_applies_right_to_left() {
        let grid = Grid::new(2, 32, 4.0).unwrap();
        let mu = Field::from_fn(grid, |x| C64::new(0.4 * (x[0]).sin(), 0.1 * x[1].cos()));
        let t = MultiplierOp::beurling();
        let one = Field::constant(grid, C64::new(1.0, 0.0));
        let chained =
            chain_apply(&[ChainStep::Multiply(&mu), ChainStep::Apply(&t), ChainStep::Multiply(&mu)], &one)
                .unwrap();
        let direct = mu.mul(&apply_operator(&t, &mu).unwrap()).unwrap();
        assert!(chained.sub(&direct).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn custom_table_reproduces_beurling() {
        let table: Vec<(f64, C64)> = (0..720)
            .map(|k| {
                let th = -PI + k as f64 * PI / 360.0;
                (th, C64::from_polar(1.0, -2.0 * th))
            })
            .collect();
        let op = MultiplierOp::custom("tab", table).unwrap();
        let grid = Grid::new(2, 64, 4.0).unwrap();
        let f = Field::from_fn(grid, |x| C64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), 0.0));
        let a = apply_operator(&op, &f).unwrap();
        let b = apply_operator(&MultiplierOp::beurling(), &f).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-4 * f.l2_norm());
    }

    #[test]
    fn padded_product_of_band_limited_fields_is_exact() {
        let grid = Grid::new(2, 32, 2.0 * PI).unwrap();
        let a = Field::from_fn(grid, |x| C64::new((3.0 * x[0]).cos(), 0.0));
        let b = Field::from_fn(grid, |x| C64::new((2.0 * x[1]).sin(), 0.0));
        let p = padded_product(&a, &b).unwrap();
        let d = a.mul(&b).unwrap();
        assert!(p.sub(&d).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn operator_names_parse() {
        assert_eq!(MultiplierOp::from_name("riesz2(1,2)").unwrap(), MultiplierOp::riesz2(1, 2));
        assert_eq!(MultiplierOp::from_name("laplace_ratio(1,2)").unwrap().degree(), 0);
        assert!(MultiplierOp::from_name("hilbert").is_err());
        assert!(MultiplierOp::from_name("riesz2(0,4)").is_err());
    }
}
