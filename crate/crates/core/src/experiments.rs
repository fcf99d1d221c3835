//! Monte Carlo homogenization runs, multiscale-calculus identity checks,
//! effective-dilatation tables, the two-bump functional and the 3D
//! second-order PDE ladder.
//!
//! Work items (ladder level, seed) run on the ambient rayon pool and are
//! collected in input order, so every result is independent of the number
//! of worker threads.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::{normalize_3pt, reconstruct_map, solve_fixed_point, window_points, MapField, Stripes};
use crate::error::{Error, Result};
use crate::fields::{
    build_dilatation, derive_seed, profile_integral, scale_delta, sum_translates, tensor_product, BoxRegion,
    BumpProfile, DilatationModel, Distribution, Envelope, ModelKind, PeriodizedProduct, Profile, TensorFactor,
};
use crate::grid::{apply_multiplier, cell_average, pairing, CellMap, Field, Grid, Space, C64};
use crate::ops::{apply_operator, chain_apply, operator_sup_norm, ChainStep, MultiplierOp, OperatorKind};
use crate::stats::{fit_decay, median, ComplexStats, DecayFit, Stats};

/// Gaussian test function `exp(-|x - center|^2 / width^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestFunction {
    pub fn new(center: &[f64], width: f64) -> Self {
        Self { center: center.to_vec(), width }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / (self.width * self.width)).exp()
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        Field::from_fn(*grid, |x| C64::new(self.eval(x), 0.0))
    }

    /// `int_{R^d} phi = (pi w^2)^{d/2}`.
    pub fn integral(&self, dim: usize) -> f64 {
        (PI * self.width * self.width).powf(dim as f64 / 2.0)
    }
}

/// Three centres inside the unit cube times widths 0.15 and 0.3.
pub fn default_battery(dim: usize) -> Vec<TestFunction> {
    let centres = [[0.5, 0.5, 0.5], [0.25, 0.75, 0.5], [0.7, 0.3, 0.5]];
    let mut out = Vec::new();
    for c in centres {
        for w in [0.15, 0.3] {
            out.push(TestFunction::new(&c[..dim], w));
        }
    }
    out
}

/// One raw output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub j: u32,
    pub seed: u64,
    pub phi_id: usize,
    pub pairing: C64,
    pub a: C64,
    pub residual: f64,
    pub iters: usize,
}

/// A work item that failed; the rest of the run continues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub j: u32,
    pub seed: u64,
    pub message: String,
}

/// Raw rows, failures and an experiment-specific summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult<S> {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub summary: S,
}

fn work_items(ladder: &[u32], seeds: &[u64]) -> Vec<(u32, u64)> {
    ladder.iter().flat_map(|&j| seeds.iter().map(move |&s| (j, s))).collect()
}

fn sort_rows(rows: &mut [Row]) {
    rows.sort_by_key(|a| (a.j, a.seed, a.phi_id));
}

fn check_ladder(ladder: &[u32], seeds: &[u64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Config("ladder is empty".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(())
}

/// Seed of layer `l` of a chain whose factors are independent fields.
pub fn layer_seed(seed: u64, layer: usize) -> u64 {
    if layer == 0 {
        seed
    } else {
        derive_seed(seed, &[i64::MAX, layer as i64])
    }
}

// ---------------------------------------------------------------------------
// Iterated chains

/// `h = mu_m T_{m-1} mu_{m-1} ... T_1 mu_1` over a ladder of scales.
///
/// With a single model every factor is the same field; otherwise factor `l`
/// is drawn from its own model with seed [`layer_seed`].
#[derive(Debug, Clone)]
pub struct IteratedSpec {
    pub grid: Grid,
    pub ladder: Vec<u32>,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelKind>,
    pub operators: Vec<MultiplierOp>,
    pub test_functions: Vec<TestFunction>,
}

impl IteratedSpec {
    pub fn chain_length(&self) -> usize {
        self.operators.len() + 1
    }

    fn validate(&self) -> Result<()> {
        check_ladder(&self.ladder, &self.seeds)?;
        let m = self.chain_length();
        if self.models.len() != 1 && self.models.len() != m {
            return Err(Error::Config(format!(
                "a chain of length {m} needs 1 or {m} models, got {}",
                self.models.len()
            )));
        }
        for op in &self.operators {
            op.check_dim(self.grid.dim())?;
        }
        for &j in &self.ladder {
            for kind in &self.models {
                DilatationModel::new(kind.clone(), j, 0).check_resolution(&self.grid)?;
            }
        }
        Ok(())
    }
}

/// Builds the chain field `h` of one (level, seed) work item.
pub fn chain_field(spec: &IteratedSpec, j: u32, seed: u64) -> Result<Field> {
    let m = spec.chain_length();
    let mut factors = Vec::with_capacity(spec.models.len());
    for (l, kind) in spec.models.iter().enumerate() {
        let model = DilatationModel::new(kind.clone(), j, layer_seed(seed, l));
        factors.push(build_dilatation(&spec.grid, &model)?.0);
    }
    let factor = |l: usize| if factors.len() == 1 { &factors[0] } else { &factors[l] };
    let mut steps = Vec::with_capacity(2 * m - 1);
    for l in (0..m).rev() {
        steps.push(ChainStep::Multiply(factor(l)));
        if l > 0 {
            steps.push(ChainStep::Apply(&spec.operators[l - 1]));
        }
    }
    chain_apply(&steps, &Field::constant(spec.grid, C64::new(1.0, 0.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct IteratedLevel {
    pub j: u32,
    /// Per test function.
    pub pairings: Vec<ComplexStats>,
    /// `||h||_2` over seeds.
    pub norm: Stats,
}

#[derive(Debug, Clone, Serialize)]
pub struct IteratedSummary {
    pub chain_length: usize,
    pub levels: Vec<IteratedLevel>,
    /// Fit of the pairing variance against `j`, per test function.
    pub variance_decay: Vec<Option<DecayFit>>,
    /// `max_j / min_j` of the mean `||h||_2`.
    pub norm_ratio: f64,
}

impl IteratedSummary {
    pub fn min_variance_slope(&self) -> f64 {
        self.variance_decay.iter().map(|f| f.map_or(f64::NAN, |f| f.slope)).fold(f64::INFINITY, f64::min)
    }
}

pub fn run_iterated(spec: &IteratedSpec) -> Result<RunResult<IteratedSummary>> {
    spec.validate()?;
    let phis: Vec<Field> = spec.test_functions.iter().map(|t| t.sample(&spec.grid)).collect();
    let items = work_items(&spec.ladder, &spec.seeds);
    let outcomes: Vec<Result<(Vec<C64>, C64, f64)>> = items
        .par_iter()
        .map(|&(j, seed)| {
            let h = chain_field(spec, j, seed)?;
            let pairs = phis.iter().map(|phi| pairing(&h, phi)).collect::<Result<Vec<_>>>()?;
            Ok((pairs, h.mean(), h.l2_norm()))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut per_level: Vec<(Vec<Vec<C64>>, Vec<f64>)> =
        spec.ladder.iter().map(|_| (vec![Vec::new(); phis.len()], Vec::new())).collect();
    for (&(j, seed), outcome) in items.iter().zip(outcomes) {
        let li = spec.ladder.iter().position(|&x| x == j).unwrap();
        match outcome {
            Ok((pairs, mean, norm)) => {
                for (phi_id, p) in pairs.iter().enumerate() {
                    rows.push(Row {
                        experiment: "iterated".into(),
                        j,
                        seed,
                        phi_id,
                        pairing: *p,
                        a: mean,
                        residual: 0.0,
                        iters: 0,
                    });
                    per_level[li].0[phi_id].push(*p);
                }
                per_level[li].1.push(norm);
            }
            Err(e) => failures.push(Failure { j, seed, message: e.to_string() }),
        }
    }
    sort_rows(&mut rows);

    let levels: Vec<IteratedLevel> = spec
        .ladder
        .iter()
        .zip(&per_level)
        .map(|(&j, (pairs, norms))| IteratedLevel {
            j,
            pairings: pairs.iter().map(|p| ComplexStats::of(p)).collect(),
            norm: Stats::of(norms),
        })
        .collect();
    let variance_decay = (0..phis.len())
        .map(|p| {
            let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.j as f64, l.pairings[p].variance)).collect();
            fit_decay(&pts).ok()
        })
        .collect();
    let means: Vec<f64> = levels.iter().map(|l| l.norm.mean).collect();
    let norm_ratio = ladder_ratio(&means);
    Ok(RunResult {
        experiment: "iterated".into(),
        rows,
        failures,
        summary: IteratedSummary { chain_length: spec.chain_length(), levels, variance_decay, norm_ratio },
    })
}

/// `max / min` of positive values (infinite if any value is not positive).
pub fn ladder_ratio(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// Beltrami ladders

#[derive(Debug, Clone)]
pub struct BeltramiSpec {
    pub grid: Grid,
    pub ladder: Vec<u32>,
    pub seeds: Vec<u64>,
    pub model: ModelKind,
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Radius of the comparison window `B(0, R)`.
    pub window: f64,
    pub test_functions: Vec<TestFunction>,
}

/// Solution of one (level, seed) work item.
#[derive(Debug, Clone)]
pub struct BeltramiSample {
    pub j: u32,
    pub seed: u64,
    pub a_eff: C64,
    pub residual: f64,
    pub iterations: usize,
    pub term_norms: Vec<f64>,
    pub pairings: Vec<C64>,
    /// Normalized map on [`window_points`].
    pub window_values: Vec<C64>,
    pub identity_distance: f64,
    pub clamp_rate: Option<f64>,
    pub exp_k_integral: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeltramiLevel {
    pub j: u32,
    pub solved: usize,
    pub a_eff: ComplexStats,
    pub median_identity_distance: f64,
    /// Largest sup-distance between the maps of two seeds.
    pub dispersion: f64,
    /// Median over seeds of `sup |F_{j+next} - F_j|` on the window.
    pub median_step_to_next: Option<f64>,
    pub max_residual: f64,
    pub median_iterations: f64,
    pub clamp_rate: Option<Stats>,
    pub median_exp_k_integral: Option<f64>,
    /// Median over seeds of `||psi_m||_2`, `m = 1, 2, ...`.
    pub median_term_norms: Vec<f64>,
    /// Exponent `q` of a least-squares fit `||psi_m|| ~ m^-q`.
    pub term_decay_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeltramiSummary {
    pub levels: Vec<BeltramiLevel>,
}

pub fn solve_beltrami_sample(spec: &BeltramiSpec, j: u32, seed: u64, phis: &[Field]) -> Result<(BeltramiSample, MapField)> {
    let model = DilatationModel::new(spec.model.clone(), j, seed);
    let (mu, diag) = build_dilatation(&spec.grid, &model)?;
    let mut report = solve_fixed_point(&mu, &MultiplierOp::beurling(), spec.tol, spec.max_iter)?;
    report.clamp_rate = diag.clamp_rate;
    report.exp_k_integral = diag.exp_k_integral;
    let map = normalize_3pt(reconstruct_map(&report)?)?;
    let pts = window_points(spec.window);
    let window_values: Vec<C64> = pts.iter().map(|&z| map.eval(z)).collect();
    let identity_distance =
        pts.iter().zip(&window_values).map(|(z, f)| (f - z).norm()).fold(0.0, f64::max);
    let pairings = phis.iter().map(|phi| pairing(&report.g, phi)).collect::<Result<Vec<_>>>()?;
    Ok((
        BeltramiSample {
            j,
            seed,
            a_eff: report.a_eff,
            residual: report.residual,
            iterations: report.iterations,
            term_norms: report.term_norms,
            pairings,
            window_values,
            identity_distance,
            clamp_rate: report.clamp_rate,
            exp_k_integral: report.exp_k_integral,
        },
        map,
    ))
}

fn sup_gap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn run_beltrami(spec: &BeltramiSpec) -> Result<RunResult<BeltramiSummary>> {
    check_ladder(&spec.ladder, &spec.seeds)?;
    if spec.grid.dim() != 2 {
        return Err(Error::Config("Beltrami runs need a planar grid".into()));
    }
    for &j in &spec.ladder {
        DilatationModel::new(spec.model.clone(), j, 0).check_resolution(&spec.grid)?;
    }
    let phis: Vec<Field> = spec.test_functions.iter().map(|t| t.sample(&spec.grid)).collect();
    let items = work_items(&spec.ladder, &spec.seeds);
    let outcomes: Vec<Result<BeltramiSample>> = items
        .par_iter()
        .map(|&(j, seed)| solve_beltrami_sample(spec, j, seed, &phis).map(|s| s.0))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut samples: Vec<Vec<BeltramiSample>> = spec.ladder.iter().map(|_| Vec::new()).collect();
    for (&(j, seed), outcome) in items.iter().zip(outcomes) {
        match outcome {
            Ok(s) => {
                let ids: Vec<usize> = if s.pairings.is_empty() { vec![0] } else { (0..s.pairings.len()).collect() };
                for phi_id in ids {
                    rows.push(Row {
                        experiment: "beltrami".into(),
                        j,
                        seed,
                        phi_id,
                        pairing: s.pairings.get(phi_id).copied().unwrap_or_default(),
                        a: s.a_eff,
                        residual: s.residual,
                        iters: s.iterations,
                    });
                }
                let li = spec.ladder.iter().position(|&x| x == j).unwrap();
                samples[li].push(s);
            }
            Err(e) => failures.push(Failure { j, seed, message: e.to_string() }),
        }
    }
    sort_rows(&mut rows);

    let mut levels = Vec::new();
    for (li, level) in samples.iter().enumerate() {
        let j = spec.ladder[li];
        let a: Vec<C64> = level.iter().map(|s| s.a_eff).collect();
        let mut dispersion: f64 = 0.0;
        for (p, x) in level.iter().enumerate() {
            for y in &level[p + 1..] {
                dispersion = dispersion.max(sup_gap(&x.window_values, &y.window_values));
            }
        }
        let median_step_to_next = samples.get(li + 1).and_then(|next| {
            let steps: Vec<f64> = level
                .iter()
                .filter_map(|s| next.iter().find(|t| t.seed == s.seed).map(|t| sup_gap(&s.window_values, &t.window_values)))
                .collect();
            (!steps.is_empty()).then(|| median(&steps))
        });
        let clamp: Vec<f64> = level.iter().filter_map(|s| s.clamp_rate).collect();
        let expk: Vec<f64> = level.iter().filter_map(|s| s.exp_k_integral).collect();
        let terms = level.iter().map(|s| s.term_norms.len()).min().unwrap_or(0);
        let median_term_norms: Vec<f64> = (0..terms)
            .map(|m| median(&level.iter().map(|s| s.term_norms[m]).collect::<Vec<_>>()))
            .collect();
        levels.push(BeltramiLevel {
            j,
            solved: level.len(),
            a_eff: ComplexStats::of(&a),
            median_identity_distance: median(&level.iter().map(|s| s.identity_distance).collect::<Vec<_>>()),
            dispersion,
            median_step_to_next,
            max_residual: level.iter().map(|s| s.residual).fold(0.0, f64::max),
            median_iterations: median(&level.iter().map(|s| s.iterations as f64).collect::<Vec<_>>()),
            clamp_rate: (!clamp.is_empty()).then(|| Stats::of(&clamp)),
            median_exp_k_integral: (!expk.is_empty()).then(|| median(&expk)),
            term_decay_exponent: power_law_exponent(&median_term_norms),
            median_term_norms,
        });
    }
    Ok(RunResult { experiment: "beltrami".into(), rows, failures, summary: BeltramiSummary { levels } })
}

/// Least-squares `q` in `v_m ~ m^-q` over the positive entries.
pub fn power_law_exponent(values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

// ---------------------------------------------------------------------------
// Stripes oracle

#[derive(Debug, Clone, Serialize)]
pub struct StripesReport {
    pub a: f64,
    pub j: u32,
    pub n: usize,
    pub period: f64,
    pub a_eff: C64,
    pub a_eff_error: f64,
    /// `sup |F - F_exact|` on the window, after three-point normalization.
    pub map_error: f64,
    pub residual: f64,
    pub iterations: usize,
}

pub fn stripes_oracle(a: f64, grid: &Grid, j: u32, tol: f64, window: f64) -> Result<StripesReport> {
    let exact = Stripes::new(a, scale_delta(j))?;
    let model = DilatationModel::new(ModelKind::Stripes { a }, j, 0);
    let (mu, _) = build_dilatation(grid, &model)?;
    let report = solve_fixed_point(&mu, &MultiplierOp::beurling(), tol, None)?;
    let map = normalize_3pt(reconstruct_map(&report)?)?;
    Ok(StripesReport {
        a,
        j,
        n: grid.n(),
        period: grid.period(),
        a_eff: report.a_eff,
        a_eff_error: (report.a_eff - exact.effective()).norm(),
        map_error: map.sup_distance(|z| exact.value(z), window),
        residual: report.residual,
        iterations: report.iterations,
    })
}

// ---------------------------------------------------------------------------
// Effective dilatation tables

#[derive(Debug, Clone)]
pub struct HgxSpec {
    pub grid: Grid,
    pub profile: BumpProfile,
    pub dist: Distribution,
    pub a_values: Vec<C64>,
    pub j: u32,
    pub seeds: Vec<u64>,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HgxEntry {
    pub a: C64,
    pub estimate: ComplexStats,
    /// Some component of the mean exceeds three standard errors.
    pub nonzero: bool,
}

/// Monte Carlo estimate of the effective dilatation of `a * B_delta` for
/// every `a`. Rows use `phi_id` for the index of `a` and store `a` in the
/// pairing column.
pub fn estimate_hgx(spec: &HgxSpec) -> Result<RunResult<Vec<HgxEntry>>> {
    check_ladder(&[spec.j], &spec.seeds)?;
    if let Some(bad) = spec.a_values.iter().find(|a| !(a.norm() < 1.0)) {
        return Err(Error::Config(format!("envelope value {bad} must satisfy |a| < 1")));
    }
    let items: Vec<(usize, u64)> =
        (0..spec.a_values.len()).flat_map(|i| spec.seeds.iter().map(move |&s| (i, s))).collect();
    let outcomes: Vec<Result<(C64, f64, usize)>> = items
        .par_iter()
        .map(|&(i, seed)| {
            let kind = ModelKind::Model3Bumpfield {
                envelope: Envelope::constant(spec.a_values[i]),
                profile: spec.profile.clone(),
                dist: spec.dist.clone(),
            };
            let (mu, _) = build_dilatation(&spec.grid, &DilatationModel::new(kind, spec.j, seed))?;
            let r = solve_fixed_point(&mu, &MultiplierOp::beurling(), spec.tol, None)?;
            Ok((r.a_eff, r.residual, r.iterations))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut values: Vec<Vec<C64>> = vec![Vec::new(); spec.a_values.len()];
    for (&(i, seed), outcome) in items.iter().zip(outcomes) {
        match outcome {
            Ok((a_eff, residual, iters)) => {
                rows.push(Row {
                    experiment: "hgx".into(),
                    j: spec.j,
                    seed,
                    phi_id: i,
                    pairing: spec.a_values[i],
                    a: a_eff,
                    residual,
                    iters,
                });
                values[i].push(a_eff);
            }
            Err(e) => failures.push(Failure { j: spec.j, seed, message: e.to_string() }),
        }
    }
    sort_rows(&mut rows);
    let summary = spec
        .a_values
        .iter()
        .zip(&values)
        .map(|(&a, v)| {
            let estimate = ComplexStats::of(v);
            let nonzero = !estimate.mean_within(3.0);
            HgxEntry { a, estimate, nonzero }
        })
        .collect();
    Ok(RunResult { experiment: "hgx".into(), rows, failures, summary })
}

// ---------------------------------------------------------------------------
// Two-bump functional

/// Radius of the building-block bump.
pub const TWO_BUMP_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct TwoBumpReport {
    pub separation: f64,
    pub n: usize,
    pub period: f64,
    /// `int phi_A T phi_A`.
    pub value: C64,
    /// Riemann sum of the single bump.
    pub bump_integral: f64,
    /// `-2 (int phi)^2 / (pi (2A)^2)`.
    pub asymptote: f64,
    pub ratio: f64,
}

/// Torus for separation `A`: period `16 A`, spacing `1/4` (for `A` a power
/// of two).
pub fn two_bump_grid(separation: f64) -> Result<Grid> {
    let period = 16.0 * separation.max(1.0);
    let n = ((period * 4.0).round() as usize).next_power_of_two().max(8);
    Grid::new(2, n, period)
}

/// `int phi_A T phi_A` for `phi_A = phi(. - A) + phi(. + A)` with `phi` a
/// radial bump of radius [`TWO_BUMP_RADIUS`], computed spectrally.
pub fn two_bump_functional(separation: f64, grid: &Grid) -> Result<TwoBumpReport> {
    if grid.dim() != 2 {
        return Err(Error::Config("the two-bump functional is planar".into()));
    }
    if separation + TWO_BUMP_RADIUS > grid.period() / 4.0 {
        return Err(Error::Config(format!(
            "bumps at +-{separation} with radius {TWO_BUMP_RADIUS} leave the inner window of a torus of period {}",
            grid.period()
        )));
    }
    let bump = |x: f64, y: f64| crate::fields::radial_bump((x * x + y * y).sqrt() / TWO_BUMP_RADIUS);
    let phi = Field::from_fn(*grid, |x| C64::new(bump(x[0] - separation, x[1]) + bump(x[0] + separation, x[1]), 0.0));
    let single = Field::from_fn(*grid, |x| C64::new(bump(x[0], x[1]), 0.0));
    let bump_integral = single.mean().re * grid.volume();
    let tphi = apply_operator(&MultiplierOp::beurling(), &phi)?;
    let value = pairing(&phi, &tphi)?;
    let asymptote = if separation > 0.0 {
        -2.0 * bump_integral * bump_integral / (PI * (2.0 * separation).powi(2))
    } else {
        f64::NAN
    };
    Ok(TwoBumpReport {
        separation,
        n: grid.n(),
        period: grid.period(),
        value,
        bump_integral,
        asymptote,
        ratio: value.re / asymptote,
    })
}

// ---------------------------------------------------------------------------
// Multiscale calculus identities

#[derive(Debug, Clone, Serialize)]
pub struct CalculusRow {
    pub j: u32,
    pub pairing: C64,
    pub target: C64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalculusCheck {
    pub name: String,
    pub rows: Vec<CalculusRow>,
    pub fit: Option<DecayFit>,
}

impl CalculusCheck {
    fn new(name: &str, rows: Vec<CalculusRow>) -> Self {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.j as f64, r.deviation)).collect();
        Self { name: name.into(), fit: fit_decay(&pts).ok(), rows }
    }
}

/// `<f (x)_delta g, phi>` against `(int g)(int f phi)` over the ladder.
pub fn check_weak_limit(
    f: &Envelope,
    g: &dyn Profile,
    phi: &TestFunction,
    ladder: &[u32],
    grid: &Grid,
) -> Result<CalculusCheck> {
    let phi_field = phi.sample(grid);
    let fphi = pairing(&f.sample(grid), &phi_field)?;
    let mut rows = Vec::new();
    for &j in ladder {
        let s = grid.samples_per_cell(scale_delta(j))?;
        let product = tensor_product(grid, TensorFactor::Envelope(f), g, j, None)?;
        let p = pairing(&product, &phi_field)?;
        let target = profile_integral(g, s, grid.dim()) * fphi;
        rows.push(CalculusRow { j, pairing: p, target, deviation: (p - target).norm() });
    }
    Ok(CalculusCheck::new("weak_limit", rows))
}

/// `sum_n c_n k(x/delta - n)` for a kernel `k` that is periodic on the torus
/// measured in cells, given by its samples on that torus. Computed as a
/// circular convolution of the weight comb with the kernel.
fn periodic_translates(grid: &Grid, weights: &CellMap, kernel: &Field) -> Result<Field> {
    let s = grid.samples_per_cell(weights.delta())?;
    let n = grid.n();
    let dim = grid.dim();
    let mut comb = Field::zeros(*grid);
    for flat in 0..weights.len() {
        let mut rem = flat;
        let mut idx = [0usize; 3];
        for axis in (0..dim).rev() {
            idx[axis] = (rem % weights.cells_per_axis()) * s;
            rem /= weights.cells_per_axis();
        }
        comb.data_mut()[grid.flatten(&idx[..dim])] = weights.values()[flat];
    }
    // Kernel sample at offset d (in samples from a cell corner) sits at index
    // d + N/2 of the cell-unit torus.
    let mut shifted = Field::zeros(*grid);
    for k in 0..grid.len() {
        let idx = grid.unflatten(k);
        let src: Vec<usize> = idx[..dim].iter().map(|&i| (i + n / 2) % n).collect();
        shifted.data_mut()[k] = kernel.data()[grid.flatten(&src)];
    }
    circular_convolution(&comb, &shifted)
}

fn circular_convolution(a: &Field, b: &Field) -> Result<Field> {
    let grid = *a.grid();
    let mut fa = a.data().to_vec();
    let mut fb = b.data().to_vec();
    crate::grid::dft_in_place(&grid, &mut fa, crate::grid::Direction::Forward);
    crate::grid::dft_in_place(&grid, &mut fb, crate::grid::Direction::Forward);
    let scale = 1.0 / grid.len() as f64;
    let mut prod: Vec<C64> = fa.iter().zip(&fb).map(|(x, y)| x * y * scale).collect();
    crate::grid::dft_in_place(&grid, &mut prod, crate::grid::Direction::Inverse);
    Field::from_vec(grid, prod, Space::Physical)
}

/// `g' = T(g - A 1_{[0,1)^d})` sampled on the torus of `C` cells with the
/// same number of samples per axis as `grid`.
fn corrected_profile_image(grid: &Grid, g: &dyn Profile, t: &MultiplierOp, s: usize, a: C64) -> Result<Field> {
    let cells = (grid.n() / s) as f64;
    let reference = Grid::new(grid.dim(), grid.n(), cells)?;
    let indicator = BumpProfile::UnitSquareIndicator;
    let base = Field::from_fn(reference, |u| g.eval(u) - a * indicator.eval(u));
    apply_operator(t, &base)
}

/// `|<T(f (x) g) - A Tf - f (x) g', phi>|` with `A = int g`.
pub fn check_t_image(
    f: &Envelope,
    g: &dyn Profile,
    t: &MultiplierOp,
    phi: &TestFunction,
    j: u32,
    grid: &Grid,
) -> Result<CalculusRow> {
    if t.degree() != 0 {
        return Err(Error::Argument(format!("operator {} is not homogeneous of degree 0", t.name)));
    }
    let delta = scale_delta(j);
    let s = grid.samples_per_cell(delta)?;
    let a = profile_integral(g, s, grid.dim());
    let f_field = f.sample(grid);
    let lhs = apply_operator(t, &tensor_product(grid, TensorFactor::Field(&f_field), g, j, None)?)?;
    let g_prime = corrected_profile_image(grid, g, t, s, a)?;
    let weights = cell_average(&f_field, delta)?;
    let rhs = apply_operator(t, &f_field)?.scale(a).add(&periodic_translates(grid, &weights, &g_prime)?)?;
    let phi_field = phi.sample(grid);
    let p = pairing(&lhs, &phi_field)?;
    let target = pairing(&rhs, &phi_field)?;
    Ok(CalculusRow { j, pairing: p, target, deviation: (p - target).norm() })
}

pub fn check_t_image_ladder(
    f: &Envelope,
    g: &dyn Profile,
    t: &MultiplierOp,
    phi: &TestFunction,
    ladder: &[u32],
    grid: &Grid,
) -> Result<CalculusCheck> {
    let rows = ladder.iter().map(|&j| check_t_image(f, g, t, phi, j, grid)).collect::<Result<Vec<_>>>()?;
    Ok(CalculusCheck::new("t_image", rows))
}

/// `|<(f (x) g)(f2 (x) g2) - (f f2) (x) g~2, phi>|` with
/// `g~2(x) = g2(x) sum_n g(x + n)`.
#[allow(clippy::too_many_arguments)]
pub fn check_product_equiv(
    f: &Envelope,
    g: &dyn Profile,
    f2: &Envelope,
    g2: &dyn Profile,
    phi: &TestFunction,
    j: u32,
    grid: &Grid,
) -> Result<CalculusRow> {
    let delta = scale_delta(j);
    let a = tensor_product(grid, TensorFactor::Envelope(f), g, j, None)?;
    let b = tensor_product(grid, TensorFactor::Envelope(f2), g2, j, None)?;
    let ff2 = f.sample(grid).mul(&f2.sample(grid))?;
    let combined = PeriodizedProduct { g, g2, dim: grid.dim() };
    let weights = cell_average(&ff2, delta)?;
    let rhs = sum_translates(grid, &weights, &combined)?;
    let phi_field = phi.sample(grid);
    let p = pairing(&a.mul(&b)?, &phi_field)?;
    let target = pairing(&rhs, &phi_field)?;
    Ok(CalculusRow { j, pairing: p, target, deviation: (p - target).norm() })
}

#[allow(clippy::too_many_arguments)]
pub fn check_product_equiv_ladder(
    f: &Envelope,
    g: &dyn Profile,
    f2: &Envelope,
    g2: &dyn Profile,
    phi: &TestFunction,
    ladder: &[u32],
    grid: &Grid,
) -> Result<CalculusCheck> {
    let rows =
        ladder.iter().map(|&j| check_product_equiv(f, g, f2, g2, phi, j, grid)).collect::<Result<Vec<_>>>()?;
    Ok(CalculusCheck::new("product_equiv", rows))
}

// ---------------------------------------------------------------------------
// Second-order PDE in three dimensions

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub u: Field,
    /// `Delta u`.
    pub f: Field,
    /// Constant `lambda` with `Delta u + sum mu P u = h - lambda` (the torus
    /// solvability condition).
    pub compatibility: C64,
    pub residual: f64,
    pub iterations: usize,
    /// `sum_l sup|m_l| ||mu_l||_inf`.
    pub ellipticity: f64,
}

/// Symbol of `P(D)` for `T = Delta^{-1} P(D)`, as applied on `grid`.
fn differential_symbol(op: &MultiplierOp, xi: &[f64; 3], grid: &Grid) -> C64 {
    let dim = grid.dim();
    let r2: f64 = xi.iter().take(dim).map(|v| v * v).sum();
    op.grid_symbol(xi, dim, grid.freq(grid.n() / 2)) * (-4.0 * PI * PI * r2)
}

/// `-4 pi^2 sum_jk c_jk xi_j xi_k` straight from the coefficients.
fn coefficient_symbol(coeffs: &[[f64; 3]; 3], xi: &[f64; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += coeffs[a][b] * xi[a] * xi[b];
        }
    }
    -4.0 * PI * PI * s
}

/// `||Delta u + sum mu_l P_l(D) u - (h - lambda)||_2 / ||h||_2`.
pub fn pde_residual(layers: &[(Field, MultiplierOp)], u: &Field, h: &Field, lambda: C64) -> Result<f64> {
    let grid = *u.grid();
    let dim = grid.dim();
    let mut lhs = apply_multiplier(u, |xi| {
        let r2: f64 = xi.iter().take(dim).map(|v| v * v).sum();
        C64::new(-4.0 * PI * PI * r2, 0.0)
    });
    for (mu, op) in layers {
        let pu = apply_multiplier(u, |xi| differential_symbol(op, xi, &grid));
        lhs = lhs.add(&mu.mul(&pu)?)?;
    }
    let r = lhs.sub(&h.map(|v| v - lambda))?.l2_norm();
    let norm = h.l2_norm();
    Ok(if norm == 0.0 { r } else { r / norm })
}

/// Solves `f = (h - sum mu_l T_l f) - mean` by fixed-point iteration and
/// returns `u = Delta^{-1} f`.
pub fn solve_pde3d(layers: &[(Field, MultiplierOp)], h: &Field, tol: f64, max_iter: Option<usize>) -> Result<PdeSolution> {
    let grid = *h.grid();
    let mut ellipticity = 0.0;
    for (mu, op) in layers {
        if mu.grid() != h.grid() {
            return Err(Error::Config("coefficient and source grids differ".into()));
        }
        op.check_dim(grid.dim())?;
        if op.degree() != 0 {
            return Err(Error::Argument(format!("{} is not of order zero", op.name)));
        }
        ellipticity += operator_sup_norm(op, &grid) * mu.sup_norm();
    }
    if !(ellipticity < 1.0) {
        return Err(Error::Model(format!("ellipticity constant {ellipticity} is not below 1")));
    }
    let max_iter = max_iter.unwrap_or_else(|| crate::beltrami::default_max_iter(tol, ellipticity));
    let h_mean = h.mean();
    let h0 = h.map(|v| v - h_mean);
    let scale = h0.l2_norm().max(f64::MIN_POSITIVE);
    let step = |f: &Field| -> Result<Field> {
        let mut next = h.clone();
        for (mu, op) in layers {
            next = next.sub(&mu.mul(&apply_operator(op, f)?)?)?;
        }
        Ok(next)
    };
    let mut f = h0.clone();
    let mut iterations = 0;
    let mut converged = layers.is_empty();
    let mut last = 0.0;
    while !converged {
        if iterations == max_iter {
            return Err(Error::Convergence { iterations, residual: last });
        }
        let raw = step(&f)?;
        let m = raw.mean();
        let next = raw.map(|v| v - m);
        last = next.sub(&f)?.l2_norm() / scale;
        if !last.is_finite() {
            return Err(Error::Divergence { last_finite: iterations });
        }
        iterations += 1;
        f = next;
        converged = last <= tol;
    }
    let compatibility = step(&f)?.mean();
    let u = apply_operator(&MultiplierOp::inv_laplacian(), &f)?;
    let residual = pde_residual(layers, &u, h, compatibility)?;
    Ok(PdeSolution { u, f, compatibility, residual, iterations, ellipticity })
}

/// Largest per-mode gap between the solution for constant `mu = c` and the
/// direct division `u^ = h^ / (-4 pi^2 |xi|^2 + c p(xi))`, relative to
/// `max |u^|`. `op` must be a second-order ratio.
pub fn constant_coefficient_check(c: f64, op: &MultiplierOp, h: &Field, tol: f64) -> Result<f64> {
    let OperatorKind::SecondOrderRatio { coeffs } = &op.kind else {
        return Err(Error::Argument(format!("{} is not a second-order ratio", op.name)));
    };
    let grid = *h.grid();
    let dim = grid.dim();
    let mu = Field::constant(grid, C64::new(c, 0.0));
    let sol = solve_pde3d(&[(mu, op.clone())], h, tol, None)?;
    let mut hu = h.data().to_vec();
    crate::grid::dft_in_place(&grid, &mut hu, crate::grid::Direction::Forward);
    let mut uu = sol.u.data().to_vec();
    crate::grid::dft_in_place(&grid, &mut uu, crate::grid::Direction::Forward);
    let mut max_gap: f64 = 0.0;
    let mut max_u: f64 = 0.0;
    for k in 1..grid.len() {
        let xi = grid.frequency(k);
        let r2: f64 = xi.iter().take(dim).map(|v| v * v).sum();
        let denom = C64::new(-4.0 * PI * PI * r2 + c * coefficient_symbol(coeffs, &xi, dim), 0.0);
        let exact = hu[k] / denom;
        max_gap = max_gap.max((uu[k] - exact).norm());
        max_u = max_u.max(exact.norm());
    }
    Ok(if max_u == 0.0 { max_gap } else { max_gap / max_u })
}

#[derive(Debug, Clone)]
pub struct Pde3dSpec {
    pub grid: Grid,
    pub ladder: Vec<u32>,
    pub seeds: Vec<u64>,
    pub layers: Vec<(ModelKind, MultiplierOp)>,
    pub source: Envelope,
    pub tol: f64,
    pub test_functions: Vec<TestFunction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pde3dLevel {
    pub j: u32,
    pub solved: usize,
    pub max_residual: f64,
    pub median_iterations: f64,
    pub ellipticity: f64,
    /// `||u_{next} - u_j||_2` over seeds.
    pub step_to_next: Option<Stats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pde3dSummary {
    pub levels: Vec<Pde3dLevel>,
}

pub fn run_pde3d(spec: &Pde3dSpec) -> Result<RunResult<Pde3dSummary>> {
    check_ladder(&spec.ladder, &spec.seeds)?;
    if spec.grid.dim() != 3 {
        return Err(Error::Config("the PDE ladder needs a 3D grid".into()));
    }
    let h = spec.source.sample(&spec.grid);
    let phis: Vec<Field> = spec.test_functions.iter().map(|t| t.sample(&spec.grid)).collect();
    let items = work_items(&spec.ladder, &spec.seeds);
    let outcomes: Vec<Result<(PdeSolution, Vec<C64>)>> = items
        .par_iter()
        .map(|&(j, seed)| {
            let mut layers = Vec::new();
            for (l, (kind, op)) in spec.layers.iter().enumerate() {
                let model = DilatationModel::new(kind.clone(), j, layer_seed(seed, l));
                layers.push((build_dilatation(&spec.grid, &model)?.0, op.clone()));
            }
            let sol = solve_pde3d(&layers, &h, spec.tol, None)?;
            let pairs = phis.iter().map(|p| pairing(&sol.u, p)).collect::<Result<Vec<_>>>()?;
            Ok((sol, pairs))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut sols: Vec<Vec<(u64, PdeSolution)>> = spec.ladder.iter().map(|_| Vec::new()).collect();
    for (&(j, seed), outcome) in items.iter().zip(outcomes) {
        match outcome {
            Ok((sol, pairs)) => {
                for (phi_id, p) in pairs.iter().enumerate() {
                    rows.push(Row {
                        experiment: "pde3d".into(),
                        j,
                        seed,
                        phi_id,
                        pairing: *p,
                        a: sol.compatibility,
                        residual: sol.residual,
                        iters: sol.iterations,
                    });
                }
                let li = spec.ladder.iter().position(|&x| x == j).unwrap();
                sols[li].push((seed, sol));
            }
            Err(e) => failures.push(Failure { j, seed, message: e.to_string() }),
        }
    }
    sort_rows(&mut rows);
    let mut levels = Vec::new();
    for (li, level) in sols.iter().enumerate() {
        let step_to_next = match sols.get(li + 1) {
            Some(next) => {
                let mut gaps = Vec::new();
                for (seed, s) in level {
                    if let Some((_, t)) = next.iter().find(|(sd, _)| sd == seed) {
                        gaps.push(t.u.sub(&s.u)?.l2_norm());
                    }
                }
                (!gaps.is_empty()).then(|| Stats::of(&gaps))
            }
            None => None,
        };
        levels.push(Pde3dLevel {
            j: spec.ladder[li],
            solved: level.len(),
            max_residual: level.iter().map(|(_, s)| s.residual).fold(0.0, f64::max),
            median_iterations: median(&level.iter().map(|(_, s)| s.iterations as f64).collect::<Vec<_>>()),
            ellipticity: level.iter().map(|(_, s)| s.ellipticity).fold(0.0, f64::max),
            step_to_next,
        });
    }
    Ok(RunResult { experiment: "pde3d".into(), rows, failures, summary: Pde3dSummary { levels } })
}

/// Masked checkerboard on the cube `[-1/2, 1/2)^d`.
pub fn centred_checkerboard(a: f64, dim: usize) -> ModelKind {
    ModelKind::Model2Checkerboard {
        a: C64::new(a, 0.0),
        masked: true,
        mask: Some(BoxRegion { lo: vec![-0.5; dim], side: 1.0 }),
        dist: Distribution::Rademacher,
    }
}
