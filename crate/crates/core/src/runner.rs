//! Runs a loaded configuration and collects a [`ResultBundle`].

use serde::Serialize;

use crate::config::{ExperimentKind, LoadedConfig, Params};
use crate::error::{Error, Result};
use crate::experiments::{
    check_product_equiv_ladder, check_t_image_ladder, check_weak_limit, chain_field, estimate_hgx, run_beltrami,
    run_iterated, run_pde3d, solve_beltrami_sample, stripes_oracle, two_bump_functional, two_bump_grid,
    BeltramiSpec, CalculusCheck, HgxSpec, IteratedSpec, Pde3dSpec, Row, StripesReport, TwoBumpReport,
};
use crate::fields::{build_dilatation, DilatationModel};
use crate::grid::C64;
use crate::ops::MultiplierOp;
use crate::output::ResultBundle;
use crate::render::{render_deformed_grid, render_dilatation, Image};

/// Side of deformed-grid figures, in pixels.
const FIGURE_SIZE: usize = 512;

fn bundle<S: Serialize>(
    loaded: &LoadedConfig,
    mut rows: Vec<Row>,
    failures: Vec<crate::experiments::Failure>,
    summary: &S,
) -> Result<ResultBundle> {
    for r in &mut rows {
        r.experiment = loaded.config.experiment.name().into();
    }
    ResultBundle::new(loaded.config.experiment.name(), &loaded.hash, loaded.seeds(), rows, failures, summary)
}

pub fn run(loaded: &LoadedConfig) -> Result<ResultBundle> {
    let c = &loaded.config;
    let grid = loaded.grid()?;
    let seeds = loaded.seeds();
    let emit = c.output.emit_ppm;
    let name = c.experiment.name();
    match (&c.experiment, &loaded.params) {
        (ExperimentKind::Iterated, _) => {
            let spec = IteratedSpec {
                grid,
                ladder: c.ladder.clone(),
                seeds: seeds.clone(),
                models: loaded.models(),
                operators: loaded.operators()?,
                test_functions: loaded.test_functions(),
            };
            let r = run_iterated(&spec)?;
            let mut b = bundle(loaded, r.rows, r.failures, &r.summary)?;
            if emit && grid.dim() == 2 {
                let j = *c.ladder.iter().max().expect("validated ladder");
                let h = chain_field(&spec, j, seeds[0])?;
                let k = h.sup_norm();
                b.images.push(("chain".into(), render_dilatation(&h, k)?));
            }
            Ok(b)
        }
        (ExperimentKind::Beltrami | ExperimentKind::Checkerboard, Params::Beltrami(p)) => {
            let spec = BeltramiSpec {
                grid,
                ladder: c.ladder.clone(),
                seeds: seeds.clone(),
                model: loaded.models()[0].clone(),
                tol: c.solver.tol,
                max_iter: c.solver.max_iter,
                window: p.window,
                test_functions: loaded.test_functions(),
            };
            let r = run_beltrami(&spec)?;
            let mut b = bundle(loaded, r.rows, r.failures, &r.summary)?;
            if emit {
                b.images = beltrami_figures(&spec)?;
            }
            Ok(b)
        }
        (ExperimentKind::StripesOracle, Params::Stripes(p)) => {
            let mut rows = Vec::new();
            let mut reports: Vec<StripesReport> = Vec::new();
            for (i, &a) in p.a.iter().enumerate() {
                let r = stripes_oracle(a, &grid, p.j, c.solver.tol, p.window)?;
                rows.push(Row {
                    experiment: name.into(),
                    j: p.j,
                    seed: 0,
                    phi_id: i,
                    pairing: C64::new(r.map_error, 0.0),
                    a: r.a_eff,
                    residual: r.residual,
                    iters: r.iterations,
                });
                reports.push(r);
            }
            bundle(loaded, rows, vec![], &reports)
        }
        (ExperimentKind::Hgx, Params::Hgx(p)) => {
            let spec = HgxSpec {
                grid,
                profile: p.profile.clone(),
                dist: p.dist.clone(),
                a_values: p.a_values.clone(),
                j: p.j,
                seeds,
                tol: c.solver.tol,
            };
            let r = estimate_hgx(&spec)?;
            bundle(loaded, r.rows, r.failures, &r.summary)
        }
        (ExperimentKind::Twobump, Params::Twobump(p)) => {
            let mut rows = Vec::new();
            let mut reports: Vec<TwoBumpReport> = Vec::new();
            for (i, &a) in p.separations.iter().enumerate() {
                let g = if p.auto_grid { two_bump_grid(a)? } else { grid };
                let r = two_bump_functional(a, &g)?;
                rows.push(Row {
                    experiment: name.into(),
                    j: 0,
                    seed: 0,
                    phi_id: i,
                    pairing: r.value,
                    a: C64::new(r.asymptote, 0.0),
                    residual: (r.ratio - 1.0).abs(),
                    iters: 0,
                });
                reports.push(r);
            }
            bundle(loaded, rows, vec![], &reports)
        }
        (ExperimentKind::CalculusChecks, Params::Calculus(p)) => {
            let op = MultiplierOp::from_name(&p.operator)?;
            let checks: Vec<CalculusCheck> = vec![
                check_weak_limit(&p.envelope, &p.weak_profile, &p.phi, &c.ladder, &grid)?,
                check_t_image_ladder(&p.envelope, &p.profile, &op, &p.phi, &c.ladder, &grid)?,
                check_product_equiv_ladder(&p.envelope, &p.profile, &p.envelope2, &p.profile2, &p.phi, &c.ladder, &grid)?,
            ];
            let rows = checks
                .iter()
                .enumerate()
                .flat_map(|(i, check)| {
                    check.rows.iter().map(move |r| Row {
                        experiment: name.into(),
                        j: r.j,
                        seed: 0,
                        phi_id: i,
                        pairing: r.pairing,
                        a: r.target,
                        residual: r.deviation,
                        iters: 0,
                    })
                })
                .collect();
            bundle(loaded, rows, vec![], &checks)
        }
        (ExperimentKind::Pde3d, Params::Pde(p)) => {
            let spec = Pde3dSpec {
                grid,
                ladder: c.ladder.clone(),
                seeds,
                layers: loaded.models().into_iter().zip(loaded.operators()?).collect(),
                source: p.source.clone(),
                tol: c.solver.tol,
                test_functions: loaded.test_functions(),
            };
            let r = run_pde3d(&spec)?;
            bundle(loaded, r.rows, r.failures, &r.summary)
        }
        (kind, _) => Err(Error::Config(format!("parameters do not match experiment {}", kind.name()))),
    }
}

/// Dilatation and deformed grid of the first seed at the finest level.
pub fn beltrami_figures(spec: &BeltramiSpec) -> Result<Vec<(String, Image)>> {
    let j = *spec.ladder.iter().max().ok_or_else(|| Error::Config("ladder is empty".into()))?;
    let seed = *spec.seeds.first().ok_or_else(|| Error::Config("no seeds".into()))?;
    let (mu, _) = build_dilatation(&spec.grid, &DilatationModel::new(spec.model.clone(), j, seed))?;
    let (_, map) = solve_beltrami_sample(spec, j, seed, &[])?;
    Ok(vec![
        ("dilatation".into(), render_dilatation(&mu, mu.sup_norm())?),
        ("deformed_grid".into(), render_deformed_grid(&map, 16, FIGURE_SIZE, spec.window)?),
    ])
}

/// Figures only, for configurations of the Beltrami experiments.
pub fn render(loaded: &LoadedConfig) -> Result<ResultBundle> {
    let c = &loaded.config;
    let Params::Beltrami(p) = &loaded.params else {
        return Err(Error::Config("at /experiment: figures are drawn for beltrami or checkerboard runs".into()));
    };
    let spec = BeltramiSpec {
        grid: loaded.grid()?,
        ladder: c.ladder.clone(),
        seeds: loaded.seeds(),
        model: loaded.models()[0].clone(),
        tol: c.solver.tol,
        max_iter: c.solver.max_iter,
        window: p.window,
        test_functions: vec![],
    };
    let mut b = bundle(loaded, vec![], vec![], &serde_json::Value::Null)?;
    b.images = beltrami_figures(&spec)?;
    Ok(b)
}
