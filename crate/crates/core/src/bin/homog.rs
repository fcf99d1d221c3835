//! Command-line driver for the experiments.
//!
//! Exit status: 0 on success, 1 for configuration errors, 2 for numerical
//! failures (outputs of the work items that did finish are still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beltrami_lab::config::{default_config, from_value, ExperimentKind, LoadedConfig};
use beltrami_lab::output::write_results;
use beltrami_lab::{runner, Error};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "homog", version, about = "Random Beltrami equations and iterated singular integrals on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; a small default is used when omitted.
    #[arg(value_name = "CONFIG")]
    config_pos: Option<PathBuf>,
    #[arg(long, value_name = "PATH", conflicts_with = "config_pos")]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    emit_ppm: bool,
}

#[derive(Subcommand)]
enum Command {
    RunIterated(Common),
    RunBeltrami(Common),
    RunStripesOracle {
        #[command(flatten)]
        common: Common,
        /// Stripe amplitude.
        #[arg(long)]
        a: Option<f64>,
        /// Grid points per axis.
        #[arg(long = "N")]
        n: Option<usize>,
    },
    RunCheckerboard(Common),
    RunHgx(Common),
    RunTwobump(Common),
    RunCalculusChecks(Common),
    RunPde3d(Common),
    /// Draw the dilatation and deformed grid of a Beltrami configuration.
    Render(Common),
    /// Parse and validate a configuration without running it.
    ValidateConfig {
        #[arg(value_name = "CONFIG")]
        config_pos: Option<PathBuf>,
        #[arg(long, value_name = "PATH", conflicts_with = "config_pos")]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: invalid JSON: {e}", path.display())))
}

fn set(value: &mut Value, path: &[&str], new: Value) {
    let mut node = value;
    for key in &path[..path.len() - 1] {
        if !node.get(*key).is_some_and(Value::is_object) {
            node[*key] = json!({});
        }
        node = &mut node[*key];
    }
    node[path[path.len() - 1]] = new;
}

fn load(common: &Common, kind: Option<ExperimentKind>, overrides: &[(&[&str], Value)]) -> Result<LoadedConfig, Failure> {
    let path = common.config.as_ref().or(common.config_pos.as_ref());
    let mut value = match (path, kind) {
        (Some(p), _) => read_json(p)?,
        (None, Some(k)) => default_config(k),
        (None, None) => return Err(Failure::Config("a configuration file is required".into())),
    };
    if let Some(seed) = common.seed {
        set(&mut value, &["seeds"], json!({"list": [seed]}));
    }
    if common.emit_ppm {
        set(&mut value, &["output", "emit_ppm"], json!(true));
    }
    for (path, v) in overrides {
        set(&mut value, path, v.clone());
    }
    let mut loaded = from_value(value)?;
    if let Some(k) = kind {
        if loaded.config.experiment != k {
            return Err(Failure::Config(format!(
                "at /experiment: `{}` cannot be run by this subcommand (expected `{}`)",
                loaded.config.experiment.name(),
                k.name()
            )));
        }
    }
    if let Some(out) = &common.out {
        loaded.config.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(loaded)
}

fn execute(common: &Common, loaded: &LoadedConfig, render_only: bool) -> Result<(), Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(format!("cannot start {:?} threads: {e}", common.threads)))?;
    let bundle = pool.install(|| if render_only { runner::render(loaded) } else { runner::run(loaded) })?;
    let dir = PathBuf::from(&loaded.config.output.dir);
    let paths = write_results(&bundle, &dir).map_err(|e| Failure::Numerical(e.to_string()))?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if let Some(levels) = bundle.summary.as_array() {
        if loaded.config.experiment == ExperimentKind::StripesOracle {
            for r in levels {
                println!("a = {}  A_eff = {}  map error = {:.3e}", r["a"], r["a_eff"], r["map_error"].as_f64().unwrap_or(f64::NAN));
            }
        }
    }
    if !bundle.failures.is_empty() {
        return Err(Failure::Numerical(format!("{} work items failed; see the summary", bundle.failures.len())));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    use ExperimentKind as K;
    let (common, kind) = match &cli.command {
        Command::ValidateConfig { config_pos, config } => {
            let path = config.as_ref().or(config_pos.as_ref());
            let path = path.ok_or_else(|| Failure::Config("a configuration file is required".into()))?;
            let loaded = from_value(read_json(path)?)?;
            println!("ok {} {}", loaded.config.experiment.name(), loaded.hash);
            return Ok(());
        }
        Command::RunStripesOracle { common, a, n } => {
            let mut overrides: Vec<(&[&str], Value)> = Vec::new();
            if let Some(a) = a {
                overrides.push((&["params", "a"], json!([a])));
            }
            if let Some(n) = n {
                overrides.push((&["grid", "N"], json!(n)));
            }
            let loaded = load(common, Some(K::StripesOracle), &overrides)?;
            return execute(common, &loaded, false);
        }
        Command::Render(common) => {
            let loaded = load(common, None, &[])?;
            return execute(common, &loaded, true);
        }
        Command::RunIterated(c) => (c, K::Iterated),
        Command::RunBeltrami(c) => (c, K::Beltrami),
        Command::RunCheckerboard(c) => (c, K::Checkerboard),
        Command::RunHgx(c) => (c, K::Hgx),
        Command::RunTwobump(c) => (c, K::Twobump),
        Command::RunCalculusChecks(c) => (c, K::CalculusChecks),
        Command::RunPde3d(c) => (c, K::Pde3d),
    };
    let loaded = load(common, Some(kind), &[])?;
    execute(common, &loaded, false)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("homog: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("homog: {msg}");
            ExitCode::from(2)
        }
    }
}
