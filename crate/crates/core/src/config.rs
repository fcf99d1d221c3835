//! JSON run configuration.
//!
//! Documents are validated in full before anything is computed: unknown keys
//! are rejected, errors carry the JSON pointer of the offending value, and
//! every scale of the ladder is checked against the grid.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::beltrami::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::experiments::{default_battery, TestFunction};
use crate::fields::{BumpProfile, DilatationModel, Distribution, Envelope, ModelKind};
use crate::grid::{cplx, Grid, C64};
use crate::ops::MultiplierOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Iterated,
    Beltrami,
    StripesOracle,
    Checkerboard,
    Hgx,
    Twobump,
    CalculusChecks,
    Pde3d,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Iterated => "iterated",
            ExperimentKind::Beltrami => "beltrami",
            ExperimentKind::StripesOracle => "stripes_oracle",
            ExperimentKind::Checkerboard => "checkerboard",
            ExperimentKind::Hgx => "hgx",
            ExperimentKind::Twobump => "twobump",
            ExperimentKind::CalculusChecks => "calculus_checks",
            ExperimentKind::Pde3d => "pde3d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.d, self.n, self.l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SeedSpec {
    Count {
        count: usize,
        #[serde(default)]
        start: u64,
    },
    List {
        list: Vec<u64>,
    },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Count { count: 1, start: 0 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Count { count, start } => (0..*count as u64).map(|k| start + k).collect(),
            SeedSpec::List { list } => list.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Overrides the distortion cap of degenerate models.
    #[serde(default, rename = "K_cap")]
    pub k_cap: Option<f64>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: None, k_cap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub emit_ppm: bool,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir(), emit_ppm: false }
    }
}

/// A parsed and validated configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentKind,
    pub grid: GridSpec,
    #[serde(default)]
    pub ladder: Vec<u32>,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub operators: Vec<String>,
    #[serde(default)]
    pub test_functions: Option<Vec<TestFunction>>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Experiment-specific settings, validated per experiment.
    #[serde(default)]
    pub params: Option<Value>,
}

fn default_window() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeltramiParams {
    #[serde(default = "default_window")]
    pub window: f64,
}

impl Default for BeltramiParams {
    fn default() -> Self {
        Self { window: default_window() }
    }
}

fn default_stripe_amplitudes() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

fn default_stripe_level() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripesParams {
    #[serde(default = "default_stripe_amplitudes")]
    pub a: Vec<f64>,
    #[serde(default = "default_stripe_level")]
    pub j: u32,
    #[serde(default = "default_window")]
    pub window: f64,
}

impl Default for StripesParams {
    fn default() -> Self {
        Self { a: default_stripe_amplitudes(), j: default_stripe_level(), window: default_window() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HgxParams {
    pub profile: BumpProfile,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(with = "cplx::list")]
    pub a_values: Vec<C64>,
    pub j: u32,
}

fn default_separations() -> Vec<f64> {
    vec![8.0, 16.0]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwobumpParams {
    #[serde(default = "default_separations")]
    pub separations: Vec<f64>,
    /// Use a torus of period `16 A` with spacing 1/4 for each separation
    /// instead of the configured grid.
    #[serde(default = "default_true")]
    pub auto_grid: bool,
}

impl Default for TwobumpParams {
    fn default() -> Self {
        Self { separations: default_separations(), auto_grid: true }
    }
}

fn default_envelope() -> Envelope {
    Envelope::gaussian(&[0.1, -0.05], 0.25, 0.8)
}

fn default_envelope2() -> Envelope {
    Envelope::gaussian(&[-0.1, 0.05], 0.3, 0.5)
}

fn default_smooth() -> BumpProfile {
    BumpProfile::SmoothSquareBump { scale: 1.0 }
}

fn default_indicator() -> BumpProfile {
    BumpProfile::UnitSquareIndicator
}

fn default_beurling() -> String {
    "beurling".into()
}

fn default_phi() -> TestFunction {
    TestFunction::new(&[0.1, 0.0], 0.3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalculusParams {
    #[serde(default = "default_envelope")]
    pub envelope: Envelope,
    #[serde(default = "default_envelope2")]
    pub envelope2: Envelope,
    /// Profile of the weak-limit check.
    #[serde(default = "default_indicator")]
    pub weak_profile: BumpProfile,
    /// Profile of the operator-image and product checks.
    #[serde(default = "default_smooth")]
    pub profile: BumpProfile,
    #[serde(default = "default_smooth")]
    pub profile2: BumpProfile,
    #[serde(default = "default_beurling")]
    pub operator: String,
    #[serde(default = "default_phi")]
    pub phi: TestFunction,
}

impl Default for CalculusParams {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("defaults parse")
    }
}

fn default_source() -> Envelope {
    Envelope::gaussian(&[0.0, 0.0, 0.0], 0.2, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeParams {
    #[serde(default = "default_source")]
    pub source: Envelope,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self { source: default_source() }
    }
}

/// Experiment-specific parameters after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    None,
    Beltrami(BeltramiParams),
    Stripes(StripesParams),
    Hgx(HgxParams),
    Twobump(TwobumpParams),
    Calculus(CalculusParams),
    Pde(PdeParams),
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        let s = seg.to_string();
        if s == "?" {
            continue;
        }
        out.push('/');
        out.push_str(&s.replace('~', "~0").replace('/', "~1"));
    }
    out
}

fn decode<T: serde::de::DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize::<_, T>(value).map_err(|e| {
        let at = format!("{prefix}{}", pointer(e.path()));
        let at = if at.is_empty() { "/".to_string() } else { at };
        Error::Config(format!("at {at}: {}", e.inner()))
    })
}

/// Unknown top-level keys are reported at their own pointer.
fn check_top_level_keys(value: &Value) -> Result<()> {
    const KNOWN: [&str; 10] = [
        "experiment",
        "grid",
        "ladder",
        "seeds",
        "models",
        "operators",
        "test_functions",
        "solver",
        "output",
        "params",
    ];
    let Some(map) = value.as_object() else {
        return Err(Error::Config("at /: configuration must be a JSON object".into()));
    };
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::Config(format!("at /{key}: unknown key `{key}`")));
        }
    }
    Ok(())
}

/// A configuration together with its canonical hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ConfigFile,
    pub params: Params,
    pub hash: String,
}

impl LoadedConfig {
    pub fn grid(&self) -> Result<Grid> {
        self.config.grid.build()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.config.seeds.seeds()
    }

    pub fn operators(&self) -> Result<Vec<MultiplierOp>> {
        self.config.operators.iter().map(|s| MultiplierOp::from_name(s)).collect()
    }

    pub fn test_functions(&self) -> Vec<TestFunction> {
        self.config.test_functions.clone().unwrap_or_else(|| default_battery(self.config.grid.d))
    }

    /// Models with the solver's distortion cap applied.
    pub fn models(&self) -> Vec<ModelKind> {
        self.config
            .models
            .iter()
            .map(|m| match (m, self.config.solver.k_cap) {
                (ModelKind::Model4Degenerate { gamma, exp_p, .. }, Some(cap)) => {
                    ModelKind::Model4Degenerate { gamma: *gamma, k_cap: cap, exp_p: *exp_p }
                }
                _ => m.clone(),
            })
            .collect()
    }
}

/// sha256 of the document re-serialized with sorted keys. The `output`
/// block is left out: where results go does not change them.
pub fn config_hash(value: &Value) -> String {
    let mut value = value.clone();
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
    }
    let canonical = serde_json::to_string(&value).expect("JSON values serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<LoadedConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    from_value(value)
}

pub fn from_value(value: Value) -> Result<LoadedConfig> {
    check_top_level_keys(&value)?;
    let config: ConfigFile = decode(&value, "")?;
    let params_value = config.params.clone().unwrap_or(Value::Object(Default::default()));
    let params = match config.experiment {
        ExperimentKind::Beltrami | ExperimentKind::Checkerboard => {
            Params::Beltrami(decode(&params_value, "/params")?)
        }
        ExperimentKind::StripesOracle => Params::Stripes(decode(&params_value, "/params")?),
        ExperimentKind::Hgx => Params::Hgx(decode(&params_value, "/params")?),
        ExperimentKind::Twobump => Params::Twobump(decode(&params_value, "/params")?),
        ExperimentKind::CalculusChecks => Params::Calculus(decode(&params_value, "/params")?),
        ExperimentKind::Pde3d => Params::Pde(decode(&params_value, "/params")?),
        ExperimentKind::Iterated => {
            if config.params.as_ref().is_some_and(|p| p.as_object().is_none_or(|m| !m.is_empty())) {
                return Err(Error::Config("at /params: the iterated experiment takes no parameters".into()));
            }
            Params::None
        }
    };
    let hash = config_hash(&value);
    let loaded = LoadedConfig { config, params, hash };
    validate(&loaded)?;
    Ok(loaded)
}

fn require_ladder(c: &ConfigFile) -> Result<()> {
    if c.ladder.is_empty() {
        return Err(Error::Config("at /ladder: at least one level is required".into()));
    }
    Ok(())
}

fn check_models(grid: &Grid, ladder: &[u32], models: &[ModelKind]) -> Result<()> {
    for (i, kind) in models.iter().enumerate() {
        for &j in ladder {
            DilatationModel::new(kind.clone(), j, 0)
                .check_resolution(grid)
                .map_err(|e| Error::Resolution(format!("at /models/{i} with j = {j}: {e}")))?;
        }
        if let ModelKind::Model3Bumpfield { dist, .. } = kind {
            dist.validate()?;
        }
        if let ModelKind::Model4Degenerate { gamma, k_cap, .. } = kind {
            Distribution::DegenerateK { gamma: *gamma, k_cap: *k_cap }.validate()?;
        }
    }
    Ok(())
}

/// Structural and resolution checks that need more than the schema.
pub fn validate(loaded: &LoadedConfig) -> Result<()> {
    let c = &loaded.config;
    let grid = c.grid.build().map_err(|e| Error::Config(format!("at /grid: {e}")))?;
    if !(c.solver.tol > 0.0) {
        return Err(Error::Config("at /solver/tol: tolerance must be positive".into()));
    }
    if c.seeds.seeds().is_empty() {
        return Err(Error::Config("at /seeds: no seeds".into()));
    }
    let ops = loaded.operators().map_err(|e| Error::Config(format!("at /operators: {e}")))?;
    for (i, op) in ops.iter().enumerate() {
        op.check_dim(grid.dim()).map_err(|e| Error::Config(format!("at /operators/{i}: {e}")))?;
    }
    let models = loaded.models();
    match c.experiment {
        ExperimentKind::Iterated => {
            require_ladder(c)?;
            let m = ops.len() + 1;
            if models.len() != 1 && models.len() != m {
                return Err(Error::Config(format!("at /models: a chain of length {m} needs 1 or {m} models")));
            }
            check_models(&grid, &c.ladder, &models)?;
        }
        ExperimentKind::Beltrami | ExperimentKind::Checkerboard => {
            require_ladder(c)?;
            if grid.dim() != 2 {
                return Err(Error::Config("at /grid/d: Beltrami runs are planar".into()));
            }
            if models.len() != 1 {
                return Err(Error::Config("at /models: exactly one model is required".into()));
            }
            if c.experiment == ExperimentKind::Checkerboard
                && !matches!(models[0], ModelKind::Model2Checkerboard { .. })
            {
                return Err(Error::Config("at /models/0: the checkerboard experiment needs model2_checkerboard".into()));
            }
            check_models(&grid, &c.ladder, &models)?;
        }
        ExperimentKind::StripesOracle => {
            let Params::Stripes(p) = &loaded.params else { unreachable!() };
            if grid.dim() != 2 {
                return Err(Error::Config("at /grid/d: stripes are planar".into()));
            }
            for (i, &a) in p.a.iter().enumerate() {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::Config(format!("at /params/a/{i}: amplitude must lie in (0, 1)")));
                }
            }
            DilatationModel::new(ModelKind::Stripes { a: 0.5 }, p.j, 0)
                .check_resolution(&grid)
                .map_err(|e| Error::Resolution(format!("at /params/j: {e}")))?;
        }
        ExperimentKind::Hgx => {
            let Params::Hgx(p) = &loaded.params else { unreachable!() };
            let kind = ModelKind::Model3Bumpfield {
                envelope: Envelope::constant(C64::new(0.0, 0.0)),
                profile: p.profile.clone(),
                dist: p.dist.clone(),
            };
            check_models(&grid, &[p.j], &[kind]).map_err(|e| Error::Resolution(format!("at /params: {e}")))?;
        }
        ExperimentKind::Twobump => {
            let Params::Twobump(p) = &loaded.params else { unreachable!() };
            if p.separations.iter().any(|&a| !(a >= 0.0)) {
                return Err(Error::Config("at /params/separations: separations must be nonnegative".into()));
            }
        }
        ExperimentKind::CalculusChecks => {
            require_ladder(c)?;
            let Params::Calculus(p) = &loaded.params else { unreachable!() };
            let op = MultiplierOp::from_name(&p.operator)
                .map_err(|e| Error::Config(format!("at /params/operator: {e}")))?;
            op.check_dim(grid.dim())?;
            for profile in [&p.weak_profile, &p.profile, &p.profile2] {
                let kind = ModelKind::Model1Periodic { envelope: Envelope::constant(C64::new(0.0, 0.0)), profile: profile.clone() };
                check_models(&grid, &c.ladder, &[kind])?;
            }
        }
        ExperimentKind::Pde3d => {
            require_ladder(c)?;
            if grid.dim() != 3 {
                return Err(Error::Config("at /grid/d: the PDE ladder is three-dimensional".into()));
            }
            if models.len() != ops.len() || models.is_empty() {
                return Err(Error::Config("at /operators: one operator per model is required".into()));
            }
            check_models(&grid, &c.ladder, &models)?;
        }
    }
    Ok(())
}

/// A small runnable configuration for each experiment, used when no file
/// is given on the command line.
pub fn default_config(kind: ExperimentKind) -> Value {
    use serde_json::json;
    let checkerboard = json!({"kind": "model2_checkerboard", "a": 0.5});
    match kind {
        ExperimentKind::Iterated => json!({
            "experiment": "iterated",
            "grid": {"d": 2, "N": 256, "L": 4},
            "ladder": [3, 4, 5],
            "seeds": {"count": 8},
            "models": [{"kind": "model2_checkerboard", "a": 0.5, "masked": true}],
            "operators": ["beurling"],
        }),
        ExperimentKind::Beltrami | ExperimentKind::Checkerboard => json!({
            "experiment": kind.name(),
            "grid": {"d": 2, "N": 256, "L": 2},
            "ladder": [3, 4, 5],
            "seeds": {"count": 4},
            "models": [checkerboard],
        }),
        ExperimentKind::StripesOracle => json!({
            "experiment": "stripes_oracle",
            "grid": {"d": 2, "N": 512, "L": 4},
        }),
        ExperimentKind::Hgx => json!({
            "experiment": "hgx",
            "grid": {"d": 2, "N": 256, "L": 2},
            "seeds": {"count": 16},
            "params": {"profile": {"kind": "unit_square_indicator"}, "a_values": [0.25, 0.5], "j": 3},
        }),
        ExperimentKind::Twobump => json!({
            "experiment": "twobump",
            "grid": {"d": 2, "N": 512, "L": 128},
        }),
        ExperimentKind::CalculusChecks => json!({
            "experiment": "calculus_checks",
            "grid": {"d": 2, "N": 512, "L": 2},
            "ladder": [2, 3, 4, 5],
        }),
        ExperimentKind::Pde3d => json!({
            "experiment": "pde3d",
            "grid": {"d": 3, "N": 32, "L": 2},
            "ladder": [2, 3],
            "seeds": {"count": 2},
            "models": [{"kind": "model2_checkerboard", "a": 0.98, "masked": true,
                        "mask": {"lo": [-0.5, -0.5, -0.5], "side": 1.0}}],
            "operators": ["laplace_ratio(1,2)"],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRIPES: &str = r#"{"experiment": "stripes_oracle", "grid": {"d": 2, "N": 512, "L": 4}}"#;

    #[test]
    fn minimal_stripes_config_gets_defaults() {
        let c = parse_config_str(STRIPES).unwrap();
        assert_eq!(c.config.solver.tol, 1e-10);
        assert_eq!(c.params, Params::Stripes(StripesParams::default()));
        assert_eq!(c.seeds(), vec![0]);
        assert_eq!(c.config.output.dir, "out");
    }

    #[test]
    fn unknown_key_is_reported_with_pointer() {
        let text = r#"{"experiment": "beltrami", "grid": {"d": 2, "N": 64, "L": 4}, "modle": []}"#;
        let err = parse_config_str(text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("at /modle"), "{err}");
        let text = r#"{"experiment": "beltrami", "grid": {"d": 2, "N": 64, "L": 4, "M": 1}}"#;
        assert!(parse_config_str(text).unwrap_err().to_string().contains("at /grid"));
        let text = r#"{"experiment": "stripes_oracle", "grid": {"d": 2, "N": 64, "L": 4}, "params": {"b": 1}}"#;
        assert!(parse_config_str(text).unwrap_err().to_string().contains("at /params"));
    }

    #[test]
    fn unresolvable_scale_is_rejected() {
        let text = r#"{"experiment": "iterated", "grid": {"d": 2, "N": 256, "L": 4}, "ladder": [10],
            "models": [{"kind": "model3_bumpfield", "envelope": {"kind": "constant", "value": 0.5},
                        "profile": {"kind": "gaussian_bump", "scale": 0.5}, "dist": {"kind": "rademacher"}}]}"#;
        let err = parse_config_str(text).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)), "{err}");
        let text = r#"{"experiment": "iterated", "grid": {"d": 2, "N": 256, "L": 4}, "ladder": [4],
            "models": [{"kind": "model3_bumpfield", "envelope": {"kind": "constant", "value": 0.5},
                        "profile": {"kind": "gaussian_bump", "scale": 0.5}, "dist": {"kind": "rademacher"}}]}"#;
        // 4 samples per cell for a smooth profile.
        assert!(matches!(parse_config_str(text), Err(Error::Resolution(_))));
    }

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        let a = parse_config_str(STRIPES).unwrap();
        let b = parse_config_str(r#"{"grid":{"L":4,"N":512,"d":2},"experiment":"stripes_oracle"}"#).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
        let c = parse_config_str(r#"{"grid":{"L":4,"N":256,"d":2},"experiment":"stripes_oracle"}"#).unwrap();
        assert_ne!(a.hash, c.hash);
        let d = parse_config_str(r#"{"grid":{"L":4,"N":512,"d":2},"experiment":"stripes_oracle","output":{"dir":"x"}}"#)
            .unwrap();
        assert_eq!(a.hash, d.hash);
    }

    #[test]
    fn defaults_validate() {
        use ExperimentKind::*;
        for kind in [Iterated, Beltrami, StripesOracle, Checkerboard, Hgx, Twobump, CalculusChecks, Pde3d] {
            let c = from_value(default_config(kind)).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
            assert_eq!(c.config.experiment, kind);
        }
    }

    #[test]
    fn seed_forms() {
        let text = r#"{"experiment": "stripes_oracle", "grid": {"d": 2, "N": 64, "L": 4}, "seeds": {"count": 3, "start": 5}}"#;
        assert_eq!(parse_config_str(text).unwrap().seeds(), vec![5, 6, 7]);
        let text = r#"{"experiment": "stripes_oracle", "grid": {"d": 2, "N": 64, "L": 4}, "seeds": {"list": [9, 1]}}"#;
        assert_eq!(parse_config_str(text).unwrap().seeds(), vec![9, 1]);
    }

    #[test]
    fn structural_errors() {
        let text = r#"{"experiment": "checkerboard", "grid": {"d": 2, "N": 64, "L": 2}, "ladder": [3],
            "models": [{"kind": "stripes", "a": 0.5}]}"#;
        assert!(parse_config_str(text).unwrap_err().to_string().contains("/models/0"));
        let text = r#"{"experiment": "iterated", "grid": {"d": 2, "N": 64, "L": 2}, "ladder": [3],
            "models": [{"kind": "stripes", "a": 0.5}], "operators": ["nonsense"]}"#;
        assert!(parse_config_str(text).unwrap_err().to_string().contains("/operators"));
        assert!(parse_config_str("[1, 2]").is_err());
        assert!(parse_config_str("{not json").is_err());
    }
}
