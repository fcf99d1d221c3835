//! Result bundles: raw CSV rows, a JSON summary and optional figures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::experiments::{Failure, Row};
use crate::render::Image;

pub const CSV_HEADER: &str = "experiment,j,seed,phi_id,re_pairing,im_pairing,re_A,im_A,residual,iters";

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub summary: Value,
    /// Named figures, written as `<experiment>_<name>.ppm`.
    pub images: Vec<(String, Image)>,
}

impl ResultBundle {
    pub fn new<S: Serialize>(
        experiment: &str,
        config_hash: &str,
        seeds: Vec<u64>,
        rows: Vec<Row>,
        failures: Vec<Failure>,
        summary: &S,
    ) -> Result<Self> {
        Ok(Self {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seeds,
            rows,
            failures,
            summary: serde_json::to_value(summary)?,
            images: Vec::new(),
        })
    }

    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 + 160 * self.rows.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.experiment,
                r.j,
                r.seed,
                r.phi_id,
                r.pairing.re,
                r.pairing.im,
                r.a.re,
                r.a.im,
                r.residual,
                r.iters
            );
        }
        out
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "version": env!("CARGO_PKG_VERSION"),
            "seeds": self.seeds,
            "rows": self.rows.len(),
            "failures": self.failures,
            "summary": self.summary,
        })
    }
}

/// Writes `<experiment>.csv`, `<experiment>_summary.json` and any figures
/// into `dir`, creating it if needed. Returns the written paths.
pub fn write_results(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{}.csv", bundle.experiment));
    fs::write(&csv, bundle.csv())?;
    written.push(csv);
    let summary = dir.join(format!("{}_summary.json", bundle.experiment));
    let mut text = serde_json::to_string_pretty(&bundle.summary_json())?;
    text.push('\n');
    fs::write(&summary, text)?;
    written.push(summary);
    for (name, image) in &bundle.images {
        let path = dir.join(format!("{}_{name}.ppm", bundle.experiment));
        fs::write(&path, image.to_ppm(&bundle.config_hash))?;
        written.push(path);
    }
    Ok(written)
}
