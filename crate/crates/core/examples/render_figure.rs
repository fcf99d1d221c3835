//! Writes the dilatation and the deformed coordinate grid of a random
//! checkerboard map as PPM files in the given directory (default `figures`).

use std::path::PathBuf;

use beltrami_lab::config::{default_config, from_value, ExperimentKind};
use beltrami_lab::output::write_results;
use beltrami_lab::runner;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "figures".into()));
    let mut config = default_config(ExperimentKind::Checkerboard);
    config["grid"] = json!({"d": 2, "N": 512, "L": 2});
    config["ladder"] = json!([6]);
    config["seeds"] = json!({"list": [1]});
    let bundle = runner::render(&from_value(config)?)?;
    for path in write_results(&bundle, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
